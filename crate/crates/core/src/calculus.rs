//! Weighted differential operators at a base density `μ = ρ dθ`.
//!
//! Anything that divides by ρ is evaluated on the working grid (at least
//! 4096 nodes) and refit adaptively: the fit is taken at the largest degree
//! the grid allows and trailing modes below roundoff are dropped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{working_grid, Density, Potential};
use crate::trigpoly::TrigPoly;

/// Solvability tolerance for the weighted Poisson problem.
const SOLVABILITY_TOL: f64 = 1e-10;

/// A 1-form `h dθ`, paired in `L²(μ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneForm {
    pub coeff: TrigPoly,
    pub base: Density,
}

impl OneForm {
    pub fn new(coeff: TrigPoly, base: Density) -> Self {
        OneForm { coeff, base }
    }

    /// `♭∇ψ = ψ′ dθ`.
    pub fn exact(psi: &Potential, base: Density) -> Self {
        OneForm::new(psi.gradient(), base)
    }

    /// `⟨h₁dθ, h₂dθ⟩_μ = ∫ h₁h₂ρ dθ`.
    pub fn inner(&self, other: &OneForm) -> f64 {
        weighted_integral(&self.base, &self.coeff.multiply(&other.coeff))
    }
}

/// `∫ f ρ dθ`.
pub fn weighted_integral(mu: &Density, f: &TrigPoly) -> f64 {
    f.l2_dot(mu.rho())
}

/// `g/ρ`, sampled on the working grid and refit.
pub fn divide_by_density(mu: &Density, g: &TrigPoly) -> TrigPoly {
    let grid = working_grid(g.degree().max(mu.degree()));
    let rho = mu.rho().sample(&grid);
    let gs = g.sample(&grid);
    let q: Vec<f64> = gs.iter().zip(&rho).map(|(g, r)| g / r).collect();
    TrigPoly::fit_adaptive(&q)
}

/// `div_μ(Z) = (ρZ)′/ρ`.
pub fn div_mu(mu: &Density, z: &TrigPoly) -> TrigPoly {
    let flux = mu.rho().multiply(z).derivative();
    divide_by_density(mu, &flux)
}

/// `Δ_μψ = div_μ(ψ′)`.
pub fn laplace_mu(mu: &Density, psi: &Potential) -> TrigPoly {
    div_mu(mu, &psi.gradient())
}

/// `d*_μ(h dθ) = −div_μ(h)`, the `L²(μ)` adjoint of `d`.
pub fn codifferential(alpha: &OneForm) -> TrigPoly {
    -div_mu(&alpha.base, &alpha.coeff)
}

/// Green operator `G_μ`: the mean-free `ψ` with `Δ_μψ = −f`.
///
/// Requires `∫ f ρ dθ = 0`. With `F` a primitive of `−ρf`, the solution has
/// `ψ′ = (F + C)/ρ` where `C` makes `ψ′` mean-free.
pub fn green(mu: &Density, f: &TrigPoly) -> Result<Potential> {
    let mean = weighted_integral(mu, f);
    if mean.abs() > SOLVABILITY_TOL * f.coeff_norm().max(1.0) {
        return Err(Error::NotSolvable { mean });
    }
    let source = -mu.rho().multiply(f);
    let primitive = source
        .with_mean(0.0)
        .antiderivative_meanfree()
        .expect("mean removed");
    let grid = working_grid(primitive.degree().max(mu.degree()));
    let rho = mu.rho().sample(&grid);
    let fs = primitive.sample(&grid);
    let inv_sum: f64 = rho.iter().map(|r| 1.0 / r).sum();
    let c = -fs.iter().zip(&rho).map(|(f, r)| f / r).sum::<f64>() / inv_sum;
    let grad: Vec<f64> = fs.iter().zip(&rho).map(|(f, r)| (f + c) / r).collect();
    Ok(Potential::from_gradient(&TrigPoly::fit_adaptive(&grad)))
}

/// `L²(μ)`-orthogonal split `α = ♭∇ψ + residual`.
///
/// On the circle the orthogonal complement of exact forms is spanned by
/// `dθ/ρ`, so the residual is `(C/ρ) dθ` with `C = ∫h dθ / ∫ρ⁻¹ dθ`.
pub fn project_exact(alpha: &OneForm) -> (Potential, OneForm) {
    let residual = exact_residual(&alpha.base, &alpha.coeff);
    let grad = &alpha.coeff - &residual;
    (
        Potential::from_gradient(&grad),
        OneForm::new(residual, alpha.base.clone()),
    )
}

/// `(I − Π_μ)(h dθ)` as the coefficient `C/ρ`.
pub(crate) fn exact_residual(mu: &Density, h: &TrigPoly) -> TrigPoly {
    let total = h.integrate();
    let grid = working_grid(mu.degree());
    let inv: Vec<f64> = mu.rho().sample(&grid).iter().map(|r| 1.0 / r).collect();
    if total == 0.0 {
        return TrigPoly::zero(0);
    }
    let c = total / grid.integrate(&inv);
    let scaled: Vec<f64> = inv.iter().map(|v| c * v).collect();
    TrigPoly::fit_adaptive(&scaled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{make_density, NORMALIZATION};
    use crate::trigpoly::QuadratureGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn cos1() -> Density {
        Density::builtin("cos1:0.1").unwrap()
    }

    fn random_density(rng: &mut ChaCha8Rng) -> Density {
        let mut p = TrigPoly::zero(3);
        for n in 1..=3 {
            p.set_a(n, rng.random_range(-0.03..0.03));
            p.set_b(n, rng.random_range(-0.03..0.03));
        }
        make_density(p).unwrap()
    }

    fn random_potential(rng: &mut ChaCha8Rng, degree: usize) -> Potential {
        let mut p = TrigPoly::zero(degree);
        for n in 1..=degree {
            p.set_a(n, rng.random_range(-1.0..1.0));
            p.set_b(n, rng.random_range(-1.0..1.0));
        }
        Potential::new(p)
    }

    #[test]
    fn div_mu_examples() {
        let u = Density::uniform();
        let d = div_mu(&u, &TrigPoly::cos_mode(1));
        assert!(d.max_coeff_diff(&-TrigPoly::sin_mode(1)) < 1e-14);
        assert!(div_mu(&cos1(), &TrigPoly::zero(2)).coeff_norm() < 1e-16);

        // 4096-point oracle of (ρ c₁)′/ρ
        let d = div_mu(&cos1(), &TrigPoly::cos_mode(1));
        let grid = QuadratureGrid::new(4096).unwrap();
        for t in grid.nodes().into_iter().step_by(7) {
            let rho = NORMALIZATION + 0.1 * t.cos();
            let flux_prime = -0.1 * t.sin() * t.cos() - rho * t.sin();
            assert!((d.eval(t) - flux_prime / rho).abs() < 1e-10);
        }
        assert!(weighted_integral(&cos1(), &d).abs() < 1e-10);
    }

    #[test]
    fn laplace_examples() {
        let u = Density::uniform();
        for n in 1..6 {
            let nf = (n * n) as f64;
            let c = laplace_mu(&u, &Potential::new(TrigPoly::cos_mode(n)));
            assert!(c.max_coeff_diff(&(TrigPoly::cos_mode(n) * -nf)) < 1e-12);
            let s = laplace_mu(&u, &Potential::new(TrigPoly::sin_mode(n)));
            assert!(s.max_coeff_diff(&(TrigPoly::sin_mode(n) * -nf)) < 1e-12);
        }
        let mu = Density::builtin("bump:0.05,2").unwrap();
        let psi = Potential::new(TrigPoly::sin_mode(3));
        let l = laplace_mu(&mu, &psi);
        for t in QuadratureGrid::new(4096).unwrap().nodes().into_iter().step_by(11) {
            let rho = NORMALIZATION + 0.05 * (2.0 * t).cos();
            let drho = -0.1 * (2.0 * t).sin();
            let g = 3.0 * (3.0 * t).cos();
            let dg = -9.0 * (3.0 * t).sin();
            assert!((l.eval(t) - (drho * g + rho * dg) / rho).abs() < 1e-10);
        }
    }

    #[test]
    fn green_examples() {
        let u = Density::uniform();
        for n in 1..5 {
            let psi = green(&u, &TrigPoly::cos_mode(n)).unwrap();
            let expect = TrigPoly::cos_mode(n) * (1.0 / (n * n) as f64);
            assert!(psi.poly().max_coeff_diff(&expect) < 1e-12);
            let back = laplace_mu(&u, &psi);
            assert!(back.max_coeff_diff(&-TrigPoly::cos_mode(n)) < 1e-10);
        }
        assert!(green(&cos1(), &TrigPoly::zero(0)).unwrap().poly().coeff_norm() < 1e-16);

        // general solvable f at a non-uniform density: remove the weighted mean
        let mu = cos1();
        let raw = &TrigPoly::cos_mode(1) + &(TrigPoly::sin_mode(2) * 0.5);
        let f = raw.with_mean(-weighted_integral(&mu, &raw.with_mean(0.0)));
        assert!(weighted_integral(&mu, &f).abs() < 1e-14);
        let psi = green(&mu, &f).unwrap();
        let residual = &laplace_mu(&mu, &psi) + &f;
        let grid = QuadratureGrid::new(4096).unwrap();
        assert!(residual.grid_sup(&grid) < 1e-9);
    }

    #[test]
    fn green_rejects_unsolvable_data() {
        assert!(matches!(
            green(&cos1(), &TrigPoly::constant(1.0)),
            Err(Error::NotSolvable { .. })
        ));
    }

    #[test]
    fn project_exact_examples() {
        let u = Density::uniform();
        let (psi, res) = project_exact(&OneForm::new(TrigPoly::cos_mode(1), u.clone()));
        assert!(res.coeff.coeff_norm() < 1e-15);
        assert!(psi.poly().max_coeff_diff(&TrigPoly::sin_mode(1)) < 1e-15);

        let (psi, res) = project_exact(&OneForm::new(TrigPoly::constant(1.0), u.clone()));
        let d = res.coeff.max_coeff_diff(&TrigPoly::constant(1.0));
        assert!(d < 1e-12, "residual error {d:e}");
        assert!(psi.poly().coeff_norm() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let mu = random_density(&mut rng);
            let h = random_potential(&mut rng, 5).poly().with_mean(rng.random_range(-1.0..1.0));
            let alpha = OneForm::new(h.clone(), mu.clone());
            let (psi, res) = project_exact(&alpha);
            for _ in 0..20 {
                let phi = random_potential(&mut rng, 6);
                let pairing = res.inner(&OneForm::exact(&phi, mu.clone()));
                assert!(pairing.abs() < 1e-10, "pairing {pairing}");
            }
            let rebuilt = &psi.gradient() + &res.coeff;
            assert!(rebuilt.max_coeff_diff(&h) < 1e-13);
        }
    }

    #[test]
    fn operator_properties_at_random_densities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let grid = QuadratureGrid::new(4096).unwrap();
        for _ in 0..5 {
            let mu = random_density(&mut rng);
            let psi = random_potential(&mut rng, 4);
            let phi = random_potential(&mut rng, 4);

            // Green inverse on solvable data f = −Δ_μφ
            let f = -laplace_mu(&mu, &phi);
            let sol = green(&mu, &f).unwrap();
            let res = &laplace_mu(&mu, &sol) + &f;
            assert!(res.grid_sup(&grid) < 1e-9);

            // self-adjointness in L²(μ)
            let lhs = weighted_integral(&mu, &laplace_mu(&mu, &psi).multiply(phi.poly()));
            let rhs = weighted_integral(&mu, &laplace_mu(&mu, &phi).multiply(psi.poly()));
            assert!((lhs - rhs).abs() < 1e-10);

            // idempotence of the projection on exact forms
            let (back, res) = project_exact(&OneForm::exact(&psi, mu.clone()));
            assert!(res.coeff.coeff_norm() < 1e-12);
            assert!(back.max_coeff_diff(&psi) < 1e-12);

            // residual is a constant multiple of 1/ρ
            let (_, res) = project_exact(&OneForm::new(psi.poly().with_mean(0.3), mu.clone()));
            let rs = res.coeff.sample(&grid);
            let rho = mu.rho().sample(&grid);
            let c0 = rs[0] * rho[0];
            assert!(rs.iter().zip(&rho).all(|(r, p)| (r * p - c0).abs() < 1e-12));
            assert!((c0 - 0.3 * 2.0 * PI / mu.reciprocal_integral()).abs() < 1e-12);
        }
    }
}
