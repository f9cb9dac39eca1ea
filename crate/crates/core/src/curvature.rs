//! The T-tensor `T_{φψ} = (I − Π_μ)(♭∇²ψ(∇φ))`, the curvature quadruple
//! formula built from it, and a finite-difference oracle for the same
//! curvature through the frame identity
//! `R(X,Y)Z = ∇_X∇_YZ − ∇_Y∇_XZ − ∇_{[X,Y]}Z`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{exact_residual, OneForm};
use crate::connection::{bracket_potential, covariant_derivative};
use crate::error::Result;
use crate::measure::{tangent_density, Density, Potential};
use crate::metric::{otto_inner, BasisLabel};

/// Default finite-difference step of the oracle.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Quadruples evaluated by the oracle in [`flatness_report`].
pub const ORACLE_SAMPLES: usize = 50;

/// Claim under test.
pub const PAPER_CLAIM: &str = "flat";

/// `T_{φψ}`, the non-exact part of `ψ″φ′ dθ`. On the circle it equals
/// `(C/ρ) dθ` with the cut constant `C = ∫ψ″φ′ dθ / ∫ρ⁻¹ dθ`.
pub fn t_tensor(mu: &Density, phi: &Potential, psi: &Potential) -> OneForm {
    let h = psi.gradient().derivative().multiply(&phi.gradient());
    OneForm::new(exact_residual(mu, &h), mu.clone())
}

/// `∫ψ″φ′ dθ`; zero exactly when `T_{φψ}` vanishes.
pub fn cut_integral(phi: &Potential, psi: &Potential) -> f64 {
    psi.gradient().derivative().l2_dot(&phi.gradient())
}

/// `⟨T_a, T_b⟩_μ = C_a C_b ∫ρ⁻¹` from the two cut integrals.
fn t_pairing(mu_inv: f64, ca: f64, cb: f64) -> f64 {
    ca * cb / mu_inv
}

/// `⟨R̄(V₁,V₂)V₃,V₄⟩_μ = −2⟨T₁₂,T₃₄⟩ + ⟨T₂₃,T₁₄⟩ − ⟨T₁₃,T₂₄⟩`; the base
/// curvature term vanishes on the circle.
pub fn curvature_formula_potentials(mu: &Density, phi: [&Potential; 4]) -> f64 {
    let inv = mu.reciprocal_integral();
    let c = |a: usize, b: usize| cut_integral(phi[a], phi[b]);
    -2.0 * t_pairing(inv, c(0, 1), c(2, 3)) + t_pairing(inv, c(1, 2), c(0, 3))
        - t_pairing(inv, c(0, 2), c(1, 3))
}

pub fn curvature_formula(mu: &Density, i: BasisLabel, j: BasisLabel, k: BasisLabel, l: BasisLabel) -> f64 {
    let p = [i.potential(), j.potential(), k.potential(), l.potential()];
    curvature_formula_potentials(mu, [&p[0], &p[1], &p[2], &p[3]])
}

/// Directional derivative of `ν ↦ ∇_{V_b}V_c` at `μ` along `V_a`, by central
/// differences on `μ + ε·δρ_a` with one Richardson level.
fn derivative_of_covariant(
    mu: &Density,
    a: &Potential,
    b: &Potential,
    c: &Potential,
    h: f64,
) -> Result<Potential> {
    let dir = tangent_density(mu, a);
    let central = |step: f64| -> Result<Potential> {
        let plus = mu.perturbed(&dir, step)?;
        let minus = mu.perturbed(&dir, -step)?;
        let diff = &covariant_derivative(&plus, b, c) - &covariant_derivative(&minus, b, c);
        Ok(diff.scale(0.5 / step))
    };
    let coarse = central(h)?;
    let fine = central(0.5 * h)?;
    Ok(&fine.scale(4.0 / 3.0) - &coarse.scale(1.0 / 3.0))
}

/// `∇_{V_a}` of the field `ν ↦ V_{∇_{V_b}V_c}` at `μ`.
fn second_covariant(mu: &Density, a: &Potential, b: &Potential, c: &Potential, h: f64) -> Result<Potential> {
    let moving = derivative_of_covariant(mu, a, b, c, h)?;
    let frozen = covariant_derivative(mu, a, &covariant_derivative(mu, b, c));
    Ok(&moving + &frozen)
}

/// Frame-curvature oracle for potentials.
pub fn curvature_fd_oracle_potentials(mu: &Density, phi: [&Potential; 4], h: f64) -> Result<f64> {
    let [x, y, z, w] = phi;
    let xy = second_covariant(mu, x, y, z, h)?;
    let yx = second_covariant(mu, y, x, z, h)?;
    let br = bracket_potential(mu, x, y)?;
    let last = covariant_derivative(mu, &br, z);
    let r = &(&xy - &yx) - &last;
    Ok(otto_inner(mu, &r, w))
}

pub fn curvature_fd_oracle(
    mu: &Density,
    i: BasisLabel,
    j: BasisLabel,
    k: BasisLabel,
    l: BasisLabel,
    h: f64,
) -> Result<f64> {
    let p = [i.potential(), j.potential(), k.potential(), l.potential()];
    curvature_fd_oracle_potentials(mu, [&p[0], &p[1], &p[2], &p[3]], h)
}

/// `|formula − oracle| ≤ max(1e-3, 1%·|formula|)`.
pub fn values_agree(formula: f64, oracle: f64) -> bool {
    (formula - oracle).abs() <= 1e-3_f64.max(0.01 * formula.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSample {
    pub i: String,
    pub j: String,
    pub k: String,
    pub l: String,
    pub formula: f64,
    pub oracle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureReport {
    pub base: Density,
    pub order: usize,
    /// Formula value for every quadruple, indexed `((i·d + j)·d + k)·d + l`.
    pub formula_values: Vec<f64>,
    pub samples: Vec<CurvatureSample>,
    pub max_abs_formula: f64,
    pub max_abs_disagreement: f64,
    /// `max |R(i,j,k,l) + R(j,i,k,l)|` over all quadruples.
    pub max_antisymmetry: f64,
    pub all_samples_agree: bool,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReportJson {
    #[serde(rename = "N")]
    pub order: usize,
    pub max_abs_formula: f64,
    pub max_abs_disagreement: f64,
    pub max_antisymmetry: f64,
    pub all_samples_agree: bool,
    pub samples: Vec<CurvatureSample>,
    pub paper_claim: String,
    pub verdict: String,
}

impl CurvatureReport {
    pub fn to_json(&self) -> CurvatureReportJson {
        CurvatureReportJson {
            order: self.order,
            max_abs_formula: self.max_abs_formula,
            max_abs_disagreement: self.max_abs_disagreement,
            max_antisymmetry: self.max_antisymmetry,
            all_samples_agree: self.all_samples_agree,
            samples: self.samples.clone(),
            paper_claim: PAPER_CLAIM.to_string(),
            verdict: self.verdict.clone(),
        }
    }
}

/// Formula over every quadruple with indices `≤ N`, oracle on
/// [`ORACLE_SAMPLES`] seeded quadruples (half of them drawn from quadruples
/// with a nonzero formula value, when there are any).
pub fn flatness_report(mu: &Density, order: usize, seed: u64) -> Result<CurvatureReport> {
    flatness_report_with(mu, order, seed, ORACLE_SAMPLES, DEFAULT_STEP)
}

pub fn flatness_report_with(
    mu: &Density,
    order: usize,
    seed: u64,
    samples: usize,
    h: f64,
) -> Result<CurvatureReport> {
    let labels = BasisLabel::all(order);
    let pots: Vec<Potential> = labels.iter().map(|l| l.potential()).collect();
    let d = labels.len();
    let inv = mu.reciprocal_integral();
    let cut: Vec<f64> = (0..d * d)
        .map(|ab| cut_integral(&pots[ab / d], &pots[ab % d]))
        .collect();
    let c = |a: usize, b: usize| cut[a * d + b];
    let idx = |i: usize, j: usize, k: usize, l: usize| ((i * d + j) * d + k) * d + l;
    let mut formula_values = vec![0.0; d * d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    formula_values[idx(i, j, k, l)] = -2.0 * t_pairing(inv, c(i, j), c(k, l))
                        + t_pairing(inv, c(j, k), c(i, l))
                        - t_pairing(inv, c(i, k), c(j, l));
                }
            }
        }
    }
    let max_abs_formula = formula_values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut max_antisymmetry = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let s = formula_values[idx(i, j, k, l)] + formula_values[idx(j, i, k, l)];
                    max_antisymmetry = max_antisymmetry.max(s.abs());
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nonzero: Vec<usize> = (0..formula_values.len())
        .filter(|&q| formula_values[q].abs() > 1e-12)
        .collect();
    let total = d * d * d * d;
    let picks: Vec<usize> = (0..samples)
        .map(|s| {
            if s % 2 == 0 && !nonzero.is_empty() {
                nonzero[rng.random_range(0..nonzero.len())]
            } else {
                rng.random_range(0..total)
            }
        })
        .collect();
    let oracle: Vec<f64> = picks
        .par_iter()
        .map(|&q| {
            let (i, j, k, l) = (q / (d * d * d), (q / (d * d)) % d, (q / d) % d, q % d);
            curvature_fd_oracle_potentials(mu, [&pots[i], &pots[j], &pots[k], &pots[l]], h)
        })
        .collect::<Result<_>>()?;
    let mut max_abs_disagreement = 0.0_f64;
    let mut all_samples_agree = true;
    let samples: Vec<CurvatureSample> = picks
        .iter()
        .zip(&oracle)
        .map(|(&q, &o)| {
            let (i, j, k, l) = (q / (d * d * d), (q / (d * d)) % d, (q / d) % d, q % d);
            let f = formula_values[q];
            max_abs_disagreement = max_abs_disagreement.max((f - o).abs());
            all_samples_agree &= values_agree(f, o);
            CurvatureSample {
                i: labels[i].to_string(),
                j: labels[j].to_string(),
                k: labels[k].to_string(),
                l: labels[l].to_string(),
                formula: f,
                oracle: o,
            }
        })
        .collect();

    let verdict = if !all_samples_agree {
        format!(
            "inconclusive: formula and finite-difference oracle disagree (max difference {max_abs_disagreement:.3e})"
        )
    } else if max_abs_formula <= 1e-8 {
        "consistent with the flatness claim: all sampled curvature values vanish".to_string()
    } else {
        format!(
            "not flat: formula and finite-difference oracle agree on nonzero curvature (max |R| = {max_abs_formula:.6e})"
        )
    };
    Ok(CurvatureReport {
        base: mu.clone(),
        order,
        formula_values,
        samples,
        max_abs_formula,
        max_abs_disagreement,
        max_antisymmetry,
        all_samples_agree,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::project_exact;
    use crate::measure::make_density;
    use crate::trigpoly::{QuadratureGrid, TrigPoly};

    fn labels() -> Vec<BasisLabel> {
        BasisLabel::all(8)
    }

    #[test]
    fn t_tensor_examples() {
        let u = Density::uniform();
        let mu = Density::builtin("cos1:0.1").unwrap();
        for n in 1..=4 {
            for m in 1..=4 {
                let t = t_tensor(&mu, &BasisLabel::cos(n).potential(), &BasisLabel::cos(m).potential());
                assert!(t.coeff.coeff_norm() < 1e-12);
            }
        }
        let p = Potential::new(&TrigPoly::sin_mode(2) + &TrigPoly::cos_mode(3));
        assert_eq!(t_tensor(&mu, &p, &p).coeff.coeff_norm(), 0.0);

        let c1 = BasisLabel::cos(1).potential();
        let s1 = BasisLabel::sin(1).potential();
        let t = t_tensor(&u, &c1, &s1);
        assert!(t.coeff.max_coeff_diff(&TrigPoly::constant(0.5)) < 1e-12);
        // agrees with the residual of the generic projection
        let h = s1.gradient().derivative().multiply(&c1.gradient());
        let (_, res) = project_exact(&OneForm::new(h, u.clone()));
        assert!(res.coeff.max_coeff_diff(&t.coeff) < 1e-14);
    }

    #[test]
    fn t_antisymmetric_and_vanishing_off_diagonal() {
        let mu = make_density(TrigPoly::new(vec![0.0, 0.05, 0.0, 0.02], vec![0.0, -0.03, 0.01]).unwrap()).unwrap();
        let grid = QuadratureGrid::new(4096).unwrap();
        let rho = mu.rho().sample(&grid);
        for a in labels() {
            for b in labels() {
                let (pa, pb) = (a.potential(), b.potential());
                let s = &t_tensor(&mu, &pa, &pb).coeff + &t_tensor(&mu, &pb, &pa).coeff;
                assert!(s.coeff_norm() < 1e-12);
                let cut = cut_integral(&pa, &pb);
                let t = t_tensor(&mu, &pa, &pb);
                if cut == 0.0 || cut.abs() < 1e-12 {
                    assert!(t.coeff.coeff_norm() < 1e-12, "{a} {b}");
                } else {
                    assert_eq!(a.index(), b.index());
                    let ts = t.coeff.sample(&grid);
                    let c0 = ts[0] * rho[0];
                    assert!(ts.iter().zip(&rho).all(|(v, r)| (v * r - c0).abs() < 1e-10));
                }
            }
        }
    }

    #[test]
    fn formula_examples() {
        let u = Density::uniform();
        let (c1, c2, c3, c4, s1) = (
            BasisLabel::cos(1),
            BasisLabel::cos(2),
            BasisLabel::cos(3),
            BasisLabel::cos(4),
            BasisLabel::sin(1),
        );
        assert_eq!(curvature_formula(&u, c1, c2, c3, c4), 0.0);
        assert_eq!(curvature_formula(&u, s1, s1, c1, s1), 0.0);
        let v = curvature_formula(&u, c1, s1, s1, c1);
        assert!((v - 0.75).abs() < 1e-12, "{v}");
        // matches the OneForm pairing of explicit T's
        let p: Vec<Potential> = [c1, s1, s1, c1].iter().map(|l| l.potential()).collect();
        let t = |a: usize, b: usize| t_tensor(&u, &p[a], &p[b]);
        let direct = -2.0 * t(0, 1).inner(&t(2, 3)) + t(1, 2).inner(&t(0, 3)) - t(0, 2).inner(&t(1, 3));
        assert!((v - direct).abs() < 1e-12);
    }

    #[test]
    fn formula_antisymmetry() {
        let mu = Density::builtin("cos1:0.1").unwrap();
        let ls = BasisLabel::all(3);
        for &i in &ls {
            for &j in &ls {
                for &k in &ls {
                    for &l in &ls {
                        let r = curvature_formula(&mu, i, j, k, l);
                        assert!((r + curvature_formula(&mu, j, i, k, l)).abs() < 1e-12);
                        assert!((r + curvature_formula(&mu, i, j, l, k)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn oracle_examples() {
        let u = Density::uniform();
        let (c1, c2, c3, c4, s1) = (
            BasisLabel::cos(1),
            BasisLabel::cos(2),
            BasisLabel::cos(3),
            BasisLabel::cos(4),
            BasisLabel::sin(1),
        );
        let o = curvature_fd_oracle(&u, c1, c2, c3, c4, DEFAULT_STEP).unwrap();
        assert!(o.abs() < 1e-4, "{o}");
        let o = curvature_fd_oracle(&u, s1, s1, c2, c1, DEFAULT_STEP).unwrap();
        assert!(o.abs() < 1e-6);
        let f = curvature_formula(&u, c1, s1, s1, c1);
        let o = curvature_fd_oracle(&u, c1, s1, s1, c1, DEFAULT_STEP).unwrap();
        assert!(values_agree(f, o), "formula {f} oracle {o}");
    }

    #[test]
    fn report_small() {
        let r = flatness_report_with(&Density::uniform(), 3, 0, 12, DEFAULT_STEP).unwrap();
        assert!(r.max_antisymmetry <= 1e-10);
        assert!(r.all_samples_agree, "{:?}", r.samples);
        let d = 6;
        for i in (0..d).step_by(2) {
            for j in (0..d).step_by(2) {
                for k in (0..d).step_by(2) {
                    for l in (0..d).step_by(2) {
                        assert_eq!(r.formula_values[((i * d + j) * d + k) * d + l], 0.0);
                    }
                }
            }
        }
        let v = serde_json::to_value(r.to_json()).unwrap();
        assert_eq!(v["paper_claim"], "flat");
        assert_eq!(v["samples"].as_array().unwrap().len(), 12);
    }
}
