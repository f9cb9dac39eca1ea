//! Smooth positive probability densities on the circle and their tangent vectors.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trigpoly::{QuadratureGrid, TrigPoly, DEFAULT_GRID};

/// Lower bound every density must respect on the positivity grid.
pub const POSITIVITY_FLOOR: f64 = 1e-9;

/// Constant coefficient of a probability density, `1/(2π)`.
pub const NORMALIZATION: f64 = 1.0 / (2.0 * PI);

/// Tolerance on `a₀` when loading an already-normalized density.
const NORMALIZATION_TOL: f64 = 1e-12;

/// A point `μ = ρ dθ` of the smooth positive densities on the circle.
///
/// The constant coefficient is pinned to `1/(2π)` and the density is
/// at least [`POSITIVITY_FLOOR`] on a grid of at least 4096 nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrigPoly", into = "TrigPoly")]
pub struct Density {
    rho: TrigPoly,
}

impl TryFrom<TrigPoly> for Density {
    type Error = Error;

    fn try_from(rho: TrigPoly) -> Result<Self> {
        Density::from_normalized(rho)
    }
}

impl From<Density> for TrigPoly {
    fn from(d: Density) -> Self {
        d.rho
    }
}

/// Validates `coeffs` as a density, overriding its constant term with `1/(2π)`.
pub fn make_density(coeffs: TrigPoly) -> Result<Density> {
    let rho = coeffs.with_mean(NORMALIZATION);
    let grid = positivity_grid(rho.degree());
    let (theta, value) = rho.grid_min(&grid);
    if !(value >= POSITIVITY_FLOOR) {
        return Err(Error::NotPositive { theta, value });
    }
    Ok(Density { rho })
}

fn positivity_grid(degree: usize) -> QuadratureGrid {
    let g = QuadratureGrid::for_degree(degree);
    if g.size() < DEFAULT_GRID {
        QuadratureGrid::new(DEFAULT_GRID).expect("power of two")
    } else {
        g
    }
}

impl Density {
    /// The uniform probability measure `dθ/(2π)`.
    pub fn uniform() -> Self {
        Density {
            rho: TrigPoly::constant(NORMALIZATION),
        }
    }

    /// Accepts a polynomial whose `a₀` must already equal `1/(2π)` to 1e-12.
    pub fn from_normalized(rho: TrigPoly) -> Result<Self> {
        if (rho.mean() - NORMALIZATION).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { a0: rho.mean() });
        }
        make_density(rho)
    }

    /// Named densities: `uniform`, `cos1:ε` (a₁ = ε) and `bump:ε,m` (a_m = ε).
    pub fn builtin(name: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown density name `{name}`"));
        if name == "uniform" {
            return Ok(Density::uniform());
        }
        if let Some(eps) = name.strip_prefix("cos1:") {
            let eps: f64 = eps.trim().parse().map_err(|_| bad())?;
            let mut p = TrigPoly::zero(1);
            p.set_a(1, eps);
            return make_density(p);
        }
        if let Some(rest) = name.strip_prefix("bump:") {
            let (eps, m) = rest.split_once(',').ok_or_else(bad)?;
            let eps: f64 = eps.trim().parse().map_err(|_| bad())?;
            let m: usize = m.trim().parse().map_err(|_| bad())?;
            if m == 0 {
                return Err(Error::InvalidArgument("bump mode must be at least 1".into()));
            }
            let mut p = TrigPoly::zero(m);
            p.set_a(m, eps);
            return make_density(p);
        }
        Err(bad())
    }

    pub fn rho(&self) -> &TrigPoly {
        &self.rho
    }

    pub fn degree(&self) -> usize {
        self.rho.degree()
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.rho.eval(theta)
    }

    /// Grid minimum of ρ and where it is attained.
    pub fn min_on_grid(&self) -> (f64, f64) {
        self.rho.grid_min(&positivity_grid(self.rho.degree()))
    }

    /// `∫ 1/ρ dθ` by the rectangle rule on the working grid.
    pub fn reciprocal_integral(&self) -> f64 {
        let grid = working_grid(self.rho.degree());
        grid.integrate(
            &self
                .rho
                .sample(&grid)
                .iter()
                .map(|v| 1.0 / v)
                .collect::<Vec<_>>(),
        )
    }

    /// Pushforward by the rotation `θ ↦ θ + s`.
    pub fn rotate(&self, s: f64) -> Density {
        rotate(self, s)
    }

    /// Raw affine perturbation `ρ + ε·δρ`, validated as a density.
    pub fn perturbed(&self, direction: &TrigPoly, eps: f64) -> Result<Density> {
        make_density(&self.rho + &direction.scale(eps))
    }
}

/// Grid used for sampled operations at a density of the given degree.
pub(crate) fn working_grid(degree: usize) -> QuadratureGrid {
    positivity_grid(degree)
}

/// Pushforward of `μ` by the rotation `θ ↦ θ + s`.
pub fn rotate(mu: &Density, s: f64) -> Density {
    Density {
        rho: mu.rho.shift(s),
    }
}

/// A mean-free potential `ψ`, representing the tangent vector `V_ψ`.
///
/// Constants generate the zero tangent vector, so the constant term is
/// always dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "TrigPoly", into = "TrigPoly")]
pub struct Potential(TrigPoly);

impl From<TrigPoly> for Potential {
    fn from(p: TrigPoly) -> Self {
        Potential::new(p)
    }
}

impl From<Potential> for TrigPoly {
    fn from(p: Potential) -> Self {
        p.0
    }
}

impl Potential {
    pub fn new(poly: TrigPoly) -> Self {
        Potential(poly.with_mean(0.0))
    }

    pub fn zero() -> Self {
        Potential(TrigPoly::zero(0))
    }

    pub fn poly(&self) -> &TrigPoly {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.degree()
    }

    /// `ψ′`, the coefficient of the gradient field `ψ′ ∂_θ`.
    pub fn gradient(&self) -> TrigPoly {
        self.0.derivative()
    }

    /// Mean-free potential whose gradient is `g − mean(g)`.
    pub fn from_gradient(g: &TrigPoly) -> Self {
        Potential(
            g.with_mean(0.0)
                .antiderivative_meanfree()
                .expect("mean removed"),
        )
    }

    pub fn max_coeff_diff(&self, other: &Potential) -> f64 {
        self.0.max_coeff_diff(&other.0)
    }

    pub fn scale(&self, s: f64) -> Potential {
        Potential(self.0.scale(s))
    }
}

impl Add for &Potential {
    type Output = Potential;
    fn add(self, rhs: &Potential) -> Potential {
        Potential(&self.0 + &rhs.0)
    }
}

impl Sub for &Potential {
    type Output = Potential;
    fn sub(self, rhs: &Potential) -> Potential {
        Potential(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &Potential {
    type Output = Potential;
    fn mul(self, rhs: f64) -> Potential {
        self.scale(rhs)
    }
}

/// A tangent vector `V_ψ` at a base density.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: Density,
    pub potential: Potential,
}

impl TangentVector {
    pub fn new(base: Density, potential: Potential) -> Self {
        TangentVector { base, potential }
    }

    /// Signed density `δρ = −(ρψ′)′` of `V_ψ`, from the continuity equation.
    pub fn tangent_density(&self) -> TrigPoly {
        tangent_density(&self.base, &self.potential)
    }
}

/// `δρ = −(ρψ′)′`.
pub fn tangent_density(mu: &Density, psi: &Potential) -> TrigPoly {
    let flux = mu.rho.multiply(&psi.gradient());
    let mut d = -flux.derivative();
    d.set_a(0, 0.0);
    d
}

/// An orientation-preserving circle diffeomorphism sampled at the nodes of a
/// uniform grid: lifted images `T(θ_j)` and derivatives `T′(θ_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleMap {
    grid: QuadratureGrid,
    image: Vec<f64>,
    derivative: Vec<f64>,
}

impl CircleMap {
    /// Validates samples; images may be given modulo 2π and are re-lifted so
    /// that `T(θ) − θ` is continuous.
    pub fn new(image: Vec<f64>, derivative: Vec<f64>) -> Result<Self> {
        if image.len() != derivative.len() {
            return Err(Error::InvalidArgument(
                "image and derivative sample counts differ".into(),
            ));
        }
        let grid = QuadratureGrid::new(image.len())?;
        if let Some((index, &d)) = derivative
            .iter()
            .enumerate()
            .find(|(_, d)| !(**d > 0.0) || !d.is_finite())
        {
            return Err(Error::NotDiffeo {
                index,
                derivative: d,
            });
        }
        let two_pi = 2.0 * PI;
        let mut lifted = Vec::with_capacity(image.len());
        let mut prev_disp = f64::NAN;
        for (j, &t) in image.iter().enumerate() {
            let raw = t - grid.node(j);
            let disp = if j == 0 {
                raw - two_pi * (raw / two_pi).round()
            } else {
                raw - two_pi * ((raw - prev_disp) / two_pi).round()
            };
            prev_disp = disp;
            lifted.push(grid.node(j) + disp);
        }
        let m = lifted.len();
        for j in 0..m {
            let next = if j + 1 < m {
                lifted[j + 1]
            } else {
                lifted[0] + two_pi
            };
            if !(next > lifted[j]) {
                return Err(Error::NotDiffeo {
                    index: j,
                    derivative: derivative[j],
                });
            }
        }
        Ok(CircleMap {
            grid,
            image: lifted,
            derivative,
        })
    }

    pub fn from_fn(grid: QuadratureGrid, f: impl Fn(f64) -> (f64, f64)) -> Result<Self> {
        let (image, derivative) = grid.nodes().into_iter().map(f).unzip();
        CircleMap::new(image, derivative)
    }

    pub fn identity(grid: QuadratureGrid) -> Self {
        CircleMap::from_fn(grid, |t| (t, 1.0)).expect("identity is a diffeomorphism")
    }

    pub fn rotation(grid: QuadratureGrid, s: f64) -> Self {
        CircleMap::from_fn(grid, |t| (t + s, 1.0)).expect("rotation is a diffeomorphism")
    }

    pub fn grid(&self) -> QuadratureGrid {
        self.grid
    }

    pub fn image(&self) -> &[f64] {
        &self.image
    }

    pub fn derivative(&self) -> &[f64] {
        &self.derivative
    }
}

/// Unnormalized Fourier coefficients of `T_*μ` up to `order`.
///
/// Uses the change of variables `∫ρ_new(y) e^{-iky} dy = ∫ρ(x) e^{-ikT(x)} dx`;
/// the right side is a smooth periodic integrand in `x`, so the rectangle
/// rule on the map's grid is spectrally accurate and no inversion of `T`
/// is needed. The returned `a₀` is the transported mass divided by 2π.
pub fn pushforward_coefficients(mu: &Density, map: &CircleMap, order: usize) -> TrigPoly {
    let grid = map.grid();
    let rho = mu.rho.sample(&grid);
    let w = grid.weight();
    let mut cos = vec![0.0; order + 1];
    let mut sin = vec![0.0; order];
    for (&r, &t) in rho.iter().zip(map.image()) {
        cos[0] += r;
        let (s1, c1) = t.sin_cos();
        let (mut s, mut c) = (s1, c1);
        for k in 1..=order {
            if k % 32 == 0 {
                let (sk, ck) = (k as f64 * t).sin_cos();
                s = sk;
                c = ck;
            }
            cos[k] += r * c;
            sin[k - 1] += r * s;
            let (ns, nc) = (s * c1 + c * s1, c * c1 - s * s1);
            s = ns;
            c = nc;
        }
    }
    cos[0] *= w / (2.0 * PI);
    for v in cos.iter_mut().skip(1).chain(sin.iter_mut()) {
        *v *= w / PI;
    }
    TrigPoly::new(cos, sin).expect("consistent lengths")
}

/// `T_*μ`, truncated to `order` and validated as a density.
pub fn pushforward(mu: &Density, map: &CircleMap, order: usize) -> Result<Density> {
    make_density(pushforward_coefficients(mu, map, order))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos1(eps: f64) -> TrigPoly {
        let mut p = TrigPoly::zero(1);
        p.set_a(1, eps);
        p
    }

    #[test]
    fn make_density_examples() {
        let u = make_density(TrigPoly::zero(3)).unwrap();
        assert_eq!(u.rho().mean(), NORMALIZATION);
        assert!((u.rho().integrate() - 1.0).abs() < 1e-15);

        let d = make_density(cos1(0.1)).unwrap();
        let (_, min) = d.min_on_grid();
        assert!((min - (NORMALIZATION - 0.1)).abs() < 1e-12);

        match make_density(cos1(0.2)) {
            Err(Error::NotPositive { theta, value }) => {
                assert!((theta - PI).abs() < 1e-12);
                assert!(value < 0.0);
            }
            other => panic!("expected NotPositive, got {other:?}"),
        }
    }

    #[test]
    fn density_json_requires_normalization() {
        let ok = format!(r#"{{"N":1,"a":[{},0.05],"b":[0.0]}}"#, NORMALIZATION);
        let d: Density = serde_json::from_str(&ok).unwrap();
        assert_eq!(d.rho().a(1), 0.05);
        let bad = r#"{"N":1,"a":[0.2,0.05],"b":[0.0]}"#;
        assert!(serde_json::from_str::<Density>(bad).is_err());
    }

    #[test]
    fn builtin_names() {
        assert_eq!(Density::builtin("uniform").unwrap(), Density::uniform());
        assert_eq!(Density::builtin("cos1:0.1").unwrap().rho().a(1), 0.1);
        let b = Density::builtin("bump:0.05,2").unwrap();
        assert_eq!(b.rho().a(2), 0.05);
        assert_eq!(b.degree(), 2);
        assert!(Density::builtin("cos1:0.2").is_err());
        assert!(Density::builtin("gauss").is_err());
    }

    #[test]
    fn tangent_density_examples() {
        let u = Density::uniform();
        let d = tangent_density(&u, &Potential::new(TrigPoly::cos_mode(1)));
        assert!(d.max_coeff_diff(&(TrigPoly::cos_mode(1) * NORMALIZATION)) < 1e-16);

        let d = tangent_density(&Density::builtin("cos1:0.1").unwrap(), &Potential::zero());
        assert_eq!(d.coeff_norm(), 0.0);

        // quadrature oracle: sample −(ρψ′)′ at high resolution
        let mu = Density::builtin("cos1:0.1").unwrap();
        let psi = Potential::new(TrigPoly::sin_mode(2));
        let d = tangent_density(&mu, &psi);
        assert_eq!(d.mean(), 0.0);
        let grid = QuadratureGrid::new(4096).unwrap();
        for (j, t) in grid.nodes().iter().enumerate().step_by(97) {
            // ρ = 1/2π + 0.1 cos θ, ψ′ = 2 cos 2θ
            let rho = NORMALIZATION + 0.1 * t.cos();
            let drho = -0.1 * t.sin();
            let g = 2.0 * (2.0 * t).cos();
            let dg = -4.0 * (2.0 * t).sin();
            let expect = -(drho * g + rho * dg);
            assert!((d.eval(*t) - expect).abs() < 1e-14, "node {j}");
        }
        let u = tangent_density(&Density::uniform(), &psi);
        assert!(u.max_coeff_diff(&(TrigPoly::sin_mode(2) * (4.0 * NORMALIZATION))) < 1e-15);
    }

    #[test]
    fn rotate_examples() {
        let u = Density::uniform();
        assert_eq!(u.rotate(1.3), u);
        let d = Density::builtin("cos1:0.1").unwrap();
        let r = d.rotate(PI);
        assert!((r.rho().a(1) + 0.1).abs() < 1e-15);
        let r = d.rotate(PI / 2.0);
        assert!(r.rho().a(1).abs() < 1e-15);
        assert!((r.rho().b(1) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn pushforward_identity_and_rotation() {
        let mu = Density::builtin("bump:0.05,3").unwrap();
        let grid = QuadratureGrid::new(256).unwrap();
        let id = pushforward(&mu, &CircleMap::identity(grid), 3).unwrap();
        assert!(id.rho().max_coeff_diff(mu.rho()) < 1e-15);

        let s = 0.7;
        let rotated = pushforward(&mu, &CircleMap::rotation(grid, s), 3).unwrap();
        assert!(rotated.rho().max_coeff_diff(mu.rotate(s).rho()) < 1e-10);
    }

    #[test]
    fn pushforward_conserves_mass_for_piecewise_map() {
        // T′ = 2 on [0, π/2), then 2/3 on [π/2, 2π): T(π/2) = π, T(2π) = 2π
        let grid = QuadratureGrid::new(1024).unwrap();
        let map = CircleMap::from_fn(grid, |t| {
            if t < PI / 2.0 {
                (2.0 * t, 2.0)
            } else {
                (PI + (t - PI / 2.0) * 2.0 / 3.0, 2.0 / 3.0)
            }
        })
        .unwrap();
        let raw = pushforward_coefficients(&Density::uniform(), &map, 16);
        assert!((raw.integrate() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pushforward_rejects_orientation_reversal() {
        let grid = QuadratureGrid::new(64).unwrap();
        let err = CircleMap::from_fn(grid, |t| (-t, -1.0)).unwrap_err();
        assert!(matches!(err, Error::NotDiffeo { index: 0, .. }));
        // positive derivative samples but non-monotone images
        let err = CircleMap::from_fn(grid, |t| (t + 0.9 * (8.0 * t).sin(), 1.0)).unwrap_err();
        assert!(matches!(err, Error::NotDiffeo { .. }));
    }

    #[test]
    fn pushforward_then_inverse_recovers_density() {
        let mu = Density::builtin("cos1:0.1").unwrap();
        let eps = 0.2;
        let grid = QuadratureGrid::new(2048).unwrap();
        let forward = CircleMap::from_fn(grid, |t| (t + eps * t.sin(), 1.0 + eps * t.cos())).unwrap();
        // inverse by Newton at every node
        let inverse = CircleMap::from_fn(grid, |y| {
            let mut x = y;
            for _ in 0..50 {
                x -= (x + eps * x.sin() - y) / (1.0 + eps * x.cos());
            }
            (x, 1.0 / (1.0 + eps * x.cos()))
        })
        .unwrap();
        let mid = pushforward(&mu, &forward, 64).unwrap();
        let back = pushforward(&mid, &inverse, 64).unwrap();
        assert!(back.rho().max_coeff_diff(mu.rho()) < 1e-8);
        assert!(back.rho().with_degree(1).max_coeff_diff(mu.rho()) < 1e-8);
    }
}
