//! Geodesics and constant-velocity curves.
//!
//! Geodesics solve the Hamilton–Jacobi equation `ψ_t + ½|ψ′|² = 0`, whose
//! velocity `u = ψ′` obeys the inviscid Burgers equation `u_t + u u_x = 0`.
//! Velocities are propagated along characteristics `x = ξ + t f(ξ)` and
//! densities are pushed forward by the same map. Constant-velocity curves
//! push the density forward by the time-`t` flow of a fixed field `ψ′`.

use serde::{Deserialize, Serialize};

use crate::connection::{bracket_of_velocities, covariant_of_velocities};
use crate::error::{Error, Result};
use crate::measure::{pushforward_coefficients, working_grid, CircleMap, Density, Potential};
use crate::metric::gradient_inner;
use crate::trigpoly::{QuadratureGrid, TrigPoly};

/// Half-width of the central difference used for `ψ̇` in the HJ residual.
const HJ_STEP: f64 = 1e-4;

/// Flow integrator target for the position error.
const FLOW_TOL: f64 = 1e-10;

/// Largest number of RK4 steps tried before giving up on the tolerance.
const MAX_FLOW_STEPS: usize = 1 << 16;

/// Initial velocity `u(0,·) = f`. A constant part is allowed and acts as a
/// rigid rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityField {
    pub u0: TrigPoly,
}

impl VelocityField {
    pub fn new(u0: TrigPoly) -> Self {
        VelocityField { u0 }
    }

    pub fn from_potential(psi: &Potential) -> Self {
        VelocityField::new(psi.gradient())
    }

    /// `ψ′ + c`.
    pub fn with_drift(psi: &Potential, c: f64) -> Self {
        let g = psi.gradient();
        let m = g.mean();
        VelocityField::new(g.with_mean(m + c))
    }

    pub fn drift(&self) -> f64 {
        self.u0.mean()
    }

    fn grid(&self) -> QuadratureGrid {
        working_grid(self.u0.degree())
    }

    /// Grid extrema of `f′`.
    fn slope_range(&self) -> (f64, f64) {
        let d = self.u0.derivative().sample(&self.grid());
        d.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// First forward time at which characteristics cross: `−1/min f′`, or `+∞`
/// when `f′ ≥ 0` everywhere (only possible for constant `f`).
pub fn shock_time(f: &VelocityField) -> f64 {
    let (lo, _) = f.slope_range();
    if lo < 0.0 {
        -1.0 / lo
    } else {
        f64::INFINITY
    }
}

/// Earliest backward time, `−1/max f′` (`−∞` when `f′ ≤ 0`).
fn backward_shock_time(f: &VelocityField) -> f64 {
    let (_, hi) = f.slope_range();
    if hi > 0.0 {
        -1.0 / hi
    } else {
        f64::NEG_INFINITY
    }
}

fn check_time(f: &VelocityField, t: f64) -> Result<()> {
    let fwd = shock_time(f);
    if t >= fwd {
        return Err(Error::ShockReached { t, shock_time: fwd });
    }
    let bwd = backward_shock_time(f);
    if t <= bwd {
        return Err(Error::ShockReached { t, shock_time: bwd });
    }
    Ok(())
}

/// Solves `ξ + t f(ξ) = x` at every grid node by safeguarded Newton.
fn foot_points(f: &TrigPoly, t: f64, grid: &QuadratureGrid) -> Vec<f64> {
    let df = f.derivative();
    let bound = t.abs()
        * (f.cos_coeffs().iter().chain(f.sin_coeffs()).map(|v| v.abs()).sum::<f64>())
        + 1e-12;
    grid.nodes()
        .into_iter()
        .map(|x| {
            let (mut lo, mut hi) = (x - bound, x + bound);
            let mut xi = x - t * f.eval(x);
            for _ in 0..100 {
                let g = xi + t * f.eval(xi) - x;
                if g > 0.0 {
                    hi = hi.min(xi);
                } else {
                    lo = lo.max(xi);
                }
                let slope = 1.0 + t * df.eval(xi);
                let mut next = xi - g / slope;
                if !(next > lo && next < hi) {
                    next = 0.5 * (lo + hi);
                }
                let step = (next - xi).abs();
                xi = next;
                if step <= 1e-15 * (1.0 + xi.abs()) {
                    break;
                }
            }
            xi
        })
        .collect()
}

/// `u(t,·)` from `u(t, ξ + t f(ξ)) = f(ξ)`, refit on `grid`.
pub fn burgers_characteristics(f: &VelocityField, t: f64, grid: &QuadratureGrid) -> Result<TrigPoly> {
    if t == 0.0 {
        return Ok(f.u0.clone());
    }
    check_time(f, t)?;
    let feet = foot_points(&f.u0, t, grid);
    let vals: Vec<f64> = feet.iter().map(|&xi| f.u0.eval(xi)).collect();
    Ok(TrigPoly::fit_adaptive(&vals))
}

/// `max |u(x) − f(x − u(x) t)|` over the grid.
pub fn burgers_implicit_residual(f: &VelocityField, t: f64, u: &TrigPoly, grid: &QuadratureGrid) -> f64 {
    grid.nodes()
        .into_iter()
        .map(|x| {
            let ux = u.eval(x);
            (ux - f.u0.eval(x - ux * t)).abs()
        })
        .fold(0.0, f64::max)
}

/// Mean-free potential of the non-constant part of a velocity.
fn potential_of(u: &TrigPoly) -> Potential {
    Potential::from_gradient(u)
}

/// Pushforward with the truncation order grown until the trailing half of
/// the spectrum is below roundoff. Returns the density and the mass defect
/// measured before renormalization.
pub(crate) fn transport_density(mu: &Density, map: &CircleMap) -> Result<(Density, f64)> {
    let cap = (map.grid().size() / 4).max(8);
    let mut order = (2 * mu.degree()).clamp(16, cap);
    let coeffs = loop {
        let c = pushforward_coefficients(mu, map, order);
        let tail = (order / 2 + 1..=order)
            .map(|k| c.a(k).abs().max(c.b(k).abs()))
            .fold(0.0, f64::max);
        if tail <= 1e-15 || order >= cap {
            break c;
        }
        order = (2 * order).min(cap);
    };
    let mass = 2.0 * std::f64::consts::PI * coeffs.mean();
    let rho = coeffs.scale(1.0 / mass).trimmed(1e-17);
    Ok((crate::measure::make_density(rho)?, mass - 1.0))
}

/// Characteristic map `x ↦ x + t f(x)` on `grid`.
fn characteristic_map(f: &VelocityField, t: f64, grid: QuadratureGrid) -> Result<CircleMap> {
    let df = f.u0.derivative();
    CircleMap::from_fn(grid, |x| (x + t * f.u0.eval(x), 1.0 + t * df.eval(x)))
}

/// A sampled geodesic with per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    pub times: Vec<f64>,
    pub densities: Vec<Density>,
    pub potentials: Vec<Potential>,
    /// Full velocity `u(t,·)`, including any constant drift.
    pub velocities: Vec<TrigPoly>,
    pub shock_time_bound: f64,
    pub hj_residuals: Vec<f64>,
    pub burgers_residuals: Vec<f64>,
    pub mass_defects: Vec<f64>,
    pub otto_speeds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicReport {
    pub t_end: f64,
    pub steps: usize,
    pub shock_time_bound: Option<f64>,
    pub max_hj_residual: f64,
    pub max_burgers_residual: f64,
    pub max_mass_defect: f64,
    pub otto_speed_initial: f64,
    pub otto_speed_relative_variation: f64,
}

impl GeodesicPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn report(&self) -> GeodesicReport {
        let max = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let s0 = self.otto_speeds[0];
        let variation = if s0 > 0.0 {
            self.otto_speeds
                .iter()
                .map(|s| (s - s0).abs() / s0)
                .fold(0.0, f64::max)
        } else {
            max(&self.otto_speeds)
        };
        GeodesicReport {
            t_end: *self.times.last().expect("non-empty path"),
            steps: self.len() - 1,
            shock_time_bound: self.shock_time_bound.is_finite().then_some(self.shock_time_bound),
            max_hj_residual: max(&self.hj_residuals),
            max_burgers_residual: max(&self.burgers_residuals),
            max_mass_defect: max(&self.mass_defects),
            otto_speed_initial: s0,
            otto_speed_relative_variation: variation,
        }
    }

    /// One row per time: `t`, density coefficients, potential coefficients.
    pub fn to_csv(&self) -> String {
        let nd = self.densities.iter().map(|d| d.degree()).max().unwrap_or(0);
        let np = self.potentials.iter().map(|p| p.degree()).max().unwrap_or(0);
        let mut head = vec!["t".to_string()];
        head.extend((0..=nd).map(|k| format!("rho_a{k}")));
        head.extend((1..=nd).map(|k| format!("rho_b{k}")));
        head.extend((1..=np).map(|k| format!("psi_a{k}")));
        head.extend((1..=np).map(|k| format!("psi_b{k}")));
        let mut out = head.join(",");
        out.push('\n');
        for ((t, d), p) in self.times.iter().zip(&self.densities).zip(&self.potentials) {
            let (r, q) = (d.rho(), p.poly());
            let mut row = vec![*t];
            row.extend((0..=nd).map(|k| r.a(k)));
            row.extend((1..=nd).map(|k| r.b(k)));
            row.extend((1..=np).map(|k| q.a(k)));
            row.extend((1..=np).map(|k| q.b(k)));
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Geodesic from `μ₀` with initial velocity `V_{ψ₀}` on `[0, t_end]`.
pub fn geodesic_evolve(mu0: &Density, psi0: &Potential, t_end: f64, steps: usize) -> Result<GeodesicPath> {
    let f = VelocityField::from_potential(psi0);
    let grid = working_grid(mu0.degree().max(f.u0.degree()));
    geodesic_evolve_field(mu0, &f, t_end, steps, grid)
}

/// As [`geodesic_evolve`], for a velocity that may carry a constant drift,
/// on an explicit grid.
pub fn geodesic_evolve_field(
    mu0: &Density,
    f: &VelocityField,
    t_end: f64,
    steps: usize,
    grid: QuadratureGrid,
) -> Result<GeodesicPath> {
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("t_end must be finite and non-negative, got {t_end}")));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    let shock = shock_time(f);
    if t_end >= shock {
        return Err(Error::ShockReached {
            t: t_end,
            shock_time: shock,
        });
    }
    let times: Vec<f64> = if t_end == 0.0 {
        vec![0.0]
    } else {
        (0..=steps).map(|k| t_end * k as f64 / steps as f64).collect()
    };
    let n = times.len();
    let mut path = GeodesicPath {
        times: times.clone(),
        densities: Vec::with_capacity(n),
        potentials: Vec::with_capacity(n),
        velocities: Vec::with_capacity(n),
        shock_time_bound: shock,
        hj_residuals: Vec::with_capacity(n),
        burgers_residuals: Vec::with_capacity(n),
        mass_defects: Vec::with_capacity(n),
        otto_speeds: Vec::with_capacity(n),
    };
    let delta = HJ_STEP.min(0.25 * (shock - t_end));
    for &t in &times {
        let u = burgers_characteristics(f, t, &grid)?;
        let (rho, defect) = if t == 0.0 {
            (mu0.clone(), 0.0)
        } else {
            transport_density(mu0, &characteristic_map(f, t, grid)?)?
        };
        let psi = potential_of(&u);

        let up = burgers_characteristics(f, t + delta, &grid)?;
        let um = burgers_characteristics(f, t - delta, &grid)?;
        let psi_dot = (potential_of(&up).poly() - potential_of(&um).poly()).scale(0.5 / delta);
        let hj = &psi_dot + &u.multiply(&u).scale(0.5);
        let hj = hj.with_mean(0.0).grid_sup(&grid);

        path.burgers_residuals.push(burgers_implicit_residual(f, t, &u, &grid));
        path.otto_speeds.push(gradient_inner(&rho, &u, &u));
        path.hj_residuals.push(hj);
        path.mass_defects.push(defect);
        path.densities.push(rho);
        path.potentials.push(psi);
        path.velocities.push(u);
    }
    Ok(path)
}

/// Time-`t` flow map of `θ̇ = g(θ)` on `grid`, by RK4 with step doubling
/// until successive refinements agree to 1e-10 in position.
pub fn flow_map(g: &TrigPoly, t: f64, grid: QuadratureGrid) -> Result<CircleMap> {
    if t == 0.0 || g.coeff_norm() == 0.0 {
        return Ok(CircleMap::identity(grid));
    }
    let dg = g.derivative();
    let start = grid.nodes();
    let run = |steps: usize| -> (Vec<f64>, Vec<f64>) {
        let h = t / steps as f64;
        let mut pos = start.clone();
        let mut logj = vec![0.0; pos.len()];
        for (x, l) in pos.iter_mut().zip(logj.iter_mut()) {
            for _ in 0..steps {
                let k1 = g.eval(*x);
                let j1 = dg.eval(*x);
                let x2 = *x + 0.5 * h * k1;
                let k2 = g.eval(x2);
                let j2 = dg.eval(x2);
                let x3 = *x + 0.5 * h * k2;
                let k3 = g.eval(x3);
                let j3 = dg.eval(x3);
                let x4 = *x + h * k3;
                let k4 = g.eval(x4);
                let j4 = dg.eval(x4);
                *x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                *l += h / 6.0 * (j1 + 2.0 * j2 + 2.0 * j3 + j4);
            }
        }
        (pos, logj)
    };
    let mut steps = 8;
    let mut coarse = run(steps);
    loop {
        let fine = run(2 * steps);
        let err = coarse
            .0
            .iter()
            .zip(&fine.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        steps *= 2;
        if err <= FLOW_TOL || steps >= MAX_FLOW_STEPS {
            let (pos, logj) = fine;
            return CircleMap::new(pos, logj.into_iter().map(f64::exp).collect());
        }
        coarse = fine;
    }
}

/// `(Φ^ψ_t)_*μ` for a velocity field given directly.
pub fn flow_pushforward(mu: &Density, g: &TrigPoly, t: f64) -> Result<Density> {
    if t == 0.0 || g.coeff_norm() == 0.0 {
        return Ok(mu.clone());
    }
    let grid = working_grid(mu.degree().max(g.degree()));
    let map = flow_map(g, t, grid)?;
    Ok(transport_density(mu, &map)?.0)
}

/// `E_μ(V_ψ) = (Φ^ψ_1)_*μ`.
pub fn exp_map(mu: &Density, psi: &Potential) -> Result<Density> {
    flow_pushforward(mu, &psi.gradient(), 1.0)
}

/// `(Φ^ψ_t)_*μ`, the curve with constant velocity field `V_ψ`.
pub fn constant_velocity_curve(mu: &Density, psi: &Potential, t: f64) -> Result<Density> {
    flow_pushforward(mu, &psi.gradient(), t)
}

/// `sup |ρ̇_t + (ρ_tψ′)′|` along the constant-velocity curve, with `ρ̇_t` by
/// central differences of half-width `h`.
pub fn continuity_residual(mu: &Density, psi: &Potential, t: f64, h: f64) -> Result<f64> {
    let g = psi.gradient();
    let rho = constant_velocity_curve(mu, psi, t)?;
    let plus = constant_velocity_curve(mu, psi, t + h)?;
    let minus = constant_velocity_curve(mu, psi, t - h)?;
    let dot = (plus.rho() - minus.rho()).scale(0.5 / h);
    let flux = rho.rho().multiply(&g).derivative();
    let grid = working_grid(dot.degree().max(flux.degree()));
    Ok((&dot + &flux).grid_sup(&grid))
}

/// Largest Otto norm, over interior times, of
/// `η̇ + ½⟨∇η, ∇ψ⟩ + ½[V_ψ, V_η]`, the covariant derivative of `V_{η_t}`
/// along the path.
pub fn parallel_residual(path: &GeodesicPath, eta: &[Potential]) -> Result<f64> {
    if eta.len() != path.len() {
        return Err(Error::InvalidArgument(format!(
            "expected {} potentials along the path, got {}",
            path.len(),
            eta.len()
        )));
    }
    let mut worst = 0.0_f64;
    for k in 1..path.len().saturating_sub(1) {
        let dt = path.times[k + 1] - path.times[k - 1];
        let eta_dot = (eta[k + 1].poly() - eta[k - 1].poly()).scale(1.0 / dt);
        let mu = &path.densities[k];
        let u = &path.velocities[k];
        let along = covariant_of_velocities(mu, u, &eta[k].gradient());
        let v = Potential::new(&eta_dot + along.poly());
        let norm = gradient_inner(mu, &v.gradient(), &v.gradient()).sqrt();
        worst = worst.max(norm);
    }
    Ok(worst)
}

/// The same residual with the covariant term split as
/// `½V_{⟨∇η,∇ψ⟩} + ½V_θ` and `θ` from the bracket machinery.
pub fn parallel_residual_bracket(path: &GeodesicPath, eta: &[Potential]) -> Result<f64> {
    if eta.len() != path.len() {
        return Err(Error::InvalidArgument(format!(
            "expected {} potentials along the path, got {}",
            path.len(),
            eta.len()
        )));
    }
    let mut worst = 0.0_f64;
    for k in 1..path.len().saturating_sub(1) {
        let dt = path.times[k + 1] - path.times[k - 1];
        let eta_dot = (eta[k + 1].poly() - eta[k - 1].poly()).scale(1.0 / dt);
        let mu = &path.densities[k];
        let u = &path.velocities[k];
        let ge = eta[k].gradient();
        let sym = Potential::new(u.multiply(&ge));
        let theta = bracket_of_velocities(mu, u, &ge)?;
        let v = Potential::new(&eta_dot + &(sym.poly() + theta.poly()).scale(0.5));
        let norm = gradient_inner(mu, &v.gradient(), &v.gradient()).sqrt();
        worst = worst.max(norm);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::make_density;
    use crate::metric::otto_inner;
    use std::f64::consts::PI;

    fn grid() -> QuadratureGrid {
        QuadratureGrid::new(4096).unwrap()
    }

    #[test]
    fn shock_time_examples() {
        assert_eq!(shock_time(&VelocityField::new(TrigPoly::constant(0.7))), f64::INFINITY);
        let s = shock_time(&VelocityField::new(TrigPoly::sin_mode(1)));
        assert!((s - 1.0).abs() < 1e-12);
        let s = shock_time(&VelocityField::new(TrigPoly::sin_mode(1) * 0.5));
        assert!((s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn characteristics_examples() {
        let c = VelocityField::new(TrigPoly::constant(0.4));
        let u = burgers_characteristics(&c, 3.0, &grid()).unwrap();
        assert!(u.max_coeff_diff(&TrigPoly::constant(0.4)) < 1e-14);

        let f = VelocityField::new(TrigPoly::sin_mode(1) * 0.3);
        assert_eq!(burgers_characteristics(&f, 0.0, &grid()).unwrap(), f.u0);
        let u = burgers_characteristics(&f, 1.0, &grid()).unwrap();
        assert!(burgers_implicit_residual(&f, 1.0, &u, &grid()) < 1e-8);

        assert!(matches!(
            burgers_characteristics(&f, 4.0, &grid()),
            Err(Error::ShockReached { .. })
        ));
    }

    #[test]
    fn rotation_generator_rotates() {
        let mu = make_density(TrigPoly::new(vec![0.0, 0.05, 0.02], vec![0.03, -0.01]).unwrap()).unwrap();
        let c = 0.7;
        let f = VelocityField::with_drift(&Potential::zero(), c);
        let path = geodesic_evolve_field(&mu, &f, 1.3, 5, grid()).unwrap();
        for (t, rho) in path.times.iter().zip(&path.densities) {
            let expect = mu.rotate(c * t);
            assert!(rho.rho().max_coeff_diff(expect.rho()) < 1e-10);
        }
    }

    #[test]
    fn zero_potential_is_constant_path() {
        let mu = Density::builtin("cos1:0.1").unwrap();
        let path = geodesic_evolve(&mu, &Potential::zero(), 0.5, 4).unwrap();
        for rho in &path.densities {
            assert!(rho.rho().max_coeff_diff(mu.rho()) < 1e-14);
        }
        let eta = vec![Potential::new(TrigPoly::sin_mode(2)); path.len()];
        assert!(parallel_residual(&path, &eta).unwrap() < 1e-14);

        let eta: Vec<Potential> = path
            .times
            .iter()
            .map(|t| Potential::new(TrigPoly::cos_mode(1) * *t))
            .collect();
        let c1 = Potential::new(TrigPoly::cos_mode(1));
        let expect = otto_inner(&mu, &c1, &c1).sqrt();
        assert!((parallel_residual(&path, &eta).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn uniform_sine_geodesic() {
        let psi = Potential::new(TrigPoly::sin_mode(1) * 0.1);
        let path = geodesic_evolve(&Density::uniform(), &psi, 0.5, 10).unwrap();
        let r = path.report();
        assert!(r.max_mass_defect < 1e-10);
        assert!(r.max_hj_residual < 1e-6, "{}", r.max_hj_residual);
        assert!(r.max_burgers_residual < 1e-8);
        assert!(r.otto_speed_relative_variation < 5e-3);
        assert!((r.shock_time_bound.unwrap() - 10.0).abs() < 1e-9);
        assert_eq!(path.to_csv().lines().count(), 12);
    }

    #[test]
    fn hj_residual_across_degrees() {
        let mu = Density::builtin("bump:0.05,2").unwrap();
        for deg in 1..=4 {
            let mut p = TrigPoly::zero(deg);
            for n in 1..=deg {
                p.set_a(n, 0.05 / n as f64);
                p.set_b(n, -0.03 / n as f64);
            }
            let psi = Potential::new(p);
            let f = VelocityField::from_potential(&psi);
            let t_end = 0.8 * shock_time(&f);
            let path = geodesic_evolve(&mu, &psi, t_end, 4).unwrap();
            let r = path.report();
            assert!(r.max_hj_residual < 1e-6, "degree {deg}: {}", r.max_hj_residual);
            assert!(r.max_mass_defect < 1e-10);
            assert!(r.otto_speed_relative_variation < 5e-3);
        }
    }

    #[test]
    fn evolve_commutes_with_rotation() {
        let mu = Density::builtin("cos1:0.1").unwrap();
        let psi = Potential::new(&TrigPoly::sin_mode(1) * 0.1 + TrigPoly::cos_mode(2) * 0.02);
        let s = 0.9;
        let a = geodesic_evolve(&mu, &psi, 0.6, 3).unwrap();
        let b = geodesic_evolve(&mu.rotate(s), &Potential::new(psi.poly().shift(s)), 0.6, 3).unwrap();
        for (x, y) in a.densities.iter().zip(&b.densities) {
            assert!(x.rotate(s).rho().max_coeff_diff(y.rho()) < 1e-8);
        }
    }

    #[test]
    fn single_row_at_zero_time() {
        let psi = Potential::new(TrigPoly::sin_mode(1) * 0.1);
        let path = geodesic_evolve(&Density::uniform(), &psi, 0.0, 10).unwrap();
        assert_eq!(path.len(), 1);
        assert!(geodesic_evolve(&Density::uniform(), &psi, 20.0, 10).is_err());
    }

    #[test]
    fn geodesic_is_self_parallel() {
        let psi = Potential::new(TrigPoly::sin_mode(1) * 0.1);
        let path = geodesic_evolve(&Density::uniform(), &psi, 0.5, 50).unwrap();
        let r = parallel_residual(&path, &path.potentials).unwrap();
        assert!(r < 2e-4, "{r}");
        let rb = parallel_residual_bracket(&path, &path.potentials).unwrap();
        assert!((r - rb).abs() < 1e-9);
    }

    #[test]
    fn exp_map_examples() {
        let mu = Density::builtin("cos1:0.1").unwrap();
        assert_eq!(exp_map(&mu, &Potential::zero()).unwrap(), mu);

        let c = 0.45;
        let rotated = flow_pushforward(&mu, &TrigPoly::constant(c), 1.0).unwrap();
        assert!(rotated.rho().max_coeff_diff(mu.rotate(c).rho()) < 1e-10);

        let psi = Potential::new(TrigPoly::sin_mode(1) * 0.05);
        let out = exp_map(&Density::uniform(), &psi).unwrap();
        assert!((out.rho().integrate() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn exp_map_matches_closed_form_flow() {
        // θ̇ = ε cos θ integrates to asinh(tan θ(t)) = asinh(tan θ₀) + εt on (−π/2, π/2)
        let eps = 0.05;
        let psi = Potential::new(TrigPoly::sin_mode(1) * eps);
        let out = exp_map(&Density::uniform(), &psi).unwrap();
        for j in 0..64 {
            let y = -PI / 2.0 + 0.01 + (PI - 0.02) * j as f64 / 63.0;
            let s = y.tan().asinh() - eps;
            let x = s.sinh().atan();
            let jac = x.cos() / y.cos();
            let expect = jac / (2.0 * PI);
            assert!((out.eval(y) - expect).abs() < 1e-9, "{} vs {expect}", out.eval(y));
        }
    }

    #[test]
    fn flow_semigroup() {
        let mu = Density::builtin("cos1:0.1").unwrap();
        let psi = Potential::new(&TrigPoly::sin_mode(1) * 0.3 + TrigPoly::cos_mode(2) * 0.1);
        let a = constant_velocity_curve(&mu, &psi, 0.7).unwrap();
        let b = constant_velocity_curve(&a, &psi, 0.5).unwrap();
        let c = constant_velocity_curve(&mu, &psi, 1.2).unwrap();
        assert!(b.rho().max_coeff_diff(c.rho()) < 1e-8);
        let one = constant_velocity_curve(&mu, &psi, 1.0).unwrap();
        assert_eq!(one, exp_map(&mu, &psi).unwrap());
        assert_eq!(constant_velocity_curve(&mu, &psi, 0.0).unwrap(), mu);
        assert!(continuity_residual(&mu, &psi, 0.4, 1e-3).unwrap() < 1e-5);
    }
}
