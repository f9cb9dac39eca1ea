//! 2-Wasserstein distance on the circle from equal-mass quantile
//! discretizations, with a permutation brute force as the oracle.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::GeodesicPath;
use crate::measure::Density;

/// Default atom count for distance queries.
pub const DEFAULT_ATOMS: usize = 512;

/// Largest atom count the permutation oracle accepts.
pub const BRUTE_FORCE_MAX: usize = 10;

const MASS_TOL: f64 = 1e-12;

/// Finite measure on the circle as sorted `(position, mass)` atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteMeasure {
    /// Positions are reduced to `[0, 2π)` and sorted.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("measure has no atoms".into()));
        }
        if let Some(&(x, m)) = atoms.iter().find(|(x, m)| !(*m > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "atom at {x} has invalid mass {m}"
            )));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidArgument(format!(
                "atom masses sum to {total}, not 1"
            )));
        }
        let mut atoms: Vec<(f64, f64)> = atoms
            .into_iter()
            .map(|(x, m)| (x.rem_euclid(2.0 * PI), m))
            .collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(DiscreteMeasure { atoms })
    }

    /// `n` atoms of mass `1/n` at the given positions.
    pub fn equal_mass(positions: &[f64]) -> Result<Self> {
        let m = 1.0 / positions.len() as f64;
        DiscreteMeasure::new(positions.iter().map(|&x| (x, m)).collect())
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.0).collect()
    }

    fn is_equal_mass(&self) -> bool {
        let m = 1.0 / self.len() as f64;
        self.atoms.iter().all(|a| (a.1 - m).abs() <= MASS_TOL)
    }
}

/// Closed-form CDF `F(θ) = ∫₀^θ ρ`.
struct Cdf {
    a0: f64,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Cdf {
    fn new(mu: &Density) -> Self {
        let rho = mu.rho();
        let n = rho.degree();
        Cdf {
            a0: rho.mean(),
            a: (1..=n).map(|k| rho.a(k)).collect(),
            b: (1..=n).map(|k| rho.b(k)).collect(),
        }
    }

    /// `(F(θ), ρ(θ))`.
    fn eval_with_density(&self, theta: f64) -> (f64, f64) {
        let mut f = self.a0 * theta;
        let mut r = self.a0;
        let (s1, c1) = theta.sin_cos();
        let (mut s, mut c) = (s1, c1);
        for (k, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
            let kf = (k + 1) as f64;
            if k % 32 == 31 {
                (s, c) = (kf * theta).sin_cos();
            }
            f += (a * s + b * (1.0 - c)) / kf;
            r += a * c + b * s;
            (s, c) = (s * c1 + c * s1, c * c1 - s * s1);
        }
        (f, r)
    }

    /// `F(θ) = q` by Newton steps kept inside a shrinking bisection bracket.
    fn quantile(&self, q: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 2.0 * PI);
        let mut x = 2.0 * PI * q;
        for _ in 0..200 {
            let (fx, rx) = self.eval_with_density(x);
            let g = fx - q;
            if g < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let mut next = x - g / rx;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - x).abs();
            x = next;
            if step < 1e-14 || hi - lo < 1e-13 {
                break;
            }
        }
        x
    }
}

/// `n` equal-mass atoms at the quantile midpoints `(k + ½)/n` of `μ`.
pub fn discretize(mu: &Density, n: usize) -> Result<DiscreteMeasure> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 atoms, got {n}")));
    }
    let cdf = Cdf::new(mu);
    let positions: Vec<f64> = (0..n)
        .map(|k| cdf.quantile((k as f64 + 0.5) / n as f64))
        .collect();
    DiscreteMeasure::equal_mass(&positions)
}

/// Geodesic distance on the unit circle.
pub fn circle_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn cyclic_cost(xs: &[f64], ys: &[f64], offset: usize) -> f64 {
    let n = xs.len();
    xs.iter()
        .enumerate()
        .map(|(i, &x)| circle_distance(x, ys[(i + offset) % n]).powi(2))
        .sum::<f64>()
        / n as f64
}

/// Exact `W₂` between equal-mass measures of equal size, as the best of
/// the `n` cyclic shifts of the sorted assignment.
pub fn w2_cyclic(alpha: &DiscreteMeasure, beta: &DiscreteMeasure) -> Result<f64> {
    if alpha.len() != beta.len() || !alpha.is_equal_mass() || !beta.is_equal_mass() {
        return Err(Error::UnequalMasses);
    }
    let (xs, ys) = (alpha.positions(), beta.positions());
    let best = (0..xs.len())
        .into_par_iter()
        .map(|k| cyclic_cost(&xs, &ys, k))
        .reduce(|| f64::INFINITY, f64::min);
    Ok(best.sqrt())
}

/// `W₂(μ, ν)` from `n`-point quantile discretizations.
///
/// The squared cost of the monotone rearrangement with cut `s` is
/// `(1/n) Σ_k d(F⁻¹(q_k), G⁻¹(q_k − s))²` at midpoints `q_k = (k + ½)/n`.
/// Scanning the `n` cyclic offsets `s = j/n` picks the best equal-mass
/// assignment; a golden-section search over `s` within one offset of it
/// then removes the `1/n` granularity of the cut.
pub fn w2_circle(mu: &Density, nu: &Density, n: usize) -> Result<f64> {
    let alpha = discretize(mu, n)?;
    let beta = discretize(nu, n)?;
    let (xs, ys) = (alpha.positions(), beta.positions());
    let (j0, c0) = (0..n)
        .into_par_iter()
        .map(|j| (j, cyclic_cost(&xs, &ys, j)))
        .reduce(|| (0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let cdf = Cdf::new(nu);
    let cost = |s: f64| -> f64 {
        xs.iter()
            .enumerate()
            .map(|(k, &x)| {
                let q = ((k as f64 + 0.5) / n as f64 + s).rem_euclid(1.0);
                circle_distance(x, cdf.quantile(q)).powi(2)
            })
            .sum::<f64>()
            / n as f64
    };
    let h = 1.0 / n as f64;
    let centre = j0 as f64 * h;
    let (mut a, mut b) = (centre - h, centre + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    while b - a > 1e-7 * h {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = cost(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = cost(x2);
        }
    }
    Ok(c0.min(f1).min(f2).sqrt())
}

/// Exact minimum over all `n!` permutation couplings.
pub fn w2_bruteforce(alpha: &DiscreteMeasure, beta: &DiscreteMeasure) -> Result<f64> {
    let n = alpha.len().max(beta.len());
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooLarge { n });
    }
    if alpha.len() != beta.len() || !alpha.is_equal_mass() || !beta.is_equal_mass() {
        return Err(Error::UnequalMasses);
    }
    let (xs, ys) = (alpha.positions(), beta.positions());
    let cost: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| ys.iter().map(|&y| circle_distance(x, y).powi(2)).collect())
        .collect();
    let total = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>();

    // Heap's algorithm
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    let mut best = total(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(total(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok((best / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementReport {
    pub atoms: usize,
    pub times: Vec<f64>,
    /// `W₂(μ₀, μ_t)` at each time.
    pub distances: Vec<f64>,
    /// Least-squares slope of the distances through the origin.
    pub slope: f64,
    /// `max |W(t) − slope·t| / (slope·t_max)`.
    pub max_relative_deviation: f64,
    /// `‖V_{ψ₀}‖_{μ₀}`, the speed a geodesic should have.
    pub otto_speed: f64,
}

/// Linearity of `t ↦ W₂(μ₀, μ_t)` along a path.
pub fn displacement_check(path: &GeodesicPath, n: usize) -> Result<DisplacementReport> {
    let distances: Vec<f64> = path
        .densities
        .par_iter()
        .map(|d| w2_circle(&path.densities[0], d, n))
        .collect::<Result<_>>()?;
    let (stw, stt) = path
        .times
        .iter()
        .zip(&distances)
        .fold((0.0, 0.0), |(a, b), (t, w)| (a + t * w, b + t * t));
    let slope = if stt > 0.0 { stw / stt } else { 0.0 };
    let t_max = path.times.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    let scale = slope * t_max;
    let max_relative_deviation = if scale > 0.0 {
        path.times
            .iter()
            .zip(&distances)
            .map(|(t, w)| (w - slope * t).abs() / scale)
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(DisplacementReport {
        atoms: n,
        times: path.times.clone(),
        distances,
        slope,
        max_relative_deviation,
        otto_speed: path.otto_speeds[0].sqrt(),
    })
}
