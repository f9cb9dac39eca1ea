//! Truncated real trigonometric polynomials on `[0, 2π)`.
//!
//! A [`TrigPoly`] of degree `N` represents
//!
//! ```text
//! f(θ) = a₀ + Σ_{n=1..N} (a_n cos nθ + b_n sin nθ)
//! ```
//!
//! with no ½ factor on the constant term. Products, derivatives and
//! integrals are exact on coefficients; sampling and fitting go through an
//! FFT on uniform grids, where the rectangle rule is exact for every
//! polynomial of degree below the grid size.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default working grid for sampled operations (positivity checks, division by ρ).
pub const DEFAULT_GRID: usize = 4096;

/// Relative threshold below which trailing Fourier modes of a fitted
/// polynomial are dropped.
pub const TRIM_RTOL: f64 = 1e-14;

/// Degree product above which [`TrigPoly::multiply`] switches from direct
/// convolution to FFT sampling.
const DIRECT_PRODUCT_LIMIT: usize = 8192;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_forward(buf: &mut [Complex<f64>]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

fn fft_inverse(buf: &mut [Complex<f64>]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
}

/// Uniform periodic quadrature grid `θ_j = 2πj/M` with equal weights `2π/M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureGrid {
    size: usize,
}

impl QuadratureGrid {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 || !size.is_power_of_two() {
            return Err(Error::InvalidGrid { size });
        }
        Ok(QuadratureGrid { size })
    }

    /// Smallest power-of-two grid that represents polynomials of `degree`
    /// without aliasing, i.e. `M ≥ 2·degree + 2`.
    pub fn for_degree(degree: usize) -> Self {
        QuadratureGrid {
            size: (2 * degree + 2).next_power_of_two(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weight(&self) -> f64 {
        2.0 * PI / self.size as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.size as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.size).map(|j| self.node(j)).collect()
    }

    /// Rectangle-rule integral of sampled values over one period.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        debug_assert_eq!(samples.len(), self.size);
        samples.iter().sum::<f64>() * self.weight()
    }

    /// Largest degree a fit on this grid can return.
    pub fn max_fit_degree(&self) -> usize {
        (self.size / 2).saturating_sub(1)
    }
}

/// Truncated trigonometric polynomial with cosine coefficients `a[0..=N]`
/// and sine coefficients `b[1..=N]`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrigPolyJson", into = "TrigPolyJson")]
pub struct TrigPoly {
    cos: Vec<f64>,
    // sin[n - 1] holds b_n
    sin: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TrigPolyJson {
    #[serde(rename = "N")]
    degree: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TryFrom<TrigPolyJson> for TrigPoly {
    type Error = Error;

    fn try_from(value: TrigPolyJson) -> Result<Self> {
        if value.a.len() != value.degree + 1 {
            return Err(Error::InvalidArgument(format!(
                "N = {} requires {} cosine coefficients, got {}",
                value.degree,
                value.degree + 1,
                value.a.len()
            )));
        }
        TrigPoly::new(value.a, value.b)
    }
}

impl From<TrigPoly> for TrigPolyJson {
    fn from(p: TrigPoly) -> Self {
        TrigPolyJson {
            degree: p.degree(),
            a: p.cos,
            b: p.sin,
        }
    }
}

impl fmt::Debug for TrigPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrigPoly")
            .field("N", &self.degree())
            .field("a", &self.cos)
            .field("b", &self.sin)
            .finish()
    }
}

impl TrigPoly {
    /// Builds a polynomial from `a = [a₀..a_N]` and `b = [b₁..b_N]`.
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidArgument(
                "cosine coefficient array must contain a0".into(),
            ));
        }
        if b.len() + 1 != a.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} sine coefficients for degree {}, got {}",
                a.len() - 1,
                a.len() - 1,
                b.len()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        Ok(TrigPoly { cos: a, sin: b })
    }

    pub fn zero(degree: usize) -> Self {
        TrigPoly {
            cos: vec![0.0; degree + 1],
            sin: vec![0.0; degree],
        }
    }

    pub fn constant(c: f64) -> Self {
        TrigPoly {
            cos: vec![c],
            sin: Vec::new(),
        }
    }

    /// `cos nθ`.
    pub fn cos_mode(n: usize) -> Self {
        let mut p = TrigPoly::zero(n);
        p.cos[n] = 1.0;
        p
    }

    /// `sin nθ`; `n` must be at least 1.
    pub fn sin_mode(n: usize) -> Self {
        assert!(n >= 1, "sin 0θ is identically zero");
        let mut p = TrigPoly::zero(n);
        p.sin[n - 1] = 1.0;
        p
    }

    pub fn degree(&self) -> usize {
        self.sin.len()
    }

    /// Cosine coefficient `a_n`, zero beyond the degree.
    pub fn a(&self, n: usize) -> f64 {
        self.cos.get(n).copied().unwrap_or(0.0)
    }

    /// Sine coefficient `b_n`, zero beyond the degree and for `n = 0`.
    pub fn b(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.sin.get(n - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin_coeffs(&self) -> &[f64] {
        &self.sin
    }

    pub fn mean(&self) -> f64 {
        self.cos[0]
    }

    pub(crate) fn set_a(&mut self, n: usize, v: f64) {
        self.cos[n] = v;
    }

    pub(crate) fn set_b(&mut self, n: usize, v: f64) {
        self.sin[n - 1] = v;
    }

    /// Largest coefficient magnitude.
    pub fn coeff_norm(&self) -> f64 {
        self.cos
            .iter()
            .chain(self.sin.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Coefficientwise max-difference, padding the shorter polynomial with zeros.
    pub fn max_coeff_diff(&self, other: &TrigPoly) -> f64 {
        let n = self.degree().max(other.degree());
        (0..=n)
            .map(|k| {
                (self.a(k) - other.a(k))
                    .abs()
                    .max((self.b(k) - other.b(k)).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Same polynomial with the constant term replaced.
    pub fn with_mean(&self, a0: f64) -> Self {
        let mut p = self.clone();
        p.cos[0] = a0;
        p
    }

    /// Pads with zeros or truncates to exactly `degree`.
    pub fn with_degree(&self, degree: usize) -> Self {
        let mut cos = self.cos.clone();
        let mut sin = self.sin.clone();
        cos.resize(degree + 1, 0.0);
        sin.resize(degree, 0.0);
        TrigPoly { cos, sin }
    }

    /// Drops trailing modes whose coefficients are all at most `tol` in magnitude.
    pub fn trimmed(&self, tol: f64) -> Self {
        let mut n = self.degree();
        while n > 0 && self.cos[n].abs() <= tol && self.sin[n - 1].abs() <= tol {
            n -= 1;
        }
        self.with_degree(n)
    }

    pub fn scale(&self, s: f64) -> Self {
        TrigPoly {
            cos: self.cos.iter().map(|v| v * s).collect(),
            sin: self.sin.iter().map(|v| v * s).collect(),
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let n_max = self.degree();
        let mut acc = self.cos[0];
        if n_max == 0 {
            return acc;
        }
        let (s1, c1) = theta.sin_cos();
        let (mut s, mut c) = (s1, c1);
        for n in 1..=n_max {
            if n % 32 == 0 {
                // resynchronise the rotation recurrence
                let (sn, cn) = (n as f64 * theta).sin_cos();
                s = sn;
                c = cn;
            }
            acc += self.cos[n] * c + self.sin[n - 1] * s;
            let (ns, nc) = (s * c1 + c * s1, c * c1 - s * s1);
            s = ns;
            c = nc;
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        let n_max = self.degree();
        let mut out = TrigPoly::zero(n_max);
        for n in 1..=n_max {
            let nf = n as f64;
            out.cos[n] = nf * self.sin[n - 1];
            out.sin[n - 1] = -nf * self.cos[n];
        }
        out
    }

    /// Mean-free primitive `F` with `F′ = f`; fails unless `a₀` vanishes
    /// to roundoff, `|a₀| ≤ 1e-12·(1 + ‖coeffs‖∞)`.
    pub fn antiderivative_meanfree(&self) -> Result<Self> {
        let tol = 1e-12 * (1.0 + self.coeff_norm());
        if self.cos[0].abs() > tol {
            return Err(Error::NonZeroMean { mean: self.cos[0] });
        }
        let n_max = self.degree();
        let mut out = TrigPoly::zero(n_max);
        for n in 1..=n_max {
            let nf = n as f64;
            out.cos[n] = -self.sin[n - 1] / nf;
            out.sin[n - 1] = self.cos[n] / nf;
        }
        Ok(out)
    }

    /// `∫₀^{2π} f dθ = 2π a₀`.
    pub fn integrate(&self) -> f64 {
        2.0 * PI * self.cos[0]
    }

    /// `∫₀^{2π} f g dθ` by Parseval.
    pub fn l2_dot(&self, other: &TrigPoly) -> f64 {
        let n = self.degree().min(other.degree());
        let mut s = 0.0;
        for k in 1..=n {
            s += self.cos[k] * other.cos[k] + self.sin[k - 1] * other.sin[k - 1];
        }
        2.0 * PI * self.cos[0] * other.cos[0] + PI * s
    }

    /// Exact product, of degree `N_f + N_g`.
    pub fn multiply(&self, other: &TrigPoly) -> Self {
        if (self.degree() + 1) * (other.degree() + 1) <= DIRECT_PRODUCT_LIMIT {
            self.multiply_direct(other)
        } else {
            self.multiply_sampled(other)
        }
    }

    /// Complex-exponential convolution of the two coefficient sequences.
    pub(crate) fn multiply_direct(&self, other: &TrigPoly) -> Self {
        let nf = self.degree() as isize;
        let ng = other.degree() as isize;
        let nout = (nf + ng) as usize;
        let mut out = vec![Complex::new(0.0, 0.0); nout + 1];
        let cf = self.exp_coeffs();
        let cg = other.exp_coeffs();
        for p in -nf..=nf {
            let x = cf[(p + nf) as usize];
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            for q in -ng..=ng {
                let k = p + q;
                if k < 0 {
                    continue;
                }
                out[k as usize] += x * cg[(q + ng) as usize];
            }
        }
        let mut r = TrigPoly::zero(nout);
        r.cos[0] = out[0].re;
        for k in 1..=nout {
            r.cos[k] = 2.0 * out[k].re;
            r.sin[k - 1] = -2.0 * out[k].im;
        }
        r
    }

    pub(crate) fn multiply_sampled(&self, other: &TrigPoly) -> Self {
        let degree = self.degree() + other.degree();
        let grid = QuadratureGrid::for_degree(degree);
        let fs = self.sample(&grid);
        let gs = other.sample(&grid);
        let prod: Vec<f64> = fs.iter().zip(&gs).map(|(x, y)| x * y).collect();
        TrigPoly::fit(&prod, degree).expect("grid sized for product degree")
    }

    // c_k for k = -N..=N, stored at index k + N
    fn exp_coeffs(&self) -> Vec<Complex<f64>> {
        let n = self.degree();
        let mut c = vec![Complex::new(0.0, 0.0); 2 * n + 1];
        c[n] = Complex::new(self.cos[0], 0.0);
        for k in 1..=n {
            let z = Complex::new(0.5 * self.cos[k], -0.5 * self.sin[k - 1]);
            c[n + k] = z;
            c[n - k] = z.conj();
        }
        c
    }

    /// Values at the grid nodes, exact including aliasing of modes above `M/2`.
    pub fn sample(&self, grid: &QuadratureGrid) -> Vec<f64> {
        let m = grid.size();
        let mut spec = vec![Complex::new(0.0, 0.0); m];
        spec[0] += Complex::new(self.cos[0], 0.0);
        for n in 1..=self.degree() {
            let k = n % m;
            let z = Complex::new(0.5 * self.cos[n], -0.5 * self.sin[n - 1]);
            spec[k] += z;
            spec[(m - k) % m] += z.conj();
        }
        fft_inverse(&mut spec);
        spec.into_iter().map(|z| z.re).collect()
    }

    /// Discrete Fourier analysis of samples on a uniform grid of size `M`,
    /// truncated to `degree`. Requires `M ≥ 2·degree + 2`.
    pub fn fit(samples: &[f64], degree: usize) -> Result<Self> {
        let m = samples.len();
        let required = 2 * degree + 2;
        if m < required {
            return Err(Error::GridTooCoarse {
                grid: m,
                degree,
                required,
            });
        }
        let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fft_forward(&mut buf);
        let inv = 1.0 / m as f64;
        let mut out = TrigPoly::zero(degree);
        out.cos[0] = buf[0].re * inv;
        for n in 1..=degree {
            out.cos[n] = 2.0 * buf[n].re * inv;
            out.sin[n - 1] = -2.0 * buf[n].im * inv;
        }
        Ok(out)
    }

    /// Fit at the largest degree the grid supports, then drop trailing modes
    /// below `TRIM_RTOL` relative to the sample sup-norm.
    pub fn fit_adaptive(samples: &[f64]) -> Self {
        let degree = (samples.len() / 2).saturating_sub(1);
        let scale = samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        TrigPoly::fit(samples, degree)
            .expect("fit degree derived from sample count")
            .trimmed(TRIM_RTOL * scale)
    }

    /// `θ ↦ f(θ − s)`: the coefficient rotation by angle `n·s` in each mode.
    pub fn shift(&self, s: f64) -> Self {
        let mut out = self.clone();
        for n in 1..=self.degree() {
            let (sn, cn) = (n as f64 * s).sin_cos();
            let (a, b) = (self.cos[n], self.sin[n - 1]);
            out.cos[n] = a * cn - b * sn;
            out.sin[n - 1] = a * sn + b * cn;
        }
        out
    }

    /// Minimum of the samples on `grid`, together with the node where it occurs.
    pub fn grid_min(&self, grid: &QuadratureGrid) -> (f64, f64) {
        let s = self.sample(grid);
        let (j, v) = s
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |(bj, bv), (j, v)| if v < bv { (j, v) } else { (bj, bv) });
        (grid.node(j), v)
    }

    /// Sup-norm of the samples on `grid`.
    pub fn grid_sup(&self, grid: &QuadratureGrid) -> f64 {
        self.sample(grid).iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn combine(&self, other: &TrigPoly, sign: f64) -> Self {
        let n = self.degree().max(other.degree());
        let mut out = TrigPoly::zero(n);
        for k in 0..=n {
            out.cos[k] = self.a(k) + sign * other.a(k);
            if k >= 1 {
                out.sin[k - 1] = self.b(k) + sign * other.b(k);
            }
        }
        out
    }
}

impl Add for &TrigPoly {
    type Output = TrigPoly;
    fn add(self, rhs: &TrigPoly) -> TrigPoly {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &TrigPoly {
    type Output = TrigPoly;
    fn sub(self, rhs: &TrigPoly) -> TrigPoly {
        self.combine(rhs, -1.0)
    }
}

impl Add for TrigPoly {
    type Output = TrigPoly;
    fn add(self, rhs: TrigPoly) -> TrigPoly {
        &self + &rhs
    }
}

impl Sub for TrigPoly {
    type Output = TrigPoly;
    fn sub(self, rhs: TrigPoly) -> TrigPoly {
        &self - &rhs
    }
}

impl Neg for &TrigPoly {
    type Output = TrigPoly;
    fn neg(self) -> TrigPoly {
        self.scale(-1.0)
    }
}

impl Neg for TrigPoly {
    type Output = TrigPoly;
    fn neg(self) -> TrigPoly {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &TrigPoly {
    type Output = TrigPoly;
    fn mul(self, rhs: f64) -> TrigPoly {
        self.scale(rhs)
    }
}

impl Mul<f64> for TrigPoly {
    type Output = TrigPoly;
    fn mul(self, rhs: f64) -> TrigPoly {
        self.scale(rhs)
    }
}

impl Mul for &TrigPoly {
    type Output = TrigPoly;
    fn mul(self, rhs: &TrigPoly) -> TrigPoly {
        self.multiply(rhs)
    }
}
