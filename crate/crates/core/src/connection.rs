//! Lie brackets of constant vector fields `V_φ`, the Levi-Civita connection,
//! and Christoffel symbols in the Fourier basis.
//!
//! Two Christoffel tables are available: the closed-form families evaluated
//! on the Fourier coefficients of ρ, and an oracle that solves the full Gram
//! system against quadrature values of `⟨∇_{V_i}V_j, V_k⟩`.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{codifferential, div_mu, green, project_exact, weighted_integral, OneForm};
use crate::error::{Error, Result};
use crate::measure::{Density, Potential};
use crate::metric::{gram, BasisKind, BasisLabel};
use crate::trigpoly::TrigPoly;

/// Default truncation order for Christoffel tables.
pub const DEFAULT_ORDER: usize = 8;

/// Extra modes used for the truncation-tail estimate.
pub const TAIL_EXTRA: usize = 4;

/// `θ` with `[V_{φ₁}, V_{φ₂}] = V_θ`.
///
/// Computed as `G_μ div_μ(φ₂′Δ_μφ₁ − φ₁′Δ_μφ₂)`; with `G_μ` solving
/// `Δ_μψ = −f` this gives `Δ_μθ = div_μ(φ₁′Δ_μφ₂ − φ₂′Δ_μφ₁)`.
pub fn bracket_potential(mu: &Density, phi1: &Potential, phi2: &Potential) -> Result<Potential> {
    bracket_of_velocities(mu, &phi1.gradient(), &phi2.gradient())
}

pub(crate) fn bracket_of_velocities(mu: &Density, g1: &TrigPoly, g2: &TrigPoly) -> Result<Potential> {
    let lap1 = div_mu(mu, g1);
    let lap2 = div_mu(mu, g2);
    let w = &g2.multiply(&lap1) - &g1.multiply(&lap2);
    green(mu, &div_mu(mu, &w))
}

/// Second form of the bracket: `G_μ d*_μ ♭(φ₂″φ₁′ − φ₁″φ₂′)`.
pub fn bracket_potential_hessian(
    mu: &Density,
    phi1: &Potential,
    phi2: &Potential,
) -> Result<Potential> {
    let (g1, g2) = (phi1.gradient(), phi2.gradient());
    let h = &g2.derivative().multiply(&g1) - &g1.derivative().multiply(&g2);
    green(mu, &codifferential(&OneForm::new(h, mu.clone())))
}

/// `⟨∇_{V_{φ₁}}V_{φ₂}, V_{φ₃}⟩_μ = ∫ φ₁′φ₂″φ₃′ ρ dθ`.
pub fn connection_inner(mu: &Density, phi1: &Potential, phi2: &Potential, phi3: &Potential) -> f64 {
    let w = phi1.gradient().multiply(&phi3.gradient()).multiply(mu.rho());
    w.l2_dot(&phi2.gradient().derivative())
}

/// Koszul form of the same pairing:
/// `½(∫ ⟨∇⟨∇φ₁,∇φ₂⟩, ∇φ₃⟩ dμ + ∫ ⟨Δ_μφ₂∇φ₁ − Δ_μφ₁∇φ₂, ∇φ₃⟩ dμ)`.
pub fn koszul_inner(mu: &Density, phi1: &Potential, phi2: &Potential, phi3: &Potential) -> f64 {
    let (g1, g2, g3) = (phi1.gradient(), phi2.gradient(), phi3.gradient());
    let first = g1.multiply(&g2).derivative().multiply(&g3);
    let w = &div_mu(mu, &g2).multiply(&g1) - &div_mu(mu, &g1).multiply(&g2);
    let second = w.multiply(&g3);
    0.5 * (weighted_integral(mu, &first) + weighted_integral(mu, &second))
}

/// `φ` with `∇_{V_{φ₁}}V_{φ₂} = V_φ`: the exact part of `φ₂″φ₁′ dθ`.
pub fn covariant_derivative(mu: &Density, phi1: &Potential, phi2: &Potential) -> Potential {
    covariant_of_velocities(mu, &phi1.gradient(), &phi2.gradient())
}

pub(crate) fn covariant_of_velocities(mu: &Density, g1: &TrigPoly, g2: &TrigPoly) -> Potential {
    let form = OneForm::new(g2.derivative().multiply(g1), mu.clone());
    project_exact(&form).0
}

/// Same field through the Green route `G_μ d*_μ ♭(φ₂″φ₁′)`.
pub fn covariant_derivative_green(
    mu: &Density,
    phi1: &Potential,
    phi2: &Potential,
) -> Result<Potential> {
    let h = phi2.gradient().derivative().multiply(&phi1.gradient());
    green(mu, &codifferential(&OneForm::new(h, mu.clone())))
}

/// Same field through `½V_{⟨∇φ₁,∇φ₂⟩} + ½[V_{φ₁}, V_{φ₂}]`.
pub fn covariant_derivative_via_bracket(
    mu: &Density,
    phi1: &Potential,
    phi2: &Potential,
) -> Result<Potential> {
    let sym = Potential::new(phi1.gradient().multiply(&phi2.gradient()));
    let br = bracket_potential(mu, phi1, phi2)?;
    Ok(&(&sym + &br) * 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChristoffelSource {
    PaperFormula,
    Oracle,
}

/// Which reading of the `Γ^{s_k}_{c_n,c_m}` family to evaluate.
///
/// `Published` is the stated result. `ProofLine` follows the intermediate
/// step that divides by `k²/π`, which scales that family by `π/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClosedFormVariant {
    #[default]
    Published,
    ProofLine,
}

/// `Γ^k_{ij}` over interleaved labels, stored as `values[(k·d + i)·d + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelTable {
    order: usize,
    values: Vec<f64>,
    base: Density,
    source: ChristoffelSource,
    tail_estimate: Option<f64>,
    residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChristoffelEntry {
    pub k: String,
    pub i: String,
    pub j: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChristoffelJson {
    #[serde(rename = "N")]
    pub order: usize,
    pub source: ChristoffelSource,
    pub entries: Vec<ChristoffelEntry>,
    pub tail_estimate: Option<f64>,
}

impl ChristoffelTable {
    fn zeros(mu: &Density, order: usize, source: ChristoffelSource) -> Self {
        let d = 2 * order;
        ChristoffelTable {
            order,
            values: vec![0.0; d * d * d],
            base: mu.clone(),
            source,
            tail_estimate: None,
            residual: None,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        2 * self.order
    }

    pub fn base(&self) -> &Density {
        &self.base
    }

    pub fn source(&self) -> ChristoffelSource {
        self.source
    }

    /// Largest entry change when the oracle is re-solved with more modes.
    pub fn tail_estimate(&self) -> Option<f64> {
        self.tail_estimate
    }

    /// Largest residual of the Gram solve.
    pub fn residual(&self) -> Option<f64> {
        self.residual
    }

    fn slot(&self, k: usize, i: usize, j: usize) -> usize {
        let d = self.dim();
        (k * d + i) * d + j
    }

    /// `Γ^k_{ij}` by interleaved positions.
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.values[self.slot(k, i, j)]
    }

    pub fn get_labels(&self, k: BasisLabel, i: BasisLabel, j: BasisLabel) -> f64 {
        self.get(k.position(), i.position(), j.position())
    }

    fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        let s = self.slot(k, i, j);
        self.values[s] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `Σ_k Γ^k_{ij} φ_k`, the truncated `∇_{V_i}V_j`.
    pub fn expand(&self, i: usize, j: usize) -> Potential {
        let mut p = TrigPoly::zero(self.order);
        for k in 0..self.dim() {
            let l = BasisLabel::from_position(k);
            let v = self.get(k, i, j);
            match l.kind() {
                BasisKind::Cos => p.set_a(l.index(), v),
                BasisKind::Sin => p.set_b(l.index(), v),
            }
        }
        Potential::new(p)
    }

    pub fn to_json(&self) -> ChristoffelJson {
        let d = self.dim();
        let mut entries = Vec::with_capacity(d * d * d);
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    entries.push(ChristoffelEntry {
                        k: BasisLabel::from_position(k).to_string(),
                        i: BasisLabel::from_position(i).to_string(),
                        j: BasisLabel::from_position(j).to_string(),
                        value: self.get(k, i, j),
                    });
                }
            }
        }
        ChristoffelJson {
            order: self.order,
            source: self.source,
            entries,
            tail_estimate: self.tail_estimate,
        }
    }
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Shared piecewise family of `Γ^{c_k}_{c_n,s_m}` and `Γ^{s_k}_{s_n,c_m}`.
fn piecewise(rho: &TrigPoly, n: usize, m: usize, k: usize) -> f64 {
    let (nf, mf, kf) = (n as f64, m as f64, k as f64);
    if k != n && n == m {
        -PI * nf * mf * mf * rho.b(k) / kf
    } else if k == n && k != m {
        -PI * mf * mf * rho.b(m)
    } else if k == m && k != n {
        -PI * nf * mf * rho.b(n)
    } else if k == n && k == m {
        -3.0 * PI * nf * nf * rho.b(n) / 2.0
    } else {
        0.0
    }
}

/// Closed-form Christoffel symbols from the Fourier coefficients of ρ.
pub fn christoffel_paper(mu: &Density, order: usize) -> ChristoffelTable {
    christoffel_paper_variant(mu, order, ClosedFormVariant::Published)
}

pub fn christoffel_paper_variant(
    mu: &Density,
    order: usize,
    variant: ClosedFormVariant,
) -> ChristoffelTable {
    use BasisKind::{Cos, Sin};
    let rho = mu.rho();
    let mut t = ChristoffelTable::zeros(mu, order, ChristoffelSource::PaperFormula);
    let d = t.dim();
    let proof_scale = match variant {
        ClosedFormVariant::Published => 1.0,
        ClosedFormVariant::ProofLine => PI / 2.0,
    };
    for kp in 0..d {
        let lk = BasisLabel::from_position(kp);
        let k = lk.index();
        let kf = k as f64;
        for ip in 0..d {
            let li = BasisLabel::from_position(ip);
            let n = li.index();
            let nf = n as f64;
            for jp in 0..d {
                let lj = BasisLabel::from_position(jp);
                let m = lj.index();
                let mf = m as f64;
                let v = match (lk.kind(), li.kind(), lj.kind()) {
                    (Cos, Cos, Cos) => {
                        -delta(n, k) * mf * mf * rho.a(m) * (PI - delta(m, k) * PI / 2.0)
                    }
                    (Sin, Cos, Cos) => {
                        proof_scale
                            * delta(m, k)
                            * nf
                            * mf
                            * rho.b(n)
                            * (PI - delta(n, k) * PI / 2.0)
                    }
                    (Cos, Cos, Sin) => piecewise(rho, n, m, k),
                    (Sin, Cos, Sin) => {
                        delta(n, m) * nf.powi(3) * rho.a(k) / kf * (PI - delta(n, m) * PI / 2.0)
                    }
                    (Cos, Sin, Sin) => -delta(n, k) * delta(n, m) * nf * nf * rho.a(n) * PI / 2.0,
                    (Sin, Sin, Sin) => {
                        -delta(n, k) * mf * mf * rho.b(m) * (PI - delta(n, m) * PI / 2.0)
                    }
                    (Cos, Sin, Cos) => {
                        delta(n, m) * nf.powi(3) * rho.b(k) / kf * (PI - delta(n, k) * PI / 2.0)
                    }
                    (Sin, Sin, Cos) => piecewise(rho, n, m, k),
                };
                t.set(kp, ip, jp, v);
            }
        }
    }
    t
}

/// Quadrature values `⟨∇_{V_i}V_j, V_k⟩_μ` as `rhs[i·d + j][k]`.
fn connection_rhs(mu: &Density, order: usize) -> Vec<Vec<f64>> {
    let labels = BasisLabel::all(order);
    let d = labels.len();
    let grads: Vec<TrigPoly> = labels.iter().map(|l| l.potential().gradient()).collect();
    let hess: Vec<TrigPoly> = grads.iter().map(|g| g.derivative()).collect();
    let weighted: Vec<TrigPoly> = grads.iter().map(|g| g.multiply(mu.rho())).collect();
    (0..d * d)
        .into_par_iter()
        .map(|ij| {
            let (i, j) = (ij / d, ij % d);
            (0..d)
                .map(|k| weighted[i].multiply(&grads[k]).l2_dot(&hess[j]))
                .collect()
        })
        .collect()
}

fn solve_oracle(mu: &Density, order: usize) -> Result<ChristoffelTable> {
    let g = gram(mu, order);
    let chol = match Cholesky::new(g.entries().clone()) {
        Some(c) => c,
        None => {
            return Err(Error::SingularGram {
                min_eigenvalue: g.min_eigenvalue(),
            })
        }
    };
    let min_eig = g.min_eigenvalue();
    let max_diag = g.entries().diagonal().max();
    if min_eig <= 1e-13 * max_diag {
        return Err(Error::SingularGram {
            min_eigenvalue: min_eig,
        });
    }
    let d = g.dim();
    let rhs = connection_rhs(mu, order);
    let mut t = ChristoffelTable::zeros(mu, order, ChristoffelSource::Oracle);
    let mut residual = 0.0_f64;
    for (ij, r) in rhs.iter().enumerate() {
        let (i, j) = (ij / d, ij % d);
        let b = DVector::from_column_slice(r);
        let gamma = chol.solve(&b);
        let back = g.entries() * &gamma;
        residual = residual.max((back - &b).amax());
        for k in 0..d {
            t.set(k, i, j, gamma[k]);
        }
    }
    t.residual = Some(residual);
    Ok(t)
}

/// Christoffel symbols from first principles: for each `(i, j)` solve
/// `Σ_l Γ^l_{ij} gram[l][k] = ⟨∇_{V_i}V_j, V_k⟩` over the full Gram matrix.
/// The tail estimate is the largest change when re-solving at order `N + 4`.
pub fn christoffel_oracle(mu: &Density, order: usize) -> Result<ChristoffelTable> {
    let mut t = solve_oracle(mu, order)?;
    let wide = solve_oracle(mu, order + TAIL_EXTRA)?;
    let d = t.dim();
    let mut tail = 0.0_f64;
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                tail = tail.max((t.get(k, i, j) - wide.get(k, i, j)).abs());
            }
        }
    }
    t.tail_estimate = Some(tail);
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub k: String,
    pub i: String,
    pub j: String,
    /// Oracle value.
    pub quadrature: f64,
    pub paper: f64,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChristoffelReport {
    pub max_abs: f64,
    pub entries: Vec<ComparisonEntry>,
}

/// Entrywise oracle vs closed form, on the common order.
pub fn christoffel_comparison(oracle: &ChristoffelTable, paper: &ChristoffelTable) -> ChristoffelReport {
    let d = oracle.dim().min(paper.dim());
    let mut entries = Vec::with_capacity(d * d * d);
    let mut max_abs = 0.0_f64;
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                let (q, p) = (oracle.get(k, i, j), paper.get(k, i, j));
                let diff = (q - p).abs();
                max_abs = max_abs.max(diff);
                entries.push(ComparisonEntry {
                    k: BasisLabel::from_position(k).to_string(),
                    i: BasisLabel::from_position(i).to_string(),
                    j: BasisLabel::from_position(j).to_string(),
                    quadrature: q,
                    paper: p,
                    diff,
                });
            }
        }
    }
    ChristoffelReport { max_abs, entries }
}
