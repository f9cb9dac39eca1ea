//! Otto's inner product on gradient tangent vectors and its Gram matrix over
//! the truncated Fourier basis.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{laplace_mu, weighted_integral};
use crate::error::{Error, Result};
use crate::measure::{Density, Potential};
use crate::trigpoly::TrigPoly;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisKind {
    Cos,
    Sin,
}

/// `c_n` or `s_n` with `n ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisLabel {
    kind: BasisKind,
    index: usize,
}

impl BasisLabel {
    pub fn new(kind: BasisKind, index: usize) -> Result<Self> {
        if index == 0 {
            return Err(Error::InvalidArgument(
                "basis index must be at least 1".into(),
            ));
        }
        Ok(BasisLabel { kind, index })
    }

    pub fn cos(index: usize) -> Self {
        BasisLabel::new(BasisKind::Cos, index).expect("index >= 1")
    }

    pub fn sin(index: usize) -> Self {
        BasisLabel::new(BasisKind::Sin, index).expect("index >= 1")
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Slot in the interleaved order `c1, s1, c2, s2, …`.
    pub fn position(&self) -> usize {
        2 * (self.index - 1)
            + match self.kind {
                BasisKind::Cos => 0,
                BasisKind::Sin => 1,
            }
    }

    pub fn from_position(pos: usize) -> Self {
        let index = pos / 2 + 1;
        if pos % 2 == 0 {
            BasisLabel::cos(index)
        } else {
            BasisLabel::sin(index)
        }
    }

    /// All labels up to order `n`, interleaved.
    pub fn all(n: usize) -> Vec<BasisLabel> {
        (0..2 * n).map(BasisLabel::from_position).collect()
    }

    pub fn poly(&self) -> TrigPoly {
        match self.kind {
            BasisKind::Cos => TrigPoly::cos_mode(self.index),
            BasisKind::Sin => TrigPoly::sin_mode(self.index),
        }
    }

    pub fn potential(&self) -> Potential {
        Potential::new(self.poly())
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.kind {
            BasisKind::Cos => 'c',
            BasisKind::Sin => 's',
        };
        write!(f, "{c}{}", self.index)
    }
}

impl std::str::FromStr for BasisLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad basis label '{s}'"));
        let (head, tail) = s.split_at(s.char_indices().nth(1).map(|(i, _)| i).ok_or_else(bad)?);
        let index: usize = tail.parse().map_err(|_| bad())?;
        match head {
            "c" => BasisLabel::new(BasisKind::Cos, index),
            "s" => BasisLabel::new(BasisKind::Sin, index),
            _ => Err(bad()),
        }
    }
}

/// `⟨V_{φ₁}, V_{φ₂}⟩_μ = ∫ φ₁′φ₂′ ρ dθ`.
pub fn otto_inner(mu: &Density, phi1: &Potential, phi2: &Potential) -> f64 {
    gradient_inner(mu, &phi1.gradient(), &phi2.gradient())
}

/// `∫ g₁g₂ρ dθ` for velocity fields given directly.
pub(crate) fn gradient_inner(mu: &Density, g1: &TrigPoly, g2: &TrigPoly) -> f64 {
    weighted_integral(mu, &g1.multiply(g2))
}

/// `−∫ φ₁ Δ_μφ₂ dμ`, the integrated-by-parts form of [`otto_inner`].
pub fn otto_inner_by_parts(mu: &Density, phi1: &Potential, phi2: &Potential) -> f64 {
    -weighted_integral(mu, &phi1.poly().multiply(&laplace_mu(mu, phi2)))
}

/// Closed-form metric coefficient: `δ_{nm} n²/2` on equal kinds, zero on mixed.
pub fn paper_metric_coefficient(l1: BasisLabel, l2: BasisLabel) -> f64 {
    if l1.kind == l2.kind && l1.index == l2.index {
        let n = l1.index as f64;
        n * n / 2.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    order: usize,
    entries: DMatrix<f64>,
    base: Density,
}

impl GramMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        2 * self.order
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn base(&self) -> &Density {
        &self.base
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn labels(&self) -> Vec<BasisLabel> {
        BasisLabel::all(self.order)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Header of labels, then dense rows.
    pub fn to_csv(&self) -> String {
        let labels: Vec<String> = self.labels().iter().map(|l| l.to_string()).collect();
        let mut out = labels.join(",");
        out.push('\n');
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|j| format!("{:.16e}", self.entries[(i, j)]))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Gram matrix of `otto_inner` over `c1, s1, …, cN, sN`.
pub fn gram(mu: &Density, n: usize) -> GramMatrix {
    let labels = BasisLabel::all(n);
    let grads: Vec<TrigPoly> = labels.iter().map(|l| l.potential().gradient()).collect();
    let weighted: Vec<TrigPoly> = grads.iter().map(|g| g.multiply(mu.rho())).collect();
    let dim = labels.len();
    let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|i| (i..dim).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| weighted[i].l2_dot(&grads[j]))
        .collect();
    let mut entries = DMatrix::zeros(dim, dim);
    for (&(i, j), v) in pairs.iter().zip(values) {
        entries[(i, j)] = v;
        entries[(j, i)] = v;
    }
    GramMatrix {
        order: n,
        entries,
        base: mu.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub i: String,
    pub j: String,
    pub quadrature: f64,
    pub paper: f64,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub max_abs: f64,
    pub entries: Vec<ReportEntry>,
}

/// Quadrature Gram against the closed form, over the upper triangle.
pub fn metric_discrepancy_report(mu: &Density, n: usize) -> MetricReport {
    let g = gram(mu, n);
    let labels = g.labels();
    let mut entries = Vec::new();
    let mut max_abs = 0.0_f64;
    for (i, li) in labels.iter().enumerate() {
        for (j, lj) in labels.iter().enumerate().skip(i) {
            let quadrature = g.get(i, j);
            let paper = paper_metric_coefficient(*li, *lj);
            let diff = (quadrature - paper).abs();
            max_abs = max_abs.max(diff);
            entries.push(ReportEntry {
                i: li.to_string(),
                j: lj.to_string(),
                quadrature,
                paper,
                diff,
            });
        }
    }
    MetricReport { max_abs, entries }
}
