//! Seeded invariant suite over every module. Values depend on the seed,
//! verdicts should not.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use wsc_core::calculus::OneForm;
use wsc_core::connection::{
    bracket_potential, bracket_potential_hessian, christoffel_oracle, christoffel_paper,
    connection_inner, covariant_derivative, koszul_inner,
};
use wsc_core::curvature::{cut_integral, flatness_report, t_tensor};
use wsc_core::geodesic::{
    constant_velocity_curve, exp_map, geodesic_evolve, geodesic_evolve_field, VelocityField,
};
use wsc_core::measure::make_density;
use wsc_core::metric::{gram, metric_discrepancy_report, otto_inner, otto_inner_by_parts, paper_metric_coefficient};
use wsc_core::transport::{displacement_check, w2_bruteforce, w2_cyclic, DiscreteMeasure};
use wsc_core::{BasisLabel, Density, Potential, QuadratureGrid, Result, TrigPoly};

#[derive(Debug, Clone, Serialize)]
pub struct Property {
    pub name: String,
    pub criterion: usize,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub passed: usize,
    pub failed: usize,
    pub properties: Vec<Property>,
}

impl SelftestReport {
    pub fn summary(&self) -> String {
        let failed: Vec<&str> = self.properties.iter().filter(|p| !p.passed).map(|p| p.name.as_str()).collect();
        if failed.is_empty() {
            format!("selftest: {} properties passed", self.passed)
        } else {
            format!(
                "selftest: {} passed, {} failed ({})",
                self.passed,
                self.failed,
                failed.join(", ")
            )
        }
    }
}

struct Suite {
    rng: ChaCha8Rng,
    properties: Vec<Property>,
}

impl Suite {
    /// Records `value ≤ tolerance`, or the error that prevented the check.
    fn check(&mut self, criterion: usize, name: &str, tolerance: f64, value: Result<f64>) {
        let (value, error) = match value {
            Ok(v) => (v, None),
            Err(e) => (f64::NAN, Some(e.to_string())),
        };
        self.properties.push(Property {
            name: name.to_string(),
            criterion,
            value,
            tolerance,
            passed: value <= tolerance,
            error,
        });
    }

    fn density(&mut self) -> Density {
        let a: Vec<f64> = (0..4).map(|n| if n == 0 { 0.0 } else { self.rng.random_range(-0.02..0.02) }).collect();
        let b: Vec<f64> = (0..3).map(|_| self.rng.random_range(-0.02..0.02)).collect();
        make_density(TrigPoly::new(a, b).expect("lengths")).expect("small perturbation")
    }

    fn potential(&mut self, degree: usize) -> Potential {
        let a: Vec<f64> = (0..=degree).map(|n| if n == 0 { 0.0 } else { self.rng.random_range(-1.0..1.0) }).collect();
        let b: Vec<f64> = (0..degree).map(|_| self.rng.random_range(-1.0..1.0)).collect();
        Potential::new(TrigPoly::new(a, b).expect("lengths"))
    }
}

fn exact_flow(theta: f64, eps: f64) -> f64 {
    let x = theta.rem_euclid(2.0 * PI);
    if x < PI / 2.0 || x > 1.5 * PI {
        let y = if x > PI { x - 2.0 * PI } else { x };
        (y.tan().asinh() + eps).sinh().atan()
    } else {
        PI + ((x - PI).tan().asinh() - eps).sinh().atan()
    }
}

pub fn run(seed: u64) -> SelftestReport {
    let mut s = Suite {
        rng: ChaCha8Rng::seed_from_u64(seed),
        properties: Vec::new(),
    };
    let uniform = Density::uniform();
    let cos1 = Density::builtin("cos1:0.1").expect("builtin");

    let g = gram(&uniform, 16);
    let labels = g.labels();
    let mut err = 0.0_f64;
    for (i, li) in labels.iter().enumerate() {
        for (j, lj) in labels.iter().enumerate() {
            err = err.max((g.get(i, j) - paper_metric_coefficient(*li, *lj)).abs());
        }
    }
    s.check(1, "metric_uniform_diagonal", 1e-12, Ok(err));

    let a2 = make_density(TrigPoly::new(vec![0.0, 0.0, 0.05], vec![0.0, 0.0]).expect("lengths")).expect("positive");
    let report = metric_discrepancy_report(&a2, 8);
    let ibp = report
        .entries
        .iter()
        .map(|e| {
            let (i, j): (BasisLabel, BasisLabel) = (e.i.parse().expect("label"), e.j.parse().expect("label"));
            (e.quadrature - otto_inner_by_parts(&a2, &i.potential(), &j.potential())).abs()
        })
        .fold(0.0, f64::max);
    s.check(2, "metric_by_parts", 1e-10, Ok(ibp));

    s.check(3, "christoffel_closed_form_zero_at_uniform", 1e-10, Ok(christoffel_paper(&uniform, 8).max_abs()));
    s.check(
        3,
        "christoffel_oracle_zero_at_uniform",
        1e-10,
        christoffel_oracle(&uniform, 8).map(|t| t.max_abs()),
    );
    s.check(
        3,
        "christoffel_oracle_residual",
        1e-8,
        christoffel_oracle(&cos1, 8).map(|t| t.residual().unwrap_or(f64::INFINITY)),
    );
    let c1 = BasisLabel::cos(1);
    let g111 = christoffel_paper(&cos1, 8).get_labels(c1, c1, c1);
    s.check(3, "christoffel_closed_form_c1c1c1", 1e-15, Ok((g111 + 0.05 * PI).abs()));

    let (mut torsion, mut koszul, mut dual, mut anti) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let mut bracket_error = None;
    for _ in 0..5 {
        let mu = s.density();
        for _ in 0..10 {
            let (x, y, z) = (s.potential(6), s.potential(6), s.potential(6));
            let br = match bracket_potential(&mu, &x, &y) {
                Ok(b) => b,
                Err(e) => {
                    bracket_error = Some(e);
                    continue;
                }
            };
            let d = &(&covariant_derivative(&mu, &x, &y) - &covariant_derivative(&mu, &y, &x)) - &br;
            torsion = torsion.max(otto_inner(&mu, &d, &d).max(0.0).sqrt());
            koszul = koszul.max((connection_inner(&mu, &x, &y, &z) - koszul_inner(&mu, &x, &y, &z)).abs());
            match (bracket_potential_hessian(&mu, &x, &y), bracket_potential(&mu, &y, &x)) {
                (Ok(h), Ok(r)) => {
                    dual = dual.max(br.max_coeff_diff(&h));
                    anti = anti.max((&br + &r).poly().coeff_norm());
                }
                (Err(e), _) | (_, Err(e)) => bracket_error = Some(e),
            }
        }
    }
    let wrap = |v: f64| match &bracket_error {
        Some(e) => Err(e.clone()),
        None => Ok(v),
    };
    s.check(4, "torsion_free", 1e-7, wrap(torsion));
    s.check(4, "koszul", 1e-8, wrap(koszul));
    s.check(5, "bracket_dual_formula", 1e-9, wrap(dual));
    s.check(5, "bracket_antisymmetry", 0.0, wrap(anti));

    let psi = Potential::new(TrigPoly::sin_mode(1).scale(0.1));
    match geodesic_evolve(&uniform, &psi, 0.5, 50) {
        Ok(path) => {
            let r = path.report();
            s.check(6, "geodesic_hj_residual", 1e-6, Ok(r.max_hj_residual));
            s.check(6, "geodesic_burgers_residual", 1e-8, Ok(r.max_burgers_residual));
            s.check(6, "geodesic_mass", 1e-10, Ok(r.max_mass_defect));
            s.check(6, "geodesic_speed", 5e-3, Ok(r.otto_speed_relative_variation));
            s.check(7, "distance_linearity", 1e-2, displacement_check(&path, 512).map(|d| d.max_relative_deviation));
        }
        Err(e) => {
            for (c, n) in [(6, "geodesic_evolve"), (7, "distance_linearity")] {
                s.check(c, n, 0.0, Err(e.clone()));
            }
        }
    }
    let drift = s.rng.random_range(-1.0..1.0);
    let rotation = geodesic_evolve_field(
        &cos1,
        &VelocityField::with_drift(&Potential::zero(), drift),
        1.0,
        10,
        QuadratureGrid::new(4096).expect("power of two"),
    )
    .map(|p| {
        p.times
            .iter()
            .zip(&p.densities)
            .map(|(t, d)| d.rho().max_coeff_diff(cos1.rotate(drift * t).rho()))
            .fold(0.0, f64::max)
    });
    s.check(6, "geodesic_rotation", 1e-10, rotation);

    let mut w2 = Ok(0.0_f64);
    for _ in 0..20 {
        let x: Vec<f64> = (0..8).map(|_| s.rng.random_range(0.0..2.0 * PI)).collect();
        let y: Vec<f64> = (0..8).map(|_| s.rng.random_range(0.0..2.0 * PI)).collect();
        let d = DiscreteMeasure::equal_mass(&x).and_then(|a| {
            let b = DiscreteMeasure::equal_mass(&y)?;
            Ok((w2_cyclic(&a, &b)? - w2_bruteforce(&a, &b)?).abs())
        });
        w2 = w2.and_then(|m| d.map(|v| m.max(v)));
    }
    s.check(8, "transport_cyclic_vs_exhaustive", 1e-9, w2);

    let eps = 0.05;
    let hist = exp_map(&uniform, &Potential::new(TrigPoly::sin_mode(1).scale(eps))).map(|out| {
        let (particles, bins) = (100_000usize, 64usize);
        let width = 2.0 * PI / bins as f64;
        let mut counts = vec![0usize; bins];
        for k in 0..particles {
            let theta0 = 2.0 * PI * (k as f64 + s.rng.random::<f64>()) / particles as f64;
            let theta1 = exact_flow(theta0, eps).rem_euclid(2.0 * PI);
            counts[((theta1 / width) as usize).min(bins - 1)] += 1;
        }
        counts
            .iter()
            .enumerate()
            .map(|(b, &c)| {
                let avg = (0..64).map(|j| out.eval(width * (b as f64 + (j as f64 + 0.5) / 64.0))).sum::<f64>() / 64.0;
                (avg - c as f64 / (particles as f64 * width)).abs()
            })
            .fold(0.0, f64::max)
    });
    s.check(9, "expmap_particle_histogram", 1e-3, hist);
    let phi = s.potential(2).scale(0.1);
    let semigroup = (|| {
        let a = constant_velocity_curve(&cos1, &phi, 0.7)?;
        let b = constant_velocity_curve(&a, &phi, 0.5)?;
        let c = constant_velocity_curve(&cos1, &phi, 1.2)?;
        Ok(b.rho().max_coeff_diff(c.rho()))
    })();
    s.check(9, "flow_semigroup", 1e-8, semigroup);

    let (mut t_anti, mut t_zero) = (0.0_f64, 0.0_f64);
    let basis = BasisLabel::all(8);
    for mu in [&uniform, &cos1] {
        for a in &basis {
            for b in &basis {
                let (pa, pb) = (a.potential(), b.potential());
                let tab: OneForm = t_tensor(mu, &pa, &pb);
                t_anti = t_anti.max((&tab.coeff + &t_tensor(mu, &pb, &pa).coeff).coeff_norm());
                if cut_integral(&pa, &pb).abs() < 1e-12 {
                    t_zero = t_zero.max(tab.coeff.coeff_norm());
                }
            }
        }
    }
    s.check(10, "t_antisymmetry", 1e-12, Ok(t_anti));
    s.check(10, "t_vanishing_zero_cut", 1e-12, Ok(t_zero));

    for (name, mu) in [("curvature_dual_path_uniform", &uniform), ("curvature_dual_path_cos1", &cos1)] {
        let r = flatness_report(mu, 3, seed).map(|r| if r.all_samples_agree { 0.0 } else { r.max_abs_disagreement });
        s.check(11, name, 0.0, r);
    }

    let passed = s.properties.iter().filter(|p| p.passed).count();
    SelftestReport {
        seed,
        passed,
        failed: s.properties.len() - passed,
        properties: s.properties,
    }
}
