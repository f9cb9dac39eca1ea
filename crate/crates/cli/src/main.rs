mod input;
mod selftest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use wsc_core::connection::{
    bracket_potential, bracket_potential_hessian, christoffel_comparison, christoffel_oracle,
    christoffel_paper,
};
use wsc_core::curvature::flatness_report;
use wsc_core::geodesic::{constant_velocity_curve, geodesic_evolve_field, VelocityField};
use wsc_core::metric::{gram, metric_discrepancy_report};
use wsc_core::transport::w2_circle;
use wsc_core::{Error, QuadratureGrid};

use input::{load_density, load_potential};

#[derive(Parser, Debug)]
#[command(name = "wsc", version, about = "Riemannian geometry of the Wasserstein space of the circle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Density: JSON file `{"N","a","b"}` or a builtin (`uniform`, `cos1:ε`, `bump:ε,m`).
    #[arg(long, default_value = "uniform")]
    density: String,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Quadrature grid size (power of two).
    #[arg(long, env = "WSC_GRID", default_value_t = 4096)]
    grid: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Gram matrix of the Otto metric and the closed-form discrepancy report.
    Metric {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8)]
        order: usize,
    },
    /// Christoffel tables (closed form and oracle) and their comparison.
    Christoffel {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8)]
        order: usize,
    },
    /// Lie bracket of two constant potential fields by both formulas.
    Bracket {
        #[command(flatten)]
        common: Common,
        /// Potential: JSON file or a list such as `s1:0.1,c2:0.3`.
        #[arg(long)]
        potential: String,
        #[arg(long)]
        potential2: String,
    },
    /// Geodesic from a density and an initial potential.
    Geodesic {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        potential: String,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 20)]
        steps: usize,
    },
    /// Flow-map pushforward `E_μ(tψ)`.
    Expmap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        potential: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
    /// Circle W2 distance between two densities.
    Distance {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        density2: String,
        #[arg(long, default_value_t = 512)]
        atoms: usize,
    },
    /// Curvature formula against the finite-difference oracle.
    Curvature {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Load and check a density.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Run the invariant suite and write selftest.json.
    Selftest {
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Metric { .. } => "metric",
            Command::Christoffel { .. } => "christoffel",
            Command::Bracket { .. } => "bracket",
            Command::Geodesic { .. } => "geodesic",
            Command::Expmap { .. } => "expmap",
            Command::Distance { .. } => "distance",
            Command::Curvature { .. } => "curvature",
            Command::Validate { .. } => "validate",
            Command::Selftest { .. } => "selftest",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Config(String),
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn to_json(&self, operation: &str) -> serde_json::Value {
        let (error, module, message) = match self {
            CliError::Core(e) => (e.kind(), e.module(), e.to_string()),
            CliError::Config(m) => ("ConfigInvalid", "cli", m.clone()),
            CliError::Io(m) => ("Io", "cli", m.clone()),
        };
        json!({"error": error, "module": module, "operation": operation, "message": message})
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<PathBuf> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    write(dir, name, &s)
}

fn grid(common: &Common) -> CliResult<QuadratureGrid> {
    Ok(QuadratureGrid::new(common.grid)?)
}

fn check_order(order: usize) -> CliResult<()> {
    if order == 0 {
        return Err(CliError::Config("--order must be at least 1".into()));
    }
    Ok(())
}

fn run(command: &Command) -> CliResult<Vec<PathBuf>> {
    match command {
        Command::Metric { common, order } => {
            check_order(*order)?;
            let mu = load_density(&common.density)?;
            let g = gram(&mu, *order);
            let report = metric_discrepancy_report(&mu, *order);
            Ok(vec![
                write(&common.out, "gram.csv", &g.to_csv())?,
                write_json(&common.out, "metric_report.json", &report)?,
            ])
        }
        Command::Christoffel { common, order } => {
            check_order(*order)?;
            let mu = load_density(&common.density)?;
            let paper = christoffel_paper(&mu, *order);
            let oracle = christoffel_oracle(&mu, *order)?;
            let report = christoffel_comparison(&oracle, &paper);
            Ok(vec![
                write_json(&common.out, "christoffel.json", &paper.to_json())?,
                write_json(&common.out, "christoffel_oracle.json", &oracle.to_json())?,
                write_json(&common.out, "christoffel_comparison.json", &report)?,
            ])
        }
        Command::Bracket {
            common,
            potential,
            potential2,
        } => {
            let mu = load_density(&common.density)?;
            let (p, q) = (load_potential(potential)?, load_potential(potential2)?);
            let a = bracket_potential(&mu, &p, &q)?;
            let b = bracket_potential_hessian(&mu, &p, &q)?;
            let diff = a.max_coeff_diff(&b);
            let out = json!({"bracket": a, "bracket_hessian": b, "max_coeff_diff": diff});
            Ok(vec![write_json(&common.out, "bracket.json", &out)?])
        }
        Command::Geodesic {
            common,
            potential,
            t_end,
            steps,
        } => {
            let mu = load_density(&common.density)?;
            let psi = load_potential(potential)?;
            let path = geodesic_evolve_field(&mu, &VelocityField::from_potential(&psi), *t_end, *steps, grid(common)?)?;
            Ok(vec![
                write(&common.out, "trajectory.csv", &path.to_csv())?,
                write_json(&common.out, "geodesic_report.json", &path.report())?,
            ])
        }
        Command::Expmap { common, potential, t } => {
            let mu = load_density(&common.density)?;
            let psi = load_potential(potential)?;
            let out = constant_velocity_curve(&mu, &psi, *t)?;
            Ok(vec![write_json(&common.out, "expmap.json", &out)?])
        }
        Command::Distance {
            common,
            density2,
            atoms,
        } => {
            let mu = load_density(&common.density)?;
            let nu = load_density(density2)?;
            let w = w2_circle(&mu, &nu, *atoms)?;
            Ok(vec![write_json(&common.out, "distance.json", &json!({"atoms": atoms, "w2": w}))?])
        }
        Command::Curvature { common, order, seed } => {
            check_order(*order)?;
            let mu = load_density(&common.density)?;
            let r = flatness_report(&mu, *order, *seed)?;
            Ok(vec![write_json(&common.out, "curvature_report.json", &r.to_json())?])
        }
        Command::Validate { common } => {
            let mu = load_density(&common.density)?;
            let g = grid(common)?;
            let (theta, min) = mu.rho().grid_min(&g);
            let out = json!({"valid": true, "N": mu.degree(), "min_density": min, "argmin": theta, "grid": g.size()});
            println!("{}", serde_json::to_string(&out).map_err(|e| CliError::Io(e.to_string()))?);
            Ok(vec![])
        }
        Command::Selftest { out, seed } => {
            let report = selftest::run(*seed);
            let path = write_json(out, "selftest.json", &report)?;
            println!("{}", report.summary());
            Ok(vec![path])
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let err = CliError::Config(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json("parse"));
            return ExitCode::from(2);
        }
    };
    match run(&cli.command) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json(cli.command.name()));
            ExitCode::FAILURE
        }
    }
}
