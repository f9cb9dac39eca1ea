use std::fs;
use std::path::Path;

use wsc_core::measure::make_density;
use wsc_core::{BasisLabel, Density, Error, Potential, TrigPoly};

use crate::CliError;

fn read_poly(path: &Path) -> Result<TrigPoly, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// A JSON file, or a builtin name. A file with `a[0] = 0` is normalized,
/// otherwise `a[0]` must already be `1/(2π)`.
pub fn load_density(spec: &str) -> Result<Density, CliError> {
    let path = Path::new(spec);
    if path.is_file() {
        let p = read_poly(path)?;
        return Ok(if p.a(0) == 0.0 {
            make_density(p)?
        } else {
            Density::from_normalized(p)?
        });
    }
    Ok(Density::builtin(spec)?)
}

/// A JSON file, or a list of `label:coefficient` terms such as `s1:0.1,c2:-0.3`.
pub fn load_potential(spec: &str) -> Result<Potential, CliError> {
    let path = Path::new(spec);
    if path.is_file() {
        return Ok(Potential::new(read_poly(path)?));
    }
    let mut poly = TrigPoly::zero(0);
    for term in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let bad = || CliError::Config(format!("cannot read potential term `{term}`"));
        let (label, coeff) = term.split_once(':').ok_or_else(bad)?;
        let label: BasisLabel = label.trim().parse().map_err(|_: Error| bad())?;
        let coeff: f64 = coeff.trim().parse().map_err(|_| bad())?;
        poly = &poly + &label.poly().scale(coeff);
    }
    Ok(Potential::new(poly))
}
