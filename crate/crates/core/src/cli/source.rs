use std::fs;

use crate::expr::{parse_curve, parse_curve_bytes, CurveDef};
use crate::synthesis::{canonical, CurvatureProfile};

use super::{CliError, SourceArgs};

pub const DEFAULT_CANONICAL_RANGE: [f64; 2] = [0.0, 10.0];

pub enum Source {
    Curve(CurveDef),
    Profile(CurvatureProfile),
}

impl Source {
    pub fn label(&self) -> String {
        match self {
            Source::Curve(def) => def.to_string(),
            Source::Profile(p) => p.label.clone().unwrap_or_else(|| format!("profile of order {}", p.d)),
        }
    }
}

fn range_arg(args: &SourceArgs) -> Result<Option<[f64; 2]>, CliError> {
    match args.range.as_deref() {
        None => Ok(None),
        Some(&[a, b]) if a.is_finite() && b.is_finite() && a < b => Ok(Some([a, b])),
        Some(r) => Err(CliError::input(format!("--range needs A < B, got {r:?}"))),
    }
}

pub fn load(args: &SourceArgs) -> Result<Source, CliError> {
    let given = [args.curve.is_some(), args.curve_file.is_some(), args.profile.is_some(), args.canonical.is_some()];
    match given.iter().filter(|&&g| g).count() {
        1 => {}
        0 => return Err(CliError::input("one of --curve, --curve-file, --profile or --canonical is required")),
        _ => return Err(CliError::input("--curve, --curve-file, --profile and --canonical are mutually exclusive")),
    }
    if !(args.step > 0.0 && args.step.is_finite()) {
        return Err(CliError::input(format!("--step must be positive, got {}", args.step)));
    }
    let range = range_arg(args)?;
    let kappas: Vec<f64> = [args.k1, args.k2, args.k3, args.k4].into_iter().map_while(|k| k).collect();
    if args.canonical.is_none() && !kappas.is_empty() {
        return Err(CliError::input("--k1 .. --k4 only apply to --canonical"));
    }
    if let Some(text) = &args.curve {
        let mut def = parse_curve(text).map_err(|e| CliError::parse(e.to_string()))?;
        apply_curve_range(&mut def, range);
        return Ok(Source::Curve(def));
    }
    if let Some(path) = &args.curve_file {
        let bytes = fs::read(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let mut def = parse_curve_bytes(&bytes).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
        apply_curve_range(&mut def, range);
        return Ok(Source::Curve(def));
    }
    if let Some(path) = &args.profile {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let mut p = CurvatureProfile::from_toml(&text).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
        if let Some(r) = range {
            p = p.restricted(r);
            p.validate().map_err(|e| CliError::input(e.to_string()))?;
        }
        return Ok(Source::Profile(p));
    }
    let kind = args.canonical.expect("one source is present");
    let p = canonical(kind, &kappas, range.unwrap_or(DEFAULT_CANONICAL_RANGE)).map_err(|e| CliError::input(e.to_string()))?;
    Ok(Source::Profile(p))
}

fn apply_curve_range(def: &mut CurveDef, range: Option<[f64; 2]>) {
    if let Some([a, b]) = range {
        def.t_lo = a;
        def.t_hi = b;
    }
}

/// `count` evenly spaced values covering `[a, b]`.
pub fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..count).map(|i| a + (b - a) * i as f64 / (count - 1) as f64).collect(),
    }
}
