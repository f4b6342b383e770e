#![allow(dead_code)]

use std::path::PathBuf;

use gawk_curves::classifier::{crosscheck_theorem, select_modal_order, ClassifyConfig, TheoremCrosscheck};
use gawk_curves::expr::{parse_curve, CurveDef};
use gawk_curves::frenet::{analyze_at, DEFAULT_ORDER_TOL};
use gawk_curves::normal_parts::{assemble_normals, NormalParts};
use serde_json::Value;

/// Closed-form curves in R³ and R⁴: lines, circles, helices of order 3 and 4,
/// and degree-5 polynomial curves.
pub const CORPUS: &[(&str, &str)] = &[
    ("line3", "x1 = 1 + 2*t; x2 = -t; x3 = 3*t; t in [0, 2]"),
    ("line4", "x1 = t; x2 = 2*t; x3 = -t; x4 = 0.5*t; t in [-1, 1]"),
    ("circle3", "x1 = 2*cos(t); x2 = 2*sin(t); x3 = 1; t in [0, 6]"),
    ("circle4", "x1 = cos(t); x2 = sin(t); x3 = cos(t); x4 = sin(t); t in [0, 6]"),
    ("helix3", "x1 = cos(t); x2 = sin(t); x3 = t; t in [0, 10]"),
    ("helix3-wide", "x1 = 3*cos(t); x2 = 3*sin(t); x3 = 2*t; t in [0, 8]"),
    ("helix4", "x1 = cos(t); x2 = sin(t); x3 = 0.5*cos(2*t); x4 = 0.5*sin(2*t); t in [0, 6]"),
    ("helix4-wide", "x1 = 2*cos(t); x2 = 2*sin(t); x3 = cos(3*t); x4 = sin(3*t); t in [0, 4]"),
    ("poly5-cubic", "x1 = t; x2 = t*t; x3 = t*t*t + pow(t, 5)/2; t in [-1, 1]"),
    ("poly5-skew", "x1 = t + pow(t, 5)/5; x2 = t*t/2; x3 = t*t*t/6; t in [-1, 1]"),
    ("poly5-quartic", "x1 = t; x2 = t*t; x3 = t*t*t; x4 = pow(t, 4) + pow(t, 5); t in [0, 1]"),
    ("poly5-mixed", "x1 = t + pow(t, 5); x2 = t*t/2; x3 = pow(t, 3)/6 - t/3; x4 = pow(t, 4)/24; t in [0.1, 0.6]"),
];

pub fn corpus() -> Vec<(&'static str, CurveDef)> {
    CORPUS.iter().map(|(name, text)| (*name, parse_curve(text).expect("corpus curve parses"))).collect()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Arclength from `t_lo` by composite Simpson on the jet speed.
pub fn arclengths(def: &CurveDef, ts: &[f64]) -> Vec<f64> {
    const SUB: usize = 32;
    let speed = |t: f64| norm(&def.eval_jet(t).expect("curve evaluates").derivative(1));
    let mut out = Vec::with_capacity(ts.len());
    let (mut acc, mut prev) = (0.0, def.t_lo);
    for &t in ts {
        let h = (t - prev) / SUB as f64;
        if h != 0.0 {
            let mut sum = speed(prev) + speed(t);
            for j in 1..SUB {
                sum += if j % 2 == 1 { 4.0 } else { 2.0 } * speed(prev + j as f64 * h);
            }
            acc += sum * h / 3.0;
        }
        out.push(acc);
        prev = t;
    }
    out
}

/// Normal parts of a closed-form curve at `n` evenly spaced parameters.
pub fn curve_parts(def: &CurveDef, n: usize) -> Vec<NormalParts> {
    let ts = linspace(def.t_lo, def.t_hi, n);
    let s = arclengths(def, &ts);
    ts.iter()
        .zip(&s)
        .map(|(&t, &si)| {
            let mut f = analyze_at(def, t, DEFAULT_ORDER_TOL).expect("frenet apparatus");
            f.s = si;
            assemble_normals(&f).expect("normal parts")
        })
        .collect()
}

pub fn classify_curve(def: &CurveDef, n: usize, cfg: &ClassifyConfig) -> TheoremCrosscheck {
    let (parts, _) = select_modal_order(curve_parts(def, n));
    crosscheck_theorem(&parts, cfg).expect("classification")
}

pub fn schema() -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).expect("schema file")).expect("schema is JSON")
}

/// Validates `value` against the subset of JSON Schema used by the report
/// schema: `type`, `const`, `enum`, `minimum`, `maximum`, `exclusiveMinimum`,
/// `properties`, `required`, `additionalProperties: false`, `items`,
/// `minItems`, `maxItems`, `oneOf` and local `$ref`.
pub fn validate(root: &Value, value: &Value) -> Result<(), String> {
    check(root, root, value, "$")
}

fn resolve<'a>(root: &'a Value, reference: &str) -> &'a Value {
    let path = reference.strip_prefix("#/").expect("local reference");
    path.split('/').fold(root, |node, key| &node[key])
}

fn type_matches(name: &str, v: &Value) -> bool {
    match name {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => v.is_u64() || v.is_i64(),
        other => panic!("unsupported type {other}"),
    }
}

fn check(root: &Value, schema: &Value, v: &Value, at: &str) -> Result<(), String> {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        return check(root, resolve(root, r), v, at);
    }
    if let Some(options) = schema.get("oneOf").and_then(Value::as_array) {
        let passing = options.iter().filter(|o| check(root, o, v, at).is_ok()).count();
        if passing != 1 {
            let reasons: Vec<String> = options.iter().filter_map(|o| check(root, o, v, at).err()).collect();
            return Err(format!("{at}: {passing} oneOf branches match ({})", reasons.join("; ")));
        }
    }
    match schema.get("type") {
        Some(Value::String(t)) if !type_matches(t, v) => return Err(format!("{at}: expected {t}, got {v}")),
        Some(Value::Array(ts)) if !ts.iter().any(|t| type_matches(t.as_str().unwrap(), v)) => {
            return Err(format!("{at}: expected one of {ts:?}, got {v}"));
        }
        _ => {}
    }
    if let Some(c) = schema.get("const") {
        if c != v {
            return Err(format!("{at}: expected {c}, got {v}"));
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(v) {
            return Err(format!("{at}: {v} not in {options:?}"));
        }
    }
    if let Some(x) = v.as_f64() {
        let bound = |key| schema.get(key).and_then(Value::as_f64);
        if bound("minimum").is_some_and(|m| x < m)
            || bound("maximum").is_some_and(|m| x > m)
            || bound("exclusiveMinimum").is_some_and(|m| x <= m)
        {
            return Err(format!("{at}: {x} out of bounds"));
        }
    }
    if let Some(obj) = v.as_object() {
        let props = schema.get("properties").and_then(Value::as_object);
        if let Some(required) = schema.get("required").and_then(Value::as_array) {
            for key in required {
                let key = key.as_str().unwrap();
                if !obj.contains_key(key) {
                    return Err(format!("{at}: missing {key}"));
                }
            }
        }
        for (key, child) in obj {
            match props.and_then(|p| p.get(key)) {
                Some(s) => check(root, s, child, &format!("{at}.{key}"))?,
                None if schema.get("additionalProperties") == Some(&Value::Bool(false)) => {
                    return Err(format!("{at}: unexpected property {key}"));
                }
                None => {}
            }
        }
    }
    if let Some(items) = v.as_array() {
        let len = |key| schema.get(key).and_then(Value::as_u64).map(|n| n as usize);
        if len("minItems").is_some_and(|m| items.len() < m) || len("maxItems").is_some_and(|m| items.len() > m) {
            return Err(format!("{at}: {} items out of bounds", items.len()));
        }
        if let Some(s) = schema.get("items") {
            for (i, item) in items.iter().enumerate() {
                check(root, s, item, &format!("{at}[{i}]"))?;
            }
        }
    }
    Ok(())
}
