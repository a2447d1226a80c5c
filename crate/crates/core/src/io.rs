//! State files, diagnostics tables and run manifests.
//!
//! State files are JSON with a fixed key order. Every float is written in
//! scientific notation with 17 significant digits, so a write/read cycle
//! reproduces the numeric payload bit for bit and a write/read/write cycle
//! reproduces the file byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolve::{ConstraintSet, FlowDiagnostics};
use crate::geometry::{CurveState, DirectorField, ModelParams, Vec2};

pub const SCHEMA_VERSION: u64 = 1;

/// Environment variable naming the default output directory of CLI runs.
pub const OUTPUT_DIR_ENV: &str = "CURVE_DIRECTOR_OUT";

/// Output directory used when neither a flag nor the environment names one.
pub const DEFAULT_OUTPUT_DIR: &str = "runs";

/// Header of the diagnostics table.
pub const DIAGNOSTICS_HEADER: [&str; 15] = [
    "step",
    "t",
    "E_total",
    "E_bending",
    "E_frank",
    "L",
    "A",
    "dissipation",
    "predicted_dE",
    "max_V",
    "max_W",
    "turning",
    "res_L",
    "res_A",
    "res_S",
];

/// A sampled state together with its parameters and optional constraint targets.
#[derive(Debug, Clone)]
pub struct StateFile {
    pub params: ModelParams,
    pub curve: CurveState,
    pub field: DirectorField,
    pub constraints: Option<ConstraintSet>,
    /// Free-form string metadata (generator, seed, revision, ...).
    pub provenance: BTreeMap<String, String>,
}

impl StateFile {
    pub fn new(params: ModelParams, curve: CurveState, field: DirectorField) -> Self {
        Self {
            params,
            curve,
            field,
            constraints: None,
            provenance: BTreeMap::new(),
        }
    }

    pub fn with_provenance(mut self, key: &str, value: impl Into<String>) -> Self {
        self.provenance.insert(key.to_string(), value.into());
        self
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn pair(v: &Vec2) -> String {
    format!("[{}, {}]", num(v.x), num(v.y))
}

fn validation(path: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        path: path.to_string(),
        message: message.into(),
    }
}

fn parse_err(path: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Canonical text of a state file. Refuses non-finite data.
pub fn state_to_string(state: &StateFile) -> Result<String> {
    state.params.validate().map_err(|e| validation("params", e.to_string()))?;
    let n = state.curve.n();
    if state.field.len() != n {
        return Err(validation("eta", format!("{} vectors for {n} curve samples", state.field.len())));
    }
    if !state.field.is_finite() {
        return Err(validation("eta", "non-finite value"));
    }
    if state.curve.points().iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(validation("gamma", "non-finite value"));
    }
    if let Some(c) = &state.constraints {
        c.validate().map_err(|e| validation("constraints", e.to_string()))?;
    }

    let mut s = String::new();
    let list = |v: &[Vec2]| v.iter().map(pair).collect::<Vec<_>>().join(",\n    ");
    s.push_str("{\n");
    let _ = writeln!(s, "  \"schema_version\": {SCHEMA_VERSION},");
    let _ = writeln!(
        s,
        "  \"params\": {{\"lambda\": {}, \"delta\": {}}},",
        num(state.params.lambda),
        num(state.params.delta)
    );
    let _ = writeln!(s, "  \"n\": {n},");
    let _ = writeln!(s, "  \"gamma\": [\n    {}\n  ],", list(state.curve.points()));
    let _ = writeln!(s, "  \"eta\": [\n    {}\n  ],", list(&state.field.vectors));
    match &state.constraints {
        None => s.push_str("  \"constraints\": null,\n"),
        Some(c) => {
            let opt = |x: Option<f64>| x.map(num).unwrap_or_else(|| "null".into());
            let _ = writeln!(
                s,
                "  \"constraints\": {{\"length_target\": {}, \"area_target\": {}, \"unit_director\": {}}},",
                opt(c.length_target),
                opt(c.area_target),
                c.unit_director
            );
        }
    }
    let prov = serde_json::to_string(&state.provenance).map_err(|e| Error::Io(e.to_string()))?;
    let _ = writeln!(s, "  \"provenance\": {prov}");
    s.push_str("}\n");
    Ok(s)
}

pub fn write_state(state: &StateFile, path: &Path) -> Result<()> {
    let text = state_to_string(state)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| parse_err(key, "missing field"))
}

fn number(v: &Value, path: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| parse_err(path, "expected a number"))
}

fn vectors(v: &Value, path: &str, n: usize) -> Result<Vec<Vec2>> {
    let arr = v.as_array().ok_or_else(|| parse_err(path, "expected an array"))?;
    if arr.len() != n {
        return Err(parse_err(path, format!("array has {} entries but n = {n}", arr.len())));
    }
    arr.iter()
        .enumerate()
        .map(|(i, p)| {
            let here = format!("{path}[{i}]");
            match p.as_array().map(|a| a.as_slice()) {
                Some([x, y]) => Ok(Vec2::new(number(x, &here)?, number(y, &here)?)),
                _ => Err(parse_err(&here, "expected a pair [x, y]")),
            }
        })
        .collect()
}

fn optional_number(v: Option<&Value>, path: &str) -> Result<Option<f64>> {
    match v {
        None | Some(Value::Null) => Ok(None),
        Some(x) => number(x, path).map(Some),
    }
}

/// Parses and validates a state file.
pub fn state_from_str(text: &str) -> Result<StateFile> {
    let root: Value = serde_json::from_str(text).map_err(|e| parse_err("$", e.to_string()))?;
    let obj = root.as_object().ok_or_else(|| parse_err("$", "expected an object"))?;

    let version = field(obj, "schema_version")?;
    match version.as_u64() {
        Some(SCHEMA_VERSION) => {}
        _ => {
            return Err(Error::Schema {
                path: "schema_version".into(),
                message: format!("unsupported version {version}, expected {SCHEMA_VERSION}"),
            })
        }
    }

    let p = field(obj, "params")?
        .as_object()
        .ok_or_else(|| parse_err("params", "expected an object"))?;
    let params = ModelParams {
        lambda: number(field(p, "lambda").map_err(|_| parse_err("params.lambda", "missing field"))?, "params.lambda")?,
        delta: number(field(p, "delta").map_err(|_| parse_err("params.delta", "missing field"))?, "params.delta")?,
    };
    params.validate().map_err(|e| validation("params", e.to_string()))?;

    let n = field(obj, "n")?
        .as_u64()
        .ok_or_else(|| parse_err("n", "expected a non-negative integer"))? as usize;
    let gamma = vectors(field(obj, "gamma")?, "gamma", n)?;
    let eta = vectors(field(obj, "eta")?, "eta", n)?;

    let constraints = match obj.get("constraints") {
        None | Some(Value::Null) => None,
        Some(Value::Object(c)) => {
            let unit = match c.get("unit_director") {
                None | Some(Value::Null) => false,
                Some(Value::Bool(b)) => *b,
                Some(_) => return Err(parse_err("constraints.unit_director", "expected a boolean")),
            };
            let cs = ConstraintSet {
                length_target: optional_number(c.get("length_target"), "constraints.length_target")?,
                area_target: optional_number(c.get("area_target"), "constraints.area_target")?,
                unit_director: unit,
                multipliers: Default::default(),
            };
            cs.validate().map_err(|e| validation("constraints", e.to_string()))?;
            Some(cs)
        }
        Some(_) => return Err(parse_err("constraints", "expected an object or null")),
    };

    let provenance = match obj.get("provenance") {
        None | Some(Value::Null) => BTreeMap::new(),
        Some(Value::Object(m)) => m
            .iter()
            .map(|(k, v)| {
                let s = match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                (k.clone(), s)
            })
            .collect(),
        Some(_) => return Err(parse_err("provenance", "expected an object")),
    };

    let curve = CurveState::new(gamma).map_err(|e| validation("gamma", e.to_string()))?;
    Ok(StateFile {
        params,
        curve,
        field: DirectorField::new(eta),
        constraints,
        provenance,
    })
}

pub fn read_state(path: &Path) -> Result<StateFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    state_from_str(&text)
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Writes one row per record (the initial state and every accepted step).
pub fn write_diagnostics<W: std::io::Write>(diagnostics: &FlowDiagnostics, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(DIAGNOSTICS_HEADER).map_err(io)?;
    for r in &diagnostics.records {
        w.write_record([
            r.step.to_string(),
            num(r.t),
            num(r.energy.total_elm),
            num(r.energy.bending),
            num(r.energy.frank),
            num(r.energy.length),
            num(r.area),
            num(r.dissipation),
            num(r.predicted_de),
            num(r.max_v),
            num(r.max_w),
            r.turning.map(|k| k.to_string()).unwrap_or_default(),
            opt(r.residuals.length),
            opt(r.residuals.area),
            opt(r.residuals.director),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_diagnostics(diagnostics: &FlowDiagnostics, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::fs::File::create(path)?;
    write_diagnostics(diagnostics, std::io::BufWriter::new(file))
}

/// Record of one CLI invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    /// SHA-256 of the input state file, if any.
    pub input_sha256: Option<String>,
    pub input_path: Option<String>,
    pub outputs: Vec<String>,
    pub wall_time_seconds: f64,
    pub termination: String,
}

impl RunManifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(Self::FILE_NAME);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Output directory: explicit choice, else the environment variable, else [`DEFAULT_OUTPUT_DIR`].
pub fn output_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::circle_minimizer;

    fn sample() -> StateFile {
        let p = ModelParams::new(1.0, 1.0).unwrap();
        let (c, e, _) = circle_minimizer(&p, 16).unwrap();
        let mut s = StateFile::new(p, c, e).with_provenance("generator", "test");
        s.constraints = Some(ConstraintSet::new(None, Some(0.7), true).unwrap());
        s
    }

    #[test]
    fn round_trip_is_bitwise() {
        let s = sample();
        let text = state_to_string(&s).unwrap();
        assert!(text.ends_with("}\n"));
        let back = state_from_str(&text).unwrap();
        assert_eq!(back.curve.points(), s.curve.points());
        assert_eq!(back.field.vectors, s.field.vectors);
        assert_eq!(back.params, s.params);
        assert_eq!(back.constraints, s.constraints);
        assert_eq!(state_to_string(&back).unwrap(), text);
    }

    #[test]
    fn length_mismatch_names_gamma() {
        let text = state_to_string(&sample()).unwrap().replace("\"n\": 16", "\"n\": 18");
        match state_from_str(&text) {
            Err(Error::Parse { path, .. }) => assert_eq!(path, "gamma"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_schema() {
        let text = state_to_string(&sample()).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(matches!(state_from_str(&text), Err(Error::Schema { .. })));
    }

    #[test]
    fn infeasible_targets_rejected() {
        let text = state_to_string(&sample()).unwrap().replace(
            "\"length_target\": null, \"area_target\": 6.9999999999999996e-1",
            "\"length_target\": 1, \"area_target\": 1",
        );
        match state_from_str(&text) {
            Err(Error::Validation { path, message }) => {
                assert_eq!(path, "constraints");
                assert!(message.contains("L0^2/(4 pi)"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nan_is_refused() {
        let mut s = sample();
        s.field.vectors[3].x = f64::NAN;
        assert!(matches!(state_to_string(&s), Err(Error::Validation { .. })));
    }
}
