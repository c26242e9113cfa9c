//! Array file persistence and trace export.
//!
//! Array files are JSON with a canonical form: keys sorted, floats in their
//! shortest round-trip decimal form, one line. Saving is atomic (temp file in
//! the target directory, then rename), and save -> load -> save is
//! byte-identical, so flux-restoration claims can be checked on serialized
//! state.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde_json::Value;

use crate::devices::MemductanceModel;
use crate::error::{Error, Result};
use crate::network::CrossbarState;
use crate::protocols::WriteTrace;

pub const SCHEMA_VERSION: u64 = 1;

/// Device models of an array file: one shared model, or one per cell
/// (column-major).
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Uniform(MemductanceModel),
    PerCell(Vec<MemductanceModel>),
}

/// On-disk representation of a crossbar array.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayFile {
    pub schema_version: u64,
    pub m: usize,
    pub n: usize,
    pub model: ModelSpec,
    /// Column-major, length m*n.
    pub flux: Vec<f64>,
    /// Column-major, 0/1, length m*n.
    pub switches: Vec<u8>,
}

impl ArrayFile {
    pub fn from_state(state: &CrossbarState) -> Self {
        let models = state.models();
        let model = if models.iter().all(|m| m == &models[0]) {
            ModelSpec::Uniform(models[0])
        } else {
            ModelSpec::PerCell(models.to_vec())
        };
        ArrayFile {
            schema_version: SCHEMA_VERSION,
            m: state.rows(),
            n: state.cols(),
            model,
            flux: state.phi().to_vec(),
            switches: state.switches().iter().map(|&s| s as u8).collect(),
        }
    }

    pub fn to_state(&self) -> Result<CrossbarState> {
        let models = match &self.model {
            ModelSpec::Uniform(m) => vec![*m; self.m * self.n],
            ModelSpec::PerCell(ms) => {
                if ms.len() != self.m * self.n {
                    return Err(Error::File(format!(
                        "model grid has {} entries, expected {}",
                        ms.len(),
                        self.m * self.n
                    )));
                }
                ms.clone()
            }
        };
        let mut state = CrossbarState::new(self.m, self.n, models, self.flux.clone())?;
        if self.switches.len() != self.m * self.n {
            return Err(Error::File(format!(
                "switch grid has {} entries, expected {}",
                self.switches.len(),
                self.m * self.n
            )));
        }
        state.set_switches(self.switches.iter().map(|&s| s != 0).collect())?;
        Ok(state)
    }

    /// Copies flux and switches back from a state; the model spec is kept
    /// as stored so files round-trip unchanged.
    pub fn update_from_state(&mut self, state: &CrossbarState) {
        self.flux = state.phi().to_vec();
        self.switches = state.switches().iter().map(|&s| s as u8).collect();
    }

    pub fn to_canonical_json(&self) -> String {
        let mut out = String::new();
        out.push_str("{\"flux\":[");
        for (i, v) in self.flux.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(*v));
        }
        let _ = write!(out, "],\"m\":{},\"model\":", self.m);
        match &self.model {
            ModelSpec::Uniform(m) => out.push_str(&model_json(m)),
            ModelSpec::PerCell(ms) => {
                out.push('[');
                for (i, m) in ms.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push_str(&model_json(m));
                }
                out.push(']');
            }
        }
        let _ = write!(out, ",\"n\":{},\"schema_version\":{},\"switches\":[", self.n, self.schema_version);
        for (i, s) in self.switches.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{s}");
        }
        out.push_str("]}");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::File(format!("invalid JSON: {e}")))?;
        let obj = value.as_object().ok_or_else(|| Error::File("expected a JSON object".into()))?;
        let schema_version = obj
            .get("schema_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::File("missing schema_version".into()))?;
        if schema_version != SCHEMA_VERSION {
            return Err(Error::File(format!("unsupported schema_version {schema_version}")));
        }
        let m = get_usize(obj, "m")?;
        let n = get_usize(obj, "n")?;
        let model = match obj.get("model") {
            Some(Value::Array(items)) => ModelSpec::PerCell(
                items.iter().map(model_from_value).collect::<Result<_>>()?,
            ),
            Some(v) => ModelSpec::Uniform(model_from_value(v)?),
            None => return Err(Error::File("missing model".into())),
        };
        let flux = get_f64_array(obj, "flux")?;
        let switches = obj
            .get("switches")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::File("missing switches".into()))?
            .iter()
            .map(|v| match v.as_u64() {
                Some(0) => Ok(0),
                Some(1) => Ok(1),
                _ => Err(Error::File(format!("switch entries must be 0 or 1, got {v}"))),
            })
            .collect::<Result<_>>()?;
        let file = ArrayFile { schema_version, m, n, model, flux, switches };
        // validate dimensions and domains eagerly
        file.to_state()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Atomic save: write to a temp file next to the target, then rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)
            .map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        tmp.write_all(self.to_canonical_json().as_bytes())
            .map_err(|e| Error::Io(e.to_string()))?;
        tmp.persist(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(())
    }
}

/// Shortest decimal form that round-trips, always with a fractional marker.
pub fn fmt_f64(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') || s.contains('E') {
        s
    } else {
        s + ".0"
    }
}

fn model_json(m: &MemductanceModel) -> String {
    match *m {
        MemductanceModel::Sigmoid { w_min, w_max, c } => format!(
            "{{\"c\":{},\"kind\":\"sigmoid\",\"w_max\":{},\"w_min\":{}}}",
            fmt_f64(c),
            fmt_f64(w_max),
            fmt_f64(w_min)
        ),
        MemductanceModel::Affine { a0, a1, phi_lo, phi_hi } => format!(
            "{{\"a0\":{},\"a1\":{},\"kind\":\"affine\",\"phi_hi\":{},\"phi_lo\":{}}}",
            fmt_f64(a0),
            fmt_f64(a1),
            fmt_f64(phi_hi),
            fmt_f64(phi_lo)
        ),
    }
}

fn model_from_value(v: &Value) -> Result<MemductanceModel> {
    let obj = v.as_object().ok_or_else(|| Error::File("model must be an object".into()))?;
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::File("model missing kind".into()))?;
    let field = |name: &str| -> Result<f64> {
        obj.get(name)
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::File(format!("model missing numeric field {name}")))
    };
    match kind {
        "sigmoid" => MemductanceModel::sigmoid(field("w_min")?, field("w_max")?, field("c")?),
        "affine" => {
            MemductanceModel::affine(field("a0")?, field("a1")?, field("phi_lo")?, field("phi_hi")?)
        }
        other => Err(Error::File(format!("unknown model kind {other:?}"))),
    }
}

fn get_usize(obj: &serde_json::Map<String, Value>, key: &str) -> Result<usize> {
    obj.get(key)
        .and_then(Value::as_u64)
        .map(|v| v as usize)
        .ok_or_else(|| Error::File(format!("missing integer field {key}")))
}

fn get_f64_array(obj: &serde_json::Map<String, Value>, key: &str) -> Result<Vec<f64>> {
    obj.get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::File(format!("missing array field {key}")))?
        .iter()
        .map(|v| v.as_f64().ok_or_else(|| Error::File(format!("{key} entries must be numbers"))))
        .collect()
}

/// One sampled row of a terminal trace.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub time: f64,
    pub p_a: Vec<f64>,
    pub p_b: Vec<f64>,
    pub j_a: Vec<f64>,
    pub j_b: Vec<f64>,
    pub phi: Option<Vec<f64>>,
}

/// CSV columns: time, p_a[1..n], p_b[1..m], j_a[1..n], j_b[1..m], and
/// optionally phi[1..mn].
pub fn write_terminal_trace(path: &Path, rows: &[TraceRow], m: usize, n: usize) -> Result<()> {
    let with_phi = rows.iter().any(|r| r.phi.is_some());
    let mut out = String::new();
    out.push_str("time");
    for l in 1..=n {
        let _ = write!(out, ",p_a{l}");
    }
    for k in 1..=m {
        let _ = write!(out, ",p_b{k}");
    }
    for l in 1..=n {
        let _ = write!(out, ",j_a{l}");
    }
    for k in 1..=m {
        let _ = write!(out, ",j_b{k}");
    }
    if with_phi {
        for i in 1..=m * n {
            let _ = write!(out, ",phi{i}");
        }
    }
    out.push('\n');
    for row in rows {
        out.push_str(&fmt_f64(row.time));
        for v in row.p_a.iter().chain(&row.p_b).chain(&row.j_a).chain(&row.j_b) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        if with_phi {
            if let Some(phi) = &row.phi {
                for v in phi {
                    out.push(',');
                    out.push_str(&fmt_f64(*v));
                }
            }
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// CSV columns: iter, phi, P, J, W_inferred, lyapunov.
pub fn write_write_trace(path: &Path, trace: &WriteTrace) -> Result<()> {
    let mut out = String::from("iter,phi,P,J,W_inferred,lyapunov\n");
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iter,
            fmt_f64(r.phi),
            fmt_f64(r.voltage),
            fmt_f64(r.current),
            fmt_f64(r.w_inferred),
            fmt_f64(r.lyapunov)
        );
    }
    fs::write(path, out).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_state() -> CrossbarState {
        let model = MemductanceModel::sigmoid(1.0, 3.0, 1.0).unwrap();
        CrossbarState::uniform(2, 2, model, vec![0.0, -0.5, 0.25, 1.0]).unwrap()
    }

    #[test]
    fn canonical_json_round_trips_byte_identically() {
        let file = ArrayFile::from_state(&sample_state());
        let json = file.to_canonical_json();
        let reloaded = ArrayFile::from_json(&json).unwrap();
        assert_eq!(reloaded.to_canonical_json(), json);
        assert_eq!(reloaded, file);
    }

    #[test]
    fn canonical_json_shape() {
        let file = ArrayFile::from_state(&sample_state());
        let json = file.to_canonical_json();
        assert_eq!(
            json,
            "{\"flux\":[0.0,-0.5,0.25,1.0],\"m\":2,\"model\":{\"c\":1.0,\"kind\":\"sigmoid\",\"w_max\":3.0,\"w_min\":1.0},\"n\":2,\"schema_version\":1,\"switches\":[1,1,1,1]}\n"
        );
    }

    #[test]
    fn accepts_any_key_order() {
        let json = r#"{"switches":[1],"schema_version":1,"n":1,"model":{"kind":"sigmoid","w_min":1.0,"w_max":3.0,"c":1.0},"m":1,"flux":[0.5]}"#;
        let file = ArrayFile::from_json(json).unwrap();
        assert_eq!(file.m, 1);
        assert_eq!(file.flux, vec![0.5]);
    }

    #[test]
    fn per_cell_models_round_trip() {
        let sig = MemductanceModel::sigmoid(1.0, 3.0, 1.0).unwrap();
        let aff = MemductanceModel::affine(1.0, 0.5, 0.0, 4.0).unwrap();
        let state = CrossbarState::new(2, 1, vec![sig, aff], vec![0.0, 2.0]).unwrap();
        let file = ArrayFile::from_state(&state);
        assert!(matches!(file.model, ModelSpec::PerCell(_)));
        let json = file.to_canonical_json();
        let reloaded = ArrayFile::from_json(&json).unwrap();
        assert_eq!(reloaded.to_canonical_json(), json);
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(ArrayFile::from_json("not json").is_err());
        assert!(ArrayFile::from_json("{}").is_err());
        // flux out of the affine domain
        let json = r#"{"flux":[9.0],"m":1,"model":{"a0":1.0,"a1":0.5,"kind":"affine","phi_hi":4.0,"phi_lo":0.0},"n":1,"schema_version":1,"switches":[1]}"#;
        assert!(ArrayFile::from_json(json).is_err());
        // wrong flux length
        let json = r#"{"flux":[0.0],"m":2,"model":{"c":1.0,"kind":"sigmoid","w_max":3.0,"w_min":1.0},"n":2,"schema_version":1,"switches":[1,1,1,1]}"#;
        assert!(ArrayFile::from_json(json).is_err());
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        let file = ArrayFile::from_state(&sample_state());
        file.save(&path).unwrap();
        let loaded = ArrayFile::load(&path).unwrap();
        assert_eq!(loaded, file);
        // saving again produces identical bytes
        loaded.save(&path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), file.to_canonical_json().as_bytes());
    }

    #[test]
    fn float_formatting() {
        assert_eq!(fmt_f64(1.0), "1.0");
        assert_eq!(fmt_f64(-0.5), "-0.5");
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(3.0_f64.ln()), "1.0986122886681098");
    }
}
