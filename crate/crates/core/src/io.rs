//! Canonical JSON documents.
//!
//! Files carry a top-level `"schema"` id. Output is canonical: object keys
//! sorted, integers verbatim, every other number written with 17 significant
//! digits, two-space indentation. Loading then saving a canonical file
//! reproduces it byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::conic::SdpProblem;
use crate::construction::OptimalTaskBundle;
use crate::discrimination::{BoundReport, DiscriminationTask};
use crate::error::{Error, Result};
use crate::incompatibility::RoiCertificate;
use crate::measurements::MeasurementSet;

pub const SCHEMA_KEY: &str = "schema";
/// Provenance block added by front ends; ignored on load.
pub const GENERATOR_KEY: &str = "generator";

/// A value with a versioned JSON representation.
pub trait Document: Serialize + DeserializeOwned {
    const SCHEMA: &'static str;

    /// Semantic checks beyond the serde shape.
    fn check(&self) -> Result<()> {
        Ok(())
    }
}

impl Document for MeasurementSet {
    const SCHEMA: &'static str = "measurement_set.v1";
}

impl Document for DiscriminationTask {
    const SCHEMA: &'static str = "task.v1";

    fn check(&self) -> Result<()> {
        self.validate()
    }
}

impl Document for RoiCertificate {
    const SCHEMA: &'static str = "roi_cert.v1";
}

impl Document for BoundReport {
    const SCHEMA: &'static str = "bound_report.v1";
}

impl Document for OptimalTaskBundle {
    const SCHEMA: &'static str = "bundle_meta.v1";

    fn check(&self) -> Result<()> {
        self.task.validate().map_err(|e| match e {
            Error::Schema { pointer, message } => Error::schema(format!("/task{pointer}"), message),
            other => other,
        })
    }
}

impl Document for SdpProblem {
    const SCHEMA: &'static str = "sdp_dump.v1";

    fn check(&self) -> Result<()> {
        self.validate()
    }
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => write!(out, "/{index}").unwrap(),
            Segment::Map { key } => write!(out, "/{}", key.replace('~', "~0").replace('/', "~1")).unwrap(),
            Segment::Enum { variant } => write!(out, "/{variant}").unwrap(),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    out
}

/// Field name from serde's "missing field `x`" message.
fn missing_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    rest.split('`').next()
}

/// Decodes a parsed document, stripping and checking the envelope keys.
pub fn from_value<T: Document>(value: Value) -> Result<T> {
    let mut value = value;
    if let Value::Object(map) = &mut value {
        if let Some(id) = map.remove(SCHEMA_KEY) {
            if id.as_str() != Some(T::SCHEMA) {
                return Err(Error::schema(
                    format!("/{SCHEMA_KEY}"),
                    format!("expected schema {:?}, found {id}", T::SCHEMA),
                ));
            }
        }
        map.remove(GENERATOR_KEY);
    }
    let doc: T = serde_path_to_error::deserialize(value).map_err(|e| {
        let mut pointer = pointer_of(e.path());
        let message = e.inner().to_string();
        if let Some(field) = missing_field(&message) {
            write!(pointer, "/{field}").unwrap();
        }
        Error::schema(if pointer.is_empty() { "/".into() } else { pointer }, message)
    })?;
    doc.check()?;
    Ok(doc)
}

pub fn from_str<T: Document>(text: &str) -> Result<T> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        Error::schema(
            "/",
            format!("malformed JSON at line {} column {}: {e}", e.line(), e.column()),
        )
    })?;
    from_value(value)
}

pub fn load<T: Document>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    from_str(&text)
}

/// Document as a JSON value with the schema id and optional provenance.
///
/// The value is decoded again before returning, which rejects non-finite
/// numbers (serialized as null) and anything else that would not load.
pub fn to_value<T: Document>(doc: &T, generator: Option<&Value>) -> Result<Value> {
    let value = serde_json::to_value(doc).map_err(|e| Error::Invalid(format!("serialization failed: {e}")))?;
    T::deserialize(&value).map_err(|e| Error::Numeric(format!("document does not round-trip: {e}")))?;
    let Value::Object(mut map) = value else {
        return Err(Error::Invalid(format!("{} must serialize to an object", T::SCHEMA)));
    };
    map.insert(SCHEMA_KEY.into(), Value::String(T::SCHEMA.into()));
    if let Some(g) = generator {
        map.insert(GENERATOR_KEY.into(), g.clone());
    }
    Ok(Value::Object(map))
}

/// Adds the schema id and provenance to an already serialized report object.
pub fn envelope(schema: &str, body: Value, generator: Option<&Value>) -> Result<Value> {
    let Value::Object(mut map) = body else {
        return Err(Error::Invalid(format!("{schema} must serialize to an object")));
    };
    map.insert(SCHEMA_KEY.into(), Value::String(schema.into()));
    if let Some(g) = generator {
        map.insert(GENERATOR_KEY.into(), g.clone());
    }
    Ok(Value::Object(map))
}

pub fn to_string<T: Document>(doc: &T, generator: Option<&Value>) -> Result<String> {
    Ok(canonical_string(&to_value(doc, generator)?))
}

pub fn save<T: Document>(path: &Path, doc: &T, generator: Option<&Value>) -> Result<()> {
    std::fs::write(path, to_string(doc, generator)?)?;
    Ok(())
}

/// Canonical text of an arbitrary JSON value, newline-terminated.
pub fn canonical_string(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_number(out: &mut String, n: &serde_json::Number) {
    if n.is_u64() || n.is_i64() {
        write!(out, "{n}").unwrap();
    } else {
        write!(out, "{:.16e}", n.as_f64().expect("finite JSON number")).unwrap();
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_value(out: &mut String, value: &Value, level: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => write!(out, "{b}").unwrap(),
        Value::Number(n) => write_number(out, n),
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) if items.iter().all(is_scalar) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(out, item, level);
            }
            out.push(']');
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                indent(out, level + 1);
                write_value(out, item, level + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            indent(out, level);
            out.push(']');
        }
        Value::Object(map) => write_object(out, map, level),
    }
}

fn write_object(out: &mut String, map: &Map<String, Value>, level: usize) {
    if map.is_empty() {
        out.push_str("{}");
        return;
    }
    let mut keys: Vec<&String> = map.keys().collect();
    keys.sort();
    out.push_str("{\n");
    for (i, key) in keys.iter().enumerate() {
        indent(out, level + 1);
        out.push_str(&Value::String((*key).clone()).to_string());
        out.push_str(": ");
        write_value(out, &map[*key], level + 1);
        out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
    }
    indent(out, level);
    out.push('}');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrimination::random_task;
    use crate::incompatibility::compute_roi;
    use crate::measurements::{random_set, sigma_xz_set};

    fn round_trip<T: Document>(doc: &T) {
        let first = to_string(doc, None).unwrap();
        let back: T = from_str(&first).unwrap();
        assert_eq!(to_string(&back, None).unwrap(), first);
    }

    #[test]
    fn documents_round_trip_byte_identically() {
        round_trip(&sigma_xz_set());
        round_trip(&random_set(3, 2, 3, 5).unwrap());
        round_trip(&random_task(&[2, 2], 2, 3, 1).unwrap());
        round_trip(&compute_roi(&sigma_xz_set()).unwrap());
    }

    #[test]
    fn generator_block_is_ignored_on_load() {
        let g = serde_json::json!({"name": "x", "version": "0"});
        let text = to_string(&sigma_xz_set(), Some(&g)).unwrap();
        assert!(text.contains("\"generator\""));
        let back: MeasurementSet = from_str(&text).unwrap();
        assert_eq!(back, sigma_xz_set());
    }

    #[test]
    fn canonical_formatting() {
        let v = serde_json::json!({"b": [1.0, 0.1], "a": 3, "c": {"z": null, "y": "s"}});
        assert_eq!(
            canonical_string(&v),
            "{\n  \"a\": 3,\n  \"b\": [1.0000000000000000e0, 1.0000000000000001e-1],\n  \"c\": {\n    \"y\": \"s\",\n    \"z\": null\n  }\n}\n"
        );
    }

    #[test]
    fn missing_dim_points_at_dim() {
        let err = from_str::<MeasurementSet>(r#"{"povms": []}"#).unwrap_err();
        match err {
            Error::Schema { pointer, .. } => assert_eq!(pointer, "/dim"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn nested_errors_carry_pointers() {
        let text = r#"{"dim": 1, "povms": [[{"re": [[1.0]], "im": [["x"]]}]]}"#;
        match from_str::<MeasurementSet>(text).unwrap_err() {
            Error::Schema { pointer, .. } => assert_eq!(pointer, "/povms/0/0/im/0/0"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn wrong_schema_id_is_rejected() {
        let text = to_string(&sigma_xz_set(), None).unwrap();
        match from_str::<DiscriminationTask>(&text).unwrap_err() {
            Error::Schema { pointer, .. } => assert_eq!(pointer, "/schema"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn nan_is_rejected() {
        // JSON has no NaN literal; the nearest spellings all fail to load.
        for bad in ["NaN", "null", "\"NaN\""] {
            let text = format!(r#"{{"dim": 1, "povms": [[{{"re": [[{bad}]], "im": [[0.0]]}}]]}}"#);
            assert!(
                matches!(from_str::<MeasurementSet>(&text), Err(Error::Schema { .. })),
                "{bad}"
            );
        }
        let mut t = random_task(&[2], 1, 2, 0).unwrap();
        t.ensembles[0].prior = f64::NAN;
        assert!(to_string(&t, None).is_err());
    }

    #[test]
    fn malformed_json_is_a_schema_error() {
        assert!(matches!(from_str::<MeasurementSet>("{"), Err(Error::Schema { .. })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.json");
        save(&path, &sigma_xz_set(), None).unwrap();
        let back: MeasurementSet = load(&path).unwrap();
        assert_eq!(back, sigma_xz_set());
        assert!(matches!(
            load::<MeasurementSet>(&dir.path().join("none.json")),
            Err(Error::Io(_))
        ));
    }
}
