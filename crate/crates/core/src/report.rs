//! Versioned JSON envelopes for reports.

use serde::Serialize;

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: u32,
    kind: &'a str,
    report: &'a T,
}

/// Pretty-printed `{"schema": 1, "kind": ..., "report": ...}` with a
/// trailing newline. Non-finite numbers are written as `null`.
pub fn to_json<T: Serialize>(kind: &str, report: &T) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope {
        schema: SCHEMA_VERSION,
        kind,
        report,
    })?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct R {
        value: f64,
        alpha: f64,
    }

    #[test]
    fn envelope_layout() {
        let s = to_json("demo", &R { value: 0.5, alpha: f64::INFINITY }).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["kind"], "demo");
        assert_eq!(v["report"]["value"], 0.5);
        assert!(v["report"]["alpha"].is_null());
        assert_eq!(s, to_json("demo", &R { value: 0.5, alpha: f64::INFINITY }).unwrap());
    }
}
