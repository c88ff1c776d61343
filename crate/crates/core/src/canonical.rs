//! Canonical report file format.
//!
//! The document is pretty-printed JSON with two-space indentation and a
//! fixed key order: `locations`, `emergency_level`, `units`, then an
//! optional `audit` object holding `flags` and `geo`. The `audit` key is
//! omitted when both lists are empty, so a report without findings has
//! exactly the shape downstream consumers expect. Emergency levels are
//! written capitalized and throughput requirements as `"<n> Mbit/s"`
//! strings (or `null`). Output ends with a single newline.

use serde_json::{Map, Value};

use crate::model::{
    EmergencyLevel, FlagKind, GeoResolution, Priority, Rejection, Rules, SemanticReport, SupportRequest,
    Unit, ValidationFlag, Violation, ViolationKind,
};

const REPORT_KEYS: [&str; 4] = ["locations", "emergency_level", "units", "audit"];
const UNIT_KEYS: [&str; 5] = ["name", "location", "video_support", "image_support", "times_intervened"];
const SUPPORT_KEYS: [&str; 4] = ["needed", "issue", "priority", "requirements"];

/// Serializes a report that satisfies every invariant. Refuses otherwise,
/// naming each violation.
pub fn canonical_serialize(report: &SemanticReport) -> Result<Vec<u8>, Rejection> {
    canonical_string(report).map(String::into_bytes)
}

pub fn canonical_string(report: &SemanticReport) -> Result<String, Rejection> {
    let violations = report.violations(Rules::STRICT);
    if !violations.is_empty() {
        return Err(Rejection(violations));
    }
    let mut text = serde_json::to_string_pretty(&report_value(report)).expect("report values always serialize");
    text.push('\n');
    Ok(text)
}

/// JSON value with canonical key order.
pub fn report_value(report: &SemanticReport) -> Value {
    let mut root = Map::new();
    root.insert(
        "locations".into(),
        Value::Array(report.locations.iter().cloned().map(Value::String).collect()),
    );
    root.insert(
        "emergency_level".into(),
        Value::String(report.emergency_level.canonical_label().into()),
    );
    root.insert("units".into(), Value::Array(report.units.iter().map(unit_value).collect()));
    if !report.flags.is_empty() || !report.geo.is_empty() {
        let mut audit = Map::new();
        audit.insert("flags".into(), Value::Array(report.flags.iter().map(flag_value).collect()));
        audit.insert(
            "geo".into(),
            Value::Array(
                report
                    .geo
                    .iter()
                    .map(|g| serde_json::to_value(g).expect("geo serializes"))
                    .collect(),
            ),
        );
        root.insert("audit".into(), Value::Object(audit));
    }
    Value::Object(root)
}

fn unit_value(unit: &Unit) -> Value {
    let mut m = Map::new();
    m.insert("name".into(), Value::String(unit.name.clone()));
    m.insert("location".into(), Value::String(unit.location.clone()));
    m.insert("video_support".into(), support_value(&unit.video_support));
    m.insert("image_support".into(), support_value(&unit.image_support));
    m.insert("times_intervened".into(), Value::from(unit.times_intervened));
    Value::Object(m)
}

fn support_value(req: &SupportRequest) -> Value {
    let mut m = Map::new();
    m.insert("needed".into(), Value::Bool(req.needed));
    m.insert("issue".into(), Value::String(req.issue.clone()));
    m.insert("priority".into(), Value::String(req.priority.as_str().into()));
    m.insert(
        "requirements".into(),
        match req.requirements {
            Some(r) => Value::String(format_mbit(r)),
            None => Value::Null,
        },
    );
    Value::Object(m)
}

fn flag_value(flag: &ValidationFlag) -> Value {
    let mut m = Map::new();
    m.insert("kind".into(), Value::String(flag.kind.as_str().into()));
    m.insert("detail".into(), Value::String(flag.detail.clone()));
    m.insert(
        "subject".into(),
        flag.subject.clone().map(Value::String).unwrap_or(Value::Null),
    );
    Value::Object(m)
}

/// Shortest round-trip decimal followed by the unit.
pub fn format_mbit(value: f64) -> String {
    format!("{value} Mbit/s")
}

/// Accepts `10`, `"10"`, `"10 Mbit/s"`, `"2.5 Mbps"`.
pub fn parse_mbit(text: &str) -> Option<f64> {
    let t = text.trim();
    let lower = t.to_ascii_lowercase();
    let number = ["mbit/s", "mbps", "mb/s"]
        .iter()
        .find_map(|suffix| lower.strip_suffix(suffix))
        .unwrap_or(&lower)
        .trim();
    let value: f64 = number.parse().ok()?;
    value.is_finite().then_some(if value == 0.0 { 0.0 } else { value })
}

/// Parses a stored report, checking every invariant. On failure all
/// findings are returned, not only the first.
pub fn parse_report(text: &str) -> Result<SemanticReport, Rejection> {
    decode(text, Mode::Stored).and_then(|r| check(r, Rules::STRICT))
}

/// Parses a model response. Flags and geo are not accepted, and the
/// justification rule is left to the validation layer.
pub fn parse_model_output(text: &str) -> Result<SemanticReport, Rejection> {
    decode(text, Mode::ModelOutput).and_then(|r| check(r, Rules::MODEL_OUTPUT))
}

/// Structural decode only: types, enums and required keys. Cross-field
/// invariants are not checked.
pub fn decode_model_output(text: &str) -> Result<SemanticReport, Rejection> {
    decode(text, Mode::ModelOutput)
}

fn check(report: SemanticReport, rules: Rules) -> Result<SemanticReport, Rejection> {
    let violations = report.violations(rules);
    if violations.is_empty() {
        Ok(report)
    } else {
        Err(Rejection(violations))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Stored,
    ModelOutput,
}

fn decode(text: &str, mode: Mode) -> Result<SemanticReport, Rejection> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        Rejection(vec![Violation::new(
            "",
            ViolationKind::Syntax,
            format!("line {} column {}: {}", e.line(), e.column(), e),
        )])
    })?;
    decode_value(&value, mode)
}

fn decode_value(value: &Value, mode: Mode) -> Result<SemanticReport, Rejection> {
    let mut d = Decoder::default();
    let report = d.report(value, mode);
    if d.violations.is_empty() {
        Ok(report)
    } else {
        // Structural findings first; invariant findings on the parts that
        // did decode are appended so the caller sees everything at once.
        let rules = match mode {
            Mode::Stored => Rules::STRICT,
            Mode::ModelOutput => Rules::MODEL_OUTPUT,
        };
        let mut all = d.violations;
        all.extend(report.violations(rules).into_iter().filter(|v| !d.masked.contains(&v.path)));
        Err(Rejection(all))
    }
}

#[derive(Default)]
struct Decoder {
    violations: Vec<Violation>,
    /// Paths whose values were substituted after a structural failure.
    masked: Vec<String>,
}

impl Decoder {
    fn push(&mut self, path: impl Into<String>, kind: ViolationKind, msg: impl Into<String>) {
        self.violations.push(Violation::new(path, kind, msg));
    }

    fn object<'a>(&mut self, value: &'a Value, path: &str, allowed: &[&str]) -> Option<&'a Map<String, Value>> {
        let Some(map) = value.as_object() else {
            self.push(path, ViolationKind::WrongType, "expected an object");
            return None;
        };
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                self.push(join(path, key), ViolationKind::UnknownField, format!("unknown field `{key}`"));
            }
        }
        Some(map)
    }

    fn field<'a>(&mut self, map: &'a Map<String, Value>, path: &str, key: &str) -> Option<&'a Value> {
        let v = map.get(key);
        if v.is_none() {
            self.push(join(path, key), ViolationKind::MissingField, format!("missing field `{key}`"));
        }
        v
    }

    fn string(&mut self, value: &Value, path: &str) -> Option<String> {
        match value {
            Value::String(s) => Some(s.clone()),
            _ => {
                self.push(path, ViolationKind::WrongType, "expected a string");
                None
            }
        }
    }

    fn report(&mut self, value: &Value, mode: Mode) -> SemanticReport {
        let mut report = SemanticReport::empty(EmergencyLevel::Minor);
        let allowed: &[&str] = match mode {
            Mode::Stored => &REPORT_KEYS,
            Mode::ModelOutput => &REPORT_KEYS[..3],
        };
        let Some(root) = self.object(value, "", allowed) else {
            return report;
        };
        if let Some(v) = self.field(root, "", "locations") {
            match v.as_array() {
                Some(items) => {
                    for (i, item) in items.iter().enumerate() {
                        if let Some(s) = self.string(item, &format!("locations[{i}]")) {
                            report.locations.push(s);
                        }
                    }
                }
                None => self.push("locations", ViolationKind::WrongType, "expected an array of strings"),
            }
        }
        if let Some(v) = self.field(root, "", "emergency_level") {
            if let Some(s) = self.string(v, "emergency_level") {
                match s.parse::<EmergencyLevel>() {
                    Ok(level) => report.emergency_level = level,
                    Err(e) => self.push("emergency_level", ViolationKind::UnknownEmergencyLevel, e.to_string()),
                }
            }
        }
        if let Some(v) = self.field(root, "", "units") {
            match v.as_array() {
                Some(items) => {
                    for (i, item) in items.iter().enumerate() {
                        report.units.push(self.unit(item, i));
                    }
                }
                None => self.push("units", ViolationKind::WrongType, "expected an array of unit objects"),
            }
        }
        if mode == Mode::Stored {
            if let Some(audit) = root.get("audit") {
                self.audit(audit, &mut report);
            }
        }
        report
    }

    fn unit(&mut self, value: &Value, index: usize) -> Unit {
        let base = format!("units[{index}]");
        let mut unit = Unit {
            name: format!("\u{0}unit{index}"),
            location: String::new(),
            video_support: SupportRequest::not_needed(),
            image_support: SupportRequest::not_needed(),
            times_intervened: 1,
        };
        let Some(map) = self.object(value, &base, &UNIT_KEYS) else {
            self.masked.push(format!("{base}.name"));
            return unit;
        };
        match self.field(map, &base, "name").map(|v| self.string(v, &format!("{base}.name"))) {
            Some(Some(name)) => unit.name = name,
            _ => self.masked.push(format!("{base}.name")),
        }
        if let Some(v) = self.field(map, &base, "location") {
            match v {
                Value::Null => {}
                other => {
                    if let Some(s) = self.string(other, &format!("{base}.location")) {
                        unit.location = s;
                    }
                }
            }
        }
        if let Some(v) = self.field(map, &base, "video_support") {
            unit.video_support = self.support(v, &format!("{base}.video_support"));
        }
        if let Some(v) = self.field(map, &base, "image_support") {
            unit.image_support = self.support(v, &format!("{base}.image_support"));
        }
        if let Some(v) = self.field(map, &base, "times_intervened") {
            let path = format!("{base}.times_intervened");
            match v.as_i64() {
                Some(n) if n < 1 => unit.times_intervened = 0,
                Some(n) => unit.times_intervened = u32::try_from(n).unwrap_or(u32::MAX),
                None => self.push(path, ViolationKind::WrongType, "expected an integer"),
            }
        }
        unit
    }

    fn support(&mut self, value: &Value, base: &str) -> SupportRequest {
        let mut req = SupportRequest::not_needed();
        let Some(map) = self.object(value, base, &SUPPORT_KEYS) else {
            return req;
        };
        if let Some(v) = self.field(map, base, "needed") {
            match v.as_bool() {
                Some(b) => req.needed = b,
                None => self.push(join(base, "needed"), ViolationKind::WrongType, "expected a boolean"),
            }
        }
        if let Some(v) = self.field(map, base, "issue") {
            match v {
                Value::Null => {}
                other => {
                    if let Some(s) = self.string(other, &join(base, "issue")) {
                        req.issue = s;
                    }
                }
            }
        }
        // A structurally broken request must not also report a missing
        // justification.
        if self.violations.iter().any(|x| x.path.starts_with(base)) {
            req.needed = false;
        }
        if let Some(v) = self.field(map, base, "priority") {
            if let Some(s) = self.string(v, &join(base, "priority")) {
                match s.parse::<Priority>() {
                    Ok(p) => req.priority = p,
                    Err(e) => self.push(join(base, "priority"), ViolationKind::UnknownPriority, e),
                }
            }
        }
        if let Some(v) = self.field(map, base, "requirements") {
            let path = join(base, "requirements");
            match v {
                Value::Null => {}
                Value::Number(n) => req.requirements = n.as_f64(),
                Value::String(s) => match parse_mbit(s) {
                    Some(r) => req.requirements = Some(r),
                    None => self.push(
                        path,
                        ViolationKind::InvalidRequirement,
                        format!("cannot read `{s}` as a throughput in Mbit/s"),
                    ),
                },
                _ => self.push(path, ViolationKind::WrongType, "expected a number, a `<n> Mbit/s` string or null"),
            }
        }
        req
    }

    fn audit(&mut self, value: &Value, report: &mut SemanticReport) {
        let Some(map) = self.object(value, "audit", &["flags", "geo"]) else {
            return;
        };
        if let Some(flags) = map.get("flags") {
            match flags.as_array() {
                Some(items) => {
                    for (i, item) in items.iter().enumerate() {
                        if let Some(flag) = self.flag(item, &format!("audit.flags[{i}]")) {
                            report.flags.push(flag);
                        }
                    }
                }
                None => self.push("audit.flags", ViolationKind::WrongType, "expected an array"),
            }
        }
        if let Some(geo) = map.get("geo") {
            match geo.as_array() {
                Some(items) => {
                    for (i, item) in items.iter().enumerate() {
                        match serde_json::from_value::<GeoResolution>(item.clone()) {
                            Ok(g) => report.geo.push(g),
                            Err(e) => self.push(format!("audit.geo[{i}]"), ViolationKind::InvalidGeo, e.to_string()),
                        }
                    }
                }
                None => self.push("audit.geo", ViolationKind::WrongType, "expected an array"),
            }
        }
    }

    fn flag(&mut self, value: &Value, path: &str) -> Option<ValidationFlag> {
        let map = value.as_object();
        let kind = map.and_then(|m| m.get("kind")).and_then(Value::as_str).and_then(FlagKind::parse);
        let detail = map.and_then(|m| m.get("detail")).and_then(Value::as_str);
        let subject = map.and_then(|m| m.get("subject"));
        let subject_ok = matches!(subject, None | Some(Value::Null) | Some(Value::String(_)));
        match (kind, detail, subject_ok) {
            (Some(kind), Some(detail), true) => Some(ValidationFlag {
                kind,
                detail: detail.to_string(),
                subject: subject.and_then(Value::as_str).map(str::to_string),
            }),
            _ => {
                self.push(path, ViolationKind::InvalidFlag, "flag needs a known kind, a detail string and an optional subject");
                None
            }
        }
    }
}

fn join(base: &str, key: &str) -> String {
    if base.is_empty() {
        key.to_string()
    } else {
        format!("{base}.{key}")
    }
}


/// Serde goes through the canonical document form, so embedding a report in
/// another JSON document yields the same shape as the stored file.
impl serde::Serialize for SemanticReport {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        report_value(self).serialize(serializer)
    }
}

impl<'de> serde::Deserialize<'de> for SemanticReport {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        decode_value(&value, Mode::Stored)
            .and_then(|r| check(r, Rules::STRICT))
            .map_err(serde::de::Error::custom)
    }
}
