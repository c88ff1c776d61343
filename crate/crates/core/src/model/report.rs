use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::flag::ValidationFlag;
use super::geo::GeoResolution;
use super::level::EmergencyLevel;
use super::normalize::normalize_location;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Priority {
    Low,
    Medium,
    High,
}

impl Priority {
    pub fn as_str(self) -> &'static str {
        match self {
            Priority::Low => "low",
            Priority::Medium => "medium",
            Priority::High => "high",
        }
    }
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Priority {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "low" => Ok(Priority::Low),
            "medium" => Ok(Priority::Medium),
            "high" => Ok(Priority::High),
            _ => Err(format!("unknown priority `{s}` (expected low, medium or high)")),
        }
    }
}

/// A unit's stated need for one kind of media support.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportRequest {
    pub needed: bool,
    /// Justification quoted or paraphrased from the transcript.
    pub issue: String,
    pub priority: Priority,
    /// Indicative throughput in Mbit/s; `None` when not stated.
    pub requirements: Option<f64>,
}

impl SupportRequest {
    pub fn not_needed() -> Self {
        SupportRequest {
            needed: false,
            issue: String::new(),
            priority: Priority::Low,
            requirements: None,
        }
    }

    pub fn is_grounded(&self) -> bool {
        !self.needed || !self.issue.trim().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub name: String,
    /// Location reference; empty when the unit has none.
    pub location: String,
    pub video_support: SupportRequest,
    pub image_support: SupportRequest,
    pub times_intervened: u32,
}

impl Unit {
    pub fn support_requests(&self) -> [(&'static str, &SupportRequest); 2] {
        [("video_support", &self.video_support), ("image_support", &self.image_support)]
    }
}

/// The structured output of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticReport {
    pub locations: Vec<String>,
    pub emergency_level: EmergencyLevel,
    pub units: Vec<Unit>,
    pub flags: Vec<ValidationFlag>,
    pub geo: Vec<GeoResolution>,
}

impl SemanticReport {
    pub fn empty(level: EmergencyLevel) -> Self {
        SemanticReport {
            locations: Vec::new(),
            emergency_level: level,
            units: Vec::new(),
            flags: Vec::new(),
            geo: Vec::new(),
        }
    }

    pub fn has_location(&self, reference: &str) -> bool {
        let wanted = normalize_location(reference);
        self.locations.iter().any(|l| normalize_location(l) == wanted)
    }

    pub fn unit(&self, name: &str) -> Option<&Unit> {
        let wanted = normalize_location(name);
        self.units.iter().find(|u| normalize_location(&u.name) == wanted)
    }

    pub fn geo_for(&self, query: &str) -> Option<(usize, &GeoResolution)> {
        let wanted = normalize_location(query);
        self.geo
            .iter()
            .enumerate()
            .find(|(_, g)| normalize_location(&g.query) == wanted)
    }

    /// Adds a flag unless an identical one is already attached.
    pub fn push_flag(&mut self, flag: ValidationFlag) -> bool {
        if self.flags.contains(&flag) {
            false
        } else {
            self.flags.push(flag);
            true
        }
    }

    /// Every invariant violation, in document order.
    pub fn violations(&self, rules: Rules) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for (i, loc) in self.locations.iter().enumerate() {
            let norm = normalize_location(loc);
            if norm.is_empty() {
                out.push(Violation::new(
                    format!("locations[{i}]"),
                    ViolationKind::EmptyLocation,
                    "location reference is empty",
                ));
            } else if !seen.insert(norm) {
                out.push(Violation::new(
                    format!("locations[{i}]"),
                    ViolationKind::DuplicateLocation,
                    format!("`{loc}` duplicates an earlier location after normalization"),
                ));
            }
        }
        let mut names = HashSet::new();
        for (i, unit) in self.units.iter().enumerate() {
            out.extend(unit_violations(unit, i, &seen, &mut names, rules));
        }
        for (i, flag) in self.flags.iter().enumerate() {
            if flag.detail.trim().is_empty() {
                out.push(Violation::new(
                    format!("audit.flags[{i}].detail"),
                    ViolationKind::InvalidFlag,
                    "flag detail is empty",
                ));
            }
        }
        for (i, geo) in self.geo.iter().enumerate() {
            if let Err(msg) = geo.check() {
                out.push(Violation::new(format!("audit.geo[{i}]"), ViolationKind::InvalidGeo, msg));
            }
        }
        out
    }
}

/// Which invariants a check enforces. Model output is checked without the
/// grounding rule so that the validation layer can demote and flag it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rules {
    pub require_justification: bool,
    pub require_known_unit_locations: bool,
}

impl Rules {
    pub const STRICT: Rules = Rules {
        require_justification: true,
        require_known_unit_locations: true,
    };
    pub const MODEL_OUTPUT: Rules = Rules {
        require_justification: false,
        require_known_unit_locations: false,
    };
}

fn unit_violations(
    unit: &Unit,
    index: usize,
    locations: &HashSet<String>,
    names: &mut HashSet<String>,
    rules: Rules,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let base = format!("units[{index}]");
    let name = normalize_location(&unit.name);
    if name.is_empty() {
        out.push(Violation::new(format!("{base}.name"), ViolationKind::EmptyUnitName, "unit name is empty"));
    } else if !names.insert(name) {
        out.push(Violation::new(
            format!("{base}.name"),
            ViolationKind::DuplicateUnitName,
            format!("unit `{}` appears more than once", unit.name),
        ));
    }
    let loc = normalize_location(&unit.location);
    if rules.require_known_unit_locations && !loc.is_empty() && !locations.contains(&loc) {
        out.push(Violation::new(
            format!("{base}.location"),
            ViolationKind::DanglingUnitLocation,
            format!("unit location `{}` is not listed in locations", unit.location),
        ));
    }
    for (field, req) in unit.support_requests() {
        out.extend(support_violations(req, &format!("{base}.{field}"), rules));
    }
    if unit.times_intervened < 1 {
        out.push(Violation::new(
            format!("{base}.times_intervened"),
            ViolationKind::TimesIntervenedBelowOne,
            "a unit present in the report must have intervened at least once",
        ));
    }
    out
}

fn support_violations(req: &SupportRequest, path: &str, rules: Rules) -> Vec<Violation> {
    let mut out = Vec::new();
    if rules.require_justification && !req.is_grounded() {
        out.push(Violation::new(
            format!("{path}.issue"),
            ViolationKind::MissingJustification,
            "needed is true but issue is empty",
        ));
    }
    if let Some(r) = req.requirements {
        if !r.is_finite() {
            out.push(Violation::new(
                format!("{path}.requirements"),
                ViolationKind::InvalidRequirement,
                "requirement is not a finite number",
            ));
        } else if r < 0.0 {
            out.push(Violation::new(
                format!("{path}.requirements"),
                ViolationKind::NegativeRequirement,
                format!("requirement {r} Mbit/s is negative"),
            ));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Syntax,
    WrongType,
    MissingField,
    UnknownField,
    UnknownEmergencyLevel,
    UnknownPriority,
    InvalidRequirement,
    NegativeRequirement,
    TimesIntervenedBelowOne,
    MissingJustification,
    EmptyUnitName,
    DuplicateUnitName,
    EmptyLocation,
    DuplicateLocation,
    DanglingUnitLocation,
    InvalidFlag,
    InvalidGeo,
}

/// One schema or invariant finding, addressed by a dotted path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub kind: ViolationKind,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, kind: ViolationKind, message: impl Into<String>) -> Self {
        Violation {
            path: path.into(),
            kind,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// A rejected document together with every finding.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("report rejected with {} violation(s): {}", .0.len(), join_violations(.0))]
pub struct Rejection(pub Vec<Violation>);

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
