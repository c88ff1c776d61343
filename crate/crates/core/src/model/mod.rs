//! Types shared across the pipeline stages.

mod flag;
mod geo;
mod level;
mod manifest;
mod metrics;
mod normalize;
mod report;
mod transcript;

pub use flag::{FlagKind, ValidationFlag};
pub use geo::{choose_candidate, ChooseError, GeoCandidate, GeoResolution, GeoStatus};
pub use level::{EmergencyLevel, UnknownLevel};
pub use manifest::ScenarioManifest;
pub use metrics::WerBreakdown;
pub use normalize::{find_normalized, normalize_location};
pub use report::{Priority, Rejection, Rules, SemanticReport, SupportRequest, Unit, Violation, ViolationKind};
pub use transcript::{SegmentError, TranscriptBundle, TranscriptSegment};
