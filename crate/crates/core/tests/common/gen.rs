//! Random model outputs paired with transcripts, for property tests.

use proptest::prelude::*;
use proptest::sample::subsequence;

use fieldvoice_core::extraction::RawSemanticReport;
use fieldvoice_core::model::{
    EmergencyLevel, GeoCandidate, GeoResolution, Priority, SemanticReport, SupportRequest, TranscriptBundle,
    TranscriptSegment, Unit,
};
use fieldvoice_core::validation::{GazetteerNer, NerEntity, NerProvider};

pub const PLACES: [&str; 8] = [
    "Stow Lake",
    "Dock Street",
    "Ocean Beach",
    "Gold Star Mother's Rock",
    "Crissy Field",
    "Dock 9",
    "Polo Field",
    "Praça da Ribeira",
];

const UNITS: [&str; 6] = ["Unit Alpha", "Unit Bravo", "Engine Three", "Medic Four", "Ladder Five", "Rescue One"];
const ISSUES: [&str; 3] = ["", "Poor signal; need uplink.", "smoke hides the ridge"];

#[derive(Debug, Clone)]
pub struct Case {
    pub raw: RawSemanticReport,
    pub transcript: TranscriptBundle,
    pub ner: Vec<NerEntity>,
}

fn support() -> impl Strategy<Value = SupportRequest> {
    (any::<bool>(), 0..ISSUES.len(), 0..3u8, proptest::option::of(0..2000u32)).prop_map(|(needed, issue, p, req)| {
        SupportRequest {
            needed,
            issue: ISSUES[issue].to_string(),
            priority: [Priority::Low, Priority::Medium, Priority::High][p as usize],
            requirements: req.map(|r| f64::from(r) / 10.0),
        }
    })
}

fn level() -> impl Strategy<Value = EmergencyLevel> {
    (0..4u8).prop_map(|o| EmergencyLevel::from_ordinal(o).unwrap())
}

/// Reports as a model might return them: locations may be unspoken, units
/// may disagree with the speaker count, support may lack a justification.
pub fn case() -> impl Strategy<Value = Case> {
    let places = subsequence(PLACES.to_vec(), 0..=PLACES.len()).prop_shuffle();
    let units = subsequence(UNITS.to_vec(), 0..=UNITS.len());
    (
        places,
        units,
        level(),
        proptest::collection::vec(any::<bool>(), PLACES.len()),
        proptest::collection::vec(any::<bool>(), PLACES.len()),
        0..6usize,
        proptest::option::of(proptest::collection::vec(-100..=100i32, 8)),
    )
        .prop_flat_map(|(locations, names, level, spoken, known, speakers, sentiment)| {
            let n = names.len();
            let loc_count = locations.len();
            (
                Just((locations, names, level, spoken, known, speakers, sentiment)),
                proptest::collection::vec((0..=loc_count, support(), support(), 1..5u32), n),
            )
        })
        .prop_map(|((locations, names, level, spoken, known, speakers, sentiment), unit_parts)| {
            let units = names
                .iter()
                .zip(unit_parts)
                .map(|(name, (loc, video, image, times))| Unit {
                    name: name.to_string(),
                    location: locations.get(loc).map(|l| l.to_string()).unwrap_or_default(),
                    video_support: video,
                    image_support: image,
                    times_intervened: times,
                })
                .collect();
            let mut report = SemanticReport::empty(level);
            report.locations = locations.iter().map(|l| l.to_string()).collect();
            report.units = units;

            let mut lines: Vec<String> = PLACES
                .iter()
                .zip(&spoken)
                .filter(|(_, s)| **s)
                .map(|(p, _)| format!("Command, we are at {p}."))
                .collect();
            while lines.len() < speakers.max(1) {
                lines.push("Copy that.".into());
            }
            let segments = lines
                .into_iter()
                .enumerate()
                .map(|(i, text)| TranscriptSegment {
                    speaker: (speakers > 0).then(|| format!("SPK{}", i % speakers)),
                    text,
                    start_ms: i as u64 * 1000,
                    end_ms: i as u64 * 1000 + 800,
                    sentiment: sentiment.as_ref().map(|s| f64::from(s[i % s.len()]) / 100.0),
                })
                .collect();
            let transcript = TranscriptBundle::new(segments).unwrap();
            let names: Vec<&str> = PLACES.iter().zip(&known).filter(|(_, k)| **k).map(|(p, _)| *p).collect();
            let ner = GazetteerNer::new(names)
                .without_heuristic()
                .recognize(transcript.full_text())
                .unwrap();
            Case {
                raw: RawSemanticReport::from_report(report),
                transcript,
                ner,
            }
        })
}

/// Geocoding results for each location, with up to three candidates.
pub fn geo_for(locations: &[String]) -> impl Strategy<Value = Vec<GeoResolution>> {
    let locations = locations.to_vec();
    proptest::collection::vec(
        proptest::collection::vec((-90_000..=90_000i32, -180_000..=180_000i32), 0..=3),
        locations.len(),
    )
    .prop_map(move |per_location| {
        locations
            .iter()
            .zip(per_location)
            .map(|(q, coords)| {
                let candidates = coords
                    .into_iter()
                    .enumerate()
                    .map(|(i, (lat, lon))| GeoCandidate {
                        lat: f64::from(lat) / 1000.0,
                        lon: f64::from(lon) / 1000.0,
                        display_name: format!("{q} #{i}"),
                        source: "gazetteer".into(),
                    })
                    .collect();
                GeoResolution::from_candidates(q.clone(), candidates)
            })
            .collect()
    })
}
