//! Registry of activity scenarios and the content the orchestrator speaks.
//!
//! The catalog is loaded once from a line-oriented data file (see
//! `docs/catalog-format.md`) and is immutable afterwards. A default catalog is
//! compiled into the crate from `data/catalog.txt`.

mod format;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SpeedSetting;
use crate::time::Millis;

pub use format::{parse_catalog, render_catalog};

/// Text of the compiled-in catalog.
pub const DEFAULT_CATALOG: &str = include_str!("../../data/catalog.txt");

/// Required size of the motivational phrase pool.
pub const MOTIVATIONAL_POOL_SIZE: usize = 20;
/// Required number of instructional phrases per exercise.
pub const INSTRUCTIONAL_POOL_SIZE: usize = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CatalogError {
    #[error("unknown activity `{0}`")]
    UnknownActivity(String),
    #[error("{0} is not an exercise and has no repetition timing")]
    NotAnExercise(ActivityId),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("catalog is missing {0}")]
    Missing(String),
}

/// The sixteen activity scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActivityId {
    IntroSpeech,
    Bridge,
    SingleBridge,
    HipAbductionLaying,
    HipAbductionOnSide,
    HipExtensionEasy,
    HipExtensionHard,
    HipKneeFlexionSliding,
    HipKneeFlexionLifting,
    KneeExtensionOnSide,
    LegRaises,
    QuadsOverRoll,
    StaticQuads,
    SitToStand,
    ToyRelay,
    FarewellDance,
}

impl ActivityId {
    pub const ALL: [ActivityId; 16] = [
        ActivityId::IntroSpeech,
        ActivityId::Bridge,
        ActivityId::SingleBridge,
        ActivityId::HipAbductionLaying,
        ActivityId::HipAbductionOnSide,
        ActivityId::HipExtensionEasy,
        ActivityId::HipExtensionHard,
        ActivityId::HipKneeFlexionSliding,
        ActivityId::HipKneeFlexionLifting,
        ActivityId::KneeExtensionOnSide,
        ActivityId::LegRaises,
        ActivityId::QuadsOverRoll,
        ActivityId::StaticQuads,
        ActivityId::SitToStand,
        ActivityId::ToyRelay,
        ActivityId::FarewellDance,
    ];

    pub fn is_exercise(self) -> bool {
        !matches!(
            self,
            ActivityId::IntroSpeech | ActivityId::ToyRelay | ActivityId::FarewellDance
        )
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivityId::IntroSpeech => "IntroSpeech",
            ActivityId::Bridge => "Bridge",
            ActivityId::SingleBridge => "SingleBridge",
            ActivityId::HipAbductionLaying => "HipAbductionLaying",
            ActivityId::HipAbductionOnSide => "HipAbductionOnSide",
            ActivityId::HipExtensionEasy => "HipExtensionEasy",
            ActivityId::HipExtensionHard => "HipExtensionHard",
            ActivityId::HipKneeFlexionSliding => "HipKneeFlexionSliding",
            ActivityId::HipKneeFlexionLifting => "HipKneeFlexionLifting",
            ActivityId::KneeExtensionOnSide => "KneeExtensionOnSide",
            ActivityId::LegRaises => "LegRaises",
            ActivityId::QuadsOverRoll => "QuadsOverRoll",
            ActivityId::StaticQuads => "StaticQuads",
            ActivityId::SitToStand => "SitToStand",
            ActivityId::ToyRelay => "ToyRelay",
            ActivityId::FarewellDance => "FarewellDance",
        }
    }

    /// Human-readable label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            ActivityId::IntroSpeech => "Introductory Speech",
            ActivityId::Bridge => "Bridge",
            ActivityId::SingleBridge => "Single Bridge",
            ActivityId::HipAbductionLaying => "Hip Abduction Laying",
            ActivityId::HipAbductionOnSide => "Hip Abduction on Side",
            ActivityId::HipExtensionEasy => "Hip Extension Easy",
            ActivityId::HipExtensionHard => "Hip Extension Hard",
            ActivityId::HipKneeFlexionSliding => "Hip Knee Flexion Sliding",
            ActivityId::HipKneeFlexionLifting => "Hip Knee Flexion Lifting",
            ActivityId::KneeExtensionOnSide => "Knee Extension on Side",
            ActivityId::LegRaises => "Leg Raises",
            ActivityId::QuadsOverRoll => "Quads over Roll",
            ActivityId::StaticQuads => "Static Quads",
            ActivityId::SitToStand => "Sit-to-Stand",
            ActivityId::ToyRelay => "Toy Relay",
            ActivityId::FarewellDance => "Farewell Dance",
        }
    }
}

impl fmt::Display for ActivityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivityId {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActivityId::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| CatalogError::UnknownActivity(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Posture {
    Crouched,
    LyingBack,
    LyingSide,
    Standing,
}

impl Posture {
    pub fn name(self) -> &'static str {
        match self {
            Posture::Crouched => "Crouched",
            Posture::LyingBack => "LyingBack",
            Posture::LyingSide => "LyingSide",
            Posture::Standing => "Standing",
        }
    }
}

impl FromStr for Posture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Crouched" => Ok(Posture::Crouched),
            "LyingBack" => Ok(Posture::LyingBack),
            "LyingSide" => Ok(Posture::LyingSide),
            "Standing" => Ok(Posture::Standing),
            other => Err(format!("unknown posture `{other}`")),
        }
    }
}

/// Kinds of human assistance the robot asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AssistanceKind {
    Positioning,
    AuxiliaryAid,
    PostureChange,
    KeepingPace,
}

impl AssistanceKind {
    pub const ALL: [AssistanceKind; 4] = [
        AssistanceKind::Positioning,
        AssistanceKind::AuxiliaryAid,
        AssistanceKind::PostureChange,
        AssistanceKind::KeepingPace,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AssistanceKind::Positioning => "Positioning",
            AssistanceKind::AuxiliaryAid => "Auxiliary aid",
            AssistanceKind::PostureChange => "Posture change",
            AssistanceKind::KeepingPace => "Keeping pace",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssistanceNeed {
    pub kind: AssistanceKind,
    pub request_script: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepTiming {
    pub fast: Millis,
    pub slow: Millis,
}

impl RepTiming {
    /// Medium is the arithmetic mean of the two endpoints, truncated to whole ms.
    pub fn medium(&self) -> Millis {
        Millis((self.fast.0 + self.slow.0) / 2)
    }

    pub fn at(&self, speed: SpeedSetting) -> Millis {
        match speed {
            SpeedSetting::Fast => self.fast,
            SpeedSetting::Medium => self.medium(),
            SpeedSetting::Slow => self.slow,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExerciseSpec {
    pub id: ActivityId,
    pub posture: Posture,
    pub assistance: Vec<AssistanceNeed>,
    /// `None` for the non-exercise scenarios.
    pub timing: Option<RepTiming>,
    pub demo_duration: Millis,
    pub demo_script: String,
    pub instructional_phrases: Vec<String>,
}

impl ExerciseSpec {
    pub fn needs(&self, kind: AssistanceKind) -> Option<&AssistanceNeed> {
        self.assistance.iter().find(|n| n.kind == kind)
    }
}

/// A selectable spoken/danced variant (introductory speech or farewell dance).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub id: String,
    pub duration: Millis,
    pub text: String,
}

/// Script keys the orchestrator requires.
pub mod scripts {
    pub const POSITIONING_CROUCHED: &str = "positioning.Crouched";
    pub const POSITIONING_LYING_BACK: &str = "positioning.LyingBack";
    pub const POSITIONING_STANDING: &str = "positioning.Standing";
    pub const START_SESSION: &str = "keep_pace.start_session";
    pub const START_SET: &str = "keep_pace.start_set";
    pub const NEXT_SET: &str = "keep_pace.next_set";
    pub const NEXT_ACTIVITY: &str = "keep_pace.next_activity";
    pub const RELAY_ROUND: &str = "keep_pace.relay_round";
    pub const SPEECH_FALLBACK: &str = "speech.fallback";
    pub const FALL_RECOVERY: &str = "fault.fall_recovery";
    pub const ENGINEER_RESUMED: &str = "fault.resumed";
    pub const FAREWELL_QUESTION: &str = "farewell.question";
    pub const FAREWELL_GENERIC: &str = "farewell.generic";
    pub const GOODBYE: &str = "session.goodbye";
    pub const SET_START: &str = "set.start";

    pub const REQUIRED: [&str; 15] = [
        POSITIONING_CROUCHED,
        POSITIONING_LYING_BACK,
        POSITIONING_STANDING,
        START_SESSION,
        START_SET,
        NEXT_SET,
        NEXT_ACTIVITY,
        RELAY_ROUND,
        SPEECH_FALLBACK,
        FALL_RECOVERY,
        ENGINEER_RESUMED,
        FAREWELL_QUESTION,
        FAREWELL_GENERIC,
        GOODBYE,
        SET_START,
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub version: u32,
    activities: Vec<ExerciseSpec>,
    motivational: Vec<String>,
    scripts: BTreeMap<String, String>,
    intros: Vec<Variant>,
    dances: Vec<Variant>,
}

impl Catalog {
    pub(crate) fn from_parts(
        version: u32,
        mut activities: Vec<ExerciseSpec>,
        motivational: Vec<String>,
        scripts: BTreeMap<String, String>,
        intros: Vec<Variant>,
        dances: Vec<Variant>,
    ) -> Result<Self, CatalogError> {
        activities.sort_by_key(|s| s.id);
        for id in ActivityId::ALL {
            if activities.get(id.index()).map(|s| s.id) != Some(id) {
                return Err(CatalogError::Missing(format!("activity {id}")));
            }
        }
        if activities.len() != ActivityId::ALL.len() {
            return Err(CatalogError::Missing("exactly one record per activity".into()));
        }
        if motivational.len() != MOTIVATIONAL_POOL_SIZE {
            return Err(CatalogError::Missing(format!(
                "{MOTIVATIONAL_POOL_SIZE} motivational phrases (found {})",
                motivational.len()
            )));
        }
        for key in scripts::REQUIRED {
            if !scripts.contains_key(key) {
                return Err(CatalogError::Missing(format!("script {key}")));
            }
        }
        if intros.is_empty() {
            return Err(CatalogError::Missing("an intro variant".into()));
        }
        if dances.is_empty() {
            return Err(CatalogError::Missing("a dance variant".into()));
        }
        Ok(Self {
            version,
            activities,
            motivational,
            scripts,
            intros,
            dances,
        })
    }

    /// The compiled-in catalog, parsed once per process.
    pub fn builtin() -> Arc<Catalog> {
        static BUILTIN: OnceLock<Arc<Catalog>> = OnceLock::new();
        BUILTIN
            .get_or_init(|| {
                Arc::new(parse_catalog(DEFAULT_CATALOG).expect("built-in catalog is valid"))
            })
            .clone()
    }

    pub fn lookup(&self, id: ActivityId) -> &ExerciseSpec {
        &self.activities[id.index()]
    }

    /// Looks up an activity by its symbolic name, as found in untrusted input.
    pub fn lookup_name(&self, name: &str) -> Result<&ExerciseSpec, CatalogError> {
        let id: ActivityId = name.parse()?;
        Ok(self.lookup(id))
    }

    pub fn activities(&self) -> &[ExerciseSpec] {
        &self.activities
    }

    pub fn motivational(&self) -> &[String] {
        &self.motivational
    }

    pub fn script(&self, key: &str) -> &str {
        self.scripts.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn scripts(&self) -> &BTreeMap<String, String> {
        &self.scripts
    }

    pub fn intro(&self, id: &str) -> Option<&Variant> {
        self.intros.iter().find(|v| v.id == id)
    }

    pub fn intros(&self) -> &[Variant] {
        &self.intros
    }

    pub fn dance(&self, id: &str) -> Option<&Variant> {
        self.dances.iter().find(|v| v.id == id)
    }

    pub fn dances(&self) -> &[Variant] {
        &self.dances
    }
}

/// Per-repetition duration of an exercise at a speed setting.
pub fn rep_duration(spec: &ExerciseSpec, speed: SpeedSetting) -> Result<Millis, CatalogError> {
    spec.timing
        .map(|t| t.at(speed))
        .ok_or(CatalogError::NotAnExercise(spec.id))
}

/// Substitutes `{patient}` and `{carer}` placeholders.
pub fn personalize(text: &str, patient: &str, carer: &str) -> String {
    text.replace("{patient}", patient).replace("{carer}", carer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_activities_thirteen_exercises() {
        assert_eq!(ActivityId::ALL.len(), 16);
        assert_eq!(ActivityId::ALL.iter().filter(|a| a.is_exercise()).count(), 13);
    }

    #[test]
    fn names_round_trip() {
        for id in ActivityId::ALL {
            assert_eq!(id.name().parse::<ActivityId>().unwrap(), id);
        }
        assert_eq!(
            "Walking".parse::<ActivityId>(),
            Err(CatalogError::UnknownActivity("Walking".into()))
        );
    }

    #[test]
    fn anchored_rep_durations() {
        let cat = Catalog::builtin();
        let sq = cat.lookup(ActivityId::StaticQuads);
        assert_eq!(rep_duration(sq, SpeedSetting::Fast), Ok(Millis(2000)));
        assert_eq!(rep_duration(sq, SpeedSetting::Slow), Ok(Millis(5000)));
        let ha = cat.lookup(ActivityId::HipAbductionLaying);
        assert_eq!(rep_duration(ha, SpeedSetting::Fast), Ok(Millis(7000)));
        assert_eq!(rep_duration(ha, SpeedSetting::Slow), Ok(Millis(15000)));
    }

    #[test]
    fn medium_is_independently_recomputed_mean() {
        let cat = Catalog::builtin();
        let sq = cat.lookup(ActivityId::StaticQuads);
        // 2 s and 5 s endpoints; (2 + 5) / 2 = 3.5 s
        let expected = Millis(3500);
        assert_eq!(rep_duration(sq, SpeedSetting::Medium), Ok(expected));
    }

    #[test]
    fn non_exercises_have_no_rep_model() {
        let cat = Catalog::builtin();
        let intro = cat.lookup(ActivityId::IntroSpeech);
        assert_eq!(intro.posture, Posture::Crouched);
        assert!(intro.timing.is_none());
        for id in [ActivityId::IntroSpeech, ActivityId::ToyRelay, ActivityId::FarewellDance] {
            assert_eq!(
                rep_duration(cat.lookup(id), SpeedSetting::Fast),
                Err(CatalogError::NotAnExercise(id))
            );
        }
    }

    #[test]
    fn speed_ordering_and_envelopes() {
        let cat = Catalog::builtin();
        for spec in cat.activities().iter().filter(|s| s.id.is_exercise()) {
            let f = rep_duration(spec, SpeedSetting::Fast).unwrap();
            let m = rep_duration(spec, SpeedSetting::Medium).unwrap();
            let s = rep_duration(spec, SpeedSetting::Slow).unwrap();
            assert!(Millis::ZERO < f && f < s, "{}", spec.id);
            assert!(f <= m && m <= s, "{}", spec.id);
            assert!((2000..=7000).contains(&f.0), "{} fast {}", spec.id, f);
            assert!((5000..=15000).contains(&s.0), "{} slow {}", spec.id, s);
            assert_eq!(spec.instructional_phrases.len(), INSTRUCTIONAL_POOL_SIZE);
        }
    }

    #[test]
    fn assistance_needs_match_exercise_set() {
        let cat = Catalog::builtin();
        let side = [
            ActivityId::HipAbductionOnSide,
            ActivityId::HipExtensionEasy,
            ActivityId::HipExtensionHard,
            ActivityId::KneeExtensionOnSide,
        ];
        for spec in cat.activities() {
            assert!(spec.needs(AssistanceKind::KeepingPace).is_some(), "{}", spec.id);
            assert!(spec.needs(AssistanceKind::Positioning).is_none());
            let aid = matches!(spec.id, ActivityId::QuadsOverRoll | ActivityId::StaticQuads);
            assert_eq!(spec.needs(AssistanceKind::AuxiliaryAid).is_some(), aid, "{}", spec.id);
            let on_side = side.contains(&spec.id);
            assert_eq!(spec.posture == Posture::LyingSide, on_side, "{}", spec.id);
            assert_eq!(spec.needs(AssistanceKind::PostureChange).is_some(), on_side);
        }
        assert!(cat
            .lookup(ActivityId::QuadsOverRoll)
            .needs(AssistanceKind::AuxiliaryAid)
            .unwrap()
            .request_script
            .contains("put the towel under our left knee"));
        assert!(cat
            .lookup(ActivityId::HipAbductionOnSide)
            .needs(AssistanceKind::PostureChange)
            .unwrap()
            .request_script
            .contains("roll me onto my right side"));
    }

    #[test]
    fn lookup_is_stable() {
        let a = Catalog::builtin();
        let b = Catalog::builtin();
        for id in ActivityId::ALL {
            assert_eq!(a.lookup(id), b.lookup(id));
        }
        assert!(matches!(
            a.lookup_name("Jumping"),
            Err(CatalogError::UnknownActivity(_))
        ));
    }
}
