//! Session configuration file.
//!
//! A line-oriented `key = value` format with `[section]` headers; `#` starts a
//! comment line. Top-level keys come first, followed by optional
//! `[interaction]` and `[faults]` sections and one `[activity]` section per
//! program entry, in execution order. The grammar is documented in
//! `docs/config-format.md`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{ActivityId, Catalog, Posture};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SpeedSetting {
    Slow,
    Medium,
    Fast,
}

impl SpeedSetting {
    /// One step along Slow < Medium < Fast, saturating at the ends.
    pub fn step(self, direction: SpeedDirection) -> SpeedSetting {
        use SpeedSetting::*;
        match (self, direction) {
            (Slow, SpeedDirection::Faster) => Medium,
            (Medium, SpeedDirection::Faster) | (Fast, SpeedDirection::Faster) => Fast,
            (Fast, SpeedDirection::Slower) => Medium,
            (Medium, SpeedDirection::Slower) | (Slow, SpeedDirection::Slower) => Slow,
        }
    }

    fn keyword(self) -> &'static str {
        match self {
            SpeedSetting::Slow => "slow",
            SpeedSetting::Medium => "medium",
            SpeedSetting::Fast => "fast",
        }
    }
}

impl fmt::Display for SpeedSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

impl FromStr for SpeedSetting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "slow" => Ok(SpeedSetting::Slow),
            "medium" => Ok(SpeedSetting::Medium),
            "fast" => Ok(SpeedSetting::Fast),
            _ => Err(format!("speed must be slow, medium or fast, found `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpeedDirection {
    Faster,
    Slower,
}

impl SpeedDirection {
    fn keyword(self) -> &'static str {
        match self {
            SpeedDirection::Faster => "faster",
            SpeedDirection::Slower => "slower",
        }
    }

    pub fn opposite(self) -> SpeedDirection {
        match self {
            SpeedDirection::Faster => SpeedDirection::Slower,
            SpeedDirection::Slower => SpeedDirection::Faster,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActivityPlan {
    Exercise { sets: u32, reps: u32, speed: SpeedSetting },
    ToyRelay { rounds: u32 },
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityConfig {
    pub activity: ActivityId,
    pub plan: ActivityPlan,
}

impl ActivityConfig {
    pub fn exercise(activity: ActivityId, sets: u32, reps: u32, speed: SpeedSetting) -> Self {
        Self {
            activity,
            plan: ActivityPlan::Exercise { sets, reps, speed },
        }
    }

    pub fn toy_relay(rounds: u32) -> Self {
        Self {
            activity: ActivityId::ToyRelay,
            plan: ActivityPlan::ToyRelay { rounds },
        }
    }

    pub fn scripted(activity: ActivityId) -> Self {
        Self {
            activity,
            plan: ActivityPlan::Scripted,
        }
    }

    pub fn sets(&self) -> u32 {
        match self.plan {
            ActivityPlan::Exercise { sets, .. } => sets,
            _ => 0,
        }
    }

    pub fn reps(&self) -> u32 {
        match self.plan {
            ActivityPlan::Exercise { reps, .. } => reps,
            _ => 0,
        }
    }

    pub fn speed(&self) -> SpeedSetting {
        match self.plan {
            ActivityPlan::Exercise { speed, .. } => speed,
            _ => SpeedSetting::Medium,
        }
    }
}

/// Tactile and speech interaction parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionSettings {
    /// One utterance every this many repetitions.
    pub utterance_cadence: u32,
    pub double_tap_window_ms: u64,
    pub long_press_ms: u64,
    pub chord_overlap_ms: u64,
    /// What a front-button double tap under a middle hold does; rear does the opposite.
    pub front_double_tap: SpeedDirection,
    pub speech_window_ms: u64,
    /// Probability that a matching utterance is not recognised.
    pub speech_false_negative: f64,
}

impl Default for InteractionSettings {
    fn default() -> Self {
        Self {
            utterance_cadence: 2,
            double_tap_window_ms: 400,
            long_press_ms: 800,
            chord_overlap_ms: 100,
            front_double_tap: SpeedDirection::Slower,
            speech_window_ms: 2000,
            speech_false_negative: 0.0,
        }
    }
}

/// Simulated robot fault parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSettings {
    pub fall_probability: f64,
    /// Continuous-motion time a full battery supports.
    pub battery_capacity_ms: u64,
    /// Battery drain while not moving, as a fraction of the motion drain rate.
    pub idle_drain: f64,
}

impl Default for FaultSettings {
    fn default() -> Self {
        Self {
            fall_probability: 0.0,
            battery_capacity_ms: 35 * 60 * 1000,
            idle_drain: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub patient_name: String,
    pub carer_name: String,
    pub intro_variant: String,
    pub entertainment: String,
    pub seed: u64,
    pub interaction: InteractionSettings,
    pub faults: FaultSettings,
    pub program: Vec<ActivityConfig>,
}

impl SessionConfig {
    /// A config with default settings and the given program. Not validated.
    pub fn new(patient: &str, carer: &str, program: Vec<ActivityConfig>) -> Self {
        Self {
            patient_name: patient.to_string(),
            carer_name: carer.to_string(),
            intro_variant: "1".into(),
            entertainment: "classic".into(),
            seed: 0,
            interaction: InteractionSettings::default(),
            faults: FaultSettings::default(),
            program,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown activity `{0}`")]
    UnknownActivity(String),
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("input is not valid UTF-8")]
    InvalidEncoding,
}

/// A diagnostic located at a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub kind: ConfigErrorKind,
}

impl ConfigError {
    fn new(line: usize, column: usize, kind: ConfigErrorKind) -> Self {
        Self { line, column, kind }
    }
}

/// Parses raw bytes, reporting invalid UTF-8 at its position.
pub fn parse_config_bytes(bytes: &[u8]) -> Result<SessionConfig, ConfigError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_config(text),
        Err(e) => {
            let valid = &bytes[..e.valid_up_to()];
            let line = valid.iter().filter(|&&b| b == b'\n').count() + 1;
            let line_start = valid.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
            let column = String::from_utf8_lossy(&valid[line_start..]).chars().count() + 1;
            Err(ConfigError::new(line, column, ConfigErrorKind::InvalidEncoding))
        }
    }
}

/// Parses and validates against the built-in catalog.
pub fn parse_config(source: &str) -> Result<SessionConfig, ConfigError> {
    parse_config_with(source, &Catalog::builtin())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Top,
    Interaction,
    Faults,
    Activity,
}

struct Entry<'a> {
    line: usize,
    key: &'a str,
    key_col: usize,
    value: &'a str,
    value_col: usize,
}

struct ActivityDraft<'a> {
    header_line: usize,
    entries: Vec<Entry<'a>>,
}

fn column_of(line: &str, sub: &str) -> usize {
    let offset = sub.as_ptr() as usize - line.as_ptr() as usize;
    line[..offset].chars().count() + 1
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError::new(line, col, ConfigErrorKind::Syntax(msg.into()))
}

fn constraint(line: usize, col: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError::new(line, col, ConfigErrorKind::ConstraintViolation(msg.into()))
}

fn parse_num<T: FromStr>(e: &Entry<'_>) -> Result<T, ConfigError> {
    e.value
        .parse::<T>()
        .map_err(|_| syntax(e.line, e.value_col, format!("`{}` expects a number, found `{}`", e.key, e.value)))
}

fn parse_probability(e: &Entry<'_>) -> Result<f64, ConfigError> {
    let p: f64 = parse_num(e)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(constraint(e.line, e.value_col, format!("`{}` must lie in [0, 1]", e.key)));
    }
    Ok(p)
}

fn positive<T: PartialOrd + Default>(e: &Entry<'_>, v: T) -> Result<T, ConfigError> {
    if v <= T::default() {
        return Err(constraint(e.line, e.value_col, format!("`{}` must be at least 1", e.key)));
    }
    Ok(v)
}

pub fn parse_config_with(source: &str, catalog: &Catalog) -> Result<SessionConfig, ConfigError> {
    let mut section = Section::Top;
    let mut seen_interaction = false;
    let mut seen_faults = false;
    let mut top: Vec<Entry<'_>> = Vec::new();
    let mut interaction: Vec<Entry<'_>> = Vec::new();
    let mut faults: Vec<Entry<'_>> = Vec::new();
    let mut activities: Vec<ActivityDraft<'_>> = Vec::new();
    let mut first_record = true;

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let col = column_of(raw, text);
        if let Some(rest) = text.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| syntax(line, col, "section header must end with `]`"))?
                .trim();
            if first_record {
                return Err(ConfigError::new(
                    line,
                    col,
                    ConfigErrorKind::MissingField("format_version".into()),
                ));
            }
            section = match name {
                "activity" => {
                    activities.push(ActivityDraft {
                        header_line: line,
                        entries: Vec::new(),
                    });
                    Section::Activity
                }
                "interaction" | "faults" if !activities.is_empty() => {
                    return Err(syntax(line, col, format!("[{name}] must come before the first [activity]")));
                }
                "interaction" => {
                    if std::mem::replace(&mut seen_interaction, true) {
                        return Err(syntax(line, col, "duplicate [interaction] section"));
                    }
                    Section::Interaction
                }
                "faults" => {
                    if std::mem::replace(&mut seen_faults, true) {
                        return Err(syntax(line, col, "duplicate [faults] section"));
                    }
                    Section::Faults
                }
                other => return Err(syntax(line, col, format!("unknown section `[{other}]`"))),
            };
            continue;
        }
        let (k, v) = text
            .split_once('=')
            .ok_or_else(|| syntax(line, col, "expected `key = value`"))?;
        let key = k.trim();
        let value = v.trim();
        if key.is_empty() {
            return Err(syntax(line, col, "missing key before `=`"));
        }
        let key_col = column_of(raw, key);
        let value_col = if value.is_empty() {
            column_of(raw, v) + v.chars().count()
        } else {
            column_of(raw, value)
        };
        if value.is_empty() {
            return Err(syntax(line, value_col, format!("`{key}` has no value")));
        }
        let entry = Entry {
            line,
            key,
            key_col,
            value,
            value_col,
        };
        if first_record {
            if key != "format_version" {
                return Err(ConfigError::new(
                    line,
                    key_col,
                    ConfigErrorKind::MissingField("format_version".into()),
                ));
            }
            let version: u32 = parse_num(&entry)?;
            if version != FORMAT_VERSION {
                return Err(constraint(
                    line,
                    value_col,
                    format!("unsupported format_version {version} (expected {FORMAT_VERSION})"),
                ));
            }
            first_record = false;
            continue;
        }
        let bucket = match section {
            Section::Top => &mut top,
            Section::Interaction => &mut interaction,
            Section::Faults => &mut faults,
            Section::Activity => &mut activities.last_mut().expect("activity section open").entries,
        };
        if let Some(prev) = bucket.iter().find(|e| e.key == key) {
            return Err(syntax(
                line,
                key_col,
                format!("duplicate key `{key}` (first set on line {})", prev.line),
            ));
        }
        bucket.push(entry);
    }

    if first_record {
        return Err(ConfigError::new(1, 1, ConfigErrorKind::MissingField("format_version".into())));
    }

    let mut config = SessionConfig::new("", "", Vec::new());
    let mut patient = None;
    let mut carer = None;
    for e in &top {
        match e.key {
            "patient" => patient = Some(e.value.to_string()),
            "carer" => carer = Some(e.value.to_string()),
            "intro" => {
                if catalog.intro(e.value).is_none() {
                    return Err(constraint(e.line, e.value_col, format!("no intro variant `{}`", e.value)));
                }
                config.intro_variant = e.value.to_string();
            }
            "entertainment" => {
                if catalog.dance(e.value).is_none() {
                    return Err(constraint(e.line, e.value_col, format!("no dance variant `{}`", e.value)));
                }
                config.entertainment = e.value.to_string();
            }
            "seed" => config.seed = parse_num(e)?,
            "format_version" => return Err(syntax(e.line, e.key_col, "duplicate key `format_version`")),
            other => return Err(syntax(e.line, e.key_col, format!("unknown key `{other}`"))),
        }
    }
    config.patient_name = patient.ok_or_else(|| ConfigError::new(1, 1, ConfigErrorKind::MissingField("patient".into())))?;
    config.carer_name = carer.ok_or_else(|| ConfigError::new(1, 1, ConfigErrorKind::MissingField("carer".into())))?;

    let mut settings_line = 1;
    for e in &interaction {
        settings_line = e.line;
        let s = &mut config.interaction;
        match e.key {
            "utterance_cadence" => s.utterance_cadence = positive(e, parse_num(e)?)?,
            "double_tap_window_ms" => s.double_tap_window_ms = positive(e, parse_num(e)?)?,
            "long_press_ms" => s.long_press_ms = positive(e, parse_num(e)?)?,
            "chord_overlap_ms" => s.chord_overlap_ms = positive(e, parse_num(e)?)?,
            "speech_window_ms" => s.speech_window_ms = positive(e, parse_num(e)?)?,
            "speech_false_negative" => s.speech_false_negative = parse_probability(e)?,
            "front_double_tap" => {
                s.front_double_tap = match e.value {
                    "slower" => SpeedDirection::Slower,
                    "faster" => SpeedDirection::Faster,
                    _ => return Err(syntax(e.line, e.value_col, "front_double_tap must be `slower` or `faster`")),
                }
            }
            other => return Err(syntax(e.line, e.key_col, format!("unknown key `{other}`"))),
        }
    }
    if config.interaction.chord_overlap_ms > config.interaction.long_press_ms {
        return Err(constraint(settings_line, 1, "chord_overlap_ms may not exceed long_press_ms"));
    }
    for e in &faults {
        let f = &mut config.faults;
        match e.key {
            "fall_probability" => f.fall_probability = parse_probability(e)?,
            "battery_capacity_ms" => f.battery_capacity_ms = positive(e, parse_num(e)?)?,
            "idle_drain" => f.idle_drain = parse_probability(e)?,
            other => return Err(syntax(e.line, e.key_col, format!("unknown key `{other}`"))),
        }
    }

    let last_line = source.lines().count().max(1);
    if activities.is_empty() {
        return Err(ConfigError::new(last_line, 1, ConfigErrorKind::MissingField("[activity]".into())));
    }
    for draft in &activities {
        config.program.push(parse_activity(draft, catalog)?);
    }
    validate_program(&config.program, |i| (activities[i].header_line, 1))?;
    Ok(config)
}

fn parse_activity(draft: &ActivityDraft<'_>, catalog: &Catalog) -> Result<ActivityConfig, ConfigError> {
    let mut id = None;
    let mut sets = None;
    let mut reps = None;
    let mut speed = None;
    let mut rounds = None;
    for e in &draft.entries {
        match e.key {
            "id" => {
                let spec = catalog.lookup_name(e.value).map_err(|_| {
                    ConfigError::new(e.line, e.value_col, ConfigErrorKind::UnknownActivity(e.value.to_string()))
                })?;
                id = Some(spec.id);
            }
            "sets" => sets = Some((e, positive(e, parse_num::<u32>(e)?)?)),
            "reps" => reps = Some((e, positive(e, parse_num::<u32>(e)?)?)),
            "rounds" => rounds = Some((e, positive(e, parse_num::<u32>(e)?)?)),
            "speed" => {
                speed = Some((
                    e,
                    e.value
                        .parse::<SpeedSetting>()
                        .map_err(|m| syntax(e.line, e.value_col, m))?,
                ))
            }
            other => return Err(syntax(e.line, e.key_col, format!("unknown key `{other}`"))),
        }
    }
    let header = draft.header_line;
    let id = id.ok_or_else(|| ConfigError::new(header, 1, ConfigErrorKind::MissingField("id".into())))?;
    let reject = |field: Option<&Entry<'_>>, what: &str| -> Result<(), ConfigError> {
        match field {
            Some(e) => Err(constraint(e.line, e.key_col, format!("`{}` is not allowed for {what}", e.key))),
            None => Ok(()),
        }
    };
    if id.is_exercise() {
        reject(rounds.map(|r| r.0), "exercises")?;
        let sets = sets.ok_or_else(|| ConfigError::new(header, 1, ConfigErrorKind::MissingField("sets".into())))?;
        let reps = reps.ok_or_else(|| ConfigError::new(header, 1, ConfigErrorKind::MissingField("reps".into())))?;
        Ok(ActivityConfig::exercise(
            id,
            sets.1,
            reps.1,
            speed.map_or(SpeedSetting::Medium, |s| s.1),
        ))
    } else {
        let what = id.name();
        reject(sets.map(|s| s.0), what)?;
        reject(reps.map(|r| r.0), what)?;
        reject(speed.map(|s| s.0), what)?;
        if id == ActivityId::ToyRelay {
            Ok(ActivityConfig::toy_relay(rounds.map_or(3, |r| r.1)))
        } else {
            reject(rounds.map(|r| r.0), what)?;
            Ok(ActivityConfig::scripted(id))
        }
    }
}

/// Program-level constraints. `locate` maps a program index to a position.
pub fn validate_program(
    program: &[ActivityConfig],
    locate: impl Fn(usize) -> (usize, usize),
) -> Result<(), ConfigError> {
    let at = |i: usize, msg: String| {
        let (line, column) = locate(i);
        ConfigError::new(line, column, ConfigErrorKind::ConstraintViolation(msg))
    };
    if program.is_empty() {
        let (line, column) = locate(0);
        return Err(ConfigError::new(line, column, ConfigErrorKind::MissingField("[activity]".into())));
    }
    let catalog = Catalog::builtin();
    let mut seen_postures: Vec<Posture> = Vec::new();
    let mut prev_posture: Option<Posture> = None;
    let mut relay = 0;
    for (i, entry) in program.iter().enumerate() {
        match entry.activity {
            ActivityId::IntroSpeech if i != 0 => {
                return Err(at(i, "IntroSpeech may only open the program".into()));
            }
            ActivityId::ToyRelay => {
                relay += 1;
                if relay > 1 {
                    return Err(at(i, "at most one ToyRelay per session".into()));
                }
            }
            ActivityId::FarewellDance if i + 1 != program.len() => {
                return Err(at(i, "FarewellDance must be the last activity".into()));
            }
            _ => {}
        }
        match entry.plan {
            ActivityPlan::Exercise { sets, reps, .. } if sets == 0 || reps == 0 => {
                return Err(at(i, "sets and reps must be at least 1".into()));
            }
            ActivityPlan::ToyRelay { rounds: 0 } => {
                return Err(at(i, "rounds must be at least 1".into()));
            }
            _ => {}
        }
        if entry.activity.is_exercise() {
            let posture = catalog.lookup(entry.activity).posture;
            if prev_posture != Some(posture) {
                if seen_postures.contains(&posture) {
                    return Err(at(
                        i,
                        format!(
                            "{} breaks posture grouping: {} exercises must be contiguous",
                            entry.activity,
                            posture.name()
                        ),
                    ));
                }
                seen_postures.push(posture);
                prev_posture = Some(posture);
            }
        }
    }
    Ok(())
}

/// Canonical text form. `parse_config(&render_config(c)) == Ok(c)` for valid `c`.
pub fn render_config(config: &SessionConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "format_version = {FORMAT_VERSION}");
    let _ = writeln!(out, "patient = {}", config.patient_name);
    let _ = writeln!(out, "carer = {}", config.carer_name);
    let _ = writeln!(out, "intro = {}", config.intro_variant);
    let _ = writeln!(out, "entertainment = {}", config.entertainment);
    let _ = writeln!(out, "seed = {}", config.seed);
    let i = &config.interaction;
    let _ = write!(
        out,
        "\n[interaction]\nutterance_cadence = {}\ndouble_tap_window_ms = {}\nlong_press_ms = {}\n\
         chord_overlap_ms = {}\nfront_double_tap = {}\nspeech_window_ms = {}\nspeech_false_negative = {}\n",
        i.utterance_cadence,
        i.double_tap_window_ms,
        i.long_press_ms,
        i.chord_overlap_ms,
        i.front_double_tap.keyword(),
        i.speech_window_ms,
        i.speech_false_negative
    );
    let f = &config.faults;
    let _ = write!(
        out,
        "\n[faults]\nfall_probability = {}\nbattery_capacity_ms = {}\nidle_drain = {}\n",
        f.fall_probability, f.battery_capacity_ms, f.idle_drain
    );
    for a in &config.program {
        let _ = write!(out, "\n[activity]\nid = {}\n", a.activity);
        match a.plan {
            ActivityPlan::Exercise { sets, reps, speed } => {
                let _ = write!(out, "sets = {sets}\nreps = {reps}\nspeed = {speed}\n");
            }
            ActivityPlan::ToyRelay { rounds } => {
                let _ = writeln!(out, "rounds = {rounds}");
            }
            ActivityPlan::Scripted => {}
        }
    }
    out
}
