//! Reader and canonical writer for the catalog data file.
//!
//! Each non-blank, non-comment line is one record: `key = value` pairs joined
//! by `|`. The first pair names the record type.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{
    scripts, ActivityId, AssistanceKind, AssistanceNeed, Catalog, CatalogError, ExerciseSpec,
    Posture, RepTiming, Variant, INSTRUCTIONAL_POOL_SIZE,
};
use crate::time::Millis;

const HEADER: &str = "# rehabot activity catalog\n\
# Rep timings other than StaticQuads and HipAbductionLaying are tunable defaults.\n";

struct Record<'a> {
    line: usize,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Record<'a> {
    fn err(&self, message: impl Into<String>) -> CatalogError {
        CatalogError::Format {
            line: self.line,
            message: message.into(),
        }
    }

    fn get(&self, key: &str) -> Option<&'a str> {
        self.pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    fn all(&self, key: &str) -> impl Iterator<Item = &'a str> + '_ {
        let key = key.to_string();
        self.pairs.iter().filter(move |(k, _)| *k == key).map(|(_, v)| *v)
    }

    fn require(&self, key: &str) -> Result<&'a str, CatalogError> {
        self.get(key)
            .ok_or_else(|| self.err(format!("missing `{key}`")))
    }

    fn millis(&self, key: &str) -> Result<Option<Millis>, CatalogError> {
        self.get(key)
            .map(|v| {
                v.parse::<u64>()
                    .map(Millis)
                    .map_err(|_| self.err(format!("`{key}` must be an integer")))
            })
            .transpose()
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), CatalogError> {
        for (k, _) in &self.pairs {
            if !allowed.contains(k) {
                return Err(self.err(format!("unexpected field `{k}`")));
            }
        }
        Ok(())
    }
}

fn split_record(line: usize, text: &str) -> Result<Record<'_>, CatalogError> {
    let mut pairs = Vec::new();
    for segment in text.split('|') {
        let (k, v) = segment.split_once('=').ok_or_else(|| CatalogError::Format {
            line,
            message: format!("expected `key = value`, found `{}`", segment.trim()),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(CatalogError::Format {
                line,
                message: "empty key or value".into(),
            });
        }
        pairs.push((k, v));
    }
    Ok(Record { line, pairs })
}

struct ActivityDraft {
    line: usize,
    id: ActivityId,
    posture: Posture,
    timing: Option<RepTiming>,
    demo_duration: Millis,
    demo_script: String,
    aid: Option<String>,
    posture_change: Option<String>,
    instructional: Vec<String>,
}

pub fn parse_catalog(text: &str) -> Result<Catalog, CatalogError> {
    let mut version = None;
    let mut drafts: Vec<ActivityDraft> = Vec::new();
    let mut motivational = Vec::new();
    let mut scripts_map = BTreeMap::new();
    let mut intros = Vec::new();
    let mut dances = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let rec = split_record(line, trimmed)?;
        let (kind, head) = rec.pairs[0];
        match kind {
            "catalog_version" => {
                rec.check_keys(&["catalog_version"])?;
                version = Some(
                    head.parse::<u32>()
                        .map_err(|_| rec.err("catalog_version must be an integer"))?,
                );
            }
            "activity" => {
                rec.check_keys(&[
                    "activity",
                    "posture",
                    "fast_ms",
                    "slow_ms",
                    "demo_ms",
                    "aid",
                    "posture_change",
                    "demo",
                    "instr",
                ])?;
                let id: ActivityId = head.parse().map_err(|e: CatalogError| rec.err(e.to_string()))?;
                if drafts.iter().any(|d| d.id == id) {
                    return Err(rec.err(format!("duplicate activity {id}")));
                }
                let posture: Posture = rec.require("posture")?.parse().map_err(|e: String| rec.err(e))?;
                let timing = match (rec.millis("fast_ms")?, rec.millis("slow_ms")?) {
                    (Some(fast), Some(slow)) => {
                        if !(Millis::ZERO < fast && fast < slow) {
                            return Err(rec.err("need 0 < fast_ms < slow_ms"));
                        }
                        Some(RepTiming { fast, slow })
                    }
                    (None, None) => None,
                    _ => return Err(rec.err("fast_ms and slow_ms must appear together")),
                };
                if timing.is_some() != id.is_exercise() {
                    return Err(rec.err(if id.is_exercise() {
                        "exercise needs fast_ms/slow_ms"
                    } else {
                        "only exercises carry repetition timing"
                    }));
                }
                let instructional: Vec<String> = rec.all("instr").map(str::to_string).collect();
                if id.is_exercise() && instructional.len() != INSTRUCTIONAL_POOL_SIZE {
                    return Err(rec.err(format!(
                        "exercise needs exactly {INSTRUCTIONAL_POOL_SIZE} `instr` phrases"
                    )));
                }
                let posture_change = rec.get("posture_change").map(str::to_string);
                if posture_change.is_some() != (posture == Posture::LyingSide) {
                    return Err(rec.err("`posture_change` is required exactly for LyingSide activities"));
                }
                drafts.push(ActivityDraft {
                    line,
                    id,
                    posture,
                    timing,
                    demo_duration: rec.millis("demo_ms")?.unwrap_or(Millis::ZERO),
                    demo_script: rec.get("demo").unwrap_or("").to_string(),
                    aid: rec.get("aid").map(str::to_string),
                    posture_change,
                    instructional,
                });
            }
            "phrase" => {
                rec.check_keys(&["phrase", "text"])?;
                if head != "motivational" {
                    return Err(rec.err(format!("unknown phrase pool `{head}`")));
                }
                motivational.push(rec.require("text")?.to_string());
            }
            "script" => {
                rec.check_keys(&["script", "text"])?;
                if scripts_map
                    .insert(head.to_string(), rec.require("text")?.to_string())
                    .is_some()
                {
                    return Err(rec.err(format!("duplicate script `{head}`")));
                }
            }
            "intro" | "dance" => {
                rec.check_keys(&[kind, "duration_ms", "text"])?;
                let v = Variant {
                    id: head.to_string(),
                    duration: rec
                        .millis("duration_ms")?
                        .ok_or_else(|| rec.err("missing `duration_ms`"))?,
                    text: rec.require("text")?.to_string(),
                };
                let list = if kind == "intro" { &mut intros } else { &mut dances };
                if list.iter().any(|x: &Variant| x.id == v.id) {
                    return Err(rec.err(format!("duplicate {kind} `{}`", v.id)));
                }
                list.push(v);
            }
            other => return Err(rec.err(format!("unknown record type `{other}`"))),
        }
    }

    let version = version.ok_or_else(|| CatalogError::Missing("catalog_version".into()))?;
    let keep_pace = scripts_map
        .get(scripts::NEXT_SET)
        .cloned()
        .unwrap_or_default();
    let activities = drafts
        .into_iter()
        .map(|d| {
            let _ = d.line;
            let mut assistance = Vec::new();
            if let Some(script) = d.posture_change {
                assistance.push(AssistanceNeed {
                    kind: AssistanceKind::PostureChange,
                    request_script: script,
                });
            }
            if let Some(script) = d.aid {
                assistance.push(AssistanceNeed {
                    kind: AssistanceKind::AuxiliaryAid,
                    request_script: script,
                });
            }
            assistance.push(AssistanceNeed {
                kind: AssistanceKind::KeepingPace,
                request_script: keep_pace.clone(),
            });
            ExerciseSpec {
                id: d.id,
                posture: d.posture,
                assistance,
                timing: d.timing,
                demo_duration: d.demo_duration,
                demo_script: d.demo_script,
                instructional_phrases: d.instructional,
            }
        })
        .collect();
    Catalog::from_parts(version, activities, motivational, scripts_map, intros, dances)
}

/// Writes the catalog in canonical form. `parse_catalog(render_catalog(c)) == c`.
pub fn render_catalog(catalog: &Catalog) -> String {
    let mut out = String::from(HEADER);
    let _ = writeln!(out, "catalog_version = {}", catalog.version);
    out.push('\n');
    for spec in catalog.activities() {
        let _ = write!(out, "activity = {} | posture = {}", spec.id, spec.posture.name());
        if let Some(t) = spec.timing {
            let _ = write!(out, " | fast_ms = {} | slow_ms = {}", t.fast.0, t.slow.0);
        }
        if spec.demo_duration > Millis::ZERO {
            let _ = write!(out, " | demo_ms = {}", spec.demo_duration.0);
        }
        if let Some(n) = spec.needs(AssistanceKind::AuxiliaryAid) {
            let _ = write!(out, " | aid = {}", n.request_script);
        }
        if let Some(n) = spec.needs(AssistanceKind::PostureChange) {
            let _ = write!(out, " | posture_change = {}", n.request_script);
        }
        if !spec.demo_script.is_empty() {
            let _ = write!(out, " | demo = {}", spec.demo_script);
        }
        for p in &spec.instructional_phrases {
            let _ = write!(out, " | instr = {p}");
        }
        out.push('\n');
    }
    out.push('\n');
    for p in catalog.motivational() {
        let _ = writeln!(out, "phrase = motivational | text = {p}");
    }
    out.push('\n');
    for (k, v) in catalog.scripts() {
        let _ = writeln!(out, "script = {k} | text = {v}");
    }
    out.push('\n');
    for v in catalog.intros() {
        let _ = writeln!(out, "intro = {} | duration_ms = {} | text = {}", v.id, v.duration.0, v.text);
    }
    out.push('\n');
    for v in catalog.dances() {
        let _ = writeln!(out, "dance = {} | duration_ms = {} | text = {}", v.id, v.duration.0, v.text);
    }
    out
}
