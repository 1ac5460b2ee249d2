//! Benchmark manifest: `{"full_set": bool, "entries": [...]}`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EvalError, Result};

pub const FULL_SET_TOTAL: usize = 948;
pub const FULL_SET_2D: usize = 857;
pub const FULL_SET_3D: usize = 91;
/// Clips per action label expected in the full set.
pub const LABEL_BAND: std::ops::RangeInclusive<usize> = 10..=30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Style {
    #[serde(rename = "2D")]
    TwoD,
    #[serde(rename = "3D")]
    ThreeD,
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Style::TwoD => "2D",
            Style::ThreeD => "3D",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuideFrame {
    /// Frame index in the generated clip the guide is placed at.
    pub position: usize,
    /// Path to a binary PPM image, relative to the manifest.
    pub image: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacterRef {
    pub character_id: String,
    pub images: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkEntry {
    pub id: String,
    pub action_label: String,
    pub style: Style,
    pub prompt: String,
    pub guide_frames: Vec<GuideFrame>,
    #[serde(default)]
    pub character_refs: Vec<CharacterRef>,
    pub gt_clip: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    #[serde(default)]
    full_set: bool,
    entries: Vec<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Benchmark {
    pub full_set: bool,
    pub entries: Vec<BenchmarkEntry>,
    pub label_counts: BTreeMap<String, usize>,
    pub style_counts: BTreeMap<Style, usize>,
    pub warnings: Vec<String>,
    /// Directory relative entry paths are resolved against.
    pub base_dir: PathBuf,
}

impl Benchmark {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}

fn invalid(msg: String) -> EvalError {
    EvalError::Benchmark(msg)
}

fn validate_entry(index: usize, value: serde_json::Value) -> Result<BenchmarkEntry> {
    let id_hint = value
        .get("id")
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .unwrap_or_else(|| format!("#{index}"));
    let entry: BenchmarkEntry =
        serde_json::from_value(value).map_err(|e| invalid(format!("entry {id_hint}: {e}")))?;
    if entry.id.trim().is_empty() {
        return Err(invalid(format!("entry #{index}: empty id")));
    }
    if entry.prompt.trim().is_empty() {
        return Err(invalid(format!("entry {}: empty prompt", entry.id)));
    }
    if entry.action_label.trim().is_empty() {
        return Err(invalid(format!("entry {}: empty action_label", entry.id)));
    }
    if entry.guide_frames.is_empty() {
        return Err(invalid(format!("entry {}: needs at least one guide frame", entry.id)));
    }
    if let Some(r) = entry.character_refs.iter().find(|r| r.character_id.trim().is_empty() || r.images.is_empty()) {
        return Err(invalid(format!(
            "entry {}: character reference `{}` needs an id and at least one image",
            entry.id, r.character_id
        )));
    }
    Ok(entry)
}

/// Parse and validate a manifest. `base_dir` anchors relative paths.
pub fn parse_benchmark(text: &str, base_dir: &Path) -> Result<Benchmark> {
    let raw: RawManifest = serde_json::from_str(text).map_err(|e| invalid(format!("manifest: {e}")))?;
    let entries = raw
        .entries
        .into_iter()
        .enumerate()
        .map(|(i, v)| validate_entry(i, v))
        .collect::<Result<Vec<_>>>()?;
    if entries.is_empty() {
        return Err(invalid("manifest has no entries".into()));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = entries.iter().find(|e| !seen.insert(e.id.as_str())) {
        return Err(invalid(format!("duplicate entry id `{}`", dup.id)));
    }
    let mut label_counts = BTreeMap::new();
    let mut style_counts = BTreeMap::new();
    for e in &entries {
        *label_counts.entry(e.action_label.clone()).or_insert(0) += 1;
        *style_counts.entry(e.style).or_insert(0) += 1;
    }
    let mut warnings = Vec::new();
    if raw.full_set {
        let n2 = style_counts.get(&Style::TwoD).copied().unwrap_or(0);
        let n3 = style_counts.get(&Style::ThreeD).copied().unwrap_or(0);
        if entries.len() != FULL_SET_TOTAL || n2 != FULL_SET_2D || n3 != FULL_SET_3D {
            return Err(invalid(format!(
                "full set must have {FULL_SET_TOTAL} entries ({FULL_SET_2D} 2D, {FULL_SET_3D} 3D), found {} ({n2} 2D, {n3} 3D)",
                entries.len()
            )));
        }
        for (label, &count) in &label_counts {
            if !LABEL_BAND.contains(&count) {
                let w = format!(
                    "label `{label}` has {count} clips, outside the {}-{} band of the full set",
                    LABEL_BAND.start(),
                    LABEL_BAND.end()
                );
                log::warn!("{w}");
                warnings.push(w);
            }
        }
    }
    Ok(Benchmark {
        full_set: raw.full_set,
        entries,
        label_counts,
        style_counts,
        warnings,
        base_dir: base_dir.to_path_buf(),
    })
}

pub fn load_benchmark(path: &Path) -> Result<Benchmark> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_benchmark(&text, path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn entry(id: &str, label: &str, style: &str) -> serde_json::Value {
        json!({
            "id": id,
            "action_label": label,
            "style": style,
            "prompt": "a character waves",
            "guide_frames": [{"position": 0, "image": "g.ppm"}],
            "gt_clip": "gt.y4m"
        })
    }

    /// 948 entries over labels of `sizes` clips each; the first 857 are 2D.
    fn full_set(sizes: &[usize]) -> String {
        assert_eq!(sizes.iter().sum::<usize>(), FULL_SET_TOTAL);
        let mut entries = Vec::new();
        for (l, &n) in sizes.iter().enumerate() {
            for _ in 0..n {
                let i = entries.len();
                let style = if i < FULL_SET_2D { "2D" } else { "3D" };
                entries.push(entry(&format!("e{i:04}"), &format!("label{l:02}"), style));
            }
        }
        json!({"full_set": true, "entries": entries}).to_string()
    }

    #[test]
    fn full_set_loads() {
        let mut sizes = vec![20; 46];
        sizes.push(28);
        let b = parse_benchmark(&full_set(&sizes), Path::new(".")).unwrap();
        assert_eq!(b.entries.len(), 948);
        assert_eq!(b.style_counts[&Style::TwoD], 857);
        assert_eq!(b.style_counts[&Style::ThreeD], 91);
        assert!(b.warnings.is_empty());
    }

    #[test]
    fn oversized_label_warns() {
        let mut sizes = vec![20; 45];
        sizes.push(31);
        sizes.push(948 - 20 * 45 - 31);
        let b = parse_benchmark(&full_set(&sizes), Path::new(".")).unwrap();
        assert_eq!(b.warnings.len(), 1);
        assert!(b.warnings[0].contains("31") && b.warnings[0].contains("10-30"));
    }

    #[test]
    fn wrong_full_set_totals_fail() {
        let entries: Vec<_> = (0..10).map(|i| entry(&format!("e{i}"), "run", "2D")).collect();
        let text = json!({"full_set": true, "entries": entries}).to_string();
        assert!(parse_benchmark(&text, Path::new(".")).is_err());
    }

    #[test]
    fn partial_fixture_skips_count_checks() {
        let entries: Vec<_> = (0..5).map(|i| entry(&format!("e{i}"), "run", "3D")).collect();
        let text = json!({"full_set": false, "entries": entries}).to_string();
        let b = parse_benchmark(&text, Path::new("/data")).unwrap();
        assert_eq!(b.entries.len(), 5);
        assert_eq!(b.label_counts["run"], 5);
        assert_eq!(b.resolve(Path::new("g.ppm")), PathBuf::from("/data/g.ppm"));
    }

    #[test]
    fn entry_errors_name_the_entry() {
        let mut bad = entry("e7", "run", "2D");
        bad["prompt"] = json!("  ");
        let text = json!({"entries": [bad]}).to_string();
        let err = parse_benchmark(&text, Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("e7"), "{err}");

        let text = json!({"entries": [entry("e1", "run", "4D")]}).to_string();
        assert!(parse_benchmark(&text, Path::new(".")).unwrap_err().to_string().contains("e1"));

        let text = json!({"entries": [entry("x", "run", "2D"), entry("x", "run", "2D")]}).to_string();
        assert!(parse_benchmark(&text, Path::new(".")).unwrap_err().to_string().contains("duplicate"));
    }
}
