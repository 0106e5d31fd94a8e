//! Flag values from a TOML file, merged under the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use good_core::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        }
    }
}

/// A single untagged path or a `tag = path` table.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Tagged {
    Single(PathBuf),
    Table(BTreeMap<String, PathBuf>),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    pub threads: Option<usize>,
    pub dataset: Option<PathBuf>,
    pub split: Option<OneOrMany>,
    pub out: Option<PathBuf>,
    pub k: Option<usize>,
    pub gt_filter_iou: Option<f64>,
    pub merge_iou: Option<f64>,
    pub proposals: Option<BTreeMap<String, PathBuf>>,
    pub detections: Option<Tagged>,
    pub baseline: Option<PathBuf>,
    pub holdout_fraction: Option<f64>,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub base_assoc_iou: Option<f64>,
    pub per_class_budget: Option<usize>,
    pub reference: Option<String>,
    pub overlap_iou: Option<f64>,
    pub size_edges: Option<Vec<f64>>,
    pub reports: Option<BTreeMap<String, PathBuf>>,
    pub n_images: Option<usize>,
    pub spec: Option<PathBuf>,
    pub assignment: Option<PathBuf>,
    pub positive_iou: Option<f64>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut s: Settings = toml::from_str(&text).map_err(|e| Error::Parse {
            what: format!("config file {}", path.display()),
            message: e.to_string(),
        })?;
        let dir = path.parent().unwrap_or(Path::new(""));
        s.rebase(dir);
        Ok(s)
    }

    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        for p in [&mut self.dataset, &mut self.out, &mut self.baseline, &mut self.spec, &mut self.assignment]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        for map in [&mut self.proposals, &mut self.reports].into_iter().flatten() {
            map.values_mut().for_each(fix);
        }
        match &mut self.detections {
            Some(Tagged::Single(p)) => fix(p),
            Some(Tagged::Table(map)) => map.values_mut().for_each(fix),
            None => {}
        }
        // a split given as a file path is rebased too; builtin names are left alone
        if let Some(split) = &mut self.split {
            let rebase_split = |s: &mut String| {
                if s.ends_with(".json") && Path::new(s.as_str()).is_relative() {
                    *s = dir.join(&*s).to_string_lossy().into_owned();
                }
            };
            match split {
                OneOrMany::One(s) => rebase_split(s),
                OneOrMany::Many(v) => v.iter_mut().for_each(rebase_split),
            }
        }
    }

    pub fn splits(&self) -> Vec<String> {
        self.split.clone().map(OneOrMany::into_vec).unwrap_or_default()
    }

    pub fn split(&self) -> Result<Option<String>> {
        let v = self.splits();
        match v.len() {
            0 => Ok(None),
            1 => Ok(v.into_iter().next()),
            n => Err(Error::Validation(format!(
                "config lists {n} splits but this subcommand takes one"
            ))),
        }
    }

    pub fn detections(&self) -> Vec<(String, PathBuf)> {
        match &self.detections {
            Some(Tagged::Single(p)) => vec![("detections".to_string(), p.clone())],
            Some(Tagged::Table(map)) => map.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
            None => Vec::new(),
        }
    }
}

pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

pub fn require<T>(flag: Option<T>, config: Option<T>, name: &str) -> Result<T> {
    flag.or(config)
        .ok_or_else(|| Error::Validation(format!("--{name} is required")))
}

fn check_tag(tag: &str) -> Result<()> {
    let ok = !tag.is_empty()
        && tag
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.');
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "source tag {tag:?} must be non-empty and use only letters, digits, '.', '_' or '-'"
        )))
    }
}

/// Parses `TAG=PATH` values; a bare `PATH` gets `default_tag` when allowed.
pub fn parse_tagged(values: &[String], default_tag: Option<&str>) -> Result<Vec<(String, PathBuf)>> {
    let mut out: Vec<(String, PathBuf)> = Vec::with_capacity(values.len());
    for v in values {
        let (tag, path) = match v.split_once('=') {
            Some((t, p)) => (t.to_string(), PathBuf::from(p)),
            None => match default_tag {
                Some(t) => (t.to_string(), PathBuf::from(v)),
                None => return Err(Error::Validation(format!("expected TAG=PATH, got {v:?}"))),
            },
        };
        out.push((tag, path));
    }
    check_tags(&out)?;
    Ok(out)
}

pub fn check_tags(entries: &[(String, PathBuf)]) -> Result<()> {
    for (i, (tag, _)) in entries.iter().enumerate() {
        check_tag(tag)?;
        if entries[..i].iter().any(|(t, _)| t == tag) {
            return Err(Error::Validation(format!("source tag {tag:?} is given twice")));
        }
    }
    Ok(())
}

/// Flags win over the config as a whole; the two lists are never mixed.
pub fn tagged_or(
    flags: &[String],
    default_tag: Option<&str>,
    config: Vec<(String, PathBuf)>,
) -> Result<Vec<(String, PathBuf)>> {
    if flags.is_empty() {
        check_tags(&config)?;
        Ok(config)
    } else {
        parse_tagged(flags, default_tag)
    }
}

pub fn map_entries(map: &Option<BTreeMap<String, PathBuf>>) -> Vec<(String, PathBuf)> {
    map.iter()
        .flatten()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}
