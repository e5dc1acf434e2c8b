//! Interaction files: one `user item value` record per line, tab- or
//! comma-separated, `#` comments and blank lines ignored.
//!
//! Ids are arbitrary strings mapped to dense indices through a [`Vocab`]
//! shared by every file of one experiment, so a user or item keeps its index
//! across the biased and the uniform log.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use dubrec_core::{Dataset, Interaction, Regime};

use crate::error::{CliError, Result};

/// How the third column becomes a binary label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabelRule {
    /// The column already holds 0 or 1.
    Binary,
    /// Ratings at or above the threshold are positive.
    Threshold(f64),
}

#[derive(Debug, Clone, Default)]
pub struct Vocab {
    users: HashMap<String, u32>,
    items: HashMap<String, u32>,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
}

impl Vocab {
    pub fn n_users(&self) -> u32 {
        self.user_ids.len() as u32
    }

    pub fn n_items(&self) -> u32 {
        self.item_ids.len() as u32
    }

    pub fn user_id(&self, index: u32) -> Option<&str> {
        self.user_ids.get(index as usize).map(String::as_str)
    }

    pub fn item_id(&self, index: u32) -> Option<&str> {
        self.item_ids.get(index as usize).map(String::as_str)
    }

    fn intern(map: &mut HashMap<String, u32>, ids: &mut Vec<String>, key: &str) -> u32 {
        if let Some(&k) = map.get(key) {
            return k;
        }
        let k = ids.len() as u32;
        map.insert(key.to_owned(), k);
        ids.push(key.to_owned());
        k
    }

    fn user(&mut self, key: &str) -> u32 {
        Self::intern(&mut self.users, &mut self.user_ids, key)
    }

    fn item(&mut self, key: &str) -> u32 {
        Self::intern(&mut self.items, &mut self.item_ids, key)
    }
}

fn sniff_delimiter(text: &str) -> u8 {
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'));
    match first {
        Some(l) if !l.contains('\t') && l.contains(',') => b',',
        _ => b'\t',
    }
}

/// Reads one interaction file, extending `vocab` with unseen ids. A pair
/// listed twice in the same file is a data error.
pub fn read_interactions(path: &Path, rule: LabelRule, vocab: &mut Vocab) -> Result<Vec<Interaction>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_interactions(&text, &path.display().to_string(), rule, vocab)
}

/// [`read_interactions`] on in-memory text; `origin` prefixes error messages.
pub fn parse_interactions(text: &str, origin: &str, rule: LabelRule, vocab: &mut Vocab) -> Result<Vec<Interaction>> {
    let delim = char::from(sniff_delimiter(text));
    let mut seen: HashMap<(u32, u32), usize> = HashMap::new();
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let line = k + 1;
        let record: Vec<&str> = trimmed.split(delim).map(str::trim).collect();
        let bad = |msg: String| CliError::Data(format!("{origin}:{line}: {msg}"));
        if record.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", record.len())));
        }
        let value: f64 = record[2]
            .parse()
            .map_err(|_| bad(format!("value {:?} is not a number", record[2])))?;
        let label = match rule {
            LabelRule::Binary if value == 0.0 || value == 1.0 => value as u8,
            LabelRule::Binary => return Err(bad(format!("label {value} is not 0 or 1"))),
            LabelRule::Threshold(t) => u8::from(value >= t),
        };
        let (user, item) = (vocab.user(record[0]), vocab.item(record[1]));
        if let Some(first) = seen.insert((user, item), line) {
            return Err(bad(format!(
                "duplicate pair ({}, {}), first seen on line {first}",
                record[0], record[1]
            )));
        }
        out.push(Interaction::new(user, item, label));
    }
    Ok(out)
}

/// A biased log and a uniform log over one shared id vocabulary.
#[derive(Debug, Clone)]
pub struct LoadedLogs {
    pub logged: Dataset,
    pub uniform: Dataset,
    pub vocab: Vocab,
}

impl LoadedLogs {
    /// `|D|` inferred from the ids that appear in either file.
    pub fn d_size(&self) -> usize {
        self.logged.d_size()
    }
}

pub fn load_logs(logged: &Path, uniform: &Path, rule: LabelRule) -> Result<LoadedLogs> {
    let mut vocab = Vocab::default();
    let c = read_interactions(logged, rule, &mut vocab)?;
    let t = read_interactions(uniform, rule, &mut vocab)?;
    let (n_u, n_i) = (vocab.n_users().max(1), vocab.n_items().max(1));
    Ok(LoadedLogs {
        logged: Dataset::new(c, n_u, n_i, Regime::NonRandomized)?,
        uniform: Dataset::new(t, n_u, n_i, Regime::Randomized)?,
        vocab,
    })
}
