//! Sender / subject / recipient knowledge-graph triples.
//!
//! Flat-file format: one triple per line, tab separated
//! `sender<TAB>subject<TAB>recipient<TAB>attr1,attr2`. The attribute column may
//! be empty or omitted.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KgError {
    #[error("triple has an empty {0} label")]
    EmptyLabel(&'static str),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KgTriple {
    pub sender: String,
    pub subject: String,
    pub recipient: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<BTreeSet<String>>,
}

impl KgTriple {
    pub fn new(sender: impl Into<String>, subject: impl Into<String>, recipient: impl Into<String>) -> Self {
        Self { sender: sender.into(), subject: subject.into(), recipient: recipient.into(), attributes: None }
    }

    pub fn with_attributes<I, S>(mut self, attrs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = attrs.into_iter().map(Into::into).collect();
        self.attributes = if set.is_empty() { None } else { Some(set) };
        self
    }

    pub fn label(&self, pos: Position) -> &str {
        match pos {
            Position::Sender => &self.sender,
            Position::Subject => &self.subject,
            Position::Recipient => &self.recipient,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Position {
    Sender,
    Subject,
    Recipient,
}

/// Per-position exact match; `None` is a wildcard.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriplePattern {
    pub sender: Option<String>,
    pub subject: Option<String>,
    pub recipient: Option<String>,
}

impl TriplePattern {
    pub fn any() -> Self {
        Self::default()
    }

    pub fn sender(mut self, s: impl Into<String>) -> Self {
        self.sender = Some(s.into());
        self
    }

    pub fn subject(mut self, s: impl Into<String>) -> Self {
        self.subject = Some(s.into());
        self
    }

    pub fn recipient(mut self, s: impl Into<String>) -> Self {
        self.recipient = Some(s.into());
        self
    }

    pub fn matches(&self, t: &KgTriple) -> bool {
        self.sender.as_ref().is_none_or(|s| *s == t.sender)
            && self.subject.as_ref().is_none_or(|s| *s == t.subject)
            && self.recipient.as_ref().is_none_or(|s| *s == t.recipient)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TripleStore {
    triples: Vec<KgTriple>,
    by_sender: HashMap<String, Vec<usize>>,
    by_subject: HashMap<String, Vec<usize>>,
    by_recipient: HashMap<String, Vec<usize>>,
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[KgTriple] {
        &self.triples
    }

    pub fn add(&mut self, mut triple: KgTriple) -> Result<(), KgError> {
        for (name, label) in [("sender", &triple.sender), ("subject", &triple.subject), ("recipient", &triple.recipient)] {
            if label.trim().is_empty() {
                return Err(KgError::EmptyLabel(name));
            }
        }
        if triple.attributes.as_ref().is_some_and(BTreeSet::is_empty) {
            triple.attributes = None;
        }
        let i = self.triples.len();
        self.by_sender.entry(triple.sender.clone()).or_default().push(i);
        self.by_subject.entry(triple.subject.clone()).or_default().push(i);
        self.by_recipient.entry(triple.recipient.clone()).or_default().push(i);
        self.triples.push(triple);
        Ok(())
    }

    /// Triples matching every bound position, in insertion order.
    pub fn query(&self, pattern: &TriplePattern) -> Vec<&KgTriple> {
        let postings = [
            pattern.sender.as_ref().map(|s| self.by_sender.get(s)),
            pattern.subject.as_ref().map(|s| self.by_subject.get(s)),
            pattern.recipient.as_ref().map(|s| self.by_recipient.get(s)),
        ];
        let mut shortest: Option<&Vec<usize>> = None;
        for p in postings.into_iter().flatten() {
            match p {
                None => return Vec::new(),
                Some(list) if shortest.is_none_or(|s| list.len() < s.len()) => shortest = Some(list),
                Some(_) => {}
            }
        }
        match shortest {
            Some(list) => list
                .iter()
                .map(|&i| &self.triples[i])
                .filter(|t| pattern.matches(t))
                .collect(),
            None => self.triples.iter().collect(),
        }
    }

    /// Distinct labels seen at `pos`, in first-seen order.
    pub fn labels(&self, pos: Position) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.triples
            .iter()
            .map(|t| t.label(pos))
            .filter(|l| seen.insert(*l))
            .collect()
    }

    /// Distinct attribute tags, in first-seen order.
    pub fn attribute_labels(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.triples
            .iter()
            .filter_map(|t| t.attributes.as_ref())
            .flatten()
            .map(String::as_str)
            .filter(|l| seen.insert(*l))
            .collect()
    }

    pub fn from_tsv(src: &str) -> Result<Self, KgError> {
        let mut store = Self::new();
        for (n, line) in src.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if !(3..=4).contains(&cols.len()) {
                return Err(KgError::Parse { line: n + 1, message: format!("expected 3 or 4 columns, got {}", cols.len()) });
            }
            let mut t = KgTriple::new(cols[0], cols[1], cols[2]);
            if let Some(attrs) = cols.get(3) {
                t = t.with_attributes(attrs.split(',').map(str::trim).filter(|a| !a.is_empty()));
            }
            store
                .add(t)
                .map_err(|e| KgError::Parse { line: n + 1, message: e.to_string() })?;
        }
        Ok(store)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for t in &self.triples {
            let attrs = t
                .attributes
                .as_ref()
                .map(|a| a.iter().cloned().collect::<Vec<_>>().join(","))
                .unwrap_or_default();
            let _ = writeln!(out, "{}\t{}\t{}\t{}", t.sender, t.subject, t.recipient, attrs);
        }
        out
    }
}
