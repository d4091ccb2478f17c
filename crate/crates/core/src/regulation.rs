//! Hierarchical regulation store (law → chapter → article → point).
//!
//! Regulations are ingested from a JSON tree document:
//!
//! ```json
//! {"laws": [{"law": "GDPR", "level": "LAW", "identifier": "GDPR", "title": "...",
//!            "text": "...", "children": [ ... ]}]}
//! ```
//!
//! Every node is addressed by the identifiers on its root-to-node path, e.g.
//! `["GDPR", "Chapter III", "Article 17"]`. Transmission principles can be
//! attached to nodes and gathered back per subtree.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ci::{CiError, Context, Domain, InformationType, Role, TransmissionPrinciple};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegulationError {
    #[error("invalid regulation document: {0}")]
    Json(String),
    #[error("no root law node")]
    NoRoot,
    #[error("schema error at {path}: {message}")]
    Schema { path: RegulationPath, message: String },
    #[error("no regulation at {requested}; deepest resolvable prefix is {prefix:?}")]
    NotFound { requested: RegulationPath, prefix: Vec<String> },
    #[error("empty query")]
    EmptyQuery,
    #[error("empty regulation path")]
    EmptyPath,
    #[error(transparent)]
    Context(#[from] CiError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Law {
    #[serde(rename = "GDPR")]
    Gdpr,
    #[serde(rename = "HIPAA")]
    Hipaa,
    #[serde(rename = "AI_ACT")]
    AiAct,
}

impl Law {
    pub const ALL: [Law; 3] = [Law::Gdpr, Law::Hipaa, Law::AiAct];

    /// Name as it appears in prompts and tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Law::Gdpr => "GDPR",
            Law::Hipaa => "HIPAA",
            Law::AiAct => "AI ACT",
        }
    }

    pub fn parse(s: &str) -> Option<Law> {
        match s.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "gdpr" => Some(Law::Gdpr),
            "hipaa" => Some(Law::Hipaa),
            "ai_act" | "aiact" | "eu_ai_act" => Some(Law::AiAct),
            _ => None,
        }
    }
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl From<Law> for Domain {
    fn from(l: Law) -> Self {
        match l {
            Law::Gdpr => Domain::Gdpr,
            Law::Hipaa => Domain::Hipaa,
            Law::AiAct => Domain::AiAct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Level {
    Law,
    Chapter,
    Article,
    Point,
    /// Levels outside the chapter/article/point scheme (HIPAA parts, subparts, ...).
    Other,
}

impl Level {
    fn rank(self) -> Option<u8> {
        match self {
            Level::Law => Some(4),
            Level::Chapter => Some(3),
            Level::Article => Some(2),
            Level::Point => Some(1),
            Level::Other => None,
        }
    }
}

/// Identifiers from a law root down to one node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct RegulationPath(Vec<String>);

impl RegulationPath {
    pub fn new<I, S>(segments: I) -> Result<Self, RegulationError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let segs: Vec<String> = segments.into_iter().map(Into::into).collect();
        if segs.is_empty() {
            return Err(RegulationError::EmptyPath);
        }
        Ok(Self(segs))
    }

    pub fn segments(&self) -> &[String] {
        &self.0
    }

    pub fn starts_with(&self, prefix: &RegulationPath) -> bool {
        self.0.starts_with(&prefix.0)
    }

    fn child(&self, identifier: &str) -> Self {
        let mut segs = self.0.clone();
        segs.push(identifier.to_string());
        Self(segs)
    }
}

impl TryFrom<Vec<String>> for RegulationPath {
    type Error = RegulationError;

    fn try_from(v: Vec<String>) -> Result<Self, Self::Error> {
        RegulationPath::new(v)
    }
}

impl From<RegulationPath> for Vec<String> {
    fn from(p: RegulationPath) -> Self {
        p.0
    }
}

impl fmt::Display for RegulationPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" / "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegulationNode {
    pub law: Law,
    pub level: Level,
    pub identifier: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub children: Vec<RegulationNode>,
}

impl RegulationNode {
    pub fn new(law: Law, level: Level, identifier: impl Into<String>, title: impl Into<String>) -> Self {
        Self {
            law,
            level,
            identifier: identifier.into(),
            title: title.into(),
            text: String::new(),
            children: Vec::new(),
        }
    }

    pub fn text(mut self, text: impl Into<String>) -> Self {
        self.text = text.into();
        self
    }

    pub fn child(mut self, node: RegulationNode) -> Self {
        self.children.push(node);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegulationDocument {
    #[serde(default)]
    pub laws: Vec<RegulationNode>,
}

impl RegulationDocument {
    pub fn from_json(src: &str) -> Result<Self, RegulationError> {
        if src.trim().is_empty() {
            return Ok(Self::default());
        }
        serde_json::from_str(src).map_err(|e| RegulationError::Json(e.to_string()))
    }

    /// Canonical form: two-space pretty JSON with a trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("regulation document serializes");
        s.push('\n');
        s
    }
}

/// Node counts per level from one ingest.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub counts: BTreeMap<Level, usize>,
}

impl IngestReport {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn count(&self, level: Level) -> usize {
        self.counts.get(&level).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub path: RegulationPath,
    pub snippet: String,
}

#[derive(Debug, Clone, Default)]
pub struct RegulationStore {
    roots: Vec<RegulationNode>,
    norms: Vec<(RegulationPath, TransmissionPrinciple)>,
}

impl RegulationStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses and ingests a JSON regulation document.
    pub fn ingest_json(&mut self, src: &str) -> Result<IngestReport, RegulationError> {
        let doc = RegulationDocument::from_json(src)?;
        self.ingest(doc)
    }

    /// Validates and adds every law in `doc`. On error the store is left unchanged.
    pub fn ingest(&mut self, doc: RegulationDocument) -> Result<IngestReport, RegulationError> {
        if doc.laws.is_empty() {
            return Err(RegulationError::NoRoot);
        }
        let mut report = IngestReport::default();
        let mut root_ids: BTreeSet<&str> = self.roots.iter().map(|r| r.identifier.as_str()).collect();
        for root in &doc.laws {
            let path = RegulationPath(vec![root.identifier.clone()]);
            if root.level != Level::Law {
                return Err(RegulationError::Schema {
                    path,
                    message: format!("root node has level {:?}, expected LAW", root.level),
                });
            }
            if !root_ids.insert(root.identifier.as_str()) {
                return Err(RegulationError::Schema {
                    path,
                    message: "duplicate law identifier".into(),
                });
            }
            validate_node(root, root.law, None, &path, &mut report)?;
        }
        self.roots.extend(doc.laws);
        Ok(report)
    }

    pub fn export(&self) -> RegulationDocument {
        RegulationDocument { laws: self.roots.clone() }
    }

    pub fn roots(&self) -> &[RegulationNode] {
        &self.roots
    }

    pub fn get(&self, path: &RegulationPath) -> Result<&RegulationNode, RegulationError> {
        let segs = path.segments();
        let not_found = |depth: usize| RegulationError::NotFound {
            requested: path.clone(),
            prefix: segs[..depth].to_vec(),
        };
        let mut node = self
            .roots
            .iter()
            .find(|r| r.identifier == segs[0])
            .ok_or_else(|| not_found(0))?;
        for (depth, seg) in segs.iter().enumerate().skip(1) {
            node = node
                .children
                .iter()
                .find(|c| &c.identifier == seg)
                .ok_or_else(|| not_found(depth))?;
        }
        Ok(node)
    }

    /// All nodes with their paths, in document (pre-)order.
    pub fn walk(&self) -> Vec<(RegulationPath, &RegulationNode)> {
        let mut out = Vec::new();
        for r in &self.roots {
            preorder(r, RegulationPath(vec![r.identifier.clone()]), &mut out);
        }
        out
    }

    /// Case-insensitive substring search over title and text, ordered by path.
    pub fn search(&self, keyword: &str, law: Option<Law>) -> Result<Vec<SearchHit>, RegulationError> {
        if keyword.is_empty() {
            return Err(RegulationError::EmptyQuery);
        }
        let needle = keyword.to_lowercase();
        let mut hits: Vec<SearchHit> = self
            .walk()
            .into_iter()
            .filter(|(_, n)| law.is_none_or(|l| n.law == l))
            .filter_map(|(path, n)| {
                let snippet = snippet_around(&n.title, &needle).or_else(|| snippet_around(&n.text, &needle))?;
                Some(SearchHit { path, snippet })
            })
            .collect();
        hits.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(hits)
    }

    /// Attaches principles to the node at `path`, stamping their provenance.
    pub fn attach_norms(
        &mut self,
        path: &RegulationPath,
        principles: impl IntoIterator<Item = TransmissionPrinciple>,
    ) -> Result<(), RegulationError> {
        self.get(path)?;
        for mut p in principles {
            p.validate()?;
            p.provenance = Some(path.clone());
            self.norms.push((path.clone(), p));
        }
        Ok(())
    }

    pub fn norms_at(&self, path: &RegulationPath) -> Vec<&TransmissionPrinciple> {
        self.norms.iter().filter(|(p, _)| p == path).map(|(_, n)| n).collect()
    }

    /// Principles attached anywhere under `prefix`, in attachment order.
    pub fn gather(&self, prefix: &RegulationPath) -> Result<Vec<&TransmissionPrinciple>, RegulationError> {
        self.get(prefix)?;
        Ok(self
            .norms
            .iter()
            .filter(|(p, _)| p.starts_with(prefix))
            .map(|(_, n)| n)
            .collect())
    }

    /// Builds a norm context from every principle attached under `prefix`.
    pub fn assemble_context(
        &self,
        prefix: &RegulationPath,
        id: impl Into<String>,
        roles: Vec<Role>,
        info_types: Vec<InformationType>,
    ) -> Result<Context, RegulationError> {
        let root = self.get(&RegulationPath(vec![prefix.segments()[0].clone()]))?;
        let principles = self.gather(prefix)?.into_iter().cloned().collect();
        Ok(Context::new(id, root.law.into(), roles, info_types, principles)?)
    }
}

fn preorder<'a>(n: &'a RegulationNode, p: RegulationPath, out: &mut Vec<(RegulationPath, &'a RegulationNode)>) {
    let children: Vec<_> = n.children.iter().map(|c| (p.child(&c.identifier), c)).collect();
    out.push((p, n));
    for (cp, c) in children {
        preorder(c, cp, out);
    }
}

fn validate_node(
    node: &RegulationNode,
    law: Law,
    parent_rank: Option<u8>,
    path: &RegulationPath,
    report: &mut IngestReport,
) -> Result<(), RegulationError> {
    let err = |message: String| RegulationError::Schema { path: path.clone(), message };
    if node.identifier.trim().is_empty() {
        return Err(err("empty identifier".into()));
    }
    if node.law != law {
        return Err(err(format!("node law {:?} differs from root law {:?}", node.law, law)));
    }
    if parent_rank.is_some() && node.level == Level::Law {
        return Err(err("LAW level below the root".into()));
    }
    if let (Some(parent), Some(own)) = (parent_rank, node.level.rank()) {
        if own > parent {
            return Err(err(format!("level {:?} nested below a lower level", node.level)));
        }
    }
    *report.counts.entry(node.level).or_default() += 1;

    let mut seen = BTreeSet::new();
    let rank = node.level.rank().or(parent_rank);
    for c in &node.children {
        let cp = path.child(&c.identifier);
        if !seen.insert(c.identifier.as_str()) {
            return Err(RegulationError::Schema { path: cp, message: "duplicate sibling identifier".into() });
        }
        validate_node(c, law, rank, &cp, report)?;
    }
    Ok(())
}

const SNIPPET_CONTEXT: usize = 40;

/// Returns a window of `hay` around the first case-insensitive occurrence of `needle_lower`.
fn snippet_around(hay: &str, needle_lower: &str) -> Option<String> {
    let mut lowered = String::with_capacity(hay.len());
    let mut owner = Vec::with_capacity(hay.len());
    for (ci, ch) in hay.chars().enumerate() {
        lowered.extend(ch.to_lowercase());
        owner.resize(lowered.len(), ci);
    }
    let byte = lowered.find(needle_lower)?;
    let start_char = owner[byte];
    let end_char = owner
        .get(byte + needle_lower.len())
        .copied()
        .unwrap_or_else(|| hay.chars().count());
    let chars: Vec<char> = hay.chars().collect();
    let from = start_char.saturating_sub(SNIPPET_CONTEXT);
    let to = (end_char + SNIPPET_CONTEXT).min(chars.len());
    let mut s = String::new();
    if from > 0 {
        s.push_str("...");
    }
    s.extend(&chars[from..to]);
    if to < chars.len() {
        s.push_str("...");
    }
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ci::{Effect, RolePattern};

    fn path(segs: &[&str]) -> RegulationPath {
        RegulationPath::new(segs.iter().copied()).unwrap()
    }

    fn gdpr() -> RegulationNode {
        RegulationNode::new(Law::Gdpr, Level::Law, "GDPR", "General Data Protection Regulation")
            .child(
                RegulationNode::new(Law::Gdpr, Level::Chapter, "Chapter II", "Principles").child(
                    RegulationNode::new(Law::Gdpr, Level::Article, "Article 6", "Lawfulness of processing")
                        .text("Processing shall be lawful only if at least one legal basis applies."),
                ),
            )
            .child(
                RegulationNode::new(Law::Gdpr, Level::Chapter, "Chapter III", "Rights of the data subject").child(
                    RegulationNode::new(Law::Gdpr, Level::Article, "Article 17", "Right to erasure")
                        .text("The data subject shall have the right to obtain erasure of personal data."),
                ),
            )
    }

    fn store() -> RegulationStore {
        let mut s = RegulationStore::new();
        s.ingest(RegulationDocument { laws: vec![gdpr()] }).unwrap();
        s
    }

    #[test]
    fn counts_levels() {
        let doc = RegulationDocument {
            laws: vec![RegulationNode::new(Law::Gdpr, Level::Law, "GDPR", "")
                .child(
                    RegulationNode::new(Law::Gdpr, Level::Chapter, "Chapter I", "")
                        .child(RegulationNode::new(Law::Gdpr, Level::Article, "Article 1", ""))
                        .child(RegulationNode::new(Law::Gdpr, Level::Article, "Article 2", "")),
                )],
        };
        let report = RegulationStore::new().ingest(doc).unwrap();
        assert_eq!(report.count(Level::Law), 1);
        assert_eq!(report.count(Level::Chapter), 1);
        assert_eq!(report.count(Level::Article), 2);
        assert_eq!(report.count(Level::Point), 0);
        assert_eq!(report.total(), 4);
    }

    #[test]
    fn empty_document() {
        let err = RegulationStore::new().ingest_json("").unwrap_err();
        assert_eq!(err.to_string(), "no root law node");
        assert_eq!(RegulationStore::new().ingest_json(r#"{"laws": []}"#).unwrap_err(), RegulationError::NoRoot);
    }

    #[test]
    fn duplicate_sibling_and_inversion() {
        let dup = gdpr().child(RegulationNode::new(Law::Gdpr, Level::Chapter, "Chapter II", "again"));
        let err = RegulationStore::new().ingest(RegulationDocument { laws: vec![dup] }).unwrap_err();
        assert!(matches!(err, RegulationError::Schema { path: ref p, .. } if p == &path(&["GDPR", "Chapter II"])));

        let inverted = RegulationNode::new(Law::Gdpr, Level::Law, "GDPR", "").child(
            RegulationNode::new(Law::Gdpr, Level::Article, "Article 1", "")
                .child(RegulationNode::new(Law::Gdpr, Level::Chapter, "Chapter I", "")),
        );
        let err = RegulationStore::new().ingest(RegulationDocument { laws: vec![inverted] }).unwrap_err();
        assert!(err.to_string().contains("nested below a lower level"), "{err}");
    }

    #[test]
    fn other_level_is_transparent() {
        let hipaa = RegulationNode::new(Law::Hipaa, Level::Law, "HIPAA", "").child(
            RegulationNode::new(Law::Hipaa, Level::Other, "Part 164", "").child(
                RegulationNode::new(Law::Hipaa, Level::Other, "Subpart E", "")
                    .child(RegulationNode::new(Law::Hipaa, Level::Article, "§ 164.502", "")),
            ),
        );
        let r = RegulationStore::new().ingest(RegulationDocument { laws: vec![hipaa] }).unwrap();
        assert_eq!(r.count(Level::Other), 2);
    }

    #[test]
    fn lookups() {
        let s = store();
        assert_eq!(s.get(&path(&["GDPR", "Chapter III", "Article 17"])).unwrap().title, "Right to erasure");
        assert_eq!(s.get(&path(&["GDPR"])).unwrap().level, Level::Law);
        match s.get(&path(&["GDPR", "Article 999"])).unwrap_err() {
            RegulationError::NotFound { prefix, .. } => assert_eq!(prefix, vec!["GDPR".to_string()]),
            e => panic!("unexpected {e}"),
        }
        match s.get(&path(&["HIPAA"])).unwrap_err() {
            RegulationError::NotFound { prefix, .. } => assert!(prefix.is_empty()),
            e => panic!("unexpected {e}"),
        }
        assert!(RegulationPath::new(Vec::<String>::new()).is_err());
    }

    #[test]
    fn walk_is_preorder() {
        let s = store();
        let order: Vec<String> = s.walk().into_iter().map(|(p, _)| p.to_string()).collect();
        assert_eq!(
            order,
            [
                "GDPR",
                "GDPR / Chapter II",
                "GDPR / Chapter II / Article 6",
                "GDPR / Chapter III",
                "GDPR / Chapter III / Article 17"
            ]
        );
    }

    #[test]
    fn searching() {
        let s = store();
        let hits = s.search("erasure", None).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].path, path(&["GDPR", "Chapter III", "Article 17"]));
        assert!(hits[0].snippet.contains("erasure"));
        assert_eq!(s.search("ERASURE", Some(Law::Gdpr)).unwrap().len(), 1);
        assert!(s.search("erasure", Some(Law::Hipaa)).unwrap().is_empty());
        assert!(s.search("zzzz-no-match", None).unwrap().is_empty());
        assert_eq!(s.search("", None).unwrap_err().to_string(), "empty query");
    }

    #[test]
    fn snippet_windows_respect_char_boundaries() {
        let long = format!("{}Ärger erasure Ölfeld{}", "é".repeat(60), "ü".repeat(60));
        let snip = snippet_around(&long, "erasure").unwrap();
        assert!(snip.starts_with("...") && snip.ends_with("..."));
        assert!(snip.contains("Ärger erasure Ölfeld"));
    }

    #[test]
    fn norms() {
        let mut s = store();
        let a6 = path(&["GDPR", "Chapter II", "Article 6"]);
        let p1 = TransmissionPrinciple::permit("lawful-basis-consent")
            .recipient(RolePattern::Tag("controller".into()))
            .conditions(["consent"]);
        let p2 = TransmissionPrinciple::permit("lawful-basis-contract").conditions(["contract"]);
        s.attach_norms(&a6, [p1, p2]).unwrap();
        s.attach_norms(&path(&["GDPR", "Chapter III", "Article 17"]), [TransmissionPrinciple::prohibit(
            "retain-after-erasure",
        )
        .conditions(["erasure-requested"])])
        .unwrap();

        let all = s.gather(&path(&["GDPR"])).unwrap();
        let ids: Vec<&str> = all.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["lawful-basis-consent", "lawful-basis-contract", "retain-after-erasure"]);
        assert!(all[..2].iter().all(|p| p.provenance.as_ref() == Some(&a6)));
        assert_eq!(s.gather(&path(&["GDPR", "Chapter II"])).unwrap().len(), 2);
        assert_eq!(s.norms_at(&a6).len(), 2);
        assert!(s.attach_norms(&path(&["GDPR", "Article 999"]), []).is_err());

        let ctx = s.assemble_context(&path(&["GDPR"]), "gdpr", vec![], vec![]).unwrap();
        assert_eq!(ctx.domain, Domain::Gdpr);
        assert_eq!(ctx.principles().len(), 3);
        assert_eq!(ctx.principles()[2].effect, Effect::Prohibit);
    }

    #[test]
    fn canonical_round_trip() {
        let text = RegulationDocument { laws: vec![gdpr()] }.to_canonical_json();
        let mut s = RegulationStore::new();
        s.ingest_json(&text).unwrap();
        assert_eq!(s.export().to_canonical_json(), text);
    }
}
