//! Legal-case database with CI annotations, the domain × verdict statistics
//! grid and stratified train/test splitting.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ci::{ComplianceVerdict, InformationFlow};
use crate::regulation::{Law, RegulationPath};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaseError {
    #[error("invalid case file: {0}")]
    Json(String),
    #[error("split ratio {0} outside (0, 1)")]
    RatioOutOfRange(f64),
    #[error("unknown case `{0}`")]
    UnknownCase(String),
}

/// Partial CI annotation of a case. Parameters the narrative does not state
/// are `None`; empty strings are rejected at ingest.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseAnnotation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sender: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipient: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub information_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purpose: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub attributes: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<InformationFlow>,
}

impl CaseAnnotation {
    fn empty_field(&self) -> Option<&'static str> {
        let fields = [
            ("sender", &self.sender),
            ("subject", &self.subject),
            ("recipient", &self.recipient),
            ("information_type", &self.information_type),
            ("purpose", &self.purpose),
        ];
        fields
            .into_iter()
            .find(|(_, v)| v.as_deref().is_some_and(|s| s.trim().is_empty()))
            .map(|(name, _)| name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegalCase {
    pub id: String,
    pub domain: Law,
    pub narrative: String,
    #[serde(default)]
    pub annotation: CaseAnnotation,
    pub gold: ComplianceVerdict,
    #[serde(default)]
    pub cited_paths: Vec<RegulationPath>,
}

/// Loose shape used while ingesting so that one bad record does not fail the file.
#[derive(Debug, Deserialize)]
struct RawCase {
    id: Option<String>,
    domain: Option<Law>,
    narrative: Option<String>,
    #[serde(default)]
    annotation: CaseAnnotation,
    gold: Option<ComplianceVerdict>,
    #[serde(default)]
    cited_paths: Vec<RegulationPath>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordError {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub message: String,
}

/// Case counts per (verdict, law): verdict rows, law columns, with totals.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatsTable {
    cells: BTreeMap<(ComplianceVerdict, Law), usize>,
}

/// Display order of rows and columns.
pub const STATS_ROWS: [ComplianceVerdict; 3] = [
    ComplianceVerdict::Permitted,
    ComplianceVerdict::Prohibited,
    ComplianceVerdict::NotApplicable,
];
pub const STATS_COLUMNS: [Law; 3] = [Law::Hipaa, Law::Gdpr, Law::AiAct];

impl StatsTable {
    pub fn from_cases<'a>(cases: impl IntoIterator<Item = &'a LegalCase>) -> Self {
        let mut t = Self::default();
        for c in cases {
            *t.cells.entry((c.gold, c.domain)).or_default() += 1;
        }
        t
    }

    pub fn cell(&self, verdict: ComplianceVerdict, law: Law) -> usize {
        self.cells.get(&(verdict, law)).copied().unwrap_or(0)
    }

    pub fn row_total(&self, verdict: ComplianceVerdict) -> usize {
        STATS_COLUMNS.iter().map(|&l| self.cell(verdict, l)).sum()
    }

    pub fn column_total(&self, law: Law) -> usize {
        STATS_ROWS.iter().map(|&v| self.cell(v, law)).sum()
    }

    pub fn total(&self) -> usize {
        self.cells.values().sum()
    }

    /// Aligned text grid; empty data cells print as `-`.
    pub fn render_text(&self) -> String {
        let mut rows: Vec<Vec<String>> = vec![std::iter::once("Category".to_string())
            .chain(STATS_COLUMNS.iter().map(|l| l.display_name().to_string()))
            .chain(std::iter::once("Total".to_string()))
            .collect()];
        for v in STATS_ROWS {
            let mut row = vec![v.label().to_string()];
            for l in STATS_COLUMNS {
                let n = self.cell(v, l);
                row.push(if n == 0 { "-".into() } else { thousands(n) });
            }
            row.push(thousands(self.row_total(v)));
            rows.push(row);
        }
        let mut total = vec!["Total".to_string()];
        total.extend(STATS_COLUMNS.iter().map(|&l| thousands(self.column_total(l))));
        total.push(thousands(self.total()));
        rows.push(total);

        let widths: Vec<usize> = (0..rows[0].len())
            .map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (ri, row) in rows.iter().enumerate() {
            for (i, cell) in row.iter().enumerate() {
                if i == 0 {
                    let _ = write!(out, "{:<w$}", cell, w = widths[i]);
                } else {
                    let _ = write!(out, " | {:>w$}", cell, w = widths[i]);
                }
            }
            out.push('\n');
            if ri == 0 || ri == rows.len() - 2 {
                let width = widths.iter().sum::<usize>() + 3 * (widths.len() - 1);
                out.push_str(&"-".repeat(width));
                out.push('\n');
            }
        }
        out
    }

    pub fn render_tsv(&self) -> String {
        let mut out = String::from("category\tHIPAA\tGDPR\tAI_ACT\ttotal\n");
        for v in STATS_ROWS {
            let _ = write!(out, "{}", v.label());
            for l in STATS_COLUMNS {
                let _ = write!(out, "\t{}", self.cell(v, l));
            }
            let _ = writeln!(out, "\t{}", self.row_total(v));
        }
        let _ = write!(out, "Total");
        for l in STATS_COLUMNS {
            let _ = write!(out, "\t{}", self.column_total(l));
        }
        let _ = writeln!(out, "\t{}", self.total());
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut rows = serde_json::Map::new();
        for v in STATS_ROWS {
            let mut cols = serde_json::Map::new();
            for l in STATS_COLUMNS {
                cols.insert(json_law_key(l).into(), self.cell(v, l).into());
            }
            cols.insert("total".into(), self.row_total(v).into());
            rows.insert(json_verdict_key(v).into(), cols.into());
        }
        let mut totals = serde_json::Map::new();
        for l in STATS_COLUMNS {
            totals.insert(json_law_key(l).into(), self.column_total(l).into());
        }
        totals.insert("total".into(), self.total().into());
        rows.insert("TOTAL".into(), totals.into());
        rows.into()
    }
}

fn json_law_key(l: Law) -> &'static str {
    match l {
        Law::Gdpr => "GDPR",
        Law::Hipaa => "HIPAA",
        Law::AiAct => "AI_ACT",
    }
}

fn json_verdict_key(v: ComplianceVerdict) -> &'static str {
    match v {
        ComplianceVerdict::Permitted => "PERMITTED",
        ComplianceVerdict::Prohibited => "PROHIBITED",
        ComplianceVerdict::NotApplicable => "NOT_APPLICABLE",
    }
}

fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct CaseStore {
    cases: Vec<LegalCase>,
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct IngestOutcome {
    pub store: CaseStore,
    pub stats: StatsTable,
    pub errors: Vec<RecordError>,
}

impl CaseStore {
    /// Ingests a JSON array of case records. Records that fail validation are
    /// skipped and reported; an empty or whitespace-only file yields an empty store.
    pub fn ingest_json(src: &str) -> Result<IngestOutcome, CaseError> {
        if src.trim().is_empty() {
            return Ok(IngestOutcome { store: CaseStore::default(), stats: StatsTable::default(), errors: vec![] });
        }
        let values: Vec<serde_json::Value> =
            serde_json::from_str(src).map_err(|e| CaseError::Json(e.to_string()))?;
        let mut store = CaseStore::default();
        let mut errors = Vec::new();
        for (index, value) in values.into_iter().enumerate() {
            let id_hint = value.get("id").and_then(|v| v.as_str()).map(str::to_string);
            let fail = |message: String| RecordError { index, id: id_hint.clone(), message };
            let raw: RawCase = match serde_json::from_value(value) {
                Ok(r) => r,
                Err(e) => {
                    errors.push(fail(e.to_string()));
                    continue;
                }
            };
            match validate(raw) {
                Ok(case) => {
                    if let Err(e) = store.insert(case) {
                        errors.push(fail(e));
                    }
                }
                Err(msg) => errors.push(fail(msg)),
            }
        }
        let stats = StatsTable::from_cases(store.iter());
        Ok(IngestOutcome { store, stats, errors })
    }

    pub fn from_cases(cases: impl IntoIterator<Item = LegalCase>) -> Result<Self, String> {
        let mut store = CaseStore::default();
        for c in cases {
            store.insert(c)?;
        }
        Ok(store)
    }

    fn insert(&mut self, case: LegalCase) -> Result<(), String> {
        if self.index.contains_key(&case.id) {
            return Err(format!("duplicate case id `{}`", case.id));
        }
        self.index.insert(case.id.clone(), self.cases.len());
        self.cases.push(case);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&LegalCase> {
        self.index.get(id).map(|&i| &self.cases[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &LegalCase> {
        self.cases.iter()
    }

    pub fn cases(&self) -> &[LegalCase] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn stats(&self) -> StatsTable {
        StatsTable::from_cases(self.iter())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.cases).expect("cases serialize")
    }

    /// Stratified split: within each (domain, verdict) cell the case ids are
    /// shuffled with a seeded RNG and the first `floor(n * ratio)` go to train.
    pub fn split(&self, ratio: f64, seed: u64) -> Result<SplitAssignment, CaseError> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(CaseError::RatioOutOfRange(ratio));
        }
        let mut cells: BTreeMap<(Law, ComplianceVerdict), Vec<&str>> = BTreeMap::new();
        for c in &self.cases {
            cells.entry((c.domain, c.gold)).or_default().push(&c.id);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut train_ids = BTreeSet::new();
        let mut test_ids = BTreeSet::new();
        for ids in cells.values_mut() {
            ids.sort_unstable();
            ids.shuffle(&mut rng);
            let n_train = train_count(ids.len(), ratio);
            train_ids.extend(ids[..n_train].iter().map(|s| s.to_string()));
            test_ids.extend(ids[n_train..].iter().map(|s| s.to_string()));
        }
        Ok(SplitAssignment { train_ids, test_ids, ratio, seed })
    }
}

/// `floor(n * ratio)`, guarded against products like 0.29 * 100 = 28.999999999999996.
pub fn train_count(n: usize, ratio: f64) -> usize {
    let exact = n as f64 * ratio;
    let floor = (exact + 1e-9).floor() as usize;
    floor.min(n)
}

fn validate(raw: RawCase) -> Result<LegalCase, String> {
    let id = raw.id.filter(|s| !s.trim().is_empty()).ok_or("missing case id")?;
    let gold = raw.gold.ok_or("missing gold verdict")?;
    let domain = raw.domain.ok_or("missing domain")?;
    let narrative = raw.narrative.filter(|s| !s.trim().is_empty()).ok_or("empty narrative")?;
    if let Some(field) = raw.annotation.empty_field() {
        return Err(format!("annotation field `{field}` is an empty string; omit it instead"));
    }
    Ok(LegalCase { id, domain, narrative, annotation: raw.annotation, gold, cited_paths: raw.cited_paths })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train_ids: BTreeSet<String>,
    pub test_ids: BTreeSet<String>,
    pub ratio: f64,
    pub seed: u64,
}

impl SplitAssignment {
    pub fn render_tsv(&self) -> String {
        let mut rows: Vec<(&str, &str)> = self
            .train_ids
            .iter()
            .map(|id| (id.as_str(), "train"))
            .chain(self.test_ids.iter().map(|id| (id.as_str(), "test")))
            .collect();
        rows.sort_unstable();
        let mut out = String::from("case_id\tpartition\n");
        for (id, part) in rows {
            let _ = writeln!(out, "{id}\t{part}");
        }
        out
    }
}
