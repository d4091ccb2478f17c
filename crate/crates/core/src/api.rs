//! Wire types of the reward service and the scoring routine behind them.
//!
//! Kept in the core crate so the server, the client and the CLI's offline
//! path all share one definition and one implementation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cases::{CaseAnnotation, CaseStore, LegalCase};
use crate::ci::ComplianceVerdict;
use crate::regulation::{Law, RegulationPath};
use crate::trajectory::ParseMode;
use crate::verifier::{build_compliance_question, check_format, mean, Verifier};

pub const UNKNOWN_CASE: &str = "unknown case";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    Strict,
    #[default]
    Lenient,
}

impl From<RewardMode> for ParseMode {
    fn from(m: RewardMode) -> Self {
        match m {
            RewardMode::Strict => ParseMode::Strict,
            RewardMode::Lenient => ParseMode::Lenient,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardItem {
    pub case_id: String,
    pub response_text: String,
}

impl RewardItem {
    pub fn new(case_id: impl Into<String>, response_text: impl Into<String>) -> Self {
        Self { case_id: case_id.into(), response_text: response_text.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardRequest {
    pub items: Vec<RewardItem>,
    #[serde(default)]
    pub mode: RewardMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub case_id: String,
    pub reward: f64,
    pub format_ok: bool,
    pub parsed_choice: Option<char>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSummary {
    /// `null` for an empty batch.
    pub mean_reward: Option<f64>,
    pub format_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardResponse {
    pub items: Vec<ScoredItem>,
    pub summary: RewardSummary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub cases: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

/// Case metadata as served; `gold` is present only when explicitly requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseView {
    pub id: String,
    pub domain: Law,
    pub narrative: String,
    #[serde(default)]
    pub annotation: CaseAnnotation,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cited_paths: Vec<RegulationPath>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<ComplianceVerdict>,
}

impl CaseView {
    pub fn of(case: &LegalCase, include_gold: bool) -> Self {
        Self {
            id: case.id.clone(),
            domain: case.domain,
            narrative: case.narrative.clone(),
            annotation: case.annotation.clone(),
            cited_paths: case.cited_paths.clone(),
            gold: include_gold.then_some(case.gold),
        }
    }
}

/// Scores one item. Unknown ids and unanswerable cases score 0 with an error
/// entry but still report the response's format check.
pub fn score_item(store: &CaseStore, verifier: &Verifier, item: &RewardItem, mode: RewardMode) -> ScoredItem {
    let question = store.get(&item.case_id).map(build_compliance_question);
    match question {
        Some(Ok(q)) => {
            let report = verifier.verify(&item.response_text, &q, mode == RewardMode::Strict);
            ScoredItem {
                case_id: item.case_id.clone(),
                reward: report.reward,
                format_ok: report.format_ok,
                parsed_choice: report.choice.map(|c| c.letter),
                errors: report.errors.iter().map(ToString::to_string).collect(),
            }
        }
        other => {
            let check = check_format(&item.response_text, mode.into());
            let lead = match other {
                Some(Err(e)) => e.to_string(),
                _ => UNKNOWN_CASE.to_string(),
            };
            ScoredItem {
                case_id: item.case_id.clone(),
                reward: 0.0,
                format_ok: check.format_ok,
                parsed_choice: check.choice.map(|c| c.letter),
                errors: std::iter::once(lead).chain(check.errors.iter().map(ToString::to_string)).collect(),
            }
        }
    }
}

/// Scores a batch in parallel; output order equals input order.
pub fn score_request(store: &CaseStore, verifier: &Verifier, request: &RewardRequest) -> RewardResponse {
    let items: Vec<ScoredItem> = request
        .items
        .par_iter()
        .map(|item| score_item(store, verifier, item, request.mode))
        .collect();
    let rewards: Vec<f64> = items.iter().map(|i| i.reward).collect();
    let summary = RewardSummary {
        mean_reward: mean(&rewards),
        format_failures: items.iter().filter(|i| !i.format_ok).count(),
    };
    RewardResponse { items, summary }
}
