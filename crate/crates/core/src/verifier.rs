//! Compliance questions, response verification and the binary reward.
//!
//! The reward is the indicator that the response's extracted choice equals the
//! case's gold verdict. Malformed responses score 0; verification never fails.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::cases::{CaseAnnotation, LegalCase};
use crate::ci::ComplianceVerdict;
use crate::hashing::fold_whitespace;
use crate::regulation::Law;
use crate::trajectory::{
    extract_compliance_choice, parse_with, ChoiceError, CiBlock, FormatError, ParseMode, ParsedChoice,
    COMPLIANCE_OPTIONS,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifierError {
    #[error("empty event")]
    EmptyEvent,
    #[error("{cases} cases but {responses} responses")]
    LengthMismatch { cases: usize, responses: usize },
    #[error("predictions line {line}: {message}")]
    Predictions { line: usize, message: String },
}

/// The compliance-question output line, verbatim.
pub const COMPLIANCE_OUTPUT_LINE: &str = "Choice: [A. Prohibited | B. Permitted | C. Not related ]";

/// Renders the three-option compliance prompt for `event` under `domain`.
pub fn render_compliance_prompt(domain: Law, event: &str) -> String {
    let d = domain.display_name();
    format!(
        "Determine the relationship between the provided event and the {d} regulations. \
         You have three options for your conclusion:\n\
         (A) The event is prohibited by {d}.\n\
         (B) The event is permitted by {d}.\n\
         (C) The event is not related to {d}.\n\
         \n\
         Event:\n\
         \n\
         {event}\n\
         \n\
         Output Format:\n\
         \n\
         {COMPLIANCE_OUTPUT_LINE}"
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceQuestion {
    pub case_id: String,
    pub domain: Law,
    pub prompt: String,
    pub option_set: Vec<char>,
    pub gold: ComplianceVerdict,
    /// Annotation used for the CI consistency check.
    #[serde(default)]
    pub annotation: CaseAnnotation,
}

pub fn build_compliance_question(case: &LegalCase) -> Result<ComplianceQuestion, VerifierError> {
    if case.narrative.trim().is_empty() {
        return Err(VerifierError::EmptyEvent);
    }
    Ok(ComplianceQuestion {
        case_id: case.id.clone(),
        domain: case.domain,
        prompt: render_compliance_prompt(case.domain, &case.narrative),
        option_set: COMPLIANCE_OPTIONS.to_vec(),
        gold: case.gold,
        annotation: case.annotation.clone(),
    })
}

/// A problem found while checking a response. Serialized as its message.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Issue {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Choice(#[from] ChoiceError),
    #[error("CI block {key} {found:?} contradicts annotated `{expected}`")]
    CiMismatch { key: &'static str, expected: String, found: Vec<String> },
}

impl Serialize for Issue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Format-level result of a response, independent of any gold label.
#[derive(Debug, Clone, PartialEq)]
pub struct FormatCheck {
    pub format_ok: bool,
    pub errors: Vec<Issue>,
    pub choice: Option<ParsedChoice>,
    pub ci: Option<CiBlock>,
}

/// Strict mode needs the full trajectory layout plus a choice in the solution
/// block. Lenient mode needs only an extractable choice: from the solution
/// block when the (CI-optional) layout parses, otherwise from the whole text.
pub fn check_format(response: &str, mode: ParseMode) -> FormatCheck {
    let mut errors: Vec<Issue> = Vec::new();
    let (choice, ci) = match (parse_with(response, mode), mode) {
        (Ok(traj), _) => match extract_compliance_choice(&traj.solution) {
            Ok(c) => (Some(c), traj.ci_block),
            Err(e) => {
                errors.push(e.into());
                (None, traj.ci_block)
            }
        },
        (Err(errs), ParseMode::Strict) => {
            errors.extend(errs.into_iter().map(Issue::from));
            (None, None)
        }
        (Err(_), ParseMode::Lenient) => match extract_compliance_choice(response) {
            Ok(c) => (Some(c), None),
            Err(e) => {
                errors.push(e.into());
                (None, None)
            }
        },
    };
    FormatCheck { format_ok: errors.is_empty() && choice.is_some(), errors, choice, ci }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub format_ok: bool,
    pub errors: Vec<Issue>,
    pub choice: Option<ParsedChoice>,
    pub ci_extracted: Option<CiBlock>,
    /// `None` when there is no CI block to compare against the annotation.
    pub ci_consistent: Option<bool>,
    pub correct: bool,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierConfig {
    /// When set, a CI block that contradicts the case annotation earns 0.
    #[serde(default)]
    pub ci_gates_reward: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Verifier {
    pub config: VerifierConfig,
}

impl Verifier {
    pub fn new(config: VerifierConfig) -> Self {
        Self { config }
    }

    pub fn verify(&self, response: &str, question: &ComplianceQuestion, strict_ci: bool) -> VerificationReport {
        let mode = if strict_ci { ParseMode::Strict } else { ParseMode::Lenient };
        let FormatCheck { format_ok, mut errors, choice, ci } = check_format(response, mode);

        let mismatches = ci.as_ref().map(|b| ci_mismatches(b, &question.annotation));
        let ci_consistent = mismatches.as_ref().map(Vec::is_empty);
        errors.extend(mismatches.into_iter().flatten());

        let matches_gold = choice.and_then(|c| c.verdict) == Some(question.gold);
        let gated = self.config.ci_gates_reward && ci_consistent == Some(false);
        let correct = format_ok && matches_gold && !gated;
        VerificationReport {
            format_ok,
            errors,
            choice,
            ci_extracted: ci,
            ci_consistent,
            correct,
            reward: if correct { 1.0 } else { 0.0 },
        }
    }

    /// Lenient-mode reward for one response: 1.0 when the extracted choice matches gold, else 0.0.
    pub fn reward(&self, case: &LegalCase, response: &str) -> f64 {
        match build_compliance_question(case) {
            Ok(q) => self.verify(response, &q, false).reward,
            Err(_) => 0.0,
        }
    }

    pub fn batch_reward<S: AsRef<str> + Sync>(
        &self,
        cases: &[&LegalCase],
        responses: &[S],
    ) -> Result<BatchReward, VerifierError> {
        if cases.len() != responses.len() {
            return Err(VerifierError::LengthMismatch { cases: cases.len(), responses: responses.len() });
        }
        let scored: Vec<(f64, bool)> = cases
            .par_iter()
            .zip(responses.par_iter())
            .map(|(case, resp)| {
                let resp = resp.as_ref();
                let format_ok = check_format(resp, ParseMode::Lenient).format_ok;
                (self.reward(case, resp), format_ok)
            })
            .collect();
        let rewards: Vec<f64> = scored.iter().map(|s| s.0).collect();
        let format_failures = scored.iter().filter(|s| !s.1).count();
        Ok(BatchReward { mean_reward: mean(&rewards), rewards, format_failures })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReward {
    pub rewards: Vec<f64>,
    /// Absent for an empty batch.
    pub mean_reward: Option<f64>,
    pub format_failures: usize,
}

pub(crate) fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

fn ci_mismatches(block: &CiBlock, ann: &CaseAnnotation) -> Vec<Issue> {
    let fields: [(&'static str, &Option<String>); 3] =
        [("sender", &ann.sender), ("subject", &ann.subject), ("recipient", &ann.recipient)];
    let mut out = Vec::new();
    for (key, expected) in fields {
        let (Some(expected), Some(value)) = (expected, block.get(key)) else {
            continue;
        };
        let want = fold_whitespace(expected).to_lowercase();
        let found = value.values();
        if !found.iter().any(|v| fold_whitespace(v).to_lowercase() == want) {
            out.push(Issue::CiMismatch {
                key,
                expected: expected.clone(),
                found: found.into_iter().map(str::to_string).collect(),
            });
        }
    }
    out
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub case_id: String,
    pub response: String,
}

/// Parses `case_id<TAB>response` lines. The response escapes backslash, tab,
/// newline and carriage return as `\\`, `\t`, `\n`, `\r`. Blank lines are skipped.
pub fn parse_predictions(src: &str) -> Result<Vec<Prediction>, VerifierError> {
    let mut out = Vec::new();
    for (n, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: &str| VerifierError::Predictions { line: n + 1, message: message.to_string() };
        let (id, escaped) = line.split_once('\t').ok_or_else(|| err("expected `case_id<TAB>response`"))?;
        if id.is_empty() {
            return Err(err("empty case id"));
        }
        let response = unescape(escaped).ok_or_else(|| err("dangling escape"))?;
        out.push(Prediction { case_id: id.to_string(), response });
    }
    Ok(out)
}

pub fn format_predictions(preds: &[Prediction]) -> String {
    let mut out = String::new();
    for p in preds {
        let _ = writeln!(out, "{}\t{}", p.case_id, escape(&p.response));
    }
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            't' => out.push('\t'),
            'n' => out.push('\n'),
            'r' => out.push('\r'),
            other => out.push(other),
        }
    }
    Some(out)
}
