//! Contextual-understanding multiple-choice questions.
//!
//! Each item asks for one CI parameter of a case (sender, recipient, subject
//! or information attribute). The three distractors are the candidates from a
//! label pool whose embeddings are most cosine-similar to the correct answer.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cases::LegalCase;
use crate::hashing::{fnv1a, fold_whitespace};
use crate::trajectory::MCQ_OPTIONS;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum McqError {
    #[error("case `{case_id}` has no {category} annotation")]
    MissingAnnotation { case_id: String, category: Category },
    #[error("pool has {available} usable distractors, need 3")]
    PoolTooSmall { available: usize },
    #[error("unknown item id `{0}`")]
    UnknownItem(String),
    #[error("answer `{0}` is not one of A-D")]
    BadLetter(char),
    #[error("no items to grade")]
    NoItems,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    Sender,
    Recipient,
    Subject,
    Attribute,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Sender, Category::Recipient, Category::Subject, Category::Attribute];

    /// Phrase used in "What is the <phrase> in the event?".
    pub fn phrase(self) -> &'static str {
        match self {
            Category::Sender => "sender",
            Category::Recipient => "recipient",
            Category::Subject => "subject",
            Category::Attribute => "information type",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sender" => Some(Category::Sender),
            "recipient" => Some(Category::Recipient),
            "subject" => Some(Category::Subject),
            "attribute" | "information_type" | "info" => Some(Category::Attribute),
            _ => None,
        }
    }

    /// The annotated correct answer for this category, if any.
    pub fn answer_of(self, case: &LegalCase) -> Option<&str> {
        let a = &case.annotation;
        match self {
            Category::Sender => a.sender.as_deref(),
            Category::Recipient => a.recipient.as_deref(),
            Category::Subject => a.subject.as_deref(),
            Category::Attribute => a.information_type.as_deref().or_else(|| a.attributes.iter().next().map(String::as_str)),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Sender => "sender",
            Category::Recipient => "recipient",
            Category::Subject => "subject",
            Category::Attribute => "attribute",
        })
    }
}

/// Text embedder. Must be deterministic with a fixed output dimension.
pub trait EmbeddingProvider {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Hashed character-trigram bag, L2-normalized.
///
/// Text is lowercased and padded with one space on each side before the
/// trigrams are taken, so word starts and ends contribute their own features.
#[derive(Debug, Clone, Copy)]
pub struct TrigramEmbedder {
    dimension: usize,
}

impl TrigramEmbedder {
    pub const DEFAULT_DIMENSION: usize = 256;

    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }
}

impl Default for TrigramEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIMENSION)
    }
}

impl EmbeddingProvider for TrigramEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        let padded: Vec<char> = std::iter::once(' ')
            .chain(text.to_lowercase().chars())
            .chain(std::iter::once(' '))
            .collect();
        let mut buf = [0u8; 12];
        for w in padded.windows(3) {
            let mut len = 0;
            for c in w {
                len += c.encode_utf8(&mut buf[len..]).len();
            }
            let bucket = (fnv1a(&buf[..len]) % self.dimension as u64) as usize;
            v[bucket] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Picks the `k` candidates most similar to `answer`.
///
/// Candidates equal to the answer after whitespace folding are dropped, as are
/// repeated candidates. Ties in similarity break on the candidate string.
pub fn select_distractors<'a, P: EmbeddingProvider + ?Sized>(
    answer: &str,
    pool: &[&'a str],
    provider: &P,
    k: usize,
) -> Result<Vec<&'a str>, McqError> {
    let folded_answer = fold_whitespace(answer);
    let mut seen = HashSet::new();
    let candidates: Vec<&str> = pool
        .iter()
        .copied()
        .filter(|c| {
            let f = fold_whitespace(c);
            !f.is_empty() && f != folded_answer && seen.insert(f)
        })
        .collect();
    if candidates.len() < k {
        return Err(McqError::PoolTooSmall { available: candidates.len() });
    }
    let target = provider.embed(answer);
    let mut scored: Vec<(f64, &str)> = candidates.into_iter().map(|c| (cosine(&target, &provider.embed(c)), c)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    Ok(scored.into_iter().take(k).map(|(_, c)| c).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqItem {
    pub id: String,
    pub case_id: String,
    pub category: Category,
    /// The full rendered prompt, including the case narrative and options.
    pub question: String,
    pub options: Vec<String>,
    pub answer_index: usize,
}

impl McqItem {
    pub fn answer_letter(&self) -> char {
        MCQ_OPTIONS[self.answer_index]
    }
}

pub fn render_mcq_prompt(category: Category, event: &str, options: &[String]) -> String {
    let mut s = format!(
        "Given the following question and four candidate answers (A, B, C and D), choose the best answer.\n\
         \n\
         Question: What is the {} in the event?\n\
         \n\
         {event}\n\
         \n",
        category.phrase()
    );
    for (letter, opt) in MCQ_OPTIONS.iter().zip(options) {
        s.push_str(&format!("{letter}. {opt}\n"));
    }
    s.push_str("\nOutput Format:\nChoice: [ A | B | C | D ]");
    s
}

/// Builds one MCQ. The option set depends only on the case, pool and
/// provider; `seed` only permutes the options.
pub fn generate<P: EmbeddingProvider + ?Sized>(
    case: &LegalCase,
    category: Category,
    pool: &[&str],
    provider: &P,
    seed: u64,
) -> Result<McqItem, McqError> {
    let answer = category
        .answer_of(case)
        .ok_or_else(|| McqError::MissingAnnotation { case_id: case.id.clone(), category })?;
    let distractors = select_distractors(answer, pool, provider, 3)?;
    let mut options: Vec<String> = std::iter::once(answer)
        .chain(distractors)
        .map(str::to_string)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    options.shuffle(&mut rng);
    let answer_index = options.iter().position(|o| o == answer).expect("answer is among options");
    Ok(McqItem {
        id: format!("{}:{}", case.id, category),
        case_id: case.id.clone(),
        category,
        question: render_mcq_prompt(category, &case.narrative, &options),
        options,
        answer_index,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub correct: usize,
    pub total: usize,
    /// `None` when the category has no items.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeReport {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub per_category: BTreeMap<Category, CategoryScore>,
}

/// Grades answer letters against items. Items without an answer count as wrong.
pub fn grade(items: &[McqItem], answers: &HashMap<String, char>) -> Result<GradeReport, McqError> {
    if items.is_empty() {
        return Err(McqError::NoItems);
    }
    let by_id: HashMap<&str, &McqItem> = items.iter().map(|i| (i.id.as_str(), i)).collect();
    for (id, letter) in answers {
        if !by_id.contains_key(id.as_str()) {
            return Err(McqError::UnknownItem(id.clone()));
        }
        if !MCQ_OPTIONS.contains(letter) {
            return Err(McqError::BadLetter(*letter));
        }
    }
    let mut per_category: BTreeMap<Category, CategoryScore> =
        Category::ALL.iter().map(|&c| (c, CategoryScore::default())).collect();
    let mut correct = 0;
    for item in items {
        let hit = answers.get(&item.id) == Some(&item.answer_letter());
        let score = per_category.get_mut(&item.category).expect("all categories present");
        score.total += 1;
        if hit {
            score.correct += 1;
            correct += 1;
        }
    }
    for s in per_category.values_mut() {
        s.accuracy = (s.total > 0).then(|| s.correct as f64 / s.total as f64);
    }
    Ok(GradeReport { accuracy: correct as f64 / items.len() as f64, correct, total: items.len(), per_category })
}
