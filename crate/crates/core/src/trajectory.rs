//! Reasoning-trajectory format: a thought block, a CI block and a solution block.
//!
//! Canonical layout (no trailing newline):
//!
//! ```text
//! <|begin_of_thought|>
//! {thought}
//! <|end_of_thought|>
//! <CI>
//! {key: ['v1', 'v2'] or key: value, one entry per line}
//! </CI>
//! <|begin_of_solution|>
//! {solution}
//! <|end_of_solution|>
//! ```
//!
//! The parser also accepts `<\CI>` as the closing CI tag and CI entries written
//! back to back without separators (`sender: ['x']recipient: ['y']`).

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::ci::ComplianceVerdict;

pub const BEGIN_THOUGHT: &str = "<|begin_of_thought|>";
pub const END_THOUGHT: &str = "<|end_of_thought|>";
pub const CI_OPEN: &str = "<CI>";
pub const CI_CLOSE: &str = "</CI>";
/// Alternate closing tag accepted on input and canonicalized to [`CI_CLOSE`].
pub const CI_CLOSE_BACKSLASH: &str = "<\\CI>";
pub const BEGIN_SOLUTION: &str = "<|begin_of_solution|>";
pub const END_SOLUTION: &str = "<|end_of_solution|>";

pub const COMPLIANCE_OPTIONS: [char; 3] = ['A', 'B', 'C'];
pub const MCQ_OPTIONS: [char; 4] = ['A', 'B', 'C', 'D'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Delimiter {
    BeginThought,
    EndThought,
    CiOpen,
    CiClose,
    BeginSolution,
    EndSolution,
}

impl Delimiter {
    pub const ORDER: [Delimiter; 6] = [
        Delimiter::BeginThought,
        Delimiter::EndThought,
        Delimiter::CiOpen,
        Delimiter::CiClose,
        Delimiter::BeginSolution,
        Delimiter::EndSolution,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Delimiter::BeginThought => BEGIN_THOUGHT,
            Delimiter::EndThought => END_THOUGHT,
            Delimiter::CiOpen => CI_OPEN,
            Delimiter::CiClose => CI_CLOSE,
            Delimiter::BeginSolution => BEGIN_SOLUTION,
            Delimiter::EndSolution => END_SOLUTION,
        }
    }

    fn spellings(self) -> &'static [&'static str] {
        match self {
            Delimiter::CiClose => &[CI_CLOSE, CI_CLOSE_BACKSLASH],
            Delimiter::BeginThought => &[BEGIN_THOUGHT],
            Delimiter::EndThought => &[END_THOUGHT],
            Delimiter::CiOpen => &[CI_OPEN],
            Delimiter::BeginSolution => &[BEGIN_SOLUTION],
            Delimiter::EndSolution => &[END_SOLUTION],
        }
    }

    fn is_ci(self) -> bool {
        matches!(self, Delimiter::CiOpen | Delimiter::CiClose)
    }
}

impl fmt::Display for Delimiter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("missing delimiter {0}")]
    MissingDelimiter(Delimiter),
    #[error("delimiter {0} out of order")]
    OutOfOrder(Delimiter),
    #[error("delimiter {0} appears more than once")]
    DuplicateDelimiter(Delimiter),
    #[error("malformed CI entry: {0}")]
    MalformedCiEntry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// All six delimiters are required.
    #[default]
    Strict,
    /// The CI block may be omitted entirely.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CiValue {
    List(Vec<String>),
    Scalar(String),
}

impl CiValue {
    pub fn values(&self) -> Vec<&str> {
        match self {
            CiValue::List(v) => v.iter().map(String::as_str).collect(),
            CiValue::Scalar(s) => vec![s.as_str()],
        }
    }
}

/// Ordered key → value map from a CI block. Keys are unique.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CiBlock {
    entries: Vec<(String, CiValue)>,
}

impl CiBlock {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces `key`, keeping its original position on replace.
    pub fn insert(&mut self, key: impl Into<String>, value: CiValue) {
        let key = key.into();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn with_list<I, S>(mut self, key: &str, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.insert(key, CiValue::List(values.into_iter().map(Into::into).collect()));
        self
    }

    pub fn with_scalar(mut self, key: &str, value: impl Into<String>) -> Self {
        self.insert(key, CiValue::Scalar(value.into()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&CiValue> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn values(&self, key: &str) -> Vec<&str> {
        self.get(key).map(CiValue::values).unwrap_or_default()
    }

    pub fn entries(&self) -> &[(String, CiValue)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn render(&self) -> String {
        let mut out = String::new();
        for (i, (k, v)) in self.entries.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(k);
            out.push_str(": ");
            match v {
                CiValue::Scalar(s) => out.push_str(s),
                CiValue::List(items) => {
                    out.push('[');
                    for (j, item) in items.iter().enumerate() {
                        if j > 0 {
                            out.push_str(", ");
                        }
                        out.push('\'');
                        for ch in item.chars() {
                            match ch {
                                '\\' => out.push_str("\\\\"),
                                '\'' => out.push_str("\\'"),
                                '\n' => out.push_str("\\n"),
                                '\r' => out.push_str("\\r"),
                                c => out.push(c),
                            }
                        }
                        out.push('\'');
                    }
                    out.push(']');
                }
            }
        }
        out
    }
}

impl Serialize for CiBlock {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for (k, v) in &self.entries {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, Eq)]
pub struct ReasoningTrajectory {
    pub thought: String,
    pub ci_block: Option<CiBlock>,
    pub solution: String,
    /// Text the trajectory was parsed from. Not part of equality.
    pub raw: String,
}

impl PartialEq for ReasoningTrajectory {
    fn eq(&self, other: &Self) -> bool {
        self.thought == other.thought && self.ci_block == other.ci_block && self.solution == other.solution
    }
}

impl ReasoningTrajectory {
    /// Builds a trajectory; block contents are trimmed as the parser would trim them.
    pub fn new(thought: impl Into<String>, ci_block: CiBlock, solution: impl Into<String>) -> Self {
        let mut t = Self {
            thought: thought.into().trim().to_string(),
            ci_block: Some(ci_block),
            solution: solution.into().trim().to_string(),
            raw: String::new(),
        };
        t.raw = t.serialize();
        t
    }

    /// Canonical text. A missing CI block is emitted as an empty one.
    pub fn serialize(&self) -> String {
        let ci = self.ci_block.as_ref().map(CiBlock::render).unwrap_or_default();
        format!(
            "{BEGIN_THOUGHT}\n{}\n{END_THOUGHT}\n{CI_OPEN}\n{ci}\n{CI_CLOSE}\n{BEGIN_SOLUTION}\n{}\n{END_SOLUTION}",
            self.thought, self.solution
        )
    }
}

pub fn serialize(traj: &ReasoningTrajectory) -> String {
    traj.serialize()
}

/// Strict parse: every delimiter exactly once and in order.
pub fn parse(text: &str) -> Result<ReasoningTrajectory, Vec<FormatError>> {
    parse_with(text, ParseMode::Strict)
}

pub fn parse_with(text: &str, mode: ParseMode) -> Result<ReasoningTrajectory, Vec<FormatError>> {
    let mut spans: Vec<(Delimiter, usize, usize)> = Vec::with_capacity(6);
    let skip_ci = mode == ParseMode::Lenient
        && Delimiter::ORDER
            .iter()
            .filter(|d| d.is_ci())
            .all(|d| occurrences(text, *d).is_empty());
    for d in Delimiter::ORDER {
        if skip_ci && d.is_ci() {
            continue;
        }
        let occ = occurrences(text, d);
        match occ.len() {
            0 => return Err(vec![FormatError::MissingDelimiter(d)]),
            1 => spans.push((d, occ[0].0, occ[0].1)),
            _ => return Err(vec![FormatError::DuplicateDelimiter(d)]),
        }
    }
    for w in spans.windows(2) {
        if w[1].1 < w[0].2 {
            return Err(vec![FormatError::OutOfOrder(w[1].0)]);
        }
    }
    let between = |open: Delimiter, close: Delimiter| -> &str {
        let start = spans.iter().find(|s| s.0 == open).map(|s| s.2).unwrap_or(0);
        let end = spans.iter().find(|s| s.0 == close).map(|s| s.1).unwrap_or(0);
        &text[start..end]
    };
    let thought = between(Delimiter::BeginThought, Delimiter::EndThought).trim().to_string();
    let solution = between(Delimiter::BeginSolution, Delimiter::EndSolution).trim().to_string();
    let ci_block = if skip_ci {
        None
    } else {
        Some(parse_ci_block(between(Delimiter::CiOpen, Delimiter::CiClose))?)
    };
    Ok(ReasoningTrajectory { thought, ci_block, solution, raw: text.to_string() })
}

/// Byte spans of every occurrence of any spelling of `d`.
fn occurrences(text: &str, d: Delimiter) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = d
        .spellings()
        .iter()
        .flat_map(|s| text.match_indices(s).map(|(i, m)| (i, i + m.len())))
        .collect();
    out.sort_unstable();
    out
}

/// Parses CI entries of the form `key: ['a', 'b']` or `key: value`.
pub fn parse_ci_block(src: &str) -> Result<CiBlock, Vec<FormatError>> {
    let mut block = CiBlock::new();
    let mut errors = Vec::new();
    let mut rest = src;
    loop {
        rest = rest.trim_start();
        if rest.is_empty() {
            break;
        }
        match parse_entry(rest) {
            Ok((key, value, tail)) => {
                if block.get(&key).is_some() {
                    errors.push(FormatError::MalformedCiEntry(format!("duplicate key `{key}`")));
                } else {
                    block.entries.push((key, value));
                }
                rest = tail;
            }
            Err(()) => {
                let line_end = rest.find('\n').unwrap_or(rest.len());
                errors.push(FormatError::MalformedCiEntry(rest[..line_end].trim().to_string()));
                rest = &rest[line_end..];
            }
        }
    }
    if errors.is_empty() {
        Ok(block)
    } else {
        Err(errors)
    }
}

fn parse_entry(src: &str) -> Result<(String, CiValue, &str), ()> {
    let key_len = src
        .char_indices()
        .find(|(i, c)| !(c.is_ascii_alphanumeric() || *c == '_') || (*i == 0 && c.is_ascii_digit()))
        .map(|(i, _)| i)
        .unwrap_or(src.len());
    if key_len == 0 {
        return Err(());
    }
    let key = &src[..key_len];
    let after_key = src[key_len..].trim_start_matches([' ', '\t']);
    let after_colon = after_key.strip_prefix(':').ok_or(())?;
    let value_src = after_colon.trim_start_matches([' ', '\t']);
    if let Some(list_src) = value_src.strip_prefix('[') {
        let (items, tail) = parse_list(list_src)?;
        Ok((key.to_string(), CiValue::List(items), tail))
    } else {
        let end = value_src.find('\n').unwrap_or(value_src.len());
        let value = value_src[..end].trim();
        if value.is_empty() {
            return Err(());
        }
        Ok((key.to_string(), CiValue::Scalar(value.to_string()), &value_src[end..]))
    }
}

/// Parses list items after the opening `[`; returns the items and the text after `]`.
fn parse_list(src: &str) -> Result<(Vec<String>, &str), ()> {
    let mut items = Vec::new();
    let mut rest = src;
    loop {
        rest = rest.trim_start();
        if let Some(tail) = rest.strip_prefix(']') {
            return Ok((items, tail));
        }
        let mut chars = rest.char_indices();
        let item;
        match chars.next() {
            Some((_, q @ ('\'' | '"'))) => {
                let mut buf = String::new();
                let mut end = None;
                let mut escaped = false;
                for (i, c) in chars {
                    if escaped {
                        buf.push(match c {
                            'n' => '\n',
                            'r' => '\r',
                            't' => '\t',
                            other => other,
                        });
                        escaped = false;
                    } else if c == '\\' {
                        escaped = true;
                    } else if c == q {
                        end = Some(i + c.len_utf8());
                        break;
                    } else {
                        buf.push(c);
                    }
                }
                let end = end.ok_or(())?;
                item = buf;
                rest = &rest[end..];
            }
            Some(_) => {
                let end = rest.find([',', ']']).ok_or(())?;
                item = rest[..end].trim().to_string();
                if item.contains('\n') {
                    return Err(());
                }
                rest = &rest[end..];
            }
            None => return Err(()),
        }
        items.push(item);
        rest = rest.trim_start();
        if let Some(tail) = rest.strip_prefix(',') {
            rest = tail;
        } else if !rest.starts_with(']') {
            return Err(());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedChoice {
    pub letter: char,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<ComplianceVerdict>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChoiceError {
    #[error("no `Choice:` line found")]
    NotFound,
    #[error("choice letter {0} outside the option set")]
    LetterOutsideOptionSet(char),
}

fn choice_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"Choice:(?:\*\*)?[ \t]*(?:\*\*)?[ \t]*([A-Z])\b").expect("valid regex"))
}

/// Finds the last `Choice: X` in `solution` and checks `X` against `options`.
pub fn extract_choice(solution: &str, options: &[char]) -> Result<ParsedChoice, ChoiceError> {
    let caps = choice_regex().captures_iter(solution).last().ok_or(ChoiceError::NotFound)?;
    let letter = caps[1].chars().next().expect("one letter captured");
    if !options.contains(&letter) {
        return Err(ChoiceError::LetterOutsideOptionSet(letter));
    }
    Ok(ParsedChoice { letter, verdict: None })
}

/// [`extract_choice`] over the A/B/C compliance options, with the verdict filled in.
pub fn extract_compliance_choice(solution: &str) -> Result<ParsedChoice, ChoiceError> {
    let mut c = extract_choice(solution, &COMPLIANCE_OPTIONS)?;
    c.verdict = ComplianceVerdict::from_choice(c.letter).ok();
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_round_trip() {
        let t = ReasoningTrajectory::new("t", CiBlock::new().with_list("sender", ["x"]), "Choice: B");
        let text = t.serialize();
        assert_eq!(
            text,
            "<|begin_of_thought|>\nt\n<|end_of_thought|>\n<CI>\nsender: ['x']\n</CI>\n<|begin_of_solution|>\nChoice: B\n<|end_of_solution|>"
        );
        assert_eq!(parse(&text).unwrap(), t);
    }

    #[test]
    fn empty_thought() {
        let t = ReasoningTrajectory::new("", CiBlock::new(), "Choice: A");
        let text = t.serialize();
        assert!(text.starts_with("<|begin_of_thought|>\n\n<|end_of_thought|>"));
        let back = parse(&text).unwrap();
        assert_eq!(back.thought, "");
        assert_eq!(back, t);
    }

    #[test]
    fn no_delimiters() {
        assert_eq!(
            parse("just some words").unwrap_err(),
            vec![FormatError::MissingDelimiter(Delimiter::BeginThought)]
        );
    }

    #[test]
    fn delimiter_errors() {
        let good = ReasoningTrajectory::new("a", CiBlock::new(), "Choice: A").serialize();
        let dup = format!("{good}{END_SOLUTION}");
        assert_eq!(parse(&dup).unwrap_err(), vec![FormatError::DuplicateDelimiter(Delimiter::EndSolution)]);

        let swapped = "<|begin_of_thought|>a<|end_of_thought|></CI>x<CI><|begin_of_solution|>s<|end_of_solution|>";
        assert_eq!(parse(swapped).unwrap_err(), vec![FormatError::OutOfOrder(Delimiter::CiClose)]);

        let no_ci = "<|begin_of_thought|>a<|end_of_thought|><|begin_of_solution|>Choice: A<|end_of_solution|>";
        assert_eq!(parse(no_ci).unwrap_err(), vec![FormatError::MissingDelimiter(Delimiter::CiOpen)]);
        let lenient = parse_with(no_ci, ParseMode::Lenient).unwrap();
        assert!(lenient.ci_block.is_none());
        assert_eq!(lenient.solution, "Choice: A");

        let half_ci = "<|begin_of_thought|>a<|end_of_thought|><CI>x: 1<|begin_of_solution|>s<|end_of_solution|>";
        assert_eq!(
            parse_with(half_ci, ParseMode::Lenient).unwrap_err(),
            vec![FormatError::MissingDelimiter(Delimiter::CiClose)]
        );
    }

    #[test]
    fn backslash_close_tag() {
        let text = "<|begin_of_thought|>\nt\n<|end_of_thought|>\n<CI>\nsender: ['x']\n<\\CI>\n<|begin_of_solution|>\nChoice: B\n<|end_of_solution|>";
        let t = parse(text).unwrap();
        assert_eq!(t.ci_block.as_ref().unwrap().values("sender"), ["x"]);
        assert!(t.serialize().contains("\n</CI>\n"));
        let both = text.replace("<\\CI>", "<\\CI></CI>");
        assert_eq!(parse(&both).unwrap_err(), vec![FormatError::DuplicateDelimiter(Delimiter::CiClose)]);
    }

    #[test]
    fn ci_entries_back_to_back() {
        let block = parse_ci_block(
            "sender: ['Real Estate Company']recipient: ['Other Entities']subject: ['Individuals']information_type: ['Personal Data']purpose: Operations",
        )
        .unwrap();
        assert_eq!(block.values("sender"), ["Real Estate Company"]);
        assert_eq!(block.values("recipient"), ["Other Entities"]);
        assert_eq!(block.values("information_type"), ["Personal Data"]);
        assert_eq!(block.get("purpose"), Some(&CiValue::Scalar("Operations".into())));
        let keys: Vec<&str> = block.entries().iter().map(|(k, _)| k.as_str()).collect();
        assert_eq!(keys, ["sender", "recipient", "subject", "information_type", "purpose"]);
    }

    #[test]
    fn ci_list_syntax() {
        let b = parse_ci_block("a: ['x, y', \"it's\", 'esc\\'d']\nb: []\nc: [None, two ]").unwrap();
        assert_eq!(b.values("a"), ["x, y", "it's", "esc'd"]);
        assert!(b.values("b").is_empty());
        assert_eq!(b.values("c"), ["None", "two"]);
    }

    #[test]
    fn malformed_ci() {
        let errs = parse_ci_block("sender ['x']\nrecipient: ['y'\nsubject: ['z']\nsubject: ['w']").unwrap_err();
        assert_eq!(errs.len(), 3, "{errs:?}");
        assert_eq!(errs[0], FormatError::MalformedCiEntry("sender ['x']".into()));
        assert!(matches!(&errs[2], FormatError::MalformedCiEntry(m) if m.contains("duplicate")));
        assert!(parse_ci_block("key:   \n").is_err());
    }

    #[test]
    fn choices() {
        let c = extract_choice("Choice: A. Prohibited", &COMPLIANCE_OPTIONS).unwrap();
        assert_eq!(c.letter, 'A');
        assert_eq!(extract_choice("no decision text", &COMPLIANCE_OPTIONS), Err(ChoiceError::NotFound));
        assert_eq!(extract_choice("Choice: D", &COMPLIANCE_OPTIONS), Err(ChoiceError::LetterOutsideOptionSet('D')));
        assert_eq!(extract_choice("Choice: D", &MCQ_OPTIONS).unwrap().letter, 'D');
        // the last commitment wins
        let c = extract_compliance_choice("Maybe Choice: B? No.\nChoice: C. Not related").unwrap();
        assert_eq!((c.letter, c.verdict), ('C', Some(ComplianceVerdict::NotApplicable)));
        // the echoed format line is not a commitment
        assert_eq!(
            extract_choice("Choice: [A. Prohibited | B. Permitted | C. Not related ]", &COMPLIANCE_OPTIONS),
            Err(ChoiceError::NotFound)
        );
        assert_eq!(extract_choice("Choice: Answer pending", &COMPLIANCE_OPTIONS), Err(ChoiceError::NotFound));
        assert_eq!(extract_choice("**Choice:** B", &COMPLIANCE_OPTIONS).unwrap().letter, 'B');
        assert_eq!(extract_choice("Choice:A", &COMPLIANCE_OPTIONS).unwrap().letter, 'A');
    }

    #[test]
    fn ci_block_json_keeps_order() {
        let b = CiBlock::new().with_list("z", ["1"]).with_scalar("a", "x");
        assert_eq!(serde_json::to_string(&b).unwrap(), r#"{"z":["1"],"a":"x"}"#);
    }
}
