//! Contextual-integrity norms and flow evaluation.
//!
//! A [`Context`] fixes a vocabulary of roles and information types and an
//! ordered list of [`TransmissionPrinciple`]s. An [`InformationFlow`] is a list
//! of concrete (sender, subject, recipient, information) tuples, each carrying
//! its own condition tags. A flow complies when every tuple is covered by a
//! permitting principle whose conditions hold; prohibiting principles take
//! priority, and a flow that no principle touches is out of scope.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::regulation::RegulationPath;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CiError {
    #[error("unknown role `{0}`")]
    UnknownRole(String),
    #[error("unknown information type `{0}`")]
    UnknownInfoType(String),
    #[error("empty identifier in {0}")]
    EmptyId(&'static str),
    #[error("duplicate {kind} id `{id}`")]
    Duplicate { kind: &'static str, id: String },
    #[error("principle `{0}` is vacuous: every matcher is a wildcard and it has no conditions")]
    VacuousPrinciple(String),
    #[error("unknown choice letter `{0}`")]
    UnknownChoice(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "GDPR")]
    Gdpr,
    #[serde(rename = "HIPAA")]
    Hipaa,
    #[serde(rename = "AI_ACT")]
    AiAct,
    #[serde(rename = "OTHER")]
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Role {
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub attributes: BTreeSet<String>,
}

impl Role {
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Self {
        Self { id: id.into(), label: label.into(), attributes: BTreeSet::new() }
    }

    pub fn with_attributes<I, S>(mut self, attrs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.attributes.extend(attrs.into_iter().map(Into::into));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InformationType {
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub sensitivity_tags: BTreeSet<String>,
}

impl InformationType {
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Self {
        Self { id: id.into(), label: label.into(), sensitivity_tags: BTreeSet::new() }
    }

    pub fn with_tags<I, S>(mut self, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.sensitivity_tags.extend(tags.into_iter().map(Into::into));
        self
    }
}

/// One concrete transfer: `sender` transmits `subject`'s `info` to `recipient`.
/// All four fields are ids into the enclosing context's vocabularies.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowTuple {
    pub sender: String,
    pub subject: String,
    pub recipient: String,
    pub info: String,
}

impl FlowTuple {
    pub fn new(
        sender: impl Into<String>,
        subject: impl Into<String>,
        recipient: impl Into<String>,
        info: impl Into<String>,
    ) -> Self {
        Self {
            sender: sender.into(),
            subject: subject.into(),
            recipient: recipient.into(),
            info: info.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Effect {
    Permit,
    Prohibit,
}

/// Matches a role by exact id, by attribute tag, or unconditionally.
///
/// JSON: `{"id": "hospital"}`, `{"tag": "covered-entity"}` or `"any"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolePattern {
    Id(String),
    Tag(String),
    Any,
}

impl RolePattern {
    pub fn matches(&self, role: &Role) -> bool {
        match self {
            RolePattern::Id(id) => &role.id == id,
            RolePattern::Tag(tag) => role.attributes.contains(tag),
            RolePattern::Any => true,
        }
    }

    pub fn is_wildcard(&self) -> bool {
        matches!(self, RolePattern::Any)
    }
}

/// Matches an information type by exact id, by sensitivity tag, or unconditionally.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoPattern {
    Id(String),
    Tag(String),
    Any,
}

impl InfoPattern {
    pub fn matches(&self, info: &InformationType) -> bool {
        match self {
            InfoPattern::Id(id) => &info.id == id,
            InfoPattern::Tag(tag) => info.sensitivity_tags.contains(tag),
            InfoPattern::Any => true,
        }
    }

    pub fn is_wildcard(&self) -> bool {
        matches!(self, InfoPattern::Any)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransmissionPrinciple {
    pub id: String,
    pub effect: Effect,
    pub sender_matcher: RolePattern,
    pub subject_matcher: RolePattern,
    pub recipient_matcher: RolePattern,
    pub info_matcher: InfoPattern,
    #[serde(default)]
    pub conditions: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<RegulationPath>,
}

impl TransmissionPrinciple {
    /// Builds a principle with wildcard matchers and no conditions. It is not
    /// valid until at least one matcher or condition is set.
    pub fn new(id: impl Into<String>, effect: Effect) -> Self {
        Self {
            id: id.into(),
            effect,
            sender_matcher: RolePattern::Any,
            subject_matcher: RolePattern::Any,
            recipient_matcher: RolePattern::Any,
            info_matcher: InfoPattern::Any,
            conditions: BTreeSet::new(),
            provenance: None,
        }
    }

    pub fn permit(id: impl Into<String>) -> Self {
        Self::new(id, Effect::Permit)
    }

    pub fn prohibit(id: impl Into<String>) -> Self {
        Self::new(id, Effect::Prohibit)
    }

    pub fn sender(mut self, p: RolePattern) -> Self {
        self.sender_matcher = p;
        self
    }

    pub fn subject(mut self, p: RolePattern) -> Self {
        self.subject_matcher = p;
        self
    }

    pub fn recipient(mut self, p: RolePattern) -> Self {
        self.recipient_matcher = p;
        self
    }

    pub fn info(mut self, p: InfoPattern) -> Self {
        self.info_matcher = p;
        self
    }

    pub fn conditions<I, S>(mut self, conds: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.conditions.extend(conds.into_iter().map(Into::into));
        self
    }

    pub fn validate(&self) -> Result<(), CiError> {
        if self.id.is_empty() {
            return Err(CiError::EmptyId("principle"));
        }
        let all_wild = self.sender_matcher.is_wildcard()
            && self.subject_matcher.is_wildcard()
            && self.recipient_matcher.is_wildcard()
            && self.info_matcher.is_wildcard();
        if all_wild && self.conditions.is_empty() {
            return Err(CiError::VacuousPrinciple(self.id.clone()));
        }
        Ok(())
    }

    /// True when all four matchers accept the resolved tuple. Conditions are not consulted.
    pub fn in_scope(&self, t: &ResolvedTuple<'_>) -> bool {
        self.sender_matcher.matches(t.sender)
            && self.subject_matcher.matches(t.subject)
            && self.recipient_matcher.matches(t.recipient)
            && self.info_matcher.matches(t.info)
    }

    pub fn conditions_hold(&self, conditions: &BTreeSet<String>) -> bool {
        self.conditions.is_subset(conditions)
    }

    /// In scope and every required condition present.
    pub fn fires(&self, t: &ResolvedTuple<'_>, conditions: &BTreeSet<String>) -> bool {
        self.in_scope(t) && self.conditions_hold(conditions)
    }
}

/// A flow tuple whose ids have been looked up in a vocabulary.
#[derive(Debug, Clone, Copy)]
pub struct ResolvedTuple<'a> {
    pub sender: &'a Role,
    pub subject: &'a Role,
    pub recipient: &'a Role,
    pub info: &'a InformationType,
}

/// Role and information-type lookup tables.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    roles: Vec<Role>,
    info_types: Vec<InformationType>,
    role_index: HashMap<String, usize>,
    info_index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(roles: Vec<Role>, info_types: Vec<InformationType>) -> Result<Self, CiError> {
        let mut role_index = HashMap::with_capacity(roles.len());
        for (i, r) in roles.iter().enumerate() {
            if r.id.is_empty() {
                return Err(CiError::EmptyId("role"));
            }
            if role_index.insert(r.id.clone(), i).is_some() {
                return Err(CiError::Duplicate { kind: "role", id: r.id.clone() });
            }
        }
        let mut info_index = HashMap::with_capacity(info_types.len());
        for (i, t) in info_types.iter().enumerate() {
            if t.id.is_empty() {
                return Err(CiError::EmptyId("information type"));
            }
            if info_index.insert(t.id.clone(), i).is_some() {
                return Err(CiError::Duplicate { kind: "information type", id: t.id.clone() });
            }
        }
        Ok(Self { roles, info_types, role_index, info_index })
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn info_types(&self) -> &[InformationType] {
        &self.info_types
    }

    pub fn role(&self, id: &str) -> Result<&Role, CiError> {
        self.role_index
            .get(id)
            .map(|&i| &self.roles[i])
            .ok_or_else(|| CiError::UnknownRole(id.to_string()))
    }

    pub fn info_type(&self, id: &str) -> Result<&InformationType, CiError> {
        self.info_index
            .get(id)
            .map(|&i| &self.info_types[i])
            .ok_or_else(|| CiError::UnknownInfoType(id.to_string()))
    }

    pub fn resolve<'a>(&'a self, t: &FlowTuple) -> Result<ResolvedTuple<'a>, CiError> {
        Ok(ResolvedTuple {
            sender: self.role(&t.sender)?,
            subject: self.role(&t.subject)?,
            recipient: self.role(&t.recipient)?,
            info: self.info_type(&t.info)?,
        })
    }
}

/// Returns true iff some PERMIT principle matches the tuple and its conditions
/// are a subset of `conditions`. PROHIBIT principles are ignored here.
pub fn check_tuple(
    vocab: &Vocabulary,
    tuple: &FlowTuple,
    conditions: &BTreeSet<String>,
    principles: &[TransmissionPrinciple],
) -> Result<bool, CiError> {
    let resolved = vocab.resolve(tuple)?;
    Ok(permitted(&resolved, conditions, principles))
}

fn permitted(
    t: &ResolvedTuple<'_>,
    conditions: &BTreeSet<String>,
    principles: &[TransmissionPrinciple],
) -> bool {
    principles
        .iter()
        .any(|p| p.effect == Effect::Permit && p.fires(t, conditions))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ContextDoc {
    id: String,
    domain: Domain,
    #[serde(default)]
    roles: Vec<Role>,
    #[serde(default)]
    info_types: Vec<InformationType>,
    #[serde(default)]
    principles: Vec<TransmissionPrinciple>,
}

/// A norm context: domain, vocabularies and ordered principles.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ContextDoc", into = "ContextDoc")]
pub struct Context {
    pub id: String,
    pub domain: Domain,
    vocab: Vocabulary,
    principles: Vec<TransmissionPrinciple>,
}

impl TryFrom<ContextDoc> for Context {
    type Error = CiError;

    fn try_from(doc: ContextDoc) -> Result<Self, Self::Error> {
        Context::new(doc.id, doc.domain, doc.roles, doc.info_types, doc.principles)
    }
}

impl From<Context> for ContextDoc {
    fn from(c: Context) -> Self {
        ContextDoc {
            id: c.id,
            domain: c.domain,
            roles: c.vocab.roles,
            info_types: c.vocab.info_types,
            principles: c.principles,
        }
    }
}

impl Context {
    pub fn new(
        id: impl Into<String>,
        domain: Domain,
        roles: Vec<Role>,
        info_types: Vec<InformationType>,
        principles: Vec<TransmissionPrinciple>,
    ) -> Result<Self, CiError> {
        let vocab = Vocabulary::new(roles, info_types)?;
        let mut seen = HashSet::new();
        for p in &principles {
            p.validate()?;
            if !seen.insert(p.id.as_str()) {
                return Err(CiError::Duplicate { kind: "principle", id: p.id.clone() });
            }
        }
        Ok(Self { id: id.into(), domain, vocab, principles })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn principles(&self) -> &[TransmissionPrinciple] {
        &self.principles
    }

    /// Returns a copy of this context with `extra` appended to its principles.
    pub fn with_principles(
        &self,
        extra: impl IntoIterator<Item = TransmissionPrinciple>,
    ) -> Result<Self, CiError> {
        let mut principles = self.principles.clone();
        principles.extend(extra);
        Context::new(
            self.id.clone(),
            self.domain,
            self.vocab.roles.clone(),
            self.vocab.info_types.clone(),
            principles,
        )
    }

    pub fn check_tuple(&self, tuple: &FlowTuple, conditions: &BTreeSet<String>) -> Result<bool, CiError> {
        check_tuple(&self.vocab, tuple, conditions, &self.principles)
    }

    /// Three-way verdict for a flow.
    ///
    /// Priority: a fired PROHIBIT principle wins; otherwise the flow is
    /// permitted when every tuple has a firing PERMIT principle; otherwise it is
    /// not applicable when no principle's matchers touch any tuple; otherwise
    /// it is prohibited (in scope, but nothing permits it).
    pub fn evaluate_flow(&self, flow: &InformationFlow) -> Result<ComplianceVerdict, CiError> {
        let resolved = flow
            .tuples
            .iter()
            .map(|e| self.vocab.resolve(&e.tuple).map(|r| (r, &e.conditions)))
            .collect::<Result<Vec<_>, _>>()?;

        let prohibited = resolved.iter().any(|(t, conds)| {
            self.principles
                .iter()
                .any(|p| p.effect == Effect::Prohibit && p.fires(t, conds))
        });
        if prohibited {
            return Ok(ComplianceVerdict::Prohibited);
        }
        if resolved.iter().all(|(t, conds)| permitted(t, conds, &self.principles)) {
            return Ok(ComplianceVerdict::Permitted);
        }
        let touched = resolved
            .iter()
            .any(|(t, _)| self.principles.iter().any(|p| p.in_scope(t)));
        if touched {
            Ok(ComplianceVerdict::Prohibited)
        } else {
            Ok(ComplianceVerdict::NotApplicable)
        }
    }
}

/// One flow tuple plus the condition tags that hold for that transfer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowEntry {
    #[serde(flatten)]
    pub tuple: FlowTuple,
    #[serde(default)]
    pub conditions: BTreeSet<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InformationFlow {
    #[serde(default)]
    pub tuples: Vec<FlowEntry>,
}

impl InformationFlow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push<I, S>(&mut self, tuple: FlowTuple, conditions: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.tuples.push(FlowEntry {
            tuple,
            conditions: conditions.into_iter().map(Into::into).collect(),
        });
    }

    pub fn with<I, S>(mut self, tuple: FlowTuple, conditions: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.push(tuple, conditions);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ComplianceVerdict {
    Permitted,
    Prohibited,
    NotApplicable,
}

impl ComplianceVerdict {
    pub const ALL: [ComplianceVerdict; 3] = [
        ComplianceVerdict::Permitted,
        ComplianceVerdict::Prohibited,
        ComplianceVerdict::NotApplicable,
    ];

    /// Option letter used by the compliance prompt: A prohibited, B permitted, C not related.
    pub fn to_choice(self) -> char {
        match self {
            ComplianceVerdict::Prohibited => 'A',
            ComplianceVerdict::Permitted => 'B',
            ComplianceVerdict::NotApplicable => 'C',
        }
    }

    pub fn from_choice(letter: char) -> Result<Self, CiError> {
        match letter {
            'A' => Ok(ComplianceVerdict::Prohibited),
            'B' => Ok(ComplianceVerdict::Permitted),
            'C' => Ok(ComplianceVerdict::NotApplicable),
            other => Err(CiError::UnknownChoice(other.to_string())),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ComplianceVerdict::Permitted => "Permitted",
            ComplianceVerdict::Prohibited => "Prohibited",
            ComplianceVerdict::NotApplicable => "Not Applicable",
        }
    }
}

impl fmt::Display for ComplianceVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn verdict_to_choice(v: ComplianceVerdict) -> char {
    v.to_choice()
}

pub fn choice_to_verdict(letter: char) -> Result<ComplianceVerdict, CiError> {
    ComplianceVerdict::from_choice(letter)
}
