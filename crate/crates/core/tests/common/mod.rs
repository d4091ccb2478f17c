#![allow(dead_code)]

pub mod ci_model;
pub mod generators;
pub mod ppo_oracle;

use std::path::PathBuf;

use cikit_core::cases::{CaseAnnotation, CaseStore, LegalCase};
use cikit_core::{ComplianceVerdict, Law};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn case(id: &str, domain: Law, gold: ComplianceVerdict, annotation: CaseAnnotation) -> LegalCase {
    LegalCase {
        id: id.to_string(),
        domain,
        narrative: format!("narrative of {id}"),
        annotation,
        gold,
        cited_paths: vec![],
    }
}

const SENDERS: [&str; 5] = ["Hospital", "Bank", "Employer", "Retailer", "School"];
const RECIPIENTS: [&str; 4] = ["Insurer", "Regulator", "Advertiser", "Parent"];

fn random_annotation(rng: &mut ChaCha8Rng) -> CaseAnnotation {
    CaseAnnotation {
        sender: Some(SENDERS[rng.random_range(0..SENDERS.len())].to_string()),
        recipient: Some(RECIPIENTS[rng.random_range(0..RECIPIENTS.len())].to_string()),
        ..Default::default()
    }
}

/// Gold verdict is a function of the domain alone; annotation tags are noise.
pub fn separable_store(n_per_domain: usize) -> CaseStore {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mapping = [
        (Law::Gdpr, ComplianceVerdict::Permitted),
        (Law::Hipaa, ComplianceVerdict::Prohibited),
        (Law::AiAct, ComplianceVerdict::NotApplicable),
    ];
    let mut cases = Vec::new();
    for (law, gold) in mapping {
        for i in 0..n_per_domain {
            cases.push(case(&format!("{law:?}-{i}"), law, gold, random_annotation(&mut rng)));
        }
    }
    CaseStore::from_cases(cases).unwrap()
}

/// Every feature vector appears once with each verdict, so no policy can beat chance.
pub fn noise_store(n_per_domain: usize) -> CaseStore {
    let mut cases = Vec::new();
    for law in Law::ALL {
        for i in 0..n_per_domain {
            for gold in ComplianceVerdict::ALL {
                cases.push(case(&format!("{law:?}-{i}-{gold:?}"), law, gold, CaseAnnotation::default()));
            }
        }
    }
    CaseStore::from_cases(cases).unwrap()
}
