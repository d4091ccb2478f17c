//! Generators and oracles for trajectories and MCQ distractors.

use std::collections::BTreeMap;

use cikit_core::mcq::{cosine, EmbeddingProvider, TrigramEmbedder};
use cikit_core::trajectory::{CiBlock, CiValue, ReasoningTrajectory};
use proptest::prelude::*;

pub fn ci_block() -> impl Strategy<Value = CiBlock> {
    let value = prop_oneof![
        "[A-Za-z0-9][A-Za-z0-9 .,;()-]{0,20}[A-Za-z0-9.]".prop_map(CiValue::Scalar),
        prop::collection::vec("[A-Za-z0-9 ',\\\\\n\"-]{0,15}", 0..4).prop_map(CiValue::List),
    ];
    prop::collection::btree_map("[a-z_][a-z0-9_]{0,10}", value, 0..6).prop_map(|m: BTreeMap<String, CiValue>| {
        let mut b = CiBlock::new();
        for (k, v) in m {
            b.insert(k, v);
        }
        b
    })
}

pub fn trajectory() -> impl Strategy<Value = ReasoningTrajectory> {
    let text = "[A-Za-z0-9 .,:;!?'*|<\n-]{0,120}";
    (text, ci_block(), text).prop_map(|(t, ci, s)| ReasoningTrajectory::new(t, ci, s))
}

/// Top-`k` by repeated arg-max: highest cosine, then smallest string.
pub fn brute_force_top(answer: &str, pool: &[&str], k: usize) -> Vec<String> {
    let e = TrigramEmbedder::default();
    let fold = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut cands: Vec<String> = Vec::new();
    for p in pool {
        if fold(p) != fold(answer) && !fold(p).is_empty() && !cands.iter().any(|c| fold(c) == fold(p)) {
            cands.push(p.to_string());
        }
    }
    let target = e.embed(answer);
    let mut out = Vec::new();
    for _ in 0..k {
        let mut best: Option<(f64, String)> = None;
        for c in &cands {
            if out.contains(c) {
                continue;
            }
            let s = cosine(&target, &e.embed(c));
            let better = match &best {
                None => true,
                Some((bs, bc)) => s > *bs || (s == *bs && c < bc),
            };
            if better {
                best = Some((s, c.clone()));
            }
        }
        out.push(best.unwrap().1);
    }
    out
}

pub fn brute_force_candidates(answer: &str, pool: &[&str]) -> usize {
    let mut seen: Vec<&str> = Vec::new();
    for p in pool {
        if *p != answer && !seen.contains(p) {
            seen.push(p);
        }
    }
    seen.len()
}
