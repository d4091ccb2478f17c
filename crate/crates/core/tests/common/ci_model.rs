//! A small CI world with an independent brute-force reading of the decision rules.

use std::collections::BTreeSet;

use cikit_core::ci::{Effect, FlowTuple, InfoPattern, InformationType, Role, RolePattern};
use cikit_core::{ComplianceVerdict, Context, Domain, InformationFlow, TransmissionPrinciple};
use proptest::prelude::*;

const ROLES: [&str; 4] = ["r0", "r1", "r2", "r3"];
const INFOS: [&str; 3] = ["i0", "i1", "i2"];
const TAGS: [&str; 3] = ["t0", "t1", "t2"];
const CONDS: [&str; 3] = ["c0", "c1", "c2"];

#[derive(Debug, Clone)]
pub enum M {
    Id(usize),
    Tag(usize),
    Any,
}

#[derive(Debug, Clone)]
pub struct P {
    pub permit: bool,
    pub matchers: [M; 4],
    pub conds: BTreeSet<usize>,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub role_tags: Vec<BTreeSet<usize>>,
    pub info_tags: Vec<BTreeSet<usize>>,
    pub principles: Vec<P>,
    pub flow: Vec<([usize; 4], BTreeSet<usize>)>,
}

fn matcher(ids: usize) -> impl Strategy<Value = M> {
    prop_oneof![(0..ids).prop_map(M::Id), (0..3usize).prop_map(M::Tag), Just(M::Any)]
}

fn tagset() -> impl Strategy<Value = BTreeSet<usize>> {
    prop::collection::btree_set(0..3usize, 0..3)
}

pub fn instance() -> impl Strategy<Value = Instance> {
    let principle = (any::<bool>(), [matcher(4), matcher(4), matcher(4), matcher(3)], tagset())
        .prop_map(|(permit, matchers, conds)| P { permit, matchers, conds })
        // Non-vacuous: at least one concrete matcher or a condition.
        .prop_filter("vacuous", |p| !p.conds.is_empty() || p.matchers.iter().any(|m| !matches!(m, M::Any)));
    let entry = ([0..4usize, 0..4usize, 0..4usize, 0..3usize], tagset());
    (
        prop::collection::vec(tagset(), 4),
        prop::collection::vec(tagset(), 3),
        prop::collection::vec(principle, 0..=5),
        prop::collection::vec(entry, 0..=5),
    )
        .prop_map(|(role_tags, info_tags, principles, flow)| Instance { role_tags, info_tags, principles, flow })
}

pub fn brute_force(inst: &Instance) -> ComplianceVerdict {
    let hit = |m: &M, idx: usize, tags: &BTreeSet<usize>| match m {
        M::Id(i) => *i == idx,
        M::Tag(t) => tags.contains(t),
        M::Any => true,
    };
    let scope = |p: &P, t: &[usize; 4]| {
        (0..3).all(|k| hit(&p.matchers[k], t[k], &inst.role_tags[t[k]])) && hit(&p.matchers[3], t[3], &inst.info_tags[t[3]])
    };
    let mut any_prohibit = false;
    let mut all_permitted = true;
    let mut touched = false;
    for (t, conds) in &inst.flow {
        let mut permitted = false;
        for p in &inst.principles {
            let in_scope = scope(p, t);
            touched |= in_scope;
            let fires = in_scope && p.conds.is_subset(conds);
            if fires && !p.permit {
                any_prohibit = true;
            }
            if fires && p.permit {
                permitted = true;
            }
        }
        all_permitted &= permitted;
    }
    if any_prohibit {
        ComplianceVerdict::Prohibited
    } else if all_permitted {
        ComplianceVerdict::Permitted
    } else if !touched {
        ComplianceVerdict::NotApplicable
    } else {
        ComplianceVerdict::Prohibited
    }
}

pub fn build(inst: &Instance) -> (Context, InformationFlow) {
    let names = |s: &BTreeSet<usize>, pool: &[&str]| s.iter().map(|&i| pool[i].to_string()).collect::<Vec<_>>();
    let roles = (0..4).map(|i| Role::new(ROLES[i], ROLES[i]).with_attributes(names(&inst.role_tags[i], &TAGS))).collect();
    let infos = (0..3).map(|i| InformationType::new(INFOS[i], INFOS[i]).with_tags(names(&inst.info_tags[i], &TAGS))).collect();
    let role_pat = |m: &M| match m {
        M::Id(i) => RolePattern::Id(ROLES[*i].into()),
        M::Tag(t) => RolePattern::Tag(TAGS[*t].into()),
        M::Any => RolePattern::Any,
    };
    let principles = inst
        .principles
        .iter()
        .enumerate()
        .map(|(n, p)| {
            let base = TransmissionPrinciple::new(format!("p{n}"), if p.permit { Effect::Permit } else { Effect::Prohibit });
            base.sender(role_pat(&p.matchers[0]))
                .subject(role_pat(&p.matchers[1]))
                .recipient(role_pat(&p.matchers[2]))
                .info(match &p.matchers[3] {
                    M::Id(i) => InfoPattern::Id(INFOS[*i].into()),
                    M::Tag(t) => InfoPattern::Tag(TAGS[*t].into()),
                    M::Any => InfoPattern::Any,
                })
                .conditions(names(&p.conds, &CONDS))
        })
        .collect();
    let ctx = Context::new("ctx", Domain::Other, roles, infos, principles).unwrap();
    let mut flow = InformationFlow::new();
    for (t, conds) in &inst.flow {
        flow.push(FlowTuple::new(ROLES[t[0]], ROLES[t[1]], ROLES[t[2]], INFOS[t[3]]), names(conds, &CONDS));
    }
    (ctx, flow)
}
