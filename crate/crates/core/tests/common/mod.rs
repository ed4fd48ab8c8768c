//! Seeded generators shared by the integration tests.
#![allow(dead_code)]

pub mod oracle;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use spjopt::plan::Theta;
use spjopt::{Elem, KeySet, OpenStructure, Signature, SpjPlan, Structure};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const NAMES: [&str; 3] = ["R", "S", "T"];

/// 1 to 3 relations of arity 1 to 3.
pub fn random_signature(rng: &mut impl Rng) -> Signature {
    let n = rng.gen_range(1..=3);
    Signature::from_pairs(NAMES[..n].iter().map(|&r| (r, rng.gen_range(1..=3usize)))).unwrap()
}

fn random_relation(rng: &mut impl Rng, sig: &Signature) -> (String, usize) {
    let rels: Vec<(&str, usize)> = sig.iter().collect();
    let (r, a) = rels[rng.gen_range(0..rels.len())];
    (r.to_string(), a)
}

fn random_theta(rng: &mut impl Rng, width: usize, max_pairs: usize) -> Theta {
    let mut theta = Theta::new();
    if width < 2 {
        return theta;
    }
    for _ in 0..rng.gen_range(0..=max_pairs) {
        let j = rng.gen_range(1..=width);
        let k = rng.gen_range(1..=width);
        if j != k {
            theta.insert((j.min(k), j.max(k)));
        }
    }
    theta
}

/// Theta for a join whose children after the first add at most one column
/// not equated into the first child.
fn well_behaved_theta(rng: &mut impl Rng, first: usize, width: usize) -> Theta {
    let mut theta = random_theta(rng, first, 1);
    if width == first {
        return theta;
    }
    let k = rng.gen_range(first + 1..=width);
    for i in first + 1..=width {
        if i == k {
            continue;
        }
        let j = if first == 0 || rng.gen_bool(0.2) { k } else { rng.gen_range(1..=first) };
        theta.insert((j.min(i), j.max(i)));
    }
    theta
}

/// Random plan with at most `budget` operators (AST nodes).
pub fn random_plan(rng: &mut impl Rng, sig: &Signature, budget: usize, well_behaved: bool) -> SpjPlan {
    if budget <= 1 || rng.gen_bool(0.25) {
        return SpjPlan::basic(random_relation(rng, sig).0);
    }
    match rng.gen_range(0..4) {
        0 => {
            let child = random_plan(rng, sig, budget - 1, well_behaved);
            let m = child.arity(sig).unwrap();
            SpjPlan::select(random_theta(rng, m, 2), child)
        }
        1 => {
            let child = random_plan(rng, sig, budget - 1, well_behaved);
            let m = child.arity(sig).unwrap();
            let len = if m == 0 { 0 } else { rng.gen_range(0..=3) };
            SpjPlan::project((0..len).map(|_| rng.gen_range(1..=m)).collect(), child)
        }
        _ => {
            let parts = if budget >= 4 && rng.gen_bool(0.3) { 3 } else { 2 };
            let parts = parts.min(budget - 1);
            let mut left = budget - 1;
            let mut children = Vec::new();
            for i in 0..parts {
                let share = if i + 1 == parts { left } else { rng.gen_range(1..=left - (parts - i - 1)) };
                left -= share;
                children.push(random_plan(rng, sig, share, well_behaved));
            }
            let arities: Vec<usize> = children.iter().map(|c| c.arity(sig).unwrap()).collect();
            let width: usize = arities.iter().sum();
            let theta = if well_behaved {
                well_behaved_theta(rng, arities[0], width)
            } else {
                random_theta(rng, width, 3)
            };
            SpjPlan::join(theta, children)
        }
    }
}

/// Random data with domain size at most `max_dom`.
pub fn random_structure(rng: &mut impl Rng, sig: &Signature, max_dom: usize, max_tuples: usize) -> Structure {
    let mut s = Structure::new(sig.clone());
    let dom: Vec<Elem> = (0..rng.gen_range(1..=max_dom)).map(|i| s.add_element(i.to_string())).collect();
    for (rel, arity) in sig.iter().collect::<Vec<_>>() {
        for _ in 0..rng.gen_range(0..=max_tuples) {
            let t = (0..arity).map(|_| *dom.choose(rng).unwrap()).collect();
            s.add_tuple(rel, t).unwrap();
        }
    }
    s
}

/// Drops tuples until every key holds (first tuple per key value survives).
pub fn enforce_keys(s: &Structure, keys: &KeySet) -> Structure {
    let mut out = Structure::new(s.signature().clone());
    for &e in s.universe() {
        out.insert_element(e, s.name(e));
    }
    let positions = keys.unary_positions();
    for (rel, t) in s.tuples() {
        let ps = positions.get(rel).cloned().unwrap_or_default();
        let clash = out
            .relation(rel)
            .iter()
            .any(|u| ps.iter().any(|&p| u[p] == t[p]) && u != t);
        if !clash {
            out.add_tuple(rel, t.clone()).unwrap();
        }
    }
    out
}

/// Each relation independently gets a unary key with probability one half.
pub fn random_keys(rng: &mut impl Rng, sig: &Signature) -> KeySet {
    let mut pairs: Vec<(&str, usize)> = Vec::new();
    for (r, a) in sig.iter() {
        if rng.gen_bool(0.5) {
            pairs.push((r, rng.gen_range(0..a)));
        }
    }
    KeySet::unary(pairs)
}

/// Random open structure over `sig` with at most `max_elems` elements.
pub fn random_open(rng: &mut impl Rng, sig: &Signature, max_elems: usize, max_tuples: usize) -> OpenStructure {
    loop {
        let s = random_structure(rng, sig, max_elems, max_tuples);
        let used: BTreeSet<Elem> = s.tuples().flat_map(|(_, t)| t.iter().copied()).collect();
        if used.is_empty() {
            continue;
        }
        let s = s.induced(&used);
        let pool: Vec<Elem> = used.into_iter().collect();
        let tuple = (0..rng.gen_range(0..=2)).map(|_| *pool.choose(rng).unwrap()).collect();
        return OpenStructure::new(s, tuple).unwrap();
    }
}

/// All structures over `sig` on a domain of size `n` with at most `max_tuples`
/// tuples per relation, as a deterministic sample of at most `limit`.
pub fn small_structures(sig: &Signature, n: usize, limit: usize, seed: u64) -> Vec<Structure> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for _ in 0..limit * 4 {
        if out.len() >= limit {
            break;
        }
        let s = random_structure(&mut r, sig, n, 3);
        let key: BTreeMap<String, Vec<Vec<Elem>>> = s
            .relations()
            .map(|(k, v)| (k.to_string(), v.iter().cloned().collect()))
            .collect();
        if seen.insert((s.len(), key)) {
            out.push(s);
        }
    }
    out
}

/// Structure from `(relation, element names)` pairs.
pub fn structure(sig: &[(&str, usize)], tuples: &[(&str, &[&str])]) -> Structure {
    let mut s = Structure::new(Signature::from_pairs(sig.iter().copied()).unwrap());
    for (r, t) in tuples {
        let t: Vec<Elem> = t
            .iter()
            .map(|n| s.element_by_name(n).unwrap_or_else(|| s.add_element(*n)))
            .collect();
        s.add_tuple(r, t).unwrap();
    }
    s
}

pub fn open(s: Structure, names: &[&str]) -> OpenStructure {
    let t = names.iter().map(|n| s.element_by_name(n).unwrap()).collect();
    OpenStructure::new(s, t).unwrap()
}

pub fn elems(s: &Structure, names: &[&str]) -> Vec<Elem> {
    names.iter().map(|n| s.element_by_name(n).unwrap()).collect()
}

/// The directed triangle as a plan over `E/2`.
pub const TRIANGLE: &str = "(project (cols 1 3 5) (join (theta (2 3) (4 5) (6 1)) E E E))";
