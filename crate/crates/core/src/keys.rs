//! Key constraints and the chase.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::structure::{Elem, OpenStructure, Signature, Structure, Tuple};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("key on `{rel}` uses position {pos}, but the arity is {arity}")]
    PositionOutOfRange { rel: String, pos: usize, arity: usize },
    #[error("key on unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{0}` has more than one key")]
    MultipleKeys(String),
    #[error("key on `{0}` is not unary")]
    NotUnary(String),
}

/// A key: the listed positions (0-based) determine the whole tuple.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Key {
    pub relation: String,
    pub positions: BTreeSet<usize>,
}

impl Key {
    /// Unary key from a 0-based position.
    pub fn unary(relation: impl Into<String>, position: usize) -> Self {
        Key {
            relation: relation.into(),
            positions: [position].into_iter().collect(),
        }
    }

    pub fn is_unary(&self) -> bool {
        self.positions.len() == 1
    }

    /// The position of a unary key.
    pub fn position(&self) -> Option<usize> {
        self.is_unary().then(|| *self.positions.iter().next().unwrap())
    }

    fn project(&self, t: &[Elem]) -> Vec<Elem> {
        self.positions.iter().map(|&p| t[p]).collect()
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "key {}", self.relation)?;
        for p in &self.positions {
            write!(f, " {}", p + 1)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KeySet {
    keys: BTreeSet<Key>,
}

impl KeySet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_keys(keys: impl IntoIterator<Item = Key>) -> Self {
        KeySet {
            keys: keys.into_iter().collect(),
        }
    }

    /// Convenience for unary keys given as `(relation, 0-based position)`.
    pub fn unary<'a>(pairs: impl IntoIterator<Item = (&'a str, usize)>) -> Self {
        Self::from_keys(pairs.into_iter().map(|(r, p)| Key::unary(r, p)))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Key> {
        self.keys.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_unary(&self) -> bool {
        self.keys.iter().all(Key::is_unary)
    }

    pub fn keys_for<'a>(&'a self, rel: &'a str) -> impl Iterator<Item = &'a Key> + 'a {
        self.keys.iter().filter(move |k| k.relation == rel)
    }

    /// Unary key positions per relation (first key when several exist).
    pub fn unary_positions(&self) -> BTreeMap<String, Vec<usize>> {
        let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for k in &self.keys {
            if let Some(p) = k.position() {
                out.entry(k.relation.clone()).or_default().push(p);
            }
        }
        out
    }

    /// Checks positions against a signature. Keys on relations outside it are ignored.
    pub fn validate(&self, sig: &Signature) -> Result<(), KeyError> {
        for k in &self.keys {
            if let Some(arity) = sig.arity(&k.relation) {
                if let Some(&pos) = k.positions.iter().find(|&&p| p >= arity) {
                    return Err(KeyError::PositionOutOfRange {
                        rel: k.relation.clone(),
                        pos: pos + 1,
                        arity,
                    });
                }
            }
        }
        Ok(())
    }

    /// Pipeline contract: unary keys, at most one per relation.
    pub fn check_pipeline(&self, allow_multiple: bool) -> Result<(), KeyError> {
        let mut seen = BTreeSet::new();
        for k in &self.keys {
            if !k.is_unary() {
                return Err(KeyError::NotUnary(k.relation.clone()));
            }
            if !seen.insert(&k.relation) && !allow_multiple {
                return Err(KeyError::MultipleKeys(k.relation.clone()));
            }
        }
        Ok(())
    }

    /// Parses `key <Rel> <pos>...` lines (1-based positions); `#` starts a comment.
    pub fn parse(text: &str) -> Result<KeySet, KeyError> {
        let mut keys = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| KeyError::Syntax {
                line: i + 1,
                msg: msg.to_string(),
            };
            let mut words = line.split_whitespace();
            if words.next() != Some("key") {
                return Err(err("expected `key <relation> <position>`"));
            }
            let rel = words.next().ok_or_else(|| err("missing relation name"))?;
            let mut positions = BTreeSet::new();
            for w in words {
                let p: usize = w.parse().map_err(|_| err(&format!("bad position `{w}`")))?;
                if p == 0 {
                    return Err(err("positions are 1-based"));
                }
                positions.insert(p - 1);
            }
            if positions.is_empty() {
                return Err(err("missing key position"));
            }
            keys.insert(Key {
                relation: rel.to_string(),
                positions,
            });
        }
        Ok(KeySet { keys })
    }

    pub fn to_text(&self) -> String {
        self.keys.iter().map(|k| format!("{k}\n")).collect()
    }
}

/// True iff no two tuples of a keyed relation agree on the key but differ.
pub fn satisfies_keys(data: &Structure, keys: &KeySet) -> Result<bool, KeyError> {
    keys.validate(data.signature())?;
    Ok(find_violation(data, keys).is_none())
}

fn violations(data: &Structure, keys: &KeySet) -> Vec<(Tuple, Tuple)> {
    let mut out = Vec::new();
    for k in keys.iter() {
        let mut by_key: BTreeMap<Vec<Elem>, &Tuple> = BTreeMap::new();
        for t in data.relation(&k.relation) {
            match by_key.get(&k.project(t)) {
                Some(&first) => out.push((first.clone(), t.clone())),
                None => {
                    by_key.insert(k.project(t), t);
                }
            }
        }
    }
    out
}

fn find_violation(data: &Structure, keys: &KeySet) -> Option<(Tuple, Tuple)> {
    // relations in name order, tuples in sorted order
    let mut rels: Vec<&Key> = keys.iter().collect();
    rels.sort_by(|a, b| a.relation.cmp(&b.relation));
    for k in rels {
        let mut by_key: BTreeMap<Vec<Elem>, &Tuple> = BTreeMap::new();
        for t in data.relation(&k.relation) {
            if let Some(&first) = by_key.get(&k.project(t)) {
                return Some((first.clone(), t.clone()));
            }
            by_key.insert(k.project(t), t);
        }
    }
    None
}

/// Result of chasing an open structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChaseResult {
    pub result: OpenStructure,
    /// Every original element to its representative in `result`.
    pub merge: BTreeMap<Elem, Elem>,
}

struct Merger {
    merge: BTreeMap<Elem, Elem>,
}

impl Merger {
    fn new(s: &Structure) -> Self {
        Merger {
            merge: s.universe().iter().map(|&e| (e, e)).collect(),
        }
    }

    /// Identifies `a` and `b` pairwise; `pick` chooses the surviving element.
    fn identify(
        &mut self,
        s: &Structure,
        a: &[Elem],
        b: &[Elem],
        pick: &mut dyn FnMut(Elem, Elem) -> Elem,
    ) -> Structure {
        // union of the pairs, applied simultaneously
        let mut local: BTreeMap<Elem, Elem> = BTreeMap::new();
        let find = |m: &BTreeMap<Elem, Elem>, mut x: Elem| {
            while let Some(&p) = m.get(&x) {
                if p == x {
                    break;
                }
                x = p;
            }
            x
        };
        for (&x, &y) in a.iter().zip(b) {
            let (rx, ry) = (find(&local, x), find(&local, y));
            if rx != ry {
                let keep = pick(rx, ry);
                let drop = if keep == rx { ry } else { rx };
                local.insert(drop, keep);
                local.entry(keep).or_insert(keep);
            }
        }
        let f = |e: Elem| find(&local, e);
        for v in self.merge.values_mut() {
            *v = f(*v);
        }
        s.map_elements(f)
    }
}

fn chase_loop(
    input: &OpenStructure,
    next: &mut dyn FnMut(&Structure) -> Option<(Tuple, Tuple)>,
    pick: &mut dyn FnMut(Elem, Elem) -> Elem,
) -> ChaseResult {
    let mut current = input.structure.clone();
    let mut merger = Merger::new(&current);
    while let Some((a, b)) = next(&current) {
        current = merger.identify(&current, &a, &b, pick);
    }
    let tuple = input.tuple.iter().map(|e| merger.merge[e]).collect();
    ChaseResult {
        result: OpenStructure {
            structure: current,
            tuple,
        },
        merge: merger.merge,
    }
}

/// Chase to a fixpoint: relations in name order, tuples in sorted order,
/// restarting after each merge; the smallest element id survives.
pub fn chase(input: &OpenStructure, keys: &KeySet) -> ChaseResult {
    chase_loop(
        input,
        &mut |s| find_violation(s, keys),
        &mut |a, b| a.min(b),
    )
}

/// Chase with randomly chosen violations and representatives.
pub fn chase_shuffled<R: Rng>(input: &OpenStructure, keys: &KeySet, rng: &mut R) -> ChaseResult {
    let rng = std::cell::RefCell::new(rng);
    chase_loop(
        input,
        &mut |s| violations(s, keys).choose(&mut *rng.borrow_mut()).cloned(),
        &mut |a, b| if rng.borrow_mut().gen_bool(0.5) { a } else { b },
    )
}

/// Chase of a plain structure.
pub fn chase_structure(s: &Structure, keys: &KeySet) -> (Structure, BTreeMap<Elem, Elem>) {
    let open = OpenStructure {
        structure: s.clone(),
        tuple: Vec::new(),
    };
    let r = chase(&open, keys);
    (r.result.structure, r.merge)
}
