//! Homomorphism search, enumeration and cores.
//!
//! The engine is a backtracking search over the source elements with
//! per-constraint support filtering (every source tuple is a constraint
//! against the matching target relation). Enumeration of projected images
//! branches on the output elements first and then only asks for the
//! existence of an extension, so each distinct image is visited once.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::structure::{Elem, OpenStructure, Relation, Structure, StructureError, Tuple};

pub type ElemMap = BTreeMap<Elem, Elem>;

struct Constraint {
    rel: usize,
    vars: Vec<usize>,
}

/// A prepared homomorphism problem from `src` to `dst`.
pub struct HomSearch {
    src_elems: Vec<Elem>,
    dst_elems: Vec<Elem>,
    dst_rels: Vec<Vec<Vec<u32>>>,
    constraints: Vec<Constraint>,
    var_constraints: Vec<Vec<usize>>,
    initial: Vec<Vec<bool>>,
    injective: bool,
    infeasible: bool,
}

type Domains = Vec<Vec<bool>>;

impl HomSearch {
    /// Fails when a source symbol is absent from `dst` or has another arity.
    pub fn new(src: &Structure, dst: &Structure) -> Result<Self, StructureError> {
        src.signature().check_within(dst.signature())?;
        let src_elems: Vec<Elem> = src.universe().iter().copied().collect();
        let dst_elems: Vec<Elem> = dst.universe().iter().copied().collect();
        let src_idx: BTreeMap<Elem, usize> =
            src_elems.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let dst_idx: BTreeMap<Elem, u32> =
            dst_elems.iter().enumerate().map(|(i, &e)| (e, i as u32)).collect();

        let mut rel_ids = BTreeMap::new();
        let mut dst_rels = Vec::new();
        let mut constraints = Vec::new();
        for (name, rel) in src.relations() {
            if rel.is_empty() {
                continue;
            }
            let id = *rel_ids.entry(name.to_string()).or_insert_with(|| {
                dst_rels.push(
                    dst.relation(name)
                        .iter()
                        .map(|t| t.iter().map(|e| dst_idx[e]).collect())
                        .collect(),
                );
                dst_rels.len() - 1
            });
            for t in rel {
                constraints.push(Constraint {
                    rel: id,
                    vars: t.iter().map(|e| src_idx[e]).collect(),
                });
            }
        }
        let mut var_constraints = vec![Vec::new(); src_elems.len()];
        for (ci, c) in constraints.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for &v in &c.vars {
                if seen.insert(v) {
                    var_constraints[v].push(ci);
                }
            }
        }
        let initial = vec![vec![true; dst_elems.len()]; src_elems.len()];
        Ok(HomSearch {
            src_elems,
            dst_elems,
            dst_rels,
            constraints,
            var_constraints,
            initial,
            injective: false,
            infeasible: false,
        })
    }

    fn src_index(&self, e: Elem) -> Option<usize> {
        self.src_elems.binary_search(&e).ok()
    }

    fn dst_index(&self, e: Elem) -> Option<usize> {
        self.dst_elems.binary_search(&e).ok()
    }

    /// Requires `h(a) = b`.
    pub fn pin(&mut self, a: Elem, b: Elem) -> &mut Self {
        match (self.src_index(a), self.dst_index(b)) {
            (Some(i), Some(j)) => {
                for (k, slot) in self.initial[i].iter_mut().enumerate() {
                    *slot = *slot && k == j;
                }
            }
            _ => self.infeasible = true,
        }
        self
    }

    /// Requires `h(src[i]) = dst[i]` for every position.
    pub fn pin_tuple(&mut self, src: &[Elem], dst: &[Elem]) -> &mut Self {
        if src.len() != dst.len() {
            self.infeasible = true;
            return self;
        }
        for (&a, &b) in src.iter().zip(dst) {
            self.pin(a, b);
        }
        self
    }

    /// Forbids `b` as an image of any element.
    pub fn avoid(&mut self, b: Elem) -> &mut Self {
        if let Some(j) = self.dst_index(b) {
            for dom in &mut self.initial {
                dom[j] = false;
            }
        }
        self
    }

    pub fn injective(&mut self, yes: bool) -> &mut Self {
        self.injective = yes;
        self
    }

    /// Some homomorphism, if one exists.
    pub fn first(&self) -> Option<ElemMap> {
        let mut found = None;
        self.run(&[], &mut |_, full| {
            found = Some(full.clone());
            false
        });
        found
    }

    pub fn exists(&self) -> bool {
        self.first().is_some()
    }

    /// Distinct images of `outputs` over all homomorphisms.
    pub fn project(&self, outputs: &[Elem]) -> Relation {
        let mut out = Relation::new();
        self.for_each_image(outputs, |t| {
            out.insert(t.to_vec());
            true
        });
        out
    }

    pub fn count_images(&self, outputs: &[Elem]) -> usize {
        let mut n = 0usize;
        self.for_each_image(outputs, |_| {
            n += 1;
            true
        });
        n
    }

    /// Calls `f` once per distinct image of `outputs`; stop early by returning false.
    pub fn for_each_image(&self, outputs: &[Elem], mut f: impl FnMut(&[Elem]) -> bool) {
        let Some(vars) = outputs
            .iter()
            .map(|&e| self.src_index(e))
            .collect::<Option<Vec<usize>>>()
        else {
            return;
        };
        let mut order = Vec::new();
        for &v in &vars {
            if !order.contains(&v) {
                order.push(v);
            }
        }
        let mut buf = Vec::with_capacity(outputs.len());
        self.run(&order, &mut |assign, _| {
            buf.clear();
            buf.extend(vars.iter().map(|&v| self.dst_elems[assign[v] as usize]));
            f(&buf)
        });
    }

    /// All homomorphisms restricted to `keep`, deduplicated.
    pub fn restricted_maps(&self, keep: &BTreeSet<Elem>) -> BTreeSet<ElemMap> {
        let outputs: Vec<Elem> = keep.iter().copied().collect();
        let mut out = BTreeSet::new();
        self.for_each_image(&outputs, |img| {
            out.insert(outputs.iter().copied().zip(img.iter().copied()).collect());
            true
        });
        out
    }

    /// Core driver. `prefix` variables are enumerated exhaustively (each distinct
    /// assignment reported once); the rest only need one extension. The callback
    /// receives the prefix assignment and a full witnessing map.
    fn run(&self, prefix: &[usize], cb: &mut dyn FnMut(&[u32], &ElemMap) -> bool) {
        if self.infeasible {
            return;
        }
        let mut domains = self.initial.clone();
        let all: Vec<usize> = (0..self.constraints.len()).collect();
        if !self.propagate(&mut domains, all) {
            return;
        }
        let mut assign = vec![u32::MAX; self.src_elems.len()];
        self.search_prefix(prefix, 0, domains, &mut assign, cb);
    }

    fn search_prefix(
        &self,
        prefix: &[usize],
        depth: usize,
        domains: Domains,
        assign: &mut Vec<u32>,
        cb: &mut dyn FnMut(&[u32], &ElemMap) -> bool,
    ) -> bool {
        if depth == prefix.len() {
            let Some(full) = self.complete(domains, assign.clone()) else {
                return true;
            };
            return cb(assign, &full);
        }
        let var = prefix[depth];
        let values: Vec<usize> = (0..self.dst_elems.len()).filter(|&j| domains[var][j]).collect();
        for val in values {
            let Some(next) = self.assign_value(&domains, var, val) else {
                continue;
            };
            assign[var] = val as u32;
            let keep_going = self.search_prefix(prefix, depth + 1, next, assign, cb);
            assign[var] = u32::MAX;
            if !keep_going {
                return false;
            }
        }
        true
    }

    /// Existence search for an extension of the current domains.
    fn complete(&self, domains: Domains, mut assign: Vec<u32>) -> Option<ElemMap> {
        // smallest remaining domain first
        let pick = (0..self.src_elems.len())
            .filter(|&v| assign[v] == u32::MAX)
            .min_by_key(|&v| domains[v].iter().filter(|&&b| b).count());
        let Some(var) = pick else {
            return Some(
                assign
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| (self.src_elems[i], self.dst_elems[j as usize]))
                    .collect(),
            );
        };
        for val in (0..self.dst_elems.len()).filter(|&j| domains[var][j]) {
            if let Some(next) = self.assign_value(&domains, var, val) {
                assign[var] = val as u32;
                if let Some(found) = self.complete(next, assign.clone()) {
                    return Some(found);
                }
                assign[var] = u32::MAX;
            }
        }
        None
    }

    fn assign_value(&self, domains: &Domains, var: usize, val: usize) -> Option<Domains> {
        let mut next = domains.clone();
        for (j, slot) in next[var].iter_mut().enumerate() {
            *slot = j == val;
        }
        if self.injective {
            for (v, dom) in next.iter_mut().enumerate() {
                if v != var {
                    dom[val] = false;
                    if !dom.iter().any(|&b| b) {
                        return None;
                    }
                }
            }
            let all: Vec<usize> = (0..self.constraints.len()).collect();
            return self.propagate(&mut next, all).then_some(next);
        }
        let touched = self.var_constraints[var].clone();
        self.propagate(&mut next, touched).then_some(next)
    }

    /// Support filtering to a fixpoint; false on a wiped-out domain.
    fn propagate(&self, domains: &mut Domains, start: Vec<usize>) -> bool {
        let mut queue: VecDeque<usize> = start.into_iter().collect();
        let mut queued = vec![false; self.constraints.len()];
        for &c in &queue {
            queued[c] = true;
        }
        let nd = self.dst_elems.len();
        while let Some(ci) = queue.pop_front() {
            queued[ci] = false;
            let c = &self.constraints[ci];
            let mut support: Vec<Vec<bool>> = c.vars.iter().map(|_| vec![false; nd]).collect();
            let mut any = false;
            'tuples: for t in &self.dst_rels[c.rel] {
                for (pos, &v) in c.vars.iter().enumerate() {
                    if !domains[v][t[pos] as usize] {
                        continue 'tuples;
                    }
                    // repeated variables must agree
                    if let Some(first) = c.vars[..pos].iter().position(|&w| w == v) {
                        if t[first] != t[pos] {
                            continue 'tuples;
                        }
                    }
                }
                any = true;
                for (pos, _) in c.vars.iter().enumerate() {
                    support[pos][t[pos] as usize] = true;
                }
            }
            if !any {
                return false;
            }
            for (pos, &v) in c.vars.iter().enumerate() {
                let mut changed = false;
                for j in 0..nd {
                    if domains[v][j] && !support[pos][j] {
                        domains[v][j] = false;
                        changed = true;
                    }
                }
                if changed {
                    if !domains[v].iter().any(|&b| b) {
                        return false;
                    }
                    for &other in &self.var_constraints[v] {
                        if other != ci && !queued[other] {
                            queued[other] = true;
                            queue.push_back(other);
                        }
                    }
                }
            }
        }
        true
    }
}

fn check_tuple_arity(a: &OpenStructure, b: &OpenStructure) -> Result<(), StructureError> {
    if a.arity() != b.arity() {
        return Err(StructureError::TupleArityMismatch(a.arity(), b.arity()));
    }
    Ok(())
}

/// A homomorphism between open structures mapping tuple to tuple.
pub fn find_homomorphism(
    src: &OpenStructure,
    dst: &OpenStructure,
) -> Result<Option<ElemMap>, StructureError> {
    check_tuple_arity(src, dst)?;
    let mut search = HomSearch::new(&src.structure, &dst.structure)?;
    search.pin_tuple(&src.tuple, &dst.tuple);
    Ok(search.first())
}

/// `homs(A, outputs, D)`: the set of images of `outputs` under all homomorphisms.
pub fn homs_relation(
    src: &Structure,
    outputs: &[Elem],
    data: &Structure,
) -> Result<Relation, StructureError> {
    Ok(HomSearch::new(src, data)?.project(outputs))
}

/// Homomorphisms restricted to `keep`.
pub fn homs_maps(
    src: &Structure,
    keep: &BTreeSet<Elem>,
    data: &Structure,
) -> Result<BTreeSet<ElemMap>, StructureError> {
    Ok(HomSearch::new(src, data)?.restricted_maps(keep))
}

/// Isomorphism test: a bijective homomorphism between structures with equal
/// relation sizes maps every relation onto its counterpart.
pub fn check_isomorphic(a: &OpenStructure, b: &OpenStructure) -> Result<bool, StructureError> {
    check_tuple_arity(a, b)?;
    a.structure.signature().check_within(b.structure.signature())?;
    b.structure.signature().check_within(a.structure.signature())?;
    if a.structure.len() != b.structure.len() {
        return Ok(false);
    }
    for (name, rel) in a.structure.relations() {
        if rel.len() != b.structure.relation(name).len() {
            return Ok(false);
        }
    }
    let mut search = HomSearch::new(&a.structure, &b.structure)?;
    search.pin_tuple(&a.tuple, &b.tuple).injective(true);
    Ok(search.exists())
}

/// A core of the augmented structure, as an induced substructure of the input.
pub fn compute_core(input: &OpenStructure) -> OpenStructure {
    let mut current = input.structure.clone();
    let fixed = input.tuple_set();
    'shrink: loop {
        for &x in current.universe() {
            if fixed.contains(&x) {
                continue;
            }
            let mut search =
                HomSearch::new(&current, &current).expect("a structure is similar to itself");
            for &t in &fixed {
                search.pin(t, t);
            }
            search.avoid(x);
            if let Some(h) = search.first() {
                let image: BTreeSet<Elem> = h.values().copied().collect();
                current = current.induced(&image);
                continue 'shrink;
            }
        }
        break;
    }
    OpenStructure {
        structure: current,
        tuple: input.tuple.clone(),
    }
}

/// Applies a map to a tuple.
pub fn map_tuple(h: &ElemMap, t: &[Elem]) -> Tuple {
    t.iter().map(|e| h[e]).collect()
}

/// True when `h` is a homomorphism from `src` to `dst` (total on `src`'s universe).
pub fn is_homomorphism(h: &ElemMap, src: &Structure, dst: &Structure) -> bool {
    src.universe().iter().all(|e| h.get(e).is_some_and(|v| dst.universe().contains(v)))
        && src
            .tuples()
            .all(|(name, t)| dst.relation(name).contains(&map_tuple(h, t)))
}
