//! Color numbers and color-number width.
//!
//! A valid coloring is a multiset of color classes, each closed under the
//! key dependencies (an element's class membership forces membership of the
//! key elements that determine it). The color number of a set S is the
//! optimum of the packing LP
//!
//! ```text
//! maximize  Σ_{U ∩ S ≠ ∅} w_U   subject to   Σ_{U ∩ t ≠ ∅} w_U ≤ 1  for every tuple t,  w ≥ 0.
//! ```
//!
//! Any class U meeting S can be replaced by the smallest closed class around
//! one of its S-elements without losing objective value or tightening any
//! constraint, so the LP is solved over those minimal classes only.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::warn;
use num::{BigInt, Integer, One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::keys::KeySet;
use crate::simplex::{format_rational, maximize, LpError, Rational};
use crate::structure::{hypergraph_of, Elem, OpenStructure, Structure};
use crate::treedec::{check_tree_decomposition, TreeDecomposition};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ColorError {
    #[error("universe of {size} elements exceeds the cap of {cap}")]
    CapExceeded { size: usize, cap: usize },
    #[error("element `{0}` occurs in no tuple, so its color number is unbounded")]
    Unbounded(String),
    #[error("element `{0}` is not in the universe")]
    NotInUniverse(String),
    #[error("key on `{0}` is not unary")]
    NonUnaryKey(String),
    #[error("decomposition is not a tree decomposition of the structure")]
    InvalidDecomposition,
}

/// Direct determiners: `x ∈ det[y]` when some tuple has x at its key position and y elsewhere.
pub fn determiners(a: &Structure, keys: &KeySet) -> Result<BTreeMap<Elem, BTreeSet<Elem>>, ColorError> {
    let mut det: BTreeMap<Elem, BTreeSet<Elem>> = BTreeMap::new();
    for k in keys.iter() {
        let Some(pos) = k.position() else {
            return Err(ColorError::NonUnaryKey(k.relation.clone()));
        };
        for t in a.relation(&k.relation) {
            if pos >= t.len() {
                continue;
            }
            for (i, &y) in t.iter().enumerate() {
                if i != pos && y != t[pos] {
                    det.entry(y).or_default().insert(t[pos]);
                }
            }
        }
    }
    Ok(det)
}

/// Smallest closed class containing `v`: v and everything that transitively determines it.
pub fn minimal_class(det: &BTreeMap<Elem, BTreeSet<Elem>>, v: Elem) -> BTreeSet<Elem> {
    let mut out = BTreeSet::from([v]);
    let mut stack = vec![v];
    while let Some(y) = stack.pop() {
        for &x in det.get(&y).into_iter().flatten() {
            if out.insert(x) {
                stack.push(x);
            }
        }
    }
    out
}

pub fn is_closed_class(det: &BTreeMap<Elem, BTreeSet<Elem>>, class: &BTreeSet<Elem>) -> bool {
    class
        .iter()
        .all(|y| det.get(y).is_none_or(|xs| xs.is_subset(class)))
}

/// All nonempty closed subsets of the universe, in set order.
pub fn valid_color_classes(
    a: &Structure,
    keys: &KeySet,
    cap: usize,
) -> Result<Vec<BTreeSet<Elem>>, ColorError> {
    let elems: Vec<Elem> = a.universe().iter().copied().collect();
    if elems.len() > cap || elems.len() >= 63 {
        return Err(ColorError::CapExceeded {
            size: elems.len(),
            cap,
        });
    }
    let det = determiners(a, keys)?;
    let mut out = BTreeSet::new();
    for mask in 1u64..(1u64 << elems.len()) {
        let class: BTreeSet<Elem> = (0..elems.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| elems[i])
            .collect();
        if is_closed_class(&det, &class) {
            out.insert(class);
        }
    }
    Ok(out.into_iter().collect())
}

/// Optimal packing over a list of classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColorSolution {
    pub classes: Vec<BTreeSet<Elem>>,
    pub weights: Vec<Rational>,
    pub value: Rational,
    /// Set when the structure has no tuples but S is nonempty; the value is then 0.
    pub degenerate: bool,
}

/// One color: a class index and a copy number.
pub type Color = (usize, usize);

impl ColorSolution {
    fn empty() -> Self {
        ColorSolution {
            classes: Vec::new(),
            weights: Vec::new(),
            value: Rational::zero(),
            degenerate: false,
        }
    }

    /// Least common multiple of the weight denominators.
    pub fn scale(&self) -> BigInt {
        self.weights
            .iter()
            .fold(BigInt::one(), |acc, w| acc.lcm(w.denom()))
    }

    /// Integer multiplicity of each class after scaling.
    pub fn multiplicities(&self) -> Vec<BigInt> {
        let scale = Rational::from_integer(self.scale());
        self.weights
            .iter()
            .map(|w| (w * &scale).to_integer())
            .collect()
    }

    /// The coloring as per-element color sets.
    pub fn element_colors(&self, universe: &BTreeSet<Elem>) -> BTreeMap<Elem, BTreeSet<Color>> {
        use num::ToPrimitive;
        let mults = self.multiplicities();
        let mut out: BTreeMap<Elem, BTreeSet<Color>> =
            universe.iter().map(|&e| (e, BTreeSet::new())).collect();
        for (ci, (class, m)) in self.classes.iter().zip(&mults).enumerate() {
            let m = m.to_usize().expect("multiplicity fits in memory");
            for &e in class {
                if let Some(cols) = out.get_mut(&e) {
                    cols.extend((0..m).map(|copy| (ci, copy)));
                }
            }
        }
        out
    }
}

/// Solves the packing LP for `s` over the given classes and the tuples of `a`.
pub fn solve_packing(
    a: &Structure,
    classes: &[BTreeSet<Elem>],
    s: &BTreeSet<Elem>,
) -> Result<ColorSolution, ColorError> {
    let classes: Vec<BTreeSet<Elem>> = classes.iter().filter(|u| !u.is_disjoint(s)).cloned().collect();
    if classes.is_empty() {
        return Ok(ColorSolution::empty());
    }
    let tuples: BTreeSet<BTreeSet<Elem>> = a.tuples().map(|(_, t)| t.iter().copied().collect()).collect();
    let rows: Vec<Vec<Rational>> = tuples
        .iter()
        .map(|t| {
            classes
                .iter()
                .map(|u| if u.is_disjoint(t) { Rational::zero() } else { Rational::one() })
                .collect()
        })
        .collect();
    let objective = vec![Rational::one(); classes.len()];
    let bounds = vec![Rational::one(); rows.len()];
    match maximize(&objective, &rows, &bounds) {
        Ok(sol) => {
            let keep: Vec<usize> = (0..classes.len()).filter(|&i| sol.x[i].is_positive()).collect();
            Ok(ColorSolution {
                classes: keep.iter().map(|&i| classes[i].clone()).collect(),
                weights: keep.iter().map(|&i| sol.x[i].clone()).collect(),
                value: sol.value,
                degenerate: false,
            })
        }
        Err(LpError::Unbounded) => {
            let free = classes
                .iter()
                .find(|u| tuples.iter().all(|t| u.is_disjoint(t)))
                .and_then(|u| u.iter().next().copied());
            Err(ColorError::Unbounded(
                free.map_or_else(|| "?".into(), |e| a.name(e)),
            ))
        }
        Err(e) => unreachable!("packing LPs have non-negative bounds: {e}"),
    }
}

/// The color number of `s` in `a` under `keys`, with an optimal coloring.
pub fn color_number(a: &Structure, keys: &KeySet, s: &BTreeSet<Elem>) -> Result<ColorSolution, ColorError> {
    if let Some(&bad) = s.iter().find(|e| !a.universe().contains(e)) {
        return Err(ColorError::NotInUniverse(bad.to_string()));
    }
    if s.is_empty() {
        return Ok(ColorSolution::empty());
    }
    if a.tuple_count() == 0 {
        warn!("color number of a structure without tuples is undefined; reporting 0");
        return Ok(ColorSolution {
            degenerate: true,
            ..ColorSolution::empty()
        });
    }
    let det = determiners(a, keys)?;
    let classes: BTreeSet<BTreeSet<Elem>> = s.iter().map(|&v| minimal_class(&det, v)).collect();
    let classes: Vec<BTreeSet<Elem>> = classes.into_iter().collect();
    solve_packing(a, &classes, s)
}

/// Per-bag color numbers of a decomposition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WidthReport {
    pub td: TreeDecomposition,
    pub bag_numbers: Vec<Rational>,
    pub width: Rational,
}

#[derive(Serialize, Deserialize)]
struct BagJson {
    node: usize,
    bag: Vec<String>,
    #[serde(rename = "colorNumber")]
    color_number: String,
}

#[derive(Serialize, Deserialize)]
struct WidthJson {
    width: String,
    bags: Vec<BagJson>,
    decomposition: serde_json::Value,
}

impl WidthReport {
    pub fn to_json(&self, a: &Structure) -> serde_json::Value {
        let doc = WidthJson {
            width: format_rational(&self.width),
            bags: (0..self.td.len())
                .map(|v| BagJson {
                    node: v,
                    bag: self.td.bags[v].iter().map(|&e| a.name(e)).collect(),
                    color_number: format_rational(&self.bag_numbers[v]),
                })
                .collect(),
            decomposition: self.td.to_json(a, None),
        };
        serde_json::to_value(doc).expect("serializable")
    }

    /// Node with the largest bag color number (smallest id on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for v in 1..self.bag_numbers.len() {
            if self.bag_numbers[v] > self.bag_numbers[best] {
                best = v;
            }
        }
        best
    }
}

fn report(a: &Structure, keys: &KeySet, td: TreeDecomposition) -> Result<WidthReport, ColorError> {
    let mut bag_numbers = Vec::with_capacity(td.len());
    for bag in &td.bags {
        bag_numbers.push(color_number(a, keys, bag)?.value);
    }
    let width = bag_numbers.iter().max().cloned().unwrap_or_else(Rational::zero);
    Ok(WidthReport {
        td,
        bag_numbers,
        width,
    })
}

/// Width of a given decomposition of `open`.
pub fn cwidth_of_decomposition(
    open: &OpenStructure,
    keys: &KeySet,
    td: &TreeDecomposition,
) -> Result<WidthReport, ColorError> {
    if !check_tree_decomposition(&hypergraph_of(open), td) {
        return Err(ColorError::InvalidDecomposition);
    }
    report(&open.structure, keys, td.clone())
}

struct WidthSearch<'a> {
    a: &'a Structure,
    keys: &'a KeySet,
    elems: Vec<Elem>,
    adj: Vec<u64>,
    cost: HashMap<u64, Rational>,
    memo: HashMap<u64, (Rational, Option<usize>)>,
    bound: Rational,
}

impl WidthSearch<'_> {
    fn set_of(&self, mask: u64) -> BTreeSet<Elem> {
        (0..self.elems.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| self.elems[i])
            .collect()
    }

    fn cost(&mut self, bag: u64) -> Result<Rational, ColorError> {
        if let Some(c) = self.cost.get(&bag) {
            return Ok(c.clone());
        }
        let c = color_number(self.a, self.keys, &self.set_of(bag))?.value;
        self.cost.insert(bag, c.clone());
        Ok(c)
    }

    /// Bag of `v` when the vertices of `gone` are already eliminated: v plus
    /// the remaining vertices reachable from v through eliminated ones.
    fn bag(&self, gone: u64, v: usize) -> u64 {
        let mut seen = 1u64 << v;
        let mut out = 1u64 << v;
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            let mut nb = self.adj[x] & !seen;
            while nb != 0 {
                let y = nb.trailing_zeros() as usize;
                nb &= nb - 1;
                seen |= 1 << y;
                if gone >> y & 1 == 1 {
                    stack.push(y);
                } else {
                    out |= 1 << y;
                }
            }
        }
        out
    }

    /// min(best width when `set` is eliminated first, bound), with the last vertex chosen.
    fn solve(&mut self, set: u64) -> Result<Rational, ColorError> {
        if set == 0 {
            return Ok(Rational::zero());
        }
        if let Some((v, _)) = self.memo.get(&set) {
            return Ok(v.clone());
        }
        let mut best = self.bound.clone();
        let mut choice = None;
        let mut rest = set;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let before = set & !(1 << v);
            let c = self.cost(self.bag(before, v))?;
            if c >= best {
                continue;
            }
            let sub = self.solve(before)?;
            let val = if sub > c { sub } else { c };
            if val < best {
                best = val;
                choice = Some(v);
            }
        }
        self.memo.insert(set, (best.clone(), choice));
        Ok(best)
    }

    fn width_of_order(&mut self, order: &[usize]) -> Result<Rational, ColorError> {
        let mut gone = 0u64;
        let mut w = Rational::zero();
        for &v in order {
            let c = self.cost(self.bag(gone, v))?;
            if c > w {
                w = c;
            }
            gone |= 1 << v;
        }
        Ok(w)
    }

    /// Greedy order: repeatedly eliminate the vertex with the cheapest bag.
    fn greedy_order(&mut self) -> Result<Vec<usize>, ColorError> {
        let n = self.elems.len();
        let mut gone = 0u64;
        let mut order = Vec::with_capacity(n);
        for _ in 0..n {
            let mut best: Option<(Rational, usize, u32)> = None;
            for v in (0..n).filter(|v| gone >> v & 1 == 0) {
                let bag = self.bag(gone, v);
                let c = self.cost(bag)?;
                let size = bag.count_ones();
                let better = match &best {
                    None => true,
                    Some((bc, _, bs)) => c < *bc || (c == *bc && size < *bs),
                };
                if better {
                    best = Some((c, v, size));
                }
            }
            let (_, v, _) = best.expect("a vertex remains");
            order.push(v);
            gone |= 1 << v;
        }
        Ok(order)
    }

    fn decomposition(&self, order: &[usize]) -> TreeDecomposition {
        let n = order.len();
        let mut pos = vec![0; n];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        let mut gone = 0u64;
        let mut bags = Vec::with_capacity(n);
        for &v in order {
            bags.push(self.bag(gone, v));
            gone |= 1 << v;
        }
        let mut parent: Vec<Option<usize>> = vec![None; n];
        for i in 0..n {
            let later = bags[i] & !(1u64 << order[i]);
            if later != 0 {
                let next = (0..n)
                    .filter(|&u| later >> u & 1 == 1)
                    .map(|u| pos[u])
                    .min()
                    .expect("nonempty");
                parent[i] = Some(next);
            }
        }
        // join the roots of separate components under the last bag
        for slot in parent.iter_mut().take(n.saturating_sub(1)) {
            if slot.is_none() {
                *slot = Some(n - 1);
            }
        }
        TreeDecomposition {
            bags: bags.iter().map(|&b| self.set_of(b)).collect(),
            parent,
            root: n - 1,
        }
    }
}

/// Re-roots a tree at `root`.
pub fn reroot(td: &TreeDecomposition, root: usize) -> TreeDecomposition {
    let n = td.len();
    let mut adj = vec![Vec::new(); n];
    for (p, c) in td.edges() {
        adj[p].push(c);
        adj[c].push(p);
    }
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(x) = stack.pop() {
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                parent[y] = Some(x);
                stack.push(y);
            }
        }
    }
    TreeDecomposition {
        bags: td.bags.clone(),
        parent,
        root,
    }
}

/// A decomposition of `open` of minimum width, rooted at the first bag that
/// contains the output tuple.
pub fn optimal_cwidth(open: &OpenStructure, keys: &KeySet, cap: usize) -> Result<WidthReport, ColorError> {
    let a = &open.structure;
    let elems: Vec<Elem> = a.universe().iter().copied().collect();
    let n = elems.len();
    if n > cap || n > 63 {
        return Err(ColorError::CapExceeded { size: n, cap });
    }
    if n == 0 {
        return report(a, keys, TreeDecomposition::single(BTreeSet::new()));
    }
    let idx: BTreeMap<Elem, usize> = elems.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut adj = vec![0u64; n];
    for edge in hypergraph_of(open).edges {
        for &x in &edge {
            for &y in &edge {
                if x != y {
                    adj[idx[&x]] |= 1 << idx[&y];
                }
            }
        }
    }
    let mut search = WidthSearch {
        a,
        keys,
        elems,
        adj,
        cost: HashMap::new(),
        memo: HashMap::new(),
        bound: Rational::zero(),
    };
    let greedy = search.greedy_order()?;
    search.bound = search.width_of_order(&greedy)?;
    let full = (1u64 << n) - 1;
    let best = search.solve(full)?;
    let order = if best < search.bound {
        let mut rev = Vec::with_capacity(n);
        let mut set = full;
        while set != 0 {
            let (_, choice) = &search.memo[&set];
            let v = choice.expect("states below the bound record a choice");
            rev.push(v);
            set &= !(1 << v);
        }
        rev.reverse();
        rev
    } else {
        greedy
    };
    let td = search.decomposition(&order);
    let target = open.tuple_set();
    let root = (0..td.len())
        .find(|&v| target.is_subset(&td.bags[v]))
        .expect("the output tuple is a clique of the primal graph");
    report(a, keys, reroot(&td, root))
}
