//! Select-project-join plans.
//!
//! Column indices in plans are 1-based, as written in plan files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::structure::Signature;

pub mod eval;
pub mod parse;

pub use eval::{evaluate_naive, evaluate_well_behaved, EvalTrace, TraceEntry};
pub use parse::{parse_plan, parse_plan_file, print_plan, PlanFile};

/// Identifications `(j, k)` meaning column j equals column k (1-based).
pub type Theta = BTreeSet<(usize, usize)>;

/// Position of a node in the plan AST: child indices from the root.
pub type AstPath = Vec<usize>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SpjPlan {
    Basic(String),
    Select { theta: Theta, child: Box<SpjPlan> },
    Project { cols: Vec<usize>, child: Box<SpjPlan> },
    Join { theta: Theta, children: Vec<SpjPlan> },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("index {index} out of range for arity {arity} in `{node}`")]
    IndexOutOfRange { node: String, index: usize, arity: usize },
    #[error("join without children")]
    EmptyJoin,
    #[error("plan is not well-behaved at subplan `{0}`")]
    NotWellBehaved(String),
    #[error("arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),
}

pub fn theta_of(pairs: &[(usize, usize)]) -> Theta {
    pairs.iter().copied().collect()
}

impl SpjPlan {
    pub fn basic(name: impl Into<String>) -> Self {
        SpjPlan::Basic(name.into())
    }

    pub fn select(theta: Theta, child: SpjPlan) -> Self {
        SpjPlan::Select {
            theta,
            child: Box::new(child),
        }
    }

    pub fn project(cols: Vec<usize>, child: SpjPlan) -> Self {
        SpjPlan::Project {
            cols,
            child: Box::new(child),
        }
    }

    pub fn join(theta: Theta, children: Vec<SpjPlan>) -> Self {
        SpjPlan::Join { theta, children }
    }

    pub fn children(&self) -> Vec<&SpjPlan> {
        match self {
            SpjPlan::Basic(_) => Vec::new(),
            SpjPlan::Select { child, .. } | SpjPlan::Project { child, .. } => vec![child],
            SpjPlan::Join { children, .. } => children.iter().collect(),
        }
    }

    /// Arity per the inductive definition, validating indices along the way.
    pub fn arity(&self, sig: &Signature) -> Result<usize, PlanError> {
        match self {
            SpjPlan::Basic(name) => sig
                .arity(name)
                .ok_or_else(|| PlanError::UnknownRelation(name.clone())),
            SpjPlan::Select { theta, child } => {
                let m = child.arity(sig)?;
                self.check_theta(theta, m)?;
                Ok(m)
            }
            SpjPlan::Project { cols, child } => {
                let m = child.arity(sig)?;
                if let Some(&bad) = cols.iter().find(|&&c| c == 0 || c > m) {
                    return Err(self.out_of_range(bad, m));
                }
                Ok(cols.len())
            }
            SpjPlan::Join { theta, children } => {
                if children.is_empty() {
                    return Err(PlanError::EmptyJoin);
                }
                let mut s = 0;
                for c in children {
                    s += c.arity(sig)?;
                }
                self.check_theta(theta, s)?;
                Ok(s)
            }
        }
    }

    fn out_of_range(&self, index: usize, arity: usize) -> PlanError {
        PlanError::IndexOutOfRange {
            node: print_plan(self),
            index,
            arity,
        }
    }

    fn check_theta(&self, theta: &Theta, m: usize) -> Result<(), PlanError> {
        for &(j, k) in theta {
            for i in [j, k] {
                if i == 0 || i > m {
                    return Err(self.out_of_range(i, m));
                }
            }
        }
        Ok(())
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    /// Relation names referenced by the plan.
    pub fn relations(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (_, node) in self.occurrences() {
            if let SpjPlan::Basic(n) = node {
                out.insert(n.clone());
            }
        }
        out
    }

    /// Every AST node with its path, in post-order (root last).
    pub fn occurrences(&self) -> Vec<(AstPath, &SpjPlan)> {
        fn walk<'a>(p: &'a SpjPlan, path: &mut AstPath, out: &mut Vec<(AstPath, &'a SpjPlan)>) {
            for (i, c) in p.children().into_iter().enumerate() {
                path.push(i);
                walk(c, path, out);
                path.pop();
            }
            out.push((path.clone(), p));
        }
        let mut out = Vec::new();
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    /// The set of subplans in post-order, root last, without repetitions.
    pub fn subplans(&self) -> Vec<SpjPlan> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (_, q) in self.occurrences() {
            if seen.insert(q) {
                out.push(q.clone());
            }
        }
        out
    }

    /// The node at `path`.
    pub fn at(&self, path: &[usize]) -> Option<&SpjPlan> {
        match path.split_first() {
            None => Some(self),
            Some((&i, rest)) => self.children().get(i).and_then(|c| c.at(rest)),
        }
    }

    /// Merges stacked projections and drops projections keeping every column in order.
    pub fn simplify_projections(&self, sig: &Signature) -> Result<SpjPlan, PlanError> {
        self.arity(sig)?;
        Ok(self.simplified(sig))
    }

    fn simplified(&self, sig: &Signature) -> SpjPlan {
        match self {
            SpjPlan::Basic(_) => self.clone(),
            SpjPlan::Select { theta, child } => SpjPlan::select(theta.clone(), child.simplified(sig)),
            SpjPlan::Join { theta, children } => {
                SpjPlan::join(theta.clone(), children.iter().map(|c| c.simplified(sig)).collect())
            }
            SpjPlan::Project { cols, child } => {
                let (cols, inner) = match child.simplified(sig) {
                    SpjPlan::Project { cols: under, child } => (cols.iter().map(|&c| under[c - 1]).collect(), *child),
                    other => (cols.clone(), other),
                };
                let m = inner.arity(sig).expect("checked by the caller");
                if cols.len() == m && cols.iter().enumerate().all(|(i, &c)| c == i + 1) {
                    inner
                } else {
                    SpjPlan::project(cols, inner)
                }
            }
        }
    }
}

impl fmt::Display for SpjPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_plan(self))
    }
}

/// Closure classes of θ over columns 1..=s: `class[i-1]` is the smallest
/// column equated with column i.
pub fn theta_classes(theta: &Theta, s: usize) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..=s).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    for &(j, k) in theta {
        if j == 0 || k == 0 || j > s || k > s {
            continue;
        }
        let (a, b) = (find(&mut parent, j), find(&mut parent, k));
        let (lo, hi) = (a.min(b), a.max(b));
        parent[hi] = lo;
    }
    (1..=s).map(|i| find(&mut parent, i)).collect()
}

/// Reading of θ used by the well-behavedness check.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ThetaReading {
    /// Reflexive-symmetric-transitive closure of θ.
    #[default]
    Closure,
    /// θ as written, read symmetrically.
    Strict,
}

/// Join condition: some k covers all columns past the first child that are
/// not equated with a first-child column or with k.
fn join_is_well_behaved(theta: &Theta, first: usize, s: usize, reading: ThetaReading) -> bool {
    match reading {
        ThetaReading::Closure => {
            let class = theta_classes(theta, s);
            let anchored: BTreeSet<usize> = class[..first].iter().copied().collect();
            let loose: BTreeSet<usize> = class[first..]
                .iter()
                .copied()
                .filter(|c| !anchored.contains(c))
                .collect();
            loose.len() <= 1
        }
        ThetaReading::Strict => {
            let related = |i: usize, j: usize| i == j || theta.contains(&(i, j)) || theta.contains(&(j, i));
            (1..=s).any(|k| {
                (first + 1..=s)
                    .filter(|&i| i != k)
                    .all(|i| (1..=first).chain([k]).any(|j| related(i, j)))
            })
        }
    }
}

/// `Ok` when every join node is well-behaved; otherwise the first offending subplan (post-order).
pub fn check_well_behaved(
    p: &SpjPlan,
    sig: &Signature,
    reading: ThetaReading,
) -> Result<Result<(), SpjPlan>, PlanError> {
    p.arity(sig)?;
    for (_, q) in p.occurrences() {
        if let SpjPlan::Join { theta, children } = q {
            let first = children[0].arity(sig)?;
            let s = q.arity(sig)?;
            if !join_is_well_behaved(theta, first, s, reading) {
                return Ok(Err(q.clone()));
            }
        }
    }
    Ok(Ok(()))
}

pub fn is_well_behaved(p: &SpjPlan, sig: &Signature, reading: ThetaReading) -> Result<bool, PlanError> {
    Ok(check_well_behaved(p, sig, reading)?.is_ok())
}

/// Arities of every relation name occurring in a plan, from a signature.
pub fn restrict_signature(p: &SpjPlan, sig: &Signature) -> Result<Signature, PlanError> {
    let mut pairs = BTreeMap::new();
    for name in p.relations() {
        let a = sig
            .arity(&name)
            .ok_or_else(|| PlanError::UnknownRelation(name.clone()))?;
        pairs.insert(name, a);
    }
    let mut out = Signature::new();
    for (n, a) in pairs {
        out.insert_unchecked(n, a);
    }
    Ok(out)
}
