//! Open structures representing plans, with decompositions whose nodes follow
//! the plan AST.
//!
//! The construction keeps fresh elements for every column of every basic
//! occurrence and a union-find over them; selections and joins union the
//! identified columns. The quotient is taken once at the end.

use std::collections::{BTreeMap, BTreeSet};

use crate::hom::homs_relation;
use crate::plan::{evaluate_naive, AstPath, PlanError, SpjPlan};
use crate::structure::{Elem, OpenStructure, Signature, Structure, StructureError, Tuple};
use crate::treedec::TreeDecomposition;

/// An open structure whose homomorphic images are the plan's output.
#[derive(Clone, Debug)]
pub struct PRepresentation {
    pub open: OpenStructure,
    /// `(occurrence path, 1-based column)` to the element carrying that column.
    pub provenance: BTreeMap<(AstPath, usize), Elem>,
}

/// Tree decomposition of a representation with one node per AST occurrence.
/// Node ids follow the post-order of [`SpjPlan::occurrences`]; the root is last.
#[derive(Clone, Debug)]
pub struct PDecomposition {
    pub td: TreeDecomposition,
    pub paths: Vec<AstPath>,
    pub plans: Vec<SpjPlan>,
    pub beta: Vec<Tuple>,
}

impl PDecomposition {
    pub fn labels(&self) -> Vec<String> {
        self.plans.iter().map(ToString::to_string).collect()
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn fresh(&mut self) -> usize {
        self.parent.push(self.parent.len());
        self.parent.len() - 1
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let next = self.parent[y];
            self.parent[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smallest id represents the class
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

struct Builder<'a> {
    sig: &'a Signature,
    uf: UnionFind,
    names: Vec<String>,
    atoms: Vec<(String, Vec<usize>)>,
    paths: Vec<AstPath>,
    plans: Vec<SpjPlan>,
    beta: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
}

fn path_text(path: &[usize]) -> String {
    path.iter().map(ToString::to_string).collect::<Vec<_>>().join(".")
}

impl Builder<'_> {
    /// Returns the node id of the occurrence.
    fn build(&mut self, p: &SpjPlan, path: &mut AstPath) -> Result<usize, PlanError> {
        let mut child_nodes = Vec::new();
        let tuple: Vec<usize> = match p {
            SpjPlan::Basic(name) => {
                let arity = self
                    .sig
                    .arity(name)
                    .ok_or_else(|| PlanError::UnknownRelation(name.clone()))?;
                let elems: Vec<usize> = (0..arity)
                    .map(|i| {
                        let id = self.uf.fresh();
                        self.names.push(format!("{name}[{}]:{}", path_text(path), i + 1));
                        id
                    })
                    .collect();
                self.atoms.push((name.clone(), elems.clone()));
                elems
            }
            SpjPlan::Project { cols, child } => {
                path.push(0);
                let c = self.build(child, path)?;
                path.pop();
                child_nodes.push(c);
                cols.iter().map(|&i| self.beta[c][i - 1]).collect()
            }
            SpjPlan::Select { theta, child } => {
                path.push(0);
                let c = self.build(child, path)?;
                path.pop();
                child_nodes.push(c);
                let t = self.beta[c].clone();
                for &(j, k) in theta {
                    self.uf.union(t[j - 1], t[k - 1]);
                }
                t
            }
            SpjPlan::Join { theta, children } => {
                let mut t = Vec::new();
                for (i, child) in children.iter().enumerate() {
                    path.push(i);
                    let c = self.build(child, path)?;
                    path.pop();
                    child_nodes.push(c);
                    t.extend(self.beta[c].iter().copied());
                }
                for &(j, k) in theta {
                    self.uf.union(t[j - 1], t[k - 1]);
                }
                t
            }
        };
        let id = self.beta.len();
        self.beta.push(tuple);
        self.paths.push(path.clone());
        self.plans.push(p.clone());
        self.parent.push(None);
        for c in child_nodes {
            self.parent[c] = Some(id);
        }
        Ok(id)
    }
}

/// Representation of `p` over `sig` and its decomposition.
pub fn build_representation(
    p: &SpjPlan,
    sig: &Signature,
) -> Result<(PRepresentation, PDecomposition), PlanError> {
    p.arity(sig)?;
    let mut b = Builder {
        sig,
        uf: UnionFind { parent: Vec::new() },
        names: Vec::new(),
        atoms: Vec::new(),
        paths: Vec::new(),
        plans: Vec::new(),
        beta: Vec::new(),
        parent: Vec::new(),
    };
    let root = b.build(p, &mut Vec::new())?;

    let mut s = Structure::new(sig.clone());
    let rep = |x: usize, s: &mut Structure, uf: &mut UnionFind| {
        let r = uf.find(x);
        let e = Elem(r as u32);
        s.insert_element(e, b.names[r].clone());
        e
    };
    for (name, elems) in &b.atoms {
        let t: Tuple = elems.iter().map(|&x| rep(x, &mut s, &mut b.uf)).collect();
        s.add_tuple(name, t).expect("atoms match the signature");
    }
    let beta: Vec<Tuple> = b
        .beta
        .iter()
        .map(|t| t.iter().map(|&x| Elem(b.uf.find(x) as u32)).collect())
        .collect();
    let mut provenance = BTreeMap::new();
    for (path, t) in b.paths.iter().zip(&beta) {
        for (i, &e) in t.iter().enumerate() {
            provenance.insert((path.clone(), i + 1), e);
        }
    }
    let open = OpenStructure::new(s, beta[root].clone()).expect("every element comes from an atom");
    let td = TreeDecomposition {
        bags: beta.iter().map(|t| t.iter().copied().collect()).collect(),
        parent: b.parent,
        root,
    };
    Ok((
        PRepresentation { open, provenance },
        PDecomposition {
            td,
            paths: b.paths,
            plans: b.plans,
            beta,
        },
    ))
}

/// For every node v: `out(q_v, D) ⊇ homs(A[elements below v], β(v), D)`.
pub fn check_containment_property(
    p: &SpjPlan,
    rep: &PRepresentation,
    dec: &PDecomposition,
    data: &Structure,
) -> Result<bool, ContainmentError> {
    Ok(containment_violations(p, rep, dec, data)?.is_empty())
}

#[derive(Debug, thiserror::Error)]
pub enum ContainmentError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error("decomposition does not match the plan's occurrences")]
    Mismatch,
}

/// Node ids where containment fails on `data`.
pub fn containment_violations(
    p: &SpjPlan,
    rep: &PRepresentation,
    dec: &PDecomposition,
    data: &Structure,
) -> Result<Vec<usize>, ContainmentError> {
    let trace = evaluate_naive(p, data)?;
    if trace.entries.len() != dec.td.len() {
        return Err(ContainmentError::Mismatch);
    }
    let mut bad = Vec::new();
    for (v, entry) in trace.entries.iter().enumerate() {
        if entry.path != dec.paths[v] {
            return Err(ContainmentError::Mismatch);
        }
        let below: BTreeSet<Elem> = dec.td.elements_below(v);
        let sub = rep.open.structure.induced(&below);
        let homs = homs_relation(&sub, &dec.beta[v], data)?;
        if !homs.is_subset(&entry.output) {
            bad.push(v);
        }
    }
    Ok(bad)
}
