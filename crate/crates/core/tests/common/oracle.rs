//! Brute-force reference implementations.

use std::collections::BTreeSet;

use num::{One, Zero};
use spjopt::hom::{is_homomorphism, ElemMap};
use spjopt::simplex::int;
use spjopt::structure::Relation;
use spjopt::{Elem, OpenStructure, Rational, Structure};

/// Every map from `src` to `dst`, by counting in base |dst|.
pub fn all_maps(src: &Structure, dst: &Structure) -> Vec<ElemMap> {
    let from: Vec<Elem> = src.universe().iter().copied().collect();
    let to: Vec<Elem> = dst.universe().iter().copied().collect();
    if to.is_empty() {
        return if from.is_empty() { vec![ElemMap::new()] } else { Vec::new() };
    }
    let total = to.len().pow(from.len() as u32);
    (0..total)
        .map(|mut code| {
            from.iter()
                .map(|&x| {
                    let y = to[code % to.len()];
                    code /= to.len();
                    (x, y)
                })
                .collect()
        })
        .collect()
}

pub fn brute_homs(src: &Structure, outputs: &[Elem], dst: &Structure) -> Relation {
    all_maps(src, dst)
        .into_iter()
        .filter(|h| is_homomorphism(h, src, dst))
        .map(|h| outputs.iter().map(|e| h[e]).collect())
        .collect()
}

/// Non-surjective endomorphisms fixing the output tuple pointwise.
pub fn has_proper_retraction(a: &OpenStructure) -> bool {
    all_maps(&a.structure, &a.structure).into_iter().any(|h| {
        a.tuple.iter().all(|e| h[e] == *e)
            && is_homomorphism(&h, &a.structure, &a.structure)
            && h.values().collect::<BTreeSet<_>>().len() < a.structure.len()
    })
}

/// Smallest endomorphic image of `a` fixing its tuple.
pub fn smallest_retract_size(a: &OpenStructure) -> usize {
    all_maps(&a.structure, &a.structure)
        .into_iter()
        .filter(|h| a.tuple.iter().all(|e| h[e] == *e) && is_homomorphism(h, &a.structure, &a.structure))
        .map(|h| h.values().collect::<BTreeSet<_>>().len())
        .min()
        .unwrap()
}

pub type Matrix = Vec<Vec<Rational>>;

/// Solves a square system; `None` when singular.
pub fn solve(mut a: Matrix, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = &a[r][col] / &a[col][col];
                for c in col..n {
                    let delta = &f * &a[col][c];
                    a[r][c] -= delta;
                }
                let delta = &f * &b[col];
                b[r] -= delta;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Best objective over the vertices of `{x ≥ 0, rows·x ≤ bounds}`, found by
/// solving every choice of tight constraints. `minimize` flips the sense.
pub fn vertex_optimum(objective: &[Rational], rows: &Matrix, bounds: &[Rational], minimize: bool) -> Option<Rational> {
    let n = objective.len();
    let mut constraints: Vec<(Vec<Rational>, Rational)> =
        rows.iter().cloned().zip(bounds.iter().cloned()).collect();
    for i in 0..n {
        let mut e = vec![Rational::zero(); n];
        e[i] = -Rational::one();
        constraints.push((e, Rational::zero()));
    }
    let mut best: Option<Rational> = None;
    for pick in subsets(constraints.len(), n) {
        let a: Matrix = pick.iter().map(|&i| constraints[i].0.clone()).collect();
        let b: Vec<Rational> = pick.iter().map(|&i| constraints[i].1.clone()).collect();
        let Some(x) = solve(a, b) else { continue };
        let feasible = constraints.iter().all(|(row, bound)| {
            let lhs: Rational = row.iter().zip(&x).map(|(p, q)| p * q).sum();
            &lhs <= bound
        });
        if !feasible {
            continue;
        }
        let value: Rational = objective.iter().zip(&x).map(|(p, q)| p * q).sum();
        best = Some(match best {
            None => value,
            Some(b) if minimize => b.min(value),
            Some(b) => b.max(value),
        });
    }
    best
}

pub fn tuple_sets(a: &Structure) -> Vec<BTreeSet<Elem>> {
    a.tuples()
        .map(|(_, t)| t.iter().copied().collect::<BTreeSet<_>>())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Packing optimum over the given classes by vertex enumeration.
pub fn packing_by_vertices(a: &Structure, classes: &[BTreeSet<Elem>], s: &BTreeSet<Elem>) -> Rational {
    let hitting: Vec<&BTreeSet<Elem>> = classes.iter().filter(|u| !u.is_disjoint(s)).collect();
    if hitting.is_empty() {
        return Rational::zero();
    }
    let rows: Matrix = tuple_sets(a)
        .iter()
        .map(|t| hitting.iter().map(|u| if u.is_disjoint(t) { int(0) } else { int(1) }).collect())
        .collect();
    let bounds = vec![int(1); rows.len()];
    vertex_optimum(&vec![int(1); hitting.len()], &rows, &bounds, false).unwrap()
}

/// Fractional edge cover number of the tuples by vertex enumeration.
pub fn fractional_edge_cover(a: &Structure) -> Rational {
    let edges = tuple_sets(a);
    let verts: Vec<Elem> = a.universe().iter().copied().collect();
    // cover: for each vertex, -Σ_{e ∋ v} y_e ≤ -1
    let rows: Matrix = verts
        .iter()
        .map(|v| edges.iter().map(|e| if e.contains(v) { int(-1) } else { int(0) }).collect())
        .collect();
    let bounds = vec![int(-1); rows.len()];
    vertex_optimum(&vec![int(1); edges.len()], &rows, &bounds, true).unwrap()
}
