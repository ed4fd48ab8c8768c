//! Construction of a well-behaved plan for a chased core.
//!
//! Key dependencies are first eliminated: every atom is widened with the
//! elements its own elements determine, each new column fetched through a
//! binary "determines" relation derived from a witnessing atom. A minimum
//! width decomposition is then turned into a plan: per bag, a chain of joins
//! that adds one bag element at a time, and across bags, a bottom-up
//! combination that never adds columns.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::colorwidth::{optimal_cwidth, ColorError, WidthReport};
use crate::keys::{chase, KeySet};
use crate::plan::{SpjPlan, Theta};
use crate::simplex::{format_rational, Rational};
use crate::structure::{Elem, OpenStructure, Signature, Structure, Tuple};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthesisError {
    #[error("input is not a chase fixpoint under the given keys")]
    NotChased,
    #[error("key on `{0}` is not unary")]
    NonUnaryKey(String),
    #[error(transparent)]
    Color(#[from] ColorError),
}

/// An atom of the widened structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpandedAtom {
    pub source_relation: String,
    pub source_tuple: Tuple,
    /// Name in the widened structure; the source name when nothing is appended.
    pub relation: String,
    pub appended: Vec<Elem>,
    /// Element per column: the source tuple followed by the appended elements.
    pub columns: Vec<Elem>,
    /// Defining plan over the original signature.
    pub plan: SpjPlan,
}

impl ExpandedAtom {
    fn first_column(&self, e: Elem) -> Option<usize> {
        self.columns.iter().position(|&c| c == e)
    }

    fn elements(&self) -> BTreeSet<Elem> {
        self.columns.iter().copied().collect()
    }
}

/// Result of eliminating key dependencies from a chased structure.
#[derive(Clone, Debug)]
pub struct FdElimination {
    pub atoms: Vec<ExpandedAtom>,
    /// Plans for "x determines y" pairs, `(x, y) ↦ π(...)` of arity 2.
    pub binary: BTreeMap<(Elem, Elem), SpjPlan>,
    /// Everything each element determines, itself included.
    pub closure: BTreeMap<Elem, BTreeSet<Elem>>,
    /// The widened structure.
    pub structure: Structure,
}

impl FdElimination {
    /// Relations introduced by the elimination with their defining plans.
    pub fn new_relations(&self) -> Vec<(String, SpjPlan)> {
        let mut out: Vec<(String, SpjPlan)> = self
            .binary
            .iter()
            .map(|(&(x, y), p)| (binary_name(x, y), p.clone()))
            .collect();
        out.extend(
            self.atoms
                .iter()
                .filter(|a| !a.appended.is_empty())
                .map(|a| (a.relation.clone(), a.plan.clone())),
        );
        out
    }

    /// Closure of a set: all elements determined by some member.
    pub fn close(&self, set: &BTreeSet<Elem>) -> BTreeSet<Elem> {
        set.iter()
            .flat_map(|e| self.closure.get(e).into_iter().flatten().copied().chain([*e]))
            .collect()
    }
}

fn binary_name(x: Elem, y: Elem) -> String {
    format!("S{}_{}", x.0, y.0)
}

fn project(cols: Vec<usize>, child: SpjPlan) -> SpjPlan {
    SpjPlan::project(cols, child)
}

/// `π_{1,4}(⋈_{(2=3)}(first, second))`: composition of two binary relations.
fn compose(first: SpjPlan, second: SpjPlan) -> SpjPlan {
    project(
        vec![1, 4],
        SpjPlan::join([(2, 3)].into_iter().collect(), vec![first, second]),
    )
}

/// Widens every atom with the elements its elements determine.
pub fn eliminate_fds(core: &OpenStructure, keys: &KeySet) -> Result<FdElimination, SynthesisError> {
    if let Some(k) = keys.iter().find(|k| !k.is_unary()) {
        return Err(SynthesisError::NonUnaryKey(k.relation.clone()));
    }
    if chase(core, keys).result != *core {
        return Err(SynthesisError::NotChased);
    }
    let c = &core.structure;
    let positions = keys.unary_positions();

    // direct dependencies from the first witnessing atom
    let mut direct: BTreeMap<(Elem, Elem), SpjPlan> = BTreeMap::new();
    let mut succ: BTreeMap<Elem, BTreeSet<Elem>> = BTreeMap::new();
    for (rel, t) in c.tuples() {
        for &j in positions.get(rel).into_iter().flatten() {
            if j >= t.len() {
                continue;
            }
            for (i, &y) in t.iter().enumerate() {
                if y != t[j] {
                    direct
                        .entry((t[j], y))
                        .or_insert_with(|| project(vec![j + 1, i + 1], SpjPlan::basic(rel)));
                    succ.entry(t[j]).or_default().insert(y);
                }
            }
        }
    }

    // shortest chains, composed one hop at a time and shared by prefix
    let mut binary: BTreeMap<(Elem, Elem), SpjPlan> = BTreeMap::new();
    let mut closure: BTreeMap<Elem, BTreeSet<Elem>> = BTreeMap::new();
    let mut pred: BTreeMap<(Elem, Elem), Elem> = BTreeMap::new();
    for &x in c.universe() {
        let mut reached = BTreeSet::from([x]);
        let mut queue = VecDeque::from([x]);
        while let Some(u) = queue.pop_front() {
            for &v in succ.get(&u).into_iter().flatten() {
                if reached.insert(v) {
                    let plan = if u == x {
                        direct[&(x, v)].clone()
                    } else {
                        compose(binary[&(x, u)].clone(), direct[&(u, v)].clone())
                    };
                    binary.insert((x, v), plan);
                    pred.insert((x, v), u);
                    queue.push_back(v);
                }
            }
        }
        closure.insert(x, reached);
    }

    let mut atoms = Vec::new();
    let mut used = BTreeSet::new();
    for (idx, (rel, t)) in c.tuples().enumerate() {
        let own: BTreeSet<Elem> = t.iter().copied().collect();
        let wide: BTreeSet<Elem> = own.iter().flat_map(|e| closure[e].iter().copied()).collect();
        let appended: Vec<Elem> = wide.difference(&own).copied().collect();

        let mut theta = Theta::new();
        for b in 0..t.len() {
            if let Some(a) = t[..b].iter().position(|&e| e == t[b]) {
                theta.insert((a + 1, b + 1));
            }
        }
        let mut plan = if theta.is_empty() {
            SpjPlan::basic(rel)
        } else {
            SpjPlan::select(theta, SpjPlan::basic(rel))
        };
        let key_elem = positions
            .get(rel)
            .and_then(|ps| ps.first())
            .and_then(|&p| t.get(p).copied());
        let mut columns = t.clone();
        for &y in &appended {
            let source = key_elem
                .filter(|k| closure[k].contains(&y))
                .or_else(|| own.iter().copied().find(|x| closure[x].contains(&y)))
                .expect("appended elements are determined by the atom");
            used.insert((source, y));
            let m = columns.len();
            let cx = columns.iter().position(|&e| e == source).expect("source is a column") + 1;
            let mut keep: Vec<usize> = (1..=m).collect();
            keep.push(m + 2);
            plan = project(
                keep,
                SpjPlan::join([(cx, m + 1)].into_iter().collect(), vec![plan, binary[&(source, y)].clone()]),
            );
            columns.push(y);
        }
        let relation = if appended.is_empty() {
            rel.to_string()
        } else {
            format!("{rel}'{idx}")
        };
        atoms.push(ExpandedAtom {
            source_relation: rel.to_string(),
            source_tuple: t.clone(),
            relation,
            appended,
            columns,
            plan,
        });
    }
    // keep the binary plans that were used, with their chain prefixes
    let mut needed = BTreeSet::new();
    for &(x, y) in &used {
        let mut cur = y;
        while cur != x && needed.insert((x, cur)) {
            cur = pred[&(x, cur)];
        }
    }
    binary.retain(|k, _| needed.contains(k));

    let mut sig = Signature::new();
    for a in &atoms {
        sig.insert_unchecked(a.relation.clone(), a.columns.len());
    }
    let mut widened = Structure::new(sig);
    for &e in c.universe() {
        widened.insert_element(e, c.name(e));
    }
    for a in &atoms {
        widened
            .add_tuple(&a.relation, a.columns.clone())
            .expect("columns are elements of the core");
    }
    Ok(FdElimination {
        atoms,
        binary,
        closure,
        structure: widened,
    })
}

/// Synthesized plan with the data it was built from.
#[derive(Clone, Debug)]
pub struct SynthesisResult {
    pub plan: SpjPlan,
    pub degree: Rational,
    /// Minimum-width decomposition of the core.
    pub width: WidthReport,
    /// Bags widened by the key closure, in the decomposition's node order.
    pub bags: Vec<BTreeSet<Elem>>,
    /// Element order used by each bag's join chain.
    pub bag_orders: Vec<Vec<Elem>>,
    /// Join chain per bag: plans adding one element each.
    pub chains: Vec<Vec<SpjPlan>>,
    pub elimination: FdElimination,
    pub core: OpenStructure,
}

impl SynthesisResult {
    pub fn to_json(&self) -> serde_json::Value {
        let new_relations: Vec<serde_json::Value> = self
            .elimination
            .new_relations()
            .into_iter()
            .map(|(name, plan)| serde_json::json!({"name": name, "definingPlan": plan.to_string()}))
            .collect();
        serde_json::json!({
            "plan": self.plan.to_string(),
            "degree": format_rational(&self.degree),
            "decomposition": self.width.to_json(&self.core.structure),
            "newRelations": new_relations,
        })
    }
}

/// Bag order: smallest element first, then repeatedly the smallest element
/// sharing an atom with an earlier one (or the smallest left when none does).
fn connected_order(bag: &BTreeSet<Elem>, atoms: &[ExpandedAtom]) -> Vec<Elem> {
    let mut order: Vec<Elem> = Vec::with_capacity(bag.len());
    let mut left: BTreeSet<Elem> = bag.clone();
    while let Some(&first_left) = left.iter().next() {
        let next = left
            .iter()
            .copied()
            .find(|&v| {
                atoms.iter().any(|a| {
                    let els = a.elements();
                    els.contains(&v) && order.iter().any(|u| els.contains(u))
                })
            })
            .unwrap_or(first_left);
        order.push(next);
        left.remove(&next);
    }
    order
}

/// Join chain over one bag; the last plan has the bag's columns in `order`.
fn bag_chain(order: &[Elem], atoms: &[ExpandedAtom]) -> Vec<SpjPlan> {
    let mut chain: Vec<SpjPlan> = Vec::with_capacity(order.len());
    for (i, &a) in order.iter().enumerate() {
        let prefix = &order[..=i];
        let mut children = Vec::new();
        let mut theta = Theta::new();
        let mut width;
        if i == 0 {
            width = 0;
        } else {
            children.push(chain[i - 1].clone());
            width = i;
        }
        let mut first_a: Option<usize> = None;
        for atom in atoms.iter().filter(|at| at.columns.contains(&a)) {
            let elems: Vec<Elem> = prefix
                .iter()
                .copied()
                .filter(|e| atom.columns.contains(e))
                .collect();
            let cols: Vec<usize> = elems
                .iter()
                .map(|&e| atom.first_column(e).expect("element of the atom") + 1)
                .collect();
            for (j, &e) in elems.iter().enumerate() {
                let col = width + j + 1;
                if e == a {
                    match first_a {
                        None => first_a = Some(col),
                        Some(f) => {
                            theta.insert((f, col));
                        }
                    }
                } else {
                    let prev = prefix.iter().position(|&p| p == e).expect("earlier element") + 1;
                    theta.insert((prev, col));
                }
            }
            width += elems.len();
            children.push(project(cols, atom.plan.clone()));
        }
        let k = first_a.expect("every element lies in some atom");
        let plan = if i == 0 && children.len() == 1 {
            children.pop().expect("one child")
        } else {
            let joined = SpjPlan::join(theta, children);
            if i == 0 {
                project(vec![k], joined)
            } else {
                let mut keep: Vec<usize> = (1..=i).collect();
                keep.push(k);
                project(keep, joined)
            }
        };
        chain.push(plan);
    }
    chain
}

/// Builds a well-behaved plan equivalent to the core's query.
pub fn synthesize_plan(core: &OpenStructure, keys: &KeySet, cap: usize) -> Result<SynthesisResult, SynthesisError> {
    let elim = eliminate_fds(core, keys)?;
    let width = optimal_cwidth(core, keys, cap)?;
    let nullary: Vec<SpjPlan> = elim
        .atoms
        .iter()
        .filter(|a| a.columns.is_empty())
        .map(|a| a.plan.clone())
        .collect();

    if core.structure.is_empty() {
        let plan = match nullary.len() {
            1 => nullary[0].clone(),
            _ => SpjPlan::join(Theta::new(), nullary),
        };
        return Ok(SynthesisResult {
            plan,
            degree: Rational::from_integer(0.into()),
            bags: vec![BTreeSet::new()],
            bag_orders: vec![Vec::new()],
            chains: vec![Vec::new()],
            width,
            elimination: elim,
            core: core.clone(),
        });
    }

    let td = &width.td;
    let bags: Vec<BTreeSet<Elem>> = td.bags.iter().map(|b| elim.close(b)).collect();
    let bag_orders: Vec<Vec<Elem>> = bags.iter().map(|b| connected_order(b, &elim.atoms)).collect();
    let chains: Vec<Vec<SpjPlan>> = bag_orders.iter().map(|o| bag_chain(o, &elim.atoms)).collect();

    let mut results: Vec<Option<SpjPlan>> = vec![None; td.len()];
    for t in td.bottom_up() {
        let own = chains[t].last().expect("bags are nonempty").clone();
        let kids = td.children(t);
        let plan = if kids.is_empty() {
            own
        } else {
            let order = &bag_orders[t];
            let mut children = vec![own];
            let mut theta = Theta::new();
            let mut width_so_far = order.len();
            for c in kids {
                let shared: Vec<Elem> = order.iter().copied().filter(|e| bags[c].contains(e)).collect();
                let cols: Vec<usize> = shared
                    .iter()
                    .map(|e| bag_orders[c].iter().position(|x| x == e).expect("shared element") + 1)
                    .collect();
                for (j, e) in shared.iter().enumerate() {
                    let mine = order.iter().position(|x| x == e).expect("own element") + 1;
                    theta.insert((mine, width_so_far + j + 1));
                }
                width_so_far += shared.len();
                children.push(project(cols, results[c].take().expect("children first")));
            }
            project((1..=order.len()).collect(), SpjPlan::join(theta, children))
        };
        results[t] = Some(plan);
    }
    let root = td.root;
    let mut plan = results[root].take().expect("root computed");
    if !nullary.is_empty() {
        let mut children = vec![plan];
        children.extend(nullary);
        plan = SpjPlan::join(Theta::new(), children);
    }
    let order = &bag_orders[root];
    let out_cols: Vec<usize> = core
        .tuple
        .iter()
        .map(|e| order.iter().position(|x| x == e).expect("root bag covers the output") + 1)
        .collect();
    let plan = project(out_cols, plan)
        .simplify_projections(core.structure.signature())
        .expect("synthesized plans use the core's relations");

    Ok(SynthesisResult {
        plan,
        degree: width.width.clone(),
        bags,
        bag_orders,
        chains,
        width,
        elimination: elim,
        core: core.clone(),
    })
}
