//! Plan evaluation over a structure, with per-subplan traces.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use super::{check_well_behaved, theta_classes, AstPath, PlanError, SpjPlan, Theta, ThetaReading};
use crate::structure::{Elem, Relation, Structure, Tuple};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub path: AstPath,
    pub plan: SpjPlan,
    pub output: Relation,
}

impl TraceEntry {
    pub fn cardinality(&self) -> usize {
        self.output.len()
    }
}

/// Outputs of every AST node, post-order (root last).
#[derive(Clone, Debug)]
pub struct EvalTrace {
    pub entries: Vec<TraceEntry>,
    pub elapsed: Duration,
}

impl EvalTrace {
    pub fn root(&self) -> &Relation {
        &self.entries.last().expect("a plan has at least one node").output
    }

    pub fn max_intermediate(&self) -> usize {
        self.entries.iter().map(TraceEntry::cardinality).max().unwrap_or(0)
    }

    /// Output of the first occurrence of `q`.
    pub fn output_of(&self, q: &SpjPlan) -> Option<&Relation> {
        self.entries.iter().find(|e| &e.plan == q).map(|e| &e.output)
    }
}

fn satisfies(t: &[Elem], theta: &Theta) -> bool {
    theta.iter().all(|&(j, k)| t[j - 1] == t[k - 1])
}

struct Evaluator<'a> {
    data: &'a Structure,
    well_behaved: bool,
    entries: Vec<TraceEntry>,
}

impl Evaluator<'_> {
    fn eval(&mut self, p: &SpjPlan, path: &mut AstPath) -> Relation {
        let out = match p {
            SpjPlan::Basic(name) => self.data.relation(name).clone(),
            SpjPlan::Select { theta, child } => {
                path.push(0);
                let input = self.eval(child, path);
                path.pop();
                input.into_iter().filter(|t| satisfies(t, theta)).collect()
            }
            SpjPlan::Project { cols, child } => {
                path.push(0);
                let input = self.eval(child, path);
                path.pop();
                input
                    .iter()
                    .map(|t| cols.iter().map(|&c| t[c - 1]).collect())
                    .collect()
            }
            SpjPlan::Join { theta, children } => {
                let mut inputs = Vec::with_capacity(children.len());
                for (i, c) in children.iter().enumerate() {
                    path.push(i);
                    inputs.push(self.eval(c, path));
                    path.pop();
                }
                if self.well_behaved {
                    hash_join_chain(&inputs, theta)
                } else {
                    product_then_select(&inputs, theta)
                }
            }
        };
        self.entries.push(TraceEntry {
            path: path.clone(),
            plan: p.clone(),
            output: out.clone(),
        });
        out
    }
}

/// Enumerates the cross product and keeps tuples satisfying θ.
fn product_then_select(inputs: &[Relation], theta: &Theta) -> Relation {
    let lists: Vec<Vec<&Tuple>> = inputs.iter().map(|r| r.iter().collect()).collect();
    let mut out = Relation::new();
    if lists.iter().any(Vec::is_empty) {
        return out;
    }
    let mut idx = vec![0usize; lists.len()];
    let mut buf: Tuple = Vec::new();
    loop {
        buf.clear();
        for (l, &i) in lists.iter().zip(&idx) {
            buf.extend_from_slice(l[i]);
        }
        if satisfies(&buf, theta) {
            out.insert(buf.clone());
        }
        // odometer step
        let mut d = lists.len();
        loop {
            if d == 0 {
                return out;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < lists[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Left-deep chain of binary hash joins over the closure classes of θ.
fn hash_join_chain(inputs: &[Relation], theta: &Theta) -> Relation {
    let arities: Vec<usize> = inputs
        .iter()
        .map(|r| r.iter().next().map_or(usize::MAX, Vec::len))
        .collect();
    if inputs.iter().any(Relation::is_empty) {
        return Relation::new();
    }
    let s: usize = arities.iter().sum();
    let class = theta_classes(theta, s);

    // first input filtered on its own equalities
    let mut offset = arities[0];
    let mut current: Vec<Tuple> = inputs[0]
        .iter()
        .filter(|t| (0..offset).all(|i| t[i] == t[class[i] - 1]))
        .cloned()
        .collect();

    for (r, &m) in inputs.iter().zip(&arities).skip(1) {
        // key columns: new columns whose class already has a column in `current`
        let mut probe = Vec::new();
        let mut build = Vec::new();
        let mut inner = Vec::new();
        for i in 0..m {
            let col = offset + i;
            let rep = class[col] - 1;
            if rep < offset {
                probe.push(rep);
                build.push(i);
            } else if rep < col {
                inner.push((i, rep - offset));
            }
        }
        let mut table: HashMap<Vec<Elem>, Vec<&Tuple>> = HashMap::new();
        for t in r {
            if inner.iter().all(|&(i, j)| t[i] == t[j]) {
                table
                    .entry(build.iter().map(|&i| t[i]).collect())
                    .or_default()
                    .push(t);
            }
        }
        let mut next = Vec::new();
        let mut key = Vec::with_capacity(probe.len());
        for left in &current {
            key.clear();
            key.extend(probe.iter().map(|&c| left[c]));
            if let Some(matches) = table.get(&key) {
                for right in matches {
                    let mut t = left.clone();
                    t.extend_from_slice(right);
                    next.push(t);
                }
            }
        }
        current = next;
        offset += m;
    }
    current.into_iter().collect()
}

/// Evaluates every operator verbatim; joins enumerate the full product.
pub fn evaluate_naive(p: &SpjPlan, data: &Structure) -> Result<EvalTrace, PlanError> {
    p.arity(data.signature())?;
    let start = Instant::now();
    let mut ev = Evaluator {
        data,
        well_behaved: false,
        entries: Vec::new(),
    };
    ev.eval(p, &mut Vec::new());
    Ok(EvalTrace {
        entries: ev.entries,
        elapsed: start.elapsed(),
    })
}

/// Evaluates a well-behaved plan with binary hash joins in child order.
pub fn evaluate_well_behaved(p: &SpjPlan, data: &Structure) -> Result<EvalTrace, PlanError> {
    if let Err(q) = check_well_behaved(p, data.signature(), ThetaReading::Closure)? {
        return Err(PlanError::NotWellBehaved(q.to_string()));
    }
    let start = Instant::now();
    let mut ev = Evaluator {
        data,
        well_behaved: true,
        entries: Vec::new(),
    };
    ev.eval(p, &mut Vec::new());
    Ok(EvalTrace {
        entries: ev.entries,
        elapsed: start.elapsed(),
    })
}
