//! End-to-end optimization and the degree and equivalence analyses around it.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::colorwidth::{color_number, ColorError};
use crate::hom::{compute_core, find_homomorphism, ElemMap};
use crate::keys::{chase, KeyError, KeySet};
use crate::plan::{is_well_behaved, PlanError, SpjPlan, ThetaReading};
use crate::represent::build_representation;
use crate::simplex::Rational;
use crate::structure::{OpenStructure, Signature, StructureError};
use crate::synthesis::{synthesize_plan, SynthesisError, SynthesisResult};

/// Universe-size limits for the exponential stages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Caps {
    /// Largest chased representation handed to core computation.
    pub core_universe: usize,
    /// Largest core handed to the width search.
    pub width_universe: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            core_universe: 12,
            width_universe: 16,
        }
    }
}

impl Caps {
    /// Both limits set to `n`.
    pub fn uniform(n: usize) -> Self {
        Caps {
            core_universe: n,
            width_universe: n,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Keys(#[from] KeyError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Color(#[from] ColorError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error("chased representation has {size} elements, core computation is capped at {cap}")]
    CoreCap { size: usize, cap: usize },
    #[error("plans have different arities ({0} and {1})")]
    ArityMismatch(usize, usize),
    #[error("synthesized plan failed its own check: {0}")]
    SelfCheck(String),
}

impl PipelineError {
    /// True for errors caused by a resource cap rather than bad input.
    pub fn is_resource_cap(&self) -> bool {
        matches!(
            self,
            PipelineError::CoreCap { .. }
                | PipelineError::Color(ColorError::CapExceeded { .. })
                | PipelineError::Synthesis(SynthesisError::Color(ColorError::CapExceeded { .. }))
        )
    }
}

/// Representation of `p`, chased under `keys`.
pub fn chased_representation(p: &SpjPlan, sig: &Signature, keys: &KeySet) -> Result<OpenStructure, PipelineError> {
    let (rep, _) = build_representation(p, sig)?;
    Ok(chase(&rep.open, keys).result)
}

/// Exponent of the worst-case output size of `p` over data satisfying `keys`.
pub fn output_degree(p: &SpjPlan, sig: &Signature, keys: &KeySet) -> Result<Rational, PipelineError> {
    let b = chased_representation(p, sig, keys)?;
    let s: BTreeSet<_> = b.tuple.iter().copied().collect();
    Ok(color_number(&b.structure, keys, &s)?.value)
}

/// Largest output degree over all subplans.
pub fn intermediate_degree_bound(p: &SpjPlan, sig: &Signature, keys: &KeySet) -> Result<Rational, PipelineError> {
    let mut best = Rational::from_integer(0.into());
    for q in p.subplans() {
        let d = output_degree(&q, sig, keys)?;
        if d > best {
            best = d;
        }
    }
    Ok(best)
}

/// Homomorphisms between the chased representations, both directions.
#[derive(Clone, Debug)]
pub struct Equivalence {
    pub forward: Option<ElemMap>,
    pub backward: Option<ElemMap>,
    pub first: OpenStructure,
    pub second: OpenStructure,
}

impl Equivalence {
    pub fn equivalent(&self) -> bool {
        self.forward.is_some() && self.backward.is_some()
    }
}

/// Equivalence of two plans over all data satisfying `keys`, with witnesses.
pub fn equivalence(p1: &SpjPlan, p2: &SpjPlan, sig: &Signature, keys: &KeySet) -> Result<Equivalence, PipelineError> {
    let (a1, a2) = (p1.arity(sig)?, p2.arity(sig)?);
    if a1 != a2 {
        return Err(PipelineError::ArityMismatch(a1, a2));
    }
    let first = chased_representation(p1, sig, keys)?;
    let second = chased_representation(p2, sig, keys)?;
    Ok(Equivalence {
        forward: find_homomorphism(&first, &second)?,
        backward: find_homomorphism(&second, &first)?,
        first,
        second,
    })
}

pub fn check_equivalence(p1: &SpjPlan, p2: &SpjPlan, sig: &Signature, keys: &KeySet) -> Result<bool, PipelineError> {
    Ok(equivalence(p1, p2, sig, keys)?.equivalent())
}

/// Core of the chased representation of `p`.
pub fn chased_core(p: &SpjPlan, sig: &Signature, keys: &KeySet, caps: Caps) -> Result<OpenStructure, PipelineError> {
    let b = chased_representation(p, sig, keys)?;
    if b.structure.len() > caps.core_universe {
        return Err(PipelineError::CoreCap {
            size: b.structure.len(),
            cap: caps.core_universe,
        });
    }
    Ok(compute_core(&b))
}

/// Well-behaved plan equivalent to `p` of minimum intermediate degree.
///
/// `allow_multiple_keys` admits several unary keys on one relation.
pub fn optimize(
    p: &SpjPlan,
    sig: &Signature,
    keys: &KeySet,
    caps: Caps,
    allow_multiple_keys: bool,
) -> Result<SynthesisResult, PipelineError> {
    keys.validate(sig)?;
    keys.check_pipeline(allow_multiple_keys)?;
    let core = chased_core(p, sig, keys, caps)?;
    let result = synthesize_plan(&core, keys, caps.width_universe)?;
    if !is_well_behaved(&result.plan, sig, ThetaReading::Closure)? {
        return Err(PipelineError::SelfCheck(format!("not well-behaved: {}", result.plan)));
    }
    if !check_equivalence(p, &result.plan, sig, keys)? {
        return Err(PipelineError::SelfCheck(format!("not equivalent: {}", result.plan)));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::parse_plan;
    use crate::simplex::{int, ratio};

    fn sig() -> Signature {
        Signature::from_pairs([("R", 2), ("S", 2), ("E", 2)]).unwrap()
    }

    fn plan(text: &str) -> SpjPlan {
        parse_plan(text).unwrap()
    }

    const TRIANGLE: &str = "(project (cols 1 3 5) (join (theta (2 3) (4 5) (6 1)) E E E))";

    #[test]
    fn output_degrees() {
        let none = KeySet::new();
        assert_eq!(output_degree(&plan("R"), &sig(), &none).unwrap(), int(1));
        assert_eq!(output_degree(&plan(TRIANGLE), &sig(), &none).unwrap(), ratio(3, 2));
        let composed = plan("(project (cols 1 4) (join (theta (2 3)) R R))");
        let keyed = KeySet::unary([("R", 0)]);
        assert_eq!(output_degree(&composed, &sig(), &keyed).unwrap(), int(1));
        assert_eq!(output_degree(&composed, &sig(), &none).unwrap(), int(2));
    }

    #[test]
    fn intermediate_degrees() {
        let none = KeySet::new();
        assert_eq!(intermediate_degree_bound(&plan("R"), &sig(), &none).unwrap(), int(1));
        let product = plan("(join (theta) R R)");
        assert_eq!(intermediate_degree_bound(&product, &sig(), &none).unwrap(), int(2));
    }

    #[test]
    fn equivalences() {
        let none = KeySet::new();
        let selfjoin = plan("(project (cols 1 2) (join (theta (1 3) (2 4)) R R))");
        assert!(check_equivalence(&plan("R"), &selfjoin, &sig(), &none).unwrap());
        assert!(!check_equivalence(&plan("R"), &plan("(project (cols 2 1) R)"), &sig(), &none).unwrap());
        assert!(matches!(
            check_equivalence(&plan("R"), &plan("(project (cols 1) R)"), &sig(), &none),
            Err(PipelineError::ArityMismatch(2, 1))
        ));
    }

    #[test]
    fn optimize_triangle_and_selfjoin() {
        let none = KeySet::new();
        let r = optimize(&plan(TRIANGLE), &sig(), &none, Caps::default(), false).unwrap();
        assert_eq!(r.degree, ratio(3, 2));
        assert_eq!(intermediate_degree_bound(&r.plan, &sig(), &none).unwrap(), ratio(3, 2));
        let selfjoin = plan("(project (cols 1 2) (join (theta (1 3) (2 4)) R R))");
        let r = optimize(&selfjoin, &sig(), &none, Caps::default(), false).unwrap();
        assert_eq!(r.degree, int(1));
        assert_eq!(r.core.structure.tuple_count(), 1);
    }

    #[test]
    fn optimize_keyed_composition() {
        let keyed = KeySet::unary([("R", 0)]);
        let p = plan("(project (cols 1 4) (join (theta (2 3)) R R))");
        let r = optimize(&p, &sig(), &keyed, Caps::default(), false).unwrap();
        assert_eq!(r.degree, int(1));
        assert_eq!(intermediate_degree_bound(&r.plan, &sig(), &keyed).unwrap(), int(1));
    }

    #[test]
    fn core_cap_is_reported() {
        let err = optimize(&plan(TRIANGLE), &sig(), &KeySet::new(), Caps::uniform(2), false).unwrap_err();
        assert!(err.is_resource_cap());
    }
}
