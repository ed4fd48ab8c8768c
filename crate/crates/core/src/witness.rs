//! Data families on which a set of elements has many images.
//!
//! An optimal coloring is scaled to integer multiplicities. Every element `x`
//! gets one copy per assignment of values in `1..=n` to its colors, and every
//! tuple of the source structure is copied once per assignment to the colors
//! it touches. The images of a colored set then number at least `n^N`, where
//! `N` counts the colors on the set, while relations hold at most
//! `n^{D*}` tuples per source tuple, `D*` being the most colors on one tuple.

use std::collections::{BTreeMap, BTreeSet};

use num::ToPrimitive;
use thiserror::Error;

use crate::colorwidth::{color_number, Color, ColorError, ColorSolution, WidthReport};
use crate::keys::KeySet;
use crate::simplex::Rational;
use crate::structure::{Elem, OpenStructure, Structure};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WitnessError {
    #[error("witness size must be at least 1")]
    ZeroSize,
    #[error("no coloring: the structure has no tuples")]
    NoColoring,
    #[error("too many colors on one tuple ({0}) to enumerate")]
    TooManyColors(usize),
    #[error(transparent)]
    Color(#[from] ColorError),
}

/// A source structure, a target set and a scaled optimal coloring.
#[derive(Clone, Debug)]
pub struct WitnessFamily {
    pub source: Structure,
    pub target: BTreeSet<Elem>,
    pub solution: ColorSolution,
    /// Colors of every element, numbered `0..colors`.
    pub colors: BTreeMap<Elem, Vec<usize>>,
    /// Colors on the target set.
    pub target_colors: usize,
    /// Largest number of colors on one tuple.
    pub tuple_colors: usize,
}

impl WitnessFamily {
    /// Builds the family for `target` in a chased structure.
    pub fn new(source: &Structure, keys: &KeySet, target: &BTreeSet<Elem>) -> Result<Self, WitnessError> {
        let solution = color_number(source, keys, target)?;
        if solution.degenerate {
            return Err(WitnessError::NoColoring);
        }
        let by_class = solution.element_colors(source.universe());
        // number the (class, copy) colors densely
        let all: BTreeSet<Color> = by_class.values().flatten().copied().collect();
        let index: BTreeMap<Color, usize> = all.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let colors: BTreeMap<Elem, Vec<usize>> = by_class
            .iter()
            .map(|(&e, cs)| (e, cs.iter().map(|c| index[c]).collect()))
            .collect();
        let union = |elems: &mut dyn Iterator<Item = &Elem>| -> BTreeSet<usize> {
            elems.flat_map(|e| colors[e].iter().copied()).collect()
        };
        let target_colors = union(&mut target.iter()).len();
        let tuple_colors = source
            .tuples()
            .map(|(_, t)| union(&mut t.iter()).len())
            .max()
            .unwrap_or(0);
        Ok(WitnessFamily {
            source: source.clone(),
            target: target.clone(),
            solution,
            colors,
            target_colors,
            tuple_colors,
        })
    }

    /// Color number of the target set; equals `target_colors / tuple_colors`.
    pub fn value(&self) -> &Rational {
        &self.solution.value
    }

    fn element_name(&self, x: Elem, assignment: &BTreeMap<usize, usize>) -> String {
        let parts: Vec<String> = self.colors[&x]
            .iter()
            .map(|c| format!("c{}={}", c + 1, assignment[c]))
            .collect();
        format!("{}#{}", self.source.name(x), parts.join(","))
    }

    /// The member of the family for values `1..=n`.
    pub fn generate(&self, n: usize) -> Result<Structure, WitnessError> {
        if n == 0 {
            return Err(WitnessError::ZeroSize);
        }
        let mut out = Structure::new(self.source.signature().clone());
        let mut ids: BTreeMap<String, Elem> = BTreeMap::new();
        for (rel, t) in self.source.tuples() {
            let touched: Vec<usize> = t
                .iter()
                .flat_map(|e| self.colors[e].iter().copied())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let count = u32::try_from(touched.len())
                .ok()
                .and_then(|k| n.checked_pow(k))
                .filter(|&c| c <= 1 << 24)
                .ok_or(WitnessError::TooManyColors(touched.len()))?;
            let mut values = vec![1usize; touched.len()];
            for _ in 0..count {
                let assignment: BTreeMap<usize, usize> =
                    touched.iter().copied().zip(values.iter().copied()).collect();
                let tuple: Vec<Elem> = t
                    .iter()
                    .map(|&x| {
                        let name = self.element_name(x, &assignment);
                        *ids.entry(name.clone()).or_insert_with(|| out.add_element(name))
                    })
                    .collect();
                out.add_tuple(rel, tuple).expect("same signature as the source");
                // odometer over 1..=n
                for v in values.iter_mut() {
                    if *v < n {
                        *v += 1;
                        break;
                    }
                    *v = 1;
                }
            }
        }
        Ok(out)
    }

    /// `n^N`: guaranteed lower bound on the number of images of the target.
    pub fn image_lower_bound(&self, n: usize) -> Option<usize> {
        n.checked_pow(self.target_colors.to_u32()?)
    }

    /// `n^{D*}`: guaranteed upper bound on tuples per source tuple.
    pub fn tuple_upper_bound(&self, n: usize) -> Option<usize> {
        n.checked_pow(self.tuple_colors.to_u32()?)
    }
}

/// Family for `target` in a chased structure, instantiated at `n`.
pub fn product_witness(
    source: &Structure,
    keys: &KeySet,
    target: &BTreeSet<Elem>,
    n: usize,
) -> Result<Structure, WitnessError> {
    WitnessFamily::new(source, keys, target)?.generate(n)
}

/// Family for the bag of largest color number in a width report of `core`.
/// Returns the chosen node with the family.
pub fn bag_witness(
    core: &OpenStructure,
    keys: &KeySet,
    width: &WidthReport,
) -> Result<(usize, WitnessFamily), WitnessError> {
    if core.structure.tuple_count() == 0 {
        return Err(WitnessError::NoColoring);
    }
    let t0 = width.argmax();
    let family = WitnessFamily::new(&core.structure, keys, &width.td.bags[t0])?;
    Ok((t0, family))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hom::homs_relation;
    use crate::keys::satisfies_keys;
    use crate::simplex::ratio;
    use crate::structure::Signature;

    fn triangle() -> Structure {
        let mut s = Structure::new(Signature::from_pairs([("E", 2)]).unwrap());
        let v: Vec<Elem> = ["x", "y", "z"].iter().map(|n| s.add_element(*n)).collect();
        for i in 0..3 {
            s.add_tuple("E", vec![v[i], v[(i + 1) % 3]]).unwrap();
        }
        s
    }

    #[test]
    fn triangle_family() {
        let b = triangle();
        let all = b.universe().clone();
        let fam = WitnessFamily::new(&b, &KeySet::new(), &all).unwrap();
        assert_eq!((fam.target_colors, fam.tuple_colors), (3, 2));
        assert_eq!(fam.value(), &ratio(3, 2));
        for n in 1..=3 {
            let d = fam.generate(n).unwrap();
            assert!(d.relation("E").len() <= 3 * n * n);
            let out: Vec<Elem> = all.iter().copied().collect();
            assert!(homs_relation(&b, &out, &d).unwrap().len() >= n.pow(3));
        }
    }

    #[test]
    fn keyed_atom_satisfies_keys() {
        let mut b = Structure::new(Signature::from_pairs([("R", 2)]).unwrap());
        let x = b.add_element("x");
        let y = b.add_element("y");
        b.add_tuple("R", vec![x, y]).unwrap();
        let keys = KeySet::unary([("R", 0)]);
        let d = product_witness(&b, &keys, &[x, y].into_iter().collect(), 3).unwrap();
        assert_eq!(d.relation("R").len(), 3);
        assert!(satisfies_keys(&d, &keys).unwrap());
        let name = d.name(*d.relation("R").iter().next().unwrap().first().unwrap());
        assert_eq!(name, "x#c1=1");
    }

    #[test]
    fn zero_size_is_rejected() {
        let b = triangle();
        let s = b.universe().clone();
        assert_eq!(product_witness(&b, &KeySet::new(), &s, 0).unwrap_err(), WitnessError::ZeroSize);
    }
}
