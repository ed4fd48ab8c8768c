//! Finite relational structures, open structures and their hypergraphs.
//!
//! Elements are interned integers ([`Elem`]) local to one structure, with a
//! side table of display names. All collections are ordered so iteration is
//! deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An element of a structure's universe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Elem(pub u32);

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

pub type Tuple = Vec<Elem>;
pub type Relation = BTreeSet<Tuple>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("relation name `{0}` is reserved for augmentation symbols")]
    ReservedName(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{name}` has arity {expected}, got a tuple of length {got}")]
    ArityMismatch { name: String, expected: usize, got: usize },
    #[error("element `{0}` is not in the universe")]
    UnknownElement(String),
    #[error("duplicate element name `{0}`")]
    DuplicateElement(String),
    #[error("element `{0}` is isolated (occurs in no relation tuple)")]
    IsolatedElement(String),
    #[error("signatures differ: {0}")]
    SignatureMismatch(String),
    #[error("tuple arities differ: {0} vs {1}")]
    TupleArityMismatch(usize, usize),
    #[error("malformed structure JSON: {0}")]
    Json(String),
}

/// Relation symbols with their arities.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    symbols: BTreeMap<String, usize>,
}

/// True for the names `R0`, `R1`, ... used by augmented structures.
pub fn is_reserved_name(name: &str) -> bool {
    name.len() > 1 && name.starts_with('R') && name[1..].bytes().all(|b| b.is_ascii_digit())
}

pub(crate) fn augmentation_symbol(arity: usize) -> String {
    format!("R{arity}")
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a user signature, rejecting reserved augmentation names.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self, StructureError>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut sig = Signature::new();
        for (name, arity) in pairs {
            let name = name.into();
            if is_reserved_name(&name) {
                return Err(StructureError::ReservedName(name));
            }
            sig.symbols.insert(name, arity);
        }
        Ok(sig)
    }

    /// Inserts a symbol without the reserved-name check.
    pub(crate) fn insert_unchecked(&mut self, name: impl Into<String>, arity: usize) {
        self.symbols.insert(name.into(), arity);
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.symbols.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.symbols.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.symbols.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Union of two signatures; fails when a shared symbol has two arities.
    pub fn merge(&self, other: &Signature) -> Result<Signature, StructureError> {
        let mut out = self.clone();
        for (name, arity) in other.iter() {
            match out.symbols.get(name) {
                Some(&a) if a != arity => {
                    return Err(StructureError::SignatureMismatch(format!(
                        "`{name}` has arity {a} and {arity}"
                    )))
                }
                _ => {
                    out.symbols.insert(name.to_string(), arity);
                }
            }
        }
        Ok(out)
    }

    /// Checks that every symbol of `self` occurs in `other` with the same arity.
    pub fn check_within(&self, other: &Signature) -> Result<(), StructureError> {
        for (name, arity) in self.iter() {
            match other.arity(name) {
                Some(a) if a == arity => {}
                Some(a) => {
                    return Err(StructureError::SignatureMismatch(format!(
                        "`{name}` has arity {arity} here and {a} in the other structure"
                    )))
                }
                None => {
                    return Err(StructureError::SignatureMismatch(format!(
                        "`{name}` is missing from the other structure"
                    )))
                }
            }
        }
        Ok(())
    }
}

/// A finite relational structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Structure {
    signature: Signature,
    universe: BTreeSet<Elem>,
    relations: BTreeMap<String, Relation>,
    names: BTreeMap<Elem, String>,
}

impl Structure {
    pub fn new(signature: Signature) -> Self {
        let relations = signature
            .iter()
            .map(|(name, _)| (name.to_string(), Relation::new()))
            .collect();
        Structure {
            signature,
            universe: BTreeSet::new(),
            relations,
            names: BTreeMap::new(),
        }
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn universe(&self) -> &BTreeSet<Elem> {
        &self.universe
    }

    pub fn len(&self) -> usize {
        self.universe.len()
    }

    pub fn is_empty(&self) -> bool {
        self.universe.is_empty()
    }

    /// Adds a fresh element with the given display name.
    pub fn add_element(&mut self, name: impl Into<String>) -> Elem {
        let id = self.universe.iter().next_back().map_or(0, |e| e.0 + 1);
        let e = Elem(id);
        self.insert_element(e, name);
        e
    }

    /// Adds an element with a chosen id (no-op if present).
    pub fn insert_element(&mut self, e: Elem, name: impl Into<String>) {
        if self.universe.insert(e) {
            self.names.insert(e, name.into());
        }
    }

    pub fn element_by_name(&self, name: &str) -> Option<Elem> {
        self.names.iter().find(|(_, n)| n.as_str() == name).map(|(e, _)| *e)
    }

    pub fn name(&self, e: Elem) -> String {
        self.names.get(&e).cloned().unwrap_or_else(|| e.to_string())
    }

    pub fn names_of(&self, tuple: &[Elem]) -> Vec<String> {
        tuple.iter().map(|&e| self.name(e)).collect()
    }

    pub fn add_tuple(&mut self, rel: &str, tuple: Tuple) -> Result<bool, StructureError> {
        let arity = self
            .signature
            .arity(rel)
            .ok_or_else(|| StructureError::UnknownRelation(rel.to_string()))?;
        if arity != tuple.len() {
            return Err(StructureError::ArityMismatch {
                name: rel.to_string(),
                expected: arity,
                got: tuple.len(),
            });
        }
        if let Some(bad) = tuple.iter().find(|e| !self.universe.contains(e)) {
            return Err(StructureError::UnknownElement(bad.to_string()));
        }
        Ok(self.relations.entry(rel.to_string()).or_default().insert(tuple))
    }

    pub fn relation(&self, rel: &str) -> &Relation {
        static EMPTY: Relation = BTreeSet::new();
        self.relations.get(rel).unwrap_or(&EMPTY)
    }

    pub fn relations(&self) -> impl Iterator<Item = (&str, &Relation)> {
        self.relations.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// All tuples as `(relation, tuple)` pairs, in relation-name then tuple order.
    pub fn tuples(&self) -> impl Iterator<Item = (&str, &Tuple)> {
        self.relations
            .iter()
            .flat_map(|(name, rel)| rel.iter().map(move |t| (name.as_str(), t)))
    }

    pub fn tuple_count(&self) -> usize {
        self.relations.values().map(BTreeSet::len).sum()
    }

    /// Maximum relation cardinality.
    pub fn max_relation_size(&self) -> usize {
        self.relations.values().map(BTreeSet::len).max().unwrap_or(0)
    }

    /// Elements that occur in no tuple.
    pub fn isolated_elements(&self) -> BTreeSet<Elem> {
        let mut seen = BTreeSet::new();
        for (_, t) in self.tuples() {
            seen.extend(t.iter().copied());
        }
        self.universe.difference(&seen).copied().collect()
    }

    /// Induced substructure on `keep` (intersected with the universe).
    pub fn induced(&self, keep: &BTreeSet<Elem>) -> Structure {
        let mut out = Structure::new(self.signature.clone());
        for &e in keep.intersection(&self.universe) {
            out.insert_element(e, self.name(e));
        }
        for (name, rel) in &self.relations {
            let kept: Relation = rel
                .iter()
                .filter(|t| t.iter().all(|e| keep.contains(e)))
                .cloned()
                .collect();
            out.relations.insert(name.clone(), kept);
        }
        out
    }

    /// Applies `f` to every element; names are taken from the image elements.
    pub fn map_elements(&self, f: impl Fn(Elem) -> Elem) -> Structure {
        let mut out = Structure::new(self.signature.clone());
        for &e in &self.universe {
            let img = f(e);
            if img == e || !out.universe.contains(&img) {
                out.universe.insert(img);
                out.names.insert(img, self.name(img));
            }
        }
        for (name, rel) in &self.relations {
            let mapped: Relation = rel.iter().map(|t| t.iter().map(|&e| f(e)).collect()).collect();
            out.relations.insert(name.clone(), mapped);
        }
        out
    }

    /// Structure with the same tuples over a larger signature.
    pub fn with_signature(&self, signature: Signature) -> Result<Structure, StructureError> {
        self.signature.check_within(&signature)?;
        let mut out = Structure::new(signature);
        out.universe = self.universe.clone();
        out.names = self.names.clone();
        for (name, rel) in &self.relations {
            out.relations.insert(name.clone(), rel.clone());
        }
        Ok(out)
    }

    /// Replaces the display name of an element.
    pub fn set_name(&mut self, e: Elem, name: impl Into<String>) {
        if self.universe.contains(&e) {
            self.names.insert(e, name.into());
        }
    }

    pub(crate) fn relations_mut(&mut self) -> &mut BTreeMap<String, Relation> {
        &mut self.relations
    }
}

/// A structure with a distinguished output tuple.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpenStructure {
    pub structure: Structure,
    pub tuple: Tuple,
}

impl OpenStructure {
    /// Validates that tuple entries are in the universe and that no element is isolated.
    pub fn new(structure: Structure, tuple: Tuple) -> Result<Self, StructureError> {
        if let Some(bad) = tuple.iter().find(|e| !structure.universe().contains(e)) {
            return Err(StructureError::UnknownElement(bad.to_string()));
        }
        if let Some(&iso) = structure.isolated_elements().iter().next() {
            return Err(StructureError::IsolatedElement(structure.name(iso)));
        }
        Ok(OpenStructure { structure, tuple })
    }

    /// A closed structure (empty output tuple).
    pub fn closed(structure: Structure) -> Result<Self, StructureError> {
        Self::new(structure, Vec::new())
    }

    pub fn arity(&self) -> usize {
        self.tuple.len()
    }

    pub fn tuple_set(&self) -> BTreeSet<Elem> {
        self.tuple.iter().copied().collect()
    }

    /// The augmented structure: adds `R_k` holding exactly the output tuple.
    pub fn augmented(&self) -> Structure {
        let k = self.tuple.len();
        let mut sig = self.structure.signature().clone();
        let sym = augmentation_symbol(k);
        sig.insert_unchecked(sym.clone(), k);
        let mut aug = self
            .structure
            .with_signature(sig)
            .expect("signature extension is always compatible");
        aug.relations_mut().insert(sym, std::iter::once(self.tuple.clone()).collect());
        aug
    }

    pub fn hypergraph(&self) -> Hypergraph {
        hypergraph_of(self)
    }
}

/// A hypergraph over structure elements.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Hypergraph {
    pub vertices: BTreeSet<Elem>,
    pub edges: BTreeSet<BTreeSet<Elem>>,
}

impl Hypergraph {
    /// Adjacency of the primal graph (two vertices adjacent iff they share an edge).
    pub fn primal_adjacency(&self) -> BTreeMap<Elem, BTreeSet<Elem>> {
        let mut adj: BTreeMap<Elem, BTreeSet<Elem>> =
            self.vertices.iter().map(|&v| (v, BTreeSet::new())).collect();
        for edge in &self.edges {
            for &a in edge {
                for &b in edge {
                    if a != b {
                        adj.entry(a).or_default().insert(b);
                    }
                }
            }
        }
        adj
    }
}

/// `H(A, a)`: vertices are the universe, edges the element sets of all tuples plus the output tuple.
pub fn hypergraph_of(open: &OpenStructure) -> Hypergraph {
    let mut edges: BTreeSet<BTreeSet<Elem>> = open
        .structure
        .tuples()
        .map(|(_, t)| t.iter().copied().collect())
        .collect();
    edges.insert(open.tuple_set());
    Hypergraph {
        vertices: open.structure.universe().clone(),
        edges,
    }
}

// --- JSON interchange ---------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StructureJson {
    pub signature: BTreeMap<String, usize>,
    pub universe: Vec<String>,
    pub relations: BTreeMap<String, Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuple: Option<Vec<String>>,
}

impl StructureJson {
    pub fn from_structure(s: &Structure, tuple: Option<&[Elem]>) -> Self {
        StructureJson {
            signature: s.signature().iter().map(|(k, v)| (k.to_string(), v)).collect(),
            universe: s.universe().iter().map(|&e| s.name(e)).collect(),
            relations: s
                .relations()
                .map(|(name, rel)| (name.to_string(), rel.iter().map(|t| s.names_of(t)).collect()))
                .collect(),
            tuple: tuple.map(|t| s.names_of(t)),
        }
    }

    /// Builds the structure and the optional tuple. Element ids follow universe order.
    pub fn to_structure(&self) -> Result<(Structure, Option<Tuple>), StructureError> {
        let sig = Signature::from_pairs(self.signature.iter().map(|(k, v)| (k.clone(), *v)))?;
        let mut s = Structure::new(sig);
        let mut ids = BTreeMap::new();
        for name in &self.universe {
            if ids.contains_key(name) {
                return Err(StructureError::DuplicateElement(name.clone()));
            }
            ids.insert(name.clone(), s.add_element(name.clone()));
        }
        let lookup = |n: &String| {
            ids.get(n)
                .copied()
                .ok_or_else(|| StructureError::UnknownElement(n.clone()))
        };
        for (rel, tuples) in &self.relations {
            if !s.signature().contains(rel) {
                return Err(StructureError::UnknownRelation(rel.clone()));
            }
            for t in tuples {
                let t = t.iter().map(lookup).collect::<Result<Vec<_>, _>>()?;
                s.add_tuple(rel, t)?;
            }
        }
        let tuple = match &self.tuple {
            Some(t) => Some(t.iter().map(lookup).collect::<Result<Vec<_>, _>>()?),
            None => None,
        };
        Ok((s, tuple))
    }
}

impl Structure {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(StructureJson::from_structure(self, None)).expect("serializable")
    }

    pub fn from_json_str(text: &str) -> Result<(Structure, Option<Tuple>), StructureError> {
        let raw: StructureJson =
            serde_json::from_str(text).map_err(|e| StructureError::Json(e.to_string()))?;
        raw.to_structure()
    }
}

impl OpenStructure {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(StructureJson::from_structure(&self.structure, Some(&self.tuple)))
            .expect("serializable")
    }

    /// Parses an open structure; an absent `"tuple"` means a closed structure.
    pub fn from_json_str(text: &str) -> Result<OpenStructure, StructureError> {
        let (s, t) = Structure::from_json_str(text)?;
        OpenStructure::new(s, t.unwrap_or_default())
    }
}
