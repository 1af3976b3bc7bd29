// SPDX-License-Identifier: Apache-2.0

//! Finite state spaces: attributes, exact states, epistemic states and their
//! counting volume, and property value spaces.
//!
//! An [`ExactState`] assigns one value to every registered (object, attribute)
//! pair. An [`EpistemicState`] is a set of exact states that share a
//! [`Registry`]; its volume is its cardinality.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Enumerating more exact states than this is refused.
pub const MAX_ENUMERATED_STATES: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateSpaceError {
    #[error("void state has no volume meaning")]
    VoidState,
    #[error("part is not contained in whole")]
    NotSubset,
    #[error("contradictory knowledge")]
    Contradictory,
    #[error("subjects' knowledge contradicts")]
    SubjectsContradict,
    #[error("no subject states given")]
    NoSubjects,
    #[error("knowledge dimension needs at least one object")]
    NoObjects,
    #[error("object {object} has no distinct attributes")]
    ZeroAttributes { object: usize },
    #[error("states belong to different registries")]
    RegistryMismatch,
    #[error("attribute `{id}`: {reason}")]
    InvalidAttribute { id: String, reason: String },
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("object `{0}` registered twice")]
    DuplicateObject(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("pair ({object}, {attribute}) registered twice")]
    DuplicatePair { object: String, attribute: String },
    #[error("exact state does not fit the registry: {0}")]
    IllegalState(String),
    #[error("a physical state needs at least two exact states, got {0}")]
    NotPhysical(usize),
    #[error("registry has {0} exact states, more than can be enumerated")]
    TooLarge(u128),
    #[error("property `{id}`: {reason}")]
    InvalidProperty { id: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Ordered,
    Directed,
    Binary,
    Circular,
}

/// A named attribute with a finite value list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeDef {
    id: String,
    kind: AttributeKind,
    values: Vec<String>,
}

impl AttributeDef {
    pub fn new(id: impl Into<String>, kind: AttributeKind, values: Vec<String>) -> Result<Self, StateSpaceError> {
        let id = id.into();
        let bad = |reason: &str| StateSpaceError::InvalidAttribute {
            id: id.clone(),
            reason: reason.to_string(),
        };
        let distinct: BTreeSet<&String> = values.iter().collect();
        if distinct.len() != values.len() {
            return Err(bad("duplicate value symbols"));
        }
        match kind {
            AttributeKind::Binary if values.len() != 2 => return Err(bad("binary attribute needs exactly 2 values")),
            AttributeKind::Circular if values.len() < 3 => {
                return Err(bad("circular attribute needs at least 3 values"))
            }
            _ if values.is_empty() => return Err(bad("no values")),
            _ => {}
        }
        if values.len() > u16::MAX as usize {
            return Err(bad("too many values"));
        }
        Ok(AttributeDef { id, kind, values })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> AttributeKind {
        self.kind
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index_of(&self, value: &str) -> Option<usize> {
        self.values.iter().position(|v| v == value)
    }

    /// Whether `mid` lies between `a` and `b`.
    ///
    /// Needs three different values; binary attributes carry no betweenness.
    /// On a circle every third value lies on one of the two arcs joining the
    /// others, so the relation holds for any distinct triple.
    pub fn is_between(&self, a: usize, mid: usize, b: usize) -> Option<bool> {
        let n = self.values.len();
        if a >= n || mid >= n || b >= n || a == mid || mid == b || a == b {
            return None;
        }
        match self.kind {
            AttributeKind::Binary => None,
            AttributeKind::Circular => Some(true),
            AttributeKind::Ordered | AttributeKind::Directed => Some((a < mid && mid < b) || (b < mid && mid < a)),
        }
    }

    /// Whether `later` succeeds `earlier`; defined only for directed attributes.
    pub fn succeeds(&self, later: usize, earlier: usize) -> Option<bool> {
        let n = self.values.len();
        if self.kind != AttributeKind::Directed || later >= n || earlier >= n || later == earlier {
            return None;
        }
        Some(later > earlier)
    }
}

/// Objects and the attributes they carry. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registry {
    attributes: Vec<AttributeDef>,
    objects: Vec<String>,
    /// (object index, attribute index) per slot, in declaration order.
    slots: Vec<(usize, usize)>,
}

impl Registry {
    /// `objects` pairs each object id with the ids of the attributes it carries.
    pub fn new(attributes: Vec<AttributeDef>, objects: Vec<(String, Vec<String>)>) -> Result<Self, StateSpaceError> {
        let mut slots = Vec::new();
        let mut seen = BTreeSet::new();
        let mut names = Vec::with_capacity(objects.len());
        for (oi, (object, attrs)) in objects.into_iter().enumerate() {
            if names.contains(&object) {
                return Err(StateSpaceError::DuplicateObject(object));
            }
            for attr in attrs {
                let ai = attributes
                    .iter()
                    .position(|a| a.id == attr)
                    .ok_or_else(|| StateSpaceError::UnknownAttribute(attr.clone()))?;
                if !seen.insert((oi, ai)) {
                    return Err(StateSpaceError::DuplicatePair {
                        object: object.clone(),
                        attribute: attr,
                    });
                }
                slots.push((oi, ai));
            }
            names.push(object);
        }
        Ok(Registry {
            attributes,
            objects: names,
            slots,
        })
    }

    pub fn attributes(&self) -> &[AttributeDef] {
        &self.attributes
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn slot(&self, object: &str, attribute: &str) -> Result<usize, StateSpaceError> {
        let oi = self
            .objects
            .iter()
            .position(|o| o == object)
            .ok_or_else(|| StateSpaceError::UnknownObject(object.to_string()))?;
        let ai = self
            .attributes
            .iter()
            .position(|a| a.id == attribute)
            .ok_or_else(|| StateSpaceError::UnknownAttribute(attribute.to_string()))?;
        self.slots
            .iter()
            .position(|&s| s == (oi, ai))
            .ok_or_else(|| StateSpaceError::IllegalState(format!("{object} has no {attribute}")))
    }

    pub fn slot_attribute(&self, slot: usize) -> &AttributeDef {
        &self.attributes[self.slots[slot].1]
    }

    pub fn slot_object(&self, slot: usize) -> usize {
        self.slots[slot].0
    }

    /// Number of distinct attributes carried by each object.
    pub fn attribute_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.objects.len()];
        for &(o, _) in &self.slots {
            counts[o] += 1;
        }
        counts
    }

    /// Total number of exact states.
    pub fn state_count(&self) -> u128 {
        self.slots
            .iter()
            .map(|&(_, a)| self.attributes[a].len() as u128)
            .fold(1u128, |acc, n| acc.saturating_mul(n))
    }

    pub fn check(&self, z: &ExactState) -> Result<(), StateSpaceError> {
        if z.0.len() != self.slots.len() {
            return Err(StateSpaceError::IllegalState(format!(
                "expected {} slots, got {}",
                self.slots.len(),
                z.0.len()
            )));
        }
        for (slot, &v) in z.0.iter().enumerate() {
            if v as usize >= self.slot_attribute(slot).len() {
                return Err(StateSpaceError::IllegalState(format!(
                    "value {v} out of range in slot {slot}"
                )));
            }
        }
        Ok(())
    }

    /// All exact states in mixed-radix order (last slot fastest).
    pub fn enumerate(&self) -> Result<Vec<ExactState>, StateSpaceError> {
        let total = self.state_count();
        if total > MAX_ENUMERATED_STATES as u128 {
            return Err(StateSpaceError::TooLarge(total));
        }
        let radix: Vec<u16> = self
            .slots
            .iter()
            .map(|&(_, a)| self.attributes[a].len() as u16)
            .collect();
        let mut out = Vec::with_capacity(total as usize);
        let mut cur = vec![0u16; radix.len()];
        for _ in 0..total {
            out.push(ExactState(cur.clone()));
            for i in (0..cur.len()).rev() {
                cur[i] += 1;
                if cur[i] < radix[i] {
                    break;
                }
                cur[i] = 0;
            }
        }
        Ok(out)
    }
}

/// One value index per registry slot.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactState(Vec<u16>);

impl ExactState {
    pub fn new(values: Vec<u16>) -> Self {
        ExactState(values)
    }

    pub fn values(&self) -> &[u16] {
        &self.0
    }

    pub fn value(&self, slot: usize) -> usize {
        self.0[slot] as usize
    }

    pub fn with_value(&self, slot: usize, value: usize) -> Self {
        let mut v = self.0.clone();
        v[slot] = value as u16;
        ExactState(v)
    }
}

/// Set of exact states over one registry.
///
/// Empty sets are allowed as intermediate values; operations that need a
/// nonempty state report [`StateSpaceError::VoidState`].
#[derive(Debug, Clone)]
pub struct EpistemicState {
    registry: Arc<Registry>,
    members: BTreeSet<ExactState>,
}

impl PartialEq for EpistemicState {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.registry, &other.registry) || self.registry == other.registry)
            && self.members == other.members
    }
}

impl Eq for EpistemicState {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connective {
    And,
    Or,
    Not,
}

impl EpistemicState {
    pub fn new(
        registry: Arc<Registry>,
        members: impl IntoIterator<Item = ExactState>,
    ) -> Result<Self, StateSpaceError> {
        let members: BTreeSet<ExactState> = members.into_iter().collect();
        for z in &members {
            registry.check(z)?;
        }
        Ok(EpistemicState { registry, members })
    }

    /// A state that may stand for actual knowledge of a physical object.
    pub fn physical(
        registry: Arc<Registry>,
        members: impl IntoIterator<Item = ExactState>,
    ) -> Result<Self, StateSpaceError> {
        let s = Self::new(registry, members)?;
        if s.members.len() < 2 {
            return Err(StateSpaceError::NotPhysical(s.members.len()));
        }
        Ok(s)
    }

    /// The whole state space of the registry.
    pub fn full(registry: Arc<Registry>) -> Result<Self, StateSpaceError> {
        let all = registry.enumerate()?;
        Ok(EpistemicState {
            registry,
            members: all.into_iter().collect(),
        })
    }

    pub fn empty(registry: Arc<Registry>) -> Self {
        EpistemicState {
            registry,
            members: BTreeSet::new(),
        }
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    pub fn members(&self) -> &BTreeSet<ExactState> {
        &self.members
    }

    pub fn contains(&self, z: &ExactState) -> bool {
        self.members.contains(z)
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_subset(&self, other: &EpistemicState) -> bool {
        self.members.is_subset(&other.members)
    }

    pub fn is_disjoint(&self, other: &EpistemicState) -> bool {
        self.members.is_disjoint(&other.members)
    }

    /// Members satisfying `keep`.
    pub fn filter(&self, keep: impl Fn(&ExactState) -> bool) -> EpistemicState {
        EpistemicState {
            registry: self.registry.clone(),
            members: self.members.iter().filter(|z| keep(z)).cloned().collect(),
        }
    }

    fn same_registry(&self, other: &EpistemicState) -> Result<(), StateSpaceError> {
        if Arc::ptr_eq(&self.registry, &other.registry) || self.registry == other.registry {
            Ok(())
        } else {
            Err(StateSpaceError::RegistryMismatch)
        }
    }

    pub fn intersection(&self, other: &EpistemicState) -> Result<Self, StateSpaceError> {
        self.same_registry(other)?;
        Ok(self.with_members(self.members.intersection(&other.members).cloned().collect()))
    }

    pub fn union(&self, other: &EpistemicState) -> Result<Self, StateSpaceError> {
        self.same_registry(other)?;
        Ok(self.with_members(self.members.union(&other.members).cloned().collect()))
    }

    pub fn difference(&self, other: &EpistemicState) -> Result<Self, StateSpaceError> {
        self.same_registry(other)?;
        Ok(self.with_members(self.members.difference(&other.members).cloned().collect()))
    }

    fn with_members(&self, members: BTreeSet<ExactState>) -> Self {
        EpistemicState {
            registry: self.registry.clone(),
            members,
        }
    }

    /// Distinct-attribute count per object, multiplied out.
    pub fn knowledge_dimension(&self) -> Result<u128, StateSpaceError> {
        knowledge_dimension(&self.registry.attribute_counts())
    }
}

/// Counting measure. Additive over disjoint unions, one on singletons.
pub fn volume(s: &EpistemicState) -> Result<usize, StateSpaceError> {
    if s.is_empty() {
        return Err(StateSpaceError::VoidState);
    }
    Ok(s.len())
}

/// `V[part] / V[whole]` as an exact fraction.
pub fn relative_volume(part: &EpistemicState, whole: &EpistemicState) -> Result<BigRational, StateSpaceError> {
    part.same_registry(whole)?;
    let w = volume(whole)?;
    if !part.is_subset(whole) {
        return Err(StateSpaceError::NotSubset);
    }
    Ok(BigRational::new(BigInt::from(part.len()), BigInt::from(w)))
}

pub fn combine(
    a: &EpistemicState,
    b: &EpistemicState,
    connective: Connective,
) -> Result<EpistemicState, StateSpaceError> {
    match connective {
        Connective::And => {
            let s = a.intersection(b)?;
            if s.is_empty() {
                return Err(StateSpaceError::Contradictory);
            }
            Ok(s)
        }
        Connective::Or => a.union(b),
        Connective::Not => a.difference(b),
    }
}

/// Intersection of what every subject knows.
pub fn collective_state(subjects: &[EpistemicState]) -> Result<EpistemicState, StateSpaceError> {
    let (first, rest) = subjects.split_first().ok_or(StateSpaceError::NoSubjects)?;
    let mut acc = first.clone();
    for s in rest {
        acc = acc.intersection(s)?;
    }
    if acc.is_empty() {
        return Err(StateSpaceError::SubjectsContradict);
    }
    Ok(acc)
}

/// Product of per-object distinct-attribute counts.
pub fn knowledge_dimension(counts: &[usize]) -> Result<u128, StateSpaceError> {
    if counts.is_empty() {
        return Err(StateSpaceError::NoObjects);
    }
    let mut d: u128 = 1;
    for (object, &n) in counts.iter().enumerate() {
        if n == 0 {
            return Err(StateSpaceError::ZeroAttributes { object });
        }
        d = d.saturating_mul(n as u128);
    }
    Ok(d)
}

/// States where a slot carries a given value.
pub fn slice(within: &EpistemicState, slot: usize, value: usize) -> EpistemicState {
    within.filter(|z| z.value(slot) == value)
}

/// A known fact of the form "slot does not hold this value".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exclusion {
    pub slot: usize,
    pub value: usize,
}

/// Exact states compatible with a body of knowledge; more facts, fewer states.
pub fn induced_state(registry: Arc<Registry>, knowledge: &[Exclusion]) -> Result<EpistemicState, StateSpaceError> {
    let all = EpistemicState::full(registry)?;
    Ok(all.filter(|z| knowledge.iter().all(|e| z.value(e.slot) != e.value)))
}

/// How a property reads its value off an exact state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Valuation {
    /// Value index taken from one slot through a lookup (`None` = undefined).
    Slot { slot: usize, by_value: Vec<Option<usize>> },
    /// Explicit table; states not listed are undefined.
    Table(BTreeMap<ExactState, usize>),
}

/// A property with distinct real labels and a valuation.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertySpec {
    id: String,
    labels: Vec<f64>,
    valuation: Valuation,
}

impl PropertySpec {
    pub fn new(id: impl Into<String>, labels: Vec<f64>, valuation: Valuation) -> Result<Self, StateSpaceError> {
        let id = id.into();
        let bad = |reason: String| StateSpaceError::InvalidProperty { id: id.clone(), reason };
        if labels.iter().any(|l| !l.is_finite()) {
            return Err(bad("labels must be finite reals".into()));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(bad(format!("label {a} repeated")));
            }
        }
        let max_index = match &valuation {
            Valuation::Slot { by_value, .. } => by_value.iter().flatten().max().copied(),
            Valuation::Table(t) => t.values().max().copied(),
        };
        if let Some(m) = max_index {
            if m >= labels.len() {
                return Err(bad(format!("value index {m} has no label")));
            }
        }
        Ok(PropertySpec { id, labels, valuation })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn value_count(&self) -> usize {
        self.labels.len()
    }

    pub fn valuation(&self) -> &Valuation {
        &self.valuation
    }

    pub fn value_of(&self, z: &ExactState) -> Option<usize> {
        match &self.valuation {
            Valuation::Slot { slot, by_value } => by_value.get(z.value(*slot)).copied().flatten(),
            Valuation::Table(t) => t.get(z).copied(),
        }
    }

    /// Members of `within` where the property takes value `j`.
    pub fn preimage(&self, j: usize, within: &EpistemicState) -> EpistemicState {
        within.filter(|z| self.value_of(z) == Some(j))
    }

    /// Members of `within` where the property is defined.
    pub fn defined_region(&self, within: &EpistemicState) -> EpistemicState {
        within.filter(|z| self.value_of(z).is_some())
    }

    /// Adds a catch-all value for every state where the property was undefined.
    pub fn with_trash_bin(&self, label: f64) -> Result<Self, StateSpaceError> {
        let bin = self.labels.len();
        let mut labels = self.labels.clone();
        labels.push(label);
        let valuation = match &self.valuation {
            Valuation::Slot { slot, by_value } => Valuation::Slot {
                slot: *slot,
                by_value: by_value.iter().map(|v| Some(v.unwrap_or(bin))).collect(),
            },
            Valuation::Table(_) => {
                return Err(StateSpaceError::InvalidProperty {
                    id: self.id.clone(),
                    reason: "trash bin needs a slot valuation".into(),
                })
            }
        };
        PropertySpec::new(self.id.clone(), labels, valuation)
    }
}
