// SPDX-License-Identifier: Apache-2.0

//! Experimental contexts as layered networks of alternatives.
//!
//! Layer `k` observes one property with `M_k` values at a knowability level.
//! Edge `k` is an `M_k × M_{k+1}` amplitude matrix. Across a decided layer
//! (level 3) probabilities combine classically; across an unknowable layer
//! (level 1) amplitudes are summed before the Born map is applied.

use std::fmt;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::evolution::KnowabilityLevel;
use crate::exact::{AmplitudeField, QComplex, QSqrt2, WeightField};

/// Normalization tolerance for floating-point amplitudes.
pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContextError {
    #[error("invalid context: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("unresolved contingent knowability at layer {0}")]
    UnresolvedContingent(usize),
    #[error("amplitude matrix violates unitarity conditions (layer {layer}, total probability {total})")]
    NotUnitary { layer: usize, total: f64 },
    #[error("impossible outcome")]
    ImpossibleOutcome,
    #[error("reduction forbidden at unknowable property")]
    ReductionForbidden,
    #[error("outcome {0} is not a value of the current layer")]
    OutcomeOutOfRange(usize),
    #[error("decided property at layer {0} must be observed before advancing")]
    MustObserveFirst(usize),
    #[error("contextual state is already at the final layer")]
    AtFinalLayer,
    #[error("contextual state is not normalized")]
    StateNotNormalized,
    #[error("nothing to resolve")]
    NothingToResolve,
    #[error("padding unnecessary")]
    PaddingUnnecessary,
    #[error("padding applies to a layer preceded by an unknowable property")]
    PaddingNeedsUnknowable,
    #[error("padding needs a single coherent incoming state")]
    PaddingNeedsCoherentState,
    #[error("layer index {0} out of range")]
    LayerOutOfRange(usize),
    #[error("no two consecutive decided layers")]
    NoDecidedPair,
}

/// Complex amplitude, optionally with an exact value in Q(√2)(i).
#[derive(Debug, Clone, PartialEq)]
pub struct Amplitude {
    value: Complex64,
    exact: Option<QComplex>,
}

impl Amplitude {
    pub fn exact(q: QComplex) -> Self {
        Amplitude {
            value: q.to_c64(),
            exact: Some(q),
        }
    }

    pub fn float(value: Complex64) -> Self {
        Amplitude { value, exact: None }
    }

    pub fn real(x: f64) -> Self {
        Self::float(Complex64::new(x, 0.0))
    }

    pub fn value(&self) -> Complex64 {
        self.value
    }

    pub fn exact_value(&self) -> Option<&QComplex> {
        self.exact.as_ref()
    }
}

impl From<Complex64> for Amplitude {
    fn from(c: Complex64) -> Self {
        Amplitude::float(c)
    }
}

impl From<QComplex> for Amplitude {
    fn from(q: QComplex) -> Self {
        Amplitude::exact(q)
    }
}

/// The Born map.
pub fn born(a: Complex64) -> f64 {
    a.norm_sqr()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub property: String,
    pub level: KnowabilityLevel,
    pub labels: Vec<f64>,
    /// Trailing values added by padding; they carry zero probability.
    pub virtual_values: usize,
    /// Whether this property is simultaneously knowable with the previous one.
    pub simultaneous: bool,
}

impl Layer {
    pub fn new(property: impl Into<String>, level: KnowabilityLevel, labels: Vec<f64>) -> Self {
        Layer {
            property: property.into(),
            level,
            labels,
            virtual_values: 0,
            simultaneous: false,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Amplitude matrix between consecutive layers, row-major.
pub type AmplitudeMatrix = Vec<Vec<Amplitude>>;

#[derive(Debug, Clone, PartialEq)]
pub struct ContextNetwork {
    layers: Vec<Layer>,
    initial: Vec<Amplitude>,
    edges: Vec<AmplitudeMatrix>,
    forced_reductions: Vec<usize>,
}

impl ContextNetwork {
    /// Builds a network without validating it; see [`validate_context`].
    pub fn new(layers: Vec<Layer>, initial: Vec<Amplitude>, edges: Vec<AmplitudeMatrix>) -> Self {
        ContextNetwork {
            layers,
            initial,
            edges,
            forced_reductions: Vec::new(),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, k: usize) -> &Layer {
        &self.layers[k]
    }

    pub fn initial(&self) -> &[Amplitude] {
        &self.initial
    }

    pub fn edges(&self) -> &[AmplitudeMatrix] {
        &self.edges
    }

    pub fn edge(&self, k: usize) -> &AmplitudeMatrix {
        &self.edges[k]
    }

    /// Layers whose reduction was scheduled by consistency resolution.
    pub fn forced_reductions(&self) -> &[usize] {
        &self.forced_reductions
    }

    /// Copy with one layer's knowability level replaced.
    pub fn with_level(&self, k: usize, level: KnowabilityLevel) -> Self {
        let mut net = self.clone();
        net.layers[k].level = level;
        net
    }

    pub fn initial_values(&self) -> Vec<Complex64> {
        self.initial.iter().map(Amplitude::value).collect()
    }

    pub fn edge_values(&self, k: usize) -> Vec<Vec<Complex64>> {
        self.edges[k]
            .iter()
            .map(|row| row.iter().map(Amplitude::value).collect())
            .collect()
    }

    /// All amplitudes in exact form, if every one of them is exact and every
    /// normalization holds exactly.
    pub fn exact_amplitudes(&self) -> Option<(Vec<QComplex>, Vec<Vec<Vec<QComplex>>>)> {
        let exact_vec = |v: &[Amplitude]| -> Option<Vec<QComplex>> {
            let out: Vec<QComplex> = v.iter().map(|a| a.exact.clone()).collect::<Option<_>>()?;
            let total = out.iter().fold(QSqrt2::zero(), |acc, a| &acc + &a.norm_sqr());
            (total == QSqrt2::one()).then_some(out)
        };
        let initial = exact_vec(&self.initial)?;
        let edges = self
            .edges
            .iter()
            .map(|m| m.iter().map(|row| exact_vec(row)).collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>()?;
        Some((initial, edges))
    }
}

/// Checks structure, levels and normalization; an empty list means valid.
pub fn validate_context(net: &ContextNetwork) -> Vec<String> {
    let mut issues = Vec::new();
    let layers = &net.layers;
    if layers.is_empty() {
        issues.push("context has no layers".to_string());
        return issues;
    }
    if layers.last().map(|l| l.level) != Some(KnowabilityLevel::Decided) {
        issues.push("final property must be decided".to_string());
    }
    for (k, layer) in layers.iter().enumerate() {
        if layer.len() < 2 {
            issues.push(format!("layer {k} has fewer than two values"));
        }
        if layer.labels.iter().any(|l| !l.is_finite()) {
            issues.push(format!("layer {k} has non-finite labels"));
        }
        for (i, a) in layer.labels.iter().enumerate() {
            if layer.labels[..i].contains(a) {
                issues.push(format!("layer {k}: property values must be distinct"));
                break;
            }
        }
    }
    if net.initial.len() != layers[0].len() {
        issues.push(format!(
            "initial amplitudes have {} entries, layer 0 has {} values",
            net.initial.len(),
            layers[0].len()
        ));
    } else if !normalized(&net.initial) {
        issues.push("initial amplitudes not normalized".to_string());
    }
    if net.edges.len() + 1 != layers.len() {
        issues.push(format!(
            "{} layers need {} amplitude matrices, got {}",
            layers.len(),
            layers.len() - 1,
            net.edges.len()
        ));
        return issues;
    }
    for (k, m) in net.edges.iter().enumerate() {
        let (rows, cols) = (layers[k].len(), layers[k + 1].len());
        if m.len() != rows || m.iter().any(|r| r.len() != cols) {
            issues.push(format!("amplitude matrix {k} is not {rows}x{cols}"));
            continue;
        }
        for (j, row) in m.iter().enumerate() {
            if !normalized(row) {
                issues.push(format!("row {j} of amplitude matrix {k} not normalized"));
            }
        }
    }
    for (k, layer) in layers.iter().enumerate() {
        if layer.level != KnowabilityLevel::Unknowable {
            continue;
        }
        let smaller_later = layers[k + 1..]
            .iter()
            .any(|l| l.level == KnowabilityLevel::Decided && l.len() < layer.len());
        if smaller_later {
            issues.push(format!("layer {k} requires virtual-value padding"));
        }
    }
    issues
}

fn normalized(v: &[Amplitude]) -> bool {
    let total: f64 = v.iter().map(|a| born(a.value)).sum();
    (total - 1.0).abs() <= NORM_TOL
}

/// Rule applied when crossing a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PropagationRule {
    Classical,
    Amplitude,
}

impl fmt::Display for PropagationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PropagationRule::Classical => "classical",
            PropagationRule::Amplitude => "amplitude",
        })
    }
}

/// Final-layer outcome distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub probabilities: Vec<f64>,
    /// Exact probabilities when every amplitude was exact.
    pub exact: Option<Vec<QSqrt2>>,
    /// Rule used at each layer from the starting layer on.
    pub layer_rules: Vec<PropagationRule>,
}

impl Distribution {
    pub fn total_variation(&self, other: &Distribution) -> f64 {
        0.5 * self
            .probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

trait Tolerance {
    fn is_one(&self) -> bool;
}

impl Tolerance for f64 {
    fn is_one(&self) -> bool {
        (self - 1.0).abs() <= NORM_TOL
    }
}

impl Tolerance for QSqrt2 {
    fn is_one(&self) -> bool {
        *self == QSqrt2::one()
    }
}

/// Folds amplitudes from layer `start` (with incoming vector `psi`) to the end.
fn fold<A>(
    levels: &[KnowabilityLevel],
    start: usize,
    psi: Vec<A>,
    edges: &[Vec<Vec<A>>],
) -> Result<(Vec<A::Real>, Vec<PropagationRule>), ContextError>
where
    A: AmplitudeField,
    A::Real: Tolerance,
{
    // Each branch is a weight and a coherent amplitude vector.
    let mut branches: Vec<(A::Real, Vec<A>)> = vec![(A::Real::one(), psi)];
    let mut layer_rules = Vec::new();
    let last = levels.len() - 1;
    for k in start..levels.len() {
        match levels[k] {
            KnowabilityLevel::Contingent => return Err(ContextError::UnresolvedContingent(k)),
            KnowabilityLevel::Decided => {
                let m = branches[0].1.len();
                let mut weights = vec![A::Real::zero(); m];
                for (w, v) in &branches {
                    for (j, a) in v.iter().enumerate() {
                        weights[j] = weights[j].add(&w.mul(&a.norm_sqr()));
                    }
                }
                layer_rules.push(PropagationRule::Classical);
                if k == last {
                    return Ok((weights, layer_rules));
                }
                branches = weights
                    .into_iter()
                    .enumerate()
                    .filter(|(_, w)| !w.is_zero())
                    .map(|(j, w)| {
                        let mut e = vec![A::zero(); m];
                        e[j] = A::one();
                        (w, e)
                    })
                    .collect();
            }
            KnowabilityLevel::Unknowable => {
                layer_rules.push(PropagationRule::Amplitude);
                if k == last {
                    unreachable!("validated networks end in a decided layer");
                }
            }
        }
        let matrix = &edges[k];
        let cols = matrix[0].len();
        for (_, v) in branches.iter_mut() {
            let mut out = vec![A::zero(); cols];
            for (j, a) in v.iter().enumerate() {
                for (jp, b) in matrix[j].iter().enumerate() {
                    out[jp] = out[jp].add(&a.mul(b));
                }
            }
            if levels[k] == KnowabilityLevel::Unknowable {
                let total = out.iter().fold(A::Real::zero(), |acc, x| acc.add(&x.norm_sqr()));
                if !total.is_one() {
                    return Err(ContextError::NotUnitary {
                        layer: k,
                        total: total.to_f64(),
                    });
                }
            }
            *v = out;
        }
    }
    unreachable!("loop returns at the final layer")
}

fn levels(net: &ContextNetwork) -> Vec<KnowabilityLevel> {
    net.layers.iter().map(|l| l.level).collect()
}

/// Outcome distribution over the final layer.
pub fn propagate(net: &ContextNetwork) -> Result<Distribution, ContextError> {
    let issues = validate_context(net);
    if !issues.is_empty() {
        return Err(ContextError::Invalid(issues));
    }
    let lv = levels(net);
    if let Some((init, edges)) = net.exact_amplitudes() {
        let (exact, layer_rules) = fold(&lv, 0, init, &edges)?;
        return Ok(Distribution {
            probabilities: exact.iter().map(QSqrt2::to_f64).collect(),
            exact: Some(exact),
            layer_rules,
        });
    }
    let edges: Vec<_> = (0..net.edges.len()).map(|k| net.edge_values(k)).collect();
    let (probabilities, layer_rules) = fold(&lv, 0, net.initial_values(), &edges)?;
    Ok(Distribution {
        probabilities,
        exact: None,
        layer_rules,
    })
}

/// Knowledge about the observed values of the specimen within a context.
#[derive(Debug, Clone, PartialEq)]
pub enum ContextualState {
    Superposed { amplitudes: Vec<Complex64>, layer: usize },
    Reduced { value: usize, layer: usize },
}

impl ContextualState {
    /// The state at the first layer, before any observation.
    pub fn initial(net: &ContextNetwork) -> Self {
        ContextualState::Superposed {
            amplitudes: net.initial_values(),
            layer: 0,
        }
    }

    pub fn superposed(amplitudes: Vec<Complex64>, layer: usize) -> Result<Self, ContextError> {
        let total: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(ContextError::StateNotNormalized);
        }
        Ok(ContextualState::Superposed { amplitudes, layer })
    }

    pub fn layer(&self) -> usize {
        match self {
            ContextualState::Superposed { layer, .. } | ContextualState::Reduced { layer, .. } => *layer,
        }
    }

    /// Moves to the next layer: a reduced state continues with its row of the
    /// amplitude matrix, a superposed state at an unknowable layer is
    /// multiplied through it.
    pub fn advance(&self, net: &ContextNetwork) -> Result<Self, ContextError> {
        let k = self.layer();
        if k + 1 >= net.layers.len() {
            return Err(ContextError::AtFinalLayer);
        }
        let matrix = net.edge_values(k);
        let amplitudes = match self {
            ContextualState::Reduced { value, .. } => matrix[*value].clone(),
            ContextualState::Superposed { amplitudes, .. } => {
                match net.layers[k].level {
                    KnowabilityLevel::Decided => return Err(ContextError::MustObserveFirst(k)),
                    KnowabilityLevel::Contingent => return Err(ContextError::UnresolvedContingent(k)),
                    KnowabilityLevel::Unknowable => {}
                }
                let cols = matrix[0].len();
                (0..cols)
                    .map(|jp| amplitudes.iter().zip(&matrix).map(|(a, row)| a * row[jp]).sum())
                    .collect()
            }
        };
        ContextualState::superposed(amplitudes, k + 1)
    }
}

/// Reduces the state to an observed value of a decided layer.
pub fn reduce_by_observation(
    state: &ContextualState,
    net: &ContextNetwork,
    outcome: usize,
) -> Result<ContextualState, ContextError> {
    let k = state.layer();
    let layer = net.layers.get(k).ok_or(ContextError::LayerOutOfRange(k))?;
    match layer.level {
        KnowabilityLevel::Unknowable => return Err(ContextError::ReductionForbidden),
        KnowabilityLevel::Contingent => return Err(ContextError::UnresolvedContingent(k)),
        KnowabilityLevel::Decided => {}
    }
    if outcome >= layer.len() {
        return Err(ContextError::OutcomeOutOfRange(outcome));
    }
    let possible = match state {
        ContextualState::Superposed { amplitudes, .. } => born(amplitudes[outcome]) > 0.0,
        ContextualState::Reduced { value, .. } => *value == outcome,
    };
    if !possible {
        return Err(ContextError::ImpossibleOutcome);
    }
    Ok(ContextualState::Reduced {
        value: outcome,
        layer: k,
    })
}

/// Final distribution starting from a contextual state.
pub fn propagate_from_state(state: &ContextualState, net: &ContextNetwork) -> Result<Distribution, ContextError> {
    let issues = validate_context(net);
    if !issues.is_empty() {
        return Err(ContextError::Invalid(issues));
    }
    let lv = levels(net);
    let last = lv.len() - 1;
    let (start, psi) = match state {
        ContextualState::Reduced { value, layer } if *layer == last => {
            let mut p = vec![0.0; net.layers[last].len()];
            p[*value] = 1.0;
            return Ok(Distribution {
                probabilities: p,
                exact: None,
                layer_rules: vec![PropagationRule::Classical],
            });
        }
        ContextualState::Reduced { value, layer } => (layer + 1, net.edge_values(*layer)[*value].clone()),
        ContextualState::Superposed { amplitudes, layer } => (*layer, amplitudes.clone()),
    };
    let edges: Vec<_> = (0..net.edges.len()).map(|k| net.edge_values(k)).collect();
    let (probabilities, layer_rules) = fold(&lv, start, psi, &edges)?;
    Ok(Distribution {
        probabilities,
        exact: None,
        layer_rules,
    })
}

/// Resolves every contingent layer: promoted to decided (with a scheduled
/// reduction) when path knowledge stays reachable, otherwise degraded to
/// unknowable.
pub fn reduce_by_consistency(
    net: &ContextNetwork,
    path_knowledge_reachable: bool,
) -> Result<ContextNetwork, ContextError> {
    let contingent: Vec<usize> = net
        .layers
        .iter()
        .enumerate()
        .filter(|(_, l)| l.level == KnowabilityLevel::Contingent)
        .map(|(k, _)| k)
        .collect();
    if contingent.is_empty() {
        return Err(ContextError::NothingToResolve);
    }
    let mut out = net.clone();
    for k in contingent {
        if path_knowledge_reachable {
            out.layers[k].level = KnowabilityLevel::Decided;
            out.forced_reductions.push(k);
        } else {
            out.layers[k].level = KnowabilityLevel::Unknowable;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaddingReport {
    pub layer: usize,
    /// Indices of the added values in the padded layer.
    pub virtual_values: Vec<usize>,
    /// Largest final probability found on a virtual value of the padded layer.
    pub max_virtual_probability: f64,
}

/// Extends layer `layer_index` to as many values as the unknowable layer
/// before it.
///
/// The replacement amplitude matrix is unitary and sends the incoming state
/// to the normalized original outgoing amplitudes, so the added values get
/// zero probability.
pub fn pad_virtual_values(
    net: &ContextNetwork,
    layer_index: usize,
) -> Result<(ContextNetwork, PaddingReport), ContextError> {
    if layer_index == 0 || layer_index >= net.layers.len() {
        return Err(ContextError::LayerOutOfRange(layer_index));
    }
    let k = layer_index - 1;
    if net.layers[k].level != KnowabilityLevel::Unknowable {
        return Err(ContextError::PaddingNeedsUnknowable);
    }
    let m = net.layers[k].len();
    let m_next = net.layers[layer_index].len();
    if m <= m_next {
        return Err(ContextError::PaddingUnnecessary);
    }
    let psi = incoming_state(net, k)?;
    let a = net.edge_values(k);
    let z: Vec<Complex64> = (0..m_next)
        .map(|jp| psi.iter().zip(&a).map(|(p, row)| p * row[jp]).sum())
        .collect();
    let z_norm = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let mut target = vec![Complex64::new(0.0, 0.0); m];
    if z_norm > NORM_TOL {
        for (t, c) in target.iter_mut().zip(&z) {
            *t = c / z_norm;
        }
    } else {
        target[0] = Complex64::new(1.0, 0.0);
    }
    let v_psi = unitary_with_first_row(&psi);
    let v_t = unitary_with_first_row(&target);
    // padded = v_psi† · v_t, so psi · padded = e_0 · v_t = target.
    let padded: Vec<Vec<Amplitude>> = (0..m)
        .map(|j| {
            (0..m)
                .map(|jp| {
                    let s: Complex64 = (0..m).map(|i| v_psi[i][j].conj() * v_t[i][jp]).sum();
                    Amplitude::float(s)
                })
                .collect()
        })
        .collect();

    let mut out = net.clone();
    let top = out.layers[layer_index]
        .labels
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    for i in 0..m - m_next {
        out.layers[layer_index].labels.push(top + 1.0 + i as f64);
    }
    out.layers[layer_index].virtual_values += m - m_next;
    out.edges[k] = padded;
    if let Some(next) = out.edges.get_mut(layer_index) {
        let cols = next[0].len();
        for _ in 0..m - m_next {
            let mut row = vec![Amplitude::real(0.0); cols];
            row[0] = Amplitude::real(1.0);
            next.push(row);
        }
    }
    let virtual_values: Vec<usize> = (m_next..m).collect();
    let reached = incoming_state(&out, layer_index).ok();
    let max_virtual_probability = reached
        .map(|v| virtual_values.iter().map(|&i| born(v[i])).fold(0.0, f64::max))
        .unwrap_or(0.0);
    Ok((
        out,
        PaddingReport {
            layer: layer_index,
            virtual_values,
            max_virtual_probability,
        },
    ))
}

/// The coherent amplitude vector arriving at layer `k`.
fn incoming_state(net: &ContextNetwork, k: usize) -> Result<Vec<Complex64>, ContextError> {
    let mut psi = net.initial_values();
    for i in 0..k {
        if net.layers[i].level != KnowabilityLevel::Unknowable {
            return Err(ContextError::PaddingNeedsCoherentState);
        }
        let a = net.edge_values(i);
        let cols = a[0].len();
        psi = (0..cols)
            .map(|jp| psi.iter().zip(&a).map(|(p, row)| p * row[jp]).sum())
            .collect();
    }
    Ok(psi)
}

/// Unitary matrix whose first row is the unit vector `v` (Gram-Schmidt over
/// `v` followed by the standard basis).
pub(crate) fn unitary_with_first_row(v: &[Complex64]) -> Vec<Vec<Complex64>> {
    let n = v.len();
    let mut rows: Vec<Vec<Complex64>> = vec![v.to_vec()];
    for e in 0..n {
        if rows.len() == n {
            break;
        }
        let mut w = vec![Complex64::new(0.0, 0.0); n];
        w[e] = Complex64::new(1.0, 0.0);
        for r in &rows {
            let ip: Complex64 = r.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
            for (wi, ri) in w.iter_mut().zip(r) {
                *wi -= ip * ri;
            }
        }
        let norm = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            rows.push(w.into_iter().map(|c| c / norm).collect());
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributivityReport {
    /// The two consecutive decided layers compared.
    pub layers: (usize, usize),
    /// Joint probability per (p_j, p_j') label pair, from the nested form.
    pub joint: Vec<((f64, f64), f64)>,
    pub max_deviation: f64,
}

/// Compares the nested and flattened forms of the joint distribution over the
/// first pair of consecutive decided layers.
pub fn distributivity_check(net: &ContextNetwork) -> Result<DistributivityReport, ContextError> {
    let k = (0..net.layers.len().saturating_sub(1))
        .find(|&k| {
            net.layers[k].level == KnowabilityLevel::Decided && net.layers[k + 1].level == KnowabilityLevel::Decided
        })
        .ok_or(ContextError::NoDecidedPair)?;
    // Amplitudes reaching layer k: the initial vector, or the decided
    // marginal of the truncated network with square-root amplitudes.
    let incoming: Vec<Complex64> = if k == 0 {
        net.initial_values()
    } else {
        let truncated = ContextNetwork::new(net.layers[..=k].to_vec(), net.initial.clone(), net.edges[..k].to_vec());
        let mut t = truncated;
        t.layers[k].level = KnowabilityLevel::Decided;
        propagate(&t)?
            .probabilities
            .into_iter()
            .map(|p| Complex64::new(p.sqrt(), 0.0))
            .collect()
    };
    let a = net.edge_values(k);
    let labels = (&net.layers[k].labels, &net.layers[k + 1].labels);
    let mut joint = Vec::new();
    let mut max_deviation: f64 = 0.0;
    for (j, aj) in incoming.iter().enumerate() {
        let vj = born(*aj);
        for (jp, ajjp) in a[j].iter().enumerate() {
            let nested = vj * born(*ajjp);
            let flat = born(aj * ajjp);
            max_deviation = max_deviation.max((nested - flat).abs());
            joint.push(((labels.0[j], labels.1[jp]), nested));
        }
    }
    // The marginal of the nested form must match the classical fold as well.
    let mut marginal = vec![0.0; a[0].len()];
    for (idx, (_, q)) in joint.iter().enumerate() {
        marginal[idx % a[0].len()] += q;
    }
    let two = ContextNetwork::new(
        vec![net.layers[k].clone(), net.layers[k + 1].clone()],
        incoming.iter().map(|c| Amplitude::float(*c)).collect(),
        vec![net.edges[k].clone()],
    );
    let mut two = two;
    two.layers[1].level = KnowabilityLevel::Decided;
    let folded = propagate(&two)?;
    for (x, y) in marginal.iter().zip(&folded.probabilities) {
        max_deviation = max_deviation.max((x - y).abs());
    }
    Ok(DistributivityReport {
        layers: (k, k + 1),
        joint,
        max_deviation,
    })
}
