// SPDX-License-Identifier: Apache-2.0

//! Vector-space representations of experimental contexts.
//!
//! Inner products are linear in the first argument, `⟨x, y⟩ = Σ x_i ȳ_i`.
//! The first property of a context uses the standard basis; the second
//! property's basis vectors `w_j'` are chosen so that `⟨e_j, w_j'⟩ = U_jj'`,
//! where `U` is the basis-change matrix. A contextual state with amplitudes
//! `a_j` is the coordinate vector `Σ a_j e_j`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::context::{born, propagate, Amplitude, ContextError, ContextNetwork, Layer};
use crate::evolution::KnowabilityLevel;
use crate::statespace::{EpistemicState, PropertySpec};

/// Orthonormality and self-adjointness tolerance.
pub const BASIS_TOL: f64 = 1e-12;
/// Tolerance for neutrality, volume tables and unitarity of constructed bases.
pub const CONSTRUCTION_TOL: f64 = 1e-9;
/// Eigenvalues closer than this are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Commutators with spectral norm below this count as vanishing.
pub const COMMUTING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HilbertError {
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error("unsupported context shape: {0}")]
    UnsupportedContext(String),
    #[error("no reciprocal basis")]
    NoReciprocalBasis,
    #[error("context not neutral (largest deviation {0:.3e})")]
    NotNeutral(f64),
    #[error("no orthonormal second basis exists")]
    NoOrthonormalBasis,
    #[error("unsupported pair class")]
    UnsupportedPairClass,
    #[error("joint volume table: {0}")]
    InvalidJointVolumes(String),
    #[error("amplitude rows of an unknowable property are not orthonormal")]
    RowsNotOrthonormal,
    #[error("property values must be distinct")]
    DuplicateLabels,
    #[error("property `{0}` has no basis in this space")]
    UnknownProperty(String),
    #[error("operator is not self-adjoint")]
    NotSelfAdjoint,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("reciprocal undefined")]
    ReciprocalUndefined,
    #[error("reciprocal context exists if and only if M = M'")]
    ReciprocalNeedsSquare,
    #[error("cannot define distinct property values")]
    DegenerateEigenvalues,
    #[error("phase table must be {0}x{0}")]
    BadPhases(usize),
    #[error("value groups must partition the property values")]
    BadGrouping,
}

/// Context shapes with a vector-space representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextType {
    /// Unknowable property followed by a decided one.
    UnknowableThenDecided,
    /// Two decided properties that are simultaneously knowable.
    Simultaneous,
    /// Two decided properties that are not simultaneously knowable.
    NonSimultaneous,
}

impl ContextType {
    pub fn code(&self) -> &'static str {
        match self {
            ContextType::UnknowableThenDecided => "a",
            ContextType::Simultaneous => "b",
            ContextType::NonSimultaneous => "c",
        }
    }
}

pub fn classify(net: &ContextNetwork) -> Result<ContextType, HilbertError> {
    let issues = crate::context::validate_context(net);
    if !issues.is_empty() {
        return Err(ContextError::Invalid(issues).into());
    }
    if net.layers().len() != 2 {
        return Err(HilbertError::UnsupportedContext(format!(
            "expected two layers, got {}",
            net.layers().len()
        )));
    }
    let (first, second) = (net.layer(0), net.layer(1));
    match (first.level, second.level) {
        (KnowabilityLevel::Contingent, _) => Err(ContextError::UnresolvedContingent(0).into()),
        (KnowabilityLevel::Unknowable, KnowabilityLevel::Decided) => Ok(ContextType::UnknowableThenDecided),
        (KnowabilityLevel::Decided, KnowabilityLevel::Decided) if second.simultaneous => Ok(ContextType::Simultaneous),
        (KnowabilityLevel::Decided, KnowabilityLevel::Decided) => Ok(ContextType::NonSimultaneous),
        _ => Err(HilbertError::UnsupportedContext("final layer must be decided".into())),
    }
}

/// How two properties relate in their joint property space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairClass {
    /// Every value of one fixes the value of the other.
    MutuallyDefined,
    /// All joint volumes equal.
    Independent,
    Other,
}

/// Relative volumes `v_jj'` of the joint regions of two properties.
#[derive(Debug, Clone, PartialEq)]
pub struct JointVolumeTable {
    v: Vec<Vec<f64>>,
}

impl JointVolumeTable {
    pub fn new(v: Vec<Vec<f64>>) -> Result<Self, HilbertError> {
        let bad = |s: &str| HilbertError::InvalidJointVolumes(s.to_string());
        if v.is_empty() || v[0].is_empty() || v.iter().any(|r| r.len() != v[0].len()) {
            return Err(bad("table must be a nonempty rectangle"));
        }
        if v.iter().flatten().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(bad("entries must be nonnegative"));
        }
        let total: f64 = v.iter().flatten().sum();
        if (total - 1.0).abs() > CONSTRUCTION_TOL {
            return Err(bad("entries must sum to 1"));
        }
        Ok(JointVolumeTable { v })
    }

    /// Counts joint regions of two properties inside `within`, relative to the
    /// part where both are defined.
    pub fn from_regions(p: &PropertySpec, p2: &PropertySpec, within: &EpistemicState) -> Result<Self, HilbertError> {
        let both = within.filter(|z| p.value_of(z).is_some() && p2.value_of(z).is_some());
        if both.is_empty() {
            return Err(HilbertError::InvalidJointVolumes(
                "properties are never jointly defined".into(),
            ));
        }
        let mut v = vec![vec![0.0; p2.value_count()]; p.value_count()];
        for z in both.members() {
            if let (Some(j), Some(jp)) = (p.value_of(z), p2.value_of(z)) {
                v[j][jp] += 1.0;
            }
        }
        let n = both.len() as f64;
        v.iter_mut().flatten().for_each(|x| *x /= n);
        Self::new(v)
    }

    pub fn rows(&self) -> usize {
        self.v.len()
    }

    pub fn cols(&self) -> usize {
        self.v[0].len()
    }

    pub fn get(&self, j: usize, jp: usize) -> f64 {
        self.v[j][jp]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// Every row sums to `1/M` and every column to `1/M'`.
    pub fn has_equal_value_volumes(&self) -> bool {
        let (m, mp) = (self.rows() as f64, self.cols() as f64);
        let rows_ok = self
            .v
            .iter()
            .all(|r| (r.iter().sum::<f64>() - 1.0 / m).abs() <= CONSTRUCTION_TOL);
        let cols_ok =
            (0..self.cols()).all(|c| (self.v.iter().map(|r| r[c]).sum::<f64>() - 1.0 / mp).abs() <= CONSTRUCTION_TOL);
        rows_ok && cols_ok
    }

    /// Symmetric with constant diagonal, the condition for two 2-valued
    /// properties to share a vector space.
    pub fn satisfies_pair_symmetry(&self) -> bool {
        let n = self.rows();
        if n != self.cols() {
            return false;
        }
        let close = |a: f64, b: f64| (a - b).abs() <= CONSTRUCTION_TOL;
        (0..n).all(|i| (0..n).all(|j| close(self.v[i][j], self.v[j][i])))
            && (0..n).all(|i| close(self.v[i][i], self.v[0][0]))
    }

    pub fn pair_class(&self) -> PairClass {
        let n = self.rows();
        let m = n as f64;
        let close = |a: f64, b: f64| (a - b).abs() <= CONSTRUCTION_TOL;
        if n == self.cols() && self.v.iter().flatten().all(|&x| close(x, 1.0 / (m * m))) {
            return PairClass::Independent;
        }
        let permutation = n == self.cols()
            && self.v.iter().all(|r| {
                r.iter().filter(|&&x| close(x, 1.0 / m)).count() == 1
                    && r.iter().filter(|&&x| close(x, 0.0)).count() == n - 1
            })
            && (0..n).all(|c| self.v.iter().filter(|r| close(r[c], 1.0 / m)).count() == 1);
        if permutation {
            PairClass::MutuallyDefined
        } else {
            PairClass::Other
        }
    }
}

/// Orthonormal vectors spanning each value's eigenspace.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyBasis {
    pub property: String,
    pub labels: Vec<f64>,
    pub subspaces: Vec<Vec<DVector<Complex64>>>,
    /// Trailing values that exist only to fill the space.
    pub virtual_values: usize,
}

impl PropertyBasis {
    pub fn subspace_dimensions(&self) -> Vec<usize> {
        self.subspaces.iter().map(Vec::len).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextSpace {
    pub dimension: usize,
    pub context_type: ContextType,
    pub bases: Vec<PropertyBasis>,
    /// `(first, second, U)` with `U_jj' = ⟨first_j, second_j'⟩`.
    pub basis_changes: Vec<(String, String, DMatrix<Complex64>)>,
}

impl ContextSpace {
    pub fn basis(&self, property: &str) -> Result<&PropertyBasis, HilbertError> {
        self.bases
            .iter()
            .find(|b| b.property == property)
            .ok_or_else(|| HilbertError::UnknownProperty(property.to_string()))
    }

    /// Coordinates of the initial contextual state.
    pub fn initial_state(&self, net: &ContextNetwork) -> DVector<Complex64> {
        let a = net.initial_values();
        match self.context_type {
            ContextType::Simultaneous => {
                // Product basis: amplitude of (j, j') is a_j · a_jj'.
                let edge = net.edge_values(0);
                let mp = edge[0].len();
                DVector::from_fn(self.dimension, |i, _| a[i / mp] * edge[i / mp][i % mp])
            }
            _ => DVector::from_fn(self.dimension, |i, _| {
                a.get(i).copied().unwrap_or(Complex64::new(0.0, 0.0))
            }),
        }
    }
}

/// `⟨x, y⟩ = Σ x_i ȳ_i`.
pub fn inner(x: &DVector<Complex64>, y: &DVector<Complex64>) -> Complex64 {
    x.iter().zip(y.iter()).map(|(a, b)| a * b.conj()).sum()
}

fn standard(d: usize, i: usize) -> DVector<Complex64> {
    let mut v = DVector::from_element(d, Complex64::new(0.0, 0.0));
    v[i] = Complex64::new(1.0, 0.0);
    v
}

fn virtual_labels(labels: &[f64], extra: usize) -> Vec<f64> {
    let top = labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = labels.to_vec();
    out.extend((0..extra).map(|i| top + 1.0 + i as f64));
    out
}

pub fn is_unitary(u: &DMatrix<Complex64>, tol: f64) -> bool {
    if u.nrows() != u.ncols() {
        return false;
    }
    let prod = u.adjoint() * u;
    let id = DMatrix::<Complex64>::identity(u.nrows(), u.ncols());
    (prod - id).iter().all(|x| x.norm() <= tol)
}

/// Basis vectors `w_j'` with `⟨e_j, w_j'⟩ = U_jj'`: the conjugated columns.
fn second_basis(u: &DMatrix<Complex64>) -> Vec<Vec<DVector<Complex64>>> {
    (0..u.ncols()).map(|c| vec![u.column(c).map(|x| x.conj())]).collect()
}

/// Builds the contextual vector space of a two-property context.
///
/// `phases` (radians, `M × M`) fixes the phases of the basis-change entries
/// for non-simultaneous pairs; without it a real orthogonal matrix is sought,
/// falling back to Fourier phases for independent pairs.
pub fn build_space(
    net: &ContextNetwork,
    joint: Option<&JointVolumeTable>,
    phases: Option<&[Vec<f64>]>,
) -> Result<ContextSpace, HilbertError> {
    let ty = classify(net)?;
    let (p, pp) = (net.layer(0), net.layer(1));
    let (m, mp) = (p.len(), pp.len());
    match ty {
        ContextType::UnknowableThenDecided => {
            if m > mp {
                return Err(ContextError::Invalid(vec!["layer 0 requires virtual-value padding".to_string()]).into());
            }
            let a = net.edge_values(0);
            let d = mp;
            for i in 0..m {
                for j in 0..m {
                    let ip: Complex64 = a[i].iter().zip(&a[j]).map(|(x, y)| x * y.conj()).sum();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    if (ip - Complex64::new(expect, 0.0)).norm() > CONSTRUCTION_TOL {
                        return Err(HilbertError::RowsNotOrthonormal);
                    }
                }
            }
            let u = complete_rows(&a, d);
            Ok(ContextSpace {
                dimension: d,
                context_type: ty,
                bases: vec![
                    PropertyBasis {
                        property: p.property.clone(),
                        labels: virtual_labels(&p.labels, d - m),
                        subspaces: (0..d).map(|i| vec![standard(d, i)]).collect(),
                        virtual_values: d - m,
                    },
                    PropertyBasis {
                        property: pp.property.clone(),
                        labels: pp.labels.clone(),
                        subspaces: second_basis(&u),
                        virtual_values: pp.virtual_values,
                    },
                ],
                basis_changes: vec![(p.property.clone(), pp.property.clone(), u)],
            })
        }
        ContextType::Simultaneous => {
            let d = m * mp;
            let first = (0..m)
                .map(|j| (0..mp).map(|jp| standard(d, j * mp + jp)).collect())
                .collect();
            let second = (0..mp)
                .map(|jp| (0..m).map(|j| standard(d, j * mp + jp)).collect())
                .collect();
            Ok(ContextSpace {
                dimension: d,
                context_type: ty,
                bases: vec![
                    PropertyBasis {
                        property: p.property.clone(),
                        labels: p.labels.clone(),
                        subspaces: first,
                        virtual_values: 0,
                    },
                    PropertyBasis {
                        property: pp.property.clone(),
                        labels: pp.labels.clone(),
                        subspaces: second,
                        virtual_values: 0,
                    },
                ],
                basis_changes: Vec::new(),
            })
        }
        ContextType::NonSimultaneous => {
            if m != mp {
                return Err(HilbertError::NoReciprocalBasis);
            }
            let a = net.edge_values(0);
            let implied;
            let table = match joint {
                Some(t) => t,
                None => {
                    implied = JointVolumeTable::new(
                        a.iter()
                            .map(|r| r.iter().map(|x| born(*x) / m as f64).collect())
                            .collect(),
                    )?;
                    &implied
                }
            };
            if table.rows() != m || table.cols() != mp {
                return Err(HilbertError::DimensionMismatch(table.rows(), m));
            }
            let mut worst: f64 = 0.0;
            for j in 0..m {
                for jp in 0..m {
                    worst = worst.max((born(a[j][jp]) - m as f64 * table.get(j, jp)).abs());
                }
            }
            if worst > CONSTRUCTION_TOL {
                return Err(HilbertError::NotNeutral(worst));
            }
            if !table.has_equal_value_volumes() {
                return Err(HilbertError::NoOrthonormalBasis);
            }
            let class = table.pair_class();
            if m == 2 {
                if !table.satisfies_pair_symmetry() {
                    return Err(HilbertError::NoOrthonormalBasis);
                }
            } else if class == PairClass::Other {
                return Err(HilbertError::UnsupportedPairClass);
            }
            let u = basis_change_from_volumes(table, class, phases)?;
            Ok(ContextSpace {
                dimension: m,
                context_type: ty,
                bases: vec![
                    PropertyBasis {
                        property: p.property.clone(),
                        labels: p.labels.clone(),
                        subspaces: (0..m).map(|i| vec![standard(m, i)]).collect(),
                        virtual_values: 0,
                    },
                    PropertyBasis {
                        property: pp.property.clone(),
                        labels: pp.labels.clone(),
                        subspaces: second_basis(&u),
                        virtual_values: 0,
                    },
                ],
                basis_changes: vec![(p.property.clone(), pp.property.clone(), u)],
            })
        }
    }
}

/// Unitary `d × d` matrix whose first rows are the given orthonormal rows.
fn complete_rows(rows: &[Vec<Complex64>], d: usize) -> DMatrix<Complex64> {
    let mut basis: Vec<Vec<Complex64>> = rows.to_vec();
    if basis.len() < d {
        // Reuse the first-row completion on the orthogonal complement.
        for e in 0..d {
            if basis.len() == d {
                break;
            }
            let mut w = vec![Complex64::new(0.0, 0.0); d];
            w[e] = Complex64::new(1.0, 0.0);
            for r in &basis {
                let ip: Complex64 = r.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                for (wi, ri) in w.iter_mut().zip(r) {
                    *wi -= ip * ri;
                }
            }
            let norm = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-8 {
                basis.push(w.into_iter().map(|c| c / norm).collect());
            }
        }
    }
    DMatrix::from_fn(d, d, |i, j| basis[i][j])
}

/// `U_jj' = √(M v_jj') e^{iθ_jj'}`.
fn basis_change_from_volumes(
    table: &JointVolumeTable,
    class: PairClass,
    phases: Option<&[Vec<f64>]>,
) -> Result<DMatrix<Complex64>, HilbertError> {
    let m = table.rows();
    let modulus = |j: usize, jp: usize| (m as f64 * table.get(j, jp)).max(0.0).sqrt();
    if let Some(theta) = phases {
        if theta.len() != m || theta.iter().any(|r| r.len() != m) {
            return Err(HilbertError::BadPhases(m));
        }
        let u = DMatrix::from_fn(m, m, |j, jp| Complex64::from_polar(modulus(j, jp), theta[j][jp]));
        return if is_unitary(&u, CONSTRUCTION_TOL) {
            Ok(u)
        } else {
            Err(HilbertError::NoOrthonormalBasis)
        };
    }
    // Real sign patterns with a positive first row and column, all-plus first.
    let free = (m - 1) * (m - 1);
    if free <= 16 {
        for mask in 0u32..(1u32 << free) {
            let u = DMatrix::from_fn(m, m, |j, jp| {
                let negative = j > 0 && jp > 0 && (mask >> ((j - 1) * (m - 1) + (jp - 1))) & 1 == 1;
                let s = if negative { -1.0 } else { 1.0 };
                Complex64::new(s * modulus(j, jp), 0.0)
            });
            if is_unitary(&u, CONSTRUCTION_TOL) {
                return Ok(u);
            }
        }
    }
    if class == PairClass::Independent {
        let u = DMatrix::from_fn(m, m, |j, jp| {
            let angle = 2.0 * std::f64::consts::PI * (j * jp) as f64 / m as f64;
            Complex64::from_polar(modulus(j, jp), angle)
        });
        if is_unitary(&u, CONSTRUCTION_TOL) {
            return Ok(u);
        }
    }
    Err(HilbertError::NoOrthonormalBasis)
}

/// Final-layer probabilities read off the vector space: the squared inner
/// product of the state reaching the last observation with each basis vector
/// of the final property.
pub fn born_probabilities(space: &ContextSpace, net: &ContextNetwork) -> Result<Vec<f64>, HilbertError> {
    let state = space.initial_state(net);
    let last = &space.bases[1];
    let first = &space.bases[0];
    let project = |s: &DVector<Complex64>, sub: &[DVector<Complex64>]| -> f64 {
        sub.iter().map(|v| inner(s, v).norm_sqr()).sum()
    };
    match space.context_type {
        ContextType::UnknowableThenDecided | ContextType::Simultaneous => {
            Ok(last.subspaces.iter().map(|sub| project(&state, sub)).collect())
        }
        ContextType::NonSimultaneous => {
            // The first property is observed: the state reduces to one of its
            // basis vectors before the second observation.
            let mut q = vec![0.0; last.subspaces.len()];
            for sub_j in &first.subspaces {
                let qj = project(&state, sub_j);
                for (jp, sub_jp) in last.subspaces.iter().enumerate() {
                    q[jp] += qj * project(&sub_j[0], sub_jp);
                }
            }
            Ok(q)
        }
    }
}

/// Largest gap between vector-space probabilities and network propagation.
pub fn projection_probability_deviation(space: &ContextSpace, net: &ContextNetwork) -> Result<f64, HilbertError> {
    let from_space = born_probabilities(space, net)?;
    let from_net = propagate(net)?;
    let prop = match space.context_type {
        // Propagation gives the marginal of the second property.
        ContextType::Simultaneous => {
            let mp = net.layer(1).len();
            let a = net.initial_values();
            let e = net.edge_values(0);
            (0..mp)
                .map(|jp| (0..a.len()).map(|j| born(a[j]) * born(e[j][jp])).sum())
                .collect::<Vec<f64>>()
        }
        _ => from_net.probabilities.clone(),
    };
    Ok(from_space
        .iter()
        .zip(&prop)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Self-adjoint operator with its spectral data.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOperator {
    pub matrix: DMatrix<Complex64>,
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors per eigenvalue.
    pub eigenspaces: Vec<Vec<DVector<Complex64>>>,
}

impl PropertyOperator {
    /// Wraps a Hermitian matrix, grouping eigenvectors of nearly equal
    /// eigenvalues; eigenvalues are listed in decreasing order.
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self, HilbertError> {
        if matrix.nrows() != matrix.ncols() {
            return Err(HilbertError::DimensionMismatch(matrix.nrows(), matrix.ncols()));
        }
        if (&matrix - matrix.adjoint()).iter().any(|x| x.norm() > BASIS_TOL) {
            return Err(HilbertError::NotSelfAdjoint);
        }
        let eig = matrix.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..matrix.nrows()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut eigenvalues: Vec<f64> = Vec::new();
        let mut eigenspaces: Vec<Vec<DVector<Complex64>>> = Vec::new();
        for i in order {
            let lambda = eig.eigenvalues[i];
            let v = eig.eigenvectors.column(i).into_owned();
            match eigenvalues.last() {
                Some(&prev) if (prev - lambda).abs() < DEGENERACY_TOL => {
                    eigenspaces.last_mut().expect("nonempty").push(v)
                }
                _ => {
                    eigenvalues.push(lambda);
                    eigenspaces.push(vec![v]);
                }
            }
        }
        Ok(PropertyOperator {
            matrix,
            eigenvalues,
            eigenspaces,
        })
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_non_degenerate(&self) -> bool {
        self.eigenspaces.iter().all(|s| s.len() == 1)
    }

    /// `Σ λ_k Π_k` rebuilt from the spectral data.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let d = self.dimension();
        let mut out = DMatrix::<Complex64>::zeros(d, d);
        for (lambda, space) in self.eigenvalues.iter().zip(&self.eigenspaces) {
            for v in space {
                out += (v * v.adjoint()) * Complex64::new(*lambda, 0.0);
            }
        }
        out
    }
}

fn projector_sum(labels: &[f64], subspaces: &[Vec<DVector<Complex64>>], d: usize) -> DMatrix<Complex64> {
    let mut out = DMatrix::<Complex64>::zeros(d, d);
    for (label, sub) in labels.iter().zip(subspaces) {
        for v in sub {
            out += (v * v.adjoint()) * Complex64::new(*label, 0.0);
        }
    }
    out
}

fn check_distinct(labels: &[f64]) -> Result<(), HilbertError> {
    for (i, a) in labels.iter().enumerate() {
        if labels[..i].iter().any(|b| (a - b).abs() < DEGENERACY_TOL) {
            return Err(HilbertError::DuplicateLabels);
        }
    }
    Ok(())
}

/// `Σ_j p_j Π_j` over the property's value subspaces.
pub fn make_operator(space: &ContextSpace, property: &str) -> Result<PropertyOperator, HilbertError> {
    let basis = space.basis(property)?;
    check_distinct(&basis.labels)?;
    let matrix = projector_sum(&basis.labels, &basis.subspaces, space.dimension);
    PropertyOperator::from_matrix(matrix)
}

/// Operator of a contracted property: each group of values merges into one
/// value with the given label, and its eigenprojector is the direct sum.
pub fn make_contracted_operator(
    space: &ContextSpace,
    property: &str,
    groups: &[Vec<usize>],
    labels: &[f64],
) -> Result<PropertyOperator, HilbertError> {
    let basis = space.basis(property)?;
    let mut seen = vec![false; basis.subspaces.len()];
    for g in groups {
        for &j in g {
            if j >= seen.len() || std::mem::replace(&mut seen[j], true) {
                return Err(HilbertError::BadGrouping);
            }
        }
    }
    if seen.iter().any(|s| !s) || groups.len() != labels.len() {
        return Err(HilbertError::BadGrouping);
    }
    check_distinct(labels)?;
    let merged: Vec<Vec<DVector<Complex64>>> = groups
        .iter()
        .map(|g| g.iter().flat_map(|&j| basis.subspaces[j].iter().cloned()).collect())
        .collect();
    PropertyOperator::from_matrix(projector_sum(labels, &merged, space.dimension))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommutatorReport {
    pub matrix: DMatrix<Complex64>,
    /// Spectral norm (largest singular value).
    pub norm: f64,
    pub commuting: bool,
}

pub fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// `AB − BA` and whether it vanishes.
pub fn commutator(a: &PropertyOperator, b: &PropertyOperator) -> Result<CommutatorReport, HilbertError> {
    if a.dimension() != b.dimension() {
        return Err(HilbertError::DimensionMismatch(a.dimension(), b.dimension()));
    }
    let matrix = &a.matrix * &b.matrix - &b.matrix * &a.matrix;
    let norm = spectral_norm(&matrix);
    Ok(CommutatorReport {
        matrix,
        norm,
        commuting: norm < COMMUTING_TOL,
    })
}

/// The context observed in reverse order, with `ă = a·A` and `Ă = A⁻¹`.
pub fn reciprocal(net: &ContextNetwork) -> Result<ContextNetwork, HilbertError> {
    if net.layers().len() != 2 {
        return Err(HilbertError::UnsupportedContext(format!(
            "expected two layers, got {}",
            net.layers().len()
        )));
    }
    let (m, mp) = (net.layer(0).len(), net.layer(1).len());
    if m != mp {
        return Err(HilbertError::ReciprocalNeedsSquare);
    }
    let a = net.edge_values(0);
    let mat = DMatrix::from_fn(m, m, |i, j| a[i][j]);
    let inv = mat
        .clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|x| x.is_finite()))
        .ok_or(HilbertError::ReciprocalUndefined)?;
    if mat.determinant().norm() < 1e-12 {
        return Err(HilbertError::ReciprocalUndefined);
    }
    let init = net.initial_values();
    let new_initial: Vec<Amplitude> = (0..m)
        .map(|j| Amplitude::float((0..m).map(|i| init[i] * a[i][j]).sum()))
        .collect();
    let new_edge: Vec<Vec<Amplitude>> = (0..m)
        .map(|i| (0..m).map(|j| Amplitude::float(inv[(i, j)])).collect())
        .collect();
    let mut first = net.layer(1).clone();
    let mut second = net.layer(0).clone();
    first.level = net.layer(0).level;
    second.level = net.layer(1).level;
    first.simultaneous = false;
    second.simultaneous = net.layer(1).simultaneous;
    Ok(ContextNetwork::new(vec![first, second], new_initial, vec![new_edge]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyConstruction {
    /// `v_jj' = |⟨P_j, v_j'⟩|² / M`.
    pub joint_volumes: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    /// The context extended by an observation of the new property.
    pub network: ContextNetwork,
    pub notes: Vec<String>,
}

/// Reads a new property off a non-degenerate self-adjoint operator, relative
/// to the final property of `net` (whose basis lives in `space`).
pub fn operator_to_property(
    op: &PropertyOperator,
    space: &ContextSpace,
    net: &ContextNetwork,
    name: &str,
) -> Result<PropertyConstruction, HilbertError> {
    if op.dimension() != space.dimension {
        return Err(HilbertError::DimensionMismatch(op.dimension(), space.dimension));
    }
    if !op.is_non_degenerate() {
        return Err(HilbertError::DegenerateEigenvalues);
    }
    let last = net.layers().last().expect("validated network has layers");
    let basis = space.basis(&last.property)?;
    if basis.subspaces.iter().any(|s| s.len() != 1) || basis.subspaces.len() != space.dimension {
        return Err(HilbertError::UnsupportedContext(
            "final property must have a one-dimensional eigenspace per value".into(),
        ));
    }
    let d = space.dimension;
    let amps: Vec<Vec<Complex64>> = basis
        .subspaces
        .iter()
        .map(|pj| op.eigenspaces.iter().map(|v| inner(&pj[0], &v[0])).collect())
        .collect();
    let joint_volumes = amps
        .iter()
        .map(|r| r.iter().map(|a| a.norm_sqr() / d as f64).collect())
        .collect();
    let mut layers = net.layers().to_vec();
    let mut edges = net.edges().to_vec();
    layers.push(Layer::new(name, KnowabilityLevel::Decided, op.eigenvalues.clone()));
    edges.push(
        amps.iter()
            .map(|r| r.iter().map(|a| Amplitude::float(*a)).collect())
            .collect(),
    );
    Ok(PropertyConstruction {
        joint_volumes,
        labels: op.eigenvalues.clone(),
        network: ContextNetwork::new(layers, net.initial().to_vec(), edges),
        notes: vec!["regions not uniquely determined".to_string()],
    })
}

/// Rotation of the vector-space basis when the boundary between the two
/// values of the second property is rotated by `phi` in the joint property
/// space (`0 ≤ phi ≤ π`).
pub fn state_space_angle_map(phi: f64) -> f64 {
    phi / 2.0
}
