// SPDX-License-Identifier: Apache-2.0

//! Constraint systems for candidate amplitude-to-probability maps and the
//! degree-of-freedom analysis that singles out `|a|²`.
//!
//! Amplitudes are numbered `a_j` for the first property `P` (index `j`) and
//! `a_jj'` for the edge to the second property `P'` (index `M + j·M' + j'`).
//! Complex amplitudes contribute two real variables each, real ones one.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::evolution::KnowabilityLevel;

pub mod dual;
mod report;
mod solver;

pub use dual::{CDual, Dual};
pub use report::{
    default_candidates, uniqueness_report, CandidateVerdict, ShapeVerdict, UniquenessRow, UniquenessSummary,
};
pub use solver::{estimate_dof, BlockDof, DofReport, SolverOptions, Verdict};

/// Highest total degree accepted for polynomial candidates.
pub const MAX_POLY_DEGREE: u32 = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UniquenessError {
    #[error("properties need at least two values (got M={0}, M'={1})")]
    TooFewValues(usize, usize),
    #[error("modulus-power exponent must be a positive integer")]
    ZeroExponent,
    #[error("polynomial degree {0} exceeds {MAX_POLY_DEGREE}")]
    DegreeTooHigh(u32),
    #[error("polynomial has no terms")]
    EmptyPolynomial,
    #[error("probability undefined at this knowability level")]
    ContingentLevel,
    #[error("at least one solver start is required")]
    NoStarts,
    #[error("padding failed: {0}")]
    Padding(String),
}

/// `g(x, y) = Σ d_mn x^m y^n` for `a = x + iy`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolynomialMap {
    /// `(m, n, d_mn)` triples.
    pub terms: Vec<(u32, u32, f64)>,
}

impl PolynomialMap {
    pub fn new(terms: Vec<(u32, u32, f64)>) -> Result<Self, UniquenessError> {
        let terms: Vec<_> = terms.into_iter().filter(|t| t.2 != 0.0).collect();
        if terms.is_empty() {
            return Err(UniquenessError::EmptyPolynomial);
        }
        if let Some(d) = terms.iter().map(|t| t.0 + t.1).find(|d| *d > MAX_POLY_DEGREE) {
            return Err(UniquenessError::DegreeTooHigh(d));
        }
        Ok(PolynomialMap { terms })
    }

    /// The polynomial `(x² + y²)^γ`.
    pub fn modulus_power(gamma: u32) -> Self {
        let mut terms = Vec::new();
        for k in 0..=gamma {
            terms.push((2 * k, 2 * (gamma - k), binomial(gamma, k) as f64));
        }
        PolynomialMap { terms }
    }

    /// The exponent γ if this polynomial is `(x² + y²)^γ`.
    pub fn as_modulus_power(&self) -> Option<u32> {
        let degree = self.terms.iter().map(|t| t.0 + t.1).max()?;
        if degree == 0 || degree % 2 == 1 {
            return None;
        }
        let reference = PolynomialMap::modulus_power(degree / 2);
        let coeff = |p: &PolynomialMap, m: u32, n: u32| {
            p.terms
                .iter()
                .filter(|t| t.0 == m && t.1 == n)
                .map(|t| t.2)
                .sum::<f64>()
        };
        let same =
            (0..=degree).all(|m| (0..=degree - m).all(|n| (coeff(self, m, n) - coeff(&reference, m, n)).abs() < 1e-12));
        same.then_some(degree / 2)
    }
}

fn binomial(n: u32, k: u32) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Candidate amplitude-to-probability maps `f`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "form")]
pub enum CandidateMap {
    /// `f(a) = a` on real amplitudes.
    RealIdentity,
    /// `f(a) = a²` on real amplitudes, the simplest real map other than the identity.
    RealSquare,
    /// `f(a) = |a|^{2γ}` on complex amplitudes.
    ModulusPower {
        gamma: u32,
    },
    Polynomial(PolynomialMap),
}

impl CandidateMap {
    pub fn name(&self) -> String {
        match self {
            CandidateMap::RealIdentity => "real-identity".into(),
            CandidateMap::RealSquare => "real-square".into(),
            CandidateMap::ModulusPower { gamma } => format!("|a|^{}", 2 * gamma),
            CandidateMap::Polynomial(p) => {
                let terms: Vec<String> = p.terms.iter().map(|(m, n, d)| format!("{d}*x^{m}*y^{n}")).collect();
                format!("poly({})", terms.join("+"))
            }
        }
    }

    pub fn is_complex(&self) -> bool {
        !matches!(self, CandidateMap::RealIdentity | CandidateMap::RealSquare)
    }

    /// True for the literal identity map, excluded by the requirement `f(a) ≠ a`.
    pub fn is_identity(&self) -> bool {
        matches!(self, CandidateMap::RealIdentity)
    }

    fn check(&self) -> Result<(), UniquenessError> {
        match self {
            CandidateMap::ModulusPower { gamma: 0 } => Err(UniquenessError::ZeroExponent),
            CandidateMap::Polynomial(p) => PolynomialMap::new(p.terms.clone()).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Exponent of the equivalent modulus power, if any.
    fn modulus_exponent(&self) -> Option<u32> {
        match self {
            CandidateMap::ModulusPower { gamma } => Some(*gamma),
            CandidateMap::Polynomial(p) => p.as_modulus_power(),
            _ => None,
        }
    }

    pub fn eval(&self, a: Complex64) -> f64 {
        match self {
            CandidateMap::RealIdentity => a.re,
            CandidateMap::RealSquare => a.re * a.re,
            CandidateMap::ModulusPower { gamma } => a.norm_sqr().powi(*gamma as i32),
            CandidateMap::Polynomial(p) => p
                .terms
                .iter()
                .map(|(m, n, d)| d * a.re.powi(*m as i32) * a.im.powi(*n as i32))
                .sum(),
        }
    }

    pub fn eval_dual(&self, a: &CDual) -> Dual {
        match self {
            CandidateMap::RealIdentity => a.re.clone(),
            CandidateMap::RealSquare => a.re.powi(2),
            CandidateMap::ModulusPower { gamma } => a.norm_sqr().powi(*gamma),
            CandidateMap::Polynomial(p) => {
                let n = a.re.grad.len();
                p.terms.iter().fold(Dual::constant(0.0, n), |acc, (m, k, d)| {
                    &acc + &(&a.re.powi(*m) * &a.im.powi(*k)).scale(*d)
                })
            }
        }
    }
}

impl fmt::Display for CandidateMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Block {
    /// Only the amplitudes `a_j`.
    P,
    /// Only the amplitudes `a_jj'`.
    PPrime,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Normalization,
    Closure,
    Independence,
}

type RealRow = Arc<dyn Fn(&Amplitudes) -> Dual + Send + Sync>;
type ComplexRow = Arc<dyn Fn(&Amplitudes) -> CDual + Send + Sync>;

#[derive(Clone)]
enum Residual {
    Real(RealRow),
    /// Real (`false`) or imaginary (`true`) part of a complex row.
    Part(ComplexRow, bool),
}

/// Amplitudes with gradients, plus cached powers of each amplitude and its
/// conjugate.
pub struct Amplitudes {
    values: Vec<CDual>,
    powers: Vec<Vec<CDual>>,
    conj_powers: Vec<Vec<CDual>>,
}

impl Amplitudes {
    fn new(values: Vec<CDual>, max_power: u32) -> Self {
        let n = values.first().map_or(0, |v| v.re.grad.len());
        let table = |base: &dyn Fn(&CDual) -> CDual| -> Vec<Vec<CDual>> {
            values
                .iter()
                .map(|v| {
                    let b = base(v);
                    let mut row = vec![CDual::one(n)];
                    for k in 1..=max_power as usize {
                        let next = row[k - 1].mul(&b);
                        row.push(next);
                    }
                    row
                })
                .collect()
        };
        let powers = table(&|v| v.clone());
        let conj_powers = table(&|v| v.conj());
        Amplitudes {
            values,
            powers,
            conj_powers,
        }
    }

    pub fn pow(&self, i: usize, k: u32) -> &CDual {
        &self.powers[i][k as usize]
    }

    pub fn conj_pow(&self, i: usize, k: u32) -> &CDual {
        &self.conj_powers[i][k as usize]
    }

    pub fn gradient_len(&self) -> usize {
        self.values[0].re.grad.len()
    }
}

impl std::ops::Index<usize> for Amplitudes {
    type Output = CDual;
    fn index(&self, i: usize) -> &CDual {
        &self.values[i]
    }
}

/// One real polynomial equality `r(x) = 0`.
#[derive(Clone)]
pub struct Condition {
    pub label: String,
    pub block: Block,
    pub role: Role,
    /// Implied by the other rows; reported but not solved.
    pub dependent: bool,
    /// The imaginary part of a self-conjugate row, zero for every input.
    pub identically_zero: bool,
    residual: Residual,
}

impl Condition {
    fn real(label: String, block: Block, role: Role, row: RealRow) -> Self {
        Self::new(label, block, role, Residual::Real(row))
    }

    fn new(label: String, block: Block, role: Role, residual: Residual) -> Self {
        Condition {
            label,
            block,
            role,
            dependent: false,
            identically_zero: false,
            residual,
        }
    }

    pub fn eval(&self, amplitudes: &Amplitudes) -> Dual {
        match &self.residual {
            Residual::Real(f) => f(amplitudes),
            Residual::Part(f, imaginary) => {
                let z = f(amplitudes);
                if *imaginary {
                    z.im
                } else {
                    z.re
                }
            }
        }
    }

    fn shares_row(&self, other: &Condition) -> bool {
        match (&self.residual, &other.residual) {
            (Residual::Part(a, _), Residual::Part(b, _)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl fmt::Debug for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Condition")
            .field("label", &self.label)
            .field("block", &self.block)
            .field("role", &self.role)
            .field("dependent", &self.dependent)
            .field("identically_zero", &self.identically_zero)
            .finish()
    }
}

/// Minimum free parameters demanded by experimental freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RequiredDof {
    pub p: usize,
    pub p_prime: usize,
    pub total: usize,
}

#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub m: usize,
    /// Number of `P'` values in the system, including virtual ones.
    pub m_prime: usize,
    /// Number of `P'` values before padding.
    pub physical_m_prime: usize,
    pub level: KnowabilityLevel,
    pub candidate: CandidateMap,
    pub variables: Vec<String>,
    pub conditions: Vec<Condition>,
    pub required: RequiredDof,
    pub notes: Vec<String>,
    /// Highest amplitude power appearing in the independence rows.
    max_power: u32,
}

impl ConstraintSystem {
    pub fn amplitude_count(&self) -> usize {
        self.m + self.m * self.m_prime
    }

    pub fn vars_per_amplitude(&self) -> usize {
        if self.candidate.is_complex() {
            2
        } else {
            1
        }
    }

    pub fn variable_count(&self) -> usize {
        self.variables.len()
    }

    /// Variables belonging to the `P` block come first.
    pub fn p_variable_count(&self) -> usize {
        self.m * self.vars_per_amplitude()
    }

    pub fn active(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter().filter(|c| !c.dependent)
    }

    pub fn count(&self, block: Block) -> usize {
        self.active().filter(|c| c.block == block).count()
    }

    /// Values and gradients of the active rows, evaluating each complex row once.
    pub fn evaluate_active(&self, x: &[f64]) -> Vec<Dual> {
        let amps = self.amplitudes(x);
        let mut out = Vec::new();
        let mut cached: Option<(&Condition, CDual)> = None;
        for c in self.active() {
            if let Residual::Part(f, imaginary) = &c.residual {
                let z = match cached.take() {
                    Some((prev, z)) if prev.shares_row(c) => z,
                    _ => f(&amps),
                };
                out.push(if *imaginary { z.im.clone() } else { z.re.clone() });
                cached = Some((c, z));
            } else {
                out.push(c.eval(&amps));
            }
        }
        out
    }

    /// Amplitudes with gradients seeded from the variable vector.
    pub fn amplitudes(&self, x: &[f64]) -> Amplitudes {
        let n = x.len();
        let k = self.vars_per_amplitude();
        let values = (0..self.amplitude_count())
            .map(|i| {
                if k == 2 {
                    CDual {
                        re: Dual::variable(x[2 * i], 2 * i, n),
                        im: Dual::variable(x[2 * i + 1], 2 * i + 1, n),
                    }
                } else {
                    CDual {
                        re: Dual::variable(x[i], i, n),
                        im: Dual::constant(0.0, n),
                    }
                }
            })
            .collect();
        Amplitudes::new(values, self.max_power)
    }

    pub fn amplitude_values(&self, x: &[f64]) -> Vec<Complex64> {
        let k = self.vars_per_amplitude();
        (0..self.amplitude_count())
            .map(|i| {
                if k == 2 {
                    Complex64::new(x[2 * i], x[2 * i + 1])
                } else {
                    Complex64::new(x[i], 0.0)
                }
            })
            .collect()
    }

    pub fn edge_index(&self, j: usize, jp: usize) -> usize {
        self.m + j * self.m_prime + jp
    }
}

fn label_amp(j: usize, jp: Option<usize>) -> String {
    match jp {
        Some(jp) => format!("a[{},{}]", j + 1, jp + 1),
        None => format!("a[{}]", j + 1),
    }
}

/// Normalization rows and the closure row for a two-property context.
pub fn build_constraints(
    m: usize,
    m_prime: usize,
    level: KnowabilityLevel,
    candidate: &CandidateMap,
) -> Result<ConstraintSystem, UniquenessError> {
    build_padded(m, m_prime, m_prime, level, candidate)
}

/// As [`build_constraints`] but with `P'` padded to `m_prime` values, of
/// which the first `physical` are real values of the property.
pub(crate) fn build_padded(
    m: usize,
    m_prime: usize,
    physical: usize,
    level: KnowabilityLevel,
    candidate: &CandidateMap,
) -> Result<ConstraintSystem, UniquenessError> {
    if m < 2 || physical < 2 {
        return Err(UniquenessError::TooFewValues(m, physical));
    }
    if level == KnowabilityLevel::Contingent {
        return Err(UniquenessError::ContingentLevel);
    }
    candidate.check()?;
    let mut variables = Vec::new();
    for i in 0..(m + m * m_prime) {
        let name = if i < m {
            label_amp(i, None)
        } else {
            let e = i - m;
            label_amp(e / m_prime, Some(e % m_prime))
        };
        if candidate.is_complex() {
            variables.push(format!("Re {name}"));
            variables.push(format!("Im {name}"));
        } else {
            variables.push(name);
        }
    }
    let edge = move |j: usize, jp: usize| m + j * m_prime + jp;
    let mut conditions = Vec::new();
    let f = candidate.clone();
    conditions.push(Condition::real(
        "sum_j f(a[j]) = 1".into(),
        Block::P,
        Role::Normalization,
        Arc::new(move |a: &Amplitudes| {
            let n = a.gradient_len();
            (0..m)
                .fold(Dual::constant(0.0, n), |acc, j| &acc + &f.eval_dual(&a[j]))
                .add_const(-1.0)
        }),
    ));
    for j in 0..m {
        let f = candidate.clone();
        conditions.push(Condition::real(
            format!("sum_j' f(a[{},j']) = 1", j + 1),
            Block::PPrime,
            Role::Normalization,
            Arc::new(move |a: &Amplitudes| {
                let n = a.gradient_len();
                (0..m_prime)
                    .fold(Dual::constant(0.0, n), |acc, jp| &acc + &f.eval_dual(&a[edge(j, jp)]))
                    .add_const(-1.0)
            }),
        ));
    }
    let f = candidate.clone();
    let mut closure = if level == KnowabilityLevel::Unknowable {
        Condition::real(
            "sum_j' f(sum_j a[j] a[j,j']) = 1".into(),
            Block::Mixed,
            Role::Closure,
            Arc::new(move |a: &Amplitudes| {
                let n = a.gradient_len();
                (0..m_prime)
                    .fold(Dual::constant(0.0, n), |acc, jp| {
                        let z = (0..m).fold(CDual::zero(n), |s, j| s.add(&a[j].mul(&a[edge(j, jp)])));
                        &acc + &f.eval_dual(&z)
                    })
                    .add_const(-1.0)
            }),
        )
    } else {
        Condition::real(
            "sum_jj' f(a[j]) f(a[j,j']) = 1".into(),
            Block::Mixed,
            Role::Closure,
            Arc::new(move |a: &Amplitudes| {
                let n = a.gradient_len();
                let mut acc = Dual::constant(0.0, n);
                for j in 0..m {
                    let fj = f.eval_dual(&a[j]);
                    for jp in 0..m_prime {
                        acc = &acc + &(&fj * &f.eval_dual(&a[edge(j, jp)]));
                    }
                }
                acc.add_const(-1.0)
            }),
        )
    };
    let mut notes = Vec::new();
    if level == KnowabilityLevel::Decided {
        closure.dependent = true;
        notes.push("closure follows from the normalization rows at level 3".into());
    }
    conditions.push(closure);
    if physical < m_prime {
        notes.push(format!(
            "P' padded from {physical} to {m_prime} values; columns {}..{} are virtual",
            physical + 1,
            m_prime
        ));
    }
    Ok(ConstraintSystem {
        m,
        m_prime,
        physical_m_prime: physical,
        level,
        candidate: candidate.clone(),
        variables,
        conditions,
        required: RequiredDof {
            p: m - 1,
            p_prime: m * (physical - 1),
            total: m * physical - 1,
        },
        notes,
        max_power: 1,
    })
}

/// All multi-indices of total size `gamma` over `m` slots.
fn compositions(m: usize, gamma: u32) -> Vec<Vec<u32>> {
    if m == 1 {
        return vec![vec![gamma]];
    }
    let mut out = Vec::new();
    for first in (0..=gamma).rev() {
        for mut rest in compositions(m - 1, gamma - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Adds the rows that make the closure row hold for every admissible choice
/// of `a_j` when `P` is unknowable.
pub fn property_independence_conditions(mut system: ConstraintSystem) -> ConstraintSystem {
    if system.level != KnowabilityLevel::Unknowable {
        system
            .notes
            .push("any f satisfies property independence at level 3".into());
        return system;
    }
    let (m, mp) = (system.m, system.m_prime);
    let edge = move |j: usize, jp: usize| m + j * mp + jp;
    match (&system.candidate, system.candidate.modulus_exponent()) {
        (CandidateMap::RealIdentity, _) => {
            system.notes.push("no amplitude-level freedom".into());
        }
        (CandidateMap::RealSquare, _) => {
            for j in 0..m {
                for k in (j + 1)..m {
                    system.conditions.push(Condition::real(
                        format!("sum_j' a[{},j'] a[{},j'] = 0", j + 1, k + 1),
                        Block::PPrime,
                        Role::Independence,
                        Arc::new(move |a: &Amplitudes| {
                            let n = a.gradient_len();
                            (0..mp).fold(Dual::constant(0.0, n), |acc, jp| {
                                &acc + &(&a[edge(j, jp)].re * &a[edge(k, jp)].re)
                            })
                        }),
                    ));
                }
            }
        }
        (_, Some(gamma)) => {
            // Coefficient of a^α ā^β in Σ_j' f(Σ_j a_j a_jj') must vanish
            // unless α = β = γ·e_j, whose terms the row normalizations absorb.
            let idx = compositions(m, gamma);
            system.max_power = gamma;
            for (s, alpha) in idx.iter().enumerate() {
                for beta in &idx[s..] {
                    let pure = alpha == beta && alpha.iter().filter(|&&e| e > 0).count() == 1;
                    if pure {
                        continue;
                    }
                    let (al, be) = (alpha.clone(), beta.clone());
                    let row: ComplexRow = Arc::new(move |a: &Amplitudes| {
                        let n = a.gradient_len();
                        (0..mp).fold(CDual::zero(n), |acc, jp| {
                            let term = (0..m).fold(CDual::one(n), |t, j| {
                                let e = edge(j, jp);
                                let t = if al[j] > 0 { t.mul(a.pow(e, al[j])) } else { t };
                                if be[j] > 0 {
                                    t.mul(a.conj_pow(e, be[j]))
                                } else {
                                    t
                                }
                            });
                            acc.add(&term)
                        })
                    });
                    let name = format!("coeff a^{alpha:?} conj(a)^{beta:?}");
                    system.conditions.push(Condition::new(
                        format!("Re {name} = 0"),
                        Block::PPrime,
                        Role::Independence,
                        Residual::Part(row.clone(), false),
                    ));
                    let mut im = Condition::new(
                        format!("Im {name} = 0"),
                        Block::PPrime,
                        Role::Independence,
                        Residual::Part(row, true),
                    );
                    im.identically_zero = alpha == beta;
                    system.conditions.push(im);
                }
            }
        }
        (CandidateMap::Polynomial(_), None) => {
            system
                .notes
                .push("not a modulus power; only the multiplicativity filter applies".into());
        }
        (CandidateMap::ModulusPower { .. }, None) => unreachable!("modulus power has an exponent"),
    }
    system
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplicativityReport {
    pub trials: usize,
    pub max_deviation: f64,
    pub multiplicative: bool,
}

/// Tolerance on `|f(ab) − f(a)f(b)|` for a map to count as multiplicative.
pub const MULTIPLICATIVITY_TOL: f64 = 1e-12;

/// Largest `|f(ab) − f(a) f(b)|` over random pairs in the unit disk (or the
/// unit interval for real candidates).
pub fn verify_multiplicativity(f: &CandidateMap, trials: usize, seed: u64) -> MultiplicativityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| loop {
        let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if !f.is_complex() {
            return Complex64::new(z.re, 0.0);
        }
        if z.norm_sqr() <= 1.0 {
            return z;
        }
    };
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        worst = worst.max((f.eval(a * b) - f.eval(a) * f.eval(b)).abs());
    }
    MultiplicativityReport {
        trials,
        max_deviation: worst,
        multiplicative: worst < MULTIPLICATIVITY_TOL,
    }
}
