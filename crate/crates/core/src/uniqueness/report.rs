// SPDX-License-Identifier: Apache-2.0

//! The candidate × shape table.

use serde::Serialize;

use super::solver::{estimate_dof, SolverOptions, Verdict};
use super::{build_padded, property_independence_conditions, verify_multiplicativity, CandidateMap, UniquenessError};
use crate::context::{pad_virtual_values, Amplitude, ContextNetwork, Layer};
use crate::evolution::KnowabilityLevel;

const MULTIPLICATIVITY_TRIALS: usize = 1000;

pub fn default_candidates() -> Vec<CandidateMap> {
    vec![
        CandidateMap::RealIdentity,
        CandidateMap::RealSquare,
        CandidateMap::ModulusPower { gamma: 1 },
        CandidateMap::ModulusPower { gamma: 2 },
        CandidateMap::ModulusPower { gamma: 3 },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessRow {
    pub candidate: String,
    pub m: usize,
    pub m_prime: usize,
    pub padded: bool,
    /// `P'` values in the solved system, virtual ones included.
    pub system_m_prime: usize,
    pub feasible: bool,
    pub solutions: usize,
    pub rejected_degenerate: usize,
    pub best_residual: f64,
    pub conditions_p: usize,
    pub conditions_p_prime: usize,
    pub dof_p: Option<usize>,
    pub dof_p_prime: Option<usize>,
    pub dof_total: Option<usize>,
    pub dof_stable: bool,
    pub required_p: usize,
    pub required_p_prime: usize,
    pub required_total: usize,
    pub multiplicative: bool,
    pub verdict: Verdict,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeVerdict {
    pub candidate: String,
    pub m: usize,
    pub m_prime: usize,
    pub verdict: Verdict,
}

/// A candidate is acceptable only if it passes every shape.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateVerdict {
    pub candidate: String,
    pub verdict: Verdict,
    /// Shapes `(M, M')` where the candidate fails.
    pub failing_shapes: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessSummary {
    pub seed: u64,
    pub starts: usize,
    pub rows: Vec<UniquenessRow>,
    /// One verdict per candidate and shape; padded rows decide when `M > M'`.
    pub shapes: Vec<ShapeVerdict>,
    pub candidates: Vec<CandidateVerdict>,
    pub born_passes_everywhere: bool,
    /// No other candidate passes every shape.
    pub only_born_passes: bool,
}

impl UniquenessSummary {
    pub fn regression_ok(&self) -> bool {
        self.born_passes_everywhere && self.only_born_passes
    }

    pub fn row(&self, candidate: &str, m: usize, m_prime: usize, padded: bool) -> Option<&UniquenessRow> {
        self.rows
            .iter()
            .find(|r| r.candidate == candidate && r.m == m && r.m_prime == m_prime && r.padded == padded)
    }
}

/// Number of `P'` values after virtual-value padding of an `(m, m_prime)` context.
fn padded_width(m: usize, m_prime: usize) -> Result<usize, UniquenessError> {
    let h = Amplitude::real(1.0 / (m as f64).sqrt());
    let rows = (0..m)
        .map(|j| {
            (0..m_prime)
                .map(|jp| Amplitude::real(if jp == j % m_prime { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    let net = ContextNetwork::new(
        vec![
            Layer::new("P", KnowabilityLevel::Unknowable, (0..m).map(|j| j as f64).collect()),
            Layer::new(
                "P'",
                KnowabilityLevel::Decided,
                (0..m_prime).map(|j| j as f64).collect(),
            ),
        ],
        vec![h; m],
        vec![rows],
    );
    let (padded, _) = pad_virtual_values(&net, 1).map_err(|e| UniquenessError::Padding(e.to_string()))?;
    Ok(padded.layer(1).len())
}

fn run_row(
    candidate: &CandidateMap,
    m: usize,
    m_prime: usize,
    width: usize,
    opts: &SolverOptions,
    multiplicative: bool,
) -> Result<UniquenessRow, UniquenessError> {
    let system = property_independence_conditions(build_padded(
        m,
        width,
        m_prime,
        KnowabilityLevel::Unknowable,
        candidate,
    )?);
    let rep = estimate_dof(&system, opts)?;
    let mut reasons = rep.reasons.clone();
    if candidate.is_identity() {
        reasons.push("f(a) = a: no amplitude-level freedom".into());
    }
    if !multiplicative {
        reasons.push("f(ab) != f(a) f(b)".into());
    }
    Ok(UniquenessRow {
        candidate: candidate.name(),
        m,
        m_prime,
        padded: width != m_prime,
        system_m_prime: width,
        feasible: rep.feasible,
        solutions: rep.solutions,
        rejected_degenerate: rep.rejected_degenerate,
        best_residual: rep.best_residual,
        conditions_p: rep.conditions.p,
        conditions_p_prime: rep.conditions.p_prime,
        dof_p: rep.dof.map(|d| d.p),
        dof_p_prime: rep.dof.map(|d| d.p_prime),
        dof_total: rep.dof.map(|d| d.total),
        dof_stable: rep.dof_stable,
        required_p: rep.required.p,
        required_p_prime: rep.required.p_prime,
        required_total: rep.required.total,
        multiplicative,
        verdict: if reasons.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        reason: reasons.join("; "),
    })
}

/// Runs every candidate over every `(M, M')` shape with `P` unknowable.
/// Shapes with `M > M'` get an unpadded row and a padded row.
pub fn uniqueness_report(
    shapes: &[(usize, usize)],
    candidates: &[CandidateMap],
    opts: &SolverOptions,
) -> Result<UniquenessSummary, UniquenessError> {
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for candidate in candidates {
        let multiplicative = verify_multiplicativity(candidate, MULTIPLICATIVITY_TRIALS, opts.seed).multiplicative;
        for &(m, m_prime) in shapes {
            let plain = run_row(candidate, m, m_prime, m_prime, opts, multiplicative)?;
            let mut decisive = plain.verdict;
            rows.push(plain);
            if m > m_prime {
                let width = padded_width(m, m_prime)?;
                let padded = run_row(candidate, m, m_prime, width, opts, multiplicative)?;
                decisive = padded.verdict;
                rows.push(padded);
            }
            verdicts.push(ShapeVerdict {
                candidate: candidate.name(),
                m,
                m_prime,
                verdict: decisive,
            });
        }
    }
    let per_candidate: Vec<CandidateVerdict> = candidates
        .iter()
        .map(|c| {
            let name = c.name();
            let failing_shapes: Vec<(usize, usize)> = verdicts
                .iter()
                .filter(|v| v.candidate == name && v.verdict == Verdict::Fail)
                .map(|v| (v.m, v.m_prime))
                .collect();
            CandidateVerdict {
                candidate: name,
                verdict: if failing_shapes.is_empty() {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                },
                failing_shapes,
            }
        })
        .collect();
    let born = CandidateMap::ModulusPower { gamma: 1 }.name();
    let born_passes_everywhere = per_candidate
        .iter()
        .filter(|v| v.candidate == born)
        .all(|v| v.verdict == Verdict::Pass);
    let only_born_passes = per_candidate
        .iter()
        .filter(|v| v.candidate != born)
        .all(|v| v.verdict == Verdict::Fail);
    Ok(UniquenessSummary {
        seed: opts.seed,
        starts: opts.starts,
        rows,
        shapes: verdicts,
        candidates: per_candidate,
        born_passes_everywhere,
        only_born_passes,
    })
}
