// SPDX-License-Identifier: Apache-2.0

//! Randomized Levenberg–Marquardt search and Jacobian-rank DOF estimates.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{Block, ConstraintSystem, RequiredDof, UniquenessError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// A start counts as a solution when the residual norm falls below this.
    pub residual_tol: f64,
    /// Singular values below `rank_tol · σ_max` count as zero.
    pub rank_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            starts: 64,
            seed: 0,
            max_iterations: 300,
            residual_tol: 1e-10,
            rank_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockDof {
    pub p: usize,
    pub p_prime: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DofReport {
    pub feasible: bool,
    pub starts: usize,
    /// Admissible solutions found.
    pub solutions: usize,
    /// Solutions where some value of `P'` is reachable from only one value of `P`.
    pub rejected_degenerate: usize,
    /// Solutions with some `f(a)` outside `[0, 1]`.
    pub rejected_range: usize,
    pub best_residual: f64,
    pub sample_solutions: Vec<Vec<f64>>,
    pub dof: Option<BlockDof>,
    /// Every admissible solution gave the same DOF.
    pub dof_stable: bool,
    pub required: RequiredDof,
    pub conditions: BlockDof,
    pub verdict: Verdict,
    pub reasons: Vec<String>,
}

fn residual_and_jacobian(system: &ConstraintSystem, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let rows = system.evaluate_active(x);
    let n = x.len();
    let r = DVector::from_iterator(rows.len(), rows.iter().map(|d| d.value));
    let j = DMatrix::from_fn(rows.len(), n, |i, k| rows[i].grad[k]);
    (r, j)
}

fn levenberg_marquardt(system: &ConstraintSystem, mut x: DVector<f64>, opts: &SolverOptions) -> (DVector<f64>, f64) {
    let (mut r, mut jac) = residual_and_jacobian(system, x.as_slice());
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..opts.max_iterations {
        if cost.sqrt() < opts.residual_tol * 1e-2 {
            break;
        }
        let jt = jac.transpose();
        let mut normal = &jt * &jac;
        let grad = &jt * &r;
        for i in 0..normal.nrows() {
            normal[(i, i)] += lambda * (1.0 + normal[(i, i)]);
        }
        let step = match normal.cholesky() {
            Some(ch) => ch.solve(&(-grad)),
            None => {
                lambda *= 10.0;
                continue;
            }
        };
        let trial = &x + &step;
        let (tr, tj) = residual_and_jacobian(system, trial.as_slice());
        let tcost = tr.norm_squared();
        if tcost < cost {
            let gain = cost - tcost;
            x = trial;
            r = tr;
            jac = tj;
            cost = tcost;
            lambda = (lambda / 3.0).max(1e-15);
            if gain < 1e-30 {
                break;
            }
        } else {
            lambda *= 4.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    (x, cost.sqrt())
}

fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > tol * top).count()
}

fn block_dof(system: &ConstraintSystem, x: &[f64], tol: f64) -> BlockDof {
    let (_, jac) = residual_and_jacobian(system, x);
    let np = system.p_variable_count();
    let n = x.len();
    let rows_of = |b: Block| -> Vec<usize> {
        system
            .active()
            .enumerate()
            .filter(|(_, c)| c.block == b)
            .map(|(i, _)| i)
            .collect()
    };
    let sub =
        |rows: &[usize], c0: usize, c1: usize| DMatrix::from_fn(rows.len(), c1 - c0, |i, k| jac[(rows[i], c0 + k)]);
    let p_rank = numerical_rank(&sub(&rows_of(Block::P), 0, np), tol);
    let pp_rank = numerical_rank(&sub(&rows_of(Block::PPrime), np, n), tol);
    let total_rank = numerical_rank(&jac, tol);
    BlockDof {
        p: np - p_rank,
        p_prime: (n - np) - pp_rank,
        total: n - total_rank,
    }
}

enum Admissibility {
    Ok,
    Degenerate,
    OutOfRange,
}

fn admissibility(system: &ConstraintSystem, x: &[f64]) -> Admissibility {
    let amps = system.amplitude_values(x);
    let f = &system.candidate;
    if amps.iter().any(|a| {
        let v = f.eval(*a);
        !(-1e-10..=1.0 + 1e-10).contains(&v)
    }) {
        return Admissibility::OutOfRange;
    }
    for jp in 0..system.physical_m_prime {
        let reachable = (0..system.m)
            .filter(|&j| f.eval(amps[system.edge_index(j, jp)]) > 1e-8)
            .count();
        if reachable == 1 {
            return Admissibility::Degenerate;
        }
    }
    Admissibility::Ok
}

struct StartOutcome {
    x: Vec<f64>,
    residual: f64,
}

/// Searches for solutions from `opts.starts` seeded random starts and
/// estimates the local solution-manifold dimension per block.
pub fn estimate_dof(system: &ConstraintSystem, opts: &SolverOptions) -> Result<DofReport, UniquenessError> {
    if opts.starts == 0 {
        return Err(UniquenessError::NoStarts);
    }
    let n = system.variable_count();
    let outcomes: Vec<StartOutcome> = (0..opts.starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(s as u64);
            let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let (x, residual) = levenberg_marquardt(system, x0, opts);
            StartOutcome {
                x: x.as_slice().to_vec(),
                residual,
            }
        })
        .collect();
    let best_residual = outcomes.iter().map(|o| o.residual).fold(f64::INFINITY, f64::min);
    let mut solutions = Vec::new();
    let (mut degenerate, mut out_of_range) = (0, 0);
    for o in outcomes.iter().filter(|o| o.residual < opts.residual_tol) {
        match admissibility(system, &o.x) {
            Admissibility::Ok => solutions.push(o.x.clone()),
            Admissibility::Degenerate => degenerate += 1,
            Admissibility::OutOfRange => out_of_range += 1,
        }
    }
    let dofs: Vec<BlockDof> = solutions.iter().map(|x| block_dof(system, x, opts.rank_tol)).collect();
    let dof_stable = dofs.windows(2).all(|w| w[0] == w[1]);
    // Report the most common estimate.
    let dof = dofs
        .iter()
        .max_by_key(|d| {
            (
                dofs.iter().filter(|e| e == d).count(),
                std::cmp::Reverse((d.total, d.p_prime, d.p)),
            )
        })
        .copied();
    let feasible = !solutions.is_empty();
    let required = system.required;
    let mut reasons = Vec::new();
    if !feasible {
        reasons.push(format!(
            "no admissible solution with residual < {:e} from {} starts",
            opts.residual_tol, opts.starts
        ));
    }
    if let Some(d) = dof {
        if d.p < required.p {
            reasons.push(format!("P-block DOF {} < required {}", d.p, required.p));
        }
        if d.p_prime < required.p_prime {
            reasons.push(format!("P'-block DOF {} < required {}", d.p_prime, required.p_prime));
        }
        if d.total < required.total {
            reasons.push(format!("total DOF {} < required {}", d.total, required.total));
        }
    }
    Ok(DofReport {
        feasible,
        starts: opts.starts,
        solutions: solutions.len(),
        rejected_degenerate: degenerate,
        rejected_range: out_of_range,
        best_residual,
        sample_solutions: solutions.into_iter().take(3).collect(),
        dof,
        dof_stable,
        required,
        conditions: BlockDof {
            p: system.count(Block::P),
            p_prime: system.count(Block::PPrime),
            total: system.active().count(),
        },
        verdict: if reasons.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        reasons,
    })
}
