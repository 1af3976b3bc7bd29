// SPDX-License-Identifier: Apache-2.0

//! Command dispatch.

use std::path::Path;

use epiq::context::{propagate, reduce_by_consistency, validate_context, ContextNetwork};
use epiq::evolution::{alternatives_from_property, binomial_band, borel_trial, check_invariance, KnowabilityLevel};
use epiq::exact::QSqrt2;
use epiq::hilbert::{
    build_space, commutator, make_contracted_operator, make_operator, projection_probability_deviation, reciprocal,
    ContextSpace, PropertyOperator,
};
use epiq::uniqueness::{default_candidates, uniqueness_report, SolverOptions, UniquenessRow, Verdict};
use num_complex::Complex64;
use num_traits::ToPrimitive;
use serde_json::json;

use crate::output::{Cell, Check, RunResult, Table};
use crate::scenario::{load_scenario, CandidateSpec, Command, ContextSection, Scenario};
use crate::CliError;

pub const DEFAULT_N: u64 = 100_000;
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Command-line values that take precedence over the scenario's run section.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub command: Option<Command>,
    pub n: Option<u64>,
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    /// Replaces the context's `path_knowledge_reachable` flag.
    pub reachable: Option<bool>,
    /// Replaces the uniqueness section's number of starts.
    pub starts: Option<usize>,
}

struct Settings {
    command: Command,
    n: u64,
    seed: u64,
    tolerance: f64,
    reachable: Option<bool>,
    starts: Option<usize>,
}

fn domain<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Domain(e.to_string())
}

pub fn run_file(path: &Path, overrides: &Overrides) -> Result<RunResult, CliError> {
    run(&load_scenario(path)?, overrides)
}

pub fn run(scenario: &Scenario, overrides: &Overrides) -> Result<RunResult, CliError> {
    let command = overrides
        .command
        .or(scenario.run.command)
        .ok_or_else(|| CliError::Schema("run.command: missing (pass --command)".into()))?;
    let settings = Settings {
        command,
        n: overrides.n.or(scenario.run.n).unwrap_or(DEFAULT_N),
        seed: overrides.seed.or(scenario.run.seed).unwrap_or(0),
        tolerance: overrides
            .tolerance
            .or(scenario.run.tolerance)
            .unwrap_or(DEFAULT_TOLERANCE),
        reachable: overrides
            .reachable
            .or_else(|| scenario.context.as_ref().and_then(|c| c.path_knowledge_reachable)),
        starts: overrides
            .starts
            .or_else(|| scenario.uniqueness.as_ref().and_then(|u| u.starts)),
    };
    if settings.n == 0 {
        return Err(CliError::Schema("run.n: must be positive".into()));
    }
    if !(settings.tolerance.is_finite() && settings.tolerance > 0.0) {
        return Err(CliError::Schema("run.tolerance: must be a positive number".into()));
    }
    let (table, details, checks, summary) = match command {
        Command::Propagate => cmd_propagate(scenario, &settings)?,
        Command::Montecarlo => cmd_montecarlo(scenario, &settings)?,
        Command::Hilbert => cmd_hilbert(scenario, &settings)?,
        Command::Uniqueness => cmd_uniqueness(scenario, &settings)?,
        Command::Validate => cmd_validate(scenario, &settings)?,
    };
    Ok(RunResult {
        scenario: scenario.name.clone(),
        command: command.to_string(),
        seed: settings.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        table,
        details,
        checks,
        summary,
    })
}

type Parts = (Table, serde_json::Value, Vec<Check>, Vec<String>);

/// An outcome distribution from whichever section the scenario provides.
struct Outcomes {
    source: &'static str,
    labels: Vec<String>,
    probabilities: Vec<f64>,
    exact: Option<Vec<String>>,
    notes: Vec<String>,
    checks: Vec<Check>,
}

fn has_contingent(net: &ContextNetwork) -> bool {
    net.layers().iter().any(|l| l.level == KnowabilityLevel::Contingent)
}

fn context_network(
    section: &ContextSection,
    reachable: Option<bool>,
) -> Result<(ContextNetwork, Vec<String>), CliError> {
    let net = section.build();
    let problems = validate_context(&net);
    if !problems.is_empty() {
        return Err(CliError::Domain(format!("invalid context: {}", problems.join("; "))));
    }
    if !has_contingent(&net) {
        return Ok((net, Vec::new()));
    }
    let reachable = reachable.ok_or_else(|| {
        CliError::Domain("context has a level-2 layer: set context.path_knowledge_reachable or pass --reachable".into())
    })?;
    let resolved = reduce_by_consistency(&net, reachable).map_err(domain)?;
    let note = if reachable {
        "path knowledge reachable: level-2 layers reduce".to_string()
    } else {
        "path knowledge unreachable: level-2 layers stay unknowable".to_string()
    };
    Ok((resolved, vec![note]))
}

fn label_text(x: f64) -> String {
    crate::output::format_float(x)
}

fn outcomes(scenario: &Scenario, settings: &Settings) -> Result<Outcomes, CliError> {
    if let Some(section) = &scenario.context {
        let (net, notes) = context_network(section, settings.reachable)?;
        let dist = propagate(&net).map_err(domain)?;
        let last = net.layer(net.layers().len() - 1);
        let total: f64 = dist.probabilities.iter().sum();
        let mut notes = notes;
        notes.push(format!(
            "rules: {}",
            dist.layer_rules
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(" -> ")
        ));
        return Ok(Outcomes {
            source: "context",
            labels: last.labels.iter().copied().map(label_text).collect(),
            probabilities: dist.probabilities.clone(),
            exact: dist.exact.as_ref().map(|e| e.iter().map(|q| q.to_string()).collect()),
            notes,
            checks: vec![Check::new(
                "normalized",
                (total - 1.0).abs() <= settings.tolerance,
                format!("sum = {}", crate::output::format_float(total)),
            )
            .gating()],
        });
    }
    if let Some(section) = &scenario.statespace {
        let model = section.build()?;
        let property = model
            .property
            .as_ref()
            .ok_or_else(|| CliError::Domain("statespace.property is required to propagate".into()))?;
        let set = alternatives_from_property(&model.state, property, model.level).map_err(domain)?;
        let probs = set.probabilities().map_err(domain)?;
        let mut checks = Vec::new();
        let mut notes = vec![format!(
            "{} alternatives over {} exact states",
            set.len(),
            model.state.len()
        )];
        if let Some(ev) = &scenario.evolution {
            let rule = ev.build(&model.registry)?;
            let report = check_invariance(&set, &rule, ev.steps).map_err(domain)?;
            checks.push(
                Check::new(
                    "volume invariance",
                    true,
                    format!("{} steps, max deviation {}", report.steps, report.max_deviation),
                )
                .gating(),
            );
            notes.push(format!("ratios preserved over {} evolution steps", report.steps));
        }
        let exact: Vec<String> = probs.iter().map(|p| p.to_string()).collect();
        let probabilities = probs
            .iter()
            .map(|p| p.to_f64().unwrap_or(f64::NAN))
            .collect::<Vec<f64>>();
        return Ok(Outcomes {
            source: "statespace",
            labels: property.labels().iter().copied().map(label_text).collect(),
            probabilities,
            exact: Some(exact),
            notes,
            checks,
        });
    }
    if let Some(dist) = &scenario.distribution {
        let total = dist.iter().fold(QSqrt2::zero(), |acc, p| &acc + &p.0);
        if dist.iter().any(|p| p.0.signum() < 0) || total != QSqrt2::one() {
            return Err(CliError::Domain(format!(
                "distribution must be nonnegative and sum to 1 (sum = {total})"
            )));
        }
        return Ok(Outcomes {
            source: "distribution",
            labels: (0..dist.len()).map(|j| j.to_string()).collect(),
            probabilities: dist.iter().map(|p| p.to_f64()).collect(),
            exact: Some(dist.iter().map(|p| p.0.to_string()).collect()),
            notes: Vec::new(),
            checks: Vec::new(),
        });
    }
    Err(CliError::Domain(
        "nothing to propagate: the scenario needs a context, a statespace property or a distribution".into(),
    ))
}

fn cmd_propagate(scenario: &Scenario, settings: &Settings) -> Result<Parts, CliError> {
    let o = outcomes(scenario, settings)?;
    let mut table = Table::new(&["outcome", "label", "probability", "exact"]);
    for (j, p) in o.probabilities.iter().enumerate() {
        table.push(vec![
            j.into(),
            o.labels[j].clone().into(),
            (*p).into(),
            o.exact.as_ref().map(|e| e[j].clone()).into(),
        ]);
    }
    let details = json!({
        "source": o.source,
        "labels": o.labels,
        "probabilities": o.probabilities,
        "exact": o.exact,
        "notes": o.notes,
    });
    Ok((table, details, o.checks, o.notes))
}

fn cmd_montecarlo(scenario: &Scenario, settings: &Settings) -> Result<Parts, CliError> {
    let o = outcomes(scenario, settings)?;
    let trial = borel_trial(&o.probabilities, settings.n, settings.seed).map_err(domain)?;
    let mut table = Table::new(&[
        "outcome",
        "label",
        "probability",
        "frequency",
        "count",
        "band",
        "lower",
        "upper",
        "pass",
    ]);
    let mut checks = o.checks;
    let mut rows = Vec::new();
    for (j, &q) in o.probabilities.iter().enumerate() {
        let f = trial.frequencies[j];
        let band = binomial_band(q, settings.n);
        let pass = (f - q).abs() <= band;
        table.push(vec![
            j.into(),
            o.labels[j].clone().into(),
            q.into(),
            f.into(),
            trial.counts[j].into(),
            band.into(),
            (q - band).into(),
            (q + band).into(),
            pass.into(),
        ]);
        checks.push(Check::new(
            format!("outcome {j} within 3 sigma"),
            pass,
            format!("|{} - {}| <= {}", label_text(f), label_text(q), label_text(band)),
        ));
        rows.push(json!({
            "outcome": j, "label": o.labels[j], "probability": q, "frequency": f,
            "count": trial.counts[j], "band": band, "pass": pass,
        }));
    }
    let details = json!({ "source": o.source, "n": settings.n, "seed": settings.seed, "outcomes": rows });
    Ok((table, details, checks, o.notes))
}

fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn flat_amplitudes(net: &ContextNetwork) -> Vec<Complex64> {
    let mut v = net.initial_values();
    for k in 0..net.edges().len() {
        v.extend(net.edge_values(k).into_iter().flatten());
    }
    v
}

fn operator_details(op: &PropertyOperator) -> serde_json::Value {
    json!({
        "eigenvalues": op.eigenvalues,
        "multiplicities": op.eigenspaces.iter().map(Vec::len).collect::<Vec<_>>(),
    })
}

fn overlaps(space: &ContextSpace) -> Option<Vec<Vec<f64>>> {
    let (b0, b1) = (&space.bases[0], &space.bases[1]);
    let single = |b: &epiq::hilbert::PropertyBasis| b.subspaces.iter().all(|s| s.len() == 1);
    if !(single(b0) && single(b1)) {
        return None;
    }
    Some(
        b0.subspaces
            .iter()
            .map(|s| {
                b1.subspaces
                    .iter()
                    .map(|t| epiq::hilbert::inner(&s[0], &t[0]).norm_sqr())
                    .collect()
            })
            .collect(),
    )
}

fn cmd_hilbert(scenario: &Scenario, settings: &Settings) -> Result<Parts, CliError> {
    let section = scenario
        .context
        .as_ref()
        .ok_or_else(|| CliError::Domain("hilbert needs a context section".into()))?;
    let (net, mut notes) = context_network(section, settings.reachable)?;
    let hsec = scenario.hilbert.clone().unwrap_or(crate::scenario::HilbertSection {
        joint_volumes: None,
        phases: None,
        contract: None,
    });
    let joint = hsec.joint_table()?;
    let space = build_space(&net, joint.as_ref(), hsec.phases.as_deref()).map_err(domain)?;
    let mut table = Table::new(&["quantity", "value"]);
    let mut checks = Vec::new();
    table.push(vec!["context_type".into(), space.context_type.code().into()]);
    table.push(vec!["dimension".into(), space.dimension.into()]);
    for b in &space.bases {
        let dims: Vec<String> = b.subspace_dimensions().iter().map(usize::to_string).collect();
        table.push(vec![
            format!("subspace_dimensions[{}]", b.property).into(),
            dims.join(";").into(),
        ]);
    }
    let ov = overlaps(&space);
    if let Some(ov) = &ov {
        for (j, row) in ov.iter().enumerate() {
            for (jp, x) in row.iter().enumerate() {
                table.push(vec![format!("overlap[{j}][{jp}]").into(), (*x).into()]);
            }
        }
    }
    let dev = projection_probability_deviation(&space, &net).map_err(domain)?;
    table.push(vec!["projection_probability_deviation".into(), dev.into()]);
    checks.push(
        Check::new(
            "vector-space probabilities match propagation",
            dev <= settings.tolerance,
            format!("max deviation {}", label_text(dev)),
        )
        .gating(),
    );

    let (p, pp) = (&space.bases[0].property, &space.bases[1].property);
    let op_p = make_operator(&space, p).map_err(domain)?;
    let op_pp = make_operator(&space, pp).map_err(domain)?;
    let com = commutator(&op_p, &op_pp).map_err(domain)?;
    table.push(vec!["commutator_norm".into(), com.norm.into()]);
    table.push(vec!["commuting".into(), com.commuting.into()]);
    let mut contracted = serde_json::Value::Null;
    if let Some(c) = &hsec.contract {
        let op_c = make_contracted_operator(&space, &c.property, &c.groups, &c.labels).map_err(domain)?;
        let other = if &c.property == p { &op_pp } else { &op_p };
        let com_c = commutator(&op_c, other).map_err(domain)?;
        let ranks: Vec<String> = op_c.eigenspaces.iter().map(|s| s.len().to_string()).collect();
        table.push(vec!["contracted_ranks".into(), ranks.join(";").into()]);
        table.push(vec!["contracted_commutator_norm".into(), com_c.norm.into()]);
        contracted = json!({
            "property": c.property,
            "operator": operator_details(&op_c),
            "commutator_norm": com_c.norm,
            "commuting": com_c.commuting,
        });
    }
    let mut recip = serde_json::Value::Null;
    if net.layers().len() == 2 && net.layer(0).len() == net.layer(1).len() {
        match reciprocal(&net).and_then(|r| Ok((reciprocal(&r)?, r))) {
            Ok((back, rec)) => {
                let err = max_abs_diff(&flat_amplitudes(&back), &flat_amplitudes(&net));
                table.push(vec!["reciprocal_roundtrip_error".into(), err.into()]);
                checks.push(
                    Check::new(
                        "reciprocal round trip",
                        err <= settings.tolerance,
                        format!("max error {}", label_text(err)),
                    )
                    .gating(),
                );
                let pair = |c: &Complex64| [c.re, c.im];
                recip = json!({
                    "initial": rec.initial_values().iter().map(pair).collect::<Vec<_>>(),
                    "edge": rec.edge_values(0).iter().map(|r| r.iter().map(pair).collect::<Vec<_>>()).collect::<Vec<_>>(),
                    "roundtrip_error": err,
                });
            }
            Err(e) => notes.push(format!("no reciprocal context: {e}")),
        }
    }
    let details = json!({
        "context_type": space.context_type.code(),
        "dimension": space.dimension,
        "bases": space.bases.iter().map(|b| json!({
            "property": b.property,
            "labels": b.labels,
            "subspace_dimensions": b.subspace_dimensions(),
            "virtual_values": b.virtual_values,
        })).collect::<Vec<_>>(),
        "overlaps": ov,
        "projection_probability_deviation": dev,
        "operators": { p.clone(): operator_details(&op_p), pp.clone(): operator_details(&op_pp) },
        "commutator_norm": com.norm,
        "commuting": com.commuting,
        "contracted": contracted,
        "reciprocal": recip,
        "notes": notes,
    });
    Ok((table, details, checks, notes))
}

const UNIQUENESS_COLUMNS: &[&str] = &[
    "candidate",
    "m",
    "m_prime",
    "padded",
    "system_m_prime",
    "feasible",
    "solutions",
    "rejected_degenerate",
    "best_residual",
    "conditions_p",
    "conditions_p_prime",
    "dof_p",
    "dof_p_prime",
    "dof_total",
    "dof_stable",
    "required_p",
    "required_p_prime",
    "required_total",
    "multiplicative",
    "verdict",
    "reason",
];

fn uniqueness_cells(r: &UniquenessRow) -> Vec<Cell> {
    vec![
        r.candidate.clone().into(),
        r.m.into(),
        r.m_prime.into(),
        r.padded.into(),
        r.system_m_prime.into(),
        r.feasible.into(),
        r.solutions.into(),
        r.rejected_degenerate.into(),
        r.best_residual.into(),
        r.conditions_p.into(),
        r.conditions_p_prime.into(),
        r.dof_p.into(),
        r.dof_p_prime.into(),
        r.dof_total.into(),
        r.dof_stable.into(),
        r.required_p.into(),
        r.required_p_prime.into(),
        r.required_total.into(),
        r.multiplicative.into(),
        r.verdict.to_string().into(),
        r.reason.clone().into(),
    ]
}

fn cmd_uniqueness(scenario: &Scenario, settings: &Settings) -> Result<Parts, CliError> {
    let section = scenario
        .uniqueness
        .as_ref()
        .ok_or_else(|| CliError::Domain("uniqueness needs a uniqueness section".into()))?;
    let candidates = match &section.candidates {
        Some(list) => list
            .iter()
            .map(CandidateSpec::to_candidate)
            .collect::<Result<Vec<_>, _>>()?,
        None => default_candidates(),
    };
    let mut opts = SolverOptions {
        seed: settings.seed,
        ..SolverOptions::default()
    };
    if let Some(s) = settings.starts {
        opts.starts = s;
    }
    let summary = uniqueness_report(&section.shapes, &candidates, &opts).map_err(domain)?;
    let mut table = Table::new(UNIQUENESS_COLUMNS);
    for r in &summary.rows {
        table.push(uniqueness_cells(r));
    }
    let mut lines = Vec::new();
    for c in &summary.candidates {
        let failing: Vec<String> = c.failing_shapes.iter().map(|(m, mp)| format!("({m},{mp})")).collect();
        lines.push(match c.verdict {
            Verdict::Pass => format!("{}: pass on every shape", c.candidate),
            Verdict::Fail => format!("{}: fail at {}", c.candidate, failing.join(" ")),
        });
    }
    let born_included = summary.candidates.iter().any(|c| c.candidate == "|a|^2");
    let mut checks = Vec::new();
    if born_included {
        checks.push(
            Check::new(
                "regression guard",
                summary.regression_ok(),
                "|a|^2 passes every shape and no other candidate does",
            )
            .gating(),
        );
    }
    let details = serde_json::to_value(&summary).map_err(|e| CliError::Io(e.to_string()))?;
    Ok((table, details, checks, lines))
}

fn cmd_validate(scenario: &Scenario, settings: &Settings) -> Result<Parts, CliError> {
    let mut checks = Vec::new();
    let mut record = |name: &str, r: Result<String, CliError>| -> Result<(), CliError> {
        match r {
            Ok(detail) => checks.push(Check::new(name, true, detail).gating()),
            Err(CliError::Domain(msg)) => checks.push(Check::new(name, false, msg).gating()),
            Err(e) => return Err(e),
        }
        Ok(())
    };
    let model = match &scenario.statespace {
        Some(s) => {
            let built = s.build();
            let model = built.as_ref().ok().map(|m| (m.registry.clone(), m.state.len()));
            record(
                "statespace",
                built.map(|m| format!("{} exact states in the physical state", m.state.len())),
            )?;
            model
        }
        None => None,
    };
    if let Some(ev) = &scenario.evolution {
        let r = match &model {
            Some((registry, _)) => ev.build(registry).map(|_| format!("{} steps", ev.steps)),
            None => Err(CliError::Domain("evolution needs a statespace section".into())),
        };
        record("evolution", r)?;
    }
    if let Some(c) = &scenario.context {
        let r = context_network(c, settings.reachable).map(|(net, _)| format!("{} layers", net.layers().len()));
        record("context", r)?;
    }
    if let Some(h) = &scenario.hilbert {
        record(
            "hilbert",
            h.joint_table().map(|t| match t {
                Some(t) => format!("{}x{} joint volumes", t.rows(), t.cols()),
                None => "no joint volumes".into(),
            }),
        )?;
    }
    if let Some(u) = &scenario.uniqueness {
        let r = match &u.candidates {
            Some(list) => list
                .iter()
                .map(CandidateSpec::to_candidate)
                .collect::<Result<Vec<_>, _>>()
                .map(|c| format!("{} candidates, {} shapes", c.len(), u.shapes.len())),
            None => Ok(format!("default candidates, {} shapes", u.shapes.len())),
        };
        let r = r.and_then(|d| {
            if u.shapes.iter().any(|&(m, mp)| m < 2 || mp < 2) {
                Err(CliError::Domain(
                    "uniqueness shapes need at least two values per property".into(),
                ))
            } else {
                Ok(d)
            }
        });
        record("uniqueness", r)?;
    }
    if scenario.context.is_none() && scenario.statespace.is_none() && scenario.distribution.is_some() {
        let probe = Settings {
            command: settings.command,
            n: settings.n,
            seed: settings.seed,
            tolerance: settings.tolerance,
            reachable: None,
            starts: None,
        };
        record(
            "distribution",
            outcomes(scenario, &probe).map(|o| format!("{} outcomes", o.probabilities.len())),
        )?;
    }
    if checks.is_empty() {
        checks.push(Check::new("sections", false, "scenario has no computable section").gating());
    }
    let mut table = Table::new(&["check", "pass", "detail"]);
    for c in &checks {
        table.push(vec![c.name.clone().into(), c.pass.into(), c.detail.clone().into()]);
    }
    let details = json!({ "valid": checks.iter().all(|c| c.pass) });
    Ok((table, details, checks, Vec::new()))
}
