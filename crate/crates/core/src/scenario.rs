//! Scenario files: load, run, and sweep a directory of them.
//!
//! A scenario names a matrix sequence, a protocol, an initial state, a
//! horizon and a list of checks:
//!
//! ```json
//! {
//!   "name": "avg2",
//!   "sequence": {"kind": "constant", "rows": [[0.5, 0.5], [0.5, 0.5]]},
//!   "protocol": {"kind": "inequality", "slack": {"kind": "geometric", "rate": 0.5, "scale": 0.1}},
//!   "x0": {"kind": "explicit", "values": [0.0, 1.0]},
//!   "horizon": 200,
//!   "checks": [{"name": "theorem1_static"}, {"name": "upper_bound"}],
//!   "expect": "consensus"
//! }
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checks::{
    self, check_assumption1, check_assumption2, check_assumption3, check_bidirectional_along,
    check_contraction_along, check_corollary1_bound, check_corollary2, check_tech_bound_sampled,
    check_theorem2_condition, check_upper_bound, theorem1_verdict, CheckerConfig, Verdict, Witness,
};
use crate::error::{Error, Result};
use crate::matrix::{MatrixLiteral, StochasticMatrix, SubstochasticMatrix};
use crate::projection::{constrained_consensus_report, run_constrained, ConstrainedReport, ConvexSet, SetSpec, Variant};
use crate::protocols::{
    classify_convergence, run_altafini, run_equality, run_friedkin_johnsen, run_inequality, sorted_view,
    substochastic_stability, ClassifyOptions, ConvergenceReport, SlackPolicy, Trajectory,
};
use crate::sequence::{MatrixSequence, SequenceKind, SequenceSpec, SignedSequence, SignedSequenceSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Not used by the signed protocol, which carries its own sequence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceSpec>,
    pub protocol: ProtocolSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<InitialSpec>,
    pub horizon: usize,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub tolerances: ClassifyOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProtocolSpec {
    Equality,
    Inequality {
        #[serde(default)]
        slack: SlackPolicy,
    },
    Altafini {
        signed: SignedSequenceSpec,
    },
    FriedkinJohnsen {
        lambda: Vec<f64>,
        u: Vec<f64>,
    },
    Constrained {
        variant: Variant,
        sets: Vec<SetSpec>,
    },
    /// Bounded non-convergent solution for a constant sequence; uses the
    /// arc `i -> j` when given, otherwise any arc or periodic class that works.
    Counterexample {
        #[serde(default)]
        i: Option<usize>,
        #[serde(default)]
        j: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Explicit {
        values: Vec<f64>,
    },
    /// One point per agent, for the projected protocols.
    Points {
        values: Vec<Vec<f64>>,
    },
    /// Uniform on `[lo, hi)` per coordinate.
    Random {
        lo: f64,
        hi: f64,
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Theorem1Static,
    Theorem2Condition,
    Assumption1,
    Assumption2,
    Assumption3,
    Corollary1,
    Corollary2,
    LemmaContraction,
    BidirectionalContraction,
    TechBound,
    UpperBound,
    SubstochasticStability,
    FjLimit,
    ConstrainedConsensus,
}

impl CheckName {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckName::Theorem1Static => "theorem1_static",
            CheckName::Theorem2Condition => "theorem2_condition",
            CheckName::Assumption1 => "assumption1",
            CheckName::Assumption2 => "assumption2",
            CheckName::Assumption3 => "assumption3",
            CheckName::Corollary1 => "corollary1",
            CheckName::Corollary2 => "corollary2",
            CheckName::LemmaContraction => "lemma_contraction",
            CheckName::BidirectionalContraction => "bidirectional_contraction",
            CheckName::TechBound => "tech_bound",
            CheckName::UpperBound => "upper_bound",
            CheckName::SubstochasticStability => "substochastic_stability",
            CheckName::FjLimit => "fj_limit",
            CheckName::ConstrainedConsensus => "constrained_consensus",
        }
    }
}

/// A requested check; unset fields fall back to [`CheckerConfig::for_n`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub name: CheckName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_b: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_cap_m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_floor: Option<f64>,
    /// Corollary 2: reference matrix; defaults to the primary matrix of an
    /// interleaved sequence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<MatrixLiteral>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_occurrences: Option<usize>,
    /// Sampled checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Tolerance for the limit-matching checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

/// Either an expected classification name, or that plus expected check
/// outcomes (checks not listed are expected to hold).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expectation {
    Classification(String),
    Detailed {
        #[serde(default)]
        classification: Option<String>,
        #[serde(default)]
        checks: BTreeMap<String, bool>,
    },
}

impl Expectation {
    fn classification(&self) -> Option<&str> {
        match self {
            Expectation::Classification(c) => Some(c),
            Expectation::Detailed { classification, .. } => classification.as_deref(),
        }
    }

    fn check(&self, name: &str) -> bool {
        match self {
            Expectation::Classification(_) => true,
            Expectation::Detailed { checks, .. } => checks.get(name).copied().unwrap_or(true),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Protocol {
    Equality,
    Inequality(SlackPolicy),
    Altafini(SignedSequence),
    FriedkinJohnsen { lambda: Vec<f64>, u: Vec<f64> },
    Constrained { variant: Variant, sets: Vec<ConvexSet> },
    Counterexample { arc: Option<(usize, usize)> },
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    pub d: usize,
    /// For the signed protocol, the modulus sequence.
    pub sequence: MatrixSequence,
    pub protocol: Protocol,
    /// `n * d` initial values, agent-major.
    pub x0: Vec<f64>,
    pub horizon: usize,
    pub checks: Vec<CheckSpec>,
    pub classify: ClassifyOptions,
    pub expect: Option<Expectation>,
    pub spec: ScenarioSpec,
}

fn schema(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::SchemaError {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Parses scenario JSON; syntax errors carry the line, type errors the field
/// path.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let spec: ScenarioSpec = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        if inner.is_syntax() || inner.is_eof() {
            Error::ParseError {
                line: inner.line(),
                reason: inner.to_string(),
            }
        } else {
            let path = e.path().to_string();
            schema(if path == "." { String::new() } else { path }, inner.to_string())
        }
    })?;
    Scenario::from_spec(spec)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    parse_scenario(&fs::read_to_string(path)?)
}

impl Scenario {
    pub fn from_spec(spec: ScenarioSpec) -> Result<Self> {
        let (sequence, protocol) = match &spec.protocol {
            ProtocolSpec::Altafini { signed } => {
                if spec.sequence.is_some() {
                    return Err(schema("sequence", "the signed protocol takes its sequence from protocol.signed"));
                }
                let signed = SignedSequence::from_spec(signed, "protocol.signed")?;
                (signed.modulus_sequence(), Protocol::Altafini(signed))
            }
            other => {
                let seq_spec = spec.sequence.as_ref().ok_or_else(|| schema("sequence", "missing"))?;
                let seq = MatrixSequence::from_spec(seq_spec, "sequence")?;
                let protocol = match other {
                    ProtocolSpec::Equality => Protocol::Equality,
                    ProtocolSpec::Inequality { slack } => {
                        slack.validate().map_err(|e| schema("protocol.slack", e.to_string()))?;
                        Protocol::Inequality(slack.clone())
                    }
                    ProtocolSpec::FriedkinJohnsen { lambda, u } => {
                        require_constant(&seq)?;
                        for (field, v) in [("protocol.lambda", lambda), ("protocol.u", u)] {
                            if v.len() != seq.n() {
                                return Err(schema(field, format!("expected {} entries, found {}", seq.n(), v.len())));
                            }
                        }
                        Protocol::FriedkinJohnsen {
                            lambda: lambda.clone(),
                            u: u.clone(),
                        }
                    }
                    ProtocolSpec::Constrained { variant, sets } => {
                        if sets.len() != seq.n() {
                            return Err(schema(
                                "protocol.sets",
                                format!("expected {} sets, found {}", seq.n(), sets.len()),
                            ));
                        }
                        let sets = sets
                            .iter()
                            .enumerate()
                            .map(|(i, s)| {
                                ConvexSet::from_spec(s.clone()).map_err(|e| schema(format!("protocol.sets[{i}]"), e.to_string()))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        let d = sets[0].dim();
                        if let Some(i) = sets.iter().position(|s| s.dim() != d) {
                            return Err(schema(format!("protocol.sets[{i}]"), "dimension differs from sets[0]"));
                        }
                        Protocol::Constrained {
                            variant: *variant,
                            sets,
                        }
                    }
                    ProtocolSpec::Counterexample { i, j } => {
                        require_constant(&seq)?;
                        let arc = match (i, j) {
                            (Some(i), Some(j)) => Some((*i, *j)),
                            (None, None) => None,
                            _ => return Err(schema("protocol", "give both i and j or neither")),
                        };
                        Protocol::Counterexample { arc }
                    }
                    ProtocolSpec::Altafini { .. } => unreachable!(),
                };
                (seq, protocol)
            }
        };
        let n = sequence.n();
        if let Some(declared) = spec.n {
            if declared != n {
                return Err(schema("n", format!("sequence has {n} agents")));
            }
        }
        let d = match &protocol {
            Protocol::Constrained { sets, .. } => sets[0].dim(),
            _ => 1,
        };
        if let Some(declared) = spec.d {
            if declared != d {
                return Err(schema("d", format!("protocol works in dimension {d}")));
            }
        }
        let x0 = initial_state(&spec, &protocol, n, d)?;
        for (i, c) in spec.checks.iter().enumerate() {
            if c.name == CheckName::TechBound && c.seed.is_none() {
                return Err(Error::SeedMissing {
                    field: format!("checks[{i}].seed"),
                });
            }
        }
        Ok(Scenario {
            name: spec.name.clone(),
            n,
            d,
            sequence,
            protocol,
            x0,
            horizon: spec.horizon,
            checks: spec.checks.clone(),
            classify: spec.tolerances,
            expect: spec.expect.clone(),
            spec,
        })
    }
}

fn require_constant(seq: &MatrixSequence) -> Result<()> {
    match seq.kind() {
        SequenceKind::Constant(_) => Ok(()),
        _ => Err(schema("sequence", "this protocol needs a constant sequence")),
    }
}

fn initial_state(spec: &ScenarioSpec, protocol: &Protocol, n: usize, d: usize) -> Result<Vec<f64>> {
    let needed = n * d;
    let Some(init) = &spec.x0 else {
        return match protocol {
            Protocol::FriedkinJohnsen { u, .. } => Ok(u.clone()),
            Protocol::Counterexample { .. } => Ok(Vec::new()),
            _ => Err(schema("x0", "missing")),
        };
    };
    let values = match init {
        InitialSpec::Explicit { values } => values.clone(),
        InitialSpec::Points { values } => {
            if let Some(i) = values.iter().position(|p| p.len() != d) {
                return Err(schema(format!("x0.values[{i}]"), format!("expected {d} coordinates")));
            }
            values.concat()
        }
        InitialSpec::Random { lo, hi, seed } => {
            let seed = seed.ok_or_else(|| Error::SeedMissing {
                field: "x0.seed".into(),
            })?;
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(schema("x0", "need finite lo < hi"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..needed).map(|_| rng.gen_range(*lo..*hi)).collect()
        }
    };
    if values.len() != needed {
        return Err(schema("x0.values", format!("expected {needed} values, found {}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(schema("x0.values", "non-finite value"));
    }
    Ok(values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FjSummary {
    pub stable: bool,
    pub rho: f64,
    pub limit: Option<Vec<f64>>,
    pub limit_gap: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub name: String,
    pub classification: String,
    pub convergence: Option<ConvergenceReport>,
    pub constrained: Option<ConstrainedReport>,
    pub friedkin_johnsen: Option<FjSummary>,
    pub verdicts: Vec<Verdict>,
    pub artifacts: Vec<String>,
    /// Every check matched its expected outcome and the classification
    /// matched the declared expectation.
    pub success: bool,
    pub wall_time_ms: f64,
    pub config: ScenarioSpec,
}

impl RunReport {
    pub fn checks_passed(&self) -> usize {
        self.verdicts.iter().filter(|v| v.holds).count()
    }

    pub fn checks_failed(&self) -> usize {
        self.verdicts.len() - self.checks_passed()
    }
}

struct Outcome {
    /// Scalar trajectory written as `trajectory.csv`.
    traj: Option<Trajectory>,
    /// Solution of the scalar inequality, for the trajectory-based checks.
    solution: Option<Trajectory>,
    fj: Option<crate::protocols::FjRun>,
    constrained: Option<(crate::projection::ConstrainedRun, ConstrainedReport)>,
}

fn execute(s: &Scenario) -> Result<Outcome> {
    let k = s.horizon;
    let scalar = |t: Trajectory| Outcome {
        traj: Some(t.clone()),
        solution: Some(t),
        fj: None,
        constrained: None,
    };
    Ok(match &s.protocol {
        Protocol::Equality => scalar(run_equality(&s.sequence, &s.x0, k)?),
        Protocol::Inequality(slack) => scalar(run_inequality(&s.sequence, &s.x0, slack, k)?),
        Protocol::Counterexample { arc } => {
            let w = s.sequence.at(0).into_owned();
            let t = match arc {
                Some((i, j)) => checks::construct_thm1_counterexample(&w, *i, *j, k)?,
                None => checks::find_counterexample(&w, k)?
                    .ok_or_else(|| Error::PreconditionViolated("the matrix is dichotomic".into()))?,
            };
            scalar(t)
        }
        Protocol::Altafini(signed) => {
            let run = run_altafini(signed, &s.x0, k)?;
            Outcome {
                traj: Some(run.opinions),
                solution: Some(run.modulus),
                fj: None,
                constrained: None,
            }
        }
        Protocol::FriedkinJohnsen { lambda, u } => {
            let run = run_friedkin_johnsen(&s.sequence.at(0), lambda, u, k)?;
            Outcome {
                traj: Some(run.trajectory.clone()),
                solution: None,
                fj: Some(run),
                constrained: None,
            }
        }
        Protocol::Constrained { variant, sets } => {
            let xi0: Vec<Vec<f64>> = s.x0.chunks(s.d).map(<[f64]>::to_vec).collect();
            let run = run_constrained(*variant, &s.sequence, sets, &xi0, k)?;
            let report = constrained_consensus_report(&run, sets, s.classify.tol, s.classify.tail_window)?;
            Outcome {
                traj: None,
                solution: None,
                fj: None,
                constrained: Some((run, report)),
            }
        }
    })
}

fn checker_config(s: &Scenario, c: &CheckSpec) -> CheckerConfig {
    let base = CheckerConfig::for_n(s.n);
    let horizon_k = c.horizon_k.unwrap_or(base.horizon_k.min(s.horizon.saturating_sub(1)).max(1));
    CheckerConfig {
        eps: c.eps.unwrap_or(base.eps),
        delta: c.delta.unwrap_or(base.delta),
        window_b: c.window_b.unwrap_or(base.window_b),
        horizon_k,
        search_cap_m: c.search_cap_m.unwrap_or(base.search_cap_m.max(horizon_k + 1)),
        mass_floor: c.mass_floor.unwrap_or(base.mass_floor),
    }
}

fn needs_solution<'a>(out: &'a Outcome, name: CheckName) -> Result<&'a Trajectory> {
    out.solution.as_ref().ok_or_else(|| {
        Error::PreconditionViolated(format!("{} needs a solution of the scalar inequality", name.as_str()))
    })
}

fn flag_verdict(name: CheckName, holds: bool, horizon: usize, witnesses: Vec<Witness>, note: &str) -> Verdict {
    Verdict {
        check: name.as_str().to_string(),
        holds,
        horizon,
        witnesses,
        truncation_note: note.to_string(),
    }
}

fn run_check(s: &Scenario, c: &CheckSpec, out: &Outcome) -> Result<Verdict> {
    let cfg = checker_config(s, c);
    let seq = &s.sequence;
    match c.name {
        CheckName::Theorem1Static => {
            require_constant(seq).map_err(|_| Error::PreconditionViolated("theorem1_static needs a constant sequence".into()))?;
            Ok(theorem1_verdict(&seq.at(0)))
        }
        CheckName::Theorem2Condition => check_theorem2_condition(seq, &cfg),
        CheckName::Assumption1 => check_assumption1(seq, cfg.delta, cfg.horizon_k),
        CheckName::Assumption2 => check_assumption2(seq, cfg.window_b, cfg.horizon_k),
        CheckName::Assumption3 => check_assumption3(seq, cfg.horizon_k, cfg.mass_floor),
        CheckName::Corollary1 => check_corollary1_bound(seq, cfg.delta, cfg.window_b, cfg.horizon_k),
        CheckName::Corollary2 => {
            let w0 = match (&c.w0, seq.kind()) {
                (Some(lit), _) => StochasticMatrix::from_literal(lit)?,
                (None, SequenceKind::Interleaved { primary, .. }) => primary.clone(),
                (None, _) => return Err(Error::PreconditionViolated("corollary2 needs w0".into())),
            };
            check_corollary2(seq, &w0, &cfg, c.min_occurrences.unwrap_or(1))
        }
        CheckName::LemmaContraction => check_contraction_along(needs_solution(out, c.name)?, seq, &cfg),
        CheckName::BidirectionalContraction => check_bidirectional_along(needs_solution(out, c.name)?, seq, &cfg),
        CheckName::TechBound => {
            let seed = c.seed.ok_or_else(|| Error::SeedMissing { field: "seed".into() })?;
            check_tech_bound_sampled(needs_solution(out, c.name)?, seq, c.samples.unwrap_or(1000), seed)
        }
        CheckName::UpperBound => Ok(check_upper_bound(needs_solution(out, c.name)?)),
        CheckName::SubstochasticStability => {
            let Protocol::FriedkinJohnsen { lambda, .. } = &s.protocol else {
                return Err(Error::PreconditionViolated("substochastic_stability needs friedkin_johnsen".into()));
            };
            let w = seq.at(0);
            let a = SubstochasticMatrix::from_dense(nalgebra::DMatrix::from_fn(s.n, s.n, |i, j| lambda[i] * w.get(i, j)))?;
            let r = substochastic_stability(&a)?;
            Ok(flag_verdict(
                c.name,
                r.stable,
                0,
                vec![
                    Witness::Value {
                        label: "rho".into(),
                        value: r.rho,
                    },
                    Witness::Count {
                        label: "deficiency_rows".into(),
                        value: r.deficiency_rows.len(),
                    },
                ],
                "structural check, no truncation",
            ))
        }
        CheckName::FjLimit => {
            let fj = out
                .fj
                .as_ref()
                .ok_or_else(|| Error::PreconditionViolated("fj_limit needs friedkin_johnsen".into()))?;
            let tol = c.tol.unwrap_or(s.classify.tol);
            let gap = fj.limit_gap.unwrap_or(f64::INFINITY);
            Ok(flag_verdict(
                c.name,
                gap <= tol,
                s.horizon,
                vec![Witness::Value {
                    label: "limit_gap".into(),
                    value: gap,
                }],
                "gap measured at the final step",
            ))
        }
        CheckName::ConstrainedConsensus => {
            let (_, r) = out
                .constrained
                .as_ref()
                .ok_or_else(|| Error::PreconditionViolated("constrained_consensus needs the constrained protocol".into()))?;
            let value = |label: &str, value: f64| Witness::Value {
                label: label.into(),
                value,
            };
            Ok(flag_verdict(
                c.name,
                r.holds,
                s.horizon,
                vec![
                    value("spread", r.spread),
                    value("tail_max_error", r.tail_max_error),
                    value("tail_max_dist", r.tail_max_dist),
                    value("max_limit_distance", r.limit_distances.iter().copied().fold(0.0, f64::max)),
                ],
                "tail maxima over the last tail_window steps",
            ))
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Runs the protocol and the requested checks and writes
/// `trajectory.csv`, `sorted.csv` (scalar protocols), `constrained.csv`
/// (projected protocols), `verdicts.json` and `report.json` into `out_dir`.
/// Every file except `report.json` is a deterministic function of the
/// scenario.
pub fn run_scenario(s: &Scenario, out_dir: &Path) -> Result<RunReport> {
    let start = Instant::now();
    log::info!("running scenario {}", s.name);
    fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())).at_stage("write"))?;
    let out = execute(s).map_err(|e| e.at_stage("protocol"))?;

    let convergence = match &out.traj {
        Some(t) => Some(classify_convergence(t, &s.classify).map_err(|e| e.at_stage("classify"))?),
        None => None,
    };
    let classification = match (&convergence, &out.constrained) {
        (Some(r), _) => r.classification.name().to_string(),
        (None, Some((_, r))) if r.consensus => "consensus".to_string(),
        _ => "undecided".to_string(),
    };

    let mut verdicts = Vec::with_capacity(s.checks.len());
    for c in &s.checks {
        log::debug!("check {}", c.name.as_str());
        let v = run_check(s, c, &out).map_err(|e| e.at_stage(&format!("check {}", c.name.as_str())))?;
        verdicts.push(v);
    }

    let mut artifacts = Vec::new();
    let mut emit = |file: &str, contents: String| -> Result<()> {
        let path = out_dir.join(file);
        write(&path, &contents).map_err(|e| e.at_stage("write"))?;
        artifacts.push(path.display().to_string());
        Ok(())
    };
    if let Some(t) = &out.traj {
        emit("trajectory.csv", t.to_csv())?;
        emit("sorted.csv", sorted_view(t).to_csv())?;
    }
    if let Protocol::Altafini(_) = s.protocol {
        if let Some(m) = &out.solution {
            emit("modulus.csv", m.to_csv())?;
        }
    }
    if let Some((run, _)) = &out.constrained {
        emit("constrained.csv", run.to_csv())?;
    }
    emit(
        "verdicts.json",
        serde_json::to_string_pretty(&verdicts).expect("verdicts serialize") + "\n",
    )?;

    let expectation_met = match &s.expect {
        None => verdicts.iter().all(|v| v.holds),
        Some(e) => {
            verdicts.iter().all(|v| v.holds == e.check(&v.check))
                && e.classification().map_or(true, |c| c == classification)
        }
    };
    let report = RunReport {
        name: s.name.clone(),
        classification,
        convergence,
        constrained: out.constrained.map(|(_, r)| r),
        friedkin_johnsen: out.fj.map(|r| FjSummary {
            stable: r.stability.stable,
            rho: r.stability.rho,
            limit: r.limit,
            limit_gap: r.limit_gap,
            warnings: r.warnings,
        }),
        verdicts,
        artifacts,
        success: expectation_met,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        config: s.spec.clone(),
    };
    let path = out_dir.join("report.json");
    write(&path, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))
        .map_err(|e| e.at_stage("write"))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub name: String,
    pub classification: String,
    pub checks_passed: usize,
    pub checks_failed: usize,
    pub success: bool,
    pub runtime_ms: f64,
    pub error: String,
}

pub const SUMMARY_HEADER: &str = "name,classification,checks_passed,checks_failed,success,runtime_ms,error";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl SummaryRow {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.3},{}",
            csv_field(&self.name),
            csv_field(&self.classification),
            self.checks_passed,
            self.checks_failed,
            self.success,
            self.runtime_ms,
            csv_field(&self.error)
        )
    }
}

fn sweep_one(path: &Path, out_dir: &Path) -> SummaryRow {
    let start = Instant::now();
    let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let result = load_scenario(path).and_then(|s| run_scenario(&s, &out_dir.join(&stem)));
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    match result {
        Ok(r) => SummaryRow {
            name: r.name.clone(),
            classification: r.classification.clone(),
            checks_passed: r.checks_passed(),
            checks_failed: r.checks_failed(),
            success: r.success,
            runtime_ms,
            error: String::new(),
        },
        Err(e) => {
            log::error!("{}: {e}", path.display());
            SummaryRow {
                name: stem,
                classification: "error".into(),
                checks_passed: 0,
                checks_failed: 0,
                success: false,
                runtime_ms,
                error: e.to_string(),
            }
        }
    }
}

/// Runs every `*.json` scenario in `dir` on `jobs` threads and writes
/// `summary.csv` into `out_dir`, one row per file sorted by name. Failing
/// scenarios become error rows.
pub fn sweep(dir: &Path, out_dir: &Path, jobs: usize) -> Result<Vec<SummaryRow>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rows: Vec<SummaryRow> = pool.install(|| files.par_iter().map(|p| sweep_one(p, out_dir)).collect());
    rows.sort_by(|a, b| a.name.cmp(&b.name));
    let mut csv = String::from(SUMMARY_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.to_csv());
        csv.push('\n');
    }
    write(&out_dir.join("summary.csv"), &csv)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "minimal",
        "sequence": {"kind": "constant", "rows": [[0.5, 0.5], [0.5, 0.5]]},
        "protocol": {"kind": "equality"},
        "x0": {"kind": "explicit", "values": [0.0, 1.0]},
        "horizon": 100
    }"#;

    #[test]
    fn minimal_file_loads() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.n, 2);
        assert_eq!(s.x0, vec![0.0, 1.0]);
        assert!(matches!(s.protocol, Protocol::Equality));
    }

    #[test]
    fn row_sum_violation_names_the_row() {
        let text = MINIMAL.replace("[[0.5, 0.5], [0.5, 0.5]]", "[[0.5, 0.5], [0.5, 0.6]]");
        match parse_scenario(&text) {
            Err(Error::SchemaError { field, .. }) => assert_eq!(field, "sequence.rows[1]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn random_x0_needs_seed() {
        let text = MINIMAL.replace(
            r#"{"kind": "explicit", "values": [0.0, 1.0]}"#,
            r#"{"kind": "random", "lo": 0, "hi": 1}"#,
        );
        assert_eq!(
            parse_scenario(&text).unwrap_err(),
            Error::SeedMissing {
                field: "x0.seed".into()
            }
        );
    }

    #[test]
    fn syntax_error_has_line() {
        let text = "{\n  \"name\": \"x\",\n  oops\n}";
        assert!(matches!(parse_scenario(text), Err(Error::ParseError { line: 3, .. })));
    }

    #[test]
    fn type_error_has_path() {
        let text = MINIMAL.replace("\"horizon\": 100", "\"horizon\": \"long\"");
        match parse_scenario(&text) {
            Err(Error::SchemaError { field, .. }) => assert_eq!(field, "horizon"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stage_is_reported() {
        let text = MINIMAL.replace("\"horizon\": 100", "\"horizon\": 10");
        let s = parse_scenario(&text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        match run_scenario(&s, dir.path()) {
            Err(Error::Stage { stage, source }) => {
                assert_eq!(stage, "classify");
                assert!(matches!(*source, Error::HorizonTooShort { .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn expectation_forms() {
        let e: Expectation = serde_json::from_str(r#""consensus""#).unwrap();
        assert_eq!(e.classification(), Some("consensus"));
        let e: Expectation =
            serde_json::from_str(r#"{"classification": "non_convergent_bounded", "checks": {"theorem1_static": false}}"#)
                .unwrap();
        assert!(!e.check("theorem1_static"));
        assert!(e.check("upper_bound"));
    }
}
