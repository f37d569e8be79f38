//! Model files, JSON reports and the `seldoor` subcommands.
//!
//! Exit codes: 0 when the analysis succeeds (or the criterion holds), 1 for
//! an analytic negative (criterion violated, precondition not met,
//! verification failed) and 2 for unusable input.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adjust::{bias_decomposition, identify_with, AdjustmentQuery, AnalysisError};
use crate::graph::{
    backdoor_criterion, project_nonlinear, selective_door_criterion, single_door_precondition,
    Admg, CriterionMode, GraphError, NonlinearVertex, Verdict, VertexId, VertexSet, Witness,
};
use crate::montecarlo::{
    nonlinear_demo, sample_data, verify_necessity, ErrorDistribution, NonlinearFn,
    NonlinearModelSpec, SimulationError, VerifyConfig,
};
use crate::sem::{ModelError, SemModel};

pub const TOOL: &str = "seldoor";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Analysis(AnalysisError::PreconditionNotMet { .. }) => 1,
            _ => 2,
        }
    }
}

// ---------------------------------------------------------------------------
// Model files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coef: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidirectedSpec {
    pub a: String,
    pub b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearSpec {
    pub name: String,
    pub function: String,
    pub args: Vec<String>,
}

/// On-disk model description. The order of `variables` is the causal
/// ordering; directed edges must point forward in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub variables: Vec<String>,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
    #[serde(default)]
    pub bidirected: Vec<BidirectedSpec>,
    #[serde(default)]
    pub error_var: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intercepts: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nonlinear: Vec<NonlinearSpec>,
    /// Pairs whose errors are known to be independent; consulted when
    /// nonlinear terms are projected onto bidirected edges.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub independent: Vec<[String; 2]>,
}

impl ModelFile {
    pub fn parse(text: &[u8]) -> Result<Self, CliError> {
        serde_json::from_slice(text).map_err(|e| CliError::Input(format!("model file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model files serialise")
    }

    fn index(&self, name: &str) -> Result<usize, CliError> {
        self.variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| GraphError::UnknownVertex(name.to_string()).into())
    }

    /// The causal path diagram as written, ignoring any nonlinear terms.
    pub fn base_graph(&self) -> Result<Admg, CliError> {
        let dir = self
            .edges
            .iter()
            .map(|e| Ok((self.index(&e.from)?, self.index(&e.to)?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        let bi = self
            .bidirected
            .iter()
            .map(|e| Ok((self.index(&e.a)?, self.index(&e.b)?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(Admg::new(self.variables.clone(), &dir, &bi)?)
    }

    /// The diagram used for graphical criteria: nonlinear vertices are
    /// projected onto bidirected edges.
    pub fn graph(&self) -> Result<Admg, CliError> {
        let base = self.base_graph()?;
        if self.nonlinear.is_empty() {
            return Ok(base);
        }
        let mut specs = Vec::new();
        for h in &self.nonlinear {
            h.function.parse::<NonlinearFn>().map_err(CliError::Input)?;
            let args = h
                .args
                .iter()
                .map(|a| Ok(VertexId(self.index(a)?)))
                .collect::<Result<_, CliError>>()?;
            specs.push(NonlinearVertex {
                vertex: VertexId(self.index(&h.name)?),
                args,
            });
        }
        let indep = self
            .independent
            .iter()
            .map(|[a, b]| Ok((VertexId(self.index(a)?), VertexId(self.index(b)?))))
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(project_nonlinear(&base, &specs, &indep)?)
    }

    /// A fully parameterised linear SEM.
    pub fn to_model(&self) -> Result<SemModel, CliError> {
        if !self.nonlinear.is_empty() {
            return Err(CliError::Input(
                "model has nonlinear terms; only `check` accepts such models".into(),
            ));
        }
        let g = self.base_graph()?;
        let mut coefs = Vec::new();
        for e in &self.edges {
            let c = e.coef.ok_or_else(|| {
                CliError::Input(format!("edge {} -> {} has no coef", e.from, e.to))
            })?;
            coefs.push((
                VertexId(self.index(&e.from)?),
                VertexId(self.index(&e.to)?),
                c,
            ));
        }
        let mut covs = Vec::new();
        for e in &self.bidirected {
            let c = e.cov.ok_or_else(|| {
                CliError::Input(format!("bidirected edge {} <-> {} has no cov", e.a, e.b))
            })?;
            covs.push((VertexId(self.index(&e.a)?), VertexId(self.index(&e.b)?), c));
        }
        let lookup = |map: &BTreeMap<String, f64>, what: &str| -> Result<(), CliError> {
            match map.keys().find(|k| !self.variables.contains(k)) {
                Some(k) => Err(CliError::Input(format!(
                    "{what} names unknown variable {k}"
                ))),
                None => Ok(()),
            }
        };
        lookup(&self.error_var, "error_var")?;
        let variances = self
            .variables
            .iter()
            .map(|v| {
                self.error_var
                    .get(v)
                    .copied()
                    .ok_or_else(|| CliError::Input(format!("error_var is missing {v}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let intercepts = match &self.intercepts {
            Some(map) => {
                lookup(map, "intercepts")?;
                Some(
                    self.variables
                        .iter()
                        .map(|v| map.get(v).copied().unwrap_or(0.0))
                        .collect(),
                )
            }
            None => None,
        };
        Ok(SemModel::from_parameters(
            g, &coefs, &variances, &covs, intercepts,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinearSpecFile {
    pub a_xz: f64,
    pub a_mx: f64,
    pub a_mz: f64,
    pub a_yx: f64,
    pub a_ym: f64,
    pub a_yh: f64,
    pub a_yz: f64,
    pub function: String,
    pub errors: String,
}

impl Default for NonlinearSpecFile {
    fn default() -> Self {
        let s = NonlinearModelSpec::default();
        NonlinearSpecFile {
            a_xz: s.a_xz,
            a_mx: s.a_mx,
            a_mz: s.a_mz,
            a_yx: s.a_yx,
            a_ym: s.a_ym,
            a_yh: s.a_yh,
            a_yz: s.a_yz,
            function: s.h.name().into(),
            errors: s.errors.name().into(),
        }
    }
}

impl NonlinearSpecFile {
    fn to_spec(&self) -> Result<NonlinearModelSpec, CliError> {
        Ok(NonlinearModelSpec {
            a_xz: self.a_xz,
            a_mx: self.a_mx,
            a_mz: self.a_mz,
            a_yx: self.a_yx,
            a_ym: self.a_ym,
            a_yh: self.a_yh,
            a_yz: self.a_yz,
            h: self.function.parse().map_err(CliError::Input)?,
            errors: self.errors.parse()?,
        })
    }
}

// ---------------------------------------------------------------------------
// Command line

#[derive(Debug, Parser)]
#[command(
    name = "seldoor",
    version,
    about = "Selective-door adjustment for linear SEMs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Selective,
    Backdoor,
    Singledoor,
}

#[derive(Debug, clap::Args)]
pub struct QueryArgs {
    /// Model file (JSON).
    pub model: PathBuf,
    #[arg(long)]
    pub outcome: String,
    #[arg(long)]
    pub treatment: String,
    /// Covariates to adjust for; comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    pub adjust: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a graphical criterion for a query.
    Check {
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long, value_enum, default_value = "selective")]
        criterion: CriterionArg,
        /// Use the conditioning set without the treatment when checking
        /// back-door paths out of conditioned descendants.
        #[arg(long)]
        strict_defn: bool,
    },
    /// Regression coefficient, controlled total effect and their gap.
    Effect {
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long)]
        strict_defn: bool,
    },
    /// Decompose the gap into contributions of individual regressors.
    Bias {
        #[command(flatten)]
        query: QueryArgs,
    },
    /// Compare the graph verdict with random parameterisations.
    Verify {
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long)]
        strict_defn: bool,
    },
    /// Draw samples from a model and write them as CSV.
    Simulate {
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// gaussian, uniform or exponential.
        #[arg(long, default_value = "gaussian")]
        dist: String,
        /// Output file; CSV goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the interaction model and decompose the effect of X on Y.
    NonlinearDemo {
        /// Parameter file (JSON); built-in defaults when omitted.
        spec: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,1.5,2,2.5,3")]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Serialize)]
struct Header<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    input_digest: Option<String>,
}

impl<'a> Header<'a> {
    fn new(command: &'a str, input: Option<&[u8]>) -> Self {
        Header {
            tool: TOOL,
            version: VERSION,
            command,
            input_digest: input.map(digest),
        }
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
struct QueryOut {
    outcome: String,
    treatment: String,
    adjust: Vec<String>,
}

#[derive(Debug, Serialize)]
struct WitnessOut {
    kind: &'static str,
    vertex: Option<String>,
    directed_path: Option<String>,
    path: Option<String>,
    description: String,
}

impl WitnessOut {
    fn new(g: &Admg, w: &Witness) -> Self {
        let (kind, vertex, directed_path) = match w {
            Witness::DescendantInSet { vertex, .. } => ("descendant_in_set", Some(*vertex), None),
            Witness::UnblockedBackdoor { .. } => ("unblocked_backdoor", None, None),
            Witness::PostTreatment {
                vertex, directed, ..
            } => (
                "post_treatment",
                Some(*vertex),
                Some(directed.display(g).to_string()),
            ),
            Witness::OpenPath { .. } => ("open_path", None, None),
        };
        WitnessOut {
            kind,
            vertex: vertex.map(|v| g.name(v).to_string()),
            directed_path,
            path: w.path().map(|p| p.display(g).to_string()),
            description: w.describe(g),
        }
    }
}

#[derive(Debug, Serialize)]
struct VerdictOut {
    satisfied: bool,
    witness: Option<WitnessOut>,
}

impl VerdictOut {
    fn new(g: &Admg, v: &Verdict) -> Self {
        VerdictOut {
            satisfied: v.satisfied,
            witness: v.witness.as_ref().map(|w| WitnessOut::new(g, w)),
        }
    }
}

#[derive(Debug, Serialize)]
struct CheckReport<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    query: QueryOut,
    criterion: &'static str,
    definition: &'static str,
    verdict: VerdictOut,
}

#[derive(Debug, Serialize)]
struct NaiveBias {
    value: f64,
    note: &'static str,
}

#[derive(Debug, Serialize)]
struct EffectOut<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    query: QueryOut,
    definition: &'static str,
    criterion: VerdictOut,
    beta: f64,
    tau: f64,
    gamma: f64,
    total_effect: f64,
    s1: Vec<String>,
    s2: Vec<String>,
    bias_rhs: Option<f64>,
    naive_bias: NaiveBias,
}

#[derive(Debug, Serialize)]
struct LedgerRow {
    vertex: String,
    gamma_ip: f64,
    tau_pj: f64,
    contribution: f64,
}

#[derive(Debug, Serialize)]
struct BiasOut<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    query: QueryOut,
    precondition_met: bool,
    witness: Option<WitnessOut>,
    s1: Vec<String>,
    s2: Vec<String>,
    gamma: Option<f64>,
    gamma_rhs: Option<f64>,
    identity_holds: Option<bool>,
    ledger: Vec<LedgerRow>,
}

#[derive(Debug, Serialize)]
struct DisagreementOut {
    trial: usize,
    seed: u64,
    gamma: f64,
}

#[derive(Debug, Serialize)]
struct VerifyOut<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    query: QueryOut,
    definition: &'static str,
    seed: u64,
    tol_eq: f64,
    allowed_fraction: f64,
    trials: usize,
    criterion_verdict: bool,
    agree_count: usize,
    passed: bool,
    disagreements: Vec<DisagreementOut>,
}

#[derive(Debug, Serialize)]
struct SimulateOut<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    rows: usize,
    columns: Vec<String>,
    seed: u64,
    distribution: &'static str,
    output: String,
}

#[derive(Debug, Serialize)]
struct GridOut {
    x: f64,
    expected_h: f64,
    delta_hat: f64,
    delta_se: f64,
    total_slope: f64,
}

#[derive(Debug, Serialize)]
struct NonlinearOut<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    parameters: NonlinearSpecFile,
    n: usize,
    seed: u64,
    a_mx_hat: f64,
    tau_hat: f64,
    a_yh_hat: f64,
    grid: Vec<GridOut>,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialise");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// Dispatch

struct Loaded {
    bytes: Vec<u8>,
    file: ModelFile,
}

fn load(path: &FsPath) -> Result<Loaded, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let file = ModelFile::parse(&bytes)?;
    Ok(Loaded { bytes, file })
}

fn resolve_query(g: &Admg, q: &QueryArgs) -> Result<(AdjustmentQuery, QueryOut), CliError> {
    let outcome = g.vertex(&q.outcome)?;
    let treatment = g.vertex(&q.treatment)?;
    let mut adjust = VertexSet::empty();
    for name in q.adjust.iter().filter(|s| !s.is_empty()) {
        adjust.insert(g.vertex(name)?);
    }
    let query = AdjustmentQuery::new(outcome, treatment, adjust);
    query.validate(g)?;
    let out = QueryOut {
        outcome: q.outcome.clone(),
        treatment: q.treatment.clone(),
        adjust: g.set_names(adjust),
    };
    Ok((query, out))
}

fn mode(strict: bool) -> (CriterionMode, &'static str) {
    if strict {
        (CriterionMode::Literal, "literal")
    } else {
        (CriterionMode::Resolved, "resolved")
    }
}

/// Outcome of a command: report text for stdout, a note for stderr and the
/// exit code.
pub struct Outcome {
    pub stdout: Vec<u8>,
    pub stderr: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String, success: bool, note: String) -> Self {
        Outcome {
            stdout: stdout.into_bytes(),
            stderr: note,
            code: if success { 0 } else { 1 },
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Check {
            query,
            criterion,
            strict_defn,
        } => {
            let m = load(&query.model)?;
            let g = m.file.graph()?;
            let (q, qout) = resolve_query(&g, query)?;
            let (md, def) = mode(*strict_defn);
            let (name, verdict) = match criterion {
                CriterionArg::Selective => (
                    "selective",
                    selective_door_criterion(&g, q.adjust, q.treatment, q.outcome, md)?,
                ),
                CriterionArg::Backdoor => (
                    "backdoor",
                    backdoor_criterion(&g, q.adjust, q.treatment, q.outcome)?,
                ),
                CriterionArg::Singledoor => (
                    "singledoor",
                    single_door_precondition(&g, q.adjust, q.treatment, q.outcome)?,
                ),
            };
            let note = match &verdict.witness {
                Some(w) => format!("violated: {}\n", w.describe(&g)),
                None => String::new(),
            };
            let report = CheckReport {
                header: Header::new("check", Some(&m.bytes)),
                query: qout,
                criterion: name,
                definition: def,
                verdict: VerdictOut::new(&g, &verdict),
            };
            Ok(Outcome::ok(to_json(&report), verdict.satisfied, note))
        }
        Command::Effect { query, strict_defn } => {
            let m = load(&query.model)?;
            let model = m.file.to_model()?;
            let g = model.graph();
            let (q, qout) = resolve_query(g, query)?;
            let (md, def) = mode(*strict_defn);
            let r = identify_with(&model, &q, md)?;
            let report = EffectOut {
                header: Header::new("effect", Some(&m.bytes)),
                query: qout,
                definition: def,
                criterion: VerdictOut::new(g, &r.criterion),
                beta: r.beta,
                tau: r.tau,
                gamma: r.gamma,
                total_effect: r.total_effect,
                s1: g.set_names(r.s1s2.s1),
                s2: g.set_names(r.s1s2.s2),
                bias_rhs: r.bias_rhs,
                naive_bias: NaiveBias {
                    value: r.beta - r.total_effect,
                    note: "beta - total_effect; measured against the uncontrolled total effect, unlike gamma",
                },
            };
            Ok(Outcome::ok(to_json(&report), true, String::new()))
        }
        Command::Bias { query } => {
            let m = load(&query.model)?;
            let model = m.file.to_model()?;
            let g = model.graph();
            let (q, qout) = resolve_query(g, query)?;
            let header = Header::new("bias", Some(&m.bytes));
            match bias_decomposition(&model, &q) {
                Ok(ledger) => {
                    let report = BiasOut {
                        header,
                        query: qout,
                        precondition_met: true,
                        witness: None,
                        s1: g.set_names(ledger.s1s2.s1),
                        s2: g.set_names(ledger.s1s2.s2),
                        gamma: Some(ledger.gamma),
                        gamma_rhs: Some(ledger.gamma_rhs),
                        identity_holds: Some(ledger.holds),
                        ledger: ledger
                            .terms
                            .iter()
                            .map(|t| LedgerRow {
                                vertex: g.name(t.vertex).to_string(),
                                gamma_ip: t.gamma_ip,
                                tau_pj: t.tau_pj,
                                contribution: t.contribution,
                            })
                            .collect(),
                    };
                    let note = if ledger.holds {
                        String::new()
                    } else {
                        "decomposition does not match the direct gap\n".to_string()
                    };
                    Ok(Outcome::ok(to_json(&report), ledger.holds, note))
                }
                Err(AnalysisError::PreconditionNotMet { detail, witness }) => {
                    let s = q.regressors();
                    let part = crate::graph::partition_s1_s2(g, s, q.outcome)?;
                    let report = BiasOut {
                        header,
                        query: qout,
                        precondition_met: false,
                        witness: witness.as_ref().map(|w| WitnessOut::new(g, w)),
                        s1: g.set_names(part.s1),
                        s2: g.set_names(part.s2),
                        gamma: None,
                        gamma_rhs: None,
                        identity_holds: None,
                        ledger: Vec::new(),
                    };
                    Ok(Outcome::ok(
                        to_json(&report),
                        false,
                        format!("precondition not met: {detail}\n"),
                    ))
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Verify {
            query,
            trials,
            seed,
            tol,
            strict_defn,
        } => {
            let m = load(&query.model)?;
            let g = m.file.base_graph()?;
            if !m.file.nonlinear.is_empty() {
                return Err(CliError::Input("verify needs a linear model".into()));
            }
            let (q, qout) = resolve_query(&g, query)?;
            let (md, def) = mode(*strict_defn);
            if tol.is_nan() || *tol < 0.0 {
                return Err(CliError::Input(format!(
                    "tolerance must be non-negative, got {tol}"
                )));
            }
            let cfg = VerifyConfig {
                trials: *trials,
                seed: *seed,
                tol_eq: *tol,
                mode: md,
                ..VerifyConfig::default()
            };
            let s = verify_necessity(&g, &q, &cfg)?;
            let report = VerifyOut {
                header: Header::new("verify", Some(&m.bytes)),
                query: qout,
                definition: def,
                seed: *seed,
                tol_eq: cfg.tol_eq,
                allowed_fraction: cfg.allowed_fraction,
                trials: s.trials,
                criterion_verdict: s.criterion_verdict,
                agree_count: s.agree_count,
                passed: s.passed,
                disagreements: s
                    .disagreements
                    .iter()
                    .map(|d| DisagreementOut {
                        trial: d.trial,
                        seed: d.seed,
                        gamma: d.gamma,
                    })
                    .collect(),
            };
            Ok(Outcome::ok(to_json(&report), s.passed, String::new()))
        }
        Command::Simulate {
            model,
            n,
            seed,
            dist,
            out,
        } => {
            let m = load(model)?;
            let sem = m.file.to_model()?;
            let dist: ErrorDistribution = dist.parse()?;
            let d = sample_data(&sem, *n, *seed, dist)?;
            let mut csv = Vec::new();
            d.write_csv(&mut csv).expect("writing to memory");
            match out {
                None => Ok(Outcome {
                    stdout: csv,
                    stderr: String::new(),
                    code: 0,
                }),
                Some(path) => {
                    fs::write(path, &csv)
                        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                    let report = SimulateOut {
                        header: Header::new("simulate", Some(&m.bytes)),
                        rows: d.n(),
                        columns: d.names().to_vec(),
                        seed: *seed,
                        distribution: dist.name(),
                        output: path.display().to_string(),
                    };
                    Ok(Outcome::ok(to_json(&report), true, String::new()))
                }
            }
        }
        Command::NonlinearDemo {
            spec,
            grid,
            n,
            seed,
        } => {
            let (bytes, file) = match spec {
                Some(path) => {
                    let bytes = fs::read(path)
                        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                    let file: NonlinearSpecFile = serde_json::from_slice(&bytes)
                        .map_err(|e| CliError::Input(format!("spec file: {e}")))?;
                    (Some(bytes), file)
                }
                None => (None, NonlinearSpecFile::default()),
            };
            let r = nonlinear_demo(&file.to_spec()?, grid, *n, *seed)?;
            let report = NonlinearOut {
                header: Header::new("nonlinear-demo", bytes.as_deref()),
                parameters: file,
                n: r.n,
                seed: *seed,
                a_mx_hat: r.a_mx_hat,
                tau_hat: r.tau_hat,
                a_yh_hat: r.a_yh_hat,
                grid: r
                    .grid
                    .iter()
                    .map(|p| GridOut {
                        x: p.x,
                        expected_h: p.expected_h,
                        delta_hat: p.delta_hat,
                        delta_se: p.delta_se,
                        total_slope: p.total_slope,
                    })
                    .collect(),
            };
            Ok(Outcome::ok(to_json(&report), true, String::new()))
        }
    }
}

/// Runs a parsed command line, writing the report and diagnostics, and
/// returns the process exit code.
pub fn run<O: Write, E: Write>(cli: &Cli, stdout: &mut O, stderr: &mut E) -> i32 {
    match execute(cli) {
        Ok(o) => {
            let _ = stdout.write_all(&o.stdout);
            let _ = stderr.write_all(o.stderr.as_bytes());
            o.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
