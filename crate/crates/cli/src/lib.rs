//! Batch front end over `arbor-core`: element definitions, analyses and
//! experiments, emitted as aligned tables, CSV or JSON run reports.

mod output;
mod parse;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_bigint::{BigInt, BigUint};
use rayon::prelude::*;
use serde::Serialize;

use arbor_core::affine::{
    geometric_valuation, predicted_cycle_length_u64, theta_signature, valuation, AffineElement,
    BaseOdometerFrame, ThetaSignature,
};
use arbor_core::cycles::{
    cycle_decomposition, is_minimal_up_to, level_conjugator, settled_stats, stability_report, strongly_settle,
    CycleReport, SettledStats, StabilityReport,
};
use arbor_core::monodromy::{dihedral_audit, DihedralReport, ImgPresentation, NormalizerCase, WeylReport};
use arbor_core::recursion::{odometer_binding, profile_element, Growth, GrowthProfile};
use arbor_core::sampling::{derive_seed, haar_sample, permutation_closure, wreath_sample};
use arbor_core::tree::adding_machine;
use arbor_core::{Distance, ElementExpr, Evaluator, RecursionEnv, TreeShape, TruncatedAutomorphism};

pub use output::{render, Format, Table};
pub use parse::{parse_definitions, parse_expr, DefinitionError, Position};

pub const SCHEMA: &str = "arbor.run.v1";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Definition(#[from] DefinitionError),
    #[error("{0}")]
    Core(#[from] arbor_core::Error),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    /// 2 for bad input, 3 for exhausted depth or size budgets, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use arbor_core::Error as E;
        match self {
            CliError::Definition(_) | CliError::Input(_) => 2,
            CliError::Core(E::DepthExceeded { .. } | E::Budget(_)) => 3,
            CliError::Core(
                E::InvalidShape(_)
                | E::InvalidPermutation(_)
                | E::UnresolvedRef(_)
                | E::DuplicateDefinition(_)
                | E::NonContracting(_)
                | E::Arity { .. }
                | E::LetterOutOfRange { .. }
                | E::NotMinimal { .. }
                | E::Precondition(_)
                | E::InfeasibleProfile(_)
                | E::Document(_),
            ) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "arbor", version, about = "Exact computations with automorphisms of rooted trees")]
pub struct Cli {
    #[command(flatten)]
    pub config: Config,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Config {
    #[arg(long, global = true, value_enum, default_value = "table")]
    pub format: Format,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Tree depth N; 12 for binary trees and 8 otherwise.
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    /// Branching factor d.
    #[arg(long, global = true, default_value_t = 2)]
    pub degree: usize,
    /// File of element definitions.
    #[arg(long, global = true)]
    pub defs: Option<PathBuf>,
    /// Extra definition, e.g. `--define "b = (a, b)"`; may repeat.
    #[arg(long = "define", global = true)]
    pub define: Vec<String>,
}

impl Config {
    pub fn depth(&self) -> usize {
        self.depth.unwrap_or(if self.degree == 2 { 12 } else { 8 })
    }

    pub fn shape(&self) -> Result<TreeShape, CliError> {
        if self.depth() == 0 {
            return Err(CliError::Input("depth must be positive".into()));
        }
        Ok(TreeShape::constant(self.degree, self.depth())?)
    }

    /// User definitions if any were given, otherwise the odometer `a`
    /// (plus `b = (a, b)` and `c = (b, c)` on the binary tree).
    pub fn env(&self) -> Result<RecursionEnv, CliError> {
        let shape = self.shape()?;
        if self.defs.is_none() && self.define.is_empty() {
            if self.degree == 2 {
                return Ok(RecursionEnv::standard_binary(self.depth()));
            }
            return Ok(RecursionEnv::new(shape).define("a", odometer_binding(self.degree, "a"))?);
        }
        let mut src = match &self.defs {
            Some(path) => std::fs::read_to_string(path)?,
            None => String::new(),
        };
        for d in &self.define {
            if !src.is_empty() && !src.ends_with('\n') {
                src.push('\n');
            }
            src.push_str(d);
        }
        Ok(parse_definitions(&src, &shape)?)
    }

    fn require_binary(&self, what: &str) -> Result<(), CliError> {
        if self.degree != 2 {
            return Err(CliError::Input(format!("{what} works on the binary tree only")));
        }
        Ok(())
    }

    fn check_budget(&self, budget: usize) -> Result<(), CliError> {
        if budget > self.depth() {
            return Err(CliError::Input(format!("budget {budget} exceeds the depth {}", self.depth())));
        }
        Ok(())
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Truncate an element and print its levels and document.
    Eval {
        element: String,
        /// Also write the document to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cycle decomposition on one level.
    Cycles {
        element: String,
        #[arg(long)]
        level: usize,
    },
    /// Settled fractions on levels 1..=n0.
    Settled {
        element: String,
        #[arg(long, default_value_t = 6)]
        n0: usize,
        /// Defaults to the depth.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Keep n levels and splice every cycle below them into a stable one.
    Stabilize {
        /// Omit together with --haar to use a random element.
        element: Option<String>,
        #[arg(long)]
        haar: bool,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Transitivity on each level.
    Minimal { element: String },
    /// A conjugator g with g u g^-1 = w on every level.
    Conjugator { u: String, w: String },
    /// Affine maps j -> m + k j on Z/d^N.
    Affine {
        #[command(subcommand)]
        op: AffineOp,
    },
    /// v_d(1 + k + ... + k^(n-1)) against v_d(n).
    Valuation {
        #[arg(long = "k", required = true, num_args = 1.., value_delimiter = ',')]
        ks: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        from: u64,
        #[arg(long)]
        to: u64,
    },
    /// theta_1 and theta_2 of odd multipliers.
    Theta {
        #[arg(required = true, allow_negative_numbers = true)]
        ks: Vec<BigInt>,
    },
    /// Orders of the level groups of an iterated monodromy presentation.
    Img {
        #[arg(long)]
        r: usize,
        #[arg(long)]
        s: usize,
        /// Deepest level; defaults to min(depth, 10).
        #[arg(long)]
        level: Option<usize>,
    },
    /// Membership of realized sigma_{m,k} in the level groups.
    Weyl {
        #[arg(long)]
        r: usize,
        #[arg(long)]
        s: usize,
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        #[arg(long, default_value_t = 16)]
        m_max: u64,
        #[arg(long, default_value_t = 31)]
        k_max: u64,
    },
    /// Enumerate the level groups for r = 2, s = 1.
    DihedralAudit {
        #[arg(long, default_value_t = 10)]
        n_max: usize,
    },
    /// Settled fractions of reproducible random elements.
    Sample {
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 6)]
        n0: usize,
        #[arg(long)]
        budget: Option<usize>,
        /// Local permutations generating the vertex group, e.g.
        /// `--local "perm((0 1 2))"`; uniform over all permutations if absent.
        #[arg(long)]
        local: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AffineOp {
    Apply {
        #[arg(long, allow_negative_numbers = true)]
        m: BigInt,
        #[arg(long, allow_negative_numbers = true)]
        k: BigInt,
        #[arg(long)]
        j: BigUint,
        /// Defaults to the depth.
        #[arg(long)]
        level: Option<usize>,
    },
    Power {
        #[arg(long, allow_negative_numbers = true)]
        m: BigInt,
        #[arg(long, allow_negative_numbers = true)]
        k: BigInt,
        #[arg(long)]
        p: u64,
    },
    /// Realize on the tree in the frame of the adding machine.
    Realize {
        #[arg(long, allow_negative_numbers = true)]
        m: BigInt,
        #[arg(long, allow_negative_numbers = true)]
        k: BigInt,
    },
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub command: Vec<String>,
    pub seed: u64,
    pub wall_time_ms: u128,
    pub payload: Payload,
}

#[derive(Debug, Serialize)]
pub struct EvalLevel {
    pub level: usize,
    pub sign: i8,
    pub order: BigUint,
    pub cycle_type: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct StabilizeReport {
    pub kept_levels: usize,
    pub budget: usize,
    /// Last level on which the input and the result agree.
    pub agreement: Distance,
    pub all_stable: bool,
    pub cycles: StabilityReport,
}

#[derive(Debug, Serialize)]
pub struct MinimalLevel {
    pub level: usize,
    pub transitive: bool,
}

#[derive(Debug, Serialize)]
pub struct AffineRealizeLevel {
    pub level: usize,
    pub cycle_lengths: BTreeMap<u64, u64>,
    /// `None` when the cycle-length formula does not apply.
    pub formula_agrees: Option<bool>,
}

#[derive(Debug, Serialize)]
pub struct ValuationRow {
    pub k: u64,
    pub n: u64,
    pub v_r: u32,
    pub v_n: u32,
}

#[derive(Debug, Serialize)]
pub struct ThetaRow {
    pub k: BigInt,
    pub theta: ThetaSignature,
}

#[derive(Debug, Serialize)]
pub struct ImgLevel {
    pub level: usize,
    pub order: BigUint,
    pub log2_order: u64,
    pub kernel_dimension: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct SampleRow {
    pub sample: usize,
    pub seed: u64,
    pub stats: SettledStats,
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", content = "data", rename_all = "kebab-case")]
pub enum Payload {
    Eval { element: String, levels: Vec<EvalLevel>, document: serde_json::Value },
    Cycles(CycleReport),
    Settled(SettledStats),
    Stabilize(StabilizeReport),
    Minimal { levels: Vec<MinimalLevel> },
    Conjugator { verified: bool, document: serde_json::Value },
    AffineApply { element: AffineElement, j: BigUint, level: usize, image: BigUint },
    AffinePower { element: AffineElement, p: u64, power: AffineElement },
    AffineRealize { element: AffineElement, levels: Vec<AffineRealizeLevel> },
    Valuation { d: u32, rows: Vec<ValuationRow> },
    Theta { rows: Vec<ThetaRow> },
    Img { r: usize, s: usize, case: NormalizerCase, generators: Vec<String>, levels: Vec<ImgLevel> },
    Weyl(WeylReport),
    DihedralAudit(DihedralReport),
    Sample { rows: Vec<SampleRow> },
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn opt<T: ToString>(x: &Option<T>) -> String {
    x.as_ref().map_or_else(|| "-".into(), T::to_string)
}

fn cycle_type(counts: &BTreeMap<u64, u64>) -> String {
    counts.iter().map(|(len, c)| format!("{len}x{c}")).collect::<Vec<_>>().join(" ")
}

impl Payload {
    pub fn table(&self) -> Table {
        match self {
            Payload::Eval { levels, .. } => {
                let mut t = Table::new(&["level", "sign", "order", "cycle_type"]);
                for l in levels {
                    let mut counts = BTreeMap::new();
                    for &len in &l.cycle_type {
                        *counts.entry(len as u64).or_insert(0u64) += 1;
                    }
                    t.push(row![l.level, l.sign, l.order, cycle_type(&counts)]);
                }
                t
            }
            Payload::Cycles(report) => {
                let mut t = Table::new(&["cycle", "length", "members"]);
                for (i, c) in report.cycles.iter().enumerate() {
                    let members: Vec<String> = c.members.iter().map(u32::to_string).collect();
                    t.push(row![i, c.length, members.join(" ")]);
                }
                t
            }
            Payload::Settled(stats) => settled_table(stats),
            Payload::Stabilize(r) => {
                let mut t = Table::new(&["representative", "length", "status"]);
                for c in &r.cycles.cycles {
                    t.push(row![c.representative, c.length, c.status]);
                }
                t.note(format!("distance to the input: {}", r.agreement));
                t.note(format!("every cycle on level {} stable: {}", r.kept_levels, yes_no(r.all_stable)));
                t
            }
            Payload::Minimal { levels } => {
                let mut t = Table::new(&["level", "transitive"]);
                for l in levels {
                    t.push(row![l.level, yes_no(l.transitive)]);
                }
                t
            }
            Payload::Conjugator { verified, .. } => {
                let mut t = Table::new(&["verified"]);
                t.push(row![yes_no(*verified)]);
                t
            }
            Payload::AffineApply { element, j, level, image } => {
                let mut t = Table::new(&["d", "m", "k", "j", "level", "image"]);
                t.push(row![element.d(), element.m(), element.k(), j, level, image]);
                t
            }
            Payload::AffinePower { element, p, power } => {
                let mut t = Table::new(&["d", "m", "k", "p", "m_p", "k_p"]);
                t.push(row![element.d(), element.m(), element.k(), p, power.m(), power.k()]);
                t
            }
            Payload::AffineRealize { levels, .. } => {
                let mut t = Table::new(&["level", "cycle_type", "formula"]);
                for l in levels {
                    let formula = match l.formula_agrees {
                        None => "-",
                        Some(true) => "agrees",
                        Some(false) => "disagrees",
                    };
                    t.push(row![l.level, cycle_type(&l.cycle_lengths), formula]);
                }
                t
            }
            Payload::Valuation { rows, .. } => {
                let mut t = Table::new(&["k", "n", "v_r", "v_n", "equal"]);
                for r in rows {
                    t.push(row![r.k, r.n, r.v_r, r.v_n, yes_no(r.v_r == r.v_n)]);
                }
                t
            }
            Payload::Theta { rows } => {
                let mut t = Table::new(&["k", "theta1", "theta2", "A", "B", "C"]);
                for r in rows {
                    let p = |c: NormalizerCase| opt(&c.predicts_member(r.theta).map(yes_no));
                    t.push(row![
                        r.k,
                        r.theta.theta1,
                        r.theta.theta2,
                        p(NormalizerCase::A),
                        p(NormalizerCase::B),
                        p(NormalizerCase::C)
                    ]);
                }
                t
            }
            Payload::Img { case, generators, levels, .. } => {
                let mut t = Table::new(&["level", "order", "log2_order", "kernel_dimension"]);
                for l in levels {
                    t.push(row![l.level, l.order, l.log2_order, opt(&l.kernel_dimension)]);
                }
                t.note(format!("case {case}"));
                for (i, g) in generators.iter().enumerate() {
                    t.note(format!("u{} = {g}", i + 1));
                }
                t
            }
            Payload::Weyl(report) => {
                let mut t = Table::new(&["m", "k", "theta1", "theta2", "predicted", "membership", "first_non_member"]);
                for r in &report.rows {
                    let membership: String = r.member.iter().map(|&b| if b { '1' } else { '0' }).collect();
                    t.push(row![
                        r.m,
                        r.k,
                        r.theta.theta1,
                        r.theta.theta2,
                        opt(&r.predicted_member.map(yes_no)),
                        membership,
                        opt(&r.first_non_member)
                    ]);
                }
                t.note(format!(
                    "case {}: {} predicted members fail membership",
                    report.case,
                    report.inclusion_violations().len()
                ));
                t
            }
            Payload::DihedralAudit(report) => {
                let mut t = Table::new(&[
                    "level",
                    "order",
                    "enumerated",
                    "outside_cyclic",
                    "involutions_outside",
                    "multipliers",
                    "consistent",
                ]);
                for l in &report.levels {
                    let ks: Vec<String> = l.multipliers.iter().map(u64::to_string).collect();
                    t.push(row![
                        l.n,
                        l.order,
                        l.enumerated,
                        l.outside_cyclic,
                        l.involutions_outside,
                        ks.join(" "),
                        yes_no(l.is_consistent())
                    ]);
                }
                t
            }
            Payload::Sample { rows } => {
                let mut t = Table::new(&["sample", "seed", "level", "stable", "total", "fraction"]);
                for r in rows {
                    for l in &r.stats.levels {
                        t.push(row![r.sample, r.seed, l.level, l.stable, l.total, l.fraction]);
                    }
                }
                t
            }
        }
    }
}

fn settled_table(stats: &SettledStats) -> Table {
    let mut t = Table::new(&["level", "stable", "total", "fraction"]);
    for l in &stats.levels {
        t.push(row![l.level, l.stable, l.total, l.fraction]);
    }
    t
}

/// Element sources: `@file` reads a document, `profile:dh` cycles the
/// growth pattern `d`/`h` (double/hold) down the tree, anything else is an
/// expression over the environment.
pub fn load_element(src: &str, config: &Config, env: &RecursionEnv) -> Result<TruncatedAutomorphism, CliError> {
    let depth = config.depth();
    if let Some(path) = src.strip_prefix('@') {
        let u = TruncatedAutomorphism::from_document(&std::fs::read_to_string(path)?)?;
        if u.shape() != &config.shape()? {
            return Err(CliError::Input(format!("{path} does not match degree {} and depth {depth}", config.degree)));
        }
        return Ok(u);
    }
    if let Some(pattern) = src.strip_prefix("profile:") {
        config.require_binary("profile elements")?;
        let rules = pattern
            .chars()
            .map(|c| match c {
                'd' => Ok(Growth::Double),
                'h' => Ok(Growth::Hold),
                other => Err(CliError::Input(format!("profile letter `{other}` is neither d nor h"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if rules.is_empty() {
            return Err(CliError::Input("empty profile".into()));
        }
        let profile = GrowthProfile { rules: rules.iter().copied().cycle().take(depth).collect() };
        return Ok(profile_element(&profile, depth)?);
    }
    let expr = parse_expr(src, env.shape())?;
    Ok(Evaluator::new(env).truncate(&expr, depth)?)
}

fn affine(config: &Config, m: &BigInt, k: &BigInt) -> Result<AffineElement, CliError> {
    let d = u32::try_from(config.degree).map_err(|_| CliError::Input("degree too large".into()))?;
    Ok(AffineElement::new(d, config.depth(), m.clone(), k.clone())?)
}

fn presentation(config: &Config, r: usize, s: usize, n: usize) -> Result<ImgPresentation, CliError> {
    config.require_binary("iterated monodromy")?;
    Ok(ImgPresentation::with_depth(r, s, n.max(1))?)
}

/// Runs one command; `argv` is echoed into the report.
pub fn run(cli: &Cli, argv: &[String]) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let payload = execute(&cli.config, &cli.command)?;
    Ok(RunReport {
        schema: SCHEMA,
        command: argv.to_vec(),
        seed: cli.config.seed,
        wall_time_ms: start.elapsed().as_millis(),
        payload,
    })
}

fn execute(config: &Config, command: &Command) -> Result<Payload, CliError> {
    let depth = config.depth();
    let env = || config.env();
    Ok(match command {
        Command::Eval { element, output } => {
            let u = load_element(element, config, &env()?)?;
            let document = u.to_document();
            if let Some(path) = output {
                std::fs::write(path, format!("{document}\n"))?;
            }
            let levels = (1..=depth)
                .map(|n| {
                    let map = u.level(n)?;
                    let mut lengths: Vec<usize> = map.cycle_lengths().into_iter().map(|l| l as usize).collect();
                    lengths.sort_unstable();
                    Ok(EvalLevel { level: n, sign: map.sign(), order: map.order(), cycle_type: lengths })
                })
                .collect::<Result<Vec<_>, arbor_core::Error>>()?;
            Payload::Eval {
                element: element.clone(),
                levels,
                document: serde_json::from_str(&document).map_err(|e| CliError::Output(e.to_string()))?,
            }
        }
        Command::Cycles { element, level } => {
            config.check_budget(*level)?;
            Payload::Cycles(cycle_decomposition(&load_element(element, config, &env()?)?, *level)?)
        }
        Command::Settled { element, n0, budget } => {
            let budget = budget.unwrap_or(depth);
            config.check_budget(budget)?;
            Payload::Settled(settled_stats(&load_element(element, config, &env()?)?, *n0, budget)?)
        }
        Command::Stabilize { element, haar, n, budget } => {
            let budget = budget.unwrap_or(depth);
            config.check_budget(budget)?;
            let tau = match (element, haar) {
                (Some(e), false) => load_element(e, config, &env()?)?,
                (None, true) => haar_sample(&config.shape()?, depth, derive_seed(config.seed, "stabilize", 0))?,
                _ => return Err(CliError::Input("give either an element or --haar".into())),
            };
            let settled = strongly_settle(&tau, *n, budget)?;
            let cycles = stability_report(&settled, *n, budget)?;
            let all_stable = cycles.cycles.iter().all(|c| c.status.is_stable());
            let agreement = tau.truncate(budget)?.distance(&settled)?;
            Payload::Stabilize(StabilizeReport { kept_levels: *n, budget, agreement, all_stable, cycles })
        }
        Command::Minimal { element } => {
            let u = load_element(element, config, &env()?)?;
            let levels = (1..=depth)
                .map(|n| Ok(MinimalLevel { level: n, transitive: is_minimal_up_to(&u, n)? }))
                .collect::<Result<_, arbor_core::Error>>()?;
            Payload::Minimal { levels }
        }
        Command::Conjugator { u, w } => {
            let env = env()?;
            let (u, w) = (load_element(u, config, &env)?, load_element(w, config, &env)?);
            let g = level_conjugator(&u, &w, depth)?;
            let verified = g.compose(&u)?.compose(&g.inverse())? == w;
            let document = serde_json::from_str(&g.to_document()).map_err(|e| CliError::Output(e.to_string()))?;
            Payload::Conjugator { verified, document }
        }
        Command::Affine { op } => match op {
            AffineOp::Apply { m, k, j, level } => {
                let element = affine(config, m, k)?;
                let level = level.unwrap_or(depth);
                let image = element.apply(j, level)?;
                Payload::AffineApply { element, j: j.clone(), level, image }
            }
            AffineOp::Power { m, k, p } => {
                let element = affine(config, m, k)?;
                let power = element.pow(*p);
                Payload::AffinePower { element, p: *p, power }
            }
            AffineOp::Realize { m, k } => {
                let element = affine(config, m, k)?;
                let frame = BaseOdometerFrame::new(adding_machine(&config.shape()?)?)?;
                let levels = (1..=depth)
                    .into_par_iter()
                    .map(|n| realize_level(&frame, &element, n))
                    .collect::<Result<_, CliError>>()?;
                Payload::AffineRealize { element, levels }
            }
        },
        Command::Valuation { ks, from, to } => {
            let d = u32::try_from(config.degree).map_err(|_| CliError::Input("degree too large".into()))?;
            if *from == 0 || from > to {
                return Err(CliError::Input(format!("bad range {from}..={to}")));
            }
            let cells: Vec<(u64, u64)> = ks.iter().flat_map(|&k| (*from..=*to).map(move |n| (k, n))).collect();
            let rows = cells
                .par_iter()
                .map(|&(k, n)| {
                    let v_r = geometric_valuation(&BigUint::from(k), n, d)?;
                    let v_n = valuation(&n, &u64::from(d)).expect("n is positive");
                    Ok(ValuationRow { k, n, v_r, v_n })
                })
                .collect::<Result<_, arbor_core::Error>>()?;
            Payload::Valuation { d, rows }
        }
        Command::Theta { ks } => {
            let rows = ks
                .iter()
                .map(|k| Ok(ThetaRow { k: k.clone(), theta: theta_signature(k)? }))
                .collect::<Result<_, arbor_core::Error>>()?;
            Payload::Theta { rows }
        }
        Command::Img { r, s, level } => {
            let top = level.unwrap_or(depth.min(10));
            let pres = presentation(config, *r, *s, top)?;
            let groups = if top == 0 { Vec::new() } else { vec![pres.level_group(top)?] };
            let levels = match groups.first().and_then(|g| g.kernel_dimensions()) {
                Some(dims) => dims
                    .iter()
                    .enumerate()
                    .map(|(i, &dim)| {
                        let log2: usize = dims[..=i].iter().sum();
                        ImgLevel {
                            level: i + 1,
                            order: BigUint::from(1u8) << log2,
                            log2_order: log2 as u64,
                            kernel_dimension: Some(dim),
                        }
                    })
                    .collect(),
                None => (1..=top)
                    .map(|n| {
                        let order = pres.level_group(n)?.order();
                        let log2_order = order.bits() - 1;
                        Ok(ImgLevel { level: n, order, log2_order, kernel_dimension: None })
                    })
                    .collect::<Result<_, arbor_core::Error>>()?,
            };
            let generators = pres.generators().iter().map(|g| pres_binding(&pres, g)).collect();
            Payload::Img { r: *r, s: *s, case: pres.case(), generators, levels }
        }
        Command::Weyl { r, s, n_max, m_max, k_max } => {
            let pres = presentation(config, *r, *s, *n_max)?;
            let ms: Vec<u64> = (1..=*m_max).collect();
            let ks: Vec<u64> = (1..=*k_max).step_by(2).collect();
            Payload::Weyl(arbor_core::monodromy::weyl_index_experiment(&pres, *n_max, &ms, &ks)?)
        }
        Command::DihedralAudit { n_max } => {
            config.require_binary("the dihedral audit")?;
            Payload::DihedralAudit(dihedral_audit(*n_max)?)
        }
        Command::Sample { count, n0, budget, local } => {
            let budget = budget.unwrap_or(depth);
            config.check_budget(budget)?;
            let shape = config.shape()?;
            let group = if local.is_empty() {
                None
            } else {
                let perms = local
                    .iter()
                    .map(|p| match parse_expr(p, &shape)? {
                        ElementExpr::RootPerm(p) => Ok(p),
                        other => Err(CliError::Input(format!("`{other}` is not a permutation"))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Some(permutation_closure(&perms)?)
            };
            let rows = (0..*count)
                .into_par_iter()
                .map(|i| {
                    let seed = derive_seed(config.seed, "sample", i as u64);
                    let u = match &group {
                        None => haar_sample(&shape, budget, seed)?,
                        Some(h) => wreath_sample(&shape, h, budget, seed)?,
                    };
                    Ok(SampleRow { sample: i, seed, stats: settled_stats(&u, *n0, budget)? })
                })
                .collect::<Result<_, arbor_core::Error>>()?;
            Payload::Sample { rows }
        }
    })
}

fn pres_binding(pres: &ImgPresentation, g: &ElementExpr) -> String {
    match g {
        ElementExpr::Ref(name) => pres.env().get(name).map_or_else(|| name.clone(), ElementExpr::to_string),
        other => other.to_string(),
    }
}

fn realize_level(frame: &BaseOdometerFrame, element: &AffineElement, n: usize) -> Result<AffineRealizeLevel, CliError> {
    let map = frame.realize_level(element, n)?;
    let mut cycle_lengths = BTreeMap::new();
    let cycles = map.cycles();
    for c in &cycles {
        *cycle_lengths.entry(c.len() as u64).or_insert(0) += 1;
    }
    let formula_agrees = match element.residues(n) {
        Ok((m, k)) => {
            let d = element.d();
            let mut agrees = Some(true);
            'outer: for c in &cycles {
                for &x in c {
                    let v = u64::from(frame.phi_index(n, x as usize));
                    match predicted_cycle_length_u64(m, k, v, n as u32, d) {
                        Ok(p) if p.length_u64(d) == c.len() as u64 => {}
                        Ok(_) => {
                            agrees = Some(false);
                            break 'outer;
                        }
                        Err(_) => {
                            agrees = None;
                            break 'outer;
                        }
                    }
                }
            }
            agrees
        }
        Err(_) => None,
    };
    Ok(AffineRealizeLevel { level: n, cycle_lengths, formula_agrees })
}
