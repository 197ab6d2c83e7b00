//! Duality gap between the conjugate dual and the brute-force primal.

use clap::Args;
use latentpriv::dual::{
    minimize_corollary, minimize_dual, primal_bruteforce, AlphaDualSpec, DiscreteLossProblem,
};
use latentpriv::{FGenerator, RngState};
use serde::{Deserialize, Serialize};

use super::{require, single_table, CommandOutput, Context};
use crate::config::resolve;
use crate::error::{CliError, CliResult};
use crate::row;
use crate::table::Table;

pub const NAME: &str = "dual-check";
pub const FILE: &str = "dual_check.csv";
pub const COLUMNS: &[&str] = &[
    "trial",
    "generator",
    "atoms",
    "delta",
    "primal",
    "dual",
    "gap",
    "max_gap",
    "lambda",
    "mu",
    "corollary_dual",
];
/// The brute-force primal handles at most this many atoms.
pub const MAX_ATOMS: usize = 6;

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct DualCheckArgs {
    /// kl, reverse-kl, chi2 or alpha (uses --alpha).
    #[arg(long)]
    pub generator: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub atoms: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualCheckConfig {
    pub generator: String,
    pub alpha: f64,
    pub delta: f64,
    pub atoms: usize,
    pub trials: usize,
}

impl Default for DualCheckConfig {
    fn default() -> Self {
        Self {
            generator: "alpha".into(),
            alpha: 2.0,
            delta: 0.5,
            atoms: 3,
            trials: 50,
        }
    }
}

pub fn parse_generator(name: &str, alpha: f64) -> CliResult<FGenerator> {
    let g = match name.to_ascii_lowercase().as_str() {
        "kl" => FGenerator::Kl,
        "reverse-kl" | "reverse_kl" | "revkl" => FGenerator::ReverseKl,
        "chi2" | "chi-square" => FGenerator::ChiSquare,
        "alpha" => {
            if !alpha.is_finite() {
                return Err(CliError::validation("alpha must be finite"));
            }
            FGenerator::Alpha(alpha)
        }
        other => return Err(CliError::validation(format!("unknown generator {other:?}"))),
    };
    Ok(g.canonical())
}

/// Base probabilities bounded away from zero, losses uniform on [−2, 2].
pub fn random_problem(
    rng: &mut RngState,
    atoms: usize,
    generator: FGenerator,
    delta: f64,
) -> latentpriv::Result<DiscreteLossProblem> {
    let raw: Vec<f64> = (0..atoms).map(|_| 0.05 + rng.uniform()).collect();
    let total: f64 = raw.iter().sum();
    let mut probs: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let head: f64 = probs[..atoms - 1].iter().sum();
    probs[atoms - 1] = 1.0 - head;
    let losses = (0..atoms).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
    DiscreteLossProblem::new(probs, losses, generator, delta)
}

pub fn compute(cfg: &DualCheckConfig, seed: u64) -> CliResult<Table> {
    require((2..=MAX_ATOMS).contains(&cfg.atoms), || {
        format!("atoms must be in 2..={MAX_ATOMS}, got {}", cfg.atoms)
    })?;
    require(cfg.trials >= 1, || "trials must be at least 1".into())?;
    require(cfg.delta > 0.0 && cfg.delta.is_finite(), || {
        "delta must be positive".into()
    })?;
    let generator = parse_generator(&cfg.generator, cfg.alpha)?;
    let spec = match generator {
        FGenerator::Alpha(a) if a > 1.0 => Some(AlphaDualSpec::new(a, cfg.delta, 1.0)?),
        _ => None,
    };
    let root = RngState::new(seed);
    let mut table = Table::new(COLUMNS);
    let mut max_gap: f64 = 0.0;
    for trial in 0..cfg.trials {
        let mut rng = root.derive(trial as u64);
        let problem = random_problem(&mut rng, cfg.atoms, generator, cfg.delta)?;
        let primal = primal_bruteforce(&problem)?;
        let dual = minimize_dual(&problem)?;
        let gap = (dual.dual_value - primal.value).abs();
        max_gap = max_gap.max(gap);
        let corollary = match &spec {
            Some(s) => Some(minimize_corollary(s, &problem)?.dual_value),
            None => None,
        };
        table.push(row![
            trial,
            generator.name(),
            cfg.atoms,
            cfg.delta,
            primal.value,
            dual.dual_value,
            gap,
            max_gap,
            dual.lambda,
            dual.mu,
            corollary
        ]);
    }
    Ok(table)
}

pub fn run(args: &DualCheckArgs, ctx: &Context) -> CliResult<CommandOutput> {
    let cfg: DualCheckConfig = resolve(NAME, &ctx.file, args)?;
    let table = compute(&cfg, ctx.seed)?;
    let max_gap = table
        .rows()
        .last()
        .map(|r| r[7].clone())
        .unwrap_or_default();
    single_table(
        NAME,
        FILE,
        ctx.seed,
        &cfg,
        &table,
        format!("max duality gap {max_gap}"),
    )
}
