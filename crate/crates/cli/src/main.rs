//! `coarseforge`: drive the cone-off / de-electrification / factor-system
//! pipeline from the command line.
//!
//! - One subcommand per stage (`gen`, `cone`, `deelectrify`, `factor-check`,
//!   `prox-close`, `promote`, `hhs-verify`) plus `delta` for host
//!   hyperbolicity and `run` for a config-driven pipeline. Stage
//!   subcommands execute their prerequisites in memory and persist only
//!   their own artifact; `run` persists every stage plus `summary.csv`.
//! - Global flags: `--out DIR` (artifact directory), `--seed N` (endpoint
//!   sampling), `--threads N` (worker count, falling back to the
//!   `COARSEFORGE_THREADS` variable, then to all cores).
//! - Exit status: 0 when every executed check passed, 1 when a stage's
//!   checks failed (the failing report is persisted), 2 on configuration
//!   or execution errors.

mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{
    CheckMode, ConeParams, DeelectParams, ExperimentConfig, FactorCheckParams, GenParams,
    HhsVerifyParams, PromoteParams, ProxCloseParams, Stage, SurgeryMode,
};
use pipeline::{delta_artifact, execute, Persist, RunOutcome};

#[derive(Parser)]
#[command(name = "coarseforge", version, about = "Coarse-geometry verification pipeline")]
struct Cli {
    /// Directory artifacts are written to.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the de-electrification endpoint sampler.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to COARSEFORGE_THREADS, then all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the host graph: a Cayley ball or the star fixture.
    Gen(GenArgs),
    /// Measure thin-triangles and four-point hyperbolicity of the host.
    Delta(GenArgs),
    /// Cone off a subspace family over the host.
    Cone {
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        cone: ConeArgs,
    },
    /// Run the de-electrification surgery on sampled endpoint pairs.
    Deelectrify {
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        cone: ConeArgs,
        #[command(flatten)]
        deelect: DeelectArgs,
    },
    /// Check the coned family against the factor-system conditions.
    FactorCheck {
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        cone: ConeArgs,
        #[command(flatten)]
        factor: FactorCheckArgs,
    },
    /// Close a subgroup family under proximal intersections.
    ProxClose {
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        prox: ProxCloseArgs,
    },
    /// Promote the closed family to a verified factor system.
    Promote {
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        prox: ProxCloseArgs,
        #[command(flatten)]
        promote: PromoteArgs,
    },
    /// Assemble the hierarchy from the promoted family and verify axioms.
    HhsVerify {
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        prox: ProxCloseArgs,
        #[command(flatten)]
        promote: PromoteArgs,
        #[command(flatten)]
        verify: HhsVerifyArgs,
    },
    /// Execute a config-driven pipeline and persist every artifact.
    Run {
        /// Path to the experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct GenArgs {
    /// Presentation generators, comma separated (e.g. `a,b`).
    #[arg(long, value_delimiter = ',')]
    generators: Vec<String>,
    /// Rewriting rule `lhs=rhs`; repeat for several rules.
    #[arg(long = "rule")]
    rules: Vec<String>,
    /// Cayley ball radius.
    #[arg(long)]
    radius: Option<usize>,
    /// Build the star fixture with this many rays instead of a ball.
    #[arg(long)]
    star_rays: Option<usize>,
    /// Ray length of the star fixture.
    #[arg(long)]
    star_length: Option<usize>,
}

impl GenArgs {
    fn to_params(&self) -> Result<GenParams> {
        match (self.star_rays, self.star_length) {
            (Some(rays), Some(ray_length)) => {
                if !self.generators.is_empty() || self.radius.is_some() {
                    bail!("--star-rays/--star-length exclude --generators/--radius");
                }
                Ok(GenParams::Star { rays, ray_length })
            }
            (None, None) => {
                if self.generators.is_empty() {
                    bail!("need --generators (or --star-rays with --star-length)");
                }
                let radius = self.radius.context("need --radius with --generators")?;
                let mut rules = Vec::with_capacity(self.rules.len());
                for rule in &self.rules {
                    let (lhs, rhs) = rule
                        .split_once('=')
                        .with_context(|| format!("rule `{rule}` is not of the form lhs=rhs"))?;
                    rules.push((lhs.to_string(), rhs.to_string()));
                }
                Ok(GenParams::Presentation {
                    generators: self.generators.clone(),
                    rules,
                    radius,
                })
            }
            _ => bail!("--star-rays and --star-length must be given together"),
        }
    }
}

#[derive(Args)]
struct ConeArgs {
    /// One subgroup's generating words, comma separated; repeat per subgroup.
    #[arg(long = "subgroup")]
    subgroups: Vec<String>,
    /// Core margin cosets must survive; defaults to the family's own scale.
    #[arg(long)]
    margin: Option<u32>,
    /// Cone off the star fixture's named members instead of cosets.
    #[arg(long)]
    members: bool,
}

impl ConeArgs {
    fn to_params(&self) -> Result<ConeParams> {
        if self.members {
            if !self.subgroups.is_empty() || self.margin.is_some() {
                bail!("--members excludes --subgroup/--margin");
            }
            return Ok(ConeParams::Members);
        }
        if self.subgroups.is_empty() {
            bail!("need at least one --subgroup (or --members on a star host)");
        }
        Ok(ConeParams::Cosets {
            subgroups: self.subgroups.iter().map(|s| split_words(s)).collect(),
            margin: self.margin,
        })
    }
}

#[derive(Args)]
struct DeelectArgs {
    /// Number of endpoint pairs to sample.
    #[arg(long, default_value_t = 16)]
    samples: usize,
    /// Which de-electrification the surgery produces.
    #[arg(long, value_enum, default_value_t = SurgeryMode::Total)]
    mode: SurgeryMode,
}

#[derive(Args)]
struct FactorCheckArgs {
    /// Which check to run.
    #[arg(long = "check-mode", value_enum, default_value_t = CheckMode::Weak)]
    mode: CheckMode,
    /// Restrict the check to these named members; repeat per member.
    #[arg(long = "member")]
    selected_members: Vec<String>,
    /// Diameter cutoff for the weak condition (3) scan.
    #[arg(long, default_value_t = 8)]
    theta_max: u32,
}

#[derive(Args)]
struct ProxCloseArgs {
    /// One seed subgroup's generating words, comma separated; repeat
    /// per subgroup.
    #[arg(long = "closure-subgroup", required = true)]
    subgroups: Vec<String>,
    /// Abort threshold on the closure's height probe.
    #[arg(long, default_value_t = 4)]
    height_cap: u32,
}

impl ProxCloseArgs {
    fn to_params(&self) -> ProxCloseParams {
        ProxCloseParams {
            subgroups: self.subgroups.iter().map(|s| split_words(s)).collect(),
            height_cap: self.height_cap,
        }
    }
}

#[derive(Args)]
struct PromoteArgs {
    /// Diameter cutoff handed to the weak check of the closed family.
    #[arg(long = "promote-theta-max", default_value_t = 8)]
    theta_max: u32,
}

#[derive(Args)]
struct HhsVerifyArgs {
    /// Target number of sampled pairs per geodesic-driven check.
    #[arg(long, default_value_t = 128)]
    budget: usize,
}

fn split_words(joined: &str) -> Vec<String> {
    joined.split(',').filter(|w| !w.is_empty()).map(str::to_string).collect()
}

fn empty_config(pipeline: Vec<Stage>, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        pipeline,
        seed,
        output_dir: None,
        gen: None,
        cone: None,
        deelectrify: None,
        factor_check: None,
        prox_close: None,
        promote: None,
        hhs_verify: None,
    }
}

fn init_threads(cli: Option<usize>) -> Result<()> {
    let n = match cli {
        Some(n) => Some(n),
        None => std::env::var("COARSEFORGE_THREADS")
            .ok()
            .map(|s| s.parse::<usize>())
            .transpose()
            .context("COARSEFORGE_THREADS must be a positive integer")?,
    };
    if let Some(n) = n {
        if n == 0 {
            bail!("thread count must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("initializing the worker pool")?;
    }
    Ok(())
}

fn real_main() -> Result<RunOutcome> {
    let cli = Cli::parse();
    init_threads(cli.threads)?;
    let seed = cli.seed;
    let out = |what: &str| -> Result<PathBuf> {
        cli.out.clone().with_context(|| format!("{what} needs --out DIR"))
    };

    match &cli.command {
        Command::Gen(gen) => {
            let mut cfg = empty_config(vec![Stage::Gen], seed.unwrap_or(1));
            cfg.gen = Some(gen.to_params()?);
            execute(&cfg, &out("gen")?, cfg.seed, Persist::Only(Stage::Gen))
        }
        Command::Delta(gen) => {
            let mut cfg = empty_config(vec![Stage::Gen], seed.unwrap_or(1));
            cfg.gen = Some(gen.to_params()?);
            let value = delta_artifact(&cfg, cfg.seed)?;
            let dir = out("delta")?;
            std::fs::create_dir_all(&dir)?;
            let mut text = serde_json::to_string_pretty(&value)?;
            text.push('\n');
            std::fs::write(dir.join("delta.json"), text)?;
            Ok(RunOutcome::Passed)
        }
        Command::Cone { gen, cone } => {
            let mut cfg = empty_config(vec![Stage::Gen, Stage::Cone], seed.unwrap_or(1));
            cfg.gen = Some(gen.to_params()?);
            cfg.cone = Some(cone.to_params()?);
            execute(&cfg, &out("cone")?, cfg.seed, Persist::Only(Stage::Cone))
        }
        Command::Deelectrify { gen, cone, deelect } => {
            let mut cfg = empty_config(
                vec![Stage::Gen, Stage::Cone, Stage::Deelectrify],
                seed.unwrap_or(1),
            );
            cfg.gen = Some(gen.to_params()?);
            cfg.cone = Some(cone.to_params()?);
            cfg.deelectrify =
                Some(DeelectParams { samples: deelect.samples, mode: deelect.mode });
            execute(&cfg, &out("deelectrify")?, cfg.seed, Persist::Only(Stage::Deelectrify))
        }
        Command::FactorCheck { gen, cone, factor } => {
            let mut cfg = empty_config(
                vec![Stage::Gen, Stage::Cone, Stage::FactorCheck],
                seed.unwrap_or(1),
            );
            cfg.gen = Some(gen.to_params()?);
            cfg.cone = Some(cone.to_params()?);
            cfg.factor_check = Some(FactorCheckParams {
                mode: factor.mode,
                members: if factor.selected_members.is_empty() {
                    None
                } else {
                    Some(factor.selected_members.clone())
                },
                theta_max: factor.theta_max,
            });
            execute(&cfg, &out("factor-check")?, cfg.seed, Persist::Only(Stage::FactorCheck))
        }
        Command::ProxClose { gen, prox } => {
            let mut cfg = empty_config(vec![Stage::Gen, Stage::ProxClose], seed.unwrap_or(1));
            cfg.gen = Some(gen.to_params()?);
            cfg.prox_close = Some(prox.to_params());
            execute(&cfg, &out("prox-close")?, cfg.seed, Persist::Only(Stage::ProxClose))
        }
        Command::Promote { gen, prox, promote } => {
            let mut cfg = empty_config(
                vec![Stage::Gen, Stage::ProxClose, Stage::Promote],
                seed.unwrap_or(1),
            );
            cfg.gen = Some(gen.to_params()?);
            cfg.prox_close = Some(prox.to_params());
            cfg.promote = Some(PromoteParams { theta_max: promote.theta_max });
            execute(&cfg, &out("promote")?, cfg.seed, Persist::Only(Stage::Promote))
        }
        Command::HhsVerify { gen, prox, promote, verify } => {
            let mut cfg = empty_config(
                vec![Stage::Gen, Stage::ProxClose, Stage::Promote, Stage::HhsVerify],
                seed.unwrap_or(1),
            );
            cfg.gen = Some(gen.to_params()?);
            cfg.prox_close = Some(prox.to_params());
            cfg.promote = Some(PromoteParams { theta_max: promote.theta_max });
            cfg.hhs_verify = Some(HhsVerifyParams { budget: verify.budget });
            execute(&cfg, &out("hhs-verify")?, cfg.seed, Persist::Only(Stage::HhsVerify))
        }
        Command::Run { config } => {
            let text = std::fs::read_to_string(config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg: ExperimentConfig = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", config.display()))?;
            let dir = match (&cli.out, &cfg.output_dir) {
                (Some(dir), _) => dir.clone(),
                (None, Some(dir)) => PathBuf::from(dir),
                (None, None) => bail!("run needs --out DIR or `output_dir` in the config"),
            };
            execute(&cfg, &dir, seed.unwrap_or(cfg.seed), Persist::All)
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(RunOutcome::Passed) => ExitCode::SUCCESS,
        Ok(RunOutcome::Failed(stage)) => {
            eprintln!("coarseforge: stage {stage} checks failed; report persisted");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("coarseforge: error: {e:#}");
            ExitCode::from(2)
        }
    }
}
