use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use tstlab::beta::{bbeta, beta_dp, beta_inf, BetaConfig};
use tstlab::content::hausdorff_content;
use tstlab::datasets::{generate, DatasetSpec};
use tstlab::dorronsoro::omega_sum;
use tstlab::experiment::{build_tree, run_experiment, ExperimentConfig, TreeParams};
use tstlab::geometry::Ball;
use tstlab::io::{read_cloud, sampled_function_from_csv, surface_csv, to_versioned_json, write_cloud};
use tstlab::reifenberg::{certify, iterate, validate_ccbp, write_off, Ccbp, CertifyConfig, IterateConfig};

/// println! without the panic when stdout is a closed pipe.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "tstlab", version, about = "Multiscale flatness and traveling-salesman sums on point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON parameter file for the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic dataset. Config: dataset spec.
    Generate {
        #[command(flatten)]
        common: Common,
        /// .csv or .bin
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the dyadic cubes of a cloud. Config: tree parameters.
    Cubes {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Text dump of the tree; the level counts go to stdout either way.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hausdorff content of the cloud inside a ball.
    Content {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
    /// One β value on a single ball.
    Beta {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
    /// Full multiscale report. Config: experiment config. Exit code 1 when a ratio ceiling fails.
    Tst {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// BWGL cubes of an experiment. Config: experiment config.
    Bwgl {
        #[command(flatten)]
        common: Common,
    },
    /// Iterate and certify a CCBP given as JSON.
    Reifenberg {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ω-number sums of a sampled function given as CSV.
    Dorronsoro {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
    /// Histograms and ratio-vs-depth series from a cubes.csv.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Deserialize)]
struct BallQuery {
    d: f64,
    center: Vec<f64>,
    radius: f64,
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum BetaKind {
    Inf,
    Dp,
    Bilateral,
}

#[derive(Debug, Deserialize)]
struct BetaQuery {
    d: usize,
    kind: BetaKind,
    #[serde(default = "one")]
    p: f64,
    center: Vec<f64>,
    radius: f64,
    #[serde(default)]
    beta: BetaConfig,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize, Default)]
#[serde(default)]
struct ReifenbergParams {
    /// ε the certificate constants are normalised by; 0.01 when absent.
    eps: Option<f64>,
    iterate: IterateConfig,
    certify: CertifyConfig,
}

#[derive(Debug, Deserialize)]
struct OmegaParams {
    #[serde(default = "two")]
    p: f64,
    depth: usize,
    lipschitz: Option<f64>,
}

fn two() -> f64 {
    2.0
}

#[derive(Serialize)]
struct BwglOut {
    root: usize,
    root_level: usize,
    depth: usize,
    eps: f64,
    a: f64,
    bwgl_sum: f64,
    bwgl_count: usize,
    partial_bwgl: Vec<f64>,
    cubes: Vec<(usize, usize, f64)>,
}

fn load<T: DeserializeOwned>(path: &Option<PathBuf>) -> Result<T> {
    let Some(path) = path else { bail!("--config is required") };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_or_default<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(_) => load(path),
        None => Ok(T::default()),
    }
}

fn experiment_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.dataset.seed = s;
    }
    Ok(cfg)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate { common, out } => {
            let mut spec: DatasetSpec = load(&common.config)?;
            if let Some(s) = common.seed {
                spec.seed = s;
            }
            let cloud = generate(&spec)?;
            write_cloud(&out, &cloud)?;
            say!("{} points in R^{} -> {}", cloud.len(), cloud.dim(), out.display());
        }
        Command::Cubes { common, input, out } => {
            let params: TreeParams = load_or_default(&common.config)?;
            let tree = build_tree(read_cloud(&input)?, &params)?;
            tree.check()?;
            for (k, c) in tree.level_counts().iter().enumerate() {
                say!("level {k}: {c} cubes, side {}", tree.side(k));
            }
            if let Some(out) = out {
                write_file(&out, &tree.to_text())?;
            }
        }
        Command::Content { common, input } => {
            let q: BallQuery = load(&common.config)?;
            let cloud = read_cloud(&input)?;
            let est = hausdorff_content(&cloud, q.d, &Ball::new(q.center, q.radius)?)?;
            say!("{} {}", est.value, est.cover.len());
        }
        Command::Beta { common, input } => {
            let q: BetaQuery = load(&common.config)?;
            let cloud = read_cloud(&input)?;
            let ball = Ball::new(q.center, q.radius)?;
            let v = match q.kind {
                BetaKind::Inf => beta_inf(&cloud, &ball, q.d, &q.beta)?,
                BetaKind::Dp => beta_dp(&cloud, &ball, q.d, q.p, None, &q.beta)?,
                BetaKind::Bilateral => bbeta(&cloud, &ball, q.d, &q.beta)?,
            };
            say!("{}", to_versioned_json(&v)?);
        }
        Command::Tst { common, out } => {
            let cfg = experiment_config(&common)?;
            let bundle = run_experiment(&cfg)?;
            bundle.write(&out)?;
            for w in &bundle.summary.warnings {
                eprintln!("{w}");
            }
            let s = &bundle.summary;
            say!(
                "tst_sum {} measure {} bwgl {} upper {} lower {} two-sided {} {}",
                s.tst_sum,
                s.measure_estimate,
                s.bwgl_sum,
                s.upper_ratio,
                s.lower_ratio,
                s.two_sided_ratio,
                if s.pass { "PASS" } else { "FAIL" }
            );
            if !s.pass {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Bwgl { common } => {
            let cfg = experiment_config(&common)?;
            let r = run_experiment(&cfg)?.report;
            let out = BwglOut {
                root: r.root,
                root_level: r.root_level,
                depth: r.depth,
                eps: r.params.eps,
                a: r.params.a,
                bwgl_sum: r.bwgl_sum,
                bwgl_count: r.bwgl_count,
                partial_bwgl: r.partial_bwgl.clone(),
                cubes: r.cubes.iter().filter(|c| c.bwgl).map(|c| (c.level, c.id, c.bbeta)).collect(),
            };
            say!("{}", to_versioned_json(&out)?);
        }
        Command::Reifenberg { common, input, out } => {
            let mut params: ReifenbergParams = load_or_default(&common.config)?;
            if let Some(s) = common.seed {
                params.certify.seed = s;
            }
            let eps = params.eps.unwrap_or(0.01);
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let c = Ccbp::from_json(&text)?;
            let profile = validate_ccbp(&c, eps)?;
            let s = iterate(&c, &params.iterate)?;
            let cert = certify(&s, &c, eps, &params.certify)?;
            fs::create_dir_all(&out)?;
            write_file(&out.join("surface.csv"), &surface_csv(&s))?;
            write_file(&out.join("certificate.json"), &to_versioned_json(&cert)?)?;
            write_file(&out.join("epsilon.json"), &to_versioned_json(&profile)?)?;
            if s.d == 2 {
                write_file(&out.join("surface.off"), &write_off(&s, s.steps())?)?;
            }
            for item in &cert.items {
                say!(
                    "item {:>2} {:<40} measured {:.4e} constant {:.4} ceiling {} {}",
                    item.item,
                    item.name,
                    item.measured,
                    item.constant,
                    item.ceiling,
                    if item.pass { "PASS" } else { "FAIL" }
                );
            }
            if !cert.all_pass() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Dorronsoro { common, input } => {
            let q: OmegaParams = load(&common.config)?;
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let f = sampled_function_from_csv(&text, q.lipschitz)?;
            say!("{}", to_versioned_json(&omega_sum(&f, q.p, q.depth)?)?);
        }
        Command::Report { input, out } => {
            tstlab::experiment::report(&input, &out)?;
            say!("wrote {} and {}", out.join("histograms.csv").display(), out.join("ratio_vs_depth.csv").display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("TSTLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
