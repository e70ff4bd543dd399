use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fpp_core::envelope::{upper_regular_envelope, GriddedFunction};
use fpp_lab::archive::fmt_f64;
use fpp_lab::config::{ConfigError, ExperimentConfig};
use fpp_lab::runner::{self, Pipeline};
use fpp_lab::validate;

#[derive(Parser)]
#[command(name = "fpp", version, about = "First-passage percolation experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "FPP_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Weight distribution, e.g. `exp:1`, `unif:0.5:2`, `sexp:0.1:1`.
    #[arg(long, global = true)]
    dist: Option<String>,
    /// Limit shape: `l1`, `l2`, `wl1:a,b,..` or `empirical:FILE`.
    #[arg(long, global = true)]
    shape: Option<String>,
    /// Comma-separated lengths |x|.
    #[arg(long, global = true, value_delimiter = ',')]
    n: Option<Vec<f64>>,
    #[arg(long, global = true)]
    reps: Option<u64>,
    /// Semicolon-separated directions such as `1:0;1:1`.
    #[arg(long, global = true, value_delimiter = ';')]
    dirs: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample passage times and write the archive.
    Sample,
    /// Estimate the planar limit shape and its curvature.
    Shape,
    /// Fluctuation and wandering exponents.
    Exponents,
    /// Wandering and backtracking tails.
    Wandering,
    /// Passage-time tails and the nonrandom gap curve.
    Modgap,
    /// Downward deviations below the reference value.
    Downdev,
    /// Disc-to-disc local fluctuation probe.
    D2d,
    /// Slab-restricted versus free passage times.
    Slab,
    /// Every stage except shape estimation.
    Run,
    /// Upper regular envelope of a tabulated function.
    Envelope {
        /// CSV with columns `r,f`; the global `--out` names the
        /// `r,f_up,case` output file.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Oracle and invariant self-checks.
    Validate,
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let mut c = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = g.seed {
        c.sample.seed = v;
    }
    if let Some(v) = g.threads {
        c.run.threads = v;
    }
    if let Some(v) = &g.out {
        c.run.out = v.clone();
    }
    if let Some(v) = g.dim {
        c.lattice.dim = v;
    }
    if let Some(v) = &g.dist {
        c.lattice.dist = v.clone();
    }
    if let Some(v) = &g.shape {
        c.lattice.shape = v.clone();
    }
    if let Some(v) = &g.n {
        c.sample.xnorms = v.clone();
    }
    if let Some(v) = g.reps {
        c.sample.replicas = v;
    }
    if let Some(v) = &g.dirs {
        c.sample.directions = v.clone();
    }
    if g.dim.is_some_and(|d| d != 2) && g.dirs.is_none() && c.sample.directions == ["1:0"] {
        // default axis direction in the requested dimension
        let mut axis = vec!["0"; c.lattice.dim];
        axis[0] = "1";
        c.sample.directions = vec![axis.join(":")];
    }
    if c.run.out.as_os_str().is_empty() {
        c.run.out = PathBuf::from("fpp-out");
    }
    Ok(c)
}

fn envelope(input: &PathBuf, output: &PathBuf) -> Result<()> {
    let mut rd = csv::Reader::from_path(input).with_context(|| format!("cannot read {}", input.display()))?;
    let mut r = Vec::new();
    let mut f = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        if row.len() < 2 {
            bail!("line {}: expected columns r,f", i + 2);
        }
        r.push(row[0].trim().parse::<f64>().with_context(|| format!("line {}: bad r", i + 2))?);
        f.push(row[1].trim().parse::<f64>().with_context(|| format!("line {}: bad f", i + 2))?);
    }
    let env = upper_regular_envelope(&GriddedFunction::new(r, f)?)?;
    let mut text = String::from("r,f_up,case\n");
    let case = env.case.number();
    for (x, y) in env.f_up.knots().iter().zip(env.f_up.values()) {
        text.push_str(&format!("{},{},{case}\n", fmt_f64(*x), fmt_f64(*y)));
    }
    fs::write(output, text).with_context(|| format!("cannot write {}", output.display()))?;
    Ok(())
}

fn execute(cli: Cli) -> Result<ExitCode> {
    let pipeline = match cli.command {
        Command::Envelope { input } => {
            let Some(output) = &cli.global.out else { bail!("envelope needs --out FILE") };
            envelope(&input, output)?;
            return Ok(ExitCode::SUCCESS);
        }
        Command::Validate => {
            let checks = validate::run_all();
            for c in &checks {
                println!("{c}");
            }
            let ok = checks.iter().all(|c| c.passed);
            return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
        Command::Sample => Pipeline::Sample,
        Command::Shape => Pipeline::Shape,
        Command::Exponents => Pipeline::Exponents,
        Command::Wandering => Pipeline::Wandering,
        Command::Modgap => Pipeline::Modgap,
        Command::Downdev => Pipeline::Downdev,
        Command::D2d => Pipeline::D2d,
        Command::Slab => Pipeline::Slab,
        Command::Run => Pipeline::Full,
    };
    let config = load_config(&cli.global)?;
    let resolved = match config.validate() {
        Ok(r) => r,
        Err(ConfigError::Invalid(v)) => {
            eprintln!("invalid configuration:");
            for x in v {
                eprintln!("  {x}");
            }
            return Ok(ExitCode::FAILURE);
        }
        Err(e) => return Err(e.into()),
    };
    let out = resolved.config.run.out.clone();
    let manifest = runner::run(resolved, pipeline)?;
    if pipeline == Pipeline::Exponents {
        print!("{}", fs::read_to_string(out.join("exponents.json"))?);
    }
    for f in &manifest.failed_tasks {
        eprintln!("failed: {f}");
    }
    for s in &manifest.skipped {
        eprintln!("skipped: {s}");
    }
    eprintln!("wrote {} files to {}", manifest.checksums.len(), out.display());
    Ok(if manifest.ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
