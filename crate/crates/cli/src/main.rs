use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use mg_core::bodies::{regular_simplex, sample_body, BodyKind, BodySampler, BodySpec};
use mg_core::config::ConstantsConfig;
use mg_core::frames::{build_frame, frame_functionals, FrameKind};
use mg_core::gauss::{convolve_l1, Grid, ShippedDensity};
use mg_core::harness::{emit_csv, fmt_real, projected_sample, run_experiment, ExperimentConfig};
use mg_core::metrics::{
    ks_1d, tv_hist_1d, w1_1d, w1_matching, w1_sliced, DistanceEstimate, MATCHING_CAP,
};
use mg_core::rng::{seed_from_env, substream};
use mg_core::stein::{
    conditional_checks, corollary_bounds, estimate_pair_terms, theorem_bounds, BoundReport,
    PairSpec,
};

/// Residual threshold for `verify pair`.
const STEIN_TOL: f64 = 1e-10;

// Fixed stream ids so each subcommand is a pure function of its arguments.
const STREAM_FRAME: u64 = 1;
const STREAM_SAMPLE: u64 = 2;
const STREAM_VERIFY: u64 = 3;
const STREAM_PAIR: u64 = 4;
const STREAM_DISTANCE: u64 = 5;
const STREAM_REFERENCE: u64 = 6;

#[derive(Parser)]
#[command(
    name = "mg",
    version,
    about = "Gaussian marginals of convex bodies: bounds, checks, experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print frame functionals as one CSV row.
    Frames {
        #[arg(long)]
        kind: FrameKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print a header line first.
        #[arg(long)]
        header: bool,
    },
    /// Write isotropic samples of a body as CSV, one point per line.
    Sample {
        #[arg(long)]
        body: BodyKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact checks of the exchangeable-pair conditions.
    Verify {
        #[command(subcommand)]
        what: VerifyCommand,
    },
    /// Theorem bounds, plus corollary bounds when `--samples` is given.
    Bounds {
        #[command(flatten)]
        setup: Setup,
        #[arg(long)]
        constants: Option<PathBuf>,
        /// Monte-Carlo samples for the corollary terms (at least 10000).
        #[arg(long)]
        samples: Option<usize>,
    },
    /// L1 smoothing error of a shipped 1-D density.
    Smoothing {
        #[arg(long)]
        density: ShippedDensity,
        #[arg(long)]
        t: f64,
    },
    /// Empirical distance between a projected body and the Gaussian.
    Distance {
        #[arg(long)]
        metric: DistanceMetric,
        #[command(flatten)]
        setup: Setup,
        #[arg(long)]
        samples: usize,
    },
    /// Run a parameter sweep and write the results CSV.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        constants: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Linearity and second-moment residuals over random points.
    Pair {
        #[command(flatten)]
        setup: Setup,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

#[derive(Args)]
struct Setup {
    #[arg(long)]
    body: BodyKind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    frame: FrameKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum DistanceMetric {
    W1,
    Ks,
    Tv,
}

struct Built {
    spec: PairSpec,
    seed: u64,
}

impl Setup {
    fn build(&self) -> anyhow::Result<Built> {
        let seed = seed_from_env(self.seed)?;
        let frame = build_frame(
            self.frame,
            self.n,
            self.k,
            &mut substream(seed, STREAM_FRAME),
        )?;
        let spec = PairSpec::new(BodySpec::new(self.body, self.n), frame)?;
        Ok(Built { spec, seed })
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns `Ok(false)` when a verification ran but failed.
fn run(command: Command) -> anyhow::Result<bool> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Frames {
            kind,
            n,
            k,
            seed,
            header,
        } => {
            let seed = seed_from_env(seed)?;
            let frame = build_frame(kind, n, k, &mut substream(seed, STREAM_FRAME))?;
            let geom = if n >= 2 {
                Some(regular_simplex(n)?)
            } else {
                None
            };
            let f = frame_functionals(&frame, geom.as_ref())?;
            if header {
                writeln!(out, "kind,n,k,seed,l4_sum,l3_sum,simplex_quartic,simplex_cubic,orthonormality_residual")?;
            }
            let o = |v: Option<f64>| v.map(fmt_real).unwrap_or_default();
            writeln!(
                out,
                "{kind},{n},{k},{seed},{},{},{},{},{}",
                fmt_real(f.l4_sum),
                fmt_real(f.l3_sum),
                o(f.simplex_quartic),
                o(f.simplex_cubic),
                fmt_real(frame.orthonormality_residual()),
            )?;
        }
        Command::Sample {
            body,
            n,
            count,
            seed,
            out: path,
        } => {
            let seed = seed_from_env(seed)?;
            let batch = sample_body(
                BodySpec::new(body, n),
                &mut substream(seed, STREAM_SAMPLE),
                count,
            )?;
            let mut text = String::with_capacity(count * n * 24);
            for p in batch.iter() {
                let line: Vec<String> = p.iter().map(|&v| fmt_real(v)).collect();
                text.push_str(&line.join(","));
                text.push('\n');
            }
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        Command::Verify {
            what: VerifyCommand::Pair { setup, samples },
        } => {
            let Built { spec, seed } = setup.build()?;
            if samples == 0 {
                bail!("--samples must be at least 1");
            }
            let sampler = BodySampler::new(spec.body())?;
            let mut stream = substream(seed, STREAM_VERIFY);
            let mut x = vec![0.0; setup.n];
            let (mut lin, mut sec) = (0.0f64, 0.0f64);
            for _ in 0..samples {
                sampler.draw(&mut stream, &mut x);
                let r = conditional_checks(&x, &spec)?;
                lin = lin.max(r.linearity);
                sec = sec.max(r.second_moment);
            }
            let pass = lin < STEIN_TOL && sec < STEIN_TOL;
            writeln!(
                out,
                "linearity_residual,second_moment_residual,samples,pass"
            )?;
            writeln!(out, "{},{},{samples},{pass}", fmt_real(lin), fmt_real(sec))?;
            return Ok(pass);
        }
        Command::Bounds {
            setup,
            constants,
            samples,
        } => {
            let Built { spec, seed } = setup.build()?;
            let constants = match constants {
                Some(p) => ConstantsConfig::load(&p)?,
                None => ConstantsConfig::default(),
            };
            let mut reports: Vec<BoundReport> =
                theorem_bounds(setup.body, spec.frame(), spec.geometry(), &constants)?;
            if let Some(samples) = samples {
                let stats = estimate_pair_terms(&spec, samples, &substream(seed, STREAM_PAIR))?;
                reports.extend(corollary_bounds(&stats, &constants));
            }
            writeln!(out, "{}", BoundReport::CSV_HEADER)?;
            for r in &reports {
                writeln!(out, "{}", r.csv_row())?;
            }
        }
        Command::Smoothing { density, t } => {
            let f = density.on(Grid::default());
            let lhs = convolve_l1(&f, t)?.distance;
            let bound = 2.0 * std::f64::consts::SQRT_2 * t;
            writeln!(out, "density,t,lhs,bound,ratio")?;
            writeln!(
                out,
                "{density},{},{},{},{}",
                fmt_real(t),
                fmt_real(lhs),
                fmt_real(bound),
                fmt_real(lhs / bound)
            )?;
        }
        Command::Distance {
            metric,
            setup,
            samples,
        } => {
            let Built { spec, seed } = setup.build()?;
            let k = setup.k;
            let w = projected_sample(
                spec.body(),
                spec.frame(),
                samples,
                &substream(seed, STREAM_DISTANCE),
            )?;
            let est: DistanceEstimate = match metric {
                DistanceMetric::W1 if k == 1 => w1_1d(&w)?,
                DistanceMetric::W1 if samples <= MATCHING_CAP => {
                    let mut g = substream(seed, STREAM_REFERENCE);
                    let z: Vec<f64> = (0..w.len()).map(|_| g.normal()).collect();
                    w1_matching(&w, &z, k)?
                }
                DistanceMetric::W1 => w1_sliced(
                    &w,
                    k,
                    mg_core::harness::SLICED_DIRECTIONS,
                    &mut substream(seed, STREAM_REFERENCE),
                )?,
                DistanceMetric::Ks | DistanceMetric::Tv if k != 1 => bail!("ks and tv need k = 1"),
                DistanceMetric::Ks => ks_1d(&w)?,
                DistanceMetric::Tv => tv_hist_1d(
                    &w,
                    mg_core::harness::TV_BINS,
                    mg_core::harness::TV_RANGE.0,
                    mg_core::harness::TV_RANGE.1,
                )?,
            };
            writeln!(out, "{}", DistanceEstimate::CSV_HEADER)?;
            writeln!(out, "{}", est.csv_row())?;
        }
        Command::Experiment {
            config,
            out: path,
            constants,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(p) = constants {
                cfg.constants = ConstantsConfig::load(&p)?;
            }
            if std::env::var_os(mg_core::rng::SEED_ENV).is_some() {
                cfg.seeds = vec![seed_from_env(0)?];
            }
            let result = run_experiment(&cfg)?;
            emit_csv(&result.rows, &path)?;
            if !result.notes.is_empty() {
                let mut notes_path = path.clone().into_os_string();
                notes_path.push(".notes");
                let notes_path = PathBuf::from(notes_path);
                std::fs::write(&notes_path, result.notes.join("\n") + "\n")
                    .with_context(|| format!("writing {}", notes_path.display()))?;
            }
            log::info!("wrote {} rows to {}", result.rows.len(), path.display());
        }
    }
    Ok(true)
}
