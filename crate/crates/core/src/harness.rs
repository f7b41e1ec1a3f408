//! Sweeps over (body, n, k, frame, seed): closed-form and semi-empirical
//! bounds next to empirical distances, written as CSV.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::{regular_simplex, BodyKind, BodySampler, BodySpec};
use crate::config::ConstantsConfig;
use crate::error::{MgError, Result};
use crate::frames::{build_frame, frame_functionals, FrameKind};
use crate::metrics::{ks_1d, tv_hist_1d, w1_1d, w1_matching, w1_sliced, MATCHING_CAP};
use crate::rng::{substream, RandomStream};
use crate::stats::run_batches;
use crate::stein::{cor_wass_tv, estimate_pair_terms, theorem_bounds, PairSpec};

pub const CSV_HEADER: &str = "body,n,k,frame,seed,N,l4_sum,simplex_quartic,bound_d1_thm,bound_dtv_thm,bound_d1_cor,bound_dtv_cor,emp_w1,emp_w1_se,emp_ks,emp_tv,runtime_ms";

/// Directions used by the sliced estimator when matching is unaffordable.
pub const SLICED_DIRECTIONS: usize = 64;
/// Histogram used for `emp_tv`.
pub const TV_BINS: usize = 60;
pub const TV_RANGE: (f64, f64) = (-8.0, 8.0);
/// Pair statistics need at least this many samples.
pub const MIN_PAIR_SAMPLES: usize = 10_000;

/// Formats a real with 17 significant digits (round-trips exactly).
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub bodies: Vec<String>,
    pub ns: Vec<usize>,
    pub ks: Vec<usize>,
    pub frames: Vec<String>,
    pub samples: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub metrics: Vec<String>,
    #[serde(default)]
    pub constants: ConstantsConfig,
    /// Ceiling on `N * n * (k + 1)` per row; larger rows get a reduced `N`.
    #[serde(default)]
    pub max_row_work: Option<f64>,
    /// Fill `runtime_ms`. Off by default so the CSV is a pure function of the config.
    #[serde(default)]
    pub record_runtime: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    W1,
    Ks,
    Tv,
}

impl std::str::FromStr for Metric {
    type Err = MgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w1" => Ok(Metric::W1),
            "ks" => Ok(Metric::Ks),
            "tv" => Ok(Metric::Tv),
            _ => Err(MgError::invalid(format!(
                "unknown metric {s:?} (expected w1, ks, tv)"
            ))),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MgError::io(path, e))?;
        Self::from_json(&text).map_err(|msg| MgError::Parse {
            path: path.to_path_buf(),
            msg,
        })
    }

    fn parsed(&self) -> Result<(Vec<BodyKind>, Vec<FrameKind>, Vec<Metric>)> {
        if self.seeds.is_empty() {
            return Err(MgError::invalid("experiment needs at least one seed"));
        }
        if self.samples == 0 {
            return Err(MgError::invalid("experiment needs samples >= 1"));
        }
        self.constants.validate()?;
        let bodies = self
            .bodies
            .iter()
            .map(|b| b.parse())
            .collect::<Result<Vec<BodyKind>>>()?;
        let frames = self
            .frames
            .iter()
            .map(|f| f.parse())
            .collect::<Result<Vec<FrameKind>>>()?;
        let metrics = self
            .metrics
            .iter()
            .map(|m| m.parse())
            .collect::<Result<Vec<Metric>>>()?;
        Ok((bodies, frames, metrics))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub body: String,
    pub n: usize,
    pub k: usize,
    pub frame: String,
    pub seed: u64,
    pub samples: usize,
    pub l4_sum: f64,
    pub simplex_quartic: Option<f64>,
    pub bound_d1_thm: f64,
    pub bound_dtv_thm: f64,
    pub bound_d1_cor: Option<f64>,
    pub bound_dtv_cor: Option<f64>,
    pub emp_w1: Option<f64>,
    pub emp_w1_se: Option<f64>,
    pub emp_ks: Option<f64>,
    pub emp_tv: Option<f64>,
    pub runtime_ms: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    /// Skipped combinations and capped sample counts.
    pub notes: Vec<String>,
}

fn row_label(body: &str, n: usize, k: usize, frame: &str) -> u64 {
    // FNV-1a; stable across platforms and releases.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in format!("{body}|{n}|{k}|{frame}").bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn validate_combo(
    kind: BodyKind,
    n: usize,
    k: usize,
    frame: FrameKind,
) -> std::result::Result<(), String> {
    if k == 0 || k > n {
        return Err(format!("k = {k} must satisfy 1 <= k <= n = {n}"));
    }
    if matches!(kind, BodyKind::Simplex) && n < 2 {
        return Err("simplex needs n >= 2".into());
    }
    if frame == FrameKind::Walsh {
        let m = crate::frames::walsh_block(n);
        if k > m {
            return Err(format!("walsh frame needs k <= m = {m}"));
        }
    }
    if frame == FrameKind::Custom {
        return Err("custom frames cannot be swept".into());
    }
    Ok(())
}

/// Runs every valid `(body, n, k, frame, seed)` combination. Rows are
/// computed in parallel and returned sorted by that key.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (bodies, frames, metrics) = config.parsed()?;
    let mut jobs = Vec::new();
    let mut notes = Vec::new();
    for &body in &bodies {
        for &n in &config.ns {
            for &k in &config.ks {
                for &frame in &frames {
                    match validate_combo(body, n, k, frame) {
                        Ok(()) => {
                            for &seed in &config.seeds {
                                jobs.push((body, n, k, frame, seed));
                            }
                        }
                        Err(reason) => {
                            let msg =
                                format!("skipped body={body} n={n} k={k} frame={frame}: {reason}");
                            log::warn!("{msg}");
                            notes.push(msg);
                        }
                    }
                }
            }
        }
    }
    let results: Vec<Result<(ResultRow, Option<String>)>> = jobs
        .par_iter()
        .map(|&(body, n, k, frame, seed)| run_row(config, &metrics, body, n, k, frame, seed))
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        let (row, note) = r?;
        if let Some(note) = note {
            log::warn!("{note}");
            notes.push(note);
        }
        rows.push(row);
    }
    rows.sort_by(|a, b| {
        (&a.body, a.n, a.k, &a.frame, a.seed).cmp(&(&b.body, b.n, b.k, &b.frame, b.seed))
    });
    Ok(ExperimentOutput { rows, notes })
}

fn run_row(
    config: &ExperimentConfig,
    metrics: &[Metric],
    kind: BodyKind,
    n: usize,
    k: usize,
    frame_kind: FrameKind,
    seed: u64,
) -> Result<(ResultRow, Option<String>)> {
    let started = Instant::now();
    let body_label = kind.to_string();
    let frame_label = frame_kind.to_string();
    let root = substream(seed, row_label(&body_label, n, k, &frame_label));
    let frame = build_frame(frame_kind, n, k, &mut root.child(0))?;
    let body = BodySpec::new(kind, n);
    let geom = match kind {
        BodyKind::Simplex => Some(regular_simplex(n)?),
        _ => None,
    };
    let func = frame_functionals(&frame, geom.as_ref())?;
    let thm = theorem_bounds(kind, &frame, geom.as_ref(), &config.constants)?
        .into_iter()
        .next()
        .expect("at least one theorem applies");

    let mut note = None;
    let mut samples = config.samples;
    if let Some(cap) = config.max_row_work {
        let work = samples as f64 * n as f64 * (k + 1) as f64;
        if work > cap {
            samples = ((cap / (n as f64 * (k + 1) as f64)).floor() as usize).max(1);
            note = Some(format!(
                "capped N from {} to {samples} for body={body_label} n={n} k={k} frame={frame_label} seed={seed}",
                config.samples
            ));
        }
    }

    let (bound_d1_cor, bound_dtv_cor) = if samples >= MIN_PAIR_SAMPLES {
        let spec = PairSpec::new(body, frame.clone())?;
        let stats = estimate_pair_terms(&spec, samples, &root.child(1))?;
        let cor = cor_wass_tv(&stats, &config.constants);
        (cor.d1_bound, cor.dtv_bound)
    } else {
        (None, None)
    };

    let mut emp_w1 = None;
    let mut emp_w1_se = None;
    let mut emp_ks = None;
    let mut emp_tv = None;
    if !metrics.is_empty() {
        let w = projected_sample(body, &frame, samples, &root.child(2))?;
        for m in metrics {
            match (m, k) {
                (Metric::W1, 1) if samples >= 100 => {
                    let d = w1_1d(&w)?;
                    emp_w1 = Some(d.value);
                    emp_w1_se = d.se;
                }
                (Metric::W1, _) if samples <= MATCHING_CAP => {
                    let mut g = root.child(3);
                    let z: Vec<f64> = (0..w.len()).map(|_| g.normal()).collect();
                    emp_w1 = Some(w1_matching(&w, &z, k)?.value);
                }
                (Metric::W1, _) if samples >= 100 => {
                    let d = w1_sliced(&w, k, SLICED_DIRECTIONS, &mut root.child(3))?;
                    emp_w1 = Some(d.value);
                    emp_w1_se = d.se;
                }
                (Metric::Ks, 1) => emp_ks = Some(ks_1d(&w)?.value),
                (Metric::Tv, 1) => {
                    emp_tv = Some(tv_hist_1d(&w, TV_BINS, TV_RANGE.0, TV_RANGE.1)?.value)
                }
                _ => {}
            }
        }
    }

    let runtime_ms = config
        .record_runtime
        .then(|| started.elapsed().as_secs_f64() * 1e3);
    Ok((
        ResultRow {
            body: body_label,
            n,
            k,
            frame: frame_label,
            seed,
            samples,
            l4_sum: func.l4_sum,
            simplex_quartic: func.simplex_quartic,
            bound_d1_thm: thm.d1_bound.expect("theorem d1"),
            bound_dtv_thm: thm.dtv_bound.expect("theorem tv"),
            bound_d1_cor,
            bound_dtv_cor,
            emp_w1,
            emp_w1_se,
            emp_ks,
            emp_tv,
            runtime_ms,
        },
        note,
    ))
}

/// `samples` draws of `W = (<X, theta_i>)_i`, flattened row-major, generated
/// in batches on children of `stream` and concatenated in batch order.
pub fn projected_sample(
    body: BodySpec,
    frame: &crate::frames::Frame,
    samples: usize,
    stream: &RandomStream,
) -> Result<Vec<f64>> {
    let sampler = BodySampler::new(body)?;
    let k = frame.k();
    let parts = run_batches(stream, samples, |s, count| {
        let mut x = vec![0.0; body.n];
        let mut out = vec![0.0; count * k];
        for w in out.chunks_exact_mut(k) {
            sampler.draw(s, &mut x);
            frame.project_into(&x, w);
        }
        out
    });
    Ok(parts.concat())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares fit of `ln y = intercept + slope ln x`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<DecayFit> {
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 3 {
        return Err(MgError::invalid(
            "fit_decay needs at least 3 distinct n values",
        ));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(MgError::invalid("fit_decay needs positive x and y"));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(DecayFit {
        slope,
        intercept,
        r2,
    })
}

/// Fits `emp_w1` against `n` over rows belonging to one curve.
pub fn fit_decay(rows: &[ResultRow]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.emp_w1.map(|w| (r.n as f64, w)))
        .collect();
    fit_power_law(&pts)
}

pub fn to_csv(rows: &[ResultRow]) -> String {
    let o = |v: Option<f64>| v.map(fmt_real).unwrap_or_default();
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.body,
            r.n,
            r.k,
            r.frame,
            r.seed,
            r.samples,
            fmt_real(r.l4_sum),
            o(r.simplex_quartic),
            fmt_real(r.bound_d1_thm),
            fmt_real(r.bound_dtv_thm),
            o(r.bound_d1_cor),
            o(r.bound_dtv_cor),
            o(r.emp_w1),
            o(r.emp_w1_se),
            o(r.emp_ks),
            o(r.emp_tv),
            o(r.runtime_ms),
        )
        .expect("writing to a String");
    }
    out
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    std::fs::write(path, to_csv(rows)).map_err(|e| MgError::io(path, e))
}

/// Inverse of [`to_csv`].
pub fn parse_csv(text: &str) -> std::result::Result<Vec<ResultRow>, String> {
    let mut lines = text.split('\n');
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 17 {
            return Err(format!(
                "line {}: expected 17 fields, got {}",
                lineno + 2,
                f.len()
            ));
        }
        let err = |what: &str| format!("line {}: bad {what}", lineno + 2);
        let real = |s: &str, what: &str| s.parse::<f64>().map_err(|_| err(what));
        let opt = |s: &str, what: &str| -> std::result::Result<Option<f64>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                real(s, what).map(Some)
            }
        };
        let int = |s: &str, what: &str| s.parse::<usize>().map_err(|_| err(what));
        rows.push(ResultRow {
            body: f[0].to_string(),
            n: int(f[1], "n")?,
            k: int(f[2], "k")?,
            frame: f[3].to_string(),
            seed: f[4].parse().map_err(|_| err("seed"))?,
            samples: int(f[5], "N")?,
            l4_sum: real(f[6], "l4_sum")?,
            simplex_quartic: opt(f[7], "simplex_quartic")?,
            bound_d1_thm: real(f[8], "bound_d1_thm")?,
            bound_dtv_thm: real(f[9], "bound_dtv_thm")?,
            bound_d1_cor: opt(f[10], "bound_d1_cor")?,
            bound_dtv_cor: opt(f[11], "bound_dtv_cor")?,
            emp_w1: opt(f[12], "emp_w1")?,
            emp_w1_se: opt(f[13], "emp_w1_se")?,
            emp_ks: opt(f[14], "emp_ks")?,
            emp_tv: opt(f[15], "emp_tv")?,
            runtime_ms: opt(f[16], "runtime_ms")?,
        });
    }
    Ok(rows)
}
