//! Exchangeable pairs built from the symmetries of the body, exact checks of
//! the Stein linearity and second-moment conditions, Monte-Carlo estimates of
//! the error terms, and the closed-form and semi-empirical bounds.
//!
//! Both constructions have `lambda = 2/n`:
//!
//! * unconditional bodies: reflect `X` in a uniformly chosen coordinate
//!   hyperplane, `X' = X - 2 X_I e_I`;
//! * simplex: transpose two uniformly chosen vertices,
//!   `X' = X - 2 X^{IJ} u_{IJ}`.

use std::fmt;

use serde::Serialize;

use crate::bodies::{BodyKind, BodySampler, BodySpec, SimplexGeometry};
use crate::config::ConstantsConfig;
use crate::error::{MgError, Result};
use crate::frames::{dot, frame_functionals, Frame};
use crate::rng::RandomStream;
use crate::stats::{run_batches, variance, Estimate};

#[derive(Clone, Debug)]
pub struct PairSpec {
    body: BodySpec,
    frame: Frame,
    geom: Option<SimplexGeometry>,
    lambda: f64,
}

impl PairSpec {
    /// Builds the simplex geometry when the body is a simplex.
    pub fn new(body: BodySpec, frame: Frame) -> Result<Self> {
        if frame.n() != body.n {
            return Err(MgError::DimensionMismatch {
                expected: body.n,
                got: frame.n(),
            });
        }
        let geom = match body.kind {
            BodyKind::Simplex => Some(crate::bodies::regular_simplex(body.n)?),
            _ => None,
        };
        Ok(PairSpec {
            body,
            lambda: 2.0 / body.n as f64,
            frame,
            geom,
        })
    }

    pub fn body(&self) -> BodySpec {
        self.body
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn geometry(&self) -> Option<&SimplexGeometry> {
        self.geom.as_ref()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn n(&self) -> usize {
        self.body.n
    }

    fn k(&self) -> usize {
        self.frame.k()
    }
}

/// `(W, W')` for the reflection in coordinate hyperplane `index` (0-based).
pub fn reflect_pair(x: &[f64], index: usize, frame: &Frame) -> Result<(Vec<f64>, Vec<f64>)> {
    if index >= x.len() {
        return Err(MgError::invalid(format!(
            "reflection index {index} out of range 0..{}",
            x.len()
        )));
    }
    let w = frame.project(x)?;
    let mut xr = x.to_vec();
    xr[index] = -xr[index];
    let wr = frame.project(&xr)?;
    Ok((w, wr))
}

/// `(W, W')` for the transposition of vertices `i` and `j` (0-based).
pub fn transpose_pair(
    x: &[f64],
    i: usize,
    j: usize,
    geom: &SimplexGeometry,
    frame: &Frame,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let u = geom.edge(i, j)?;
    let w = frame.project(x)?;
    let c = 2.0 * dot(x, &u);
    let xt: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a - c * b).collect();
    let wt = frame.project(&xt)?;
    Ok((w, wt))
}

/// Closed-form `E_ij(x)`, the deviation of `E[(W'_i - W_i)(W'_j - W_j) | X = x]`
/// from `2 lambda delta_ij`, as a row-major `k x k` matrix.
pub fn stein_matrix(spec: &PairSpec, x: &[f64]) -> Vec<f64> {
    let k = spec.k();
    let n = spec.n() as f64;
    let mut e = vec![0.0; k * k];
    match &spec.geom {
        None => {
            // (4/n) (sum_l theta_i^l theta_j^l x_l^2 - delta_ij)
            for i in 0..k {
                let ti = spec.frame.row(i);
                for j in i..k {
                    let tj = spec.frame.row(j);
                    let s: f64 = ti
                        .iter()
                        .zip(tj)
                        .zip(x)
                        .map(|((a, b), v)| a * b * v * v)
                        .sum();
                    let val = 4.0 / n * (s - if i == j { 1.0 } else { 0.0 });
                    e[i * k + j] = val;
                    e[j * k + i] = val;
                }
            }
        }
        Some(geom) => {
            // (4/n) ((1/(n+1)) sum_{l != m} theta_i^{lm} theta_j^{lm} (x^{lm})^2 - delta_ij),
            // with the double sum expanded into power sums of the vertex products
            // (which sum to zero over the vertices).
            let big_k = n + 1.0;
            let c4 = (n / (2.0 * big_k)).powi(2);
            let gamma = geom.vertex_products(x);
            let g2: Vec<f64> = gamma.iter().map(|g| g * g).collect();
            let s_g2: f64 = g2.iter().sum();
            let alphas: Vec<Vec<f64>> =
                spec.frame.rows().map(|r| geom.vertex_products(r)).collect();
            for i in 0..k {
                for j in i..k {
                    let (a, b) = (&alphas[i], &alphas[j]);
                    let mut s_abg2 = 0.0;
                    let mut s_ab = 0.0;
                    let mut s_ag = 0.0;
                    let mut s_bg = 0.0;
                    for l in 0..gamma.len() {
                        s_abg2 += a[l] * b[l] * g2[l];
                        s_ab += a[l] * b[l];
                        s_ag += a[l] * gamma[l];
                        s_bg += b[l] * gamma[l];
                    }
                    let t = c4 * (2.0 * big_k * s_abg2 + 2.0 * s_g2 * s_ab + 4.0 * s_ag * s_bg);
                    let val = 4.0 / n * (t / big_k - if i == j { 1.0 } else { 0.0 });
                    e[i * k + j] = val;
                    e[j * k + i] = val;
                }
            }
        }
    }
    e
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionalResiduals {
    /// `max_i |avg(W'_i - W_i) + lambda W_i|`.
    pub linearity: f64,
    /// `max_ij |avg((W'_i - W_i)(W'_j - W_j)) - 2 lambda delta_ij - E_ij(x)|`.
    pub second_moment: f64,
}

/// Averages the increment and its outer product exactly over every symmetry
/// index (all `n` reflections, or all `n(n+1)` ordered transpositions) and
/// compares with the Stein conditions.
pub fn conditional_checks(x: &[f64], spec: &PairSpec) -> Result<ConditionalResiduals> {
    let k = spec.k();
    let n = spec.n();
    if x.len() != n {
        return Err(MgError::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let mut first = vec![0.0; k];
    let mut second = vec![0.0; k * k];
    let mut count = 0usize;
    let mut accumulate = |w: &[f64], wp: &[f64]| {
        let d: Vec<f64> = wp.iter().zip(w).map(|(a, b)| a - b).collect();
        for i in 0..k {
            first[i] += d[i];
            for j in 0..k {
                second[i * k + j] += d[i] * d[j];
            }
        }
        count += 1;
    };
    match &spec.geom {
        None => {
            for idx in 0..n {
                let (w, wp) = reflect_pair(x, idx, &spec.frame)?;
                accumulate(&w, &wp);
            }
        }
        Some(geom) => {
            for i in 0..=n {
                for j in 0..=n {
                    if i != j {
                        let (w, wp) = transpose_pair(x, i, j, geom, &spec.frame)?;
                        accumulate(&w, &wp);
                    }
                }
            }
        }
    }
    let w = spec.frame.project(x)?;
    let e = stein_matrix(spec, x);
    let c = count as f64;
    let linearity = (0..k)
        .map(|i| (first[i] / c + spec.lambda * w[i]).abs())
        .fold(0.0, f64::max);
    let mut second_moment = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 2.0 * spec.lambda } else { 0.0 } + e[i * k + j];
            second_moment = second_moment.max((second[i * k + j] / c - target).abs());
        }
    }
    Ok(ConditionalResiduals {
        linearity,
        second_moment,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairStatistics {
    /// `(1/lambda) E sqrt(sum_ij E_ij^2)`.
    pub term_e: Estimate,
    /// `E|W' - W|^3`.
    pub term_m3: Estimate,
    /// `Var E[(W' - W)^2 | X]`, which dominates `Var E[(W' - W)^2 | W]`; `k = 1` only.
    pub condvar_proxy: Option<Estimate>,
    pub samples: usize,
    pub k: usize,
    pub n: usize,
    pub lambda: f64,
}

/// Monte-Carlo estimate of the pair error terms over 20 batches.
///
/// `term_e` uses the closed-form `E_ij(X)`; `term_m3` draws one symmetry
/// index per sample.
pub fn estimate_pair_terms(
    spec: &PairSpec,
    samples: usize,
    stream: &RandomStream,
) -> Result<PairStatistics> {
    if samples < 10_000 {
        return Err(MgError::invalid(
            "estimate_pair_terms needs at least 10^4 samples",
        ));
    }
    let sampler = BodySampler::new(spec.body)?;
    let (n, k) = (spec.n(), spec.k());
    let inv_lambda = 1.0 / spec.lambda;
    let per_batch = run_batches(stream, samples, |s, count| {
        let mut x = vec![0.0; n];
        let mut sum_e = 0.0;
        let mut sum_m3 = 0.0;
        let mut cond = Vec::with_capacity(if k == 1 { count } else { 0 });
        let mut delta = vec![0.0; k];
        for _ in 0..count {
            sampler.draw(s, &mut x);
            let e = stein_matrix(spec, &x);
            sum_e += inv_lambda * e.iter().map(|v| v * v).sum::<f64>().sqrt();
            match &spec.geom {
                None => {
                    let idx = s.index(n);
                    for (d, row) in delta.iter_mut().zip(spec.frame.rows()) {
                        *d = -2.0 * row[idx] * x[idx];
                    }
                }
                Some(geom) => {
                    let i = s.index(n + 1);
                    let mut j = s.index(n);
                    if j >= i {
                        j += 1;
                    }
                    let u = geom.edge(i, j).expect("distinct vertices");
                    let xij = dot(&x, &u);
                    for (d, row) in delta.iter_mut().zip(spec.frame.rows()) {
                        *d = -2.0 * xij * dot(row, &u);
                    }
                }
            }
            sum_m3 += delta.iter().map(|d| d * d).sum::<f64>().powf(1.5);
            if k == 1 {
                cond.push(2.0 * spec.lambda + e[0]);
            }
        }
        let c = count as f64;
        let cv = if k == 1 { variance(&cond) } else { f64::NAN };
        (sum_e / c, sum_m3 / c, cv)
    });
    let col = |f: fn(&(f64, f64, f64)) -> f64| per_batch.iter().map(f).collect::<Vec<_>>();
    Ok(PairStatistics {
        term_e: Estimate::from_batches(&col(|b| b.0)),
        term_m3: Estimate::from_batches(&col(|b| b.1)),
        condvar_proxy: (k == 1).then(|| Estimate::from_batches(&col(|b| b.2))),
        samples,
        k,
        n,
        lambda: spec.lambda,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BoundSource {
    Thm1,
    Thm2,
    Thm3,
    CorWassTv,
    CorTvUniv,
    PropCmD2,
    PropStein,
}

impl fmt::Display for BoundSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundSource::Thm1 => "thm1",
            BoundSource::Thm2 => "thm2",
            BoundSource::Thm3 => "thm3",
            BoundSource::CorWassTv => "cor-wass-tv",
            BoundSource::CorTvUniv => "cor-tv-univ",
            BoundSource::PropCmD2 => "prop-cm-d2",
            BoundSource::PropStein => "prop-stein",
        })
    }
}

/// A set of bound values from one source. TV entries are "configured
/// constant times expression"; `dtv_explicit` is the fully explicit
/// smoothing form that only depends on `c_smooth`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub source: BoundSource,
    pub d1_bound: Option<f64>,
    pub dtv_bound: Option<f64>,
    pub dtv_explicit: Option<f64>,
    pub d2_bound: Option<f64>,
    /// Bounded-Lipschitz style bound (`||g||_inf, ||g'||_inf <= 1`).
    pub dbl_bound: Option<f64>,
    pub constants_used: ConstantsConfig,
}

impl BoundReport {
    fn empty(source: BoundSource, constants: &ConstantsConfig) -> Self {
        BoundReport {
            source,
            d1_bound: None,
            dtv_bound: None,
            dtv_explicit: None,
            d2_bound: None,
            dbl_bound: None,
            constants_used: *constants,
        }
    }

    pub const CSV_HEADER: &'static str =
        "source,d1_bound,dtv_bound,dtv_explicit,d2_bound,dbl_bound,C_tv_multi,c_smooth,C_tv_simplex1d";

    pub fn csv_row(&self) -> String {
        let o = |v: Option<f64>| v.map(crate::harness::fmt_real).unwrap_or_default();
        let c = &self.constants_used;
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.source,
            o(self.d1_bound),
            o(self.dtv_bound),
            o(self.dtv_explicit),
            o(self.d2_bound),
            o(self.dbl_bound),
            crate::harness::fmt_real(c.c_tv_multi),
            crate::harness::fmt_real(c.c_smooth),
            crate::harness::fmt_real(c.c_tv_simplex1d),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Theorem {
    /// Unconditional log-concave bodies.
    Unconditional,
    /// Regular simplex, any `k`.
    Simplex,
    /// Regular simplex, `k = 1`, total variation.
    SimplexUnivariate,
}

/// Closed-form bound of one theorem.
pub fn theorem_bound(
    theorem: Theorem,
    frame: &Frame,
    geom: Option<&SimplexGeometry>,
    constants: &ConstantsConfig,
) -> Result<BoundReport> {
    let k = frame.k() as f64;
    match theorem {
        Theorem::Unconditional => {
            let s = frame_functionals(frame, None)?.l4_sum;
            let mut r = BoundReport::empty(BoundSource::Thm1, constants);
            r.d1_bound = Some(14.0 * (k * s).sqrt());
            r.dtv_bound = Some(constants.c_tv_multi * k.powf(5.0 / 6.0) * s.cbrt());
            Ok(r)
        }
        Theorem::Simplex => {
            let g =
                geom.ok_or_else(|| MgError::invalid("simplex bound needs the simplex geometry"))?;
            let q = frame_functionals(frame, Some(g))?
                .simplex_quartic
                .expect("geometry supplied");
            let mut r = BoundReport::empty(BoundSource::Thm2, constants);
            r.d1_bound = Some(20.0 * (k * q).sqrt());
            r.dtv_bound = Some(constants.c_tv_multi * k.powf(5.0 / 6.0) * q.cbrt());
            Ok(r)
        }
        Theorem::SimplexUnivariate => {
            let g =
                geom.ok_or_else(|| MgError::invalid("simplex bound needs the simplex geometry"))?;
            let cubic = crate::frames::simplex_cubic(frame, g)?;
            let mut r = BoundReport::empty(BoundSource::Thm3, constants);
            r.dtv_bound = Some(constants.c_tv_simplex1d * cubic.sqrt());
            Ok(r)
        }
    }
}

/// Every theorem that applies to `kind` and the frame's `k`.
pub fn theorem_bounds(
    kind: BodyKind,
    frame: &Frame,
    geom: Option<&SimplexGeometry>,
    constants: &ConstantsConfig,
) -> Result<Vec<BoundReport>> {
    if kind.is_unconditional() {
        return Ok(vec![theorem_bound(
            Theorem::Unconditional,
            frame,
            None,
            constants,
        )?]);
    }
    let mut out = vec![theorem_bound(Theorem::Simplex, frame, geom, constants)?];
    if frame.k() == 1 {
        out.push(theorem_bound(
            Theorem::SimplexUnivariate,
            frame,
            geom,
            constants,
        )?);
    }
    Ok(out)
}

/// `term_e + k^{1/4} sqrt((2/(3 lambda)) term_m3)`.
pub fn wasserstein_bound(term_e: f64, term_m3: f64, k: usize, lambda: f64) -> f64 {
    term_e + (k as f64).powf(0.25) * (2.0 / (3.0 * lambda) * term_m3).sqrt()
}

/// `C (k term_e + (k^2/lambda) term_m3)^{1/3}`.
pub fn tv_bound(term_e: f64, term_m3: f64, k: usize, lambda: f64, c: f64) -> f64 {
    let k = k as f64;
    c * (k * term_e + k * k / lambda * term_m3).cbrt()
}

/// Minimum over `t` of `(A + 2B/(ck))/t^2 + ckt`, capped at 2, with
/// `A = sqrt(pi)/(12 lambda) term_m3` and `B = (sqrt 2/pi) term_e`.
pub fn tv_bound_explicit(term_e: f64, term_m3: f64, k: usize, lambda: f64, c_smooth: f64) -> f64 {
    let ck = c_smooth * k as f64;
    let a = std::f64::consts::PI.sqrt() / (12.0 * lambda) * term_m3;
    let b = std::f64::consts::SQRT_2 / std::f64::consts::PI * term_e;
    let d = a + 2.0 * b / ck;
    let opt = 3.0 * 2f64.powf(-2.0 / 3.0) * ck.powf(2.0 / 3.0) * d.cbrt();
    opt.min(2.0)
}

/// `(1/lambda) sqrt(condvar) + 2 sqrt(term_m3 / lambda)`.
pub fn tv_univariate_bound(condvar: f64, term_m3: f64, lambda: f64) -> f64 {
    condvar.max(0.0).sqrt() / lambda + 2.0 * (term_m3 / lambda).sqrt()
}

/// Smooth-test-function bound with `M_1 = M_2 = 1`:
/// `term_e + sqrt(2 pi)/(24 lambda) term_m3`.
pub fn smooth_bound(term_e: f64, term_m3: f64, lambda: f64) -> f64 {
    term_e + (2.0 * std::f64::consts::PI).sqrt() / (24.0 * lambda) * term_m3
}

/// Univariate bound for `||g||_inf, ||g'||_inf <= 1`:
/// `(1/lambda) sqrt(condvar) + term_m3 / (4 lambda)`.
pub fn univariate_smooth_bound(condvar: f64, term_m3: f64, lambda: f64) -> f64 {
    condvar.max(0.0).sqrt() / lambda + term_m3 / (4.0 * lambda)
}

/// The multivariate corollary (Wasserstein + TV) from estimated terms.
pub fn cor_wass_tv(stats: &PairStatistics, constants: &ConstantsConfig) -> BoundReport {
    let (e, m3) = (stats.term_e.value, stats.term_m3.value);
    let mut r = BoundReport::empty(BoundSource::CorWassTv, constants);
    r.d1_bound = Some(wasserstein_bound(e, m3, stats.k, stats.lambda));
    r.dtv_bound = Some(tv_bound(e, m3, stats.k, stats.lambda, constants.c_tv_multi));
    r.dtv_explicit = Some(tv_bound_explicit(
        e,
        m3,
        stats.k,
        stats.lambda,
        constants.c_smooth,
    ));
    r
}

/// The univariate TV corollary, using the `X`-conditioned variance proxy.
pub fn cor_tv_univ(stats: &PairStatistics, constants: &ConstantsConfig) -> Result<BoundReport> {
    let cv = univariate_condvar(stats, "cor-tv-univ")?;
    let mut r = BoundReport::empty(BoundSource::CorTvUniv, constants);
    r.dtv_bound = Some(tv_univariate_bound(cv, stats.term_m3.value, stats.lambda));
    Ok(r)
}

fn univariate_condvar(stats: &PairStatistics, what: &'static str) -> Result<f64> {
    if stats.k != 1 {
        return Err(MgError::RequiresUnivariate { what, k: stats.k });
    }
    stats
        .condvar_proxy
        .map(|c| c.value)
        .ok_or_else(|| MgError::invalid("conditional-variance proxy missing"))
}

/// All corollary-level bounds that apply to `stats`.
pub fn corollary_bounds(stats: &PairStatistics, constants: &ConstantsConfig) -> Vec<BoundReport> {
    let mut out = vec![cor_wass_tv(stats, constants)];
    let mut d2 = BoundReport::empty(BoundSource::PropCmD2, constants);
    d2.d2_bound = Some(smooth_bound(
        stats.term_e.value,
        stats.term_m3.value,
        stats.lambda,
    ));
    out.push(d2);
    if stats.k == 1 {
        if let (Ok(tv), Ok(cv)) = (
            cor_tv_univ(stats, constants),
            univariate_condvar(stats, "prop-stein"),
        ) {
            out.push(tv);
            let mut st = BoundReport::empty(BoundSource::PropStein, constants);
            st.dbl_bound = Some(univariate_smooth_bound(
                cv,
                stats.term_m3.value,
                stats.lambda,
            ));
            out.push(st);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::regular_simplex;
    use crate::frames::{coordinate_frame, haar_frame, walsh_frame};
    use crate::rng::substream;

    #[test]
    fn reflection_increment_by_hand() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let f = Frame::custom(vec![vec![h, h]]).unwrap();
        let (w, wp) = reflect_pair(&[1.0, 2.0], 0, &f).unwrap();
        assert!((wp[0] - w[0] + 2f64.sqrt()).abs() < 1e-14);
        let (w, wp) = reflect_pair(&[0.0, 2.0], 0, &f).unwrap();
        assert_eq!(w, wp);
        assert!(reflect_pair(&[0.0, 2.0], 2, &f).is_err());
    }

    #[test]
    fn transposition_fixes_opposite_axis() {
        let g = regular_simplex(2).unwrap();
        let f = Frame::custom(vec![vec![0.6, 0.8]]).unwrap();
        let x: Vec<f64> = g.vertex(0).iter().map(|v| v * g.scale()).collect();
        let (w, wp) = transpose_pair(&x, 1, 2, &g, &f).unwrap();
        assert!((w[0] - wp[0]).abs() < 1e-12);
        assert!(transpose_pair(&x, 1, 1, &g, &f).is_err());
    }

    #[test]
    fn transposition_is_isometry() {
        let n = 7;
        let g = regular_simplex(n).unwrap();
        let f = coordinate_frame(n, n).unwrap();
        let mut s = substream(3, 3);
        let x: Vec<f64> = (0..n).map(|_| s.normal()).collect();
        let (w, wp) = transpose_pair(&x, 2, 5, &g, &f).unwrap();
        assert!((dot(&w, &w) - dot(&wp, &wp)).abs() < 1e-12);
    }

    #[test]
    fn conditional_checks_product_and_simplex() {
        let mut s = substream(5, 5);
        let spec = PairSpec::new(
            BodySpec::new(BodyKind::ProductUniform, 16),
            walsh_frame(16, 3).unwrap(),
        )
        .unwrap();
        let x: Vec<f64> = (0..16).map(|_| s.normal()).collect();
        let r = conditional_checks(&x, &spec).unwrap();
        assert!(r.linearity < 1e-10 && r.second_moment < 1e-10, "{r:?}");

        let frame = haar_frame(8, 2, &mut s).unwrap();
        let spec = PairSpec::new(BodySpec::new(BodyKind::Simplex, 8), frame).unwrap();
        let x: Vec<f64> = (0..8).map(|_| s.normal()).collect();
        let r = conditional_checks(&x, &spec).unwrap();
        assert!(r.linearity < 1e-10 && r.second_moment < 1e-10, "{r:?}");

        let r = conditional_checks(&[0.0; 8], &spec).unwrap();
        assert_eq!(r.linearity, 0.0);
        // at x = 0 the increments vanish and E_ij = -(4/n) delta_ij cancels 2 lambda
        assert!(r.second_moment < 1e-15);
    }

    #[test]
    fn theorem_values() {
        let c = ConstantsConfig::default();
        let r = theorem_bound(
            Theorem::Unconditional,
            &walsh_frame(256, 2).unwrap(),
            None,
            &c,
        )
        .unwrap();
        assert!((r.d1_bound.unwrap() - 7.0).abs() < 1e-12);
        let r = theorem_bound(
            Theorem::Unconditional,
            &walsh_frame(64, 1).unwrap(),
            None,
            &c,
        )
        .unwrap();
        assert!((r.d1_bound.unwrap() - 14.0 * 64f64.powf(-0.25)).abs() < 1e-12);
        assert!((r.d1_bound.unwrap() - 4.9497).abs() < 1e-4);
        let r = theorem_bound(
            Theorem::Unconditional,
            &coordinate_frame(5, 1).unwrap(),
            None,
            &c,
        )
        .unwrap();
        assert_eq!(r.d1_bound.unwrap(), 14.0);

        let g = regular_simplex(2).unwrap();
        let f = Frame::custom(vec![vec![1.0, 0.0]]).unwrap();
        let r = theorem_bound(Theorem::SimplexUnivariate, &f, Some(&g), &c).unwrap();
        assert!((r.dtv_bound.unwrap() - 1.29904f64.sqrt()).abs() < 1e-5);
        assert!((r.dtv_bound.unwrap() - 1.1398).abs() < 1e-4);

        let f2 = coordinate_frame(2, 2).unwrap();
        assert!(theorem_bound(Theorem::SimplexUnivariate, &f2, Some(&g), &c).is_err());
    }

    #[test]
    fn corollary_formula_substitution() {
        let (a, b, n) = (0.3, 0.02, 50usize);
        let lambda = 2.0 / n as f64;
        let d1 = wasserstein_bound(a, b, 1, lambda);
        assert!((d1 - (a + (2.0 / (3.0 * lambda) * b).sqrt())).abs() < 1e-15);
        assert!((d1 - (a + (n as f64 * b / 3.0).sqrt())).abs() < 1e-14);
        let tv = tv_bound(a, b, 2, lambda, 3.0);
        assert!((tv - 3.0 * (2.0 * a + 4.0 / lambda * b).cbrt()).abs() < 1e-14);
    }

    #[test]
    fn explicit_tv_is_the_minimum_over_t() {
        let (e, m3, k, lambda, c) = (0.4, 0.01, 2usize, 0.05, 1.3);
        let ck = c * k as f64;
        let a = std::f64::consts::PI.sqrt() / (12.0 * lambda) * m3;
        let b = 2f64.sqrt() / std::f64::consts::PI * e;
        let d = a + 2.0 * b / ck;
        let brute = (1..200_000)
            .map(|i| {
                let t = i as f64 * 1e-5;
                d / (t * t) + ck * t
            })
            .fold(f64::INFINITY, f64::min);
        let ours = tv_bound_explicit(e, m3, k, lambda, c);
        assert!((ours - brute.min(2.0)).abs() < 1e-6, "{ours} vs {brute}");
    }

    #[test]
    fn tv_univ_rejects_multivariate() {
        let stats = PairStatistics {
            term_e: Estimate {
                value: 1.0,
                se: 0.0,
            },
            term_m3: Estimate {
                value: 1.0,
                se: 0.0,
            },
            condvar_proxy: None,
            samples: 1,
            k: 2,
            n: 10,
            lambda: 0.2,
        };
        assert!(matches!(
            cor_tv_univ(&stats, &ConstantsConfig::default()),
            Err(MgError::RequiresUnivariate { .. })
        ));
        assert_eq!(
            corollary_bounds(&stats, &ConstantsConfig::default()).len(),
            2
        );
    }

    #[test]
    fn pair_spec_validates_dimensions() {
        let f = walsh_frame(8, 1).unwrap();
        assert!(PairSpec::new(BodySpec::new(BodyKind::ProductGaussian, 9), f.clone()).is_err());
        let p = PairSpec::new(BodySpec::new(BodyKind::Simplex, 8), f.clone()).unwrap();
        assert!(p.geometry().is_some());
        assert_eq!(p.lambda(), 0.25);
        let p = PairSpec::new(BodySpec::new(BodyKind::ProductLaplace, 8), f).unwrap();
        assert!(p.geometry().is_none());
    }
}
