//! Isotropic log-concave bodies: samplers, regular-simplex geometry, and the
//! moment identities and inequalities used by the pair constructions.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Gamma};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{MgError, Result};
use crate::frames::dot;
use crate::rng::RandomStream;
use crate::stats::{run_batches, variance, Estimate};

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum BodyKind {
    ProductUniform,
    ProductLaplace,
    ProductGaussian,
    /// Uniform on the unit `l_p` ball (`p >= 1`, `p = inf` allowed).
    LpBall(f64),
    Simplex,
}

impl BodyKind {
    /// Invariant under every coordinate sign flip.
    pub fn is_unconditional(&self) -> bool {
        !matches!(self, BodyKind::Simplex)
    }

    pub fn is_product(&self) -> bool {
        matches!(
            self,
            BodyKind::ProductUniform | BodyKind::ProductLaplace | BodyKind::ProductGaussian
        )
    }
}

impl fmt::Display for BodyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodyKind::ProductUniform => f.write_str("product-uniform"),
            BodyKind::ProductLaplace => f.write_str("product-laplace"),
            BodyKind::ProductGaussian => f.write_str("product-gaussian"),
            BodyKind::LpBall(p) if p.is_infinite() => f.write_str("lp-ball:inf"),
            BodyKind::LpBall(p) => write!(f, "lp-ball:{p}"),
            BodyKind::Simplex => f.write_str("simplex"),
        }
    }
}

impl FromStr for BodyKind {
    type Err = MgError;

    /// Accepts `product-uniform`, `product-laplace`, `product-gaussian`,
    /// `simplex`, and `lp-ball:P` (also `lp-ball(P)`), with `P` a real `>= 1`
    /// or `inf`.
    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "product-uniform" => BodyKind::ProductUniform,
            "product-laplace" => BodyKind::ProductLaplace,
            "product-gaussian" => BodyKind::ProductGaussian,
            "simplex" => BodyKind::Simplex,
            _ => {
                let p = s
                    .strip_prefix("lp-ball:")
                    .or_else(|| s.strip_prefix("lp-ball(").and_then(|r| r.strip_suffix(')')))
                    .ok_or_else(|| MgError::invalid(format!("unknown body kind {s:?}")))?;
                let p: f64 = match p {
                    "inf" | "infinity" => f64::INFINITY,
                    _ => p
                        .parse()
                        .map_err(|_| MgError::invalid(format!("bad l_p exponent in {s:?}")))?,
                };
                BodyKind::LpBall(p)
            }
        };
        if let BodyKind::LpBall(p) = kind {
            if p.is_nan() || p < 1.0 {
                return Err(MgError::invalid(format!("l_p ball needs p >= 1, got {p}")));
            }
        }
        Ok(kind)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BodySpec {
    pub kind: BodyKind,
    pub n: usize,
}

impl BodySpec {
    pub fn new(kind: BodyKind, n: usize) -> Self {
        BodySpec { kind, n }
    }
}

/// Vertices `v_1..v_{n+1}` of a centered regular simplex with unit vertices,
/// together with the body scale `sqrt(n(n+2))`.
///
/// The vertices are the images of `e_l - 1/(n+1)` under the Helmert basis of
/// the hyperplane `1^perp` in `R^{n+1}`, rescaled to unit length. Helmert
/// row `k` (1-based) is `(1, ..., 1, -k, 0, ...)/sqrt(k(k+1))`, so both the
/// embedding and its adjoint are prefix/suffix sums and cost `O(n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexGeometry {
    n: usize,
    vertices: Vec<f64>,
    scale: f64,
}

/// Builds the regular simplex in `R^n` (`n >= 2`).
pub fn regular_simplex(n: usize) -> Result<SimplexGeometry> {
    if n < 2 {
        return Err(MgError::invalid(format!(
            "regular_simplex needs n >= 2, got {n}"
        )));
    }
    let r = ((n + 1) as f64 / n as f64).sqrt();
    let mut vertices = vec![0.0; (n + 1) * n];
    for l in 0..=n {
        let mut e = vec![0.0; n + 1];
        e[l] = 1.0;
        let col = helmert(&e);
        for (k, c) in col.into_iter().enumerate() {
            vertices[l * n + k] = r * c;
        }
    }
    Ok(SimplexGeometry {
        n,
        vertices,
        scale: ((n * (n + 2)) as f64).sqrt(),
    })
}

/// `H y` for `y` in `R^{n+1}`; returns a vector in `R^n`.
fn helmert(y: &[f64]) -> Vec<f64> {
    let n = y.len() - 1;
    let mut out = Vec::with_capacity(n);
    let mut prefix = 0.0;
    for k in 1..=n {
        prefix += y[k - 1];
        out.push((prefix - k as f64 * y[k]) / ((k * (k + 1)) as f64).sqrt());
    }
    out
}

/// `H^T z` for `z` in `R^n`; returns a vector in `R^{n+1}` orthogonal to `1`.
fn helmert_adjoint(z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let mut out = vec![0.0; n + 1];
    let mut suffix = 0.0;
    for j in (0..=n).rev() {
        // rows k > j contribute z_k / sqrt(k(k+1)); row k = j contributes -j z_j / sqrt(j(j+1))
        let own = if j >= 1 {
            -(j as f64) * z[j - 1] / ((j * (j + 1)) as f64).sqrt()
        } else {
            0.0
        };
        out[j] = own + suffix;
        if j >= 1 {
            suffix += z[j - 1] / ((j * (j + 1)) as f64).sqrt();
        }
    }
    out
}

impl SimplexGeometry {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `sqrt(n(n+2))`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Unit vertex `v_l`, `l` in `0..=n`.
    pub fn vertex(&self, l: usize) -> &[f64] {
        &self.vertices[l * self.n..(l + 1) * self.n]
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[f64]> {
        self.vertices.chunks_exact(self.n)
    }

    /// `(<x, v_l>)_{l=0..=n}` in `O(n)`.
    pub fn vertex_products(&self, x: &[f64]) -> Vec<f64> {
        let r = ((self.n + 1) as f64 / self.n as f64).sqrt();
        let mut out = helmert_adjoint(x);
        out.iter_mut().for_each(|v| *v *= r);
        out
    }

    /// `sum_l c_l v_l` in `O(n)`, for barycentric weights summing to one.
    pub fn combine(&self, c: &[f64]) -> Vec<f64> {
        let r = ((self.n + 1) as f64 / self.n as f64).sqrt();
        let mut out = helmert(c);
        out.iter_mut().for_each(|v| *v *= r);
        out
    }

    /// Normalizing factor of the edge directions, `sqrt(n / (2(n+1)))`.
    pub fn edge_factor(&self) -> f64 {
        (self.n as f64 / (2.0 * (self.n + 1) as f64)).sqrt()
    }

    /// Unit edge direction `u_ij = sqrt(n/(2(n+1))) (v_i - v_j)`.
    pub fn edge(&self, i: usize, j: usize) -> Result<Vec<f64>> {
        self.check_pair(i, j)?;
        let c = self.edge_factor();
        Ok(self
            .vertex(i)
            .iter()
            .zip(self.vertex(j))
            .map(|(a, b)| c * (a - b))
            .collect())
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(MgError::invalid("edge indices must differ"));
        }
        if i > self.n || j > self.n {
            return Err(MgError::invalid(format!(
                "edge index out of range 0..={} (got {i}, {j})",
                self.n
            )));
        }
        Ok(())
    }
}

/// `x^{ij} = <x, u_ij>`; vertex indices are 0-based (`0..=n`).
pub fn edge_functional(geom: &SimplexGeometry, x: &[f64], i: usize, j: usize) -> Result<f64> {
    geom.check_pair(i, j)?;
    if x.len() != geom.n {
        return Err(MgError::DimensionMismatch {
            expected: geom.n,
            got: x.len(),
        });
    }
    Ok(geom.edge_factor() * (dot(x, geom.vertex(i)) - dot(x, geom.vertex(j))))
}

/// Per-body state needed to draw points.
#[derive(Clone, Debug)]
pub struct BodySampler {
    spec: BodySpec,
    inner: SamplerKind,
}

#[derive(Clone, Debug)]
enum SamplerKind {
    Uniform,
    Laplace,
    Gaussian,
    LpBall {
        p: f64,
        radial: Gamma<f64>,
        rescale: f64,
    },
    Cube,
    Simplex {
        geom: SimplexGeometry,
        rescale: f64,
    },
}

/// Coordinate variance of the uniform law on the unit `l_p` ball in `R^n`:
/// `Gamma(3/p) Gamma(1 + n/p) / (Gamma(1/p) Gamma(1 + (n+2)/p))`.
pub fn lp_ball_coordinate_variance(p: f64, n: usize) -> f64 {
    if p.is_infinite() {
        return 1.0 / 3.0;
    }
    let n = n as f64;
    (ln_gamma(3.0 / p) + ln_gamma(1.0 + n / p) - ln_gamma(1.0 / p) - ln_gamma(1.0 + (n + 2.0) / p))
        .exp()
}

impl BodySampler {
    pub fn new(spec: BodySpec) -> Result<Self> {
        if spec.n == 0 {
            return Err(MgError::invalid("body dimension must be at least 1"));
        }
        let inner = match spec.kind {
            BodyKind::ProductUniform => SamplerKind::Uniform,
            BodyKind::ProductLaplace => SamplerKind::Laplace,
            BodyKind::ProductGaussian => SamplerKind::Gaussian,
            BodyKind::LpBall(p) if p.is_nan() || p < 1.0 => {
                return Err(MgError::invalid(format!("l_p ball needs p >= 1, got {p}")))
            }
            BodyKind::LpBall(p) if p.is_infinite() => SamplerKind::Cube,
            BodyKind::LpBall(p) => SamplerKind::LpBall {
                p,
                radial: Gamma::new(1.0 / p, 1.0).expect("shape 1/p is positive"),
                rescale: 1.0 / lp_ball_coordinate_variance(p, spec.n).sqrt(),
            },
            BodyKind::Simplex => {
                let geom = regular_simplex(spec.n)?;
                let rescale = geom.scale();
                SamplerKind::Simplex { geom, rescale }
            }
        };
        Ok(BodySampler { spec, inner })
    }

    pub fn spec(&self) -> BodySpec {
        self.spec
    }

    pub fn geometry(&self) -> Option<&SimplexGeometry> {
        match &self.inner {
            SamplerKind::Simplex { geom, .. } => Some(geom),
            _ => None,
        }
    }

    /// Writes one isotropic draw into `out` (length `n`).
    pub fn draw(&self, stream: &mut RandomStream, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.spec.n);
        match &self.inner {
            SamplerKind::Uniform | SamplerKind::Cube => {
                for x in out.iter_mut() {
                    *x = SQRT3 * (2.0 * stream.uniform() - 1.0);
                }
            }
            SamplerKind::Laplace => {
                let b = std::f64::consts::FRAC_1_SQRT_2;
                for x in out.iter_mut() {
                    *x = stream.sign() * b * stream.exponential();
                }
            }
            SamplerKind::Gaussian => {
                for x in out.iter_mut() {
                    *x = stream.normal();
                }
            }
            SamplerKind::LpBall { p, radial, rescale } => {
                // g_i with density ~ exp(-|t|^p), then divide by (sum |g_i|^p + E)^{1/p}.
                let mut acc = 0.0;
                for x in out.iter_mut() {
                    let gp: f64 = radial.sample(stream);
                    acc += gp;
                    *x = stream.sign() * gp.powf(1.0 / p);
                }
                acc += stream.exponential();
                let f = rescale / acc.powf(1.0 / p);
                out.iter_mut().for_each(|x| *x *= f);
            }
            SamplerKind::Simplex { geom, rescale } => {
                let mut c: Vec<f64> = (0..=geom.n).map(|_| stream.exponential()).collect();
                let total: f64 = c.iter().sum();
                c.iter_mut().for_each(|v| *v /= total);
                for (o, v) in out.iter_mut().zip(geom.combine(&c)) {
                    *o = rescale * v;
                }
            }
        }
    }
}

/// `count` iid points, row-major, with the stream they came from.
#[derive(Clone, Debug)]
pub struct SampleBatch {
    pub body: BodySpec,
    pub points: Vec<f64>,
    pub seed: u64,
    pub stream_id: u64,
}

impl SampleBatch {
    pub fn n(&self) -> usize {
        self.body.n
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.body.n
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.body.n..(i + 1) * self.body.n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.body.n)
    }
}

pub fn sample_body(spec: BodySpec, stream: &mut RandomStream, count: usize) -> Result<SampleBatch> {
    if count == 0 {
        return Err(MgError::invalid("sample count must be at least 1"));
    }
    let sampler = BodySampler::new(spec)?;
    let (seed, stream_id) = (stream.seed(), stream.stream_id());
    let mut points = vec![0.0; count * spec.n];
    for row in points.chunks_exact_mut(spec.n) {
        sampler.draw(stream, row);
    }
    Ok(SampleBatch {
        body: spec,
        points,
        seed,
        stream_id,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsotropyReport {
    pub max_mean_dev: f64,
    /// Largest `|mean_j| / se_j`.
    pub max_mean_z: f64,
    pub max_cov_dev: f64,
    /// Largest `|cov_ij - delta_ij| / se_ij`.
    pub max_cov_z: f64,
    pub norm2: Estimate,
    pub pass: bool,
}

/// Failure threshold in standard errors.
pub const ISOTROPY_Z: f64 = 4.0;

pub fn isotropy_report(batch: &SampleBatch) -> Result<IsotropyReport> {
    let count = batch.len();
    if count < 100 {
        return Err(MgError::invalid(
            "isotropy_report needs at least 100 points",
        ));
    }
    let n = batch.n();
    let nf = count as f64;
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n * n];
    let mut s4 = vec![0.0; n * n];
    let mut norms = Vec::with_capacity(count);
    for x in batch.iter() {
        for i in 0..n {
            s1[i] += x[i];
            for j in i..n {
                let p = x[i] * x[j];
                s2[i * n + j] += p;
                s4[i * n + j] += p * p;
            }
        }
        norms.push(x.iter().map(|v| v * v).sum::<f64>());
    }
    let mut max_mean_dev = 0.0f64;
    let mut max_mean_z = 0.0f64;
    let mut max_cov_dev = 0.0f64;
    let mut max_cov_z = 0.0f64;
    for i in 0..n {
        let m = s1[i] / nf;
        let var = (s2[i * n + i] / nf - m * m).max(f64::MIN_POSITIVE);
        max_mean_dev = max_mean_dev.max(m.abs());
        max_mean_z = max_mean_z.max(m.abs() / (var / nf).sqrt());
        for j in i..n {
            let c = s2[i * n + j] / nf;
            let target = if i == j { 1.0 } else { 0.0 };
            let v = (s4[i * n + j] / nf - c * c).max(f64::MIN_POSITIVE);
            let dev = (c - target).abs();
            max_cov_dev = max_cov_dev.max(dev);
            max_cov_z = max_cov_z.max(dev / (v / nf).sqrt());
        }
    }
    let (m, se) = crate::stats::mean_se(&norms);
    let norm2 = Estimate { value: m, se };
    let pass = max_mean_z <= ISOTROPY_Z
        && max_cov_z <= ISOTROPY_Z
        && (m - n as f64).abs() <= ISOTROPY_Z * se;
    Ok(IsotropyReport {
        max_mean_dev,
        max_mean_z,
        max_cov_dev,
        max_cov_z,
        norm2,
        pass,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KlartagCheck {
    /// Monte-Carlo `Var(sum_l a_l X_l^2)`.
    pub lhs: Estimate,
    /// `32 sum_l a_l^2`.
    pub rhs: f64,
}

/// Estimates `Var(sum a_l X_l^2)` and compares with `32 sum a_l^2`.
pub fn klartag_variance_check(
    spec: BodySpec,
    a: &[f64],
    samples: usize,
    stream: &RandomStream,
) -> Result<KlartagCheck> {
    if !spec.kind.is_unconditional() {
        return Err(MgError::NotUnconditional("klartag_variance_check"));
    }
    if a.len() != spec.n {
        return Err(MgError::DimensionMismatch {
            expected: spec.n,
            got: a.len(),
        });
    }
    if samples < 10_000 {
        return Err(MgError::invalid(
            "klartag_variance_check needs at least 10^4 samples",
        ));
    }
    let sampler = BodySampler::new(spec)?;
    let batch_vars = run_batches(stream, samples, |s, count| {
        let mut x = vec![0.0; spec.n];
        let vals: Vec<f64> = (0..count)
            .map(|_| {
                sampler.draw(s, &mut x);
                a.iter().zip(&x).map(|(c, v)| c * v * v).sum()
            })
            .collect();
        variance(&vals)
    });
    Ok(KlartagCheck {
        lhs: Estimate::from_batches(&batch_vars),
        rhs: 32.0 * a.iter().map(|c| c * c).sum::<f64>(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRow {
    /// `|{l,m} ∩ {p,q}|`.
    pub overlap: usize,
    pub exact: f64,
    pub estimate: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimplexMomentTable {
    pub rows: Vec<MomentRow>,
    /// `E|X^{12}|^3`.
    pub third: Estimate,
    /// `3 sqrt 2`.
    pub third_bound: f64,
}

/// `E (X^{lm})^2 (X^{pq})^2 = (n+1)(n+2)/((n+3)(n+4)) * {1, 3, 6}` by overlap.
pub fn simplex_fourth_moment(n: usize, overlap: usize) -> f64 {
    let n = n as f64;
    let base = (n + 1.0) * (n + 2.0) / ((n + 3.0) * (n + 4.0));
    base * [1.0, 3.0, 6.0][overlap]
}

pub fn simplex_moment_check(
    n: usize,
    samples: usize,
    stream: &RandomStream,
) -> Result<SimplexMomentTable> {
    if n < 4 {
        return Err(MgError::invalid("simplex_moment_check needs n >= 4"));
    }
    if samples < 100_000 {
        return Err(MgError::invalid(
            "simplex_moment_check needs at least 10^5 samples",
        ));
    }
    let sampler = BodySampler::new(BodySpec::new(BodyKind::Simplex, n))?;
    let geom = sampler.geometry().expect("simplex sampler").clone();
    // representative pairs: disjoint, sharing one vertex, identical
    let pairs = [((0, 1), (2, 3)), ((0, 1), (0, 2)), ((0, 1), (0, 1))];
    let per_batch = run_batches(stream, samples, |s, count| {
        let mut x = vec![0.0; n];
        let mut acc = [0.0f64; 4];
        for _ in 0..count {
            sampler.draw(s, &mut x);
            let e01 = edge_functional(&geom, &x, 0, 1).expect("valid pair");
            let e23 = edge_functional(&geom, &x, 2, 3).expect("valid pair");
            let e02 = edge_functional(&geom, &x, 0, 2).expect("valid pair");
            acc[0] += e01 * e01 * e23 * e23;
            acc[1] += e01 * e01 * e02 * e02;
            acc[2] += e01.powi(4);
            acc[3] += e01.abs().powi(3);
        }
        acc.map(|v| v / count as f64)
    });
    let column =
        |c: usize| Estimate::from_batches(&per_batch.iter().map(|b| b[c]).collect::<Vec<_>>());
    let rows = pairs
        .iter()
        .enumerate()
        .map(|(overlap, _)| MomentRow {
            overlap,
            exact: simplex_fourth_moment(n, overlap),
            estimate: column(overlap),
        })
        .collect();
    Ok(SimplexMomentTable {
        rows,
        third: column(3),
        third_bound: 3.0 * std::f64::consts::SQRT_2,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThirdMomentCheck {
    pub per_coordinate: Vec<Estimate>,
    pub pooled: Estimate,
    /// `3 sqrt(2) / 2`.
    pub bound: f64,
}

/// Estimates `E|X_l|^3` for each coordinate of a product body.
pub fn third_abs_moment_check(
    spec: BodySpec,
    samples: usize,
    stream: &RandomStream,
) -> Result<ThirdMomentCheck> {
    if !spec.kind.is_product() {
        return Err(MgError::invalid(format!(
            "third_abs_moment_check needs a product body, got {}",
            spec.kind
        )));
    }
    let sampler = BodySampler::new(spec)?;
    let n = spec.n;
    let per_batch = run_batches(stream, samples, |s, count| {
        let mut x = vec![0.0; n];
        let mut acc = vec![0.0; n];
        for _ in 0..count {
            sampler.draw(s, &mut x);
            for (a, v) in acc.iter_mut().zip(&x) {
                *a += v.abs().powi(3);
            }
        }
        acc.iter().map(|a| a / count as f64).collect::<Vec<_>>()
    });
    let per_coordinate: Vec<Estimate> = (0..n)
        .map(|j| Estimate::from_batches(&per_batch.iter().map(|b| b[j]).collect::<Vec<_>>()))
        .collect();
    let pooled = Estimate::from_batches(
        &per_batch
            .iter()
            .map(|b| b.iter().sum::<f64>() / n as f64)
            .collect::<Vec<_>>(),
    );
    Ok(ThirdMomentCheck {
        per_coordinate,
        pooled,
        bound: 1.5 * std::f64::consts::SQRT_2,
    })
}
