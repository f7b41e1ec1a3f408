//! Orthonormal projection frames and the frame functionals that drive the
//! error bounds.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::bodies::SimplexGeometry;
use crate::error::{MgError, Result};
use crate::rng::RandomStream;

/// Tolerance for the orthonormality post-condition.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Walsh,
    Haar,
    Coordinate,
    Custom,
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrameKind::Walsh => "walsh",
            FrameKind::Haar => "haar",
            FrameKind::Coordinate => "coordinate",
            FrameKind::Custom => "custom",
        })
    }
}

impl FromStr for FrameKind {
    type Err = MgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "walsh" => Ok(FrameKind::Walsh),
            "haar" => Ok(FrameKind::Haar),
            "coordinate" => Ok(FrameKind::Coordinate),
            "custom" => Ok(FrameKind::Custom),
            _ => Err(MgError::invalid(format!(
                "unknown frame kind {s:?} (expected walsh, haar, coordinate)"
            ))),
        }
    }
}

/// `k` orthonormal rows `theta_1..theta_k` in `R^n`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    kind: FrameKind,
    k: usize,
    n: usize,
    rows: Vec<f64>,
}

impl Frame {
    /// Wraps caller-supplied rows after checking orthonormality.
    pub fn custom(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(MgError::invalid("frame needs at least one row"));
        }
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(MgError::invalid("frame rows have unequal lengths"));
        }
        if k > n {
            return Err(MgError::invalid(format!("k = {k} exceeds n = {n}")));
        }
        let frame = Frame {
            kind: FrameKind::Custom,
            k,
            n,
            rows: rows.into_iter().flatten().collect(),
        };
        let resid = frame.orthonormality_residual();
        if resid >= ORTHONORMAL_TOL {
            return Err(MgError::invalid(format!(
                "rows are not orthonormal (residual {resid:e})"
            )));
        }
        Ok(frame)
    }

    pub fn kind(&self) -> FrameKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks_exact(self.n)
    }

    /// `max_{i,j} |<theta_i, theta_j> - delta_ij|`.
    pub fn orthonormality_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.k {
            for j in i..self.k {
                let d = dot(self.row(i), self.row(j)) - if i == j { 1.0 } else { 0.0 };
                worst = worst.max(d.abs());
            }
        }
        worst
    }

    /// `W_i = <x, theta_i>`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(MgError::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(self.rows().map(|r| dot(r, x)).collect())
    }

    /// Unchecked projection into a caller-provided buffer.
    pub(crate) fn project_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, r) in out.iter_mut().zip(self.rows()) {
            *o = dot(r, x);
        }
    }
}

/// Free-function form of [`Frame::project`].
pub fn project(frame: &Frame, x: &[f64]) -> Result<Vec<f64>> {
    frame.project(x)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest power of two not exceeding `n` (`n >= 1`).
pub fn walsh_block(n: usize) -> usize {
    1usize << (usize::BITS - 1 - n.leading_zeros())
}

/// Sylvester-ordered Hadamard matrix of order `m` (a power of two), entries
/// `+1`/`-1`. Entry `(i, j)` is `(-1)^popcount(i & j)`.
pub fn sylvester_hadamard(m: usize) -> Result<Vec<Vec<i8>>> {
    if m == 0 || !m.is_power_of_two() {
        return Err(MgError::invalid(format!(
            "Hadamard order must be a power of 2, got {m}"
        )));
    }
    let mut h = vec![vec![1i8]];
    while h.len() < m {
        let s = h.len();
        let mut next = vec![vec![0i8; 2 * s]; 2 * s];
        for i in 0..s {
            for j in 0..s {
                let v = h[i][j];
                next[i][j] = v;
                next[i][j + s] = v;
                next[i + s][j] = v;
                next[i + s][j + s] = -v;
            }
        }
        h = next;
    }
    Ok(h)
}

/// First `k` Sylvester rows of order `m = walsh_block(n)`, scaled by
/// `m^{-1/2}` and zero-padded to length `n`.
pub fn walsh_frame(n: usize, k: usize) -> Result<Frame> {
    if n == 0 || k == 0 {
        return Err(MgError::invalid("walsh_frame needs n >= 1 and k >= 1"));
    }
    let m = walsh_block(n);
    if k > m {
        return Err(MgError::WalshTooManyRows { k, m, n });
    }
    let scale = 1.0 / (m as f64).sqrt();
    let mut rows = vec![0.0; k * n];
    for i in 0..k {
        for j in 0..m {
            let sign = if (i & j).count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            rows[i * n + j] = sign * scale;
        }
    }
    Ok(Frame {
        kind: FrameKind::Walsh,
        k,
        n,
        rows,
    })
}

/// Standard basis rows `e_1..e_k`.
pub fn coordinate_frame(n: usize, k: usize) -> Result<Frame> {
    if k == 0 || k > n {
        return Err(MgError::invalid(format!(
            "coordinate_frame needs 1 <= k <= n (k = {k}, n = {n})"
        )));
    }
    let mut rows = vec![0.0; k * n];
    for i in 0..k {
        rows[i * n + i] = 1.0;
    }
    Ok(Frame {
        kind: FrameKind::Coordinate,
        k,
        n,
        rows,
    })
}

/// Haar-distributed orthonormal `k`-frame: `k` iid Gaussian rows put through
/// modified Gram-Schmidt with one re-orthogonalization pass. Signs are left
/// as drawn.
pub fn haar_frame(n: usize, k: usize, stream: &mut RandomStream) -> Result<Frame> {
    if k == 0 || k > n {
        return Err(MgError::invalid(format!(
            "haar_frame needs 1 <= k <= n (k = {k}, n = {n})"
        )));
    }
    for _attempt in 0..2 {
        let raw: Vec<f64> = (0..k * n).map(|_| stream.normal()).collect();
        if let Some(rows) = gram_schmidt(raw, k, n) {
            return Ok(Frame {
                kind: FrameKind::Haar,
                k,
                n,
                rows,
            });
        }
    }
    Err(MgError::RankDeficient { n, k })
}

fn gram_schmidt(mut rows: Vec<f64>, k: usize, n: usize) -> Option<Vec<f64>> {
    for i in 0..k {
        let (done, rest) = rows.split_at_mut(i * n);
        let row = &mut rest[..n];
        let before = dot(row, row).sqrt();
        for _pass in 0..2 {
            for prev in done.chunks_exact(n) {
                let c = dot(prev, row);
                for (r, p) in row.iter_mut().zip(prev) {
                    *r -= c * p;
                }
            }
        }
        let norm = dot(row, row).sqrt();
        if norm.is_nan() || norm <= 1e-10 * before.max(f64::MIN_POSITIVE) {
            return None;
        }
        row.iter_mut().for_each(|r| *r /= norm);
    }
    Some(rows)
}

/// Builds a frame of the given kind. `stream` is only consumed by Haar frames.
pub fn build_frame(
    kind: FrameKind,
    n: usize,
    k: usize,
    stream: &mut RandomStream,
) -> Result<Frame> {
    match kind {
        FrameKind::Walsh => walsh_frame(n, k),
        FrameKind::Haar => haar_frame(n, k, stream),
        FrameKind::Coordinate => coordinate_frame(n, k),
        FrameKind::Custom => Err(MgError::invalid(
            "custom frames must be supplied explicitly",
        )),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrameFunctionals {
    /// `sum_i ||theta_i||_4^2`
    pub l4_sum: f64,
    /// `sum_i ||theta_i||_3^2`
    pub l3_sum: f64,
    /// `sum_i sqrt(sum_l <theta_i, v_l>^4)` over the simplex vertices.
    pub simplex_quartic: Option<f64>,
    /// `sum_l |<theta_1, v_l>|^3`, only for `k = 1`.
    pub simplex_cubic: Option<f64>,
}

/// Computes every functional that applies. Simplex entries need `geom`;
/// `simplex_cubic` is filled only for single-row frames.
pub fn frame_functionals(
    frame: &Frame,
    geom: Option<&SimplexGeometry>,
) -> Result<FrameFunctionals> {
    let l4_sum = frame
        .rows()
        .map(|r| r.iter().map(|t| t.powi(4)).sum::<f64>().sqrt())
        .sum();
    let l3_sum = frame
        .rows()
        .map(|r| {
            r.iter()
                .map(|t| t.abs().powi(3))
                .sum::<f64>()
                .powf(2.0 / 3.0)
        })
        .sum();
    let (simplex_quartic, simplex_cubic) = match geom {
        None => (None, None),
        Some(g) => {
            if g.n() != frame.n() {
                return Err(MgError::DimensionMismatch {
                    expected: frame.n(),
                    got: g.n(),
                });
            }
            let quartic = simplex_quartic(frame, g);
            let cubic = if frame.k() == 1 {
                Some(simplex_cubic(frame, g)?)
            } else {
                None
            };
            (Some(quartic), cubic)
        }
    };
    Ok(FrameFunctionals {
        l4_sum,
        l3_sum,
        simplex_quartic,
        simplex_cubic,
    })
}

fn simplex_quartic(frame: &Frame, geom: &SimplexGeometry) -> f64 {
    frame
        .rows()
        .map(|r| {
            geom.vertex_products(r)
                .iter()
                .map(|a| a.powi(4))
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

/// `sum_l |<theta, v_l>|^3`; errors for frames with more than one row.
pub fn simplex_cubic(frame: &Frame, geom: &SimplexGeometry) -> Result<f64> {
    if frame.k() != 1 {
        return Err(MgError::RequiresUnivariate {
            what: "simplex_cubic",
            k: frame.k(),
        });
    }
    Ok(geom
        .vertex_products(frame.row(0))
        .iter()
        .map(|a| a.abs().powi(3))
        .sum())
}
