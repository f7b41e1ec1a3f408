//! One-dimensional grid densities, Gaussian smoothing, and numerical checks of
//! the smoothing inequalities.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_lr;

use crate::error::{MgError, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Uniform grid of `points` nodes on `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            lo: -12.0,
            hi: 12.0,
            points: 24_001,
        }
    }
}

impl Grid {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.spacing()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Density1D {
    pub name: String,
    pub grid: Grid,
    pub values: Vec<f64>,
    /// Absolutely continuous with an integrable derivative (no jumps).
    pub continuous: bool,
}

impl Density1D {
    pub fn spacing(&self) -> f64 {
        self.grid.spacing()
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.spacing())
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    let inner: f64 = values.iter().sum();
    h * (inner - 0.5 * (values[0] + values[values.len() - 1]))
}

/// `Phi(b) - Phi(a)` computed from the tail that keeps precision.
fn normal_mass(a: f64, b: f64) -> f64 {
    let s = std::f64::consts::SQRT_2;
    if a >= 0.0 {
        0.5 * (erfc(a / s) - erfc(b / s))
    } else if b <= 0.0 {
        0.5 * (erfc(-b / s) - erfc(-a / s))
    } else {
        1.0 - 0.5 * (erfc(-a / s) + erfc(b / s))
    }
}

/// Density of `tZ` sampled at the grid nodes.
pub fn gaussian_density(t: f64, grid: Grid) -> Result<Density1D> {
    if t.is_nan() || t <= 0.0 {
        return Err(MgError::invalid(format!(
            "gaussian_density needs t > 0, got {t}"
        )));
    }
    let c = 1.0 / (2.0 * std::f64::consts::PI * t * t).sqrt();
    let values = (0..grid.points)
        .map(|i| {
            let x = grid.node(i);
            c * (-x * x / (2.0 * t * t)).exp()
        })
        .collect();
    Ok(Density1D {
        name: if t == 1.0 {
            "gaussian".into()
        } else {
            format!("gaussian(t={t})")
        },
        grid,
        values,
        continuous: true,
    })
}

/// The isotropic log-concave 1-D densities used throughout the checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ShippedDensity {
    Uniform,
    Laplace,
    Gaussian,
}

impl ShippedDensity {
    pub const ALL: [ShippedDensity; 3] = [
        ShippedDensity::Uniform,
        ShippedDensity::Laplace,
        ShippedDensity::Gaussian,
    ];

    /// Uniform on `[-sqrt 3, sqrt 3]` is stored as cell averages so that its
    /// jumps integrate exactly; the other two are point values.
    pub fn on(self, grid: Grid) -> Density1D {
        match self {
            ShippedDensity::Gaussian => gaussian_density(1.0, grid).expect("t = 1"),
            ShippedDensity::Laplace => {
                let b = std::f64::consts::FRAC_1_SQRT_2;
                let values = (0..grid.points)
                    .map(|i| (-grid.node(i).abs() / b).exp() / (2.0 * b))
                    .collect();
                Density1D {
                    name: "laplace".into(),
                    grid,
                    values,
                    continuous: true,
                }
            }
            ShippedDensity::Uniform => {
                let h = grid.spacing();
                let height = 1.0 / (2.0 * SQRT3);
                let values = (0..grid.points)
                    .map(|i| {
                        let x = grid.node(i);
                        let lo = (x - h / 2.0).max(-SQRT3);
                        let hi = (x + h / 2.0).min(SQRT3);
                        height * ((hi - lo).max(0.0) / h)
                    })
                    .collect();
                Density1D {
                    name: "uniform".into(),
                    grid,
                    values,
                    continuous: false,
                }
            }
        }
    }
}

impl fmt::Display for ShippedDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShippedDensity::Uniform => "uniform",
            ShippedDensity::Laplace => "laplace",
            ShippedDensity::Gaussian => "gaussian",
        })
    }
}

impl FromStr for ShippedDensity {
    type Err = MgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(ShippedDensity::Uniform),
            "laplace" => Ok(ShippedDensity::Laplace),
            "gaussian" => Ok(ShippedDensity::Gaussian),
            _ => Err(MgError::invalid(format!(
                "unknown density {s:?} (expected uniform, laplace, gaussian)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Smoothed {
    /// `||f * phi_t - f||_1`.
    pub distance: f64,
    pub smoothed: Density1D,
}

/// Convolves `f` with `phi_t` and measures the L1 change.
///
/// `f` is treated as constant on each grid cell, so the kernel weight for a
/// node offset `d` is the exact Gaussian mass of `[(d - 1/2)h, (d + 1/2)h]`.
/// Mass outside the grid is taken as zero.
pub fn convolve_l1(f: &Density1D, t: f64) -> Result<Smoothed> {
    let h = f.spacing();
    if t.is_nan() || t <= 0.0 || h > t / 10.0 {
        return Err(MgError::Resolution { h, t });
    }
    let reach = ((12.0 * t / h).ceil() as usize).min(f.values.len());
    let kernel: Vec<f64> = (0..=reach)
        .map(|d| normal_mass((d as f64 - 0.5) * h / t, (d as f64 + 0.5) * h / t))
        .collect();
    let m = f.values.len();
    let src = &f.values;
    let values: Vec<f64> = (0..m)
        .map(|i| {
            let mut acc = kernel[0] * src[i];
            for (d, w) in kernel.iter().enumerate().skip(1) {
                if i >= d {
                    acc += w * src[i - d];
                }
                if i + d < m {
                    acc += w * src[i + d];
                }
            }
            acc
        })
        .collect();
    let diff: Vec<f64> = values.iter().zip(src).map(|(a, b)| (a - b).abs()).collect();
    let distance = trapezoid(&diff, h);
    Ok(Smoothed {
        distance,
        smoothed: Density1D {
            name: format!("{}*phi_{t}", f.name),
            grid: f.grid,
            values,
            continuous: true,
        },
    })
}

/// `||f'||_1` by central differences and the trapezoid rule.
pub fn derivative_l1(f: &Density1D) -> f64 {
    let h = f.spacing();
    let v = &f.values;
    let m = v.len();
    let d: Vec<f64> = (0..m)
        .map(|i| {
            let left = if i == 0 { 0.0 } else { v[i - 1] };
            let right = if i + 1 == m { 0.0 } else { v[i + 1] };
            ((right - left) / (2.0 * h)).abs()
        })
        .collect();
    trapezoid(&d, h)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LedouxCheck {
    pub lhs: f64,
    /// `sqrt(2) t ||f'||_1`.
    pub rhs: f64,
    pub derivative_l1: f64,
    pub holds: bool,
}

/// Slack allowed for quadrature error in [`ledoux_check`].
pub const LEDOUX_SLACK: f64 = 1e-3;

/// Compares `||f * phi_t - f||_1` with `sqrt(2) t ||f'||_1`.
pub fn ledoux_check(f: &Density1D, t: f64) -> Result<LedouxCheck> {
    if !f.continuous {
        return Err(MgError::NotSmooth(f.name.clone()));
    }
    let lhs = convolve_l1(f, t)?.distance;
    let derivative_l1 = derivative_l1(f);
    let rhs = std::f64::consts::SQRT_2 * t * derivative_l1;
    Ok(LedouxCheck {
        lhs,
        rhs,
        derivative_l1,
        holds: lhs <= rhs + LEDOUX_SLACK,
    })
}

/// `||phi_{s1} - phi_{s2}||_1` for centered isotropic Gaussians in `R^dim`.
///
/// The densities cross on the sphere of squared radius
/// `r^2 = dim ln(b^2/a^2) / (1/a^2 - 1/b^2)` (`a < b`), so the distance is
/// `2 (F(r^2/a^2) - F(r^2/b^2))` with `F` the chi-square CDF with `dim`
/// degrees of freedom.
pub fn gaussian_tv_exact(s1: f64, s2: f64, dim: usize) -> Result<f64> {
    if !(s1 > 0.0 && s2 > 0.0) || dim == 0 {
        return Err(MgError::invalid(
            "gaussian_tv_exact needs positive scales and dim >= 1",
        ));
    }
    if s1 == s2 {
        return Ok(0.0);
    }
    let (a, b) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
    let d = dim as f64;
    let r2 = d * (b * b / (a * a)).ln() / (1.0 / (a * a) - 1.0 / (b * b));
    let chi2 = |x: f64| gamma_lr(d / 2.0, x / 2.0);
    Ok(2.0 * (chi2(r2 / (a * a)) - chi2(r2 / (b * b))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi(x: f64, s: f64) -> f64 {
        (-x * x / (2.0 * s * s)).exp() / (2.0 * std::f64::consts::PI * s * s).sqrt()
    }

    #[test]
    fn gaussian_peaks_and_mass() {
        let g = Grid::default();
        let d = gaussian_density(1.0, g).unwrap();
        assert!((d.values[12_000] - 0.398_942_280_401_432_7).abs() < 1e-15);
        let d = gaussian_density(0.5, g).unwrap();
        assert!((d.values[12_000] - 2.0 * 0.398_942_280_401_432_7).abs() < 1e-14);
        for t in [0.05, 0.1, 1.0] {
            let d = gaussian_density(t, g).unwrap();
            assert!((d.integral() - 1.0).abs() < 1e-8, "t = {t}");
        }
        assert!(gaussian_density(0.0, g).is_err());
    }

    #[test]
    fn shipped_densities_are_normalized_with_mode_below_one() {
        for s in ShippedDensity::ALL {
            let d = s.on(Grid::default());
            assert!((d.integral() - 1.0).abs() < 1e-6, "{s}: {}", d.integral());
            assert!(d.max_value() <= 1.0);
            assert!(d.values.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn exact_tv_matches_quadrature() {
        // crossing-point-free oracle: integrate |phi_a - phi_b| directly
        let (a, b) = (1.0, 1.25f64.sqrt());
        let h = 1e-4;
        let mut q = 0.0;
        let mut x = -15.0;
        while x < 15.0 {
            q += (phi(x + h / 2.0, a) - phi(x + h / 2.0, b)).abs() * h;
            x += h;
        }
        let exact = gaussian_tv_exact(a, b, 1).unwrap();
        assert!((exact - q).abs() < 1e-8, "{exact} vs {q}");
        assert!(exact < 2f64.sqrt() * 0.5);
    }

    #[test]
    fn exact_tv_basic_properties() {
        assert_eq!(gaussian_tv_exact(1.3, 1.3, 4).unwrap(), 0.0);
        let t = 0.1;
        let v = gaussian_tv_exact(1.0, (1.0f64 + t * t).sqrt(), 10).unwrap();
        assert!(v < (20.0f64).sqrt() * t);
        let mut prev = 0.0;
        for s2 in [1.01, 1.1, 1.5, 3.0, 10.0, 100.0] {
            let v = gaussian_tv_exact(1.0, s2, 3).unwrap();
            assert!(v > prev && v <= 2.0);
            prev = v;
        }
        assert_eq!(
            gaussian_tv_exact(1.0, 2.0, 5).unwrap(),
            gaussian_tv_exact(2.0, 1.0, 5).unwrap()
        );
    }

    #[test]
    fn gaussian_convolution_matches_exact_tv() {
        let f = ShippedDensity::Gaussian.on(Grid::default());
        let r = convolve_l1(&f, 0.5).unwrap();
        let exact = gaussian_tv_exact(1.0, 1.25f64.sqrt(), 1).unwrap();
        assert!(
            (r.distance - exact).abs() < 1e-4,
            "{} vs {exact}",
            r.distance
        );
        assert!((r.smoothed.integral() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn uniform_smoothing_is_small_and_monotone() {
        let f = ShippedDensity::Uniform.on(Grid::default());
        let d = convolve_l1(&f, 0.1).unwrap().distance;
        assert!(d <= 2.0 * 2f64.sqrt() * 0.1);
        let ts = [0.01, 0.02, 0.05, 0.1, 0.2];
        let ds: Vec<f64> = ts
            .iter()
            .map(|&t| convolve_l1(&f, t).unwrap().distance)
            .collect();
        assert!(ds.windows(2).all(|w| w[0] < w[1]), "{ds:?}");
    }

    #[test]
    fn resolution_guard() {
        let f = ShippedDensity::Gaussian.on(Grid::default());
        assert!(matches!(
            convolve_l1(&f, 0.005),
            Err(MgError::Resolution { .. })
        ));
    }

    #[test]
    fn derivative_norm_of_standard_normal() {
        let f = ShippedDensity::Gaussian.on(Grid::default());
        let d = derivative_l1(&f);
        assert!((d - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-6);
        assert!((d - 0.79788).abs() < 1e-5);
    }

    #[test]
    fn ledoux_holds_and_rejects_jumps() {
        let g = ShippedDensity::Gaussian.on(Grid::default());
        for t in [0.05, 0.1, 0.2] {
            let c = ledoux_check(&g, t).unwrap();
            assert!(c.lhs / c.rhs <= 1.0, "{c:?}");
        }
        let u = ShippedDensity::Uniform.on(Grid::default());
        assert!(matches!(ledoux_check(&u, 0.1), Err(MgError::NotSmooth(_))));
        for s in ShippedDensity::ALL {
            assert!(derivative_l1(&s.on(Grid::default())) <= 2.0);
        }
    }
}
