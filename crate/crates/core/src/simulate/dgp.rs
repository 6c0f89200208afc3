//! Seeded data-generating processes.
//!
//! Normal variates are produced by inverting the standard normal CDF at a
//! uniform draw `u = (⌊w / 2¹¹⌋ + ½) / 2⁵³` taken from a 64-bit word `w`, so
//! every uniform lies strictly inside `(0, 1)`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::upper_normal_quantile_unchecked;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::models::BuiltinModel;

/// Generator for replication `k` of an experiment with base seed
/// `base_seed`: ChaCha8 keyed by `seed_from_u64(base_seed)` on stream `k`.
pub fn replication_rng(base_seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(k);
    rng
}

#[inline]
pub fn uniform_open<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[inline]
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    upper_normal_quantile_unchecked(uniform_open(rng))
}

#[derive(Debug, Clone, PartialEq)]
pub enum DgpKind {
    /// `y = xᵀθ* + ε`, `x ~ N(0, I)`, `ε ~ N(0, noise_sd²)`.
    Linear { noise_sd: f64 },
    /// `x ~ N(0, I)`, `Pr(y = 1 | x) = 1 / (1 + exp(−xᵀθ*))`, `y ∈ {−1, 1}`.
    Logistic,
    /// `z = θ* + diag(sds)·N(0, I)`.
    Mean { sds: Vec<f64> },
}

/// A data-generating process with true parameter `θ*` and a misspecification
/// shift `r` added to coordinate `shift_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    pub name: String,
    pub kind: DgpKind,
    theta_star: Vec<f64>,
    pub misspec_r: f64,
    pub shift_index: usize,
}

impl DgpSpec {
    pub fn new(
        name: impl Into<String>,
        kind: DgpKind,
        theta_star: Vec<f64>,
        misspec_r: f64,
        shift_index: usize,
    ) -> Result<Self> {
        let p = theta_star.len();
        if p == 0 {
            return Err(Error::Data("theta_star must be non-empty"));
        }
        if theta_star.iter().any(|v| !v.is_finite()) || !misspec_r.is_finite() {
            return Err(Error::NonFinite("data-generating process parameters"));
        }
        if shift_index >= p {
            return Err(Error::Dimension {
                context: "misspecification shift index",
                expected: p,
                actual: shift_index,
            });
        }
        match &kind {
            DgpKind::Linear { noise_sd } if !(*noise_sd > 0.0) || !noise_sd.is_finite() => {
                return Err(Error::Domain {
                    name: "noise_sd",
                    value: *noise_sd,
                    expected: "noise_sd > 0",
                });
            }
            DgpKind::Mean { sds } => {
                if sds.len() != p {
                    return Err(Error::Dimension {
                        context: "mean model scales",
                        expected: p,
                        actual: sds.len(),
                    });
                }
                if sds.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
                    return Err(Error::Data("mean model scales must be positive"));
                }
            }
            _ => {}
        }
        Ok(Self {
            name: name.into(),
            kind,
            theta_star,
            misspec_r,
            shift_index,
        })
    }

    /// Linear regression with `θ* = (1.5, −3, 2, 1 + r)`, `ε ~ N(0, 9)`.
    pub fn dgp1_linear() -> Self {
        Self::new(
            "dgp1_linear",
            DgpKind::Linear { noise_sd: 3.0 },
            vec![1.5, -3.0, 2.0, 1.0],
            0.0,
            3,
        )
        .expect("valid preset")
    }

    /// Logistic regression with `θ* = (1, −2, −2, 1.5)` (estimation and
    /// coverage studies).
    pub fn dgp2_logistic() -> Self {
        Self::new(
            "dgp2_logistic",
            DgpKind::Logistic,
            vec![1.0, -2.0, -2.0, 1.5],
            0.0,
            2,
        )
        .expect("valid preset")
    }

    /// Logistic regression with `θ* = (3, −2, −2 + r, 1)` (size and power).
    pub fn dgp2_logistic_power() -> Self {
        Self::new(
            "dgp2_logistic_power",
            DgpKind::Logistic,
            vec![3.0, -2.0, -2.0, 1.0],
            0.0,
            2,
        )
        .expect("valid preset")
    }

    /// Two-dimensional mean model with `θ* = (1, 1)` and
    /// `Σ = diag(1, 3)`.
    pub fn mean_sanity() -> Self {
        Self::new(
            "mean",
            DgpKind::Mean {
                sds: vec![1.0, libm::sqrt(3.0)],
            },
            vec![1.0, 1.0],
            0.0,
            1,
        )
        .expect("valid preset")
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.misspec_r = r;
        self
    }

    /// Base parameter before the misspecification shift.
    pub fn base_theta(&self) -> &[f64] {
        &self.theta_star
    }

    /// `θ* + r·e_shift`, the parameter the data are drawn from.
    pub fn theta(&self) -> Vec<f64> {
        let mut t = self.theta_star.clone();
        t[self.shift_index] += self.misspec_r;
        t
    }

    pub fn param_dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn obs_dim(&self) -> usize {
        match self.kind {
            DgpKind::Mean { .. } => self.param_dim(),
            _ => self.param_dim() + 1,
        }
    }

    pub fn model(&self) -> BuiltinModel {
        let p = self.param_dim();
        match self.kind {
            DgpKind::Linear { .. } => BuiltinModel::linear(p),
            DgpKind::Logistic => BuiltinModel::logistic(p),
            DgpKind::Mean { .. } => BuiltinModel::mean(p),
        }
        .expect("p >= 1")
    }

    /// Draws one observation into `out` using the parameter `theta`
    /// (normally [`theta`](Self::theta)).
    pub fn draw_with<R: RngCore + ?Sized>(&self, theta: &[f64], rng: &mut R, out: &mut [f64]) {
        match &self.kind {
            DgpKind::Linear { noise_sd } => {
                for x in out[1..].iter_mut() {
                    *x = standard_normal(rng);
                }
                let eps = noise_sd * standard_normal(rng);
                out[0] = dot(&out[1..], theta) + eps;
            }
            DgpKind::Logistic => {
                for x in out[1..].iter_mut() {
                    *x = standard_normal(rng);
                }
                let eta = dot(&out[1..], theta);
                let prob = 1.0 / (1.0 + libm::exp(-eta));
                out[0] = if uniform_open(rng) < prob { 1.0 } else { -1.0 };
            }
            DgpKind::Mean { sds } => {
                for ((z, &m), &s) in out.iter_mut().zip(theta).zip(sds) {
                    *z = m + s * standard_normal(rng);
                }
            }
        }
    }

    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.obs_dim()];
        self.draw_with(&self.theta(), rng, &mut out);
        out
    }
}

/// A named data-generating process together with the constraint that is
/// correct when `r = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub dgp: DgpSpec,
    pub constraint_matrix: Matrix,
    pub constraint_rhs: Vec<f64>,
}

pub const PRESET_NAMES: [&str; 4] = ["dgp1_linear", "dgp2_logistic", "dgp2_logistic_power", "mean"];

pub fn preset(name: &str) -> Option<Preset> {
    let (dgp, row) = match name {
        // β₂ + β₃ + β₄ = 0
        "dgp1_linear" => (DgpSpec::dgp1_linear(), vec![0.0, 1.0, 1.0, 1.0]),
        // β₂ − β₃ = 0
        "dgp2_logistic" => (DgpSpec::dgp2_logistic(), vec![0.0, 1.0, -1.0, 0.0]),
        "dgp2_logistic_power" => (DgpSpec::dgp2_logistic_power(), vec![0.0, 1.0, -1.0, 0.0]),
        // θ₁ = θ₂
        "mean" => (DgpSpec::mean_sanity(), vec![1.0, -1.0]),
        _ => return None,
    };
    Some(Preset {
        dgp,
        constraint_matrix: Matrix::from_rows(&[row]).expect("finite"),
        constraint_rhs: vec![0.0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replication_streams_differ_and_repeat() {
        let mut a = replication_rng(1, 0);
        let mut b = replication_rng(1, 1);
        let mut a2 = replication_rng(1, 0);
        let x = a.next_u64();
        assert_ne!(x, b.next_u64());
        assert_eq!(x, a2.next_u64());
    }

    #[test]
    fn uniform_in_open_interval() {
        let mut rng = replication_rng(3, 0);
        for _ in 0..10_000 {
            let u = uniform_open(&mut rng);
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn dgp1_moments() {
        let dgp = DgpSpec::dgp1_linear();
        let mut rng = replication_rng(11, 0);
        let n = 100_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        let mut z = vec![0.0; 5];
        let theta = dgp.theta();
        for _ in 0..n {
            dgp.draw_with(&theta, &mut rng, &mut z);
            sum += z[0];
            sum_sq += z[0] * z[0];
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        let target_var = dot(&theta, &theta) + 9.0;
        assert!(mean.abs() < 3.0 * libm::sqrt(target_var / n as f64), "mean {mean}");
        assert!((var / target_var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn dgp2_symmetric_at_zero() {
        let dgp = DgpSpec::new("zero", DgpKind::Logistic, vec![0.0; 4], 0.0, 0).unwrap();
        let mut rng = replication_rng(5, 0);
        let n = 100_000;
        let ones = (0..n).filter(|_| dgp.draw(&mut rng)[0] == 1.0).count();
        let p = ones as f64 / n as f64;
        assert!((p - 0.5).abs() < 3.0 * libm::sqrt(0.25 / n as f64), "p {p}");
    }

    #[test]
    fn shift_applies_to_named_coordinate() {
        let dgp = DgpSpec::dgp2_logistic_power().with_r(0.01);
        assert_eq!(dgp.theta(), vec![3.0, -2.0, -1.99, 1.0]);
        let dgp = DgpSpec::dgp1_linear().with_r(0.025);
        assert_eq!(dgp.theta(), vec![1.5, -3.0, 2.0, 1.025]);
    }

    #[test]
    fn invalid_specs() {
        assert!(DgpSpec::new("x", DgpKind::Linear { noise_sd: 0.0 }, vec![1.0], 0.0, 0).is_err());
        assert!(DgpSpec::new("x", DgpKind::Logistic, vec![1.0], 0.0, 1).is_err());
        assert!(DgpSpec::new("x", DgpKind::Mean { sds: vec![1.0] }, vec![1.0, 2.0], 0.0, 0).is_err());
    }

    #[test]
    fn presets_satisfy_their_constraints() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            let bt = p.constraint_matrix.mul_vec(&p.dgp.theta()).unwrap();
            assert!(bt[0].abs() < 1e-15, "{name}");
        }
        assert!(preset("nope").is_none());
    }
}
