//! Loss models `l(θ, z)` with their gradients and Hessians.
//!
//! Regression observations are laid out response first: `z = (y, x₁, …, x_p)`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix, Vector};

/// A per-observation loss with first and second derivatives in `θ`.
///
/// The `_into` methods write into caller-owned buffers so the estimator can
/// run without allocating per step. Implementations must check the input
/// dimensions.
pub trait LossModel {
    fn param_dim(&self) -> usize;

    fn obs_dim(&self) -> usize;

    fn loss(&self, theta: &[f64], z: &[f64]) -> Result<f64>;

    fn gradient_into(&self, theta: &[f64], z: &[f64], out: &mut [f64]) -> Result<()>;

    fn hessian_into(&self, theta: &[f64], z: &[f64], out: &mut Matrix) -> Result<()>;

    fn gradient(&self, theta: &[f64], z: &[f64]) -> Result<Vector> {
        let mut out = Vector::zeros(self.param_dim());
        self.gradient_into(theta, z, &mut out)?;
        Ok(out)
    }

    fn hessian(&self, theta: &[f64], z: &[f64]) -> Result<Matrix> {
        let p = self.param_dim();
        let mut out = Matrix::zeros(p, p);
        self.hessian_into(theta, z, &mut out)?;
        Ok(out)
    }
}

impl<M: LossModel + ?Sized> LossModel for &M {
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }
    fn obs_dim(&self) -> usize {
        (**self).obs_dim()
    }
    fn loss(&self, theta: &[f64], z: &[f64]) -> Result<f64> {
        (**self).loss(theta, z)
    }
    fn gradient_into(&self, theta: &[f64], z: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).gradient_into(theta, z, out)
    }
    fn hessian_into(&self, theta: &[f64], z: &[f64], out: &mut Matrix) -> Result<()> {
        (**self).hessian_into(theta, z, out)
    }
}

impl<M: LossModel + ?Sized> LossModel for Box<M> {
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }
    fn obs_dim(&self) -> usize {
        (**self).obs_dim()
    }
    fn loss(&self, theta: &[f64], z: &[f64]) -> Result<f64> {
        (**self).loss(theta, z)
    }
    fn gradient_into(&self, theta: &[f64], z: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).gradient_into(theta, z, out)
    }
    fn hessian_into(&self, theta: &[f64], z: &[f64], out: &mut Matrix) -> Result<()> {
        (**self).hessian_into(theta, z, out)
    }
}

fn check_dims(
    p: usize,
    obs: usize,
    theta: &[f64],
    z: &[f64],
    out_len: Option<usize>,
) -> Result<()> {
    if theta.len() != p {
        return Err(Error::Dimension {
            context: "parameter vector",
            expected: p,
            actual: theta.len(),
        });
    }
    if z.len() != obs {
        return Err(Error::Dimension {
            context: "observation",
            expected: obs,
            actual: z.len(),
        });
    }
    if let Some(len) = out_len {
        if len != p {
            return Err(Error::Dimension {
                context: "output buffer",
                expected: p,
                actual: len,
            });
        }
    }
    Ok(())
}

fn check_hessian_out(p: usize, out: &Matrix) -> Result<()> {
    if out.rows() != p || out.cols() != p {
        return Err(Error::Dimension {
            context: "Hessian buffer",
            expected: p,
            actual: out.rows(),
        });
    }
    Ok(())
}

fn write_outer(out: &mut Matrix, x: &[f64], weight: f64) {
    let p = x.len();
    for i in 0..p {
        let wi = weight * x[i];
        for j in i..p {
            let v = wi * x[j];
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
}

/// Mean estimation, `l(θ, z) = ½‖z − θ‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeanModel {
    p: usize,
}

impl MeanModel {
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::Data("parameter dimension must be at least 1"));
        }
        Ok(Self { p })
    }
}

impl LossModel for MeanModel {
    fn param_dim(&self) -> usize {
        self.p
    }

    fn obs_dim(&self) -> usize {
        self.p
    }

    fn loss(&self, theta: &[f64], z: &[f64]) -> Result<f64> {
        check_dims(self.p, self.p, theta, z, None)?;
        Ok(0.5 * z.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
    }

    fn gradient_into(&self, theta: &[f64], z: &[f64], out: &mut [f64]) -> Result<()> {
        check_dims(self.p, self.p, theta, z, Some(out.len()))?;
        for ((o, &t), &zi) in out.iter_mut().zip(theta).zip(z) {
            *o = t - zi;
        }
        Ok(())
    }

    fn hessian_into(&self, theta: &[f64], z: &[f64], out: &mut Matrix) -> Result<()> {
        check_dims(self.p, self.p, theta, z, None)?;
        check_hessian_out(self.p, out)?;
        out.as_mut_slice().fill(0.0);
        for i in 0..self.p {
            out[(i, i)] = 1.0;
        }
        Ok(())
    }
}

/// Least squares, `l(θ, z) = ½(y − xᵀθ)²` with `z = (y, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearModel {
    p: usize,
}

impl LinearModel {
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::Data("parameter dimension must be at least 1"));
        }
        Ok(Self { p })
    }
}

impl LossModel for LinearModel {
    fn param_dim(&self) -> usize {
        self.p
    }

    fn obs_dim(&self) -> usize {
        self.p + 1
    }

    fn loss(&self, theta: &[f64], z: &[f64]) -> Result<f64> {
        check_dims(self.p, self.p + 1, theta, z, None)?;
        let r = z[0] - dot(&z[1..], theta);
        Ok(0.5 * r * r)
    }

    fn gradient_into(&self, theta: &[f64], z: &[f64], out: &mut [f64]) -> Result<()> {
        check_dims(self.p, self.p + 1, theta, z, Some(out.len()))?;
        let x = &z[1..];
        let r = z[0] - dot(x, theta);
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = -r * xi;
        }
        Ok(())
    }

    fn hessian_into(&self, theta: &[f64], z: &[f64], out: &mut Matrix) -> Result<()> {
        check_dims(self.p, self.p + 1, theta, z, None)?;
        check_hessian_out(self.p, out)?;
        write_outer(out, &z[1..], 1.0);
        Ok(())
    }
}

/// Logistic regression with labels in `{−1, +1}`,
/// `l(θ, z) = log(1 + exp(−y xᵀθ))` with `z = (y, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogisticModel {
    p: usize,
}

impl LogisticModel {
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::Data("parameter dimension must be at least 1"));
        }
        Ok(Self { p })
    }

    fn margin(&self, theta: &[f64], z: &[f64]) -> Result<f64> {
        let y = z[0];
        if y != 1.0 && y != -1.0 {
            return Err(Error::Data("logistic label must be -1 or +1"));
        }
        Ok(y * dot(&z[1..], theta))
    }
}

/// `log(1 + e^u)` without overflow.
pub fn log1p_exp(u: f64) -> f64 {
    u.max(0.0) + libm::log1p(libm::exp(-u.abs()))
}

/// `1 / (1 + e^u)` without overflow.
fn inv_one_plus_exp(u: f64) -> f64 {
    if u >= 0.0 {
        let e = libm::exp(-u);
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + libm::exp(u))
    }
}

impl LossModel for LogisticModel {
    fn param_dim(&self) -> usize {
        self.p
    }

    fn obs_dim(&self) -> usize {
        self.p + 1
    }

    fn loss(&self, theta: &[f64], z: &[f64]) -> Result<f64> {
        check_dims(self.p, self.p + 1, theta, z, None)?;
        Ok(log1p_exp(-self.margin(theta, z)?))
    }

    fn gradient_into(&self, theta: &[f64], z: &[f64], out: &mut [f64]) -> Result<()> {
        check_dims(self.p, self.p + 1, theta, z, Some(out.len()))?;
        let u = self.margin(theta, z)?;
        let w = -z[0] * inv_one_plus_exp(u);
        for (o, &xi) in out.iter_mut().zip(&z[1..]) {
            *o = w * xi;
        }
        Ok(())
    }

    fn hessian_into(&self, theta: &[f64], z: &[f64], out: &mut Matrix) -> Result<()> {
        check_dims(self.p, self.p + 1, theta, z, None)?;
        check_hessian_out(self.p, out)?;
        let u = self.margin(theta, z)?;
        // e^u / (1 + e^u)² = σ(u)·σ(−u)
        let s = inv_one_plus_exp(u);
        let w = s * (1.0 - s);
        write_outer(out, &z[1..], w);
        Ok(())
    }
}

type LossFn = Box<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
type GradientFn = Box<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
type HessianFn = Box<dyn Fn(&[f64], &[f64]) -> Matrix + Send + Sync>;

/// A model assembled from caller-supplied callables, e.g. a negative
/// log-likelihood.
///
/// The callables are trusted to be mutually consistent; their output
/// dimensions are checked on every evaluation.
pub struct CustomModel {
    p: usize,
    obs_dim: usize,
    loss_fn: LossFn,
    gradient_fn: GradientFn,
    hessian_fn: HessianFn,
}

impl core::fmt::Debug for CustomModel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("CustomModel")
            .field("p", &self.p)
            .field("obs_dim", &self.obs_dim)
            .finish_non_exhaustive()
    }
}

impl CustomModel {
    pub fn new<L, G, H>(p: usize, obs_dim: usize, loss: L, gradient: G, hessian: H) -> Result<Self>
    where
        L: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        H: Fn(&[f64], &[f64]) -> Matrix + Send + Sync + 'static,
    {
        if p == 0 {
            return Err(Error::Data("parameter dimension must be at least 1"));
        }
        Ok(Self {
            p,
            obs_dim,
            loss_fn: Box::new(loss),
            gradient_fn: Box::new(gradient),
            hessian_fn: Box::new(hessian),
        })
    }
}

impl LossModel for CustomModel {
    fn param_dim(&self) -> usize {
        self.p
    }

    fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    fn loss(&self, theta: &[f64], z: &[f64]) -> Result<f64> {
        check_dims(self.p, self.obs_dim, theta, z, None)?;
        Ok((self.loss_fn)(theta, z))
    }

    fn gradient_into(&self, theta: &[f64], z: &[f64], out: &mut [f64]) -> Result<()> {
        check_dims(self.p, self.obs_dim, theta, z, Some(out.len()))?;
        let g = (self.gradient_fn)(theta, z);
        if g.len() != self.p {
            return Err(Error::Dimension {
                context: "custom gradient",
                expected: self.p,
                actual: g.len(),
            });
        }
        out.copy_from_slice(&g);
        Ok(())
    }

    fn hessian_into(&self, theta: &[f64], z: &[f64], out: &mut Matrix) -> Result<()> {
        check_dims(self.p, self.obs_dim, theta, z, None)?;
        check_hessian_out(self.p, out)?;
        let h = (self.hessian_fn)(theta, z);
        if h.rows() != self.p || h.cols() != self.p {
            return Err(Error::Dimension {
                context: "custom Hessian",
                expected: self.p,
                actual: h.rows(),
            });
        }
        out.as_mut_slice().copy_from_slice(h.as_slice());
        Ok(())
    }
}

/// The built-in model families, selectable at runtime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinModel {
    Mean(MeanModel),
    Linear(LinearModel),
    Logistic(LogisticModel),
}

impl BuiltinModel {
    pub fn mean(p: usize) -> Result<Self> {
        MeanModel::new(p).map(Self::Mean)
    }

    pub fn linear(p: usize) -> Result<Self> {
        LinearModel::new(p).map(Self::Linear)
    }

    pub fn logistic(p: usize) -> Result<Self> {
        LogisticModel::new(p).map(Self::Logistic)
    }

    fn inner(&self) -> &dyn LossModel {
        match self {
            Self::Mean(m) => m,
            Self::Linear(m) => m,
            Self::Logistic(m) => m,
        }
    }
}

impl LossModel for BuiltinModel {
    fn param_dim(&self) -> usize {
        self.inner().param_dim()
    }
    fn obs_dim(&self) -> usize {
        self.inner().obs_dim()
    }
    fn loss(&self, theta: &[f64], z: &[f64]) -> Result<f64> {
        self.inner().loss(theta, z)
    }
    fn gradient_into(&self, theta: &[f64], z: &[f64], out: &mut [f64]) -> Result<()> {
        self.inner().gradient_into(theta, z, out)
    }
    fn hessian_into(&self, theta: &[f64], z: &[f64], out: &mut Matrix) -> Result<()> {
        self.inner().hessian_into(theta, z, out)
    }
}

/// Central finite-difference gradient of `model.loss` with step
/// `h = 1e-6 · max(1, |θ_i|)`.
pub fn finite_difference_gradient<M: LossModel + ?Sized>(
    model: &M,
    theta: &[f64],
    z: &[f64],
) -> Result<Vec<f64>> {
    let mut probe = theta.to_vec();
    let mut out = vec![0.0; theta.len()];
    for i in 0..theta.len() {
        let h = 1e-6 * theta[i].abs().max(1.0);
        probe[i] = theta[i] + h;
        let up = model.loss(&probe, z)?;
        probe[i] = theta[i] - h;
        let down = model.loss(&probe, z)?;
        probe[i] = theta[i];
        out[i] = (up - down) / (2.0 * h);
    }
    Ok(out)
}

/// Central finite-difference Jacobian of `model.gradient`.
pub fn finite_difference_hessian<M: LossModel + ?Sized>(
    model: &M,
    theta: &[f64],
    z: &[f64],
) -> Result<Matrix> {
    let p = theta.len();
    let mut probe = theta.to_vec();
    let mut out = Matrix::zeros(p, p);
    let mut up = vec![0.0; p];
    let mut down = vec![0.0; p];
    for j in 0..p {
        let h = 1e-6 * theta[j].abs().max(1.0);
        probe[j] = theta[j] + h;
        model.gradient_into(&probe, z, &mut up)?;
        probe[j] = theta[j] - h;
        model.gradient_into(&probe, z, &mut down)?;
        probe[j] = theta[j];
        for i in 0..p {
            out[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    Ok(out)
}
