//! The online estimator: projected SGD iterates, their running average, and
//! running averages of per-observation Hessians and gradient outer products
//! evaluated at the current average.

use alloc::vec;
use alloc::vec::Vec;

use crate::constraint::Constraint;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::models::LossModel;

/// Steps between re-projections of the iterate and the average onto the
/// affine set, to stop floating-point drift.
pub const REPROJECT_EVERY: u64 = 10_000;

/// Step sizes `γ_t = γ · t^(−ρ)` with `γ > 0` and `½ < ρ < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRate {
    gamma: f64,
    rho: f64,
}

impl LearningRate {
    pub fn new(gamma: f64, rho: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::Domain {
                name: "gamma",
                value: gamma,
                expected: "gamma > 0",
            });
        }
        if !(rho > 0.5 && rho < 1.0) {
            return Err(Error::Domain {
                name: "rho",
                value: rho,
                expected: "0.5 < rho < 1",
            });
        }
        Ok(Self { gamma, rho })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Step size at step `t ≥ 1`.
    #[inline]
    pub fn rate(&self, t: u64) -> f64 {
        self.gamma * libm::pow(t as f64, -self.rho)
    }
}

impl Default for LearningRate {
    /// `γ_t = t^(−0.505)`.
    fn default() -> Self {
        Self {
            gamma: 1.0,
            rho: 0.505,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    grad: Vec<f64>,
    work: Vec<f64>,
    hess: Option<Matrix>,
}

impl Scratch {
    fn ensure(&mut self, p: usize) {
        if self.grad.len() != p {
            self.grad = vec![0.0; p];
            self.work = vec![0.0; p];
        }
        if self.hess.as_ref().is_none_or(|h| h.rows() != p) {
            self.hess = Some(Matrix::zeros(p, p));
        }
    }
}

/// Single-owner sequential estimator state.
///
/// After `t` observations it holds the iterate `θ_t`, the average
/// `θ̄_t = (1/t) Σ θ_s`, and
/// `Ĝ_t = (1/t) Σ ∇²l(θ̄_s, Z_s)`, `Ŝ_t = (1/t) Σ ∇l(θ̄_s, Z_s) ∇l(θ̄_s, Z_s)ᵀ`.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    t: u64,
    theta: Vector,
    theta_bar: Vector,
    g_hat: Matrix,
    s_hat: Matrix,
    constraint: Constraint,
    schedule: LearningRate,
    scratch: Scratch,
}

impl PartialEq for EstimatorState {
    fn eq(&self, other: &Self) -> bool {
        self.t == other.t
            && self.theta == other.theta
            && self.theta_bar == other.theta_bar
            && self.g_hat == other.g_hat
            && self.s_hat == other.s_hat
            && self.constraint == other.constraint
            && self.schedule == other.schedule
    }
}

impl EstimatorState {
    /// Starts at `θ₀` projected onto the feasible set, or at `c` when no
    /// starting point is given.
    pub fn init<M: LossModel + ?Sized>(
        model: &M,
        constraint: Constraint,
        schedule: LearningRate,
        theta0: Option<&[f64]>,
    ) -> Result<Self> {
        let p = model.param_dim();
        constraint.check_dim(p)?;
        let mut theta = match theta0 {
            Some(t0) => {
                if t0.len() != p {
                    return Err(Error::Dimension {
                        context: "initial value",
                        expected: p,
                        actual: t0.len(),
                    });
                }
                Vector::new(t0.to_vec())?
            }
            None => Vector::from(constraint.offset()),
        };
        constraint.project(&mut theta);
        let mut scratch = Scratch::default();
        scratch.ensure(p);
        Ok(Self {
            t: 0,
            theta_bar: theta.clone(),
            theta,
            g_hat: Matrix::zeros(p, p),
            s_hat: Matrix::zeros(p, p),
            constraint,
            schedule,
            scratch,
        })
    }

    /// Rebuilds a state from its components, e.g. from a checkpoint.
    pub fn from_parts(
        t: u64,
        theta: Vec<f64>,
        theta_bar: Vec<f64>,
        g_hat: Matrix,
        s_hat: Matrix,
        constraint: Constraint,
        schedule: LearningRate,
    ) -> Result<Self> {
        let p = constraint.param_dim();
        for (context, len) in [("theta", theta.len()), ("theta_bar", theta_bar.len())] {
            if len != p {
                return Err(Error::Dimension {
                    context,
                    expected: p,
                    actual: len,
                });
            }
        }
        for m in [&g_hat, &s_hat] {
            if m.rows() != p || m.cols() != p {
                return Err(Error::Dimension {
                    context: "moment matrix",
                    expected: p,
                    actual: m.rows(),
                });
            }
            if !m.is_finite() {
                return Err(Error::NonFinite("moment matrix"));
            }
            if m.asymmetry() > 1e-10 * m.frobenius_norm().max(1.0) {
                return Err(Error::Data("moment matrix is not symmetric"));
            }
        }
        let theta = Vector::new(theta)?;
        let theta_bar = Vector::new(theta_bar)?;
        let tol = constraint.tolerance();
        if constraint.residual(&theta) > tol || constraint.residual(&theta_bar) > tol {
            return Err(Error::Data("state is not feasible for its constraint"));
        }
        let mut scratch = Scratch::default();
        scratch.ensure(p);
        Ok(Self {
            t,
            theta,
            theta_bar,
            g_hat,
            s_hat,
            constraint,
            schedule,
            scratch,
        })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_bar(&self) -> &[f64] {
        &self.theta_bar
    }

    pub fn g_hat(&self) -> &Matrix {
        &self.g_hat
    }

    pub fn s_hat(&self) -> &Matrix {
        &self.s_hat
    }

    pub fn constraint(&self) -> &Constraint {
        &self.constraint
    }

    pub fn schedule(&self) -> LearningRate {
        self.schedule
    }

    pub fn param_dim(&self) -> usize {
        self.theta.dim()
    }

    /// Largest of `‖Bθ_t − b‖` and `‖Bθ̄_t − b‖`.
    pub fn feasibility_residual(&self) -> f64 {
        self.constraint
            .residual(&self.theta)
            .max(self.constraint.residual(&self.theta_bar))
    }

    /// Consumes one observation.
    ///
    /// Order: projected gradient step, then the running average, then the
    /// moment averages evaluated at the new average.
    pub fn step<M: LossModel + ?Sized>(&mut self, model: &M, z: &[f64]) -> Result<()> {
        let p = self.param_dim();
        if model.param_dim() != p {
            return Err(Error::Dimension {
                context: "model parameter dimension",
                expected: p,
                actual: model.param_dim(),
            });
        }
        self.scratch.ensure(p);
        let t_next = self.t + 1;
        let gamma = self.schedule.rate(t_next);
        let Scratch { grad, work, hess } = &mut self.scratch;
        let hess = hess.as_mut().expect("scratch allocated");

        model.gradient_into(&self.theta, z, grad)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::StepNumerical {
                t: t_next,
                theta: self.theta.to_vec(),
            });
        }
        for (th, g) in self.theta.iter_mut().zip(grad.iter()) {
            *th -= gamma * g;
        }
        self.constraint.project_with(&mut self.theta, work);
        if self.theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepNumerical {
                t: t_next,
                theta: self.theta.to_vec(),
            });
        }

        let n = t_next as f64;
        let keep = (n - 1.0) / n;
        let add = 1.0 / n;
        for (avg, &th) in self.theta_bar.iter_mut().zip(self.theta.iter()) {
            *avg = keep * *avg + add * th;
        }

        if t_next % REPROJECT_EVERY == 0 {
            self.constraint.project_with(&mut self.theta, work);
            self.constraint.project_with(&mut self.theta_bar, work);
        }

        model.gradient_into(&self.theta_bar, z, grad)?;
        model.hessian_into(&self.theta_bar, z, hess)?;
        if grad.iter().any(|g| !g.is_finite()) || !hess.is_finite() {
            return Err(Error::StepNumerical {
                t: t_next,
                theta: self.theta.to_vec(),
            });
        }
        let g_hat = self.g_hat.as_mut_slice();
        let s_hat = self.s_hat.as_mut_slice();
        let h = hess.as_slice();
        for i in 0..p {
            for j in 0..p {
                let k = i * p + j;
                g_hat[k] = keep * g_hat[k] + add * h[k];
                s_hat[k] = keep * s_hat[k] + add * (grad[i] * grad[j]);
            }
        }
        self.t = t_next;
        Ok(())
    }

    /// Folds [`step`](Self::step) over a sequence of observations in order.
    pub fn run_stream<M, I, Z>(&mut self, model: &M, observations: I) -> Result<()>
    where
        M: LossModel + ?Sized,
        I: IntoIterator<Item = Z>,
        Z: AsRef<[f64]>,
    {
        for (index, z) in observations.into_iter().enumerate() {
            self.step(model, z.as_ref())
                .map_err(|e| Error::AtObservation {
                    index,
                    source: alloc::boxed::Box::new(e),
                })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{LinearModel, MeanModel};

    fn equal_coords() -> Constraint {
        Constraint::new(Matrix::from_rows(&[[1.0, -1.0]]).unwrap(), vec![0.0]).unwrap()
    }

    #[test]
    fn schedule_validation() {
        assert!(LearningRate::new(1.0, 0.5).is_err());
        assert!(LearningRate::new(1.0, 1.0).is_err());
        assert!(LearningRate::new(0.0, 0.7).is_err());
        assert!(LearningRate::new(-1.0, 0.7).is_err());
        let lr = LearningRate::new(2.0, 0.75).unwrap();
        assert_eq!(lr.rate(1), 2.0);
        assert!((lr.rate(16) - 2.0 / 8.0).abs() < 1e-15);
        assert_eq!(LearningRate::default(), LearningRate::new(1.0, 0.505).unwrap());
    }

    #[test]
    fn init_defaults_to_offset() {
        let m = MeanModel::new(2).unwrap();
        let s = EstimatorState::init(&m, equal_coords(), LearningRate::default(), None).unwrap();
        assert_eq!(s.theta(), &[0.0, 0.0]);
        assert_eq!(s.theta_bar(), &[0.0, 0.0]);
        assert_eq!(s.t(), 0);
        assert_eq!(s.g_hat(), &Matrix::zeros(2, 2));
    }

    #[test]
    fn init_projects_start() {
        let m = MeanModel::new(2).unwrap();
        let s = EstimatorState::init(&m, equal_coords(), LearningRate::default(), Some(&[3.0, 1.0]))
            .unwrap();
        assert!(s.theta().iter().all(|v| (v - 2.0).abs() < 1e-14));
        let u = EstimatorState::init(
            &m,
            Constraint::unconstrained(2),
            LearningRate::default(),
            Some(&[3.0, 1.0]),
        )
        .unwrap();
        assert_eq!(u.theta(), &[3.0, 1.0]);
    }

    #[test]
    fn init_dimension_mismatch() {
        let m = MeanModel::new(2).unwrap();
        assert!(EstimatorState::init(&m, equal_coords(), LearningRate::default(), Some(&[1.0]))
            .is_err());
        assert!(EstimatorState::init(
            &m,
            Constraint::unconstrained(3),
            LearningRate::default(),
            None
        )
        .is_err());
    }

    #[test]
    fn first_step_unconstrained() {
        let m = MeanModel::new(2).unwrap();
        let mut s = EstimatorState::init(
            &m,
            Constraint::unconstrained(2),
            LearningRate::new(1.0, 0.505).unwrap(),
            None,
        )
        .unwrap();
        s.step(&m, &[1.0, 2.0]).unwrap();
        assert_eq!(s.theta(), &[1.0, 2.0]);
        assert_eq!(s.theta_bar(), &[1.0, 2.0]);
        assert_eq!(s.t(), 1);
        // Moments are evaluated at θ̄₁ = z₁, so the gradient vanishes.
        assert_eq!(s.s_hat(), &Matrix::zeros(2, 2));
        assert_eq!(s.g_hat(), &Matrix::identity(2));
    }

    #[test]
    fn first_step_constrained() {
        let m = MeanModel::new(2).unwrap();
        let mut s =
            EstimatorState::init(&m, equal_coords(), LearningRate::new(1.0, 0.505).unwrap(), None)
                .unwrap();
        s.step(&m, &[1.0, 2.0]).unwrap();
        assert_eq!(s.theta(), &[1.5, 1.5]);
        assert_eq!(s.theta_bar(), &[1.5, 1.5]);
    }

    #[test]
    fn fixed_point() {
        let m = LinearModel::new(2).unwrap();
        let mut s = EstimatorState::init(
            &m,
            equal_coords(),
            LearningRate::default(),
            Some(&[0.5, 0.5]),
        )
        .unwrap();
        // y = xᵀθ, zero residual.
        s.step(&m, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(s.theta(), &[0.5, 0.5]);
    }

    #[test]
    fn empty_stream_is_noop() {
        let m = MeanModel::new(2).unwrap();
        let mut s = EstimatorState::init(&m, equal_coords(), LearningRate::default(), None).unwrap();
        let before = s.clone();
        s.run_stream(&m, Vec::<Vec<f64>>::new()).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn run_stream_tags_observation_index() {
        let m = MeanModel::new(2).unwrap();
        let mut s = EstimatorState::init(&m, equal_coords(), LearningRate::default(), None).unwrap();
        let obs = vec![vec![1.0, 2.0], vec![1.0], vec![0.0, 0.0]];
        match s.run_stream(&m, &obs) {
            Err(Error::AtObservation { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(s.t(), 1);
    }

    #[test]
    fn non_finite_gradient_reports_step() {
        let m = MeanModel::new(1).unwrap();
        let mut s = EstimatorState::init(
            &m,
            Constraint::unconstrained(1),
            LearningRate::default(),
            None,
        )
        .unwrap();
        s.step(&m, &[1.0]).unwrap();
        match s.step(&m, &[f64::INFINITY]) {
            Err(Error::StepNumerical { t, theta }) => {
                assert_eq!(t, 2);
                assert_eq!(theta, vec![1.0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn from_parts_validates() {
        let c = equal_coords();
        let ok = EstimatorState::from_parts(
            3,
            vec![1.0, 1.0],
            vec![0.5, 0.5],
            Matrix::identity(2),
            Matrix::identity(2),
            c.clone(),
            LearningRate::default(),
        );
        assert!(ok.is_ok());
        let infeasible = EstimatorState::from_parts(
            3,
            vec![1.0, 0.0],
            vec![0.5, 0.5],
            Matrix::identity(2),
            Matrix::identity(2),
            c,
            LearningRate::default(),
        );
        assert!(infeasible.is_err());
    }
}
