//! Plug-in covariance, confidence intervals for smooth functionals, the
//! constrained-vs-unconstrained efficiency comparison, and the online
//! specification test of the constraint.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::constraint::Constraint;
use crate::dist::{chi2_quantile, chi2_sf, noncentral_chi2_cdf, normal_quantile, normal_two_sided_p};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorState, LearningRate};
use crate::linalg::{dot, inverse_spd, pinv_truncated, symmetric_eigen, Matrix, Vector};
use crate::models::LossModel;

/// Relative eigenvalue floor for matrices that must be inverted outright.
pub const INVERSE_FLOOR: f64 = 1e-8;

/// Quadratic forms below `-VARIANCE_CLAMP` are reported as errors; those in
/// `[-VARIANCE_CLAMP, 0)` are set to zero.
pub const VARIANCE_CLAMP: f64 = 1e-12;

/// Relative eigenvalue threshold used to count the rank of a weight matrix.
const RANK_CHECK: f64 = 1e-8;

fn sandwich(outer: &Matrix, inner: &Matrix) -> Result<Matrix> {
    Ok(outer.matmul(inner)?.matmul(outer)?.symmetrized())
}

fn project_both_sides(p: &Matrix, a: &Matrix) -> Result<Matrix> {
    sandwich(p, a)
}

/// `(PĜP)⁻ Ŝ (PĜP)⁻` with the pseudoinverse truncated at rank `d`.
pub fn asymptotic_covariance(state: &EstimatorState) -> Result<Matrix> {
    let p = state.param_dim();
    if state.t() < p as u64 {
        return Err(Error::NotIdentified("fewer observations than parameters"));
    }
    plug_in_covariance(state.g_hat(), state.s_hat(), state.constraint())
}

/// `(PGP)⁻ S (PGP)⁻` for given `G`, `S` and constraint.
pub fn plug_in_covariance(g: &Matrix, s: &Matrix, constraint: &Constraint) -> Result<Matrix> {
    let p = constraint.param_dim();
    let d = constraint.rank();
    if d == 0 {
        return Ok(Matrix::zeros(p, p));
    }
    let pgp = if constraint.is_unconstrained() {
        g.symmetrized()
    } else {
        project_both_sides(constraint.projection(), g)?
    };
    let inv = pinv_truncated(&pgp, d).map_err(|e| match e {
        Error::RankDeficient { .. } => {
            Error::NotIdentified("projected Hessian average is rank deficient")
        }
        other => other,
    })?;
    sandwich(&inv, s)
}

/// A smooth scalar functional `g(θ)` with gradient.
pub trait Functional {
    fn value(&self, theta: &[f64]) -> f64;
    fn gradient(&self, theta: &[f64]) -> Vec<f64>;
}

/// `g(θ) = θ_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coordinate(pub usize);

impl Functional for Coordinate {
    fn value(&self, theta: &[f64]) -> f64 {
        theta[self.0]
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = alloc::vec![0.0; theta.len()];
        g[self.0] = 1.0;
        g
    }
}

/// `g(θ) = aᵀθ + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFunctional {
    pub weights: Vec<f64>,
    pub offset: f64,
}

impl Functional for LinearFunctional {
    fn value(&self, theta: &[f64]) -> f64 {
        dot(&self.weights, theta) + self.offset
    }

    fn gradient(&self, _theta: &[f64]) -> Vec<f64> {
        self.weights.clone()
    }
}

/// Interval estimate for one functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub estimate: f64,
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
    /// Two-sided normal p-value for `g(θ*) = 0`.
    pub p_value: f64,
}

/// Interval `g(θ̄) ± z_{α/2} √(∇gᵀ V ∇g / T)` from a precomputed covariance.
pub fn interval_from_covariance<G: Functional + ?Sized>(
    covariance: &Matrix,
    theta_bar: &[f64],
    sample_size: u64,
    g: &G,
    alpha: f64,
) -> Result<Interval> {
    let z = normal_quantile(alpha / 2.0)?;
    let grad = g.gradient(theta_bar);
    if grad.len() != theta_bar.len() {
        return Err(Error::Dimension {
            context: "functional gradient",
            expected: theta_bar.len(),
            actual: grad.len(),
        });
    }
    let mut q = covariance.quadratic_form(&grad)?;
    if q < -VARIANCE_CLAMP {
        return Err(Error::NegativeVariance(q));
    }
    if q < 0.0 {
        q = 0.0;
    }
    let std_error = libm::sqrt(q / sample_size as f64);
    let estimate = g.value(theta_bar);
    let half = z * std_error;
    let p_value = if std_error > 0.0 {
        normal_two_sided_p(estimate / std_error)
    } else if estimate == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(Interval {
        estimate,
        std_error,
        lower: estimate - half,
        upper: estimate + half,
        p_value,
    })
}

/// Confidence interval at level `1 − alpha` for `g(θ*)`.
pub fn confidence_interval<G: Functional + ?Sized>(
    state: &EstimatorState,
    g: &G,
    alpha: f64,
) -> Result<Interval> {
    let cov = asymptotic_covariance(state)?;
    interval_from_covariance(&cov, state.theta_bar(), state.t(), g, alpha)
}

/// Point estimate, plug-in covariance and per-coordinate intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceReport {
    pub theta_bar: Vector,
    pub covariance: Matrix,
    pub sample_size: u64,
    pub alpha: f64,
    pub per_target: Vec<Interval>,
}

impl InferenceReport {
    pub fn from_state(state: &EstimatorState, alpha: f64) -> Result<Self> {
        let covariance = asymptotic_covariance(state)?;
        let per_target = (0..state.param_dim())
            .map(|j| {
                interval_from_covariance(
                    &covariance,
                    state.theta_bar(),
                    state.t(),
                    &Coordinate(j),
                    alpha,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            theta_bar: Vector::from(state.theta_bar()),
            covariance,
            sample_size: state.t(),
            alpha,
            per_target,
        })
    }
}

/// `V_I − V_P = G⁻¹SG⁻¹ − (PGP)⁻S(PGP)⁻`.
pub fn efficiency_gap(g: &Matrix, s: &Matrix, projection: &Matrix, d: usize) -> Result<Matrix> {
    let g_inv = inverse_spd(g, INVERSE_FLOOR)?;
    let v_i = sandwich(&g_inv, s)?;
    let pgp = project_both_sides(projection, g)?;
    let v_p = if d == 0 {
        Matrix::zeros(g.rows(), g.cols())
    } else {
        sandwich(&pinv_truncated(&pgp, d)?, s)?
    };
    v_i.sub(&v_p)
}

/// `W = (I − P) G⁻¹ S G⁻¹ (I − P)`, with `G` inverted outright.
pub fn weight_matrix(g: &Matrix, s: &Matrix, projection: &Matrix) -> Result<Matrix> {
    let g_inv = inverse_spd(g, INVERSE_FLOOR).map_err(|e| match e {
        Error::NotIdentified(_) => {
            Error::NotIdentified("unconstrained Hessian average is numerically singular")
        }
        other => other,
    })?;
    let p = projection.rows();
    let complement = Matrix::identity(p).sub(projection)?;
    sandwich(&complement, &sandwich(&g_inv, s)?)
}

/// `T · δᵀ W⁻ δ` with `δ = θ̄_P − θ̄_I` and `W⁻` truncated at rank `df`.
pub fn kappa_statistic(
    theta_bar_p: &[f64],
    theta_bar_i: &[f64],
    weight: &Matrix,
    df: usize,
    sample_size: u64,
) -> Result<f64> {
    let w_inv = pinv_truncated(weight, df)?;
    let delta: Vec<f64> = theta_bar_p
        .iter()
        .zip(theta_bar_i)
        .map(|(a, b)| a - b)
        .collect();
    let q = w_inv.quadratic_form(&delta)?;
    Ok((sample_size as f64 * q).max(0.0))
}

/// Outcome of the specification test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub kappa: f64,
    pub df: usize,
    pub p_value: f64,
    pub alpha: f64,
    pub critical_value: f64,
    pub reject: bool,
    pub sample_size: u64,
    pub theta_bar_p: Vector,
    pub theta_bar_i: Vector,
}

/// Two estimators advanced on the same observations: one projected onto the
/// constraint, one unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecificationTest {
    constrained: EstimatorState,
    unconstrained: EstimatorState,
}

impl SpecificationTest {
    /// Both streams start from the same `θ₀` (or `c`), projected into their
    /// own feasible sets.
    pub fn new<M: LossModel + ?Sized>(
        model: &M,
        constraint: Constraint,
        schedule: LearningRate,
        theta0: Option<&[f64]>,
    ) -> Result<Self> {
        if constraint.df() == 0 {
            return Err(Error::DegenerateTest);
        }
        let p = model.param_dim();
        let start: Vector = match theta0 {
            Some(t) => Vector::new(t.to_vec())?,
            None => Vector::from(constraint.offset()),
        };
        let unconstrained =
            EstimatorState::init(model, Constraint::unconstrained(p), schedule, Some(&start))?;
        let constrained = EstimatorState::init(model, constraint, schedule, Some(&start))?;
        Ok(Self {
            constrained,
            unconstrained,
        })
    }

    pub fn observe<M: LossModel + ?Sized>(&mut self, model: &M, z: &[f64]) -> Result<()> {
        self.constrained.step(model, z)?;
        self.unconstrained.step(model, z)
    }

    pub fn run_stream<M, I, Z>(&mut self, model: &M, observations: I) -> Result<()>
    where
        M: LossModel + ?Sized,
        I: IntoIterator<Item = Z>,
        Z: AsRef<[f64]>,
    {
        for (index, z) in observations.into_iter().enumerate() {
            self.observe(model, z.as_ref())
                .map_err(|e| Error::AtObservation {
                    index,
                    source: Box::new(e),
                })?;
        }
        Ok(())
    }

    pub fn constrained(&self) -> &EstimatorState {
        &self.constrained
    }

    pub fn unconstrained(&self) -> &EstimatorState {
        &self.unconstrained
    }

    /// `Ŵ` built from the unconstrained stream.
    pub fn weight(&self) -> Result<Matrix> {
        weight_matrix(
            self.unconstrained.g_hat(),
            self.unconstrained.s_hat(),
            self.constrained.constraint().projection(),
        )
    }

    pub fn result(&self, alpha: f64) -> Result<TestResult> {
        let df = self.constrained.constraint().df();
        let critical_value = chi2_quantile(alpha, df)?;
        let weight = self.weight()?;
        let t = self.constrained.t();
        let kappa = kappa_statistic(
            self.constrained.theta_bar(),
            self.unconstrained.theta_bar(),
            &weight,
            df,
            t,
        )
        .map_err(|e| match e {
            Error::RankDeficient { .. } => {
                Error::NotIdentified("weight matrix has fewer than p - d positive eigenvalues")
            }
            other => other,
        })?;
        Ok(TestResult {
            kappa,
            df,
            p_value: chi2_sf(kappa, df),
            alpha,
            critical_value,
            reject: kappa > critical_value,
            sample_size: t,
            theta_bar_p: Vector::from(self.constrained.theta_bar()),
            theta_bar_i: Vector::from(self.unconstrained.theta_bar()),
        })
    }
}

/// Runs the specification test over a full observation sequence.
pub fn specification_test<M, I, Z>(
    observations: I,
    model: &M,
    constraint: Constraint,
    schedule: LearningRate,
    alpha: f64,
) -> Result<TestResult>
where
    M: LossModel + ?Sized,
    I: IntoIterator<Item = Z>,
    Z: AsRef<[f64]>,
{
    let mut test = SpecificationTest::new(model, constraint, schedule, None)?;
    test.run_stream(model, observations)?;
    test.result(alpha)
}

/// Asymptotic power `1 − F(χ²_α(df); df, μᵀW⁻μ)` under a local alternative.
pub fn local_power(mu: &[f64], weight: &Matrix, df: usize, alpha: f64) -> Result<f64> {
    let eig = symmetric_eigen(weight)?;
    let n = eig.values.len();
    if df == 0 || df > n {
        return Err(Error::RankMismatch {
            expected: df,
            found: n,
        });
    }
    let floor = RANK_CHECK * eig.values[0].max(0.0);
    let found = eig.values.iter().filter(|&&l| l > floor).count();
    if found != df {
        return Err(Error::RankMismatch {
            expected: df,
            found,
        });
    }
    let w_inv = crate::linalg::pinv_from_eigen(&eig, df)?;
    let noncentrality = w_inv.quadratic_form(mu)?.max(0.0);
    let critical = chi2_quantile(alpha, df)?;
    Ok(1.0 - noncentral_chi2_cdf(critical, df, noncentrality)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::MeanModel;
    use alloc::vec;

    fn half_matrix() -> Matrix {
        Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap()
    }

    #[test]
    fn efficiency_gap_equality_case() {
        let g = Matrix::from_rows(&[[2.0, 0.3], [0.3, 1.0]]).unwrap();
        let gap = efficiency_gap(&g, &g, &Matrix::identity(2), 2).unwrap();
        assert!(gap.frobenius_norm() < 1e-12);
    }

    #[test]
    fn efficiency_gap_mean_example_is_indefinite() {
        let sigma2 = 2.0;
        let s = Matrix::from_diagonal(&[sigma2, 3.0 * sigma2]);
        let gap = efficiency_gap(&Matrix::identity(2), &s, &half_matrix(), 1).unwrap();
        let expected = Matrix::from_rows(&[[0.0, -sigma2], [-sigma2, 2.0 * sigma2]]).unwrap();
        assert!(gap.sub(&expected).unwrap().frobenius_norm() < 1e-12);
        let eig = symmetric_eigen(&gap).unwrap();
        assert!(eig.values[0] > 0.0 && eig.values[1] < 0.0);
    }

    #[test]
    fn efficiency_gap_identity_case() {
        let gap = efficiency_gap(&Matrix::identity(2), &Matrix::identity(2), &half_matrix(), 1)
            .unwrap();
        let expected = Matrix::identity(2).sub(&half_matrix()).unwrap();
        assert!(gap.sub(&expected).unwrap().frobenius_norm() < 1e-12);
        let eig = symmetric_eigen(&gap).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-12 && eig.values[1].abs() < 1e-12);
    }

    #[test]
    fn efficiency_gap_non_pd() {
        let g = Matrix::from_diagonal(&[1.0, 0.0]);
        assert!(matches!(
            efficiency_gap(&g, &g, &Matrix::identity(2), 2),
            Err(Error::NotIdentified(_))
        ));
    }

    #[test]
    fn local_power_null_and_limit() {
        let w = Matrix::from_diagonal(&[2.0, 0.0]);
        let p0 = local_power(&[0.0, 0.0], &w, 1, 0.05).unwrap();
        assert!((p0 - 0.05).abs() < 1e-9);
        let big = local_power(&[100.0, 0.0], &w, 1, 0.05).unwrap();
        assert!(big > 1.0 - 1e-9);
    }

    #[test]
    fn local_power_textbook_value() {
        // δ = (z_{0.025} + z_{0.2})² gives power 0.8 for a one-sided normal
        // shift; the two-sided χ²(1) test adds the negligible lower tail.
        let z = normal_quantile(0.025).unwrap() + normal_quantile(0.2).unwrap();
        let delta = z * z;
        assert!((delta - 7.85).abs() < 0.01);
        let w = Matrix::identity(1);
        let power = local_power(&[libm::sqrt(delta)], &w, 1, 0.05).unwrap();
        assert!((power - 0.80).abs() < 0.01, "power {power}");
        let lower_tail = crate::dist::normal_cdf(-normal_quantile(0.025).unwrap() - libm::sqrt(delta));
        assert!((power - 0.8 - lower_tail).abs() < 1e-6);
    }

    #[test]
    fn local_power_rank_mismatch() {
        let w = Matrix::identity(2);
        assert!(matches!(
            local_power(&[1.0, 0.0], &w, 1, 0.05),
            Err(Error::RankMismatch { .. })
        ));
        let w = Matrix::from_diagonal(&[1.0, 0.0]);
        assert!(matches!(
            local_power(&[1.0, 0.0], &w, 2, 0.05),
            Err(Error::RankMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_test_rejected() {
        let m = MeanModel::new(2).unwrap();
        assert!(matches!(
            SpecificationTest::new(&m, Constraint::unconstrained(2), LearningRate::default(), None),
            Err(Error::DegenerateTest)
        ));
    }

    #[test]
    fn kappa_zero_when_estimates_agree() {
        let w = Matrix::from_diagonal(&[1.0, 0.0]);
        let k = kappa_statistic(&[1.0, 2.0], &[1.0, 2.0], &w, 1, 1000).unwrap();
        assert_eq!(k, 0.0);
    }

    #[test]
    fn interval_alpha_to_one_collapses() {
        let cov = Matrix::identity(2);
        let iv = interval_from_covariance(&cov, &[1.0, 2.0], 100, &Coordinate(1), 1.0 - 1e-12)
            .unwrap();
        assert!((iv.upper - iv.lower) < 1e-10);
        assert_eq!(iv.estimate, 2.0);
        assert!((iv.std_error - 0.1).abs() < 1e-15);
    }

    #[test]
    fn negative_variance_handling() {
        let cov = Matrix::from_diagonal(&[-1e-13, -1.0]);
        let iv = interval_from_covariance(&cov, &[0.0, 0.0], 10, &Coordinate(0), 0.05).unwrap();
        assert_eq!(iv.std_error, 0.0);
        assert_eq!(iv.p_value, 1.0);
        assert!(matches!(
            interval_from_covariance(&cov, &[0.0, 0.0], 10, &Coordinate(1), 0.05),
            Err(Error::NegativeVariance(_))
        ));
    }

    #[test]
    fn covariance_needs_enough_observations() {
        let m = MeanModel::new(3).unwrap();
        let mut s = EstimatorState::init(&m, Constraint::unconstrained(3), LearningRate::default(), None)
            .unwrap();
        s.step(&m, &[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(asymptotic_covariance(&s), Err(Error::NotIdentified(_))));
    }

    #[test]
    fn mean_model_unconstrained_covariance_is_s_hat() {
        let m = MeanModel::new(2).unwrap();
        let mut s = EstimatorState::init(&m, Constraint::unconstrained(2), LearningRate::default(), None)
            .unwrap();
        let data = vec![[1.0, 0.5], [-0.3, 2.0], [0.7, -1.1], [2.2, 0.1], [0.0, 0.4]];
        s.run_stream(&m, &data).unwrap();
        assert_eq!(asymptotic_covariance(&s).unwrap(), *s.s_hat());
    }
}
