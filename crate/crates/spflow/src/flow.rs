//! The Langevin flow core: stationary drift, curvature diffusion matrix,
//! integration rules, and the pseudo-time schedule with its convexity /
//! Lipschitz constant estimation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SpfError};
use crate::linalg::{self, SymMatrix};
use crate::scalar::Real;

/// Callable view of the flow's target `log pi`: value, gradient and Hessian.
pub struct FlowContext<'a, T: Real> {
    pub dim: usize,
    pub value: Box<dyn Fn(&DVector<T>) -> T + Sync + 'a>,
    pub grad: Box<dyn Fn(&DVector<T>) -> DVector<T> + Sync + 'a>,
    pub hess: Box<dyn Fn(&DVector<T>) -> SymMatrix<T> + Sync + 'a>,
}

/// Integration rule for one sub-step of the flow SDE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationMethod {
    /// Exponential-Euler rule: no matrix exponentials, the default.
    #[default]
    ExpEuler,
    /// Ozaki rule with matrix exponentials of `-dl/2 D^-1` and `-dl D^-1`.
    Ozaki,
}

/// Pseudo-time horizon and step selection.
#[derive(Debug, Clone)]
pub struct FlowSchedule<T: Real> {
    /// Pseudo-time horizon `T`.
    pub horizon: T,
    /// Integration step.
    pub dlam: T,
    /// Number of sub-steps, `ceil(horizon / dlam)` before capping.
    pub steps: usize,
    pub gamma: T,
    /// Strong-convexity constant `m`.
    pub m_lower: T,
    /// Gradient-Lipschitz constant `M`.
    pub m_upper: T,
    pub epsilon: T,
    /// True when the step count was clipped to the configured cap and the
    /// step rescaled to `horizon / cap`.
    pub capped: bool,
}

/// Knobs of the flow integration with the benchmark defaults.
#[derive(Debug, Clone)]
pub struct FlowOptions<T: Real> {
    /// Target total-variation precision in (0, 1/2).
    pub epsilon: T,
    /// Hard cap on the number of sub-steps.
    pub l_cap: usize,
    pub method: IntegrationMethod,
    /// Evaluate the diffusion matrix once per cycle at the cloud mean
    /// instead of per particle per sub-step.
    pub frozen_d: bool,
    /// `m >= m_min_ratio * M` clamp.
    pub m_min_ratio: T,
    /// Upper clamp on `M`.
    pub m_max: T,
    /// Iteration cap of the MAP Newton ascent.
    pub newton_cap: usize,
}

impl<T: Real> Default for FlowOptions<T> {
    fn default() -> Self {
        Self {
            epsilon: T::of(0.1),
            l_cap: 200,
            method: IntegrationMethod::ExpEuler,
            frozen_d: false,
            m_min_ratio: T::of(1e-3),
            m_max: T::of(1e6),
            newton_cap: 100,
        }
    }
}

/// Estimated constants around the MAP point.
#[derive(Debug, Clone)]
pub struct BoundsEstimate<T: Real> {
    pub m_lower: T,
    pub m_upper: T,
    pub map: DVector<T>,
}

/// Flow drift `mu(x) = D grad log pi(x) / 2`.
pub fn drift<T: Real>(ctx: &FlowContext<T>, x: &DVector<T>, d: &SymMatrix<T>) -> DVector<T> {
    (d.as_matrix() * (ctx.grad)(x)) * T::of(0.5)
}

/// Diffusion matrix: inverse of the nearest-PD repair of the observed
/// information `-hess log pi(x)`. Total on any symmetric Hessian.
pub fn diffusion_matrix<T: Real>(
    ctx: &FlowContext<T>,
    x: &DVector<T>,
    eig_floor: T,
) -> SymMatrix<T> {
    let neg_hess = SymMatrix::new(-(ctx.hess)(x).into_matrix());
    let repaired = linalg::nearest_pd(&neg_hess, eig_floor);
    repaired
        .try_inverse_pd()
        .expect("repaired matrix is positive definite")
}

/// MAP Newton ascent from the best sample, then the two-sided quadratic
/// bounds over the sample set: `m` is the largest coefficient for which the
/// lower-quadratic inequality still holds on every sample (the minimum of
/// the per-sample coefficients) and `M` the smallest valid gradient-Lipschitz
/// coefficient (the maximum per-sample ratio).
pub fn estimate_bounds<T: Real>(
    ctx: &FlowContext<T>,
    samples: &[DVector<T>],
    opts: &FlowOptions<T>,
) -> Result<BoundsEstimate<T>> {
    assert!(samples.len() >= 2, "need at least two samples");
    let best = samples
        .iter()
        .map(|x| ((ctx.value)(x), x))
        .max_by(|a, b| a.0.partial_cmp(&b.0).expect("log pi must not be NaN"))
        .expect("nonempty")
        .1
        .clone();
    let map = newton_map(ctx, best, opts)?;
    Ok(bounds_at(ctx, samples, &map, opts))
}

/// The bound estimation half of [`estimate_bounds`]; usable with a fallback
/// MAP point when the Newton search diverges.
pub fn bounds_at<T: Real>(
    ctx: &FlowContext<T>,
    samples: &[DVector<T>],
    map: &DVector<T>,
    opts: &FlowOptions<T>,
) -> BoundsEstimate<T> {
    let phi_map = -(ctx.value)(map);
    let mut m_lower = T::of(f64::INFINITY);
    let mut m_upper = T::of(f64::NEG_INFINITY);
    for x in samples {
        let dx = x - map;
        let dist2 = dx.norm_squared();
        if dist2 < T::of(1e-16) {
            continue;
        }
        let phi = -(ctx.value)(x);
        let grad_phi = -(ctx.grad)(x);
        let m_i = T::of(2.0) * (phi - phi_map) / dist2;
        let big_m_i = grad_phi.norm() / dist2.sqrt();
        m_lower = m_lower.min(m_i);
        m_upper = m_upper.max(big_m_i);
    }
    // Fall back on the local curvature when no sample is usable.
    if !m_lower.is_finite() || !m_upper.is_finite() {
        let eig = nalgebra::SymmetricEigen::new(-(ctx.hess)(map).into_matrix());
        let lo = eig.eigenvalues.iter().copied().fold(T::of(f64::INFINITY), |a, b| a.min(b));
        let hi = eig
            .eigenvalues
            .iter()
            .copied()
            .fold(T::of(f64::NEG_INFINITY), |a, b| a.max(b));
        m_lower = lo;
        m_upper = hi;
    }
    let m_upper = m_upper.min(opts.m_max).max(T::of(1e-12));
    let m_lower = m_lower
        .max(opts.m_min_ratio * m_upper)
        .min(m_upper);
    BoundsEstimate {
        m_lower,
        m_upper,
        map: map.clone(),
    }
}

/// Damped Newton ascent on `log pi` with backtracking line search.
pub fn newton_map<T: Real>(
    ctx: &FlowContext<T>,
    start: DVector<T>,
    opts: &FlowOptions<T>,
) -> Result<DVector<T>> {
    let mut x = start;
    let mut value = (ctx.value)(&x);
    let grad_tol = T::of(1e-9);
    for _ in 0..opts.newton_cap {
        let g = (ctx.grad)(&x);
        if g.norm() <= grad_tol * (T::one() + value.abs()) {
            return Ok(x);
        }
        let d = diffusion_matrix(ctx, &x, T::of(1e-10));
        let dir = d.as_matrix() * &g;
        let mut alpha = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &x + &dir * alpha;
            let cand_value = (ctx.value)(&cand);
            if cand_value > value {
                x = cand;
                value = cand_value;
                accepted = true;
                break;
            }
            alpha = alpha * T::of(0.5);
        }
        if !accepted {
            // Gradient and curvature disagree so strongly that no step helps;
            // treat the current point as stationary if the gradient is small.
            if g.norm() <= T::of(1e-6) * (T::one() + value.abs()) {
                return Ok(x);
            }
            return Err(SpfError::MapSearchDiverged {
                iterations: opts.newton_cap,
            });
        }
    }
    let g = (ctx.grad)(&x);
    if g.norm() <= T::of(1e-6) * (T::one() + value.abs()) {
        return Ok(x);
    }
    Err(SpfError::MapSearchDiverged {
        iterations: opts.newton_cap,
    })
}

/// Horizon and step selection for a target TV precision.
pub fn schedule<T: Real>(
    m_lower: T,
    m_upper: T,
    dim: usize,
    epsilon: T,
    l_cap: usize,
) -> Result<FlowSchedule<T>> {
    let eps = epsilon.as_f64();
    if !(0.0..0.5).contains(&eps) || eps <= 0.0 {
        return Err(SpfError::InvalidPrecision(eps));
    }
    assert!(m_lower > T::zero() && m_lower <= m_upper, "need 0 < m <= M");
    let n = T::of(dim as f64);
    let horizon = (T::of(4.0) * (T::one() / epsilon).ln() + n * (m_upper / m_lower).ln())
        / (T::of(2.0) * m_lower);
    let gamma = (T::one() + m_upper * n * horizon / (epsilon * epsilon)) * T::of(0.5);
    let dlam = epsilon * epsilon * (T::of(2.0) * gamma - T::one())
        / (m_upper * m_upper * horizon * n * gamma);
    let steps_raw = (horizon / dlam).as_f64().ceil() as usize;
    let (steps, dlam, capped) = if steps_raw > l_cap {
        (l_cap, horizon / T::of(l_cap as f64), true)
    } else {
        (steps_raw, dlam, false)
    };
    Ok(FlowSchedule {
        horizon,
        dlam,
        steps,
        gamma,
        m_lower,
        m_upper,
        epsilon,
        capped,
    })
}

/// One SDE sub-step. `noise` is a standard-normal vector supplied by the
/// caller so that particle loops stay reproducible under any thread count.
pub fn integrate_step<T: Real>(
    ctx: &FlowContext<T>,
    x: &DVector<T>,
    d: &SymMatrix<T>,
    dlam: T,
    noise: &DVector<T>,
    method: IntegrationMethod,
) -> Result<DVector<T>> {
    let g = (ctx.grad)(x);
    match method {
        IntegrationMethod::ExpEuler => {
            let half = T::of(0.5);
            let det_scale = T::one() - (-dlam * half).exp();
            let noise_scale = (T::one() - (-dlam).exp()).sqrt();
            let l = linalg::cholesky_sqrt(d)?;
            Ok(x + d.as_matrix() * g * det_scale + l * noise * noise_scale)
        }
        IntegrationMethod::Ozaki => {
            if let Some(s) = d.isotropy() {
                // Scalar-exponential shortcut for isotropic D.
                let det_scale = (T::one() - (-dlam / (T::of(2.0) * s)).exp()) * s * s;
                let noise_scale = ((T::one() - (-dlam / s).exp()) * s * s).sqrt();
                return Ok(x + g * det_scale + noise * noise_scale);
            }
            // General case through the eigendecomposition of D; all matrix
            // functions involved share D's eigenvectors.
            let eig = nalgebra::SymmetricEigen::new(d.as_matrix().clone());
            for &l in eig.eigenvalues.iter() {
                if l <= T::zero() {
                    return Err(SpfError::NotPositiveDefinite("ozaki eigenvalues"));
                }
            }
            let u = &eig.eigenvectors;
            let gt = u.transpose() * g;
            let nt = u.transpose() * noise;
            let det = DVector::from_fn(x.len(), |i, _| {
                let l = eig.eigenvalues[i];
                (T::one() - (-dlam / (T::of(2.0) * l)).exp()) * l * l * gt[i]
            });
            let stoch = DVector::from_fn(x.len(), |i, _| {
                let l = eig.eigenvalues[i];
                ((T::one() - (-dlam / l).exp()) * l * l).sqrt() * nt[i]
            });
            Ok(x + u * (det + stoch))
        }
    }
}
