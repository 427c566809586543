//! State-space-model abstraction shared by the flow filters and baselines.
//!
//! A model provides the Markov transition `(f, Q)` and a likelihood with its
//! first two derivatives. Observation payloads are an associated type so the
//! same machinery drives vector observations, multi-sensor scans and joint
//! multi-target scans.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::linalg::{self, SymMatrix};
use crate::scalar::Real;

/// Gaussian prior `N(mean, cov)`, typically the per-component predicted
/// density of one filtering cycle.
#[derive(Debug, Clone)]
pub struct GaussianPrior<T: Real> {
    pub mean: DVector<T>,
    pub cov: SymMatrix<T>,
}

impl<T: Real> GaussianPrior<T> {
    pub fn new(mean: DVector<T>, cov: SymMatrix<T>) -> Self {
        Self { mean, cov }
    }

    pub fn logpdf(&self, x: &DVector<T>) -> Result<T> {
        linalg::gaussian_logpdf(x, &self.mean, &self.cov)
    }
}

/// State transition: identity for the single-cycle toy problems, a linear
/// map for the nearly-constant-velocity tracker.
#[derive(Debug, Clone)]
pub enum Transition<T: Real> {
    Identity,
    Linear(DMatrix<T>),
}

impl<T: Real> Transition<T> {
    pub fn apply(&self, x: &DVector<T>) -> DVector<T> {
        match self {
            Transition::Identity => x.clone(),
            Transition::Linear(f) => f * x,
        }
    }

    pub fn jacobian(&self, dim: usize) -> DMatrix<T> {
        match self {
            Transition::Identity => DMatrix::identity(dim, dim),
            Transition::Linear(f) => f.clone(),
        }
    }
}

/// The `(f, Q, likelihood)` description every filter consumes.
pub trait StateSpaceModel<T: Real>: Sync {
    /// Observation payload for one step.
    type Obs: Clone + Sync;

    fn dim_x(&self) -> usize;

    /// Transition mean `f(x)`.
    fn transition_mean(&self, x: &DVector<T>) -> DVector<T>;

    /// Transition Jacobian at `x`; used for the predicted component moments.
    fn transition_jacobian(&self, x: &DVector<T>) -> DMatrix<T>;

    /// Process noise covariance, possibly state dependent.
    fn transition_cov(&self, x: &DVector<T>) -> SymMatrix<T>;

    fn log_likelihood(&self, y: &Self::Obs, x: &DVector<T>) -> T;

    fn grad_log_likelihood(&self, y: &Self::Obs, x: &DVector<T>) -> DVector<T>;

    fn hess_log_likelihood(&self, y: &Self::Obs, x: &DVector<T>) -> SymMatrix<T>;

    /// `(Lambda, g)` with `g` the exact likelihood score and `Lambda` a
    /// positive-semidefinite curvature proxy, i.e. the Gauss-Newton term for
    /// additive-Gaussian observations. The flow's drift linearization is
    /// `C = -D(P^-1 + Lambda)/2` and tangency `C x + c = drift(x)` holds for
    /// any choice of `Lambda`.
    fn likelihood_curvature(&self, y: &Self::Obs, x: &DVector<T>) -> (DMatrix<T>, DVector<T>) {
        let hess = self.hess_log_likelihood(y, x);
        let lambda = clamp_negated_psd(&hess);
        (lambda, self.grad_log_likelihood(y, x))
    }

    /// `log int p(y|x') N(x'; mean, cov) dx'` evaluated in closed form by
    /// linearizing the observation map at `mean`.
    fn expected_log_likelihood(
        &self,
        y: &Self::Obs,
        mean: &DVector<T>,
        cov: &SymMatrix<T>,
    ) -> Result<T>;

    /// `log p(x_to | x_from)`.
    fn transition_log_density(&self, x_to: &DVector<T>, x_from: &DVector<T>) -> Result<T> {
        let mean = self.transition_mean(x_from);
        let q = self.transition_cov(x_from);
        linalg::gaussian_logpdf(x_to, &mean, &q)
    }

    /// Draw `x_k ~ p(. | x_from)`.
    fn sample_transition<R: rand::Rng + ?Sized>(
        &self,
        x_from: &DVector<T>,
        rng: &mut R,
    ) -> Result<DVector<T>> {
        let mean = self.transition_mean(x_from);
        let q = self.transition_cov(x_from);
        let l = linalg::cholesky_sqrt(&q)?;
        let noise = DVector::from_fn(self.dim_x(), |_, _| T::std_normal(rng));
        Ok(mean + l * noise)
    }

    /// Explicitly multimodal likelihoods expose per-mode views so that the
    /// flow can target one mode per particle; `None` for unimodal models.
    fn likelihood_modes(&self, _y: &Self::Obs) -> Option<Vec<(T, Self::Obs)>> {
        None
    }
}

/// Models with vector observations `y = h(x) + v` consumable by the
/// EKF/UKF baselines and the marginal particle filters.
pub trait VectorObsModel<T: Real>: StateSpaceModel<T, Obs = DVector<T>> {
    fn dim_y(&self) -> usize;
    fn observe(&self, x: &DVector<T>) -> DVector<T>;
    fn observe_jacobian(&self, x: &DVector<T>) -> DMatrix<T>;
    fn obs_cov(&self) -> SymMatrix<T>;
    fn wrap_innovation(&self, innov: DVector<T>) -> DVector<T> {
        innov
    }
}

/// `-hess` with negative eigenvalues clamped to zero; keeps the moment ODEs
/// stable where a mixture likelihood is locally convex.
pub fn clamp_negated_psd<T: Real>(hess: &SymMatrix<T>) -> DMatrix<T> {
    let neg = SymMatrix::new(-hess.as_matrix().clone());
    let eig = nalgebra::SymmetricEigen::new(neg.as_matrix().clone());
    if eig.eigenvalues.iter().all(|&l| l >= T::zero()) {
        return neg.into_matrix();
    }
    let clamped = eig.eigenvalues.map(|l| l.max(T::zero()));
    &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose()
}

/// Unnormalized log posterior `log p(y|x) + log N(x; prior)` with its
/// gradient and Hessian.
pub fn log_posterior_parts<T: Real, M: StateSpaceModel<T>>(
    model: &M,
    prior: &GaussianPrior<T>,
    y: &M::Obs,
    x: &DVector<T>,
) -> Result<(T, DVector<T>, SymMatrix<T>)> {
    let prior_inv = prior.cov.try_inverse_pd()?;
    let value = model.log_likelihood(y, x) + prior.logpdf(x)?;
    let diff = x - &prior.mean;
    let grad = model.grad_log_likelihood(y, x) - prior_inv.as_matrix() * &diff;
    let hess = SymMatrix::new(
        model.hess_log_likelihood(y, x).as_matrix() - prior_inv.as_matrix(),
    );
    Ok((value, grad, hess))
}

/// Observation maps with additive Gaussian noise `y = h(x) + v`.
pub mod additive {
    use super::*;

    /// The concrete observation nonlinearities used by the benchmark models.
    #[derive(Debug, Clone)]
    pub enum ObsMap<T: Real> {
        /// `h(x) = H x`.
        Linear(DMatrix<T>),
        /// Univariate `h(x) = x^power / scale`.
        Poly { power: u32, scale: T },
        /// Bivariate `(range, bearing)` about the origin.
        RangeBearing,
    }

    impl<T: Real> ObsMap<T> {
        pub fn dim_y(&self) -> usize {
            match self {
                ObsMap::Linear(h) => h.nrows(),
                ObsMap::Poly { .. } => 1,
                ObsMap::RangeBearing => 2,
            }
        }

        pub fn observe(&self, x: &DVector<T>) -> DVector<T> {
            match self {
                ObsMap::Linear(h) => h * x,
                ObsMap::Poly { power, scale } => {
                    DVector::from_element(1, x[0].powi(*power as i32) / *scale)
                }
                ObsMap::RangeBearing => {
                    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                    let theta = x[1].atan2(x[0]);
                    DVector::from_row_slice(&[r, theta])
                }
            }
        }

        pub fn jacobian(&self, x: &DVector<T>) -> DMatrix<T> {
            match self {
                ObsMap::Linear(h) => h.clone(),
                ObsMap::Poly { power, scale } => DMatrix::from_element(
                    1,
                    1,
                    T::of(*power as f64) * x[0].powi(*power as i32 - 1) / *scale,
                ),
                ObsMap::RangeBearing => {
                    let r2 = x[0] * x[0] + x[1] * x[1];
                    let r = r2.sqrt();
                    DMatrix::from_row_slice(
                        2,
                        2,
                        &[x[0] / r, x[1] / r, -x[1] / r2, x[0] / r2],
                    )
                }
            }
        }

        /// Hessian of each observation component.
        pub fn component_hessians(&self, x: &DVector<T>) -> Vec<DMatrix<T>> {
            match self {
                ObsMap::Linear(h) => {
                    let n = h.ncols();
                    vec![DMatrix::zeros(n, n); h.nrows()]
                }
                ObsMap::Poly { power, scale } => {
                    let p = *power as i32;
                    let v = T::of((p * (p - 1)) as f64) * x[0].powi(p - 2) / *scale;
                    vec![DMatrix::from_element(1, 1, v)]
                }
                ObsMap::RangeBearing => {
                    let (a, b) = (x[0], x[1]);
                    let r2 = a * a + b * b;
                    let r = r2.sqrt();
                    let r3 = r2 * r;
                    let range_h =
                        DMatrix::from_row_slice(2, 2, &[b * b, -a * b, -a * b, a * a]) / r3;
                    let two = T::of(2.0);
                    let bear_h = DMatrix::from_row_slice(
                        2,
                        2,
                        &[two * a * b, b * b - a * a, b * b - a * a, -two * a * b],
                    ) / (r2 * r2);
                    vec![range_h, bear_h]
                }
            }
        }

        /// Wrap angular innovation components into (-pi, pi].
        pub fn wrap_innovation(&self, mut innov: DVector<T>) -> DVector<T> {
            if let ObsMap::RangeBearing = self {
                innov[1] = wrap_angle(innov[1]);
            }
            innov
        }
    }

    /// Map any angle into (-pi, pi].
    pub fn wrap_angle<T: Real>(a: T) -> T {
        let two_pi = T::of(std::f64::consts::TAU);
        let pi = T::of(std::f64::consts::PI);
        let mut w = a % two_pi;
        if w > pi {
            w -= two_pi;
        } else if w <= -pi {
            w += two_pi;
        }
        w
    }

    /// `log N(y; h(x), R)` with wrapped innovations.
    pub fn log_likelihood<T: Real>(
        obs: &ObsMap<T>,
        r: &SymMatrix<T>,
        y: &DVector<T>,
        x: &DVector<T>,
    ) -> Result<T> {
        let innov = obs.wrap_innovation(y - obs.observe(x));
        linalg::gaussian_logpdf(&innov, &DVector::zeros(innov.len()), r)
    }

    /// Exact score `J^T R^-1 (y - h(x))`.
    pub fn grad_log_likelihood<T: Real>(
        obs: &ObsMap<T>,
        r: &SymMatrix<T>,
        y: &DVector<T>,
        x: &DVector<T>,
    ) -> Result<DVector<T>> {
        let innov = obs.wrap_innovation(y - obs.observe(x));
        let j = obs.jacobian(x);
        let rinv_innov = r.solve_pd(&innov)?;
        Ok(j.transpose() * rinv_innov)
    }

    /// Exact Hessian `-J^T R^-1 J + sum_k [R^-1 (y-h)]_k H_k`.
    pub fn hess_log_likelihood<T: Real>(
        obs: &ObsMap<T>,
        r: &SymMatrix<T>,
        y: &DVector<T>,
        x: &DVector<T>,
    ) -> Result<SymMatrix<T>> {
        let innov = obs.wrap_innovation(y - obs.observe(x));
        let j = obs.jacobian(x);
        let rinv = r.try_inverse_pd()?;
        let mut hess = -(j.transpose() * rinv.as_matrix() * &j);
        let rinv_innov = rinv.as_matrix() * innov;
        for (k, hk) in obs.component_hessians(x).into_iter().enumerate() {
            hess += hk * rinv_innov[k];
        }
        Ok(SymMatrix::new(hess))
    }

    /// Gauss-Newton curvature `J^T R^-1 J` and score, the Eq.-style drift
    /// linearization terms.
    pub fn curvature<T: Real>(
        obs: &ObsMap<T>,
        r: &SymMatrix<T>,
        y: &DVector<T>,
        x: &DVector<T>,
    ) -> Result<(DMatrix<T>, DVector<T>)> {
        let innov = obs.wrap_innovation(y - obs.observe(x));
        let j = obs.jacobian(x);
        let rinv = r.try_inverse_pd()?;
        let lambda = j.transpose() * rinv.as_matrix() * &j;
        let g = j.transpose() * (rinv.as_matrix() * innov);
        Ok((lambda, g))
    }

    /// `log N(y; h(mean), J cov J^T + R)`.
    pub fn expected_log_likelihood<T: Real>(
        obs: &ObsMap<T>,
        r: &SymMatrix<T>,
        y: &DVector<T>,
        mean: &DVector<T>,
        cov: &SymMatrix<T>,
    ) -> Result<T> {
        let j = obs.jacobian(mean);
        let s = SymMatrix::new(&j * cov.as_matrix() * j.transpose() + r.as_matrix());
        let innov = obs.wrap_innovation(y - obs.observe(mean));
        linalg::gaussian_logpdf(&innov, &DVector::zeros(innov.len()), &s)
    }
}

#[cfg(test)]
pub mod fd {
    //! Central finite-difference oracles used by the derivative tests.

    use super::*;

    pub fn grad<T: Real>(f: &dyn Fn(&DVector<T>) -> T, x: &DVector<T>, step: T) -> DVector<T> {
        let n = x.len();
        DVector::from_fn(n, |i, _| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += step;
            xm[i] -= step;
            (f(&xp) - f(&xm)) / (T::of(2.0) * step)
        })
    }

    pub fn hess<T: Real>(f: &dyn Fn(&DVector<T>) -> T, x: &DVector<T>, step: T) -> DMatrix<T> {
        let n = x.len();
        let g = |x: &DVector<T>| grad(f, x, step);
        let mut h = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += step;
            xm[j] -= step;
            let col = (g(&xp) - g(&xm)) / (T::of(2.0) * step);
            h.set_column(j, &col);
        }
        h
    }
}
