//! The five single-cycle benchmark models: linear, quadratic and cubic
//! univariate; bimodal linear bivariate; nonlinear (range-bearing) bivariate.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::Result;
use crate::linalg::{self, SymMatrix};
use crate::model::additive::{self, ObsMap};
use crate::model::{GaussianPrior, StateSpaceModel, Transition, VectorObsModel};
use crate::scalar::Real;

/// State-space model with additive Gaussian observation noise `y = h(x) + v`.
#[derive(Debug, Clone)]
pub struct AdditiveModel<T: Real> {
    dim_x: usize,
    transition: Transition<T>,
    q: SymMatrix<T>,
    obs: ObsMap<T>,
    r: SymMatrix<T>,
    r_inv: SymMatrix<T>,
}

impl<T: Real> AdditiveModel<T> {
    pub fn new(
        dim_x: usize,
        transition: Transition<T>,
        q: SymMatrix<T>,
        obs: ObsMap<T>,
        r: SymMatrix<T>,
    ) -> Self {
        let r_inv = r
            .try_inverse_pd()
            .expect("observation covariance must be positive definite");
        Self {
            dim_x,
            transition,
            q,
            obs,
            r,
            r_inv,
        }
    }

    pub fn obs_map(&self) -> &ObsMap<T> {
        &self.obs
    }
}

impl<T: Real> StateSpaceModel<T> for AdditiveModel<T> {
    type Obs = DVector<T>;

    fn dim_x(&self) -> usize {
        self.dim_x
    }

    fn transition_mean(&self, x: &DVector<T>) -> DVector<T> {
        self.transition.apply(x)
    }

    fn transition_jacobian(&self, _x: &DVector<T>) -> DMatrix<T> {
        self.transition.jacobian(self.dim_x)
    }

    fn transition_cov(&self, _x: &DVector<T>) -> SymMatrix<T> {
        self.q.clone()
    }

    fn log_likelihood(&self, y: &DVector<T>, x: &DVector<T>) -> T {
        additive::log_likelihood(&self.obs, &self.r, y, x)
            .expect("R is positive definite by construction")
    }

    fn grad_log_likelihood(&self, y: &DVector<T>, x: &DVector<T>) -> DVector<T> {
        let innov = self.obs.wrap_innovation(y - self.obs.observe(x));
        self.obs.jacobian(x).transpose() * (self.r_inv.as_matrix() * innov)
    }

    fn hess_log_likelihood(&self, y: &DVector<T>, x: &DVector<T>) -> SymMatrix<T> {
        let innov = self.obs.wrap_innovation(y - self.obs.observe(x));
        let j = self.obs.jacobian(x);
        let mut hess = -(j.transpose() * self.r_inv.as_matrix() * &j);
        let rinv_innov = self.r_inv.as_matrix() * innov;
        for (k, hk) in self.obs.component_hessians(x).into_iter().enumerate() {
            hess += hk * rinv_innov[k];
        }
        SymMatrix::new(hess)
    }

    fn likelihood_curvature(&self, y: &DVector<T>, x: &DVector<T>) -> (DMatrix<T>, DVector<T>) {
        let innov = self.obs.wrap_innovation(y - self.obs.observe(x));
        let j = self.obs.jacobian(x);
        let lambda = j.transpose() * self.r_inv.as_matrix() * &j;
        let g = j.transpose() * (self.r_inv.as_matrix() * innov);
        (lambda, g)
    }

    fn expected_log_likelihood(
        &self,
        y: &DVector<T>,
        mean: &DVector<T>,
        cov: &SymMatrix<T>,
    ) -> Result<T> {
        additive::expected_log_likelihood(&self.obs, &self.r, y, mean, cov)
    }
}

impl<T: Real> VectorObsModel<T> for AdditiveModel<T> {
    fn dim_y(&self) -> usize {
        self.obs.dim_y()
    }

    fn observe(&self, x: &DVector<T>) -> DVector<T> {
        self.obs.observe(x)
    }

    fn observe_jacobian(&self, x: &DVector<T>) -> DMatrix<T> {
        self.obs.jacobian(x)
    }

    fn obs_cov(&self) -> SymMatrix<T> {
        self.r.clone()
    }

    fn wrap_innovation(&self, innov: DVector<T>) -> DVector<T> {
        self.obs.wrap_innovation(innov)
    }
}

/// Explicitly bimodal likelihood: a two-term Gaussian mixture arising from
/// two observations with known joint likelihood. The observation payload can
/// pin one mode, which is how the per-particle mode-assigned flow targets a
/// single mode's posterior.
#[derive(Debug, Clone)]
pub struct BimodalModel<T: Real> {
    q: SymMatrix<T>,
    pub mode_weights: [T; 2],
    pub mode_obs: [DVector<T>; 2],
    r: [SymMatrix<T>; 2],
    r_inv: [SymMatrix<T>; 2],
}

#[derive(Debug, Clone)]
pub struct BimodalObs {
    /// `None` targets the full two-mode likelihood.
    pub mode: Option<usize>,
}

impl<T: Real> BimodalModel<T> {
    pub fn new(
        q: SymMatrix<T>,
        mode_weights: [T; 2],
        mode_obs: [DVector<T>; 2],
        r: [SymMatrix<T>; 2],
    ) -> Self {
        let r_inv = [
            r[0].try_inverse_pd().expect("R1 must be PD"),
            r[1].try_inverse_pd().expect("R2 must be PD"),
        ];
        Self {
            q,
            mode_weights,
            mode_obs,
            r,
            r_inv,
        }
    }

    fn mode_log_terms(&self, x: &DVector<T>) -> [T; 2] {
        [0, 1].map(|j| {
            self.mode_weights[j].ln()
                + linalg::gaussian_logpdf(&self.mode_obs[j], x, &self.r[j])
                    .expect("mode covariance is PD")
        })
    }

    /// Posterior responsibilities of the two modes at `x`.
    fn responsibilities(&self, x: &DVector<T>) -> ([T; 2], T) {
        let lt = self.mode_log_terms(x);
        let ls = linalg::log_sum_exp(&lt);
        ([(lt[0] - ls).exp(), (lt[1] - ls).exp()], ls)
    }
}

impl<T: Real> StateSpaceModel<T> for BimodalModel<T> {
    type Obs = BimodalObs;

    fn dim_x(&self) -> usize {
        2
    }

    fn transition_mean(&self, x: &DVector<T>) -> DVector<T> {
        x.clone()
    }

    fn transition_jacobian(&self, _x: &DVector<T>) -> DMatrix<T> {
        DMatrix::identity(2, 2)
    }

    fn transition_cov(&self, _x: &DVector<T>) -> SymMatrix<T> {
        self.q.clone()
    }

    fn log_likelihood(&self, y: &BimodalObs, x: &DVector<T>) -> T {
        match y.mode {
            Some(j) => linalg::gaussian_logpdf(&self.mode_obs[j], x, &self.r[j])
                .expect("mode covariance is PD"),
            None => linalg::log_sum_exp(&self.mode_log_terms(x)),
        }
    }

    fn grad_log_likelihood(&self, y: &BimodalObs, x: &DVector<T>) -> DVector<T> {
        match y.mode {
            Some(j) => self.r_inv[j].as_matrix() * (&self.mode_obs[j] - x),
            None => {
                let (alpha, _) = self.responsibilities(x);
                let mut g = DVector::zeros(2);
                for j in 0..2 {
                    g += (self.r_inv[j].as_matrix() * (&self.mode_obs[j] - x)) * alpha[j];
                }
                g
            }
        }
    }

    fn hess_log_likelihood(&self, y: &BimodalObs, x: &DVector<T>) -> SymMatrix<T> {
        match y.mode {
            Some(j) => SymMatrix::new(-self.r_inv[j].as_matrix().clone()),
            None => {
                let (alpha, _) = self.responsibilities(x);
                let g = self.grad_log_likelihood(y, x);
                let mut h = DMatrix::zeros(2, 2);
                for j in 0..2 {
                    let gj = self.r_inv[j].as_matrix() * (&self.mode_obs[j] - x);
                    h += (-self.r_inv[j].as_matrix() + &gj * gj.transpose()) * alpha[j];
                }
                h -= &g * g.transpose();
                SymMatrix::new(h)
            }
        }
    }

    fn likelihood_curvature(&self, y: &BimodalObs, x: &DVector<T>) -> (DMatrix<T>, DVector<T>) {
        match y.mode {
            Some(j) => (
                self.r_inv[j].as_matrix().clone(),
                self.r_inv[j].as_matrix() * (&self.mode_obs[j] - x),
            ),
            None => {
                let hess = self.hess_log_likelihood(y, x);
                (
                    crate::model::clamp_negated_psd(&hess),
                    self.grad_log_likelihood(y, x),
                )
            }
        }
    }

    fn expected_log_likelihood(
        &self,
        y: &BimodalObs,
        mean: &DVector<T>,
        cov: &SymMatrix<T>,
    ) -> Result<T> {
        // Linear identity observation map: the integral is exact.
        let term = |j: usize| -> Result<T> {
            let s = SymMatrix::new(self.r[j].as_matrix() + cov.as_matrix());
            linalg::gaussian_logpdf(&self.mode_obs[j], mean, &s)
        };
        match y.mode {
            Some(j) => term(j),
            None => {
                let lt = [
                    self.mode_weights[0].ln() + term(0)?,
                    self.mode_weights[1].ln() + term(1)?,
                ];
                Ok(linalg::log_sum_exp(&lt))
            }
        }
    }

    fn likelihood_modes(&self, y: &BimodalObs) -> Option<Vec<(T, BimodalObs)>> {
        if y.mode.is_some() {
            return None;
        }
        Some(vec![
            (self.mode_weights[0], BimodalObs { mode: Some(0) }),
            (self.mode_weights[1], BimodalObs { mode: Some(1) }),
        ])
    }
}

/// One single-cycle benchmark: model plus initial distribution and the fixed
/// observation analysed for that scenario.
pub struct ToyScenario<M> {
    pub model: M,
    pub x_bar: DVector<f64>,
    pub p0: SymMatrix<f64>,
}

impl<M: StateSpaceModel<f64>> ToyScenario<M> {
    /// The prior for the evaluated cycle: one transition applied to the
    /// initial distribution, `N(f(x_bar), F P0 F^T + Q)`.
    pub fn prior_predictive(&self) -> GaussianPrior<f64> {
        let f = self.model.transition_jacobian(&self.x_bar);
        let mean = self.model.transition_mean(&self.x_bar);
        let cov = SymMatrix::new(
            &f * self.p0.as_matrix() * f.transpose()
                + self.model.transition_cov(&self.x_bar).as_matrix(),
        );
        GaussianPrior::new(mean, cov)
    }

    /// Draw particles from the initial distribution `N(x_bar, P0)`.
    pub fn sample_initial<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<DVector<f64>> {
        let l = linalg::cholesky_sqrt(&self.p0).expect("P0 is PD");
        (0..n)
            .map(|_| {
                let noise = DVector::from_fn(self.x_bar.len(), |_, _| f64::std_normal(rng));
                &self.x_bar + &l * noise
            })
            .collect()
    }
}

fn iso2(v: f64) -> SymMatrix<f64> {
    SymMatrix::from_diagonal(&[v, v])
}

/// Linear univariate scenario: identity transition, identity observation.
pub fn linear1d(params: &Toy1dParams) -> (ToyScenario<AdditiveModel<f64>>, DVector<f64>) {
    let model = AdditiveModel::new(
        1,
        Transition::Identity,
        SymMatrix::scalar(params.q),
        ObsMap::Linear(DMatrix::identity(1, 1)),
        SymMatrix::scalar(params.r),
    );
    (
        ToyScenario {
            model,
            x_bar: DVector::from_element(1, params.x_bar),
            p0: SymMatrix::scalar(params.p0),
        },
        DVector::from_element(1, params.y),
    )
}

/// Quadratic univariate scenario: `h(x) = x^2/20`.
pub fn quadratic1d(params: &Toy1dParams) -> (ToyScenario<AdditiveModel<f64>>, DVector<f64>) {
    let model = AdditiveModel::new(
        1,
        Transition::Identity,
        SymMatrix::scalar(params.q),
        ObsMap::Poly {
            power: 2,
            scale: 20.0,
        },
        SymMatrix::scalar(params.r),
    );
    (
        ToyScenario {
            model,
            x_bar: DVector::from_element(1, params.x_bar),
            p0: SymMatrix::scalar(params.p0),
        },
        DVector::from_element(1, params.y),
    )
}

/// Cubic univariate scenario: `h(x) = x^3/120`.
pub fn cubic1d(params: &Toy1dParams) -> (ToyScenario<AdditiveModel<f64>>, DVector<f64>) {
    let model = AdditiveModel::new(
        1,
        Transition::Identity,
        SymMatrix::scalar(params.q),
        ObsMap::Poly {
            power: 3,
            scale: 120.0,
        },
        SymMatrix::scalar(params.r),
    );
    (
        ToyScenario {
            model,
            x_bar: DVector::from_element(1, params.x_bar),
            p0: SymMatrix::scalar(params.p0),
        },
        DVector::from_element(1, params.y),
    )
}

/// Parameters of the univariate scenarios with the benchmark defaults.
#[derive(Debug, Clone)]
pub struct Toy1dParams {
    pub x_bar: f64,
    pub p0: f64,
    pub q: f64,
    pub r: f64,
    pub y: f64,
}

pub fn linear1d_params() -> Toy1dParams {
    Toy1dParams {
        x_bar: 0.0,
        p0: 20.0,
        q: 5.0,
        r: 10.0,
        y: 30.0,
    }
}

pub fn quadratic1d_params() -> Toy1dParams {
    Toy1dParams {
        x_bar: 0.0,
        p0: 20.0,
        q: 20.0,
        r: 50.0,
        y: 30.0,
    }
}

pub fn cubic1d_params() -> Toy1dParams {
    Toy1dParams {
        x_bar: 0.0,
        p0: 20.0,
        q: 20.0,
        r: 50.0,
        y: 20.0,
    }
}

/// Bimodal linear bivariate scenario with the benchmark parameters.
pub fn bimodal2d() -> (ToyScenario<BimodalModel<f64>>, BimodalObs) {
    let model = BimodalModel::new(
        iso2(16.0),
        [0.2, 0.8],
        [
            DVector::from_row_slice(&[10.0, 20.0]),
            DVector::from_row_slice(&[10.0, -20.0]),
        ],
        [
            SymMatrix::from_diagonal(&[0.8, 0.2]),
            SymMatrix::from_diagonal(&[4.0, 1.0]),
        ],
    );
    (
        ToyScenario {
            model,
            x_bar: DVector::zeros(2),
            p0: iso2(9.0),
        },
        BimodalObs { mode: None },
    )
}

/// Nonlinear (range-bearing) bivariate scenario. Case 1 is favorable for
/// marginal importance sampling; case 2 places the observation far from the
/// prior so that the empirical marginal target degrades.
pub fn banana2d(case2: bool) -> (ToyScenario<AdditiveModel<f64>>, DVector<f64>) {
    let (p0, q) = if case2 { (10.0, 5.0) } else { (20.0, 20.0) };
    let model = AdditiveModel::new(
        2,
        Transition::Identity,
        iso2(q),
        ObsMap::RangeBearing,
        SymMatrix::from_diagonal(&[1.0, 0.16]),
    );
    (
        ToyScenario {
            model,
            x_bar: DVector::zeros(2),
            p0: iso2(p0),
        },
        DVector::from_row_slice(&[20.0, 0.0]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fd;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn check_derivatives<M: StateSpaceModel<f64>>(
        model: &M,
        y: &M::Obs,
        points: &[DVector<f64>],
        tol: f64,
    ) {
        for x in points {
            let f = |z: &DVector<f64>| model.log_likelihood(y, z);
            let g = model.grad_log_likelihood(y, x);
            let g_fd = fd::grad(&f, x, 1e-5);
            let scale = 1.0 + g_fd.norm();
            assert!(
                (g.clone() - &g_fd).norm() / scale < tol,
                "gradient mismatch at {x:?}: {g:?} vs {g_fd:?}"
            );
            let h = model.hess_log_likelihood(y, x);
            let h_fd = fd::hess(&f, x, 1e-5);
            let hscale = 1.0 + h_fd.norm();
            assert!(
                (h.as_matrix() - &h_fd).norm() / hscale < tol,
                "hessian mismatch at {x:?}"
            );
        }
    }

    fn random_points(dim: usize, n: usize, spread: f64, seed: u64) -> Vec<DVector<f64>> {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| DVector::from_fn(dim, |_, _| rng.gen_range(-spread..spread)))
            .collect()
    }

    #[test]
    fn linear_gradient_by_hand() {
        let (scen, y) = linear1d(&linear1d_params());
        // grad log p(y|x) at x=0 is (y - x)/R = 3.0.
        let g = scen
            .model
            .grad_log_likelihood(&y, &DVector::from_element(1, 0.0));
        assert_relative_eq!(g[0], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn quadratic_derivatives_match_finite_differences() {
        let (scen, y) = quadratic1d(&quadratic1d_params());
        let pts = random_points(1, 100, 30.0, 7);
        check_derivatives(&scen.model, &y, &pts, 1e-4);
        // The named point from the operation contract.
        check_derivatives(&scen.model, &y, &[DVector::from_element(1, 5.0)], 1e-4);
    }

    #[test]
    fn cubic_derivatives_match_finite_differences() {
        let (scen, y) = cubic1d(&cubic1d_params());
        let pts = random_points(1, 100, 15.0, 11);
        check_derivatives(&scen.model, &y, &pts, 1e-4);
    }

    #[test]
    fn banana_derivatives_match_finite_differences() {
        let (scen, y) = banana2d(false);
        // Keep points away from the origin where range-bearing is singular.
        let pts: Vec<_> = random_points(2, 200, 25.0, 13)
            .into_iter()
            .filter(|p| p.norm() > 2.0)
            .take(100)
            .collect();
        check_derivatives(&scen.model, &y, &pts, 1e-4);
    }

    #[test]
    fn bimodal_derivatives_match_finite_differences() {
        let (scen, y) = bimodal2d();
        let pts = random_points(2, 100, 25.0, 17);
        check_derivatives(&scen.model, &y, &pts, 1e-4);
        for j in 0..2 {
            check_derivatives(&scen.model, &BimodalObs { mode: Some(j) }, &pts[..20], 1e-4);
        }
    }

    #[test]
    fn bimodal_expected_likelihood_is_exact_mixture() {
        let (scen, y) = bimodal2d();
        let prior = scen.prior_predictive();
        let got = scen
            .model
            .expected_log_likelihood(&y, &prior.mean, &prior.cov)
            .unwrap();
        // Hand evaluation: sum_j w_j N(y_j; 0, R_j + 25 I).
        let r_diag = [[0.8, 0.2], [4.0, 1.0]];
        let mut total = 0.0;
        for j in 0..2 {
            let s = SymMatrix::from_diagonal(&[r_diag[j][0] + 25.0, r_diag[j][1] + 25.0]);
            total += scen.model.mode_weights[j]
                * linalg::gaussian_logpdf(&scen.model.mode_obs[j], &prior.mean, &s)
                    .unwrap()
                    .exp();
        }
        assert_relative_eq!(got, total.ln(), epsilon = 1e-10);
    }

    #[test]
    fn prior_predictive_adds_process_noise() {
        let (scen, _) = linear1d(&linear1d_params());
        let prior = scen.prior_predictive();
        assert_relative_eq!(prior.cov[(0, 0)], 25.0, epsilon = 1e-12);
        assert_relative_eq!(prior.mean[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_under_seed() {
        let (scen, _) = linear1d(&linear1d_params());
        let mut r1 = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut r2 = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let a = scen.sample_initial(10, &mut r1);
        let b = scen.sample_initial(10, &mut r2);
        assert_eq!(a, b);
    }

    #[test]
    fn wrap_angle_maps_into_half_open_interval() {
        use crate::model::additive::wrap_angle;
        use std::f64::consts::PI;
        assert_relative_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(-3.0 * PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(0.5), 0.5, epsilon = 1e-12);
        assert!(wrap_angle(-PI) > 0.0);
    }
}
