//! Scalar abstraction for the numerical core.
//!
//! Everything under `linalg`, `flow`, `spf_gs`, `spf_mpf` and `baselines` is
//! generic over a floating-point type implementing [`Real`]. The crate root
//! exports concrete `f64` aliases used by the experiment layer.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

/// Floating-point scalar: `f32` or `f64`.
pub trait Real: RealField + FromPrimitive + ToPrimitive + Copy + Default {
    /// Draw a standard-normal variate.
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw uniformly from the half-open interval (0, 1].
    fn uniform_open01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Convert an `f64` literal. Panics only for non-finite inputs on `f32`
    /// overflow, which never occurs for the constants used here.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable in scalar type")
    }

    /// Lossy readback used by the reporting layer.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl Real for f64 {
    #[inline]
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    #[inline]
    fn uniform_open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        1.0 - rng.gen::<f64>()
    }
}

impl Real for f32 {
    #[inline]
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    #[inline]
    fn uniform_open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        1.0 - rng.gen::<f32>()
    }
}
