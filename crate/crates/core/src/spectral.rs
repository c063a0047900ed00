//! Power-iteration estimate of a spectral radius.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_STEPS: usize = 50;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

// Fixed start vector so the estimate is a deterministic function of the matrix.
const START_SEED: u64 = 0x5eed_0fa1;

/// Estimates `rho(m)` with at most `max_steps` matrix-vector products.
///
/// The estimate is the geometric mean of the per-step growth factors
/// `|m x_k| / |x_k|` over the second half of the run. A single Rayleigh-style
/// ratio oscillates forever when the dominant eigenvalues are a complex pair
/// or `+-rho`; the windowed mean still converges to `rho` in that case.
pub fn spectral_radius(m: &DMatrix<f64>, max_steps: usize, tolerance: f64) -> f64 {
    assert!(m.is_square(), "spectral radius of a non-square matrix");
    let n = m.nrows();
    if n == 0 || max_steps == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut x = DVector::from_fn(n, |_, _| rng.gen_range(0.5..1.5));
    x /= x.norm();

    let mut log_growth = Vec::with_capacity(max_steps);
    let mut previous = f64::NAN;
    for k in 1..=max_steps {
        let y = m * &x;
        let g = y.norm();
        if g == 0.0 {
            // x landed in the null space; every further product is zero.
            return 0.0;
        }
        if !g.is_finite() {
            return f64::INFINITY;
        }
        log_growth.push(g.ln());
        x = y / g;

        let window = &log_growth[k / 2..];
        let estimate = (window.iter().sum::<f64>() / window.len() as f64).exp();
        if k >= 4 && (estimate - previous).abs() <= tolerance * estimate.max(f64::MIN_POSITIVE) {
            return estimate;
        }
        previous = estimate;
    }
    previous
}
