//! Gradient-free aggregation of query embeddings and pooled CLIP features.
//!
//! Both inputs are generic row sets of a shared dimension `d`: `F_C` has
//! `n_c` rows and `F_Q` has `n_q` rows. With `Z = lambda * F_C F_Q^T` and a
//! column-normalized `N = Norm(Z)`, one round of the walk is
//!
//! ```text
//! F_Q(t) = omega * N^T F_C(t-1) + (1 - omega) * F_Q(0)
//! F_C(t) = omega * Z F_Q(t)     + (1 - omega) * F_C(0)
//! ```
//!
//! Eliminating `F_Q` gives `F_C(t) = M F_C(t-1) + B` with `M = omega^2 Z N^T`
//! and `B = (1 - omega)(omega Z F_Q(0) + F_C(0))`. When `rho(M) < 1` the walk
//! converges to `(I - M)^-1 B`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::embedding::{Embedding, EmbeddingSet};
use crate::error::{Error, Result};
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    /// Exponentiate, then divide each column by its sum.
    #[default]
    ColumnSoftmax,
    /// Divide each column by its sum of absolute values. Columns sum to one
    /// only when the affinity is nonnegative.
    ColumnL1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReduceMode {
    #[default]
    Mean,
    First,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    /// Affinity scale.
    pub lambda: f64,
    /// Fusion factor, strictly inside (0, 1).
    pub omega: f64,
    pub max_iters: usize,
    /// Frobenius threshold on the change of `F_C` between rounds. Zero turns
    /// early exit off and runs all `max_iters` rounds.
    pub tolerance: f64,
    pub normalize_mode: NormalizeMode,
    /// L2-normalize the rows of `F_C` before fusing.
    pub normalize_clip: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            lambda: 0.2,
            omega: 0.5,
            max_iters: 1000,
            tolerance: 1e-10,
            normalize_mode: NormalizeMode::ColumnSoftmax,
            normalize_clip: false,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return Err(Error::Config(format!(
                "omega must lie strictly inside (0, 1), got {}",
                self.omega
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Config(format!(
                "tolerance must be finite and >= 0, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// `n_c x n_q` scaled dot products between CLIP rows and query rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    z: DMatrix<f64>,
}

impl AffinityMatrix {
    pub fn new(z: DMatrix<f64>) -> Result<Self> {
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("affinity has non-finite entries".into()));
        }
        Ok(AffinityMatrix { z })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn shape(&self) -> (usize, usize) {
        self.z.shape()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionResult {
    /// `n_c x d`.
    pub fused_clip: DMatrix<f64>,
    /// `n_q x d`.
    pub fused_query: DMatrix<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    pub spectral_radius_estimate: f64,
}

pub fn compute_affinity(f_c: &EmbeddingSet, f_q: &EmbeddingSet, lambda: f64) -> Result<AffinityMatrix> {
    check_dims(f_c, f_q)?;
    let z = (f_c.to_matrix() * f_q.to_matrix().transpose()) * lambda;
    AffinityMatrix::new(z)
}

/// Column-normalizes `z`. Softmax columns always sum to one; see
/// [`NormalizeMode::ColumnL1`] for the signed case.
pub fn normalize_affinity(z: &AffinityMatrix, mode: NormalizeMode) -> Result<AffinityMatrix> {
    let mut out = z.z.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        match mode {
            NormalizeMode::ColumnSoftmax => {
                let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                col.iter_mut().for_each(|v| *v = (*v - max).exp());
                let sum: f64 = col.iter().sum();
                col /= sum;
            }
            NormalizeMode::ColumnL1 => {
                let sum: f64 = col.iter().map(|v| v.abs()).sum();
                if sum == 0.0 {
                    return Err(Error::DegenerateColumn { column: j });
                }
                col /= sum;
            }
        }
    }
    AffinityMatrix::new(out)
}

/// Precomputed pieces shared by all three solvers.
struct Operator {
    z: DMatrix<f64>,
    norm_t: DMatrix<f64>,
    fc0: DMatrix<f64>,
    fq0: DMatrix<f64>,
    omega: f64,
}

impl Operator {
    fn new(f_q0: &EmbeddingSet, f_c0: &EmbeddingSet, cfg: &FusionConfig) -> Result<Self> {
        cfg.validate()?;
        check_dims(f_c0, f_q0)?;
        if f_c0.is_empty() || f_q0.is_empty() {
            return Err(Error::EmptyInput("fusion needs at least one CLIP row and one query row".into()));
        }
        let f_c0 = if cfg.normalize_clip {
            f_c0.normalized()?
        } else {
            f_c0.clone()
        };
        let z = compute_affinity(&f_c0, f_q0, cfg.lambda)?;
        let norm = normalize_affinity(&z, cfg.normalize_mode)?;
        Ok(Operator {
            z: z.z,
            norm_t: norm.z.transpose(),
            fc0: f_c0.to_matrix(),
            fq0: f_q0.to_matrix(),
            omega: cfg.omega,
        })
    }

    /// `omega^2 * Z N^T`.
    fn transition(&self) -> DMatrix<f64> {
        (&self.z * &self.norm_t) * (self.omega * self.omega)
    }

    /// `omega Z F_Q(0) + F_C(0)`.
    fn source(&self) -> DMatrix<f64> {
        &self.z * &self.fq0 * self.omega + &self.fc0
    }

    fn query_update(&self, fc: &DMatrix<f64>) -> DMatrix<f64> {
        &self.norm_t * fc * self.omega + &self.fq0 * (1.0 - self.omega)
    }

    fn clip_update(&self, fq: &DMatrix<f64>) -> DMatrix<f64> {
        &self.z * fq * self.omega + &self.fc0 * (1.0 - self.omega)
    }

    fn spectral_radius(&self) -> f64 {
        spectral::spectral_radius(
            &self.transition(),
            spectral::DEFAULT_STEPS,
            spectral::DEFAULT_TOLERANCE,
        )
    }
}

/// Alternates the query and CLIP updates until `|F_C(t) - F_C(t-1)|_F` drops
/// to `cfg.tolerance` or `cfg.max_iters` rounds have run.
pub fn gfa_iterate(f_q0: &EmbeddingSet, f_c0: &EmbeddingSet, cfg: &FusionConfig) -> Result<FusionResult> {
    let op = Operator::new(f_q0, f_c0, cfg)?;
    let rho = op.spectral_radius();

    let mut fc = op.fc0.clone();
    let mut fq = op.fq0.clone();
    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=cfg.max_iters {
        iterations = t;
        fq = op.query_update(&fc);
        let next = op.clip_update(&fq);
        let delta = (&next - &fc).norm();
        if !delta.is_finite() || next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: t, rho });
        }
        fc = next;
        if cfg.tolerance > 0.0 && delta <= cfg.tolerance {
            converged = true;
            break;
        }
    }
    Ok(FusionResult {
        fused_clip: fc,
        fused_query: fq,
        iterations_used: iterations,
        converged,
        spectral_radius_estimate: rho,
    })
}

/// Evaluates `F_C(t)` from the expanded series
/// `M^t F_C(0) + (1 - omega) sum_{i<t} M^i (omega Z F_Q(0) + F_C(0))`.
pub fn gfa_unrolled(f_q0: &EmbeddingSet, f_c0: &EmbeddingSet, cfg: &FusionConfig, t: usize) -> Result<DMatrix<f64>> {
    if t == 0 {
        return Err(Error::Config("unrolled depth must be >= 1".into()));
    }
    let op = Operator::new(f_q0, f_c0, cfg)?;
    let m = op.transition();
    let source = op.source();

    let n = m.nrows();
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut series = DMatrix::<f64>::zeros(n, n);
    for _ in 0..t {
        series += &power;
        power = &power * &m;
    }
    let out = &power * &op.fc0 + series * source * (1.0 - cfg.omega);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            iteration: t,
            rho: op.spectral_radius(),
        });
    }
    Ok(out)
}

/// Solves for the limit of the walk directly: `(1 - omega)(I - M)^-1 B'`.
///
/// Refuses configurations whose estimated `rho(M)` is not below one, since the
/// series behind the closed form does not converge there.
pub fn gfa_closed_form(f_q0: &EmbeddingSet, f_c0: &EmbeddingSet, cfg: &FusionConfig) -> Result<FusionResult> {
    let op = Operator::new(f_q0, f_c0, cfg)?;
    let m = op.transition();
    let rho = spectral::spectral_radius(&m, spectral::DEFAULT_STEPS, spectral::DEFAULT_TOLERANCE);
    if rho.is_nan() || rho >= 1.0 {
        return Err(Error::NonConvergent {
            lambda: cfg.lambda,
            omega: cfg.omega,
            rho,
        });
    }
    let n = m.nrows();
    let system = DMatrix::<f64>::identity(n, n) - m;
    let solution = system.lu().solve(&op.source()).ok_or(Error::Singular)?;
    let fused_clip = solution * (1.0 - cfg.omega);
    if fused_clip.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    let fused_query = op.query_update(&fused_clip);
    Ok(FusionResult {
        fused_clip,
        fused_query,
        iterations_used: 0,
        converged: true,
        spectral_radius_estimate: rho,
    })
}

/// Collapses the fused CLIP rows into one embedding.
pub fn reduce_fused(result: &FusionResult, mode: ReduceMode) -> Result<Embedding> {
    let m = &result.fused_clip;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::EmptyInput("no fused rows to reduce".into()));
    }
    let v: Vec<f64> = match mode {
        ReduceMode::First => m.row(0).iter().copied().collect(),
        ReduceMode::Mean => m.row_mean().iter().copied().collect(),
    };
    Embedding::new(v)
}

fn check_dims(f_c: &EmbeddingSet, f_q: &EmbeddingSet) -> Result<()> {
    if f_c.dim() != f_q.dim() {
        return Err(Error::Shape(format!(
            "CLIP rows have dimension {} but query rows have {}",
            f_c.dim(),
            f_q.dim()
        )));
    }
    Ok(())
}
