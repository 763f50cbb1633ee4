//! Regularised least-squares estimate of the attraction parameter and the
//! confidence ellipsoid around it.
//!
//! The design matrix `V = λI + Σ γ_k² x xᵀ` and its inverse are kept in sync
//! with Sherman–Morrison updates, one per observed position. Every
//! [`REINVERT_EVERY`] rank-one updates the inverse and `ln det V` are
//! recomputed from `V` by a Cholesky factorisation to bound drift.
//!
//! Each rank-one step is also kept in a short log so that consumers caching
//! quadratic forms `xᵀV⁻¹x` (the conservative ledger) can follow the inverse
//! without recomputing `O(d²)` forms for every stored item.

use crate::error::{ensure_finite, Error, Result};

/// Number of rank-one updates between full re-inversions.
pub const REINVERT_EVERY: u64 = 1000;

/// One observed position: `γ_k x` enters the design, `γ_k w` the response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<'a> {
    pub context: &'a [f64],
    pub discount: f64,
    pub weight: f64,
}

/// Upper and lower confidence bounds of a single item's expected weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmBounds {
    pub mean: f64,
    pub radius: f64,
    pub upper: f64,
    pub lower: f64,
}

impl ArmBounds {
    pub fn from_mean_radius(mean: f64, radius: f64) -> Self {
        let upper = (mean + radius).min(1.0).max(0.0);
        let lower = (mean - radius).max(0.0).min(upper);
        Self {
            mean,
            radius,
            upper,
            lower,
        }
    }
}

/// `V_new⁻¹ = V_old⁻¹ − scale · z zᵀ` with `z = V_old⁻¹ u`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneStep {
    pub direction: Vec<f64>,
    pub scale: f64,
}

/// Confidence radius `R·√(ln(det V / (λ^d δ²))) + √λ`.
pub fn confidence_radius(log_det: f64, dim: usize, lambda_reg: f64, noise_r: f64, delta: f64) -> f64 {
    let arg = log_det - dim as f64 * lambda_reg.ln() - 2.0 * delta.ln();
    noise_r * arg.max(0.0).sqrt() + lambda_reg.sqrt()
}

#[derive(Debug, Clone)]
pub struct EllipsoidState {
    dim: usize,
    gram: Vec<f64>,
    gram_inv: Vec<f64>,
    response: Vec<f64>,
    theta_hat: Vec<f64>,
    beta: f64,
    log_det: f64,
    lambda_reg: f64,
    noise_r: f64,
    delta: f64,
    updates: u64,
    epoch: u64,
    log_start: u64,
    log: Vec<RankOneStep>,
}

impl EllipsoidState {
    /// Fresh state `V = λI`, `θ̂ = 0`, `β₀ = 1`.
    pub fn new(dim: usize, lambda_reg: f64, noise_r: f64, delta: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        if !(lambda_reg.is_finite() && lambda_reg > 0.0) {
            return Err(Error::InvalidConfig(format!("lambda_reg must be positive, got {lambda_reg}")));
        }
        if !(noise_r.is_finite() && noise_r > 0.0) {
            return Err(Error::InvalidConfig(format!("noise_r must be positive, got {noise_r}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {delta}")));
        }
        let mut gram = vec![0.0; dim * dim];
        let mut gram_inv = vec![0.0; dim * dim];
        for i in 0..dim {
            gram[i * dim + i] = lambda_reg;
            gram_inv[i * dim + i] = 1.0 / lambda_reg;
        }
        Ok(Self {
            dim,
            gram,
            gram_inv,
            response: vec![0.0; dim],
            theta_hat: vec![0.0; dim],
            beta: 1.0,
            log_det: dim as f64 * lambda_reg.ln(),
            lambda_reg,
            noise_r,
            delta,
            updates: 0,
            epoch: 0,
            log_start: 0,
            log: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major `V`.
    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    /// Row-major `V⁻¹`.
    pub fn gram_inv(&self) -> &[f64] {
        &self.gram_inv
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn theta_hat(&self) -> &[f64] {
        &self.theta_hat
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn lambda_reg(&self) -> f64 {
        self.lambda_reg
    }

    pub fn noise_r(&self) -> f64 {
        self.noise_r
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of rank-one updates applied so far.
    pub fn version(&self) -> u64 {
        self.updates
    }

    /// Incremented on every full re-inversion.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Rank-one steps applied after `version`, or `None` when a re-inversion
    /// happened in between and cached quadratic forms must be rebuilt.
    pub fn steps_since(&self, version: u64) -> Option<&[RankOneStep]> {
        if version < self.log_start || version > self.updates {
            return None;
        }
        Some(&self.log[(version - self.log_start) as usize..])
    }

    /// Fold a round of observations into the estimate.
    ///
    /// All inputs are validated before anything is mutated. An empty slice
    /// leaves the state untouched (including `β`).
    pub fn update(&mut self, observed: &[Observation<'_>]) -> Result<()> {
        for obs in observed {
            if obs.context.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: obs.context.len(),
                });
            }
            ensure_finite(obs.context, "observation context")?;
            if !obs.discount.is_finite() || !obs.weight.is_finite() {
                return Err(Error::NonFinite("observation"));
            }
            if !(0.0..=1.0).contains(&obs.discount) {
                return Err(Error::InvalidDiscount(obs.discount));
            }
            if !(0.0..=1.0).contains(&obs.weight) {
                return Err(Error::WeightOutOfRange {
                    index: 0,
                    value: obs.weight,
                });
            }
        }
        if observed.is_empty() {
            return Ok(());
        }

        let d = self.dim;
        let mut u = vec![0.0; d];
        for obs in observed {
            for (ui, &xi) in u.iter_mut().zip(obs.context) {
                *ui = obs.discount * xi;
            }
            let z = mat_vec(&self.gram_inv, d, &u);
            let s = dot(&u, &z);
            let scale = 1.0 / (1.0 + s);
            for i in 0..d {
                let row = i * d;
                let (ui, zi) = (u[i], z[i]);
                for j in 0..d {
                    self.gram[row + j] += ui * u[j];
                    self.gram_inv[row + j] -= scale * zi * z[j];
                }
            }
            self.log_det += s.ln_1p();
            let gw = obs.discount * obs.discount * obs.weight;
            for (b, &xi) in self.response.iter_mut().zip(obs.context) {
                *b += gw * xi;
            }
            self.updates += 1;
            self.log.push(RankOneStep { direction: z, scale });
            if self.updates % REINVERT_EVERY == 0 {
                self.reinvert()?;
            }
        }
        self.theta_hat = mat_vec(&self.gram_inv, d, &self.response);
        self.beta = confidence_radius(self.log_det, d, self.lambda_reg, self.noise_r, self.delta);
        Ok(())
    }

    /// Recompute `V⁻¹` and `ln det V` from `V` directly.
    pub fn reinvert(&mut self) -> Result<()> {
        let (inv, log_det) = cholesky_inverse(&self.gram, self.dim).ok_or_else(|| {
            Error::InvariantViolation("design matrix lost positive definiteness".into())
        })?;
        self.gram_inv = inv;
        // ln det V is non-decreasing; rounding must not make the resync step backwards.
        self.log_det = log_det.max(self.log_det);
        self.epoch += 1;
        self.log.clear();
        self.log_start = self.updates;
        self.theta_hat = mat_vec(&self.gram_inv, self.dim, &self.response);
        Ok(())
    }

    /// `xᵀ V⁻¹ x`, clamped at zero.
    pub fn norm_inv_sq(&self, x: &[f64]) -> f64 {
        quad_form(&self.gram_inv, self.dim, x).max(0.0)
    }

    /// Per-item confidence bounds under the current state.
    pub fn bounds_for(&self, context: &[f64]) -> Result<ArmBounds> {
        if context.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: context.len(),
            });
        }
        ensure_finite(context, "context")?;
        Ok(self.bounds_unchecked(context))
    }

    pub(crate) fn bounds_unchecked(&self, context: &[f64]) -> ArmBounds {
        let mean = dot(&self.theta_hat, context);
        let radius = self.beta * self.norm_inv_sq(context).sqrt();
        ArmBounds::from_mean_radius(mean, radius)
    }

    /// Whether `θ*` lies in `{θ : ‖θ̂ − θ‖_V ≤ β}`.
    pub fn confidence_contains(&self, theta_star: &[f64]) -> bool {
        if theta_star.len() != self.dim || theta_star.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let diff: Vec<f64> = self.theta_hat.iter().zip(theta_star).map(|(a, b)| a - b).collect();
        quad_form(&self.gram, self.dim, &diff).max(0.0).sqrt() <= self.beta
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mat_vec(m: &[f64], d: usize, x: &[f64]) -> Vec<f64> {
    m.chunks_exact(d).map(|row| dot(row, x)).collect()
}

pub(crate) fn quad_form(m: &[f64], d: usize, x: &[f64]) -> f64 {
    m.chunks_exact(d).zip(x).map(|(row, xi)| xi * dot(row, x)).sum()
}

/// Inverse and log-determinant of a symmetric positive-definite matrix.
fn cholesky_inverse(a: &[f64], n: usize) -> Option<(Vec<f64>, f64)> {
    // Lower-triangular L with A = L Lᵀ.
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= l[j * n + k] * l[j * n + k];
        }
        if !(diag > 0.0) {
            return None;
        }
        let ljj = diag.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    let log_det = 2.0 * (0..n).map(|i| l[i * n + i].ln()).sum::<f64>();

    // Columns of L⁻¹ by forward substitution, then A⁻¹ = L⁻ᵀ L⁻¹.
    let mut linv = vec![0.0; n * n];
    for c in 0..n {
        for i in c..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in c..i {
                s -= l[i * n + k] * linv[k * n + c];
            }
            linv[i * n + c] = s / l[i * n + i];
        }
    }
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (i..n).map(|k| linv[k * n + i] * linv[k * n + j]).sum();
            inv[i * n + j] = s;
            inv[j * n + i] = s;
        }
    }
    Some((inv, log_det))
}
