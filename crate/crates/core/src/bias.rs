//! Expected estimation errors of critic-combination rules under a
//! correlated Gaussian error model.
//!
//! The model: each critic's estimate deviates from the truth by a Gaussian
//! error. `G₁ ~ N(ε₁, σ₁²)` and `G₂ ~ N(ε₂, σ₂²)` are correlated with
//! coefficient `ρ` (critics share replay data, so their errors co-move);
//! the third critic's error `G₃` shares `G₂`'s marginal and is modeled as
//! independent of the pair by default, with a correlation knob exposed on
//! the Monte-Carlo oracle for sensitivity analysis.
//!
//! Closed forms:
//!
//! * pairwise minimum — the exact first moment of `min(G₁, G₂)`. With the
//!   mean gap `δ = ε₁ − ε₂` and the combined dispersion
//!   `θ = √(σ₁² + σ₂² − 2ρσ₁σ₂)`, the identity
//!   `min(a, b) = (a + b)/2 − |a − b|/2` gives
//!   `E[min] = (ε₁+ε₂)/2 − E|N(δ, θ²)|/2`, with the folded-normal mean
//!   `E|N(δ, θ²)| = δ·erf(δ/(θ√2)) + θ·√(2/π)·exp(−δ²/(2θ²))`. For equal
//!   means this collapses to the classic `(ε₁+ε₂)/2 − θ/√(2π)`.
//! * triplet (min-max-min) — defined by the decomposition
//!   `(pairwise-min bias + ε₂)/2`: the average of the bias introduced by a
//!   clipped pair and the bias of a lone critic. On the equal-means axis
//!   this equals `(ε₁+3ε₂)/4 − θ/(2√(2π))` algebraically, and it is the
//!   *exact* expectation of `min(max(G₁,G₂), G₃)` when the three errors are
//!   iid (ε₁=ε₂, σ₁=σ₂, ρ=0) — for iid draws the triplet statistic is the
//!   middle order statistic with probability ⅔ and the minimum with
//!   probability ⅓ — as well as in the exchangeable case where G₃ carries
//!   the same pairwise correlation ρ. Away from those regimes it is the
//!   model's working approximation; [`mc_bias_oracle`] quantifies the gap
//!   rather than asserting agreement.
//!
//! Every closed form here is validated against [`mc_bias_oracle`], a brute
//! sampler that makes no distributional shortcuts.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const SQRT_2PI: f64 = 2.506628274631000502415765284811;

/// Standard normal cumulative distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal probability density function.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Mean of `|N(delta, scale²)|` (folded normal first moment).
fn folded_normal_mean(delta: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        return delta.abs();
    }
    let z = delta / scale;
    delta * libm::erf(z / std::f64::consts::SQRT_2)
        + scale * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * z * z).exp()
}

/// Error-distribution parameters of a critic pair (plus the implied third
/// critic sharing `G₂`'s marginal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianErrorModel {
    /// Mean error of the first critic (the one the actor maximizes).
    pub eps1: f64,
    /// Mean error of the second critic; the third shares it.
    pub eps2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Correlation between the first and second critics' errors.
    pub rho: f64,
}

impl GaussianErrorModel {
    pub fn new(eps1: f64, eps2: f64, sigma1: f64, sigma2: f64, rho: f64) -> Result<Self> {
        let model = GaussianErrorModel {
            eps1,
            eps2,
            sigma1,
            sigma2,
            rho,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
            ("rho", self.rho),
        ] {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite, got {v}")));
            }
        }
        if self.sigma1 <= 0.0 || self.sigma2 <= 0.0 {
            return Err(Error::Domain(format!(
                "standard deviations must be positive, got sigma1={}, sigma2={}",
                self.sigma1, self.sigma2
            )));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::Domain(format!(
                "correlation must lie in [-1, 1], got {}",
                self.rho
            )));
        }
        Ok(())
    }

    /// Additionally require the ordered-means regime `ε₁ ≥ ε₂ ≥ 0` that the
    /// bias analysis assumes (the actor's own critic drifts highest).
    pub fn validate_ordered_means(&self) -> Result<()> {
        self.validate()?;
        if !(self.eps1 >= self.eps2 && self.eps2 >= 0.0) {
            return Err(Error::Domain(format!(
                "ordered-means regime requires eps1 >= eps2 >= 0, got eps1={}, eps2={}",
                self.eps1, self.eps2
            )));
        }
        Ok(())
    }

    /// Dispersion of `G₁ − G₂`: `θ = √(σ₁² + σ₂² − 2ρσ₁σ₂)`. Non-negative
    /// for every valid model (AM–GM); zero only for perfectly correlated,
    /// equal-spread critics.
    pub fn theta_combo(&self) -> f64 {
        let radicand =
            self.sigma1 * self.sigma1 + self.sigma2 * self.sigma2
                - 2.0 * self.rho * self.sigma1 * self.sigma2;
        // Guard the tiny negative radicands that floating point can produce
        // at ρ = ±1 with equal sigmas.
        radicand.max(0.0).sqrt()
    }

    /// Exact expected value of `min(G₁, G₂)` — the estimation bias of the
    /// clipped-pair target rule.
    pub fn clipped_double_bias(&self) -> f64 {
        let theta = self.theta_combo();
        if theta == 0.0 {
            // The pair is a.s. offset by exactly δ, so the minimum is the
            // smaller mean.
            return self.eps1.min(self.eps2);
        }
        let delta = self.eps1 - self.eps2;
        0.5 * (self.eps1 + self.eps2) - 0.5 * folded_normal_mean(delta, theta)
    }

    /// Exact expected value of `max(G₁, G₂)` (mirror of the minimum).
    pub fn pair_max_bias(&self) -> f64 {
        let theta = self.theta_combo();
        if theta == 0.0 {
            return self.eps1.max(self.eps2);
        }
        let delta = self.eps1 - self.eps2;
        0.5 * (self.eps1 + self.eps2) + 0.5 * folded_normal_mean(delta, theta)
    }

    /// Expected estimation bias of the triplet rule
    /// `min(max(G₁, G₂), G₃)`: the average of the clipped-pair bias and a
    /// lone critic's bias `ε₂`.
    ///
    /// See the module docs for the exactness domain. On the equal-means
    /// axis the equivalent explicit form `(ε₁+3ε₂)/4 − θ/(2√(2π))` is also
    /// evaluated and cross-checked to 1e-12 as a consistency tripwire.
    pub fn triplet_bias(&self) -> f64 {
        let via_decomposition = 0.5 * (self.clipped_double_bias() + self.eps2);
        if self.eps1 == self.eps2 {
            let explicit =
                0.25 * (self.eps1 + 3.0 * self.eps2) - self.theta_combo() / (2.0 * SQRT_2PI);
            assert!(
                (via_decomposition - explicit).abs() <= 1e-12,
                "triplet closed-form paths disagree: {via_decomposition} vs {explicit}"
            );
        }
        via_decomposition
    }
}

/// The σ above which a symmetric critic pair (`σ₁ = σ₂ = σ`, `ε₁ = ε₂`)
/// underestimates: `√(π/(1−ρ))·ε₁`. In that regime the clipped-pair bias
/// is `ε₁ − σ·√(1−ρ)/√π`, which crosses zero exactly at this value.
pub fn underestimation_threshold(eps1: f64, rho: f64) -> Result<f64> {
    if !eps1.is_finite() || eps1 < 0.0 {
        return Err(Error::Domain(format!(
            "threshold requires a non-negative finite mean error, got {eps1}"
        )));
    }
    if !(-1.0..1.0).contains(&rho) {
        return Err(Error::Domain(format!(
            "threshold requires correlation in [-1, 1), got {rho}"
        )));
    }
    Ok((std::f64::consts::PI / (1.0 - rho)).sqrt() * eps1)
}

/// Critic-combination statistic evaluated by the Monte-Carlo oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// `G₁` alone.
    Single,
    /// `min(G₁, G₂)` — the clipped-pair rule.
    MinOfTwo,
    /// `max(G₁, G₂)`.
    MaxOfTwo,
    /// `min(max(G₁, G₂), G₃)` — the triplet rule.
    MinMaxMin,
}

impl EstimatorKind {
    /// Closed-form expectation under `model`, where one exists. The
    /// `MinMaxMin` value is exact only on the regimes documented on
    /// [`GaussianErrorModel::triplet_bias`].
    pub fn closed_form(&self, model: &GaussianErrorModel) -> f64 {
        match self {
            EstimatorKind::Single => model.eps1,
            EstimatorKind::MinOfTwo => model.clipped_double_bias(),
            EstimatorKind::MaxOfTwo => model.pair_max_bias(),
            EstimatorKind::MinMaxMin => model.triplet_bias(),
        }
    }
}

/// Brute-force estimate of the chosen statistic's expectation:
/// `(sample mean, standard error)`.
///
/// Per sample, `(G₁, G₂)` are drawn from the correlated bivariate normal
/// via its Cholesky factor (`G₂ = ε₂ + σ₂(ρ·z₁ + √(1−ρ²)·z₂)`), and — for
/// `MinMaxMin` only — `G₃ = ε₂ + σ₂·z₃` independently. Deterministic in
/// `seed`; the mean and variance accumulate in one streaming pass.
pub fn mc_bias_oracle(
    model: &GaussianErrorModel,
    kind: EstimatorKind,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    model.validate()?;
    mc_oracle_impl(model, kind, None, n_samples, seed)
}

/// [`mc_bias_oracle`] with the extension knob: `rho3` is the correlation of
/// `G₃` with *each* of `G₁` and `G₂`. The resulting 3×3 correlation matrix
/// must be positive semidefinite, which for `|ρ| < 1` means
/// `rho3² ≤ (1+ρ)/2`. Setting `rho3 = ρ` produces the exchangeable triple.
pub fn mc_bias_oracle_with_g3_correlation(
    model: &GaussianErrorModel,
    kind: EstimatorKind,
    rho3: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    model.validate()?;
    if model.rho.abs() >= 1.0 {
        return Err(Error::Domain(
            "correlated-G3 oracle requires |rho| < 1".into(),
        ));
    }
    if !rho3.is_finite() || rho3 * rho3 > 0.5 * (1.0 + model.rho) + 1e-12 {
        return Err(Error::Domain(format!(
            "rho3 = {rho3} makes the 3-critic correlation matrix indefinite \
             (need rho3^2 <= (1+rho)/2 = {})",
            0.5 * (1.0 + model.rho)
        )));
    }
    mc_oracle_impl(model, kind, Some(rho3), n_samples, seed)
}

fn mc_oracle_impl(
    model: &GaussianErrorModel,
    kind: EstimatorKind,
    rho3: Option<f64>,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_samples < 1000 {
        return Err(Error::Usage(format!(
            "oracle needs at least 1000 samples for a meaningful standard error, got {n_samples}"
        )));
    }

    // Cholesky rows for (G₁, G₂, G₃). The pair factorization is closed
    // form; the third row generalizes it for the correlated-G₃ knob:
    //   L₃₁ = r₃,  L₃₂ = r₃(1−ρ)/√(1−ρ²),  L₃₃ = √(1 − L₃₁² − L₃₂²).
    let rho = model.rho;
    let cross = (1.0 - rho * rho).max(0.0).sqrt();
    let (l31, l32, l33) = match rho3 {
        None => (0.0, 0.0, 1.0),
        Some(r3) => {
            let l31 = r3;
            let l32 = r3 * (1.0 - rho) / cross;
            let l33 = (1.0 - l31 * l31 - l32 * l32).max(0.0).sqrt();
            (l31, l32, l33)
        }
    };
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for i in 0..n_samples {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let g1 = model.eps1 + model.sigma1 * z1;
        let g2 = model.eps2 + model.sigma2 * (rho * z1 + cross * z2);
        let value = match kind {
            EstimatorKind::Single => g1,
            EstimatorKind::MinOfTwo => g1.min(g2),
            EstimatorKind::MaxOfTwo => g1.max(g2),
            EstimatorKind::MinMaxMin => {
                let z3: f64 = rng.sample(StandardNormal);
                let g3 = model.eps2 + model.sigma2 * (l31 * z1 + l32 * z2 + l33 * z3);
                g1.max(g2).min(g3)
            }
        };
        // Welford streaming mean/variance.
        let delta = value - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (value - mean);
    }
    let variance = m2 / (n_samples as f64 - 1.0);
    let std_error = (variance / n_samples as f64).sqrt();
    Ok((mean, std_error))
}

/// The 72-point verification grid: `ε₁ ∈ {0, 0.1, 0.5}`, `ε₂ ∈ {0, 0.1}`,
/// `σ₁ = σ₂ = σ ∈ {0.2, 1, 3}`, `ρ ∈ {−0.5, 0, 0.5, 0.9}`, in that
/// nesting order (ρ innermost).
pub fn standard_grid() -> Vec<GaussianErrorModel> {
    let mut grid = Vec::with_capacity(72);
    for &eps1 in &[0.0, 0.1, 0.5] {
        for &eps2 in &[0.0, 0.1] {
            for &sigma in &[0.2, 1.0, 3.0] {
                for &rho in &[-0.5, 0.0, 0.5, 0.9] {
                    grid.push(GaussianErrorModel {
                        eps1,
                        eps2,
                        sigma1: sigma,
                        sigma2: sigma,
                        rho,
                    });
                }
            }
        }
    }
    grid
}

/// True when the triplet closed form is provably exact for `model` under
/// the independent-G₃ sampling used by [`mc_bias_oracle`]: the iid family
/// `ε₁ = ε₂`, `σ₁ = σ₂`, `ρ = 0`.
pub fn triplet_form_exact_iid(model: &GaussianErrorModel) -> bool {
    model.eps1 == model.eps2 && model.sigma1 == model.sigma2 && model.rho == 0.0
}
