//! Deterministic random conformal factors.
//!
//! Coefficients a_j are drawn uniformly from [−A, A]/(j+1)² with a SplitMix64
//! stream keyed by the seed, which biases toward smooth low-frequency
//! perturbations where C₁ acceptance is high. Draws outside C₁
//! (min σ₁(W) ≤ 0) are rejected and the stream continues, so a fixed seed
//! reproduces the accepted sample bit for bit.

use std::sync::Arc;

use thiserror::Error;

use sigma2_core::sphere::{schouten_field, ConformalFactor, Grid};
use sigma2_core::util::SplitMix64;

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error("no C_1 sample found after {attempts} rejected draws")]
    RejectionExhausted { attempts: u32 },
}

#[derive(Debug, Clone)]
pub struct SampledMetric {
    pub cf: ConformalFactor,
    pub coeffs: Vec<f64>,
    pub rejected_draws: u32,
    pub min_sigma1w: f64,
}

pub const MAX_REJECTIONS: u32 = 1000;

pub fn sample_metric(
    seed: u64,
    amplitude: f64,
    degree: usize,
    grid: &Arc<Grid>,
) -> Result<SampledMetric, SampleError> {
    let mut rng = SplitMix64::new(seed);
    let mut rejected = 0;
    loop {
        let coeffs: Vec<f64> = (0..=degree)
            .map(|j| {
                let scale = amplitude / ((j + 1) * (j + 1)) as f64;
                rng.next_in(-scale, scale)
            })
            .collect();
        let cf = ConformalFactor::from_coefficients(Arc::clone(grid), &coeffs);
        let min = schouten_field(&cf).min_sigma1();
        if min > 0.0 {
            return Ok(SampledMetric { cf, coeffs, rejected_draws: rejected, min_sigma1w: min });
        }
        rejected += 1;
        if rejected >= MAX_REJECTIONS {
            return Err(SampleError::RejectionExhausted { attempts: rejected });
        }
    }
}
