use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{c64, norm2};
use crate::error::{Error, Result};

const MAX_RETRIES: u64 = 3;

/// Estimates the spectral norm of an implicitly given operator by power
/// iteration on `AᴴA`.
///
/// The start vector is drawn from a complex normal distribution seeded with
/// `seed`. Returns `‖A x‖` for the final normalized iterate `x`, which never
/// overestimates the true norm. An operator that annihilates the start vector
/// is reported as having norm zero.
pub fn power_iteration_norm<A, AH>(
    mut apply: A,
    mut apply_adjoint: AH,
    dim: usize,
    iterations: usize,
    seed: u64,
) -> Result<f64>
where
    A: FnMut(&[c64]) -> Vec<c64>,
    AH: FnMut(&[c64]) -> Vec<c64>,
{
    if dim == 0 || iterations == 0 {
        return Err(Error::InvalidConfig(
            "power iteration needs dim >= 1 and iterations >= 1".into(),
        ));
    }
    let mut x = start_vector(dim, seed)?;

    for _ in 0..iterations {
        let y = apply(&x);
        let z = apply_adjoint(&y);
        let nz = norm2(&z);
        if nz == 0.0 {
            return Ok(0.0);
        }
        if !nz.is_finite() {
            return Err(Error::NonFinite);
        }
        x = z.into_iter().map(|v| v / nz).collect();
    }
    Ok(norm2(&apply(&x)))
}

fn start_vector(dim: usize, seed: u64) -> Result<Vec<c64>> {
    for attempt in 0..=MAX_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
        let x: Vec<c64> = (0..dim)
            .map(|_| c64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        let nx = norm2(&x);
        if nx > 0.0 {
            return Ok(x.into_iter().map(|v| v / nx).collect());
        }
    }
    Err(Error::DegenerateStart(MAX_RETRIES as usize + 1))
}
