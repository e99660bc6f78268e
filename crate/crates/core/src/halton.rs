//! Halton quasi-random draws for the simulated likelihood.
//!
//! Observation `n`, draw `r` of dimension `k` uses index
//! `skip + 1 + n * n_draws + r` of the radical-inverse sequence in the `k`-th
//! prime base, mapped through the standard normal quantile. Every observation
//! therefore owns a disjoint block of the sequence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{normal_cdf, normal_pdf};

pub const DEFAULT_SKIP: u64 = 100;

/// First `n` primes.
pub fn first_primes(n: usize) -> Vec<u32> {
    let mut primes: Vec<u32> = Vec::with_capacity(n);
    let mut candidate = 2u32;
    while primes.len() < n {
        if primes
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| candidate % p != 0)
        {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

/// Digit reversal of `index` in `base` about the radix point.
///
/// The reversed digits are accumulated as an integer numerator over
/// `base^digits` and divided once, so the result is the correctly rounded
/// value of the exact fraction.
pub fn radical_inverse(index: u64, base: u32) -> Result<f64> {
    if index == 0 {
        return Err(Error::domain("radical inverse index must be at least 1"));
    }
    if base < 2 {
        return Err(Error::domain(format!("invalid Halton base {base}")));
    }
    let b = base as u128;
    let mut n = index as u128;
    let mut numerator: u128 = 0;
    let mut denominator: u128 = 1;
    while n > 0 {
        numerator = numerator * b + n % b;
        denominator *= b;
        n /= b;
    }
    Ok(numerator as f64 / denominator as f64)
}

/// Acklam's rational approximation to the normal quantile (relative error
/// about 1.15e-9).
fn quantile_initial(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// `z` with `Φ(z) = u`: rational approximation plus one Newton step against
/// the erfc-based CDF.
pub fn standard_normal_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::domain(format!("normal quantile needs u in (0, 1), got {u}")));
    }
    if u == 0.5 {
        return Ok(0.0);
    }
    let z = quantile_initial(u);
    let density = normal_pdf(z);
    if density > 0.0 {
        Ok(z - (normal_cdf(z) - u) / density)
    } else {
        Ok(z)
    }
}

/// Standard-normal draws laid out as `[observation][draw][dimension]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawMatrix {
    n_obs: usize,
    n_draws: usize,
    n_dims: usize,
    skip: u64,
    bases: Vec<u32>,
    values: Vec<f64>,
}

/// Draws belonging to one observation.
#[derive(Debug, Clone, Copy)]
pub struct ObsDraws<'a> {
    values: &'a [f64],
    n_dims: usize,
}

impl<'a> ObsDraws<'a> {
    pub fn new(values: &'a [f64], n_dims: usize) -> Self {
        debug_assert!(n_dims == 0 || values.len() % n_dims == 0);
        Self { values, n_dims }
    }

    pub fn n_draws(&self) -> usize {
        self.values.len().checked_div(self.n_dims).unwrap_or(0)
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    /// The `n_dims` values of draw `r`.
    pub fn draw(&self, r: usize) -> &'a [f64] {
        &self.values[r * self.n_dims..(r + 1) * self.n_dims]
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a [f64]> + 'a {
        let n = self.n_dims.max(1);
        self.values.chunks_exact(n)
    }
}

impl DrawMatrix {
    /// Placeholder for models without random parameters.
    pub fn empty(n_obs: usize) -> Self {
        Self {
            n_obs,
            n_draws: 0,
            n_dims: 0,
            skip: 0,
            bases: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Wraps explicit draw values, e.g. hand-picked points in tests.
    pub fn from_values(n_obs: usize, n_draws: usize, n_dims: usize, values: Vec<f64>) -> Result<Self> {
        let expected = n_obs * n_draws * n_dims;
        if values.len() != expected {
            return Err(Error::Dimension {
                what: "draw values",
                expected,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("draw values must be finite"));
        }
        Ok(Self {
            n_obs,
            n_draws,
            n_dims,
            skip: 0,
            bases: Vec::new(),
            values,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn skip(&self) -> u64 {
        self.skip
    }

    pub fn bases(&self) -> &[u32] {
        &self.bases
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, obs: usize, draw: usize, dim: usize) -> f64 {
        self.values[(obs * self.n_draws + draw) * self.n_dims + dim]
    }

    pub fn for_observation(&self, obs: usize) -> ObsDraws<'_> {
        let width = self.n_draws * self.n_dims;
        ObsDraws::new(&self.values[obs * width..(obs + 1) * width], self.n_dims)
    }
}

/// Halton uniforms for the configured layout, before the normal transform.
pub fn halton_uniforms(n_obs: usize, n_draws: usize, n_dims: usize, skip: u64) -> Result<Vec<f64>> {
    let (bases, _) = check_layout(n_obs, n_draws, n_dims, skip)?;
    let mut out = vec![0.0; n_obs * n_draws * n_dims];
    fill(&mut out, n_draws, n_dims, skip, &bases, Ok)?;
    Ok(out)
}

fn check_layout(n_obs: usize, n_draws: usize, n_dims: usize, skip: u64) -> Result<(Vec<u32>, u64)> {
    if n_obs == 0 || n_draws == 0 || n_dims == 0 {
        return Err(Error::domain("draw layout needs at least one observation, draw and dimension"));
    }
    let overflow = || Error::domain("Halton index range overflows u64");
    let total = (n_obs as u64).checked_mul(n_draws as u64).ok_or_else(overflow)?;
    let last = skip.checked_add(total).ok_or_else(overflow)?;
    n_obs
        .checked_mul(n_draws)
        .and_then(|v| v.checked_mul(n_dims))
        .ok_or_else(overflow)?;
    Ok((first_primes(n_dims), last))
}

fn fill(
    out: &mut [f64],
    n_draws: usize,
    n_dims: usize,
    skip: u64,
    bases: &[u32],
    transform: impl Fn(f64) -> Result<f64> + Sync,
) -> Result<()> {
    let width = n_draws * n_dims;
    out.par_chunks_mut(width)
        .enumerate()
        .try_for_each(|(n, block)| -> Result<()> {
            for r in 0..n_draws {
                let index = skip + 1 + (n as u64) * (n_draws as u64) + r as u64;
                for (k, &base) in bases.iter().enumerate() {
                    block[r * n_dims + k] = transform(radical_inverse(index, base)?)?;
                }
            }
            Ok(())
        })
}

/// Builds the observation-specific standard-normal draw matrix.
pub fn build_draws(n_obs: usize, n_draws: usize, n_dims: usize, skip: u64) -> Result<DrawMatrix> {
    let (bases, _) = check_layout(n_obs, n_draws, n_dims, skip)?;
    let mut values = vec![0.0; n_obs * n_draws * n_dims];
    fill(&mut values, n_draws, n_dims, skip, &bases, standard_normal_quantile)?;
    Ok(DrawMatrix {
        n_obs,
        n_draws,
        n_dims,
        skip,
        bases,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_two_and_three_values() {
        let b2: Vec<f64> = (1..=4).map(|i| radical_inverse(i, 2).unwrap()).collect();
        assert_eq!(b2, vec![0.5, 0.25, 0.75, 0.125]);
        assert_eq!(radical_inverse(7, 2).unwrap(), 0.875);
        assert_eq!(radical_inverse(1, 3).unwrap(), 1.0 / 3.0);
        assert_eq!(radical_inverse(2, 3).unwrap(), 2.0 / 3.0);
        assert_eq!(radical_inverse(3, 3).unwrap(), 1.0 / 9.0);
    }

    #[test]
    fn index_zero_is_rejected() {
        assert!(radical_inverse(0, 2).is_err());
    }

    #[test]
    fn primes() {
        assert_eq!(first_primes(6), vec![2, 3, 5, 7, 11, 13]);
    }

    #[test]
    fn quantile_fixed_points() {
        assert_eq!(standard_normal_quantile(0.5).unwrap(), 0.0);
        assert!(standard_normal_quantile(0.0).is_err());
        assert!(standard_normal_quantile(1.0).is_err());
        assert!(standard_normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn layout_assigns_disjoint_blocks() {
        let u = halton_uniforms(2, 2, 1, 0).unwrap();
        let expect: Vec<f64> = (1..=4).map(|i| radical_inverse(i, 2).unwrap()).collect();
        assert_eq!(u, expect);
        let u = halton_uniforms(1, 4, 1, 0).unwrap();
        assert_eq!(u, vec![0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn empty_layout_is_rejected() {
        assert!(build_draws(0, 5, 1, 0).is_err());
        assert!(build_draws(3, 5, 0, 0).is_err());
        assert!(build_draws(usize::MAX, usize::MAX, 1, 0).is_err());
    }
}
