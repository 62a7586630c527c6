//! Seeded Gaussian noise streams implementing discretized white noise.
//!
//! A [`NoiseStream`] is addressed by a global 64-bit seed plus a
//! [`StreamKey`] of (trajectory index, channel role). The key maps onto an
//! independent ChaCha stream, so trajectories can be generated in parallel,
//! in any order, and still reproduce bit-identical sample sequences.
//!
//! Discretization convention: a white-noise increment over a step `dt` is a
//! single Gaussian sample with variance `1/dt`, so that the lagged products
//! reproduce the delta correlation `<xi(t1) xi(t2)> = delta(t1 - t2)` in the
//! continuum limit. Readouts are then formed as `component + sqrt(tau) * xi`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Role of a stream within one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    /// Readout randomness of the sigma_x channel.
    ReadoutX,
    /// Readout randomness of the sigma_z channel.
    ReadoutZ,
    /// Physical spin-driving noise of the classical emulator.
    Physical,
    /// Subjective noise of the classical emulator.
    Subjective,
    /// Projective measurement outcomes.
    Projective,
}

impl StreamRole {
    pub fn code(self) -> u64 {
        match self {
            StreamRole::ReadoutX => 0,
            StreamRole::ReadoutZ => 1,
            StreamRole::Physical => 2,
            StreamRole::Subjective => 3,
            StreamRole::Projective => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            StreamRole::ReadoutX => "readout-x",
            StreamRole::ReadoutZ => "readout-z",
            StreamRole::Physical => "physical",
            StreamRole::Subjective => "subjective",
            StreamRole::Projective => "projective",
        }
    }
}

/// Address of one independent stream: channel role within one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub trajectory: u64,
    pub role: StreamRole,
}

impl StreamKey {
    pub fn new(trajectory: u64, role: StreamRole) -> Self {
        Self { trajectory, role }
    }

    /// Packs (trajectory, role) into the 64-bit ChaCha stream id.
    /// Trajectory indices occupy the upper 56 bits.
    pub fn stream_id(&self) -> u64 {
        debug_assert!(self.trajectory < (1 << 56));
        (self.trajectory << 8) | self.role.code()
    }
}

/// One discretized white-noise sample: Gaussian with variance `1/dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhiteNoiseIncrement {
    pub value: f64,
    pub dt: f64,
}

/// Deterministic, seeded Gaussian stream for one (trajectory, role) pair.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha12Rng,
    seed: u64,
    key: StreamKey,
}

impl NoiseStream {
    pub fn new(seed: u64, key: StreamKey) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(key.stream_id());
        Self { rng, seed, key }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    /// Standard normal sample (Ziggurat, exact Gaussian tails).
    pub fn next_standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform sample in [0, 1).
    pub fn next_uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// White-noise increment for step `dt`: N(0, 1/dt).
    pub fn next_increment(&mut self, dt: f64) -> Result<WhiteNoiseIncrement> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParam {
                name: "dt",
                reason: format!("must be positive and finite, got {dt}"),
            });
        }
        Ok(WhiteNoiseIncrement {
            value: self.next_standard_normal() / dt.sqrt(),
            dt,
        })
    }
}

/// Rotated increment xi_phi = cos(phi) xi_x + sin(phi) xi_z.
///
/// Both inputs must share the same step; the result keeps the per-step
/// variance 1/dt because cos^2 + sin^2 = 1.
pub fn rotate_noise(
    xi_x: WhiteNoiseIncrement,
    xi_z: WhiteNoiseIncrement,
    phi: f64,
) -> Result<WhiteNoiseIncrement> {
    if xi_x.dt != xi_z.dt {
        return Err(Error::MismatchedStep {
            left: xi_x.dt,
            right: xi_z.dt,
        });
    }
    Ok(WhiteNoiseIncrement {
        value: phi.cos() * xi_x.value + phi.sin() * xi_z.value,
        dt: xi_x.dt,
    })
}

/// Human-readable description of the stream layout, recorded in output
/// headers for reproducibility.
pub fn layout_description(seed: u64) -> String {
    format!(
        "seed={seed} streams=chacha12(stream_id = trajectory<<8 | role; \
         roles: readout-x=0 readout-z=1 physical=2 subjective=3 projective=4)"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(seed: u64, traj: u64, role: StreamRole) -> NoiseStream {
        NoiseStream::new(seed, StreamKey::new(traj, role))
    }

    #[test]
    fn identical_keys_reproduce_bit_identical_sequences() {
        let mut a = stream(42, 7, StreamRole::ReadoutX);
        let mut b = stream(42, 7, StreamRole::ReadoutX);
        for _ in 0..1000 {
            assert_eq!(a.next_standard_normal(), b.next_standard_normal());
        }
    }

    #[test]
    fn distinct_roles_give_distinct_sequences() {
        let mut a = stream(42, 7, StreamRole::ReadoutX);
        let mut b = stream(42, 7, StreamRole::ReadoutZ);
        let same = (0..100).filter(|_| a.next_standard_normal() == b.next_standard_normal());
        assert_eq!(same.count(), 0);
    }

    #[test]
    fn rejects_non_positive_step() {
        let mut s = stream(1, 0, StreamRole::ReadoutX);
        assert!(s.next_increment(0.0).is_err());
        assert!(s.next_increment(-0.1).is_err());
    }

    #[test]
    fn increment_moments_match_discretized_white_noise() {
        let n = 1_000_000usize;
        let dt = 0.01;
        let mut s = stream(123, 0, StreamRole::ReadoutX);
        let xs: Vec<f64> = (0..n)
            .map(|_| s.next_increment(dt).unwrap().value)
            .collect();

        let mean = xs.iter().sum::<f64>() / n as f64;
        // stderr of the mean is sqrt(1/dt / n) = 10/1000
        assert!(mean.abs() < 3.0 * (1.0 / dt / n as f64).sqrt(), "mean {mean}");

        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 100.0).abs() < 1.0, "variance {var}");

        // lag-1 autocorrelation consistent with independence
        let lag1: f64 = xs.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (n - 1) as f64;
        let rho = lag1 / var;
        assert!(rho.abs() < 3.0 / (n as f64).sqrt(), "lag-1 corr {rho}");
    }

    #[test]
    fn channel_streams_are_uncorrelated() {
        let n = 100_000usize;
        let mut sx = stream(9, 3, StreamRole::ReadoutX);
        let mut sz = stream(9, 3, StreamRole::ReadoutZ);
        let xs: Vec<f64> = (0..n).map(|_| sx.next_standard_normal()).collect();
        let zs: Vec<f64> = (0..n).map(|_| sz.next_standard_normal()).collect();
        for lag in 0..4usize {
            let m = n - lag;
            let c = (0..m).map(|i| xs[i] * zs[i + lag]).sum::<f64>() / m as f64;
            assert!(c.abs() < 4.0 / (m as f64).sqrt(), "lag {lag}: {c}");
        }
    }

    #[test]
    fn rotation_preserves_variance_and_special_angles() {
        let dt = 0.01;
        let xi_x = WhiteNoiseIncrement { value: 3.5, dt };
        let xi_z = WhiteNoiseIncrement { value: -1.25, dt };
        assert_eq!(rotate_noise(xi_x, xi_z, 0.0).unwrap().value, 3.5);
        let quarter = rotate_noise(xi_x, xi_z, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((quarter.value - -1.25).abs() < 1e-15);

        let bad = WhiteNoiseIncrement { value: 0.0, dt: 0.02 };
        assert!(rotate_noise(xi_x, bad, 1.0).is_err());

        // empirical variance at phi = pi/4 stays 1/dt
        let mut sx = stream(5, 0, StreamRole::ReadoutX);
        let mut sz = stream(5, 0, StreamRole::ReadoutZ);
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let xi = rotate_noise(
                sx.next_increment(dt).unwrap(),
                sz.next_increment(dt).unwrap(),
                std::f64::consts::FRAC_PI_4,
            )
            .unwrap();
            sum += xi.value;
            sumsq += xi.value * xi.value;
        }
        let var = sumsq / n as f64 - (sum / n as f64).powi(2);
        assert!((var - 100.0).abs() < 1.0, "rotated variance {var}");
    }
}
