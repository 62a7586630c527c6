//! Classical spin model that reproduces the monitored-qubit statistics.
//!
//! A planar spin at angle theta (x = cos theta, z = sin theta) is driven by
//! physical white noise: theta' = theta + r~ dt/tau with r~ drawn per step
//! from N(0, tau/dt), so theta performs Brownian motion with variance t/tau.
//! An agent who knows theta and r~ mixes in an independent subjective noise
//! s~ with the same variance and reports the effective readouts
//!
//! ```text
//! r~_x = x + (-z r~ + x s~)
//! r~_z = z + ( x r~ + z s~)
//! ```
//!
//! The rotation structure makes the effective noises
//! xi'_x = (-z r~ + x s~)/sqrt(tau) and xi'_z = (x r~ + z s~)/sqrt(tau)
//! unit-white and mutually uncorrelated, and the readouts then satisfy all
//! the correlators of the jointly monitored qubit. On the unit circle the
//! identity `(1 - x^2) r~_x - x z r~_z = -z r~` holds exactly, which is why
//! a third party integrating the Bloch-coordinate master equation from
//! these readouts reconstructs the spin path itself.
//!
//! The model requires equal measurement times on the two channels; the
//! per-step physical and subjective noises have variance tau/dt (the
//! tau-delta(t) normalization), which is the unique choice that makes the
//! effective noises unit white.

use crate::bloch::BlochState;
use crate::error::{Error, Result};
use crate::noise::{NoiseStream, StreamKey, StreamRole};
use crate::trajectory::{self, ReadoutRecord, Renorm, Scheme, StepSample, StepSink};

/// Planar spin direction; x = cos theta, z = sin theta, y = 0 and
/// x^2 + z^2 = 1 hold by construction. theta is kept unwrapped so diffusion
/// variance stays measurable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinState {
    pub theta: f64,
}

impl SpinState {
    pub fn new(theta: f64) -> Self {
        Self { theta }
    }

    pub fn x(&self) -> f64 {
        self.theta.cos()
    }

    pub fn z(&self) -> f64 {
        self.theta.sin()
    }

    pub fn bloch(&self) -> BlochState {
        BlochState::new_unchecked(self.x(), 0.0, self.z())
    }
}

/// theta' = theta + r~ dt / tau.
pub fn step_spin(spin: SpinState, r_tilde: f64, dt: f64, tau: f64) -> SpinState {
    SpinState::new(spin.theta + r_tilde * dt / tau)
}

/// Emulator run configuration. The spin model is only valid for equal
/// measurement times, so a single tau applies to both effective channels.
#[derive(Debug, Clone)]
pub struct EmulatorConfig {
    pub theta0: f64,
    pub dt: f64,
    pub tau: f64,
    pub n_steps: usize,
    /// Draw the subjective noise and construct effective readouts. The spin
    /// path itself is unchanged by this switch.
    pub with_readouts: bool,
}

impl EmulatorConfig {
    pub fn new(theta0: f64, dt: f64, tau: f64, n_steps: usize) -> Self {
        Self {
            theta0,
            dt,
            tau,
            n_steps,
            with_readouts: true,
        }
    }

    /// Gate for callers holding per-axis measurement times: the classical
    /// model does not extend to asymmetric strengths.
    pub fn for_taus(theta0: f64, dt: f64, tau_x: f64, tau_z: f64, n_steps: usize) -> Result<Self> {
        if tau_x != tau_z {
            return Err(Error::UnequalTau { tau_x, tau_z });
        }
        Ok(Self::new(theta0, dt, tau_x, n_steps))
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.tau > 0.0) {
            return Err(Error::InvalidParam {
                name: "dt/tau",
                reason: "must be positive".into(),
            });
        }
        let ratio = self.dt / self.tau;
        if ratio > crate::kernel::MAX_DT_OVER_TAU {
            return Err(Error::StepTooCoarse {
                ratio,
                max: crate::kernel::MAX_DT_OVER_TAU,
            });
        }
        Ok(())
    }
}

/// One emulator step: the pre-step angle, the noises, and the effective
/// readouts packaged as a trajectory-style sample.
#[derive(Debug, Clone, Copy)]
pub struct SpinStepSample {
    pub theta: f64,
    pub r_tilde: f64,
    pub s_tilde: f64,
    pub sample: StepSample,
}

/// Streaming consumer of emulator steps.
pub trait SpinSink {
    fn push_spin(&mut self, sample: &SpinStepSample);
}

/// Any trajectory sink consumes the embedded readout/state sample.
impl<T: StepSink> SpinSink for T {
    fn push_spin(&mut self, sample: &SpinStepSample) {
        self.push(&sample.sample);
    }
}

/// Effective readouts plus the stream provenance needed to audit them.
#[derive(Debug, Clone)]
pub struct EmulatedReadouts {
    pub record: ReadoutRecord,
    pub physical_stream: StreamKey,
    pub subjective_stream: StreamKey,
}

/// A stored emulator run: pre-step angles, both noises, and the effective
/// readouts.
#[derive(Debug, Clone)]
pub struct SpinRecord {
    pub dt: f64,
    pub tau: f64,
    pub seed: u64,
    pub trajectory_index: u64,
    /// Pre-step angle of every step.
    pub theta: Vec<f64>,
    pub final_theta: f64,
    pub r_tilde: Vec<f64>,
    pub s_tilde: Vec<f64>,
    pub readouts: EmulatedReadouts,
}

impl SpinRecord {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.theta.len()).map(move |k| k as f64 * self.dt)
    }
}

/// Runs the emulator, streaming each step into `sink`. Returns the final
/// angle.
pub fn run_emulator_with_sink<S: SpinSink>(
    cfg: &EmulatorConfig,
    seed: u64,
    trajectory_index: u64,
    sink: &mut S,
) -> Result<f64> {
    cfg.validate()?;
    let mut physical = NoiseStream::new(seed, StreamKey::new(trajectory_index, StreamRole::Physical));
    let mut subjective = cfg
        .with_readouts
        .then(|| NoiseStream::new(seed, StreamKey::new(trajectory_index, StreamRole::Subjective)));

    let sigma = (cfg.tau / cfg.dt).sqrt();
    let inv_sqrt_tau = 1.0 / cfg.tau.sqrt();
    let mut spin = SpinState::new(cfg.theta0);

    for step in 0..cfg.n_steps {
        let r_tilde = sigma * physical.next_standard_normal();
        let (x, z) = (spin.x(), spin.z());
        let (s_tilde, r_x, r_z) = match subjective.as_mut() {
            Some(s) => {
                let s_tilde = sigma * s.next_standard_normal();
                (
                    s_tilde,
                    x + (-z * r_tilde + x * s_tilde),
                    z + (x * r_tilde + z * s_tilde),
                )
            }
            None => (0.0, x, z),
        };
        sink.push_spin(&SpinStepSample {
            theta: spin.theta,
            r_tilde,
            s_tilde,
            sample: StepSample {
                step,
                state: spin.bloch(),
                r_x,
                r_z,
                // effective noises, in the variance-1/dt convention
                xi_x: (r_x - x) * inv_sqrt_tau,
                xi_z: (r_z - z) * inv_sqrt_tau,
            },
        });
        spin = step_spin(spin, r_tilde, cfg.dt, cfg.tau);
    }
    Ok(spin.theta)
}

struct SpinRecordingSink {
    theta: Vec<f64>,
    r_tilde: Vec<f64>,
    s_tilde: Vec<f64>,
    r_x: Vec<f64>,
    r_z: Vec<f64>,
}

impl SpinSink for SpinRecordingSink {
    fn push_spin(&mut self, s: &SpinStepSample) {
        self.theta.push(s.theta);
        self.r_tilde.push(s.r_tilde);
        self.s_tilde.push(s.s_tilde);
        self.r_x.push(s.sample.r_x);
        self.r_z.push(s.sample.r_z);
    }
}

/// Runs the emulator and stores the full record.
pub fn run_emulator(cfg: &EmulatorConfig, seed: u64, trajectory_index: u64) -> Result<SpinRecord> {
    let n = cfg.n_steps;
    let mut sink = SpinRecordingSink {
        theta: Vec::with_capacity(n),
        r_tilde: Vec::with_capacity(n),
        s_tilde: Vec::with_capacity(n),
        r_x: Vec::with_capacity(n),
        r_z: Vec::with_capacity(n),
    };
    let final_theta = run_emulator_with_sink(cfg, seed, trajectory_index, &mut sink)?;
    Ok(SpinRecord {
        dt: cfg.dt,
        tau: cfg.tau,
        seed,
        trajectory_index,
        theta: sink.theta,
        final_theta,
        r_tilde: sink.r_tilde,
        s_tilde: sink.s_tilde,
        readouts: EmulatedReadouts {
            record: ReadoutRecord {
                dt: cfg.dt,
                tau_x: cfg.tau,
                tau_z: cfg.tau,
                r_x: sink.r_x,
                r_z: sink.r_z,
            },
            physical_stream: StreamKey::new(trajectory_index, StreamRole::Physical),
            subjective_stream: StreamKey::new(trajectory_index, StreamRole::Subjective),
        },
    })
}

/// Builds effective readouts from given spin angles and noise series,
/// applying the mixing rotation exactly per step.
pub fn make_effective_readouts(
    theta: &[f64],
    r_tilde: &[f64],
    s_tilde: &[f64],
    dt: f64,
    tau: f64,
) -> Result<ReadoutRecord> {
    if theta.len() != r_tilde.len() || theta.len() != s_tilde.len() {
        return Err(Error::LengthMismatch {
            left: theta.len(),
            right: r_tilde.len().max(s_tilde.len()),
        });
    }
    let mut r_x = Vec::with_capacity(theta.len());
    let mut r_z = Vec::with_capacity(theta.len());
    for ((th, rt), st) in theta.iter().zip(r_tilde).zip(s_tilde) {
        let (x, z) = (th.cos(), th.sin());
        r_x.push(x + (-z * rt + x * st));
        r_z.push(z + (x * rt + z * st));
    }
    Ok(ReadoutRecord {
        dt,
        tau_x: tau,
        tau_z: tau,
        r_x,
        r_z,
    })
}

/// Largest per-step violation of the reconstruction identity
/// `(1 - x^2) r~_x - x z r~_z + z r~ = 0`, which holds algebraically on the
/// unit circle. Pure algebra; no integration involved.
pub fn reconstruction_identity_max(rec: &SpinRecord) -> f64 {
    let mut worst = 0.0f64;
    for ((th, rt), (rx, rz)) in rec
        .theta
        .iter()
        .zip(&rec.r_tilde)
        .zip(rec.readouts.record.r_x.iter().zip(&rec.readouts.record.r_z))
    {
        let (x, z) = (th.cos(), th.sin());
        let residual = (1.0 - x * x) * rx - x * z * rz + z * rt;
        worst = worst.max(residual.abs());
    }
    worst
}

/// Integrates the Bloch-coordinate master equation driven by the effective
/// readouts, exactly what a third party holding only the signals would do.
pub fn third_party_reconstruct(
    readouts: &ReadoutRecord,
    initial: BlochState,
) -> Result<Vec<BlochState>> {
    readouts.equal_tau()?;
    trajectory::replay(Scheme::Stratonovich, initial, readouts, Renorm::Auto)
}
