//! Trajectory propagators and the ensemble driver.
//!
//! Three schemes advance the monitored qubit:
//!
//! - `Kraus`: the exact discrete chain — sample r_x from the state, apply
//!   the X update, sample r_z from the intermediate state, apply the Z
//!   update. This is the reference scheme; it preserves purity and the
//!   Bloch ball exactly.
//! - `Stratonovich`: the Bloch-coordinate form of the time-symmetric master
//!   equation, integrated with a Heun (midpoint) rule applied per channel in
//!   the same x-then-z order in which the readouts are generated. The
//!   per-channel splitting matters: the two measurement flows do not
//!   commute, so a simultaneous two-channel rule cannot track one given
//!   readout realization at first order in dt.
//! - `Ito`: the forward-derivative form, with explicit Lindblad decay plus
//!   innovation terms. Integrated as Euler-Maruyama augmented with the
//!   per-channel Milstein second-order terms, again applied x-then-z.
//!
//! All schemes can also replay a prerecorded readout sequence, which is how
//! cross-scheme agreement is quantified and how a third party reconstructs
//! state evolution from signals alone.

use rayon::prelude::*;

use crate::bloch::{Axis, BlochState};
use crate::error::{Error, Result};
use crate::kernel::{self, MeasurementChannel, UpdateOrder};
use crate::noise::{NoiseStream, StreamKey, StreamRole};

/// Trajectory propagation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Kraus,
    Stratonovich,
    Ito,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Kraus => "kraus",
            Scheme::Stratonovich => "stratonovich",
            Scheme::Ito => "ito",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kraus" => Ok(Scheme::Kraus),
            "stratonovich" => Ok(Scheme::Stratonovich),
            "ito" => Ok(Scheme::Ito),
            other => Err(Error::InvalidParam {
                name: "scheme",
                reason: format!("unknown scheme `{other}`"),
            }),
        }
    }
}

/// Post-step renormalization policy for the SDE schemes.
///
/// `Auto` projects onto the unit sphere when the run started pure and only
/// clips back into the ball otherwise; `Off` leaves the raw update (used to
/// measure scheme drift). The Kraus chain never renormalizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Renorm {
    Auto,
    Off,
}

/// Configuration of a single-trajectory run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub initial: BlochState,
    pub scheme: Scheme,
    pub dt: f64,
    pub tau_x: f64,
    pub tau_z: f64,
    pub n_steps: usize,
    pub renorm: Renorm,
    /// Record the per-step innovation noises alongside the readouts.
    pub keep_noise: bool,
    /// Keep every `record_stride`-th state sample (readouts are always kept
    /// at full resolution).
    pub record_stride: usize,
}

impl SimConfig {
    pub fn new(initial: BlochState, scheme: Scheme, dt: f64, tau: f64, n_steps: usize) -> Self {
        Self {
            initial,
            scheme,
            dt,
            tau_x: tau,
            tau_z: tau,
            n_steps,
            renorm: Renorm::Auto,
            keep_noise: false,
            record_stride: 1,
        }
    }

    pub fn channels(&self) -> Result<(MeasurementChannel, MeasurementChannel)> {
        Ok((
            MeasurementChannel::new(Axis::X, self.tau_x, self.dt)?,
            MeasurementChannel::new(Axis::Z, self.tau_z, self.dt)?,
        ))
    }
}

/// Raw readout time series of both channels.
#[derive(Debug, Clone)]
pub struct ReadoutRecord {
    pub dt: f64,
    pub tau_x: f64,
    pub tau_z: f64,
    pub r_x: Vec<f64>,
    pub r_z: Vec<f64>,
}

impl ReadoutRecord {
    pub fn len(&self) -> usize {
        self.r_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_x.is_empty()
    }

    /// Sample timestamps: readout k is generated over [k dt, (k+1) dt).
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |k| k as f64 * self.dt)
    }

    pub fn equal_tau(&self) -> Result<f64> {
        if self.tau_x == self.tau_z {
            Ok(self.tau_x)
        } else {
            Err(Error::UnequalTau {
                tau_x: self.tau_x,
                tau_z: self.tau_z,
            })
        }
    }
}

/// Per-step innovation noises xi = (r - a) / sqrt(tau), stored with
/// variance 1/dt scaling (the discretized white-noise convention).
#[derive(Debug, Clone)]
pub struct NoiseProvenance {
    pub xi_x: Vec<f64>,
    pub xi_z: Vec<f64>,
}

/// One propagated trajectory: stride-decimated states plus the
/// full-resolution readouts that produced them.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub scheme: Scheme,
    pub seed: u64,
    pub trajectory_index: u64,
    pub dt: f64,
    pub record_stride: usize,
    /// states[j] is the state at the start of step j*stride; states[0] is
    /// the initial state.
    pub states: Vec<BlochState>,
    pub final_state: BlochState,
    pub readouts: ReadoutRecord,
    pub noise: Option<NoiseProvenance>,
    /// Largest single-step renormalization correction |norm - 1| applied.
    pub max_renorm_correction: f64,
}

impl TrajectoryRecord {
    pub fn state_times(&self) -> impl Iterator<Item = f64> + '_ {
        let step = self.dt * self.record_stride as f64;
        (0..self.states.len()).map(move |j| j as f64 * step)
    }

    pub fn noise(&self) -> Result<&NoiseProvenance> {
        self.noise.as_ref().ok_or(Error::MissingProvenance)
    }
}

/// Everything one integration step produces.
#[derive(Debug, Clone, Copy)]
pub struct StepSample {
    pub step: usize,
    /// State at the start of the step (the state the readouts were drawn
    /// from).
    pub state: BlochState,
    pub r_x: f64,
    pub r_z: f64,
    /// Innovation noises with the variance-1/dt white-noise scaling.
    pub xi_x: f64,
    pub xi_z: f64,
}

/// Streaming consumer of step samples; lets analysis run over long
/// trajectories without storing them.
pub trait StepSink {
    fn push(&mut self, sample: &StepSample);
}

impl<A: StepSink, B: StepSink> StepSink for (A, B) {
    fn push(&mut self, sample: &StepSample) {
        self.0.push(sample);
        self.1.push(sample);
    }
}

/// Counts states that leave the Bloch ball (should stay zero).
#[derive(Debug, Default, Clone)]
pub struct BallCheckSink {
    pub violations: u64,
    pub max_norm_sq: f64,
}

impl StepSink for BallCheckSink {
    fn push(&mut self, sample: &StepSample) {
        let n = sample.state.norm_sq();
        if n > self.max_norm_sq {
            self.max_norm_sq = n;
        }
        if !sample.state.in_ball() {
            self.violations += 1;
        }
    }
}

/// Sink that discards samples.
pub struct NullSink;

impl StepSink for NullSink {
    fn push(&mut self, _: &StepSample) {}
}

struct RecordingSink {
    stride: usize,
    keep_noise: bool,
    states: Vec<BlochState>,
    r_x: Vec<f64>,
    r_z: Vec<f64>,
    xi_x: Vec<f64>,
    xi_z: Vec<f64>,
}

impl RecordingSink {
    fn new(cfg: &SimConfig) -> Self {
        let n = cfg.n_steps;
        let stride = cfg.record_stride.max(1);
        Self {
            stride,
            keep_noise: cfg.keep_noise,
            states: Vec::with_capacity(n / stride + 2),
            r_x: Vec::with_capacity(n),
            r_z: Vec::with_capacity(n),
            xi_x: Vec::with_capacity(if cfg.keep_noise { n } else { 0 }),
            xi_z: Vec::with_capacity(if cfg.keep_noise { n } else { 0 }),
        }
    }
}

impl StepSink for RecordingSink {
    fn push(&mut self, sample: &StepSample) {
        if sample.step % self.stride == 0 {
            self.states.push(sample.state);
        }
        self.r_x.push(sample.r_x);
        self.r_z.push(sample.r_z);
        if self.keep_noise {
            self.xi_x.push(sample.xi_x);
            self.xi_z.push(sample.xi_z);
        }
    }
}

fn renormalize(state: BlochState, project_to_sphere: bool, max_correction: &mut f64) -> BlochState {
    let norm_sq = state.norm_sq();
    if norm_sq == 0.0 {
        return state;
    }
    let norm = norm_sq.sqrt();
    if project_to_sphere || norm > 1.0 {
        let c = (norm - 1.0).abs();
        if c > *max_correction {
            *max_correction = c;
        }
        BlochState::new_unchecked(state.x / norm, state.y / norm, state.z / norm)
    } else {
        state
    }
}

/// Measurement flow field of one channel: d(state)/dw for kick w = r dt/tau.
#[inline]
fn flow(state: &BlochState, axis: Axis) -> [f64; 3] {
    let (x, y, z) = (state.x, state.y, state.z);
    match axis {
        Axis::X => [1.0 - x * x, -x * y, -x * z],
        Axis::Z => [-x * z, -y * z, 1.0 - z * z],
    }
}

#[inline]
fn add(state: &BlochState, v: [f64; 3], scale: f64) -> BlochState {
    BlochState::new_unchecked(
        state.x + scale * v[0],
        state.y + scale * v[1],
        state.z + scale * v[2],
    )
}

/// One Heun (predictor-corrector) substep of a single channel flow with the
/// readout held constant: integrates d(state)/dw = flow over the kick w.
#[inline]
fn heun_substep(state: &BlochState, axis: Axis, w: f64) -> BlochState {
    let g0 = flow(state, axis);
    let predictor = add(state, g0, w);
    let g1 = flow(&predictor, axis);
    BlochState::new_unchecked(
        state.x + 0.5 * w * (g0[0] + g1[0]),
        state.y + 0.5 * w * (g0[1] + g1[1]),
        state.z + 0.5 * w * (g0[2] + g1[2]),
    )
}

/// Stratonovich step: Heun substeps in the x-then-z measurement order.
#[inline]
pub fn stratonovich_step(state: &BlochState, r_x: f64, r_z: f64, dt: f64, tau_x: f64, tau_z: f64) -> BlochState {
    let mid = heun_substep(state, Axis::X, r_x * dt / tau_x);
    heun_substep(&mid, Axis::Z, r_z * dt / tau_z)
}

/// Directional derivative of the channel flow along itself, used in the
/// Milstein second-order term.
#[inline]
fn flow_self_derivative(state: &BlochState, axis: Axis) -> [f64; 3] {
    let (x, y, z) = (state.x, state.y, state.z);
    match axis {
        Axis::X => [
            -2.0 * x * (1.0 - x * x),
            y * (2.0 * x * x - 1.0),
            z * (2.0 * x * x - 1.0),
        ],
        Axis::Z => [
            x * (2.0 * z * z - 1.0),
            y * (2.0 * z * z - 1.0),
            -2.0 * z * (1.0 - z * z),
        ],
    }
}

#[inline]
fn ito_substep(state: &BlochState, axis: Axis, r: f64, dt: f64, tau: f64) -> BlochState {
    let (x, y, z) = (state.x, state.y, state.z);
    // Innovation v = (r - a) dt / tau = xi dt / sqrt(tau).
    let a = match axis {
        Axis::X => x,
        Axis::Z => z,
    };
    let v = (r - a) * dt / tau;
    // This channel's share of the Lindblad dissipator: measuring along one
    // axis damps the two orthogonal components at rate 1/(2 tau).
    let decay = dt / (2.0 * tau);
    let drift = match axis {
        Axis::X => [0.0, -y * decay, -z * decay],
        Axis::Z => [-x * decay, -y * decay, 0.0],
    };
    let k = flow(state, axis);
    let kk = flow_self_derivative(state, axis);
    let second = 0.5 * (v * v - dt / tau);
    BlochState::new_unchecked(
        state.x + drift[0] + k[0] * v + kk[0] * second,
        state.y + drift[1] + k[1] * v + kk[1] * second,
        state.z + drift[2] + k[2] * v + kk[2] * second,
    )
}

/// Ito step: Euler-Maruyama with per-channel Milstein corrections, applied
/// in the x-then-z measurement order.
#[inline]
pub fn ito_step(state: &BlochState, r_x: f64, r_z: f64, dt: f64, tau_x: f64, tau_z: f64) -> BlochState {
    let mid = ito_substep(state, Axis::X, r_x, dt, tau_x);
    ito_substep(&mid, Axis::Z, r_z, dt, tau_z)
}

/// Runs one trajectory, streaming every step into `sink`. Returns the final
/// state and the largest renormalization correction applied.
pub fn run_with_sink<S: StepSink>(
    cfg: &SimConfig,
    seed: u64,
    trajectory_index: u64,
    sink: &mut S,
) -> Result<(BlochState, f64)> {
    let (ch_x, ch_z) = cfg.channels()?;
    if !cfg.initial.in_ball() {
        return Err(Error::OutsideBall {
            norm_sq: cfg.initial.norm_sq(),
        });
    }
    let mut stream_x = NoiseStream::new(seed, StreamKey::new(trajectory_index, StreamRole::ReadoutX));
    let mut stream_z = NoiseStream::new(seed, StreamKey::new(trajectory_index, StreamRole::ReadoutZ));

    let project = cfg.renorm == Renorm::Auto && cfg.initial.is_pure();
    let sqrt_tau_x = cfg.tau_x.sqrt();
    let sqrt_tau_z = cfg.tau_z.sqrt();
    let mut max_correction = 0.0f64;
    let mut state = cfg.initial;

    for step in 0..cfg.n_steps {
        let pre = state;
        let (next, r_x, r_z, xi_x, xi_z) = match cfg.scheme {
            Scheme::Kraus => {
                let r_x = kernel::sample_readout(&state, &ch_x, &mut stream_x)?;
                let mid = kernel::kraus_update(&state, r_x, &ch_x)?;
                let r_z = kernel::sample_readout(&mid, &ch_z, &mut stream_z)?;
                let post = kernel::kraus_update(&mid, r_z, &ch_z)?;
                let xi_x = (r_x - pre.x) / sqrt_tau_x;
                let xi_z = (r_z - mid.z) / sqrt_tau_z;
                (post, r_x, r_z, xi_x, xi_z)
            }
            Scheme::Stratonovich => {
                let xi_x = stream_x.next_increment(cfg.dt)?.value;
                let xi_z = stream_z.next_increment(cfg.dt)?.value;
                let r_x = pre.x + sqrt_tau_x * xi_x;
                let r_z = pre.z + sqrt_tau_z * xi_z;
                let raw = stratonovich_step(&pre, r_x, r_z, cfg.dt, cfg.tau_x, cfg.tau_z);
                let post = if cfg.renorm == Renorm::Auto {
                    renormalize(raw, project, &mut max_correction)
                } else {
                    raw
                };
                (post, r_x, r_z, xi_x, xi_z)
            }
            Scheme::Ito => {
                let xi_x = stream_x.next_increment(cfg.dt)?.value;
                let xi_z = stream_z.next_increment(cfg.dt)?.value;
                let r_x = pre.x + sqrt_tau_x * xi_x;
                let r_z = pre.z + sqrt_tau_z * xi_z;
                let raw = ito_step(&pre, r_x, r_z, cfg.dt, cfg.tau_x, cfg.tau_z);
                let post = if cfg.renorm == Renorm::Auto {
                    renormalize(raw, project, &mut max_correction)
                } else {
                    raw
                };
                (post, r_x, r_z, xi_x, xi_z)
            }
        };
        sink.push(&StepSample {
            step,
            state: pre,
            r_x,
            r_z,
            xi_x,
            xi_z,
        });
        state = next;
    }
    Ok((state, max_correction))
}

/// Runs one trajectory and stores it.
pub fn run(cfg: &SimConfig, seed: u64, trajectory_index: u64) -> Result<TrajectoryRecord> {
    let mut sink = RecordingSink::new(cfg);
    let (final_state, max_renorm_correction) = run_with_sink(cfg, seed, trajectory_index, &mut sink)?;
    Ok(TrajectoryRecord {
        scheme: cfg.scheme,
        seed,
        trajectory_index,
        dt: cfg.dt,
        record_stride: sink.stride,
        states: sink.states,
        final_state,
        readouts: ReadoutRecord {
            dt: cfg.dt,
            tau_x: cfg.tau_x,
            tau_z: cfg.tau_z,
            r_x: sink.r_x,
            r_z: sink.r_z,
        },
        noise: cfg.keep_noise.then_some(NoiseProvenance {
            xi_x: sink.xi_x,
            xi_z: sink.xi_z,
        }),
        max_renorm_correction,
    })
}

/// Runs `n_traj` statistically independent trajectories in parallel.
/// Results are collected in trajectory order, so the output is identical
/// for serial and parallel execution.
pub fn run_ensemble(cfg: &SimConfig, seed: u64, n_traj: usize) -> Result<Vec<TrajectoryRecord>> {
    if n_traj == 0 {
        return Err(Error::InvalidParam {
            name: "n_traj",
            reason: "must be at least 1".into(),
        });
    }
    (0..n_traj as u64)
        .into_par_iter()
        .map(|idx| run(cfg, seed, idx))
        .collect()
}

/// Runs an ensemble where each trajectory streams into its own sink; the
/// sinks are returned in trajectory order for deterministic merging.
pub fn run_ensemble_with_sinks<S, F>(
    cfg: &SimConfig,
    seed: u64,
    n_traj: usize,
    make_sink: F,
) -> Result<Vec<S>>
where
    S: StepSink + Send,
    F: Fn(u64) -> S + Sync,
{
    (0..n_traj as u64)
        .into_par_iter()
        .map(|idx| {
            let mut sink = make_sink(idx);
            run_with_sink(cfg, seed, idx, &mut sink)?;
            Ok(sink)
        })
        .collect()
}

/// Replays a recorded readout sequence through the given scheme.
/// Returns the state at the start of every step plus the final state, i.e.
/// `n_steps + 1` entries starting from `initial`.
pub fn replay(
    scheme: Scheme,
    initial: BlochState,
    readouts: &ReadoutRecord,
    renorm: Renorm,
) -> Result<Vec<BlochState>> {
    let dt = readouts.dt;
    let (ch_x, ch_z) = (
        MeasurementChannel::new(Axis::X, readouts.tau_x, dt)?,
        MeasurementChannel::new(Axis::Z, readouts.tau_z, dt)?,
    );
    let project = renorm == Renorm::Auto && initial.is_pure();
    let mut max_correction = 0.0;
    let mut states = Vec::with_capacity(readouts.len() + 1);
    let mut state = initial;
    states.push(state);
    for k in 0..readouts.len() {
        let (r_x, r_z) = (readouts.r_x[k], readouts.r_z[k]);
        state = match scheme {
            Scheme::Kraus => {
                kernel::apply_joint(&state, r_x, r_z, &ch_x, &ch_z, UpdateOrder::XThenZ)?
            }
            Scheme::Stratonovich => {
                let raw = stratonovich_step(&state, r_x, r_z, dt, readouts.tau_x, readouts.tau_z);
                if renorm == Renorm::Auto {
                    renormalize(raw, project, &mut max_correction)
                } else {
                    raw
                }
            }
            Scheme::Ito => {
                let raw = ito_step(&state, r_x, r_z, dt, readouts.tau_x, readouts.tau_z);
                if renorm == Renorm::Auto {
                    renormalize(raw, project, &mut max_correction)
                } else {
                    raw
                }
            }
        };
        states.push(state);
    }
    Ok(states)
}

/// Largest pointwise Bloch distance between two state paths.
pub fn sup_distance(a: &[BlochState], b: &[BlochState]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(s, t)| s.distance(t))
        .fold(0.0, f64::max)
}

/// Mean of one Bloch component across an ensemble, per recorded time.
pub fn ensemble_mean(records: &[TrajectoryRecord], pick: impl Fn(&BlochState) -> f64) -> Vec<f64> {
    if records.is_empty() {
        return Vec::new();
    }
    let n_times = records.iter().map(|r| r.states.len()).min().unwrap_or(0);
    let mut means = vec![0.0; n_times];
    for rec in records {
        for (m, s) in means.iter_mut().zip(&rec.states) {
            *m += pick(s);
        }
    }
    for m in &mut means {
        *m /= records.len() as f64;
    }
    means
}
