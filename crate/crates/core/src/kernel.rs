//! Discrete Gaussian measurement primitive: readout sampling from the
//! two-Gaussian mixture, closed-form Kraus state update, and the sequential
//! two-observable step.
//!
//! For one channel with observable A in {sigma_x, sigma_z} and kick
//! w = r dt / tau, the conditional update of the Bloch vector has the exact
//! closed form (written for A = sigma_z)
//!
//! ```text
//! z' = (z cosh w + sinh w) / (cosh w + z sinh w)
//! x' = x / (cosh w + z sinh w)
//! y' = y / (cosh w + z sinh w)
//! ```
//!
//! which is algebraically identical to conjugating the density matrix by the
//! Gaussian Kraus operator and renormalizing. The matrix route is kept in
//! [`kraus_update_density`] as an independent oracle for tests; the
//! hyperbolic form is what runs in the hot loop.

use num_complex::Complex64;

use crate::bloch::{bloch_to_density, density_to_bloch, Axis, BlochState, DensityMatrix};
use crate::error::{Error, Result};
use crate::noise::NoiseStream;

/// Hard validity gate on dt/tau.
pub const MAX_DT_OVER_TAU: f64 = 0.1;
/// Above this ratio a warning is logged; the first-order update degrades.
pub const WARN_DT_OVER_TAU: f64 = 0.02;

/// One weak-measurement channel: observable axis, characteristic measurement
/// time tau, and integration step dt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementChannel {
    pub axis: Axis,
    pub tau: f64,
    pub dt: f64,
}

impl MeasurementChannel {
    pub fn new(axis: Axis, tau: f64, dt: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParam {
                name: "tau",
                reason: format!("must be positive and finite, got {tau}"),
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParam {
                name: "dt",
                reason: format!("must be positive and finite, got {dt}"),
            });
        }
        let ratio = dt / tau;
        if ratio > MAX_DT_OVER_TAU {
            return Err(Error::StepTooCoarse {
                ratio,
                max: MAX_DT_OVER_TAU,
            });
        }
        if ratio > WARN_DT_OVER_TAU {
            log::warn!(
                "dt/tau = {ratio} exceeds {WARN_DT_OVER_TAU}; sequencing error grows as (dt/tau)^2"
            );
        }
        Ok(Self { axis, tau, dt })
    }

    /// Standard deviation of the per-step readout around an eigenvalue.
    pub fn readout_sigma(&self) -> f64 {
        (self.tau / self.dt).sqrt()
    }
}

/// Order in which the two single-channel updates are applied within a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOrder {
    XThenZ,
    ZThenX,
}

/// Samples a readout from the exact mixture P(r|rho) = Tr[rho E(r)]:
/// with probability (1 + a)/2 from N(+1, tau/dt), else from N(-1, tau/dt),
/// where a is the Bloch component along the channel axis.
pub fn sample_readout(
    state: &BlochState,
    ch: &MeasurementChannel,
    stream: &mut NoiseStream,
) -> Result<f64> {
    if !state.in_ball() {
        return Err(Error::OutsideBall {
            norm_sq: state.norm_sq(),
        });
    }
    let a = state.component(ch.axis);
    let eigenvalue = if stream.next_uniform() < 0.5 * (1.0 + a) {
        1.0
    } else {
        -1.0
    };
    Ok(eigenvalue + ch.readout_sigma() * stream.next_standard_normal())
}

/// Conditional state update for readout `r` on the given channel.
pub fn kraus_update(state: &BlochState, r: f64, ch: &MeasurementChannel) -> Result<BlochState> {
    if !r.is_finite() {
        return Err(Error::NonFinite { context: "readout" });
    }
    let w = r * ch.dt / ch.tau;
    let cosh = w.cosh();
    let sinh = w.sinh();
    let (x, y, z) = (state.x, state.y, state.z);
    let s = match ch.axis {
        Axis::Z => {
            let norm = cosh + z * sinh;
            BlochState::new_unchecked(x / norm, y / norm, (z * cosh + sinh) / norm)
        }
        Axis::X => {
            let norm = cosh + x * sinh;
            BlochState::new_unchecked((x * cosh + sinh) / norm, y / norm, z / norm)
        }
    };
    Ok(s)
}

/// Generic density-matrix route for the same update:
/// rho -> M(r) rho M(r)^dagger / Tr[rho E(r)]. Test oracle for
/// [`kraus_update`]; not used in the hot loop.
pub fn kraus_update_density(
    state: &BlochState,
    r: f64,
    ch: &MeasurementChannel,
) -> Result<BlochState> {
    let rho = bloch_to_density(state)?;
    // In the channel eigenbasis M(r) = diag(m+, m-) with
    // m_pm = exp[-dt (r -+ 1)^2 / (4 tau)]; the common normalization factor
    // cancels in the renormalized update.
    let q = ch.dt / (4.0 * ch.tau);
    let m_plus = (-q * (r - 1.0) * (r - 1.0)).exp();
    let m_minus = (-q * (r + 1.0) * (r + 1.0)).exp();

    // Hadamard maps the sigma_x eigenbasis onto the sigma_z one.
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let basis: Option<[[Complex64; 2]; 2]> = match ch.axis {
        Axis::Z => None,
        Axis::X => Some([
            [Complex64::new(h, 0.0), Complex64::new(h, 0.0)],
            [Complex64::new(h, 0.0), Complex64::new(-h, 0.0)],
        ]),
    };

    let mul = |a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]| {
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        out
    };

    let mut m = [
        [Complex64::new(m_plus, 0.0), Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), Complex64::new(m_minus, 0.0)],
    ];
    if let Some(u) = basis {
        // U diag U^dagger with U = U^dagger = H
        m = mul(&u, &mul(&m, &u));
    }

    let m_rho = mul(&m, &rho.elems);
    let updated = mul(&m_rho, &m); // M is Hermitian here
    let trace = (updated[0][0] + updated[1][1]).re;
    let normalized = [
        [updated[0][0] / trace, updated[0][1] / trace],
        [updated[1][0] / trace, updated[1][1] / trace],
    ];
    density_to_bloch(&DensityMatrix::new(normalized))
}

/// One joint step of both channels: samples r_x from the input state,
/// applies the X update, samples r_z from the intermediate state, applies
/// the Z update. Returns the posterior and both readouts.
pub fn joint_step(
    state: &BlochState,
    ch_x: &MeasurementChannel,
    ch_z: &MeasurementChannel,
    stream_x: &mut NoiseStream,
    stream_z: &mut NoiseStream,
) -> Result<(BlochState, f64, f64)> {
    if ch_x.dt != ch_z.dt {
        return Err(Error::MismatchedStep {
            left: ch_x.dt,
            right: ch_z.dt,
        });
    }
    let r_x = sample_readout(state, ch_x, stream_x)?;
    let mid = kraus_update(state, r_x, ch_x)?;
    let r_z = sample_readout(&mid, ch_z, stream_z)?;
    let post = kraus_update(&mid, r_z, ch_z)?;
    Ok((post, r_x, r_z))
}

/// Applies both single-channel updates with given readouts, in the given
/// order. Used for replaying recorded readouts and for quantifying the
/// sequencing error.
pub fn apply_joint(
    state: &BlochState,
    r_x: f64,
    r_z: f64,
    ch_x: &MeasurementChannel,
    ch_z: &MeasurementChannel,
    order: UpdateOrder,
) -> Result<BlochState> {
    match order {
        UpdateOrder::XThenZ => kraus_update(&kraus_update(state, r_x, ch_x)?, r_z, ch_z),
        UpdateOrder::ZThenX => kraus_update(&kraus_update(state, r_z, ch_z)?, r_x, ch_x),
    }
}

/// Quadrature grid for the normalization check, spanning [lo, hi] with n
/// uniform intervals.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl QuadratureGrid {
    /// Grid centered on the eigenvalue pair, spanning `span_sigmas` readout
    /// standard deviations beyond each eigenvalue.
    pub fn spanning(ch: &MeasurementChannel, span_sigmas: f64, n: usize) -> Self {
        let sigma = ch.readout_sigma();
        Self {
            lo: -1.0 - span_sigmas * sigma,
            hi: 1.0 + span_sigmas * sigma,
            n,
        }
    }
}

/// Checks the POVM normalization `int E(r) dr = 1` by integrating the
/// per-eigenstate readout distribution over the grid. Returns the maximum
/// deviation from 1 over both eigenvalues.
///
/// The grid must span at least 12 readout standard deviations in total
/// (measured symmetrically around each eigenvalue), unless it is being used
/// deliberately truncated; narrower grids are rejected.
pub fn povm_normalization_check(ch: &MeasurementChannel, grid: &QuadratureGrid) -> Result<f64> {
    let sigma = ch.readout_sigma();
    let span = (grid.hi - grid.lo) / sigma;
    if span < 12.0 {
        return Err(Error::GridTooNarrow {
            span_sigmas: span,
            min_sigmas: 12.0,
        });
    }
    Ok(povm_mass_deviation(ch, grid))
}

/// The normalization deviation itself, without the span gate. Exposed so the
/// truncated-grid tail mass can be examined directly.
pub fn povm_mass_deviation(ch: &MeasurementChannel, grid: &QuadratureGrid) -> f64 {
    let plus = (readout_mass(ch, grid, 1.0) - 1.0).abs();
    let minus = (readout_mass(ch, grid, -1.0) - 1.0).abs();
    plus.max(minus)
}

/// Integral of the readout distribution P(r|a) over the grid via composite
/// Simpson quadrature; equals 1 for a grid covering the full line.
pub fn readout_mass(ch: &MeasurementChannel, grid: &QuadratureGrid, eigenvalue: f64) -> f64 {
    let sigma = ch.readout_sigma();
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let p = |r: f64| {
        norm * (-(r - eigenvalue) * (r - eigenvalue) / (2.0 * sigma * sigma)).exp()
    };
    let n = grid.n + grid.n % 2;
    let h = (grid.hi - grid.lo) / n as f64;
    let mut total = p(grid.lo) + p(grid.hi);
    for k in 1..n {
        let r = grid.lo + k as f64 * h;
        total += p(r) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    total * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{StreamKey, StreamRole};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ch(axis: Axis, dt_over_tau: f64) -> MeasurementChannel {
        MeasurementChannel::new(axis, 1.0, dt_over_tau).unwrap()
    }

    fn stream(seed: u64, role: StreamRole) -> NoiseStream {
        NoiseStream::new(seed, StreamKey::new(0, role))
    }

    #[test]
    fn channel_rejects_coarse_step() {
        assert!(matches!(
            MeasurementChannel::new(Axis::Z, 1.0, 0.2),
            Err(Error::StepTooCoarse { .. })
        ));
        assert!(MeasurementChannel::new(Axis::Z, 1.0, 0.1).is_ok());
    }

    #[test]
    fn readout_mean_on_z_eigenstate() {
        let ch = ch(Axis::Z, 0.01);
        let state = BlochState::new(0.0, 0.0, 1.0).unwrap();
        let mut s = stream(11, StreamRole::ReadoutZ);
        let n = 100_000usize;
        let mean = (0..n)
            .map(|_| sample_readout(&state, &ch, &mut s).unwrap())
            .sum::<f64>()
            / n as f64;
        // var = tau/dt = 100, stderr = 10/sqrt(n)
        assert!((mean - 1.0).abs() < 3.0 * 10.0 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn readout_mean_zero_on_maximally_mixed() {
        let ch = ch(Axis::Z, 0.01);
        let state = BlochState::new(0.0, 0.0, 0.0).unwrap();
        let mut s = stream(13, StreamRole::ReadoutZ);
        let n = 100_000usize;
        let mean = (0..n)
            .map(|_| sample_readout(&state, &ch, &mut s).unwrap())
            .sum::<f64>()
            / n as f64;
        // mixture variance tau/dt + 1 = 101
        assert!(mean.abs() < 3.0 * (101.0f64 / n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn readout_mixture_variance() {
        let ch = ch(Axis::Z, 0.01);
        let state = BlochState::new(0.0, 0.0, 0.5).unwrap();
        let mut s = stream(17, StreamRole::ReadoutZ);
        let n = 1_000_000usize;
        let samples: Vec<f64> = (0..n)
            .map(|_| sample_readout(&state, &ch, &mut s).unwrap())
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 0.5).abs() < 3.0 * (100.75f64 / n as f64).sqrt());
        // variance of the sample variance ~ 2 var^2 / n
        let var_tol = 3.0 * (2.0f64 / n as f64).sqrt() * 100.75;
        assert!((var - 100.75).abs() < var_tol, "var {var}");
    }

    #[test]
    fn eigenstate_is_fixed_point_for_any_readout() {
        let chz = ch(Axis::Z, 0.01);
        let up = BlochState::new(0.0, 0.0, 1.0).unwrap();
        for r in [-37.0, -1.0, 0.0, 0.5, 88.0] {
            let s = kraus_update(&up, r, &chz).unwrap();
            assert_abs_diff_eq!(s.z, 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(s.x, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn mixed_state_update_is_tanh() {
        let chz = ch(Axis::Z, 0.01);
        let origin = BlochState::new(0.0, 0.0, 0.0).unwrap();
        let s = kraus_update(&origin, 1.0, &chz).unwrap();
        assert_abs_diff_eq!(s.z, 0.01f64.tanh(), epsilon = 1e-15);
    }

    #[test]
    fn closed_form_matches_density_matrix_oracle() {
        let states = [
            BlochState::new(0.3, 0.1, -0.5).unwrap(),
            BlochState::new(0.0, 0.0, 0.0).unwrap(),
            BlochState::new(0.6, 0.0, 0.8).unwrap(),
            BlochState::new(-0.2, 0.4, 0.1).unwrap(),
        ];
        for axis in [Axis::X, Axis::Z] {
            let c = ch(axis, 0.05);
            for state in &states {
                for r in [-15.0, -0.7, 0.0, 2.3, 11.0] {
                    let fast = kraus_update(state, r, &c).unwrap();
                    let oracle = kraus_update_density(state, r, &c).unwrap();
                    assert!(
                        fast.distance(&oracle) < 1e-12,
                        "axis {:?} r {r}: {:?} vs {:?}",
                        axis,
                        fast,
                        oracle
                    );
                }
            }
        }
    }

    #[test]
    fn update_rejects_non_finite_readout() {
        let chz = ch(Axis::Z, 0.01);
        let s = BlochState::new(0.0, 0.0, 0.0).unwrap();
        assert!(kraus_update(&s, f64::NAN, &chz).is_err());
    }

    #[test]
    fn bayes_posterior_odds() {
        // Diagonal of rho follows classical Bayes rule with likelihood ratio
        // exp(2 r dt / tau).
        let chz = ch(Axis::Z, 0.02);
        for z in [-0.8, -0.2, 0.0, 0.4, 0.9] {
            for r in [-6.0, -1.0, 0.3, 4.0] {
                let s = BlochState::new(0.0, 0.0, z).unwrap();
                let post = kraus_update(&s, r, &chz).unwrap();
                let prior_odds = (1.0 + z) / (1.0 - z);
                let posterior_odds = (1.0 + post.z) / (1.0 - post.z);
                let lr = (2.0 * r * chz.dt / chz.tau).exp();
                assert_abs_diff_eq!(posterior_odds, prior_odds * lr, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn joint_step_keeps_plane_and_purity() {
        let chx = ch(Axis::X, 0.01);
        let chz = ch(Axis::Z, 0.01);
        let mut sx = stream(3, StreamRole::ReadoutX);
        let mut sz = stream(3, StreamRole::ReadoutZ);

        // y = 0 stays exactly zero
        let mut state = BlochState::new(0.0, 0.0, 0.0).unwrap();
        for _ in 0..100 {
            let (next, _, _) = joint_step(&state, &chx, &chz, &mut sx, &mut sz).unwrap();
            assert_eq!(next.y, 0.0);
            state = next;
        }

        // pure stays pure over 10^4 steps
        let mut state = BlochState::new(0.0, 0.0, 1.0).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let (next, _, _) = joint_step(&state, &chx, &chz, &mut sx, &mut sz).unwrap();
            worst = worst.max(next.purity_defect());
            state = next;
        }
        assert!(worst < 1e-9, "purity defect {worst}");
    }

    #[test]
    fn sequencing_error_is_second_order_in_dt() {
        let state = BlochState::new(0.3, 0.1, 0.5).unwrap();
        let (r_x, r_z) = (1.3, -0.7);
        let dts = [0.02, 0.01, 0.005, 0.0025];
        let errs: Vec<f64> = dts
            .iter()
            .map(|&dt| {
                let chx = ch(Axis::X, dt);
                let chz = ch(Axis::Z, dt);
                let xz = apply_joint(&state, r_x, r_z, &chx, &chz, UpdateOrder::XThenZ).unwrap();
                let zx = apply_joint(&state, r_x, r_z, &chx, &chz, UpdateOrder::ZThenX).unwrap();
                xz.distance(&zx)
            })
            .collect();
        let slope = log_log_slope(&dts, &errs);
        assert!((slope - 2.0).abs() < 0.2, "slope {slope}, errs {errs:?}");
    }

    fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
        cov / var
    }

    #[test]
    fn povm_normalization_examples() {
        for dt in [0.01, 0.1] {
            let c = ch(Axis::Z, dt);
            let grid = QuadratureGrid::spanning(&c, 8.0, 40_000);
            let dev = povm_normalization_check(&c, &grid).unwrap();
            assert!(dev < 1e-10, "dt {dt}: deviation {dev}");
        }
    }

    #[test]
    fn truncated_grid_rejected_then_measured() {
        let c = ch(Axis::Z, 0.01);
        let sigma = c.readout_sigma();
        let grid = QuadratureGrid {
            lo: -1.0 - 2.0 * sigma,
            hi: 1.0 + 2.0 * sigma,
            n: 20_000,
        };
        assert!(matches!(
            povm_normalization_check(&c, &grid),
            Err(Error::GridTooNarrow { .. })
        ));
        // A grid clipped at +-2 sigma around one eigenvalue misses exactly
        // the two-sided Gaussian tail mass erfc(2/sqrt(2)) = 0.0455...
        let centered = QuadratureGrid {
            lo: 1.0 - 2.0 * sigma,
            hi: 1.0 + 2.0 * sigma,
            n: 20_000,
        };
        let mass = readout_mass(&c, &centered, 1.0);
        let expected = statrs::function::erf::erfc(2.0 / std::f64::consts::SQRT_2);
        assert!(
            ((1.0 - mass) - expected).abs() < 1e-6,
            "missing mass {} vs {expected}",
            1.0 - mass
        );
    }

    proptest! {
        #[test]
        fn purity_preserved_single_update(
            theta in 0.0f64..std::f64::consts::TAU,
            r in -30.0f64..30.0,
            dt in 0.001f64..0.1,
        ) {
            let state = BlochState::new(theta.cos(), 0.0, theta.sin()).unwrap();
            for axis in [Axis::X, Axis::Z] {
                let c = MeasurementChannel::new(axis, 1.0, dt).unwrap();
                let post = kraus_update(&state, r, &c).unwrap();
                prop_assert!(post.purity_defect() <= 1e-12);
            }
        }

        #[test]
        fn update_stays_in_ball(
            x in -1.0f64..1.0,
            y in -1.0f64..1.0,
            z in -1.0f64..1.0,
            r in -30.0f64..30.0,
        ) {
            prop_assume!(x * x + y * y + z * z <= 1.0);
            let state = BlochState::new(x, y, z).unwrap();
            let c = MeasurementChannel::new(Axis::Z, 1.0, 0.01).unwrap();
            let post = kraus_update(&state, r, &c).unwrap();
            prop_assert!(post.in_ball());
        }
    }
}
