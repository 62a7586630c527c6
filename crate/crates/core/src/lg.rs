//! Rotated readouts and macrorealism (Leggett-Garg) tests.
//!
//! A macrorealist reading of the two readout channels treats
//! r_phi = cos(phi) r_x + sin(phi) r_z as a noisy record of the spin
//! component along the direction phi. Quantum theory predicts
//! `<r_phi(0) r_phi(t)> = exp(-t/2tau)` for every phi, while orthogonal
//! directions stay uncorrelated; combining three such correlators yields an
//! inequality whose macrorealistic bound of 1 is violated up to sqrt(2) at
//! short delays, with no Hamiltonian drive. The projective three-time
//! experiment with a Rabi drive is included as the reference protocol that
//! does require evolution to violate.

use crate::bloch::BlochState;
use crate::error::{Error, Result};
use crate::noise::{NoiseStream, StreamKey, StreamRole};
use crate::stats::{
    block_factor, correlate_series, exp_decay_theory, CorrelationEstimate, CorrelatorOptions,
    CorrelatorSpec, LaggedCorrelations, MultiSeriesCorrelator, SeriesId,
};
use crate::trajectory::ReadoutRecord;

/// Effective readout along the direction phi in the x-z plane.
#[derive(Debug, Clone)]
pub struct RotatedReadout {
    pub phi: f64,
    pub dt: f64,
    pub tau: f64,
    pub samples: Vec<f64>,
}

/// r_phi[k] = cos(phi) r_x[k] + sin(phi) r_z[k], exactly, no resampling.
pub fn rotate_readout(rec: &ReadoutRecord, phi: f64) -> Result<RotatedReadout> {
    let tau = rec.equal_tau()?;
    let (c, s) = (phi.cos(), phi.sin());
    let samples = rec
        .r_x
        .iter()
        .zip(&rec.r_z)
        .map(|(rx, rz)| c * rx + s * rz)
        .collect();
    Ok(RotatedReadout {
        phi,
        dt: rec.dt,
        tau,
        samples,
    })
}

/// <r_phi(0) r_phi(t)>; theory exp(-t/2tau) independent of phi.
pub fn phi_autocorrelator(
    rec: &ReadoutRecord,
    phi: f64,
    opts: &CorrelatorOptions,
) -> Result<CorrelationEstimate> {
    let rotated = rotate_readout(rec, phi)?;
    let mut est = correlate_series(
        &rotated.samples,
        &rotated.samples,
        rec.dt,
        opts,
        &format!("<r_phi(0) r_phi(t)> phi={phi}"),
    )?;
    let block_len = (opts.block_time / rec.dt).round().max(1.0) as usize;
    let factor = block_factor(block_len, rec.dt, rotated.tau);
    est.theory = Some(exp_decay_theory(&est.lags, rotated.tau, 1.0, factor));
    Ok(est)
}

/// <r_phi(0) r_{phi+pi/2}(t)>; theory 0 for all phi.
pub fn phi_orthogonal_correlator(
    rec: &ReadoutRecord,
    phi: f64,
    opts: &CorrelatorOptions,
) -> Result<CorrelationEstimate> {
    let a = rotate_readout(rec, phi)?;
    let b = rotate_readout(rec, phi + std::f64::consts::FRAC_PI_2)?;
    let mut est = correlate_series(
        &a.samples,
        &b.samples,
        rec.dt,
        opts,
        &format!("<r_phi(0) r_phi+pi/2(t)> phi={phi}"),
    )?;
    est.theory = Some(vec![0.0; est.lags.len()]);
    Ok(est)
}

/// Outcome of one macrorealism-inequality evaluation.
#[derive(Debug, Clone, Copy)]
pub struct LGResult {
    /// Rotation angle; `None` for the projective protocol.
    pub phi: Option<f64>,
    /// Correlation delay t (the three times are 0, t, 2t; for the
    /// projective protocol the interval Delta t).
    pub t: f64,
    pub lhs: f64,
    pub stderr: f64,
    pub theory: f64,
    pub bound: f64,
    /// lhs exceeds the bound by more than 3 standard errors.
    pub violated: bool,
}

fn lg_result(phi: Option<f64>, t: f64, lhs: f64, stderr: f64, theory: f64) -> LGResult {
    LGResult {
        phi,
        t,
        lhs,
        stderr,
        theory,
        bound: 1.0,
        violated: lhs - 3.0 * stderr > 1.0,
    }
}

/// Continuous-measurement inequality combination
/// `<r_x(0) r_phi(t)> + <r_phi(t) r_z(2t)> - <r_x(0) r_z(2t)>`
/// evaluated from accumulated readout correlations at lags t and 2t.
///
/// The per-term errors come from batch means; the three terms are treated
/// as independent when combined.
pub fn lg_combination_from_correlations(
    corrs: &LaggedCorrelations,
    tau: f64,
    phi: f64,
    t: f64,
) -> Result<LGResult> {
    let li_t = corrs.lag_index_for_time(t).ok_or(Error::InvalidParam {
        name: "t",
        reason: format!("lag {t} is not on the accumulated grid"),
    })?;
    let li_2t = corrs.lag_index_for_time(2.0 * t).ok_or(Error::InvalidParam {
        name: "t",
        reason: format!("lag {} is not on the accumulated grid", 2.0 * t),
    })?;
    let (rx, rz) = (SeriesId::Rx.index(), SeriesId::Rz.index());
    let (c, s) = (phi.cos(), phi.sin());
    // <r_x(0) r_phi(t)>
    let (term1, se1) = corrs.combo(&[((rx, rx), c), ((rx, rz), s)], li_t)?;
    // <r_phi(t) r_z(2t)> = <r_phi(0) r_z(t)> by stationarity
    let (term2, se2) = corrs.combo(&[((rx, rz), c), ((rz, rz), s)], li_t)?;
    // <r_x(0) r_z(2t)>
    let (term3, se3) = corrs.combo(&[((rx, rz), 1.0)], li_2t)?;
    let lhs = term1 + term2 - term3;
    let stderr = (se1 * se1 + se2 * se2 + se3 * se3).sqrt();
    let factor = block_factor(corrs.block_len, corrs.dt, tau);
    let theory = (c + s) * factor * (-t / (2.0 * tau)).exp();
    Ok(lg_result(Some(phi), t, lhs, stderr, theory))
}

/// Record-level variant of [`lg_combination_from_correlations`]: builds the
/// raw-lag correlators at t and 2t directly from a readout record.
pub fn lg_combination(
    rec: &ReadoutRecord,
    phi: f64,
    t: f64,
    burn_in_time: f64,
    n_batches: usize,
) -> Result<LGResult> {
    let tau = rec.equal_tau()?;
    let lag = (t / rec.dt).round() as usize;
    if lag == 0 {
        return Err(Error::InvalidParam {
            name: "t",
            reason: "must be at least one sample step".into(),
        });
    }
    let (rx, rz) = (SeriesId::Rx.index(), SeriesId::Rz.index());
    let spec = CorrelatorSpec {
        block_len: 1,
        lags: vec![lag, 2 * lag],
        n_batches,
        burn_in_blocks: (burn_in_time / rec.dt).round() as usize,
        pairs: vec![(rx, rx), (rz, rz), (rx, rz), (rz, rx)],
        expected_samples: rec.len() as u64,
        expected_records: 1,
    };
    let mut acc: MultiSeriesCorrelator<2> = MultiSeriesCorrelator::new(spec, rec.dt)?;
    for k in 0..rec.len() {
        acc.push_sample(&[rec.r_x[k], rec.r_z[k]]);
    }
    lg_combination_from_correlations(&acc.finalize(), tau, phi, t)
}

/// Locates the delay t* at which the inequality stops being violated:
/// the downward crossing of lhs(t) through the bound, linearly
/// interpolated between grid points. The theory value is 2 tau ln(cos phi
/// + sin phi).
pub fn violation_boundary(curve: &[LGResult]) -> Option<f64> {
    for w in curve.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if (a.lhs - a.bound) >= 0.0 && (b.lhs - b.bound) < 0.0 {
            let f = (a.lhs - a.bound) / (a.lhs - b.lhs);
            return Some(a.t + f * (b.t - a.t));
        }
    }
    None
}

/// Rotation generated by the Rabi drive (angular frequency omega about the
/// x axis) for a duration `t`.
pub fn rabi_rotate(state: &BlochState, omega: f64, t: f64) -> BlochState {
    let a = omega * t;
    let (c, s) = (a.cos(), a.sin());
    BlochState::new_unchecked(
        state.x,
        state.y * c - state.z * s,
        state.z * c + state.y * s,
    )
}

/// Projective sigma_z measurement: Born-rule outcome and collapsed state.
pub fn projective_measure_z(state: &BlochState, stream: &mut NoiseStream) -> (f64, BlochState) {
    let p_plus = 0.5 * (1.0 + state.z);
    let outcome = if stream.next_uniform() < p_plus {
        1.0
    } else {
        -1.0
    };
    (outcome, BlochState::new_unchecked(0.0, 0.0, outcome))
}

/// Two-time projective correlator <z(t_a) z(t_b)> under the Rabi drive,
/// estimated from `n_shots` independent preparations of the +z state.
fn two_time_projective(
    omega: f64,
    t_a: f64,
    t_b: f64,
    n_shots: usize,
    stream: &mut NoiseStream,
) -> (f64, f64) {
    let initial = BlochState::new_unchecked(0.0, 0.0, 1.0);
    let mut sum = 0.0f64;
    for _ in 0..n_shots {
        let at_a = rabi_rotate(&initial, omega, t_a);
        let (m1, collapsed) = projective_measure_z(&at_a, stream);
        let at_b = rabi_rotate(&collapsed, omega, t_b - t_a);
        let (m2, _) = projective_measure_z(&at_b, stream);
        sum += m1 * m2;
    }
    let mean = sum / n_shots as f64;
    let var = (1.0 - mean * mean).max(0.0);
    (mean, (var / n_shots as f64).sqrt())
}

/// Theory for the equally spaced three-time projective combination:
/// 2 cos(omega dt) - cos(2 omega dt).
pub fn projective_lhs_theory(omega: f64, delta_t: f64) -> f64 {
    2.0 * (omega * delta_t).cos() - (2.0 * omega * delta_t).cos()
}

/// Three-time projective inequality with equal spacing `delta_t`: each of
/// the three two-time correlators is estimated from its own sub-ensemble of
/// shot pairs (the operationally noninvasive protocol).
pub fn projective_lg(omega: f64, delta_t: f64, n_shots: usize, seed: u64) -> Result<LGResult> {
    if n_shots == 0 {
        return Err(Error::InvalidParam {
            name: "n_shots",
            reason: "must be at least 1".into(),
        });
    }
    if !(delta_t > 0.0) {
        return Err(Error::InvalidParam {
            name: "delta_t",
            reason: "must be positive".into(),
        });
    }
    let (t1, t2, t3) = (0.0, delta_t, 2.0 * delta_t);
    let mut results = [(0.0, 0.0); 3];
    for (i, (ta, tb)) in [(t1, t2), (t2, t3), (t1, t3)].iter().enumerate() {
        let mut stream = NoiseStream::new(seed, StreamKey::new(i as u64, StreamRole::Projective));
        results[i] = two_time_projective(omega, *ta, *tb, n_shots, &mut stream);
    }
    let lhs = results[0].0 + results[1].0 - results[2].0;
    let stderr = (results[0].1.powi(2) + results[1].1.powi(2) + results[2].1.powi(2)).sqrt();
    Ok(lg_result(
        None,
        delta_t,
        lhs,
        stderr,
        projective_lhs_theory(omega, delta_t),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{run, Scheme, SimConfig};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

    fn quantum_record(n_steps: usize, seed: u64) -> ReadoutRecord {
        let cfg = SimConfig::new(
            BlochState::new_unchecked(0.0, 0.0, 1.0),
            Scheme::Kraus,
            0.01,
            1.0,
            n_steps,
        );
        run(&cfg, seed, 0).unwrap().readouts
    }

    #[test]
    fn rotation_special_angles() {
        let rec = ReadoutRecord {
            dt: 0.01,
            tau_x: 1.0,
            tau_z: 1.0,
            r_x: vec![1.0, 2.0, 3.0],
            r_z: vec![4.0, 5.0, 6.0],
        };
        assert_eq!(rotate_readout(&rec, 0.0).unwrap().samples, vec![1.0, 2.0, 3.0]);
        let z = rotate_readout(&rec, FRAC_PI_2).unwrap();
        for (v, want) in z.samples.iter().zip([4.0, 5.0, 6.0]) {
            assert_abs_diff_eq!(*v, want, epsilon = 1e-12);
        }
        let quarter = rotate_readout(&rec, FRAC_PI_4).unwrap();
        for (v, (rx, rz)) in quarter.samples.iter().zip([(1.0, 4.0), (2.0, 5.0), (3.0, 6.0)]) {
            assert_abs_diff_eq!(*v, (rx + rz) / 2f64.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn rotation_requires_equal_tau() {
        let rec = ReadoutRecord {
            dt: 0.01,
            tau_x: 1.0,
            tau_z: 2.0,
            r_x: vec![0.0],
            r_z: vec![0.0],
        };
        assert!(rotate_readout(&rec, 0.3).is_err());
    }

    #[test]
    fn phi_autocorrelator_decays_for_any_angle() {
        let rec = quantum_record(2_000_000, 21);
        let opts = CorrelatorOptions {
            block_time: 0.1,
            max_lag_time: 2.0,
            burn_in_time: 5.0,
            n_batches: 20,
        };
        for phi in [0.0, FRAC_PI_3, 2.0] {
            let est = phi_autocorrelator(&rec, phi, &opts).unwrap();
            assert!(
                est.max_abs_deviation().unwrap() < 0.12,
                "phi {phi}: dev {}",
                est.max_abs_deviation().unwrap()
            );
        }
    }

    #[test]
    fn orthogonal_correlator_consistent_with_zero() {
        let rec = quantum_record(2_000_000, 22);
        let opts = CorrelatorOptions {
            block_time: 0.1,
            max_lag_time: 2.0,
            burn_in_time: 5.0,
            n_batches: 20,
        };
        for phi in [0.0, FRAC_PI_4] {
            let est = phi_orthogonal_correlator(&rec, phi, &opts).unwrap();
            assert!(est.values.iter().all(|v| v.abs() < 0.12), "phi {phi}");
        }
    }

    #[test]
    fn fixed_classical_spin_has_nonzero_orthogonal_correlator() {
        // A definite spin at angle theta with only subjective detector noise:
        // <r_phi(0) r_{phi+pi/2}(t)> -> cos(theta - phi) sin(theta - phi),
        // unlike the monitored qubit where it vanishes.
        use crate::noise::{NoiseStream, StreamKey, StreamRole};
        let theta: f64 = PI / 3.0;
        let phi = 0.0;
        let n = 2_000_000usize;
        let dt = 0.01;
        let mut s1 = NoiseStream::new(77, StreamKey::new(0, StreamRole::ReadoutX));
        let mut s2 = NoiseStream::new(77, StreamKey::new(0, StreamRole::ReadoutZ));
        let sq = (1.0f64 / dt).sqrt();
        let mut r_x = Vec::with_capacity(n);
        let mut r_z = Vec::with_capacity(n);
        for _ in 0..n {
            r_x.push(theta.cos() + sq * s1.next_standard_normal());
            r_z.push(theta.sin() + sq * s2.next_standard_normal());
        }
        let rec = ReadoutRecord {
            dt,
            tau_x: 1.0,
            tau_z: 1.0,
            r_x,
            r_z,
        };
        let opts = CorrelatorOptions {
            block_time: 0.1,
            max_lag_time: 1.0,
            burn_in_time: 0.0,
            n_batches: 20,
        };
        let est = phi_orthogonal_correlator(&rec, phi, &opts).unwrap();
        let expected = (theta - phi).cos() * (theta - phi).sin();
        for (v, se) in est.values.iter().zip(&est.stderr) {
            assert!(
                (v - expected).abs() < 4.0 * se.max(0.01),
                "{v} vs {expected}"
            );
        }
    }

    #[test]
    fn lg_combination_examples() {
        let rec = quantum_record(4_000_000, 23);
        // phi = pi/4 at t = 0.1 tau: theory sqrt(2) exp(-0.05) = 1.345
        let r = lg_combination(&rec, FRAC_PI_4, 0.1, 5.0, 20).unwrap();
        assert_abs_diff_eq!(r.theory, 2f64.sqrt() * (-0.05f64).exp(), epsilon = 1e-12);
        assert!((r.lhs - r.theory).abs() < 0.05, "lhs {} theory {}", r.lhs, r.theory);
        assert!(r.violated);

        // phi = -pi/4: coefficients cancel, no violation at any delay
        let r = lg_combination(&rec, -FRAC_PI_4, 0.1, 5.0, 20).unwrap();
        assert_abs_diff_eq!(r.theory, 0.0, epsilon = 1e-12);
        assert!(!r.violated);
        assert!(r.lhs.abs() < 0.1);
    }

    #[test]
    fn boundary_interpolation_finds_crossing() {
        let mk = |t: f64, lhs: f64| LGResult {
            phi: Some(FRAC_PI_4),
            t,
            lhs,
            stderr: 0.01,
            theory: lhs,
            bound: 1.0,
            violated: lhs > 1.0,
        };
        let curve = [mk(0.5, 1.1), mk(0.7, 1.0 - 0.02), mk(0.9, 0.9)];
        let t_star = violation_boundary(&curve).unwrap();
        assert!((t_star - (0.5 + 0.2 * (0.1 / 0.12))).abs() < 1e-12);
    }

    #[test]
    fn projective_lg_maximal_violation() {
        // Omega dt = pi/3 maximizes 2cos - cos(2 ..) at 3/2.
        let r = projective_lg(1.0, FRAC_PI_3, 100_000, 99).unwrap();
        assert_abs_diff_eq!(r.theory, 1.5, epsilon = 1e-12);
        assert!((r.lhs - 1.5).abs() < 0.02, "lhs {}", r.lhs);
        assert!(r.violated);
    }

    #[test]
    fn projective_lg_no_violation_cases() {
        // Omega dt = pi/2: lhs = 1 exactly in theory.
        let r = projective_lg(1.0, FRAC_PI_2, 100_000, 17).unwrap();
        assert_abs_diff_eq!(r.theory, 1.0, epsilon = 1e-12);
        assert!((r.lhs - 1.0).abs() < 0.02);
        assert!(!r.violated);

        // No drive: all correlators are exactly 1.
        let r = projective_lg(0.0, 1.0, 10_000, 5).unwrap();
        assert_eq!(r.lhs, 1.0);
        assert_eq!(r.stderr, 0.0);
        assert!(!r.violated);
    }
}
