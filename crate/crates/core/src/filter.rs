//! Model-independent state estimation from raw readouts.
//!
//! An exponentially weighted moving average with decay time tau_f smooths
//! the excess detector noise out of a readout channel; with both channels
//! available the filtered signals track the underlying Bloch components
//! without any model of the dynamics.

use crate::error::{Error, Result};

/// A filtered readout signal. Values may transiently leave [-1, 1] because
/// raw noise leaks through; they are reported as-is, never clipped.
#[derive(Debug, Clone)]
pub struct FilteredSignal {
    pub dt: f64,
    pub tau_f: f64,
    pub values: Vec<f64>,
}

impl FilteredSignal {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| k as f64 * self.dt)
    }

    /// Indices where the filtered value left the physical range.
    pub fn out_of_range(&self) -> usize {
        self.values.iter().filter(|v| v.abs() > 1.0).count()
    }
}

/// y[0] = r[0]; y[k+1] = y[k] + (dt/tau_f)(r[k] - y[k]).
pub fn ewma(samples: &[f64], dt: f64, tau_f: f64) -> Result<FilteredSignal> {
    if !(tau_f > dt) {
        return Err(Error::FilterTooFast { tau_f, dt });
    }
    if samples.is_empty() {
        return Err(Error::RecordTooShort { needed: 1, have: 0 });
    }
    let alpha = dt / tau_f;
    let mut values = Vec::with_capacity(samples.len());
    let mut y = samples[0];
    values.push(y);
    for r in &samples[..samples.len() - 1] {
        y += alpha * (r - y);
        values.push(y);
    }
    Ok(FilteredSignal { dt, tau_f, values })
}

/// Tracking-quality metrics of a filtered signal against the true component.
#[derive(Debug, Clone, Copy)]
pub struct TrackingMetrics {
    pub rms_error: f64,
    /// Same-time Pearson correlation coefficient.
    pub correlation: f64,
    /// Shift (in time units) maximizing the cross-correlation; positive
    /// means the filter lags the truth.
    pub best_lag: f64,
    pub best_lag_correlation: f64,
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va * vb).sqrt()
}

/// Compares a filtered signal with the aligned truth series. The first
/// `burn_in_steps` samples are discarded to drop the filter transient; the
/// lag scan covers +-5 tau_f.
pub fn tracking_report(
    filtered: &FilteredSignal,
    truth: &[f64],
    burn_in_steps: usize,
) -> Result<TrackingMetrics> {
    if filtered.values.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: filtered.values.len(),
            right: truth.len(),
        });
    }
    let y = &filtered.values[burn_in_steps..];
    let x = &truth[burn_in_steps..];
    if y.len() < 2 {
        return Err(Error::RecordTooShort {
            needed: burn_in_steps + 2,
            have: truth.len(),
        });
    }

    let rms = (y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
        .sqrt();
    let correlation = pearson(y, x);

    let max_shift = ((5.0 * filtered.tau_f / filtered.dt) as usize).min(y.len() / 4);
    let mut best_lag = 0usize;
    let mut best_corr = correlation;
    for shift in 1..=max_shift {
        // filter lags the truth: compare y[k] with x[k - shift]
        let c = pearson(&y[shift..], &x[..x.len() - shift]);
        if c > best_corr {
            best_corr = c;
            best_lag = shift;
        }
    }
    Ok(TrackingMetrics {
        rms_error: rms,
        correlation,
        best_lag: best_lag as f64 * filtered.dt,
        best_lag_correlation: best_corr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseStream, StreamKey, StreamRole};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn rejects_fast_filter_constant() {
        assert!(ewma(&[1.0, 2.0], 0.01, 0.01).is_err());
        assert!(ewma(&[1.0, 2.0], 0.01, 0.005).is_err());
    }

    #[test]
    fn step_input_converges_geometrically() {
        let dt = 0.01;
        let tau_f = 1.0;
        let c = 2.5;
        let mut samples = vec![0.0];
        samples.extend(std::iter::repeat(c).take(2000));
        let f = ewma(&samples, dt, tau_f).unwrap();
        let alpha = dt / tau_f;
        // y[1] = 0; afterwards |y[k] - c| decays by (1 - alpha) per step
        for k in 1..f.values.len() {
            let expected = c - c * (1.0 - alpha).powi(k as i32 - 1);
            assert_abs_diff_eq!(f.values[k], expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_input_stays_zero() {
        let f = ewma(&vec![0.0; 100], 0.01, 1.0).unwrap();
        assert!(f.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn white_noise_variance_matches_closed_form() {
        // input sqrt(tau) xi with per-sample variance tau/dt; stationary
        // output variance tau / (2 tau_f - dt), about 1/2 at tau_f = tau.
        let dt = 0.01f64;
        let tau = 1.0f64;
        let tau_f = 1.0f64;
        let n = 1_000_000;
        let mut stream = NoiseStream::new(3, StreamKey::new(0, StreamRole::ReadoutX));
        let sigma = (tau / dt).sqrt();
        let samples: Vec<f64> = (0..n).map(|_| sigma * stream.next_standard_normal()).collect();
        let f = ewma(&samples, dt, tau_f).unwrap();
        let skip = 2000;
        let ys = &f.values[skip..];
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / ys.len() as f64;
        let expected = tau / (2.0 * tau_f - dt);
        // long filter memory: effective sample count ~ n dt / (2 tau_f)
        assert!(
            (var - expected).abs() < 0.05,
            "var {var} vs {expected}"
        );
    }

    #[test]
    fn smoothing_the_truth_itself_correlates_highly() {
        // filter a slow deterministic signal and compare with itself
        let dt = 0.01;
        let n = 100_000;
        let signal: Vec<f64> = (0..n).map(|k| (k as f64 * dt * 0.3).sin()).collect();
        let f = ewma(&signal, dt, 1.0).unwrap();
        let m = tracking_report(&f, &signal, 500).unwrap();
        assert!(m.correlation > 0.99, "corr {}", m.correlation);
        assert!(m.best_lag > 0.0);
    }

    #[test]
    fn report_rejects_mismatched_lengths() {
        let f = ewma(&[0.0; 10], 0.01, 1.0).unwrap();
        assert!(tracking_report(&f, &[0.0; 9], 0).is_err());
    }

    proptest! {
        #[test]
        fn filter_is_linear(
            scale_a in -2.0f64..2.0,
            scale_b in -2.0f64..2.0,
            seed in 0u64..1000,
        ) {
            let mut stream = NoiseStream::new(seed, StreamKey::new(0, StreamRole::ReadoutZ));
            let r: Vec<f64> = (0..200).map(|_| stream.next_standard_normal()).collect();
            let s: Vec<f64> = (0..200).map(|_| stream.next_standard_normal()).collect();
            let combo: Vec<f64> = r.iter().zip(&s).map(|(a, b)| scale_a * a + scale_b * b).collect();
            let fr = ewma(&r, 0.01, 0.5).unwrap();
            let fs = ewma(&s, 0.01, 0.5).unwrap();
            let fc = ewma(&combo, 0.01, 0.5).unwrap();
            for k in 0..200 {
                let lin = scale_a * fr.values[k] + scale_b * fs.values[k];
                prop_assert!((fc.values[k] - lin).abs() < 1e-10);
            }
        }
    }
}
