//! Correlation-function estimation with batch-means standard errors.
//!
//! The estimator is built for long readout records sampled much finer than
//! the correlation time. Samples are first averaged into blocks of
//! `block_len` consecutive samples, and lagged products are accumulated
//! between block means. Every pair separation inside a lag-m block product
//! is positive, so an exponential correlator factorizes exactly over the
//! block window:
//!
//! ```text
//! <R(0) R(m)> = exp(-m B dt / 2 tau) * block_factor(B)
//! ```
//!
//! Blocking therefore reduces estimator variance (the per-sample readout
//! noise variance tau/dt is large) without biasing the theory comparison;
//! the exactly computable [`block_factor`] is folded into the theory
//! column. The lag-0 product is kept separate: it carries the
//! delta-function noise spike and is never compared against the continuum
//! theory.
//!
//! Standard errors come from batch means: the block stream is cut into
//! `n_batches` contiguous batches, and the spread of per-batch means
//! estimates the error of the grand mean. Linear combinations of
//! correlators (rotated readouts, macrorealism combinations, noise
//! constraints) are evaluated per batch, which propagates correlations
//! between terms sharing the same data.

use crate::error::{Error, Result};
use crate::trajectory::{ReadoutRecord, StepSample, StepSink, TrajectoryRecord};

/// Compensated (Kahan) summation for the long-running product accumulators.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Series tracked by the trajectory correlator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeriesId {
    /// Readout of the sigma_x channel.
    Rx,
    /// Readout of the sigma_z channel.
    Rz,
    /// Bloch x component.
    X,
    /// Bloch z component.
    Z,
    /// sqrt(tau_x) * xi_x: the noise part of the x readout.
    NoiseX,
    /// sqrt(tau_z) * xi_z: the noise part of the z readout.
    NoiseZ,
}

pub const N_TRAJECTORY_SERIES: usize = 6;

impl SeriesId {
    pub fn index(self) -> usize {
        match self {
            SeriesId::Rx => 0,
            SeriesId::Rz => 1,
            SeriesId::X => 2,
            SeriesId::Z => 3,
            SeriesId::NoiseX => 4,
            SeriesId::NoiseZ => 5,
        }
    }
}

/// Configuration of a streaming multi-series correlator.
#[derive(Debug, Clone)]
pub struct CorrelatorSpec {
    /// Samples per block (1 = raw lags).
    pub block_len: usize,
    /// Requested lags, in blocks, strictly increasing, all >= 1.
    pub lags: Vec<usize>,
    /// Batches for the standard-error estimate.
    pub n_batches: usize,
    /// Blocks discarded at the start of every record.
    pub burn_in_blocks: usize,
    /// Series pairs (left at the earlier time, right at the later time).
    pub pairs: Vec<(usize, usize)>,
    /// Total samples expected across all records, used to size batches.
    pub expected_samples: u64,
    /// Number of records that will be streamed.
    pub expected_records: u64,
}

impl CorrelatorSpec {
    fn usable_blocks(&self) -> u64 {
        let total = self.expected_samples / self.block_len as u64;
        total.saturating_sub(self.burn_in_blocks as u64 * self.expected_records)
    }

    fn validate(&self) -> Result<()> {
        if self.block_len == 0 {
            return Err(Error::InvalidParam {
                name: "block_len",
                reason: "must be at least 1".into(),
            });
        }
        if self.lags.is_empty() || self.lags[0] == 0 || self.lags.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParam {
                name: "lags",
                reason: "must be strictly increasing and start at lag >= 1".into(),
            });
        }
        if self.n_batches < 2 {
            return Err(Error::InvalidParam {
                name: "n_batches",
                reason: "need at least 2 batches".into(),
            });
        }
        let max_lag = *self.lags.last().unwrap() as u64;
        let needed = (max_lag + self.n_batches as u64) * 2;
        if self.usable_blocks() < needed {
            return Err(Error::RecordTooShort {
                needed: (needed * self.block_len as u64) as usize,
                have: self.expected_samples as usize,
            });
        }
        Ok(())
    }
}

/// Streaming lagged-correlation accumulator over `N` synchronous series.
#[derive(Debug, Clone)]
pub struct MultiSeriesCorrelator<const N: usize> {
    spec: CorrelatorSpec,
    dt: f64,
    max_lag: usize,
    block_acc: [f64; N],
    in_block: usize,
    /// Ring of the most recent accepted block means.
    ring: Vec<[f64; N]>,
    /// Accepted (post burn-in) blocks across all records.
    accepted: u64,
    /// Blocks seen in the current record, including burn-in.
    blocks_in_record: u64,
    usable_blocks: u64,
    /// [pair][lag][batch]
    sums: Vec<Vec<Vec<KahanSum>>>,
    /// [lag][batch]
    counts: Vec<Vec<u64>>,
    /// Same-block products, [pair].
    lag0: Vec<KahanSum>,
    lag0_count: u64,
    samples_seen: u64,
}

impl<const N: usize> MultiSeriesCorrelator<N> {
    pub fn new(spec: CorrelatorSpec, dt: f64) -> Result<Self> {
        spec.validate()?;
        for &(a, b) in &spec.pairs {
            if a >= N || b >= N {
                return Err(Error::InvalidParam {
                    name: "pairs",
                    reason: format!("series index out of range: ({a}, {b})"),
                });
            }
        }
        let max_lag = *spec.lags.last().unwrap();
        let usable_blocks = spec.usable_blocks();
        let n_lags = spec.lags.len();
        let n_pairs = spec.pairs.len();
        Ok(Self {
            dt,
            max_lag,
            block_acc: [0.0; N],
            in_block: 0,
            ring: vec![[0.0; N]; max_lag + 1],
            accepted: 0,
            blocks_in_record: 0,
            usable_blocks,
            sums: vec![vec![vec![KahanSum::default(); spec.n_batches]; n_lags]; n_pairs],
            counts: vec![vec![0; spec.n_batches]; n_lags],
            lag0: vec![KahanSum::default(); n_pairs],
            lag0_count: 0,
            samples_seen: 0,
            spec,
        })
    }

    pub fn push_sample(&mut self, row: &[f64; N]) {
        self.samples_seen += 1;
        for (acc, v) in self.block_acc.iter_mut().zip(row) {
            *acc += v;
        }
        self.in_block += 1;
        if self.in_block == self.spec.block_len {
            let inv = 1.0 / self.spec.block_len as f64;
            let mut mean = [0.0; N];
            for (m, acc) in mean.iter_mut().zip(&self.block_acc) {
                *m = acc * inv;
            }
            self.block_acc = [0.0; N];
            self.in_block = 0;
            self.push_block(mean);
        }
    }

    fn push_block(&mut self, mean: [f64; N]) {
        let in_record = self.blocks_in_record;
        self.blocks_in_record += 1;
        if in_record < self.spec.burn_in_blocks as u64 {
            return;
        }
        let in_record_rel = in_record - self.spec.burn_in_blocks as u64;
        let rel = self.accepted;
        self.accepted += 1;
        let cap = self.max_lag as u64 + 1;
        self.ring[(rel % cap) as usize] = mean;

        let batch = ((rel * self.spec.n_batches as u64) / self.usable_blocks.max(1))
            .min(self.spec.n_batches as u64 - 1) as usize;

        for (p, &(a, b)) in self.spec.pairs.iter().enumerate() {
            self.lag0[p].add(mean[a] * mean[b]);
        }
        self.lag0_count += 1;

        for (li, &lag) in self.spec.lags.iter().enumerate() {
            // the earlier block must come from the same record
            if in_record_rel < lag as u64 {
                continue;
            }
            let past = &self.ring[((rel - lag as u64) % cap) as usize];
            for (p, &(a, b)) in self.spec.pairs.iter().enumerate() {
                self.sums[p][li][batch].add(past[a] * mean[b]);
            }
            self.counts[li][batch] += 1;
        }
    }

    /// Marks a record boundary: the partial block is dropped and no product
    /// will straddle records. Burn-in applies again to the next record.
    pub fn end_record(&mut self) {
        self.block_acc = [0.0; N];
        self.in_block = 0;
        self.blocks_in_record = 0;
    }

    pub fn finalize(self) -> LaggedCorrelations {
        let n_lags = self.spec.lags.len();
        let n_pairs = self.spec.pairs.len();
        let mut values = vec![vec![0.0; n_lags]; n_pairs];
        let mut stderr = vec![vec![0.0; n_lags]; n_pairs];
        let mut batch_means = vec![vec![vec![0.0; self.spec.n_batches]; n_lags]; n_pairs];
        for p in 0..n_pairs {
            for li in 0..n_lags {
                let mut total = KahanSum::default();
                let mut count = 0u64;
                for b in 0..self.spec.n_batches {
                    let c = self.counts[li][b];
                    if c > 0 {
                        batch_means[p][li][b] = self.sums[p][li][b].value() / c as f64;
                    }
                    total.add(self.sums[p][li][b].value());
                    count += c;
                }
                values[p][li] = total.value() / count.max(1) as f64;
                let bm = &batch_means[p][li];
                let nb = bm.len() as f64;
                let grand = bm.iter().sum::<f64>() / nb;
                let var =
                    bm.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (nb - 1.0);
                stderr[p][li] = (var / nb).sqrt();
            }
        }
        let lag0 = self
            .lag0
            .iter()
            .map(|s| s.value() / self.lag0_count.max(1) as f64)
            .collect();
        LaggedCorrelations {
            dt: self.dt,
            block_len: self.spec.block_len,
            lags_blocks: self.spec.lags.clone(),
            n_batches: self.spec.n_batches,
            n_samples: self.samples_seen,
            pairs: self.spec.pairs.clone(),
            values,
            stderr,
            batch_means,
            lag0,
        }
    }
}

/// Finished lagged correlation estimates over a set of series pairs.
#[derive(Debug, Clone)]
pub struct LaggedCorrelations {
    pub dt: f64,
    pub block_len: usize,
    pub lags_blocks: Vec<usize>,
    pub n_batches: usize,
    pub n_samples: u64,
    pairs: Vec<(usize, usize)>,
    values: Vec<Vec<f64>>,
    stderr: Vec<Vec<f64>>,
    batch_means: Vec<Vec<Vec<f64>>>,
    lag0: Vec<f64>,
}

impl LaggedCorrelations {
    /// Lag grid in time units.
    pub fn lag_times(&self) -> Vec<f64> {
        self.lags_blocks
            .iter()
            .map(|&m| m as f64 * self.block_len as f64 * self.dt)
            .collect()
    }

    pub fn lag_index_for_time(&self, t: f64) -> Option<usize> {
        let step = self.block_len as f64 * self.dt;
        self.lags_blocks
            .iter()
            .position(|&m| (m as f64 * step - t).abs() < 0.25 * step)
    }

    fn pair_index(&self, a: usize, b: usize) -> Result<usize> {
        self.pairs
            .iter()
            .position(|&p| p == (a, b))
            .ok_or(Error::InvalidParam {
                name: "pair",
                reason: format!("pair ({a}, {b}) was not accumulated"),
            })
    }

    pub fn values(&self, a: usize, b: usize) -> Result<&[f64]> {
        Ok(&self.values[self.pair_index(a, b)?])
    }

    pub fn stderr(&self, a: usize, b: usize) -> Result<&[f64]> {
        Ok(&self.stderr[self.pair_index(a, b)?])
    }

    pub fn lag0(&self, a: usize, b: usize) -> Result<f64> {
        Ok(self.lag0[self.pair_index(a, b)?])
    }

    /// Linear combination of pair correlators at one lag, with the standard
    /// error taken from the spread of the per-batch combined means.
    pub fn combo(&self, terms: &[((usize, usize), f64)], lag_index: usize) -> Result<(f64, f64)> {
        let mut value = 0.0;
        let mut batch = vec![0.0; self.n_batches];
        for &((a, b), coef) in terms {
            let p = self.pair_index(a, b)?;
            value += coef * self.values[p][lag_index];
            for (acc, m) in batch.iter_mut().zip(&self.batch_means[p][lag_index]) {
                *acc += coef * m;
            }
        }
        let nb = self.n_batches as f64;
        let grand = batch.iter().sum::<f64>() / nb;
        let var = batch.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (nb - 1.0);
        Ok((value, (var / nb).sqrt()))
    }

    /// The combination across the whole lag grid.
    pub fn combo_curve(&self, terms: &[((usize, usize), f64)]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut values = Vec::with_capacity(self.lags_blocks.len());
        let mut errs = Vec::with_capacity(self.lags_blocks.len());
        for li in 0..self.lags_blocks.len() {
            let (v, e) = self.combo(terms, li)?;
            values.push(v);
            errs.push(e);
        }
        Ok((values, errs))
    }
}

/// A named correlator estimate against an optional theory curve.
#[derive(Debug, Clone)]
pub struct CorrelationEstimate {
    pub label: String,
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub theory: Option<Vec<f64>>,
    /// Same-block lag-0 product; contains the delta-spike noise variance
    /// tau/dt and is excluded from theory comparison.
    pub lag0: Option<f64>,
    pub n_samples: u64,
}

impl CorrelationEstimate {
    pub fn max_abs_deviation(&self) -> Option<f64> {
        let theory = self.theory.as_ref()?;
        Some(
            self.values
                .iter()
                .zip(theory)
                .map(|(v, t)| (v - t).abs())
                .fold(0.0, f64::max),
        )
    }

    /// Largest |estimate - theory| / stderr over the grid.
    pub fn max_sigma_deviation(&self) -> Option<f64> {
        let theory = self.theory.as_ref()?;
        Some(
            self.values
                .iter()
                .zip(theory)
                .zip(&self.stderr)
                .map(|((v, t), se)| ((v - t) / se).abs())
                .fold(0.0, f64::max),
        )
    }
}

/// Least-squares slope of ln(y) against ln(x).
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

/// The four readout correlator pairs.
pub fn readout_pair_set() -> Vec<(usize, usize)> {
    use SeriesId::*;
    vec![
        (Rx.index(), Rx.index()),
        (Rz.index(), Rz.index()),
        (Rx.index(), Rz.index()),
        (Rz.index(), Rx.index()),
    ]
}

/// Exact block-averaging factor for an exponential correlator with decay
/// rate 1/(2 tau).
pub fn block_factor(block_len: usize, dt: f64, tau: f64) -> f64 {
    let b = block_len as i64;
    let mut total = 0.0;
    for d in -(b - 1)..b {
        let weight = (b - d.abs()) as f64;
        total += weight * (-(d as f64) * dt / (2.0 * tau)).exp();
    }
    total / (b as f64 * b as f64)
}

/// amplitude * block_factor * exp(-t / 2 tau) over a lag grid.
pub fn exp_decay_theory(lags: &[f64], tau: f64, amplitude: f64, factor: f64) -> Vec<f64> {
    lags.iter()
        .map(|t| amplitude * factor * (-t / (2.0 * tau)).exp())
        .collect()
}

/// Options for record-level correlator estimation.
#[derive(Debug, Clone)]
pub struct CorrelatorOptions {
    /// Block width in time units.
    pub block_time: f64,
    /// Largest lag in time units.
    pub max_lag_time: f64,
    /// Discarded leading stretch of every record, in time units.
    pub burn_in_time: f64,
    pub n_batches: usize,
}

impl CorrelatorOptions {
    /// Default analysis grid for measurement time `tau`: blocks of tau/10,
    /// lags up to 6 tau, 5 tau burn-in, 20 batches.
    pub fn for_tau(tau: f64) -> Self {
        Self {
            block_time: 0.1 * tau,
            max_lag_time: 6.0 * tau,
            burn_in_time: 5.0 * tau,
            n_batches: 20,
        }
    }

    pub fn spec(
        &self,
        dt: f64,
        n_samples: u64,
        n_records: u64,
        pairs: Vec<(usize, usize)>,
    ) -> Result<CorrelatorSpec> {
        let block_len = (self.block_time / dt).round().max(1.0) as usize;
        let max_lag = (self.max_lag_time / (block_len as f64 * dt)).round() as usize;
        if max_lag == 0 {
            return Err(Error::InvalidParam {
                name: "max_lag_time",
                reason: "smaller than one block".into(),
            });
        }
        Ok(CorrelatorSpec {
            block_len,
            lags: (1..=max_lag).collect(),
            n_batches: self.n_batches,
            burn_in_blocks: (self.burn_in_time / (block_len as f64 * dt)).round() as usize,
            pairs,
            expected_samples: n_samples,
            expected_records: n_records,
        })
    }
}

/// Which readout correlator to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadoutPair {
    XX,
    ZZ,
    XZ,
    ZX,
}

impl ReadoutPair {
    fn indices(self) -> (usize, usize) {
        match self {
            ReadoutPair::XX => (0, 0),
            ReadoutPair::ZZ => (1, 1),
            ReadoutPair::XZ => (0, 1),
            ReadoutPair::ZX => (1, 0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ReadoutPair::XX => "<r_x(0) r_x(t)>",
            ReadoutPair::ZZ => "<r_z(0) r_z(t)>",
            ReadoutPair::XZ => "<r_x(0) r_z(t)>",
            ReadoutPair::ZX => "<r_z(0) r_x(t)>",
        }
    }

    /// Autocorrelators decay as exp(-t/2tau); cross-correlators vanish.
    pub fn theory_amplitude(self) -> f64 {
        match self {
            ReadoutPair::XX | ReadoutPair::ZZ => 1.0,
            ReadoutPair::XZ | ReadoutPair::ZX => 0.0,
        }
    }
}

/// Temporal correlator estimate of one readout pair on a single record.
pub fn autocorrelate(
    rec: &ReadoutRecord,
    pair: ReadoutPair,
    opts: &CorrelatorOptions,
) -> Result<CorrelationEstimate> {
    autocorrelate_ensemble(std::slice::from_ref(rec), pair, opts)
}

/// Ensemble correlator estimate: products are accumulated within each
/// record and averaged across all of them. Temporal and ensemble averaging
/// coincide for stationary records.
pub fn autocorrelate_ensemble(
    records: &[ReadoutRecord],
    pair: ReadoutPair,
    opts: &CorrelatorOptions,
) -> Result<CorrelationEstimate> {
    if records.is_empty() {
        return Err(Error::RecordTooShort { needed: 1, have: 0 });
    }
    let dt = records[0].dt;
    for r in records {
        if r.dt != dt {
            return Err(Error::MismatchedStep {
                left: dt,
                right: r.dt,
            });
        }
    }
    let tau = records[0].equal_tau()?;
    let total: u64 = records.iter().map(|r| r.len() as u64).sum();
    let spec = opts.spec(dt, total, records.len() as u64, vec![pair.indices()])?;
    let mut acc: MultiSeriesCorrelator<2> = MultiSeriesCorrelator::new(spec, dt)?;
    for rec in records {
        for k in 0..rec.len() {
            acc.push_sample(&[rec.r_x[k], rec.r_z[k]]);
        }
        acc.end_record();
    }
    let corrs = acc.finalize();
    let lags = corrs.lag_times();
    let factor = block_factor(corrs.block_len, dt, tau);
    let theory = exp_decay_theory(&lags, tau, pair.theory_amplitude(), factor);
    let (a, b) = pair.indices();
    Ok(CorrelationEstimate {
        label: pair.label().to_string(),
        values: corrs.values(a, b)?.to_vec(),
        stderr: corrs.stderr(a, b)?.to_vec(),
        theory: Some(theory),
        lag0: Some(corrs.lag0(a, b)?),
        n_samples: corrs.n_samples,
        lags,
    })
}

/// Correlator between two arbitrary synchronous series.
pub fn correlate_series(
    left: &[f64],
    right: &[f64],
    dt: f64,
    opts: &CorrelatorOptions,
    label: &str,
) -> Result<CorrelationEstimate> {
    if left.len() != right.len() {
        return Err(Error::LengthMismatch {
            left: left.len(),
            right: right.len(),
        });
    }
    let spec = opts.spec(dt, left.len() as u64, 1, vec![(0, 1)])?;
    let mut acc: MultiSeriesCorrelator<2> = MultiSeriesCorrelator::new(spec, dt)?;
    for (l, r) in left.iter().zip(right) {
        acc.push_sample(&[*l, *r]);
    }
    let corrs = acc.finalize();
    let lags = corrs.lag_times();
    Ok(CorrelationEstimate {
        label: label.to_string(),
        values: corrs.values(0, 1)?.to_vec(),
        stderr: corrs.stderr(0, 1)?.to_vec(),
        theory: None,
        lag0: Some(corrs.lag0(0, 1)?),
        n_samples: corrs.n_samples,
        lags,
    })
}

/// Adapter streaming trajectory steps into a six-series correlator:
/// readouts, state components, and scaled innovation noises.
pub struct TrajectoryCorrelatorSink {
    pub acc: MultiSeriesCorrelator<N_TRAJECTORY_SERIES>,
    sqrt_tau_x: f64,
    sqrt_tau_z: f64,
}

impl TrajectoryCorrelatorSink {
    pub fn new(acc: MultiSeriesCorrelator<N_TRAJECTORY_SERIES>, tau_x: f64, tau_z: f64) -> Self {
        Self {
            acc,
            sqrt_tau_x: tau_x.sqrt(),
            sqrt_tau_z: tau_z.sqrt(),
        }
    }
}

impl StepSink for TrajectoryCorrelatorSink {
    fn push(&mut self, sample: &StepSample) {
        self.acc.push_sample(&[
            sample.r_x,
            sample.r_z,
            sample.state.x,
            sample.state.z,
            self.sqrt_tau_x * sample.xi_x,
            self.sqrt_tau_z * sample.xi_z,
        ]);
    }
}

/// The standard pair set for full-record analysis: the four readout
/// correlators, the four state correlators, and the four noise-state
/// correlators entering the invasiveness constraints.
pub fn full_pair_set() -> Vec<(usize, usize)> {
    use SeriesId::*;
    [
        (Rx, Rx),
        (Rz, Rz),
        (Rx, Rz),
        (Rz, Rx),
        (X, X),
        (Z, Z),
        (X, Z),
        (Z, X),
        (NoiseX, X),
        (NoiseZ, Z),
        (NoiseX, Z),
        (NoiseZ, X),
    ]
    .iter()
    .map(|&(a, b)| (a.index(), b.index()))
    .collect()
}

/// Which noise-invasiveness constraint to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintEq {
    /// <x(0) x(t)> + sqrt(tau) <xi_x(0) x(t)> = exp(-t/2tau)
    A,
    /// <z(0) z(t)> + sqrt(tau) <xi_z(0) z(t)> = exp(-t/2tau)
    B,
    /// <x(0) z(t)> + sqrt(tau) <xi_x(0) z(t)> = 0
    C,
    /// <z(0) x(t)> + sqrt(tau) <xi_z(0) x(t)> = 0
    D,
}

impl ConstraintEq {
    pub const ALL: [ConstraintEq; 4] = [
        ConstraintEq::A,
        ConstraintEq::B,
        ConstraintEq::C,
        ConstraintEq::D,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ConstraintEq::A => "<x(0)x(t) + sqrt(tau) xi_x(0) x(t)>",
            ConstraintEq::B => "<z(0)z(t) + sqrt(tau) xi_z(0) z(t)>",
            ConstraintEq::C => "<x(0)z(t) + sqrt(tau) xi_x(0) z(t)>",
            ConstraintEq::D => "<z(0)x(t) + sqrt(tau) xi_z(0) x(t)>",
        }
    }

    pub fn short_label(self) -> &'static str {
        match self {
            ConstraintEq::A => "a",
            ConstraintEq::B => "b",
            ConstraintEq::C => "c",
            ConstraintEq::D => "d",
        }
    }

    pub fn state_pair(self) -> (usize, usize) {
        use SeriesId::*;
        match self {
            ConstraintEq::A => (X.index(), X.index()),
            ConstraintEq::B => (Z.index(), Z.index()),
            ConstraintEq::C => (X.index(), Z.index()),
            ConstraintEq::D => (Z.index(), X.index()),
        }
    }

    pub fn noise_pair(self) -> (usize, usize) {
        use SeriesId::*;
        match self {
            ConstraintEq::A => (NoiseX.index(), X.index()),
            ConstraintEq::B => (NoiseZ.index(), Z.index()),
            ConstraintEq::C => (NoiseX.index(), Z.index()),
            ConstraintEq::D => (NoiseZ.index(), X.index()),
        }
    }

    pub fn theory_amplitude(self) -> f64 {
        match self {
            ConstraintEq::A | ConstraintEq::B => 1.0,
            ConstraintEq::C | ConstraintEq::D => 0.0,
        }
    }
}

/// Constraint correlator with its decomposition into the bare state part
/// and the noise-invasiveness part. Only the sum is constrained by theory;
/// the split is a reported diagnostic.
#[derive(Debug, Clone)]
pub struct ConstraintEstimate {
    pub combined: CorrelationEstimate,
    pub state_part: Vec<f64>,
    pub noise_part: Vec<f64>,
}

/// Evaluates one constraint from already-accumulated trajectory
/// correlations.
pub fn constraint_from_correlations(
    corrs: &LaggedCorrelations,
    which: ConstraintEq,
    tau: f64,
) -> Result<ConstraintEstimate> {
    let terms = [(which.state_pair(), 1.0), (which.noise_pair(), 1.0)];
    let (values, stderr) = corrs.combo_curve(&terms)?;
    let lags = corrs.lag_times();
    let factor = block_factor(corrs.block_len, corrs.dt, tau);
    let theory = exp_decay_theory(&lags, tau, which.theory_amplitude(), factor);
    let (sa, sb) = which.state_pair();
    let (na, nb) = which.noise_pair();
    Ok(ConstraintEstimate {
        combined: CorrelationEstimate {
            label: which.label().to_string(),
            values,
            stderr,
            theory: Some(theory),
            lag0: None,
            n_samples: corrs.n_samples,
            lags,
        },
        state_part: corrs.values(sa, sb)?.to_vec(),
        noise_part: corrs.values(na, nb)?.to_vec(),
    })
}

/// Evaluates one constraint from a stored trajectory record with noise
/// provenance.
pub fn constraint_check(
    rec: &TrajectoryRecord,
    which: ConstraintEq,
    opts: &CorrelatorOptions,
) -> Result<ConstraintEstimate> {
    let noise = rec.noise()?;
    if rec.record_stride != 1 {
        return Err(Error::InvalidParam {
            name: "record_stride",
            reason: "constraint estimation needs per-step states (stride 1)".into(),
        });
    }
    let tau = rec.readouts.equal_tau()?;
    let n = rec.readouts.len();
    let spec = opts.spec(rec.dt, n as u64, 1, full_pair_set())?;
    let acc = MultiSeriesCorrelator::new(spec, rec.dt)?;
    let mut sink = TrajectoryCorrelatorSink::new(acc, rec.readouts.tau_x, rec.readouts.tau_z);
    for k in 0..n {
        sink.push(&StepSample {
            step: k,
            state: rec.states[k],
            r_x: rec.readouts.r_x[k],
            r_z: rec.readouts.r_z[k],
            xi_x: noise.xi_x[k],
            xi_z: noise.xi_z[k],
        });
    }
    constraint_from_correlations(&sink.acc.finalize(), which, tau)
}

/// Agreement report between two correlator estimates on the same lag grid.
#[derive(Debug, Clone)]
pub struct SteadyStateReport {
    pub label: String,
    /// max over lags of |a - b| / sqrt(se_a^2 + se_b^2)
    pub max_sigma: f64,
    pub pass: bool,
}

pub fn steady_state_check(
    a: &CorrelationEstimate,
    b: &CorrelationEstimate,
    n_sigma: f64,
) -> Result<SteadyStateReport> {
    if a.lags.len() != b.lags.len() {
        return Err(Error::LengthMismatch {
            left: a.lags.len(),
            right: b.lags.len(),
        });
    }
    let mut max_sigma = 0.0f64;
    for i in 0..a.values.len() {
        let joint = (a.stderr[i] * a.stderr[i] + b.stderr[i] * b.stderr[i]).sqrt();
        let sigma = (a.values[i] - b.values[i]).abs() / joint;
        max_sigma = max_sigma.max(sigma);
    }
    Ok(SteadyStateReport {
        label: format!("{} vs {}", a.label, b.label),
        max_sigma,
        pass: max_sigma <= n_sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::BlochState;
    use crate::trajectory::{run, Scheme, SimConfig};

    fn ar1_series(n: usize, rho: f64, seed: u64) -> Vec<f64> {
        use crate::noise::{NoiseStream, StreamKey, StreamRole};
        let mut stream = NoiseStream::new(seed, StreamKey::new(0, StreamRole::Physical));
        let mut out = Vec::with_capacity(n);
        let mut s = stream.next_standard_normal();
        let innov = (1.0 - rho * rho).sqrt();
        for _ in 0..n {
            out.push(s);
            s = rho * s + innov * stream.next_standard_normal();
        }
        out
    }

    #[test]
    fn kahan_compensates_small_terms() {
        let mut k = KahanSum::default();
        k.add(1.0);
        for _ in 0..1_000_000 {
            k.add(1e-17);
        }
        assert!((k.value() - (1.0 + 1e-11)).abs() < 1e-13);
    }

    #[test]
    fn block_factor_is_near_one_for_fine_blocks() {
        let f = block_factor(10, 0.01, 1.0);
        assert!((f - 1.0).abs() < 1e-4, "{f}");
        assert_eq!(block_factor(1, 0.01, 1.0), 1.0);
    }

    #[test]
    fn estimator_is_unbiased_on_ar1_oracle() {
        // AR(1) with lag-k autocorrelation rho^k and unit variance is the
        // discretized Ornstein-Uhlenbeck oracle.
        let rho: f64 = 0.9;
        let series = ar1_series(400_000, rho, 5);
        let opts = CorrelatorOptions {
            block_time: 1.0, // dt = 1 => raw lags
            max_lag_time: 10.0,
            burn_in_time: 100.0,
            n_batches: 20,
        };
        let est = correlate_series(&series, &series, 1.0, &opts, "ar1").unwrap();
        for (i, lag) in est.lags.iter().enumerate() {
            let theory = rho.powf(*lag);
            let dev = (est.values[i] - theory).abs();
            assert!(
                dev < 4.0 * est.stderr[i].max(1e-4),
                "lag {lag}: {} vs {theory} (se {})",
                est.values[i],
                est.stderr[i]
            );
        }
    }

    #[test]
    fn white_noise_correlator_vanishes_at_positive_lags() {
        let series = ar1_series(200_000, 0.0, 9);
        let opts = CorrelatorOptions {
            block_time: 1.0,
            max_lag_time: 5.0,
            burn_in_time: 0.0,
            n_batches: 20,
        };
        let est = correlate_series(&series, &series, 1.0, &opts, "white").unwrap();
        for (v, se) in est.values.iter().zip(&est.stderr) {
            assert!(v.abs() < 4.0 * se, "{v} vs se {se}");
        }
        // lag 0 carries the full variance
        assert!((est.lag0.unwrap() - 1.0).abs() < 0.02);
    }

    #[test]
    fn batch_error_shrinks_as_inverse_sqrt_batches() {
        // Fixed batch length, growing record: stderr ~ 1/sqrt(n_batches).
        let batch_len = 2_000usize;
        let counts = [5usize, 10, 20, 40];
        let mut errs = Vec::new();
        for &nb in &counts {
            let series = ar1_series(batch_len * nb, 0.5, 77);
            let opts = CorrelatorOptions {
                block_time: 1.0,
                max_lag_time: 2.0,
                burn_in_time: 0.0,
                n_batches: nb,
            };
            let est = correlate_series(&series, &series, 1.0, &opts, "scaling").unwrap();
            errs.push(est.stderr[0]);
        }
        let xs: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = cov / var;
        assert!((slope + 0.5).abs() < 0.25, "slope {slope}, errs {errs:?}");
    }

    #[test]
    fn readout_autocorrelator_matches_decay_on_short_run() {
        // Statistical smoke test at modest length; the acceptance suite
        // repeats this at full scale and tolerance.
        let cfg = SimConfig::new(
            BlochState::new_unchecked(0.0, 0.0, 1.0),
            Scheme::Kraus,
            0.01,
            1.0,
            2_000_000,
        );
        let rec = run(&cfg, 314, 0).unwrap();
        let opts = CorrelatorOptions::for_tau(1.0);
        let xx = autocorrelate(&rec.readouts, ReadoutPair::XX, &opts).unwrap();
        assert!(xx.max_abs_deviation().unwrap() < 0.12);
        let idx = xx.lags.iter().position(|&t| (t - 2.0).abs() < 1e-9).unwrap();
        let e1 = (-1.0f64).exp();
        assert!(
            (xx.values[idx] - e1).abs() < 0.1,
            "C(2tau) = {} vs {e1}",
            xx.values[idx]
        );

        let xz = autocorrelate(&rec.readouts, ReadoutPair::XZ, &opts).unwrap();
        assert!(xz.values.iter().all(|v| v.abs() < 0.12));
    }

    #[test]
    fn mismatched_ensemble_steps_rejected() {
        let mk = |dt: f64| ReadoutRecord {
            dt,
            tau_x: 1.0,
            tau_z: 1.0,
            r_x: vec![0.0; 100_000],
            r_z: vec![0.0; 100_000],
        };
        let recs = [mk(0.01), mk(0.02)];
        let opts = CorrelatorOptions::for_tau(1.0);
        assert!(matches!(
            autocorrelate_ensemble(&recs, ReadoutPair::XX, &opts),
            Err(Error::MismatchedStep { .. })
        ));
    }

    #[test]
    fn too_short_record_rejected() {
        let rec = ReadoutRecord {
            dt: 0.01,
            tau_x: 1.0,
            tau_z: 1.0,
            r_x: vec![0.0; 100],
            r_z: vec![0.0; 100],
        };
        let opts = CorrelatorOptions::for_tau(1.0);
        assert!(matches!(
            autocorrelate(&rec, ReadoutPair::XX, &opts),
            Err(Error::RecordTooShort { .. })
        ));
    }

    #[test]
    fn constraint_check_requires_provenance_and_full_states() {
        let cfg = SimConfig::new(
            BlochState::new_unchecked(0.0, 0.0, 1.0),
            Scheme::Kraus,
            0.01,
            1.0,
            100_000,
        );
        let rec = run(&cfg, 1, 0).unwrap();
        let opts = CorrelatorOptions::for_tau(1.0);
        assert!(matches!(
            constraint_check(&rec, ConstraintEq::A, &opts),
            Err(Error::MissingProvenance)
        ));
    }

    #[test]
    fn steady_state_check_identical_estimates_pass() {
        let series = ar1_series(100_000, 0.8, 3);
        let opts = CorrelatorOptions {
            block_time: 1.0,
            max_lag_time: 5.0,
            burn_in_time: 0.0,
            n_batches: 10,
        };
        let a = correlate_series(&series, &series, 1.0, &opts, "a").unwrap();
        let b = correlate_series(&series, &series, 1.0, &opts, "b").unwrap();
        let report = steady_state_check(&a, &b, 3.0).unwrap();
        assert!(report.pass);
        assert_eq!(report.max_sigma, 0.0);
    }

    #[test]
    fn ensemble_and_temporal_estimators_agree() {
        let temporal_cfg = SimConfig::new(
            BlochState::new_unchecked(0.0, 0.0, 1.0),
            Scheme::Kraus,
            0.01,
            1.0,
            1_000_000,
        );
        let long = run(&temporal_cfg, 500, 0).unwrap();
        let opts = CorrelatorOptions {
            block_time: 0.1,
            max_lag_time: 3.0,
            burn_in_time: 5.0,
            n_batches: 20,
        };
        let temporal = autocorrelate(&long.readouts, ReadoutPair::XX, &opts).unwrap();

        let ens_cfg = SimConfig::new(
            BlochState::new_unchecked(1.0, 0.0, 0.0),
            Scheme::Kraus,
            0.01,
            1.0,
            1_500,
        );
        let records = crate::trajectory::run_ensemble(&ens_cfg, 501, 1_000).unwrap();
        let readouts: Vec<ReadoutRecord> = records.into_iter().map(|r| r.readouts).collect();
        let ensemble = autocorrelate_ensemble(&readouts, ReadoutPair::XX, &opts).unwrap();

        let report = steady_state_check(&temporal, &ensemble, 3.5).unwrap();
        assert!(report.pass, "max sigma {}", report.max_sigma);
    }
}
