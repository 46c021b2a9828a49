//! Liquid state filtering and the quantitative measures built on it.

use nalgebra::{DMatrix, SVD};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liquid::Liquid;
use crate::patterns::{Pattern, SpikeTrain};
use crate::plasticity::train_pattern;
use crate::sim::{SpikeRecord, Simulator};

/// Time constant and sampling step of the liquid state filter (ms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateFilter {
    pub tau: f64,
    pub sample_step: f64,
}

impl Default for StateFilter {
    fn default() -> Self {
        Self { tau: 30.0, sample_step: 20.0 }
    }
}

impl StateFilter {
    fn check(&self) -> Result<()> {
        if !(self.tau > 0.0) || !(self.sample_step > 0.0) {
            return Err(Error::Config(format!(
                "state filter needs positive tau and sample step, got {} and {}",
                self.tau, self.sample_step
            )));
        }
        Ok(())
    }
}

/// Exponentially filtered firing of every neuron on a regular time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub duration: f64,
    pub times: Vec<f64>,
    /// One row of `L` values per sample time.
    pub states: Vec<Vec<f64>>,
}

/// `x_i(t) = sum_{s <= t} exp(-(t - s) / tau)` for every neuron `i`.
pub fn state_at(record: &SpikeRecord, t: f64, tau: f64) -> Vec<f64> {
    record
        .neurons
        .iter()
        .map(|spikes| {
            spikes
                .iter()
                .take_while(|&&s| s <= t)
                .map(|&s| (-(t - s) / tau).exp())
                .sum()
        })
        .collect()
}

/// Liquid state at the end of the record.
pub fn end_state(record: &SpikeRecord, tau: f64) -> Vec<f64> {
    state_at(record, record.duration, tau)
}

/// Sample the filtered state at `0, step, 2 step, ...` up to the record
/// duration inclusive.
pub fn filter_states(record: &SpikeRecord, filter: &StateFilter) -> Result<StateTrajectory> {
    filter.check()?;
    let n_samples = (record.duration / filter.sample_step + 1e-9).floor() as usize + 1;
    let times: Vec<f64> = (0..n_samples).map(|n| n as f64 * filter.sample_step).collect();
    let mut states = vec![vec![0.0; record.neurons.len()]; n_samples];
    for (i, spikes) in record.neurons.iter().enumerate() {
        // Sweep samples forward, carrying the decayed sum.
        let mut acc = 0.0;
        let mut t_acc = 0.0;
        let mut k = 0;
        for (n, &t) in times.iter().enumerate() {
            while k < spikes.len() && spikes[k] <= t {
                acc = acc * (-(spikes[k] - t_acc) / filter.tau).exp() + 1.0;
                t_acc = spikes[k];
                k += 1;
            }
            states[n][i] = acc * (-(t - t_acc) / filter.tau).exp();
        }
    }
    Ok(StateTrajectory { duration: record.duration, times, states })
}

/// Kernel of the input distance: a unit-peak exponential with time constant `tau` (ms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceKernel {
    pub tau: f64,
}

impl Default for DistanceKernel {
    fn default() -> Self {
        Self { tau: 5.0 }
    }
}

/// `sqrt((1/T) int_0^T (u~(t) - v~(t))^2 dt)` with both trains filtered by
/// the exponential kernel. The integrand is a decaying exponential between
/// spikes, so the integral is accumulated exactly piece by piece.
pub fn input_distance(u: &SpikeTrain, v: &SpikeTrain, duration: f64, kernel: &DistanceKernel) -> Result<f64> {
    if !(duration > 0.0) || !(kernel.tau > 0.0) {
        return Err(Error::Input(format!(
            "input distance needs positive duration and tau, got {duration} and {}",
            kernel.tau
        )));
    }
    for train in [u, v] {
        if let Some(&t) = train.times.iter().find(|&&t| !(0.0..=duration).contains(&t)) {
            return Err(Error::Input(format!("spike at {t} outside [0, {duration}]")));
        }
        if train.times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Input("spike times must be sorted".into()));
        }
    }
    let tau = kernel.tau;
    let (a, b) = (&u.times, &v.times);
    let (mut i, mut j) = (0, 0);
    let mut diff = 0.0;
    let mut t_prev = 0.0;
    let mut integral = 0.0;
    let mut segment = |diff: f64, from: f64, to: f64| {
        integral += diff * diff * tau / 2.0 * (-(-2.0 * (to - from) / tau).exp_m1());
    };
    while i < a.len() || j < b.len() {
        let t = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        segment(diff, t_prev, t);
        diff *= (-(t - t_prev) / tau).exp();
        while i < a.len() && a[i] == t {
            diff += 1.0;
            i += 1;
        }
        while j < b.len() && b[j] == t {
            diff -= 1.0;
            j += 1;
        }
        t_prev = t;
    }
    segment(diff, t_prev, duration);
    Ok((integral / duration).sqrt())
}

/// Mean input distance over the lines of two patterns.
pub fn pattern_distance(u: &[SpikeTrain], v: &[SpikeTrain], duration: f64, kernel: &DistanceKernel) -> Result<f64> {
    if u.len() != v.len() || u.is_empty() {
        return Err(Error::Shape { expected: u.len(), actual: v.len() });
    }
    let mut total = 0.0;
    for (a, b) in u.iter().zip(v) {
        total += input_distance(a, b, duration, kernel)?;
    }
    Ok(total / u.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Separation {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// Sum of the norms over samples strictly inside `(0, T)`.
    pub sum: f64,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn pairwise_separation(a: &StateTrajectory, b: &StateTrajectory) -> Result<Separation> {
    if a.times != b.times || a.duration != b.duration {
        return Err(Error::Shape { expected: a.times.len(), actual: b.times.len() });
    }
    let width = a.states.first().map_or(0, Vec::len);
    if let Some(row) = a.states.iter().chain(&b.states).find(|row| row.len() != width) {
        return Err(Error::Shape { expected: width, actual: row.len() });
    }
    let norms: Vec<f64> = a.states.iter().zip(&b.states).map(|(x, y)| euclidean(x, y)).collect();
    let sum = a
        .times
        .iter()
        .zip(&norms)
        .filter(|(&t, _)| t > 0.0 && t < a.duration)
        .map(|(_, &n)| n)
        .sum();
    Ok(Separation { times: a.times.clone(), norms, sum })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub rows: usize,
    pub cols: usize,
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    pub rank: usize,
}

/// Count singular values above `max(rows, cols) * sigma_max * eps`.
pub fn numerical_rank(m: &DMatrix<f64>) -> Result<RankReport> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(RankReport { rows, cols, singular_values: Vec::new(), threshold: 0.0, rank: 0 });
    }
    let svd = SVD::try_new(m.clone(), false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::Convergence("singular value decomposition did not converge".into()))?;
    let mut singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let sigma_max = singular_values[0];
    let threshold = rows.max(cols) as f64 * sigma_max * f64::EPSILON;
    let rank = singular_values.iter().filter(|&&s| s > threshold).count();
    Ok(RankReport { rows, cols, singular_values, threshold, rank })
}

/// `L x m` matrix whose columns are the given states.
pub fn state_matrix(columns: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let rows = columns.first().map_or(0, Vec::len);
    if let Some(c) = columns.iter().find(|c| c.len() != rows) {
        return Err(Error::Shape { expected: rows, actual: c.len() });
    }
    Ok(DMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i]))
}

/// End states of the liquid for each pattern; no plasticity.
pub fn end_states(liquid: &Liquid, patterns: &[Pattern], duration: f64, tau_state: f64) -> Result<Vec<Vec<f64>>> {
    let sim = Simulator::new(liquid)?;
    patterns
        .iter()
        .map(|p| Ok(end_state(&sim.run(p, duration)?, tau_state)))
        .collect()
}

/// Rank of the end-state matrix of `s >= 2` variants of one input.
pub fn generalization_rank(liquid: &Liquid, variants: &[Pattern], duration: f64, tau_state: f64) -> Result<RankReport> {
    if variants.len() < 2 {
        return Err(Error::Input(format!("need at least 2 variants, got {}", variants.len())));
    }
    let states = end_states(liquid, variants, duration, tau_state)?;
    numerical_rank(&state_matrix(&states)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankPoint {
    /// Patterns presented with plasticity so far.
    pub presented: usize,
    pub separation_rank: usize,
    pub generalization_rank: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub duration: f64,
    pub tau_state: f64,
    /// Probe the ranks after every `probe_every` presented patterns (and at the end).
    pub probe_every: usize,
}

/// Train on `trains` one pattern at a time and probe the separation rank of
/// all of them (and the generalization rank of `variants`, if any) on the
/// current liquid. The first point is the untrained liquid.
pub fn separation_rank_sweep(
    liquid: &mut Liquid,
    trains: &[Pattern],
    variants: &[Pattern],
    options: &SweepOptions,
    rng: &mut impl Rng,
) -> Result<Vec<RankPoint>> {
    if trains.len() < 2 {
        return Err(Error::Input(format!("rank sweep needs at least 2 trains, got {}", trains.len())));
    }
    let probe_every = options.probe_every.max(1);
    let probe = |liquid: &Liquid, presented: usize| -> Result<RankPoint> {
        let states = end_states(liquid, trains, options.duration, options.tau_state)?;
        let separation_rank = numerical_rank(&state_matrix(&states)?)?.rank;
        let generalization_rank = if variants.len() >= 2 {
            Some(generalization_rank(liquid, variants, options.duration, options.tau_state)?.rank)
        } else {
            None
        };
        Ok(RankPoint { presented, separation_rank, generalization_rank })
    };
    let mut points = vec![probe(liquid, 0)?];
    for (k, pattern) in trains.iter().enumerate() {
        train_pattern(liquid, pattern, options.duration, rng)?;
        let presented = k + 1;
        if presented % probe_every == 0 || presented == trains.len() {
            points.push(probe(liquid, presented)?);
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TlsSummary {
    /// Mean of `t_last(trained) - t_last(random)` over included trials (ms).
    pub diff_mean: f64,
    pub random_mean: f64,
    pub diffs: Vec<f64>,
    /// Trials dropped because one of their records had no spikes.
    pub excluded: Vec<usize>,
}

/// Time-to-last-spike difference over paired `(random, trained)` records.
pub fn tls_diff(pairs: &[(SpikeRecord, SpikeRecord)]) -> Result<TlsSummary> {
    let mut diffs = Vec::new();
    let mut random = Vec::new();
    let mut excluded = Vec::new();
    for (k, (r, t)) in pairs.iter().enumerate() {
        match (r.last_spike(), t.last_spike()) {
            (Some(lr), Some(lt)) => {
                diffs.push(lt - lr);
                random.push(lr);
            }
            _ => excluded.push(k),
        }
    }
    if diffs.is_empty() {
        return Err(Error::Input("no trial has spikes in both records".into()));
    }
    let n = diffs.len() as f64;
    Ok(TlsSummary {
        diff_mean: diffs.iter().sum::<f64>() / n,
        random_mean: random.iter().sum::<f64>() / n,
        diffs,
        excluded,
    })
}

/// Reported instead of an infinite ratio when classes have no spread.
pub const SEPARATION_SENTINEL: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassSeparation {
    pub value: f64,
    pub between: f64,
    pub within: f64,
    pub degenerate: bool,
}

/// Mean distance between class centroids over mean distance of samples to
/// their own centroid.
pub fn class_separation(states: &[Vec<f64>], labels: &[usize]) -> Result<ClassSeparation> {
    if states.len() != labels.len() {
        return Err(Error::Shape { expected: states.len(), actual: labels.len() });
    }
    let width = states.first().map_or(0, Vec::len);
    if let Some(s) = states.iter().find(|s| s.len() != width) {
        return Err(Error::Shape { expected: width, actual: s.len() });
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut counts = vec![0usize; n_classes];
    let mut centroids = vec![vec![0.0; width]; n_classes];
    for (s, &c) in states.iter().zip(labels) {
        counts[c] += 1;
        centroids[c].iter_mut().zip(s).for_each(|(a, x)| *a += x);
    }
    let present: Vec<usize> = (0..n_classes).filter(|&c| counts[c] > 0).collect();
    if present.len() < 2 {
        return Err(Error::Input("class separation needs at least 2 classes".into()));
    }
    if let Some(&c) = present.iter().find(|&&c| counts[c] < 2) {
        return Err(Error::Input(format!("class {c} has fewer than 2 samples")));
    }
    for &c in &present {
        centroids[c].iter_mut().for_each(|a| *a /= counts[c] as f64);
    }
    let within = states
        .iter()
        .zip(labels)
        .map(|(s, &c)| euclidean(s, &centroids[c]))
        .sum::<f64>()
        / states.len() as f64;
    let mut between = 0.0;
    let mut pairs = 0usize;
    for (k, &a) in present.iter().enumerate() {
        for &b in &present[k + 1..] {
            between += euclidean(&centroids[a], &centroids[b]);
            pairs += 1;
        }
    }
    between /= pairs as f64;
    let (value, degenerate) = if within > 0.0 {
        (between / within, false)
    } else if between > 0.0 {
        (SEPARATION_SENTINEL, true)
    } else {
        (0.0, true)
    };
    Ok(ClassSeparation { value, between, within, degenerate })
}
