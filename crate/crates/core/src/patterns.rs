//! Input stimuli: Poisson trains, distance-controlled pairs, jittered class
//! templates and burst trains.
//!
//! All generators draw from the caller's RNG, so they are pure functions of
//! their parameters and the RNG seed. Trains are kept sorted and any two
//! spikes closer than the minimum separation are merged into the earlier one.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{Error, Result};
use crate::metrics::{input_distance, DistanceKernel};

/// Default minimum inter-spike separation, equal to the simulation step.
pub const MIN_SEPARATION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrain {
    pub line: usize,
    pub duration: f64,
    pub times: Vec<f64>,
}

impl SpikeTrain {
    pub fn new(line: usize, duration: f64, times: Vec<f64>) -> Self {
        Self { line, duration, times }
    }

    pub fn empty(line: usize, duration: f64) -> Self {
        Self::new(line, duration, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_valid(&self, min_separation: f64) -> bool {
        self.times.iter().all(|&t| (0.0..=self.duration).contains(&t))
            && self.times.windows(2).all(|w| w[1] - w[0] >= min_separation)
    }
}

/// A multi-line stimulus; `trains[k]` drives input line `k`.
pub type Pattern = Vec<SpikeTrain>;

/// Sort, clamp to `[0, duration]` and drop spikes closer than `min_sep` to
/// the previously kept spike.
fn normalize(mut times: Vec<f64>, duration: f64, min_sep: f64) -> Vec<f64> {
    for t in times.iter_mut() {
        *t = t.clamp(0.0, duration);
    }
    times.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(times.len());
    for t in times {
        match out.last() {
            Some(&prev) if t - prev < min_sep => {}
            _ => out.push(t),
        }
    }
    out
}

/// Homogeneous Poisson train at `rate` Hz over `duration` ms.
pub fn poisson_train(rate: f64, duration: f64, rng: &mut impl Rng) -> SpikeTrain {
    let mut times = Vec::new();
    if rate > 0.0 {
        let gaps = Exp::new(rate / 1000.0).expect("positive rate");
        let mut t = gaps.sample(rng);
        while t <= duration {
            times.push(t);
            t += gaps.sample(rng);
        }
    }
    SpikeTrain::new(0, duration, normalize(times, duration, MIN_SEPARATION))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairParams {
    pub rate: f64,
    pub duration: f64,
    pub kernel: DistanceKernel,
    /// Jitter standard deviation (ms) at full perturbation magnitude.
    pub max_jitter: f64,
    /// Fraction of spikes deleted at full magnitude.
    pub max_deletion: f64,
    /// Insertion pool size relative to the base spike count.
    pub insertion_pool: f64,
}

impl Default for PairParams {
    fn default() -> Self {
        Self {
            rate: 20.0,
            duration: 1000.0,
            kernel: DistanceKernel::default(),
            max_jitter: 20.0,
            max_deletion: 0.5,
            insertion_pool: 4.0,
        }
    }
}

const PAIR_ATTEMPTS: usize = 200;
const BISECTION_STEPS: usize = 30;

/// Perturbation draws fixed for one attempt so that the measured distance
/// varies smoothly with the magnitude.
struct Perturbation {
    jitter: Vec<f64>,
    delete_draw: Vec<f64>,
    insert_times: Vec<f64>,
    insert_draw: Vec<f64>,
}

impl Perturbation {
    fn draw(base: &SpikeTrain, params: &PairParams, rng: &mut impl Rng) -> Self {
        let n = base.len();
        let pool = ((n.max(1) as f64) * params.insertion_pool).ceil() as usize;
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        Self {
            jitter: (0..n).map(|_| std.sample(rng)).collect(),
            delete_draw: (0..n).map(|_| rng.random()).collect(),
            insert_times: (0..pool).map(|_| rng.random::<f64>() * base.duration).collect(),
            insert_draw: (0..pool).map(|_| rng.random()).collect(),
        }
    }

    fn apply(&self, base: &SpikeTrain, magnitude: f64, params: &PairParams) -> SpikeTrain {
        let mut times = Vec::with_capacity(base.len() + self.insert_times.len());
        for (k, &t) in base.times.iter().enumerate() {
            if self.delete_draw[k] < magnitude * params.max_deletion {
                continue;
            }
            times.push(t + magnitude * params.max_jitter * self.jitter[k]);
        }
        for (k, &t) in self.insert_times.iter().enumerate() {
            if self.insert_draw[k] < magnitude {
                times.push(t);
            }
        }
        SpikeTrain::new(base.line, base.duration, normalize(times, base.duration, MIN_SEPARATION))
    }
}

/// Generate `(u, v)` whose input distance lies within `tolerance` of `target`.
///
/// `u` is Poisson; `v` is `u` with jittered, deleted and inserted spikes. The
/// perturbation magnitude is bisected against the measured distance; each
/// fresh perturbation draw counts as one attempt. A `u` too sparse to reach
/// the target even at full magnitude is redrawn.
pub fn pair_at_distance(
    target: f64,
    tolerance: f64,
    params: &PairParams,
    rng: &mut impl Rng,
) -> Result<(SpikeTrain, SpikeTrain)> {
    if !(target >= 0.0) {
        return Err(Error::Input(format!("target distance must be >= 0, got {target}")));
    }
    let mut u = poisson_train(params.rate, params.duration, rng);
    if target == 0.0 {
        return Ok((u.clone(), u));
    }
    for _ in 0..PAIR_ATTEMPTS {
        let measure = |v: &SpikeTrain| input_distance(&u, v, params.duration, &params.kernel);
        let draw = Perturbation::draw(&u, params, rng);
        let (mut lo, mut hi) = (0.0, 1.0);
        let top = draw.apply(&u, hi, params);
        let d_top = measure(&top)?;
        if (d_top - target).abs() <= tolerance {
            return Ok((u, top));
        }
        if d_top < target {
            u = poisson_train(params.rate, params.duration, rng);
            continue;
        }
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            let v = draw.apply(&u, mid, params);
            let d = measure(&v)?;
            if (d - target).abs() <= tolerance {
                return Ok((u, v));
            }
            if d < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    Err(Error::Convergence(format!(
        "no pair within {tolerance} of distance {target} after {PAIR_ATTEMPTS} attempts"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemplateParams {
    pub n_lines: usize,
    pub duration: f64,
    pub gap_mean: f64,
    pub gap_std: f64,
}

impl Default for TemplateParams {
    fn default() -> Self {
        Self {
            n_lines: 8,
            duration: 1000.0,
            gap_mean: 10.0,
            gap_std: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassTemplate {
    pub class: usize,
    pub trains: Pattern,
}

/// Random class template: per line, inter-spike gaps `|N(gap_mean, gap_std)|`
/// accumulated until the duration is exceeded.
pub fn class_template(class: usize, params: &TemplateParams, rng: &mut impl Rng) -> ClassTemplate {
    let gaps = Normal::new(params.gap_mean, params.gap_std).expect("finite gap distribution");
    let trains = (0..params.n_lines)
        .map(|line| {
            let mut times = Vec::new();
            let mut t = gaps.sample(rng).abs();
            while t <= params.duration {
                times.push(t);
                t += gaps.sample(rng).abs();
            }
            SpikeTrain::new(line, params.duration, normalize(times, params.duration, MIN_SEPARATION))
        })
        .collect();
    ClassTemplate { class, trains }
}

/// Shift every spike by `N(0, sigma)`, clamp to the train window, re-sort and
/// merge collisions.
pub fn jitter(trains: &[SpikeTrain], sigma: f64, rng: &mut impl Rng) -> Pattern {
    if sigma == 0.0 {
        return trains.to_vec();
    }
    let noise = Normal::new(0.0, sigma).expect("finite jitter");
    trains
        .iter()
        .map(|train| {
            let times = train.times.iter().map(|&t| t + noise.sample(rng)).collect();
            SpikeTrain::new(train.line, train.duration, normalize(times, train.duration, MIN_SEPARATION))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BurstOnset {
    /// Uniform in `[lo, hi] * duration`.
    Uniform { lo: f64, hi: f64 },
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurstParams {
    pub duration: f64,
    pub background_rate: f64,
    pub burst_spikes: usize,
    pub burst_rate: f64,
    pub onset: BurstOnset,
}

impl Default for BurstParams {
    fn default() -> Self {
        Self {
            duration: 1000.0,
            background_rate: 2.0,
            burst_spikes: 10,
            burst_rate: 200.0,
            onset: BurstOnset::Uniform { lo: 0.2, hi: 0.7 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BurstTrain {
    pub train: SpikeTrain,
    pub burst_start: f64,
    pub burst_end: f64,
}

/// Background Poisson activity plus one regular high-rate burst.
pub fn burst_train(params: &BurstParams, rng: &mut impl Rng) -> BurstTrain {
    let background = poisson_train(params.background_rate, params.duration, rng);
    let start = match params.onset {
        BurstOnset::Uniform { lo, hi } => params.duration * (lo + (hi - lo) * rng.random::<f64>()),
        BurstOnset::Fixed(t) => t,
    };
    let gap = 1000.0 / params.burst_rate;
    let burst: Vec<f64> = (0..params.burst_spikes).map(|k| start + k as f64 * gap).collect();
    let end = burst.last().copied().unwrap_or(start);

    // Burst spikes take precedence over colliding background spikes.
    let mut times: Vec<f64> = background
        .times
        .into_iter()
        .filter(|t| burst.iter().all(|b| (t - b).abs() >= MIN_SEPARATION))
        .collect();
    times.extend(&burst);
    BurstTrain {
        train: SpikeTrain::new(0, params.duration, normalize(times, params.duration, MIN_SEPARATION)),
        burst_start: start,
        burst_end: end,
    }
}

/// Render a pattern as `line_id time_ms` rows sorted by time.
pub fn format_pattern(pattern: &[SpikeTrain]) -> String {
    let mut rows: Vec<(f64, usize)> = pattern
        .iter()
        .flat_map(|tr| tr.times.iter().map(move |&t| (t, tr.line)))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let duration = pattern.first().map_or(0.0, |t| t.duration);
    let mut out = format!("# lines={} duration={}\n", pattern.len(), duration);
    for (t, line) in rows {
        let _ = writeln!(out, "{line} {t}");
    }
    out
}

pub fn parse_pattern(text: &str) -> Result<Pattern> {
    let mut lines = None;
    let mut duration = None;
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let err = |message: String| Error::Parse { line: lineno, message };
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            for field in header.split_whitespace() {
                match field.split_once('=') {
                    Some(("lines", v)) => lines = Some(v.parse::<usize>().map_err(|e| err(e.to_string()))?),
                    Some(("duration", v)) => duration = Some(v.parse::<f64>().map_err(|e| err(e.to_string()))?),
                    _ => {}
                }
            }
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(err("expected `line_id time_ms`".into()));
        };
        let line_id: usize = a.parse().map_err(|e| err(format!("bad line id: {e}")))?;
        let t: f64 = b.parse().map_err(|e| err(format!("bad time: {e}")))?;
        rows.push((line_id, t));
    }
    let duration = duration.ok_or(Error::Parse {
        line: 1,
        message: "missing duration header".into(),
    })?;
    let n_lines = lines.unwrap_or_else(|| rows.iter().map(|r| r.0 + 1).max().unwrap_or(0));
    let mut trains: Pattern = (0..n_lines).map(|l| SpikeTrain::empty(l, duration)).collect();
    for (line, t) in rows {
        let train = trains
            .get_mut(line)
            .ok_or_else(|| Error::Input(format!("line id {line} exceeds declared line count {n_lines}")))?;
        train.times.push(t);
    }
    for train in &mut trains {
        train.times.sort_by(f64::total_cmp);
    }
    Ok(trains)
}

pub fn write_pattern(path: impl AsRef<Path>, pattern: &[SpikeTrain]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_pattern(pattern)).map_err(|e| Error::io(path, e))
}

pub fn read_pattern(path: impl AsRef<Path>) -> Result<Pattern> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pattern(&text)
}

/// One dataset entry for the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub class: usize,
    pub split: Split,
    pub pattern: Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Write every pattern to `dir/patterns/` and a `manifest.csv` with
/// `class,split,file` rows.
pub fn write_dataset(dir: impl AsRef<Path>, entries: &[DatasetEntry]) -> Result<()> {
    let dir = dir.as_ref();
    let pattern_dir = dir.join("patterns");
    std::fs::create_dir_all(&pattern_dir).map_err(|e| Error::io(&pattern_dir, e))?;
    let manifest = dir.join("manifest.csv");
    let mut writer = csv::Writer::from_path(&manifest)?;
    writer.write_record(["class", "split", "file"])?;
    for (k, entry) in entries.iter().enumerate() {
        let name = format!("patterns/{k:06}.txt");
        write_pattern(dir.join(&name), &entry.pattern)?;
        writer.write_record([entry.class.to_string(), entry.split.as_str().to_string(), name])?;
    }
    writer.flush().map_err(|e| Error::io(&manifest, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_rate_is_empty() {
        assert!(poisson_train(0.0, 1000.0, &mut rng(1)).is_empty());
    }

    #[test]
    fn poisson_is_deterministic_and_valid() {
        let a = poisson_train(20.0, 1000.0, &mut rng(5));
        let b = poisson_train(20.0, 1000.0, &mut rng(5));
        assert_eq!(a, b);
        assert!(a.is_valid(MIN_SEPARATION));
    }

    #[test]
    fn poisson_count_statistics() {
        // 1000 trains at 20 Hz over 1 s: mean 20, standard error sqrt(20/1000).
        let mut r = rng(77);
        let n = 1000;
        let total: usize = (0..n).map(|_| poisson_train(20.0, 1000.0, &mut r).len()).sum();
        let mean = total as f64 / n as f64;
        let band = 3.0 * (20.0f64 / n as f64).sqrt();
        assert!((mean - 20.0).abs() < band, "mean {mean}, band {band}");
    }

    #[test]
    fn zero_target_pair_is_identical() {
        let (u, v) = pair_at_distance(0.0, 0.01, &PairParams::default(), &mut rng(3)).unwrap();
        assert_eq!(u, v);
    }

    #[test]
    fn pair_meets_tolerance() {
        let params = PairParams::default();
        for (seed, target) in [(1u64, 0.1), (2, 0.2), (3, 0.4)] {
            let (u, v) = pair_at_distance(target, 0.05 * target, &params, &mut rng(seed)).unwrap();
            let d = input_distance(&u, &v, params.duration, &params.kernel).unwrap();
            assert!((d - target).abs() <= 0.05 * target, "target {target}, got {d}");
            assert!(v.is_valid(MIN_SEPARATION));
        }
    }

    #[test]
    fn negative_target_rejected() {
        assert!(pair_at_distance(-0.1, 0.01, &PairParams::default(), &mut rng(1)).is_err());
    }

    #[test]
    fn template_gap_matches_folded_normal_mean() {
        // E|N(10, 20)| = s*sqrt(2/pi)*exp(-m^2/2s^2) + m*(1 - 2*Phi(-m/s)) = 17.91 ms.
        let folded = 20.0 * (2.0 / std::f64::consts::PI).sqrt() * (-0.125f64).exp()
            + 10.0 * (1.0 - 2.0 * 0.308_537_538_725_986_9);
        let params = TemplateParams {
            n_lines: 1,
            duration: 1.0e5 * 18.0,
            ..TemplateParams::default()
        };
        let t = class_template(0, &params, &mut rng(8));
        let times = &t.trains[0].times;
        let mean_gap = times.last().unwrap() / times.len() as f64;
        assert!(times.len() > 90_000);
        assert!((mean_gap - folded).abs() / folded < 0.05, "{mean_gap} vs {folded}");
    }

    #[test]
    fn template_is_deterministic_and_bounded() {
        let p = TemplateParams::default();
        let a = class_template(2, &p, &mut rng(4));
        let b = class_template(2, &p, &mut rng(4));
        assert_eq!(a, b);
        assert_eq!(a.trains.len(), 8);
        for tr in &a.trains {
            assert!(tr.times.iter().all(|&t| t <= p.duration));
            assert!(tr.is_valid(MIN_SEPARATION));
        }
    }

    #[test]
    fn zero_jitter_is_identity() {
        let t = class_template(0, &TemplateParams::default(), &mut rng(4));
        assert_eq!(jitter(&t.trains, 0.0, &mut rng(9)), t.trains);
    }

    #[test]
    fn jitter_mean_displacement_is_half_normal() {
        // Widely spaced spikes so no clamping or merging happens.
        let times: Vec<f64> = (0..100_000).map(|k| 100.0 + 1000.0 * k as f64).collect();
        let train = SpikeTrain::new(0, 1.0e8, times.clone());
        let jittered = jitter(&[train], 5.0, &mut rng(12));
        let moved = &jittered[0].times;
        assert_eq!(moved.len(), times.len());
        let mean = moved.iter().zip(&times).map(|(a, b)| (a - b).abs()).sum::<f64>() / times.len() as f64;
        let expected = 5.0 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean - expected).abs() / expected < 0.01, "{mean} vs {expected}");
    }

    #[test]
    fn jitter_preserves_count_up_to_merges() {
        let t = class_template(0, &TemplateParams::default(), &mut rng(4));
        let j = jitter(&t.trains, 5.0, &mut rng(10));
        for (a, b) in t.trains.iter().zip(&j) {
            assert!(b.len() <= a.len());
            assert!(b.is_valid(MIN_SEPARATION));
        }
    }

    #[test]
    fn burst_spans_45_ms() {
        let b = burst_train(&BurstParams::default(), &mut rng(6));
        assert!((b.burst_end - b.burst_start - 45.0).abs() < 1e-9);
        assert!(b.burst_start >= 200.0 && b.burst_start <= 700.0);
        let inside = b.train.times.iter().filter(|&&t| t >= b.burst_start && t <= b.burst_end).count();
        assert!(inside >= 10);
        assert!(b.train.is_valid(MIN_SEPARATION));
    }

    #[test]
    fn burst_is_deterministic_and_fixable() {
        let a = burst_train(&BurstParams::default(), &mut rng(6));
        let b = burst_train(&BurstParams::default(), &mut rng(6));
        assert_eq!(a, b);
        let fixed = BurstParams {
            onset: BurstOnset::Fixed(500.0),
            ..BurstParams::default()
        };
        assert_eq!(burst_train(&fixed, &mut rng(1)).burst_start, 500.0);
    }

    #[test]
    fn pattern_text_round_trip() {
        let t = class_template(0, &TemplateParams::default(), &mut rng(4));
        let back = parse_pattern(&format_pattern(&t.trains)).unwrap();
        assert_eq!(back, t.trains);
    }

    #[test]
    fn dataset_manifest_lists_entries() {
        let dir = tempfile::tempdir().unwrap();
        let t = class_template(1, &TemplateParams::default(), &mut rng(4));
        let entries = vec![
            DatasetEntry { class: 1, split: Split::Train, pattern: t.trains.clone() },
            DatasetEntry { class: 1, split: Split::Test, pattern: t.trains.clone() },
        ];
        write_dataset(dir.path(), &entries).unwrap();
        let manifest = std::fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
        assert_eq!(manifest.lines().count(), 3);
        assert!(manifest.contains("1,test,patterns/000001.txt"));
        let back = read_pattern(dir.path().join("patterns/000000.txt")).unwrap();
        assert_eq!(back, t.trains);
    }
}
