//! Per-trial experiment protocols.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, ExperimentKind};
use super::{MetricRow, TrialOutput};
use crate::error::Result;
use crate::liquid::{build_liquid, serialize_connection_table, Liquid};
use crate::metrics::{
    class_separation, end_state, end_states, filter_states, pairwise_separation,
    separation_rank_sweep, SweepOptions,
};
use crate::patterns::{burst_train, class_template, jitter, pair_at_distance, poisson_train, Pattern, SpikeTrain};
use crate::plasticity::train_pattern;
use crate::readout::train_readout;
use crate::rng::{derived_seed, stream, Purpose};
use crate::sim::{calibrate_scale, Simulator};

/// Pseudo trial index for inputs shared by every trial.
pub const SHARED_TRIAL: usize = 1 << 40;

/// Inputs generated once per experiment from the master seed.
#[derive(Debug, Clone, Default)]
pub struct SharedInputs {
    /// `(target distance, u, v)` for the pairwise protocol.
    pub pairs: Vec<(f64, SpikeTrain, SpikeTrain)>,
}

impl SharedInputs {
    pub fn generate(config: &ExperimentConfig) -> Result<Self> {
        if config.kind != ExperimentKind::Pairwise {
            return Ok(Self::default());
        }
        let mut rng = stream(config.seed, SHARED_TRIAL, Purpose::Patterns);
        let params = config.common.pair_params();
        let pairs = config
            .pairwise
            .distances
            .iter()
            .map(|&d| {
                let (u, v) = pair_at_distance(d, config.common.pair_tolerance, &params, &mut rng)?;
                Ok((d, u, v))
            })
            .collect::<Result<_>>()?;
        Ok(Self { pairs })
    }
}

struct Trial<'a> {
    config: &'a ExperimentConfig,
    trial: usize,
    rows: Vec<MetricRow>,
    notes: Vec<String>,
    seeds: BTreeMap<String, u64>,
    pre_table: Option<String>,
    post_table: Option<String>,
}

impl<'a> Trial<'a> {
    fn rng(&self, purpose: Purpose) -> ChaCha8Rng {
        stream(self.config.seed, self.trial, purpose)
    }

    fn duration(&self) -> f64 {
        self.config.common.duration
    }

    fn push(&mut self, metric: impl Into<String>, x: f64, value: f64) {
        self.rows.push(MetricRow { metric: metric.into(), x, value });
    }

    fn poisson(&self, rng: &mut ChaCha8Rng) -> Pattern {
        let n_lines = self.config.liquid_config().n_input_lines;
        (0..n_lines)
            .map(|line| {
                let mut t = poisson_train(self.config.common.input_rate, self.duration(), rng);
                t.line = line;
                t
            })
            .collect()
    }

    /// Build the trial's liquid for `purpose` and calibrate it on `reference`.
    fn liquid(&mut self, purpose: Purpose, reference: &[SpikeTrain]) -> Result<Liquid> {
        let seed = derived_seed(self.config.seed, self.trial, purpose);
        self.seeds.insert(format!("{purpose:?}").to_lowercase(), seed);
        let mut liquid = build_liquid(&self.config.liquid_config(), seed)?;
        if self.config.common.calibrate {
            let cal = calibrate_scale(&liquid, reference, self.duration(), self.config.common.rate_band)?;
            liquid.config.weight_scale = cal.scale;
            self.notes.push(format!(
                "{purpose:?} liquid calibrated: scale {} rate {:.3} Hz",
                cal.scale, cal.rate
            ));
        }
        Ok(liquid)
    }

    fn reference(&self) -> Pattern {
        self.poisson(&mut self.rng(Purpose::Probe))
    }

    fn trajectory(&self, sim: &Simulator, input: &[SpikeTrain]) -> Result<crate::metrics::StateTrajectory> {
        filter_states(&sim.run(input, self.duration())?, &self.config.common.state_filter())
    }

    fn train(&self, liquid: &mut Liquid, patterns: &[Pattern], iterations: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
        let mut swaps = 0;
        for _ in 0..iterations {
            for p in patterns {
                swaps += train_pattern(liquid, p, self.duration(), rng)?.swaps.len();
            }
        }
        Ok(swaps)
    }

    fn end_distance(&self, liquid: &Liquid, u: &[SpikeTrain], v: &[SpikeTrain]) -> Result<f64> {
        let states = end_states(liquid, &[u.to_vec(), v.to_vec()], self.duration(), self.config.common.state_tau)?;
        Ok(states[0].iter().zip(&states[1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
    }

    fn pair(&self, distance: f64, rng: &mut ChaCha8Rng) -> Result<(Pattern, Pattern)> {
        let (u, v) = pair_at_distance(distance, self.config.common.pair_tolerance, &self.config.common.pair_params(), rng)?;
        Ok((vec![u], vec![v]))
    }
}

pub fn run_trial(config: &ExperimentConfig, shared: &SharedInputs, trial: usize) -> Result<TrialOutput> {
    let mut t = Trial {
        config,
        trial,
        rows: Vec::new(),
        notes: Vec::new(),
        seeds: BTreeMap::new(),
        pre_table: None,
        post_table: None,
    };
    match config.kind {
        ExperimentKind::Pairwise => pairwise(&mut t, shared)?,
        ExperimentKind::SameLiquidDiffInput => same_liquid(&mut t)?,
        ExperimentKind::DistanceSweep => distance_sweep(&mut t)?,
        ExperimentKind::RankSweep => rank_sweep(&mut t, config.rank.probe_every)?,
        ExperimentKind::Generalization => rank_sweep(&mut t, config.rank.trains)?,
        ExperimentKind::Generality => generality(&mut t)?,
        ExperimentKind::FadingMemory => fading_memory(&mut t)?,
        ExperimentKind::ConnectivityHistogram => connectivity(&mut t)?,
        ExperimentKind::Classify => classify(&mut t)?,
    }
    Ok(TrialOutput {
        rows: t.rows,
        notes: t.notes,
        seeds: t.seeds,
        pre_table: t.pre_table,
        post_table: t.post_table,
    })
}

fn pairwise(t: &mut Trial, shared: &SharedInputs) -> Result<()> {
    let iterations = t.config.pairwise.iterations;
    let reference = t.reference();
    let base = t.liquid(Purpose::Liquid, &reference)?;
    t.pre_table = Some(serialize_connection_table(&base));
    let mut rng = t.rng(Purpose::Plasticity);
    let mut last_trained = None;
    for (d, u, v) in &shared.pairs {
        let (u, v) = (vec![u.clone()], vec![v.clone()]);
        let (random, trained) = if *d == 0.0 {
            // Noise floor: the same train on two independently built liquids.
            let other = t.liquid(Purpose::SecondLiquid, &reference)?;
            let random = pairwise_separation(
                &t.trajectory(&Simulator::new(&base)?, &u)?,
                &t.trajectory(&Simulator::new(&other)?, &u)?,
            )?;
            let mut a = base.clone();
            let mut b = other;
            t.train(&mut a, &[u.clone(), u.clone()], iterations, &mut rng)?;
            t.train(&mut b, &[u.clone(), u.clone()], iterations, &mut rng)?;
            let trained = pairwise_separation(
                &t.trajectory(&Simulator::new(&a)?, &u)?,
                &t.trajectory(&Simulator::new(&b)?, &u)?,
            )?;
            (random, trained)
        } else {
            let sim = Simulator::new(&base)?;
            let random = pairwise_separation(&t.trajectory(&sim, &u)?, &t.trajectory(&sim, &v)?)?;
            let mut a = base.clone();
            t.train(&mut a, &[u.clone(), v.clone()], iterations, &mut rng)?;
            let sim = Simulator::new(&a)?;
            let trained = pairwise_separation(&t.trajectory(&sim, &u)?, &t.trajectory(&sim, &v)?)?;
            last_trained = Some(a);
            (random, trained)
        };
        t.push("separation_sum_random", *d, random.sum);
        t.push("separation_sum_trained", *d, trained.sum);
        for (k, &time) in random.times.iter().enumerate() {
            t.push(format!("state_distance_random_d{d}"), time, random.norms[k]);
            t.push(format!("state_distance_trained_d{d}"), time, trained.norms[k]);
        }
    }
    t.post_table = last_trained.map(|l| serialize_connection_table(&l));
    Ok(())
}

fn same_liquid(t: &mut Trial) -> Result<()> {
    let p = t.config.same_liquid.clone();
    let reference = t.reference();
    let random = t.liquid(Purpose::Liquid, &reference)?;
    t.pre_table = Some(serialize_connection_table(&random));
    let mut prng = t.rng(Purpose::Patterns);
    let training: Vec<Pattern> = (0..p.training_patterns).map(|_| t.poisson(&mut prng)).collect();
    let pairs: Vec<(Pattern, Pattern)> = (0..p.pairs).map(|_| t.pair(p.distance, &mut prng)).collect::<Result<_>>()?;

    let mut trained = random.clone();
    t.train(&mut trained, &training, 1, &mut t.rng(Purpose::Plasticity))?;
    t.post_table = Some(serialize_connection_table(&trained));

    for (label, liquid) in [("random", &random), ("trained", &trained)] {
        let sim = Simulator::new(liquid)?;
        let mut mean_norms: Vec<f64> = Vec::new();
        let mut times = Vec::new();
        let mut mean_sum = 0.0;
        for (u, v) in &pairs {
            let sep = pairwise_separation(&t.trajectory(&sim, u)?, &t.trajectory(&sim, v)?)?;
            if mean_norms.is_empty() {
                mean_norms = vec![0.0; sep.norms.len()];
                times = sep.times.clone();
            }
            mean_norms.iter_mut().zip(&sep.norms).for_each(|(m, n)| *m += n / pairs.len() as f64);
            mean_sum += sep.sum / pairs.len() as f64;
        }
        for (time, value) in times.iter().zip(&mean_norms) {
            t.push(format!("state_distance_{label}"), *time, *value);
        }
        t.push(format!("separation_sum_{label}"), p.distance, mean_sum);
    }
    Ok(())
}

fn distance_sweep(t: &mut Trial) -> Result<()> {
    let p = t.config.distance_sweep.clone();
    let reference = t.reference();
    let base = t.liquid(Purpose::Liquid, &reference)?;
    t.pre_table = Some(serialize_connection_table(&base));
    let mut prng = t.rng(Purpose::Patterns);
    let mut rng = t.rng(Purpose::Plasticity);
    let kernel = t.config.common.distance_kernel();
    for &d in &p.distances {
        let (u, v) = t.pair(d, &mut prng)?;
        let measured = crate::metrics::input_distance(&u[0], &v[0], t.duration(), &kernel)?;
        let random = t.end_distance(&base, &u, &v)?;
        let mut trained = base.clone();
        t.train(&mut trained, &[u.clone(), v.clone()], p.iterations, &mut rng)?;
        let after = t.end_distance(&trained, &u, &v)?;
        t.push("input_distance", d, measured);
        t.push("state_distance_random", d, random);
        t.push("state_distance_trained", d, after);
        if random > 0.0 {
            t.push("ratio", d, after / random);
        } else {
            t.notes.push(format!("distance {d}: random state distance is zero, ratio omitted"));
        }
        t.post_table = Some(serialize_connection_table(&trained));
    }
    Ok(())
}

fn rank_sweep(t: &mut Trial, probe_every: usize) -> Result<()> {
    let p = t.config.rank.clone();
    let reference = t.reference();
    let mut liquid = t.liquid(Purpose::Liquid, &reference)?;
    t.pre_table = Some(serialize_connection_table(&liquid));
    let mut prng = t.rng(Purpose::Patterns);
    let trains: Vec<Pattern> = (0..p.trains).map(|_| t.poisson(&mut prng)).collect();
    let base = t.poisson(&mut prng);
    let variants: Vec<Pattern> = (0..p.variants).map(|_| jitter(&base, p.jitter, &mut prng)).collect();
    let options = SweepOptions {
        duration: t.duration(),
        tau_state: t.config.common.state_tau,
        probe_every,
    };
    let points = separation_rank_sweep(&mut liquid, &trains, &variants, &options, &mut t.rng(Purpose::Plasticity))?;
    for pt in &points {
        t.push("separation_rank", pt.presented as f64, pt.separation_rank as f64);
        if let Some(rg) = pt.generalization_rank {
            t.push("generalization_rank", pt.presented as f64, rg as f64);
        }
    }
    let (first, last) = (&points[0], &points[points.len() - 1]);
    if first.separation_rank > 0 {
        t.push("separation_rank_ratio", 0.0, last.separation_rank as f64 / first.separation_rank as f64);
    } else {
        t.notes.push("initial separation rank is zero, ratio omitted".into());
    }
    if let (Some(a), Some(b)) = (first.generalization_rank, last.generalization_rank) {
        t.push("generalization_rank_change", 0.0, b as f64 - a as f64);
    }
    t.post_table = Some(serialize_connection_table(&liquid));
    Ok(())
}

fn generality(t: &mut Trial) -> Result<()> {
    let p = t.config.generality.clone();
    let reference = t.reference();
    let random = t.liquid(Purpose::Liquid, &reference)?;
    t.pre_table = Some(serialize_connection_table(&random));
    let mut prng = t.rng(Purpose::Patterns);
    let training: Vec<Pattern> = (0..p.training_patterns).map(|_| t.poisson(&mut prng)).collect();
    let mut trained = random.clone();
    t.train(&mut trained, &training, 1, &mut t.rng(Purpose::Plasticity))?;
    t.post_table = Some(serialize_connection_table(&trained));

    // Unseen pairs come from their own stream.
    let mut unseen = t.rng(Purpose::Probe);
    let _ = t.poisson(&mut unseen);
    let pairs: Vec<(Pattern, Pattern)> = (0..p.pairs).map(|_| t.pair(p.distance, &mut unseen)).collect::<Result<_>>()?;
    let mut sums = [0.0; 2];
    for (k, liquid) in [&random, &trained].into_iter().enumerate() {
        let sim = Simulator::new(liquid)?;
        for (u, v) in &pairs {
            sums[k] += pairwise_separation(&t.trajectory(&sim, u)?, &t.trajectory(&sim, v)?)?.sum / pairs.len() as f64;
        }
    }
    t.push("separation_random", p.distance, sums[0]);
    t.push("separation_trained", p.distance, sums[1]);
    if sums[0] > 0.0 {
        t.push("separation_ratio", p.distance, sums[1] / sums[0]);
    }
    Ok(())
}

fn fading_memory(t: &mut Trial) -> Result<()> {
    let p = t.config.fading.clone();
    let burst = burst_train(&p.burst_params(t.duration()), &mut t.rng(Purpose::Patterns));
    let input = vec![burst.train.clone()];
    let liquid = t.liquid(Purpose::Liquid, &t.reference())?;
    t.pre_table = Some(serialize_connection_table(&liquid));
    let random = Simulator::new(&liquid)?.run(&input, t.duration())?;
    let mut trained = liquid.clone();
    t.train(&mut trained, std::slice::from_ref(&input), p.iterations, &mut t.rng(Purpose::Plasticity))?;
    t.post_table = Some(serialize_connection_table(&trained));
    let after = Simulator::new(&trained)?.run(&input, t.duration())?;
    t.push("burst_end", 0.0, burst.burst_end);
    match (random.last_spike(), after.last_spike()) {
        (Some(r), Some(a)) => {
            t.push("last_spike_random", 0.0, r);
            t.push("last_spike_trained", 0.0, a);
            t.push("memory_random", 0.0, r - burst.burst_end);
            t.push("memory_trained", 0.0, a - burst.burst_end);
            t.push("tls_diff", 0.0, a - r);
        }
        _ => t.notes.push("a record has no spikes; trial excluded from the memory measure".into()),
    }
    Ok(())
}

fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Fractions of input-connected neurons strictly above and at-or-below the
/// median of `degree`.
pub fn median_split_enrichment(degree: &[usize], input_connected: &[bool]) -> (f64, f64) {
    let mut sorted = degree.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) as f64
    };
    let (mut above, mut above_in, mut below, mut below_in) = (0, 0, 0, 0);
    for (&d, &inp) in degree.iter().zip(input_connected) {
        if d as f64 > median {
            above += 1;
            above_in += usize::from(inp);
        } else {
            below += 1;
            below_in += usize::from(inp);
        }
    }
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (frac(above_in, above), frac(below_in, below))
}

fn connectivity(t: &mut Trial) -> Result<()> {
    let n_patterns = t.config.connectivity.training_patterns;
    let mut liquid = t.liquid(Purpose::Liquid, &t.reference())?;
    t.pre_table = Some(serialize_connection_table(&liquid));
    let le = liquid.n_excitatory();
    let input_connected = liquid.input_connected();
    let pre = liquid.ee_out_degree();
    let pre_in = liquid.ee_in_degree();
    let mut prng = t.rng(Purpose::Patterns);
    let training: Vec<Pattern> = (0..n_patterns).map(|_| t.poisson(&mut prng)).collect();
    t.train(&mut liquid, &training, 1, &mut t.rng(Purpose::Plasticity))?;
    t.post_table = Some(serialize_connection_table(&liquid));
    let post = liquid.ee_out_degree();
    let post_in = liquid.ee_in_degree();

    for i in 0..le {
        let x = i as f64;
        t.push("out_degree_pre", x, pre[i] as f64);
        t.push("out_degree_post", x, post[i] as f64);
        t.push("in_degree_pre", x, pre_in[i] as f64);
        t.push("in_degree_post", x, post_in[i] as f64);
        t.push("input_connected", x, f64::from(u8::from(input_connected[i])));
    }
    let as_f64 = |v: &[usize]| v[..le].iter().map(|&d| d as f64).collect::<Vec<_>>();
    t.push("out_degree_variance_pre", 0.0, variance(&as_f64(&pre)));
    t.push("out_degree_variance_post", 0.0, variance(&as_f64(&post)));
    let (above, below) = median_split_enrichment(&post[..le], &input_connected[..le]);
    t.push("input_fraction_above_median", 0.0, above);
    t.push("input_fraction_below_median", 0.0, below);
    Ok(())
}

fn classify(t: &mut Trial) -> Result<()> {
    let p = t.config.classify.clone();
    let duration = t.duration();
    let tau = t.config.common.state_tau;
    for &n_classes in &p.classes {
        let x = n_classes as f64;
        let mut prng = t.rng(Purpose::Patterns);
        let template_params = p.template_params(duration);
        let templates: Vec<Pattern> = (0..n_classes)
            .map(|c| class_template(c, &template_params, &mut prng).trains)
            .collect();
        let sample = |c: usize, n: usize, rng: &mut ChaCha8Rng| -> Vec<(Pattern, usize)> {
            (0..n).map(|_| (jitter(&templates[c], p.jitter, rng), c)).collect()
        };
        let mut train_set = Vec::new();
        let mut test_set = Vec::new();
        for c in 0..n_classes {
            train_set.extend(sample(c, p.train_per_class, &mut prng));
            test_set.extend(sample(c, p.test_per_class, &mut prng));
        }
        let reference = jitter(&templates[0], p.jitter, &mut prng);

        let random = t.liquid(Purpose::Liquid, &reference)?;
        let mut trained = random.clone();
        let mut rng = t.rng(Purpose::Plasticity);
        for _ in 0..p.training_iterations {
            let (pattern, _) = train_set.choose(&mut rng).expect("nonempty training set");
            train_pattern(&mut trained, pattern, duration, &mut rng)?;
        }
        if t.pre_table.is_none() {
            t.pre_table = Some(serialize_connection_table(&random));
            t.post_table = Some(serialize_connection_table(&trained));
        }

        let readout_seed = derived_seed(t.config.seed, t.trial, Purpose::Readout);
        let train_labels: Vec<usize> = train_set.iter().map(|(_, c)| *c).collect();
        let test_labels: Vec<usize> = test_set.iter().map(|(_, c)| *c).collect();
        for (label, liquid) in [("random", &random), ("trained", &trained)] {
            let sim = Simulator::new(liquid)?;
            let states = |set: &[(Pattern, usize)]| -> Result<Vec<Vec<f64>>> {
                set.iter().map(|(pat, _)| Ok(end_state(&sim.run(pat, duration)?, tau))).collect()
            };
            let train_states = states(&train_set)?;
            let test_states = states(&test_set)?;
            let layer = train_readout(&train_states, &train_labels, &p.readout_params(readout_seed))?;
            let accuracy = layer.accuracy(&test_states, &test_labels)?;
            let sep = class_separation(&test_states, &test_labels)?;
            t.push(format!("accuracy_{label}"), x, accuracy);
            t.push(format!("train_accuracy_{label}"), x, layer.accuracy(&train_states, &train_labels)?);
            t.push(format!("class_separation_{label}"), x, sep.value);
            if sep.degenerate {
                t.notes.push(format!("{n_classes} classes, {label}: class separation degenerate"));
            }
        }
    }
    Ok(())
}
