//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line. Run with `cargo test -p lsm-validation --test acceptance -- --nocapture`.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use lsm_core::harness::{run_experiment, ExperimentConfig, ExperimentReport, RunOptions, TrialOutcome};
use lsm_core::liquid::{Synapse, SynapseClass, SynapseParams};
use lsm_core::metrics::numerical_rank;
use lsm_core::patterns::{poisson_train, SpikeTrain};
use lsm_core::plasticity::{compute_fitness, train_pattern, FitnessObserver, Kernel};
use lsm_core::sim::{dynamic_synapse_event, run, RunOptions as SimOptions, Simulator};
use lsm_core::{build_liquid, LiquidConfig};
use lsm_validation::stats::{mean, spearman, t_test_greater};
use lsm_validation::{desk, oracles, Verdict};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn secs(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

fn run_desk(config: &ExperimentConfig) -> ExperimentReport {
    let report = run_experiment(config, RunOptions { parallel: true, resume: false }).unwrap();
    for o in &report.outcomes {
        if let TrialOutcome::Failed { trial, error } = o {
            println!("  {} trial {trial} failed: {error}", config.kind);
        }
    }
    report
}

/// Per-trial `(a, b)` values of two metrics at `x`, matched by trial.
fn paired(report: &ExperimentReport, a: &str, b: &str, x: f64) -> Vec<(f64, f64)> {
    let bs: BTreeMap<usize, f64> = report.values_by_trial(b, x).into_iter().collect();
    report
        .values_by_trial(a, x)
        .into_iter()
        .filter_map(|(trial, va)| bs.get(&trial).map(|&vb| (va, vb)))
        .collect()
}

fn fuzzed_pattern(rng: &mut ChaCha8Rng) -> (Vec<SpikeTrain>, f64) {
    let duration = rng.random_range(200.0..1000.0);
    let rate = rng.random_range(5.0..80.0);
    (vec![poisson_train(rate, duration, rng)], duration)
}

#[test]
fn criterion_01_fitness_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let config = LiquidConfig::default();
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for k in 0..50 {
        let liquid = build_liquid(&config, 1000 + k).unwrap();
        let (pattern, duration) = fuzzed_pattern(&mut rng);
        let kernel = Kernel::from_liquid(&liquid).unwrap();
        let mut observer = FitnessObserver::new(&liquid, kernel);
        let record = Simulator::new(&liquid).unwrap().run_observed(&pattern, duration, &mut observer).unwrap();
        let table = observer.finish().unwrap();
        for ((post, pre), syn, online) in table.iter() {
            let (pre_t, post_t) = (&record.neurons[pre], &record.neurons[post]);
            let delay = liquid.synapses[syn].params.delay;
            let offline = compute_fitness(pre_t, post_t, delay, &kernel).unwrap();
            let direct = oracles::fitness(pre_t, post_t, delay, config.kernel_tau_slow, config.kernel_tau_fast);
            worst = worst.max((online - offline).abs()).max((offline - direct).abs());
            checked += 1;
        }
    }
    let elapsed = secs(start);
    Verdict::new(
        1,
        "fitness oracle",
        worst < 1e-9 && elapsed < 30.0,
        format!("max |diff| {worst:.2e} over {checked} synapses (< 1e-9), {elapsed:.1} s (< 30 s)"),
    )
    .report();
}

#[test]
fn criterion_02_conservation() {
    let start = Instant::now();
    let mut liquid = build_liquid(&LiquidConfig::default(), 202).unwrap();
    let signature = |l: &lsm_core::Liquid| (l.synapses.len(), l.ee_count(), l.parameter_multiset());
    let before = signature(&liquid);
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut swaps = 0;
    for _ in 0..100 {
        let pattern = [poisson_train(20.0, 1000.0, &mut rng)];
        swaps += train_pattern(&mut liquid, &pattern, 1000.0, &mut rng).unwrap().swaps.len();
    }
    let conserved = signature(&liquid) == before;
    let mut pairs = std::collections::HashSet::new();
    let simple = liquid.synapses.iter().all(|s| s.pre != s.post && pairs.insert((s.pre, s.post)));
    let elapsed = secs(start);
    Verdict::new(
        2,
        "conservation",
        conserved && simple && elapsed < 60.0,
        format!(
            "{swaps} swaps; counts and weight multiset conserved: {conserved}; no self/duplicate: {simple}; {elapsed:.1} s (< 60 s)"
        ),
    )
    .report();
}

#[test]
fn criterion_03_silent_synapse_non_interference() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut identical = 0;
    let mut spikes = 0;
    let n = 20;
    for k in 0..n {
        let liquid = build_liquid(&LiquidConfig::default(), 3000 + k).unwrap();
        let (pattern, duration) = fuzzed_pattern(&mut rng);
        let sim = Simulator::new(&liquid).unwrap();
        let plain = sim.run(&pattern, duration).unwrap();
        let mut observer = FitnessObserver::new(&liquid, Kernel::from_liquid(&liquid).unwrap());
        let observed = sim.run_observed(&pattern, duration, &mut observer).unwrap();
        let mut trained = liquid.clone();
        let report = train_pattern(&mut trained, &pattern, duration, &mut rng).unwrap();
        spikes += plain.total_spikes();
        let bits = |r: &lsm_core::sim::SpikeRecord| -> Vec<u64> { r.neurons.iter().flatten().map(|t| t.to_bits()).collect() };
        if plain == observed && plain == report.record && bits(&plain) == bits(&observed) {
            identical += 1;
        }
    }
    let elapsed = secs(start);
    Verdict::new(
        3,
        "silent-synapse non-interference",
        identical == n && spikes > 0 && elapsed < 30.0,
        format!("{identical}/{n} records bit-identical ({spikes} spikes), {elapsed:.1} s (< 30 s)"),
    )
    .report();
}

#[test]
fn criterion_04_dynamic_synapse() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (u, d, f) = (rng.random_range(0.02..0.95), rng.random_range(0.05..3.0), rng.random_range(0.02..2.0));
        let mut t = rng.random_range(0.0..50.0);
        let times: Vec<f64> = (0..rng.random_range(2..30))
            .map(|_| {
                let now = t;
                t += rng.random_range(0.5..200.0);
                now
            })
            .collect();
        let params = SynapseParams { weight: 1.0, delay: 1.5, tau: 3.0, u, d, f };
        let mut syn = Synapse::new(0, 1, SynapseClass::EE, params);
        for (&t, expected) in times.iter().zip(oracles::tm_efficacies(u, d, f, &times)) {
            worst = worst.max((dynamic_synapse_event(&mut syn, t).unwrap() - expected).abs());
        }
    }
    Verdict::new(4, "dynamic synapse vs ODE", worst < 1e-6, format!("max |diff| {worst:.2e} (< 1e-6)")).report();
}

#[test]
fn criterion_05_lif_analytic_rate() {
    let c = LiquidConfig::default();
    let isolated = LiquidConfig {
        n_neurons: 2,
        column_dims: [2, 1, 1],
        conn_prob_ee: 0.0,
        conn_prob_ei: 0.0,
        conn_prob_ie: 0.0,
        conn_prob_ii: 0.0,
        input_conn_prob: 0.0,
        ..c.clone()
    };
    let sim = Simulator::new(&build_liquid(&isolated, 1).unwrap()).unwrap();
    let mut worst = 0.0f64;
    for drive in [15.5, 16.0, 18.0, 22.0, 30.0, 50.0] {
        let options = SimOptions { injected_current: Some(vec![drive - c.i_background; 2]), ..Default::default() };
        let out = sim.run_with(&[], 20_000.0, &options, &mut ()).unwrap();
        let rate = out.record.neurons[0].len() as f64 / 20.0;
        let expected = oracles::lif_rate(drive, c.input_resistance, c.tau_membrane, c.v_threshold, c.v_reset, c.refractory_exc);
        worst = worst.max((rate - expected).abs() / expected);
    }
    let silent = run(&build_liquid(&c, 5).unwrap(), &[SpikeTrain::empty(0, 2000.0)], 2000.0).unwrap().total_spikes();
    Verdict::new(
        5,
        "LIF analytic rate",
        worst < 0.02 && silent == 0,
        format!("max relative rate error {:.3}% (< 2%), background-only spikes {silent}", worst * 100.0),
    )
    .report();
}

#[test]
fn criterion_06_rank_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut agree = 0;
    for _ in 0..200 {
        let (rows, cols) = (rng.random_range(1..9usize), rng.random_range(1..9usize));
        let inner = rng.random_range(1..=rows.min(cols));
        let a: Vec<i64> = (0..rows * inner).map(|_| rng.random_range(-4..=4)).collect();
        let b: Vec<i64> = (0..inner * cols).map(|_| rng.random_range(-4..=4)).collect();
        let entries: Vec<i64> = (0..rows * cols)
            .map(|k| (0..inner).map(|l| a[(k / cols) * inner + l] * b[l * cols + k % cols]).sum())
            .collect();
        let m = nalgebra_matrix(rows, cols, &entries);
        if numerical_rank(&m).unwrap().rank == oracles::exact_rank(rows, cols, &entries) {
            agree += 1;
        }
    }
    Verdict::new(6, "rank oracle", agree == 200, format!("{agree}/200 matrices agree with exact rank")).report();
}

fn nalgebra_matrix(rows: usize, cols: usize, entries: &[i64]) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| entries[i * cols + j] as f64)
}

fn output_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn criterion_07_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = desk::pairwise();
    config.trials = 3;
    config.pairwise.distances = vec![0.0, 0.4];
    config.pairwise.iterations = 3;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let mut run_into = |name: &str, parallel: bool| {
        config.out = Some(dir.path().join(name));
        pool.install(|| run_experiment(&config, RunOptions { parallel, resume: false }).unwrap());
        output_bytes(&dir.path().join(name))
    };
    let first = run_into("first", true);
    let rerun = run_into("rerun", true);
    let serial = run_into("serial", false);
    let csvs = first.keys().filter(|k| k.ends_with(".csv")).count();
    Verdict::new(
        7,
        "determinism",
        csvs > 0 && first == rerun && first == serial,
        format!(
            "{csvs} CSVs; rerun identical: {}; serial == parallel: {}",
            first == rerun,
            first == serial
        ),
    )
    .report();
}

#[test]
fn criterion_08_pairwise_separation() {
    let start = Instant::now();
    let report = run_desk(&desk::pairwise());
    let far = paired(&report, "separation_sum_trained", "separation_sum_random", 0.4);
    let wins = far.iter().filter(|(t, r)| t > r).count();
    let frac = wins as f64 / far.len() as f64;
    let zero = paired(&report, "separation_sum_trained", "separation_sum_random", 0.0);
    let (t0, r0) = (mean(&zero.iter().map(|p| p.0).collect::<Vec<_>>()), mean(&zero.iter().map(|p| p.1).collect::<Vec<_>>()));
    let gap = (t0 - r0).abs() / t0.max(r0);
    for d in &report.config.pairwise.distances {
        let (t, r) = (report.summary("separation_sum_trained", *d), report.summary("separation_sum_random", *d));
        if let (Some(t), Some(r)) = (t, r) {
            println!("  d={d}: trained {:.1} +- {:.1}, random {:.1} +- {:.1}", t.mean, t.std, r.mean, r.std);
        }
    }
    Verdict::new(
        8,
        "pairwise separation",
        frac >= 0.8 && gap <= 0.10,
        format!(
            "d=0.4 trained > random in {wins}/{} (>= 80%); d=0 means {t0:.1} vs {r0:.1}, gap {:.1}% (<= 10%); {:.0} s",
            far.len(),
            gap * 100.0,
            secs(start)
        ),
    )
    .report();
}

#[test]
fn criterion_09_distance_sweep_ratio() {
    let start = Instant::now();
    let config = desk::distance_sweep();
    let report = run_desk(&config);
    let ds = &config.distance_sweep.distances;
    let (lo, hi) = (ds[0], ds[ds.len() - 1]);
    // Ratio of the trial-averaged curves; single trials can have a random
    // end-state distance of ~1e-13 at small d, which makes per-trial ratios blow up.
    let curve_ratio = |d: f64| {
        report.summary("state_distance_trained", d).unwrap().mean / report.summary("state_distance_random", d).unwrap().mean
    };
    for &d in ds {
        let per_trial = report.summary("ratio", d).map_or(f64::NAN, |s| s.mean);
        println!("  d={d}: ratio of means {:.3}, mean per-trial ratio {per_trial:.3}", curve_ratio(d));
    }
    let (r_hi, r_lo) = (curve_ratio(hi), curve_ratio(lo));
    Verdict::new(
        9,
        "distance-sweep ratio",
        r_hi >= 1.15 && (0.9..=1.2).contains(&r_lo),
        format!("ratio at d={hi}: {r_hi:.3} (>= 1.15); at d={lo}: {r_lo:.3} (in [0.9, 1.2]); {:.0} s", secs(start)),
    )
    .report();
}

#[test]
fn criterion_10_rank_sweep() {
    let start = Instant::now();
    let report = run_desk(&desk::rank_sweep());
    let curve = report.curve("separation_rank");
    let xs: Vec<f64> = curve.iter().map(|(x, _)| *x).collect();
    let ys: Vec<f64> = curve.iter().map(|(_, s)| s.mean).collect();
    let ratio = ys[ys.len() - 1] / ys[0];
    let rho = spearman(&xs, &ys);
    println!(
        "  mean r_s by N_p: {}",
        curve.iter().map(|(x, s)| format!("{x}:{:.2}", s.mean)).collect::<Vec<_>>().join(" ")
    );
    Verdict::new(
        10,
        "rank sweep",
        ratio >= 1.5 && rho.is_some_and(|r| r > 0.8),
        format!(
            "r_s {:.2} -> {:.2}, ratio {ratio:.3} (>= 1.5); Spearman rho {} (> 0.8); {:.0} s",
            ys[0],
            ys[ys.len() - 1],
            rho.map_or("undefined (flat curve)".into(), |r| format!("{r:.3}")),
            secs(start)
        ),
    )
    .report();
}

#[test]
fn criterion_11_generalization() {
    let start = Instant::now();
    let report = run_desk(&desk::generalization());
    let curve = report.curve("generalization_rank");
    let (before, after) = (curve[0].1.mean, curve[curve.len() - 1].1.mean);
    let change = (after - before).abs() / before;
    Verdict::new(
        11,
        "generalization",
        change <= 0.15,
        format!("r_g {before:.2} -> {after:.2}, change {:.1}% (<= 15%); {:.0} s", change * 100.0, secs(start)),
    )
    .report();
}

#[test]
fn criterion_12_generality() {
    let start = Instant::now();
    let config = desk::generality();
    let report = run_desk(&config);
    let d = config.generality.distance;
    let trained = report.summary("separation_trained", d).unwrap().mean;
    let random = report.summary("separation_random", d).unwrap().mean;
    let within = (trained - random).abs() <= 0.15 * random;
    Verdict::new(
        12,
        "generality",
        within && trained >= 0.85 * random,
        format!(
            "unseen-pair separation trained {trained:.2} vs random {random:.2}, ratio {:.3} (within 15%, >= 0.85); {:.0} s",
            trained / random,
            secs(start)
        ),
    )
    .report();
}

#[test]
fn criterion_13_fading_memory() {
    let start = Instant::now();
    let config = desk::fading_memory();
    let report = run_desk(&config);
    let diffs = report.values("tls_diff", 0.0);
    let test = t_test_greater(&diffs);
    let random = report.summary("memory_random", 0.0).unwrap();
    let trained = report.summary("memory_trained", 0.0).unwrap();
    println!(
        "  memory after burst: random {:.1} +- {:.1} ms, trained {:.1} +- {:.1} ms",
        random.mean, random.std, trained.mean, trained.std
    );
    Verdict::new(
        13,
        "fading memory",
        diffs.len() == config.trials && test.is_some_and(|t| t.mean > 0.0 && t.p < 0.05),
        format!(
            "TLS_diff over {} paired trials: {}; {:.0} s",
            diffs.len(),
            test.map_or("no spread".into(), |t| format!("mean {:.2} ms, t {:.2}, one-sided p {:.3} (< 0.05)", t.mean, t.t, t.p)),
            secs(start)
        ),
    )
    .report();
}

#[test]
fn criterion_14_connectivity_concentration() {
    let start = Instant::now();
    let report = run_desk(&desk::connectivity());
    let variances = paired(&report, "out_degree_variance_post", "out_degree_variance_pre", 0.0);
    let grew = variances.iter().filter(|(post, pre)| post > pre).count();
    let above = mean(&report.values("input_fraction_above_median", 0.0));
    let below = mean(&report.values("input_fraction_below_median", 0.0));
    let (post_var, pre_var) = (
        mean(&variances.iter().map(|p| p.0).collect::<Vec<_>>()),
        mean(&variances.iter().map(|p| p.1).collect::<Vec<_>>()),
    );
    Verdict::new(
        14,
        "connectivity concentration",
        grew as f64 >= 0.8 * variances.len() as f64 && above > below,
        format!(
            "EE out-degree variance grew in {grew}/{} ({pre_var:.1} -> {post_var:.1}); input-connected fraction above median {above:.3} vs below {below:.3}; {:.0} s",
            variances.len(),
            secs(start)
        ),
    )
    .report();
}

#[test]
fn criterion_15_classification() {
    let start = Instant::now();
    let report = run_desk(&desk::classify());
    let acc_random = report.summary("accuracy_random", 4.0).unwrap().mean;
    let acc_trained = report.summary("accuracy_trained", 4.0).unwrap().mean;
    let seps = paired(&report, "class_separation_trained", "class_separation_random", 4.0);
    let wins = seps.iter().filter(|(t, r)| t > r).count();

    let extra = run_desk(&desk::classify_reporting());
    for n in [8.0, 12.0] {
        if let (Some(r), Some(t)) = (extra.summary("accuracy_random", n), extra.summary("accuracy_trained", n)) {
            println!("  {n} classes (reported only): accuracy random {:.4}, trained {:.4}", r.mean, t.mean);
        }
    }
    Verdict::new(
        15,
        "classification",
        acc_trained >= acc_random + 0.02 && wins as f64 >= 0.8 * seps.len() as f64,
        format!(
            "4-class accuracy trained {acc_trained:.4} vs random {acc_random:.4} (needs +0.02); class separation trained > random in {wins}/{} (>= 80%); {:.0} s",
            seps.len(),
            secs(start)
        ),
    )
    .report();
}
