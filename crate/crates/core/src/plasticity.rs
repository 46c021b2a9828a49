//! Structural plasticity of excitatory-to-excitatory connections.
//!
//! During a pattern each EE synapse `j -> i` accumulates a fitness `c_ij`:
//! it is potentiated by the delayed presynaptic trace of `j` whenever `i`
//! fires, and depressed by the postsynaptic trace of `i` whenever a spike of
//! `j` arrives at `i`. Traces are kernel-filtered spike trains that exclude
//! the current instant. At the end of the pattern every excitatory neuron
//! that fired loses its least fit incoming EE synapse to the best of `n_R`
//! randomly drawn silent candidates; only the presynaptic endpoint moves, so
//! the parameter multiset of the liquid is conserved.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::liquid::{Liquid, SynapseClass};
use crate::patterns::SpikeTrain;
use crate::sim::{SpikeObserver, SpikeRecord, Simulator};

/// `K(t) = I0 (exp(-t/tau_slow) - exp(-t/tau_fast))`, normalized to a unit peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    tau_slow: f64,
    tau_fast: f64,
    norm: f64,
}

impl Kernel {
    pub fn new(tau_slow: f64, tau_fast: f64) -> Result<Self> {
        if !(tau_fast > 0.0 && tau_fast < tau_slow && tau_slow.is_finite()) {
            return Err(Error::Config(format!(
                "kernel needs 0 < tau_fast < tau_slow, got {tau_fast} and {tau_slow}"
            )));
        }
        let peak = Self::peak_time_of(tau_slow, tau_fast);
        let norm = 1.0 / ((-peak / tau_slow).exp() - (-peak / tau_fast).exp());
        Ok(Self { tau_slow, tau_fast, norm })
    }

    pub fn from_liquid(liquid: &Liquid) -> Result<Self> {
        Self::new(liquid.config.kernel_tau_slow, liquid.config.kernel_tau_fast)
    }

    fn peak_time_of(tau_slow: f64, tau_fast: f64) -> f64 {
        (tau_slow / tau_fast).ln() * tau_slow * tau_fast / (tau_slow - tau_fast)
    }

    pub fn peak_time(&self) -> f64 {
        Self::peak_time_of(self.tau_slow, self.tau_fast)
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn tau_slow(&self) -> f64 {
        self.tau_slow
    }

    pub fn tau_fast(&self) -> f64 {
        self.tau_fast
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Input(format!("kernel evaluated at negative time {t}")));
        }
        Ok(self.eval(t))
    }

    #[inline]
    fn eval(&self, t: f64) -> f64 {
        self.norm * ((-t / self.tau_slow).exp() - (-t / self.tau_fast).exp())
    }
}

/// Running kernel trace of an event stream: two exponentially decaying
/// accumulators, one per kernel time constant.
#[derive(Debug, Clone, Copy)]
struct Trace {
    slow: f64,
    fast: f64,
    t_last: f64,
}

impl Trace {
    const EMPTY: Trace = Trace { slow: 0.0, fast: 0.0, t_last: f64::NEG_INFINITY };

    #[inline]
    fn value(&self, t: f64, k: &Kernel) -> f64 {
        if self.t_last == f64::NEG_INFINITY {
            return 0.0;
        }
        let dt = t - self.t_last;
        k.norm * (self.slow * (-dt / k.tau_slow).exp() - self.fast * (-dt / k.tau_fast).exp())
    }

    #[inline]
    fn add(&mut self, t: f64, k: &Kernel) {
        if self.t_last != f64::NEG_INFINITY {
            let dt = t - self.t_last;
            self.slow *= (-dt / k.tau_slow).exp();
            self.fast *= (-dt / k.tau_fast).exp();
        }
        self.slow += 1.0;
        self.fast += 1.0;
        self.t_last = t;
    }
}

fn check_sorted(times: &[f64], what: &str) -> Result<()> {
    match times.windows(2).find(|w| w[1] < w[0]) {
        Some(w) => Err(Error::Input(format!("{what} spike times unsorted at {} > {}", w[0], w[1]))),
        None => Ok(()),
    }
}

/// Fitness of a synapse `j -> i` with delay `delay` accumulated over one
/// pattern, evaluated offline from the two spike trains.
///
/// `c = sum_{t in post} e_j(t) - sum_{s in pre} f_i(s + delay)` where
/// `e_j(t) = sum_{s + delay < t} K(t - s - delay)` and
/// `f_i(t) = sum_{r < t} K(t - r)`.
pub fn compute_fitness(pre: &[f64], post: &[f64], delay: f64, kernel: &Kernel) -> Result<f64> {
    check_sorted(pre, "presynaptic")?;
    check_sorted(post, "postsynaptic")?;
    Ok(fitness_sorted(pre, post, delay, kernel))
}

fn fitness_sorted(pre: &[f64], post: &[f64], delay: f64, kernel: &Kernel) -> f64 {
    let mut potentiation = 0.0;
    let mut arrivals = Trace::EMPTY;
    let mut k = 0;
    for &t in post {
        while k < pre.len() && pre[k] + delay < t {
            arrivals.add(pre[k] + delay, kernel);
            k += 1;
        }
        potentiation += arrivals.value(t, kernel);
    }

    let mut depression = 0.0;
    let mut post_trace = Trace::EMPTY;
    let mut k = 0;
    for &s in pre {
        let arrival = s + delay;
        while k < post.len() && post[k] < arrival {
            post_trace.add(post[k], kernel);
            k += 1;
        }
        depression += post_trace.value(arrival, kernel);
    }
    potentiation - depression
}

/// Fitness values `c_ij` keyed by `(post i, pre j)`, one per EE synapse.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessTable {
    /// Index of each entry's synapse in `Liquid::synapses`.
    synapses: Vec<usize>,
    keys: Vec<(usize, usize)>,
    values: Vec<f64>,
    lookup: HashMap<(usize, usize), usize>,
}

impl FitnessTable {
    /// All-zero table mirroring the liquid's current EE synapses.
    pub fn for_liquid(liquid: &Liquid) -> Self {
        let mut synapses = Vec::new();
        let mut keys = Vec::new();
        for (k, s) in liquid.synapses.iter().enumerate() {
            if s.class == SynapseClass::EE {
                synapses.push(k);
                keys.push((s.post, s.pre));
            }
        }
        let lookup = keys.iter().enumerate().map(|(slot, &key)| (key, slot)).collect();
        Self {
            values: vec![0.0; keys.len()],
            synapses,
            keys,
            lookup,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, post: usize, pre: usize) -> Option<f64> {
        self.lookup.get(&(post, pre)).map(|&slot| self.values[slot])
    }

    /// Entry slot holding `(post, pre)`.
    pub fn slot(&self, post: usize, pre: usize) -> Option<usize> {
        self.lookup.get(&(post, pre)).copied()
    }

    pub fn reset(&mut self) {
        self.values.iter_mut().for_each(|c| *c = 0.0);
    }

    /// `((post, pre), synapse index, c)` for every entry.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), usize, f64)> + '_ {
        self.keys
            .iter()
            .zip(&self.synapses)
            .zip(&self.values)
            .map(|((&key, &syn), &c)| (key, syn, c))
    }
}

/// An event seen by the online fitness rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitnessEvent {
    /// A spike of the presynaptic neuron reaches the synapse in table slot `slot`.
    PreArrival { slot: usize, t: f64 },
    /// Neuron `neuron` fires.
    PostSpike { neuron: usize, t: f64 },
}

/// Incremental fitness bookkeeping for one pattern.
#[derive(Debug, Clone)]
pub struct OnlineFitness {
    kernel: Kernel,
    table: FitnessTable,
    incoming: Vec<Vec<usize>>,
    post_traces: Vec<Trace>,
    arrival_traces: Vec<Trace>,
    last_t: f64,
}

impl OnlineFitness {
    pub fn new(liquid: &Liquid, kernel: Kernel) -> Self {
        let table = FitnessTable::for_liquid(liquid);
        let mut incoming = vec![Vec::new(); liquid.n_neurons()];
        for (slot, &(post, _)) in table.keys.iter().enumerate() {
            incoming[post].push(slot);
        }
        Self {
            kernel,
            arrival_traces: vec![Trace::EMPTY; table.len()],
            post_traces: vec![Trace::EMPTY; liquid.n_neurons()],
            table,
            incoming,
            last_t: f64::NEG_INFINITY,
        }
    }

    /// Apply one event; times must be non-decreasing. Depression for an
    /// arrival coinciding with a postsynaptic spike must be submitted first.
    pub fn apply(&mut self, event: FitnessEvent) -> Result<()> {
        let t = match event {
            FitnessEvent::PreArrival { t, .. } | FitnessEvent::PostSpike { t, .. } => t,
        };
        if t < self.last_t {
            return Err(Error::NonMonotonicTime { time: t, last: self.last_t });
        }
        self.last_t = t;
        let k = &self.kernel;
        match event {
            FitnessEvent::PreArrival { slot, t } => {
                let post = self.table.keys[slot].0;
                self.table.values[slot] -= self.post_traces[post].value(t, k);
                self.arrival_traces[slot].add(t, k);
            }
            FitnessEvent::PostSpike { neuron, t } => {
                for &slot in &self.incoming[neuron] {
                    self.table.values[slot] += self.arrival_traces[slot].value(t, k);
                }
                self.post_traces[neuron].add(t, k);
            }
        }
        Ok(())
    }

    pub fn table(&self) -> &FitnessTable {
        &self.table
    }

    pub fn into_table(self) -> FitnessTable {
        self.table
    }
}

#[derive(Debug, Clone, Copy)]
struct PendingArrival {
    t: f64,
    seq: u64,
    slot: usize,
}

impl PartialEq for PendingArrival {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for PendingArrival {}
impl PartialOrd for PendingArrival {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for PendingArrival {
    fn cmp(&self, other: &Self) -> Ordering {
        self.t.total_cmp(&other.t).then(self.seq.cmp(&other.seq))
    }
}

/// Spike observer that turns emitted spikes into fitness events, delaying
/// presynaptic spikes by each synapse's transmission delay.
#[derive(Debug)]
pub struct FitnessObserver {
    online: OnlineFitness,
    /// `(slot, delay)` of the EE synapses leaving each neuron.
    outgoing: Vec<Vec<(usize, f64)>>,
    pending: BinaryHeap<Reverse<PendingArrival>>,
    seq: u64,
    error: Option<Error>,
}

impl FitnessObserver {
    pub fn new(liquid: &Liquid, kernel: Kernel) -> Self {
        let online = OnlineFitness::new(liquid, kernel);
        let mut outgoing = vec![Vec::new(); liquid.n_neurons()];
        for (slot, &syn) in online.table.synapses.iter().enumerate() {
            let s = &liquid.synapses[syn];
            outgoing[s.pre].push((slot, s.params.delay));
        }
        Self {
            online,
            outgoing,
            pending: BinaryHeap::new(),
            seq: 0,
            error: None,
        }
    }

    fn flush_until(&mut self, t: f64) {
        while let Some(Reverse(next)) = self.pending.peek().copied() {
            if next.t > t {
                break;
            }
            self.pending.pop();
            if let Err(e) = self.online.apply(FitnessEvent::PreArrival { slot: next.slot, t: next.t }) {
                self.error.get_or_insert(e);
            }
        }
    }

    /// Deliver all outstanding arrivals and return the final table.
    pub fn finish(mut self) -> Result<FitnessTable> {
        self.flush_until(f64::INFINITY);
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.online.into_table()),
        }
    }
}

impl SpikeObserver for FitnessObserver {
    fn on_spike(&mut self, neuron: usize, t: f64) {
        self.flush_until(t);
        if !self.online.incoming[neuron].is_empty() {
            if let Err(e) = self.online.apply(FitnessEvent::PostSpike { neuron, t }) {
                self.error.get_or_insert(e);
            }
        }
        for k in 0..self.outgoing[neuron].len() {
            let (slot, delay) = self.outgoing[neuron][k];
            self.seq += 1;
            self.pending.push(Reverse(PendingArrival { t: t + delay, seq: self.seq, slot }));
        }
    }
}

/// Rewiring choice for one firing neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapDecision {
    pub q: usize,
    /// Index of the least fit incoming EE synapse in `Liquid::synapses`.
    pub s_min: usize,
    pub s_min_pre: usize,
    pub c_min: f64,
    pub candidates: Vec<usize>,
    pub candidate_fitness: Vec<f64>,
    pub r_max: usize,
    pub c_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    NoIncomingEe,
    NoEligibleCandidate,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    Swap(SwapDecision),
    Skipped { q: usize, reason: SkipReason },
}

/// Choose the replacement for neuron `q`'s weakest EE synapse.
///
/// Candidates are `n_silent` excitatory neurons drawn without replacement
/// from those that are neither `q` nor already presynaptic to `q`. Their
/// fitness is evaluated offline on the recorded spikes with the delay of the
/// tagged synapse; silent synapses never influence the dynamics, so this is
/// exact. Ties resolve to the lowest presynaptic id.
pub fn select_replacement(
    liquid: &Liquid,
    q: usize,
    table: &FitnessTable,
    record: &SpikeRecord,
    kernel: &Kernel,
    rng: &mut impl Rng,
) -> Result<Selection> {
    if !liquid.is_excitatory(q) {
        return Err(Error::Input(format!("neuron {q} is not excitatory")));
    }
    let mut tagged: Option<(usize, usize, f64)> = None;
    let mut presynaptic = HashSet::new();
    for (k, s) in liquid.synapses.iter().enumerate() {
        if s.post != q {
            continue;
        }
        presynaptic.insert(s.pre);
        if s.class != SynapseClass::EE {
            continue;
        }
        let c = table
            .get(q, s.pre)
            .ok_or_else(|| Error::StaleDecision(format!("fitness table has no entry for {} -> {q}", s.pre)))?;
        let better = match tagged {
            None => true,
            Some((_, pre, c_min)) => c < c_min || (c == c_min && s.pre < pre),
        };
        if better {
            tagged = Some((k, s.pre, c));
        }
    }
    let Some((s_min, s_min_pre, c_min)) = tagged else {
        return Ok(Selection::Skipped { q, reason: SkipReason::NoIncomingEe });
    };

    let eligible: Vec<usize> = (0..liquid.n_excitatory())
        .filter(|&j| j != q && !presynaptic.contains(&j))
        .collect();
    if eligible.is_empty() {
        return Ok(Selection::Skipped { q, reason: SkipReason::NoEligibleCandidate });
    }
    let n_r = liquid.config.n_silent.min(eligible.len());
    let mut candidates: Vec<usize> = sample(rng, eligible.len(), n_r).into_iter().map(|k| eligible[k]).collect();
    candidates.sort_unstable();

    let delay = liquid.synapses[s_min].params.delay;
    let post = &record.neurons[q];
    let candidate_fitness: Vec<f64> = candidates
        .iter()
        .map(|&j| fitness_sorted(&record.neurons[j], post, delay, kernel))
        .collect();
    let mut best = 0;
    for k in 1..candidates.len() {
        if candidate_fitness[k] > candidate_fitness[best] {
            best = k;
        }
    }
    Ok(Selection::Swap(SwapDecision {
        q,
        s_min,
        s_min_pre,
        c_min,
        r_max: candidates[best],
        c_max: candidate_fitness[best],
        candidates,
        candidate_fitness,
    }))
}

/// Move the presynaptic endpoint of `s_min` to `r_max`. The parameter set is
/// kept and the synapse's short-term state is reset.
pub fn apply_swap(liquid: &mut Liquid, decision: &SwapDecision) -> Result<()> {
    let syn = liquid
        .synapses
        .get(decision.s_min)
        .ok_or_else(|| Error::StaleDecision(format!("synapse {} does not exist", decision.s_min)))?;
    if syn.post != decision.q || syn.pre != decision.s_min_pre || syn.class != SynapseClass::EE {
        return Err(Error::StaleDecision(format!(
            "synapse {} is now {} -> {} ({}), expected {} -> {} (EE)",
            decision.s_min, syn.pre, syn.post, syn.class, decision.s_min_pre, decision.q
        )));
    }
    if decision.r_max == decision.q || !liquid.is_excitatory(decision.r_max) {
        return Err(Error::StaleDecision(format!("invalid replacement {}", decision.r_max)));
    }
    if liquid.synapses.iter().any(|s| s.post == decision.q && s.pre == decision.r_max) {
        return Err(Error::StaleDecision(format!(
            "{} already projects to {}",
            decision.r_max, decision.q
        )));
    }
    let syn = &mut liquid.synapses[decision.s_min];
    syn.pre = decision.r_max;
    syn.reset_state();
    Ok(())
}

/// Outcome of presenting one pattern with plasticity enabled.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub record: SpikeRecord,
    pub swaps: Vec<SwapDecision>,
    pub skipped: Vec<(usize, SkipReason)>,
}

/// Present `pattern`, accumulate fitness online, then rewire every
/// excitatory neuron that fired (ascending id), evaluating candidates
/// against the fixed recorded spikes.
pub fn train_pattern(
    liquid: &mut Liquid,
    pattern: &[SpikeTrain],
    duration: f64,
    rng: &mut impl Rng,
) -> Result<TrainReport> {
    let kernel = Kernel::from_liquid(liquid)?;
    let sim = Simulator::new(liquid)?;
    let mut observer = FitnessObserver::new(liquid, kernel);
    let record = sim.run_observed(pattern, duration, &mut observer)?;
    let table = observer.finish()?;

    let mut swaps = Vec::new();
    let mut skipped = Vec::new();
    for q in 0..liquid.n_excitatory() {
        if record.neurons[q].is_empty() {
            continue;
        }
        match select_replacement(liquid, q, &table, &record, &kernel, rng)? {
            Selection::Swap(decision) => {
                apply_swap(liquid, &decision)?;
                swaps.push(decision);
            }
            Selection::Skipped { q, reason } => skipped.push((q, reason)),
        }
    }
    Ok(TrainReport { record, swaps, skipped })
}

/// `pattern_idx q old_pre new_pre c_min c_max` per swap.
pub fn format_audit(pattern_idx: usize, swaps: &[SwapDecision]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for s in swaps {
        let _ = writeln!(
            out,
            "{pattern_idx} {} {} {} {:.9} {:.9}",
            s.q, s.s_min_pre, s.r_max, s.c_min, s.c_max
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LiquidConfig;
    use crate::liquid::{build_liquid, Synapse, SynapseParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn kernel() -> Kernel {
        Kernel::new(3.0, 0.05).unwrap()
    }

    /// Direct double sum over all spike pairs.
    fn brute_force(pre: &[f64], post: &[f64], delay: f64, k: &Kernel) -> f64 {
        let mut c = 0.0;
        for &t in post {
            for &s in pre {
                if s + delay < t {
                    c += k.value(t - s - delay).unwrap();
                }
            }
        }
        for &s in pre {
            for &r in post {
                if r < s + delay {
                    c -= k.value(s + delay - r).unwrap();
                }
            }
        }
        c
    }

    #[test]
    fn kernel_vanishes_at_zero_and_rejects_negative() {
        let k = kernel();
        assert_eq!(k.value(0.0).unwrap(), 0.0);
        assert!(k.value(-1e-9).is_err());
    }

    #[test]
    fn kernel_single_exponential_limit() {
        let k = Kernel::new(3.0, 1e-7).unwrap();
        assert!((k.value(3.0).unwrap() - (-1.0f64).exp()).abs() < 1e-5);
    }

    #[test]
    fn kernel_peak_is_one() {
        let k = kernel();
        let t_star = (3.0f64 / 0.05).ln() * 3.0 * 0.05 / 2.95;
        assert!((k.peak_time() - t_star).abs() < 1e-15);
        assert!((k.value(t_star).unwrap() - 1.0).abs() < 1e-12);
        // Dense grid search: no sample exceeds the analytic peak.
        let (mut best_t, mut best) = (0.0, 0.0);
        for i in 0..200_000 {
            let t = i as f64 * 1e-5;
            let v = k.value(t).unwrap();
            if v > best {
                best = v;
                best_t = t;
            }
        }
        assert!((best_t - t_star).abs() < 2e-5);
        assert!(best <= 1.0 + 1e-12);
    }

    #[test]
    fn silent_pair_has_zero_fitness() {
        assert_eq!(compute_fitness(&[], &[], 1.5, &kernel()).unwrap(), 0.0);
    }

    #[test]
    fn pure_potentiation() {
        let k = kernel();
        let (t0, delay, gap) = (10.0, 1.5, 2.0);
        let c = compute_fitness(&[t0], &[t0 + delay + gap], delay, &k).unwrap();
        assert!((c - k.value(gap).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn pure_depression() {
        let k = kernel();
        let (t1, delay, gap) = (20.0, 1.5, 0.7);
        let c = compute_fitness(&[t1 - delay + gap], &[t1], delay, &k).unwrap();
        assert!((c + k.value(gap).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn unsorted_rejected() {
        assert!(compute_fitness(&[2.0, 1.0], &[], 1.5, &kernel()).is_err());
        assert!(compute_fitness(&[], &[3.0, 1.0], 1.5, &kernel()).is_err());
    }

    #[test]
    fn offline_matches_brute_force() {
        let k = kernel();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let mut pre: Vec<f64> = (0..rng.random_range(0..30)).map(|_| rng.random::<f64>() * 300.0).collect();
            let mut post: Vec<f64> = (0..rng.random_range(0..30)).map(|_| rng.random::<f64>() * 300.0).collect();
            pre.sort_by(f64::total_cmp);
            post.sort_by(f64::total_cmp);
            let a = compute_fitness(&pre, &post, 1.5, &k).unwrap();
            let b = brute_force(&pre, &post, 1.5, &k);
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    fn two_neuron_liquid() -> Liquid {
        let config = LiquidConfig {
            n_neurons: 3,
            column_dims: [3, 1, 1],
            excitatory_fraction: 0.67,
            conn_prob_ee: 0.0,
            conn_prob_ei: 0.0,
            conn_prob_ie: 0.0,
            conn_prob_ii: 0.0,
            input_conn_prob: 0.0,
            ..LiquidConfig::default()
        };
        let mut liquid = build_liquid(&config, 0).unwrap();
        let params = SynapseParams { weight: 10.0, delay: 1.5, tau: 3.0, u: 0.5, d: 1.1, f: 0.05 };
        liquid.synapses.push(Synapse::new(0, 1, SynapseClass::EE, params));
        liquid.validate().unwrap();
        liquid
    }

    #[test]
    fn empty_event_stream_keeps_zeros() {
        let liquid = two_neuron_liquid();
        let online = OnlineFitness::new(&liquid, kernel());
        assert!(online.table().iter().all(|(_, _, c)| c == 0.0));
    }

    #[test]
    fn online_rejects_time_reversal() {
        let liquid = two_neuron_liquid();
        let mut online = OnlineFitness::new(&liquid, kernel());
        online.apply(FitnessEvent::PostSpike { neuron: 1, t: 5.0 }).unwrap();
        assert!(online.apply(FitnessEvent::PreArrival { slot: 0, t: 4.0 }).is_err());
    }

    #[test]
    fn simultaneous_events_match_oracle() {
        let liquid = two_neuron_liquid();
        let k = kernel();
        let mut obs = FitnessObserver::new(&liquid, k);
        // Neuron 0 fires at 10.0 and 12.0; its second spike arrives at 13.5,
        // exactly when neuron 1 fires.
        for (n, t) in [(0, 10.0), (1, 11.0), (0, 12.0), (1, 13.5)] {
            obs.on_spike(n, t);
        }
        let table = obs.finish().unwrap();
        let expected = compute_fitness(&[10.0, 12.0], &[11.0, 13.5], 1.5, &k).unwrap();
        let c = table.get(1, 0).unwrap();
        assert!((c - expected).abs() < 1e-12, "{c} vs {expected}");
    }

    #[test]
    fn online_matches_offline_on_default_liquid() {
        let liquid = build_liquid(&LiquidConfig::default(), 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let input = [crate::patterns::poisson_train(20.0, 1000.0, &mut rng)];
        let k = Kernel::from_liquid(&liquid).unwrap();
        let sim = Simulator::new(&liquid).unwrap();
        let mut obs = FitnessObserver::new(&liquid, k);
        let rec = sim.run_observed(&input, 1000.0, &mut obs).unwrap();
        let table = obs.finish().unwrap();
        assert!(rec.total_spikes() > 0);
        let mut max_diff: f64 = 0.0;
        for ((post, pre), syn, c) in table.iter() {
            let delay = liquid.synapses[syn].params.delay;
            let oracle = compute_fitness(&rec.neurons[pre], &rec.neurons[post], delay, &k).unwrap();
            max_diff = max_diff.max((c - oracle).abs());
        }
        assert!(max_diff < 1e-9, "{max_diff}");
    }

    /// Five excitatory neurons; neuron 0 receives from 1 and 2.
    fn micro_liquid() -> Liquid {
        let config = LiquidConfig {
            n_neurons: 6,
            column_dims: [6, 1, 1],
            excitatory_fraction: 5.0 / 6.0,
            conn_prob_ee: 0.0,
            conn_prob_ei: 0.0,
            conn_prob_ie: 0.0,
            conn_prob_ii: 0.0,
            input_conn_prob: 0.0,
            ..LiquidConfig::default()
        };
        let mut liquid = build_liquid(&config, 0).unwrap();
        let params = SynapseParams { weight: 10.0, delay: 1.5, tau: 3.0, u: 0.5, d: 1.1, f: 0.05 };
        liquid.synapses.push(Synapse::new(1, 0, SynapseClass::EE, params));
        liquid.synapses.push(Synapse::new(2, 0, SynapseClass::EE, params));
        liquid.validate().unwrap();
        liquid
    }

    fn micro_record() -> SpikeRecord {
        SpikeRecord {
            duration: 100.0,
            neurons: vec![
                vec![20.0, 50.0],
                vec![30.0],
                vec![18.0, 48.0],
                vec![17.0],
                vec![49.5],
                vec![],
            ],
            inputs: vec![],
        }
    }

    #[test]
    fn micro_liquid_decision_matches_exhaustive_search() {
        let liquid = micro_liquid();
        let rec = micro_record();
        let k = kernel();
        let mut table = FitnessTable::for_liquid(&liquid);
        for (slot, &(post, pre)) in table.keys.clone().iter().enumerate() {
            table.values[slot] = compute_fitness(&rec.neurons[pre], &rec.neurons[post], 1.5, &k).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let Selection::Swap(d) = select_replacement(&liquid, 0, &table, &rec, &k, &mut rng).unwrap() else {
            panic!("expected a swap");
        };
        // Exhaustive: tag the min over {1, 2}; best over all eligible {3, 4}.
        let c1 = brute_force(&rec.neurons[1], &rec.neurons[0], 1.5, &k);
        let c2 = brute_force(&rec.neurons[2], &rec.neurons[0], 1.5, &k);
        let tagged = if c2 < c1 { 2 } else { 1 };
        assert_eq!(d.s_min_pre, tagged);
        assert_eq!(d.candidates, vec![3, 4]);
        let c3 = brute_force(&rec.neurons[3], &rec.neurons[0], 1.5, &k);
        let c4 = brute_force(&rec.neurons[4], &rec.neurons[0], 1.5, &k);
        let best = if c4 > c3 { 4 } else { 3 };
        assert_eq!(d.r_max, best);
        assert!((d.c_max - c3.max(c4)).abs() < 1e-12);
    }

    #[test]
    fn equal_fitness_tags_lowest_pre() {
        let liquid = micro_liquid();
        let rec = SpikeRecord { duration: 100.0, neurons: vec![vec![10.0], vec![], vec![], vec![], vec![], vec![]], inputs: vec![] };
        let table = FitnessTable::for_liquid(&liquid);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let Selection::Swap(d) = select_replacement(&liquid, 0, &table, &rec, &kernel(), &mut rng).unwrap() else {
            panic!("expected a swap");
        };
        assert_eq!(d.s_min_pre, 1);
        // Silent candidates all score zero; the lowest id wins.
        assert!(d.candidate_fitness.iter().all(|&c| c == 0.0));
        assert_eq!(d.r_max, 3);
    }

    #[test]
    fn neuron_without_ee_input_is_skipped() {
        let liquid = micro_liquid();
        let table = FitnessTable::for_liquid(&liquid);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sel = select_replacement(&liquid, 3, &table, &micro_record(), &kernel(), &mut rng).unwrap();
        assert_eq!(sel, Selection::Skipped { q: 3, reason: SkipReason::NoIncomingEe });
    }

    #[test]
    fn swap_moves_only_the_endpoint() {
        let mut liquid = micro_liquid();
        let before = liquid.parameter_multiset();
        let decision = SwapDecision {
            q: 0,
            s_min: 1,
            s_min_pre: 2,
            c_min: 0.0,
            candidates: vec![4],
            candidate_fitness: vec![0.1],
            r_max: 4,
            c_max: 0.1,
        };
        apply_swap(&mut liquid, &decision).unwrap();
        assert_eq!(liquid.synapses[1].pre, 4);
        assert_eq!(liquid.parameter_multiset(), before);
        liquid.validate().unwrap();
        // Replaying the same decision is now stale.
        assert!(matches!(apply_swap(&mut liquid, &decision), Err(Error::StaleDecision(_))));
    }

    #[test]
    fn swap_to_existing_pre_rejected() {
        let mut liquid = micro_liquid();
        let decision = SwapDecision {
            q: 0,
            s_min: 1,
            s_min_pre: 2,
            c_min: 0.0,
            candidates: vec![1],
            candidate_fitness: vec![0.0],
            r_max: 1,
            c_max: 0.0,
        };
        assert!(apply_swap(&mut liquid, &decision).is_err());
    }

    #[test]
    fn silent_pattern_leaves_liquid_unchanged() {
        let mut liquid = build_liquid(&LiquidConfig::default(), 2).unwrap();
        let before = liquid.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let report = train_pattern(&mut liquid, &[SpikeTrain::empty(0, 500.0)], 500.0, &mut rng).unwrap();
        assert!(report.swaps.is_empty());
        assert_eq!(liquid, before);
    }

    #[test]
    fn audit_lines() {
        let d = SwapDecision {
            q: 5,
            s_min: 0,
            s_min_pre: 7,
            c_min: -0.5,
            candidates: vec![9],
            candidate_fitness: vec![1.25],
            r_max: 9,
            c_max: 1.25,
        };
        assert_eq!(format_audit(3, &[d]), "3 5 7 9 -0.500000000 1.250000000\n");
    }
}
