//! Clock-driven LIF simulation with dynamic synapses and axonal delays.
//!
//! Membrane and synaptic currents are advanced with their exact exponential
//! propagators over each step of length `dt`, so the only discretization
//! error is spike-time quantization. Synaptic currents are single
//! exponentials; synapses sharing a time constant share one accumulator per
//! postsynaptic neuron. A spike is emitted at the end of the step in which
//! `v >= v_threshold`, and reaches its targets `ceil(delay / dt)` steps later.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::liquid::{DynamicState, Liquid, Synapse, SynapseClass, SynapseParams};
use crate::patterns::SpikeTrain;

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeRecord {
    pub duration: f64,
    /// Sorted spike times per liquid neuron (ms).
    pub neurons: Vec<Vec<f64>>,
    /// Sorted spike times per input line (ms).
    pub inputs: Vec<Vec<f64>>,
}

impl SpikeRecord {
    pub fn total_spikes(&self) -> usize {
        self.neurons.iter().map(Vec::len).sum()
    }

    /// Mean firing rate per neuron in Hz.
    pub fn mean_rate(&self) -> f64 {
        if self.neurons.is_empty() || self.duration <= 0.0 {
            return 0.0;
        }
        self.total_spikes() as f64 / (self.neurons.len() as f64 * self.duration / 1000.0)
    }

    pub fn last_spike(&self) -> Option<f64> {
        self.neurons
            .iter()
            .filter_map(|s| s.last().copied())
            .max_by(f64::total_cmp)
    }

    /// `neuron_id time_ms` per spike, sorted by time then neuron.
    pub fn dump(&self) -> String {
        let mut rows: Vec<(f64, usize)> = self
            .neurons
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |&t| (t, i)))
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut out = String::with_capacity(rows.len() * 12);
        for (t, i) in rows {
            let _ = writeln!(out, "{i} {t:.4}");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronState {
    pub v: f64,
    pub refractory_until: f64,
}

/// Receives every liquid spike in emission order (time, then neuron id).
pub trait SpikeObserver {
    fn on_spike(&mut self, neuron: usize, t: f64);
}

impl SpikeObserver for () {
    fn on_spike(&mut self, _neuron: usize, _t: f64) {}
}

/// Tsodyks-Markram update for a presynaptic spike at `t` (ms).
///
/// `u_{n+1} = U + u_n (1 - U) e^{-dt/F}` and
/// `R_{n+1} = 1 + (R_n - u_n R_n - 1) e^{-dt/D}`; the returned efficacy is
/// `u_{n+1} R_{n+1}`. The first spike sees `u = U, R = 1`.
pub fn dynamic_synapse_event(syn: &mut Synapse, t_spike: f64) -> Result<f64> {
    if let Some(last) = syn.state.t_last {
        if t_spike < last {
            return Err(Error::NonMonotonicTime { time: t_spike, last });
        }
    }
    Ok(tm_efficacy(&syn.params, &mut syn.state, t_spike))
}

#[inline]
fn tm_efficacy(params: &SynapseParams, state: &mut DynamicState, t: f64) -> f64 {
    if let Some(last) = state.t_last {
        let gap_s = (t - last) / 1000.0;
        let u_prev = state.u;
        state.u = params.u + u_prev * (1.0 - params.u) * (-gap_s / params.f).exp();
        state.r = 1.0 + (state.r - u_prev * state.r - 1.0) * (-gap_s / params.d).exp();
    }
    state.t_last = Some(t);
    state.u * state.r
}

#[derive(Debug, Clone, Copy)]
struct Outgoing {
    /// Index into the current accumulator (`group * n + post`).
    target: u32,
    delay_steps: u32,
    synapse: u32,
    weight: f64,
    dynamic: bool,
}

#[derive(Debug, Clone, Copy)]
struct InputArrival {
    target: u32,
    delay: f64,
    weight: f64,
}

/// Per-run options beyond the stimulus.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Extra constant current (nA) per neuron, added to the background.
    pub injected_current: Option<Vec<f64>>,
    /// Initial membrane voltages; defaults to `v_reset` everywhere.
    pub initial_v: Option<Vec<f64>>,
    /// Neurons whose membrane voltage is recorded at every step end.
    pub record_membrane: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: SpikeRecord,
    /// One trace per entry of `RunOptions::record_membrane`.
    pub membrane: Vec<Vec<f64>>,
    pub final_state: Vec<NeuronState>,
}

/// A liquid compiled for repeated simulation.
#[derive(Debug, Clone)]
pub struct Simulator {
    n: usize,
    n_lines: usize,
    dt: f64,
    v_threshold: f64,
    v_reset: f64,
    background: f64,
    resistance: f64,
    membrane_decay: f64,
    group_decay: Vec<f64>,
    group_coupling: Vec<f64>,
    refractory_steps: Vec<u32>,
    refractory_ms: Vec<f64>,
    outgoing: Vec<Vec<Outgoing>>,
    input_fanout: Vec<Vec<InputArrival>>,
    synapse_params: Vec<SynapseParams>,
    ring_len: usize,
}

fn delay_steps(delay: f64, dt: f64) -> u32 {
    ((delay / dt) - 1e-9).ceil().max(1.0) as u32
}

impl Simulator {
    pub fn new(liquid: &Liquid) -> Result<Self> {
        liquid.config.validate()?;
        let cfg = &liquid.config;
        let n = liquid.n_neurons();
        let dt = cfg.dt;
        let scale = cfg.weight_scale;
        let membrane_decay = (-dt / cfg.tau_membrane).exp();

        let mut taus: Vec<f64> = Vec::new();
        let mut group_of = |tau: f64| -> usize {
            match taus.iter().position(|&t| t.to_bits() == tau.to_bits()) {
                Some(g) => g,
                None => {
                    taus.push(tau);
                    taus.len() - 1
                }
            }
        };

        let mut outgoing = vec![Vec::new(); n];
        let mut max_delay = 1;
        for (k, s) in liquid.synapses.iter().enumerate() {
            let g = group_of(s.params.tau);
            let steps = delay_steps(s.params.delay, dt);
            max_delay = max_delay.max(steps);
            outgoing[s.pre].push(Outgoing {
                target: (g * n + s.post) as u32,
                delay_steps: steps,
                synapse: k as u32,
                weight: s.params.weight * scale,
                dynamic: s.class != SynapseClass::Input,
            });
        }
        let mut input_fanout = vec![Vec::new(); cfg.n_input_lines];
        for s in &liquid.inputs {
            let g = group_of(s.params.tau);
            input_fanout[s.pre].push(InputArrival {
                target: (g * n + s.post) as u32,
                delay: s.params.delay,
                weight: s.params.weight * scale,
            });
        }

        let tm = cfg.tau_membrane;
        let group_decay: Vec<f64> = taus.iter().map(|&tau| (-dt / tau).exp()).collect();
        let group_coupling = taus
            .iter()
            .zip(&group_decay)
            .map(|(&tau, &ps)| {
                let r = cfg.input_resistance;
                if (tau - tm).abs() < 1e-12 {
                    r * (dt / tm) * membrane_decay
                } else {
                    r * tau / (tau - tm) * (ps - membrane_decay)
                }
            })
            .collect();

        let refractory_ms: Vec<f64> = liquid
            .neurons
            .iter()
            .map(|nrn| {
                if liquid.is_excitatory(nrn.id) {
                    cfg.refractory_exc
                } else {
                    cfg.refractory_inh
                }
            })
            .collect();
        let refractory_steps = refractory_ms.iter().map(|&r| (r / dt).round() as u32).collect();

        Ok(Self {
            n,
            n_lines: cfg.n_input_lines,
            dt,
            v_threshold: cfg.v_threshold,
            v_reset: cfg.v_reset,
            background: cfg.i_background,
            resistance: cfg.input_resistance,
            membrane_decay,
            group_decay,
            group_coupling,
            refractory_steps,
            refractory_ms,
            outgoing,
            input_fanout,
            synapse_params: liquid.synapses.iter().map(|s| s.params).collect(),
            ring_len: max_delay as usize + 2,
        })
    }

    pub fn n_neurons(&self) -> usize {
        self.n
    }

    pub fn run(&self, input: &[SpikeTrain], duration: f64) -> Result<SpikeRecord> {
        Ok(self.run_with(input, duration, &RunOptions::default(), &mut ())?.record)
    }

    pub fn run_observed(
        &self,
        input: &[SpikeTrain],
        duration: f64,
        observer: &mut dyn SpikeObserver,
    ) -> Result<SpikeRecord> {
        Ok(self.run_with(input, duration, &RunOptions::default(), observer)?.record)
    }

    fn check_input(&self, input: &[SpikeTrain], duration: f64) -> Result<()> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::Input(format!("duration must be positive, got {duration}")));
        }
        for (k, train) in input.iter().enumerate() {
            if train.line != k {
                return Err(Error::Input(format!("train at position {k} is tagged as line {}", train.line)));
            }
            if k >= self.n_lines && !train.times.is_empty() {
                return Err(Error::Input(format!(
                    "input line {k} does not exist (liquid has {} lines)",
                    self.n_lines
                )));
            }
            if let Some(&t) = train.times.iter().find(|&&t| !(0.0..=duration).contains(&t)) {
                return Err(Error::Input(format!("input spike at {t} ms outside [0, {duration}]")));
            }
        }
        Ok(())
    }

    pub fn run_with(
        &self,
        input: &[SpikeTrain],
        duration: f64,
        options: &RunOptions,
        observer: &mut dyn SpikeObserver,
    ) -> Result<RunOutput> {
        self.check_input(input, duration)?;
        let n = self.n;
        let dt = self.dt;
        let n_steps = (duration / dt).round() as usize;
        let n_groups = self.group_decay.len();

        let mut v_inf = vec![self.resistance * self.background; n];
        if let Some(extra) = &options.injected_current {
            if extra.len() != n {
                return Err(Error::Shape { expected: n, actual: extra.len() });
            }
            for (v, i) in v_inf.iter_mut().zip(extra) {
                *v += self.resistance * i;
            }
        }
        let mut v = match &options.initial_v {
            Some(init) if init.len() != n => return Err(Error::Shape { expected: n, actual: init.len() }),
            Some(init) => init.clone(),
            None => vec![self.v_reset; n],
        };

        // Input arrivals, sorted by step.
        let mut arrivals: Vec<(usize, u32, f64)> = Vec::new();
        for (line, train) in input.iter().enumerate().take(self.n_lines) {
            for &t in &train.times {
                for a in &self.input_fanout[line] {
                    let step = ((t + a.delay) / dt - 1e-9).ceil().max(0.0) as usize;
                    if step < n_steps {
                        arrivals.push((step, a.target, a.weight));
                    }
                }
            }
        }
        arrivals.sort_by_key(|a| (a.0, a.1));
        let mut next_arrival = 0;

        let mut tm_state: Vec<DynamicState> = self.synapse_params.iter().map(DynamicState::at_rest).collect();
        let width = n_groups * n;
        let mut current = vec![0.0; width];
        let mut ring = vec![0.0; self.ring_len * width];
        let mut refractory = vec![0u32; n];
        let mut last_spike = vec![f64::NEG_INFINITY; n];
        let mut spikes: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut membrane: Vec<Vec<f64>> = options
            .record_membrane
            .iter()
            .map(|_| Vec::with_capacity(n_steps))
            .collect();
        let mut fired: Vec<usize> = Vec::new();

        for step in 0..n_steps {
            let slot = (step % self.ring_len) * width;
            for (c, r) in current.iter_mut().zip(&mut ring[slot..slot + width]) {
                *c += *r;
                *r = 0.0;
            }
            while next_arrival < arrivals.len() && arrivals[next_arrival].0 == step {
                let (_, target, w) = arrivals[next_arrival];
                current[target as usize] += w;
                next_arrival += 1;
            }

            fired.clear();
            for i in 0..n {
                if refractory[i] > 0 {
                    refractory[i] -= 1;
                    v[i] = self.v_reset;
                } else {
                    let mut vi = v_inf[i] + (v[i] - v_inf[i]) * self.membrane_decay;
                    for g in 0..n_groups {
                        vi += self.group_coupling[g] * current[g * n + i];
                    }
                    if vi >= self.v_threshold {
                        vi = self.v_reset;
                        refractory[i] = self.refractory_steps[i];
                        fired.push(i);
                    }
                    v[i] = vi;
                }
            }
            for g in 0..n_groups {
                let decay = self.group_decay[g];
                for c in &mut current[g * n..(g + 1) * n] {
                    *c *= decay;
                }
            }
            for (trace, &i) in membrane.iter_mut().zip(&options.record_membrane) {
                trace.push(v[i]);
            }

            let t = (step + 1) as f64 * dt;
            for &i in &fired {
                spikes[i].push(t);
                last_spike[i] = t;
                observer.on_spike(i, t);
                for o in &self.outgoing[i] {
                    let efficacy = if o.dynamic {
                        let k = o.synapse as usize;
                        tm_efficacy(&self.synapse_params[k], &mut tm_state[k], t)
                    } else {
                        1.0
                    };
                    let at = ((step + 1 + o.delay_steps as usize) % self.ring_len) * width;
                    ring[at + o.target as usize] += o.weight * efficacy;
                }
            }
        }

        let final_state = (0..n)
            .map(|i| NeuronState {
                v: v[i],
                refractory_until: last_spike[i] + self.refractory_ms[i],
            })
            .collect();
        Ok(RunOutput {
            record: SpikeRecord {
                duration,
                neurons: spikes,
                inputs: (0..self.n_lines)
                    .map(|l| input.get(l).map(|tr| tr.times.clone()).unwrap_or_default())
                    .collect(),
            },
            membrane,
            final_state,
        })
    }
}

/// Simulate one stimulus on a liquid.
pub fn run(liquid: &Liquid, input: &[SpikeTrain], duration: f64) -> Result<SpikeRecord> {
    Simulator::new(liquid)?.run(input, duration)
}

/// Firing-rate band targeted by [`calibrate_scale`], in Hz per neuron.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RateBand {
    pub lo: f64,
    pub hi: f64,
}

impl Default for RateBand {
    fn default() -> Self {
        Self { lo: 5.0, hi: 20.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub scale: f64,
    pub rate: f64,
    pub iterations: usize,
}

const CALIBRATION_ITERATIONS: usize = 40;
const MAX_SCALE: f64 = 1.0e6;

/// Mean firing rate (Hz) of `liquid` with its weights multiplied by `scale`.
pub fn rate_at_scale(liquid: &Liquid, reference: &[SpikeTrain], duration: f64, scale: f64) -> Result<f64> {
    let mut probe = liquid.clone();
    probe.config.weight_scale = scale;
    Ok(run(&probe, reference, duration)?.mean_rate())
}

/// Search the global weight scale so that the mean rate on `reference` lies
/// in `band`, starting from the liquid's configured scale (or 1 if that is
/// zero). Doubles the scale until the band is reached or overshot, then
/// bisects. Fails after 40 simulations.
pub fn calibrate_scale(
    liquid: &Liquid,
    reference: &[SpikeTrain],
    duration: f64,
    band: RateBand,
) -> Result<Calibration> {
    if reference.iter().all(|t| t.times.is_empty()) {
        return Err(Error::Calibration("reference pattern has no spikes".into()));
    }
    let mut iterations = 0;
    let probe = |scale: f64, iterations: &mut usize| -> Result<f64> {
        *iterations += 1;
        rate_at_scale(liquid, reference, duration, scale)
    };

    let floor = probe(0.0, &mut iterations)?;
    if floor > band.hi {
        return Err(Error::Calibration(format!(
            "liquid saturates without synaptic drive ({floor:.2} Hz)"
        )));
    }
    let mut lo = 0.0;
    let mut hi = if liquid.config.weight_scale > 0.0 { liquid.config.weight_scale } else { 1.0 };
    loop {
        let rate = probe(hi, &mut iterations)?;
        if rate >= band.lo && rate <= band.hi {
            return Ok(Calibration { scale: hi, rate, iterations });
        }
        if rate > band.hi {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > MAX_SCALE || iterations >= CALIBRATION_ITERATIONS {
            return Err(Error::Calibration(format!(
                "liquid stays below {} Hz up to scale {lo}",
                band.lo
            )));
        }
    }
    while iterations < CALIBRATION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let rate = probe(mid, &mut iterations)?;
        if rate >= band.lo && rate <= band.hi {
            return Ok(Calibration { scale: mid, rate, iterations });
        }
        if rate < band.lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Calibration(format!(
        "rate band [{}, {}] Hz not reached within {CALIBRATION_ITERATIONS} iterations (scale in [{lo}, {hi}])",
        band.lo, band.hi
    )))
}
