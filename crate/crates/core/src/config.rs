//! Liquid configuration.
//!
//! Every field has a default reproducing the reference liquid: a single
//! 15x3x3 column of 135 LIF neurons (80% excitatory) with dynamic synapses.
//! Times are in ms except the dynamic-synapse recovery constants `d_*` and
//! `f_*`, which are in seconds. Currents are in nA, resistance in MOhm and
//! voltages in mV, so that `R * I` is directly in mV.
//!
//! Config files are flat TOML documents whose keys mirror the field names.
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiquidConfig {
    pub n_neurons: usize,
    pub excitatory_fraction: f64,
    pub column_dims: [usize; 3],

    pub conn_prob_ee: f64,
    pub conn_prob_ei: f64,
    pub conn_prob_ie: f64,
    pub conn_prob_ii: f64,

    pub tau_membrane: f64,
    pub input_resistance: f64,
    pub refractory_exc: f64,
    pub refractory_inh: f64,
    pub v_threshold: f64,
    pub v_reset: f64,
    pub i_background: f64,

    pub u_ee: f64,
    pub d_ee: f64,
    pub f_ee: f64,
    pub u_ei: f64,
    pub d_ei: f64,
    pub f_ei: f64,
    pub u_ie: f64,
    pub d_ie: f64,
    pub f_ie: f64,
    pub u_ii: f64,
    pub d_ii: f64,
    pub f_ii: f64,
    /// Standard deviation of U, D and F as a fraction of the class mean.
    pub udf_std_fraction: f64,

    pub tau_syn_exc: f64,
    pub tau_syn_inh: f64,
    pub delay_ee: f64,
    pub delay_other: f64,

    /// Signed class mean weights (nA, before `weight_scale`).
    pub weight_ee: f64,
    pub weight_ei: f64,
    pub weight_ie: f64,
    pub weight_ii: f64,
    /// Coefficient of variation of the gamma-distributed weight magnitudes.
    pub weight_cv: f64,
    /// Global multiplier applied to every synaptic current at simulation time.
    pub weight_scale: f64,

    pub n_input_lines: usize,
    pub input_conn_prob: f64,
    pub input_weight: f64,

    /// Number of silent candidate synapses evaluated per firing neuron.
    pub n_silent: usize,
    pub kernel_tau_slow: f64,
    pub kernel_tau_fast: f64,

    pub dt: f64,
}

impl Default for LiquidConfig {
    fn default() -> Self {
        Self {
            n_neurons: 135,
            excitatory_fraction: 0.8,
            column_dims: [15, 3, 3],
            conn_prob_ee: 0.3,
            conn_prob_ei: 0.2,
            conn_prob_ie: 0.4,
            conn_prob_ii: 0.1,
            tau_membrane: 30.0,
            input_resistance: 1.0,
            refractory_exc: 3.0,
            refractory_inh: 2.0,
            v_threshold: 15.0,
            v_reset: 13.5,
            i_background: 13.5,
            u_ee: 0.5,
            d_ee: 1.1,
            f_ee: 0.05,
            u_ei: 0.05,
            d_ei: 0.125,
            f_ei: 1.2,
            u_ie: 0.25,
            d_ie: 0.7,
            f_ie: 0.02,
            u_ii: 0.32,
            d_ii: 0.144,
            f_ii: 0.06,
            udf_std_fraction: 0.5,
            tau_syn_exc: 3.0,
            tau_syn_inh: 6.0,
            delay_ee: 1.5,
            delay_other: 0.8,
            weight_ee: 30.0,
            weight_ei: 60.0,
            weight_ie: -19.0,
            weight_ii: -19.0,
            weight_cv: 0.7,
            weight_scale: 1.0,
            n_input_lines: 1,
            input_conn_prob: 0.3,
            input_weight: 18.0,
            n_silent: 25,
            kernel_tau_slow: 3.0,
            kernel_tau_fast: 0.05,
            dt: 0.1,
        }
    }
}

impl LiquidConfig {
    /// Number of excitatory neurons; they occupy ids `0..n_excitatory()`.
    pub fn n_excitatory(&self) -> usize {
        (self.n_neurons as f64 * self.excitatory_fraction).round() as usize
    }

    pub fn n_inhibitory(&self) -> usize {
        self.n_neurons - self.n_excitatory()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: LiquidConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("liquid config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));

        if self.n_neurons == 0 {
            return fail("n_neurons must be positive".into());
        }
        if !(self.excitatory_fraction > 0.0 && self.excitatory_fraction < 1.0) {
            return fail(format!(
                "excitatory_fraction must lie in (0, 1), got {}",
                self.excitatory_fraction
            ));
        }
        let cells: usize = self.column_dims.iter().product();
        if cells != self.n_neurons {
            return fail(format!(
                "column_dims {:?} hold {} cells but n_neurons is {}",
                self.column_dims, cells, self.n_neurons
            ));
        }

        for (name, p) in [
            ("conn_prob_ee", self.conn_prob_ee),
            ("conn_prob_ei", self.conn_prob_ei),
            ("conn_prob_ie", self.conn_prob_ie),
            ("conn_prob_ii", self.conn_prob_ii),
            ("input_conn_prob", self.input_conn_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} must lie in [0, 1], got {p}"));
            }
        }

        let time_constants = [
            ("tau_membrane", self.tau_membrane),
            ("tau_syn_exc", self.tau_syn_exc),
            ("tau_syn_inh", self.tau_syn_inh),
            ("kernel_tau_slow", self.kernel_tau_slow),
            ("kernel_tau_fast", self.kernel_tau_fast),
            ("d_ee", self.d_ee),
            ("f_ee", self.f_ee),
            ("d_ei", self.d_ei),
            ("f_ei", self.f_ei),
            ("d_ie", self.d_ie),
            ("f_ie", self.f_ie),
            ("d_ii", self.d_ii),
            ("f_ii", self.f_ii),
        ];
        for (name, tau) in time_constants {
            if !(tau > 0.0) {
                return fail(format!("{name} must be positive, got {tau}"));
            }
        }
        if self.kernel_tau_fast >= self.kernel_tau_slow {
            return fail("kernel_tau_fast must be smaller than kernel_tau_slow".into());
        }
        for (name, u) in [
            ("u_ee", self.u_ee),
            ("u_ei", self.u_ei),
            ("u_ie", self.u_ie),
            ("u_ii", self.u_ii),
        ] {
            if !(u > 0.0 && u <= 1.0) {
                return fail(format!("{name} must lie in (0, 1], got {u}"));
            }
        }
        for (name, v) in [
            ("input_resistance", self.input_resistance),
            ("refractory_exc", self.refractory_exc),
            ("refractory_inh", self.refractory_inh),
            ("delay_ee", self.delay_ee),
            ("delay_other", self.delay_other),
            ("dt", self.dt),
        ] {
            if !(v > 0.0) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.udf_std_fraction >= 0.0) || !(self.weight_cv > 0.0) {
            return fail("udf_std_fraction must be >= 0 and weight_cv > 0".into());
        }
        if !(self.weight_scale >= 0.0) || !self.weight_scale.is_finite() {
            return fail(format!("weight_scale must be finite and >= 0, got {}", self.weight_scale));
        }
        if self.weight_ee <= 0.0 || self.weight_ei <= 0.0 {
            return fail("excitatory class weights must be positive".into());
        }
        if self.weight_ie >= 0.0 || self.weight_ii >= 0.0 {
            return fail("inhibitory class weights must be negative".into());
        }
        if self.input_weight < 0.0 {
            return fail("input_weight must be non-negative".into());
        }
        if self.v_reset >= self.v_threshold {
            return fail("v_reset must lie below v_threshold".into());
        }

        // The kernel's fast constant is evaluated analytically and is exempt.
        let smallest = [
            self.tau_membrane,
            self.tau_syn_exc,
            self.tau_syn_inh,
            self.delay_ee,
            self.delay_other,
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
        if self.dt >= smallest {
            return fail(format!(
                "dt ({}) must be smaller than every time constant and delay ({smallest})",
                self.dt
            ));
        }
        Ok(())
    }
}
