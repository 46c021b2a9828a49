//! Slow, direct reference computations. None of these share code with the
//! library implementations they check.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

/// Unit-peak difference of exponentials `exp(-t/ts) - exp(-t/tf)`.
pub fn kernel(t: f64, tau_slow: f64, tau_fast: f64) -> f64 {
    let peak = tau_slow * tau_fast / (tau_slow - tau_fast) * (tau_slow / tau_fast).ln();
    let norm = (-peak / tau_slow).exp() - (-peak / tau_fast).exp();
    ((-t / tau_slow).exp() - (-t / tau_fast).exp()) / norm
}

/// Fitness of `pre -> post` as a double sum over spike pairs: potentiation
/// for arrivals strictly before each postsynaptic spike, depression for
/// postsynaptic spikes strictly before each arrival.
pub fn fitness(pre: &[f64], post: &[f64], delay: f64, tau_slow: f64, tau_fast: f64) -> f64 {
    let mut c = 0.0;
    for &t in post {
        for &s in pre {
            if s + delay < t {
                c += kernel(t - s - delay, tau_slow, tau_fast);
            }
        }
    }
    for &s in pre {
        for &r in post {
            if r < s + delay {
                c -= kernel(s + delay - r, tau_slow, tau_fast);
            }
        }
    }
    c
}

/// Efficacies of a depressing/facilitating synapse from RK4 integration of
/// `du/dt = -u/F`, `dR/dt = (1 - R)/D` between spikes, with the jump
/// `u += U (1 - u)` then release `R -= u R` at each spike. `D`, `F` in seconds,
/// spike times in ms.
pub fn tm_efficacies(u_base: f64, d_s: f64, f_s: f64, times: &[f64]) -> Vec<f64> {
    let (d, f) = (d_s * 1000.0, f_s * 1000.0);
    let (mut u, mut r) = (0.0f64, 1.0f64);
    let mut out = Vec::with_capacity(times.len());
    let mut t_prev: Option<f64> = None;
    for &t in times {
        if let Some(tp) = t_prev {
            let steps = 2000;
            let h = (t - tp) / steps as f64;
            let fu = |x: f64| -x / f;
            let fr = |x: f64| (1.0 - x) / d;
            for _ in 0..steps {
                let (k1, l1) = (fu(u), fr(r));
                let (k2, l2) = (fu(u + 0.5 * h * k1), fr(r + 0.5 * h * l1));
                let (k3, l3) = (fu(u + 0.5 * h * k2), fr(r + 0.5 * h * l2));
                let (k4, l4) = (fu(u + h * k3), fr(r + h * l3));
                u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                r += h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
            }
        }
        u += u_base * (1.0 - u);
        let efficacy = u * r;
        out.push(efficacy);
        r -= efficacy;
        t_prev = Some(t);
    }
    out
}

/// Rank of a row-major integer matrix by Gaussian elimination over the rationals.
pub fn exact_rank(rows: usize, cols: usize, entries: &[i64]) -> usize {
    assert_eq!(entries.len(), rows * cols);
    let mut m: Vec<Vec<BigRational>> = (0..rows)
        .map(|i| (0..cols).map(|j| BigRational::from_integer(BigInt::from(entries[i * cols + j]))).collect())
        .collect();
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, pivot);
        for r in 0..rows {
            if r != rank && !m[r][col].is_zero() {
                let factor = &m[r][col] / &m[rank][col];
                for c in col..cols {
                    let delta = &factor * &m[rank][c];
                    m[r][c] -= delta;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Firing rate (Hz) of a LIF neuron under constant input: the membrane
/// relaxes from `v_reset` toward `r * i` and must cross `v_th`.
pub fn lif_rate(i: f64, r: f64, tau: f64, v_th: f64, v_reset: f64, t_ref: f64) -> f64 {
    let v_inf = r * i;
    if v_inf <= v_th {
        return 0.0;
    }
    1000.0 / (t_ref + tau * ((v_inf - v_reset) / (v_inf - v_th)).ln())
}
