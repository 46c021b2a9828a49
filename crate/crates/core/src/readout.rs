//! One-vs-all perceptron readout over liquid end states.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutParams {
    pub epochs: usize,
    pub rate: f64,
    pub seed: u64,
}

impl Default for ReadoutParams {
    fn default() -> Self {
        Self { epochs: 500, rate: 0.01, seed: 0 }
    }
}

/// `n_classes` perceptrons over `n_inputs` features plus a bias.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptronLayer {
    n_inputs: usize,
    /// Row-major `n_classes x (n_inputs + 1)`, bias last.
    weights: Vec<f64>,
    n_classes: usize,
    pub epochs: usize,
    pub rate: f64,
}

impl PerceptronLayer {
    pub fn zeros(n_classes: usize, n_inputs: usize) -> Self {
        Self {
            n_inputs,
            n_classes,
            weights: vec![0.0; n_classes * (n_inputs + 1)],
            epochs: 0,
            rate: 0.0,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn row(&self, class: usize) -> &[f64] {
        let w = self.n_inputs + 1;
        &self.weights[class * w..(class + 1) * w]
    }

    pub fn row_mut(&mut self, class: usize) -> &mut [f64] {
        let w = self.n_inputs + 1;
        &mut self.weights[class * w..(class + 1) * w]
    }

    fn check(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.n_inputs {
            return Err(Error::Shape { expected: self.n_inputs, actual: state.len() });
        }
        Ok(())
    }

    fn activation_unchecked(&self, class: usize, state: &[f64]) -> f64 {
        let row = self.row(class);
        row[..self.n_inputs].iter().zip(state).map(|(w, x)| w * x).sum::<f64>() + row[self.n_inputs]
    }

    pub fn activations(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check(state)?;
        Ok((0..self.n_classes).map(|c| self.activation_unchecked(c, state)).collect())
    }

    /// Class with the largest activation; ties go to the lowest id.
    pub fn classify(&self, state: &[f64]) -> Result<usize> {
        let acts = self.activations(state)?;
        let mut best = 0;
        for (c, &a) in acts.iter().enumerate().skip(1) {
            if a > acts[best] {
                best = c;
            }
        }
        Ok(best)
    }

    pub fn accuracy(&self, states: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
        if states.len() != labels.len() || states.is_empty() {
            return Err(Error::Shape { expected: states.len(), actual: labels.len() });
        }
        let mut correct = 0;
        for (s, &l) in states.iter().zip(labels) {
            if self.classify(s)? == l {
                correct += 1;
            }
        }
        Ok(correct as f64 / states.len() as f64)
    }

    /// Header line `n_classes n_inputs`, then one row of weights per class.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n_classes, self.n_inputs);
        for c in 0..self.n_classes {
            let row: Vec<String> = self.row(c).iter().map(|w| format!("{w:e}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let parse_err = |line: usize, message: String| Error::Parse { line: line + 1, message };
        let (hline, header) = lines.next().ok_or_else(|| parse_err(0, "missing header".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|e| parse_err(hline, format!("bad header field {t:?}: {e}"))))
            .collect::<Result<_>>()?;
        let [n_classes, n_inputs] = dims[..] else {
            return Err(parse_err(hline, "header must be `n_classes n_inputs`".into()));
        };
        let mut layer = Self::zeros(n_classes, n_inputs);
        for c in 0..n_classes {
            let (lno, line) = lines
                .next()
                .ok_or_else(|| parse_err(hline, format!("missing weight row {c}")))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|e| parse_err(lno, format!("bad weight {t:?}: {e}"))))
                .collect::<Result<_>>()?;
            if row.len() != n_inputs + 1 {
                return Err(parse_err(lno, format!("expected {} weights, got {}", n_inputs + 1, row.len())));
            }
            layer.row_mut(c).copy_from_slice(&row);
        }
        if let Some((lno, _)) = lines.next() {
            return Err(parse_err(lno, "trailing data".into()));
        }
        Ok(layer)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Train one perceptron per class with the classic rule
/// `w += rate * (target - predicted) * [x; 1]`, targets in {0, 1} and
/// predictions thresholded at zero, visiting samples in a fresh shuffled
/// order every epoch.
pub fn train_readout(states: &[Vec<f64>], labels: &[usize], params: &ReadoutParams) -> Result<PerceptronLayer> {
    if states.len() != labels.len() || states.is_empty() {
        return Err(Error::Shape { expected: states.len(), actual: labels.len() });
    }
    let n_inputs = states[0].len();
    if let Some(s) = states.iter().find(|s| s.len() != n_inputs) {
        return Err(Error::Shape { expected: n_inputs, actual: s.len() });
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut counts = vec![0usize; n_classes];
    labels.iter().for_each(|&l| counts[l] += 1);
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Input(format!("class {c} has no training samples")));
    }

    let mut layer = PerceptronLayer::zeros(n_classes, n_inputs);
    layer.epochs = params.epochs;
    layer.rate = params.rate;
    let mut order: Vec<usize> = (0..states.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            let x = &states[k];
            for c in 0..n_classes {
                let target = f64::from(u8::from(labels[k] == c));
                let predicted = f64::from(u8::from(layer.activation_unchecked(c, x) > 0.0));
                let step = params.rate * (target - predicted);
                if step != 0.0 {
                    let row = layer.row_mut(c);
                    row[..n_inputs].iter_mut().zip(x).for_each(|(w, xi)| *w += step * xi);
                    row[n_inputs] += step;
                }
            }
        }
    }
    Ok(layer)
}
