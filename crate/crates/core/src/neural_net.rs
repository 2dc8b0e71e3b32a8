//! Two-layer ReLU network, squared TD loss, Adam and soft target updates.
//!
//! `y = ReLU(W₂ · ReLU(W₁ x + b₁) + b₂)`. Weight matrices are stored
//! row-major (`W₁[h, i] = w1[h * input + i]`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    input: usize,
    hidden: usize,
    output: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        MlpParams {
            input,
            hidden,
            output,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; output * hidden],
            b2: vec![0.0; output],
        }
    }

    /// Builds parameters from flat arrays, checking every length.
    pub fn from_parts(
        (input, hidden, output): (usize, usize, usize),
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec<f64>,
    ) -> Result<Self> {
        if input == 0 || hidden == 0 || output == 0 {
            return Err(Error::invalid("layer sizes must be at least 1"));
        }
        if w1.len() != hidden * input || b1.len() != hidden || w2.len() != output * hidden || b2.len() != output {
            return Err(Error::invalid("parameter array lengths do not match layer sizes"));
        }
        let p = MlpParams { input, hidden, output, w1, b1, w2, b2 };
        if !p.is_finite() {
            return Err(Error::invalid("parameters must be finite"));
        }
        Ok(p)
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.output
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.input, self.hidden, self.output)
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }

    /// All parameters in the order `W₁, b₁, W₂, b₂`.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
    }

    fn check_congruent(&self, other: &MlpParams) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::invalid(format!(
                "network shapes differ: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    fn hidden_layer(&self, x: &[f64], h: &mut [f64]) {
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &self.w1[j * self.input..(j + 1) * self.input];
            let z = self.b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            *hj = z.max(0.0);
        }
    }

    fn output_pre(&self, h: &[f64], k: usize) -> f64 {
        let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
        self.b2[k] + row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>()
    }

    /// Forward pass without input validation.
    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.hidden];
        self.hidden_layer(x, &mut h);
        (0..self.output).map(|k| self.output_pre(&h, k).max(0.0)).collect()
    }
}

/// Initial output bias. With a ReLU on the output layer, zero biases leave
/// about half of the Q-outputs inactive from the first step, and an inactive
/// output never receives gradient again.
pub const OUTPUT_BIAS_INIT: f64 = 1.0;

/// Uniform weights in `±√(3/fan_in)`, zero hidden biases, output biases
/// [`OUTPUT_BIAS_INIT`].
pub fn init_params(input: usize, hidden: usize, output: usize, seed: u64) -> Result<MlpParams> {
    if input == 0 || hidden == 0 || output == 0 {
        return Err(Error::invalid("layer sizes must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = MlpParams::zeros(input, hidden, output);
    let l1 = (3.0 / input as f64).sqrt();
    for w in &mut p.w1 {
        *w = rng.gen_range(-l1..=l1);
    }
    p.b2.fill(OUTPUT_BIAS_INIT);
    let l2 = (3.0 / hidden as f64).sqrt();
    for w in &mut p.w2 {
        *w = rng.gen_range(-l2..=l2);
    }
    Ok(p)
}

pub fn forward(params: &MlpParams, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != params.input {
        return Err(Error::invalid(format!(
            "input has length {}, network expects {}",
            x.len(),
            params.input
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("input must be finite"));
    }
    Ok(params.forward_unchecked(x))
}

/// One regression sample: push `Q(state, action)` toward `target`.
#[derive(Debug, Clone, Copy)]
pub struct TdSample<'a> {
    pub state: &'a [f64],
    pub action: usize,
    pub target: f64,
}

/// Gradient and value of `(1/B) Σ (Q(sᵢ, aᵢ) − Yᵢ)²`.
///
/// ReLU derivatives at exactly zero are taken as 0.
pub fn grad_td_loss(params: &MlpParams, batch: &[TdSample<'_>]) -> Result<(MlpParams, f64)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let (ni, nh, no) = params.shape();
    let mut grad = MlpParams::zeros(ni, nh, no);
    let mut h = vec![0.0; nh];
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for s in batch {
        if s.state.len() != ni || s.action >= no || !s.target.is_finite() {
            return Err(Error::invalid("malformed TD sample"));
        }
        params.hidden_layer(s.state, &mut h);
        let z = params.output_pre(&h, s.action);
        let q = z.max(0.0);
        let r = q - s.target;
        loss += r * r * scale;
        if z <= 0.0 {
            continue;
        }
        let dz = 2.0 * r * scale;
        let a = s.action;
        grad.b2[a] += dz;
        let w2row = &params.w2[a * nh..(a + 1) * nh];
        let g2row = &mut grad.w2[a * nh..(a + 1) * nh];
        for j in 0..nh {
            if h[j] <= 0.0 {
                continue;
            }
            g2row[j] += dz * h[j];
            let dh = dz * w2row[j];
            grad.b1[j] += dh;
            let g1row = &mut grad.w1[j * ni..(j + 1) * ni];
            for (g, x) in g1row.iter_mut().zip(s.state) {
                *g += dh * x;
            }
        }
    }
    Ok((grad, loss))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: MlpParams,
    pub v: MlpParams,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &MlpParams) -> Self {
        let (i, h, o) = params.shape();
        AdamState {
            m: MlpParams::zeros(i, h, o),
            v: MlpParams::zeros(i, h, o),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam update in place.
pub fn adam_step(params: &mut MlpParams, state: &mut AdamState, grad: &MlpParams, lr: f64) -> Result<()> {
    params.check_congruent(grad)?;
    params.check_congruent(&state.m)?;
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grad.iter())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let mhat = *m / c1;
        let vhat = *v / c2;
        *p -= lr * mhat / (vhat.sqrt() + eps);
    }
    Ok(())
}

/// `θ' ← τ θ' + (1 − τ) θ`.
pub fn soft_update(target: &mut MlpParams, online: &MlpParams, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid(format!("tau {tau} outside [0, 1]")));
    }
    target.check_congruent(online)?;
    for (t, o) in target.iter_mut().zip(online.iter()) {
        *t = tau * *t + (1.0 - tau) * o;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_batch(rng: &mut ChaCha8Rng, ni: usize, no: usize, n: usize) -> Vec<(Vec<f64>, usize, f64)> {
        (0..n)
            .map(|_| {
                let s: Vec<f64> = (0..ni).map(|_| rng.gen_range(0.0..1.0)).collect();
                (s, rng.gen_range(0..no), rng.gen_range(0.0..3.0))
            })
            .collect()
    }

    fn as_samples(b: &[(Vec<f64>, usize, f64)]) -> Vec<TdSample<'_>> {
        b.iter()
            .map(|(s, a, y)| TdSample { state: s, action: *a, target: *y })
            .collect()
    }

    fn loss_of(p: &MlpParams, batch: &[TdSample<'_>]) -> f64 {
        batch
            .iter()
            .map(|s| (p.forward_unchecked(s.state)[s.action] - s.target).powi(2))
            .sum::<f64>()
            / batch.len() as f64
    }

    #[test]
    fn gradient_matches_central_differences() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let mut p = init_params(7, 98, 5, seed).unwrap();
            // Shift output biases so most selected outputs are active.
            for b in &mut p.b2 {
                *b = 1.0;
            }
            let raw = random_batch(&mut rng, 7, 5, 16);
            let batch = as_samples(&raw);
            let (g, loss) = grad_td_loss(&p, &batch).unwrap();
            assert!((loss - loss_of(&p, &batch)).abs() < 1e-12);
            let analytic: Vec<f64> = g.iter().copied().collect();
            let h = 1e-5;
            let mut worst = 0.0f64;
            for k in 0..p.num_params() {
                let mut plus = p.clone();
                *plus.iter_mut().nth(k).unwrap() += h;
                let mut minus = p.clone();
                *minus.iter_mut().nth(k).unwrap() -= h;
                let fd = (loss_of(&plus, &batch) - loss_of(&minus, &batch)) / (2.0 * h);
                let denom = fd.abs().max(analytic[k].abs()).max(1e-3);
                worst = worst.max((fd - analytic[k]).abs() / denom);
            }
            assert!(worst < 1e-5, "seed {seed}: relative error {worst}");
        }
    }

    #[test]
    fn hand_computed_forward() {
        let p = MlpParams::from_parts((1, 1, 1), vec![2.0], vec![-1.0], vec![-3.0], vec![1.0]).unwrap();
        assert_eq!(forward(&p, &[1.0]).unwrap(), vec![0.0]);
        let z = MlpParams::zeros(3, 4, 2);
        assert_eq!(forward(&z, &[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
        assert!(forward(&z, &[1.0]).is_err());
    }

    #[test]
    fn init_shapes_bounds_and_determinism() {
        let a = init_params(7, 98, 5, 3).unwrap();
        let b = init_params(7, 98, 5, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.w1.len(), 98 * 7);
        assert_eq!(a.w2.len(), 5 * 98);
        assert!(a.w1.iter().all(|w| w.abs() <= (3.0f64 / 7.0).sqrt()));
        assert!(a.w2.iter().all(|w| w.abs() <= (3.0f64 / 98.0).sqrt()));
        assert!(a.b1.iter().all(|&b| b == 0.0));
        assert!(a.b2.iter().all(|&b| b == OUTPUT_BIAS_INIT));
        assert_ne!(a, init_params(7, 98, 5, 4).unwrap());
    }

    #[test]
    fn exact_fit_has_zero_gradient_and_scaling_is_quadratic() {
        let p = MlpParams::from_parts((1, 1, 2), vec![1.0], vec![0.0], vec![2.0, 1.0], vec![0.5, 0.0]).unwrap();
        let s = [1.5];
        let q = forward(&p, &s).unwrap();
        let exact = [TdSample { state: &s, action: 0, target: q[0] }];
        let (g, l) = grad_td_loss(&p, &exact).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
        let off1 = [TdSample { state: &s, action: 1, target: q[1] - 0.3 }];
        let off2 = [TdSample { state: &s, action: 1, target: q[1] - 0.6 }];
        let l1 = grad_td_loss(&p, &off1).unwrap().1;
        let l2 = grad_td_loss(&p, &off2).unwrap().1;
        assert!((l2 - 4.0 * l1).abs() < 1e-12);
    }

    #[test]
    fn adam_first_step_and_zero_gradient() {
        let mut p = MlpParams::zeros(2, 3, 2);
        let mut st = AdamState::new(&p);
        let mut g = MlpParams::zeros(2, 3, 2);
        g.iter_mut().for_each(|x| *x = 1.0);
        adam_step(&mut p, &mut st, &g, 0.001).unwrap();
        assert!(p.iter().all(|&x| (x + 0.001).abs() < 1e-6));
        assert_eq!(st.step, 1);

        let start = init_params(2, 3, 2, 1).unwrap();
        let mut q = start.clone();
        let mut st = AdamState::new(&q);
        let zero = MlpParams::zeros(2, 3, 2);
        for _ in 0..100 {
            adam_step(&mut q, &mut st, &zero, 0.01).unwrap();
        }
        assert_eq!(q, start);
    }

    #[test]
    fn soft_update_limits() {
        let online = {
            let mut p = MlpParams::zeros(2, 2, 2);
            p.iter_mut().for_each(|x| *x = 1.0);
            p
        };
        let mut t = MlpParams::zeros(2, 2, 2);
        soft_update(&mut t, &online, 0.999).unwrap();
        assert!(t.iter().all(|&x| (x - 0.001).abs() < 1e-15));
        let before = t.clone();
        soft_update(&mut t, &online, 1.0).unwrap();
        assert_eq!(t, before);
        soft_update(&mut t, &online, 0.0).unwrap();
        assert_eq!(t, online);
        assert!(soft_update(&mut t, &MlpParams::zeros(2, 3, 2), 0.5).is_err());
        assert!(soft_update(&mut t, &online, 1.5).is_err());
    }

    #[test]
    fn soft_update_gap_shrinks_by_tau() {
        let online = init_params(3, 4, 2, 9).unwrap();
        let mut t = init_params(3, 4, 2, 10).unwrap();
        let gap = |t: &MlpParams| t.iter().zip(online.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let g0 = gap(&t);
        let tau: f64 = 0.9;
        for k in 1..=20 {
            soft_update(&mut t, &online, tau).unwrap();
            let expect = g0 * tau.powi(k);
            assert!((gap(&t) - expect).abs() < 1e-12 * g0);
        }
    }

    proptest! {
        #[test]
        fn outputs_are_nonnegative(seed in 0u64..1000, x in prop::collection::vec(-5.0..5.0f64, 7)) {
            let p = init_params(7, 16, 5, seed).unwrap();
            prop_assert!(forward(&p, &x).unwrap().iter().all(|&y| y >= 0.0));
        }
    }
}
