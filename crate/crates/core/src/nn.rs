//! Minimal dense network and Adam optimizer for the Q-function.
//!
//! Hand-rolled on purpose: the Q-network is tiny (two 24-unit ReLU hidden
//! layers) and the training loop needs bitwise-deterministic forwards and
//! an analytically checkable backward pass. Generic over the scalar so the
//! gradient check can run at full `f64` precision while the kernels stay
//! reusable at `f32`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major weights: w[out * n_in + in].
    pub w: Vec<F>,
    pub b: Vec<F>,
}

impl<F: Real> Dense<F> {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            w: vec![F::zero(); n_in * n_out],
            b: vec![F::zero(); n_out],
        }
    }

    fn xavier(n_in: usize, n_out: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        let w = (0..n_in * n_out)
            .map(|_| F::from_f64((rng.gen::<f64>() * 2.0 - 1.0) * limit))
            .collect();
        Self {
            n_in,
            n_out,
            w,
            b: vec![F::zero(); n_out],
        }
    }

    fn affine(&self, x: &[F]) -> Vec<F> {
        let mut out = self.b.clone();
        for (o, out_o) in out.iter_mut().enumerate() {
            let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
            let mut acc = F::zero();
            for (wi, xi) in row.iter().zip(x) {
                acc = acc + *wi * *xi;
            }
            *out_o = *out_o + acc;
        }
        out
    }
}

/// Multilayer perceptron with ReLU hidden activations and a linear output
/// layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F> {
    pub layers: Vec<Dense<F>>,
}

/// Post-activation values per layer boundary: `acts[0]` is the input,
/// `acts[i]` the output of layer i-1 (ReLU-applied for hidden layers).
pub struct ForwardCache<F> {
    pub acts: Vec<Vec<F>>,
}

impl<F> ForwardCache<F> {
    pub fn output(&self) -> &[F] {
        self.acts.last().expect("cache holds at least the input")
    }
}

/// Parameter gradients, shaped like the network.
#[derive(Debug, Clone)]
pub struct Grads<F> {
    pub layers: Vec<Dense<F>>,
}

impl<F: Real> Grads<F> {
    pub fn zeros_like(net: &Mlp<F>) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Dense::zeros(l.n_in, l.n_out))
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &Grads<F>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.w.iter_mut().zip(&b.w) {
                *x = *x + *y;
            }
            for (x, y) in a.b.iter_mut().zip(&b.b) {
                *x = *x + *y;
            }
        }
    }

    pub fn scale(&mut self, s: F) {
        for l in &mut self.layers {
            for x in &mut l.w {
                *x = *x * s;
            }
            for x in &mut l.b {
                *x = *x * s;
            }
        }
    }
}

impl<F: Real> Mlp<F> {
    /// Network with Xavier-uniform weights drawn from `rng` and zero
    /// biases. `sizes` lists every layer width including input and output.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output widths");
        let layers = sizes
            .windows(2)
            .map(|w| Dense::xavier(w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        let layers = sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Self { layers }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.layers.iter().map(|l| l.n_in).collect();
        s.push(self.layers.last().map(|l| l.n_out).unwrap_or(0));
        s
    }

    pub fn n_inputs(&self) -> usize {
        self.layers.first().map(|l| l.n_in).unwrap_or(0)
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().map(|l| l.n_out).unwrap_or(0)
    }

    pub fn forward(&self, x: &[F]) -> Result<Vec<F>> {
        Ok(self.forward_cached(x)?.acts.pop_unwrapped())
    }

    pub fn forward_cached(&self, x: &[F]) -> Result<ForwardCache<F>> {
        if x.len() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs(),
                got: x.len(),
            });
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.affine(acts.last().unwrap());
            if i + 1 < self.layers.len() {
                for v in &mut z {
                    if *v < F::zero() {
                        *v = F::zero();
                    }
                }
            }
            acts.push(z);
        }
        Ok(ForwardCache { acts })
    }

    /// Backpropagates `grad_out` (dLoss/dOutput) through the cached
    /// forward pass.
    pub fn backward(&self, cache: &ForwardCache<F>, grad_out: &[F]) -> Grads<F> {
        let mut grads = Grads::zeros_like(self);
        let mut delta = grad_out.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &cache.acts[l];
            let g = &mut grads.layers[l];
            for (o, &d) in delta.iter().enumerate() {
                g.b[o] = d;
                let row = &mut g.w[o * layer.n_in..(o + 1) * layer.n_in];
                for (gw, xi) in row.iter_mut().zip(input) {
                    *gw = d * *xi;
                }
            }
            if l > 0 {
                let mut prev = vec![F::zero(); layer.n_in];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                    for (p, wi) in prev.iter_mut().zip(row) {
                        *p = *p + *wi * d;
                    }
                }
                // ReLU mask: the l-th boundary activation is the hidden
                // output feeding this layer.
                for (p, a) in prev.iter_mut().zip(&cache.acts[l]) {
                    if *a <= F::zero() {
                        *p = F::zero();
                    }
                }
                delta = prev;
            }
        }
        grads
    }

    /// Copies all parameters from `src` (target-network sync).
    pub fn copy_from(&mut self, src: &Mlp<F>) {
        self.layers.clone_from(&src.layers);
    }

    /// Flat parameter view in layer order (w then b per layer).
    pub fn flatten(&self) -> Vec<F> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    /// Loads parameters from a flat vector produced by [`Mlp::flatten`].
    pub fn load_flat(&mut self, flat: &[F]) -> Result<()> {
        let need: usize = self.layers.iter().map(|l| l.w.len() + l.b.len()).sum();
        if flat.len() != need {
            return Err(Error::DimensionMismatch {
                expected: need,
                got: flat.len(),
            });
        }
        let mut i = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&flat[i..i + nw]);
            i += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&flat[i..i + nb]);
            i += nb;
        }
        Ok(())
    }
}

// Small helper so forward() can move the last activation out of the cache.
trait PopUnwrapped<T> {
    fn pop_unwrapped(self) -> T;
}

impl<F> PopUnwrapped<Vec<F>> for Vec<Vec<F>> {
    fn pop_unwrapped(mut self) -> Vec<F> {
        self.pop().expect("non-empty")
    }
}

/// Adam optimizer over an [`Mlp`]'s parameters.
#[derive(Debug, Clone)]
pub struct Adam<F> {
    pub learning_rate: F,
    pub beta1: F,
    pub beta2: F,
    pub epsilon: F,
    step: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Real> Adam<F> {
    pub fn new(net: &Mlp<F>, learning_rate: F) -> Self {
        let shapes: Vec<Vec<F>> = net
            .layers
            .iter()
            .flat_map(|l| [vec![F::zero(); l.w.len()], vec![F::zero(); l.b.len()]])
            .collect();
        Self {
            learning_rate,
            beta1: F::from_f64(0.9),
            beta2: F::from_f64(0.999),
            epsilon: F::from_f64(1e-8),
            step: 0,
            m: shapes.clone(),
            v: shapes,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One Adam update with bias correction.
    pub fn step(&mut self, net: &mut Mlp<F>, grads: &Grads<F>) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = F::one() - self.beta1.powi(t);
        let bc2 = F::one() - self.beta2.powi(t);
        let mut slot = 0usize;
        for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
            for (params, grad) in [(&mut layer.w, &g.w), (&mut layer.b, &g.b)] {
                let m = &mut self.m[slot];
                let v = &mut self.v[slot];
                for i in 0..params.len() {
                    let gi = grad[i];
                    m[i] = self.beta1 * m[i] + (F::one() - self.beta1) * gi;
                    v[i] = self.beta2 * v[i] + (F::one() - self.beta2) * gi * gi;
                    let mhat = m[i] / bc1;
                    let vhat = v[i] / bc2;
                    params[i] = params[i] - self.learning_rate * mhat / (vhat.sqrt() + self.epsilon);
                }
                slot += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::<f64>::zeros(&[6, 24, 24, 4]);
        let q = net.forward(&[1.0; 6]).unwrap();
        assert_eq!(q, vec![0.0; 4]);
    }

    #[test]
    fn identity_like_net_traced_by_hand() {
        let mut net = Mlp::<f64>::zeros(&[1, 1, 1]);
        net.layers[0].w[0] = 1.0;
        net.layers[1].w[0] = 1.0;
        let q = net.forward(&[2.0]).unwrap();
        assert_eq!(q, vec![2.0]);
        // A negative input is cut by the hidden ReLU.
        let q = net.forward(&[-2.0]).unwrap();
        assert_eq!(q, vec![0.0]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let net = Mlp::<f64>::zeros(&[3, 2]);
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    /// Independent dense-matrix evaluation.
    fn reference_forward(net: &Mlp<f64>, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for (i, l) in net.layers.iter().enumerate() {
            let mut z = vec![0.0; l.n_out];
            for (o, zo) in z.iter_mut().enumerate() {
                *zo = l.b[o]
                    + (0..l.n_in).map(|j| l.w[o * l.n_in + j] * a[j]).sum::<f64>();
            }
            if i + 1 < net.layers.len() {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            }
            a = z;
        }
        a
    }

    #[test]
    fn forward_matches_reference_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let net = Mlp::<f64>::new(&[5, 7, 3], &mut rng);
            let x: Vec<f64> = (0..5).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let got = net.forward(&x).unwrap();
            let expect = reference_forward(&net, &x);
            for (g, e) in got.iter().zip(&expect) {
                assert!((g - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::<f64>::new(&[4, 8, 2], &mut rng);
        let x = vec![0.3, -0.2, 0.9, 0.0];
        let a = net.forward(&x).unwrap();
        let b = net.forward(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flatten_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::<f64>::new(&[4, 6, 3], &mut rng);
        let flat = net.flatten();
        let mut copy = Mlp::<f64>::zeros(&[4, 6, 3]);
        copy.load_flat(&flat).unwrap();
        assert_eq!(net, copy);
    }

    #[test]
    fn adam_descends_a_quadratic() {
        // Minimize (w*x - 1)^2 for a single linear unit.
        let mut net = Mlp::<f64>::zeros(&[1, 1]);
        let mut opt = Adam::new(&net, 0.05);
        let mut last = f64::INFINITY;
        for _ in 0..400 {
            let cache = net.forward_cached(&[1.0]).unwrap();
            let q = cache.output()[0];
            let loss = (q - 1.0).powi(2);
            let grads = net.backward(&cache, &[2.0 * (q - 1.0)]);
            opt.step(&mut net, &grads);
            last = loss;
        }
        assert!(last < 1e-6, "converged, got {last}");
    }

    #[test]
    fn f32_instantiation_matches_f64_loosely() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net64 = Mlp::<f64>::new(&[3, 5, 2], &mut rng);
        let mut net32 = Mlp::<f32>::zeros(&[3, 5, 2]);
        let flat: Vec<f32> = net64.flatten().iter().map(|&v| v as f32).collect();
        net32.load_flat(&flat).unwrap();
        let x64 = [0.5, -0.25, 0.125];
        let x32 = [0.5f32, -0.25, 0.125];
        let y64 = net64.forward(&x64).unwrap();
        let y32 = net32.forward(&x32).unwrap();
        for (a, b) in y64.iter().zip(&y32) {
            assert!((a - *b as f64).abs() < 1e-5);
        }
    }
}
