//! Fully connected tanh networks with hand-written backpropagation.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::PpoError;

/// Affine map `x -> W x + b` with `W` stored as `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            w: Array2::zeros((outputs, inputs)),
            b: Array1::zeros(outputs),
        }
    }

    /// Orthogonal rows (or columns, when taller than wide) scaled by `gain`; zero bias.
    pub fn orthogonal<R: Rng + ?Sized>(inputs: usize, outputs: usize, gain: f64, rng: &mut R) -> Self {
        let (rows, cols) = (inputs.max(outputs), inputs.min(outputs));
        let mut q = Array2::<f64>::zeros((rows, cols));
        q.mapv_inplace(|_| rng.sample(StandardNormal));
        gram_schmidt_columns(&mut q);
        let w = if outputs >= inputs { q } else { q.reversed_axes() };
        // Rebuilt from a flat vector so strides are canonical even for a single row;
        // kernels pick their path by stride, and checkpoints restore canonical strides.
        let flat = w.iter().map(|x| x * gain).collect();
        Self {
            w: Array2::from_shape_vec((outputs, inputs), flat).expect("outputs x inputs values"),
            b: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.w.nrows()
    }
}

/// Orthonormalizes columns in place (modified Gram-Schmidt).
fn gram_schmidt_columns(q: &mut Array2<f64>) {
    for j in 0..q.ncols() {
        for k in 0..j {
            let proj = q.column(j).dot(&q.column(k));
            let prev = q.column(k).to_owned();
            q.column_mut(j).scaled_add(-proj, &prev);
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        if norm > 1e-12 {
            q.column_mut(j).mapv_inplace(|x| x / norm);
        }
    }
}

/// Hyperbolic tangent through one exponential; several times faster than
/// `f64::tanh` and within a few ulps of it.
#[inline]
pub fn tanh(x: f64) -> f64 {
    let a = x.abs();
    let t = if a < 0.25 {
        let e = (-2.0 * a).exp_m1();
        -e / (2.0 + e)
    } else {
        let e = (-2.0 * a).exp();
        (1.0 - e) / (1.0 + e)
    };
    t.copysign(x)
}

/// Stack of layers; tanh after every layer except the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Activations kept from a batched forward pass; `acts[0]` is the input.
#[derive(Debug, Clone)]
pub struct MlpCache {
    acts: Vec<Array2<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("cache holds input and output")
    }
}

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>) -> Self {
        assert!(!layers.is_empty());
        for pair in layers.windows(2) {
            assert_eq!(pair[0].outputs(), pair[1].inputs(), "layer widths must chain");
        }
        Self { layers }
    }

    /// `sizes = [input, hidden.., output]`. Hidden layers use `hidden_gain`, the last `output_gain`.
    pub fn orthogonal<R: Rng + ?Sized>(sizes: &[usize], hidden_gain: f64, output_gain: f64, rng: &mut R) -> Self {
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let gain = if i == last { output_gain } else { hidden_gain };
                Layer::orthogonal(w[0], w[1], gain, rng)
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs(), l.outputs()))
                .collect(),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Single-sample forward pass.
    pub fn forward_one(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.w.dot(&h);
            z += &layer.b;
            if i < last {
                z.mapv_inplace(tanh);
            }
            h = z;
        }
        h
    }

    /// Batched forward pass over rows of `x`, keeping activations for [`Mlp::backward`].
    pub fn forward(&self, x: ArrayView2<f64>) -> MlpCache {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&layer.w.t());
            z += &layer.b;
            if i < last {
                z.mapv_inplace(tanh);
            }
            acts.push(z);
        }
        MlpCache { acts }
    }

    /// Accumulates parameter gradients of a loss with output gradient `d_out` into `grad`.
    pub fn backward(&self, cache: &MlpCache, d_out: ArrayView2<f64>, grad: &mut Mlp) {
        self.backward_impl(cache, d_out, grad, false);
    }

    /// As [`Mlp::backward`], also returning the gradient with respect to the input rows.
    pub fn backward_with_input(&self, cache: &MlpCache, d_out: ArrayView2<f64>, grad: &mut Mlp) -> Array2<f64> {
        self.backward_impl(cache, d_out, grad, true).expect("input gradient requested")
    }

    fn backward_impl(
        &self,
        cache: &MlpCache,
        d_out: ArrayView2<f64>,
        grad: &mut Mlp,
        want_input: bool,
    ) -> Option<Array2<f64>> {
        let mut delta = d_out.to_owned();
        for i in (0..self.layers.len()).rev() {
            let input = &cache.acts[i];
            let g = &mut grad.layers[i];
            ndarray::linalg::general_mat_mul(1.0, &delta.t(), input, 1.0, &mut g.w);
            g.b += &delta.sum_axis(Axis(0));
            if i == 0 && !want_input {
                return None;
            }
            let mut d_input = delta.dot(&self.layers[i].w);
            if i > 0 {
                d_input.zip_mut_with(input, |d, &h| *d *= 1.0 - h * h);
            }
            delta = d_input;
        }
        Some(delta)
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| {
            [
                l.w.as_slice().expect("standard layout"),
                l.b.as_slice().expect("standard layout"),
            ]
        })
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers.iter_mut().flat_map(|l| {
            [
                l.w.as_slice_mut().expect("standard layout"),
                l.b.as_slice_mut().expect("standard layout"),
            ]
        })
    }
}

/// Actor and critic weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub critic: Mlp,
}

impl PolicyParams {
    /// Orthogonal init: gain sqrt(2) on hidden layers, 0.01 on the policy head, 1 on the value head.
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, n_actions: usize, hidden: &[usize], rng: &mut R) -> Self {
        let sizes = |out: usize| {
            let mut s = vec![obs_dim];
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        let g = std::f64::consts::SQRT_2;
        let actor = Mlp::orthogonal(&sizes(n_actions), g, 0.01, rng);
        let critic = Mlp::orthogonal(&sizes(1), g, 1.0, rng);
        Self { actor, critic }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            actor: self.actor.zeros_like(),
            critic: self.critic.zeros_like(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn n_actions(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn num_params(&self) -> usize {
        self.actor.num_params() + self.critic.num_params()
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.actor.tensors().chain(self.critic.tensors())
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.actor.tensors_mut().chain(self.critic.tensors_mut())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Euclidean norm over every parameter.
    pub fn norm(&self) -> f64 {
        self.tensors()
            .flat_map(|t| t.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }
}

/// Logits and state value for one observation.
pub fn policy_forward(params: &PolicyParams, observation: &[f64]) -> Result<(Vec<f64>, f64), PpoError> {
    if observation.len() != params.obs_dim() {
        return Err(PpoError::ShapeMismatch {
            expected: params.obs_dim(),
            found: observation.len(),
        });
    }
    let x = ArrayView1::from(observation);
    let logits = params.actor.forward_one(x).to_vec();
    let value = params.critic.forward_one(x)[0];
    Ok((logits, value))
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
    fn orthogonal_rows_and_columns() {
        let mut r = rng(1);
        for &(i, o) in &[(5usize, 3usize), (3, 5), (4, 4)] {
            let l = Layer::orthogonal(i, o, 2.0, &mut r);
            assert_eq!(l.w.dim(), (o, i));
            let gram = if o <= i { l.w.dot(&l.w.t()) } else { l.w.t().dot(&l.w) };
            for ((a, b), &v) in gram.indexed_iter() {
                let want = if a == b { 4.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-10, "{i}x{o} gram[{a},{b}] = {v}");
            }
        }
    }

    #[test]
    fn fast_tanh_matches_std() {
        for i in -4000..=4000 {
            let x = i as f64 * 0.005 + 1e-7;
            let (a, b) = (tanh(x), x.tanh());
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs().max(1e-300), "{x}: {a} vs {b}");
        }
        assert_eq!(tanh(800.0), 1.0);
        assert_eq!(tanh(-800.0), -1.0);
        assert_eq!(tanh(0.0), 0.0);
    }

    #[test]
    fn zero_weights_give_zero_outputs() {
        let p = PolicyParams::new(7, 3, &[8, 8], &mut rng(0));
        let z = p.zeros_like();
        let (logits, value) = policy_forward(&z, &[0.3; 7]).unwrap();
        assert_eq!(logits, vec![0.0; 3]);
        assert_eq!(value, 0.0);
    }

    #[test]
    fn forward_is_pure_and_checks_shape() {
        let p = PolicyParams::new(4, 2, &[6, 6], &mut rng(3));
        let x = [0.1, -0.5, 0.9, 0.0];
        assert_eq!(policy_forward(&p, &x).unwrap(), policy_forward(&p, &x).unwrap());
        assert!(matches!(
            policy_forward(&p, &x[..3]),
            Err(PpoError::ShapeMismatch { expected: 4, found: 3 })
        ));
    }

    #[test]
    fn batched_forward_matches_single() {
        let p = PolicyParams::new(5, 3, &[16, 16], &mut rng(4));
        let x = Array2::from_shape_fn((4, 5), |(i, j)| ((i * 5 + j) as f64 * 0.37).sin());
        let out = p.actor.forward(x.view());
        for i in 0..4 {
            let one = p.actor.forward_one(x.row(i));
            for k in 0..3 {
                assert!((out.output()[[i, k]] - one[k]).abs() < 1e-14);
            }
        }
    }

    /// f(x) = sum_k c_k * logits_k(x) + value(x); analytic dx vs central differences.
    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut r = rng(9);
        for trial in 0..10 {
            let p = PolicyParams::new(6, 4, &[12, 12], &mut r);
            let x: Vec<f64> = (0..6).map(|_| r.gen_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
            let f = |x: &[f64]| {
                let (l, v) = policy_forward(&p, x).unwrap();
                l.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() + v
            };
            let xa = Array2::from_shape_vec((1, 6), x.clone()).unwrap();
            let ca = p.actor.forward(xa.view());
            let cc = p.critic.forward(xa.view());
            let mut ga = p.actor.zeros_like();
            let mut gc = p.critic.zeros_like();
            let d_logits = Array2::from_shape_vec((1, 4), c.clone()).unwrap();
            let dx = p.actor.backward_with_input(&ca, d_logits.view(), &mut ga)
                + p.critic.backward_with_input(&cc, Array2::ones((1, 1)).view(), &mut gc);
            for i in 0..6 {
                let h = 1e-6;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (f(&xp) - f(&xm)) / (2.0 * h);
                let an = dx[[0, i]];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                assert!(rel <= 1e-6, "trial {trial} input {i}: fd {fd} analytic {an} rel {rel}");
            }
        }
    }
}
