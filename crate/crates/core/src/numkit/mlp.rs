//! Sequential dense networks with dropout, layer normalisation and manual backprop.
//!
//! Each layer computes `affine -> dropout -> layernorm -> activation`.
//! Parameters live in one flat buffer so optimizers and target averaging work
//! on slices. Layout per layer: weight (`out x in`, row-major), bias, then the
//! layernorm gain and offset when enabled.

use serde::{Deserialize, Serialize};

use super::matrix::{gemm, Matrix, Operand};
use crate::error::{invalid, shape_err, Result};
use crate::prob::RngState;

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
    pub dropout: f64,
    pub layer_norm: bool,
}

impl LayerSpec {
    pub fn dense(input: usize, output: usize, activation: Activation) -> Self {
        Self { input, output, activation, dropout: 0.0, layer_norm: false }
    }

    fn param_count(&self) -> usize {
        self.input * self.output + self.output + if self.layer_norm { 2 * self.output } else { 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Offsets {
    weight: usize,
    bias: usize,
    norm: usize,
    end: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<LayerSpec>,
    offsets: Vec<Offsets>,
    params: Vec<f64>,
}

/// Named view of one parameter tensor inside [`Mlp::params`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSlot {
    pub name: String,
    pub shape: Vec<usize>,
    pub range: std::ops::Range<usize>,
}

#[derive(Clone, Debug)]
struct NormCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

/// Intermediates of one forward pass, consumed by [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `activations[0]` is the input, `activations[i + 1]` the output of layer `i`.
    activations: Vec<Matrix>,
    masks: Vec<Option<Vec<f64>>>,
    norms: Vec<Option<NormCache>>,
}

impl ForwardCache {
    pub fn masks(&self) -> &[Option<Vec<f64>>] {
        &self.masks
    }

    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("cache holds at least the input")
    }

    pub fn batch(&self) -> usize {
        self.activations[0].rows()
    }
}

enum Masks<'a, 'r> {
    Off,
    Draw(&'r mut RngState),
    Replay(&'a [Option<Vec<f64>>]),
}

impl Mlp {
    /// Zero-initialised network (layernorm gains start at one).
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return invalid("network needs at least one layer");
        }
        for (i, l) in layers.iter().enumerate() {
            if l.input == 0 || l.output == 0 {
                return invalid(format!("layer {i} has a zero width"));
            }
            if !(0.0..1.0).contains(&l.dropout) {
                return invalid(format!("layer {i} dropout {} outside [0, 1)", l.dropout));
            }
            if i > 0 && layers[i - 1].output != l.input {
                return shape_err(format!(
                    "layer {} outputs {} but layer {i} expects {}",
                    i - 1,
                    layers[i - 1].output,
                    l.input
                ));
            }
        }
        let mut offsets = Vec::with_capacity(layers.len());
        let mut cursor = 0;
        for l in &layers {
            let weight = cursor;
            let bias = weight + l.input * l.output;
            let norm = bias + l.output;
            let end = cursor + l.param_count();
            offsets.push(Offsets { weight, bias, norm, end });
            cursor = end;
        }
        let mut net = Self { layers, offsets, params: vec![0.0; cursor] };
        for (l, o) in net.layers.iter().zip(&net.offsets) {
            if l.layer_norm {
                net.params[o.norm..o.norm + l.output].fill(1.0);
            }
        }
        Ok(net)
    }

    /// Kaiming-uniform weights (`U(+-sqrt(6 / fan_in))`), zero biases, unit gains.
    pub fn kaiming(layers: Vec<LayerSpec>, rng: &mut RngState) -> Result<Self> {
        let mut net = Self::new(layers)?;
        for (l, o) in net.layers.iter().zip(&net.offsets) {
            let bound = (6.0 / l.input as f64).sqrt();
            for w in &mut net.params[o.weight..o.bias] {
                *w = rng.uniform_range(-bound, bound);
            }
        }
        Ok(net)
    }

    /// Hidden layers of the given widths with ReLU, then a linear output layer.
    /// Dropout and layernorm, when requested, apply to the hidden layers only.
    pub fn stack(input: usize, hidden: &[usize], output: usize, dropout: f64, layer_norm: bool) -> Vec<LayerSpec> {
        let mut specs = Vec::with_capacity(hidden.len() + 1);
        let mut width = input;
        for &h in hidden {
            specs.push(LayerSpec { input: width, output: h, activation: Activation::Relu, dropout, layer_norm });
            width = h;
        }
        specs.push(LayerSpec::dense(width, output, Activation::None));
        specs
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map(|l| l.output).unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn has_dropout(&self) -> bool {
        self.layers.iter().any(|l| l.dropout > 0.0)
    }

    pub fn param_slots(&self) -> Vec<ParamSlot> {
        let mut slots = Vec::new();
        for (i, (l, o)) in self.layers.iter().zip(&self.offsets).enumerate() {
            slots.push(ParamSlot { name: format!("layer{i}.weight"), shape: vec![l.output, l.input], range: o.weight..o.bias });
            slots.push(ParamSlot { name: format!("layer{i}.bias"), shape: vec![l.output], range: o.bias..o.norm });
            if l.layer_norm {
                slots.push(ParamSlot { name: format!("layer{i}.gain"), shape: vec![l.output], range: o.norm..o.norm + l.output });
                slots.push(ParamSlot { name: format!("layer{i}.offset"), shape: vec![l.output], range: o.norm + l.output..o.end });
            }
        }
        slots
    }

    /// Forward pass. In train mode, dropout masks are drawn from `rng`
    /// (required whenever some layer has dropout).
    pub fn forward(&self, input: &Matrix, mode: Mode, rng: Option<&mut RngState>) -> Result<(Matrix, ForwardCache)> {
        let masks = match (mode, self.has_dropout()) {
            (Mode::Train, true) => match rng {
                Some(r) => Masks::Draw(r),
                None => return invalid("train-mode forward with dropout needs a random stream"),
            },
            _ => Masks::Off,
        };
        self.run(input, masks)
    }

    /// Forward pass reusing the dropout masks of an earlier train-mode pass.
    pub fn forward_with_masks(&self, input: &Matrix, masks: &[Option<Vec<f64>>]) -> Result<(Matrix, ForwardCache)> {
        if masks.len() != self.layers.len() {
            return shape_err(format!("{} masks for {} layers", masks.len(), self.layers.len()));
        }
        self.run(input, Masks::Replay(masks))
    }

    /// Eval-mode forward without keeping intermediates.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        self.check_input(input)?;
        let mut x = input.clone();
        for (l, o) in self.layers.iter().zip(&self.offsets) {
            let mut z = self.affine(l, o, &x);
            if l.layer_norm {
                self.layer_norm(l, o, &mut z, None);
            }
            if l.activation == Activation::Relu {
                relu(&mut z);
            }
            x = z;
        }
        Ok(x)
    }

    fn check_input(&self, input: &Matrix) -> Result<()> {
        if input.cols() != self.input_width() {
            return shape_err(format!("input width {} but network expects {}", input.cols(), self.input_width()));
        }
        Ok(())
    }

    fn affine(&self, l: &LayerSpec, o: &Offsets, x: &Matrix) -> Matrix {
        let n = x.rows();
        let mut z = Matrix::zeros(n, l.output);
        let w = Operand::new(&self.params[o.weight..o.bias], l.output, l.input, true);
        gemm(1.0, x.op(false), w, 0.0, z.data_mut(), n, l.output);
        let bias = &self.params[o.bias..o.norm];
        for i in 0..n {
            for (v, b) in z.row_mut(i).iter_mut().zip(bias) {
                *v += b;
            }
        }
        z
    }

    fn layer_norm(&self, l: &LayerSpec, o: &Offsets, z: &mut Matrix, cache: Option<&mut NormCache>) {
        let width = l.output;
        let gain = &self.params[o.norm..o.norm + width];
        let offset = &self.params[o.norm + width..o.end];
        let mut cache = cache;
        for i in 0..z.rows() {
            let row = z.row_mut(i);
            let mean = row.iter().sum::<f64>() / width as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / width as f64;
            let inv_std = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            if let Some(c) = cache.as_deref_mut() {
                c.inv_std[i] = inv_std;
                let xh = &mut c.xhat[i * width..(i + 1) * width];
                for (j, v) in row.iter_mut().enumerate() {
                    let h = (*v - mean) * inv_std;
                    xh[j] = h;
                    *v = gain[j] * h + offset[j];
                }
            } else {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = gain[j] * ((*v - mean) * inv_std) + offset[j];
                }
            }
        }
    }

    fn run(&self, input: &Matrix, mut masks: Masks<'_, '_>) -> Result<(Matrix, ForwardCache)> {
        self.check_input(input)?;
        let n = input.rows();
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut mask_out = Vec::with_capacity(self.layers.len());
        let mut norms = Vec::with_capacity(self.layers.len());
        activations.push(input.clone());
        for (idx, (l, o)) in self.layers.iter().zip(&self.offsets).enumerate() {
            let mut z = self.affine(l, o, &activations[idx]);
            let mask = match &mut masks {
                Masks::Off => None,
                Masks::Draw(rng) if l.dropout > 0.0 => {
                    let keep = 1.0 / (1.0 - l.dropout);
                    Some((0..n * l.output).map(|_| if rng.uniform() < l.dropout { 0.0 } else { keep }).collect::<Vec<f64>>())
                }
                Masks::Draw(_) => None,
                Masks::Replay(m) => {
                    let m = m[idx].clone();
                    if let Some(v) = &m {
                        if v.len() != n * l.output {
                            return shape_err(format!("mask for layer {idx} has {} entries, expected {}", v.len(), n * l.output));
                        }
                    }
                    m
                }
            };
            if let Some(m) = &mask {
                for (v, k) in z.data_mut().iter_mut().zip(m) {
                    *v *= k;
                }
            }
            let norm = if l.layer_norm {
                let mut c = NormCache { xhat: vec![0.0; n * l.output], inv_std: vec![0.0; n] };
                self.layer_norm(l, o, &mut z, Some(&mut c));
                Some(c)
            } else {
                None
            };
            if l.activation == Activation::Relu {
                relu(&mut z);
            }
            activations.push(z);
            mask_out.push(mask);
            norms.push(norm);
        }
        let out = activations.last().cloned().expect("at least one layer");
        Ok((out, ForwardCache { activations, masks: mask_out, norms }))
    }

    /// Reverse-mode pass; returns parameter gradients and the input gradient.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Matrix) -> Result<(Vec<f64>, Matrix)> {
        let mut grads = vec![0.0; self.params.len()];
        let dx = self.backward_into(cache, grad_out, &mut grads, true)?;
        Ok((grads, dx.expect("input gradient requested")))
    }

    /// Accumulates parameter gradients into `grads`; computes the input
    /// gradient only when `want_input` is set.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        grad_out: &Matrix,
        grads: &mut [f64],
        want_input: bool,
    ) -> Result<Option<Matrix>> {
        if cache.activations.len() != self.layers.len() + 1 {
            return shape_err("forward cache was produced by a different network");
        }
        if grads.len() != self.params.len() {
            return shape_err(format!("gradient buffer of {} for {} parameters", grads.len(), self.params.len()));
        }
        let n = cache.batch();
        if grad_out.rows() != n || grad_out.cols() != self.output_width() {
            return shape_err(format!(
                "output gradient is {}x{}, expected {}x{}",
                grad_out.rows(),
                grad_out.cols(),
                n,
                self.output_width()
            ));
        }
        for (idx, l) in self.layers.iter().enumerate() {
            let a = &cache.activations[idx + 1];
            if a.rows() != n || a.cols() != l.output || cache.activations[idx].cols() != l.input {
                return shape_err(format!("forward cache layer {idx} does not match the network"));
            }
        }

        let mut g = grad_out.clone();
        for idx in (0..self.layers.len()).rev() {
            let l = &self.layers[idx];
            let o = &self.offsets[idx];
            let out = &cache.activations[idx + 1];
            if l.activation == Activation::Relu {
                for (gv, av) in g.data_mut().iter_mut().zip(out.data()) {
                    if *av <= 0.0 {
                        *gv = 0.0;
                    }
                }
            }
            if let Some(nc) = &cache.norms[idx] {
                let width = l.output;
                let gain = &self.params[o.norm..o.norm + width];
                let (dgain, doffset) = grads[o.norm..o.end].split_at_mut(width);
                for i in 0..n {
                    let xh = &nc.xhat[i * width..(i + 1) * width];
                    let row = g.row_mut(i);
                    let mut mean_g = 0.0;
                    let mut mean_gx = 0.0;
                    for j in 0..width {
                        dgain[j] += row[j] * xh[j];
                        doffset[j] += row[j];
                        let gx = row[j] * gain[j];
                        mean_g += gx;
                        mean_gx += gx * xh[j];
                    }
                    mean_g /= width as f64;
                    mean_gx /= width as f64;
                    let inv_std = nc.inv_std[i];
                    for j in 0..width {
                        let gx = row[j] * gain[j];
                        row[j] = inv_std * (gx - mean_g - xh[j] * mean_gx);
                    }
                }
            }
            if let Some(m) = &cache.masks[idx] {
                for (gv, k) in g.data_mut().iter_mut().zip(m) {
                    *gv *= k;
                }
            }
            let x = &cache.activations[idx];
            gemm(1.0, g.op(true), x.op(false), 1.0, &mut grads[o.weight..o.bias], l.output, l.input);
            let db = &mut grads[o.bias..o.norm];
            for i in 0..n {
                for (d, v) in db.iter_mut().zip(g.row(i)) {
                    *d += v;
                }
            }
            if idx == 0 && !want_input {
                return Ok(None);
            }
            let mut dx = Matrix::zeros(n, l.input);
            let w = Operand::new(&self.params[o.weight..o.bias], l.output, l.input, false);
            gemm(1.0, g.op(false), w, 0.0, dx.data_mut(), n, l.input);
            g = dx;
        }
        Ok(Some(g))
    }
}

#[inline]
fn relu(z: &mut Matrix) {
    for v in z.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_input(rng: &mut RngState, rows: usize, cols: usize) -> Matrix {
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
    }

    /// `sum(w .* output)` for fixed weights, so `grad_out = w`.
    fn weighted_sum(out: &Matrix, w: &Matrix) -> f64 {
        out.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::new(Mlp::stack(3, &[8, 8], 2, 0.0, false)).unwrap();
        let out = net.predict(&Matrix::from_rows(&[vec![1.0, -2.0, 3.0]]).unwrap()).unwrap();
        assert!(out.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let mut net = Mlp::new(vec![LayerSpec::dense(3, 3, Activation::None)]).unwrap();
        for i in 0..3 {
            net.params_mut()[i * 3 + i] = 1.0;
        }
        let x = Matrix::from_rows(&[vec![0.5, -1.5, 2.0], vec![3.0, 0.0, -0.25]]).unwrap();
        let (y, _) = net.forward(&x, Mode::Train, None).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let bad = vec![LayerSpec::dense(2, 4, Activation::Relu), LayerSpec::dense(5, 1, Activation::None)];
        assert!(Mlp::new(bad).is_err());
        let net = Mlp::new(Mlp::stack(2, &[4], 1, 0.0, false)).unwrap();
        assert!(net.predict(&Matrix::zeros(1, 3)).is_err());
        let mut bad_p = Mlp::stack(2, &[4], 1, 0.0, false);
        bad_p[0].dropout = 1.0;
        assert!(Mlp::new(bad_p).is_err());
    }

    #[test]
    fn dropout_needs_rng_in_train_mode() {
        let net = Mlp::kaiming(Mlp::stack(2, &[4], 1, 0.1, false), &mut RngState::new(0)).unwrap();
        assert!(net.forward(&Matrix::zeros(1, 2), Mode::Train, None).is_err());
        assert!(net.forward(&Matrix::zeros(1, 2), Mode::Eval, None).is_ok());
    }

    #[test]
    fn mask_replay_is_bit_identical() {
        let mut rng = RngState::new(3);
        let net = Mlp::kaiming(Mlp::stack(2, &[128, 128], 1, 0.2, true), &mut rng).unwrap();
        let x = random_input(&mut rng, 16, 2);
        let (y1, cache) = net.forward(&x, Mode::Train, Some(&mut rng)).unwrap();
        let (y2, _) = net.forward_with_masks(&x, cache.masks()).unwrap();
        let (y3, _) = net.forward_with_masks(&x, cache.masks()).unwrap();
        assert_eq!(y1, y2);
        assert_eq!(y2, y3);
    }

    #[test]
    fn eval_forward_is_deterministic_and_matches_predict() {
        let mut rng = RngState::new(4);
        let net = Mlp::kaiming(Mlp::stack(3, &[16, 16], 2, 0.3, true), &mut rng).unwrap();
        let x = random_input(&mut rng, 5, 3);
        let (a, _) = net.forward(&x, Mode::Eval, None).unwrap();
        let (b, _) = net.forward(&x, Mode::Eval, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, net.predict(&x).unwrap());
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let mut rng = RngState::new(5);
        let net = Mlp::kaiming(Mlp::stack(3, &[8], 2, 0.0, true), &mut rng).unwrap();
        let x = random_input(&mut rng, 4, 3);
        let (_, cache) = net.forward(&x, Mode::Train, None).unwrap();
        let (g, dx) = net.backward(&cache, &Matrix::zeros(4, 2)).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
        assert!(dx.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_layer_weight_gradient_is_outer_product() {
        let mut rng = RngState::new(6);
        let net = Mlp::kaiming(vec![LayerSpec::dense(3, 2, Activation::None)], &mut rng).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 2.0, -1.0]]).unwrap();
        let g = Matrix::from_rows(&[vec![0.5, -3.0]]).unwrap();
        let (_, cache) = net.forward(&x, Mode::Train, None).unwrap();
        let (grads, _) = net.backward(&cache, &g).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(grads[i * 3 + j], g.get(0, i) * x.get(0, j));
            }
            assert_eq!(grads[6 + i], g.get(0, i));
        }
    }

    #[test]
    fn cache_from_other_network_is_rejected() {
        let mut rng = RngState::new(7);
        let a = Mlp::kaiming(Mlp::stack(3, &[8], 2, 0.0, false), &mut rng).unwrap();
        let b = Mlp::kaiming(Mlp::stack(3, &[8, 8], 2, 0.0, false), &mut rng).unwrap();
        let (_, cache) = a.forward(&Matrix::zeros(1, 3), Mode::Eval, None).unwrap();
        assert!(b.backward(&cache, &Matrix::zeros(1, 2)).is_err());
    }

    /// Central differences in f64 against the analytic gradient.
    pub(crate) fn check_gradients(net: &Mlp, x: &Matrix, rng: &mut RngState) {
        let (y, cache) = net.forward(x, Mode::Train, Some(rng)).unwrap();
        let w = random_input(rng, y.rows(), y.cols());
        let (grads, dx) = net.backward(&cache, &w).unwrap();
        let masks = cache.masks().to_vec();
        let h = 1e-5;
        let f = |n: &Mlp, x: &Matrix| weighted_sum(&n.forward_with_masks(x, &masks).unwrap().0, &w);
        for k in 0..net.param_count() {
            let mut p = net.clone();
            p.params_mut()[k] += h;
            let mut q = net.clone();
            q.params_mut()[k] -= h;
            let fd = (f(&p, x) - f(&q, x)) / (2.0 * h);
            let tol = 1e-4 * fd.abs().max(grads[k].abs()) + 1e-7;
            assert!((fd - grads[k]).abs() <= tol, "param {k}: fd {fd} vs {}", grads[k]);
        }
        for k in 0..x.data().len() {
            let mut p = x.clone();
            p.data_mut()[k] += h;
            let mut q = x.clone();
            q.data_mut()[k] -= h;
            let fd = (f(net, &p) - f(net, &q)) / (2.0 * h);
            let an = dx.data()[k];
            assert!((fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()) + 1e-7, "input {k}: fd {fd} vs {an}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let mut rng = RngState::new(100 + seed);
            for (dropout, ln) in [(0.0, false), (0.0, true), (0.25, false), (0.25, true)] {
                let mut net = Mlp::kaiming(Mlp::stack(3, &[7, 6], 2, dropout, ln), &mut rng).unwrap();
                // Nonzero biases and gains keep preactivations off the ReLU kink.
                for p in net.params_mut() {
                    *p += 0.1 * rng.normal();
                }
                let x = random_input(&mut rng, 4, 3);
                check_gradients(&net, &x, &mut rng);
            }
        }
    }

    #[test]
    fn dropout_expectation_matches_eval_output() {
        // Linear network: E[train output] over masks equals eval output.
        let mut rng = RngState::new(9);
        let specs = vec![
            LayerSpec { input: 3, output: 6, activation: Activation::None, dropout: 0.3, layer_norm: false },
            LayerSpec::dense(6, 1, Activation::None),
        ];
        let net = Mlp::kaiming(specs, &mut rng).unwrap();
        let x = Matrix::from_rows(&[vec![0.4, -1.2, 0.9]]).unwrap();
        let eval = net.predict(&x).unwrap().get(0, 0);
        let n = 20_000;
        let draws: Vec<f64> =
            (0..n).map(|_| net.forward(&x, Mode::Train, Some(&mut rng)).unwrap().0.get(0, 0)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let sd = (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((mean - eval).abs() < 3.0 * sd / (n as f64).sqrt(), "{mean} vs {eval}");
    }

    #[test]
    fn same_seed_same_init() {
        let a = Mlp::kaiming(Mlp::stack(2, &[5], 1, 0.0, false), &mut RngState::new(1)).unwrap();
        let b = Mlp::kaiming(Mlp::stack(2, &[5], 1, 0.0, false), &mut RngState::new(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn param_slots_tile_the_buffer() {
        let net = Mlp::new(Mlp::stack(3, &[4], 2, 0.0, true)).unwrap();
        let slots = net.param_slots();
        let mut cursor = 0;
        for s in &slots {
            assert_eq!(s.range.start, cursor);
            assert_eq!(s.range.len(), s.shape.iter().product::<usize>());
            cursor = s.range.end;
        }
        assert_eq!(cursor, net.param_count());
    }
}
