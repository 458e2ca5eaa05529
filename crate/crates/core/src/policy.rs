//! Permutation-invariant design policy: a pair encoder whose outputs are
//! sum-pooled into a history summary, and an emitter mapping the summary to
//! a squashed Gaussian over raw actions.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result};
use crate::numkit::{ForwardCache, Matrix, Mlp, Mode};
use crate::prob::{squash, squash_backward, RngState, TanhNormal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyWidths {
    pub encoder_hidden: Vec<usize>,
    pub summary: usize,
    pub emitter_hidden: Vec<usize>,
}

impl Default for PolicyWidths {
    fn default() -> Self {
        Self { encoder_hidden: vec![128, 128], summary: 64, emitter_hidden: vec![128, 128] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmitMode {
    Sample,
    Mean,
}

/// Pooled history representation `B_t` and the number of pairs folded into it.
#[derive(Clone, Debug, PartialEq)]
pub struct HistorySummary {
    pub b: Vec<f64>,
    pub steps: usize,
}

impl HistorySummary {
    pub fn zero(width: usize) -> Self {
        Self { b: vec![0.0; width], steps: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyNet {
    design_dim: usize,
    outcome_dim: usize,
    encoder: Mlp,
    emitter: Mlp,
}

/// A batch of reparameterised actions with what is needed to backpropagate.
#[derive(Clone, Debug)]
pub struct ActionBatch {
    pub actions: Matrix,
    pub log_probs: Vec<f64>,
    noise: Matrix,
    head: Matrix,
    cache: ForwardCache,
}

/// Gradients of `w . action + c * log_prob` for a single history.
#[derive(Clone, Debug)]
pub struct PathwiseGrad {
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub encoder: Vec<f64>,
    pub emitter: Vec<f64>,
}

impl PolicyNet {
    /// Kaiming-uniform weights, zero biases.
    pub fn init(rng: &mut RngState, design_dim: usize, outcome_dim: usize, widths: &PolicyWidths) -> Result<Self> {
        if design_dim == 0 || outcome_dim == 0 || widths.summary == 0 {
            return invalid("policy dimensions must be positive");
        }
        let encoder = Mlp::kaiming(
            Mlp::stack(design_dim + outcome_dim, &widths.encoder_hidden, widths.summary, 0.0, false),
            rng,
        )?;
        let emitter = Mlp::kaiming(Mlp::stack(widths.summary, &widths.emitter_hidden, 2 * design_dim, 0.0, false), rng)?;
        Ok(Self { design_dim, outcome_dim, encoder, emitter })
    }

    pub fn from_parts(design_dim: usize, outcome_dim: usize, encoder: Mlp, emitter: Mlp) -> Result<Self> {
        if encoder.input_width() != design_dim + outcome_dim
            || emitter.input_width() != encoder.output_width()
            || emitter.output_width() != 2 * design_dim
        {
            return shape_err("encoder and emitter widths do not fit together");
        }
        Ok(Self { design_dim, outcome_dim, encoder, emitter })
    }

    pub fn design_dim(&self) -> usize {
        self.design_dim
    }

    pub fn outcome_dim(&self) -> usize {
        self.outcome_dim
    }

    pub fn pair_width(&self) -> usize {
        self.design_dim + self.outcome_dim
    }

    pub fn summary_width(&self) -> usize {
        self.encoder.output_width()
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn emitter(&self) -> &Mlp {
        &self.emitter
    }

    pub fn encoder_mut(&mut self) -> &mut Mlp {
        &mut self.encoder
    }

    pub fn emitter_mut(&mut self) -> &mut Mlp {
        &mut self.emitter
    }

    /// `B + encoder(xi, y)` for scaled inputs.
    pub fn summary_update(&self, summary: &mut HistorySummary, xi_scaled: &[f64], y_scaled: &[f64]) -> Result<()> {
        if xi_scaled.len() != self.design_dim || y_scaled.len() != self.outcome_dim {
            return shape_err("design/outcome widths do not match the encoder");
        }
        if summary.b.len() != self.summary_width() {
            return shape_err("summary width does not match the encoder");
        }
        let mut row = xi_scaled.to_vec();
        row.extend_from_slice(y_scaled);
        let inc = self.encoder.predict(&Matrix::row_vector(&row))?;
        for (b, v) in summary.b.iter_mut().zip(inc.data()) {
            *b += v;
        }
        summary.steps += 1;
        Ok(())
    }

    /// Summary of a history given as rows of `[xi_scaled | y_scaled]`.
    pub fn summarize(&self, pairs: &Matrix) -> Result<HistorySummary> {
        let mut s = HistorySummary::zero(self.summary_width());
        if pairs.rows() == 0 {
            return Ok(s);
        }
        let enc = self.encoder.predict(pairs)?;
        for i in 0..enc.rows() {
            for (b, v) in s.b.iter_mut().zip(enc.row(i)) {
                *b += v;
            }
        }
        s.steps = pairs.rows();
        Ok(s)
    }

    /// The action distribution at a summary.
    pub fn distribution(&self, b: &[f64]) -> Result<TanhNormal> {
        if b.len() != self.summary_width() {
            return shape_err("summary width does not match the emitter");
        }
        let head = self.emitter.predict(&Matrix::row_vector(b))?;
        let (mean, log_std) = head.data().split_at(self.design_dim);
        TanhNormal::new(mean.to_vec(), log_std.to_vec())
    }

    /// Raw action in `(-1, 1)^d` and its log density.
    pub fn emit_design(&self, b: &[f64], mode: EmitMode, rng: &mut RngState) -> Result<(Vec<f64>, f64)> {
        let dist = self.distribution(b)?;
        Ok(match mode {
            EmitMode::Sample => {
                let s = dist.sample(rng);
                (s.action, s.log_prob)
            }
            EmitMode::Mean => dist.mode(),
        })
    }

    /// Pre-squash means and raw log-stds for a batch of summaries.
    pub fn heads(&self, summaries: &Matrix) -> Result<Matrix> {
        self.emitter.predict(summaries)
    }

    /// Reparameterised samples for each summary row.
    pub fn sample_batch(&self, summaries: &Matrix, rng: &mut RngState) -> Result<ActionBatch> {
        let n = summaries.rows();
        let noise = Matrix::from_vec(n, self.design_dim, (0..n * self.design_dim).map(|_| rng.normal()).collect())?;
        self.sample_batch_with_noise(summaries, noise)
    }

    pub fn sample_batch_with_noise(&self, summaries: &Matrix, noise: Matrix) -> Result<ActionBatch> {
        let n = summaries.rows();
        if noise.rows() != n || noise.cols() != self.design_dim {
            return shape_err("noise shape does not match the batch");
        }
        let (head, cache) = self.emitter.forward(summaries, Mode::Train, None)?;
        let d = self.design_dim;
        let mut actions = Matrix::zeros(n, d);
        let mut log_probs = vec![0.0; n];
        for i in 0..n {
            let (mean, log_std) = head.row(i).split_at(d);
            log_probs[i] = squash(mean, log_std, noise.row(i), actions.row_mut(i));
        }
        Ok(ActionBatch { actions, log_probs, noise, head, cache })
    }

    /// Backpropagates per-row upstream gradients on actions and log-densities.
    /// Adds emitter parameter gradients into `emitter_grads` and returns the
    /// gradient with respect to the summaries.
    pub fn backward_batch(
        &self,
        batch: &ActionBatch,
        grad_actions: &Matrix,
        grad_log_probs: &[f64],
        emitter_grads: &mut [f64],
    ) -> Result<Matrix> {
        let n = batch.actions.rows();
        let d = self.design_dim;
        if grad_actions.rows() != n || grad_actions.cols() != d || grad_log_probs.len() != n {
            return shape_err("upstream gradient shapes do not match the batch");
        }
        let mut grad_head = Matrix::zeros(n, 2 * d);
        for i in 0..n {
            let (mean, log_std) = batch.head.row(i).split_at(d);
            let (gm, gl) = grad_head.row_mut(i).split_at_mut(d);
            squash_backward(
                mean,
                log_std,
                batch.noise.row(i),
                batch.actions.row(i),
                grad_actions.row(i),
                grad_log_probs[i],
                gm,
                gl,
            );
        }
        Ok(self.emitter.backward_into(&batch.cache, &grad_head, emitter_grads, true)?.expect("input gradient requested"))
    }

    /// Gradients of `w . action + c * log_prob` for one history with fixed noise,
    /// flowing through the emitter, the pooled summary and the encoder.
    pub fn pathwise_gradients(&self, pairs: &Matrix, noise: &[f64], w: &[f64], c: f64) -> Result<PathwiseGrad> {
        let width = self.summary_width();
        let mut b = vec![0.0; width];
        let enc = if pairs.rows() > 0 {
            let (out, cache) = self.encoder.forward(pairs, Mode::Train, None)?;
            for i in 0..out.rows() {
                for (s, v) in b.iter_mut().zip(out.row(i)) {
                    *s += v;
                }
            }
            Some(cache)
        } else {
            None
        };
        let batch = self.sample_batch_with_noise(&Matrix::row_vector(&b), Matrix::row_vector(noise))?;
        let mut emitter = vec![0.0; self.emitter.param_count()];
        let gb = self.backward_batch(&batch, &Matrix::row_vector(w), &[c], &mut emitter)?;
        let mut encoder = vec![0.0; self.encoder.param_count()];
        if let Some(cache) = enc {
            let mut g = Matrix::zeros(pairs.rows(), width);
            for i in 0..pairs.rows() {
                g.row_mut(i).copy_from_slice(gb.row(0));
            }
            self.encoder.backward_into(&cache, &g, &mut encoder, false)?;
        }
        Ok(PathwiseGrad { action: batch.actions.row(0).to_vec(), log_prob: batch.log_probs[0], encoder, emitter })
    }
}
