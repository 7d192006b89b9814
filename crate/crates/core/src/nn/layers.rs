//! Parameterized building blocks on top of [`Graph`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::graph::{BatchStats, Graph, NodeId};
use super::{NnError, ParamId, ParamStore, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Per-forward-pass state: mode and the RNG that drives dropout masks.
pub struct Ctx<'a> {
    pub mode: Mode,
    pub rng: &'a mut ChaCha8Rng,
}

impl<'a> Ctx<'a> {
    pub fn new(mode: Mode, rng: &'a mut ChaCha8Rng) -> Self {
        Ctx { mode, rng }
    }

    pub fn training(&self) -> bool {
        self.mode == Mode::Train
    }
}

/// Fully connected layer, `y = x W + b`.
#[derive(Debug, Clone, Copy)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        outputs: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Dense {
            weight: store.add_xavier(format!("{name}.weight"), &[inputs, outputs], inputs, outputs, rng),
            bias: store.add(format!("{name}.bias"), Tensor::zeros(&[outputs])),
            inputs,
            outputs,
        }
    }

    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        x: NodeId,
    ) -> Result<NodeId, NnError> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let y = g.matmul(x, w)?;
        g.add_bias(y, b)
    }
}

/// Lookup table of `[vocab, dim]` vectors.
#[derive(Debug, Clone, Copy)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        vocab: usize,
        dim: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Embedding {
            table: store.add_xavier(format!("{name}.table"), &[vocab, dim], vocab, dim, rng),
            vocab,
            dim,
        }
    }

    /// `ids` is `[B][L]`; the result is `[B,L,dim]`.
    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        ids: &[Vec<usize>],
    ) -> Result<NodeId, NnError> {
        let b = ids.len();
        let l = ids.first().map_or(0, Vec::len);
        if b == 0 || l == 0 || ids.iter().any(|r| r.len() != l) {
            return Err(NnError::shape("embedding", "ids must be a non-empty rectangle"));
        }
        let flat: Vec<usize> = ids.concat();
        let table = g.param(store, self.table);
        let rows = g.embedding(table, &flat)?;
        g.reshape(rows, &[b, l, self.dim])
    }
}

/// LSTM cell with gate order input, forget, candidate, output.
#[derive(Debug, Clone, Copy)]
pub struct LstmCell {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub hidden: usize,
}

/// Per-step hidden states of a recurrent pass plus its final state.
#[derive(Debug, Clone)]
pub struct SequenceOutput {
    /// `steps[t]` is the `[B,H]` state at time `t`.
    pub steps: Vec<NodeId>,
    pub last: NodeId,
}

impl LstmCell {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let gates = 4 * hidden;
        let w_input = store.add_xavier(format!("{name}.w_input"), &[inputs, gates], inputs, gates, rng);
        let w_hidden = store.add_xavier(format!("{name}.w_hidden"), &[hidden, gates], hidden, gates, rng);
        let mut bias = Tensor::zeros(&[gates]);
        // Forget gate starts open.
        bias.data_mut()[hidden..2 * hidden].fill(T::one());
        let bias = store.add(format!("{name}.bias"), bias);
        LstmCell {
            w_input,
            w_hidden,
            bias,
            inputs,
            hidden,
        }
    }

    /// One step from raw input `x [B,D]`: returns `(h', c')`.
    pub fn step<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        x: NodeId,
        h: NodeId,
        c: NodeId,
    ) -> Result<(NodeId, NodeId), NnError> {
        let w = g.param(store, self.w_input);
        let projected = g.matmul(x, w)?;
        self.step_projected(g, store, projected, h, c)
    }

    /// One step given the input already multiplied by `w_input`.
    fn step_projected<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        projected: NodeId,
        h: NodeId,
        c: NodeId,
    ) -> Result<(NodeId, NodeId), NnError> {
        let hs = self.hidden;
        let wh = g.param(store, self.w_hidden);
        let bias = g.param(store, self.bias);
        let recurrent = g.matmul(h, wh)?;
        let z = g.add(projected, recurrent)?;
        let z = g.add_bias(z, bias)?;
        let i = g.slice_cols(z, 0, hs)?;
        let i = g.sigmoid(i);
        let f = g.slice_cols(z, hs, 2 * hs)?;
        let f = g.sigmoid(f);
        let cand = g.slice_cols(z, 2 * hs, 3 * hs)?;
        let cand = g.tanh(cand);
        let o = g.slice_cols(z, 3 * hs, 4 * hs)?;
        let o = g.sigmoid(o);
        let kept = g.mul(f, c)?;
        let written = g.mul(i, cand)?;
        let c_next = g.add(kept, written)?;
        let squashed = g.tanh(c_next);
        let h_next = g.mul(o, squashed)?;
        Ok((h_next, c_next))
    }

    /// Runs over `x [B,L,D]`. Steps at `t >= lengths[b]` leave row `b`'s
    /// state untouched, so padding never leaks into real positions. With
    /// `reverse`, time runs from `L-1` down to 0.
    pub fn run<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        x: NodeId,
        lengths: &[usize],
        reverse: bool,
    ) -> Result<SequenceOutput, NnError> {
        let shape = g.value(x).shape().to_vec();
        let [b, l, d] = shape[..] else {
            return Err(NnError::shape("lstm", format!("expected [B,L,D], got {shape:?}")));
        };
        if d != self.inputs || lengths.len() != b {
            return Err(NnError::shape(
                "lstm",
                format!("input dim {d} (expected {}), {} lengths for batch {b}", self.inputs, lengths.len()),
            ));
        }
        if l == 0 || lengths.iter().any(|&n| n == 0) {
            return Err(NnError::EmptyInput { op: "lstm" });
        }
        let flat = g.reshape(x, &[b * l, d])?;
        let w = g.param(store, self.w_input);
        let projected = g.matmul(flat, w)?;
        let projected = g.reshape(projected, &[b, l, 4 * self.hidden])?;

        let mut h = g.input(Tensor::zeros(&[b, self.hidden]));
        let mut c = g.input(Tensor::zeros(&[b, self.hidden]));
        let mut steps = vec![h; l];
        let order: Vec<usize> = if reverse {
            (0..l).rev().collect()
        } else {
            (0..l).collect()
        };
        for t in order {
            let xt = g.time_step(projected, t)?;
            let (h_new, c_new) = self.step_projected(g, store, xt, h, c)?;
            if lengths.iter().all(|&n| t < n) {
                h = h_new;
                c = c_new;
            } else {
                let keep: Vec<T> = lengths
                    .iter()
                    .map(|&n| if t < n { T::one() } else { T::zero() })
                    .collect();
                h = g.blend(h_new, h, keep.clone())?;
                c = g.blend(c_new, c, keep)?;
            }
            steps[t] = h;
        }
        Ok(SequenceOutput { steps, last: h })
    }
}

/// Two independent LSTMs, left-to-right and right-to-left.
#[derive(Debug, Clone, Copy)]
pub struct BiLstm {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

/// BiLSTM result: per-step `[B,2H]` states stacked to `[B,L,2H]`, and the
/// two final states concatenated.
#[derive(Debug, Clone)]
pub struct BiOutput {
    pub states: NodeId,
    pub steps: Vec<NodeId>,
    pub last: NodeId,
}

impl BiLstm {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        BiLstm {
            forward: LstmCell::new(store, &format!("{name}.fwd"), inputs, hidden, rng),
            backward: LstmCell::new(store, &format!("{name}.bwd"), inputs, hidden, rng),
        }
    }

    pub fn run<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        x: NodeId,
        lengths: &[usize],
    ) -> Result<BiOutput, NnError> {
        let fwd = self.forward.run(g, store, x, lengths, false)?;
        let bwd = self.backward.run(g, store, x, lengths, true)?;
        let mut steps = Vec::with_capacity(fwd.steps.len());
        for (f, b) in fwd.steps.iter().zip(&bwd.steps) {
            steps.push(g.concat(&[*f, *b])?);
        }
        let states = g.stack_time(&steps)?;
        let last = g.concat(&[fwd.last, bwd.last])?;
        Ok(BiOutput {
            states,
            steps,
            last,
        })
    }
}

/// Additive attention: `e_t = v . tanh(W h_t)`, `a = softmax(e)`,
/// `context = sum_t a_t h_t`.
#[derive(Debug, Clone, Copy)]
pub struct Attention {
    pub projection: ParamId,
    pub score: ParamId,
    pub inputs: usize,
    pub units: usize,
}

impl Attention {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        units: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Attention {
            projection: store.add_xavier(format!("{name}.projection"), &[inputs, units], inputs, units, rng),
            score: store.add_xavier(format!("{name}.score"), &[units, 1], units, 1, rng),
            inputs,
            units,
        }
    }

    /// `states [B,L,D]`, `mask [B,L]` (1 = real step). Returns
    /// `(context [B,D], weights [B,L])`.
    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        states: NodeId,
        mask: &Tensor<T>,
    ) -> Result<(NodeId, NodeId), NnError> {
        let shape = g.value(states).shape().to_vec();
        let [b, l, d] = shape[..] else {
            return Err(NnError::shape("attention", format!("expected [B,L,D], got {shape:?}")));
        };
        if d != self.inputs {
            return Err(NnError::shape("attention", format!("state dim {d}, expected {}", self.inputs)));
        }
        let flat = g.reshape(states, &[b * l, d])?;
        let w = g.param(store, self.projection);
        let v = g.param(store, self.score);
        let projected = g.matmul(flat, w)?;
        let projected = g.tanh(projected);
        let scores = g.matmul(projected, v)?;
        let scores = g.reshape(scores, &[b, l])?;
        let weights = g.masked_softmax(scores, mask)?;
        let context = g.weighted_sum_time(weights, states)?;
        Ok((context, weights))
    }
}

/// Convolution over time with "same" zero padding.
#[derive(Debug, Clone, Copy)]
pub struct Conv1d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub kernel: usize,
    pub channels: usize,
    pub filters: usize,
}

impl Conv1d {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        channels: usize,
        filters: usize,
        kernel: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = kernel * channels;
        Conv1d {
            weight: store.add_xavier(format!("{name}.weight"), &[fan_in, filters], fan_in, filters, rng),
            bias: store.add(format!("{name}.bias"), Tensor::zeros(&[filters])),
            kernel,
            channels,
            filters,
        }
    }

    /// `[B,L,C] -> [B,L,F]`
    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        x: NodeId,
    ) -> Result<NodeId, NnError> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let pad_left = (self.kernel - 1) / 2;
        let pad_right = self.kernel - 1 - pad_left;
        g.conv1d(x, w, b, self.kernel, pad_left, pad_right)
    }
}

/// Batch normalization over the feature axis of `[B,F]`.
#[derive(Debug, Clone, Copy)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, features: usize) -> Self {
        BatchNorm {
            gamma: store.add(format!("{name}.gamma"), Tensor::filled(&[features], T::one())),
            beta: store.add(format!("{name}.beta"), Tensor::zeros(&[features])),
            running_mean: store.add_buffer(format!("{name}.running_mean"), Tensor::zeros(&[features])),
            running_var: store.add_buffer(format!("{name}.running_var"), Tensor::filled(&[features], T::one())),
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    /// Training mode normalizes with batch statistics and returns them so
    /// the caller can fold them into the running averages with
    /// [`BatchNorm::update_running`]; inference uses the running averages.
    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        x: NodeId,
        mode: Mode,
    ) -> Result<(NodeId, Option<BatchStats<T>>), NnError> {
        let gamma = g.param(store, self.gamma);
        let beta = g.param(store, self.beta);
        let eps = T::of(self.eps);
        match mode {
            Mode::Infer => {
                let mean = store.value(self.running_mean).data();
                let var = store.value(self.running_var).data();
                g.batch_norm(x, gamma, beta, eps, Some((mean, var)))
            }
            Mode::Train => g.batch_norm(x, gamma, beta, eps, None),
        }
    }

    /// Exponential moving average with unbiased batch variance.
    pub fn update_running<T: Scalar>(&self, store: &mut ParamStore<T>, stats: &BatchStats<T>) {
        let m = T::of(self.momentum);
        let unbias = if stats.batch > 1 {
            T::of(stats.batch as f64 / (stats.batch - 1) as f64)
        } else {
            T::one()
        };
        for (r, &bm) in store
            .value_mut(self.running_mean)
            .data_mut()
            .iter_mut()
            .zip(&stats.mean)
        {
            *r = (T::one() - m) * *r + m * bm;
        }
        for (r, &bv) in store
            .value_mut(self.running_var)
            .data_mut()
            .iter_mut()
            .zip(&stats.var)
        {
            *r = (T::one() - m) * *r + m * bv * unbias;
        }
    }
}

/// Inverted dropout: scales kept units by `1/(1-p)` during training and is
/// the identity at inference.
#[derive(Debug, Clone, Copy)]
pub struct Dropout {
    p: f64,
}

impl Dropout {
    pub fn new(p: f64) -> Result<Self, NnError> {
        if !(0.0..1.0).contains(&p) {
            return Err(NnError::InvalidProbability(p));
        }
        Ok(Dropout { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        x: NodeId,
        ctx: &mut Ctx<'_>,
    ) -> Result<NodeId, NnError> {
        if !ctx.training() || self.p == 0.0 {
            return Ok(x);
        }
        let scale = T::of(1.0 / (1.0 - self.p));
        let mask = (0..g.value(x).len())
            .map(|_| {
                if ctx.rng.random::<f64>() < self.p {
                    T::zero()
                } else {
                    scale
                }
            })
            .collect();
        g.dropout_mask(x, mask)
    }
}

/// `[B,L]` mask with ones on the first `lengths[b]` positions.
pub fn length_mask<T: Scalar>(lengths: &[usize], steps: usize) -> Tensor<T> {
    let mut mask = Tensor::zeros(&[lengths.len(), steps]);
    for (b, &n) in lengths.iter().enumerate() {
        mask.data_mut()[b * steps..b * steps + n.min(steps)].fill(T::one());
    }
    mask
}
