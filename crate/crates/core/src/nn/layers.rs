use super::{Graph, Initializer, NnError, NodeId, ParamId, ParamStore};

/// `x W + b`, with `W` stored as `in x out`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, name: &str, in_dim: usize, out_dim: usize) -> Self {
        let weight = store.add(format!("{name}.weight"), init.fan_in_uniform(in_dim, out_dim, in_dim));
        let bias = store.add(format!("{name}.bias"), init.fan_in_uniform(1, out_dim, in_dim));
        Self { weight, bias, in_dim, out_dim }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<NodeId, NnError> {
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        let xw = g.matmul(x, w)?;
        g.add_row(xw, b)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        let gamma = store.add(format!("{name}.gamma"), Initializer::constant(1, dim, 1.0));
        let beta = store.add(format!("{name}.beta"), Initializer::constant(1, dim, 0.0));
        Self { gamma, beta, eps: 1e-5 }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<NodeId, NnError> {
        let n = g.normalize_rows(x, self.eps);
        let gamma = g.param(self.gamma);
        let beta = g.param(self.beta);
        let scaled = g.mul_row(n, gamma)?;
        g.add_row(scaled, beta)
    }
}

/// Scaled dot-product attention with `heads` equal-width heads.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
}

impl MultiHeadAttention {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, name: &str, dim: usize, heads: usize) -> Self {
        assert!(heads > 0 && dim.is_multiple_of(heads), "{heads} heads must divide width {dim}");
        Self {
            query: Linear::new(store, init, &format!("{name}.q"), dim, dim),
            key: Linear::new(store, init, &format!("{name}.k"), dim, dim),
            value: Linear::new(store, init, &format!("{name}.v"), dim, dim),
            output: Linear::new(store, init, &format!("{name}.o"), dim, dim),
            heads,
        }
    }

    /// Attends from `query` tokens over `context` tokens.
    pub fn forward(&self, g: &mut Graph, query: NodeId, context: NodeId) -> Result<NodeId, NnError> {
        let q = self.query.forward(g, query)?;
        let k = self.key.forward(g, context)?;
        let v = self.value.forward(g, context)?;
        let dim = self.query.out_dim;
        let head_dim = dim / self.heads;
        let scale = 1.0 / (head_dim as f64).sqrt();
        let mut outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (a, b) = (h * head_dim, (h + 1) * head_dim);
            let qh = g.slice_cols(q, a, b);
            let kh = g.slice_cols(k, a, b);
            let vh = g.slice_cols(v, a, b);
            let kt = g.transpose(kh);
            let logits = g.matmul(qh, kt)?;
            let logits = g.scale(logits, scale);
            if g.value(logits).iter().any(|x| !x.is_finite()) {
                return Err(NnError::NonFinite("attention logits"));
            }
            let attn = g.softmax_rows(logits);
            outs.push(g.matmul(attn, vh)?);
        }
        let merged = if outs.len() == 1 { outs[0] } else { g.concat_cols(&outs)? };
        self.output.forward(g, merged)
    }
}

#[derive(Debug, Clone)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, name: &str, dim: usize, hidden: usize) -> Self {
        Self {
            up: Linear::new(store, init, &format!("{name}.up"), dim, hidden),
            down: Linear::new(store, init, &format!("{name}.down"), hidden, dim),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<NodeId, NnError> {
        let h = self.up.forward(g, x)?;
        let h = g.gelu(h);
        self.down.forward(g, h)
    }
}

/// Pre-norm transformer block:
/// `h = q + MHA(LN1(q), LN1(ctx)); out = h + FFN(LN2(h))`.
/// Self-attention is the special case `ctx == q`.
#[derive(Debug, Clone)]
pub struct EncoderBlock {
    pub norm_attn: LayerNorm,
    pub attn: MultiHeadAttention,
    pub norm_ffn: LayerNorm,
    pub ffn: FeedForward,
}

impl EncoderBlock {
    pub fn new(
        store: &mut ParamStore,
        init: &mut Initializer,
        name: &str,
        dim: usize,
        heads: usize,
        ffn_dim: usize,
    ) -> Self {
        Self {
            norm_attn: LayerNorm::new(store, &format!("{name}.ln1"), dim),
            attn: MultiHeadAttention::new(store, init, &format!("{name}.attn"), dim, heads),
            norm_ffn: LayerNorm::new(store, &format!("{name}.ln2"), dim),
            ffn: FeedForward::new(store, init, &format!("{name}.ffn"), dim, ffn_dim),
        }
    }

    pub fn forward(&self, g: &mut Graph, query: NodeId, context: NodeId) -> Result<NodeId, NnError> {
        let qn = self.norm_attn.forward(g, query)?;
        let cn = if context == query { qn } else { self.norm_attn.forward(g, context)? };
        let attended = self.attn.forward(g, qn, cn)?;
        let h = g.add(query, attended)?;
        let hn = self.norm_ffn.forward(g, h)?;
        let f = self.ffn.forward(g, hn)?;
        g.add(h, f)
    }

    pub fn forward_self(&self, g: &mut Graph, x: NodeId) -> Result<NodeId, NnError> {
        self.forward(g, x, x)
    }
}
