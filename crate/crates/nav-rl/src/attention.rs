//! Two-stage spatial attention: self-attention enriches per-ray tokens with
//! global context, then a cross-attention query built from the proprioceptive
//! and goal state compresses the token set into a single feature vector.

use rand::Rng;
use tensor_core::{Linear, LinearRef, Tape, Tensor, TensorError, TensorId};

#[derive(Debug, Clone)]
pub struct AttnParams {
    /// per-ray (range, sin, cos) embedding
    pub tokenizer: Linear,
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    /// cross-attention query from (o_prop, goal)
    pub query: Linear,
    pub wk2: Linear,
    pub wv2: Linear,
    pub wo2: Linear,
    pub heads: usize,
    pub embed: usize,
    pub tokens: usize,
}

impl AttnParams {
    pub fn new(tokens: usize, embed: usize, heads: usize, query_dim: usize, rng: &mut impl Rng) -> Self {
        assert!(embed % heads == 0, "embed dim must split across heads");
        Self {
            tokenizer: Linear::new(3, embed, rng),
            wq: Linear::new(embed, embed, rng),
            wk: Linear::new(embed, embed, rng),
            wv: Linear::new(embed, embed, rng),
            wo: Linear::new(embed, embed, rng),
            query: Linear::new(query_dim, embed, rng),
            wk2: Linear::new(embed, embed, rng),
            wv2: Linear::new(embed, embed, rng),
            wo2: Linear::new(embed, embed, rng),
            heads,
            embed,
            tokens,
        }
    }

    pub fn named(&self, prefix: &str) -> Vec<(String, &Tensor)> {
        let fields: [(&str, &Linear); 9] = [
            ("tokenizer", &self.tokenizer),
            ("wq", &self.wq),
            ("wk", &self.wk),
            ("wv", &self.wv),
            ("wo", &self.wo),
            ("query", &self.query),
            ("wk2", &self.wk2),
            ("wv2", &self.wv2),
            ("wo2", &self.wo2),
        ];
        fields
            .into_iter()
            .flat_map(|(n, l)| {
                [(format!("{prefix}.{n}.weight"), &l.weight), (format!("{prefix}.{n}.bias"), &l.bias)]
            })
            .collect()
    }

    pub fn named_mut(&mut self, prefix: &str) -> Vec<(String, &mut Tensor)> {
        let fields: [(&str, &mut Linear); 9] = [
            ("tokenizer", &mut self.tokenizer),
            ("wq", &mut self.wq),
            ("wk", &mut self.wk),
            ("wv", &mut self.wv),
            ("wo", &mut self.wo),
            ("query", &mut self.query),
            ("wk2", &mut self.wk2),
            ("wv2", &mut self.wv2),
            ("wo2", &mut self.wo2),
        ];
        fields
            .into_iter()
            .flat_map(|(n, l)| {
                [
                    (format!("{prefix}.{n}.weight"), &mut l.weight),
                    (format!("{prefix}.{n}.bias"), &mut l.bias),
                ]
            })
            .collect()
    }
}

pub struct AttnRef {
    tokenizer: LinearRef,
    wq: LinearRef,
    wk: LinearRef,
    wv: LinearRef,
    wo: LinearRef,
    query: LinearRef,
    wk2: LinearRef,
    wv2: LinearRef,
    wo2: LinearRef,
    pub heads: usize,
    pub embed: usize,
    pub tokens: usize,
    pub param_ids: Vec<TensorId>,
}

/// Intermediate ids useful for inspection and tests.
pub struct AttnTrace {
    /// compressed feature, [B, C]
    pub compressed: TensorId,
    /// cross-attention weights, [B·H, 1, K]
    pub cross_weights: TensorId,
    /// per-head cross outputs before the output projection, [B·H, 1, C/H]
    pub head_outputs: TensorId,
    /// value vectors the heads attend over, [B·H, K, C/H]
    pub head_values: TensorId,
}

impl AttnRef {
    pub fn lease(tape: &mut Tape, params: &AttnParams) -> Self {
        let layers = [
            &params.tokenizer,
            &params.wq,
            &params.wk,
            &params.wv,
            &params.wo,
            &params.query,
            &params.wk2,
            &params.wv2,
            &params.wo2,
        ];
        let refs: Vec<LinearRef> = layers.iter().map(|l| LinearRef::lease(tape, l)).collect();
        let param_ids = refs.iter().flat_map(|r| [r.weight, r.bias]).collect();
        Self {
            tokenizer: refs[0],
            wq: refs[1],
            wk: refs[2],
            wv: refs[3],
            wo: refs[4],
            query: refs[5],
            wk2: refs[6],
            wv2: refs[7],
            wo2: refs[8],
            heads: params.heads,
            embed: params.embed,
            tokens: params.tokens,
            param_ids,
        }
    }

    /// Compress ray tokens into one feature vector per batch row.
    ///
    /// `token_features`: [B·K, 3] leaf of per-ray (range, sin, cos);
    /// `prop_goal`: [B, P] leaf of proprio+goal state.
    pub fn compress(
        &self,
        tape: &mut Tape,
        token_features: TensorId,
        prop_goal: TensorId,
        batch: usize,
    ) -> Result<AttnTrace, TensorError> {
        let (k, h) = (self.tokens, self.heads);
        let hd = self.embed / h;
        let scale = 1.0 / (hd as f64).sqrt();

        let embedded = self.tokenizer.forward(tape, token_features)?;
        let tokens = tape.tanh(embedded);

        // self-attention with residual
        let q = self.wq.forward(tape, tokens)?;
        let key = self.wk.forward(tape, tokens)?;
        let v = self.wv.forward(tape, tokens)?;
        let qh = tape.split_heads(q, batch, k, h)?;
        let kh = tape.split_heads(key, batch, k, h)?;
        let vh = tape.split_heads(v, batch, k, h)?;
        let scores = tape.bmm(qh, kh, true)?;
        let scaled = tape.scale(scores, scale);
        let attn = tape.softmax_last(scaled);
        let ctx = tape.bmm(attn, vh, false)?;
        let merged = tape.merge_heads(ctx, batch, k, h)?;
        let projected = self.wo.forward(tape, merged)?;
        let enriched = tape.add(projected, tokens)?;

        // cross-attention: one query per batch row
        let q2 = self.query.forward(tape, prop_goal)?;
        let q2h = tape.split_heads(q2, batch, 1, h)?;
        let k2 = self.wk2.forward(tape, enriched)?;
        let v2 = self.wv2.forward(tape, enriched)?;
        let k2h = tape.split_heads(k2, batch, k, h)?;
        let v2h = tape.split_heads(v2, batch, k, h)?;
        let cross_scores = tape.bmm(q2h, k2h, true)?;
        let cross_scaled = tape.scale(cross_scores, scale);
        let cross_weights = tape.softmax_last(cross_scaled);
        let head_outputs = tape.bmm(cross_weights, v2h, false)?;
        let merged2 = tape.merge_heads(head_outputs, batch, 1, h)?;
        let compressed = self.wo2.forward(tape, merged2)?;

        Ok(AttnTrace { compressed, cross_weights, head_outputs, head_values: v2h })
    }
}

/// Per-ray token features: (range / max_range, sin angle, cos angle),
/// flattened [B·K, 3].
pub fn ray_token_features(rays: &[Vec<f64>], angles: &[f64], max_range: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(rays.len() * angles.len() * 3);
    for env_rays in rays {
        assert_eq!(env_rays.len(), angles.len());
        for (&r, &a) in env_rays.iter().zip(angles) {
            out.push(r / max_range);
            out.push(a.sin());
            out.push(a.cos());
        }
    }
    out
}
