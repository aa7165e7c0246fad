use alloc::vec;
use alloc::vec::Vec;

use super::params::{Block, FusionParams};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::permutation::Permutation;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Tokens for one reordered row: the token at position `p` holds feature
/// `f = order[p]` and equals `value_weight[f] * x[p] + value_bias[f] + position[p]`.
pub fn ope_forward(x_row: &[f64], order: &Permutation, params: &FusionParams) -> Result<Matrix> {
    let dims = params.dims();
    if x_row.len() != dims.m || order.len() != dims.m {
        return Err(Error::ShapeMismatch(alloc::format!(
            "row has {} values and order {} entries for {} features",
            x_row.len(),
            order.len(),
            dims.m
        )));
    }
    let d = dims.d;
    let vw = params.block(Block::ValueWeight);
    let vb = params.block(Block::ValueBias);
    let pe = params.block(Block::Position);
    let mut t = Matrix::zeros(dims.m, d);
    for (p, &f) in order.sequence().iter().enumerate() {
        let x = x_row[p];
        for (k, out) in t.row_mut(p).iter_mut().enumerate() {
            *out = vw[f * d + k] * x + vb[f * d + k] + pe[p * d + k];
        }
    }
    Ok(t)
}

/// Gate per position, `sigmoid(w * gamma + b)`.
pub fn gates(gamma_by_position: &[f64], params: &FusionParams) -> Vec<f64> {
    let (w, b) = (params.gate_weight(), params.gate_bias());
    gamma_by_position.iter().map(|g| sigmoid(w * g + b)).collect()
}

/// Scales every token row by its importance gate.
pub fn pigl_forward(tokens: &Matrix, gamma_by_position: &[f64], params: &FusionParams) -> Result<Matrix> {
    if gamma_by_position.len() != tokens.rows() {
        return Err(Error::LengthMismatch(gamma_by_position.len(), tokens.rows()));
    }
    let g = gates(gamma_by_position, params);
    let mut out = tokens.clone();
    for (p, gp) in g.iter().enumerate() {
        for v in out.row_mut(p) {
            *v *= gp;
        }
    }
    Ok(out)
}

/// Additive attention mask: 0 where `q <= p` and `p - q <= window`,
/// negative infinity elsewhere.
pub fn dma_mask(m: usize, window: usize) -> Result<Matrix> {
    if window == 0 || window > m {
        return Err(Error::InvalidWindow { window, m });
    }
    let mut mask = Matrix::zeros(m, m);
    for p in 0..m {
        for q in 0..m {
            if q > p || p - q > window {
                mask[(p, q)] = f64::NEG_INFINITY;
            }
        }
    }
    Ok(mask)
}

/// Intermediate values of the attention block.
#[derive(Debug, Clone)]
pub struct AttentionCache {
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
    /// Attention weights, exactly 0 on masked entries.
    pub weights: Matrix,
    pub z: Matrix,
    pub out: Matrix,
}

/// Single-head scaled dot-product attention with an additive mask, output
/// projection and residual connection.
pub fn masked_attention(tokens: &Matrix, mask: &Matrix, params: &FusionParams) -> Result<Matrix> {
    Ok(attention_cached(tokens, mask, params)?.out)
}

pub fn attention_cached(h: &Matrix, mask: &Matrix, params: &FusionParams) -> Result<AttentionCache> {
    let dims = params.dims();
    let (m, d, dk) = (h.rows(), dims.d, dims.dk);
    if h.cols() != d || mask.rows() != m || mask.cols() != m {
        return Err(Error::ShapeMismatch("attention inputs do not match the parameter shapes".into()));
    }
    let wq = Matrix::from_vec(d, dk, params.block(Block::Query).to_vec());
    let wk = Matrix::from_vec(d, dk, params.block(Block::Key).to_vec());
    let wv = Matrix::from_vec(d, dk, params.block(Block::Value).to_vec());
    let wo = Matrix::from_vec(dk, d, params.block(Block::Output).to_vec());
    let q = h.matmul(&wq);
    let k = h.matmul(&wk);
    let v = h.matmul(&wv);
    let scale = 1.0 / libm::sqrt(dk as f64);

    let mut weights = Matrix::zeros(m, m);
    for p in 0..m {
        let allowed: Vec<usize> = (0..m).filter(|&j| mask[(p, j)] == 0.0).collect();
        if allowed.is_empty() {
            continue;
        }
        let logits: Vec<f64> = allowed
            .iter()
            .map(|&j| q.row(p).iter().zip(k.row(j)).map(|(a, b)| a * b).sum::<f64>() * scale)
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| libm::exp(l - max)).collect();
        let total: f64 = exps.iter().sum();
        for (&j, e) in allowed.iter().zip(&exps) {
            weights[(p, j)] = e / total;
        }
    }
    let z = weights.matmul(&v);
    let mut out = z.matmul(&wo);
    for (o, x) in out.as_mut_slice().iter_mut().zip(h.as_slice()) {
        *o += x;
    }
    Ok(AttentionCache { q, k, v, weights, z, out })
}

/// Everything the backward pass needs for one row.
#[derive(Debug, Clone)]
pub struct RowCache {
    pub x: Vec<f64>,
    pub tokens: Matrix,
    pub gates: Vec<f64>,
    pub gated: Matrix,
    pub attention: AttentionCache,
    pub pooled: Vec<f64>,
    pub logits: Vec<f64>,
}

/// Order, importance and mask shared by every row.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub order: Permutation,
    /// Importance per original feature.
    pub gamma: Vec<f64>,
    pub mask: Matrix,
}

impl Layout {
    pub fn new(order: Permutation, gamma: Vec<f64>, window: usize) -> Result<Self> {
        if gamma.len() != order.len() {
            return Err(Error::LengthMismatch(gamma.len(), order.len()));
        }
        let mask = dma_mask(order.len(), window)?;
        Ok(Self { order, gamma, mask })
    }

    pub fn gamma_by_position(&self) -> Vec<f64> {
        self.order.sequence().iter().map(|&f| self.gamma[f]).collect()
    }
}

/// Forward pass up to the head logits.
pub fn row_forward(x_row: &[f64], layout: &Layout, params: &FusionParams) -> Result<RowCache> {
    let tokens = ope_forward(x_row, &layout.order, params)?;
    let gp = layout.gamma_by_position();
    let g = gates(&gp, params);
    let gated = pigl_forward(&tokens, &gp, params)?;
    let attention = attention_cached(&gated, &layout.mask, params)?;
    let dims = params.dims();
    let m = dims.m;
    let mut pooled = vec![0.0; dims.d];
    for p in 0..m {
        for (s, v) in pooled.iter_mut().zip(attention.out.row(p)) {
            *s += v;
        }
    }
    for s in pooled.iter_mut() {
        *s /= m as f64;
    }
    let wh = params.block(Block::HeadWeight);
    let bh = params.block(Block::HeadBias);
    let o = dims.outputs;
    let logits = (0..o)
        .map(|j| bh[j] + pooled.iter().enumerate().map(|(i, h)| h * wh[i * o + j]).sum::<f64>())
        .collect();
    Ok(RowCache { x: x_row.to_vec(), tokens, gates: g, gated, attention, pooled, logits })
}

/// Accumulates into `params.grads` the gradient of a loss whose derivative
/// with respect to this row's logits is `dlogits`.
pub fn row_backward(cache: &RowCache, dlogits: &[f64], layout: &Layout, params: &mut FusionParams) {
    let dims = *params.dims();
    let (m, d, dk, o) = (dims.m, dims.d, dims.dk, dims.outputs);

    // head
    let mut dpooled = vec![0.0; d];
    {
        let wh = params.block(Block::HeadWeight).to_vec();
        let gwh = params.grad_mut(Block::HeadWeight);
        for i in 0..d {
            for j in 0..o {
                gwh[i * o + j] += cache.pooled[i] * dlogits[j];
                dpooled[i] += wh[i * o + j] * dlogits[j];
            }
        }
        let gbh = params.grad_mut(Block::HeadBias);
        for j in 0..o {
            gbh[j] += dlogits[j];
        }
    }

    // mean pool and residual
    let inv_m = 1.0 / m as f64;
    let dout = Matrix::from_vec(m, d, (0..m * d).map(|i| dpooled[i % d] * inv_m).collect());
    let mut dh = dout.clone();

    let att = &cache.attention;
    let wo = params.block(Block::Output).to_vec();
    let mut dz = Matrix::zeros(m, dk);
    {
        let gwo = params.grad_mut(Block::Output);
        for p in 0..m {
            for a in 0..dk {
                let zpa = att.z[(p, a)];
                let mut acc = 0.0;
                for b in 0..d {
                    gwo[a * d + b] += zpa * dout[(p, b)];
                    acc += dout[(p, b)] * wo[a * d + b];
                }
                dz[(p, a)] = acc;
            }
        }
    }

    // z = A v
    let mut dv = Matrix::zeros(m, dk);
    let mut ds = Matrix::zeros(m, m);
    let scale = 1.0 / libm::sqrt(dk as f64);
    for p in 0..m {
        let mut da = vec![0.0; m];
        let mut dot = 0.0;
        for q in 0..m {
            if layout.mask[(p, q)] != 0.0 {
                continue;
            }
            let w = att.weights[(p, q)];
            da[q] = dz.row(p).iter().zip(att.v.row(q)).map(|(a, b)| a * b).sum();
            for (dvq, dzp) in dv.row_mut(q).iter_mut().zip(dz.row(p)) {
                *dvq += w * dzp;
            }
            dot += w * da[q];
        }
        for q in 0..m {
            if layout.mask[(p, q)] == 0.0 {
                ds[(p, q)] = att.weights[(p, q)] * (da[q] - dot) * scale;
            }
        }
    }
    // logits = q k^T * scale
    let dq = ds.matmul(&att.k);
    let dk_mat = ds.transpose().matmul(&att.q);

    let h = &cache.gated;
    for (block, dproj) in [(Block::Query, &dq), (Block::Key, &dk_mat), (Block::Value, &dv)] {
        let w = params.block(block).to_vec();
        {
            let gw = params.grad_mut(block);
            for p in 0..m {
                for i in 0..d {
                    let hpi = h[(p, i)];
                    for a in 0..dk {
                        gw[i * dk + a] += hpi * dproj[(p, a)];
                    }
                }
            }
        }
        for p in 0..m {
            for i in 0..d {
                let mut acc = 0.0;
                for a in 0..dk {
                    acc += dproj[(p, a)] * w[i * dk + a];
                }
                dh[(p, i)] += acc;
            }
        }
    }

    // gate
    let gp = layout.gamma_by_position();
    let mut dgate_w = 0.0;
    let mut dgate_b = 0.0;
    let mut dt = Matrix::zeros(m, d);
    for p in 0..m {
        let g = cache.gates[p];
        let mut dg = 0.0;
        for i in 0..d {
            dg += dh[(p, i)] * cache.tokens[(p, i)];
            dt[(p, i)] = g * dh[(p, i)];
        }
        let da = dg * g * (1.0 - g);
        dgate_w += da * gp[p];
        dgate_b += da;
    }
    {
        let gg = params.grad_mut(Block::Gate);
        gg[0] += dgate_w;
        gg[1] += dgate_b;
    }

    // tokens
    let seq = layout.order.sequence().to_vec();
    for (p, &f) in seq.iter().enumerate() {
        let x = cache.x[p];
        {
            let gvw = params.grad_mut(Block::ValueWeight);
            for i in 0..d {
                gvw[f * d + i] += dt[(p, i)] * x;
            }
        }
        {
            let gvb = params.grad_mut(Block::ValueBias);
            for i in 0..d {
                gvb[f * d + i] += dt[(p, i)];
            }
        }
        let gpe = params.grad_mut(Block::Position);
        for i in 0..d {
            gpe[p * d + i] += dt[(p, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::params::Dims;
    use crate::rng;

    fn params(m: usize, d: usize, dk: usize, seed: u64) -> FusionParams {
        FusionParams::init_uniform(Dims { m, d, dk, outputs: 1 }, 0.5, seed).unwrap()
    }

    #[test]
    fn ope_zero_input_gives_positions() {
        let mut p = params(3, 4, 2, 1);
        p.block_mut(Block::ValueBias).fill(0.0);
        let order = Permutation::new(vec![2, 0, 1]).unwrap();
        let t = ope_forward(&[0.0; 3], &order, &p).unwrap();
        assert_eq!(t.as_slice(), p.block(Block::Position));
    }

    #[test]
    fn ope_zero_positions_give_value_embeddings() {
        let mut p = params(3, 2, 2, 2);
        p.block_mut(Block::Position).fill(0.0);
        let order = Permutation::new(vec![1, 2, 0]).unwrap();
        let x = [0.5, -1.0, 2.0];
        let t = ope_forward(&x, &order, &p).unwrap();
        let (vw, vb) = (p.block(Block::ValueWeight), p.block(Block::ValueBias));
        for (pos, &f) in order.sequence().iter().enumerate() {
            for k in 0..2 {
                assert_eq!(t[(pos, k)], vw[f * 2 + k] * x[pos] + vb[f * 2 + k]);
            }
        }
    }

    #[test]
    fn ope_perturbation_is_local() {
        let p = params(4, 3, 2, 3);
        let order = Permutation::new(vec![3, 1, 0, 2]).unwrap();
        let x = [0.1, 0.2, 0.3, 0.4];
        let mut y = x;
        let delta = 0.25;
        y[2] += delta;
        let a = ope_forward(&x, &order, &p).unwrap();
        let b = ope_forward(&y, &order, &p).unwrap();
        let vw = p.block(Block::ValueWeight);
        for pos in 0..4 {
            for k in 0..3 {
                let diff = b[(pos, k)] - a[(pos, k)];
                if pos == 2 {
                    assert!((diff - delta * vw[k]).abs() < 1e-15);
                } else {
                    assert_eq!(diff, 0.0);
                }
            }
        }
        assert!(ope_forward(&x[..3], &order, &p).is_err());
    }

    #[test]
    fn pigl_examples() {
        let mut p = params(2, 2, 2, 4);
        let t = Matrix::from_vec(2, 2, vec![1.0, -2.0, 3.0, 4.0]);
        p.set_gate(0.0, 0.0);
        let out = pigl_forward(&t, &[0.3, 0.9], &p).unwrap();
        for (o, x) in out.as_slice().iter().zip(t.as_slice()) {
            assert_eq!(*o, x / 2.0);
        }
        p.set_gate(0.7, 50.0);
        let out = pigl_forward(&t, &[0.3, 0.9], &p).unwrap();
        for (o, x) in out.as_slice().iter().zip(t.as_slice()) {
            assert!((o - x).abs() < 1e-9 * x.abs().max(1.0));
        }
        p.set_gate(2.0, -1.0);
        let g = gates(&[0.0, 1.0], &p);
        assert!((g[0] - 0.26894).abs() < 1e-5 && (g[1] - 0.73106).abs() < 1e-5);
    }

    #[test]
    fn mask_examples() {
        let full = dma_mask(3, 3).unwrap();
        for p in 0..3 {
            for q in 0..3 {
                assert_eq!(full[(p, q)] == 0.0, q <= p);
            }
        }
        let w1 = dma_mask(4, 1).unwrap();
        for p in 0..4 {
            let open: Vec<usize> = (0..4).filter(|&q| w1[(p, q)] == 0.0).collect();
            let expect: Vec<usize> = (p.saturating_sub(1)..=p).collect();
            assert_eq!(open, expect);
        }
        assert_eq!(dma_mask(1, 1).unwrap().as_slice(), &[0.0]);
        assert_eq!(dma_mask(3, 0), Err(Error::InvalidWindow { window: 0, m: 3 }));
        assert_eq!(dma_mask(3, 4), Err(Error::InvalidWindow { window: 4, m: 3 }));
    }

    #[test]
    fn single_token_attention_is_projection_plus_residual() {
        let p = params(1, 3, 2, 5);
        let h = Matrix::from_vec(1, 3, vec![0.4, -0.3, 1.2]);
        let out = masked_attention(&h, &dma_mask(1, 1).unwrap(), &p).unwrap();
        let wv = Matrix::from_vec(3, 2, p.block(Block::Value).to_vec());
        let wo = Matrix::from_vec(2, 3, p.block(Block::Output).to_vec());
        let expect = h.matmul(&wv).matmul(&wo);
        for j in 0..3 {
            assert!((out[(0, j)] - expect[(0, j)] - h[(0, j)]).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_logits_give_uniform_rows() {
        let mut p = params(4, 2, 2, 6);
        p.block_mut(Block::Query).fill(0.0);
        let mut r = rng::seeded(1);
        let h = Matrix::from_vec(4, 2, (0..8).map(|_| rng::standard_normal(&mut r)).collect());
        let c = attention_cached(&h, &dma_mask(4, 4).unwrap(), &p).unwrap();
        for row in 0..4 {
            for q in 0..4 {
                let expect = if q <= row { 1.0 / (row + 1) as f64 } else { 0.0 };
                assert!((c.weights[(row, q)] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn attention_is_causal() {
        let m = 8;
        let p = params(m, 4, 3, 7);
        let mut r = rng::seeded(2);
        let h = Matrix::from_vec(m, 4, (0..m * 4).map(|_| rng::standard_normal(&mut r)).collect());
        let mask = dma_mask(m, m).unwrap();
        let base = attention_cached(&h, &mask, &p).unwrap();
        for row in 0..m {
            let s: f64 = base.weights.row(row).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        for pos in 0..m {
            let mut g = h.clone();
            for q in pos + 1..m {
                for j in 0..4 {
                    g[(q, j)] += rng::standard_normal(&mut r) * 10.0;
                }
            }
            let out = masked_attention(&g, &mask, &p).unwrap();
            for j in 0..4 {
                assert!((out[(pos, j)] - base.out[(pos, j)]).abs() <= 1e-12);
            }
        }
    }
}
