//! The layer set the vectorizer and the MLP operators are built from.

use super::params::ParamSet;
use super::tape::{GradTape, Var};
use crate::error::{Result, VenomError};
use crate::seed::Rng;

pub const DEFAULT_LN_EPS: f64 = 1e-5;

/// `x * w + bias`, with `bias` broadcast over rows.
pub fn affine(tape: &mut GradTape, x: Var, w: Var, bias: Var) -> Result<Var> {
    let xw = tape.matmul(x, w)?;
    tape.add_row(xw, bias)
}

pub fn layer_norm(tape: &mut GradTape, x: Var, gain: Var, offset: Var, eps: f64) -> Result<Var> {
    tape.layer_norm(x, gain, offset, eps)
}

#[derive(Debug, Clone, Copy)]
pub struct AffineParams {
    pub w: Var,
    pub b: Var,
}

impl AffineParams {
    pub fn bind(tape: &mut GradTape, prefix: &str) -> Result<Self> {
        Ok(AffineParams {
            w: tape.param(&format!("{prefix}.w"))?,
            b: tape.param(&format!("{prefix}.b"))?,
        })
    }

    pub fn apply(&self, tape: &mut GradTape, x: Var) -> Result<Var> {
        affine(tape, x, self.w, self.b)
    }
}

pub fn declare_affine(
    params: &mut ParamSet,
    prefix: &str,
    fan_in: usize,
    fan_out: usize,
    rng: &mut Rng,
) -> Result<()> {
    params.insert_xavier(format!("{prefix}.w"), fan_in, fan_out, rng)?;
    params.insert_filled(format!("{prefix}.b"), fan_out, 0.0)
}

#[derive(Debug, Clone, Copy)]
pub struct NormParams {
    pub gain: Var,
    pub offset: Var,
}

impl NormParams {
    pub fn bind(tape: &mut GradTape, prefix: &str) -> Result<Self> {
        Ok(NormParams {
            gain: tape.param(&format!("{prefix}.gain"))?,
            offset: tape.param(&format!("{prefix}.offset"))?,
        })
    }
}

pub fn declare_norm(params: &mut ParamSet, prefix: &str, width: usize) -> Result<()> {
    params.insert_filled(format!("{prefix}.gain"), width, 1.0)?;
    params.insert_filled(format!("{prefix}.offset"), width, 0.0)
}

/// Attention projections. Keys carry no bias: a key bias shifts every score in
/// a row by the same amount, which softmax cancels.
#[derive(Debug, Clone, Copy)]
pub struct AttentionParams {
    pub query: AffineParams,
    pub key: Var,
    pub value: AffineParams,
    pub output: AffineParams,
}

impl AttentionParams {
    pub fn bind(tape: &mut GradTape, prefix: &str) -> Result<Self> {
        Ok(AttentionParams {
            query: AffineParams::bind(tape, &format!("{prefix}.q"))?,
            key: tape.param(&format!("{prefix}.k.w"))?,
            value: AffineParams::bind(tape, &format!("{prefix}.v"))?,
            output: AffineParams::bind(tape, &format!("{prefix}.o"))?,
        })
    }
}

pub fn declare_attention(params: &mut ParamSet, prefix: &str, width: usize, rng: &mut Rng) -> Result<()> {
    declare_affine(params, &format!("{prefix}.q"), width, width, rng)?;
    params.insert_xavier(format!("{prefix}.k.w"), width, width, rng)?;
    declare_affine(params, &format!("{prefix}.v"), width, width, rng)?;
    declare_affine(params, &format!("{prefix}.o"), width, width, rng)
}

/// Scaled dot-product self-attention over rows, split into `heads` heads,
/// followed by the output projection.
pub fn multi_head_self_attention(
    tape: &mut GradTape,
    x: Var,
    params: &AttentionParams,
    heads: usize,
) -> Result<Var> {
    attention_with_weights(tape, x, params, heads).map(|(out, _)| out)
}

/// Same as [`multi_head_self_attention`], also returning each head's
/// row-stochastic attention matrix.
pub fn attention_with_weights(
    tape: &mut GradTape,
    x: Var,
    params: &AttentionParams,
    heads: usize,
) -> Result<(Var, Vec<Var>)> {
    let d = tape.value(x).cols();
    if heads == 0 || !d.is_multiple_of(heads) {
        return Err(VenomError::Config(format!(
            "model width {d} is not divisible by {heads} heads"
        )));
    }
    let dh = d / heads;
    let q = params.query.apply(tape, x)?;
    let k = tape.matmul(x, params.key)?;
    let v = params.value.apply(tape, x)?;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut outs = Vec::with_capacity(heads);
    let mut weights = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = tape.slice_cols(q, h * dh, dh)?;
        let kh = tape.slice_cols(k, h * dh, dh)?;
        let vh = tape.slice_cols(v, h * dh, dh)?;
        let scores = tape.matmul_bt(qh, kh)?;
        let scores = tape.scale(scores, scale);
        let attn = tape.softmax_rows(scores);
        weights.push(attn);
        outs.push(tape.matmul(attn, vh)?);
    }
    let merged = if heads == 1 { outs[0] } else { tape.concat_cols(&outs)? };
    Ok((params.output.apply(tape, merged)?, weights))
}

#[derive(Debug, Clone, Copy)]
pub struct BlockParams {
    pub norm1: NormParams,
    pub attention: AttentionParams,
    pub norm2: NormParams,
    pub ff_in: AffineParams,
    pub ff_out: AffineParams,
}

impl BlockParams {
    pub fn bind(tape: &mut GradTape, prefix: &str) -> Result<Self> {
        Ok(BlockParams {
            norm1: NormParams::bind(tape, &format!("{prefix}.ln1"))?,
            attention: AttentionParams::bind(tape, &format!("{prefix}.attn"))?,
            norm2: NormParams::bind(tape, &format!("{prefix}.ln2"))?,
            ff_in: AffineParams::bind(tape, &format!("{prefix}.ff1"))?,
            ff_out: AffineParams::bind(tape, &format!("{prefix}.ff2"))?,
        })
    }
}

pub fn declare_block(
    params: &mut ParamSet,
    prefix: &str,
    width: usize,
    ffn_width: usize,
    rng: &mut Rng,
) -> Result<()> {
    declare_norm(params, &format!("{prefix}.ln1"), width)?;
    declare_attention(params, &format!("{prefix}.attn"), width, rng)?;
    declare_norm(params, &format!("{prefix}.ln2"), width)?;
    declare_affine(params, &format!("{prefix}.ff1"), width, ffn_width, rng)?;
    declare_affine(params, &format!("{prefix}.ff2"), ffn_width, width, rng)
}

/// Pre-LN transformer block:
/// `y = x + attn(ln1(x)); out = y + ff2(gelu(ff1(ln2(y))))`.
pub fn pre_ln_block(
    tape: &mut GradTape,
    x: Var,
    params: &BlockParams,
    heads: usize,
    eps: f64,
) -> Result<Var> {
    let n1 = layer_norm(tape, x, params.norm1.gain, params.norm1.offset, eps)?;
    let a = multi_head_self_attention(tape, n1, &params.attention, heads)?;
    let y = tape.add(x, a)?;
    let n2 = layer_norm(tape, y, params.norm2.gain, params.norm2.offset, eps)?;
    let h = params.ff_in.apply(tape, n2)?;
    let h = tape.gelu(h);
    let f = params.ff_out.apply(tape, h)?;
    tape.add(y, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;
    use crate::seed::rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn affine_case(x: Tensor, w: Tensor, b: Tensor) -> Vec<f64> {
        let p = ParamSet::new(0);
        let mut tape = GradTape::new(&p);
        let (x, w, b) = (tape.input(x), tape.input(w), tape.input(b));
        let y = affine(&mut tape, x, w, b).unwrap();
        tape.value(y).data().to_vec()
    }

    #[test]
    fn affine_examples() {
        let m = |r, c, d: &[f64]| Tensor::matrix(r, c, d.to_vec()).unwrap();
        let v = |d: &[f64]| Tensor::vector(d.to_vec()).unwrap();
        assert_eq!(affine_case(m(1, 2, &[1., 2.]), m(2, 2, &[1., 0., 0., 1.]), v(&[0., 0.])), [1., 2.]);
        assert_eq!(affine_case(m(1, 2, &[1., 1.]), m(2, 2, &[0.; 4]), v(&[3., 4.])), [3., 4.]);
        assert_eq!(affine_case(m(2, 2, &[1., 2., 3., 4.]), m(2, 1, &[1., 1.]), v(&[1.])), [4., 8.]);
    }

    #[test]
    fn affine_shape_error_names_both_shapes() {
        let p = ParamSet::new(0);
        let mut tape = GradTape::new(&p);
        let x = tape.input(Tensor::matrix(1, 3, vec![0.0; 3]).unwrap());
        let w = tape.input(Tensor::matrix(2, 2, vec![0.0; 4]).unwrap());
        let b = tape.input(Tensor::vector(vec![0.0; 2]).unwrap());
        match affine(&mut tape, x, w, b) {
            Err(VenomError::Dimension { left, right, .. }) => {
                assert_eq!(left, vec![1, 3]);
                assert_eq!(right, vec![2, 2]);
            }
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    fn ln_case(x: Vec<f64>, offset: Vec<f64>, eps: f64) -> Vec<f64> {
        let d = x.len();
        let p = ParamSet::new(0);
        let mut tape = GradTape::new(&p);
        let x = tape.input(Tensor::matrix(1, d, x).unwrap());
        let g = tape.input(Tensor::filled(&[d], 1.0));
        let o = tape.input(Tensor::vector(offset).unwrap());
        let y = layer_norm(&mut tape, x, g, o, eps).unwrap();
        tape.value(y).data().to_vec()
    }

    #[test]
    fn layer_norm_examples() {
        assert_eq!(ln_case(vec![5., 5., 5.], vec![0.; 3], DEFAULT_LN_EPS), [0., 0., 0.]);
        assert!(close(&ln_case(vec![1., -1.], vec![0.; 2], 1e-12), &[1., -1.], 1e-11));
        assert_eq!(ln_case(vec![0., 0.], vec![2., 3.], DEFAULT_LN_EPS), [2., 3.]);
    }

    fn attention_params(d: usize, seed: u64) -> ParamSet {
        let mut p = ParamSet::new(seed);
        let mut r = rng(seed);
        declare_attention(&mut p, "a", d, &mut r).unwrap();
        // non-zero biases exercise the bias paths
        for name in ["a.q.b", "a.v.b", "a.o.b"] {
            for (i, v) in p.get_mut(name).unwrap().data_mut().iter_mut().enumerate() {
                *v = 0.1 * (i as f64 + 1.0);
            }
        }
        p
    }

    /// Loop-based attention, independent of the tape kernels.
    fn naive_attention(x: &[Vec<f64>], p: &ParamSet, heads: usize) -> Vec<Vec<f64>> {
        let d = x[0].len();
        let proj = |name: &str, row: &[f64]| -> Vec<f64> {
            let w = p.get(&format!("{name}.w")).unwrap();
            let b = p.get(&format!("{name}.b")).map(|b| b.data().to_vec()).unwrap_or(vec![0.0; d]);
            (0..d)
                .map(|j| (0..d).map(|t| row[t] * w.get(t, j)).sum::<f64>() + b[j])
                .collect()
        };
        let q: Vec<_> = x.iter().map(|r| proj("a.q", r)).collect();
        let k: Vec<_> = x.iter().map(|r| proj("a.k", r)).collect();
        let v: Vec<_> = x.iter().map(|r| proj("a.v", r)).collect();
        let dh = d / heads;
        let m = x.len();
        let mut merged = vec![vec![0.0; d]; m];
        for h in 0..heads {
            for i in 0..m {
                let s: Vec<f64> = (0..m)
                    .map(|j| {
                        (0..dh).map(|t| q[i][h * dh + t] * k[j][h * dh + t]).sum::<f64>()
                            / (dh as f64).sqrt()
                    })
                    .collect();
                let mx = s.iter().cloned().fold(f64::MIN, f64::max);
                let e: Vec<f64> = s.iter().map(|v| (v - mx).exp()).collect();
                let z: f64 = e.iter().sum();
                for t in 0..dh {
                    merged[i][h * dh + t] = (0..m).map(|j| e[j] / z * v[j][h * dh + t]).sum();
                }
            }
        }
        merged.iter().map(|r| proj("a.o", r)).collect()
    }

    fn run_attention(x: &[Vec<f64>], p: &ParamSet, heads: usize) -> (Vec<f64>, Vec<Tensor>) {
        let mut tape = GradTape::new(p);
        let xv = tape.input(Tensor::from_rows(x).unwrap());
        let a = AttentionParams::bind(&mut tape, "a").unwrap();
        let (out, w) = attention_with_weights(&mut tape, xv, &a, heads).unwrap();
        (
            tape.value(out).data().to_vec(),
            w.iter().map(|v| tape.value(*v).clone()).collect(),
        )
    }

    #[test]
    fn attention_matches_naive_loop() {
        let p = attention_params(4, 5);
        let x = vec![
            vec![0.3, -1.2, 0.5, 2.0],
            vec![1.1, 0.4, -0.7, 0.2],
            vec![-0.5, 0.9, 1.3, -1.0],
        ];
        let (out, weights) = run_attention(&x, &p, 2);
        let expect: Vec<f64> = naive_attention(&x, &p, 2).concat();
        assert!(close(&out, &expect, 1e-12));
        for w in weights {
            for i in 0..w.rows() {
                assert!((w.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_token_attention_is_value_then_output_projection() {
        let p = attention_params(4, 9);
        let x = vec![vec![0.2, 0.4, -0.6, 1.0]];
        let (out, weights) = run_attention(&x, &p, 2);
        assert!(weights.iter().all(|w| w.data() == [1.0]));
        let mut tape = GradTape::new(&p);
        let xv = tape.input(Tensor::from_rows(&x).unwrap());
        let a = AttentionParams::bind(&mut tape, "a").unwrap();
        let v = a.value.apply(&mut tape, xv).unwrap();
        let o = a.output.apply(&mut tape, v).unwrap();
        assert!(close(&out, tape.value(o).data(), 1e-12));
    }

    #[test]
    fn identical_rows_give_identical_outputs() {
        let p = attention_params(4, 2);
        let row = vec![0.7, -0.1, 0.3, 0.9];
        let (out, _) = run_attention(&[row.clone(), row.clone(), row], &p, 2);
        assert_eq!(out[0..4], out[4..8]);
        assert_eq!(out[4..8], out[8..12]);
    }

    #[test]
    fn indivisible_heads_is_config_error() {
        let p = attention_params(4, 1);
        let mut tape = GradTape::new(&p);
        let xv = tape.input(Tensor::matrix(1, 4, vec![0.0; 4]).unwrap());
        let a = AttentionParams::bind(&mut tape, "a").unwrap();
        assert!(matches!(
            multi_head_self_attention(&mut tape, xv, &a, 3),
            Err(VenomError::Config(_))
        ));
    }

    fn block_params(d: usize, seed: u64) -> ParamSet {
        let mut p = ParamSet::new(seed);
        declare_block(&mut p, "b", d, 2 * d, &mut rng(seed)).unwrap();
        p
    }

    #[test]
    fn block_with_zero_output_projections_is_identity() {
        let mut p = block_params(4, 3);
        for name in ["b.attn.o.w", "b.attn.o.b", "b.ff2.w", "b.ff2.b"] {
            p.get_mut(name).unwrap().data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        for m in [1, 2, 5] {
            let x = Tensor::matrix(m, 4, (0..4 * m).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
            let mut tape = GradTape::new(&p);
            let xv = tape.input(x.clone());
            let bp = BlockParams::bind(&mut tape, "b").unwrap();
            let y = pre_ln_block(&mut tape, xv, &bp, 2, DEFAULT_LN_EPS).unwrap();
            assert_eq!(tape.value(y), &x);
        }
    }

    #[test]
    fn block_matches_composed_sublayers() {
        let p = block_params(4, 8);
        let x = vec![vec![0.5, -0.3, 1.2, 0.0], vec![-1.0, 0.8, 0.1, 0.4]];
        let mut tape = GradTape::new(&p);
        let xv = tape.input(Tensor::from_rows(&x).unwrap());
        let bp = BlockParams::bind(&mut tape, "b").unwrap();
        let y = pre_ln_block(&mut tape, xv, &bp, 2, DEFAULT_LN_EPS).unwrap();
        let got = tape.value(y).data().to_vec();

        // Recompose from the sublayer formulas with plain loops.
        let ln = |rows: &[Vec<f64>], prefix: &str| -> Vec<Vec<f64>> {
            let g = p.get(&format!("{prefix}.gain")).unwrap().data();
            let o = p.get(&format!("{prefix}.offset")).unwrap().data();
            rows.iter()
                .map(|r| {
                    let mean = r.iter().sum::<f64>() / r.len() as f64;
                    let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / r.len() as f64;
                    let inv = 1.0 / (var + DEFAULT_LN_EPS).sqrt();
                    r.iter().enumerate().map(|(j, v)| (v - mean) * inv * g[j] + o[j]).collect()
                })
                .collect()
        };
        let lin = |row: &[f64], prefix: &str| -> Vec<f64> {
            let w = p.get(&format!("{prefix}.w")).unwrap();
            let b = p.get(&format!("{prefix}.b")).unwrap().data();
            (0..w.cols())
                .map(|j| (0..w.rows()).map(|t| row[t] * w.get(t, j)).sum::<f64>() + b[j])
                .collect()
        };
        let mut attn_p = ParamSet::new(0);
        for (name, t) in p.iter() {
            if let Some(rest) = name.strip_prefix("b.attn.") {
                attn_p.insert(format!("a.{rest}"), t.clone()).unwrap();
            }
        }
        let a = naive_attention(&ln(&x, "b.ln1"), &attn_p, 2);
        let y1: Vec<Vec<f64>> = x.iter().zip(&a).map(|(r, s)| r.iter().zip(s).map(|(u, v)| u + v).collect()).collect();
        let n2 = ln(&y1, "b.ln2");
        let mut expect = Vec::new();
        for (row, n) in y1.iter().zip(&n2) {
            let h: Vec<f64> = lin(n, "b.ff1").into_iter().map(crate::nn::tape::gelu).collect();
            let f = lin(&h, "b.ff2");
            expect.extend(row.iter().zip(&f).map(|(u, v)| u + v));
        }
        assert!(close(&got, &expect, 1e-12));
    }
}
