//! Forward pass. Every operation has a cache-returning variant so the
//! backward pass can replay exact activations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{LstmParams, Params};
use super::tensor::{first_non_finite, relu, sigmoid, softmax2, Mat, Scalar};
use super::{ModelConfig, Prediction};
use crate::error::{HstfError, Result};
use crate::features::{FlowSample, FL_REQ_LEN, FL_RES_LEN, PL_LEN};
use crate::flow::Label;

/// A FlowSample converted to the model's scalar type.
#[derive(Debug, Clone)]
pub struct TensorSample<T> {
    pub req_mats: Vec<Vec<T>>,
    pub res_mats: Vec<Vec<T>>,
    pub req_pl: Vec<Vec<T>>,
    pub res_pl: Vec<Vec<T>>,
    pub req_fl: Vec<T>,
    pub res_fl: Vec<T>,
    pub label: Label,
}

impl<T: Scalar> TensorSample<T> {
    pub fn from_sample(sample: &FlowSample, cfg: &ModelConfig) -> Result<Self> {
        sample.check_shapes(&cfg.feature_config())?;
        let conv = |v: &[f64]| -> Vec<T> { v.iter().map(|&x| T::from_f64(x)).collect() };
        Ok(TensorSample {
            req_mats: sample.req_matrices.iter().map(|m| conv(&m.values)).collect(),
            res_mats: sample.res_matrices.iter().map(|m| conv(&m.values)).collect(),
            req_pl: sample.req_pl.iter().map(|p| conv(&p.values)).collect(),
            res_pl: sample.res_pl.iter().map(|p| conv(&p.values)).collect(),
            req_fl: conv(&sample.req_fl.values),
            res_fl: conv(&sample.res_fl.values),
            label: sample.label,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Infer,
    /// Dropout active; the mask is drawn from this seed alone, so a fixed
    /// seed gives a reproducible masked forward.
    Train { dropout_seed: u64 },
}

/// Shared raw-data encoder: one cols -> cols dense layer + ReLU applied
/// to every matrix row; the output keeps the matrix shape.
pub fn encode_raw<T: Scalar>(mat: &[T], p: &Params<T>, cfg: &ModelConfig) -> Vec<T> {
    encode_raw_cached(mat, p, cfg).0
}

pub(crate) fn encode_raw_cached<T: Scalar>(
    mat: &[T],
    p: &Params<T>,
    cfg: &ModelConfig,
) -> (Vec<T>, Vec<T>) {
    debug_assert_eq!(mat.len(), cfg.rows * cfg.cols);
    let mut pre = Vec::with_capacity(mat.len());
    for r in 0..cfg.rows {
        let row = &mat[r * cfg.cols..(r + 1) * cfg.cols];
        pre.extend(p.er_w.matvec_bias(row, &p.er_b));
    }
    let out = pre.iter().map(|&x| relu(x)).collect();
    (out, pre)
}

#[derive(Debug, Clone)]
pub struct ConvCache<T> {
    /// Conv pre-activations, kernel-major: [k][i][j].
    pub pre: Vec<T>,
    /// For each pooled cell, the flat index of its max in the conv grid.
    pub argmax: Vec<usize>,
    /// Pooled + flattened output.
    pub flat: Vec<T>,
}

/// Convolution (cross-correlation) + ReLU + max pooling, flattened
/// kernel-major. 20x40 with two 2x8 stride-2 kernels and a 2x2 stride-1
/// pool gives 10x17x2 -> 9x16x2 -> 288.
pub fn conv_pool<T: Scalar>(encoded: &[T], p: &Params<T>, cfg: &ModelConfig) -> Vec<T> {
    conv_pool_cached(encoded, p, cfg).flat
}

pub(crate) fn conv_pool_cached<T: Scalar>(
    encoded: &[T],
    p: &Params<T>,
    cfg: &ModelConfig,
) -> ConvCache<T> {
    let (oh, ow) = cfg.conv_out();
    let (ph, pw) = cfg.pool_out();
    let k_n = cfg.conv_kernels;
    let s = cfg.conv_stride;
    let mut pre = vec![T::zero(); k_n * oh * ow];
    for k in 0..k_n {
        let kernel = p.conv_w.row(k);
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = p.conv_b[k];
                for x in 0..cfg.conv_kh {
                    let row_base = (i * s + x) * cfg.cols + j * s;
                    for y in 0..cfg.conv_kw {
                        acc += encoded[row_base + y] * kernel[x * cfg.conv_kw + y];
                    }
                }
                pre[(k * oh + i) * ow + j] = acc;
            }
        }
    }

    let ps = cfg.pool_stride;
    let mut flat = vec![T::zero(); k_n * ph * pw];
    let mut argmax = vec![0usize; k_n * ph * pw];
    for k in 0..k_n {
        for pi in 0..ph {
            for pj in 0..pw {
                let mut best_idx = 0usize;
                let mut best = T::neg_infinity();
                for dx in 0..cfg.pool_h {
                    for dy in 0..cfg.pool_w {
                        let idx = (k * oh + pi * ps + dx) * ow + pj * ps + dy;
                        let v = relu(pre[idx]);
                        // Ties keep the lowest (row-major) index.
                        if v > best {
                            best = v;
                            best_idx = idx;
                        }
                    }
                }
                let out_idx = (k * ph + pi) * pw + pj;
                flat[out_idx] = best;
                argmax[out_idx] = best_idx;
            }
        }
    }
    ConvCache { pre, argmax, flat }
}

/// Dense + ReLU encoder for statistical vectors.
pub(crate) fn encode_vec_cached<T: Scalar>(x: &[T], w: &Mat<T>, b: &[T]) -> (Vec<T>, Vec<T>) {
    let pre = w.matvec_bias(x, b);
    let out = pre.iter().map(|&v| relu(v)).collect();
    (out, pre)
}

/// Packet-vector encoder (shared across packets of both directions).
pub fn encode_pl<T: Scalar>(pl: &[T], p: &Params<T>) -> Result<Vec<T>> {
    if pl.len() != PL_LEN {
        return Err(HstfError::Config(format!("packet vector length {} != {PL_LEN}", pl.len())));
    }
    Ok(encode_vec_cached(pl, &p.ep_w, &p.ep_b).0)
}

/// Flow-vector encoders; request and response have separate weights.
pub fn encode_fl<T: Scalar>(fl: &[T], p: &Params<T>, direction: crate::flow::Direction) -> Result<Vec<T>> {
    let (expect, w, b) = match direction {
        crate::flow::Direction::Request => (FL_REQ_LEN, &p.ef_req_w, &p.ef_req_b),
        crate::flow::Direction::Response => (FL_RES_LEN, &p.ef_res_w, &p.ef_res_b),
    };
    if fl.len() != expect {
        return Err(HstfError::Config(format!("flow vector length {} != {expect}", fl.len())));
    }
    Ok(encode_vec_cached(fl, w, b).0)
}

#[derive(Debug, Clone)]
pub struct LstmStepCache<T> {
    /// Concatenated [h_prev, x_t].
    pub z: Vec<T>,
    pub f: Vec<T>,
    pub i: Vec<T>,
    pub g: Vec<T>,
    pub o: Vec<T>,
    pub c: Vec<T>,
    pub tanh_c: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct LstmCache<T> {
    pub steps: Vec<LstmStepCache<T>>,
    pub h_final: Vec<T>,
}

/// Gate equations, h_0 = C_0 = 0, returns h after the last step:
///   f = sig(W_f [h, x] + b_f), i = sig(W_i [h, x] + b_i),
///   g = tanh(W_c [h, x] + b_c), C = f*C_prev + i*g,
///   o = sig(W_o [h, x] + b_o), h = o * tanh(C).
pub fn lstm_forward<T: Scalar>(seq: &[Vec<T>], p: &LstmParams<T>) -> Vec<T> {
    lstm_forward_cached(seq, p).h_final
}

pub(crate) fn lstm_forward_cached<T: Scalar>(seq: &[Vec<T>], p: &LstmParams<T>) -> LstmCache<T> {
    let hidden = p.b_f.len();
    let mut h = vec![T::zero(); hidden];
    let mut c_prev = vec![T::zero(); hidden];
    let mut steps = Vec::with_capacity(seq.len());
    for x in seq {
        let mut z = Vec::with_capacity(hidden + x.len());
        z.extend_from_slice(&h);
        z.extend_from_slice(x);
        let f: Vec<T> = p.w_f.matvec_bias(&z, &p.b_f).into_iter().map(sigmoid).collect();
        let i: Vec<T> = p.w_i.matvec_bias(&z, &p.b_i).into_iter().map(sigmoid).collect();
        let g: Vec<T> = p.w_c.matvec_bias(&z, &p.b_c).into_iter().map(|v| v.tanh()).collect();
        let o: Vec<T> = p.w_o.matvec_bias(&z, &p.b_o).into_iter().map(sigmoid).collect();
        let mut c = vec![T::zero(); hidden];
        for j in 0..hidden {
            c[j] = f[j] * c_prev[j] + i[j] * g[j];
        }
        let tanh_c: Vec<T> = c.iter().map(|v| v.tanh()).collect();
        for j in 0..hidden {
            h[j] = o[j] * tanh_c[j];
        }
        steps.push(LstmStepCache { z, f, i, g, o, c: c.clone(), tanh_c });
        c_prev = c;
    }
    LstmCache { steps, h_final: h }
}

#[derive(Debug, Clone)]
pub struct PacketCache<T> {
    pub er_pre: Vec<T>,
    pub er_out: Vec<T>,
    pub conv: ConvCache<T>,
    pub ep_pre: Vec<T>,
    /// Concatenated [conv flat, packet-vector code] fed to the LSTM.
    pub x: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct DirCache<T> {
    pub packets: Vec<PacketCache<T>>,
    pub lstm: LstmCache<T>,
    /// Dropout keep mask (all true at inference).
    pub mask: Vec<bool>,
    pub h_dropped: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct Cache<T> {
    pub req: DirCache<T>,
    pub res: DirCache<T>,
    pub ef_req_pre: Vec<T>,
    pub ef_req_out: Vec<T>,
    pub ef_res_pre: Vec<T>,
    pub ef_res_out: Vec<T>,
    pub fused: Vec<T>,
    pub head_pre: Vec<T>,
    pub head_out: Vec<T>,
    pub probs: [T; 2],
}

fn check_finite<T: Scalar>(stage: &'static str, values: &[T]) -> Result<()> {
    match first_non_finite(values) {
        None => Ok(()),
        Some(index) => Err(HstfError::NonFinite { stage, index }),
    }
}

fn direction_branch<T: Scalar>(
    mats: &[Vec<T>],
    pls: &[Vec<T>],
    lstm: &LstmParams<T>,
    p: &Params<T>,
    cfg: &ModelConfig,
    stage: &'static str,
) -> Result<(DirCache<T>, Vec<T>)> {
    let mut packets = Vec::with_capacity(cfg.flow_size);
    let mut xs = Vec::with_capacity(cfg.flow_size);
    for (mat, pl) in mats.iter().zip(pls) {
        let (er_out, er_pre) = encode_raw_cached(mat, p, cfg);
        let conv = conv_pool_cached(&er_out, p, cfg);
        check_finite(stage, &conv.flat)?;
        let (ep_out, ep_pre) = encode_vec_cached(pl, &p.ep_w, &p.ep_b);
        let mut x = conv.flat.clone();
        x.extend_from_slice(&ep_out);
        xs.push(x.clone());
        packets.push(PacketCache { er_pre, er_out, conv, ep_pre, x });
    }
    let lstm_cache = lstm_forward_cached(&xs, lstm);
    check_finite(stage, &lstm_cache.h_final)?;
    let h = lstm_cache.h_final.clone();
    Ok((
        DirCache {
            packets,
            lstm: lstm_cache,
            mask: vec![true; h.len()],
            h_dropped: h.clone(),
        },
        h,
    ))
}

fn apply_dropout<T: Scalar>(
    dir: &mut DirCache<T>,
    h: &[T],
    keep_scale: T,
    dropout: f64,
    rng: &mut ChaCha8Rng,
) {
    let mut dropped = Vec::with_capacity(h.len());
    for (j, &v) in h.iter().enumerate() {
        let keep = rng.random::<f64>() >= dropout;
        dir.mask[j] = keep;
        dropped.push(if keep { v * keep_scale } else { T::zero() });
    }
    dir.h_dropped = dropped;
}

/// Full forward pass. Train mode applies inverted dropout to both LSTM
/// outputs and returns the activation cache for the backward pass.
pub fn forward<T: Scalar>(
    sample: &TensorSample<T>,
    p: &Params<T>,
    cfg: &ModelConfig,
    mode: Mode,
) -> Result<(Prediction, Option<Cache<T>>)> {
    let (mut req, h_req) =
        direction_branch(&sample.req_mats, &sample.req_pl, &p.lstm_req, p, cfg, "lstm_req")?;
    let (mut res, h_res) =
        direction_branch(&sample.res_mats, &sample.res_pl, &p.lstm_res, p, cfg, "lstm_res")?;

    if let Mode::Train { dropout_seed } = mode {
        let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
        let keep_scale = T::from_f64(1.0 / (1.0 - cfg.dropout));
        apply_dropout(&mut req, &h_req, keep_scale, cfg.dropout, &mut rng);
        apply_dropout(&mut res, &h_res, keep_scale, cfg.dropout, &mut rng);
    }

    let (ef_req_out, ef_req_pre) = encode_vec_cached(&sample.req_fl, &p.ef_req_w, &p.ef_req_b);
    let (ef_res_out, ef_res_pre) = encode_vec_cached(&sample.res_fl, &p.ef_res_w, &p.ef_res_b);

    let mut fused = Vec::with_capacity(cfg.fused_width());
    fused.extend_from_slice(&req.h_dropped);
    fused.extend_from_slice(&res.h_dropped);
    fused.extend_from_slice(&ef_req_out);
    fused.extend_from_slice(&ef_res_out);

    let (head_out, head_pre) = encode_vec_cached(&fused, &p.head_w, &p.head_b);
    check_finite("head", &head_out)?;
    let logits_v = p.out_w.matvec_bias(&head_out, &p.out_b);
    let logits = [logits_v[0], logits_v[1]];
    let probs = softmax2(&logits);
    check_finite("softmax", &probs)?;

    let prediction = Prediction {
        p_benign: probs[0].as_f64(),
        p_malicious: probs[1].as_f64(),
    };
    let cache = if matches!(mode, Mode::Train { .. }) {
        Some(Cache {
            req,
            res,
            ef_req_pre,
            ef_req_out,
            ef_res_pre,
            ef_res_out,
            fused,
            head_pre,
            head_out,
            probs,
        })
    } else {
        None
    };
    Ok((prediction, cache))
}

/// Cross-entropy of the forward pass on one sample; the finite-difference
/// oracle in the gradient-check suite drives this.
pub fn loss_of<T: Scalar>(
    sample: &TensorSample<T>,
    p: &Params<T>,
    cfg: &ModelConfig,
    mode: Mode,
) -> Result<T> {
    let (pred, _) = forward(sample, p, cfg, mode)?;
    let target_p = match sample.label {
        Label::Malicious => pred.p_malicious,
        _ => pred.p_benign,
    };
    Ok(T::from_f64(-(target_p.max(f64::MIN_POSITIVE)).ln()))
}
