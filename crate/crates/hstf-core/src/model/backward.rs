//! Exact backpropagation: cross-entropy through the head, both LSTMs
//! (through time), max-pool (gradient routed to the argmax cell, ties to
//! the lowest index), convolution, and all encoders.

use super::forward::{Cache, DirCache, LstmCache, TensorSample};
use super::params::{LstmParams, Params};
use super::tensor::{add_assign, relu_grad, Scalar};
use super::ModelConfig;
use crate::flow::Label;

/// Gradients of the mean-free (single sample) cross-entropy loss with
/// respect to every parameter array, plus the loss value itself.
pub fn backward<T: Scalar>(
    sample: &TensorSample<T>,
    p: &Params<T>,
    cache: &Cache<T>,
    cfg: &ModelConfig,
) -> (Params<T>, T) {
    let mut g = Params::zeros(cfg);
    let hidden = cfg.lstm_hidden;
    let ef_out = cfg.ef_out;

    let target = usize::from(sample.label == Label::Malicious);
    let loss = -cache.probs[target]
        .max(T::from_f64(f64::MIN_POSITIVE))
        .ln();

    // Softmax + cross-entropy: dlogits = probs - one_hot(target).
    let mut dlogits = [cache.probs[0], cache.probs[1]];
    dlogits[target] -= T::one();

    // Output layer.
    g.out_w.add_outer(&dlogits, &cache.head_out);
    add_assign(&mut g.out_b, &dlogits);
    let mut dhead_out = vec![T::zero(); cfg.head_hidden];
    p.out_w.add_transposed_matvec(&dlogits, &mut dhead_out);

    // Head dense + ReLU.
    let dhead_pre: Vec<T> = dhead_out
        .iter()
        .zip(&cache.head_pre)
        .map(|(&d, &pre)| d * relu_grad(pre))
        .collect();
    g.head_w.add_outer(&dhead_pre, &cache.fused);
    add_assign(&mut g.head_b, &dhead_pre);
    let mut dfused = vec![T::zero(); cfg.fused_width()];
    p.head_w.add_transposed_matvec(&dhead_pre, &mut dfused);

    let (dh_req_drop, rest) = dfused.split_at(hidden);
    let (dh_res_drop, rest) = rest.split_at(hidden);
    let (def_req, def_res) = rest.split_at(ef_out);

    // Flow-vector encoders.
    let def_req_pre: Vec<T> = def_req
        .iter()
        .zip(&cache.ef_req_pre)
        .map(|(&d, &pre)| d * relu_grad(pre))
        .collect();
    g.ef_req_w.add_outer(&def_req_pre, &sample.req_fl);
    add_assign(&mut g.ef_req_b, &def_req_pre);
    let def_res_pre: Vec<T> = def_res
        .iter()
        .zip(&cache.ef_res_pre)
        .map(|(&d, &pre)| d * relu_grad(pre))
        .collect();
    g.ef_res_w.add_outer(&def_res_pre, &sample.res_fl);
    add_assign(&mut g.ef_res_b, &def_res_pre);

    // Inverted dropout: the same mask and scale as the forward pass.
    let keep_scale = T::from_f64(1.0 / (1.0 - cfg.dropout));
    let dh_of = |ddrop: &[T], dir: &DirCache<T>| -> Vec<T> {
        ddrop
            .iter()
            .zip(&dir.mask)
            .map(|(&d, &keep)| if keep { d * keep_scale } else { T::zero() })
            .collect()
    };
    let dh_req = dh_of(dh_req_drop, &cache.req);
    let dh_res = dh_of(dh_res_drop, &cache.res);

    direction_backward(
        &sample.req_mats,
        &sample.req_pl,
        &cache.req,
        &p.lstm_req,
        p,
        cfg,
        &dh_req,
        true,
        &mut g,
    );
    direction_backward(
        &sample.res_mats,
        &sample.res_pl,
        &cache.res,
        &p.lstm_res,
        p,
        cfg,
        &dh_res,
        false,
        &mut g,
    );

    (g, loss)
}

#[allow(clippy::too_many_arguments)]
fn direction_backward<T: Scalar>(
    mats: &[Vec<T>],
    pls: &[Vec<T>],
    dir: &DirCache<T>,
    lstm: &LstmParams<T>,
    p: &Params<T>,
    cfg: &ModelConfig,
    dh_final: &[T],
    is_request: bool,
    g: &mut Params<T>,
) {
    let dxs = {
        let lstm_grad = if is_request { &mut g.lstm_req } else { &mut g.lstm_res };
        lstm_backward(&dir.lstm, lstm, dh_final, lstm_grad)
    };

    let conv_flat = cfg.conv_flat();
    for (t, dx) in dxs.iter().enumerate() {
        let (dflat, dep) = dx.split_at(conv_flat);
        let pkt = &dir.packets[t];

        // Packet-vector encoder (shared).
        let dep_pre: Vec<T> = dep
            .iter()
            .zip(&pkt.ep_pre)
            .map(|(&d, &pre)| d * relu_grad(pre))
            .collect();
        g.ep_w.add_outer(&dep_pre, &pls[t]);
        add_assign(&mut g.ep_b, &dep_pre);

        // Conv + pool + raw encoder.
        let denc = conv_pool_backward(dflat, pkt, p, cfg, g);
        raw_encoder_backward(&mats[t], pkt, cfg, &denc, g);
    }
}

/// LSTM backward through time; returns the gradient w.r.t. each input.
fn lstm_backward<T: Scalar>(
    cache: &LstmCache<T>,
    p: &LstmParams<T>,
    dh_final: &[T],
    g: &mut LstmParams<T>,
) -> Vec<Vec<T>> {
    let hidden = p.b_f.len();
    let n = cache.steps.len();
    let x_len = cache.steps.first().map(|s| s.z.len() - hidden).unwrap_or(0);
    let mut dxs = vec![vec![T::zero(); x_len]; n];
    let mut dh = dh_final.to_vec();
    let mut dc = vec![T::zero(); hidden];

    for t in (0..n).rev() {
        let st = &cache.steps[t];
        let one = T::one();
        let mut do_pre = vec![T::zero(); hidden];
        let mut df_pre = vec![T::zero(); hidden];
        let mut di_pre = vec![T::zero(); hidden];
        let mut dg_pre = vec![T::zero(); hidden];
        for j in 0..hidden {
            let c_prev = if t == 0 { T::zero() } else { cache.steps[t - 1].c[j] };
            do_pre[j] = dh[j] * st.tanh_c[j] * st.o[j] * (one - st.o[j]);
            let dc_j = dc[j] + dh[j] * st.o[j] * (one - st.tanh_c[j] * st.tanh_c[j]);
            df_pre[j] = dc_j * c_prev * st.f[j] * (one - st.f[j]);
            di_pre[j] = dc_j * st.g[j] * st.i[j] * (one - st.i[j]);
            dg_pre[j] = dc_j * st.i[j] * (one - st.g[j] * st.g[j]);
            dc[j] = dc_j * st.f[j];
        }
        g.w_f.add_outer(&df_pre, &st.z);
        add_assign(&mut g.b_f, &df_pre);
        g.w_i.add_outer(&di_pre, &st.z);
        add_assign(&mut g.b_i, &di_pre);
        g.w_c.add_outer(&dg_pre, &st.z);
        add_assign(&mut g.b_c, &dg_pre);
        g.w_o.add_outer(&do_pre, &st.z);
        add_assign(&mut g.b_o, &do_pre);

        let mut dz = vec![T::zero(); hidden + x_len];
        p.w_f.add_transposed_matvec(&df_pre, &mut dz);
        p.w_i.add_transposed_matvec(&di_pre, &mut dz);
        p.w_c.add_transposed_matvec(&dg_pre, &mut dz);
        p.w_o.add_transposed_matvec(&do_pre, &mut dz);
        dxs[t].copy_from_slice(&dz[hidden..]);
        dh.copy_from_slice(&dz[..hidden]);
    }
    dxs
}

/// Pool + ReLU + conv backward for one packet; returns the gradient
/// w.r.t. the encoded matrix.
fn conv_pool_backward<T: Scalar>(
    dflat: &[T],
    pkt: &super::forward::PacketCache<T>,
    p: &Params<T>,
    cfg: &ModelConfig,
    g: &mut Params<T>,
) -> Vec<T> {
    let (oh, ow) = cfg.conv_out();
    let s = cfg.conv_stride;

    // Route pooled gradients to their argmax conv cell (overlapping
    // windows accumulate), then apply the ReLU mask.
    let mut drelu = vec![T::zero(); cfg.conv_kernels * oh * ow];
    for (out_idx, &d) in dflat.iter().enumerate() {
        if d != T::zero() {
            drelu[pkt.conv.argmax[out_idx]] += d;
        }
    }
    let mut denc = vec![T::zero(); cfg.rows * cfg.cols];
    for k in 0..cfg.conv_kernels {
        let kernel = p.conv_w.row(k);
        for i in 0..oh {
            for j in 0..ow {
                let idx = (k * oh + i) * ow + j;
                let dpre = drelu[idx] * relu_grad(pkt.conv.pre[idx]);
                if dpre == T::zero() {
                    continue;
                }
                g.conv_b[k] += dpre;
                let gk = g.conv_w.row_mut(k);
                for x in 0..cfg.conv_kh {
                    let row_base = (i * s + x) * cfg.cols + j * s;
                    for y in 0..cfg.conv_kw {
                        gk[x * cfg.conv_kw + y] += dpre * pkt.er_out[row_base + y];
                        denc[row_base + y] += dpre * kernel[x * cfg.conv_kw + y];
                    }
                }
            }
        }
    }
    denc
}

/// Shared row-wise raw encoder backward for one packet.
fn raw_encoder_backward<T: Scalar>(
    mat: &[T],
    pkt: &super::forward::PacketCache<T>,
    cfg: &ModelConfig,
    denc: &[T],
    g: &mut Params<T>,
) {
    for r in 0..cfg.rows {
        let base = r * cfg.cols;
        let der_pre: Vec<T> = (0..cfg.cols)
            .map(|c| denc[base + c] * relu_grad(pkt.er_pre[base + c]))
            .collect();
        if der_pre.iter().all(|&v| v == T::zero()) {
            continue;
        }
        g.er_w.add_outer(&der_pre, &mat[base..base + cfg.cols]);
        add_assign(&mut g.er_b, &der_pre);
    }
}
