//! Learned parameters. Every array's shape is derivable from the config
//! alone, which is what checkpoint loading validates against.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::{Mat, Scalar};
use super::ModelConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<T> {
    pub w_f: Mat<T>,
    pub b_f: Vec<T>,
    pub w_i: Mat<T>,
    pub b_i: Vec<T>,
    pub w_c: Mat<T>,
    pub b_c: Vec<T>,
    pub w_o: Mat<T>,
    pub b_o: Vec<T>,
}

impl<T: Scalar> LstmParams<T> {
    fn zeros(hidden: usize, input: usize) -> Self {
        let z = || Mat::zeros(hidden, hidden + input);
        LstmParams {
            w_f: z(),
            b_f: vec![T::zero(); hidden],
            w_i: z(),
            b_i: vec![T::zero(); hidden],
            w_c: z(),
            b_c: vec![T::zero(); hidden],
            w_o: z(),
            b_o: vec![T::zero(); hidden],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    /// Shared raw-data encoder applied to every matrix row: cols -> cols.
    pub er_w: Mat<T>,
    pub er_b: Vec<T>,
    /// Packet-vector encoder shared by both directions: 41 -> ep_out.
    pub ep_w: Mat<T>,
    pub ep_b: Vec<T>,
    /// Per-direction flow-vector encoders (input widths differ).
    pub ef_req_w: Mat<T>,
    pub ef_req_b: Vec<T>,
    pub ef_res_w: Mat<T>,
    pub ef_res_b: Vec<T>,
    /// Convolution kernels, kernels x (kh*kw), plus one bias per kernel.
    pub conv_w: Mat<T>,
    pub conv_b: Vec<T>,
    pub lstm_req: LstmParams<T>,
    pub lstm_res: LstmParams<T>,
    pub head_w: Mat<T>,
    pub head_b: Vec<T>,
    pub out_w: Mat<T>,
    pub out_b: Vec<T>,
}

impl<T: Scalar> Params<T> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        use crate::features::{FL_REQ_LEN, FL_RES_LEN, PL_LEN};
        let x = cfg.packet_feature_width();
        Params {
            er_w: Mat::zeros(cfg.cols, cfg.cols),
            er_b: vec![T::zero(); cfg.cols],
            ep_w: Mat::zeros(cfg.ep_out, PL_LEN),
            ep_b: vec![T::zero(); cfg.ep_out],
            ef_req_w: Mat::zeros(cfg.ef_out, FL_REQ_LEN),
            ef_req_b: vec![T::zero(); cfg.ef_out],
            ef_res_w: Mat::zeros(cfg.ef_out, FL_RES_LEN),
            ef_res_b: vec![T::zero(); cfg.ef_out],
            conv_w: Mat::zeros(cfg.conv_kernels, cfg.conv_kh * cfg.conv_kw),
            conv_b: vec![T::zero(); cfg.conv_kernels],
            lstm_req: LstmParams::zeros(cfg.lstm_hidden, x),
            lstm_res: LstmParams::zeros(cfg.lstm_hidden, x),
            head_w: Mat::zeros(cfg.head_hidden, cfg.fused_width()),
            head_b: vec![T::zero(); cfg.head_hidden],
            out_w: Mat::zeros(2, cfg.head_hidden),
            out_b: vec![T::zero(); 2],
        }
    }

    /// Glorot-uniform init drawn in f64 so the draw sequence is identical
    /// across scalar types; LSTM forget-gate biases start at +1.
    pub fn init(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros(cfg);
        let fill = |m: &mut Mat<T>, rng: &mut ChaCha8Rng| {
            let bound = (6.0 / (m.rows + m.cols) as f64).sqrt();
            for v in m.data.iter_mut() {
                *v = T::from_f64(rng.random_range(-bound..bound));
            }
        };
        fill(&mut p.er_w, rng);
        fill(&mut p.ep_w, rng);
        fill(&mut p.ef_req_w, rng);
        fill(&mut p.ef_res_w, rng);
        fill(&mut p.conv_w, rng);
        for lstm in [&mut p.lstm_req, &mut p.lstm_res] {
            fill(&mut lstm.w_f, rng);
            fill(&mut lstm.w_i, rng);
            fill(&mut lstm.w_c, rng);
            fill(&mut lstm.w_o, rng);
            for b in lstm.b_f.iter_mut() {
                *b = T::one();
            }
        }
        fill(&mut p.head_w, rng);
        fill(&mut p.out_w, rng);
        p
    }

    /// Named views of every parameter array, in a fixed order.
    pub fn arrays(&self) -> Vec<(&'static str, &[T])> {
        vec![
            ("er_w", self.er_w.data.as_slice()),
            ("er_b", self.er_b.as_slice()),
            ("ep_w", self.ep_w.data.as_slice()),
            ("ep_b", self.ep_b.as_slice()),
            ("ef_req_w", self.ef_req_w.data.as_slice()),
            ("ef_req_b", self.ef_req_b.as_slice()),
            ("ef_res_w", self.ef_res_w.data.as_slice()),
            ("ef_res_b", self.ef_res_b.as_slice()),
            ("conv_w", self.conv_w.data.as_slice()),
            ("conv_b", self.conv_b.as_slice()),
            ("lstm_req_w_f", self.lstm_req.w_f.data.as_slice()),
            ("lstm_req_b_f", self.lstm_req.b_f.as_slice()),
            ("lstm_req_w_i", self.lstm_req.w_i.data.as_slice()),
            ("lstm_req_b_i", self.lstm_req.b_i.as_slice()),
            ("lstm_req_w_c", self.lstm_req.w_c.data.as_slice()),
            ("lstm_req_b_c", self.lstm_req.b_c.as_slice()),
            ("lstm_req_w_o", self.lstm_req.w_o.data.as_slice()),
            ("lstm_req_b_o", self.lstm_req.b_o.as_slice()),
            ("lstm_res_w_f", self.lstm_res.w_f.data.as_slice()),
            ("lstm_res_b_f", self.lstm_res.b_f.as_slice()),
            ("lstm_res_w_i", self.lstm_res.w_i.data.as_slice()),
            ("lstm_res_b_i", self.lstm_res.b_i.as_slice()),
            ("lstm_res_w_c", self.lstm_res.w_c.data.as_slice()),
            ("lstm_res_b_c", self.lstm_res.b_c.as_slice()),
            ("lstm_res_w_o", self.lstm_res.w_o.data.as_slice()),
            ("lstm_res_b_o", self.lstm_res.b_o.as_slice()),
            ("head_w", self.head_w.data.as_slice()),
            ("head_b", self.head_b.as_slice()),
            ("out_w", self.out_w.data.as_slice()),
            ("out_b", self.out_b.as_slice()),
        ]
    }

    /// Mutable views in the same fixed order as [`Params::arrays`].
    pub fn arrays_mut(&mut self) -> Vec<(&'static str, &mut [T])> {
        let Params {
            er_w,
            er_b,
            ep_w,
            ep_b,
            ef_req_w,
            ef_req_b,
            ef_res_w,
            ef_res_b,
            conv_w,
            conv_b,
            lstm_req,
            lstm_res,
            head_w,
            head_b,
            out_w,
            out_b,
        } = self;
        vec![
            ("er_w", er_w.data.as_mut_slice()),
            ("er_b", er_b.as_mut_slice()),
            ("ep_w", ep_w.data.as_mut_slice()),
            ("ep_b", ep_b.as_mut_slice()),
            ("ef_req_w", ef_req_w.data.as_mut_slice()),
            ("ef_req_b", ef_req_b.as_mut_slice()),
            ("ef_res_w", ef_res_w.data.as_mut_slice()),
            ("ef_res_b", ef_res_b.as_mut_slice()),
            ("conv_w", conv_w.data.as_mut_slice()),
            ("conv_b", conv_b.as_mut_slice()),
            ("lstm_req_w_f", lstm_req.w_f.data.as_mut_slice()),
            ("lstm_req_b_f", lstm_req.b_f.as_mut_slice()),
            ("lstm_req_w_i", lstm_req.w_i.data.as_mut_slice()),
            ("lstm_req_b_i", lstm_req.b_i.as_mut_slice()),
            ("lstm_req_w_c", lstm_req.w_c.data.as_mut_slice()),
            ("lstm_req_b_c", lstm_req.b_c.as_mut_slice()),
            ("lstm_req_w_o", lstm_req.w_o.data.as_mut_slice()),
            ("lstm_req_b_o", lstm_req.b_o.as_mut_slice()),
            ("lstm_res_w_f", lstm_res.w_f.data.as_mut_slice()),
            ("lstm_res_b_f", lstm_res.b_f.as_mut_slice()),
            ("lstm_res_w_i", lstm_res.w_i.data.as_mut_slice()),
            ("lstm_res_b_i", lstm_res.b_i.as_mut_slice()),
            ("lstm_res_w_c", lstm_res.w_c.data.as_mut_slice()),
            ("lstm_res_b_c", lstm_res.b_c.as_mut_slice()),
            ("lstm_res_w_o", lstm_res.w_o.data.as_mut_slice()),
            ("lstm_res_b_o", lstm_res.b_o.as_mut_slice()),
            ("head_w", head_w.data.as_mut_slice()),
            ("head_b", head_b.as_mut_slice()),
            ("out_w", out_w.data.as_mut_slice()),
            ("out_b", out_b.as_mut_slice()),
        ]
    }

    /// Elementwise accumulate (gradient reduction).
    pub fn add_in_place(&mut self, other: &Params<T>) {
        let others = other.arrays();
        for ((_, dst), (_, src)) in self.arrays_mut().into_iter().zip(others) {
            super::tensor::add_assign(dst, src);
        }
    }

    /// Scale every value (e.g. 1/batch for mean gradients).
    pub fn scale(&mut self, factor: T) {
        for (_, arr) in self.arrays_mut() {
            for v in arr {
                *v *= factor;
            }
        }
    }

    pub fn total_len(&self) -> usize {
        self.arrays().iter().map(|(_, a)| a.len()).sum()
    }
}
