//! Single-layer LSTM with a dense read-out of the final hidden state.
//!
//! Gate pre-activations are stacked in the order input, forget, candidate,
//! output, so `wx` is `4H × I`, `wh` is `4H × H` and `b` has `4H` entries.

use serde::{Deserialize, Serialize};

use super::tensor::{affine, affine_backward, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmState {
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            c: vec![0.0; hidden],
            h: vec![0.0; hidden],
        }
    }
}

/// Gate activations and resulting state at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    pub input_gate: Vec<f64>,
    pub forget_gate: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output_gate: Vec<f64>,
    pub state: LstmState,
}

pub(crate) struct LstmParams<'a> {
    pub wx: &'a Tensor,
    pub wh: &'a Tensor,
    pub b: &'a Tensor,
    pub wy: &'a Tensor,
    pub by: &'a Tensor,
}

impl LstmParams<'_> {
    fn hidden(&self) -> usize {
        self.wh.cols()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Runs the recurrence over `steps`, each a slice of the input width.
pub(crate) fn unroll(p: &LstmParams, steps: &[&[f64]]) -> Vec<LstmStep> {
    let hsz = p.hidden();
    let mut out: Vec<LstmStep> = Vec::with_capacity(steps.len());
    let mut a = vec![0.0; 4 * hsz];
    let mut rec = vec![0.0; 4 * hsz];
    let zero = LstmState::zeros(hsz);
    let no_bias = Tensor::zeros(&[4 * hsz]);
    for x in steps {
        let prev = out.last().map_or(&zero, |s| &s.state);
        affine(p.wx, p.b, x, &mut a);
        affine(p.wh, &no_bias, &prev.h, &mut rec);
        let mut step = LstmStep {
            input_gate: Vec::with_capacity(hsz),
            forget_gate: Vec::with_capacity(hsz),
            candidate: Vec::with_capacity(hsz),
            output_gate: Vec::with_capacity(hsz),
            state: LstmState::zeros(hsz),
        };
        for k in 0..hsz {
            let i = sigmoid(a[k] + rec[k]);
            let f = sigmoid(a[hsz + k] + rec[hsz + k]);
            let g = (a[2 * hsz + k] + rec[2 * hsz + k]).tanh();
            let o = sigmoid(a[3 * hsz + k] + rec[3 * hsz + k]);
            let c = f * prev.c[k] + i * g;
            step.input_gate.push(i);
            step.forget_gate.push(f);
            step.candidate.push(g);
            step.output_gate.push(o);
            step.state.c[k] = c;
            step.state.h[k] = o * c.tanh();
        }
        out.push(step);
    }
    out
}

pub(crate) fn forward(p: &LstmParams, steps: &[&[f64]], y: &mut [f64]) -> Vec<LstmStep> {
    let trace = unroll(p, steps);
    let h_last = trace.last().map(|s| s.state.h.clone()).unwrap_or_else(|| vec![0.0; p.hidden()]);
    affine(p.wy, p.by, &h_last, y);
    trace
}

/// Gradients in parameter order `wx, wh, b, wy, by`, accumulated into `grads`.
pub(crate) fn backward(p: &LstmParams, steps: &[&[f64]], trace: &[LstmStep], dy: &[f64], grads: &mut [Tensor]) {
    let hsz = p.hidden();
    let zero = LstmState::zeros(hsz);
    let [gwx, gwh, gb, gwy, gby] = grads else {
        panic!("LSTM expects five gradient tensors");
    };
    let h_last = trace.last().map_or(&zero.h, |s| &s.state.h);
    let mut dh = vec![0.0; hsz];
    affine_backward(p.wy, h_last, dy, gwy, gby, Some(&mut dh));
    let mut dc = vec![0.0; hsz];
    let mut da = vec![0.0; 4 * hsz];
    let mut dh_prev = vec![0.0; hsz];
    let mut scratch_b = Tensor::zeros(&[4 * hsz]);
    for t in (0..trace.len()).rev() {
        let s = &trace[t];
        let prev = if t == 0 { &zero } else { &trace[t - 1].state };
        for k in 0..hsz {
            let (i, f, g, o) = (s.input_gate[k], s.forget_gate[k], s.candidate[k], s.output_gate[k]);
            let tc = s.state.c[k].tanh();
            let d_o = dh[k] * tc;
            let dck = dc[k] + dh[k] * o * (1.0 - tc * tc);
            da[k] = dck * g * i * (1.0 - i);
            da[hsz + k] = dck * prev.c[k] * f * (1.0 - f);
            da[2 * hsz + k] = dck * i * (1.0 - g * g);
            da[3 * hsz + k] = d_o * o * (1.0 - o);
            dc[k] = dck * f;
        }
        affine_backward(p.wx, steps[t], &da, gwx, gb, None);
        affine_backward(p.wh, &prev.h, &da, gwh, &mut scratch_b, Some(&mut dh_prev));
        std::mem::swap(&mut dh, &mut dh_prev);
    }
}
