//! Q-network over a window of encoded observations.
//!
//! Parameters live in one flat vector so they can be checkpointed, copied to
//! a target network and updated by the optimizer without any structure. The
//! forward and backward passes are generic over the float type: training runs
//! in `f32`, gradient checks in `f64`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis, NdFloat};
use num_traits::FromPrimitive;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{encoded_dim, GameConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    /// The history window is concatenated and fed to dense layers.
    Feedforward,
    /// Dense layers embed each step, a GRU cell runs over the window.
    Gru,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub history_len: usize,
    pub num_hidden_layers: usize,
    pub hidden_dim: usize,
    pub dueling: bool,
    pub cell: Cell,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { history_len: 1, num_hidden_layers: 2, hidden_dim: 64, dueling: true, cell: Cell::Feedforward }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let cell = match self.cell {
            Cell::Feedforward => "ff",
            Cell::Gru => "gru",
        };
        write!(
            f,
            "{cell}-h{}-l{}-d{}{}",
            self.history_len,
            self.num_hidden_layers,
            self.hidden_dim,
            if self.dueling { "-duel" } else { "" }
        )
    }
}

/// The desk-scale architecture grid: hidden width x dense depth x history
/// window x cell type, sixteen descriptors in all.
pub fn enumerate_architectures() -> Vec<Architecture> {
    let mut out = Vec::with_capacity(16);
    for cell in [Cell::Feedforward, Cell::Gru] {
        for history_len in [1, 2] {
            for num_hidden_layers in [1, 2] {
                for hidden_dim in [64, 128] {
                    out.push(Architecture { history_len, num_hidden_layers, hidden_dim, dueling: true, cell });
                }
            }
        }
    }
    out
}

pub trait NetFloat: NdFloat + FromPrimitive {}
impl<T: NdFloat + FromPrimitive> NetFloat for T {}

#[derive(Clone, Copy, Debug)]
struct Tensor {
    offset: usize,
    rows: usize,
    cols: usize,
}

impl Tensor {
    fn len(&self) -> usize {
        self.rows * self.cols
    }
    fn view<'a, F>(&self, params: &'a [F]) -> ArrayView2<'a, F> {
        ArrayView2::from_shape((self.rows, self.cols), &params[self.offset..self.offset + self.len()]).unwrap()
    }
    fn vector<'a, F>(&self, params: &'a [F]) -> ArrayView1<'a, F> {
        ArrayView1::from(&params[self.offset..self.offset + self.len()])
    }
    fn view_mut<'a, F>(&self, params: &'a mut [F]) -> ArrayViewMut2<'a, F> {
        ArrayViewMut2::from_shape((self.rows, self.cols), &mut params[self.offset..self.offset + self.len()])
            .unwrap()
    }
    fn vector_mut<'a, F>(&self, params: &'a mut [F]) -> ArrayViewMut1<'a, F> {
        ArrayViewMut1::from(&mut params[self.offset..self.offset + self.len()])
    }
}

#[derive(Clone, Copy, Debug)]
struct Dense {
    w: Tensor,
    b: Tensor,
}

#[derive(Clone, Copy, Debug)]
struct GruTensors {
    wx: Tensor,
    wh: Tensor,
    bx: Tensor,
    bh: Tensor,
}

#[derive(Clone, Copy, Debug)]
enum Head {
    Plain(Dense),
    Dueling { value: Dense, advantage: Dense },
}

/// Shape of a Q-network for one game configuration.
#[derive(Clone, Debug)]
pub struct QNetwork {
    arch: Architecture,
    step_dim: usize,
    num_actions: usize,
    dense: Vec<Dense>,
    gru: Option<GruTensors>,
    head: Head,
    num_params: usize,
}

/// Intermediate values of a forward pass needed by the backward pass.
pub struct ForwardCache<F> {
    /// Inputs to each dense layer, per step for the recurrent cell.
    dense_inputs: Vec<Vec<Array2<F>>>,
    /// Post-ReLU outputs of each dense layer, per step.
    dense_outputs: Vec<Vec<Array2<F>>>,
    gru_steps: Vec<GruStep<F>>,
    head_input: Array2<F>,
    pub q: Array2<F>,
}

struct GruStep<F> {
    h_prev: Array2<F>,
    z: Array2<F>,
    r: Array2<F>,
    n: Array2<F>,
    gh_n: Array2<F>,
}

impl<F: NetFloat> ForwardCache<F> {
    /// Which ReLU units are active; finite-difference checks must not cross a kink.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.dense_outputs
            .iter()
            .flatten()
            .flat_map(|a| a.iter().map(|&v| v > F::zero()).collect::<Vec<_>>())
            .collect()
    }
}

impl QNetwork {
    pub fn new(arch: Architecture, config: &GameConfig) -> Self {
        Self::with_dims(arch, encoded_dim(config), config.num_actions())
    }

    /// `obs_dim` is the observation encoding width; each step also carries a
    /// one-hot of the previous action.
    pub fn with_dims(arch: Architecture, obs_dim: usize, num_actions: usize) -> Self {
        assert!(arch.history_len >= 1 && arch.hidden_dim >= 1 && arch.num_hidden_layers >= 1);
        let step_dim = obs_dim + num_actions;
        let mut offset = 0;
        let mut tensor = |rows: usize, cols: usize| {
            let t = Tensor { offset, rows, cols };
            offset += rows * cols;
            t
        };
        let first_in = match arch.cell {
            Cell::Feedforward => arch.history_len * step_dim,
            Cell::Gru => step_dim,
        };
        let h = arch.hidden_dim;
        let mut dense = Vec::new();
        for layer in 0..arch.num_hidden_layers {
            let inp = if layer == 0 { first_in } else { h };
            dense.push(Dense { w: tensor(inp, h), b: tensor(1, h) });
        }
        let head_in = h;
        let gru = (arch.cell == Cell::Gru).then(|| {
            GruTensors { wx: tensor(h, 3 * h), wh: tensor(h, 3 * h), bx: tensor(1, 3 * h), bh: tensor(1, 3 * h) }
        });
        let head = if arch.dueling {
            Head::Dueling {
                value: Dense { w: tensor(head_in, 1), b: tensor(1, 1) },
                advantage: Dense { w: tensor(head_in, num_actions), b: tensor(1, num_actions) },
            }
        } else {
            Head::Plain(Dense { w: tensor(head_in, num_actions), b: tensor(1, num_actions) })
        };
        Self { arch, step_dim, num_actions, dense, gru, head, num_params: offset }
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Width of one history step: observation features plus previous action.
    pub fn step_dim(&self) -> usize {
        self.step_dim
    }

    pub fn input_dim(&self) -> usize {
        self.arch.history_len * self.step_dim
    }

    /// Uniform fan-in initialisation, biases included.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f32> {
        let mut params = vec![0.0f32; self.num_params];
        let mut fill = |t: Tensor, fan_in: usize, params: &mut [f32]| {
            let bound = 1.0 / (fan_in as f32).sqrt();
            for v in &mut params[t.offset..t.offset + t.len()] {
                *v = rng.gen_range(-bound..bound);
            }
        };
        for d in &self.dense {
            fill(d.w, d.w.rows, &mut params);
            fill(d.b, d.w.rows, &mut params);
        }
        if let Some(g) = self.gru {
            let h = self.arch.hidden_dim;
            for t in [g.wx, g.wh, g.bx, g.bh] {
                fill(t, h, &mut params);
            }
        }
        match self.head {
            Head::Plain(d) => {
                fill(d.w, d.w.rows, &mut params);
                fill(d.b, d.w.rows, &mut params);
            }
            Head::Dueling { value, advantage } => {
                for d in [value, advantage] {
                    fill(d.w, d.w.rows, &mut params);
                    fill(d.b, d.w.rows, &mut params);
                }
            }
        }
        params
    }

    /// Q-values for a batch. `inputs` is `batch x input_dim`, laid out as
    /// `history_len` steps of `step_dim`, oldest first.
    pub fn forward<F: NetFloat>(&self, params: &[F], inputs: ArrayView2<F>) -> ForwardCache<F> {
        assert_eq!(params.len(), self.num_params, "parameter vector does not match architecture");
        assert_eq!(inputs.ncols(), self.input_dim());
        let steps: Vec<ArrayView2<F>> = match self.arch.cell {
            Cell::Feedforward => vec![inputs],
            Cell::Gru => (0..self.arch.history_len)
                .map(|t| inputs.slice(s![.., t * self.step_dim..(t + 1) * self.step_dim]))
                .collect(),
        };
        let mut dense_inputs = Vec::with_capacity(steps.len());
        let mut dense_outputs = Vec::with_capacity(steps.len());
        let mut step_features = Vec::with_capacity(steps.len());
        for x in steps {
            let mut ins = Vec::with_capacity(self.dense.len());
            let mut outs = Vec::with_capacity(self.dense.len());
            let mut cur = x.to_owned();
            for d in &self.dense {
                let mut z = cur.dot(&d.w.view(params));
                z += &d.b.vector(params);
                z.mapv_inplace(|v| if v > F::zero() { v } else { F::zero() });
                ins.push(std::mem::replace(&mut cur, z.clone()));
                outs.push(z);
            }
            step_features.push(cur);
            dense_inputs.push(ins);
            dense_outputs.push(outs);
        }

        let mut gru_steps = Vec::new();
        let head_input = match self.gru {
            None => step_features.pop().unwrap(),
            Some(g) => {
                let hd = self.arch.hidden_dim;
                let batch = inputs.nrows();
                let mut h = Array2::<F>::zeros((batch, hd));
                for x in &step_features {
                    let mut gx = x.dot(&g.wx.view(params));
                    gx += &g.bx.vector(params);
                    let mut gh = h.dot(&g.wh.view(params));
                    gh += &g.bh.vector(params);
                    let z = (&gx.slice(s![.., 0..hd]) + &gh.slice(s![.., 0..hd])).mapv(sigmoid);
                    let r = (&gx.slice(s![.., hd..2 * hd]) + &gh.slice(s![.., hd..2 * hd])).mapv(sigmoid);
                    let gh_n = gh.slice(s![.., 2 * hd..]).to_owned();
                    let n = (&gx.slice(s![.., 2 * hd..]) + &(&r * &gh_n)).mapv(|v| v.tanh());
                    let one = F::one();
                    let h_next = &n * &z.mapv(|v| one - v) + &z * &h;
                    gru_steps.push(GruStep { h_prev: h, z, r, n, gh_n });
                    h = h_next;
                }
                h
            }
        };

        let q = match self.head {
            Head::Plain(d) => {
                let mut q = head_input.dot(&d.w.view(params));
                q += &d.b.vector(params);
                q
            }
            Head::Dueling { value, advantage } => {
                let mut v = head_input.dot(&value.w.view(params));
                v += &value.b.vector(params);
                let mut a = head_input.dot(&advantage.w.view(params));
                a += &advantage.b.vector(params);
                let mean = a.mean_axis(Axis(1)).unwrap();
                let mut q = a;
                for (mut row, (&vv, &m)) in q.rows_mut().into_iter().zip(v.column(0).iter().zip(mean.iter())) {
                    row.mapv_inplace(|x| x + vv - m);
                }
                q
            }
        };
        ForwardCache { dense_inputs, dense_outputs, gru_steps, head_input, q }
    }

    /// Gradient of a scalar loss with respect to all parameters, given
    /// `dq = dL/dQ` for every output of the cached forward pass.
    pub fn backward<F: NetFloat>(&self, params: &[F], cache: &ForwardCache<F>, dq: ArrayView2<F>) -> Vec<F> {
        let mut grad = vec![F::zero(); self.num_params];
        let batch = dq.nrows();

        let d_head_in = match self.head {
            Head::Plain(d) => {
                accumulate_dense(&mut grad, d, cache.head_input.view(), dq);
                dq.dot(&d.w.view(params).t())
            }
            Head::Dueling { value, advantage } => {
                let inv_a = F::from_usize(self.num_actions).unwrap().recip();
                let dv = dq.sum_axis(Axis(1)).insert_axis(Axis(1));
                let mut da = dq.to_owned();
                for (mut row, &s) in da.rows_mut().into_iter().zip(dv.column(0).iter()) {
                    let m = s * inv_a;
                    row.mapv_inplace(|x| x - m);
                }
                accumulate_dense(&mut grad, value, cache.head_input.view(), dv.view());
                accumulate_dense(&mut grad, advantage, cache.head_input.view(), da.view());
                dv.dot(&value.w.view(params).t()) + da.dot(&advantage.w.view(params).t())
            }
        };

        let step_grads: Vec<Array2<F>> = match self.gru {
            None => vec![d_head_in],
            Some(g) => {
                let hd = self.arch.hidden_dim;
                let one = F::one();
                let mut dh = d_head_in;
                let mut dxs = vec![Array2::<F>::zeros((0, 0)); cache.gru_steps.len()];
                let x_inputs: Vec<ArrayView2<F>> =
                    cache.dense_outputs.iter().map(|outs| outs.last().expect("at least one dense layer").view()).collect();
                for t in (0..cache.gru_steps.len()).rev() {
                    let st = &cache.gru_steps[t];
                    let dz = &dh * &(&st.h_prev - &st.n);
                    let dn = &dh * &st.z.mapv(|v| one - v);
                    let dh_direct = &dh * &st.z;
                    let dn_pre = &dn * &st.n.mapv(|v| one - v * v);
                    let dr = &dn_pre * &st.gh_n;
                    let dr_pre = &dr * &st.r.mapv(|v| v * (one - v));
                    let dz_pre = &dz * &st.z.mapv(|v| v * (one - v));
                    let mut dgx = Array2::<F>::zeros((batch, 3 * hd));
                    dgx.slice_mut(s![.., 0..hd]).assign(&dz_pre);
                    dgx.slice_mut(s![.., hd..2 * hd]).assign(&dr_pre);
                    dgx.slice_mut(s![.., 2 * hd..]).assign(&dn_pre);
                    let mut dgh = dgx.clone();
                    dgh.slice_mut(s![.., 2 * hd..]).assign(&(&dn_pre * &st.r));
                    accumulate_dense(&mut grad, Dense { w: g.wx, b: g.bx }, x_inputs[t], dgx.view());
                    accumulate_dense(&mut grad, Dense { w: g.wh, b: g.bh }, st.h_prev.view(), dgh.view());
                    dxs[t] = dgx.dot(&g.wx.view(params).t());
                    dh = dh_direct + dgh.dot(&g.wh.view(params).t());
                }
                dxs
            }
        };

        for (t, mut d) in step_grads.into_iter().enumerate() {
            for (l, layer) in self.dense.iter().enumerate().rev() {
                let out = &cache.dense_outputs[t][l];
                d.zip_mut_with(out, |g, &o| {
                    if o <= F::zero() {
                        *g = F::zero()
                    }
                });
                accumulate_dense(&mut grad, *layer, cache.dense_inputs[t][l].view(), d.view());
                if l > 0 {
                    d = d.dot(&layer.w.view(params).t());
                }
            }
        }
        grad
    }

    /// Q-values for a single input row.
    pub fn q_values(&self, params: &[f32], input: &[f32]) -> Vec<f32> {
        let view = ArrayView2::from_shape((1, input.len()), input).unwrap();
        self.forward(params, view).q.row(0).to_vec()
    }
}

fn sigmoid<F: NetFloat>(v: F) -> F {
    F::one() / (F::one() + (-v).exp())
}

fn accumulate_dense<F: NetFloat>(grad: &mut [F], d: Dense, input: ArrayView2<F>, dout: ArrayView2<F>) {
    let dw = input.t().dot(&dout);
    d.w.view_mut(grad).zip_mut_with(&dw, |g, &v| *g += v);
    let db: Array1<F> = dout.sum_axis(Axis(0));
    d.b.vector_mut(grad).zip_mut_with(&db, |g, &v| *g += v);
}

/// Index of the largest legal value; ties go to the lowest index.
pub fn masked_argmax(values: &[f32], legal: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f32)> = None;
    for (i, (&v, &ok)) in values.iter().zip(legal).enumerate() {
        if ok && best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_has_sixteen_distinct_descriptors() {
        let grid = enumerate_architectures();
        assert_eq!(grid.len(), 16);
        for (i, a) in grid.iter().enumerate() {
            for b in &grid[i + 1..] {
                assert_ne!(a, b);
            }
        }
        let cfg = GameConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for arch in grid {
            let net = QNetwork::new(arch, &cfg);
            let params = net.init_params(&mut rng);
            let q = net.q_values(&params, &vec![0.1; net.input_dim()]);
            assert_eq!(q.len(), cfg.num_actions());
            assert!(q.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn argmax_tie_break_and_mask() {
        assert_eq!(masked_argmax(&[2.0, 5.0, 5.0], &[true; 3]), Some(1));
        assert_eq!(masked_argmax(&[2.0, 5.0, 4.0], &[true, false, true]), Some(2));
        assert_eq!(masked_argmax(&[2.0, 5.0], &[false, false]), None);
    }

    #[test]
    fn dueling_head_centres_advantages() {
        let arch = Architecture { num_hidden_layers: 1, hidden_dim: 8, ..Architecture::default() };
        let net = QNetwork::with_dims(arch, 5, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params: Vec<f64> = net.init_params(&mut rng).into_iter().map(f64::from).collect();
        let x = Array2::from_shape_fn((3, net.input_dim()), |(i, j)| (i as f64 - j as f64) * 0.1);
        let cache = net.forward(&params, x.view());
        // Q - V averages to zero across actions, so mean(Q) equals V
        let Head::Dueling { value, .. } = net.head else { panic!() };
        let v = cache.head_input.dot(&value.w.view(&params)) + &value.b.vector(&params);
        for (row, vv) in cache.q.rows().into_iter().zip(v.column(0)) {
            assert!((row.mean().unwrap() - vv).abs() < 1e-12);
        }
    }
}
