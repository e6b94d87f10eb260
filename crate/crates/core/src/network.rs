//! Feed-forward quantile network `(features) ↦ A × N` quantiles.
//!
//! Hidden layers use ReLU, the output layer is linear. Parameters live in one
//! flat array, layer by layer, each layer storing its weight matrix
//! (`out × in`, row-major) followed by its bias.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::loss;
use crate::math;

pub const CHECKPOINT_MAGIC: &[u8] = b"QRSRM1";

/// Hyper-parameters of a [`QuantileNetwork`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub actions: usize,
    pub quantiles: usize,
    pub learning_rate: f64,
    pub kappa: f64,
    pub adam_eps: f64,
    /// Zero the output layer so every initial estimate is `δ_0`.
    pub zero_output: bool,
}

impl NetworkConfig {
    pub fn new(input_dim: usize, actions: usize, quantiles: usize) -> Self {
        Self {
            input_dim,
            hidden: alloc::vec![128, 128, 128],
            actions,
            quantiles,
            learning_rate: 2.5e-4,
            kappa: 1.0,
            adam_eps: 1e-8,
            zero_output: true,
        }
    }

    fn dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden);
        dims.push(self.actions * self.quantiles);
        dims
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(len: usize, eps: f64) -> Self {
        Self { m: alloc::vec![0.0; len], v: alloc::vec![0.0; len], step: 0, beta1: 0.9, beta2: 0.999, eps }
    }

    fn apply(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - math::powf(self.beta1, self.step as f64);
        let bc2 = 1.0 - math::powf(self.beta2, self.step as f64);
        let step_size = lr / bc1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= step_size * *m / (math::sqrt(*v / bc2) + eps);
        }
    }
}

/// Reusable activation buffers for batched passes.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
    order: Vec<usize>,
    gather: Vec<f64>,
    gather_delta: Vec<f64>,
    head: Vec<f64>,
    head_delta: Vec<f64>,
}

/// One supervised sample for [`QuantileNetwork::train_step`].
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    /// `batch × input_dim`, row-major.
    pub inputs: &'a [f64],
    pub actions: &'a [usize],
    /// `batch × M` target values (detached).
    pub targets: &'a [f64],
}

impl Batch<'_> {
    fn len(&self) -> usize {
        self.actions.len()
    }
}

#[derive(Debug, Clone)]
pub struct QuantileNetwork {
    config: NetworkConfig,
    dims: Vec<usize>,
    params: Vec<f64>,
    offsets: Vec<usize>,
    adam: Adam,
    grad: Vec<f64>,
    scratch: Scratch,
}

impl PartialEq for QuantileNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.params == other.params
    }
}

/// Batches up to this size skip gemm in the forward pass.
const SMALL_BATCH: usize = 4;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ac, ar) = a.split_at(a.len() - a.len() % 4);
    let (bc, br) = b.split_at(ac.len());
    for (x, y) in ac.chunks_exact(4).zip(bc.chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ar.iter().zip(br) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `c (m×n) = a (m×k) · b (k×n)` with arbitrary strides.
#[allow(unsafe_code, clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa, "lhs out of bounds");
    assert!(k == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb, "rhs out of bounds");
    assert!(c.len() >= m * n, "output out of bounds");
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the asserts above keep every strided access inside the slices,
    // and `c` is an exclusive borrow that does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl QuantileNetwork {
    /// Random fan-in-uniform initialization: weights and biases drawn from
    /// `U(−1/√fan_in, 1/√fan_in)`.
    pub fn new<R: Rng + ?Sized>(config: NetworkConfig, rng: &mut R) -> Self {
        let dims = config.dims();
        let total: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let mut params = alloc::vec![0.0; total];
        let layers = dims.len() - 1;
        let mut start = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let len = fan_in * fan_out + fan_out;
            if !(l + 1 == layers && config.zero_output) {
                let bound = 1.0 / math::sqrt(fan_in as f64);
                for p in &mut params[start..start + len] {
                    *p = rng.random_range(-bound..bound);
                }
            }
            start += len;
        }
        Self::from_params(config, params)
    }

    fn from_params(config: NetworkConfig, params: Vec<f64>) -> Self {
        let dims = config.dims();
        let mut offsets = Vec::with_capacity(dims.len());
        let mut total = 0;
        for w in dims.windows(2) {
            offsets.push(total);
            total += w[0] * w[1] + w[1];
        }
        assert_eq!(params.len(), total, "parameter count does not match the layer sizes");
        let adam = Adam::new(total, config.adam_eps);
        Self { config, dims, grad: alloc::vec![0.0; total], params, offsets, adam, scratch: Scratch::default() }
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn actions(&self) -> usize {
        self.config.actions
    }

    pub fn quantiles(&self) -> usize {
        self.config.quantiles
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.config.learning_rate = lr;
    }

    /// Copies the parameters of `online` into `self` (target synchronization).
    pub fn sync_from(&mut self, online: &QuantileNetwork) {
        assert_eq!(self.dims, online.dims, "target and online networks differ in shape");
        self.params.copy_from_slice(&online.params);
    }

    fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        let start = self.offsets[l];
        let w = &self.params[start..start + i * o];
        let b = &self.params[start + i * o..start + i * o + o];
        (w, b)
    }

    /// Batched forward pass; returns the `batch × (A·N)` output.
    pub fn forward_batch<'s>(&self, inputs: &[f64], batch: usize, scratch: &'s mut Scratch) -> &'s [f64] {
        self.forward_into(inputs, batch, scratch);
        &scratch.acts[self.dims.len() - 1][..batch * self.dims[self.dims.len() - 1]]
    }

    fn forward_into(&self, inputs: &[f64], batch: usize, scratch: &mut Scratch) {
        self.forward_layers(inputs, batch, self.dims.len() - 1, scratch);
    }

    /// Runs the first `count` layers; activations land in `scratch.acts[..=count]`.
    fn forward_layers(&self, inputs: &[f64], batch: usize, count: usize, scratch: &mut Scratch) {
        let layers = self.dims.len() - 1;
        assert_eq!(inputs.len(), batch * self.dims[0], "input batch has the wrong size");
        scratch.acts.resize(layers + 1, Vec::new());
        scratch.acts[0].clear();
        scratch.acts[0].extend_from_slice(inputs);
        for l in 0..count {
            let (i, o) = (self.dims[l], self.dims[l + 1]);
            let (w, b) = self.layer(l);
            let (prev, next) = scratch.acts.split_at_mut(l + 1);
            let x = &prev[l];
            let z = &mut next[0];
            z.resize(batch * o, 0.0);
            for row in z.chunks_exact_mut(o) {
                row.copy_from_slice(b);
            }
            if batch <= SMALL_BATCH {
                // packing the weights for gemm costs more than the product itself
                for (xr, zr) in x.chunks_exact(i).zip(z.chunks_exact_mut(o)) {
                    for (zj, wj) in zr.iter_mut().zip(w.chunks_exact(i)) {
                        *zj += dot(xr, wj);
                    }
                }
            } else {
                gemm(batch, i, o, x, (i, 1), w, (1, i), z, true);
            }
            if l + 1 < layers {
                for v in z.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
        }
    }

    /// Single-input forward pass: `A × N` quantiles, row-major.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut scratch = Scratch::default();
        self.forward_batch(input, 1, &mut scratch).to_vec()
    }

    /// Mean sample loss and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&mut self, batch: &Batch<'_>) -> Result<(f64, Vec<f64>)> {
        let loss = self.compute_gradient(batch)?;
        Ok((loss, self.grad.clone()))
    }

    /// Central finite-difference estimate of the loss gradient with step `h`.
    pub fn numerical_gradient(&mut self, batch: &Batch<'_>, h: f64) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.params.len());
        for i in 0..self.params.len() {
            let orig = self.params[i];
            self.params[i] = orig + h;
            let up = self.compute_gradient(batch)?;
            self.params[i] = orig - h;
            let down = self.compute_gradient(batch)?;
            self.params[i] = orig;
            out.push((up - down) / (2.0 * h));
        }
        Ok(out)
    }

    /// Mean sample loss without touching the parameters.
    pub fn loss(&mut self, batch: &Batch<'_>) -> Result<f64> {
        self.compute_gradient(batch)
    }

    fn compute_gradient(&mut self, batch: &Batch<'_>) -> Result<f64> {
        let bsz = batch.len();
        if bsz == 0 {
            return Err(Error::Domain("empty training batch".into()));
        }
        let n = self.config.quantiles;
        if batch.targets.len() % bsz != 0 || batch.inputs.len() != bsz * self.dims[0] {
            return Err(Error::DimensionMismatch { expected: bsz, got: batch.targets.len() });
        }
        if let Some(a) = batch.actions.iter().find(|a| **a >= self.config.actions) {
            return Err(Error::Domain(format!("action {a} out of range")));
        }
        let m = batch.targets.len() / bsz;
        let layers = self.dims.len() - 1;
        let mut scratch = core::mem::take(&mut self.scratch);
        self.forward_layers(batch.inputs, bsz, layers - 1, &mut scratch);

        // Only the chosen action's N outputs enter the loss, so the output
        // layer is evaluated and differentiated per action group.
        let hdim = self.dims[layers - 1];
        let start = self.offsets[layers - 1];
        let out_dim = self.dims[layers];
        let inv_b = 1.0 / bsz as f64;
        scratch.order.clear();
        scratch.order.extend(0..bsz);
        scratch.order.sort_by_key(|&s| batch.actions[s]);
        scratch.delta.clear();
        scratch.delta.resize(bsz * hdim, 0.0);
        self.grad[start..start + hdim * out_dim + out_dim].iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        let mut row_grad = alloc::vec![0.0; n];
        let mut lo = 0;
        while lo < bsz {
            let a = batch.actions[scratch.order[lo]];
            let mut hi = lo;
            while hi < bsz && batch.actions[scratch.order[hi]] == a {
                hi += 1;
            }
            let group = &scratch.order[lo..hi];
            let na = group.len();
            let h = &scratch.acts[layers - 1];
            scratch.gather.clear();
            for &s in group {
                scratch.gather.extend_from_slice(&h[s * hdim..(s + 1) * hdim]);
            }
            let wa = &self.params[start + a * n * hdim..start + (a + 1) * n * hdim];
            let ba = &self.params[start + hdim * out_dim + a * n..start + hdim * out_dim + (a + 1) * n];
            scratch.head.clear();
            for _ in 0..na {
                scratch.head.extend_from_slice(ba);
            }
            gemm(na, hdim, n, &scratch.gather, (hdim, 1), wa, (1, hdim), &mut scratch.head, true);
            scratch.head_delta.clear();
            scratch.head_delta.resize(na * n, 0.0);
            for (k, &s) in group.iter().enumerate() {
                let theta = &scratch.head[k * n..(k + 1) * n];
                total += loss::row_loss(theta, &batch.targets[s * m..(s + 1) * m], self.config.kappa, &mut row_grad);
                for (d, g) in scratch.head_delta[k * n..(k + 1) * n].iter_mut().zip(&row_grad) {
                    *d = g * inv_b;
                }
            }
            {
                let (gw, gb) = self.grad[start..start + hdim * out_dim + out_dim].split_at_mut(hdim * out_dim);
                // dW_a = δ_aᵀ · H_a
                gemm(n, na, hdim, &scratch.head_delta, (1, n), &scratch.gather, (hdim, 1), &mut gw[a * n * hdim..(a + 1) * n * hdim], false);
                for row in scratch.head_delta.chunks_exact(n) {
                    for (g, d) in gb[a * n..(a + 1) * n].iter_mut().zip(row) {
                        *g += d;
                    }
                }
            }
            // dH_a = δ_a · W_a, scattered back to sample order
            scratch.gather_delta.clear();
            scratch.gather_delta.resize(na * hdim, 0.0);
            gemm(na, n, hdim, &scratch.head_delta, (n, 1), wa, (hdim, 1), &mut scratch.gather_delta, false);
            for (k, &s) in group.iter().enumerate() {
                scratch.delta[s * hdim..(s + 1) * hdim].copy_from_slice(&scratch.gather_delta[k * hdim..(k + 1) * hdim]);
            }
            lo = hi;
        }
        let loss = total * inv_b;
        if !loss.is_finite() {
            self.scratch = scratch;
            return Err(Error::NonFinite(format!("training loss is {loss}")));
        }

        for l in (0..layers - 1).rev() {
            let (i, o) = (self.dims[l], self.dims[l + 1]);
            let start = self.offsets[l];
            // δ arrives with respect to the post-activation output of layer l
            for (d, a) in scratch.delta.iter_mut().zip(&scratch.acts[l + 1]) {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            }
            let x = &scratch.acts[l];
            {
                let (gw, gb) = self.grad[start..start + i * o + o].split_at_mut(i * o);
                // dW = δᵀ · X
                gemm(o, bsz, i, &scratch.delta, (1, o), x, (i, 1), gw, false);
                gb.iter_mut().for_each(|g| *g = 0.0);
                for row in scratch.delta.chunks_exact(o) {
                    for (g, d) in gb.iter_mut().zip(row) {
                        *g += d;
                    }
                }
            }
            if l > 0 {
                let w = &self.params[start..start + i * o];
                scratch.delta_prev.clear();
                scratch.delta_prev.resize(bsz * i, 0.0);
                gemm(bsz, o, i, &scratch.delta, (o, 1), w, (i, 1), &mut scratch.delta_prev, false);
                core::mem::swap(&mut scratch.delta, &mut scratch.delta_prev);
            }
        }
        self.scratch = scratch;
        Ok(loss)
    }

    /// One Adam step on the mean quantile Huber loss of `batch`.
    ///
    /// Returns the loss before the update. Fails without modifying the
    /// parameters if the loss is not finite, and reports an error if the
    /// update produced non-finite parameters.
    pub fn train_step(&mut self, batch: &Batch<'_>) -> Result<f64> {
        let loss = self.compute_gradient(batch)?;
        let lr = self.config.learning_rate;
        let grad = core::mem::take(&mut self.grad);
        self.adam.apply(&mut self.params, &grad, lr);
        self.grad = grad;
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameters diverged".into()));
        }
        Ok(loss)
    }

    /// Serializes the network: magic, header line, little-endian parameters.
    ///
    /// `extras` are appended to the header as `;key=value` pairs.
    pub fn write_checkpoint(&self, extras: &[(&str, &str)], out: &mut Vec<u8>) {
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.push(b'\n');
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        let mut header = format!("layers={};N={};A={}", dims.join(","), self.config.quantiles, self.config.actions);
        for (k, v) in extras {
            header.push_str(&format!(";{k}={v}"));
        }
        out.extend_from_slice(header.as_bytes());
        out.push(b'\n');
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }

    /// Reads a network written by [`write_checkpoint`](Self::write_checkpoint).
    ///
    /// Returns the network, the header's extra key/value pairs and the number
    /// of bytes consumed.
    pub fn read_checkpoint(bytes: &[u8]) -> Result<(Self, Vec<(String, String)>, usize)> {
        let bad = |msg: &str| Error::Checkpoint(msg.into());
        if bytes.len() < CHECKPOINT_MAGIC.len() + 1 || &bytes[..CHECKPOINT_MAGIC.len()] != CHECKPOINT_MAGIC {
            return Err(bad("missing magic"));
        }
        let mut pos = CHECKPOINT_MAGIC.len();
        if bytes[pos] != b'\n' {
            return Err(bad("missing newline after magic"));
        }
        pos += 1;
        let end = bytes[pos..].iter().position(|b| *b == b'\n').ok_or_else(|| bad("unterminated header"))?;
        let header = core::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| bad("header is not UTF-8"))?;
        pos += end + 1;

        let mut dims = None;
        let mut n = None;
        let mut a = None;
        let mut extras = Vec::new();
        for field in header.split(';') {
            let (k, v) = field.split_once('=').ok_or_else(|| bad("header field without `=`"))?;
            match k {
                "layers" => {
                    let parsed: core::result::Result<Vec<usize>, _> = v.split(',').map(str::parse).collect();
                    dims = Some(parsed.map_err(|_| bad("bad layer list"))?);
                }
                "N" => n = Some(v.parse::<usize>().map_err(|_| bad("bad N"))?),
                "A" => a = Some(v.parse::<usize>().map_err(|_| bad("bad A"))?),
                _ => extras.push((k.to_string(), v.to_string())),
            }
        }
        let dims = dims.ok_or_else(|| bad("missing layers"))?;
        let n = n.ok_or_else(|| bad("missing N"))?;
        let a = a.ok_or_else(|| bad("missing A"))?;
        if dims.len() < 2 || dims[dims.len() - 1] != n * a {
            return Err(bad("layer list does not end in A·N outputs"));
        }
        let mut config = NetworkConfig::new(dims[0], a, n);
        config.hidden = dims[1..dims.len() - 1].to_vec();
        let count: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        if bytes.len() < pos + 8 * count {
            return Err(bad("truncated parameters"));
        }
        let params = bytes[pos..pos + 8 * count]
            .chunks_exact(8)
            .map(|chunk| {
                let mut raw = [0u8; 8];
                raw.copy_from_slice(chunk);
                f64::from_le_bytes(raw)
            })
            .collect();
        let net = Self::from_params(config, params);
        pos += 8 * count;
        Ok((net, extras, pos))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(zero_output: bool, seed: u64) -> QuantileNetwork {
        let mut cfg = NetworkConfig::new(3, 2, 4);
        cfg.hidden = alloc::vec![8, 8, 8];
        cfg.zero_output = zero_output;
        QuantileNetwork::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn zero_output_layer_gives_delta_zero() {
        let net = tiny(true, 1);
        assert!(net.forward(&[0.3, -0.2, 0.9]).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn forward_is_deterministic_and_batched_consistently() {
        let net = tiny(false, 2);
        let x = [0.3, -0.2, 0.9, 1.0, 0.5, -0.7];
        let a = net.forward(&x[..3]);
        assert_eq!(a, net.forward(&x[..3]));
        let mut scratch = Scratch::default();
        let both = net.forward_batch(&x, 2, &mut scratch).to_vec();
        assert_eq!(&both[..8], a.as_slice());
        assert_eq!(&both[8..], net.forward(&x[3..]).as_slice());
    }

    #[test]
    fn first_layer_perturbation_is_continuous() {
        let mut net = tiny(false, 3);
        let x = [0.3, -0.2, 0.9];
        let base = net.forward(&x);
        for eps in [1e-3, 1e-5, 1e-7] {
            net.params_mut()[0] += eps;
            let moved = net.forward(&x);
            net.params_mut()[0] -= eps;
            let diff = base.iter().zip(&moved).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff <= 10.0 * eps, "diff {diff} for eps {eps}");
        }
    }

    #[test]
    fn fixed_point_leaves_parameters_unchanged() {
        let mut net = tiny(true, 4);
        let before = net.params().to_vec();
        let inputs = [0.1, 0.2, 0.3];
        let loss = net
            .train_step(&Batch { inputs: &inputs, actions: &[1], targets: &[0.0; 4] })
            .unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(net.params(), before.as_slice());
    }

    #[test]
    fn non_finite_targets_abort() {
        let mut net = tiny(true, 5);
        let before = net.params().to_vec();
        let err = net.train_step(&Batch { inputs: &[0.0; 3], actions: &[0], targets: &[f64::NAN; 4] });
        assert!(matches!(err, Err(Error::NonFinite(_))));
        assert_eq!(net.params(), before.as_slice());
    }

    #[test]
    fn sync_copies_parameters() {
        let online = tiny(false, 6);
        let mut target = tiny(false, 7);
        assert_ne!(online.forward(&[0.5; 3]), target.forward(&[0.5; 3]));
        target.sync_from(&online);
        assert_eq!(online.forward(&[0.5; 3]), target.forward(&[0.5; 3]));
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let net = tiny(false, 8);
        let mut bytes = Vec::new();
        net.write_checkpoint(&[("algo", "qrsrm:cvar:0.5")], &mut bytes);
        assert!(bytes.starts_with(b"QRSRM1\nlayers=3,8,8,8,8;N=4;A=2;algo=qrsrm:cvar:0.5\n"));
        let (back, extras, used) = QuantileNetwork::read_checkpoint(&bytes).unwrap();
        assert_eq!(used, bytes.len());
        assert_eq!(extras, alloc::vec![("algo".to_string(), "qrsrm:cvar:0.5".to_string())]);
        assert_eq!(
            back.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>(),
            net.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>()
        );
        assert!(QuantileNetwork::read_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        assert!(QuantileNetwork::read_checkpoint(b"NOPE").is_err());
    }
}
