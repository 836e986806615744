//! The two classifiers and their backpropagation.
//!
//! Parameters live in one flat vector; [`Layout`] maps every layer's weights
//! and biases to a contiguous range. Weight tensors are row-major:
//! dense `[out][in]`, convolution `[out_ch][in_ch][ky][kx]`.

use rand::Rng;

use super::data::{Dataset, CLASSES, IMAGE_PIXELS, IMAGE_SIDE};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Architecture {
    /// 784 → hidden (ReLU) → 10 (softmax).
    Mlp { hidden: usize },
    /// conv 3×3×16 → pool 2×2 → conv 3×3×32 → pool 2×2 → dense 10 (softmax).
    Cnn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamRole {
    Weight,
    Bias,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub name: &'static str,
    pub role: ParamRole,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
    fan_in: usize,
    fan_out: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub entries: Vec<LayerParams>,
}

impl Layout {
    fn build(spec: &[(&'static str, ParamRole, Vec<usize>, usize, usize)]) -> Self {
        let mut offset = 0;
        let entries = spec
            .iter()
            .map(|(name, role, shape, fan_in, fan_out)| {
                let len = shape.iter().product();
                let e = LayerParams {
                    name,
                    role: *role,
                    shape: shape.clone(),
                    offset,
                    len,
                    fan_in: *fan_in,
                    fan_out: *fan_out,
                };
                offset += len;
                e
            })
            .collect();
        Layout { entries }
    }

    pub fn total(&self) -> usize {
        self.entries.last().map_or(0, |e| e.offset + e.len)
    }

    /// Splits a flat vector into per-entry slices.
    pub fn unflatten<'a>(&self, theta: &'a [f64]) -> Vec<&'a [f64]> {
        self.entries.iter().map(|e| &theta[e.offset..e.offset + e.len]).collect()
    }

    pub fn flatten(&self, parts: &[&[f64]]) -> Result<Vec<f64>> {
        if parts.len() != self.entries.len() {
            return Err(Error::dims("layer count", self.entries.len(), parts.len()));
        }
        let mut out = Vec::with_capacity(self.total());
        for (e, p) in self.entries.iter().zip(parts) {
            if p.len() != e.len {
                return Err(Error::dims("layer parameter count", e.len, p.len()));
            }
            out.extend_from_slice(p);
        }
        Ok(out)
    }
}

// Spatial sizes of the convolutional network.
const C1: usize = 16;
const C2: usize = 32;
const K: usize = 3;
const S1: usize = IMAGE_SIDE - K + 1; // 26
const P1: usize = S1 / 2; // 13
const S2: usize = P1 - K + 1; // 11
const P2: usize = S2 / 2; // 5
const FLAT: usize = C2 * P2 * P2; // 800

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub arch: Architecture,
    pub layout: Layout,
}

impl Model {
    pub fn mlp(hidden: usize) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::invalid("MLP needs at least one hidden unit"));
        }
        use ParamRole::*;
        let layout = Layout::build(&[
            ("dense1", Weight, vec![hidden, IMAGE_PIXELS], IMAGE_PIXELS, hidden),
            ("dense1", Bias, vec![hidden], IMAGE_PIXELS, hidden),
            ("dense2", Weight, vec![CLASSES, hidden], hidden, CLASSES),
            ("dense2", Bias, vec![CLASSES], hidden, CLASSES),
        ]);
        Ok(Self {
            arch: Architecture::Mlp { hidden },
            layout,
        })
    }

    pub fn cnn() -> Self {
        use ParamRole::*;
        let layout = Layout::build(&[
            ("conv1", Weight, vec![C1, 1, K, K], K * K, C1 * K * K),
            ("conv1", Bias, vec![C1], K * K, C1 * K * K),
            ("conv2", Weight, vec![C2, C1, K, K], C1 * K * K, C2 * K * K),
            ("conv2", Bias, vec![C2], C1 * K * K, C2 * K * K),
            ("dense", Weight, vec![CLASSES, FLAT], FLAT, CLASSES),
            ("dense", Bias, vec![CLASSES], FLAT, CLASSES),
        ]);
        Self {
            arch: Architecture::Cnn,
            layout,
        }
    }

    pub fn num_params(&self) -> usize {
        self.layout.total()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut theta = vec![0.0; self.num_params()];
        for e in &self.layout.entries {
            if e.role == ParamRole::Weight {
                let limit = (6.0 / (e.fan_in + e.fan_out) as f64).sqrt();
                for w in &mut theta[e.offset..e.offset + e.len] {
                    *w = rng.random_range(-limit..limit);
                }
            }
        }
        theta
    }

    /// Class probabilities for one image.
    pub fn predict(&self, theta: &[f64], image: &[f64]) -> [f64; CLASSES] {
        let mut logits = [0.0; CLASSES];
        match self.arch {
            Architecture::Mlp { hidden } => {
                let mut h = vec![0.0; hidden];
                mlp_forward(theta, hidden, image, &mut h, &mut logits);
            }
            Architecture::Cnn => {
                let mut act = CnnActivations::new();
                cnn_forward(theta, image, &mut act, &mut logits);
            }
        }
        softmax(&logits)
    }

    /// Mean cross-entropy over `indices` of `data` and its gradient.
    pub fn loss_and_grad(&self, theta: &[f64], data: &Dataset, indices: &[usize]) -> Result<(f64, Vec<f64>)> {
        if theta.len() != self.num_params() {
            return Err(Error::dims("parameter vector", self.num_params(), theta.len()));
        }
        if indices.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let mut grad = vec![0.0; theta.len()];
        let mut loss = 0.0;
        match self.arch {
            Architecture::Mlp { hidden } => {
                let mut h = vec![0.0; hidden];
                for &i in indices {
                    loss += mlp_backward(theta, hidden, data.image(i), data.labels[i], &mut h, &mut grad);
                }
            }
            Architecture::Cnn => {
                let mut act = CnnActivations::new();
                for &i in indices {
                    loss += cnn_backward(theta, data.image(i), data.labels[i], &mut act, &mut grad);
                }
            }
        }
        let n = indices.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((loss / n, grad))
    }
}

pub fn softmax(logits: &[f64; CLASSES]) -> [f64; CLASSES] {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; CLASSES];
    let mut sum = 0.0;
    for (pi, &z) in p.iter_mut().zip(logits) {
        *pi = (z - max).exp();
        sum += *pi;
    }
    p.iter_mut().for_each(|pi| *pi /= sum);
    p
}

/// `−log softmax(z)_label`, and `softmax(z) − onehot` written into `logits`.
fn cross_entropy_in_place(logits: &mut [f64; CLASSES], label: u8) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
    let lse = max + sum.ln();
    let loss = lse - logits[label as usize];
    for z in logits.iter_mut() {
        *z = (*z - lse).exp();
    }
    logits[label as usize] -= 1.0;
    loss
}

fn mlp_forward(theta: &[f64], hidden: usize, x: &[f64], h: &mut [f64], logits: &mut [f64; CLASSES]) {
    let (w1, rest) = theta.split_at(hidden * IMAGE_PIXELS);
    let (b1, rest) = rest.split_at(hidden);
    let (w2, b2) = rest.split_at(CLASSES * hidden);
    for (j, hj) in h.iter_mut().enumerate() {
        let row = &w1[j * IMAGE_PIXELS..(j + 1) * IMAGE_PIXELS];
        let z: f64 = b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        *hj = z.max(0.0);
    }
    for (c, l) in logits.iter_mut().enumerate() {
        let row = &w2[c * hidden..(c + 1) * hidden];
        *l = b2[c] + row.iter().zip(h.iter()).map(|(w, v)| w * v).sum::<f64>();
    }
}

fn mlp_backward(theta: &[f64], hidden: usize, x: &[f64], label: u8, h: &mut [f64], grad: &mut [f64]) -> f64 {
    let mut logits = [0.0; CLASSES];
    mlp_forward(theta, hidden, x, h, &mut logits);
    let loss = cross_entropy_in_place(&mut logits, label);
    let dz = logits;

    let w2_off = hidden * IMAGE_PIXELS + hidden;
    let b2_off = w2_off + CLASSES * hidden;
    let w2 = &theta[w2_off..b2_off];
    let mut dh = vec![0.0; hidden];
    for c in 0..CLASSES {
        grad[b2_off + c] += dz[c];
        for j in 0..hidden {
            grad[w2_off + c * hidden + j] += dz[c] * h[j];
            dh[j] += dz[c] * w2[c * hidden + j];
        }
    }
    let b1_off = hidden * IMAGE_PIXELS;
    for j in 0..hidden {
        if h[j] <= 0.0 {
            continue;
        }
        let d = dh[j];
        grad[b1_off + j] += d;
        let row = &mut grad[j * IMAGE_PIXELS..(j + 1) * IMAGE_PIXELS];
        for (g, v) in row.iter_mut().zip(x) {
            *g += d * v;
        }
    }
    loss
}

struct CnnActivations {
    a1: Vec<f64>,     // C1 × S1 × S1, after ReLU
    p1: Vec<f64>,     // C1 × P1 × P1
    arg1: Vec<usize>, // index into a1 of each pooled maximum
    a2: Vec<f64>,     // C2 × S2 × S2, after ReLU
    p2: Vec<f64>,     // C2 × P2 × P2, the flattened dense input
    arg2: Vec<usize>,
}

impl CnnActivations {
    fn new() -> Self {
        Self {
            a1: vec![0.0; C1 * S1 * S1],
            p1: vec![0.0; C1 * P1 * P1],
            arg1: vec![0; C1 * P1 * P1],
            a2: vec![0.0; C2 * S2 * S2],
            p2: vec![0.0; FLAT],
            arg2: vec![0; FLAT],
        }
    }
}

struct CnnOffsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wd: usize,
    bd: usize,
}

const OFF: CnnOffsets = {
    let w1 = 0;
    let b1 = w1 + C1 * K * K;
    let w2 = b1 + C1;
    let b2 = w2 + C2 * C1 * K * K;
    let wd = b2 + C2;
    let bd = wd + CLASSES * FLAT;
    CnnOffsets { w1, b1, w2, b2, wd, bd }
};

/// Valid 3×3 convolution followed by ReLU.
fn conv_relu(input: &[f64], in_ch: usize, side: usize, w: &[f64], b: &[f64], out_ch: usize, out: &mut [f64]) {
    let os = side - K + 1;
    for f in 0..out_ch {
        let plane = &mut out[f * os * os..(f + 1) * os * os];
        plane.iter_mut().for_each(|v| *v = b[f]);
        for c in 0..in_ch {
            let src = &input[c * side * side..(c + 1) * side * side];
            for ky in 0..K {
                for kx in 0..K {
                    let wv = w[((f * in_ch + c) * K + ky) * K + kx];
                    for y in 0..os {
                        let srow = &src[(y + ky) * side + kx..(y + ky) * side + kx + os];
                        let orow = &mut plane[y * os..(y + 1) * os];
                        for (o, s) in orow.iter_mut().zip(srow) {
                            *o += wv * s;
                        }
                    }
                }
            }
        }
        plane.iter_mut().for_each(|v| *v = v.max(0.0));
    }
}

/// 2×2 max pooling with stride 2 (trailing odd row/column dropped). Ties go
/// to the first maximal element in row-major order.
fn max_pool(input: &[f64], ch: usize, side: usize, out: &mut [f64], arg: &mut [usize]) {
    let ps = side / 2;
    for c in 0..ch {
        for y in 0..ps {
            for x in 0..ps {
                let mut best = f64::NEG_INFINITY;
                let mut at = 0;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let i = c * side * side + (2 * y + dy) * side + 2 * x + dx;
                    if input[i] > best {
                        best = input[i];
                        at = i;
                    }
                }
                let o = c * ps * ps + y * ps + x;
                out[o] = best;
                arg[o] = at;
            }
        }
    }
}

fn cnn_forward(theta: &[f64], x: &[f64], act: &mut CnnActivations, logits: &mut [f64; CLASSES]) {
    conv_relu(x, 1, IMAGE_SIDE, &theta[OFF.w1..OFF.b1], &theta[OFF.b1..OFF.w2], C1, &mut act.a1);
    max_pool(&act.a1, C1, S1, &mut act.p1, &mut act.arg1);
    conv_relu(&act.p1, C1, P1, &theta[OFF.w2..OFF.b2], &theta[OFF.b2..OFF.wd], C2, &mut act.a2);
    max_pool(&act.a2, C2, S2, &mut act.p2, &mut act.arg2);
    let wd = &theta[OFF.wd..OFF.bd];
    for (c, l) in logits.iter_mut().enumerate() {
        *l = theta[OFF.bd + c] + wd[c * FLAT..(c + 1) * FLAT].iter().zip(&act.p2).map(|(w, v)| w * v).sum::<f64>();
    }
}

/// Accumulates weight gradients of a valid 3×3 convolution and, if
/// requested, the gradient with respect to its input.
#[allow(clippy::too_many_arguments)]
fn conv_backward(
    input: &[f64],
    in_ch: usize,
    side: usize,
    w: &[f64],
    dout: &[f64],
    out_ch: usize,
    gw: &mut [f64],
    gb: &mut [f64],
    mut din: Option<&mut [f64]>,
) {
    let os = side - K + 1;
    for f in 0..out_ch {
        let d = &dout[f * os * os..(f + 1) * os * os];
        gb[f] += d.iter().sum::<f64>();
        for c in 0..in_ch {
            let src = &input[c * side * side..(c + 1) * side * side];
            for ky in 0..K {
                for kx in 0..K {
                    let wi = ((f * in_ch + c) * K + ky) * K + kx;
                    let mut acc = 0.0;
                    for y in 0..os {
                        let srow = &src[(y + ky) * side + kx..(y + ky) * side + kx + os];
                        let drow = &d[y * os..(y + 1) * os];
                        acc += srow.iter().zip(drow).map(|(s, g)| s * g).sum::<f64>();
                    }
                    gw[wi] += acc;
                    if let Some(din) = din.as_deref_mut() {
                        let wv = w[wi];
                        let plane = &mut din[c * side * side..(c + 1) * side * side];
                        for y in 0..os {
                            let drow = &d[y * os..(y + 1) * os];
                            let irow = &mut plane[(y + ky) * side + kx..(y + ky) * side + kx + os];
                            for (i, g) in irow.iter_mut().zip(drow) {
                                *i += wv * g;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn cnn_backward(theta: &[f64], x: &[f64], label: u8, act: &mut CnnActivations, grad: &mut [f64]) -> f64 {
    let mut logits = [0.0; CLASSES];
    cnn_forward(theta, x, act, &mut logits);
    let loss = cross_entropy_in_place(&mut logits, label);
    let dz = logits;

    // dense
    let wd = &theta[OFF.wd..OFF.bd];
    let mut dflat = vec![0.0; FLAT];
    for c in 0..CLASSES {
        grad[OFF.bd + c] += dz[c];
        let g = &mut grad[OFF.wd + c * FLAT..OFF.wd + (c + 1) * FLAT];
        for ((gi, &p), (df, &w)) in g.iter_mut().zip(&act.p2).zip(dflat.iter_mut().zip(&wd[c * FLAT..(c + 1) * FLAT])) {
            *gi += dz[c] * p;
            *df += dz[c] * w;
        }
    }

    // pool2 and ReLU2
    let mut da2 = vec![0.0; C2 * S2 * S2];
    for (o, &at) in act.arg2.iter().enumerate() {
        if act.a2[at] > 0.0 {
            da2[at] += dflat[o];
        }
    }

    let mut dp1 = vec![0.0; C1 * P1 * P1];
    {
        let (head, tail) = grad.split_at_mut(OFF.b2);
        conv_backward(
            &act.p1,
            C1,
            P1,
            &theta[OFF.w2..OFF.b2],
            &da2,
            C2,
            &mut head[OFF.w2..],
            &mut tail[..C2],
            Some(&mut dp1),
        );
    }

    // pool1 and ReLU1
    let mut da1 = vec![0.0; C1 * S1 * S1];
    for (o, &at) in act.arg1.iter().enumerate() {
        if act.a1[at] > 0.0 {
            da1[at] += dp1[o];
        }
    }

    let (head, tail) = grad.split_at_mut(OFF.b1);
    conv_backward(x, 1, IMAGE_SIDE, &theta[OFF.w1..OFF.b1], &da1, C1, &mut head[OFF.w1..], &mut tail[..C1], None);
    loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn cnn_has_paper_parameter_count() {
        let m = Model::cnn();
        assert_eq!(m.num_params(), 12810);
        let sizes: Vec<usize> = m.layout.entries.iter().map(|e| e.len).collect();
        assert_eq!(sizes, vec![144, 16, 4608, 32, 8000, 10]);
        assert_eq!((S1, P1, S2, P2, FLAT), (26, 13, 11, 5, 800));
    }

    #[test]
    fn mlp_parameter_counts() {
        assert_eq!(Model::mlp(32).unwrap().num_params(), 25450);
        assert_eq!(Model::mlp(1).unwrap().num_params(), 805);
        assert!(Model::mlp(0).is_err());
    }

    #[test]
    fn zero_weights_give_uniform_prediction() {
        let m = Model::mlp(8).unwrap();
        let theta = vec![0.0; m.num_params()];
        let img = vec![0.5; IMAGE_PIXELS];
        for p in m.predict(&theta, &img) {
            assert!((p - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut rng = seeded(1);
        let img: Vec<f64> = (0..IMAGE_PIXELS).map(|_| rng.random()).collect();
        for m in [Model::cnn(), Model::mlp(16).unwrap()] {
            let theta = m.init(&mut rng);
            let p = m.predict(&theta, &img);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flatten_roundtrip() {
        let m = Model::cnn();
        let theta = m.init(&mut seeded(2));
        let parts = m.layout.unflatten(&theta);
        assert_eq!(m.layout.flatten(&parts).unwrap(), theta);
        assert!(m.layout.flatten(&parts[1..]).is_err());
    }

    #[test]
    fn init_is_bounded_with_zero_biases() {
        let m = Model::mlp(4).unwrap();
        let theta = m.init(&mut seeded(3));
        for e in &m.layout.entries {
            let s = &theta[e.offset..e.offset + e.len];
            match e.role {
                ParamRole::Bias => assert!(s.iter().all(|&b| b == 0.0)),
                ParamRole::Weight => {
                    let limit = (6.0 / (e.fan_in + e.fan_out) as f64).sqrt();
                    assert!(s.iter().all(|w| w.abs() <= limit));
                }
            }
        }
    }

    #[test]
    fn pooling_ties_route_to_first_element() {
        let input = vec![1.0; 4];
        let mut out = vec![0.0; 1];
        let mut arg = vec![9; 1];
        max_pool(&input, 1, 2, &mut out, &mut arg);
        assert_eq!(arg[0], 0);
    }
}
