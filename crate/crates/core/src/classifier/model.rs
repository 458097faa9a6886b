use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output channels of the three conv blocks.
pub const CHANNELS: [usize; 3] = [8, 16, 32];
/// Category, aberration type and amplitude head widths.
pub const HEADS: [usize; 3] = [2, 8, 9];
pub const FEATURES: usize = 32;
pub const DEFAULT_INPUT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    CrossEntropy,
    /// Squared error between softmax outputs and one-hot targets, averaged
    /// over each head's classes.
    Mse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    #[serde(skip)]
    pub offset: usize,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Parameter tensors in declaration order.
pub fn layout() -> Vec<TensorInfo> {
    let mut specs: Vec<(String, Vec<usize>)> = Vec::new();
    let mut cin = 1;
    for (i, &c) in CHANNELS.iter().enumerate() {
        specs.push((format!("conv{}.weight", i + 1), vec![c, cin, 3, 3]));
        specs.push((format!("conv{}.bias", i + 1), vec![c]));
        cin = c;
    }
    for (name, &k) in ["category", "type", "amplitude"].iter().zip(&HEADS) {
        specs.push((format!("head_{name}.weight"), vec![k, FEATURES]));
        specs.push((format!("head_{name}.bias"), vec![k]));
    }
    let mut offset = 0;
    specs
        .into_iter()
        .map(|(name, shape)| {
            let t = TensorInfo {
                name,
                shape,
                offset,
            };
            offset += t.len();
            t
        })
        .collect()
}

/// Conv stack (3×3 same conv, tanh, 2×2 mean pool) ×3, global mean pool,
/// three affine heads.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    input_size: usize,
    params: Vec<f64>,
    layout: Vec<TensorInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    pub category: Vec<f64>,
    pub aberration_type: Vec<f64>,
    pub amplitude: Vec<f64>,
}

impl Logits {
    pub fn heads(&self) -> [&[f64]; 3] {
        [&self.category, &self.aberration_type, &self.amplitude]
    }

    pub fn argmax(&self) -> [usize; 3] {
        self.heads().map(argmax)
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Zero mean, unit variance (mean-only when the input is constant).
pub fn normalize_input(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let inv = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
    values.iter().map(|v| (v - mean) * inv).collect()
}

struct Cache {
    /// Zero-padded input of each conv block.
    padded: [Vec<f64>; 3],
    /// tanh activations before pooling.
    act: [Vec<f64>; 3],
    features: Vec<f64>,
}

fn pad(src: &[f64], c: usize, s: usize) -> Vec<f64> {
    let sp = s + 2;
    let mut out = vec![0.0; c * sp * sp];
    for ch in 0..c {
        for y in 0..s {
            let dst = (ch * sp + y + 1) * sp + 1;
            out[dst..dst + s].copy_from_slice(&src[(ch * s + y) * s..][..s]);
        }
    }
    out
}

fn unpad(src: &[f64], c: usize, s: usize) -> Vec<f64> {
    let sp = s + 2;
    let mut out = vec![0.0; c * s * s];
    for ch in 0..c {
        for y in 0..s {
            let from = (ch * sp + y + 1) * sp + 1;
            out[(ch * s + y) * s..][..s].copy_from_slice(&src[from..from + s]);
        }
    }
    out
}

fn conv3x3(inp: &[f64], cin: usize, s: usize, w: &[f64], b: &[f64], cout: usize) -> Vec<f64> {
    let sp = s + 2;
    let mut out = vec![0.0; cout * s * s];
    for oc in 0..cout {
        let o = &mut out[oc * s * s..(oc + 1) * s * s];
        o.fill(b[oc]);
        for ic in 0..cin {
            let ip = &inp[ic * sp * sp..(ic + 1) * sp * sp];
            for ky in 0..3 {
                for kx in 0..3 {
                    let wv = w[((oc * cin + ic) * 3 + ky) * 3 + kx];
                    for y in 0..s {
                        let row = &ip[(y + ky) * sp + kx..][..s];
                        for (a, &v) in o[y * s..(y + 1) * s].iter_mut().zip(row) {
                            *a += wv * v;
                        }
                    }
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv3x3_backward(
    inp: &[f64],
    cin: usize,
    s: usize,
    w: &[f64],
    cout: usize,
    dout: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    mut dinp: Option<&mut [f64]>,
) {
    let sp = s + 2;
    for oc in 0..cout {
        let d = &dout[oc * s * s..(oc + 1) * s * s];
        db[oc] += d.iter().sum::<f64>();
        for ic in 0..cin {
            let ip = &inp[ic * sp * sp..(ic + 1) * sp * sp];
            for ky in 0..3 {
                for kx in 0..3 {
                    let wi = ((oc * cin + ic) * 3 + ky) * 3 + kx;
                    let mut acc = 0.0;
                    for y in 0..s {
                        let row = &ip[(y + ky) * sp + kx..][..s];
                        let drow = &d[y * s..(y + 1) * s];
                        acc += drow.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
                    }
                    dw[wi] += acc;
                    if let Some(di) = dinp.as_deref_mut() {
                        let wv = w[wi];
                        let dip = &mut di[ic * sp * sp..(ic + 1) * sp * sp];
                        for y in 0..s {
                            let drow = &d[y * s..(y + 1) * s];
                            for (a, &g) in dip[(y + ky) * sp + kx..][..s].iter_mut().zip(drow) {
                                *a += wv * g;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn pool2(src: &[f64], c: usize, s: usize) -> Vec<f64> {
    let h = s / 2;
    let mut out = vec![0.0; c * h * h];
    for ch in 0..c {
        for y in 0..h {
            for x in 0..h {
                let i = (ch * s + 2 * y) * s + 2 * x;
                out[(ch * h + y) * h + x] =
                    0.25 * (src[i] + src[i + 1] + src[i + s] + src[i + s + 1]);
            }
        }
    }
    out
}

/// Gradient through pool then tanh, given pooled-output gradient `dp`.
fn pool_tanh_backward(dp: &[f64], act: &[f64], c: usize, s: usize) -> Vec<f64> {
    let h = s / 2;
    let mut out = vec![0.0; c * s * s];
    for ch in 0..c {
        for y in 0..s {
            for x in 0..s {
                let i = (ch * s + y) * s + x;
                let t = act[i];
                out[i] = 0.25 * dp[(ch * h + y / 2) * h + x / 2] * (1.0 - t * t);
            }
        }
    }
    out
}

/// Loss of one head and its gradient with respect to the logits.
fn head_loss(z: &[f64], target: usize, kind: LossKind) -> (f64, Vec<f64>) {
    let p = softmax(z);
    match kind {
        LossKind::CrossEntropy => {
            let loss = -(p[target].max(f64::MIN_POSITIVE)).ln();
            let mut g = p;
            g[target] -= 1.0;
            (loss, g)
        }
        LossKind::Mse => {
            let k = z.len() as f64;
            let diff: Vec<f64> = p
                .iter()
                .enumerate()
                .map(|(i, &pi)| pi - if i == target { 1.0 } else { 0.0 })
                .collect();
            let loss = diff.iter().map(|d| d * d).sum::<f64>() / k;
            let dp: Vec<f64> = diff.iter().map(|d| 2.0 * d / k).collect();
            let dot: f64 = dp.iter().zip(&p).map(|(a, b)| a * b).sum();
            let g = p.iter().zip(&dp).map(|(pi, gi)| pi * (gi - dot)).collect();
            (loss, g)
        }
    }
}

impl ClassifierModel {
    /// Fan-in scaled uniform weights, zero biases.
    pub fn new(input_size: usize, seed: u64) -> Result<Self> {
        if input_size < 8 || !input_size.is_multiple_of(8) {
            return Err(Error::InvalidConfig(format!(
                "classifier input size must be a positive multiple of 8, got {input_size}"
            )));
        }
        let layout = layout();
        let total = layout.last().map(|t| t.offset + t.len()).unwrap_or(0);
        let mut params = vec![0.0; total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in layout.iter().filter(|t| t.name.ends_with("weight")) {
            let fan_in: usize = t.shape[1..].iter().product();
            let bound = (3.0 / fan_in as f64).sqrt();
            for p in &mut params[t.range()] {
                *p = rng.random_range(-bound..bound);
            }
        }
        Ok(Self {
            input_size,
            params,
            layout,
        })
    }

    pub fn from_parts(input_size: usize, params: Vec<f64>) -> Result<Self> {
        let mut m = Self::new(input_size, 0)?;
        if params.len() != m.params.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters, model has {}",
                params.len(),
                m.params.len()
            )));
        }
        m.params = params;
        Ok(m)
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layout(&self) -> &[TensorInfo] {
        &self.layout
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn tensor(&self, i: usize) -> &[f64] {
        &self.params[self.layout[i].range()]
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        let n = self.input_size * self.input_size;
        if input.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "classifier expects {n} input values ({0}x{0}), got {1}",
                self.input_size,
                input.len()
            )));
        }
        Ok(())
    }

    fn forward_cached(&self, input: &[f64]) -> (Logits, Cache) {
        let mut s = self.input_size;
        let mut cin = 1;
        let mut x = input.to_vec();
        let mut padded: [Vec<f64>; 3] = Default::default();
        let mut act: [Vec<f64>; 3] = Default::default();
        for (l, &cout) in CHANNELS.iter().enumerate() {
            padded[l] = pad(&x, cin, s);
            let mut a = conv3x3(
                &padded[l],
                cin,
                s,
                self.tensor(2 * l),
                self.tensor(2 * l + 1),
                cout,
            );
            a.iter_mut().for_each(|v| *v = v.tanh());
            x = pool2(&a, cout, s);
            act[l] = a;
            s /= 2;
            cin = cout;
        }
        let area = (s * s) as f64;
        let features: Vec<f64> = x
            .chunks(s * s)
            .map(|c| c.iter().sum::<f64>() / area)
            .collect();
        let mut heads = [0usize; 3].map(|_| Vec::new());
        for (h, &k) in HEADS.iter().enumerate() {
            let w = self.tensor(6 + 2 * h);
            let b = self.tensor(7 + 2 * h);
            heads[h] = (0..k)
                .map(|i| {
                    b[i] + w[i * FEATURES..(i + 1) * FEATURES]
                        .iter()
                        .zip(&features)
                        .map(|(a, f)| a * f)
                        .sum::<f64>()
                })
                .collect();
        }
        let [category, aberration_type, amplitude] = heads;
        (
            Logits {
                category,
                aberration_type,
                amplitude,
            },
            Cache {
                padded,
                act,
                features,
            },
        )
    }

    pub fn forward(&self, input: &[f64]) -> Result<Logits> {
        self.check_input(input)?;
        Ok(self.forward_cached(input).0)
    }

    /// Summed head losses of one sample, and their parameter gradient added
    /// into `grad` scaled by `scale`.
    fn sample_grad(
        &self,
        input: &[f64],
        targets: [usize; 3],
        kind: LossKind,
        scale: f64,
        grad: &mut [f64],
    ) -> f64 {
        let (logits, cache) = self.forward_cached(input);
        let mut loss = 0.0;
        let mut dfeat = vec![0.0; FEATURES];
        for (h, z) in logits.heads().iter().enumerate() {
            let (l, dz) = head_loss(z, targets[h], kind);
            loss += l;
            let wt = &self.layout[6 + 2 * h];
            let bt = &self.layout[7 + 2 * h];
            let w = self.tensor(6 + 2 * h);
            for (i, &g) in dz.iter().enumerate() {
                let g = g * scale;
                grad[bt.offset + i] += g;
                for f in 0..FEATURES {
                    grad[wt.offset + i * FEATURES + f] += g * cache.features[f];
                    dfeat[f] += g * w[i * FEATURES + f];
                }
            }
        }

        let mut s = self.input_size >> CHANNELS.len();
        let area = (s * s) as f64;
        let mut dp: Vec<f64> = dfeat
            .iter()
            .flat_map(|&g| std::iter::repeat_n(g / area, s * s))
            .collect();
        for l in (0..CHANNELS.len()).rev() {
            s *= 2;
            let cout = CHANNELS[l];
            let cin = if l == 0 { 1 } else { CHANNELS[l - 1] };
            let dconv = pool_tanh_backward(&dp, &cache.act[l], cout, s);
            let (wt, bt) = (&self.layout[2 * l], &self.layout[2 * l + 1]);
            let (lo, hi) = grad.split_at_mut(bt.offset);
            let dw = &mut lo[wt.range()];
            let db = &mut hi[..bt.len()];
            if l == 0 {
                conv3x3_backward(
                    &cache.padded[l],
                    cin,
                    s,
                    self.tensor(2 * l),
                    cout,
                    &dconv,
                    dw,
                    db,
                    None,
                );
            } else {
                let sp = s + 2;
                let mut dpad = vec![0.0; cin * sp * sp];
                conv3x3_backward(
                    &cache.padded[l],
                    cin,
                    s,
                    self.tensor(2 * l),
                    cout,
                    &dconv,
                    dw,
                    db,
                    Some(&mut dpad),
                );
                dp = unpad(&dpad, cin, s);
            }
        }
        loss
    }

    /// Mean over the batch of the summed head losses, with its gradient.
    pub fn loss_and_grad(
        &self,
        batch: &[(&[f64], [usize; 3])],
        kind: LossKind,
    ) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut grad = vec![0.0; self.params.len()];
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for (input, targets) in batch {
            self.check_input(input)?;
            check_targets(*targets)?;
            loss += self.sample_grad(input, *targets, kind, scale, &mut grad);
        }
        Ok((loss * scale, grad))
    }

    pub fn loss(&self, batch: &[(&[f64], [usize; 3])], kind: LossKind) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut total = 0.0;
        for (input, targets) in batch {
            check_targets(*targets)?;
            let logits = self.forward(input)?;
            total += logits
                .heads()
                .iter()
                .zip(targets)
                .map(|(z, &t)| head_loss(z, t, kind).0)
                .sum::<f64>();
        }
        Ok(total / batch.len() as f64)
    }
}

fn check_targets(t: [usize; 3]) -> Result<()> {
    if t.iter().zip(&HEADS).any(|(&v, &k)| v >= k) {
        return Err(Error::InvalidArgument(format!(
            "target {t:?} out of head range {HEADS:?}"
        )));
    }
    Ok(())
}

/// Worst central-difference disagreement for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGradCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Entries failing both the relative and the absolute bound.
    pub failures: usize,
}

/// Compares analytic gradients against central differences with step
/// `eps`. At most `per_tensor` entries of each tensor are probed, evenly
/// strided; `usize::MAX` probes all.
pub fn gradient_check(
    model: &ClassifierModel,
    batch: &[(&[f64], [usize; 3])],
    kind: LossKind,
    eps: f64,
    per_tensor: usize,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Vec<TensorGradCheck>> {
    let (_, grad) = model.loss_and_grad(batch, kind)?;
    let mut probe = model.clone();
    let mut out = Vec::new();
    for t in model.layout() {
        let n = t.len();
        let stride = n.div_ceil(per_tensor.min(n).max(1));
        let mut check = TensorGradCheck {
            name: t.name.clone(),
            checked: 0,
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            failures: 0,
        };
        for i in (0..n).step_by(stride) {
            let k = t.offset + i;
            let orig = probe.params[k];
            probe.params[k] = orig + eps;
            let up = probe.loss(batch, kind)?;
            probe.params[k] = orig - eps;
            let down = probe.loss(batch, kind)?;
            probe.params[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let abs = (numeric - grad[k]).abs();
            let rel = abs / numeric.abs().max(grad[k].abs()).max(f64::MIN_POSITIVE);
            check.checked += 1;
            check.max_abs_error = check.max_abs_error.max(abs);
            if abs > abs_tol {
                check.max_rel_error = check.max_rel_error.max(rel);
                if rel > rel_tol {
                    check.failures += 1;
                }
            }
        }
        out.push(check);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(s: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        normalize_input(&(0..s * s).map(|_| rng.random::<f64>()).collect::<Vec<_>>())
    }

    #[test]
    fn shapes_and_count() {
        let m = ClassifierModel::new(64, 1).unwrap();
        assert_eq!(m.param_count(), 6515);
        let l = m.forward(&input(64, 2)).unwrap();
        assert_eq!(
            (l.category.len(), l.aberration_type.len(), l.amplitude.len()),
            (2, 8, 9)
        );
        for h in l.heads() {
            assert!((softmax(h).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(m.forward(&input(32, 2)).is_err());
        assert!(ClassifierModel::new(60, 1).is_err());
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let m = ClassifierModel::new(64, 3).unwrap();
        let x = input(64, 4);
        let y = x.clone();
        assert_eq!(m.forward(&x).unwrap(), m.forward(&y).unwrap());
    }

    #[test]
    fn uniform_logits_give_log_k() {
        let mut m = ClassifierModel::new(16, 3).unwrap();
        for t in m.layout.clone() {
            if t.name.starts_with("head") {
                m.params[t.range()].fill(0.0);
            }
        }
        let x = input(16, 5);
        let batch = [(x.as_slice(), [1, 3, 8])];
        let expected = 2f64.ln() + 8f64.ln() + 9f64.ln();
        assert!((m.loss(&batch, LossKind::CrossEntropy).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences_both_losses() {
        let m = ClassifierModel::new(16, 7).unwrap();
        let (a, b) = (input(16, 8), input(16, 9));
        let batch = [(a.as_slice(), [0, 2, 4]), (b.as_slice(), [1, 6, 8])];
        for kind in [LossKind::CrossEntropy, LossKind::Mse] {
            let checks = gradient_check(&m, &batch, kind, 1e-4, 40, 1e-3, 1e-6).unwrap();
            assert_eq!(checks.len(), 12);
            for c in checks {
                assert_eq!(c.failures, 0, "{kind:?} {c:?}");
            }
        }
    }

    #[test]
    fn mse_loss_is_bounded_and_nonnegative() {
        let m = ClassifierModel::new(16, 1).unwrap();
        let x = input(16, 2);
        let l = m.loss(&[(x.as_slice(), [0, 0, 0])], LossKind::Mse).unwrap();
        assert!((0.0..=3.0).contains(&l));
    }
}
