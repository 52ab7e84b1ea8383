use super::Tensor;
use crate::error::{shape_err, Error, Result};

fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let n = a.len().max(b.len());
    let mut out = vec![0; n];
    for i in 0..n {
        let da = if i < n - a.len() { 1 } else { a[i - (n - a.len())] };
        let db = if i < n - b.len() { 1 } else { b[i - (n - b.len())] };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return shape_err(format!("cannot broadcast {a:?} with {b:?}")),
        };
    }
    Ok(out)
}

fn contiguous_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![0; shape.len()];
    let mut acc = 1;
    for i in (0..shape.len()).rev() {
        strides[i] = acc;
        acc *= shape[i];
    }
    strides
}

/// Strides of `shape` viewed as `out` (right-aligned), zero on broadcast axes.
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let base = contiguous_strides(shape);
    let off = out.len() - shape.len();
    (0..out.len())
        .map(|i| {
            if i < off || shape[i - off] == 1 {
                0
            } else {
                base[i - off]
            }
        })
        .collect()
}

/// Visits every element of `out` in row-major order, passing the flat offset
/// into each of the strided inputs.
fn for_each_offset(out: &[usize], strides: &[&[usize]], mut f: impl FnMut(usize, &[usize])) {
    let total: usize = out.iter().product();
    if total == 0 {
        return;
    }
    let nd = out.len();
    let k = strides.len();
    let mut idx = vec![0usize; nd];
    let mut offs = vec![0usize; k];
    for flat in 0..total {
        f(flat, &offs);
        // odometer increment
        let mut d = nd;
        while d > 0 {
            d -= 1;
            idx[d] += 1;
            for (o, s) in offs.iter_mut().zip(strides) {
                *o += s[d];
            }
            if idx[d] < out[d] {
                break;
            }
            for (o, s) in offs.iter_mut().zip(strides) {
                *o -= s[d] * out[d];
            }
            idx[d] = 0;
        }
    }
}

fn zip_broadcast(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<(Vec<f64>, Vec<usize>)> {
    let ad = a.data();
    let bd = b.data();
    if a.shape() == b.shape() {
        let data = ad.iter().zip(bd.iter()).map(|(&x, &y)| f(x, y)).collect();
        return Ok((data, a.shape().to_vec()));
    }
    let out = broadcast_shape(a.shape(), b.shape())?;
    if bd.len() == 1 && out == a.shape() {
        let y = bd[0];
        return Ok((ad.iter().map(|&x| f(x, y)).collect(), out));
    }
    let sa = broadcast_strides(a.shape(), &out);
    let sb = broadcast_strides(b.shape(), &out);
    let mut data = vec![0.0; out.iter().product()];
    for_each_offset(&out, &[&sa, &sb], |flat, o| data[flat] = f(ad[o[0]], bd[o[1]]));
    Ok((data, out))
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Vec<f64> {
    t.data().iter().map(|&x| f(x)).collect()
}

impl Tensor {
    // ---- broadcasting arithmetic ------------------------------------------

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        let (data, shape) = zip_broadcast(self, other, |x, y| x + y)?;
        let (sa, sb) = (self.shape().to_vec(), other.shape().to_vec());
        Ok(Tensor::from_op("add", data, shape, &[self, other], move |g| {
            Ok(vec![Some(g.sum_to(&sa)?), Some(g.sum_to(&sb)?)])
        }))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        let (data, shape) = zip_broadcast(self, other, |x, y| x - y)?;
        let (sa, sb) = (self.shape().to_vec(), other.shape().to_vec());
        Ok(Tensor::from_op("sub", data, shape, &[self, other], move |g| {
            Ok(vec![Some(g.sum_to(&sa)?), Some(g.neg().sum_to(&sb)?)])
        }))
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        let (data, shape) = zip_broadcast(self, other, |x, y| x * y)?;
        let (a, b) = (self.clone(), other.clone());
        Ok(Tensor::from_op("mul", data, shape, &[self, other], move |g| {
            let ga = if a.requires_grad() { Some(g.mul(&b)?.sum_to(a.shape())?) } else { None };
            let gb = if b.requires_grad() { Some(g.mul(&a)?.sum_to(b.shape())?) } else { None };
            Ok(vec![ga, gb])
        }))
    }

    pub fn div(&self, other: &Tensor) -> Result<Tensor> {
        let (data, shape) = zip_broadcast(self, other, |x, y| x / y)?;
        let (a, b) = (self.clone(), other.clone());
        Ok(Tensor::from_op("div", data, shape, &[self, other], move |g| {
            let ga = if a.requires_grad() { Some(g.div(&b)?.sum_to(a.shape())?) } else { None };
            let gb = if b.requires_grad() {
                let num = g.mul(&a)?.neg();
                Some(num.div(&b.mul(&b)?)?.sum_to(b.shape())?)
            } else {
                None
            };
            Ok(vec![ga, gb])
        }))
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        Tensor::from_op("add_scalar", map(self, |x| x + c), self.shape().to_vec(), &[self], |g| {
            Ok(vec![Some(g.clone())])
        })
    }

    pub fn mul_scalar(&self, c: f64) -> Tensor {
        Tensor::from_op("mul_scalar", map(self, |x| x * c), self.shape().to_vec(), &[self], move |g| {
            Ok(vec![Some(g.mul_scalar(c))])
        })
    }

    pub fn neg(&self) -> Tensor {
        self.mul_scalar(-1.0)
    }

    // ---- unary ------------------------------------------------------------

    pub fn exp(&self) -> Tensor {
        let x = self.clone();
        Tensor::from_op("exp", map(self, f64::exp), self.shape().to_vec(), &[self], move |g| {
            Ok(vec![Some(g.mul(&x.exp())?)])
        })
    }

    pub fn ln(&self) -> Tensor {
        let x = self.clone();
        Tensor::from_op("ln", map(self, f64::ln), self.shape().to_vec(), &[self], move |g| {
            Ok(vec![Some(g.div(&x)?)])
        })
    }

    pub fn sqrt(&self) -> Tensor {
        let x = self.clone();
        Tensor::from_op("sqrt", map(self, f64::sqrt), self.shape().to_vec(), &[self], move |g| {
            Ok(vec![Some(g.div(&x.sqrt().mul_scalar(2.0))?)])
        })
    }

    /// Elementwise power with a constant exponent.
    pub fn powf(&self, p: f64) -> Tensor {
        let x = self.clone();
        Tensor::from_op("powf", map(self, |v| v.powf(p)), self.shape().to_vec(), &[self], move |g| {
            Ok(vec![Some(g.mul(&x.powf(p - 1.0).mul_scalar(p))?)])
        })
    }

    pub fn square(&self) -> Tensor {
        let x = self.clone();
        Tensor::from_op("square", map(self, |v| v * v), self.shape().to_vec(), &[self], move |g| {
            Ok(vec![Some(g.mul(&x.mul_scalar(2.0))?)])
        })
    }

    pub fn tanh(&self) -> Tensor {
        let x = self.clone();
        Tensor::from_op("tanh", map(self, f64::tanh), self.shape().to_vec(), &[self], move |g| {
            let t = x.tanh();
            let d = t.square().neg().add_scalar(1.0);
            Ok(vec![Some(g.mul(&d)?)])
        })
    }

    pub fn sigmoid(&self) -> Tensor {
        let x = self.clone();
        Tensor::from_op("sigmoid", map(self, sigmoid), self.shape().to_vec(), &[self], move |g| {
            let s = x.sigmoid();
            let d = s.mul(&s.neg().add_scalar(1.0))?;
            Ok(vec![Some(g.mul(&d)?)])
        })
    }

    /// `ln(1 + e^x)`, evaluated stably.
    pub fn softplus(&self) -> Tensor {
        let x = self.clone();
        Tensor::from_op("softplus", map(self, softplus), self.shape().to_vec(), &[self], move |g| {
            Ok(vec![Some(g.mul(&x.sigmoid())?)])
        })
    }

    /// `x` where `x >= 0`, `slope * x` elsewhere. The derivative at 0 is taken
    /// to be `slope`.
    pub fn leaky_relu(&self, slope: f64) -> Tensor {
        let mask: Vec<f64> = map(self, |v| if v > 0.0 { 1.0 } else { slope });
        let data = self.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let mask = Tensor::raw(mask, self.shape().to_vec());
        Tensor::from_op("leaky_relu", data, self.shape().to_vec(), &[self], move |g| {
            Ok(vec![Some(g.mul(&mask)?)])
        })
    }

    pub fn relu(&self) -> Tensor {
        self.leaky_relu(0.0)
    }

    // ---- reductions -------------------------------------------------------

    pub fn sum(&self) -> Tensor {
        let s: f64 = self.data().iter().sum();
        let shape = self.shape().to_vec();
        Tensor::from_op("sum", vec![s], Vec::new(), &[self], move |g| Ok(vec![Some(g.expand(&shape)?)]))
    }

    pub fn mean(&self) -> Tensor {
        let n = self.numel() as f64;
        self.sum().mul_scalar(1.0 / n)
    }

    /// Sum over one axis. With `keepdim` the axis is kept with length 1.
    pub fn sum_axis(&self, axis: usize, keepdim: bool) -> Result<Tensor> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() {
            return shape_err(format!("axis {axis} out of range for {shape:?}"));
        }
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let d = self.data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..len {
                let base = (o * len + k) * inner;
                let dst = &mut out[o * inner..(o + 1) * inner];
                for (acc, v) in dst.iter_mut().zip(&d[base..base + inner]) {
                    *acc += v;
                }
            }
        }
        drop(d);
        let mut kept = shape.clone();
        kept[axis] = 1;
        let mut out_shape = kept.clone();
        if !keepdim {
            out_shape.remove(axis);
        }
        Ok(Tensor::from_op("sum_axis", out, out_shape, &[self], move |g| {
            Ok(vec![Some(g.reshape(&kept)?.expand(&shape)?)])
        }))
    }

    pub fn mean_axis(&self, axis: usize, keepdim: bool) -> Result<Tensor> {
        let n = *self
            .shape()
            .get(axis)
            .ok_or_else(|| Error::Shape(format!("axis {axis} out of range for {:?}", self.shape())))?;
        Ok(self.sum_axis(axis, keepdim)?.mul_scalar(1.0 / n as f64))
    }

    /// Per-row maximum along `axis` (kept), as a constant. Used for
    /// numerically stable log-sum-exp; carries no gradient.
    pub fn max_axis_detached(&self, axis: usize) -> Result<Tensor> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() {
            return shape_err(format!("axis {axis} out of range for {shape:?}"));
        }
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let d = self.data();
        let mut out = vec![f64::NEG_INFINITY; outer * inner];
        for o in 0..outer {
            for k in 0..len {
                for i in 0..inner {
                    let v = d[(o * len + k) * inner + i];
                    let slot = &mut out[o * inner + i];
                    if v > *slot {
                        *slot = v;
                    }
                }
            }
        }
        let mut kept = shape;
        kept[axis] = 1;
        Ok(Tensor::raw(out, kept))
    }

    /// `log(softmax(x))` along `axis`.
    pub fn log_softmax(&self, axis: usize) -> Result<Tensor> {
        let m = self.max_axis_detached(axis)?;
        let shifted = self.sub(&m)?;
        let lse = shifted.exp().sum_axis(axis, true)?.ln();
        shifted.sub(&lse)
    }

    // ---- shape manipulation ----------------------------------------------

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if shape.iter().product::<usize>() != self.numel() {
            return shape_err(format!("cannot reshape {:?} to {shape:?}", self.shape()));
        }
        let orig = self.shape().to_vec();
        Ok(Tensor::from_op("reshape", self.to_vec(), shape.to_vec(), &[self], move |g| {
            Ok(vec![Some(g.reshape(&orig)?)])
        }))
    }

    /// Broadcasts to a larger shape (numpy rules).
    pub fn expand(&self, shape: &[usize]) -> Result<Tensor> {
        if self.shape() == shape {
            return Ok(self.clone());
        }
        let target = broadcast_shape(self.shape(), shape)?;
        if target != shape {
            return shape_err(format!("cannot expand {:?} to {shape:?}", self.shape()));
        }
        let src = broadcast_strides(self.shape(), shape);
        let d = self.data();
        let mut out = vec![0.0; shape.iter().product()];
        for_each_offset(shape, &[&src], |flat, o| out[flat] = d[o[0]]);
        drop(d);
        let orig = self.shape().to_vec();
        Ok(Tensor::from_op("expand", out, shape.to_vec(), &[self], move |g| {
            Ok(vec![Some(g.sum_to(&orig)?)])
        }))
    }

    /// Sums broadcast axes away so the result has `shape`; adjoint of `expand`.
    pub fn sum_to(&self, shape: &[usize]) -> Result<Tensor> {
        if self.shape() == shape {
            return Ok(self.clone());
        }
        if broadcast_shape(shape, self.shape())? != self.shape() {
            return shape_err(format!("cannot sum {:?} down to {shape:?}", self.shape()));
        }
        let dst = broadcast_strides(shape, self.shape());
        let d = self.data();
        let mut out = vec![0.0; shape.iter().product()];
        for_each_offset(self.shape(), &[&dst], |flat, o| out[o[0]] += d[flat]);
        drop(d);
        let full = self.shape().to_vec();
        Ok(Tensor::from_op("sum_to", out, shape.to_vec(), &[self], move |g| {
            Ok(vec![Some(g.expand(&full)?)])
        }))
    }

    /// Transpose of a 2-D tensor.
    pub fn t(&self) -> Result<Tensor> {
        let &[r, c] = self.shape() else {
            return shape_err(format!("transpose needs 2-D, got {:?}", self.shape()));
        };
        let d = self.data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = d[i * c + j];
            }
        }
        drop(d);
        Ok(Tensor::from_op("t", out, vec![c, r], &[self], |g| Ok(vec![Some(g.t()?)])))
    }

    /// `[m,k] x [k,n] -> [m,n]`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (&[m, k], &[k2, n]) = (self.shape(), other.shape()) else {
            return shape_err(format!("matmul needs 2-D operands, got {:?} and {:?}", self.shape(), other.shape()));
        };
        if k != k2 {
            return shape_err(format!("matmul inner dims differ: {:?} x {:?}", self.shape(), other.shape()));
        }
        let mut out = vec![0.0; m * n];
        super::conv::gemm(m, k, n, &self.data(), false, &other.data(), false, &mut out, 0.0);
        let (a, b) = (self.clone(), other.clone());
        Ok(Tensor::from_op("matmul", out, vec![m, n], &[self, other], move |g| {
            let ga = if a.requires_grad() { Some(g.matmul(&b.t()?)?) } else { None };
            let gb = if b.requires_grad() { Some(a.t()?.matmul(g)?) } else { None };
            Ok(vec![ga, gb])
        }))
    }

    /// Slice `[start, start+len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() || start + len > shape[axis] {
            return shape_err(format!("narrow({axis}, {start}, {len}) out of range for {shape:?}"));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let full = shape[axis];
        let d = self.data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * full + start) * inner;
            out.extend_from_slice(&d[base..base + len * inner]);
        }
        drop(d);
        let mut out_shape = shape;
        out_shape[axis] = len;
        Ok(Tensor::from_op("narrow", out, out_shape, &[self], move |g| {
            Ok(vec![Some(g.pad_axis(axis, start, full)?)])
        }))
    }

    /// Embeds `self` at offset `start` of a zero tensor whose `axis` has length
    /// `full`; adjoint of `narrow`.
    pub fn pad_axis(&self, axis: usize, start: usize, full: usize) -> Result<Tensor> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() || start + shape[axis] > full {
            return shape_err(format!("pad_axis({axis}, {start}, {full}) invalid for {shape:?}"));
        }
        let len = shape[axis];
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let d = self.data();
        let mut out = vec![0.0; outer * full * inner];
        for o in 0..outer {
            let dst = (o * full + start) * inner;
            out[dst..dst + len * inner].copy_from_slice(&d[o * len * inner..(o + 1) * len * inner]);
        }
        drop(d);
        let mut out_shape = shape;
        out_shape[axis] = full;
        Ok(Tensor::from_op("pad_axis", out, out_shape, &[self], move |g| {
            Ok(vec![Some(g.narrow(axis, start, len)?)])
        }))
    }

    /// Concatenates along `axis`; all other dims must agree.
    pub fn cat(parts: &[Tensor], axis: usize) -> Result<Tensor> {
        let first = parts.first().ok_or_else(|| Error::Shape("cat of zero tensors".into()))?;
        let mut shape = first.shape().to_vec();
        if axis >= shape.len() {
            return shape_err(format!("cat axis {axis} out of range for {shape:?}"));
        }
        let mut total = 0;
        for p in parts {
            let s = p.shape();
            if s.len() != shape.len() || (0..s.len()).any(|i| i != axis && s[i] != shape[i]) {
                return shape_err(format!("cat shape mismatch: {:?} vs {:?}", s, first.shape()));
            }
            total += s[axis];
        }
        shape[axis] = total;
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(shape.iter().product());
        let datas: Vec<_> = parts.iter().map(|p| p.data()).collect();
        for o in 0..outer {
            for (p, d) in parts.iter().zip(&datas) {
                let chunk = p.shape()[axis] * inner;
                out.extend_from_slice(&d[o * chunk..(o + 1) * chunk]);
            }
        }
        drop(datas);
        let lens: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
        let refs: Vec<&Tensor> = parts.iter().collect();
        Ok(Tensor::from_op("cat", out, shape, &refs, move |g| {
            let mut start = 0;
            let mut grads = Vec::with_capacity(lens.len());
            for &len in &lens {
                grads.push(Some(g.narrow(axis, start, len)?));
                start += len;
            }
            Ok(grads)
        }))
    }

    // ---- resampling -------------------------------------------------------

    /// Repeats each pixel of an `[N,C,H,W]` tensor into a 2x2 block.
    pub fn nearest_up2(&self) -> Result<Tensor> {
        let &[n, c, h, w] = self.shape() else {
            return shape_err(format!("nearest_up2 needs [N,C,H,W], got {:?}", self.shape()));
        };
        let d = self.data();
        let (h2, w2) = (2 * h, 2 * w);
        let mut out = vec![0.0; n * c * h2 * w2];
        for p in 0..n * c {
            let src = &d[p * h * w..(p + 1) * h * w];
            let dst = &mut out[p * h2 * w2..(p + 1) * h2 * w2];
            for y in 0..h2 {
                for x in 0..w2 {
                    dst[y * w2 + x] = src[(y / 2) * w + x / 2];
                }
            }
        }
        drop(d);
        Ok(Tensor::from_op("nearest_up2", out, vec![n, c, h2, w2], &[self], |g| {
            Ok(vec![Some(g.avg_down2()?.mul_scalar(4.0))])
        }))
    }

    /// Averages each 2x2 block of an `[N,C,H,W]` tensor; H and W must be even.
    pub fn avg_down2(&self) -> Result<Tensor> {
        let &[n, c, h, w] = self.shape() else {
            return shape_err(format!("avg_down2 needs [N,C,H,W], got {:?}", self.shape()));
        };
        if h % 2 != 0 || w % 2 != 0 {
            return shape_err(format!("avg_down2 needs even spatial dims, got {h}x{w}"));
        }
        let d = self.data();
        let (h2, w2) = (h / 2, w / 2);
        let mut out = vec![0.0; n * c * h2 * w2];
        for p in 0..n * c {
            let src = &d[p * h * w..(p + 1) * h * w];
            let dst = &mut out[p * h2 * w2..(p + 1) * h2 * w2];
            for y in 0..h2 {
                for x in 0..w2 {
                    let a = src[2 * y * w + 2 * x] + src[2 * y * w + 2 * x + 1];
                    let b = src[(2 * y + 1) * w + 2 * x] + src[(2 * y + 1) * w + 2 * x + 1];
                    dst[y * w2 + x] = 0.25 * (a + b);
                }
            }
        }
        drop(d);
        Ok(Tensor::from_op("avg_down2", out, vec![n, c, h2, w2], &[self], |g| {
            Ok(vec![Some(g.nearest_up2()?.mul_scalar(0.25))])
        }))
    }

    /// Mean over spatial dims: `[N,C,H,W] -> [N,C]`.
    pub fn global_avg_pool(&self) -> Result<Tensor> {
        let &[n, c, h, w] = self.shape() else {
            return shape_err(format!("global_avg_pool needs [N,C,H,W], got {:?}", self.shape()));
        };
        self.reshape(&[n, c, h * w])?.mean_axis(2, false)
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

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Stability term added to the variance before the square root.
pub const INSTANCE_STD_EPS: f64 = 1e-6;

/// Per-sample, per-channel spatial mean and standard deviation of an
/// `[N,C,H,W]` tensor, both returned as `[N,C,1,1]` so they broadcast back.
/// Population variance, with the epsilon inside the square root.
pub(crate) fn instance_stats_keepdim(x: &Tensor) -> Result<(Tensor, Tensor)> {
    instance_stats_keepdim_eps(x, INSTANCE_STD_EPS)
}

pub(crate) fn instance_stats_keepdim_eps(x: &Tensor, eps: f64) -> Result<(Tensor, Tensor)> {
    let &[n, c, h, w] = x.shape() else {
        return shape_err(format!("instance statistics need [N,C,H,W], got {:?}", x.shape()));
    };
    if h * w == 0 {
        return shape_err("instance statistics need at least one spatial position");
    }
    let flat = x.reshape(&[n, c, h * w])?;
    let mean = flat.mean_axis(2, true)?;
    let var = flat.sub(&mean)?.square().mean_axis(2, true)?;
    let std = var.add_scalar(eps).sqrt();
    Ok((mean.reshape(&[n, c, 1, 1])?, std.reshape(&[n, c, 1, 1])?))
}

/// Per-sample, per-channel statistics as `[N,C]` tensors.
pub fn instance_stats(x: &Tensor) -> Result<(Tensor, Tensor)> {
    let (m, s) = instance_stats_keepdim(x)?;
    let (n, c) = (x.shape()[0], x.shape()[1]);
    Ok((m.reshape(&[n, c])?, s.reshape(&[n, c])?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(data: &[f64], shape: &[usize]) -> Tensor {
        Tensor::new(data.to_vec(), shape).unwrap()
    }

    #[test]
    fn broadcast_add_and_sum_to() {
        let a = t(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]);
        let b = t(&[10.0, 20.0, 30.0], &[3]);
        let c = a.add(&b).unwrap();
        assert_eq!(c.to_vec(), vec![11.0, 22.0, 33.0, 14.0, 25.0, 36.0]);
        assert_eq!(c.sum_to(&[3]).unwrap().to_vec(), vec![25.0, 47.0, 69.0]);
        assert_eq!(c.sum_to(&[2, 1]).unwrap().to_vec(), vec![66.0, 75.0]);
        assert!(a.add(&t(&[1.0, 2.0], &[2])).is_err());
    }

    #[test]
    fn narrow_cat_round_trip() {
        let a = t(&(0..12).map(f64::from).collect::<Vec<_>>(), &[2, 3, 2]);
        let parts = [a.narrow(1, 0, 1).unwrap(), a.narrow(1, 1, 2).unwrap()];
        assert_eq!(Tensor::cat(&parts, 1).unwrap().to_vec(), a.to_vec());
    }

    #[test]
    fn resample_examples() {
        let x = t(&[1.0, 2.0, 3.0, 4.0], &[1, 1, 2, 2]);
        assert_eq!(x.avg_down2().unwrap().to_vec(), vec![2.5]);
        let five = t(&[5.0], &[1, 1, 1, 1]);
        assert_eq!(five.nearest_up2().unwrap().to_vec(), vec![5.0; 4]);
        assert_eq!(x.nearest_up2().unwrap().avg_down2().unwrap().to_vec(), x.to_vec());
        assert!(t(&[1.0; 3], &[1, 1, 1, 3]).avg_down2().is_err());
    }

    #[test]
    fn leaky_relu_examples() {
        let x = t(&[-1.0, 2.0, 0.0], &[3]);
        assert_eq!(x.leaky_relu(0.2).to_vec(), vec![-0.2, 2.0, 0.0]);
        assert_eq!(x.leaky_relu(1.0).to_vec(), x.to_vec());
    }

    #[test]
    fn instance_stats_examples() {
        let (m, s) = instance_stats(&t(&[1.0, 2.0, 3.0, 4.0], &[1, 1, 2, 2])).unwrap();
        assert!((m.item() - 2.5).abs() < 1e-15);
        assert!((s.item() - (1.25f64 + 1e-6).sqrt()).abs() < 1e-15);
        assert!((s.item() - 1.118034).abs() < 1e-6);

        let (m, s) = instance_stats(&Tensor::full(&[1, 1, 3, 3], 7.0)).unwrap();
        assert!((m.item() - 7.0).abs() < 1e-12);
        assert!((s.item() - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn log_softmax_normalizes() {
        let x = t(&[1.0, 2.0, 3.0, -5.0, 0.0, 5.0], &[2, 3]);
        let p = x.log_softmax(1).unwrap().exp().sum_axis(1, false).unwrap();
        for v in p.to_vec() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
    }
}
