//! 2-D cross-correlation via im2col + GEMM.
//!
//! Three bilinear kernels close under differentiation: the forward
//! correlation, its input adjoint (transposed correlation) and its weight
//! adjoint. Each one's derivatives are expressed through the other two, so
//! convolutions support arbitrary-order gradients.

use super::Tensor;
use crate::error::{shape_err, Result};

/// `C = A·B + beta·C` for row-major operands, optionally transposed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    beta: f64,
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserted lengths cover every strided access, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Output length of one spatial axis, or `None` if it would not be positive.
pub fn conv_output_size(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    if stride == 0 || input + 2 * padding < kernel {
        return None;
    }
    Some((input + 2 * padding - kernel) / stride + 1)
}

#[derive(Clone, Copy, Debug)]
struct Geom {
    n: usize,
    ci: usize,
    h: usize,
    w: usize,
    co: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl Geom {
    fn k(&self) -> usize {
        self.ci * self.kh * self.kw
    }
    fn p(&self) -> usize {
        self.ho * self.wo
    }
    fn trivial_cols(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }
    fn input_shape(&self) -> Vec<usize> {
        vec![self.n, self.ci, self.h, self.w]
    }
    fn weight_shape(&self) -> Vec<usize> {
        vec![self.co, self.ci, self.kh, self.kw]
    }
    fn output_shape(&self) -> Vec<usize> {
        vec![self.n, self.co, self.ho, self.wo]
    }

    fn im2col(&self, x: &[f64], cols: &mut [f64]) {
        let (h, w, ho, wo) = (self.h as isize, self.w as isize, self.ho, self.wo);
        let mut row = 0;
        for c in 0..self.ci {
            let plane = &x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let dst = &mut cols[row * ho * wo..(row + 1) * ho * wo];
                    for oy in 0..ho {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        let line = &mut dst[oy * wo..(oy + 1) * wo];
                        if iy < 0 || iy >= h {
                            line.fill(0.0);
                            continue;
                        }
                        let src = &plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for (ox, v) in line.iter_mut().enumerate() {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            *v = if ix < 0 || ix >= w { 0.0 } else { src[ix as usize] };
                        }
                    }
                    row += 1;
                }
            }
        }
    }

    fn col2im(&self, cols: &[f64], x: &mut [f64]) {
        let (h, w, ho, wo) = (self.h as isize, self.w as isize, self.ho, self.wo);
        let mut row = 0;
        for c in 0..self.ci {
            let plane = &mut x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let src = &cols[row * ho * wo..(row + 1) * ho * wo];
                    for oy in 0..ho {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= h {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for ox in 0..wo {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix >= 0 && ix < w {
                                dst[ix as usize] += src[oy * wo + ox];
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

fn forward_kernel(g: &Geom, x: &[f64], wt: &[f64]) -> Vec<f64> {
    let (k, p) = (g.k(), g.p());
    let in_len = g.ci * g.h * g.w;
    let mut out = vec![0.0; g.n * g.co * p];
    let mut cols = if g.trivial_cols() { Vec::new() } else { vec![0.0; k * p] };
    for s in 0..g.n {
        let xs = &x[s * in_len..(s + 1) * in_len];
        let b: &[f64] = if g.trivial_cols() {
            xs
        } else {
            g.im2col(xs, &mut cols);
            &cols
        };
        gemm(g.co, k, p, wt, false, b, false, &mut out[s * g.co * p..(s + 1) * g.co * p], 0.0);
    }
    out
}

fn input_grad_kernel(g: &Geom, gy: &[f64], wt: &[f64]) -> Vec<f64> {
    let (k, p) = (g.k(), g.p());
    let in_len = g.ci * g.h * g.w;
    let mut gx = vec![0.0; g.n * in_len];
    let mut cols = vec![0.0; k * p];
    for s in 0..g.n {
        let gys = &gy[s * g.co * p..(s + 1) * g.co * p];
        let dst = &mut gx[s * in_len..(s + 1) * in_len];
        if g.trivial_cols() {
            gemm(k, g.co, p, wt, true, gys, false, dst, 0.0);
        } else {
            gemm(k, g.co, p, wt, true, gys, false, &mut cols, 0.0);
            g.col2im(&cols, dst);
        }
    }
    gx
}

fn weight_grad_kernel(g: &Geom, x: &[f64], gy: &[f64]) -> Vec<f64> {
    let (k, p) = (g.k(), g.p());
    let in_len = g.ci * g.h * g.w;
    let mut gw = vec![0.0; g.co * k];
    let mut cols = if g.trivial_cols() { Vec::new() } else { vec![0.0; k * p] };
    for s in 0..g.n {
        let xs = &x[s * in_len..(s + 1) * in_len];
        let b: &[f64] = if g.trivial_cols() {
            xs
        } else {
            g.im2col(xs, &mut cols);
            &cols
        };
        let gys = &gy[s * g.co * p..(s + 1) * g.co * p];
        gemm(g.co, p, k, gys, false, b, true, &mut gw, 1.0);
    }
    gw
}

fn correlate(x: &Tensor, w: &Tensor, g: Geom) -> Tensor {
    let out = forward_kernel(&g, &x.data(), &w.data());
    let (xc, wc) = (x.clone(), w.clone());
    Tensor::from_op("conv2d", out, g.output_shape(), &[x, w], move |gy| {
        let gx = if xc.requires_grad() { Some(correlate_input_adjoint(gy, &wc, g)) } else { None };
        let gw = if wc.requires_grad() { Some(correlate_weight_adjoint(&xc, gy, g)) } else { None };
        Ok(vec![gx, gw])
    })
}

fn correlate_input_adjoint(gy: &Tensor, w: &Tensor, g: Geom) -> Tensor {
    let out = input_grad_kernel(&g, &gy.data(), &w.data());
    let (gyc, wc) = (gy.clone(), w.clone());
    Tensor::from_op("conv2d_input_adjoint", out, g.input_shape(), &[gy, w], move |u| {
        let d_gy = if gyc.requires_grad() { Some(correlate(u, &wc, g)) } else { None };
        let d_w = if wc.requires_grad() { Some(correlate_weight_adjoint(u, &gyc, g)) } else { None };
        Ok(vec![d_gy, d_w])
    })
}

fn correlate_weight_adjoint(x: &Tensor, gy: &Tensor, g: Geom) -> Tensor {
    let out = weight_grad_kernel(&g, &x.data(), &gy.data());
    let (xc, gyc) = (x.clone(), gy.clone());
    Tensor::from_op("conv2d_weight_adjoint", out, g.weight_shape(), &[x, gy], move |u| {
        let d_x = if xc.requires_grad() { Some(correlate_input_adjoint(&gyc, u, g)) } else { None };
        let d_gy = if gyc.requires_grad() { Some(correlate(&xc, u, g)) } else { None };
        Ok(vec![d_x, d_gy])
    })
}

impl Tensor {
    /// Cross-correlation of `[N,Cin,H,W]` input with `[Cout,Cin,kh,kw]`
    /// weights, plus an optional `[Cout]` bias.
    pub fn conv2d(&self, weight: &Tensor, bias: Option<&Tensor>, stride: usize, padding: usize) -> Result<Tensor> {
        let &[n, ci, h, w] = self.shape() else {
            return shape_err(format!("conv2d input must be [N,C,H,W], got {:?}", self.shape()));
        };
        let &[co, wci, kh, kw] = weight.shape() else {
            return shape_err(format!("conv2d weight must be [Cout,Cin,kh,kw], got {:?}", weight.shape()));
        };
        if ci != wci {
            return shape_err(format!("conv2d input has {ci} channels but weight expects {wci}"));
        }
        let (Some(ho), Some(wo)) = (
            conv_output_size(h, kh, stride, padding),
            conv_output_size(w, kw, stride, padding),
        ) else {
            return shape_err(format!(
                "conv2d output would be empty: input {h}x{w}, kernel {kh}x{kw}, stride {stride}, padding {padding}"
            ));
        };
        let geom = Geom { n, ci, h, w, co, kh, kw, stride, pad: padding, ho, wo };
        let y = correlate(self, weight, geom);
        match bias {
            None => Ok(y),
            Some(b) => {
                if b.shape() != [co] {
                    return shape_err(format!("conv2d bias must be [{co}], got {:?}", b.shape()));
                }
                y.add(&b.reshape(&[1, co, 1, 1])?)
            }
        }
    }
}
