//! 1-D strided convolution and its transpose, lowered to GEMM via im2col.
//!
//! Strided weights are `[C_out, C_in, K]`; fractional-strided weights are
//! `[C_in, C_out, K]`, i.e. the same array a strided layer mapping
//! `C_out -> C_in` would hold, so that the fractional layer is its exact adjoint.

use super::{SeganError, Tensor};

/// Row-major `c = a·b + beta·c`, with `a` (m×k) and `b` (k×n) optionally
/// stored transposed.
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_transposed: bool,
    b: &[f64],
    b_transposed: bool,
    c: &mut [f64],
    beta: f64,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_transposed { (1, m) } else { (k, 1) };
    let (rsb, csb) = if b_transposed { (1, k) } else { (n, 1) };
    // SAFETY: the asserts above bound every index matrixmultiply touches for the
    // given dimensions and strides, and `c` does not alias `a` or `b`.
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

#[derive(Debug, Clone, Copy)]
struct Geometry {
    channels: usize,
    /// length of the wide (un-decimated) side
    wide: usize,
    /// length of the decimated side
    narrow: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
}

impl Geometry {
    /// Range of `t` for which `t*stride + k - pad` falls inside `[0, wide)`.
    fn valid_range(&self, k: usize) -> (usize, usize) {
        let s = self.stride;
        let lo = self.pad.saturating_sub(k).div_ceil(s);
        let hi_excl = if self.wide + self.pad <= k {
            0
        } else {
            (self.wide + self.pad - k - 1) / s + 1
        };
        (lo, hi_excl.min(self.narrow).max(lo.min(self.narrow)))
    }
}

fn im2col(x: &[f64], g: Geometry) -> Vec<f64> {
    let mut cols = vec![0.0; g.channels * g.kernel * g.narrow];
    for c in 0..g.channels {
        let src = &x[c * g.wide..(c + 1) * g.wide];
        for k in 0..g.kernel {
            let row = &mut cols[(c * g.kernel + k) * g.narrow..(c * g.kernel + k + 1) * g.narrow];
            let (lo, hi) = g.valid_range(k);
            for t in lo..hi {
                row[t] = src[t * g.stride + k - g.pad];
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], g: Geometry) -> Vec<f64> {
    let mut x = vec![0.0; g.channels * g.wide];
    for c in 0..g.channels {
        let dst = &mut x[c * g.wide..(c + 1) * g.wide];
        for k in 0..g.kernel {
            let row = &cols[(c * g.kernel + k) * g.narrow..(c * g.kernel + k + 1) * g.narrow];
            let (lo, hi) = g.valid_range(k);
            for t in lo..hi {
                dst[t * g.stride + k - g.pad] += row[t];
            }
        }
    }
    x
}

fn weight_dims(w: &Tensor) -> Result<(usize, usize, usize), SeganError> {
    match w.shape()[..] {
        [a, b, k] if k % 2 == 1 => Ok((a, b, k)),
        _ => Err(SeganError::ShapeMismatch(format!(
            "kernel must be [_, _, odd width], got {:?}",
            w.shape()
        ))),
    }
}

fn check_bias(b: &Tensor, channels: usize) -> Result<(), SeganError> {
    if b.shape() != [channels] {
        return Err(SeganError::ShapeMismatch(format!(
            "bias shape {:?}, expected [{channels}]",
            b.shape()
        )));
    }
    Ok(())
}

fn check_stride(stride: usize) -> Result<(), SeganError> {
    if stride == 0 {
        return Err(SeganError::ShapeMismatch("stride must be >= 1".into()));
    }
    Ok(())
}

fn add_bias(out: &mut [f64], bias: &[f64], len: usize) {
    for (row, b) in out.chunks_exact_mut(len).zip(bias) {
        row.iter_mut().for_each(|v| *v += b);
    }
}

fn row_sums(x: &[f64], len: usize) -> Vec<f64> {
    x.chunks_exact(len).map(|r| r.iter().sum()).collect()
}

fn strided_geometry(x: &Tensor, w: &Tensor, stride: usize) -> Result<(Geometry, usize), SeganError> {
    check_stride(stride)?;
    let (c_in, l) = x.dims2()?;
    let (c_out, w_in, k) = weight_dims(w)?;
    if w_in != c_in {
        return Err(SeganError::ShapeMismatch(format!(
            "input has {c_in} channels, kernel expects {w_in}"
        )));
    }
    let g = Geometry {
        channels: c_in,
        wide: l,
        narrow: l.div_ceil(stride),
        kernel: k,
        stride,
        pad: (k - 1) / 2,
    };
    Ok((g, c_out))
}

/// Cross-correlation with symmetric zero padding `(K-1)/2`, decimated by
/// `stride`. Output `[C_out, ceil(L/stride)]`.
pub fn conv1d_strided(
    x: &Tensor,
    w: &Tensor,
    b: &Tensor,
    stride: usize,
) -> Result<Tensor, SeganError> {
    let (g, c_out) = strided_geometry(x, w, stride)?;
    check_bias(b, c_out)?;
    let cols = im2col(x.data(), g);
    let mut out = vec![0.0; c_out * g.narrow];
    gemm(c_out, g.channels * g.kernel, g.narrow, w.data(), false, &cols, false, &mut out, 0.0);
    add_bias(&mut out, b.data(), g.narrow);
    Ok(Tensor::from_parts(vec![c_out, g.narrow], out))
}

pub(crate) struct ConvGrads {
    pub dx: Option<Tensor>,
    pub dw: Option<Tensor>,
    pub db: Option<Tensor>,
}

pub(crate) fn conv1d_strided_backward(
    x: &Tensor,
    w: &Tensor,
    dy: &Tensor,
    stride: usize,
    need_dx: bool,
    need_params: bool,
) -> Result<ConvGrads, SeganError> {
    let (g, c_out) = strided_geometry(x, w, stride)?;
    let ck = g.channels * g.kernel;
    let mut grads = ConvGrads {
        dx: None,
        dw: None,
        db: None,
    };
    if need_params {
        let cols = im2col(x.data(), g);
        let mut dw = vec![0.0; c_out * ck];
        gemm(c_out, g.narrow, ck, dy.data(), false, &cols, true, &mut dw, 0.0);
        grads.dw = Some(Tensor::from_parts(w.shape().to_vec(), dw));
        grads.db = Some(Tensor::from_parts(vec![c_out], row_sums(dy.data(), g.narrow)));
    }
    if need_dx {
        let mut dcols = vec![0.0; ck * g.narrow];
        gemm(ck, c_out, g.narrow, w.data(), true, dy.data(), false, &mut dcols, 0.0);
        grads.dx = Some(Tensor::from_parts(vec![g.channels, g.wide], col2im(&dcols, g)));
    }
    Ok(grads)
}

fn fractional_geometry(
    x: &Tensor,
    w: &Tensor,
    stride: usize,
) -> Result<(Geometry, usize), SeganError> {
    check_stride(stride)?;
    let (c_in, l) = x.dims2()?;
    let (w_in, c_out, k) = weight_dims(w)?;
    if w_in != c_in {
        return Err(SeganError::ShapeMismatch(format!(
            "input has {c_in} channels, kernel expects {w_in}"
        )));
    }
    let g = Geometry {
        channels: c_out,
        wide: l * stride,
        narrow: l,
        kernel: k,
        stride,
        pad: (k - 1) / 2,
    };
    Ok((g, c_in))
}

/// Transpose of [`conv1d_strided`]: output `[C_out, L*stride]`.
pub fn conv1d_fractional(
    x: &Tensor,
    w: &Tensor,
    b: &Tensor,
    stride: usize,
) -> Result<Tensor, SeganError> {
    let (g, c_in) = fractional_geometry(x, w, stride)?;
    check_bias(b, g.channels)?;
    let ck = g.channels * g.kernel;
    let mut cols = vec![0.0; ck * g.narrow];
    gemm(ck, c_in, g.narrow, w.data(), true, x.data(), false, &mut cols, 0.0);
    let mut out = col2im(&cols, g);
    add_bias(&mut out, b.data(), g.wide);
    Ok(Tensor::from_parts(vec![g.channels, g.wide], out))
}

pub(crate) fn conv1d_fractional_backward(
    x: &Tensor,
    w: &Tensor,
    dy: &Tensor,
    stride: usize,
    need_dx: bool,
    need_params: bool,
) -> Result<ConvGrads, SeganError> {
    let (g, c_in) = fractional_geometry(x, w, stride)?;
    let ck = g.channels * g.kernel;
    let dcols = im2col(dy.data(), g);
    let mut grads = ConvGrads {
        dx: None,
        dw: None,
        db: None,
    };
    if need_params {
        let mut dw = vec![0.0; c_in * ck];
        gemm(c_in, g.narrow, ck, x.data(), false, &dcols, true, &mut dw, 0.0);
        grads.dw = Some(Tensor::from_parts(w.shape().to_vec(), dw));
        grads.db = Some(Tensor::from_parts(vec![g.channels], row_sums(dy.data(), g.wide)));
    }
    if need_dx {
        let mut dx = vec![0.0; c_in * g.narrow];
        gemm(c_in, ck, g.narrow, w.data(), false, &dcols, false, &mut dx, 0.0);
        grads.dx = Some(Tensor::from_parts(vec![c_in, g.narrow], dx));
    }
    Ok(grads)
}
