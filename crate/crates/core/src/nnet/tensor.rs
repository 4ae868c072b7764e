//! Dense kernels over row-major `f64` slices.

/// `c = alpha · a · b + beta · c` for row-major `a` (m×k) and `c` (m×n).
/// `b` is (k×n); pass `b_transposed = true` to read a stored (n×k) matrix
/// as its transpose without copying.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_transposed: bool,
    b: &[f64],
    b_transposed: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_transposed { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_transposed { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the strides above address exactly the m×k, k×n and m×n
    // elements checked by the length assertions.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
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

/// Geometry of a square-kernel 2-D convolution on NHWC tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn patch_len(&self) -> usize {
        self.kernel * self.kernel * self.in_c
    }

    pub fn in_len(&self) -> usize {
        self.in_h * self.in_w * self.in_c
    }

    /// Unfolds `batch` NHWC inputs into rows of `(ky, kx, c)` patches, one
    /// row per output position.
    pub fn im2col(&self, input: &[f64], batch: usize) -> Vec<f64> {
        let (oh, ow, plen) = (self.out_h(), self.out_w(), self.patch_len());
        let mut cols = vec![0.0; batch * oh * ow * plen];
        for b in 0..batch {
            let img = &input[b * self.in_len()..(b + 1) * self.in_len()];
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = ((b * oh + oy) * ow + ox) * plen;
                    for ky in 0..self.kernel {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.in_h as isize {
                            continue;
                        }
                        for kx in 0..self.kernel {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix < 0 || ix >= self.in_w as isize {
                                continue;
                            }
                            let src = (iy as usize * self.in_w + ix as usize) * self.in_c;
                            let dst = row + (ky * self.kernel + kx) * self.in_c;
                            cols[dst..dst + self.in_c].copy_from_slice(&img[src..src + self.in_c]);
                        }
                    }
                }
            }
        }
        cols
    }

    /// Adjoint of [`ConvGeom::im2col`]: scatters patch gradients back.
    pub fn col2im(&self, cols: &[f64], batch: usize) -> Vec<f64> {
        let (oh, ow, plen) = (self.out_h(), self.out_w(), self.patch_len());
        let mut out = vec![0.0; batch * self.in_len()];
        for b in 0..batch {
            let img = &mut out[b * self.in_len()..(b + 1) * self.in_len()];
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = ((b * oh + oy) * ow + ox) * plen;
                    for ky in 0..self.kernel {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.in_h as isize {
                            continue;
                        }
                        for kx in 0..self.kernel {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix < 0 || ix >= self.in_w as isize {
                                continue;
                            }
                            let dst = (iy as usize * self.in_w + ix as usize) * self.in_c;
                            let src = row + (ky * self.kernel + kx) * self.in_c;
                            for (o, g) in img[dst..dst + self.in_c].iter_mut().zip(&cols[src..src + self.in_c]) {
                                *o += g;
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

pub fn softmax_rows(logits: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    for (src, dst) in logits.chunks_exact(cols).zip(out.chunks_exact_mut(cols)) {
        let max = src.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = (s - max).exp();
            sum += *d;
        }
        for d in dst.iter_mut() {
            *d /= sum;
        }
    }
    out
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn argmax(v: &[f64]) -> usize {
    // First maximal index wins ties.
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
