//! Forward and backward passes of g1, g2, h and the discriminator.
//!
//! Image tensors are NHWC inside the network; dataset rows (channel-major)
//! are converted once by [`input_rows`].

use super::adain::FeatureMap;
use super::params::{block, Arch, Grads, ModelBundle};
use super::tensor::{gemm, sigmoid, softmax_rows, ConvGeom};
use crate::datagen::{Dataset, Mode};
use crate::error::{Error, Result};

/// Gathers dataset rows as network inputs (`f64`, NHWC for images).
/// Pixels are shifted by −0.5 so inputs are centered.
pub fn input_rows(ds: &Dataset, rows: &[usize]) -> Vec<f64> {
    let (c, plane) = (ds.c, ds.h * ds.w);
    let mut out = Vec::with_capacity(rows.len() * ds.row_len());
    for &r in rows {
        let src = ds.row(r);
        match ds.mode {
            Mode::Image => {
                for p in 0..plane {
                    for ch in 0..c {
                        out.push(src[ch * plane + p] as f64 - PIXEL_CENTER);
                    }
                }
            }
            Mode::Vector => out.extend(src.iter().map(|&v| v as f64)),
        }
    }
    out
}

const PIXEL_CENTER: f64 = 0.5;

/// `y = x·Wᵀ + b` for `x` (batch×inp) and `W` (out×inp).
pub(crate) fn dense_forward(w: &[f64], b: &[f64], x: &[f64], batch: usize, inp: usize, out: usize) -> Vec<f64> {
    let mut y = Vec::with_capacity(batch * out);
    for _ in 0..batch {
        y.extend_from_slice(b);
    }
    gemm(batch, inp, out, 1.0, x, false, w, true, 1.0, &mut y);
    y
}

/// Accumulates weight and bias gradients; returns `dx` when requested.
#[allow(clippy::too_many_arguments)]
pub(crate) fn dense_backward(
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    batch: usize,
    inp: usize,
    out: usize,
    gw: &mut [f64],
    gb: &mut [f64],
    want_dx: bool,
) -> Option<Vec<f64>> {
    gemm(out, batch, inp, 1.0, dy, true, x, false, 1.0, gw);
    for row in dy.chunks_exact(out) {
        for (g, d) in gb.iter_mut().zip(row) {
            *g += d;
        }
    }
    want_dx.then(|| {
        let mut dx = vec![0.0; batch * inp];
        gemm(batch, out, inp, 1.0, dy, false, w, false, 0.0, &mut dx);
        dx
    })
}

fn relu_in_place(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

fn relu_mask(pre: &[f64], grad: &mut [f64]) {
    for (g, p) in grad.iter_mut().zip(pre) {
        if *p <= 0.0 {
            *g = 0.0;
        }
    }
}

fn conv1_geom(arch: &Arch) -> ConvGeom {
    ConvGeom {
        in_h: arch.in_h,
        in_w: arch.in_w,
        in_c: arch.in_c,
        kernel: 3,
        stride: 2,
        pad: 1,
    }
}

fn conv2_geom(arch: &Arch) -> ConvGeom {
    let (h, w) = arch.low_hw();
    ConvGeom {
        in_h: h,
        in_w: w,
        in_c: arch.low_width,
        kernel: 3,
        stride: 2,
        pad: 1,
    }
}

/// Saved activations of g1.
#[derive(Debug, Clone)]
pub struct StageCache {
    batch: usize,
    /// Layer input, unfolded into patches for convolutions.
    input: Vec<f64>,
    pre: Vec<f64>,
}

/// Rows and width of g1's (possibly unfolded) input.
fn g1_shape(a: &Arch, batch: usize) -> (usize, usize) {
    match a.mode {
        Mode::Image => {
            let g = conv1_geom(a);
            (batch * g.out_h() * g.out_w(), g.patch_len())
        }
        Mode::Vector => (batch, a.in_w),
    }
}

/// Shallow extractor g1. Output rows are position-major low-level maps.
pub fn g1_forward(m: &ModelBundle, x: &[f64], batch: usize) -> (Vec<f64>, StageCache) {
    let a = &m.arch;
    let input = match a.mode {
        Mode::Image => conv1_geom(a).im2col(x, batch),
        Mode::Vector => x.to_vec(),
    };
    let (rows, inp) = g1_shape(a, batch);
    let pre = dense_forward(
        m.block(block::G1_W),
        m.block(block::G1_B),
        &input,
        rows,
        inp,
        a.low_width,
    );
    let mut out = pre.clone();
    relu_in_place(&mut out);
    (out, StageCache { batch, input, pre })
}

pub fn g1_backward(m: &ModelBundle, cache: &StageCache, dout: &[f64], grads: &mut Grads) {
    let a = &m.arch;
    let mut dpre = dout.to_vec();
    relu_mask(&cache.pre, &mut dpre);
    let (rows, inp) = g1_shape(a, cache.batch);
    let (gw, gb) = grads_pair(grads, block::G1_W, block::G1_B);
    dense_backward(
        m.block(block::G1_W),
        &cache.input,
        &dpre,
        rows,
        inp,
        a.low_width,
        gw,
        gb,
        false,
    );
}

/// Saved activations of g2's two layers.
#[derive(Debug, Clone)]
pub struct DeepCache {
    batch: usize,
    input: Vec<f64>,
    pre_mid: Vec<f64>,
    mid: Vec<f64>,
    pre_out: Vec<f64>,
}

/// Rows and width of g2's first layer input.
fn g2_shape(a: &Arch, batch: usize) -> (usize, usize) {
    match a.mode {
        Mode::Image => {
            let g = conv2_geom(a);
            (batch * g.out_h() * g.out_w(), g.patch_len())
        }
        Mode::Vector => (batch, a.low_width),
    }
}

/// Deep extractor g2: low-level maps to `feature_dim` features.
pub fn g2_forward(m: &ModelBundle, zlow: &[f64], batch: usize) -> (Vec<f64>, DeepCache) {
    let a = &m.arch;
    let input = match a.mode {
        Mode::Image => conv2_geom(a).im2col(zlow, batch),
        Mode::Vector => zlow.to_vec(),
    };
    let (rows, inp) = g2_shape(a, batch);
    let pre_mid = dense_forward(
        m.block(block::G2A_W),
        m.block(block::G2A_B),
        &input,
        rows,
        inp,
        a.mid_width,
    );
    let mut mid = pre_mid.clone();
    relu_in_place(&mut mid);
    // NHWC rows flatten to one vector per sample.
    let pre_out = dense_forward(
        m.block(block::G2B_W),
        m.block(block::G2B_B),
        &mid,
        batch,
        a.mid_len(),
        a.feature_dim,
    );
    let mut z = pre_out.clone();
    relu_in_place(&mut z);
    (
        z,
        DeepCache {
            batch,
            input,
            pre_mid,
            mid,
            pre_out,
        },
    )
}

/// Accumulates g2 gradients and returns the gradient w.r.t. its input.
pub fn g2_backward(m: &ModelBundle, cache: &DeepCache, dz: &[f64], grads: &mut Grads) -> Vec<f64> {
    let a = &m.arch;
    let batch = cache.batch;
    let mut dpre_out = dz.to_vec();
    relu_mask(&cache.pre_out, &mut dpre_out);
    let (gw, gb) = grads_pair(grads, block::G2B_W, block::G2B_B);
    let mut dmid = dense_backward(
        m.block(block::G2B_W),
        &cache.mid,
        &dpre_out,
        batch,
        a.mid_len(),
        a.feature_dim,
        gw,
        gb,
        true,
    )
    .unwrap();
    relu_mask(&cache.pre_mid, &mut dmid);
    let (rows, inp) = g2_shape(a, batch);
    let (gw, gb) = grads_pair(grads, block::G2A_W, block::G2A_B);
    let dinput = dense_backward(
        m.block(block::G2A_W),
        &cache.input,
        &dmid,
        rows,
        inp,
        a.mid_width,
        gw,
        gb,
        true,
    )
    .unwrap();
    match a.mode {
        Mode::Image => conv2_geom(a).col2im(&dinput, batch),
        Mode::Vector => dinput,
    }
}

pub fn classifier_forward(m: &ModelBundle, z: &[f64], batch: usize) -> Vec<f64> {
    let a = &m.arch;
    dense_forward(
        m.block(block::H_W),
        m.block(block::H_B),
        z,
        batch,
        a.feature_dim,
        a.classes,
    )
}

pub fn classifier_backward(m: &ModelBundle, z: &[f64], dlogits: &[f64], batch: usize, grads: &mut Grads) -> Vec<f64> {
    let a = &m.arch;
    let (gw, gb) = grads_pair(grads, block::H_W, block::H_B);
    dense_backward(
        m.block(block::H_W),
        z,
        dlogits,
        batch,
        a.feature_dim,
        a.classes,
        gw,
        gb,
        true,
    )
    .unwrap()
}

#[derive(Debug, Clone)]
pub struct DiscCache {
    batch: usize,
    input: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
}

/// Discriminator logits (before the per-class sigmoid).
pub fn disc_forward(m: &ModelBundle, z: &[f64], batch: usize) -> (Vec<f64>, DiscCache) {
    let a = &m.arch;
    let hidden_pre = dense_forward(
        m.block(block::D1_W),
        m.block(block::D1_B),
        z,
        batch,
        a.feature_dim,
        a.disc_hidden,
    );
    let mut hidden = hidden_pre.clone();
    relu_in_place(&mut hidden);
    let logits = dense_forward(
        m.block(block::D2_W),
        m.block(block::D2_B),
        &hidden,
        batch,
        a.disc_hidden,
        a.disc_outputs,
    );
    (
        logits,
        DiscCache {
            batch,
            input: z.to_vec(),
            hidden_pre,
            hidden,
        },
    )
}

pub fn disc_backward(m: &ModelBundle, cache: &DiscCache, dlogits: &[f64], grads: &mut Grads) -> Vec<f64> {
    let a = &m.arch;
    let (gw, gb) = grads_pair(grads, block::D2_W, block::D2_B);
    let mut dhidden = dense_backward(
        m.block(block::D2_W),
        &cache.hidden,
        dlogits,
        cache.batch,
        a.disc_hidden,
        a.disc_outputs,
        gw,
        gb,
        true,
    )
    .unwrap();
    relu_mask(&cache.hidden_pre, &mut dhidden);
    let (gw, gb) = grads_pair(grads, block::D1_W, block::D1_B);
    dense_backward(
        m.block(block::D1_W),
        &cache.input,
        &dhidden,
        cache.batch,
        a.feature_dim,
        a.disc_hidden,
        gw,
        gb,
        true,
    )
    .unwrap()
}

fn grads_pair(grads: &mut Grads, w: usize, b: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert_eq!(b, w + 1);
    let (lo, hi) = grads.blocks.split_at_mut(b);
    (&mut lo[w], &mut hi[0])
}

/// Outputs of a full forward pass over a batch.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub z_low: Vec<FeatureMap>,
    /// `batch × feature_dim`
    pub z: Vec<f64>,
    /// `batch × k`
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

fn check_input(arch: &Arch, x: &[f64], batch: usize) -> Result<()> {
    if batch == 0 || x.len() != batch * arch.input_len() {
        return Err(Error::Shape(format!(
            "{} input values for {batch} samples of width {}",
            x.len(),
            arch.input_len()
        )));
    }
    Ok(())
}

/// z_low = g1(x), z = g2(z_low), probs = softmax(h(z)).
pub fn forward(m: &ModelBundle, x: &[f64], batch: usize) -> Result<ForwardOutput> {
    let a = &m.arch;
    check_input(a, x, batch)?;
    let (zlow, _) = g1_forward(m, x, batch);
    let (z, _) = g2_forward(m, &zlow, batch);
    let logits = classifier_forward(m, &z, batch);
    let probs = softmax_rows(&logits, a.classes);
    let (channels, positions) = a.low_layout();
    let (height, width) = match a.mode {
        Mode::Image => a.low_hw(),
        Mode::Vector => (1, a.low_width),
    };
    let z_low = zlow
        .chunks_exact(channels * positions)
        .map(|row| {
            let values = (0..channels)
                .flat_map(|c| (0..positions).map(move |p| row[p * channels + c]))
                .collect();
            FeatureMap {
                channels,
                height,
                width,
                values,
            }
        })
        .collect();
    Ok(ForwardOutput {
        z_low,
        z,
        logits,
        probs,
    })
}

/// Features z = g(x) and class probabilities, evaluated in chunks.
pub fn features_and_probs(m: &ModelBundle, x: &[f64], batch: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let a = &m.arch;
    check_input(a, x, batch)?;
    const CHUNK: usize = 256;
    let mut z_all = Vec::with_capacity(batch * a.feature_dim);
    let mut p_all = Vec::with_capacity(batch * a.classes);
    let width = a.input_len();
    for chunk in x.chunks(CHUNK * width) {
        let n = chunk.len() / width;
        let (zlow, _) = g1_forward(m, chunk, n);
        let (z, _) = g2_forward(m, &zlow, n);
        let logits = classifier_forward(m, &z, n);
        p_all.extend(softmax_rows(&logits, a.classes));
        z_all.extend(z);
    }
    Ok((z_all, p_all))
}

/// Per-output sigmoid of the discriminator applied to features `z`.
pub fn discriminator_forward(m: &ModelBundle, z: &[f64]) -> Result<Vec<f64>> {
    let f = m.arch.feature_dim;
    if z.is_empty() || !z.len().is_multiple_of(f) {
        return Err(Error::Shape(format!("{} feature values, width {f}", z.len())));
    }
    let (logits, _) = disc_forward(m, z, z.len() / f);
    Ok(logits.into_iter().map(sigmoid).collect())
}
