use super::Tensor;
use crate::error::{Error, Result};

/// `C = alpha * A * B + beta * C` for row/column-strided operands.
///
/// Shapes are `A: m x k`, `B: k x n`, `C: m x n`; strides are in elements.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs;
    if k > 0 {
        assert!(last(m, k, rsa, csa) < a.len(), "gemm: A out of bounds");
        assert!(last(k, n, rsb, csb) < b.len(), "gemm: B out of bounds");
    }
    assert!(last(m, n, rsc, csc) < c.len(), "gemm: C out of bounds");
    // SAFETY: every index touched by dgemm is bounded by the asserts above,
    // and `c` is uniquely borrowed.
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
            rsc as isize,
            csc as isize,
        );
    }
}

/// Output length of a 1-D convolution: `floor((t + 2*pad - k) / stride) + 1`.
pub fn conv1d_output_len(t: usize, k: usize, stride: usize, padding: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::Shape("conv1d stride must be >= 1".into()));
    }
    if k == 0 || k > t + 2 * padding {
        return Err(Error::Shape(format!(
            "conv1d kernel {k} does not fit input length {t} with padding {padding}"
        )));
    }
    Ok((t + 2 * padding - k) / stride + 1)
}

pub(crate) struct ConvGeometry {
    pub c_in: usize,
    pub c_out: usize,
    pub t_in: usize,
    pub k: usize,
    pub t_out: usize,
    pub stride: usize,
    pub padding: usize,
}

pub(crate) fn conv_geometry(
    input: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<ConvGeometry> {
    let (c_in, t_in) = input.dims2()?;
    let (c_out, kc_in, k) = match kernels.shape() {
        &[a, b, c] => (a, b, c),
        other => {
            return Err(Error::Shape(format!(
                "conv1d kernels must be rank 3, got {other:?}"
            )))
        }
    };
    if kc_in != c_in {
        return Err(Error::Shape(format!(
            "conv1d input has {c_in} channels, kernels expect {kc_in}"
        )));
    }
    if bias.shape() != [c_out] {
        return Err(Error::Shape(format!(
            "conv1d bias shape {:?}, expected [{c_out}]",
            bias.shape()
        )));
    }
    let t_out = conv1d_output_len(t_in, k, stride, padding)?;
    Ok(ConvGeometry {
        c_in,
        c_out,
        t_in,
        k,
        t_out,
        stride,
        padding,
    })
}

/// Unfolds the zero-padded input into a `(c_in*k) x t_out` column matrix.
fn im2col(input: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let mut cols = vec![0.0; g.c_in * g.k * g.t_out];
    for ci in 0..g.c_in {
        let row_in = &input[ci * g.t_in..(ci + 1) * g.t_in];
        for kk in 0..g.k {
            let dst = &mut cols[(ci * g.k + kk) * g.t_out..(ci * g.k + kk + 1) * g.t_out];
            for (t, d) in dst.iter_mut().enumerate() {
                let pos = t * g.stride + kk;
                if pos >= g.padding && pos - g.padding < g.t_in {
                    *d = row_in[pos - g.padding];
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], g: &ConvGeometry, out: &mut [f64]) {
    for ci in 0..g.c_in {
        let row_out = &mut out[ci * g.t_in..(ci + 1) * g.t_in];
        for kk in 0..g.k {
            let src = &cols[(ci * g.k + kk) * g.t_out..(ci * g.k + kk + 1) * g.t_out];
            for (t, s) in src.iter().enumerate() {
                let pos = t * g.stride + kk;
                if pos >= g.padding && pos - g.padding < g.t_in {
                    row_out[pos - g.padding] += s;
                }
            }
        }
    }
}

pub(crate) fn conv1d_forward_raw(
    input: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    g: &ConvGeometry,
) -> Tensor {
    let cols = im2col(input.data(), g);
    let mut out = vec![0.0; g.c_out * g.t_out];
    for (c, row) in out.chunks_mut(g.t_out).enumerate() {
        row.fill(bias.data()[c]);
    }
    let ck = g.c_in * g.k;
    gemm(
        g.c_out,
        ck,
        g.t_out,
        kernels.data(),
        (ck, 1),
        &cols,
        (g.t_out, 1),
        1.0,
        &mut out,
        (g.t_out, 1),
    );
    Tensor {
        shape: vec![g.c_out, g.t_out],
        data: out,
    }
}

/// Gradients of a convolution with respect to (input, kernels, bias).
///
/// Entries are only computed for the operands flagged in `want`.
pub(crate) fn conv1d_backward_raw(
    input: &Tensor,
    kernels: &Tensor,
    grad_out: &[f64],
    g: &ConvGeometry,
    want: [bool; 3],
) -> [Option<Tensor>; 3] {
    let ck = g.c_in * g.k;
    let mut result: [Option<Tensor>; 3] = [None, None, None];
    if want[1] {
        let cols = im2col(input.data(), g);
        let mut dw = vec![0.0; g.c_out * ck];
        // dW = dOut * cols^T
        gemm(
            g.c_out,
            g.t_out,
            ck,
            grad_out,
            (g.t_out, 1),
            &cols,
            (1, g.t_out),
            0.0,
            &mut dw,
            (ck, 1),
        );
        result[1] = Some(Tensor {
            shape: vec![g.c_out, g.c_in, g.k],
            data: dw,
        });
    }
    if want[2] {
        let db = grad_out.chunks(g.t_out).map(|r| r.iter().sum()).collect();
        result[2] = Some(Tensor {
            shape: vec![g.c_out],
            data: db,
        });
    }
    if want[0] {
        let mut dcols = vec![0.0; ck * g.t_out];
        // dcols = W^T * dOut
        gemm(
            ck,
            g.c_out,
            g.t_out,
            kernels.data(),
            (1, ck),
            grad_out,
            (g.t_out, 1),
            0.0,
            &mut dcols,
            (g.t_out, 1),
        );
        let mut dx = vec![0.0; g.c_in * g.t_in];
        col2im(&dcols, g, &mut dx);
        result[0] = Some(Tensor {
            shape: vec![g.c_in, g.t_in],
            data: dx,
        });
    }
    result
}

/// 1-D convolution over the time axis with zero padding.
///
/// `input` is `C_in x T`, `kernels` is `C_out x C_in x K`, `bias` is `C_out`.
pub fn conv1d(
    input: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let g = conv_geometry(input, kernels, bias, stride, padding)?;
    let out = conv1d_forward_raw(input, kernels, bias, &g);
    out.ensure_finite("conv1d")?;
    Ok(out)
}
