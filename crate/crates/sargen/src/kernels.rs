//! Raw loops behind the graph ops. Everything here runs sequentially in a
//! fixed order, so results are bit-reproducible.

use crate::scalar::{gemm, Scalar};

/// Geometry of a square-kernel sliding window over one `c x h x w` image,
/// producing an `oh x ow` grid of windows.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Window {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl Window {
    pub fn rows(&self) -> usize {
        self.c * self.k * self.k
    }

    pub fn cols(&self) -> usize {
        self.oh * self.ow
    }

    /// Whether the column matrix is the image itself.
    pub fn is_identity(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }

    /// Valid output range along one axis for kernel offset `kk`.
    fn span(&self, kk: usize, extent: usize, out: usize) -> (usize, usize) {
        let (s, p) = (self.stride as isize, self.pad as isize);
        let off = kk as isize - p;
        // need 0 <= o*s + off < extent
        let lo = if off >= 0 { 0 } else { (-off + s - 1) / s };
        let hi = if (extent as isize) - off <= 0 {
            0
        } else {
            ((extent as isize - off - 1) / s + 1).min(out as isize)
        };
        (lo.max(0) as usize, hi.max(lo.max(0)) as usize)
    }
}

pub(crate) fn out_size(n: usize, k: usize, stride: usize, pad: usize) -> usize {
    (n + 2 * pad).saturating_sub(k) / stride + 1
}

pub(crate) fn im2col<T: Scalar>(img: &[T], g: &Window, col: &mut [T]) {
    debug_assert_eq!(img.len(), g.c * g.h * g.w);
    debug_assert_eq!(col.len(), g.rows() * g.cols());
    let cols = g.cols();
    for ci in 0..g.c {
        let plane = &img[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            let (ylo, yhi) = g.span(ky, g.h, g.oh);
            for kx in 0..g.k {
                let (xlo, xhi) = g.span(kx, g.w, g.ow);
                let row = (ci * g.k + ky) * g.k + kx;
                let dst = &mut col[row * cols..(row + 1) * cols];
                for oy in 0..g.oh {
                    let line = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    if oy < ylo || oy >= yhi || xlo >= xhi {
                        line.fill(T::zero());
                        continue;
                    }
                    let iy = oy * g.stride + ky - g.pad;
                    let src = &plane[iy * g.w..(iy + 1) * g.w];
                    line[..xlo].fill(T::zero());
                    line[xhi..].fill(T::zero());
                    let x0 = xlo * g.stride + kx - g.pad;
                    if g.stride == 1 {
                        line[xlo..xhi].copy_from_slice(&src[x0..x0 + (xhi - xlo)]);
                    } else {
                        for (j, d) in line[xlo..xhi].iter_mut().enumerate() {
                            *d = src[x0 + j * g.stride];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters-adds columns back into the image.
pub(crate) fn col2im<T: Scalar>(col: &[T], g: &Window, img: &mut [T]) {
    debug_assert_eq!(img.len(), g.c * g.h * g.w);
    debug_assert_eq!(col.len(), g.rows() * g.cols());
    let cols = g.cols();
    for ci in 0..g.c {
        let plane = &mut img[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            let (ylo, yhi) = g.span(ky, g.h, g.oh);
            for kx in 0..g.k {
                let (xlo, xhi) = g.span(kx, g.w, g.ow);
                if xlo >= xhi {
                    continue;
                }
                let row = (ci * g.k + ky) * g.k + kx;
                let src = &col[row * cols..(row + 1) * cols];
                for oy in ylo..yhi {
                    let iy = oy * g.stride + ky - g.pad;
                    let line = &src[oy * g.ow..(oy + 1) * g.ow];
                    let dst = &mut plane[iy * g.w..(iy + 1) * g.w];
                    let x0 = xlo * g.stride + kx - g.pad;
                    for (j, &v) in line[xlo..xhi].iter().enumerate() {
                        dst[x0 + j * g.stride] += v;
                    }
                }
            }
        }
    }
}

/// Adds `bias[c]` to every position of channel `c` in a `[C, P]` block.
pub(crate) fn add_bias<T: Scalar>(out: &mut [T], bias: &[T]) {
    let p = out.len() / bias.len();
    for (c, &b) in bias.iter().enumerate() {
        for v in &mut out[c * p..(c + 1) * p] {
            *v += b;
        }
    }
}

/// Accumulates per-channel sums of a `[C, P]` block into `db`.
pub(crate) fn bias_grad<T: Scalar>(g: &[T], db: &mut [T]) {
    let p = g.len() / db.len();
    for (c, d) in db.iter_mut().enumerate() {
        let mut s = T::zero();
        for &v in &g[c * p..(c + 1) * p] {
            s += v;
        }
        *d += s;
    }
}

/// One sample of a convolution: `out[Cout, P] = W[Cout, Cin*k*k] * col`.
pub(crate) fn conv_forward<T: Scalar>(
    x: &[T],
    w: &[T],
    bias: Option<&[T]>,
    g: &Window,
    cout: usize,
    scratch: &mut Vec<T>,
    out: &mut [T],
) {
    let col: &[T] = if g.is_identity() {
        x
    } else {
        scratch.resize(g.rows() * g.cols(), T::zero());
        im2col(x, g, scratch);
        scratch
    };
    gemm(cout, g.cols(), g.rows(), w, false, col, false, out, false);
    if let Some(b) = bias {
        add_bias(out, b);
    }
}

/// Gradients of one convolution sample. `dx` and `dw` are accumulated.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward<T: Scalar>(
    x: &[T],
    w: &[T],
    gout: &[T],
    g: &Window,
    cout: usize,
    dx: Option<&mut [T]>,
    dw: Option<&mut [T]>,
    scratch: &mut Vec<T>,
) {
    if let Some(dw) = dw {
        let col: &[T] = if g.is_identity() {
            x
        } else {
            scratch.resize(g.rows() * g.cols(), T::zero());
            im2col(x, g, scratch);
            scratch
        };
        gemm(cout, g.rows(), g.cols(), gout, false, col, true, dw, true);
    }
    if let Some(dx) = dx {
        if g.is_identity() {
            gemm(g.rows(), g.cols(), cout, w, true, gout, false, dx, true);
        } else {
            scratch.resize(g.rows() * g.cols(), T::zero());
            gemm(g.rows(), g.cols(), cout, w, true, gout, false, scratch, false);
            col2im(scratch, g, dx);
        }
    }
}

/// Nearest-neighbour source index for output position `o` of `n_out`.
#[inline]
pub(crate) fn nearest(o: usize, n_in: usize, n_out: usize) -> usize {
    o * n_in / n_out
}

pub(crate) fn resize_nearest<T: Scalar>(
    src: &[T],
    (h, w): (usize, usize),
    dst: &mut [T],
    (oh, ow): (usize, usize),
) {
    let planes = src.len() / (h * w);
    let xs: Vec<usize> = (0..ow).map(|x| nearest(x, w, ow)).collect();
    for p in 0..planes {
        let s = &src[p * h * w..(p + 1) * h * w];
        let d = &mut dst[p * oh * ow..(p + 1) * oh * ow];
        for y in 0..oh {
            let row = &s[nearest(y, h, oh) * w..][..w];
            for (dv, &sx) in d[y * ow..(y + 1) * ow].iter_mut().zip(&xs) {
                *dv = row[sx];
            }
        }
    }
}

pub(crate) fn resize_nearest_backward<T: Scalar>(
    gout: &[T],
    (oh, ow): (usize, usize),
    gin: &mut [T],
    (h, w): (usize, usize),
) {
    let planes = gin.len() / (h * w);
    let xs: Vec<usize> = (0..ow).map(|x| nearest(x, w, ow)).collect();
    for p in 0..planes {
        let s = &gout[p * oh * ow..(p + 1) * oh * ow];
        let d = &mut gin[p * h * w..(p + 1) * h * w];
        for y in 0..oh {
            let row = &mut d[nearest(y, h, oh) * w..][..w];
            for (&gv, &sx) in s[y * ow..(y + 1) * ow].iter().zip(&xs) {
                row[sx] += gv;
            }
        }
    }
}

/// Non-overlapping `f x f` average pooling; trailing rows/columns that do
/// not fill a window are dropped.
pub(crate) fn avg_pool<T: Scalar>(src: &[T], (h, w): (usize, usize), f: usize, dst: &mut [T]) {
    let (oh, ow) = (h / f, w / f);
    let planes = src.len() / (h * w);
    let inv = T::one() / T::of((f * f) as f64);
    for p in 0..planes {
        let s = &src[p * h * w..(p + 1) * h * w];
        let d = &mut dst[p * oh * ow..(p + 1) * oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = T::zero();
                for dy in 0..f {
                    for dx in 0..f {
                        acc += s[(oy * f + dy) * w + ox * f + dx];
                    }
                }
                d[oy * ow + ox] = acc * inv;
            }
        }
    }
}

pub(crate) fn avg_pool_backward<T: Scalar>(
    gout: &[T],
    gin: &mut [T],
    (h, w): (usize, usize),
    f: usize,
) {
    let (oh, ow) = (h / f, w / f);
    let planes = gin.len() / (h * w);
    let inv = T::one() / T::of((f * f) as f64);
    for p in 0..planes {
        let s = &gout[p * oh * ow..(p + 1) * oh * ow];
        let d = &mut gin[p * h * w..(p + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let v = s[oy * ow + ox] * inv;
                for dy in 0..f {
                    for dx in 0..f {
                        d[(oy * f + dy) * w + ox * f + dx] += v;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_conv(
        x: &[f64],
        w: &[f64],
        g: &Window,
        cout: usize,
    ) -> Vec<f64> {
        let mut out = vec![0.0; cout * g.cols()];
        for co in 0..cout {
            for oy in 0..g.oh {
                for ox in 0..g.ow {
                    let mut acc = 0.0;
                    for ci in 0..g.c {
                        for ky in 0..g.k {
                            for kx in 0..g.k {
                                let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                                let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                                if iy < 0 || ix < 0 || iy >= g.h as isize || ix >= g.w as isize {
                                    continue;
                                }
                                acc += x[(ci * g.h + iy as usize) * g.w + ix as usize]
                                    * w[((co * g.c + ci) * g.k + ky) * g.k + kx];
                            }
                        }
                    }
                    out[(co * g.oh + oy) * g.ow + ox] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn im2col_convolution_matches_direct_loops() {
        for (k, stride, pad, h, w) in [(3, 1, 1, 5, 6), (4, 2, 1, 7, 8), (7, 1, 3, 4, 4), (1, 1, 0, 3, 3), (3, 2, 1, 5, 5)] {
            let (c, cout) = (2, 3);
            let g = Window {
                c,
                h,
                w,
                k,
                stride,
                pad,
                oh: out_size(h, k, stride, pad),
                ow: out_size(w, k, stride, pad),
            };
            let x: Vec<f64> = (0..c * h * w).map(|i| (i as f64 * 0.7).sin()).collect();
            let wt: Vec<f64> = (0..cout * g.rows()).map(|i| (i as f64 * 1.3).cos()).collect();
            let mut out = vec![0.0; cout * g.cols()];
            conv_forward(&x, &wt, None, &g, cout, &mut Vec::new(), &mut out);
            let want = direct_conv(&x, &wt, &g, cout);
            for (a, b) in out.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12, "k={k} s={stride} p={pad}");
            }
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let g = Window { c: 2, h: 6, w: 5, k: 3, stride: 2, pad: 1, oh: 3, ow: 3 };
        let x: Vec<f64> = (0..60).map(|i| (i as f64 * 0.3).sin()).collect();
        let y: Vec<f64> = (0..g.rows() * g.cols()).map(|i| (i as f64 * 0.11).cos()).collect();
        let mut cx = vec![0.0; y.len()];
        im2col(&x, &g, &mut cx);
        let mut ty = vec![0.0; x.len()];
        col2im(&y, &g, &mut ty);
        let lhs: f64 = cx.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&ty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn nearest_resize_picks_floor_positions() {
        let src: Vec<f64> = (0..16).map(f64::from).collect();
        let mut dst = vec![0.0; 4];
        resize_nearest(&src, (4, 4), &mut dst, (2, 2));
        assert_eq!(dst, vec![0.0, 2.0, 8.0, 10.0]);
        let mut up = vec![0.0; 16];
        resize_nearest(&dst, (2, 2), &mut up, (4, 4));
        assert_eq!(&up[..4], &[0.0, 0.0, 2.0, 2.0]);
    }
}
