use num_complex::Complex64;

use crate::contour::Contour;
use crate::error::{Error, Result};

/// `k'` filters of `k` channels by `m` taps each.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    in_channels: usize,
    out_channels: usize,
    kernel_size: usize,
    // [out][in][tap]
    taps: Vec<Complex64>,
}

impl FilterBank {
    /// `filters[j][c]` is the tap sequence of filter `j` on input channel `c`.
    pub fn new(filters: Vec<Vec<Vec<Complex64>>>) -> Result<Self> {
        let out_channels = filters.len();
        if out_channels == 0 {
            return Err(Error::shape("filter bank needs at least one filter"));
        }
        let in_channels = filters[0].len();
        if in_channels == 0 {
            return Err(Error::shape("filters need at least one channel"));
        }
        let kernel_size = filters[0][0].len();
        if kernel_size == 0 {
            return Err(Error::shape("kernel size must be at least 1"));
        }
        let mut taps = Vec::with_capacity(out_channels * in_channels * kernel_size);
        for (j, f) in filters.into_iter().enumerate() {
            if f.len() != in_channels {
                return Err(Error::shape(format!(
                    "filter {j} has {} channels, expected {in_channels}",
                    f.len()
                )));
            }
            for ch in f {
                if ch.len() != kernel_size {
                    return Err(Error::shape(format!(
                        "filter {j} has a channel with {} taps, expected {kernel_size}",
                        ch.len()
                    )));
                }
                taps.extend(ch);
            }
        }
        Ok(FilterBank {
            in_channels,
            out_channels,
            kernel_size,
            taps,
        })
    }

    /// Single filter on a single channel.
    pub fn single(taps: Vec<Complex64>) -> Result<Self> {
        Self::new(vec![vec![taps]])
    }

    pub fn from_flat(
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        taps: Vec<Complex64>,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || kernel_size == 0 {
            return Err(Error::shape("filter bank dimensions must be positive"));
        }
        if taps.len() != in_channels * out_channels * kernel_size {
            return Err(Error::shape(format!(
                "expected {} taps, got {}",
                in_channels * out_channels * kernel_size,
                taps.len()
            )));
        }
        Ok(FilterBank {
            in_channels,
            out_channels,
            kernel_size,
            taps,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn tap(&self, out: usize, input: usize, t: usize) -> Complex64 {
        self.taps[(out * self.in_channels + input) * self.kernel_size + t]
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }
}

/// `Conv_Phi(x)_j(q) = sum_c sum_t phi^j_c(t) x_c(q - t mod n)`. No bias.
pub fn conv_forward(bank: &FilterBank, x: &Contour) -> Result<Contour> {
    if bank.in_channels != x.k() {
        return Err(Error::shape(format!(
            "filter bank expects {} channels, contour has {}",
            bank.in_channels,
            x.k()
        )));
    }
    if bank.kernel_size > x.n() {
        return Err(Error::KernelTooLarge {
            kernel: bank.kernel_size,
            n: x.n(),
        });
    }
    Ok(conv_apply(
        &bank.taps,
        bank.in_channels,
        bank.out_channels,
        bank.kernel_size,
        x,
    ))
}

/// `(y * x)(q) = sum_j y(j) x(q - j)` for two signals of equal length.
pub fn circular_convolution(y: &[Complex64], x: &[Complex64]) -> Result<Vec<Complex64>> {
    if y.len() != x.len() || x.is_empty() {
        return Err(Error::shape(format!(
            "circular convolution needs equal nonempty lengths, got {} and {}",
            y.len(),
            x.len()
        )));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
    accumulate_lagged(&mut out, x, y);
    Ok(out)
}

// out(q) += sum_t w(t) x(q - t mod n)
fn accumulate_lagged(out: &mut [Complex64], x: &[Complex64], w: &[Complex64]) {
    let n = x.len();
    for (t, &wt) in w.iter().enumerate() {
        if wt.re == 0.0 && wt.im == 0.0 {
            continue;
        }
        let (head, tail) = out.split_at_mut(t);
        for (o, &xv) in tail.iter_mut().zip(&x[..n - t]) {
            *o += wt * xv;
        }
        for (o, &xv) in head.iter_mut().zip(&x[n - t..]) {
            *o += wt * xv;
        }
    }
}

/// Direct O(n m k k') evaluation on a flat `[out][in][tap]` layout.
pub(crate) fn conv_apply(
    taps: &[Complex64],
    in_channels: usize,
    out_channels: usize,
    kernel_size: usize,
    x: &Contour,
) -> Contour {
    let n = x.n();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); n]; out_channels];
    for (j, y) in out.iter_mut().enumerate() {
        for c in 0..in_channels {
            let base = (j * in_channels + c) * kernel_size;
            accumulate_lagged(y, x.channel(c), &taps[base..base + kernel_size]);
        }
    }
    Contour::from_raw(out)
}

/// Given the loss gradient `grad_out` (as `dL/dRe + i dL/dIm`) of a
/// convolution output, returns the gradient with respect to the input and
/// accumulates the tap gradients into `grad_taps`.
pub(crate) fn conv_backward(
    taps: &[Complex64],
    in_channels: usize,
    out_channels: usize,
    kernel_size: usize,
    x: &Contour,
    grad_out: &Contour,
    grad_taps: &mut [Complex64],
) -> Contour {
    let n = x.n();
    let mut grad_in = vec![vec![Complex64::new(0.0, 0.0); n]; in_channels];
    for j in 0..out_channels {
        let g = grad_out.channel(j);
        for c in 0..in_channels {
            let xc = x.channel(c);
            let base = (j * in_channels + c) * kernel_size;
            let gi = &mut grad_in[c];
            for t in 0..kernel_size {
                let w = taps[base + t].conj();
                // y(q) depends on x(q - t): grad_x(p) += conj(w) g(p + t)
                let mut acc = Complex64::new(0.0, 0.0);
                for p in 0..n - t {
                    gi[p] += w * g[p + t];
                    acc += g[p + t] * xc[p].conj();
                }
                for p in n - t..n {
                    gi[p] += w * g[p + t - n];
                    acc += g[p + t - n] * xc[p].conj();
                }
                grad_taps[base + t] += acc;
            }
        }
    }
    Contour::from_raw(grad_in)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|&r| Complex64::new(r, 0.0)).collect()
    }

    #[test]
    fn delta_kernel_is_identity() {
        let x = Contour::from_samples(vec![
            Complex64::new(1.0, -1.0),
            Complex64::new(0.5, 2.0),
            Complex64::new(-3.0, 0.0),
        ])
        .unwrap();
        let bank = FilterBank::single(re(&[1.0])).unwrap();
        assert_eq!(conv_forward(&bank, &x).unwrap(), x);
    }

    #[test]
    fn lag_one_kernel_shifts() {
        let x = Contour::from_samples(re(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        let bank = FilterBank::single(re(&[0.0, 1.0])).unwrap();
        let y = conv_forward(&bank, &x).unwrap();
        assert_eq!(y.channel(0), re(&[4.0, 1.0, 2.0, 3.0]).as_slice());
    }

    #[test]
    fn hand_example() {
        // (x(q) + x(q-1)) on (1, 2, 3) -> (1+3, 2+1, 3+2)
        let x = Contour::from_samples(re(&[1.0, 2.0, 3.0])).unwrap();
        let bank = FilterBank::single(re(&[1.0, 1.0])).unwrap();
        let y = conv_forward(&bank, &x).unwrap();
        assert_eq!(y.channel(0), re(&[4.0, 3.0, 5.0]).as_slice());
    }

    #[test]
    fn multi_channel_sums_over_inputs() {
        let x = Contour::new(vec![re(&[1.0, 0.0]), re(&[0.0, 2.0])]).unwrap();
        let bank = FilterBank::new(vec![
            vec![re(&[1.0, 0.0]), re(&[1.0, 0.0])],
            vec![re(&[0.0, 1.0]), re(&[2.0, 0.0])],
        ])
        .unwrap();
        let y = conv_forward(&bank, &x).unwrap();
        assert_eq!(y.channel(0), re(&[1.0, 2.0]).as_slice());
        assert_eq!(y.channel(1), re(&[0.0, 5.0]).as_slice());
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let bank = FilterBank::single(vec![Complex64::new(0.3, -2.0); 3]).unwrap();
        let y = conv_forward(&bank, &Contour::zeros(1, 7)).unwrap();
        assert!(y.channel(0).iter().all(|z| z.re == 0.0 && z.im == 0.0));
    }

    #[test]
    fn errors() {
        let x = Contour::from_samples(re(&[1.0, 2.0])).unwrap();
        let big = FilterBank::single(re(&[1.0, 1.0, 1.0])).unwrap();
        assert!(matches!(conv_forward(&big, &x), Err(Error::KernelTooLarge { .. })));
        let two = FilterBank::new(vec![vec![re(&[1.0]), re(&[1.0])]]).unwrap();
        assert!(matches!(conv_forward(&two, &x), Err(Error::ShapeMismatch(_))));
        assert!(FilterBank::new(vec![vec![re(&[1.0])], vec![re(&[1.0, 2.0])]]).is_err());
    }

    #[test]
    fn backward_matches_adjoint_identity() {
        // <grad_out, conv(x)> = <conv^T(grad_out), x> in the real inner product
        let x = Contour::new(vec![
            vec![Complex64::new(0.3, 1.0), Complex64::new(-1.0, 0.2), Complex64::new(2.0, 0.5)],
            vec![Complex64::new(1.5, -0.4), Complex64::new(0.0, 0.7), Complex64::new(-0.6, -0.1)],
        ])
        .unwrap();
        let taps: Vec<Complex64> = (0..8)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()))
            .collect();
        let g = Contour::new(vec![
            vec![Complex64::new(0.2, 0.1), Complex64::new(-0.4, 1.0), Complex64::new(0.9, 0.0)],
            vec![Complex64::new(0.0, -1.0), Complex64::new(0.5, 0.5), Complex64::new(1.0, -0.3)],
        ])
        .unwrap();
        let y = conv_apply(&taps, 2, 2, 2, &x);
        let mut gt = vec![Complex64::new(0.0, 0.0); taps.len()];
        let gx = conv_backward(&taps, 2, 2, 2, &x, &g, &mut gt);
        let dot = |a: &Contour, b: &Contour| -> f64 {
            a.channels()
                .iter()
                .flatten()
                .zip(b.channels().iter().flatten())
                .map(|(u, v)| u.re * v.re + u.im * v.im)
                .sum()
        };
        assert!((dot(&g, &y) - dot(&gx, &x)).abs() < 1e-12);
        let tap_dot: f64 = gt.iter().zip(&taps).map(|(u, v)| u.re * v.re + u.im * v.im).sum();
        assert!((dot(&g, &y) - tap_dot).abs() < 1e-12);
    }
}
