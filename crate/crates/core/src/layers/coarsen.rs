use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::contour::Contour;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarsenMode {
    /// Pools over the cosets `q + <m>`; stride 1, dilation `m = n / p`.
    Coset,
    /// Pools consecutive windows; stride `p`, dilation 1.
    Strided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Mean,
    /// The element of largest modulus (not its modulus); ties go to the
    /// lowest window index.
    MagnitudeArgmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoarsenSpec {
    pub factor: usize,
    pub mode: CoarsenMode,
    pub aggregator: Aggregator,
}

impl CoarsenSpec {
    pub fn new(factor: usize, mode: CoarsenMode, aggregator: Aggregator) -> Result<Self> {
        if factor < 2 {
            return Err(Error::invalid(format!(
                "coarsening factor must be at least 2, got {factor}"
            )));
        }
        Ok(CoarsenSpec {
            factor,
            mode,
            aggregator,
        })
    }

    /// `(stride, dilation)` for an input of length `n`.
    pub fn stride_dilation(&self, n: usize) -> (usize, usize) {
        match self.mode {
            CoarsenMode::Coset => (1, n / self.factor),
            CoarsenMode::Strided => (self.factor, 1),
        }
    }

    pub fn output_len(&self, n: usize) -> Result<usize> {
        if self.factor < 2 || !n.is_multiple_of(self.factor) {
            return Err(Error::NotDivisible {
                n,
                factor: self.factor,
            });
        }
        Ok(n / self.factor)
    }

    /// Input index read by output `q`, window slot `j`.
    pub(crate) fn source(&self, n: usize, q: usize, j: usize) -> usize {
        let (ns, nd) = self.stride_dilation(n);
        (q * ns + nd * j) % n
    }
}

/// `P(x)(q) = (+)_{j<p} x(q n_s + n_d j mod n)` channel-wise.
pub fn coarsen_forward(spec: &CoarsenSpec, x: &Contour) -> Result<Contour> {
    spec.output_len(x.n())?;
    Ok(coarsen_apply(spec, x).0)
}

/// Forward pass that also returns, for argmax pooling, the source index
/// picked for every output sample (`[channel][q]`).
pub(crate) fn coarsen_apply(spec: &CoarsenSpec, x: &Contour) -> (Contour, Vec<Vec<usize>>) {
    let n = x.n();
    let m = n / spec.factor;
    let p = spec.factor;
    let mut picks = Vec::new();
    let out = x
        .channels()
        .iter()
        .map(|ch| match spec.aggregator {
            Aggregator::Mean => (0..m)
                .map(|q| {
                    (0..p).map(|j| ch[spec.source(n, q, j)]).sum::<Complex64>() / p as f64
                })
                .collect(),
            Aggregator::MagnitudeArgmax => {
                let chosen: Vec<usize> = (0..m)
                    .map(|q| {
                        let mut best = spec.source(n, q, 0);
                        let mut best_r = ch[best].norm();
                        for j in 1..p {
                            let i = spec.source(n, q, j);
                            let r = ch[i].norm();
                            if r > best_r {
                                best = i;
                                best_r = r;
                            }
                        }
                        best
                    })
                    .collect();
                let vals = chosen.iter().map(|&i| ch[i]).collect();
                picks.push(chosen);
                vals
            }
        })
        .collect();
    (Contour::from_raw(out), picks)
}

/// Zero-insertion upsampling: `out(q p) = x(q)`, zero elsewhere.
pub fn upsample_forward(x: &Contour, factor: usize) -> Result<Contour> {
    if factor < 2 {
        return Err(Error::invalid(format!(
            "upsampling factor must be at least 2, got {factor}"
        )));
    }
    Ok(upsample_apply(x, factor))
}

pub(crate) fn upsample_apply(x: &Contour, factor: usize) -> Contour {
    let zero = Complex64::new(0.0, 0.0);
    Contour::from_raw(
        x.channels()
            .iter()
            .map(|ch| {
                let mut out = vec![zero; ch.len() * factor];
                for (q, &z) in ch.iter().enumerate() {
                    out[q * factor] = z;
                }
                out
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|&r| Complex64::new(r, 0.0)).collect()
    }

    fn spec(mode: CoarsenMode, aggregator: Aggregator) -> CoarsenSpec {
        CoarsenSpec::new(2, mode, aggregator).unwrap()
    }

    #[test]
    fn strided_mean_pools_windows() {
        let x = Contour::from_samples(re(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        let y = coarsen_forward(&spec(CoarsenMode::Strided, Aggregator::Mean), &x).unwrap();
        assert_eq!(y.channel(0), re(&[1.5, 3.5]).as_slice());
    }

    #[test]
    fn coset_mean_pools_cosets() {
        let x = Contour::from_samples(re(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        let y = coarsen_forward(&spec(CoarsenMode::Coset, Aggregator::Mean), &x).unwrap();
        assert_eq!(y.channel(0), re(&[2.0, 3.0]).as_slice());
    }

    #[test]
    fn argmax_returns_the_element() {
        let x = Contour::from_samples(re(&[1.0, -2.0])).unwrap();
        let y = coarsen_forward(&spec(CoarsenMode::Strided, Aggregator::MagnitudeArgmax), &x)
            .unwrap();
        assert_eq!(y.channel(0), re(&[-2.0]).as_slice());
    }

    #[test]
    fn argmax_ties_take_lowest_index() {
        let x = Contour::from_samples(vec![
            Complex64::new(0.0, 1.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ])
        .unwrap();
        let y = coarsen_forward(&spec(CoarsenMode::Strided, Aggregator::MagnitudeArgmax), &x)
            .unwrap();
        assert_eq!(y.get(0, 0), Complex64::new(0.0, 1.0));
    }

    #[test]
    fn constant_stays_constant() {
        let x = Contour::from_samples(vec![Complex64::new(0.5, -2.0); 12]).unwrap();
        for mode in [CoarsenMode::Coset, CoarsenMode::Strided] {
            let s = CoarsenSpec::new(3, mode, Aggregator::Mean).unwrap();
            let y = coarsen_forward(&s, &x).unwrap();
            assert_eq!(y.n(), 4);
            assert!(y.channel(0).iter().all(|&z| (z - x.get(0, 0)).norm() < 1e-15));
        }
    }

    #[test]
    fn rejects_indivisible_lengths() {
        let x = Contour::from_samples(re(&[1.0, 2.0, 3.0])).unwrap();
        assert!(matches!(
            coarsen_forward(&spec(CoarsenMode::Strided, Aggregator::Mean), &x),
            Err(Error::NotDivisible { n: 3, factor: 2 })
        ));
        assert!(CoarsenSpec::new(1, CoarsenMode::Coset, Aggregator::Mean).is_err());
    }

    #[test]
    fn upsample_inserts_zeros() {
        let a = Complex64::new(1.0, 2.0);
        let b = Complex64::new(-0.5, 0.0);
        let x = Contour::from_samples(vec![a, b]).unwrap();
        let y = upsample_forward(&x, 2).unwrap();
        let z = Complex64::new(0.0, 0.0);
        assert_eq!(y.channel(0), &[a, z, b, z]);
        assert!(upsample_forward(&x, 1).is_err());
    }

    #[test]
    fn upsample_then_strided_mean_scales_by_inverse_factor() {
        let x = Contour::from_samples(vec![
            Complex64::new(1.0, 2.0),
            Complex64::new(-0.5, 0.0),
            Complex64::new(3.0, -1.0),
        ])
        .unwrap();
        for p in 2..5 {
            let up = upsample_forward(&x, p).unwrap();
            let s = CoarsenSpec::new(p, CoarsenMode::Strided, Aggregator::Mean).unwrap();
            let down = coarsen_forward(&s, &up).unwrap();
            assert!(down.max_abs_diff(&x.scale(Complex64::new(1.0 / p as f64, 0.0))) < 1e-15);
        }
    }
}
