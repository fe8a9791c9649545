use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    fraction: f64,
    seed: u64,
}

impl SplitSpec {
    pub fn new(fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::invalid(format!(
                "validation fraction must lie in (0, 1), got {fraction}"
            )));
        }
        Ok(SplitSpec { fraction, seed })
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            fraction: 0.1,
            seed: 0,
        }
    }
}

/// Shuffled `(train, validation)` index sets, each in ascending order. The
/// validation size is `round(fraction * n)` kept within `1..n`.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::invalid(format!("cannot split {n} records")));
    }
    let val = ((spec.fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut v = order[..val].to_vec();
    let mut t = order[val..].to_vec();
    v.sort_unstable();
    t.sort_unstable();
    Ok((t, v))
}

pub fn split_train_val<T: Clone>(records: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>)> {
    let (t, v) = split_indices(records.len(), spec)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect();
    Ok((pick(&t), pick(&v)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_records_split_nine_one() {
        let recs: Vec<u32> = (0..10).collect();
        let spec = SplitSpec::new(0.1, 4).unwrap();
        let (t, v) = split_train_val(&recs, &spec).unwrap();
        assert_eq!((t.len(), v.len()), (9, 1));
        assert_eq!(split_train_val(&recs, &spec).unwrap(), (t.clone(), v.clone()));
        let mut all = [t, v].concat();
        all.sort();
        assert_eq!(all, recs);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(SplitSpec::new(0.0, 1).is_err());
        assert!(SplitSpec::new(1.0, 1).is_err());
        assert!(split_indices(1, &SplitSpec::default()).is_err());
    }
}
