//! Small numeric helpers shared by the information functionals.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Compensated sum of a slice.
pub fn sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<CompensatedSum>().value()
}

/// `-p log2 p` with the `0 log 0 = 0` guard.
#[inline]
pub fn neg_plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// `w * x` where a zero weight annihilates an infinite `x`.
#[inline]
pub fn weighted(w: f64, x: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * x
    }
}

/// Shannon entropy in bits of an (unnormalized is fine, but callers pass
/// normalized) probability vector.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().map(|&v| neg_plogp(v)).collect::<CompensatedSum>().value()
}

/// Binary entropy function in bits.
pub fn binary_entropy(p: f64) -> f64 {
    neg_plogp(p) + neg_plogp(1.0 - p)
}

/// Normalizes base-2 log weights into a probability vector in place.
/// Returns `false` (and writes the uniform vector) when every weight is `-inf`.
pub fn normalize_log2(logs: &mut [f64]) -> bool {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        let u = 1.0 / logs.len() as f64;
        logs.iter_mut().for_each(|v| *v = u);
        return false;
    }
    let mut total = CompensatedSum::new();
    for v in logs.iter_mut() {
        *v = (*v - max).exp2();
        total.add(*v);
    }
    let total = total.value();
    logs.iter_mut().for_each(|v| *v /= total);
    true
}

/// `base^digits` as u128, saturating.
pub fn checked_pow(base: usize, digits: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..digits {
        acc = acc.saturating_mul(base as u128);
    }
    acc
}
