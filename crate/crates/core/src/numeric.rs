//! Floating-point helpers shared by the float-side identities.

/// Neumaier compensated sum. Order-fixed: callers feed terms in a
/// deterministic order, so results do not depend on thread count.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
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

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Rounds to 12 significant digits and renders the shortest decimal that
/// reads back to the rounded value.
pub fn fmt_sig12(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    format!("{rounded}")
}

pub fn round_sig12(v: f64) -> f64 {
    if !v.is_finite() {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

/// `n` values from `lo` to `hi` spaced uniformly in `log`, rounded to
/// integers, deduplicated and ascending.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<u64> {
    let mut out: Vec<u64> = match n {
        0 => Vec::new(),
        1 => vec![lo.round() as u64],
        _ => {
            let (llo, lhi) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    let t = i as f64 / (n - 1) as f64;
                    (llo + t * (lhi - llo)).exp().round() as u64
                })
                .collect()
        }
    };
    out.retain(|&q| q >= 1);
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_small_terms() {
        let mut terms = vec![1e16, 1.0, -1e16];
        terms.extend(std::iter::repeat_n(1.0, 10));
        assert_eq!(compensated_sum(terms.iter().copied()), 11.0);
        let naive: f64 = terms.iter().sum();
        assert_ne!(naive, 11.0);
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(fmt_sig12(0.1), "0.1");
        assert_eq!(fmt_sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig12(123456789012345.0), "123456789012000");
        assert_eq!(fmt_sig12(0.0), "0");
    }

    #[test]
    fn log_spacing() {
        assert_eq!(log_spaced(1.0, 1000.0, 4), vec![1, 10, 100, 1000]);
        assert_eq!(log_spaced(1.0, 2.0, 10), vec![1, 2]);
    }
}
