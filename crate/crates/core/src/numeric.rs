//! Small numeric helpers shared across modules.

/// Sequential dot product. Every code path that evaluates a polynomial on a
/// feature row goes through this function, so values computed during a run
/// and values recomputed later by a selector agree bit for bit.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Pairwise (cascade) summation of `term(i)` for `i` in `0..n`, in fixed index order.
pub fn pairwise_sum(n: usize, term: &impl Fn(usize) -> f64) -> f64 {
    fn rec(lo: usize, hi: usize, term: &impl Fn(usize) -> f64) -> f64 {
        if hi - lo <= 32 {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += term(i);
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, term) + rec(mid, hi, term)
        }
    }
    if n == 0 {
        0.0
    } else {
        rec(0, n, term)
    }
}

/// Pairwise summation of a slice.
pub fn pairwise_sum_slice(values: &[f64]) -> f64 {
    pairwise_sum(values.len(), &|i| values[i])
}

/// Key for exact (bitwise) deduplication of a float row.
pub(crate) fn row_key(row: &[f64]) -> Vec<u64> {
    // -0.0 and 0.0 evaluate identically, fold them together.
    row.iter().map(|v| if *v == 0.0 { 0 } else { v.to_bits() }).collect()
}

/// Maps `f` over `items`, in parallel when the `parallel` feature is on.
/// Output order always matches input order.
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Monotonic wall-clock stopwatch. Reads zero on targets without a clock.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    pub(crate) fn start() -> Self {
        Stopwatch {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub(crate) fn elapsed_ms(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64() * 1e3
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum_slice(&v), 499_500.0);
        assert_eq!(pairwise_sum_slice(&[]), 0.0);
    }

    #[test]
    fn row_key_folds_signed_zero() {
        assert_eq!(row_key(&[0.0, 1.0]), row_key(&[-0.0, 1.0]));
        assert_ne!(row_key(&[1.0]), row_key(&[-1.0]));
    }
}
