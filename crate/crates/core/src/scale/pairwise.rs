//! Order statistics of pairwise values `f(x_i, x_j)`, `i < j`.
//!
//! Small samples enumerate all `n(n-1)/2` values and use selection. Large
//! samples bisect on the value axis, counting pairs below a threshold with one
//! binary search per row of the implicitly sorted pairwise table, and only
//! enumerate the narrow band of candidates that contains the target rank.
//! Both paths return bitwise-identical values because they evaluate the same
//! floating-point expression.

/// Above this sample size the implicit (non-enumerating) path is used.
pub(crate) const ENUMERATION_LIMIT: usize = 2048;

#[derive(Debug, Clone, Copy)]
pub(crate) enum PairOp {
    /// `x_j - x_i` on sorted data, i.e. `|x_i - x_j|`.
    AbsDiff,
    /// `(x_i + x_j) / 2`.
    Mean,
}

impl PairOp {
    #[inline]
    fn eval(self, a: f64, b: f64) -> f64 {
        match self {
            PairOp::AbsDiff => b - a,
            PairOp::Mean => 0.5 * (a + b),
        }
    }
}

pub(crate) fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Returns the `k`-th and `(k+1)`-th smallest pairwise values (0-based), the
/// latter only when it exists. `sorted` must be ascending.
pub(crate) fn order_stats(sorted: &[f64], op: PairOp, k: usize) -> (f64, Option<f64>) {
    if sorted.len() <= ENUMERATION_LIMIT {
        order_stats_enumerated(sorted, op, k)
    } else {
        let first = kth_implicit(sorted, op, k);
        let second = (k + 1 < pair_count(sorted.len())).then(|| kth_implicit(sorted, op, k + 1));
        (first, second)
    }
}

pub(crate) fn order_stats_enumerated(sorted: &[f64], op: PairOp, k: usize) -> (f64, Option<f64>) {
    let n = sorted.len();
    let mut values = Vec::with_capacity(pair_count(n));
    for i in 0..n {
        for j in (i + 1)..n {
            values.push(op.eval(sorted[i], sorted[j]));
        }
    }
    assert!(k < values.len(), "rank {k} out of range");
    let (_, kth, upper) = values.select_nth_unstable_by(k, f64::total_cmp);
    let kth = *kth;
    let next = upper.iter().copied().min_by(f64::total_cmp);
    (kth, next)
}

/// Number of pairs with value `<= t`, plus the per-row exclusive end index.
fn count_le(sorted: &[f64], op: PairOp, t: f64, ends: &mut Vec<usize>) -> usize {
    ends.clear();
    let mut total = 0;
    for (i, &a) in sorted.iter().enumerate() {
        let tail = &sorted[i + 1..];
        let m = tail.partition_point(|&b| op.eval(a, b) <= t);
        ends.push(i + 1 + m);
        total += m;
    }
    total
}

pub(crate) fn kth_implicit(sorted: &[f64], op: PairOp, k: usize) -> f64 {
    let n = sorted.len();
    let total = pair_count(n);
    assert!(k < total, "rank {k} out of range");
    let cap = 4 * n;

    let (min_val, max_val) = match op {
        PairOp::AbsDiff => {
            let min = sorted
                .windows(2)
                .map(|w| op.eval(w[0], w[1]))
                .fold(f64::INFINITY, f64::min);
            (min, op.eval(sorted[0], sorted[n - 1]))
        }
        PairOp::Mean => (
            op.eval(sorted[0], sorted[1]),
            op.eval(sorted[n - 2], sorted[n - 1]),
        ),
    };

    let mut lo = min_val.next_down();
    let mut hi = max_val;
    let mut lo_ends = Vec::with_capacity(n);
    let mut hi_ends = Vec::with_capacity(n);
    let mut lo_count = count_le(sorted, op, lo, &mut lo_ends);
    let mut hi_count = count_le(sorted, op, hi, &mut hi_ends);
    debug_assert_eq!(lo_count, 0);
    debug_assert_eq!(hi_count, total);

    let mut scratch = Vec::with_capacity(n);
    while hi_count - lo_count > cap {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            // No representable value strictly between: every candidate equals hi.
            return hi;
        }
        let c = count_le(sorted, op, mid, &mut scratch);
        if c > k {
            hi = mid;
            hi_count = c;
            std::mem::swap(&mut hi_ends, &mut scratch);
        } else {
            lo = mid;
            lo_count = c;
            std::mem::swap(&mut lo_ends, &mut scratch);
        }
    }

    let mut candidates = Vec::with_capacity(hi_count - lo_count);
    for i in 0..n {
        for j in lo_ends[i]..hi_ends[i] {
            candidates.push(op.eval(sorted[i], sorted[j]));
        }
    }
    let rank = k - lo_count;
    let (_, kth, _) = candidates.select_nth_unstable_by(rank, f64::total_cmp);
    *kth
}
