//! Detection of Pliss times, (sigma^2, r)-hyperbolic times and L-sparse
//! subsequences along an orbit.
//!
//! A time `n` is (sigma^2, r)-hyperbolic when for every `0 <= k < n` the
//! backward derivative product satisfies
//! `prod_{j=k}^{n-1} |df|^{-1} <= sigma^{2(n-k)}` and the truncated critical
//! distance satisfies `dist_r(x_{n-k}, C_{theta^{n-k} w}) >= sigma^{b k}`:
//! the recurrence threshold relaxes with the lag `k` from `n`, so positions
//! checked at `k = 0` must be a full `r` away from the moving critical set
//! while old near-critical visits age out.  Both families of conditions
//! collapse to running extrema of shifted prefix sums, so detection is O(n)
//! amortized; the O(n^2) direct transcription lives in [`crate::oracles`]
//! and the two are required to agree exactly.

use crate::orbit::Orbit;
use serde::{Deserialize, Serialize};

/// Parameters of the hyperbolic-time definition.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HyperbolicParams {
    /// The sigma^2 of the definition, in (0,1).
    pub sigma2: f64,
    /// Truncation radius r in (0, 1/2).
    pub r: f64,
    /// Recurrence exponent b in (0, 1/2).
    pub b: f64,
    /// Sparsity gap L.
    pub big_l: usize,
}

impl HyperbolicParams {
    pub fn new(sigma2: f64, r: f64, b: f64, big_l: usize) -> HyperbolicParams {
        assert!(sigma2 > 0.0 && sigma2 < 1.0, "sigma2 must lie in (0,1)");
        assert!(r > 0.0 && r < 0.5, "r must lie in (0,1/2)");
        assert!(b > 0.0 && b < 0.5, "b must lie in (0,1/2)");
        HyperbolicParams {
            sigma2,
            r,
            b,
            big_l,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeKind {
    Pliss,
    Hyperbolic,
    Sparse,
    Young,
}

/// A strictly increasing set of detected times in `[1, n]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimeSet {
    pub indices: Vec<usize>,
    pub kind: TimeKind,
}

impl TimeSet {
    pub fn new(mut indices: Vec<usize>, kind: TimeKind) -> TimeSet {
        indices.sort_unstable();
        indices.dedup();
        TimeSet { indices, kind }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, n: usize) -> bool {
        self.indices.binary_search(&n).is_ok()
    }
}

/// Pliss times of a real sequence: indices `n` with
/// `sum_{i=k}^{n-1} seq_i >= c1 (n-k)` for every `0 <= k < n`.
#[derive(Debug, Clone, Serialize)]
pub struct PlissResult {
    pub times: TimeSet,
    /// Density bound `(avg - c2)/(A - c2)` when the full average reaches c2.
    pub guaranteed_density: Option<f64>,
    pub observed_density: f64,
}

pub fn pliss_times(seq: &[f64], c1: f64, c2: f64, a_bound: f64) -> PlissResult {
    assert!(c1 < c2 && c2 <= a_bound, "need c1 < c2 <= A");
    let n = seq.len();
    let mut indices = Vec::new();
    let mut prefix = 0.0f64; // sum of (seq_i - c1) for i < current
    let mut max_prefix = 0.0f64; // max over k <= current of prefix_k
    for (i, &v) in seq.iter().enumerate() {
        debug_assert!(v <= a_bound + 1e-12, "sequence exceeds its bound A");
        // prefix at k = i is the current value, a candidate start
        max_prefix = max_prefix.max(prefix);
        prefix += v - c1;
        if prefix >= max_prefix {
            indices.push(i + 1);
        }
    }
    let observed_density = if n == 0 {
        0.0
    } else {
        indices.len() as f64 / n as f64
    };
    let avg = if n == 0 {
        0.0
    } else {
        seq.iter().sum::<f64>() / n as f64
    };
    let guaranteed_density = if n > 0 && avg >= c2 {
        Some((avg - c2) / (a_bound - c2))
    } else {
        None
    };
    PlissResult {
        times: TimeSet::new(indices, TimeKind::Pliss),
        guaranteed_density,
        observed_density,
    }
}

/// Fast hyperbolic-time detector.
pub fn hyperbolic_times(orbit: &Orbit, p: &HyperbolicParams) -> TimeSet {
    let n = orbit.n;
    let ln_sig2 = p.sigma2.ln(); // < 0
    let cb = -0.5 * p.b * ln_sig2; // = b * ln(1/sigma) > 0
    let mut indices = Vec::new();
    // expansion: prefix_j = sum_{i<j} (logd_i + ln sigma^2); need
    // prefix_n >= prefix_k for all k < n
    let mut prefix = 0.0f64;
    let mut max_prefix = 0.0f64;
    // distance: W_m = ln(distr_m) - cb*m; need min_{1<=m<=n} W_m >= -cb*n
    let mut min_w = f64::INFINITY;
    for m in 1..=n {
        max_prefix = max_prefix.max(prefix);
        prefix += orbit.logd[m - 1] + ln_sig2;
        min_w = min_w.min(orbit.distr[m].ln() - cb * m as f64);
        if prefix >= max_prefix && min_w >= -cb * m as f64 {
            indices.push(m);
        }
    }
    TimeSet::new(indices, TimeKind::Hyperbolic)
}

/// Greedy L-sparse subsequence: `tau_1 = min(times)`,
/// `tau_{i+1} = min{ t in times : t > tau_i + L }`.
pub fn sparse_times(times: &TimeSet, big_l: usize) -> TimeSet {
    let mut out = Vec::new();
    let mut last: Option<usize> = None;
    for &t in &times.indices {
        match last {
            None => {
                out.push(t);
                last = Some(t);
            }
            Some(prev) if t > prev + big_l => {
                out.push(t);
                last = Some(t);
            }
            _ => {}
        }
    }
    TimeSet::new(out, TimeKind::Sparse)
}

/// `#(times in [1,n]) / n`.
pub fn time_density(times: &TimeSet, n: usize) -> f64 {
    assert!(n >= 1);
    let count = times.indices.iter().take_while(|&&t| t <= n).count();
    count as f64 / n as f64
}
