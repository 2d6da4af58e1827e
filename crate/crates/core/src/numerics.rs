//! Small numerical kernels: monotone root finding, regression, extrapolation,
//! compensated summation and sample-point generation.

/// Closed interval `[a, b]` with `a <= b`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Iv {
    pub a: f64,
    pub b: f64,
}

impl Iv {
    pub fn new(a: f64, b: f64) -> Self {
        if a <= b {
            Iv { a, b }
        } else {
            Iv { a: b, b: a }
        }
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a <= x && x <= self.b
    }

    pub fn contains_iv(&self, other: &Iv) -> bool {
        self.a <= other.a && other.b <= self.b
    }

    /// Overlap with positive length, or `None`.
    pub fn intersect(&self, other: &Iv) -> Option<Iv> {
        let a = self.a.max(other.a);
        let b = self.b.min(other.b);
        if a < b {
            Some(Iv { a, b })
        } else {
            None
        }
    }

    /// Both endpoints within `tol` of the other interval's.
    pub fn close_to(&self, other: &Iv, tol: f64) -> bool {
        (self.a - other.a).abs() < tol && (self.b - other.b).abs() < tol
    }
}

/// Solve `f(x) = target` for monotone `f` on `[lo, hi]` by bisection.
///
/// `f(lo)` and `f(hi)` must straddle `target`; the sign orientation is
/// detected from the endpoint values. Stops when the bracket width falls
/// below `tol`.
pub fn bisect_monotone(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, target: f64, tol: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    let f_lo = f(lo) - target;
    if f_lo == 0.0 {
        return lo;
    }
    let increasing = f_lo < 0.0;
    for _ in 0..200 {
        if hi - lo < tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let v = f(mid) - target;
        if v == 0.0 {
            return mid;
        }
        if (v < 0.0) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// A few Newton steps to polish a bisection root of `f(x) = target`,
/// clamped to `[lo, hi]`. Falls back to `x0` when the derivative degenerates.
pub fn newton_polish(
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
    x0: f64,
    lo: f64,
    hi: f64,
    target: f64,
    iters: usize,
) -> f64 {
    let mut x = x0;
    for _ in 0..iters {
        let d = df(x);
        if !d.is_finite() || d.abs() < 1e-300 {
            return x;
        }
        let step = (f(x) - target) / d;
        let next = (x - step).clamp(lo, hi);
        if !next.is_finite() {
            return x;
        }
        if (next - x).abs() < 1e-17 {
            return next;
        }
        x = next;
    }
    x
}

/// Least-squares line fit.
#[derive(Debug, Clone, Copy)]
pub struct LinFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub rms: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - (slope * x + intercept);
        ss += r * r;
    }
    Some(LinFit {
        slope,
        intercept,
        rms: (ss / nf).sqrt(),
    })
}

/// One Aitken delta-squared step on the tail of a sequence.
pub fn aitken(seq: &[f64]) -> Option<f64> {
    let n = seq.len();
    if n < 3 {
        return None;
    }
    let (s0, s1, s2) = (seq[n - 3], seq[n - 2], seq[n - 1]);
    let denom = s2 - 2.0 * s1 + s0;
    if denom.abs() < 1e-14 * (s2.abs() + 1.0) {
        return None;
    }
    Some(s2 - (s2 - s1) * (s2 - s1) / denom)
}

/// `n` Chebyshev-spaced points in the open interval `(a, b)`.
pub fn chebyshev_points(a: f64, b: f64, n: usize) -> Vec<f64> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (0..n)
        .map(|k| {
            let theta = std::f64::consts::PI * (2.0 * k as f64 + 1.0) / (2.0 * n as f64);
            mid + half * theta.cos()
        })
        .collect()
}

/// Neumaier compensated sum; keeps error near one ulp for long sums.
pub fn comp_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Plain second differences `v[k+1] - 2 v[k] + v[k-1]`.
pub fn second_differences(v: &[f64]) -> Vec<f64> {
    if v.len() < 3 {
        return Vec::new();
    }
    (1..v.len() - 1)
        .map(|k| v[k + 1] - 2.0 * v[k] + v[k - 1])
        .collect()
}

/// log(sum of exp(terms)) guarded against overflow.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s = comp_sum(terms.iter().map(|&t| (t - m).exp()));
    m + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_dyadic_root() {
        let f = |x: f64| 2.0 * x;
        let r = bisect_monotone(&f, 0.0, 1.0, 0.5, 1e-14);
        assert!((r - 0.25).abs() < 1e-13);
    }

    #[test]
    fn newton_polish_lands_exactly_on_linear_root() {
        let f = |x: f64| 2.0 * x;
        let df = |_: f64| 2.0;
        let r = newton_polish(&f, &df, 0.2499997, 0.0, 1.0, 0.5, 3);
        assert_eq!(r, 0.25);
    }

    #[test]
    fn linear_fit_recovers_slope() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!(fit.rms < 1e-12);
    }

    #[test]
    fn log_sum_exp_matches_direct() {
        let terms = [0.1f64.ln(), 0.9f64.ln()];
        assert!((log_sum_exp(&terms) - 0.0).abs() < 1e-14);
    }
}
