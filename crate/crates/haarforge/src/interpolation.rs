//! Falsification sweeps for Markov-type inequalities: the classic form on
//! [0, 1], the large-N interpolation form in x = 1/N, and the rational form
//! with clustered integer poles.
//!
//! Each check compares grid suprema and adds a Lipschitz term for the grid
//! spacing, so a reported violation cannot be a sampling artifact.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{domain, Result};
use crate::rng::map_samples;

/// Points of the classic [0, 1] grid.
pub const GRID_POINTS: usize = 100_000;
/// Log-spaced grid points on [N0, N0·2^10].
pub const LOG_GRID_POINTS: usize = 4096;
pub const MAX_DEGREE: usize = 30;

/// Σ c_j x^j by Horner's rule.
pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs.iter().enumerate().skip(1).map(|(j, &c)| j as f64 * c).collect()
}

fn degree(coeffs: &[f64]) -> usize {
    coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
}

/// T_d(2x − 1) in the monomial basis.
pub fn shifted_chebyshev(d: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if d == 0 {
        return prev;
    }
    let mut cur = vec![-1.0, 2.0];
    for _ in 1..d {
        let mut next = vec![0.0; cur.len() + 1];
        for (j, &c) in cur.iter().enumerate() {
            next[j] -= 2.0 * c;
            next[j + 1] += 4.0 * c;
        }
        for (j, &c) in prev.iter().enumerate() {
            next[j] -= c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// Outcome of one inequality check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    /// Grid-resolution term already included in `rhs`.
    pub slack: f64,
    /// lhs / rhs (0 when both vanish).
    pub ratio: f64,
    pub holds: bool,
}

impl InequalityReport {
    fn new(lhs: f64, rhs: f64, slack: f64) -> Self {
        let ratio = if rhs > 0.0 { lhs / rhs } else if lhs > 0.0 { f64::INFINITY } else { 0.0 };
        Self { lhs, rhs, slack, ratio, holds: lhs <= rhs }
    }
}

/// Classic Markov check on [0, 1]: sup|f'| ≤ 2d² sup|f|.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovReport {
    pub d: usize,
    pub sup_f: f64,
    pub sup_df: f64,
    /// sup|f'| / sup|f| on the grid.
    pub grid_ratio: f64,
    pub check: InequalityReport,
}

pub fn markov_check(coeffs: &[f64], d: usize) -> Result<MarkovReport> {
    if d > MAX_DEGREE {
        return domain(format!("d must be at most {MAX_DEGREE}, got {d}"));
    }
    if degree(coeffs) > d {
        return domain(format!("polynomial degree {} exceeds d={d}", degree(coeffs)));
    }
    let df = poly_derivative(coeffs);
    let h = 1.0 / (GRID_POINTS - 1) as f64;
    let mut sup_f: f64 = 0.0;
    let mut sup_df: f64 = 0.0;
    for i in 0..GRID_POINTS {
        let x = if i == GRID_POINTS - 1 { 1.0 } else { i as f64 * h };
        sup_f = sup_f.max(poly_eval(coeffs, x).abs());
        sup_df = sup_df.max(poly_eval(&df, x).abs());
    }
    // |f'| ≤ Σ j|c_j| on [0, 1], so the true sup|f| is within h/2 of that times it.
    let lip: f64 = coeffs.iter().enumerate().map(|(j, c)| j as f64 * c.abs()).sum();
    let slack = 0.5 * h * lip;
    let dd = (2 * d * d) as f64;
    let grid_ratio = if sup_f > 0.0 { sup_df / sup_f } else { 0.0 };
    Ok(MarkovReport { d, sup_f, sup_df, grid_ratio, check: InequalityReport::new(sup_df, dd * (sup_f + slack), dd * slack) })
}

/// x = 1/N for N log-spaced integers in [N0, N0·2^10], plus x = 0 (N = ∞), ascending,
/// and the widest x-gap that skips integers (the only gaps needing slack).
fn inverse_log_grid(n0: usize) -> (Vec<f64>, f64) {
    let lo = (n0 as f64).ln();
    let hi = lo + 10.0 * std::f64::consts::LN_2;
    let mut ns: Vec<u64> = (0..LOG_GRID_POINTS)
        .map(|i| (lo + (hi - lo) * i as f64 / (LOG_GRID_POINTS - 1) as f64).exp().round() as u64)
        .map(|n| n.max(n0 as u64))
        .collect();
    ns.push(n0 as u64);
    ns.sort_unstable();
    ns.dedup();
    let tail = 1.0 / *ns.last().expect("non-empty grid") as f64;
    let gap = ns
        .windows(2)
        .filter(|w| w[1] - w[0] > 1)
        .map(|w| 1.0 / w[0] as f64 - 1.0 / w[1] as f64)
        .fold(tail, f64::max);
    let mut xs: Vec<f64> = ns.iter().rev().map(|&n| 1.0 / n as f64).collect();
    xs.insert(0, 0.0);
    (xs, gap)
}

/// sup_N N|f(1/N) − f(0)| and sup_N |f(1/N)| over the grid, plus the N → ∞ limit |f'(0)|.
fn large_n_sups(f: impl Fn(f64) -> f64, f0: f64, df0: f64, xs: &[f64]) -> (f64, f64) {
    let mut lhs = df0.abs();
    let mut sup = f0.abs();
    for &x in &xs[1..] {
        let v = f(x);
        lhs = lhs.max((v - f0).abs() / x);
        sup = sup.max(v.abs());
    }
    (lhs, sup)
}

/// sup_{N≥N0} N|f(1/N) − f(0)| ≤ 4d²·N0·sup_{N≥N0}|f(1/N)|.
pub fn large_n_check(coeffs: &[f64], d: usize, n0: usize) -> Result<InequalityReport> {
    if d > MAX_DEGREE || degree(coeffs) > d {
        return domain(format!("need degree <= d <= {MAX_DEGREE} (degree {}, d={d})", degree(coeffs)));
    }
    if n0 == 0 || 4 * d * d > n0 + 1 {
        return domain(format!("precondition d^2 <= (N0+1)/4 fails for d={d}, N0={n0}"));
    }
    let (xs, gap) = inverse_log_grid(n0);
    let df = poly_derivative(coeffs);
    let (lhs, sup) = large_n_sups(|x| poly_eval(coeffs, x), poly_eval(coeffs, 0.0), poly_eval(&df, 0.0), &xs);
    let x0 = 1.0 / n0 as f64;
    let lip: f64 = coeffs.iter().enumerate().skip(1).map(|(j, c)| j as f64 * c.abs() * x0.powi(j as i32 - 1)).sum();
    let factor = (4 * d * d * n0) as f64;
    let slack = 0.5 * gap * lip;
    Ok(InequalityReport::new(lhs, factor * (sup + slack), factor * slack))
}

/// f(1/N) = a(N) / Π_i (N − b_i)^{m_i}, numerator in ascending powers of N.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalPolyN {
    pub numerator: Vec<f64>,
    pub poles: Vec<(i64, u32)>,
}

impl RationalPolyN {
    pub fn new(numerator: Vec<f64>, poles: Vec<(i64, u32)>) -> Result<Self> {
        let rp = Self { numerator, poles };
        if degree(&rp.numerator) > rp.d() {
            return domain(format!(
                "numerator degree {} exceeds denominator degree {}: no finite limit",
                degree(&rp.numerator),
                rp.d()
            ));
        }
        Ok(rp)
    }

    /// Denominator degree Σ m_i.
    pub fn d(&self) -> usize {
        self.poles.iter().map(|p| p.1 as usize).sum()
    }

    /// B = max |b_i|.
    pub fn b_max(&self) -> u64 {
        self.poles.iter().map(|p| p.0.unsigned_abs()).max().unwrap_or(0)
    }

    /// Numerator coefficient of N^j, zero beyond the stored list.
    fn a(&self, j: usize) -> f64 {
        self.numerator.get(j).copied().unwrap_or(0.0)
    }

    /// f(x) = Σ_j a_j x^{d−j} / Π(1 − b_i x)^{m_i}.
    pub fn eval_x(&self, x: f64) -> f64 {
        let d = self.d();
        let p: f64 = (0..=d).rev().fold(0.0, |acc, j| acc * x + self.a(d - j));
        let q: f64 = self.poles.iter().map(|&(b, m)| (1.0 - b as f64 * x).powi(m as i32)).product();
        p / q
    }

    /// f(1/N).
    pub fn eval_n(&self, n: f64) -> f64 {
        self.eval_x(1.0 / n)
    }

    /// Limit N → ∞.
    pub fn limit(&self) -> f64 {
        self.a(self.d())
    }

    /// df/dx at x = 0.
    fn derivative_at_zero(&self) -> f64 {
        let d = self.d();
        let lead = if d >= 1 { self.a(d - 1) } else { 0.0 };
        lead + self.a(d) * self.poles.iter().map(|&(b, m)| m as f64 * b as f64).sum::<f64>()
    }

    /// Bound on |f'| over [0, x0], valid while B·x0 < 1.
    fn lipschitz_bound(&self, x0: f64) -> f64 {
        let d = self.d();
        let pm: f64 = (0..=d).map(|j| self.a(j).abs() * x0.powi((d - j) as i32)).sum();
        let pdm: f64 = (0..d).map(|j| (d - j) as f64 * self.a(j).abs() * x0.powi((d - j) as i32 - 1)).sum();
        let qinv: f64 = self.poles.iter().map(|&(b, m)| (1.0 - b.unsigned_abs() as f64 * x0).powi(-(m as i32))).product();
        let r: f64 = self
            .poles
            .iter()
            .map(|&(b, m)| m as f64 * b.unsigned_abs() as f64 / (1.0 - b.unsigned_abs() as f64 * x0))
            .sum();
        qinv * (pdm + pm * r)
    }
}

/// sup_{N≥N0} N|f(1/N) − f(1/∞)| ≤ 4d²(N0 + 10dB)·sup_{N≥N0}|f(1/N)|.
pub fn clustered_pole_check(rp: &RationalPolyN, n0: usize) -> Result<InequalityReport> {
    let d = rp.d() as u64;
    let b = rp.b_max();
    if degree(&rp.numerator) as u64 > d {
        return domain("numerator degree exceeds denominator degree");
    }
    if (n0 as u64) + 1 < 8 * d * b + d * d || n0 == 0 || n0 as u64 <= b {
        return domain(format!("precondition N0 >= 8dB + d^2 - 1 fails (N0={n0}, d={d}, B={b})"));
    }
    let (xs, gap) = inverse_log_grid(n0);
    let (lhs, sup) = large_n_sups(|x| rp.eval_x(x), rp.limit(), rp.derivative_at_zero(), &xs);
    let factor = (4 * d * d) as f64 * (n0 as f64 + 10.0 * (d * b) as f64);
    let slack = 0.5 * gap * rp.lipschitz_bound(1.0 / n0 as f64);
    Ok(InequalityReport::new(lhs, factor * (sup + slack), factor * slack))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Suite {
    Classic,
    #[serde(rename = "largeN")]
    LargeN,
    Poles,
}

impl std::str::FromStr for Suite {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classic" => Ok(Self::Classic),
            "largeN" => Ok(Self::LargeN),
            "poles" => Ok(Self::Poles),
            _ => domain(format!("unknown suite '{s}' (expected classic, largeN or poles)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub suite: Suite,
    pub trials: usize,
    pub seed: u64,
    pub violations: usize,
    /// Largest lhs/rhs over the sweep.
    pub worst_ratio: f64,
    /// Full instance data of every violation.
    pub failures: Vec<serde_json::Value>,
    pub passed: bool,
}

fn normal_coeffs<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Random pole instance: 1..=3 distinct locations in 0..=20, total multiplicity ≤ 8.
fn random_poles<R: Rng + ?Sized>(rng: &mut R) -> RationalPolyN {
    let n_poles = rng.random_range(1..=3usize);
    let mut poles: Vec<(i64, u32)> = Vec::new();
    let mut budget = 8u32;
    while poles.len() < n_poles && budget > 0 {
        let b = rng.random_range(0..=20i64);
        if poles.iter().any(|p| p.0 == b) {
            continue;
        }
        let m = rng.random_range(1..=budget.min(4));
        budget -= m;
        poles.push((b, m));
    }
    let d: usize = poles.iter().map(|p| p.1 as usize).sum();
    let num_deg = rng.random_range(0..=d);
    RationalPolyN { numerator: normal_coeffs(num_deg + 1, rng), poles }
}

/// Randomized sweep at the stated preconditions:
/// classic uses degree-10 polynomials, largeN degree 5 with N0 = 101, and
/// poles the smallest admissible N0 = 8dB + d² − 1.
pub fn run_suite(suite: Suite, trials: usize, seed: u64) -> Result<SweepReport> {
    if trials == 0 {
        return domain("trials must be positive");
    }
    let outcomes: Vec<Result<(InequalityReport, serde_json::Value)>> = map_samples(seed, trials, |rng| match suite {
        Suite::Classic => {
            let c = normal_coeffs(11, rng);
            let r = markov_check(&c, 10)?;
            Ok((r.check, json!({"coeffs": c, "d": 10})))
        }
        Suite::LargeN => {
            let c = normal_coeffs(6, rng);
            Ok((large_n_check(&c, 5, 101)?, json!({"coeffs": c, "d": 5, "N0": 101})))
        }
        Suite::Poles => {
            let rp = random_poles(rng);
            let (d, b) = (rp.d(), rp.b_max() as usize);
            let n0 = (8 * d * b + d * d).saturating_sub(1).max(b + 1);
            Ok((clustered_pole_check(&rp, n0)?, json!({"instance": rp, "N0": n0})))
        }
    });
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for o in outcomes {
        let (rep, inst) = o?;
        worst = worst.max(rep.ratio);
        if !rep.holds {
            violations += 1;
            failures.push(json!({"instance": inst, "report": rep}));
        }
    }
    Ok(SweepReport { suite, trials, seed, violations, worst_ratio: worst, failures, passed: violations == 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chebyshev_recurrence() {
        // T_2(2x−1) = 8x² − 8x + 1
        assert_eq!(shifted_chebyshev(2), vec![1.0, -8.0, 8.0]);
        for d in 0..8 {
            let c = shifted_chebyshev(d);
            for x in [0.0, 0.3, 0.77, 1.0f64] {
                let t = (d as f64 * (2.0 * x - 1.0).acos()).cos();
                assert!((poly_eval(&c, x) - t).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn monomial_is_far_from_tight() {
        for d in [1, 3, 10] {
            let mut c = vec![0.0; d + 1];
            c[d] = 1.0;
            let r = markov_check(&c, d).unwrap();
            assert!((r.sup_df - d as f64).abs() < 1e-9);
            assert!(r.check.holds);
        }
    }

    #[test]
    fn chebyshev_is_tight() {
        for d in 1..=10 {
            let r = markov_check(&shifted_chebyshev(d), d).unwrap();
            assert!((r.grid_ratio - (2 * d * d) as f64).abs() < 1e-6, "d={d}: {}", r.grid_ratio);
            assert!(r.check.holds);
        }
    }

    #[test]
    fn markov_rejects_bad_degree() {
        assert!(markov_check(&[0.0, 0.0, 1.0], 1).is_err());
        assert!(markov_check(&[1.0], 31).is_err());
    }

    #[test]
    fn large_n_examples() {
        let r = large_n_check(&[3.0], 0, 4).unwrap();
        assert_eq!(r.lhs, 0.0);
        let r = large_n_check(&[0.0, 1.0], 1, 4).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-12);
        assert!((r.rhs - 4.0 - r.slack).abs() < 1e-12);
        assert!(r.holds);
        assert!(large_n_check(&[0.0, 1.0], 5, 50).is_err());
    }

    #[test]
    fn single_pole_closed_form() {
        let rp = RationalPolyN::new(vec![1.0], vec![(2, 1)]).unwrap();
        for n in [10.0, 100.0, 1e4] {
            assert!((rp.eval_n(n) - 1.0 / (n - 2.0)).abs() < 1e-15);
        }
        assert_eq!(rp.limit(), 0.0);
        // N0 = 8·1·2 + 1 − 1 = 16: lhs = sup N/(N−2) = 16/14, rhs = 4·(16+20)/14.
        let r = clustered_pole_check(&rp, 16).unwrap();
        assert!((r.lhs - 16.0 / 14.0).abs() < 1e-12);
        assert!(r.holds && r.ratio < 0.2);
        assert!(clustered_pole_check(&rp, 15).is_err());
        assert!(RationalPolyN::new(vec![0.0, 0.0, 1.0], vec![(2, 1)]).is_err());
    }

    #[test]
    fn poles_without_poles_reduce_to_polynomial() {
        // d = 0: constant
        let rp = RationalPolyN::new(vec![2.5], vec![]).unwrap();
        let r = clustered_pole_check(&rp, 1).unwrap();
        assert_eq!(r.lhs, 0.0);
        // B = 0 poles: f(x) = Σ a_j x^{d−j}, same as the polynomial check at N0 = d² − 1 or above
        let rp = RationalPolyN::new(vec![0.5, -1.0, 2.0], vec![(0, 2)]).unwrap();
        let a = clustered_pole_check(&rp, 17).unwrap();
        let b = large_n_check(&[2.0, -1.0, 0.5], 2, 17).unwrap();
        assert!((a.lhs - b.lhs).abs() < 1e-12);
        assert!((a.rhs - b.rhs).abs() < 1e-9);
    }

    #[test]
    fn derivative_at_zero_matches_difference() {
        let rp = RationalPolyN::new(vec![0.3, -1.2, 0.7, 2.0], vec![(3, 2), (-5, 1)]).unwrap();
        let h = 1e-6;
        let fd = (rp.eval_x(h) - rp.eval_x(-h)) / (2.0 * h);
        assert!((rp.derivative_at_zero() - fd).abs() < 1e-6);
    }

    #[test]
    fn sweeps_find_no_violations() {
        for suite in [Suite::Classic, Suite::LargeN, Suite::Poles] {
            let r = run_suite(suite, 500, 2024).unwrap();
            assert_eq!(r.violations, 0, "{suite:?}: {:?}", r.failures.first());
            assert!(r.worst_ratio > 0.0 && r.worst_ratio <= 1.0);
        }
    }

    #[test]
    fn suite_names_parse() {
        assert_eq!("largeN".parse::<Suite>().unwrap(), Suite::LargeN);
        assert_eq!(serde_json::to_value(Suite::LargeN).unwrap(), json!("largeN"));
        assert!("other".parse::<Suite>().is_err());
    }
}
