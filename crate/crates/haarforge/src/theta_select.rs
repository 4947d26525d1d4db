//! Kesten–McKay density p_m, its characteristic function v_m(θ) and the
//! smallest positive zero θ_m.

use serde::Serialize;

use crate::error::{domain, Error, Result};

/// Kesten–McKay law with branching parameter m, supported on
/// [-2 sqrt(1 - 1/m), 2 sqrt(1 - 1/m)].
///
/// For m = 1 the support collapses and the law used here is the atomic one,
/// (δ_{-1} + δ_{+1})/2, whose characteristic function is cos θ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KMSpec {
    pub m: u64,
}

impl KMSpec {
    pub fn new(m: u64) -> Result<Self> {
        if m == 0 {
            return domain("Kesten-McKay parameter m must be at least 1");
        }
        Ok(Self { m })
    }

    pub fn support_edge(&self) -> f64 {
        2.0 * (1.0 - 1.0 / self.m as f64).sqrt()
    }

    pub fn is_atomic(&self) -> bool {
        self.m == 1
    }
}

/// p_m(x) = sqrt(4(m-1)/m - x^2) / (2π (1 - x^2/m)) on the support, 0 outside.
/// The atomic m = 1 law has no density part and returns 0.
pub fn km_density(spec: &KMSpec, x: f64) -> f64 {
    let m = spec.m as f64;
    let r = 4.0 * (m - 1.0) / m - x * x;
    if spec.is_atomic() || r <= 0.0 {
        return 0.0;
    }
    r.sqrt() / (2.0 * std::f64::consts::PI * (1.0 - x * x / m))
}

const QUAD_TOL: f64 = 1e-13;
const QUAD_MAX_NODES: usize = 1 << 20;

/// ∫ g(x) p_m(x) dx for even-symmetric use, via x = e sin t.
///
/// After the substitution the integrand extends to a smooth 2π-periodic
/// function of t, so the midpoint rule converges geometrically; nodes are
/// doubled until two successive estimates agree.
fn km_integral(spec: &KMSpec, g: impl Fn(f64) -> f64) -> Result<f64> {
    let m = spec.m as f64;
    let e = spec.support_edge();
    let c = e * e / m;
    let f = |t: f64| {
        let (s, co) = t.sin_cos();
        g(e * s) * e * e * co * co / (2.0 * std::f64::consts::PI * (1.0 - c * s * s))
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut nodes = 32usize;
    let midpoint = |nodes: usize| {
        let h = std::f64::consts::PI / nodes as f64;
        (0..nodes).map(|j| f(-half_pi + (j as f64 + 0.5) * h)).sum::<f64>() * h
    };
    let mut prev = midpoint(nodes);
    while nodes < QUAD_MAX_NODES {
        nodes *= 2;
        let cur = midpoint(nodes);
        if (cur - prev).abs() <= QUAD_TOL {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Numeric(format!(
        "Kesten-McKay quadrature did not converge for m={} (last change {:.3e} at {nodes} nodes)",
        spec.m,
        (midpoint(nodes) - prev).abs()
    )))
}

/// Total mass of the law (1 up to quadrature error).
pub fn km_mass(spec: &KMSpec) -> Result<f64> {
    if spec.is_atomic() {
        return Ok(1.0);
    }
    km_integral(spec, |_| 1.0)
}

/// v_m(θ) = ∫ e^{iθx} p_m(x) dx, real because p_m is even.
pub fn char_fn(spec: &KMSpec, theta: f64) -> Result<f64> {
    if spec.is_atomic() {
        return Ok(theta.cos());
    }
    km_integral(spec, |x| (theta * x).cos())
}

pub const ROOT_BRACKET_HI: f64 = 8.0;
pub const ROOT_SCAN_STEP: f64 = 0.05;
pub const ROOT_WIDTH: f64 = 1e-12;

/// Root of v_m together with its residual and final bracket.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThetaRoot {
    pub m: u64,
    pub theta: f64,
    pub residual: f64,
    pub bracket: (f64, f64),
    /// Which zero is returned; always the smallest positive one.
    pub convention: &'static str,
}

/// Smallest positive zero of v_m: scan [0, 8] in steps of 0.05, then bisect.
pub fn theta_root(m: u64) -> Result<ThetaRoot> {
    let spec = KMSpec::new(m)?;
    let v = |t: f64| char_fn(&spec, t);
    let steps = (ROOT_BRACKET_HI / ROOT_SCAN_STEP).round() as usize;
    let mut lo = 0.0;
    let mut v_lo = v(lo)?;
    for j in 1..=steps {
        let hi = j as f64 * ROOT_SCAN_STEP;
        let v_hi = v(hi)?;
        if v_lo == 0.0 {
            return Ok(ThetaRoot { m, theta: lo, residual: 0.0, bracket: (lo, lo), convention: "smallest-positive" });
        }
        if v_lo.signum() != v_hi.signum() {
            let (mut a, mut b, mut va) = (lo, hi, v_lo);
            while b - a > ROOT_WIDTH {
                let mid = 0.5 * (a + b);
                let vm = v(mid)?;
                if vm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if vm.signum() == va.signum() {
                    a = mid;
                    va = vm;
                } else {
                    b = mid;
                }
            }
            let theta = 0.5 * (a + b);
            return Ok(ThetaRoot { m, theta, residual: v(theta)?, bracket: (a, b), convention: "smallest-positive" });
        }
        lo = hi;
        v_lo = v_hi;
    }
    Err(Error::Numeric(format!("no sign change of v_{m} found in [0, {ROOT_BRACKET_HI}]")))
}

/// θ_m with v_m(θ_m) = 0.
pub fn find_theta(m: u64) -> Result<f64> {
    Ok(theta_root(m)?.theta)
}

/// Angle making e^{iθA} traceless for A built from `n_generators` phased
/// permutations. Such an A is the adjacency operator of a 2·n_generators-regular
/// graph, so its limiting spectral law is the Kesten–McKay law with parameter
/// 2·n_generators.
pub fn generator_angle(n_generators: usize) -> Result<f64> {
    if n_generators == 0 {
        return domain("need at least one generator");
    }
    find_theta(2 * n_generators as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    // First zeros of J0 and J1.
    const J0_1: f64 = 2.404_825_557_695_773;
    const J1_1: f64 = 3.831_705_970_207_512_3;

    #[test]
    fn density_values() {
        let s2 = KMSpec::new(2).unwrap();
        assert_eq!(km_density(&s2, 1.5), 0.0);
        let expect = 1.0 / (std::f64::consts::PI * 2f64.sqrt());
        assert!((km_density(&s2, 0.0) - expect).abs() < 1e-15);
        // Arcsine form for m = 2.
        for x in [0.1f64, 0.5, 1.0, 1.3] {
            let arcsine = 1.0 / (std::f64::consts::PI * (2.0 - x * x).sqrt());
            assert!((km_density(&s2, x) - arcsine).abs() < 1e-13);
        }
        let big = KMSpec::new(1_000_000).unwrap();
        assert!((km_density(&big, 0.0) - 1.0 / std::f64::consts::PI).abs() < 1e-6);
        assert!(KMSpec::new(0).is_err());
    }

    #[test]
    fn density_normalized() {
        for m in 1..=64 {
            let s = KMSpec::new(m).unwrap();
            assert!((km_mass(&s).unwrap() - 1.0).abs() < 1e-10, "m={m}");
        }
    }

    // Independent oracle: plain trapezoid on the arcsine form in the original variable
    // after x = sqrt(2) cos(u), which gives v_2(θ) = J0(sqrt(2) θ).
    fn bessel_j0(z: f64) -> f64 {
        let n = 4000;
        let h = std::f64::consts::PI / n as f64;
        let mut s = 0.5 * (z.cos() + (-z).cos());
        for j in 1..n {
            s += (z * (j as f64 * h).cos()).cos();
        }
        s * h / std::f64::consts::PI
    }

    #[test]
    fn char_fn_basics() {
        for m in [2, 3, 7, 30] {
            let s = KMSpec::new(m).unwrap();
            assert!((char_fn(&s, 0.0).unwrap() - 1.0).abs() < 1e-10);
            for t in [0.4, 1.1, 2.9] {
                assert!((char_fn(&s, t).unwrap() - char_fn(&s, -t).unwrap()).abs() < 1e-10);
            }
        }
        let s2 = KMSpec::new(2).unwrap();
        for t in [0.3, 1.0, 1.7, 2.5, 5.0] {
            assert!((char_fn(&s2, t).unwrap() - bessel_j0(2f64.sqrt() * t)).abs() < 1e-10);
        }
        assert!(char_fn(&s2, J0_1 / 2f64.sqrt()).unwrap().abs() < 1e-10);
    }

    #[test]
    fn roots_match_bessel_zeros() {
        let r2 = theta_root(2).unwrap();
        assert!((r2.theta - J0_1 / 2f64.sqrt()).abs() < 1e-9);
        assert!(r2.residual.abs() <= 1e-9);
        let big = find_theta(1_000_000).unwrap();
        assert!((big - J1_1 / 2.0).abs() < 1e-4);
        assert!((find_theta(1).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
    }

    #[test]
    fn roots_in_range_and_sign_change() {
        let mut prev = 0.0;
        for m in 2..=64 {
            let r = theta_root(m).unwrap();
            assert!(r.residual.abs() <= 1e-9, "m={m}");
            assert!((1.5..=2.0).contains(&r.theta), "m={m}: {}", r.theta);
            assert!(r.theta >= prev, "roots increase with m");
            prev = r.theta;
            let s = KMSpec::new(m).unwrap();
            let (a, b) = r.bracket;
            let (va, vb) = (char_fn(&s, a - 1e-9).unwrap(), char_fn(&s, b + 1e-9).unwrap());
            assert!(va > 0.0 && vb < 0.0, "m={m}");
        }
    }

    #[test]
    fn generator_angle_uses_degree() {
        assert_eq!(generator_angle(2).unwrap(), find_theta(4).unwrap());
        assert!(generator_angle(0).is_err());
    }
}
