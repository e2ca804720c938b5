//! The quadrature cascade: H₁, H₂, the radicand R, and H₃.
//!
//! For a wave speed c and nonlinearity a(u) the chain is
//!
//! ```text
//! H₁(y) = ∫ y(c − a(y)) dy,    H₂(y) = ∫ H₁(y)/y² dy,
//! R(y)  = y(C₂ + 2H₂(y)) − 2C₃,
//! H₃(y) = ∫ dy / √R(y),
//! ```
//!
//! with the gauge H₁(y_base) = H₂(y_base) = 0. H₁ and H₂ are cumulative
//! adaptive quadratures with checkpoint caches, so H₂'s integrand reuses H₁
//! evaluations instead of re-integrating from the base every time. H₃ removes
//! the inverse-square-root endpoint behaviour at simple roots of R with the
//! substitution s = s* ∓ w² before handing the now-smooth integrand to the
//! panel engine. Double roots of R are rejected as H₃ endpoints: the integral
//! diverges there (an infinitely long solitary-wave tail).
//!
//! Derivatives of R come with the cache for free:
//! R'(y) = C₂ + 2H₂(y) + 2H₁(y)/y and R''(y) = 2(c − a(y)).

use std::sync::Arc;

use crate::expr::{EvalError, NonlinearityExpr, ParamBindings};
use crate::quad::{integrate, CumulativeIntegral, QuadError, QuadResult, QuadTol};

/// Relative threshold (against the local R scale) below which an endpoint
/// value of R is treated as a root of the radicand.
const ROOT_DETECT_REL: f64 = 1e-9;
/// Relative threshold on R' distinguishing simple from double roots.
const DOUBLE_ROOT_REL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CascadeError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("quadrature did not converge (error {0:.3e})")]
    QuadFailure(f64),
    #[error("invalid domain ({0}, {1})")]
    InvalidDomain(f64, f64),
    #[error("base point {0} outside the domain")]
    BaseOutsideDomain(f64),
    #[error("domain straddles 0 but H1(y)/y^2 does not extend continuously there")]
    SingularAcrossZero,
    #[error("y = {0} outside the domain")]
    OutsideDomain(f64),
    #[error("radicand negative at y = {y} (R = {value:.6e})")]
    NegativeRadicand { y: f64, value: f64 },
    #[error("double root of the radicand at y = {0}; H3 diverges (separatrix)")]
    DoubleRoot(f64),
}

impl From<QuadError<CascadeError>> for CascadeError {
    fn from(e: QuadError<CascadeError>) -> Self {
        match e {
            QuadError::Integrand(inner) => inner,
            QuadError::NoConvergence { error, .. } => CascadeError::QuadFailure(error),
        }
    }
}

impl From<QuadError<EvalError>> for CascadeError {
    fn from(e: QuadError<EvalError>) -> Self {
        match e {
            QuadError::Integrand(inner) => CascadeError::Eval(inner),
            QuadError::NoConvergence { error, .. } => CascadeError::QuadFailure(error),
        }
    }
}

/// Configuration of one cascade: nonlinearity, wave speed, integration
/// constants, y-domain and gauge base point.
#[derive(Debug, Clone)]
pub struct CascadeConfig {
    pub a: NonlinearityExpr,
    pub params: ParamBindings,
    /// Wave speed c of the travelling ansatz z = x − ct.
    pub c: f64,
    pub c2: f64,
    pub c3: f64,
    /// Open interval for y; must not straddle 0 unless H₁(y)/y² extends
    /// continuously to 0.
    pub domain: (f64, f64),
    /// Gauge base point with H₁ = H₂ = 0. `None` selects 0 when the H₂
    /// integrand extends continuously there, otherwise the domain midpoint.
    pub y_base: Option<f64>,
    pub quad_tol: QuadTol,
}

impl CascadeConfig {
    pub fn new(a: NonlinearityExpr, params: ParamBindings, c: f64) -> Self {
        CascadeConfig {
            a,
            params,
            c,
            c2: 0.0,
            c3: 0.0,
            domain: (-4.0, 4.0),
            y_base: None,
            quad_tol: QuadTol::default(),
        }
    }

    pub fn with_constants(mut self, c2: f64, c3: f64) -> Self {
        self.c2 = c2;
        self.c3 = c3;
        self
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }

    pub fn with_base(mut self, y_base: f64) -> Self {
        self.y_base = Some(y_base);
        self
    }
}

/// Numerically realized cascade functions for one configuration.
///
/// Evaluation is reentrant after construction; the checkpoint caches are
/// lock-guarded so concurrent reads are safe.
pub struct CascadeFns {
    config: CascadeConfig,
    y_base: f64,
    h1: Arc<CumulativeIntegral<CascadeError>>,
    h2: CumulativeIntegral<CascadeError>,
}

/// Build the cascade for a configuration.
pub fn build_cascade(cfg: &CascadeConfig) -> Result<CascadeFns, CascadeError> {
    let (lo, hi) = cfg.domain;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(CascadeError::InvalidDomain(lo, hi));
    }
    if !(cfg.quad_tol.abs > 0.0 && cfg.quad_tol.rel > 0.0) {
        return Err(CascadeError::QuadFailure(f64::NAN));
    }

    let touches_zero = lo <= 0.0 && hi >= 0.0;
    let a0_limit = if touches_zero {
        probe_zero_limit(cfg, lo, hi)
    } else {
        None
    };

    let y_base = match cfg.y_base {
        Some(b) => {
            if !(lo <= b && b <= hi) {
                return Err(CascadeError::BaseOutsideDomain(b));
            }
            b
        }
        None => {
            if touches_zero && a0_limit.is_some() {
                0.0
            } else if lo < 0.0 && hi > 0.0 {
                // a(u) is singular at an interior 0: the H2 integrand cannot
                // cross it no matter where the base sits
                return Err(CascadeError::SingularAcrossZero);
            } else {
                0.5 * (lo + hi)
            }
        }
    };

    // tighter per-hop tolerance keeps checkpoint-chain accumulation below the
    // user-facing target
    let hop_tol = QuadTol {
        abs: cfg.quad_tol.abs * 1e-2,
        rel: cfg.quad_tol.rel * 1e-2,
    };
    let min_gap = (hi - lo) / 256.0;

    let a = cfg.a.clone();
    let params = cfg.params.clone();
    let c = cfg.c;
    let h1_integrand = move |s: f64| -> Result<f64, CascadeError> {
        if s == 0.0 {
            // lim s(c − a(s)) = 0 whenever a is bounded near 0
            return Ok(0.0);
        }
        let a_s = a.eval(s, &params)?;
        Ok(s * (c - a_s))
    };
    let h1 = Arc::new(CumulativeIntegral::new(
        Arc::new(h1_integrand),
        y_base,
        hop_tol,
        min_gap,
    ));

    if lo < 0.0 && hi > 0.0 {
        // crossing 0 needs H1(0) = 0 (so that H1(s)/s² stays integrable) and
        // a finite limit of a(u) there
        if a0_limit.is_none() {
            return Err(CascadeError::SingularAcrossZero);
        }
        let h1_at_zero = h1.eval(0.0).map_err(CascadeError::from)?;
        let scale = h1
            .eval(lo)
            .map_err(CascadeError::from)?
            .abs()
            .max(h1.eval(hi).map_err(CascadeError::from)?.abs())
            .max(1.0);
        if h1_at_zero.abs() > 1e-10 * scale {
            return Err(CascadeError::SingularAcrossZero);
        }
    }

    let h1_for_h2 = Arc::clone(&h1);
    let h2_integrand = move |s: f64| -> Result<f64, CascadeError> {
        if s == 0.0 {
            return match a0_limit {
                Some(a0) => Ok(0.5 * (c - a0)),
                None => Err(CascadeError::SingularAcrossZero),
            };
        }
        Ok(h1_for_h2.eval(s)? / (s * s))
    };
    let h2 = CumulativeIntegral::new(Arc::new(h2_integrand), y_base, hop_tol, min_gap);

    Ok(CascadeFns {
        config: cfg.clone(),
        y_base,
        h1,
        h2,
    })
}

/// Symmetric default y-domain of half-width `w`, cut down to (0, w) when
/// a(u) is not evaluable at negative arguments (√u and similar).
pub fn natural_domain(a: &NonlinearityExpr, params: &ParamBindings, w: f64) -> (f64, f64) {
    let negatives_ok = [-0.75 * w, -0.25 * w]
        .iter()
        .all(|&u| a.eval(u, params).is_ok());
    if negatives_ok {
        (-w, w)
    } else {
        (0.0, w)
    }
}

/// Estimate of a(0) by symmetric probes; `None` when a(u) is not evaluable or
/// not settled near 0.
fn probe_zero_limit(cfg: &CascadeConfig, lo: f64, hi: f64) -> Option<f64> {
    let scale = (hi - lo).max(1.0);
    let mut vals = Vec::new();
    for sgn in [-1.0, 1.0] {
        for k in [1e-6, 2e-6] {
            let p = sgn * k * scale;
            if p > lo && p < hi && p != 0.0 {
                match cfg.a.eval(p, &cfg.params) {
                    Ok(v) => vals.push(v),
                    Err(_) => return None,
                }
            }
        }
    }
    if vals.is_empty() {
        return None;
    }
    let spread = vals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(mn, mx), &v| {
            (mn.min(v), mx.max(v))
        });
    let range = spread.1 - spread.0;
    let mid = 0.5 * (spread.0 + spread.1);
    // settled: small absolute variation between probes, and a bounded value
    if range <= 1e-3 * (1.0 + mid.abs()) && mid.abs() < 1e6 {
        Some(mid)
    } else {
        None
    }
}

impl CascadeFns {
    pub fn config(&self) -> &CascadeConfig {
        &self.config
    }

    /// Resolved gauge base point (H₁ = H₂ = 0 there).
    pub fn y_base(&self) -> f64 {
        self.y_base
    }

    fn check_domain(&self, y: f64) -> Result<(), CascadeError> {
        let (lo, hi) = self.config.domain;
        if y < lo || y > hi || !y.is_finite() {
            return Err(CascadeError::OutsideDomain(y));
        }
        Ok(())
    }

    /// H₁(y) = ∫ base..y s(c − a(s)) ds.
    pub fn h1(&self, y: f64) -> Result<f64, CascadeError> {
        self.check_domain(y)?;
        Ok(self.h1.eval(y)?)
    }

    /// H₂(y) = ∫ base..y H₁(s)/s² ds.
    pub fn h2(&self, y: f64) -> Result<f64, CascadeError> {
        self.check_domain(y)?;
        Ok(self.h2.eval(y)?)
    }

    /// R(y) = y(C₂ + 2H₂(y)) − 2C₃.
    pub fn radicand(&self, y: f64) -> Result<f64, CascadeError> {
        let h2 = self.h2(y)?;
        Ok(y * (self.config.c2 + 2.0 * h2) - 2.0 * self.config.c3)
    }

    /// R'(y) = C₂ + 2H₂(y) + 2H₁(y)/y (the y → 0 limit drops the last term).
    pub fn radicand_deriv(&self, y: f64) -> Result<f64, CascadeError> {
        let h2 = self.h2(y)?;
        let tail = if y == 0.0 {
            0.0 // H₁ = O(y²) near a base at 0
        } else {
            2.0 * self.h1(y)? / y
        };
        Ok(self.config.c2 + 2.0 * h2 + tail)
    }

    /// R''(y) = 2(c − a(y)), exact through the chain.
    pub fn radicand_second_deriv(&self, y: f64) -> Result<f64, CascadeError> {
        let a = self.config.a.eval(y, &self.config.params)?;
        Ok(2.0 * (self.config.c - a))
    }

    /// H₃ from `y_ref` to `y`: ∫ ds/√R(s), endpoints allowed to be simple
    /// roots of R (handled by the s = s* ∓ w² substitution).
    pub fn h3(&self, y_ref: f64, y: f64) -> Result<f64, CascadeError> {
        let r = self.h3_with_error(y_ref, y)?;
        Ok(r.value)
    }

    pub fn h3_with_error(&self, y_ref: f64, y: f64) -> Result<QuadResult, CascadeError> {
        self.check_domain(y_ref)?;
        self.check_domain(y)?;
        if y == y_ref {
            return Ok(QuadResult {
                value: 0.0,
                error: 0.0,
                evals: 0,
            });
        }
        let (lo, hi, sign) = if y_ref < y {
            (y_ref, y, 1.0)
        } else {
            (y, y_ref, -1.0)
        };
        let mid = 0.5 * (lo + hi);
        let r_mid = self.radicand(mid)?;
        if r_mid <= 0.0 {
            return Err(CascadeError::NegativeRadicand {
                y: mid,
                value: r_mid,
            });
        }
        let scale = r_mid
            .abs()
            .max(self.radicand(lo)?.abs())
            .max(self.radicand(hi)?.abs());

        self.reject_double_root(lo, hi, scale)?;

        // substitute at both endpoints; harmless when the endpoint is regular
        let lower = self.h3_half(lo, mid, scale, true)?;
        let upper = self.h3_half(hi, mid, scale, false)?;
        Ok(QuadResult {
            value: sign * (lower.value + upper.value),
            error: lower.error + upper.error,
            evals: lower.evals + upper.evals,
        })
    }

    fn reject_double_root(&self, lo: f64, hi: f64, scale: f64) -> Result<(), CascadeError> {
        for e in [lo, hi] {
            let r = self.radicand(e)?;
            if r.abs() <= ROOT_DETECT_REL * scale.max(1e-300) {
                let d = self.radicand_deriv(e)?;
                let d2 = self.radicand_second_deriv(e)?;
                let d_scale = (d2.abs() * (hi - lo)).max(1.0);
                if d.abs() <= DOUBLE_ROOT_REL * d_scale {
                    return Err(CascadeError::DoubleRoot(e));
                }
            }
        }
        Ok(())
    }

    /// ∫ endpoint..mid ds/√R as a w-integral with s = endpoint ± w².
    fn h3_half(
        &self,
        endpoint: f64,
        mid: f64,
        scale: f64,
        from_below: bool,
    ) -> Result<QuadResult, CascadeError> {
        let w_max = (mid - endpoint).abs().sqrt();
        let dir = if from_below { 1.0 } else { -1.0 };
        let integrand = |w: f64| -> Result<f64, CascadeError> {
            let s = endpoint + dir * w * w;
            if s == endpoint && w != 0.0 {
                // w² underflowed relative to the endpoint; use the root limit
                let d = self.radicand_deriv(endpoint)?;
                return Ok(2.0 / d.abs().sqrt());
            }
            let r = self.radicand(s)?;
            if r <= 0.0 {
                // at the endpoint itself a tiny negative value is roundoff of
                // a root; elsewhere it violates the precondition
                if (s - endpoint).abs() <= 1e-12 * (endpoint.abs() + 1.0)
                    || r.abs() <= ROOT_DETECT_REL * scale
                {
                    let d = self.radicand_deriv(endpoint)?;
                    return Ok(2.0 * w / (d.abs() * w * w).sqrt().max(1e-300));
                }
                return Err(CascadeError::NegativeRadicand { y: s, value: r });
            }
            Ok(2.0 * w / r.sqrt())
        };
        Ok(integrate(integrand, 0.0, w_max, self.config.quad_tol)?)
    }
}

/// Result of checking that a base-point change is absorbed by constant shifts
/// of (C₂, C₃).
#[derive(Debug, Clone, serde::Serialize)]
pub struct GaugeShiftReport {
    pub delta_c2: f64,
    pub delta_c3: f64,
    pub max_rel_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Verify R(y; cfg, C₂+ΔC₂, C₃+ΔC₃) = R(y; cfg') on the domain overlap, with
/// (ΔC₂, ΔC₃) computed from the base-point change.
pub fn gauge_shift_check(
    cfg: &CascadeConfig,
    cfg_shifted: &CascadeConfig,
) -> Result<GaugeShiftReport, CascadeError> {
    const TOL: f64 = 1e-9;
    let fns = build_cascade(cfg)?;
    let fns_shifted = build_cascade(cfg_shifted)?;
    let b = fns.y_base();
    let b2 = fns_shifted.y_base();

    // R_b2(y; C2+d2, C3+d3) = R_b(y; C2, C3)
    let (d2, d3) = if b == b2 {
        (0.0, 0.0)
    } else if b2 != 0.0 {
        let h1_at = fns.h1(b2)?;
        let h2_at = fns.h2(b2)?;
        (2.0 * h2_at + 2.0 * h1_at / b2, h1_at)
    } else {
        // symmetric relation evaluated from the shifted side
        let h1_at = fns_shifted.h1(b)?;
        let h2_at = fns_shifted.h2(b)?;
        (-(2.0 * h2_at + 2.0 * h1_at / b), -h1_at)
    };

    let lo = cfg.domain.0.max(cfg_shifted.domain.0);
    let hi = cfg.domain.1.min(cfg_shifted.domain.1);
    if !(lo < hi) {
        return Err(CascadeError::InvalidDomain(lo, hi));
    }
    let pad = 0.02 * (hi - lo);
    let (lo, hi) = (lo + pad, hi - pad);

    let mut max_dev = 0.0f64;
    for y in crate::quad::linspace(lo, hi, 200) {
        let r_here = fns.radicand(y)?;
        let h2s = fns_shifted.h2(y)?;
        let r_shifted = y * (cfg_shifted.c2 + d2 + 2.0 * h2s) - 2.0 * (cfg_shifted.c3 + d3);
        let dev = (r_here - r_shifted).abs() / r_here.abs().max(1.0);
        max_dev = max_dev.max(dev);
    }
    Ok(GaugeShiftReport {
        delta_c2: d2,
        delta_c3: d3,
        max_rel_deviation: max_dev,
        tolerance: TOL,
        pass: max_dev <= TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use approx::assert_relative_eq;

    fn kdv_cascade(c: f64, c2: f64, c3: f64) -> CascadeFns {
        let cfg = CascadeConfig::new(parse("6*u").unwrap(), ParamBindings::new(), c)
            .with_constants(c2, c3)
            .with_domain(-2.0, 2.0);
        build_cascade(&cfg).unwrap()
    }

    #[test]
    fn h1_kdv_matches_antiderivative() {
        // oracle: ∫ s(c − 6s) ds = c y²/2 − 2y³ from base 0
        let fns = kdv_cascade(1.0, 0.0, 0.0);
        assert_eq!(fns.y_base(), 0.0);
        assert_relative_eq!(fns.h1(1.0).unwrap(), -1.5, epsilon = 1e-12);
        for y in [-1.5f64, -0.3, 0.2, 0.9, 1.8] {
            let oracle = 0.5 * y * y - 2.0 * y.powi(3);
            assert_relative_eq!(fns.h1(y).unwrap(), oracle, epsilon = 1e-11);
        }
        assert_eq!(fns.h1(0.0).unwrap(), 0.0);
        assert_eq!(fns.h2(0.0).unwrap(), 0.0);
    }

    #[test]
    fn h2_mkdv_matches_antiderivative() {
        // oracle: H₁ = cy²/2 − y⁴/4, H₂ = ∫ H₁/s² = cy/2 − y³/12
        let cfg = CascadeConfig::new(parse("u^2").unwrap(), ParamBindings::new(), 1.0)
            .with_domain(-2.5, 2.5);
        let fns = build_cascade(&cfg).unwrap();
        assert_relative_eq!(fns.h2(1.0).unwrap(), 5.0 / 12.0, epsilon = 1e-11);
        for y in [-2.0f64, -0.7, 0.4, 1.3, 2.2] {
            let oracle = 0.5 * y - y.powi(3) / 12.0;
            assert_relative_eq!(fns.h2(y).unwrap(), oracle, epsilon = 1e-10);
        }
    }

    #[test]
    fn radicand_matches_polynomials() {
        // KdV family identity: R = −2y³ + cy² + C₂y − 2C₃
        let fns = kdv_cascade(1.0, 0.0, 0.0);
        assert_relative_eq!(fns.radicand(0.3).unwrap(), 0.036, epsilon = 1e-12);
        assert!(fns.radicand(0.5).unwrap().abs() <= 1e-12);

        let fns = kdv_cascade(1.0, 0.3, 0.1);
        for y in [-1.5f64, -0.4, 0.25, 0.8, 1.9] {
            let oracle = -2.0 * y.powi(3) + y * y + 0.3 * y - 0.2;
            assert_relative_eq!(fns.radicand(y).unwrap(), oracle, epsilon = 1e-10);
        }

        // mKdV: 36 R = −6y⁴ + 36cy² + 36C₂y − 72C₃
        let cfg = CascadeConfig::new(parse("u^2").unwrap(), ParamBindings::new(), 1.0)
            .with_domain(-2.5, 2.5);
        let fns = build_cascade(&cfg).unwrap();
        assert_relative_eq!(fns.radicand(1.0).unwrap(), 5.0 / 6.0, epsilon = 1e-11);
    }

    #[test]
    fn radicand_derivatives_match_closed_forms() {
        let fns = kdv_cascade(1.0, 0.3, 0.1);
        for y in [-1.2f64, -0.3, 0.45, 1.4] {
            let d_oracle = -6.0 * y * y + 2.0 * y + 0.3;
            let d2_oracle = -12.0 * y + 2.0;
            assert_relative_eq!(fns.radicand_deriv(y).unwrap(), d_oracle, epsilon = 1e-9);
            assert_relative_eq!(
                fns.radicand_second_deriv(y).unwrap(),
                d2_oracle,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn h3_matches_sech_inversion() {
        // oracle: y(z) = (c/2) sech²(√c z/2) inverts to z = (2/√c) arccosh(√(c/2y))
        let fns = kdv_cascade(1.0, 0.0, 0.0);
        let z_of = |y: f64| 2.0 * (1.0 / (2.0 * y)).sqrt().acosh();
        for y in [0.45, 0.393224, 0.2, 0.05] {
            let got = fns.h3(0.5, y).unwrap();
            assert_relative_eq!(got.abs(), z_of(y), epsilon = 1e-8, max_relative = 1e-8);
            assert!(got < 0.0, "descending from the peak");
        }
        // the spot value: |H3(0.5 → 0.393224)| ≈ 1
        assert_relative_eq!(fns.h3(0.5, 0.393224).unwrap().abs(), 1.0, epsilon = 3e-5);
        assert_eq!(fns.h3(0.4, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn h3_rejects_double_root_endpoint() {
        let fns = kdv_cascade(1.0, 0.0, 0.0);
        // y = 0 is a double root of c y² − 2y³: the tail is infinitely long
        assert!(matches!(
            fns.h3(0.5, 0.0),
            Err(CascadeError::DoubleRoot(_))
        ));
        // approaching it the integral grows without bound
        let near = fns.h3(0.5, 1e-2).unwrap().abs();
        let nearer = fns.h3(0.5, 1e-4).unwrap().abs();
        assert!(nearer > near + 2.0, "tail growth {near} -> {nearer}");
    }

    #[test]
    fn h3_between_two_simple_roots_is_finite() {
        // c = 1, C2 = 0.1, C3 = 0.01: R = −2y³+y²+0.1y−0.02 has two simple
        // positive roots bracketing a periodic orbit
        let fns = kdv_cascade(1.0, 0.1, 0.01);
        let mut roots = Vec::new();
        let mut prev = (0.05, fns.radicand(0.05).unwrap());
        for i in 1..=200 {
            let y = 0.05 + 0.65 * i as f64 / 200.0;
            let r = fns.radicand(y).unwrap();
            if prev.1.signum() != r.signum() {
                let (mut a, mut b) = (prev.0, y);
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    let rm = fns.radicand(m).unwrap();
                    if rm.signum() == fns.radicand(a).unwrap().signum() {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            prev = (y, r);
        }
        assert_eq!(roots.len(), 2, "roots {roots:?}");
        let half_period = fns.h3(roots[0], roots[1]).unwrap();
        assert!(half_period.is_finite() && half_period > 0.0);
        // splitting at an interior point agrees with the whole
        let mid = 0.5 * (roots[0] + roots[1]);
        let split = fns.h3(roots[0], mid).unwrap() + fns.h3(mid, roots[1]).unwrap();
        assert_relative_eq!(half_period, split, max_relative = 1e-8);
    }

    #[test]
    fn gauge_shift_absorbed_by_constants() {
        // a nonzero base keeps H2 off the negative side, so compare on (0, 2)
        let base = CascadeConfig::new(parse("6*u").unwrap(), ParamBindings::new(), 1.0)
            .with_domain(0.0, 2.0);
        let shifted = base.clone().with_base(0.1);
        let rep = gauge_shift_check(&base, &shifted).unwrap();
        assert!(rep.pass, "max deviation {}", rep.max_rel_deviation);

        // identical configurations shift by nothing
        let rep = gauge_shift_check(&base, &base.clone()).unwrap();
        assert_eq!((rep.delta_c2, rep.delta_c3), (0.0, 0.0));
        assert!(rep.pass);

        // Gardner with α=1, β=2 and nonzero bases on both sides
        let params = ParamBindings::new().set("alpha", 1.0).set("beta", 2.0);
        let g = CascadeConfig::new(parse("2*alpha*u-beta*u^2").unwrap(), params, 1.0)
            .with_domain(0.0, 1.5);
        let rep = gauge_shift_check(&g.clone().with_base(0.05), &g.with_base(0.2)).unwrap();
        assert!(rep.pass, "max deviation {}", rep.max_rel_deviation);
    }

    #[test]
    fn log_kdv_needs_positive_domain() {
        let a = parse("u*ln(abs(u))").unwrap();
        let cfg = CascadeConfig::new(a.clone(), ParamBindings::new(), 1.0).with_domain(0.05, 3.0);
        let fns = build_cascade(&cfg).unwrap();
        // base falls at the midpoint since the domain excludes 0
        assert_relative_eq!(fns.y_base(), 1.525);
        assert!(fns.h1(1.0).unwrap().is_finite());
        // u·ln|u| extends continuously to 0, so a straddling domain with the
        // automatic base still builds
        let wide = CascadeConfig::new(a, ParamBindings::new(), 1.0).with_domain(-1.0, 1.0);
        assert_eq!(build_cascade(&wide).unwrap().y_base(), 0.0);
        // but a nonzero base across 0 leaves H1(0) ≠ 0 and is rejected
        let bad = CascadeConfig::new(parse("6*u").unwrap(), ParamBindings::new(), 1.0)
            .with_domain(-1.0, 1.0)
            .with_base(0.5);
        assert!(matches!(
            build_cascade(&bad),
            Err(CascadeError::SingularAcrossZero)
        ));
    }

    #[test]
    fn schamel_base_at_zero_boundary() {
        let params = ParamBindings::new().set("alpha", 1.0).set("beta", 1.0);
        let cfg = CascadeConfig::new(parse("alpha*sqrt(u)+beta*u").unwrap(), params, 1.0)
            .with_domain(0.0, 3.0);
        let fns = build_cascade(&cfg).unwrap();
        assert_eq!(fns.y_base(), 0.0);
        // oracle: H₁ = cy²/2 − (2α/5)y^{5/2} − (β/3)y³
        for y in [0.3f64, 1.0, 2.4] {
            let oracle = 0.5 * y * y - 0.4 * y.powf(2.5) - y.powi(3) / 3.0;
            assert_relative_eq!(fns.h1(y).unwrap(), oracle, epsilon = 1e-10);
        }
    }

    #[test]
    fn refinement_stays_within_tolerance_budget() {
        let mk = |tol: QuadTol| {
            let cfg = CascadeConfig::new(
                parse("alpha*sqrt(u)+beta*u").unwrap(),
                ParamBindings::new().set("alpha", 1.0).set("beta", 1.0),
                1.0,
            )
            .with_domain(0.0, 3.0);
            build_cascade(&CascadeConfig { quad_tol: tol, ..cfg }).unwrap()
        };
        let loose = mk(QuadTol {
            abs: 1e-12,
            rel: 1e-10,
        });
        let tight = mk(QuadTol {
            abs: 5e-13,
            rel: 5e-11,
        });
        for y in [0.4, 1.1, 2.7] {
            let d1 = (loose.h1(y).unwrap() - tight.h1(y).unwrap()).abs();
            let d2 = (loose.h2(y).unwrap() - tight.h2(y).unwrap()).abs();
            assert!(d1 <= 1e-10 && d2 <= 1e-10, "d1 {d1} d2 {d2}");
        }
    }

    #[test]
    fn h3_monotone_on_positive_component() {
        let fns = kdv_cascade(1.0, 0.0, 0.0);
        // component (0, 0.5) of {R > 0}; H3 measured from 0.25 must increase
        let mut prev = f64::NEG_INFINITY;
        for i in 1..40 {
            let y = 0.02 + (0.48 - 0.02) * i as f64 / 40.0;
            let v = fns.h3(0.25, y).unwrap();
            assert!(v > prev, "H3 not increasing at y={y}");
            prev = v;
        }
    }
}
