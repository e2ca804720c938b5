//! Travelling-wave profiles from the cascade.
//!
//! A profile solves dy/dz = ±√R(y). Away from roots of R an embedded
//! Runge–Kutta pair integrates the branch directly; at a simple root the
//! square root is not Lipschitz and raw adaptivity stalls, so inside a guard
//! band |R| < band the integrator switches to the local model
//! y ≈ y* ∓ (q/4)(z − z*)² with q = |R'(y*)|, timing the crossing exactly
//! with the substitution-based H₃ quadrature, and flips the branch sign on
//! the far side. Double roots terminate legs asymptotically (solitary-wave
//! tails). Grid values between accepted steps come from monotone cubic
//! Hermite interpolation using the integrator's exact slopes; grid points
//! inside a guard band come from the local model itself.
//!
//! Two generation routes exist on purpose: this direct ODE route (primary
//! output) and inversion of H₃ on monotone segments ([`invert_h3`], the
//! cross-validation route used by tests and the verifier).

use serde::Serialize;

use crate::cascade::{CascadeError, CascadeFns};
use crate::rk::{integrate_adaptive, OdeError, OdeOptions};

/// |R| guard band, relative to the scanned scale of R.
const GUARD_BAND_REL: f64 = 1e-8;
/// Multiple of the guard width at which the local model hands back to RK.
const GUARD_EXIT_FACTOR: f64 = 2.0;
/// Threshold on |R'| (scaled) separating simple from double roots.
const MULTIPLICITY_REL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error("starting point y = {y} has R = {r:.6e} < 0")]
    NegativeStart { y: f64, r: f64 },
    #[error("z-span ({0}, {1}) must contain the anchor z = 0")]
    SpanExcludesAnchor(f64, f64),
    #[error("profile left the cascade y-domain near z = {z} (y = {y})")]
    LeftDomain { z: f64, y: f64 },
    #[error("step size underflow at z = {0}")]
    StepUnderflow(f64),
    #[error("step limit exceeded at z = {0}")]
    StepLimit(f64),
    #[error("grid needs at least two points")]
    GridTooSmall,
    #[error("requested z = {0} outside the profile range")]
    OutOfRange(f64),
    #[error("y = 0 on the grid at z = {0}; second prolongation undefined")]
    ZeroY(f64),
}

impl From<OdeError<CascadeError>> for ProfileError {
    fn from(e: OdeError<CascadeError>) -> Self {
        match e {
            OdeError::Rhs(c) => ProfileError::Cascade(c),
            OdeError::StepUnderflow(t) => ProfileError::StepUnderflow(t),
            OdeError::StepLimit(t) => ProfileError::StepLimit(t),
        }
    }
}

/// Branch sign of dy/dz = ±√R.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// Multiplicity class of a radicand root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RootKind {
    Simple,
    Double,
    Higher,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TurningPoint {
    pub y: f64,
    pub kind: RootKind,
    /// R'(y*) (zero-ish for non-simple roots).
    pub slope: f64,
}

/// Roots of R on an interval, sorted by y.
#[derive(Debug, Clone, Serialize)]
pub struct TurningPointSet {
    pub points: Vec<TurningPoint>,
    /// max |R| over the scan grid; tolerance reference for root polishing.
    pub r_scale: f64,
}

/// Locate all roots of R on `interval`: sign changes of R give odd roots,
/// touching minima of |R| (sign changes of R') give double roots.
pub fn find_turning_points(
    fns: &CascadeFns,
    interval: (f64, f64),
) -> Result<TurningPointSet, ProfileError> {
    const N_SCAN: usize = 1024;
    let (lo, hi) = interval;
    if !(lo < hi) {
        return Err(ProfileError::Cascade(CascadeError::InvalidDomain(lo, hi)));
    }
    let grid = crate::quad::linspace(lo, hi, N_SCAN + 1);
    let r: Vec<f64> = grid
        .iter()
        .map(|&y| fns.radicand(y))
        .collect::<Result<_, _>>()?;
    let r_scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let root_tol = 1e-12 * r_scale;

    let mut roots: Vec<f64> = Vec::new();
    // odd-multiplicity roots from sign changes of R
    for i in 0..N_SCAN {
        if r[i] == 0.0 {
            roots.push(grid[i]);
        } else if r[i].signum() != r[i + 1].signum() && r[i + 1] != 0.0 {
            roots.push(bisect(|y| fns.radicand(y), grid[i], grid[i + 1], 100)?);
        }
    }
    if *r.last().unwrap() == 0.0 {
        roots.push(hi);
    }
    // even-multiplicity roots: R' sign changes where R itself is near zero
    let mut d_prev = fns.radicand_deriv(grid[0])?;
    for i in 1..=N_SCAN {
        let d = fns.radicand_deriv(grid[i])?;
        if d_prev.signum() != d.signum() && d_prev != 0.0 {
            let ym = bisect(|y| fns.radicand_deriv(y), grid[i - 1], grid[i], 100)?;
            if fns.radicand(ym)?.abs() <= 1e-10 * r_scale {
                roots.push(ym);
            }
        }
        d_prev = d;
    }

    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (hi - lo));

    let mut points = Vec::with_capacity(roots.len());
    for y in roots {
        // one Newton polish where the slope allows it
        let mut y_star = y;
        let d = fns.radicand_deriv(y_star)?;
        if d.abs() > root_tol {
            let cand = y_star - fns.radicand(y_star)? / d;
            if cand.is_finite()
                && cand >= lo
                && cand <= hi
                && fns.radicand(cand)?.abs() < fns.radicand(y_star)?.abs()
            {
                y_star = cand;
            }
        }
        let slope = fns.radicand_deriv(y_star)?;
        let curvature = fns.radicand_second_deriv(y_star)?;
        let d_scale = (curvature.abs() * (hi - lo)).max(1.0);
        let kind = if slope.abs() > MULTIPLICITY_REL * d_scale {
            RootKind::Simple
        } else if curvature.abs() > MULTIPLICITY_REL * d_scale.max(r_scale) {
            RootKind::Double
        } else {
            RootKind::Higher
        };
        points.push(TurningPoint {
            y: y_star,
            kind,
            slope,
        });
    }
    Ok(TurningPointSet { points, r_scale })
}

fn bisect(
    f: impl Fn(f64) -> Result<f64, CascadeError>,
    mut a: f64,
    mut b: f64,
    iters: usize,
) -> Result<f64, ProfileError> {
    let mut fa = f(a)?;
    for _ in 0..iters {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fa.signum() == fm.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Profile metadata carried with the samples.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileMeta {
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub a_source: String,
    pub params: crate::expr::ParamBindings,
    pub y_start: f64,
    pub sign_start: Sign,
}

/// Sampled travelling-wave profile with prolonged jet coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct WaveProfile {
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub meta: ProfileMeta,
}

// one accepted integrator node (z ascending after assembly)
#[derive(Debug, Clone, Copy)]
struct Node {
    z: f64,
    y: f64,
    y1: f64,
}

// analytic window around a simple turning point
#[derive(Debug, Clone, Copy)]
struct TurnZone {
    z_enter: f64,
    z_exit: f64,
    z_star: f64,
    y_star: f64,
    q: f64,
    is_max: bool,
}

impl TurnZone {
    fn y_at(&self, z: f64) -> f64 {
        let d = z - self.z_star;
        if self.is_max {
            self.y_star - 0.25 * self.q * d * d
        } else {
            self.y_star + 0.25 * self.q * d * d
        }
    }

    fn y1_at(&self, z: f64) -> f64 {
        let d = z - self.z_star;
        if self.is_max {
            -0.5 * self.q * d
        } else {
            0.5 * self.q * d
        }
    }
}

/// Integrate dy/dz = ±√R(y) over `z_span` (which must contain the anchor
/// z = 0 where y = `y_start`), sampling on a uniform grid of `n` points.
/// `sign_start` selects the branch at the anchor; it is overridden when the
/// anchor sits on a root of R, where the root type dictates both directions.
pub fn integrate_profile(
    fns: &CascadeFns,
    z_span: (f64, f64),
    y_start: f64,
    sign_start: Sign,
    n: usize,
) -> Result<WaveProfile, ProfileError> {
    let (z_min, z_max) = z_span;
    if n < 2 {
        return Err(ProfileError::GridTooSmall);
    }
    if !(z_min <= 0.0 && z_max >= 0.0 && z_min < z_max) {
        return Err(ProfileError::SpanExcludesAnchor(z_min, z_max));
    }
    let cfg = fns.config();
    let tps = find_turning_points(fns, cfg.domain)?;
    let band = GUARD_BAND_REL * tps.r_scale;

    let r0 = fns.radicand(y_start)?;
    if r0 < -band {
        return Err(ProfileError::NegativeStart { y: y_start, r: r0 });
    }

    // classify a start on/near a root locally: double roots are equilibria,
    // simple roots open with the analytic parabola
    let start_root = if r0.abs() <= band {
        let d0 = fns.radicand_deriv(y_start)?;
        let d2 = fns.radicand_second_deriv(y_start)?;
        let span = cfg.domain.1 - cfg.domain.0;
        let d_scale = (d2.abs() * span).max(1.0);
        if d0.abs() <= MULTIPLICITY_REL * d_scale {
            return constant_profile(fns, z_span, y_start, n);
        }
        let mut y_star = y_start;
        for _ in 0..3 {
            let r = fns.radicand(y_star)?;
            let d = fns.radicand_deriv(y_star)?;
            if d == 0.0 {
                break;
            }
            y_star -= r / d;
        }
        let slope = fns.radicand_deriv(y_star)?;
        Some(TurningPoint {
            y: y_star,
            kind: RootKind::Simple,
            slope,
        })
    } else {
        None
    };

    let mut nodes: Vec<Node> = Vec::new();
    let mut zones: Vec<TurnZone> = Vec::new();

    // forward leg covers [0, z_max]; backward leg is run forward in ζ = −z
    // with the opposite branch sign and mirrored afterwards.
    let fwd = run_leg(fns, &tps, band, z_max, y_start, sign_start, start_root)?;
    let back_sign = if start_root.is_some() {
        sign_start // ignored by the leg, which restarts from the root
    } else {
        sign_start.flip()
    };
    let back = run_leg(fns, &tps, band, -z_min, y_start, back_sign, start_root)?;

    for s in back.nodes.iter().rev() {
        if s.z > 0.0 {
            nodes.push(Node {
                z: -s.z,
                y: s.y,
                y1: -s.y1,
            });
        }
    }
    nodes.extend(fwd.nodes.iter().copied());
    for zn in back.zones {
        zones.push(TurnZone {
            z_enter: -zn.z_exit,
            z_exit: -zn.z_enter,
            z_star: -zn.z_star,
            ..zn
        });
    }
    zones.extend(fwd.zones);

    // uniform output grid, filled from zones and monotone Hermite cells
    let mut z_grid = Vec::with_capacity(n);
    let mut y_out = Vec::with_capacity(n);
    let mut y1_out = Vec::with_capacity(n);
    for z in crate::quad::linspace(z_min, z_max, n) {
        let (y, y1) = sample_at(z, &nodes, &zones)?;
        z_grid.push(z);
        y_out.push(y);
        y1_out.push(y1);
    }

    let mut profile = WaveProfile {
        z: z_grid,
        y: y_out,
        y1: y1_out,
        y2: vec![0.0; n],
        meta: ProfileMeta {
            c: cfg.c,
            c1: 0.0,
            c2: cfg.c2,
            c3: cfg.c3,
            a_source: cfg.a.source().to_string(),
            params: cfg.params.clone(),
            y_start,
            sign_start,
        },
    };
    prolong(&mut profile, fns)?;
    Ok(profile)
}

fn constant_profile(
    fns: &CascadeFns,
    (z_min, z_max): (f64, f64),
    y0: f64,
    n: usize,
) -> Result<WaveProfile, ProfileError> {
    let cfg = fns.config();
    let y2 = if y0 == 0.0 {
        0.0 // continuous extension of ι₃ at the origin equilibrium
    } else {
        (2.0 * fns.h1(y0)? + 2.0 * cfg.c3) / (2.0 * y0)
    };
    let z = crate::quad::linspace(z_min, z_max, n);
    Ok(WaveProfile {
        y: vec![y0; n],
        y1: vec![0.0; n],
        y2: vec![y2; n],
        z,
        meta: ProfileMeta {
            c: cfg.c,
            c1: 0.0,
            c2: cfg.c2,
            c3: cfg.c3,
            a_source: cfg.a.source().to_string(),
            params: cfg.params.clone(),
            y_start: y0,
            sign_start: Sign::Minus,
        },
    })
}

struct Leg {
    nodes: Vec<Node>,
    zones: Vec<TurnZone>,
}

/// March one leg from (ζ=0, y0) to ζ_end ≥ 0.
fn run_leg(
    fns: &CascadeFns,
    tps: &TurningPointSet,
    band: f64,
    zeta_end: f64,
    y0: f64,
    sign0: Sign,
    start_root: Option<TurningPoint>,
) -> Result<Leg, ProfileError> {
    let (dom_lo, dom_hi) = fns.config().domain;
    let mut nodes = Vec::new();
    let mut zones = Vec::new();
    let mut zeta = 0.0f64;
    let mut y = y0;
    let mut s = sign0;

    if zeta_end <= 0.0 {
        let r = fns.radicand(y)?.max(0.0);
        nodes.push(Node {
            z: 0.0,
            y,
            y1: s.as_f64() * r.sqrt(),
        });
        return Ok(Leg { nodes, zones });
    }

    // a start on a simple root opens with the analytic exit
    if let Some(tp) = start_root {
        debug_assert_eq!(tp.kind, RootKind::Simple);
        let q = tp.slope.abs();
        let is_max = tp.slope < 0.0;
        let w_exit = GUARD_EXIT_FACTOR * band / q;
        let z_exit = 2.0 * (w_exit / q).sqrt();
        zones.push(TurnZone {
            z_enter: 0.0,
            z_exit,
            z_star: 0.0,
            y_star: tp.y,
            q,
            is_max,
        });
        let zone = zones[0];
        nodes.push(Node {
            z: 0.0,
            y: tp.y,
            y1: 0.0,
        });
        zeta = z_exit;
        y = zone.y_at(z_exit);
        s = if is_max { Sign::Minus } else { Sign::Plus };
        nodes.push(Node {
            z: zeta,
            y,
            y1: zone.y1_at(z_exit),
        });
        if zeta >= zeta_end {
            return Ok(Leg { nodes, zones });
        }
    } else {
        let r = fns.radicand(y)?.max(0.0);
        nodes.push(Node {
            z: 0.0,
            y,
            y1: s.as_f64() * r.sqrt(),
        });
    }

    let h_max = 0.02 / fns.config().c.abs().max(1.0).sqrt();
    let opts = OdeOptions {
        abs_tol: 1e-10,
        rel_tol: 1e-10,
        h_max,
        ..Default::default()
    };

    let mut guard_iters = 0usize;
    while zeta < zeta_end {
        // the next root of R in the direction of motion
        let target = next_root_in_direction(tps, y, s);
        let (approaching_simple, approaching_other) = match target {
            Some(tp) if tp.kind == RootKind::Simple => (Some(tp), None),
            Some(tp) => (None, Some(tp)),
            None => (None, None),
        };

        // enter the analytic window when close to a simple root
        if let Some(tp) = approaching_simple {
            let q = tp.slope.abs();
            let w = (y - tp.y).abs();
            if w <= GUARD_EXIT_FACTOR * band / q {
                // parabola crossing time; its relative defect is O(w·R''/R'²),
                // far below the profile accuracy budget at guard-band widths
                let dz_half = 2.0 * (w / q).sqrt();
                let z_star = zeta + dz_half;
                let z_exit = z_star + dz_half;
                zones.push(TurnZone {
                    z_enter: zeta,
                    z_exit,
                    z_star,
                    y_star: tp.y,
                    q,
                    is_max: tp.slope < 0.0,
                });
                nodes.push(Node {
                    z: z_star,
                    y: tp.y,
                    y1: 0.0,
                });
                s = s.flip();
                zeta = z_exit;
                let zone = *zones.last().unwrap();
                y = zone.y_at(z_exit);
                nodes.push(Node {
                    z: zeta,
                    y,
                    y1: zone.y1_at(z_exit),
                });
                guard_iters = 0;
                continue;
            }
        }

        // how far RK may run before the next proximity check
        let mut chunk = zeta_end - zeta;
        if let Some(tp) = approaching_simple {
            let q = tp.slope.abs();
            let w = (y - tp.y).abs();
            let w_guard = GUARD_EXIT_FACTOR * band / q;
            let dz_to_guard = 2.0 * ((w.sqrt() - w_guard.sqrt()) / q.sqrt()).max(0.0);
            chunk = chunk.min((0.4 * dz_to_guard).max(1e-3 * h_max));
            guard_iters += 1;
            if guard_iters > 4000 {
                return Err(ProfileError::StepLimit(zeta));
            }
        }

        let s_val = s.as_f64();
        let freeze = approaching_other.map(|tp| tp.y);
        let rhs = |_: f64, state: &[f64; 1]| -> Result<[f64; 1], CascadeError> {
            let yy = state[0];
            if let Some(y_dr) = freeze {
                // past an asymptotic (double) root: hold the equilibrium
                if (yy - y_dr) * s_val > 0.0 {
                    return Ok([0.0]);
                }
            }
            let r = fns.radicand(yy)?;
            Ok([s_val * r.max(0.0).sqrt()])
        };

        let t_end = zeta + chunk;
        let base_z = zeta;
        let result = integrate_adaptive(rhs, zeta, t_end, [y], &opts, |t, st| {
            if t > base_z {
                nodes.push(Node {
                    z: t,
                    y: st[0],
                    y1: f64::NAN, // slope filled below from R
                });
            }
        });
        match result {
            Ok(st) => {
                zeta = t_end;
                y = st[0];
            }
            Err(e) => return Err(e.into()),
        }

        // fill slopes for the new nodes
        for node in nodes.iter_mut().rev() {
            if node.z <= base_z {
                break;
            }
            if node.y1.is_nan() {
                let r = fns.radicand(node.y)?.max(0.0);
                node.y1 = s_val * r.sqrt();
            }
        }

        // domain exit check
        if y <= dom_lo || y >= dom_hi {
            return Err(ProfileError::LeftDomain { z: zeta, y });
        }
        // pin exactly onto an asymptotic root once within roundoff of it
        if let Some(tp) = approaching_other {
            if (y - tp.y).abs() <= 1e-12 * tp.y.abs().max(1.0) {
                y = tp.y;
            }
        }
    }

    Ok(Leg { nodes, zones })
}

fn next_root_in_direction(tps: &TurningPointSet, y: f64, s: Sign) -> Option<TurningPoint> {
    match s {
        Sign::Plus => tps
            .points
            .iter()
            .filter(|tp| tp.y > y)
            .min_by(|a, b| a.y.total_cmp(&b.y))
            .copied(),
        Sign::Minus => tps
            .points
            .iter()
            .filter(|tp| tp.y < y)
            .max_by(|a, b| a.y.total_cmp(&b.y))
            .copied(),
    }
}

/// Value and slope at z from the turn zones or a monotone Hermite cell.
fn sample_at(z: f64, nodes: &[Node], zones: &[TurnZone]) -> Result<(f64, f64), ProfileError> {
    for zone in zones {
        if z >= zone.z_enter && z <= zone.z_exit {
            return Ok((zone.y_at(z), zone.y1_at(z)));
        }
    }
    let idx = nodes.partition_point(|nd| nd.z < z);
    if idx == 0 {
        let first = &nodes[0];
        if (z - first.z).abs() <= 1e-9 {
            return Ok((first.y, first.y1));
        }
        return Err(ProfileError::OutOfRange(z));
    }
    if idx >= nodes.len() {
        let last = &nodes[nodes.len() - 1];
        if (z - last.z).abs() <= 1e-9 {
            return Ok((last.y, last.y1));
        }
        return Err(ProfileError::OutOfRange(z));
    }
    let (a, b) = (&nodes[idx - 1], &nodes[idx]);
    Ok(hermite(a, b, z))
}

/// Cubic Hermite with the Fritsch–Carlson monotonicity limiter on cells whose
/// data is monotone; cells containing an extremum keep the exact slopes.
fn hermite(a: &Node, b: &Node, z: f64) -> (f64, f64) {
    let h = b.z - a.z;
    if h <= 0.0 {
        return (a.y, a.y1);
    }
    let d = (b.y - a.y) / h;
    let (mut m0, mut m1) = (a.y1, b.y1);
    if d != 0.0 && m0 * d >= 0.0 && m1 * d >= 0.0 {
        let alpha = m0 / d;
        let beta = m1 / d;
        let s2 = alpha * alpha + beta * beta;
        if s2 > 9.0 {
            let tau = 3.0 / s2.sqrt();
            m0 = tau * alpha * d;
            m1 = tau * beta * d;
        }
    }
    let t = (z - a.z) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let y = h00 * a.y + h10 * h * m0 + h01 * b.y + h11 * h * m1;
    // derivative of the same polynomial
    let dh00 = (6.0 * t2 - 6.0 * t) / h;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = (-6.0 * t2 + 6.0 * t) / h;
    let dh11 = 3.0 * t2 - 2.0 * t;
    let y1 = dh00 * a.y + dh10 * m0 + dh01 * b.y + dh11 * m1;
    (y, y1)
}

/// Fill y₁ (signed √R along the stored branch) and y₂ (the second
/// prolongation (y₁² + 2H₁ + 2C₃)/(2y)) on the profile grid.
pub fn prolong(p: &mut WaveProfile, fns: &CascadeFns) -> Result<(), ProfileError> {
    let c3 = fns.config().c3;
    for i in 0..p.z.len() {
        let y = p.y[i];
        let r = fns.radicand(y)?.max(0.0);
        p.y1[i] = p.y1[i].signum() * r.sqrt();
        if y == 0.0 {
            return Err(ProfileError::ZeroY(p.z[i]));
        }
        p.y2[i] = (p.y1[i] * p.y1[i] + 2.0 * fns.h1(y)? + 2.0 * c3) / (2.0 * y);
    }
    Ok(())
}

/// Evaluate the travelling wave u(x, t) = y(x − ct − C₁) by monotone cubic
/// interpolation of the profile grid.
pub fn to_travelling_wave(
    p: &WaveProfile,
    c1: f64,
    requests: &[(f64, f64)],
) -> Result<Vec<f64>, ProfileError> {
    let n = p.z.len();
    if n < 2 {
        return Err(ProfileError::GridTooSmall);
    }
    let mut out = Vec::with_capacity(requests.len());
    for &(x, t) in requests {
        let z = x - p.meta.c * t - c1;
        if z < p.z[0] - 1e-12 || z > p.z[n - 1] + 1e-12 {
            return Err(ProfileError::OutOfRange(z));
        }
        let idx = p.z.partition_point(|&g| g < z).clamp(1, n - 1);
        let a = Node {
            z: p.z[idx - 1],
            y: p.y[idx - 1],
            y1: p.y1[idx - 1],
        };
        let b = Node {
            z: p.z[idx],
            y: p.y[idx],
            y1: p.y1[idx],
        };
        out.push(hermite(&a, &b, z.clamp(p.z[0], p.z[n - 1])).0);
    }
    Ok(out)
}

/// Default start for the standard single-hump orientation: the largest
/// simple turning point, leaving it on the negative branch when it is a
/// maximum (R decreasing).
pub fn default_start(fns: &CascadeFns) -> Result<Option<(f64, Sign)>, ProfileError> {
    let tps = find_turning_points(fns, fns.config().domain)?;
    Ok(tps
        .points
        .iter()
        .rev()
        .find(|tp| tp.kind == RootKind::Simple)
        .map(|tp| {
            (
                tp.y,
                if tp.slope < 0.0 { Sign::Minus } else { Sign::Plus },
            )
        }))
}

/// Quadrature-inversion route: on a monotone segment starting at
/// (z_ref, y_ref) with branch `sign`, find y(z) from s·H₃(y_ref → y) =
/// z − z_ref by bisection over `bracket`.
pub fn invert_h3(
    fns: &CascadeFns,
    y_ref: f64,
    sign: Sign,
    dz: f64,
    bracket: (f64, f64),
) -> Result<f64, ProfileError> {
    let s = sign.as_f64();
    let g = |y: f64| -> Result<f64, CascadeError> { Ok(s * fns.h3(y_ref, y)? - dz) };
    let (mut a, mut b) = bracket;
    let (ga, gb) = (g(a)?, g(b)?);
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    if ga.signum() == gb.signum() {
        return Err(ProfileError::OutOfRange(dz));
    }
    let mut fa = ga;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let fm = g(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}
