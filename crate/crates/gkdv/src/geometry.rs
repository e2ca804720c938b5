//! Exterior algebra on the second-order jet space J²(ℝ,ℝ).
//!
//! Coordinates are ordered (z, y, y₁, y₂). Vector fields carry their
//! components as dual-number-capable closures so Lie brackets can lift one
//! coordinate at a time and read exact partial derivatives; k-forms store the
//! C(4,k) antisymmetric coefficients over strictly increasing multi-indices.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dual::{Dual, Dual1};
use crate::expr::{EvalError, NonlinearityExpr, ParamBindings};

/// Relative singular-value cutoff for numerical rank.
pub const RANK_SV_THRESHOLD: f64 = 1e-10;
/// Bracket-in-span least-squares residual tolerance (relative).
pub const BRACKET_RESIDUAL_TOL: f64 = 1e-8;
/// Agreement tolerance between contraction-engine and closed-form ω.
pub const OMEGA_MATCH_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeomError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("domain violation: {0}")]
    Domain(&'static str),
    #[error("contraction of a degree-0 form")]
    DegreeZero,
    #[error("contraction engine disagrees with closed form for {form}: |Δ|={delta:.3e}")]
    OmegaMismatch { form: &'static str, delta: f64 },
}

/// A point (z, y, y₁, y₂) of J²(ℝ,ℝ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JetPoint {
    pub z: f64,
    pub y: f64,
    pub y1: f64,
    pub y2: f64,
}

impl JetPoint {
    pub fn new(z: f64, y: f64, y1: f64, y2: f64) -> Self {
        JetPoint { z, y, y1, y2 }
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.z, self.y, self.y1, self.y2]
    }

    fn lifted(&self, seed: Option<usize>) -> [Dual1; 4] {
        let c = self.coords();
        std::array::from_fn(|i| Dual {
            re: c[i],
            eps: if seed == Some(i) { 1.0 } else { 0.0 },
        })
    }
}

impl fmt::Display for JetPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.z, self.y, self.y1, self.y2)
    }
}

type Component = Arc<dyn Fn(&[Dual1; 4]) -> Result<Dual1, GeomError> + Send + Sync>;

/// Vector field on J² with dual-number-evaluable components.
#[derive(Clone)]
pub struct VectorField {
    name: &'static str,
    components: [Component; 4],
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorField({})", self.name)
    }
}

impl VectorField {
    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn eval(&self, p: &JetPoint) -> Result<[f64; 4], GeomError> {
        let lifted = p.lifted(None);
        let mut out = [0.0; 4];
        for (i, c) in self.components.iter().enumerate() {
            out[i] = c(&lifted)?.re;
        }
        Ok(out)
    }

    /// Components and their ∂/∂(coordinate `seed`) derivatives at `p`.
    pub fn eval_lifted(&self, p: &JetPoint, seed: usize) -> Result<[Dual1; 4], GeomError> {
        let lifted = p.lifted(Some(seed));
        let mut out = [Dual::constant(0.0); 4];
        for (i, c) in self.components.iter().enumerate() {
            out[i] = c(&lifted)?;
        }
        Ok(out)
    }
}

fn constant_component(v: f64) -> Component {
    Arc::new(move |_| Ok(Dual::constant(v)))
}

/// The field Z = ∂_z + y₁∂_y + y₂∂_{y₁} + (c−a(y))y₁ ∂_{y₂} generated by the
/// travelling-wave ODE.
pub fn gkdv_vector_field(
    a: &NonlinearityExpr,
    c: f64,
    params: &ParamBindings,
) -> VectorField {
    let a = a.clone();
    let params = params.clone();
    VectorField {
        name: "Z",
        components: [
            constant_component(1.0),
            Arc::new(|p| Ok(p[2])),
            Arc::new(|p| Ok(p[3])),
            Arc::new(move |p| {
                let ay = a.eval_scalar(p[1], &params)?;
                Ok((Dual::constant(c) - ay) * p[2])
            }),
        ],
    }
}

/// The ordered fields X₁ = ∂_z, X₂ = ∂_{y₁} + (y₁/y)∂_{y₂}, X₃ = ∂_{y₂}.
pub fn cinf_structure() -> (VectorField, VectorField, VectorField) {
    let x1 = VectorField {
        name: "X1",
        components: [
            constant_component(1.0),
            constant_component(0.0),
            constant_component(0.0),
            constant_component(0.0),
        ],
    };
    let x2 = VectorField {
        name: "X2",
        components: [
            constant_component(0.0),
            constant_component(0.0),
            constant_component(1.0),
            Arc::new(|p| {
                if p[1].re == 0.0 {
                    return Err(GeomError::Domain("X2 requires y != 0"));
                }
                Ok(p[2] / p[1])
            }),
        ],
    };
    let x3 = VectorField {
        name: "X3",
        components: [
            constant_component(0.0),
            constant_component(0.0),
            constant_component(0.0),
            constant_component(1.0),
        ],
    };
    (x1, x2, x3)
}

// ---------------------------------------------------------------------------
// k-forms and contraction
// ---------------------------------------------------------------------------

fn subsets(k: usize) -> &'static [&'static [usize]] {
    match k {
        0 => &[&[]],
        1 => &[&[0], &[1], &[2], &[3]],
        2 => &[&[0, 1], &[0, 2], &[0, 3], &[1, 2], &[1, 3], &[2, 3]],
        3 => &[&[0, 1, 2], &[0, 1, 3], &[0, 2, 3], &[1, 2, 3]],
        4 => &[&[0, 1, 2, 3]],
        _ => panic!("degree out of range"),
    }
}

fn subset_rank(set: &[usize]) -> usize {
    subsets(set.len())
        .iter()
        .position(|s| *s == set)
        .expect("increasing multi-index")
}

/// Antisymmetric k-form value at a point, k ∈ {1,..,4}.
#[derive(Debug, Clone, PartialEq)]
pub struct KForm {
    degree: usize,
    coeffs: Vec<f64>,
}

impl KForm {
    pub fn new(degree: usize, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), subsets(degree).len());
        KForm { degree, coeffs }
    }

    /// The volume form dz ∧ dy ∧ dy₁ ∧ dy₂.
    pub fn volume() -> Self {
        KForm {
            degree: 4,
            coeffs: vec![1.0],
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of the basis form with the given increasing multi-index.
    pub fn coeff(&self, idx: &[usize]) -> f64 {
        self.coeffs[subset_rank(idx)]
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Interior product V ⌟ ω; lowers the degree by one.
pub fn interior_product(v: &[f64; 4], w: &KForm) -> Result<KForm, GeomError> {
    if w.degree == 0 {
        return Err(GeomError::DegreeZero);
    }
    let out_sets = subsets(w.degree - 1);
    let mut coeffs = vec![0.0; out_sets.len()];
    for (set, &c) in subsets(w.degree).iter().zip(&w.coeffs) {
        if c == 0.0 {
            continue;
        }
        for (pos, &i) in set.iter().enumerate() {
            let reduced: Vec<usize> = set
                .iter()
                .copied()
                .filter(|&j| j != i)
                .collect();
            let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
            coeffs[subset_rank(&reduced)] += sign * v[i] * c;
        }
    }
    Ok(KForm::new(w.degree - 1, coeffs))
}

/// Pairing ⟨ω, V⟩ of a 1-form with a vector (the degree-0 contraction).
pub fn pairing(w: &KForm, v: &[f64; 4]) -> f64 {
    assert_eq!(w.degree, 1);
    interior_product(v, w).expect("degree 1 input").coeffs[0]
}

// ---------------------------------------------------------------------------
// Lie brackets
// ---------------------------------------------------------------------------

/// [V,W]ᵢ = Σⱼ (Vⱼ ∂ⱼWᵢ − Wⱼ ∂ⱼVᵢ), partials from per-coordinate dual lifts.
pub fn lie_bracket(v: &VectorField, w: &VectorField, p: &JetPoint) -> Result<[f64; 4], GeomError> {
    let mut out = [0.0; 4];
    for j in 0..4 {
        let vj = v.eval_lifted(p, j)?;
        let wj = w.eval_lifted(p, j)?;
        for i in 0..4 {
            out[i] += vj[j].re * wj[i].eps - wj[j].re * vj[i].eps;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// ω-forms of the reduction
// ---------------------------------------------------------------------------

/// The three 1-forms obtained by contracting the volume form with
/// {Z, X₁, X₂, X₃} minus one field, cross-checked against their closed forms.
pub fn omega_forms(
    a: &NonlinearityExpr,
    c: f64,
    params: &ParamBindings,
    p: &JetPoint,
) -> Result<(KForm, KForm, KForm), GeomError> {
    let (forms, worst) = omega_forms_with_delta(a, c, params, p)?;
    if worst.1 > OMEGA_MATCH_TOL {
        return Err(GeomError::OmegaMismatch {
            form: worst.0,
            delta: worst.1,
        });
    }
    Ok(forms)
}

/// Largest relative deviation between the contraction engine and the closed
/// forms at `p`.
pub fn omega_mismatch(
    a: &NonlinearityExpr,
    c: f64,
    params: &ParamBindings,
    p: &JetPoint,
) -> Result<f64, GeomError> {
    Ok(omega_forms_with_delta(a, c, params, p)?.1 .1)
}

#[allow(clippy::type_complexity)]
fn omega_forms_with_delta(
    a: &NonlinearityExpr,
    c: f64,
    params: &ParamBindings,
    p: &JetPoint,
) -> Result<((KForm, KForm, KForm), (&'static str, f64)), GeomError> {
    if p.y == 0.0 {
        return Err(GeomError::Domain("omega forms require y != 0"));
    }
    let z = gkdv_vector_field(a, c, params);
    let (x1, x2, x3) = cinf_structure();
    let zp = z.eval(p)?;
    let x1p = x1.eval(p)?;
    let x2p = x2.eval(p)?;
    let x3p = x3.eval(p)?;

    let z_omega = interior_product(&zp, &KForm::volume())?;
    let w1 = interior_product(&x3p, &interior_product(&x2p, &z_omega)?)?;
    let w2 = interior_product(&x3p, &interior_product(&x1p, &z_omega)?)?;
    let w3 = interior_product(&x2p, &interior_product(&x1p, &z_omega)?)?;

    let ay = a.eval(p.y, params)?;
    let closed = [
        ("omega1", [-p.y1, 1.0, 0.0, 0.0]),
        ("omega2", [0.0, -p.y2, p.y1, 0.0]),
        (
            "omega3",
            [
                0.0,
                -p.y1 * (p.y2 / p.y + ay - c),
                p.y1 * p.y1 / p.y,
                -p.y1,
            ],
        ),
    ];
    let mut worst: (&'static str, f64) = ("omega1", 0.0);
    for (form, (name, expect)) in [&w1, &w2, &w3].iter().zip(closed) {
        let scale = expect.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        for (got, want) in form.coeffs().iter().zip(expect) {
            let delta = (got - want).abs() / scale;
            if delta > worst.1 {
                worst = (name, delta);
            }
        }
    }
    Ok(((w1, w2, w3), worst))
}

/// Residuals of the two determining equations with η = y₁/y substituted;
/// both vanish identically for the verified ansatz.
pub fn determining_residual(p: &JetPoint) -> Result<(f64, f64), GeomError> {
    if p.y == 0.0 {
        return Err(GeomError::Domain("determining equations require y != 0"));
    }
    // η(z, y, y₁) = y₁/y evaluated with one dual seed per argument
    let eta = |z: Dual1, y: Dual1, y1: Dual1| {
        let _ = z;
        y1 / y
    };
    let eta_val = eta(
        Dual::constant(p.z),
        Dual::constant(p.y),
        Dual::constant(p.y1),
    )
    .re;
    let eta_z = eta(
        Dual::variable(p.z),
        Dual::constant(p.y),
        Dual::constant(p.y1),
    )
    .eps;
    let eta_y = eta(
        Dual::constant(p.z),
        Dual::variable(p.y),
        Dual::constant(p.y1),
    )
    .eps;
    let eta_y1 = eta(
        Dual::constant(p.z),
        Dual::constant(p.y),
        Dual::variable(p.y1),
    )
    .eps;
    let r1 = eta_val * eta_val * p.y1 + eta_y * p.y1 * p.y1 + eta_y1 * p.y1 * p.y2
        - eta_val * p.y2
        + eta_z * p.y1;
    let r2 = eta_z;
    Ok((r1, r2))
}

// ---------------------------------------------------------------------------
// Involutivity report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct LevelCheck {
    /// Index i of the distribution S({Z, X₁, …, X_i}).
    pub level: usize,
    pub rank: usize,
    pub expected_rank: usize,
    /// Largest relative least-squares residual over the level's brackets.
    pub max_bracket_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointReport {
    pub point: JetPoint,
    pub levels: Vec<LevelCheck>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvolutivityReport {
    pub points: Vec<PointReport>,
    pub max_bracket_residual: f64,
    pub all_pass: bool,
}

/// Check, at each sample point, that S({Z, X₁, …, X_i}) has rank i+1 and that
/// every pairwise bracket stays in the span.
pub fn involutivity_report(
    a: &NonlinearityExpr,
    c: f64,
    params: &ParamBindings,
    samples: &[JetPoint],
) -> Result<InvolutivityReport, GeomError> {
    let z = gkdv_vector_field(a, c, params);
    let (x1, x2, x3) = cinf_structure();
    let fields = [z, x1, x2, x3];

    let mut points = Vec::with_capacity(samples.len());
    let mut global_max = 0.0f64;
    for p in samples {
        let mut levels = Vec::new();
        let mut point_pass = true;
        for i in 1..=3 {
            let members = &fields[..=i];
            let cols: Vec<[f64; 4]> = members
                .iter()
                .map(|f| f.eval(p))
                .collect::<Result<_, _>>()?;
            let mat = DMatrix::from_fn(4, cols.len(), |r, ccol| cols[ccol][r]);
            let svd = mat.clone().svd(true, true);
            let smax = svd.singular_values.max();
            let rank = svd
                .singular_values
                .iter()
                .filter(|&&s| s > RANK_SV_THRESHOLD * smax)
                .count();

            let mut max_res = 0.0f64;
            for vi in 0..members.len() {
                for wi in (vi + 1)..members.len() {
                    let br = lie_bracket(&members[vi], &members[wi], p)?;
                    let b = DVector::from_row_slice(&br);
                    let sol = svd
                        .solve(&b, RANK_SV_THRESHOLD * smax)
                        .expect("svd solve with computed u/v");
                    let res = (&mat * sol - &b).norm();
                    let rel = res / b.norm().max(1.0);
                    max_res = max_res.max(rel);
                }
            }
            let pass = rank == i + 1 && max_res <= BRACKET_RESIDUAL_TOL;
            point_pass &= pass;
            global_max = global_max.max(max_res);
            levels.push(LevelCheck {
                level: i,
                rank,
                expected_rank: i + 1,
                max_bracket_residual: max_res,
                pass,
            });
        }
        points.push(PointReport {
            point: *p,
            levels,
            pass: point_pass,
        });
    }
    let all_pass = points.iter().all(|p| p.pass);
    Ok(InvolutivityReport {
        points,
        max_bracket_residual: global_max,
        all_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kdv() -> (NonlinearityExpr, ParamBindings) {
        (parse("6*u").unwrap(), ParamBindings::new())
    }

    #[test]
    fn gkdv_field_values() {
        let (a, b) = kdv();
        let z = gkdv_vector_field(&a, 1.0, &b);
        let v = z.eval(&JetPoint::new(0.0, 1.0, 2.0, 3.0)).unwrap();
        assert_eq!(v, [1.0, 2.0, 3.0, -10.0]);

        // y1 = 0 kills the fourth component for any nonlinearity
        let v = z.eval(&JetPoint::new(3.0, 0.7, 0.0, 2.0)).unwrap();
        assert_eq!(v[3], 0.0);

        let a2 = parse("u^2").unwrap();
        let z2 = gkdv_vector_field(&a2, 2.0, &b);
        let v = z2.eval(&JetPoint::new(0.0, 1.0, 1.0, 0.0)).unwrap();
        assert_eq!(v, [1.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn structure_field_values() {
        let (x1, x2, x3) = cinf_structure();
        let p = JetPoint::new(0.0, 2.0, 4.0, 0.0);
        assert_eq!(x1.eval(&p).unwrap(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(x2.eval(&p).unwrap(), [0.0, 0.0, 1.0, 2.0]);
        assert_eq!(x3.eval(&p).unwrap(), [0.0, 0.0, 0.0, 1.0]);
        assert!(x2.eval(&JetPoint::new(0.0, 0.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn contraction_of_volume_leading_slot() {
        let w = interior_product(&[1.0, 0.0, 0.0, 0.0], &KForm::volume()).unwrap();
        assert_eq!(w.degree(), 3);
        assert_eq!(w.coeff(&[1, 2, 3]), 1.0);
        assert_eq!(w.coeff(&[0, 1, 2]), 0.0);
        assert_eq!(w.coeff(&[0, 1, 3]), 0.0);
        assert_eq!(w.coeff(&[0, 2, 3]), 0.0);
    }

    #[test]
    fn omega_forms_match_hand_values() {
        let (a, b) = kdv();
        let p = JetPoint::new(0.0, 1.0, 2.0, 3.0);
        let (w1, w2, w3) = omega_forms(&a, 1.0, &b, &p).unwrap();
        assert_eq!(w1.coeffs(), &[-2.0, 1.0, 0.0, 0.0]);
        assert_eq!(w2.coeffs(), &[0.0, -3.0, 2.0, 0.0]);
        // dy coefficient: -y1*(y2/y + a - c) = -2*(3 + 6 - 1) = -16
        assert_eq!(w3.coeffs(), &[0.0, -16.0, 4.0, -2.0]);
    }

    #[test]
    fn bracket_with_symmetry_vanishes() {
        let (a, b) = kdv();
        let z = gkdv_vector_field(&a, 1.0, &b);
        let (x1, x2, _) = cinf_structure();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let p = JetPoint::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(0.3..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            for v in lie_bracket(&x1, &z, &p).unwrap() {
                assert!(v.abs() < 1e-12, "[X1, Z] = {v}");
            }
            for v in lie_bracket(&x1, &x2, &p).unwrap() {
                assert!(v.abs() < 1e-12, "[X1, X2] = {v}");
            }
        }
    }

    /// Central finite-difference bracket used as an independent oracle.
    fn fd_bracket(v: &VectorField, w: &VectorField, p: &JetPoint, h: f64) -> [f64; 4] {
        let shift = |p: &JetPoint, j: usize, d: f64| {
            let mut c = p.coords();
            c[j] += d;
            JetPoint::new(c[0], c[1], c[2], c[3])
        };
        let mut out = [0.0; 4];
        let vp = v.eval(p).unwrap();
        let wp = w.eval(p).unwrap();
        for j in 0..4 {
            let wpj = w.eval(&shift(p, j, h)).unwrap();
            let wmj = w.eval(&shift(p, j, -h)).unwrap();
            let vpj = v.eval(&shift(p, j, h)).unwrap();
            let vmj = v.eval(&shift(p, j, -h)).unwrap();
            for i in 0..4 {
                out[i] += vp[j] * (wpj[i] - wmj[i]) / (2.0 * h)
                    - wp[j] * (vpj[i] - vmj[i]) / (2.0 * h);
            }
        }
        out
    }

    #[test]
    fn bracket_matches_finite_difference() {
        let (a, b) = kdv();
        let z = gkdv_vector_field(&a, 1.0, &b);
        let (_, x2, _) = cinf_structure();
        let p = JetPoint::new(0.0, 1.0, 2.0, 3.0);
        let exact = lie_bracket(&z, &x2, &p).unwrap();
        let approx = fd_bracket(&z, &x2, &p, 1e-6);
        for (e, f) in exact.iter().zip(approx) {
            assert_relative_eq!(e, &f, epsilon = 1e-6, max_relative = 1e-6);
        }
    }

    #[test]
    fn determining_equations_vanish() {
        let (r1, r2) = determining_residual(&JetPoint::new(0.0, 1.0, 2.0, 3.0)).unwrap();
        assert_eq!((r1, r2), (0.0, 0.0));
        let (r1, r2) = determining_residual(&JetPoint::new(5.0, -2.0, 1.0, 7.0)).unwrap();
        assert!(r1.abs() <= 1e-12 && r2.abs() <= 1e-12);
        // poor conditioning near y = 0 still cancels well
        let (r1, r2) = determining_residual(&JetPoint::new(0.0, 1e-3, 1.0, 1.0)).unwrap();
        assert!(r1.abs() <= 1e-9, "r1 = {r1}");
        assert_eq!(r2, 0.0);
    }

    /// Column-pivoted Gaussian elimination; independent rank oracle.
    fn pivoted_rank(cols: &[[f64; 4]], tol: f64) -> usize {
        let mut m: Vec<Vec<f64>> = (0..4)
            .map(|r| cols.iter().map(|c| c[r]).collect())
            .collect();
        let ncols = cols.len();
        let mut rank = 0;
        for row in 0..4 {
            if rank >= ncols {
                break;
            }
            // find pivot column with largest entry in this row-block
            let (mut best_c, mut best_v) = (rank, 0.0f64);
            for c in rank..ncols {
                if m[row][c].abs() > best_v {
                    best_v = m[row][c].abs();
                    best_c = c;
                }
            }
            if best_v <= tol {
                continue;
            }
            for r in m.iter_mut() {
                r.swap(rank, best_c);
            }
            for rr in (row + 1)..4 {
                let factor = m[rr][rank] / m[row][rank];
                for c in rank..ncols {
                    m[rr][c] -= factor * m[row][c];
                }
            }
            rank += 1;
        }
        rank
    }

    fn sample_points(seed: u64, n: usize, positive_y: bool) -> Vec<JetPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let sign = if positive_y || rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                JetPoint::new(
                    rng.gen_range(-3.0..3.0),
                    sign * rng.gen_range(0.1..2.0),
                    rng.gen_range(0.1..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                    rng.gen_range(-2.0..2.0),
                )
            })
            .collect()
    }

    #[test]
    fn involutivity_holds_for_kdv_and_mkdv() {
        let (a, b) = kdv();
        let pts = sample_points(11, 50, false);
        let rep = involutivity_report(&a, 1.0, &b, &pts).unwrap();
        assert!(rep.all_pass, "max residual {}", rep.max_bracket_residual);
        // level 3 is the full space: rank 4 everywhere
        for p in &rep.points {
            assert_eq!(p.levels[2].rank, 4);
        }

        let a2 = parse("u^2").unwrap();
        let rep = involutivity_report(&a2, -1.0, &b, &pts).unwrap();
        assert!(rep.all_pass);
    }

    #[test]
    fn svd_rank_agrees_with_pivoted_elimination() {
        let (a, b) = kdv();
        let z = gkdv_vector_field(&a, 1.0, &b);
        let (x1, x2, x3) = cinf_structure();
        let fields = [z, x1, x2, x3];
        for p in sample_points(13, 20, false) {
            for i in 1..=3usize {
                let cols: Vec<[f64; 4]> =
                    fields[..=i].iter().map(|f| f.eval(&p).unwrap()).collect();
                let oracle = pivoted_rank(&cols, 1e-9);
                let rep = involutivity_report(&a, 1.0, &b, &[p]).unwrap();
                assert_eq!(rep.points[0].levels[i - 1].rank, oracle, "at {p} level {i}");
            }
        }
    }

    proptest! {
        #[test]
        fn contraction_is_nilpotent(
            v in proptest::array::uniform4(-5.0f64..5.0),
            w in proptest::collection::vec(-5.0f64..5.0, 6),
        ) {
            let form = KForm::new(2, w);
            let once = interior_product(&v, &form).unwrap();
            let twice: f64 = pairing(&once, &v);
            prop_assert!(twice.abs() <= 1e-12 * form.max_abs().max(1.0) * (1.0 + v.iter().map(|x| x*x).sum::<f64>()));
        }

        #[test]
        fn bracket_is_antisymmetric(
            y in 0.2f64..2.0,
            y1 in -2.0f64..2.0,
            y2 in -2.0f64..2.0,
        ) {
            let (a, b) = kdv();
            let z = gkdv_vector_field(&a, 1.0, &b);
            let (_, x2, _) = cinf_structure();
            let p = JetPoint::new(0.0, y, y1, y2);
            let fwd = lie_bracket(&z, &x2, &p).unwrap();
            let bwd = lie_bracket(&x2, &z, &p).unwrap();
            for i in 0..4 {
                prop_assert!((fwd[i] + bwd[i]).abs() <= 1e-12);
            }
        }
    }
}
