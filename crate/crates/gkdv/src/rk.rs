//! Embedded Dormand–Prince 5(4) stepper with adaptive step control.

/// Stepper options. Tolerances enter the per-step error norm
/// `sqrt(mean((e_i / (abs_tol + rel_tol·|y_i|))²))`.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OdeError<E> {
    #[error("right-hand side error: {0}")]
    Rhs(E),
    #[error("step size underflow at t={0}")]
    StepUnderflow(f64),
    #[error("step limit exceeded at t={0}")]
    StepLimit(f64),
}

// Dormand–Prince coefficients.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// 5th-order weights equal the last A row (FSAL); 4th-order weights below.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0` to `t_end` (either direction), calling
/// `observe(t, y)` after every accepted step (and once at the start).
/// Returns the final state.
pub fn integrate_adaptive<const N: usize, E>(
    mut f: impl FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
    t0: f64,
    t_end: f64,
    y0: [f64; N],
    opts: &OdeOptions,
    mut observe: impl FnMut(f64, &[f64; N]),
) -> Result<[f64; N], OdeError<E>> {
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    observe(t, &y);
    if t0 == t_end {
        return Ok(y);
    }

    let mut k1 = f(t, &y).map_err(OdeError::Rhs)?;
    let mut h = opts
        .h_init
        .unwrap_or_else(|| initial_step(&k1, &y, opts))
        .min(opts.h_max)
        .min((t_end - t0).abs())
        * dir;

    for _ in 0..opts.max_steps {
        if (t - t_end) * dir >= 0.0 {
            return Ok(y);
        }
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }
        if h.abs() < f64::EPSILON * t.abs().max(1.0) {
            return Err(OdeError::StepUnderflow(t));
        }

        let mut k = [[0.0; N]; 7];
        k[0] = k1;
        let mut failed = false;
        for s in 0..6 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s + 1) {
                let a = A[s][j];
                if a != 0.0 {
                    for i in 0..N {
                        ys[i] += h * a * kj[i];
                    }
                }
            }
            match f(t + C[s] * h, &ys) {
                Ok(v) => k[s + 1] = v,
                Err(_) if h.abs() > 1e-12 => {
                    // stage left the domain; retry with a shorter step
                    failed = true;
                    break;
                }
                Err(e) => return Err(OdeError::Rhs(e)),
            }
        }
        if failed {
            h *= 0.25;
            continue;
        }

        // 5th-order solution (A[5] row) and embedded error
        let mut y5 = y;
        for (j, kj) in k.iter().enumerate().take(6) {
            let b = A[5][j];
            if b != 0.0 {
                for i in 0..N {
                    y5[i] += h * b * kj[i];
                }
            }
        }
        let mut err_norm = 0.0;
        for i in 0..N {
            let mut e4 = 0.0;
            for (j, kj) in k.iter().enumerate() {
                let db = (if j < 6 { A[5][j] } else { 0.0 }) - B4[j];
                e4 += db * kj[i];
            }
            let e = h * e4;
            let scale = opts.abs_tol + opts.rel_tol * y[i].abs().max(y5[i].abs());
            err_norm += (e / scale) * (e / scale);
        }
        err_norm = (err_norm / N as f64).sqrt();

        if err_norm <= 1.0 {
            t += h;
            y = y5;
            k1 = k[6]; // FSAL
            observe(t, &y);
            let grow = if err_norm == 0.0 {
                5.0
            } else {
                (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * grow).clamp(-opts.h_max, opts.h_max);
        } else {
            h *= (0.9 * err_norm.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    Err(OdeError::StepLimit(t))
}

fn initial_step<const N: usize>(k1: &[f64; N], y0: &[f64; N], opts: &OdeOptions) -> f64 {
    let d0: f64 = y0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let d1: f64 = k1.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = if d1 > 1e-10 {
        0.01 * (d0.max(1e-6) / d1)
    } else {
        1e-6
    };
    h.max(1e-10).min(opts.h_max) * opts.rel_tol.powf(0.0).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    type NoErr = std::convert::Infallible;

    #[test]
    fn exponential_decay() {
        let y = integrate_adaptive(
            |_, y: &[f64; 1]| Ok::<_, NoErr>([-y[0]]),
            0.0,
            5.0,
            [1.0],
            &OdeOptions::default(),
            |_, _| {},
        )
        .unwrap();
        assert_relative_eq!(y[0], (-5.0f64).exp(), max_relative = 1e-8);
    }

    #[test]
    fn harmonic_oscillator_energy_drift() {
        let opts = OdeOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            ..Default::default()
        };
        let mut max_drift: f64 = 0.0;
        let e0 = 0.5;
        integrate_adaptive(
            |_, y: &[f64; 2]| Ok::<_, NoErr>([y[1], -y[0]]),
            0.0,
            50.0,
            [1.0, 0.0],
            &opts,
            |_, y| {
                let e = 0.5 * (y[0] * y[0] + y[1] * y[1]);
                max_drift = max_drift.max((e - e0).abs());
            },
        )
        .unwrap();
        assert!(max_drift < 1e-9, "energy drift {max_drift}");
    }

    #[test]
    fn backward_integration() {
        let y = integrate_adaptive(
            |_, y: &[f64; 1]| Ok::<_, NoErr>([y[0]]),
            0.0,
            -2.0,
            [1.0],
            &OdeOptions::default(),
            |_, _| {},
        )
        .unwrap();
        assert_relative_eq!(y[0], (-2.0f64).exp(), max_relative = 1e-8);
    }

    #[test]
    fn tightening_tolerance_reduces_error() {
        let run = |tol: f64| {
            let y = integrate_adaptive(
                |t, y: &[f64; 1]| Ok::<_, NoErr>([t.cos() * y[0]]),
                0.0,
                10.0,
                [1.0],
                &OdeOptions {
                    abs_tol: tol,
                    rel_tol: tol,
                    ..Default::default()
                },
                |_, _| {},
            )
            .unwrap();
            (y[0] - 10.0f64.sin().exp()).abs()
        };
        let loose = run(1e-6);
        let tight = run(1e-10);
        assert!(tight < loose, "loose {loose} tight {tight}");
        assert!(tight < 1e-8);
    }
}
