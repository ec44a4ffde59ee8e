//! Projective flow on the vertical cone of a geodesic: the linear pair
//! system `x' = -y`, `y' = K(t) x` driven by a curvature profile along the
//! orbit, together with the diagnostics built on top of it — vertical
//! crossings (conjugate times), winding, and the asymptotic Riccati slopes
//! whose separation certifies hyperbolic behaviour for the sampled geodesic.
//!
//! The covector `(x, y)` lives in the plane spanned by the horizontal and
//! vertical co-frame; the co-horizontal axis is `x = 0` and the co-vertical
//! axis is `y = 0`.  Whenever `x` is nonzero the slope `r = -y/x` obeys the
//! scalar Riccati equation `r' + r^2 + K = 0`, which is the form all limit
//! and consistency checks below use.

use serde::{Deserialize, Serialize};

use crate::error::{GtlError, Result};

/// Mixed absolute/relative tolerance for the adaptive integrator.
pub const INTEGRATOR_TOL: f64 = 1e-10;

/// A crossing with `|x'| = |y|` below this value is flagged as a suspected
/// tangency rather than counted.
pub const CROSSING_TOL: f64 = 1e-8;

/// Minimum separation of the asymptotic slopes for a per-geodesic
/// hyperbolicity verdict.
pub const GAP_TOL: f64 = 1e-6;

/// Largest step the integrator will take, so that sampled output resolves
/// every oscillation of the moderate-curvature profiles it is used on.
const MAX_STEP: f64 = 0.05;

/// Curvature along the orbit as a function of flow time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CurvatureProfile {
    /// `K(t) = c`.
    Constant(f64),
    /// `K(t) = offset + amp * sin(freq * t + phase)`.
    Sinusoid {
        offset: f64,
        amp: f64,
        freq: f64,
        phase: f64,
    },
    /// Piecewise-linear interpolation through `(t, K)` knots with strictly
    /// increasing times.  Queries outside the knot range are rejected up
    /// front by [`CurvatureProfile::ensure_covers`].
    Table(Vec<(f64, f64)>),
}

impl CurvatureProfile {
    /// Check the profile is well formed (finite parameters, usable table).
    pub fn validate(&self) -> Result<()> {
        match self {
            CurvatureProfile::Constant(c) => {
                if !c.is_finite() {
                    return Err(GtlError::BadCurvatureTable(
                        "constant profile value is not finite".into(),
                    ));
                }
            }
            CurvatureProfile::Sinusoid {
                offset,
                amp,
                freq,
                phase,
            } => {
                if ![*offset, *amp, *freq, *phase].iter().all(|v| v.is_finite()) {
                    return Err(GtlError::BadCurvatureTable(
                        "sinusoid parameter is not finite".into(),
                    ));
                }
            }
            CurvatureProfile::Table(knots) => {
                if knots.len() < 2 {
                    return Err(GtlError::BadCurvatureTable(format!(
                        "table needs at least 2 knots, got {}",
                        knots.len()
                    )));
                }
                for window in knots.windows(2) {
                    if !(window[1].0 > window[0].0) {
                        return Err(GtlError::BadCurvatureTable(format!(
                            "knot times must increase strictly: {} then {}",
                            window[0].0, window[1].0
                        )));
                    }
                }
                if knots.iter().any(|(t, k)| !t.is_finite() || !k.is_finite()) {
                    return Err(GtlError::BadCurvatureTable(
                        "table entry is not finite".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Check that `[a, b]` lies inside the domain where the profile is
    /// defined; only tables have a bounded domain.
    pub fn ensure_covers(&self, a: f64, b: f64) -> Result<()> {
        if let CurvatureProfile::Table(knots) = self {
            let (lo, hi) = (a.min(b), a.max(b));
            let (first, last) = (knots[0].0, knots[knots.len() - 1].0);
            if lo < first || hi > last {
                return Err(GtlError::BadCurvatureTable(format!(
                    "requested span [{lo:.3}, {hi:.3}] exceeds table range [{first:.3}, {last:.3}]"
                )));
            }
        }
        Ok(())
    }

    /// Curvature at flow time `t`.  Table queries clamp to the end knots;
    /// integration entry points reject uncovered spans beforehand.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            CurvatureProfile::Constant(c) => *c,
            CurvatureProfile::Sinusoid {
                offset,
                amp,
                freq,
                phase,
            } => offset + amp * (freq * t + phase).sin(),
            CurvatureProfile::Table(knots) => {
                let last = knots.len() - 1;
                if t <= knots[0].0 {
                    return knots[0].1;
                }
                if t >= knots[last].0 {
                    return knots[last].1;
                }
                let i = knots.partition_point(|(tk, _)| *tk <= t) - 1;
                let (t0, k0) = knots[i];
                let (t1, k1) = knots[i + 1];
                k0 + (k1 - k0) * (t - t0) / (t1 - t0)
            }
        }
    }
}

/// Sampled solution of the pair system, one row per accepted step.
///
/// In projective mode every stored sample is rescaled to the unit circle,
/// which keeps arbitrarily long horizons in range; the direction (and hence
/// every slope and crossing diagnostic) is unchanged because the system is
/// linear.  In plain mode the raw magnitudes are kept.
#[derive(Clone, Debug)]
pub struct ConeTrajectory {
    /// Profile the trajectory was integrated against, kept so that
    /// diagnostics can re-evaluate the flow between samples.
    pub profile: CurvatureProfile,
    /// Sample times, strictly monotone from start to end.
    pub ts: Vec<f64>,
    /// Covector component along the co-vertical axis.
    pub xs: Vec<f64>,
    /// Covector component along the co-horizontal axis.
    pub ys: Vec<f64>,
    /// `x' = -y` at each sample.
    pub dxs: Vec<f64>,
    /// `y' = K x` at each sample.
    pub dys: Vec<f64>,
    /// Whether samples are renormalised to the unit circle.
    pub normalized: bool,
    /// Signed rotation of the direction accumulated over the whole span.
    pub total_angle: f64,
}

impl ConeTrajectory {
    /// Number of stored samples.
    pub fn len(&self) -> usize {
        self.ts.len()
    }

    /// True when no samples are stored.
    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    /// Final `(t, x, y)` sample.
    pub fn last(&self) -> (f64, f64, f64) {
        let i = self.ts.len() - 1;
        (self.ts[i], self.xs[i], self.ys[i])
    }

    /// Slope `-y/x` at the final sample (infinite when `x = 0`).
    pub fn final_slope(&self) -> f64 {
        let i = self.ts.len() - 1;
        -self.ys[i] / self.xs[i]
    }

    /// Number of full turns of the direction over the span.
    pub fn winding(&self) -> usize {
        (self.total_angle.abs() / std::f64::consts::TAU).floor() as usize
    }
}

/// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
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
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[inline]
fn pair_rhs(profile: &CurvatureProfile, t: f64, v: [f64; 2]) -> [f64; 2] {
    [-v[1], profile.value(t) * v[0]]
}

/// One adaptive Dormand-Prince 5(4) attempt from `(t, v)` with signed step
/// `h`.  Returns the fifth-order state and the scaled error estimate.
fn dp_step(profile: &CurvatureProfile, t: f64, v: [f64; 2], h: f64) -> ([f64; 2], f64) {
    let mut k = [[0.0f64; 2]; 7];
    k[0] = pair_rhs(profile, t, v);
    for s in 0..6 {
        let mut vs = v;
        for (j, kj) in k.iter().enumerate().take(s + 1) {
            vs[0] += h * DP_A[s][j] * kj[0];
            vs[1] += h * DP_A[s][j] * kj[1];
        }
        k[s + 1] = pair_rhs(profile, t + DP_C[s] * h, vs);
    }
    // The last tableau row is the fifth-order solution itself.
    let mut v5 = v;
    for (j, kj) in k.iter().enumerate().take(6) {
        v5[0] += h * DP_A[5][j] * kj[0];
        v5[1] += h * DP_A[5][j] * kj[1];
    }
    let mut v4 = v;
    for (j, kj) in k.iter().enumerate() {
        v4[0] += h * DP_B4[j] * kj[0];
        v4[1] += h * DP_B4[j] * kj[1];
    }
    let mut err = 0.0f64;
    for i in 0..2 {
        let scale = INTEGRATOR_TOL + INTEGRATOR_TOL * v[i].abs().max(v5[i].abs());
        err += ((v5[i] - v4[i]) / scale).powi(2);
    }
    (v5, (err / 2.0).sqrt())
}

/// Integrate the pair system from `(t0, xi0)` to `t1` with adaptive steps,
/// storing one sample per accepted step.
fn integrate_span(
    profile: &CurvatureProfile,
    xi0: [f64; 2],
    t0: f64,
    t1: f64,
    projective: bool,
) -> Result<ConeTrajectory> {
    profile.validate()?;
    profile.ensure_covers(t0, t1)?;
    let norm0 = xi0[0].hypot(xi0[1]);
    if norm0 == 0.0 || !norm0.is_finite() {
        return Err(GtlError::ZeroInitialCovector);
    }

    let mut v = if projective {
        [xi0[0] / norm0, xi0[1] / norm0]
    } else {
        xi0
    };
    let mut t = t0;
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();

    let mut traj = ConeTrajectory {
        profile: profile.clone(),
        ts: vec![t],
        xs: vec![v[0]],
        ys: vec![v[1]],
        dxs: Vec::new(),
        dys: Vec::new(),
        normalized: projective,
        total_angle: 0.0,
    };
    let d0 = pair_rhs(profile, t, v);
    traj.dxs.push(d0[0]);
    traj.dys.push(d0[1]);
    if span == 0.0 {
        return Ok(traj);
    }

    let mut h = dir * MAX_STEP.min(span);
    loop {
        let remaining = t1 - t;
        if remaining * dir <= 0.0 {
            break;
        }
        if remaining.abs() <= 1e-14 * t1.abs().max(1.0) {
            // Roundoff tail of the last step: snap the final sample onto
            // the requested endpoint rather than forcing a micro-step.
            if let Some(last_t) = traj.ts.last_mut() {
                *last_t = t1;
            }
            break;
        }
        if h.abs() > remaining.abs() {
            h = remaining;
        }
        if h.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(GtlError::StepSizeUnderflow { t });
        }
        let (v5, err) = dp_step(profile, t, v, h);
        if err <= 1.0 {
            let prev = v;
            t += h;
            v = v5;
            let scale = v[0].hypot(v[1]);
            if !scale.is_finite() || scale == 0.0 {
                return Err(GtlError::StepSizeUnderflow { t });
            }
            if projective {
                v = [v[0] / scale, v[1] / scale];
            }
            // Rotation of the direction over the step; steps are short
            // enough that the turn is well inside (-pi, pi).
            traj.total_angle +=
                (prev[0] * v[1] - prev[1] * v[0]).atan2(prev[0] * v[0] + prev[1] * v[1]);
            traj.ts.push(t);
            traj.xs.push(v[0]);
            traj.ys.push(v[1]);
            let d = pair_rhs(profile, t, v);
            traj.dxs.push(d[0]);
            traj.dys.push(d[1]);
        }
        let factor = if err == 0.0 {
            5.0
        } else if err.is_finite() {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            // Overflowing stages leave no usable estimate; just back off.
            0.2
        };
        h = (h * factor).clamp(-MAX_STEP, MAX_STEP);
    }
    Ok(traj)
}

/// Integrate from time `0`, renormalising to the unit circle after every
/// step so that arbitrarily long horizons stay in range.
pub fn integrate_projective(
    profile: &CurvatureProfile,
    xi0: [f64; 2],
    t_end: f64,
) -> Result<ConeTrajectory> {
    integrate_span(profile, xi0, 0.0, t_end, true)
}

/// Integrate from time `0` keeping raw magnitudes, so samples carry the
/// usual Jacobi-field scale.
pub fn integrate_jacobi(
    profile: &CurvatureProfile,
    xi0: [f64; 2],
    t_end: f64,
) -> Result<ConeTrajectory> {
    integrate_span(profile, xi0, 0.0, t_end, false)
}

/// A transversal intersection of the trajectory with the co-horizontal axis
/// `x = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// Flow time of the intersection.
    pub t: f64,
    /// `x' = -y` there; nonzero by construction, with sign showing the
    /// direction the axis is crossed.
    pub transversal: f64,
}

/// Crossing/winding summary of one trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrossingReport {
    /// All axis crossings in time order.
    pub crossings: Vec<Crossing>,
    /// Crossing times away from the start, when the seed itself lies on the
    /// axis; these are the conjugate times of the seed.
    pub conjugate_times: Vec<f64>,
    /// Full turns of the direction over the span.
    pub winding: usize,
    /// Whether the seed lay on the co-horizontal axis.
    pub seed_on_axis: bool,
}

/// Re-integrate from sample `i` of `traj` to time `t` (raw magnitudes, so
/// the result is scale-consistent with the stored sample).
fn eval_from_sample(traj: &ConeTrajectory, i: usize, t: f64) -> Result<[f64; 2]> {
    let seg = integrate_span(
        &traj.profile,
        [traj.xs[i], traj.ys[i]],
        traj.ts[i],
        t,
        false,
    )?;
    let (_, x, y) = seg.last();
    Ok([x, y])
}

/// Pin down the zero of `x` bracketed by samples `i` and `i + 1` with a
/// safeguarded Newton iteration on re-integrated values.
fn refine_crossing(traj: &ConeTrajectory, i: usize) -> Result<Crossing> {
    // Backward trajectories store decreasing times; order the bracket.
    let forward = traj.ts[i] <= traj.ts[i + 1];
    let (mut lo, mut hi) = if forward {
        (traj.ts[i], traj.ts[i + 1])
    } else {
        (traj.ts[i + 1], traj.ts[i])
    };
    let lo_sign = if forward {
        traj.xs[i].signum()
    } else {
        traj.xs[i + 1].signum()
    };

    let mut t = 0.5 * (lo + hi);
    for _ in 0..80 {
        let [x, y] = eval_from_sample(traj, i, t)?;
        if x == 0.0 || hi - lo < 1e-13 * t.abs().max(1.0) {
            break;
        }
        if x.signum() == lo_sign {
            lo = t;
        } else {
            hi = t;
        }
        // Newton step from x' = -y, bisect whenever it leaves the bracket.
        let tn = t + x / y;
        t = if tn.is_finite() && tn > lo && tn < hi {
            tn
        } else {
            0.5 * (lo + hi)
        };
    }
    let y = eval_from_sample(traj, i, t)?[1];
    if y.abs() < CROSSING_TOL {
        return Err(GtlError::UnresolvedCrossing { t, dx: y.abs() });
    }
    Ok(Crossing { t, transversal: -y })
}

/// Locate every transversal crossing of the co-horizontal axis, report the
/// conjugate times when the seed sat on that axis, and count full turns.
///
/// Crossings are found as sign changes of `x` between samples and refined by
/// re-integrating the flow inside the bracket; a crossing whose transversal
/// derivative falls below [`CROSSING_TOL`] is rejected as a suspected
/// tangency.
pub fn crossing_analysis(traj: &ConeTrajectory) -> Result<CrossingReport> {
    if traj.is_empty() {
        return Err(GtlError::EmptyStack);
    }
    let mut crossings: Vec<Crossing> = Vec::new();
    let push = |c: Crossing, out: &mut Vec<Crossing>| {
        if out
            .last()
            .map_or(true, |prev| (c.t - prev.t).abs() > 1e-9 * c.t.abs().max(1.0))
        {
            out.push(c);
        }
    };
    for i in 0..traj.len() {
        if traj.xs[i] == 0.0 {
            if traj.ys[i].abs() < CROSSING_TOL {
                return Err(GtlError::UnresolvedCrossing {
                    t: traj.ts[i],
                    dx: traj.ys[i].abs(),
                });
            }
            push(
                Crossing {
                    t: traj.ts[i],
                    transversal: -traj.ys[i],
                },
                &mut crossings,
            );
        }
        if i + 1 < traj.len() && traj.xs[i] * traj.xs[i + 1] < 0.0 {
            push(refine_crossing(traj, i)?, &mut crossings);
        }
    }

    let t_start = traj.ts[0];
    let seed_on_axis = traj.xs[0] == 0.0;
    let conjugate_times = if seed_on_axis {
        crossings
            .iter()
            .map(|c| c.t)
            .filter(|t| (t - t_start).abs() > 1e-9)
            .collect()
    } else {
        Vec::new()
    };
    Ok(CrossingReport {
        crossings,
        conjugate_times,
        winding: traj.winding(),
        seed_on_axis,
    })
}

/// Asymptotic Riccati slopes of one curvature profile.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RiccatiLimits {
    /// Slope at time 0 of the solution seeded on the axis in the far past
    /// (the unstable direction), extrapolated over the horizon ladder.
    pub r_unstable: f64,
    /// Slope at time 0 of the solution seeded on the axis in the far
    /// future (the stable direction).
    pub r_stable: f64,
    /// `|r_unstable - r_stable|`.
    pub gap: f64,
    /// Whether the gap clears [`GAP_TOL`].  A positive verdict certifies
    /// separation for this single profile only, nothing more.
    pub separated: bool,
    /// Horizon ladder used for the extrapolation.
    pub horizons: [f64; 3],
    /// Unstable slope at each horizon before extrapolation.
    pub unstable_sequence: [f64; 3],
    /// Stable slope at each horizon before extrapolation.
    pub stable_sequence: [f64; 3],
}

/// Aitken extrapolation of a geometric-looking tail, falling back to the
/// last iterate when the denominator degenerates.
fn aitken(r: [f64; 3]) -> f64 {
    let denom = (r[2] - r[1]) - (r[1] - r[0]);
    if denom.abs() > 1e-14 {
        r[2] - (r[2] - r[1]).powi(2) / denom
    } else {
        r[2]
    }
}

/// Estimate the asymptotic stable/unstable Riccati slopes at time 0 by
/// seeding the flow on the co-horizontal axis at `-T` (flowed forward) and
/// `+T` (flowed backward) for horizons `T, 2T, 4T`.
///
/// The horizon ladder must contract: if the increment between successive
/// horizons fails to shrink by at least a factor `3/4` the limits are deemed
/// nonexistent and [`GtlError::NoConvergence`] is returned, as happens for
/// positive curvature where the slopes oscillate forever.
pub fn riccati_limits(profile: &CurvatureProfile, t_horizon: f64) -> Result<RiccatiLimits> {
    assert!(
        t_horizon > 0.0 && t_horizon.is_finite(),
        "horizon must be positive"
    );
    let horizons = [t_horizon, 2.0 * t_horizon, 4.0 * t_horizon];
    let mut unstable = [0.0f64; 3];
    let mut stable = [0.0f64; 3];
    for (i, h) in horizons.iter().enumerate() {
        unstable[i] = integrate_span(profile, [0.0, 1.0], -h, 0.0, true)?.final_slope();
        stable[i] = integrate_span(profile, [0.0, 1.0], *h, 0.0, true)?.final_slope();
    }
    for seq in [&unstable, &stable] {
        let d1 = (seq[1] - seq[0]).abs();
        let d2 = (seq[2] - seq[1]).abs();
        if d2 > 1e-12 && d2 > 0.75 * d1 {
            return Err(GtlError::NoConvergence { d1, d2 });
        }
    }
    let r_unstable = aitken(unstable);
    let r_stable = aitken(stable);
    let gap = (r_unstable - r_stable).abs();
    Ok(RiccatiLimits {
        r_unstable,
        r_stable,
        gap,
        separated: gap > GAP_TOL,
        horizons,
        unstable_sequence: unstable,
        stable_sequence: stable,
    })
}

/// Residuals of the scalar Riccati equation along a trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RiccatiCheck {
    /// `(t, |r' + r^2 + K|)` at each requested time.
    pub residuals: Vec<(f64, f64)>,
    /// Largest residual.
    pub max_residual: f64,
}

/// Verify `r' + r^2 + K = 0` for `r = -y/x` along the flow of `xi0`, using
/// a five-point finite-difference stencil of re-integrated slope values at
/// each requested time.
///
/// Every stencil point must stay clear of the axis `x = 0`; a near-vertical
/// direction makes the slope meaningless and is reported as
/// [`GtlError::UnresolvedCrossing`].
pub fn riccati_consistency(
    profile: &CurvatureProfile,
    xi0: [f64; 2],
    times: &[f64],
) -> Result<RiccatiCheck> {
    const H: f64 = 1e-3;
    let mut residuals = Vec::with_capacity(times.len());
    let mut max_residual = 0.0f64;
    for &tc in times {
        let mut r = [0.0f64; 5];
        for (j, rj) in r.iter_mut().enumerate() {
            let t = tc + H * (j as f64 - 2.0);
            let traj = integrate_span(profile, xi0, 0.0, t, true)?;
            let (_, x, y) = traj.last();
            if x.abs() < 1e-6 {
                return Err(GtlError::UnresolvedCrossing { t, dx: x.abs() });
            }
            *rj = -y / x;
        }
        let drdt = (r[0] - 8.0 * r[1] + 8.0 * r[3] - r[4]) / (12.0 * H);
        let residual = (drdt + r[2] * r[2] + profile.value(tc)).abs();
        residuals.push((tc, residual));
        max_residual = max_residual.max(residual);
    }
    Ok(RiccatiCheck {
        residuals,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn direction_error(traj: &ConeTrajectory, reference: impl Fn(f64) -> [f64; 2]) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..traj.len() {
            let w = reference(traj.ts[i]);
            let scale = w[0].hypot(w[1]);
            let (wx, wy) = (w[0] / scale, w[1] / scale);
            worst = worst.max((traj.xs[i] - wx).hypot(traj.ys[i] - wy));
        }
        worst
    }

    #[test]
    fn constant_curvature_matches_closed_forms() {
        // K = 1: rotation (-sin t, cos t); raw magnitudes stay on the circle.
        let round = CurvatureProfile::Constant(1.0);
        let traj = integrate_jacobi(&round, [0.0, 1.0], 10.0).unwrap();
        let mut worst = 0.0f64;
        for i in 0..traj.len() {
            let t = traj.ts[i];
            worst = worst.max((traj.xs[i] + t.sin()).hypot(traj.ys[i] - t.cos()));
        }
        assert!(worst < 1e-8, "circular solution drifted {worst:.2e}");

        // K = 0: straight line (-t, 1), compared as directions in
        // projective mode.
        let flat = CurvatureProfile::Constant(0.0);
        let traj = integrate_projective(&flat, [0.0, 1.0], 10.0).unwrap();
        let err = direction_error(&traj, |t| [-t, 1.0]);
        assert!(err < 1e-8, "flat direction drifted {err:.2e}");

        // K = -1: (1, -1) spans the expanding invariant direction.
        let hyper = CurvatureProfile::Constant(-1.0);
        let traj = integrate_projective(&hyper, [1.0, -1.0], 10.0).unwrap();
        let err = direction_error(&traj, |_| [1.0, -1.0]);
        assert!(err < 1e-8, "invariant direction drifted {err:.2e}");

        // A table that linearly interpolates a constant reproduces it.
        let table = CurvatureProfile::Table(vec![(-1.0, 1.0), (5.0, 1.0), (11.0, 1.0)]);
        let traj = integrate_jacobi(&table, [0.0, 1.0], 10.0).unwrap();
        let mut worst = 0.0f64;
        for i in 0..traj.len() {
            let t = traj.ts[i];
            worst = worst.max((traj.xs[i] + t.sin()).hypot(traj.ys[i] - t.cos()));
        }
        assert!(worst < 1e-8, "table solution drifted {worst:.2e}");
    }

    #[test]
    fn conjugate_times_obey_sturm_count() {
        for c in [0.5f64, 1.0, 2.7] {
            let profile = CurvatureProfile::Constant(c);
            let t_end = 10.0;
            let traj = integrate_projective(&profile, [0.0, 1.0], t_end).unwrap();
            let report = crossing_analysis(&traj).unwrap();
            assert!(report.seed_on_axis);
            let expected = (t_end * c.sqrt() / PI).floor() as usize;
            assert_eq!(
                report.conjugate_times.len(),
                expected,
                "K = {c}: conjugate count"
            );
            for (n, t) in report.conjugate_times.iter().enumerate() {
                let want = (n + 1) as f64 * PI / c.sqrt();
                assert!(
                    (t - want).abs() < 1e-8,
                    "K = {c}: conjugate time {t} vs {want}"
                );
            }
            // Successive transversal derivatives alternate in sign.
            for pair in report.crossings.windows(2) {
                assert!(pair[0].transversal * pair[1].transversal < 0.0);
            }
            assert_eq!(report.winding, (t_end * c.sqrt() / TAU).floor() as usize);
        }
    }

    #[test]
    fn nonpositive_curvature_yields_no_conjugate_points() {
        for c in [0.0f64, -1.0] {
            let profile = CurvatureProfile::Constant(c);
            let traj = integrate_projective(&profile, [0.0, 1.0], 10.0).unwrap();
            let report = crossing_analysis(&traj).unwrap();
            assert!(report.seed_on_axis);
            assert_eq!(report.crossings.len(), 1, "only the seed touches the axis");
            assert!(report.conjugate_times.is_empty());
            assert_eq!(report.winding, 0);
        }
    }

    #[test]
    fn riccati_limits_separate_negative_curvature() {
        let hyper = CurvatureProfile::Constant(-1.0);
        let limits = riccati_limits(&hyper, 20.0).unwrap();
        assert!((limits.r_unstable - 1.0).abs() < 1e-6);
        assert!((limits.r_stable + 1.0).abs() < 1e-6);
        assert!((limits.gap - 2.0).abs() < 1e-6);
        assert!(limits.separated);

        let flat = CurvatureProfile::Constant(0.0);
        let limits = riccati_limits(&flat, 20.0).unwrap();
        assert!(limits.r_unstable.abs() < 1e-9);
        assert!(limits.r_stable.abs() < 1e-9);
        assert!(!limits.separated, "flat cone collapses, gap {}", limits.gap);

        // Positive curvature: the slope oscillates with the horizon and the
        // ladder cannot contract.
        let round = CurvatureProfile::Constant(1.0);
        let Err(err) = riccati_limits(&round, 10.0) else {
            panic!("positive curvature should not converge");
        };
        assert!(matches!(err, GtlError::NoConvergence { .. }), "{err}");
    }

    #[test]
    fn perturbed_hyperbolic_profile_is_horizon_stable() {
        let profile = CurvatureProfile::Sinusoid {
            offset: -1.0,
            amp: 0.5,
            freq: 1.0,
            phase: 0.0,
        };
        let a = riccati_limits(&profile, 10.0).unwrap();
        let b = riccati_limits(&profile, 20.0).unwrap();
        assert!(a.separated && b.separated);
        assert!(a.gap > 0.5, "gap {}", a.gap);
        assert!((a.r_unstable - b.r_unstable).abs() < 1e-6);
        assert!((a.r_stable - b.r_stable).abs() < 1e-6);
    }

    #[test]
    fn riccati_residuals_stay_small_along_flows() {
        let profile = CurvatureProfile::Sinusoid {
            offset: -1.0,
            amp: 0.5,
            freq: 1.0,
            phase: 0.0,
        };
        let check = riccati_consistency(&profile, [0.3, 0.8], &[1.0, 2.0, 3.0]).unwrap();
        assert!(check.max_residual < 1e-7, "residual {:.2e}", check.max_residual);

        let round = CurvatureProfile::Constant(1.0);
        let check = riccati_consistency(&round, [1.0, 0.0], &[0.3, 0.8]).unwrap();
        assert!(check.max_residual < 1e-7, "residual {:.2e}", check.max_residual);

        // A stencil point rides over the axis where the slope blows up.
        let Err(err) = riccati_consistency(&round, [1.0, 0.0], &[std::f64::consts::FRAC_PI_2])
        else {
            panic!("slope at the axis should be rejected");
        };
        assert!(matches!(err, GtlError::UnresolvedCrossing { .. }), "{err}");
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let flat = CurvatureProfile::Constant(0.0);
        let Err(err) = integrate_projective(&flat, [0.0, 0.0], 1.0) else {
            panic!("zero seed must be rejected");
        };
        assert!(matches!(err, GtlError::ZeroInitialCovector), "{err}");

        let Err(err) = CurvatureProfile::Table(vec![(0.0, 1.0)]).validate() else {
            panic!("single-knot table must be rejected");
        };
        assert!(matches!(err, GtlError::BadCurvatureTable(_)), "{err}");

        let Err(err) = CurvatureProfile::Table(vec![(0.0, 1.0), (0.0, 2.0)]).validate() else {
            panic!("repeated knot times must be rejected");
        };
        assert!(matches!(err, GtlError::BadCurvatureTable(_)), "{err}");

        let short = CurvatureProfile::Table(vec![(0.0, 1.0), (1.0, 1.0)]);
        let Err(err) = integrate_projective(&short, [0.0, 1.0], 2.0) else {
            panic!("span outside the table must be rejected");
        };
        assert!(matches!(err, GtlError::BadCurvatureTable(_)), "{err}");

        // Curvature so large that no admissible step resolves it forces the
        // controller below the step floor.
        let wild = CurvatureProfile::Constant(1e200);
        let Err(err) = integrate_projective(&wild, [0.0, 1.0], 1.0) else {
            panic!("unresolvable profile must be rejected");
        };
        assert!(matches!(err, GtlError::StepSizeUnderflow { .. }), "{err}");
    }

    #[test]
    fn tangency_is_flagged_instead_of_counted() {
        // Hand-built flat segment whose x changes sign while x' = -y is
        // far below the transversality threshold.
        let traj = ConeTrajectory {
            profile: CurvatureProfile::Constant(0.0),
            ts: vec![0.0, 1.0],
            xs: vec![4e-10, -6e-10],
            ys: vec![1e-9, 1e-9],
            dxs: vec![-1e-9, -1e-9],
            dys: vec![0.0, 0.0],
            normalized: false,
            total_angle: 0.0,
        };
        let Err(err) = crossing_analysis(&traj) else {
            panic!("graze should be flagged");
        };
        let GtlError::UnresolvedCrossing { dx, .. } = err else {
            panic!("unexpected error {err}");
        };
        assert!(dx < CROSSING_TOL);
    }

    #[test]
    fn integration_is_deterministic() {
        let profile = CurvatureProfile::Sinusoid {
            offset: -1.0,
            amp: 0.5,
            freq: 1.0,
            phase: 0.25,
        };
        let a = integrate_projective(&profile, [0.4, 0.6], 15.0).unwrap();
        let b = integrate_projective(&profile, [0.4, 0.6], 15.0).unwrap();
        assert_eq!(a.ts, b.ts);
        assert_eq!(a.xs, b.xs);
        assert_eq!(a.ys, b.ys);
        assert_eq!(a.total_angle, b.total_angle);
    }

    #[test]
    fn backward_integration_mirrors_forward() {
        // For constant K the system is time-symmetric under
        // (x, y)(t) -> (x, -y)(-t); check via raw solutions.
        let round = CurvatureProfile::Constant(1.0);
        let fwd = integrate_jacobi(&round, [0.0, 1.0], 5.0).unwrap();
        let bwd = integrate_jacobi(&round, [0.0, 1.0], -5.0).unwrap();
        let (tf, xf, yf) = fwd.last();
        let (tb, xb, yb) = bwd.last();
        assert!((tf + tb).abs() < 1e-12);
        assert!((xf + xb).abs() < 1e-8, "x {xf} vs {xb}");
        assert!((yf - yb).abs() < 1e-8, "y {yf} vs {yb}");
    }
}
