use crate::discretization::Discretization;
use crate::error::Result;
use crate::geometry::WallProfile;
use crate::noise::{NoisePath, NoiseSpec};
use crate::scheme::Trajectory;

/// `int_0^T |E_N(t)|^2 dt` for one path, where on `[t^m, t^{m+1})`
///
/// `E_N(t) = ((t - t^m)/dt) G(U^m) dW_m - int_{t^m}^t G(U^m) dW`.
///
/// The example coefficient makes `G(U) dW = Phi(dW) (J u, v)`, so the error
/// is `|(J u^m, v^m)|^2` times the squared gap between the linear ramp of
/// `Phi(dW_m)` and the Wiener path itself. The latter is refined inside the
/// step by a Brownian bridge of `refinement` sub-steps and interpolated
/// linearly, which makes the time integral exact.
pub fn stochastic_error(
    traj: &Trajectory,
    noise: &NoisePath,
    spec: &NoiseSpec,
    disc: &Discretization,
    refinement: usize,
) -> Result<f64> {
    let length = disc.domain.length;
    let elements = disc.beam.elements;
    let mut total = 0.0;
    for n in 0..traj.steps_run() {
        let sub = noise.bridge(n, refinement)?;
        if spec.is_silent() {
            continue;
        }
        let star = WallProfile::from_coeffs(length, elements, traj.eta_star[n].clone())?;
        let g_sq = disc.weighted_norm_sq(&star, 2, &traj.u[n]) + disc.structure.beam_sq(&traj.v[n]);
        let xi_total = spec.project(noise.increment(n));
        let h = traj.dt / refinement as f64;
        let (mut cumulative, mut prev_gap, mut integral) = (0.0, 0.0, 0.0);
        for j in 0..refinement {
            let row: Vec<f64> = sub.row(j).iter().copied().collect();
            cumulative += spec.project(&row);
            let gap = (j + 1) as f64 / refinement as f64 * xi_total - cumulative;
            integral += h * (prev_gap * prev_gap + prev_gap * gap + gap * gap) / 3.0;
            prev_gap = gap;
        }
        total += g_sq * integral;
    }
    Ok(total)
}

/// Expected per-step value of the bridge integral above for unit `|G|` and
/// `Var Phi(dW) = sigma_sq dt`: the gap at the sub-points is a Brownian
/// bridge with covariance `sigma_sq dt s_i (1 - s_j)`, `s_i <= s_j`.
/// Tends to `sigma_sq dt^2 / 6` as the refinement grows.
pub fn expected_bridge_error_per_step(sigma_sq: f64, dt: f64, refinement: usize) -> f64 {
    let m = refinement as f64;
    let cov = |i: usize, j: usize| {
        let (a, b) = (i.min(j) as f64 / m, i.max(j) as f64 / m);
        sigma_sq * dt * a * (1.0 - b)
    };
    (0..refinement)
        .map(|j| (dt / m) * (cov(j, j) + cov(j, j + 1) + cov(j + 1, j + 1)) / 3.0)
        .sum()
}
