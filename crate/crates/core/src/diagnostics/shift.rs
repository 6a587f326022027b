use crate::discretization::Discretization;
use crate::geometry::WallProfile;
use crate::scheme::Trajectory;

/// `int_h^T |X(t) - X(t - h)|^2 dt` for a piecewise-constant family with
/// `X(t) = values[k]` on `[k dt, (k+1) dt)` and `T = values.len() dt`.
///
/// Exact: on every interval between consecutive points of `{k dt} U {k dt + h}`
/// both `X(t)` and `X(t - h)` are constant.
pub fn time_shift_norm<V>(values: &[V], dt: f64, h: f64, dist_sq: impl Fn(&V, &V) -> f64) -> f64 {
    let n = values.len();
    let t_end = n as f64 * dt;
    if n == 0 || h <= 0.0 || h >= t_end {
        return 0.0;
    }
    let mut points: Vec<f64> = Vec::with_capacity(2 * n + 2);
    points.push(h);
    points.push(t_end);
    for k in 0..=n {
        let a = k as f64 * dt;
        if a > h && a < t_end {
            points.push(a);
        }
        let b = a + h;
        if b > h && b < t_end {
            points.push(b);
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    let index = |t: f64| ((t / dt).floor() as usize).min(n - 1);
    let mut acc = 0.0;
    for w in points.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let (i, j) = (index(mid), index(mid - h));
        if i != j {
            acc += len * dist_sq(&values[i], &values[j]);
        }
    }
    acc
}

/// Grid surrogate of `sup_h h^{-1/32} int_h^T (|T_h u+ - u+|^2 + |T_h v+ - v+|^2)`
/// over `h = 2^{-k} T`, `k = 1..=levels`, with `L2` norms on the reference
/// domain and the wall.
pub fn tightness(traj: &Trajectory, disc: &Discretization, levels: usize) -> f64 {
    let steps = traj.steps_run();
    if steps == 0 {
        return 0.0;
    }
    let t_end = steps as f64 * traj.dt;
    let flat = WallProfile::zero(disc.domain.length, disc.beam.elements);
    let u_plus = &traj.u[1..=steps];
    let v_plus = &traj.v[1..=steps];
    (1..=levels)
        .map(|k| {
            let h = t_end * 0.5f64.powi(k as i32);
            let su = time_shift_norm(u_plus, traj.dt, h, |a, b| disc.weighted_norm_sq(&flat, 0, &(a - b)));
            let sv = time_shift_norm(v_plus, traj.dt, h, |a, b| disc.structure.beam_sq(&(a - b)));
            h.powf(-1.0 / 32.0) * (su + sv)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_dist(a: &f64, b: &f64) -> f64 {
        (a - b) * (a - b)
    }

    /// Midpoint rule on a grid `dt / 100`.
    fn brute_force(values: &[f64], dt: f64, h: f64) -> f64 {
        let fine = dt / 100.0;
        let t_end = values.len() as f64 * dt;
        let at = |t: f64| values[((t / dt).floor() as usize).min(values.len() - 1)];
        let count = ((t_end - h) / fine).round() as usize;
        let mut acc = 0.0;
        for k in 0..count {
            let mid = h + (k as f64 + 0.5) * fine;
            acc += fine * scalar_dist(&at(mid), &at(mid - h));
        }
        acc
    }

    #[test]
    fn constant_trajectory_has_zero_shift() {
        assert_eq!(time_shift_norm(&[2.0; 10], 0.1, 0.35, scalar_dist), 0.0);
    }

    #[test]
    fn single_jump() {
        // jump of size d at t* = 0.5: shifted and unshifted differ on [t*, t* + h)
        let mut values = vec![0.0; 10];
        for v in values.iter_mut().skip(5) {
            *v = 3.0;
        }
        let h = 0.17;
        assert!((time_shift_norm(&values, 0.1, h, scalar_dist) - h * 9.0).abs() < 1e-14);
    }

    #[test]
    fn matches_fine_grid_for_step_aligned_shift() {
        // breakpoints land on the fine grid, so the midpoint rule is exact
        let values: Vec<f64> = (0..12).map(|k| ((k * 7 % 5) as f64).sin()).collect();
        let dt = 0.1;
        let h = 1.5 * dt;
        let exact = time_shift_norm(&values, dt, h, scalar_dist);
        let brute = brute_force(&values, dt, h);
        assert!((exact - brute).abs() <= 1e-10 * exact, "{exact} vs {brute}");
    }

    #[test]
    fn step_multiple_reduces_to_sum() {
        let values: Vec<f64> = (0..8).map(|k| (k as f64).powi(2) * 0.1).collect();
        let dt = 0.25;
        let j = 3;
        let direct: f64 = (j..8).map(|n| dt * scalar_dist(&values[n], &values[n - j])).sum();
        assert!((time_shift_norm(&values, dt, j as f64 * dt, scalar_dist) - direct).abs() < 1e-14);
    }
}
