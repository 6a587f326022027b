//! Fractional Sobolev norms of `R + eta` for the admissibility cutoff.
//!
//! The `H^s` norm with `s = 1 + sigma`, `sigma in (1/2, 1)`, is taken as
//! `|R + eta|_{L2}^2 + [eta']_{sigma}^2` where the Gagliardo seminorm is
//! `int int |f(x) - f(y)|^2 / |x - y|^{1 + 2 sigma}`. The double integral is
//! split on a uniform grid of sub-cells of width `h` aligned with the beam
//! elements:
//!
//! * cell pairs at least two cells apart: tensor 3-point Gauss, with the
//!   kernel tabulated once per offset;
//! * neighbouring cells: the far triangle `|x - y| >= h` by collapsed Gauss;
//! * the band `|x - y| < h`: first-order Taylor expansion of `f`, integrated
//!   analytically in `y`, leaving `int f'(x)^2 w(x) dx`.

use crate::error::{FsiError, Result};
use crate::geometry::WallProfile;
use crate::quadrature::GaussRule;

/// Minimum total number of sub-cells used for the seminorm.
const MIN_SUBCELLS: usize = 128;

fn check_exponent(s: f64) -> Result<()> {
    if !(s > 1.5 && s < 2.0) {
        return Err(FsiError::config("physics.s", format!("H^s exponent must lie in (3/2, 2), got {s}")));
    }
    Ok(())
}

/// `|R + eta|_{L2(0,L)}^2`, exact for the cubic interpolant.
fn l2_sq(profile: &WallProfile, radius: f64) -> f64 {
    let rule = GaussRule::new(4);
    let h = profile.element_width();
    let mut acc = 0.0;
    for e in 0..profile.elements() {
        for (xi, w) in rule.on(0.0, 1.0) {
            let v = radius + profile.eval_in_element(e, xi).value;
            acc += w * h * v * v;
        }
    }
    acc
}

/// `|R + eta|_{H^2}`, the full norm `(|.|_{L2}^2 + |d_z .|^2 + |d_zz .|^2)^{1/2}`.
pub fn h2_norm(profile: &WallProfile, radius: f64) -> f64 {
    let rule = GaussRule::new(4);
    let h = profile.element_width();
    let mut acc = l2_sq(profile, radius);
    for e in 0..profile.elements() {
        for (xi, w) in rule.on(0.0, 1.0) {
            let s = profile.eval_in_element(e, xi);
            acc += w * h * (s.slope * s.slope + s.curvature * s.curvature);
        }
    }
    acc.sqrt()
}

/// Gagliardo seminorm squared of `eta'` with exponent `sigma`.
pub fn slope_seminorm_sq(profile: &WallProfile, sigma: f64) -> f64 {
    let per_element = MIN_SUBCELLS.div_ceil(profile.elements()).max(1);
    let cells = per_element * profile.elements();
    let h = profile.length() / cells as f64;
    let p = 1.0 + 2.0 * sigma;

    let slope_at = |cell: usize, t: f64| -> f64 {
        let e = cell / per_element;
        let sub = cell % per_element;
        profile.eval_in_element(e, (sub as f64 + t) / per_element as f64).slope
    };
    let curvature_at = |cell: usize, t: f64| -> f64 {
        let e = cell / per_element;
        let sub = cell % per_element;
        profile.eval_in_element(e, (sub as f64 + t) / per_element as f64).curvature
    };

    let g3 = GaussRule::new(3);
    let samples: Vec<[f64; 3]> = (0..cells)
        .map(|c| [slope_at(c, g3.points[0]), slope_at(c, g3.points[1]), slope_at(c, g3.points[2])])
        .collect();

    // far pairs, both orderings counted once each via the factor 2
    let mut far = 0.0;
    for k in 2..cells {
        let mut kernel = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let dist = (k as f64 + g3.points[b] - g3.points[a]) * h;
                kernel[a][b] = g3.weights[a] * g3.weights[b] * h * h / dist.powf(p);
            }
        }
        for i in 0..cells - k {
            let (fx, fy) = (&samples[i], &samples[i + k]);
            for a in 0..3 {
                for b in 0..3 {
                    let d = fx[a] - fy[b];
                    far += kernel[a][b] * d * d;
                }
            }
        }
    }

    // neighbouring cells: x = (i + a) h, y = (i + 1 + b) h with b >= a
    let g4 = GaussRule::new(4);
    let mut near = 0.0;
    for i in 0..cells.saturating_sub(1) {
        for (a, wa) in g4.on(0.0, 1.0) {
            let fx = slope_at(i, a);
            for (t, wt) in g4.on(0.0, 1.0) {
                let b = a + (1.0 - a) * t;
                let dist = (1.0 + b - a) * h;
                let d = fx - slope_at(i + 1, b);
                near += wa * wt * (1.0 - a) * h * h * d * d / dist.powf(p);
            }
        }
    }

    // band |x - y| < h
    let q = 2.0 - 2.0 * sigma;
    let length = profile.length();
    let mut band = 0.0;
    for c in 0..cells {
        for (t, w) in g4.on(0.0, 1.0) {
            let x = (c as f64 + t) * h;
            let weight = (h.min(x).powf(q) + h.min(length - x).powf(q)) / q;
            let f1 = curvature_at(c, t);
            band += w * h * f1 * f1 * weight;
        }
    }

    2.0 * (far + near) + band
}

/// `|R + eta|_{H^s(0,L)}` for `3/2 < s < 2`.
pub fn hs_norm(profile: &WallProfile, radius: f64, s: f64) -> Result<f64> {
    check_exponent(s)?;
    Ok((l2_sq(profile, radius) + slope_seminorm_sq(profile, s - 1.0)).sqrt())
}
