//! Reference domain, clamped wall profiles and the vertical-stretch ALE map.
//!
//! The fluid lives on the fixed rectangle `O = (0, L) x (0, 1)`. A wall
//! displacement `eta` maps it onto the physical channel through
//! `(z, r) -> (z, (R + eta(z)) r)`; every differential operator used by the
//! fluid solver is the pull-back of its physical counterpart through that map.

use nalgebra::{DVector, Matrix2, Vector2};

use crate::error::{FsiError, Result};

/// Channel geometry and the reference mesh resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceDomain {
    /// Channel length `L`.
    pub length: f64,
    /// Reference wall height `R`.
    pub radius: f64,
    /// Axial cell count.
    pub nz: usize,
    /// Vertical cell count.
    pub nr: usize,
}

impl ReferenceDomain {
    pub fn new(length: f64, radius: f64, nz: usize, nr: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(FsiError::config("domain.length", "must be positive"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(FsiError::config("domain.radius", "must be positive"));
        }
        if nz == 0 {
            return Err(FsiError::config("domain.nz", "must be at least 1"));
        }
        if nr == 0 {
            return Err(FsiError::config("domain.nr", "must be at least 1"));
        }
        Ok(Self { length, radius, nz, nr })
    }

    pub fn hz(&self) -> f64 {
        self.length / self.nz as f64
    }

    pub fn hr(&self) -> f64 {
        1.0 / self.nr as f64
    }
}

/// Cubic Hermite shape functions on the unit element, scaled by the element
/// width `h`: returns values, first and second derivatives (w.r.t. `z`) of
/// `[N_w0, N_s0, N_w1, N_s1]` where `w` is a value DOF and `s` a slope DOF.
pub(crate) fn hermite_shape(xi: f64, h: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let x2 = xi * xi;
    let x3 = x2 * xi;
    let val = [
        1.0 - 3.0 * x2 + 2.0 * x3,
        h * (xi - 2.0 * x2 + x3),
        3.0 * x2 - 2.0 * x3,
        h * (x3 - x2),
    ];
    let d1 = [
        (-6.0 * xi + 6.0 * x2) / h,
        1.0 - 4.0 * xi + 3.0 * x2,
        (6.0 * xi - 6.0 * x2) / h,
        3.0 * x2 - 2.0 * xi,
    ];
    let d2 = [
        (-6.0 + 12.0 * xi) / (h * h),
        (-4.0 + 6.0 * xi) / h,
        (6.0 - 12.0 * xi) / (h * h),
        (6.0 * xi - 2.0) / h,
    ];
    (val, d1, d2)
}

/// A clamped wall displacement in the cubic Hermite beam space.
///
/// The coefficient vector interleaves `(value, slope)` pairs for the
/// interior nodes `z_1 .. z_{n-1}` of a uniform partition of `[0, L]` into
/// `n` elements. End nodes carry no DOFs, so `eta(0) = eta(L) = eta'(0) =
/// eta'(L) = 0` holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WallProfile {
    length: f64,
    elements: usize,
    coeffs: DVector<f64>,
}

/// Pointwise evaluation of a profile: value and the first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProfileSample {
    pub value: f64,
    pub slope: f64,
    pub curvature: f64,
}

impl WallProfile {
    pub fn zero(length: f64, elements: usize) -> Self {
        let n = 2 * elements.saturating_sub(1);
        Self { length, elements, coeffs: DVector::zeros(n) }
    }

    pub fn from_coeffs(length: f64, elements: usize, coeffs: DVector<f64>) -> Result<Self> {
        if coeffs.len() != 2 * elements.saturating_sub(1) {
            return Err(FsiError::config(
                "wall_profile",
                format!(
                    "expected {} coefficients for {} elements, got {}",
                    2 * elements.saturating_sub(1),
                    elements,
                    coeffs.len()
                ),
            ));
        }
        Ok(Self { length, elements, coeffs })
    }

    /// Hermite interpolant of `f` using nodal values and slopes `df`.
    pub fn interpolate(
        length: f64,
        elements: usize,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64,
    ) -> Self {
        let h = length / elements as f64;
        let mut coeffs = DVector::zeros(2 * elements.saturating_sub(1));
        for i in 1..elements {
            let z = i as f64 * h;
            coeffs[2 * (i - 1)] = f(z);
            coeffs[2 * (i - 1) + 1] = df(z);
        }
        Self { length, elements, coeffs }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn element_width(&self) -> f64 {
        self.length / self.elements as f64
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> DVector<f64> {
        self.coeffs
    }

    /// Nodal value at interior node `i` (`1 <= i < elements`); zero at the ends.
    pub fn nodal_value(&self, i: usize) -> f64 {
        if i == 0 || i >= self.elements {
            0.0
        } else {
            self.coeffs[2 * (i - 1)]
        }
    }

    /// Global coefficient indices of element `e`; `None` marks a clamped DOF.
    pub(crate) fn element_dofs(elements: usize, e: usize) -> [Option<usize>; 4] {
        let left = if e == 0 { None } else { Some(2 * (e - 1)) };
        let right = if e + 1 >= elements { None } else { Some(2 * e) };
        [left, left.map(|k| k + 1), right, right.map(|k| k + 1)]
    }

    fn locate(&self, z: f64) -> (usize, f64) {
        let h = self.element_width();
        let zc = z.clamp(0.0, self.length);
        let e = ((zc / h).floor() as usize).min(self.elements - 1);
        (e, (zc - e as f64 * h) / h)
    }

    pub(crate) fn eval_in_element(&self, e: usize, xi: f64) -> ProfileSample {
        let h = self.element_width();
        let (val, d1, d2) = hermite_shape(xi, h);
        let dofs = Self::element_dofs(self.elements, e);
        let mut s = ProfileSample::default();
        for k in 0..4 {
            if let Some(g) = dofs[k] {
                let c = self.coeffs[g];
                s.value += c * val[k];
                s.slope += c * d1[k];
                s.curvature += c * d2[k];
            }
        }
        s
    }

    /// Value, slope and curvature at `z` (clamped into `[0, L]`).
    pub fn sample(&self, z: f64) -> ProfileSample {
        let (e, xi) = self.locate(z);
        self.eval_in_element(e, xi)
    }

    pub fn value(&self, z: f64) -> f64 {
        self.sample(z).value
    }

    pub fn slope(&self, z: f64) -> f64 {
        self.sample(z).slope
    }

    /// Exact minimum of the piecewise cubic over `[0, L]`.
    pub fn min_value(&self) -> f64 {
        let mut best = 0.0f64;
        for e in 0..self.elements {
            let mut candidates = vec![0.0, 1.0];
            // derivative on the element is a quadratic in xi: a xi^2 + b xi + c
            let s0 = self.eval_in_element(e, 0.0).slope;
            let s_half = self.eval_in_element(e, 0.5).slope;
            let s1 = self.eval_in_element(e, 1.0).slope;
            let a = 2.0 * s0 - 4.0 * s_half + 2.0 * s1;
            let b = -3.0 * s0 + 4.0 * s_half - s1;
            let c = s0;
            if a.abs() > 1e-300 {
                let disc = b * b - 4.0 * a * c;
                if disc >= 0.0 {
                    let sq = disc.sqrt();
                    candidates.push((-b + sq) / (2.0 * a));
                    candidates.push((-b - sq) / (2.0 * a));
                }
            } else if b.abs() > 1e-300 {
                candidates.push(-c / b);
            }
            for xi in candidates {
                if (0.0..=1.0).contains(&xi) {
                    best = best.min(self.eval_in_element(e, xi).value);
                }
            }
        }
        best
    }

    pub fn sub(&self, other: &WallProfile) -> WallProfile {
        WallProfile {
            length: self.length,
            elements: self.elements,
            coeffs: &self.coeffs - &other.coeffs,
        }
    }
}

/// The ALE map `(z, r) -> (z, (R + eta(z)) r)`.
pub fn ale_map(profile: &WallProfile, radius: f64, point: (f64, f64)) -> (f64, f64) {
    let (z, r) = point;
    (z, (radius + profile.value(z)) * r)
}

/// Jacobian determinant `R + eta(z)` of the ALE map.
pub fn ale_jacobian(profile: &WallProfile, radius: f64, z: f64) -> f64 {
    radius + profile.value(z)
}

/// Local data of the ALE map needed to transform reference derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AleFrame {
    /// `R + eta(z)`
    pub jacobian: f64,
    /// `r * eta'(z) / (R + eta(z))`
    pub shear: f64,
}

impl AleFrame {
    pub fn new(eta: f64, eta_slope: f64, radius: f64, z: f64, r: f64) -> Result<Self> {
        let jacobian = radius + eta;
        if jacobian <= 0.0 {
            return Err(FsiError::DegenerateJacobian { z, jacobian });
        }
        Ok(Self { jacobian, shear: r * eta_slope / jacobian })
    }

    pub fn at(profile: &WallProfile, radius: f64, point: (f64, f64)) -> Result<Self> {
        let s = profile.sample(point.0);
        Self::new(s.value, s.slope, radius, point.0, point.1)
    }

    /// Maps reference partials `(d_z, d_r)` of a scalar to `(d_z^eta, d_r^eta)`.
    #[inline]
    pub fn transform(&self, dz: f64, dr: f64) -> (f64, f64) {
        (dz - self.shear * dr, dr / self.jacobian)
    }
}

/// A vector field sampled at one point of the reference domain: value and
/// its reference partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub value: Vector2<f64>,
    pub dz: Vector2<f64>,
    pub dr: Vector2<f64>,
}

impl FieldSample {
    pub fn new(value: Vector2<f64>, dz: Vector2<f64>, dr: Vector2<f64>) -> Self {
        Self { value, dz, dr }
    }
}

/// `grad^eta u`, row `i` holding the transformed partials of component `i`.
pub fn transformed_gradient(
    u: &FieldSample,
    profile: &WallProfile,
    radius: f64,
    point: (f64, f64),
) -> Result<Matrix2<f64>> {
    let frame = AleFrame::at(profile, radius, point)?;
    Ok(gradient_in_frame(u, &frame))
}

pub(crate) fn gradient_in_frame(u: &FieldSample, frame: &AleFrame) -> Matrix2<f64> {
    let (a, b) = frame.transform(u.dz[0], u.dr[0]);
    let (c, d) = frame.transform(u.dz[1], u.dr[1]);
    Matrix2::new(a, b, c, d)
}

pub fn transformed_divergence(
    u: &FieldSample,
    profile: &WallProfile,
    radius: f64,
    point: (f64, f64),
) -> Result<f64> {
    Ok(transformed_gradient(u, profile, radius, point)?.trace())
}

pub fn transformed_sym_gradient(
    u: &FieldSample,
    profile: &WallProfile,
    radius: f64,
    point: (f64, f64),
) -> Result<Matrix2<f64>> {
    let g = transformed_gradient(u, profile, radius, point)?;
    Ok((g + g.transpose()) * 0.5)
}
