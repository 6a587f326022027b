use nalgebra::{DMatrix, DVector};

use super::spaces::BeamSpace;
use crate::geometry::{hermite_shape, WallProfile};
use crate::quadrature::GaussRule;

/// Structure-side matrices on the Hermite beam space, integrated exactly
/// with 4-point Gauss per element.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureForms {
    /// `(phi, psi)`
    pub mass: DMatrix<f64>,
    /// `(d_z phi, d_z psi) + (d_zz phi, d_zz psi)`
    pub stiffness: DMatrix<f64>,
}

impl StructureForms {
    pub fn assemble(beam: &BeamSpace) -> Self {
        let nh = beam.ndof();
        let h = beam.element_width();
        let rule = GaussRule::new(4);
        let mut mass = DMatrix::zeros(nh, nh);
        let mut stiffness = DMatrix::zeros(nh, nh);
        for e in 0..beam.elements {
            let hd = WallProfile::element_dofs(beam.elements, e);
            for (xi, w) in rule.on(0.0, 1.0) {
                let w = w * h;
                let (val, d1, d2) = hermite_shape(xi, h);
                for a in 0..4 {
                    let Some(ga) = hd[a] else { continue };
                    for b in 0..4 {
                        let Some(gb) = hd[b] else { continue };
                        mass[(ga, gb)] += w * val[a] * val[b];
                        stiffness[(ga, gb)] += w * (d1[a] * d1[b] + d2[a] * d2[b]);
                    }
                }
            }
        }
        Self { mass, stiffness }
    }

    /// `|d_z eta|^2 + |d_zz eta|^2`
    pub fn elastic_sq(&self, eta: &DVector<f64>) -> f64 {
        eta.dot(&(&self.stiffness * eta))
    }

    pub fn beam_sq(&self, v_h: &DVector<f64>) -> f64 {
        v_h.dot(&(&self.mass * v_h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beam(n: usize) -> BeamSpace {
        BeamSpace { length: 1.0, elements: n }
    }

    #[test]
    fn forms_are_symmetric_and_stiffness_is_spd() {
        let f = StructureForms::assemble(&beam(6));
        assert!((&f.mass - f.mass.transpose()).norm() < 1e-15);
        assert!((&f.stiffness - f.stiffness.transpose()).norm() < 1e-12);
        assert!(f.stiffness.clone().cholesky().is_some());
        assert!(f.mass.clone().cholesky().is_some());
    }

    #[test]
    fn value_shape_mass_matches_closed_form() {
        // int_0^1 (1 - 3x^2 + 2x^3)^2 dx = 13/35, once on each side of the node
        let f = StructureForms::assemble(&beam(4));
        let mut v = DVector::zeros(6);
        v[2] = 1.0;
        assert!((f.beam_sq(&v) - 2.0 * 0.25 * 13.0 / 35.0).abs() < 1e-15);
    }

    /// Smallest eigenvalue of `d_zzzz - d_zz` on (0,1) with clamped ends.
    /// Solutions are combinations of `cosh(a z), sinh(a z), cos(b z), sin(b z)`
    /// with `a^2 - b^2 = 1` and eigenvalue `a^2 b^2`; the boundary conditions
    /// give a 4x4 determinant whose first positive root in `b` is bisected.
    fn analytic_lowest_eigenvalue() -> f64 {
        let det = |b: f64| {
            let a = (b * b + 1.0).sqrt();
            let m = nalgebra::Matrix4::new(
                1.0, 0.0, 1.0, 0.0,
                0.0, a, 0.0, b,
                a.cosh(), a.sinh(), b.cos(), b.sin(),
                a * a.sinh(), a * a.cosh(), -b * b.sin(), b * b.cos(),
            );
            m.determinant()
        };
        let mut lo = 0.5;
        let step = 0.01;
        while det(lo).signum() == det(lo + step).signum() {
            lo += step;
        }
        let mut hi = lo + step;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if det(lo).signum() == det(mid).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let b = 0.5 * (lo + hi);
        (b * b + 1.0) * b * b
    }

    #[test]
    fn rayleigh_quotient_converges_to_clamped_eigenvalue() {
        let lowest = |n: usize| {
            let f = StructureForms::assemble(&beam(n));
            let l = f.mass.clone().cholesky().unwrap();
            let linv = l.l().try_inverse().unwrap();
            let a = &linv * &f.stiffness * linv.transpose();
            a.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        let exact = analytic_lowest_eigenvalue();
        // pure clamped beam value is 4.7300407449^4 = 500.56; tension raises it
        assert!(exact > 500.0 && exact < 560.0, "exact {exact}");
        let errors: Vec<f64> = [4, 8, 16].iter().map(|&n| (lowest(n) - exact).abs()).collect();
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 2.0, "observed order {order}, errors {errors:?}");
        }
    }
}
