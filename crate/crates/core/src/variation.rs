//! First variations of the energy and the gradient-flow velocities.
//!
//! The weak-form variations are the exact directional derivatives of the
//! discrete energy in [`crate::energy::energy_elm`]: each node quantity is
//! linearized with the same stencils that define it
//! (`d kappa = (det(D1 phi, D2 g) + det(D1 g, D2 phi)) / |D1 g|^3 - 3 kappa <D1 g, D1 phi> / |D1 g|^2`,
//! and similarly for `div eta`, `|d_s eta|^2` and the arc weights). They
//! therefore agree with finite differences of the energy up to rounding,
//! and with the continuum variations up to `O(h^2)`.
//!
//! The strong-form velocities are
//!
//! ```text
//! V = -d_ss z + delta d_s(z <d_s eta, nu>) - z^2 kappa / 2 - lambda |d_s eta|^2 kappa / 2 + kappa
//! W = lambda d_ss eta + delta (d_s z) tau + delta z kappa nu
//! ```
//!
//! with `z = kappa + delta div eta`; the curve moves as `gamma_t = V nu`.

use serde::{Deserialize, Serialize};

use crate::energy::DensityTerms;
use crate::error::{Error, Result};
use crate::geometry::{central_d1, central_d2, det, CurveState, DirectorField, ModelParams, Vec2};

/// Which functional is differentiated: `E` omits the length term of `E_LM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Functional {
    E,
    #[default]
    Elm,
}

impl Functional {
    fn length_weight(self) -> f64 {
        match self {
            Functional::E => 0.0,
            Functional::Elm => 1.0,
        }
    }
}

fn check_len(name: &str, v: &[Vec2], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DegenerateCurve(format!("{name} has {} samples, curve has {n}", v.len())));
    }
    Ok(())
}

/// Directional derivative of the discrete energy along `(phi, psi)`.
pub fn first_variation(
    curve: &CurveState,
    field: &DirectorField,
    params: &ModelParams,
    phi: &[Vec2],
    psi: &[Vec2],
    functional: Functional,
) -> Result<f64> {
    let n = curve.n();
    check_len("phi", phi, n)?;
    check_len("psi", psi, n)?;
    let terms = DensityTerms::new(curve, field, params)?;
    let h = curve.grid_step();
    let (lambda, delta) = (params.lambda, params.delta);
    let g1 = curve.d1();
    let g2 = curve.d2();
    let e1 = central_d1(&field.vectors, h);
    let p1 = central_d1(phi, h);
    let p2 = central_d2(phi, h);
    let s1 = central_d1(psi, h);
    let kappa = curve.curvature();
    let chords = curve.chords();
    let pts = curve.points();
    let w = curve.arc_weights();
    let c = functional.length_weight();

    // derivative of each forward chord length
    let dchord: Vec<f64> = (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            (pts[j] - pts[i]).dot(&(phi[j] - phi[i])) / chords[i]
        })
        .collect();

    let mut total = 0.0;
    for i in 0..n {
        let (a, b, e) = (g1[i], g2[i], e1[i]);
        let r2 = a.norm_squared();
        let r3 = r2 * r2.sqrt();
        let stretch = a.dot(&p1[i]) / r2;
        let dkappa = (det(p1[i], b) + det(a, p2[i])) / r3 - 3.0 * kappa[i] * stretch;
        let ddiv = (s1[i].dot(&a) + e.dot(&p1[i])) / r2 - 2.0 * terms.div[i] * stretch;
        let dq = 2.0 * e.dot(&s1[i]) / r2 - 2.0 * terms.grad_sq[i] * stretch;
        let z = terms.z[i];
        let density = 0.5 * z * z + 0.5 * lambda * terms.grad_sq[i] + c;
        let ddensity = z * (dkappa + delta * ddiv) + 0.5 * lambda * dq;
        let dw = 0.5 * (dchord[(i + n - 1) % n] + dchord[i]);
        total += ddensity * w[i] + density * dw;
    }
    Ok(total)
}

/// Variation with respect to the curve in the direction `phi`.
pub fn first_variation_gamma(
    curve: &CurveState,
    field: &DirectorField,
    params: &ModelParams,
    phi: &[Vec2],
    functional: Functional,
) -> Result<f64> {
    let zero = vec![Vec2::zeros(); curve.n()];
    first_variation(curve, field, params, phi, &zero, functional)
}

/// Variation with respect to the director in the direction `psi`
/// (identical for `E` and `E_LM`).
pub fn first_variation_eta(
    curve: &CurveState,
    field: &DirectorField,
    params: &ModelParams,
    psi: &[Vec2],
) -> Result<f64> {
    let zero = vec![Vec2::zeros(); curve.n()];
    first_variation(curve, field, params, &zero, psi, Functional::Elm)
}

/// Strong-form gradient-flow velocities of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationFields {
    /// `z = kappa + delta div eta`
    pub z: Vec<f64>,
    /// Normal velocity of the curve along `nu`.
    pub v: Vec<f64>,
    /// Director velocity.
    pub w: Vec<Vec2>,
    /// `-\oint (V^2 + |W|^2) ds`
    pub dissipation: f64,
}

impl VariationFields {
    pub fn max_v(&self) -> f64 {
        self.v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_w(&self) -> f64 {
        self.w.iter().fold(0.0, |m, x| m.max(x.norm()))
    }

    /// `max(|V|, |W|)` over all samples.
    pub fn sup_norm(&self) -> f64 {
        self.max_v().max(self.max_w())
    }
}

/// Evaluates `V`, `W` and the dissipation rate.
pub fn gradient_fields(
    curve: &CurveState,
    field: &DirectorField,
    params: &ModelParams,
    functional: Functional,
) -> Result<VariationFields> {
    let n = curve.n();
    if n < 16 {
        return Err(Error::DegenerateCurve(format!(
            "gradient fields need at least 16 samples, got {n}"
        )));
    }
    let terms = DensityTerms::new(curve, field, params)?;
    let (lambda, delta) = (params.lambda, params.delta);
    let kappa = curve.curvature();
    let nu = curve.normals();
    let tau = curve.tangents();
    let c = functional.length_weight();

    let z = terms.z;
    let dz = curve.ds(&z);
    let dssz = curve.dss(&z);
    let coupling: Vec<f64> = (0..n).map(|i| z[i] * terms.ds_eta[i].dot(&nu[i])).collect();
    let dcoupling = curve.ds(&coupling);
    let dss_eta = curve.dss(&field.vectors);

    let v: Vec<f64> = (0..n)
        .map(|i| {
            -dssz[i] + delta * dcoupling[i] - 0.5 * z[i] * z[i] * kappa[i]
                - 0.5 * lambda * terms.grad_sq[i] * kappa[i]
                + c * kappa[i]
        })
        .collect();
    let w: Vec<Vec2> = (0..n)
        .map(|i| dss_eta[i] * lambda + tau[i] * (delta * dz[i]) + nu[i] * (delta * z[i] * kappa[i]))
        .collect();
    let dissipation = -curve.integrate(|i| v[i] * v[i] + w[i].norm_squared());
    Ok(VariationFields { z, v, w, dissipation })
}

/// `|dE[phi] - \oint <-V nu, phi> ds|`: agreement between the weak variation
/// and the strong normal velocity. Expected `O(h^2)` for smooth data.
pub fn weak_strong_consistency(
    curve: &CurveState,
    field: &DirectorField,
    params: &ModelParams,
    phi: &[Vec2],
    functional: Functional,
) -> Result<f64> {
    let weak = first_variation_gamma(curve, field, params, phi, functional)?;
    let fields = gradient_fields(curve, field, params, functional)?;
    let nu = curve.normals();
    let strong = -curve.integrate(|i| fields.v[i] * nu[i].dot(&phi[i]));
    Ok((weak - strong).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{circle_minimizer, energy_elm};
    use std::f64::consts::PI;

    fn circle(n: usize, r: f64) -> CurveState {
        CurveState::from_fn(n, |x| Vec2::new(r * x.cos(), r * x.sin())).unwrap()
    }

    fn wavy(n: usize) -> (CurveState, DirectorField) {
        let c = CurveState::from_fn(n, |x| {
            let r = 1.0 + 0.08 * (3.0 * x).cos() - 0.05 * (2.0 * x).sin();
            Vec2::new(r * x.cos(), r * x.sin())
        })
        .unwrap();
        let h = c.grid_step();
        let eta = DirectorField::from_fn(n, |i| {
            let x = h * i as f64;
            Vec2::new(0.4 * (2.0 * x).cos() + 0.1, 0.3 * x.sin() - 0.2 * (3.0 * x).cos())
        });
        (c, eta)
    }

    fn smooth_test(n: usize, k: f64, phase: f64) -> Vec<Vec2> {
        let h = 2.0 * PI / n as f64;
        (0..n)
            .map(|i| {
                let x = h * i as f64;
                Vec2::new((k * x + phase).cos(), 0.5 * (2.0 * k * x).sin())
            })
            .collect()
    }

    #[test]
    fn constant_directions_give_zero() {
        let (c, eta) = wavy(64);
        let p = ModelParams::new(1.3, 0.8).unwrap();
        let k = vec![Vec2::new(0.7, -1.1); 64];
        assert!(first_variation_gamma(&c, &eta, &p, &k, Functional::Elm).unwrap().abs() < 1e-10);
        assert!(first_variation_eta(&c, &eta, &p, &k).unwrap().abs() < 1e-10);
    }

    #[test]
    fn matches_central_differences_of_energy() {
        let (c, eta) = wavy(64);
        let p = ModelParams::new(1.3, 0.8).unwrap();
        let phi = smooth_test(64, 2.0, 0.3);
        let psi = smooth_test(64, 3.0, -0.4);
        let energy = |t: f64| {
            let g: Vec<Vec2> = c.points().iter().zip(&phi).map(|(a, b)| a + b * t).collect();
            let e: Vec<Vec2> = eta.vectors.iter().zip(&psi).map(|(a, b)| a + b * t).collect();
            energy_elm(&CurveState::new(g).unwrap(), &DirectorField::new(e), &p)
                .unwrap()
                .total_elm
        };
        let eps = 1e-5;
        let fd = (energy(eps) - energy(-eps)) / (2.0 * eps);
        let an = first_variation(&c, &eta, &p, &phi, &psi, Functional::Elm).unwrap();
        assert!((fd - an).abs() < 1e-7 * an.abs().max(1.0), "{fd} vs {an}");
    }

    #[test]
    fn linear_in_direction() {
        let (c, eta) = wavy(64);
        let p = ModelParams::new(0.7, -1.2).unwrap();
        let a = smooth_test(64, 1.0, 0.1);
        let b = smooth_test(64, 4.0, 1.0);
        let ab: Vec<Vec2> = a.iter().zip(&b).map(|(x, y)| x * 2.0 - y * 0.5).collect();
        let f = |d: &[Vec2]| first_variation_gamma(&c, &eta, &p, d, Functional::Elm).unwrap();
        let lhs = f(&ab);
        let rhs = 2.0 * f(&a) - 0.5 * f(&b);
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        let g = |d: &[Vec2]| first_variation_eta(&c, &eta, &p, d).unwrap();
        assert!((g(&ab) - (2.0 * g(&a) - 0.5 * g(&b))).abs() < 1e-12);
    }

    #[test]
    fn dilation_of_unit_circle() {
        // E_LM on circles is pi/R + 2 pi R; the inward normal shrinks R.
        let c = circle(128, 1.0);
        let p = ModelParams::new(1.0, 0.0).unwrap();
        let outward: Vec<Vec2> = c.normals().iter().map(|v| -v).collect();
        let d = first_variation_gamma(&c, &DirectorField::zeros(128), &p, &outward, Functional::Elm).unwrap();
        assert!((d - PI).abs() < 0.01 * PI, "{d}");
        let d = first_variation_gamma(&c, &DirectorField::zeros(128), &p, c.normals(), Functional::Elm).unwrap();
        assert!((d + PI).abs() < 0.01 * PI);
    }

    #[test]
    fn eta_variation_along_normal() {
        let c = circle(128, 1.0);
        let p = ModelParams::new(1.0, 1.0).unwrap();
        let d = first_variation_eta(&c, &DirectorField::zeros(128), &p, c.normals()).unwrap();
        assert!((d + 2.0 * PI).abs() < 2.0 * PI * c.grid_step().powi(2), "{d}");
    }

    #[test]
    fn velocities_on_unit_circle() {
        let c = circle(128, 1.0);
        let h2 = c.grid_step().powi(2);
        let f = gradient_fields(&c, &DirectorField::zeros(128), &ModelParams::new(1.0, 0.0).unwrap(), Functional::Elm)
            .unwrap();
        assert!(f.v.iter().all(|v| (v - 0.5).abs() < h2));
        assert!(f.max_w() == 0.0);
        let f = gradient_fields(&c, &DirectorField::zeros(128), &ModelParams::new(1.0, 1.0).unwrap(), Functional::Elm)
            .unwrap();
        for (w, nu) in f.w.iter().zip(c.normals()) {
            assert!((w - nu).norm() < h2);
        }
    }

    #[test]
    fn minimizer_is_stationary_at_second_order() {
        let p = ModelParams::new(1.0, 1.0).unwrap();
        let sup = |n| {
            let (c, eta, _) = circle_minimizer(&p, n).unwrap();
            gradient_fields(&c, &eta, &p, Functional::Elm).unwrap().sup_norm()
        };
        let (a, b) = (sup(64), sup(128));
        assert!(a < 0.1, "{a}");
        assert!(a / b > 3.5, "{a} {b}");
    }

    #[test]
    fn dissipation_is_nonpositive() {
        let (c, eta) = wavy(64);
        for (l, d) in [(1.0, 0.0), (0.3, 2.0), (2.0, -1.0)] {
            let f = gradient_fields(&c, &eta, &ModelParams::new(l, d).unwrap(), Functional::Elm).unwrap();
            assert!(f.dissipation <= 0.0);
        }
    }

    #[test]
    fn weak_and_strong_forms_agree() {
        let p = ModelParams::new(1.0, 0.0).unwrap();
        let res = |n| {
            let c = circle(n, 1.0);
            let h = c.grid_step();
            let phi: Vec<Vec2> = c
                .normals()
                .iter()
                .enumerate()
                .map(|(i, v)| v * (h * i as f64).sin())
                .collect();
            weak_strong_consistency(&c, &DirectorField::zeros(n), &p, &phi, Functional::Elm).unwrap()
        };
        let (a, b) = (res(32), res(64));
        assert!(a < 0.05);
        assert!(b <= a / 3.5 || b < 1e-12, "{a} {b}");
    }

    #[test]
    fn too_few_samples_for_velocities() {
        let c = circle(8, 1.0);
        assert!(gradient_fields(&c, &DirectorField::zeros(8), &ModelParams::new(1.0, 0.0).unwrap(), Functional::Elm)
            .is_err());
    }
}
