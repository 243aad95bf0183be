//! Mode expectations needed by one filter step.
//!
//! Everything is an exact finite sum over the atoms of a [`ModeDistribution`],
//! except [`clutter_expectations`] which evaluates the Kronecker-structured
//! closed forms of the tracking-in-clutter mode law directly.

use nalgebra::DMatrix;

use crate::clutter::ClutterParams;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{kron, ones};
use crate::model::ModeDistribution;

/// Expectations over the dynamics half of the mode `{A_k, B_k, C_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsExpectations {
    /// E[A]
    pub ea: DMatrix<f64>,
    /// E[B]
    pub eb: DMatrix<f64>,
    /// E[C Cᵀ]
    pub ecc: DMatrix<f64>,
    /// E[A Σ Aᵀ]
    pub easa: DMatrix<f64>,
    /// E[A Υ Bᵀ]
    pub eaub: DMatrix<f64>,
    /// E[B Δ Bᵀ]
    pub ebdb: DMatrix<f64>,
}

/// Expectations over the measurement half of the next mode `{H, G, F}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementExpectations {
    /// E[H]
    pub eh: DMatrix<f64>,
    /// E[F]
    pub ef: DMatrix<f64>,
    /// E[G Gᵀ]
    pub egg: DMatrix<f64>,
    /// E[H Σ⁺ Hᵀ]
    pub ehsh: DMatrix<f64>,
    /// E[F Λ Fᵀ]
    pub eflf: DMatrix<f64>,
    /// E[H (E[A] Λ + E[B] Υᵀ) Fᵀ]
    pub ehxf: DMatrix<f64>,
}

impl MeasurementExpectations {
    pub fn measurement_dim(&self) -> usize {
        self.eh.nrows()
    }

    /// Expectations of an empty scan (`m = 0`).
    pub fn empty(n: usize) -> Self {
        Self {
            eh: DMatrix::zeros(0, n),
            ef: DMatrix::zeros(0, n),
            egg: DMatrix::zeros(0, 0),
            ehsh: DMatrix::zeros(0, 0),
            eflf: DMatrix::zeros(0, 0),
            ehxf: DMatrix::zeros(0, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepExpectations {
    pub dynamics: DynamicsExpectations,
    pub measurement: MeasurementExpectations,
}

pub fn dynamics_expectations(
    dist: &ModeDistribution,
    sigma: &DMatrix<f64>,
    upsilon: &DMatrix<f64>,
    delta: &DMatrix<f64>,
) -> Result<DynamicsExpectations> {
    if dist.is_empty() {
        return Err(Error::InvalidDistribution("no atoms".into()));
    }
    let n = dist.state_dim();
    let p = dist.input_dim();
    check_dim("Σ rows", n, sigma.nrows())?;
    check_dim("Σ cols", n, sigma.ncols())?;
    check_dim("Υ rows", n, upsilon.nrows())?;
    check_dim("Υ cols", p, upsilon.ncols())?;
    check_dim("Δ rows", p, delta.nrows())?;
    check_dim("Δ cols", p, delta.ncols())?;
    Ok(DynamicsExpectations {
        ea: dist.expect(|m| m.a.clone()),
        eb: dist.expect(|m| m.b.clone()),
        ecc: dist.expect(|m| &m.c * m.c.transpose()),
        easa: dist.expect(|m| &m.a * sigma * m.a.transpose()),
        eaub: dist.expect(|m| &m.a * upsilon * m.b.transpose()),
        ebdb: dist.expect(|m| &m.b * delta * m.b.transpose()),
    })
}

/// `sigma_next` is Σ_{k+1}; `lambda`, `upsilon` are Λ_k, Υ_k; `ea`, `eb`
/// come from the dynamics half of the same step.
pub fn measurement_expectations(
    dist_next: &ModeDistribution,
    sigma_next: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    ea: &DMatrix<f64>,
    eb: &DMatrix<f64>,
    upsilon: &DMatrix<f64>,
) -> Result<MeasurementExpectations> {
    if dist_next.is_empty() {
        return Err(Error::InvalidDistribution("no atoms".into()));
    }
    let n = dist_next.state_dim();
    check_dim("Σ⁺ rows", n, sigma_next.nrows())?;
    check_dim("Λ rows", n, lambda.nrows())?;
    check_dim("E[A] rows", n, ea.nrows())?;
    check_dim("E[B] cols vs Υ cols", eb.ncols(), upsilon.ncols())?;
    // fixed across atoms
    let inner = ea * lambda + eb * upsilon.transpose();
    Ok(MeasurementExpectations {
        eh: dist_next.expect(|m| m.h.clone()),
        ef: dist_next.expect(|m| m.f.clone()),
        egg: dist_next.expect(|m| &m.g * m.g.transpose()),
        ehsh: dist_next.expect(|m| &m.h * sigma_next * m.h.transpose()),
        eflf: dist_next.expect(|m| &m.f * lambda * m.f.transpose()),
        ehxf: dist_next.expect(|m| &m.h * &inner * m.f.transpose()),
    })
}

/// The N×N weighting of E[F Λ Fᵀ] in the always-detected clutter law.
pub fn xi(n_det: usize) -> DMatrix<f64> {
    if n_det <= 1 {
        return DMatrix::zeros(n_det, n_det);
    }
    let nf = n_det as f64;
    (DMatrix::from_element(n_det, n_det, nf - 2.0) + DMatrix::identity(n_det, n_det)) / nf
}

/// Closed-form measurement expectations of the clutter mode law for a scan
/// of `n_det` detections.
///
/// `miss_weight` is the probability of the all-clutter atom; zero gives the
/// always-detected law whose expectations are the plain Kronecker forms.
/// For `miss_weight > 0` the result is the two-component mixture of those
/// forms with the all-clutter atom's (trivial) expectations.
pub fn clutter_expectations(
    params: &ClutterParams,
    n_det: usize,
    a: &DMatrix<f64>,
    sigma_next: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    g_cl: f64,
    miss_weight: f64,
) -> Result<MeasurementExpectations> {
    if n_det < 1 {
        return Err(Error::NoDetections(n_det));
    }
    let n = a.nrows();
    check_dim("H_nom cols", n, params.h_nom.ncols())?;
    check_dim("Σ⁺ rows", n, sigma_next.nrows())?;
    check_dim("Λ rows", n, lambda.nrows())?;
    let nf = n_det as f64;
    let h = &params.h_nom;
    let ha = h * a;
    let hsh = h * sigma_next * h.transpose();
    let hal = &ha * lambda * ha.transpose();
    let gnom2 = params.g_nom * params.g_nom;
    let gcl2 = g_cl * g_cl;

    let one = ones(n_det);
    let all_ones = DMatrix::from_element(n_det, n_det, 1.0);
    let eye = DMatrix::identity(n_det, n_det);

    let eh = kron(&one, h) / nf;
    let ef = kron(&one, &ha) * ((nf - 1.0) / nf);
    let ehsh = kron(&eye, &hsh) / nf;
    let egg = kron(
        &eye,
        &DMatrix::from_element(1, 1, gnom2 + (nf - 1.0) * gcl2),
    ) / nf;
    let eflf = kron(&xi(n_det), &hal);
    let ehxf = kron(&(&all_ones - &eye), &hal) / nf;

    if miss_weight == 0.0 {
        return Ok(MeasurementExpectations {
            eh,
            ef,
            egg,
            ehsh,
            eflf,
            ehxf,
        });
    }
    let hit = 1.0 - miss_weight;
    Ok(MeasurementExpectations {
        eh: eh * hit,
        ef: ef * hit + kron(&one, &ha) * miss_weight,
        egg: egg * hit + kron(&eye, &DMatrix::from_element(1, 1, gcl2)) * miss_weight,
        ehsh: ehsh * hit,
        eflf: eflf * hit + kron(&all_ones, &hal) * miss_weight,
        ehxf: ehxf * hit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Atom, ModeRealization};
    use alloc::vec;
    use approx::assert_relative_eq;

    fn scalar(a: f64, b: f64, c: f64, h: f64, g: f64, f: f64) -> ModeRealization {
        let s = |x: f64| DMatrix::from_element(1, 1, x);
        ModeRealization::new(s(a), s(b), s(c), s(h), s(g), s(f)).unwrap()
    }

    fn two_equiprobable(m0: ModeRealization, m1: ModeRealization) -> ModeDistribution {
        ModeDistribution::new(vec![
            Atom {
                weight: 0.5,
                mode: m0,
            },
            Atom {
                weight: 0.5,
                mode: m1,
            },
        ])
        .unwrap()
    }

    #[test]
    fn degenerate_distribution() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 0.95]);
        let mode =
            ModeRealization::dynamics_only(a.clone(), DMatrix::zeros(2, 0), DMatrix::zeros(2, 1))
                .unwrap();
        let sigma = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let e = dynamics_expectations(
            &ModeDistribution::deterministic(mode),
            &sigma,
            &DMatrix::zeros(2, 0),
            &DMatrix::zeros(0, 0),
        )
        .unwrap();
        assert_eq!(e.ea, a);
        assert_relative_eq!(e.easa, &a * &sigma * a.transpose(), epsilon = 1e-14);
    }

    #[test]
    fn sign_flip_atoms() {
        // A ∈ {1, -1}: E[A] = 0, E[AΣA] = Σ = 2
        let d = two_equiprobable(
            scalar(1.0, 0.0, 0.0, 1.0, 1.0, 0.0),
            scalar(-1.0, 0.0, 0.0, 1.0, 1.0, 0.0),
        );
        let e = dynamics_expectations(
            &d,
            &DMatrix::from_element(1, 1, 2.0),
            &DMatrix::zeros(1, 1),
            &DMatrix::zeros(1, 1),
        )
        .unwrap();
        assert_eq!(e.ea[(0, 0)], 0.0);
        assert_eq!(e.easa[(0, 0)], 2.0);
    }

    #[test]
    fn zero_input_gain() {
        let d = two_equiprobable(
            scalar(0.5, 0.0, 1.0, 1.0, 1.0, 0.0),
            scalar(0.9, 0.0, 2.0, 1.0, 1.0, 0.0),
        );
        let e = dynamics_expectations(
            &d,
            &DMatrix::from_element(1, 1, 2.0),
            &DMatrix::from_element(1, 1, 3.0),
            &DMatrix::from_element(1, 1, 4.0),
        )
        .unwrap();
        assert_eq!(e.eaub[(0, 0)], 0.0);
        assert_eq!(e.ebdb[(0, 0)], 0.0);
        assert_relative_eq!(e.ecc[(0, 0)], 2.5);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let d = ModeDistribution::deterministic(scalar(1.0, 0.0, 1.0, 1.0, 1.0, 0.0));
        let r = dynamics_expectations(
            &d,
            &DMatrix::zeros(2, 2),
            &DMatrix::zeros(1, 1),
            &DMatrix::zeros(1, 1),
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_feedback_term() {
        let d = two_equiprobable(
            scalar(1.0, 0.0, 1.0, 1.0, 1.0, 0.0),
            scalar(1.0, 0.0, 1.0, 2.0, 3.0, 0.0),
        );
        let one = DMatrix::from_element(1, 1, 1.0);
        let e = measurement_expectations(&d, &one, &one, &one, &one, &one).unwrap();
        assert_eq!(e.ef[(0, 0)], 0.0);
        assert_eq!(e.eflf[(0, 0)], 0.0);
        assert_eq!(e.ehxf[(0, 0)], 0.0);
    }

    #[test]
    fn nominal_observation_of_scaled_identity() {
        let mode = ModeRealization::new(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 0),
            DMatrix::zeros(2, 1),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 2),
        )
        .unwrap();
        let sigma = DMatrix::identity(2, 2) * 30.0;
        let e = measurement_expectations(
            &ModeDistribution::deterministic(mode),
            &sigma,
            &DMatrix::zeros(2, 2),
            &DMatrix::identity(2, 2),
            &DMatrix::zeros(2, 0),
            &DMatrix::zeros(2, 0),
        )
        .unwrap();
        assert_eq!(e.ehsh[(0, 0)], 30.0);
    }

    #[test]
    fn noise_shaping_enumeration() {
        let d = two_equiprobable(
            scalar(1.0, 0.0, 1.0, 1.0, 1.0, 0.0),
            scalar(1.0, 0.0, 1.0, 1.0, 2.0, 0.0),
        );
        let one = DMatrix::from_element(1, 1, 1.0);
        let e = measurement_expectations(&d, &one, &one, &one, &one, &one).unwrap();
        assert_eq!(e.egg[(0, 0)], 2.5);
    }

    #[test]
    fn xi_small_cases() {
        assert_eq!(xi(1), DMatrix::zeros(1, 1));
        assert_relative_eq!(xi(2), DMatrix::identity(2, 2) * 0.5, epsilon = 1e-15);
        let x3 = xi(3);
        assert_relative_eq!(x3[(0, 0)], 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(x3[(0, 1)], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn clutter_single_detection() {
        let params = ClutterParams::reference(0.5);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 0.95]);
        let sigma = DMatrix::from_row_slice(2, 2, &[40.0, 3.0, 3.0, 6.0]);
        let lambda = DMatrix::from_row_slice(2, 2, &[10.0, 1.0, 1.0, 2.0]);
        let e = clutter_expectations(&params, 1, &a, &sigma, &lambda, 3.0, 0.0).unwrap();
        assert_eq!(e.eh, params.h_nom);
        assert_eq!(e.ef, DMatrix::zeros(1, 2));
        assert_eq!(e.eflf, DMatrix::zeros(1, 1));
        assert_relative_eq!(e.egg[(0, 0)], 30.0, epsilon = 1e-12);
    }

    #[test]
    fn clutter_rejects_empty_scan() {
        let params = ClutterParams::reference(0.5);
        let a = DMatrix::identity(2, 2);
        let r = clutter_expectations(&params, 0, &a, &a, &a, 1.0, 0.0);
        assert_eq!(r, Err(Error::NoDetections(0)));
    }
}
