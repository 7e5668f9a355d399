//! Multilevel Holstein-Primakoff Gaussian engine.
//!
//! The collective state is linearized about the fiducial mode, which holds
//! nearly every atom. Fluctuations of the coupled mode `↓` (and optionally of
//! the third mode `T`) are bosonic quadratures ordered `(X_↓, P_↓, X_T, P_T)`
//! with `[X, P] = i`, so the vacuum has variance 1/2 per quadrature.
//!
//! Light enters only through the measurement strength `ξ`: one pulse couples
//! `X_↓` to a vacuum light mode with gain `κ = √ξ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::SpinQuantum;

pub const VACUUM_VARIANCE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    pub cov: DMatrix<f64>,
    pub mean: DVector<f64>,
    /// Fraction of atoms still in the hyperfine manifold.
    pub survive: f64,
    /// Remaining fraction of the coherent mean spin.
    pub meanspin: f64,
}

impl GaussianState {
    pub fn vacuum(track_third: bool) -> Self {
        let n = if track_third { 4 } else { 2 };
        Self {
            cov: DMatrix::identity(n, n) * VACUUM_VARIANCE,
            mean: DVector::zeros(n),
            survive: 1.0,
            meanspin: 1.0,
        }
    }

    pub fn modes(&self) -> usize {
        self.cov.nrows() / 2
    }

    pub fn tracks_third(&self) -> bool {
        self.modes() == 2
    }

    pub fn var_x(&self) -> f64 {
        self.cov[(0, 0)]
    }

    pub fn var_p(&self) -> f64 {
        self.cov[(1, 1)]
    }

    pub fn is_finite(&self) -> bool {
        self.cov.iter().all(|v| v.is_finite())
            && self.mean.iter().all(|v| v.is_finite())
            && self.survive.is_finite()
            && self.meanspin.is_finite()
    }

    /// Smallest eigenvalue of `cov + (i/2)Ω`; nonnegative for physical states.
    ///
    /// Each mode is first rebalanced by the local symplectic squeeze that
    /// equalizes its `X` and `P` variances. Congruence by a symplectic matrix
    /// preserves the sign of the spectrum (Sylvester), and the rebalanced
    /// matrix stays well conditioned even when an antisqueezed quadrature
    /// grows by many orders of magnitude.
    pub fn uncertainty_margin(&self) -> f64 {
        let n = self.cov.nrows();
        let mut scale = DVector::<f64>::from_element(n, 1.0);
        for j in 0..self.modes() {
            let (vx, vp) = (self.cov[(2 * j, 2 * j)], self.cov[(2 * j + 1, 2 * j + 1)]);
            if vx > 0.0 && vp > 0.0 {
                let s = (vp / vx).powf(0.25);
                scale[2 * j] = s;
                scale[2 * j + 1] = 1.0 / s;
            }
        }
        let balanced = DMatrix::from_fn(n, n, |i, j| self.cov[(i, j)] * scale[i] * scale[j]);
        // A + iB ⪰ 0  ⇔  [[A, -B], [B, A]] ⪰ 0 for real symmetric A, antisymmetric B.
        let omega = symplectic_form(self.modes()) * 0.5;
        let mut real = DMatrix::<f64>::zeros(2 * n, 2 * n);
        real.view_mut((0, 0), (n, n)).copy_from(&balanced);
        real.view_mut((n, n), (n, n)).copy_from(&balanced);
        real.view_mut((0, n), (n, n)).copy_from(&(-&omega));
        real.view_mut((n, 0), (n, n)).copy_from(&omega);
        SymmetricEigen::new(real).eigenvalues.min()
    }

    /// Covariance symmetry, the uncertainty relation, and `survive`,
    /// `meanspin` in `(0, 1]`.
    pub fn check_physical(&self, tol: f64) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::Guard("non-finite Gaussian state".into()));
        }
        let asym = (&self.cov - self.cov.transpose()).amax();
        let scale = self.cov.amax().max(1.0);
        if asym > tol * scale {
            return Err(Error::Guard(format!("covariance asymmetry {asym:e}")));
        }
        let margin = self.uncertainty_margin();
        if margin < -tol {
            return Err(Error::Guard(format!("uncertainty relation violated: λ_min = {margin:e}")));
        }
        for (name, v) in [("survive", self.survive), ("meanspin", self.meanspin)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Guard(format!("{name} = {v} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// `Ω = ⊕ [[0, 1], [-1, 0]]` over `modes` modes.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * modes, 2 * modes);
    for j in 0..modes {
        o[(2 * j, 2 * j + 1)] = 1.0;
        o[(2 * j + 1, 2 * j)] = -1.0;
    }
    o
}

/// Measurement strength `ξ = OD · γ_sτ · Δf_z² / (9 f²)`: projection noise
/// over shot noise for one probe exposure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementStrength {
    pub xi: f64,
    pub od: f64,
    pub gamma_tau: f64,
    pub dfz2: f64,
    pub f: SpinQuantum,
}

pub fn measurement_strength(od: f64, gamma_tau: f64, dfz2: f64, f: SpinQuantum) -> Result<MeasurementStrength> {
    for (name, v) in [("od", od), ("gamma_tau", gamma_tau), ("dfz2", dfz2)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} = {v} must be finite and ≥ 0")));
        }
    }
    let fv = f.value();
    let xi = od * gamma_tau * dfz2 / (9.0 * fv * fv);
    Ok(MeasurementStrength { xi, od, gamma_tau, dfz2, f })
}

/// QND probe of strength `xi` conditioned on a zero homodyne outcome.
///
/// The Faraday coupling `exp(-iκ X_↓ p_L)` maps `x_L → x_L + κX_↓` and
/// `P_↓ → P_↓ - κ p_L`; the atomic block is then conditioned on `x_L` by a
/// Schur complement. From vacuum, `Var(X_↓) = (1/2)/(1 + ξ)`.
pub fn qnd_pulse(state: &GaussianState, xi: f64) -> Result<GaussianState> {
    qnd_pulse_with_outcome(state, xi, 0.0)
}

pub fn qnd_pulse_with_outcome(state: &GaussianState, xi: f64, outcome: f64) -> Result<GaussianState> {
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(Error::InvalidArgument(format!("xi = {xi} must be finite and ≥ 0")));
    }
    if xi == 0.0 {
        return Ok(state.clone());
    }
    let n = state.cov.nrows();
    let kappa = xi.sqrt();
    // joint ordering: atoms (0..n), x_L (n), p_L (n+1)
    let mut joint = DMatrix::<f64>::zeros(n + 2, n + 2);
    joint.view_mut((0, 0), (n, n)).copy_from(&state.cov);
    joint[(n, n)] = VACUUM_VARIANCE;
    joint[(n + 1, n + 1)] = VACUUM_VARIANCE;
    let mut joint_mean = DVector::<f64>::zeros(n + 2);
    joint_mean.rows_mut(0, n).copy_from(&state.mean);

    let mut s = DMatrix::<f64>::identity(n + 2, n + 2);
    s[(n, 0)] = kappa;
    s[(1, n + 1)] = -kappa;
    let joint = &s * joint * s.transpose();
    let joint_mean = &s * joint_mean;

    let var_meter = joint[(n, n)];
    let cross = joint.view((0, n), (n, 1)).into_owned();
    let cov = state_block(&joint, n) - &cross * cross.transpose() / var_meter;
    let mean = joint_mean.rows(0, n).into_owned() + cross.column(0) * ((outcome - joint_mean[n]) / var_meter);
    Ok(GaussianState { cov: symmetrize(cov), mean, ..state.clone() })
}

fn state_block(joint: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    joint.view((0, 0), (n, n)).into_owned()
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Countertwisting squeeze of the `↓` mode: `X_↓ → e^{-dξ/2} X_↓`,
/// `P_↓ → e^{dξ/2} P_↓`.
pub fn countertwist_step(state: &GaussianState, dxi: f64) -> Result<GaussianState> {
    if !(dxi >= 0.0 && dxi.is_finite()) {
        return Err(Error::InvalidArgument(format!("dxi = {dxi} must be finite and ≥ 0")));
    }
    let mut out = state.clone();
    let (sx, sp) = ((-dxi / 2.0).exp(), (dxi / 2.0).exp());
    let n = out.cov.nrows();
    for j in 0..n {
        out.cov[(0, j)] *= sx;
        out.cov[(j, 0)] *= sx;
        out.cov[(1, j)] *= sp;
        out.cov[(j, 1)] *= sp;
    }
    out.mean[0] *= sx;
    out.mean[1] *= sp;
    Ok(out)
}

/// Metrological squeezing `ζ = factor · 2 Var(X_↓) / meanspin²`.
///
/// `internal_factor` is 1 for the coherent-state target map and the Yurke
/// factor for the internally squeezed target.
pub fn zeta_metrological(state: &GaussianState, internal_factor: f64) -> Result<f64> {
    if state.meanspin.is_nan() || state.meanspin <= 0.0 {
        return Err(Error::Guard(format!("mean spin {} destroyed; ζ undefined", state.meanspin)));
    }
    Ok(internal_factor * 2.0 * state.var_x() / (state.meanspin * state.meanspin))
}

pub fn to_db(zeta: f64) -> f64 {
    -10.0 * zeta.log10()
}
