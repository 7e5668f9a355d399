//! Self-check suite: algebraic identities, channel bookkeeping, engine limits,
//! and cross-checks of the Gaussian engine against the few-atom oracle.

use serde::Serialize;

use crate::decoherence::{ChannelConfig, TOTAL_PUMPING_RATE};
use crate::error::Result;
use crate::gaussian::{qnd_pulse, GaussianState};
use crate::oracle::{embedded_amplitude, exact_zeta, gaussian_kraus_measure, EnsembleState};
use crate::protocol::{run_protocol, run_protocol_observed, ProtocolConfig};
use crate::spin::{
    coupled_state, embedded_map, preparation_triple, prepare_fiducial, spin_operators, variance_fz,
    EmbeddedTriple, Fiducial, Preparation, SpinQuantum,
};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn check(name: &'static str, run: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match run() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check { name, passed: false, detail: e.to_string() },
    }
}

/// Relative deviation between the exact `n`-atom QND squeezing (after mapping
/// the embedded qubit onto the coherent state) and the Gaussian `1/(1+ξ)`.
pub fn hpa_deviation(prep: Preparation, f: SpinQuantum, n: usize, xi: f64) -> Result<(f64, f64)> {
    let target = preparation_triple(Fiducial::Scs, f, None)?;
    let source = EmbeddedTriple { third: None, ..preparation_triple(prep.into(), f, None)? };
    let u = embedded_map(&source, &target)?;
    let prior = EnsembleState::product(&source.up, n)?;
    let post = gaussian_kraus_measure(&prior, xi, 0.0)?.apply_local(&u)?;
    let exact = exact_zeta(&post, None)?;
    let g = qnd_pulse(&GaussianState::vacuum(false), xi)?;
    let gauss = 2.0 * g.var_x();
    Ok((exact, (exact - gauss).abs() / gauss))
}

/// Allowed HPA deviation: 2% plus a finite-size term `ξ/n`.
pub fn hpa_tolerance(n: usize, xi: f64) -> f64 {
    0.02 + xi / n as f64
}

pub fn run_all(channel: &ChannelConfig) -> Report {
    let spins: Vec<SpinQuantum> = (1..=12).map(|t| SpinQuantum::from_twice(t).unwrap()).collect();
    let ints: Vec<SpinQuantum> = (1..=5).map(|v| SpinQuantum::integer(v).unwrap()).collect();
    let mut checks = Vec::new();

    checks.push(check("spin.commutation_and_casimir", || {
        let i = num_complex::Complex64::new(0.0, 1.0);
        let mut worst: f64 = 0.0;
        for &f in &spins {
            let o = spin_operators(f);
            let c = &o.fx * &o.fy - &o.fy * &o.fx - &o.fz * i;
            let fv = f.value();
            let cas = &o.fx * &o.fx + &o.fy * &o.fy + &o.fz * &o.fz
                - nalgebra::DMatrix::identity(f.dim(), f.dim()) * num_complex::Complex64::new(fv * (fv + 1.0), 0.0);
            worst = worst.max(c.norm()).max(cas.norm());
        }
        Ok((worst < 1e-12, format!("max residual {worst:.2e}")))
    }));

    checks.push(check("spin.projection_noise", || {
        let mut worst: f64 = 0.0;
        for &f in &ints {
            let fv = f.value();
            for (kind, want) in [
                (Fiducial::Scs, fv / 2.0),
                (Fiducial::Cat, fv * fv),
                (Fiducial::ZeroX, fv * (fv + 1.0) / 2.0),
            ] {
                worst = worst.max((variance_fz(&prepare_fiducial(kind, f, None)?)? - want).abs());
            }
        }
        Ok((worst < 1e-12, format!("max |Δf_z² - closed form| {worst:.2e}")))
    }));

    checks.push(check("spin.coupled_states", || {
        let mut worst: f64 = 0.0;
        for &f in &ints {
            let o = spin_operators(f);
            for kind in [Fiducial::Scs, Fiducial::Cat, Fiducial::ZeroX] {
                let t = coupled_state(&prepare_fiducial(kind, f, None)?)?;
                let r = &o.fz * t.up.amps() - t.down.amps() * num_complex::Complex64::new(t.c, 0.0);
                worst = worst.max(r.norm()).max(t.up.inner(&t.down).norm());
            }
        }
        Ok((worst < 1e-12, format!("max residual {worst:.2e}")))
    }));

    checks.push(check("decoherence.flip_plus_loss_total", || {
        let mut worst: f64 = 0.0;
        let configured = ChannelConfig { enabled: true, ..channel.clone() };
        for &f in &ints {
            for p in Preparation::ALL {
                let r = configured.rates(p, f)?;
                if r.loss < 0.0 || r.flip < 0.0 {
                    return Ok((false, format!("negative rate for {p} at f = {f}")));
                }
                worst = worst.max((r.flip + r.loss - TOTAL_PUMPING_RATE).abs());
            }
        }
        Ok((worst < 1e-15, format!("max |flip + loss - 2/9| {worst:.2e}")))
    }));

    checks.push(check("gaussian.qnd_conditioning", || {
        let mut worst: f64 = 0.0;
        for xi in [0.1, 1.0, 3.0] {
            let s = qnd_pulse(&GaussianState::vacuum(false), xi)?;
            worst = worst.max((s.var_x() - 0.5 / (1.0 + xi)).abs());
            let two = qnd_pulse(&qnd_pulse(&GaussianState::vacuum(false), xi / 3.0)?, 2.0 * xi / 3.0)?;
            worst = worst.max((two.var_x() - s.var_x()).abs());
        }
        Ok((worst < 1e-12, format!("max deviation {worst:.2e}")))
    }));

    checks.push(check("protocol.ideal_countertwist", || {
        let f = SpinQuantum::integer(4)?;
        let mut worst: f64 = 0.0;
        for p in Preparation::ALL {
            let mut c = ProtocolConfig::new(f, p, 300.0, 0.0);
            c.channel = ChannelConfig::ideal();
            let rate = c.xi_rate()?;
            c.duration = 5.0 / rate;
            let tr = run_protocol(&c)?;
            for s in &tr.samples {
                worst = worst.max((s.zeta - (-rate * s.t).exp()).abs());
            }
        }
        Ok((worst < 1e-6, format!("max |ζ - e^-ξ| {worst:.2e}")))
    }));

    checks.push(check("protocol.uncertainty_relation", || {
        let f = SpinQuantum::integer(4)?;
        let mut worst = f64::INFINITY;
        for p in Preparation::ALL {
            let mut c = ProtocolConfig::new(f, p, 300.0, 1.5);
            c.channel = channel.clone();
            c.channel.validate()?;
            run_protocol_observed(&c, |_, s| worst = worst.min(s.uncertainty_margin()))?;
        }
        Ok((worst >= -1e-10, format!("min eigenvalue of cov + iΩ/2: {worst:.2e}")))
    }));

    checks.push(check("oracle.hpa_agreement", || {
        let (n, xi) = (4, 0.1);
        let f = SpinQuantum::integer(1)?;
        let mut worst: f64 = 0.0;
        for p in Preparation::ALL {
            worst = worst.max(hpa_deviation(p, f, n, xi)?.1);
        }
        let tol = hpa_tolerance(n, xi);
        Ok((worst <= tol, format!("max relative ζ deviation {worst:.4} at ξ = {xi}, n = {n} (tolerance {tol:.3})")))
    }));

    checks.push(check("oracle.pairwise_structure", || {
        let f = SpinQuantum::integer(1)?;
        let (n, xi) = (3, 0.01);
        let cat = preparation_triple(Fiducial::Cat, f, None)?;
        let post = gaussian_kraus_measure(&EnsembleState::product(&cat.up, n)?, xi, 0.0)?;
        let a0 = embedded_amplitude(&post, &cat, &[false, false, false])?;
        let a2 = embedded_amplitude(&post, &cat, &[true, true, false])?;
        let predicted = -2.0 * xi / (4.0 * n as f64);
        let rel = ((a2 / a0).re / predicted - 1.0).abs();
        Ok((rel <= xi, format!("pair amplitude relative error {rel:.2e} at ξ = {xi}")))
    }));

    let passed = checks.iter().all(|c| c.passed);
    Report { passed, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let r = run_all(&ChannelConfig::default());
        for c in &r.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert!(r.passed);
    }

    #[test]
    fn corrupted_channel_fails_named_check() {
        let bad = ChannelConfig { flip_override: Some(0.3), ..ChannelConfig::default() };
        let r = run_all(&bad);
        assert!(!r.passed);
        let c = r.checks.iter().find(|c| c.name == "decoherence.flip_plus_loss_total").unwrap();
        assert!(!c.passed);
        assert!(c.detail.contains("flip + loss = 2/9"));
    }
}
