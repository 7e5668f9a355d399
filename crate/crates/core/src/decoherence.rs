//! Optical-pumping decoherence acting on the Gaussian state.
//!
//! Photon scattering at rate `γ_s` (the unit of time) pumps atoms at a total
//! rate `2/9` for every preparation, split into spin flips `↑ → ↓`, loss to the
//! other hyperfine manifold, and leakage to other sublevels. With the microwave
//! cleanup pulse applied the leaked atoms count as lost; when the third state
//! is retained, the `↓ → T` chain carries part of the flipped atoms' coherence
//! and reduces the noise each flip injects.
//!
//! Per step `dt` the channel applies, in order:
//! 1. loss: `survive *= 1 - loss·dt`, `cov → (1 - loss·dt)·cov + loss·dt·I/2`;
//! 2. flips: `Var(X_↓), Var(P_↓) += flip·dt·w·(1 - t_coh)`;
//! 3. retained chain: the `T` mode gains `chain·dt·n_↓` thermal population,
//!    `n_↓ = (Var X_↓ + Var P_↓ - 1)/2`;
//! 4. mean spin: `meanspin *= 1 - (flip + loss)·dt/2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, VACUUM_VARIANCE};
use crate::spin::{Preparation, SpinQuantum};

/// Total optical-pumping event rate in units of `γ_s`.
pub const TOTAL_PUMPING_RATE: f64 = 2.0 / 9.0;

/// Largest allowed `(flip + loss)·dt` per step.
pub const MAX_STEP_EVENTS: f64 = 0.1;

/// Pumping rates in units of `γ_s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PumpingRates {
    pub flip: f64,
    pub loss: f64,
    pub chain: f64,
    pub total: f64,
}

impl PumpingRates {
    pub fn none() -> Self {
        Self { flip: 0.0, loss: 0.0, chain: 0.0, total: 0.0 }
    }

    /// Rate of events that destroy the coherent mean spin.
    pub fn event_rate(&self) -> f64 {
        self.flip + self.loss
    }
}

/// Per-preparation rates with the cleanup-pulse accounting
/// `loss = 2/9 - flip`; the `↓ → T` chain reuses the flip rate.
pub fn pumping_rates(prep: Preparation, f: SpinQuantum) -> Result<PumpingRates> {
    let fv = f.value();
    let flip = match prep {
        Preparation::Scs => 1.0 / (12.0 * fv),
        Preparation::ZeroX => {
            if !f.is_integer() {
                return Err(Error::InvalidArgument(format!("zero_x requires integer f, got {f}")));
            }
            (fv + 1.0) / (18.0 * fv)
        }
        Preparation::Cat => 1.0 / 9.0,
    };
    Ok(PumpingRates { flip, loss: TOTAL_PUMPING_RATE - flip, chain: flip, total: TOTAL_PUMPING_RATE })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThirdStatePolicy {
    /// Atoms leaked out of the embedded qubit are moved to the other
    /// hyperfine manifold by a microwave pulse.
    Remove,
    /// The third state is kept so that coherence transferred by the
    /// scattering event survives.
    Retain,
}

/// Fraction of the spin-flip noise cancelled by transfer of coherence.
pub fn transfer_coherence_weight(prep: Preparation, policy: ThirdStatePolicy, configured: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&configured) {
        return Err(Error::InvalidArgument(format!("t_coh = {configured} outside [0, 1]")));
    }
    Ok(match (prep, policy) {
        (Preparation::Cat, _) | (_, ThirdStatePolicy::Remove) => 0.0,
        (_, ThirdStatePolicy::Retain) => configured,
    })
}

/// How the `↓ → T` chain rate is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainRule {
    SameAsFlip,
    Zero,
}

/// Channel coefficients as they appear in a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    /// `false` forces every rate to zero.
    pub enabled: bool,
    /// Vacuum units of noise injected per flipped atom, `w`.
    pub flip_noise: f64,
    /// Transfer-of-coherence weight `t_coh` used under [`ThirdStatePolicy::Retain`].
    pub transfer_weight: f64,
    pub chain_rule: ChainRule,
    /// Replaces the tabulated flip rate (units of `γ_s`).
    pub flip_override: Option<f64>,
}

/// Calibrated so that the retained third state lets the coherent-state
/// preparation beat the cat at `f = 1` and the `0_x` preparation beat both at
/// `f = 4`, `OD = 300`. The feasible band at `w = 1` is roughly `[0.92, 1]`.
pub const DEFAULT_TRANSFER_WEIGHT: f64 = 0.95;

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            flip_noise: 1.0,
            transfer_weight: DEFAULT_TRANSFER_WEIGHT,
            chain_rule: ChainRule::SameAsFlip,
            flip_override: None,
        }
    }
}

impl ChannelConfig {
    pub fn ideal() -> Self {
        Self { enabled: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.flip_noise >= 0.0 && self.flip_noise.is_finite()) {
            return Err(Error::Config(format!("flip_noise = {} must be ≥ 0", self.flip_noise)));
        }
        if !(0.0..=1.0).contains(&self.transfer_weight) {
            return Err(Error::Config(format!(
                "transfer_weight = {} outside [0, 1]",
                self.transfer_weight
            )));
        }
        if let Some(flip) = self.flip_override {
            if !(0.0..=TOTAL_PUMPING_RATE).contains(&flip) {
                return Err(Error::Config(format!(
                    "invariant flip + loss = 2/9 with loss ≥ 0 violated: flip_override = {flip} > 2/9"
                )));
            }
        }
        Ok(())
    }

    pub fn rates(&self, prep: Preparation, f: SpinQuantum) -> Result<PumpingRates> {
        self.validate()?;
        if !self.enabled {
            return Ok(PumpingRates::none());
        }
        let mut r = pumping_rates(prep, f)?;
        if let Some(flip) = self.flip_override {
            r.flip = flip;
            r.loss = TOTAL_PUMPING_RATE - flip;
            r.chain = flip;
        }
        if self.chain_rule == ChainRule::Zero {
            r.chain = 0.0;
        }
        Ok(r)
    }

    pub fn channel(&self, prep: Preparation, f: SpinQuantum, policy: ThirdStatePolicy) -> Result<Channel> {
        Ok(Channel {
            rates: self.rates(prep, f)?,
            policy,
            flip_noise: self.flip_noise,
            transfer_weight: transfer_coherence_weight(prep, policy, self.transfer_weight)?,
        })
    }
}

/// Fully resolved channel for one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Channel {
    pub rates: PumpingRates,
    pub policy: ThirdStatePolicy,
    pub flip_noise: f64,
    pub transfer_weight: f64,
}

impl Channel {
    pub fn none() -> Self {
        Self {
            rates: PumpingRates::none(),
            policy: ThirdStatePolicy::Remove,
            flip_noise: 0.0,
            transfer_weight: 0.0,
        }
    }

    /// `w_eff = w·(1 - t_coh)`.
    pub fn effective_flip_noise(&self) -> f64 {
        self.flip_noise * (1.0 - self.transfer_weight)
    }
}

/// One step of the pumping channel over `dt` (units of `1/γ_s`).
pub fn decohere_step(state: &GaussianState, channel: &Channel, dt: f64) -> Result<GaussianState> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be finite and ≥ 0")));
    }
    let r = &channel.rates;
    if r.event_rate() * dt > MAX_STEP_EVENTS {
        return Err(Error::Guard(format!(
            "step too large: (flip + loss)·dt = {} > {MAX_STEP_EVENTS}",
            r.event_rate() * dt
        )));
    }
    let retain = channel.policy == ThirdStatePolicy::Retain;
    if retain && !state.tracks_third() {
        return Err(Error::Precondition("retain policy requires a tracked third mode".into()));
    }
    let mut out = state.clone();
    let n = out.cov.nrows();

    let l = r.loss * dt;
    out.survive *= 1.0 - l;
    out.cov *= 1.0 - l;
    for i in 0..n {
        out.cov[(i, i)] += l * VACUUM_VARIANCE;
    }
    out.mean *= 1.0 - l;

    let noise = r.flip * dt * channel.effective_flip_noise();
    out.cov[(0, 0)] += noise;
    out.cov[(1, 1)] += noise;

    if retain && r.chain > 0.0 {
        let pop = ((state.var_x() + state.var_p()) / 2.0 - VACUUM_VARIANCE).max(0.0);
        let gain = r.chain * dt * pop;
        out.cov[(2, 2)] += gain;
        out.cov[(3, 3)] += gain;
    }

    out.meanspin *= 1.0 - r.event_rate() * dt / 2.0;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn f(v: u32) -> SpinQuantum {
        SpinQuantum::integer(v).unwrap()
    }

    fn channel(flip: f64, loss: f64, w: f64) -> Channel {
        Channel {
            rates: PumpingRates { flip, loss, chain: 0.0, total: flip + loss },
            policy: ThirdStatePolicy::Remove,
            flip_noise: w,
            transfer_weight: 0.0,
        }
    }

    #[test]
    fn rate_table() {
        assert_abs_diff_eq!(pumping_rates(Preparation::Scs, f(4)).unwrap().flip, 1.0 / 48.0);
        assert_abs_diff_eq!(pumping_rates(Preparation::Cat, f(3)).unwrap().flip, 1.0 / 9.0);
        assert_abs_diff_eq!(pumping_rates(Preparation::ZeroX, f(4)).unwrap().flip, 5.0 / 72.0);
        let half = SpinQuantum::new(1.5).unwrap();
        assert!(pumping_rates(Preparation::ZeroX, half).is_err());
        for fv in 1..=5 {
            for p in Preparation::ALL {
                let r = pumping_rates(p, f(fv)).unwrap();
                assert_eq!(r.total, 2.0 / 9.0);
                assert_abs_diff_eq!(r.flip + r.loss, 2.0 / 9.0, epsilon = 1e-15);
                assert!(r.loss >= 0.0);
            }
        }
    }

    #[test]
    fn no_rates_is_identity() {
        let s = GaussianState::vacuum(true);
        let c = Channel { policy: ThirdStatePolicy::Retain, ..Channel::none() };
        assert_eq!(decohere_step(&s, &c, 0.01).unwrap(), s);
    }

    #[test]
    fn cat_flip_step() {
        let c = channel(1.0 / 9.0, 0.0, 1.0);
        let dt = 0.01 * 9.0;
        let s = decohere_step(&GaussianState::vacuum(false), &c, dt).unwrap();
        assert_abs_diff_eq!(s.var_x(), 0.51, epsilon = 1e-15);
        assert_abs_diff_eq!(s.var_p(), 0.51, epsilon = 1e-15);
    }

    #[test]
    fn loss_mixes_toward_vacuum() {
        let c = channel(0.0, 0.2, 1.0);
        let mut s = GaussianState::vacuum(false);
        s.cov[(0, 0)] = 0.1;
        s.cov[(1, 1)] = 2.5;
        let out = decohere_step(&s, &c, 0.1).unwrap();
        assert_abs_diff_eq!(out.var_x(), 0.98 * 0.1 + 0.02 * 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(out.var_x(), 0.108, epsilon = 1e-15);
        assert_abs_diff_eq!(out.survive, 0.98, epsilon = 1e-15);
    }

    #[test]
    fn vacuum_is_loss_fixed_point() {
        let c = channel(0.0, 0.2, 1.0);
        let v = GaussianState::vacuum(true);
        let out = decohere_step(&v, &c, 0.05).unwrap();
        assert!((out.cov - v.cov).amax() < 1e-16);
    }

    #[test]
    fn guards() {
        let c = channel(0.1, 0.1, 1.0);
        assert!(matches!(decohere_step(&GaussianState::vacuum(false), &c, 1.0), Err(Error::Guard(_))));
        let retain = Channel { policy: ThirdStatePolicy::Retain, ..c };
        assert!(matches!(
            decohere_step(&GaussianState::vacuum(false), &retain, 0.01),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn transfer_weights() {
        assert_eq!(transfer_coherence_weight(Preparation::Cat, ThirdStatePolicy::Retain, 0.7).unwrap(), 0.0);
        assert_eq!(transfer_coherence_weight(Preparation::Scs, ThirdStatePolicy::Remove, 0.7).unwrap(), 0.0);
        assert_eq!(transfer_coherence_weight(Preparation::Scs, ThirdStatePolicy::Retain, 0.7).unwrap(), 0.7);
        assert!(transfer_coherence_weight(Preparation::Scs, ThirdStatePolicy::Retain, 1.5).is_err());
        let d = ChannelConfig::default();
        let t = transfer_coherence_weight(Preparation::Scs, ThirdStatePolicy::Retain, d.transfer_weight).unwrap();
        assert!(t > 0.0 && t < 1.0);
    }

    #[test]
    fn policy_does_not_change_survival() {
        let cfg = ChannelConfig::default();
        let mut a = GaussianState::vacuum(true);
        a.cov[(0, 0)] = 0.05;
        a.cov[(1, 1)] = 5.0;
        let rem = cfg.channel(Preparation::Scs, f(4), ThirdStatePolicy::Remove).unwrap();
        let ret = cfg.channel(Preparation::Scs, f(4), ThirdStatePolicy::Retain).unwrap();
        let x = decohere_step(&a, &rem, 0.01).unwrap();
        let y = decohere_step(&a, &ret, 0.01).unwrap();
        assert_eq!(x.survive, y.survive);
        assert_eq!(x.meanspin, y.meanspin);
        assert!(y.var_x() < x.var_x());
        assert!(y.cov[(2, 2)] > x.cov[(2, 2)]);
    }

    #[test]
    fn config_validation_names_invariant() {
        let bad = ChannelConfig { flip_override: Some(0.3), ..ChannelConfig::default() };
        let err = bad.validate().unwrap_err().to_string();
        assert!(err.contains("flip + loss = 2/9"));
        let off = ChannelConfig::ideal().rates(Preparation::Cat, f(2)).unwrap();
        assert_eq!(off, PumpingRates::none());
    }
}
