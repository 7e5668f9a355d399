//! End-to-end squeezing protocols.
//!
//! Every atom is prepared in the fiducial state, the probe light builds
//! correlations between fiducial and coupled states at the rate set by the
//! measurement strength, optical pumping degrades them, and a final local map
//! moves the embedded qubit onto the coherent state (or onto the Yurke family)
//! where the correlations show up as spin squeezing.
//!
//! Time is measured in units of `1/γ_s`. Each step uses Strang splitting:
//! half a decoherence step, the coherent update with
//! `dξ = (OD/9)(Δf_z²/f²)·survive·dt` evaluated at the midpoint, then the
//! other half of the decoherence step.

use std::f64::consts::FRAC_PI_2;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoherence::{decohere_step, ChannelConfig, ThirdStatePolicy};
use crate::error::{Error, Result};
use crate::gaussian::{countertwist_step, measurement_strength, qnd_pulse, to_db, zeta_metrological, GaussianState};
use crate::spin::{preparation_triple, prepare_fiducial, variance_fz, yurke_internal_zeta, Preparation, SpinQuantum};

/// Minimum number of samples used by [`peak_squeezing`].
pub const MIN_PEAK_SAMPLES: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalMap {
    ScsTarget,
    YurkeTarget,
}

impl FinalMap {
    pub fn label(&self) -> &'static str {
        match self {
            FinalMap::ScsTarget => "scs_target",
            FinalMap::YurkeTarget => "yurke_target",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    /// Double-pass coherent feedback realizing two-axis countertwisting.
    Countertwist,
    /// Continuous QND probing conditioned on a zero meter reading.
    Qnd,
}

/// Probe detuning, carried along for provenance only.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetuningMetadata {
    /// Detuning in units of the excited-state linewidth.
    pub linewidths: Option<f64>,
    pub ghz: Option<f64>,
    pub line: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub f: SpinQuantum,
    pub prep: Preparation,
    pub od: f64,
    /// End time in units of `1/γ_s`.
    pub duration: f64,
    pub dt: f64,
    pub policy: ThirdStatePolicy,
    pub final_map: FinalMap,
    pub alpha: f64,
    pub protocol: ProtocolKind,
    pub channel: ChannelConfig,
    pub detuning: Option<DetuningMetadata>,
}

impl ProtocolConfig {
    /// Countertwisting run with the default channel and coherent-state target.
    pub fn new(f: SpinQuantum, prep: Preparation, od: f64, duration: f64) -> Self {
        Self {
            f,
            prep,
            od,
            duration,
            dt: 1e-3,
            policy: ThirdStatePolicy::Retain,
            final_map: FinalMap::ScsTarget,
            alpha: 0.0,
            protocol: ProtocolKind::Countertwist,
            channel: ChannelConfig::default(),
            detuning: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt = {} must be > 0", self.dt)));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration = {} must be ≥ 0", self.duration)));
        }
        if !(self.od >= 0.0 && self.od.is_finite()) {
            return Err(Error::Config(format!("od = {} must be ≥ 0", self.od)));
        }
        if !(0.0..FRAC_PI_2).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha = {} outside [0, π/2)", self.alpha)));
        }
        if !self.f.is_integer() && (self.prep == Preparation::ZeroX || self.final_map == FinalMap::YurkeTarget) {
            return Err(Error::Config(format!(
                "{} with {} needs integer f, got {}",
                self.prep,
                self.final_map.label(),
                self.f
            )));
        }
        self.channel.validate()
    }

    /// Multiplicative factor of the final local map.
    pub fn internal_factor(&self) -> Result<f64> {
        match self.final_map {
            FinalMap::ScsTarget => Ok(1.0),
            FinalMap::YurkeTarget => yurke_internal_zeta(self.f, self.alpha),
        }
    }

    /// Rate `dξ/dt` at full survival, `(OD/9)(Δf_z²/f²)`.
    pub fn xi_rate(&self) -> Result<f64> {
        let dfz2 = variance_fz(&prepare_fiducial(self.prep.into(), self.f, None)?)?;
        Ok(measurement_strength(self.od, 1.0, dfz2, self.f)?.xi)
    }

    /// The configured policy, downgraded to [`ThirdStatePolicy::Remove`] when
    /// the preparation has no third state.
    pub fn effective_policy(&self) -> Result<ThirdStatePolicy> {
        if self.policy == ThirdStatePolicy::Remove {
            return Ok(ThirdStatePolicy::Remove);
        }
        let triple = preparation_triple(self.prep.into(), self.f, None)?;
        Ok(if triple.third.is_some() {
            ThirdStatePolicy::Retain
        } else {
            debug!("{} at f = {} has no third state; using remove policy", self.prep, self.f);
            ThirdStatePolicy::Remove
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub zeta: f64,
    pub zeta_db: f64,
}

impl Sample {
    fn new(t: f64, zeta: f64) -> Self {
        Self { t, zeta, zeta_db: to_db(zeta) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezingTrace {
    pub samples: Vec<Sample>,
    /// Sample with the smallest `ζ`.
    pub peak: Sample,
}

impl SqueezingTrace {
    /// Forward-difference `dζ/dt` at `t = 0`.
    pub fn initial_slope(&self) -> Option<f64> {
        let (a, b) = (self.samples.first()?, self.samples.get(1)?);
        Some((b.zeta - a.zeta) / (b.t - a.t))
    }
}

pub fn run_protocol(config: &ProtocolConfig) -> Result<SqueezingTrace> {
    run_protocol_observed(config, |_, _| {})
}

/// Runs the protocol and hands every intermediate Gaussian state (including
/// the initial vacuum) to `observer`.
pub fn run_protocol_observed<F>(config: &ProtocolConfig, mut observer: F) -> Result<SqueezingTrace>
where
    F: FnMut(f64, &GaussianState),
{
    config.validate()?;
    let policy = config.effective_policy()?;
    let channel = config.channel.channel(config.prep, config.f, policy)?;
    let factor = config.internal_factor()?;
    let rate = config.xi_rate()?;

    let steps = if config.duration == 0.0 { 0 } else { (config.duration / config.dt - 1e-9).ceil() as usize };
    let h = if steps == 0 { 0.0 } else { config.duration / steps as f64 };
    if rate * h > 1.0 {
        return Err(Error::Guard(format!("ξ per step = {} > 1; reduce dt", rate * h)));
    }

    let mut state = GaussianState::vacuum(policy == ThirdStatePolicy::Retain);
    let mut samples = Vec::with_capacity(steps + 1);
    observer(0.0, &state);
    samples.push(Sample::new(0.0, zeta_metrological(&state, factor)?));

    for i in 1..=steps {
        state = decohere_step(&state, &channel, h / 2.0)?;
        let dxi = rate * state.survive * h;
        state = match config.protocol {
            ProtocolKind::Countertwist => countertwist_step(&state, dxi)?,
            ProtocolKind::Qnd => qnd_pulse(&state, dxi)?,
        };
        state = decohere_step(&state, &channel, h / 2.0)?;
        if !state.is_finite() {
            return Err(Error::Guard(format!("non-finite state at step {i}")));
        }
        let t = i as f64 * h;
        observer(t, &state);
        samples.push(Sample::new(t, zeta_metrological(&state, factor)?));
    }

    let peak = *samples
        .iter()
        .min_by(|a, b| a.zeta.total_cmp(&b.zeta))
        .expect("at least one sample");
    Ok(SqueezingTrace { samples, peak })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub t: f64,
    pub zeta: f64,
    pub zeta_db: f64,
    /// `false` when the minimum sits at an endpoint of the trace.
    pub interior: bool,
}

/// Minimum of the squeezing trace: grid scan plus a three-point parabolic
/// refinement. The grid is refined to at least [`MIN_PEAK_SAMPLES`] samples.
pub fn peak_squeezing(config: &ProtocolConfig) -> Result<Peak> {
    let mut cfg = config.clone();
    if cfg.duration > 0.0 {
        cfg.dt = cfg.dt.min(cfg.duration / MIN_PEAK_SAMPLES as f64);
    }
    let trace = run_protocol(&cfg)?;
    Ok(locate_peak(&trace.samples))
}

pub fn locate_peak(samples: &[Sample]) -> Peak {
    let (i, best) = samples
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.zeta.total_cmp(&b.1.zeta))
        .expect("at least one sample");
    if i == 0 || i + 1 == samples.len() {
        if samples.len() > 1 {
            warn!("no interior minimum; peak at endpoint t = {}", best.t);
        }
        return Peak { t: best.t, zeta: best.zeta, zeta_db: best.zeta_db, interior: false };
    }
    let (a, b, c) = (samples[i - 1].zeta, best.zeta, samples[i + 1].zeta);
    let h = samples[i + 1].t - best.t;
    let curv = a - 2.0 * b + c;
    let (t, zeta) = if curv > 0.0 {
        (best.t + h * (a - c) / (2.0 * curv), b - (a - c) * (a - c) / (8.0 * curv))
    } else {
        (best.t, b)
    };
    Peak { t, zeta, zeta_db: to_db(zeta), interior: true }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakRow {
    pub f: SpinQuantum,
    pub prep: Preparation,
    pub final_map: FinalMap,
    pub peak: Peak,
}

/// Peak squeezing for every `(f, prep)` pair, with the coherent-state target
/// and, for integer `f`, the Yurke target.
///
/// Rows are ordered by ascending `f`, then preparation, then target map.
/// Duplicate axis entries are dropped.
pub fn compare_preparations(base: &ProtocolConfig, preps: &[Preparation], fs: &[SpinQuantum]) -> Result<Vec<PeakRow>> {
    let mut fs = fs.to_vec();
    fs.sort();
    let before = fs.len();
    fs.dedup();
    if fs.len() != before {
        warn!("dropped {} duplicate f values", before - fs.len());
    }
    let mut preps = preps.to_vec();
    preps.sort();
    preps.dedup();

    let pairs: Vec<(SpinQuantum, Preparation)> =
        fs.iter().flat_map(|&f| preps.iter().map(move |&p| (f, p))).collect();
    let rows: Vec<Vec<PeakRow>> = pairs
        .par_iter()
        .map(|&(f, prep)| {
            let cfg = ProtocolConfig { f, prep, final_map: FinalMap::ScsTarget, ..base.clone() };
            let peak = peak_squeezing(&cfg)?;
            let mut out = vec![PeakRow { f, prep, final_map: FinalMap::ScsTarget, peak }];
            if f.is_integer() {
                let factor = yurke_internal_zeta(f, base.alpha)?;
                let zeta = peak.zeta * factor;
                out.push(PeakRow {
                    f,
                    prep,
                    final_map: FinalMap::YurkeTarget,
                    peak: Peak { zeta, zeta_db: to_db(zeta), ..peak },
                });
            } else {
                warn!("no Yurke target for half-integer f = {f}");
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn f(v: u32) -> SpinQuantum {
        SpinQuantum::integer(v).unwrap()
    }

    fn ideal(prep: Preparation, fv: u32, xi_end: f64) -> ProtocolConfig {
        let mut c = ProtocolConfig::new(f(fv), prep, 300.0, 0.0);
        c.channel = ChannelConfig::ideal();
        c.duration = xi_end / c.xi_rate().unwrap();
        c
    }

    #[test]
    fn ideal_countertwist_reaches_exp_minus_xi() {
        for prep in Preparation::ALL {
            let c = ideal(prep, 4, 2.0);
            let tr = run_protocol(&c).unwrap();
            assert_abs_diff_eq!(tr.samples.last().unwrap().zeta, (-2.0f64).exp(), epsilon = 1e-9);
        }
        let mut c = ideal(Preparation::Cat, 4, 2.0);
        c.final_map = FinalMap::YurkeTarget;
        let tr = run_protocol(&c).unwrap();
        assert_abs_diff_eq!(tr.samples.last().unwrap().zeta, (-2.0f64).exp() / 5.0, epsilon = 1e-9);
    }

    #[test]
    fn qnd_without_exposure_is_sql() {
        let mut c = ideal(Preparation::Scs, 2, 0.0);
        c.protocol = ProtocolKind::Qnd;
        let tr = run_protocol(&c).unwrap();
        assert_eq!(tr.samples.len(), 1);
        assert_eq!(tr.samples[0].zeta, 1.0);
        assert_eq!(tr.samples[0].zeta_db, 0.0);
    }

    #[test]
    fn ideal_qnd_matches_single_pulse() {
        let mut c = ideal(Preparation::ZeroX, 3, 1.5);
        c.protocol = ProtocolKind::Qnd;
        let tr = run_protocol(&c).unwrap();
        assert_abs_diff_eq!(tr.samples.last().unwrap().zeta, 1.0 / 2.5, epsilon = 1e-12);
    }

    #[test]
    fn ideal_trace_peaks_at_endpoint() {
        let c = ideal(Preparation::Scs, 2, 1.0);
        let p = peak_squeezing(&c).unwrap();
        assert!(!p.interior);
        assert_abs_diff_eq!(p.t, c.duration, epsilon = 1e-12);
    }

    #[test]
    fn parabolic_refinement_recovers_vertex() {
        let samples: Vec<Sample> = (0..11)
            .map(|i| {
                let t = i as f64 * 0.1;
                Sample::new(t, 0.2 + (t - 0.43) * (t - 0.43))
            })
            .collect();
        let p = locate_peak(&samples);
        assert!(p.interior);
        assert_abs_diff_eq!(p.t, 0.43, epsilon = 1e-12);
        assert_abs_diff_eq!(p.zeta, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn config_errors() {
        let mut c = ProtocolConfig::new(f(2), Preparation::Scs, 300.0, 1.0);
        c.dt = 0.0;
        assert!(matches!(run_protocol(&c), Err(Error::Config(_))));
        let mut c = ProtocolConfig::new(SpinQuantum::new(1.5).unwrap(), Preparation::Scs, 300.0, 1.0);
        c.final_map = FinalMap::YurkeTarget;
        assert!(run_protocol(&c).is_err());
        let mut c = ProtocolConfig::new(f(2), Preparation::Scs, 300.0, 1.0);
        c.alpha = FRAC_PI_2;
        assert!(run_protocol(&c).is_err());
        let mut c = ProtocolConfig::new(f(2), Preparation::Cat, 1e6, 1.0);
        c.dt = 0.01;
        assert!(matches!(run_protocol(&c), Err(Error::Guard(_))));
    }

    #[test]
    fn empty_comparison() {
        let base = ProtocolConfig::new(f(1), Preparation::Scs, 300.0, 1.0);
        assert!(compare_preparations(&base, &[], &[f(1)]).unwrap().is_empty());
    }

    #[test]
    fn yurke_rows_shift_by_factor() {
        let mut base = ProtocolConfig::new(f(4), Preparation::Scs, 300.0, 0.6);
        base.dt = 2e-3;
        let rows = compare_preparations(&base, &[Preparation::Cat], &[f(4), f(4)]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_abs_diff_eq!(rows[1].peak.zeta_db - rows[0].peak.zeta_db, 10.0 * 5f64.log10(), epsilon = 1e-9);
    }
}
