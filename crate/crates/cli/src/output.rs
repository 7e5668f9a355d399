//! CSV emission. Numbers use Rust's formatter, which ignores the process
//! locale; floats carry 9 significant digits.

use std::fmt::Write as _;

use squeeze_core::{FinalMap, PeakRow, Preparation, Sample, SpinQuantum};

use crate::config::RunConfigFile;

pub const TRACE_HEADER: &str = "t_gamma,zeta,zeta_db,prep,f,od,final_map";
pub const PEAK_HEADER: &str = "f,prep,final_map,peak_db,t_peak";

pub fn num(x: f64) -> String {
    format!("{:.8e}", x + 0.0)
}

/// `#`-prefixed preamble: sign convention and the resolved configuration.
pub fn preamble(config: &RunConfigFile) -> String {
    let echo = serde_json::to_string(config).expect("config serializes");
    format!("# zeta_db = -10*log10(zeta); positive values are squeezing\n# config: {echo}\n")
}

pub struct Trace<'a> {
    pub f: SpinQuantum,
    pub prep: Preparation,
    pub od: f64,
    pub final_map: FinalMap,
    pub samples: &'a [Sample],
}

pub fn trace_rows(out: &mut String, t: &Trace<'_>) {
    for s in t.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            num(s.t),
            num(s.zeta),
            num(s.zeta_db),
            t.prep,
            t.f,
            num(t.od),
            t.final_map.label()
        );
    }
}

pub fn peak_rows(out: &mut String, rows: &[PeakRow]) {
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.f,
            r.prep,
            r.final_map.label(),
            num(r.peak.zeta_db),
            num(r.peak.t)
        );
    }
}
