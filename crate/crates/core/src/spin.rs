//! Single-atom spin algebra.
//!
//! States of one spin-`f` atom are complex vectors over the `|f, m_z⟩` basis,
//! ordered `m = f, f-1, …, -f`. The x-basis is fixed by the convention
//!
//! ```text
//! |f, m_x⟩ = exp(-i (π/2) f_y) |f, m_z = m⟩
//! ```
//!
//! which makes every x-basis amplitude real for integer and half-integer `f`.
//! Any fixed rotation would do; all observables below are basis-consistent.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orthogonality/normalization tolerance applied to inputs.
pub const ORTHO_TOL: f64 = 1e-10;

/// Spin quantum number `f`, stored as the integer `2f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SpinQuantum {
    twice: u32,
}

impl SpinQuantum {
    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return Err(Error::InvalidSpin(0.0));
        }
        Ok(Self { twice })
    }

    pub fn new(f: f64) -> Result<Self> {
        let twice = 2.0 * f;
        if !twice.is_finite() || twice < 1.0 || (twice - twice.round()).abs() > 1e-9 {
            return Err(Error::InvalidSpin(f));
        }
        Self::from_twice(twice.round() as u32)
    }

    pub fn integer(f: u32) -> Result<Self> {
        Self::from_twice(2 * f)
    }

    pub fn value(&self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn twice(&self) -> u32 {
        self.twice
    }

    /// Hilbert-space dimension `2f + 1`.
    pub fn dim(&self) -> usize {
        self.twice as usize + 1
    }

    pub fn is_integer(&self) -> bool {
        self.twice.is_multiple_of(2)
    }

    /// Magnetic quantum number at basis index `k`.
    pub fn m_at(&self, k: usize) -> f64 {
        self.value() - k as f64
    }

    pub fn index_of(&self, m: f64) -> Option<usize> {
        let k = self.value() - m;
        let kr = k.round();
        if (k - kr).abs() > 1e-9 || kr < 0.0 || kr as usize >= self.dim() {
            return None;
        }
        Some(kr as usize)
    }
}

impl TryFrom<f64> for SpinQuantum {
    type Error = Error;

    fn try_from(f: f64) -> Result<Self> {
        Self::new(f)
    }
}

impl From<SpinQuantum> for f64 {
    fn from(f: SpinQuantum) -> f64 {
        f.value()
    }
}

impl fmt::Display for SpinQuantum {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(fm, "{}", self.twice / 2)
        } else {
            write!(fm, "{}/2", self.twice)
        }
    }
}

/// Normalized state of a single spin-`f` atom in the `|f, m_z⟩` basis.
///
/// Serializes as a JSON array of `[re, im]` pairs ordered `m = f … -f`; the
/// spin quantum number is recovered from the length.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinState {
    f: SpinQuantum,
    amps: DVector<C64>,
}

impl SpinState {
    pub fn new(f: SpinQuantum, amps: DVector<C64>) -> Result<Self> {
        if amps.len() != f.dim() {
            return Err(Error::DimensionMismatch { expected: f.dim(), got: amps.len() });
        }
        let n2 = amps.norm_squared();
        if (n2 - 1.0).abs() > ORTHO_TOL {
            return Err(Error::Precondition(format!("state norm² = {n2}, expected 1")));
        }
        Ok(Self { f, amps })
    }

    /// Normalizes `amps`; fails on the zero vector.
    pub fn normalized(f: SpinQuantum, amps: DVector<C64>) -> Result<Self> {
        if amps.len() != f.dim() {
            return Err(Error::DimensionMismatch { expected: f.dim(), got: amps.len() });
        }
        let n = amps.norm();
        if n < ORTHO_TOL {
            return Err(Error::Degenerate("zero vector".into()));
        }
        Ok(Self { f, amps: amps / C64::new(n, 0.0) })
    }

    /// `|f, m_z = m⟩`.
    pub fn z_basis(f: SpinQuantum, m: f64) -> Result<Self> {
        let k = f
            .index_of(m)
            .ok_or_else(|| Error::InvalidArgument(format!("m = {m} not in spin-{f} manifold")))?;
        let mut amps = DVector::zeros(f.dim());
        amps[k] = C64::new(1.0, 0.0);
        Ok(Self { f, amps })
    }

    /// `|f, m_x = m⟩ = exp(-i(π/2) f_y) |f, m_z = m⟩`.
    pub fn x_basis(f: SpinQuantum, m: f64) -> Result<Self> {
        let z = Self::z_basis(f, m)?;
        let rot = spin_operators(f).rotation_y(FRAC_PI_2);
        Ok(Self { f, amps: rot * z.amps })
    }

    pub fn spin(&self) -> SpinQuantum {
        self.f
    }

    pub fn amps(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn into_amps(self) -> DVector<C64> {
        self.amps
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &SpinState) -> C64 {
        self.amps.dotc(&other.amps)
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &SpinState) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn expectation(&self, op: &DMatrix<C64>) -> C64 {
        self.amps.dotc(&(op * &self.amps))
    }

    pub fn apply(&self, op: &DMatrix<C64>) -> Result<SpinState> {
        SpinState::normalized(self.f, op * &self.amps)
    }
}

impl Serialize for SpinState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.amps.iter().map(|a| [a.re, a.im]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpinState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
        if pairs.len() < 2 {
            return Err(D::Error::custom("a spin state needs at least two amplitudes"));
        }
        let f = SpinQuantum::from_twice(pairs.len() as u32 - 1).map_err(D::Error::custom)?;
        let amps = DVector::from_iterator(pairs.len(), pairs.iter().map(|p| C64::new(p[0], p[1])));
        SpinState::new(f, amps).map_err(D::Error::custom)
    }
}

/// Angular momentum matrices for one spin-`f` atom (ħ = 1).
#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub f: SpinQuantum,
    pub fx: DMatrix<C64>,
    pub fy: DMatrix<C64>,
    pub fz: DMatrix<C64>,
    pub raise: DMatrix<C64>,
    pub lower: DMatrix<C64>,
}

impl SpinOperators {
    /// `exp(-i θ f_y)`.
    pub fn rotation_y(&self, theta: f64) -> DMatrix<C64> {
        (&self.fy * C64::new(0.0, -theta)).exp()
    }

    pub fn fz_squared(&self) -> DMatrix<C64> {
        &self.fz * &self.fz
    }
}

/// Ladder construction `f_± |f,m⟩ = √(f(f+1) - m(m±1)) |f,m±1⟩`.
pub fn spin_operators(f: SpinQuantum) -> SpinOperators {
    let d = f.dim();
    let fv = f.value();
    let mut raise = DMatrix::<C64>::zeros(d, d);
    let mut fz = DMatrix::<C64>::zeros(d, d);
    for k in 0..d {
        let m = f.m_at(k);
        fz[(k, k)] = C64::new(m, 0.0);
        if k > 0 {
            // |m⟩ at index k, |m+1⟩ at index k-1
            raise[(k - 1, k)] = C64::new((fv * (fv + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
    }
    let lower = raise.adjoint();
    let fx = (&raise + &lower) * C64::new(0.5, 0.0);
    let fy = (&raise - &lower) * C64::new(0.0, -0.5);
    SpinOperators { f, fx, fy, fz, raise, lower }
}

/// Single-atom fiducial preparations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fiducial {
    /// Spin coherent state `|f, m_x = f⟩`.
    Scs,
    /// `(|f, m_z = f⟩ + |f, m_z = -f⟩)/√2`.
    Cat,
    /// `|f, m_x = 0⟩`, integer `f` only.
    ZeroX,
    /// `sin α/√2 |1_z⟩ + cos α |0_z⟩ + sin α/√2 |-1_z⟩`, integer `f` only.
    Yurke,
}

/// Fiducial preparations used by the squeezing protocols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preparation {
    Scs,
    Cat,
    ZeroX,
}

impl Preparation {
    pub const ALL: [Preparation; 3] = [Preparation::Scs, Preparation::Cat, Preparation::ZeroX];

    pub fn label(&self) -> &'static str {
        match self {
            Preparation::Scs => "scs",
            Preparation::Cat => "cat",
            Preparation::ZeroX => "zero_x",
        }
    }
}

impl fmt::Display for Preparation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl From<Preparation> for Fiducial {
    fn from(p: Preparation) -> Fiducial {
        match p {
            Preparation::Scs => Fiducial::Scs,
            Preparation::Cat => Fiducial::Cat,
            Preparation::ZeroX => Fiducial::ZeroX,
        }
    }
}

pub fn prepare_fiducial(kind: Fiducial, f: SpinQuantum, alpha: Option<f64>) -> Result<SpinState> {
    match kind {
        Fiducial::Scs => SpinState::x_basis(f, f.value()),
        Fiducial::Cat => {
            let d = f.dim();
            let mut amps = DVector::zeros(d);
            let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            amps[0] = h;
            amps[d - 1] = h;
            SpinState::new(f, amps)
        }
        Fiducial::ZeroX => {
            require_integer(f, "zero_x")?;
            SpinState::x_basis(f, 0.0)
        }
        Fiducial::Yurke => {
            require_integer(f, "yurke")?;
            let alpha = alpha.ok_or_else(|| {
                Error::InvalidArgument("yurke preparation requires alpha".into())
            })?;
            let (s, c) = alpha.sin_cos();
            let r = s * std::f64::consts::FRAC_1_SQRT_2;
            z_combination(f, &[(1.0, r), (0.0, c), (-1.0, r)])
        }
    }
}

fn require_integer(f: SpinQuantum, what: &str) -> Result<()> {
    if !f.is_integer() {
        return Err(Error::InvalidArgument(format!("{what} preparation requires integer f, got {f}")));
    }
    Ok(())
}

/// Real superposition `Σ c_m |f, m_z⟩`, normalized.
fn z_combination(f: SpinQuantum, terms: &[(f64, f64)]) -> Result<SpinState> {
    let mut amps = DVector::zeros(f.dim());
    for &(m, c) in terms {
        let k = f
            .index_of(m)
            .ok_or_else(|| Error::InvalidArgument(format!("m = {m} not in spin-{f} manifold")))?;
        amps[k] += C64::new(c, 0.0);
    }
    SpinState::normalized(f, amps)
}

/// Projection noise `⟨f_z²⟩ - ⟨f_z⟩²` of a single-atom state.
pub fn variance_fz(state: &SpinState) -> Result<f64> {
    let n2 = state.amps.norm_squared();
    if (n2 - 1.0).abs() > ORTHO_TOL {
        return Err(Error::Precondition(format!("state norm² = {n2}, expected 1")));
    }
    let ops = spin_operators(state.f);
    let mean = state.expectation(&ops.fz).re;
    let second = state.expectation(&ops.fz_squared()).re;
    Ok(second - mean * mean)
}

/// Fiducial, coupled, and optional third state of the embedded qubit.
#[derive(Clone, Debug)]
pub struct EmbeddedTriple {
    pub up: SpinState,
    pub down: SpinState,
    pub third: Option<SpinState>,
    /// `√⟨up|f_z²|up⟩`.
    pub c: f64,
}

impl EmbeddedTriple {
    /// Builds a triple from explicit states, checking orthonormality and
    /// `⟨up|f_z|up⟩ = 0`.
    pub fn from_states(up: SpinState, down: SpinState, third: Option<SpinState>) -> Result<Self> {
        let f = up.f;
        for s in std::iter::once(&down).chain(third.as_ref()) {
            if s.f != f {
                return Err(Error::DimensionMismatch { expected: f.dim(), got: s.f.dim() });
            }
        }
        let ops = spin_operators(f);
        let mean = up.expectation(&ops.fz);
        if mean.norm() > ORTHO_TOL {
            return Err(Error::Precondition(format!("⟨up|f_z|up⟩ = {mean}, expected 0")));
        }
        let mut all = vec![&up, &down];
        all.extend(third.as_ref());
        check_orthonormal(&all)?;
        let c = up.expectation(&ops.fz_squared()).re.max(0.0).sqrt();
        Ok(Self { up, down, third, c })
    }

    pub fn spin(&self) -> SpinQuantum {
        self.up.f
    }

    pub fn states(&self) -> Vec<&SpinState> {
        let mut v = vec![&self.up, &self.down];
        v.extend(self.third.as_ref());
        v
    }

    /// Same triple with the third state computed by [`third_state`].
    pub fn with_third(self) -> Self {
        third_state(self)
    }
}

fn check_orthonormal(states: &[&SpinState]) -> Result<()> {
    for (i, a) in states.iter().enumerate() {
        for (j, b) in states.iter().enumerate().skip(i) {
            let g = a.inner(b);
            let want = if i == j { 1.0 } else { 0.0 };
            if (g - C64::new(want, 0.0)).norm() > ORTHO_TOL {
                return Err(Error::Precondition(format!(
                    "triple not orthonormal: ⟨{i}|{j}⟩ = {g}"
                )));
            }
        }
    }
    Ok(())
}

/// Coupled state `|↓⟩ = f_z|↑⟩ / ‖f_z|↑⟩‖` and coupling `c = ‖f_z|↑⟩‖`.
///
/// With this phase `⟨↓|f_z|↑⟩ = c` is real and positive.
pub fn coupled_state(up: &SpinState) -> Result<EmbeddedTriple> {
    let ops = spin_operators(up.f);
    let mean = up.expectation(&ops.fz);
    if mean.norm() > ORTHO_TOL {
        return Err(Error::Precondition(format!("⟨up|f_z|up⟩ = {mean}, expected 0")));
    }
    let v = &ops.fz * &up.amps;
    let c = v.norm();
    if c < ORTHO_TOL {
        return Err(Error::Degenerate("f_z|up⟩ = 0, no coupled state".into()));
    }
    let down = SpinState { f: up.f, amps: v / C64::new(c, 0.0) };
    Ok(EmbeddedTriple { up: up.clone(), down, third: None, c })
}

/// Adds the component of `f_z|↓⟩` orthogonal to `span{↑, ↓}` as the third
/// state; absent when that component has norm below `1e-10`.
pub fn third_state(triple: EmbeddedTriple) -> EmbeddedTriple {
    let ops = spin_operators(triple.spin());
    let mut w = &ops.fz * &triple.down.amps;
    for s in [&triple.up, &triple.down] {
        let proj = s.amps.dotc(&w);
        w -= &s.amps * proj;
    }
    let n = w.norm();
    let third = if n < ORTHO_TOL {
        None
    } else {
        Some(SpinState { f: triple.spin(), amps: w / C64::new(n, 0.0) })
    };
    EmbeddedTriple { third, ..triple }
}

/// Embedded triple of a built-in preparation, with its third state.
pub fn preparation_triple(kind: Fiducial, f: SpinQuantum, alpha: Option<f64>) -> Result<EmbeddedTriple> {
    match kind {
        Fiducial::Yurke => yurke_triple(f, alpha.unwrap_or(0.0)),
        _ => Ok(third_state(coupled_state(&prepare_fiducial(kind, f, alpha)?)?)),
    }
}

/// Yurke target triple: `|yur⟩`, `(|1_z⟩ - |-1_z⟩)/√2`, and the third state
/// `cos α (|1_z⟩ + |-1_z⟩)/√2 - sin α |0_z⟩`, the unit vector orthogonal to
/// the other two in the `m_z ∈ {1, 0, -1}` subspace.
///
/// At `α = 0` the coupling `c` vanishes; the triple is still orthonormal and
/// usable as a mapping target.
pub fn yurke_triple(f: SpinQuantum, alpha: f64) -> Result<EmbeddedTriple> {
    let up = prepare_fiducial(Fiducial::Yurke, f, Some(alpha))?;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let down = z_combination(f, &[(1.0, r), (-1.0, -r)])?;
    let (s, c) = alpha.sin_cos();
    let third = z_combination(f, &[(1.0, c * r), (0.0, -s), (-1.0, c * r)])?;
    EmbeddedTriple::from_states(up, down, Some(third))
}

/// Unitary taking `source.up → target.up`, `source.down → target.down`, and
/// `source.third → target.third` when the source has a third state.
///
/// The remaining columns are completed by Gram-Schmidt over the z-basis in
/// index order, so the result is deterministic.
pub fn embedded_map(source: &EmbeddedTriple, target: &EmbeddedTriple) -> Result<DMatrix<C64>> {
    let f = source.spin();
    if target.spin() != f {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: target.spin().dim() });
    }
    let mut src = vec![&source.up, &source.down];
    let mut tgt = vec![&target.up, &target.down];
    if let Some(s3) = &source.third {
        let t3 = target.third.as_ref().ok_or_else(|| {
            Error::Precondition("source has a third state but target does not".into())
        })?;
        src.push(s3);
        tgt.push(t3);
    }
    check_orthonormal(&src)?;
    check_orthonormal(&tgt)?;
    let s = complete_basis(&src);
    let t = complete_basis(&tgt);
    Ok(t * s.adjoint())
}

/// Columns: the given orthonormal vectors followed by the Gram-Schmidt
/// completion over `e_0, e_1, …`.
fn complete_basis(states: &[&SpinState]) -> DMatrix<C64> {
    let d = states[0].amps.len();
    let mut cols: Vec<DVector<C64>> = states.iter().map(|s| s.amps.clone()).collect();
    for k in 0..d {
        if cols.len() == d {
            break;
        }
        let mut v = DVector::<C64>::zeros(d);
        v[k] = C64::new(1.0, 0.0);
        // two passes for stability
        for _ in 0..2 {
            for c in &cols {
                let p = c.dotc(&v);
                v -= c * p;
            }
        }
        let n = v.norm();
        if n > 1e-6 {
            cols.push(v / C64::new(n, 0.0));
        }
    }
    DMatrix::from_columns(&cols)
}

/// Internal squeezing factor `(1+f)⁻¹ cos⁻² α` of the Yurke family.
pub fn yurke_internal_zeta(f: SpinQuantum, alpha: f64) -> Result<f64> {
    require_integer(f, "yurke")?;
    let c = alpha.cos();
    if c.abs() < 1e-12 {
        return Err(Error::InvalidArgument(format!("cos α = 0 at α = {alpha}; factor diverges")));
    }
    Ok(1.0 / ((1.0 + f.value()) * c * c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sq(f: f64) -> SpinQuantum {
        SpinQuantum::new(f).unwrap()
    }

    fn comm(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
        a * b - b * a
    }

    #[test]
    fn rejects_bad_spin() {
        assert!(SpinQuantum::new(0.3).is_err());
        assert!(SpinQuantum::new(0.0).is_err());
        assert!(SpinQuantum::new(-1.0).is_err());
        assert_eq!(SpinQuantum::new(1.5).unwrap().dim(), 4);
    }

    #[test]
    fn spin_half_fz_is_pauli_over_two() {
        let ops = spin_operators(sq(0.5));
        assert_abs_diff_eq!(ops.fz[(0, 0)].re, 0.5);
        assert_abs_diff_eq!(ops.fz[(1, 1)].re, -0.5);
    }

    #[test]
    fn spin_one_fx_element() {
        let ops = spin_operators(sq(1.0));
        // ⟨m=1|fx|m=0⟩
        assert_abs_diff_eq!(ops.fx[(0, 1)].re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn trace_fz_squared_f4() {
        let ops = spin_operators(sq(4.0));
        let direct: f64 = (-4..=4).map(|m| (m * m) as f64).sum();
        assert_eq!(direct, 60.0);
        assert_abs_diff_eq!(ops.fz_squared().trace().re, direct, epsilon = 1e-12);
    }

    #[test]
    fn commutators_and_casimir() {
        let i = C64::new(0.0, 1.0);
        for twice in 1..=12 {
            let f = SpinQuantum::from_twice(twice).unwrap();
            let o = spin_operators(f);
            let tol = 1e-12;
            assert!((comm(&o.fx, &o.fy) - &o.fz * i).norm() < tol);
            assert!((comm(&o.fy, &o.fz) - &o.fx * i).norm() < tol);
            assert!((comm(&o.fz, &o.fx) - &o.fy * i).norm() < tol);
            let cas = &o.fx * &o.fx + &o.fy * &o.fy + &o.fz * &o.fz;
            let fv = f.value();
            let id = DMatrix::<C64>::identity(f.dim(), f.dim()) * C64::new(fv * (fv + 1.0), 0.0);
            assert!((cas - id).norm() < tol);
            for m in [&o.fx, &o.fy, &o.fz] {
                assert!((m - m.adjoint()).norm() < tol);
            }
        }
    }

    #[test]
    fn x_basis_is_fx_eigenstate() {
        for twice in 1..=8 {
            let f = SpinQuantum::from_twice(twice).unwrap();
            let o = spin_operators(f);
            for k in 0..f.dim() {
                let m = f.m_at(k);
                let s = SpinState::x_basis(f, m).unwrap();
                let r = &o.fx * s.amps() - s.amps() * C64::new(m, 0.0);
                assert!(r.norm() < 1e-12, "f={f} m={m}");
                assert!(s.amps().iter().all(|a| a.im.abs() < 1e-13));
            }
        }
    }

    #[test]
    fn cat_amplitudes() {
        let s = prepare_fiducial(Fiducial::Cat, sq(4.0), None).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (k, a) in s.amps().iter().enumerate() {
            let want = if k == 0 || k == 8 { h } else { 0.0 };
            assert_abs_diff_eq!(a.re, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn yurke_at_zero_alpha_is_m0() {
        let s = prepare_fiducial(Fiducial::Yurke, sq(1.0), Some(0.0)).unwrap();
        let m0 = SpinState::z_basis(sq(1.0), 0.0).unwrap();
        assert_abs_diff_eq!(s.fidelity(&m0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_x_f1_amplitudes() {
        // exp(-i(π/2)fy)|1,0⟩ evaluated by dense Taylor series
        let f = sq(1.0);
        let o = spin_operators(f);
        let gen = &o.fy * C64::new(0.0, -FRAC_PI_2);
        let mut term = DMatrix::<C64>::identity(3, 3);
        let mut sum = term.clone();
        for n in 1..60 {
            term = &term * &gen / C64::new(n as f64, 0.0);
            sum += &term;
        }
        let expected = sum.column(1).into_owned();
        let s = prepare_fiducial(Fiducial::ZeroX, f, None).unwrap();
        assert!((s.amps() - &expected).norm() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(s.amps()[0].norm(), h, epsilon = 1e-12);
        assert_abs_diff_eq!(s.amps()[1].norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((s.amps()[0] + s.amps()[2]).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn integer_only_preparations() {
        let half = sq(1.5);
        assert!(prepare_fiducial(Fiducial::ZeroX, half, None).is_err());
        assert!(prepare_fiducial(Fiducial::Yurke, half, Some(0.1)).is_err());
        assert!(prepare_fiducial(Fiducial::Yurke, sq(2.0), None).is_err());
    }

    #[test]
    fn closed_form_variances() {
        for fi in 1..=6 {
            let f = sq(fi as f64);
            let fv = f.value();
            let scs = variance_fz(&prepare_fiducial(Fiducial::Scs, f, None).unwrap()).unwrap();
            let cat = variance_fz(&prepare_fiducial(Fiducial::Cat, f, None).unwrap()).unwrap();
            let zx = variance_fz(&prepare_fiducial(Fiducial::ZeroX, f, None).unwrap()).unwrap();
            assert_abs_diff_eq!(scs, fv / 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(cat, fv * fv, epsilon = 1e-12);
            assert_abs_diff_eq!(zx, fv * (fv + 1.0) / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rotation_consistency() {
        for fi in 1..=5 {
            let f = sq(fi as f64);
            let o = spin_operators(f);
            let z0 = SpinState::z_basis(f, 0.0).unwrap();
            let var_fx = z0.expectation(&(&o.fx * &o.fx)).re - z0.expectation(&o.fx).re.powi(2);
            let x0 = SpinState::x_basis(f, 0.0).unwrap();
            assert_abs_diff_eq!(var_fx, variance_fz(&x0).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn coupled_state_residual() {
        for fi in 1..=5 {
            let f = sq(fi as f64);
            let o = spin_operators(f);
            for kind in [Fiducial::Scs, Fiducial::Cat, Fiducial::ZeroX] {
                let t = coupled_state(&prepare_fiducial(kind, f, None).unwrap()).unwrap();
                let r = &o.fz * t.up.amps() - t.down.amps() * C64::new(t.c, 0.0);
                assert!(r.norm() < 1e-12);
                assert_abs_diff_eq!(t.down.amps().norm(), 1.0, epsilon = 1e-12);
                assert!(t.up.inner(&t.down).norm() < 1e-12);
                let me = t.down.amps().dotc(&(&o.fz * t.up.amps()));
                assert!(me.im.abs() < 1e-12 && me.re > 0.0);
            }
        }
    }

    #[test]
    fn coupled_state_rejects_polarized_up() {
        let up = SpinState::z_basis(sq(1.0), 1.0).unwrap();
        assert!(matches!(coupled_state(&up), Err(Error::Precondition(_))));
        let deg = SpinState::z_basis(sq(1.0), 0.0).unwrap();
        assert!(matches!(coupled_state(&deg), Err(Error::Degenerate(_))));
    }

    #[test]
    fn third_states() {
        let f = sq(4.0);
        let scs = preparation_triple(Fiducial::Scs, f, None).unwrap();
        let m2 = SpinState::x_basis(f, 2.0).unwrap();
        assert_abs_diff_eq!(scs.third.as_ref().unwrap().fidelity(&m2), 1.0, epsilon = 1e-12);
        assert!(preparation_triple(Fiducial::Cat, f, None).unwrap().third.is_none());
        assert!(preparation_triple(Fiducial::ZeroX, sq(1.0), None).unwrap().third.is_none());
        assert!(preparation_triple(Fiducial::ZeroX, sq(2.0), None).unwrap().third.is_some());
    }

    #[test]
    fn embedded_map_identity_and_cat_to_scs() {
        let f = sq(4.0);
        let scs = preparation_triple(Fiducial::Scs, f, None).unwrap();
        let u = embedded_map(&scs, &scs).unwrap();
        for s in scs.states() {
            assert!((&u * s.amps() - s.amps()).norm() < 1e-12);
        }
        let cat = preparation_triple(Fiducial::Cat, f, None).unwrap();
        let u = embedded_map(&cat, &scs).unwrap();
        let mapped = SpinState::new(f, &u * cat.up.amps()).unwrap();
        let target = SpinState::x_basis(f, 4.0).unwrap();
        assert_abs_diff_eq!(mapped.fidelity(&target), 1.0, epsilon = 1e-12);
        let id = DMatrix::<C64>::identity(9, 9);
        assert!((u.adjoint() * &u - id).norm() < 1e-12);
    }

    #[test]
    fn embedded_map_requires_target_third() {
        let f = sq(4.0);
        let scs = preparation_triple(Fiducial::Scs, f, None).unwrap();
        let cat = preparation_triple(Fiducial::Cat, f, None).unwrap();
        assert!(embedded_map(&scs, &cat).is_err());
        let other = preparation_triple(Fiducial::Scs, sq(3.0), None).unwrap();
        assert!(matches!(embedded_map(&scs, &other), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn yurke_triple_is_orthonormal() {
        for alpha in [0.0, 0.3, 1.2] {
            let t = yurke_triple(sq(3.0), alpha).unwrap();
            assert_abs_diff_eq!(t.c, alpha.sin().abs(), epsilon = 1e-12);
        }
    }

    #[test]
    fn yurke_factor() {
        assert_abs_diff_eq!(yurke_internal_zeta(sq(4.0), 0.0).unwrap(), 0.2);
        assert_abs_diff_eq!(-10.0 * 0.2f64.log10(), 6.9897, epsilon = 1e-4);
        assert_abs_diff_eq!(yurke_internal_zeta(sq(1.0), 0.0).unwrap(), 0.5);
        let direct = (1.0 / 3.0) * 2.0;
        assert_abs_diff_eq!(
            yurke_internal_zeta(sq(2.0), std::f64::consts::FRAC_PI_4).unwrap(),
            direct,
            epsilon = 1e-12
        );
        assert!(yurke_internal_zeta(sq(2.0), FRAC_PI_2).is_err());
    }

    #[test]
    fn json_pairs() {
        let s = prepare_fiducial(Fiducial::Cat, sq(1.0), None).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.starts_with("[[0.7071067811865476,0.0],[0.0,0.0]"));
        let back: SpinState = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }
}
