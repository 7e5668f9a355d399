//! Brute-force few-atom reference computations.
//!
//! Ensemble states live in the full `d^n` tensor-product space, atom 0 being
//! the most significant digit of the basis index. The QND measurement is a
//! Gaussian Kraus operator in the collective magnetization; light is never
//! represented explicitly.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen, Vector3};
use num_complex::Complex64 as C64;

use crate::decoherence::PumpingRates;
use crate::error::{Error, Result};
use crate::spin::{spin_operators, EmbeddedTriple, SpinQuantum, SpinState};

pub const MAX_ATOMS: usize = 4;
pub const MAX_DIM: usize = 9;
/// Largest ensemble dimension for which a dense collective matrix is built.
pub const MAX_DENSE_DIM: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleState {
    pub n_atoms: usize,
    pub f: SpinQuantum,
    pub amps: DVector<C64>,
}

fn guard(n_atoms: usize, f: SpinQuantum) -> Result<usize> {
    if n_atoms == 0 || n_atoms > MAX_ATOMS || f.dim() > MAX_DIM {
        return Err(Error::Guard(format!(
            "ensemble of {n_atoms} spin-{f} atoms exceeds n ≤ {MAX_ATOMS}, d ≤ {MAX_DIM}"
        )));
    }
    Ok(f.dim().pow(n_atoms as u32))
}

impl EnsembleState {
    /// `|ψ⟩^{⊗n}`.
    pub fn product(single: &SpinState, n_atoms: usize) -> Result<Self> {
        guard(n_atoms, single.spin())?;
        let mut amps = single.amps().clone();
        for _ in 1..n_atoms {
            amps = amps.kronecker(single.amps());
        }
        Ok(Self { n_atoms, f: single.spin(), amps })
    }

    /// Product of one single-atom state per site.
    pub fn product_of(states: &[&SpinState]) -> Result<Self> {
        let f = states.first().ok_or_else(|| Error::InvalidArgument("no atoms".into()))?.spin();
        guard(states.len(), f)?;
        let mut amps = states[0].amps().clone();
        for s in &states[1..] {
            if s.spin() != f {
                return Err(Error::DimensionMismatch { expected: f.dim(), got: s.spin().dim() });
            }
            amps = amps.kronecker(s.amps());
        }
        Ok(Self { n_atoms: states.len(), f, amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn inner(&self, other: &EnsembleState) -> C64 {
        self.amps.dotc(&other.amps)
    }

    /// Applies the same single-atom operator to every atom.
    pub fn apply_local(&self, op: &DMatrix<C64>) -> Result<EnsembleState> {
        let mut amps = self.amps.clone();
        for site in 0..self.n_atoms {
            amps = apply_site(&amps, op, site, self.n_atoms, self.f.dim());
        }
        Ok(EnsembleState { amps, ..self.clone() })
    }

    /// `Σ_i op^{(i)} |ψ⟩`.
    pub fn apply_collective(&self, op: &DMatrix<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(self.dim());
        for site in 0..self.n_atoms {
            out += apply_site(&self.amps, op, site, self.n_atoms, self.f.dim());
        }
        out
    }

    pub fn expectation_collective(&self, op: &DMatrix<C64>) -> C64 {
        self.amps.dotc(&self.apply_collective(op)) / self.amps.norm_squared()
    }

    /// Symmetrized covariance `⟨{A, B}⟩/2 - ⟨A⟩⟨B⟩` of two collective operators.
    pub fn collective_covariance(&self, a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        let n2 = self.amps.norm_squared();
        let av = self.apply_collective(a);
        let bv = self.apply_collective(b);
        let ab = av.dotc(&bv).re / n2;
        let ma = self.amps.dotc(&av).re / n2;
        let mb = self.amps.dotc(&bv).re / n2;
        ab - ma * mb
    }

    /// Collective magnetization `M = Σ m_i` of every basis state.
    pub fn magnetization(&self) -> Vec<f64> {
        let d = self.f.dim();
        (0..self.dim())
            .map(|mut idx| {
                let mut m = 0.0;
                for _ in 0..self.n_atoms {
                    m += self.f.m_at(idx % d);
                    idx /= d;
                }
                m
            })
            .collect()
    }

    pub fn mean_fz(&self) -> f64 {
        let n2 = self.amps.norm_squared();
        self.magnetization().iter().zip(self.amps.iter()).map(|(m, a)| m * a.norm_sqr()).sum::<f64>() / n2
    }

    pub fn variance_fz(&self) -> f64 {
        let n2 = self.amps.norm_squared();
        let mean = self.mean_fz();
        self.magnetization()
            .iter()
            .zip(self.amps.iter())
            .map(|(m, a)| (m - mean) * (m - mean) * a.norm_sqr())
            .sum::<f64>()
            / n2
    }

    /// `⟨ψ|SWAP_{ij}|ψ⟩`; equals 1 for states symmetric under `i ↔ j`.
    pub fn swap_expectation(&self, i: usize, j: usize) -> C64 {
        let d = self.f.dim();
        let n = self.n_atoms;
        let mut swapped = DVector::zeros(self.dim());
        for idx in 0..self.dim() {
            let mut digits = digits_of(idx, n, d);
            digits.swap(i, j);
            swapped[index_of(&digits, d)] = self.amps[idx];
        }
        self.amps.dotc(&swapped) / self.amps.norm_squared()
    }
}

fn digits_of(mut idx: usize, n: usize, d: usize) -> Vec<usize> {
    let mut digits = vec![0; n];
    for k in (0..n).rev() {
        digits[k] = idx % d;
        idx /= d;
    }
    digits
}

fn index_of(digits: &[usize], d: usize) -> usize {
    digits.iter().fold(0, |acc, &k| acc * d + k)
}

/// `op` acting on `site` of an `n`-atom vector.
fn apply_site(v: &DVector<C64>, op: &DMatrix<C64>, site: usize, n: usize, d: usize) -> DVector<C64> {
    let inner = d.pow((n - site - 1) as u32);
    let outer = d.pow(site as u32);
    let mut out = DVector::zeros(v.len());
    for o in 0..outer {
        for i in 0..inner {
            let base = o * d * inner + i;
            for r in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for c in 0..d {
                    let e = op[(r, c)];
                    if e != C64::new(0.0, 0.0) {
                        acc += e * v[base + c * inner];
                    }
                }
                out[base + r * inner] = acc;
            }
        }
    }
    out
}

/// Dense `Σ_i op^{(i)}` on `n_atoms` atoms.
pub fn collective_operator(op: &DMatrix<C64>, n_atoms: usize) -> Result<DMatrix<C64>> {
    let d = op.nrows();
    if op.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: op.ncols() });
    }
    if n_atoms == 0 || n_atoms > MAX_ATOMS || d > MAX_DIM || d.pow(n_atoms as u32) > MAX_DENSE_DIM {
        return Err(Error::Guard(format!("collective operator on {n_atoms} atoms of dimension {d}")));
    }
    let total = d.pow(n_atoms as u32);
    let mut out = DMatrix::zeros(total, total);
    for site in 0..n_atoms {
        let left = DMatrix::<C64>::identity(d.pow(site as u32), d.pow(site as u32));
        let right_dim = d.pow((n_atoms - site - 1) as u32);
        let right = DMatrix::<C64>::identity(right_dim, right_dim);
        out += left.kronecker(op).kronecker(&right);
    }
    Ok(out)
}

/// Gaussian Kraus measurement of `F_z` with outcome `y`.
///
/// `K(y) ∝ exp(-(y - F_z)²/(4σ²))` with `σ² = Var(F_z)_in/ξ`, so `ξ` is the
/// ratio of projection noise to shot noise. The result is renormalized.
pub fn gaussian_kraus_measure(state: &EnsembleState, xi: f64, outcome: f64) -> Result<EnsembleState> {
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(Error::InvalidArgument(format!("xi = {xi} must be finite and ≥ 0")));
    }
    let norm = state.norm();
    if xi == 0.0 {
        return Ok(EnsembleState { amps: &state.amps / C64::new(norm, 0.0), ..state.clone() });
    }
    let var = state.variance_fz();
    if var <= 0.0 {
        return Err(Error::Degenerate("prior has no projection noise".into()));
    }
    let sigma2 = var / xi;
    let mut amps = state.amps.clone();
    for (a, m) in amps.iter_mut().zip(state.magnetization()) {
        *a *= (-(outcome - m) * (outcome - m) / (4.0 * sigma2)).exp();
    }
    let n = amps.norm();
    if n == 0.0 {
        return Err(Error::Degenerate(format!("outcome {outcome} has zero likelihood")));
    }
    Ok(EnsembleState { amps: amps / C64::new(n, 0.0), ..state.clone() })
}

/// Wineland parameter `ζ = 2f N ΔF_⊥² / |⟨F⟩|²`, minimized over directions in
/// the plane spanned by `plane`, or the plane transverse to the mean spin when
/// `plane` is `None`.
pub fn exact_zeta(state: &EnsembleState, plane: Option<(Vector3<f64>, Vector3<f64>)>) -> Result<f64> {
    let ops = spin_operators(state.f);
    let comps = [&ops.fx, &ops.fy, &ops.fz];
    let mean = Vector3::from_iterator(comps.iter().map(|o| state.expectation_collective(o).re));
    let len = mean.norm();
    if len < 1e-12 {
        return Err(Error::Degenerate("zero mean spin; ζ undefined".into()));
    }
    let (u, v) = match plane {
        Some((u, v)) => (u.normalize(), v.normalize()),
        None => transverse_plane(&(mean / len)),
    };
    let op_along = |dir: &Vector3<f64>| -> DMatrix<C64> {
        &ops.fx * C64::new(dir.x, 0.0) + &ops.fy * C64::new(dir.y, 0.0) + &ops.fz * C64::new(dir.z, 0.0)
    };
    let (a, b) = (op_along(&u), op_along(&v));
    let cov = Matrix2::new(
        state.collective_covariance(&a, &a),
        state.collective_covariance(&a, &b),
        state.collective_covariance(&b, &a),
        state.collective_covariance(&b, &b),
    );
    let min_var = SymmetricEigen::new(cov).eigenvalues.min();
    Ok(2.0 * state.f.value() * state.n_atoms as f64 * min_var / (len * len))
}

fn transverse_plane(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let seed = if n.z.abs() < 0.9 { Vector3::z() } else { Vector3::y() };
    let u = (seed - n * n.dot(&seed)).normalize();
    let v = n.cross(&u);
    (u, v)
}

/// Amplitude of the product state with `↓` on the sites flagged in `pattern`
/// and `↑` elsewhere.
pub fn embedded_amplitude(state: &EnsembleState, triple: &EmbeddedTriple, pattern: &[bool]) -> Result<C64> {
    if pattern.len() != state.n_atoms {
        return Err(Error::DimensionMismatch { expected: state.n_atoms, got: pattern.len() });
    }
    let sites: Vec<&SpinState> = pattern.iter().map(|&d| if d { &triple.down } else { &triple.up }).collect();
    let basis = EnsembleState::product_of(&sites)?;
    Ok(basis.inner(state))
}

/// Single-atom density matrix under the pumping channel, in the embedded
/// basis `(↑, ↓, T)`. Lost population is tracked separately.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedDensity {
    pub rho: DMatrix<C64>,
    pub lost: f64,
}

impl EmbeddedDensity {
    pub fn pure(amps: [C64; 3]) -> Self {
        let v = DVector::from_row_slice(&amps);
        Self { rho: &v * v.adjoint(), lost: 0.0 }
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// Euler step of the jump channel: `↑ → ↓` at `flip`, `↓ → T` at `chain`,
    /// and removal from every level at `loss`.
    pub fn step(&self, rates: &PumpingRates, dt: f64) -> Self {
        let mut jumps: Vec<(f64, DMatrix<C64>)> = Vec::new();
        let mut lower = DMatrix::<C64>::zeros(3, 3);
        lower[(1, 0)] = C64::new(1.0, 0.0);
        jumps.push((rates.flip, lower));
        let mut chain = DMatrix::<C64>::zeros(3, 3);
        chain[(2, 1)] = C64::new(1.0, 0.0);
        jumps.push((rates.chain, chain));

        let mut drho = DMatrix::<C64>::zeros(3, 3);
        let mut lost = 0.0;
        for (rate, l) in &jumps {
            let ldl = l.adjoint() * l;
            drho += (l * &self.rho * l.adjoint() - (&ldl * &self.rho + &self.rho * &ldl) * C64::new(0.5, 0.0))
                * C64::new(*rate, 0.0);
        }
        drho -= &self.rho * C64::new(rates.loss, 0.0);
        lost += rates.loss * self.trace();
        Self { rho: &self.rho + drho * C64::new(dt, 0.0), lost: self.lost + lost * dt }
    }
}
