//! Single-excitation (free-fermion) treatment of XX chains.
//!
//! An XX chain conserves the number of up spins, so a single flipped spin
//! moves under an `N × N` tridiagonal hopping matrix. This reaches chain
//! lengths far beyond the dense engine.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{coupling_profile, ChainSpec};
use crate::error::{QstError, Result};
use crate::quantum::linalg::{Operator, C64};

/// Ratio between hopping amplitudes and the `K_i` of the spin Hamiltonian:
/// `K (XX + YY) = 2K (σ⁺σ⁻ + σ⁻σ⁺)`. Fixed by `calibration_against_dense`.
pub const HOPPING_SCALE: f64 = 2.0;

/// Amplitudes above one by more than this are a numerical error.
pub const AMPLITUDE_TOL: f64 = 1e-9;

/// Default scan window for the homogeneous chain, in units of `1/J`.
pub const DEFAULT_T_MAX: f64 = 400.0;

pub const DEFAULT_GRID_POINTS: usize = 40_001;

#[derive(Debug, Clone)]
pub struct HoppingMatrix {
    matrix: DMatrix<f64>,
}

impl HoppingMatrix {
    pub fn new(spec: &ChainSpec) -> Result<Self> {
        if !spec.model().is_xx() {
            return Err(QstError::UnsupportedModel(format!(
                "{} does not conserve excitation number",
                spec.model()
            )));
        }
        let n = spec.n_sites();
        let profile = coupling_profile(spec);
        let mut matrix = DMatrix::zeros(n, n);
        for (b, k) in profile.couplings.iter().enumerate() {
            matrix[(b, b + 1)] = HOPPING_SCALE * k;
            matrix[(b + 1, b)] = HOPPING_SCALE * k;
        }
        Ok(Self { matrix })
    }

    pub fn n_sites(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn off_diagonal(&self) -> Vec<f64> {
        (0..self.n_sites() - 1).map(|b| self.matrix[(b, b + 1)]).collect()
    }
}

pub fn hopping_matrix(spec: &ChainSpec) -> Result<HoppingMatrix> {
    HoppingMatrix::new(spec)
}

/// Diagonalised hopping matrix.
#[derive(Debug, Clone)]
pub struct FermionEngine {
    hopping: HoppingMatrix,
    energies: DVector<f64>,
    modes: DMatrix<f64>,
}

impl FermionEngine {
    pub fn new(spec: &ChainSpec) -> Result<Self> {
        let hopping = HoppingMatrix::new(spec)?;
        let n = hopping.n_sites();
        let eig = SymmetricEigen::try_new(hopping.matrix.clone(), f64::EPSILON, 100 * n.max(10))
            .ok_or_else(|| QstError::Numerical("hopping matrix diagonalisation did not converge".into()))?;
        Ok(Self { hopping, energies: eig.eigenvalues, modes: eig.eigenvectors })
    }

    pub fn hopping(&self) -> &HoppingMatrix {
        &self.hopping
    }

    pub fn n_sites(&self) -> usize {
        self.hopping.n_sites()
    }

    /// `⟨to| exp(-iht) |from⟩` for 1-based sites.
    pub fn amplitude(&self, to: usize, from: usize, t: f64) -> C64 {
        let (a, b) = (to - 1, from - 1);
        self.energies
            .iter()
            .enumerate()
            .map(|(k, &e)| C64::from_polar(self.modes[(a, k)] * self.modes[(b, k)], -e * t))
            .sum()
    }

    /// End-to-end amplitude `f(t) = ⟨N| exp(-iht) |1⟩`.
    pub fn transfer_amplitude(&self, t: f64) -> C64 {
        self.amplitude(self.n_sites(), 1, t)
    }

    /// Full `exp(-iht)`.
    pub fn propagator(&self, t: f64) -> Operator {
        let cos = DMatrix::from_fn(self.n_sites(), self.n_sites(), |r, k| self.modes[(r, k)] * (self.energies[k] * t).cos());
        let sin = DMatrix::from_fn(self.n_sites(), self.n_sites(), |r, k| -self.modes[(r, k)] * (self.energies[k] * t).sin());
        let vt = self.modes.transpose();
        let re = &cos * &vt;
        let im = &sin * &vt;
        Operator::from_fn(re.nrows(), re.ncols(), |r, c| C64::new(re[(r, c)], im[(r, c)]))
    }
}

pub fn transfer_amplitude(spec: &ChainSpec, t: f64) -> Result<C64> {
    Ok(FermionEngine::new(spec)?.transfer_amplitude(t))
}

/// Average fidelity over input states implied by an end-to-end amplitude:
/// `1/2 + |f|/3 + |f|²/6`.
pub fn average_fidelity_estimate(f: C64) -> Result<f64> {
    let a = f.norm();
    if a > 1.0 + AMPLITUDE_TOL {
        return Err(QstError::Numerical(format!("transfer amplitude {a} exceeds one")));
    }
    let a = a.min(1.0);
    Ok((3.0 + 2.0 * a + a * a) / 6.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferCurve {
    pub times: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub avg_fidelities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferOptimum {
    pub t_opt: f64,
    pub abs_f_max: f64,
    pub avg_fidelity_estimate: f64,
    pub curve: TransferCurve,
}

/// Grid scan of `|f|` on `[0, t_max]` followed by successive parabolic
/// refinement around the best grid point.
pub fn optimize_transfer_time(spec: &ChainSpec, t_max: f64, grid_points: usize) -> Result<TransferOptimum> {
    FermionEngine::new(spec)?.optimize(t_max, grid_points)
}

impl FermionEngine {
    pub fn scan(&self, t_max: f64, grid_points: usize) -> Result<TransferCurve> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(QstError::invalid(format!("t_max must be positive, got {t_max}")));
        }
        if grid_points < 2 {
            return Err(QstError::invalid("grid needs at least 2 points"));
        }
        let step = t_max / (grid_points - 1) as f64;
        let times: Vec<f64> = (0..grid_points).map(|k| k as f64 * step).collect();
        let amplitudes: Vec<f64> = times.par_iter().map(|&t| self.transfer_amplitude(t).norm()).collect();
        let avg_fidelities = amplitudes
            .iter()
            .map(|&a| average_fidelity_estimate(C64::new(a, 0.0)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TransferCurve { times, amplitudes, avg_fidelities })
    }

    pub fn optimize(&self, t_max: f64, grid_points: usize) -> Result<TransferOptimum> {
        let curve = self.scan(t_max, grid_points)?;
        let best = curve
            .amplitudes
            .iter()
            .enumerate()
            .fold(0, |b, (k, &a)| if a > curve.amplitudes[b] { k } else { b });
        let (mut t_opt, mut f_opt) = (curve.times[best], curve.amplitudes[best]);
        if best > 0 && best + 1 < grid_points {
            let (t, f) = self.refine(curve.times[best - 1], curve.times[best], curve.times[best + 1]);
            if f > f_opt {
                t_opt = t;
                f_opt = f;
            }
        }
        Ok(TransferOptimum {
            t_opt,
            abs_f_max: f_opt,
            avg_fidelity_estimate: average_fidelity_estimate(C64::new(f_opt, 0.0))?,
            curve,
        })
    }

    fn refine(&self, mut a: f64, mut b: f64, mut c: f64) -> (f64, f64) {
        let g = |t: f64| self.transfer_amplitude(t).norm();
        let (mut fa, mut fb, mut fc) = (g(a), g(b), g(c));
        for _ in 0..60 {
            if c - a < 1e-12 * b.abs().max(1.0) {
                break;
            }
            let num = (b - a).powi(2) * (fb - fc) - (b - c).powi(2) * (fb - fa);
            let den = (b - a) * (fb - fc) - (b - c) * (fb - fa);
            let mut x = if den.abs() > f64::MIN_POSITIVE { b - 0.5 * num / den } else { f64::NAN };
            // Fall back to bisecting the larger half when the vertex is unusable.
            if !(x > a && x < c) || (x - b).abs() < 1e-15 {
                x = if b - a > c - b { 0.5 * (a + b) } else { 0.5 * (b + c) };
            }
            let fx = g(x);
            if fx > fb {
                if x < b {
                    (c, fc) = (b, fb);
                } else {
                    (a, fa) = (b, fb);
                }
                (b, fb) = (x, fx);
            } else if x < b {
                (a, fa) = (x, fx);
            } else {
                (c, fc) = (x, fx);
            }
        }
        (b, fb)
    }
}
