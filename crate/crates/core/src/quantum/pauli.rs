use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use super::linalg::{c, Ket, Operator, Qubit2, C64, I, ONE, ZERO};
use crate::error::{QstError, Result};

/// Single-site Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    pub const NON_TRIVIAL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> Qubit2 {
        match self {
            Pauli::I => Qubit2::new(ONE, ZERO, ZERO, ONE),
            Pauli::X => Qubit2::new(ZERO, ONE, ONE, ZERO),
            Pauli::Y => Qubit2::new(ZERO, -I, I, ZERO),
            Pauli::Z => Qubit2::new(ONE, ZERO, ZERO, -ONE),
        }
    }

    fn flips(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    fn signs(self) -> bool {
        matches!(self, Pauli::Y | Pauli::Z)
    }

    /// `self * other = i^k * letter`.
    pub fn product(self, other: Pauli) -> (Phase, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (Phase::One, p),
            (a, b) if a == b => (Phase::One, I),
            (X, Y) => (Phase::I, Z),
            (Y, X) => (Phase::MinusI, Z),
            (Y, Z) => (Phase::I, X),
            (Z, Y) => (Phase::MinusI, X),
            (Z, X) => (Phase::I, Y),
            (X, Z) => (Phase::MinusI, Y),
            _ => unreachable!(),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_symbol(ch: char) -> Option<Pauli> {
        match ch.to_ascii_uppercase() {
            'I' | '1' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// Phase from the group {+1, +i, -1, -i}, stored as a power of `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    One,
    I,
    MinusOne,
    MinusI,
}

impl Phase {
    pub fn power(self) -> u8 {
        match self {
            Phase::One => 0,
            Phase::I => 1,
            Phase::MinusOne => 2,
            Phase::MinusI => 3,
        }
    }

    pub fn from_power(k: u8) -> Phase {
        match k % 4 {
            0 => Phase::One,
            1 => Phase::I,
            2 => Phase::MinusOne,
            _ => Phase::MinusI,
        }
    }

    pub fn value(self) -> C64 {
        match self {
            Phase::One => ONE,
            Phase::I => I,
            Phase::MinusOne => -ONE,
            Phase::MinusI => -I,
        }
    }
}

impl Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        // Phases are powers of i, so multiplication adds exponents.
        #[allow(clippy::suspicious_arithmetic_impl)]
        Phase::from_power(self.power() + rhs.power())
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::One => "+1",
            Phase::I => "+i",
            Phase::MinusOne => "-1",
            Phase::MinusI => "-i",
        })
    }
}

/// Phased tensor product of Pauli letters; `letters[0]` is site 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    pub phase: Phase,
    pub letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(phase: Phase, letters: Vec<Pauli>) -> Self {
        Self { phase, letters }
    }

    pub fn identity(n_sites: usize) -> Self {
        Self::new(Phase::One, vec![Pauli::I; n_sites])
    }

    /// Identity everywhere except the listed `(site, letter)` pairs (1-based).
    pub fn on_sites(n_sites: usize, ops: &[(usize, Pauli)]) -> Result<Self> {
        let mut letters = vec![Pauli::I; n_sites];
        for &(site, p) in ops {
            if site == 0 || site > n_sites {
                return Err(QstError::invalid(format!(
                    "site {site} outside chain of {n_sites}"
                )));
            }
            let (ph, l) = letters[site - 1].product(p);
            if ph != Phase::One {
                return Err(QstError::invalid("repeated site in Pauli string"));
            }
            letters[site - 1] = l;
        }
        Ok(Self::new(Phase::One, letters))
    }

    /// Parse strings like `"ZIY"`, `"-i XZ"` or `"+1 XX"`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (phase, body) = match s.split_once(char::is_whitespace) {
            Some((p, rest)) => {
                let phase = match p {
                    "+1" | "1" => Phase::One,
                    "-1" => Phase::MinusOne,
                    "+i" | "i" => Phase::I,
                    "-i" => Phase::MinusI,
                    _ => return Err(QstError::invalid(format!("bad phase '{p}'"))),
                };
                (phase, rest.trim())
            }
            None => (Phase::One, s),
        };
        let letters = body
            .chars()
            .map(|ch| Pauli::from_symbol(ch).ok_or_else(|| QstError::invalid(format!("bad Pauli letter '{ch}'"))))
            .collect::<Result<Vec<_>>>()?;
        if letters.is_empty() {
            return Err(QstError::invalid("empty Pauli string"));
        }
        Ok(Self::new(phase, letters))
    }

    pub fn n_sites(&self) -> usize {
        self.letters.len()
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    fn masks(&self) -> (usize, usize, u32) {
        let n = self.letters.len();
        let mut flip = 0usize;
        let mut sign = 0usize;
        let mut n_y = 0u32;
        for (k, &p) in self.letters.iter().enumerate() {
            let bit = 1usize << (n - 1 - k);
            if p.flips() {
                flip |= bit;
            }
            if p.signs() {
                sign |= bit;
            }
            if p == Pauli::Y {
                n_y += 1;
            }
        }
        (flip, sign, n_y)
    }

    /// Dense matrix, site 1 as the leftmost tensor factor.
    pub fn to_matrix(&self) -> Operator {
        let dim = 1usize << self.letters.len();
        let (flip, sign, n_y) = self.masks();
        let base = self.phase * Phase::from_power((n_y % 4) as u8);
        let mut m = Operator::zeros(dim, dim);
        for col in 0..dim {
            let neg = (col & sign).count_ones() % 2 == 1;
            let v = if neg { -base.value() } else { base.value() };
            m[(col ^ flip, col)] = v;
        }
        m
    }

    /// `m += coefficient * self` without materialising the string.
    pub fn accumulate_into(&self, m: &mut Operator, coefficient: C64) {
        let dim = 1usize << self.letters.len();
        assert_eq!(m.shape(), (dim, dim), "register size mismatch");
        let (flip, sign, n_y) = self.masks();
        let base = (self.phase * Phase::from_power((n_y % 4) as u8)).value() * coefficient;
        for col in 0..dim {
            let neg = (col & sign).count_ones() % 2 == 1;
            m[(col ^ flip, col)] += if neg { -base } else { base };
        }
    }

    /// Apply to a register ket without building the dense matrix.
    pub fn apply(&self, psi: &Ket) -> Ket {
        let dim = psi.len();
        assert_eq!(dim, 1usize << self.letters.len(), "register size mismatch");
        let (flip, sign, n_y) = self.masks();
        let base = (self.phase * Phase::from_power((n_y % 4) as u8)).value();
        let mut out = Ket::zeros(dim);
        for col in 0..dim {
            let neg = (col & sign).count_ones() % 2 == 1;
            let v = if neg { -base } else { base };
            out[col ^ flip] += v * psi[col];
        }
        out
    }

    /// Number of `Y` letters, which fixes Hermiticity given a real phase.
    pub fn y_count(&self) -> usize {
        self.letters.iter().filter(|&&p| p == Pauli::Y).count()
    }

    pub fn is_hermitian(&self) -> bool {
        matches!(self.phase, Phase::One | Phase::MinusOne)
    }
}

impl Mul for &PauliString {
    type Output = PauliString;
    fn mul(self, rhs: &PauliString) -> PauliString {
        assert_eq!(self.letters.len(), rhs.letters.len(), "Pauli strings of different length");
        let mut phase = self.phase * rhs.phase;
        let letters = self
            .letters
            .iter()
            .zip(&rhs.letters)
            .map(|(&a, &b)| {
                let (ph, l) = a.product(b);
                phase = phase * ph;
                l
            })
            .collect();
        PauliString::new(phase, letters)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ", self.phase)?;
        for p in &self.letters {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

/// `diag(1, i)`; its square is `Z`.
pub fn t_gate() -> Qubit2 {
    Qubit2::new(ONE, ZERO, ZERO, I)
}

/// `T^k` with `k` reduced mod 4 (negative powers allowed).
pub fn t_power(k: i64) -> Qubit2 {
    let r = k.rem_euclid(4) as u8;
    Qubit2::new(ONE, ZERO, ZERO, Phase::from_power(r).value())
}

pub fn hadamard() -> Qubit2 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Qubit2::new(c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::linalg::{kron, max_abs_diff};

    #[test]
    fn single_x_matrix() {
        let m = PauliString::parse("X").unwrap().to_matrix();
        assert_eq!(m, Operator::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]));
    }

    #[test]
    fn phase_is_linear() {
        let p = PauliString::new(Phase::I, vec![Pauli::Z, Pauli::Y]);
        let zy = kron(&super::super::linalg::qubit_to_operator(&Pauli::Z.matrix()), &super::super::linalg::qubit_to_operator(&Pauli::Y.matrix())).unwrap();
        assert!(max_abs_diff(&p.to_matrix(), &(zy * I)) < 1e-15);
    }

    #[test]
    fn identity_string_is_identity() {
        assert_eq!(PauliString::identity(3).to_matrix(), Operator::identity(8, 8));
    }

    #[test]
    fn letter_products_follow_cyclic_rule() {
        for a in Pauli::ALL {
            for b in Pauli::ALL {
                let (ph, l) = a.product(b);
                let lhs = a.matrix() * b.matrix();
                let rhs = l.matrix() * ph.value();
                assert!((lhs - rhs).norm() < 1e-15, "{a:?}{b:?}");
            }
        }
    }

    #[test]
    fn parse_round_trip() {
        let p = PauliString::parse("-i XZIY").unwrap();
        assert_eq!(p.phase, Phase::MinusI);
        assert_eq!(p.to_string(), "-i XZIY");
        assert!(PauliString::parse("XQ").is_err());
    }

    #[test]
    fn t_squares_to_z() {
        let t = t_gate();
        assert!((t * t - Pauli::Z.matrix()).norm() < 1e-15);
        assert!((t_power(-1) - t.adjoint()).norm() < 1e-15);
        assert!((t_power(5) - t).norm() < 1e-15);
    }

    #[test]
    fn apply_matches_matrix() {
        let p = PauliString::parse("+i YXZ").unwrap();
        let psi = Ket::from_fn(8, |i, _| c(i as f64, 1.0 - i as f64));
        let a = p.apply(&psi);
        let b = p.to_matrix() * &psi;
        assert!((a - b).norm() < 1e-14);
    }
}
