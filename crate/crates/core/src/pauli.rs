use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A tensor product of Paulis. Character `k` of the text form acts on qubit `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString(Vec<Pauli>);

impl PauliString {
    pub fn new(ops: Vec<Pauli>) -> Self {
        Self(ops)
    }

    pub fn identity(n: usize) -> Self {
        Self(vec![Pauli::I; n])
    }

    /// Single non-identity factor `p` on `qubit`.
    pub fn single(n: usize, qubit: usize, p: Pauli) -> Self {
        let mut ops = vec![Pauli::I; n];
        ops[qubit] = p;
        Self(ops)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ops(&self) -> &[Pauli] {
        &self.0
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        self.0[qubit]
    }

    /// Bits flipped by the operator (X or Y factors).
    pub fn x_mask(&self) -> usize {
        self.mask(|p| matches!(p, Pauli::X | Pauli::Y))
    }

    /// Bits whose value contributes a sign (Z or Y factors).
    pub fn z_mask(&self) -> usize {
        self.mask(|p| matches!(p, Pauli::Z | Pauli::Y))
    }

    pub fn y_count(&self) -> usize {
        self.0.iter().filter(|&&p| p == Pauli::Y).count()
    }

    /// Qubits with a non-identity factor.
    pub fn support(&self) -> usize {
        self.mask(|p| p != Pauli::I)
    }

    fn mask(&self, pred: impl Fn(Pauli) -> bool) -> usize {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &p)| pred(p))
            .fold(0, |m, (q, _)| m | (1 << q))
    }

    /// `i^{#Y}`, the phase shared by every matrix element.
    pub fn y_phase(&self) -> C64 {
        match self.y_count() % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        }
    }

    /// Dense matrix. `P|r⟩ = i^{#Y} (−1)^{|r ∧ z|} |r ⊕ x⟩`.
    pub fn matrix(&self) -> DMatrix<C64> {
        let dim = 1usize << self.len();
        let (x, z, phase) = (self.x_mask(), self.z_mask(), self.y_phase());
        let mut m = DMatrix::zeros(dim, dim);
        for r in 0..dim {
            let sign = if (r & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[(r ^ x, r)] = phase * sign;
        }
        m
    }

    /// True when every qubit's factors agree or one of them is I.
    pub fn qubitwise_commutes(&self, other: &PauliString) -> bool {
        self.0
            .iter()
            .zip(&other.0)
            .all(|(&a, &b)| a == Pauli::I || b == Pauli::I || a == b)
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let ops: Option<Vec<Pauli>> = s.trim().chars().map(Pauli::from_char).collect();
        match ops {
            Some(ops) if !ops.is_empty() => Ok(Self(ops)),
            _ => Err(Error::InvalidPauli(s.to_string())),
        }
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|p| write!(f, "{}", p.as_char()))
    }
}
