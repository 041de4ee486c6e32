use std::fmt;

use num_complex::Complex64 as C64;

use super::kernels::{M2, M4};
use crate::error::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Circuit element. Rotations follow `R_P(θ) = exp(-i θ P / 2)`, and
/// `Zz` is `exp(-i θ Z⊗Z / 2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    Rx {
        qubit: usize,
        theta: f64,
    },
    Ry {
        qubit: usize,
        theta: f64,
    },
    Rz {
        qubit: usize,
        theta: f64,
    },
    /// `U3|0⟩ = cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`.
    U3 {
        qubit: usize,
        theta: f64,
        phi: f64,
        lambda: f64,
    },
    X {
        qubit: usize,
    },
    Zz {
        a: usize,
        b: usize,
        theta: f64,
    },
    Cnot {
        control: usize,
        target: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Targets {
    One(usize),
    Two(usize, usize),
}

impl Targets {
    pub fn to_vec(self) -> Vec<usize> {
        match self {
            Targets::One(q) => vec![q],
            Targets::Two(a, b) => vec![a, b],
        }
    }
}

/// Local matrix of a gate. For two-qubit gates the local basis index is
/// `bit(first) + 2 * bit(second)` where `(first, second)` are the targets in
/// the order reported by [`Gate::targets`].
#[derive(Clone, Copy, Debug)]
pub enum GateMatrix {
    One(M2),
    Two(M4),
}

impl Gate {
    pub fn rx(qubit: usize, theta: f64) -> Self {
        Gate::Rx { qubit, theta }
    }
    pub fn ry(qubit: usize, theta: f64) -> Self {
        Gate::Ry { qubit, theta }
    }
    pub fn rz(qubit: usize, theta: f64) -> Self {
        Gate::Rz { qubit, theta }
    }
    pub fn u3(qubit: usize, theta: f64, phi: f64, lambda: f64) -> Self {
        Gate::U3 { qubit, theta, phi, lambda }
    }
    pub fn x(qubit: usize) -> Self {
        Gate::X { qubit }
    }
    pub fn zz(a: usize, b: usize, theta: f64) -> Self {
        Gate::Zz { a, b, theta }
    }
    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    pub fn targets(&self) -> Targets {
        match *self {
            Gate::Rx { qubit, .. }
            | Gate::Ry { qubit, .. }
            | Gate::Rz { qubit, .. }
            | Gate::U3 { qubit, .. }
            | Gate::X { qubit } => Targets::One(qubit),
            Gate::Zz { a, b, .. } => Targets::Two(a, b),
            Gate::Cnot { control, target } => Targets::Two(control, target),
        }
    }

    pub fn arity(&self) -> usize {
        match self.targets() {
            Targets::One(_) => 1,
            Targets::Two(..) => 2,
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let check = |q: usize| {
            if q < n_qubits {
                Ok(())
            } else {
                Err(Error::QubitOutOfRange { index: q, n_qubits })
            }
        };
        match self.targets() {
            Targets::One(q) => check(q),
            Targets::Two(a, b) => {
                check(a)?;
                check(b)?;
                if a == b {
                    Err(Error::DuplicateTarget(a))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// True when the matrix is diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        matches!(self, Gate::Rz { .. } | Gate::Zz { .. })
    }

    pub fn matrix(&self) -> GateMatrix {
        match *self {
            Gate::Rx { theta, .. } => {
                let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
                GateMatrix::One([[C64::new(c, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(c, 0.0)]])
            }
            Gate::Ry { theta, .. } => {
                let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
                GateMatrix::One([[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]])
            }
            Gate::Rz { theta, .. } => {
                GateMatrix::One([[C64::from_polar(1.0, -theta / 2.0), ZERO], [ZERO, C64::from_polar(1.0, theta / 2.0)]])
            }
            Gate::U3 { theta, phi, lambda, .. } => {
                let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
                GateMatrix::One([
                    [C64::new(c, 0.0), -C64::from_polar(s, lambda)],
                    [C64::from_polar(s, phi), C64::from_polar(c, phi + lambda)],
                ])
            }
            Gate::X { .. } => GateMatrix::One([[ZERO, ONE], [ONE, ZERO]]),
            Gate::Zz { theta, .. } => {
                let same = C64::from_polar(1.0, -theta / 2.0);
                let diff = C64::from_polar(1.0, theta / 2.0);
                let mut m = [[ZERO; 4]; 4];
                m[0][0] = same;
                m[1][1] = diff;
                m[2][2] = diff;
                m[3][3] = same;
                GateMatrix::Two(m)
            }
            Gate::Cnot { .. } => {
                // local index = bit(control) + 2 bit(target)
                let mut m = [[ZERO; 4]; 4];
                m[0][0] = ONE;
                m[2][2] = ONE;
                m[3][1] = ONE;
                m[1][3] = ONE;
                GateMatrix::Two(m)
            }
        }
    }

    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::Rx { qubit, theta } => Gate::Rx { qubit, theta: -theta },
            Gate::Ry { qubit, theta } => Gate::Ry { qubit, theta: -theta },
            Gate::Rz { qubit, theta } => Gate::Rz { qubit, theta: -theta },
            Gate::U3 { qubit, theta, phi, lambda } => Gate::U3 { qubit, theta: -theta, phi: -lambda, lambda: -phi },
            Gate::Zz { a, b, theta } => Gate::Zz { a, b, theta: -theta },
            g @ (Gate::X { .. } | Gate::Cnot { .. }) => g,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::Rx { .. } => "rx",
            Gate::Ry { .. } => "ry",
            Gate::Rz { .. } => "rz",
            Gate::U3 { .. } => "u3",
            Gate::X { .. } => "x",
            Gate::Zz { .. } => "rzz",
            Gate::Cnot { .. } => "cx",
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gate::Rx { qubit, theta } | Gate::Ry { qubit, theta } | Gate::Rz { qubit, theta } => {
                write!(f, "{}({theta:.6}) q{qubit}", self.name())
            }
            Gate::U3 { qubit, theta, phi, lambda } => write!(f, "u3({theta:.6},{phi:.6},{lambda:.6}) q{qubit}"),
            Gate::X { qubit } => write!(f, "x q{qubit}"),
            Gate::Zz { a, b, theta } => write!(f, "rzz({theta:.6}) q{a},q{b}"),
            Gate::Cnot { control, target } => write!(f, "cx q{control},q{target}"),
        }
    }
}

/// Product of a sequence of gates, inverted: reversed order, each gate inverted.
pub fn inverse_sequence(gates: &[Gate]) -> Vec<Gate> {
    gates.iter().rev().map(Gate::inverse).collect()
}
