use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// Tensor product of single-qubit Paulis; letter `k` acts on qubit `k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    ops: Vec<Pauli>,
}

impl PauliString {
    pub fn new(ops: Vec<Pauli>) -> Self {
        Self { ops }
    }

    pub fn identity(n: usize) -> Self {
        Self { ops: vec![Pauli::I; n] }
    }

    /// Single non-identity letter at `qubit`.
    pub fn single(n: usize, qubit: usize, p: Pauli) -> Result<Self> {
        if qubit >= n {
            return Err(Error::QubitOutOfRange { index: qubit, n_qubits: n });
        }
        let mut ops = vec![Pauli::I; n];
        ops[qubit] = p;
        Ok(Self { ops })
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[Pauli] {
        &self.ops
    }

    /// `(x_mask, z_mask, n_y)` with `P|k⟩ = i^{n_y} (-1)^{|k & z|} |k ^ x⟩`.
    pub(crate) fn masks(&self) -> (usize, usize, usize) {
        let mut x = 0;
        let mut z = 0;
        let mut ny = 0;
        for (q, p) in self.ops.iter().enumerate() {
            match p {
                Pauli::I => {}
                Pauli::X => x |= 1 << q,
                Pauli::Z => z |= 1 << q,
                Pauli::Y => {
                    x |= 1 << q;
                    z |= 1 << q;
                    ny += 1;
                }
            }
        }
        (x, z, ny)
    }

    pub(crate) fn apply(&self, amps: &[C64]) -> Vec<C64> {
        let (x, z, ny) = self.masks();
        let global = match ny % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
        let mut out = vec![C64::new(0.0, 0.0); amps.len()];
        for (k, &a) in amps.iter().enumerate() {
            let sign = if (k & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            out[k ^ x] = global * sign * a;
        }
        out
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let ops = s
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(invalid(format!("unknown Pauli letter {other:?}"))),
            })
            .collect::<Result<_>>()?;
        Ok(Self { ops })
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.ops {
            let c = match p {
                Pauli::I => 'I',
                Pauli::X => 'X',
                Pauli::Y => 'Y',
                Pauli::Z => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}
