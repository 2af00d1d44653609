use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances::Tolerances;

/// One named tensor factor of the Hilbert space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub name: String,
    pub dim: usize,
}

/// Ordered register layout of a tensor-product basis.
///
/// Basis indices are mixed-radix numbers with the first register as the most
/// significant digit, matching the row-major Kronecker-product convention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisLabel {
    registers: Vec<Register>,
}

impl BasisLabel {
    pub fn new(registers: Vec<Register>) -> Result<Self> {
        Self::new_with(registers, &Tolerances::default())
    }

    pub fn new_with(registers: Vec<Register>, tol: &Tolerances) -> Result<Self> {
        if registers.is_empty() {
            return Err(Error::Basis("basis needs at least one register".into()));
        }
        for (i, r) in registers.iter().enumerate() {
            if r.dim < 2 {
                return Err(Error::Basis(format!(
                    "register '{}' has dimension {}, minimum is 2",
                    r.name, r.dim
                )));
            }
            if registers[..i].iter().any(|s| s.name == r.name) {
                return Err(Error::Basis(format!("duplicate register name '{}'", r.name)));
            }
        }
        let mut dim: usize = 1;
        for r in &registers {
            dim = dim.checked_mul(r.dim).ok_or(Error::Capacity {
                requested: usize::MAX,
                cap: tol.dim_cap,
            })?;
            if dim > tol.dim_cap {
                return Err(Error::Capacity {
                    requested: dim,
                    cap: tol.dim_cap,
                });
            }
        }
        Ok(BasisLabel { registers })
    }

    /// Single-register basis.
    pub fn single(name: &str, dim: usize) -> Result<Self> {
        Self::new(vec![Register {
            name: name.into(),
            dim,
        }])
    }

    /// `n` same-dimension registers named `prefix0, prefix1, ...`.
    pub fn uniform(prefix: &str, n: usize, dim: usize) -> Result<Self> {
        Self::new(
            (0..n)
                .map(|i| Register {
                    name: format!("{prefix}{i}"),
                    dim,
                })
                .collect(),
        )
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    /// Total dimension (product of register dimensions).
    pub fn dim(&self) -> usize {
        self.registers.iter().map(|r| r.dim).product()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.registers.iter().position(|r| r.name == name)
    }

    /// Concatenation for tensor products. Register names must be disjoint.
    pub fn concat(&self, other: &BasisLabel) -> Result<Self> {
        let mut regs = self.registers.clone();
        regs.extend(other.registers.iter().cloned());
        Self::new(regs)
    }

    /// Per-register strides (last register has stride 1).
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.registers.len()];
        for i in (0..self.registers.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.registers[i + 1].dim;
        }
        strides
    }

    /// Flat index of a digit tuple.
    pub fn index_of(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.registers.len());
        self.strides()
            .iter()
            .zip(digits)
            .map(|(s, d)| s * d)
            .sum()
    }

    /// Digit tuple of a flat index.
    pub fn digits_of(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0usize; self.registers.len()];
        for (i, s) in self.strides().iter().enumerate() {
            digits[i] = index / s;
            index %= s;
        }
        digits
    }

    pub(crate) fn require_match(&self, other: &BasisLabel) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Basis(format!(
                "expected basis {:?}, got {:?}",
                self.register_names(),
                other.register_names()
            )))
        }
    }

    fn register_names(&self) -> Vec<&str> {
        self.registers.iter().map(|r| r.name.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trip() {
        let b = BasisLabel::new(vec![
            Register { name: "a".into(), dim: 2 },
            Register { name: "b".into(), dim: 3 },
            Register { name: "c".into(), dim: 2 },
        ])
        .unwrap();
        assert_eq!(b.dim(), 12);
        assert_eq!(b.strides(), vec![6, 2, 1]);
        for i in 0..12 {
            assert_eq!(b.index_of(&b.digits_of(i)), i);
        }
    }

    #[test]
    fn rejects_duplicates_small_dims_and_cap() {
        assert!(BasisLabel::new(vec![
            Register { name: "a".into(), dim: 2 },
            Register { name: "a".into(), dim: 2 },
        ])
        .is_err());
        assert!(BasisLabel::single("a", 1).is_err());
        let err = BasisLabel::uniform("q", 15, 2).unwrap_err();
        assert!(matches!(err, Error::Capacity { requested, cap } if requested > cap));
    }

    #[test]
    fn concat_requires_disjoint_names() {
        let a = BasisLabel::single("a", 2).unwrap();
        let b = BasisLabel::single("b", 3).unwrap();
        assert_eq!(a.concat(&b).unwrap().dim(), 6);
        assert!(a.concat(&a).is_err());
    }
}
