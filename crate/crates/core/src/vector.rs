use crate::error::{Error, Result};
use crate::mesh::CartesianLevel;
use crate::real::{Precision, Real};

/// Coefficients of a finite element function on one level, in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct DofVector<T> {
    level: CartesianLevel,
    values: Vec<T>,
}

impl<T: Real> DofVector<T> {
    pub fn zeros(level: CartesianLevel) -> Self {
        Self { level, values: vec![T::zero(); level.total_dofs] }
    }

    pub fn from_values(level: CartesianLevel, values: Vec<T>) -> Result<Self> {
        if values.len() != level.total_dofs {
            return Err(Error::DimensionMismatch { expected: level.total_dofs, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("entry {i} of a vector on {level}")));
        }
        Ok(Self { level, values })
    }

    /// Fills with `f` evaluated at each node's multi-index.
    pub fn from_fn(level: CartesianLevel, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let values = (0..level.total_dofs).map(|i| f(&level.multi_index(i))).collect();
        Self { level, values }
    }

    pub fn level(&self) -> &CartesianLevel {
        &self.level
    }

    pub fn precision(&self) -> Precision {
        Precision::of::<T>()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub fn cast<U: Real>(&self) -> DofVector<U> {
        DofVector { level: self.level, values: cast_slice(&self.values) }
    }

    pub(crate) fn check_level(&self, level: &CartesianLevel) -> Result<()> {
        if &self.level != level {
            return Err(Error::LevelMismatch { expected: level.to_string(), got: self.level.to_string() });
        }
        Ok(())
    }
}

/// Euclidean norm, accumulated in `f64`.
pub fn norm<T: Real>(x: &[T]) -> f64 {
    x.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt()
}

pub fn dot<T: Real>(x: &[T], y: &[T]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a.as_f64() * b.as_f64()).sum()
}

pub fn cast_slice<T: Real, U: Real>(x: &[T]) -> Vec<U> {
    x.iter().map(|v| U::from_f64(v.as_f64())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks() {
        let l = CartesianLevel::new(2, 1, 2).unwrap();
        assert_eq!(DofVector::<f64>::zeros(l).len(), 9);
        assert!(DofVector::from_values(l, vec![0.0f64; 8]).is_err());
        assert!(matches!(
            DofVector::from_values(l, vec![f64::NAN; 9]),
            Err(Error::NonFinite(_))
        ));
        let v = DofVector::from_fn(l, |mi| (mi[0] + 10 * mi[1]) as f32);
        assert_eq!(v.values()[5], 12.0);
        assert_eq!(v.precision(), Precision::F32);
        let other = CartesianLevel::new(2, 1, 3).unwrap();
        assert!(v.check_level(&other).is_err());
        assert!(v.check_level(&l).is_ok());
    }

    #[test]
    fn norms() {
        assert_eq!(norm(&[3.0f32, 4.0]), 5.0);
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]), 11.0);
    }
}
