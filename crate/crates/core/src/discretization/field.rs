use std::ops::{Deref, DerefMut};

/// One scalar per grid node, indexed like the owning [`super::Grid`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Field {
    values: Vec<f64>,
}

/// One 2-vector per grid node.
pub type VectorField = Vec<[f64; 2]>;

impl Field {
    pub fn zeros(len: usize) -> Self {
        Field {
            values: vec![0.0; len],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Field { values }
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `u+ = (u - 1)_+`
    pub fn plus_part(&self) -> Field {
        Field::from_vec(self.values.iter().map(|v| (v - 1.0).max(0.0)).collect())
    }

    /// `u- = u - u+ = min(u, 1)`
    pub fn minus_part(&self) -> Field {
        Field::from_vec(self.values.iter().map(|v| v.min(1.0)).collect())
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &Field) -> Field {
        debug_assert_eq!(self.len(), other.len());
        Field::from_vec(
            self.values
                .iter()
                .zip(other.iter())
                .map(|(x, y)| x + a * y)
                .collect(),
        )
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field::from_vec(self.values.iter().map(|x| a * x).collect())
    }

    /// Largest absolute nodewise difference.
    pub fn sup_distance(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(other.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

impl From<Vec<f64>> for Field {
    fn from(values: Vec<f64>) -> Self {
        Field { values }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}
