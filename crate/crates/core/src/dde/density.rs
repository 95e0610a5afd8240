use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type Mat3 = Matrix3<Complex64>;

/// Atomic density matrix over the basis {|1⟩, |2⟩, |3⟩} (indices 0, 1, 2).
///
/// Positivity is deliberately not enforced: negative delayed rates can
/// push the state transiently outside the positive cone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix3(pub Mat3);

impl DensityMatrix3 {
    /// |level⟩⟨level| with `level` in 1..=3.
    pub fn pure(level: usize) -> Self {
        assert!((1..=3).contains(&level), "levels are numbered 1..=3");
        let mut m = Mat3::zeros();
        m[(level - 1, level - 1)] = Complex64::new(1.0, 0.0);
        DensityMatrix3(m)
    }

    pub fn ground() -> Self {
        Self::pure(1)
    }

    /// ⟨i|ρ|j⟩ with levels numbered from 1.
    pub fn element(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i - 1, j - 1)]
    }

    pub fn population(&self, level: usize) -> f64 {
        self.element(level, level).re
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    /// max |ρ − ρ†| over entries.
    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

pub(crate) fn hermiticity_error(m: &Mat3) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in i..3 {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Serialised form: row-major (re, im) pairs.
impl Serialize for DensityMatrix3 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..3)
            .map(|i| (0..3).map(|j| [self.0[(i, j)].re, self.0[(i, j)].im]).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix3 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        if rows.len() != 3 || rows.iter().any(|r| r.len() != 3) {
            return Err(serde::de::Error::custom("density matrix must be 3x3"));
        }
        let mut m = Mat3::zeros();
        for (i, row) in rows.iter().enumerate() {
            for (j, [re, im]) in row.iter().enumerate() {
                m[(i, j)] = Complex64::new(*re, *im);
            }
        }
        Ok(DensityMatrix3(m))
    }
}
