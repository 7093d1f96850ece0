use std::fmt;

use super::tensor::{Real, Tensor3};
use super::InnError;

pub const CONDITION_BITS: usize = 7;
/// First lattice distance, mm.
pub const DISTANCE_MIN_MM: f64 = -125.0;
pub const DISTANCE_MAX_MM: f64 = 125.0;
pub const DISTANCE_STEP_MM: f64 = 2.5;
/// Number of lattice distances.
pub const LATTICE_SIZE: usize = 101;

/// Seven-bit binary code of a lattice distance index, most significant bit
/// first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConditionCode {
    pub bits: [u8; CONDITION_BITS],
}

impl ConditionCode {
    pub fn from_index(index: usize) -> Result<Self, InnError> {
        if index >= LATTICE_SIZE {
            return Err(InnError::Condition(format!(
                "index {index} outside 0..{LATTICE_SIZE}"
            )));
        }
        let mut bits = [0u8; CONDITION_BITS];
        for (i, b) in bits.iter_mut().enumerate() {
            *b = ((index >> (CONDITION_BITS - 1 - i)) & 1) as u8;
        }
        Ok(Self { bits })
    }

    pub fn index(&self) -> usize {
        self.bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    /// Lattice distance this code stands for, mm.
    pub fn distance(&self) -> f64 {
        DISTANCE_MIN_MM + self.index() as f64 * DISTANCE_STEP_MM
    }

    /// One constant `height × width` plane per bit.
    pub fn planes<T: Real>(&self, height: usize, width: usize) -> Tensor3<T> {
        Tensor3::from_fn(CONDITION_BITS, height, width, |c, _, _| {
            T::of(self.bits[c] as f64)
        })
    }
}

impl fmt::Display for ConditionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Code of the lattice point nearest to `d` mm; off-lattice values are
/// snapped with a warning.
pub fn encode_condition(d: f64) -> Result<ConditionCode, InnError> {
    if !(DISTANCE_MIN_MM..=DISTANCE_MAX_MM).contains(&d) {
        return Err(InnError::Condition(format!(
            "distance {d} mm outside [{DISTANCE_MIN_MM}, {DISTANCE_MAX_MM}]"
        )));
    }
    let exact = (d - DISTANCE_MIN_MM) / DISTANCE_STEP_MM;
    let index = exact.round();
    if (exact - index).abs() > 1e-9 {
        log::warn!(
            "distance {d} mm is off the {DISTANCE_STEP_MM} mm lattice; using {} mm",
            DISTANCE_MIN_MM + index * DISTANCE_STEP_MM
        );
    }
    ConditionCode::from_index(index as usize)
}
