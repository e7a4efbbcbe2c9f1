use serde::{Deserialize, Serialize};

use crate::linalg::Vector;

pub type ArmId = usize;

/// A selectable action and its context features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub id: ArmId,
    pub features: Vector,
}

impl Arm {
    pub fn new(id: ArmId, features: Vector) -> Self {
        Self { id, features }
    }
}

/// Index of `id` in `pool`, if present.
pub fn position(pool: &[Arm], id: ArmId) -> Option<usize> {
    pool.iter().position(|a| a.id == id)
}
