//! The eight patient profiles and their binary feature encoding.
//!
//! | id | age | drinking   | cancer  | features |
//! |----|-----|------------|---------|----------|
//! | 1  | 30  | rare       | healthy | (1,1,1)  |
//! | 2  | 30  | frequently | healthy | (1,0,1)  |
//! | 3  | 30  | rare       | cancer  | (1,1,0)  |
//! | 4  | 30  | frequently | cancer  | (1,0,0)  |
//! | 5  | 70  | rare       | healthy | (0,1,1)  |
//! | 6  | 70  | frequently | healthy | (0,0,1)  |
//! | 7  | 70  | rare       | cancer  | (0,1,0)  |
//! | 8  | 70  | frequently | cancer  | (0,0,0)  |
//!
//! Features are `(1[age = 30], 1[drinking = rare], 1[cancer = healthy])`.

use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PROFILE_COUNT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Age {
    Y30,
    O70,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Drinking {
    Rare,
    Frequent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cancer {
    Healthy,
    Cancer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PatientProfile(u8);

impl PatientProfile {
    pub const ALL: [PatientProfile; PROFILE_COUNT] = [
        PatientProfile(1),
        PatientProfile(2),
        PatientProfile(3),
        PatientProfile(4),
        PatientProfile(5),
        PatientProfile(6),
        PatientProfile(7),
        PatientProfile(8),
    ];

    pub fn new(id: u8) -> Result<Self> {
        if (1..=PROFILE_COUNT as u8).contains(&id) {
            Ok(PatientProfile(id))
        } else {
            Err(Error::Domain(format!("profile id {id} is outside 1..=8")))
        }
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < PROFILE_COUNT, "profile index {index} out of range");
        PatientProfile(index as u8 + 1)
    }

    pub fn from_attributes(age: Age, drinking: Drinking, cancer: Cancer) -> Self {
        let mut index = 0;
        if age == Age::O70 {
            index += 4;
        }
        if cancer == Cancer::Cancer {
            index += 2;
        }
        if drinking == Drinking::Frequent {
            index += 1;
        }
        PatientProfile::from_index(index)
    }

    pub fn id(self) -> u8 {
        self.0
    }

    /// Zero-based position, `id - 1`.
    pub fn index(self) -> usize {
        usize::from(self.0 - 1)
    }

    pub fn age(self) -> Age {
        if self.index() & 4 == 0 {
            Age::Y30
        } else {
            Age::O70
        }
    }

    pub fn drinking(self) -> Drinking {
        if self.index() & 1 == 0 {
            Drinking::Rare
        } else {
            Drinking::Frequent
        }
    }

    pub fn cancer(self) -> Cancer {
        if self.index() & 2 == 0 {
            Cancer::Healthy
        } else {
            Cancer::Cancer
        }
    }

    pub fn features(self) -> Vector3<f64> {
        let bit = |b: bool| if b { 1.0 } else { 0.0 };
        Vector3::new(
            bit(self.age() == Age::Y30),
            bit(self.drinking() == Drinking::Rare),
            bit(self.cancer() == Cancer::Healthy),
        )
    }
}

impl TryFrom<u8> for PatientProfile {
    type Error = Error;

    fn try_from(id: u8) -> Result<Self> {
        PatientProfile::new(id)
    }
}

impl From<PatientProfile> for u8 {
    fn from(p: PatientProfile) -> u8 {
        p.0
    }
}

impl fmt::Display for PatientProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
