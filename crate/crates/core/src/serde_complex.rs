//! Serde adapters storing complex values as `[re, im]` pairs.

pub mod vector {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::numerics::{CVector, C64};

    pub fn serialize<S: Serializer>(v: &CVector, ser: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<CVector, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(de)?;
        Ok(CVector::from_iterator(pairs.len(), pairs.into_iter().map(|[re, im]| C64::new(re, im))))
    }
}
