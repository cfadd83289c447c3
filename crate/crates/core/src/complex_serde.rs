//! Serde helpers writing complex vectors as `[{"re": .., "im": ..}, ..]`.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
struct ReIm {
    re: f64,
    im: f64,
}

pub fn serialize<S: Serializer>(values: &[Complex64], ser: S) -> Result<S::Ok, S::Error> {
    ser.collect_seq(values.iter().map(|c| ReIm { re: c.re, im: c.im }))
}

pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<Complex64>, D::Error> {
    let raw = Vec::<ReIm>::deserialize(de)?;
    Ok(raw.into_iter().map(|c| Complex64::new(c.re, c.im)).collect())
}
