use crate::error::{Error, Result};

pub(crate) fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(&a, &b)| f64::from(a) * f64::from(b))
        .sum()
}

pub(crate) fn norm(u: &[f32]) -> f64 {
    dot(u, u).sqrt()
}

/// `1 - dot / (|u| |v|)`, clamped to `[0, 2]`.
pub(crate) fn from_parts(dot: f64, norm_u: f64, norm_v: f64) -> f64 {
    (1.0 - dot / (norm_u * norm_v)).clamp(0.0, 2.0)
}

/// Cosine distance, one minus cosine similarity, in `[0, 2]`.
pub fn cosine_distance(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(from_parts(dot(u, v), nu, nv))
}
