//! Set metrics: Hausdorff distance and separation index.
//!
//! Both are Euclidean and computed by brute force over finite point sets;
//! every set this crate compares (equilibrium censuses, cell/orbit samples,
//! box centers) is small enough that O(|A|·|B|) is the right tool.

use crate::error::{Error, Result};
use nalgebra::DVector;

fn point_to_set(a: &DVector<f64>, set: &[DVector<f64>]) -> f64 {
    set.iter().map(|b| (a - b).norm()).fold(f64::INFINITY, f64::min)
}

/// Hausdorff distance `max(sup_{a∈A} d(a,B), sup_{b∈B} d(b,A))`.
pub fn hausdorff(a: &[DVector<f64>], b: &[DVector<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet { context: "hausdorff" });
    }
    let forward = a.iter().map(|p| point_to_set(p, b)).fold(0.0, f64::max);
    let backward = b.iter().map(|p| point_to_set(p, a)).fold(0.0, f64::max);
    Ok(forward.max(backward))
}

/// Separation index `inf_{a∈A, b∈B} d(a, b)`.
pub fn separation_index(a: &[DVector<f64>], b: &[DVector<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet { context: "separation_index" });
    }
    Ok(a.iter()
        .map(|p| point_to_set(p, b))
        .fold(f64::INFINITY, f64::min))
}
