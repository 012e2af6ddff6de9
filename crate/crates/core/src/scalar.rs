//! Scalar abstraction for the numeric kernels.
//!
//! Everything downstream (panel returns, rolling statistics, portfolio
//! arithmetic, the ALS fit) is written against [`Scalar`] rather than a
//! concrete float so the same code runs at `f32` or `f64`. The trait is a
//! bundle of standard bounds; there is a blanket impl, so any type with the
//! listed capabilities qualifies automatically.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar usable throughout the engine.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Display
    + Debug
    + FromStr
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used for constants and tolerances.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 must convert")
    }

    /// Lossy conversion from `usize`, used for counts in averages.
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize must convert")
    }

    /// Conversion to `f64` for interop with distribution tables.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar must convert to f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + Sum
        + Display
        + Debug
        + FromStr
        + Serialize
        + DeserializeOwned
        + Send
        + Sync
        + 'static
{
}

/// Mean of a slice. Returns `None` on empty input.
pub fn mean<R: Scalar>(xs: &[R]) -> Option<R> {
    if xs.is_empty() {
        return None;
    }
    let sum: R = xs.iter().copied().sum();
    Some(sum / R::from_usize_lossy(xs.len()))
}

/// Sample standard deviation (n-1 denominator). `None` when fewer than two
/// observations.
pub fn sample_std<R: Scalar>(xs: &[R]) -> Option<R> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: R = xs.iter().map(|&x| (x - m) * (x - m)).sum();
    Some((ss / R::from_usize_lossy(xs.len() - 1)).sqrt())
}

/// Population standard deviation (n denominator). `None` on empty input.
pub fn population_std<R: Scalar>(xs: &[R]) -> Option<R> {
    if xs.is_empty() {
        return None;
    }
    let m = mean(xs)?;
    let ss: R = xs.iter().map(|&x| (x - m) * (x - m)).sum();
    Some((ss / R::from_usize_lossy(xs.len())).sqrt())
}
