use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point score type: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumCast
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    fn lit(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("literal fits scalar")
    }

    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count fits scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
