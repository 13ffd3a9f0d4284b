use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub use num_complex::Complex;

/// Floating point scalar accepted by every model in the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + rustfft::FftNum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant. Every constant in this crate fits in f32.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar helpers.
pub fn cx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

pub fn re<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

pub fn i_unit<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::one())
}

pub fn is_finite_cx<T: Real>(z: Complex<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}
