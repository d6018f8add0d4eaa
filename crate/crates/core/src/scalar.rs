use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the whole engine is generic over.
///
/// Quadrature and special functions run in `f64` and are cast on the way in;
/// everything that touches fields, energies and FFTs stays in `T`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + rustfft::FftNum + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossless-enough literal conversion; panics only on non-finite input to an integer type, which cannot happen for floats.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().expect("finite float converts to f64")
    }

    #[inline]
    fn of_usize(k: usize) -> Self {
        Self::from_usize(k).expect("usize representable")
    }

    // `Float` and `Signed` both provide `abs`; this one is unambiguous.
    #[inline]
    fn mag(self) -> Self {
        Float::abs(self)
    }
}

impl Real for f32 {}
impl Real for f64 {}
