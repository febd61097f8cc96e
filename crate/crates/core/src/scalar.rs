use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, NumAssignOps};

/// Scalar type the numeric pipeline is generic over.
///
/// Everything downstream of ingestion (networks, optimizer, eigensolver,
/// clustering) works for any `Real`; `f32` and `f64` both qualify. Times
/// are always `f64` seconds and scoring accumulates in integer
/// milliseconds, so neither goes through this trait.
pub trait Real:
    Float + NumAssignOps + Sum + Display + LowerExp + Debug + Send + Sync + 'static
{
    /// Lift an `f64` constant into the scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from(x).expect("f64 constant not representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not convertible to f64")
    }
}

impl<T> Real for T where
    T: Float + NumAssignOps + Sum + Display + LowerExp + Debug + Send + Sync + 'static
{
}
