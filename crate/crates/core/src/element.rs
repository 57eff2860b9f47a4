//! Element types and the arithmetic the kernels need from them.
//!
//! Inputs are `f32`, `f64`, `i16` and `i8`. Integer inputs widen to `i32`
//! accumulators and all integer arithmetic wraps, so any two evaluation
//! orders agree bit for bit.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementType {
    F32,
    F64,
    I16ToI32,
    I8ToI32,
}

impl ElementType {
    pub const ALL: [ElementType; 4] = [
        ElementType::F32,
        ElementType::F64,
        ElementType::I16ToI32,
        ElementType::I8ToI32,
    ];

    pub fn element_bytes(self) -> usize {
        match self {
            ElementType::F32 => 4,
            ElementType::F64 => 8,
            ElementType::I16ToI32 => 2,
            ElementType::I8ToI32 => 1,
        }
    }

    pub fn accum_bytes(self) -> usize {
        match self {
            ElementType::F64 => 8,
            _ => 4,
        }
    }

    /// Number of outer products folded into one accumulator update.
    pub fn rank(self) -> usize {
        match self {
            ElementType::F32 | ElementType::F64 => 1,
            ElementType::I16ToI32 => 2,
            ElementType::I8ToI32 => 4,
        }
    }

    /// Result shape `(rows, cols)` held by one accumulator.
    pub fn acc_shape(self) -> (usize, usize) {
        match self {
            ElementType::F64 => (4, 2),
            _ => (4, 4),
        }
    }

    pub fn is_integer(self) -> bool {
        matches!(self, ElementType::I16ToI32 | ElementType::I8ToI32)
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementType::F32 => "f32",
            ElementType::F64 => "f64",
            ElementType::I16ToI32 => "i16",
            ElementType::I8ToI32 => "i8",
        }
    }
}

impl fmt::Display for ElementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "f32" | "float" | "sgemm" => Ok(ElementType::F32),
            "f64" | "double" | "dgemm" => Ok(ElementType::F64),
            "i16" | "i16_to_i32" => Ok(ElementType::I16ToI32),
            "i8" | "i8_to_i32" => Ok(ElementType::I8ToI32),
            other => Err(Error::InvalidArgument(format!("unknown element type `{other}`"))),
        }
    }
}

/// Arithmetic shared by inputs and accumulators.
///
/// `plus`/`times` wrap for integers and round-to-nearest for floats; no
/// fused multiply-add is ever used.
pub trait Scalar: Copy + Default + PartialEq + PartialOrd + fmt::Debug + Send + Sync + 'static {
    /// Machine epsilon as an `f64`; zero for integers.
    const EPSILON: f64;
    /// Smallest positive normal value (1 for integers).
    const TINY: f64;

    fn zero() -> Self {
        Self::default()
    }
    fn one() -> Self;
    fn plus(self, rhs: Self) -> Self;
    fn times(self, rhs: Self) -> Self;
    fn to_f64(self) -> f64;
    /// Nearest representable value; integers round and saturate.
    fn from_f64(v: f64) -> Self;
    /// Raw bit pattern, for checksums.
    fn to_bits_u64(self) -> u64;

    #[inline(always)]
    fn mul_add(self, a: Self, b: Self) -> Self {
        self.plus(a.times(b))
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const EPSILON: f64 = <$t>::EPSILON as f64;
            const TINY: f64 = <$t>::MIN_POSITIVE as f64;
            #[inline(always)]
            fn one() -> Self {
                1.0
            }
            #[inline(always)]
            fn plus(self, rhs: Self) -> Self {
                self + rhs
            }
            #[inline(always)]
            fn times(self, rhs: Self) -> Self {
                self * rhs
            }
            #[inline(always)]
            fn to_f64(self) -> f64 {
                self as f64
            }
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            fn to_bits_u64(self) -> u64 {
                self.to_bits() as u64
            }
        }
    };
}

macro_rules! int_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const EPSILON: f64 = 0.0;
            const TINY: f64 = 1.0;
            #[inline(always)]
            fn one() -> Self {
                1
            }
            #[inline(always)]
            fn plus(self, rhs: Self) -> Self {
                self.wrapping_add(rhs)
            }
            #[inline(always)]
            fn times(self, rhs: Self) -> Self {
                self.wrapping_mul(rhs)
            }
            #[inline(always)]
            fn to_f64(self) -> f64 {
                self as f64
            }
            fn from_f64(v: f64) -> Self {
                v.round() as $t
            }
            fn to_bits_u64(self) -> u64 {
                self as u64
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);
int_scalar!(i32);
int_scalar!(i16);
int_scalar!(i8);

/// An input element type together with its accumulation type.
pub trait Element: Scalar {
    type Acc: Scalar;
    const ETYPE: ElementType;

    fn widen(self) -> Self::Acc;
}

impl Element for f32 {
    type Acc = f32;
    const ETYPE: ElementType = ElementType::F32;
    #[inline(always)]
    fn widen(self) -> f32 {
        self
    }
}

impl Element for f64 {
    type Acc = f64;
    const ETYPE: ElementType = ElementType::F64;
    #[inline(always)]
    fn widen(self) -> f64 {
        self
    }
}

impl Element for i16 {
    type Acc = i32;
    const ETYPE: ElementType = ElementType::I16ToI32;
    #[inline(always)]
    fn widen(self) -> i32 {
        self as i32
    }
}

impl Element for i8 {
    type Acc = i32;
    const ETYPE: ElementType = ElementType::I8ToI32;
    #[inline(always)]
    fn widen(self) -> i32 {
        self as i32
    }
}
