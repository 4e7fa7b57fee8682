//! Division-algebra scalars.
//!
//! Every scalar is stored as a quaternion `c[0] + c[1] i + c[2] j + c[3] k`.
//! Reals and complex numbers are the subalgebras with the trailing
//! components zero; quaternion multiplication restricted to them is the
//! usual (commutative) product, so one code path serves all three algebras.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the three real division algebras.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlgebraTag {
    R,
    C,
    H,
}

impl AlgebraTag {
    pub const ALL: [AlgebraTag; 3] = [AlgebraTag::R, AlgebraTag::C, AlgebraTag::H];

    /// Real dimension δ = dim K.
    pub const fn dim(self) -> usize {
        match self {
            AlgebraTag::R => 1,
            AlgebraTag::C => 2,
            AlgebraTag::H => 4,
        }
    }

    pub fn delta(self) -> f64 {
        self.dim() as f64
    }

    pub fn group(self) -> Group {
        match self {
            AlgebraTag::R => Group::SO,
            AlgebraTag::C => Group::U,
            AlgebraTag::H => Group::Sp,
        }
    }
}

impl fmt::Display for AlgebraTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlgebraTag::R => "R",
            AlgebraTag::C => "C",
            AlgebraTag::H => "H",
        })
    }
}

/// The connected compact group U°(n, K).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    SO,
    U,
    Sp,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::SO, Group::U, Group::Sp];

    pub fn algebra(self) -> AlgebraTag {
        match self {
            Group::SO => AlgebraTag::R,
            Group::U => AlgebraTag::C,
            Group::Sp => AlgebraTag::H,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "so" | "r" => Ok(Group::SO),
            "u" | "c" => Ok(Group::U),
            "sp" | "h" => Ok(Group::Sp),
            other => Err(Error::Domain(format!("unknown group '{other}' (expected so, u or sp)"))),
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::SO => "SO",
            Group::U => "U",
            Group::Sp => "Sp",
        })
    }
}

/// A quaternion-valued scalar (1, i, j, k components).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Scalar {
    pub c: [f64; 4],
}

impl Scalar {
    pub const ZERO: Scalar = Scalar { c: [0.0; 4] };
    pub const ONE: Scalar = Scalar { c: [1.0, 0.0, 0.0, 0.0] };
    pub const I: Scalar = Scalar { c: [0.0, 1.0, 0.0, 0.0] };
    pub const J: Scalar = Scalar { c: [0.0, 0.0, 1.0, 0.0] };
    pub const K: Scalar = Scalar { c: [0.0, 0.0, 0.0, 1.0] };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Scalar { c: [a, b, c, d] }
    }

    pub const fn real(x: f64) -> Self {
        Scalar { c: [x, 0.0, 0.0, 0.0] }
    }

    pub const fn complex(re: f64, im: f64) -> Self {
        Scalar { c: [re, im, 0.0, 0.0] }
    }

    pub fn from_c64(z: Complex64) -> Self {
        Scalar::complex(z.re, z.im)
    }

    #[inline]
    pub fn re(self) -> f64 {
        self.c[0]
    }

    /// The complex part `c0 + c1 i`; exact for real and complex scalars.
    #[inline]
    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.c[0], self.c[1])
    }

    #[inline]
    pub fn conj(self) -> Self {
        Scalar::new(self.c[0], -self.c[1], -self.c[2], -self.c[3])
    }

    #[inline]
    pub fn norm_sqr(self) -> f64 {
        let [a, b, c, d] = self.c;
        a * a + b * b + c * c + d * d
    }

    #[inline]
    pub fn abs(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    #[inline]
    pub fn scale(self, s: f64) -> Self {
        Scalar::new(self.c[0] * s, self.c[1] * s, self.c[2] * s, self.c[3] * s)
    }

    /// Two-sided inverse `conj(q) / |q|²`; `None` for zero.
    #[inline]
    pub fn inv(self) -> Option<Self> {
        let n = self.norm_sqr();
        if n == 0.0 {
            None
        } else {
            Some(self.conj().scale(1.0 / n))
        }
    }

    /// True when the components outside `algebra` vanish.
    pub fn lies_in(self, algebra: AlgebraTag) -> bool {
        let used = algebra.dim();
        self.c[used..].iter().all(|&x| x == 0.0)
    }

    /// The 4×4 real matrix of left multiplication `x ↦ self · x` (row-major).
    pub fn left_mul_matrix(self) -> [[f64; 4]; 4] {
        let [a, b, c, d] = self.c;
        [[a, -b, -c, -d], [b, a, -d, c], [c, d, a, -b], [d, -c, b, a]]
    }

    pub fn is_finite(self) -> bool {
        self.c.iter().all(|x| x.is_finite())
    }
}

impl Add for Scalar {
    type Output = Scalar;
    #[inline]
    fn add(self, o: Scalar) -> Scalar {
        Scalar::new(self.c[0] + o.c[0], self.c[1] + o.c[1], self.c[2] + o.c[2], self.c[3] + o.c[3])
    }
}

impl Sub for Scalar {
    type Output = Scalar;
    #[inline]
    fn sub(self, o: Scalar) -> Scalar {
        Scalar::new(self.c[0] - o.c[0], self.c[1] - o.c[1], self.c[2] - o.c[2], self.c[3] - o.c[3])
    }
}

impl AddAssign for Scalar {
    #[inline]
    fn add_assign(&mut self, o: Scalar) {
        *self = *self + o;
    }
}

impl SubAssign for Scalar {
    #[inline]
    fn sub_assign(&mut self, o: Scalar) {
        *self = *self - o;
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    #[inline]
    fn neg(self) -> Scalar {
        Scalar::new(-self.c[0], -self.c[1], -self.c[2], -self.c[3])
    }
}

/// Hamilton product (noncommutative for genuine quaternions).
impl Mul for Scalar {
    type Output = Scalar;
    #[inline]
    fn mul(self, o: Scalar) -> Scalar {
        let [a1, b1, c1, d1] = self.c;
        let [a2, b2, c2, d2] = o.c;
        Scalar::new(
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        )
    }
}

impl From<f64> for Scalar {
    fn from(x: f64) -> Self {
        Scalar::real(x)
    }
}

impl From<Complex64> for Scalar {
    fn from(z: Complex64) -> Self {
        Scalar::from_c64(z)
    }
}
