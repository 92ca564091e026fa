//! Arithmetic over the prime field `F_q`, `q = 2^32 - 5`, and the seeded
//! element stream used for every random draw in the simulator.
//!
//! The generator is splitmix64 with rejection sampling. It is reproducible
//! across implementations and exactly uniform on `[0, q)`, but it is **not** a
//! cryptographic PRG. Nothing produced by this crate should be used to protect
//! real data.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The field modulus, the largest prime below `2^32`.
pub const MODULUS: u32 = 4_294_967_291;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum FieldError {
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
}

/// A canonical element of `F_q`; the wrapped value is always below [`MODULUS`].
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct FieldElem(u32);

impl FieldElem {
    pub const ZERO: FieldElem = FieldElem(0);
    pub const ONE: FieldElem = FieldElem(1);

    /// Reduces an arbitrary integer into the field.
    pub const fn new(value: u64) -> Self {
        FieldElem((value % MODULUS as u64) as u32)
    }

    /// Wraps `value` if it is already canonical.
    pub const fn from_canonical(value: u32) -> Option<Self> {
        if value < MODULUS {
            Some(FieldElem(value))
        } else {
            None
        }
    }

    pub const fn value(self) -> u32 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn pow(self, mut exp: u64) -> Self {
        let mut base = self;
        let mut acc = FieldElem::ONE;
        while exp > 0 {
            if exp & 1 == 1 {
                acc *= base;
            }
            base *= base;
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by Fermat, `a^(q-2)`.
    pub fn inv(self) -> Result<Self, FieldError> {
        if self.is_zero() {
            return Err(FieldError::ZeroInverse);
        }
        Ok(self.pow(MODULUS as u64 - 2))
    }

    /// The field image of a count, used for the `1/N` factors.
    pub fn from_count(n: usize) -> Self {
        FieldElem::new(n as u64)
    }

    pub fn to_le_bytes(self) -> [u8; 4] {
        self.0.to_le_bytes()
    }
}

impl fmt::Debug for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<u32> for FieldElem {
    type Error = String;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        FieldElem::from_canonical(value)
            .ok_or_else(|| format!("{value} is not a canonical field element"))
    }
}

impl From<FieldElem> for u32 {
    fn from(e: FieldElem) -> u32 {
        e.0
    }
}

impl Add for FieldElem {
    type Output = FieldElem;

    fn add(self, rhs: FieldElem) -> FieldElem {
        let (sum, carry) = self.0.overflowing_add(rhs.0);
        // with a carry the true sum is sum + 2^32 = sum + 5 (mod q), and sum < q - 5
        if carry {
            FieldElem(sum + 5)
        } else if sum >= MODULUS {
            FieldElem(sum - MODULUS)
        } else {
            FieldElem(sum)
        }
    }
}

impl Sub for FieldElem {
    type Output = FieldElem;

    fn sub(self, rhs: FieldElem) -> FieldElem {
        if self.0 >= rhs.0 {
            FieldElem(self.0 - rhs.0)
        } else {
            FieldElem(MODULUS - (rhs.0 - self.0))
        }
    }
}

impl Mul for FieldElem {
    type Output = FieldElem;

    fn mul(self, rhs: FieldElem) -> FieldElem {
        FieldElem(((self.0 as u64 * rhs.0 as u64) % MODULUS as u64) as u32)
    }
}

impl Neg for FieldElem {
    type Output = FieldElem;

    fn neg(self) -> FieldElem {
        if self.0 == 0 {
            self
        } else {
            FieldElem(MODULUS - self.0)
        }
    }
}

impl AddAssign for FieldElem {
    fn add_assign(&mut self, rhs: FieldElem) {
        *self = *self + rhs;
    }
}

impl SubAssign for FieldElem {
    fn sub_assign(&mut self, rhs: FieldElem) {
        *self = *self - rhs;
    }
}

impl MulAssign for FieldElem {
    fn mul_assign(&mut self, rhs: FieldElem) {
        *self = *self * rhs;
    }
}

impl Sum for FieldElem {
    fn sum<I: Iterator<Item = FieldElem>>(iter: I) -> FieldElem {
        iter.fold(FieldElem::ZERO, Add::add)
    }
}

/// A length-`d` vector over `F_q`. Arithmetic is elementwise and requires
/// equal lengths.
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldVec(Vec<FieldElem>);

impl FieldVec {
    pub fn zeros(dim: usize) -> Self {
        FieldVec(vec![FieldElem::ZERO; dim])
    }

    pub fn from_u64s(values: &[u64]) -> Self {
        FieldVec(values.iter().map(|&v| FieldElem::new(v)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|e| e.is_zero())
    }

    pub fn as_slice(&self) -> &[FieldElem] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, FieldElem> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<FieldElem> {
        self.0
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: FieldElem, other: &FieldVec) {
        assert_eq!(self.len(), other.len(), "vector length mismatch");
        for (a, &b) in self.0.iter_mut().zip(other.iter()) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: FieldElem) {
        for a in &mut self.0 {
            *a *= c;
        }
    }

    pub fn scaled(&self, c: FieldElem) -> FieldVec {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    /// Little-endian wire encoding, four bytes per element.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.0.iter().flat_map(|e| e.to_le_bytes()).collect()
    }

    /// Sums a collection of vectors of length `dim`.
    pub fn sum_of<'a, I>(dim: usize, vectors: I) -> FieldVec
    where
        I: IntoIterator<Item = &'a FieldVec>,
    {
        let mut acc = FieldVec::zeros(dim);
        for v in vectors {
            acc += v;
        }
        acc
    }
}

impl fmt::Debug for FieldVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl From<Vec<FieldElem>> for FieldVec {
    fn from(v: Vec<FieldElem>) -> Self {
        FieldVec(v)
    }
}

impl FromIterator<FieldElem> for FieldVec {
    fn from_iter<I: IntoIterator<Item = FieldElem>>(iter: I) -> Self {
        FieldVec(iter.into_iter().collect())
    }
}

impl Index<usize> for FieldVec {
    type Output = FieldElem;

    fn index(&self, i: usize) -> &FieldElem {
        &self.0[i]
    }
}

impl IndexMut<usize> for FieldVec {
    fn index_mut(&mut self, i: usize) -> &mut FieldElem {
        &mut self.0[i]
    }
}

impl AddAssign<&FieldVec> for FieldVec {
    fn add_assign(&mut self, rhs: &FieldVec) {
        assert_eq!(self.len(), rhs.len(), "vector length mismatch");
        for (a, &b) in self.0.iter_mut().zip(rhs.iter()) {
            *a += b;
        }
    }
}

impl SubAssign<&FieldVec> for FieldVec {
    fn sub_assign(&mut self, rhs: &FieldVec) {
        assert_eq!(self.len(), rhs.len(), "vector length mismatch");
        for (a, &b) in self.0.iter_mut().zip(rhs.iter()) {
            *a -= b;
        }
    }
}

impl Add for &FieldVec {
    type Output = FieldVec;

    fn add(self, rhs: &FieldVec) -> FieldVec {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &FieldVec {
    type Output = FieldVec;

    fn sub(self, rhs: &FieldVec) -> FieldVec {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Neg for &FieldVec {
    type Output = FieldVec;

    fn neg(self) -> FieldVec {
        self.iter().map(|&e| -e).collect()
    }
}

/// A 64-bit seed. Sub-seeds for users, stages and trials are obtained with
/// [`Seed::derive`], so every random draw in a run traces back to a named seed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    pub fn derive(self, tag: u64) -> Seed {
        Seed(mix64(self.0 ^ mix64(tag.wrapping_add(GOLDEN_GAMMA))))
    }

    pub fn derive_path(self, tags: &[u64]) -> Seed {
        tags.iter().fold(self, |s, &t| s.derive(t))
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// splitmix64 stream.
#[derive(Clone, Debug)]
pub struct Prg {
    state: u64,
}

impl Prg {
    pub fn new(seed: Seed) -> Self {
        Prg { state: seed.0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Low 32 bits of each draw, redrawn while `>= q`.
    pub fn next_elem(&mut self) -> FieldElem {
        loop {
            let low = self.next_u64() as u32;
            if let Some(e) = FieldElem::from_canonical(low) {
                return e;
            }
        }
    }

    pub fn next_vec(&mut self, dim: usize) -> FieldVec {
        (0..dim).map(|_| self.next_elem()).collect()
    }

    /// Uniform integer in `[0, bound)`.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        let zone = u64::MAX - (u64::MAX % bound) - 1;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return v % bound;
            }
        }
    }

    /// Uniform `f64` in `[0, 1)` with 53 bits of precision.
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// The first `count` elements of the stream seeded by `seed`.
pub fn prg(seed: Seed, count: usize) -> FieldVec {
    Prg::new(seed).next_vec(count)
}
