//! Additive masking shares and Shamir threshold sharing of field vectors.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ff::{FieldElem, FieldVec, Prg, Seed};
use crate::lagrange::LagrangeBasis;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SharingError {
    #[error("threshold {t} is invalid for {n} shares")]
    BadThreshold { t: usize, n: usize },
    #[error("need {need} shares to reconstruct, have {have}")]
    InsufficientShares { have: usize, need: usize },
    #[error("share indices must be distinct and nonzero, one per share")]
    BadIndices,
}

/// A user mask `u` together with zero-sum per-recipient randomness `r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskSet {
    pub u: FieldVec,
    pub r: Vec<FieldVec>,
}

impl MaskSet {
    /// Draws `r_1..r_{n-1}` from the stream and closes with
    /// `r_n = -(r_1 + ... + r_{n-1})`.
    pub fn draw(u: FieldVec, n: usize, rng: Seed) -> Self {
        assert!(n >= 1, "at least one recipient");
        let dim = u.len();
        let mut prg = Prg::new(rng);
        let mut r: Vec<FieldVec> = (0..n - 1).map(|_| prg.next_vec(dim)).collect();
        let closing = -&FieldVec::sum_of(dim, &r);
        r.push(closing);
        MaskSet { u, r }
    }

    pub fn is_balanced(&self) -> bool {
        FieldVec::sum_of(self.u.len(), &self.r).is_zero()
    }
}

/// `x + u + r_j` for each of the `n` recipients; the outputs sum to `n (x + u)`.
pub fn make_additive_shares(x: &FieldVec, u: &FieldVec, n: usize, rng: Seed) -> Vec<FieldVec> {
    let masks = MaskSet::draw(u.clone(), n, rng);
    let base = x + u;
    masks.r.iter().map(|r| &base + r).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShamirShare {
    pub index: FieldElem,
    pub value: FieldVec,
}

/// Indices `1..=n`.
pub fn default_indices(n: usize) -> Vec<FieldElem> {
    (1..=n).map(FieldElem::from_count).collect()
}

fn check_indices(indices: &[FieldElem]) -> Result<(), SharingError> {
    let mut seen = HashSet::new();
    if indices.iter().any(|&i| i.is_zero() || !seen.insert(i)) {
        return Err(SharingError::BadIndices);
    }
    Ok(())
}

/// Shares `secret` with a random polynomial of degree `t - 1`, one
/// evaluation per index.
pub fn shamir_share(
    secret: &FieldVec,
    t: usize,
    n: usize,
    indices: &[FieldElem],
    rng: Seed,
) -> Result<Vec<ShamirShare>, SharingError> {
    if t < 1 || t > n {
        return Err(SharingError::BadThreshold { t, n });
    }
    if indices.len() != n {
        return Err(SharingError::BadIndices);
    }
    check_indices(indices)?;

    let mut prg = Prg::new(rng);
    let mut coeffs = Vec::with_capacity(t);
    coeffs.push(secret.clone());
    coeffs.extend((1..t).map(|_| prg.next_vec(secret.len())));

    Ok(indices
        .iter()
        .map(|&index| {
            let mut value = FieldVec::zeros(secret.len());
            for c in coeffs.iter().rev() {
                value.scale(index);
                value += c;
            }
            ShamirShare { index, value }
        })
        .collect())
}

/// Interpolates the shares at zero. Shares are not authenticated: inconsistent
/// inputs still produce an interpolation.
pub fn shamir_reconstruct(shares: &[ShamirShare], t: usize) -> Result<FieldVec, SharingError> {
    if shares.len() < t || shares.is_empty() {
        return Err(SharingError::InsufficientShares {
            have: shares.len(),
            need: t.max(1),
        });
    }
    let indices: Vec<FieldElem> = shares.iter().map(|s| s.index).collect();
    check_indices(&indices)?;
    let basis = LagrangeBasis::new(&indices).map_err(|_| SharingError::BadIndices)?;
    Ok(basis.evaluate(
        shares.iter().map(|s| &s.value),
        FieldElem::ZERO,
        shares[0].value.len(),
    ))
}
