//! Lagrange interpolation over `F_q^d`, coded redundancy for masked shares,
//! and erasure recovery of missing evaluations.
//!
//! All routines work coordinate-wise: the basis coefficients are computed once
//! per (point set, target) and then applied to every coordinate of the vectors.

use std::collections::HashSet;

use thiserror::Error;

use crate::ff::{FieldElem, FieldVec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LagrangeError {
    #[error("evaluation point {0} appears more than once")]
    DuplicatePoints(FieldElem),
    #[error("need {need} evaluations to recover, have {have}")]
    InsufficientEvaluations { have: usize, need: usize },
    #[error("expected {expected} shares, got {got}")]
    ShareCountMismatch { expected: usize, got: usize },
    #[error("no evaluations given")]
    Empty,
}

/// Evaluation points for one receiving group: `alphas` carry the plain values,
/// each block of `betas` carries one coded copy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalPoints {
    alphas: Vec<FieldElem>,
    betas: Vec<Vec<FieldElem>>,
}

impl EvalPoints {
    pub fn new(alphas: Vec<FieldElem>, betas: Vec<Vec<FieldElem>>) -> Result<Self, LagrangeError> {
        let mut seen = HashSet::new();
        for &p in alphas.iter().chain(betas.iter().flatten()) {
            if !seen.insert(p) {
                return Err(LagrangeError::DuplicatePoints(p));
            }
        }
        Ok(EvalPoints { alphas, betas })
    }

    /// The protocol-wide convention for a group of `size` members with `copies`
    /// coded blocks: `alpha_i = i` and `beta_{m,j} = size * (m + 1) + j`, all
    /// 1-indexed. Every group of the same size uses the same points.
    pub fn for_group(size: usize, copies: usize) -> Self {
        let alphas = (1..=size).map(FieldElem::from_count).collect();
        let betas = (0..copies)
            .map(|m| {
                (1..=size)
                    .map(|j| FieldElem::from_count(size * (m + 1) + j))
                    .collect()
            })
            .collect();
        EvalPoints { alphas, betas }
    }

    pub fn group_size(&self) -> usize {
        self.alphas.len()
    }

    pub fn copies(&self) -> usize {
        self.betas.len()
    }

    pub fn alphas(&self) -> &[FieldElem] {
        &self.alphas
    }

    pub fn alpha(&self, member: usize) -> FieldElem {
        self.alphas[member]
    }

    pub fn beta(&self, copy: usize, member: usize) -> FieldElem {
        self.betas[copy][member]
    }

    /// Coded-copy points in copy-major order.
    pub fn betas(&self) -> impl Iterator<Item = FieldElem> + '_ {
        self.betas.iter().flatten().copied()
    }
}

/// Known evaluations `(point, value)` of a vector-valued polynomial.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EvalSet {
    entries: Vec<(FieldElem, FieldVec)>,
}

impl EvalSet {
    pub fn new() -> Self {
        EvalSet::default()
    }

    pub fn push(&mut self, point: FieldElem, value: FieldVec) {
        self.entries.push((point, value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn points(&self) -> Vec<FieldElem> {
        self.entries.iter().map(|(p, _)| *p).collect()
    }

    pub fn entries(&self) -> &[(FieldElem, FieldVec)] {
        &self.entries
    }

    fn dim(&self) -> usize {
        self.entries.first().map_or(0, |(_, v)| v.len())
    }

    fn value_at(&self, point: FieldElem) -> Option<&FieldVec> {
        self.entries.iter().find(|(p, _)| *p == point).map(|(_, v)| v)
    }
}

impl FromIterator<(FieldElem, FieldVec)> for EvalSet {
    fn from_iter<I: IntoIterator<Item = (FieldElem, FieldVec)>>(iter: I) -> Self {
        EvalSet {
            entries: iter.into_iter().collect(),
        }
    }
}

/// Lagrange basis over a fixed set of distinct nodes.
#[derive(Clone, Debug)]
pub struct LagrangeBasis {
    nodes: Vec<FieldElem>,
    // 1 / prod_{m != j} (x_j - x_m)
    inv_denominators: Vec<FieldElem>,
}

impl LagrangeBasis {
    pub fn new(nodes: &[FieldElem]) -> Result<Self, LagrangeError> {
        if nodes.is_empty() {
            return Err(LagrangeError::Empty);
        }
        let mut seen = HashSet::new();
        for &x in nodes {
            if !seen.insert(x) {
                return Err(LagrangeError::DuplicatePoints(x));
            }
        }
        let inv_denominators = nodes
            .iter()
            .enumerate()
            .map(|(j, &xj)| {
                let den = nodes
                    .iter()
                    .enumerate()
                    .filter(|&(m, _)| m != j)
                    .fold(FieldElem::ONE, |acc, (_, &xm)| acc * (xj - xm));
                den.inv().expect("distinct nodes give a nonzero denominator")
            })
            .collect();
        Ok(LagrangeBasis {
            nodes: nodes.to_vec(),
            inv_denominators,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `[l_0(target), ..., l_{m-1}(target)]`.
    pub fn coefficients_at(&self, target: FieldElem) -> Vec<FieldElem> {
        if let Some(hit) = self.nodes.iter().position(|&x| x == target) {
            let mut c = vec![FieldElem::ZERO; self.nodes.len()];
            c[hit] = FieldElem::ONE;
            return c;
        }
        (0..self.nodes.len())
            .map(|j| {
                let num = self
                    .nodes
                    .iter()
                    .enumerate()
                    .filter(|&(m, _)| m != j)
                    .fold(FieldElem::ONE, |acc, (_, &xm)| acc * (target - xm));
                num * self.inv_denominators[j]
            })
            .collect()
    }

    /// Combines `values` (aligned with the nodes) with the coefficients for `target`.
    pub fn evaluate<'a, I>(&self, values: I, target: FieldElem, dim: usize) -> FieldVec
    where
        I: IntoIterator<Item = &'a FieldVec>,
    {
        let coeffs = self.coefficients_at(target);
        let mut out = FieldVec::zeros(dim);
        for (c, v) in coeffs.into_iter().zip(values) {
            if !c.is_zero() {
                out.add_scaled(c, v);
            }
        }
        out
    }
}

/// Value at `target` of the lowest-degree polynomial through `known`.
pub fn interpolate_eval(known: &EvalSet, target: FieldElem) -> Result<FieldVec, LagrangeError> {
    let basis = LagrangeBasis::new(&known.points())?;
    Ok(basis.evaluate(known.entries.iter().map(|(_, v)| v), target, known.dim()))
}

/// Interpolates `f` with `f(alpha_j) = shares[j]` and returns `f` at every
/// beta, copy-major (`k * N` vectors).
pub fn encode_shares(shares: &[FieldVec], pts: &EvalPoints) -> Result<Vec<FieldVec>, LagrangeError> {
    if shares.len() != pts.group_size() {
        return Err(LagrangeError::ShareCountMismatch {
            expected: pts.group_size(),
            got: shares.len(),
        });
    }
    let basis = LagrangeBasis::new(pts.alphas())?;
    let dim = shares.first().map_or(0, FieldVec::len);
    Ok(pts
        .betas()
        .map(|beta| basis.evaluate(shares, beta, dim))
        .collect())
}

/// Recovers the values at `targets` of a polynomial of degree below
/// `degree_bound` from its known evaluations.
///
/// Every known evaluation is used, so with more than `degree_bound` consistent
/// points the result is unchanged; with fewer the call fails, which is the
/// protocol's abort condition.
pub fn recover_missing(
    known: &EvalSet,
    degree_bound: usize,
    targets: &[FieldElem],
) -> Result<Vec<FieldVec>, LagrangeError> {
    if known.len() < degree_bound || known.is_empty() {
        return Err(LagrangeError::InsufficientEvaluations {
            have: known.len(),
            need: degree_bound.max(1),
        });
    }
    let basis = LagrangeBasis::new(&known.points())?;
    let dim = known.dim();
    Ok(targets
        .iter()
        .map(|&t| match known.value_at(t) {
            Some(v) => v.clone(),
            None => basis.evaluate(known.entries.iter().map(|(_, v)| v), t, dim),
        })
        .collect())
}
