//! Vertex sample sets and the selection schemes that build them.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::draw_weighted;
use crate::spectral::BandBasis;

/// Relative margin a candidate must beat the incumbent by during greedy
/// selection; anything closer is a tie and the lower vertex index wins.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// Ordered list of distinct vertices. The order is the selection order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleSet(Vec<usize>);

impl SampleSet {
    pub fn new(vertices: Vec<usize>, n: usize) -> Result<Self> {
        let s = SampleSet(vertices);
        s.validate(n)?;
        Ok(s)
    }

    pub fn empty() -> Self {
        SampleSet(Vec::new())
    }

    /// All vertices `0..n` in index order.
    pub fn all(n: usize) -> Self {
        SampleSet((0..n).collect())
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &v in &self.0 {
            if v >= n {
                return Err(Error::VertexOutOfRange { vertex: v, n });
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::DuplicateVertex(v));
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.contains(&v)
    }

    /// The first `m` selected vertices.
    pub fn prefix(&self, m: usize) -> SampleSet {
        SampleSet(self.0[..m.min(self.0.len())].to_vec())
    }

    /// This set with `v` removed, order otherwise preserved.
    pub fn without(&self, v: usize) -> Result<SampleSet> {
        if !self.contains(v) {
            return Err(Error::VertexNotInSample(v));
        }
        Ok(SampleSet(
            self.0.iter().copied().filter(|&u| u != v).collect(),
        ))
    }

    /// This set with `v` appended. `v` must not already be present.
    pub fn with(&self, v: usize) -> Result<SampleSet> {
        if self.contains(v) {
            return Err(Error::DuplicateVertex(v));
        }
        let mut out = self.0.clone();
        out.push(v);
        Ok(SampleSet(out))
    }
}

impl From<SampleSet> for Vec<usize> {
    fn from(s: SampleSet) -> Self {
        s.0
    }
}

/// Sampling scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Minimise `tr(G⁻¹)` of the gram `G = (M_S U_k)(M_S U_k)ᵀ`.
    AOpt,
    /// Maximise `det(G)`.
    DOpt,
    /// Maximise `λ_min(G)`.
    EOpt,
    /// Leverage-weighted draws without replacement.
    WeightedRandom { seed: u64 },
}

impl Criterion {
    pub fn name(&self) -> &'static str {
        match self {
            Criterion::AOpt => "A-opt",
            Criterion::DOpt => "D-opt",
            Criterion::EOpt => "E-opt",
            Criterion::WeightedRandom { .. } => "weighted-random",
        }
    }
}

/// Rows `S_1, S_2, …` of `m`, i.e. `M_S · m` without forming `M_S`.
pub fn restrict_rows(m: &DMatrix<f64>, s: &SampleSet) -> Result<DMatrix<f64>> {
    s.validate(m.nrows())?;
    Ok(DMatrix::from_fn(s.len(), m.ncols(), |i, j| m[(s.0[i], j)]))
}

/// `(M_S U_k)(M_S U_k)ᵀ`, a principal submatrix of the band projector.
pub fn gram(b: &BandBasis, s: &SampleSet) -> Result<DMatrix<f64>> {
    let a = restrict_rows(b.u_k(), s)?;
    Ok(&a * a.transpose())
}

/// Value of an optimality criterion on one sample set.
///
/// All three criteria are evaluated from the singular values `s_i` of
/// `M_S U_k`; the gram eigenvalues are `s_i²` plus `|S| − rank` zeros.
/// `pseudo` is the criterion restricted to the nonzero eigenvalues:
/// the reciprocal sum (A), the log of their product (D) or the smallest of
/// them (E). Comparing `(rank, pseudo)` lexicographically agrees with the
/// plain criterion on full-rank sets and extends it to rank-deficient and
/// oversampled (`|S| > k`) sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionValue {
    pub criterion: Criterion,
    pub size: usize,
    pub rank: usize,
    pub pseudo: f64,
}

impl CriterionValue {
    /// The plain criterion: `Σ 1/λ` over nonzero eigenvalues for A,
    /// `det(G)` for D and `λ_min(G)` for E. D and E are 0 when `G` is singular.
    pub fn value(&self) -> f64 {
        match self.criterion {
            Criterion::AOpt => self.pseudo,
            Criterion::DOpt if self.rank == self.size => self.pseudo.exp(),
            Criterion::EOpt if self.rank == self.size => self.pseudo,
            _ => 0.0,
        }
    }

    /// Strictly better by more than the tie tolerance.
    pub fn is_better_than(&self, other: &CriterionValue) -> bool {
        if self.rank != other.rank {
            return self.rank > other.rank;
        }
        match self.criterion {
            Criterion::AOpt => {
                self.pseudo
                    < other.pseudo - TIE_TOLERANCE * other.pseudo.abs().max(f64::MIN_POSITIVE)
            }
            // log-determinant: an absolute margin is a relative one on det
            Criterion::DOpt => self.pseudo > other.pseudo + TIE_TOLERANCE,
            _ => self.pseudo > other.pseudo + TIE_TOLERANCE * other.pseudo.abs(),
        }
    }
}

pub fn criterion_value(b: &BandBasis, s: &SampleSet, c: Criterion) -> Result<CriterionValue> {
    if matches!(c, Criterion::WeightedRandom { .. }) {
        return Err(Error::NotPointwise(c.name().to_string()));
    }
    if s.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let a = restrict_rows(b.u_k(), s)?;
    let sv = b.tolerance().classify(&a)?;
    let eig: Vec<f64> = sv.nonzero().iter().map(|x| x * x).collect();
    let pseudo = match c {
        Criterion::AOpt => eig.iter().map(|l| 1.0 / l).sum(),
        Criterion::DOpt => eig.iter().map(|l| l.ln()).sum(),
        Criterion::EOpt => eig.last().copied().unwrap_or(0.0),
        Criterion::WeightedRandom { .. } => unreachable!(),
    };
    Ok(CriterionValue {
        criterion: c,
        size: s.len(),
        rank: sv.rank,
        pseudo,
    })
}

/// Greedy nested selection under an optimality criterion.
///
/// Each step appends the unselected vertex whose addition gives the best
/// criterion value; ties go to the lowest vertex index. Candidates within a
/// step are evaluated in parallel and reduced in index order.
pub fn greedy_select(b: &BandBasis, c: Criterion, m: usize) -> Result<SampleSet> {
    let n = b.n();
    if m > n {
        return Err(Error::SampleSizeTooLarge { m, n });
    }
    if matches!(c, Criterion::WeightedRandom { .. }) {
        return Err(Error::NotPointwise(c.name().to_string()));
    }
    let mut selected = SampleSet::empty();
    let mut taken = vec![false; n];
    for _ in 0..m {
        let scored: Vec<(usize, CriterionValue)> = (0..n)
            .into_par_iter()
            .filter(|&v| !taken[v])
            .map(|v| {
                let candidate = selected.with(v)?;
                Ok((v, criterion_value(b, &candidate, c)?))
            })
            .collect::<Result<_>>()?;
        let mut best = scored[0];
        for &(v, value) in &scored[1..] {
            if value.is_better_than(&best.1) {
                best = (v, value);
            }
        }
        taken[best.0] = true;
        selected.0.push(best.0);
    }
    Ok(selected)
}

/// Sequential leverage-weighted draws without replacement.
///
/// Each draw picks an unsampled vertex with probability proportional to its
/// leverage score, renormalised over the remaining vertices; if all remaining
/// scores are zero the draw is uniform.
pub fn weighted_random_select(b: &BandBasis, m: usize, seed: u64) -> Result<SampleSet> {
    let n = b.n();
    if m > n {
        return Err(Error::SampleSizeTooLarge { m, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = b.leverage_scores();
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let i = draw_weighted(&mut rng, &weights);
        out.push(remaining.remove(i));
        weights.remove(i);
    }
    Ok(SampleSet(out))
}

/// Dispatches to [`greedy_select`] or [`weighted_random_select`].
pub fn select(b: &BandBasis, c: Criterion, m: usize) -> Result<SampleSet> {
    match c {
        Criterion::WeightedRandom { seed } => weighted_random_select(b, m, seed),
        _ => greedy_select(b, c, m),
    }
}
