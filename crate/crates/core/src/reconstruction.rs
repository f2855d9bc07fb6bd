//! Linear reconstruction operators `R_S`, mapping observations on `S` to a
//! signal on all vertices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sampling::{restrict_rows, SampleSet};
use crate::spectral::{thin_svd, BandBasis, RankTolerance};

/// Regularisation weight used when a config does not set one.
pub const DEFAULT_GLR_MU: f64 = 1e-2;

/// Relative residual above which a regularised solve is reported as singular.
const SOLVE_RESIDUAL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Minimal-norm least squares in `span(U_k)`.
    LeastSquares { k: usize },
    /// Laplacian-regularised least squares with weight `mu`.
    Regularized { mu: f64 },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::LeastSquares { .. } => "LS",
            Method::Regularized { .. } => "GLR",
        }
    }
}

/// Dense `N × |S|` reconstruction matrix bound to its sample set.
#[derive(Debug, Clone)]
pub struct ReconstructionOperator {
    matrix: DMatrix<f64>,
    method: Method,
    sample_set: SampleSet,
}

impl ReconstructionOperator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn sample_set(&self) -> &SampleSet {
        &self.sample_set
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Signal values observed on a sample set, in sample-set order.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    values: DVector<f64>,
    sample_set: SampleSet,
}

impl Observation {
    pub fn new(values: DVector<f64>, sample_set: SampleSet) -> Result<Self> {
        if values.len() != sample_set.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} observed values for {} sampled vertices",
                values.len(),
                sample_set.len()
            )));
        }
        Ok(Observation { values, sample_set })
    }

    /// `M_S y`.
    pub fn sample(y: &DVector<f64>, s: &SampleSet) -> Result<Self> {
        s.validate(y.len())?;
        let values = DVector::from_iterator(s.len(), s.vertices().iter().map(|&v| y[v]));
        Ok(Observation {
            values,
            sample_set: s.clone(),
        })
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn sample_set(&self) -> &SampleSet {
        &self.sample_set
    }
}

/// Moore–Penrose pseudoinverse through the SVD, zeroing singular values the
/// tolerance classifies as zero.
pub fn pseudo_inverse(a: &DMatrix<f64>, tolerance: RankTolerance) -> Result<DMatrix<f64>> {
    Ok(thin_svd(a)?.pseudo_inverse(tolerance))
}

/// `R_S = U_k (M_S U_k)^†`.
pub fn ls_operator(b: &BandBasis, s: &SampleSet) -> Result<ReconstructionOperator> {
    let a = restrict_rows(b.u_k(), s)?;
    let matrix = b.u_k() * pseudo_inverse(&a, b.tolerance())?;
    Ok(ReconstructionOperator {
        matrix,
        method: Method::LeastSquares { k: b.k() },
        sample_set: s.clone(),
    })
}

/// `R_S = (M_SᵀM_S + μL)⁻¹ M_Sᵀ` for a shift operator `l`.
pub fn glr_operator(l: &DMatrix<f64>, s: &SampleSet, mu: f64) -> Result<ReconstructionOperator> {
    let n = l.nrows();
    if !l.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "shift operator is {}x{}",
            l.nrows(),
            l.ncols()
        )));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "GLR weight mu={mu} must be positive"
        )));
    }
    if s.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    s.validate(n)?;

    let mut system = l * mu;
    let mut rhs = DMatrix::zeros(n, s.len());
    for (col, &v) in s.vertices().iter().enumerate() {
        system[(v, v)] += 1.0;
        rhs[(v, col)] = 1.0;
    }
    let condition = || {
        let sv = thin_svd(&system)
            .map(|d| d.singular_values)
            .unwrap_or_default();
        match (sv.first(), sv.last()) {
            (Some(&max), Some(&min)) if min > 0.0 => max / min,
            _ => f64::INFINITY,
        }
    };
    let matrix = match system.clone().lu().solve(&rhs) {
        Some(x) => x,
        None => {
            return Err(Error::SingularSystem {
                condition: condition(),
            })
        }
    };
    let residual = (&system * &matrix - &rhs).amax();
    if !residual.is_finite() || residual > SOLVE_RESIDUAL_TOLERANCE {
        return Err(Error::SingularSystem {
            condition: condition(),
        });
    }
    Ok(ReconstructionOperator {
        matrix,
        method: Method::Regularized { mu },
        sample_set: s.clone(),
    })
}

/// `x̂ = R_S · (M_S y)`.
pub fn reconstruct(r: &ReconstructionOperator, obs: &Observation) -> Result<DVector<f64>> {
    if obs.sample_set() != r.sample_set() {
        return Err(Error::DimensionMismatch(
            "observation and operator use different sample sets".into(),
        ));
    }
    Ok(r.matrix() * obs.values())
}
