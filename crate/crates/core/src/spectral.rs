//! Eigendecomposition of the shift operator and the bandlimited basis `U_k`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::{shift_operator, Graph, ShiftOperatorKind};

pub mod cache;

/// Maximum entrywise asymmetry accepted by [`eigendecompose`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Band edges with `λ_{k+1} − λ_k` at or below this are flagged degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-10;

/// Threshold below which an eigenvector entry does not fix the sign convention.
const SIGN_TOLERANCE: f64 = 1e-8;

pub const DEFAULT_RANK_FACTOR: f64 = 1e3;

/// Rule deciding when a singular value counts as zero.
///
/// A singular value `s` of an `r × c` matrix is zero iff
/// `s <= factor · max(dimension, r, c) · ε · s_max`. The same rule drives
/// ranks, pseudoinverses and criterion values so that they always agree.
///
/// `dimension` lets row subsets of an `N × k` basis share the cutoff of the
/// full basis; a band basis sets it to `N`.
///
/// The default factor is `1e3`. A kept singular value `s` amplifies
/// rounding noise of size `≈ N·ε` into the reconstruction by `(N·ε / s)²`,
/// so anything closer than three orders of magnitude to the noise floor
/// would make integer-valued errors come out fractional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTolerance {
    pub factor: f64,
    pub dimension: usize,
}

impl Default for RankTolerance {
    fn default() -> Self {
        RankTolerance {
            factor: DEFAULT_RANK_FACTOR,
            dimension: 0,
        }
    }
}

impl RankTolerance {
    pub fn with_dimension(self, dimension: usize) -> Self {
        RankTolerance { dimension, ..self }
    }

    pub fn cutoff(&self, rows: usize, cols: usize, s_max: f64) -> f64 {
        let size = self.dimension.max(rows).max(cols);
        self.factor * size as f64 * f64::EPSILON * s_max
    }

    /// Singular values of `a` in descending order, split at the cutoff.
    pub fn classify(&self, a: &DMatrix<f64>) -> Result<SingularValues> {
        let values = thin_svd(a)?.singular_values;
        Ok(self.split(a.nrows(), a.ncols(), values))
    }

    fn split(&self, rows: usize, cols: usize, values: Vec<f64>) -> SingularValues {
        let s_max = values.first().copied().unwrap_or(0.0);
        let cutoff = self.cutoff(rows, cols, s_max);
        let rank = values
            .iter()
            .take_while(|&&s| s > cutoff && s > 0.0)
            .count();
        SingularValues { values, rank }
    }

    pub fn rank(&self, a: &DMatrix<f64>) -> Result<usize> {
        Ok(self.classify(a)?.rank)
    }
}

/// Descending singular values with the numerical rank they imply.
#[derive(Debug, Clone)]
pub struct SingularValues {
    pub values: Vec<f64>,
    pub rank: usize,
}

impl SingularValues {
    pub fn nonzero(&self) -> &[f64] {
        &self.values[..self.rank]
    }
}

/// Thin SVD `a = U diag(s) Vᵀ` with `s` in descending order.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl ThinSvd {
    /// `V diag(1/s) Uᵀ` over the singular values the tolerance keeps.
    pub fn pseudo_inverse(&self, tolerance: RankTolerance) -> DMatrix<f64> {
        let (rows, cols) = (self.u.nrows(), self.v.nrows());
        let rank = tolerance
            .split(rows, cols, self.singular_values.clone())
            .rank;
        let mut out = DMatrix::zeros(cols, rows);
        for i in 0..rank {
            out += (self.v.column(i) * self.u.column(i).transpose()) / self.singular_values[i];
        }
        out
    }
}

pub fn thin_svd(a: &DMatrix<f64>) -> Result<ThinSvd> {
    let (rows, cols) = a.shape();
    let p = rows.min(cols);
    if p == 0 {
        return Ok(ThinSvd {
            u: DMatrix::zeros(rows, 0),
            singular_values: Vec::new(),
            v: DMatrix::zeros(cols, 0),
        });
    }
    let m = faer::Mat::<f64>::from_fn(rows, cols, |i, j| a[(i, j)]);
    let svd = m
        .thin_svd()
        .map_err(|_| Error::Tolerance("singular value decomposition did not converge".into()))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| s[y].total_cmp(&s[x]));
    Ok(ThinSvd {
        u: DMatrix::from_fn(rows, p, |i, j| u[(i, order[j])]),
        singular_values: order.iter().map(|&j| s[j]).collect(),
        v: DMatrix::from_fn(cols, p, |i, j| v[(i, order[j])]),
    })
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a shift operator.
///
/// A basis loaded from the on-disk cache may carry fewer eigenvector columns
/// than vertices; it can then only produce bands up to that width.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    kind: ShiftOperatorKind,
}

impl SpectralBasis {
    /// Shift operator of `g` followed by [`eigendecompose`].
    pub fn of_graph(g: &Graph, kind: ShiftOperatorKind) -> Result<Self> {
        eigendecompose(&shift_operator(g, kind), kind)
    }

    pub(crate) fn from_parts(
        eigenvalues: DVector<f64>,
        eigenvectors: DMatrix<f64>,
        kind: ShiftOperatorKind,
    ) -> Self {
        SpectralBasis {
            eigenvalues,
            eigenvectors,
            kind,
        }
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn kind(&self) -> ShiftOperatorKind {
        self.kind
    }

    /// First `k` eigenvectors, i.e. the `k` lowest graph frequencies.
    pub fn band(&self, k: usize) -> Result<BandBasis> {
        let n = self.n();
        if k == 0 || k > self.eigenvectors.ncols() {
            return Err(Error::BandwidthOutOfRange { k, n });
        }
        let spectral_gap = if k == n {
            0.0
        } else {
            self.eigenvalues[k] - self.eigenvalues[k - 1]
        };
        Ok(BandBasis {
            k,
            u_k: self.eigenvectors.columns(0, k).into_owned(),
            spectral_gap,
            degenerate: k < n && spectral_gap <= DEGENERACY_TOLERANCE,
            tolerance: RankTolerance::default().with_dimension(n),
        })
    }
}

/// Dense symmetric eigendecomposition with ascending eigenvalues.
///
/// Each eigenvector is flipped so that its first entry of magnitude above
/// `1e-8` is positive.
pub fn eigendecompose(l: &DMatrix<f64>, kind: ShiftOperatorKind) -> Result<SpectralBasis> {
    if !l.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "shift operator is {}x{}",
            l.nrows(),
            l.ncols()
        )));
    }
    let asym = (l - l.transpose()).amax();
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric(asym));
    }
    let n = l.nrows();
    let eig = SymmetricEigen::new(l.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        if let Some(first) = col.iter().find(|x| x.abs() > SIGN_TOLERANCE) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        eigenvectors.set_column(dst, &col);
    }
    Ok(SpectralBasis {
        eigenvalues,
        eigenvectors,
        kind,
    })
}

/// The bandlimited basis `U_k` together with the gap above it.
#[derive(Debug, Clone)]
pub struct BandBasis {
    k: usize,
    u_k: DMatrix<f64>,
    spectral_gap: f64,
    degenerate: bool,
    tolerance: RankTolerance,
}

impl BandBasis {
    /// Wraps an arbitrary `N × k` matrix with orthonormal columns.
    ///
    /// Used for bases that do not come from a graph, e.g. in tests.
    pub fn from_orthonormal(u_k: DMatrix<f64>) -> Result<Self> {
        let k = u_k.ncols();
        let n = u_k.nrows();
        if k == 0 || k > n {
            return Err(Error::BandwidthOutOfRange { k, n });
        }
        let dev = (u_k.transpose() * &u_k - DMatrix::identity(k, k)).amax();
        if dev > 1e-8 {
            return Err(Error::Tolerance(format!(
                "columns are not orthonormal (max deviation {dev:e})"
            )));
        }
        Ok(BandBasis {
            k,
            u_k,
            spectral_gap: 0.0,
            degenerate: false,
            tolerance: RankTolerance::default().with_dimension(n),
        })
    }

    /// Replaces the tolerance, keeping the size term at least `N`.
    pub fn with_tolerance(mut self, tolerance: RankTolerance) -> Self {
        let n = self.n();
        self.tolerance = tolerance.with_dimension(tolerance.dimension.max(n));
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.u_k.nrows()
    }

    pub fn u_k(&self) -> &DMatrix<f64> {
        &self.u_k
    }

    /// `λ_{k+1} − λ_k`, reported as 0 when `k = N`.
    pub fn spectral_gap(&self) -> f64 {
        self.spectral_gap
    }

    /// True when the band edge sits inside a repeated eigenvalue, so `U_k`
    /// is not unique (its projector still is when the gap is positive).
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn tolerance(&self) -> RankTolerance {
        self.tolerance
    }

    /// `U_k U_kᵀ`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.u_k * self.u_k.transpose()
    }

    /// Squared row norms of `U_k`; they sum to `k`.
    pub fn leverage_scores(&self) -> Vec<f64> {
        self.u_k.row_iter().map(|row| row.norm_squared()).collect()
    }
}
