//! Cosine affinities, spectral embedding, and eigengap speaker counting.

use crate::error::{Error, Result};
use crate::ingest::EmbeddingStream;
use crate::numeric::{symmetric_eig, Mat};
use crate::scalar::Real;

/// Symmetric pairwise segment affinities in [0, 1] with unit diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityMatrix<F> {
    n: usize,
    values: Mat<F>,
}

impl<F: Real> AffinityMatrix<F> {
    pub fn new(values: Mat<F>) -> Result<Self> {
        let n = values.rows();
        if values.cols() != n {
            return Err(Error::Shape("affinity matrix must be square".into()));
        }
        let tol = F::of(1e-9);
        for r in 0..n {
            if (values.get(r, r) - F::one()).abs() > tol {
                return Err(Error::Invalid(format!("affinity diagonal not 1 at {r}")));
            }
            for c in 0..n {
                let v = values.get(r, c);
                if v < -tol || v > F::one() + tol {
                    return Err(Error::Invalid(format!(
                        "affinity {v} out of [0,1] at ({r},{c})"
                    )));
                }
                if (v - values.get(c, r)).abs() > tol {
                    return Err(Error::Invalid(format!("affinity not symmetric at ({r},{c})")));
                }
            }
        }
        Ok(AffinityMatrix { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &Mat<F> {
        &self.values
    }
}

/// Shifted cosine affinity between all segment pairs:
/// `a_ij = (1 + cos(x_i, x_j)) / 2`.
pub fn cosine_affinity<F: Real>(stream: &EmbeddingStream<F>) -> Result<AffinityMatrix<F>> {
    let n = stream.len();
    let mut norms = Vec::with_capacity(n);
    for (i, seg) in stream.segments.iter().enumerate() {
        let norm = seg.vector.iter().map(|&v| v * v).sum::<F>().sqrt();
        if norm == F::zero() {
            return Err(Error::Numeric(format!(
                "zero-norm embedding at segment {i}"
            )));
        }
        norms.push(norm);
    }
    let half = F::of(0.5);
    let mut values = Mat::zeros(n, n);
    for i in 0..n {
        values.set(i, i, F::one());
        for j in (i + 1)..n {
            let d = crate::numeric::mat::dot(&stream.segments[i].vector, &stream.segments[j].vector);
            let cos = (d / (norms[i] * norms[j])).clamp(-F::one(), F::one());
            let a = half * (F::one() + cos);
            values.set(i, j, a);
            values.set(j, i, a);
        }
    }
    AffinityMatrix::new(values)
}

/// Symmetric normalized Laplacian `L = I - D^{-1/2} A D^{-1/2}`.
fn normalized_laplacian<F: Real>(a: &AffinityMatrix<F>) -> Result<Mat<F>> {
    let n = a.n;
    let mut inv_sqrt_deg = Vec::with_capacity(n);
    for r in 0..n {
        let deg: F = a.values.row(r).iter().copied().sum();
        if deg <= F::zero() {
            return Err(Error::Numeric(format!("isolated segment {r}: zero degree")));
        }
        inv_sqrt_deg.push(F::one() / deg.sqrt());
    }
    Ok(Mat::from_fn(n, n, |r, c| {
        let normalized = a.values.get(r, c) * inv_sqrt_deg[r] * inv_sqrt_deg[c];
        if r == c {
            F::one() - normalized
        } else {
            -normalized
        }
    }))
}

/// Ascending eigenvalues of the normalized Laplacian; also the CLI's
/// eigengap-inspection dump.
pub fn laplacian_eigenvalues<F: Real>(a: &AffinityMatrix<F>) -> Result<Vec<F>> {
    let lap = normalized_laplacian(a)?;
    Ok(symmetric_eig(&lap)?.0)
}

/// Project segments onto the `k` lowest-eigenvalue eigenvectors of the
/// normalized Laplacian, then scale each row to unit norm (zero rows stay
/// zero). Rows of the result are the spectral embeddings.
pub fn spectral_embed<F: Real>(a: &AffinityMatrix<F>, k: usize) -> Result<Mat<F>> {
    let n = a.n;
    if k == 0 || k > n {
        return Err(Error::Config(format!(
            "target dimension {k} out of range 1..={n}"
        )));
    }
    let lap = normalized_laplacian(a)?;
    let (_, vectors) = symmetric_eig(&lap)?;
    let mut out = Mat::from_fn(n, k, |r, c| vectors.get(r, c));
    for r in 0..n {
        let row = out.row_mut(r);
        let norm = row.iter().map(|&v| v * v).sum::<F>().sqrt();
        if norm > F::zero() {
            for v in row {
                *v = *v / norm;
            }
        }
    }
    Ok(out)
}

/// Eigengap estimate of the speaker count: the k in [2, max_speakers]
/// maximizing the gap between consecutive ascending Laplacian eigenvalues,
/// ties toward smaller k.
pub fn estimate_num_speakers<F: Real>(a: &AffinityMatrix<F>, max_speakers: usize) -> Result<usize> {
    if max_speakers < 2 {
        return Err(Error::Config(format!(
            "max_speakers must be at least 2, got {max_speakers}"
        )));
    }
    let n = a.n;
    if n <= 2 {
        return Ok(n.min(2));
    }
    let values = laplacian_eigenvalues(a)?;
    let hi = max_speakers.min(n - 1);
    let mut best_k = 2;
    let mut best_gap = F::neg_infinity();
    // Gaps within eigensolver noise of each other count as ties, which go
    // to the smaller k.
    let tie_tol = F::of(1e-9);
    for k in 2..=hi {
        let gap = values[k] - values[k - 1];
        if gap > best_gap + tie_tol {
            best_gap = gap;
            best_k = k;
        }
    }
    Ok(best_k)
}
