//! Matrix-set data model: dense square matrices, switching words, matrix
//! products, spectral radii, and the built-in benchmark generators.

mod eig;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dense real square matrix, row-major storage.
#[derive(Debug, Clone)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Build from rows. Fails unless the rows form a square matrix with
    /// finite entries.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Domain("matrix must have dimension >= 1".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::Shape {
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(n, data)
    }

    /// Build from a row-major slice of length `n*n`.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("matrix must have dimension >= 1".into()));
        }
        if data.len() != n * n {
            return Err(Error::Shape {
                expected: n * n,
                got: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("matrix entries must be finite".into()));
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix must have dimension >= 1");
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn diag(entries: &[f64]) -> Result<Self> {
        let n = entries.len();
        let mut m = Self::zeros(n);
        for (i, &v) in entries.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        if !m.data.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("matrix entries must be finite".into()));
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    /// Row-major view of the entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.n != other.n {
            return Err(Error::Shape {
                expected: self.n,
                got: other.n,
            });
        }
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::Shape {
                expected: self.n,
                got: x.len(),
            });
        }
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.data[i * n + j] * x[j];
            }
            y[i] = acc;
        }
        Ok(y)
    }

    pub fn transpose(&self) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j];
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            n: self.n,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest eigenvalue modulus, computed in closed form for n <= 2 and
    /// via Hessenberg reduction plus shifted QR iteration otherwise.
    pub fn spectral_radius(&self) -> Result<f64> {
        if !self.data.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("matrix entries must be finite".into()));
        }
        match self.n {
            1 => Ok(self.data[0].abs()),
            2 => Ok(spectral_radius_2x2(
                self.data[0],
                self.data[1],
                self.data[2],
                self.data[3],
            )),
            _ => {
                let eigs = eig::eigenvalues(self)?;
                Ok(eigs
                    .iter()
                    .map(|&(re, im)| re.hypot(im))
                    .fold(0.0, f64::max))
            }
        }
    }

    /// Largest singular value: sqrt of the top eigenvalue of `A^T A`.
    pub fn two_norm(&self) -> Result<f64> {
        let gram = self.transpose().mul(self)?;
        let lam_max = match self.n {
            1 => gram.data[0],
            2 => {
                // Symmetric 2x2: largest root of the characteristic polynomial.
                let (a, b, d) = (gram.data[0], gram.data[1], gram.data[3]);
                let mid = 0.5 * (a + d);
                let off = (0.25 * (a - d) * (a - d) + b * b).sqrt();
                mid + off
            }
            _ => eig::eigenvalues(&gram)?
                .iter()
                .map(|&(re, _)| re)
                .fold(f64::NEG_INFINITY, f64::max),
        };
        Ok(lam_max.max(0.0).sqrt())
    }
}

/// Closed-form spectral radius of `[[a, b], [c, d]]`.
///
/// Real eigenvalues when the discriminant is nonnegative; otherwise the
/// complex pair has squared modulus equal to the determinant.
fn spectral_radius_2x2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let half_trace = 0.5 * (a + d);
    let det = a * d - b * c;
    let disc = half_trace * half_trace - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (half_trace + s).abs().max((half_trace - s).abs())
    } else {
        det.sqrt()
    }
}

/// Finite ordered set of same-dimension square matrices defining a
/// switched linear system.
#[derive(Debug, Clone)]
pub struct MatrixSet {
    matrices: Vec<Matrix>,
    n: usize,
}

impl MatrixSet {
    pub fn new(matrices: Vec<Matrix>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::Domain("matrix set must be nonempty".into()))?;
        let n = first.dim();
        for m in &matrices {
            if m.dim() != n {
                return Err(Error::Shape {
                    expected: n,
                    got: m.dim(),
                });
            }
        }
        Ok(Self { matrices, n })
    }

    /// Shared dimension of all members.
    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of modes `M`.
    #[inline]
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        false // nonempty by construction
    }

    pub fn matrices(&self) -> &[Matrix] {
        &self.matrices
    }

    /// Member by 1-based mode index.
    pub fn matrix(&self, index: usize) -> Result<&Matrix> {
        if index == 0 || index > self.matrices.len() {
            return Err(Error::InvalidWord {
                index,
                modes: self.matrices.len(),
            });
        }
        Ok(&self.matrices[index - 1])
    }

    /// Product `A_{w(1)} * A_{w(2)} * ... * A_{w(k)}` taken left to right.
    pub fn product_of_word(&self, word: &SwitchingWord) -> Result<Matrix> {
        let mut product: Option<Matrix> = None;
        for &idx in word.indices() {
            let a = self.matrix(idx)?;
            product = Some(match product {
                None => a.clone(),
                Some(p) => p.mul(a)?,
            });
        }
        Ok(product.expect("switching words are nonempty"))
    }

    /// Every member scaled by `c`.
    pub fn scale(&self, c: f64) -> MatrixSet {
        MatrixSet {
            matrices: self.matrices.iter().map(|m| m.scale(c)).collect(),
            n: self.n,
        }
    }
}

/// Finite switching sequence; indices are 1-based mode numbers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchingWord {
    indices: Vec<usize>,
}

impl SwitchingWord {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Domain("switching word must have length >= 1".into()));
        }
        if indices.contains(&0) {
            return Err(Error::InvalidWord { index: 0, modes: 0 });
        }
        Ok(Self { indices })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false // nonempty by construction
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

// Wire form for matrix-set JSON: {"n": int, "matrices": [[[row-major reals]]]}.
#[derive(Serialize, Deserialize)]
struct MatrixSetWire {
    n: usize,
    matrices: Vec<Vec<Vec<f64>>>,
}

impl Serialize for MatrixSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixSetWire {
            n: self.n,
            matrices: self.matrices.iter().map(Matrix::rows).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MatrixSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = MatrixSetWire::deserialize(deserializer)?;
        let matrices = wire
            .matrices
            .iter()
            .map(|rows| Matrix::from_rows(rows))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        let set = MatrixSet::new(matrices).map_err(serde::de::Error::custom)?;
        if set.dim() != wire.n {
            return Err(serde::de::Error::custom(format!(
                "declared dimension {} does not match matrices of dimension {}",
                wire.n,
                set.dim()
            )));
        }
        Ok(set)
    }
}

/// Two-mode planar benchmark set. Entries are the published four-decimal
/// literals, stored verbatim.
pub fn benchmark_sigma2() -> MatrixSet {
    let a1 = Matrix::from_rows(&[vec![1.5519, 0.4474], vec![7.6412, 7.4716]]).unwrap();
    let a2 = Matrix::from_rows(&[vec![0.4750, 9.1755], vec![1.8955, 0.1850]]).unwrap();
    MatrixSet::new(vec![a1, a2]).unwrap()
}

/// Eight-dimensional, eight-mode benchmark set with entries in {-1, 0, 1}.
pub fn benchmark_sigma8() -> MatrixSet {
    benchmark_column_modes(8).unwrap()
}

/// Family generalizing the eight-dimensional benchmark to any dimension:
/// mode 1 is the all-ones first column (`1 e_1^T`); mode `i >= 2` has its
/// only nonzero entries in column `i`, equal to 1 off the diagonal and -1
/// on it.
pub fn benchmark_column_modes(n: usize) -> Result<MatrixSet> {
    if n == 0 {
        return Err(Error::Domain("dimension must be >= 1".into()));
    }
    let mut matrices = Vec::with_capacity(n);
    let mut a1 = Matrix::zeros(n);
    for k in 0..n {
        a1.set(k, 0, 1.0);
    }
    matrices.push(a1);
    for i in 1..n {
        let mut a = Matrix::zeros(n);
        for k in 0..n {
            a.set(k, i, if k == i { -1.0 } else { 1.0 });
        }
        matrices.push(a);
    }
    MatrixSet::new(matrices)
}
