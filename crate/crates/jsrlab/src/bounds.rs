//! Classical JSR bounds: lower bounds from finite product enumeration and
//! certified upper bounds from ellipsoidal norms, plus the closed-form
//! theory calculators in [`theory`].

pub mod theory;

use crate::error::{Error, Result};
use crate::matset::{Matrix, MatrixSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::Serialize;
use std::collections::BTreeMap;
use std::time::Instant;

/// Default ceiling on `M^max_length` for product enumeration.
pub const DEFAULT_PRODUCT_CAP: u128 = 10_000_000;

/// How a bound value may be interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// Provably <= the joint spectral radius.
    Lower,
    /// Provably >= the joint spectral radius.
    CertifiedUpper,
    /// No guarantee either way.
    Empirical,
}

impl std::fmt::Display for BoundKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundKind::Lower => write!(f, "lower"),
            BoundKind::CertifiedUpper => write!(f, "certified-upper"),
            BoundKind::Empirical => write!(f, "empirical"),
        }
    }
}

/// A bound estimate with its interpretation, provenance label, and timing.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub value: f64,
    pub kind: BoundKind,
    pub method: String,
    /// Seconds spent producing the value.
    pub wall_time: f64,
    pub meta: BTreeMap<String, String>,
}

impl BoundReport {
    pub(crate) fn new(value: f64, kind: BoundKind, method: &str, wall_time: f64) -> Self {
        debug_assert!(value >= 0.0);
        Self {
            value,
            kind,
            method: method.to_string(),
            wall_time,
            meta: BTreeMap::new(),
        }
    }

    pub(crate) fn with(mut self, key: &str, val: impl ToString) -> Self {
        self.meta.insert(key.to_string(), val.to_string());
        self
    }
}

/// Options for the product enumeration behind [`lower_bound_products`].
#[derive(Debug, Clone, Copy)]
pub struct ProductSearch {
    /// Enumeration refused when `M^max_length` exceeds this.
    pub cap: u128,
    /// Skip subtrees whose operator-norm bound cannot beat the incumbent.
    pub prune: bool,
}

impl Default for ProductSearch {
    fn default() -> Self {
        Self {
            cap: DEFAULT_PRODUCT_CAP,
            prune: false,
        }
    }
}

/// Lower bound on the JSR: max over words w of length k <= max_length of
/// spectral_radius(A_w)^(1/k). Always a true lower bound.
pub fn lower_bound_products(set: &MatrixSet, max_length: usize) -> Result<BoundReport> {
    lower_bound_products_opts(set, max_length, ProductSearch::default())
}

pub fn lower_bound_products_opts(
    set: &MatrixSet,
    max_length: usize,
    opts: ProductSearch,
) -> Result<BoundReport> {
    if max_length == 0 {
        return Err(Error::Domain("max_length must be >= 1".into()));
    }
    let modes = set.len() as u128;
    let words = modes
        .checked_pow(u32::try_from(max_length).map_err(|_| {
            Error::Domain("max_length too large".into())
        })?)
        .ok_or(Error::EnumerationTooLarge {
            words: u128::MAX,
            cap: opts.cap,
        })?;
    if words > opts.cap {
        return Err(Error::EnumerationTooLarge {
            words,
            cap: opts.cap,
        });
    }

    let start = Instant::now();
    let max_mode_norm = if opts.prune {
        let mut worst = 0.0f64;
        for a in set.matrices() {
            worst = worst.max(a.two_norm()?);
        }
        worst
    } else {
        0.0
    };

    let mut search = WordSearch {
        set,
        max_length,
        prune: opts.prune,
        max_mode_norm,
        best: 0.0,
        best_word: Vec::new(),
        examined: 0,
    };
    let mut word = Vec::with_capacity(max_length);
    search.descend(&mut word, &Matrix::identity(set.dim()))?;

    let word_text = search
        .best_word
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let report = BoundReport::new(
        search.best,
        BoundKind::Lower,
        "product-enumeration",
        start.elapsed().as_secs_f64(),
    )
    .with("max_length", max_length)
    .with("word", word_text)
    .with("word_length", search.best_word.len())
    .with("products_examined", search.examined)
    .with("pruned", opts.prune);
    Ok(report)
}

struct WordSearch<'a> {
    set: &'a MatrixSet,
    max_length: usize,
    prune: bool,
    max_mode_norm: f64,
    best: f64,
    best_word: Vec<usize>,
    examined: u64,
}

impl WordSearch<'_> {
    fn descend(&mut self, word: &mut Vec<usize>, product: &Matrix) -> Result<()> {
        let k = word.len();
        if k > 0 {
            self.examined += 1;
            let rho = product.spectral_radius()?;
            let value = rho.powf(1.0 / k as f64);
            if value > self.best {
                self.best = value;
                self.best_word = word.clone();
            }
        }
        if k == self.max_length {
            return Ok(());
        }
        if self.prune && k > 0 && self.best > 0.0 {
            // For any extension to length j, rho(P Q)^(1/j) is at most
            // (|P| * maxnorm^(j-k))^(1/j) by submultiplicativity; skip the
            // subtree if that ceiling never beats the incumbent.
            let p_norm = product.two_norm()?;
            if p_norm == 0.0 {
                return Ok(());
            }
            let log_best = self.best.ln();
            let mut improvable = false;
            for j in (k + 1)..=self.max_length {
                let ceiling =
                    (p_norm.ln() + (j - k) as f64 * self.max_mode_norm.ln()) / j as f64;
                if ceiling > log_best {
                    improvable = true;
                    break;
                }
            }
            if !improvable {
                return Ok(());
            }
        }
        for mode in 1..=self.set.len() {
            word.push(mode);
            let next = product.mul(self.set.matrix(mode)?)?;
            self.descend(word, &next)?;
            word.pop();
        }
        Ok(())
    }
}

/// Ellipsoidal norm given by a lower-triangular factor L with positive
/// diagonal; the quadratic form is P = L L^T and |x|_P = |L^T x|_2.
#[derive(Debug, Clone)]
pub struct EllipsoidalNorm {
    l: Matrix,
}

impl EllipsoidalNorm {
    pub fn new(l: Matrix) -> Result<Self> {
        let n = l.dim();
        for i in 0..n {
            if !(l.get(i, i) > 0.0) {
                return Err(Error::Domain(
                    "triangular factor needs a strictly positive diagonal".into(),
                ));
            }
            for j in (i + 1)..n {
                if l.get(i, j) != 0.0 {
                    return Err(Error::Domain(
                        "factor must be lower triangular".into(),
                    ));
                }
            }
        }
        Ok(Self { l })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            l: Matrix::identity(n),
        }
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    /// |x|_P = |L^T x|_2.
    pub fn vector_norm(&self, x: &[f64]) -> Result<f64> {
        let y = self.l.transpose().matvec(x)?;
        Ok(y.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Induced matrix norm |A|_P = sigma_max(L^T A L^-T).
    pub fn induced_norm(&self, a: &Matrix) -> Result<f64> {
        self.conjugate(a)?.two_norm()
    }

    /// max_i |A_i|_P over the set; an upper bound on the JSR for any P.
    pub fn max_induced_norm(&self, set: &MatrixSet) -> Result<f64> {
        let mut worst = 0.0f64;
        for a in set.matrices() {
            worst = worst.max(self.induced_norm(a)?);
        }
        Ok(worst)
    }

    /// L^T A L^-T.
    fn conjugate(&self, a: &Matrix) -> Result<Matrix> {
        // X = A L^-T solves X L^T = A, i.e. L X^T = A^T by transposition.
        let xt = solve_lower_triangular(&self.l, &a.transpose())?;
        Ok(self.l.transpose().mul(&xt.transpose())?)
    }

    /// L^-T v by back substitution on L^T z = v.
    fn inv_transpose_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        let n = self.l.dim();
        if v.len() != n {
            return Err(Error::Shape {
                expected: n,
                got: v.len(),
            });
        }
        let mut z = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = v[i];
            for j in (i + 1)..n {
                // (L^T)[i][j] = L[j][i]
                acc -= self.l.get(j, i) * z[j];
            }
            z[i] = acc / self.l.get(i, i);
        }
        Ok(z)
    }
}

/// Solve L Y = B for Y, with L lower triangular.
fn solve_lower_triangular(l: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = l.dim();
    if b.dim() != n {
        return Err(Error::Shape {
            expected: n,
            got: b.dim(),
        });
    }
    let mut y = Matrix::zeros(n);
    for col in 0..n {
        for i in 0..n {
            let mut acc = b.get(i, col);
            for j in 0..i {
                acc -= l.get(i, j) * y.get(j, col);
            }
            y.set(i, col, acc / l.get(i, i));
        }
    }
    Ok(y)
}

/// Certified upper bound on the JSR via an optimized ellipsoidal norm.
///
/// Minimizes f(L) = max_i sigma_max(L^T A_i L^-T) over lower-triangular L
/// with positive diagonal by projected subgradient descent with restarts.
/// Any admissible L certifies the bound; optimization affects tightness
/// only, never soundness.
pub fn ellipsoidal_upper_bound(
    set: &MatrixSet,
    restarts: usize,
    iters: usize,
    seed: u64,
) -> Result<(BoundReport, EllipsoidalNorm)> {
    if restarts == 0 || iters == 0 {
        return Err(Error::Domain("restarts and iters must be >= 1".into()));
    }
    let start = Instant::now();
    let n = set.dim();

    let mut best_value = f64::INFINITY;
    let mut best_l = Matrix::identity(n);
    let mut best_restart = 0usize;
    let mut diverged = 0usize;

    for restart in 0..restarts {
        let mut l = if restart == 0 {
            Matrix::identity(n)
        } else {
            random_lower_factor(n, seed, restart as u64)
        };
        let mut failed = false;

        let step0 = 0.35;
        let decay = (1e-3f64 / step0).powf(1.0 / iters.max(2) as f64);
        for t in 0..iters {
            let norm = EllipsoidalNorm { l: l.clone() };
            let (value, active) = match eval_objective(&norm, set) {
                Ok(pair) => pair,
                Err(_) => {
                    failed = true;
                    break;
                }
            };
            if !value.is_finite() {
                failed = true;
                break;
            }
            if value < best_value {
                best_value = value;
                best_l = l.clone();
                best_restart = restart;
            }

            let grad = match subgradient(&norm, set.matrix(active + 1)?) {
                Ok(g) => g,
                Err(_) => {
                    failed = true;
                    break;
                }
            };
            let gnorm = grad.frobenius_norm();
            if gnorm == 0.0 || !gnorm.is_finite() {
                break;
            }
            let step = step0 * decay.powi(t as i32) * (n as f64).sqrt();
            for i in 0..n {
                for j in 0..=i {
                    l.set(i, j, l.get(i, j) - step * grad.get(i, j) / gnorm);
                }
            }
            renormalize_factor(&mut l);
        }

        if !failed {
            // Score the final iterate too.
            if let Ok((value, _)) = eval_objective(&EllipsoidalNorm { l: l.clone() }, set) {
                if value.is_finite() && value < best_value {
                    best_value = value;
                    best_l = l;
                    best_restart = restart;
                }
            }
        } else {
            diverged += 1;
        }
    }

    let norm = EllipsoidalNorm::new(best_l)?;
    // The reported value is recomputed from the returned factor so that the
    // pair (value, norm) is self-consistent by construction.
    let value = norm.max_induced_norm(set)?;
    let report = BoundReport::new(
        value,
        BoundKind::CertifiedUpper,
        "ellipsoid-subgradient",
        start.elapsed().as_secs_f64(),
    )
    .with("restarts", restarts)
    .with("iters", iters)
    .with("seed", seed)
    .with("best_restart", best_restart)
    .with("diverged_restarts", diverged)
    .with("all_diverged", diverged == restarts);
    Ok((report, norm))
}

/// Objective f(L) = max_i |A_i|_P and the index attaining it.
fn eval_objective(norm: &EllipsoidalNorm, set: &MatrixSet) -> Result<(f64, usize)> {
    let mut worst = f64::NEG_INFINITY;
    let mut active = 0usize;
    for (i, a) in set.matrices().iter().enumerate() {
        let v = norm.induced_norm(a)?;
        if v > worst {
            worst = v;
            active = i;
        }
    }
    Ok((worst, active))
}

/// Subgradient of L -> sigma_max(L^T A L^-T) at the current factor,
/// projected onto the lower-triangular parameterization.
///
/// With B = L^T A L^-T and top singular pair (sigma, u, v):
/// d sigma = <dL, (A L^-T v) u^T - sigma (L^-T v) v^T>.
fn subgradient(norm: &EllipsoidalNorm, a: &Matrix) -> Result<Matrix> {
    let n = a.dim();
    let b = norm.conjugate(a)?;
    let (sigma, u, v) = top_singular_pair(&b)?;
    let z = norm.inv_transpose_vec(&v)?; // L^-T v
    let w = a.matvec(&z)?; // A L^-T v
    let mut g = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            g.set(i, j, w[i] * u[j] - sigma * z[i] * v[j]);
        }
    }
    Ok(g)
}

/// Top singular triple of `b` by power iteration on B^T B.
fn top_singular_pair(b: &Matrix) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let n = b.dim();
    let bt = b.transpose();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * (i + 1) as f64).collect();
    normalize(&mut v);
    for _ in 0..200 {
        let w = b.matvec(&v)?;
        let mut z = bt.matvec(&w)?;
        let zn = normalize(&mut z);
        if zn == 0.0 {
            // B^T B v vanished: treat the direction as a null vector.
            let u = vec![0.0; n];
            return Ok((0.0, u, v));
        }
        let drift: f64 = v
            .iter()
            .zip(z.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = z;
        if drift < 1e-13 {
            break;
        }
    }
    let mut u = b.matvec(&v)?;
    let sigma = normalize(&mut u);
    Ok((sigma, u, v))
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        for v in x.iter_mut() {
            *v /= norm;
        }
    }
    norm
}

/// Keep the iterate well-posed: rescale to Frobenius norm sqrt(n) (the
/// objective is scale-invariant in L) and floor the diagonal.
fn renormalize_factor(l: &mut Matrix) {
    let n = l.dim();
    let fro = l.frobenius_norm();
    if fro > 0.0 && fro.is_finite() {
        let c = (n as f64).sqrt() / fro;
        for i in 0..n {
            for j in 0..=i {
                l.set(i, j, l.get(i, j) * c);
            }
        }
    }
    const DIAG_FLOOR: f64 = 1e-8;
    for i in 0..n {
        let d = l.get(i, i);
        if !(d > DIAG_FLOOR) {
            l.set(i, i, DIAG_FLOOR);
        }
    }
}

/// Random lower-triangular factor for restart diversity: log-normal
/// diagonal, normal subdiagonal, deterministic per (seed, restart).
fn random_lower_factor(n: usize, seed: u64, restart: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(
        seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(restart),
    );
    let diag = LogNormal::new(0.0, 0.6).expect("valid lognormal");
    let off = Normal::new(0.0, 0.8).expect("valid normal");
    let mut l = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..i {
            l.set(i, j, off.sample(&mut rng));
        }
        let d: f64 = diag.sample(&mut rng);
        l.set(i, i, d.max(1e-3));
    }
    l
}
