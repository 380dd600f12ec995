//! Closed-form calculators for certificate complexity: quadratic and
//! sum-of-squares precision factors, polytope vertex counts for convex-body
//! approximation, face-count bounds, and the derived ReLU network
//! depth/width figures, plus the piecewise-linear vs. SOS variable-count
//! comparison table.

use crate::error::{Error, Result};
use num_bigint::{BigInt, BigUint};
use num_traits::ToPrimitive;
use std::f64::consts::LN_2;

/// Search ceiling for the smallest admissible polytope parameter `k`.
pub const DEFAULT_MIN_K_CEILING: u64 = 10_000;

/// Bundle of calculator arguments, validated once at the edge.
#[derive(Debug, Clone, Copy)]
pub struct TheoryQuery {
    pub n: u64,
    pub tau: Option<f64>,
    pub d: Option<u64>,
    pub k: Option<u64>,
}

impl TheoryQuery {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("dimension n must be >= 1".into()));
        }
        if let Some(tau) = self.tau {
            if !tau.is_finite() || tau <= 1.0 {
                return Err(Error::Domain("precision tau must be finite and > 1".into()));
            }
        }
        if self.d == Some(0) {
            return Err(Error::Domain("half-degree d must be >= 1".into()));
        }
        if self.k == Some(0) {
            return Err(Error::Domain("vertex parameter k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Precision factor attainable with one quadratic (ellipsoidal) norm: sqrt(n).
pub fn tau_quad(n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("dimension n must be >= 1".into()));
    }
    Ok((n as f64).sqrt())
}

/// Precision factor attainable with a degree-2d SOS certificate:
/// binomial(n + d - 1, d), exactly.
pub fn tau_sos(n: u64, d: u64) -> Result<BigUint> {
    if n == 0 {
        return Err(Error::Domain("dimension n must be >= 1".into()));
    }
    if d == 0 {
        return Err(Error::Domain("half-degree d must be >= 1".into()));
    }
    Ok(binomial(n + d - 1, d))
}

/// `tau_sos` as a float, for use as a precision argument downstream.
pub fn tau_sos_f64(n: u64, d: u64) -> Result<f64> {
    let exact = tau_sos(n, d)?;
    exact
        .to_f64()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Overflow("tau_sos does not fit in an f64".into()))
}

/// Vertex-count function for symmetric polytope approximation of a convex
/// body: sum over m of binomial(n + k - 1 - 2m, k - 2m).
pub fn barvinok_d(n: u64, k: u64) -> Result<BigUint> {
    if n == 0 || k == 0 {
        return Err(Error::Domain("barvinok_d requires n >= 1 and k >= 1".into()));
    }
    let mut total = BigUint::from(0u32);
    let mut m = 0;
    while 2 * m <= k {
        total += binomial(n + k - 1 - 2 * m, k - 2 * m);
        m += 1;
    }
    Ok(total)
}

/// Smallest `k >= 1` with
/// `(tau - sqrt(tau^2-1))^k + (tau + sqrt(tau^2-1))^k >= 6 * sqrt(D(n,k))`,
/// or `None` if no such `k` exists at or below the default ceiling.
///
/// The scan runs in f64 log space; the returned index and its predecessor
/// are then re-checked in exact integer arithmetic, so the answer does not
/// depend on float rounding.
pub fn barvinok_min_k(n: u64, tau: f64) -> Result<Option<u64>> {
    barvinok_min_k_capped(n, tau, DEFAULT_MIN_K_CEILING)
}

pub fn barvinok_min_k_capped(n: u64, tau: f64, ceiling: u64) -> Result<Option<u64>> {
    if n == 0 {
        return Err(Error::Domain("dimension n must be >= 1".into()));
    }
    if !tau.is_finite() || tau <= 1.0 {
        return Err(Error::Domain("precision tau must be finite and > 1".into()));
    }
    // tau = cosh(a); the left side is 2 cosh(k a), which grows like e^{k a};
    // ln of it is computed without overflow for any k.
    let a = (tau + (tau * tau - 1.0).sqrt()).ln();
    let rational = Pow2Rational::from_f64(tau);

    // D(n, k) advanced incrementally by parity:
    // D(n, k) = D(n, k - 2) + binomial(n - 1 + k, k).
    let mut d_even = BigUint::from(1u32); // D(n, 0) = 1 (empty sum convention)
    let mut d_odd = BigUint::from(0u32); // placeholder for D(n, -1)
    let mut binom = BigUint::from(1u32); // binomial(n - 1, 0)

    for k in 1..=ceiling {
        // binomial(n - 1 + k, k) from binomial(n - 2 + k, k - 1).
        binom = binom * BigUint::from(n - 1 + k) / BigUint::from(k);
        let d_k = if k % 2 == 0 { &mut d_even } else { &mut d_odd };
        *d_k += &binom;

        let lhs_log = {
            let ka = k as f64 * a;
            ka + (-2.0 * ka).exp().ln_1p()
        };
        let rhs_log = 6.0f64.ln() + 0.5 * ln_biguint(d_k);
        let margin = 1e-9 * (1.0 + lhs_log.abs() + rhs_log.abs());
        if lhs_log >= rhs_log - margin {
            // Candidate: settle it exactly.
            if exact_inequality_holds(n, k, &rational)? {
                let mut kk = k;
                while kk > 1 && exact_inequality_holds(n, kk - 1, &rational)? {
                    kk -= 1;
                }
                return Ok(Some(kk));
            }
        }
    }
    Ok(None)
}

/// A finite f64 > 1 written exactly as `p / 2^e` in lowest such terms.
struct Pow2Rational {
    p: BigUint,
    e: u64,
}

impl Pow2Rational {
    fn from_f64(x: f64) -> Self {
        debug_assert!(x.is_finite() && x > 1.0);
        let bits = x.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i64 - 1023 - 52;
        let mant = (1u64 << 52) | (bits & ((1u64 << 52) - 1));
        let tz = i64::from(mant.trailing_zeros());
        if exp >= 0 {
            Self {
                p: BigUint::from(mant) << exp as u64,
                e: 0,
            }
        } else {
            let shift = tz.min(-exp);
            Self {
                p: BigUint::from(mant >> shift),
                e: (-exp - shift) as u64,
            }
        }
    }
}

/// Exact test of `2 T_k(tau) >= 6 sqrt(D(n,k))` where `T_k` is the degree-k
/// Chebyshev polynomial of the first kind (the left side of the vertex
/// inequality equals `2 cosh(k acosh tau) = 2 T_k(tau)`).
///
/// With tau = p / 2^e, the integers `S_j = 2^(j e) * 2 T_j(tau)` satisfy
/// `S_j = 2 p S_{j-1} - 2^(2e) S_{j-2}`, and the test becomes
/// `S_k^2 >= 36 * D(n,k) * 2^(2 k e)`.
fn exact_inequality_holds(n: u64, k: u64, tau: &Pow2Rational) -> Result<bool> {
    let p = BigInt::from(tau.p.clone());
    let two_p: BigInt = &p * 2;
    let q2_shift = 2 * tau.e;

    let mut s_prev = BigInt::from(2u32); // S_0
    let mut s_cur = two_p.clone(); // S_1
    for _ in 1..k {
        let next = &two_p * &s_cur - (&s_prev << q2_shift);
        s_prev = s_cur;
        s_cur = next;
    }
    let s_k = if k == 0 { s_prev } else { s_cur };

    let lhs = &s_k * &s_k;
    let rhs = (BigInt::from(barvinok_d(n, k)?) * 36) << (2 * k * tau.e);
    Ok(lhs >= rhs)
}

/// Upper bound on the number of faces of an n-dimensional polytope with k
/// vertices.
pub fn mcmullen_faces(n: u64, k: u64) -> Result<BigUint> {
    mcmullen_faces_big(n, &BigUint::from(k))
}

/// `mcmullen_faces` for vertex counts beyond u64 range.
pub fn mcmullen_faces_big(n: u64, k: &BigUint) -> Result<BigUint> {
    if n == 0 {
        return Err(Error::Domain("dimension n must be >= 1".into()));
    }
    if *k <= BigUint::from(n) {
        return Err(Error::Domain(
            "face bound needs at least n + 1 vertices".into(),
        ));
    }
    // binomial(k - floor((n+1)/2), k - n) has small co-rank
    // (k - floor((n+1)/2)) - (k - n) = n - floor((n+1)/2) = floor(n/2),
    // so evaluate through the complementary index; same for the second term.
    let first = binomial_big_choose_small(&(k - BigUint::from((n + 1) / 2)), n / 2);
    let second = binomial_big_choose_small(&(k - BigUint::from((n + 2) / 2)), n - (n + 2) / 2);
    Ok(first + second)
}

/// Derived ReLU-network structure figures for approximating a JSR within a
/// factor `tau` in dimension `n`.
#[derive(Debug, Clone)]
pub struct NetworkStructure {
    /// Layers required: ceil(log2(n + 1)) + 1.
    pub depth: u64,
    /// Smallest admissible vertex parameter for this (n, tau).
    pub min_k: u64,
    /// Vertex budget of the approximating polytope: 8 * D(n, min_k).
    pub vertices: BigUint,
    /// Face bound at that vertex budget (the width bound's base).
    pub faces: BigUint,
    /// The width bound's exponent: 2n^2 + 3n + 1.
    pub width_exponent: u64,
    /// log10 of faces^width_exponent, since the width itself overflows fast.
    pub log10_width_bound: f64,
}

pub fn network_structure_bound(n: u64, tau: f64) -> Result<NetworkStructure> {
    if n == 0 {
        return Err(Error::Domain("dimension n must be >= 1".into()));
    }
    let min_k = barvinok_min_k(n, tau)?.ok_or_else(|| {
        Error::Domain(format!(
            "no admissible vertex parameter k <= {DEFAULT_MIN_K_CEILING} for n={n}, tau={tau}"
        ))
    })?;
    let vertices = barvinok_d(n, min_k)? * BigUint::from(8u32);
    let faces = mcmullen_faces_big(n, &vertices)?;
    let width_exponent = 2 * n * n + 3 * n + 1;
    let log10_width_bound = width_exponent as f64 * ln_biguint(&faces) / std::f64::consts::LN_10;
    Ok(NetworkStructure {
        depth: ceil_log2(n + 1) + 1,
        min_k,
        vertices,
        faces,
        width_exponent,
        log10_width_bound,
    })
}

/// One row of the variable-count comparison between piecewise-linear and
/// SOS certificates at matched precision.
#[derive(Debug, Clone)]
pub struct VariablesRow {
    pub n: u64,
    /// Matched precision: the SOS factor binomial(n + d - 1, d).
    pub tau: f64,
    pub min_k: u64,
    /// Vertex coordinates of the polytope certificate: 8 * D(n, min_k) * n.
    pub cpwl_vars: BigUint,
    /// Gram-matrix parameter count g(g+1)/2 with g = binomial(n + d - 1, d).
    /// This counts the free entries of a symmetric Gram matrix for a
    /// degree-2d SOS certificate; taken here as the SOS size model.
    pub sos_vars: BigUint,
}

pub fn variables_comparison(n_range: &[u64], d: u64) -> Result<Vec<VariablesRow>> {
    let mut rows = Vec::with_capacity(n_range.len());
    for &n in n_range {
        let tau = tau_sos_f64(n, d)?;
        if tau <= 1.0 {
            return Err(Error::Domain(format!(
                "tau_sos({n}, {d}) = {tau} is not > 1; comparison undefined"
            )));
        }
        let min_k = barvinok_min_k(n, tau)?.ok_or_else(|| {
            Error::Domain(format!("no admissible k for n={n}, tau={tau}"))
        })?;
        let cpwl_vars = barvinok_d(n, min_k)? * BigUint::from(8 * n);
        let g = tau_sos(n, d)?;
        let sos_vars = (&g * (&g + BigUint::from(1u32))) / BigUint::from(2u32);
        rows.push(VariablesRow {
            n,
            tau,
            min_k,
            cpwl_vars,
            sos_vars,
        });
    }
    Ok(rows)
}

/// Exact binomial coefficient; 0 when b > a.
pub fn binomial(a: u64, b: u64) -> BigUint {
    if b > a {
        return BigUint::from(0u32);
    }
    let b = b.min(a - b);
    let mut acc = BigUint::from(1u32);
    for j in 0..b {
        acc = acc * BigUint::from(a - j) / BigUint::from(j + 1);
    }
    acc
}

/// binomial(a, c) for big `a` and small co-index `c`.
fn binomial_big_choose_small(a: &BigUint, c: u64) -> BigUint {
    let mut acc = BigUint::from(1u32);
    for j in 0..c {
        acc = acc * (a - BigUint::from(j)) / BigUint::from(j + 1);
    }
    acc
}

/// Natural log of a positive big integer, via its top 53 bits.
fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 53 {
        return x.to_f64().unwrap_or(0.0).max(f64::MIN_POSITIVE).ln();
    }
    let shift = bits - 53;
    let top = (x >> shift).to_f64().unwrap_or(f64::MAX);
    top.ln() + shift as f64 * LN_2
}

/// ceil(log2(m)) for m >= 1.
fn ceil_log2(m: u64) -> u64 {
    if m <= 1 {
        0
    } else {
        64 - u64::from((m - 1).leading_zeros())
    }
}
