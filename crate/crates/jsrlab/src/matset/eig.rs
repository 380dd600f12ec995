//! Dense nonsymmetric eigenvalue engine: Householder reduction to upper
//! Hessenberg form followed by implicit double-shift QR iteration.
//! Eigenvalues only — no eigenvector accumulation.

use super::Matrix;
use crate::error::{Error, Result};

/// All eigenvalues of `a` as `(real, imaginary)` pairs, unordered.
pub(crate) fn eigenvalues(a: &Matrix) -> Result<Vec<(f64, f64)>> {
    let n = a.dim();
    let mut h = Buf {
        n,
        a: a.as_slice().to_vec(),
    };
    if n == 1 {
        return Ok(vec![(h.a[0], 0.0)]);
    }
    hessenberg(&mut h);
    hqr(&mut h)
}

/// Row-major working buffer with signed-index accessors, so the QR loops
/// can mirror the textbook algorithm without unsigned-underflow hazards.
struct Buf {
    n: usize,
    a: Vec<f64>,
}

impl Buf {
    #[inline]
    fn g(&self, i: isize, j: isize) -> f64 {
        self.a[i as usize * self.n + j as usize]
    }

    #[inline]
    fn s(&mut self, i: isize, j: isize, v: f64) {
        self.a[i as usize * self.n + j as usize] = v;
    }
}

/// Householder similarity reduction to upper Hessenberg form, in place.
fn hessenberg(h: &mut Buf) {
    let n = h.n;
    let low = 0usize;
    let high = n - 1;
    let mut ort = vec![0.0; n];

    // Eliminate below the first subdiagonal, one column at a time.
    for m in (low + 1)..high {
        let mut scale = 0.0;
        for i in m..=high {
            scale += h.a[i * n + m - 1].abs();
        }
        if scale == 0.0 {
            continue;
        }

        let mut hsum = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h.a[i * n + m - 1] / scale;
            hsum += ort[i] * ort[i];
        }
        let mut g = hsum.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        let hh = hsum - ort[m] * g;
        ort[m] -= g;

        // Similarity transform H <- (I - u u^T / hh) H (I - u u^T / hh).
        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h.a[i * n + j];
            }
            f /= hh;
            for i in m..=high {
                h.a[i * n + j] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h.a[i * n + j];
            }
            f /= hh;
            for j in m..=high {
                h.a[i * n + j] -= f * ort[j];
            }
        }

        ort[m] *= scale;
        h.a[m * n + m - 1] = scale * g;
    }
}

/// Implicit double-shift QR iteration on an upper Hessenberg matrix.
/// Deflates eigenvalues from the bottom; errs if a root fails to settle.
fn hqr(h: &mut Buf) -> Result<Vec<(f64, f64)>> {
    let nn_us = h.n;
    let nn = nn_us as isize;
    let mut d = vec![0.0f64; nn_us];
    let mut e = vec![0.0f64; nn_us];

    let low: isize = 0;
    let high: isize = nn - 1;
    let eps = 2.0f64.powi(-52);
    let mut exshift = 0.0;
    let mut p: f64;
    let mut q: f64;
    let mut r: f64;
    let mut s: f64;
    let mut z: f64;
    let mut x: f64;
    let mut y: f64;
    let mut w: f64;

    // Matrix norm used by the deflation thresholds.
    let mut norm = 0.0;
    for i in 0..nn {
        for j in (i - 1).max(0)..nn {
            norm += h.g(i, j).abs();
        }
    }
    if norm == 0.0 {
        // Hessenberg with no nonzero entries: the zero matrix.
        return Ok(d.into_iter().zip(e).collect());
    }

    let mut n = high;
    let mut iter = 0usize;
    while n >= low {
        // Find a negligible subdiagonal entry to split at.
        let mut l = n;
        while l > low {
            s = h.g(l - 1, l - 1).abs() + h.g(l, l).abs();
            if s == 0.0 {
                s = norm;
            }
            if h.g(l, l - 1).abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // One real root has deflated.
            h.s(n, n, h.g(n, n) + exshift);
            d[n as usize] = h.g(n, n);
            e[n as usize] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            // A trailing 2x2 block: real pair or complex conjugates.
            w = h.g(n, n - 1) * h.g(n - 1, n);
            p = (h.g(n - 1, n - 1) - h.g(n, n)) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h.s(n, n, h.g(n, n) + exshift);
            h.s(n - 1, n - 1, h.g(n - 1, n - 1) + exshift);
            x = h.g(n, n);
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[(n - 1) as usize] = x + z;
                d[n as usize] = d[(n - 1) as usize];
                if z != 0.0 {
                    d[n as usize] = x - w / z;
                }
                e[(n - 1) as usize] = 0.0;
                e[n as usize] = 0.0;
            } else {
                d[(n - 1) as usize] = x + p;
                d[n as usize] = x + p;
                e[(n - 1) as usize] = z;
                e[n as usize] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            // No deflation yet: form a shift and run one double step.
            x = h.g(n, n);
            y = 0.0;
            w = 0.0;
            if l < n {
                y = h.g(n - 1, n - 1);
                w = h.g(n, n - 1) * h.g(n - 1, n);
            }

            // Exceptional shifts to break stagnation.
            if iter == 10 {
                exshift += x;
                for i in low..=n {
                    h.s(i, i, h.g(i, i) - x);
                }
                s = h.g(n, n - 1).abs() + h.g(n - 1, n - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=n {
                        h.s(i, i, h.g(i, i) - s);
                    }
                    exshift += s;
                    x = 0.964;
                    y = 0.964;
                    w = 0.964;
                }
            }

            iter += 1;
            if iter > 120 {
                return Err(Error::Numeric(
                    "QR iteration failed to converge on an eigenvalue".into(),
                ));
            }

            // Look for two consecutive small subdiagonal entries.
            let mut m = n - 2;
            loop {
                z = h.g(m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / h.g(m + 1, m) + h.g(m, m + 1);
                q = h.g(m + 1, m + 1) - z - r - s;
                r = h.g(m + 2, m + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h.g(m, m - 1).abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs()
                            * (h.g(m - 1, m - 1).abs() + z.abs() + h.g(m + 1, m + 1).abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=n {
                h.s(i, i - 2, 0.0);
                if i > m + 2 {
                    h.s(i, i - 3, 0.0);
                }
            }

            // Double QR sweep on rows l..=n.
            let mut k = m;
            while k <= n - 1 {
                let notlast = k != n - 1;
                if k != m {
                    p = h.g(k, k - 1);
                    q = h.g(k + 1, k - 1);
                    r = if notlast { h.g(k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h.s(k, k - 1, -s * x);
                    } else if l != m {
                        h.s(k, k - 1, -h.g(k, k - 1));
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    // Row modification.
                    for j in k..nn {
                        let mut f = h.g(k, j) + q * h.g(k + 1, j);
                        if notlast {
                            f += r * h.g(k + 2, j);
                            h.s(k + 2, j, h.g(k + 2, j) - f * z);
                        }
                        h.s(k, j, h.g(k, j) - f * x);
                        h.s(k + 1, j, h.g(k + 1, j) - f * y);
                    }

                    // Column modification.
                    for i in 0..=n.min(k + 3) {
                        let mut f = x * h.g(i, k) + y * h.g(i, k + 1);
                        if notlast {
                            f += z * h.g(i, k + 2);
                            h.s(i, k + 2, h.g(i, k + 2) - f * r);
                        }
                        h.s(i, k, h.g(i, k) - f);
                        h.s(i, k + 1, h.g(i, k + 1) - f * q);
                    }
                }
                k += 1;
            }
        }
    }

    Ok(d.into_iter().zip(e).collect())
}
