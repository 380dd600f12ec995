//! Symmetric polytope norms built from trained Lyapunov candidates, the
//! gauge (Minkowski functional) evaluated through an in-house LP, and the
//! certified spectral-radius upper bound obtained by maximizing the gauge
//! over images of the polytope's vertices.

use crate::bounds::{BoundKind, BoundReport};
use crate::error::{Error, Result};
use crate::matset::MatrixSet;
use crate::neural::{SampleSet, TrainResult};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Feasibility / optimality tolerance shared by every LP decision.
const LP_TOL: f64 = 1e-9;
/// Pivot entries smaller than this are treated as zero.
const PIVOT_TOL: f64 = 1e-9;
/// Hard cap on simplex pivots; Bland's rule terminates long before this.
const MAX_PIVOTS: usize = 50_000;

/// Origin-symmetric polytope described by its vertex list. The gauge of
/// the convex hull of the vertices is an absolutely homogeneous norm as
/// soon as the origin is strictly interior.
#[derive(Debug, Clone, Serialize)]
#[serde(into = "PolytopeWire")]
pub struct PolytopeNorm {
    n: usize,
    vertices: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PolytopeWire {
    n: usize,
    vertices: Vec<Vec<f64>>,
}

impl From<PolytopeNorm> for PolytopeWire {
    fn from(p: PolytopeNorm) -> Self {
        Self {
            n: p.n,
            vertices: p.vertices,
        }
    }
}

impl<'de> Deserialize<'de> for PolytopeNorm {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let wire = PolytopeWire::deserialize(deserializer)?;
        PolytopeNorm::new(wire.n, wire.vertices).map_err(serde::de::Error::custom)
    }
}

impl PolytopeNorm {
    /// Validates dimensions, finiteness, and symmetry: every vertex must
    /// have its negation in the list (within 1e-12 per coordinate).
    pub fn new(n: usize, vertices: Vec<Vec<f64>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("dimension must be >= 1".into()));
        }
        if vertices.is_empty() {
            return Err(Error::Domain("vertex list must be nonempty".into()));
        }
        for v in &vertices {
            if v.len() != n {
                return Err(Error::Shape {
                    expected: n,
                    got: v.len(),
                });
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::Domain("vertices must be finite".into()));
            }
        }
        for v in &vertices {
            let has_negation = vertices
                .iter()
                .any(|w| v.iter().zip(w).all(|(a, b)| (a + b).abs() <= 1e-12));
            if !has_negation {
                return Err(Error::Domain(
                    "vertex list must be closed under negation".into(),
                ));
            }
        }
        Ok(Self { n, vertices })
    }

    /// Builds the symmetric closure of `half`: every point plus its exact
    /// negation.
    pub fn symmetrized(n: usize, half: Vec<Vec<f64>>) -> Result<Self> {
        let mut vertices = Vec::with_capacity(2 * half.len());
        for v in half {
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            vertices.push(v);
            vertices.push(neg);
        }
        Self::new(n, vertices)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }
}

/// Standard-form LP behind a gauge evaluation: minimize the coefficient
/// sum over nonnegative combinations of the vertices reproducing `target`.
#[derive(Debug, Clone)]
pub struct GaugeLPProblem {
    n: usize,
    /// Column j is vertex j.
    vertices: Vec<Vec<f64>>,
    target: Vec<f64>,
}

impl GaugeLPProblem {
    pub fn new(vertices: &[Vec<f64>], target: &[f64]) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::Domain("LP needs at least one vertex".into()));
        }
        let n = target.len();
        if n == 0 || !target.iter().all(|x| x.is_finite()) {
            return Err(Error::Domain("target must be finite and nonempty".into()));
        }
        for v in vertices {
            if v.len() != n {
                return Err(Error::Shape {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        Ok(Self {
            n,
            vertices: vertices.to_vec(),
            target: target.to_vec(),
        })
    }
}

/// Two-phase dense primal simplex with least-index (Bland) pivoting.
/// Returns the optimal objective (the gauge value) and the coefficient
/// vector; optimality is re-verified through the final reduced costs.
pub fn solve_lp(problem: &GaugeLPProblem) -> Result<(f64, Vec<f64>)> {
    let n = problem.n;
    let m = problem.vertices.len();

    // Tableau rows: one per equality constraint, columns = m real
    // variables + n artificials + rhs. Rows are flipped so rhs >= 0.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = vec![0.0; m + n + 1];
        let flip = if problem.target[i] < 0.0 { -1.0 } else { 1.0 };
        for (j, v) in problem.vertices.iter().enumerate() {
            row[j] = flip * v[i];
        }
        row[m + i] = 1.0;
        row[m + n] = flip * problem.target[i];
        rows.push(row);
    }
    let mut basis: Vec<usize> = (m..m + n).collect();

    // Phase 1: minimize the artificial sum. Reduced costs start as the
    // negated column sums (cost row minus the basic artificial rows).
    let mut obj = vec![0.0; m + n + 1];
    for row in &rows {
        for (o, r) in obj.iter_mut().zip(row) {
            *o -= r;
        }
    }
    for j in m..m + n {
        obj[j] = 0.0;
    }
    run_simplex(&mut rows, &mut obj, &mut basis, m + n)?;
    // obj rhs holds -z for the current basis.
    if -obj[m + n] > LP_TOL {
        return Err(Error::Infeasible);
    }

    // Drive any zero-level artificials out of the basis; rows that cannot
    // pivot on a real column are redundant constraints and get dropped.
    let mut r = 0;
    while r < rows.len() {
        if basis[r] >= m {
            let pivot_col = (0..m).find(|&j| rows[r][j].abs() > PIVOT_TOL);
            match pivot_col {
                Some(j) => pivot(&mut rows, &mut obj, &mut basis, r, j),
                None => {
                    rows.remove(r);
                    basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    // Phase 2: unit cost on every real variable. Artificials are barred
    // from entering by an effectively infinite reduced cost.
    for (j, o) in obj.iter_mut().enumerate() {
        *o = if j < m { 1.0 } else { 0.0 };
    }
    obj[m + n] = 0.0;
    for (i, row) in rows.iter().enumerate() {
        if basis[i] < m {
            for (o, r) in obj.iter_mut().zip(row) {
                *o -= r;
            }
        }
    }
    for o in obj.iter_mut().skip(m).take(n) {
        *o = f64::INFINITY;
    }
    run_simplex(&mut rows, &mut obj, &mut basis, m)?;

    // Independent optimality certificate: every reduced cost nonnegative.
    if obj.iter().take(m).any(|&c| c < -LP_TOL) {
        return Err(Error::Numeric(
            "simplex terminated without an optimality certificate".into(),
        ));
    }

    let mut theta = vec![0.0; m];
    for (i, &b) in basis.iter().enumerate() {
        if b < m {
            theta[b] = rows[i][m + n].max(0.0);
        }
    }
    let lambda = theta.iter().sum();
    Ok((lambda, theta))
}

/// Bland-rule pivoting loop over the first `enterable` columns.
fn run_simplex(
    rows: &mut Vec<Vec<f64>>,
    obj: &mut [f64],
    basis: &mut [usize],
    enterable: usize,
) -> Result<()> {
    let rhs = obj.len() - 1;
    for _ in 0..MAX_PIVOTS {
        // Least-index entering rule.
        let entering = (0..enterable).find(|&j| obj[j] < -LP_TOL);
        let Some(e) = entering else {
            return Ok(());
        };
        // Ratio test; ties broken by the smallest basic variable index
        // (the other half of Bland's anti-cycling rule).
        let mut leave: Option<(usize, f64)> = None;
        for (i, row) in rows.iter().enumerate() {
            if row[e] > PIVOT_TOL {
                let ratio = row[rhs] / row[e];
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - LP_TOL
                            || (ratio < lr + LP_TOL && basis[i] < basis[li])
                        {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((leaving, _)) = leave else {
            // Cost unbounded below cannot happen for these objectives;
            // report it as numeric breakdown.
            return Err(Error::Numeric("simplex detected an unbounded ray".into()));
        };
        pivot(rows, obj, basis, leaving, e);
    }
    Err(Error::Numeric("simplex pivot cap exceeded".into()))
}

fn pivot(rows: &mut [Vec<f64>], obj: &mut [f64], basis: &mut [usize], r: usize, c: usize) {
    let p = rows[r][c];
    for v in rows[r].iter_mut() {
        *v /= p;
    }
    let pivot_row = rows[r].clone();
    for (i, row) in rows.iter_mut().enumerate() {
        if i != r && row[c].abs() > 0.0 {
            let f = row[c];
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
    }
    if obj[c].abs() > 0.0 && obj[c].is_finite() {
        let f = obj[c];
        for (v, pv) in obj.iter_mut().zip(&pivot_row) {
            if v.is_finite() {
                *v -= f * pv;
            }
        }
    }
    basis[r] = c;
}

/// Minkowski gauge of the polytope: the least lambda >= 0 with x inside
/// lambda times the vertex hull. Directions outside the conic span of the
/// vertices have infinite gauge and surface as an error.
pub fn gauge(p: &PolytopeNorm, x: &[f64]) -> Result<f64> {
    if x.len() != p.n {
        return Err(Error::Shape {
            expected: p.n,
            got: x.len(),
        });
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("gauge argument must be finite".into()));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(0.0);
    }
    // Solve at unit scale for uniform tolerances, then scale back.
    let unit: Vec<f64> = x.iter().map(|v| v / norm).collect();
    let problem = GaugeLPProblem::new(&p.vertices, &unit)?;
    match solve_lp(&problem) {
        Ok((lambda, _)) => Ok(lambda * norm),
        Err(Error::Infeasible) => Err(Error::UnboundedDirection),
        Err(e) => Err(e),
    }
}

/// True iff every signed coordinate direction has a finite positive gauge,
/// certifying that the origin lies strictly inside the polytope.
pub fn interior_check(p: &PolytopeNorm) -> bool {
    for j in 0..p.n {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; p.n];
            e[j] = sign;
            match gauge(p, &e) {
                Ok(lambda) if lambda.is_finite() && lambda > 0.0 => {}
                _ => return false,
            }
        }
    }
    true
}

/// Drops sample points whose network value falls below `eps` and maps the
/// rest to the symmetric vertex pair (x/V(x), -x/V(x)). Returns the norm
/// and the number of dropped degenerate samples.
pub fn build_polytope_norm_detailed(
    result: &TrainResult,
    samples: &SampleSet,
    eps: f64,
) -> Result<(PolytopeNorm, usize)> {
    if eps <= 0.0 || !eps.is_finite() {
        return Err(Error::Domain("degeneracy threshold must be positive".into()));
    }
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let params = &result.best_params;
    let mut half = Vec::with_capacity(samples.len());
    let mut dropped = 0usize;
    for x in samples.points() {
        let v = params.forward(x)?;
        if !(v >= eps) {
            dropped += 1;
            continue;
        }
        half.push(x.iter().map(|t| t / v).collect::<Vec<f64>>());
    }
    if half.is_empty() {
        return Err(Error::AllSamplesDegenerate(dropped));
    }
    let norm = PolytopeNorm::symmetrized(samples.dim(), half)?;
    Ok((norm, dropped))
}

/// [`build_polytope_norm_detailed`] without the drop count.
pub fn build_polytope_norm(
    result: &TrainResult,
    samples: &SampleSet,
    eps: f64,
) -> Result<PolytopeNorm> {
    build_polytope_norm_detailed(result, samples, eps).map(|(p, _)| p)
}

/// Certified JSR upper bound induced by the polytope norm: the maximum
/// gauge of any matrix image of any vertex. Convexity places the induced
/// operator norm at a vertex, so this equals max_i of the polytope-norm
/// operator norm of A_i, which dominates the joint spectral radius.
pub fn certified_bound(p: &PolytopeNorm, set: &MatrixSet) -> Result<BoundReport> {
    if p.n != set.dim() {
        return Err(Error::Shape {
            expected: set.dim(),
            got: p.n,
        });
    }
    if !interior_check(p) {
        return Err(Error::Domain(
            "polytope does not contain the origin in its interior".into(),
        ));
    }
    let start = Instant::now();
    let mut best = 0.0f64;
    let mut best_mode = 0usize;
    let mut best_vertex = 0usize;
    for (i, a) in set.matrices().iter().enumerate() {
        for (j, v) in p.vertices.iter().enumerate() {
            let image = a.matvec(v)?;
            let g = gauge(p, &image)?;
            if g > best {
                best = g;
                best_mode = i + 1;
                best_vertex = j;
            }
        }
    }
    Ok(BoundReport::new(
        best,
        BoundKind::CertifiedUpper,
        "polytope-vertex-max",
        start.elapsed().as_secs_f64(),
    )
    .with("vertex_count", p.vertex_count())
    .with("achieving_mode", best_mode)
    .with("achieving_vertex", best_vertex))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matset::{benchmark_sigma2, Matrix};
    use crate::neural::{sample_sphere, NetworkParams};
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!(
            (a - b).abs() <= tol,
            "expected {a} and {b} to agree within {tol}"
        );
    }

    fn cross_polytope2() -> PolytopeNorm {
        PolytopeNorm::new(
            2,
            vec![
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0],
            ],
        )
        .unwrap()
    }

    fn square2() -> PolytopeNorm {
        PolytopeNorm::new(
            2,
            vec![
                vec![1.0, 1.0],
                vec![1.0, -1.0],
                vec![-1.0, 1.0],
                vec![-1.0, -1.0],
            ],
        )
        .unwrap()
    }

    fn fixture_result(params: NetworkParams) -> TrainResult {
        TrainResult {
            seed: 0,
            best_loss: f64::NAN,
            best_params: params,
            trace: vec![],
            events: vec![],
        }
    }

    // ---- 2D geometric oracles -------------------------------------------

    /// Monotone-chain convex hull, counter-clockwise, no duplicates.
    fn hull2d(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        let cross =
            |o: (f64, f64), a: (f64, f64), b: (f64, f64)| -> f64 {
                (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
            };
        let mut lower: Vec<(f64, f64)> = Vec::new();
        for &p in &pts {
            while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0
            {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<(f64, f64)> = Vec::new();
        for &p in pts.iter().rev() {
            while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0
            {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        lower.into_iter().map(|(x, y)| vec![x, y]).collect()
    }

    /// Gauge by intersecting the ray through x with every hull edge: the
    /// crossing at alpha * x gives gauge = 1/alpha.
    fn gauge_ray_oracle(vertices: &[Vec<f64>], x: &[f64]) -> f64 {
        let hull = hull2d(vertices);
        let k = hull.len();
        let mut best_alpha = 0.0f64;
        for i in 0..k {
            let p = &hull[i];
            let q = &hull[(i + 1) % k];
            // Solve alpha * x = p + s (q - p) as a 2x2 system in (alpha, s).
            let a11 = x[0];
            let a12 = p[0] - q[0];
            let a21 = x[1];
            let a22 = p[1] - q[1];
            let det = a11 * a22 - a12 * a21;
            if det.abs() < 1e-14 {
                continue;
            }
            let alpha = (p[0] * a22 - p[1] * a12) / det;
            let s = (a11 * p[1] - a21 * p[0]) / det;
            if alpha > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s) {
                best_alpha = best_alpha.max(alpha);
            }
        }
        assert!(best_alpha > 0.0, "ray missed the hull boundary");
        1.0 / best_alpha
    }

    fn random_symmetric_polytope(seed: u64, points: usize) -> PolytopeNorm {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half: Vec<Vec<f64>> = (0..points)
            .map(|_| {
                let x: f64 = rng.sample(StandardNormal);
                let y: f64 = rng.sample(StandardNormal);
                // Keep points away from the origin so the hull is fat.
                let norm = (x * x + y * y).sqrt().max(0.3);
                vec![x / norm * (0.5 + x.abs()), y / norm * (0.5 + y.abs())]
            })
            .collect();
        PolytopeNorm::symmetrized(2, half).unwrap()
    }

    // ---- LP solver -------------------------------------------------------

    #[test]
    fn lp_axis_target_picks_matching_vertex() {
        let vertices = cross_polytope2().vertices().to_vec();
        let problem = GaugeLPProblem::new(&vertices, &[1.0, 0.0]).unwrap();
        let (lambda, theta) = solve_lp(&problem).unwrap();
        assert_close(lambda, 1.0, 1e-9);
        assert_close(theta[0], 1.0, 1e-9);
        assert!(theta[1..].iter().all(|&t| t.abs() <= 1e-9));

        let problem = GaugeLPProblem::new(&vertices, &[0.5, 0.0]).unwrap();
        let (lambda, _) = solve_lp(&problem).unwrap();
        assert_close(lambda, 0.5, 1e-9);
    }

    #[test]
    fn lp_detects_infeasibility_outside_span() {
        // Vertices confined to the xy-plane of R^3 cannot reach e3.
        let vertices = vec![
            vec![1.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, -1.0, 0.0],
        ];
        let problem = GaugeLPProblem::new(&vertices, &[0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(solve_lp(&problem), Err(Error::Infeasible)));
    }

    /// Brute-force oracle: enumerate every basis, keep feasible ones, take
    /// the best objective. Valid because an optimum of a feasible bounded
    /// LP is attained at a basic feasible solution.
    fn lp_bruteforce_oracle(vertices: &[Vec<f64>], target: &[f64]) -> Option<f64> {
        let n = target.len();
        let m = vertices.len();
        let mut best: Option<f64> = None;
        let mut combo: Vec<usize> = (0..n).collect();
        loop {
            // Solve the n x n system restricted to `combo`.
            let mut a: Vec<Vec<f64>> = (0..n)
                .map(|i| combo.iter().map(|&j| vertices[j][i]).collect())
                .collect();
            let mut b = target.to_vec();
            let mut ok = true;
            for col in 0..n {
                let piv = (col..n).max_by(|&r, &s| {
                    a[r][col].abs().partial_cmp(&a[s][col].abs()).unwrap()
                });
                let piv = piv.unwrap();
                if a[piv][col].abs() < 1e-12 {
                    ok = false;
                    break;
                }
                a.swap(col, piv);
                b.swap(col, piv);
                for r in (col + 1)..n {
                    let f = a[r][col] / a[col][col];
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
            if ok {
                let mut theta = vec![0.0; n];
                for r in (0..n).rev() {
                    let mut s = b[r];
                    for c in (r + 1)..n {
                        s -= a[r][c] * theta[c];
                    }
                    theta[r] = s / a[r][r];
                }
                if theta.iter().all(|&t| t >= -1e-9) {
                    let obj: f64 = theta.iter().map(|t| t.max(0.0)).sum();
                    best = Some(best.map_or(obj, |b: f64| b.min(obj)));
                }
            }
            // Next combination.
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if combo[i] != i + m - n {
                    combo[i] += 1;
                    for k in (i + 1)..n {
                        combo[k] = combo[k - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn lp_matches_basis_enumeration_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut solved = 0;
        while solved < 200 {
            let n = 2 + (rng.gen::<u64>() % 2) as usize; // 2 or 3
            let m = n + 2 + (rng.gen::<u64>() % 4) as usize; // up to 8ish
            let vertices: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                .collect();
            // Feasible by construction: target is a nonnegative combination.
            let weights: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
            let mut target = vec![0.0; n];
            for (w, v) in weights.iter().zip(&vertices) {
                for (t, x) in target.iter_mut().zip(v) {
                    *t += w * x;
                }
            }
            let problem = GaugeLPProblem::new(&vertices, &target).unwrap();
            let (lambda, theta) = solve_lp(&problem).unwrap();
            let oracle = lp_bruteforce_oracle(&vertices, &target)
                .expect("constructed problem must be feasible");
            assert_close(lambda, oracle, 1e-9 * (1.0 + oracle.abs()));
            // The reported coefficients must reproduce the target.
            for i in 0..n {
                let got: f64 = theta.iter().zip(&vertices).map(|(t, v)| t * v[i]).sum();
                assert_close(got, target[i], 1e-8 * (1.0 + target[i].abs()));
            }
            solved += 1;
        }
    }

    // ---- Gauge -----------------------------------------------------------

    #[test]
    fn gauge_square_boundary_point() {
        let p = square2();
        assert_close(gauge(&p, &[2.0, 0.0]).unwrap(), 2.0, 1e-9);
        assert_close(gauge(&p, &[1.0, 1.0]).unwrap(), 1.0, 1e-9);
        assert_eq!(gauge(&p, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn gauge_matches_ray_intersection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        let mut poly_seed = 0u64;
        while checked < 1000 {
            let p = random_symmetric_polytope(poly_seed, 3 + (poly_seed % 5) as usize);
            poly_seed += 1;
            if !interior_check(&p) {
                continue;
            }
            for _ in 0..25 {
                let x = [
                    rng.sample::<f64, _>(StandardNormal) * 2.0,
                    rng.sample::<f64, _>(StandardNormal) * 2.0,
                ];
                if x[0].abs() + x[1].abs() < 1e-6 {
                    continue;
                }
                let got = gauge(&p, &x).unwrap();
                let expect = gauge_ray_oracle(p.vertices(), &x);
                assert_close(got, expect, 1e-9 * (1.0 + expect));
                checked += 1;
            }
        }
    }

    #[test]
    fn gauge_of_every_vertex_at_most_one() {
        for seed in 0..20 {
            let p = random_symmetric_polytope(seed, 6);
            if !interior_check(&p) {
                continue;
            }
            for v in p.vertices() {
                assert!(gauge(&p, v).unwrap() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn gauge_unreachable_direction_errors() {
        // Segment on the x-axis: e2 has infinite gauge.
        let p = PolytopeNorm::new(2, vec![vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        assert!(matches!(
            gauge(&p, &[0.0, 1.0]),
            Err(Error::UnboundedDirection)
        ));
    }

    #[test]
    fn interior_check_cases() {
        assert!(interior_check(&cross_polytope2()));
        assert!(interior_check(&square2()));
        let line = PolytopeNorm::new(
            2,
            vec![vec![1.0, 1.0], vec![-1.0, -1.0], vec![2.0, 2.0], vec![-2.0, -2.0]],
        )
        .unwrap();
        assert!(!interior_check(&line));
    }

    #[test]
    fn interior_holds_for_generic_symmetrized_samples() {
        // n+1 or more generic directions plus negations span the plane.
        for seed in 100..120 {
            let samples = sample_sphere(2, 3, seed).unwrap();
            let p = PolytopeNorm::symmetrized(2, samples.points().to_vec()).unwrap();
            assert!(interior_check(&p), "seed {seed}");
            // Cross-check interiority with the hull oracle: the origin is
            // interior iff every hull edge keeps it strictly on one side.
            let hull = hull2d(p.vertices());
            let k = hull.len();
            for i in 0..k {
                let a = &hull[i];
                let b = &hull[(i + 1) % k];
                let side = (b[0] - a[0]) * (-a[1]) - (b[1] - a[1]) * (-a[0]);
                assert!(side > 0.0, "origin not strictly inside hull, seed {seed}");
            }
        }
    }

    #[test]
    fn redundant_interior_vertex_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for seed in 0..10 {
            let p = random_symmetric_polytope(seed, 5);
            if !interior_check(&p) {
                continue;
            }
            // A point strictly inside the unit ball, added with its twin.
            let dir = [
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            ];
            let g = gauge(&p, &dir).unwrap();
            if g <= 1e-9 {
                continue;
            }
            let interior: Vec<f64> = dir.iter().map(|v| 0.5 * v / g).collect();
            let mut vertices = p.vertices().to_vec();
            vertices.push(interior.clone());
            vertices.push(interior.iter().map(|v| -v).collect());
            let q = PolytopeNorm::new(2, vertices).unwrap();
            for probe_seed in 0..10u64 {
                let mut pr = ChaCha8Rng::seed_from_u64(1000 + probe_seed);
                let x = [
                    pr.sample::<f64, _>(StandardNormal),
                    pr.sample::<f64, _>(StandardNormal),
                ];
                let before = gauge(&p, &x).unwrap();
                let after = gauge(&q, &x).unwrap();
                assert_close(before, after, 1e-9 * (1.0 + before));
            }
        }
    }

    // ---- Build from training output ---------------------------------------

    #[test]
    fn build_axis_samples_gives_cross_polytope() {
        // The l1-norm network evaluates to 1 on the four axis points, so
        // the vertices are exactly the (duplicated) axis points.
        let params = NetworkParams::l1_norm_network(2).unwrap();
        let samples = SampleSet::new(
            2,
            vec![
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0],
            ],
        )
        .unwrap();
        let (p, dropped) =
            build_polytope_norm_detailed(&fixture_result(params), &samples, 1e-3).unwrap();
        assert_eq!(dropped, 0);
        assert_eq!(p.vertex_count(), 8);
        for v in p.vertices() {
            let norm1: f64 = v.iter().map(|t| t.abs()).sum();
            assert_close(norm1, 1.0, 1e-12);
            assert!(v.iter().any(|t| t.abs() <= 1e-12), "axis-aligned vertex");
        }
        // Doubling V halves the vertex radius.
        let mut scaled = NetworkParams::l1_norm_network(2).unwrap();
        scaled.scale_output(2.0);
        let (p2, _) =
            build_polytope_norm_detailed(&fixture_result(scaled), &samples, 1e-3).unwrap();
        for v in p2.vertices() {
            let norm1: f64 = v.iter().map(|t| t.abs()).sum();
            assert_close(norm1, 0.5, 1e-12);
        }
    }

    #[test]
    fn gauge_reproduces_network_on_samples() {
        // When V is itself a norm, the scaled samples all sit on its unit
        // sphere; the hull is contained in that ball, so none of them can
        // end up strictly interior and the gauge agrees with V exactly.
        let params = NetworkParams::l1_norm_network(2).unwrap();
        let samples = sample_sphere(2, 60, 3).unwrap();
        let result = fixture_result(params);
        let (p, dropped) = build_polytope_norm_detailed(&result, &samples, 1e-3).unwrap();
        assert_eq!(dropped, 0);
        assert!(interior_check(&p));
        for x in samples.points() {
            let v = result.best_params.forward(x).unwrap();
            let g = gauge(&p, x).unwrap();
            assert!(
                (g - v).abs() <= 1e-6 * v,
                "gauge {g} vs network value {v}"
            );
        }
    }

    #[test]
    fn gauge_never_exceeds_network_on_samples() {
        // For a general network the scaled sample is only guaranteed to be
        // inside the ball, so the gauge is dominated by V.
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let params = NetworkParams::init(2, 1, 12, &mut rng).unwrap();
        let samples = sample_sphere(2, 60, 3).unwrap();
        let result = fixture_result(params);
        let (p, _) = build_polytope_norm_detailed(&result, &samples, 1e-3).unwrap();
        assert!(interior_check(&p));
        for x in samples.points() {
            let v = result.best_params.forward(x).unwrap();
            if v < 1e-3 {
                continue; // dropped during the build
            }
            let g = gauge(&p, x).unwrap();
            assert!(g <= v * (1.0 + 1e-6), "gauge {g} above network value {v}");
        }
    }

    #[test]
    fn build_fails_when_every_sample_degenerate() {
        // Zero output row: V identically zero.
        let params: NetworkParams = serde_json::from_value(serde_json::json!({
            "hidden": [{"out_dim": 2, "in_dim": 2, "w": [1.0, 0.0, 0.0, 1.0]}],
            "output": [0.0, 0.0],
        }))
        .unwrap();
        let samples = sample_sphere(2, 10, 1).unwrap();
        match build_polytope_norm(&fixture_result(params), &samples, 1e-3) {
            Err(Error::AllSamplesDegenerate(k)) => assert_eq!(k, 10),
            other => panic!("expected all-degenerate error, got {other:?}"),
        }
    }

    // ---- Certified bound ---------------------------------------------------

    #[test]
    fn certified_bound_identity_and_scaling() {
        let p = cross_polytope2();
        let id = MatrixSet::new(vec![Matrix::identity(2)]).unwrap();
        let report = certified_bound(&p, &id).unwrap();
        assert_close(report.value, 1.0, 1e-9);
        assert_eq!(report.kind, BoundKind::CertifiedUpper);

        for c in [0.25, 3.5] {
            let set = MatrixSet::new(vec![Matrix::diag(&[c, c]).unwrap()]).unwrap();
            let report = certified_bound(&square2(), &set).unwrap();
            assert_close(report.value, c, 1e-9);
        }
    }

    #[test]
    fn certified_bound_dominates_product_lower_bound() {
        let set = benchmark_sigma2();
        let samples = sample_sphere(2, 100, 9).unwrap();
        let params = NetworkParams::l1_norm_network(2).unwrap();
        let (p, _) = build_polytope_norm_detailed(&fixture_result(params), &samples, 1e-3).unwrap();
        let upper = certified_bound(&p, &set).unwrap().value;
        let lower = crate::bounds::lower_bound_products(&set, 6).unwrap().value;
        assert!(
            upper >= lower - 1e-6,
            "certified upper {upper} below product lower bound {lower}"
        );
    }

    #[test]
    fn certified_bound_matches_dense_boundary_scan_in_2d() {
        let set = benchmark_sigma2();
        let p = random_symmetric_polytope(3, 6);
        assert!(interior_check(&p));
        let certified = certified_bound(&p, &set).unwrap().value;
        // Max of gauge(Ax)/gauge(x) over vertices plus a dense sweep of
        // boundary directions; convexity says the vertices dominate.
        let mut dense = 0.0f64;
        let mut probes: Vec<Vec<f64>> = p.vertices().to_vec();
        for k in 0..4000 {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / 4000.0;
            probes.push(vec![angle.cos(), angle.sin()]);
        }
        for x in &probes {
            let gx = gauge(&p, x).unwrap();
            if gx < 1e-12 {
                continue;
            }
            for a in set.matrices() {
                let y = a.matvec(x).unwrap();
                dense = dense.max(gauge(&p, &y).unwrap() / gx);
            }
        }
        assert!(dense <= certified + 1e-9, "a probe beat the vertex max");
        assert!(dense >= certified - 1e-3, "vertex max unreachable");
    }

    #[test]
    fn certified_bound_rejects_degenerate_polytope() {
        let line = PolytopeNorm::new(2, vec![vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let set = benchmark_sigma2();
        assert!(certified_bound(&line, &set).is_err());
    }

    // ---- Serialization ------------------------------------------------------

    #[test]
    fn polytope_json_roundtrip_and_validation() {
        let p = random_symmetric_polytope(11, 5);
        let json = serde_json::to_string(&p).unwrap();
        let back: PolytopeNorm = serde_json::from_str(&json).unwrap();
        assert_eq!(p.dim(), back.dim());
        assert_eq!(p.vertices(), back.vertices());

        // Asymmetric vertex lists must be rejected on read.
        let bad = r#"{"n": 2, "vertices": [[1.0, 0.0], [0.0, 1.0]]}"#;
        assert!(serde_json::from_str::<PolytopeNorm>(bad).is_err());
    }

    // ---- Property tests ------------------------------------------------------

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn gauge_absolutely_homogeneous(
            seed in 0u64..200,
            c in -3.0f64..3.0,
            x0 in -2.0f64..2.0,
            x1 in -2.0f64..2.0,
        ) {
            prop_assume!(c.abs() > 1e-3);
            prop_assume!(x0.abs() + x1.abs() > 1e-3);
            let p = random_symmetric_polytope(seed, 5);
            prop_assume!(interior_check(&p));
            let base = gauge(&p, &[x0, x1]).unwrap();
            let scaled = gauge(&p, &[c * x0, c * x1]).unwrap();
            prop_assert!((scaled - c.abs() * base).abs() <= 1e-9 * (1.0 + scaled));
        }

        #[test]
        fn gauge_triangle_inequality(
            seed in 0u64..200,
            x0 in -2.0f64..2.0,
            x1 in -2.0f64..2.0,
            y0 in -2.0f64..2.0,
            y1 in -2.0f64..2.0,
        ) {
            let p = random_symmetric_polytope(seed, 5);
            prop_assume!(interior_check(&p));
            let gx = gauge(&p, &[x0, x1]).unwrap();
            let gy = gauge(&p, &[y0, y1]).unwrap();
            let gsum = gauge(&p, &[x0 + y0, x1 + y1]).unwrap();
            prop_assert!(gsum <= gx + gy + 1e-9);
        }

        #[test]
        fn certified_bound_sound_for_random_pairs(
            seed in 0u64..100,
            scale in 0.2f64..2.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m1 = Matrix::from_row_major(2, (0..4).map(|_| {
                rng.sample::<f64, _>(StandardNormal) * scale
            }).collect()).unwrap();
            let m2 = Matrix::from_row_major(2, (0..4).map(|_| {
                rng.sample::<f64, _>(StandardNormal) * scale
            }).collect()).unwrap();
            let set = MatrixSet::new(vec![m1, m2]).unwrap();
            let p = random_symmetric_polytope(seed + 5000, 6);
            prop_assume!(interior_check(&p));
            let upper = certified_bound(&p, &set).unwrap().value;
            let lower = crate::bounds::lower_bound_products(&set, 4).unwrap().value;
            prop_assert!(upper >= lower - 1e-6);
        }
    }
}
