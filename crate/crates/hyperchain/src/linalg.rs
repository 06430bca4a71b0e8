//! Shared dense linear-algebra helpers: SVD-based linear solving with kernel
//! extraction, eigenvalue utilities, and a small simplex solver for the tiny
//! linear programs that show up when describing equilibrium continua.

use nalgebra::{Complex, DMatrix, DVector};

/// Relative singular-value cutoff for numeric rank decisions: singular values
/// at or below `RANK_REL_TOL * sigma_max` count as zero.
pub const RANK_REL_TOL: f64 = 1e-10;

/// Numeric rank with the crate-wide relative singular value cutoff.
pub fn svd_rank(m: &DMatrix<f64>) -> usize {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return 0;
    }
    svd.singular_values.iter().filter(|&&s| s > RANK_REL_TOL * smax).count()
}

/// Outcome of an SVD least-squares solve of `A x = b`.
pub struct LinearSolution {
    /// Minimum-norm least-squares solution.
    pub particular: DVector<f64>,
    /// Orthonormal basis of the numeric kernel of `A`.
    pub kernel: Vec<DVector<f64>>,
    /// `‖A x − b‖∞` at the particular solution.
    pub residual: f64,
    /// Numeric rank of `A`.
    pub rank: usize,
}

/// Solves `A x = b` in the least-squares sense and reports the kernel, using
/// the crate-wide rank cutoff.
pub fn solve_with_kernel(a: &DMatrix<f64>, b: &DVector<f64>) -> LinearSolution {
    let n = a.ncols();
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = if smax == 0.0 { 0.0 } else { RANK_REL_TOL * smax };
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    // Minimum-norm solution: V Σ⁺ Uᵀ b, truncating σ ≤ cutoff.
    let utb = u.transpose() * b;
    let mut scaled = DVector::zeros(svd.singular_values.len());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            scaled[i] = utb[i] / s;
        }
    }
    let particular = v_t.transpose() * scaled;
    let mut kernel = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff {
            kernel.push(v_t.row(i).transpose());
        }
    }
    // A wide SVD exposes at most min(m, n) right singular vectors; any extra
    // kernel directions of a rank-deficient rectangular system would need a
    // full decomposition, which nalgebra's thin SVD does not provide.  All
    // callers here pass square or tall matrices, where the thin V is complete.
    debug_assert!(kernel.len() == n - rank);
    let residual = (a * &particular - b).amax();
    LinearSolution { particular, kernel, residual, rank }
}

/// Eigenvalues of a real square matrix via its real Schur form, sorted by
/// `(Re, Im)` lexicographically.
///
/// The QR iteration can stall on matrices whose spectrum is perfectly
/// symmetric around a circle (permutation matrices of cycles, for example),
/// so a bounded iteration count is used and, on failure, the matrix is
/// conjugated by a fixed orthogonal rotation — which preserves the spectrum
/// but breaks the symmetric configuration — and the iteration retried.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let n = m.nrows();
    assert_eq!(m.ncols(), n, "eigenvalues need a square matrix");
    if n == 0 {
        return Vec::new();
    }
    for attempt in 0..8 {
        let target = if attempt == 0 {
            m.clone()
        } else {
            let q = scrambling_rotation(n, attempt);
            q.transpose() * m * &q
        };
        if let Some(schur) = target.try_schur(f64::EPSILON, 300 * n.max(10)) {
            let mut eig: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
            sort_complex(&mut eig);
            return eig;
        }
    }
    unreachable!("eigenvalue iteration failed on every conjugated form");
}

/// A deterministic orthogonal matrix built from Givens rotations with
/// incommensurate angles; used to nudge stalled eigenvalue iterations.
fn scrambling_rotation(n: usize, attempt: usize) -> DMatrix<f64> {
    let mut q = DMatrix::identity(n, n);
    for i in 0..n - 1 {
        let theta = 0.5236 * attempt as f64 + 0.7853 * (i + 1) as f64;
        let (s, c) = theta.sin_cos();
        let mut g = DMatrix::identity(n, n);
        g[(i, i)] = c;
        g[(i, i + 1)] = -s;
        g[(i + 1, i)] = s;
        g[(i + 1, i + 1)] = c;
        q = q * g;
    }
    q
}

/// Sorts complex values by `(Re, Im)` lexicographically.
pub fn sort_complex(values: &mut [Complex<f64>]) {
    values.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Largest absolute difference between two sorted complex multisets paired
/// element by element; `∞` when lengths differ.
pub fn spectrum_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    sort_complex(&mut xs);
    sort_complex(&mut ys);
    xs.iter()
        .zip(&ys)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Result of a small linear program.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    /// Maximiser and objective value.
    Optimal(DVector<f64>, f64),
    Unbounded,
    Infeasible,
}

/// Maximises `cᵀx` subject to `A x ≤ b` with `x` free, via a dense two-phase
/// simplex method with Bland's rule.  Intended for the tiny problems arising
/// from equilibrium continua (a handful of variables and constraints).
pub fn linprog_max(c: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> LpOutcome {
    let nvar = c.len();
    let ncon = a.nrows();
    assert_eq!(a.ncols(), nvar);
    assert_eq!(b.len(), ncon);

    // Standard form: free x = p − q with p, q ≥ 0, one slack per constraint.
    let cols = 2 * nvar + ncon;
    let mut tab = DMatrix::zeros(ncon, cols);
    let mut rhs = DVector::zeros(ncon);
    for i in 0..ncon {
        for j in 0..nvar {
            tab[(i, j)] = a[(i, j)];
            tab[(i, nvar + j)] = -a[(i, j)];
        }
        tab[(i, 2 * nvar + i)] = 1.0;
        rhs[i] = b[i];
        if rhs[i] < 0.0 {
            for j in 0..cols {
                tab[(i, j)] = -tab[(i, j)];
            }
            rhs[i] = -rhs[i];
        }
    }
    let mut obj = DVector::zeros(cols);
    for j in 0..nvar {
        obj[j] = c[j];
        obj[nvar + j] = -c[j];
    }

    // Phase 1: drive artificial variables out of the basis.
    let total = cols + ncon;
    let mut full = DMatrix::zeros(ncon, total);
    full.view_mut((0, 0), (ncon, cols)).copy_from(&tab);
    for i in 0..ncon {
        full[(i, cols + i)] = 1.0;
    }
    let mut basis: Vec<usize> = (cols..total).collect();
    let mut phase1 = DVector::zeros(total);
    for j in cols..total {
        phase1[j] = -1.0;
    }
    let feasible = simplex_core(&mut full, &mut rhs, &mut basis, &phase1, cols);
    match feasible {
        SimplexEnd::Optimal(v) if v > -1e-9 => {}
        SimplexEnd::Optimal(_) => return LpOutcome::Infeasible,
        SimplexEnd::Unbounded => unreachable!("phase-1 objective is bounded"),
    }
    // Pivot any lingering artificial variables out, dropping redundant rows'
    // influence by leaving them basic at zero only if no pivot exists.
    for i in 0..ncon {
        if basis[i] >= cols {
            if let Some(j) = (0..cols).find(|&j| full[(i, j)].abs() > 1e-9) {
                pivot(&mut full, &mut rhs, &mut basis, i, j);
            }
        }
    }

    // Phase 2 on the original objective, ignoring artificial columns.
    let mut phase2 = DVector::zeros(total);
    for j in 0..cols {
        phase2[j] = obj[j];
    }
    match simplex_core(&mut full, &mut rhs, &mut basis, &phase2, cols) {
        SimplexEnd::Unbounded => LpOutcome::Unbounded,
        SimplexEnd::Optimal(value) => {
            let mut x = DVector::zeros(nvar);
            for (row, &col) in basis.iter().enumerate() {
                if col < nvar {
                    x[col] += rhs[row];
                } else if col < 2 * nvar {
                    x[col - nvar] -= rhs[row];
                }
            }
            LpOutcome::Optimal(x, value)
        }
    }
}

enum SimplexEnd {
    Optimal(f64),
    Unbounded,
}

/// Revised-tableau simplex iteration with Bland's rule.  Columns `>= limit`
/// (artificial variables) are never chosen as entering columns.
fn simplex_core(
    tab: &mut DMatrix<f64>,
    rhs: &mut DVector<f64>,
    basis: &mut [usize],
    obj: &DVector<f64>,
    limit: usize,
) -> SimplexEnd {
    let ncon = tab.nrows();
    loop {
        // Reduced costs: c_j − c_Bᵀ B⁻¹ A_j; the tableau is kept in B⁻¹A form.
        let mut entering = None;
        for j in 0..limit {
            if basis.contains(&j) {
                continue;
            }
            let mut reduced = obj[j];
            for i in 0..ncon {
                reduced -= obj[basis[i]] * tab[(i, j)];
            }
            if reduced > 1e-9 {
                entering = Some(j);
                break;
            }
        }
        let Some(col) = entering else {
            let mut value = 0.0;
            for i in 0..ncon {
                value += obj[basis[i]] * rhs[i];
            }
            return SimplexEnd::Optimal(value);
        };
        let mut leaving: Option<(usize, f64)> = None;
        for i in 0..ncon {
            if tab[(i, col)] > 1e-12 {
                let ratio = rhs[i] / tab[(i, col)];
                match leaving {
                    Some((r, best)) => {
                        if ratio < best - 1e-12
                            || (ratio < best + 1e-12 && basis[i] < basis[r])
                        {
                            leaving = Some((i, ratio));
                        }
                    }
                    None => leaving = Some((i, ratio)),
                }
            }
        }
        let Some((row, _)) = leaving else {
            return SimplexEnd::Unbounded;
        };
        pivot(tab, rhs, basis, row, col);
    }
}

fn pivot(
    tab: &mut DMatrix<f64>,
    rhs: &mut DVector<f64>,
    basis: &mut [usize],
    row: usize,
    col: usize,
) {
    let p = tab[(row, col)];
    for j in 0..tab.ncols() {
        tab[(row, j)] /= p;
    }
    rhs[row] /= p;
    for i in 0..tab.nrows() {
        if i != row {
            let f = tab[(i, col)];
            if f != 0.0 {
                for j in 0..tab.ncols() {
                    tab[(i, j)] -= f * tab[(row, j)];
                }
                rhs[i] -= f * rhs[row];
            }
        }
    }
    basis[row] = col;
}

/// Maximises the smallest coordinate of `base + Σ tₖ dirs[k]` over the
/// coefficients `t`, capping the objective at `cap` to keep the program
/// bounded.  Returns the coefficients and the achieved minimum.
pub fn maximize_min_coordinate(
    base: &DVector<f64>,
    dirs: &[DVector<f64>],
    cap: f64,
) -> (DVector<f64>, f64) {
    let n = base.len();
    let d = dirs.len();
    // Variables (t₁..t_d, δ): maximise δ s.t. δ − (base + Σ t·dir)_i ≤ 0, δ ≤ cap.
    let mut a = DMatrix::zeros(n + 1, d + 1);
    let mut b = DVector::zeros(n + 1);
    for i in 0..n {
        for (k, dir) in dirs.iter().enumerate() {
            a[(i, k)] = -dir[i];
        }
        a[(i, d)] = 1.0;
        b[i] = base[i];
    }
    a[(n, d)] = 1.0;
    b[n] = cap;
    let c = DVector::from_fn(d + 1, |j, _| if j == d { 1.0 } else { 0.0 });
    match linprog_max(&c, &a, &b) {
        LpOutcome::Optimal(x, value) => (x.rows(0, d).into_owned(), value),
        // δ → −∞ is always feasible and the objective is capped, so the
        // program has an optimum; keep a conservative fallback anyway.
        _ => (DVector::zeros(d), base.min()),
    }
}

/// Extent of the segment `{base + t·dir ≥ 0}` as `(t_min, t_max)`; entries are
/// `±∞` when unconstrained on that side.
pub fn ray_bounds(base: &DVector<f64>, dir: &DVector<f64>) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..base.len() {
        let d = dir[i];
        if d.abs() < 1e-14 {
            continue;
        }
        let t = -base[i] / d;
        if d > 0.0 {
            lo = lo.max(t);
        } else {
            hi = hi.min(t);
        }
    }
    (lo, hi)
}
