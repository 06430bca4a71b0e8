//! Linear stability of equilibria of the relative dynamics.
//!
//! At a positive equilibrium `z` the Jacobian of `g(x) = x ∘ (Kᵀx − ρ̄𝟙)`
//! reduces to a rank-one update of `M = diag(z)Kᵀ`: since `z` is an
//! eigenvector of `M` with eigenvalue `λ₁ = zᵀKz`, the update moves that
//! eigenvalue to `−λ₁` and leaves the other `n − 1` untouched.  Those
//! remaining eigenvalues govern stability on the simplex; this module computes
//! them, classifies equilibria in the interior and on boundary faces, and
//! exposes the Jacobian itself for cross-checking.

use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

use crate::graph::InducedSystem;
use crate::linalg;
use crate::HyperchainSystem;

/// Relative tolerance for calling an eigenvalue's real part zero, scaled by
/// `max(1, spectral radius)`.  Wide enough to absorb the `√ε` noise the QR
/// iteration leaves on defective double zero eigenvalues, which appear
/// whenever the rate matrix is singular with a nontrivial Jordan block.
pub const EIGEN_SIGN_TOL: f64 = 1e-7;

/// Relative tolerance for locating the mean-rate eigenvalue inside the
/// spectrum of `diag(z)Kᵀ`, scaled by `max(1, |λ₁|)`.
pub const LAMBDA1_MATCH_TOL: f64 = 1e-8;

/// Relative tolerance for accepting `(λ, v)` as an eigenpair.
pub const EIGENPAIR_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("state dimension {got} does not match system size {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    /// No eigenvalue of the scaled rate matrix matches the mean rate, which
    /// means the supplied point is not an equilibrium to working precision.
    #[error(
        "no eigenvalue within {tol:e} of the mean rate {lambda1}; nearest is {distance:e} away"
    )]
    Lambda1NotFound { lambda1: f64, distance: f64, tol: f64 },
    #[error("not an eigenpair: ‖Av − λv‖∞ = {residual:e}")]
    NotAnEigenpair { residual: f64 },
    #[error("rate matrix is singular, so the scaled candidate is undefined")]
    SingularRates,
    #[error("support {0:?} is not a proper, sorted, in-range face")]
    BadSupport(Vec<usize>),
    #[error("the face on {0:?} induces a degenerate subsystem")]
    DegenerateFace(Vec<usize>),
    #[error("point carries mass off its face: coordinate {species} = {value:e}")]
    OffSupportMass { species: usize, value: f64 },
}

/// Verdict of a linearization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum StabilityClass {
    /// All simplex-tangent eigenvalues have strictly negative real part at an
    /// interior equilibrium.
    LinearlyStable,
    /// A boundary equilibrium whose face eigenvalues and transverse growth
    /// rates are all strictly negative.
    ExponentiallyStable,
    /// Some eigenvalue or transverse rate has strictly positive real part.
    Unstable,
    /// No strictly positive part, but at least one vanishes to working
    /// precision; linearization alone decides nothing further.
    Marginal,
}

/// Jacobian `Dg(x)` of the relative dynamics at an arbitrary state:
/// `diag(Kᵀx − ρ̄𝟙) + diag(x)Kᵀ − x·((K + Kᵀ)x)ᵀ`.
pub fn jacobian(
    sys: &HyperchainSystem,
    x: &DVector<f64>,
) -> Result<DMatrix<f64>, StabilityError> {
    let n = sys.n();
    if x.len() != n {
        return Err(StabilityError::DimensionMismatch { expected: n, got: x.len() });
    }
    let k = sys.k();
    let f = k.tr_mul(x);
    let rho = x.dot(&f);
    let w = k * x + &f;
    let mut dg = DMatrix::from_fn(n, n, |i, j| x[i] * k[(j, i)]);
    for i in 0..n {
        dg[(i, i)] += f[i] - rho;
    }
    dg -= x * w.transpose();
    Ok(dg)
}

/// Spectrum of the linearization at a positive equilibrium, split into the
/// mean rate and the `n − 1` eigenvalues that decide stability.
#[derive(Debug, Clone)]
pub struct EquilibriumSpectrum {
    /// Mean rate `λ₁ = zᵀKz` at the equilibrium.
    pub lambda1: f64,
    /// The remaining eigenvalues of `diag(z)Kᵀ`, sorted by `(Re, Im)`; they
    /// are exactly the Jacobian eigenvalues other than `−λ₁`.
    pub secondary: Vec<Complex<f64>>,
}

impl EquilibriumSpectrum {
    /// The full Jacobian spectrum `{−λ₁} ∪ secondary`, sorted.
    pub fn jacobian_spectrum(&self) -> Vec<Complex<f64>> {
        let mut all = self.secondary.clone();
        all.push(Complex::new(-self.lambda1, 0.0));
        linalg::sort_complex(&mut all);
        all
    }

    fn radius(&self) -> f64 {
        self.secondary
            .iter()
            .map(|e| e.norm())
            .fold(self.lambda1.abs(), f64::max)
    }
}

/// Removes and returns the spectrum entry nearest to the real `target`,
/// together with its distance.
fn take_nearest(eig: &mut Vec<Complex<f64>>, target: f64) -> (Complex<f64>, f64) {
    let (idx, dist) = eig
        .iter()
        .enumerate()
        .map(|(i, e)| (i, (e - Complex::new(target, 0.0)).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty spectrum");
    (eig.remove(idx), dist)
}

/// Eigenvalues of the linearization at the positive equilibrium `z` via the
/// scaled rate matrix `diag(z)Kᵀ`.  Fails with [`StabilityError::Lambda1NotFound`]
/// when the mean rate is missing from the spectrum, which is the signature of
/// a point that is not actually an equilibrium.
pub fn equilibrium_eigenvalues(
    sys: &HyperchainSystem,
    z: &DVector<f64>,
) -> Result<EquilibriumSpectrum, StabilityError> {
    let n = sys.n();
    if z.len() != n {
        return Err(StabilityError::DimensionMismatch { expected: n, got: z.len() });
    }
    let k = sys.k();
    let m = DMatrix::from_fn(n, n, |i, j| z[i] * k[(j, i)]);
    let mut eig = linalg::eigenvalues(&m);
    let lambda1 = z.dot(&(k * z));
    let tol = LAMBDA1_MATCH_TOL * lambda1.abs().max(1.0);
    let (_, distance) = take_nearest(&mut eig, lambda1);
    if distance > tol {
        return Err(StabilityError::Lambda1NotFound { lambda1, distance, tol });
    }
    Ok(EquilibriumSpectrum { lambda1, secondary: eig })
}

fn classify(
    parts: &[Complex<f64>],
    radius: f64,
    stable: StabilityClass,
) -> StabilityClass {
    let tol = EIGEN_SIGN_TOL * radius.max(1.0);
    if parts.iter().any(|e| e.re > tol) {
        StabilityClass::Unstable
    } else if parts.iter().all(|e| e.re < -tol) {
        stable
    } else {
        StabilityClass::Marginal
    }
}

/// Classifies a positive equilibrium: linearly stable when all `n − 1`
/// secondary eigenvalues have negative real part, unstable when any is
/// positive, marginal otherwise (in particular whenever the rate matrix is
/// singular, since a zero eigenvalue then always survives).
pub fn classify_positive_stability(
    sys: &HyperchainSystem,
    z: &DVector<f64>,
) -> Result<StabilityClass, StabilityError> {
    let spec = equilibrium_eigenvalues(sys, z)?;
    Ok(classify(&spec.secondary, spec.radius(), StabilityClass::LinearlyStable))
}

/// Spectrum of `A + v·cᵀ` from the spectrum of `A` and an eigenpair `(λ, v)`:
/// the paired eigenvalue moves to `λ + cᵀv`, every other one stays.
pub fn rank_one_eigen_update(
    a: &DMatrix<f64>,
    lambda: f64,
    v: &DVector<f64>,
    c: &DVector<f64>,
) -> Result<Vec<Complex<f64>>, StabilityError> {
    let n = a.nrows();
    if a.ncols() != n || v.len() != n || c.len() != n {
        return Err(StabilityError::DimensionMismatch { expected: n, got: v.len().max(c.len()) });
    }
    let residual = (a * v - v * lambda).amax();
    let scale = a.amax().max(1.0) * v.amax().max(1e-300);
    if residual > EIGENPAIR_TOL * scale {
        return Err(StabilityError::NotAnEigenpair { residual });
    }
    let mut eig = linalg::eigenvalues(a);
    let tol = LAMBDA1_MATCH_TOL * lambda.abs().max(1.0) * a.amax().max(1.0);
    let (_, distance) = take_nearest(&mut eig, lambda);
    if distance > tol {
        return Err(StabilityError::Lambda1NotFound { lambda1: lambda, distance, tol });
    }
    eig.push(Complex::new(lambda + c.dot(v), 0.0));
    linalg::sort_complex(&mut eig);
    Ok(eig)
}

/// Sign counts of the secondary spectrum at the scaled candidate
/// `z = (Kᵀ)⁻¹𝟙`, whether or not `z` is positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct CandidateInertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

impl CandidateInertia {
    /// All secondary eigenvalues strictly in the left half-plane.
    pub fn is_stable(&self) -> bool {
        self.zero == 0 && self.positive == 0
    }
}

/// Computes the inertia of the `n − 1` secondary eigenvalues of `diag(z)Kᵀ`
/// at the raw candidate `z = (Kᵀ)⁻¹𝟙`, for which the distinguished eigenvalue
/// is exactly 1.  Rescaling `z` onto the simplex scales the whole spectrum by
/// a positive factor, so these sign counts match the equilibrium's.
pub fn candidate_inertia(sys: &HyperchainSystem) -> Result<CandidateInertia, StabilityError> {
    let n = sys.n();
    let kt = sys.k().transpose();
    let sol = linalg::solve_with_kernel(&kt, &DVector::repeat(n, 1.0));
    if !sol.kernel.is_empty() {
        return Err(StabilityError::SingularRates);
    }
    let z = sol.particular;
    let k = sys.k();
    let m = DMatrix::from_fn(n, n, |i, j| z[i] * k[(j, i)]);
    let mut eig = linalg::eigenvalues(&m);
    let tol = LAMBDA1_MATCH_TOL;
    let (_, distance) = take_nearest(&mut eig, 1.0);
    if distance > tol {
        return Err(StabilityError::Lambda1NotFound { lambda1: 1.0, distance, tol });
    }
    let radius = eig.iter().map(|e| e.norm()).fold(1.0, f64::max);
    let sign_tol = EIGEN_SIGN_TOL * radius.max(1.0);
    let mut inertia = CandidateInertia { negative: 0, zero: 0, positive: 0 };
    for e in &eig {
        if e.re > sign_tol {
            inertia.positive += 1;
        } else if e.re < -sign_tol {
            inertia.negative += 1;
        } else {
            inertia.zero += 1;
        }
    }
    Ok(inertia)
}

/// Stability report for a boundary equilibrium.
#[derive(Debug, Clone)]
pub struct BoundaryStability {
    /// 1-based support of the face, ascending.
    pub support: Vec<usize>,
    /// Off-support species with their transverse growth rates `f_i(x) − ρ̄(x)`,
    /// ascending in the species index.
    pub transverse: Vec<(usize, f64)>,
    /// Eigenvalues tangent to the face: the secondary spectrum of the induced
    /// subsystem at the face point.  Empty for vertex equilibria.
    pub face_spectrum: Vec<Complex<f64>>,
    /// Mean rate at the point; `−λ₁` is the radial Jacobian eigenvalue.
    pub lambda1: f64,
    pub classification: StabilityClass,
}

impl BoundaryStability {
    /// Full Jacobian spectrum at the embedded point:
    /// `{−λ₁} ∪ face_spectrum ∪ transverse`, sorted.
    pub fn jacobian_spectrum(&self) -> Vec<Complex<f64>> {
        let mut all = self.face_spectrum.clone();
        all.push(Complex::new(-self.lambda1, 0.0));
        all.extend(self.transverse.iter().map(|&(_, t)| Complex::new(t, 0.0)));
        linalg::sort_complex(&mut all);
        all
    }
}

/// Classifies a boundary equilibrium given its face support and the embedded
/// point (zeros off the support).  The linearization splits into eigenvalues
/// tangent to the face and one real transverse rate per missing species;
/// exponential stability needs all of them strictly negative.
pub fn boundary_stability(
    sys: &HyperchainSystem,
    support: &[usize],
    point: &DVector<f64>,
) -> Result<BoundaryStability, StabilityError> {
    let n = sys.n();
    if point.len() != n {
        return Err(StabilityError::DimensionMismatch { expected: n, got: point.len() });
    }
    let proper = !support.is_empty()
        && support.len() < n
        && support.windows(2).all(|w| w[0] < w[1])
        && support.iter().all(|&v| v >= 1 && v <= n);
    if !proper {
        return Err(StabilityError::BadSupport(support.to_vec()));
    }
    for i in 1..=n {
        if !support.contains(&i) && point[i - 1].abs() > 1e-12 {
            return Err(StabilityError::OffSupportMass { species: i, value: point[i - 1] });
        }
    }

    let f = sys.k().tr_mul(point);
    let rho = point.dot(&f);
    let transverse: Vec<(usize, f64)> = (1..=n)
        .filter(|i| !support.contains(i))
        .map(|i| (i, f[i - 1] - rho))
        .collect();

    let (lambda1, face_spectrum) = if let &[j] = support {
        (sys.k()[(j - 1, j - 1)], Vec::new())
    } else {
        match sys.induced_system(support).expect("validated support") {
            InducedSystem::Degenerate { .. } => {
                return Err(StabilityError::DegenerateFace(support.to_vec()));
            }
            InducedSystem::Proper { system, vertices } => {
                let local =
                    DVector::from_iterator(vertices.len(), vertices.iter().map(|&v| point[v - 1]));
                let spec = equilibrium_eigenvalues(&system, &local)?;
                (spec.lambda1, spec.secondary)
            }
        }
    };

    let mut parts = face_spectrum.clone();
    parts.extend(transverse.iter().map(|&(_, t)| Complex::new(t, 0.0)));
    let radius = parts.iter().map(|e| e.norm()).fold(lambda1.abs(), f64::max);
    let classification = classify(&parts, radius, StabilityClass::ExponentiallyStable);

    Ok(BoundaryStability { support: support.to_vec(), transverse, face_spectrum, lambda1, classification })
}
