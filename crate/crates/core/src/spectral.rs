//! Dense, small-scale verification of the convergence theory of the MGSS
//! iteration.
//!
//! * the spectral radius of `Γ = M^{-1} N` is estimated by power iteration
//!   and must be below one;
//! * `I - Γ` and `I + Γ` must be nonsingular (no eigenvalue at `±1`);
//! * `Re(x* A x) = r^T A r + s^T A s > 0` for complex `x = r + i s`;
//! * every eigenpair `(λ, (x; y))` with `‖x‖ = 1` satisfies
//!   `α ω + β q conj(ω) = p + r` with `ω = (1 - λ)/(1 + λ)`, `p = x* A x`,
//!   `q = y* y`, `r = y* C y`, hence `Re ω = (Re p + r)/(α + β q) > 0` and
//!   `|λ| = |1 - ω| / |1 + ω| < 1`.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::generate::generate_random;
use crate::precond::{assemble_splitting_dense, ShiftParams};
use crate::sparse::CsrMatrix;
use crate::system::{SaddlePointSystem, ValidationMode, ValidationReport};

/// Largest system for which `Γ` is formed densely.
pub const DENSE_GAMMA_CAP: usize = 1000;

/// Smallest pivot of `I ± Γ` must exceed this times `‖Γ‖_F`.
pub const PIVOT_RTOL: f64 = 1e-10;

/// Required accuracy of an eigenpair before it is certified.
pub const EIGENPAIR_RESIDUAL_TOL: f64 = 1e-8;

/// `Γ = M^{-1} N`, from one dense LU of `M` solved against all columns of `N`.
pub fn dense_iteration_matrix(sys: &SaddlePointSystem, params: ShiftParams) -> Result<DMatrix<f64>> {
    let size = sys.dim();
    if size > DENSE_GAMMA_CAP {
        return Err(Error::SizeCap { size, cap: DENSE_GAMMA_CAP });
    }
    let (m, n) = assemble_splitting_dense(sys, params)?;
    m.lu()
        .solve(&n)
        .ok_or_else(|| Error::InvalidParameter("M is singular; the system violates the hypotheses".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    /// Random complex start vectors, iterated together as one real block.
    pub starts: usize,
    pub max_steps: usize,
    /// Rayleigh-Ritz extraction every this many steps.
    pub check_every: usize,
    /// Convergence once `‖Γ v - θ v‖ <= residual_tol * ‖Γ‖_F * ‖v‖`.
    pub residual_tol: f64,
    pub seed: u64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self { starts: 20, max_steps: 1000, check_every: 5, residual_tol: 1e-11, seed: 0x5eed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    /// Dominant Ritz pair of the iterated block reached the residual tolerance.
    RayleighRitz,
    /// The iterated block was annihilated (`Γ^k V ≈ 0`): every start lies in
    /// a nilpotent invariant subspace and the radius is reported as zero.
    Collapsed,
    /// Power iteration stalled (typically a cluster of eigenvalues near the
    /// unit circle); the radius comes from the eigenvalues of a real Schur
    /// form of `Γ` and the eigenvector from inverse iteration.
    Schur,
    /// Neither stage converged; the value is the last Ritz estimate.
    Unconverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotCheck {
    pub min_pivot_minus: f64,
    pub min_pivot_plus: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub spectral_radius: f64,
    pub dominant_eigenvalue: Complex64,
    pub method: EstimateMethod,
    pub steps: usize,
    /// Relative residual of the dominant Ritz pair.
    pub ritz_residual: f64,
    pub radius_below_one: bool,
    pub pivots: PivotCheck,
}

impl SpectralReport {
    pub fn converged(&self) -> bool {
        self.method != EstimateMethod::Unconverged
    }

    /// `ρ < 1` established and `±1` excluded. An unconverged estimate never passes.
    pub fn passed(&self) -> bool {
        self.converged() && self.radius_below_one && self.pivots.passed
    }
}

#[derive(Debug, Clone)]
pub struct DominantEigenpair {
    pub lambda: Complex64,
    pub vector: DVector<Complex64>,
    /// `‖Γ v - λ v‖` with `‖v‖ = 1`.
    pub residual: f64,
}

struct PowerOutcome {
    lambda: Complex64,
    vector: Option<DVector<Complex64>>,
    method: EstimateMethod,
    steps: usize,
    residual: f64,
}

/// Orthonormalizes the columns of `w` (Gram-Schmidt, applied twice),
/// dropping columns whose remainder is at most `drop_tol`.
fn orthonormalize(w: &DMatrix<f64>, drop_tol: f64) -> DMatrix<f64> {
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(w.ncols());
    for j in 0..w.ncols() {
        let mut v = w.column(j).into_owned();
        for _ in 0..2 {
            for q in &cols {
                let h = q.dot(&v);
                v.axpy(-h, q, 1.0);
            }
        }
        let nv = v.norm();
        if nv > drop_tol {
            cols.push(v / nv);
        }
    }
    if cols.is_empty() {
        DMatrix::zeros(w.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// A few steps of shifted inverse iteration; the shift is nudged off the
/// eigenvalue so the factorization stays nonsingular.
fn inverse_iteration(
    mat: &DMatrix<Complex64>,
    shift: Complex64,
    start: DVector<Complex64>,
    steps: usize,
) -> Option<DVector<Complex64>> {
    let n = mat.nrows();
    let scale = mat.norm().max(1.0);
    let mut v = start.normalize();
    for eps in [1e-13, 1e-10, 1e-7] {
        let mut shifted = mat.clone();
        let s = shift + Complex64::new(eps * scale, eps * scale);
        for i in 0..n {
            shifted[(i, i)] -= s;
        }
        let lu = shifted.lu();
        let mut ok = true;
        let mut w = v.clone();
        for _ in 0..steps {
            match lu.solve(&w) {
                Some(x) if x.iter().all(|c| c.re.is_finite() && c.im.is_finite()) && x.norm() > 0.0 => {
                    w = x.normalize();
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            v = w;
            return Some(v);
        }
    }
    None
}

fn max_modulus(values: &DVector<Complex64>) -> Complex64 {
    values.iter().copied().fold(Complex64::new(0.0, 0.0), |best, z| if z.norm() > best.norm() { z } else { best })
}

fn power_iterate(gamma: &DMatrix<f64>, cfg: &PowerConfig) -> PowerOutcome {
    let n = gamma.nrows();
    let gnorm = gamma.norm();
    let collapsed = |steps| PowerOutcome {
        lambda: Complex64::new(0.0, 0.0),
        vector: None,
        method: EstimateMethod::Collapsed,
        steps,
        residual: 0.0,
    };
    if n == 0 || gnorm == 0.0 {
        return collapsed(0);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let width = (2 * cfg.starts.max(1)).min(n);
    let start = DMatrix::from_fn(n, width, |_, _| rng.gen_range(-1.0..1.0));
    let drop_tol = 1e-13 * gnorm;
    let mut v = orthonormalize(&start, 1e-13);
    let check_every = cfg.check_every.max(1);
    let mut last = PowerOutcome {
        lambda: Complex64::new(0.0, 0.0),
        vector: None,
        method: EstimateMethod::Unconverged,
        steps: 0,
        residual: f64::INFINITY,
    };

    for step in 1..=cfg.max_steps {
        let w = gamma * &v;
        if step % check_every == 0 || step == cfg.max_steps {
            let h = v.transpose() * &w;
            let theta = max_modulus(&h.complex_eigenvalues());
            let hc = to_complex(&h);
            let y0 = DVector::from_fn(h.nrows(), |i, _| Complex64::new(1.0, 0.1 * i as f64));
            if let Some(y) = inverse_iteration(&hc, theta, y0, 3) {
                let vy = to_complex(&v) * &y;
                let wy = to_complex(&w) * &y;
                let vnorm = vy.norm();
                let res = (&wy - &vy * theta).norm() / vnorm;
                last = PowerOutcome {
                    lambda: theta,
                    vector: Some(vy / Complex64::new(vnorm, 0.0)),
                    method: EstimateMethod::Unconverged,
                    steps: step,
                    residual: res / gnorm,
                };
                if res <= cfg.residual_tol * gnorm {
                    last.method = EstimateMethod::RayleighRitz;
                    return last;
                }
            }
        }
        v = orthonormalize(&w, drop_tol);
        if v.ncols() == 0 {
            return collapsed(step);
        }
    }
    last.steps = cfg.max_steps;
    last
}

/// Power iteration, then the Schur fallback if it did not converge.
fn estimate(gamma: &DMatrix<f64>, cfg: &PowerConfig) -> PowerOutcome {
    let out = power_iterate(gamma, cfg);
    if out.method != EstimateMethod::Unconverged {
        return out;
    }
    let n = gamma.nrows();
    let Some(schur) = Schur::try_new(gamma.clone(), f64::EPSILON, 1000 * n.max(1)) else {
        return out;
    };
    let lambda = max_modulus(&schur.complex_eigenvalues());
    let start = out
        .vector
        .clone()
        .unwrap_or_else(|| DVector::from_fn(n, |i, _| Complex64::new(1.0, 0.1 * i as f64)));
    match refine_eigenpair(gamma, lambda, start) {
        Some(pair) => PowerOutcome {
            lambda,
            vector: Some(pair.vector),
            method: EstimateMethod::Schur,
            steps: out.steps,
            residual: pair.residual / gamma.norm(),
        },
        None => PowerOutcome { lambda, vector: None, method: EstimateMethod::Schur, steps: out.steps, residual: f64::NAN },
    }
}

fn min_full_pivot(m: DMatrix<f64>) -> f64 {
    let lu = m.full_piv_lu();
    let u = lu.u();
    (0..u.nrows().min(u.ncols())).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min)
}

/// Nonsingularity of `I - Γ` and `I + Γ` via complete pivoting.
pub fn check_pivots(gamma: &DMatrix<f64>) -> PivotCheck {
    let n = gamma.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let threshold = PIVOT_RTOL * gamma.norm();
    let min_pivot_minus = min_full_pivot(&id - gamma);
    let min_pivot_plus = min_full_pivot(&id + gamma);
    PivotCheck {
        min_pivot_minus,
        min_pivot_plus,
        threshold,
        passed: min_pivot_minus > threshold && min_pivot_plus > threshold,
    }
}

/// Dominant eigenvalue modulus of `Γ` plus the `±1` exclusion check.
pub fn spectral_radius_estimate(gamma: &DMatrix<f64>, cfg: &PowerConfig) -> SpectralReport {
    assert!(gamma.is_square(), "iteration matrix must be square");
    let out = estimate(gamma, cfg);
    let radius = out.lambda.norm();
    SpectralReport {
        spectral_radius: radius,
        dominant_eigenvalue: out.lambda,
        method: out.method,
        steps: out.steps,
        ritz_residual: out.residual,
        radius_below_one: radius < 1.0 - 1e-10,
        pivots: check_pivots(gamma),
    }
}

/// Dominant eigenpair of `Γ`, polished by inverse iteration on the full
/// matrix. `None` if no estimate converged or the iteration collapsed.
pub fn dominant_eigenpair(gamma: &DMatrix<f64>, cfg: &PowerConfig) -> Option<DominantEigenpair> {
    let out = estimate(gamma, cfg);
    if !matches!(out.method, EstimateMethod::RayleighRitz | EstimateMethod::Schur) {
        return None;
    }
    refine_eigenpair(gamma, out.lambda, out.vector?)
}

/// Polishes an approximate eigenpair of `gamma` by inverse iteration and a
/// Rayleigh quotient update.
pub fn refine_eigenpair(gamma: &DMatrix<f64>, lambda: Complex64, start: DVector<Complex64>) -> Option<DominantEigenpair> {
    let gc = to_complex(gamma);
    let v = inverse_iteration(&gc, lambda, start, 2)?;
    let gv = &gc * &v;
    let lambda = v.dotc(&gv) / v.dotc(&v);
    let residual = (&gv - &v * lambda).norm() / v.norm();
    Some(DominantEigenpair { lambda, vector: v.normalize(), residual })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositiveRealReport {
    pub trials: usize,
    pub failures: usize,
    /// Smallest `Re(x* A x) / ‖x‖²` observed.
    pub min_normalized_real_part: f64,
    /// Largest gap between the real-arithmetic identity and a direct complex evaluation.
    pub max_identity_gap: f64,
}

impl PositiveRealReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Probes `Re(x* A x) > 0` on random complex vectors using
/// `Re(x* A x) = r^T A r + s^T A s` for `x = r + i s`.
pub fn check_positive_real(a: &CsrMatrix, trials: usize, seed: u64) -> PositiveRealReport {
    let n = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut min_real = f64::INFINITY;
    let mut max_gap = 0.0f64;
    let mut ar = vec![0.0; n];
    let mut as_ = vec![0.0; n];
    for _ in 0..trials {
        let re: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let im: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        a.spmv_into(&re, &mut ar);
        a.spmv_into(&im, &mut as_);
        let identity = crate::vecops::dot(&re, &ar) + crate::vecops::dot(&im, &as_);
        // direct: sum conj(x_i) (A x)_i
        let direct: f64 = (0..n)
            .map(|i| (Complex64::new(re[i], -im[i]) * Complex64::new(ar[i], as_[i])).re)
            .sum();
        let xx: f64 = re.iter().chain(&im).map(|v| v * v).sum();
        max_gap = max_gap.max((identity - direct).abs() / xx);
        if !(identity > 0.0) {
            failures += 1;
        }
        min_real = min_real.min(identity / xx);
    }
    PositiveRealReport { trials, failures, min_normalized_real_part: min_real, max_identity_gap: max_gap }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenpairCertificate {
    pub lambda: Complex64,
    /// `(1 - λ) / (1 + λ)`
    pub omega: Complex64,
    /// `x* A x`
    pub p: Complex64,
    /// `y* y`
    pub q: f64,
    /// `y* C y`
    pub r: f64,
    /// Velocity part, scaled to unit norm.
    #[serde(skip)]
    pub x: Vec<Complex64>,
    /// Pressure part, with the same scaling as `x`.
    #[serde(skip)]
    pub y: Vec<Complex64>,
    /// `‖x‖` before rescaling, with `‖(x; y)‖ = 1`.
    pub x_norm: f64,
    /// `‖N u - λ M u‖` with `‖u‖ = 1`.
    pub pencil_residual: f64,
    pub bx_norm: f64,
    pub bx_vanishes: bool,
    /// `|α ω + β q conj(ω) - (p + r)|`
    pub identity_residual: f64,
    /// `1e-6 (|p| + r + 1)`
    pub identity_tolerance: f64,
    /// `(Re p + r) / (α + β q)`
    pub predicted_re_omega: f64,
    /// `|1 - ω| / |1 + ω|`
    pub modulus_from_omega: f64,
    /// `|α - p| / |α + p|`, the closed form when `B x = 0`.
    pub modulus_from_p: f64,
}

impl EigenpairCertificate {
    pub fn x_nonzero(&self) -> bool {
        self.x_norm > 1e-12
    }

    pub fn identity_holds(&self) -> bool {
        self.identity_residual <= self.identity_tolerance
    }

    pub fn re_omega_matches(&self) -> bool {
        (self.omega.re - self.predicted_re_omega).abs() <= 1e-6 * self.predicted_re_omega.abs().max(1.0)
    }

    pub fn modulus_matches(&self) -> bool {
        (self.modulus_from_omega - self.lambda.norm()).abs() <= 1e-8
    }

    /// Every relation that applies to this eigenpair holds.
    pub fn passed(&self) -> bool {
        let branch = if self.bx_vanishes {
            (self.modulus_from_p - self.lambda.norm()).abs() <= 1e-8
        } else {
            self.identity_holds()
        };
        self.x_nonzero() && branch && self.omega.re > 0.0 && self.re_omega_matches() && self.modulus_matches()
    }
}

fn real_times_complex(m: &CsrMatrix, x: &[Complex64], transpose: bool) -> Vec<Complex64> {
    let re: Vec<f64> = x.iter().map(|c| c.re).collect();
    let im: Vec<f64> = x.iter().map(|c| c.im).collect();
    let (yr, yi) = if transpose {
        (m.spmv_transpose(&re).unwrap(), m.spmv_transpose(&im).unwrap())
    } else {
        (m.spmv(&re).unwrap(), m.spmv(&im).unwrap())
    };
    yr.into_iter().zip(yi).map(|(a, b)| Complex64::new(a, b)).collect()
}

fn cdot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

fn cnorm(x: &[Complex64]) -> f64 {
    x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Computes `ω, p, q, r` for an eigenpair `(λ, v)` of `Γ` and checks the
/// relations they must satisfy. Fails if `λ = -1`, which cannot occur for a
/// system satisfying the hypotheses.
pub fn certify_eigenpair(
    sys: &SaddlePointSystem,
    params: ShiftParams,
    lambda: Complex64,
    v: &[Complex64],
) -> Result<EigenpairCertificate> {
    params.validate()?;
    check_len("eigenvector", sys.dim(), v.len())?;
    let one = Complex64::new(1.0, 0.0);
    if (lambda + one).norm() <= 1e-12 {
        return Err(Error::EigenvalueAtMinusOne(lambda));
    }
    let (alpha, beta) = (params.alpha, params.beta);
    let n = sys.n();
    let vnorm = cnorm(v);
    if vnorm == 0.0 {
        return Err(Error::InvalidParameter("eigenvector is zero".into()));
    }
    let u: Vec<Complex64> = v.iter().map(|c| c / vnorm).collect();
    let (x0, y0) = u.split_at(n);

    // N u - λ M u, block by block
    let ax = real_times_complex(sys.a(), x0, false);
    let bty = real_times_complex(sys.b(), y0, true);
    let bx = real_times_complex(sys.b(), x0, false);
    let cy = real_times_complex(sys.c(), y0, false);
    let mut pencil = 0.0;
    for i in 0..n {
        let mu = 0.5 * (alpha * x0[i] + ax[i] + bty[i]);
        let nu = 0.5 * (alpha * x0[i] - ax[i] - bty[i]);
        pencil += (nu - lambda * mu).norm_sqr();
    }
    for i in 0..sys.m() {
        let mu = 0.5 * (-bx[i] + beta * y0[i] + cy[i]);
        let nu = 0.5 * (bx[i] + beta * y0[i] - cy[i]);
        pencil += (nu - lambda * mu).norm_sqr();
    }

    let x_norm = cnorm(x0);
    let s = if x_norm > 0.0 { 1.0 / x_norm } else { 1.0 };
    let x: Vec<Complex64> = x0.iter().map(|c| c * s).collect();
    let y: Vec<Complex64> = y0.iter().map(|c| c * s).collect();
    let ax: Vec<Complex64> = ax.iter().map(|c| c * s).collect();
    let cy: Vec<Complex64> = cy.iter().map(|c| c * s).collect();
    let bx_norm = cnorm(&bx) * s;

    let omega = (one - lambda) / (one + lambda);
    let p = cdot(&x, &ax);
    let q = cdot(&y, &y).re;
    let r = cdot(&y, &cy).re;
    let lhs = alpha * omega + beta * q * omega.conj();
    let identity_residual = (lhs - (p + r)).norm();
    let alpha_c = Complex64::new(alpha, 0.0);

    Ok(EigenpairCertificate {
        lambda,
        omega,
        p,
        q,
        r,
        x,
        y,
        x_norm,
        pencil_residual: pencil.sqrt(),
        bx_norm,
        bx_vanishes: bx_norm <= 1e-10 * sys.b().frobenius_norm().max(f64::MIN_POSITIVE),
        identity_residual,
        identity_tolerance: 1e-6 * (p.norm() + r + 1.0),
        predicted_re_omega: (p.re + r) / (alpha + beta * q),
        modulus_from_omega: (one - omega).norm() / (one + omega).norm(),
        modulus_from_p: (alpha_c - p).norm() / (alpha_c + p).norm(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub alpha: f64,
    pub beta: f64,
    pub spectral: SpectralReport,
    /// Certificate of the polished dominant eigenpair, when one was extracted.
    pub certificate: Option<EigenpairCertificate>,
    /// `‖Γ v - λ v‖` of the certified pair.
    pub eigen_residual: Option<f64>,
}

impl CaseReport {
    pub fn passed(&self) -> bool {
        self.spectral.passed() && self.certificate.as_ref().map_or(true, |c| c.passed())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub label: String,
    pub n: usize,
    pub m: usize,
    pub validation: ValidationReport,
    pub positive_real: PositiveRealReport,
    pub cases: Vec<CaseReport>,
}

impl InstanceReport {
    pub fn max_spectral_radius(&self) -> f64 {
        self.cases.iter().map(|c| c.spectral.spectral_radius).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.validation.passed() && self.positive_real.passed() && self.cases.iter().all(CaseReport::passed)
    }
}

/// Runs every check on one system for each shift pair.
pub fn verify_instance(
    label: impl Into<String>,
    sys: &SaddlePointSystem,
    shifts: &[ShiftParams],
    power: &PowerConfig,
    positive_real_trials: usize,
) -> Result<InstanceReport> {
    let validation = sys.validate(ValidationMode::Full)?;
    let positive_real = check_positive_real(sys.a(), positive_real_trials, power.seed ^ 0x1e77a2);
    let mut cases = Vec::with_capacity(shifts.len());
    for (k, &params) in shifts.iter().enumerate() {
        let gamma = dense_iteration_matrix(sys, params)?;
        let cfg = PowerConfig { seed: power.seed.wrapping_add(k as u64), ..power.clone() };
        let out = estimate(&gamma, &cfg);
        let radius = out.lambda.norm();
        let spectral = SpectralReport {
            spectral_radius: radius,
            dominant_eigenvalue: out.lambda,
            method: out.method,
            steps: out.steps,
            ritz_residual: out.residual,
            radius_below_one: radius < 1.0 - 1e-10,
            pivots: check_pivots(&gamma),
        };
        let mut certificate = None;
        let mut eigen_residual = None;
        if matches!(out.method, EstimateMethod::RayleighRitz | EstimateMethod::Schur) {
            if let Some(pair) = out.vector.and_then(|v| refine_eigenpair(&gamma, out.lambda, v)) {
                if pair.residual <= EIGENPAIR_RESIDUAL_TOL {
                    let v: Vec<Complex64> = pair.vector.iter().copied().collect();
                    certificate = Some(certify_eigenpair(sys, params, pair.lambda, &v)?);
                }
                eigen_residual = Some(pair.residual);
            }
        }
        cases.push(CaseReport { alpha: params.alpha, beta: params.beta, spectral, certificate, eigen_residual });
    }
    Ok(InstanceReport { label: label.into(), n: sys.n(), m: sys.m(), validation, positive_real, cases })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub instances: usize,
    /// Upper bound on `n + m`.
    pub max_dim: usize,
    pub density: f64,
    /// Every `(α, β)` in the Cartesian product of these values is tested.
    pub shift_values: Vec<f64>,
    pub positive_real_trials: usize,
    pub seed: u64,
    pub power: PowerConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            instances: 100,
            max_dim: 80,
            density: 0.3,
            shift_values: vec![1e-3, 1e-2, 0.1, 1.0, 10.0],
            positive_real_trials: 1000,
            seed: 2015,
            power: PowerConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn shift_pairs(&self) -> Vec<ShiftParams> {
        let mut out = Vec::new();
        for &alpha in &self.shift_values {
            for &beta in &self.shift_values {
                out.push(ShiftParams { alpha, beta });
            }
        }
        out
    }

    /// Sizes and seed of instance `k`: `3 <= n + m <= max_dim`, `1 <= m <= n`.
    pub fn instance_shape(&self, k: usize) -> (usize, usize, u64) {
        let seed = self.seed.wrapping_mul(1_000_003).wrapping_add(k as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = rng.gen_range(3..=self.max_dim.max(3));
        let m = rng.gen_range(1..=total / 2);
        (total - m, m, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_dim > DENSE_GAMMA_CAP {
            return Err(Error::SizeCap { size: self.max_dim, cap: DENSE_GAMMA_CAP });
        }
        if self.shift_values.is_empty() {
            return Err(Error::InvalidParameter("no shift values given".into()));
        }
        for &s in &self.shift_values {
            ShiftParams::new(s, s)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub instances: Vec<InstanceReport>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.instances.iter().all(InstanceReport::passed)
    }

    pub fn cases(&self) -> impl Iterator<Item = &CaseReport> {
        self.instances.iter().flat_map(|i| i.cases.iter())
    }
}

/// Generates instance `k` of the sweep.
pub fn sweep_instance(cfg: &SweepConfig, k: usize) -> Result<SaddlePointSystem> {
    let (n, m, seed) = cfg.instance_shape(k);
    generate_random(n, m, cfg.density, seed)
}

/// Random sweep over valid systems and shift pairs.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let shifts = cfg.shift_pairs();
    let mut instances = Vec::with_capacity(cfg.instances);
    for k in 0..cfg.instances {
        let sys = sweep_instance(cfg, k)?;
        let power = PowerConfig { seed: cfg.power.seed.wrapping_add(1000 * k as u64), ..cfg.power.clone() };
        instances.push(verify_instance(format!("random-{k}"), &sys, &shifts, &power, cfg.positive_real_trials)?);
    }
    Ok(SweepReport { instances })
}
