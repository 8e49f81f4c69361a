//! Reproducible test systems.
//!
//! [`generate_oseen`] builds a finite-difference Oseen-type problem on the
//! unit square: two convection-diffusion velocity blocks, a one-sided
//! discrete divergence and a scaled-identity pressure stabilization.
//! [`generate_random`] draws small random members of the hypothesis class
//! (positive definite `A`, full-rank `B`, semidefinite `C`).

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::system::{numerical_rank, SaddlePointSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Wind {
    Constant { wx: f64, wy: f64 },
    /// `strength * (2y(1 - x^2), -2x(1 - y^2))` on the square mapped to `[-1, 1]^2`.
    Recirculating { strength: f64 },
}

impl Default for Wind {
    fn default() -> Self {
        Wind::Recirculating { strength: 1.0 }
    }
}

impl Wind {
    fn at(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            Wind::Constant { wx, wy } => (wx, wy),
            Wind::Recirculating { strength } => {
                let (s, t) = (2.0 * x - 1.0, 2.0 * y - 1.0);
                (strength * 2.0 * t * (1.0 - s * s), -strength * 2.0 * s * (1.0 - t * t))
            }
        }
    }
}

/// How the velocity and divergence equations are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Each equation integrated over its cell (multiplied by `h^2`), which
    /// gives the magnitudes of a low-order finite element assembly:
    /// `A = O(nu)`, `B = O(h)`, `C = O(h^2)`.
    #[default]
    CellIntegrated,
    /// Pointwise difference quotients: `A = O(nu / h^2)`, `B = O(1 / h)`.
    Pointwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OseenSpec {
    /// Interior grid points per side; `n = 2 p^2`, `m = p^2`.
    pub grid: usize,
    pub viscosity: f64,
    /// `C = stabilization * h^2 * I`.
    pub stabilization: f64,
    pub wind: Wind,
    #[serde(default)]
    pub scaling: Scaling,
    /// Carried into manifests; the discretization itself is deterministic.
    pub seed: u64,
}

impl Default for OseenSpec {
    fn default() -> Self {
        Self { grid: 8, viscosity: 1.0 / 50.0, stabilization: 0.1, wind: Wind::default(), scaling: Scaling::default(), seed: 0 }
    }
}

impl OseenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 2 {
            return Err(Error::InvalidParameter(format!("grid must be at least 2, got {}", self.grid)));
        }
        if !(self.viscosity > 0.0) || !self.viscosity.is_finite() {
            return Err(Error::InvalidParameter(format!("viscosity must be positive, got {}", self.viscosity)));
        }
        if !(self.stabilization >= 0.0) || !self.stabilization.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "stabilization must be nonnegative, got {}",
                self.stabilization
            )));
        }
        let ok = match self.wind {
            Wind::Constant { wx, wy } => wx.is_finite() && wy.is_finite(),
            Wind::Recirculating { strength } => strength.is_finite(),
        };
        if !ok {
            return Err(Error::InvalidParameter("wind must be finite".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        2 * self.grid * self.grid
    }

    pub fn m(&self) -> usize {
        self.grid * self.grid
    }

    pub fn mesh_width(&self) -> f64 {
        1.0 / (self.grid as f64 + 1.0)
    }
}

/// Builds the Oseen-type system with the all-ones vector as exact solution.
///
/// Unknowns are ordered lexicographically with `x` fastest: index `j*p + i`
/// is the point `((i+1) h, (j+1) h)`. Each velocity block is
/// `s * (nu * (I (x) T + T (x) I) + W)` with `T = tridiag(-1, 2, -1) / h^2`,
/// `W` the skew-symmetric centered convection `(diag(w) D + D diag(w)) / 2`
/// and `s` the [`Scaling`] weight (`h^2` or 1), so the symmetric part of `A`
/// is exactly a scaled Laplacian. `B` carries the same weight and
/// `C = stabilization * h^2 * I` in both scalings.
pub fn generate_oseen(spec: &OseenSpec) -> Result<SaddlePointSystem> {
    spec.validate()?;
    let p = spec.grid;
    let h = spec.mesh_width();
    let np = p * p;
    let idx = |i: usize, j: usize| j * p + i;

    let mut wx = vec![0.0; np];
    let mut wy = vec![0.0; np];
    for j in 0..p {
        for i in 0..p {
            let (a, b) = spec.wind.at((i + 1) as f64 * h, (j + 1) as f64 * h);
            wx[idx(i, j)] = a;
            wy[idx(i, j)] = b;
        }
    }

    let weight = match spec.scaling {
        Scaling::CellIntegrated => h * h,
        Scaling::Pointwise => 1.0,
    };
    // one velocity component block, shared by both components
    let diff = weight * spec.viscosity / (h * h);
    let conv = weight / (4.0 * h);
    let mut block = Vec::with_capacity(5 * np);
    for j in 0..p {
        for i in 0..p {
            let k = idx(i, j);
            block.push((k, k, 4.0 * diff));
            if i > 0 {
                let l = idx(i - 1, j);
                block.push((k, l, -diff - conv * (wx[k] + wx[l])));
            }
            if i + 1 < p {
                let l = idx(i + 1, j);
                block.push((k, l, -diff + conv * (wx[k] + wx[l])));
            }
            if j > 0 {
                let l = idx(i, j - 1);
                block.push((k, l, -diff - conv * (wy[k] + wy[l])));
            }
            if j + 1 < p {
                let l = idx(i, j + 1);
                block.push((k, l, -diff + conv * (wy[k] + wy[l])));
            }
        }
    }
    let mut a_trip = block.clone();
    a_trip.extend(block.iter().map(|&(r, c, v)| (r + np, c + np, v)));
    let a = CsrMatrix::from_triplets(2 * np, 2 * np, &a_trip)?;

    // B = weight * [I (x) F, F (x) I] / h, F = upper bidiagonal(-1, +1)
    let d = weight / h;
    let mut b_trip = Vec::with_capacity(4 * np);
    for j in 0..p {
        for i in 0..p {
            let k = idx(i, j);
            b_trip.push((k, k, -d));
            if i + 1 < p {
                b_trip.push((k, idx(i + 1, j), d));
            }
            b_trip.push((k, np + k, -d));
            if j + 1 < p {
                b_trip.push((k, np + idx(i, j + 1), d));
            }
        }
    }
    let b = CsrMatrix::from_triplets(np, 2 * np, &b_trip)?;

    let c = if spec.stabilization > 0.0 {
        CsrMatrix::from_diagonal(&vec![spec.stabilization * h * h; np])
    } else {
        CsrMatrix::zeros(np, np)
    };

    let sys = SaddlePointSystem::new(a, b, c, vec![0.0; 2 * np], vec![0.0; np])?;
    Ok(sys.with_rhs_for_ones())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub n: usize,
    pub m: usize,
    /// Probability that an off-diagonal position is populated.
    pub density: f64,
    pub seed: u64,
    /// Rank of `C = L L^T`; `Some(0)` gives `C = 0`, `None` full rank.
    pub c_rank: Option<usize>,
}

impl RandomSpec {
    pub fn new(n: usize, m: usize, density: f64, seed: u64) -> Self {
        Self { n, m, density, seed, c_rank: None }
    }
}

/// Random system with `A = S + K + delta I` (symmetric `S`, skew `K`,
/// `delta` from Gershgorin so that the symmetric part has smallest
/// eigenvalue at least 0.1), `B` redrawn until it has full row rank, and
/// `C = L L^T`.
pub fn generate_random(n: usize, m: usize, density: f64, seed: u64) -> Result<SaddlePointSystem> {
    generate_random_with(&RandomSpec::new(n, m, density, seed))
}

pub fn generate_random_with(spec: &RandomSpec) -> Result<SaddlePointSystem> {
    let RandomSpec { n, m, density, seed, c_rank } = *spec;
    if n == 0 || m == 0 || m > n {
        return Err(Error::InvalidParameter(format!("need 1 <= m <= n, got n = {n}, m = {m}")));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParameter(format!("density must lie in (0, 1], got {density}")));
    }
    let c_rank = c_rank.unwrap_or(m);
    if c_rank > m {
        return Err(Error::InvalidParameter(format!("rank of C cannot exceed m = {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entry = |rng: &mut ChaCha8Rng| -> Option<f64> {
        (rng.gen::<f64>() < density).then(|| rng.gen_range(-1.0..1.0))
    };

    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            if let Some(s) = entry(&mut rng) {
                a[(i, j)] += s;
                if i != j {
                    a[(j, i)] += s;
                }
            }
            if i != j {
                if let Some(k) = entry(&mut rng) {
                    a[(i, j)] += k;
                    a[(j, i)] -= k;
                }
            }
        }
    }
    // Gershgorin bound on the symmetric part
    let mut delta = 0.0f64;
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| f64::abs(0.5 * (a[(i, j)] + a[(j, i)]))).sum();
        delta = delta.max(off - a[(i, i)]);
    }
    for i in 0..n {
        a[(i, i)] += delta + 0.1;
    }

    let mut b = None;
    for _ in 0..100 {
        let mut cand = DMatrix::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                if let Some(v) = entry(&mut rng) {
                    cand[(i, j)] = v;
                }
            }
        }
        if numerical_rank(&cand).0 == m {
            b = Some(cand);
            break;
        }
    }
    let b = b.ok_or_else(|| {
        Error::InvalidParameter(format!("could not draw a full-rank {m}x{n} B at density {density}"))
    })?;

    let mut l = DMatrix::zeros(m, c_rank);
    for i in 0..m {
        for j in 0..c_rank {
            if let Some(v) = entry(&mut rng) {
                l[(i, j)] = v;
            }
        }
    }
    let mut c = &l * l.transpose();
    for i in 0..m {
        for j in 0..i {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }

    let sys = SaddlePointSystem::new(
        CsrMatrix::from_dense(&a, 0.0),
        CsrMatrix::from_dense(&b, 0.0),
        CsrMatrix::from_dense(&c, 0.0),
        vec![0.0; n],
        vec![0.0; m],
    )?;
    Ok(sys.with_rhs_for_ones())
}
