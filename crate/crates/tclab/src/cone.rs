//! Solvency cone `K` and dual cone `K'` at a single node.
//!
//! `K` is generated by the transfer vectors `Lambda^{ij} e_i - e_j` (pay
//! `1 + lambda^{ij}` units of asset-i money, receive one unit of asset-j
//! money) together with the disposal directions `e_i`. The dual cone has
//! the explicit description `0 <= z^j <= z^i Lambda^{ij}`, which makes
//! dual membership an O(d^2) scan while primal membership is an LP in the
//! transfer coefficients.

use crate::lp::{self, LpBuilder, LpStatus, Mode, Rel, Scalar, Sense, EPS_FEAS};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod dd;

/// Default cap on the dimension for extreme-ray enumeration.
pub const DEFAULT_RAY_DIM_CAP: usize = 8;

#[derive(Debug, Error)]
pub enum ConeError {
    #[error("asset count must be >= 1")]
    EmptyCone,
    #[error("lambda matrix is {got}x{cols}, expected {d}x{d}")]
    BadShape { got: usize, cols: usize, d: usize },
    #[error("diagonal cost nonzero: lambda[{0}][{0}] != 0")]
    NonzeroDiagonal(usize),
    #[error("negative cost: lambda[{0}][{1}] < 0")]
    NegativeCost(usize, usize),
    #[error("non-finite cost: lambda[{0}][{1}]")]
    NonFiniteCost(usize, usize),
    #[error("triangle inequality violated: Lambda[{i}][{j}] * Lambda[{j}][{k}] < Lambda[{i}][{k}]")]
    TriangleViolation { i: usize, j: usize, k: usize },
    #[error("vector has length {got}, cone dimension is {d}")]
    DimensionMismatch { got: usize, d: usize },
    #[error("dual cone has empty interior; supply an interior witness")]
    EmptyInterior,
    #[error("point is not interior to the dual cone (margin {0})")]
    NotInterior(f64),
    #[error("dimension {0} exceeds the extreme-ray cap {1}")]
    RayDimCap(usize, usize),
    #[error("lp failure: {0}")]
    Lp(#[from] lp::LpError),
}

/// Transaction-cost matrix of one node; immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    d: usize,
    lambda: Vec<Vec<f64>>,
}

/// Outcome of a primal membership query.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ConeCertificate {
    /// x = sum a^{ij} (Lambda^{ij} e_i - e_j) + b with a, b >= 0.
    Decomposition { a: Vec<Vec<f64>>, b: Vec<f64> },
    /// z in K' with z.x < 0.
    Separator { z: Vec<f64> },
}

impl ConeSpec {
    pub fn new(lambda: Vec<Vec<f64>>) -> Result<Self, ConeError> {
        let d = lambda.len();
        if d == 0 {
            return Err(ConeError::EmptyCone);
        }
        for (i, row) in lambda.iter().enumerate() {
            if row.len() != d {
                return Err(ConeError::BadShape {
                    got: d,
                    cols: row.len(),
                    d,
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(ConeError::NonFiniteCost(i, j));
                }
                if v < 0.0 {
                    return Err(ConeError::NegativeCost(i, j));
                }
            }
            if lambda[i][i] != 0.0 {
                return Err(ConeError::NonzeroDiagonal(i));
            }
        }
        // Lambda^{ij} Lambda^{jk} >= Lambda^{ik}
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let lhs = (1.0 + lambda[i][j]) * (1.0 + lambda[j][k]);
                    if lhs < (1.0 + lambda[i][k]) - 1e-12 * (1.0 + lambda[i][k]) {
                        return Err(ConeError::TriangleViolation { i, j, k });
                    }
                }
            }
        }
        Ok(ConeSpec { d, lambda })
    }

    /// Frictionless cone in dimension `d` (all costs zero).
    pub fn frictionless(d: usize) -> Self {
        ConeSpec::new(vec![vec![0.0; d]; d]).expect("zero matrix is valid")
    }

    /// Uniform cost `eps` on all off-diagonal pairs.
    pub fn uniform(d: usize, eps: f64) -> Result<Self, ConeError> {
        let mut l = vec![vec![eps; d]; d];
        for (i, row) in l.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        ConeSpec::new(l)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn lambda(&self) -> &[Vec<f64>] {
        &self.lambda
    }

    /// Bid-ask coefficient Lambda^{ij} = 1 + lambda^{ij}.
    pub fn big_lambda(&self, i: usize, j: usize) -> f64 {
        1.0 + self.lambda[i][j]
    }

    fn check_dim(&self, v: &[f64]) -> Result<(), ConeError> {
        if v.len() != self.d {
            return Err(ConeError::DimensionMismatch {
                got: v.len(),
                d: self.d,
            });
        }
        Ok(())
    }

    /// Membership of `x` in the solvency cone, with a reconstructing
    /// decomposition on success and a separating dual vector on failure.
    pub fn in_solvency_cone(
        &self,
        x: &[f64],
        mode: Mode,
    ) -> Result<(bool, ConeCertificate), ConeError> {
        self.check_dim(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ConeError::NonFiniteCost(usize::MAX, usize::MAX));
        }
        let d = self.d;
        // fast path: nonnegative vectors are disposals
        if x.iter().all(|&v| v >= 0.0) {
            return Ok((
                true,
                ConeCertificate::Decomposition {
                    a: vec![vec![0.0; d]; d],
                    b: x.to_vec(),
                },
            ));
        }
        let mut builder = LpBuilder::new(Sense::Minimize);
        // a^{ij} for i != j, then b^i
        let mut a_idx = vec![vec![usize::MAX; d]; d];
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    a_idx[i][j] = builder.nonneg(0.0);
                }
            }
        }
        let b_idx: Vec<usize> = (0..d).map(|_| builder.nonneg(0.0)).collect();
        for k in 0..d {
            let mut coeffs = Vec::new();
            for i in 0..d {
                for j in 0..d {
                    if i == j {
                        continue;
                    }
                    if k == i {
                        coeffs.push((a_idx[i][j], self.big_lambda(i, j)));
                    } else if k == j {
                        coeffs.push((a_idx[i][j], -1.0));
                    }
                }
            }
            coeffs.push((b_idx[k], 1.0));
            builder.row(coeffs, Rel::Eq, x[k]);
        }
        let problem = builder.build();
        let sol = lp::solve(&problem, mode)?;
        match sol.status {
            LpStatus::Optimal => {
                let mut a = vec![vec![0.0; d]; d];
                for i in 0..d {
                    for j in 0..d {
                        if i != j {
                            a[i][j] = sol.x[a_idx[i][j]];
                        }
                    }
                }
                let b = b_idx.iter().map(|&k| sol.x[k]).collect();
                Ok((true, ConeCertificate::Decomposition { a, b }))
            }
            LpStatus::Infeasible => {
                // Farkas: y^T A <= 0 columnwise and y.x > 0, so z = -y
                // satisfies the K' inequalities and z.x < 0.
                let z: Vec<f64> = sol.dual.iter().map(|y| -y).collect();
                Ok((false, ConeCertificate::Separator { z }))
            }
            LpStatus::Unbounded => unreachable!("feasibility problem cannot be unbounded"),
        }
    }

    /// Direct inequality scan for `z in K'`: `0 <= z^j <= z^i Lambda^{ij}`.
    pub fn in_dual_cone(&self, z: &[f64]) -> Result<bool, ConeError> {
        self.check_dim(z)?;
        Ok(self.in_dual_cone_tol(z, 0.0))
    }

    pub fn in_dual_cone_tol(&self, z: &[f64], tol: f64) -> bool {
        let scale = 1.0 + z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for j in 0..self.d {
            if z[j] < -tol * scale {
                return false;
            }
            for i in 0..self.d {
                if i != j && z[j] > z[i] * self.big_lambda(i, j) + tol * scale {
                    return false;
                }
            }
        }
        true
    }

    /// delta_u = min over i != j of (u^i Lambda^{ij} - u^j). Positive iff
    /// `u` is interior to K', zero on the boundary, negative outside
    /// (given a nonempty interior). For d = 1 there are no pairs and the
    /// margin is u^1 (distance into the half-line R+).
    pub fn interior_margin(&self, u: &[f64]) -> Result<f64, ConeError> {
        self.check_dim(u)?;
        if self.d == 1 {
            return Ok(u[0]);
        }
        let mut m = f64::INFINITY;
        for i in 0..self.d {
            for j in 0..self.d {
                if i != j {
                    m = m.min(u[i] * self.big_lambda(i, j) - u[j]);
                }
            }
        }
        Ok(m)
    }

    /// Exact-rational margin for sharp boundary classification.
    pub fn interior_margin_exact(&self, u: &[f64]) -> Result<BigRational, ConeError> {
        self.check_dim(u)?;
        let conv = |v: f64| BigRational::from_float(v).expect("finite");
        if self.d == 1 {
            return Ok(conv(u[0]));
        }
        let mut m: Option<BigRational> = None;
        for i in 0..self.d {
            for j in 0..self.d {
                if i == j {
                    continue;
                }
                let v = conv(u[i]) * conv(self.big_lambda(i, j)) - conv(u[j]);
                m = Some(match m {
                    Some(cur) if cur <= v => cur,
                    _ => v,
                });
            }
        }
        Ok(m.expect("d >= 2"))
    }

    /// Boundary classification in float mode uses the band
    /// |delta_u| <= eps * (1 + |u|_inf).
    pub fn classify(&self, u: &[f64]) -> Result<ConeRegion, ConeError> {
        let delta = self.interior_margin(u)?;
        let band = EPS_FEAS * (1.0 + sup_norm(u));
        Ok(if delta > band {
            ConeRegion::Interior
        } else if delta < -band {
            ConeRegion::Outside
        } else {
            ConeRegion::Boundary
        })
    }

    /// Whether int K' is nonempty, decided by an LP over the unit box.
    pub fn has_interior(&self) -> Result<bool, ConeError> {
        if self.d == 1 {
            return Ok(true);
        }
        let mut builder = LpBuilder::new(Sense::Maximize);
        let z: Vec<usize> = (0..self.d)
            .map(|_| builder.var(0.0, Some(0.0), Some(1.0)))
            .collect();
        let m = builder.free(1.0);
        for i in 0..self.d {
            for j in 0..self.d {
                if i != j {
                    builder.row(
                        vec![(z[i], self.big_lambda(i, j)), (z[j], -1.0), (m, -1.0)],
                        Rel::Ge,
                        0.0,
                    );
                }
            }
        }
        let sol = lp::solve(&builder.build(), Mode::Float)?;
        Ok(sol.status == LpStatus::Optimal && sol.objective > EPS_FEAS)
    }

    /// Sup-norm distance from `u` to the boundary of K':
    /// `|min_{i != j} (u^i Lambda^{ij} - u^j) / (1 + Lambda^{ij})|`.
    /// Requires a nonempty dual interior.
    pub fn dual_boundary_distance(&self, u: &[f64]) -> Result<f64, ConeError> {
        self.check_dim(u)?;
        if !self.has_interior()? {
            return Err(ConeError::EmptyInterior);
        }
        if self.d == 1 {
            return Ok(u[0].abs());
        }
        let mut m = f64::INFINITY;
        for i in 0..self.d {
            for j in 0..self.d {
                if i != j {
                    let big = self.big_lambda(i, j);
                    m = m.min((u[i] * big - u[j]) / (1.0 + big));
                }
            }
        }
        Ok(m.abs())
    }

    /// Normal-cone constant k = 4 |f0|_inf / dist(f0, boundary of K'),
    /// valid with the sup-norm pairing.
    pub fn normal_cone_constant(&self, f0: &[f64]) -> Result<f64, ConeError> {
        let delta = self.interior_margin(f0)?;
        if delta <= 0.0 {
            return Err(ConeError::NotInterior(delta));
        }
        let dist = self.dual_boundary_distance(f0)?;
        Ok(4.0 * sup_norm(f0) / dist)
    }

    /// Liquidation bound alpha = 8 |theta|_inf (1 / dist(theta, bd K'))^2:
    /// |xi|_l1 <= alpha |eta|_l1 whenever xi in -K, eta in K, xi + eta in K.
    pub fn liquidation_bound_alpha(&self, theta: &[f64]) -> Result<f64, ConeError> {
        let delta = self.interior_margin(theta)?;
        if delta <= 0.0 {
            return Err(ConeError::NotInterior(delta));
        }
        let dist = self.dual_boundary_distance(theta)?;
        Ok(8.0 * sup_norm(theta) / (dist * dist))
    }

    /// Finite generator set of K' via double description with exact
    /// rationals, normalized so the first nonzero component is 1.
    pub fn extreme_rays_dual(&self) -> Result<Vec<Vec<f64>>, ConeError> {
        self.extreme_rays_dual_capped(DEFAULT_RAY_DIM_CAP)
    }

    pub fn extreme_rays_dual_capped(&self, cap: usize) -> Result<Vec<Vec<f64>>, ConeError> {
        Ok(self
            .extreme_rays_dual_exact(cap)?
            .into_iter()
            .map(|ray| ray.iter().map(lp::rational_to_f64).collect())
            .collect())
    }

    pub fn extreme_rays_dual_exact(&self, cap: usize) -> Result<Vec<Vec<BigRational>>, ConeError> {
        if self.d > cap {
            return Err(ConeError::RayDimCap(self.d, cap));
        }
        let conv = |v: f64| BigRational::from_float(v).expect("finite");
        let mut ineqs: Vec<Vec<BigRational>> = Vec::new();
        for i in 0..self.d {
            for j in 0..self.d {
                if i == j {
                    continue;
                }
                // Lambda^{ij} z^i - z^j >= 0
                let mut row = vec![<BigRational as num_traits::Zero>::zero(); self.d];
                row[i] = conv(self.big_lambda(i, j));
                row[j] = row[j].clone() - BigRational::from_integer(1.into());
                ineqs.push(row);
            }
        }
        Ok(dd::extreme_rays_nonneg(self.d, &ineqs))
    }

    /// Diagnostics for the efficient-friction conditions and the
    /// generating-property stress score.
    pub fn check_ef_conditions(&self) -> Result<EfReport, ConeError> {
        let d = self.d;
        let ones = vec![1.0; d];
        let delta_one = self.interior_margin(&ones)?;
        let mut min_lambda = f64::INFINITY;
        let mut min_sym = f64::INFINITY;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    min_lambda = min_lambda.min(self.lambda[i][j]);
                    min_sym = min_sym.min(self.lambda[i][j] + self.lambda[j][i]);
                }
            }
        }
        if d == 1 {
            min_lambda = 0.0;
            min_sym = 0.0;
        }
        let stress = self.generating_stress_score()?;
        Ok(EfReport {
            d,
            min_lambda,
            uniform_friction_holds: d == 1 || min_lambda > 0.0,
            delta_one,
            one_interior: d == 1 || delta_one > 0.0,
            min_symmetric_cost: min_sym,
            weak_friction_holds: d == 1 || min_sym > 0.0,
            stress_score: stress,
        })
    }

    /// Minimal t such that (1,0,1,0,...) = y1 - y2 with y1, y2 in K' and
    /// |y1|_inf <= t. Unbounded growth in d signals a failing generating
    /// property. `None` when the decomposition is infeasible outright.
    pub fn generating_stress_score(&self) -> Result<Option<f64>, ConeError> {
        let d = self.d;
        if d == 1 {
            return Ok(Some(1.0));
        }
        let mut builder = LpBuilder::new(Sense::Minimize);
        let y1: Vec<usize> = (0..d).map(|_| builder.nonneg(0.0)).collect();
        let y2: Vec<usize> = (0..d).map(|_| builder.nonneg(0.0)).collect();
        let t = builder.nonneg(1.0);
        for (ys, _other) in [(&y1, &y2), (&y2, &y1)] {
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        builder.row(
                            vec![(ys[i], self.big_lambda(i, j)), (ys[j], -1.0)],
                            Rel::Ge,
                            0.0,
                        );
                    }
                }
            }
        }
        for k in 0..d {
            let target = if k % 2 == 0 { 1.0 } else { 0.0 };
            builder.row(vec![(y1[k], 1.0), (y2[k], -1.0)], Rel::Eq, target);
        }
        for k in 0..d {
            builder.row(vec![(y1[k], 1.0), (t, -1.0)], Rel::Le, 0.0);
        }
        let sol = lp::solve(&builder.build(), Mode::Float)?;
        Ok(match sol.status {
            LpStatus::Optimal => Some(sol.objective),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeRegion {
    Interior,
    Boundary,
    Outside,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EfReport {
    pub d: usize,
    /// min over i != j of lambda^{ij}; condition 1 holds when positive.
    pub min_lambda: f64,
    pub uniform_friction_holds: bool,
    /// margin of the all-ones vector; condition 2 holds when positive.
    pub delta_one: f64,
    pub one_interior: bool,
    /// min over i != j of lambda^{ij} + lambda^{ji}; condition 5.
    pub min_symmetric_cost: f64,
    pub weak_friction_holds: bool,
    /// Minimal sup-norm bound for decomposing (1,0,1,0,...) over K' - K'.
    pub stress_score: Option<f64>,
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Verify a decomposition certificate reconstructs `x` within `tol`.
pub fn decomposition_reconstructs(
    cone: &ConeSpec,
    x: &[f64],
    a: &[Vec<f64>],
    b: &[f64],
    tol: f64,
) -> bool {
    let d = cone.dim();
    let mut rec = b.to_vec();
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            rec[i] += a[i][j] * cone.big_lambda(i, j);
            rec[j] -= a[i][j];
        }
    }
    let scale = 1.0 + sup_norm(x);
    a.iter().flatten().chain(b.iter()).all(|&v| v >= -tol * scale)
        && rec
            .iter()
            .zip(x)
            .all(|(r, xv)| (r - xv).abs() <= tol * scale)
}
