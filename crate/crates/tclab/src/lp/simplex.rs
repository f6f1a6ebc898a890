//! Two-phase dense primal simplex, generic over the arithmetic.
//!
//! The problem is brought to the equality standard form `A x = b, x >= 0,
//! b >= 0` by shifting bounded variables, splitting free variables and
//! adding slack columns; every row gets an artificial variable. Bland's
//! rule kicks in after a burst of Dantzig pivots, so degenerate cone
//! problems cannot cycle.

use super::scalar::Scalar;
use super::{LpError, LpProblem, LpStatus, Rel, Sense};

pub struct Outcome<S> {
    pub status: LpStatus,
    pub x: Vec<S>,
    pub objective: S,
    /// One multiplier per input row (duals on optimality, Farkas on
    /// infeasibility), in the caller's row order and sign convention.
    pub dual: Vec<S>,
    pub dual_objective: S,
}

enum VarMap {
    /// x = sign * x'[col] + shift
    Affine { col: usize, sign: bool, shift: f64 },
    /// x = x'[pos] - x'[neg]
    Split { pos: usize, neg: usize },
}

struct StdForm<S> {
    // rows over structural+slack columns, in input-row order then bound rows
    rows: Vec<Vec<S>>,
    rhs: Vec<S>,
    // +1/-1 applied to make rhs nonnegative
    negated: Vec<bool>,
    cost: Vec<S>,
    obj_shift: S,
    obj_negated: bool,
    var_map: Vec<VarMap>,
    n_cols: usize,
    n_input_rows: usize,
}

fn conv<S: Scalar>(v: f64) -> Result<S, LpError> {
    S::from_f64(v).ok_or_else(|| LpError::NonFinite(format!("value {v}")))
}

fn build_std_form<S: Scalar>(p: &LpProblem) -> Result<StdForm<S>, LpError> {
    let n = p.num_vars();
    let obj_negated = p.sense == Sense::Maximize;

    let mut var_map = Vec::with_capacity(n);
    let mut n_struct = 0usize;
    // (structural column, upper bound on the shifted variable)
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        match (p.lower[j], p.upper[j]) {
            (Some(l), Some(u)) => {
                var_map.push(VarMap::Affine {
                    col: n_struct,
                    sign: true,
                    shift: l,
                });
                bound_rows.push((n_struct, u - l));
                n_struct += 1;
            }
            (Some(l), None) => {
                var_map.push(VarMap::Affine {
                    col: n_struct,
                    sign: true,
                    shift: l,
                });
                n_struct += 1;
            }
            (None, Some(u)) => {
                var_map.push(VarMap::Affine {
                    col: n_struct,
                    sign: false,
                    shift: u,
                });
                n_struct += 1;
            }
            (None, None) => {
                var_map.push(VarMap::Split {
                    pos: n_struct,
                    neg: n_struct + 1,
                });
                n_struct += 2;
            }
        }
    }

    let n_input_rows = p.rows.len();
    let m = n_input_rows + bound_rows.len();
    let n_slack = p
        .rows
        .iter()
        .filter(|r| r.rel != Rel::Eq)
        .count()
        + bound_rows.len();
    let n_cols = n_struct + n_slack;

    let mut rows: Vec<Vec<S>> = Vec::with_capacity(m);
    let mut rhs: Vec<S> = Vec::with_capacity(m);
    let mut negated = vec![false; m];

    let mut slack_idx = n_struct;
    let push_row =
        |coeffs: &[f64], rel: Rel, b: f64, slack_idx: &mut usize| -> Result<(Vec<S>, S), LpError> {
            let mut row = vec![S::zero(); n_cols];
            let mut b_acc = conv::<S>(b)?;
            for (j, &c) in coeffs.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let cs = conv::<S>(c)?;
                match &var_map[j] {
                    VarMap::Affine { col, sign, shift } => {
                        let signed = if *sign { cs.clone() } else { -cs.clone() };
                        row[*col] = row[*col].clone() + signed;
                        if *shift != 0.0 {
                            b_acc = b_acc - cs * conv::<S>(*shift)?;
                        }
                    }
                    VarMap::Split { pos, neg } => {
                        row[*pos] = row[*pos].clone() + cs.clone();
                        row[*neg] = row[*neg].clone() - cs;
                    }
                }
            }
            match rel {
                Rel::Le => {
                    row[*slack_idx] = S::one();
                    *slack_idx += 1;
                }
                Rel::Ge => {
                    row[*slack_idx] = -S::one();
                    *slack_idx += 1;
                }
                Rel::Eq => {}
            }
            Ok((row, b_acc))
        };

    for r in &p.rows {
        let (row, b) = push_row(&r.coeffs, r.rel, r.rhs, &mut slack_idx)?;
        rows.push(row);
        rhs.push(b);
    }
    for &(col, ub) in &bound_rows {
        let mut row = vec![S::zero(); n_cols];
        row[col] = S::one();
        row[slack_idx] = S::one();
        slack_idx += 1;
        rows.push(row);
        rhs.push(conv::<S>(ub)?);
    }

    for i in 0..m {
        if rhs[i] < S::zero() {
            for v in rows[i].iter_mut() {
                *v = -v.clone();
            }
            rhs[i] = -rhs[i].clone();
            negated[i] = true;
        }
    }

    let mut cost = vec![S::zero(); n_cols];
    let mut obj_shift = S::zero();
    for j in 0..n {
        let c = if obj_negated {
            -p.objective[j]
        } else {
            p.objective[j]
        };
        if c == 0.0 {
            continue;
        }
        let cs = conv::<S>(c)?;
        match &var_map[j] {
            VarMap::Affine { col, sign, shift } => {
                let signed = if *sign { cs.clone() } else { -cs.clone() };
                cost[*col] = cost[*col].clone() + signed;
                if *shift != 0.0 {
                    obj_shift = obj_shift + cs * conv::<S>(*shift)?;
                }
            }
            VarMap::Split { pos, neg } => {
                cost[*pos] = cost[*pos].clone() + cs.clone();
                cost[*neg] = cost[*neg].clone() - cs;
            }
        }
    }

    Ok(StdForm {
        rows,
        rhs,
        negated,
        cost,
        obj_shift,
        obj_negated,
        var_map,
        n_cols,
        n_input_rows,
    })
}

struct Tableau<S> {
    m: usize,
    n_cols: usize, // without artificials
    // m rows of n_cols + m + 1 entries (artificials, then rhs)
    rows: Vec<Vec<S>>,
    // reduced-cost row, same width (rhs slot holds -objective)
    red: Vec<S>,
    basis: Vec<usize>,
    tol: S,
}

impl<S: Scalar> Tableau<S> {
    fn width(&self) -> usize {
        self.n_cols + self.m + 1
    }

    fn rhs_col(&self) -> usize {
        self.n_cols + self.m
    }

    fn new(sf: &StdForm<S>) -> Self {
        let m = sf.rows.len();
        let n_cols = sf.n_cols;
        let width = n_cols + m + 1;
        let mut rows = Vec::with_capacity(m);
        for i in 0..m {
            let mut row = vec![S::zero(); width];
            row[..n_cols].clone_from_slice(&sf.rows[i]);
            row[n_cols + i] = S::one();
            row[width - 1] = sf.rhs[i].clone();
            rows.push(row);
        }
        Tableau {
            m,
            n_cols,
            rows,
            red: vec![S::zero(); width],
            basis: (n_cols..n_cols + m).collect(),
            tol: S::default_tol(),
        }
    }

    fn set_costs(&mut self, cost: &[S]) {
        // red = cost - c_B^T * rows, with the artificial block and rhs included
        let width = self.width();
        let mut red = vec![S::zero(); width];
        red[..cost.len()].clone_from_slice(cost);
        for i in 0..self.m {
            let cb = if self.basis[i] < cost.len() {
                cost[self.basis[i]].clone()
            } else {
                S::zero()
            };
            if cb.is_zero_within(&self.tol) {
                continue;
            }
            for j in 0..width {
                red[j] = red[j].clone() - cb.clone() * self.rows[i][j].clone();
            }
        }
        self.red = red;
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.width();
        let piv = self.rows[row][col].clone();
        for j in 0..width {
            self.rows[row][j] = self.rows[row][j].clone() / piv.clone();
        }
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let f = self.rows[i][col].clone();
            if f.is_zero_within(&self.tol) {
                self.rows[i][col] = S::zero();
                continue;
            }
            for j in 0..width {
                self.rows[i][j] = self.rows[i][j].clone() - f.clone() * self.rows[row][j].clone();
            }
            self.rows[i][col] = S::zero();
        }
        let f = self.red[col].clone();
        if !f.is_zero_within(&self.tol) {
            for j in 0..width {
                self.red[j] = self.red[j].clone() - f.clone() * self.rows[row][j].clone();
            }
        }
        self.red[col] = S::zero();
        self.basis[row] = col;
    }

    /// Minimize the current cost row. `allow_artificial` permits artificial
    /// columns to enter (phase 1 only). Returns Unbounded or Optimal.
    fn run(&mut self, allow_artificial: bool) -> Result<LpStatus, LpError> {
        let n_enter = if allow_artificial {
            self.n_cols + self.m
        } else {
            self.n_cols
        };
        let rhs_col = self.rhs_col();
        let stall_cap = 2 * self.m + 20;
        let max_iter = 400 * (self.m + self.n_cols) + 20_000;
        let mut stall = 0usize;
        // columns whose reduced cost is barely past the tolerance but whose
        // entries admit no pivot are roundoff artifacts, not rays
        let strong = self.tol.clone() * S::from_f64(1000.0).unwrap();
        for _ in 0..max_iter {
            // switch to Bland's rule only during a degenerate stall; once a
            // pivot makes real progress no basis can recur, so Dantzig is
            // safe again
            let bland = stall >= stall_cap;
            let mut skip = vec![false; n_enter];
            let (col, row, ratio) = loop {
                // entering column
                let mut enter: Option<usize> = None;
                if bland {
                    for j in 0..n_enter {
                        if !skip[j] && self.red[j].is_neg_within(&self.tol) {
                            enter = Some(j);
                            break;
                        }
                    }
                } else {
                    let mut best: Option<(usize, S)> = None;
                    for j in 0..n_enter {
                        if !skip[j] && self.red[j].is_neg_within(&self.tol) {
                            match &best {
                                Some((_, b)) if self.red[j] >= *b => {}
                                _ => best = Some((j, self.red[j].clone())),
                            }
                        }
                    }
                    enter = best.map(|(j, _)| j);
                }
                let Some(col) = enter else {
                    return Ok(LpStatus::Optimal);
                };
                // ratio test; outside Bland mode ties prefer the larger
                // pivot element for numerical stability, under Bland the
                // smaller basis index to preserve the anti-cycling guarantee
                let mut leave: Option<(usize, S, S)> = None;
                for i in 0..self.m {
                    let a = self.rows[i][col].clone();
                    if !a.is_pos_within(&self.tol) {
                        continue;
                    }
                    let ratio = self.rows[i][rhs_col].clone() / a.clone();
                    let better = match &leave {
                        None => true,
                        Some((li, lr, la)) => {
                            ratio < *lr
                                || (ratio == *lr
                                    && if bland {
                                        self.basis[i] < self.basis[*li]
                                    } else {
                                        a > *la
                                    })
                        }
                    };
                    if better {
                        leave = Some((i, ratio, a));
                    }
                }
                let leave = leave.map(|(i, r, _)| (i, r));
                match leave {
                    Some((row, ratio)) => break (col, row, ratio),
                    None => {
                        if self.red[col].is_neg_within(&strong) {
                            return Ok(LpStatus::Unbounded);
                        }
                        skip[col] = true;
                    }
                }
            };
            if ratio.is_zero_within(&self.tol) {
                stall += 1;
            } else {
                stall = 0;
            }
            self.pivot(row, col);
        }
        Err(LpError::IterationLimit)
    }

    /// After phase 1: pivot basic artificials onto structural columns where
    /// possible. Rows that cannot be cleared are redundant; their
    /// artificials stay basic at value zero.
    fn drive_out_artificials(&mut self) {
        for i in 0..self.m {
            if self.basis[i] < self.n_cols {
                continue;
            }
            let col = (0..self.n_cols).find(|&j| !self.rows[i][j].is_zero_within(&self.tol));
            if let Some(col) = col {
                self.pivot(i, col);
            }
        }
    }

    fn basic_values(&self) -> Vec<S> {
        let rhs_col = self.rhs_col();
        let mut x = vec![S::zero(); self.n_cols + self.m];
        for i in 0..self.m {
            x[self.basis[i]] = self.rows[i][rhs_col].clone();
        }
        x
    }

    /// y_i = c_art_i - red[art_i] for the current cost row.
    fn row_multipliers(&self, art_cost: &S) -> Vec<S> {
        (0..self.m)
            .map(|i| art_cost.clone() - self.red[self.n_cols + i].clone())
            .collect()
    }
}

pub fn solve_generic<S: Scalar>(p: &LpProblem) -> Result<Outcome<S>, LpError> {
    let n = p.num_vars();
    if n == 0 {
        return solve_trivial(p);
    }
    let sf = build_std_form::<S>(p)?;
    let m = sf.rows.len();
    let mut tab = Tableau::new(&sf);

    // feasibility scale for the phase-1 verdict in float mode
    let mut bscale = S::one();
    for b in &sf.rhs {
        if *b > bscale {
            bscale = b.clone();
        }
    }
    let feas_tol = tab.tol.clone() * bscale;

    if m > 0 {
        // phase 1: minimize the sum of artificials
        let mut c1 = vec![S::zero(); sf.n_cols + m];
        for item in c1.iter_mut().skip(sf.n_cols) {
            *item = S::one();
        }
        tab.set_costs(&c1);
        let st = tab.run(true)?;
        debug_assert!(st == LpStatus::Optimal, "phase 1 cannot be unbounded");
        let rhs_col = tab.rhs_col();
        let infeas: S = {
            let mut acc = S::zero();
            for i in 0..m {
                if tab.basis[i] >= sf.n_cols {
                    acc = acc + tab.rows[i][rhs_col].clone();
                }
            }
            acc
        };
        if infeas > feas_tol {
            let y = tab.row_multipliers(&S::one());
            let (dual, dual_obj) = map_duals(&sf, &y);
            return Ok(Outcome {
                status: LpStatus::Infeasible,
                x: vec![S::zero(); n],
                objective: S::zero(),
                dual,
                dual_objective: dual_obj,
            });
        }
        tab.drive_out_artificials();
    }

    // phase 2
    let mut c2 = vec![S::zero(); sf.n_cols + m];
    c2[..sf.n_cols].clone_from_slice(&sf.cost);
    tab.set_costs(&c2);
    let st = tab.run(false)?;
    if st == LpStatus::Unbounded {
        return Ok(Outcome {
            status: LpStatus::Unbounded,
            x: vec![S::zero(); n],
            objective: S::zero(),
            dual: Vec::new(),
            dual_objective: S::zero(),
        });
    }

    let xs = tab.basic_values();
    let mut x = Vec::with_capacity(n);
    for vm in &sf.var_map {
        let v = match vm {
            VarMap::Affine { col, sign, shift } => {
                let base = if *sign {
                    xs[*col].clone()
                } else {
                    -xs[*col].clone()
                };
                base + conv::<S>(*shift)?
            }
            VarMap::Split { pos, neg } => xs[*pos].clone() - xs[*neg].clone(),
        };
        x.push(v);
    }
    let mut obj = sf.obj_shift.clone();
    for j in 0..sf.n_cols {
        obj = obj + sf.cost[j].clone() * xs[j].clone();
    }
    let y = tab.row_multipliers(&S::zero());
    let (dual, dual_obj_raw) = map_duals(&sf, &y);
    let dual_obj_shifted = dual_obj_raw + sf.obj_shift.clone();
    let (obj, dual_objective, dual) = if sf.obj_negated {
        (-obj, -dual_obj_shifted, dual.into_iter().map(|v| -v).collect())
    } else {
        (obj, dual_obj_shifted, dual)
    };
    Ok(Outcome {
        status: LpStatus::Optimal,
        x,
        objective: obj,
        dual,
        dual_objective,
    })
}

/// Multipliers for the caller's rows (undo row negation) plus the dual
/// objective value y^T b over all standard-form rows.
fn map_duals<S: Scalar>(sf: &StdForm<S>, y: &[S]) -> (Vec<S>, S) {
    let mut dual = Vec::with_capacity(sf.n_input_rows);
    let mut dual_obj = S::zero();
    for i in 0..sf.rows.len() {
        let yi = if sf.negated[i] {
            -y[i].clone()
        } else {
            y[i].clone()
        };
        // sf.rhs is post-negation, so undo it for the caller-side value
        let bi = if sf.negated[i] {
            -sf.rhs[i].clone()
        } else {
            sf.rhs[i].clone()
        };
        dual_obj = dual_obj + yi.clone() * bi;
        if i < sf.n_input_rows {
            dual.push(yi);
        }
    }
    (dual, dual_obj)
}

fn solve_trivial<S: Scalar>(p: &LpProblem) -> Result<Outcome<S>, LpError> {
    for (r, row) in p.rows.iter().enumerate() {
        let ok = match row.rel {
            Rel::Le => 0.0 <= row.rhs + f64::default_tol(),
            Rel::Ge => 0.0 >= row.rhs - f64::default_tol(),
            Rel::Eq => row.rhs.abs() <= f64::default_tol(),
        };
        if !ok {
            let mut dual = vec![S::zero(); p.rows.len()];
            let sign = if row.rhs > 0.0 { S::one() } else { -S::one() };
            dual[r] = sign;
            let dual_objective = conv::<S>(row.rhs.abs())?;
            return Ok(Outcome {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                objective: S::zero(),
                dual,
                dual_objective,
            });
        }
    }
    Ok(Outcome {
        status: LpStatus::Optimal,
        x: Vec::new(),
        objective: S::zero(),
        dual: vec![S::zero(); p.rows.len()],
        dual_objective: S::zero(),
    })
}
