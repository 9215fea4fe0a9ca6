//! Linear programs over undirected link flows.
//!
//! [`LpProblem`] is a general bounded-variable LP (`0 ≤ x ≤ ub`, equality
//! and `≤` rows, minimised linear objective) solved by a two-phase primal
//! simplex on a dense tableau. The entering rule is Dantzig's largest
//! reduced cost with lowest-index ties; after a run of degenerate pivots it
//! falls back to Bland's rule until the objective moves again, which rules
//! out cycling while keeping the pivot sequence deterministic.
//!
//! [`FlowLp`] builds the problems the capillary construction needs: two
//! nonnegative arc variables per link, one conservation row per node except
//! the sink, and optional load caps, fixed loads, and a shared bound
//! variable.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::netmodel::{LinkId, Network};

/// Equality and inequality residual tolerance on returned solutions.
pub const EPS_FEAS: f64 = 1e-8;
/// Objective optimality tolerance.
pub const EPS_OPT: f64 = 1e-7;
/// Load comparison tolerance for callers classifying links.
pub const EPS_LOAD: f64 = 1e-6;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-14;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("simplex did not converge within {0} pivots")]
    NoConvergence(usize),
    #[error("objective is unbounded below")]
    Unbounded,
    #[error("problem has a non-finite coefficient")]
    NonFinite,
    #[error("variable index {0} out of range")]
    BadVariable(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Eq,
    Le,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LpProblem {
    upper: Vec<f64>,
    objective: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective_value: f64,
    pub values: Vec<f64>,
    pub pivots: usize,
}

impl LpProblem {
    /// `num_vars` variables, each in `[0, +inf)`, zero objective.
    pub fn new(num_vars: usize) -> Self {
        Self {
            upper: vec![f64::INFINITY; num_vars],
            objective: vec![0.0; num_vars],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.upper.len()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn add_var(&mut self, upper: f64, cost: f64) -> usize {
        self.upper.push(upper);
        self.objective.push(cost);
        self.upper.len() - 1
    }

    pub fn set_upper(&mut self, var: usize, upper: f64) {
        self.upper[var] = upper;
    }

    pub fn upper(&self, var: usize) -> f64 {
        self.upper[var]
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, kind: RowKind, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, kind, rhs });
        self.rows.len() - 1
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        let finite = self.objective.iter().all(|c| c.is_finite())
            && self.upper.iter().all(|u| !u.is_nan() && *u >= 0.0);
        if !finite {
            return Err(LpError::NonFinite);
        }
        for row in &self.rows {
            if !row.rhs.is_finite() {
                return Err(LpError::NonFinite);
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(LpError::BadVariable(j));
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite);
                }
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound by `x`.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let viol = match row.kind {
                RowKind::Eq => (lhs - row.rhs).abs(),
                RowKind::Le => (lhs - row.rhs).max(0.0),
            };
            worst = worst.max(viol);
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(-v).max(v - self.upper[j]);
        }
        worst
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic,
    Lower,
    Upper,
}

struct Tableau {
    m: usize,
    ncols: usize,
    /// Row-major `m × ncols`, equal to `B⁻¹ A`.
    t: Vec<f64>,
    /// Values of basic variables, by row.
    xb: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    upper: Vec<f64>,
    /// Reduced costs of the active objective.
    d: Vec<f64>,
    first_artificial: usize,
    pivots: usize,
    max_pivots: usize,
    // original standard-form columns and rhs, for the final refinement
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn build(p: &LpProblem) -> Self {
        let n = p.num_vars();
        let m = p.rows.len();
        let slack_count = p.rows.iter().filter(|r| r.kind == RowKind::Le).count();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + slack_count];
        let mut b = vec![0.0; m];
        let mut upper = p.upper.clone();
        upper.extend(std::iter::repeat_n(f64::INFINITY, slack_count));

        let mut basis = vec![usize::MAX; m];
        let mut slack = n;
        let mut needs_artificial = Vec::new();
        for (i, row) in p.rows.iter().enumerate() {
            let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
            b[i] = sign * row.rhs;
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    match cols[j].last_mut() {
                        Some((r, v)) if *r == i => *v += sign * a,
                        _ => cols[j].push((i, sign * a)),
                    }
                }
            }
            if row.kind == RowKind::Le {
                cols[slack].push((i, sign));
                if sign > 0.0 {
                    basis[i] = slack;
                } else {
                    needs_artificial.push(i);
                }
                slack += 1;
            } else {
                needs_artificial.push(i);
            }
        }
        let first_artificial = cols.len();
        for &i in &needs_artificial {
            basis[i] = cols.len();
            cols.push(vec![(i, 1.0)]);
            upper.push(f64::INFINITY);
        }
        let ncols = cols.len();
        let mut t = vec![0.0; m * ncols];
        for (j, col) in cols.iter().enumerate() {
            for &(i, a) in col {
                t[i * ncols + j] = a;
            }
        }
        let mut state = vec![VarState::Lower; ncols];
        for &j in &basis {
            state[j] = VarState::Basic;
        }
        Self {
            m,
            ncols,
            t,
            xb: b.clone(),
            basis,
            state,
            upper,
            d: vec![0.0; ncols],
            first_artificial,
            pivots: 0,
            max_pivots: 50 * (m + ncols) + 1000,
            cols,
            b,
        }
    }

    /// Sets reduced costs for objective `c` over the current basis.
    fn price(&mut self, c: &[f64]) {
        self.d.copy_from_slice(c);
        for i in 0..self.m {
            let cb = c[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.ncols..(i + 1) * self.ncols];
                for (dj, &a) in self.d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        for i in 0..self.m {
            self.d[self.basis[i]] = 0.0;
        }
    }

    fn entering(&self, bland: bool, allow_artificial: bool) -> Option<(usize, f64)> {
        let limit = if allow_artificial {
            self.ncols
        } else {
            self.first_artificial
        };
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..limit {
            let dir = match self.state[j] {
                VarState::Lower if self.d[j] < -COST_TOL && self.upper[j] > 0.0 => 1.0,
                VarState::Upper if self.d[j] > COST_TOL => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            let score = self.d[j].abs();
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    fn run(&mut self, allow_artificial: bool) -> Result<Outcome, LpError> {
        let mut degenerate = 0usize;
        loop {
            if self.pivots >= self.max_pivots {
                return Err(LpError::NoConvergence(self.pivots));
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let Some((j, dir)) = self.entering(bland, allow_artificial) else {
                return Ok(Outcome::Optimal);
            };

            // Ratio test: the entering variable moves by theta in direction dir,
            // basic variable i changes at rate -dir * t[i][j].
            let mut theta = self.upper[j];
            let mut leave: Option<(usize, VarState)> = None;
            let mut leave_pivot = 0.0;
            for i in 0..self.m {
                let a = self.t[i * self.ncols + j];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let rate = -dir * a;
                let bvar = self.basis[i];
                let (limit, bound) = if rate < 0.0 {
                    (self.xb[i].max(0.0) / -rate, VarState::Lower)
                } else {
                    let ub = self.upper[bvar];
                    if ub.is_infinite() {
                        continue;
                    }
                    ((ub - self.xb[i]).max(0.0) / rate, VarState::Upper)
                };
                let better = match leave {
                    _ if limit < theta - 1e-12 => true,
                    None => limit <= theta,
                    Some((r, _)) if limit <= theta + 1e-12 => {
                        if bland {
                            bvar < self.basis[r]
                        } else {
                            a.abs() > leave_pivot
                                || (a.abs() == leave_pivot && bvar < self.basis[r])
                        }
                    }
                    _ => false,
                };
                if better {
                    theta = theta.min(limit);
                    leave = Some((i, bound));
                    leave_pivot = a.abs();
                }
            }
            if theta.is_infinite() {
                return Ok(Outcome::Unbounded);
            }

            if theta > 1e-12 {
                degenerate = 0;
            } else {
                degenerate += 1;
            }
            self.pivots += 1;
            for i in 0..self.m {
                let a = self.t[i * self.ncols + j];
                if a != 0.0 {
                    self.xb[i] -= dir * theta * a;
                }
            }

            match leave {
                None => {
                    // bound flip
                    self.state[j] = if self.state[j] == VarState::Lower {
                        VarState::Upper
                    } else {
                        VarState::Lower
                    };
                }
                Some((r, bound)) => {
                    let start = if self.state[j] == VarState::Upper {
                        self.upper[j]
                    } else {
                        0.0
                    };
                    let old = self.basis[r];
                    self.state[old] = bound;
                    self.state[j] = VarState::Basic;
                    self.basis[r] = j;
                    self.pivot(r, j);
                    self.xb[r] = start + dir * theta;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let nc = self.ncols;
        let p = self.t[r * nc + j];
        let mut nz: Vec<usize> = Vec::new();
        for k in 0..nc {
            let v = &mut self.t[r * nc + k];
            if *v != 0.0 {
                *v /= p;
                if v.abs() < DROP_TOL {
                    *v = 0.0;
                } else {
                    nz.push(k);
                }
            }
        }
        self.t[r * nc + j] = 1.0;
        let (before, rest) = self.t.split_at_mut(r * nc);
        let (prow, after) = rest.split_at_mut(nc);
        for row in before
            .chunks_exact_mut(nc)
            .chain(after.chunks_exact_mut(nc))
        {
            let f = row[j];
            if f == 0.0 {
                continue;
            }
            for &k in &nz {
                let v = row[k] - f * prow[k];
                row[k] = if v.abs() < DROP_TOL { 0.0 } else { v };
            }
            row[j] = 0.0;
        }
        let f = self.d[j];
        if f != 0.0 {
            for &k in &nz {
                self.d[k] -= f * prow[k];
            }
            self.d[j] = 0.0;
        }
    }

    fn primal_values(&self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.ncols)
            .map(|j| match self.state[j] {
                VarState::Upper => self.upper[j],
                _ => 0.0,
            })
            .collect();
        for (i, &bv) in self.basis.iter().enumerate() {
            x[bv] = self.xb[i];
        }
        x
    }

    /// Recomputes basic values by solving `B x_B = b − N x_N` directly,
    /// removing drift accumulated over tableau updates.
    fn refine(&self, x: &mut [f64]) {
        if self.m == 0 {
            return;
        }
        let mut rhs = DVector::from_column_slice(&self.b);
        for (j, &xj) in x.iter().enumerate().take(self.ncols) {
            if self.state[j] != VarState::Basic && xj != 0.0 {
                for &(i, a) in &self.cols[j] {
                    rhs[i] -= a * xj;
                }
            }
        }
        let mut bmat = DMatrix::zeros(self.m, self.m);
        for (k, &bv) in self.basis.iter().enumerate() {
            for &(i, a) in &self.cols[bv] {
                bmat[(i, k)] = a;
            }
        }
        if let Some(sol) = bmat.lu().solve(&rhs) {
            if sol.iter().all(|v| v.is_finite()) {
                for (k, &bv) in self.basis.iter().enumerate() {
                    x[bv] = sol[k];
                }
            }
        }
        for (j, v) in x.iter_mut().enumerate() {
            *v = v.clamp(0.0, self.upper[j]);
        }
    }
}

/// Solves `problem`. Infeasibility is a status; failure to converge and
/// unboundedness are errors.
pub fn solve(problem: &LpProblem) -> Result<LpSolution, LpError> {
    problem.validate()?;
    let n = problem.num_vars();
    let mut tab = Tableau::build(problem);

    let mut phase1 = vec![0.0; tab.ncols];
    phase1[tab.first_artificial..].fill(1.0);
    tab.price(&phase1);
    if let Outcome::Unbounded = tab.run(true)? {
        return Err(LpError::NoConvergence(tab.pivots));
    }
    let infeasibility: f64 = (0..tab.m)
        .filter(|&i| tab.basis[i] >= tab.first_artificial)
        .map(|i| tab.xb[i].max(0.0))
        .sum();
    let scale = 1.0 + tab.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if infeasibility > PHASE1_TOL * scale {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            objective_value: f64::NAN,
            values: Vec::new(),
            pivots: tab.pivots,
        });
    }
    for j in tab.first_artificial..tab.ncols {
        tab.upper[j] = 0.0;
        if tab.state[j] == VarState::Upper {
            tab.state[j] = VarState::Lower;
        }
    }

    let mut cost = vec![0.0; tab.ncols];
    cost[..n].copy_from_slice(&problem.objective);
    tab.price(&cost);
    if let Outcome::Unbounded = tab.run(false)? {
        return Err(LpError::Unbounded);
    }

    let mut x = tab.primal_values();
    tab.refine(&mut x);
    x.truncate(n);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: problem.objective_at(&x),
        values: x,
        pivots: tab.pivots,
    })
}

/// A flow LP over a network: arc `2l` runs along the stored orientation of
/// link `l`, arc `2l + 1` against it. Conservation rows route one unit from
/// source to sink.
#[derive(Debug, Clone)]
pub struct FlowLp<'a> {
    net: &'a Network,
    problem: LpProblem,
    bound_var: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct FlowLpSolution {
    pub status: LpStatus,
    pub objective_value: f64,
    /// Arc values, two per link.
    pub arcs: Vec<f64>,
    /// Value of the shared bound variable, if the problem had one.
    pub bound: Option<f64>,
    pub max_residual: f64,
}

impl FlowLpSolution {
    /// Arc sum: the link's load as the LP sees it.
    pub fn load(&self, link: LinkId) -> f64 {
        self.arcs[2 * link] + self.arcs[2 * link + 1]
    }

    /// Net flow along the stored orientation.
    pub fn signed(&self, link: LinkId) -> f64 {
        self.arcs[2 * link] - self.arcs[2 * link + 1]
    }
}

impl<'a> FlowLp<'a> {
    pub fn new(net: &'a Network) -> Self {
        let mut problem = LpProblem::new(2 * net.link_count());
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); net.node_count()];
        for (l, &(u, v)) in net.links().iter().enumerate() {
            rows[u].push((2 * l, 1.0));
            rows[u].push((2 * l + 1, -1.0));
            rows[v].push((2 * l, -1.0));
            rows[v].push((2 * l + 1, 1.0));
        }
        // The sink row is implied by the others.
        for (node, coeffs) in rows.into_iter().enumerate() {
            if node == net.sink() {
                continue;
            }
            let supply = if node == net.source() { 1.0 } else { 0.0 };
            problem.add_row(coeffs, RowKind::Eq, supply);
        }
        Self {
            net,
            problem,
            bound_var: None,
        }
    }

    pub fn problem(&self) -> &LpProblem {
        &self.problem
    }

    /// Adds the shared bound variable `u` and makes it the objective.
    pub fn minimize_bound(&mut self) -> usize {
        let u = self.problem.add_var(f64::INFINITY, 1.0);
        self.bound_var = Some(u);
        u
    }

    /// `load(l) ≤ u` for the bound variable.
    pub fn cap_load_by_bound(&mut self, link: LinkId) {
        let u = self.bound_var.expect("bound variable not added");
        self.problem.add_row(
            vec![(2 * link, 1.0), (2 * link + 1, 1.0), (u, -1.0)],
            RowKind::Le,
            0.0,
        );
    }

    /// `load(l) ≤ cap` as an explicit row.
    pub fn cap_load(&mut self, link: LinkId, cap: f64) {
        self.problem
            .add_row(vec![(2 * link, 1.0), (2 * link + 1, 1.0)], RowKind::Le, cap);
    }

    /// Caps each arc of `link` at `cap`, bounding the net flow magnitude
    /// without a row. Loads under minimisation never use both arcs, so this
    /// is equivalent to `cap_load` whenever the link carries objective cost.
    pub fn cap_arcs(&mut self, link: LinkId, cap: f64) {
        self.problem.set_upper(2 * link, cap);
        self.problem.set_upper(2 * link + 1, cap);
    }

    /// Fixes the load of `link` to `value`, flowing `forward` along the
    /// stored orientation or against it; the opposite arc is held at zero.
    pub fn fix_load(&mut self, link: LinkId, forward: bool, value: f64) {
        let (on, off) = if forward {
            (2 * link, 2 * link + 1)
        } else {
            (2 * link + 1, 2 * link)
        };
        self.problem.add_row(vec![(on, 1.0)], RowKind::Eq, value);
        self.problem.set_upper(off, 0.0);
    }

    /// Adds `weight · load(l)` to the objective.
    pub fn add_load_cost(&mut self, link: LinkId, weight: f64) {
        for arc in [2 * link, 2 * link + 1] {
            let c = self.problem.objective[arc];
            self.problem.set_cost(arc, c + weight);
        }
    }

    pub fn solve(&self) -> Result<FlowLpSolution, LpError> {
        let sol = solve(&self.problem)?;
        if sol.status == LpStatus::Infeasible {
            return Ok(FlowLpSolution {
                status: LpStatus::Infeasible,
                objective_value: f64::NAN,
                arcs: Vec::new(),
                bound: None,
                max_residual: f64::NAN,
            });
        }
        let arcs = sol.values[..2 * self.net.link_count()].to_vec();
        Ok(FlowLpSolution {
            status: LpStatus::Optimal,
            objective_value: sol.objective_value,
            bound: self.bound_var.map(|u| sol.values[u]),
            max_residual: self.problem.max_residual(&sol.values),
            arcs,
        })
    }
}

/// The layer-1 style problem: minimise the maximal load over all links.
pub fn min_max_load(net: &Network) -> Result<FlowLpSolution, LpError> {
    let mut lp = FlowLp::new(net);
    lp.minimize_bound();
    for l in 0..net.link_count() {
        lp.cap_load_by_bound(l);
    }
    lp.solve()
}
