//! Semidefinite program builder, backend lowering and solution verification.
//!
//! Problems are stated over complex Hermitian matrix variables (all of them
//! PSD) and real scalar variables. Solving lowers the problem to the real
//! conic form `min qᵀx s.t. Ax + s = b, s ∈ K` accepted by Clarabel:
//!
//! * a Hermitian `d×d` variable is parametrized by `d²` reals: the diagonal,
//!   then `(Re V_ij, Im V_ij)` for `i < j` in row-major order;
//! * a Hermitian PSD condition `E ⪰ 0` becomes the real symmetric condition
//!   `[[Re E, −Im E], [Im E, Re E]] ⪰ 0` on a `2d×2d` block, stored as the
//!   scaled upper triangle (column-major, off-diagonals times √2);
//! * a Hermitian equality `E = 0` becomes `d²` real equalities.
//!
//! [`verify_solution`] recomputes every residual from the returned variable
//! values with plain dense linear algebra, so nothing downstream has to trust
//! the backend.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{psd_residual, trace_product, HermitianOperator, C64};

pub const DEFAULT_SOLVER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PsdVar(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScalarVar(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixTerm {
    /// `coef · V`
    Var { coef: f64, var: PsdVar },
    /// `t · B` for a scalar variable `t` and a constant `B`
    Scaled { var: ScalarVar, matrix: HermitianOperator },
}

/// Affine Hermitian-valued expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixExpr {
    pub dim: usize,
    pub constant: Option<HermitianOperator>,
    pub terms: Vec<MatrixTerm>,
}

impl MatrixExpr {
    pub fn new(dim: usize) -> Self {
        MatrixExpr {
            dim,
            constant: None,
            terms: Vec::new(),
        }
    }

    pub fn plus_constant(mut self, c: &HermitianOperator) -> Self {
        self.constant = Some(match self.constant.take() {
            Some(prev) => &prev + c,
            None => c.clone(),
        });
        self
    }

    pub fn plus_var(mut self, coef: f64, var: PsdVar) -> Self {
        self.terms.push(MatrixTerm::Var { coef, var });
        self
    }

    pub fn plus_scaled(mut self, var: ScalarVar, matrix: HermitianOperator) -> Self {
        self.terms.push(MatrixTerm::Scaled { var, matrix });
        self
    }

    pub fn evaluate(&self, psd: &[HermitianOperator], scalars: &[f64]) -> HermitianOperator {
        let mut acc = self
            .constant
            .clone()
            .unwrap_or_else(|| HermitianOperator::zeros(self.dim));
        for term in &self.terms {
            acc = match term {
                MatrixTerm::Var { coef, var } => &acc + &psd[var.0].scale(*coef),
                MatrixTerm::Scaled { var, matrix } => &acc + &matrix.scale(scalars[var.0]),
            };
        }
        acc
    }
}

/// Affine real-valued expression `c + ∑ tr[A·V] + ∑ coef·t`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalarExpr {
    pub constant: f64,
    pub traces: Vec<(HermitianOperator, PsdVar)>,
    pub scalars: Vec<(f64, ScalarVar)>,
}

impl ScalarExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn plus_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn plus_trace(mut self, weight: HermitianOperator, var: PsdVar) -> Self {
        self.traces.push((weight, var));
        self
    }

    pub fn plus_scalar(mut self, coef: f64, var: ScalarVar) -> Self {
        self.scalars.push((coef, var));
        self
    }

    pub fn evaluate(&self, psd: &[HermitianOperator], scalars: &[f64]) -> f64 {
        let mut acc = self.constant;
        for (a, v) in &self.traces {
            acc += trace_product(a, &psd[v.0]);
        }
        for (coef, v) in &self.scalars {
            acc += coef * scalars[v.0];
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdVarDecl {
    pub name: String,
    pub dim: usize,
}

/// A semidefinite program. Every matrix variable is constrained PSD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub psd_vars: Vec<PsdVarDecl>,
    pub scalar_vars: Vec<String>,
    pub sense: Sense,
    pub objective: ScalarExpr,
    /// Each expression is constrained to equal zero.
    pub matrix_eqs: Vec<MatrixExpr>,
    /// Each expression is constrained to equal zero.
    pub scalar_eqs: Vec<ScalarExpr>,
    /// Each expression is constrained PSD.
    pub psd_constraints: Vec<MatrixExpr>,
}

impl SdpProblem {
    pub fn new(sense: Sense) -> Self {
        SdpProblem {
            psd_vars: Vec::new(),
            scalar_vars: Vec::new(),
            sense,
            objective: ScalarExpr::new(),
            matrix_eqs: Vec::new(),
            scalar_eqs: Vec::new(),
            psd_constraints: Vec::new(),
        }
    }

    pub fn add_psd_var(&mut self, name: impl Into<String>, dim: usize) -> PsdVar {
        self.psd_vars.push(PsdVarDecl { name: name.into(), dim });
        PsdVar(self.psd_vars.len() - 1)
    }

    pub fn add_scalar_var(&mut self, name: impl Into<String>) -> ScalarVar {
        self.scalar_vars.push(name.into());
        ScalarVar(self.scalar_vars.len() - 1)
    }

    pub fn set_objective(&mut self, objective: ScalarExpr) {
        self.objective = objective;
    }

    pub fn add_matrix_eq(&mut self, expr: MatrixExpr) {
        self.matrix_eqs.push(expr);
    }

    pub fn add_scalar_eq(&mut self, expr: ScalarExpr) {
        self.scalar_eqs.push(expr);
    }

    pub fn add_psd_constraint(&mut self, expr: MatrixExpr) {
        self.psd_constraints.push(expr);
    }

    /// Checks that every expression references declared variables with matching dimensions.
    pub fn validate(&self) -> Result<()> {
        let check_matrix = |e: &MatrixExpr, what: &str| -> Result<()> {
            if e.dim == 0 {
                return Err(Error::Invalid(format!("{what}: zero-dimensional expression")));
            }
            if let Some(c) = &e.constant {
                if c.dim() != e.dim {
                    return Err(Error::Invalid(format!("{what}: constant has wrong dimension")));
                }
            }
            for t in &e.terms {
                match t {
                    MatrixTerm::Var { var, .. } => {
                        let decl = self
                            .psd_vars
                            .get(var.0)
                            .ok_or_else(|| Error::Invalid(format!("{what}: undeclared matrix variable {}", var.0)))?;
                        if decl.dim != e.dim {
                            return Err(Error::Invalid(format!(
                                "{what}: variable {} has dimension {}, expression {}",
                                decl.name, decl.dim, e.dim
                            )));
                        }
                    }
                    MatrixTerm::Scaled { var, matrix } => {
                        if var.0 >= self.scalar_vars.len() {
                            return Err(Error::Invalid(format!("{what}: undeclared scalar variable {}", var.0)));
                        }
                        if matrix.dim() != e.dim {
                            return Err(Error::Invalid(format!("{what}: coefficient has wrong dimension")));
                        }
                    }
                }
            }
            Ok(())
        };
        let check_scalar = |e: &ScalarExpr, what: &str| -> Result<()> {
            for (a, v) in &e.traces {
                let decl = self
                    .psd_vars
                    .get(v.0)
                    .ok_or_else(|| Error::Invalid(format!("{what}: undeclared matrix variable {}", v.0)))?;
                if decl.dim != a.dim() {
                    return Err(Error::Invalid(format!(
                        "{what}: trace weight for {} has wrong dimension",
                        decl.name
                    )));
                }
            }
            for (_, v) in &e.scalars {
                if v.0 >= self.scalar_vars.len() {
                    return Err(Error::Invalid(format!("{what}: undeclared scalar variable {}", v.0)));
                }
            }
            Ok(())
        };
        if self.psd_vars.iter().any(|d| d.dim == 0) {
            return Err(Error::Invalid("zero-dimensional matrix variable".into()));
        }
        check_scalar(&self.objective, "objective")?;
        for (i, e) in self.matrix_eqs.iter().enumerate() {
            check_matrix(e, &format!("matrix equality {i}"))?;
        }
        for (i, e) in self.scalar_eqs.iter().enumerate() {
            check_scalar(e, &format!("scalar equality {i}"))?;
        }
        for (i, e) in self.psd_constraints.iter().enumerate() {
            check_matrix(e, &format!("PSD constraint {i}"))?;
        }
        Ok(())
    }

    /// Number of real unknowns after lowering.
    pub fn num_real_unknowns(&self) -> usize {
        self.psd_vars.iter().map(|d| d.dim * d.dim).sum::<usize>() + self.scalar_vars.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Inaccurate,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// Objective recomputed from the variable values.
    pub objective_value: f64,
    pub psd_values: Vec<HermitianOperator>,
    pub scalar_values: Vec<f64>,
    pub iterations: u32,
    pub diagnostic: Option<String>,
}

impl SdpSolution {
    pub fn psd(&self, v: PsdVar) -> &HermitianOperator {
        &self.psd_values[v.0]
    }

    pub fn scalar(&self, v: ScalarVar) -> f64 {
        self.scalar_values[v.0]
    }

    /// Looks a variable up by its declared name.
    pub fn value_by_name(&self, problem: &SdpProblem, name: &str) -> Option<VarValue<'_>> {
        if let Some(i) = problem.psd_vars.iter().position(|d| d.name == name) {
            return self.psd_values.get(i).map(VarValue::Matrix);
        }
        problem
            .scalar_vars
            .iter()
            .position(|n| n == name)
            .and_then(|i| self.scalar_values.get(i).copied().map(VarValue::Scalar))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarValue<'a> {
    Matrix(&'a HermitianOperator),
    Scalar(f64),
}

/// Residuals of a candidate solution, recomputed from scratch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Largest absolute entry over all equality constraints.
    pub max_eq_residual: f64,
    /// Smallest eigenvalue over PSD constraints and matrix variables.
    pub min_psd_residual: f64,
    pub objective: f64,
    /// `|objective − reported objective|`.
    pub objective_deviation: f64,
}

impl ResidualReport {
    pub fn within(&self, tol: f64) -> bool {
        self.max_eq_residual <= tol && self.min_psd_residual >= -tol
    }
}

pub fn verify_solution(problem: &SdpProblem, solution: &SdpSolution) -> Result<ResidualReport> {
    if solution.psd_values.len() != problem.psd_vars.len() || solution.scalar_values.len() != problem.scalar_vars.len()
    {
        return Err(Error::Invalid(format!(
            "solution has {} matrix and {} scalar values, problem declares {} and {}",
            solution.psd_values.len(),
            solution.scalar_values.len(),
            problem.psd_vars.len(),
            problem.scalar_vars.len()
        )));
    }
    for (decl, value) in problem.psd_vars.iter().zip(&solution.psd_values) {
        if decl.dim != value.dim() {
            return Err(Error::DimensionMismatch {
                expected: decl.dim,
                found: value.dim(),
            });
        }
    }
    let psd = &solution.psd_values;
    let scalars = &solution.scalar_values;
    let mut max_eq = 0.0f64;
    for e in &problem.matrix_eqs {
        max_eq = max_eq.max(e.evaluate(psd, scalars).max_abs_entry());
    }
    for e in &problem.scalar_eqs {
        max_eq = max_eq.max(e.evaluate(psd, scalars).abs());
    }
    let mut min_psd = f64::INFINITY;
    for e in &problem.psd_constraints {
        min_psd = min_psd.min(psd_residual(&e.evaluate(psd, scalars)));
    }
    for v in psd {
        min_psd = min_psd.min(psd_residual(v));
    }
    let objective = problem.objective.evaluate(psd, scalars);
    Ok(ResidualReport {
        max_eq_residual: max_eq,
        min_psd_residual: min_psd,
        objective,
        objective_deviation: (objective - solution.objective_value).abs(),
    })
}

/// Column layout of one Hermitian variable in the real parameter vector.
#[derive(Debug, Clone, Copy)]
struct HermLayout {
    offset: usize,
    dim: usize,
}

impl HermLayout {
    fn diag(&self, i: usize) -> usize {
        self.offset + i
    }

    fn pair(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        // number of pairs (a, b), a < b, preceding (i, j) in row-major order
        let before = i * (2 * self.dim - i - 1) / 2 + (j - i - 1);
        self.offset + self.dim + 2 * before
    }

    fn re(&self, i: usize, j: usize) -> usize {
        self.pair(i, j)
    }

    fn im(&self, i: usize, j: usize) -> usize {
        self.pair(i, j) + 1
    }

    fn unpack(&self, x: &[f64]) -> HermitianOperator {
        let d = self.dim;
        let m = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(x[self.diag(i)], 0.0)
            } else if i < j {
                C64::new(x[self.re(i, j)], x[self.im(i, j)])
            } else {
                C64::new(x[self.re(j, i)], -x[self.im(j, i)])
            }
        });
        HermitianOperator::hermitize(&m)
    }
}

/// Sparse affine form `constant + ∑ coef·x[col]`.
#[derive(Debug, Clone, Default)]
struct Form {
    constant: f64,
    coefs: Vec<(usize, f64)>,
}

impl Form {
    fn scaled(&self, factor: f64) -> Form {
        Form {
            constant: self.constant * factor,
            coefs: self.coefs.iter().map(|&(c, v)| (c, v * factor)).collect(),
        }
    }
}

struct Lowering {
    layouts: Vec<HermLayout>,
    scalar_offset: usize,
    n: usize,
}

impl Lowering {
    fn new(problem: &SdpProblem) -> Self {
        let mut offset = 0;
        let layouts = problem
            .psd_vars
            .iter()
            .map(|d| {
                let l = HermLayout { offset, dim: d.dim };
                offset += d.dim * d.dim;
                l
            })
            .collect();
        Lowering {
            layouts,
            scalar_offset: offset,
            n: offset + problem.scalar_vars.len(),
        }
    }

    /// Real and imaginary parts of entry `(i, j)` of `expr` as affine forms.
    fn entry_forms(&self, expr: &MatrixExpr, i: usize, j: usize) -> (Form, Form) {
        let mut re = Form::default();
        let mut im = Form::default();
        if let Some(c) = &expr.constant {
            let z = c.entry(i, j);
            re.constant += z.re;
            im.constant += z.im;
        }
        for term in &expr.terms {
            match term {
                MatrixTerm::Var { coef, var } => {
                    let l = self.layouts[var.0];
                    if i == j {
                        re.coefs.push((l.diag(i), *coef));
                    } else if i < j {
                        re.coefs.push((l.re(i, j), *coef));
                        im.coefs.push((l.im(i, j), *coef));
                    } else {
                        re.coefs.push((l.re(j, i), *coef));
                        im.coefs.push((l.im(j, i), -*coef));
                    }
                }
                MatrixTerm::Scaled { var, matrix } => {
                    let z = matrix.entry(i, j);
                    let col = self.scalar_offset + var.0;
                    if z.re != 0.0 {
                        re.coefs.push((col, z.re));
                    }
                    if z.im != 0.0 {
                        im.coefs.push((col, z.im));
                    }
                }
            }
        }
        (re, im)
    }

    fn scalar_form(&self, expr: &ScalarExpr) -> Form {
        let mut f = Form {
            constant: expr.constant,
            coefs: Vec::new(),
        };
        for (a, var) in &expr.traces {
            let l = self.layouts[var.0];
            for i in 0..l.dim {
                f.coefs.push((l.diag(i), a.entry(i, i).re));
                for j in (i + 1)..l.dim {
                    let z = a.entry(i, j);
                    f.coefs.push((l.re(i, j), 2.0 * z.re));
                    f.coefs.push((l.im(i, j), 2.0 * z.im));
                }
            }
        }
        for (coef, var) in &expr.scalars {
            f.coefs.push((self.scalar_offset + var.0, *coef));
        }
        f
    }

    /// Rows of the scaled upper triangle of the real embedding of `expr`.
    fn embedding_rows(&self, expr: &MatrixExpr) -> Vec<Form> {
        let d = expr.dim;
        let mut cache = vec![None; d * d];
        let mut entry = |i: usize, j: usize| -> (Form, Form) {
            cache[i * d + j]
                .get_or_insert_with(|| self.entry_forms(expr, i, j))
                .clone()
        };
        let n2 = 2 * d;
        let mut rows = Vec::with_capacity(n2 * (n2 + 1) / 2);
        for col in 0..n2 {
            for row in 0..=col {
                let (ia, ba) = (row % d, row / d);
                let (ib, bb) = (col % d, col / d);
                let (re, im) = entry(ia, ib);
                let form = match (ba, bb) {
                    (0, 0) | (1, 1) => re,
                    (0, 1) => im.scaled(-1.0),
                    _ => unreachable!("upper triangle never reaches the lower-left block"),
                };
                rows.push(if row == col {
                    form
                } else {
                    form.scaled(std::f64::consts::SQRT_2)
                });
            }
        }
        rows
    }

    fn equality_rows(&self, expr: &MatrixExpr) -> Vec<Form> {
        let d = expr.dim;
        let mut rows = Vec::with_capacity(d * d);
        for i in 0..d {
            rows.push(self.entry_forms(expr, i, i).0);
            for j in (i + 1)..d {
                let (re, im) = self.entry_forms(expr, i, j);
                rows.push(re);
                rows.push(im);
            }
        }
        rows
    }
}

/// Solves `problem` with Clarabel and checks the answer with [`verify_solution`].
///
/// Backend trouble is reported through the status, not as an error; an error
/// means the problem itself is malformed.
pub fn solve_sdp(problem: &SdpProblem, solver_tol: f64) -> Result<SdpSolution> {
    problem.validate()?;
    let low = Lowering::new(problem);

    let mut rows_i = Vec::new();
    let mut cols_j = Vec::new();
    let mut vals = Vec::new();
    let mut b = Vec::new();
    let mut cones = Vec::new();

    // Equalities: A x = b with A the linear part and b the negated constant.
    let mut eq_rows: Vec<Form> = Vec::new();
    for e in &problem.matrix_eqs {
        eq_rows.extend(low.equality_rows(e));
    }
    for e in &problem.scalar_eqs {
        eq_rows.push(low.scalar_form(e));
    }
    if !eq_rows.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(eq_rows.len()));
    }
    for form in eq_rows {
        let r = b.len();
        for (c, v) in form.coefs {
            rows_i.push(r);
            cols_j.push(c);
            vals.push(v);
        }
        b.push(-form.constant);
    }

    // PSD blocks: s = constant + L x, i.e. A = −L, b = constant.
    let var_exprs: Vec<MatrixExpr> = problem
        .psd_vars
        .iter()
        .enumerate()
        .map(|(i, d)| MatrixExpr::new(d.dim).plus_var(1.0, PsdVar(i)))
        .collect();
    for e in problem.psd_constraints.iter().chain(var_exprs.iter()) {
        cones.push(SupportedConeT::PSDTriangleConeT(2 * e.dim));
        for form in low.embedding_rows(e) {
            let r = b.len();
            for (c, v) in form.coefs {
                rows_i.push(r);
                cols_j.push(c);
                vals.push(-v);
            }
            b.push(form.constant);
        }
    }

    let m = b.len();
    let n = low.n;
    let a = CscMatrix::new_from_triplets(m, n, rows_i, cols_j, vals);
    let p = CscMatrix::<f64>::zeros((n, n));
    let mut q = vec![0.0; n];
    let sign = match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    for (c, v) in low.scalar_form(&problem.objective).coefs {
        q[c] += sign * v;
    }

    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(400)
        .tol_gap_abs(solver_tol)
        .tol_gap_rel(solver_tol)
        .tol_feas(solver_tol)
        .tol_ktratio(solver_tol.sqrt().min(1e-6))
        .build()
        .map_err(|e| Error::Solver(format!("invalid solver settings: {e}")))?;

    let mut solver = match DefaultSolver::new(&p, &q, &a, &b, &cones, settings) {
        Ok(s) => s,
        Err(e) => {
            return Ok(failed_solution(problem, format!("backend rejected the problem: {e:?}")));
        }
    };
    solver.solve();
    let raw = &solver.solution;

    let x = &raw.x;
    let psd_values: Vec<HermitianOperator> = low.layouts.iter().map(|l| l.unpack(x)).collect();
    let scalar_values: Vec<f64> = (0..problem.scalar_vars.len())
        .map(|i| x[low.scalar_offset + i])
        .collect();
    let objective_value = problem.objective.evaluate(&psd_values, &scalar_values);

    let (mut status, mut diagnostic) = match raw.status {
        SolverStatus::Solved => (SolveStatus::Optimal, None),
        SolverStatus::AlmostSolved => (
            SolveStatus::Inaccurate,
            Some("backend reports reduced accuracy".to_string()),
        ),
        SolverStatus::PrimalInfeasible
        | SolverStatus::DualInfeasible
        | SolverStatus::AlmostPrimalInfeasible
        | SolverStatus::AlmostDualInfeasible => (
            SolveStatus::Infeasible,
            Some(format!("backend status {:?}", raw.status)),
        ),
        other => (SolveStatus::Failed, Some(format!("backend status {other:?}"))),
    };
    let values_finite = x.iter().all(|v| v.is_finite());
    if !values_finite {
        status = SolveStatus::Failed;
        diagnostic = Some("backend returned non-finite values".into());
    }
    let solution = SdpSolution {
        status,
        objective_value,
        psd_values,
        scalar_values,
        iterations: raw.iterations,
        diagnostic,
    };
    if solution.status == SolveStatus::Optimal {
        let report = verify_solution(problem, &solution)?;
        if !report.within(10.0 * solver_tol) {
            return Ok(SdpSolution {
                status: SolveStatus::Inaccurate,
                diagnostic: Some(format!(
                    "residuals above 10·tol: equality {:.3e}, PSD {:.3e}",
                    report.max_eq_residual, report.min_psd_residual
                )),
                ..solution
            });
        }
    }
    Ok(solution)
}

fn failed_solution(problem: &SdpProblem, diagnostic: String) -> SdpSolution {
    SdpSolution {
        status: SolveStatus::Failed,
        objective_value: f64::NAN,
        psd_values: problem
            .psd_vars
            .iter()
            .map(|d| HermitianOperator::zeros(d.dim))
            .collect(),
        scalar_values: vec![0.0; problem.scalar_vars.len()],
        iterations: 0,
        diagnostic: Some(diagnostic),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron;
    use crate::random::{random_density, random_hermitian, rng_from_seed};

    #[test]
    fn layout_covers_every_parameter_once() {
        for d in 1..6 {
            let l = HermLayout { offset: 3, dim: d };
            let mut seen = vec![false; d * d];
            for i in 0..d {
                seen[l.diag(i) - 3] = true;
                for j in (i + 1)..d {
                    assert!(!seen[l.re(i, j) - 3]);
                    seen[l.re(i, j) - 3] = true;
                    assert!(!seen[l.im(i, j) - 3]);
                    seen[l.im(i, j) - 3] = true;
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn lowering_reproduces_dense_evaluation() {
        // the sparse forms must agree with MatrixExpr/ScalarExpr::evaluate
        let mut rng = rng_from_seed(8);
        let mut p = SdpProblem::new(Sense::Minimize);
        let v = p.add_psd_var("V", 3);
        let w = p.add_psd_var("W", 3);
        let t = p.add_scalar_var("t");
        let c = random_hermitian(3, &mut rng);
        let b = random_hermitian(3, &mut rng);
        let expr = MatrixExpr::new(3)
            .plus_constant(&c)
            .plus_var(0.5, v)
            .plus_var(-2.0, w)
            .plus_scaled(t, b.clone());
        let sexpr = ScalarExpr::new()
            .plus_constant(0.25)
            .plus_trace(c.clone(), v)
            .plus_trace(b, w)
            .plus_scalar(3.0, t);
        let low = Lowering::new(&p);
        let vals = [random_hermitian(3, &mut rng), random_hermitian(3, &mut rng)];
        let tval = 0.7;
        let mut x = vec![0.0; low.n];
        for (k, l) in low.layouts.iter().enumerate() {
            for i in 0..3 {
                x[l.diag(i)] = vals[k].entry(i, i).re;
                for j in (i + 1)..3 {
                    x[l.re(i, j)] = vals[k].entry(i, j).re;
                    x[l.im(i, j)] = vals[k].entry(i, j).im;
                }
            }
            assert_eq!(l.unpack(&x), vals[k]);
        }
        x[low.scalar_offset] = tval;
        let eval = |f: &Form| f.constant + f.coefs.iter().map(|&(c, v)| v * x[c]).sum::<f64>();
        let dense = expr.evaluate(&vals, &[tval]);
        for i in 0..3 {
            for j in 0..3 {
                let (re, im) = low.entry_forms(&expr, i, j);
                assert!((eval(&re) - dense.entry(i, j).re).abs() < 1e-12);
                assert!((eval(&im) - dense.entry(i, j).im).abs() < 1e-12);
            }
        }
        let s = low.scalar_form(&sexpr);
        assert!((eval(&s) - sexpr.evaluate(&vals, &[tval])).abs() < 1e-12);
        // embedding rows: unscale and compare against the real embedding
        let rows = low.embedding_rows(&expr);
        let mut k = 0;
        for col in 0..6 {
            for row in 0..=col {
                let scale = if row == col { 1.0 } else { std::f64::consts::SQRT_2 };
                let (ia, ba) = (row % 3, row / 3);
                let (ib, bb) = (col % 3, col / 3);
                let z = dense.entry(ia, ib);
                let expected = match (ba, bb) {
                    (0, 1) => -z.im,
                    _ => z.re,
                };
                assert!((eval(&rows[k]) / scale - expected).abs() < 1e-12);
                k += 1;
            }
        }
    }

    #[test]
    fn minimal_scaling_of_identity() {
        // min s  s.t.  s·I − I ⪰ 0
        let mut p = SdpProblem::new(Sense::Minimize);
        let s = p.add_scalar_var("s");
        let id = HermitianOperator::identity(2);
        p.add_psd_constraint(MatrixExpr::new(2).plus_scaled(s, id.clone()).plus_constant(&-&id));
        p.set_objective(ScalarExpr::new().plus_scalar(1.0, s));
        let sol = solve_sdp(&p, DEFAULT_SOLVER_TOL).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective_value - 1.0).abs() < 1e-7);
        assert!(matches!(sol.value_by_name(&p, "s"), Some(VarValue::Scalar(v)) if (v - 1.0).abs() < 1e-7));
    }

    #[test]
    fn max_trace_over_density_matrices() {
        // max tr[W·I] s.t. tr W = 1, W ⪰ 0
        let mut p = SdpProblem::new(Sense::Maximize);
        let w = p.add_psd_var("W", 2);
        let id = HermitianOperator::identity(2);
        p.add_scalar_eq(ScalarExpr::new().plus_trace(id.clone(), w).plus_constant(-1.0));
        p.set_objective(ScalarExpr::new().plus_trace(id, w));
        let sol = solve_sdp(&p, DEFAULT_SOLVER_TOL).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective_value - 1.0).abs() < 1e-7);
    }

    #[test]
    fn largest_eigenvalue_of_a_complex_matrix() {
        // max tr[A·W] over density matrices W equals λ_max(A); exercises imaginary parts
        let mut rng = rng_from_seed(17);
        for _ in 0..5 {
            let a = random_hermitian(3, &mut rng);
            let mut p = SdpProblem::new(Sense::Maximize);
            let w = p.add_psd_var("W", 3);
            p.add_scalar_eq(
                ScalarExpr::new()
                    .plus_trace(HermitianOperator::identity(3), w)
                    .plus_constant(-1.0),
            );
            p.set_objective(ScalarExpr::new().plus_trace(a.clone(), w));
            let sol = solve_sdp(&p, DEFAULT_SOLVER_TOL).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal);
            assert!((sol.objective_value - a.max_eigenvalue()).abs() < 1e-6);
            // the dual of this program is min t s.t. t·I − A ⪰ 0: weak duality
            let mut d = SdpProblem::new(Sense::Minimize);
            let t = d.add_scalar_var("t");
            d.add_psd_constraint(
                MatrixExpr::new(3)
                    .plus_scaled(t, HermitianOperator::identity(3))
                    .plus_constant(&-&a),
            );
            d.set_objective(ScalarExpr::new().plus_scalar(1.0, t));
            let dsol = solve_sdp(&d, DEFAULT_SOLVER_TOL).unwrap();
            assert!(dsol.objective_value >= sol.objective_value - 1e-6);
            assert!((dsol.objective_value - sol.objective_value).abs() < 1e-6);
        }
    }

    #[test]
    fn complex_equality_constraints_hold() {
        // find W ⪰ 0 with W = ρ for a complex state ρ
        let mut rng = rng_from_seed(23);
        let rho = random_density(3, &mut rng);
        let mut p = SdpProblem::new(Sense::Minimize);
        let w = p.add_psd_var("W", 3);
        p.add_matrix_eq(MatrixExpr::new(3).plus_var(1.0, w).plus_constant(&-&rho));
        let sol = solve_sdp(&p, DEFAULT_SOLVER_TOL).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.psd(w).max_abs_diff(&rho) < 1e-7);
    }

    #[test]
    fn infeasible_problem_is_reported() {
        // W ⪰ 0 with tr W = −1
        let mut p = SdpProblem::new(Sense::Minimize);
        let w = p.add_psd_var("W", 2);
        p.add_scalar_eq(
            ScalarExpr::new()
                .plus_trace(HermitianOperator::identity(2), w)
                .plus_constant(1.0),
        );
        let sol = solve_sdp(&p, DEFAULT_SOLVER_TOL).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn malformed_problem_is_an_error() {
        let mut p = SdpProblem::new(Sense::Minimize);
        let w = p.add_psd_var("W", 2);
        p.add_psd_constraint(MatrixExpr::new(3).plus_var(1.0, w));
        assert!(solve_sdp(&p, DEFAULT_SOLVER_TOL).is_err());
        let mut q = SdpProblem::new(Sense::Minimize);
        q.set_objective(ScalarExpr::new().plus_scalar(1.0, ScalarVar(4)));
        assert!(q.validate().is_err());
    }

    fn povm_feasibility_problem(effects: &[HermitianOperator]) -> (SdpProblem, SdpSolution) {
        let mut p = SdpProblem::new(Sense::Minimize);
        let vars: Vec<PsdVar> = (0..effects.len()).map(|i| p.add_psd_var(format!("E{i}"), 2)).collect();
        let mut sum = MatrixExpr::new(2).plus_constant(&-&HermitianOperator::identity(2));
        for &v in &vars {
            sum = sum.plus_var(1.0, v);
        }
        p.add_matrix_eq(sum);
        let sol = SdpSolution {
            status: SolveStatus::Optimal,
            objective_value: 0.0,
            psd_values: effects.to_vec(),
            scalar_values: vec![],
            iterations: 0,
            diagnostic: None,
        };
        (p, sol)
    }

    #[test]
    fn verify_exact_point() {
        let e0 = HermitianOperator::diag(&[1.0, 0.0]);
        let e1 = HermitianOperator::diag(&[0.0, 1.0]);
        let (p, sol) = povm_feasibility_problem(&[e0, e1]);
        let r = verify_solution(&p, &sol).unwrap();
        assert!(r.max_eq_residual <= 1e-12);
        assert!(r.min_psd_residual >= -1e-12);
        assert!(r.objective_deviation <= 1e-12);
    }

    #[test]
    fn verify_detects_perturbation() {
        let e0 = HermitianOperator::diag(&[1.0 + 1e-3, 0.0]);
        let e1 = HermitianOperator::diag(&[0.0, 1.0]);
        let (p, sol) = povm_feasibility_problem(&[e0, e1]);
        let r = verify_solution(&p, &sol).unwrap();
        assert!((r.max_eq_residual - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn verify_rejects_missing_values() {
        let (p, mut sol) = povm_feasibility_problem(&[HermitianOperator::identity(2)]);
        sol.psd_values.clear();
        assert!(verify_solution(&p, &sol).is_err());
    }

    #[test]
    fn verify_is_deterministic() {
        let e = kron(&HermitianOperator::diag(&[1.0, 0.0]), &HermitianOperator::identity(1));
        let (p, sol) = povm_feasibility_problem(&[e.clone(), &HermitianOperator::identity(2) - &e]);
        assert_eq!(
            verify_solution(&p, &sol).unwrap(),
            verify_solution(&p, &sol.clone()).unwrap()
        );
    }
}
