//! Small dense log-barrier interior-point solver.
//!
//! Problems are expressed with [`SmoothConvex`] functions: a constant, linear
//! terms, non-negative multiples of squared affine forms, and a couple of
//! convex univariate terms. That is exactly the vocabulary the convexified
//! power subproblem needs, and it gives exact gradients and Hessians.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Convex function of one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Univariate {
    /// `-scale · ln(1 + x)` with `scale >= 0`; domain `x > -1`.
    NegLog1p { scale: f64 },
    /// `span / (1 + e^{log_gain} · x)` with `span >= 0`; domain `x > 0`.
    /// Evaluated through `ln x` so huge gains neither overflow nor lose
    /// precision.
    Reciprocal { span: f64, log_gain: f64 },
}

impl Univariate {
    /// Value, first and second derivative; `None` outside the domain.
    fn eval(&self, x: f64) -> Option<(f64, f64, f64)> {
        match *self {
            Univariate::NegLog1p { scale } => {
                if x <= -1.0 {
                    return None;
                }
                let b = 1.0 + x;
                Some((-scale * x.ln_1p(), -scale / b, scale / (b * b)))
            }
            Univariate::Reciprocal { span, log_gain } => {
                if x <= 0.0 {
                    return None;
                }
                // σ = 1 / (1 + e^z), z = log_gain + ln x
                let z = log_gain + x.ln();
                let sig = crate::distortion::sigmoid(-z);
                let one_minus = crate::distortion::sigmoid(z);
                Some((
                    span * sig,
                    -span * sig * one_minus / x,
                    2.0 * span * sig * one_minus * one_minus / (x * x),
                ))
            }
        }
    }
}

/// `coef · (Σ a_k x_k + offset)²` with `coef >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareTerm {
    pub coef: f64,
    pub terms: Vec<(usize, f64)>,
    pub offset: f64,
}

impl SquareTerm {
    fn inner(&self, x: &[f64]) -> f64 {
        self.offset + self.terms.iter().map(|&(i, a)| a * x[i]).sum::<f64>()
    }
}

/// Sum of a constant, linear terms, squared affine forms and univariate
/// convex terms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SmoothConvex {
    pub constant: f64,
    pub linear: Vec<(usize, f64)>,
    pub squares: Vec<SquareTerm>,
    pub univariate: Vec<(usize, Univariate)>,
}

impl SmoothConvex {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            ..Default::default()
        }
    }

    /// `a · x_i + b`.
    pub fn affine1(i: usize, a: f64, b: f64) -> Self {
        Self {
            constant: b,
            linear: vec![(i, a)],
            ..Default::default()
        }
    }

    pub fn add_linear(&mut self, i: usize, a: f64) -> &mut Self {
        self.linear.push((i, a));
        self
    }

    pub fn add_square(&mut self, coef: f64, terms: Vec<(usize, f64)>, offset: f64) -> &mut Self {
        self.squares.push(SquareTerm { coef, terms, offset });
        self
    }

    pub fn add_univariate(&mut self, i: usize, f: Univariate) -> &mut Self {
        self.univariate.push((i, f));
        self
    }

    /// Value, or `None` outside the domain.
    pub fn value(&self, x: &[f64]) -> Option<f64> {
        let mut v = self.constant;
        for &(i, a) in &self.linear {
            v += a * x[i];
        }
        for s in &self.squares {
            let u = s.inner(x);
            v += s.coef * u * u;
        }
        for &(i, f) in &self.univariate {
            v += f.eval(x[i])?.0;
        }
        v.is_finite().then_some(v)
    }

    /// Adds `scale·∇f` to `grad`, `scale·∇²f` to `hess`, and returns `∇f`.
    fn accumulate(&self, x: &[f64], scale: f64, grad: &mut DVector<f64>, hess: &mut DMatrix<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        for &(i, a) in &self.linear {
            g[i] += a;
        }
        for s in &self.squares {
            let u = s.inner(x);
            for &(i, a) in &s.terms {
                g[i] += 2.0 * s.coef * u * a;
                for &(j, b) in &s.terms {
                    hess[(i, j)] += scale * 2.0 * s.coef * a * b;
                }
            }
        }
        for &(i, f) in &self.univariate {
            let (_, d1, d2) = f.eval(x[i]).expect("point inside domain");
            g[i] += d1;
            hess[(i, i)] += scale * d2;
        }
        grad.axpy(scale, &g, 1.0);
        g
    }

    fn shifted(&self, var: usize, coef: f64) -> Self {
        let mut f = self.clone();
        f.linear.push((var, coef));
        f
    }
}

/// `minimize objective(x)  s.t.  constraints[j](x) <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProgram {
    pub n_vars: usize,
    pub objective: SmoothConvex,
    pub constraints: Vec<SmoothConvex>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierOptions {
    pub t0: f64,
    /// Multiplier applied to the barrier weight after each centering.
    pub mu: f64,
    /// Target for the duality-gap surrogate `m / t`.
    pub gap_tol: f64,
    /// Stop centering when half the squared Newton decrement falls below this.
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            t0: 1.0,
            mu: 10.0,
            gap_tol: 1e-7,
            newton_tol: 1e-9,
            max_newton: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Final `m / t`, an upper bound on suboptimality at exact centering.
    pub gap: f64,
    pub newton_steps: usize,
}

fn slacks(prog: &ConvexProgram, x: &[f64]) -> Option<Vec<f64>> {
    prog.constraints
        .iter()
        .map(|c| c.value(x).filter(|v| *v < 0.0))
        .collect()
}

fn barrier_value(prog: &ConvexProgram, t: f64, x: &[f64]) -> Option<f64> {
    let f0 = prog.objective.value(x)?;
    let s = slacks(prog, x)?;
    Some(t * f0 - s.iter().map(|v| (-v).ln()).sum::<f64>())
}

fn newton_direction(hess: DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let n = grad.len();
    let neg = -grad;
    if let Some(ch) = hess.clone().cholesky() {
        return Some(ch.solve(&neg));
    }
    let scale = (0..n).map(|i| hess[(i, i)].abs()).fold(1e-300, f64::max);
    let mut ridge = 1e-12 * scale;
    for _ in 0..12 {
        let mut h = hess.clone();
        for i in 0..n {
            h[(i, i)] += ridge;
        }
        if let Some(ch) = h.cholesky() {
            return Some(ch.solve(&neg));
        }
        ridge *= 100.0;
    }
    None
}

/// Minimizes `t·f0 − Σ ln(−f_j)` from a strictly feasible `x`, drawing Newton
/// steps from `budget`. Returns early once `x[var] < level` for `stop_below`.
fn center(
    prog: &ConvexProgram,
    t: f64,
    x: &mut Vec<f64>,
    opts: &BarrierOptions,
    budget: &mut usize,
    stop_below: Option<(usize, f64)>,
) -> Result<()> {
    let n = prog.n_vars;
    loop {
        if let Some((var, level)) = stop_below {
            if x[var] < level {
                return Ok(());
            }
        }
        if *budget == 0 {
            return Ok(());
        }
        *budget -= 1;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        prog.objective.accumulate(x, t, &mut grad, &mut hess);
        for c in &prog.constraints {
            let v = c.value(x).expect("strictly feasible iterate");
            let inv = -1.0 / v;
            let g = c.accumulate(x, inv, &mut grad, &mut hess);
            hess.ger(inv * inv, &g, &g, 1.0);
        }
        let Some(dir) = newton_direction(hess, &grad) else {
            return Err(Error::Infeasible("singular Newton system".into()));
        };
        let decrement = -grad.dot(&dir);
        if !(decrement.is_finite()) || decrement * 0.5 <= opts.newton_tol {
            return Ok(());
        }
        let f = barrier_value(prog, t, x).expect("strictly feasible iterate");
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..80 {
            let trial: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
            if let Some(ft) = barrier_value(prog, t, &trial) {
                if ft <= f - 0.01 * step * decrement {
                    *x = trial;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            return Ok(());
        }
    }
}

fn run_barrier(prog: &ConvexProgram, mut x: Vec<f64>, opts: &BarrierOptions, stop_below: Option<(usize, f64)>) -> Result<BarrierSolution> {
    let m = prog.constraints.len().max(1) as f64;
    let mut t = opts.t0;
    let mut budget = opts.max_newton;
    loop {
        center(prog, t, &mut x, opts, &mut budget, stop_below)?;
        if let Some((var, level)) = stop_below {
            if x[var] < level {
                break;
            }
        }
        if m / t < opts.gap_tol || budget == 0 {
            break;
        }
        t *= opts.mu;
    }
    let objective = prog.objective.value(&x).unwrap_or(f64::NAN);
    Ok(BarrierSolution {
        x,
        objective,
        gap: m / t,
        newton_steps: opts.max_newton - budget,
    })
}

/// Finds a strictly feasible point near `hint`, or reports infeasibility.
fn phase_one(prog: &ConvexProgram, hint: &[f64], opts: &BarrierOptions) -> Result<Vec<f64>> {
    let n = prog.n_vars;
    let worst = prog
        .constraints
        .iter()
        .map(|c| c.value(hint))
        .try_fold(f64::NEG_INFINITY, |acc, v| v.map(|v| acc.max(v)))
        .ok_or_else(|| Error::Infeasible("starting point outside the constraint domain".into()))?;
    let s0 = worst.max(0.0) + 1.0;
    let mut constraints: Vec<SmoothConvex> = prog.constraints.iter().map(|c| c.shifted(n, -1.0)).collect();
    // keeps the auxiliary problem bounded below
    constraints.push(SmoothConvex::affine1(n, -1.0, -(s0 + 1.0)));
    let aux = ConvexProgram {
        n_vars: n + 1,
        objective: SmoothConvex::affine1(n, 1.0, 0.0),
        constraints,
    };
    let mut x0 = hint.to_vec();
    x0.push(s0);
    let margin = 1e-9 * s0.max(1.0);
    let sol = run_barrier(&aux, x0, opts, Some((n, -margin)))?;
    if sol.x[n] < 0.0 {
        let x = sol.x[..n].to_vec();
        if slacks(prog, &x).is_some() {
            return Ok(x);
        }
    }
    Err(Error::Infeasible(format!(
        "no strictly feasible point (least constraint violation {})",
        sol.x[n]
    )))
}

/// Solves a convex program by the log-barrier method with damped Newton
/// centering. `hint` seeds the search and need not be strictly feasible, but
/// must lie inside the domain of every term.
pub fn barrier_solve(prog: &ConvexProgram, hint: &[f64], opts: &BarrierOptions) -> Result<BarrierSolution> {
    if hint.len() != prog.n_vars {
        return Err(Error::Precondition(format!(
            "hint has {} entries, program has {} variables",
            hint.len(),
            prog.n_vars
        )));
    }
    let x0 = match slacks(prog, hint) {
        Some(_) if prog.objective.value(hint).is_some() => hint.to_vec(),
        _ => phase_one(prog, hint, opts)?,
    };
    if prog.objective.value(&x0).is_none() {
        return Err(Error::Infeasible("objective undefined at the feasible start".into()));
    }
    run_barrier(prog, x0, opts, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_qp() {
        // min x² s.t. 1 - x <= 0
        let mut obj = SmoothConvex::default();
        obj.add_square(1.0, vec![(0, 1.0)], 0.0);
        let prog = ConvexProgram {
            n_vars: 1,
            objective: obj,
            constraints: vec![SmoothConvex::affine1(0, -1.0, 1.0)],
        };
        let sol = barrier_solve(&prog, &[5.0], &BarrierOptions::default()).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-6, "{:?}", sol);
    }

    #[test]
    fn simplex_lp_from_infeasible_hint() {
        // min x0 + x1 s.t. x >= 0, x0 + x1 >= 1
        let mut obj = SmoothConvex::default();
        obj.add_linear(0, 1.0).add_linear(1, 1.0);
        let mut sum = SmoothConvex::constant(1.0);
        sum.add_linear(0, -1.0).add_linear(1, -1.0);
        let prog = ConvexProgram {
            n_vars: 2,
            objective: obj,
            constraints: vec![SmoothConvex::affine1(0, -1.0, 0.0), SmoothConvex::affine1(1, -1.0, 0.0), sum],
        };
        let sol = barrier_solve(&prog, &[0.0, 0.0], &BarrierOptions::default()).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-6, "{:?}", sol);
    }

    #[test]
    fn infeasible_program_reported() {
        // x <= -1 and x >= 1
        let prog = ConvexProgram {
            n_vars: 1,
            objective: SmoothConvex::affine1(0, 1.0, 0.0),
            constraints: vec![SmoothConvex::affine1(0, 1.0, 1.0), SmoothConvex::affine1(0, -1.0, 1.0)],
        };
        assert!(matches!(
            barrier_solve(&prog, &[0.0], &BarrierOptions::default()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn univariate_terms_match_closed_forms() {
        let f = Univariate::Reciprocal { span: 0.7, log_gain: 2.0f64.ln() };
        let (v, d1, d2) = f.eval(1.5).unwrap();
        assert!((v - 0.7 / 4.0).abs() < 1e-15);
        assert!((d1 + 0.7 * 2.0 / 16.0).abs() < 1e-15);
        assert!((d2 - 2.0 * 0.7 * 4.0 / 64.0).abs() < 1e-15);
        assert!(f.eval(0.0).is_none());
        let g = Univariate::NegLog1p { scale: 2.0 };
        let (v, d1, d2) = g.eval(1.0).unwrap();
        assert!((v + 2.0 * 2f64.ln()).abs() < 1e-15 && d1 == -1.0 && d2 == 0.5);
        assert!(g.eval(-1.0).is_none());
    }

    #[test]
    fn reciprocal_with_huge_gain_is_finite() {
        // log_gain far beyond f64 exponent range
        let f = Univariate::Reciprocal { span: 1.0, log_gain: 5000.0 };
        let (v, d1, d2) = f.eval(1.0).unwrap();
        assert!(v >= 0.0 && d1 <= 0.0 && d2 >= 0.0);
        assert!(v.is_finite() && d1.is_finite() && d2.is_finite());
    }
}
