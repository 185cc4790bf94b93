//! Newton-Raphson with a sparse LU solve, and load stepping with step
//! halving.

use electropann::InternalEnergy;
use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{FemError, Result};
use crate::problem::{Assembled, Problem, QpCache};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    /// Convergence threshold on the max-norm of the free residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Step halvings allowed when a trial state is inadmissible.
    pub max_backtracks: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 25, max_backtracks: 8 }
    }
}

/// Outcome of one converged Newton solve. `iterations` counts residual
/// assemblies, so a state that is already in equilibrium reports one.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Free-residual max-norm after every assembly.
    pub history: Vec<f64>,
}

/// Converged state at one load factor.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub lambda: f64,
    pub x: Vec<f64>,
    pub cache: QpCache,
    pub newton: NewtonReport,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteppingOptions {
    pub newton: NewtonOptions,
    /// Smallest load increment tried before giving up.
    pub min_step: f64,
}

impl Default for SteppingOptions {
    fn default() -> Self {
        Self { newton: NewtonOptions::default(), min_step: 1e-4 }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `K dx = rhs` for the reduced tangent given as triplets.
pub fn sparse_solve(n: usize, triplets: &[(usize, usize, f64)], rhs: &[f64]) -> Result<Vec<f64>> {
    let t: Vec<Triplet<usize, usize, f64>> = triplets.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
    let k =
        SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t).map_err(|e| FemError::Linear(format!("{e:?}")))?;
    let lu = k.sp_lu().map_err(|e| FemError::Linear(format!("{e:?}")))?;
    let mut col = faer::Col::from_fn(n, |i| rhs[i]);
    lu.solve_in_place(col.as_mut());
    let out: Vec<f64> = (0..n).map(|i| col[i]).collect();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(FemError::Linear("singular tangent".into()))
    }
}

/// Drives the free residual to zero at load factor `lambda`, starting from
/// `x`. Prescribed entries of `x` may lag their targets; the gap is closed
/// through the tangent coupling so the first iterate is a consistent
/// linearized predictor. On failure `x` and `cache` are left unchanged.
pub fn newton_solve<M: InternalEnergy>(
    problem: &Problem<M>,
    x: &mut Vec<f64>,
    lambda: f64,
    cache: &mut QpCache,
    opts: &NewtonOptions,
) -> Result<NewtonReport> {
    let dofs = &problem.dofs;
    let n = dofs.n_free();
    let mut target = x.clone();
    dofs.apply(&mut target, lambda);
    let mut xk = x.clone();
    let mut ck = cache.clone();
    let mut history = Vec::new();
    let fail = |history: Vec<f64>| FemError::NewtonFailure { lambda, history };

    let mut asm: Assembled = match problem.assemble(&xk, lambda, &mut ck, true) {
        Ok(a) => a,
        Err(e) => {
            log::debug!("initial assembly failed at lambda {lambda}: {e}");
            return Err(fail(history));
        }
    };
    loop {
        let r = dofs.restrict(&asm.residual);
        let norm = inf_norm(&r);
        let gap: Vec<(usize, f64)> = (0..xk.len())
            .filter(|&d| dofs.free_index(d).is_none())
            .map(|d| (d, target[d] - xk[d]))
            .filter(|(_, g)| *g != 0.0)
            .collect();
        history.push(norm);
        log::trace!("lambda {lambda} iteration {} residual {norm:e}", history.len());
        if !norm.is_finite() {
            return Err(fail(history));
        }
        if norm <= opts.tol && gap.is_empty() {
            *x = xk;
            *cache = ck;
            return Ok(NewtonReport { iterations: history.len(), history });
        }
        if history.len() > opts.max_iter {
            return Err(fail(history));
        }
        let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        if !gap.is_empty() {
            let mut dp = vec![0.0; xk.len()];
            for &(d, g) in &gap {
                dp[d] = g;
            }
            for &(row, col, v) in &asm.coupling {
                rhs[row] -= v * dp[col];
            }
        }
        let dx = match sparse_solve(n, &asm.triplets, &rhs) {
            Ok(dx) => dx,
            Err(e) => {
                log::debug!("{e}");
                return Err(fail(history));
            }
        };
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let mut trial = xk.clone();
            dofs.add_reduced(&mut trial, &dx, alpha);
            for &(d, g) in &gap {
                trial[d] += alpha * g;
            }
            let mut ct = ck.clone();
            match problem.assemble(&trial, lambda, &mut ct, true) {
                Ok(a) => {
                    accepted = Some((trial, ct, a));
                    break;
                }
                Err(e) => {
                    log::debug!("step {alpha} rejected: {e}");
                    alpha *= 0.5;
                }
            }
        }
        let Some((trial, ct, a)) = accepted else {
            return Err(fail(history));
        };
        // Snap prescribed entries exactly once the full step was taken.
        xk = trial;
        if alpha == 1.0 {
            for &(d, _) in &gap {
                xk[d] = target[d];
            }
        }
        ck = ct;
        asm = a;
    }
}

/// Runs the load factors of `schedule` in order, starting from the
/// undeformed, uncharged state. Increments that fail are halved until they
/// fall below `min_step`; the error then carries every completed snapshot.
pub fn load_stepping<M: InternalEnergy>(
    problem: &Problem<M>,
    schedule: &[f64],
    opts: &SteppingOptions,
) -> Result<Vec<Snapshot>> {
    if schedule.iter().any(|l| !l.is_finite()) || schedule.windows(2).any(|w| w[1] < w[0]) {
        return Err(FemError::Schedule(format!("load factors must be finite and non-decreasing, got {schedule:?}")));
    }
    if !(opts.min_step > 0.0) {
        return Err(FemError::Schedule(format!("minimum step must be positive, got {}", opts.min_step)));
    }
    let mut x = vec![0.0; problem.n_dofs()];
    let mut cache = problem.new_cache();
    let mut current = 0.0;
    let mut completed: Vec<Snapshot> = Vec::with_capacity(schedule.len());
    for &target in schedule {
        let mut step = target - current;
        let newton = loop {
            let lambda = if (target - current).abs() <= step.abs() { target } else { current + step };
            match newton_solve(problem, &mut x, lambda, &mut cache, &opts.newton) {
                Ok(report) => {
                    current = lambda;
                    if lambda == target {
                        break report;
                    }
                }
                Err(e) => {
                    step *= 0.5;
                    log::debug!("load increment halved to {step:e} after: {e}");
                    if step.abs() < opts.min_step {
                        return Err(FemError::StepFailure { last_lambda: current, completed });
                    }
                }
            }
        };
        completed.push(Snapshot { lambda: target, x: x.clone(), cache: cache.clone(), newton });
    }
    Ok(completed)
}
