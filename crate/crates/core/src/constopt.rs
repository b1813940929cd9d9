//! BFGS minimization of mean squared error over expression constants.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::eval::{eval_columns, fitness, mse, Fitness};
use crate::expr::ExprTree;
use crate::rng::rng_for;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptError {
    #[error("objective is non-finite at the starting point")]
    NonFiniteObjective,
}

/// Budget and tolerances for a BFGS run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptConfig {
    pub max_iters: usize,
    pub restarts: usize,
    pub gtol: f64,
    pub seed: u64,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            max_iters: 100,
            restarts: 3,
            gtol: 1e-8,
            seed: 0,
        }
    }
}

/// What a parameter slot is bound to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamSlot {
    /// Constant node at this preorder index.
    Constant(usize),
    /// Logit `k` of relaxation slot `slot`.
    Logit { slot: usize, k: usize },
}

/// Values plus the binding of each value to its origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub mapping: Vec<ParamSlot>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, mapping: Vec<ParamSlot>) -> Self {
        assert_eq!(values.len(), mapping.len());
        ParamVector { values, mapping }
    }

    /// Unbound values, for plain numeric optimization.
    pub fn free(values: Vec<f64>) -> Self {
        let mapping = (0..values.len()).map(ParamSlot::Constant).collect();
        ParamVector { values, mapping }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Constants of `tree`, bound to their preorder positions.
    pub fn from_constants(tree: &ExprTree) -> Self {
        let pos = tree.constant_positions();
        ParamVector {
            values: pos.iter().map(|&i| tree.node(i).value).collect(),
            mapping: pos.into_iter().map(ParamSlot::Constant).collect(),
        }
    }
}

/// Result of [`minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
}

fn fd_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

/// Central finite-difference gradient with step `1e−6 · max(1, |xᵢ|)`.
pub fn gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Result<Vec<f64>, OptError> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = fd_step(x[i]);
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        // Use the actual representable step widths.
        let width = (x[i] + h) - (x[i] - h);
        let gi = (fp - fm) / width;
        if !gi.is_finite() {
            return Err(OptError::NonFiniteObjective);
        }
        g[i] = gi;
    }
    Ok(g)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Quasi-Newton BFGS minimization from `x0`.
///
/// Line search: the unit step and the minimizer of the quadratic through
/// `φ(0), φ'(0), φ(1)` are both tried and the lower value is taken; if it
/// fails the Armijo condition the step is halved until it passes, and if the
/// unit step wins the step is doubled for as long as `f` keeps falling. On a
/// quadratic objective the interpolated step is exact. Stops when the
/// gradient norm falls below `gtol`, when the step shrinks below 1e−12, or
/// after `max_iters`; the best iterate seen is returned.
pub fn minimize<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    max_iters: usize,
    gtol: f64,
) -> Result<Minimum, OptError> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(OptError::NonFiniteObjective);
    }
    if n == 0 {
        return Ok(Minimum {
            x,
            f: fx,
            iterations: 0,
        });
    }
    let mut g = match gradient(f, &x) {
        Ok(g) => g,
        Err(_) => {
            return Ok(Minimum {
                x,
                f: fx,
                iterations: 0,
            })
        }
    };
    // Inverse Hessian approximation, row-major.
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    let mut first = true;
    let mut iterations = 0;
    let mut trial = vec![0.0; n];
    while iterations < max_iters {
        if norm(&g) < gtol {
            break;
        }
        iterations += 1;
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&p, &g);
        if slope >= 0.0 || !slope.is_finite() {
            // Not a descent direction: reset to steepest descent.
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] = if i == j { 1.0 } else { 0.0 };
                }
            }
            p = g.iter().map(|v| -v).collect();
            slope = dot(&p, &g);
            first = true;
        }
        let eval_at = |t: f64, buf: &mut Vec<f64>| {
            for i in 0..n {
                buf[i] = x[i] + t * p[i];
            }
            f(buf)
        };
        let f1 = eval_at(1.0, &mut trial);
        let mut best_t = 1.0;
        let mut best_f = if f1.is_finite() { f1 } else { f64::INFINITY };
        let denom = 2.0 * (f1 - fx - slope);
        if f1.is_finite() && denom > 0.0 {
            let tq = -slope / denom;
            if tq.is_finite() && tq > 0.0 && (tq - 1.0).abs() > 1e-12 {
                let fq = eval_at(tq, &mut trial);
                if fq.is_finite() && fq < best_f {
                    best_t = tq;
                    best_f = fq;
                }
            }
        }
        // Near-linear decrease at the unit step: expand while f keeps falling.
        if best_t == 1.0 && best_f < fx {
            let mut grow = 2.0;
            for _ in 0..40 {
                let fg = eval_at(grow, &mut trial);
                if !(fg.is_finite() && fg < best_f) {
                    break;
                }
                best_t = grow;
                best_f = fg;
                grow *= 2.0;
            }
        }
        let c1 = 1e-4;
        let mut t = best_t;
        let mut ft = best_f;
        let mut accepted = ft.is_finite() && ft <= fx + c1 * t * slope;
        while !accepted {
            t *= 0.5;
            if t * norm(&p) < 1e-16 {
                break;
            }
            ft = eval_at(t, &mut trial);
            accepted = ft.is_finite() && ft <= fx + c1 * t * slope;
        }
        if !accepted {
            // Accept a non-Armijo step only if it still lowers f.
            if best_f < fx {
                t = best_t;
                ft = best_f;
            } else {
                break;
            }
        }
        let s: Vec<f64> = p.iter().map(|v| t * v).collect();
        let x_new: Vec<f64> = x.iter().zip(&s).map(|(a, b)| a + b).collect();
        let g_new = match gradient(f, &x_new) {
            Ok(g) => g,
            Err(_) => {
                x = x_new;
                fx = ft;
                break;
            }
        };
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        let step_norm = norm(&s);
        x = x_new;
        fx = ft;
        g = g_new;
        if step_norm < 1e-12 {
            break;
        }
        if sy > 1e-12 * step_norm * norm(&yv) && sy > 0.0 {
            if first {
                // Scale the initial identity to the curvature along s.
                let scale = sy / dot(&yv, &yv);
                for v in h.iter_mut() {
                    *v *= scale;
                }
                first = false;
            }
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &yv)).collect();
            let yhy = dot(&yv, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
    }
    Ok(Minimum {
        x,
        f: fx,
        iterations,
    })
}

/// Minimize over a [`ParamVector`], keeping its mapping.
pub fn minimize_params<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &ParamVector,
    cfg: &OptConfig,
) -> Result<ParamVector, OptError> {
    let m = minimize(f, &x0.values, cfg.max_iters, cfg.gtol)?;
    Ok(ParamVector::new(m.x, x0.mapping.clone()))
}

/// MSE of `tree` with its constants replaced by `values`.
pub fn constants_mse(tree: &ExprTree, ds: &Dataset, values: &[f64]) -> f64 {
    let t = tree.with_constants(values);
    match eval_columns(&t, ds.columns(), ds.rows()) {
        Ok(yhat) => {
            let m = mse(ds.y(), &yhat);
            crate::eval::recycle(yhat);
            m
        }
        Err(_) => f64::INFINITY,
    }
}

/// Fit the constants of `tree` to `ds` by multi-start BFGS.
///
/// The first start uses the tree's current constant values; `restarts − 1`
/// further starts are drawn uniformly from `[−5, 5]`. The returned tree has
/// the same structure and never a larger MSE than the input.
pub fn optimize_constants(tree: &ExprTree, ds: &Dataset, cfg: &OptConfig) -> (ExprTree, Fitness) {
    let x0 = tree.constants();
    let base_fit = fitness(tree, ds).unwrap_or_else(|_| Fitness::invalid(tree.node_count()));
    if x0.is_empty() {
        return (tree.clone(), base_fit);
    }
    let objective = |v: &[f64]| constants_mse(tree, ds, v);
    let mut best_x = x0.clone();
    let mut best_f = objective(&x0);
    if !best_f.is_finite() {
        best_f = f64::INFINITY;
    }
    let mut rng = rng_for(cfg.seed, &[0xB1F6, tree.len() as u64]);
    for r in 0..cfg.restarts.max(1) {
        let start: Vec<f64> = if r == 0 {
            x0.clone()
        } else {
            (0..x0.len())
                .map(|_| rng.random_range(-5.0..=5.0))
                .collect()
        };
        if let Ok(m) = minimize(&objective, &start, cfg.max_iters.max(1), cfg.gtol) {
            if m.f < best_f {
                best_f = m.f;
                best_x = m.x;
            }
        }
        if best_f == 0.0 {
            break;
        }
    }
    let out = tree.with_constants(&best_x);
    let fit = fitness(&out, ds).unwrap_or_else(|_| Fitness::invalid(out.node_count()));
    // Guard against any evaluation discrepancy: never return something worse.
    if fit.mse <= base_fit.mse || !base_fit.mse.is_finite() {
        (out, fit)
    } else {
        (tree.clone(), base_fit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sample_seeded, task, Dataset, Provenance};
    use crate::expr::parse_sexpr;

    #[test]
    fn quadratic_one_dim() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2);
        let m = minimize(&f, &[0.0], 100, 1e-8).unwrap();
        assert!((m.x[0] - 3.0).abs() < 1e-8, "{:?}", m);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let m = minimize(&f, &[-1.2, 1.0], 500, 1e-10).unwrap();
        assert!(
            (m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5,
            "{m:?}"
        );
    }

    #[test]
    fn constant_objective_returns_start() {
        let f = |_: &[f64]| 4.0;
        let m = minimize(&f, &[1.5, -2.0], 100, 1e-8).unwrap();
        assert_eq!(m.x, vec![1.5, -2.0]);
        assert_eq!(m.iterations, 0);
    }

    #[test]
    fn non_finite_start() {
        let f = |_: &[f64]| f64::NAN;
        assert_eq!(
            minimize(&f, &[0.0], 10, 1e-8),
            Err(OptError::NonFiniteObjective)
        );
    }

    #[test]
    fn gradients() {
        let g = gradient(&|x: &[f64]| x[0] * x[0], &[3.0]).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-5);
        let g = gradient(&|x: &[f64]| x[0] * x[1], &[2.0, 5.0]).unwrap();
        assert!((g[0] - 5.0).abs() < 1e-5 && (g[1] - 2.0).abs() < 1e-5);
    }

    #[test]
    fn quadratic_converges_within_dim_plus_five() {
        // f(x) = ½ xᵀAx − bᵀx with A SPD.
        let a = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let b = [1.0, -2.0, 0.5];
        let f = |x: &[f64]| {
            let mut v = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    v += 0.5 * x[i] * a[i][j] * x[j];
                }
                v -= b[i] * x[i];
            }
            v
        };
        let m = minimize(&f, &[0.0; 3], 3 + 5, 1e-8).unwrap();
        let g = gradient(&f, &m.x).unwrap();
        assert!(norm(&g) < 1e-8, "grad {:?} after {} iters", g, m.iterations);
    }

    #[test]
    fn fits_linear_coefficient() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.1 - 1.0).collect();
        let y = x.iter().map(|v| 2.0 * v).collect();
        let ds = Dataset::new(vec![x], y, Provenance::default()).unwrap();
        let (t, f) = optimize_constants(
            &parse_sexpr("(mul C x1)").unwrap(),
            &ds,
            &OptConfig::default(),
        );
        assert!((t.constants()[0] - 2.0).abs() < 1e-6);
        assert!(f.r2 > 1.0 - 1e-10);
    }

    #[test]
    fn no_constants_is_identity() {
        let ds = sample_seeded(&task("Nguyen-1").unwrap(), 0).unwrap();
        let t = parse_sexpr("(add x1 (sin x1))").unwrap();
        assert_eq!(optimize_constants(&t, &ds, &OptConfig::default()).0, t);
    }

    #[test]
    fn recovers_constant_1() {
        let tk = task("Constant-1").unwrap();
        let structure =
            parse_sexpr("(add (add (mul C (mul (mul x1 x1) x1)) (mul C (mul x1 x1))) (mul C x1))")
                .unwrap();
        for seed in 0..3 {
            let ds = sample_seeded(&tk, seed).unwrap();
            let cfg = OptConfig {
                seed,
                ..OptConfig::default()
            };
            let (t, _) = optimize_constants(&structure, &ds, &cfg);
            let c = t.constants();
            for (got, want) in c.iter().zip([3.39, 2.12, 1.78]) {
                assert!((got - want).abs() < 1e-3, "seed {seed}: {c:?}");
            }
        }
    }
}
