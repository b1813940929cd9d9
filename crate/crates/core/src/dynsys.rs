//! Chaotic-system vector-field benchmark.
//!
//! Trajectories come from fixed-step fourth-order Runge–Kutta integration;
//! velocity targets from a centred local quadratic least-squares fit
//! (Savitzky–Golay) of the noisy observed states. A field is scored by
//! per-dimension R² against those targets and by short-horizon rollouts
//! restarted from the true states.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constopt::{optimize_constants, OptConfig};
use crate::data::{span, DataError, Dataset, Provenance};
use crate::engine::{evolve, EngineConfig, EngineError};
use crate::eval::{eval_point, r_squared};
use crate::expr::{parse_infix, ExprTree};
use crate::guidance::GuideSet;
use crate::rng::rng_for;

#[derive(Debug, thiserror::Error)]
pub enum DynError {
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("field has {got} components, system has {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An autonomous ODE `ẋ = f(x)` over `x1..xd` with its integration setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeSystem {
    pub name: String,
    pub dim: usize,
    /// Component equations in infix form, parameters substituted.
    pub equations: Vec<String>,
    pub rhs: Vec<ExprTree>,
    pub params: Vec<(String, f64)>,
    pub x0: Vec<f64>,
    /// Integration step.
    pub h: f64,
    /// Steps discarded before recording.
    pub transient_steps: usize,
    /// Integration steps recorded after the transient.
    pub steps: usize,
    /// Integration steps between two observations.
    pub stride: usize,
}

fn system(
    name: &str,
    params: &[(&str, f64)],
    equations: &[String],
    h: f64,
    interval: f64,
) -> OdeSystem {
    let dim = equations.len();
    let rhs = equations
        .iter()
        .map(|e| parse_infix(e).unwrap_or_else(|err| panic!("{name}: {e}: {err}")))
        .collect();
    OdeSystem {
        name: name.to_string(),
        dim,
        equations: equations.to_vec(),
        rhs,
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        x0: (0..dim).map(|i| 1.0 + 0.01 * (i + 1) as f64).collect(),
        h,
        transient_steps: 10_000,
        steps: 100_000,
        stride: (interval / h).round() as usize,
    }
}

/// The sixteen benchmark systems. Variables x, y, z, w are `x1..x4`.
///
/// Each entry fixes the RK4 step `h` and the observation interval; the
/// interval balances the bias and noise of the seven-point derivative
/// estimate for that system's time scale.
pub fn ode_registry() -> Vec<OdeSystem> {
    let s = |v: &[&str]| -> Vec<String> { v.iter().map(|e| e.to_string()).collect() };
    let mut out = Vec::new();

    let (a, b) = (0.4, 0.175);
    out.push(system(
        "NewtonLiepnik",
        &[("a", a), ("b", b)],
        &[
            format!("-{a}*x1 + x2 + 10*x2*x3"),
            "-x1 - 0.4*x2 + 5*x1*x3".to_string(),
            format!("{b}*x3 - 5*x1*x2"),
        ],
        1e-3,
        0.07,
    ));
    let (a, b, c, d) = (10.0, 2.667, 28.0, 1.1);
    out.push(system(
        "HyperLorenz",
        &[("a", a), ("b", b), ("c", c), ("d", d)],
        &[
            format!("{a}*(x2 - x1) + x4"),
            format!("-x1*x3 + {c}*x1 - x2"),
            format!("-{b}*x3 + x1*x2"),
            format!("{d}*x4 - x1*x3"),
        ],
        1e-4,
        0.02,
    ));
    let (a, b, c, d) = (10.0, 28.0, 2.667, 1.3);
    out.push(system(
        "HyperJha",
        &[("a", a), ("b", b), ("c", c), ("d", d)],
        &[
            format!("{a}*(x2 - x1) + x4"),
            format!("-x1*x3 + {b}*x1 - x2"),
            format!("x1*x2 - {c}*x3"),
            format!("-x1*x3 + {d}*x4"),
        ],
        1e-4,
        0.02,
    ));
    let (a, b, c, d) = (36.0, 3.0, 20.0, 2.0);
    out.push(system(
        "HyperPang",
        &[("a", a), ("b", b), ("c", c), ("d", d)],
        &[
            format!("{a}*(x2 - x1)"),
            format!("-x1*x3 + {c}*x2 + x4"),
            format!("x1*x2 - {b}*x3"),
            format!("-{d}*(x1 + x2)"),
        ],
        1e-4,
        0.01,
    ));
    let (a, b) = (0.85, 0.5);
    out.push(system(
        "ShimizuMorioka",
        &[("a", a), ("b", b)],
        &[
            "x2".to_string(),
            format!("x1 - {a}*x2 - x1*x3"),
            format!("-{b}*x3 + x1^2"),
        ],
        1e-3,
        0.15,
    ));
    let (a, b, c) = (0.44, 1.1, 1.0);
    out.push(system(
        "GenesioTesi",
        &[("a", a), ("b", b), ("c", c)],
        &s(&["x2", "x3"])
            .into_iter()
            .chain([format!("-{c}*x1 - {b}*x2 - {a}*x3 + x1^2")])
            .collect::<Vec<_>>(),
        1e-3,
        0.15,
    ));
    // From (1.01, 1.02, 1.03) the flow escapes to infinity; start inside the basin.
    out.last_mut().expect("just pushed").x0 = vec![0.1; 3];
    let (a, b, c, d, h, k) = (10.0, 1.0, 5.0, -1.0, -5.0, -6.0);
    out.push(system(
        "Laser",
        &[("a", a), ("b", b), ("c", c), ("d", d), ("h", h), ("k", k)],
        &[
            format!("{a}*(x2 - x1) + {b}*x2*x3^2"),
            format!("{c}*x1 + ({d})*x1*x3^2"),
            format!("({h})*x3 + ({k})*x1^2"),
        ],
        1e-3,
        0.01,
    ));
    let (alpha, beta, delta, omega) = (1.0, -1.0, 0.1, 1.4);
    out.push(system(
        "Duffing",
        &[
            ("alpha", alpha),
            ("beta", beta),
            ("delta", delta),
            ("omega", omega),
        ],
        &[
            "x2".to_string(),
            format!("-{delta}*x2 - ({beta})*x1 - {alpha}*x1^3"),
            format!("{omega}"),
        ],
        1e-3,
        0.2,
    ));
    let (a, b, w) = (0.4, 1.2, 0.81);
    out.push(system(
        "Brusselator",
        &[("a", a), ("b", b), ("w", w)],
        &[
            format!("{a} + x1^2*x2 - ({b} + 1)*x1"),
            format!("{b}*x1 - x1^2*x2"),
            format!("{w}"),
        ],
        1e-3,
        0.2,
    ));
    let (beta, gamma, kappa, mu) = (-0.4, 0.49, 0.2, 2.1);
    out.push(system(
        "KawczynskiStrizhak",
        &[
            ("beta", beta),
            ("gamma", gamma),
            ("kappa", kappa),
            ("mu", mu),
        ],
        &[
            format!("{gamma}*(x2 - x1^3 + 3*{mu}*x1)"),
            format!("-2*{mu}*x1 - x2 - x3 + ({beta})"),
            format!("{kappa}*(x1 - x3)"),
        ],
        1e-3,
        0.2,
    ));
    let (a, b) = (2.0, 6.7);
    out.push(system(
        "Rucklidge",
        &[("a", a), ("b", b)],
        &[
            format!("-{a}*x1 + {b}*x2 - x2*x3"),
            "x1".to_string(),
            "-x3 + x2^2".to_string(),
        ],
        1e-3,
        0.07,
    ));
    let (a, b, curr, gamma, omega) = (0.7, 0.8, 0.965, 0.08, 0.04365);
    out.push(system(
        "FitzHughNagumo",
        &[
            ("a", a),
            ("b", b),
            ("curr", curr),
            ("gamma", gamma),
            ("omega", omega),
        ],
        &[
            format!("x1 - x1^3/3 - x2 + {curr}"),
            format!("{gamma}*(x1 + {a} - {b}*x2)"),
            format!("{omega}"),
        ],
        1e-3,
        0.2,
    ));
    let (a, b, c) = (0.001, 0.2, 1.1);
    out.push(system(
        "Finance",
        &[("a", a), ("b", b), ("c", c)],
        &[
            format!("(1/{b} - {a})*x1 + x3 + x1*x2"),
            format!("-{b}*x2 - x1^2"),
            format!("-x1 - {c}*x3"),
        ],
        1e-3,
        0.1,
    ));
    let (a, c, d, eps, f, k) = (40.0, 1.833, 0.16, 0.65, 20.0, 55.0);
    out.push(system(
        "DequanLi",
        &[
            ("a", a),
            ("c", c),
            ("d", d),
            ("epsilon", eps),
            ("f", f),
            ("k", k),
        ],
        &[
            format!("{a}*(x2 - x1) + {d}*x1*x3"),
            format!("{k}*x1 + {f}*x2 - x1*x3"),
            format!("{c}*x3 + x1*x2 - {eps}*x1^2"),
        ],
        1e-3,
        0.002,
    ));
    let (a, b, f, g) = (0.2, 4.0, 9.0, 1.0);
    out.push(system(
        "Hadley",
        &[("a", a), ("b", b), ("f", f), ("g", g)],
        &[
            format!("-x2^2 - x3^2 - {a}*x1 + {a}*{f}"),
            format!("x1*x2 - {b}*x1*x3 - x2 + {g}"),
            format!("{b}*x1*x2 + x1*x3 - x3"),
        ],
        1e-3,
        0.07,
    ));
    let mu = 2.017;
    out.push(system(
        "SprottJerk",
        &[("mu", mu)],
        &s(&["x2", "x3"])
            .into_iter()
            .chain([format!("-x1 + x2^2 - {mu}*x3")])
            .collect::<Vec<_>>(),
        1e-3,
        0.1,
    ));
    out
}

/// Look up a registry system by name (case-insensitive).
pub fn lookup_system(name: &str) -> Result<OdeSystem, DynError> {
    ode_registry()
        .into_iter()
        .find(|s| s.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| DynError::UnknownSystem(name.to_string()))
}

fn field_at(field: &[ExprTree], x: &[f64]) -> Vec<f64> {
    field.iter().map(|f| eval_point(f, x)).collect()
}

/// One classical Runge–Kutta step.
pub fn rk4_step(field: &[ExprTree], x: &[f64], h: f64) -> Vec<f64> {
    let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(u, v)| u + s * v).collect()
    };
    let k1 = field_at(field, x);
    let k2 = field_at(field, &add(x, &k1, h / 2.0));
    let k3 = field_at(field, &add(x, &k2, h / 2.0));
    let k4 = field_at(field, &add(x, &k3, h));
    (0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Observed states at a fixed spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Integration step.
    pub h: f64,
    /// Integration steps between consecutive observations.
    pub stride: usize,
    /// Set when integration stopped early on a non-finite or exploding state.
    pub diverged: bool,
}

impl Trajectory {
    pub fn dt(&self) -> f64 {
        self.h * self.stride as f64
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }
}

const BLOW_UP: f64 = 1e12;

fn advance(field: &[ExprTree], x: &[f64], h: f64, steps: usize) -> Option<Vec<f64>> {
    let mut x = x.to_vec();
    for _ in 0..steps {
        x = rk4_step(field, &x, h);
        if x.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP) {
            return None;
        }
    }
    Some(x)
}

/// Integrate `steps` RK4 steps of size `h`, recording every state. Stops
/// at the first non-finite or exploding state and flags the trajectory.
pub fn integrate(
    field: &[ExprTree],
    x0: &[f64],
    h: f64,
    steps: usize,
) -> Result<Trajectory, DynError> {
    integrate_strided(field, x0, h, steps, 1)
}

/// Integrate `observations × stride` steps, recording every `stride`-th.
pub fn integrate_strided(
    field: &[ExprTree],
    x0: &[f64],
    h: f64,
    observations: usize,
    stride: usize,
) -> Result<Trajectory, DynError> {
    if !(h > 0.0) || stride == 0 {
        return Err(DynError::InvalidArgument(
            "step and stride must be positive".into(),
        ));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(DynError::InvalidArgument(
            "initial state must be finite".into(),
        ));
    }
    if field.len() != x0.len() {
        return Err(DynError::DimensionMismatch {
            got: field.len(),
            expected: x0.len(),
        });
    }
    let mut states = vec![x0.to_vec()];
    let mut diverged = false;
    let mut x = x0.to_vec();
    for _ in 0..observations {
        match advance(field, &x, h, stride) {
            Some(next) => {
                x = next;
                states.push(x.clone());
            }
            None => {
                diverged = true;
                break;
            }
        }
    }
    let dt = h * stride as f64;
    Ok(Trajectory {
        times: (0..states.len()).map(|i| i as f64 * dt).collect(),
        states,
        h,
        stride,
        diverged,
    })
}

/// Run a registry system: discard the transient, then observe every
/// `stride` steps for `steps` steps.
pub fn simulate(sys: &OdeSystem) -> Result<Trajectory, DynError> {
    simulate_steps(sys, sys.steps)
}

/// As [`simulate`] with a custom number of recorded integration steps.
pub fn simulate_steps(sys: &OdeSystem, steps: usize) -> Result<Trajectory, DynError> {
    let start = advance(&sys.rhs, &sys.x0, sys.h, sys.transient_steps).ok_or_else(|| {
        DynError::InvalidArgument(format!("{} diverged during the transient", sys.name))
    })?;
    integrate_strided(&sys.rhs, &start, sys.h, steps / sys.stride, sys.stride)
}

/// Smoothed states with estimated velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDataset {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub derivatives: Vec<Vec<f64>>,
    pub noise: f64,
}

impl TrajectoryDataset {
    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Regression problem for component `j`: states → `ẋ_j`.
    pub fn component(&self, j: usize, name: &str) -> Result<Dataset, DynError> {
        let d = self.dim();
        let columns = (0..d)
            .map(|k| self.states.iter().map(|s| s[k]).collect())
            .collect();
        let y = self.derivatives.iter().map(|v| v[j]).collect();
        Ok(Dataset::new(
            columns,
            y,
            Provenance {
                task: format!("{name}/dx{}", j + 1),
                seed: 0,
                noise: self.noise,
            },
        )?)
    }

    /// CSV `t,x1..xd,dx1..dxd`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DynError> {
        let mut out = csv::Writer::from_writer(w);
        let d = self.dim();
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|k| format!("x{k}")));
        header.extend((1..=d).map(|k| format!("dx{k}")));
        out.write_record(&header).map_err(csv_io)?;
        for i in 0..self.len() {
            let mut row = vec![self.times[i].to_string()];
            row.extend(self.states[i].iter().map(|v| v.to_string()));
            row.extend(self.derivatives[i].iter().map(|v| v.to_string()));
            out.write_record(&row).map_err(csv_io)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> DynError {
    DynError::Io(std::io::Error::other(e))
}

/// Write a trajectory as CSV `t,x1..xd`.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, w: W) -> Result<(), DynError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((1..=traj.dim()).map(|k| format!("x{k}")));
    out.write_record(&header).map_err(csv_io)?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let mut row = vec![t.to_string()];
        row.extend(s.iter().map(|v| v.to_string()));
        out.write_record(&row).map_err(csv_io)?;
    }
    out.flush()?;
    Ok(())
}

/// Add uniform noise of half-width `level · span` to each state component.
pub fn add_state_noise(
    traj: &Trajectory,
    level: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>, DynError> {
    if !(0.0..=0.1 + 1e-12).contains(&level) {
        return Err(DataError::InvalidNoise(level).into());
    }
    let d = traj.dim();
    let widths: Vec<f64> = (0..d)
        .map(|k| level * span(&traj.states.iter().map(|s| s[k]).collect::<Vec<_>>()))
        .collect();
    let mut rng = rng_for(seed, &[0xD15]);
    Ok(traj
        .states
        .iter()
        .map(|s| {
            s.iter()
                .zip(&widths)
                .map(|(v, w)| {
                    if *w > 0.0 {
                        v + w * (2.0 * rng.random::<f64>() - 1.0)
                    } else {
                        *v
                    }
                })
                .collect()
        })
        .collect())
}

/// Fit `a + b k + c k²` over the centred window `k = −m..m` (time step
/// `dt`) and return the smoothed value `a` and derivative `b / dt`.
fn quadratic_window(values: &[f64], dt: f64) -> (f64, f64) {
    let m = (values.len() / 2) as f64;
    let (mut s2, mut s4) = (0.0, 0.0);
    let (mut sy, mut sky, mut sk2y) = (0.0, 0.0, 0.0);
    for (i, &v) in values.iter().enumerate() {
        let k = i as f64 - m;
        s2 += k * k;
        s4 += k * k * k * k;
        sy += v;
        sky += k * v;
        sk2y += k * k * v;
    }
    let s0 = values.len() as f64;
    let a = (s4 * sy - s2 * sk2y) / (s0 * s4 - s2 * s2);
    (a, sky / s2 / dt)
}

/// Noisy states → smoothed states and velocities.
///
/// Noise (uniform, half-width `noise · span` per component) is added to
/// the observed states first; each component is then fitted by a local
/// quadratic over a centred window of `window` samples. The first and last
/// `window / 2` samples are dropped.
pub fn estimate_derivatives(
    traj: &Trajectory,
    window: usize,
    noise: f64,
    seed: u64,
) -> Result<TrajectoryDataset, DynError> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(DynError::InvalidArgument(
            "window must be odd and at least 3".into(),
        ));
    }
    if traj.len() < window {
        return Err(DynError::InvalidArgument(
            "trajectory shorter than the window".into(),
        ));
    }
    let observed = add_state_noise(traj, noise, seed)?;
    let d = traj.dim();
    let half = window / 2;
    let dt = traj.dt();
    let mut out = TrajectoryDataset {
        times: Vec::new(),
        states: Vec::new(),
        derivatives: Vec::new(),
        noise,
    };
    let columns: Vec<Vec<f64>> = (0..d)
        .map(|k| observed.iter().map(|s| s[k]).collect())
        .collect();
    for i in half..traj.len() - half {
        let (mut x, mut dx) = (Vec::with_capacity(d), Vec::with_capacity(d));
        for col in &columns {
            let (a, b) = quadratic_window(&col[i - half..=i + half], dt);
            x.push(a);
            dx.push(b);
        }
        out.times.push(traj.times[i]);
        out.states.push(x);
        out.derivatives.push(dx);
    }
    Ok(out)
}

/// Per-component R² of `field` on the estimated velocities, and their mean.
pub fn r2_per_dimension(
    td: &TrajectoryDataset,
    field: &[ExprTree],
) -> Result<(Vec<f64>, f64), DynError> {
    if field.len() != td.dim() {
        return Err(DynError::DimensionMismatch {
            got: field.len(),
            expected: td.dim(),
        });
    }
    let per: Vec<f64> = (0..td.dim())
        .map(|j| {
            let y: Vec<f64> = td.derivatives.iter().map(|v| v[j]).collect();
            let yhat: Vec<f64> = td.states.iter().map(|s| eval_point(&field[j], s)).collect();
            r_squared(&y, &yhat).unwrap_or(f64::NEG_INFINITY)
        })
        .collect();
    let mean = per.iter().sum::<f64>() / per.len() as f64;
    Ok((per, mean))
}

/// `count` evenly spaced rollout starts that leave room for `k` steps.
pub fn default_starts(len: usize, k: usize, count: usize) -> Vec<usize> {
    if len <= k || count == 0 {
        return Vec::new();
    }
    let last = len - 1 - k;
    if count == 1 {
        return vec![0];
    }
    (0..count).map(|i| i * last / (count - 1)).collect()
}

/// Mean over `starts` of the dimension-averaged R² between a `k`-step
/// rollout of `field` (same step and stride as `traj`, restarted from the
/// true state) and the true segment that follows.
pub fn rollout_r2(
    traj: &Trajectory,
    field: &[ExprTree],
    k: usize,
    starts: &[usize],
) -> Result<f64, DynError> {
    if k == 0 {
        return Err(DynError::InvalidArgument(
            "rollout length must be positive".into(),
        ));
    }
    if starts.is_empty() || starts.iter().any(|&i| i + k >= traj.len()) {
        return Err(DynError::InvalidArgument(
            "rollout start out of range".into(),
        ));
    }
    if field.len() != traj.dim() {
        return Err(DynError::DimensionMismatch {
            got: field.len(),
            expected: traj.dim(),
        });
    }
    let d = traj.dim();
    let mut total = 0.0;
    for &i in starts {
        let mut x = traj.states[i].clone();
        let mut pred = Vec::with_capacity(k);
        for _ in 0..k {
            x = match advance(field, &x, traj.h, traj.stride) {
                Some(v) => v,
                None => vec![f64::NAN; d],
            };
            pred.push(x.clone());
        }
        let truth = &traj.states[i + 1..=i + k];
        let mut r = 0.0;
        for j in 0..d {
            let y: Vec<f64> = truth.iter().map(|s| s[j]).collect();
            let yhat: Vec<f64> = pred.iter().map(|s| s[j]).collect();
            r += r_squared(&y, &yhat).unwrap_or(f64::NEG_INFINITY);
        }
        total += r / d as f64;
    }
    Ok(total / starts.len() as f64)
}

/// Refit every constant of the system's true equations to the estimated
/// velocities.
pub fn fit_true_structure(
    td: &TrajectoryDataset,
    sys: &OdeSystem,
    opt: &OptConfig,
) -> Result<Vec<ExprTree>, DynError> {
    (0..sys.dim)
        .map(|j| {
            let ds = td.component(j, &sys.name)?;
            Ok(optimize_constants(&sys.rhs[j], &ds, opt).0)
        })
        .collect()
}

/// Search an expression for every component with the evolutionary engine.
pub fn fit_vector_field(
    td: &TrajectoryDataset,
    name: &str,
    cfg: &EngineConfig,
    guides: &GuideSet,
) -> Result<Vec<ExprTree>, DynError> {
    (0..td.dim())
        .map(|j| {
            let ds = td.component(j, name)?;
            Ok(evolve(&ds, cfg, guides)?.best_tree)
        })
        .collect()
}

/// Result row for one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemResult {
    pub name: String,
    #[serde(with = "vec_r2")]
    pub per_dim_r2: Vec<f64>,
    #[serde(with = "crate::eval::r2_or_null")]
    pub r2_mean: f64,
    #[serde(with = "crate::eval::r2_or_null")]
    pub r2_roll_50: f64,
}

mod vec_r2 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| x.is_finite().then_some(*x))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Option<f64>>::deserialize(d)?
            .into_iter()
            .map(|x| x.unwrap_or(f64::NEG_INFINITY))
            .collect())
    }
}
