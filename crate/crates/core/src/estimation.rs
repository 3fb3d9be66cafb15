//! Spin-Hamiltonian parameter recovery by bounded Nelder–Mead least squares
//! over the field-sweep and ENDOR forward models.

use std::fmt::Write as _;

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::powder::{
    orientation_selection, powder_grid, GridScheme, PowderGrid, DEFAULT_SELECTION_WIDTH_HZ,
};
use crate::sequences::{
    davies_endor, echo_field_sweep, EndorSettings, FieldSweepSettings, TraceResult,
};
use crate::spincore::{SpinSystem, SpinSystemDoc};

/// One fitted parameter. Known names: `d_xx`, `d_yy` (Hz, d_zz follows from
/// tracelessness), `g_iso`, and `a_iso_<label>` (Hz) for a nucleus label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub name: String,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ParamSpec {
    pub fn new(name: &str, initial: f64, lower: f64, upper: f64) -> Self {
        ParamSpec {
            name: name.to_string(),
            initial,
            lower,
            upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ForwardModel {
    /// One echo-detected sweep; the observed trace axis is in tesla.
    FieldSweep { settings: FieldSweepSettings },
    /// Davies ENDOR at several fields, one observed trace per field. The
    /// orientation selection uses the electron-only system, so it does not
    /// move with the hyperfine couplings.
    Endor {
        fields_t: Vec<f64>,
        settings: EndorSettings,
        selection_width_hz: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSettings {
    pub max_evals: usize,
    /// Simplex diameter in box-normalized coordinates.
    pub tolerance: f64,
    pub restarts: usize,
    /// Initial simplex edge as a fraction of each parameter range.
    pub initial_step: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            max_evals: 600,
            tolerance: 1e-6,
            restarts: 3,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitProblem {
    pub observed: Vec<TraceResult>,
    pub parameters: Vec<ParamSpec>,
    pub model: ForwardModel,
    /// Starting system; fitted parameters overwrite parts of it.
    pub system: SpinSystemDoc,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default)]
    pub grid_scheme: GridScheme,
    /// Optional simulation axes (one per observed trace), interpolated onto
    /// the observed axes. Defaults to the observed axes themselves.
    #[serde(default)]
    pub model_axes: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub settings: FitSettings,
}

fn default_grid_n() -> usize {
    12
}

impl FitProblem {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: FitProblem = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit problem serialises")
    }

    pub fn base_system(&self) -> Result<SpinSystem> {
        SpinSystem::try_from(self.system.clone())
    }

    pub fn initial(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.initial).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let sys = self.base_system()?;
        if self.parameters.is_empty() {
            return Err(invalid("no parameters to fit"));
        }
        for (i, p) in self.parameters.iter().enumerate() {
            if !(p.lower < p.upper) || !(p.lower <= p.initial && p.initial <= p.upper) {
                return Err(invalid(format!(
                    "parameter {} needs lower < upper and an initial value inside",
                    p.name
                )));
            }
            if self.parameters[..i].iter().any(|q| q.name == p.name) {
                return Err(invalid(format!("parameter {} listed twice", p.name)));
            }
            check_name(&sys, &p.name)?;
        }
        let points: usize = self.observed.iter().map(|t| t.len()).sum();
        if points < self.parameters.len() {
            return Err(invalid("fewer data points than parameters"));
        }
        for t in &self.observed {
            t.validate()?;
        }
        match &self.model {
            ForwardModel::FieldSweep { .. } => {
                if self.observed.len() != 1 {
                    return Err(invalid("field-sweep fit takes exactly one observed trace"));
                }
            }
            ForwardModel::Endor {
                fields_t,
                selection_width_hz,
                ..
            } => {
                if fields_t.len() != self.observed.len() || fields_t.is_empty() {
                    return Err(invalid("ENDOR fit needs one observed trace per field"));
                }
                if !(*selection_width_hz > 0.0) {
                    return Err(invalid("selection width must be positive"));
                }
            }
        }
        if let Some(axes) = &self.model_axes {
            if axes.len() != self.observed.len() {
                return Err(invalid("one model axis per observed trace"));
            }
        }
        if self.grid_n == 0 {
            return Err(invalid("grid_n must be positive"));
        }
        let s = &self.settings;
        if s.max_evals == 0
            || !(s.tolerance > 0.0)
            || !(s.initial_step > 0.0 && s.initial_step <= 0.5)
        {
            return Err(invalid("fit settings out of range"));
        }
        Ok(())
    }
}

fn check_name(sys: &SpinSystem, name: &str) -> Result<()> {
    match name {
        "d_xx" | "d_yy" | "g_iso" => Ok(()),
        n => match n.strip_prefix("a_iso_") {
            Some(label) if sys.nucleus_index(label).is_some() => Ok(()),
            _ => Err(invalid(format!("unknown parameter {name}"))),
        },
    }
}

/// Copy of `base` with the named parameters set.
pub fn apply_parameters(base: &SpinSystem, names: &[String], values: &[f64]) -> Result<SpinSystem> {
    if names.len() != values.len() {
        return Err(invalid("parameter names and values differ in length"));
    }
    let mut s = base.clone();
    let principal = |m: &Matrix3<f64>| (m[(0, 0)], m[(1, 1)]);
    for (name, &v) in names.iter().zip(values) {
        match name.as_str() {
            "d_xx" => {
                let (_, dyy) = principal(&s.zfs_tensor_hz);
                s = s.with_zfs_principal(v, dyy);
            }
            "d_yy" => {
                let (dxx, _) = principal(&s.zfs_tensor_hz);
                s = s.with_zfs_principal(dxx, v);
            }
            "g_iso" => s.g_tensor = Matrix3::identity() * v,
            n => {
                let label = n
                    .strip_prefix("a_iso_")
                    .ok_or_else(|| invalid(format!("unknown parameter {n}")))?;
                let k = s
                    .nucleus_index(label)
                    .ok_or_else(|| invalid(format!("no nucleus {label}")))?;
                let shift = v - s.nuclei[k].a_iso_hz();
                s.nuclei[k].hyperfine_tensor_hz += Matrix3::identity() * shift;
            }
        }
    }
    s.validate()?;
    Ok(s)
}

/// Linear interpolation of (x, y) at the points `at`; points outside the
/// source range are an error.
pub fn interpolate(x: &[f64], y: &[f64], at: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid(
            "interpolation needs matching axes of at least two points",
        ));
    }
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let slack = 1e-12 * (hi - lo).abs();
    at.iter()
        .map(|&t| {
            if t < lo - slack || t > hi + slack {
                return Err(invalid(format!(
                    "axis point {t} outside simulated range [{lo}, {hi}]"
                )));
            }
            let j = x.partition_point(|&v| v <= t).clamp(1, x.len() - 1);
            let (x0, x1) = (x[j - 1], x[j]);
            let w = ((t - x0) / (x1 - x0)).clamp(0.0, 1.0);
            Ok(y[j - 1] + w * (y[j] - y[j - 1]))
        })
        .collect()
}

fn max_normalized(v: &[f64]) -> Vec<f64> {
    let m = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if m > 0.0 {
        v.iter().map(|x| x / m).collect()
    } else {
        v.to_vec()
    }
}

/// Forward simulation, one trace per observed trace on the model axes.
pub struct Simulator {
    grid: PowderGrid,
    base: SpinSystem,
    names: Vec<String>,
    model: ForwardModel,
    axes: Vec<Vec<f64>>,
}

impl Simulator {
    pub fn new(problem: &FitProblem) -> Result<Self> {
        problem.validate()?;
        let axes = match &problem.model_axes {
            Some(a) => a.clone(),
            None => problem.observed.iter().map(|t| t.axis.clone()).collect(),
        };
        Ok(Simulator {
            grid: powder_grid(problem.grid_n, problem.grid_scheme)?,
            base: problem.base_system()?,
            names: problem.parameters.iter().map(|p| p.name.clone()).collect(),
            model: problem.model.clone(),
            axes,
        })
    }

    pub fn simulate(&self, params: &[f64]) -> Result<Vec<TraceResult>> {
        let sys = apply_parameters(&self.base, &self.names, params)?;
        match &self.model {
            ForwardModel::FieldSweep { settings } => Ok(vec![echo_field_sweep(
                &sys,
                &self.axes[0],
                &self.grid,
                settings,
            )?]),
            ForwardModel::Endor {
                fields_t,
                settings,
                selection_width_hz,
            } => fields_t
                .iter()
                .zip(&self.axes)
                .map(|(&b, axis)| {
                    let sel = orientation_selection(
                        &sys.electron_only(),
                        b,
                        settings.mw_hz,
                        *selection_width_hz,
                        &self.grid,
                    )?;
                    davies_endor(&sys, b, axis, &sel, settings)
                })
                .collect(),
        }
    }
}

/// Sum of squared differences between max-normalized simulated and observed
/// spectra, with a signed scale and a baseline offset per trace profiled out.
pub fn residual(params: &[f64], problem: &FitProblem) -> Result<f64> {
    residual_with(&Simulator::new(problem)?, params, problem)
}

fn check_bounds(params: &[f64], problem: &FitProblem) -> Result<()> {
    if params.len() != problem.parameters.len() {
        return Err(invalid("wrong number of parameters"));
    }
    for (v, p) in params.iter().zip(&problem.parameters) {
        if !(p.lower <= *v && *v <= p.upper) {
            return Err(invalid(format!(
                "{} = {v} outside [{}, {}]",
                p.name, p.lower, p.upper
            )));
        }
    }
    Ok(())
}

fn residual_with(sim: &Simulator, params: &[f64], problem: &FitProblem) -> Result<f64> {
    check_bounds(params, problem)?;
    let traces = sim.simulate(params)?;
    let mut total = 0.0;
    for ((obs, model), axis) in problem.observed.iter().zip(&traces).zip(&sim.axes) {
        let y = interpolate(axis, &model.signal, &obs.axis)?;
        let a = max_normalized(&obs.signal);
        let b = max_normalized(&y);
        total += profiled_misfit(&a, &b);
    }
    Ok(total)
}

/// min over s, c of Σ (a − s·b − c)²: the model amplitude (including its
/// sign, which follows the echo reference) and a baseline are nuisance
/// parameters.
fn profiled_misfit(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut sbb, mut saa) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (da, db) = (x - ma, y - mb);
        sab += da * db;
        sbb += db * db;
        saa += da * da;
    }
    if sbb > 0.0 {
        (saa - sab * sab / sbb).max(0.0)
    } else {
        saa
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedParam {
    pub name: String,
    pub value: f64,
    /// One-sigma estimate from the local quadratic approximation.
    pub uncertainty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub parameters: Vec<FittedParam>,
    pub residual: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// (evaluation, residual, best so far)
    pub history: Vec<(usize, f64, f64)>,
}

impl FitReport {
    pub fn values(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.value).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit report serialises")
    }

    pub fn history_csv(&self) -> String {
        let mut out = String::from("# name: fit_history\nevaluation,residual,best\n");
        for (i, r, b) in &self.history {
            let _ = writeln!(out, "{i},{r:.12e},{b:.12e}");
        }
        out
    }
}

struct Objective<'a> {
    sim: Simulator,
    problem: &'a FitProblem,
    evals: usize,
    best: f64,
    history: Vec<(usize, f64, f64)>,
}

impl Objective<'_> {
    fn to_physical(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.problem.parameters)
            .map(|(x, p)| p.lower + x.clamp(0.0, 1.0) * (p.upper - p.lower))
            .collect()
    }

    fn eval(&mut self, u: &[f64]) -> Result<f64> {
        let x = self.to_physical(u);
        let r = residual_with(&self.sim, &x, self.problem)?;
        self.evals += 1;
        self.best = self.best.min(r);
        self.history.push((self.evals, r, self.best));
        Ok(r)
    }

    fn exhausted(&self) -> bool {
        self.evals >= self.problem.settings.max_evals
    }
}

fn clamp01(v: &mut [f64]) {
    for x in v {
        *x = x.clamp(0.0, 1.0);
    }
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let mut d = 0.0f64;
    for a in simplex {
        for b in simplex {
            let s = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            d = d.max(s);
        }
    }
    d
}

/// One bounded Nelder–Mead descent from `start` in unit-box coordinates.
fn nelder_mead(obj: &mut Objective, start: &[f64], step: f64) -> Result<(Vec<f64>, f64, bool)> {
    let n = start.len();
    let tol = obj.problem.settings.tolerance;
    let mut simplex = vec![start.to_vec()];
    for i in 0..n {
        let mut v = start.to_vec();
        // step inward when the start sits on the upper face
        v[i] = if v[i] + step <= 1.0 {
            v[i] + step
        } else {
            v[i] - step
        };
        simplex.push(v);
    }
    let mut f = Vec::with_capacity(n + 1);
    for v in &simplex {
        f.push(obj.eval(v)?);
    }
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| f[a].total_cmp(&f[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        f = order.iter().map(|&i| f[i]).collect();
        if diameter(&simplex) < tol {
            return Ok((simplex[0].clone(), f[0], true));
        }
        if obj.exhausted() {
            return Ok((simplex[0].clone(), f[0], false));
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut v: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (w - c))
                .collect();
            clamp01(&mut v);
            v
        };
        let xr = along(-1.0);
        let fr = obj.eval(&xr)?;
        if fr < f[0] {
            let xe = along(-2.0);
            let fe = obj.eval(&xe)?;
            if fe < fr {
                simplex[n] = xe;
                f[n] = fe;
            } else {
                simplex[n] = xr;
                f[n] = fr;
            }
            continue;
        }
        if fr < f[n - 1] {
            simplex[n] = xr;
            f[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < f[n] {
            let x = along(-0.5);
            let v = obj.eval(&x)?;
            (x, v)
        } else {
            let x = along(0.5);
            let v = obj.eval(&x)?;
            (x, v)
        };
        if fc < f[n].min(fr) {
            simplex[n] = xc;
            f[n] = fc;
            continue;
        }
        for i in 1..=n {
            let v: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, x)| b + 0.5 * (x - b))
                .collect();
            f[i] = obj.eval(&v)?;
            simplex[i] = v;
        }
    }
}

/// Bounded Nelder–Mead with deterministic restarts around the best point;
/// returns the best point seen. Converged means the final simplex shrank
/// below the tolerance before the evaluation budget ran out.
pub fn fit(problem: &FitProblem) -> Result<FitReport> {
    let sim = Simulator::new(problem)?;
    let mut obj = Objective {
        sim,
        problem,
        evals: 0,
        best: f64::INFINITY,
        history: Vec::new(),
    };
    let start: Vec<f64> = problem
        .parameters
        .iter()
        .map(|p| (p.initial - p.lower) / (p.upper - p.lower))
        .collect();
    let step = problem.settings.initial_step;
    let (mut best_u, mut best_f, mut converged) = nelder_mead(&mut obj, &start, step)?;
    for k in 0..problem.settings.restarts {
        if obj.exhausted() {
            converged = false;
            break;
        }
        // restart from the best point, nudged along a fixed alternating pattern
        let scale = step * 0.5f64.powi(k as i32 + 1);
        let mut nudged: Vec<f64> = best_u
            .iter()
            .enumerate()
            .map(|(j, x)| x + if (j + k) % 2 == 0 { scale } else { -scale } * 0.5)
            .collect();
        clamp01(&mut nudged);
        let (u, v, c) = nelder_mead(&mut obj, &nudged, scale)?;
        if v < best_f {
            best_u = u;
            best_f = v;
        }
        converged = c;
    }
    let x = obj.to_physical(&best_u);
    let sigma = uncertainties(&obj, &x, best_f).unwrap_or_else(|_| vec![None; x.len()]);
    Ok(FitReport {
        parameters: problem
            .parameters
            .iter()
            .zip(&x)
            .zip(sigma)
            .map(|((p, v), s)| FittedParam {
                name: p.name.clone(),
                value: *v,
                uncertainty: s,
            })
            .collect(),
        residual: best_f,
        evaluations: obj.evals,
        converged,
        history: obj.history,
    })
}

/// σ_i = √(s²·(H/2)⁻¹_ii) with s² = RSS/(N − p) and H the finite-difference
/// Hessian of the residual at the optimum.
fn uncertainties(obj: &Objective, x: &[f64], rss: f64) -> Result<Vec<Option<f64>>> {
    let p = obj.problem;
    let n = x.len();
    let points: usize = p.observed.iter().map(|t| t.len()).sum();
    if points <= n {
        return Ok(vec![None; n]);
    }
    let h: Vec<f64> = p
        .parameters
        .iter()
        .map(|q| 1e-4 * (q.upper - q.lower))
        .collect();
    let f = |v: &[f64]| -> Result<f64> {
        let mut w = v.to_vec();
        for (wi, q) in w.iter_mut().zip(&p.parameters) {
            *wi = wi.clamp(q.lower, q.upper);
        }
        residual_with(&obj.sim, &w, p)
    };
    let f0 = f(x)?;
    let mut hess = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let shifted = |si: f64, sj: f64| {
                let mut v = x.to_vec();
                v[i] += si * h[i];
                v[j] += sj * h[j];
                v
            };
            let val = if i == j {
                (f(&shifted(1.0, 0.0))? - 2.0 * f0 + f(&shifted(-1.0, 0.0))?) / (h[i] * h[i])
            } else {
                (f(&shifted(1.0, 1.0))? - f(&shifted(1.0, -1.0))? - f(&shifted(-1.0, 1.0))?
                    + f(&shifted(-1.0, -1.0))?)
                    / (4.0 * h[i] * h[j])
            };
            hess[(i, j)] = val;
            hess[(j, i)] = val;
        }
    }
    let s2 = rss / (points - n) as f64;
    let Some(inv) = (hess * 0.5).try_inverse() else {
        return Ok(vec![None; n]);
    };
    Ok((0..n)
        .map(|i| {
            let v = s2 * inv[(i, i)];
            (v.is_finite() && v >= 0.0).then(|| v.sqrt())
        })
        .collect())
}

/// Builds a closed-loop problem: simulates `truth` and packages the result
/// as the observation, starting from the given initial values.
pub fn synthetic_problem(
    system: &SpinSystem,
    model: ForwardModel,
    axes: Vec<Vec<f64>>,
    mut parameters: Vec<ParamSpec>,
    truth: &[f64],
    grid_n: usize,
) -> Result<FitProblem> {
    let template = |obs: Vec<TraceResult>, params: Vec<ParamSpec>| FitProblem {
        observed: obs,
        parameters: params,
        model: model.clone(),
        system: SpinSystemDoc::from(system.clone()),
        grid_n,
        grid_scheme: GridScheme::EqualArea,
        model_axes: None,
        settings: FitSettings::default(),
    };
    let placeholders: Vec<TraceResult> = axes
        .iter()
        .map(|a| TraceResult::new("observed", "x", a.clone(), "y", vec![0.0; a.len()]))
        .collect();
    let mut at_truth = parameters.clone();
    for (p, t) in at_truth.iter_mut().zip(truth) {
        p.initial = *t;
    }
    let sim = Simulator::new(&template(placeholders, at_truth))?;
    let observed = sim.simulate(truth)?;
    for p in &mut parameters {
        p.initial = p.initial.clamp(p.lower, p.upper);
    }
    let problem = template(observed, parameters);
    problem.validate()?;
    Ok(problem)
}

/// Default selection width for ENDOR fits.
pub const ENDOR_SELECTION_WIDTH_HZ: f64 = DEFAULT_SELECTION_WIDTH_HZ;
