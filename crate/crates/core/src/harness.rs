//! Config-driven experiment runner, artifact writer and manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{PulseMode, RelaxationModel};
use crate::error::{invalid, Error, Result};
use crate::powder::{orientation_selection, powder_grid, GridScheme, DEFAULT_SELECTION_WIDTH_HZ};
use crate::sequences::{
    canonical_fields, davies_endor, dft_peak, echo_field_sweep, ledger_csv, linspace,
    rabi_with_phase_gate, sedor, speedup_ledger, CnotMethod, EffectiveQubitBasis, EndorSettings,
    FieldSweepSettings, RabiSettings, TraceResult, DEFAULT_RF_RABI_HZ,
};
use crate::spincore::{SpinSystem, SpinSystemDoc};
use crate::tomography::{bell_tomography, TomographySettings};

/// Registered experiments with a one-line description.
pub const EXPERIMENTS: [(&str, &str); 7] = [
    (
        "field_sweep",
        "echo-detected field sweep of the photo-excited triplet over a powder",
    ),
    (
        "davies_endor",
        "orientation-selected Davies ENDOR at one or more fields",
    ),
    (
        "sedor",
        "spin echo double resonance, coupling-mediated CNOT timing",
    ),
    (
        "rabi_phase_gate",
        "nuclear Rabi nutation with microwave 2π phase-gate insertions",
    ),
    (
        "bell_tomography",
        "Bell-state preparation and effective density-matrix tomography",
    ),
    (
        "speedup_ledger",
        "entangling-time ledger: liquid J, solid dipolar, geometric CPHASE",
    ),
    (
        "error_budget",
        "Bell fidelity versus per-gate depolarizing error for both CNOTs",
    ),
];

/// Figure directories written by reproduce-all and the experiment behind each.
pub const FIGURES: [(&str, &str); 7] = [
    ("fig1d", "field_sweep"),
    ("fig1e", "davies_endor"),
    ("fig2b", "sedor"),
    ("fig2d", "rabi_phase_gate"),
    ("fig3b", "bell_tomography"),
    ("fig3c", "bell_tomography"),
    ("fig2e-ledger", "speedup_ledger"),
];

/// A spin system given inline or as a path to a JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemRef {
    Path(String),
    Inline(SpinSystemDoc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Sweep {
    pub fn new(start: f64, stop: f64, points: usize) -> Self {
        Sweep {
            start,
            stop,
            points,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_polar: usize,
    pub scheme: GridScheme,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_polar: 12,
            scheme: GridScheme::EqualArea,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelaxationConfig {
    pub enabled: bool,
    pub model: RelaxationModel,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        RelaxationConfig {
            enabled: true,
            model: RelaxationModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Formats {
            csv: true,
            json: true,
        }
    }
}

/// Everything a run needs. Unset optional fields take per-experiment
/// defaults (see [`describe_defaults`]).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    #[serde(default)]
    pub system: Option<SystemRef>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub relaxation: RelaxationConfig,
    /// Main sweep axis: field (T), RF (Hz), τ (s), nutation time (s) or
    /// per-gate error, depending on the experiment.
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub field_t: Option<f64>,
    #[serde(default)]
    pub fields_t: Option<Vec<f64>>,
    #[serde(default)]
    pub method: Option<CnotMethod>,
    #[serde(default)]
    pub mode: Option<PulseMode>,
    #[serde(default)]
    pub per_gate_error: Option<f64>,
    #[serde(default)]
    pub insert_times_s: Option<Vec<f64>>,
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub formats: Formats,
}

impl RunConfig {
    pub fn new(experiment: &str) -> Self {
        RunConfig {
            experiment: experiment.to_string(),
            system: None,
            grid: GridConfig::default(),
            relaxation: RelaxationConfig::default(),
            sweep: None,
            field_t: None,
            fields_t: None,
            method: None,
            mode: None,
            per_gate_error: None,
            insert_times_s: None,
            out_dir: None,
            formats: Formats::default(),
        }
    }

    /// Parses a config file; a relative system path is taken relative to
    /// the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read(path)?;
        let mut cfg: RunConfig = serde_json::from_str(&text)?;
        if let Some(SystemRef::Path(p)) = &cfg.system {
            let p = PathBuf::from(p);
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.system = Some(SystemRef::Path(base.join(p).to_string_lossy().into_owned()));
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run config serialises")
    }

    pub fn spin_system(&self) -> Result<SpinSystem> {
        match &self.system {
            None => Ok(SpinSystem::fullerene()),
            Some(SystemRef::Inline(doc)) => SpinSystem::try_from(doc.clone()),
            Some(SystemRef::Path(p)) => SpinSystem::from_json(&read(Path::new(p))?),
        }
    }

    fn relaxation_model(&self) -> Option<RelaxationModel> {
        self.relaxation
            .enabled
            .then(|| self.relaxation.model.clone())
    }

    /// Schema-independent invariant checks; empty means valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !EXPERIMENTS.iter().any(|(n, _)| *n == self.experiment) {
            let mut msg = format!("experiment: unknown name '{}'", self.experiment);
            if let Some(s) = suggest(&self.experiment) {
                msg.push_str(&format!(", did you mean '{s}'?"));
            }
            out.push(msg);
        }
        match &self.system {
            Some(SystemRef::Path(p)) if !Path::new(p).is_file() => {
                out.push(format!("system: file {p} does not exist"));
            }
            _ => match self.spin_system() {
                Ok(s) => out.extend(s.violations().into_iter().map(|v| format!("system: {v}"))),
                Err(e) => out.push(format!("system: {e}")),
            },
        }
        if self.grid.n_polar == 0 || self.grid.n_polar > 400 {
            out.push("grid.n_polar must lie in 1..=400".into());
        }
        out.extend(
            self.relaxation
                .model
                .violations()
                .into_iter()
                .map(|v| format!("relaxation.model.{v}")),
        );
        if let Some(s) = &self.sweep {
            if s.points < 2 || !(s.stop > s.start) || !s.start.is_finite() || !s.stop.is_finite() {
                out.push("sweep: needs stop > start and at least two points".into());
            }
            let non_negative = matches!(
                self.experiment.as_str(),
                "sedor" | "rabi_phase_gate" | "error_budget"
            );
            if non_negative && s.start < 0.0 {
                out.push("sweep.start must be non-negative for this experiment".into());
            }
            if self.experiment == "error_budget" && s.stop > 1.0 {
                out.push("sweep.stop must not exceed 1 for per-gate error".into());
            }
            if matches!(self.experiment.as_str(), "field_sweep" | "davies_endor")
                && !(s.start > 0.0)
            {
                out.push("sweep.start must be positive".into());
            }
        }
        if let Some(b) = self.field_t {
            if !(b > 0.0 && b.is_finite()) {
                out.push("field_t must be positive".into());
            }
        }
        if let Some(fs) = &self.fields_t {
            if fs.is_empty() || fs.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
                out.push("fields_t must be a non-empty list of positive fields".into());
            }
        }
        if let Some(p) = self.per_gate_error {
            if !(0.0..=1.0).contains(&p) {
                out.push(format!("per_gate_error must lie in [0, 1], got {p}"));
            }
        }
        if let Some(ts) = &self.insert_times_s {
            if ts.iter().any(|t| !(*t >= 0.0)) {
                out.push("insert_times_s must be non-negative".into());
            }
        }
        if self.mode == Some(PulseMode::Virtual) {
            out.push("mode: virtual pulses cannot drive an experiment".into());
        }
        if !self.formats.csv && !self.formats.json {
            out.push("formats: at least one of csv and json must be enabled".into());
        }
        out
    }
}

fn suggest(name: &str) -> Option<&'static str> {
    EXPERIMENTS
        .iter()
        .map(|(n, _)| (strsim::levenshtein(name, n), *n))
        .filter(|(d, n)| *d <= n.len() / 2 + 1)
        .min()
        .map(|(_, n)| n)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads and checks a config file without running anything. Parse errors
/// come back as a single violation; an unreadable file is an error.
pub fn validate(path: &Path) -> Result<Vec<String>> {
    let text = read(path)?;
    let cfg: RunConfig = match serde_json::from_str(&text) {
        Ok(c) => c,
        Err(e) => return Ok(vec![format!("schema: {e}")]),
    };
    // resolve relative system paths the same way run does
    let cfg = match RunConfig::load(path) {
        Ok(c) => c,
        Err(_) => cfg,
    };
    Ok(cfg.violations())
}

/// Defaults applied when a config leaves a field unset.
pub fn describe_defaults(experiment: &str) -> Option<&'static str> {
    Some(match experiment {
        "field_sweep" => "sweep 0.325–0.368 T, 431 points; zero-field ISC populations; 8 MHz lines",
        "davies_endor" => "fields: four canonical turning points; sweep 1–25 MHz, 481 points",
        "sedor" => "sweep τ 0–1 ms, 101 points; ideal pulses",
        "rabi_phase_gate" => {
            "sweep 0–100 µs, 101 points; one 2π insertion at the quarter period; finite pulses"
        }
        "bell_tomography" => "method cphase; ideal pulses; per_gate_error 0",
        "speedup_ledger" => "30 Hz liquid J, system coupling, 220 ns CPHASE",
        "error_budget" => "sweep per-gate error 0–0.1, 11 points; ideal pulses",
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub code_version: String,
    pub wall_time_s: f64,
    pub config: serde_json::Value,
    pub artifacts: Vec<ArtifactEntry>,
}

/// Collects artifacts in memory and writes them, then the manifest, from
/// one place.
struct Writer {
    files: BTreeMap<String, String>,
}

impl Writer {
    fn new() -> Self {
        Writer {
            files: BTreeMap::new(),
        }
    }

    fn add(&mut self, name: impl Into<String>, text: String) {
        self.files.insert(name.into(), text);
    }

    fn trace(&mut self, stem: &str, t: &TraceResult, f: &Formats) -> Result<()> {
        t.validate()?;
        if f.csv {
            self.add(format!("{stem}.csv"), t.to_csv());
        }
        if f.json {
            self.add(format!("{stem}.json"), t.to_json());
        }
        Ok(())
    }

    fn flush(self, dir: &Path) -> Result<Vec<ArtifactEntry>> {
        mkdir(dir)?;
        let mut out = Vec::new();
        for (name, text) in self.files {
            write(&dir.join(&name), &text)?;
            out.push(ArtifactEntry {
                path: name,
                sha256: sha256_hex(text.as_bytes()),
                bytes: text.len(),
            });
        }
        Ok(out)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn default_endor_fields(system: &SpinSystem) -> Result<Vec<f64>> {
    let c = canonical_fields(system, EndorSettings::default().mw_hz, 0.25, 0.45)?;
    if c.len() >= 6 {
        Ok(vec![c[0], c[2], c[3], c[5]])
    } else {
        Ok(c)
    }
}

fn experiment_artifacts(cfg: &RunConfig, w: &mut Writer) -> Result<()> {
    let system = cfg.spin_system()?;
    let relax = cfg.relaxation_model();
    let f = &cfg.formats;
    let sweep = |d: Sweep| cfg.sweep.clone().unwrap_or(d).values();
    let basis = || -> Result<EffectiveQubitBasis> {
        let b = EffectiveQubitBasis::default_for(&system)?;
        match cfg.field_t {
            Some(field) => EffectiveQubitBasis::new(&system, field, &b.orientation),
            None => Ok(b),
        }
    };
    match cfg.experiment.as_str() {
        "field_sweep" => {
            let grid = powder_grid(cfg.grid.n_polar, cfg.grid.scheme)?;
            let settings = FieldSweepSettings {
                relaxation: relax,
                ..Default::default()
            };
            let fields = sweep(Sweep::new(0.325, 0.368, 431));
            let turning =
                canonical_fields(&system, settings.mw_hz, fields[0], fields[fields.len() - 1])?;
            let txt: Vec<String> = turning.iter().map(|b| format!("{b:.6e}")).collect();
            let t = echo_field_sweep(&system, &fields, &grid, &settings)?
                .with_meta("canonical_fields_T", txt.join(" "));
            w.trace("field_sweep", &t, f)?;
        }
        "davies_endor" => {
            let grid = powder_grid(cfg.grid.n_polar, cfg.grid.scheme)?;
            let settings = EndorSettings::default();
            let fields = match &cfg.fields_t {
                Some(v) => v.clone(),
                None => match cfg.field_t {
                    Some(b) => vec![b],
                    None => default_endor_fields(&system)?,
                },
            };
            let rf = sweep(Sweep::new(1e6, 25e6, 481));
            for (i, &b) in fields.iter().enumerate() {
                let sel = orientation_selection(
                    &system,
                    b,
                    settings.mw_hz,
                    DEFAULT_SELECTION_WIDTH_HZ,
                    &grid,
                )?;
                let t = davies_endor(&system, b, &rf, &sel, &settings)?;
                w.trace(&format!("davies_endor_{i}"), &t, f)?;
            }
        }
        "sedor" => {
            let taus = sweep(Sweep::new(0.0, 1e-3, 101));
            let mode = cfg.mode.unwrap_or(PulseMode::Ideal);
            let t = sedor(&system, &basis()?, &taus, relax, mode)?;
            let (freq, bin) = dft_peak(&t.axis, &t.signal)?;
            let t = t.with_meta("dft_peak_hz", freq).with_meta("dft_bin", bin);
            w.trace("sedor", &t, f)?;
        }
        "rabi_phase_gate" => {
            let times = sweep(Sweep::new(0.0, 100e-6, 101));
            let inserts = cfg
                .insert_times_s
                .clone()
                .unwrap_or_else(|| vec![1.0 / (4.0 * DEFAULT_RF_RABI_HZ)]);
            let settings = RabiSettings {
                mode: cfg.mode.unwrap_or(PulseMode::Finite),
                relaxation: relax,
                ..Default::default()
            };
            let t = rabi_with_phase_gate(&system, &basis()?, &times, &inserts, &settings)?;
            w.trace("rabi_phase_gate", &t, f)?;
        }
        "bell_tomography" => {
            let method = cfg.method.unwrap_or_default();
            let r = bell_tomography(
                &system,
                &basis()?,
                method,
                relax,
                cfg.per_gate_error.unwrap_or(0.0),
                cfg.mode.unwrap_or(PulseMode::Ideal),
                &TomographySettings::default(),
            )?;
            if f.json {
                w.add("bell_tomography.json", r.to_json());
            }
            if f.csv {
                w.add("bell_tomography_records.csv", r.records_csv());
            }
        }
        "speedup_ledger" => {
            let rows = speedup_ledger(&system)?;
            if f.csv {
                w.add("speedup_ledger.csv", ledger_csv(&rows));
            }
            if f.json {
                w.add("speedup_ledger.json", serde_json::to_string_pretty(&rows)?);
            }
        }
        "error_budget" => {
            let ps = sweep(Sweep::new(0.0, 0.1, 11));
            let mode = cfg.mode.unwrap_or(PulseMode::Ideal);
            let b = basis()?;
            let mut cols = Vec::new();
            for method in [CnotMethod::Cphase, CnotMethod::Dipolar] {
                let v: Result<Vec<f64>> = ps
                    .iter()
                    .map(|&p| {
                        crate::tomography::error_budget(&system, &b, method, relax.clone(), p, mode)
                    })
                    .collect();
                cols.push(v?);
            }
            let t = TraceResult::new(
                "error_budget",
                "per_gate_error",
                ps,
                "fidelity_cphase",
                cols[0].clone(),
            )
            .with_column("fidelity_dipolar", cols[1].clone())
            .with_meta("mode", format!("{mode:?}").to_lowercase())
            .with_meta(
                "relaxation",
                if cfg.relaxation.enabled { "on" } else { "off" },
            );
            w.trace("error_budget", &t, f)?;
        }
        other => return Err(invalid(format!("unknown experiment '{other}'"))),
    }
    Ok(())
}

/// Runs one experiment into `out_dir` (or the config's own out_dir) and
/// writes the manifest last.
pub fn run(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<Manifest> {
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(invalid(v.join("; ")));
    }
    let dir = match (out_dir, &cfg.out_dir) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => PathBuf::from("out").join(&cfg.experiment),
    };
    let start = Instant::now();
    let mut w = Writer::new();
    experiment_artifacts(cfg, &mut w)?;
    w.add("config.json", cfg.to_json());
    let artifacts = w.flush(&dir)?;
    let manifest = Manifest {
        experiment: cfg.experiment.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        config: serde_json::to_value(cfg)?,
        artifacts,
    };
    write(
        &dir.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproduceOptions {
    pub grid_n: Option<usize>,
    pub relaxation: bool,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        ReproduceOptions {
            grid_n: None,
            relaxation: true,
        }
    }
}

/// Config behind each figure directory.
pub fn figure_config(figure: &str, opts: &ReproduceOptions) -> Result<RunConfig> {
    let (_, experiment) = FIGURES
        .iter()
        .find(|(f, _)| *f == figure)
        .ok_or_else(|| invalid(format!("unknown figure {figure}")))?;
    let mut cfg = RunConfig::new(experiment);
    cfg.relaxation.enabled = opts.relaxation;
    if let Some(n) = opts.grid_n {
        cfg.grid.n_polar = n;
    }
    match figure {
        // turning-point selection is narrow; a denser grid keeps enough orientations
        "fig1e" if opts.grid_n.is_none() => cfg.grid.n_polar = 40,
        "fig2b" => cfg.relaxation.enabled = false,
        "fig3b" | "fig3c" => {
            cfg.method = Some(if figure == "fig3b" {
                CnotMethod::Dipolar
            } else {
                CnotMethod::Cphase
            });
            cfg.per_gate_error = Some(0.04);
        }
        _ => {}
    }
    Ok(cfg)
}

/// Writes one directory per figure under `root` plus a top-level manifest
/// that covers every file.
pub fn reproduce_all(root: &Path, opts: &ReproduceOptions) -> Result<Manifest> {
    let start = Instant::now();
    let mut all = Vec::new();
    for (figure, _) in FIGURES {
        let cfg = figure_config(figure, opts)?;
        let m = run(&cfg, Some(&root.join(figure)))?;
        let text = read(&root.join(figure).join("manifest.json"))?;
        all.extend(m.artifacts.into_iter().map(|a| ArtifactEntry {
            path: format!("{figure}/{}", a.path),
            ..a
        }));
        all.push(ArtifactEntry {
            path: format!("{figure}/manifest.json"),
            sha256: sha256_hex(text.as_bytes()),
            bytes: text.len(),
        });
    }
    let manifest = Manifest {
        experiment: "reproduce-all".into(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        config: serde_json::json!({
            "grid_n": opts.grid_n,
            "relaxation": opts.relaxation,
            "figures": FIGURES.iter().map(|(f, e)| format!("{f}:{e}")).collect::<Vec<_>>(),
        }),
        artifacts: all,
    };
    write(
        &root.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

/// Process exit status for an error: 2 for usage and validation problems,
/// 1 for numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::Json(_) | Error::Io { .. } => 2,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_experiment_suggests() {
        let v = RunConfig::new("field_swep").violations();
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("field_sweep"), "{v:?}");
    }

    #[test]
    fn negative_lifetime_named() {
        let mut c = RunConfig::new("sedor");
        c.relaxation.model.triplet_lifetime_s = Some(-1.0);
        let v = c.violations();
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("triplet_lifetime_s"));
    }

    #[test]
    fn defaults_valid_for_every_experiment() {
        for (name, _) in EXPERIMENTS {
            assert!(RunConfig::new(name).violations().is_empty(), "{name}");
            assert!(describe_defaults(name).is_some());
        }
        for (fig, _) in FIGURES {
            assert!(figure_config(fig, &ReproduceOptions::default())
                .unwrap()
                .violations()
                .is_empty());
        }
    }

    #[test]
    fn missing_system_file_reported() {
        let mut c = RunConfig::new("sedor");
        c.system = Some(SystemRef::Path("/nonexistent/system.json".into()));
        assert!(c.violations()[0].contains("does not exist"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&invalid("x")), 2);
        assert_eq!(exit_code(&Error::Numerical("x".into())), 1);
    }
}
