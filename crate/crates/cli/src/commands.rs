use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use skewgof::estimation::{self, FitResult};
use skewgof::gof::{
    composite_test, nested_study, simple_null_critical, simple_null_power, simple_test, warp_speed_study, Mode, RunInfo,
    Shape, StudyReport, TestConfig, TestOutcome,
};
use skewgof::validation::{sampler_cf_oracle, statistic_oracle, tau_round_trip_oracle, OracleReport};
use skewgof::{Family, FamilySpec, KernelSpec, SeedSpec};

use crate::config::{json_arg, parse_family, ConfigFile, ShapeKeys};
use crate::data::{self, ReadOptions, Table};
use crate::error::{CliError, CliResult};
use crate::svg::PowerCurve;

/// Global settings after merging flags over the config file.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub kernel: KernelSpec,
    pub out: Option<PathBuf>,
}

/// Writes `text` to `out`, or to standard output when no path is given.
pub fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
            }
            std::fs::write(p, text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

pub fn cmd_sample(settings: &Settings, spec: &str, n: usize) -> CliResult<()> {
    let spec: FamilySpec = json_arg(spec, "family spec")?;
    spec.validate().map_err(CliError::from_input)?;
    if n == 0 {
        return Err(CliError::Usage("-n must be positive".into()));
    }
    let x = spec
        .sample(n, &mut SeedSpec::new(settings.seed).stream())
        .map_err(CliError::from_compute)?;
    let mut buf = Vec::new();
    data::write_csv(&x, &mut buf).expect("in-memory write");
    emit(settings.out.as_deref(), std::str::from_utf8(&buf).expect("ascii"))
}

/// Where the data came from and what was kept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataInfo {
    pub input: String,
    pub columns: Vec<String>,
    /// Whether the first row was read as a header.
    pub header: bool,
    pub n: usize,
    pub p: usize,
    pub dropped_rows: Vec<u64>,
}

impl DataInfo {
    fn new(path: &Path, t: &Table) -> Self {
        Self {
            input: path.display().to_string(),
            columns: t.columns.clone(),
            header: t.has_header,
            n: t.sample.n(),
            p: t.sample.p(),
            dropped_rows: t.dropped_rows.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub family: Family,
    pub data: DataInfo,
    pub fit: FitResult,
    pub run: RunInfo,
}

pub fn cmd_fit(settings: &Settings, input: &Path, family: Family, read: &ReadOptions) -> CliResult<()> {
    let started = Instant::now();
    let table = data::read_csv(input, read)?;
    let fit = estimation::fit(family, &table.sample).map_err(CliError::from_compute)?;
    let report = FitReport {
        family,
        data: DataInfo::new(input, &table),
        fit,
        run: RunInfo::finish(settings.seed, started),
    };
    emit(settings.out.as_deref(), &to_json(&report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GofReport {
    pub family: Family,
    pub data: DataInfo,
    pub outcome: TestOutcome,
}

/// Fixed shape of a simple null: complete JSON, or config keys that still
/// need the data dimension.
#[derive(Debug, Clone)]
pub enum Lambda0 {
    Shape(Shape),
    Keys(ShapeKeys),
}

/// Options of a single-dataset test after merging flags and config.
#[derive(Debug, Clone)]
pub struct GofOptions {
    pub family: Family,
    pub mode: Mode,
    pub lambda0: Option<Lambda0>,
    pub m: Option<usize>,
    pub bootstrap: usize,
    pub replications: usize,
    pub delta: f64,
}

pub fn cmd_gof(settings: &Settings, input: &Path, opts: &GofOptions, read: &ReadOptions) -> CliResult<()> {
    let table = data::read_csv(input, read)?;
    let x = &table.sample;
    let lambda0 = match &opts.lambda0 {
        Some(Lambda0::Shape(s)) => Some(s.clone()),
        Some(Lambda0::Keys(k)) => Some(k.to_shape(opts.family, x.p())?),
        None => None,
    };
    let cfg = TestConfig {
        family: opts.family,
        mode: opts.mode,
        lambda0,
        n: x.n(),
        m: opts.m.unwrap_or(x.n().max(1000)),
        replications: opts.replications,
        bootstrap: opts.bootstrap,
        delta: opts.delta,
        kernel: settings.kernel,
        seed: settings.seed,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let outcome = match opts.mode {
        Mode::Composite => composite_test(x, &cfg),
        Mode::Simple => simple_test(x, &cfg),
    }
    .map_err(CliError::from_compute)?;
    let report = GofReport {
        family: opts.family,
        data: DataInfo::new(input, &table),
        outcome,
    };
    emit(settings.out.as_deref(), &to_json(&report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub label: String,
    pub x: f64,
    pub n: usize,
    pub m: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<StudyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyFile {
    pub name: String,
    pub protocol: String,
    pub family: Family,
    pub cells: Vec<CellResult>,
    pub run: RunInfo,
}

fn csv_cell(v: Option<f64>) -> String {
    v.map(data::format_g17).unwrap_or_default()
}

fn study_csv(study: &StudyFile) -> String {
    let mut s = String::from("label,x,n,m,truth,rate,rejections,effective_replications,failures,critical_value,error\n");
    for c in &study.cells {
        let quote = |t: &str| format!("\"{}\"", t.replace('"', "\"\""));
        let r = c.report.as_ref();
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            quote(&c.label),
            data::format_g17(c.x),
            c.n,
            c.m,
            r.map(|r| r.truth.family().to_string()).unwrap_or_default(),
            csv_cell(r.map(|r| r.rejection_rate)),
            r.map(|r| r.rejections.to_string()).unwrap_or_default(),
            r.map(|r| r.effective_replications.to_string()).unwrap_or_default(),
            r.map(|r| r.failures.to_string()).unwrap_or_default(),
            csv_cell(r.and_then(|r| r.critical_value)),
            c.error.as_deref().map(quote).unwrap_or_default(),
        ));
    }
    s
}

fn cell_truth(cfg: &ConfigFile, cell: &crate::config::CellSection, family: Family, p: usize) -> CliResult<FamilySpec> {
    if let Some(spec) = &cell.spec {
        let path = cfg.resolve(spec);
        let spec: FamilySpec = json_arg(&path.display().to_string(), "family spec")?;
        spec.validate().map_err(CliError::from_input)?;
        return Ok(spec);
    }
    let truth = match &cell.truth {
        Some(t) => parse_family(t).map_err(|e| CliError::Data(e.to_string()))?,
        None => family,
    };
    cell.shape_keys().to_truth(truth, p)
}

/// Runs every cell of a study config; cell failures are recorded in the
/// report and do not stop the run. Writes `<name>.json`, `<name>.csv` and,
/// when requested, `<name>.svg` into the output directory.
pub fn cmd_study(settings: &Settings, cfg: &ConfigFile) -> CliResult<()> {
    let started = Instant::now();
    let study = cfg
        .study
        .as_ref()
        .ok_or_else(|| CliError::Data("config has no [study] section".into()))?;
    let family = parse_family(&study.family).map_err(|e| CliError::Data(e.to_string()))?;
    let protocol = study.protocol.as_str();
    if !["warp-speed", "simple", "nested"].contains(&protocol) {
        return Err(CliError::Data(format!(
            "unknown protocol '{protocol}' (expected warp-speed, simple or nested)"
        )));
    }
    let lambda0 = match (protocol, &cfg.lambda0) {
        ("simple", Some(k)) => Some(k.to_shape(family, study.p)?),
        ("simple", None) => return Err(CliError::Data("the simple protocol needs a [lambda0] section".into())),
        _ => None,
    };
    let base = |n: usize, m: usize| {
        let mut c = match &lambda0 {
            Some(s) => TestConfig::simple(s.clone(), n),
            None => TestConfig::composite(family, n),
        };
        c.m = m;
        c.replications = study.replications.unwrap_or(c.replications);
        c.bootstrap = study.bootstrap.unwrap_or(c.bootstrap);
        c.delta = study.delta.unwrap_or(c.delta);
        c.kernel = settings.kernel;
        c.seed = settings.seed;
        c
    };
    base(1, 1).validate().map_err(|e| CliError::Data(e.to_string()))?;
    let mut criticals: HashMap<(usize, usize), Result<f64, String>> = HashMap::new();
    let mut cells = Vec::with_capacity(cfg.cell.len());
    for (i, cell) in cfg.cell.iter().enumerate() {
        let t = Instant::now();
        let m = cell.m.unwrap_or(cell.n);
        let tc = base(cell.n, m);
        let result: Result<StudyReport, String> = (|| {
            let truth = cell_truth(cfg, cell, family, study.p).map_err(|e| e.to_string())?;
            match protocol {
                "warp-speed" => warp_speed_study(&tc, &truth).map_err(|e| e.to_string()),
                "nested" => nested_study(&tc, &truth).map_err(|e| e.to_string()),
                _ => {
                    let crit = criticals
                        .entry((cell.n, m))
                        .or_insert_with(|| {
                            simple_null_critical(&tc, study.p)
                                .map(|(c, _)| c)
                                .map_err(|e| e.to_string())
                        })
                        .clone()?;
                    simple_null_power(&tc, crit, &truth).map_err(|e| e.to_string())
                }
            }
        })();
        let label = cell.label(i);
        match &result {
            Ok(r) => eprintln!(
                "{label}: rate {:.4} ({} of {}) in {:.1}s",
                r.rejection_rate,
                r.rejections,
                r.effective_replications,
                t.elapsed().as_secs_f64()
            ),
            Err(e) => eprintln!("{label}: failed: {e}"),
        }
        let (report, error) = match result {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e)),
        };
        cells.push(CellResult {
            label,
            x: cell.x.unwrap_or(cell.n as f64),
            n: cell.n,
            m,
            report,
            error,
        });
    }
    let file = StudyFile {
        name: study.name.clone(),
        protocol: protocol.to_string(),
        family,
        cells,
        run: RunInfo::finish(settings.seed, started),
    };
    let dir = settings.out.clone().unwrap_or_else(|| PathBuf::from("."));
    emit(Some(&dir.join(format!("{}.json", study.name))), &to_json(&file))?;
    emit(Some(&dir.join(format!("{}.csv", study.name))), &study_csv(&file))?;
    if study.plot {
        let points: Vec<(f64, f64)> = file
            .cells
            .iter()
            .filter_map(|c| c.report.as_ref().map(|r| (c.x, r.rejection_rate)))
            .collect();
        let title = study.title.clone().unwrap_or_else(|| study.name.clone());
        let svg = PowerCurve {
            title: &title,
            x_label: study.x_label.as_deref().unwrap_or("n"),
            points: &points,
            delta: base(1, 1).delta,
        }
        .render();
        emit(Some(&dir.join(format!("{}.svg", study.name))), &svg)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleCheckReport {
    pub passed: bool,
    pub oracles: Vec<OracleReport>,
    pub run: RunInfo,
}

/// Returns whether every oracle passed.
pub fn cmd_oracle_check(settings: &Settings, instances: usize, draws: usize, n_sim: usize) -> CliResult<bool> {
    let started = Instant::now();
    if instances == 0 || draws < 2 || n_sim == 0 {
        return Err(CliError::Usage("--instances, --draws and --n-sim must be positive".into()));
    }
    let mut oracles = vec![statistic_oracle(instances, draws, settings.seed).map_err(CliError::from_compute)?];
    for f in [Family::Sn, Family::Sl, Family::As] {
        oracles.push(sampler_cf_oracle(f, n_sim, settings.seed).map_err(CliError::from_compute)?);
    }
    oracles.push(tau_round_trip_oracle());
    let passed = oracles.iter().all(|o| o.passed);
    for o in &oracles {
        eprintln!(
            "{}: {} ({}/{} instances, margin {:.3e})",
            o.name,
            if o.passed { "pass" } else { "FAIL" },
            o.passing(),
            o.instances.len(),
            o.margin
        );
    }
    let report = OracleCheckReport {
        passed,
        oracles,
        run: RunInfo::finish(settings.seed, started),
    };
    emit(settings.out.as_deref(), &to_json(&report))?;
    Ok(passed)
}
