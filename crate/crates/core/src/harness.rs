//! Experiment runner: configuration, instance construction, traces and summaries.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{
    run_policy, AnchorMethod, NmfBandit, NmfBanditConfig, Policy, RegretTrace, Setting, StepRecord,
    Thompson, Ucb1,
};
use crate::error::{Error, Result};
use crate::genmodel::{
    check_wstrip_l1, check_wstrip_l2, generate_lower_bound, generate_simple, generate_theory,
    BanditInstance, RewardModel, TheoryModelParams, WstripReport,
};
use crate::linalg::DenseMatrix;

pub const TRACE_HEADER: [&str; 6] = ["t", "context", "arm", "reward", "explore", "cum_regret"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    NmfBandit,
    Ucb1,
    Thompson,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::NmfBandit => "nmf_bandit",
            PolicyKind::Ucb1 => "ucb1",
            PolicyKind::Thompson => "thompson",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "nmf_bandit" => Ok(PolicyKind::NmfBandit),
            "ucb1" => Ok(PolicyKind::Ucb1),
            "thompson" => Ok(PolicyKind::Thompson),
            _ => Err(Error::Config(format!(
                "unknown policy {s:?} (expected nmf_bandit, ucb1 or thompson)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum InstanceSource {
    Simple {
        l: usize,
        k: usize,
        m: usize,
        corrupt_frac: f64,
        seed: u64,
    },
    Theory(TheoryModelParams),
    LowerBound {
        l: usize,
        k: usize,
        m: usize,
        seed: u64,
    },
    File {
        path: PathBuf,
        #[serde(default)]
        header: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RipConfig {
    /// Subset half-size; `None` uses the NMF-Bandit `m'`.
    pub m_prime: Option<usize>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for RipConfig {
    fn default() -> Self {
        Self {
            m_prime: None,
            trials: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub thetas: Vec<f64>,
    pub m_primes: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            thetas: vec![10.0, 50.0, 200.0],
            m_primes: vec![3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub instance: InstanceSource,
    /// Overrides the instance's reward model when set.
    pub reward_model: Option<RewardModel>,
    pub policies: Vec<PolicyKind>,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub nmf: NmfBanditConfig,
    /// Reward scale used to binarize rewards for Thompson sampling.
    pub thompson_reward_scale: f64,
    pub out_dir: PathBuf,
    pub rip: RipConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            setting: Setting::S1,
            instance: InstanceSource::Simple {
                l: 90,
                k: 30,
                m: 3,
                corrupt_frac: 0.05,
                seed: 0,
            },
            reward_model: Some(RewardModel::UniformWidth { width: 0.4 }),
            policies: vec![PolicyKind::NmfBandit, PolicyKind::Ucb1, PolicyKind::Thompson],
            horizon: 20_000,
            seeds: vec![0],
            nmf: NmfBanditConfig {
                m_prime: 3,
                anchor_method: AnchorMethod::Spa,
                ..Default::default()
            },
            thompson_reward_scale: 1.0,
            out_dir: PathBuf::from("out"),
            rip: RipConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("T must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("policies must not be empty".into()));
        }
        if let InstanceSource::File { path, .. } = &self.instance {
            if !path.is_file() {
                return Err(Error::Config(format!(
                    "matrix file {} is not readable",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}

/// Companion metadata written next to a matrix CSV as `<name>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub reward_model: RewardModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
}

pub fn meta_path(matrix: &Path) -> PathBuf {
    let stem = matrix
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    matrix.with_file_name(format!("{stem}.meta.json"))
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        _ => {
            let row = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                row,
                col: 0,
                msg: e.to_string(),
            }
        }
    }
}

/// Reads an `L x K` numeric CSV. Rows and columns in errors are 1-based
/// file lines and fields.
pub fn ingest_reward_matrix(path: &Path, header: bool) -> Result<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(rows.len() + 1, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if let Some(first) = rows.first() {
            if rec.len() != first.len() {
                return Err(Error::Parse {
                    row: line,
                    col: rec.len().min(first.len()) + 1,
                    msg: format!("expected {} fields, found {}", first.len(), rec.len()),
                });
            }
        }
        let mut row = Vec::with_capacity(rec.len());
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line,
                col: j + 1,
                msg: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    col: j + 1,
                    msg: format!("non-finite value {cell:?}"),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            row: 0,
            col: 0,
            msg: format!("{} contains no data rows", path.display()),
        });
    }
    DenseMatrix::from_rows(&rows)
}

/// Loads a matrix file as an instance. Metadata, when present, supplies the
/// reward model and context distribution; `reward_model` overrides it.
pub fn load_matrix_instance(
    path: &Path,
    header: bool,
    reward_model: Option<RewardModel>,
) -> Result<BanditInstance> {
    let u = ingest_reward_matrix(path, header)?;
    let meta_file = meta_path(path);
    let meta: Option<MatrixMeta> = if meta_file.is_file() {
        Some(serde_json::from_str(&fs::read_to_string(&meta_file)?)?)
    } else {
        None
    };
    if let Some(meta) = &meta {
        if (meta.l, meta.k) != u.shape() {
            return Err(Error::Config(format!(
                "{} declares {}x{} but the matrix is {}x{}",
                meta_file.display(),
                meta.l,
                meta.k,
                u.rows(),
                u.cols()
            )));
        }
    }
    let model = reward_model
        .or(meta.as_ref().map(|m| m.reward_model))
        .unwrap_or(RewardModel::Bernoulli);
    let beta = meta
        .and_then(|m| m.beta)
        .unwrap_or_else(|| vec![1.0 / u.rows() as f64; u.rows()]);
    BanditInstance::new(u, None, beta, model)
}

/// Writes `U` as CSV plus its metadata file.
pub fn write_instance(inst: &BanditInstance, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let u = inst.u();
    for s in 0..u.rows() {
        w.write_record(u.row(s).iter().map(|v| fmt_f64(*v)))
            .map_err(csv_err)?;
    }
    w.flush()?;
    let meta = MatrixMeta {
        l: inst.num_contexts(),
        k: inst.num_arms(),
        reward_model: inst.reward_model(),
        beta: Some(inst.beta().to_vec()),
    };
    fs::write(meta_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn build_instance(cfg: &ExperimentConfig) -> Result<BanditInstance> {
    let inst = match &cfg.instance {
        InstanceSource::Simple {
            l,
            k,
            m,
            corrupt_frac,
            seed,
        } => generate_simple(*l, *k, *m, *corrupt_frac, *seed)?,
        InstanceSource::Theory(p) => generate_theory(p)?,
        InstanceSource::LowerBound { l, k, m, seed } => generate_lower_bound(*l, *k, *m, *seed)?,
        InstanceSource::File { path, header } => {
            return load_matrix_instance(path, *header, cfg.reward_model);
        }
    };
    match cfg.reward_model {
        Some(model) => inst.with_reward_model(model),
        None => Ok(inst),
    }
}

pub fn write_trace(records: &[StepRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.t.to_string(),
            r.context.to_string(),
            r.arm.to_string(),
            fmt_f64(r.reward),
            u8::from(r.explore).to_string(),
            fmt_f64(r.cum_regret),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<StepRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?;
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::Parse {
            row: 1,
            col: 0,
            msg: format!("trace header must be {}", TRACE_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |j: usize| -> Result<&str> {
            rec.get(j).ok_or_else(|| Error::Parse {
                row: line,
                col: j + 1,
                msg: "missing field".into(),
            })
        };
        let bad = |j: usize| Error::Parse {
            row: line,
            col: j + 1,
            msg: format!("invalid {}", TRACE_HEADER[j]),
        };
        out.push(StepRecord {
            t: field(0)?.parse().map_err(|_| bad(0))?,
            context: field(1)?.parse().map_err(|_| bad(1))?,
            arm: field(2)?.parse().map_err(|_| bad(2))?,
            reward: field(3)?.parse().map_err(|_| bad(3))?,
            explore: match field(4)? {
                "0" => false,
                "1" => true,
                _ => return Err(bad(4)),
            },
            cum_regret: field(5)?.parse().map_err(|_| bad(5))?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub final_regret: f64,
    pub explore_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub mean_final_regret: f64,
    /// Sample standard deviation; zero for a single run.
    pub std_final_regret: f64,
    pub runs: Vec<RunSummary>,
}

impl PolicySummary {
    pub fn from_runs(mut runs: Vec<RunSummary>) -> Self {
        runs.sort_by_key(|r| r.seed);
        let n = runs.len() as f64;
        let mean = runs.iter().map(|r| r.final_regret).sum::<f64>() / n;
        let var = if runs.len() > 1 {
            runs.iter().map(|r| (r.final_regret - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean_final_regret: mean,
            std_final_regret: var.sqrt(),
            runs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub policies: BTreeMap<String, PolicySummary>,
}

impl Summary {
    pub fn mean(&self, label: &str) -> Option<f64> {
        self.policies.get(label).map(|p| p.mean_final_regret)
    }

    /// Label with the smallest mean final regret among those starting with `prefix`.
    pub fn best_with_prefix(&self, prefix: &str) -> Option<(&str, f64)> {
        self.policies
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(k, v)| (k.as_str(), v.mean_final_regret))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// One simulation: a policy label, its construction recipe and a seed.
#[derive(Debug, Clone)]
struct Cell {
    label: String,
    kind: PolicyKind,
    nmf: NmfBanditConfig,
    seed: u64,
}

fn make_policy(cfg: &ExperimentConfig, cell: &Cell, inst: &BanditInstance) -> Result<Box<dyn Policy>> {
    let (l, k) = (inst.num_contexts(), inst.num_arms());
    Ok(match cell.kind {
        PolicyKind::NmfBandit => {
            let nmf = NmfBanditConfig {
                seed: cell.seed,
                ..cell.nmf.clone()
            };
            Box::new(NmfBandit::for_instance(nmf, inst)?)
        }
        PolicyKind::Ucb1 => Box::new(Ucb1::new(cfg.setting, l, k)),
        PolicyKind::Thompson => Box::new(Thompson::new(
            cfg.setting,
            l,
            k,
            cfg.thompson_reward_scale,
            cell.seed,
        )?),
    })
}

pub fn trace_path(out_dir: &Path, label: &str, seed: u64) -> PathBuf {
    out_dir.join("traces").join(format!("{label}_seed{seed}.csv"))
}

/// Runs one policy on one seed and returns its trace without touching disk.
pub fn simulate(
    cfg: &ExperimentConfig,
    inst: &BanditInstance,
    kind: PolicyKind,
    seed: u64,
) -> Result<RegretTrace> {
    let cell = Cell {
        label: kind.name().into(),
        kind,
        nmf: cfg.nmf.clone(),
        seed,
    };
    let mut policy = make_policy(cfg, &cell, inst)?;
    run_policy(inst, policy.as_mut(), cfg.horizon, cfg.setting, seed)
}

fn run_cells(cfg: &ExperimentConfig, inst: &BanditInstance, cells: Vec<Cell>) -> Result<Summary> {
    fs::create_dir_all(cfg.out_dir.join("traces"))?;
    let results: Vec<Result<(String, RunSummary)>> = cells
        .par_iter()
        .map(|cell| {
            let mut policy = make_policy(cfg, cell, inst)?;
            let trace = run_policy(inst, policy.as_mut(), cfg.horizon, cfg.setting, cell.seed)?;
            write_trace(&trace.records, &trace_path(&cfg.out_dir, &cell.label, cell.seed))?;
            log::info!(
                "{} seed {}: final regret {:.3} ({} explore steps, {:.2}s)",
                cell.label,
                cell.seed,
                trace.summary.final_regret,
                trace.summary.explore_count,
                trace.summary.wall_time_secs
            );
            Ok((
                cell.label.clone(),
                RunSummary {
                    seed: cell.seed,
                    final_regret: trace.summary.final_regret,
                    explore_count: trace.summary.explore_count,
                    wall_time_secs: Some(trace.summary.wall_time_secs),
                },
            ))
        })
        .collect();
    let mut grouped: BTreeMap<String, Vec<RunSummary>> = BTreeMap::new();
    for r in results {
        let (label, run) = r?;
        grouped.entry(label).or_default().push(run);
    }
    let summary = Summary {
        policies: grouped
            .into_iter()
            .map(|(k, v)| (k, PolicySummary::from_runs(v)))
            .collect(),
    };
    summary.write(&cfg.out_dir.join("summary.json"))?;
    Ok(summary)
}

/// Runs every configured policy on every seed, writing one trace per cell
/// and `summary.json` under the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Summary> {
    cfg.validate()?;
    let inst = build_instance(cfg)?;
    let mut policies = cfg.policies.clone();
    policies.sort();
    policies.dedup();
    let cells = policies
        .iter()
        .flat_map(|&kind| {
            cfg.seeds.iter().map(move |&seed| Cell {
                label: kind.name().into(),
                kind,
                nmf: cfg.nmf.clone(),
                seed,
            })
        })
        .collect();
    run_cells(cfg, &inst, cells)
}

pub fn sweep_label(theta: f64, m_prime: usize) -> String {
    format!("nmf_bandit_theta{theta}_mprime{m_prime}")
}

/// Grid over `theta` and `m'` for NMF-Bandit; the other configured policies
/// run once per seed alongside.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Summary> {
    cfg.validate()?;
    if cfg.sweep.thetas.is_empty() || cfg.sweep.m_primes.is_empty() {
        return Err(Error::Config("sweep grid must not be empty".into()));
    }
    let inst = build_instance(cfg)?;
    let mut cells = Vec::new();
    for &theta in &cfg.sweep.thetas {
        for &m_prime in &cfg.sweep.m_primes {
            let nmf = NmfBanditConfig {
                theta,
                m_prime,
                ..cfg.nmf.clone()
            };
            for &seed in &cfg.seeds {
                cells.push(Cell {
                    label: sweep_label(theta, m_prime),
                    kind: PolicyKind::NmfBandit,
                    nmf: nmf.clone(),
                    seed,
                });
            }
        }
    }
    let mut baselines = cfg.policies.clone();
    baselines.sort();
    baselines.dedup();
    for kind in baselines.into_iter().filter(|k| *k != PolicyKind::NmfBandit) {
        for &seed in &cfg.seeds {
            cells.push(Cell {
                label: kind.name().into(),
                kind,
                nmf: cfg.nmf.clone(),
                seed,
            });
        }
    }
    run_cells(cfg, &inst, cells)
}

/// Rebuilds a summary from the trace files in `out_dir/traces`.
pub fn summarize(out_dir: &Path) -> Result<Summary> {
    let dir = out_dir.join("traces");
    let mut grouped: BTreeMap<String, Vec<RunSummary>> = BTreeMap::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| Error::Io(format!("cannot list {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    entries.sort();
    for path in entries {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let Some((label, seed)) = stem
            .rsplit_once("_seed")
            .and_then(|(l, s)| s.parse::<u64>().ok().map(|s| (l.to_string(), s)))
        else {
            log::warn!("skipping {}: name is not <policy>_seed<n>.csv", path.display());
            continue;
        };
        let records = read_trace(&path)?;
        let Some(last) = records.last() else {
            return Err(Error::Parse {
                row: 2,
                col: 0,
                msg: format!("{} has no records", path.display()),
            });
        };
        grouped.entry(label).or_default().push(RunSummary {
            seed,
            final_regret: last.cum_regret,
            explore_count: records.iter().filter(|r| r.explore).count() as u64,
            wall_time_secs: None,
        });
    }
    if grouped.is_empty() {
        return Err(Error::Config(format!("no traces found in {}", dir.display())));
    }
    Ok(Summary {
        policies: grouped
            .into_iter()
            .map(|(k, v)| (k, PolicySummary::from_runs(v)))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipReport {
    pub m_prime: usize,
    pub trials: usize,
    pub l1_w: WstripReport,
    pub l2_a: WstripReport,
}

/// WStRIP frequencies for the configured instance's ground-truth factors.
pub fn check_rip(cfg: &ExperimentConfig) -> Result<RipReport> {
    if cfg.rip.trials == 0 {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    if matches!(cfg.instance, InstanceSource::File { .. }) {
        return Err(Error::Capability(
            "file instances carry no ground-truth factors".into(),
        ));
    }
    let inst = build_instance(cfg)?;
    let m_prime = cfg.rip.m_prime.unwrap_or(cfg.nmf.m_prime);
    rip_report(&inst, m_prime, cfg.rip.trials, cfg.rip.seed)
}

pub fn rip_report(inst: &BanditInstance, m_prime: usize, trials: usize, seed: u64) -> Result<RipReport> {
    let (Some(a), Some(w)) = (inst.a(), inst.w()) else {
        return Err(Error::Capability("instance has no ground-truth factors".into()));
    };
    Ok(RipReport {
        m_prime,
        trials,
        l1_w: check_wstrip_l1(w, m_prime, trials, seed, None)?,
        l2_a: check_wstrip_l2(a, m_prime, trials, seed.wrapping_add(1), None)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(out: &Path) -> ExperimentConfig {
        ExperimentConfig {
            instance: InstanceSource::Simple {
                l: 12,
                k: 6,
                m: 2,
                corrupt_frac: 0.0,
                seed: 3,
            },
            horizon: 10,
            seeds: vec![1],
            nmf: NmfBanditConfig {
                m: 2,
                m_prime: 1,
                ..Default::default()
            },
            out_dir: out.to_path_buf(),
            ..Default::default()
        }
    }

    #[test]
    fn default_config_round_trips() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        let partial = ExperimentConfig::from_json(r#"{"T": 5, "seeds": [4, 5]}"#).unwrap();
        assert_eq!(partial.horizon, 5);
        assert_eq!(partial.nmf, cfg.nmf);
    }

    #[test]
    fn invalid_configs() {
        assert!(matches!(ExperimentConfig::from_json(r#"{"T": 0}"#), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_json(r#"{"seeds": []}"#), Err(Error::Config(_))));
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let missing = r#"{"instance": {"source": "file", "path": "/nonexistent/u.csv"}}"#;
        assert!(matches!(ExperimentConfig::from_json(missing), Err(Error::Config(_))));
        assert!(PolicyKind::parse("greedy").is_err());
    }

    #[test]
    fn tiny_run_writes_trace_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            policies: vec![PolicyKind::Ucb1],
            ..tiny(dir.path())
        };
        let summary = run_experiment(&cfg).unwrap();
        let trace = read_trace(&trace_path(dir.path(), "ucb1", 1)).unwrap();
        assert_eq!(trace.len(), 10);
        assert_eq!(summary.mean("ucb1"), Some(trace[9].cum_regret));
        let again = summarize(dir.path()).unwrap();
        assert_eq!(again.policies["ucb1"].mean_final_regret, trace[9].cum_regret);
    }

    #[test]
    fn plan_failure_surfaces_inequality() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            instance: InstanceSource::Simple {
                l: 11,
                k: 6,
                m: 2,
                corrupt_frac: 0.0,
                seed: 0,
            },
            policies: vec![PolicyKind::NmfBandit],
            nmf: NmfBanditConfig {
                m: 2,
                m_prime: 2,
                ..Default::default()
            },
            ..tiny(dir.path())
        };
        let err = run_experiment(&cfg).unwrap_err();
        assert!(err.to_string().contains("L >= 2 * 3 * m' = 12"), "{err}");
    }

    #[test]
    fn trace_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![
            StepRecord { t: 1, context: 3, arm: 0, reward: 0.1 + 0.2, explore: true, cum_regret: 1.0 / 3.0 },
            StepRecord { t: 2, context: 0, arm: 7, reward: -1e-300, explore: false, cum_regret: 5e-324 },
        ];
        let p = dir.path().join("t.csv");
        write_trace(&records, &p).unwrap();
        assert_eq!(read_trace(&p).unwrap(), records);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,context,arm,reward,explore,cum_regret\n"));
    }

    #[test]
    fn trace_header_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "t,context,arm,reward,regret\n1,0,0,0.5,0\n").unwrap();
        assert!(matches!(read_trace(&p), Err(Error::Parse { row: 1, .. })));
    }

    #[test]
    fn ingest_two_by_two_with_zero_gap() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.csv");
        fs::write(&p, "0.1,0.9\n0.5,0.5").unwrap();
        let inst = load_matrix_instance(&p, false, None).unwrap();
        assert_eq!(inst.u().row(0), &[0.1, 0.9]);
        assert!(inst.zero_gap());
        assert_eq!(inst.gap(), 0.0);
        assert_eq!(inst.beta(), &[0.5, 0.5]);
        assert!(inst.a().is_none());
    }

    #[test]
    fn ingest_errors_carry_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.csv");
        fs::write(&p, "").unwrap();
        assert!(matches!(ingest_reward_matrix(&p, false), Err(Error::Parse { .. })));
        fs::write(&p, "1,2\n3\n").unwrap();
        assert!(matches!(ingest_reward_matrix(&p, false), Err(Error::Parse { row: 2, .. })));
        fs::write(&p, "1,2\n3,x\n").unwrap();
        assert!(matches!(ingest_reward_matrix(&p, false), Err(Error::Parse { row: 2, col: 2, .. })));
        fs::write(&p, "a,b\n0.2,0.4\n").unwrap();
        assert_eq!(ingest_reward_matrix(&p, true).unwrap().shape(), (1, 2));
    }

    #[test]
    fn written_instance_reloads_with_meta() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("inst.csv");
        let inst = generate_simple(8, 5, 2, 0.0, 1)
            .unwrap()
            .with_reward_model(RewardModel::UniformWidth { width: 2.0 })
            .unwrap();
        write_instance(&inst, &p).unwrap();
        assert!(dir.path().join("inst.meta.json").is_file());
        let back = load_matrix_instance(&p, false, None).unwrap();
        assert_eq!(back.u(), inst.u());
        assert_eq!(back.reward_model(), inst.reward_model());
    }

    #[test]
    fn check_rip_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny(dir.path());
        cfg.rip.trials = 0;
        assert!(matches!(check_rip(&cfg), Err(Error::Parameter(_))));
        let p = dir.path().join("u.csv");
        fs::write(&p, "0.1,0.9\n0.5,0.4").unwrap();
        cfg.rip.trials = 5;
        cfg.instance = InstanceSource::File { path: p, header: false };
        assert!(matches!(check_rip(&cfg), Err(Error::Capability(_))));
    }

    #[test]
    fn sample_std_of_summaries() {
        let runs = [3.0, 1.0, 2.0]
            .iter()
            .enumerate()
            .map(|(i, &r)| RunSummary { seed: i as u64, final_regret: r, explore_count: 0, wall_time_secs: None })
            .collect();
        let s = PolicySummary::from_runs(runs);
        assert_eq!(s.mean_final_regret, 2.0);
        assert_eq!(s.std_final_regret, 1.0);
    }
}
