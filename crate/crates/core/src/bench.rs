//! Benchmark orchestration: scenario grid, seeding, per-method scoring,
//! aggregation and CSV output.
//!
//! A scenario is `(topology, p, n, rep)`. Its random streams are derived
//! from `hash(master_seed, topology, p, n, rep)`, so adding scenarios never
//! changes the data of existing ones and results do not depend on the
//! number of worker threads.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Normalization};
use crate::error::{Error, Result};
use crate::estimators::glasso::{glasso_path, GlassoConfig};
use crate::estimators::gtrex::{gtrex, gtrex_threshold_path, GtrexParams};
use crate::estimators::neighborhood::neighborhood_path;
use crate::gmg::{self, TopologyKind, TopologySpec};
use crate::graph::{EdgeSet, PathResult};
use crate::lasso::unit_grid;
use crate::metrics::{oracle_select, precision_recall, Score};
use crate::rng::{self, derive_seed};
use crate::trex::TrexConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Glasso,
    NsUnion,
    NsIntersection,
    Gtrex,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Glasso, Method::NsUnion, Method::NsIntersection, Method::Gtrex];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Glasso => "glasso",
            Method::NsUnion => "ns_union",
            Method::NsIntersection => "ns_intersection",
            Method::Gtrex => "gtrex",
        }
    }

    /// Name used in the published tables.
    pub fn report_label(self) -> &'static str {
        match self {
            Method::Glasso => "GLASSO",
            Method::NsUnion => "MB(and)",
            Method::NsIntersection => "MB(or)",
            Method::Gtrex => "GTREX",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::parameter(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GtrexSettings {
    pub b: usize,
    pub t: f64,
    pub q: u32,
    /// TREX iteration cap; `null` means `ceil(0.2 p)`.
    pub max_iter: Option<usize>,
}

impl Default for GtrexSettings {
    fn default() -> Self {
        Self {
            b: 31,
            t: 0.75,
            q: 40,
            max_iter: None,
        }
    }
}

impl GtrexSettings {
    pub fn params(&self) -> GtrexParams {
        GtrexParams {
            b: self.b,
            t: self.t,
            trex: TrexConfig {
                q: self.q,
                max_iter: self.max_iter,
                ..TrexConfig::default()
            },
        }
    }
}

/// The benchmark configuration; the JSON form uses these field names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub topologies: Vec<TopologyKind>,
    pub p_list: Vec<usize>,
    /// Sample sizes as multiples of `p`.
    pub n_multipliers: Vec<usize>,
    /// `"p-1"` or a fixed edge count such as `"150"`.
    pub k_rule: String,
    pub a_min: f64,
    pub a_max: f64,
    pub cond: f64,
    pub reps: usize,
    pub methods: Vec<Method>,
    pub gtrex: GtrexSettings,
    pub master_seed: u64,
    pub normalization: Normalization,
    /// Blocks seeded for four_niches (4, or 3 for the literal construction).
    pub niches_blocks: usize,
    /// Write wall-clock seconds; off makes outputs byte-reproducible.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            topologies: TopologyKind::ALL.to_vec(),
            p_list: vec![100, 200],
            n_multipliers: vec![1, 2, 4, 10],
            k_rule: "p-1".into(),
            a_min: 0.2,
            a_max: 1.0,
            cond: 100.0,
            reps: 20,
            methods: Method::ALL.to_vec(),
            gtrex: GtrexSettings::default(),
            master_seed: 0,
            normalization: Normalization::ColumnsSqrtN,
            niches_blocks: 4,
            record_timing: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn edge_count(&self, p: usize) -> Result<usize> {
        match self.k_rule.trim() {
            "p-1" => Ok(p - 1),
            other => other
                .parse()
                .map_err(|_| Error::parameter(format!("k_rule must be \"p-1\" or an integer, got {other:?}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.topologies.is_empty() || self.p_list.is_empty() || self.n_multipliers.is_empty() {
            return Err(Error::parameter("topologies, p_list and n_multipliers must be non-empty"));
        }
        if self.methods.is_empty() {
            return Err(Error::parameter("no methods selected"));
        }
        if self.reps == 0 {
            return Err(Error::parameter("reps must be at least 1"));
        }
        if self.n_multipliers.contains(&0) {
            return Err(Error::parameter("n multipliers must be positive"));
        }
        if !(self.a_min > 0.0 && self.a_max > self.a_min) {
            return Err(Error::parameter("need a_max > a_min > 0"));
        }
        if !(self.cond > 1.0) {
            return Err(Error::parameter("cond must exceed 1"));
        }
        self.gtrex.params().trex.validate()?;
        if !(0.0..=1.0).contains(&self.gtrex.t) || self.gtrex.b == 0 {
            return Err(Error::parameter("gtrex needs b >= 1 and t in [0, 1]"));
        }
        for &kind in &self.topologies {
            for &p in &self.p_list {
                TopologySpec::new(kind, p, self.edge_count(p)?, 0)
                    .with_niches_blocks(self.niches_blocks)
                    .validate()?;
            }
        }
        Ok(())
    }

    /// All scenarios in output order.
    pub fn scenarios(&self) -> Vec<Scenario> {
        let mut out = Vec::new();
        for &topology in &self.topologies {
            for &p in &self.p_list {
                for &m in &self.n_multipliers {
                    for rep in 0..self.reps {
                        out.push(Scenario { topology, p, n: m * p, rep });
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scenario {
    pub topology: TopologyKind,
    pub p: usize,
    pub n: usize,
    pub rep: usize,
}

impl Scenario {
    pub fn seed(&self, master: u64) -> u64 {
        derive_seed(master, &[self.topology.tag(), self.p as u64, self.n as u64, self.rep as u64])
    }
}

/// The GTREX threshold grid `0.05, 0.10, ..., 0.95`.
pub fn threshold_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}

/// One scored estimate: a final (oracle-selected or thresholded) estimate or
/// a single point on a path.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRecord {
    pub scenario: Scenario,
    pub method: Method,
    pub grid_value: f64,
    pub score: Score,
    pub seconds: f64,
}

pub const RECORD_HEADER: &str = "topology,p,n,rep,method,grid_value,hamming,precision,recall,tp,fp,fn,seconds";

impl ResultRecord {
    pub fn csv_line(&self) -> String {
        let s = &self.scenario;
        format!(
            "{},{},{},{},{},{},{},{}",
            s.topology,
            s.p,
            s.n,
            s.rep,
            self.method,
            self.grid_value,
            self.score.csv_record(),
            self.seconds
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRecord {
    pub scenario: Scenario,
    /// Method name, or `generate` for failures before any method ran.
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    /// One final estimate per (scenario, method).
    pub records: Vec<ResultRecord>,
    /// Every grid point of every path.
    pub paths: Vec<ResultRecord>,
    pub errors: Vec<ErrorRecord>,
}

/// Truth and normalized samples for one scenario.
pub fn scenario_data(cfg: &ExperimentConfig, scenario: &Scenario) -> Result<(EdgeSet, DataMatrix)> {
    let seed = scenario.seed(cfg.master_seed);
    let spec = TopologySpec::new(scenario.topology, scenario.p, cfg.edge_count(scenario.p)?, seed)
        .with_niches_blocks(cfg.niches_blocks);
    let truth = gmg::generate_topology(&spec, &mut rng::substream(seed, &[1]))?;
    let model = gmg::build_precision(&truth, cfg.a_min, cfg.a_max, cfg.cond, &mut rng::substream(seed, &[2]))?;
    let x = gmg::sample_gaussian(&model, scenario.n, &mut rng::substream(seed, &[3]))?;
    Ok((truth, x.normalize(cfg.normalization)?))
}

fn path_records(
    scenario: Scenario,
    method: Method,
    path: &PathResult,
    truth: &EdgeSet,
    seconds: f64,
) -> Result<Vec<ResultRecord>> {
    path.iter()
        .map(|(g, est)| {
            Ok(ResultRecord {
                scenario,
                method,
                grid_value: g,
                score: precision_recall(est, truth)?,
                seconds,
            })
        })
        .collect()
}

fn oracle_record(
    scenario: Scenario,
    method: Method,
    path: &PathResult,
    truth: &EdgeSet,
    seconds: f64,
) -> Result<ResultRecord> {
    let (idx, score) = oracle_select(path, truth)?;
    Ok(ResultRecord {
        scenario,
        method,
        grid_value: path.grid()[idx],
        score,
        seconds,
    })
}

#[derive(Default)]
struct UnitOutput {
    records: Vec<ResultRecord>,
    paths: Vec<ResultRecord>,
    errors: Vec<ErrorRecord>,
}

impl UnitOutput {
    fn absorb(&mut self, scenario: Scenario, stage: &str, result: Result<(Vec<ResultRecord>, Vec<ResultRecord>)>) {
        match result {
            Ok((records, paths)) => {
                self.records.extend(records);
                self.paths.extend(paths);
            }
            Err(e) => self.errors.push(ErrorRecord {
                scenario,
                stage: stage.into(),
                message: e.to_string(),
            }),
        }
    }
}

fn run_scenario(cfg: &ExperimentConfig, scenario: Scenario) -> UnitOutput {
    let mut out = UnitOutput::default();
    let (truth, x) = match scenario_data(cfg, &scenario) {
        Ok(v) => v,
        Err(e) => {
            out.errors.push(ErrorRecord {
                scenario,
                stage: "generate".into(),
                message: e.to_string(),
            });
            return out;
        }
    };
    let clock = |start: Instant| if cfg.record_timing { start.elapsed().as_secs_f64() } else { 0.0 };
    let seed = scenario.seed(cfg.master_seed);
    let grid = unit_grid();

    for &method in &cfg.methods {
        match method {
            Method::Glasso => {
                let start = Instant::now();
                let res = glasso_path(&x, &grid, &GlassoConfig::default()).and_then(|gp| {
                    let secs = clock(start);
                    Ok((
                        vec![oracle_record(scenario, method, &gp.path, &truth, secs)?],
                        path_records(scenario, method, &gp.path, &truth, secs)?,
                    ))
                });
                out.absorb(scenario, method.as_str(), res);
            }
            Method::NsUnion | Method::NsIntersection => {
                // Both rules come from one set of node paths; run it once.
                if method == Method::NsIntersection && cfg.methods.contains(&Method::NsUnion) {
                    continue;
                }
                let start = Instant::now();
                let paths = neighborhood_path(&x, &grid);
                let secs = clock(start);
                let wanted: Vec<Method> = [Method::NsUnion, Method::NsIntersection]
                    .into_iter()
                    .filter(|m| cfg.methods.contains(m))
                    .collect();
                for m in wanted {
                    let res = paths.as_ref().map_err(clone_error).and_then(|(u, i)| {
                        let path = if m == Method::NsUnion { u } else { i };
                        Ok((
                            vec![oracle_record(scenario, m, path, &truth, secs)?],
                            path_records(scenario, m, path, &truth, secs)?,
                        ))
                    });
                    out.absorb(scenario, m.as_str(), res);
                }
            }
            Method::Gtrex => {
                let start = Instant::now();
                let params = cfg.gtrex.params();
                let res = gtrex(&x, &params, derive_seed(seed, &[4])).and_then(|r| {
                    let secs = clock(start);
                    let path = gtrex_threshold_path(&r.freq, &threshold_grid())?;
                    let final_record = ResultRecord {
                        scenario,
                        method,
                        grid_value: params.t,
                        score: precision_recall(&r.edges, &truth)?,
                        seconds: secs,
                    };
                    Ok((vec![final_record], path_records(scenario, method, &path, &truth, secs)?))
                });
                out.absorb(scenario, method.as_str(), res);
            }
        }
    }
    // Keep final records in configured method order regardless of how the
    // neighborhood rules were batched.
    let order = |m: Method| cfg.methods.iter().position(|&x| x == m).unwrap_or(usize::MAX);
    out.records.sort_by_key(|r| order(r.method));
    out.paths.sort_by_key(|r| order(r.method));
    out
}

fn clone_error(e: &Error) -> Error {
    Error::Solver(e.to_string())
}

/// Runs every scenario on a pool of `jobs` threads. Output order follows
/// [`ExperimentConfig::scenarios`] and is independent of `jobs`.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::parameter(format!("cannot start worker pool: {e}")))?;
    let units: Vec<UnitOutput> = pool.install(|| {
        cfg.scenarios()
            .into_par_iter()
            .map(|s| run_scenario(cfg, s))
            .collect()
    });
    let mut out = ExperimentOutput::default();
    for u in units {
        out.records.extend(u.records);
        out.paths.extend(u.paths);
        out.errors.extend(u.errors);
    }
    Ok(out)
}

/// Mean and sample standard deviation of one metric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

impl Moments {
    /// Sample standard deviation (`n - 1` denominator); zero for one value.
    pub fn of(values: &[f64]) -> Moments {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Moments { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub topology: TopologyKind,
    pub p: usize,
    pub n: usize,
    pub method: Method,
    pub count: usize,
    pub hamming: Moments,
    pub precision: Moments,
    pub recall: Moments,
}

/// Mean Hamming distance at one grid point across repetitions.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub topology: TopologyKind,
    pub p: usize,
    pub n: usize,
    pub method: Method,
    pub grid_value: f64,
    pub count: usize,
    pub hamming: Moments,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    /// Final estimates grouped by (topology, p, n, method).
    pub rows: Vec<SummaryRow>,
    /// Path points grouped by (topology, p, n, method, grid value).
    pub traces: Vec<TraceRow>,
}

type GroupKey = (TopologyKind, usize, usize, Method);

fn group<'a>(records: &'a [ResultRecord]) -> BTreeMap<GroupKey, Vec<&'a ResultRecord>> {
    let mut groups: BTreeMap<GroupKey, Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        let s = r.scenario;
        groups.entry((s.topology, s.p, s.n, r.method)).or_default().push(r);
    }
    groups
}

/// Averages final records and path traces over repetitions.
pub fn aggregate(records: &[ResultRecord], paths: &[ResultRecord]) -> Summary {
    let rows = group(records)
        .into_iter()
        .map(|((topology, p, n, method), rs)| {
            let pick = |f: fn(&Score) -> f64| rs.iter().map(|r| f(&r.score)).collect::<Vec<_>>();
            SummaryRow {
                topology,
                p,
                n,
                method,
                count: rs.len(),
                hamming: Moments::of(&pick(|s| s.hamming as f64)),
                precision: Moments::of(&pick(|s| s.precision)),
                recall: Moments::of(&pick(|s| s.recall)),
            }
        })
        .collect();
    let mut traces = Vec::new();
    for ((topology, p, n, method), rs) in group(paths) {
        // Grid values are positive, so their bit patterns sort numerically.
        let mut by_grid: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for r in rs {
            by_grid
                .entry(r.grid_value.to_bits())
                .or_default()
                .push(r.score.hamming as f64);
        }
        for (bits, hs) in by_grid {
            traces.push(TraceRow {
                topology,
                p,
                n,
                method,
                grid_value: f64::from_bits(bits),
                count: hs.len(),
                hamming: Moments::of(&hs),
            });
        }
    }
    Summary { rows, traces }
}

impl Summary {
    pub fn row(&self, topology: TopologyKind, p: usize, n: usize, method: Method) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.topology == topology && r.p == p && r.n == n && r.method == method)
    }

    pub fn trace(&self, topology: TopologyKind, p: usize, n: usize, method: Method) -> Vec<&TraceRow> {
        self.traces
            .iter()
            .filter(|r| r.topology == topology && r.p == p && r.n == n && r.method == method)
            .collect()
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "topology,p,n,method,label,count,hamming_mean,hamming_std,precision_mean,precision_std,recall_mean,recall_std\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.topology,
                r.p,
                r.n,
                r.method,
                r.method.report_label(),
                r.count,
                r.hamming.mean,
                r.hamming.std,
                r.precision.mean,
                r.precision.std,
                r.recall.mean,
                r.recall.std
            );
        }
        out
    }

    pub fn traces_csv(&self) -> String {
        let mut out = String::from("topology,p,n,method,grid_value,count,hamming_mean,hamming_std\n");
        for r in &self.traces {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.topology, r.p, r.n, r.method, r.grid_value, r.count, r.hamming.mean, r.hamming.std
            );
        }
        out
    }
}

pub fn records_csv(records: &[ResultRecord]) -> String {
    let mut out = String::from(RECORD_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

pub fn errors_csv(errors: &[ErrorRecord]) -> String {
    let mut out = String::from("topology,p,n,rep,stage,message\n");
    for e in errors {
        let s = e.scenario;
        let msg = e.message.replace(['"', '\n'], " ");
        let _ = writeln!(out, "{},{},{},{},{},\"{}\"", s.topology, s.p, s.n, s.rep, e.stage, msg);
    }
    out
}

/// Writes `records.csv`, `paths.csv`, `summary.csv`, `traces.csv` and
/// `errors.csv` into `dir`.
pub fn write_outputs(dir: &Path, output: &ExperimentOutput) -> Result<Summary> {
    fs::create_dir_all(dir)?;
    let summary = aggregate(&output.records, &output.paths);
    fs::write(dir.join("records.csv"), records_csv(&output.records))?;
    fs::write(dir.join("paths.csv"), records_csv(&output.paths))?;
    fs::write(dir.join("summary.csv"), summary.summary_csv())?;
    fs::write(dir.join("traces.csv"), summary.traces_csv())?;
    fs::write(dir.join("errors.csv"), errors_csv(&output.errors))?;
    Ok(summary)
}
