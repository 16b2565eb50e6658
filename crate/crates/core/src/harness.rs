//! Multi-chain experiment runner behind the `estimate` command: runs
//! independent chains of one estimator, then writes trace CSVs, a summary
//! JSON and an SVG of the sample paths.
//!
//! Random streams (see [`crate::sampler`]): chain `c` estimating bin `q`
//! uses stream `c + q * BIN_STREAM_OFFSET`; its counting stage, if any, uses
//! that plus [`AUX_STREAM_OFFSET`]. Results depend only on the seed and the
//! configuration, never on the worker count.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{
    assemble_zf, count_bins_absgibbs, count_bins_uniform, estimate_z_ogata_tanemura, estimate_z_uniform,
    log2_biguint, AssembledZ, BinEstimate, Estimate, EstimatorId, EstimatorTrace, TraceSchedule,
};
use crate::dump::{DumpHeader, DumpWriter};
use crate::exact::{exact_summary, ExactCaps, PartitionSummary};
use crate::grid::GridModel;
use crate::kernel::PairwiseKernel;
use crate::sampler::{
    BinnedSample, GibbsSampler, RejectionSampler, SamplerConfig, Scheme, UniformSampler, AUX_STREAM_OFFSET,
};
use crate::value::PhaseBin;

pub const BIN_STREAM_OFFSET: u64 = 1 << 40;

/// Where Z estimators get `|X_b|` from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountSource {
    /// Exact count from the transfer matrix or brute force.
    Exact,
    /// Per-chain uniform counting stage with this many samples.
    Estimate(u64),
    /// Given `log2 |X_b|`.
    Log2(f64),
}

impl std::str::FromStr for CountSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "exact" {
            return Ok(CountSource::Exact);
        }
        if let Some(k) = s.strip_prefix("estimate:") {
            return Ok(CountSource::Estimate(parse_count(k)?));
        }
        if let Some(v) = s.strip_prefix("log2:") {
            return v
                .parse()
                .map(CountSource::Log2)
                .map_err(|_| Error::Config(format!("bad log2 count {v:?}")));
        }
        Err(Error::Config(format!(
            "count source must be exact, estimate:<K> or log2:<value>, got {s:?}"
        )))
    }
}

/// Which bins an estimator targets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BinSelection {
    One(PhaseBin),
    /// Every nonempty axis bin (Z estimators also assemble `Z_f`).
    All,
}

impl std::str::FromStr for BinSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(BinSelection::All);
        }
        PhaseBin::parse(s)
            .map(BinSelection::One)
            .ok_or_else(|| Error::Config(format!("unknown bin {s:?} (plus, minus, plus_i, minus_i, zero, all)")))
    }
}

impl BinSelection {
    pub fn name(&self) -> String {
        match self {
            BinSelection::One(b) => b.name(),
            BinSelection::All => "all".into(),
        }
    }
}

/// Parses sample counts, accepting `100000`, `1e5` and `2.5e6`.
pub fn parse_count(s: &str) -> Result<u64> {
    let s = s.trim().replace('_', "");
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {s:?} as a count")))?;
    if !(v >= 0.0 && v.fract() == 0.0 && v < 1.8e19) {
        return Err(Error::Config(format!("{s:?} is not a nonnegative integer")));
    }
    Ok(v as u64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub rows: usize,
    pub cols: usize,
    pub kernel: PairwiseKernel,
    pub estimator: EstimatorId,
    pub bin: BinSelection,
    pub k: u64,
    pub chains: u64,
    pub seed: u64,
    pub burn_in: u32,
    pub thinning: u32,
    pub scheme: Scheme,
    pub max_draws_per_accept: u64,
    pub count_source: CountSource,
    pub max_points: u64,
    /// Compute the exact value of each traced quantity for reference, when
    /// an exact engine can handle the model.
    pub reference: bool,
    /// Keep a binary dump of every chain's estimator samples.
    pub dump_samples: bool,
}

impl ExperimentConfig {
    pub fn new(rows: usize, cols: usize, kernel: PairwiseKernel, estimator: EstimatorId) -> Self {
        let sampler = SamplerConfig::default();
        ExperimentConfig {
            rows,
            cols,
            kernel,
            estimator,
            bin: BinSelection::One(PhaseBin::PLUS),
            k: 1000,
            chains: 10,
            seed: 0,
            burn_in: sampler.burn_in,
            thinning: sampler.thinning,
            scheme: sampler.scheme,
            max_draws_per_accept: sampler.max_draws_per_accept,
            count_source: CountSource::Exact,
            max_points: 1000,
            reference: true,
            dump_samples: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::Config("chains must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        self.sampler(0).validate()
    }

    pub fn model(&self) -> Result<GridModel> {
        GridModel::new(self.rows, self.cols, self.kernel.clone())
    }

    fn sampler(&self, stream: u64) -> SamplerConfig {
        SamplerConfig {
            seed: self.seed,
            chain_id: stream,
            burn_in: self.burn_in,
            thinning: self.thinning,
            scheme: self.scheme,
            max_draws_per_accept: self.max_draws_per_accept,
        }
    }
}

/// Config file / flag layer. Unset fields fall through to the next layer.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub preset: Option<String>,
    pub kernel_file: Option<PathBuf>,
    pub size: Option<usize>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub estimator: Option<String>,
    pub bin: Option<String>,
    #[serde(rename = "K", alias = "k")]
    pub k: Option<serde_json::Value>,
    pub chains: Option<u64>,
    pub seed: Option<u64>,
    pub burn_in: Option<u32>,
    pub thinning: Option<u32>,
    pub scheme: Option<String>,
    pub max_draws_per_accept: Option<u64>,
    pub count_source: Option<String>,
    pub max_points: Option<u64>,
    pub reference: Option<bool>,
    pub dump_samples: Option<bool>,
}

macro_rules! layer {
    ($top:expr, $bottom:expr, $($field:ident),*) => {
        PartialConfig { $($field: $top.$field.clone().or_else(|| $bottom.$field.clone())),* }
    };
}

impl PartialConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// `self` wins over `lower` field by field.
    /// A kernel source or grid shape in `self` replaces the lower layer's
    /// as a whole, so `--size` overrides `rows`/`cols` from a file.
    pub fn over(&self, lower: &PartialConfig) -> PartialConfig {
        let mut lower = lower.clone();
        if self.preset.is_some() || self.kernel_file.is_some() {
            lower.preset = None;
            lower.kernel_file = None;
        }
        if self.size.is_some() || self.rows.is_some() || self.cols.is_some() {
            lower.size = None;
            lower.rows = None;
            lower.cols = None;
        }
        layer!(
            self, lower, preset, kernel_file, size, rows, cols, estimator, bin, k, chains, seed, burn_in,
            thinning, scheme, max_draws_per_accept, count_source, max_points, reference, dump_samples
        )
    }

    /// Fills remaining gaps with defaults; `seed_fallback` is used when no
    /// layer sets a seed.
    pub fn resolve(&self, seed_fallback: Option<u64>) -> Result<ExperimentConfig> {
        let kernel = match (&self.preset, &self.kernel_file) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either a preset or a kernel file, not both".into()))
            }
            (Some(p), None) => PairwiseKernel::preset(p)?,
            (None, Some(f)) => PairwiseKernel::load(f)?,
            (None, None) => return Err(Error::Config("no kernel: pass --preset or --kernel-file".into())),
        };
        let rows = self.rows.or(self.size);
        let cols = self.cols.or(self.size);
        let (Some(rows), Some(cols)) = (rows, cols) else {
            return Err(Error::Config("no grid size: pass --size or --rows/--cols".into()));
        };
        let estimator: EstimatorId = self.estimator.as_deref().unwrap_or("uniform_z").parse()?;
        let mut cfg = ExperimentConfig::new(rows, cols, kernel, estimator);
        if let Some(b) = &self.bin {
            cfg.bin = b.parse()?;
        }
        if let Some(k) = &self.k {
            cfg.k = match k {
                serde_json::Value::Number(n) => parse_count(&n.to_string())?,
                serde_json::Value::String(s) => parse_count(s)?,
                other => return Err(Error::Config(format!("K must be a number, got {other}"))),
            };
        }
        if let Some(c) = self.chains {
            cfg.chains = c;
        }
        cfg.seed = self.seed.or(seed_fallback).unwrap_or(0);
        if let Some(v) = self.burn_in {
            cfg.burn_in = v;
        }
        if let Some(v) = self.thinning {
            cfg.thinning = v;
        }
        if let Some(s) = &self.scheme {
            cfg.scheme = s.parse()?;
        }
        if let Some(v) = self.max_draws_per_accept {
            cfg.max_draws_per_accept = v;
        }
        if let Some(s) = &self.count_source {
            cfg.count_source = s.parse()?;
        }
        if let Some(v) = self.max_points {
            cfg.max_points = v;
        }
        if let Some(v) = self.reference {
            cfg.reference = v;
        }
        if let Some(v) = self.dump_samples {
            cfg.dump_samples = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug)]
pub struct ChainResult {
    pub chain_id: u64,
    /// `traces[0]` is the primary trace.
    pub traces: Vec<EstimatorTrace>,
    /// `log2 |X_b|` used by each Z estimate, per bin (estimated or exact).
    pub bin_counts: Vec<(PhaseBin, f64)>,
    /// Rejection rates of the uniform-on-bin samplers.
    pub rejection_rates: Vec<(PhaseBin, f64)>,
    /// Final `Gamma_b` of Ogata-Tanemura runs.
    pub gammas: Vec<(PhaseBin, Estimate)>,
    /// Binary dump of the samples fed to the estimator, when requested.
    pub dump: Option<Vec<u8>>,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub n: usize,
    pub chains: Vec<ChainResult>,
    /// Exact summary, if an engine could compute it.
    pub exact: Option<PartitionSummary>,
}

/// Checks estimator/kernel compatibility before any sampling.
pub fn check_compatibility(cfg: &ExperimentConfig) -> Result<()> {
    let k = &cfg.kernel;
    match cfg.estimator {
        EstimatorId::CountAbsgibbs => {
            if !k.is_real() {
                return Err(Error::UnsupportedEstimator(
                    "count_absgibbs solves the two-bin sign system only; this kernel is complex, use count_uniform"
                        .into(),
                ));
            }
            if k.has_zero_entry() {
                return Err(Error::Precondition("count_absgibbs needs |X0| = 0: kernel has a zero entry".into()));
            }
        }
        EstimatorId::OgataTanemura if k.has_zero_entry() => {
            return Err(Error::Precondition(
                "ogata_tanemura samples p_|f| by Gibbs and needs a kernel without zero entries".into(),
            ));
        }
        _ => {}
    }
    if cfg.estimator.estimates_z() {
        if let BinSelection::One(b) = cfg.bin {
            if b.quarter().is_none() {
                return Err(Error::UnsupportedEstimator(format!(
                    "{} estimates axis bins (plus, minus, plus_i, minus_i), not {b}",
                    cfg.estimator
                )));
            }
        }
        if cfg.bin == BinSelection::All && !matches!(cfg.count_source, CountSource::Exact) && !k.is_axis_aligned() {
            return Err(Error::UnsupportedEstimator("bin=all needs an axis-aligned kernel".into()));
        }
    }
    Ok(())
}

fn exact_for(model: &GridModel, caps: &ExactCaps) -> Option<PartitionSummary> {
    let transfer_ok = model.quarter_table().is_some() && model.cols() <= caps.transfer_max_cols;
    if transfer_ok || model.n() <= caps.brute_max_n.min(20) {
        exact_summary(model, caps).ok()
    } else {
        None
    }
}

/// Runs every chain on a pool of `workers` threads.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize, caps: &ExactCaps) -> Result<ExperimentResult> {
    cfg.validate()?;
    check_compatibility(cfg)?;
    let model = cfg.model()?;

    let needs_exact = cfg.estimator.estimates_z() && cfg.count_source == CountSource::Exact;
    let exact = if needs_exact || cfg.reference || cfg.bin == BinSelection::All {
        exact_for(&model, caps)
    } else {
        None
    };
    if needs_exact && exact.is_none() {
        return Err(Error::ResourceCap {
            what: "model size for an exact bin count (use --count-source estimate:<K>)",
            value: model.n(),
            cap: caps.brute_max_n,
        });
    }

    let bins: Vec<PhaseBin> = match cfg.bin {
        BinSelection::One(b) => vec![b],
        BinSelection::All => match &exact {
            Some(s) => s.nonempty_bins(),
            None => {
                if cfg.estimator.estimates_z() {
                    return Err(Error::Config(
                        "bin=all for Z estimators needs the nonempty bins from an exact engine".into(),
                    ));
                }
                PhaseBin::AXES.to_vec()
            }
        },
    };
    if cfg.estimator.estimates_z() {
        if let (Some(s), CountSource::Exact) = (&exact, &cfg.count_source) {
            for b in &bins {
                if s.count(b.quarter().unwrap()).bits() == 0 {
                    return Err(Error::EmptyBinSuspected {
                        bin: b.name(),
                        draws: 0,
                    });
                }
            }
        }
    }

    let run = |c| run_chain(cfg, &model, &bins, exact.as_ref(), c);
    // One worker runs inline, which also keeps single-threaded targets working.
    let chains: Vec<ChainResult> = if workers <= 1 {
        (0..cfg.chains).map(run).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
        pool.install(|| (0..cfg.chains).into_par_iter().map(run).collect::<Result<_>>())?
    };
    Ok(ExperimentResult {
        config: cfg.clone(),
        n: model.n(),
        chains,
        exact,
    })
}

/// Gibbs samples from `p_|f|` restricted to one bin.
struct FilteredGibbs<'a> {
    inner: GibbsSampler<'a>,
    bin: PhaseBin,
    max_misses: u64,
}

impl Iterator for FilteredGibbs<'_> {
    type Item = Result<BinnedSample>;

    fn next(&mut self) -> Option<Self::Item> {
        for _ in 0..self.max_misses {
            let s = self.inner.next_sample();
            if s.bin == self.bin {
                return Some(Ok(s));
            }
        }
        Some(Err(Error::EmptyBinSuspected {
            bin: self.bin.name(),
            draws: self.max_misses,
        }))
    }
}

fn run_chain(
    cfg: &ExperimentConfig,
    model: &GridModel,
    bins: &[PhaseBin],
    exact: Option<&PartitionSummary>,
    chain_id: u64,
) -> Result<ChainResult> {
    let schedule = TraceSchedule::new(cfg.k, cfg.max_points);
    let mut out = ChainResult {
        chain_id,
        traces: Vec::new(),
        bin_counts: Vec::new(),
        rejection_rates: Vec::new(),
        gammas: Vec::new(),
        dump: None,
    };
    let scheme = match cfg.estimator {
        EstimatorId::UniformZ | EstimatorId::CountUniform => None,
        _ => Some(cfg.scheme),
    };
    let mut dump = if cfg.dump_samples {
        let header = DumpHeader {
            rows: model.rows() as u32,
            cols: model.cols() as u32,
            seed: cfg.seed,
            chain_id,
            scheme,
        };
        Some(DumpWriter::new(Vec::new(), header)?)
    } else {
        None
    };
    let mut record = |s: &BinnedSample| {
        if let Some(w) = dump.as_mut() {
            w.write(&s.x).expect("sample matches the model");
        }
    };
    match cfg.estimator {
        EstimatorId::UniformZ | EstimatorId::OgataTanemura => {
            for &bin in bins {
                let q = bin.quarter().unwrap() as u64;
                let stream = chain_id + q * BIN_STREAM_OFFSET;
                let log2_count = match &cfg.count_source {
                    CountSource::Exact => log2_biguint(exact.expect("checked above").count(q as u8)),
                    CountSource::Log2(v) => *v,
                    CountSource::Estimate(k) => {
                        let samples = UniformSampler::with_stream(model, cfg.seed, stream + AUX_STREAM_OFFSET);
                        let ct = count_bins_uniform(model.n(), samples, TraceSchedule::new(*k, 1), chain_id)?;
                        let xi = ct.fold.xi(bin).log2_abs;
                        if xi == f64::NEG_INFINITY {
                            return Err(Error::EmptyBinSuspected {
                                bin: bin.name(),
                                draws: *k,
                            });
                        }
                        xi
                    }
                };
                out.bin_counts.push((bin, log2_count));
                let scfg = cfg.sampler(stream);
                if cfg.estimator == EstimatorId::UniformZ {
                    let mut sampler = RejectionSampler::new(model, &scfg, bin)?;
                    let samples = (&mut sampler).inspect(|r| {
                        if let Ok(s) = r {
                            record(s)
                        }
                    });
                    let trace = estimate_z_uniform(bin, log2_count, samples, schedule, chain_id)?;
                    out.rejection_rates.push((bin, sampler.rejection_rate()));
                    out.traces.push(trace);
                } else {
                    let samples = FilteredGibbs {
                        inner: GibbsSampler::new(model, &scfg)?,
                        bin,
                        max_misses: cfg.max_draws_per_accept,
                    }
                    .inspect(|r| {
                        if let Ok(s) = r {
                            record(s)
                        }
                    });
                    let (trace, gamma) = estimate_z_ogata_tanemura(bin, log2_count, samples, schedule, chain_id)?;
                    out.gammas.push((bin, gamma));
                    out.traces.push(trace);
                }
            }
        }
        EstimatorId::CountUniform => {
            let samples = UniformSampler::with_stream(model, cfg.seed, chain_id).inspect(&mut record);
            let ct = count_bins_uniform(model.n(), samples, schedule, chain_id)?;
            let mut traces = ct.traces;
            let primary = bins[0];
            let pos = traces.iter().position(|t| t.bin == Some(primary)).unwrap_or(0);
            let first = traces.remove(pos);
            out.traces.push(first);
            out.traces.extend(traces);
        }
        EstimatorId::CountAbsgibbs => {
            let samples = GibbsSampler::new(model, &cfg.sampler(chain_id))?.inspect(&mut record);
            let ag = count_bins_absgibbs(model.n(), samples, schedule, chain_id)?;
            if bins[0] == PhaseBin::MINUS {
                out.traces.extend([ag.minus, ag.plus]);
            } else {
                out.traces.extend([ag.plus, ag.minus]);
            }
            out.traces.extend([ag.lambda, ag.gamma]);
        }
    }
    if let Some(w) = dump {
        out.dump = Some(w.finish()?);
    }
    Ok(out)
}

/// Summary of one traced quantity across chains.
#[derive(Clone, Debug, Serialize)]
pub struct QuantitySummary {
    pub quantity: String,
    pub bin: Option<String>,
    pub finals_log2: Vec<f64>,
    pub finals_re: Vec<f64>,
    pub finals_im: Vec<f64>,
    /// `log2` of the mean of the chain finals (in linear scale).
    pub mean_log2: Option<f64>,
    pub rel_stderr: Option<f64>,
    pub exact_log2: Option<f64>,
    /// `*_log2 / N`, the per-variable scale used in the plots of Z.
    pub mean_log2_per_n: Option<f64>,
    pub exact_log2_per_n: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub estimator: EstimatorId,
    pub kernel: String,
    pub rows: usize,
    pub cols: usize,
    pub n: usize,
    #[serde(rename = "K")]
    pub k: u64,
    pub chains: u64,
    pub seed: u64,
    pub scheme: Scheme,
    pub burn_in: u32,
    pub thinning: u32,
    pub count_source: CountSource,
    pub bins: String,
    pub quantities: Vec<QuantitySummary>,
    /// Per-chain `log2 |X_b|` used by Z estimators.
    pub bin_counts: Vec<BinCountRecord>,
    pub rejection_rates: Vec<(String, f64)>,
    pub z_f: Option<AssembledZ>,
    pub cancellation: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BinCountRecord {
    pub chain_id: u64,
    pub bin: String,
    pub log2_count: f64,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl ExperimentResult {
    /// Exact `log2 |value|` of a traced quantity, when known.
    pub fn exact_log2(&self, trace: &EstimatorTrace) -> Option<f64> {
        let s = self.exact.as_ref()?;
        let n = self.n as f64;
        match (trace.quantity, trace.bin) {
            ("z", Some(PhaseBin::Exact(q))) => finite(s.log2_abs_bin(q)),
            ("xi", Some(PhaseBin::Exact(q))) | ("count", Some(PhaseBin::Exact(q))) => {
                finite(log2_biguint(s.count(q)))
            }
            ("xi", Some(PhaseBin::Zero)) => finite(log2_biguint(&s.zero_count)),
            ("gamma", None) => finite(n - s.log2_z_abs()),
            ("lambda", None) => {
                let (p, m) = (s.count(0), s.count(2));
                let diff = if p >= m { p - m } else { m - p };
                finite(log2_biguint(&diff) - s.log2_z_abs())
            }
            _ => None,
        }
    }

    pub fn summary(&self) -> Result<RunSummary> {
        let cfg = &self.config;
        let n = self.n as f64;
        let ntraces = self.chains[0].traces.len();
        let mut quantities = Vec::with_capacity(ntraces);
        for i in 0..ntraces {
            let proto = &self.chains[0].traces[i];
            let finals: Vec<Estimate> = self.chains.iter().map(|c| c.traces[i].final_estimate()).collect();
            let q = proto.bin.and_then(|b| b.quarter()).unwrap_or(0);
            let be = BinEstimate::from_chains(q, &finals)?;
            let exact = self.exact_log2(proto);
            let per_n = proto.estimator.estimates_z();
            quantities.push(QuantitySummary {
                quantity: proto.quantity.to_string(),
                bin: proto.bin.map(|b| b.name()),
                finals_log2: finals.iter().map(|e| e.log2_abs).collect(),
                finals_re: finals.iter().map(|e| e.to_complex().re).collect(),
                finals_im: finals.iter().map(|e| e.to_complex().im).collect(),
                mean_log2: finite(be.log2_abs),
                rel_stderr: finite(be.rel_stderr),
                exact_log2: exact,
                mean_log2_per_n: if per_n { finite(be.log2_abs / n) } else { None },
                exact_log2_per_n: if per_n { exact.map(|e| e / n) } else { None },
            });
        }

        let z_f = if cfg.estimator.estimates_z() && cfg.bin == BinSelection::All {
            let mut per_bin = Vec::new();
            for (i, t) in self.chains[0].traces.iter().enumerate() {
                let q = t.bin.and_then(|b| b.quarter()).unwrap();
                let finals: Vec<Estimate> = self.chains.iter().map(|c| c.traces[i].final_estimate()).collect();
                per_bin.push(BinEstimate::from_chains(q, &finals)?);
            }
            let bins: Vec<PhaseBin> = per_bin.iter().map(|b| PhaseBin::Exact(b.quarter)).collect();
            Some(assemble_zf(&bins, &per_bin)?)
        } else {
            None
        };

        Ok(RunSummary {
            estimator: cfg.estimator,
            kernel: cfg.kernel.label(),
            rows: cfg.rows,
            cols: cfg.cols,
            n: self.n,
            k: cfg.k,
            chains: cfg.chains,
            seed: cfg.seed,
            scheme: cfg.scheme,
            burn_in: cfg.burn_in,
            thinning: cfg.thinning,
            count_source: cfg.count_source.clone(),
            bins: cfg.bin.name(),
            quantities,
            bin_counts: self
                .chains
                .iter()
                .flat_map(|c| {
                    c.bin_counts.iter().map(move |(b, l)| BinCountRecord {
                        chain_id: c.chain_id,
                        bin: b.name(),
                        log2_count: *l,
                    })
                })
                .collect(),
            rejection_rates: self
                .chains
                .iter()
                .flat_map(|c| c.rejection_rates.iter().map(|(b, r)| (b.name(), *r)))
                .collect(),
            cancellation: z_f.map(|z| z.cancellation),
            z_f,
        })
    }

    /// Trace CSV (`chain_id,k,estimate_log2,estimate_re,estimate_im`) of
    /// trace `index` across all chains.
    pub fn trace_csv(&self, index: usize) -> String {
        let mut s = String::from("chain_id,k,estimate_log2,estimate_re,estimate_im\n");
        for c in &self.chains {
            for p in &c.traces[index].points {
                let z = p.estimate.to_complex();
                let _ = writeln!(s, "{},{},{},{},{}", c.chain_id, p.k, p.estimate.log2_abs, z.re, z.im);
            }
        }
        s
    }

    /// File stem for trace `index`: `trace` for the primary one.
    pub fn trace_name(&self, index: usize) -> String {
        if index == 0 {
            return "trace".into();
        }
        let t = &self.chains[0].traces[index];
        match t.bin {
            Some(b) => format!("trace_{}_{}", t.quantity, b.name()),
            None => format!("trace_{}", t.quantity),
        }
    }

    /// SVG of all chains' primary traces: `log2(estimate) / N` for Z
    /// estimators, `log2(estimate)` for counts.
    pub fn svg(&self) -> String {
        let per_n = self.config.estimator.estimates_z();
        let scale = if per_n { self.n as f64 } else { 1.0 };
        let series: Vec<Vec<(f64, f64)>> = self
            .chains
            .iter()
            .map(|c| {
                c.traces[0]
                    .points
                    .iter()
                    .filter(|p| p.estimate.log2_abs.is_finite())
                    .map(|p| (p.k as f64, p.estimate.log2_abs / scale))
                    .collect()
            })
            .collect();
        let primary = &self.chains[0].traces[0];
        let reference = self.exact_log2(primary).map(|e| e / scale);
        let what = match (primary.quantity, per_n) {
            (_, true) => format!("(1/N) log2 Z, bin {}", primary.bin.map_or("all".into(), |b| b.name())),
            ("xi", _) | ("count", _) => format!("log2 |X|, bin {}", primary.bin.map_or("all".into(), |b| b.name())),
            (q, _) => format!("log2 {q}"),
        };
        let title = format!(
            "{} on {}x{} {}, K = {}, {} chains",
            self.config.estimator,
            self.config.rows,
            self.config.cols,
            self.config.kernel.label(),
            self.config.k,
            self.config.chains
        );
        render_svg(&title, &what, &series, reference, self.config.k as f64)
    }

    pub fn write_outputs(&self, dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for i in 0..self.chains[0].traces.len() {
            let path = dir.join(format!("{}.csv", self.trace_name(i)));
            std::fs::write(&path, self.trace_csv(i))?;
            written.push(path);
        }
        let path = dir.join("summary.json");
        let mut f = std::fs::File::create(&path)?;
        serde_json::to_writer_pretty(&mut f, &self.summary()?)?;
        f.write_all(b"\n")?;
        written.push(path);
        for c in &self.chains {
            if let Some(bytes) = &c.dump {
                let path = dir.join(format!("samples_chain{}.bin", c.chain_id));
                std::fs::write(&path, bytes)?;
                written.push(path);
            }
        }
        if svg {
            let path = dir.join("traces.svg");
            std::fs::write(&path, self.svg())?;
            written.push(path);
        }
        Ok(written)
    }
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn render_svg(title: &str, ylabel: &str, series: &[Vec<(f64, f64)>], reference: Option<f64>, xmax: f64) -> String {
    let (w, h) = (800.0, 480.0);
    let (left, right, top, bottom) = (80.0, 20.0, 40.0, 50.0);
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for &(_, y) in series.iter().flatten() {
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    if let Some(r) = reference {
        ymin = ymin.min(r);
        ymax = ymax.max(r);
    }
    if !ymin.is_finite() {
        ymin = 0.0;
        ymax = 1.0;
    }
    if ymax - ymin < 1e-9 {
        ymin -= 0.5;
        ymax += 0.5;
    }
    let pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    let xmax = xmax.max(1.0);
    let px = |x: f64| left + (w - left - right) * x / xmax;
    let py = |y: f64| top + (h - top - bottom) * (ymax - y) / (ymax - ymin);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, xml_escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - left - right,
        h - top - bottom
    );
    for i in 0..=5 {
        let y = ymin + (ymax - ymin) * i as f64 / 5.0;
        let yy = py(y);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" x2="{}" y1="{yy:.2}" y2="{yy:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{:.4}</text>"##,
            w - right,
            left - 6.0,
            yy + 4.0,
            y
        );
        let x = xmax * i as f64 / 5.0;
        let xx = px(x);
        let _ = writeln!(
            s,
            r#"<text x="{xx:.2}" y="{}" text-anchor="middle">{}</text>"#,
            h - bottom + 18.0,
            format_count(x)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">number of samples k</text>"#,
        (left + w - right) / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0,
        xml_escape(ylabel)
    );
    if let Some(r) = reference {
        let yy = py(r);
        let _ = writeln!(
            s,
            r#"<line x1="{left}" x2="{}" y1="{yy:.2}" y2="{yy:.2}" stroke="black" stroke-dasharray="6 4"/>"#,
            w - right
        );
    }
    for (i, pts) in series.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let mut path = String::new();
        for &(x, y) in pts {
            let _ = write!(path, "{:.2},{:.2} ", px(x), py(y));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            path.trim_end()
        );
    }
    s.push_str("</svg>\n");
    s
}

fn format_count(x: f64) -> String {
    if x >= 1e4 {
        format!("{x:.1e}")
    } else {
        format!("{}", x.round())
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_accept_scientific_notation() {
        assert_eq!(parse_count("1e5").unwrap(), 100_000);
        assert_eq!(parse_count("2.5e3").unwrap(), 2500);
        assert_eq!(parse_count("1_000").unwrap(), 1000);
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let file = PartialConfig {
            preset: Some("neg13".into()),
            size: Some(3),
            chains: Some(4),
            k: Some(serde_json::json!("1e3")),
            seed: Some(11),
            ..Default::default()
        };
        let flags = PartialConfig {
            chains: Some(2),
            ..Default::default()
        };
        let cfg = flags.over(&file).resolve(Some(99)).unwrap();
        assert_eq!(cfg.chains, 2);
        assert_eq!(cfg.k, 1000);
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.burn_in, 100);
        let cfg = PartialConfig {
            seed: None,
            ..file
        }
        .resolve(Some(99))
        .unwrap();
        assert_eq!(cfg.seed, 99);
    }

    #[test]
    fn incompatible_estimators_fail_before_sampling() {
        let cfg = ExperimentConfig::new(3, 3, PairwiseKernel::cplx15i(), EstimatorId::CountAbsgibbs);
        assert!(matches!(check_compatibility(&cfg), Err(Error::UnsupportedEstimator(_))));
        let mut cfg = ExperimentConfig::new(3, 3, PairwiseKernel::neg13(), EstimatorId::UniformZ);
        cfg.bin = BinSelection::One(PhaseBin::Zero);
        assert!(check_compatibility(&cfg).is_err());
    }

    #[test]
    fn single_sample_run_produces_valid_outputs() {
        let mut cfg = ExperimentConfig::new(3, 3, PairwiseKernel::neg13(), EstimatorId::UniformZ);
        cfg.k = 1;
        cfg.chains = 1;
        let res = run_experiment(&cfg, 1, &ExactCaps::default()).unwrap();
        let csv = res.trace_csv(0);
        assert_eq!(csv.lines().count(), 2);
        assert!(res.svg().starts_with("<svg"));
        let summary = res.summary().unwrap();
        assert_eq!(summary.quantities[0].finals_log2.len(), 1);
    }
}
