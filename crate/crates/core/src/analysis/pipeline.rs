//! End-to-end run: ingest, moments, per-bidder fits, comparisons, subsamples
//! and rendered reports.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use super::report::{
    render_table, subsample_csv, subsample_latex, BidderPanel, ReportTable, SubsampleRow,
};
use super::subsample::{regime_threshold, split_monthly, split_regime_at};
use crate::auction::{clear_auction, simulate_market, simulate_rounds, SimConfig, SimError};
use crate::config::{ConfigError, KeyValues};
use crate::market_data::{
    build_dataset, load_bids, load_candles, write_bids, write_candles, BidRecord, CandleSeries,
    DataError, DatasetOptions, DatasetReport, RoundDataset, DEFAULT_BAR_MS,
};
use crate::mle::{
    family_name, fit_tobit_from, form_name, parse_family, parse_form, regressors_name, ErrorFamily,
    FitOptions, Form, LogBidBase, Regressors, TobitFit, TobitParams, TobitSpec,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid run configuration: {0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    /// Read bids and candles from disk.
    Files,
    /// Generate candles and truthful bids, then ingest them like files.
    SimulateMarket,
    /// Draw the dataset straight from the censored regression model.
    SimulateReduced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: InputMode,
    pub bids: Option<PathBuf>,
    pub candles: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Addresses or address prefixes; empty selects the `top_bidders` most active.
    pub bidders: Vec<String>,
    pub top_bidders: usize,
    pub dataset: DatasetOptions,
    pub bar_ms: i64,
    pub forms: Vec<Form>,
    pub families: Vec<ErrorFamily>,
    pub monthly: bool,
    pub regime: bool,
    pub fit: FitOptions,
    pub log_bid_base: LogBidBase,
    pub censor_point: f64,
    pub scatter_groups: usize,
    pub sim: SimConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            mode: InputMode::SimulateMarket,
            bids: None,
            candles: None,
            out_dir: PathBuf::from("out"),
            bidders: Vec::new(),
            top_bidders: 2,
            dataset: DatasetOptions::default(),
            bar_ms: DEFAULT_BAR_MS,
            forms: vec![Form::Linear, Form::LogLog],
            families: vec![ErrorFamily::StudentT, ErrorFamily::Gaussian],
            monthly: true,
            regime: true,
            fit: FitOptions {
                seed: sim.seed,
                ..FitOptions::default()
            },
            log_bid_base: LogBidBase::Wei,
            censor_point: 1.0,
            scatter_groups: 5,
            sim,
        }
    }
}

fn invalid(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    }
}

impl RunConfig {
    /// Reads every run and simulation key and rejects unknown ones.
    pub fn from_kv(kv: &KeyValues) -> Result<Self, PipelineError> {
        let d = Self::default();
        let sim = SimConfig::from_kv(kv)?;
        let bids: Option<PathBuf> = kv.get::<String>("bids")?.map(PathBuf::from);
        let candles: Option<PathBuf> = kv.get::<String>("candles")?.map(PathBuf::from);
        let mode = match kv.raw("mode") {
            None if bids.is_some() => InputMode::Files,
            None => d.mode,
            Some("files") => InputMode::Files,
            Some("simulate") | Some("market") => InputMode::SimulateMarket,
            Some("reduced") => InputMode::SimulateReduced,
            Some(other) => {
                return Err(invalid("mode", other, "expected files, simulate or reduced").into())
            }
        };
        let forms = match kv.get_list::<String>("forms")? {
            None => d.forms,
            Some(v) => v
                .iter()
                .map(|s| parse_form(s).map_err(|e| invalid("forms", s, &e)))
                .collect::<Result<_, _>>()?,
        };
        let families = match kv.get_list::<String>("families")? {
            None => d.families,
            Some(v) => v
                .iter()
                .map(|s| parse_family(s).map_err(|e| invalid("families", s, &e)))
                .collect::<Result<_, _>>()?,
        };
        let log_bid_base = match kv.raw("log_bid_base") {
            None | Some("wei") => LogBidBase::Wei,
            Some("scaled") => LogBidBase::Scaled,
            Some(other) => {
                return Err(invalid("log_bid_base", other, "expected wei or scaled").into())
            }
        };
        let cfg = Self {
            mode,
            bids,
            candles,
            out_dir: kv
                .get::<String>("out")?
                .map(PathBuf::from)
                .unwrap_or(d.out_dir),
            bidders: kv.get_list("bidders")?.unwrap_or_default(),
            top_bidders: kv.get_or("top_bidders", d.top_bidders)?,
            dataset: DatasetOptions {
                window: kv.get_or("window", d.dataset.window)?,
                lags: kv.get_or("lags", d.dataset.lags)?,
                lagged: kv.get_or("lagged", d.dataset.lagged)?,
                max_fill: kv.get_or("max_fill", d.dataset.max_fill)?,
            },
            bar_ms: kv.get_or("bar_ms", d.bar_ms)?,
            forms,
            families,
            monthly: kv.get_or("monthly", d.monthly)?,
            regime: kv.get_or("regime", d.regime)?,
            fit: FitOptions {
                starts: kv.get_or("starts", d.fit.starts)?,
                max_iter: kv.get_or("max_iter", d.fit.max_iter)?,
                tol: kv.get_or("tol", d.fit.tol)?,
                jitter: kv.get_or("jitter", d.fit.jitter)?,
                seed: sim.seed,
                std_errors: true,
            },
            log_bid_base,
            censor_point: kv.get_or("censor_point", d.censor_point)?,
            scatter_groups: kv.get_or("scatter_groups", d.scatter_groups)?,
            sim,
        };
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        Self::from_kv(&KeyValues::load(path)?)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.forms.is_empty() || self.families.is_empty() {
            return Err(PipelineError::Invalid("the spec matrix is empty".into()));
        }
        if self.mode == InputMode::Files && (self.bids.is_none() || self.candles.is_none()) {
            return Err(PipelineError::Invalid(
                "file mode needs both bids and candles".into(),
            ));
        }
        if self.dataset.window < 3 || self.dataset.lags + 1 >= self.dataset.window {
            return Err(PipelineError::Invalid(format!(
                "need window >= 3 and lags < window - 1, got T = {} and L = {}",
                self.dataset.window, self.dataset.lags
            )));
        }
        if self.bar_ms <= 0 || self.scatter_groups == 0 {
            return Err(PipelineError::Invalid(
                "bar_ms and scatter_groups must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Every `(form, family)` pair in configuration order.
    pub fn spec_matrix(&self) -> Vec<(Form, ErrorFamily)> {
        self.forms
            .iter()
            .flat_map(|&f| self.families.iter().map(move |&e| (f, e)))
            .collect()
    }

    pub fn spec(&self, form: Form, family: ErrorFamily, regressors: Regressors) -> TobitSpec {
        TobitSpec {
            censor_point: self.censor_point,
            log_bid_base: self.log_bid_base,
            ..TobitSpec::new(form, family, regressors)
        }
    }
}

/// A fit that failed and was skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub bidder: String,
    pub spec: String,
    pub subsample: String,
    pub model: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSummary {
    pub dataset_rows: usize,
    pub dataset_report: DatasetReport,
    pub bidders: Vec<String>,
    pub tables: Vec<ReportTable>,
    pub failures: Vec<Failure>,
    pub outputs: Vec<PathBuf>,
}

impl PipelineSummary {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            2
        }
    }
}

struct Output {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn write(&mut self, rel: &str, contents: &[u8]) -> Result<(), PipelineError> {
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        fs::write(&path, contents).map_err(io_err(&path))?;
        self.written.push(path);
        Ok(())
    }

    fn write_with(
        &mut self,
        rel: &str,
        f: impl FnOnce(File) -> Result<(), PipelineError>,
    ) -> Result<(), PipelineError> {
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        f(File::create(&path).map_err(io_err(&path))?)?;
        self.written.push(path);
        Ok(())
    }
}

/// Resolves the bidder filter against the addresses present.
fn select_bidders(cfg: &RunConfig, data: &RoundDataset) -> Vec<String> {
    let present = data.bidders();
    if cfg.bidders.is_empty() {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &data.rows {
            *counts.entry(&r.bidder).or_default() += 1;
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        return ranked
            .into_iter()
            .take(cfg.top_bidders)
            .map(|(b, _)| b.to_string())
            .collect();
    }
    cfg.bidders
        .iter()
        .map(|want| {
            let w = want.to_ascii_lowercase();
            match present
                .iter()
                .find(|b| b.to_ascii_lowercase().starts_with(&w))
            {
                Some(b) => b.clone(),
                None => {
                    log::warn!("bidder {want} has no rows; its panel will be empty");
                    want.clone()
                }
            }
        })
        .collect()
}

fn spec_tag(form: Form, family: ErrorFamily) -> String {
    format!("{}_{}", form_name(form), family_name(family))
}

/// Fit warm-started from the optimum of the next smaller model, when available.
fn nested_fit(
    cfg: &RunConfig,
    data: &RoundDataset,
    form: Form,
    family: ErrorFamily,
    regressors: Regressors,
    smaller: Option<&TobitFit>,
) -> Result<TobitFit, String> {
    let warm: Vec<TobitParams> = smaller.map(|f| f.params.clone()).into_iter().collect();
    fit_tobit_from(data, &cfg.spec(form, family, regressors), &cfg.fit, &warm)
        .map_err(|e| e.to_string())
}

/// Null, reduced and full fits of one bidder under one spec.
struct FitTriple {
    reduced: Result<TobitFit, String>,
    full: Result<TobitFit, String>,
}

fn fit_triple(cfg: &RunConfig, data: &RoundDataset, form: Form, family: ErrorFamily) -> FitTriple {
    if data.is_empty() {
        let e = "no observations".to_string();
        return FitTriple {
            reduced: Err(e.clone()),
            full: Err(e),
        };
    }
    let null = nested_fit(cfg, data, form, family, Regressors::InterceptOnly, None);
    let mut reduced = nested_fit(
        cfg,
        data,
        form,
        family,
        Regressors::Reduced,
        null.as_ref().ok(),
    );
    let mut full = nested_fit(
        cfg,
        data,
        form,
        family,
        Regressors::Full,
        reduced.as_ref().ok(),
    );
    if let Ok(null) = &null {
        for f in [&mut reduced, &mut full].into_iter().flatten() {
            f.set_null(null.loglik);
        }
    } else if let Err(e) = &null {
        log::warn!("null model failed ({e}); McFadden R2 unavailable");
    }
    FitTriple { reduced, full }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn scatter_csv(data: &RoundDataset, bidders: &[String], groups: usize) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record([
        "bidder",
        "round_id",
        "bid_scaled",
        "censored",
        "x1",
        "x2",
        "group",
    ]);
    for bidder in bidders {
        let sub = data.for_bidder(bidder);
        let mut order: Vec<usize> = (0..sub.len()).collect();
        order.sort_by(|&a, &b| sub.rows[a].x1.total_cmp(&sub.rows[b].x1).then(a.cmp(&b)));
        let mut group = vec![0usize; sub.len()];
        for (rank, &i) in order.iter().enumerate() {
            group[i] = rank * groups / sub.len() + 1;
        }
        for (r, g) in sub.rows.iter().zip(group) {
            let _ = w.write_record([
                r.bidder.clone(),
                r.round_id.to_string(),
                r.bid_scaled.to_string(),
                r.censored.to_string(),
                r.x1.to_string(),
                r.x2.to_string(),
                g.to_string(),
            ]);
        }
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

/// Second-price revenue per round from the observed bids.
fn revenue_csv(data: &RoundDataset, reserve: f64) -> String {
    let mut rounds: BTreeMap<u64, Vec<(&str, f64)>> = BTreeMap::new();
    for r in &data.rows {
        rounds
            .entry(r.round_id)
            .or_default()
            .push((&r.bidder, r.bid_scaled));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(["round_id", "n_bids", "winner", "payment_scaled"]);
    for (round_id, bids) in rounds {
        let amounts: Vec<f64> = bids.iter().map(|b| b.1).collect();
        let (winner, payment) = match clear_auction(round_id, &amounts, reserve) {
            Ok(o) => (
                o.winner.map(|i| bids[i].0.to_string()).unwrap_or_default(),
                o.payment,
            ),
            Err(_) => (String::new(), 0.0),
        };
        let _ = w.write_record([
            round_id.to_string(),
            bids.len().to_string(),
            winner,
            payment.to_string(),
        ]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

fn failures_csv(failures: &[Failure]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(["bidder", "spec", "subsample", "model", "error"]);
    for f in failures {
        let _ = w.write_record([&f.bidder, &f.spec, &f.subsample, &f.model, &f.error]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

fn report_text(report: &DatasetReport, rows: usize, censored: usize) -> String {
    format!(
        "rows = {rows}\ncensored = {censored}\nrounds = {}\ndropped_coverage = {}\n\
         dropped_no_predecessor = {}\nfloored_rounds = {}\nfilled_bars = {}\n",
        report.rounds,
        report.dropped_coverage,
        report.dropped_no_predecessor,
        report.floored_rounds,
        report.filled_bars
    )
}

/// Obtains the regression dataset for the configured input mode, writing any
/// generated inputs under `input/`.
fn load_dataset(
    cfg: &RunConfig,
    out: &mut Output,
) -> Result<(RoundDataset, DatasetReport), PipelineError> {
    match cfg.mode {
        InputMode::Files => {
            let bids = load_bids(cfg.bids.as_ref().expect("validated"))?;
            let candles = load_candles(cfg.candles.as_ref().expect("validated"), cfg.bar_ms)?;
            Ok(build_dataset(&bids, &candles, &cfg.dataset)?)
        }
        InputMode::SimulateMarket => {
            let sim = simulate_market(&cfg.sim)?;
            out.write_with("input/candles.csv", |f| Ok(write_candles(f, &sim.candles)?))?;
            out.write_with("input/bids.csv", |f| Ok(write_bids(f, &sim.bids)?))?;
            let mut params = String::from("bidder,alpha,beta,rho\n");
            for (name, p) in &sim.bidders {
                params.push_str(&format!("{name},{},{},{}\n", p.alpha, p.beta, p.rho));
            }
            out.write("input/bidders.csv", params.as_bytes())?;
            let bids: Vec<BidRecord> = sim.bids;
            let candles = CandleSeries::from_candles(DEFAULT_BAR_MS, sim.candles)?;
            Ok(build_dataset(&bids, &candles, &cfg.dataset)?)
        }
        InputMode::SimulateReduced => {
            let sim = simulate_rounds(&cfg.sim)?;
            let mut truth = Vec::new();
            sim.truth
                .write_csv(&mut truth)
                .map_err(io_err(&out.path("input/truth.csv")))?;
            out.write("input/truth.csv", &truth)?;
            let report = DatasetReport {
                rounds: sim.rounds.len(),
                ..Default::default()
            };
            Ok((sim.dataset, report))
        }
    }
}

/// Runs the whole analysis and writes every artifact under `cfg.out_dir`.
///
/// Individual fit failures are collected in `failures.csv` and do not abort
/// the run; [`PipelineSummary::exit_code`] is 2 when any occurred.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineSummary, PipelineError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;
    let mut out = Output {
        root: cfg.out_dir.clone(),
        written: Vec::new(),
    };

    let (data, dataset_report) = load_dataset(cfg, &mut out)?;
    log::info!(
        "dataset: {} rows, {} censored",
        data.len(),
        data.n_censored()
    );
    out.write_with("dataset.csv", |f| Ok(data.write_csv(f)?))?;
    out.write(
        "dataset_report.txt",
        report_text(&dataset_report, data.len(), data.n_censored()).as_bytes(),
    )?;

    let bidders = select_bidders(cfg, &data);
    let per_bidder: Vec<RoundDataset> = bidders.iter().map(|b| data.for_bidder(b)).collect();
    let specs = cfg.spec_matrix();
    let mut failures = Vec::new();

    // Main fits: bidder x spec, aggregated in configuration order.
    let tasks: Vec<(usize, Form, ErrorFamily)> = specs
        .iter()
        .flat_map(|&(f, e)| (0..bidders.len()).map(move |b| (b, f, e)))
        .collect();
    let results: Vec<FitTriple> = tasks
        .par_iter()
        .map(|&(b, f, e)| fit_triple(cfg, &per_bidder[b], f, e))
        .collect();
    let mut results = results.into_iter();
    let mut tables = Vec::new();
    for &(form, family) in &specs {
        let tag = spec_tag(form, family);
        let mut panels = Vec::new();
        for (bidder, sub) in bidders.iter().zip(&per_bidder) {
            let triple = results.next().expect("one result per task");
            if sub.is_empty() {
                // Already warned in select_bidders; not a fit failure.
                panels.push(BidderPanel {
                    bidder: bidder.clone(),
                    reduced: None,
                    full: None,
                });
                continue;
            }
            let mut keep =
                |model: Regressors, r: Result<TobitFit, String>, out: &mut Output| match r {
                    Ok(fit) => {
                        let rel = format!("fits/{bidder}_{tag}_{}.csv", regressors_name(model));
                        let mut buf = Vec::new();
                        fit.write_csv(&mut buf).map_err(io_err(&out.path(&rel)))?;
                        out.write(&rel, &buf)?;
                        Ok::<_, PipelineError>(Some(fit))
                    }
                    Err(error) => {
                        log::warn!("{bidder} {tag} {}: {error}", regressors_name(model));
                        failures.push(Failure {
                            bidder: bidder.clone(),
                            spec: tag.clone(),
                            subsample: "all".into(),
                            model: regressors_name(model).into(),
                            error,
                        });
                        Ok(None)
                    }
                };
            let reduced = keep(Regressors::Reduced, triple.reduced, &mut out)?;
            let full = keep(Regressors::Full, triple.full, &mut out)?;
            panels.push(BidderPanel {
                bidder: bidder.clone(),
                reduced,
                full,
            });
        }
        let table = ReportTable {
            form,
            family,
            lagged: cfg.dataset.lagged,
            panels,
        };
        let rendered = render_table(&table);
        out.write(
            &format!("reports/table_{tag}.tex"),
            rendered.latex.as_bytes(),
        )?;
        out.write(
            &format!("reports/table_{tag}.txt"),
            rendered.text.as_bytes(),
        )?;
        out.write(&format!("reports/table_{tag}.csv"), rendered.csv.as_bytes())?;
        tables.push(table);
    }

    // Subsample grid under the first spec of the matrix.
    if (cfg.monthly || cfg.regime) && !specs.is_empty() {
        let (form, family) = specs[0];
        let tag = spec_tag(form, family);
        let threshold = regime_threshold(&data);
        let mut cells: Vec<(String, String, RoundDataset)> = Vec::new();
        for (bidder, sub) in bidders.iter().zip(&per_bidder) {
            if sub.is_empty() {
                continue;
            }
            if cfg.monthly {
                for (month, part) in split_monthly(sub) {
                    cells.push((bidder.clone(), month, part));
                }
            }
            if let (true, Some(t)) = (cfg.regime, threshold) {
                let split = split_regime_at(sub, t);
                cells.push((bidder.clone(), "High E[IV]/sqrt(P)".into(), split.high));
                cells.push((bidder.clone(), "Low E[IV]/sqrt(P)".into(), split.low));
            }
        }
        let fits: Vec<(Result<TobitFit, String>, Result<TobitFit, String>)> = cells
            .par_iter()
            .map(|(_, _, part)| {
                let reduced = nested_fit(cfg, part, form, family, Regressors::Reduced, None);
                let full = nested_fit(
                    cfg,
                    part,
                    form,
                    family,
                    Regressors::Full,
                    reduced.as_ref().ok(),
                );
                (reduced, full)
            })
            .collect();
        let mut rows = Vec::new();
        for ((bidder, name, part), (reduced, full)) in cells.into_iter().zip(fits) {
            let mut ok = |model: Regressors, r: Result<TobitFit, String>| match r {
                Ok(f) => Some(f),
                Err(error) => {
                    log::warn!("{bidder} {name} {}: {error}", regressors_name(model));
                    failures.push(Failure {
                        bidder: bidder.clone(),
                        spec: tag.clone(),
                        subsample: name.clone(),
                        model: regressors_name(model).into(),
                        error,
                    });
                    None
                }
            };
            let reduced = ok(Regressors::Reduced, reduced);
            let full = ok(Regressors::Full, full);
            rows.push(SubsampleRow {
                n_obs: part.len(),
                x1_range: range(part.rows.iter().map(|r| r.x1)),
                x2_range: range(part.rows.iter().map(|r| r.x2)),
                bidder,
                subsample: name,
                reduced,
                full,
            });
        }
        out.write(
            &format!("reports/subsamples_{tag}.tex"),
            subsample_latex(&rows).as_bytes(),
        )?;
        out.write(
            &format!("reports/subsamples_{tag}.csv"),
            subsample_csv(&rows).as_bytes(),
        )?;
    }

    out.write(
        "scatter.csv",
        scatter_csv(&data, &bidders, cfg.scatter_groups).as_bytes(),
    )?;
    out.write(
        "revenue.csv",
        revenue_csv(&data, cfg.censor_point).as_bytes(),
    )?;
    out.write("failures.csv", failures_csv(&failures).as_bytes())?;
    if !failures.is_empty() {
        log::warn!("{} fits failed; see failures.csv", failures.len());
    }
    let mut log = Vec::new();
    for p in &out.written {
        let _ = writeln!(
            log,
            "{}",
            p.strip_prefix(&cfg.out_dir).unwrap_or(p).display()
        );
    }
    out.write("manifest.txt", &log)?;

    Ok(PipelineSummary {
        dataset_rows: data.len(),
        dataset_report,
        bidders,
        tables,
        failures,
        outputs: out.written,
    })
}
