use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ela_core::analysis::{
    render_table, run_pipeline, BidderPanel, InputMode, ReportTable, RunConfig,
};
use ela_core::auction::{simulate_market, simulate_rounds};
use ela_core::market_data::{
    build_dataset, compute_round_moments, load_bids, load_candles, write_bids, write_candles,
    RoundDataset,
};
use ela_core::mle::{
    family_name, fit_tobit, fit_tobit_from, form_name, parse_family, parse_form, parse_regressors,
    regressors_name, ErrorFamily, Form, Regressors, TobitFit, TobitParams,
};

/// Express-lane auction bid analysis.
///
/// Log verbosity is read from ELA_LOG (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(name = "ela", version)]
struct Cli {
    /// `key = value` run configuration; command-line flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate candle and bid files and write normalized copies.
    Ingest {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Per-round integrated-variance moments and the regression dataset.
    Moments {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        window: Window,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Fit one censored regression for one bidder.
    Fit {
        #[command(flatten)]
        input: Input,
        /// Previously built dataset CSV, instead of --bids/--candles.
        #[arg(long, value_name = "FILE", conflicts_with_all = ["bids", "candles"])]
        dataset: Option<PathBuf>,
        #[command(flatten)]
        window: Window,
        /// Address or address prefix; defaults to the bidder with the most rows.
        #[arg(long)]
        bidder: Option<String>,
        #[arg(long, value_enum, default_value_t = FormArg::Linear)]
        form: FormArg,
        #[arg(long, value_enum, default_value_t = FamilyArg::T)]
        family: FamilyArg,
        /// Drop Var(IV) from both the location and the scale equation.
        #[arg(long)]
        reduced: bool,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic market or a reduced-form dataset with known parameters.
    Simulate {
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        rounds: Option<usize>,
        /// Write the reduced-form dataset and its ground truth instead of candles and bids.
        #[arg(long)]
        reduced: bool,
    },
    /// Render result tables from a directory of fit CSVs.
    Report {
        /// Directory holding `{bidder}_{form}_{family}_{model}.csv` fits.
        #[arg(long, value_name = "DIR")]
        fits: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Restrict to these bidders (repeatable), in this column order.
        #[arg(long)]
        bidder: Vec<String>,
        #[arg(long, value_enum)]
        form: Option<FormArg>,
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        /// Caption the tables as lagged-feature regressions.
        #[arg(long)]
        lagged: bool,
    },
    /// Run every step and write all artifacts. Exit code 2 when some fits failed.
    Pipeline {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        window: Window,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Address or prefix (repeatable); defaults to the most active bidders.
        #[arg(long)]
        bidder: Vec<String>,
        #[arg(long, value_enum)]
        form: Option<FormArg>,
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        /// Simulation seed when no input files are given.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct Input {
    #[arg(long, value_name = "FILE")]
    bids: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    candles: Option<PathBuf>,
}

#[derive(Args)]
struct Window {
    /// Returns per round.
    #[arg(long = "T", value_name = "T")]
    t: Option<usize>,
    /// Bartlett lag truncation.
    #[arg(long = "L", value_name = "L")]
    l: Option<usize>,
    /// Use the previous round's moments as regressors.
    #[arg(long)]
    lagged: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Linear,
    Loglog,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    T,
    Gauss,
}

impl From<FormArg> for Form {
    fn from(f: FormArg) -> Self {
        match f {
            FormArg::Linear => Form::Linear,
            FormArg::Loglog => Form::LogLog,
        }
    }
}

impl From<FamilyArg> for ErrorFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::T => ErrorFamily::StudentT,
            FamilyArg::Gauss => ErrorFamily::Gaussian,
        }
    }
}

fn base_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn apply_input(cfg: &mut RunConfig, input: &Input) {
    if let Some(b) = &input.bids {
        cfg.bids = Some(b.clone());
        cfg.mode = InputMode::Files;
    }
    if let Some(c) = &input.candles {
        cfg.candles = Some(c.clone());
        cfg.mode = InputMode::Files;
    }
}

fn apply_window(cfg: &mut RunConfig, w: &Window) {
    if let Some(t) = w.t {
        cfg.dataset.window = t;
    }
    if let Some(l) = w.l {
        cfg.dataset.lags = l;
    }
    if w.lagged {
        cfg.dataset.lagged = true;
    }
}

fn input_paths(cfg: &RunConfig) -> Result<(&Path, &Path)> {
    match (&cfg.bids, &cfg.candles) {
        (Some(b), Some(c)) => Ok((b, c)),
        _ => bail!("--bids and --candles are required (or set them in --config)"),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn ingest(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (bp, cp) = input_paths(cfg)?;
    let candles = load_candles(cp, cfg.bar_ms)?;
    let bids = load_bids(bp)?;
    create_dir(out)?;
    write_candles(fs::File::create(out.join("candles.csv"))?, &candles.candles)?;
    write_bids(fs::File::create(out.join("bids.csv"))?, &bids)?;

    let mut per_bidder: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for b in &bids {
        let e = per_bidder.entry(&b.bidder).or_default();
        e.0 += 1;
        e.1 += usize::from(b.censored);
    }
    let mut summary = format!(
        "candles = {}\ncandle_gaps = {}\ncandle_duplicates = {}\nbids = {}\nbids_censored = {}\nbidders = {}\n",
        candles.len(),
        candles.gaps.len(),
        candles.duplicates,
        bids.len(),
        bids.iter().filter(|b| b.censored).count(),
        per_bidder.len()
    );
    for (bidder, (n, c)) in &per_bidder {
        summary.push_str(&format!("bidder {bidder} = {n} bids, {c} censored\n"));
    }
    write_file(&out.join("ingest_report.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn moments(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (bp, cp) = input_paths(cfg)?;
    let candles = load_candles(cp, cfg.bar_ms)?;
    let bids = load_bids(bp)?;
    create_dir(out)?;

    let per_round = compute_round_moments(
        &bids,
        &candles,
        cfg.dataset.window,
        cfg.dataset.lags,
        cfg.dataset.max_fill,
    );
    let mut w = csv::Writer::from_path(out.join("moments.csv"))?;
    w.write_record([
        "round_id",
        "p_start",
        "e_iv",
        "var_iv",
        "floored",
        "filled_bars",
        "error",
    ])?;
    for (round_id, r) in &per_round {
        match r {
            Ok(m) => w.write_record([
                round_id.to_string(),
                m.p_start.to_string(),
                m.moments.e_iv.to_string(),
                m.moments.var_iv.to_string(),
                m.moments.floored.to_string(),
                m.fill_count.to_string(),
                String::new(),
            ])?,
            Err(e) => w.write_record([
                round_id.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                e.to_string(),
            ])?,
        }
    }
    w.flush()?;

    let (data, report) = build_dataset(&bids, &candles, &cfg.dataset)?;
    data.save(out.join("dataset.csv"))?;
    let summary = format!(
        "rows = {}\ncensored = {}\nrounds = {}\ndropped_coverage = {}\ndropped_no_predecessor = {}\nfloored_rounds = {}\nfilled_bars = {}\n",
        data.len(),
        data.n_censored(),
        report.rounds,
        report.dropped_coverage,
        report.dropped_no_predecessor,
        report.floored_rounds,
        report.filled_bars
    );
    write_file(&out.join("dataset_report.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn pick_bidder(data: &RoundDataset, want: Option<&str>) -> Result<String> {
    match want {
        Some(w) => {
            let w = w.to_ascii_lowercase();
            data.bidders()
                .into_iter()
                .find(|b| b.to_ascii_lowercase().starts_with(&w))
                .with_context(|| format!("no rows for bidder {w}"))
        }
        None => {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for r in &data.rows {
                *counts.entry(&r.bidder).or_default() += 1;
            }
            counts
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
                .map(|(b, _)| b.to_string())
                .context("dataset is empty")
        }
    }
}

fn short(v: f64) -> String {
    if v.abs() < 1e8 {
        format!("{v:.6}")
    } else {
        format!("{v:.4e}")
    }
}

fn fit_summary(bidder: &str, fit: &TobitFit) -> String {
    let mut s = format!(
        "bidder {bidder}  {} {} {}  n = {} (censored {})\n",
        form_name(fit.spec.form),
        family_name(fit.spec.family),
        regressors_name(fit.spec.regressors),
        fit.n_obs,
        fit.n_censored
    );
    for (i, name) in fit.names().iter().enumerate() {
        let est = fit.estimates()[i];
        let se = fit.std_errors.as_ref().map(|s| s[i]);
        let p = fit.p_value(name);
        s.push_str(&format!(
            "{name:<8} {:>14} {:>12} {:>10}\n",
            short(est),
            se.map(|v| format!("({})", short(v)))
                .unwrap_or_else(|| "(--)".into()),
            p.map(|v| format!("p={v:.2e}")).unwrap_or_default()
        ));
    }
    s.push_str(&format!(
        "loglik {:.4}  aic {:.4}  bic {:.4}  converged {}\n",
        fit.loglik, fit.aic, fit.bic, fit.converged
    ));
    s
}

fn fit_cmd(
    cfg: &RunConfig,
    dataset: Option<&Path>,
    bidder: Option<&str>,
    form: Form,
    family: ErrorFamily,
    regressors: Regressors,
    out: &Path,
) -> Result<()> {
    let data = match dataset {
        Some(p) => RoundDataset::load(p)?,
        None => {
            let (bp, cp) = input_paths(cfg)?;
            build_dataset(
                &load_bids(bp)?,
                &load_candles(cp, cfg.bar_ms)?,
                &cfg.dataset,
            )?
            .0
        }
    };
    let bidder = pick_bidder(&data, bidder)?;
    let sub = data.for_bidder(&bidder);
    // Walk up the nested chain so each fit starts from the smaller optimum.
    let null = fit_tobit(
        &sub,
        &cfg.spec(form, family, Regressors::InterceptOnly),
        &cfg.fit,
    );
    let mut warm: Vec<TobitParams> = null.iter().map(|f| f.params.clone()).collect();
    if regressors == Regressors::Full {
        match fit_tobit_from(
            &sub,
            &cfg.spec(form, family, Regressors::Reduced),
            &cfg.fit,
            &warm,
        ) {
            Ok(r) => warm = vec![r.params],
            Err(e) => log::warn!("reduced model failed ({e}); fitting without its warm start"),
        }
    }
    let mut fit = fit_tobit_from(&sub, &cfg.spec(form, family, regressors), &cfg.fit, &warm)?;
    match null {
        Ok(null) => fit.set_null(null.loglik),
        Err(e) => log::warn!("null model failed ({e}); McFadden R2 unavailable"),
    }
    create_dir(out)?;
    let path = out.join(format!(
        "{bidder}_{}_{}_{}.csv",
        form_name(form),
        family_name(family),
        regressors_name(regressors)
    ));
    let mut buf = Vec::new();
    fit.write_csv(&mut buf)?;
    write_file(&path, buf)?;
    print!("{}", fit_summary(&bidder, &fit));
    println!("wrote {}", path.display());
    Ok(())
}

fn simulate(cfg: &RunConfig, reduced: bool, out: &Path) -> Result<()> {
    create_dir(out)?;
    if reduced {
        let sim = simulate_rounds(&cfg.sim)?;
        sim.dataset.save(out.join("dataset.csv"))?;
        sim.truth
            .write_csv(fs::File::create(out.join("truth.csv"))?)?;
        println!(
            "{} rows ({} censored) for {} bidders",
            sim.dataset.len(),
            sim.dataset.n_censored(),
            cfg.sim.n_bidders
        );
    } else {
        let sim = simulate_market(&cfg.sim)?;
        write_candles(fs::File::create(out.join("candles.csv"))?, &sim.candles)?;
        write_bids(fs::File::create(out.join("bids.csv"))?, &sim.bids)?;
        let mut params = String::from("bidder,alpha,beta,rho\n");
        for (name, p) in &sim.bidders {
            params.push_str(&format!("{name},{},{},{}\n", p.alpha, p.beta, p.rho));
        }
        write_file(&out.join("bidders.csv"), params)?;
        println!(
            "{} candles, {} bids over {} rounds",
            sim.candles.len(),
            sim.bids.len(),
            sim.rounds.len()
        );
    }
    Ok(())
}

/// Splits `{bidder}_{form}_{family}_{model}.csv`.
fn parse_fit_name(name: &str) -> Option<(String, Form, ErrorFamily, Regressors)> {
    let stem = name.strip_suffix(".csv")?;
    let mut parts = stem.rsplitn(4, '_');
    let model = parse_regressors(parts.next()?).ok()?;
    let family = parse_family(parts.next()?).ok()?;
    let form = parse_form(parts.next()?).ok()?;
    Some((parts.next()?.to_string(), form, family, model))
}

fn report(
    fits_dir: &Path,
    out: &Path,
    bidders: &[String],
    form: Option<Form>,
    family: Option<ErrorFamily>,
    lagged: bool,
) -> Result<()> {
    type Key = (Form, ErrorFamily);
    let mut found: BTreeMap<(u8, u8), (Key, BTreeMap<String, BidderPanel>)> = BTreeMap::new();
    let mut names: Vec<String> = fs::read_dir(fits_dir)
        .with_context(|| format!("reading {}", fits_dir.display()))?
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .collect();
    names.sort();
    for name in names {
        let Some((bidder, fo, fa, model)) = parse_fit_name(&name) else {
            continue;
        };
        if model == Regressors::InterceptOnly
            || form.is_some_and(|f| f != fo)
            || family.is_some_and(|f| f != fa)
        {
            continue;
        }
        let path = fits_dir.join(&name);
        let fit = TobitFit::read_csv(fs::File::open(&path)?)
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        let order = (fo as u8, fa as u8);
        let (_, panels) = found.entry(order).or_insert(((fo, fa), BTreeMap::new()));
        let panel = panels.entry(bidder.clone()).or_insert(BidderPanel {
            bidder,
            reduced: None,
            full: None,
        });
        match model {
            Regressors::Reduced => panel.reduced = Some(fit),
            _ => panel.full = Some(fit),
        }
    }
    if found.is_empty() {
        bail!("no fit files found in {}", fits_dir.display());
    }
    create_dir(out)?;
    for ((fo, fa), mut panels) in found.into_values() {
        let ordered: Vec<BidderPanel> = if bidders.is_empty() {
            panels.into_values().collect()
        } else {
            bidders
                .iter()
                .map(|want| {
                    let key = panels
                        .keys()
                        .find(|k| {
                            k.to_ascii_lowercase()
                                .starts_with(&want.to_ascii_lowercase())
                        })
                        .cloned();
                    match key.and_then(|k| panels.remove(&k)) {
                        Some(p) => p,
                        None => {
                            log::warn!("no fits for bidder {want}; its panel will be empty");
                            BidderPanel {
                                bidder: want.clone(),
                                reduced: None,
                                full: None,
                            }
                        }
                    }
                })
                .collect()
        };
        let table = ReportTable {
            form: fo,
            family: fa,
            lagged,
            panels: ordered,
        };
        let r = render_table(&table);
        let tag = format!("{}_{}", form_name(fo), family_name(fa));
        write_file(&out.join(format!("table_{tag}.tex")), &r.latex)?;
        write_file(&out.join(format!("table_{tag}.txt")), &r.text)?;
        write_file(&out.join(format!("table_{tag}.csv")), &r.csv)?;
        print!("{}", r.text);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    let mut cfg = base_config(cli.config.as_deref())?;
    let out_or = |o: &Option<PathBuf>, cfg: &RunConfig| o.clone().unwrap_or(cfg.out_dir.clone());
    match &cli.command {
        Command::Ingest { input, out } => {
            apply_input(&mut cfg, input);
            ingest(&cfg, &out_or(out, &cfg))?;
        }
        Command::Moments { input, window, out } => {
            apply_input(&mut cfg, input);
            apply_window(&mut cfg, window);
            cfg.validate()?;
            moments(&cfg, &out_or(out, &cfg))?;
        }
        Command::Fit {
            input,
            dataset,
            window,
            bidder,
            form,
            family,
            reduced,
            out,
        } => {
            apply_input(&mut cfg, input);
            apply_window(&mut cfg, window);
            let regressors = if *reduced {
                Regressors::Reduced
            } else {
                Regressors::Full
            };
            fit_cmd(
                &cfg,
                dataset.as_deref(),
                bidder.as_deref(),
                (*form).into(),
                (*family).into(),
                regressors,
                &out_or(out, &cfg),
            )?;
        }
        Command::Simulate {
            out,
            seed,
            rounds,
            reduced,
        } => {
            if let Some(s) = seed {
                cfg.sim.seed = *s;
            }
            if let Some(n) = rounds {
                cfg.sim.n_rounds = *n;
            }
            cfg.sim.validate()?;
            simulate(&cfg, *reduced, &out_or(out, &cfg))?;
        }
        Command::Report {
            fits,
            out,
            bidder,
            form,
            family,
            lagged,
        } => {
            report(
                fits,
                &out_or(out, &cfg),
                bidder,
                form.map(Into::into),
                family.map(Into::into),
                *lagged || cfg.dataset.lagged,
            )?;
        }
        Command::Pipeline {
            input,
            window,
            out,
            bidder,
            form,
            family,
            seed,
        } => {
            apply_input(&mut cfg, input);
            apply_window(&mut cfg, window);
            if let Some(o) = out {
                cfg.out_dir = o.clone();
            }
            if !bidder.is_empty() {
                cfg.bidders = bidder.clone();
            }
            if let Some(f) = form {
                cfg.forms = vec![(*f).into()];
            }
            if let Some(f) = family {
                cfg.families = vec![(*f).into()];
            }
            if let Some(s) = seed {
                cfg.sim.seed = *s;
                cfg.fit.seed = *s;
            }
            let summary = run_pipeline(&cfg)?;
            println!(
                "{} rows, {} bidders, {} tables, {} failed fits; outputs in {}",
                summary.dataset_rows,
                summary.bidders.len(),
                summary.tables.len(),
                summary.failures.len(),
                cfg.out_dir.display()
            );
            return Ok(summary.exit_code() as u8);
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ELA_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Exit 2 is reserved for a pipeline run with failed fits.
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
