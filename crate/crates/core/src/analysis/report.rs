//! Four-panel regression tables (location, scale, fit statistics, full vs
//! reduced) rendered as LaTeX, aligned text and CSV from one cell grid, and
//! the per-subsample summary table.

use std::fmt::Write as _;

use super::subsample::stars;
use crate::mle::{lr_test, ErrorFamily, Form, TobitFit};

/// One bidder's reduced and full fits. Either may be missing after a failure
/// or for a bidder with no data.
#[derive(Debug, Clone, PartialEq)]
pub struct BidderPanel {
    pub bidder: String,
    pub reduced: Option<TobitFit>,
    pub full: Option<TobitFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub form: Form,
    pub family: ErrorFamily,
    pub lagged: bool,
    pub panels: Vec<BidderPanel>,
}

#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Missing,
    Value { text: String, stars: &'static str },
    Paren(String),
}

impl Cell {
    fn plain(text: String) -> Self {
        Cell::Value { text, stars: "" }
    }

    fn text(&self) -> String {
        match self {
            Cell::Missing => "--".into(),
            Cell::Value { text, stars } => format!("{text}{stars}"),
            Cell::Paren(t) => format!("({t})"),
        }
    }

    fn latex(&self) -> String {
        match self {
            Cell::Value { text, stars } if !stars.is_empty() => format!("{text}$^{{{stars}}}$"),
            other => other.text(),
        }
    }

    /// Inside a spanning Panel D cell the stars sit in one math group.
    fn latex_span(&self) -> String {
        match self {
            Cell::Value { text, stars } if !stars.is_empty() => format!("${text}^{{{stars}}}$"),
            other => other.text(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Row {
    Section(&'static str),
    Space,
    Rule,
    Cells {
        latex: String,
        text: String,
        cells: Vec<Cell>,
    },
    /// One cell per bidder, spanning both model columns.
    Spans {
        latex: &'static str,
        text: &'static str,
        cells: Vec<Cell>,
    },
}

struct Labels {
    latex: &'static str,
    text: &'static str,
}

fn location_labels(form: Form) -> [Labels; 3] {
    let intercept = Labels {
        latex: "Intercept ($\\theta_0$)",
        text: "Intercept (theta0)",
    };
    match form {
        Form::Linear => [
            intercept,
            Labels {
                latex: "E[IV]/$\\sqrt{P}$ ($\\theta_1$)",
                text: "E[IV]/sqrt(P) (theta1)",
            },
            Labels {
                latex: "Var(IV) ($\\theta_2$)",
                text: "Var(IV) (theta2)",
            },
        ],
        Form::LogLog => [
            intercept,
            Labels {
                latex: "$\\log$(E[IV]/$\\sqrt{P}$) ($\\theta_1$)",
                text: "log(E[IV]/sqrt(P)) (theta1)",
            },
            Labels {
                latex: "$\\log$(Var(IV)) ($\\theta_2$)",
                text: "log(Var(IV)) (theta2)",
            },
        ],
    }
}

fn scale_labels() -> [Labels; 3] {
    [
        Labels {
            latex: "Intercept ($\\gamma_0$)",
            text: "Intercept (gamma0)",
        },
        Labels {
            latex: "$\\log$(E[IV]/$\\sqrt{P}$) ($\\gamma_1$)",
            text: "log(E[IV]/sqrt(P)) (gamma1)",
        },
        Labels {
            latex: "$\\log$(Var(IV)) ($\\gamma_2$)",
            text: "log(Var(IV)) (gamma2)",
        },
    ]
}

fn coef_cells(fit: Option<&TobitFit>, name: &str) -> (Cell, Cell) {
    let Some((est, se)) = fit.and_then(|f| f.get(name)) else {
        return (Cell::Missing, Cell::Missing);
    };
    let p = fit.and_then(|f| f.p_value(name));
    let value = Cell::Value {
        text: format!("{est:.4}"),
        stars: p.map(stars).unwrap_or(""),
    };
    let se = match se {
        Some(s) => Cell::Paren(format!("{s:.4}")),
        None => Cell::Missing,
    };
    (value, se)
}

fn stat_cell(fit: Option<&TobitFit>, f: impl Fn(&TobitFit) -> Option<String>) -> Cell {
    fit.and_then(f).map(Cell::plain).unwrap_or(Cell::Missing)
}

/// First six characters of an address, as in `0x8c6f`.
pub fn short_bidder(bidder: &str) -> &str {
    bidder.get(..6).unwrap_or(bidder)
}

impl ReportTable {
    pub fn caption(&self) -> String {
        let form = match self.form {
            Form::Linear => "Linear",
            Form::LogLog => "Log-Log",
        };
        let family = match self.family {
            ErrorFamily::StudentT => "t-dist",
            ErrorFamily::Gaussian => "Gaussian",
        };
        let lead = if self.lagged {
            "Regression with Lagged IV estimators"
        } else {
            "Heteroskedastic Tobit"
        };
        format!("{lead} ({form}, {family} Errors)")
    }

    pub fn label(&self) -> String {
        let form = match self.form {
            Form::Linear => "linear",
            Form::LogLog => "log",
        };
        let timing = if self.lagged { "lagged" } else { "nolag" };
        let family = match (self.form, self.family) {
            (Form::Linear, ErrorFamily::Gaussian) => "_gauss",
            (Form::LogLog, ErrorFamily::StudentT) => "_t",
            _ => "",
        };
        format!("tab:{form}_{timing}{family}")
    }

    fn fits(&self) -> Vec<Option<&TobitFit>> {
        self.panels
            .iter()
            .flat_map(|p| [p.reduced.as_ref(), p.full.as_ref()])
            .collect()
    }

    fn rows(&self) -> Vec<Row> {
        let fits = self.fits();
        let mut rows = vec![Row::Section("Panel A: Location Coefficients"), Row::Space];
        let coef_block = |rows: &mut Vec<Row>, labels: [Labels; 3], prefix: &str| {
            for (i, l) in labels.iter().enumerate() {
                let name = format!("{prefix}{i}");
                let (vals, ses): (Vec<Cell>, Vec<Cell>) =
                    fits.iter().map(|f| coef_cells(*f, &name)).unzip();
                rows.push(Row::Cells {
                    latex: l.latex.into(),
                    text: l.text.into(),
                    cells: vals,
                });
                rows.push(Row::Cells {
                    latex: String::new(),
                    text: String::new(),
                    cells: ses,
                });
            }
        };
        coef_block(&mut rows, location_labels(self.form), "theta");
        rows.extend([
            Row::Space,
            Row::Rule,
            Row::Section("Panel B: Scale Coefficients"),
            Row::Space,
        ]);
        coef_block(&mut rows, scale_labels(), "gamma");
        rows.extend([
            Row::Space,
            Row::Rule,
            Row::Rule,
            Row::Section("Panel C: Model Fit Statistics"),
            Row::Space,
        ]);
        let stat = |latex: &str, text: &str, f: &dyn Fn(&TobitFit) -> Option<String>| Row::Cells {
            latex: latex.into(),
            text: text.into(),
            cells: fits.iter().map(|fit| stat_cell(*fit, f)).collect(),
        };
        rows.push(stat("Observations", "Observations", &|f| {
            Some(f.n_obs.to_string())
        }));
        rows.push(stat("Censored", "Censored", &|f| {
            Some(f.n_censored.to_string())
        }));
        if self.family == ErrorFamily::StudentT {
            rows.push(stat("Student $t$ $\\nu$", "Student t nu", &|f| {
                f.params.nu.map(|nu| {
                    // Effectively Gaussian fits drive nu without bound.
                    if nu < 1e6 {
                        format!("{nu:.2}")
                    } else {
                        format!("{nu:.2e}")
                    }
                })
            }));
        }
        rows.push(stat("Log Likelihood", "Log Likelihood", &|f| {
            Some(format!("{:.2}", f.loglik))
        }));
        rows.push(stat("AIC", "AIC", &|f| Some(format!("{:.2}", f.aic))));
        rows.push(stat("BIC", "BIC", &|f| Some(format!("{:.2}", f.bic))));
        rows.push(stat("McFadden $R^2$", "McFadden R2", &|f| {
            f.mcfadden_r2.map(|r| format!("{r:.3}"))
        }));
        rows.extend([
            Row::Space,
            Row::Rule,
            Row::Section("Panel D: Full vs Reduced Model Comparison"),
            Row::Space,
        ]);
        let pairs: Vec<(Option<&TobitFit>, Option<&TobitFit>)> = self
            .panels
            .iter()
            .map(|p| (p.full.as_ref(), p.reduced.as_ref()))
            .collect();
        let diff = |g: fn(&TobitFit) -> f64| -> Vec<Cell> {
            pairs
                .iter()
                .map(|(f, r)| match (f, r) {
                    (Some(f), Some(r)) => Cell::plain(format!("{:.2}", g(f) - g(r))),
                    _ => Cell::Missing,
                })
                .collect()
        };
        rows.push(Row::Spans {
            latex: "$\\Delta$ AIC (Full - Reduced)",
            text: "Delta AIC (Full - Reduced)",
            cells: diff(|f| f.aic),
        });
        rows.push(Row::Spans {
            latex: "$\\Delta$ BIC (Full - Reduced)",
            text: "Delta BIC (Full - Reduced)",
            cells: diff(|f| f.bic),
        });
        rows.push(Row::Spans {
            latex: "LR Test $\\chi^2$ (p-val)",
            text: "LR Test chi2 (p-val)",
            cells: pairs
                .iter()
                .map(|(f, r)| match (f, r) {
                    (Some(f), Some(r)) => match lr_test(f, r) {
                        Ok(t) => Cell::Value {
                            text: format!("{:.2}", t.chi2),
                            stars: stars(t.p_value),
                        },
                        Err(_) => Cell::Missing,
                    },
                    _ => Cell::Missing,
                })
                .collect(),
        });
        rows
    }

    pub fn to_latex(&self) -> String {
        let n = self.panels.len();
        let width = 1 + 2 * n;
        let mut s = String::new();
        s.push_str("\\begin{table}[htbp]\n\\centering\n");
        let _ = writeln!(s, "\\begin{{tabular}}{{l{}}}", "cc".repeat(n));
        s.push_str("\\toprule\n");
        for p in &self.panels {
            let _ = write!(
                s,
                " & \\multicolumn{{2}}{{c}}{{Bidder {}}}",
                short_bidder(&p.bidder)
            );
        }
        s.push_str(" \\\\\n");
        let rules: Vec<String> = (0..n)
            .map(|i| format!("\\cmidrule(lr){{{}-{}}}", 2 + 2 * i, 3 + 2 * i))
            .collect();
        let _ = writeln!(s, "{}", rules.join(" "));
        s.push_str("Variable");
        for _ in 0..n {
            s.push_str(" & Reduced & Full");
        }
        s.push_str(" \\\\\n\\midrule\n");
        for row in self.rows() {
            match row {
                Row::Section(t) => {
                    let _ = writeln!(s, "\\multicolumn{{{width}}}{{l}}{{\\textit{{{t}}}}} \\\\");
                }
                Row::Space => s.push_str("\\addlinespace[0.5em]\n"),
                Row::Rule => s.push_str("\\midrule\n"),
                Row::Cells { latex, cells, .. } => {
                    s.push_str(&latex);
                    for c in cells {
                        let _ = write!(s, " & {}", c.latex());
                    }
                    s.push_str(" \\\\\n");
                }
                Row::Spans { latex, cells, .. } => {
                    s.push_str(latex);
                    for c in cells {
                        let _ = write!(s, " & \\multicolumn{{2}}{{c}}{{{}}}", c.latex_span());
                    }
                    s.push_str(" \\\\\n");
                }
            }
        }
        s.push_str("\\bottomrule\n\\end{tabular}\n");
        let _ = writeln!(
            s,
            "\\caption{{{}. $^{{*}}p<0.05$, $^{{**}}p<0.01$, $^{{***}}p<0.001$.}}",
            self.caption()
        );
        let _ = writeln!(s, "\\label{{{}}}", self.label());
        s.push_str("\\end{table}\n");
        s
    }

    pub fn to_text(&self) -> String {
        let n = self.panels.len();
        let mut grid: Vec<Vec<String>> = Vec::new();
        let mut head = vec![String::new()];
        for p in &self.panels {
            head.push(format!("{} Reduced", short_bidder(&p.bidder)));
            head.push(format!("{} Full", short_bidder(&p.bidder)));
        }
        grid.push(head);
        let mut sections: Vec<(usize, &'static str)> = Vec::new();
        for row in self.rows() {
            match row {
                Row::Section(t) => sections.push((grid.len(), t)),
                Row::Space | Row::Rule => {}
                Row::Cells { text, cells, .. } => {
                    let mut line = vec![text];
                    line.extend(cells.iter().map(Cell::text));
                    grid.push(line);
                }
                Row::Spans { text, cells, .. } => {
                    let mut line = vec![text.to_string()];
                    for c in &cells {
                        line.push(c.text());
                        line.push(String::new());
                    }
                    grid.push(line);
                }
            }
        }
        let mut widths = vec![0usize; 1 + 2 * n];
        for line in &grid {
            for (w, c) in widths.iter_mut().zip(line) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.caption());
        let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
        let mut section_iter = sections.iter().peekable();
        for (i, line) in grid.iter().enumerate() {
            while let Some((_, t)) = section_iter.next_if(|(at, _)| *at == i) {
                let _ = writeln!(out, "{}\n{t}", "-".repeat(total));
            }
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (c, w))| {
                    if j == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }

    /// Long format: `panel,variable,bidder,model,value` with the same cell
    /// strings as the text rendering.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(["panel", "variable", "bidder", "model", "value"]);
        let mut panel = "";
        let mut last_label = String::new();
        for row in self.rows() {
            match row {
                Row::Section(t) => panel = &t[..7],
                Row::Space | Row::Rule => {}
                Row::Cells { text, cells, .. } => {
                    let label = if text.is_empty() {
                        format!("{last_label} SE")
                    } else {
                        last_label = text.clone();
                        text
                    };
                    for (i, c) in cells.iter().enumerate() {
                        let model = if i % 2 == 0 { "reduced" } else { "full" };
                        let _ = w.write_record([
                            panel,
                            &label,
                            &self.panels[i / 2].bidder,
                            model,
                            &c.text(),
                        ]);
                    }
                }
                Row::Spans { text, cells, .. } => {
                    for (i, c) in cells.iter().enumerate() {
                        let _ = w.write_record([
                            panel,
                            text,
                            &self.panels[i].bidder,
                            "full-reduced",
                            &c.text(),
                        ]);
                    }
                }
            }
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }
}

/// LaTeX, text and CSV renderings of one table.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTable {
    pub latex: String,
    pub text: String,
    pub csv: String,
}

pub fn render_table(table: &ReportTable) -> RenderedTable {
    RenderedTable {
        latex: table.to_latex(),
        text: table.to_text(),
        csv: table.to_csv(),
    }
}

/// One subsample of one bidder: reduced and full fits on the same rows, plus
/// the regressor ranges as a conditioning diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleRow {
    pub bidder: String,
    pub subsample: String,
    pub n_obs: usize,
    pub reduced: Option<TobitFit>,
    pub full: Option<TobitFit>,
    pub x1_range: (f64, f64),
    pub x2_range: (f64, f64),
}

impl SubsampleRow {
    fn cells(&self) -> [String; 6] {
        let coef = |f: Option<&TobitFit>, name: &str| {
            f.and_then(|f| f.get(name))
                .map(|(e, _)| format!("{e:.3}"))
                .unwrap_or_else(|| "--".into())
        };
        let (lr, daic, dbic) = match (&self.full, &self.reduced) {
            (Some(f), Some(r)) => (
                lr_test(f, r)
                    .map(|t| format!("{:.1}", t.chi2))
                    .unwrap_or_else(|_| "--".into()),
                format!("{:.1}", f.aic - r.aic),
                format!("{:.1}", f.bic - r.bic),
            ),
            _ => ("--".into(), "--".into(), "--".into()),
        };
        [
            coef(self.reduced.as_ref(), "theta1"),
            coef(self.full.as_ref(), "theta1"),
            coef(self.full.as_ref(), "theta2"),
            lr,
            daic,
            dbic,
        ]
    }
}

fn subsample_label_latex(s: &str) -> String {
    s.replace("E[IV]/sqrt(P)", "E[IV]/$\\sqrt{P}$")
}

/// Subsample summary: `N`, reduced and full `theta1`, full `theta2`, LR and
/// the information-criterion differences.
pub fn subsample_latex(rows: &[SubsampleRow]) -> String {
    let mut s = String::from(
        "\\begin{table}[htbp]\n\\centering\n\\caption{Heteroskedastic Tobit Regression by Subsample}\n\
         \\label{tab:tobit_subsample}\n\\footnotesize\n\\begin{tabular}{llccccccc}\n\\toprule\n\
         Bidder & Subsample & N & $\\theta_1^R$ & $\\theta_1^F$ & $\\theta_2^F$ & LR & $\\Delta$AIC & $\\Delta$BIC \\\\\n\
         \\midrule\n",
    );
    let mut prev: Option<&str> = None;
    for row in rows {
        let first = prev != Some(row.bidder.as_str());
        if !first && row.subsample.starts_with("High") {
            s.push_str("\\addlinespace[0.3em]\n");
        }
        if first && prev.is_some() {
            s.push_str("\\midrule\n");
        }
        let bidder = if first { short_bidder(&row.bidder) } else { "" };
        let _ = write!(
            s,
            "{bidder} & {} & {}",
            subsample_label_latex(&row.subsample),
            row.n_obs
        );
        for c in row.cells() {
            let _ = write!(s, " & {c}");
        }
        s.push_str(" \\\\\n");
        prev = Some(row.bidder.as_str());
    }
    s.push_str("\\bottomrule\n\\end{tabular}\n\\end{table}\n");
    s
}

pub fn subsample_csv(rows: &[SubsampleRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record([
        "bidder",
        "subsample",
        "n_obs",
        "theta1_reduced",
        "theta1_full",
        "theta2_full",
        "lr",
        "delta_aic",
        "delta_bic",
        "x1_min",
        "x1_max",
        "x2_min",
        "x2_max",
    ]);
    for row in rows {
        let mut rec = vec![
            row.bidder.clone(),
            row.subsample.clone(),
            row.n_obs.to_string(),
        ];
        rec.extend(row.cells());
        rec.extend(
            [
                row.x1_range.0,
                row.x1_range.1,
                row.x2_range.0,
                row.x2_range.1,
            ]
            .iter()
            .map(|v| format!("{v:e}")),
        );
        let _ = w.write_record(&rec);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}
