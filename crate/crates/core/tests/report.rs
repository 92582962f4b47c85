mod common;

use common::*;
use ela_core::analysis::{
    month_key, regime_threshold, render_table, run_pipeline, split_monthly, split_regime,
    split_regime_at, InputMode,
};
use proptest::prelude::*;

#[test]
fn linear_t_table_renders_byte_for_byte() {
    assert_eq!(
        reference_linear_t().to_latex(),
        fixture("table_linear_t.tex")
    );
}

#[test]
fn loglog_gaussian_table_renders_byte_for_byte() {
    assert_eq!(
        reference_loglog_gauss().to_latex(),
        fixture("table_loglog_gauss.tex")
    );
}

fn numbers(s: &str) -> Vec<f64> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .map(|t| t.trim_matches(|c| c == '(' || c == ')' || c == '*'))
        .filter_map(|t| t.parse::<f64>().ok())
        .collect()
}

#[test]
fn text_and_csv_carry_the_same_numbers_as_latex() {
    for table in [reference_linear_t(), reference_loglog_gauss()] {
        let r = render_table(&table);
        let from_csv: Vec<String> = r
            .csv
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().to_string())
            .filter(|v| v != "--")
            .collect();
        let body: String = r.text.lines().skip(2).collect::<Vec<_>>().join("\n");
        let mut a = numbers(&body);
        let mut b = numbers(&from_csv.join(" "));
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
        for v in &from_csv {
            let bare = v
                .trim_end_matches('*')
                .trim_matches(|c| c == '(' || c == ')');
            assert!(r.latex.contains(bare), "{bare} missing from LaTeX");
        }
    }
}

#[test]
fn stars_follow_p_value_thresholds() {
    let tex = reference_loglog_gauss().to_latex();
    // -0.0320 / 0.0169: p ~ 0.058.
    assert!(tex.contains("& -0.0320 &"));
    // -0.0042 / 0.0021: p ~ 0.046.
    assert!(tex.contains("-0.0042$^{*}$"));
}

proptest! {
    #[test]
    fn monthly_split_partitions_rows(seed in 0u64..500, n in 1usize..300, spread in 1i64..200) {
        let mut data = random_rows(seed, n);
        for (i, r) in data.rows.iter_mut().enumerate() {
            r.round_start_ms += (i as i64 * 7919 % spread) * 86_400_000;
        }
        let parts = split_monthly(&data);
        prop_assert_eq!(parts.iter().map(|p| p.1.len()).sum::<usize>(), n);
        let keys: Vec<&String> = parts.iter().map(|p| &p.0).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        prop_assert_eq!(&keys, &sorted);
        for (k, part) in &parts {
            prop_assert!(part.rows.iter().all(|r| &month_key(r.round_start_ms) == k));
        }
    }

    #[test]
    fn regime_split_partitions_rows(seed in 0u64..500, n in 1usize..300) {
        let data = random_rows(seed, n);
        let s = split_regime(&data);
        prop_assert_eq!(s.low.len() + s.high.len(), n);
        prop_assert!(s.low.rows.iter().all(|r| r.x1 <= s.threshold));
        prop_assert!(s.high.rows.iter().all(|r| r.x1 > s.threshold));
        prop_assert!(s.low.len() >= n / 2);
    }

    #[test]
    fn regime_membership_survives_monotone_transforms(seed in 0u64..500, n in 2usize..300) {
        let data = random_rows(seed, n);
        let before = split_regime(&data);
        let mut moved = data.clone();
        for r in &mut moved.rows {
            r.x1 = r.x1.ln() * 3.0 + 1.0;
        }
        let after = split_regime(&moved);
        let ids = |d: &ela_core::RoundDataset| d.rows.iter().map(|r| r.round_id).collect::<Vec<_>>();
        prop_assert_eq!(ids(&before.low), ids(&after.low));
        let t = regime_threshold(&moved).unwrap();
        prop_assert_eq!(ids(&split_regime_at(&moved, t).high), ids(&before.high));
    }
}

#[test]
fn pipeline_outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sa = run_pipeline(&small_pipeline(a.path(), 400)).unwrap();
    let sb = run_pipeline(&small_pipeline(b.path(), 400)).unwrap();
    assert_eq!(sa.exit_code(), sb.exit_code());
    let (ta, tb) = (read_tree(a.path()), read_tree(b.path()));
    assert!(ta.contains_key("reports/table_linear_t.tex"));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (k, v) in &ta {
        assert!(v == &tb[k], "{k} differs");
    }
}

#[test]
fn unknown_bidder_gets_an_empty_panel() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_pipeline(dir.path(), 300);
    cfg.bidders = vec!["0xdeadbeef".into()];
    cfg.forms = vec![ela_core::Form::Linear];
    cfg.families = vec![ela_core::ErrorFamily::Gaussian];
    let summary = run_pipeline(&cfg).unwrap();
    assert_eq!(summary.exit_code(), 0);
    assert!(summary.failures.is_empty());
    let panel = &summary.tables[0].panels[0];
    assert!(panel.reduced.is_none() && panel.full.is_none());
    let tex = std::fs::read_to_string(dir.path().join("reports/table_linear_gauss.tex")).unwrap();
    assert!(tex.contains("Bidder 0xdead"));
}

#[test]
fn reduced_simulation_pipeline_recovers_signs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_pipeline(dir.path(), 1000);
    cfg.mode = InputMode::SimulateReduced;
    cfg.forms = vec![ela_core::Form::Linear];
    cfg.families = vec![ela_core::ErrorFamily::StudentT];
    cfg.monthly = false;
    let summary = run_pipeline(&cfg).unwrap();
    assert_eq!(summary.exit_code(), 0, "{:?}", summary.failures);
    for panel in &summary.tables[0].panels {
        let full = panel.full.as_ref().unwrap();
        assert!(full.get("theta1").unwrap().0 > 0.0);
        assert!(full.get("theta2").unwrap().0 < 0.0);
    }
    assert!(dir.path().join("input/truth.csv").exists());
    assert!(dir.path().join("reports/subsamples_linear_t.tex").exists());
}

/// One row per minute from 2025-05-01T00:00Z, stopping one minute short of November.
fn may_to_october() -> ela_core::RoundDataset {
    let start = 1_746_057_600_000i64;
    let rows = (0..FULL_SAMPLE_N)
        .map(|i| ela_core::DatasetRow {
            round_id: i as u64,
            bidder: "0x8c6f".into(),
            bid_scaled: 1.0,
            censored: true,
            // Distinct values in scrambled order.
            x1: ((i * 7919) % FULL_SAMPLE_N) as f64 + 1.0,
            x2: 1.0,
            p_start: 3000.0,
            round_start_ms: start + i as i64 * 60_000,
        })
        .collect();
    ela_core::RoundDataset::new(rows)
}

#[test]
fn six_month_fixture_splits_into_reference_counts() {
    let data = may_to_october();
    let counts: Vec<(String, usize)> = split_monthly(&data)
        .into_iter()
        .map(|(k, d)| (k, d.len()))
        .collect();
    let expected = [
        ("2025-05", 44640),
        ("2025-06", 43200),
        ("2025-07", 44640),
        ("2025-08", 44640),
        ("2025-09", 43200),
        ("2025-10", 44639),
    ];
    assert_eq!(counts.len(), 6);
    for ((k, n), (ek, en)) in counts.iter().zip(expected) {
        assert_eq!((k.as_str(), *n), (ek, en));
    }
    let s = split_regime(&data);
    assert_eq!((s.low.len(), s.high.len()), (132_480, 132_479));
}

#[test]
fn location_sign_holds_in_every_large_subsample() {
    let out = ela_core::auction::simulate_rounds(&ela_core::auction::SimConfig {
        n_rounds: 24_000,
        seed: 77,
        ..Default::default()
    })
    .unwrap();
    let first = out.dataset.bidders()[0].clone();
    let data = out.dataset.for_bidder(&first);
    let t = regime_threshold(&out.dataset).unwrap();
    let split = split_regime_at(&data, t);
    let spec = ela_core::TobitSpec::new(
        ela_core::Form::Linear,
        ela_core::ErrorFamily::StudentT,
        ela_core::Regressors::Full,
    );
    let mut parts: Vec<(String, ela_core::RoundDataset)> = split_monthly(&data);
    parts.push(("high".into(), split.high));
    parts.push(("low".into(), split.low));
    let mut checked = 0;
    for (name, part) in parts.iter().filter(|p| p.1.len() >= 10_000) {
        let fit = ela_core::mle::fit_tobit(part, &spec, &ela_core::FitOptions::default()).unwrap();
        assert!(fit.params.theta[2] < 0.0, "{name}: {:?}", fit.params);
        checked += 1;
    }
    assert!(checked >= 3);
}
