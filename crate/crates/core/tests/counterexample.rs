use ncclab::counterexample::{
    assemble_and_probe, oscillations, run_decoupled_growth, run_dirac_sample, run_separated_growth, sample_chain,
    sample_potential, separated_lower_bound, weak_type_failure_table, AssemblySchedule, ProbeReport, SampleOptions,
};
use ncclab::dirac::transition_tol;
use ncclab::krein::limits_ab_tol;
use ncclab::potential::build_decoupled_family;
use ncclab::{PotentialSpec, C64};

const WINDOW: (f64, f64) = (0.5, 1.0);

fn base() -> PotentialSpec {
    PotentialSpec::standard_bump()
}

#[test]
fn decoupled_growth_increases_with_nu() {
    let r = run_decoupled_growth(&base(), &[4, 8, 16, 32], WINDOW).unwrap();
    let values: Vec<f64> = r.measurements.iter().map(|m| m.value).collect();
    assert!(values.windows(2).all(|w| w[1] > w[0]), "{values:?}");
    assert!(r.fitted["alpha"] > 0.0);
    assert!(r.budgets["route_difference"] < 1e-3);
    assert!(run_decoupled_growth(&base(), &[8, 4], WINDOW).is_err());
}

#[test]
fn single_separated_piece_is_the_bump() {
    let fam = build_decoupled_family(&base(), 1).unwrap();
    for xi in [0.5, 0.8] {
        let (l, arg) = separated_lower_bound(&fam, 10.0, xi, 1e-11).unwrap();
        assert_eq!(l, 1);
        let direct = limits_ab_tol(&base(), C64::new(xi, 1.0), 1e-11).unwrap().a_frak;
        assert!((arg - direct.arg()).abs() < 1e-8, "{arg} vs {}", direct.arg());
    }
}

#[test]
fn separated_growth_reports_consistent_budgets() {
    let r = run_separated_growth(&base(), 4, 16.0, WINDOW, 3).unwrap();
    assert_eq!(r.measurements.len(), 3);
    assert!(r.budgets["group_vs_direct"] < 1e-8);
    assert!(r.fitted["c1"].is_finite());
    assert!(r.measurements.iter().all(|m| m.index >= 1 && m.index <= 4));
}

#[test]
fn zero_delta_sample_is_flat() {
    let r = run_dirac_sample(&base(), 8, 0.0, WINDOW, &SampleOptions::default()).unwrap();
    assert_eq!(r.measurements.len(), 4);
    assert!(r.measurements.iter().all(|m| m.value == 0.0));
}

#[test]
fn glued_chain_matches_direct_integration() {
    let opts = SampleOptions { template_scale: 4.0, ..SampleOptions::default() };
    let (nu, m, delta) = (4, 3, 0.6);
    let q = sample_potential(&base(), nu, m, delta, &opts).unwrap();
    let is = [8, 11, 16];
    let chains = sample_chain(&base(), nu, m, delta, &is, &opts).unwrap();
    for (i, chain) in is.iter().zip(&chains) {
        let (a, b) = chain[m];
        let t = transition_tol(&q, *i as f64 / 16.0, 1e-11).unwrap();
        assert!((a - t.a).norm() < 1e-9 && (b - t.b).norm() < 1e-9, "i = {i}");
    }
}

/// `max_ξ |Arg a(ξ, Q_{ν,m})|` on the lattice from independent chain
/// evaluations; the args stay well inside `(-π, π)`.
fn lattice_args(nu: usize, delta: f64, opts: &SampleOptions) -> Vec<Vec<f64>> {
    let den = 4 * nu as i64;
    let is: Vec<i64> = (den / 2..=den).collect();
    let chains = sample_chain(&base(), nu, nu - 1, delta, &is, opts).unwrap();
    chains.iter().map(|c| c.iter().map(|(a, _)| a.arg()).collect()).collect()
}

#[test]
fn sample_and_single_assembly_agree_with_lattice_oracle() {
    let opts = SampleOptions::default();
    let (nu, delta) = (8, 0.5);
    let args = lattice_args(nu, delta, &opts);

    let r = run_dirac_sample(&base(), nu, delta, WINDOW, &opts).unwrap();
    for meas in &r.measurements {
        let oracle = args.iter().map(|row| row[meas.index].abs()).fold(0.0, f64::max);
        assert!((meas.value - oracle).abs() < 1e-8, "m = {}: {} vs {oracle}", meas.index, meas.value);
    }
    assert!(r.diagnostics.values().all(|v| v.is_finite()));

    let schedule = AssemblySchedule { samples: vec![(nu, delta)], ..AssemblySchedule::default() };
    let a = assemble_and_probe(&base(), &schedule, WINDOW, 0.05, &opts).unwrap();
    let osc = args.iter().map(|row| row.iter().map(|v| (v - row[0]).abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
    assert_eq!(oscillations(&a).len(), 1);
    assert!((oscillations(&a)[0] - osc).abs() < 1e-8);
}

#[test]
fn report_round_trips() {
    let r = run_decoupled_growth(&base(), &[4, 8], WINDOW).unwrap();
    let back: ProbeReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
    let mut buf = Vec::new();
    r.write_summary_csv(&mut buf).unwrap();
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    let rows: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>().unwrap();
    assert_eq!(rows.len(), r.measurements.len());
    let headers = rdr.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "value").unwrap();
    for (row, m) in rows.iter().zip(&r.measurements) {
        assert_eq!(row[col].parse::<f64>().unwrap(), m.value);
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let opts = SampleOptions::default();
    assert!(run_dirac_sample(&base(), 8, 0.5, (0.2, 1.0), &opts).is_err());
    assert!(run_dirac_sample(&base(), 8, 0.5, (0.9, 0.6), &opts).is_err());
    assert!(run_dirac_sample(&base(), 1, 0.5, WINDOW, &opts).is_err());
    assert!(run_dirac_sample(&base(), 8, 1.0, WINDOW, &opts).is_err());
    assert!(run_decoupled_growth(&base(), &[4, 8], (0.5, 1.5)).is_err());
    assert!(weak_type_failure_table(&base(), &[4, 8], 0.0, 4).is_err());
    assert!(sample_chain(&base(), 4, 4, 0.5, &[8], &opts).is_err());
}

#[test]
fn weak_type_rows_keep_the_norm_fixed() {
    let t = weak_type_failure_table(&base(), &[2, 4], 0.1, 3).unwrap();
    for row in &t.rows {
        assert!((row.l2_norm - base().l2_norm()).abs() < 1e-9);
        assert!(row.min_bound <= row.max_bound);
    }
}
