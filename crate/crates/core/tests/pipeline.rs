use qam_sdr::detectors::{ml_exhaustive, simple_rounding, sphere_decode, va_bits, va_rounding_ii, RadiusPolicy};
use qam_sdr::equivalence::{bc_to_va, check_bc_feasible, check_va_feasible, va_to_bc};
use qam_sdr::model::generate_instance;
use qam_sdr::relaxations::{objective_f, solve_relaxation};
use qam_sdr::sim::{run_simulation, verify_equivalence, DetectorKind, SimConfig, VerifyTolerances};
use qam_sdr::{ComplexInstance, Relaxation, SolveStatus, SolverOptions};

#[test]
fn file_round_trip_then_detect() {
    let ci = generate_instance(3, 3, 2, 14.0, 21).unwrap();
    let back = ComplexInstance::from_json(&ci.to_json()).unwrap();
    let inst = back.to_real();
    assert_eq!(inst.h, ci.to_real().h);
    assert_eq!(inst.y, ci.to_real().y);

    let opts = SolverOptions::default();
    let ml = ml_exhaustive(&inst).unwrap();
    assert_eq!(sphere_decode(&inst, RadiusPolicy::default()).unwrap().s_hat, ml.s_hat);
    for relax in [Relaxation::bc_default(2), Relaxation::Va { q: 2 }] {
        let (sol, point) = solve_relaxation(&inst, &relax, &opts).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.objective <= ml.objective + 1e-6 * (1.0 + ml.objective));
        assert!(simple_rounding(&point, &inst).unwrap().objective >= ml.objective);
    }
}

#[test]
fn va_and_bc_optima_map_into_each_other() {
    let inst = generate_instance(2, 2, 3, 12.0, 8).unwrap().to_real();
    let opts = SolverOptions::default();
    let (_, bc) = solve_relaxation(&inst, &Relaxation::bc_default(3), &opts).unwrap();
    let (_, va) = solve_relaxation(&inst, &Relaxation::Va { q: 3 }, &opts).unwrap();

    let lifted = bc_to_va(&bc, 3, 1e-7).unwrap();
    assert!(check_va_feasible(&lifted, 3, 1e-6).unwrap().feasible);
    let dropped = va_to_bc(&va, 3, 1e-7).unwrap();
    assert!(check_bc_feasible(&dropped, 3, 1e-6).feasible);

    let f_bc = objective_f(&inst, &bc).unwrap();
    let f_va = objective_f(&inst, &va).unwrap();
    let f_lift = objective_f(&inst, &lifted).unwrap();
    assert!((f_bc - f_va).abs() <= 1e-5 * (1.0 + f_bc.abs()));
    assert!((f_bc - f_lift).abs() <= 1e-6 * (1.0 + f_bc.abs()));

    let bits = va_bits(&va).unwrap();
    assert_eq!(
        va_rounding_ii(bits, &inst).unwrap().s_hat,
        simple_rounding(&va, &inst).unwrap().s_hat
    );
}

#[test]
fn verify_report_for_each_alphabet() {
    let opts = SolverOptions::default();
    for (q, pi_available) in [(2, true), (3, true), (4, false)] {
        let inst = generate_instance(2, 2, q, 15.0, 40 + q as u64).unwrap().to_real();
        let rep = verify_equivalence(&inst, q as u64, &opts, &VerifyTolerances::default());
        assert!(rep.all_ok(), "q = {q}: {rep:?}");
        assert_eq!(rep.relaxations[1].available, pi_available);
        assert!(rep.max_gap() <= 1e-5);
    }
}

#[test]
fn small_sweep_orders_ml_first() {
    let cfg = SimConfig::from_toml(
        "m_tilde = 2\nn_tilde = 2\nq = 2\nsnr_db_grid = [6.0, 14.0]\ntrials_per_snr = 40\n\
         detectors = [\"zf\", \"bc\", \"ml\", \"sphere\"]\nseed = 12\n",
    )
    .unwrap();
    let report = run_simulation(&cfg).unwrap();
    assert_eq!(report.records.len(), 8);
    for snr in 0..2 {
        let ml = report.record(snr, DetectorKind::Ml).unwrap();
        let sd = report.record(snr, DetectorKind::Sphere).unwrap();
        let zf = report.record(snr, DetectorKind::ZeroForcing).unwrap();
        assert_eq!(ml.symbol_errors, sd.symbol_errors);
        assert!(zf.trials == ml.trials && zf.failures == 0);
    }
    let low = report.record(0, DetectorKind::Bc).unwrap();
    let high = report.record(1, DetectorKind::Bc).unwrap();
    assert!(high.symbol_errors <= low.symbol_errors);
}
