//! Phase-averaged runs on the full-size supercritical and subcritical setups.

use std::sync::OnceLock;

use amloc::arithmetic::Frequency;
use amloc::dynamics::TimeGrid;
use amloc::expectation::{
    edl_check, expected_center_masses, expected_overlap_sums, gamma_hat, sample_phases, AmoFamily, ExpectationRecord,
    OverlapExpectation, PhasePlan, PlantedFamily,
};
use amloc::localization::{decay_fit_with_floor, SQUARED_LOG_FLOOR};
use amloc::operator::Window;

fn family(lambda: f64) -> AmoFamily {
    AmoFamily::new(lambda, Frequency::golden(), Window::symmetric(200).unwrap()).unwrap()
}

fn plan() -> PhasePlan {
    PhasePlan::jittered(200, 0).unwrap()
}

fn center_masses() -> &'static [ExpectationRecord] {
    static CELL: OnceLock<Vec<ExpectationRecord>> = OnceLock::new();
    CELL.get_or_init(|| {
        let pairs: Vec<(i64, i64)> = (0..=60).map(|l| (0, l)).collect();
        expected_center_masses(&family(2.0), &plan(), &pairs).unwrap()
    })
}

fn overlap_sums() -> &'static [OverlapExpectation] {
    static CELL: OnceLock<Vec<OverlapExpectation>> = OnceLock::new();
    CELL.get_or_init(|| {
        let pairs = [(0, 0), (-20, 20), (-50, -10), (5, 45), (3, 3), (-7, 11)];
        expected_overlap_sums(&family(2.0), &plan(), &pairs).unwrap()
    })
}

#[test]
fn center_mass_curve_decays() {
    let records = center_masses();
    assert!(records[0].mean <= 1.0 + 1e-12);
    for l in 0..=40 {
        assert!(records[l + 10].mean < records[l].mean, "l = {l}");
    }
    let points: Vec<(u64, f64)> = records.iter().enumerate().map(|(l, r)| (l as u64, r.mean)).collect();
    let fit = decay_fit_with_floor(&points, 0, 60, SQUARED_LOG_FLOOR).unwrap();
    assert!(fit.gamma_hat > 0.3 && fit.r_squared >= 0.9, "{fit:?}");
}

#[test]
fn averaged_overlap_chain() {
    for e in overlap_sums() {
        assert!(e.chain_holds(), "{e:?}");
        assert!(e.chain_holds_within(3.0));
        if e.record.first == e.record.second {
            assert!((e.record.mean - 1.0).abs() < 1e-10);
        }
    }
    let far = overlap_sums().iter().find(|e| e.record.first == -50).unwrap();
    assert!(far.record.mean < 1e-8, "{:?}", far.record);
}

#[test]
fn single_phase_average_is_the_pointwise_value() {
    let fam = family(2.0);
    let plan = PhasePlan::jittered(1, 4).unwrap();
    let theta = sample_phases(&plan)[0];
    let avg = expected_overlap_sums(&fam, &plan, &[(0, 12)]).unwrap()[0].record;
    let eig = amloc::expectation::PhaseFamily::eigensystem(&fam, theta).unwrap();
    let direct = amloc::localization::overlap_sum(&eig, 0, 12).unwrap();
    assert_eq!(avg.mean, direct);
    assert_eq!(avg.std_error, 0.0);
}

#[test]
fn supercritical_gamma_is_positive() {
    let k_list: Vec<u64> = (10..=60).step_by(5).collect();
    let fit = gamma_hat(&family(2.0), &plan(), &k_list).unwrap().fit;
    assert!(fit.gamma_hat > 0.3 && fit.r_squared >= 0.9, "{fit:?}");
}

#[test]
fn subcritical_gamma_collapses() {
    let k_list: Vec<u64> = (10..=60).step_by(5).collect();
    let fit = gamma_hat(&family(0.5), &plan(), &k_list).unwrap().fit;
    assert!(fit.gamma_hat < 0.05 || fit.r_squared < 0.5, "{fit:?}");
}

#[test]
fn planted_family_recovers_its_rate() {
    let k_list: Vec<u64> = (10..=60).step_by(5).collect();
    let fam = PlantedFamily::new(0.7, Window::symmetric(200).unwrap()).unwrap();
    let fit = gamma_hat(&fam, &PhasePlan::jittered(8, 0).unwrap(), &k_list).unwrap().fit;
    assert!((fit.gamma_hat - 0.7).abs() <= 0.02, "{fit:?}");
}

fn edl_pairs() -> Vec<(i64, i64)> {
    [0u64, 5, 10, 15, 20, 25, 30, 35, 40].iter().flat_map(|&d| [(-20, -20 + d as i64), (10 - d as i64, 10)]).collect()
}

#[test]
fn dynamical_bound_decays_when_supercritical() {
    let fam = AmoFamily::new(2.0, Frequency::golden(), Window::symmetric(100).unwrap()).unwrap();
    let grid = TimeGrid::new(100.0, 100).unwrap();
    let report = edl_check(&fam, &PhasePlan::jittered(40, 1).unwrap(), &edl_pairs(), &grid).unwrap();
    assert!(report.certificate_holds && report.gamma_positive);
    let fitted = |d: f64| report.fit.log_prefactor - report.fit.gamma_hat * d;
    assert!(fitted(40.0) < fitted(10.0));
    for row in report.rows.iter().filter(|r| r.distance == 0) {
        assert!(row.certified.mean >= 1.0 - 1e-10);
    }
}

#[test]
fn dynamical_bound_fit_collapses_when_subcritical() {
    let fam = AmoFamily::new(0.5, Frequency::golden(), Window::symmetric(100).unwrap()).unwrap();
    let grid = TimeGrid::new(100.0, 100).unwrap();
    let pairs: Vec<(i64, i64)> = edl_pairs().into_iter().filter(|&(k, l)| k != l).collect();
    let report = edl_check(&fam, &PhasePlan::jittered(40, 1).unwrap(), &pairs, &grid).unwrap();
    assert!(report.certificate_holds);
    assert!(report.fit.r_squared < 0.5, "{:?}", report.fit);
}
