use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{GammaConfig, ResonancesConfig, RunConfig, SpectrumConfig, VerifyConfig};
use super::output::{ensure_dir, num, CsvTable, OutputSet};
use super::CliError;
use crate::arithmetic::resonances;
use crate::dynamics::{evolve, norm};
use crate::eigensolve::{eigh_tridiagonal, residual_report};
use crate::expectation::{
    chain_sum_bound, chain_sum_closed_form, gamma_hat, lattice_chain_sum, FamilyDescriptor, PhaseFamily, PlantedFamily,
};
use crate::localization::{center_mass_profile, overlap_chain_pointwise, CHAIN_SLACK};
use crate::operator::TridiagonalOperator;

/// What a successful command reports.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub message: String,
    pub files: Vec<String>,
}

/// Runs a validated configuration and writes its outputs.
pub fn execute(config: &RunConfig) -> Result<Outcome, CliError> {
    ensure_dir(config.out())?;
    let start = Instant::now();
    let mut timings = BTreeMap::new();
    let (outputs, message, failures) = match config {
        RunConfig::Spectrum(c) => spectrum(c)?,
        RunConfig::Gamma(c) => gamma(c)?,
        RunConfig::Resonances(c) => resonance_table(c)?,
        RunConfig::Verify(c) => verify(c)?,
    };
    timings.insert("total".to_string(), start.elapsed().as_secs_f64() * 1e3);
    let files = outputs.write_all(config.out(), config, timings)?;
    if !failures.is_empty() {
        return Err(CliError::Invariant(failures));
    }
    Ok(Outcome { message, files })
}

type CommandResult = Result<(OutputSet, String, Vec<String>), CliError>;

fn spectrum(c: &SpectrumConfig) -> CommandResult {
    let spec = c.operator.spec()?;
    let h = TridiagonalOperator::build(&spec)?;
    let eig = eigh_tridiagonal(&h)?;
    let mut out = OutputSet::default();

    let mut table = CsvTable::new("eigenvalues", &["index", "energy"]);
    for (s, e) in eig.values().iter().enumerate() {
        table.row(&[s.to_string(), num(*e)]);
    }
    out.add_csv(table);

    if c.dump_eig {
        let header: Vec<String> =
            std::iter::once("site".to_string()).chain((0..eig.dimension()).map(|s| format!("phi_{s}"))).collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut vectors = CsvTable::new("eigenvectors", &header);
        let window = eig.window();
        for i in 0..eig.dimension() {
            let mut row = vec![window.site_of(i).to_string()];
            row.extend((0..eig.dimension()).map(|s| num(eig.component(s, i))));
            vectors.row(&row);
        }
        out.add_csv(vectors);
    }
    let message =
        format!("{} eigenvalues in [{}, {}]", eig.dimension(), eig.values()[0], eig.values()[eig.dimension() - 1]);
    Ok((out, message, Vec::new()))
}

#[derive(Debug, Serialize)]
struct GammaSummary {
    family: FamilyDescriptor,
    gamma_hat: f64,
    log_prefactor: f64,
    r_squared: f64,
    pointwise_min_rate: f64,
    k_min: u64,
    k_max: u64,
    floored_points: usize,
    exponential_decay_detected: bool,
    poor_fit: bool,
}

fn gamma(c: &GammaConfig) -> CommandResult {
    let plan = c.phases.plan()?;
    let window = c.operator.window()?;
    let family: Box<dyn PhaseFamily> = match c.synthetic_rate {
        Some(rate) => Box::new(PlantedFamily::new(rate, window)?),
        None => Box::new(c.operator.family()?),
    };
    let estimate = gamma_hat(family.as_ref(), &plan, &c.k_list)?;

    let mut out = OutputSet::default();
    let mut table = CsvTable::new("gamma_table", &["k", "mean", "std_error"]);
    for (k, r) in c.k_list.iter().zip(&estimate.records) {
        table.row(&[k.to_string(), num(r.mean), num(r.std_error)]);
    }
    out.add_csv(table);

    let fit = estimate.fit;
    let detected = fit.gamma_hat >= 0.05 && fit.r_squared >= 0.5;
    let summary = GammaSummary {
        family: family.descriptor(),
        gamma_hat: fit.gamma_hat,
        log_prefactor: fit.log_prefactor,
        r_squared: fit.r_squared,
        pointwise_min_rate: fit.pointwise_min_rate,
        k_min: fit.k_range.0,
        k_max: fit.k_range.1,
        floored_points: fit.floored,
        exponential_decay_detected: detected,
        poor_fit: fit.r_squared < 0.9 || !detected,
    };
    out.add_json("gamma_summary.json", &summary)?;
    let message = format!(
        "gamma_hat = {:.6}, r^2 = {:.4}, pointwise min rate = {:.6}",
        fit.gamma_hat, fit.r_squared, fit.pointwise_min_rate
    );
    Ok((out, message, Vec::new()))
}

fn resonance_table(c: &ResonancesConfig) -> CommandResult {
    let alpha = crate::arithmetic::Frequency::parse(&c.alpha)?;
    let report = resonances(c.theta, &alpha, c.eta, c.horizon)?;
    let mut out = OutputSet::default();

    let mut table = CsvTable::new("resonances", &["k", "distance", "threshold"]);
    for &k in &report.resonant_k {
        let d = crate::arithmetic::resonance_distance(report.theta, &alpha, k);
        let threshold = (-c.eta * k.unsigned_abs() as f64).exp();
        table.row(&[k.to_string(), num(d), num(threshold)]);
    }
    out.add_csv(table);

    let mut windows = CsvTable::new("windows", &["lo", "hi", "horizon_limited"]);
    for w in report.windows(c.c0)? {
        windows.row(&[num(w.lo), num(w.hi), w.horizon_limited.to_string()]);
    }
    out.add_csv(windows);
    let message = format!("{} resonant k with |k| <= {}", report.resonant_k.len(), c.horizon);
    Ok((out, message, Vec::new()))
}

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    worst: f64,
    tolerance: f64,
    detail: String,
}

impl Check {
    fn new(name: &'static str, worst: f64, tolerance: f64, detail: String) -> Self {
        Self { name, passed: worst <= tolerance, worst, tolerance, detail }
    }
}

#[derive(Debug, Serialize)]
struct Verdict {
    passed: bool,
    checks: Vec<Check>,
}

fn verify(c: &VerifyConfig) -> CommandResult {
    let spec = c.operator.spec()?;
    let h = TridiagonalOperator::build(&spec)?;
    let mut eig = eigh_tridiagonal(&h)?;
    if c.inject_fault {
        eig = eig.with_perturbed_vector(0, 1e-6);
    }
    let n = eig.dimension();
    let norm_tol = 1e-10 * spec.norm_bound();
    let mut checks = Vec::new();

    let res = residual_report(&h, &eig)?;
    checks.push(Check::new("eigen_residual", res.max_residual, norm_tol, "max_s |H phi_s - E_s phi_s|".into()));
    checks.push(Check::new(
        "orthogonality",
        res.max_orthogonality_defect,
        norm_tol,
        "max_st |<phi_s, phi_t> - delta_st|".into(),
    ));

    let profile = center_mass_profile(&eig);
    let window = eig.window();
    let mut completeness = 0.0f64;
    let mut regrouped = 0.0f64;
    for site in window.sites() {
        let i = window.index_of(site)?;
        let row: f64 = (0..n).map(|s| eig.component(s, i).powi(2)).sum();
        completeness = completeness.max((row - 1.0).abs());
        let by_center: f64 = profile.masses_at(site)?.iter().sum();
        regrouped = regrouped.max((by_center - 1.0).abs());
    }
    checks.push(Check::new("completeness", completeness, 1e-10, "max_l |sum_s phi_s(l)^2 - 1|".into()));
    checks.push(Check::new("completeness_by_center", regrouped, 1e-10, "max_l |sum_n S_n(l) - 1|".into()));

    let trace: f64 = eig.values().iter().sum();
    let diag: f64 = h.diagonal().iter().sum();
    checks.push(Check::new(
        "trace",
        (trace - diag).abs() / diag.abs().max(1.0),
        1e-9,
        "relative |sum E_s - tr H|".into(),
    ));

    let grid = c.grid()?;
    let mut chain_excess = 0.0f64;
    let mut cs_excess = 0.0f64;
    let mut chain_errors = Vec::new();
    for &(k, l) in &c.pairs {
        match overlap_chain_pointwise(&eig, &profile, k, l, &grid) {
            Ok(r) => chain_excess = chain_excess.max(r.lhs_sup - r.middle).max(r.middle - r.rhs),
            Err(e) => {
                chain_excess = f64::INFINITY;
                chain_errors.push(e.to_string());
            }
        }
        let (ik, il) = (window.index_of(k)?, window.index_of(l)?);
        let mut per_center: BTreeMap<i64, f64> = BTreeMap::new();
        for s in 0..n {
            *per_center.entry(profile.center_of(s)).or_default() += (eig.component(s, ik) * eig.component(s, il)).abs();
        }
        for (center, sum) in per_center {
            let bound = (profile.mass(center, k)? * profile.mass(center, l)?).sqrt();
            cs_excess = cs_excess.max(sum - bound);
        }
    }
    let detail = if chain_errors.is_empty() {
        format!("{} pairs, {} time points", c.pairs.len(), grid.count)
    } else {
        chain_errors.join("; ")
    };
    checks.push(Check::new("overlap_chain", chain_excess, CHAIN_SLACK, detail));
    checks.push(Check::new("cauchy_schwarz_by_center", cs_excess, 1e-12, "per-center grouping".into()));

    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut psi: Vec<Complex64> =
        (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    let psi_norm = norm(&psi);
    psi.iter_mut().for_each(|z| *z /= psi_norm);
    let mut unitarity = 0.0f64;
    for t in grid.times() {
        unitarity = unitarity.max((norm(&evolve(&eig, &psi, t)?) - 1.0).abs());
    }
    checks.push(Check::new("unitarity", unitarity, 1e-10, "max_t | |psi(t)| - 1 |".into()));

    let mut bound_excess = f64::NEG_INFINITY;
    let mut closed_form_gap = 0.0f64;
    for &g in &c.summation_gammas {
        for m in 0..=c.summation_max_distance {
            let brute = lattice_chain_sum(g, &[m as i64], 1e-12)?;
            bound_excess = bound_excess.max(brute - chain_sum_bound(1.0, g, 1, m)?);
            closed_form_gap = closed_form_gap.max((brute - chain_sum_closed_form(g, m)).abs());
        }
    }
    checks.push(Check::new(
        "summation_bound",
        bound_excess.max(0.0),
        1e-12,
        "brute-force chain sum minus ((1+g)/g + m) e^{-gm}".into(),
    ));
    checks.push(Check::new("summation_closed_form", closed_form_gap, 1e-11, "|brute - closed form|".into()));

    let failures: Vec<String> =
        checks.iter().filter(|c| !c.passed).map(|c| format!("{}: {} > {}", c.name, c.worst, c.tolerance)).collect();
    let verdict = Verdict { passed: failures.is_empty(), checks };
    let mut out = OutputSet::default();
    out.add_json("verify.json", &verdict)?;
    let message = if failures.is_empty() {
        format!("all {} checks passed", verdict.checks.len())
    } else {
        format!("{} checks failed", failures.len())
    };
    Ok((out, message, failures))
}
