//! Monte-Carlo sweeps and the reports behind the command-line tool.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detectors::{
    gaussian_randomized_rounding, ml_exhaustive, simple_rounding, sphere_decode, symbol_error_count,
    va_bits, va_rounding_i, va_rounding_ii, zf_detect, Decision, DetectError, RadiusPolicy, ML_CAP,
};
use crate::equivalence::{
    bc_to_pi16, bc_to_pi64, bc_to_va, check_bc_feasible, check_pi_feasible, check_va_feasible,
    pi_to_bc, va_to_bc, EquivError, FeasibilityReport, PiForm, RootAnalysis,
};
use crate::model::{bits_to_symbols, generate_instance, Constellation, Instance, ModelError};
use crate::relaxations::{objective_f, solve_relaxation, Relaxation, RootSet, SdrPoint};
use crate::sdp::{ConeSolution, SolverOptions};

/// Fixed CSV header of [`SimReport::to_csv`].
pub const CSV_HEADER: &str =
    "snr_db,detector,trials,symbol_errors,vector_errors,ser,vec_err_rate,mean_iters,mean_relax_value";

/// Distance to a decision boundary below which a relaxed component counts
/// as a tie.
pub const TIE_MARGIN: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("configuration parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A detector: a relaxation plus a rounding rule, or a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    Bc,
    BcRandomized,
    Pi,
    PiRandomized,
    VaRoundingI,
    VaRoundingII,
    VaRandomized,
    ZeroForcing,
    Ml,
    Sphere,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 10] = [
        DetectorKind::Bc,
        DetectorKind::BcRandomized,
        DetectorKind::Pi,
        DetectorKind::PiRandomized,
        DetectorKind::VaRoundingI,
        DetectorKind::VaRoundingII,
        DetectorKind::VaRandomized,
        DetectorKind::ZeroForcing,
        DetectorKind::Ml,
        DetectorKind::Sphere,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DetectorKind::Bc => "bc",
            DetectorKind::BcRandomized => "bc-rand",
            DetectorKind::Pi => "pi",
            DetectorKind::PiRandomized => "pi-rand",
            DetectorKind::VaRoundingI => "va-i",
            DetectorKind::VaRoundingII => "va-ii",
            DetectorKind::VaRandomized => "va-rand",
            DetectorKind::ZeroForcing => "zf",
            DetectorKind::Ml => "ml",
            DetectorKind::Sphere => "sphere",
        }
    }

    pub fn family(self) -> Option<Family> {
        match self {
            DetectorKind::Bc | DetectorKind::BcRandomized => Some(Family::Bc),
            DetectorKind::Pi | DetectorKind::PiRandomized => Some(Family::Pi),
            DetectorKind::VaRoundingI | DetectorKind::VaRoundingII | DetectorKind::VaRandomized => {
                Some(Family::Va)
            }
            _ => None,
        }
    }
}

impl FromStr for DetectorKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let kind = match s.trim().to_ascii_lowercase().as_str() {
            "pi16" | "pi64" => DetectorKind::Pi,
            "va" => DetectorKind::VaRoundingII,
            "sd" => DetectorKind::Sphere,
            other => *Self::ALL
                .iter()
                .find(|k| k.label() == other)
                .ok_or_else(|| SimError::Config(format!("unknown detector '{s}'")))?,
        };
        Ok(kind)
    }
}

/// The three relaxations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Bc,
    Pi,
    Va,
}

impl Family {
    /// The relaxation used for order `q`, or `None` when it is not defined.
    pub fn relaxation(self, q: u32) -> Option<Relaxation> {
        match (self, q) {
            (Family::Bc, _) => Some(Relaxation::bc_default(q)),
            (Family::Pi, 2) => Some(Relaxation::Pi16),
            (Family::Pi, 3) => Some(Relaxation::Pi64(RootSet::canonical())),
            (Family::Pi, _) => None,
            (Family::Va, _) => Some(Relaxation::Va { q }),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Family::Bc => "bc",
            Family::Pi => "pi",
            Family::Va => "va",
        }
    }
}

fn default_gap_tol() -> f64 {
    SolverOptions::default().gap_tol
}

fn default_feas_tol() -> f64 {
    SolverOptions::default().feas_tol
}

fn default_randomizations() -> usize {
    100
}

/// Monte-Carlo sweep settings, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub m_tilde: usize,
    pub n_tilde: usize,
    pub q: u32,
    /// SNR points in dB; `inf` disables noise.
    pub snr_db_grid: Vec<f64>,
    pub trials_per_snr: usize,
    pub detectors: Vec<String>,
    pub seed: u64,
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
    #[serde(default = "default_feas_tol")]
    pub feas_tol: f64,
    #[serde(default = "default_randomizations")]
    pub randomizations: usize,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            gap_tol: self.gap_tol,
            feas_tol: self.feas_tol,
            ..SolverOptions::default()
        }
    }

    /// Checks the invariants and resolves the detector labels.
    pub fn validate(&self) -> Result<Vec<DetectorKind>, SimError> {
        let err = |m: String| Err(SimError::Config(m));
        Constellation::new(self.q)?;
        if self.m_tilde == 0 || self.n_tilde == 0 {
            return err("system dimensions must be positive".into());
        }
        if self.m_tilde < self.n_tilde {
            return err("m_tilde must be at least n_tilde".into());
        }
        if self.trials_per_snr == 0 {
            return err("trials_per_snr must be at least 1".into());
        }
        if self.snr_db_grid.is_empty() {
            return err("snr_db_grid is empty".into());
        }
        if self.snr_db_grid.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return err("snr_db_grid entries must be finite or +inf".into());
        }
        if self.detectors.is_empty() {
            return err("detector list is empty".into());
        }
        if !(self.gap_tol > 0.0 && self.feas_tol > 0.0) {
            return err("solver tolerances must be positive".into());
        }
        let mut kinds = Vec::new();
        for label in &self.detectors {
            let k: DetectorKind = label.parse()?;
            if kinds.contains(&k) {
                return err(format!("detector '{label}' listed twice"));
            }
            if let Some(f) = k.family() {
                if f.relaxation(self.q).is_none() {
                    return err(format!("the PI relaxation is not available for q = {}", self.q));
                }
            }
            if k == DetectorKind::Pi || k == DetectorKind::PiRandomized {
                if label.eq_ignore_ascii_case("pi16") && self.q != 2 {
                    return err("pi16 requires q = 2".into());
                }
                if label.eq_ignore_ascii_case("pi64") && self.q != 3 {
                    return err("pi64 requires q = 3".into());
                }
            }
            if k == DetectorKind::Ml {
                let size = (1u64 << self.q).checked_pow(2 * self.n_tilde as u32);
                if size.is_none_or(|s| s > ML_CAP) {
                    return err("exhaustive ML exceeds the enumeration cap".into());
                }
            }
            kinds.push(k);
        }
        Ok(kinds)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-trial seed `seed ⊕ hash(snr_index, trial_index)`.
pub fn trial_seed(seed: u64, snr_index: usize, trial_index: usize) -> u64 {
    seed ^ splitmix64(splitmix64(snr_index as u64) ^ trial_index as u64)
}

/// One row of the sweep output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRecord {
    pub snr_db: f64,
    pub detector: String,
    /// Trials in which at least one detector produced a decision.
    pub trials: usize,
    pub symbol_errors: usize,
    pub vector_errors: usize,
    /// `symbol_errors / (trials · Ñ)`.
    pub ser: f64,
    pub vec_err_rate: f64,
    /// `NaN` for detectors without a relaxation.
    pub mean_iters: f64,
    pub mean_relax_value: f64,
    /// Hard failures plus solves that ended without an optimality
    /// certificate.
    pub failures: usize,
}

/// Cross-relaxation bookkeeping for one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrSummary {
    pub snr_db: f64,
    pub trials: usize,
    pub excluded_trials: usize,
    /// Trials in which some relaxed component lies within [`TIE_MARGIN`] of
    /// a decision boundary.
    pub tie_trials: usize,
    /// Trials in which `bc`, `pi` and `va-ii` (those configured) disagree.
    pub disagreements: usize,
    pub disagreements_without_tie: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub records: Vec<SimRecord>,
    pub summaries: Vec<SnrSummary>,
}

impl SimReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.snr_db,
                r.detector,
                r.trials,
                r.symbol_errors,
                r.vector_errors,
                r.ser,
                r.vec_err_rate,
                r.mean_iters,
                r.mean_relax_value
            )
            .expect("writing to a String cannot fail");
        }
        out
    }

    pub fn record(&self, snr_index: usize, detector: DetectorKind) -> Option<&SimRecord> {
        let snr = self.summaries.get(snr_index)?.snr_db;
        self.records
            .iter()
            .find(|r| r.snr_db.to_bits() == snr.to_bits() && r.detector == detector.label())
    }
}

#[derive(Debug, Clone)]
struct DetectorOutcome {
    symbol_errors: usize,
    vector_error: usize,
    solve: Option<(usize, f64)>,
    flagged: bool,
}

#[derive(Debug, Clone)]
struct TrialOutcome {
    per_detector: Vec<Option<DetectorOutcome>>,
    tie: bool,
    disagreement: bool,
}

struct Solved {
    sol: ConeSolution,
    point: SdrPoint,
}

fn near_boundary(x: &nalgebra::DVector<f64>, q: u32) -> bool {
    let max = ((1u64 << q) - 1) as f64;
    x.iter().any(|&v| {
        let b = 2.0 * (v / 2.0).round();
        b.abs() < max && (v - b).abs() < TIE_MARGIN
    })
}

fn run_detector(
    kind: DetectorKind,
    inst: &Instance,
    solved: Option<&Solved>,
    randomizations: usize,
    seed: u64,
) -> Result<Decision, DetectError> {
    let point = || solved.map(|s| &s.point).expect("relaxation solved for this detector");
    let rseed = splitmix64(seed ^ kind as u64);
    match kind {
        DetectorKind::Bc | DetectorKind::Pi => simple_rounding(point(), inst),
        DetectorKind::BcRandomized | DetectorKind::PiRandomized | DetectorKind::VaRandomized => {
            gaussian_randomized_rounding(point(), inst, randomizations, rseed)
        }
        DetectorKind::VaRoundingI => va_rounding_i(va_bits(point())?, inst),
        DetectorKind::VaRoundingII => va_rounding_ii(va_bits(point())?, inst),
        DetectorKind::ZeroForcing => zf_detect(inst),
        DetectorKind::Ml => ml_exhaustive(inst),
        DetectorKind::Sphere => sphere_decode(inst, RadiusPolicy::ZeroForcing),
    }
}

fn run_trial(
    cfg: &SimConfig,
    kinds: &[DetectorKind],
    opts: &SolverOptions,
    snr_db: f64,
    seed: u64,
) -> Result<TrialOutcome, SimError> {
    let ci = generate_instance(cfg.m_tilde, cfg.n_tilde, cfg.q, snr_db, seed)?;
    let inst = ci.to_real();
    log::debug!("snr {snr_db} seed {seed:#018x} instance {:#018x}", ci.fingerprint());
    let q = cfg.q;

    let mut families: Vec<Family> = kinds.iter().filter_map(|k| k.family()).collect();
    families.sort();
    families.dedup();
    let solved: Vec<(Family, Option<Solved>, bool)> = families
        .iter()
        .map(|&f| {
            let relax = f.relaxation(q).expect("validated");
            match solve_relaxation(&inst, &relax, opts) {
                Ok((sol, point)) => {
                    let ok = sol.is_optimal();
                    if !ok {
                        log::warn!("{} solve ended with {:?}", f.label(), sol.status);
                    }
                    (f, Some(Solved { sol, point }), ok)
                }
                Err(e) => {
                    log::warn!("{} solve failed: {e}", f.label());
                    (f, None, false)
                }
            }
        })
        .collect();
    let lookup = |f: Family| solved.iter().find(|(g, _, _)| *g == f).expect("solved above");

    let mut decisions: Vec<(DetectorKind, nalgebra::DVector<f64>)> = Vec::new();
    let per_detector = kinds
        .iter()
        .map(|&k| {
            let entry = k.family().map(lookup);
            if let Some((_, None, _)) = entry {
                return None;
            }
            let s = entry.and_then(|(_, s, _)| s.as_ref());
            match run_detector(k, &inst, s, cfg.randomizations, seed) {
                Ok(d) => {
                    let (symbol_errors, vector_error) = symbol_error_count(&d.s_hat, &inst.s_true);
                    decisions.push((k, d.s_hat));
                    Some(DetectorOutcome {
                        symbol_errors,
                        vector_error,
                        solve: s.map(|s| (s.sol.iterations, s.sol.objective)),
                        flagged: entry.is_some_and(|(_, _, ok)| !ok),
                    })
                }
                Err(e) => {
                    log::warn!("{} failed: {e}", k.label());
                    None
                }
            }
        })
        .collect();

    let mut tie = false;
    for (f, s, _) in &solved {
        let Some(s) = s else { continue };
        tie |= near_boundary(&s.point.s_vec, q);
        if *f == Family::Va {
            if let Ok(b) = va_bits(&s.point) {
                tie |= near_boundary(&bits_to_symbols(b, inst.n(), q)?, q);
            }
        }
    }
    let compared: Vec<&nalgebra::DVector<f64>> = decisions
        .iter()
        .filter(|(k, _)| {
            matches!(k, DetectorKind::Bc | DetectorKind::Pi | DetectorKind::VaRoundingII)
        })
        .map(|(_, s)| s)
        .collect();
    let disagreement = compared.windows(2).any(|w| w[0] != w[1]);
    Ok(TrialOutcome {
        per_detector,
        tie,
        disagreement,
    })
}

/// Runs the sweep. Every detector in a trial sees the same instance; trials
/// run in parallel and are reduced in trial order.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimReport, SimError> {
    let kinds = cfg.validate()?;
    let opts = cfg.solver_options();
    let n_tilde = cfg.n_tilde;
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for (si, &snr_db) in cfg.snr_db_grid.iter().enumerate() {
        let outcomes: Vec<TrialOutcome> = (0..cfg.trials_per_snr)
            .into_par_iter()
            .map(|t| run_trial(cfg, &kinds, &opts, snr_db, trial_seed(cfg.seed, si, t)))
            .collect::<Result<_, _>>()?;
        let kept: Vec<&TrialOutcome> = outcomes
            .iter()
            .filter(|o| o.per_detector.iter().any(Option::is_some))
            .collect();
        let trials = kept.len();
        for (di, &k) in kinds.iter().enumerate() {
            let (mut se, mut ve, mut failures) = (0, 0, 0);
            let (mut iters, mut value, mut solves) = (0usize, 0.0, 0usize);
            for o in &kept {
                match &o.per_detector[di] {
                    Some(d) => {
                        se += d.symbol_errors;
                        ve += d.vector_error;
                        failures += usize::from(d.flagged);
                        if let Some((it, v)) = d.solve {
                            iters += it;
                            value += v;
                            solves += 1;
                        }
                    }
                    None => {
                        // A missing decision counts every symbol as wrong.
                        se += n_tilde;
                        ve += 1;
                        failures += 1;
                    }
                }
            }
            let denom = trials.max(1) as f64;
            let (mean_iters, mean_relax_value) = if solves > 0 {
                (iters as f64 / solves as f64, value / solves as f64)
            } else {
                (f64::NAN, f64::NAN)
            };
            records.push(SimRecord {
                snr_db,
                detector: k.label().to_string(),
                trials,
                symbol_errors: se,
                vector_errors: ve,
                ser: se as f64 / (denom * n_tilde as f64),
                vec_err_rate: ve as f64 / denom,
                mean_iters,
                mean_relax_value,
                failures,
            });
        }
        summaries.push(SnrSummary {
            snr_db,
            trials,
            excluded_trials: outcomes.len() - trials,
            tie_trials: kept.iter().filter(|o| o.tie).count(),
            disagreements: kept.iter().filter(|o| o.disagreement).count(),
            disagreements_without_tie: kept.iter().filter(|o| o.disagreement && !o.tie).count(),
        });
    }
    Ok(SimReport { records, summaries })
}

/// Tolerances for [`verify_equivalence`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyTolerances {
    /// Bound on `|a − b| / (1 + |a|)` between optimal values.
    pub gap: f64,
    /// Feasibility tolerance for the converted points, and relative bound on
    /// the change in objective across a conversion.
    pub feas: f64,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        Self { gap: 1e-5, feas: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxationResult {
    pub relaxation: String,
    pub available: bool,
    pub status: Option<String>,
    pub value: Option<f64>,
    pub iterations: Option<usize>,
    pub gap: Option<f64>,
    pub error: Option<String>,
}

impl RelaxationResult {
    /// Solved to optimality.
    pub fn ok(&self) -> bool {
        self.status.as_deref() == Some("Optimal") && self.value.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairGap {
    pub a: String,
    pub b: String,
    pub gap: f64,
    pub within_tol: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConversionResult {
    pub direction: String,
    pub available: bool,
    pub feasibility: Option<FeasibilityReport>,
    pub source_objective: Option<f64>,
    pub target_objective: Option<f64>,
    pub objective_preserved: bool,
    pub error: Option<String>,
}

impl ConversionResult {
    pub fn ok(&self) -> bool {
        !self.available
            || (self.error.is_none()
                && self.objective_preserved
                && self.feasibility.as_ref().is_some_and(|f| f.feasible))
    }
}

/// Outcome of solving every applicable relaxation on one instance and
/// running the six conversions on the optima.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub fingerprint: String,
    pub q: u32,
    pub n: usize,
    pub relaxations: Vec<RelaxationResult>,
    pub pairwise_gaps: Vec<PairGap>,
    pub conversions: Vec<ConversionResult>,
    pub tolerances: VerifyTolerances,
}

impl EquivalenceReport {
    /// Some applicable relaxation did not reach optimality.
    pub fn hard_failure(&self) -> bool {
        self.relaxations.iter().any(|r| r.available && !r.ok())
    }

    pub fn max_gap(&self) -> f64 {
        self.pairwise_gaps.iter().map(|g| g.gap).fold(0.0, f64::max)
    }

    pub fn all_ok(&self) -> bool {
        !self.hard_failure()
            && self.pairwise_gaps.iter().all(|g| g.within_tol)
            && self.conversions.iter().all(ConversionResult::ok)
    }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs())
}

fn pi_form(q: u32) -> Option<PiForm> {
    match q {
        2 => Some(PiForm::Quadratic),
        3 => Some(PiForm::Quartic(RootSet::canonical())),
        _ => None,
    }
}

fn to_pi(p: &SdrPoint, q: u32, tol: f64) -> Result<SdrPoint, EquivError> {
    match q {
        2 => bc_to_pi16(p, tol),
        _ => bc_to_pi64(p, &RootSet::canonical(), tol),
    }
}

fn check_target(point: &SdrPoint, target: Family, q: u32, tol: f64) -> Result<FeasibilityReport, EquivError> {
    match target {
        Family::Bc => Ok(check_bc_feasible(point, q, tol)),
        Family::Pi => check_pi_feasible(point, &pi_form(q).expect("PI available"), tol),
        Family::Va => check_va_feasible(point, q, tol),
    }
}

fn convert(point: &SdrPoint, from: Family, to: Family, q: u32, tol: f64) -> Result<SdrPoint, EquivError> {
    let to_bc = |p: &SdrPoint| match from {
        Family::Bc => Ok(p.clone()),
        Family::Pi => pi_to_bc(p, &pi_form(q).expect("PI available"), tol),
        Family::Va => va_to_bc(p, q, tol),
    };
    let bc = to_bc(point)?;
    match to {
        Family::Bc => Ok(bc),
        Family::Pi => to_pi(&bc, q, tol),
        Family::Va => bc_to_va(&bc, q, tol),
    }
}

/// Solves BC, PI (when defined for `q`) and VA, compares the optimal values
/// and converts each optimum into the other two feasible sets.
pub fn verify_equivalence(
    instance: &Instance,
    fingerprint: u64,
    opts: &SolverOptions,
    tol: &VerifyTolerances,
) -> EquivalenceReport {
    let q = instance.q;
    let families = [Family::Bc, Family::Pi, Family::Va];
    let mut results = Vec::new();
    let mut points: Vec<Option<SdrPoint>> = Vec::new();
    for f in families {
        let Some(relax) = f.relaxation(q) else {
            results.push(RelaxationResult {
                relaxation: f.label().into(),
                available: false,
                status: None,
                value: None,
                iterations: None,
                gap: None,
                error: Some(format!("unavailable for q = {q}")),
            });
            points.push(None);
            continue;
        };
        match solve_relaxation(instance, &relax, opts) {
            Ok((sol, point)) => {
                results.push(RelaxationResult {
                    relaxation: f.label().into(),
                    available: true,
                    status: Some(format!("{:?}", sol.status)),
                    value: Some(sol.objective),
                    iterations: Some(sol.iterations),
                    gap: Some(sol.gap),
                    error: None,
                });
                points.push(sol.is_optimal().then_some(point));
            }
            Err(e) => {
                results.push(RelaxationResult {
                    relaxation: f.label().into(),
                    available: true,
                    status: None,
                    value: None,
                    iterations: None,
                    gap: None,
                    error: Some(e.to_string()),
                });
                points.push(None);
            }
        }
    }

    let mut pairwise_gaps = Vec::new();
    for i in 0..3 {
        for j in i + 1..3 {
            if let (Some(a), Some(b)) = (results[i].value, results[j].value) {
                let gap = rel_gap(a, b);
                pairwise_gaps.push(PairGap {
                    a: results[i].relaxation.clone(),
                    b: results[j].relaxation.clone(),
                    gap,
                    within_tol: gap <= tol.gap,
                });
            }
        }
    }

    let mut conversions = Vec::new();
    for (i, &from) in families.iter().enumerate() {
        for (j, &to) in families.iter().enumerate() {
            if i == j {
                continue;
            }
            let direction = format!("{}->{}", from.label(), to.label());
            let available = results[i].available && results[j].available;
            let mut c = ConversionResult {
                direction,
                available,
                feasibility: None,
                source_objective: None,
                target_objective: None,
                objective_preserved: false,
                error: None,
            };
            if !available {
                c.error = Some("relaxation unavailable".into());
                conversions.push(c);
                continue;
            }
            let Some(src) = &points[i] else {
                c.error = Some("source relaxation has no optimal point".into());
                conversions.push(c);
                continue;
            };
            let outcome = convert(src, from, to, q, tol.feas).and_then(|p| {
                let rep = check_target(&p, to, q, tol.feas)?;
                let fs = objective_f(instance, src)?;
                let ft = objective_f(instance, &p)?;
                Ok((rep, fs, ft))
            });
            match outcome {
                Ok((rep, fs, ft)) => {
                    c.feasibility = Some(rep);
                    c.source_objective = Some(fs);
                    c.target_objective = Some(ft);
                    c.objective_preserved = rel_gap(fs, ft) <= tol.feas;
                }
                Err(e) => c.error = Some(e.to_string()),
            }
            conversions.push(c);
        }
    }

    EquivalenceReport {
        fingerprint: format!("{fingerprint:016x}"),
        q,
        n: instance.n(),
        relaxations: results,
        pairwise_gaps,
        conversions,
        tolerances: *tol,
    }
}

/// `count` random distinct positive root quadruples in `(0, 100)`, sorted.
pub fn random_roots(count: usize, seed: u64) -> Vec<RootSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut r: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..100.0));
        r.sort_by(f64::total_cmp);
        if let Ok(roots) = RootSet::new(r) {
            out.push(roots);
        }
    }
    out
}

/// One row of the roots report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootsRow {
    pub analysis: Option<RootAnalysis>,
    pub roots: [f64; 4],
    pub error: Option<String>,
}

/// Root analysis for each quadruple; solver failures are recorded per row.
pub fn roots_report(roots: &[RootSet], opts: &SolverOptions, tol: f64) -> Vec<RootsRow> {
    roots
        .par_iter()
        .map(|r| match RootAnalysis::run(r, opts, tol) {
            Ok(a) => RootsRow {
                analysis: Some(a),
                roots: r.r,
                error: None,
            },
            Err(e) => RootsRow {
                analysis: None,
                roots: r.r,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(q: u32, detectors: &[&str], trials: usize, grid: Vec<f64>) -> SimConfig {
        SimConfig {
            m_tilde: 2,
            n_tilde: 2,
            q,
            snr_db_grid: grid,
            trials_per_snr: trials,
            detectors: detectors.iter().map(|s| s.to_string()).collect(),
            seed: 42,
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            randomizations: 20,
        }
    }

    #[test]
    fn detector_labels_round_trip() {
        for k in DetectorKind::ALL {
            assert_eq!(k.label().parse::<DetectorKind>().unwrap(), k);
        }
        assert_eq!("PI16".parse::<DetectorKind>().unwrap(), DetectorKind::Pi);
        assert_eq!("va".parse::<DetectorKind>().unwrap(), DetectorKind::VaRoundingII);
        assert!("lll".parse::<DetectorKind>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(config(2, &["bc", "pi16", "va"], 3, vec![10.0]).validate().is_ok());
        assert!(config(2, &["bc"], 0, vec![10.0]).validate().is_err());
        assert!(config(2, &["bc"], 1, vec![]).validate().is_err());
        assert!(config(2, &[], 1, vec![10.0]).validate().is_err());
        assert!(config(4, &["pi"], 1, vec![10.0]).validate().is_err());
        assert!(config(3, &["pi16"], 1, vec![10.0]).validate().is_err());
        assert!(config(2, &["bc", "bc"], 1, vec![10.0]).validate().is_err());
        let mut big = config(2, &["ml"], 1, vec![10.0]);
        big.n_tilde = 8;
        big.m_tilde = 8;
        assert!(big.validate().is_err());
    }

    #[test]
    fn toml_round_trip_with_defaults() {
        let text = r#"
            m_tilde = 4
            n_tilde = 4
            q = 2
            snr_db_grid = [5.0, 10.0, inf]
            trials_per_snr = 10
            detectors = ["bc", "pi16", "va"]
            seed = 7
        "#;
        let c = SimConfig::from_toml(text).unwrap();
        assert_eq!(c.randomizations, 100);
        assert_eq!(c.gap_tol, 1e-8);
        assert_eq!(c.snr_db_grid[2], f64::INFINITY);
        assert_eq!(SimConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert!(SimConfig::from_toml("m_tilde = 1\nbogus = 2").is_err());
    }

    #[test]
    fn seeds_differ_across_cells() {
        let mut seen = std::collections::HashSet::new();
        for s in 0..5 {
            for t in 0..200 {
                assert!(seen.insert(trial_seed(1, s, t)));
            }
        }
        assert_eq!(trial_seed(9, 2, 3), trial_seed(9, 2, 3));
    }

    #[test]
    fn noiseless_sweep_is_error_free() {
        let cfg = config(2, &["bc", "pi", "va-i", "va-ii", "bc-rand", "zf", "ml", "sphere"], 6, vec![f64::INFINITY]);
        let rep = run_simulation(&cfg).unwrap();
        for r in &rep.records {
            assert_eq!(r.symbol_errors, 0, "{}", r.detector);
            assert_eq!(r.trials, 6);
        }
        let bc = rep.record(0, DetectorKind::Bc).unwrap();
        assert!(bc.mean_iters > 0.0 && bc.mean_relax_value.abs() < 1e-6);
        assert!(rep.record(0, DetectorKind::Ml).unwrap().mean_iters.is_nan());
    }

    #[test]
    fn sweep_is_reproducible_and_consistent() {
        let cfg = config(2, &["bc", "pi", "va", "zf"], 12, vec![0.0, 8.0]);
        let a = run_simulation(&cfg).unwrap();
        let b = run_simulation(&cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let csv = a.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 1 + 2 * 4);
        for r in &a.records {
            assert_eq!(r.ser, r.symbol_errors as f64 / (r.trials * 2) as f64);
            assert!(r.vector_errors <= r.symbol_errors);
        }
        for s in &a.summaries {
            assert_eq!(s.disagreements_without_tie, 0);
        }
    }

    #[test]
    fn verify_report_shapes() {
        let opts = SolverOptions::default();
        let tol = VerifyTolerances::default();
        for q in [2, 3] {
            let ci = generate_instance(2, 2, q, 10.0, 5).unwrap();
            let rep = verify_equivalence(&ci.to_real(), ci.fingerprint(), &opts, &tol);
            assert_eq!(rep.relaxations.len(), 3);
            assert_eq!(rep.pairwise_gaps.len(), 3);
            assert_eq!(rep.conversions.len(), 6);
            assert!(rep.all_ok(), "{rep:#?}");
        }
        let ci = generate_instance(2, 2, 4, 10.0, 5).unwrap();
        let rep = verify_equivalence(&ci.to_real(), ci.fingerprint(), &opts, &tol);
        assert!(!rep.relaxations[1].available);
        assert_eq!(rep.pairwise_gaps.len(), 1);
        assert_eq!(rep.conversions.iter().filter(|c| c.available).count(), 2);
        assert!(rep.all_ok(), "{rep:#?}");
        assert!(!rep.hard_failure());
    }

    #[test]
    fn roots_report_rows() {
        let roots = vec![
            RootSet::canonical(),
            RootSet::new([1.0, 2.0, 3.0, 100.0]).unwrap(),
            RootSet::new([1.0, 4.0, 9.0, 16.0]).unwrap(),
        ];
        let rows = roots_report(&roots, &SolverOptions::default(), 1e-4);
        let verdicts: Vec<bool> = rows.iter().map(|r| r.analysis.as_ref().unwrap().condition_holds).collect();
        assert_eq!(verdicts, [true, false, true]);
        assert!(rows.iter().all(|r| r.analysis.as_ref().unwrap().agrees));
        let again = random_roots(5, 3);
        assert_eq!(again, random_roots(5, 3));
        assert!(again.iter().all(|r| r.r.windows(2).all(|w| w[0] < w[1])));
    }
}
