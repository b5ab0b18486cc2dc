//! Pipeline runner: parse → synthesize → certify → simulate → compare,
//! with deterministic seeded disturbance selection and report emission.

use std::fs;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use freqshape::net::{build_laplacian, BusKind, Case, InverterControl};
use freqshape::bus::GfviParams;
use freqshape::sim::{
    assemble_linear, compute_metrics, integrate_linear, simulate_nonlinear, Scenario, SimError,
    Trajectory,
};
use freqshape::stability::{certify_system, Certificate, SearchGrid, StabilityError};
use freqshape::synthesis::{
    coherent_dc_denominator, coherent_tf, synthesize, target_gains, FrequencySpec, Strategy,
    Synthesis, SynthesisError,
};
use freqshape::ratfun::RatFun;
use freqshape::bus::GOption;

use crate::casefile::{parse_case, CaseFileError};
use crate::demo::demo_case;
use crate::report::{
    render_summary, write_json, write_text, write_trajectory_csv, CertificateReport,
    ComparisonReport, GReport, InverterReport, IoError, MetricsReport, PredictionReport,
    SynthesisReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Validation = 2,
    Inconclusive = 3,
    SimFlagged = 4,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("cannot read case file {path}: {source}")]
    ReadCase {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    CaseFile(#[from] CaseFileError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Config(&'static str),
}

impl RunError {
    /// Errors caused by bad inputs map to the validation exit code.
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::Validation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyChoice {
    MatchIndividual,
    DistributeReduced,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Case file path; the bundled demo case when absent.
    pub case_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub step_pu: f64,
    pub step_time: f64,
    pub t_end: f64,
    pub dt: f64,
    pub deadband_hz: f64,
    /// Overrides the case's nominal frequency when set.
    pub nominal_hz: Option<f64>,
    pub vmax_factor: f64,
    pub nonlinear: bool,
    pub max_rocof: Option<f64>,
    pub max_ss_dev: Option<f64>,
    pub strategy: StrategyChoice,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case_path: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
            step_pu: -0.3,
            step_time: 1.0,
            t_end: 30.0,
            dt: 0.001,
            deadband_hz: 0.036,
            nominal_hz: None,
            vmax_factor: 1.1,
            nonlinear: false,
            max_rocof: None,
            max_ss_dev: None,
            strategy: StrategyChoice::DistributeReduced,
        }
    }
}

impl RunConfig {
    pub fn load_case(&self) -> Result<Case, RunError> {
        let mut case = match &self.case_path {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| RunError::ReadCase {
                    path: path.clone(),
                    source,
                })?;
                parse_case(&text)?
            }
            None => demo_case(),
        };
        if let Some(hz) = self.nominal_hz {
            case.nominal_hz = hz;
        }
        Ok(case)
    }

    fn scenario(&self, case: &Case, rng: &mut ChaCha8Rng, nonlinear: bool) -> Result<(Scenario, u32), RunError> {
        let idx = rng.gen_range(0..case.n());
        let bus_id = case.buses()[idx].id;
        let mut u0 = vec![0.0; case.n()];
        u0[idx] = self.step_pu;
        let scenario = Scenario::new(
            u0,
            self.step_time,
            self.t_end,
            self.dt,
            self.deadband_hz,
            nonlinear,
        )?;
        Ok((scenario, bus_id))
    }
}

/// The synthesis target: from the frequency spec when both bounds are
/// given, otherwise the matched-fleet tuning where each inverter mirrors
/// the mean generator inertia and damping.
fn pick_target(
    cfg: &RunConfig,
    case: &Case,
) -> Result<freqshape::synthesis::SynthesisTarget, RunError> {
    if let (Some(rocof), Some(ss)) = (cfg.max_rocof, cfg.max_ss_dev) {
        let spec = FrequencySpec::new(cfg.step_pu, ss, rocof)?;
        return Ok(target_gains(&spec));
    }
    matched_fleet_target(case)
}

fn matched_fleet_target(
    case: &Case,
) -> Result<freqshape::synthesis::SynthesisTarget, RunError> {
    let n_gen = case.indices_of_kind(BusKind::Generator).len();
    let n_inv = case.indices_of_kind(BusKind::Inverter).len();
    if n_gen == 0 {
        return Err(RunError::Config(
            "matched-fleet tuning needs generators; pass --max-rocof and --max-ss-dev instead",
        ));
    }
    if n_inv == 0 {
        return Err(RunError::Synthesis(SynthesisError::NoInverters));
    }
    let m_bar = case.sum_generator_inertia() / n_gen as f64;
    let d_bar = case.sum_generator_damping() / n_gen as f64;
    Ok(freqshape::synthesis::SynthesisTarget {
        a: case.sum_generator_inertia() + n_inv as f64 * m_bar,
        b: case.sum_generator_damping() + n_inv as f64 * d_bar,
    })
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<(), RunError> {
    fs::create_dir_all(&cfg.out_dir).map_err(|source| {
        RunError::Io(IoError {
            path: cfg.out_dir.clone(),
            source,
        })
    })
}

fn lambda2(case: &Case) -> f64 {
    let lap = build_laplacian(case);
    let n = case.n();
    if n < 2 {
        return 0.0;
    }
    let m = nalgebra::DMatrix::from_row_slice(n, n, lap.matrix().data());
    let mut eigs: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigs.sort_by(f64::total_cmp);
    eigs[1]
}

fn synthesis_report(cfg: &RunConfig, syn: &Synthesis) -> SynthesisReport {
    let dc = coherent_dc_denominator(&syn.case).expect("synthesized case is fully assigned");
    SynthesisReport {
        a: syn.target.a,
        b: syn.target.b,
        b_effective: syn.b_effective,
        strategy: match syn.strategy {
            Strategy::MatchIndividual => "match_individual".into(),
            Strategy::DistributeReduced { .. } => "distribute_reduced".into(),
        },
        m_inv: syn.allocation.m_inv,
        d_inv_base: syn.allocation.d_inv_base,
        per_inverter: syn
            .per_inverter
            .iter()
            .map(|(id, p)| InverterReport {
                id: *id,
                m: p.m,
                d: p.d,
                g: match p.g {
                    GOption::Zero => None,
                    GOption::FirstOrder { rho, sigma } => Some(GReport { rho, sigma }),
                },
            })
            .collect(),
        mismatch_norm: syn.mismatch_norm,
        step_pu: cfg.step_pu,
        predicted_omega_ss: cfg.step_pu / dc,
        predicted_rocof: cfg.step_pu / syn.target.a,
        lambda2: lambda2(&syn.case),
    }
}

fn run_synthesis(cfg: &RunConfig, case: &Case) -> Result<(Synthesis, SynthesisReport), RunError> {
    let target = pick_target(cfg, case)?;
    let strategy = match cfg.strategy {
        StrategyChoice::MatchIndividual => Strategy::MatchIndividual,
        StrategyChoice::DistributeReduced => Strategy::DistributeReduced { weights: None },
    };
    let syn = synthesize(case, &target, strategy)?;
    let report = synthesis_report(cfg, &syn);
    Ok((syn, report))
}

pub struct SynthesizeOutcome {
    pub exit: ExitCode,
    pub report: SynthesisReport,
    pub files: Vec<PathBuf>,
}

pub fn cmd_synthesize(cfg: &RunConfig) -> Result<SynthesizeOutcome, RunError> {
    let case = cfg.load_case()?;
    let (_, report) = run_synthesis(cfg, &case)?;
    ensure_out_dir(cfg)?;
    let path = cfg.out_dir.join("synthesis.json");
    write_json(&path, &report)?;
    Ok(SynthesizeOutcome {
        exit: ExitCode::Ok,
        report,
        files: vec![path],
    })
}

pub struct CertifyOutcome {
    pub exit: ExitCode,
    pub certificate: Certificate,
    pub report: CertificateReport,
    pub files: Vec<PathBuf>,
}

/// Certifies a case whose inverters already carry controllers.
pub fn cmd_certify(cfg: &RunConfig) -> Result<CertifyOutcome, RunError> {
    let case = cfg.load_case()?;
    certify_case(cfg, &case)
}

fn certify_case(cfg: &RunConfig, case: &Case) -> Result<CertifyOutcome, RunError> {
    let cert = certify_system(case, &SearchGrid::default(), cfg.vmax_factor)?;
    let report = CertificateReport::from_certificate(&cert);
    ensure_out_dir(cfg)?;
    let path = cfg.out_dir.join("certificate.json");
    write_json(&path, &report)?;
    Ok(CertifyOutcome {
        exit: if cert.overall {
            ExitCode::Ok
        } else {
            ExitCode::Inconclusive
        },
        certificate: cert,
        report,
        files: vec![path],
    })
}

fn run_leg(case: &Case, scenario: &Scenario) -> Result<Trajectory, RunError> {
    if scenario.nonlinear {
        Ok(simulate_nonlinear(case, scenario)?)
    } else {
        let model = assemble_linear(case)?;
        Ok(integrate_linear(&model, scenario)?)
    }
}

pub struct SimulateOutcome {
    pub exit: ExitCode,
    pub disturbance_bus: u32,
    pub metrics: MetricsReport,
    pub files: Vec<PathBuf>,
}

/// Simulates a fully assigned case under the seeded step disturbance.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateOutcome, RunError> {
    let case = cfg.load_case()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (scenario, bus_id) = cfg.scenario(&case, &mut rng, cfg.nonlinear)?;
    let traj = run_leg(&case, &scenario)?;
    let metrics = MetricsReport::from_metrics(&compute_metrics(&traj, &case));
    ensure_out_dir(cfg)?;
    let csv = cfg.out_dir.join("trajectory.csv");
    let json = cfg.out_dir.join("metrics.json");
    write_trajectory_csv(&csv, &traj, &case)?;
    write_json(&json, &metrics)?;
    Ok(SimulateOutcome {
        exit: if traj.sync_lost.is_some() {
            ExitCode::SimFlagged
        } else {
            ExitCode::Ok
        },
        disturbance_bus: bus_id,
        metrics,
        files: vec![csv, json],
    })
}

pub struct CompareOutcome {
    pub exit: ExitCode,
    pub synthesis: Synthesis,
    pub synthesis_report: SynthesisReport,
    pub comparison: ComparisonReport,
    pub files: Vec<PathBuf>,
}

/// Builds the matched virtual-inertia and frequency-shaping fleets, runs
/// the identical scenario on both, and writes the side-by-side artifacts.
pub fn cmd_compare(cfg: &RunConfig) -> Result<CompareOutcome, RunError> {
    let case = cfg.load_case()?;
    compare_case(cfg, &case, cfg.nonlinear)
}

fn compare_case(cfg: &RunConfig, case: &Case, nonlinear: bool) -> Result<CompareOutcome, RunError> {
    let n_gen = case.indices_of_kind(BusKind::Generator).len();
    let inv_ids: Vec<u32> = case
        .inverters()
        .map(|(i, _)| case.buses()[i].id)
        .collect();
    if inv_ids.is_empty() {
        return Err(RunError::Synthesis(SynthesisError::NoInverters));
    }
    if n_gen == 0 {
        return Err(RunError::Config(
            "comparison requires at least one generator for the matched tuning",
        ));
    }
    let m_bar = case.sum_generator_inertia() / n_gen as f64;
    let d_bar = case.sum_generator_damping() / n_gen as f64;

    // Frequency-shaping leg: matched-fleet target, uniform distribution.
    let target = matched_fleet_target(case)?;
    let syn = synthesize(case, &target, Strategy::DistributeReduced { weights: None })?;
    let synthesis_report = synthesis_report(cfg, &syn);

    // Virtual-inertia leg: every inverter gets the fleet-average constants.
    let gfvi = GfviParams::new(m_bar, d_bar).expect("means of positive values");
    let gfvi_case = case
        .with_inverter_controls(inv_ids.iter().map(|&id| (id, InverterControl::Gfvi(gfvi))))
        .expect("inverter ids come from the case");

    // Matched-tuning identity: both legs must predict the same RoCoF and
    // steady state before any simulation runs.
    let dc_gfvi = coherent_dc_denominator(&gfvi_case)?;
    let dc_gffs = coherent_dc_denominator(&syn.case)?;
    let predicted = PredictionReport {
        rocof: cfg.step_pu / target.a,
        omega_ss_gfvi: cfg.step_pu / dc_gfvi,
        omega_ss_gffs: cfg.step_pu / dc_gffs,
    };
    if (predicted.omega_ss_gfvi - predicted.omega_ss_gffs).abs() > 1e-10 {
        return Err(RunError::Config(
            "matched-tuning identity violated: legs predict different steady states",
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (scenario, bus_id) = cfg.scenario(case, &mut rng, nonlinear)?;
    let traj_gfvi = run_leg(&gfvi_case, &scenario)?;
    let traj_gffs = run_leg(&syn.case, &scenario)?;
    let metrics_gfvi = MetricsReport::from_metrics(&compute_metrics(&traj_gfvi, &gfvi_case));
    let metrics_gffs = MetricsReport::from_metrics(&compute_metrics(&traj_gffs, &syn.case));
    let sync_flagged = traj_gfvi.sync_lost.is_some() || traj_gffs.sync_lost.is_some();

    let comparison = ComparisonReport {
        seed: cfg.seed,
        disturbance_bus: bus_id,
        step_pu: cfg.step_pu,
        nonlinear,
        predicted,
        gfvi: metrics_gfvi,
        gffs: metrics_gffs,
    };

    ensure_out_dir(cfg)?;
    let csv_gfvi = cfg.out_dir.join("trajectory_gfvi.csv");
    let csv_gffs = cfg.out_dir.join("trajectory_gffs.csv");
    let json = cfg.out_dir.join("comparison.json");
    write_trajectory_csv(&csv_gfvi, &traj_gfvi, &gfvi_case)?;
    write_trajectory_csv(&csv_gffs, &traj_gffs, &syn.case)?;
    write_json(&json, &comparison)?;

    Ok(CompareOutcome {
        exit: if sync_flagged {
            ExitCode::SimFlagged
        } else {
            ExitCode::Ok
        },
        synthesis: syn,
        synthesis_report,
        comparison,
        files: vec![csv_gfvi, csv_gffs, json],
    })
}

pub struct DemoOutcome {
    pub exit: ExitCode,
    pub files: Vec<PathBuf>,
}

/// Full pipeline on the configured case (bundled demo by default):
/// synthesis report, certificate, nonlinear comparison, and the markdown
/// summary — six files total.
pub fn cmd_demo(cfg: &RunConfig) -> Result<DemoOutcome, RunError> {
    let case = cfg.load_case()?;
    let compare = compare_case(cfg, &case, true)?;
    let certify = certify_case(cfg, &compare.synthesis.case)?;
    let path = cfg.out_dir.join("synthesis.json");
    write_json(&path, &compare.synthesis_report)?;

    // First-order identity residual under exact matching. The distributed
    // realization used for the comparison is inexact whenever the turbine
    // time constants differ (its gap is reported as mismatch_norm), so the
    // identity is checked on the matching strategy instead. The extended
    // coherent dynamics folds the load damping into the constant term.
    let exact = synthesize(
        &case,
        &compare.synthesis.target,
        Strategy::MatchIndividual,
    )?;
    let hc = coherent_tf(&exact.case)?;
    let ideal = RatFun::from_coeffs(
        &[1.0],
        &[
            exact.b_effective + case.sum_load_damping(),
            exact.target.a,
        ],
    )
    .expect("positive gains");
    let residual = hc.approx_distance(&ideal);

    let summary = render_summary(
        &compare.synthesis_report,
        &certify.report,
        &compare.comparison,
        residual,
        &[
            "synthesis.json",
            "certificate.json",
            "comparison.json",
            "trajectory_gfvi.csv",
            "trajectory_gffs.csv",
            "summary.md",
        ],
    );
    let summary_path = cfg.out_dir.join("summary.md");
    write_text(&summary_path, &summary)?;

    let mut files = vec![path];
    files.extend(certify.files);
    files.extend(compare.files);
    files.push(summary_path);
    let exit = if compare.exit == ExitCode::SimFlagged {
        ExitCode::SimFlagged
    } else if certify.exit == ExitCode::Inconclusive {
        ExitCode::Inconclusive
    } else {
        ExitCode::Ok
    };
    Ok(DemoOutcome { exit, files })
}
