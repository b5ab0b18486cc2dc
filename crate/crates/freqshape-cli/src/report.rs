//! Report structures and file emission. All writes go through a
//! write-temp-then-rename path so reruns replace files atomically.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use freqshape::net::Case;
use freqshape::sim::{coi_frequency, Metrics, Trajectory};
use freqshape::stability::{BusVerdict, Certificate};

#[derive(Debug, thiserror::Error)]
#[error("cannot write {path}: {source}")]
pub struct IoError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let wrap = |source: std::io::Error| IoError {
        path: path.to_path_buf(),
        source,
    };
    let tmp = path.with_extension("tmp");
    let mut file = fs::File::create(&tmp).map_err(wrap)?;
    file.write_all(bytes).map_err(wrap)?;
    file.flush().map_err(wrap)?;
    drop(file);
    fs::rename(&tmp, path).map_err(wrap)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports are serializable");
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    atomic_write(path, text.as_bytes())
}

#[derive(Debug, Clone, Serialize)]
pub struct GReport {
    pub rho: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InverterReport {
    pub id: u32,
    pub m: f64,
    pub d: f64,
    pub g: Option<GReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthesisReport {
    pub a: f64,
    pub b: f64,
    pub b_effective: f64,
    pub strategy: String,
    pub m_inv: f64,
    pub d_inv_base: f64,
    pub per_inverter: Vec<InverterReport>,
    pub mismatch_norm: f64,
    pub step_pu: f64,
    pub predicted_omega_ss: f64,
    pub predicted_rocof: f64,
    /// Algebraic connectivity of the coupling Laplacian (reported, not
    /// gated on).
    pub lambda2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BusVerdictReport {
    pub id: u32,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub tau_alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub overall: bool,
    pub attempts: usize,
    pub per_bus: Vec<BusVerdictReport>,
}

impl CertificateReport {
    pub fn from_certificate(cert: &Certificate) -> Self {
        Self {
            tau_alpha: cert.witness.map(|w| w.tau_alpha),
            epsilon: cert.witness.map(|w| w.epsilon),
            overall: cert.overall,
            attempts: cert.attempts,
            per_bus: cert
                .per_bus
                .iter()
                .map(|b| match b.verdict {
                    BusVerdict::Certified => BusVerdictReport {
                        id: b.id,
                        verdict: "certified".into(),
                        reason: None,
                    },
                    BusVerdict::Failed(reason) => BusVerdictReport {
                        id: b.id,
                        verdict: "failed".into(),
                        reason: Some(reason.to_string()),
                    },
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub nadir: f64,
    pub rocof_peak: f64,
    pub rocof_instant: f64,
    pub rocof_window: f64,
    pub ss_dev: f64,
    pub overshoot_ratio: f64,
    pub flags: Vec<String>,
}

impl MetricsReport {
    pub fn from_metrics(m: &Metrics) -> Self {
        Self {
            nadir: m.nadir,
            rocof_peak: m.rocof_peak,
            rocof_instant: m.rocof_instant,
            rocof_window: m.rocof_window,
            ss_dev: m.ss_dev,
            overshoot_ratio: m.overshoot_ratio,
            flags: m.flags.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictionReport {
    pub rocof: f64,
    pub omega_ss_gfvi: f64,
    pub omega_ss_gffs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub disturbance_bus: u32,
    pub step_pu: f64,
    pub nonlinear: bool,
    pub predicted: PredictionReport,
    pub gfvi: MetricsReport,
    pub gffs: MetricsReport,
}

/// Writes a trajectory as CSV with the header
/// `t,omega_coi_pu,omega_coi_hz,omega_bus_<id>...,p_inv_<id>...`.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, case: &Case) -> Result<(), IoError> {
    let coi = coi_frequency(traj, case);
    let mut out = String::new();
    out.push_str("t,omega_coi_pu,omega_coi_hz");
    for bus in case.buses() {
        let _ = write!(out, ",omega_bus_{}", bus.id);
    }
    for id in &traj.inverter_ids {
        let _ = write!(out, ",p_inv_{id}");
    }
    out.push('\n');
    for (k, &t) in traj.times.iter().enumerate() {
        let _ = write!(out, "{t},{},{}", coi[k], coi[k] * case.nominal_hz);
        for series in &traj.omega {
            let _ = write!(out, ",{}", series[k]);
        }
        for series in &traj.inverter_power {
            let _ = write!(out, ",{}", series[k]);
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

fn yes_no(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

/// Renders the single markdown summary with the comparison check table.
pub fn render_summary(
    synthesis: &SynthesisReport,
    certificate: &CertificateReport,
    comparison: &ComparisonReport,
    identity_residual: f64,
    files: &[&str],
) -> String {
    let mut s = String::new();
    s.push_str("# Frequency-shaping comparison summary\n\n");
    let _ = writeln!(
        s,
        "Disturbance: {} p.u. step at bus {} (seed {}), {} power flows.\n",
        comparison.step_pu,
        comparison.disturbance_bus,
        comparison.seed,
        if comparison.nonlinear {
            "nonlinear"
        } else {
            "linearized"
        }
    );
    s.push_str("| check | value | threshold | status |\n");
    s.push_str("|---|---|---|---|\n");
    let _ = writeln!(
        s,
        "| first-order identity residual (exact matching) | {identity_residual:.3e} | < 1e-8 | {} |",
        yes_no(identity_residual < 1e-8)
    );
    let _ = writeln!(
        s,
        "| realization gap norm | {:.3e} | reported | pass |",
        synthesis.mismatch_norm
    );
    let _ = writeln!(
        s,
        "| certificate | overall={} (attempts {}) | overall=true | {} |",
        certificate.overall,
        certificate.attempts,
        yes_no(certificate.overall)
    );
    let matched = (comparison.predicted.omega_ss_gfvi - comparison.predicted.omega_ss_gffs).abs();
    let _ = writeln!(
        s,
        "| matched-tuning steady-state gap | {matched:.3e} | <= 1e-10 | {} |",
        yes_no(matched <= 1e-10)
    );
    let rocof_err = if comparison.predicted.rocof != 0.0 {
        (comparison.gffs.rocof_instant - comparison.predicted.rocof).abs()
            / comparison.predicted.rocof.abs()
    } else {
        0.0
    };
    let _ = writeln!(
        s,
        "| shaping RoCoF vs prediction | {:.2}% | < 5% | {} |",
        100.0 * rocof_err,
        yes_no(rocof_err < 0.05)
    );
    let _ = writeln!(
        s,
        "| shaping overshoot ratio | {:.4} | < 0.02 | {} |",
        comparison.gffs.overshoot_ratio,
        yes_no(comparison.gffs.overshoot_ratio < 0.02)
    );
    let _ = writeln!(
        s,
        "| virtual-inertia overshoot ratio | {:.4} | > 0.10 | {} |",
        comparison.gfvi.overshoot_ratio,
        yes_no(comparison.gfvi.overshoot_ratio > 0.10)
    );
    let flags: Vec<&String> = comparison
        .gfvi
        .flags
        .iter()
        .chain(comparison.gffs.flags.iter())
        .collect();
    let _ = writeln!(
        s,
        "| simulation flags | {} | none | {} |",
        if flags.is_empty() {
            "none".to_string()
        } else {
            flags
                .iter()
                .map(|f| f.as_str())
                .collect::<Vec<_>>()
                .join("; ")
        },
        yes_no(flags.iter().all(|f| !f.starts_with("sync_lost")))
    );
    s.push_str("\n## Tuning\n\n");
    let _ = writeln!(
        s,
        "- aggregate gains: a = {}, b = {} (effective {})",
        synthesis.a, synthesis.b, synthesis.b_effective
    );
    let _ = writeln!(
        s,
        "- per inverter: m = {}, base d = {}, strategy {}",
        synthesis.m_inv, synthesis.d_inv_base, synthesis.strategy
    );
    let _ = writeln!(
        s,
        "- predicted steady state {} p.u., predicted RoCoF {} p.u./s, lambda2 = {:.4}",
        synthesis.predicted_omega_ss, synthesis.predicted_rocof, synthesis.lambda2
    );
    s.push_str("\n## Files\n\n");
    for f in files {
        let _ = writeln!(s, "- `{f}`");
    }
    s
}
