//! Closed-loop assembly and time-domain simulation.
//!
//! The interconnection couples the diagonal bus dynamics with the network
//! through the angle integrators: `θ̇ = ω`, `u_P = p_in − p_e`, where the
//! electrical deviations `p_e` are `L_B θ` in the linear model and the full
//! sine power flows in the nonlinear one. Both paths use the same fixed-step
//! classical 4th-order integrator with the step instant aligned to a
//! sub-step boundary, so the discontinuous input never smears across a
//! stage evaluation.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::bus::GOption;
use crate::float;
use crate::matrix::Matrix;
use crate::net::{build_laplacian, BusId, BusParams, Case, InverterControl, Laplacian};
use crate::synthesis::coherent_dc_denominator;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimError {
    ScenarioInvalid(&'static str),
    /// An inverter reached simulation without a controller.
    UnassignedInverter(BusId),
    /// A dynamic bus produced a non-strictly-proper transfer function;
    /// cannot occur with the shipped bus catalog, checked defensively.
    AlgebraicLoop,
}

impl core::fmt::Display for SimError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::ScenarioInvalid(what) => write!(f, "invalid scenario: {what}"),
            Self::UnassignedInverter(id) => {
                write!(f, "inverter bus {id} has no controller assigned")
            }
            Self::AlgebraicLoop => write!(f, "memoryless feedthrough would close an algebraic loop"),
        }
    }
}

impl core::error::Error for SimError {}

/// Step-disturbance scenario. `u0` holds one power step per bus (p.u.),
/// applied at `t_step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub u0: Vec<f64>,
    pub t_step: f64,
    pub t_end: f64,
    pub dt: f64,
    pub deadband_hz: f64,
    pub nonlinear: bool,
}

impl Scenario {
    pub fn new(
        u0: Vec<f64>,
        t_step: f64,
        t_end: f64,
        dt: f64,
        deadband_hz: f64,
        nonlinear: bool,
    ) -> Result<Self, SimError> {
        if !(t_step >= 0.0) || !t_step.is_finite() {
            return Err(SimError::ScenarioInvalid("t_step must be >= 0"));
        }
        if !(t_end > t_step) || !t_end.is_finite() {
            return Err(SimError::ScenarioInvalid("t_end must exceed t_step"));
        }
        if !(dt > 0.0) || dt > (t_end - t_step) / 100.0 {
            return Err(SimError::ScenarioInvalid(
                "dt must be positive and at most (t_end - t_step)/100",
            ));
        }
        if !(deadband_hz >= 0.0) {
            return Err(SimError::ScenarioInvalid("deadband_hz must be >= 0"));
        }
        Ok(Self {
            u0,
            t_step,
            t_end,
            dt,
            deadband_hz,
            nonlinear,
        })
    }
}

/// Dense state-space realization `ẋ = Ax + Bu`, `y = Cx + Du` with
/// `n_u = n_y = n` (one power input and one frequency output per bus).
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
}

impl StateSpace {
    pub fn n_states(&self) -> usize {
        self.a.rows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.cols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.rows()
    }
}

/// Whether the angle block drops one bus (relative coordinates) or keeps
/// all `n` integrators, retaining the uniform-shift zero mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grounding {
    /// Angles relative to the lowest-id bus; removes the Laplacian rank
    /// deficiency from the realization.
    Reference,
    /// All `n` angles; the assembled matrix keeps the single zero eigenvalue
    /// of the uniform angle shift (used by eigenvalue checks).
    None,
}

/// A state-space realization plus the bookkeeping needed to integrate it
/// and to reconstruct per-bus quantities from the state vector.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub ss: StateSpace,
    pub grounding: Grounding,
    n: usize,
    angle_offset: usize,
    ref_bus: Option<usize>,
    lap: Laplacian,
    inverter_ids: Vec<BusId>,
    inverter_rows: Vec<usize>,
}

/// Controllable canonical form of the grounded closed loop (see
/// [`Grounding::Reference`]): every dynamic bus contributes `deg den`
/// states, loads couple through algebraic feedthrough, and one relative
/// angle per non-reference bus closes the network loop.
pub fn assemble_linear(case: &Case) -> Result<LinearModel, SimError> {
    assemble_linear_with(case, Grounding::Reference)
}

pub fn assemble_linear_with(case: &Case, grounding: Grounding) -> Result<LinearModel, SimError> {
    let n = case.n();
    let lap = build_laplacian(case);
    // State layout: dynamic-bus blocks first, then the angle block.
    let mut spans: Vec<Option<(usize, usize)>> = Vec::with_capacity(n);
    let mut tfs = Vec::with_capacity(n);
    let mut offset = 0usize;
    for bus in case.buses() {
        match &bus.params {
            BusParams::Load(_) => {
                spans.push(None);
                tfs.push(None);
            }
            BusParams::Inverter(None) => return Err(SimError::UnassignedInverter(bus.id)),
            _ => {
                let tf = bus.tf().expect("dynamic bus has a transfer function");
                if !tf.is_strictly_proper() {
                    return Err(SimError::AlgebraicLoop);
                }
                let k = tf.den().degree();
                spans.push(Some((offset, k)));
                offset += k;
                tfs.push(Some(tf));
            }
        }
    }
    let angle_offset = offset;
    let ref_bus = match grounding {
        Grounding::Reference => Some(0usize),
        Grounding::None => None,
    };
    let angle_col = |bus: usize| -> Option<usize> {
        match ref_bus {
            Some(r) if bus == r => None,
            Some(r) if bus > r => Some(angle_offset + bus - 1),
            _ => Some(angle_offset + bus),
        }
    };
    let n_angles = if ref_bus.is_some() { n - 1 } else { n };
    let nx = angle_offset + n_angles;

    let mut a = Matrix::zeros(nx, nx);
    let mut b = Matrix::zeros(nx, n);
    let mut c = Matrix::zeros(n, nx);
    let mut d = Matrix::zeros(n, n);

    // ω_i as a row over (states, inputs): dynamic -> numerator coefficients,
    // load -> feedthrough of u_P / d.
    let add_omega_row = |row_a: &mut [f64], row_d: &mut [f64], i: usize, sign: f64| {
        match (&tfs[i], spans[i]) {
            (Some(tf), Some((o, k))) => {
                for j in 0..k {
                    row_a[o + j] += sign * tf.num().coeff(j);
                }
            }
            _ => {
                let d_load = match &case.buses()[i].params {
                    BusParams::Load(p) => p.d,
                    _ => unreachable!("non-load bus without states"),
                };
                for jb in 0..n {
                    if let Some(col) = angle_col(jb) {
                        row_a[col] += sign * (-lap.entry(i, jb) / d_load);
                    }
                }
                row_d[i] += sign / d_load;
            }
        }
    };

    for i in 0..n {
        if let Some((o, k)) = spans[i] {
            let tf = tfs[i].as_ref().expect("dynamic span");
            // Shift chain.
            for r in 0..k.saturating_sub(1) {
                a[(o + r, o + r + 1)] = 1.0;
            }
            // Companion row with the net power input u_P = p_in − L_B θ'.
            let last = o + k - 1;
            for j in 0..k {
                a[(last, o + j)] -= tf.den().coeff(j);
            }
            for jb in 0..n {
                if let Some(col) = angle_col(jb) {
                    a[(last, col)] -= lap.entry(i, jb);
                }
            }
            b[(last, i)] = 1.0;
            // Output row.
            for j in 0..k {
                c[(i, o + j)] = tf.num().coeff(j);
            }
        } else {
            // Load output: ω = (p_in − L_B θ')/d.
            let mut row_a = vec![0.0; nx];
            let mut row_d = vec![0.0; n];
            add_omega_row(&mut row_a, &mut row_d, i, 1.0);
            for (j, v) in row_a.iter().enumerate() {
                c[(i, j)] = *v;
            }
            for (j, v) in row_d.iter().enumerate() {
                d[(i, j)] = *v;
            }
        }
    }
    // Angle rows: θ̇'_j = ω_j (− ω_ref when grounded).
    for jb in 0..n {
        let Some(row) = angle_col(jb) else { continue };
        let mut row_a = vec![0.0; nx];
        let mut row_d = vec![0.0; n];
        add_omega_row(&mut row_a, &mut row_d, jb, 1.0);
        if let Some(r) = ref_bus {
            add_omega_row(&mut row_a, &mut row_d, r, -1.0);
        }
        for (j, v) in row_a.iter().enumerate() {
            a[(row, j)] += *v;
        }
        for (j, v) in row_d.iter().enumerate() {
            b[(row, j)] += *v;
        }
    }

    let inverter_rows: Vec<usize> = case.inverters().map(|(i, _)| i).collect();
    let inverter_ids = inverter_rows
        .iter()
        .map(|&i| case.buses()[i].id)
        .collect();
    Ok(LinearModel {
        ss: StateSpace { a, b, c, d },
        grounding,
        n,
        angle_offset,
        ref_bus,
        lap,
        inverter_ids,
        inverter_rows,
    })
}

/// Bus frequencies, angles, and inverter power outputs over a uniform time
/// grid. Angles from the linear model are relative to the reference bus
/// (its row stays zero); the nonlinear model records absolute angles
/// including the equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `n × T` frequency deviations (p.u.).
    pub omega: Vec<Vec<f64>>,
    /// `n × T` angles (rad).
    pub theta: Vec<Vec<f64>>,
    /// `|I| × T` inverter power output variations `q_r = −u_P` (p.u.).
    pub inverter_power: Vec<Vec<f64>>,
    pub inverter_ids: Vec<BusId>,
    pub step_time: f64,
    /// Set when the integration was truncated on loss of synchronism.
    pub sync_lost: Option<f64>,
}

/// Classical 4th-order step with preallocated stage buffers. The derivative
/// takes the input frozen for the whole sub-step; the caller guarantees the
/// input really is constant over it.
struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    fn step(
        &mut self,
        f: &mut impl FnMut(&[f64], &[f64], &mut [f64]),
        u: &[f64],
        x: &mut [f64],
        h: f64,
    ) {
        f(u, x, &mut self.k1);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        f(u, &self.tmp, &mut self.k2);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        f(u, &self.tmp, &mut self.k3);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        f(u, &self.tmp, &mut self.k4);
        for i in 0..x.len() {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn sample_times(scenario: &Scenario) -> Vec<f64> {
    let steps = (scenario.t_end / scenario.dt + 1e-9) as usize;
    (0..=steps).map(|k| k as f64 * scenario.dt).collect()
}

/// Integrates one interval `[t, t+dt]`, splitting at the step instant so no
/// sub-step straddles the input discontinuity. Within a sub-step the input
/// is the scenario value at its left endpoint (`u0` from `t_step` on).
fn step_with_split<'a>(
    rk4: &mut Rk4,
    f: &mut impl FnMut(&[f64], &[f64], &mut [f64]),
    t: f64,
    x: &mut [f64],
    dt: f64,
    t_step: f64,
    u0: &'a [f64],
    zero: &'a [f64],
) {
    let pick = |start: f64| if start >= t_step { u0 } else { zero };
    if t < t_step && t_step < t + dt {
        rk4.step(f, pick(t), x, t_step - t);
        rk4.step(f, pick(t_step), x, t + dt - t_step);
    } else {
        rk4.step(f, pick(t), x, dt);
    }
}

/// Fixed-step integration of the linear model under the scenario's step
/// input. Local truncation error is O(dt⁵); the default 1 ms step leaves
/// the closed-form responses accurate well past 1e-6.
pub fn integrate_linear(model: &LinearModel, scenario: &Scenario) -> Result<Trajectory, SimError> {
    if scenario.nonlinear {
        return Err(SimError::ScenarioInvalid(
            "linear integration requires nonlinear = false",
        ));
    }
    if scenario.u0.len() != model.n {
        return Err(SimError::ScenarioInvalid("u0 length must equal bus count"));
    }
    let n = model.n;
    let nx = model.ss.n_states();
    let zero_u = vec![0.0; n];
    let times = sample_times(scenario);
    let mut x = vec![0.0; nx];
    let mut rk4 = Rk4::new(nx);
    let a = &model.ss.a;
    let b = &model.ss.b;
    let input = |t: f64| -> &[f64] {
        if t >= scenario.t_step {
            &scenario.u0
        } else {
            &zero_u
        }
    };
    let mut deriv = |u: &[f64], x: &[f64], out: &mut [f64]| {
        for i in 0..nx {
            let mut acc = 0.0;
            for (aij, xj) in a.row(i).iter().zip(x) {
                acc += aij * xj;
            }
            for (bij, uj) in b.row(i).iter().zip(u) {
                acc += bij * uj;
            }
            out[i] = acc;
        }
    };

    let mut omega = vec![Vec::with_capacity(times.len()); n];
    let mut theta = vec![Vec::with_capacity(times.len()); n];
    let mut inv_power = vec![Vec::with_capacity(times.len()); model.inverter_rows.len()];
    let record = |x: &[f64], t: f64, omega: &mut Vec<Vec<f64>>, theta: &mut Vec<Vec<f64>>, inv_power: &mut Vec<Vec<f64>>| {
        let u = input(t);
        // Full angle vector (reference row pinned at zero when grounded).
        let mut th = vec![0.0; n];
        for i in 0..n {
            let col = match model.ref_bus {
                Some(r) if i == r => None,
                Some(r) if i > r => Some(model.angle_offset + i - 1),
                _ => Some(model.angle_offset + i),
            };
            th[i] = col.map_or(0.0, |c| x[c]);
        }
        let p_e = model.lap.mat_vec(&th);
        for i in 0..n {
            let mut y = 0.0;
            for (cij, xj) in model.ss.c.row(i).iter().zip(x) {
                y += cij * xj;
            }
            for (dij, uj) in model.ss.d.row(i).iter().zip(u) {
                y += dij * uj;
            }
            omega[i].push(y);
            theta[i].push(th[i]);
        }
        for (slot, &bus) in model.inverter_rows.iter().enumerate() {
            inv_power[slot].push(p_e[bus] - u[bus]);
        }
    };

    record(&x, 0.0, &mut omega, &mut theta, &mut inv_power);
    for k in 1..times.len() {
        let t_prev = times[k - 1];
        step_with_split(
            &mut rk4,
            &mut deriv,
            t_prev,
            &mut x,
            scenario.dt,
            scenario.t_step,
            &scenario.u0,
            &zero_u,
        );
        record(&x, times[k], &mut omega, &mut theta, &mut inv_power);
    }
    Ok(Trajectory {
        times,
        omega,
        theta,
        inverter_power: inv_power,
        inverter_ids: model.inverter_ids.clone(),
        step_time: scenario.t_step,
        sync_lost: None,
    })
}

/// Offset deadband: zero inside the band, shifted by the band outside.
fn deadband(x: f64, band: f64) -> f64 {
    if x > band {
        x - band
    } else if x < -band {
        x + band
    } else {
        0.0
    }
}

enum NlBus {
    /// ω and turbine states at (offset, offset+1).
    Generator {
        offset: usize,
        m: f64,
        d: f64,
        tau: f64,
        rt_inv: f64,
    },
    /// ω and droop-term states at (offset, offset+1).
    GffsFirstOrder {
        offset: usize,
        m: f64,
        d: f64,
        rho: f64,
        sigma: f64,
    },
    /// ω at offset (virtual inertia, or frequency shaping with zero g).
    FirstOrderInverter { offset: usize, m: f64, d: f64 },
    /// Memoryless.
    Load { d: f64 },
}

/// Nonlinear simulation: sine power flows around the case equilibrium and
/// turbine governor deadbands. The trajectory is truncated and flagged when
/// any line's angle difference exceeds π/2 (loss of synchronism).
pub fn simulate_nonlinear(case: &Case, scenario: &Scenario) -> Result<Trajectory, SimError> {
    if !scenario.nonlinear {
        return Err(SimError::ScenarioInvalid(
            "nonlinear simulation requires nonlinear = true",
        ));
    }
    let n = case.n();
    if scenario.u0.len() != n {
        return Err(SimError::ScenarioInvalid("u0 length must equal bus count"));
    }
    let db_pu = scenario.deadband_hz / case.nominal_hz;

    let mut buses = Vec::with_capacity(n);
    let mut offset = 0usize;
    for bus in case.buses() {
        let nb = match &bus.params {
            BusParams::Generator(p) => {
                let b = NlBus::Generator {
                    offset,
                    m: p.m,
                    d: p.d,
                    tau: p.tau,
                    rt_inv: p.rt_inv(),
                };
                offset += 2;
                b
            }
            BusParams::Inverter(Some(InverterControl::Gffs(p))) => match p.g {
                GOption::FirstOrder { rho, sigma } => {
                    let b = NlBus::GffsFirstOrder {
                        offset,
                        m: p.m,
                        d: p.d,
                        rho,
                        sigma,
                    };
                    offset += 2;
                    b
                }
                GOption::Zero => {
                    let b = NlBus::FirstOrderInverter {
                        offset,
                        m: p.m,
                        d: p.d,
                    };
                    offset += 1;
                    b
                }
            },
            BusParams::Inverter(Some(InverterControl::Gfvi(p))) => {
                let b = NlBus::FirstOrderInverter {
                    offset,
                    m: p.m,
                    d: p.d,
                };
                offset += 1;
                b
            }
            BusParams::Inverter(None) => return Err(SimError::UnassignedInverter(bus.id)),
            BusParams::Load(p) => NlBus::Load { d: p.d },
        };
        buses.push(nb);
    }
    let theta_offset = offset;
    let nx = offset + n;

    // Precomputed line data: (i, j, |V_i||V_j| b, equilibrium flow).
    let lines: Vec<(usize, usize, f64, f64)> = case
        .lines()
        .iter()
        .map(|l| {
            let i = case.index_of(l.from).expect("validated endpoint");
            let j = case.index_of(l.to).expect("validated endpoint");
            let w = case.buses()[i].voltage_mag * case.buses()[j].voltage_mag * l.b;
            let eq = w * float::sin(case.buses()[i].angle0 - case.buses()[j].angle0);
            (i, j, w, eq)
        })
        .collect();

    let mut x = vec![0.0; nx];
    for (i, bus) in case.buses().iter().enumerate() {
        x[theta_offset + i] = bus.angle0;
    }

    let zero_u = vec![0.0; n];
    let times = sample_times(scenario);

    // Deviation flows p_e − p_e(θ0) per bus.
    let flow_dev = |x: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(i, j, w, eq) in &lines {
            let f = w * float::sin(x[theta_offset + i] - x[theta_offset + j]) - eq;
            out[i] += f;
            out[j] -= f;
        }
    };

    let mut p_dev = vec![0.0; n];
    let mut deriv = |u: &[f64], x: &[f64], out: &mut [f64]| {
        let mut p_dev = vec![0.0; n];
        flow_dev(x, &mut p_dev);
        for (i, nb) in buses.iter().enumerate() {
            let u_p = u[i] - p_dev[i];
            let theta_dot = match nb {
                NlBus::Generator {
                    offset,
                    m,
                    d,
                    tau,
                    rt_inv,
                } => {
                    let w = x[*offset];
                    let p_t = x[*offset + 1];
                    out[*offset] = (u_p - d * w + p_t) / m;
                    out[*offset + 1] = (-p_t - rt_inv * deadband(w, db_pu)) / tau;
                    w
                }
                NlBus::GffsFirstOrder {
                    offset,
                    m,
                    d,
                    rho,
                    sigma,
                } => {
                    let w = x[*offset];
                    let g = x[*offset + 1];
                    out[*offset] = (u_p - d * w + g) / m;
                    out[*offset + 1] = (-g + rho * w) / sigma;
                    w
                }
                NlBus::FirstOrderInverter { offset, m, d } => {
                    let w = x[*offset];
                    out[*offset] = (u_p - d * w) / m;
                    w
                }
                NlBus::Load { d } => u_p / d,
            };
            out[theta_offset + i] = theta_dot;
        }
    };

    let inverter_rows: Vec<usize> = case.inverters().map(|(i, _)| i).collect();
    let inverter_ids: Vec<BusId> = inverter_rows.iter().map(|&i| case.buses()[i].id).collect();
    let mut omega = vec![Vec::with_capacity(times.len()); n];
    let mut theta = vec![Vec::with_capacity(times.len()); n];
    let mut inv_power = vec![Vec::with_capacity(times.len()); inverter_rows.len()];

    let record = |x: &[f64],
                      t: f64,
                      p_dev: &mut Vec<f64>,
                      omega: &mut Vec<Vec<f64>>,
                      theta: &mut Vec<Vec<f64>>,
                      inv_power: &mut Vec<Vec<f64>>| {
        let u: &[f64] = if t >= scenario.t_step {
            &scenario.u0
        } else {
            &zero_u
        };
        flow_dev(x, p_dev);
        for (i, nb) in buses.iter().enumerate() {
            let w = match nb {
                NlBus::Generator { offset, .. }
                | NlBus::GffsFirstOrder { offset, .. }
                | NlBus::FirstOrderInverter { offset, .. } => x[*offset],
                NlBus::Load { d } => (u[i] - p_dev[i]) / d,
            };
            omega[i].push(w);
            theta[i].push(x[theta_offset + i]);
        }
        for (slot, &busi) in inverter_rows.iter().enumerate() {
            inv_power[slot].push(p_dev[busi] - u[busi]);
        }
    };

    let mut rk4 = Rk4::new(nx);
    record(&x, 0.0, &mut p_dev, &mut omega, &mut theta, &mut inv_power);
    let mut sync_lost = None;
    let mut recorded = 1usize;
    for k in 1..times.len() {
        let t_prev = times[k - 1];
        step_with_split(
            &mut rk4,
            &mut deriv,
            t_prev,
            &mut x,
            scenario.dt,
            scenario.t_step,
            &scenario.u0,
            &zero_u,
        );
        record(&x, times[k], &mut p_dev, &mut omega, &mut theta, &mut inv_power);
        recorded += 1;
        let lost = lines.iter().any(|&(i, j, _, _)| {
            float::abs(x[theta_offset + i] - x[theta_offset + j]) > core::f64::consts::FRAC_PI_2
        });
        if lost {
            sync_lost = Some(times[k]);
            break;
        }
    }
    let times = times[..recorded].to_vec();
    Ok(Trajectory {
        times,
        omega,
        theta,
        inverter_power: inv_power,
        inverter_ids,
        step_time: scenario.t_step,
        sync_lost,
    })
}

/// Center-of-inertia frequency: the inertia-weighted average over buses
/// (loads carry zero weight). Identically zero when the case has no
/// inertia at all.
pub fn coi_frequency(traj: &Trajectory, case: &Case) -> Vec<f64> {
    let weights: Vec<f64> = case.buses().iter().map(|b| b.inertia()).collect();
    let total: f64 = weights.iter().sum();
    let t_len = traj.times.len();
    let mut coi = vec![0.0; t_len];
    if total == 0.0 {
        return coi;
    }
    for (w, series) in weights.iter().zip(&traj.omega) {
        if *w == 0.0 {
            continue;
        }
        for (acc, v) in coi.iter_mut().zip(series) {
            *acc += w * v;
        }
    }
    for v in &mut coi {
        *v /= total;
    }
    coi
}

/// Nadir, RoCoF, steady-state, and overshoot summary of the CoI signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Extreme post-step CoI deviation (signed; the direction follows the
    /// steady state, or the largest magnitude when the steady state is
    /// exactly zero).
    pub nadir: f64,
    /// `max |Δω/Δt|` over single-step windows.
    pub rocof_peak: f64,
    /// Signed one-`dt` difference quotient at the step instant.
    pub rocof_instant: f64,
    /// Largest 500 ms mean slope magnitude.
    pub rocof_window: f64,
    /// Mean CoI deviation over the final 10% of the horizon.
    pub ss_dev: f64,
    /// `|nadir − ss_dev| / |ss_dev|`, zero when `ss_dev` is zero.
    pub overshoot_ratio: f64,
    pub flags: Vec<String>,
}

pub fn compute_metrics(traj: &Trajectory, case: &Case) -> Metrics {
    let coi = coi_frequency(traj, case);
    let t_len = coi.len();
    let dt = if t_len > 1 {
        traj.times[1] - traj.times[0]
    } else {
        0.0
    };
    let mut flags = Vec::new();
    if let Some(t) = traj.sync_lost {
        flags.push(alloc::format!("sync_lost_at_{t}"));
    }
    // Horizon warning against the coherent time constant when computable.
    let total_inertia: f64 = case.buses().iter().map(|b| b.inertia()).sum();
    if let Ok(b_dc) = coherent_dc_denominator(case) {
        if b_dc > 0.0 {
            let tau_coherent = total_inertia / b_dc;
            if traj.times.last().copied().unwrap_or(0.0) - traj.step_time < 10.0 * tau_coherent {
                flags.push(String::from("short_horizon"));
            }
        }
    }

    let ss_window = (t_len / 10).max(1);
    let ss_dev = coi[t_len - ss_window..].iter().sum::<f64>() / ss_window as f64;

    let step_idx = traj
        .times
        .iter()
        .position(|&t| t >= traj.step_time)
        .unwrap_or(0);
    let post = &coi[step_idx..];
    let nadir = if post.is_empty() {
        0.0
    } else if ss_dev < 0.0 {
        post.iter().copied().fold(f64::INFINITY, f64::min)
    } else if ss_dev > 0.0 {
        post.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        post.iter()
            .copied()
            .fold(0.0, |acc, v| if float::abs(v) > float::abs(acc) { v } else { acc })
    };
    let overshoot_ratio = if ss_dev == 0.0 {
        0.0
    } else {
        float::abs(nadir - ss_dev) / float::abs(ss_dev)
    };

    let mut rocof_peak = 0.0f64;
    if dt > 0.0 {
        for w in coi.windows(2) {
            rocof_peak = rocof_peak.max(float::abs(w[1] - w[0]) / dt);
        }
    }
    let rocof_instant = if dt > 0.0 && step_idx + 1 < t_len {
        (coi[step_idx + 1] - coi[step_idx]) / dt
    } else {
        0.0
    };
    let mut rocof_window = 0.0f64;
    if dt > 0.0 {
        let w = ((0.5 / dt) as usize).max(1);
        if w < t_len {
            for k in 0..t_len - w {
                rocof_window =
                    rocof_window.max(float::abs(coi[k + w] - coi[k]) / (w as f64 * dt));
            }
        }
    }

    Metrics {
        nadir,
        rocof_peak,
        rocof_instant,
        rocof_window,
        ss_dev,
        overshoot_ratio,
        flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bus::{GeneratorParams, GfviParams, LoadParams};
    use crate::net::{Bus, Line};
    use approx::assert_abs_diff_eq;

    fn bus(id: BusId, params: BusParams) -> Bus {
        Bus {
            id,
            voltage_mag: 1.0,
            angle0: 0.0,
            params,
        }
    }

    fn single_inverter_case(m: f64, d: f64) -> Case {
        Case::new(
            vec![bus(
                0,
                BusParams::Inverter(Some(InverterControl::Gfvi(
                    GfviParams::new(m, d).unwrap(),
                ))),
            )],
            vec![],
            100.0,
            50.0,
        )
        .unwrap()
    }

    fn gen_load_case() -> Case {
        Case::new(
            vec![
                bus(
                    0,
                    BusParams::Generator(GeneratorParams::new(1.0, 1.0, 1.0, 1.0).unwrap()),
                ),
                bus(1, BusParams::Load(LoadParams::new(0.05).unwrap())),
            ],
            vec![Line {
                from: 0,
                to: 1,
                b: 10.0,
            }],
            100.0,
            50.0,
        )
        .unwrap()
    }

    #[test]
    fn scenario_resolution_floor() {
        assert!(Scenario::new(vec![0.0], 1.0, 30.0, 0.001, 0.0, false).is_ok());
        assert!(Scenario::new(vec![0.0], 1.0, 2.0, 0.5, 0.0, false).is_err());
        assert!(Scenario::new(vec![0.0], 1.0, 0.5, 0.001, 0.0, false).is_err());
    }

    #[test]
    fn single_generator_eigen_structure() {
        // Open loop (n = 1, no lines): A is the generator companion matrix.
        let p = GeneratorParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let case = Case::new(vec![bus(0, BusParams::Generator(p))], vec![], 100.0, 50.0).unwrap();
        let model = assemble_linear(&case).unwrap();
        assert_eq!(model.ss.n_states(), 2);
        // Companion of s² + 2s + 2.
        assert_eq!(model.ss.a.row(0), &[0.0, 1.0]);
        assert_eq!(model.ss.a.row(1), &[-2.0, -2.0]);
    }

    #[test]
    fn generator_load_state_dimension() {
        // 2 generator states + 1 relative angle after grounding.
        let model = assemble_linear(&gen_load_case()).unwrap();
        assert_eq!(model.ss.n_states(), 3);
        assert_eq!(model.ss.n_inputs(), 2);
        assert_eq!(model.ss.n_outputs(), 2);
        // Ungrounded keeps both angles.
        let full = assemble_linear_with(&gen_load_case(), Grounding::None).unwrap();
        assert_eq!(full.ss.n_states(), 4);
    }

    #[test]
    fn zero_disturbance_stays_at_equilibrium() {
        let case = gen_load_case();
        let model = assemble_linear(&case).unwrap();
        let scenario = Scenario::new(vec![0.0, 0.0], 1.0, 5.0, 0.001, 0.0, false).unwrap();
        let traj = integrate_linear(&model, &scenario).unwrap();
        for series in &traj.omega {
            assert!(series.iter().all(|&v| v == 0.0));
        }

        let nl = Scenario::new(vec![0.0, 0.0], 1.0, 5.0, 0.001, 0.036, true).unwrap();
        let traj = simulate_nonlinear(&case, &nl).unwrap();
        for series in &traj.omega {
            assert!(series.iter().all(|&v| v.abs() < 1e-15));
        }
        assert!(traj.sync_lost.is_none());
    }

    #[test]
    fn first_order_step_matches_closed_form() {
        // Coherent model 1/(10s + 8) under a −0.3 step at t = 1.
        let case = single_inverter_case(10.0, 8.0);
        let model = assemble_linear(&case).unwrap();
        let scenario = Scenario::new(vec![-0.3], 1.0, 30.0, 0.001, 0.0, false).unwrap();
        let traj = integrate_linear(&model, &scenario).unwrap();
        let (a, b, u0) = (10.0, 8.0, -0.3);
        for (k, &t) in traj.times.iter().enumerate() {
            let expect = if t < 1.0 {
                0.0
            } else {
                (u0 / b) * (1.0 - (-(b / a) * (t - 1.0)).exp())
            };
            assert_abs_diff_eq!(traj.omega[0][k], expect, epsilon = 1e-6);
        }
    }

    #[test]
    fn halving_dt_converges() {
        let case = single_inverter_case(10.0, 8.0);
        let model = assemble_linear(&case).unwrap();
        let coarse = Scenario::new(vec![-0.3], 1.0, 10.0, 0.002, 0.0, false).unwrap();
        let fine = Scenario::new(vec![-0.3], 1.0, 10.0, 0.001, 0.0, false).unwrap();
        let tc = integrate_linear(&model, &coarse).unwrap();
        let tf = integrate_linear(&model, &fine).unwrap();
        let last_c = *tc.omega[0].last().unwrap();
        let last_f = *tf.omega[0].last().unwrap();
        assert!((last_c - last_f).abs() < 1e-8);
    }

    #[test]
    fn small_disturbance_within_deadband_keeps_turbines_idle() {
        let case = gen_load_case();
        // Deadband 0.036 Hz = 7.2e-4 p.u. at 50 Hz; keep |ω| below it.
        let scenario = Scenario::new(vec![-5e-4, 0.0], 0.5, 25.0, 0.001, 0.036, true).unwrap();
        let traj = simulate_nonlinear(&case, &scenario).unwrap();
        // Steady state set by damping alone: d_gen + d_load = 1.05, so
        // |ω_ss| ≈ 5e-4/1.05 < deadband. With the turbine engaged the
        // level would be 5e-4/2.05 instead; settling at the damping-only
        // value shows the turbine stayed idle.
        let last = *traj.omega[0].last().unwrap();
        assert_abs_diff_eq!(last, -5e-4 / 1.05, epsilon = 1e-8);
    }

    #[test]
    fn deadband_free_nonlinear_matches_linear_for_small_steps() {
        // A weak line keeps the angle excursion large enough that the sine
        // nonlinearity dominates integrator roundoff at every scale.
        let case = Case::new(
            vec![
                bus(
                    0,
                    BusParams::Generator(GeneratorParams::new(1.0, 1.0, 1.0, 1.0).unwrap()),
                ),
                bus(1, BusParams::Load(LoadParams::new(0.05).unwrap())),
            ],
            vec![Line {
                from: 0,
                to: 1,
                b: 0.5,
            }],
            100.0,
            50.0,
        )
        .unwrap();
        let model = assemble_linear(&case).unwrap();
        let mut prev_ratio = f64::INFINITY;
        for &c in &[1e-2, 1e-3, 1e-4] {
            let u0 = vec![-3.0 * c, 0.0];
            let lin = Scenario::new(u0.clone(), 0.5, 8.0, 0.001, 0.0, false).unwrap();
            let nl = Scenario::new(u0, 0.5, 8.0, 0.001, 0.0, true).unwrap();
            let tl = integrate_linear(&model, &lin).unwrap();
            let tn = simulate_nonlinear(&case, &nl).unwrap();
            let mut max_gap = 0.0f64;
            for i in 0..case.n() {
                for (a, b) in tl.omega[i].iter().zip(&tn.omega[i]) {
                    max_gap = max_gap.max((a - b).abs());
                }
            }
            let ratio = max_gap / c;
            assert!(
                ratio < prev_ratio,
                "linearization error must shrink with amplitude"
            );
            prev_ratio = ratio;
        }
    }

    #[test]
    fn sync_loss_truncates_and_flags() {
        // Weak line and a huge step: angles separate beyond π/2.
        let case = Case::new(
            vec![
                bus(
                    0,
                    BusParams::Generator(GeneratorParams::new(1.0, 1.0, 1.0, 1.0).unwrap()),
                ),
                bus(1, BusParams::Load(LoadParams::new(0.05).unwrap())),
            ],
            vec![Line {
                from: 0,
                to: 1,
                b: 0.2,
            }],
            100.0,
            50.0,
        )
        .unwrap();
        let scenario = Scenario::new(vec![0.0, -0.5], 0.5, 20.0, 0.001, 0.0, true).unwrap();
        let traj = simulate_nonlinear(&case, &scenario).unwrap();
        assert!(traj.sync_lost.is_some());
        assert!(traj.times.len() < 20_001);
        assert_eq!(traj.times.len(), traj.omega[0].len());
    }

    #[test]
    fn coi_weighting() {
        let case = Case::new(
            vec![
                bus(
                    0,
                    BusParams::Inverter(Some(InverterControl::Gfvi(
                        GfviParams::new(1.0, 1.0).unwrap(),
                    ))),
                ),
                bus(
                    1,
                    BusParams::Inverter(Some(InverterControl::Gfvi(
                        GfviParams::new(3.0, 1.0).unwrap(),
                    ))),
                ),
            ],
            vec![Line {
                from: 0,
                to: 1,
                b: 10.0,
            }],
            100.0,
            50.0,
        )
        .unwrap();
        let traj = Trajectory {
            times: vec![0.0],
            omega: vec![vec![0.4], vec![0.0]],
            theta: vec![vec![0.0], vec![0.0]],
            inverter_power: vec![vec![0.0], vec![0.0]],
            inverter_ids: vec![0, 1],
            step_time: 0.0,
            sync_lost: None,
        };
        let coi = coi_frequency(&traj, &case);
        assert_abs_diff_eq!(coi[0], 0.1);
    }

    #[test]
    fn metrics_on_monotone_and_flat_signals() {
        let case = single_inverter_case(10.0, 8.0);
        let model = assemble_linear(&case).unwrap();
        let scenario = Scenario::new(vec![-0.3], 1.0, 30.0, 0.001, 0.0, false).unwrap();
        let traj = integrate_linear(&model, &scenario).unwrap();
        let m = compute_metrics(&traj, &case);
        assert!(m.overshoot_ratio < 1e-3);
        assert_abs_diff_eq!(m.ss_dev, -0.0375, epsilon = 1e-6);
        assert_abs_diff_eq!(m.rocof_instant, -0.03, epsilon = 1e-4);

        let flat = Trajectory {
            times: (0..=100).map(|k| k as f64 * 0.01).collect(),
            omega: vec![vec![0.0; 101]],
            theta: vec![vec![0.0; 101]],
            inverter_power: vec![vec![0.0; 101]],
            inverter_ids: vec![0],
            step_time: 0.0,
            sync_lost: None,
        };
        let m = compute_metrics(&flat, &case);
        assert_eq!(m.nadir, 0.0);
        assert_eq!(m.ss_dev, 0.0);
        assert_eq!(m.overshoot_ratio, 0.0);
        assert_eq!(m.rocof_peak, 0.0);
    }

    #[test]
    fn momentum_balance_without_damping_paths() {
        // Test-only configuration: no turbines (rt = inf), no loads, no
        // damping on the swing states is not constructible (d > 0), so use
        // a tiny d and verify the momentum ramp against Σu0·(t−t_step)
        // with the matching damping correction term removed analytically:
        // with d → 0 the correction vanishes; here we just verify the
        // integrator momentum error against the exact linear ODE solution
        // computed with the same tiny damping.
        let d_small = 1e-9;
        let m1 = 2.0;
        let m2 = 3.0;
        let case = Case::new(
            vec![
                bus(
                    0,
                    BusParams::Inverter(Some(InverterControl::Gfvi(
                        GfviParams::new(m1, d_small).unwrap(),
                    ))),
                ),
                bus(
                    1,
                    BusParams::Inverter(Some(InverterControl::Gfvi(
                        GfviParams::new(m2, d_small).unwrap(),
                    ))),
                ),
            ],
            vec![Line {
                from: 0,
                to: 1,
                b: 5.0,
            }],
            100.0,
            50.0,
        )
        .unwrap();
        let scenario = Scenario::new(vec![-0.2, 0.05], 0.5, 10.0, 0.001, 0.0, true).unwrap();
        let traj = simulate_nonlinear(&case, &scenario).unwrap();
        let u_sum = -0.15;
        for (k, &t) in traj.times.iter().enumerate() {
            let momentum = m1 * traj.omega[0][k] + m2 * traj.omega[1][k];
            let expect = if t < 0.5 { 0.0 } else { u_sum * (t - 0.5) };
            // 1e-8 per unit time, plus the tiny-damping drift bound.
            let slack = 1e-8 * (1.0 + t) + d_small * u_sum.abs() * t * t;
            assert!(
                (momentum - expect).abs() <= slack,
                "momentum drift {} at t={t}",
                (momentum - expect).abs()
            );
        }
    }
}
