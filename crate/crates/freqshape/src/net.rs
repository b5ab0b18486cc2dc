//! Network cases: buses, lines, validation, the angle-coupling Laplacian,
//! and the per-bus coupling-strength bounds used by certification.

use alloc::vec;
use alloc::vec::Vec;

use crate::bus::{GeneratorParams, GffsParams, GfviParams, LoadParams};
use crate::float;
use crate::matrix::Matrix;
use crate::ratfun::RatFun;

pub type BusId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationError {
    EmptyCase,
    DuplicateBusId(BusId),
    UnknownBusId(BusId),
    SelfLoop(BusId),
    DuplicateLine(BusId, BusId),
    Disconnected,
    NotAnInverter(BusId),
    /// A case-level or per-bus quantity that must be strictly positive
    /// (and finite) was not. Carries the offending field name.
    NonPositive(&'static str),
}

impl core::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::EmptyCase => write!(f, "case has no buses"),
            Self::DuplicateBusId(id) => write!(f, "duplicate bus id {id}"),
            Self::UnknownBusId(id) => write!(f, "line endpoint references unknown bus {id}"),
            Self::SelfLoop(id) => write!(f, "line connects bus {id} to itself"),
            Self::DuplicateLine(i, j) => write!(f, "more than one line between buses {i} and {j}"),
            Self::Disconnected => write!(f, "line graph does not span all buses"),
            Self::NotAnInverter(id) => write!(f, "bus {id} is not an inverter bus"),
            Self::NonPositive(what) => write!(f, "`{what}` must be positive and finite"),
        }
    }
}

impl core::error::Error for ValidationError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Generator,
    Inverter,
    Load,
}

/// Controller assigned to an inverter bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InverterControl {
    Gfvi(GfviParams),
    Gffs(GffsParams),
}

impl InverterControl {
    pub fn tf(&self) -> RatFun {
        match self {
            Self::Gfvi(p) => p.tf(),
            Self::Gffs(p) => p.tf(),
        }
    }

    /// Synthetic inertia of the controller (used for CoI weighting).
    pub fn inertia(&self) -> f64 {
        match self {
            Self::Gfvi(p) => p.m,
            Self::Gffs(p) => p.m,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BusParams {
    Generator(GeneratorParams),
    /// Inverter, with the controller either already assigned or left for
    /// synthesis to fill in.
    Inverter(Option<InverterControl>),
    Load(LoadParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: BusId,
    /// Constant voltage magnitude |V| (p.u.).
    pub voltage_mag: f64,
    /// Equilibrium angle (rad).
    pub angle0: f64,
    pub params: BusParams,
}

impl Bus {
    pub fn kind(&self) -> BusKind {
        match self.params {
            BusParams::Generator(_) => BusKind::Generator,
            BusParams::Inverter(_) => BusKind::Inverter,
            BusParams::Load(_) => BusKind::Load,
        }
    }

    /// The bus transfer function; `None` for an inverter with no controller
    /// assigned yet.
    pub fn tf(&self) -> Option<RatFun> {
        match &self.params {
            BusParams::Generator(p) => Some(p.tf()),
            BusParams::Inverter(ctl) => ctl.as_ref().map(|c| c.tf()),
            BusParams::Load(p) => Some(p.tf()),
        }
    }

    /// Inertia entering the center-of-inertia weighting (zero for loads and
    /// unassigned inverters).
    pub fn inertia(&self) -> f64 {
        match &self.params {
            BusParams::Generator(p) => p.m,
            BusParams::Inverter(Some(c)) => c.inertia(),
            BusParams::Inverter(None) => 0.0,
            BusParams::Load(_) => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub from: BusId,
    pub to: BusId,
    /// Line susceptance (p.u.), strictly positive.
    pub b: f64,
}

/// A validated network case. Buses are stored sorted by ascending id; all
/// matrix/vector quantities index buses in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    buses: Vec<Bus>,
    lines: Vec<Line>,
    pub base_mva: f64,
    pub nominal_hz: f64,
}

fn positive_finite(v: f64, what: &'static str) -> Result<(), ValidationError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ValidationError::NonPositive(what))
    }
}

impl Case {
    pub fn new(
        mut buses: Vec<Bus>,
        lines: Vec<Line>,
        base_mva: f64,
        nominal_hz: f64,
    ) -> Result<Self, ValidationError> {
        if buses.is_empty() {
            return Err(ValidationError::EmptyCase);
        }
        positive_finite(base_mva, "base_mva")?;
        positive_finite(nominal_hz, "nominal_hz")?;
        buses.sort_by_key(|b| b.id);
        for pair in buses.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(ValidationError::DuplicateBusId(pair[0].id));
            }
        }
        for bus in &buses {
            positive_finite(bus.voltage_mag, "v")?;
            if !bus.angle0.is_finite() {
                return Err(ValidationError::NonPositive("theta0"));
            }
            match &bus.params {
                BusParams::Generator(p) => {
                    positive_finite(p.m, "m")?;
                    positive_finite(p.d, "d")?;
                    positive_finite(p.tau, "tau")?;
                    positive_finite(p.rt, "rt")?;
                }
                BusParams::Load(p) => positive_finite(p.d, "d")?,
                BusParams::Inverter(Some(InverterControl::Gfvi(p))) => {
                    positive_finite(p.m, "m_v")?;
                    positive_finite(p.d, "d_v")?;
                }
                BusParams::Inverter(Some(InverterControl::Gffs(p))) => {
                    positive_finite(p.m, "m_inv")?;
                    positive_finite(p.d, "d_inv")?;
                    if let crate::bus::GOption::FirstOrder { rho, sigma } = p.g {
                        positive_finite(rho, "rho")?;
                        positive_finite(sigma, "sigma")?;
                    }
                }
                BusParams::Inverter(None) => {}
            }
        }
        let find = |id: BusId| buses.binary_search_by_key(&id, |b| b.id);
        for line in &lines {
            if line.from == line.to {
                return Err(ValidationError::SelfLoop(line.from));
            }
            if find(line.from).is_err() {
                return Err(ValidationError::UnknownBusId(line.from));
            }
            if find(line.to).is_err() {
                return Err(ValidationError::UnknownBusId(line.to));
            }
            positive_finite(line.b, "b")?;
        }
        for (k, a) in lines.iter().enumerate() {
            for b in &lines[k + 1..] {
                let same = (a.from == b.from && a.to == b.to) || (a.from == b.to && a.to == b.from);
                if same {
                    return Err(ValidationError::DuplicateLine(a.from, a.to));
                }
            }
        }
        let case = Self {
            buses,
            lines,
            base_mva,
            nominal_hz,
        };
        if !check_connected(&case) {
            return Err(ValidationError::Disconnected);
        }
        Ok(case)
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn n(&self) -> usize {
        self.buses.len()
    }

    pub fn index_of(&self, id: BusId) -> Option<usize> {
        self.buses.binary_search_by_key(&id, |b| b.id).ok()
    }

    pub fn bus(&self, id: BusId) -> Option<&Bus> {
        self.index_of(id).map(|i| &self.buses[i])
    }

    pub fn indices_of_kind(&self, kind: BusKind) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.buses[i].kind() == kind).collect()
    }

    pub fn generators(&self) -> impl Iterator<Item = (usize, &GeneratorParams)> {
        self.buses.iter().enumerate().filter_map(|(i, b)| match &b.params {
            BusParams::Generator(p) => Some((i, p)),
            _ => None,
        })
    }

    pub fn inverters(&self) -> impl Iterator<Item = (usize, Option<&InverterControl>)> {
        self.buses.iter().enumerate().filter_map(|(i, b)| match &b.params {
            BusParams::Inverter(c) => Some((i, c.as_ref())),
            _ => None,
        })
    }

    pub fn loads(&self) -> impl Iterator<Item = (usize, &LoadParams)> {
        self.buses.iter().enumerate().filter_map(|(i, b)| match &b.params {
            BusParams::Load(p) => Some((i, p)),
            _ => None,
        })
    }

    pub fn sum_generator_inertia(&self) -> f64 {
        self.generators().map(|(_, p)| p.m).sum()
    }

    pub fn sum_generator_damping(&self) -> f64 {
        self.generators().map(|(_, p)| p.d).sum()
    }

    pub fn sum_load_damping(&self) -> f64 {
        self.loads().map(|(_, p)| p.d).sum()
    }

    /// Turbine stages `(r_t⁻¹, τ)` of all generators, in ascending bus-id
    /// order.
    pub fn turbine_stages(&self) -> Vec<(f64, f64)> {
        self.generators().map(|(_, p)| (p.rt_inv(), p.tau)).collect()
    }

    /// A copy of the case with the controller of inverter `id` replaced.
    pub fn with_inverter_control(
        &self,
        id: BusId,
        control: InverterControl,
    ) -> Result<Self, ValidationError> {
        self.with_inverter_controls([(id, control)])
    }

    /// A copy of the case with the listed inverter controllers assigned.
    pub fn with_inverter_controls(
        &self,
        assignments: impl IntoIterator<Item = (BusId, InverterControl)>,
    ) -> Result<Self, ValidationError> {
        let mut out = self.clone();
        for (id, control) in assignments {
            let idx = out.index_of(id).ok_or(ValidationError::UnknownBusId(id))?;
            match &mut out.buses[idx].params {
                BusParams::Inverter(slot) => *slot = Some(control),
                _ => return Err(ValidationError::NotAnInverter(id)),
            }
        }
        Ok(out)
    }
}

/// True iff the line graph spans all buses (breadth-first search). A single
/// bus with no lines is vacuously connected.
pub fn check_connected(case: &Case) -> bool {
    let n = case.n();
    if n <= 1 {
        return true;
    }
    let mut adj = vec![Vec::new(); n];
    for line in case.lines() {
        let (i, j) = (
            case.index_of(line.from).expect("validated endpoint"),
            case.index_of(line.to).expect("validated endpoint"),
        );
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut seen = vec![false; n];
    let mut queue = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                count += 1;
                queue.push(j);
            }
        }
    }
    count == n
}

/// Undirected weighted Laplacian of the linearized angle coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    mat: Matrix,
}

impl Laplacian {
    pub fn n(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.mat[(i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.mat.row(i)
    }

    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        self.mat.mat_vec(x)
    }
}

/// Builds the Laplacian with off-diagonals
/// `-|V_i||V_j| b_ij cos(θ0_i − θ0_j)` and diagonals set to the negated row
/// sums. Each unordered pair is computed once, so the matrix is exactly
/// symmetric and its rows sum to zero up to the additions on the diagonal.
pub fn build_laplacian(case: &Case) -> Laplacian {
    let n = case.n();
    let mut mat = Matrix::zeros(n, n);
    for line in case.lines() {
        let i = case.index_of(line.from).expect("validated endpoint");
        let j = case.index_of(line.to).expect("validated endpoint");
        let (bi, bj) = (&case.buses()[i], &case.buses()[j]);
        let w = bi.voltage_mag * bj.voltage_mag * line.b * float::cos(bi.angle0 - bj.angle0);
        mat[(i, j)] -= w;
        mat[(j, i)] -= w;
        mat[(i, i)] += w;
        mat[(j, j)] += w;
    }
    Laplacian { mat }
}

/// Coupling-strength bounds `γ_i = 2 Σ_j V̄_i V̄_j b_ij` over the lines at
/// bus `i`, with `V̄ = v_max_factor · |V|` the maximum allowable voltage
/// magnitude (callers pass a factor ≥ 1). The factor enters as an exact
/// square so the bounds scale quadratically in it.
pub fn coupling_bounds(case: &Case, v_max_factor: f64) -> Vec<f64> {
    let mut gamma = vec![0.0; case.n()];
    for line in case.lines() {
        let i = case.index_of(line.from).expect("validated endpoint");
        let j = case.index_of(line.to).expect("validated endpoint");
        let w = 2.0 * case.buses()[i].voltage_mag * case.buses()[j].voltage_mag * line.b;
        gamma[i] += w;
        gamma[j] += w;
    }
    let f2 = v_max_factor * v_max_factor;
    for g in &mut gamma {
        *g *= f2;
    }
    gamma
}
