//! Classical dynamics on the coherent-state manifold.
//!
//! The flow is variational: with the Kaehler potential K = ln(v†v) of the
//! holomorphic family v(psi), the equations of motion are
//! i hbar G psi_dot = d<H>/d(conj psi) with metric G = d2 K / dpsi dconj(psi).
//! Inverting G gives the `MetricConsistent` right-hand side
//! psi_dot = -(i/hbar) (1 + |psi|^2) (I + psi psi†) grad; the
//! `PaperLiteral` variant keeps the diagonal (1 + |psi|^2)^2 factor of the
//! printed equations for side-by-side study. Trajectories switch to the
//! best-conditioned projective chart when coordinates blow up, so flows
//! through the antipodal point of the chart remain integrable.

use std::cell::RefCell;
use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::algebra;
use crate::coherent::CoherentState;
use crate::error::Error;
use crate::hamiltonian::HamiltonianSpec;
use crate::linalg::{self, CMatrix, CVector, C_I};
use crate::ode::Dopri5;
use crate::rep::RepresentationSpec;
use crate::Result;

/// Coordinate norm beyond which the integrator flips to another chart.
pub const CHART_FLIP_THRESHOLD: f64 = 1e6;

/// Largest Hilbert dimension accepted by the dense quantum oracle.
pub const ORACLE_DIM_CAP: usize = 64;

/// Which right-hand side to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum EomMode {
    /// Inverse Fubini-Study metric applied to the gradient (exact flow).
    MetricConsistent,
    /// Diagonal (1+|psi|^2)^2 prefactor exactly as printed.
    PaperLiteral,
}

/// Holomorphic coordinate chart on the state manifold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Chart {
    /// Projective chart of CP^(n-1): homogeneous component `pivot` is 1.
    Fundamental { n: usize, pivot: usize },
    /// SU(2) spin-J orbit; `reversed` pivots on the highest-weight end.
    SpinJ { two_j: usize, reversed: bool },
}

fn binom_sqrt(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut out = 1.0;
    for i in 0..k {
        out = out * (n - i) as f64 / (i + 1) as f64;
    }
    out.sqrt()
}

impl Chart {
    pub(crate) fn for_state(state: &CoherentState) -> Result<Self> {
        match state.spin_j {
            Some(j) => Ok(Chart::SpinJ {
                two_j: (2.0 * j).round() as usize,
                reversed: false,
            }),
            None => {
                if state.rep.n < 2 {
                    return Err(Error::InvalidDimension(state.rep.n));
                }
                Ok(Chart::Fundamental {
                    n: state.rep.n,
                    pivot: 0,
                })
            }
        }
    }

    pub(crate) fn params(&self) -> usize {
        match self {
            Chart::Fundamental { n, .. } => n - 1,
            Chart::SpinJ { .. } => 1,
        }
    }

    pub(crate) fn dim(&self) -> usize {
        match self {
            Chart::Fundamental { n, .. } => *n,
            Chart::SpinJ { two_j, .. } => two_j + 1,
        }
    }

    /// Hilbert index carrying coordinate `i` (fundamental charts).
    fn coord_index(&self, i: usize, pivot: usize) -> usize {
        if i < pivot {
            i
        } else {
            i + 1
        }
    }

    /// Unnormalized homogeneous representative of the coordinates.
    pub(crate) fn embed(&self, coords: &CVector) -> CVector {
        match self {
            Chart::Fundamental { n, pivot } => {
                let mut v = CVector::zeros(*n);
                v[*pivot] = linalg::C_ONE;
                for i in 0..(n - 1) {
                    v[self.coord_index(i, *pivot)] = coords[i];
                }
                v
            }
            Chart::SpinJ { two_j, reversed } => {
                let xi = coords[0];
                let dim = two_j + 1;
                let mut v = CVector::zeros(dim);
                let mut power = linalg::C_ONE;
                for k in 0..dim {
                    let pos = if *reversed { two_j - k } else { k };
                    v[pos] = power * linalg::cr(binom_sqrt(*two_j, k));
                    power *= xi;
                }
                v
            }
        }
    }

    /// Holomorphic tangent vectors dv/dcoord_i.
    fn tangent(&self, coords: &CVector, i: usize) -> CVector {
        match self {
            Chart::Fundamental { n, pivot } => {
                let mut w = CVector::zeros(*n);
                w[self.coord_index(i, *pivot)] = linalg::C_ONE;
                w
            }
            Chart::SpinJ { two_j, reversed } => {
                let xi = coords[0];
                let dim = two_j + 1;
                let mut w = CVector::zeros(dim);
                let mut power = linalg::C_ONE;
                for k in 1..dim {
                    let pos = if *reversed { two_j - k } else { k };
                    w[pos] = power * linalg::cr(k as f64 * binom_sqrt(*two_j, k));
                    power *= xi;
                }
                w
            }
        }
    }

    /// <H> as a function of the chart coordinates.
    pub(crate) fn expectation(&self, coords: &CVector, h: &CMatrix) -> f64 {
        let v = self.embed(coords);
        let n_sq = v.norm_squared();
        (v.dotc(&(h * &v)) / linalg::cr(n_sq)).re
    }

    /// Wirtinger gradient d<H>/d(conj coords).
    pub(crate) fn gradient(&self, coords: &CVector, h: &CMatrix) -> CVector {
        let v = self.embed(coords);
        let n_sq = v.norm_squared();
        let hv = h * &v;
        let mean = (v.dotc(&hv) / linalg::cr(n_sq)).re;
        match self {
            Chart::Fundamental { n, pivot } => CVector::from_fn(n - 1, |i, _| {
                let idx = self.coord_index(i, *pivot);
                (hv[idx] - v[idx] * linalg::cr(mean)) / linalg::cr(n_sq)
            }),
            Chart::SpinJ { .. } => {
                let w = self.tangent(coords, 0);
                let g = (w.dotc(&hv) - w.dotc(&v) * linalg::cr(mean)) / linalg::cr(n_sq);
                CVector::from_element(1, g)
            }
        }
    }

    /// Right-hand side of the equations of motion.
    pub(crate) fn rhs(&self, coords: &CVector, h: &CMatrix, mode: EomMode, hbar: f64) -> CVector {
        let grad = self.gradient(coords, h);
        let norm_factor = 1.0 + coords.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let prefactor = -C_I / linalg::cr(hbar);
        match self {
            Chart::Fundamental { .. } => match mode {
                EomMode::MetricConsistent => {
                    // (I + psi psi†) grad = grad + psi (psi† grad)
                    let dot = coords.dotc(&grad);
                    let vec = &grad + coords * dot;
                    vec * (prefactor * linalg::cr(norm_factor))
                }
                EomMode::PaperLiteral => {
                    grad * (prefactor * linalg::cr(norm_factor * norm_factor))
                }
            },
            Chart::SpinJ { two_j, .. } => {
                // both modes: the single-coordinate flow with the 2J weight
                grad * (prefactor * linalg::cr(norm_factor * norm_factor / *two_j as f64))
            }
        }
    }

    /// Coordinates of the same state in the standard (pivot-0) chart.
    fn chart_zero_coords(&self, coords: &CVector) -> CVector {
        match self {
            Chart::Fundamental { n, pivot } => {
                if *pivot == 0 {
                    coords.clone()
                } else {
                    let v = self.embed(coords);
                    CVector::from_fn(n - 1, |i, _| v[i + 1] / v[0])
                }
            }
            Chart::SpinJ { reversed, .. } => {
                if *reversed {
                    CVector::from_element(1, coords[0].finv())
                } else {
                    coords.clone()
                }
            }
        }
    }

    /// Move to the best-conditioned chart; returns the new coordinates.
    pub(crate) fn flip(&mut self, coords: &CVector) -> CVector {
        let v = self.embed(coords);
        match self {
            Chart::Fundamental { n, pivot } => {
                let mut best = 0usize;
                for k in 1..*n {
                    if v[k].norm_sqr() > v[best].norm_sqr() {
                        best = k;
                    }
                }
                *pivot = best;
                let mut out = CVector::zeros(*n - 1);
                let mut i = 0;
                for k in 0..*n {
                    if k != best {
                        out[i] = v[k] / v[best];
                        i += 1;
                    }
                }
                out
            }
            Chart::SpinJ { reversed, .. } => {
                *reversed = !*reversed;
                CVector::from_element(1, coords[0].finv())
            }
        }
    }

    pub(crate) fn pivot_id(&self) -> usize {
        match self {
            Chart::Fundamental { pivot, .. } => *pivot,
            Chart::SpinJ { reversed, .. } => usize::from(*reversed),
        }
    }
}

/// Wirtinger gradient d<H>/d(conj psi_i) of the normalized expectation.
pub fn grad_expectation(state: &CoherentState, h: &HamiltonianSpec) -> Result<CVector> {
    check_dims(state, h)?;
    let chart = Chart::for_state(state)?;
    Ok(chart.gradient(&state.psi, h.matrix()))
}

/// Coherent-state Lagrangian L = T_kin - <H> for given coordinate
/// velocities, where the kinetic term is
/// i hbar (sum_i conj(psi_i) psi_dot_i - c.c.) / (2 (1 + sum |psi_i|^2))
/// in fundamental mode and carries the J weight for spin-J states.
pub fn lagrangian(state: &CoherentState, psi_dot: &CVector, h: &HamiltonianSpec) -> Result<f64> {
    check_dims(state, h)?;
    if psi_dot.len() != state.psi.len() {
        return Err(Error::DimensionMismatch {
            expected: state.psi.len(),
            got: psi_dot.len(),
        });
    }
    let hbar = state.rep.hbar;
    let norm_factor = state.norm_factor();
    let k: Complex64 = state
        .psi
        .iter()
        .zip(psi_dot.iter())
        .map(|(p, d)| p.conj() * d)
        .sum();
    let weight = match state.spin_j {
        Some(j) => j * hbar / norm_factor,
        None => hbar / (2.0 * norm_factor),
    };
    let kinetic = C_I * linalg::cr(weight) * (k - k.conj());
    assert!(
        kinetic.im.abs() < 1e-12 * kinetic.norm().max(1.0),
        "kinetic term acquired an imaginary part: {}",
        kinetic.im
    );
    let energy = chart_energy(state, h)?;
    Ok(kinetic.re - energy)
}

fn chart_energy(state: &CoherentState, h: &HamiltonianSpec) -> Result<f64> {
    let chart = Chart::for_state(state)?;
    Ok(chart.expectation(&state.psi, h.matrix()))
}

fn check_dims(state: &CoherentState, h: &HamiltonianSpec) -> Result<()> {
    if h.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: h.dim(),
        });
    }
    Ok(())
}

/// Coordinate velocity of the classical flow at the given state.
pub fn eom_rhs(state: &CoherentState, h: &HamiltonianSpec, mode: EomMode) -> Result<CVector> {
    check_dims(state, h)?;
    let chart = Chart::for_state(state)?;
    Ok(chart.rhs(&state.psi, h.matrix(), mode, state.rep.hbar))
}

/// Exact quantum evolution exp(-i H t / hbar) applied to the state vector.
pub fn quantum_oracle_evolve(state: &CoherentState, h: &HamiltonianSpec, t: f64) -> Result<CVector> {
    check_dims(state, h)?;
    if state.dim() > ORACLE_DIM_CAP {
        return Err(Error::DimensionCap {
            dim: state.dim(),
            max: ORACLE_DIM_CAP,
        });
    }
    let u = linalg::evolution_operator(h.matrix(), t, state.rep.hbar);
    Ok(u * &state.vector)
}

/// A chart-flip event recorded along a trajectory.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ChartFlipEvent {
    pub time: f64,
    pub pivot: usize,
}

/// Integrator diagnostics attached to a trajectory.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct IntegratorStats {
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    pub rhs_evaluations: u64,
    pub tolerance: f64,
    pub chart_flips: Vec<ChartFlipEvent>,
}

/// Time series of the classical flow with recorded invariants.
///
/// `psi_series` holds standard-chart (pivot 0) coordinates; entries can be
/// very large while the flow passes near the antipodal point.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub psi_series: Vec<CVector>,
    pub energy_series: Vec<f64>,
    pub casimir_series: Vec<f64>,
    pub norm_series: Vec<f64>,
    pub observables: BTreeMap<String, Vec<f64>>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    /// Max relative energy drift against the initial energy.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy_series.first().copied().unwrap_or(0.0);
        let scale = e0.abs().max(1.0);
        self.energy_series
            .iter()
            .map(|e| (e - e0).abs() / scale)
            .fold(0.0, f64::max)
    }
}

/// Options for `integrate` and `integrate_sampled`.
#[derive(Debug, Clone)]
pub struct IntegrationOptions {
    /// Local error tolerance (both absolute and relative), in [1e-12, 1e-4].
    pub tolerance: f64,
    pub mode: EomMode,
    /// Hermitian observables recorded along the trajectory.
    pub observables: Vec<(String, CMatrix)>,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            mode: EomMode::MetricConsistent,
            observables: Vec::new(),
        }
    }
}

fn validate_tolerance(tol: f64) -> Result<()> {
    if !(1e-12..=1e-4).contains(&tol) {
        return Err(Error::InvalidConfig(format!(
            "tolerance {tol:e} outside [1e-12, 1e-4]"
        )));
    }
    Ok(())
}

struct Recorder<'a> {
    casimir: CMatrix,
    h: &'a CMatrix,
    observables: &'a [(String, CMatrix)],
    trajectory: Trajectory,
}

impl<'a> Recorder<'a> {
    fn new(rep: &RepresentationSpec, dim: usize, h: &'a CMatrix, opts: &'a IntegrationOptions) -> Self {
        let rep_dim = RepresentationSpec {
            n: dim,
            hbar: rep.hbar,
        };
        let gen = algebra::spin_triple(&rep_dim);
        let casimir =
            &gen.0 * &gen.0 + (&gen.1 * &gen.2 + &gen.2 * &gen.1) * linalg::cr(0.5);
        let mut observables_map = BTreeMap::new();
        for (name, _) in opts.observables.iter() {
            observables_map.insert(name.clone(), Vec::new());
        }
        Recorder {
            casimir,
            h,
            observables: &opts.observables,
            trajectory: Trajectory {
                times: Vec::new(),
                psi_series: Vec::new(),
                energy_series: Vec::new(),
                casimir_series: Vec::new(),
                norm_series: Vec::new(),
                observables: observables_map,
                stats: IntegratorStats::default(),
            },
        }
    }

    fn push(&mut self, t: f64, chart: &Chart, coords: &CVector) {
        let v = chart.embed(coords);
        let u = &v / linalg::cr(v.norm());
        let exp = |m: &CMatrix| (u.dotc(&(m * &u))).re;
        self.trajectory.times.push(t);
        self.trajectory
            .psi_series
            .push(chart.chart_zero_coords(coords));
        self.trajectory.energy_series.push(exp(self.h));
        self.trajectory.casimir_series.push(exp(&self.casimir));
        self.trajectory.norm_series.push(u.norm());
        for (name, m) in self.observables {
            self.trajectory
                .observables
                .get_mut(name)
                .expect("observable registered")
                .push(exp(m));
        }
    }
}

fn coords_from_y(y: &[f64]) -> CVector {
    CVector::from_fn(y.len() / 2, |i, _| Complex64::new(y[2 * i], y[2 * i + 1]))
}

fn y_from_coords(coords: &CVector, y: &mut [f64]) {
    for (i, z) in coords.iter().enumerate() {
        y[2 * i] = z.re;
        y[2 * i + 1] = z.im;
    }
}

/// Integrate the classical flow over `t_span`, recording every accepted
/// step (plus both endpoints).
pub fn integrate(
    initial: &CoherentState,
    h: &HamiltonianSpec,
    t_span: (f64, f64),
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    run_flow(initial, h, t_span, None, opts)
}

/// Integrate the classical flow recording exactly at `times`
/// (strictly increasing; the first entry is the initial time).
pub fn integrate_sampled(
    initial: &CoherentState,
    h: &HamiltonianSpec,
    times: &[f64],
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    if times.is_empty() {
        return Err(Error::InvalidConfig("no sample times given".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "sample times must be strictly increasing".into(),
        ));
    }
    run_flow(
        initial,
        h,
        (times[0], *times.last().unwrap()),
        Some(times),
        opts,
    )
}

fn run_flow(
    initial: &CoherentState,
    h: &HamiltonianSpec,
    t_span: (f64, f64),
    samples: Option<&[f64]>,
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    check_dims(initial, h)?;
    validate_tolerance(opts.tolerance)?;
    if !t_span.0.is_finite() || !t_span.1.is_finite() {
        return Err(Error::NonFinite);
    }
    for (_, m) in &opts.observables {
        if linalg::hermiticity_residual(m) > crate::hamiltonian::HERMITICITY_TOL {
            return Err(Error::NonHermitian {
                residual: linalg::hermiticity_residual(m),
            });
        }
    }

    let hbar = initial.rep.hbar;
    let mode = opts.mode;
    let h_matrix = h.matrix();
    let chart = RefCell::new(Chart::for_state(initial)?);
    let flips = RefCell::new(Vec::<ChartFlipEvent>::new());

    let mut recorder = Recorder::new(&initial.rep, initial.dim(), h_matrix, opts);
    let mut y = vec![0.0; 2 * initial.psi.len()];
    y_from_coords(&initial.psi, &mut y);

    recorder.push(t_span.0, &chart.borrow(), &initial.psi);

    let mut solver = Dopri5::new(opts.tolerance, opts.tolerance);

    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let _ = t;
        let chart = chart.borrow();
        let coords = coords_from_y(y);
        let rhs_c = chart.rhs(&coords, h_matrix, mode, hbar);
        for (i, z) in rhs_c.iter().enumerate() {
            dy[2 * i] = z.re;
            dy[2 * i + 1] = z.im;
        }
    };

    // accepted-step hook: flip charts when coordinates blow up and record
    // rows when running in accepted-steps mode
    let record_steps = samples.is_none();
    let handle_accept =
        |t: f64, y: &mut [f64], recorder: &mut Recorder| -> Result<bool> {
            let coords = coords_from_y(y);
            let mut flipped = false;
            let max_coord = coords.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if max_coord > CHART_FLIP_THRESHOLD {
                let mut chart = chart.borrow_mut();
                let new_coords = chart.flip(&coords);
                y_from_coords(&new_coords, y);
                flips.borrow_mut().push(ChartFlipEvent {
                    time: t,
                    pivot: chart.pivot_id(),
                });
                flipped = true;
            }
            if record_steps {
                recorder.push(t, &chart.borrow(), &coords_from_y(y));
            }
            Ok(flipped)
        };

    match samples {
        None => {
            solver.drive(rhs, t_span.0, t_span.1, &mut y, |t, y| {
                handle_accept(t, y, &mut recorder)
            })?;
        }
        Some(times) => {
            for pair in times.windows(2) {
                solver.drive(rhs, pair[0], pair[1], &mut y, |t, y| {
                    handle_accept(t, y, &mut recorder)
                })?;
                recorder.push(pair[1], &chart.borrow(), &coords_from_y(&y));
            }
        }
    }

    recorder.trajectory.stats = IntegratorStats {
        accepted_steps: solver.stats.accepted_steps,
        rejected_steps: solver.stats.rejected_steps,
        rhs_evaluations: solver.stats.rhs_evaluations,
        tolerance: opts.tolerance,
        chart_flips: flips.into_inner(),
    };
    Ok(recorder.trajectory)
}

/// Max infidelity between the classical flow and the exact quantum
/// evolution over `t_span`, sampled at 64 intermediate times.
///
/// Requires a certified degree-1 polynomial; the group orbit is invariant
/// under the generated one-parameter subgroup, so the classical flow must
/// track the quantum one exactly.
pub fn classical_vs_quantum(
    initial: &CoherentState,
    h: &HamiltonianSpec,
    t_span: (f64, f64),
    mode: EomMode,
) -> Result<f64> {
    if !h.is_linear() {
        return Err(Error::NotLinear);
    }
    check_dims(initial, h)?;
    if initial.dim() > ORACLE_DIM_CAP {
        return Err(Error::DimensionCap {
            dim: initial.dim(),
            max: ORACLE_DIM_CAP,
        });
    }

    let n_samples = 64;
    let times: Vec<f64> = (0..=n_samples)
        .map(|k| t_span.0 + (t_span.1 - t_span.0) * k as f64 / n_samples as f64)
        .collect();
    let opts = IntegrationOptions {
        tolerance: 1e-11,
        mode,
        observables: Vec::new(),
    };
    let trajectory = integrate_sampled(initial, h, &times, &opts)?;

    let hbar = initial.rep.hbar;
    let u_step = linalg::evolution_operator(
        h.matrix(),
        (t_span.1 - t_span.0) / n_samples as f64,
        hbar,
    );
    let mut quantum = initial.vector.clone();
    let mut worst = 0.0f64;
    for (k, psi) in trajectory.psi_series.iter().enumerate() {
        if k > 0 {
            quantum = &u_step * &quantum;
        }
        // reconstruct the normalized classical vector from chart-0 coords
        let chart = Chart::for_state(initial)?;
        let v = chart.embed(psi);
        let u = &v / linalg::cr(v.norm());
        let fid = u.dotc(&quantum).norm_sqr();
        worst = worst.max(1.0 - fid);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherent::{state_from_psi, spin_j_state_from_xi};
    use crate::hamiltonian::{random_hermitian, random_linear, OpLabel, Term};
    use crate::linalg::{cr, C_ONE};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rep(n: usize) -> RepresentationSpec {
        RepresentationSpec::new(n).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sz_hamiltonian(n: usize, omega: f64) -> HamiltonianSpec {
        HamiltonianSpec::from_terms(
            rep(n),
            vec![Term {
                coeff: omega,
                ops: vec![OpLabel::Sz],
            }],
        )
        .unwrap()
    }

    fn random_state(n: usize, rng: &mut impl Rng) -> CoherentState {
        let psi = CVector::from_fn(n - 1, |_, _| {
            c(rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2))
        });
        state_from_psi(&psi, &rep(n)).unwrap()
    }

    /// Central-difference Wirtinger gradient, step 1e-6 on each real axis.
    fn fd_gradient(state: &CoherentState, h: &HamiltonianSpec) -> CVector {
        let step = 1e-6;
        let chart = Chart::for_state(state).unwrap();
        let f = |psi: &CVector| chart.expectation(psi, h.matrix());
        CVector::from_fn(state.psi.len(), |i, _| {
            let mut plus = state.psi.clone();
            let mut minus = state.psi.clone();
            plus[i] += cr(step);
            minus[i] -= cr(step);
            let dx = (f(&plus) - f(&minus)) / (2.0 * step);
            plus = state.psi.clone();
            minus = state.psi.clone();
            plus[i] += C_I * cr(step);
            minus[i] -= C_I * cr(step);
            let dy = (f(&plus) - f(&minus)) / (2.0 * step);
            // d/d(conj psi) = (d/dx + i d/dy) / 2
            c(dx / 2.0, dy / 2.0)
        })
    }

    #[test]
    fn gradient_constant_hamiltonian_vanishes() {
        let h = HamiltonianSpec::from_matrix(rep(3), CMatrix::identity(3, 3) * cr(2.5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let st = random_state(3, &mut rng);
        let g = grad_expectation(&st, &h).unwrap();
        assert!(linalg::max_norm_vec(&g) < 1e-12);
    }

    #[test]
    fn gradient_sz_closed_form() {
        // <H> = hbar w (|psi|^2 - 1) / (2 (1+|psi|^2)); gradient
        // hbar w psi / (1+|psi|^2)^2
        let omega = 1.7;
        let h = sz_hamiltonian(2, omega);
        let psi = c(0.4, -0.9);
        let st = state_from_psi(&CVector::from_element(1, psi), &rep(2)).unwrap();
        let g = grad_expectation(&st, &h).unwrap();
        let n = 1.0 + psi.norm_sqr();
        let expected = psi * cr(omega / (n * n));
        assert!((g[0] - expected).norm() < 1e-13);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let n = rng.random_range(2..=5);
            let st = random_state(n, &mut rng);
            let h = random_hermitian(rep(n), &mut rng);
            let analytic = grad_expectation(&st, &h).unwrap();
            let numeric = fd_gradient(&st, &h);
            let scale = analytic.norm().max(1e-8);
            let err = (&analytic - &numeric).norm() / scale;
            assert!(err < 1e-6, "n={n} gradient mismatch {err:.3e}");
        }
    }

    #[test]
    fn lagrangian_reduces_to_minus_energy() {
        let h = sz_hamiltonian(2, 2.0);
        let st = state_from_psi(&CVector::zeros(1), &rep(2)).unwrap();
        let l = lagrangian(&st, &CVector::zeros(1), &h).unwrap();
        assert!((l - 1.0).abs() < 1e-14); // -<H> = +hbar w / 2 = 1
    }

    #[test]
    fn lagrangian_kinetic_value() {
        // psi = 1, psi_dot = i, H = 0: kinetic term
        // i hbar (conj(psi) psi_dot - c.c.) / (2 (1 + |psi|^2)) = -hbar/2
        let h = HamiltonianSpec::zero(rep(2));
        let st = state_from_psi(&CVector::from_element(1, C_ONE), &rep(2)).unwrap();
        let l = lagrangian(&st, &CVector::from_element(1, C_I), &h).unwrap();
        assert!((l + 0.5).abs() < 1e-14, "L = {l}");
    }

    #[test]
    fn lagrangian_kinetic_antisymmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let st = random_state(3, &mut rng);
        let h = HamiltonianSpec::zero(rep(3));
        let dot = CVector::from_fn(2, |_, _| c(rng.random_range(-1.0..1.0), rng.random()));
        let plus = lagrangian(&st, &dot, &h).unwrap();
        let minus = lagrangian(&st, &(-&dot), &h).unwrap();
        assert!((plus + minus).abs() < 1e-13);
    }

    #[test]
    fn spin_j_lagrangian_weight() {
        // same state/velocity, J = 1 doubles the J = 1/2 kinetic term
        let h2 = HamiltonianSpec::zero(rep(2));
        let h3 = HamiltonianSpec::zero(rep(3));
        let xi = c(0.8, 0.1);
        let dot = CVector::from_element(1, c(-0.2, 0.6));
        let half = spin_j_state_from_xi(xi, 0.5, 1.0).unwrap();
        let one = spin_j_state_from_xi(xi, 1.0, 1.0).unwrap();
        let l_half = lagrangian(&half, &dot, &h2).unwrap();
        let l_one = lagrangian(&one, &dot, &h3).unwrap();
        assert!((l_one - 2.0 * l_half).abs() < 1e-13);
    }

    #[test]
    fn rhs_zero_for_constant_hamiltonian() {
        let h = HamiltonianSpec::from_matrix(rep(4), CMatrix::identity(4, 4) * cr(3.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let st = random_state(4, &mut rng);
        for mode in [EomMode::MetricConsistent, EomMode::PaperLiteral] {
            let v = eom_rhs(&st, &h, mode).unwrap();
            assert!(linalg::max_norm_vec(&v) < 1e-12);
        }
    }

    #[test]
    fn rhs_precession() {
        let omega = 1.3;
        let h = sz_hamiltonian(2, omega);
        let psi = c(0.7, 0.2);
        let st = state_from_psi(&CVector::from_element(1, psi), &rep(2)).unwrap();
        for mode in [EomMode::MetricConsistent, EomMode::PaperLiteral] {
            let v = eom_rhs(&st, &h, mode).unwrap();
            let expected = -C_I * cr(omega) * psi;
            assert!((v[0] - expected).norm() < 1e-13, "{mode:?}");
        }
    }

    #[test]
    fn modes_agree_on_single_component_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 2..=4 {
            for _ in 0..20 {
                let h = random_hermitian(rep(n), &mut rng);
                let hot = rng.random_range(0..n - 1);
                let mut psi = CVector::zeros(n - 1);
                psi[hot] = c(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
                let st = state_from_psi(&psi, &rep(n)).unwrap();
                let metric = eom_rhs(&st, &h, EomMode::MetricConsistent).unwrap();
                let paper = eom_rhs(&st, &h, EomMode::PaperLiteral).unwrap();
                // the two prefactors coincide exactly on the populated axis
                assert!(
                    (metric[hot] - paper[hot]).norm() < 1e-12,
                    "n={n} hot={hot}"
                );
                if n == 2 {
                    assert!(linalg::max_norm_vec(&(&metric - &paper)) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn modes_differ_generically() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_hermitian(rep(3), &mut rng);
        let psi = CVector::from_vec(vec![c(0.5, 0.0), c(0.5, 0.0)]);
        let st = state_from_psi(&psi, &rep(3)).unwrap();
        let metric = eom_rhs(&st, &h, EomMode::MetricConsistent).unwrap();
        let paper = eom_rhs(&st, &h, EomMode::PaperLiteral).unwrap();
        assert!(linalg::max_norm_vec(&(&metric - &paper)) > 1e-6);
    }

    #[test]
    fn oracle_checks() {
        let h = sz_hamiltonian(2, 2.0);
        let st = state_from_psi(&CVector::from_element(1, C_ONE), &rep(2)).unwrap();
        let v0 = quantum_oracle_evolve(&st, &h, 0.0).unwrap();
        assert!(linalg::max_norm_vec(&(&v0 - &st.vector)) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let n = rng.random_range(2..=5);
            let st = random_state(n, &mut rng);
            let h = random_hermitian(rep(n), &mut rng);
            let v = quantum_oracle_evolve(&st, &h, rng.random_range(0.0..5.0)).unwrap();
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_dimension_cap() {
        let n = 70;
        let r = RepresentationSpec::new(n).unwrap();
        let st = state_from_psi(&CVector::zeros(n - 1), &r).unwrap();
        let h = HamiltonianSpec::from_matrix(r, CMatrix::zeros(n, n)).unwrap();
        assert!(matches!(
            quantum_oracle_evolve(&st, &h, 1.0),
            Err(Error::DimensionCap { .. })
        ));
    }

    #[test]
    fn precession_full_period() {
        let omega = 1.0;
        let h = sz_hamiltonian(2, omega);
        let st = state_from_psi(&CVector::from_element(1, C_ONE), &rep(2)).unwrap();
        let period = 2.0 * std::f64::consts::PI / omega;
        let opts = IntegrationOptions::default();
        let trajectory = integrate(&st, &h, (0.0, period), &opts).unwrap();
        let last = trajectory.psi_series.last().unwrap();
        assert!((last[0] - C_ONE).norm() < 1e-8);
        assert!(trajectory.energy_drift() < 1e-9);
    }

    #[test]
    fn precession_matches_closed_form_pointwise() {
        let omega = 0.9;
        let h = sz_hamiltonian(2, omega);
        let psi0 = c(0.8, -0.3);
        let st = state_from_psi(&CVector::from_element(1, psi0), &rep(2)).unwrap();
        let times: Vec<f64> = (0..=100).map(|k| 0.07 * k as f64).collect();
        let trajectory =
            integrate_sampled(&st, &h, &times, &IntegrationOptions::default()).unwrap();
        for (t, psi) in trajectory.times.iter().zip(&trajectory.psi_series) {
            let expected = psi0 * (-C_I * cr(omega * t)).exp();
            assert!((psi[0] - expected).norm() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn constant_hamiltonian_trajectory_is_constant() {
        let h = HamiltonianSpec::from_matrix(rep(3), CMatrix::identity(3, 3) * cr(2.0)).unwrap();
        let psi0 = CVector::from_vec(vec![c(0.2, 0.4), c(-0.7, 0.1)]);
        let st = state_from_psi(&psi0, &rep(3)).unwrap();
        let trajectory = integrate(&st, &h, (0.0, 5.0), &IntegrationOptions::default()).unwrap();
        for psi in &trajectory.psi_series {
            assert!(linalg::max_norm_vec(&(psi - &psi0)) < 1e-10);
        }
    }

    #[test]
    fn zero_span_single_row() {
        let h = sz_hamiltonian(2, 1.0);
        let st = state_from_psi(&CVector::from_element(1, C_ONE), &rep(2)).unwrap();
        let trajectory = integrate(&st, &h, (0.0, 0.0), &IntegrationOptions::default()).unwrap();
        assert_eq!(trajectory.times.len(), 1);
        assert!((trajectory.psi_series[0][0] - C_ONE).norm() < 1e-15);
    }

    #[test]
    fn quadrupole_energy_conservation() {
        // H = s_z^2 on SU(3), long run
        let h = HamiltonianSpec::from_terms(
            rep(3),
            vec![Term {
                coeff: 1.0,
                ops: vec![OpLabel::Sz, OpLabel::Sz],
            }],
        )
        .unwrap();
        let psi0 = CVector::from_vec(vec![c(0.6, 0.2), c(-0.3, 0.5)]);
        let st = state_from_psi(&psi0, &rep(3)).unwrap();
        let trajectory = integrate(&st, &h, (0.0, 100.0), &IntegrationOptions::default()).unwrap();
        assert!(
            trajectory.energy_drift() < 1e-8,
            "drift {}",
            trajectory.energy_drift()
        );
        // Casimir expectation pinned to S(S+1) all along
        for c2 in &trajectory.casimir_series {
            assert!((c2 - 2.0).abs() < 1e-10);
        }
        for nrm in &trajectory.norm_series {
            assert!((nrm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_drift_scales_with_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = random_hermitian(rep(3), &mut rng);
        let st = random_state(3, &mut rng);
        let mut drifts = Vec::new();
        for tol in [1e-6, 1e-8, 1e-10] {
            let opts = IntegrationOptions {
                tolerance: tol,
                ..Default::default()
            };
            let trajectory = integrate(&st, &h, (0.0, 20.0), &opts).unwrap();
            drifts.push(trajectory.energy_drift().max(1e-16));
        }
        // two decades of tolerance should buy at least one decade of drift
        assert!(drifts[0] / drifts[2] > 10.0, "drifts {drifts:?}");
        for (tol, drift) in [1e-6, 1e-8, 1e-10].iter().zip(&drifts) {
            assert!(drift < &(100.0 * tol), "tol {tol:e} drift {drift:e}");
        }
    }

    #[test]
    fn tolerance_bounds_enforced() {
        let h = sz_hamiltonian(2, 1.0);
        let st = state_from_psi(&CVector::zeros(1), &rep(2)).unwrap();
        for bad in [1e-13, 1e-3] {
            let opts = IntegrationOptions {
                tolerance: bad,
                ..Default::default()
            };
            assert!(integrate(&st, &h, (0.0, 1.0), &opts).is_err());
        }
    }

    #[test]
    fn chart_flip_through_antipode() {
        // H = b s_x rotates the reference state straight through the
        // antipodal point at t = pi/b; the trajectory must flip charts and
        // return to psi = 0 at t = 2 pi / b.
        let b = 1.0;
        let h = HamiltonianSpec::from_terms(
            rep(2),
            vec![Term {
                coeff: b,
                ops: vec![OpLabel::Sx],
            }],
        )
        .unwrap();
        let st = state_from_psi(&CVector::zeros(1), &rep(2)).unwrap();
        let period = 2.0 * std::f64::consts::PI / b;
        let trajectory = integrate(&st, &h, (0.0, period), &IntegrationOptions::default()).unwrap();
        assert!(
            !trajectory.stats.chart_flips.is_empty(),
            "expected at least one chart flip"
        );
        let last = trajectory.psi_series.last().unwrap();
        assert!(last[0].norm() < 1e-7, "psi(T) = {}", last[0]);
        assert!(trajectory.energy_drift() < 1e-8);
    }

    #[test]
    fn classical_matches_quantum_for_linear_hamiltonians() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 2..=4 {
            for _ in 0..3 {
                let h = random_linear(rep(n), &mut rng);
                let st = random_state(n, &mut rng);
                let err =
                    classical_vs_quantum(&st, &h, (0.0, 10.0), EomMode::MetricConsistent).unwrap();
                assert!(err < 1e-8, "n={n} infidelity {err:.3e}");
            }
        }
    }

    #[test]
    fn paper_literal_deviates_for_generic_linear_flows() {
        // reported, not asserted: the diagonal prefactor is not the inverse
        // metric for n >= 3, so it generically fails the quantum check
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let h = random_linear(rep(3), &mut rng);
        let st = random_state(3, &mut rng);
        let err = classical_vs_quantum(&st, &h, (0.0, 10.0), EomMode::PaperLiteral).unwrap();
        assert!(err.is_finite());
    }

    #[test]
    fn classical_vs_quantum_rejects_quadratic() {
        let h = HamiltonianSpec::from_terms(
            rep(3),
            vec![Term {
                coeff: 1.0,
                ops: vec![OpLabel::Sz, OpLabel::Sz],
            }],
        )
        .unwrap();
        let st = state_from_psi(&CVector::zeros(2), &rep(3)).unwrap();
        assert!(matches!(
            classical_vs_quantum(&st, &h, (0.0, 1.0), EomMode::MetricConsistent),
            Err(Error::NotLinear)
        ));
    }

    #[test]
    fn spin_j_flow_matches_quantum() {
        // J = 3/2 linear spin Hamiltonian: the spin-J coherent manifold is
        // invariant, so the single-coordinate flow must be exact too
        let j = 1.5;
        let dim_rep = rep(4);
        let h = HamiltonianSpec::from_terms(
            dim_rep,
            vec![
                Term {
                    coeff: 0.8,
                    ops: vec![OpLabel::Sz],
                },
                Term {
                    coeff: 0.5,
                    ops: vec![OpLabel::Sx],
                },
            ],
        )
        .unwrap();
        let st = spin_j_state_from_xi(c(0.4, -0.2), j, 1.0).unwrap();
        let err = classical_vs_quantum(&st, &h, (0.0, 8.0), EomMode::MetricConsistent).unwrap();
        assert!(err < 1e-8, "spin-J infidelity {err:.3e}");
    }

    #[test]
    fn spin_j_quadratic_flow_is_inexact() {
        // squeezing leaves the spin-J orbit; recorded as a deviation, the
        // classical flow still conserves energy
        let j = 1.0;
        let h = HamiltonianSpec::from_terms(
            rep(3),
            vec![Term {
                coeff: 1.0,
                ops: vec![OpLabel::Sz, OpLabel::Sz],
            }],
        )
        .unwrap();
        let st = spin_j_state_from_xi(c(0.7, 0.3), j, 1.0).unwrap();
        let times: Vec<f64> = (0..=40).map(|k| 0.2 * k as f64).collect();
        let trajectory =
            integrate_sampled(&st, &h, &times, &IntegrationOptions::default()).unwrap();
        assert!(trajectory.energy_drift() < 1e-9);

        // quantum state leaves the coherent family: fidelity must drop
        let u = linalg::evolution_operator(h.matrix(), 4.0, 1.0);
        let quantum = &u * &st.vector;
        let last = trajectory.psi_series.last().unwrap();
        let classical = spin_j_state_from_xi(last[0], j, 1.0).unwrap();
        let fid = classical.vector.dotc(&quantum).norm_sqr();
        assert!(fid < 1.0 - 1e-4, "squeezing not visible, fid = {fid}");
    }

    #[test]
    fn symplectic_form_conserved_along_linearized_flow() {
        // tangent flow of the Riccati equation for linear H on CP^1:
        // d(delta)/dt = -(i/hbar)(h11 - h00 - 2 h01 psi) delta; the area
        // form 2 J hbar Im(conj(d1) d2) / (1+|psi|^2)^2 must be constant
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let h = random_hermitian(rep(2), &mut rng);
        let m = h.matrix();
        let (h00, h01, h11) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
        let psi0 = c(0.3, -0.5);
        let d1_0 = c(1.0, 0.2);
        let d2_0 = c(-0.4, 0.9);

        let omega = |psi: Complex64, d1: Complex64, d2: Complex64| {
            let n = 1.0 + psi.norm_sqr();
            (d1.conj() * d2).im / (n * n)
        };

        let mut y = vec![
            psi0.re, psi0.im, d1_0.re, d1_0.im, d2_0.re, d2_0.im,
        ];
        let mut solver = Dopri5::new(1e-12, 1e-12);
        solver
            .drive(
                |_, y, dy| {
                    let psi = c(y[0], y[1]);
                    let d1 = c(y[2], y[3]);
                    let d2 = c(y[4], y[5]);
                    let rhs = -C_I * (h11 - h00 - cr(2.0) * h01 * psi);
                    let dpsi = -C_I * (h01.conj() + (h11 - h00) * psi - h01 * psi * psi);
                    let dd1 = rhs * d1;
                    let dd2 = rhs * d2;
                    dy[0] = dpsi.re;
                    dy[1] = dpsi.im;
                    dy[2] = dd1.re;
                    dy[3] = dd1.im;
                    dy[4] = dd2.re;
                    dy[5] = dd2.im;
                },
                0.0,
                10.0,
                &mut y,
                |_, _| Ok(false),
            )
            .unwrap();

        let before = omega(psi0, d1_0, d2_0);
        let after = omega(c(y[0], y[1]), c(y[2], y[3]), c(y[4], y[5]));
        assert!(
            (before - after).abs() < 1e-6 * before.abs().max(1.0),
            "area {before} -> {after}"
        );
    }

    #[test]
    fn riccati_rhs_matches_eom() {
        // closed-form quadratic RHS for linear H on CP^1 against eom_rhs
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let h = random_hermitian(rep(2), &mut rng);
        let m = h.matrix();
        let psi = c(0.8, 0.25);
        let st = state_from_psi(&CVector::from_element(1, psi), &rep(2)).unwrap();
        let got = eom_rhs(&st, &h, EomMode::MetricConsistent).unwrap()[0];
        let expected =
            -C_I * (m[(1, 0)] + (m[(1, 1)] - m[(0, 0)]) * psi - m[(0, 1)] * psi * psi);
        assert!((got - expected).norm() < 1e-13);
    }
}
