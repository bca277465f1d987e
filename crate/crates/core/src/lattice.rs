//! Product coherent-state dynamics for chains of SU(2S+1) sites.
//!
//! The lattice wavefunction is a site-factorized (mean-field) product of
//! single-site coherent states, so each site carries 2(n-1) real = 4S
//! dynamical variables. Bilinear bonds contract the spin dipole triple,
//! biquadratic bonds contract the five quadrupole operators; both yield
//! coupled flows where every site moves in the effective field of its
//! neighbours' expectation values.

use std::cell::RefCell;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra;
use crate::coherent::{state_from_psi, CoherentState};
use crate::dynamics::{Chart, ChartFlipEvent, EomMode, IntegratorStats, CHART_FLIP_THRESHOLD};
use crate::error::Error;
use crate::hamiltonian::HamiltonianSpec;
use crate::linalg::{self, kron, CMatrix, CVector};
use crate::ode::Dopri5;
use crate::rep::RepresentationSpec;
use crate::Result;

/// Exchange type carried by one bond.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingKind {
    Bilinear,
    Biquadratic,
}

/// One coupled pair of sites.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    #[serde(rename = "type")]
    pub kind: CouplingKind,
    #[serde(rename = "J")]
    pub strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

/// Chain of identical SU(n) sites with pairwise exchange couplings.
#[derive(Debug, Clone)]
pub struct ChainModel {
    pub sites: usize,
    pub rep: RepresentationSpec,
    pub boundary: Boundary,
    pub bonds: Vec<Bond>,
    /// Local hermitian term applied at every site.
    pub field: Option<HamiltonianSpec>,
    dipole_ops: Vec<CMatrix>,
    quadrupole_ops: Vec<CMatrix>,
}

impl ChainModel {
    pub fn new(
        sites: usize,
        rep: RepresentationSpec,
        boundary: Boundary,
        bonds: Vec<Bond>,
        field: Option<HamiltonianSpec>,
    ) -> Result<Self> {
        if sites == 0 {
            return Err(Error::InvalidConfig("chain needs at least one site".into()));
        }
        for bond in &bonds {
            if bond.i >= sites || bond.j >= sites {
                return Err(Error::InvalidConfig(format!(
                    "bond ({}, {}) outside 0..{}",
                    bond.i, bond.j, sites
                )));
            }
            if bond.i == bond.j {
                return Err(Error::InvalidConfig("bond connects a site to itself".into()));
            }
            if !bond.strength.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        if let Some(f) = &field {
            if f.dim() != rep.n {
                return Err(Error::DimensionMismatch {
                    expected: rep.n,
                    got: f.dim(),
                });
            }
        }
        let gen = algebra::build_generators(&rep)?;
        let dipole_ops = vec![gen.s_x(), gen.s_y(), gen.s_z.clone()];
        let quadrupole_ops = quadrupole_operators(&gen);
        Ok(Self {
            sites,
            rep,
            boundary,
            bonds,
            field,
            dipole_ops,
            quadrupole_ops,
        })
    }

    /// Nearest-neighbour chain with a uniform coupling.
    pub fn uniform_chain(
        sites: usize,
        rep: RepresentationSpec,
        kind: CouplingKind,
        strength: f64,
        boundary: Boundary,
    ) -> Result<Self> {
        let mut bonds: Vec<Bond> = (0..sites.saturating_sub(1))
            .map(|k| Bond {
                i: k,
                j: k + 1,
                kind,
                strength,
            })
            .collect();
        if boundary == Boundary::Periodic && sites > 2 {
            bonds.push(Bond {
                i: sites - 1,
                j: 0,
                kind,
                strength,
            });
        }
        Self::new(sites, rep, boundary, bonds, None)
    }

    /// Parse the chain schema:
    /// `{"sites": N, "n": n, "boundary": "open", "bonds": [...], "field": {...}}`.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct ChainJson {
            sites: usize,
            n: usize,
            #[serde(default)]
            hbar: Option<f64>,
            #[serde(default)]
            boundary: Option<Boundary>,
            #[serde(default)]
            bonds: Vec<Bond>,
            #[serde(default)]
            field: Option<serde_json::Value>,
        }
        let raw: ChainJson = serde_json::from_value(value.clone())?;
        let rep = RepresentationSpec::with_hbar(raw.n, raw.hbar.unwrap_or(1.0))?;
        let field = raw
            .field
            .map(|f| HamiltonianSpec::from_json(rep, &f))
            .transpose()?;
        Self::new(
            raw.sites,
            rep,
            raw.boundary.unwrap_or(Boundary::Open),
            raw.bonds,
            field,
        )
    }

    /// Real dynamical variables per site (4S).
    pub fn vars_per_site(&self) -> usize {
        2 * self.rep.num_params()
    }
}

/// Five symmetrized traceless quadratics of the spin operators, each
/// normalized to tr(Q^2) = 2. Empty for S = 1/2 where they all vanish.
fn quadrupole_operators(gen: &algebra::GeneratorSet) -> Vec<CMatrix> {
    let sx = gen.s_x();
    let sy = gen.s_y();
    let sz = &gen.s_z;
    let n = gen.n();
    let id = CMatrix::identity(n, n);
    let c2 = gen.rep.casimir_eigenvalue();

    let raw = vec![
        linalg::anticommutator(&sx, &sy),
        linalg::anticommutator(&sy, sz),
        linalg::anticommutator(sz, &sx),
        &sx * &sx - &sy * &sy,
        (sz * sz * linalg::cr(2.0) - &sx * &sx - &sy * &sy) * linalg::cr(1.0 / 3.0f64.sqrt()),
    ];
    let _ = (&id, c2);
    raw.into_iter()
        .filter_map(|q| {
            let norm_sq = (&q * &q).trace().re;
            if norm_sq < 1e-20 {
                None
            } else {
                Some(q * linalg::cr((2.0 / norm_sq).sqrt()))
            }
        })
        .collect()
}

/// Per-site coherent-state coordinates of a chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub psis: Vec<CVector>,
}

impl ChainState {
    pub fn new(psis: Vec<CVector>, model: &ChainModel) -> Result<Self> {
        if psis.len() != model.sites {
            return Err(Error::DimensionMismatch {
                expected: model.sites,
                got: psis.len(),
            });
        }
        for psi in &psis {
            if psi.len() != model.rep.num_params() {
                return Err(Error::DimensionMismatch {
                    expected: model.rep.num_params(),
                    got: psi.len(),
                });
            }
            if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self { psis })
    }

    /// Every site in the same state.
    pub fn uniform(psi: CVector, model: &ChainModel) -> Result<Self> {
        Self::new(vec![psi; model.sites], model)
    }

    /// Per-site coherent states.
    pub fn site_states(&self, rep: &RepresentationSpec) -> Result<Vec<CoherentState>> {
        self.psis.iter().map(|p| state_from_psi(p, rep)).collect()
    }
}

/// Expectation vectors of the dipole and quadrupole operator sets in the
/// normalized vector `u`.
fn site_moments(model: &ChainModel, u: &CVector) -> (Vec<f64>, Vec<f64>) {
    let exp = |m: &CMatrix| u.dotc(&(m * u)).re;
    let dip = model.dipole_ops.iter().map(&exp).collect();
    let quad = model.quadrupole_ops.iter().map(&exp).collect();
    (dip, quad)
}

/// Product-state energy of the chain:
/// sum over bonds of J * (moments_i . moments_j) plus local field terms.
pub fn chain_energy(state: &ChainState, model: &ChainModel) -> Result<f64> {
    if state.psis.len() != model.sites {
        return Err(Error::DimensionMismatch {
            expected: model.sites,
            got: state.psis.len(),
        });
    }
    let charts: Vec<Chart> = vec![
        Chart::Fundamental {
            n: model.rep.n,
            pivot: 0,
        };
        model.sites
    ];
    let coords: Vec<CVector> = state.psis.clone();
    Ok(chain_energy_internal(model, &charts, &coords))
}

fn normalized_site_vector(chart: &Chart, coords: &CVector) -> CVector {
    let v = chart.embed(coords);
    let norm = v.norm();
    v / linalg::cr(norm)
}

fn chain_energy_internal(model: &ChainModel, charts: &[Chart], coords: &[CVector]) -> f64 {
    let moments: Vec<(Vec<f64>, Vec<f64>)> = (0..model.sites)
        .map(|a| site_moments(model, &normalized_site_vector(&charts[a], &coords[a])))
        .collect();
    let mut energy = 0.0;
    for bond in &model.bonds {
        let (di, qi) = &moments[bond.i];
        let (dj, qj) = &moments[bond.j];
        let dot: f64 = match bond.kind {
            CouplingKind::Bilinear => di.iter().zip(dj).map(|(a, b)| a * b).sum(),
            CouplingKind::Biquadratic => qi.iter().zip(qj).map(|(a, b)| a * b).sum(),
        };
        energy += bond.strength * dot;
    }
    if let Some(field) = &model.field {
        for a in 0..model.sites {
            let u = normalized_site_vector(&charts[a], &coords[a]);
            energy += u.dotc(&(field.matrix() * &u)).re;
        }
    }
    energy
}

/// Trajectory of a chain flow.
///
/// `site_psi_series[t][a]` holds standard-chart coordinates of site `a`.
#[derive(Debug, Clone)]
pub struct ChainTrajectory {
    pub times: Vec<f64>,
    pub site_psi_series: Vec<Vec<CVector>>,
    pub energy_series: Vec<f64>,
    pub total_sz_series: Vec<f64>,
    pub stats: IntegratorStats,
}

impl ChainTrajectory {
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy_series.first().copied().unwrap_or(0.0);
        let scale = e0.abs().max(1.0);
        self.energy_series
            .iter()
            .map(|e| (e - e0).abs() / scale)
            .fold(0.0, f64::max)
    }

    pub fn total_sz_drift(&self) -> f64 {
        let s0 = self.total_sz_series.first().copied().unwrap_or(0.0);
        self.total_sz_series
            .iter()
            .map(|s| (s - s0).abs())
            .fold(0.0, f64::max)
    }
}

/// Integrate the coupled mean-field flow over `t_span`, recording every
/// accepted step.
pub fn chain_evolve(
    initial: &ChainState,
    model: &ChainModel,
    t_span: (f64, f64),
    tolerance: f64,
) -> Result<ChainTrajectory> {
    run_chain_flow(initial, model, t_span, None, tolerance)
}

/// Integrate the coupled mean-field flow recording exactly at `times`.
pub fn chain_evolve_sampled(
    initial: &ChainState,
    model: &ChainModel,
    times: &[f64],
    tolerance: f64,
) -> Result<ChainTrajectory> {
    if times.is_empty() {
        return Err(Error::InvalidConfig("no sample times given".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "sample times must be strictly increasing".into(),
        ));
    }
    run_chain_flow(
        initial,
        model,
        (times[0], *times.last().unwrap()),
        Some(times),
        tolerance,
    )
}

fn run_chain_flow(
    initial: &ChainState,
    model: &ChainModel,
    t_span: (f64, f64),
    samples: Option<&[f64]>,
    tolerance: f64,
) -> Result<ChainTrajectory> {
    if initial.psis.len() != model.sites {
        return Err(Error::DimensionMismatch {
            expected: model.sites,
            got: initial.psis.len(),
        });
    }
    if !(1e-12..=1e-4).contains(&tolerance) {
        return Err(Error::InvalidConfig(format!(
            "tolerance {tolerance:e} outside [1e-12, 1e-4]"
        )));
    }
    let sites = model.sites;
    let params = model.rep.num_params();
    let hbar = model.rep.hbar;
    let n = model.rep.n;

    let charts = RefCell::new(vec![Chart::Fundamental { n, pivot: 0 }; sites]);
    let flips = RefCell::new(Vec::<ChartFlipEvent>::new());

    let split = |y: &[f64]| -> Vec<CVector> {
        (0..sites)
            .map(|a| {
                CVector::from_fn(params, |i, _| {
                    Complex64::new(y[2 * (a * params + i)], y[2 * (a * params + i) + 1])
                })
            })
            .collect()
    };
    let join = |coords: &[CVector], y: &mut [f64]| {
        for (a, c) in coords.iter().enumerate() {
            for (i, z) in c.iter().enumerate() {
                y[2 * (a * params + i)] = z.re;
                y[2 * (a * params + i) + 1] = z.im;
            }
        }
    };

    // effective single-site Hamiltonian: local field plus the neighbour
    // moments contracted through each incident bond
    let effective_field = |site: usize, moments: &[(Vec<f64>, Vec<f64>)]| -> CMatrix {
        let mut h_eff = match &model.field {
            Some(f) => f.matrix().clone(),
            None => CMatrix::zeros(n, n),
        };
        for bond in &model.bonds {
            let other = if bond.i == site {
                bond.j
            } else if bond.j == site {
                bond.i
            } else {
                continue;
            };
            let (dip, quad) = &moments[other];
            match bond.kind {
                CouplingKind::Bilinear => {
                    for (op, m) in model.dipole_ops.iter().zip(dip) {
                        h_eff += op * linalg::cr(bond.strength * m);
                    }
                }
                CouplingKind::Biquadratic => {
                    for (op, m) in model.quadrupole_ops.iter().zip(quad) {
                        h_eff += op * linalg::cr(bond.strength * m);
                    }
                }
            }
        }
        h_eff
    };

    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let charts = charts.borrow();
        let coords = split(y);
        let moments: Vec<(Vec<f64>, Vec<f64>)> = (0..sites)
            .map(|a| site_moments(model, &normalized_site_vector(&charts[a], &coords[a])))
            .collect();
        for a in 0..sites {
            let h_eff = effective_field(a, &moments);
            let v = charts[a].rhs(&coords[a], &h_eff, EomMode::MetricConsistent, hbar);
            for (i, z) in v.iter().enumerate() {
                dy[2 * (a * params + i)] = z.re;
                dy[2 * (a * params + i) + 1] = z.im;
            }
        }
    };

    let sz_op = algebra::spin_triple(&model.rep).0;
    let mut trajectory = ChainTrajectory {
        times: Vec::new(),
        site_psi_series: Vec::new(),
        energy_series: Vec::new(),
        total_sz_series: Vec::new(),
        stats: IntegratorStats::default(),
    };
    let record = |t: f64, coords: &[CVector], trajectory: &mut ChainTrajectory| {
        let charts = charts.borrow();
        let mut total_sz = 0.0;
        let mut psis = Vec::with_capacity(sites);
        for a in 0..sites {
            let u = normalized_site_vector(&charts[a], &coords[a]);
            total_sz += u.dotc(&(&sz_op * &u)).re;
            psis.push(match &charts[a] {
                Chart::Fundamental { pivot: 0, .. } => coords[a].clone(),
                chart => {
                    let v = chart.embed(&coords[a]);
                    CVector::from_fn(params, |i, _| v[i + 1] / v[0])
                }
            });
        }
        trajectory.times.push(t);
        trajectory
            .energy_series
            .push(chain_energy_internal(model, &charts, coords));
        trajectory.total_sz_series.push(total_sz);
        trajectory.site_psi_series.push(psis);
    };

    let mut y = vec![0.0; 2 * sites * params];
    join(&initial.psis, &mut y);
    record(t_span.0, &initial.psis, &mut trajectory);

    let mut solver = Dopri5::new(tolerance, tolerance);
    let record_steps = samples.is_none();
    let handle_accept = |t: f64,
                         y: &mut [f64],
                         trajectory: &mut ChainTrajectory|
     -> Result<bool> {
        let coords = split(y);
        let mut flipped = false;
        {
            let mut charts = charts.borrow_mut();
            let mut new_coords = coords.clone();
            for a in 0..sites {
                let max_c = coords[a].iter().map(|z| z.norm()).fold(0.0, f64::max);
                if max_c > CHART_FLIP_THRESHOLD {
                    new_coords[a] = charts[a].flip(&coords[a]);
                    flips.borrow_mut().push(ChartFlipEvent {
                        time: t,
                        pivot: charts[a].pivot_id(),
                    });
                    flipped = true;
                }
            }
            if flipped {
                join(&new_coords, y);
            }
        }
        if record_steps {
            record(t, &split(y), trajectory);
        }
        Ok(flipped)
    };

    match samples {
        None => {
            solver.drive(rhs, t_span.0, t_span.1, &mut y, |t, y| {
                handle_accept(t, y, &mut trajectory)
            })?;
        }
        Some(times) => {
            for pair in times.windows(2) {
                solver.drive(rhs, pair[0], pair[1], &mut y, |t, y| {
                    handle_accept(t, y, &mut trajectory)
                })?;
                record(pair[1], &split(&y), &mut trajectory);
            }
        }
    }

    trajectory.stats = IntegratorStats {
        accepted_steps: solver.stats.accepted_steps,
        rejected_steps: solver.stats.rejected_steps,
        rhs_evaluations: solver.stats.rhs_evaluations,
        tolerance,
        chart_flips: flips.into_inner(),
    };
    Ok(trajectory)
}

/// Trace-orthonormal multipole basis: the dipole triple, the quadrupole
/// quintet (S >= 1), and a Gram-Schmidt completion for the higher moments.
/// All elements satisfy tr(T_a T_b) = 2 delta_ab.
#[derive(Debug, Clone)]
pub struct MultipoleBasis {
    pub labels: Vec<String>,
    pub ops: Vec<CMatrix>,
    pub dipole_count: usize,
    pub quadrupole_count: usize,
}

pub fn multipole_basis(rep: &RepresentationSpec) -> Result<MultipoleBasis> {
    let gen = algebra::build_generators(rep)?;
    let mut ops: Vec<CMatrix> = Vec::new();
    let mut labels = Vec::new();

    let s = rep.spin();
    let dip_norm = (2.0 * 3.0 / (s * (s + 1.0) * (2.0 * s + 1.0))).sqrt() / rep.hbar;
    for (label, op) in [
        ("dip_x", gen.s_x()),
        ("dip_y", gen.s_y()),
        ("dip_z", gen.s_z.clone()),
    ] {
        ops.push(op * linalg::cr(dip_norm));
        labels.push(label.to_string());
    }

    let quad = quadrupole_operators(&gen);
    let quadrupole_count = quad.len();
    let quad_labels = ["quad_xy", "quad_yz", "quad_zx", "quad_x2y2", "quad_3z2"];
    for (label, op) in quad_labels.iter().zip(quad) {
        ops.push(op);
        labels.push(label.to_string());
    }

    // complete the basis from the canonical generators
    let target = rep.n * rep.n - 1;
    let mut higher = 0usize;
    for g in gen.all() {
        if ops.len() == target {
            break;
        }
        let mut residual = g.clone();
        for b in &ops {
            let coeff = linalg::hs_inner(b, &residual) / linalg::cr(2.0);
            residual -= b * coeff;
        }
        let norm_sq = linalg::hs_inner(&residual, &residual).re;
        if norm_sq > 1e-16 {
            ops.push(residual * linalg::cr((2.0 / norm_sq).sqrt()));
            higher += 1;
            labels.push(format!("higher_{higher}"));
        }
    }
    debug_assert_eq!(ops.len(), target);

    Ok(MultipoleBasis {
        labels,
        ops,
        dipole_count: 3,
        quadrupole_count,
    })
}

/// Per-site multipole expectation series of a chain trajectory.
#[derive(Debug, Clone)]
pub struct MultipoleSeries {
    pub labels: Vec<String>,
    pub dipole_count: usize,
    pub quadrupole_count: usize,
    /// Indexed `[time][site][component]`.
    pub values: Vec<Vec<Vec<f64>>>,
}

/// Evaluate dipole and higher multipole components for every recorded
/// site state of a chain trajectory (n^2 - 1 components per site,
/// 3 dipole + (n^2 - 4) higher).
pub fn multipole_series(
    trajectory: &ChainTrajectory,
    rep: &RepresentationSpec,
) -> Result<MultipoleSeries> {
    let basis = multipole_basis(rep)?;
    let mut values = Vec::with_capacity(trajectory.times.len());
    for row in &trajectory.site_psi_series {
        let mut per_site = Vec::with_capacity(row.len());
        for psi in row {
            let st = state_from_psi(psi, rep)?;
            let comps: Vec<f64> = basis
                .ops
                .iter()
                .map(|m| st.vector.dotc(&(m * &st.vector)).re)
                .collect();
            per_site.push(comps);
        }
        values.push(per_site);
    }
    Ok(MultipoleSeries {
        labels: basis.labels,
        dipole_count: basis.dipole_count,
        quadrupole_count: basis.quadrupole_count,
        values,
    })
}

/// Largest dense Hilbert dimension accepted by the chain oracle.
pub const CHAIN_ORACLE_DIM_CAP: usize = 4096;

/// Infidelity between the mean-field product evolution and the exact
/// many-body evolution at time `t`. Reported, never asserted: the product
/// ansatz is not exact for coupled chains.
pub fn chain_quantum_deviation(
    initial: &ChainState,
    model: &ChainModel,
    t: f64,
    tolerance: f64,
) -> Result<f64> {
    let n = model.rep.n;
    let dim = n.checked_pow(model.sites as u32).unwrap_or(usize::MAX);
    if dim > CHAIN_ORACLE_DIM_CAP {
        return Err(Error::DimensionCap {
            dim,
            max: CHAIN_ORACLE_DIM_CAP,
        });
    }

    let site_op = |m: &CMatrix, site: usize| -> CMatrix {
        let mut out = CMatrix::identity(1, 1);
        for a in 0..model.sites {
            let factor = if a == site {
                m.clone()
            } else {
                CMatrix::identity(n, n)
            };
            out = kron(&out, &factor);
        }
        out
    };

    let mut h_full = CMatrix::zeros(dim, dim);
    for bond in &model.bonds {
        let ops = match bond.kind {
            CouplingKind::Bilinear => &model.dipole_ops,
            CouplingKind::Biquadratic => &model.quadrupole_ops,
        };
        for op in ops {
            h_full += site_op(op, bond.i) * site_op(op, bond.j) * linalg::cr(bond.strength);
        }
    }
    if let Some(field) = &model.field {
        for a in 0..model.sites {
            h_full += site_op(field.matrix(), a);
        }
    }

    let product_vector = |psis: &[CVector]| -> Result<CVector> {
        let mut v = CVector::from_element(1, linalg::C_ONE);
        for psi in psis {
            let st = state_from_psi(psi, &model.rep)?;
            let mut next = CVector::zeros(v.len() * n);
            for (i, a) in v.iter().enumerate() {
                for (k, b) in st.vector.iter().enumerate() {
                    next[i * n + k] = a * b;
                }
            }
            v = next;
        }
        Ok(v)
    };

    let exact = linalg::evolution_operator(&h_full, t, model.rep.hbar) * product_vector(&initial.psis)?;
    let trajectory = chain_evolve_sampled(initial, model, &[0.0, t], tolerance)?;
    let mean_field = product_vector(trajectory.site_psi_series.last().unwrap())?;
    Ok(1.0 - mean_field.dotc(&exact).norm_sqr())
}
