//! Transition amplitudes and numerical checks of the time-sliced
//! propagator structure.
//!
//! The exact amplitude <a| exp(-i H t / hbar) |b> is the ground truth.
//! Two checks validate the slicing machinery without sampling whole paths:
//! a one-insertion completeness (semigroup) identity evaluated by Monte
//! Carlo over the invariant measure, and the first-order convergence of
//! the discrete log-overlap kinetic term to the continuum Lagrangian.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coherent::{self, CoherentState, Measure};
use crate::dynamics;
use crate::error::Error;
use crate::hamiltonian::HamiltonianSpec;
use crate::linalg::{self, CVector, C_I};
use crate::mc;
use crate::rep::RepresentationSpec;
use crate::Result;

/// How an approximate amplitude was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropagatorMethod {
    SemigroupMc,
    ShortTimeProduct,
}

/// Exact and approximate amplitudes with error metadata.
#[derive(Debug, Clone)]
pub struct PropagatorReport {
    pub exact: Complex64,
    pub approx: Complex64,
    pub abs_error: f64,
    pub method: PropagatorMethod,
    pub samples: usize,
    pub std_error: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct PropagatorReportJson {
    exact_re: f64,
    exact_im: f64,
    approx_re: f64,
    approx_im: f64,
    abs_error: f64,
    method: PropagatorMethod,
    samples: usize,
    std_error: Option<f64>,
}

impl Serialize for PropagatorReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PropagatorReportJson {
            exact_re: self.exact.re,
            exact_im: self.exact.im,
            approx_re: self.approx.re,
            approx_im: self.approx.im,
            abs_error: self.abs_error,
            method: self.method,
            samples: self.samples,
            std_error: self.std_error,
        }
        .serialize(s)
    }
}

/// Exact transition amplitude <a| exp(-i H t / hbar) |b>.
pub fn exact_amplitude(
    a: &CoherentState,
    b: &CoherentState,
    h: &HamiltonianSpec,
    t: f64,
) -> Result<Complex64> {
    if a.rep.n != b.rep.n || a.dim() != b.dim() || a.spin_j != b.spin_j {
        return Err(Error::RepresentationMismatch);
    }
    if h.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: h.dim(),
        });
    }
    if a.dim() > dynamics::ORACLE_DIM_CAP {
        return Err(Error::DimensionCap {
            dim: a.dim(),
            max: dynamics::ORACLE_DIM_CAP,
        });
    }
    let u = linalg::evolution_operator(h.matrix(), t, a.rep.hbar);
    Ok(a.vector.dotc(&(u * &b.vector)))
}

/// One-insertion completeness check: T(t) is re-estimated as
/// integral d mu(psi_m) <a|U(t/2)|psi_m><psi_m|U(t/2)|b> by Monte Carlo
/// over the invariant measure and compared against the exact amplitude.
///
/// Deterministic for a fixed seed, independent of the worker count.
pub fn semigroup_mc_check(
    a: &CoherentState,
    b: &CoherentState,
    h: &HamiltonianSpec,
    t: f64,
    samples: usize,
    seed: u64,
    workers: usize,
) -> Result<PropagatorReport> {
    if a.spin_j.is_some() || b.spin_j.is_some() {
        return Err(Error::UnsupportedDimension(a.dim()));
    }
    let n = a.rep.n;
    if !(2..=3).contains(&n) {
        return Err(Error::UnsupportedDimension(n));
    }
    if samples < 100_000 {
        return Err(Error::TooFewSamples {
            got: samples,
            min: 100_000,
        });
    }
    let exact = exact_amplitude(a, b, h, t)?;

    let measure = Measure::fundamental(a.rep);
    let mass = measure.mass();
    let u_half = linalg::evolution_operator(h.matrix(), t / 2.0, a.rep.hbar);
    // <a|U|u> = wa . u (conjugated dot), <u|U|b> = conj(u) . vb
    let wa = u_half.adjoint() * &a.vector;
    let vb = &u_half * &b.vector;
    let workers = mc::resolve_workers(Some(workers));

    struct Chunk {
        sum: Complex64,
        sq_re: f64,
        sq_im: f64,
        count: u64,
    }

    let chunks = mc::run_chunks(samples, seed, workers, |_, len, rng| {
        let mut acc = Chunk {
            sum: Complex64::new(0.0, 0.0),
            sq_re: 0.0,
            sq_im: 0.0,
            count: len as u64,
        };
        for _ in 0..len {
            let psi = measure.sample(rng);
            let norm_sq = 1.0 + psi.iter().map(|z| z.norm_sqr()).sum::<f64>();
            let scale = 1.0 / norm_sq.sqrt();
            let u = CVector::from_fn(n, |k, _| {
                if k == 0 {
                    linalg::cr(scale)
                } else {
                    psi[k - 1] * scale
                }
            });
            let f = wa.dotc(&u) * u.dotc(&vb) * linalg::cr(mass);
            acc.sum += f;
            acc.sq_re += f.re * f.re;
            acc.sq_im += f.im * f.im;
        }
        acc
    });

    let mut sum = Complex64::new(0.0, 0.0);
    let mut sq_re = 0.0;
    let mut sq_im = 0.0;
    let mut count = 0u64;
    for c in &chunks {
        sum += c.sum;
        sq_re += c.sq_re;
        sq_im += c.sq_im;
        count += c.count;
    }
    let total = count as f64;
    let mean = sum / total;
    let var = |sq: f64, m: f64| (sq / total - m * m).max(0.0) * total / (total - 1.0);
    let std_error = ((var(sq_re, mean.re) + var(sq_im, mean.im)) / total).sqrt();

    Ok(PropagatorReport {
        exact,
        approx: mean,
        abs_error: (mean - exact).norm(),
        method: PropagatorMethod::SemigroupMc,
        samples,
        std_error: Some(std_error),
    })
}

/// Convergence data for the short-time kinetic term.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShortTimeReport {
    pub epsilon: f64,
    /// max_t | (i hbar / eps) log <psi(t)|psi(t+eps)> - L_kin(t) |
    pub max_deviation: f64,
    /// Same deviation at eps/2.
    pub max_deviation_half: f64,
    /// max_deviation / max_deviation_half; 2 for first-order convergence.
    pub richardson_ratio: f64,
    /// Estimated slope C with deviation <= C eps.
    pub slope: f64,
}

/// Verify that the discrete log-overlap kinetic term converges to the
/// continuum kinetic Lagrangian at first order in the slice width.
///
/// `path` must be a smooth map t -> psi (fundamental coordinates);
/// derivatives are taken by central differences internally.
pub fn short_time_kinetic_check(
    path: &dyn Fn(f64) -> CVector,
    rep: &RepresentationSpec,
    t_samples: &[f64],
    epsilon: f64,
) -> Result<ShortTimeReport> {
    if !(epsilon > 0.0) || epsilon > 1e-3 {
        return Err(Error::InvalidConfig(format!(
            "slice width {epsilon:e} must be in (0, 1e-3]"
        )));
    }
    if t_samples.is_empty() {
        return Err(Error::InvalidConfig("no sample times".into()));
    }
    let hbar = rep.hbar;

    let kinetic = |t: f64| -> Result<f64> {
        let fd = 1e-6;
        let psi = path(t);
        let dot = (path(t + fd) - path(t - fd)) / linalg::cr(2.0 * fd);
        let norm_factor = 1.0 + psi.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let k: Complex64 = psi
            .iter()
            .zip(dot.iter())
            .map(|(p, d)| p.conj() * d)
            .sum();
        // i hbar (k - conj k) / (2 N) = -hbar Im(k) / N
        Ok(-hbar * k.im / norm_factor)
    };

    let discrete = |t: f64, eps: f64| -> Result<Complex64> {
        let s0 = coherent::state_from_psi(&path(t), rep)?;
        let s1 = coherent::state_from_psi(&path(t + eps), rep)?;
        let ovl = coherent::overlap(&s0, &s1)?;
        Ok(C_I * linalg::cr(hbar / eps) * ovl.ln())
    };

    let max_dev = |eps: f64| -> Result<f64> {
        let mut worst = 0.0f64;
        for &t in t_samples {
            let d = discrete(t, eps)?;
            let k = kinetic(t)?;
            worst = worst.max((d - linalg::cr(k)).norm());
        }
        Ok(worst)
    };

    let d1 = max_dev(epsilon)?;
    let d2 = max_dev(epsilon / 2.0)?;
    let ratio = if d1 < 1e-13 && d2 < 1e-13 {
        // constant (or stationary) path: both sides vanish identically
        2.0
    } else {
        d1 / d2
    };
    if !(1.2..=3.2).contains(&ratio) {
        return Err(Error::NonSmoothPath { ratio });
    }
    Ok(ShortTimeReport {
        epsilon,
        max_deviation: d1,
        max_deviation_half: d2,
        richardson_ratio: ratio,
        slope: d1 / epsilon,
    })
}

/// A discretely sampled path with uniform time step.
#[derive(Debug, Clone)]
pub struct PathSamples {
    pub times: Vec<f64>,
    pub psis: Vec<CVector>,
}

impl PathSamples {
    pub fn new(times: Vec<f64>, psis: Vec<CVector>) -> Result<Self> {
        if times.len() != psis.len() || times.len() < 3 {
            return Err(Error::InvalidConfig(
                "need at least three uniformly spaced samples".into(),
            ));
        }
        let step = times[1] - times[0];
        if step <= 0.0 {
            return Err(Error::InvalidConfig("times must increase".into()));
        }
        for w in times.windows(2) {
            if ((w[1] - w[0]) - step).abs() > 1e-9 * step {
                return Err(Error::InvalidConfig("time step must be uniform".into()));
            }
        }
        Ok(Self { times, psis })
    }

    pub fn step(&self) -> f64 {
        self.times[1] - self.times[0]
    }
}

/// Trapezoidal action integral of the Lagrangian along the sampled path.
///
/// Velocities come from second-order finite differences on the samples,
/// so the result is exact to O(step^2) for smooth paths.
pub fn action_along_path(
    path: &PathSamples,
    h: &HamiltonianSpec,
    rep: &RepresentationSpec,
) -> Result<f64> {
    let m = path.times.len();
    let dt = path.step();
    let mut lagrangians = Vec::with_capacity(m);
    for j in 0..m {
        let dot = if j == 0 {
            (&path.psis[1] * linalg::cr(4.0)
                - &path.psis[2]
                - &path.psis[0] * linalg::cr(3.0))
                / linalg::cr(2.0 * dt)
        } else if j == m - 1 {
            (&path.psis[m - 1] * linalg::cr(3.0) - &path.psis[m - 2] * linalg::cr(4.0)
                + &path.psis[m - 3])
                / linalg::cr(2.0 * dt)
        } else {
            (&path.psis[j + 1] - &path.psis[j - 1]) / linalg::cr(2.0 * dt)
        };
        let state = coherent::state_from_psi(&path.psis[j], rep)?;
        lagrangians.push(dynamics::lagrangian(&state, &dot, h)?);
    }
    let mut action = 0.0;
    for j in 0..m - 1 {
        action += 0.5 * dt * (lagrangians[j] + lagrangians[j + 1]);
    }
    Ok(action)
}
