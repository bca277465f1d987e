//! Coherent states of SU(n): group-parameter and stereographic charts,
//! overlaps, expectation values, and the resolution-of-identity measure.
//!
//! Fundamental-mode states live in C^n and are parameterized by n-1
//! complex stereographic coordinates psi with representative
//! (1 + sum |psi_i|^2)^(-1/2) (|0> + sum_i psi_i |i>), where |0> is the
//! lowest-weight reference state. For SU(2) the crate additionally
//! supports the (2J+1)-dimensional spin-J state
//! (1+|xi|^2)^(-J) exp(xi J_+) |J,-J>.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::algebra::{self, basis_unit};
use crate::error::Error;
use crate::hamiltonian::HamiltonianSpec;
use crate::linalg::{self, expm, CMatrix, CVector, C_ONE};
use crate::mc;
use crate::rep::RepresentationSpec;
use crate::Result;

/// Group-displacement parameters xi (for SU(2), the single alpha).
#[derive(Debug, Clone)]
pub struct CoherentParams {
    pub xi: CVector,
    pub rep: RepresentationSpec,
}

impl CoherentParams {
    pub fn new(xi: CVector, rep: RepresentationSpec) -> Result<Self> {
        if xi.len() != rep.num_params() {
            return Err(Error::DimensionMismatch {
                expected: rep.num_params(),
                got: xi.len(),
            });
        }
        if xi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { xi, rep })
    }

    /// SU(2) alpha form; the rotation angle is restricted to |alpha| <= pi/2.
    pub fn su2_alpha(alpha: Complex64, rep: RepresentationSpec) -> Result<Self> {
        if rep.n != 2 {
            return Err(Error::UnsupportedDimension(rep.n));
        }
        if alpha.norm() > FRAC_PI_2 + 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "|alpha| = {} exceeds pi/2",
                alpha.norm()
            )));
        }
        Self::new(CVector::from_element(1, alpha), rep)
    }

    /// Euclidean norm |xi|.
    pub fn norm(&self) -> f64 {
        self.xi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Normalized coherent state with its stereographic coordinates.
///
/// `vector` has unit norm and is proportional (up to a global phase) to
/// (|0> + sum_i psi_i |i>) / sqrt(1 + sum |psi_i|^2). States are
/// physically identified up to that phase; comparisons use fidelity.
#[derive(Debug, Clone)]
pub struct CoherentState {
    pub psi: CVector,
    pub vector: CVector,
    pub rep: RepresentationSpec,
    /// SU(2) spin-J mode marker; `None` means fundamental mode.
    pub spin_j: Option<f64>,
}

impl CoherentState {
    /// Hilbert-space dimension of the representative vector.
    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    /// 1 + sum |psi_i|^2.
    pub fn norm_factor(&self) -> f64 {
        1.0 + self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Representation acting on the stored vector (n for fundamental mode,
    /// 2J+1 for spin-J mode).
    pub fn hilbert_rep(&self) -> RepresentationSpec {
        RepresentationSpec {
            n: self.dim(),
            hbar: self.rep.hbar,
        }
    }
}

/// Stereographic coordinates from group parameters:
/// psi_i = (xi_i / |xi|) tan |xi|.
pub fn psi_from_xi(params: &CoherentParams) -> Result<CVector> {
    let theta = params.norm();
    if (theta - FRAC_PI_2).abs() < 1e-12 {
        return Err(Error::ChartSingularity((theta - FRAC_PI_2).abs()));
    }
    // tan(theta)/theta, with the series for small angles
    let factor = if theta < 1e-8 {
        1.0 + theta * theta / 3.0
    } else {
        theta.tan() / theta
    };
    Ok(params.xi.map(|z| z * factor))
}

/// Fundamental-mode state from stereographic coordinates.
pub fn state_from_psi(psi: &CVector, rep: &RepresentationSpec) -> Result<CoherentState> {
    if psi.len() != rep.num_params() {
        return Err(Error::DimensionMismatch {
            expected: rep.num_params(),
            got: psi.len(),
        });
    }
    if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = rep.n;
    let norm_sq = 1.0 + psi.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let scale = linalg::cr(1.0 / norm_sq.sqrt());
    let vector = CVector::from_fn(n, |k, _| {
        if k == 0 {
            scale
        } else {
            psi[k - 1] * scale
        }
    });
    Ok(CoherentState {
        psi: psi.clone(),
        vector,
        rep: *rep,
        spin_j: None,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut out = 1.0;
    for i in 0..k {
        out = out * (n - i) as f64 / (i + 1) as f64;
    }
    out
}

fn validate_spin_j(j: f64) -> Result<usize> {
    let two_j = (2.0 * j).round();
    if !(j > 0.0) || (2.0 * j - two_j).abs() > 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "spin J must be a positive half-integer, got {j}"
        )));
    }
    Ok(two_j as usize)
}

/// SU(2) spin-J state from the stereographic parameter xi:
/// (1+|xi|^2)^(-J) sum_k sqrt(C(2J,k)) xi^k |J, -J+k>.
pub fn spin_j_state_from_xi(xi: Complex64, j: f64, hbar: f64) -> Result<CoherentState> {
    let two_j = validate_spin_j(j)?;
    if !xi.re.is_finite() || !xi.im.is_finite() {
        return Err(Error::NonFinite);
    }
    let dim = two_j + 1;
    let norm = (1.0 + xi.norm_sqr()).powf(-j);
    let mut vector = CVector::zeros(dim);
    let mut power = C_ONE;
    for k in 0..dim {
        vector[k] = power * linalg::cr(binomial(two_j, k).sqrt() * norm);
        power *= xi;
    }
    Ok(CoherentState {
        psi: CVector::from_element(1, xi),
        vector,
        rep: RepresentationSpec { n: 2, hbar },
        spin_j: Some(j),
    })
}

/// State built by exponentiating the displacement directly:
/// exp(sum_i (xi_i T_i^+ - conj(xi_i) T_i^-)) |0>, with T_i^+ = |i><0|.
///
/// The result equals `state_from_psi(psi_from_xi(params))` up to a global
/// phase; the vector returned here is the raw matrix-exponential output.
pub fn state_from_exponential(params: &CoherentParams) -> Result<CoherentState> {
    let theta = params.norm();
    if (theta - FRAC_PI_2).abs() < 1e-12 {
        return Err(Error::ChartSingularity((theta - FRAC_PI_2).abs()));
    }
    let n = params.rep.n;
    let mut gen = CMatrix::zeros(n, n);
    for i in 1..n {
        let xi = params.xi[i - 1];
        gen += basis_unit(n, i, 0) * xi - basis_unit(n, 0, i) * xi.conj();
    }
    let vector = expm(&gen).column(0).into_owned();
    // the displaced reference stays inside the chart away from |xi| = pi/2
    let psi = CVector::from_fn(n - 1, |i, _| vector[i + 1] / vector[0]);
    Ok(CoherentState {
        psi,
        vector,
        rep: params.rep,
        spin_j: None,
    })
}

/// Spin-J analog of `state_from_exponential`:
/// exp(alpha J_+ - conj(alpha) J_-) |J,-J> with dimensionless ladders.
pub fn spin_j_state_from_exponential(alpha: Complex64, j: f64, hbar: f64) -> Result<CoherentState> {
    let two_j = validate_spin_j(j)?;
    let dim = two_j + 1;
    let rep_dim = RepresentationSpec { n: dim, hbar: 1.0 };
    let (_, s_plus, s_minus) = algebra::spin_triple(&rep_dim);
    let gen = &s_plus * alpha - &s_minus * alpha.conj();
    let vector = expm(&gen).column(0).into_owned();

    let theta = alpha.norm();
    let xi = if theta < 1e-300 {
        Complex64::new(0.0, 0.0)
    } else {
        alpha / theta * theta.tan()
    };
    Ok(CoherentState {
        psi: CVector::from_element(1, xi),
        vector,
        rep: RepresentationSpec { n: 2, hbar },
        spin_j: Some(j),
    })
}

/// Hermitian inner product <a|b> of the stored representatives.
pub fn overlap(a: &CoherentState, b: &CoherentState) -> Result<Complex64> {
    if a.rep.n != b.rep.n || a.spin_j != b.spin_j || a.dim() != b.dim() {
        return Err(Error::RepresentationMismatch);
    }
    Ok(a.vector.dotc(&b.vector))
}

/// Squared overlap magnitude |<a|b>|^2.
pub fn fidelity(a: &CoherentState, b: &CoherentState) -> Result<f64> {
    Ok(overlap(a, b)?.norm_sqr())
}

/// Expectation value of a hermitian matrix in the given state.
pub fn expectation_matrix(state: &CoherentState, m: &CMatrix) -> Result<f64> {
    if m.nrows() != state.dim() || m.ncols() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: m.nrows(),
        });
    }
    let residual = linalg::hermiticity_residual(m);
    if residual > crate::hamiltonian::HERMITICITY_TOL {
        return Err(Error::NonHermitian { residual });
    }
    let z = state.vector.dotc(&(m * &state.vector));
    assert!(
        z.im.abs() < 1e-12 * z.norm().max(1.0),
        "imaginary residue {} in hermitian expectation",
        z.im
    );
    Ok(z.re)
}

/// Expectation value of a Hamiltonian in the given state.
pub fn expectation(state: &CoherentState, h: &HamiltonianSpec) -> Result<f64> {
    expectation_matrix(state, h.matrix())
}

/// Expectation values of every generator plus the quadratic moments
/// Qzz = <s_z s_z>, Qpm = <s_+ s_->, Qmp = <s_- s_+>, and the dipole
/// triple Sx, Sy, Sz.
pub fn multipole_expectations(state: &CoherentState) -> Result<BTreeMap<String, f64>> {
    let gen = algebra::build_generators(&state.hilbert_rep())?;
    let mut out = BTreeMap::new();
    for (a, g) in gen.all().iter().enumerate() {
        out.insert(gen.label(a).to_string(), expectation_matrix(state, g)?);
    }
    out.insert("Sx".into(), expectation_matrix(state, &gen.s_x())?);
    out.insert("Sy".into(), expectation_matrix(state, &gen.s_y())?);
    out.insert("Sz".into(), expectation_matrix(state, &gen.s_z)?);
    out.insert(
        "Qzz".into(),
        expectation_matrix(state, &(&gen.s_z * &gen.s_z))?,
    );
    out.insert(
        "Qpm".into(),
        expectation_matrix(state, &(&gen.s_plus * &gen.s_minus))?,
    );
    out.insert(
        "Qmp".into(),
        expectation_matrix(state, &(&gen.s_minus * &gen.s_plus))?,
    );
    Ok(out)
}

/// Invariant measure on the coherent-state manifold.
///
/// Fundamental mode: d mu = (n!/pi^(n-1)) d^(2(n-1))psi / (1+sum|psi|^2)^n,
/// the unique rotation-invariant density with integral |psi><psi| d mu = I
/// (total mass n). SU(2) spin-J: (2J+1)/pi / (1+|xi|^2)^2 with mass 2J+1.
#[derive(Debug, Clone, Copy)]
pub struct Measure {
    pub rep: RepresentationSpec,
    pub spin_j: Option<f64>,
}

impl Measure {
    pub fn fundamental(rep: RepresentationSpec) -> Self {
        Self { rep, spin_j: None }
    }

    pub fn spin_j(j: f64, hbar: f64) -> Result<Self> {
        validate_spin_j(j)?;
        Ok(Self {
            rep: RepresentationSpec { n: 2, hbar },
            spin_j: Some(j),
        })
    }

    /// Number of complex coordinates.
    fn complex_dim(&self) -> usize {
        match self.spin_j {
            Some(_) => 1,
            None => self.rep.num_params(),
        }
    }

    /// Density exponent p in (1 + |psi|^2)^(-p).
    fn exponent(&self) -> usize {
        match self.spin_j {
            Some(_) => 2,
            None => self.rep.n,
        }
    }

    /// Normalization constant (n!/pi^(n-1) or (2J+1)/pi).
    pub fn normalization(&self) -> f64 {
        match self.spin_j {
            Some(j) => (2.0 * j + 1.0) / PI,
            None => {
                let n = self.rep.n;
                (1..=n).map(|k| k as f64).product::<f64>() / PI.powi(n as i32 - 1)
            }
        }
    }

    /// Total mass of the measure (n or 2J+1).
    pub fn mass(&self) -> f64 {
        match self.spin_j {
            Some(j) => 2.0 * j + 1.0,
            None => self.rep.n as f64,
        }
    }

    /// Density value at the given coordinates.
    pub fn density(&self, psi: &CVector) -> f64 {
        let norm_sq = 1.0 + psi.iter().map(|z| z.norm_sqr()).sum::<f64>();
        self.normalization() / norm_sq.powi(self.exponent() as i32)
    }

    /// Draw coordinates from the normalized measure.
    ///
    /// Exact inverse-CDF sampling: the direction is uniform on the sphere
    /// and the radial variable u = r^2/(1+r^2) follows Beta(m, 1), so
    /// u = V^(1/m) for uniform V. Nothing is rejected.
    pub fn sample(&self, rng: &mut impl Rng) -> CVector {
        let m = self.complex_dim();
        debug_assert_eq!(self.exponent(), m + 1, "radial law assumes p = m + 1");
        let mut dir = CVector::from_fn(m, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let mut norm = dir.norm();
        while norm < 1e-12 {
            dir = CVector::from_fn(m, |_, _| {
                Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            norm = dir.norm();
        }
        let v: f64 = rng.random();
        let u = v.powf(1.0 / m as f64);
        let r = (u / (1.0 - u)).sqrt();
        dir * linalg::cr(r / norm)
    }
}

/// Monte Carlo residual report for the completeness relation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompletenessReport {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    /// Largest entry modulus of (estimate - I).
    pub residual_max: f64,
    /// Largest per-entry standard error of the mean.
    pub std_error_max: f64,
    /// Largest residual-to-standard-error ratio over all entry components.
    pub max_z: f64,
    /// Trace of the estimate (expected: n).
    pub trace_estimate: f64,
}

struct CompletenessChunk {
    sum: Vec<Complex64>,
    sq_re: Vec<f64>,
    sq_im: Vec<f64>,
    count: u64,
}

/// Monte Carlo check of the resolution of identity
/// (integral of |psi><psi| d mu = I) for the fundamental measure.
///
/// Deterministic for a fixed seed, independent of the worker count.
pub fn verify_resolution_of_identity(
    rep: &RepresentationSpec,
    samples: usize,
    seed: u64,
    workers: usize,
) -> Result<CompletenessReport> {
    if samples < 10_000 {
        return Err(Error::TooFewSamples {
            got: samples,
            min: 10_000,
        });
    }
    let n = rep.n;
    let measure = Measure::fundamental(*rep);
    let mass = measure.mass();
    let workers = mc::resolve_workers(Some(workers));

    let chunks = mc::run_chunks(samples, seed, workers, |_, len, rng| {
        let mut acc = CompletenessChunk {
            sum: vec![Complex64::new(0.0, 0.0); n * n],
            sq_re: vec![0.0; n * n],
            sq_im: vec![0.0; n * n],
            count: len as u64,
        };
        for _ in 0..len {
            let psi = measure.sample(rng);
            let norm_sq = 1.0 + psi.iter().map(|z| z.norm_sqr()).sum::<f64>();
            let scale = (mass / norm_sq).sqrt();
            // u = sqrt(mass) * normalized coherent vector
            let u = CVector::from_fn(n, |k, _| {
                if k == 0 {
                    linalg::cr(scale)
                } else {
                    psi[k - 1] * scale
                }
            });
            for i in 0..n {
                for j in 0..n {
                    let x = u[i] * u[j].conj();
                    let idx = i * n + j;
                    acc.sum[idx] += x;
                    acc.sq_re[idx] += x.re * x.re;
                    acc.sq_im[idx] += x.im * x.im;
                }
            }
        }
        acc
    });

    // merge in chunk order for worker-count independence
    let mut sum = vec![Complex64::new(0.0, 0.0); n * n];
    let mut sq_re = vec![0.0; n * n];
    let mut sq_im = vec![0.0; n * n];
    let mut count = 0u64;
    for c in &chunks {
        for idx in 0..n * n {
            sum[idx] += c.sum[idx];
            sq_re[idx] += c.sq_re[idx];
            sq_im[idx] += c.sq_im[idx];
        }
        count += c.count;
    }

    let total = count as f64;
    let mut residual_max = 0.0f64;
    let mut std_error_max = 0.0f64;
    let mut max_z = 0.0f64;
    let mut trace_estimate = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let idx = i * n + j;
            let mean = sum[idx] / total;
            if i == j {
                trace_estimate += mean.re;
            }
            let target = if i == j { 1.0 } else { 0.0 };
            let d_re = mean.re - target;
            let d_im = mean.im;
            residual_max = residual_max.max((d_re * d_re + d_im * d_im).sqrt());

            let se = |sq: f64, m: f64| -> f64 {
                let var = (sq / total - m * m).max(0.0) * total / (total - 1.0);
                (var / total).sqrt()
            };
            let se_re = se(sq_re[idx], mean.re);
            let se_im = se(sq_im[idx], mean.im);
            std_error_max = std_error_max.max((se_re * se_re + se_im * se_im).sqrt());
            for (d, s) in [(d_re, se_re), (d_im, se_im)] {
                if s > 0.0 {
                    max_z = max_z.max(d.abs() / s);
                } else if d.abs() > 1e-14 {
                    max_z = f64::INFINITY;
                }
            }
        }
    }

    Ok(CompletenessReport {
        n,
        samples,
        seed,
        residual_max,
        std_error_max,
        max_z,
        trace_estimate,
    })
}

#[derive(Serialize, Deserialize)]
struct CoherentStateJson {
    n: usize,
    psi_re: Vec<f64>,
    psi_im: Vec<f64>,
    #[serde(rename = "spin_J", default, skip_serializing_if = "Option::is_none")]
    spin_j: Option<f64>,
}

impl Serialize for CoherentState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        CoherentStateJson {
            n: self.rep.n,
            psi_re: self.psi.iter().map(|z| z.re).collect(),
            psi_im: self.psi.iter().map(|z| z.im).collect(),
            spin_j: self.spin_j,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CoherentState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = CoherentStateJson::deserialize(deserializer)?;
        if raw.psi_re.len() != raw.psi_im.len() {
            return Err(D::Error::custom("psi_re and psi_im lengths differ"));
        }
        let psi = CVector::from_fn(raw.psi_re.len(), |i, _| {
            Complex64::new(raw.psi_re[i], raw.psi_im[i])
        });
        match raw.spin_j {
            Some(j) => {
                if psi.len() != 1 || raw.n != 2 {
                    return Err(D::Error::custom("spin-J mode requires n = 2 and one psi"));
                }
                spin_j_state_from_xi(psi[0], j, 1.0).map_err(D::Error::custom)
            }
            None => {
                let rep = RepresentationSpec::new(raw.n).map_err(D::Error::custom)?;
                state_from_psi(&psi, &rep).map_err(D::Error::custom)
            }
        }
    }
}
