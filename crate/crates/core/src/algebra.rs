//! Generator bases of su(n), spin ladder operators, and Casimir checks.
//!
//! The basis follows the elementary-matrix scheme: for each index pair
//! h < j there is a symmetric generator Theta = e(h,j) + e(j,h) and an
//! antisymmetric one Beta = -i(e(h,j) - e(j,h)); the n-1 diagonal
//! generators Eta_m complete the set. All generators are hermitian,
//! traceless, and trace-orthogonal with tr(T_a T_b) = 2 delta_ab, the
//! Pauli/Gell-Mann normalization.

use num_complex::Complex64;

use crate::error::Error;
use crate::linalg::{self, CMatrix, C_I, C_ONE};
use crate::rep::RepresentationSpec;
use crate::Result;

pub use crate::linalg::commutator;

/// Complete generator set of su(n) plus the spin-S ladder triple.
#[derive(Debug, Clone)]
pub struct GeneratorSet {
    pub rep: RepresentationSpec,
    /// Symmetric off-diagonal generators, index pairs (h, j) with h < j in
    /// lexicographic order.
    pub off_diag_sym: Vec<CMatrix>,
    /// Antisymmetric off-diagonal generators, same pair order.
    pub off_diag_antisym: Vec<CMatrix>,
    /// Diagonal generators Eta_m, m = 1..n-1.
    pub diagonal: Vec<CMatrix>,
    /// Spin projection operator, hbar * diag(-S, -S+1, ..., S).
    pub s_z: CMatrix,
    /// Raising operator in the lowest-weight-first basis.
    pub s_plus: CMatrix,
    /// Lowering operator, adjoint of `s_plus`.
    pub s_minus: CMatrix,
    labels: Vec<String>,
}

/// Elementary matrix with a single 1 in row `h`, column `j` (0-based).
pub fn basis_unit(n: usize, h: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    m[(h, j)] = C_ONE;
    m
}

/// Build the full su(n) generator set for the given representation.
pub fn build_generators(rep: &RepresentationSpec) -> Result<GeneratorSet> {
    if rep.n < 2 {
        return Err(Error::InvalidDimension(rep.n));
    }
    let n = rep.n;

    let mut off_diag_sym = Vec::with_capacity(n * (n - 1) / 2);
    let mut off_diag_antisym = Vec::with_capacity(n * (n - 1) / 2);
    let mut labels_sym = Vec::new();
    let mut labels_antisym = Vec::new();
    for h in 0..n {
        for j in (h + 1)..n {
            let e_hj = basis_unit(n, h, j);
            let e_jh = basis_unit(n, j, h);
            off_diag_sym.push(&e_hj + &e_jh);
            off_diag_antisym.push((&e_hj - &e_jh) * (-C_I));
            labels_sym.push(format!("theta_{}_{}", h + 1, j + 1));
            labels_antisym.push(format!("beta_{}_{}", h + 1, j + 1));
        }
    }

    let mut diagonal = Vec::with_capacity(n - 1);
    let mut labels_diag = Vec::new();
    for m in 1..n {
        let norm = (2.0 / (m as f64 * (m + 1) as f64)).sqrt();
        let mut d = CMatrix::zeros(n, n);
        for j in 0..m {
            d[(j, j)] = C_ONE;
        }
        d[(m, m)] = Complex64::new(-(m as f64), 0.0);
        diagonal.push(d * linalg::cr(norm));
        labels_diag.push(format!("eta_{m}"));
    }

    let (s_z, s_plus, s_minus) = spin_triple(rep);

    let mut labels = labels_sym;
    labels.extend(labels_antisym);
    labels.extend(labels_diag);

    Ok(GeneratorSet {
        rep: *rep,
        off_diag_sym,
        off_diag_antisym,
        diagonal,
        s_z,
        s_plus,
        s_minus,
        labels,
    })
}

/// Spin-S ladder triple (s_z, s_+, s_-) in the lowest-weight-first basis.
pub fn spin_triple(rep: &RepresentationSpec) -> (CMatrix, CMatrix, CMatrix) {
    let n = rep.n;
    let s = rep.spin();
    let hbar = rep.hbar;

    let mut s_z = CMatrix::zeros(n, n);
    for k in 0..n {
        s_z[(k, k)] = linalg::cr(hbar * (-s + k as f64));
    }

    // s_+ |S, m> = hbar sqrt(S(S+1) - m(m+1)) |S, m+1>, m = -S + k
    let mut s_plus = CMatrix::zeros(n, n);
    for k in 0..(n - 1) {
        let amp = ((n - 1 - k) as f64 * (k + 1) as f64).sqrt();
        s_plus[(k + 1, k)] = linalg::cr(hbar * amp);
    }
    let s_minus = s_plus.adjoint();

    (s_z, s_plus, s_minus)
}

impl GeneratorSet {
    /// Group dimension n.
    pub fn n(&self) -> usize {
        self.rep.n
    }

    /// Number of generators, n^2 - 1.
    pub fn count(&self) -> usize {
        self.off_diag_sym.len() + self.off_diag_antisym.len() + self.diagonal.len()
    }

    /// All generators in canonical order: Theta pairs, Beta pairs, Eta_m.
    pub fn all(&self) -> Vec<&CMatrix> {
        self.off_diag_sym
            .iter()
            .chain(self.off_diag_antisym.iter())
            .chain(self.diagonal.iter())
            .collect()
    }

    /// Label of the a-th generator in canonical order.
    pub fn label(&self, a: usize) -> &str {
        &self.labels[a]
    }

    /// All labels in canonical order.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Cartesian spin operator s_x = (s_+ + s_-)/2.
    pub fn s_x(&self) -> CMatrix {
        (&self.s_plus + &self.s_minus) * linalg::cr(0.5)
    }

    /// Cartesian spin operator s_y = (s_+ - s_-)/(2i).
    pub fn s_y(&self) -> CMatrix {
        (&self.s_plus - &self.s_minus) * (-C_I * linalg::cr(0.5))
    }
}

/// Scalar-ness report for the quadratic Casimir operator.
#[derive(Debug, Clone)]
pub struct CasimirReport {
    /// The operator s_z^2 + (s_+ s_- + s_- s_+)/2.
    pub matrix: CMatrix,
    /// Diagonal value (meaningful when `is_scalar`).
    pub eigenvalue: f64,
    /// Whether the operator is a multiple of the identity within 1e-10.
    pub is_scalar: bool,
    /// The multiplet value S(S+1) hbar^2.
    pub expected: f64,
}

/// Quadratic Casimir s_z^2 + (s_+ s_- + s_- s_+)/2 of the generator set.
pub fn casimir(gen: &GeneratorSet) -> CasimirReport {
    let matrix = &gen.s_z * &gen.s_z
        + (&gen.s_plus * &gen.s_minus + &gen.s_minus * &gen.s_plus) * linalg::cr(0.5);
    let eigenvalue = matrix[(0, 0)].re;
    let n = gen.n();
    let residual = linalg::max_norm(&(&matrix - CMatrix::identity(n, n) * linalg::cr(eigenvalue)));
    CasimirReport {
        is_scalar: residual < 1e-10,
        eigenvalue,
        expected: gen.rep.casimir_eigenvalue(),
        matrix,
    }
}

/// Antisymmetric structure constants, [T_a, T_b] = 2i sum_c f_abc T_c.
///
/// Computed from the trace formula f_abc = tr([T_a, T_b] T_c) / (4i),
/// which is exact under the tr(T_a T_b) = 2 delta_ab normalization.
#[derive(Debug, Clone)]
pub struct StructureConstants {
    pub dim: usize,
    data: Vec<f64>,
}

impl StructureConstants {
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.dim + b) * self.dim + c]
    }
}

/// Structure constants of the generator set via the trace formula.
pub fn structure_constants(gen: &GeneratorSet) -> StructureConstants {
    let gens = gen.all();
    let d = gens.len();
    let mut data = vec![0.0; d * d * d];
    for a in 0..d {
        for b in (a + 1)..d {
            let comm = gens[a] * gens[b] - gens[b] * gens[a];
            for c in 0..d {
                let f = ((&comm * gens[c]).trace() / (4.0 * C_I)).re;
                data[(a * d + b) * d + c] = f;
                data[(b * d + a) * d + c] = -f;
            }
        }
    }
    StructureConstants { dim: d, data }
}
