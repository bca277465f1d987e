//! Hermitian operators given as matrices or generator polynomials.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra;
use crate::error::Error;
use crate::linalg::{self, CMatrix};
use crate::rep::RepresentationSpec;
use crate::Result;

/// Hermiticity residual above which an operator is rejected.
pub const HERMITICITY_TOL: f64 = 1e-10;

/// A single operator factor in a polynomial term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpLabel {
    /// Identity (degree 0).
    I,
    Sx,
    Sy,
    Sz,
    /// Raising operator s_+.
    Sp,
    /// Lowering operator s_-.
    Sm,
    /// k-th generator in canonical order, 1-based.
    Gen(usize),
}

impl OpLabel {
    /// Parse a label such as "Sz", "S+", or "T3".
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "I" | "Id" => Ok(OpLabel::I),
            "Sx" => Ok(OpLabel::Sx),
            "Sy" => Ok(OpLabel::Sy),
            "Sz" => Ok(OpLabel::Sz),
            "Sp" | "S+" => Ok(OpLabel::Sp),
            "Sm" | "S-" => Ok(OpLabel::Sm),
            _ => {
                if let Some(num) = s.strip_prefix('T') {
                    let k: usize = num
                        .parse()
                        .map_err(|_| Error::InvalidConfig(format!("unknown operator label {s:?}")))?;
                    if k == 0 {
                        return Err(Error::InvalidConfig("generator index is 1-based".into()));
                    }
                    Ok(OpLabel::Gen(k))
                } else {
                    Err(Error::InvalidConfig(format!("unknown operator label {s:?}")))
                }
            }
        }
    }

    fn degree(&self) -> usize {
        match self {
            OpLabel::I => 0,
            _ => 1,
        }
    }

    fn matrix(&self, gen: &algebra::GeneratorSet) -> Result<CMatrix> {
        let n = gen.n();
        Ok(match self {
            OpLabel::I => CMatrix::identity(n, n),
            OpLabel::Sx => gen.s_x(),
            OpLabel::Sy => gen.s_y(),
            OpLabel::Sz => gen.s_z.clone(),
            OpLabel::Sp => gen.s_plus.clone(),
            OpLabel::Sm => gen.s_minus.clone(),
            OpLabel::Gen(k) => {
                let all = gen.all();
                if *k > all.len() {
                    return Err(Error::InvalidConfig(format!(
                        "generator index T{k} out of range (1..={})",
                        all.len()
                    )));
                }
                all[*k - 1].clone()
            }
        })
    }
}

/// One real-coefficient monomial of degree at most 2.
#[derive(Debug, Clone)]
pub struct Term {
    pub coeff: f64,
    pub ops: Vec<OpLabel>,
}

/// Hermitian operator on the representation space.
///
/// Built either from an explicit matrix or from a polynomial in the spin
/// and generator operators; the assembled matrix is validated hermitian.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    pub rep: RepresentationSpec,
    matrix: CMatrix,
    terms: Option<Vec<Term>>,
}

impl HamiltonianSpec {
    /// Wrap an explicit hermitian matrix.
    pub fn from_matrix(rep: RepresentationSpec, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != rep.n || matrix.ncols() != rep.n {
            return Err(Error::DimensionMismatch {
                expected: rep.n,
                got: matrix.nrows(),
            });
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let residual = linalg::hermiticity_residual(&matrix);
        if residual > HERMITICITY_TOL {
            return Err(Error::NonHermitian { residual });
        }
        Ok(Self {
            rep,
            matrix,
            terms: None,
        })
    }

    /// Assemble a polynomial in spin/generator operators.
    pub fn from_terms(rep: RepresentationSpec, terms: Vec<Term>) -> Result<Self> {
        let gen = algebra::build_generators(&rep)?;
        let n = rep.n;
        let mut matrix = CMatrix::zeros(n, n);
        for term in &terms {
            if !term.coeff.is_finite() {
                return Err(Error::NonFinite);
            }
            let degree: usize = term.ops.iter().map(OpLabel::degree).sum();
            if degree > 2 {
                return Err(Error::InvalidConfig(format!(
                    "monomial degree {degree} exceeds 2"
                )));
            }
            let mut prod = CMatrix::identity(n, n);
            for op in &term.ops {
                prod = prod * op.matrix(&gen)?;
            }
            matrix += prod * linalg::cr(term.coeff);
        }
        let residual = linalg::hermiticity_residual(&matrix);
        if residual > HERMITICITY_TOL {
            return Err(Error::NonHermitian { residual });
        }
        Ok(Self {
            rep,
            matrix,
            terms: Some(terms),
        })
    }

    /// Zero operator.
    pub fn zero(rep: RepresentationSpec) -> Self {
        Self {
            rep,
            matrix: CMatrix::zeros(rep.n, rep.n),
            terms: Some(Vec::new()),
        }
    }

    /// Parse from the JSON schema: `{"matrix": {"re": [[..]], "im": [[..]]}}`
    /// or `{"terms": [{"coeff": 1.0, "ops": ["Sz", "Sz"]}]}`.
    pub fn from_json(rep: RepresentationSpec, value: &serde_json::Value) -> Result<Self> {
        let parsed: HamiltonianJson = serde_json::from_value(value.clone())?;
        match (parsed.matrix, parsed.terms) {
            (Some(m), None) => {
                let re = m.re;
                let n = rep.n;
                if re.len() != n || re.iter().any(|row| row.len() != n) {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: re.len(),
                    });
                }
                let im = match m.im {
                    Some(im) => {
                        if im.len() != n || im.iter().any(|row| row.len() != n) {
                            return Err(Error::DimensionMismatch {
                                expected: n,
                                got: im.len(),
                            });
                        }
                        im
                    }
                    None => vec![vec![0.0; n]; n],
                };
                let matrix = CMatrix::from_fn(n, n, |r, c| Complex64::new(re[r][c], im[r][c]));
                Self::from_matrix(rep, matrix)
            }
            (None, Some(terms)) => {
                let terms = terms
                    .into_iter()
                    .map(|t| {
                        let ops = t
                            .ops
                            .iter()
                            .map(|s| OpLabel::parse(s))
                            .collect::<Result<Vec<_>>>()?;
                        Ok(Term {
                            coeff: t.coeff,
                            ops,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::from_terms(rep, terms)
            }
            _ => Err(Error::InvalidConfig(
                "hamiltonian must have exactly one of \"matrix\" or \"terms\"".into(),
            )),
        }
    }

    /// The assembled hermitian matrix.
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Hilbert dimension.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Polynomial degree, when built from terms.
    pub fn degree(&self) -> Option<usize> {
        self.terms.as_ref().map(|terms| {
            terms
                .iter()
                .map(|t| t.ops.iter().map(OpLabel::degree).sum::<usize>())
                .max()
                .unwrap_or(0)
        })
    }

    /// True when the operator is certified degree <= 1 in the generators.
    pub fn is_linear(&self) -> bool {
        matches!(self.degree(), Some(d) if d <= 1)
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct HamiltonianJson {
    #[serde(default)]
    matrix: Option<MatrixJson>,
    #[serde(default)]
    terms: Option<Vec<TermJson>>,
}

#[derive(Debug, Deserialize, Serialize)]
struct MatrixJson {
    re: Vec<Vec<f64>>,
    #[serde(default)]
    im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize, Serialize)]
struct TermJson {
    coeff: f64,
    ops: Vec<String>,
}

/// Random hermitian matrix spec with entries of order one.
pub fn random_hermitian(rep: RepresentationSpec, rng: &mut impl rand::Rng) -> HamiltonianSpec {
    let n = rep.n;
    let a = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let h = (&a + a.adjoint()) * linalg::cr(0.5);
    HamiltonianSpec::from_matrix(rep, h).expect("symmetrized matrix is hermitian")
}

/// Random degree-1 generator polynomial with coefficients in [-1, 1).
pub fn random_linear(rep: RepresentationSpec, rng: &mut impl rand::Rng) -> HamiltonianSpec {
    let d = rep.n * rep.n - 1;
    let terms = (1..=d)
        .map(|k| Term {
            coeff: rng.random_range(-1.0..1.0),
            ops: vec![OpLabel::Gen(k)],
        })
        .collect();
    HamiltonianSpec::from_terms(rep, terms).expect("generator combination is hermitian")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rep(n: usize) -> RepresentationSpec {
        RepresentationSpec::new(n).unwrap()
    }

    #[test]
    fn rejects_non_hermitian_matrix() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                linalg::cr(0.0),
                linalg::cr(1.0),
                linalg::cr(0.0),
                linalg::cr(0.0),
            ],
        );
        assert!(matches!(
            HamiltonianSpec::from_matrix(rep(2), m),
            Err(Error::NonHermitian { .. })
        ));
    }

    #[test]
    fn sz_polynomial_matches_matrix() {
        let h = HamiltonianSpec::from_terms(
            rep(2),
            vec![Term {
                coeff: 1.0,
                ops: vec![OpLabel::Sz],
            }],
        )
        .unwrap();
        assert!((h.matrix()[(0, 0)].re + 0.5).abs() < 1e-15);
        assert!((h.matrix()[(1, 1)].re - 0.5).abs() < 1e-15);
        assert!(h.is_linear());
    }

    #[test]
    fn sp_sm_product_is_hermitian() {
        let h = HamiltonianSpec::from_terms(
            rep(3),
            vec![Term {
                coeff: 0.5,
                ops: vec![OpLabel::Sp, OpLabel::Sm],
            }],
        )
        .unwrap();
        assert_eq!(h.degree(), Some(2));
        assert!(!h.is_linear());
    }

    #[test]
    fn rejects_degree_three() {
        let r = rep(3);
        let result = HamiltonianSpec::from_terms(
            r,
            vec![Term {
                coeff: 1.0,
                ops: vec![OpLabel::Sz, OpLabel::Sz, OpLabel::Sz],
            }],
        );
        assert!(result.is_err());
    }

    #[test]
    fn rejects_non_hermitian_polynomial() {
        // s_+ s_z alone is not hermitian
        let result = HamiltonianSpec::from_terms(
            rep(3),
            vec![Term {
                coeff: 1.0,
                ops: vec![OpLabel::Sp, OpLabel::Sz],
            }],
        );
        assert!(matches!(result, Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn json_terms_roundtrip() {
        let value: serde_json::Value =
            serde_json::from_str(r#"{"terms": [{"coeff": 2.0, "ops": ["Sz"]}]}"#).unwrap();
        let h = HamiltonianSpec::from_json(rep(2), &value).unwrap();
        assert!((h.matrix()[(1, 1)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_matrix_parses() {
        let value: serde_json::Value =
            serde_json::from_str(r#"{"matrix": {"re": [[0.0, 1.0], [1.0, 0.0]]}}"#).unwrap();
        let h = HamiltonianSpec::from_json(rep(2), &value).unwrap();
        assert!((h.matrix()[(0, 1)].re - 1.0).abs() < 1e-15);
        assert!(h.degree().is_none());
    }

    #[test]
    fn random_linear_is_linear_and_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=4 {
            let h = random_linear(rep(n), &mut rng);
            assert!(h.is_linear());
            assert!(linalg::hermiticity_residual(h.matrix()) < 1e-12);
        }
    }
}
