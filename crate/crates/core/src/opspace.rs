//! Operator spaces as families of matrix norms.
//!
//! An element of `M_{r,c}(E)` for an operator space `E` with basis `e_1..e_k`
//! is stored as `k` scalar `r x c` matrices `X_i`, meaning `sum_i X_i (x) e_i`.
//! Concrete spaces (`E` a subspace of `M_d`) compute level norms as operator
//! norms of the embedded `rd x cd` matrix `sum_i X_i (x) b_i`; the operator
//! Hilbert space uses `|sum_i X_i (x) conj(X_i)|^(1/2)` and has no embedding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{schatten_with_grad, ComplexMatrix, C64, ONE, ZERO};

/// A coherent family of norms on every matrix level of a finite-dimensional
/// operator space.
pub trait MatrixNormFamily: Send + Sync {
    /// Linear dimension of the space.
    fn dim(&self) -> usize;

    fn label(&self) -> String;

    /// Norm of `sum_i coeffs[i] (x) e_i` in `M_{r,c}(E)`; all coefficients must
    /// share the same `r x c` shape.
    fn level_norm(&self, coeffs: &[ComplexMatrix]) -> Result<f64>;

    /// Smooth majorant of the level norm (Schatten-`r` in place of the operator
    /// norm of the representing matrix) and its gradient with respect to each
    /// coefficient. `r = inf` gives the exact norm and a subgradient.
    fn surrogate_with_grad(&self, coeffs: &[ComplexMatrix], r: f64) -> Result<(f64, Vec<ComplexMatrix>)>;
}

pub(crate) fn check_coeffs(dim: usize, coeffs: &[ComplexMatrix]) -> Result<(usize, usize)> {
    if coeffs.len() != dim {
        return Err(Error::shape(format!("{} coefficients for a {dim}-dimensional space", coeffs.len())));
    }
    let shape = coeffs.first().map(|c| c.shape()).unwrap_or((0, 0));
    if coeffs.iter().any(|c| c.shape() != shape) {
        return Err(Error::shape("coefficient matrices differ in shape"));
    }
    Ok(shape)
}

/// `E` realized as the span of linearly independent `d x d` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteOperatorSpace {
    name: String,
    ambient_dim: usize,
    basis: Vec<ComplexMatrix>,
    dual_basis: Vec<ComplexMatrix>,
}

impl ConcreteOperatorSpace {
    pub fn new(name: impl Into<String>, ambient_dim: usize, basis: Vec<ComplexMatrix>) -> Result<Self> {
        Self::with_threshold(name, ambient_dim, basis, crate::config::Tolerances::default().gram_det)
    }

    pub fn with_threshold(
        name: impl Into<String>,
        ambient_dim: usize,
        basis: Vec<ComplexMatrix>,
        gram_threshold: f64,
    ) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::Input("operator space needs at least one basis element".into()));
        }
        if basis.iter().any(|b| b.shape() != (ambient_dim, ambient_dim)) {
            return Err(Error::shape(format!("basis elements must be {ambient_dim}x{ambient_dim}")));
        }
        let k = basis.len();
        let gram = ComplexMatrix::from_fn(k, k, |i, j| basis[i].inner(&basis[j]));
        let norms: Vec<f64> = (0..k).map(|i| gram[(i, i)].re.sqrt()).collect();
        if norms.iter().any(|&n| n == 0.0) {
            return Err(Error::Input("basis contains a zero matrix".into()));
        }
        let normalized = ComplexMatrix::from_fn(k, k, |i, j| gram[(i, j)] / (norms[i] * norms[j]));
        let det: f64 = normalized.singular_values()?.iter().product();
        if det <= gram_threshold {
            return Err(Error::Input(format!("basis is not linearly independent (Gram determinant {det:e})")));
        }
        let ginv = gram.inverse()?;
        // c_i = sum_k b_k Ginv_{k i}, so tr(c_i* b_j) = delta_ij.
        let dual_basis = (0..k)
            .map(|i| {
                let mut c = ComplexMatrix::zeros(ambient_dim, ambient_dim);
                for (kk, b) in basis.iter().enumerate() {
                    c.axpy(ginv[(kk, i)], b);
                }
                c
            })
            .collect();
        Ok(Self { name: name.into(), ambient_dim, basis, dual_basis })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    /// Matrices `c_i` with `tr(c_i* b_j) = delta_ij`; `x -> tr(c_i* x)` extends the
    /// i-th coordinate functional to the ambient algebra.
    pub fn dual_basis(&self) -> &[ComplexMatrix] {
        &self.dual_basis
    }

    /// Coordinates of an ambient matrix's orthogonal projection onto `E`.
    pub fn coordinates(&self, x: &ComplexMatrix) -> Vec<C64> {
        self.dual_basis.iter().map(|c| c.inner(x)).collect()
    }

    pub fn element(&self, coords: &[C64]) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.ambient_dim, self.ambient_dim);
        for (c, b) in coords.iter().zip(&self.basis) {
            m.axpy(*c, b);
        }
        m
    }

    /// `sum_i X_i (x) b_i`.
    pub fn embed(&self, coeffs: &[ComplexMatrix]) -> Result<ComplexMatrix> {
        let (r, c) = check_coeffs(self.dim(), coeffs)?;
        let d = self.ambient_dim;
        let mut out = ComplexMatrix::zeros(r * d, c * d);
        for (x, b) in coeffs.iter().zip(&self.basis) {
            out.axpy(ONE, &x.kron(b));
        }
        Ok(out)
    }

    /// Adjoint of [`embed`](Self::embed) for the Frobenius pairing.
    pub fn embed_adjoint(&self, m: &ComplexMatrix, r: usize, c: usize) -> Vec<ComplexMatrix> {
        let d = self.ambient_dim;
        self.basis
            .iter()
            .map(|b| {
                ComplexMatrix::from_fn(r, c, |s, t| {
                    let mut acc = ZERO;
                    for k in 0..d {
                        for l in 0..d {
                            acc += b[(k, l)].conj() * m[(s * d + k, t * d + l)];
                        }
                    }
                    acc
                })
            })
            .collect()
    }
}

impl MatrixNormFamily for ConcreteOperatorSpace {
    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn label(&self) -> String {
        self.name.clone()
    }

    fn level_norm(&self, coeffs: &[ComplexMatrix]) -> Result<f64> {
        Ok(self.embed(coeffs)?.operator_norm())
    }

    fn surrogate_with_grad(&self, coeffs: &[ComplexMatrix], r: f64) -> Result<(f64, Vec<ComplexMatrix>)> {
        let (rows, cols) = check_coeffs(self.dim(), coeffs)?;
        let (v, g) = schatten_with_grad(&self.embed(coeffs)?, r)?;
        Ok((v, self.embed_adjoint(&g, rows, cols)))
    }
}

/// The operator Hilbert space `OH_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OhSpace {
    n: usize,
}

impl OhSpace {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("OH_n needs n >= 1".into()));
        }
        Ok(Self { n })
    }

    /// `sum_i a_i (x) conj(a_i)`.
    pub fn gram_tensor(coeffs: &[ComplexMatrix]) -> ComplexMatrix {
        let (r, c) = coeffs.first().map(|a| a.shape()).unwrap_or((0, 0));
        let mut s = ComplexMatrix::zeros(r * r, c * c);
        for a in coeffs {
            s.axpy(ONE, &a.kron(&a.conj_entrywise()));
        }
        s
    }
}

impl MatrixNormFamily for OhSpace {
    fn dim(&self) -> usize {
        self.n
    }

    fn label(&self) -> String {
        format!("oh:{}", self.n)
    }

    fn level_norm(&self, coeffs: &[ComplexMatrix]) -> Result<f64> {
        check_coeffs(self.n, coeffs)?;
        Ok(Self::gram_tensor(coeffs).operator_norm().sqrt())
    }

    fn surrogate_with_grad(&self, coeffs: &[ComplexMatrix], r: f64) -> Result<(f64, Vec<ComplexMatrix>)> {
        let (rows, cols) = check_coeffs(self.n, coeffs)?;
        let (v, m) = schatten_with_grad(&Self::gram_tensor(coeffs), r)?;
        let val = v.sqrt();
        if val == 0.0 {
            return Ok((0.0, vec![ComplexMatrix::zeros(rows, cols); self.n]));
        }
        let scale = 1.0 / (2.0 * val);
        let grads = coeffs
            .iter()
            .map(|a| {
                let mut g = ComplexMatrix::zeros(rows, cols);
                // S[(i,k),(j,l)] = a[i,j] conj(a[k,l]); both legs contribute.
                for i in 0..rows {
                    for j in 0..cols {
                        let mut acc = ZERO;
                        for k in 0..rows {
                            for l in 0..cols {
                                let mv = m[(i * rows + k, j * cols + l)];
                                acc += mv * a[(k, l)];
                                let mt = m[(k * rows + i, l * cols + j)];
                                acc += mt.conj() * a[(k, l)];
                            }
                        }
                        g[(i, j)] = acc * scale;
                    }
                }
                g
            })
            .collect();
        Ok((val, grads))
    }
}

/// The spaces shipped with the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Space {
    Concrete(ConcreteOperatorSpace),
    Oh(OhSpace),
}

impl Space {
    pub fn as_concrete(&self) -> Option<&ConcreteOperatorSpace> {
        match self {
            Space::Concrete(c) => Some(c),
            Space::Oh(_) => None,
        }
    }

    pub fn is_concrete(&self) -> bool {
        matches!(self, Space::Concrete(_))
    }

    /// Parse a built-in name: `row:n`, `column:n`, `oh:n`, `full:d`, `diag:d`, `scalar`.
    pub fn builtin(name: &str) -> Result<Self> {
        if name == "scalar" {
            return Ok(scalar_space());
        }
        let (kind, n) = name
            .split_once(':')
            .ok_or_else(|| Error::Input(format!("unknown space reference '{name}'")))?;
        let n: usize = n.parse().map_err(|_| Error::Input(format!("bad dimension in '{name}'")))?;
        if n == 0 {
            return Err(Error::Input(format!("dimension must be positive in '{name}'")));
        }
        match kind {
            "row" => Ok(row_space(n)),
            "column" | "col" => Ok(column_space(n)),
            "oh" => Ok(oh_space(n)),
            "full" => Ok(full_space(n)),
            "diag" => Ok(diag_space(n)),
            _ => Err(Error::Input(format!("unknown space kind '{kind}'"))),
        }
    }
}

impl MatrixNormFamily for Space {
    fn dim(&self) -> usize {
        match self {
            Space::Concrete(c) => c.dim(),
            Space::Oh(o) => o.dim(),
        }
    }

    fn label(&self) -> String {
        match self {
            Space::Concrete(c) => c.label(),
            Space::Oh(o) => o.label(),
        }
    }

    fn level_norm(&self, coeffs: &[ComplexMatrix]) -> Result<f64> {
        match self {
            Space::Concrete(c) => c.level_norm(coeffs),
            Space::Oh(o) => o.level_norm(coeffs),
        }
    }

    fn surrogate_with_grad(&self, coeffs: &[ComplexMatrix], r: f64) -> Result<(f64, Vec<ComplexMatrix>)> {
        match self {
            Space::Concrete(c) => c.surrogate_with_grad(coeffs, r),
            Space::Oh(o) => o.surrogate_with_grad(coeffs, r),
        }
    }
}

fn concrete(name: String, d: usize, basis: Vec<ComplexMatrix>) -> Space {
    Space::Concrete(ConcreteOperatorSpace::new(name, d, basis).expect("built-in basis is independent"))
}

/// `R_n`: span of `e_{1i}` in `M_n`.
pub fn row_space(n: usize) -> Space {
    concrete(format!("row:{n}"), n, (0..n).map(|i| ComplexMatrix::unit(n, n, 0, i)).collect())
}

/// `C_n`: span of `e_{i1}` in `M_n`.
pub fn column_space(n: usize) -> Space {
    concrete(format!("column:{n}"), n, (0..n).map(|i| ComplexMatrix::unit(n, n, i, 0)).collect())
}

/// `M_d` with the matrix-unit basis in row-major order.
pub fn full_space(d: usize) -> Space {
    let basis = (0..d * d).map(|k| ComplexMatrix::unit(d, d, k / d, k % d)).collect();
    concrete(format!("full:{d}"), d, basis)
}

/// Diagonal `d x d` matrices, i.e. `l_inf^d`.
pub fn diag_space(d: usize) -> Space {
    concrete(format!("diag:{d}"), d, (0..d).map(|i| ComplexMatrix::unit(d, d, i, i)).collect())
}

/// The complex numbers as a one-dimensional operator space.
pub fn scalar_space() -> Space {
    concrete("scalar".into(), 1, vec![ComplexMatrix::identity(1)])
}

pub fn oh_space(n: usize) -> Space {
    Space::Oh(OhSpace::new(n).expect("n >= 1"))
}

/// Element of `M_n(E)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MnElement {
    pub level: usize,
    pub coeffs: Vec<ComplexMatrix>,
}

impl MnElement {
    pub fn new(level: usize, coeffs: Vec<ComplexMatrix>) -> Result<Self> {
        if coeffs.iter().any(|c| c.shape() != (level, level)) {
            return Err(Error::shape(format!("coefficients of a level-{level} element must be {level}x{level}")));
        }
        Ok(Self { level, coeffs })
    }
}

pub fn mn_norm(space: &impl MatrixNormFamily, x: &MnElement) -> Result<f64> {
    check_coeffs(space.dim(), &x.coeffs)?;
    space.level_norm(&x.coeffs)
}

/// Element of `M_n(E (x) F)`: `coeffs[i][j]` multiplies `e_i (x) f_j`.
pub type TensorCoeffs = Vec<Vec<ComplexMatrix>>;

/// Minimal (spatial) tensor norm of `sum X_ij (x) b_i (x) b'_j`.
pub fn min_tensor_norm(e: &Space, f: &Space, x: &TensorCoeffs) -> Result<f64> {
    let (Some(ce), Some(cf)) = (e.as_concrete(), f.as_concrete()) else {
        return Err(Error::Unsupported("minimal tensor norm needs two concrete spaces".into()));
    };
    Ok(min_tensor_embedding(ce, cf, x)?.operator_norm())
}

pub(crate) fn min_tensor_embedding(
    e: &ConcreteOperatorSpace,
    f: &ConcreteOperatorSpace,
    x: &TensorCoeffs,
) -> Result<ComplexMatrix> {
    if x.len() != e.dim() || x.iter().any(|row| row.len() != f.dim()) {
        return Err(Error::shape("tensor coefficients do not match dim(E) x dim(F)"));
    }
    let (r, c) = x[0][0].shape();
    let (de, df) = (e.ambient_dim(), f.ambient_dim());
    let mut out = ComplexMatrix::zeros(r * de * df, c * de * df);
    for (i, row) in x.iter().enumerate() {
        for (j, xij) in row.iter().enumerate() {
            if xij.shape() != (r, c) {
                return Err(Error::shape("tensor coefficients differ in shape"));
            }
            out.axpy(ONE, &xij.kron(&e.basis()[i].kron(&f.basis()[j])));
        }
    }
    Ok(out)
}

/// Level-`n` norm of `E*` at the functional-valued element `W` (`w[i]` is the
/// value on the i-th basis vector), computed as the cb norm of `W : E -> M_n`.
pub fn dual_level_norm(
    e: &Space,
    w: &[ComplexMatrix],
    cfg: &crate::cbnorm::CbSearch,
) -> Result<crate::bracket::NormBracket> {
    let n = w.first().map(|m| m.rows()).unwrap_or(1);
    let map = crate::cbnorm::LinearMap::from_values(e.clone(), full_space(n), w)?;
    crate::cbnorm::cb_norm(&map, cfg)
}

/// `alpha X beta` applied coefficientwise.
pub fn scalar_action(alpha: &ComplexMatrix, coeffs: &[ComplexMatrix], beta: &ComplexMatrix) -> Vec<ComplexMatrix> {
    coeffs.iter().map(|x| &(alpha * x) * beta).collect()
}

/// `X (+) Y` coefficientwise.
pub fn direct_sum(x: &[ComplexMatrix], y: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
    x.iter().zip(y).map(|(a, b)| a.direct_sum(b)).collect()
}

/// JSON space definition `{ "name", "ambient_dim", "basis" }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceDefinition {
    pub name: String,
    pub ambient_dim: usize,
    pub basis: Vec<crate::io::MatrixLiteral>,
}

impl SpaceDefinition {
    pub fn build(&self) -> Result<Space> {
        let basis = self.basis.iter().map(|m| m.to_matrix()).collect::<Result<Vec<_>>>()?;
        Ok(Space::Concrete(ConcreteOperatorSpace::new(self.name.clone(), self.ambient_dim, basis)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_coeffs(dim: usize, r: usize, c: usize, rng: &mut ChaCha8Rng) -> Vec<ComplexMatrix> {
        (0..dim).map(|_| ComplexMatrix::random_gaussian(r, c, rng)).collect()
    }

    #[test]
    fn diagonal_example() {
        let e = diag_space(2);
        let x = MnElement::new(
            2,
            vec![ComplexMatrix::unit(2, 2, 0, 0), ComplexMatrix::unit(2, 2, 1, 1)],
        )
        .unwrap();
        assert!((mn_norm(&e, &x).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_basis_element_at_level_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b0 = ComplexMatrix::random_gaussian(3, 3, &mut rng);
        let b1 = ComplexMatrix::random_gaussian(3, 3, &mut rng);
        let e = ConcreteOperatorSpace::new("rand", 3, vec![b0.clone(), b1]).unwrap();
        let x = vec![ComplexMatrix::identity(1), ComplexMatrix::zeros(1, 1)];
        assert!((e.level_norm(&x).unwrap() - b0.operator_norm()).abs() < 1e-12);
    }

    #[test]
    fn full_space_level_two_is_flattening() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let e = full_space(2);
        let x = random_coeffs(4, 2, 2, &mut rng);
        // oracle: assemble the 4x4 block matrix directly, block (s,t) = sum_k x_k[s,t] e_k
        let direct = ComplexMatrix::from_fn(4, 4, |row, col| {
            let (s, i) = (row / 2, row % 2);
            let (t, j) = (col / 2, col % 2);
            x[i * 2 + j][(s, t)]
        });
        assert!((e.level_norm(&x).unwrap() - direct.operator_norm()).abs() < 1e-12);
    }

    #[test]
    fn column_and_row_examples() {
        let c = column_space(2);
        let x = vec![ComplexMatrix::identity(2), ComplexMatrix::identity(2)];
        assert!((c.level_norm(&x).unwrap() - 2f64.sqrt()).abs() < 1e-13);
        let single = vec![ComplexMatrix::identity(1), ComplexMatrix::zeros(1, 1)];
        assert!((c.level_norm(&single).unwrap() - 1.0).abs() < 1e-14);
        assert!((row_space(2).level_norm(&single).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn row_column_transpose_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_coeffs(3, 2, 2, &mut rng);
        let xt: Vec<_> = x.iter().map(|m| m.transpose()).collect();
        let r = row_space(3).level_norm(&x).unwrap();
        let c = column_space(3).level_norm(&xt).unwrap();
        assert!((r - c).abs() < 1e-12);
    }

    #[test]
    fn row_and_column_gram_expressions() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let x = random_coeffs(3, 3, 3, &mut rng);
            let mut col = ComplexMatrix::zeros(3, 3);
            let mut row = ComplexMatrix::zeros(3, 3);
            for xi in &x {
                col.axpy(ONE, &(&xi.adjoint() * xi));
                row.axpy(ONE, &(xi * &xi.adjoint()));
            }
            let cn = column_space(3).level_norm(&x).unwrap();
            let rn = row_space(3).level_norm(&x).unwrap();
            assert!((cn - col.operator_norm().sqrt()).abs() < 1e-10);
            assert!((rn - row.operator_norm().sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn oh_examples() {
        let oh1 = oh_space(1);
        let c = ComplexMatrix::new(1, 1, vec![C64::new(3.0, -4.0)]).unwrap();
        assert!((oh1.level_norm(&[c]).unwrap() - 5.0).abs() < 1e-13);
        let oh3 = oh_space(3);
        let v: Vec<_> = [1.0, 2.0, 2.0].iter().map(|&t| ComplexMatrix::from_real(1, 1, &[t]).unwrap()).collect();
        assert!((oh3.level_norm(&v).unwrap() - 3.0).abs() < 1e-13);
        let oh2 = oh_space(2);
        let a = vec![ComplexMatrix::unit(2, 2, 0, 0), ComplexMatrix::unit(2, 2, 0, 1)];
        // oracle: direct 4x4 of e11(x)e11 + e12(x)e12
        let direct = &ComplexMatrix::unit(2, 2, 0, 0).kron(&ComplexMatrix::unit(2, 2, 0, 0))
            + &ComplexMatrix::unit(2, 2, 0, 1).kron(&ComplexMatrix::unit(2, 2, 0, 1));
        let expect = direct.operator_norm().sqrt();
        assert!((expect - 2f64.powf(0.25)).abs() < 1e-13);
        assert!((oh2.level_norm(&a).unwrap() - expect).abs() < 1e-13);
    }

    #[test]
    fn surrogate_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for space in [full_space(2), oh_space(3), row_space(2)] {
            let x = random_coeffs(space.dim(), 2, 3, &mut rng);
            let dx = random_coeffs(space.dim(), 2, 3, &mut rng);
            let (_, g) = space.surrogate_with_grad(&x, 8.0).unwrap();
            let h = 1e-6;
            let shift = |s: f64| -> Vec<ComplexMatrix> {
                x.iter()
                    .zip(&dx)
                    .map(|(a, b)| {
                        let mut m = a.clone();
                        m.axpy(C64::new(s, 0.0), b);
                        m
                    })
                    .collect()
            };
            let fp = space.surrogate_with_grad(&shift(h), 8.0).unwrap().0;
            let fm = space.surrogate_with_grad(&shift(-h), 8.0).unwrap().0;
            let fd = (fp - fm) / (2.0 * h);
            let an: f64 = g.iter().zip(&dx).map(|(a, b)| a.inner(b).re).sum();
            assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "{}: {fd} vs {an}", space.label());
        }
    }

    #[test]
    fn ruan_axioms_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for space in [full_space(2), diag_space(3), row_space(3), column_space(2), oh_space(2)] {
            for n in 1..=3 {
                for _ in 0..20 {
                    let x = random_coeffs(space.dim(), n, n, &mut rng);
                    let y = random_coeffs(space.dim(), 2, 2, &mut rng);
                    let m = 2;
                    let alpha = ComplexMatrix::random_gaussian(m, n, &mut rng);
                    let beta = ComplexMatrix::random_gaussian(n, m, &mut rng);
                    let lhs = space.level_norm(&scalar_action(&alpha, &x, &beta)).unwrap();
                    let rhs = alpha.operator_norm() * space.level_norm(&x).unwrap() * beta.operator_norm();
                    assert!(lhs <= rhs * (1.0 + 1e-8) + 1e-12, "axiom M on {}", space.label());
                    let d = space.level_norm(&direct_sum(&x, &y)).unwrap();
                    let mx = space.level_norm(&x).unwrap().max(space.level_norm(&y).unwrap());
                    assert!((d - mx).abs() <= 1e-8 * mx, "axiom D on {}", space.label());
                }
            }
        }
    }

    #[test]
    fn rejects_dependent_basis() {
        let b = ComplexMatrix::identity(2);
        let err = ConcreteOperatorSpace::new("bad", 2, vec![b.clone(), b.scale_real(2.0)]);
        assert!(matches!(err, Err(Error::Input(_))));
    }

    #[test]
    fn min_tensor_examples() {
        let e = full_space(2);
        let mut x: TensorCoeffs = vec![vec![ComplexMatrix::zeros(1, 1); 4]; 4];
        x[0][0] = ComplexMatrix::identity(1);
        assert!((min_tensor_norm(&e, &e, &x).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(min_tensor_norm(&e, &oh_space(2), &x), Err(Error::Unsupported(_))));
    }

    #[test]
    fn min_tensor_with_matrix_algebra_is_level_norm() {
        // S_inf^m (x)_min E is M_m(E): use F = full:m with scalar coefficients.
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let e = diag_space(2);
        let m = 2;
        let coeffs = random_coeffs(2, m, m, &mut rng);
        let x: TensorCoeffs = (0..4)
            .map(|k| coeffs.iter().map(|c| ComplexMatrix::new(1, 1, vec![c[(k / m, k % m)]]).unwrap()).collect())
            .collect();
        let via_min = min_tensor_norm(&full_space(m), &e, &x).unwrap();
        assert!((via_min - e.level_norm(&coeffs).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn builtin_parsing() {
        assert_eq!(Space::builtin("oh:3").unwrap().dim(), 3);
        assert_eq!(Space::builtin("full:2").unwrap().dim(), 4);
        assert_eq!(Space::builtin("scalar").unwrap().dim(), 1);
        assert!(Space::builtin("nope:2").is_err());
        assert!(Space::builtin("row:0").is_err());
    }
}
