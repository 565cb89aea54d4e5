//! Scalar-on-function and function-on-function regression with minimum-norm
//! estimators.
//!
//! With `x_i(s) = w_i^T φ(s)` and `β(s) = b^T φ(s)`, the scalar model reduces to
//! `y = Z b + ε` where row `i` of `Z` is `(G w_i)^T` and `G` is the Gram matrix
//! of `φ`. The functional-response model `y_i(t) = v_i^T ψ(t)` with
//! `β(s, t) = φ(s)^T B ψ(t)` leads to `vec(B) = (Ψ ⊗ Z^T Z)+ vec(Z^T V Ψ)`.

use crate::basis::{BasisSpec, GramMatrix};
use crate::error::{Error, Result};
use crate::functionalize::FunctionalDatum;
use crate::linalg::{kron_min_norm_solve, min_norm_lsq, Matrix, Vector};

fn check_spec(expected: &BasisSpec, got: &BasisSpec, what: &str) -> Result<()> {
    if expected != got {
        return Err(Error::invalid(format!(
            "{what} basis {got:?} does not match model basis {expected:?}"
        )));
    }
    Ok(())
}

/// Stacks coefficient vectors as rows.
pub fn coefficient_matrix(data: &[FunctionalDatum]) -> Result<Matrix> {
    let first = data
        .first()
        .ok_or_else(|| Error::invalid("need at least one functional datum"))?;
    let spec = *first.spec();
    let mut out = Matrix::zeros(data.len(), spec.k());
    for (i, d) in data.iter().enumerate() {
        check_spec(&spec, d.spec(), "datum")?;
        out.row_mut(i).copy_from(&d.coefficients().transpose());
    }
    Ok(out)
}

/// `N x K` design whose row `i` is `(G w_i)^T`.
pub fn sonf_design(data: &[FunctionalDatum], gram: &GramMatrix) -> Result<Matrix> {
    if data.is_empty() {
        return Err(Error::invalid("need at least one functional datum"));
    }
    for d in data {
        check_spec(gram.spec(), d.spec(), "datum")?;
    }
    let w = coefficient_matrix(data)?;
    // G is symmetric, so (G w_i)^T = w_i^T G.
    Ok(w * gram.entries())
}

/// Minimum-norm least-squares coefficients `b = Z+ y`.
pub fn sonf_fit(z: &Matrix, y: &Vector) -> Result<Vector> {
    min_norm_lsq(z, y)
}

#[derive(Debug, Clone)]
pub struct SonFFit {
    gram_x: GramMatrix,
    b_hat: Vector,
}

impl SonFFit {
    pub fn new(gram_x: GramMatrix, b_hat: Vector) -> Result<Self> {
        if b_hat.len() != gram_x.spec().k() {
            return Err(Error::invalid(format!(
                "coefficient vector has length {}, basis has {}",
                b_hat.len(),
                gram_x.spec().k()
            )));
        }
        if b_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("fitted coefficients are not finite".into()));
        }
        Ok(SonFFit { gram_x, b_hat })
    }

    /// Functionalised predictors and scalar responses to a fitted model.
    pub fn train(data: &[FunctionalDatum], y: &Vector, gram_x: GramMatrix) -> Result<Self> {
        let z = sonf_design(data, &gram_x)?;
        let b = sonf_fit(&z, y)?;
        Self::new(gram_x, b)
    }

    pub fn spec_x(&self) -> &BasisSpec {
        self.gram_x.spec()
    }

    pub fn b_hat(&self) -> &Vector {
        &self.b_hat
    }

    pub fn gram_x(&self) -> &GramMatrix {
        &self.gram_x
    }

    /// The fitted coefficient function `β̂(s) = b̂^T φ(s)`.
    pub fn beta(&self) -> FunctionalDatum {
        FunctionalDatum::new(*self.spec_x(), self.b_hat.clone()).expect("validated on construction")
    }
}

/// `ŷ = w^T G b̂`, the basis form of `∫ x(s) β̂(s) ds`.
pub fn sonf_predict(fit: &SonFFit, x: &FunctionalDatum) -> Result<f64> {
    check_spec(fit.spec_x(), x.spec(), "predictor")?;
    let gb = fit.gram_x.entries() * &fit.b_hat;
    Ok(x.coefficients().dot(&gb))
}

/// `B̂` with `vec(B̂) = (Ψ ⊗ Z^T Z)+ vec(Z^T V Ψ)`, via the structured solver.
pub fn fonf_fit(z: &Matrix, v: &Matrix, psi: &GramMatrix) -> Result<Matrix> {
    if z.nrows() != v.nrows() {
        return Err(Error::invalid(format!(
            "Z has {} rows but V has {}",
            z.nrows(),
            v.nrows()
        )));
    }
    let k2 = psi.spec().k();
    if v.ncols() != k2 {
        return Err(Error::invalid(format!(
            "V has {} columns but the response basis has {k2}",
            v.ncols()
        )));
    }
    let ztz = z.tr_mul(z);
    let rhs = z.tr_mul(v) * psi.entries();
    kron_min_norm_solve(psi.entries(), &ztz, &rhs)
}

#[derive(Debug, Clone)]
pub struct FonFFit {
    gram_x: GramMatrix,
    gram_y: GramMatrix,
    b_hat: Matrix,
}

impl FonFFit {
    pub fn new(gram_x: GramMatrix, gram_y: GramMatrix, b_hat: Matrix) -> Result<Self> {
        let (k1, k2) = (gram_x.spec().k(), gram_y.spec().k());
        if b_hat.nrows() != k1 || b_hat.ncols() != k2 {
            return Err(Error::invalid(format!(
                "coefficient matrix must be {k1}x{k2}, got {}x{}",
                b_hat.nrows(),
                b_hat.ncols()
            )));
        }
        if b_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("fitted coefficients are not finite".into()));
        }
        Ok(FonFFit {
            gram_x,
            gram_y,
            b_hat,
        })
    }

    pub fn train(
        x: &[FunctionalDatum],
        y: &[FunctionalDatum],
        gram_x: GramMatrix,
        gram_y: GramMatrix,
    ) -> Result<Self> {
        for d in y {
            check_spec(gram_y.spec(), d.spec(), "response")?;
        }
        let z = sonf_design(x, &gram_x)?;
        let v = coefficient_matrix(y)?;
        let b = fonf_fit(&z, &v, &gram_y)?;
        Self::new(gram_x, gram_y, b)
    }

    pub fn spec_x(&self) -> &BasisSpec {
        self.gram_x.spec()
    }

    pub fn spec_y(&self) -> &BasisSpec {
        self.gram_y.spec()
    }

    pub fn b_hat(&self) -> &Matrix {
        &self.b_hat
    }

    pub fn gram_x(&self) -> &GramMatrix {
        &self.gram_x
    }

    pub fn gram_y(&self) -> &GramMatrix {
        &self.gram_y
    }
}

/// Predicted response function with coefficients `v̂ = B̂^T G w`.
pub fn fonf_predict(fit: &FonFFit, x: &FunctionalDatum) -> Result<FunctionalDatum> {
    check_spec(fit.spec_x(), x.spec(), "predictor")?;
    let z = fit.gram_x.entries() * x.coefficients();
    let v = fit.b_hat.tr_mul(&z);
    FunctionalDatum::new(*fit.spec_y(), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{gram_matrix, quadrature_rule, BasisFamily, Domain};
    use crate::linalg::{kronecker, svd_pinv, unvec_col_major, vec_col_major};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> Domain {
        Domain::new(0.0, 1.0).unwrap()
    }

    fn random_matrix(rng: &mut impl Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_datum(rng: &mut impl Rng, spec: BasisSpec) -> FunctionalDatum {
        FunctionalDatum::new(spec, Vector::from_fn(spec.k(), |_, _| rng.random_range(-1.0..1.0))).unwrap()
    }

    /// Independent composite Simpson rule on a fine uniform grid.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + h * i as f64);
        }
        s * h / 3.0
    }

    #[test]
    fn identity_gram_design_is_coefficients() {
        let spec = BasisSpec::new(BasisFamily::Fourier, 3, unit()).unwrap();
        let gram = GramMatrix::from_entries(spec, Matrix::identity(3, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<_> = (0..4).map(|_| random_datum(&mut rng, spec)).collect();
        let z = sonf_design(&data, &gram).unwrap();
        assert_eq!(z, coefficient_matrix(&data).unwrap());
    }

    #[test]
    fn design_single_row_arithmetic() {
        let spec = BasisSpec::new(BasisFamily::MonomialTest, 2, unit()).unwrap();
        let gram = GramMatrix::from_entries(spec, Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0 / 3.0])).unwrap();
        let d = FunctionalDatum::new(spec, Vector::from_vec(vec![1.0, 0.0])).unwrap();
        let z = sonf_design(&[d], &gram).unwrap();
        assert_eq!(z.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.5]);
    }

    #[test]
    fn design_rows_match_quadrature_inner_products() {
        let spec = BasisSpec::natural_spline(7, unit()).unwrap();
        let gram = gram_matrix(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<_> = (0..3).map(|_| random_datum(&mut rng, spec)).collect();
        let z = sonf_design(&data, &gram).unwrap();
        for (i, d) in data.iter().enumerate() {
            for k in 0..7 {
                let oracle = simpson(
                    |s| d.evaluate(s).unwrap() * crate::basis::eval_basis(&spec, s).unwrap()[k],
                    0.0,
                    1.0,
                    60_000,
                );
                assert!((z[(i, k)] - oracle).abs() < 1e-6, "row {i} col {k}");
            }
        }
    }

    #[test]
    fn design_rejects_mixed_specs() {
        let a = BasisSpec::natural_spline(4, unit()).unwrap();
        let b = BasisSpec::natural_spline(5, unit()).unwrap();
        let gram = gram_matrix(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let data = vec![random_datum(&mut rng, a), random_datum(&mut rng, b)];
        assert!(sonf_design(&data, &gram).is_err());
        assert!(sonf_design(&[], &gram).is_err());
    }

    #[test]
    fn sonf_fit_cases() {
        let y = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        let b = sonf_fit(&Matrix::identity(3, 3), &y).unwrap();
        assert!((b - &y).amax() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z = random_matrix(&mut rng, 12, 5);
        let truth = Vector::from_fn(5, |_, _| rng.random_range(-2.0..2.0));
        let b = sonf_fit(&z, &(&z * &truth)).unwrap();
        assert!((b - truth).amax() < 1e-8);

        let z = random_matrix(&mut rng, 6, 14);
        let y = Vector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
        let b = sonf_fit(&z, &y).unwrap();
        assert!((&z * &b - &y).amax() < 1e-8);
        let oracle = z.transpose() * (&z * z.transpose() + Matrix::identity(6, 6) * 1e-12).lu().solve(&y).unwrap();
        assert!(b.norm() <= oracle.norm() * (1.0 + 1e-9));

        // literal (Z^T Z)+ Z^T y
        let literal = svd_pinv(&z.tr_mul(&z), None).unwrap() * z.tr_mul(&y);
        assert!((&b - literal).norm() <= 1e-8 * b.norm());
    }

    #[test]
    fn sonf_predict_cases() {
        let spec = BasisSpec::new(BasisFamily::Fourier, 3, unit()).unwrap();
        let gram = GramMatrix::from_entries(spec, Matrix::identity(3, 3)).unwrap();
        let fit = SonFFit::new(gram.clone(), Vector::zeros(3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_datum(&mut rng, spec);
        assert_eq!(sonf_predict(&fit, &x).unwrap(), 0.0);

        let fit = SonFFit::new(gram, Vector::from_vec(vec![5.0, 1.0, -1.0])).unwrap();
        let e1 = FunctionalDatum::new(spec, Vector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        assert_eq!(sonf_predict(&fit, &e1).unwrap(), 5.0);
    }

    #[test]
    fn sonf_predict_matches_quadrature() {
        let spec = BasisSpec::natural_spline(9, Domain::new(0.0, 2.0).unwrap()).unwrap();
        let gram = gram_matrix(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let fit = SonFFit::new(gram, Vector::from_fn(9, |_, _| rng.random_range(-1.0..1.0))).unwrap();
        let x = random_datum(&mut rng, spec);
        let beta = fit.beta();
        let oracle = simpson(|s| x.evaluate(s).unwrap() * beta.evaluate(s).unwrap(), 0.0, 2.0, 60_000);
        assert!((sonf_predict(&fit, &x).unwrap() - oracle).abs() < 1e-6);
    }

    #[test]
    fn fonf_identities() {
        let spec = BasisSpec::new(BasisFamily::Fourier, 3, unit()).unwrap();
        let psi = GramMatrix::from_entries(spec, Matrix::identity(3, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v = random_matrix(&mut rng, 4, 3);
        let b = fonf_fit(&Matrix::identity(4, 4), &v, &psi).unwrap();
        assert!((b - v).amax() < 1e-13);
    }

    #[test]
    fn fonf_full_rank_psi_matches_pinv_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let spec = BasisSpec::new(BasisFamily::Fourier, 6, unit()).unwrap();
        let psi = gram_matrix(&spec).unwrap();
        let z = random_matrix(&mut rng, 8, 11);
        let v = random_matrix(&mut rng, 8, 6);
        let b = fonf_fit(&z, &v, &psi).unwrap();
        let oracle = svd_pinv(&z.tr_mul(&z), None).unwrap() * z.tr_mul(&v);
        assert!((&b - &oracle).norm() <= 1e-8 * oracle.norm());
    }

    #[test]
    fn fonf_rank_deficient_psi_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let spec = BasisSpec::new(BasisFamily::Fourier, 3, unit()).unwrap();
        let psi = GramMatrix::from_entries(spec, Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 1.0, 0.0]))).unwrap();
        let z = random_matrix(&mut rng, 7, 4);
        let v = random_matrix(&mut rng, 7, 3);
        let b = fonf_fit(&z, &v, &psi).unwrap();
        let dense = svd_pinv(&kronecker(psi.entries(), &z.tr_mul(&z)), None).unwrap()
            * vec_col_major(&(z.tr_mul(&v) * psi.entries()));
        let oracle = unvec_col_major(&dense, 4, 3);
        assert!((&b - &oracle).norm() <= 1e-8 * oracle.norm());
    }

    #[test]
    fn fonf_dimension_errors() {
        let spec = BasisSpec::new(BasisFamily::Fourier, 3, unit()).unwrap();
        let psi = GramMatrix::from_entries(spec, Matrix::identity(3, 3)).unwrap();
        assert!(fonf_fit(&Matrix::identity(4, 4), &Matrix::zeros(5, 3), &psi).is_err());
        assert!(fonf_fit(&Matrix::identity(4, 4), &Matrix::zeros(4, 2), &psi).is_err());
    }

    #[test]
    fn fonf_predict_cases() {
        let sx = BasisSpec::new(BasisFamily::Fourier, 3, unit()).unwrap();
        let sy = BasisSpec::natural_spline(4, unit()).unwrap();
        let gx = GramMatrix::from_entries(sx, Matrix::identity(3, 3)).unwrap();
        let gy = gram_matrix(&sy).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_datum(&mut rng, sx);

        let zero = FonFFit::new(gx.clone(), gy.clone(), Matrix::zeros(3, 4)).unwrap();
        let out = fonf_predict(&zero, &x).unwrap();
        assert!(out.coefficients().iter().all(|v| *v == 0.0));

        let b = random_matrix(&mut rng, 3, 4);
        let fit = FonFFit::new(gx, gy, b.clone()).unwrap();
        let e1 = FunctionalDatum::new(sx, Vector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        let out = fonf_predict(&fit, &e1).unwrap();
        assert_eq!(out.coefficients().transpose(), b.row(0));
    }

    #[test]
    fn fonf_predict_matches_double_expansion() {
        let sx = BasisSpec::natural_spline(6, unit()).unwrap();
        let sy = BasisSpec::natural_spline(5, unit()).unwrap();
        let gx = gram_matrix(&sx).unwrap();
        let gy = gram_matrix(&sy).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let b = random_matrix(&mut rng, 6, 5);
        let fit = FonFFit::new(gx, gy, b.clone()).unwrap();
        let x = random_datum(&mut rng, sx);
        let pred = fonf_predict(&fit, &x).unwrap();

        // ŷ(t) = ∫ x(s) φ(s)^T B ψ(t) ds with the s-integral done by quadrature.
        let (nodes, weights) = quadrature_rule(&sx);
        let grid = unit().grid(20);
        for &t in &grid {
            let psi_t = crate::basis::eval_basis(&sy, t).unwrap();
            let b_psi = &b * &psi_t;
            let direct: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(&s, &w)| w * x.evaluate(s).unwrap() * crate::basis::eval_basis(&sx, s).unwrap().dot(&b_psi))
                .sum();
            assert!((pred.evaluate(t).unwrap() - direct).abs() < 1e-8 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn prediction_is_linear_in_input() {
        let spec = BasisSpec::natural_spline(8, unit()).unwrap();
        let gram = gram_matrix(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let fit = SonFFit::new(gram, Vector::from_fn(8, |_, _| rng.random_range(-1.0..1.0))).unwrap();
        let x1 = random_datum(&mut rng, spec);
        let x2 = random_datum(&mut rng, spec);
        let alpha = 2.5;
        let combo = FunctionalDatum::new(spec, x1.coefficients() * alpha + x2.coefficients()).unwrap();
        let lhs = sonf_predict(&fit, &combo).unwrap();
        let rhs = alpha * sonf_predict(&fit, &x1).unwrap() + sonf_predict(&fit, &x2).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }
}
