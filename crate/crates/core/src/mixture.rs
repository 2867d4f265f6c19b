//! Population Gaussian mixture with a shared within-class covariance, the
//! Bayes (LDA) rule, and the population identities linking the regression
//! matrix of one-hot labels on features to the discriminant directions.
//!
//! For a centered model (`M pi = 0`):
//!
//! ```text
//! Sigma  = Sigma_W + M D_pi M^T
//! B      = Sigma^{-1} M D_pi
//! H      = D_pi - B^T Sigma B = D_pi - D_pi M^T B = D_pi - B^T M D_pi
//! B_star = Sigma_W^{-1} M = B H^{-1}
//! H^{-1} = D_pi^{-1} + M^T Sigma_W^{-1} M
//! ```

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{check_shape, LdrrError, Result};
use crate::linalg::{argmin, spd_solve};
use crate::rng::{derive_seed, rng_from_seed, Rng};

/// Tolerance on `|sum(pi) - 1|`.
pub const PI_SUM_TOL: f64 = 1e-12;
/// Tolerance on `max |M pi|` for a model to count as centered.
pub const CENTERED_TOL: f64 = 1e-10;

/// Gaussian mixture `X | Y = e_l ~ N(mu_l, Sigma_W)`, `P(Y = e_l) = pi_l`.
#[derive(Debug, Clone)]
pub struct MixtureModel {
    means: DMatrix<f64>,
    sigma_w: DMatrix<f64>,
    pi: DVector<f64>,
    chol_w: Cholesky<f64, Dyn>,
}

/// Which of the three algebraically equal expressions to use for `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HForm {
    /// `D_pi - B^T Sigma B`
    ViaSigma,
    /// `D_pi - D_pi M^T B`
    ViaMLeft,
    /// `D_pi - B^T M D_pi`
    ViaMRight,
}

/// Quantities derived from a centered [`MixtureModel`].
#[derive(Debug, Clone)]
pub struct PopulationDerived {
    pub sigma: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub b_star: DMatrix<f64>,
    pub delta_inf: f64,
}

impl MixtureModel {
    /// Builds a model from class means (`p x L`, one column per class), the
    /// within-class covariance and the class priors.
    pub fn new(means: DMatrix<f64>, sigma_w: DMatrix<f64>, pi: DVector<f64>) -> Result<Self> {
        let (p, l) = means.shape();
        if p == 0 || l == 0 {
            return Err(LdrrError::InvalidModel("empty mean matrix".into()));
        }
        check_shape("Sigma_W", (p, p), sigma_w.shape())?;
        check_shape("pi", (l, 1), pi.shape())?;
        if means.iter().chain(sigma_w.iter()).chain(pi.iter()).any(|v| !v.is_finite()) {
            return Err(LdrrError::InvalidModel("non-finite parameter".into()));
        }
        let scale = sigma_w.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..p {
            for j in 0..i {
                if (sigma_w[(i, j)] - sigma_w[(j, i)]).abs() > 1e-12 * scale {
                    return Err(LdrrError::InvalidModel("Sigma_W is not symmetric".into()));
                }
            }
        }
        if pi.iter().any(|&v| v <= 0.0) {
            return Err(LdrrError::InvalidModel("class priors must be positive".into()));
        }
        if (pi.sum() - 1.0).abs() > PI_SUM_TOL {
            return Err(LdrrError::InvalidModel(format!(
                "class priors sum to {} instead of 1",
                pi.sum()
            )));
        }
        let chol_w = sigma_w
            .clone()
            .cholesky()
            .ok_or(LdrrError::NotPositiveDefinite("Sigma_W"))?;
        Ok(Self {
            means,
            sigma_w,
            pi,
            chol_w,
        })
    }

    pub fn means(&self) -> &DMatrix<f64> {
        &self.means
    }

    pub fn sigma_w(&self) -> &DMatrix<f64> {
        &self.sigma_w
    }

    pub fn pi(&self) -> &DVector<f64> {
        &self.pi
    }

    /// Lower Cholesky factor of `Sigma_W`.
    pub fn sigma_w_factor(&self) -> DMatrix<f64> {
        self.chol_w.l()
    }

    pub fn n_features(&self) -> usize {
        self.means.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.means.ncols()
    }

    /// The marginal mean `E[X] = M pi`.
    pub fn marginal_mean(&self) -> DVector<f64> {
        &self.means * &self.pi
    }

    pub fn is_centered(&self) -> bool {
        self.marginal_mean().amax() <= CENTERED_TOL
    }

    /// Shifts every class mean by `-M pi` so that `E[X] = 0`.
    pub fn center(&self) -> MixtureModel {
        let shift = self.marginal_mean();
        let mut means = self.means.clone();
        for mut col in means.column_iter_mut() {
            col -= &shift;
        }
        MixtureModel {
            means,
            sigma_w: self.sigma_w.clone(),
            pi: self.pi.clone(),
            chol_w: self.chol_w.clone(),
        }
    }

    /// Same model with every class mean shifted by `delta`.
    pub fn shifted(&self, delta: &DVector<f64>) -> MixtureModel {
        let mut means = self.means.clone();
        for mut col in means.column_iter_mut() {
            col += delta;
        }
        MixtureModel {
            means,
            sigma_w: self.sigma_w.clone(),
            pi: self.pi.clone(),
            chol_w: self.chol_w.clone(),
        }
    }

    fn require_centered(&self, strict: bool) -> Result<()> {
        let off = self.marginal_mean().amax();
        if strict && off > CENTERED_TOL {
            return Err(LdrrError::NotCentered(off));
        }
        Ok(())
    }

    fn d_pi(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.pi)
    }

    /// `Sigma_W + M D_pi M^T`; equals `Cov(X)` only for centered models, so
    /// `strict` rejects uncentered ones.
    pub fn population_sigma(&self, strict: bool) -> Result<DMatrix<f64>> {
        self.require_centered(strict)?;
        let scaled = &self.means * self.d_pi();
        let sigma = &self.sigma_w + scaled * self.means.transpose();
        Ok(crate::linalg::symmetrize(&sigma))
    }

    /// Regression matrix `B = Sigma^{-1} M D_pi`, by a Cholesky solve.
    pub fn population_b(&self) -> Result<DMatrix<f64>> {
        let sigma = self.population_sigma(true)?;
        let rhs = &self.means * self.d_pi();
        spd_solve(&sigma, &rhs, "Sigma")
    }

    /// `H` via the requested form. The three forms agree for centered models.
    pub fn population_h(&self, form: HForm) -> Result<DMatrix<f64>> {
        let b = self.population_b()?;
        Ok(self.h_from_b(&b, form)?)
    }

    fn h_from_b(&self, b: &DMatrix<f64>, form: HForm) -> Result<DMatrix<f64>> {
        let d = self.d_pi();
        let h = match form {
            HForm::ViaSigma => {
                let sigma = self.population_sigma(true)?;
                &d - b.transpose() * sigma * b
            }
            HForm::ViaMLeft => &d - &d * self.means.transpose() * b,
            HForm::ViaMRight => &d - b.transpose() * &self.means * &d,
        };
        Ok(h)
    }

    /// Discriminant directions `B_star = Sigma_W^{-1} M`.
    pub fn population_b_star(&self) -> DMatrix<f64> {
        self.chol_w.solve(&self.means)
    }

    /// `Omega = D_pi^{-1} + M^T Sigma_W^{-1} M`, the inverse of `H`.
    pub fn omega(&self) -> DMatrix<f64> {
        let inv_pi = self.pi.map(|v| 1.0 / v);
        DMatrix::from_diagonal(&inv_pi) + self.means.transpose() * self.population_b_star()
    }

    /// `max_l mu_l^T Sigma_W^{-1} mu_l`, computed from triangular solves.
    pub fn separation_delta(&self) -> f64 {
        let l = self.chol_w.l();
        let mut best = 0.0f64;
        for col in self.means.column_iter() {
            let w = l
                .solve_lower_triangular(&col.into_owned())
                .expect("Cholesky factor has a positive diagonal");
            best = best.max(w.norm_squared());
        }
        best
    }

    /// All population quantities at once; requires a centered model.
    pub fn derived(&self) -> Result<PopulationDerived> {
        let sigma = self.population_sigma(true)?;
        let rhs = &self.means * self.d_pi();
        let b = spd_solve(&sigma, &rhs, "Sigma")?;
        let h = crate::linalg::symmetrize(&self.h_from_b(&b, HForm::ViaMLeft)?);
        Ok(PopulationDerived {
            sigma,
            b,
            h,
            b_star: self.population_b_star(),
            delta_inf: self.separation_delta(),
        })
    }

    /// Bayes scores `(x - mu_l)^T Sigma_W^{-1} (x - mu_l) - 2 log pi_l`.
    pub fn bayes_scores(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_shape("x", (self.n_features(), 1), x.shape())?;
        let l = self.chol_w.l();
        let scores = self.means.column_iter().zip(self.pi.iter()).map(|(mu, &p)| {
            let w = l
                .solve_lower_triangular(&(x - mu))
                .expect("Cholesky factor has a positive diagonal");
            w.norm_squared() - 2.0 * p.ln()
        });
        Ok(DVector::from_iterator(self.n_classes(), scores))
    }

    /// Bayes rule; ties resolve to the smallest class index.
    pub fn bayes_classify(&self, x: &DVector<f64>) -> Result<usize> {
        Ok(argmin(self.bayes_scores(x)?.iter().copied()))
    }

    /// A classifier equivalent to [`Self::bayes_classify`] that evaluates the
    /// linear scores `mu_l^T b*_l - 2 x^T b*_l - 2 log pi_l` (the quadratic
    /// term in `x` is common to all classes).
    pub fn linear_rule(&self) -> BayesLinearRule {
        let b_star = self.population_b_star();
        let offsets = DVector::from_iterator(
            self.n_classes(),
            (0..self.n_classes()).map(|k| {
                self.means.column(k).dot(&b_star.column(k)) - 2.0 * self.pi[k].ln()
            }),
        );
        BayesLinearRule { b_star, offsets }
    }

    /// Draws `n` samples. Returns the `n x p` features and class labels.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> (DMatrix<f64>, Vec<usize>) {
        let p = self.n_features();
        let l = self.chol_w.l();
        let cdf: Vec<f64> = self
            .pi
            .iter()
            .scan(0.0, |acc, &v| {
                *acc += v;
                Some(*acc)
            })
            .collect();
        let mut x = DMatrix::zeros(n, p);
        let mut labels = Vec::with_capacity(n);
        let mut z = DVector::zeros(p);
        for i in 0..n {
            let u: f64 = rng.random();
            let class = cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1);
            for zj in z.iter_mut() {
                *zj = StandardNormal.sample(rng);
            }
            let row = &l * &z + self.means.column(class);
            x.row_mut(i).copy_from(&row.transpose());
            labels.push(class);
        }
        (x, labels)
    }

    /// Monte-Carlo estimate of the Bayes error `P(Y != g*(X))`.
    ///
    /// Samples are generated in fixed-size chunks, each with its own derived
    /// seed, so the estimate does not depend on the thread count.
    pub fn bayes_error_mc(&self, n_samples: usize, seed: u64) -> Result<f64> {
        if n_samples == 0 {
            return Err(LdrrError::InvalidArgument("n_samples must be >= 1".into()));
        }
        const CHUNK: usize = 4096;
        let rule = self.linear_rule();
        let n_chunks = n_samples.div_ceil(CHUNK);
        let errors: usize = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let len = CHUNK.min(n_samples - c * CHUNK);
                let mut rng = rng_from_seed(derive_seed(seed, "bayes_mc", c as u64));
                let (x, y) = self.sample(len, &mut rng);
                rule.classify_rows(&x)
                    .iter()
                    .zip(&y)
                    .filter(|(a, b)| a != b)
                    .count()
            })
            .sum();
        Ok(errors as f64 / n_samples as f64)
    }
}

/// Precomputed linear form of the Bayes rule.
#[derive(Debug, Clone)]
pub struct BayesLinearRule {
    b_star: DMatrix<f64>,
    offsets: DVector<f64>,
}

impl BayesLinearRule {
    pub fn scores(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.offsets - (self.b_star.transpose() * x) * 2.0
    }

    pub fn classify(&self, x: &DVector<f64>) -> usize {
        argmin(self.scores(x).iter().copied())
    }

    /// Classifies every row of `x`.
    pub fn classify_rows(&self, x: &DMatrix<f64>) -> Vec<usize> {
        let proj = x * &self.b_star;
        proj.row_iter()
            .map(|r| argmin((0..self.offsets.len()).map(|k| self.offsets[k] - 2.0 * r[k])))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn scalar_model(pi: (f64, f64)) -> MixtureModel {
        MixtureModel::new(
            DMatrix::from_row_slice(1, 2, &[-1.0, 1.0]),
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_vec(vec![pi.0, pi.1]),
        )
        .unwrap()
    }

    #[test]
    fn scalar_sigma_b_h() {
        let m = scalar_model((0.5, 0.5));
        let sigma = m.population_sigma(true).unwrap();
        assert!((sigma[(0, 0)] - 2.0).abs() < 1e-15);
        let b = m.population_b().unwrap();
        assert!(max_abs_diff(&b, &DMatrix::from_row_slice(1, 2, &[-0.25, 0.25])) < 1e-15);
        let expected_h = DMatrix::from_row_slice(2, 2, &[0.375, 0.125, 0.125, 0.375]);
        for form in [HForm::ViaSigma, HForm::ViaMLeft, HForm::ViaMRight] {
            assert!(max_abs_diff(&m.population_h(form).unwrap(), &expected_h) < 1e-15);
        }
        let h_inv = m.population_h(HForm::ViaSigma).unwrap().try_inverse().unwrap();
        let expected_inv = DMatrix::from_row_slice(2, 2, &[3.0, -1.0, -1.0, 3.0]);
        assert!(max_abs_diff(&h_inv, &expected_inv) < 1e-12);
        assert!(max_abs_diff(&m.omega(), &expected_inv) < 1e-15);
        let bstar = m.population_b_star();
        assert!(max_abs_diff(&bstar, &DMatrix::from_row_slice(1, 2, &[-1.0, 1.0])) < 1e-15);
        assert!(max_abs_diff(&(b * h_inv), &bstar) < 1e-12);
        assert!((m.separation_delta() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_dim_sigma() {
        let m = MixtureModel::new(
            DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, 0.0]),
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![0.5, 0.5]),
        )
        .unwrap();
        let sigma = m.population_sigma(true).unwrap();
        assert!(max_abs_diff(&sigma, &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])) < 1e-15);
    }

    #[test]
    fn zero_means() {
        let sw = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let m = MixtureModel::new(DMatrix::zeros(2, 3), sw.clone(), DVector::from_vec(vec![0.2, 0.3, 0.5]))
            .unwrap();
        assert!(max_abs_diff(&m.population_sigma(true).unwrap(), &sw) < 1e-15);
        assert!(m.population_b().unwrap().amax() == 0.0);
        let h = m.population_h(HForm::ViaSigma).unwrap();
        assert!(max_abs_diff(&h, &DMatrix::from_diagonal(m.pi())) < 1e-15);
        assert_eq!(m.separation_delta(), 0.0);
    }

    #[test]
    fn scaled_identity_covariance() {
        let means = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 3.0, -3.0]);
        let m = MixtureModel::new(means.clone(), DMatrix::identity(2, 2) * 2.0, DVector::from_vec(vec![0.5, 0.5]))
            .unwrap();
        assert!(max_abs_diff(&m.population_b_star(), &(means / 2.0)) < 1e-15);
    }

    #[test]
    fn uncentered_is_rejected_in_strict_mode() {
        let m = MixtureModel::new(
            DMatrix::from_row_slice(1, 2, &[0.0, 2.0]),
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_vec(vec![0.5, 0.5]),
        )
        .unwrap();
        assert!(matches!(m.population_sigma(true), Err(LdrrError::NotCentered(_))));
        assert!(m.population_sigma(false).is_ok());
        assert!(m.center().is_centered());
    }

    #[test]
    fn invalid_models() {
        let bad_pi = MixtureModel::new(
            DMatrix::zeros(1, 2),
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_vec(vec![0.5, 0.6]),
        );
        assert!(matches!(bad_pi, Err(LdrrError::InvalidModel(_))));
        let not_pd = MixtureModel::new(
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
            DVector::from_vec(vec![0.5, 0.5]),
        );
        assert!(matches!(not_pd, Err(LdrrError::NotPositiveDefinite(_))));
    }

    #[test]
    fn bayes_rule_examples() {
        let m = scalar_model((0.9, 0.1));
        let s = m.bayes_scores(&DVector::from_vec(vec![0.0])).unwrap();
        assert!((s[0] - (1.0 - 2.0 * 0.9f64.ln())).abs() < 1e-14);
        assert!((s[0] - 1.2107).abs() < 1e-4);
        assert!((s[1] - 5.6052).abs() < 1e-4);
        assert_eq!(m.bayes_classify(&DVector::from_vec(vec![0.0])).unwrap(), 0);

        let eq = scalar_model((0.5, 0.5));
        assert_eq!(eq.bayes_classify(&DVector::from_vec(vec![1.0])).unwrap(), 1);
        // exact tie at the midpoint resolves to the first class
        assert_eq!(eq.bayes_classify(&DVector::from_vec(vec![0.0])).unwrap(), 0);
    }

    #[test]
    fn delta_scales_quadratically() {
        let m = scalar_model((0.5, 0.5));
        let m3 = MixtureModel::new(m.means() * 3.0, m.sigma_w().clone(), m.pi().clone()).unwrap();
        assert!((m3.separation_delta() - 9.0 * m.separation_delta()).abs() < 1e-12);
    }

    #[test]
    fn bayes_error_examples() {
        let far = MixtureModel::new(
            DMatrix::from_row_slice(1, 2, &[-100.0, 100.0]),
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_vec(vec![0.5, 0.5]),
        )
        .unwrap();
        assert!(far.bayes_error_mc(10_000, 1).unwrap() <= 0.001);

        let same = MixtureModel::new(
            DMatrix::from_row_slice(1, 2, &[0.3, 0.3]),
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_vec(vec![0.5, 0.5]),
        )
        .unwrap();
        let e = same.bayes_error_mc(10_000, 2).unwrap();
        assert!((e - 0.5).abs() <= 0.02, "{e}");

        // Phi(-1) = 0.158655...
        let unit = scalar_model((0.5, 0.5));
        let e = unit.bayes_error_mc(100_000, 3).unwrap();
        assert!((e - 0.158_655_253_931_457).abs() <= 0.01, "{e}");
        assert_eq!(e, unit.bayes_error_mc(100_000, 3).unwrap());
        assert!(unit.bayes_error_mc(0, 3).is_err());
    }
}
