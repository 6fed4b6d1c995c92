//! Ordinary and weighted least squares with model-based coefficient
//! covariance, and the per-arm inverse-variance weights used by the
//! weighted estimators.
//!
//! Fits go through a Householder QR of `sqrt(W) X`. The dispersion is the
//! weighted residual sum of squares over `N - p`, so the covariance
//! `sigma2_hat (X^T W X)^{-1}` is unchanged when every weight is rescaled.

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Qr;
use crate::scalar::Scalar;

/// Relative threshold on `|R_jj|` below which a design column counts as
/// linearly dependent on the preceding ones.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Treatment arm of a patient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    Placebo,
    Treatment,
}

impl Arm {
    /// `1` for treatment, `0` for placebo.
    pub fn indicator<T: Scalar>(self) -> T {
        match self {
            Arm::Placebo => T::zero(),
            Arm::Treatment => T::one(),
        }
    }

    pub fn from_indicator(a: u8) -> Option<Self> {
        match a {
            0 => Some(Arm::Placebo),
            1 => Some(Arm::Treatment),
            _ => None,
        }
    }

    pub fn swapped(self) -> Self {
        match self {
            Arm::Placebo => Arm::Treatment,
            Arm::Treatment => Arm::Placebo,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Placebo => "placebo",
            Arm::Treatment => "treatment",
        })
    }
}

/// What a design column represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Intercept,
    TimeLinear,
    /// 1-based spline basis index.
    SplineBasis(usize),
    Treatment,
}

impl fmt::Display for ColumnRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnRole::Intercept => f.write_str("intercept"),
            ColumnRole::TimeLinear => f.write_str("t"),
            ColumnRole::SplineBasis(j) => write!(f, "B{j}"),
            ColumnRole::Treatment => f.write_str("a"),
        }
    }
}

/// A design matrix with labelled columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec<T> {
    columns: Vec<ColumnRole>,
    matrix: Array2<T>,
    treatment_col: Option<usize>,
}

impl<T: Scalar> DesignSpec<T> {
    pub fn new(columns: Vec<ColumnRole>, matrix: Array2<T>) -> Result<Self> {
        if columns.is_empty() || matrix.ncols() != columns.len() {
            return Err(Error::InvalidArgument(format!(
                "design has {} columns but {} roles",
                matrix.ncols(),
                columns.len()
            )));
        }
        let zero_cols: Vec<String> = matrix
            .columns()
            .into_iter()
            .zip(&columns)
            .filter(|(c, _)| c.iter().all(|&v| v == T::zero()))
            .map(|(_, role)| role.to_string())
            .collect();
        if !zero_cols.is_empty() {
            return Err(Error::SingularDesign { columns: zero_cols });
        }
        let treatment_col = columns.iter().position(|r| *r == ColumnRole::Treatment);
        Ok(Self {
            columns,
            matrix,
            treatment_col,
        })
    }

    /// `[intercept, t, a]` design of the parametric comparators.
    pub fn linear_time(t: &[T], arm: &[Arm]) -> Result<Self> {
        let n = t.len();
        let mut m = Array2::<T>::zeros((n, 3));
        for i in 0..n {
            m[[i, 0]] = T::one();
            m[[i, 1]] = t[i];
            m[[i, 2]] = arm[i].indicator();
        }
        Self::new(
            vec![ColumnRole::Intercept, ColumnRole::TimeLinear, ColumnRole::Treatment],
            m,
        )
    }

    /// `[B_1 .. B_q, a]` working-model design from a basis matrix.
    pub fn spline_with_treatment(basis: &Array2<T>, arm: &[Arm]) -> Result<Self> {
        let (n, q) = basis.dim();
        let mut m = Array2::<T>::zeros((n, q + 1));
        m.slice_mut(ndarray::s![.., ..q]).assign(basis);
        for (i, a) in arm.iter().enumerate() {
            m[[i, q]] = a.indicator();
        }
        let mut roles: Vec<ColumnRole> = (1..=q).map(ColumnRole::SplineBasis).collect();
        roles.push(ColumnRole::Treatment);
        Self::new(roles, m)
    }

    pub fn columns(&self) -> &[ColumnRole] {
        &self.columns
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.matrix
    }

    pub fn treatment_col(&self) -> Option<usize> {
        self.treatment_col
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Sub-design on the given rows. Fails if a column becomes all zero.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let m = self.matrix.select(ndarray::Axis(0), rows);
        Self::new(self.columns.clone(), m)
    }

    /// `X beta`.
    pub fn predict(&self, coefficients: &[T]) -> Vec<T> {
        self.matrix
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .zip(coefficients)
                    .fold(T::zero(), |acc, (&x, &b)| acc + x * b)
            })
            .collect()
    }
}

/// Result of a (weighted) least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit<T> {
    pub coefficients: Vec<T>,
    pub covariance: Array2<T>,
    /// Raw (unweighted) residuals `y - X beta`.
    pub residuals: Vec<T>,
    pub dof: usize,
    pub sigma2_hat: T,
}

impl<T: Scalar> LinearFit<T> {
    pub fn se(&self, j: usize) -> T {
        self.covariance[[j, j]].max(T::zero()).sqrt()
    }
}

/// Per-arm inverse mean-squared-residual weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupWeights<T> {
    w: Vec<T>,
    placebo_mse: T,
    treatment_mse: T,
}

impl<T: Scalar> GroupWeights<T> {
    pub fn weights(&self) -> &[T] {
        &self.w
    }

    pub fn group_mse(&self, arm: Arm) -> T {
        match arm {
            Arm::Placebo => self.placebo_mse,
            Arm::Treatment => self.treatment_mse,
        }
    }

    /// Same group MSEs, restricted to a subset of patients.
    pub fn select(&self, rows: &[usize]) -> Vec<T> {
        rows.iter().map(|&i| self.w[i]).collect()
    }
}

impl<T> AsRef<[T]> for GroupWeights<T> {
    fn as_ref(&self) -> &[T] {
        &self.w
    }
}

pub fn ols_fit<T: Scalar>(x: &DesignSpec<T>, y: &[T]) -> Result<LinearFit<T>> {
    fit_weighted(x, y, None)
}

/// Minimizes `sum w_i (y_i - x_i^T beta)^2`.
pub fn wls_fit<T: Scalar, W: AsRef<[T]> + ?Sized>(
    x: &DesignSpec<T>,
    y: &[T],
    w: &W,
) -> Result<LinearFit<T>> {
    let w = w.as_ref();
    if w.len() != x.nrows() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {} observations",
            w.len(),
            x.nrows()
        )));
    }
    if let Some(i) = w.iter().position(|&wi| !(wi > T::zero() && wi.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "weight {} at index {i} is not positive",
            w[i]
        )));
    }
    fit_weighted(x, y, Some(w))
}

fn fit_weighted<T: Scalar>(x: &DesignSpec<T>, y: &[T], w: Option<&[T]>) -> Result<LinearFit<T>> {
    let (n, p) = x.matrix.dim();
    if y.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} responses for {n} design rows",
            y.len()
        )));
    }
    if n <= p {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {p} coefficients"
        )));
    }
    let sqrt_w: Option<Vec<T>> = w.map(|w| w.iter().map(|wi| wi.sqrt()).collect());
    let cols: Vec<Vec<T>> = x
        .matrix
        .columns()
        .into_iter()
        .map(|c| match &sqrt_w {
            Some(s) => c.iter().zip(s).map(|(&v, &si)| v * si).collect(),
            None => c.to_vec(),
        })
        .collect();
    let qr = Qr::from_columns(cols);

    let diag = qr.r_diag();
    let max_diag = diag.iter().fold(T::zero(), |m, d| m.max(d.abs()));
    let threshold = T::lit(RANK_TOLERANCE) * max_diag;
    let bad: Vec<String> = diag
        .iter()
        .zip(&x.columns)
        .filter(|(d, _)| !(d.abs() > threshold))
        .map(|(_, role)| role.to_string())
        .collect();
    if !bad.is_empty() {
        return Err(Error::SingularDesign { columns: bad });
    }

    let wy: Vec<T> = match &sqrt_w {
        Some(s) => y.iter().zip(s).map(|(&v, &si)| v * si).collect(),
        None => y.to_vec(),
    };
    let coefficients = qr.solve_least_squares(&wy);
    let fitted = x.predict(&coefficients);
    let residuals: Vec<T> = y.iter().zip(&fitted).map(|(&a, &b)| a - b).collect();
    let rss = match w {
        Some(w) => residuals
            .iter()
            .zip(w)
            .fold(T::zero(), |acc, (&r, &wi)| acc + wi * r * r),
        None => residuals.iter().fold(T::zero(), |acc, &r| acc + r * r),
    };
    let dof = n - p;
    let sigma2_hat = rss / T::from_usize_lossy(dof);
    let covariance = qr.gram_inverse().mapv(|v| v * sigma2_hat);
    Ok(LinearFit {
        coefficients,
        covariance,
        residuals,
        dof,
        sigma2_hat,
    })
}

/// Weights `w_i = 1 / mean(r_j^2 : j in arm of i)`.
pub fn group_weights<T: Scalar>(residuals: &[T], groups: &[Arm]) -> Result<GroupWeights<T>> {
    if residuals.len() != groups.len() {
        return Err(Error::InvalidArgument(format!(
            "{} residuals for {} group labels",
            residuals.len(),
            groups.len()
        )));
    }
    let mse = |arm: Arm| -> Result<T> {
        let (sum, count) = residuals
            .iter()
            .zip(groups)
            .filter(|(_, g)| **g == arm)
            .fold((T::zero(), 0usize), |(s, c), (&r, _)| (s + r * r, c + 1));
        if count == 0 {
            return Err(Error::InvalidArgument(format!("{arm} group is empty")));
        }
        let m = sum / T::from_usize_lossy(count);
        if m == T::zero() {
            return Err(Error::DegenerateResiduals { group: arm });
        }
        Ok(m)
    };
    let placebo_mse = mse(Arm::Placebo)?;
    let treatment_mse = mse(Arm::Treatment)?;
    let w = groups
        .iter()
        .map(|g| match g {
            Arm::Placebo => T::one() / placebo_mse,
            Arm::Treatment => T::one() / treatment_mse,
        })
        .collect();
    Ok(GroupWeights {
        w,
        placebo_mse,
        treatment_mse,
    })
}
