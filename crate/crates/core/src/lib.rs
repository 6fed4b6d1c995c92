//! Semiparametric weighted spline regression for two-arm trials whose
//! placebo response drifts with enrollment time, together with the usual
//! comparators and a Monte Carlo engine for their operating characteristics.
//!
//! The numeric layers (`bspline`, `linalg`, `linmodels`, `estimators`,
//! `randtest`) are generic over [`Scalar`] (`f32` or `f64`); the simulation
//! engine and the command line work in `f64`.

pub mod bspline;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod linmodels;
pub mod randtest;
pub mod rng;
pub mod scalar;
pub mod simcore;

pub use bspline::{basis_value, design_matrix, make_knot_vector, BasisMatrix, KnotVector};
pub use error::{Error, Result};
pub use estimators::{FitResult, Method, TrialData};
pub use linmodels::{Arm, DesignSpec, GroupWeights, LinearFit};
pub use scalar::Scalar;

pub type KnotVectorF64 = KnotVector<f64>;
pub type KnotVectorF32 = KnotVector<f32>;
pub type BasisMatrixF64 = BasisMatrix<f64>;
pub type DesignSpecF64 = DesignSpec<f64>;
pub type LinearFitF64 = LinearFit<f64>;
pub type TrialDataF64 = TrialData<f64>;
pub type TrialDataF32 = TrialData<f32>;
pub type FitResultF64 = FitResult<f64>;
pub type FitResultF32 = FitResult<f32>;
