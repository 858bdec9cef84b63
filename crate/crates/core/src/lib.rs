//! Prior-guided joint graphical lasso.
//!
//! Estimates one sparse Gaussian graphical model per class, with every class
//! precision split into a shared component and a class-specific component.
//! The specific components carry adaptive ℓ1 weights built from an external
//! structural prior (attention co-occurrence), whose sharpness is chosen by
//! extended BIC. The pipeline is:
//!
//! 1. [`gaussianize`]: rank-based nonparanormal transform and class covariances;
//! 2. [`priors`]: attention prior, adaptive weights and eBIC sharpness selection;
//! 3. [`admm`]: the joint common/specific solver ([`glasso`] is an independent
//!    single-class reference);
//! 4. [`inference`]: log-likelihood classification and signed message passing;
//! 5. [`synth`]: synthetic ground truth and recovery scoring.

pub mod admm;
pub mod error;
pub mod gaussianize;
pub mod glasso;
pub mod graph;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod normal;
pub mod normality;
pub mod priors;
pub mod synth;

pub use admm::{common_specific_ratio, fit_joint, JointModel, SolverConfig};
pub use error::{Error, Result};
pub use gaussianize::{class_covariance, nonparanormal_transform, ClassCovariance, ObservationMatrix};
pub use glasso::reference_glasso;
pub use inference::{classify, partial_correlation, signed_message_passing, ClassifierScores};
pub use priors::{adaptive_weights, attention_prior, select_k, AdaptiveWeightMatrix, PriorMatrix};
pub use synth::{generate_scenario, score_recovery, RecoveryReport, ScenarioSpec, SyntheticScenario};

pub use nalgebra::{DMatrix, DVector};
