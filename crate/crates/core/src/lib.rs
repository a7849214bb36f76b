//! Outlier-robust estimation by Bayesian reweighting.
//!
//! The crate wraps any outlier-free *non-minimal* solver (one that takes all
//! measurements and a weight per measurement) in an alternating reweighting
//! loop. Three Bayesian heuristics are provided (EROR, ESOR, ASOR) together
//! with the GNC-GM and GNC-TLS baselines.
//!
//! Two problem families ship with the crate:
//!
//! - [`registration`]: 3D point-cloud registration solved by a weighted
//!   closed-form (Horn / SVD) solver;
//! - [`pgo`]: 2D pose-graph optimization solved by weighted, damped
//!   Gauss-Newton.
//!
//! [`bench`] generates synthetic instances and runs seeded Monte-Carlo sweeps,
//! and [`io`] reads PLY clouds and g2o graphs and writes CSV/JSON results.
//!
//! ```
//! use robust_bayes::kernels::{run_robust, Method, RobustConfig};
//! use robust_bayes::registration::{CorrespondenceSet, RigidTransform3};
//! use nalgebra::Vector3;
//!
//! let src: Vec<_> = (0..10)
//!     .map(|i| Vector3::new(i as f64, (i * i % 7) as f64, (i % 3) as f64))
//!     .collect();
//! let mut dst: Vec<_> = src.iter().map(|p| p + Vector3::new(1.0, 0.0, 0.0)).collect();
//! dst[3] = Vector3::new(50.0, -20.0, 9.0);
//! let corr = CorrespondenceSet::new(src, dst, 1.0).unwrap();
//! let out = run_robust(&corr, &RobustConfig::with_method(Method::Esor), None).unwrap();
//! let t: RigidTransform3 = out.estimate;
//! assert!((t.translation - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-9);
//! ```

pub mod bench;
pub mod error;
pub mod io;
pub mod kernels;
pub mod pgo;
pub mod registration;

pub use error::{Error, Result};
