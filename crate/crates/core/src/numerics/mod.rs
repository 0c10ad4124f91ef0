//! Shared numerical primitives: small symmetric matrices and the entropy
//! rate, uniform grids, Gauss–Hermite rules, stable log-mean-exp, the
//! standard normal law and reproducible random streams.

mod grid;
mod normal;
mod quad;
mod rng;
mod spd;
mod stats;

mod gaussian;
pub use gaussian::gaussian_expectation_1d;

pub use grid::Grid1D;
pub use normal::{norm_cdf, norm_pdf};
pub use quad::{gauss_hermite, gauss_legendre, QuadRule};
pub use rng::RngStream;
pub use spd::{entropy_rate, entropy_rate_eigen, spd_sqrt, symmetric_eigen, SpdMatrix, TOL_PD};
pub use stats::{log_mean_exp, log_sum_exp_weighted};
