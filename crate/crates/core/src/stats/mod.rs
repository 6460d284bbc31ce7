//! Probability machinery: fading channel, chi-square quantiles, per-class
//! Gaussians and binomial moments.

pub mod binomial;
pub mod channel;
pub mod chi2;
pub mod gaussian;

pub use binomial::{binomial_moment, binomial_moment_exact, moment_bound};
pub use channel::{inverse_mean_gain, ChannelKind, ChannelModel};
pub use chi2::{chi2_cdf, chi2_quantile, mahalanobis_radius, regularized_gamma_p};
pub use gaussian::ClassGaussian;
