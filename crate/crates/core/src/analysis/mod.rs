//! Criticality diagnostics on spike records and binned activity.

mod avalanche;
mod binning;
mod branching;
pub mod optimize;
mod perturbation;
mod powerlaw;

pub use avalanche::extract_avalanches;
pub use binning::{bin, mean_iei, BinnedSeries};
pub use branching::{
    autocorrelation, autocorrelation_time, characterize, estimate_branching, fano,
    AutocorrFit, BranchingEstimate,
};
pub use perturbation::{susceptibility, vrd, vrd_trials, PerturbationResult};
pub use powerlaw::{
    compare_models, fit_avalanches, fit_exponential, fit_truncated_powerlaw, AvalancheFit,
    ExpFit, FitRange, Preferred, TplFit, S_MAX,
};
