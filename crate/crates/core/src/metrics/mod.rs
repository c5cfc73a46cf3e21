//! Explanation-quality metrics: faithfulness, robustness, complexity and
//! localization.

mod complexity;
mod faithfulness;
mod localization;
mod protocol;
mod report;
mod robustness;

pub use complexity::{complexity_entropy, sparseness_gini, ComplexityScore};
pub use faithfulness::{
    infidelity, infidelity_patch, insertion_deletion_auc, patch_perturbation, pixel_flipping_curve, trapezoid_auc,
    Curve, InfidelityEstimate, InsertionDeletion,
};
pub use localization::{localization, Localization};
pub use protocol::{ranking, Order, PerturbationProtocol, Replacement};
pub use report::{compensated_sum, mean_std, MetricReport};
pub use robustness::{sensitivity, Sensitivity, SensitivityMode};
