//! Accuracy, rankings, correlations, agreement and model-subset ablation.

mod ablation;
mod agreement;
mod category;
mod correlation;
mod ranking;

pub use ablation::{ablate_model_subsets, binomial, draw_model_subsets, AblationDraw, AblationRow};
pub use agreement::{agreement_matrix, predicted_option, AgreementMatrix};
pub use category::{category_report, CategoryReport, CategoryRow, NO_SUBSET};
pub use correlation::{kendall_tau, kendall_tau_b, pearson};
pub use ranking::{accuracy, RankedModel, Ranking, RANK_TIE_TOLERANCE};
