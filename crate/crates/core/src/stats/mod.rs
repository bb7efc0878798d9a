//! Statistical analyses: Type-III ANOVA with two-way interactions, Tukey HSD
//! post hoc comparisons, and a Gaussian GLM with inverse link predicting
//! smile intensity.

mod anova;
mod dist;
mod glm;
mod ols;
mod tukey;

pub use anova::{anova_sequential_ss, anova_type3, AnovaRecord, AnovaRow, AnovaTable};
pub use dist::{
    f_upper_tail, normal_cdf, studentized_range_critical, studentized_range_upper_tail,
    t_two_sided_p, t_upper_tail,
};
pub use glm::{fit_glm_inverse_link, GlmFit};
pub use ols::{fit_ols, OlsFit};
pub use tukey::{tukey_hsd, TukeyPair, TukeyResult};
