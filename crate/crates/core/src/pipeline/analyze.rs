//! The statistical analysis report: Type-III ANOVA of smile duration and
//! intensity over listener sex, speaker sex, and relationship; Tukey HSD
//! over listener-sex x relationship groups; and the inverse-link GLM of
//! intensity on the conditioning entries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::corpus::{Intensity, Relationship, Sex, WindowKind};
use crate::error::{Error, Result};
use crate::features::CONDITIONING_ORDER;
use crate::stats::{anova_type3, fit_glm_inverse_link, tukey_hsd, AnovaRecord, AnovaTable, GlmFit, TukeyResult};

/// One row of `features.csv`, as far as the analysis needs it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureRow {
    pub instance_id: String,
    pub dyad_id: String,
    pub kind: WindowKind,
    pub duration_s: f64,
    pub intensity: Option<Intensity>,
    pub listener_sex: Sex,
    pub speaker_sex: Sex,
    pub relationship: Relationship,
    pub conditioning: [f64; 6],
}

pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::missing(format!("features.csv lacks column {name}")))
    };
    let idx_id = col("instance_id")?;
    let idx_dyad = col("dyad_id")?;
    let idx_kind = col("kind")?;
    let idx_dur = col("duration_s")?;
    let idx_int = col("intensity")?;
    let idx_lsex = col("listener_sex")?;
    let idx_ssex = col("speaker_sex")?;
    let idx_rel = col("relationship")?;
    let idx_cond: Vec<usize> = CONDITIONING_ORDER
        .iter()
        .map(|n| col(&format!("cond_{n}")))
        .collect::<Result<_>>()?;

    let parse_sex = |s: &str| -> Result<Sex> {
        match s {
            "male" => Ok(Sex::Male),
            "female" => Ok(Sex::Female),
            other => Err(Error::invalid(format!("bad sex `{other}`"))),
        }
    };
    let parse_rel = |s: &str| -> Result<Relationship> {
        Relationship::ALL
            .iter()
            .copied()
            .find(|r| r.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("bad relationship `{s}`")))
    };

    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 2,
            message: e.to_string(),
        })?;
        let mut conditioning = [0.0; 6];
        for (j, &c) in idx_cond.iter().enumerate() {
            conditioning[j] = rec[c].parse().map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: i + 2,
                message: format!("bad conditioning value: {e}"),
            })?;
        }
        out.push(FeatureRow {
            instance_id: rec[idx_id].to_string(),
            dyad_id: rec[idx_dyad].to_string(),
            kind: if &rec[idx_kind] == "smile" { WindowKind::Smile } else { WindowKind::NonSmile },
            duration_s: rec[idx_dur].parse().map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: i + 2,
                message: format!("bad duration: {e}"),
            })?,
            intensity: Intensity::parse(&rec[idx_int])?,
            listener_sex: parse_sex(&rec[idx_lsex])?,
            speaker_sex: parse_sex(&rec[idx_ssex])?,
            relationship: parse_rel(&rec[idx_rel])?,
            conditioning,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub anova_duration: AnovaTable,
    pub anova_intensity: AnovaTable,
    /// Present when at least two listener-sex x relationship groups have
    /// two or more smiles.
    pub tukey_duration: Option<TukeyResult>,
    pub glm_intensity: GlmFit,
    pub glm_terms: Vec<String>,
    pub n_smiles: usize,
}

pub fn analyze(rows: &[FeatureRow]) -> Result<AnalysisReport> {
    let smiles: Vec<&FeatureRow> = rows.iter().filter(|r| r.kind == WindowKind::Smile).collect();
    if smiles.is_empty() {
        return Err(Error::invalid("no smile instances to analyze"));
    }
    let records = |response: &dyn Fn(&FeatureRow) -> f64| -> Vec<AnovaRecord> {
        smiles
            .iter()
            .map(|r| AnovaRecord {
                response: response(r),
                sex_listener: r.listener_sex,
                sex_speaker: r.speaker_sex,
                relationship: r.relationship,
            })
            .collect()
    };
    let anova_duration = anova_type3(&records(&|r| r.duration_s))
        .map_err(|e| Error::invalid(format!("duration ANOVA: {e}")))?;
    let anova_intensity = anova_type3(&records(&|r| {
        r.intensity.map(|i| i.score()).unwrap_or(0.0)
    }))
    .map_err(|e| Error::invalid(format!("intensity ANOVA: {e}")))?;

    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &smiles {
        groups
            .entry(format!("{}/{}", r.listener_sex, r.relationship))
            .or_default()
            .push(r.duration_s);
    }
    groups.retain(|_, v| v.len() >= 2);
    let tukey_duration = if groups.len() >= 2 {
        Some(tukey_hsd(&groups, 0.05)?)
    } else {
        None
    };

    let n = smiles.len();
    let mut design = Array2::zeros((n, 7));
    let mut response = Array1::zeros(n);
    for (i, r) in smiles.iter().enumerate() {
        design[[i, 0]] = 1.0;
        for j in 0..6 {
            design[[i, 1 + j]] = r.conditioning[j];
        }
        response[i] = r.intensity.map(|v| v.score()).ok_or_else(|| {
            Error::missing(format!("smile {} lacks an intensity", r.instance_id))
        })?;
    }
    let glm_intensity = fit_glm_inverse_link(&design, &response)
        .map_err(|e| Error::invalid(format!("intensity GLM: {e}")))?;
    let mut glm_terms = vec!["intercept".to_string()];
    glm_terms.extend(CONDITIONING_ORDER.iter().map(|s| s.to_string()));

    Ok(AnalysisReport {
        anova_duration,
        anova_intensity,
        tukey_duration,
        glm_intensity,
        glm_terms,
        n_smiles: n,
    })
}

impl AnalysisReport {
    /// Aligned-text tables with the familiar Df / Sum Sq / Mean Sq /
    /// F value / Pr(>F) columns.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Smile instances analyzed: {}", self.n_smiles);
        let _ = writeln!(out);
        let _ = writeln!(out, "ANOVA: duration ~ listener sex * relationship + speaker sex");
        out.push_str(&render_anova(&self.anova_duration));
        let _ = writeln!(out);
        let _ = writeln!(out, "ANOVA: intensity ~ listener sex * relationship + speaker sex");
        out.push_str(&render_anova(&self.anova_intensity));
        let _ = writeln!(out);
        match &self.tukey_duration {
            Some(tukey) => {
                let _ = writeln!(out, "Tukey HSD on duration (listener sex x relationship):");
                let _ = writeln!(
                    out,
                    "{:<42} {:>10} {:>10} {:>10} {:>10}",
                    "pair", "diff", "p adj", "ci low", "ci high"
                );
                for p in &tukey.pairs {
                    let _ = writeln!(
                        out,
                        "{:<42} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                        format!("{} vs {}", p.group_a, p.group_b),
                        p.mean_diff,
                        p.adjusted_p,
                        p.ci_low,
                        p.ci_high
                    );
                }
            }
            None => {
                let _ = writeln!(out, "Tukey HSD skipped: fewer than two groups with 2+ smiles");
            }
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "GLM (inverse link): intensity ~ conditioning entries  (R² = {:.3})",
            self.glm_intensity.r_squared
        );
        let _ = writeln!(
            out,
            "{:<28} {:>12} {:>12} {:>12} {:>10}",
            "term", "coef(eta)", "slope(mean)", "std err", "Pr(>|t|)"
        );
        for (i, term) in self.glm_terms.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<28} {:>12.4} {:>12.4} {:>12.4} {:>10.4}{}",
                term,
                self.glm_intensity.coefficients[i],
                self.glm_intensity.mean_space_slopes[i],
                self.glm_intensity.standard_errors[i],
                self.glm_intensity.p_values[i],
                marker(self.glm_intensity.p_values[i]),
            );
        }
        out
    }
}

fn render_anova(table: &AnovaTable) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<28} {:>4} {:>10} {:>10} {:>10} {:>10}",
        "", "Df", "Sum Sq", "Mean Sq", "F value", "Pr(>F)"
    );
    for row in &table.rows {
        let _ = writeln!(
            out,
            "{:<28} {:>4} {:>10.2} {:>10.2} {:>10.2} {:>10.4}{}",
            row.term,
            row.df,
            row.sum_sq,
            row.mean_sq,
            row.f_value,
            row.p_value,
            marker(row.p_value),
        );
    }
    let _ = writeln!(
        out,
        "{:<28} {:>4} {:>10.2} {:>10.2}",
        "Residuals", table.residual_df, table.residual_sum_sq, table.residual_mean_sq
    );
    out
}

fn marker(p: f64) -> &'static str {
    if p < 0.01 {
        " **"
    } else if p < 0.05 {
        " *"
    } else if p < 0.1 {
        " ·"
    } else {
        ""
    }
}
