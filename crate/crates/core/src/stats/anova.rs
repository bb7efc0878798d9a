//! Type-III ANOVA of listener sex, speaker sex, and relationship (main
//! effects plus the three two-way interactions) with sum-to-zero coding.

use ndarray::{Array1, Array2};

use super::dist::f_upper_tail;
use super::ols::fit_ols;
use crate::corpus::{Relationship, Sex};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AnovaRecord {
    pub response: f64,
    pub sex_listener: Sex,
    pub sex_speaker: Sex,
    pub relationship: Relationship,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AnovaRow {
    pub term: String,
    pub df: usize,
    pub sum_sq: f64,
    pub mean_sq: f64,
    pub f_value: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AnovaTable {
    pub rows: Vec<AnovaRow>,
    pub residual_df: usize,
    pub residual_sum_sq: f64,
    pub residual_mean_sq: f64,
}

const TERMS: [&str; 6] = [
    "sex_listener",
    "sex_speaker",
    "relationship",
    "sex_listener:relationship",
    "sex_listener:sex_speaker",
    "sex_speaker:relationship",
];

/// Effects-coded columns for one record, per term.
///
/// Sex contributes one contrast column (+1 male, -1 female); relationship
/// three (level i vs the last level); interactions are products.
fn term_columns(r: &AnovaRecord) -> [Vec<f64>; 6] {
    let sl = sex_code(r.sex_listener);
    let ss = sex_code(r.sex_speaker);
    let rel = relationship_code(r.relationship);
    [
        vec![sl],
        vec![ss],
        rel.to_vec(),
        rel.iter().map(|c| sl * c).collect(),
        vec![sl * ss],
        rel.iter().map(|c| ss * c).collect(),
    ]
}

fn sex_code(s: Sex) -> f64 {
    match s {
        Sex::Male => 1.0,
        Sex::Female => -1.0,
    }
}

fn relationship_code(r: Relationship) -> [f64; 3] {
    let idx = Relationship::ALL.iter().position(|&x| x == r).unwrap();
    let mut c = [0.0; 3];
    if idx < 3 {
        c[idx] = 1.0;
    } else {
        c = [-1.0, -1.0, -1.0];
    }
    c
}

fn build_design(data: &[AnovaRecord], skip_term: Option<usize>) -> Array2<f64> {
    let n = data.len();
    let cols_per_term = [1usize, 1, 3, 3, 1, 3];
    let p = 1 + cols_per_term
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip_term)
        .map(|(_, c)| c)
        .sum::<usize>();
    let mut x = Array2::zeros((n, p));
    for (row, rec) in data.iter().enumerate() {
        x[[row, 0]] = 1.0;
        let mut col = 1;
        for (t, cols) in term_columns(rec).iter().enumerate() {
            if Some(t) == skip_term {
                continue;
            }
            for v in cols {
                x[[row, col]] = *v;
                col += 1;
            }
        }
    }
    x
}

/// Type-III ANOVA: each term's sum of squares is the increase in residual
/// sum of squares from dropping it out of the otherwise full model.
pub fn anova_type3(data: &[AnovaRecord]) -> Result<AnovaTable> {
    let n = data.len();
    for (factor, count) in [
        ("sex_listener", distinct(data, |r| r.sex_listener as usize)),
        ("sex_speaker", distinct(data, |r| r.sex_speaker as usize)),
        ("relationship", distinct(data, |r| r.relationship as usize)),
    ] {
        if count < 2 {
            return Err(Error::invalid(format!(
                "factor {factor} has fewer than 2 observed levels"
            )));
        }
    }
    let cols_per_term = [1usize, 1, 3, 3, 1, 3];
    let model_df: usize = cols_per_term.iter().sum();
    if n <= model_df + 1 {
        return Err(Error::invalid(format!(
            "need residual df >= 1: n={n}, model df={model_df}"
        )));
    }
    let y = Array1::from_iter(data.iter().map(|r| r.response));

    let full_design = build_design(data, None);
    let full = fit_ols(&full_design, &y).map_err(|e| named_term_error(e, None))?;
    let residual_df = full.df_resid;
    let residual_ms = full.residual_ss / residual_df as f64;

    let mut rows = Vec::with_capacity(6);
    for (t, name) in TERMS.iter().enumerate() {
        let reduced_design = build_design(data, Some(t));
        let reduced = fit_ols(&reduced_design, &y).map_err(|e| named_term_error(e, Some(name)))?;
        let df = cols_per_term[t];
        let sum_sq = (reduced.residual_ss - full.residual_ss).max(0.0);
        let mean_sq = sum_sq / df as f64;
        // a constant response gives 0/0; report no evidence against the null
        let (f_value, p_value) = if residual_ms <= 1e-300 {
            if mean_sq <= 1e-300 {
                (0.0, 1.0)
            } else {
                (f64::INFINITY, 0.0)
            }
        } else {
            let f = mean_sq / residual_ms;
            (f, f_upper_tail(f, df as f64, residual_df as f64)?)
        };
        rows.push(AnovaRow {
            term: name.to_string(),
            df,
            sum_sq,
            mean_sq,
            f_value,
            p_value,
        });
    }
    Ok(AnovaTable {
        rows,
        residual_df,
        residual_sum_sq: full.residual_ss,
        residual_mean_sq: residual_ms,
    })
}

fn named_term_error(e: Error, term: Option<&str>) -> Error {
    match (&e, term) {
        (Error::RankDeficient { .. }, Some(t)) => Error::invalid(format!(
            "term `{t}` is inestimable (empty cells in the design)"
        )),
        (Error::RankDeficient { .. }, None) => Error::invalid(
            "full model is inestimable (empty cells in the design)".to_string(),
        ),
        _ => e,
    }
}

fn distinct(data: &[AnovaRecord], key: impl Fn(&AnovaRecord) -> usize) -> usize {
    let mut seen = std::collections::BTreeSet::new();
    for r in data {
        seen.insert(key(r));
    }
    seen.len()
}

/// Sequential (Type-I) sums of squares in the fixed term order; used as an
/// independent oracle because it coincides with Type III on balanced designs.
pub fn anova_sequential_ss(data: &[AnovaRecord]) -> Result<Vec<f64>> {
    let y = Array1::from_iter(data.iter().map(|r| r.response));
    let cols_per_term = [1usize, 1, 3, 3, 1, 3];
    let mut included: Vec<usize> = Vec::new();
    let mut prev_rss = {
        let x = design_with_terms(data, &included);
        fit_ols(&x, &y)?.residual_ss
    };
    let mut out = Vec::new();
    for t in 0..6 {
        included.push(t);
        let x = design_with_terms(data, &included);
        let rss = fit_ols(&x, &y)?.residual_ss;
        out.push((prev_rss - rss).max(0.0));
        prev_rss = rss;
        let _ = cols_per_term;
    }
    Ok(out)
}

fn design_with_terms(data: &[AnovaRecord], terms: &[usize]) -> Array2<f64> {
    let n = data.len();
    let cols_per_term = [1usize, 1, 3, 3, 1, 3];
    let p = 1 + terms.iter().map(|&t| cols_per_term[t]).sum::<usize>();
    let mut x = Array2::zeros((n, p));
    for (row, rec) in data.iter().enumerate() {
        x[[row, 0]] = 1.0;
        let all = term_columns(rec);
        let mut col = 1;
        for &t in terms {
            for v in &all[t] {
                x[[row, col]] = *v;
                col += 1;
            }
        }
    }
    x
}
