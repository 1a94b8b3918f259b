//! Matching in the protected domain.
//!
//! Both templates are decoded with their keys into feature matrices; a
//! legitimate verification uses the enrolled user's key material, so a stolen
//! or cross-database template decodes into noise and scores near zero.
//!
//! Local score between a query minutia row and an enrolled row: every present
//! query pair is charged the distance to its nearest present enrolled pair,
//! sqrt(dcount^2 + (weight * dorient)^2), and the charges are averaged.
//! Global score: greedily pair rows with the smallest local score first, one
//! to one, stopping at the threshold; the result is matched pairs over query
//! row count.

use thiserror::Error;

use crate::angle::wrap_pi;
use crate::coprime::{extract_features, KeySet, ProtectedTemplate, TemplateError};
use crate::par;
use crate::ridgefeat::{FeatureMatrix, SectorFeature};

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("sector counts differ: query {query}, enrolled {enrolled}")]
    SectorMismatch { query: usize, enrolled: usize },
    #[error("match parameter {name} must be positive and finite, got {value}")]
    BadParam { name: &'static str, value: f64 },
    #[error(transparent)]
    Template(#[from] TemplateError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchParams {
    /// Largest local score that still counts as a matched minutia pair.
    pub local_threshold: f64,
    /// Scale applied to orientation differences against count differences.
    pub orientation_weight: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            local_threshold: 1.5,
            orientation_weight: 2.0,
        }
    }
}

impl MatchParams {
    pub fn new(local_threshold: f64, orientation_weight: f64) -> Result<Self, MatchError> {
        for (name, value) in [
            ("local_threshold", local_threshold),
            ("orientation_weight", orientation_weight),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(MatchError::BadParam { name, value });
            }
        }
        Ok(Self {
            local_threshold,
            orientation_weight,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Matched pairs over query minutia count, in [0, 1].
    pub overall_score: f64,
    pub matched_count: usize,
    pub query_count: usize,
    pub enrolled_count: usize,
    /// Local score table, query-major; infinity marks unusable pairings.
    pub local_scores: Vec<Vec<f64>>,
}

fn pair_distance(q: &SectorFeature, e: &SectorFeature, weight: f64) -> f64 {
    let dc = q.ridge_count - e.ridge_count;
    let dor = wrap_pi(q.mean_orientation - e.mean_orientation);
    (dc * dc + (weight * dor) * (weight * dor)).sqrt()
}

/// Local score between two feature rows. `None` when the query row has no
/// present features (the row cannot take part in pairing); positive infinity
/// when only the enrolled row is featureless.
pub fn local_score(
    query_row: &[SectorFeature],
    enrolled_row: &[SectorFeature],
    params: &MatchParams,
) -> Option<f64> {
    let q_present: Vec<&SectorFeature> = query_row.iter().filter(|f| !f.is_absent()).collect();
    if q_present.is_empty() {
        return None;
    }
    let e_present: Vec<&SectorFeature> = enrolled_row.iter().filter(|f| !f.is_absent()).collect();
    if e_present.is_empty() {
        return Some(f64::INFINITY);
    }
    let total: f64 = q_present
        .iter()
        .map(|q| {
            e_present
                .iter()
                .map(|e| pair_distance(q, e, params.orientation_weight))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Some(total / q_present.len() as f64)
}

/// Matches two decoded feature matrices.
pub fn match_features(
    query: &FeatureMatrix,
    enrolled: &FeatureMatrix,
    params: &MatchParams,
) -> Result<MatchResult, MatchError> {
    if query.sector_count() != enrolled.sector_count() {
        return Err(MatchError::SectorMismatch {
            query: query.sector_count(),
            enrolled: enrolled.sector_count(),
        });
    }
    let n = query.minutia_count();
    let m = enrolled.minutia_count();
    let table: Vec<Vec<f64>> = par::map_indexed(n, |i| {
        (0..m)
            .map(|j| local_score(query.row(i), enrolled.row(j), params).unwrap_or(f64::INFINITY))
            .collect()
    });

    let mut row_free = vec![true; n];
    let mut col_free = vec![true; m];
    let mut matched = 0usize;
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, row) in table.iter().enumerate() {
            if !row_free[i] {
                continue;
            }
            for (j, &score) in row.iter().enumerate() {
                if !col_free[j] {
                    continue;
                }
                if best.is_none_or(|(b, _, _)| score < b) {
                    best = Some((score, i, j));
                }
            }
        }
        match best {
            Some((score, i, j)) if score <= params.local_threshold => {
                row_free[i] = false;
                col_free[j] = false;
                matched += 1;
            }
            _ => break,
        }
    }

    Ok(MatchResult {
        overall_score: matched as f64 / n as f64,
        matched_count: matched,
        query_count: n,
        enrolled_count: m,
        local_scores: table,
    })
}

/// Decodes two protected templates with their keys and matches them. In a
/// verification against a claimed identity, both key sets are the enrolled
/// user's.
pub fn match_templates(
    query: &ProtectedTemplate,
    enrolled: &ProtectedTemplate,
    query_keys: &KeySet,
    enrolled_keys: &KeySet,
    params: &MatchParams,
) -> Result<MatchResult, MatchError> {
    let q = extract_features(query, query_keys)?;
    let e = extract_features(enrolled, enrolled_keys)?;
    match_features(&q, &e, params)
}
