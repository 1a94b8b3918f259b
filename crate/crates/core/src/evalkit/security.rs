//! Security-side experiments: what happens after a key leaks, is revoked, or
//! is reused across applications.
//!
//! All of these reuse the verifier's own matching path. A "wrong key" is
//! never special-cased; the template is simply decoded with whatever keys the
//! claimed identity owns, and the scores fall out of that.

use std::collections::HashSet;

use serde::Serialize;

use super::{features_for, group_by_subject, protocol_scores, subject_keys, EvalError, KeyPolicy};
use crate::coprime::{generate_template, position_cycle, validate_keys, KeySet, ProtectedTemplate};
use crate::fpdata::DatasetEntry;
use crate::matcher::{match_templates, MatchParams};
use crate::par;
use crate::ridgefeat::FeatureMatrix;
use crate::rng::derive_seed;
use crate::sectoring::SectorConfig;

pub const HISTOGRAM_BINS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Genuine,
    Imposter,
    /// Same finger, revoked key: what a stolen-then-replaced template scores.
    PseudoImposter,
    /// Same finger enrolled in two applications under independent keys.
    PseudoGenuine,
}

/// Summary of one score distribution, histogrammed over [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionStats {
    pub kind: DistributionKind,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub histogram: Vec<u32>,
}

pub fn summarize_scores(kind: DistributionKind, scores: &[f64]) -> DistributionStats {
    let mut histogram = vec![0u32; HISTOGRAM_BINS];
    if scores.is_empty() {
        return DistributionStats {
            kind,
            count: 0,
            mean: 0.0,
            std: 0.0,
            min: 0.0,
            max: 0.0,
            histogram,
        };
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let std = if scores.len() < 2 {
        0.0
    } else {
        (scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &s in scores {
        min = min.min(s);
        max = max.max(s);
        let bin = ((s * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        histogram[bin] += 1;
    }
    DistributionStats {
        kind,
        count: scores.len(),
        mean,
        std,
        min,
        max,
        histogram,
    }
}

/// Overlap coefficient of two histograms: the summed bin-wise minimum of the
/// normalized frequencies, 1 for identical shapes, 0 for disjoint support.
pub fn histogram_overlap(a: &DistributionStats, b: &DistributionStats) -> f64 {
    if a.count == 0 || b.count == 0 {
        return 0.0;
    }
    a.histogram
        .iter()
        .zip(&b.histogram)
        .map(|(&x, &y)| (f64::from(x) / a.count as f64).min(f64::from(y) / b.count as f64))
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct RevocabilityReport {
    pub genuine: DistributionStats,
    pub imposter: DistributionStats,
    pub pseudo_imposter: DistributionStats,
    pub revoked_count: usize,
    /// |mean pseudo-imposter - mean imposter|; small means a revoked
    /// template is no more useful than a stranger's finger.
    pub imposter_gap: f64,
}

/// Re-enrolls one record under each revoked key and scores the old templates
/// against the current enrollment the way the verifier would, alongside the
/// population's genuine and imposter baselines under `policy`.
///
/// The comparison is meaningful under per-user keys: there a revoked template
/// and a stranger's attempt both decode with keys they were not built with,
/// and the two score distributions should be indistinguishable. Under a
/// shared key the imposter baseline measures actual finger dissimilarity
/// instead, and the gap mostly reflects that mismatch.
pub fn revocability_experiment(
    entries: &[DatasetEntry],
    target_index: usize,
    policy: &KeyPolicy,
    revoked_keys: &[KeySet],
    config: &SectorConfig,
    params: &MatchParams,
) -> Result<RevocabilityReport, EvalError> {
    if target_index >= entries.len() {
        return Err(EvalError::TargetOutOfRange {
            index: target_index,
            len: entries.len(),
        });
    }
    if revoked_keys.is_empty() {
        return Err(EvalError::InsufficientData {
            what: "revoked key sets",
            need: 1,
            found: 0,
        });
    }

    let target = std::slice::from_ref(&entries[target_index]);
    let features = features_for(target, config)?.remove(0);
    let subject = group_by_subject(entries)
        .iter()
        .position(|(s, _)| *s == entries[target_index].record.subject_id)
        .expect("target entry is in the population");
    let current_keys = subject_keys(policy, subject, features.scalar_len() as u32)?;

    let mut seen = HashSet::from([current_keys]);
    for (i, k) in revoked_keys.iter().enumerate() {
        if !seen.insert(*k) {
            return Err(EvalError::KeyReuse { index: i });
        }
    }

    let enrolled_tpl = generate_template(&features, &current_keys)?;

    let pseudo: Vec<Result<f64, EvalError>> = par::map_slice(revoked_keys, |rk| {
        let revoked_tpl = generate_template(&features, rk)?;
        let result = match_templates(
            &revoked_tpl,
            &enrolled_tpl,
            &current_keys,
            &current_keys,
            params,
        )?;
        Ok(result.overall_score)
    });
    let pseudo: Vec<f64> = pseudo.into_iter().collect::<Result<_, _>>()?;

    let baseline = protocol_scores(entries, policy, config, params)?;

    let imposter = summarize_scores(DistributionKind::Imposter, &baseline.imposter);
    let pseudo_imposter = summarize_scores(DistributionKind::PseudoImposter, &pseudo);
    let imposter_gap = (pseudo_imposter.mean - imposter.mean).abs();
    Ok(RevocabilityReport {
        genuine: summarize_scores(DistributionKind::Genuine, &baseline.genuine),
        imposter,
        pseudo_imposter,
        revoked_count: revoked_keys.len(),
        imposter_gap,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct UnlinkabilityReport {
    pub pseudo_genuine: DistributionStats,
    pub pseudo_imposter: DistributionStats,
    /// Overlap of the two distributions; near 1 means an attacker holding
    /// templates from both applications cannot tell same-finger pairs from
    /// different-finger pairs.
    pub overlap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Enrolls every subject's first impression in two applications with
/// independently derived keys, then cross-matches application B's templates
/// against application A's the way A's verifier would.
pub fn unlinkability_experiment(
    entries: &[DatasetEntry],
    seed_a: u64,
    seed_b: u64,
    config: &SectorConfig,
    params: &MatchParams,
) -> Result<UnlinkabilityReport, EvalError> {
    let groups = group_by_subject(entries);
    if groups.len() < 2 {
        return Err(EvalError::InsufficientData {
            what: "subjects",
            need: 2,
            found: groups.len(),
        });
    }
    let firsts: Vec<DatasetEntry> = groups
        .iter()
        .map(|(_, imps)| entries[imps[0]].clone())
        .collect();
    let features = features_for(&firsts, config)?;

    let mut keys_a = Vec::with_capacity(features.len());
    let mut keys_b = Vec::with_capacity(features.len());
    let mut tpl_a: Vec<ProtectedTemplate> = Vec::with_capacity(features.len());
    let mut tpl_b: Vec<ProtectedTemplate> = Vec::with_capacity(features.len());
    for (s, f) in features.iter().enumerate() {
        let side = f.scalar_len() as u32;
        let ka = crate::coprime::derive_keys(derive_seed(seed_a, s as u64), side)?;
        let kb = crate::coprime::derive_keys(derive_seed(seed_b, s as u64), side)?;
        tpl_a.push(generate_template(f, &ka)?);
        tpl_b.push(generate_template(f, &kb)?);
        keys_a.push(ka);
        keys_b.push(kb);
    }

    let mut pseudo_genuine = Vec::with_capacity(features.len());
    for s in 0..features.len() {
        let r = match_templates(&tpl_b[s], &tpl_a[s], &keys_a[s], &keys_a[s], params)?;
        pseudo_genuine.push(r.overall_score);
    }
    let mut pseudo_imposter = Vec::new();
    for i in 0..features.len() {
        for (j, tb) in tpl_b.iter().enumerate() {
            if i == j {
                continue;
            }
            let r = match_templates(tb, &tpl_a[i], &keys_a[i], &keys_a[i], params)?;
            pseudo_imposter.push(r.overall_score);
        }
    }

    let pg = summarize_scores(DistributionKind::PseudoGenuine, &pseudo_genuine);
    let pi = summarize_scores(DistributionKind::PseudoImposter, &pseudo_imposter);
    let overlap = histogram_overlap(&pg, &pi);
    let warning = (seed_a == seed_b).then(|| {
        "both applications derive keys from the same seed; their templates are \
         identical and linkage is trivial"
            .to_string()
    });
    Ok(UnlinkabilityReport {
        pseudo_genuine: pg,
        pseudo_imposter: pi,
        overlap,
        warning,
    })
}

/// Candidate values per key component. Combinations are enumerated
/// lexicographically (k1 outermost, rho innermost) and invalid ones skipped.
#[derive(Debug, Clone)]
pub struct ParameterSpace {
    pub k1: Vec<u32>,
    pub k2: Vec<u32>,
    pub k3: Vec<u32>,
    pub k4: Vec<u32>,
    pub rho: Vec<u64>,
}

impl ParameterSpace {
    /// The entire admissible range for side `t`, with caller-chosen filler
    /// seeds.
    pub fn full(t: u32, rho: Vec<u64>) -> Self {
        Self {
            k1: (1..=t).collect(),
            k2: (1..=t).collect(),
            k3: (2..=t).collect(),
            k4: (2..=t).collect(),
            rho,
        }
    }
}

/// First `count` distinct valid key sets of the space in enumeration order.
/// Counts every valid combination before giving up, so the error reports how
/// many the space can actually supply.
pub fn enumerate_keys(
    space: &ParameterSpace,
    t: u32,
    count: usize,
) -> Result<Vec<KeySet>, EvalError> {
    let mut out: Vec<KeySet> = Vec::with_capacity(count);
    let mut seen: HashSet<KeySet> = HashSet::new();
    for &k1 in &space.k1 {
        for &k2 in &space.k2 {
            for &k3 in &space.k3 {
                for &k4 in &space.k4 {
                    for &rho in &space.rho {
                        let keys = KeySet {
                            k1,
                            k2,
                            k3,
                            k4,
                            rho,
                        };
                        if validate_keys(&keys, t).is_ok() && seen.insert(keys) {
                            out.push(keys);
                            if out.len() == count {
                                return Ok(out);
                            }
                        }
                    }
                }
            }
        }
    }
    Err(EvalError::KeySpaceExhausted {
        available: out.len(),
        requested: count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairwiseDiversity {
    pub a: usize,
    pub b: usize,
    /// Score of template b presented to a verifier holding key set a.
    pub cross_score: f64,
    /// Fraction of cells on neither key's position cycle that hold different
    /// values. Near 1 when the filler seeds differ, 0 when they coincide.
    pub filler_difference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiversityReport {
    pub side: u32,
    /// Key file lines (`k1 k2 k3 k4 rho`) for each generated template.
    pub keys: Vec<String>,
    pub pairwise: Vec<PairwiseDiversity>,
    pub max_cross_score: f64,
    pub min_filler_difference: f64,
}

fn noncycle_difference(
    a: &ProtectedTemplate,
    b: &ProtectedTemplate,
    ka: &KeySet,
    kb: &KeySet,
) -> f64 {
    let t = a.side();
    let mut on_cycle = vec![false; (t * t) as usize];
    for keys in [ka, kb] {
        for (r, c) in position_cycle(keys, t) {
            on_cycle[((r - 1) * t + (c - 1)) as usize] = true;
        }
    }
    let mut total = 0u64;
    let mut differ = 0u64;
    for (i, covered) in on_cycle.iter().enumerate() {
        if !covered {
            total += 1;
            if a.cells()[i] != b.cells()[i] {
                differ += 1;
            }
        }
    }
    differ as f64 / total as f64
}

/// Builds one template per key set from the same features and cross-compares
/// every pair: how well does one issued template impersonate another, and how
/// much do their filler regions have in common.
pub fn diversity_report(
    features: &FeatureMatrix,
    keys: &[KeySet],
    params: &MatchParams,
) -> Result<DiversityReport, EvalError> {
    if keys.len() < 2 {
        return Err(EvalError::InsufficientData {
            what: "key sets",
            need: 2,
            found: keys.len(),
        });
    }
    let mut seen = HashSet::new();
    for (i, k) in keys.iter().enumerate() {
        if !seen.insert(*k) {
            return Err(EvalError::KeyReuse { index: i });
        }
    }
    let templates: Vec<Result<ProtectedTemplate, _>> =
        par::map_slice(keys, |k| generate_template(features, k));
    let templates: Vec<ProtectedTemplate> = templates.into_iter().collect::<Result<_, _>>()?;

    let mut pairwise = Vec::with_capacity(keys.len() * (keys.len() - 1) / 2);
    for i in 0..keys.len() {
        for j in (i + 1)..keys.len() {
            let r = match_templates(&templates[j], &templates[i], &keys[i], &keys[i], params)?;
            pairwise.push(PairwiseDiversity {
                a: i,
                b: j,
                cross_score: r.overall_score,
                filler_difference: noncycle_difference(
                    &templates[i],
                    &templates[j],
                    &keys[i],
                    &keys[j],
                ),
            });
        }
    }
    let max_cross_score = pairwise.iter().map(|p| p.cross_score).fold(0.0, f64::max);
    let min_filler_difference = pairwise
        .iter()
        .map(|p| p.filler_difference)
        .fold(1.0, f64::min);
    Ok(DiversityReport {
        side: templates[0].side(),
        keys: keys.iter().map(KeySet::to_line).collect(),
        pairwise,
        max_cross_score,
        min_filler_difference,
    })
}

/// Convenience wrapper: enumerate `count` keys from the space, then report.
pub fn diversity_generate(
    features: &FeatureMatrix,
    count: usize,
    space: &ParameterSpace,
    params: &MatchParams,
) -> Result<DiversityReport, EvalError> {
    let keys = enumerate_keys(space, features.scalar_len() as u32, count)?;
    diversity_report(features, &keys, params)
}
