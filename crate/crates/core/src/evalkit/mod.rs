//! Verification experiments over datasets: protocol score collection,
//! EER/ROC summaries, and timing.
//!
//! The comparison protocol follows the usual competition convention: genuine
//! scores from every impression pair of each subject, imposter scores from
//! the first impressions of every subject pair.

mod security;

pub use security::{
    diversity_generate, diversity_report, enumerate_keys, histogram_overlap,
    revocability_experiment, summarize_scores, unlinkability_experiment, DistributionKind,
    DistributionStats, DiversityReport, PairwiseDiversity, ParameterSpace, RevocabilityReport,
    UnlinkabilityReport, HISTOGRAM_BINS,
};

use serde::Serialize;
use thiserror::Error;

use crate::coprime::{derive_keys, generate_template, KeyError, KeySet, TemplateError};
use crate::fpdata::DatasetEntry;
use crate::matcher::{match_templates, MatchError, MatchParams};
use crate::par;
use crate::ridgefeat::{build_feature_matrix, FeatureError, FeatureMatrix};
use crate::rng::derive_seed;
use crate::sectoring::SectorConfig;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least {need} {what}, found {found}")]
    InsufficientData {
        what: &'static str,
        need: usize,
        found: usize,
    },
    #[error("record {subject}/{impression} has no skeleton image")]
    MissingSkeleton { subject: String, impression: String },
    #[error("key set {index} duplicates another key in the experiment")]
    KeyReuse { index: usize },
    #[error("target index {index} outside dataset of {len} records")]
    TargetOutOfRange { index: usize, len: usize },
    #[error("parameter space holds {available} valid key sets, {requested} requested")]
    KeySpaceExhausted { available: usize, requested: usize },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Key(#[from] KeyError),
}

/// How keys are assigned across a dataset.
#[derive(Debug, Clone)]
pub enum KeyPolicy {
    /// One shared key set for everyone (templates are comparable across
    /// subjects; the classic stolen-key worst case).
    SameKey(KeySet),
    /// Every subject gets its own key set derived from the seed. A claimed
    /// identity decodes the query with the claimant's keys, so cross-subject
    /// comparisons decode garbage.
    PerUser { seed: u64 },
}

/// Genuine and imposter score lists from one protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub imposter: Vec<f64>,
}

struct Comparison {
    query: usize,
    enrolled: usize,
    /// Subject index whose identity is claimed; keys come from this subject
    /// under the per-user policy.
    claimed_subject: usize,
    genuine: bool,
}

fn group_by_subject(entries: &[DatasetEntry]) -> Vec<(String, Vec<usize>)> {
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        match groups.iter_mut().find(|(s, _)| *s == e.record.subject_id) {
            Some((_, v)) => v.push(i),
            None => groups.push((e.record.subject_id.clone(), vec![i])),
        }
    }
    groups
}

fn features_for(
    entries: &[DatasetEntry],
    config: &SectorConfig,
) -> Result<Vec<FeatureMatrix>, EvalError> {
    for e in entries {
        if e.skeleton.is_none() {
            return Err(EvalError::MissingSkeleton {
                subject: e.record.subject_id.clone(),
                impression: e.record.impression_id.clone(),
            });
        }
    }
    let rows: Vec<Result<FeatureMatrix, FeatureError>> = par::map_slice(entries, |e| {
        build_feature_matrix(&e.record, e.skeleton.as_ref().unwrap(), config)
    });
    Ok(rows.into_iter().collect::<Result<Vec<_>, _>>()?)
}

fn subject_keys(policy: &KeyPolicy, subject: usize, side: u32) -> Result<KeySet, KeyError> {
    match policy {
        KeyPolicy::SameKey(k) => Ok(*k),
        KeyPolicy::PerUser { seed } => derive_keys(derive_seed(*seed, subject as u64), side),
    }
}

/// Runs the comparison protocol and collects raw scores.
///
/// Every comparison regenerates both protected templates from the extracted
/// features and decodes them with the claimed subject's keys, exactly as a
/// verifier would; templates are never cached between comparisons.
pub fn protocol_scores(
    entries: &[DatasetEntry],
    policy: &KeyPolicy,
    config: &SectorConfig,
    params: &MatchParams,
) -> Result<ScoreSet, EvalError> {
    let groups = group_by_subject(entries);
    if groups.len() < 2 {
        return Err(EvalError::InsufficientData {
            what: "subjects",
            need: 2,
            found: groups.len(),
        });
    }
    for (_, impressions) in &groups {
        if impressions.len() < 2 {
            return Err(EvalError::InsufficientData {
                what: "impressions per subject",
                need: 2,
                found: impressions.len(),
            });
        }
    }
    let features = features_for(entries, config)?;

    let mut comparisons: Vec<Comparison> = Vec::new();
    for (s, (_, imps)) in groups.iter().enumerate() {
        for a in 0..imps.len() {
            for b in (a + 1)..imps.len() {
                comparisons.push(Comparison {
                    query: imps[b],
                    enrolled: imps[a],
                    claimed_subject: s,
                    genuine: true,
                });
            }
        }
    }
    for i in 0..groups.len() {
        for j in (i + 1)..groups.len() {
            comparisons.push(Comparison {
                query: groups[j].1[0],
                enrolled: groups[i].1[0],
                claimed_subject: i,
                genuine: false,
            });
        }
    }

    let scored: Vec<Result<(bool, f64), EvalError>> = par::map_slice(&comparisons, |cmp| {
        let fq = &features[cmp.query];
        let fe = &features[cmp.enrolled];

        // the template owner generated each template with their own keys
        let owner_of = |idx: usize| {
            groups
                .iter()
                .position(|(_, imps)| imps.contains(&idx))
                .expect("entry belongs to a group")
        };
        let qk_gen = subject_keys(policy, owner_of(cmp.query), fq.scalar_len() as u32)?;
        let ek_gen = subject_keys(policy, owner_of(cmp.enrolled), fe.scalar_len() as u32)?;
        let query_tpl = generate_template(fq, &qk_gen)?;
        let enrolled_tpl = generate_template(fe, &ek_gen)?;

        // the verifier decodes both with the claimed subject's keys
        let qk = subject_keys(policy, cmp.claimed_subject, query_tpl.side())?;
        let ek = subject_keys(policy, cmp.claimed_subject, enrolled_tpl.side())?;
        let result = match_templates(&query_tpl, &enrolled_tpl, &qk, &ek, params)?;
        Ok((cmp.genuine, result.overall_score))
    });

    let mut scores = ScoreSet {
        genuine: Vec::new(),
        imposter: Vec::new(),
    };
    for r in scored {
        let (genuine, score) = r?;
        if genuine {
            scores.genuine.push(score);
        } else {
            scores.imposter.push(score);
        }
    }
    Ok(scores)
}

/// Equal error rate in percent and the threshold it occurs at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EerEstimate {
    pub eer_percent: f64,
    pub threshold: f64,
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    v
}

/// Percent of imposter scores strictly above `t`.
fn far_percent(imposter_sorted: &[f64], t: f64) -> f64 {
    let above = imposter_sorted.partition_point(|&s| s <= t);
    100.0 * (imposter_sorted.len() - above) as f64 / imposter_sorted.len() as f64
}

/// Percent of genuine scores strictly below `t`.
fn frr_percent(genuine_sorted: &[f64], t: f64) -> f64 {
    let below = genuine_sorted.partition_point(|&s| s < t);
    100.0 * below as f64 / genuine_sorted.len() as f64
}

fn threshold_candidates(genuine: &[f64], imposter: &[f64]) -> Vec<f64> {
    let mut c: Vec<f64> = genuine.iter().chain(imposter).copied().collect();
    c.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    c.dedup();
    let lo = c.first().copied().unwrap_or(0.0) - 1.0;
    let hi = c.last().copied().unwrap_or(0.0) + 1.0;
    let mut out = Vec::with_capacity(c.len() + 2);
    out.push(lo);
    out.extend(c);
    out.push(hi);
    out
}

/// Finds where FAR(t) = FRR(t). FAR counts imposters strictly above t, FRR
/// genuines strictly below; both are step functions of t, FAR falling and FRR
/// rising, so their difference crosses zero exactly once over the candidate
/// thresholds. An exact zero is returned as-is; otherwise the crossing is
/// interpolated linearly between the bracketing candidates.
pub fn compute_eer(genuine: &[f64], imposter: &[f64]) -> Result<EerEstimate, EvalError> {
    if genuine.is_empty() {
        return Err(EvalError::InsufficientData {
            what: "genuine scores",
            need: 1,
            found: 0,
        });
    }
    if imposter.is_empty() {
        return Err(EvalError::InsufficientData {
            what: "imposter scores",
            need: 1,
            found: 0,
        });
    }
    let g = sorted(genuine.to_vec());
    let i = sorted(imposter.to_vec());
    let cands = threshold_candidates(&g, &i);

    let mut prev: Option<(f64, f64, f64)> = None; // (t, far, diff)
    for &t in &cands {
        let far = far_percent(&i, t);
        let diff = far - frr_percent(&g, t);
        if diff == 0.0 {
            return Ok(EerEstimate {
                eer_percent: far,
                threshold: t,
            });
        }
        if diff < 0.0 {
            let (pt, pfar, pdiff) = prev.expect("difference starts positive");
            let alpha = pdiff / (pdiff - diff);
            return Ok(EerEstimate {
                eer_percent: pfar + alpha * (far - pfar),
                threshold: pt + alpha * (t - pt),
            });
        }
        prev = Some((t, far, diff));
    }
    unreachable!("difference ends at -100");
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub far_percent: f64,
    pub gar_percent: f64,
}

/// Operating points swept over the observed score range, at most
/// `max_points`, endpoints always included. GAR = 100 - FRR.
pub fn roc_points(genuine: &[f64], imposter: &[f64], max_points: usize) -> Vec<RocPoint> {
    let g = sorted(genuine.to_vec());
    let i = sorted(imposter.to_vec());
    let cands = threshold_candidates(&g, &i);
    let take: Vec<f64> = if cands.len() <= max_points.max(2) {
        cands
    } else {
        let last = cands.len() - 1;
        (0..max_points)
            .map(|k| cands[k * last / (max_points - 1)])
            .collect()
    };
    take.into_iter()
        .map(|t| RocPoint {
            threshold: t,
            far_percent: far_percent(&i, t),
            gar_percent: 100.0 - frr_percent(&g, t),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingStats {
    pub generation_mean_s: f64,
    pub generation_std_s: f64,
    pub matching_mean_s: f64,
    pub matching_std_s: f64,
    pub runs: usize,
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Wall-clock cost per template generation and per comparison, averaged over
/// the dataset, repeated `runs` times for spread.
pub fn timing_benchmark(
    entries: &[DatasetEntry],
    config: &SectorConfig,
    params: &MatchParams,
    runs: usize,
) -> Result<TimingStats, EvalError> {
    if entries.is_empty() {
        return Err(EvalError::InsufficientData {
            what: "records",
            need: 1,
            found: 0,
        });
    }
    let runs = runs.max(1);
    let features = features_for(entries, config)?;
    let keys: Vec<KeySet> = features
        .iter()
        .map(|f| {
            let side = f.scalar_len() as u32;
            derive_keys(derive_seed(0x7171, u64::from(side)), side)
        })
        .collect::<Result<_, _>>()?;

    let mut gen_samples = Vec::with_capacity(runs);
    let mut match_samples = Vec::with_capacity(runs);
    for _ in 0..runs {
        let t0 = std::time::Instant::now();
        let templates: Vec<_> = features
            .iter()
            .zip(&keys)
            .map(|(f, k)| generate_template(f, k))
            .collect::<Result<_, _>>()?;
        gen_samples.push(t0.elapsed().as_secs_f64() / features.len() as f64);

        let pairs: Vec<(usize, usize)> = (1..templates.len()).map(|i| (i - 1, i)).collect();
        if pairs.is_empty() {
            match_samples.push(0.0);
            continue;
        }
        let t1 = std::time::Instant::now();
        for &(a, b) in &pairs {
            match_templates(&templates[b], &templates[a], &keys[b], &keys[a], params)?;
        }
        match_samples.push(t1.elapsed().as_secs_f64() / pairs.len() as f64);
    }

    let (gm, gs) = mean_std(&gen_samples);
    let (mm, ms) = mean_std(&match_samples);
    Ok(TimingStats {
        generation_mean_s: gm,
        generation_std_s: gs,
        matching_mean_s: mm,
        matching_std_s: ms,
        runs,
    })
}

/// Everything one verification evaluation produces.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub genuine_count: usize,
    pub imposter_count: usize,
    pub eer_percent: f64,
    pub eer_threshold: f64,
    pub roc: Vec<RocPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<TimingStats>,
}

pub fn build_report(
    scores: &ScoreSet,
    roc_resolution: usize,
    timings: Option<TimingStats>,
) -> Result<EvalReport, EvalError> {
    let eer = compute_eer(&scores.genuine, &scores.imposter)?;
    Ok(EvalReport {
        genuine_count: scores.genuine.len(),
        imposter_count: scores.imposter.len(),
        eer_percent: eer.eer_percent,
        eer_threshold: eer.threshold,
        roc: roc_points(&scores.genuine, &scores.imposter, roc_resolution),
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate_population, SceneParams};
    use approx::assert_abs_diff_eq;

    #[test]
    fn eer_zero_for_separated_scores() {
        let est = compute_eer(&[0.9, 0.8, 0.95], &[0.1, 0.2, 0.05]).unwrap();
        assert_abs_diff_eq!(est.eer_percent, 0.0);
        // first exact zero of FAR - FRR sits at the top imposter score
        assert!(est.threshold >= 0.2 && est.threshold < 0.8);
    }

    #[test]
    fn eer_interpolates_between_observed_scores() {
        let est = compute_eer(&[0.6, 0.4], &[0.5, 0.3]).unwrap();
        assert_abs_diff_eq!(est.eer_percent, 25.0, epsilon = 1e-9);
        assert!(
            est.threshold > 0.4 && est.threshold <= 0.5,
            "threshold {}",
            est.threshold
        );
    }

    #[test]
    fn eer_of_identical_distributions_tends_to_half() {
        let scores: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let est = compute_eer(&scores, &scores).unwrap();
        assert!(
            (est.eer_percent - 50.0).abs() <= 0.1,
            "eer {}",
            est.eer_percent
        );
    }

    #[test]
    fn eer_rejects_empty_lists() {
        assert!(compute_eer(&[], &[0.1]).is_err());
        assert!(compute_eer(&[0.9], &[]).is_err());
    }

    #[test]
    fn eer_against_exhaustive_oracle() {
        // brute-force oracle: evaluate FAR/FRR at every candidate written
        // independently of the production code path
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let ng = rng.gen_range(1..40);
            let ni = rng.gen_range(1..40);
            let quantize = rng.gen_bool(0.5);
            let mut draw = |n: usize| -> Vec<f64> {
                (0..n)
                    .map(|_| {
                        let v: f64 = rng.gen_range(0.0..1.0);
                        if quantize {
                            (v * 8.0).round() / 8.0
                        } else {
                            v
                        }
                    })
                    .collect()
            };
            let g = draw(ng);
            let i = draw(ni);
            let est = compute_eer(&g, &i).unwrap();
            let want = oracle_eer(&g, &i);
            assert_abs_diff_eq!(est.eer_percent, want, epsilon = 1e-9);
        }
    }

    fn oracle_eer(genuine: &[f64], imposter: &[f64]) -> f64 {
        let far = |t: f64| {
            100.0 * imposter.iter().filter(|&&s| s > t).count() as f64 / imposter.len() as f64
        };
        let frr = |t: f64| {
            100.0 * genuine.iter().filter(|&&s| s < t).count() as f64 / genuine.len() as f64
        };
        let mut cands: Vec<f64> = genuine.iter().chain(imposter).copied().collect();
        cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cands.dedup();
        let mut all = vec![cands[0] - 1.0];
        all.extend(cands.iter().copied());
        all.push(all[all.len() - 1] + 1.0);
        for w in 0..all.len() {
            let d = far(all[w]) - frr(all[w]);
            if d == 0.0 {
                return far(all[w]);
            }
            if d < 0.0 {
                let (t0, t1) = (all[w - 1], all[w]);
                let d0 = far(t0) - frr(t0);
                let a = d0 / (d0 - d);
                return far(t0) + a * (far(t1) - far(t0));
            }
        }
        unreachable!()
    }

    #[test]
    fn roc_covers_both_corners() {
        let pts = roc_points(&[0.7, 0.8], &[0.2, 0.3], 100);
        let first = pts.first().unwrap();
        let last = pts.last().unwrap();
        assert_abs_diff_eq!(first.far_percent, 100.0);
        assert_abs_diff_eq!(first.gar_percent, 100.0);
        assert_abs_diff_eq!(last.far_percent, 0.0);
        assert_abs_diff_eq!(last.gar_percent, 0.0);
        // FAR never increases along the sweep
        for w in pts.windows(2) {
            assert!(w[1].far_percent <= w[0].far_percent);
        }
    }

    #[test]
    fn roc_downsamples_to_requested_resolution() {
        let g: Vec<f64> = (0..500).map(|i| 0.5 + i as f64 / 1000.0).collect();
        let i: Vec<f64> = (0..500).map(|i| i as f64 / 1000.0).collect();
        let pts = roc_points(&g, &i, 32);
        assert!(pts.len() <= 32);
        assert_abs_diff_eq!(pts.first().unwrap().far_percent, 100.0);
        assert_abs_diff_eq!(pts.last().unwrap().far_percent, 0.0);
    }

    fn small_population() -> Vec<DatasetEntry> {
        generate_population(3, 3, 0.8, 4242, &SceneParams::default()).unwrap()
    }

    #[test]
    fn protocol_counts_follow_the_combinatorics() {
        let entries = small_population();
        let cfg = SectorConfig::default();
        let params = MatchParams::default();
        let keys = derive_keys(5, (8 * 2 * 8) as u32).unwrap();
        let scores = protocol_scores(&entries, &KeyPolicy::SameKey(keys), &cfg, &params).unwrap();
        // 3 subjects x C(3,2) genuine, C(3,2) imposter
        assert_eq!(scores.genuine.len(), 9);
        assert_eq!(scores.imposter.len(), 3);
        for s in scores.genuine.iter().chain(&scores.imposter) {
            assert!((0.0..=1.0).contains(s), "score {s} out of range");
        }
    }

    #[test]
    fn genuine_scores_exceed_imposter_scores_on_average() {
        let entries = small_population();
        let cfg = SectorConfig::default();
        let params = MatchParams::default();
        let keys = derive_keys(5, (8 * 2 * 8) as u32).unwrap();
        let scores = protocol_scores(&entries, &KeyPolicy::SameKey(keys), &cfg, &params).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(
            mean(&scores.genuine) > mean(&scores.imposter) + 0.2,
            "genuine {} vs imposter {}",
            mean(&scores.genuine),
            mean(&scores.imposter)
        );
    }

    #[test]
    fn per_user_keys_crush_imposter_scores() {
        let entries = small_population();
        let cfg = SectorConfig::default();
        let params = MatchParams::default();
        let scores =
            protocol_scores(&entries, &KeyPolicy::PerUser { seed: 17 }, &cfg, &params).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        // wrong-key decoding leaves almost nothing for an imposter
        assert!(
            mean(&scores.imposter) < 0.05,
            "imposter mean {}",
            mean(&scores.imposter)
        );
        assert!(
            mean(&scores.genuine) > 0.5,
            "genuine mean {}",
            mean(&scores.genuine)
        );
    }

    #[test]
    fn protocol_requires_enough_data() {
        let entries = small_population();
        let cfg = SectorConfig::default();
        let params = MatchParams::default();
        let one_subject: Vec<DatasetEntry> = entries
            .iter()
            .filter(|e| e.record.subject_id == "s000")
            .cloned()
            .collect();
        assert!(matches!(
            protocol_scores(&one_subject, &KeyPolicy::PerUser { seed: 1 }, &cfg, &params),
            Err(EvalError::InsufficientData {
                what: "subjects",
                ..
            })
        ));
        let firsts: Vec<DatasetEntry> = entries
            .iter()
            .filter(|e| e.record.impression_id == "i00")
            .cloned()
            .collect();
        assert!(matches!(
            protocol_scores(&firsts, &KeyPolicy::PerUser { seed: 1 }, &cfg, &params),
            Err(EvalError::InsufficientData {
                what: "impressions per subject",
                ..
            })
        ));
    }

    #[test]
    fn missing_skeleton_is_reported() {
        let mut entries = small_population();
        entries[1].skeleton = None;
        let cfg = SectorConfig::default();
        assert!(matches!(
            protocol_scores(
                &entries,
                &KeyPolicy::PerUser { seed: 1 },
                &cfg,
                &MatchParams::default()
            ),
            Err(EvalError::MissingSkeleton { .. })
        ));
    }

    #[test]
    fn timing_benchmark_reports_positive_means() {
        let entries = small_population();
        let stats = timing_benchmark(
            &entries,
            &SectorConfig::default(),
            &MatchParams::default(),
            2,
        )
        .unwrap();
        assert!(stats.generation_mean_s > 0.0);
        assert!(stats.matching_mean_s > 0.0);
        assert_eq!(stats.runs, 2);
        assert!(
            timing_benchmark(&[], &SectorConfig::default(), &MatchParams::default(), 2).is_err()
        );
    }

    #[test]
    fn report_serializes_without_timings_field_when_absent() {
        let scores = ScoreSet {
            genuine: vec![0.8, 0.9],
            imposter: vec![0.1, 0.2],
        };
        let report = build_report(&scores, 16, None).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        assert!(!json.contains("timings"));
        assert!(json.contains("eer_percent"));
        let with = build_report(
            &scores,
            16,
            Some(TimingStats {
                generation_mean_s: 0.1,
                generation_std_s: 0.0,
                matching_mean_s: 0.2,
                matching_std_s: 0.0,
                runs: 1,
            }),
        )
        .unwrap();
        assert!(serde_json::to_string(&with).unwrap().contains("timings"));
    }
}
