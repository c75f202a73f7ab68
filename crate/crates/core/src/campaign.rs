//! Simulation campaigns: many independent exchange searches per (design, k),
//! grouped by circuit profile and efficiency.
//!
//! Each run is a single random-start exchange taken to a local optimum, so a
//! campaign samples the population of locally D-optimal fractions; groups
//! collect runs that share the identical count table and displayed
//! efficiency.

use crate::circuits::BasicMoveSet;
use crate::design::{full_factorial, model_matrix, Coding, FactorSpec, ModelMatrix};
use crate::error::{Error, Result};
use crate::fraction::{intersection_counts, stats_from_table, Fraction, MoveProfile};
use crate::rounding::{cents_round_f64, format_cents, format_ratio_2dp};
use crate::search::{derive_seed, exchange_run};
use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;

/// Parameters of one campaign.
#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub levels: Vec<u32>,
    pub coding: Coding,
    /// Fraction sizes to run; defaults to p+1, p+2, p+3.
    pub ks: Vec<usize>,
    /// Independent searches per k.
    pub runs: usize,
    pub seed: u64,
}

impl CampaignConfig {
    /// Default campaign for a design: k = p+1..p+3, 500 runs, seed 0,
    /// Effects coding.
    pub fn new(levels: &[u32]) -> Result<CampaignConfig> {
        let spec = FactorSpec::new(levels.to_vec())?;
        let p = spec.num_params();
        Ok(CampaignConfig {
            levels: levels.to_vec(),
            coding: Coding::Effects,
            ks: vec![p + 1, p + 2, p + 3],
            runs: 500,
            seed: 0,
        })
    }
}

/// Runs that share a count table and a displayed efficiency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub count_table: [usize; 5],
    /// Exact mean of b̄_F, identical for all members.
    pub mean: Ratio<i128>,
    /// Exact population variance of b̄_F.
    pub variance: Ratio<i128>,
    /// Efficiency rounded to hundredths (the grouping key).
    pub efficiency_cents: i64,
    /// Number of member runs.
    pub frequency: usize,
    /// Each member run's fraction, in run order.
    pub members: Vec<Vec<usize>>,
}

impl Group {
    pub fn efficiency_display(&self) -> String {
        format_cents(self.efficiency_cents as i128)
    }
}

/// All groups for one fraction size.
#[derive(Debug, Clone)]
pub struct KSection {
    pub k: usize,
    pub groups: Vec<Group>,
}

/// Full campaign output.
#[derive(Debug, Clone)]
pub struct GroupedReport {
    pub levels: Vec<u32>,
    pub coding: Coding,
    pub runs: usize,
    pub seed: u64,
    pub fingerprint: String,
    pub sections: Vec<KSection>,
}

/// Group evaluated fractions by (count table, efficiency at two decimals).
/// Groups come back ordered by ascending efficiency, then count table.
/// All inputs must share one fraction size and model.
pub fn group_fractions(items: &[(Fraction, MoveProfile, f64)]) -> Result<Vec<Group>> {
    let Some((first, _, _)) = items.first() else {
        return Ok(Vec::new());
    };
    let k = first.len();
    let fp = first.model_fingerprint();
    for (f, _, _) in items {
        if f.len() != k {
            return Err(Error::InvalidInput(format!(
                "mixed fraction sizes in one grouping: {} and {k}",
                f.len()
            )));
        }
        if f.model_fingerprint() != fp {
            return Err(Error::FingerprintMismatch {
                expected: fp.to_string(),
                actual: f.model_fingerprint().to_string(),
            });
        }
    }
    let mut groups: Vec<Group> = Vec::new();
    for (fraction, profile, efficiency) in items {
        let key_table = *profile.count_table();
        let key_eff = cents_round_f64(*efficiency);
        let slot = groups
            .iter_mut()
            .find(|g| g.count_table == key_table && g.efficiency_cents == key_eff);
        match slot {
            Some(g) => {
                g.frequency += 1;
                g.members.push(fraction.indices().to_vec());
            }
            None => groups.push(Group {
                count_table: key_table,
                mean: profile.mean(),
                variance: profile.variance(),
                efficiency_cents: key_eff,
                frequency: 1,
                members: vec![fraction.indices().to_vec()],
            }),
        }
    }
    groups.sort_by_key(|g| (g.efficiency_cents, g.count_table));
    Ok(groups)
}

/// Run the full campaign: `runs` independent single-start exchange searches
/// per k, each yielding one locally optimal fraction, grouped per k.
/// Reproducible from the seed; runs execute in parallel on private RNG
/// streams.
pub fn run_campaign(config: &CampaignConfig) -> Result<GroupedReport> {
    if config.runs == 0 {
        return Err(Error::InvalidInput("campaign needs at least 1 run".into()));
    }
    let design = full_factorial(&config.levels)?;
    let model = model_matrix(&design, config.coding);
    let p = model.num_params();
    let k_total = model.num_points();
    if config.ks.is_empty() {
        return Err(Error::InvalidInput("no fraction sizes requested".into()));
    }
    for &k in &config.ks {
        if k < p || k > k_total {
            return Err(Error::InvalidSearch(format!(
                "k = {k} outside [p = {p}, K = {k_total}]"
            )));
        }
    }
    let moves = BasicMoveSet::enumerate(&model);

    let mut sections = Vec::with_capacity(config.ks.len());
    for &k in &config.ks {
        let section_seed = derive_seed(config.seed, k as u64);
        let items: Result<Vec<(Fraction, MoveProfile, f64)>> = (0..config.runs)
            .into_par_iter()
            .map(|run| evaluate_run(&model, &moves, k, derive_seed(section_seed, run as u64)))
            .collect();
        let groups = group_fractions(&items?)?;
        sections.push(KSection { k, groups });
    }
    Ok(GroupedReport {
        levels: config.levels.clone(),
        coding: config.coding,
        runs: config.runs,
        seed: config.seed,
        fingerprint: model.fingerprint().to_string(),
        sections,
    })
}

fn evaluate_run(
    model: &ModelMatrix,
    moves: &BasicMoveSet,
    k: usize,
    run_seed: u64,
) -> Result<(Fraction, MoveProfile, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    let run = exchange_run(model, k, &mut rng);
    let fraction = Fraction::new(model, &run.indices)?;
    let profile = intersection_counts(&fraction, moves)?;
    let value = crate::search::d_efficiency(&fraction, model)?;
    Ok((fraction, profile, value.efficiency()))
}

/// Per-k verdicts: variance never increases as efficiency strictly
/// increases, at displayed precision. Equal-efficiency groups are
/// unconstrained among themselves.
pub fn variance_efficiency_check(report: &GroupedReport) -> Vec<(usize, bool)> {
    report
        .sections
        .iter()
        .map(|s| {
            let mut ok = true;
            for i in 0..s.groups.len() {
                for j in i + 1..s.groups.len() {
                    let (a, b) = (&s.groups[i], &s.groups[j]);
                    if a.efficiency_cents < b.efficiency_cents
                        && var_cents(a) < var_cents(b)
                    {
                        ok = false;
                    }
                }
            }
            (s.k, ok)
        })
        .collect()
}

fn var_cents(g: &Group) -> i128 {
    crate::rounding::cents_round_half_even(g.variance)
}

impl GroupedReport {
    /// CSV with the benchmark tables' columns: one row per group.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,c0,c1,c2,c3,c4,mean,variance,efficiency,n")?;
        for s in &self.sections {
            for g in &s.groups {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{}",
                    s.k,
                    g.count_table[0],
                    g.count_table[1],
                    g.count_table[2],
                    g.count_table[3],
                    g.count_table[4],
                    format_ratio_2dp(g.mean),
                    format_ratio_2dp(g.variance),
                    g.efficiency_display(),
                    g.frequency
                )?;
            }
        }
        Ok(())
    }

    /// Full JSON structure, including every member fraction of every group.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "levels": self.levels,
            "coding": self.coding.name(),
            "runs": self.runs,
            "seed": self.seed,
            "fingerprint": self.fingerprint,
            "sections": self.sections.iter().map(|s| {
                serde_json::json!({
                    "k": s.k,
                    "groups": s.groups.iter().map(|g| {
                        serde_json::json!({
                            "table": g.count_table,
                            "mean": format_ratio_2dp(g.mean),
                            "variance": format_ratio_2dp(g.variance),
                            "efficiency": g.efficiency_display(),
                            "n": g.frequency,
                            "members": g.members,
                        })
                    }).collect::<Vec<_>>(),
                })
            }).collect::<Vec<_>>(),
        })
    }
}

/// Check the internal consistency of a report: frequencies sum to the run
/// count and each group's stored mean/variance match its count table.
pub fn validate_report(report: &GroupedReport) -> Result<()> {
    for s in &report.sections {
        let total: usize = s.groups.iter().map(|g| g.frequency).sum();
        if total != report.runs {
            return Err(Error::InvalidInput(format!(
                "k={}: group frequencies sum to {total}, expected {}",
                s.k, report.runs
            )));
        }
        for g in &s.groups {
            let (m, v) = stats_from_table(&g.count_table);
            if m != g.mean || v != g.variance {
                return Err(Error::InvalidInput(format!(
                    "k={}: stored stats disagree with count table {:?}",
                    s.k, g.count_table
                )));
            }
            if g.members.len() != g.frequency {
                return Err(Error::InvalidInput(format!(
                    "k={}: member list length disagrees with frequency",
                    s.k
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::BasicMoveSet;
    use crate::design::{full_factorial, model_matrix};

    #[test]
    fn default_config_uses_p_plus_one_to_three() {
        let c = CampaignConfig::new(&[2, 2, 2, 2]).unwrap();
        assert_eq!(c.ks, vec![6, 7, 8]);
        assert_eq!(c.runs, 500);
        let c = CampaignConfig::new(&[3, 3, 3]).unwrap();
        assert_eq!(c.ks, vec![8, 9, 10]);
    }

    #[test]
    fn single_run_campaign() {
        let config = CampaignConfig {
            levels: vec![2, 2, 2],
            coding: Coding::Effects,
            ks: vec![5],
            runs: 1,
            seed: 11,
        };
        let report = run_campaign(&config).unwrap();
        assert_eq!(report.sections.len(), 1);
        assert_eq!(report.sections[0].groups.len(), 1);
        assert_eq!(report.sections[0].groups[0].frequency, 1);
        validate_report(&report).unwrap();
    }

    #[test]
    fn campaign_is_reproducible() {
        let config = CampaignConfig {
            levels: vec![2, 2, 2, 2],
            coding: Coding::Effects,
            ks: vec![6, 7],
            runs: 40,
            seed: 5,
        };
        let a = run_campaign(&config).unwrap();
        let b = run_campaign(&config).unwrap();
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        a.write_csv(&mut csv_a).unwrap();
        b.write_csv(&mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn grouping_merges_identical_profiles() {
        let m = model_matrix(&full_factorial(&[2, 2, 2, 2]).unwrap(), Coding::Effects);
        let moves = BasicMoveSet::enumerate(&m);
        let f1 = Fraction::new(&m, &[0, 1, 2, 3, 4, 5]).unwrap();
        let f2 = Fraction::new(&m, &[0, 1, 2, 3, 4, 5]).unwrap();
        let p1 = intersection_counts(&f1, &moves).unwrap();
        let p2 = intersection_counts(&f2, &moves).unwrap();
        let groups = group_fractions(&[(f1, p1, 80.0), (f2, p2, 80.0)]).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].frequency, 2);
        assert_eq!(groups[0].members.len(), 2);
    }

    #[test]
    fn grouping_rejects_mixed_k_and_accepts_empty() {
        let m = model_matrix(&full_factorial(&[2, 2, 2, 2]).unwrap(), Coding::Effects);
        let moves = BasicMoveSet::enumerate(&m);
        let f1 = Fraction::new(&m, &[0, 1, 2, 3, 4, 5]).unwrap();
        let f2 = Fraction::new(&m, &[0, 1, 2, 3, 4, 5, 6]).unwrap();
        let p1 = intersection_counts(&f1, &moves).unwrap();
        let p2 = intersection_counts(&f2, &moves).unwrap();
        assert!(group_fractions(&[(f1, p1, 80.0), (f2, p2, 80.0)]).is_err());
        assert!(group_fractions(&[]).unwrap().is_empty());
    }

    #[test]
    fn group_ordering_and_variance_check() {
        // synthetic report: variance decreasing as efficiency increases
        let good = GroupedReport {
            levels: vec![2, 2],
            coding: Coding::Effects,
            runs: 10,
            seed: 0,
            fingerprint: "x".into(),
            sections: vec![KSection {
                k: 4,
                groups: vec![
                    synthetic_group([48, 108, 81, 6, 0], 5259, 5),
                    synthetic_group([40, 122, 77, 4, 0], 5572, 3),
                    synthetic_group([39, 120, 84, 0, 0], 5667, 2),
                ],
            }],
        };
        assert_eq!(variance_efficiency_check(&good), vec![(4, true)]);

        let bad = GroupedReport {
            sections: vec![KSection {
                k: 4,
                groups: vec![
                    synthetic_group([39, 120, 84, 0, 0], 5259, 5),
                    synthetic_group([48, 108, 81, 6, 0], 5667, 5),
                ],
            }],
            ..good
        };
        assert_eq!(variance_efficiency_check(&bad), vec![(4, false)]);
    }

    fn synthetic_group(table: [usize; 5], eff_cents: i64, n: usize) -> Group {
        let (mean, variance) = stats_from_table(&table);
        Group {
            count_table: table,
            mean,
            variance,
            efficiency_cents: eff_cents,
            frequency: n,
            members: vec![vec![0]; n],
        }
    }

    #[test]
    fn csv_shape() {
        let report = GroupedReport {
            levels: vec![2, 2],
            coding: Coding::Effects,
            runs: 5,
            seed: 0,
            fingerprint: "x".into(),
            sections: vec![KSection {
                k: 4,
                groups: vec![synthetic_group([0, 0, 1, 0, 0], 10000, 5)],
            }],
        };
        let mut out = Vec::new();
        report.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "k,c0,c1,c2,c3,c4,mean,variance,efficiency,n\n4,0,0,1,0,0,2.00,0.00,100.00,5\n"
        );
    }

    #[test]
    fn campaign_rejects_bad_inputs() {
        let mut config = CampaignConfig::new(&[2, 2, 2]).unwrap();
        config.runs = 0;
        assert!(run_campaign(&config).is_err());
        let mut config = CampaignConfig::new(&[2, 2, 2]).unwrap();
        config.ks = vec![2]; // below p = 4
        assert!(run_campaign(&config).is_err());
        config.ks = vec![];
        assert!(run_campaign(&config).is_err());
    }
}
