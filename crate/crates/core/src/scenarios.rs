//! The four built-in benchmark scenarios and their expected grouped rows,
//! plus the comparison logic behind `reproduce`.
//!
//! Expected values are stored at display precision (hundredths), exactly as
//! printed; the frequency column is informational only — it depends on the
//! search tool's internal stochastic behavior and is not compared.

use crate::campaign::{run_campaign, variance_efficiency_check, CampaignConfig, GroupedReport};
use crate::design::Coding;
use crate::error::{Error, Result};
use crate::rounding::{cents_round_half_even, format_cents};

/// One expected group row: count table plus displayed mean, variance and
/// efficiency (all in hundredths).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpectedRow {
    pub k: usize,
    pub count_table: [usize; 5],
    pub mean_cents: i128,
    pub variance_cents: i128,
    pub efficiency_cents: i64,
}

/// A benchmark scenario: a design and the rows its campaign must realize.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub table_id: u8,
    pub levels: &'static [u32],
    pub expected: &'static [ExpectedRow],
}

const fn row(
    k: usize,
    count_table: [usize; 5],
    mean_cents: i128,
    variance_cents: i128,
    efficiency_cents: i64,
) -> ExpectedRow {
    ExpectedRow {
        k,
        count_table,
        mean_cents,
        variance_cents,
        efficiency_cents,
    }
}

static TABLE_1: &[ExpectedRow] = &[
    row(6, [9, 39, 45, 7, 0], 150, 57, 9198),
    row(7, [6, 22, 66, 3, 3], 175, 55, 9393),
    row(8, [3, 18, 58, 18, 3], 200, 60, 9441),
    row(8, [6, 0, 88, 0, 6], 200, 48, 10000),
];

static TABLE_2: &[ExpectedRow] = &[
    row(7, [249, 321, 141, 9, 0], 88, 58, 8387),
    row(7, [238, 342, 132, 8, 0], 88, 54, 8818),
    row(7, [230, 353, 135, 1, 1], 88, 51, 9071),
    row(8, [194, 348, 162, 16, 0], 100, 58, 9086),
    row(8, [191, 344, 182, 0, 3], 100, 56, 9532),
    row(8, [186, 352, 180, 0, 2], 100, 53, 10000),
    row(9, [157, 335, 212, 13, 3], 112, 61, 9510),
    row(9, [155, 339, 209, 15, 2], 112, 60, 9758),
];

static TABLE_3: &[ExpectedRow] = &[
    row(8, [48, 108, 81, 6, 0], 119, 60, 5259),
    row(8, [40, 122, 77, 4, 0], 119, 51, 5572),
    row(8, [39, 120, 84, 0, 0], 119, 47, 5667),
    row(9, [29, 112, 94, 8, 0], 133, 53, 5795),
    row(9, [27, 108, 108, 0, 0], 133, 44, 6245),
    row(10, [21, 96, 114, 12, 0], 148, 52, 6102),
];

static TABLE_4: &[ExpectedRow] = &[
    row(8, [20, 80, 70, 4, 0], 133, 50, 5171),
    row(8, [21, 76, 76, 0, 1], 133, 50, 5171),
    row(9, [14, 68, 84, 7, 1], 150, 53, 5280),
    row(9, [14, 69, 81, 10, 0], 150, 53, 5280),
    row(10, [8, 60, 88, 18, 0], 167, 52, 5425),
    row(10, [9, 56, 94, 14, 1], 167, 52, 5425),
    row(10, [11, 48, 106, 6, 3], 167, 52, 5425),
];

/// Look up a benchmark scenario by its table number (1–4).
pub fn scenario(table_id: u8) -> Result<Scenario> {
    let (levels, expected): (&'static [u32], _) = match table_id {
        1 => (&[2, 2, 2, 2], TABLE_1),
        2 => (&[2, 2, 2, 2, 2], TABLE_2),
        3 => (&[3, 3, 3], TABLE_3),
        4 => (&[2, 3, 4], TABLE_4),
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown table {other}; expected 1, 2, 3 or 4"
            )))
        }
    };
    Ok(Scenario {
        table_id,
        levels,
        expected,
    })
}

pub fn all_scenarios() -> Vec<Scenario> {
    (1..=4).map(|t| scenario(t).expect("static tables")).collect()
}

/// One expected row's fate in a generated report.
#[derive(Debug, Clone)]
pub struct RowComparison {
    pub expected: ExpectedRow,
    /// A group with the same k, count table and displayed efficiency exists
    /// (its mean/variance then agree automatically, but are re-checked).
    pub matched: bool,
    /// Frequency of the matching group, if any.
    pub observed_n: Option<usize>,
}

/// Outcome of comparing a campaign report against a scenario's rows.
#[derive(Debug, Clone)]
pub struct ScenarioComparison {
    pub table_id: u8,
    pub rows: Vec<RowComparison>,
    /// Observed groups not matching any expected row: (k, count table,
    /// efficiency in cents, frequency).
    pub extra_groups: Vec<(usize, [usize; 5], i64, usize)>,
    pub variance_checks: Vec<(usize, bool)>,
    pub all_rows_matched: bool,
    pub all_variance_checks_pass: bool,
}

impl ScenarioComparison {
    /// Human-readable per-row listing, one line per expected row plus a line
    /// per unexpected group.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for rc in &self.rows {
            let e = &rc.expected;
            let status = if rc.matched { "ok" } else { "MISS" };
            let n = rc
                .observed_n
                .map(|n| n.to_string())
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{status} k={} table=({},{},{},{},{}) m={} var={} E={} n={}\n",
                e.k,
                e.count_table[0],
                e.count_table[1],
                e.count_table[2],
                e.count_table[3],
                e.count_table[4],
                format_cents(e.mean_cents),
                format_cents(e.variance_cents),
                format_cents(e.efficiency_cents as i128),
                n
            ));
        }
        for (k, table, eff, n) in &self.extra_groups {
            out.push_str(&format!(
                "extra k={k} table=({},{},{},{},{}) E={} n={n}\n",
                table[0],
                table[1],
                table[2],
                table[3],
                table[4],
                format_cents(*eff as i128)
            ));
        }
        for (k, ok) in &self.variance_checks {
            out.push_str(&format!(
                "variance-vs-efficiency k={k}: {}\n",
                if *ok { "non-increasing" } else { "VIOLATED" }
            ));
        }
        out
    }
}

/// Compare a generated report against a scenario's expected rows.
pub fn compare_report(scn: &Scenario, report: &GroupedReport) -> ScenarioComparison {
    let mut rows = Vec::with_capacity(scn.expected.len());
    for e in scn.expected {
        let found = report
            .sections
            .iter()
            .find(|s| s.k == e.k)
            .and_then(|s| {
                s.groups.iter().find(|g| {
                    g.count_table == e.count_table && g.efficiency_cents == e.efficiency_cents
                })
            })
            .filter(|g| {
                cents_round_half_even(g.mean) == e.mean_cents
                    && cents_round_half_even(g.variance) == e.variance_cents
            });
        rows.push(RowComparison {
            expected: *e,
            matched: found.is_some(),
            observed_n: found.map(|g| g.frequency),
        });
    }
    let mut extra_groups = Vec::new();
    for s in &report.sections {
        for g in &s.groups {
            let expected = scn.expected.iter().any(|e| {
                e.k == s.k
                    && e.count_table == g.count_table
                    && e.efficiency_cents == g.efficiency_cents
            });
            if !expected {
                extra_groups.push((s.k, g.count_table, g.efficiency_cents, g.frequency));
            }
        }
    }
    let variance_checks = variance_efficiency_check(report);
    let all_rows_matched = rows.iter().all(|r| r.matched);
    let all_variance_checks_pass = variance_checks.iter().all(|&(_, ok)| ok);
    ScenarioComparison {
        table_id: scn.table_id,
        rows,
        extra_groups,
        variance_checks,
        all_rows_matched,
        all_variance_checks_pass,
    }
}

/// Run a scenario's campaign and compare it to the expected rows.
pub fn reproduce(table_id: u8, runs: usize, seed: u64) -> Result<(GroupedReport, ScenarioComparison)> {
    let scn = scenario(table_id)?;
    let mut config = CampaignConfig::new(scn.levels)?;
    config.runs = runs;
    config.seed = seed;
    config.coding = Coding::Effects;
    let report = run_campaign(&config)?;
    let comparison = compare_report(&scn, &report);
    Ok((report, comparison))
}
