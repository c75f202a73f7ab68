//! Fraction-level diagnostics: circuit intersections, count tables,
//! mean/variance, the g2/g3 objectives and the saturation test.

use crate::circuits::{BasicMoveSet, Circuit, CircuitBasis};
use crate::design::ModelMatrix;
use crate::error::{Error, Result};
use crate::linalg::exact_rank_indexed;
use crate::rounding::{cents_round_f64, format_cents, format_ratio_2dp};
use num_rational::Ratio;

/// A fraction of the design: a set of distinct point indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fraction {
    indices: Vec<usize>,
    member: Vec<bool>,
    model_fingerprint: String,
}

impl Fraction {
    /// Build a fraction of the model's design from point indices, in any
    /// order. Rejects duplicates and out-of-range indices.
    pub fn new(model: &ModelMatrix, indices: &[usize]) -> Result<Fraction> {
        let k_total = model.num_points();
        let mut member = vec![false; k_total];
        for &i in indices {
            if i >= k_total {
                return Err(Error::InvalidFraction(format!(
                    "point index {i} out of range for a {k_total}-point design"
                )));
            }
            if member[i] {
                return Err(Error::InvalidFraction(format!("duplicate point index {i}")));
            }
            member[i] = true;
        }
        let mut indices = indices.to_vec();
        indices.sort_unstable();
        Ok(Fraction {
            indices,
            member,
            model_fingerprint: model.fingerprint().to_string(),
        })
    }

    /// Number of points in the fraction.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Sorted point indices.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, point: usize) -> bool {
        self.member.get(point).copied().unwrap_or(false)
    }

    /// The indicator vector Y_F over all design points.
    pub fn indicator(&self) -> Vec<u8> {
        self.member.iter().map(|&m| m as u8).collect()
    }

    pub(crate) fn membership(&self) -> &[bool] {
        &self.member
    }

    pub fn model_fingerprint(&self) -> &str {
        &self.model_fingerprint
    }

    fn check_fingerprint(&self, other: &str, what: &str) -> Result<()> {
        if self.model_fingerprint != other {
            return Err(Error::FingerprintMismatch {
                expected: self.model_fingerprint.clone(),
                actual: format!("{other} ({what})"),
            });
        }
        Ok(())
    }
}

/// Intersection profile of a fraction against the basic moves: the vector
/// b̄_F of per-move intersection cardinalities, its table of counts and the
/// exact mean and population variance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoveProfile {
    b_bar: Vec<u8>,
    count_table: [usize; 5],
    mean: Ratio<i128>,
    variance: Ratio<i128>,
}

impl MoveProfile {
    fn from_b_bar(b_bar: Vec<u8>) -> MoveProfile {
        let mut count_table = [0usize; 5];
        for &b in &b_bar {
            count_table[b as usize] += 1;
        }
        let (mean, variance) = stats_from_table(&count_table);
        MoveProfile {
            b_bar,
            count_table,
            mean,
            variance,
        }
    }

    /// Per-move intersection cardinalities, in canonical move order.
    pub fn b_bar(&self) -> &[u8] {
        &self.b_bar
    }

    /// How many moves intersect the fraction in 0, 1, 2, 3, 4 points.
    pub fn count_table(&self) -> &[usize; 5] {
        &self.count_table
    }

    /// Exact mean of b̄_F.
    pub fn mean(&self) -> Ratio<i128> {
        self.mean
    }

    /// Exact population variance of b̄_F.
    pub fn variance(&self) -> Ratio<i128> {
        self.variance
    }

    /// CSV row with the benchmark table columns plus the point indices:
    /// `k, count0..count4, mean, variance, d_efficiency, indices`.
    pub fn csv_row(&self, fraction: &Fraction, d_efficiency: f64) -> String {
        let idx: Vec<String> = fraction.indices().iter().map(|i| i.to_string()).collect();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            fraction.len(),
            self.count_table[0],
            self.count_table[1],
            self.count_table[2],
            self.count_table[3],
            self.count_table[4],
            format_ratio_2dp(self.mean),
            format_ratio_2dp(self.variance),
            format_cents(cents_round_f64(d_efficiency) as i128),
            idx.join(";")
        )
    }
}

/// Mean and population variance implied by a table of counts of values 0..4.
pub fn stats_from_table(count_table: &[usize; 5]) -> (Ratio<i128>, Ratio<i128>) {
    let total: usize = count_table.iter().sum();
    if total == 0 {
        return (Ratio::from_integer(0), Ratio::from_integer(0));
    }
    let mut sum: i128 = 0;
    let mut sum_sq: i128 = 0;
    for (value, &count) in count_table.iter().enumerate() {
        sum += (value * count) as i128;
        sum_sq += (value * value * count) as i128;
    }
    let n = total as i128;
    let mean = Ratio::new(sum, n);
    let variance = Ratio::new(sum_sq, n) - mean * mean;
    (mean, variance)
}

/// Compute b̄_F: the number of points of `fraction` inside each basic move's
/// support, plus the derived table/mean/variance.
pub fn intersection_counts(fraction: &Fraction, moves: &BasicMoveSet) -> Result<MoveProfile> {
    fraction.check_fingerprint(moves.fingerprint(), "basic moves")?;
    let b_bar = moves
        .moves()
        .iter()
        .map(|c| c.intersection_count(fraction.membership()) as u8)
        .collect();
    Ok(MoveProfile::from_b_bar(b_bar))
}

/// Which circuits the objectives range over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CircuitScope {
    /// All L circuits of the basis (the defining form).
    #[default]
    Full,
    /// Only the basic moves (support size 4).
    BasicOnly,
}

fn scoped<'a>(
    basis: &'a CircuitBasis,
    scope: CircuitScope,
) -> impl Iterator<Item = &'a Circuit> + 'a {
    basis
        .iter()
        .filter(move |c| scope == CircuitScope::Full || c.support_size() == 4)
}

/// g2: the sum over circuits of (b − b_F)², where b_i is the support size of
/// circuit i and (b_F)_i its intersection with the fraction. Zero iff the
/// fraction contains every circuit support in scope.
pub fn g2(fraction: &Fraction, basis: &CircuitBasis, scope: CircuitScope) -> Result<u128> {
    fraction.check_fingerprint(basis.fingerprint(), "circuit basis")?;
    Ok(scoped(basis, scope)
        .map(|c| {
            let d = (c.support_size() - c.intersection_count(fraction.membership())) as u128;
            d * d
        })
        .sum())
}

/// g3: the largest circuit intersection max_i (b_F)_i.
pub fn g3(fraction: &Fraction, basis: &CircuitBasis, scope: CircuitScope) -> Result<usize> {
    fraction.check_fingerprint(basis.fingerprint(), "circuit basis")?;
    Ok(scoped(basis, scope)
        .map(|c| c.intersection_count(fraction.membership()))
        .max()
        .unwrap_or(0))
}

/// Outcome of the saturation test for a p-point fraction.
#[derive(Debug, Clone)]
pub struct SaturationVerdict {
    /// No circuit support is contained in the fraction.
    pub is_saturated: bool,
    /// A circuit whose support lies inside the fraction, when one exists.
    pub witness: Option<Circuit>,
    /// Independent check: the fraction's model rows have full rank p.
    pub rank_check: bool,
}

/// Test whether a p-point fraction is saturated: it estimates all p
/// parameters iff it contains no circuit support. The exact-rank computation
/// runs alongside as an independent oracle; the two verdicts coincide.
pub fn is_saturated(
    fraction: &Fraction,
    basis: &CircuitBasis,
    model: &ModelMatrix,
) -> Result<SaturationVerdict> {
    fraction.check_fingerprint(basis.fingerprint(), "circuit basis")?;
    fraction.check_fingerprint(model.fingerprint(), "model")?;
    let p = model.num_params();
    if fraction.len() != p {
        return Err(Error::NotApplicable(format!(
            "saturation is defined for fractions of exactly p = {p} points, got {}",
            fraction.len()
        )));
    }
    let witness = basis
        .iter()
        .find(|c| c.support_contained_in(fraction.membership()))
        .cloned();
    let rank_check = exact_rank_indexed(model.entries(), fraction.indices()) == p;
    let verdict = SaturationVerdict {
        is_saturated: witness.is_none(),
        witness,
        rank_check,
    };
    debug_assert_eq!(verdict.is_saturated, verdict.rank_check);
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{basic_moves, enumerate_circuits};
    use crate::design::{full_factorial, model_matrix, Coding};
    use crate::rounding::cents_round_half_even;

    fn setup(levels: &[u32]) -> (ModelMatrix, CircuitBasis, BasicMoveSet) {
        let m = model_matrix(&full_factorial(levels).unwrap(), Coding::Effects);
        let basis = enumerate_circuits(&m);
        let moves = basic_moves(&basis);
        (m, basis, moves)
    }

    #[test]
    fn fraction_validation() {
        let (m, _, _) = setup(&[2, 2]);
        assert!(Fraction::new(&m, &[0, 1, 2]).is_ok());
        assert!(Fraction::new(&m, &[]).is_ok());
        assert!(Fraction::new(&m, &[0, 0]).is_err());
        assert!(Fraction::new(&m, &[4]).is_err());
        let f = Fraction::new(&m, &[3, 1]).unwrap();
        assert_eq!(f.indices(), &[1, 3]);
        assert_eq!(f.indicator(), vec![0, 1, 0, 1]);
    }

    #[test]
    fn empty_and_full_profiles() {
        let (m, _, moves) = setup(&[2, 2, 2, 2]);
        let empty = Fraction::new(&m, &[]).unwrap();
        let p = intersection_counts(&empty, &moves).unwrap();
        assert_eq!(p.count_table(), &[100, 0, 0, 0, 0]);
        assert_eq!(p.mean(), Ratio::from_integer(0));
        assert_eq!(p.variance(), Ratio::from_integer(0));

        let full = Fraction::new(&m, &(0..16).collect::<Vec<_>>()).unwrap();
        let p = intersection_counts(&full, &moves).unwrap();
        assert_eq!(p.count_table(), &[0, 0, 0, 0, 100]);
        assert_eq!(p.mean(), Ratio::from_integer(4));
        assert_eq!(p.variance(), Ratio::from_integer(0));
    }

    #[test]
    fn latin_square_profile_and_variance() {
        let (m, _, moves) = setup(&[3, 3, 3]);
        let design = full_factorial(&[3, 3, 3]).unwrap();
        let pts: Vec<usize> = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| design.point_index(&[i, j, (i + j) % 3]).unwrap())
            .collect();
        let f = Fraction::new(&m, &pts).unwrap();
        let p = intersection_counts(&f, &moves).unwrap();
        assert_eq!(p.count_table(), &[27, 108, 108, 0, 0]);
        assert_eq!(p.mean(), Ratio::new(4, 3));
        assert_eq!(p.variance(), Ratio::new(4, 9));
        assert_eq!(cents_round_half_even(p.variance()), 44);
    }

    #[test]
    fn table_stats_match_benchmark_rows() {
        // (table, mean in cents, variance in cents)
        let rows: &[([usize; 5], i128, i128)] = &[
            ([9, 39, 45, 7, 0], 150, 57),
            ([6, 22, 66, 3, 3], 175, 55),
            ([3, 18, 58, 18, 3], 200, 60),
            ([6, 0, 88, 0, 6], 200, 48),
            ([249, 321, 141, 9, 0], 88, 58),
            ([230, 353, 135, 1, 1], 88, 51),
            ([186, 352, 180, 0, 2], 100, 53),
            ([155, 339, 209, 15, 2], 112, 60),
            ([48, 108, 81, 6, 0], 119, 60),
            ([39, 120, 84, 0, 0], 119, 47),
            ([27, 108, 108, 0, 0], 133, 44),
            ([21, 96, 114, 12, 0], 148, 52),
            ([20, 80, 70, 4, 0], 133, 50),
            ([14, 68, 84, 7, 1], 150, 53),
            ([11, 48, 106, 6, 3], 167, 52),
        ];
        for (table, mean_c, var_c) in rows {
            let (mean, var) = stats_from_table(table);
            assert_eq!(cents_round_half_even(mean), *mean_c, "{table:?}");
            assert_eq!(cents_round_half_even(var), *var_c, "{table:?}");
        }
    }

    #[test]
    fn mean_identity_over_random_fractions() {
        // every point lies in the same number of basic moves, so the mean is
        // 4k/K regardless of which points are chosen
        for levels in [vec![2u32, 2, 2, 2], vec![3, 3, 3], vec![2, 3, 4]] {
            let (m, _, moves) = setup(&levels);
            let k_total = m.num_points();
            for k in [m.num_params(), m.num_params() + 3] {
                let pick: Vec<usize> = (0..k_total).step_by(2).take(k).collect();
                assert_eq!(pick.len(), k);
                let f = Fraction::new(&m, &pick).unwrap();
                let p = intersection_counts(&f, &moves).unwrap();
                assert_eq!(
                    p.mean(),
                    Ratio::new(4 * k as i128, k_total as i128),
                    "{levels:?} k={k}"
                );
            }
        }
    }

    #[test]
    fn g2_g3_basics() {
        let (m, basis, _) = setup(&[2, 2, 2, 2]);
        let full = Fraction::new(&m, &(0..16).collect::<Vec<_>>()).unwrap();
        assert_eq!(g2(&full, &basis, CircuitScope::Full).unwrap(), 0);
        assert_eq!(g3(&full, &basis, CircuitScope::Full).unwrap(), 6);
        assert_eq!(g3(&full, &basis, CircuitScope::BasicOnly).unwrap(), 4);

        let empty = Fraction::new(&m, &[]).unwrap();
        let expected: u128 = basis
            .iter()
            .map(|c| (c.support_size() * c.support_size()) as u128)
            .sum();
        assert_eq!(g2(&empty, &basis, CircuitScope::Full).unwrap(), expected);
        assert_eq!(g3(&empty, &basis, CircuitScope::Full).unwrap(), 0);
    }

    #[test]
    fn g_objectives_monotone_under_point_addition() {
        let (m, basis, moves) = setup(&[2, 2, 2]);
        let mut prev_g3 = 0;
        let mut prev_mean = Ratio::from_integer(0);
        let mut prev_g2 = g2(&Fraction::new(&m, &[]).unwrap(), &basis, CircuitScope::Full).unwrap();
        for k in 1..=8 {
            let f = Fraction::new(&m, &(0..k).collect::<Vec<_>>()).unwrap();
            let g3v = g3(&f, &basis, CircuitScope::Full).unwrap();
            let g2v = g2(&f, &basis, CircuitScope::Full).unwrap();
            let mean = intersection_counts(&f, &moves).unwrap().mean();
            assert!(g3v >= prev_g3);
            assert!(g2v <= prev_g2);
            assert!(mean >= prev_mean);
            prev_g3 = g3v;
            prev_g2 = g2v;
            prev_mean = mean;
        }
    }

    #[test]
    fn saturation_verdicts() {
        let (m, basis, moves) = setup(&[2, 2, 2, 2]);
        // build an unsaturated 5-point fraction: a basic move's support + 1
        let mv = &moves.moves()[0];
        let mut pts: Vec<usize> = mv.support().to_vec();
        let extra = (0..16).find(|i| !pts.contains(i)).unwrap();
        pts.push(extra);
        let f = Fraction::new(&m, &pts).unwrap();
        let v = is_saturated(&f, &basis, &m).unwrap();
        assert!(!v.is_saturated);
        assert!(!v.rank_check);
        assert_eq!(v.witness.as_ref().map(|c| c.support()), Some(mv.support()));

        // a known-independent 5-subset: rows 0,1,2,4,8 of 2^4
        let f = Fraction::new(&m, &[0, 1, 2, 4, 8]).unwrap();
        let v = is_saturated(&f, &basis, &m).unwrap();
        assert!(v.is_saturated);
        assert!(v.rank_check);
        assert!(v.witness.is_none());

        // wrong k
        let f = Fraction::new(&m, &[0, 1, 2]).unwrap();
        assert!(matches!(
            is_saturated(&f, &basis, &m),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn fingerprint_mismatch_rejected() {
        let (m4, basis4, moves4) = setup(&[2, 2, 2, 2]);
        let (m3, _, _) = setup(&[2, 2, 2]);
        let f = Fraction::new(&m3, &[0, 1, 2]).unwrap();
        assert!(intersection_counts(&f, &moves4).is_err());
        assert!(g2(&f, &basis4, CircuitScope::Full).is_err());
        let _ = m4;
    }

    #[test]
    fn csv_row_shape() {
        // 2^2 has exactly one circuit, itself a basic move on all 4 points
        let (m, _, moves) = setup(&[2, 2]);
        let f = Fraction::new(&m, &[0, 3]).unwrap();
        let p = intersection_counts(&f, &moves).unwrap();
        assert_eq!(p.b_bar(), &[2]);
        let row = p.csv_row(&f, 50.0);
        assert_eq!(row, "2,0,0,1,0,0,2.00,0.00,50.00,0;3");
    }
}
