//! Full factorial designs and integer main-effect model matrices.
//!
//! A design with factors of `s_1, ..., s_m` levels has `K = prod(s_i)`
//! candidate points; the main-effect model has `p = 1 + sum(s_i - 1)`
//! parameters. Points are listed in a fixed lexicographic order (last factor
//! varying fastest) so that point indices, and everything downstream that is
//! keyed by them, are reproducible across runs.

use crate::error::{Error, Result};
use crate::linalg;
use num_rational::Ratio;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::fmt;
use std::str::FromStr;

/// Factor level counts `s_1..s_m`, each at least 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorSpec {
    levels: Vec<u32>,
}

impl FactorSpec {
    pub fn new(levels: Vec<u32>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidSpec("at least one factor is required".into()));
        }
        if let Some(&bad) = levels.iter().find(|&&s| s < 2) {
            return Err(Error::InvalidSpec(format!(
                "every factor needs at least 2 levels, got {bad}"
            )));
        }
        let mut k: usize = 1;
        for &s in &levels {
            k = k
                .checked_mul(s as usize)
                .ok_or_else(|| Error::InvalidSpec("design size overflows usize".into()))?;
        }
        Ok(FactorSpec { levels })
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn num_factors(&self) -> usize {
        self.levels.len()
    }

    /// Number of candidate points `K`.
    pub fn num_points(&self) -> usize {
        self.levels.iter().map(|&s| s as usize).product()
    }

    /// Number of main-effect model parameters `p = 1 + sum(s_i - 1)`.
    pub fn num_params(&self) -> usize {
        1 + self
            .levels
            .iter()
            .map(|&s| s as usize - 1)
            .sum::<usize>()
    }
}

impl fmt::Display for FactorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.levels.iter().map(|s| s.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

impl FromStr for FactorSpec {
    type Err = Error;

    /// Parses a comma-separated level list such as `2,3,4`.
    fn from_str(s: &str) -> Result<Self> {
        let levels = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::InvalidSpec(format!("bad level count {t:?}")))
            })
            .collect::<Result<Vec<u32>>>()?;
        FactorSpec::new(levels)
    }
}

/// The full factorial candidate set: all `K` level combinations in
/// lexicographic order with the last factor varying fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorialDesign {
    spec: FactorSpec,
    points: Vec<Vec<u32>>,
}

/// Build the full factorial design for the given level counts.
pub fn full_factorial(levels: &[u32]) -> Result<FactorialDesign> {
    Ok(FactorialDesign::new(FactorSpec::new(levels.to_vec())?))
}

impl FactorialDesign {
    pub fn new(spec: FactorSpec) -> Self {
        let k = spec.num_points();
        let m = spec.num_factors();
        let mut points = Vec::with_capacity(k);
        for idx in 0..k {
            let mut tuple = vec![0u32; m];
            let mut rem = idx;
            for f in (0..m).rev() {
                let s = spec.levels()[f] as usize;
                tuple[f] = (rem % s) as u32;
                rem /= s;
            }
            points.push(tuple);
        }
        FactorialDesign { spec, points }
    }

    pub fn spec(&self) -> &FactorSpec {
        &self.spec
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Vec<u32>] {
        &self.points
    }

    pub fn point(&self, index: usize) -> &[u32] {
        &self.points[index]
    }

    /// Index of a level tuple in the fixed point order.
    pub fn point_index(&self, tuple: &[u32]) -> Result<usize> {
        if tuple.len() != self.spec.num_factors() {
            return Err(Error::InvalidInput(format!(
                "tuple has {} entries, design has {} factors",
                tuple.len(),
                self.spec.num_factors()
            )));
        }
        let mut idx = 0usize;
        for (f, &lvl) in tuple.iter().enumerate() {
            let s = self.spec.levels()[f] as usize;
            if lvl as usize >= s {
                return Err(Error::InvalidInput(format!(
                    "level {lvl} out of range for factor {f} with {s} levels"
                )));
            }
            idx = idx * s + lvl as usize;
        }
        Ok(idx)
    }
}

/// Contrast coding for factor main effects.
///
/// Both codings span the same column space over the full design; they differ
/// only in the contrast vectors assigned to each factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coding {
    /// Sum-to-zero coding: column `c` of an `s`-level factor is 1 at level
    /// `c`, -1 at the last level, 0 elsewhere. All entries are in {-1,0,1}.
    #[default]
    Effects,
    /// Integer orthogonal-polynomial contrasts, pairwise orthogonal over the
    /// full design, stored with a per-column rational `scale_sq` such that
    /// `scale_sq * ||column||^2 = K`.
    Orthonormal,
}

impl Coding {
    pub fn name(&self) -> &'static str {
        match self {
            Coding::Effects => "effects",
            Coding::Orthonormal => "orthonormal",
        }
    }
}

impl FromStr for Coding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "effects" => Ok(Coding::Effects),
            "orthonormal" => Ok(Coding::Orthonormal),
            other => Err(Error::InvalidInput(format!("unknown coding {other:?}"))),
        }
    }
}

/// Integer orthogonal contrasts for one factor: exact Gram-Schmidt over the
/// power basis, cleared of denominators and made primitive. Returns `s - 1`
/// pairs of (contrast over levels, scale_sq with scale_sq * ||col||^2 = K
/// over the full design).
fn orthogonal_contrasts(s: u32) -> Vec<(Vec<i64>, Ratio<i64>)> {
    type Q = Ratio<i128>;
    let n = s as usize;
    let mut orth: Vec<Vec<Q>> = vec![vec![Q::from_integer(1); n]];
    let mut out = Vec::with_capacity(n - 1);
    for t in 1..n {
        let mut v: Vec<Q> = (0..n)
            .map(|l| Q::from_integer((l as i128).pow(t as u32)))
            .collect();
        for u in &orth {
            let dot: Q = v.iter().zip(u).map(|(a, b)| a * b).sum();
            let norm: Q = u.iter().map(|x| x * x).sum();
            let coeff = dot / norm;
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= coeff * ui;
            }
        }
        // clear denominators, make primitive, orient last nonzero positive
        let mut den: i128 = 1;
        for x in &v {
            den = den / den.gcd(x.denom()) * x.denom();
        }
        let mut ints: Vec<i128> = v.iter().map(|x| x.numer() * (den / x.denom())).collect();
        let mut g: i128 = 0;
        for &x in &ints {
            g = g.gcd(&x);
        }
        if g > 1 {
            for x in ints.iter_mut() {
                *x /= g;
            }
        }
        if let Some(&last) = ints.iter().rev().find(|&&x| x != 0) {
            if last < 0 {
                for x in ints.iter_mut() {
                    *x = -*x;
                }
            }
        }
        let sum_sq: i128 = ints.iter().map(|x| x * x).sum();
        let contrast: Vec<i64> = ints
            .iter()
            .map(|&x| i64::try_from(x).expect("orthogonal contrast entry overflows i64"))
            .collect();
        out.push((contrast, Ratio::new(s as i64, sum_sq as i64)));
        orth.push(v);
    }
    out
}

use num_integer::Integer;

/// Integer model matrix `X` (K rows, p columns) for the main-effect model.
///
/// Entries are exact integers under both codings; the Orthonormal coding
/// additionally carries per-column `scale_sq` factors. The transpose
/// `A = X^t` is the circuit-engine input; circuits depend only on the column
/// span, which is identical for both codings.
#[derive(Debug, Clone)]
pub struct ModelMatrix {
    design: FactorialDesign,
    coding: Coding,
    entries: Vec<Vec<i64>>,
    col_scale_sq: Vec<Ratio<i64>>,
    fingerprint: String,
}

/// Build the main-effect model matrix for a design under the given coding.
pub fn model_matrix(design: &FactorialDesign, coding: Coding) -> ModelMatrix {
    ModelMatrix::new(design.clone(), coding)
}

impl ModelMatrix {
    pub fn new(design: FactorialDesign, coding: Coding) -> Self {
        let spec = design.spec();
        let p = spec.num_params();
        let one = Ratio::from_integer(1);
        let mut col_scale_sq = vec![one; p];

        // per-factor contrast tables: contrasts[f][column][level]
        let mut contrasts: Vec<Vec<Vec<i64>>> = Vec::with_capacity(spec.num_factors());
        match coding {
            Coding::Effects => {
                for &s in spec.levels() {
                    let cols = (0..s - 1)
                        .map(|c| {
                            (0..s)
                                .map(|j| {
                                    if j == c {
                                        1
                                    } else if j == s - 1 {
                                        -1
                                    } else {
                                        0
                                    }
                                })
                                .collect()
                        })
                        .collect();
                    contrasts.push(cols);
                }
            }
            Coding::Orthonormal => {
                let mut col = 1;
                for &s in spec.levels() {
                    let mut cols = Vec::with_capacity(s as usize - 1);
                    for (contrast, scale_sq) in orthogonal_contrasts(s) {
                        col_scale_sq[col] = scale_sq;
                        col += 1;
                        cols.push(contrast);
                    }
                    contrasts.push(cols);
                }
            }
        }

        let entries = design
            .points()
            .iter()
            .map(|tuple| {
                let mut row = Vec::with_capacity(p);
                row.push(1i64);
                for (f, &lvl) in tuple.iter().enumerate() {
                    for col in &contrasts[f] {
                        row.push(col[lvl as usize]);
                    }
                }
                row
            })
            .collect();

        let fingerprint = model_fingerprint(spec.levels());
        ModelMatrix {
            design,
            coding,
            entries,
            col_scale_sq,
            fingerprint,
        }
    }

    pub fn design(&self) -> &FactorialDesign {
        &self.design
    }

    pub fn coding(&self) -> Coding {
        self.coding
    }

    pub fn num_points(&self) -> usize {
        self.entries.len()
    }

    pub fn num_params(&self) -> usize {
        self.col_scale_sq.len()
    }

    pub fn entries(&self) -> &[Vec<i64>] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.entries[i]
    }

    /// Per-column squared scale factors (all 1 for Effects coding).
    pub fn col_scale_sq(&self) -> &[Ratio<i64>] {
        &self.col_scale_sq
    }

    /// Product of all column squared scales; multiplies det(X_F^t X_F) of the
    /// integer entries to give the determinant of the scaled matrix.
    pub fn scale_sq_product(&self) -> Ratio<i128> {
        self.col_scale_sq
            .iter()
            .map(|r| Ratio::new(*r.numer() as i128, *r.denom() as i128))
            .product()
    }

    /// Identifies the matrix `A = X^t` up to coding: the circuit basis
    /// depends only on (levels, main-effect model), so both codings share a
    /// fingerprint.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Exact rank over the rationals.
    pub fn rank(&self) -> usize {
        linalg::exact_rank(&self.entries)
    }

    /// JSON export: levels, coding, point list and the integer matrix. The
    /// Orthonormal coding adds the per-column `scale_sq` ratios.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "levels": self.design.spec().levels(),
            "coding": self.coding.name(),
            "points": self.design.points(),
            "X": self.entries,
        });
        if self.coding == Coding::Orthonormal {
            let scales: Vec<[i64; 2]> = self
                .col_scale_sq
                .iter()
                .map(|r| [*r.numer(), *r.denom()])
                .collect();
            v["col_scale_sq"] = json!(scales);
        }
        v
    }
}

/// Stable identifier for the circuit input matrix of a main-effect model.
pub fn model_fingerprint(levels: &[u32]) -> String {
    let mut h = Sha256::new();
    h.update(b"main-effects:");
    for &l in levels {
        h.update(l.to_le_bytes());
    }
    let digest = h.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Rank over the rationals of an integer matrix (fraction-free, exact).
pub use crate::linalg::exact_rank;
