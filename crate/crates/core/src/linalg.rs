//! Exact integer linear algebra: fraction-free rank, determinants, and the
//! incremental eliminator used by the circuit enumerator.
//!
//! All routines work over the integers with no floating point anywhere.
//! Intermediate growth is controlled by dividing rows by their gcd whenever
//! entries get large; row contents only ever change by an overall scale, so
//! ranks and kernel directions are preserved exactly.

use num_integer::Integer;

/// Entries above this trigger a gcd renormalization inside a reduction step.
/// One combination step at most squares-and-doubles magnitudes, so starting
/// below 2^62 keeps every intermediate product inside i128.
const NORMALIZE_LIMIT: i128 = 1 << 62;

/// Divide a row by the gcd of its entries (no-op for the zero row).
fn normalize(row: &mut [i128]) {
    let mut g: i128 = 0;
    for &x in row.iter() {
        g = g.gcd(&x);
        if g == 1 {
            return;
        }
    }
    if g > 1 {
        for x in row.iter_mut() {
            *x /= g;
        }
    }
}

fn needs_normalize(row: &[i128]) -> bool {
    row.iter().any(|x| x.abs() > NORMALIZE_LIMIT)
}

/// Incremental integer row eliminator.
///
/// Rows may carry an augmentation (extra trailing columns) that is swept
/// along by every elimination step but never used for pivoting. Feeding
/// `[v | e_i]` rows and watching the augmentation of a row whose main part
/// reduces to zero yields an exact integer kernel combination.
pub struct Eliminator {
    main_cols: usize,
    width: usize,
    rows: Vec<(usize, Vec<i128>)>,
}

impl Eliminator {
    pub fn new(main_cols: usize) -> Self {
        Self::with_augmentation(main_cols, 0)
    }

    pub fn with_augmentation(main_cols: usize, aug: usize) -> Self {
        Eliminator {
            main_cols,
            width: main_cols + aug,
            rows: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Eliminate `row` against the stored rows and return the (gcd-reduced)
    /// result. The main part of the result is zero iff `row`'s main part is a
    /// linear combination of the stored rows' main parts.
    pub fn reduce(&self, row: &[i128]) -> Vec<i128> {
        assert_eq!(row.len(), self.width, "row width mismatch");
        let mut v = row.to_vec();
        for (lead, basis) in &self.rows {
            let c = v[*lead];
            if c == 0 {
                continue;
            }
            let piv = basis[*lead];
            for (vi, bi) in v.iter_mut().zip(basis.iter()) {
                *vi = piv * *vi - c * *bi;
            }
            if needs_normalize(&v) {
                normalize(&mut v);
            }
        }
        normalize(&mut v);
        v
    }

    /// True iff the main part of a reduced row is identically zero.
    pub fn is_dependent(&self, reduced: &[i128]) -> bool {
        reduced[..self.main_cols].iter().all(|&x| x == 0)
    }

    /// Store a row previously returned by [`reduce`](Self::reduce). Returns
    /// true if it extended the basis (i.e. its main part was nonzero).
    pub fn insert_reduced(&mut self, reduced: Vec<i128>) -> bool {
        match reduced[..self.main_cols].iter().position(|&x| x != 0) {
            Some(lead) => {
                self.rows.push((lead, reduced));
                true
            }
            None => false,
        }
    }

    /// Reduce and store in one call.
    pub fn insert(&mut self, row: &[i128]) -> bool {
        let v = self.reduce(row);
        self.insert_reduced(v)
    }

    /// Drop the most recently inserted row (DFS backtracking).
    pub fn pop(&mut self) {
        self.rows.pop();
    }
}

/// Rank over the rationals of an integer matrix given as rows.
pub fn exact_rank(matrix: &[Vec<i64>]) -> usize {
    let Some(first) = matrix.first() else {
        return 0;
    };
    let ncols = first.len();
    let mut elim = Eliminator::new(ncols);
    let mut buf = vec![0i128; ncols];
    for row in matrix {
        assert_eq!(row.len(), ncols, "ragged matrix");
        for (b, &x) in buf.iter_mut().zip(row.iter()) {
            *b = x as i128;
        }
        elim.insert(&buf);
        if elim.rank() == ncols {
            break;
        }
    }
    elim.rank()
}

/// Rank of the submatrix formed by the given rows of `matrix`.
pub fn exact_rank_indexed(matrix: &[Vec<i64>], rows: &[usize]) -> usize {
    let Some(first) = matrix.first() else {
        return 0;
    };
    let ncols = first.len();
    let mut elim = Eliminator::new(ncols);
    let mut buf = vec![0i128; ncols];
    for &r in rows {
        for (b, &x) in buf.iter_mut().zip(matrix[r].iter()) {
            *b = x as i128;
        }
        elim.insert(&buf);
        if elim.rank() == ncols {
            break;
        }
    }
    elim.rank()
}

/// Exact determinant of a square integer matrix by Bareiss fraction-free
/// elimination. Every division below is exact by the Bareiss identity.
pub fn bareiss_det(mut m: Vec<Vec<i128>>) -> i128 {
    let n = m.len();
    if n == 0 {
        return 1;
    }
    debug_assert!(m.iter().all(|r| r.len() == n), "matrix not square");
    let mut sign = 1i128;
    let mut prev = 1i128;
    for i in 0..n {
        if m[i][i] == 0 {
            let Some(r) = (i + 1..n).find(|&r| m[r][i] != 0) else {
                return 0;
            };
            m.swap(i, r);
            sign = -sign;
        }
        let piv = m[i][i];
        for r in i + 1..n {
            let head = m[r][i];
            for c in i + 1..n {
                m[r][c] = (piv * m[r][c] - head * m[i][c]) / prev;
            }
            m[r][i] = 0;
        }
        prev = piv;
    }
    sign * m[n - 1][n - 1]
}
