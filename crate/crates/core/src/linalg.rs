//! Exact rational linear algebra on small dense matrices.
//!
//! Kernels use fraction-free Gauss-Jordan elimination over the integers
//! (rows are cleared of denominators first); every division performed is
//! exact. Basis vectors are returned as primitive integer vectors: gcd 1,
//! first nonzero entry positive.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigRational>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![BigRational::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = BigRational::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> i64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(BigRational::from_integer(BigInt::from(f(i, j))));
            }
        }
        Self { rows, cols, data }
    }

    /// Panics on ragged input.
    pub fn from_i64_rows(rows: &[Vec<i64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self::from_fn(rows.len(), cols, |i, j| rows[i][j])
    }

    pub fn from_rational_rows(rows: Vec<Vec<BigRational>>) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        let n = rows.len();
        Self { rows: n, cols, data: rows.into_iter().flatten().collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigRational {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: BigRational) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[BigRational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j).clone();
            }
        }
        t
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            for &j in cols {
                data.push(self.get(i, j).clone());
            }
        }
        Self { rows: rows.len(), cols: cols.len(), data }
    }

    pub fn principal(&self, idx: &[usize]) -> Self {
        self.submatrix(idx, idx)
    }

    pub fn mul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let idx = i * other.cols + j;
                    out.data[idx] = &out.data[idx] + a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// M v for an integer vector.
    pub fn mul_int_vec(&self, v: &[BigInt]) -> Vec<BigRational> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(BigRational::zero(), |acc, (a, b)| acc + a * BigRational::from_integer(b.clone()))
            })
            .collect()
    }

    /// w M for an integer row vector.
    pub fn left_mul_int_vec(&self, w: &[BigInt]) -> Vec<BigRational> {
        self.transpose().mul_int_vec(w)
    }

    /// Entries as `i64`; `None` if any entry is fractional or too large.
    pub fn try_to_i64_rows(&self) -> Option<Vec<Vec<i64>>> {
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .map(|x| if x.is_integer() { x.to_integer().to_i64() } else { None })
                    .collect()
            })
            .collect()
    }

    /// Panics unless every entry is an `i64` integer.
    pub fn to_i64_rows(&self) -> Vec<Vec<i64>> {
        self.try_to_i64_rows().expect("matrix has non-integer entries")
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect())
            .collect()
    }

    /// Rows scaled to integers (each row multiplied by the lcm of its
    /// denominators). Returns the scaled rows and the product of the scales.
    fn integer_rows(&self) -> (Vec<Vec<BigInt>>, BigInt) {
        let mut scale_product = BigInt::one();
        let rows = (0..self.rows)
            .map(|i| {
                let lcm = self.row(i).iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
                scale_product *= &lcm;
                self.row(i).iter().map(|x| x.numer() * (&lcm / x.denom())).collect()
            })
            .collect();
        (rows, scale_product)
    }

    pub fn rank(&self) -> usize {
        let (rows, _) = self.integer_rows();
        gauss_jordan(rows, self.cols).pivots.len()
    }

    pub fn right_kernel_basis(&self) -> Vec<Vec<BigInt>> {
        right_kernel_basis(self)
    }

    pub fn left_kernel_basis(&self) -> ConservationBasis {
        left_kernel_basis(self)
    }

    pub fn det(&self) -> Result<BigRational, LinalgError> {
        det_exact(self)
    }
}

impl fmt::Debug for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RationalMatrix{}", self)
    }
}

impl fmt::Display for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for i in 0..self.rows {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str("[")?;
            for (j, x) in self.row(i).iter().enumerate() {
                if j > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{x}")?;
            }
            f.write_str("]")?;
        }
        f.write_str("]")
    }
}

impl Serialize for RationalMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> =
            (0..self.rows).map(|i| self.row(i).iter().map(|x| x.to_string()).collect()).collect();
        rows.serialize(serializer)
    }
}

/// Left-kernel basis of a stoichiometric matrix: each `w` satisfies
/// `w S = 0`, so `w . x(t)` is invariant along trajectories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConservationBasis {
    #[serde(serialize_with = "serialize_int_vectors")]
    pub vectors: Vec<Vec<BigInt>>,
}

impl ConservationBasis {
    pub fn dimension(&self) -> usize {
        self.vectors.len()
    }

    /// True iff `other` spans the same space (mutual span inclusion).
    pub fn same_span(&self, other: &[Vec<BigInt>]) -> bool {
        let len = self.vectors.first().or(other.first()).map_or(0, Vec::len);
        let a = int_rows_matrix(&self.vectors, len);
        let b = int_rows_matrix(other, len);
        let mut both = self.vectors.clone();
        both.extend(other.iter().cloned());
        let ab = int_rows_matrix(&both, len);
        let r = ab.rank();
        r == a.rank() && r == b.rank()
    }
}

fn int_rows_matrix(rows: &[Vec<BigInt>], cols: usize) -> RationalMatrix {
    RationalMatrix::from_rational_rows(
        rows.iter()
            .map(|r| {
                assert_eq!(r.len(), cols);
                r.iter().map(|x| BigRational::from_integer(x.clone())).collect()
            })
            .collect(),
    )
}

pub fn serialize_int_vectors<S: Serializer>(v: &[Vec<BigInt>], s: S) -> Result<S::Ok, S::Error> {
    let as_i64: Vec<Vec<String>> = v.iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect();
    as_i64.serialize(s)
}

struct Echelon {
    rows: Vec<Vec<BigInt>>,
    /// (row, column) of each pivot, in column order.
    pivots: Vec<(usize, usize)>,
}

/// Fraction-free Gauss-Jordan. On return every pivot row has the same
/// pivot value `d` and all other entries in pivot columns are zero.
fn gauss_jordan(mut a: Vec<Vec<BigInt>>, cols: usize) -> Echelon {
    let n = a.len();
    let mut prev = BigInt::one();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == n {
            break;
        }
        let Some(p) = (r..n).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(r, p);
        let piv = a[r][c].clone();
        for i in 0..n {
            if i == r {
                continue;
            }
            let factor = a[i][c].clone();
            for j in 0..cols {
                let v = (&piv * &a[i][j] - &factor * &a[r][j]) / &prev;
                a[i][j] = v;
            }
        }
        prev = piv;
        pivots.push((r, c));
        r += 1;
    }
    Echelon { rows: a, pivots }
}

/// Divides by the gcd and makes the first nonzero entry positive.
pub fn primitive(mut v: Vec<BigInt>) -> Vec<BigInt> {
    let g = v.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if g.is_zero() {
        return v;
    }
    let neg = v.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_negative());
    for x in v.iter_mut() {
        *x = &*x / &g;
        if neg {
            *x = -&*x;
        }
    }
    v
}

/// Basis of `{v : M v = 0}`; one vector per free column, ascending.
pub fn right_kernel_basis(m: &RationalMatrix) -> Vec<Vec<BigInt>> {
    let (rows, _) = m.integer_rows();
    let ech = gauss_jordan(rows, m.cols);
    let pivot_cols: Vec<usize> = ech.pivots.iter().map(|p| p.1).collect();
    (0..m.cols)
        .filter(|c| !pivot_cols.contains(c))
        .map(|free| {
            let mut v = vec![BigInt::zero(); m.cols];
            match ech.pivots.first() {
                None => v[free] = BigInt::one(),
                Some(&(r0, c0)) => {
                    v[free] = ech.rows[r0][c0].clone();
                    for &(r, c) in &ech.pivots {
                        v[c] = -&ech.rows[r][free];
                    }
                }
            }
            primitive(v)
        })
        .collect()
}

/// Basis of `{w : w M = 0}`.
pub fn left_kernel_basis(m: &RationalMatrix) -> ConservationBasis {
    ConservationBasis { vectors: right_kernel_basis(&m.transpose()) }
}

pub fn det_exact(m: &RationalMatrix) -> Result<BigRational, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare { rows: m.rows, cols: m.cols });
    }
    let (rows, scale) = m.integer_rows();
    Ok(BigRational::new(bareiss_bigint(rows), scale))
}

fn bareiss_bigint(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        let Some(p) = (k..n).find(|&i| !a[i][k].is_zero()) else { return BigInt::zero() };
        if p != k {
            a.swap(p, k);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (&a[k][k] * &a[i][j] - &a[i][k] * &a[k][j]) / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    if n == 0 {
        return BigInt::one();
    }
    sign * &a[n - 1][n - 1]
}

fn bareiss_i128(a: &[Vec<i64>]) -> Option<i128> {
    let n = a.len();
    let mut m: Vec<Vec<i128>> = a.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        let Some(p) = (k..n).find(|&i| m[i][k] != 0) else { return Some(0) };
        if p != k {
            m.swap(p, k);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = m[k][k].checked_mul(m[i][j])?.checked_sub(m[i][k].checked_mul(m[k][j])?)?;
                m[i][j] = num / prev;
            }
        }
        prev = m[k][k];
    }
    Some(if n == 0 { 1 } else { sign * m[n - 1][n - 1] })
}

/// Exact determinant of a small integer matrix; `i128` fast path with a
/// big-integer fallback on overflow.
pub fn det_i64(a: &[Vec<i64>]) -> BigInt {
    match bareiss_i128(a) {
        Some(d) => BigInt::from(d),
        None => bareiss_bigint(a.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()),
    }
}

/// Sign (-1, 0, 1) of an integer determinant.
pub fn det_sign_i64(a: &[Vec<i64>]) -> i32 {
    let d = det_i64(a);
    if d.is_zero() {
        0
    } else if d.is_positive() {
        1
    } else {
        -1
    }
}

/// A strictly positive `v` with `M v = 0`, as a primitive integer vector,
/// or `None` if the network is not consistent.
///
/// Solves the feasibility problem `{M v = 0, v >= 1}` (equivalent by
/// scaling) with a phase-one simplex in exact arithmetic, Bland's rule.
pub fn positive_kernel_vector(m: &RationalMatrix) -> Option<Vec<BigInt>> {
    let (rows, cols) = (m.rows, m.cols);
    if cols == 0 {
        return Some(Vec::new());
    }
    // v = 1 + u, u >= 0:  M u = -M 1.
    let ones = vec![BigInt::one(); cols];
    let b: Vec<BigRational> = m.mul_int_vec(&ones).into_iter().map(|x| -x).collect();

    // Tableau columns: u (cols), artificials (rows), rhs.
    let width = cols + rows + 1;
    let mut t: Vec<Vec<BigRational>> = Vec::with_capacity(rows + 1);
    for i in 0..rows {
        let flip = b[i].is_negative();
        let mut row = vec![BigRational::zero(); width];
        for j in 0..cols {
            let x = m.get(i, j).clone();
            row[j] = if flip { -x } else { x };
        }
        row[cols + i] = BigRational::one();
        row[width - 1] = if flip { -b[i].clone() } else { b[i].clone() };
        t.push(row);
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();
    // Phase-one objective: minimize the sum of artificials, stored as the
    // reduced-cost row of "max -sum a".
    let mut obj = vec![BigRational::zero(); width];
    for row in &t {
        for j in 0..width {
            if j < cols || j == width - 1 {
                obj[j] = &obj[j] - &row[j];
            }
        }
    }

    loop {
        // Bland: lowest-index column with negative reduced cost.
        let Some(enter) = (0..width - 1).find(|&j| obj[j].is_negative()) else { break };
        let mut leave: Option<(usize, BigRational)> = None;
        for (i, row) in t.iter().enumerate() {
            if row[enter].is_positive() {
                let ratio = &row[width - 1] / &row[enter];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        // The phase-one objective is bounded below by zero.
        let (pr, _) = leave.expect("phase-one simplex is bounded");
        let piv = t[pr][enter].clone();
        for x in t[pr].iter_mut() {
            *x = &*x / &piv;
        }
        let pivot_row = t[pr].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != pr && !row[enter].is_zero() {
                let f = row[enter].clone();
                for j in 0..width {
                    row[j] = &row[j] - &f * &pivot_row[j];
                }
            }
        }
        if !obj[enter].is_zero() {
            let f = obj[enter].clone();
            for j in 0..width {
                obj[j] = &obj[j] - &f * &pivot_row[j];
            }
        }
        basis[pr] = enter;
    }

    if !obj[width - 1].is_zero() {
        return None;
    }
    let mut v: Vec<BigRational> = vec![BigRational::one(); cols];
    for (i, &bj) in basis.iter().enumerate() {
        if bj < cols {
            v[bj] = &v[bj] + &t[i][width - 1];
        }
    }
    let lcm = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| x.numer() * (&lcm / x.denom())).collect();
    Some(primitive(ints))
}
