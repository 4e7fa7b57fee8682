//! Dense linear algebra over R, C and H.
//!
//! Convention: vectors are columns, scalars multiply them on the right and
//! matrices act on the left. Row operations in elimination multiply rows
//! on the left, which keeps Gaussian elimination valid over H.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{AlgebraTag, Group, Scalar};

/// Pivot magnitude below `SINGULAR_REL * max|entry|` declares a matrix singular.
pub const SINGULAR_REL: f64 = 1e-12;

/// Max-entry unitarity residual accepted for a [`GroupElement`].
pub const UNITARY_TOL: f64 = 1e-10;

/// Dense row-major matrix over a division algebra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KMatrixRepr", into = "KMatrixRepr")]
pub struct KMatrix {
    algebra: AlgebraTag,
    rows: usize,
    cols: usize,
    data: Vec<Scalar>,
}

#[derive(Serialize, Deserialize)]
struct KMatrixRepr {
    algebra: AlgebraTag,
    rows: usize,
    cols: usize,
    entries: Vec<[f64; 4]>,
}

impl TryFrom<KMatrixRepr> for KMatrix {
    type Error = Error;

    fn try_from(r: KMatrixRepr) -> Result<Self> {
        let data = r.entries.into_iter().map(|c| Scalar { c }).collect();
        KMatrix::from_vec(r.algebra, r.rows, r.cols, data)
    }
}

impl From<KMatrix> for KMatrixRepr {
    fn from(m: KMatrix) -> Self {
        KMatrixRepr {
            algebra: m.algebra,
            rows: m.rows,
            cols: m.cols,
            entries: m.data.into_iter().map(|s| s.c).collect(),
        }
    }
}

impl KMatrix {
    pub fn zeros(algebra: AlgebraTag, rows: usize, cols: usize) -> Self {
        KMatrix { algebra, rows, cols, data: vec![Scalar::ZERO; rows * cols] }
    }

    pub fn identity(algebra: AlgebraTag, n: usize) -> Self {
        let mut m = Self::zeros(algebra, n, n);
        for i in 0..n {
            m.data[i * n + i] = Scalar::ONE;
        }
        m
    }

    pub fn from_vec(algebra: AlgebraTag, rows: usize, cols: usize, data: Vec<Scalar>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim("KMatrix", "rows and cols must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::dim(
                "KMatrix",
                format!("{} entries for a {rows}x{cols} matrix", data.len()),
            ));
        }
        if let Some(bad) = data.iter().find(|s| !s.lies_in(algebra)) {
            return Err(Error::Domain(format!("entry {:?} does not lie in {algebra}", bad.c)));
        }
        Ok(KMatrix { algebra, rows, cols, data })
    }

    pub fn from_fn(algebra: AlgebraTag, rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Scalar) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        KMatrix { algebra, rows, cols, data }
    }

    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        Self::from_vec(AlgebraTag::R, rows, cols, values.iter().map(|&x| Scalar::real(x)).collect())
    }

    pub fn from_complex(rows: usize, cols: usize, values: &[Complex64]) -> Result<Self> {
        Self::from_vec(AlgebraTag::C, rows, cols, values.iter().map(|&z| Scalar::from_c64(z)).collect())
    }

    pub fn diag(algebra: AlgebraTag, values: &[Scalar]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(algebra, n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    #[inline]
    pub fn algebra(&self) -> AlgebraTag {
        self.algebra
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[Scalar] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Scalar {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Scalar) {
        self.data[i * self.cols + j] = v;
    }

    pub fn adjoint(&self) -> KMatrix {
        KMatrix::from_fn(self.algebra, self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn scale(&self, s: f64) -> KMatrix {
        KMatrix { data: self.data.iter().map(|x| x.scale(s)).collect(), ..self.clone() }
    }

    /// `1 + self`.
    pub fn plus_identity(&self) -> KMatrix {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m.data[i * self.cols + i] += Scalar::ONE;
        }
        m
    }

    /// `1 - self`.
    pub fn identity_minus(&self) -> KMatrix {
        let mut m = self.scale(-1.0);
        for i in 0..self.rows.min(self.cols) {
            m.data[i * self.cols + i] += Scalar::ONE;
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|s| s.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &KMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (*a - *b).abs()).fold(0.0, f64::max)
    }

    /// Max-entry difference scaled by `max(1, max|self|, max|other|)`.
    pub fn rel_diff(&self, other: &KMatrix) -> f64 {
        let scale = 1f64.max(self.max_abs()).max(other.max_abs());
        self.max_abs_diff(other) / scale
    }

    pub fn trace(&self) -> Scalar {
        (0..self.rows.min(self.cols)).fold(Scalar::ZERO, |acc, i| acc + self.get(i, i))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|s| s.is_finite())
    }

    /// Copy of the `rows x cols` block whose top-left corner is `(r0, c0)`.
    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Result<KMatrix> {
        if rows == 0 || cols == 0 || r0 + rows > self.rows || c0 + cols > self.cols {
            return Err(Error::dim(
                "submatrix",
                format!("block {rows}x{cols} at ({r0},{c0}) of a {}x{} matrix", self.rows, self.cols),
            ));
        }
        Ok(KMatrix::from_fn(self.algebra, rows, cols, |i, j| self.get(r0 + i, c0 + j)))
    }

    /// Assembles `(A B; C D)`.
    pub fn from_blocks(a: &KMatrix, b: &KMatrix, c: &KMatrix, d: &KMatrix) -> Result<KMatrix> {
        if a.rows != b.rows || c.rows != d.rows || a.cols != c.cols || b.cols != d.cols {
            return Err(Error::dim("from_blocks", "blocks are not conformable"));
        }
        let alg = a.algebra;
        if [b, c, d].iter().any(|m| m.algebra != alg) {
            return Err(Error::dim("from_blocks", "blocks over different algebras"));
        }
        let (p, q) = (a.rows, a.cols);
        Ok(KMatrix::from_fn(alg, p + c.rows, q + b.cols, |i, j| match (i < p, j < q) {
            (true, true) => a.get(i, j),
            (true, false) => b.get(i, j - q),
            (false, true) => c.get(i - p, j),
            (false, false) => d.get(i - p, j - q),
        }))
    }

    /// `diag(1_k, self)`: embeds into the lower-right corner of a larger identity.
    pub fn embed_lower_right(&self, k: usize) -> KMatrix {
        let n = self.rows + k;
        KMatrix::from_fn(self.algebra, n, n, |i, j| {
            if i < k || j < k {
                if i == j { Scalar::ONE } else { Scalar::ZERO }
            } else {
                self.get(i - k, j - k)
            }
        })
    }

    pub fn matmul(&self, other: &KMatrix) -> Result<KMatrix> {
        if self.cols != other.rows {
            return Err(Error::dim(
                "matmul",
                format!("{}x{} times {}x{}", self.rows, self.cols, other.rows, other.cols),
            ));
        }
        if self.algebra != other.algebra {
            return Err(Error::dim("matmul", "operands over different algebras"));
        }
        let mut out = KMatrix::zeros(self.algebra, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == Scalar::ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    fn zip_with(&self, other: &KMatrix, op: &'static str, f: impl Fn(Scalar, Scalar) -> Scalar) -> Result<KMatrix> {
        if (self.rows, self.cols) != (other.rows, other.cols) || self.algebra != other.algebra {
            return Err(Error::dim(op, "operands are not conformable"));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(KMatrix { data, ..self.clone() })
    }

    pub fn try_add(&self, other: &KMatrix) -> Result<KMatrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn try_sub(&self, other: &KMatrix) -> Result<KMatrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    /// Max-entry residual of `self* self - 1`.
    pub fn unitarity_residual(&self) -> f64 {
        match self.adjoint().matmul(self) {
            Ok(p) => p.max_abs_diff(&KMatrix::identity(self.algebra, self.cols)),
            Err(_) => f64::INFINITY,
        }
    }
}

impl fmt::Display for KMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let used = self.algebra.dim();
        for i in 0..self.rows {
            f.write_str("[")?;
            for j in 0..self.cols {
                if j > 0 {
                    f.write_str(", ")?;
                }
                let s = self.get(i, j);
                if used == 1 {
                    write!(f, "{:.6}", s.c[0])?;
                } else {
                    write!(f, "{:?}", &s.c[..used])?;
                }
            }
            f.write_str("]\n")?;
        }
        Ok(())
    }
}

impl Mul for &KMatrix {
    type Output = KMatrix;
    fn mul(self, rhs: &KMatrix) -> KMatrix {
        self.matmul(rhs).expect("matmul: incompatible operands")
    }
}

impl Add for &KMatrix {
    type Output = KMatrix;
    fn add(self, rhs: &KMatrix) -> KMatrix {
        self.try_add(rhs).expect("add: incompatible operands")
    }
}

impl Sub for &KMatrix {
    type Output = KMatrix;
    fn sub(self, rhs: &KMatrix) -> KMatrix {
        self.try_sub(rhs).expect("sub: incompatible operands")
    }
}

/// A square matrix certified to lie in U°(n, K).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    matrix: KMatrix,
    group: Group,
}

impl GroupElement {
    /// Checks unitarity (and `det = 1` for SO) within [`UNITARY_TOL`].
    pub fn new(matrix: KMatrix, group: Group) -> Result<Self> {
        Self::with_tolerance(matrix, group, UNITARY_TOL)
    }

    pub fn with_tolerance(matrix: KMatrix, group: Group, tol: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::dim("GroupElement", "matrix is not square"));
        }
        if matrix.algebra() != group.algebra() {
            return Err(Error::Domain(format!("{group} needs entries in {}", group.algebra())));
        }
        let res = matrix.unitarity_residual();
        if !(res <= tol) {
            return Err(Error::Domain(format!("not unitary: residual {res:e} exceeds {tol:e}")));
        }
        if group == Group::SO {
            let d = det(&matrix)?.re;
            if (d - 1.0).abs() > tol {
                return Err(Error::Domain(format!("orthogonal matrix with det {d}, expected +1")));
            }
        }
        Ok(GroupElement { matrix, group })
    }

    pub fn identity(group: Group, n: usize) -> Self {
        GroupElement { matrix: KMatrix::identity(group.algebra(), n), group }
    }

    pub(crate) fn new_unchecked(matrix: KMatrix, group: Group) -> Self {
        GroupElement { matrix, group }
    }

    pub fn matrix(&self) -> &KMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> KMatrix {
        self.matrix
    }

    pub fn group(&self) -> Group {
        self.group
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    /// `diag(1_k, self)`.
    pub fn embed_lower_right(&self, k: usize) -> GroupElement {
        GroupElement { matrix: self.matrix.embed_lower_right(k), group: self.group }
    }

    pub fn mul(&self, other: &GroupElement) -> Result<GroupElement> {
        if self.group != other.group {
            return Err(Error::dim("GroupElement::mul", "elements of different groups"));
        }
        Ok(GroupElement { matrix: self.matrix.matmul(&other.matrix)?, group: self.group })
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement { matrix: self.matrix.adjoint(), group: self.group }
    }
}

/// `[M]_p`, the top-left `p x p` block.
pub fn block_upper_left(m: &KMatrix, p: usize) -> Result<KMatrix> {
    if p == 0 || p > m.rows().min(m.cols()) {
        return Err(Error::dim("block_upper_left", format!("p={p} for a {}x{} matrix", m.rows(), m.cols())));
    }
    m.submatrix(0, 0, p, p)
}

/// `{M}_p`, the bottom-right `p x p` block.
pub fn block_lower_right(m: &KMatrix, p: usize) -> Result<KMatrix> {
    if p == 0 || p > m.rows().min(m.cols()) {
        return Err(Error::dim("block_lower_right", format!("p={p} for a {}x{} matrix", m.rows(), m.cols())));
    }
    m.submatrix(m.rows() - p, m.cols() - p, p, p)
}

/// Gauss–Jordan inverse with partial pivoting and left row operations.
pub fn invert(m: &KMatrix) -> Result<KMatrix> {
    if !m.is_square() {
        return Err(Error::dim("invert", "matrix is not square"));
    }
    let n = m.rows();
    let threshold = SINGULAR_REL * m.max_abs();
    let mut a = m.clone();
    let mut inv = KMatrix::identity(m.algebra(), n);
    for col in 0..n {
        let (piv_row, piv_abs) = (col..n)
            .map(|r| (r, a.get(r, col).abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(piv_abs > threshold) || piv_abs == 0.0 {
            return Err(Error::singular("invert", piv_abs));
        }
        if piv_row != col {
            swap_rows(&mut a, piv_row, col);
            swap_rows(&mut inv, piv_row, col);
        }
        let pinv = a.get(col, col).inv().expect("nonzero pivot");
        scale_row_left(&mut a, col, pinv);
        scale_row_left(&mut inv, col, pinv);
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a.get(r, col);
            if f == Scalar::ZERO {
                continue;
            }
            axpy_row_left(&mut a, r, col, f);
            axpy_row_left(&mut inv, r, col, f);
        }
    }
    Ok(inv)
}

fn swap_rows(m: &mut KMatrix, r1: usize, r2: usize) {
    let c = m.cols;
    for j in 0..c {
        m.data.swap(r1 * c + j, r2 * c + j);
    }
}

/// row_r <- s * row_r
fn scale_row_left(m: &mut KMatrix, r: usize, s: Scalar) {
    let c = m.cols;
    for v in &mut m.data[r * c..(r + 1) * c] {
        *v = s * *v;
    }
}

/// row_dst <- row_dst - f * row_src
fn axpy_row_left(m: &mut KMatrix, dst: usize, src: usize, f: Scalar) {
    let c = m.cols;
    for j in 0..c {
        let s = m.data[src * c + j];
        m.data[dst * c + j] -= f * s;
    }
}

/// Which pivot block the Frobenius block-inverse formula eliminates through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrobeniusPivot {
    /// Uses `A⁻¹` and the Schur complement `D - C A⁻¹ B`.
    A,
    /// Uses `D⁻¹` and the Schur complement `A - B D⁻¹ C`.
    D,
}

/// The four blocks of an inverse `(A B; C D)⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockInverse {
    pub top_left: KMatrix,
    pub top_right: KMatrix,
    pub bottom_left: KMatrix,
    pub bottom_right: KMatrix,
}

impl BlockInverse {
    pub fn assemble(&self) -> Result<KMatrix> {
        KMatrix::from_blocks(&self.top_left, &self.top_right, &self.bottom_left, &self.bottom_right)
    }
}

/// Block inverse through Schur complements (Frobenius formula).
pub fn frobenius_inverse(
    a: &KMatrix,
    b: &KMatrix,
    c: &KMatrix,
    d: &KMatrix,
    pivot: FrobeniusPivot,
) -> Result<BlockInverse> {
    if !a.is_square() || !d.is_square() {
        return Err(Error::dim("frobenius_inverse", "diagonal blocks must be square"));
    }
    // validates conformability
    KMatrix::from_blocks(a, b, c, d)?;
    match pivot {
        FrobeniusPivot::A => {
            let ai = invert(a).map_err(|e| e.at_step("A"))?;
            let ai_b = &ai * b;
            let c_ai = c * &ai;
            let s = d - &(c * &ai_b);
            let si = invert(&s).map_err(|e| e.at_step("D - C A^-1 B"))?;
            let tr = (&ai_b * &si).scale(-1.0);
            let bl = (&si * &c_ai).scale(-1.0);
            let tl = &ai + &(&(&ai_b * &si) * &c_ai);
            Ok(BlockInverse { top_left: tl, top_right: tr, bottom_left: bl, bottom_right: si })
        }
        FrobeniusPivot::D => {
            let di = invert(d).map_err(|e| e.at_step("D"))?;
            let b_di = b * &di;
            let di_c = &di * c;
            let s = a - &(&b_di * c);
            let si = invert(&s).map_err(|e| e.at_step("A - B D^-1 C"))?;
            let tr = (&si * &b_di).scale(-1.0);
            let bl = (&di_c * &si).scale(-1.0);
            let br = &di + &(&(&di_c * &si) * &b_di);
            Ok(BlockInverse { top_left: si, top_right: tr, bottom_left: bl, bottom_right: br })
        }
    }
}

/// The real `δn x δm` matrix of the R-linear map `x ↦ M x`, δ = dim K.
///
/// Each entry becomes the top-left `δ x δ` block of its left-multiplication
/// matrix; the map is an algebra homomorphism and sends adjoints to
/// transposes.
pub fn real_embedding(m: &KMatrix) -> KMatrix {
    let d = m.algebra().dim();
    let (r, c) = (m.rows(), m.cols());
    let mut out = KMatrix::zeros(AlgebraTag::R, r * d, c * d);
    for i in 0..r {
        for j in 0..c {
            let l = m.get(i, j).left_mul_matrix();
            for a in 0..d {
                for b in 0..d {
                    out.set(i * d + a, j * d + b, Scalar::real(l[a][b]));
                }
            }
        }
    }
    out
}

fn real_entries(m: &KMatrix) -> Vec<f64> {
    m.entries().iter().map(|s| s.re()).collect()
}

/// LU determinant of a real matrix given row-major.
fn real_lu_det(mut a: Vec<f64>, n: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs())).unwrap();
        let p = a[piv * n + col];
        if p == 0.0 {
            return 0.0;
        }
        if piv != col {
            for j in 0..n {
                a.swap(piv * n + j, col * n + j);
            }
            det = -det;
        }
        det *= p;
        for r in col + 1..n {
            let f = a[r * n + col] / p;
            if f != 0.0 {
                for j in col..n {
                    a[r * n + j] -= f * a[col * n + j];
                }
            }
        }
    }
    det
}

/// Determinant: signed real for R, complex for C, `(det M_R)^{1/4} >= 0` for H.
pub fn det(m: &KMatrix) -> Result<Complex64> {
    if !m.is_square() {
        return Err(Error::dim("det", "matrix is not square"));
    }
    let n = m.rows();
    match m.algebra() {
        AlgebraTag::R => Ok(Complex64::new(real_lu_det(real_entries(m), n), 0.0)),
        AlgebraTag::C => {
            let mut a: Vec<Complex64> = m.entries().iter().map(|s| s.to_c64()).collect();
            let mut det = Complex64::new(1.0, 0.0);
            for col in 0..n {
                let piv = (col..n).max_by(|&x, &y| a[x * n + col].norm().total_cmp(&a[y * n + col].norm())).unwrap();
                let p = a[piv * n + col];
                if p == Complex64::new(0.0, 0.0) {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                if piv != col {
                    for j in 0..n {
                        a.swap(piv * n + j, col * n + j);
                    }
                    det = -det;
                }
                det *= p;
                for r in col + 1..n {
                    let f = a[r * n + col] / p;
                    for j in col..n {
                        let t = a[col * n + j];
                        a[r * n + j] -= f * t;
                    }
                }
            }
            Ok(det)
        }
        AlgebraTag::H => {
            let e = real_embedding(m);
            let d = real_lu_det(real_entries(&e), 4 * n);
            let scale = e.max_abs().max(1.0).powi(4 * n as i32);
            if d < -1e-9 * scale {
                return Err(Error::Consistency(format!("quaternionic real-embedded determinant is negative: {d:e}")));
            }
            Ok(Complex64::new(d.max(0.0).powf(0.25), 0.0))
        }
    }
}

/// Cayley transform `S = (g - 1)(g + 1)⁻¹`.
pub fn cayley(g: &KMatrix) -> Result<KMatrix> {
    if !g.is_square() {
        return Err(Error::dim("cayley", "matrix is not square"));
    }
    let n = g.rows();
    let inv = invert(&g.plus_identity()).map_err(|e| e.at_step("1 + g"))?;
    let gm1 = g - &KMatrix::identity(g.algebra(), n);
    Ok(&gm1 * &inv)
}

/// Inverse Cayley transform `g = (1 + S)(1 - S)⁻¹`.
pub fn inverse_cayley(s: &KMatrix) -> Result<KMatrix> {
    let inv = invert(&s.identity_minus()).map_err(|e| e.at_step("1 - S"))?;
    Ok(&s.plus_identity() * &inv)
}

pub const NORM_REL_TOL: f64 = 1e-12;
pub const NORM_MAX_ITER: usize = 10_000;

/// Largest singular value, by power iteration on `M_Rᵀ M_R`.
pub fn operator_norm(m: &KMatrix) -> Result<f64> {
    let e = real_embedding(m);
    let (r, c) = (e.rows(), e.cols());
    let a = real_entries(&e);
    if a.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    // fixed, generic start vector
    let mut v: Vec<f64> = (0..c).map(|i| 1.0 + 0.37 * ((i as f64) * 1.618).sin()).collect();
    normalize(&mut v);
    let mut w = vec![0.0; r];
    let mut prev = f64::NAN;
    for _ in 0..NORM_MAX_ITER {
        for i in 0..r {
            w[i] = (0..c).map(|j| a[i * c + j] * v[j]).sum();
        }
        let lambda: f64 = w.iter().map(|x| x * x).sum();
        for j in 0..c {
            v[j] = (0..r).map(|i| a[i * c + j] * w[i]).sum();
        }
        if normalize(&mut v) == 0.0 {
            return Ok(0.0);
        }
        if (lambda - prev).abs() <= NORM_REL_TOL * lambda {
            return Ok(lambda.sqrt());
        }
        prev = lambda;
    }
    Err(Error::Numeric(format!("operator_norm: power iteration did not converge in {NORM_MAX_ITER} steps")))
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Cholesky factorisation of a Hermitian matrix `A = L L*`.
///
/// Returns the determinant `∏ L_jj²` (the K-determinant of `A`) when `A` is
/// positive definite and `None` otherwise.
pub fn hermitian_pd_det(a: &KMatrix) -> Option<f64> {
    let n = a.rows();
    let mut l = vec![Scalar::ZERO; n * n];
    let mut det = 1.0;
    for j in 0..n {
        let mut d = a.get(j, j).re();
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > 0.0) {
            return None;
        }
        let ljj = d.sqrt();
        det *= d;
        l[j * n + j] = Scalar::real(ljj);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s.scale(1.0 / ljj);
        }
    }
    Some(det)
}

/// `det(1 - Z* Z)` when `‖Z‖ < 1`, `None` otherwise.
pub fn contraction_defect_det(z: &KMatrix) -> Option<f64> {
    let zz = &z.adjoint() * z;
    hermitian_pd_det(&zz.identity_minus())
}

/// Both sides of `det(1 - Z*Z) = det(2(X + X*)) / |det(1 + X)|²`
/// with `Z = (1 - X)(1 + X)⁻¹`.
pub fn dissipative_det_identity_check(x: &KMatrix) -> Result<(f64, f64)> {
    if !x.is_square() {
        return Err(Error::dim("dissipative_det_identity_check", "matrix is not square"));
    }
    let one_plus = x.plus_identity();
    let inv = invert(&one_plus).map_err(|e| e.at_step("1 + X"))?;
    let z = &x.identity_minus() * &inv;
    let zz = &z.adjoint() * &z;
    let lhs = det(&zz.identity_minus())?;
    let herm2 = (x + &x.adjoint()).scale(2.0);
    let num = det(&herm2)?;
    let den = det(&one_plus)?.norm_sqr();
    Ok((lhs.re, num.re / den))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(rows: usize, cols: usize, v: &[f64]) -> KMatrix {
        KMatrix::from_real(rows, cols, v).unwrap()
    }

    #[test]
    fn blocks_on_small_cases() {
        let m = real(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(block_upper_left(&m, 1).unwrap(), real(1, 1, &[1.0]));
        assert_eq!(block_upper_left(&m, 2).unwrap(), m);
        assert_eq!(block_lower_right(&m, 1).unwrap(), real(1, 1, &[4.0]));
        assert_eq!(block_lower_right(&m, 2).unwrap(), m);
        let i3 = KMatrix::identity(AlgebraTag::R, 3);
        assert_eq!(block_upper_left(&i3, 2).unwrap(), KMatrix::identity(AlgebraTag::R, 2));
        assert_eq!(block_lower_right(&i3, 3).unwrap(), i3);
        assert!(matches!(block_upper_left(&m, 3), Err(Error::Dimension { .. })));
        assert!(matches!(block_lower_right(&m, 0), Err(Error::Dimension { .. })));
    }

    #[test]
    fn invert_examples() {
        let i = KMatrix::identity(AlgebraTag::H, 3);
        assert_eq!(invert(&i).unwrap(), i);
        let m = real(2, 2, &[2.0, 1.0, 1.0, 1.0]);
        let inv = invert(&m).unwrap();
        assert!(inv.max_abs_diff(&real(2, 2, &[1.0, -1.0, -1.0, 2.0])) < 1e-15);
        let qi = KMatrix::from_vec(AlgebraTag::H, 1, 1, vec![Scalar::I]).unwrap();
        let inv = invert(&qi).unwrap();
        assert_eq!(inv.get(0, 0), -Scalar::I);
    }

    #[test]
    fn invert_reports_singular_pivot() {
        let m = real(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        match invert(&m) {
            Err(Error::Singular { pivot, .. }) => assert!(pivot < 1e-11),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn invert_quaternion_matrix() {
        let m = KMatrix::from_vec(
            AlgebraTag::H,
            2,
            2,
            vec![
                Scalar::new(1.0, 2.0, -0.5, 0.3),
                Scalar::new(0.0, 0.4, 1.0, -1.0),
                Scalar::new(-0.7, 0.1, 0.2, 2.0),
                Scalar::new(0.5, -1.5, 0.9, 0.0),
            ],
        )
        .unwrap();
        let inv = invert(&m).unwrap();
        let i = KMatrix::identity(AlgebraTag::H, 2);
        assert!((&m * &inv).max_abs_diff(&i) < 1e-12);
        assert!((&inv * &m).max_abs_diff(&i) < 1e-12);
    }

    #[test]
    fn frobenius_scalar_examples() {
        let one = real(1, 1, &[1.0]);
        let zero = real(1, 1, &[0.0]);
        let blocks = frobenius_inverse(&one, &zero, &zero, &one, FrobeniusPivot::A).unwrap();
        assert_eq!(blocks.assemble().unwrap(), KMatrix::identity(AlgebraTag::R, 2));

        let a = real(1, 1, &[2.0]);
        let b = real(1, 1, &[1.0]);
        let blocks = frobenius_inverse(&a, &b, &b, &b, FrobeniusPivot::A).unwrap();
        assert!((blocks.bottom_right.get(0, 0).re() - 2.0).abs() < 1e-15);
        let blocks_d = frobenius_inverse(&a, &b, &b, &b, FrobeniusPivot::D).unwrap();
        assert!(blocks_d.assemble().unwrap().max_abs_diff(&blocks.assemble().unwrap()) < 1e-14);
    }

    #[test]
    fn frobenius_singular_pivot() {
        let zero = real(1, 1, &[0.0]);
        let one = real(1, 1, &[1.0]);
        assert!(frobenius_inverse(&zero, &one, &one, &one, FrobeniusPivot::A).unwrap_err().is_singular());
    }

    #[test]
    fn det_examples() {
        for alg in AlgebraTag::ALL {
            for n in 1..5 {
                let d = det(&KMatrix::identity(alg, n)).unwrap();
                assert!((d - Complex64::new(1.0, 0.0)).norm() < 1e-14);
            }
        }
        let q = [Scalar::new(1.0, 2.0, 0.0, -1.0), Scalar::new(0.0, 0.0, 3.0, 0.0), Scalar::new(0.5, 0.5, 0.5, 0.5)];
        let d = det(&KMatrix::diag(AlgebraTag::H, &q)).unwrap().re;
        let expect: f64 = q.iter().map(|s| s.abs()).product();
        assert!((d - expect).abs() < 1e-13 * expect);
        let qi = KMatrix::from_vec(AlgebraTag::H, 1, 1, vec![Scalar::I]).unwrap();
        assert!((det(&qi).unwrap().re - 1.0).abs() < 1e-15);
        let m = real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!((det(&m).unwrap().re + 1.0).abs() < 1e-15);
    }

    #[test]
    fn real_embedding_examples() {
        let one = KMatrix::identity(AlgebraTag::H, 1);
        assert_eq!(real_embedding(&one), KMatrix::identity(AlgebraTag::R, 4));
        let i = KMatrix::from_vec(AlgebraTag::H, 1, 1, vec![Scalar::I]).unwrap();
        let j = KMatrix::from_vec(AlgebraTag::H, 1, 1, vec![Scalar::J]).unwrap();
        let k = KMatrix::from_vec(AlgebraTag::H, 1, 1, vec![Scalar::K]).unwrap();
        let prod = &real_embedding(&i) * &real_embedding(&j);
        assert!(prod.max_abs_diff(&real_embedding(&k)) < 1e-15);
        let m = KMatrix::from_vec(
            AlgebraTag::H,
            1,
            2,
            vec![Scalar::new(1.0, 2.0, 3.0, 4.0), Scalar::new(-1.0, 0.5, 0.0, 2.0)],
        )
        .unwrap();
        let lhs = real_embedding(&m.adjoint());
        let rhs = real_embedding(&m).adjoint();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn cayley_examples() {
        let i = KMatrix::identity(AlgebraTag::C, 3);
        assert!(cayley(&i).unwrap().max_abs() < 1e-15);
        let g = KMatrix::from_vec(AlgebraTag::C, 1, 1, vec![Scalar::complex(0.0, -1.0)]).unwrap();
        let s = cayley(&g).unwrap();
        assert!((s.get(0, 0) - Scalar::complex(0.0, -1.0)).abs() < 1e-15);
        let t: f64 = 0.7;
        let r = real(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        let s = cayley(&r).unwrap();
        assert!((&s + &s.adjoint()).max_abs() < 1e-15);
        let minus = KMatrix::identity(AlgebraTag::R, 2).scale(-1.0);
        assert!(cayley(&minus).unwrap_err().is_singular());
    }

    #[test]
    fn operator_norm_examples() {
        assert!((operator_norm(&KMatrix::identity(AlgebraTag::H, 3)).unwrap() - 1.0).abs() < 1e-12);
        let d = real(2, 2, &[0.5, 0.0, 0.0, 0.2]);
        assert!((operator_norm(&d).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(operator_norm(&KMatrix::zeros(AlgebraTag::C, 2, 3)).unwrap(), 0.0);
    }

    #[test]
    fn dissipative_scalar_examples() {
        let (l, r) = dissipative_det_identity_check(&KMatrix::identity(AlgebraTag::R, 1)).unwrap();
        assert!((l - 1.0).abs() < 1e-15 && (r - 1.0).abs() < 1e-15);
        let (l, r) = dissipative_det_identity_check(&real(1, 1, &[2.0])).unwrap();
        assert!((l - 8.0 / 9.0).abs() < 1e-15 && (r - 8.0 / 9.0).abs() < 1e-15);
        let minus = real(1, 1, &[-1.0]);
        assert!(dissipative_det_identity_check(&minus).unwrap_err().is_singular());
    }

    #[test]
    fn contraction_defect_matches_direct() {
        let z = real(2, 2, &[0.3, -0.2, 0.1, 0.5]);
        let zz = &z.adjoint() * &z;
        let direct = det(&zz.identity_minus()).unwrap().re;
        let chol = contraction_defect_det(&z).unwrap();
        assert!((direct - chol).abs() < 1e-14);
        assert!(contraction_defect_det(&real(1, 1, &[1.2])).is_none());
    }

    #[test]
    fn json_shape() {
        let m = KMatrix::from_complex(1, 2, &[Complex64::new(1.5, -2.0), Complex64::new(0.0, 0.25)]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"algebra":"C","rows":1,"cols":2,"entries":[[1.5,-2.0,0.0,0.0],[0.0,0.25,0.0,0.0]]}"#);
        let bad = r#"{"algebra":"R","rows":1,"cols":1,"entries":[[1.0,2.0,0.0,0.0]]}"#;
        assert!(serde_json::from_str::<KMatrix>(bad).is_err());
        let short = r#"{"algebra":"R","rows":2,"cols":1,"entries":[[1.0,0.0,0.0,0.0]]}"#;
        assert!(serde_json::from_str::<KMatrix>(short).is_err());
    }

    #[test]
    fn group_element_validation() {
        let refl = real(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(GroupElement::new(refl.clone(), Group::SO).is_err());
        let t: f64 = 1.1;
        let rot = real(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        assert!(GroupElement::new(rot.clone(), Group::SO).is_ok());
        assert!(GroupElement::new(rot, Group::U).is_err());
        assert!(GroupElement::new(real(2, 2, &[1.0, 0.1, 0.0, 1.0]), Group::SO).is_err());
    }
}
