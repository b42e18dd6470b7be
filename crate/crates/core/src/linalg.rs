//! Small dense real-matrix kernels.
//!
//! Everything here works on square matrices of dimension at most
//! [`MAX_DIM`]. The routines favour clarity over blocking or SIMD; the
//! matrices in this crate are the state dimension of the monitored process,
//! which is tiny.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Largest supported square dimension.
pub const MAX_DIM: usize = 16;

/// Dense row-major real matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self[(i, j)])?;
            }
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Matrix {
    /// Builds a matrix from row-major entries, rejecting NaN/Inf.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("matrix", "dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    /// Square matrix from row-major entries.
    pub fn square(k: usize, data: Vec<f64>) -> Result<Self> {
        if k > MAX_DIM {
            return Err(Error::TooLarge(k));
        }
        Self::new(k, k, data)
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::invalid("matrix", "ragged rows"));
        }
        Self::new(r, c, rows.iter().flat_map(|row| row.iter().copied()).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(k: usize) -> Self {
        let mut m = Self::zeros(k, k);
        for i in 0..k {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn scalar(x: f64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![x],
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn ensure_square(&self) -> Result<usize> {
        if !self.is_square() {
            return Err(Error::NonSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(self.rows)
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Matrix product. Panics on incompatible shapes.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == 0.0 {
                    continue;
                }
                let row = &rhs.data[l * rhs.cols..(l + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s·I`.
    pub fn add_diag(&self, s: f64) -> Matrix {
        let mut out = self.clone();
        for i in 0..self.rows.min(self.cols) {
            out[(i, i)] += s;
        }
        out
    }

    fn zip_with(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "elementwise shape mismatch"
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs().max(1.0);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self[(i, j)] - self[(j, i)]).abs() > tol * scale {
                    return false;
                }
            }
        }
        true
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetrize(&self) -> Matrix {
        let t = self.transpose();
        self.add(&t).scale(0.5)
    }

    /// `self · X · selfᵀ`.
    pub fn congruence(&self, x: &Matrix) -> Matrix {
        self.matmul(x).matmul(&self.transpose())
    }

    /// Solves `self · X = b` by LU with partial pivoting.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        let n = self.ensure_square()?;
        if b.rows != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.rows,
            });
        }
        let lu = Lu::factor(self)?;
        Ok(lu.solve(b))
    }

    pub fn inverse(&self) -> Result<Matrix> {
        let n = self.ensure_square()?;
        self.solve(&Matrix::identity(n))
    }

    /// The entry of a 1×1 matrix.
    pub fn as_scalar(&self) -> Option<f64> {
        (self.rows == 1 && self.cols == 1).then(|| self.data[0])
    }
}

struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(a: &Matrix) -> Result<Self> {
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        if scale == 0.0 {
            return Err(Error::Singular);
        }
        for col in 0..n {
            let (pivot, pivot_abs) = (col..n)
                .map(|r| (r, lu[r * n + col].abs()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .expect("nonempty pivot range");
            if pivot_abs <= scale * 1e-14 * n as f64 {
                return Err(Error::Singular);
            }
            if pivot != col {
                for j in 0..n {
                    lu.swap(col * n + j, pivot * n + j);
                }
                perm.swap(col, pivot);
            }
            let d = lu[col * n + col];
            for r in (col + 1)..n {
                let f = lu[r * n + col] / d;
                lu[r * n + col] = f;
                if f != 0.0 {
                    for j in (col + 1)..n {
                        lu[r * n + j] -= f * lu[col * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    fn solve(&self, b: &Matrix) -> Matrix {
        let n = self.n;
        let mut x = Matrix::zeros(n, b.cols);
        for c in 0..b.cols {
            let mut y: Vec<f64> = self.perm.iter().map(|&p| b[(p, c)]).collect();
            for i in 0..n {
                let s: f64 = (0..i).map(|j| self.lu[i * n + j] * y[j]).sum();
                y[i] -= s;
            }
            for i in (0..n).rev() {
                let s: f64 = ((i + 1)..n).map(|j| self.lu[i * n + j] * y[j]).sum();
                y[i] = (y[i] - s) / self.lu[i * n + i];
            }
            for i in 0..n {
                x[(i, c)] = y[i];
            }
        }
        x
    }
}

// Padé coefficients and 1-norm thresholds from Higham (2005).
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(f64, usize); 4] = [
    (1.495585217958292e-2, 3),
    (2.539398330063230e-1, 5),
    (9.504178996162932e-1, 7),
    (2.097847961257068, 9),
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential `e^{A t}`.
///
/// Scaling and squaring with a diagonal Padé approximant of degree 3 to 13
/// chosen from the 1-norm of `A t`. A 1×1 input returns `exp(a t)` directly
/// and `t = 0` returns the identity exactly.
pub fn mat_exp(a: &Matrix, t: f64) -> Result<Matrix> {
    let n = a.ensure_square()?;
    if !t.is_finite() {
        return Err(Error::invalid("t", "must be finite"));
    }
    if t == 0.0 {
        return Ok(Matrix::identity(n));
    }
    if let Some(x) = a.as_scalar() {
        return Ok(Matrix::scalar((x * t).exp()));
    }
    let at = a.scale(t);
    let norm = at.norm_1();
    if norm == 0.0 {
        return Ok(Matrix::identity(n));
    }
    for &(theta, m) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low(&at, coeffs);
        }
    }
    let squarings = (norm / THETA13).log2().ceil().max(0.0) as i32;
    let scaled = at.scale(2f64.powi(-squarings));
    let mut r = pade13(&scaled)?;
    for _ in 0..squarings {
        r = r.matmul(&r);
    }
    Ok(r)
}

fn pade_low(a: &Matrix, b: &[f64]) -> Result<Matrix> {
    let n = a.rows();
    let a2 = a.matmul(a);
    // Even powers I, A², A⁴, ...
    let mut powers = vec![Matrix::identity(n), a2.clone()];
    while powers.len() < b.len() / 2 {
        let next = powers.last().expect("nonempty").matmul(&a2);
        powers.push(next);
    }
    let mut u = Matrix::zeros(n, n);
    let mut v = Matrix::zeros(n, n);
    for (i, p) in powers.iter().enumerate() {
        u = u.add(&p.scale(b[2 * i + 1]));
        v = v.add(&p.scale(b[2 * i]));
    }
    let u = a.matmul(&u);
    v.sub(&u).solve(&v.add(&u))
}

fn pade13(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let b = &PADE13;
    let id = Matrix::identity(n);
    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let inner_u = a6
        .scale(b[13])
        .add(&a4.scale(b[11]))
        .add(&a2.scale(b[9]));
    let u = a.matmul(
        &a6.matmul(&inner_u)
            .add(&a6.scale(b[7]))
            .add(&a4.scale(b[5]))
            .add(&a2.scale(b[3]))
            .add(&id.scale(b[1])),
    );
    let inner_v = a6
        .scale(b[12])
        .add(&a4.scale(b[10]))
        .add(&a2.scale(b[8]));
    let v = a6
        .matmul(&inner_v)
        .add(&a6.scale(b[6]))
        .add(&a4.scale(b[4]))
        .add(&a2.scale(b[2]))
        .add(&id.scale(b[0]));
    v.sub(&u).solve(&v.add(&u))
}

/// Solves `A X + X Aᵀ + Q = 0` for Hurwitz `A`.
///
/// The equation is vectorised into a `k² × k²` linear system and solved by
/// LU. The result is symmetrised.
pub fn lyapunov_solve(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let k = a.ensure_square()?;
    if k > MAX_DIM {
        return Err(Error::TooLarge(k));
    }
    let kq = q.ensure_square()?;
    if kq != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: kq,
        });
    }
    if !q.is_symmetric(1e-12) {
        return Err(Error::invalid("q", "must be symmetric"));
    }
    if !is_hurwitz(a) {
        return Err(Error::UnstableSystem);
    }
    kronecker_lyapunov(a, q).map_err(|e| match e {
        Error::Singular => Error::UnstableSystem,
        other => other,
    })
}

fn kronecker_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let k = a.rows();
    let n = k * k;
    let mut m = Matrix::zeros(n, n);
    for i in 0..k {
        for j in 0..k {
            let row = i * k + j;
            for l in 0..k {
                // (A X)_{ij} = Σ_l A_il X_lj
                m[(row, l * k + j)] += a[(i, l)];
                // (X Aᵀ)_{ij} = Σ_l X_il A_jl
                m[(row, i * k + l)] += a[(j, l)];
            }
        }
    }
    let rhs = Matrix {
        rows: n,
        cols: 1,
        data: q.as_slice().iter().map(|v| -v).collect(),
    };
    let x = m.solve(&rhs)?;
    Ok(Matrix {
        rows: k,
        cols: k,
        data: x.data,
    }
    .symmetrize())
}

/// True iff every eigenvalue of `a` has strictly negative real part.
///
/// Uses the Lyapunov characterisation: `A` is Hurwitz exactly when
/// `A X + X Aᵀ = −I` has a unique positive-definite solution.
pub fn is_hurwitz(a: &Matrix) -> bool {
    let Ok(k) = a.ensure_square() else {
        return false;
    };
    if let Some(x) = a.as_scalar() {
        return x < 0.0;
    }
    match kronecker_lyapunov(a, &Matrix::identity(k)) {
        Ok(x) => {
            let (vals, _) = symmetric_eigen(&x);
            let min = vals.first().copied().unwrap_or(f64::NAN);
            min.is_finite() && min > 0.0
        }
        Err(_) => false,
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as the columns of the second matrix. Only the symmetric part
/// of the input is used.
pub fn symmetric_eigen(m: &Matrix) -> (Vec<f64>, Matrix) {
    let n = m.rows();
    let mut a = m.symmetrize();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| a[(i, i)] * a[(i, i)]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a[(r, p)];
                    let arq = a[(r, q)];
                    a[(r, p)] = c * arp - s * arq;
                    a[(r, q)] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[(p, r)];
                    let aqr = a[(q, r)];
                    a[(p, r)] = c * apr - s * aqr;
                    a[(q, r)] = s * apr + c * aqr;
                }
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = s * vrp + c * vrq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let vals = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vecs = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            vecs[(r, dst)] = v[(r, src)];
        }
    }
    (vals, vecs)
}

pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    symmetric_eigen(m).0
}

/// Symmetric square root of a positive-semidefinite matrix; small negative
/// eigenvalues from rounding are clamped to zero.
pub fn psd_sqrt(m: &Matrix) -> Matrix {
    if let Some(x) = m.as_scalar() {
        return Matrix::scalar(x.max(0.0).sqrt());
    }
    let (vals, vecs) = symmetric_eigen(m);
    let n = m.rows();
    let mut scaled = vecs.clone();
    for (j, &lambda) in vals.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled.matmul(&vecs.transpose())
}

// 21-point Gauss-Kronrod rule (QUADPACK qk21). Gauss nodes sit at odd indices.
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077982957006543,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Default absolute tolerance for [`quadrature`].
pub const QUAD_TOL: f64 = 1e-10;
const QUAD_MAX_INTERVALS: usize = 4096;

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Result<Segment> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut finite = fc.is_finite();
    for (j, (&x, &w)) in XGK[..10].iter().zip(&WGK[..10]).enumerate() {
        let dx = half * x;
        let s = f(center - dx) + f(center + dx);
        finite &= s.is_finite();
        kronrod += w * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    if !finite {
        return Err(Error::invalid("f", "integrand is not finite on the interval"));
    }
    Ok(Segment {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    })
}

/// Globally adaptive Gauss-Kronrod quadrature of `f` over `[lo, hi]`.
///
/// The interval with the largest error estimate is bisected until the summed
/// estimate drops below `tol` (absolute).
pub fn quadrature<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::invalid("bounds", format!("need finite lo <= hi, got [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    if lo == hi {
        return Ok(0.0);
    }
    let first = kronrod21(&mut f, lo, hi)?;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    while error > tol {
        if heap.len() >= QUAD_MAX_INTERVALS {
            return Err(Error::QuadratureFailure {
                lo,
                hi,
                estimate: error,
                tol,
            });
        }
        let worst = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            return Err(Error::QuadratureFailure {
                lo,
                hi,
                estimate: error,
                tol,
            });
        }
        let left = kronrod21(&mut f, worst.lo, mid)?;
        let right = kronrod21(&mut f, mid, worst.hi)?;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // the running sum drifts; resync occasionally
        if heap.len() % 64 == 0 {
            error = heap.iter().map(|s| s.error).sum();
        }
    }
    Ok(heap.iter().map(|s| s.value).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: &Matrix, b: &Matrix, tol: f64) {
        let diff = a.sub(b).max_abs();
        assert!(diff <= tol, "max diff {diff:e} > {tol:e}\n{a:?}\n{b:?}");
    }

    fn random_stable(rng: &mut ChaCha8Rng, k: usize) -> Matrix {
        // Random matrix shifted left of its Gershgorin bound.
        let mut m = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                m[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        let bound = (0..k)
            .map(|i| (0..k).map(|j| m[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        m.add_diag(-bound - 0.1)
    }

    fn random_psd(rng: &mut ChaCha8Rng, k: usize) -> Matrix {
        let mut b = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                b[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        b.matmul(&b.transpose())
    }

    #[test]
    fn construction_rejects_non_finite() {
        assert_eq!(Matrix::new(1, 1, vec![f64::NAN]), Err(Error::NonFinite));
        assert!(Matrix::square(17, vec![0.0; 289]).is_err());
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let z = Matrix::zeros(3, 3);
        assert_eq!(mat_exp(&z, 7.5).unwrap(), Matrix::identity(3));
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(mat_exp(&a, 0.0).unwrap(), Matrix::identity(2));
    }

    #[test]
    fn exp_scalar() {
        let a = Matrix::scalar(-0.02);
        let e = mat_exp(&a, 10.0).unwrap();
        assert!((e[(0, 0)] - 0.8187307530779818).abs() < 1e-15);
    }

    #[test]
    fn exp_rejects_bad_input() {
        let a = Matrix::new(2, 3, vec![0.0; 6]).unwrap();
        assert!(matches!(mat_exp(&a, 1.0), Err(Error::NonSquare { .. })));
        assert!(mat_exp(&Matrix::identity(2), f64::NAN).is_err());
    }

    #[test]
    fn exp_known_closed_forms() {
        // rotation generator
        for &w in &[0.3, 2.0, 11.0] {
            let a = Matrix::from_rows(&[&[0.0, -w], &[w, 0.0]]).unwrap();
            let t = 1.7;
            let e = mat_exp(&a, t).unwrap();
            let (c, s) = ((w * t).cos(), (w * t).sin());
            let want = Matrix::from_rows(&[&[c, -s], &[s, c]]).unwrap();
            assert_close(&e, &want, 1e-12);
        }
        // nilpotent
        let n = Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let e = mat_exp(&n, 3.0).unwrap();
        assert_close(&e, &Matrix::from_rows(&[&[1.0, 3.0], &[0.0, 1.0]]).unwrap(), 1e-14);
        // upper triangular, distinct eigenvalues
        let (l1, l2, b) = (-0.5, -2.0, 1.5);
        let a = Matrix::from_rows(&[&[l1, b], &[0.0, l2]]).unwrap();
        for &t in &[0.01, 1.0, 20.0] {
            let e = mat_exp(&a, t).unwrap();
            let off = b * ((l1 * t).exp() - (l2 * t).exp()) / (l1 - l2);
            let want =
                Matrix::from_rows(&[&[(l1 * t).exp(), off], &[0.0, (l2 * t).exp()]]).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let (x, y) = (e[(i, j)], want[(i, j)]);
                    assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-300), "{t} {i}{j} {x} {y}");
                }
            }
        }
    }

    #[test]
    fn exp_diagonalisable_relative_accuracy() {
        // A = V D V⁻¹ with a well-conditioned V; ‖A t‖ up to ~50.
        let v = Matrix::from_rows(&[&[1.0, 0.5, 0.0], &[0.0, 1.0, 0.25], &[0.2, 0.0, 1.0]]).unwrap();
        let vinv = v.inverse().unwrap();
        let diag = [-0.3, -1.1, -4.0];
        let a = v.matmul(&Matrix::from_diag(&diag)).matmul(&vinv);
        for &t in &[0.1, 1.0, 5.0, 10.0] {
            let e = mat_exp(&a, t).unwrap();
            let ed: Vec<f64> = diag.iter().map(|d| (d * t).exp()).collect();
            let want = v.matmul(&Matrix::from_diag(&ed)).matmul(&vinv);
            let rel = e.sub(&want).frobenius_norm() / want.frobenius_norm();
            assert!(rel < 1e-12, "t={t} rel={rel:e}");
        }
    }

    #[test]
    fn exp_semigroup() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 2..=5 {
            let mut a = Matrix::zeros(k, k);
            for i in 0..k {
                for j in 0..k {
                    a[(i, j)] = rng.random_range(-1.0..1.0);
                }
            }
            let (t1, t2) = (0.7, 1.9);
            let lhs = mat_exp(&a, t1 + t2).unwrap();
            let rhs = mat_exp(&a, t1).unwrap().matmul(&mat_exp(&a, t2).unwrap());
            let rel = lhs.sub(&rhs).max_abs() / lhs.max_abs();
            assert!(rel < 1e-10, "k={k} rel={rel:e}");
        }
    }

    #[test]
    fn lyapunov_examples() {
        let x = lyapunov_solve(&Matrix::scalar(-0.02), &Matrix::scalar(1.0)).unwrap();
        assert!((x[(0, 0)] - 25.0).abs() < 1e-12);
        let x = lyapunov_solve(&Matrix::identity(2).scale(-1.0), &Matrix::identity(2)).unwrap();
        assert_close(&x, &Matrix::identity(2).scale(0.5), 1e-14);
    }

    #[test]
    fn lyapunov_residual_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in [2, 3, 5, 8] {
            for _ in 0..5 {
                let a = random_stable(&mut rng, k);
                let q = random_psd(&mut rng, k);
                let x = lyapunov_solve(&a, &q).unwrap();
                let resid = a.matmul(&x).add(&x.matmul(&a.transpose())).add(&q);
                assert!(resid.frobenius_norm() <= 1e-10 * q.frobenius_norm());
                assert!(x.is_symmetric(1e-12));
                assert!(symmetric_eigenvalues(&x)[0] >= -1e-10);
            }
        }
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        let a = Matrix::from_rows(&[&[0.1, 0.0], &[0.0, -1.0]]).unwrap();
        assert_eq!(lyapunov_solve(&a, &Matrix::identity(2)), Err(Error::UnstableSystem));
        assert_eq!(
            lyapunov_solve(&Matrix::scalar(0.0), &Matrix::scalar(1.0)),
            Err(Error::UnstableSystem)
        );
        // oscillatory but stable
        let a = Matrix::from_rows(&[&[-0.1, -3.0], &[3.0, -0.1]]).unwrap();
        assert!(is_hurwitz(&a));
        // undamped oscillator
        let a = Matrix::from_rows(&[&[0.0, -3.0], &[3.0, 0.0]]).unwrap();
        assert!(!is_hurwitz(&a));
    }

    #[test]
    fn jacobi_eigen() {
        let m = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
        let (vals, vecs) = symmetric_eigen(&m);
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let recon = vecs.matmul(&Matrix::from_diag(&vals)).matmul(&vecs.transpose());
        assert_close(&recon, &m, 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_psd(&mut rng, 6);
        let root = psd_sqrt(&p);
        assert_close(&root.matmul(&root), &p, 1e-12);
    }

    #[test]
    fn quadrature_examples() {
        assert!((quadrature(|_| 1.0, 0.0, 1.0, QUAD_TOL).unwrap() - 1.0).abs() < 1e-14);
        let v = quadrature(|x| x * x, 0.0, 2.0, QUAD_TOL).unwrap();
        assert!((v - 8.0 / 3.0).abs() < 1e-13);
        let v = quadrature(|m| (2.0 * -0.02 * m).exp(), 0.0, 10.0, QUAD_TOL).unwrap();
        assert!((v - 8.241998849109017).abs() < 1e-12);
        assert_eq!(quadrature(|x| x, 3.0, 3.0, QUAD_TOL).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_errors() {
        assert!(quadrature(|x| x, 1.0, 0.0, QUAD_TOL).is_err());
        // tolerance far below rounding of the integrand
        let r = quadrature(|x| (x * 7.0).sin() * 1e6, 0.0, 1e3, 1e-20);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }
}
