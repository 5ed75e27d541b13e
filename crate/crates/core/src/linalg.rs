//! Small dense matrices and vectors, generic over the scalar.
//!
//! The geometry and beam machinery only ever needs n-by-n matrices with
//! n = dim(M) (2 at desk scale): products, inverses, determinants and
//! symmetric eigenvalues. Everything is heap-backed and dimension-checked
//! at runtime so the formulas stay valid for general n.

use num_complex::Complex;

use crate::num::{lit, Cplx, Real};

/// Dense square real matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    n: usize,
    a: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(n: usize) -> Self {
        Mat { n, a: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[&[T]]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n);
            for j in 0..n {
                m[(i, j)] = r[j];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matmul(&self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self[(i, k)];
                for j in 0..n {
                    out[(i, j)] += aik * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).fold(T::zero(), |s, j| s + self[(i, j)] * v[j]))
            .collect()
    }

    pub fn transpose(&self) -> Mat<T> {
        Mat::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: T) -> Mat<T> {
        Mat { n: self.n, a: self.a.iter().map(|&x| x * s).collect() }
    }

    pub fn add(&self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.n, rhs.n);
        Mat { n: self.n, a: self.a.iter().zip(&rhs.a).map(|(&x, &y)| x + y).collect() }
    }

    pub fn sub(&self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.n, rhs.n);
        Mat { n: self.n, a: self.a.iter().zip(&rhs.a).map(|(&x, &y)| x - y).collect() }
    }

    pub fn max_abs(&self) -> T {
        self.a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn symmetry_defect(&self) -> T {
        let mut d = T::zero();
        for i in 0..self.n {
            for j in 0..i {
                d = d.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        d
    }

    /// LU determinant with partial pivoting.
    pub fn det(&self) -> T {
        let n = self.n;
        let mut a = self.a.clone();
        let mut det = T::one();
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[r * n + col].abs() > a[piv * n + col].abs() {
                    piv = r;
                }
            }
            if a[piv * n + col] == T::zero() {
                return T::zero();
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                }
                det = -det;
            }
            det *= a[col * n + col];
            for r in col + 1..n {
                let f = a[r * n + col] / a[col * n + col];
                for j in col..n {
                    let s = a[col * n + j];
                    a[r * n + j] = a[r * n + j] - f * s;
                }
            }
        }
        det
    }

    /// Gauss-Jordan inverse with partial pivoting. Panics on singular input;
    /// metric matrices are SPD by invariant so this is a programming error.
    pub fn inverse(&self) -> Mat<T> {
        let n = self.n;
        let mut a = self.a.clone();
        let mut inv = Mat::<T>::identity(n).a;
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[r * n + col].abs() > a[piv * n + col].abs() {
                    piv = r;
                }
            }
            assert!(a[piv * n + col] != T::zero(), "singular matrix in inverse()");
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                    inv.swap(col * n + j, piv * n + j);
                }
            }
            let d = a[col * n + col];
            for j in 0..n {
                a[col * n + j] /= d;
                inv[col * n + j] /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = a[r * n + col];
                    for j in 0..n {
                        let (s, t) = (a[col * n + j], inv[col * n + j]);
                        a[r * n + j] = a[r * n + j] - f * s;
                        inv[r * n + j] = inv[r * n + j] - f * t;
                    }
                }
            }
        }
        Mat { n, a: inv }
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
    /// ascending order.
    pub fn sym_eigenvalues(&self) -> Vec<T> {
        let n = self.n;
        let mut a = self.a.clone();
        let tol = lit::<T>(1e-14) * self.max_abs().max(T::one());
        for _sweep in 0..64 {
            let mut off = T::zero();
            for i in 0..n {
                for j in i + 1..n {
                    off = off.max(a[i * n + j].abs());
                }
            }
            if off <= tol {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq.abs() <= tol {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (lit::<T>(2.0) * apq);
                    let t = {
                        let s = if theta >= T::zero() { T::one() } else { -T::one() };
                        s / (theta.abs() + (theta * theta + T::one()).sqrt())
                    };
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<T> = (0..n).map(|i| a[i * n + i]).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ev
    }

    pub fn min_eigenvalue_sym(&self) -> T {
        self.sym_eigenvalues()[0]
    }

    pub fn to_complex(&self) -> CMat<T> {
        CMat { n: self.n, a: self.a.iter().map(|&x| Cplx::new(x, T::zero())).collect() }
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.a[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.a[i * self.n + j]
    }
}

/// Dense square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat<T> {
    n: usize,
    a: Vec<Cplx<T>>,
}

impl<T: Real> CMat<T> {
    pub fn zeros(n: usize) -> Self {
        CMat { n, a: vec![Cplx::new(T::zero(), T::zero()); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Cplx::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Cplx<T>) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matmul(&self, rhs: &CMat<T>) -> CMat<T> {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self[(i, k)];
                for j in 0..n {
                    out[(i, j)] = out[(i, j)] + aik * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Cplx<T>]) -> Vec<Cplx<T>> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| {
                (0..self.n).fold(Cplx::new(T::zero(), T::zero()), |s, j| s + self[(i, j)] * v[j])
            })
            .collect()
    }

    pub fn transpose(&self) -> CMat<T> {
        CMat::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: Cplx<T>) -> CMat<T> {
        CMat { n: self.n, a: self.a.iter().map(|&x| x * s).collect() }
    }

    pub fn add(&self, rhs: &CMat<T>) -> CMat<T> {
        assert_eq!(self.n, rhs.n);
        CMat { n: self.n, a: self.a.iter().zip(&rhs.a).map(|(&x, &y)| x + y).collect() }
    }

    pub fn sub(&self, rhs: &CMat<T>) -> CMat<T> {
        assert_eq!(self.n, rhs.n);
        CMat { n: self.n, a: self.a.iter().zip(&rhs.a).map(|(&x, &y)| x - y).collect() }
    }

    pub fn neg(&self) -> CMat<T> {
        self.scale(Cplx::new(-T::one(), T::zero()))
    }

    pub fn max_abs(&self) -> T {
        self.a.iter().fold(T::zero(), |m, x| m.max(x.norm()))
    }

    pub fn symmetry_defect(&self) -> T {
        let mut d = T::zero();
        for i in 0..self.n {
            for j in 0..i {
                d = d.max((self[(i, j)] - self[(j, i)]).norm());
            }
        }
        d
    }

    pub fn re(&self) -> Mat<T> {
        Mat::from_fn(self.n, |i, j| self[(i, j)].re)
    }

    pub fn im(&self) -> Mat<T> {
        Mat::from_fn(self.n, |i, j| self[(i, j)].im)
    }

    pub fn det(&self) -> Cplx<T> {
        let n = self.n;
        let mut a = self.a.clone();
        let mut det = Cplx::new(T::one(), T::zero());
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[r * n + col].norm_sqr() > a[piv * n + col].norm_sqr() {
                    piv = r;
                }
            }
            if a[piv * n + col].norm_sqr() == T::zero() {
                return Cplx::new(T::zero(), T::zero());
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                }
                det = -det;
            }
            det = det * a[col * n + col];
            for r in col + 1..n {
                let f = a[r * n + col] / a[col * n + col];
                for j in col..n {
                    let s = a[col * n + j];
                    a[r * n + j] = a[r * n + j] - f * s;
                }
            }
        }
        det
    }

    pub fn inverse(&self) -> CMat<T> {
        let n = self.n;
        let mut a = self.a.clone();
        let mut inv = CMat::<T>::identity(n).a;
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[r * n + col].norm_sqr() > a[piv * n + col].norm_sqr() {
                    piv = r;
                }
            }
            assert!(
                a[piv * n + col].norm_sqr() > T::zero(),
                "singular complex matrix in inverse()"
            );
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                    inv.swap(col * n + j, piv * n + j);
                }
            }
            let d = a[col * n + col];
            for j in 0..n {
                a[col * n + j] = a[col * n + j] / d;
                inv[col * n + j] = inv[col * n + j] / d;
            }
            for r in 0..n {
                if r != col {
                    let f = a[r * n + col];
                    for j in 0..n {
                        let (s, t) = (a[col * n + j], inv[col * n + j]);
                        a[r * n + j] = a[r * n + j] - f * s;
                        inv[r * n + j] = inv[r * n + j] - f * t;
                    }
                }
            }
        }
        CMat { n, a: inv }
    }
}

impl<T> std::ops::Index<(usize, usize)> for CMat<T> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.a[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for CMat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.a[i * self.n + j]
    }
}

/// Euclidean dot product.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

/// Euclidean norm.
#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &[T]) -> Vec<T> {
    x.iter().zip(y).map(|(&xi, &yi)| alpha * xi + yi).collect()
}

#[inline]
pub fn sub_vec<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

#[inline]
pub fn scale_vec<T: Real>(s: T, a: &[T]) -> Vec<T> {
    a.iter().map(|&x| s * x).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_matches_hand_2x2() {
        let m = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 3.0]]);
        let inv = m.inverse();
        // explicit 2x2 inverse: 1/det * [[d,-b],[-c,a]]
        let det = 2.0 * 3.0 - 1.0;
        assert!((inv[(0, 0)] - 3.0 / det).abs() < 1e-14);
        assert!((inv[(0, 1)] + 1.0 / det).abs() < 1e-14);
        let id = m.matmul(&inv);
        assert!(id.sub(&Mat::identity(2)).max_abs() < 1e-14);
        assert!((m.det() - det).abs() < 1e-14);
    }

    #[test]
    fn jacobi_eigenvalues_2x2() {
        let m = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let ev = m.sym_eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-12);
        assert!((ev[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_eigenvalues_3x3() {
        // diag(1,2,3) conjugated by a rotation keeps its spectrum
        let c = 0.6_f64;
        let s = 0.8_f64;
        let r = Mat::from_rows(&[&[c, -s, 0.0], &[s, c, 0.0], &[0.0, 0.0, 1.0]]);
        let d = Mat::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 2.0, 0.0], &[0.0, 0.0, 3.0]]);
        let m = r.matmul(&d).matmul(&r.transpose());
        let ev = m.sym_eigenvalues();
        for (got, want) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-11, "{got} vs {want}");
        }
    }

    #[test]
    fn complex_inverse_and_det() {
        let i = Cplx::new(0.0, 1.0);
        let one = Cplx::new(1.0, 0.0);
        let mut m = CMat::<f64>::zeros(2);
        m[(0, 0)] = one + i;
        m[(0, 1)] = i;
        m[(1, 0)] = -i;
        m[(1, 1)] = one * 2.0;
        let det = m.det();
        // det = (1+i)*2 - i*(-i)*(-1)? compute by hand: (1+i)*2 - (i)*(-i) = 2+2i - (1) = 1+2i
        assert!((det - Cplx::new(1.0, 2.0)).norm() < 1e-14);
        let inv = m.inverse();
        let id = m.matmul(&inv);
        assert!(id.sub(&CMat::identity(2)).max_abs() < 1e-14);
    }

    #[test]
    fn generic_over_f32() {
        let m = Mat::<f32>::from_rows(&[&[2.0, 0.0], &[0.0, 4.0]]);
        assert!((m.det() - 8.0).abs() < 1e-5);
        assert!((m.min_eigenvalue_sym() - 2.0).abs() < 1e-5);
    }
}
