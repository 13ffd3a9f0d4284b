//! Small dense complex matrices and a band-limited LU solver.

use crate::error::{Error, Result};
use crate::scalar::{Complex, Real};

/// Row-major square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    n: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        CMatrix {
            n,
            data: vec![Complex::new(T::zero(), T::zero()); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    /// Builds the matrix of a linear map column by column.
    pub fn from_linear_map(n: usize, mut f: impl FnMut(&[Complex<T>], &mut [Complex<T>])) -> Self {
        let mut m = Self::zeros(n);
        let mut e = vec![Complex::new(T::zero(), T::zero()); n];
        let mut out = e.clone();
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = Complex::new(T::zero(), T::zero()));
            e[j] = Complex::new(T::one(), T::zero());
            f(&e, &mut out);
            for i in 0..n {
                m[(i, j)] = out[i];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        CMatrix {
            n: self.n,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        CMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] = out.data[i * n + j] + a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        let n = self.n;
        for i in 0..n {
            let mut acc = Complex::new(T::zero(), T::zero());
            for j in 0..n {
                acc = acc + self.data[i * n + j] * x[j];
            }
            y[i] = acc;
        }
    }

    /// Max column sum norm.
    pub fn norm1(&self) -> T {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).fold(T::zero(), |s, i| s + self.data[i * n + j].norm()))
            .fold(T::zero(), T::max)
    }

    /// exp(self) by scaling and squaring with a Taylor series.
    pub fn expm(&self) -> Self {
        let n = self.n;
        let norm = self.norm1();
        let mut squarings = 0u32;
        let mut scaled = norm;
        while scaled > T::of(0.5) {
            scaled = scaled * T::of(0.5);
            squarings += 1;
        }
        let a = self.scale(Complex::new(T::one() / T::of(2f64.powi(squarings as i32)), T::zero()));
        let mut sum = Self::identity(n);
        let mut term = Self::identity(n);
        for k in 1..=40 {
            term = term.matmul(&a).scale(Complex::new(T::one() / T::of_usize(k), T::zero()));
            sum = sum.add(&term);
            if term.norm1() <= T::epsilon() * sum.norm1() {
                break;
            }
        }
        for _ in 0..squarings {
            sum = sum.matmul(&sum);
        }
        sum
    }
}

impl<T> std::ops::Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for CMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.n + j]
    }
}

/// Banded complex system with `lower` sub- and `upper` super-diagonals.
///
/// Storage is dense but elimination only touches the band plus the fill-in
/// produced by partial pivoting, so the cost is O(n * lower * (lower + upper)).
#[derive(Debug, Clone)]
pub struct BandedSystem<T> {
    n: usize,
    lower: usize,
    upper: usize,
    a: Vec<Complex<T>>,
}

impl<T: Real> BandedSystem<T> {
    pub fn new(n: usize, lower: usize, upper: usize) -> Self {
        BandedSystem {
            n,
            lower,
            upper,
            a: vec![Complex::new(T::zero(), T::zero()); n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex<T>) -> Result<()> {
        if i >= self.n || j >= self.n || j + self.lower < i || i + self.upper < j {
            return Err(Error::Shape(format!("entry ({i}, {j}) outside the band")));
        }
        self.a[i * self.n + j] = v;
        Ok(())
    }

    pub fn add(&mut self, i: usize, j: usize, v: Complex<T>) -> Result<()> {
        let cur = self.get(i, j);
        self.set(i, j, cur + v)
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.a[i * self.n + j]
    }

    /// Gaussian elimination with partial pivoting; consumes the matrix.
    pub fn solve(mut self, rhs: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let n = self.n;
        if rhs.len() != n {
            return Err(Error::Shape(format!("rhs length {} != {n}", rhs.len())));
        }
        let mut b = rhs.to_vec();
        let width = self.lower + self.upper;
        let scale = self.a.iter().fold(T::zero(), |m, x| m.max(x.norm()));
        let tiny = scale * T::epsilon() * T::of_usize(n);
        for k in 0..n {
            let last_row = (k + self.lower).min(n - 1);
            let mut p = k;
            let mut best = self.a[k * n + k].norm();
            for i in k + 1..=last_row {
                let v = self.a[i * n + k].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) {
                return Err(Error::Singular { pivot: k });
            }
            let last_col = (k + width).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    self.a.swap(k * n + j, p * n + j);
                }
                b.swap(k, p);
            }
            let pivot = self.a[k * n + k];
            for i in k + 1..=last_row {
                let f = self.a[i * n + k] / pivot;
                if f.re == T::zero() && f.im == T::zero() {
                    continue;
                }
                for j in k..=last_col {
                    let akj = self.a[k * n + j];
                    self.a[i * n + j] = self.a[i * n + j] - f * akj;
                }
                b[i] = b[i] - f * b[k];
            }
        }
        let mut x = vec![Complex::new(T::zero(), T::zero()); n];
        for k in (0..n).rev() {
            let last_col = (k + width).min(n - 1);
            let mut acc = b[k];
            for j in k + 1..=last_col {
                acc = acc - self.a[k * n + j] * x[j];
            }
            x[k] = acc / self.a[k * n + k];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type C = Complex<f64>;

    fn close(a: C, b: C, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn expm_of_rotation_generator() {
        let mut m = CMatrix::<f64>::zeros(2);
        let w = 7.3;
        m[(0, 1)] = C::new(-w, 0.0);
        m[(1, 0)] = C::new(w, 0.0);
        let e = m.expm();
        assert!(close(e[(0, 0)], C::new(w.cos(), 0.0), 1e-13));
        assert!(close(e[(1, 0)], C::new(w.sin(), 0.0), 1e-13));
    }

    #[test]
    fn expm_of_diagonal() {
        let mut m = CMatrix::<f64>::zeros(3);
        m[(0, 0)] = C::new(-30.0, 2.0);
        m[(1, 1)] = C::new(0.5, -1.0);
        let e = m.expm();
        assert!(close(e[(0, 0)], C::new(-30.0, 2.0).exp(), 1e-20));
        assert!(close(e[(1, 1)], C::new(0.5, -1.0).exp(), 1e-13));
        assert!(close(e[(2, 2)], C::new(1.0, 0.0), 1e-15));
    }

    #[test]
    fn expm_of_anti_hermitian_is_unitary() {
        let mut m = CMatrix::<f64>::zeros(3);
        m[(0, 1)] = C::new(0.0, 3.0);
        m[(1, 0)] = C::new(0.0, 3.0);
        m[(1, 2)] = C::new(1.0, 2.0);
        m[(2, 1)] = C::new(-1.0, 2.0);
        let u = m.expm();
        let x = [C::new(1.0, 0.0), C::new(0.3, -0.2), C::new(0.0, 1.0)];
        let mut y = [C::new(0.0, 0.0); 3];
        u.apply(&x, &mut y);
        let nx: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let ny: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        assert!((nx - ny).abs() < 1e-13);
    }

    #[test]
    fn banded_solve_matches_residual() {
        let n = 9;
        let mut s = BandedSystem::<f64>::new(n, 1, 1);
        for i in 0..n {
            // zero diagonal entries force pivoting
            let d = if i % 3 == 0 { C::new(0.0, 0.0) } else { C::new(1.0 + i as f64, 0.5) };
            s.set(i, i, d).unwrap();
            if i + 1 < n {
                s.set(i, i + 1, C::new(0.0, 2.0)).unwrap();
                s.set(i + 1, i, C::new(1.5, -1.0)).unwrap();
            }
        }
        let rhs: Vec<C> = (0..n).map(|i| C::new(i as f64, 1.0)).collect();
        let saved = s.clone();
        let x = s.solve(&rhs).unwrap();
        for i in 0..n {
            let mut acc = C::new(0.0, 0.0);
            for j in 0..n {
                acc += saved.get(i, j) * x[j];
            }
            assert!(close(acc, rhs[i], 1e-12), "row {i}");
        }
    }

    #[test]
    fn banded_singular_is_reported() {
        let s = BandedSystem::<f64>::new(3, 1, 1);
        assert!(matches!(s.solve(&[C::new(1.0, 0.0); 3]), Err(Error::Singular { .. })));
        let mut t = BandedSystem::<f64>::new(3, 1, 1);
        assert!(t.set(0, 2, C::new(1.0, 0.0)).is_err());
    }
}
