//! Banded Cholesky factorization of a Hermitian positive definite matrix.

use num_complex::Complex64;

/// Lower factor `L` with `A = L L^H`, row `i` holding columns `i-b ..= i`.
#[derive(Debug, Clone)]
pub(crate) struct BandCholesky {
    n: usize,
    b: usize,
    l: Vec<Complex64>,
}

impl BandCholesky {
    /// `entry(i, j)` returns `A_ij` for `i - b <= j <= i`. `None` when a pivot
    /// is not positive.
    pub fn factor(n: usize, b: usize, entry: impl Fn(usize, usize) -> Complex64) -> Option<Self> {
        let w = b + 1;
        let mut l = vec![Complex64::new(0.0, 0.0); n * w];
        for i in 0..n {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let mut s = entry(i, j);
                let klo = lo.max(j.saturating_sub(b));
                let (ri, rj) = (i * w + b - i, j * w + b - j);
                for k in klo..j {
                    s -= l[ri + k] * l[rj + k].conj();
                }
                if j < i {
                    l[ri + j] = s / l[rj + j].re;
                } else {
                    if !(s.re > 0.0) {
                        return None;
                    }
                    l[ri + i] = Complex64::new(s.re.sqrt(), 0.0);
                }
            }
        }
        Some(BandCholesky { n, b, l })
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let (n, b, w) = (self.n, self.b, self.b + 1);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let ri = i * w + b - i;
            let lo = i.saturating_sub(b);
            let s = y[lo..i].iter().zip(&self.l[ri + lo..ri + i]).fold(y[i], |s, (yk, lk)| s - lk * yk);
            y[i] = s / self.l[ri + i].re;
        }
        for i in (0..n).rev() {
            y[i] /= self.l[i * w + b].re;
            let yi = y[i];
            let ri = i * w + b - i;
            let lo = i.saturating_sub(b);
            for (yk, lk) in y[lo..i].iter_mut().zip(&self.l[ri + lo..ri + i]) {
                *yk -= lk.conj() * yi;
            }
        }
        y
    }
}
