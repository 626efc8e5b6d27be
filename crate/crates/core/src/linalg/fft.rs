use num_complex::Complex64;

use super::{norm_inf, Vector};
use crate::error::{check_dim, GpError, Result};

/// In-place iterative radix-2 FFT. `inverse` applies the conjugate transform
/// including the `1/n` normalization.
pub fn fft_in_place(buf: &mut [Complex64], inverse: bool) -> Result<()> {
    let n = buf.len();
    if !n.is_power_of_two() {
        return Err(GpError::NotPowerOfTwo(n));
    }
    if n <= 1 {
        return Ok(());
    }

    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }

    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        // Twiddles are evaluated directly rather than by recurrence.
        let twiddles: Vec<Complex64> = (0..half)
            .map(|k| Complex64::from_polar(1.0, sign * 2.0 * std::f64::consts::PI * k as f64 / len as f64))
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = buf[start + k];
                let b = buf[start + k + half] * twiddles[k];
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }

    if inverse {
        let scale = 1.0 / n as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }
    Ok(())
}

/// A circulant matrix stored by the FFT of its first column.
#[derive(Clone, Debug)]
pub struct CirculantOperator {
    spectrum: Vec<Complex64>,
}

impl CirculantOperator {
    pub fn new(first_col: &[f64]) -> Result<Self> {
        let mut spectrum: Vec<Complex64> = first_col.iter().map(|&c| Complex64::new(c, 0.0)).collect();
        fft_in_place(&mut spectrum, false)?;
        Ok(CirculantOperator { spectrum })
    }

    pub fn len(&self) -> usize {
        self.spectrum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectrum.is_empty()
    }

    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    /// `C v` via `ifft(fft(c) * fft(v))`.
    pub fn apply(&self, v: &[f64]) -> Result<Vector> {
        check_dim("circulant matvec", self.len(), v.len())?;
        let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fft_in_place(&mut buf, false)?;
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        fft_in_place(&mut buf, true)?;
        let out: Vec<f64> = buf.iter().map(|z| z.re).collect();
        debug_assert!({
            let max_im = buf.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
            max_im <= 1e-8 * norm_inf(&out).max(f64::MIN_POSITIVE) || max_im < 1e-300
        });
        Ok(Vector::from(out))
    }
}

/// Multiplies the circulant matrix with first column `first_col` by `v`.
pub fn fft_circulant_matvec(first_col: &[f64], v: &[f64]) -> Result<Vector> {
    check_dim("fft_circulant_matvec", first_col.len(), v.len())?;
    CirculantOperator::new(first_col)?.apply(v)
}
