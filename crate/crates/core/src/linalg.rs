//! Small dense eigenvalue helpers.

use nalgebra::Matrix3;
use num_complex::Complex64;

/// Eigenvalues of a real 3x3 matrix, sorted by real part then imaginary part.
///
/// A matrix with non-finite entries yields NaN eigenvalues.
pub fn eigenvalues(m: &Matrix3<f64>) -> [Complex64; 3] {
    if !m.iter().all(|x| x.is_finite()) {
        return [Complex64::new(f64::NAN, f64::NAN); 3];
    }
    let ev = m.complex_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2]];
    sort_eigenvalues(&mut out);
    out
}

pub(crate) fn sort_eigenvalues(e: &mut [Complex64; 3]) {
    e.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Largest real part among the eigenvalues.
pub fn spectral_abscissa(e: &[Complex64; 3]) -> f64 {
    e.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}
