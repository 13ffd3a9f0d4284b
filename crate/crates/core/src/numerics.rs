//! Finite differences, fits and a spectral heat kernel on uniform grids.

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scalar::{Complex, Real};

/// Fourth-order central first derivative; values beyond the ends are zero.
pub fn derivative_zero_padded<T: Real>(f: &[Complex<T>], dz: T) -> Vec<Complex<T>> {
    let n = f.len();
    let zero = Complex::new(T::zero(), T::zero());
    let at = |i: isize| if i < 0 || i >= n as isize { zero } else { f[i as usize] };
    let w = T::one() / (T::of(12.0) * dz);
    (0..n as isize)
        .map(|i| (at(i - 2) - at(i - 1) * T::of(8.0) + at(i + 1) * T::of(8.0) - at(i + 2)) * w)
        .collect()
}

/// First derivative of a real profile: fourth-order central inside,
/// second-order one-sided at the two outermost points on each side.
pub fn derivative_real<T: Real>(f: &[T], dz: T) -> Vec<T> {
    let n = f.len();
    let mut d = vec![T::zero(); n];
    if n < 5 {
        for i in 0..n {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            d[i] = (f[b] - f[a]) / (dz * T::of_usize(b - a));
        }
        return d;
    }
    let (two, three, four, eight, twelve) = (T::of(2.0), T::of(3.0), T::of(4.0), T::of(8.0), T::of(12.0));
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - f[i - 1] * eight + f[i + 1] * eight - f[i + 2]) / (twelve * dz);
    }
    d[0] = (-f[0] * three + f[1] * four - f[2]) / (two * dz);
    d[1] = (f[2] - f[0]) / (two * dz);
    d[n - 2] = (f[n - 1] - f[n - 3]) / (two * dz);
    d[n - 1] = (f[n - 1] * three - f[n - 2] * four + f[n - 3]) / (two * dz);
    d
}

/// Least-squares line y = a + b x; returns (a, b).
pub fn linear_fit<T: Real>(x: &[T], y: &[T]) -> Result<(T, T)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Shape("linear fit needs two or more paired samples".into()));
    }
    let n = T::of_usize(x.len());
    let mx = x.iter().fold(T::zero(), |s, &v| s + v) / n;
    let my = y.iter().fold(T::zero(), |s, &v| s + v) / n;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        sxy = sxy + (a - mx) * (b - my);
        sxx = sxx + (a - mx) * (a - mx);
    }
    if sxx == T::zero() {
        return Err(Error::Shape("degenerate abscissae in linear fit".into()));
    }
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}

/// Heat-kernel evolution exp(D t d^2/dz^2) applied spectrally with zero padding.
///
/// The zero mode is untouched, so the integral over the padded domain is
/// conserved exactly; mass is lost only if the profile spreads past the padding.
pub fn heat_kernel<T: Real>(f: &[Complex<T>], dz: T, diffusivity: T, t: T) -> Vec<Complex<T>> {
    let n = f.len();
    if n == 0 || t == T::zero() || diffusivity == T::zero() {
        return f.to_vec();
    }
    let m = (2 * n).next_power_of_two();
    let mut buf = vec![Complex::new(T::zero(), T::zero()); m];
    buf[..n].copy_from_slice(f);
    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_forward(m).process(&mut buf);
    let length = dz * T::of_usize(m);
    let two_pi = T::PI() * T::of(2.0);
    for (j, v) in buf.iter_mut().enumerate() {
        let kk = if j <= m / 2 { j as f64 } else { j as f64 - m as f64 };
        let k = two_pi * T::of(kk) / length;
        *v = *v * (-diffusivity * k * k * t).exp() / T::of_usize(m);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    buf.truncate(n);
    buf
}

/// Midpoint-rule integral sum(f) dz.
pub fn integrate<T: Real>(f: &[Complex<T>], dz: T) -> Complex<T> {
    f.iter().fold(Complex::new(T::zero(), T::zero()), |s, &v| s + v) * dz
}

/// Full width at half maximum of the lobe containing index `center`, with
/// linear interpolation at both crossings. None if the lobe reaches an edge.
pub fn fwhm_around<T: Real>(f: &[T], dz: T, center: usize) -> Option<T> {
    let half = *f.get(center)? * T::of(0.5);
    let mut l = center;
    while f[l] > half {
        if l == 0 {
            return None;
        }
        l -= 1;
    }
    let mut r = center;
    while f[r] > half {
        r += 1;
        if r == f.len() {
            return None;
        }
    }
    let left = T::of_usize(l) + (half - f[l]) / (f[l + 1] - f[l]);
    let right = T::of_usize(r) - (half - f[r]) / (f[r - 1] - f[r]);
    Some((right - left) * dz)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_gaussian() {
        let dz = 0.05;
        let z: Vec<f64> = (0..801).map(|i| -20.0 + dz * i as f64).collect();
        let f: Vec<Complex<f64>> = z.iter().map(|&x| Complex::new((-x * x / 8.0).exp(), 0.0)).collect();
        let d = derivative_zero_padded(&f, dz);
        for (i, &x) in z.iter().enumerate() {
            let exact = -x / 4.0 * (-x * x / 8.0).exp();
            assert!((d[i].re - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn real_derivative_exact_for_quadratics() {
        let dz = 0.1;
        let f: Vec<f64> = (0..20).map(|i| (i as f64 * dz).powi(2)).collect();
        let d = derivative_real(&f, dz);
        for (i, v) in d.iter().enumerate() {
            assert!((v - 2.0 * i as f64 * dz).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let (a, b) = linear_fit(&x, &y).unwrap();
        assert!((a - 3.0).abs() < 1e-12 && (b + 0.5).abs() < 1e-12);
    }

    #[test]
    fn heat_kernel_conserves_mass() {
        let dz = 0.25;
        let f: Vec<Complex<f64>> = (0..401)
            .map(|i| {
                let x = -50.0 + dz * i as f64;
                Complex::new((-x * x / 20.0).exp() * (1.0 + 0.3 * x.sin()), 0.0)
            })
            .collect();
        let g = heat_kernel(&f, dz, 0.5, 40.0);
        let err = (integrate(&f, dz) - integrate(&g, dz)).norm();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn fwhm_of_gaussian() {
        let dz = 0.01;
        let sigma = 1.3;
        let f: Vec<f64> = (0..2001)
            .map(|i| {
                let z = (i as f64 - 1000.0) * dz;
                (-z * z / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let w = fwhm_around(&f, dz, 1000).unwrap();
        let expect = 2.0 * (2.0 * 2f64.ln()).sqrt() * sigma;
        assert!((w - expect).abs() < 1e-4);
        assert!(fwhm_around(&f[1000..], dz, 0).is_none());
    }
}
