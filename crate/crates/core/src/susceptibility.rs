//! Linear response of a standing-wave driven medium, chi_{sigma sigma'}(omega).
//!
//! Values are in units where 2 g^2 N/(gamma omega_0) = 1, so that
//! chi_{sigma sigma'} = gamma P_sigma / (g_p E_sigma').

use crate::error::{invalid, Error, Result};
use crate::linalg::BandedSystem;
use crate::model::PhysicalParams;
use crate::scalar::{i_unit, Complex, Real};

type C<T> = Complex<T>;

/// Control field Omega_+ e^{i k z} + Omega_- e^{-i k z}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandingWave<T> {
    pub plus: C<T>,
    pub minus: C<T>,
}

impl<T: Real> StandingWave<T> {
    pub fn new(plus: C<T>, minus: C<T>) -> Self {
        StandingWave { plus, minus }
    }

    /// Equal real beams with total intensity Omega_0^2.
    pub fn symmetric(omega0: T) -> Self {
        let a = omega0 / T::SQRT_2();
        StandingWave {
            plus: C::new(a, T::zero()),
            minus: C::new(a, T::zero()),
        }
    }

    pub fn omega0_sq(&self) -> T {
        self.plus.norm_sqr() + self.minus.norm_sqr()
    }

    /// |Omega(x)|^2 with x = k_c z.
    pub fn intensity(&self, x: T) -> T {
        let f = self.plus * C::from_polar(T::one(), x) + self.minus * C::from_polar(T::one(), -x);
        f.norm_sqr()
    }
}

/// 2x2 response: (P_+, P_-) = chi (E_+, E_-).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiMatrix<T> {
    pub pp: C<T>,
    pub pm: C<T>,
    pub mp: C<T>,
    pub mm: C<T>,
}

impl<T: Real> ChiMatrix<T> {
    pub fn entries(&self) -> [C<T>; 4] {
        [self.pp, self.pm, self.mp, self.mm]
    }

    pub fn max_diff(&self, other: &Self) -> T {
        self.entries()
            .iter()
            .zip(other.entries())
            .map(|(a, b)| (*a - b).norm())
            .fold(T::zero(), T::max)
    }
}

fn rates<T: Real>(omega: T, params: &PhysicalParams<T>) -> (C<T>, C<T>) {
    let w = C::new(T::zero(), omega);
    (params.optical_rate() - w, params.spin_rate() - w)
}

/// i gamma Gamma_0 / (Gamma Gamma_0 + |Omega|^2), Gamma = gamma - i omega, Gamma_0 = gamma0 - i omega.
pub fn eit_chi<T: Real>(omega: T, omega_sq_total: T, params: &PhysicalParams<T>) -> Result<C<T>> {
    let (g, g0) = rates(omega, params);
    let den = g * g0 + C::new(omega_sq_total, T::zero());
    if den.norm() == T::zero() {
        return Err(Error::Pole {
            omega: omega.to_f64_lossy(),
        });
    }
    Ok(i_unit::<T>() * g0 * params.gamma / den)
}

/// Closed-form secular response:
/// chi_{s s'} = (i gamma/Gamma)[delta_{s s'} - Omega_s Omega_{s'}^* / (Gamma Gamma_0 + Omega_0^2)].
pub fn secular_chi<T: Real>(omega: T, wave: &StandingWave<T>, params: &PhysicalParams<T>) -> Result<ChiMatrix<T>> {
    let (g, g0) = rates(omega, params);
    let den = g * g0 + C::new(wave.omega0_sq(), T::zero());
    if den.norm() == T::zero() || g.norm() == T::zero() {
        return Err(Error::Pole {
            omega: omega.to_f64_lossy(),
        });
    }
    let pre = i_unit::<T>() * params.gamma / g;
    let one = C::new(T::one(), T::zero());
    let (a, b) = (wave.plus, wave.minus);
    Ok(ChiMatrix {
        pp: pre * (one - a * a.conj() / den),
        pm: pre * (-a * b.conj() / den),
        mp: pre * (-b * a.conj() / den),
        mm: pre * (one - b * b.conj() / den),
    })
}

const MIN_POINTS: usize = 64;
const MAX_POINTS: usize = 1 << 22;

/// Fourier coefficient chi_n of chi(z, omega) = sum_n chi_n e^{i n k_c z}.
///
/// Midpoint rule over one wavelength, doubled until two successive
/// estimates agree to 1e-12 relative to the mean |chi|.
pub fn chi_fourier_components<T: Real>(
    omega: T,
    wave: &StandingWave<T>,
    params: &PhysicalParams<T>,
    n: i32,
) -> Result<C<T>> {
    let two_pi = T::PI() * T::of(2.0);
    let estimate = |k: usize| -> Result<(C<T>, T)> {
        let h = two_pi / T::of_usize(k);
        let mut acc = C::new(T::zero(), T::zero());
        let mut mag = T::zero();
        for j in 0..k {
            let x = (T::of_usize(j) + T::of(0.5)) * h;
            let chi = eit_chi(omega, wave.intensity(x), params)?;
            mag = mag + chi.norm();
            acc = acc + chi * C::from_polar(T::one(), -T::of(n as f64) * x);
        }
        Ok((acc / T::of_usize(k), mag / T::of_usize(k)))
    };
    let mut k = MIN_POINTS;
    let (mut prev, _) = estimate(k)?;
    while k < MAX_POINTS {
        k *= 2;
        let (next, mag) = estimate(k)?;
        if (next - prev).norm() <= T::of(1e-12) * mag.max(T::min_positive_value()) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureNotConverged {
        points: k,
        hint: format!(
            "chi(z) is nearly singular at omega = {:.3e}; add gamma0 > 0 or move omega off the transparency point",
            omega.to_f64_lossy()
        ),
    })
}

/// Self terms chi_0, cross terms chi_{+2} (for P_+ from E_-) and chi_{-2}.
pub fn coupled_mode_chi<T: Real>(omega: T, wave: &StandingWave<T>, params: &PhysicalParams<T>) -> Result<ChiMatrix<T>> {
    let c0 = chi_fourier_components(omega, wave, params, 0)?;
    let c2 = chi_fourier_components(omega, wave, params, 2)?;
    let cm2 = chi_fourier_components(omega, wave, params, -2)?;
    Ok(ChiMatrix {
        pp: c0,
        pm: c2,
        mp: cm2,
        mm: c0,
    })
}

/// Number of retained grating orders: P_{+-1..+-(2 n_max + 1)}, S_{0, +-2..+-2 n_max}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GratingTruncation {
    pub n_max: usize,
}

impl GratingTruncation {
    pub fn unknowns(&self) -> usize {
        4 * self.n_max + 3
    }
}

/// Steady-state grating response truncated at order n_max.
///
/// Unknowns are interleaved P_{-2N-1}, S_{-2N}, ..., S_{2N}, P_{2N+1}, which
/// makes the system tridiagonal:
///   (Gamma - i w) P_{2n+1} - i Omega_+ S_{2n} - i Omega_- S_{2n+2} = i g_p (E_+ [n=0] + E_- [n=-1])
///   (Gamma_0 - i w) S_{2n} - i Omega_+^* P_{2n+1} - i Omega_-^* P_{2n-1} = 0
pub fn multi_component_chi<T: Real>(
    omega: T,
    wave: &StandingWave<T>,
    params: &PhysicalParams<T>,
    truncation: GratingTruncation,
) -> Result<ChiMatrix<T>> {
    let nn = truncation.n_max as i64;
    let size = truncation.unknowns();
    let (g, g0) = rates(omega, params);
    let i = i_unit::<T>();
    let p_idx = |n: i64| (2 * (n + nn + 1)) as usize;
    let s_idx = |n: i64| (2 * (n + nn) + 1) as usize;
    let mut sys = BandedSystem::new(size, 1, 1);
    for n in -nn - 1..=nn {
        let r = p_idx(n);
        sys.set(r, r, g)?;
        if n >= -nn {
            sys.set(r, s_idx(n), -i * wave.plus)?;
        }
        if n < nn {
            sys.set(r, s_idx(n + 1), -i * wave.minus)?;
        }
    }
    for n in -nn..=nn {
        let r = s_idx(n);
        sys.set(r, r, g0)?;
        sys.set(r, p_idx(n), -i * wave.plus.conj())?;
        sys.set(r, p_idx(n - 1), -i * wave.minus.conj())?;
    }
    let pole = |e: Error| match e {
        Error::Singular { .. } => Error::Pole {
            omega: omega.to_f64_lossy(),
        },
        other => other,
    };
    let zero = C::new(T::zero(), T::zero());
    let drive = i * params.coupling;
    let mut rhs = vec![zero; size];
    rhs[p_idx(0)] = drive;
    let col_plus = sys.clone().solve(&rhs).map_err(pole)?;
    rhs[p_idx(0)] = zero;
    rhs[p_idx(-1)] = drive;
    let col_minus = sys.solve(&rhs).map_err(pole)?;
    let scale = params.gamma / params.coupling;
    Ok(ChiMatrix {
        pp: col_plus[p_idx(0)] * scale,
        pm: col_minus[p_idx(0)] * scale,
        mp: col_plus[p_idx(-1)] * scale,
        mm: col_minus[p_idx(-1)] * scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChiMethod {
    Truncated(GratingTruncation),
    CoupledMode,
    SingleBeamEit,
}

impl ChiMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            ChiMethod::Truncated(_) => "truncated",
            ChiMethod::CoupledMode => "coupled-mode",
            ChiMethod::SingleBeamEit => "single-beam-eit",
        }
    }

    pub fn n_max(&self) -> Option<usize> {
        match self {
            ChiMethod::Truncated(t) => Some(t.n_max),
            _ => None,
        }
    }

    pub fn evaluate<T: Real>(&self, omega: T, wave: &StandingWave<T>, params: &PhysicalParams<T>) -> Result<ChiMatrix<T>> {
        match *self {
            ChiMethod::Truncated(t) => multi_component_chi(omega, wave, params, t),
            ChiMethod::CoupledMode => coupled_mode_chi(omega, wave, params),
            ChiMethod::SingleBeamEit => {
                let c = eit_chi(omega, wave.omega0_sq(), params)?;
                let zero = C::new(T::zero(), T::zero());
                Ok(ChiMatrix {
                    pp: c,
                    pm: zero,
                    mp: zero,
                    mm: c,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult<T> {
    pub method: ChiMethod,
    pub omega: Vec<T>,
    pub chi: Vec<ChiMatrix<T>>,
}

/// Uniform samples of [lo, hi]; a single sample sits at lo.
pub fn linspace<T: Real>(lo: T, hi: T, samples: usize) -> Vec<T> {
    match samples {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n)
            .map(|k| lo + (hi - lo) * T::of_usize(k) / T::of_usize(n - 1))
            .collect(),
    }
}

pub fn spectrum_scan<T: Real>(
    method: ChiMethod,
    range: (T, T),
    samples: usize,
    wave: &StandingWave<T>,
    params: &PhysicalParams<T>,
) -> Result<SpectrumResult<T>> {
    if samples == 0 {
        return Err(invalid("samples", "need at least one frequency"));
    }
    let omega = linspace(range.0, range.1, samples);
    let chi = omega
        .iter()
        .map(|&w| method.evaluate(w, wave, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumResult { method, omega, chi })
}

#[cfg(test)]
mod tests {
    use super::*;

    type C64 = Complex<f64>;

    fn params() -> PhysicalParams<f64> {
        PhysicalParams::resonant(1.0)
    }

    #[test]
    fn transparency_and_lorentzian() {
        let p = params();
        assert_eq!(eit_chi(0.0, 0.3, &p).unwrap(), C64::new(0.0, 0.0));
        let w = 0.4;
        let bare = eit_chi(w, 0.0, &p).unwrap();
        let expect = C64::new(0.0, 1.0) / C64::new(1.0, -w);
        assert!((bare - expect).norm() < 1e-15);
    }

    #[test]
    fn eit_value_against_hand_evaluation() {
        // |Omega|^2 = 0.01, omega = 0.01: Gamma = 1 - 0.01i, Gamma_0 = -0.01i,
        // Gamma Gamma_0 + 0.01 = -0.0001 + 0.0 i - 0.01 i + 0.01 = 0.0099 - 0.01 i
        // chi = i (-0.01 i)/(0.0099 - 0.01 i) = 0.01/(0.0099 - 0.01 i)
        let v = eit_chi(0.01, 0.01, &params()).unwrap();
        let den = 0.0099f64 * 0.0099 + 0.0001;
        let expect = C64::new(0.01 * 0.0099 / den, 0.01 * 0.01 / den);
        assert!((v - expect).norm() < 1e-13, "{v} {expect}");
    }

    #[test]
    fn pole_is_reported() {
        // gamma0 = 0, omega = 0 and no control: Gamma Gamma_0 + |Omega|^2 vanishes
        let p = params();
        assert!(eit_chi(0.0, 0.0, &p).is_err());
    }

    #[test]
    fn single_beam_has_no_grating() {
        let p = params();
        let wave = StandingWave::new(C64::new(0.1, 0.0), C64::new(0.0, 0.0));
        let w = 0.004;
        let c0 = chi_fourier_components(w, &wave, &p, 0).unwrap();
        assert!((c0 - eit_chi(w, 0.01, &p).unwrap()).norm() < 1e-13);
        for n in [1, 2, -2, 3] {
            assert!(chi_fourier_components(w, &wave, &p, n).unwrap().norm() < 1e-13);
        }
        let cm = coupled_mode_chi(w, &wave, &p).unwrap();
        assert!(cm.pm.norm() < 1e-13 && cm.mp.norm() < 1e-13);
        let tr = multi_component_chi(w, &wave, &p, GratingTruncation { n_max: 0 }).unwrap();
        assert!((tr.pp - eit_chi(w, 0.01, &p).unwrap()).norm() < 1e-14);
        assert!(tr.pm.norm() < 1e-15 && tr.mp.norm() < 1e-15);
    }

    #[test]
    fn even_harmonics_only() {
        let p = params();
        let wave = StandingWave::symmetric(0.1);
        let w = 0.007;
        assert!(chi_fourier_components(w, &wave, &p, 1).unwrap().norm() < 1e-13);
        assert!(chi_fourier_components(w, &wave, &p, 2).unwrap().norm() > 1e-3);
        let a = chi_fourier_components(w, &wave, &p, 2).unwrap();
        let b = chi_fourier_components(w, &wave, &p, -2).unwrap();
        assert!((a - b).norm() < 1e-13);
    }

    #[test]
    fn n_max_zero_is_secular() {
        let p = params();
        for wave in [StandingWave::symmetric(0.1), StandingWave::new(C64::new(0.3, 0.0), C64::new(0.1, 0.05))] {
            for w in [-0.02, -0.003, 0.0011, 0.015] {
                let a = multi_component_chi(w, &wave, &p, GratingTruncation { n_max: 0 }).unwrap();
                let b = secular_chi(w, &wave, &p).unwrap();
                assert!(a.max_diff(&b) < 1e-10);
            }
        }
    }

    #[test]
    fn symmetric_beams_exchange_symmetry() {
        let p = params();
        let wave = StandingWave::symmetric(0.1);
        for n_max in [0, 1, 5] {
            for w in [-0.013, 0.002, 0.017] {
                let c = multi_component_chi(w, &wave, &p, GratingTruncation { n_max }).unwrap();
                assert!((c.pp - c.mm).norm() < 1e-14);
                assert!((c.pm - c.mp).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn large_truncation_approaches_coupled_mode() {
        let p = params();
        let wave = StandingWave::symmetric(0.1);
        let w = 0.012;
        let cm = coupled_mode_chi(w, &wave, &p).unwrap();
        let tr = multi_component_chi(w, &wave, &p, GratingTruncation { n_max: 200 }).unwrap();
        assert!(tr.max_diff(&cm) < 1e-6, "{}", tr.max_diff(&cm));
    }

    #[test]
    fn cross_terms_follow_grating_order() {
        let p = params();
        let wave = StandingWave::new(C64::new(0.12, 0.02), C64::new(0.03, -0.06));
        let w = -0.009;
        let cm = coupled_mode_chi(w, &wave, &p).unwrap();
        let tr = multi_component_chi(w, &wave, &p, GratingTruncation { n_max: 200 }).unwrap();
        assert!(tr.max_diff(&cm) < 1e-6, "{}", tr.max_diff(&cm));
        assert!((cm.pm - cm.mp).norm() > 1e-4);
    }

    #[test]
    fn passive_single_beam() {
        let p = params();
        let s = spectrum_scan(ChiMethod::SingleBeamEit, (-0.05, 0.05), 201, &StandingWave::symmetric(0.1), &p).unwrap();
        assert!(s.chi.iter().all(|c| c.pp.im >= 0.0));
        let one = spectrum_scan(ChiMethod::CoupledMode, (0.01, 0.02), 1, &StandingWave::symmetric(0.1), &p).unwrap();
        assert_eq!(one.omega, vec![0.01]);
        assert_eq!(one.chi.len(), 1);
    }
}
