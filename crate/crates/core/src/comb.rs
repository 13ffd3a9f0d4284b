//! Frequency-comb retrieval.
//!
//! Each comb line k carries its own forward/backward probe envelopes E_{+-k}
//! and polarizations P_{+-k} in the rotating frame e^{-i Delta_k (t -+ z/c)};
//! all lines share the spin coherence S. Cross-line (off-resonant) couplings
//! are dropped. The fast phases are reattached only by [`total_field`] and
//! [`matched_field`].

use crate::error::{invalid, Error, Result};
use crate::linalg::CMatrix;
use crate::mbe::advect_pair;
use crate::model::{Grid, PhysicalParams};
use crate::numerics::{fwhm_around, heat_kernel};
use crate::profile::{CombLine, CombProfile};
use crate::scalar::{i_unit, Complex, Real};

type C<T> = Complex<T>;

#[derive(Debug, Clone, PartialEq)]
pub struct CombState<T> {
    pub t: T,
    /// Indexed [line][cell], in the order of `CombProfile::lines`.
    pub e_plus: Vec<Vec<C<T>>>,
    pub e_minus: Vec<Vec<C<T>>>,
    pub p_plus: Vec<Vec<C<T>>>,
    pub p_minus: Vec<Vec<C<T>>>,
    pub sigma_bc: Vec<C<T>>,
}

impl<T: Real> CombState<T> {
    /// Stored spin coherence, all probe components empty.
    pub fn from_spin(lines: usize, sigma_bc: Vec<C<T>>, t: T) -> Self {
        let z = vec![C::new(T::zero(), T::zero()); sigma_bc.len()];
        CombState {
            t,
            e_plus: vec![z.clone(); lines],
            e_minus: vec![z.clone(); lines],
            p_plus: vec![z.clone(); lines],
            p_minus: vec![z; lines],
            sigma_bc,
        }
    }

    /// Every line already slaved to S, polarizations zero.
    pub fn slaved(comb: &CombProfile<T>, params: &PhysicalParams<T>, sigma_bc: Vec<C<T>>, t: T) -> Self {
        let mut st = Self::from_spin(comb.lines.len(), sigma_bc, t);
        for (k, line) in comb.lines.iter().enumerate() {
            let (p, m) = adiabatic_offresonant(&st.sigma_bc, line, params);
            st.e_plus[k] = p;
            st.e_minus[k] = m;
        }
        st
    }

    pub fn lines(&self) -> usize {
        self.e_plus.len()
    }

    pub fn len(&self) -> usize {
        self.sigma_bc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_bc.is_empty()
    }

    pub fn check_finite(&self, grid: &Grid<T>) -> Result<()> {
        let fields: [(&'static str, &Vec<Vec<C<T>>>); 4] = [
            ("E+k", &self.e_plus),
            ("E-k", &self.e_minus),
            ("P+k", &self.p_plus),
            ("P-k", &self.p_minus),
        ];
        let bad = |v: &C<T>| !(v.re.is_finite() && v.im.is_finite());
        for (name, f) in fields {
            for line in f {
                if let Some(i) = line.iter().position(bad) {
                    return Err(Error::NonFinite {
                        field: name,
                        z: grid.z(i).to_f64_lossy(),
                        t: self.t.to_f64_lossy(),
                    });
                }
            }
        }
        if let Some(i) = self.sigma_bc.iter().position(bad) {
            return Err(Error::NonFinite {
                field: "sigma_bc",
                z: grid.z(i).to_f64_lossy(),
                t: self.t.to_f64_lossy(),
            });
        }
        Ok(())
    }
}

/// Per-cell generator, ordering [E+k, E-k, P+k, P-k] for each line, then S.
pub fn comb_generator<T: Real>(comb: &CombProfile<T>, params: &PhysicalParams<T>) -> CMatrix<T> {
    let nl = comb.lines.len();
    let n = 4 * nl + 1;
    let s = 4 * nl;
    let i = i_unit::<T>();
    let g = C::new(params.coupling, T::zero());
    let mut a = CMatrix::zeros(n);
    for (k, l) in comb.lines.iter().enumerate() {
        let (ep, em, pp, pm) = (4 * k, 4 * k + 1, 4 * k + 2, 4 * k + 3);
        let decay = C::new(params.gamma, l.detuning);
        for (e, p, om) in [(ep, pp, l.plus), (em, pm, l.minus)] {
            a[(e, p)] = i * g;
            a[(p, p)] = -decay;
            a[(p, e)] = i * g;
            a[(p, s)] = i * om;
            a[(s, p)] = i * om.conj();
        }
    }
    a[(s, s)] = C::new(-params.gamma0, T::zero());
    a
}

pub struct CombSolver<T> {
    params: PhysicalParams<T>,
    grid: Grid<T>,
    comb: CombProfile<T>,
    half_step: CMatrix<T>,
}

impl<T: Real> CombSolver<T> {
    /// Lines bring their own detunings, so the global one- and two-photon
    /// detunings, carrier offset and wavevector mismatch must be zero.
    pub fn new(params: PhysicalParams<T>, grid: Grid<T>, comb: CombProfile<T>) -> Result<Self> {
        params.validate()?;
        comb.validate()?;
        grid.check_cfl(params.light_speed)?;
        for (name, v) in [
            ("one_photon_detuning", params.one_photon_detuning),
            ("two_photon_detuning", params.two_photon_detuning),
            ("carrier_offset", params.carrier_offset),
            ("wavevector_mismatch", params.wavevector_mismatch),
        ] {
            if v != T::zero() {
                return Err(invalid(name, "must be zero for comb runs; detunings belong to the lines"));
            }
        }
        let h = C::new(grid.dt * T::of(0.5), T::zero());
        let half_step = comb_generator(&comb, &params).scale(h).expm();
        Ok(CombSolver {
            params,
            grid,
            comb,
            half_step,
        })
    }

    pub fn params(&self) -> &PhysicalParams<T> {
        &self.params
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn comb(&self) -> &CombProfile<T> {
        &self.comb
    }

    fn local(&self, st: &mut CombState<T>) {
        let nl = st.lines();
        let n = 4 * nl + 1;
        let zero = C::new(T::zero(), T::zero());
        let mut y = vec![zero; n];
        let mut out = vec![zero; n];
        for i in 0..st.len() {
            for k in 0..nl {
                y[4 * k] = st.e_plus[k][i];
                y[4 * k + 1] = st.e_minus[k][i];
                y[4 * k + 2] = st.p_plus[k][i];
                y[4 * k + 3] = st.p_minus[k][i];
            }
            y[4 * nl] = st.sigma_bc[i];
            // row-by-row product: the S row sums the lines in a fixed order
            self.half_step.apply(&y, &mut out);
            for k in 0..nl {
                st.e_plus[k][i] = out[4 * k];
                st.e_minus[k][i] = out[4 * k + 1];
                st.p_plus[k][i] = out[4 * k + 2];
                st.p_minus[k][i] = out[4 * k + 3];
            }
            st.sigma_bc[i] = out[4 * nl];
        }
    }

    pub fn step(&self, st: &mut CombState<T>) -> Result<()> {
        if st.len() != self.grid.n_points || st.lines() != self.comb.lines.len() {
            return Err(Error::Shape(format!(
                "comb state {}x{} vs grid {} and {} lines",
                st.lines(),
                st.len(),
                self.grid.n_points,
                self.comb.lines.len()
            )));
        }
        self.local(st);
        let nu = self.grid.cfl(self.params.light_speed);
        for k in 0..st.lines() {
            advect_pair(&mut st.e_plus[k], &mut st.e_minus[k], nu);
        }
        self.local(st);
        st.t = st.t + self.grid.dt;
        st.check_finite(&self.grid)
    }
}

/// Advances `st` by round(duration/dt) steps.
pub fn comb_evolve<T: Real>(solver: &CombSolver<T>, st: &mut CombState<T>, duration: T) -> Result<()> {
    let steps = (duration / solver.grid.dt).round().to_usize().unwrap_or(0);
    for _ in 0..steps {
        solver.step(st)?;
    }
    Ok(())
}

/// E_{+-k} = -(Omega_{+-k}/g_p) S.
pub fn adiabatic_offresonant<T: Real>(
    sigma_bc: &[C<T>],
    line: &CombLine<T>,
    params: &PhysicalParams<T>,
) -> (Vec<C<T>>, Vec<C<T>>) {
    let g = params.coupling;
    (
        sigma_bc.iter().map(|&s| -line.plus * s / g).collect(),
        sigma_bc.iter().map(|&s| -line.minus * s / g).collect(),
    )
}

/// E(z, t) = -Omega(z, t) S(z) / g_p, with the fast line phases attached.
pub fn matched_field<T: Real>(
    sigma_bc: &[C<T>],
    comb: &CombProfile<T>,
    params: &PhysicalParams<T>,
    grid: &Grid<T>,
    t: T,
) -> Vec<C<T>> {
    sigma_bc
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let (p, m) = comb.total(params.light_speed, grid.z(i), t);
            -(p + m) * s / params.coupling
        })
        .collect()
}

/// Total probe envelope sum_k E_{+k} e^{-i Delta_k (t - z/c)} + E_{-k} e^{-i Delta_k (t + z/c)}.
pub fn total_field<T: Real>(st: &CombState<T>, comb: &CombProfile<T>, params: &PhysicalParams<T>, grid: &Grid<T>) -> Vec<C<T>> {
    let c = params.light_speed;
    (0..st.len())
        .map(|i| {
            let z = grid.z(i);
            comb.lines.iter().enumerate().fold(C::new(T::zero(), T::zero()), |acc, (k, l)| {
                let fwd = C::from_polar(T::one(), -l.detuning * (st.t - z / c));
                let bwd = C::from_polar(T::one(), -l.detuning * (st.t + z / c));
                acc + st.e_plus[k][i] * fwd + st.e_minus[k][i] * bwd
            })
        })
        .collect()
}

/// Largest line detuning the matched field can follow: gamma * L / l_abs.
pub fn comb_bandwidth<T: Real>(params: &PhysicalParams<T>, length: T) -> Result<T> {
    if !(length > T::zero()) {
        return Err(invalid("length", "must be positive"));
    }
    Ok(params.gamma * params.optical_depth(length))
}

/// Diffusion of the slaved spin over dt, via the exact heat kernel (no step limit).
pub fn spin_diffusion_step<T: Real>(sigma_bc: &[C<T>], grid: &Grid<T>, diffusivity: T, dt: T) -> Result<Vec<C<T>>> {
    if diffusivity < T::zero() || dt < T::zero() {
        return Err(invalid("diffusivity", "D and dt must be non-negative"));
    }
    Ok(heat_kernel(sigma_bc, grid.dz(), diffusivity, dt))
}

/// Matched-field comparison between a comb and homogeneous resonant beams whose
/// amplitude equals the comb's peak |Omega| on the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilteringReport<T> {
    pub photons_comb: T,
    pub photons_pair: T,
    pub center_density_comb: T,
    pub center_density_pair: T,
    /// FWHM of |E|^2 around the excitation maximum.
    pub fwhm_comb: Option<T>,
    pub fwhm_pair: Option<T>,
}

pub fn filtering_comparison<T: Real>(
    sigma_bc: &[C<T>],
    comb: &CombProfile<T>,
    params: &PhysicalParams<T>,
    grid: &Grid<T>,
    t: T,
) -> Result<FilteringReport<T>> {
    if sigma_bc.len() != grid.n_points {
        return Err(Error::Shape("sigma_bc does not match the grid".into()));
    }
    let comb_e = matched_field(sigma_bc, comb, params, grid, t);
    let peak = (0..grid.n_points)
        .map(|i| {
            let (p, m) = comb.total(params.light_speed, grid.z(i), t);
            (p + m).norm()
        })
        .fold(T::zero(), T::max);
    let dens_comb: Vec<T> = comb_e.iter().map(|e| e.norm_sqr()).collect();
    let g2 = params.coupling * params.coupling;
    let dens_pair: Vec<T> = sigma_bc.iter().map(|s| peak * peak * s.norm_sqr() / g2).collect();
    let center = sigma_bc
        .iter()
        .enumerate()
        .fold((0, T::zero()), |(bi, bv), (i, s)| if s.norm() > bv { (i, s.norm()) } else { (bi, bv) })
        .0;
    let dz = grid.dz();
    let sum = |d: &[T]| d.iter().fold(T::zero(), |a, &x| a + x) * dz;
    Ok(FilteringReport {
        photons_comb: sum(&dens_comb),
        photons_pair: sum(&dens_pair),
        center_density_comb: dens_comb[center],
        center_density_pair: dens_pair[center],
        fwhm_comb: fwhm_around(&dens_comb, dz, center),
        fwhm_pair: fwhm_around(&dens_pair, dz, center),
    })
}

/// Worst |E_k - E_k^matched| / max|E_k^matched| over lines and cells with |S| above
/// `threshold` * max|S|.
pub fn slaving_deviation<T: Real>(st: &CombState<T>, comb: &CombProfile<T>, params: &PhysicalParams<T>, threshold: T) -> T {
    let smax = st.sigma_bc.iter().map(|s| s.norm()).fold(T::zero(), T::max);
    let mut worst = T::zero();
    for (k, line) in comb.lines.iter().enumerate() {
        let (mp, mm) = adiabatic_offresonant(&st.sigma_bc, line, params);
        for (sim, exp) in [(&st.e_plus[k], &mp), (&st.e_minus[k], &mm)] {
            for i in 0..st.len() {
                if st.sigma_bc[i].norm() > threshold * smax && exp[i].norm() > T::zero() {
                    worst = worst.max((sim[i] - exp[i]).norm() / exp[i].norm());
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mbe::{MbeSolver, Model, SystemState};
    use crate::profile::ControlProfile;

    type C64 = Complex<f64>;

    fn gaussian(grid: &Grid<f64>, width: f64) -> Vec<C64> {
        (0..grid.n_points)
            .map(|i| {
                let u = grid.z(i) / width;
                C64::new((-0.5 * u * u).exp(), 0.0)
            })
            .collect()
    }

    fn resonant_only(a: f64) -> CombProfile<f64> {
        CombProfile {
            lines: vec![CombLine {
                detuning: 0.0,
                plus: C64::new(a, 0.0),
                minus: C64::new(a, 0.0),
            }],
        }
    }

    #[test]
    fn single_line_matches_mbe() {
        let p = PhysicalParams::resonant(1.0);
        let grid = Grid::unit_cfl(-30.0, 30.0, 241, 1.0).unwrap();
        let comb = resonant_only(0.4);
        let solver = CombSolver::new(p, grid, comb.clone()).unwrap();
        let mut mbe = MbeSolver::new(p, grid, ControlProfile::constant(0.4, 0.4), Model::Full).unwrap();
        let s0 = gaussian(&grid, 4.0);
        let mut cs = CombState::from_spin(1, s0.clone(), 0.0);
        let mut ms = SystemState::zeros(grid.n_points, 0.0);
        ms.sigma_bc = s0;
        for _ in 0..200 {
            solver.step(&mut cs).unwrap();
            mbe.step(&mut ms).unwrap();
        }
        let diff = (0..grid.n_points)
            .map(|i| {
                (cs.e_plus[0][i] - ms.e_plus[i]).norm()
                    + (cs.e_minus[0][i] - ms.e_minus[i]).norm()
                    + (cs.p_plus[0][i] - ms.sigma_ba_plus[i]).norm()
                    + (cs.sigma_bc[i] - ms.sigma_bc[i]).norm()
            })
            .fold(0.0, f64::max);
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn dark_controls_freeze_spin() {
        let p = PhysicalParams::resonant(1.0);
        let grid = Grid::unit_cfl(-10.0, 10.0, 81, 1.0).unwrap();
        let mut comb = CombProfile::equal_lines(2, 3.0, 0.0);
        comb.lines[0].plus = C64::new(0.0, 0.0);
        let solver = CombSolver::new(p, grid, comb).unwrap();
        let s0 = gaussian(&grid, 2.0);
        let mut st = CombState::from_spin(5, s0.clone(), 0.0);
        comb_evolve(&solver, &mut st, 10.0).unwrap();
        assert_eq!(st.sigma_bc, s0);
        assert!((st.t - 10.0).abs() < 1e-9);
    }

    #[test]
    fn global_detuning_is_rejected() {
        let mut p = PhysicalParams::resonant(1.0);
        p.two_photon_detuning = 0.1;
        let grid = Grid::unit_cfl(-10.0, 10.0, 81, 1.0).unwrap();
        assert!(CombSolver::new(p, grid, resonant_only(1.0)).is_err());
    }

    #[test]
    fn slaved_sign_and_zero() {
        let p = PhysicalParams::resonant(1.0);
        let line = CombLine {
            detuning: 5.0,
            plus: C64::new(0.3, 0.0),
            minus: C64::new(0.0, 0.3),
        };
        let (ep, em) = adiabatic_offresonant(&[C64::new(2.0, 0.0), C64::new(0.0, 0.0)], &line, &p);
        assert_eq!(ep[0], C64::new(-0.6, 0.0));
        assert_eq!(em[0], C64::new(0.0, -0.6));
        assert_eq!(ep[1], C64::new(0.0, 0.0));
    }

    #[test]
    fn off_resonant_line_slaves_to_spin() {
        // gamma = 0.01, Delta_1 = 20 gamma; spin width 30 >> Delta_1 l_abs / gamma
        let p = PhysicalParams::resonant(0.01);
        let grid = Grid::from_spacing(-150.0, 150.0, 0.5, 1.0).unwrap();
        let comb = CombProfile {
            lines: vec![
                CombLine {
                    detuning: 0.0,
                    plus: C64::new(0.1, 0.0),
                    minus: C64::new(0.1, 0.0),
                },
                CombLine {
                    detuning: 0.2,
                    plus: C64::new(0.1, 0.0),
                    minus: C64::new(0.1, 0.0),
                },
            ],
        };
        let solver = CombSolver::new(p, grid, comb.clone()).unwrap();
        let mut st = CombState::slaved(&comb, &p, gaussian(&grid, 30.0), 0.0);
        // settles at ~1.4%, the Delta_1 l_abs / (gamma width) gradient correction
        comb_evolve(&solver, &mut st, 500.0).unwrap();
        let dev = slaving_deviation(&st, &comb, &p, 0.1);
        assert!(dev < 0.03, "{dev}");
        let total = total_field(&st, &comb, &p, &grid);
        let matched = matched_field(&st.sigma_bc, &comb, &p, &grid, st.t);
        let smax = st.sigma_bc.iter().map(|s| s.norm()).fold(0.0, f64::max);
        let emax = matched.iter().map(|e| e.norm()).fold(0.0, f64::max);
        for i in 0..grid.n_points {
            if st.sigma_bc[i].norm() > 0.1 * smax {
                assert!((total[i] - matched[i]).norm() < 0.05 * emax);
            }
        }
    }

    #[test]
    fn far_detuned_line_breaks_matching() {
        let p = PhysicalParams::resonant(0.01);
        let grid = Grid::from_spacing(-20.0, 20.0, 0.1, 1.0).unwrap();
        let dmax = comb_bandwidth(&p, grid.length()).unwrap();
        let comb = CombProfile {
            lines: vec![
                CombLine {
                    detuning: 0.0,
                    plus: C64::new(0.1, 0.0),
                    minus: C64::new(0.1, 0.0),
                },
                CombLine {
                    detuning: 5.0 * dmax,
                    plus: C64::new(0.1, 0.0),
                    minus: C64::new(0.1, 0.0),
                },
            ],
        };
        let solver = CombSolver::new(p, grid, comb.clone()).unwrap();
        let mut st = CombState::slaved(&comb, &p, gaussian(&grid, 4.0), 0.0);
        comb_evolve(&solver, &mut st, 60.0).unwrap();
        let single = CombProfile {
            lines: vec![comb.lines[1]],
        };
        let mut only = st.clone();
        only.e_plus.remove(0);
        only.e_minus.remove(0);
        assert!(slaving_deviation(&only, &single, &p, 0.1) > 0.2);
    }

    #[test]
    fn bandwidth_arithmetic() {
        let p = PhysicalParams::<f64>::resonant(1.0);
        assert!((comb_bandwidth(&p, p.absorption_length()).unwrap() - 1.0).abs() < 1e-15);
        assert!((comb_bandwidth(&p, 100.0).unwrap() - 100.0).abs() < 1e-12);
        assert!(comb_bandwidth(&p, 0.0).is_err());
    }

    #[test]
    fn dirichlet_peak_to_background() {
        let p = PhysicalParams::resonant(1.0);
        let spacing = 0.5;
        let grid = Grid::new(-2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI, 4001, 0.001).unwrap();
        let s = vec![C64::new(1.0, 0.0); grid.n_points];
        for half in [1usize, 2, 3, 5] {
            let nc = (2 * half + 1) as f64;
            let comb = CombProfile::equal_lines(half, spacing, 0.2);
            let e = matched_field(&s, &comb, &p, &grid, 0.0);
            for i in (0..grid.n_points).step_by(37) {
                let x = spacing * grid.z(i);
                let d = if (x / 2.0).sin().abs() < 1e-12 {
                    nc
                } else {
                    ((half as f64 + 0.5) * x).sin() / (x / 2.0).sin()
                };
                assert!((e[i] + C64::new(0.4 * d, 0.0)).norm() < 1e-12);
            }
            let mid = 2000;
            // first point of destructive background, z = pi/spacing
            let zb = std::f64::consts::PI / spacing;
            let b = matched_field(&s[..3], &comb, &p, &Grid::new(zb, zb + 1.0, 3, 0.1).unwrap(), 0.0)[0].norm();
            assert!((e[mid].norm() / b - nc).abs() < 1e-9);
        }
    }

    #[test]
    fn single_pair_is_uniform_standing_wave() {
        let p = PhysicalParams::resonant(1.0);
        let grid = Grid::unit_cfl(-10.0, 10.0, 41, 1.0).unwrap();
        let s = gaussian(&grid, 3.0);
        let e = matched_field(&s, &resonant_only(0.5), &p, &grid, 7.0);
        for i in 0..grid.n_points {
            assert!((e[i] + s[i]).norm() < 1e-15);
        }
        let zero = vec![C64::new(0.0, 0.0); grid.n_points];
        assert!(matched_field(&zero, &resonant_only(0.5), &p, &grid, 0.0)
            .iter()
            .all(|v| v.norm() == 0.0));
    }

    #[test]
    fn comb_filters_photons() {
        let p = PhysicalParams::resonant(1.0);
        let grid = Grid::from_spacing(-40.0, 40.0, 0.02, 1.0).unwrap();
        let s = gaussian(&grid, 8.0);
        let comb = CombProfile::equal_lines(2, 0.3, 0.1);
        let r = filtering_comparison(&s, &comb, &p, &grid, 0.0).unwrap();
        assert!(r.photons_comb < r.photons_pair);
        assert!((r.center_density_comb / r.center_density_pair - 1.0).abs() < 0.05);
        assert!(r.fwhm_comb.unwrap() < r.fwhm_pair.unwrap());
    }

    #[test]
    fn spin_diffusion_matches_heat_kernel_width() {
        let grid = Grid::from_spacing(-60.0, 60.0, 0.1, 1.0).unwrap();
        let s = gaussian(&grid, 3.0);
        let d = 0.5;
        let out = spin_diffusion_step(&s, &grid, d, 4.0).unwrap();
        let m0: f64 = out.iter().map(|v| v.re).sum();
        let m2: f64 = (0..grid.n_points).map(|i| out[i].re * grid.z(i).powi(2)).sum();
        assert!((m2 / m0 - (9.0 + 2.0 * d * 4.0)).abs() < 1e-8);
        let same = crate::normal_modes::diffusion_evolve(&s, &grid, d, 4.0).unwrap();
        assert!(out.iter().zip(&same).all(|(a, b)| (a - b).norm() < 1e-10));
        let flat = vec![C64::new(1.0, 0.0); grid.n_points];
        let f = spin_diffusion_step(&flat, &grid, d, 1.0).unwrap();
        assert!(f[300..900].iter().all(|v| (v.re - 1.0).abs() < 1e-12));
    }
}
