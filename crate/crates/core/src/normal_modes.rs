//! Sum and difference normal modes, their propagation equations and the
//! diffusion and drift laws that follow from them.

use crate::error::{invalid, Error, Result};
use crate::model::{Grid, PhysicalParams};
use crate::numerics::{derivative_real, derivative_zero_padded, heat_kernel, integrate};
use crate::scalar::{Complex, Real};

type C<T> = Complex<T>;

/// E_S = cos(phi) E_+ + sin(phi) E_-, E_D = sin(phi) E_+ - cos(phi) E_-.
pub fn to_normal_modes<T: Real>(e_plus: &[C<T>], e_minus: &[C<T>], phi: &[T]) -> Result<(Vec<C<T>>, Vec<C<T>>)> {
    check_len(e_plus.len(), e_minus.len(), phi.len())?;
    Ok(phi
        .iter()
        .zip(e_plus.iter().zip(e_minus))
        .map(|(&p, (&a, &b))| {
            let (s, c) = p.sin_cos();
            (a * c + b * s, a * s - b * c)
        })
        .unzip())
}

/// Inverse of [`to_normal_modes`]; the map is its own inverse.
pub fn from_normal_modes<T: Real>(e_s: &[C<T>], e_d: &[C<T>], phi: &[T]) -> Result<(Vec<C<T>>, Vec<C<T>>)> {
    to_normal_modes(e_s, e_d, phi)
}

fn check_len(a: usize, b: usize, c: usize) -> Result<()> {
    if a != b || a != c {
        return Err(Error::Shape(format!("lengths {a}, {b}, {c} differ")));
    }
    Ok(())
}

/// Normal mode fields with static mixing angles theta(z), phi(z).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalModeState<T> {
    pub e_s: Vec<C<T>>,
    pub e_d: Vec<C<T>>,
    pub phi: Vec<T>,
    pub theta: Vec<T>,
    pub t: T,
}

impl<T: Real> NormalModeState<T> {
    pub fn group_velocity(&self, params: &PhysicalParams<T>) -> Vec<T> {
        self.theta
            .iter()
            .map(|&th| {
                let c = th.cos();
                params.light_speed * c * c
            })
            .collect()
    }
}

struct Coefficients<T> {
    v: Vec<T>,
    sin2: Vec<T>,
    cos2: Vec<T>,
    dphi: Vec<T>,
    kappa: Vec<T>,
}

fn coefficients<T: Real>(st: &NormalModeState<T>, params: &PhysicalParams<T>, dz: T) -> Coefficients<T> {
    let v = st.group_velocity(params);
    let two = T::of(2.0);
    let kappa = st
        .theta
        .iter()
        .map(|&th| {
            let (s, c) = th.sin_cos();
            params.carrier_offset * c * c + params.two_photon_detuning * s * s
        })
        .collect();
    Coefficients {
        v,
        sin2: st.phi.iter().map(|&p| (two * p).sin()).collect(),
        cos2: st.phi.iter().map(|&p| (two * p).cos()).collect(),
        dphi: derivative_real(&st.phi, dz),
        kappa,
    }
}

fn rhs<T: Real>(
    k: &Coefficients<T>,
    params: &PhysicalParams<T>,
    dz: T,
    es: &[C<T>],
    ed: &[C<T>],
    des: &mut [C<T>],
    ded: &mut [C<T>],
) {
    let c = params.light_speed;
    let damp = C::new(params.coupling * params.coupling, T::zero()) / params.optical_rate();
    let ses = derivative_zero_padded(es, dz);
    let sed = derivative_zero_padded(ed, dz);
    for i in 0..es.len() {
        let (v, s2, c2, p1) = (k.v[i], k.sin2[i], k.cos2[i], k.dphi[i]);
        let phase = C::new(T::zero(), k.kappa[i]);
        des[i] = -ses[i] * (v * c2) - sed[i] * (v * s2) + (es[i] * s2 - ed[i] * c2) * (v * p1) - phase * es[i];
        ded[i] = sed[i] * (c * c2) - ses[i] * (c * s2) - damp * ed[i] - (es[i] * c2 + ed[i] * s2) * (c * p1)
            - phase * ed[i];
    }
}

/// Largest stable RK4 substep for the semi-discrete normal-mode equations.
pub fn stable_substep<T: Real>(params: &PhysicalParams<T>, grid: &Grid<T>) -> T {
    let transport = T::of(0.9) * grid.dz() / params.light_speed;
    let damp = (params.coupling * params.coupling / params.optical_rate().norm()).max(T::epsilon());
    transport.min(T::of(2.0) / damp)
}

/// Advances the normal modes by `dt` with RK4 substeps on the grid.
pub fn evolve_normal_modes<T: Real>(
    state: &NormalModeState<T>,
    params: &PhysicalParams<T>,
    grid: &Grid<T>,
    dt: T,
) -> Result<NormalModeState<T>> {
    params.validate()?;
    let n = grid.n_points;
    if state.e_s.len() != n || state.e_d.len() != n || state.phi.len() != n || state.theta.len() != n {
        return Err(Error::Shape("normal mode state does not match the grid".into()));
    }
    if dt < T::zero() {
        return Err(invalid("dt", "must be >= 0"));
    }
    let dz = grid.dz();
    let k = coefficients(state, params, dz);
    let h_max = stable_substep(params, grid);
    let steps = (dt / h_max).ceil().to_usize().unwrap_or(0).max(1);
    let h = dt / T::of_usize(steps);
    let zero = C::new(T::zero(), T::zero());
    let mut es = state.e_s.clone();
    let mut ed = state.e_d.clone();
    let mut k1 = (vec![zero; n], vec![zero; n]);
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    let half = h * T::of(0.5);
    for _ in 0..steps {
        rhs(&k, params, dz, &es, &ed, &mut k1.0, &mut k1.1);
        for i in 0..n {
            tmp.0[i] = es[i] + k1.0[i] * half;
            tmp.1[i] = ed[i] + k1.1[i] * half;
        }
        rhs(&k, params, dz, &tmp.0, &tmp.1, &mut k2.0, &mut k2.1);
        for i in 0..n {
            tmp.0[i] = es[i] + k2.0[i] * half;
            tmp.1[i] = ed[i] + k2.1[i] * half;
        }
        rhs(&k, params, dz, &tmp.0, &tmp.1, &mut k3.0, &mut k3.1);
        for i in 0..n {
            tmp.0[i] = es[i] + k3.0[i] * h;
            tmp.1[i] = ed[i] + k3.1[i] * h;
        }
        rhs(&k, params, dz, &tmp.0, &tmp.1, &mut k4.0, &mut k4.1);
        let w = h / T::of(6.0);
        let two = T::of(2.0);
        for i in 0..n {
            es[i] = es[i] + (k1.0[i] + (k2.0[i] + k3.0[i]) * two + k4.0[i]) * w;
            ed[i] = ed[i] + (k1.1[i] + (k2.1[i] + k3.1[i]) * two + k4.1[i]) * w;
        }
    }
    let t = state.t + dt;
    for (name, arr) in [("E_S", &es), ("E_D", &ed)] {
        if let Some(i) = arr.iter().position(|x| !(x.re.is_finite() && x.im.is_finite())) {
            return Err(Error::NonFinite {
                field: name,
                z: grid.z(i).to_f64_lossy(),
                t: t.to_f64_lossy(),
            });
        }
    }
    Ok(NormalModeState {
        e_s: es,
        e_d: ed,
        phi: state.phi.clone(),
        theta: state.theta.clone(),
        t,
    })
}

/// Adiabatically eliminated difference mode.
#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticDifference<T> {
    pub e_d: Vec<C<T>>,
    /// Set when the envelope varies on the scale of l_abs or phi varies too fast.
    pub precondition_violated: bool,
}

/// E_D = -sin(2 phi) l_abs dE_S/dz - cos(2 phi) l_abs (dphi/dz) E_S.
pub fn adiabatic_e_d<T: Real>(
    e_s: &[C<T>],
    phi: &[T],
    params: &PhysicalParams<T>,
    grid: &Grid<T>,
) -> Result<AdiabaticDifference<T>> {
    check_len(e_s.len(), phi.len(), grid.n_points)?;
    let dz = grid.dz();
    let la = params.absorption_length();
    let ds = derivative_zero_padded(e_s, dz);
    let dphi = derivative_real(phi, dz);
    let two = T::of(2.0);
    let e_d: Vec<C<T>> = (0..e_s.len())
        .map(|i| {
            let (s2, c2) = (two * phi[i]).sin_cos();
            -ds[i] * (s2 * la) - e_s[i] * (c2 * la * dphi[i])
        })
        .collect();
    let peak = e_s.iter().fold(T::zero(), |m, x| m.max(x.norm()));
    let slope = ds.iter().fold(T::zero(), |m, x| m.max(x.norm()));
    let phi_rate = (0..phi.len())
        .map(|i| (dphi[i] * (two * phi[i]).sin()).abs())
        .fold(T::zero(), T::max);
    let limit = T::of(0.2);
    let precondition_violated = slope * la > limit * peak || phi_rate * la > limit;
    if precondition_violated {
        log::warn!("adiabatic E_D outside its validity range");
    }
    Ok(AdiabaticDifference {
        e_d,
        precondition_violated,
    })
}

/// Heat-kernel evolution of E_S with diffusivity D over time t.
pub fn diffusion_evolve<T: Real>(e_s0: &[C<T>], grid: &Grid<T>, diffusivity: T, t: T) -> Result<Vec<C<T>>> {
    if t < T::zero() || diffusivity < T::zero() {
        return Err(invalid("diffusion", "t and D must be >= 0"));
    }
    Ok(heat_kernel(e_s0, grid.dz(), diffusivity, t))
}

/// Delta z^2(t) = d0 + 2 D (t - t0).
pub fn width_law<T: Real>(d0: T, diffusivity: T, t0: T, t: T) -> T {
    d0 + T::of(2.0) * diffusivity * (t - t0)
}

/// n_tot(t) = n0 dz0 / sqrt(dz0^2 + 2 D t).
pub fn diffusive_decay<T: Real>(n0: T, dz0: T, diffusivity: T, t: T) -> T {
    n0 * dz0 / (dz0 * dz0 + T::of(2.0) * diffusivity * t).sqrt()
}

/// d(t) = d0 + 2 D t + 2 D (l_abs/c)(1 - g0/l_abs)(exp(-c t/l_abs) - 1).
pub fn exact_width<T: Real>(d0: T, g0: T, diffusivity: T, l_abs: T, light_speed: T, t: T) -> T {
    let two = T::of(2.0);
    let tau = l_abs / light_speed;
    d0 + two * diffusivity * t + two * diffusivity * tau * (T::one() - g0 / l_abs) * ((-t / tau).exp_m1())
}

/// Second-moment ODE with a time-dependent group velocity:
/// d' = 2 v(t) g, g' = -(c/l_abs) g + c, integrated with RK4 from t0 to t.
pub fn exact_width_varying<T: Real>(
    d0: T,
    g0: T,
    l_abs: T,
    light_speed: T,
    v: impl Fn(T) -> T,
    t0: T,
    t: T,
) -> T {
    exact_width_series(d0, g0, l_abs, light_speed, v, t0, &[t])[0]
}

/// [`exact_width_varying`] at ascending `times`, integrated in one sweep.
/// Times before t0 return d0.
pub fn exact_width_series<T: Real>(
    d0: T,
    g0: T,
    l_abs: T,
    light_speed: T,
    v: impl Fn(T) -> T,
    t0: T,
    times: &[T],
) -> Vec<T> {
    let tau = l_abs / light_speed;
    let h_max = (tau * T::of(0.05)).min(T::of(0.05));
    let two = T::of(2.0);
    let f = |s: T, g: T| (two * v(s) * g, light_speed - g / tau);
    let (mut d, mut g, mut now) = (d0, g0, t0);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t > now {
            let steps = ((t - now) / h_max).ceil().to_usize().unwrap_or(1).max(1);
            let h = (t - now) / T::of_usize(steps);
            for k in 0..steps {
                let s = now + h * T::of_usize(k);
                let hh = h * T::of(0.5);
                let (a1, b1) = f(s, g);
                let (a2, b2) = f(s + hh, g + b1 * hh);
                let (a3, b3) = f(s + hh, g + b2 * hh);
                let (a4, b4) = f(s + h, g + b3 * h);
                d = d + (a1 + two * (a2 + a3) + a4) * h / T::of(6.0);
                g = g + (b1 + two * (b2 + b3) + b4) * h / T::of(6.0);
            }
            now = t;
        }
        out.push(if t <= t0 { d0 } else { d });
    }
    out
}

/// Drift speed and modified diffusivity for constant unequal beams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftParameters<T> {
    pub speed: T,
    pub diffusivity: T,
}

/// (v_gr cos 2phi, v_gr l_abs sin^2 2phi).
pub fn drift_parameters<T: Real>(phi: T, v_gr: T, params: &PhysicalParams<T>) -> DriftParameters<T> {
    let (s2, c2) = (T::of(2.0) * phi).sin_cos();
    DriftParameters {
        speed: v_gr * c2,
        diffusivity: v_gr * params.absorption_length() * s2 * s2,
    }
}

/// d = Re int z^2 E_S / A, g1 = Re int z E_D / A, A = int E_S.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentState<T> {
    pub d: T,
    pub g1: T,
    pub a: C<T>,
}

pub fn moments<T: Real>(e_s: &[C<T>], e_d: &[C<T>], grid: &Grid<T>) -> Result<MomentState<T>> {
    check_len(e_s.len(), e_d.len(), grid.n_points)?;
    let dz = grid.dz();
    let a = integrate(e_s, dz);
    if a.norm() == T::zero() {
        return Err(invalid("E_S", "integral vanishes, moments undefined"));
    }
    let (mut m2, mut m1) = (C::new(T::zero(), T::zero()), C::new(T::zero(), T::zero()));
    for i in 0..e_s.len() {
        let z = grid.z(i);
        m2 = m2 + e_s[i] * (z * z);
        m1 = m1 + e_d[i] * z;
    }
    Ok(MomentState {
        d: (m2 * dz / a).re,
        g1: (m1 * dz / a).re,
        a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    type C64 = Complex<f64>;

    fn params() -> PhysicalParams<f64> {
        PhysicalParams::resonant(1.0)
    }

    fn gaussian(grid: &Grid<f64>, sigma: f64) -> Vec<C64> {
        (0..grid.n_points)
            .map(|i| {
                let z = grid.z(i);
                C64::new((-z * z / (2.0 * sigma * sigma)).exp(), 0.0)
            })
            .collect()
    }

    #[test]
    fn matched_fields_have_no_difference_mode() {
        let (s, d) = to_normal_modes(&[C64::new(1.0, 0.0)], &[C64::new(1.0, 0.0)], &[FRAC_PI_4]).unwrap();
        assert!((s[0].re - 2f64.sqrt()).abs() < 1e-15);
        assert!(d[0].norm() < 1e-15);
        let (s, d) = to_normal_modes(&[C64::new(0.3, 0.1)], &[C64::new(-2.0, 1.0)], &[0.0]).unwrap();
        assert_eq!(s[0], C64::new(0.3, 0.1));
        assert_eq!(d[0], C64::new(2.0, -1.0));
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(v in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0, 0.0f64..1.5708), 1..50)) {
            let ep: Vec<C64> = v.iter().map(|x| C64::new(x.0, x.1)).collect();
            let em: Vec<C64> = v.iter().map(|x| C64::new(x.2, x.3)).collect();
            let phi: Vec<f64> = v.iter().map(|x| x.4).collect();
            let (s, d) = to_normal_modes(&ep, &em, &phi).unwrap();
            let (a, b) = from_normal_modes(&s, &d, &phi).unwrap();
            for i in 0..ep.len() {
                prop_assert!((a[i] - ep[i]).norm() < 1e-14);
                prop_assert!((b[i] - em[i]).norm() < 1e-14);
            }
        }

        #[test]
        fn exact_width_with_fast_relaxation_is_width_law(d0 in 0.0f64..500.0, g0 in -5.0f64..5.0, dd in 0.01f64..2.0, t in 0.0f64..1000.0) {
            let fast = exact_width(d0, g0, dd, 1.0, 1e12, t);
            prop_assert!((fast - width_law(d0, dd, 0.0, t)).abs() < 1e-6 * (1.0 + fast.abs()));
        }
    }

    #[test]
    fn constant_field_is_stationary() {
        let g = Grid::<f64>::unit_cfl(-10.0, 10.0, 101, 1.0).unwrap();
        let st = NormalModeState {
            e_s: vec![C64::new(1.0, 0.0); 101],
            e_d: vec![C64::new(0.0, 0.0); 101],
            phi: vec![FRAC_PI_4; 101],
            theta: vec![FRAC_PI_4; 101],
            t: 0.0,
        };
        let out = evolve_normal_modes(&st, &params(), &g, 1.0).unwrap();
        // edge effects from the zero padding travel inwards at c
        for i in 30..71 {
            assert!((out.e_s[i] - C64::new(1.0, 0.0)).norm() < 1e-12, "{i} {}", out.e_s[i]);
            assert!(out.e_d[i].norm() < 1e-12);
        }
    }

    #[test]
    fn homogeneous_equal_beams_reduce_to_simple_pair() {
        // d/dt E_S = -v dE_D/dz, d/dt E_D = -c dE_S/dz - (c/l_abs) E_D
        let g = Grid::<f64>::unit_cfl(-20.0, 20.0, 401, 1.0).unwrap();
        let p = params();
        let e_s = gaussian(&g, 3.0);
        let e_d: Vec<C64> = e_s.iter().map(|x| x * 0.1).collect();
        let st = NormalModeState { e_s: e_s.clone(), e_d: e_d.clone(), phi: vec![FRAC_PI_4; 401], theta: vec![FRAC_PI_4; 401], t: 0.0 };
        let k = coefficients(&st, &p, g.dz());
        let mut des = vec![C64::new(0.0, 0.0); 401];
        let mut ded = des.clone();
        rhs(&k, &p, g.dz(), &e_s, &e_d, &mut des, &mut ded);
        let ds = derivative_zero_padded(&e_s, g.dz());
        let dd = derivative_zero_padded(&e_d, g.dz());
        for i in 0..401 {
            assert!((des[i] + dd[i] * 0.5).norm() < 1e-15);
            assert!((ded[i] + ds[i] + e_d[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn adiabatic_difference_of_gaussian() {
        let g = Grid::<f64>::unit_cfl(-40.0, 40.0, 1601, 1.0).unwrap();
        let sigma = 5.0;
        let e_s = gaussian(&g, sigma);
        let out = adiabatic_e_d(&e_s, &vec![FRAC_PI_4; 1601], &params(), &g).unwrap();
        for i in 0..1601 {
            let z = g.z(i);
            let expect = z / (sigma * sigma) * e_s[i].re;
            assert!((out.e_d[i].re - expect).abs() < 1e-7);
        }
        assert!(!out.precondition_violated);
        let flat = adiabatic_e_d(&vec![C64::new(2.0, 0.0); 1601], &vec![FRAC_PI_4; 1601], &params(), &g).unwrap();
        assert!(flat.e_d[800].norm() < 1e-14);
    }

    #[test]
    fn diffusion_of_gaussian_widens_by_2dt() {
        let g = Grid::<f64>::unit_cfl(-150.0, 150.0, 1201, 1.0).unwrap();
        let e = gaussian(&g, 10.0);
        assert_eq!(diffusion_evolve(&e, &g, 0.5, 0.0).unwrap(), e);
        let out = diffusion_evolve(&e, &g, 0.5, 100.0).unwrap();
        let zeros = vec![C64::new(0.0, 0.0); 1201];
        let m = moments(&out, &zeros, &g).unwrap();
        assert!((m.d - 200.0).abs() < 1e-8);
        let before = integrate(&e, g.dz());
        assert!((m.a - before).norm() < 1e-10);
    }

    #[test]
    fn width_and_decay_laws() {
        assert_eq!(width_law(100.0, 0.5, 10.0, 10.0), 100.0);
        assert_eq!(width_law(100.0, 0.0, 0.0, 50.0), 100.0);
        assert_eq!(diffusive_decay(2.0, 10.0, 0.5, 0.0), 2.0);
        assert!((diffusive_decay(1.0f64, 10.0, 0.5, 300.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_width_limits() {
        assert_eq!(exact_width(100.0, 0.3, 0.5, 1.0, 1.0, 0.0), 100.0);
        assert!((exact_width(100.0f64, 1.0, 0.5, 1.0, 1.0, 37.0) - 137.0).abs() < 1e-12);
        // g0 = 0, t << l_abs/c: d ~ d0 + (D c/l_abs) t^2
        let t = 1e-3f64;
        let d = exact_width(0.0, 0.0, 0.5, 1.0, 1.0, t);
        assert!((d - 0.5 * t * t).abs() < 1e-3 * 0.5 * t * t);
    }

    #[test]
    fn varying_velocity_ode_matches_closed_form() {
        let closed = exact_width(50.0f64, 0.0, 0.5 * 2.0, 2.0, 1.0, 30.0);
        let ode = exact_width_varying(50.0, 0.0, 2.0, 1.0, |_| 0.5, 0.0, 30.0);
        assert!((closed - ode).abs() < 1e-9);
    }

    #[test]
    fn drift_limits() {
        let p = params();
        let eq = drift_parameters(FRAC_PI_4, 0.5, &p);
        assert!(eq.speed.abs() < 1e-16 && (eq.diffusivity - 0.5).abs() < 1e-15);
        let single = drift_parameters(0.0, 0.5, &p);
        assert_eq!((single.speed, single.diffusivity), (0.5, 0.0));
    }

    #[test]
    fn moment_closure_along_trajectories() {
        let g = Grid::<f64>::unit_cfl(-60.0, 60.0, 1201, 1.0).unwrap();
        let p = params();
        let e_s = gaussian(&g, 6.0);
        let e_d = adiabatic_e_d(&e_s, &vec![FRAC_PI_4; 1201], &p, &g).unwrap().e_d;
        let mut st = NormalModeState { e_s, e_d, phi: vec![FRAC_PI_4; 1201], theta: vec![FRAC_PI_4; 1201], t: 0.0 };
        let h = 0.5;
        let mut prev = moments(&st.e_s, &st.e_d, &g).unwrap();
        for _ in 0..20 {
            let next_st = evolve_normal_modes(&st, &p, &g, h).unwrap();
            let next = moments(&next_st.e_s, &next_st.e_d, &g).unwrap();
            let mid = 0.5 * (prev.g1 + next.g1);
            let dd = (next.d - prev.d) / h;
            let dg = (next.g1 - prev.g1) / h;
            assert!((dd - 2.0 * 0.5 * mid).abs() < 2e-3, "d' {dd} vs {}", mid);
            assert!((dg - (1.0 - mid)).abs() < 2e-3);
            assert!((next.a - prev.a).norm() < 1e-10);
            prev = next;
            st = next_st;
        }
    }
}
