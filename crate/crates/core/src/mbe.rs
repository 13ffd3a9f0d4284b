//! Split-step integrator for the secular Maxwell-Bloch equations.
//!
//! Variables per cell: E_+, E_-, P_+ = sigma_ba^(+)/sqrt(N), P_- and S = sigma_bc/sqrt(N).
//! With these envelopes the probe source term is i*g_p*P_pm and the atomic
//! equations carry i*g_p*E_pm, so the coupling is anti-Hermitian.

use crate::error::{invalid, Error, Result};
use crate::linalg::CMatrix;
use crate::model::{Grid, PhysicalParams};
use crate::profile::ControlProfile;
use crate::scalar::{i_unit, is_finite_cx, Complex, Real};

type C<T> = Complex<T>;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState<T> {
    pub t: T,
    pub e_plus: Vec<C<T>>,
    pub e_minus: Vec<C<T>>,
    pub sigma_ba_plus: Vec<C<T>>,
    pub sigma_ba_minus: Vec<C<T>>,
    pub sigma_bc: Vec<C<T>>,
}

impl<T: Real> SystemState<T> {
    pub fn zeros(n: usize, t: T) -> Self {
        let z = vec![C::new(T::zero(), T::zero()); n];
        SystemState {
            t,
            e_plus: z.clone(),
            e_minus: z.clone(),
            sigma_ba_plus: z.clone(),
            sigma_ba_minus: z.clone(),
            sigma_bc: z,
        }
    }

    /// Spin coherence amplitude * exp(-(z-center)^2/(2 width^2)), fields empty.
    pub fn stored_gaussian(grid: &Grid<T>, center: T, width: T, amplitude: C<T>, t: T) -> Self {
        let mut s = Self::zeros(grid.n_points, t);
        for (i, x) in s.sigma_bc.iter_mut().enumerate() {
            let u = (grid.z(i) - center) / width;
            *x = amplitude * (-T::of(0.5) * u * u).exp();
        }
        s
    }

    /// Forward probe pulse inside the medium, dressed as a dark state of the
    /// forward control: S = -(g_p/Omega_+) E_+.
    pub fn probe_pulse(
        grid: &Grid<T>,
        params: &PhysicalParams<T>,
        profile: &ControlProfile<T>,
        center: T,
        width: T,
        amplitude: C<T>,
        t: T,
    ) -> Result<Self> {
        let mut s = Self::zeros(grid.n_points, t);
        for i in 0..grid.n_points {
            let z = grid.z(i);
            let u = (z - center) / width;
            let e = amplitude * (-T::of(0.5) * u * u).exp();
            let (op, _) = profile.control_field_at(params, z, t)?;
            if op.norm() == T::zero() {
                return Err(invalid("initial", "forward control is off at the launch time"));
            }
            s.e_plus[i] = e;
            s.sigma_bc[i] = -e * params.coupling / op;
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.sigma_bc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_bc.is_empty()
    }

    pub fn scaled(&self, alpha: C<T>) -> Self {
        let f = |v: &Vec<C<T>>| v.iter().map(|&x| x * alpha).collect::<Vec<_>>();
        SystemState {
            t: self.t,
            e_plus: f(&self.e_plus),
            e_minus: f(&self.e_minus),
            sigma_ba_plus: f(&self.sigma_ba_plus),
            sigma_ba_minus: f(&self.sigma_ba_minus),
            sigma_bc: f(&self.sigma_bc),
        }
    }

    fn arrays(&self) -> [(&'static str, &Vec<C<T>>); 5] {
        [
            ("E+", &self.e_plus),
            ("E-", &self.e_minus),
            ("sigma_ba+", &self.sigma_ba_plus),
            ("sigma_ba-", &self.sigma_ba_minus),
            ("sigma_bc", &self.sigma_bc),
        ]
    }

    pub fn check_finite(&self, grid: &Grid<T>) -> Result<()> {
        for (name, arr) in self.arrays() {
            if let Some(i) = arr.iter().position(|&x| !is_finite_cx(x)) {
                return Err(Error::NonFinite {
                    field: name,
                    z: grid.z(i).to_f64_lossy(),
                    t: self.t.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// E_pm, P_pm and S.
    Full,
    /// P_pm slaved to E_pm and S.
    Adiabatic,
}

impl Model {
    fn dim(self) -> usize {
        match self {
            Model::Full => 5,
            Model::Adiabatic => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalScheme {
    /// Exact exponential of the local generator with controls at the half-step midpoint.
    Exponential,
    /// Classical Runge-Kutta with a stability check.
    Rk4,
}

/// Right-hand side of the local (cell-wise) equations.
fn local_rhs<T: Real>(
    model: Model,
    p: &PhysicalParams<T>,
    op: C<T>,
    om: C<T>,
    y: &[C<T>],
    dy: &mut [C<T>],
) {
    let i = i_unit::<T>();
    let g = p.coupling;
    let gam = p.optical_rate();
    let spin = p.spin_rate();
    let carrier = C::new(T::zero(), p.carrier_offset);
    match model {
        Model::Full => {
            dy[0] = -carrier * y[0] + i * y[2] * g;
            dy[1] = -carrier * y[1] + i * y[3] * g;
            dy[2] = -gam * y[2] + i * y[0] * g + i * op * y[4];
            dy[3] = -gam * y[3] + i * y[1] * g + i * om * y[4];
            dy[4] = -spin * y[4] + i * op.conj() * y[2] + i * om.conj() * y[3];
        }
        Model::Adiabatic => {
            let pp = i * (y[0] * g + op * y[2]) / gam;
            let pm = i * (y[1] * g + om * y[2]) / gam;
            dy[0] = -carrier * y[0] + i * pp * g;
            dy[1] = -carrier * y[1] + i * pm * g;
            dy[2] = -spin * y[2] + i * op.conj() * pp + i * om.conj() * pm;
        }
    }
}

/// Local generator as a matrix.
pub fn local_generator<T: Real>(model: Model, p: &PhysicalParams<T>, op: C<T>, om: C<T>) -> CMatrix<T> {
    CMatrix::from_linear_map(model.dim(), |x, y| local_rhs(model, p, op, om, x, y))
}

/// Optical coherences slaved to fields and spin: P = i(g_p E + Omega S)/Gamma.
pub fn slaved_polarization<T: Real>(
    p: &PhysicalParams<T>,
    e: C<T>,
    omega: C<T>,
    s: C<T>,
) -> C<T> {
    i_unit::<T>() * (e * p.coupling + omega * s) / p.optical_rate()
}

struct PropagatorCache<T> {
    key: Option<T>,
    controls: Vec<(C<T>, C<T>)>,
    mats: Vec<CMatrix<T>>,
}

pub struct MbeSolver<T> {
    params: PhysicalParams<T>,
    grid: Grid<T>,
    profile: ControlProfile<T>,
    model: Model,
    scheme: LocalScheme,
    control_refresh: Option<T>,
    z: Vec<T>,
    cache: PropagatorCache<T>,
    warnings: Vec<String>,
}

impl<T: Real> MbeSolver<T> {
    pub fn new(
        params: PhysicalParams<T>,
        grid: Grid<T>,
        profile: ControlProfile<T>,
        model: Model,
    ) -> Result<Self> {
        params.validate()?;
        profile.validate()?;
        grid.check_cfl(params.light_speed)?;
        let mut warnings = Vec::new();
        if model == Model::Adiabatic && grid.dt * params.gamma >= T::one() {
            let w = format!(
                "adiabatic solver with dt*gamma = {:.3} >= 1",
                (grid.dt * params.gamma).to_f64_lossy()
            );
            log::warn!("{w}");
            warnings.push(w);
        }
        Ok(MbeSolver {
            params,
            grid,
            profile,
            model,
            scheme: LocalScheme::Exponential,
            control_refresh: None,
            z: grid.positions(),
            cache: PropagatorCache {
                key: None,
                controls: Vec::new(),
                mats: Vec::new(),
            },
            warnings,
        })
    }

    pub fn with_scheme(mut self, scheme: LocalScheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Controls are sampled at the centre of windows of this length and the
    /// propagators reused inside a window.
    pub fn with_control_refresh(mut self, interval: Option<T>) -> Result<Self> {
        if let Some(r) = interval {
            if !(r > T::zero()) {
                return Err(invalid("control_refresh", "must be > 0"));
            }
        }
        self.control_refresh = interval;
        Ok(self)
    }

    pub fn params(&self) -> &PhysicalParams<T> {
        &self.params
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn profile(&self) -> &ControlProfile<T> {
        &self.profile
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn phi_field(&self, t: T) -> Result<Vec<T>> {
        self.profile.phi_field(&self.params, &self.z, t)
    }

    fn controls_at(&self, t: T) -> Result<Vec<(C<T>, C<T>)>> {
        if self.profile.is_uniform() {
            Ok(vec![self.profile.control_field_at(&self.params, self.z[0], t)?])
        } else {
            self.z
                .iter()
                .map(|&z| self.profile.control_field_at(&self.params, z, t))
                .collect()
        }
    }

    fn sample_time(&self, t: T) -> T {
        match self.control_refresh {
            None => t,
            Some(r) => ((t / r).floor() + T::of(0.5)) * r,
        }
    }

    fn refresh(&mut self, t_mid: T, h: T) -> Result<()> {
        let ts = self.sample_time(t_mid);
        if !self.cache.mats.is_empty() && (self.profile.is_static() || self.cache.key == Some(ts)) {
            return Ok(());
        }
        let controls = self.controls_at(ts)?;
        if controls != self.cache.controls || self.cache.mats.is_empty() {
            let hs = C::new(h, T::zero());
            self.cache.mats = controls
                .iter()
                .map(|&(op, om)| local_generator(self.model, &self.params, op, om).scale(hs).expm())
                .collect();
            self.cache.controls = controls;
        }
        self.cache.key = Some(ts);
        Ok(())
    }

    fn gather(&self, st: &SystemState<T>, i: usize, y: &mut [C<T>]) {
        match self.model {
            Model::Full => {
                y[0] = st.e_plus[i];
                y[1] = st.e_minus[i];
                y[2] = st.sigma_ba_plus[i];
                y[3] = st.sigma_ba_minus[i];
                y[4] = st.sigma_bc[i];
            }
            Model::Adiabatic => {
                y[0] = st.e_plus[i];
                y[1] = st.e_minus[i];
                y[2] = st.sigma_bc[i];
            }
        }
    }

    fn scatter(&self, st: &mut SystemState<T>, i: usize, y: &[C<T>]) {
        match self.model {
            Model::Full => {
                st.e_plus[i] = y[0];
                st.e_minus[i] = y[1];
                st.sigma_ba_plus[i] = y[2];
                st.sigma_ba_minus[i] = y[3];
                st.sigma_bc[i] = y[4];
            }
            Model::Adiabatic => {
                st.e_plus[i] = y[0];
                st.e_minus[i] = y[1];
                st.sigma_bc[i] = y[2];
            }
        }
    }

    fn local_exponential(&mut self, st: &mut SystemState<T>, t0: T, h: T) -> Result<()> {
        self.refresh(t0 + h * T::of(0.5), h)?;
        let n = self.model.dim();
        let mut y = [C::new(T::zero(), T::zero()); 5];
        let mut out = y;
        for i in 0..st.len() {
            let k = if self.cache.mats.len() == 1 { 0 } else { i };
            self.gather(st, i, &mut y[..n]);
            self.cache.mats[k].apply(&y[..n], &mut out[..n]);
            self.scatter(st, i, &out[..n]);
        }
        Ok(())
    }

    fn local_rk4(&mut self, st: &mut SystemState<T>, t0: T, h: T) -> Result<()> {
        let n = self.model.dim();
        let half = h * T::of(0.5);
        let c0 = self.controls_at(t0)?;
        let c1 = self.controls_at(t0 + half)?;
        let c2 = self.controls_at(t0 + h)?;
        let bound = c0
            .iter()
            .chain(&c1)
            .chain(&c2)
            .map(|&(op, om)| local_generator(self.model, &self.params, op, om).norm1())
            .fold(T::zero(), T::max);
        if bound * h > T::of(2.5) {
            return Err(invalid(
                "dt",
                format!(
                    "RK4 local step unstable: h*|A| = {:.3} > 2.5",
                    (bound * h).to_f64_lossy()
                ),
            ));
        }
        let zero = C::new(T::zero(), T::zero());
        let (two, six) = (T::of(2.0), T::of(6.0));
        for i in 0..st.len() {
            let k = if c0.len() == 1 { 0 } else { i };
            let mut y = [zero; 5];
            self.gather(st, i, &mut y[..n]);
            let (mut k1, mut k2, mut k3, mut k4, mut tmp) = ([zero; 5], [zero; 5], [zero; 5], [zero; 5], [zero; 5]);
            let rhs = |c: (C<T>, C<T>), x: &[C<T>], d: &mut [C<T>]| local_rhs(self.model, &self.params, c.0, c.1, x, d);
            rhs(c0[k], &y[..n], &mut k1[..n]);
            for j in 0..n {
                tmp[j] = y[j] + k1[j] * half;
            }
            rhs(c1[k], &tmp[..n], &mut k2[..n]);
            for j in 0..n {
                tmp[j] = y[j] + k2[j] * half;
            }
            rhs(c1[k], &tmp[..n], &mut k3[..n]);
            for j in 0..n {
                tmp[j] = y[j] + k3[j] * h;
            }
            rhs(c2[k], &tmp[..n], &mut k4[..n]);
            for j in 0..n {
                y[j] = y[j] + (k1[j] + (k2[j] + k3[j]) * two + k4[j]) * (h / six);
            }
            self.scatter(st, i, &y[..n]);
        }
        Ok(())
    }

    fn local(&mut self, st: &mut SystemState<T>, t0: T, h: T) -> Result<()> {
        match self.scheme {
            LocalScheme::Exponential => self.local_exponential(st, t0, h),
            LocalScheme::Rk4 => self.local_rk4(st, t0, h),
        }
    }

    fn advect(&self, st: &mut SystemState<T>) {
        advect_pair(&mut st.e_plus, &mut st.e_minus, self.grid.cfl(self.params.light_speed));
    }

    fn reconstruct_polarization(&self, st: &mut SystemState<T>) -> Result<()> {
        let controls = self.controls_at(st.t)?;
        for i in 0..st.len() {
            let (op, om) = controls[if controls.len() == 1 { 0 } else { i }];
            st.sigma_ba_plus[i] = slaved_polarization(&self.params, st.e_plus[i], op, st.sigma_bc[i]);
            st.sigma_ba_minus[i] = slaved_polarization(&self.params, st.e_minus[i], om, st.sigma_bc[i]);
        }
        Ok(())
    }

    /// Advances the state by one time step dt (Strang splitting).
    pub fn step(&mut self, st: &mut SystemState<T>) -> Result<()> {
        if st.len() != self.grid.n_points {
            return Err(Error::Shape(format!(
                "state has {} points, grid {}",
                st.len(),
                self.grid.n_points
            )));
        }
        let dt = self.grid.dt;
        let h = dt * T::of(0.5);
        let t0 = st.t;
        self.local(st, t0, h)?;
        self.advect(st);
        self.local(st, t0 + h, h)?;
        st.t = t0 + dt;
        if self.model == Model::Adiabatic {
            self.reconstruct_polarization(st)?;
        }
        st.check_finite(&self.grid)
    }
}

/// Shifts E_+ towards larger z and E_- towards smaller z by nu cells (nu <= 1).
/// Zero inflow, open outflow.
pub(crate) fn advect_pair<T: Real>(e_plus: &mut [C<T>], e_minus: &mut [C<T>], nu: T) {
    let zero = C::new(T::zero(), T::zero());
    let n = e_plus.len();
    if n == 0 {
        return;
    }
    if (nu - T::one()).abs() < T::of(1e-9) {
        e_plus.rotate_right(1);
        e_plus[0] = zero;
        e_minus.rotate_left(1);
        e_minus[n - 1] = zero;
    } else {
        // first-order upwind interpolation for fractional shifts
        let a = T::one() - nu;
        for i in (0..n).rev() {
            let up = if i == 0 { zero } else { e_plus[i - 1] };
            e_plus[i] = e_plus[i] * a + up * nu;
        }
        for i in 0..n {
            let up = if i + 1 == n { zero } else { e_minus[i + 1] };
            e_minus[i] = e_minus[i] * a + up * nu;
        }
    }
}

/// One full-model step with a freshly built solver.
pub fn step_full<T: Real>(
    state: &SystemState<T>,
    profile: &ControlProfile<T>,
    params: &PhysicalParams<T>,
    grid: &Grid<T>,
) -> Result<SystemState<T>> {
    let mut s = MbeSolver::new(*params, *grid, profile.clone(), Model::Full)?;
    let mut out = state.clone();
    s.step(&mut out)?;
    Ok(out)
}

/// One adiabatic-model step with a freshly built solver.
pub fn step_adiabatic<T: Real>(
    state: &SystemState<T>,
    profile: &ControlProfile<T>,
    params: &PhysicalParams<T>,
    grid: &Grid<T>,
) -> Result<SystemState<T>> {
    let mut s = MbeSolver::new(*params, *grid, profile.clone(), Model::Adiabatic)?;
    let mut out = state.clone();
    s.step(&mut out)?;
    Ok(out)
}

/// Integration window and thresholds for moment evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentWindow<T> {
    /// Reference point for the second moment.
    pub center: T,
    /// Cells excluded at each boundary.
    pub buffer: usize,
    /// |integral E_S| below this leaves the moments undefined.
    pub min_integral: T,
}

impl<T: Real> Default for MomentWindow<T> {
    fn default() -> Self {
        MomentWindow {
            center: T::zero(),
            buffer: 4,
            min_integral: T::of(1e-10),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables<T> {
    pub t: T,
    /// Re(int (z-c)^2 E_S / int E_S).
    pub width_sq: Option<T>,
    /// Re(int z E_S / int E_S).
    pub first_moment: Option<T>,
    /// Re(int (z-c)^2 S / int S) for the spin coherence.
    pub spin_width_sq: Option<T>,
    /// int (|E_+|^2 + |E_-|^2 + |S|^2) dz.
    pub total_excitation: T,
    /// max_z (|E_+|^2 + |E_-|^2 + |S|^2).
    pub peak_density: T,
    /// max_z (|E_+|^2 + |E_-|^2), the photonic part alone.
    pub peak_field: T,
    /// E_+/E_- at the maximum of |E_S|.
    pub ratio: Option<C<T>>,
    pub sum_integral: C<T>,
    /// ||E_D|| / ||E_S||.
    pub difference_ratio: Option<T>,
    /// Largest amplitude in the buffer cells relative to the peak amplitude.
    pub boundary_ratio: T,
    pub center_z: T,
}

pub fn observables<T: Real>(
    state: &SystemState<T>,
    grid: &Grid<T>,
    phi: &[T],
    window: &MomentWindow<T>,
) -> Result<Observables<T>> {
    let n = state.len();
    if phi.len() != n || grid.n_points != n {
        return Err(Error::Shape("phi field, grid and state lengths differ".into()));
    }
    if 2 * window.buffer >= n {
        return Err(invalid("buffer", "window leaves no interior cells"));
    }
    state.check_finite(grid)?;
    let dz = grid.dz();
    let zero = C::new(T::zero(), T::zero());
    let (mut a0, mut a1, mut a2) = (zero, zero, zero);
    let (mut s0, mut s2) = (zero, zero);
    let (mut ns, mut nd) = (T::zero(), T::zero());
    let mut n_tot = T::zero();
    let mut peak = T::zero();
    let mut peak_field = T::zero();
    let mut best = (T::zero(), 0usize);
    for i in window.buffer..n - window.buffer {
        let (s, c) = phi[i].sin_cos();
        let es = state.e_plus[i] * c + state.e_minus[i] * s;
        let ed = state.e_plus[i] * s - state.e_minus[i] * c;
        let z = grid.z(i);
        let u = z - window.center;
        a0 = a0 + es;
        a1 = a1 + es * z;
        a2 = a2 + es * (u * u);
        s0 = s0 + state.sigma_bc[i];
        s2 = s2 + state.sigma_bc[i] * (u * u);
        ns = ns + es.norm_sqr();
        nd = nd + ed.norm_sqr();
        let field = state.e_plus[i].norm_sqr() + state.e_minus[i].norm_sqr();
        peak_field = peak_field.max(field);
        let dens = field + state.sigma_bc[i].norm_sqr();
        n_tot = n_tot + dens;
        peak = peak.max(dens);
        if es.norm() > best.0 {
            best = (es.norm(), i);
        }
    }
    let sum_integral = a0 * dz;
    let defined = sum_integral.norm() > window.min_integral;
    let width_sq = defined.then(|| (a2 / a0).re);
    let first_moment = defined.then(|| (a1 / a0).re);
    let spin_width_sq = (s0.norm() * dz > window.min_integral).then(|| (s2 / s0).re);
    let ratio = {
        let em = state.e_minus[best.1];
        (best.0 > T::zero() && em.norm() > T::zero()).then(|| state.e_plus[best.1] / em)
    };
    let difference_ratio = (ns > T::zero()).then(|| (nd / ns).sqrt());
    let amp = |i: usize| {
        state.e_plus[i]
            .norm()
            .max(state.e_minus[i].norm())
            .max(state.sigma_bc[i].norm())
    };
    let global = (0..n).map(amp).fold(T::zero(), T::max);
    let edge_cells = window.buffer.max(1);
    let edge = (0..edge_cells)
        .chain(n - edge_cells..n)
        .map(amp)
        .fold(T::zero(), T::max);
    Ok(Observables {
        t: state.t,
        width_sq,
        first_moment,
        spin_width_sq,
        total_excitation: n_tot * dz,
        peak_density: peak,
        peak_field,
        ratio,
        sum_integral,
        difference_ratio,
        boundary_ratio: if global > T::zero() { edge / global } else { T::zero() },
        center_z: grid.z(best.1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunPlan<T> {
    pub duration: T,
    /// Observables every this many steps.
    pub observe_every: usize,
    /// Full state snapshots every this many steps; 0 keeps only the first and last.
    pub snapshot_every: usize,
    pub window: MomentWindow<T>,
}

#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub observables: Vec<Observables<T>>,
    pub snapshots: Vec<SystemState<T>>,
    pub final_state: SystemState<T>,
    pub steps: usize,
    /// Set when the run stopped early; outputs up to the failure are kept.
    pub failure: Option<Error>,
}

/// Integrates from `initial` for `plan.duration`, recording observables and snapshots.
pub fn run<T: Real>(solver: &mut MbeSolver<T>, initial: SystemState<T>, plan: &RunPlan<T>) -> RunOutput<T> {
    let dt = solver.grid().dt;
    let steps = (plan.duration / dt).round().to_usize().unwrap_or(0);
    let t0 = initial.t;
    let grid = *solver.grid();
    let mut out = RunOutput {
        observables: Vec::new(),
        snapshots: vec![initial.clone()],
        final_state: initial,
        steps: 0,
        failure: None,
    };
    let observe = |solver: &MbeSolver<T>, st: &SystemState<T>| -> Result<Observables<T>> {
        let phi = solver.phi_field(st.t)?;
        observables(st, &grid, &phi, &plan.window)
    };
    match observe(solver, &out.final_state) {
        Ok(o) => out.observables.push(o),
        Err(e) => {
            out.failure = Some(e);
            return out;
        }
    }
    let mut st = out.final_state.clone();
    for k in 1..=steps {
        if let Err(e) = solver.step(&mut st) {
            out.failure = Some(e);
            break;
        }
        st.t = t0 + dt * T::of_usize(k);
        out.steps = k;
        let last = k == steps;
        if plan.observe_every > 0 && (k % plan.observe_every == 0 || last) {
            match observe(solver, &st) {
                Ok(o) => out.observables.push(o),
                Err(e) => {
                    out.failure = Some(e);
                    break;
                }
            }
        }
        if (plan.snapshot_every > 0 && k % plan.snapshot_every == 0) || (last && plan.snapshot_every == 0) {
            out.snapshots.push(st.clone());
        }
    }
    out.final_state = st;
    out
}
