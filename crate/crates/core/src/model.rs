//! Physical constants, the spatial grid and mixing angles.
//!
//! Simulation units: the collective coupling g*sqrt(N) and the speed of light
//! are both 1 unless configured otherwise, so l_abs = gamma.

use crate::error::{invalid, Error, Result};
use crate::scalar::{Complex, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams<T> {
    /// Collective probe coupling g*sqrt(N).
    pub coupling: T,
    /// Optical coherence decay rate.
    pub gamma: T,
    /// Ground state (spin) decay rate.
    pub gamma0: T,
    pub light_speed: T,
    pub one_photon_detuning: T,
    pub two_photon_detuning: T,
    /// Probe carrier offset from the control carrier, omega - omega_c.
    pub carrier_offset: T,
    pub wavevector_mismatch: T,
}

impl<T: Real> PhysicalParams<T> {
    /// Resonant parameters in simulation units (g*sqrt(N) = c = 1).
    pub fn resonant(gamma: T) -> Self {
        PhysicalParams {
            coupling: T::one(),
            gamma,
            gamma0: T::zero(),
            light_speed: T::one(),
            one_photon_detuning: T::zero(),
            two_photon_detuning: T::zero(),
            carrier_offset: T::zero(),
            wavevector_mismatch: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("coupling", self.coupling),
            ("gamma", self.gamma),
            ("gamma0", self.gamma0),
            ("light_speed", self.light_speed),
            ("one_photon_detuning", self.one_photon_detuning),
            ("two_photon_detuning", self.two_photon_detuning),
            ("carrier_offset", self.carrier_offset),
            ("wavevector_mismatch", self.wavevector_mismatch),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if self.coupling <= T::zero() {
            return Err(invalid("coupling", "must be > 0"));
        }
        if self.gamma <= T::zero() {
            return Err(invalid("gamma", "must be > 0"));
        }
        if self.light_speed <= T::zero() {
            return Err(invalid("light_speed", "must be > 0"));
        }
        if self.gamma0 < T::zero() {
            return Err(invalid("gamma0", "must be >= 0"));
        }
        Ok(())
    }

    /// l_abs = c*gamma/g_p^2.
    pub fn absorption_length(&self) -> T {
        self.light_speed * self.gamma / (self.coupling * self.coupling)
    }

    /// OD = L/l_abs.
    pub fn optical_depth(&self, length: T) -> T {
        length / self.absorption_length()
    }

    /// Complex optical decay Gamma = gamma + i(delta + Delta).
    pub fn optical_rate(&self) -> Complex<T> {
        Complex::new(self.gamma, self.two_photon_detuning + self.one_photon_detuning)
    }

    /// Complex spin decay gamma0 + i*delta.
    pub fn spin_rate(&self) -> Complex<T> {
        Complex::new(self.gamma0, self.two_photon_detuning)
    }
}

/// Uniform grid on [z_min, z_max] with a fixed time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    pub z_min: T,
    pub z_max: T,
    pub n_points: usize,
    pub dt: T,
}

impl<T: Real> Grid<T> {
    pub fn new(z_min: T, z_max: T, n_points: usize, dt: T) -> Result<Self> {
        if n_points < 3 {
            return Err(Error::InvalidGrid(format!("n_points = {n_points} < 3")));
        }
        if !(z_max > z_min) || !z_min.is_finite() || !z_max.is_finite() {
            return Err(Error::InvalidGrid("need finite z_min < z_max".into()));
        }
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::InvalidGrid("dt must be positive".into()));
        }
        Ok(Grid {
            z_min,
            z_max,
            n_points,
            dt,
        })
    }

    /// Grid whose time step moves light exactly one cell per step.
    pub fn unit_cfl(z_min: T, z_max: T, n_points: usize, light_speed: T) -> Result<Self> {
        if n_points < 3 {
            return Err(Error::InvalidGrid(format!("n_points = {n_points} < 3")));
        }
        let dz = (z_max - z_min) / T::of_usize(n_points - 1);
        Grid::new(z_min, z_max, n_points, dz / light_speed)
    }

    /// Grid from a target spacing; the point count is rounded to the nearest integer.
    pub fn from_spacing(z_min: T, z_max: T, dz: T, light_speed: T) -> Result<Self> {
        if !(dz > T::zero()) {
            return Err(Error::InvalidGrid("dz must be positive".into()));
        }
        let cells = ((z_max - z_min) / dz).round().to_usize().unwrap_or(0);
        Grid::unit_cfl(z_min, z_max, cells + 1, light_speed)
    }

    pub fn dz(&self) -> T {
        (self.z_max - self.z_min) / T::of_usize(self.n_points - 1)
    }

    pub fn z(&self, i: usize) -> T {
        self.z_min + self.dz() * T::of_usize(i)
    }

    pub fn positions(&self) -> Vec<T> {
        (0..self.n_points).map(|i| self.z(i)).collect()
    }

    pub fn length(&self) -> T {
        self.z_max - self.z_min
    }

    pub fn cfl(&self, light_speed: T) -> T {
        light_speed * self.dt / self.dz()
    }

    pub fn check_cfl(&self, light_speed: T) -> Result<()> {
        let cfl = self.cfl(light_speed);
        if cfl > T::one() + T::of(1e-9) {
            return Err(Error::Cfl {
                cfl: cfl.to_f64_lossy(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingAngles<T> {
    pub theta: T,
    pub phi: T,
}

impl<T: Real> MixingAngles<T> {
    pub fn cos_2phi(&self) -> T {
        (self.phi + self.phi).cos()
    }

    pub fn sin_2phi(&self) -> T {
        (self.phi + self.phi).sin()
    }
}

/// tan^2(theta) = g_p^2/Omega_0^2 and tan^2(phi) = |Omega_-|^2/|Omega_+|^2.
pub fn mixing_angles<T: Real>(
    params: &PhysicalParams<T>,
    omega_plus: Complex<T>,
    omega_minus: Complex<T>,
) -> Result<MixingAngles<T>> {
    let ap = omega_plus.norm();
    let am = omega_minus.norm();
    let omega0 = ap.hypot(am);
    if !(omega0 > T::zero()) {
        return Err(Error::DegenerateControl);
    }
    Ok(MixingAngles {
        theta: params.coupling.atan2(omega0),
        phi: am.atan2(ap),
    })
}

/// v_gr = c cos^2(theta).
pub fn group_velocity<T: Real>(params: &PhysicalParams<T>, theta: T) -> Result<T> {
    check_theta(theta)?;
    let c = theta.cos();
    Ok(params.light_speed * c * c)
}

/// v_gr = c Omega_0^2/(g_p^2 + Omega_0^2); defined for zero control as well.
pub fn group_velocity_from_intensity<T: Real>(params: &PhysicalParams<T>, omega0_sq: T) -> T {
    let g2 = params.coupling * params.coupling;
    params.light_speed * omega0_sq / (g2 + omega0_sq)
}

/// delta = -Delta_omega cot^2(theta), which removes the propagation phase mismatch.
pub fn phase_matched_detuning<T: Real>(params: &PhysicalParams<T>, theta: T) -> Result<T> {
    check_theta(theta)?;
    if theta <= T::zero() {
        return Err(Error::StoppedLimitUndefined);
    }
    let (s, c) = theta.sin_cos();
    Ok(-params.carrier_offset * (c * c) / (s * s))
}

fn check_theta<T: Real>(theta: T) -> Result<()> {
    let tol = T::of(1e-12);
    if !(theta >= -tol && theta <= T::FRAC_PI_2() + tol) {
        return Err(invalid("theta", format!("{theta} outside [0, pi/2]")));
    }
    Ok(())
}
