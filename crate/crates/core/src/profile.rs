//! Space-time control field profiles Omega_+(z,t), Omega_-(z,t).

use crate::error::{invalid, Error, Result};
use crate::model::PhysicalParams;
use crate::scalar::{Complex, Real};

/// Scalar time dependence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule<T> {
    Constant(T),
    /// from + (to - from) * (1 + tanh(rate (t - center))) / 2
    Tanh { from: T, to: T, rate: T, center: T },
}

impl<T: Real> Schedule<T> {
    pub fn at(&self, t: T) -> T {
        match *self {
            Schedule::Constant(v) => v,
            Schedule::Tanh {
                from,
                to,
                rate,
                center,
            } => from + (to - from) * step_up(rate, center, t),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Schedule::Constant(_))
    }
}

fn step_up<T: Real>(rate: T, center: T, t: T) -> T {
    T::of(0.5) * (T::one() + (rate * (t - center)).tanh())
}

/// Storage and counter-propagating retrieval through scheduled cos^2(theta_pm).
///
/// cos^2 theta_+ = store (1 - tanh(r (t - t_off)))/2 + level_+ (1 + tanh(r (t - t_on)))/2,
/// cos^2 theta_- keeps only the second term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageSchedule<T> {
    pub rate: T,
    pub switch_off: T,
    pub switch_on: T,
    pub store_level: T,
    pub level_plus: T,
    pub level_minus: T,
    /// Cap for the amplitude as cos^2 theta -> 1.
    pub omega_max: T,
}

impl<T: Real> StorageSchedule<T> {
    /// Rate 0.1, switch-off at 65, switch-on at 300, both retrieval levels 1/3.
    pub fn standard() -> Self {
        StorageSchedule {
            rate: T::of(0.1),
            switch_off: T::of(65.0),
            switch_on: T::of(300.0),
            store_level: T::one(),
            level_plus: T::one() / T::of(3.0),
            level_minus: T::one() / T::of(3.0),
            omega_max: T::of(1e3),
        }
    }

    pub fn cos_sq(&self, t: T) -> (T, T) {
        let off = T::one() - step_up(self.rate, self.switch_off, t);
        let on = step_up(self.rate, self.switch_on, t);
        (
            self.store_level * off + self.level_plus * on,
            self.level_minus * on,
        )
    }

    /// Omega = g_p sqrt(cos^2/(1 - cos^2)), capped at `omega_max`.
    pub fn amplitude(&self, coupling: T, cos_sq: T) -> T {
        if cos_sq >= T::one() {
            return self.omega_max;
        }
        let c2 = cos_sq.max(T::zero());
        (coupling * (c2 / (T::one() - c2)).sqrt()).min(self.omega_max)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_max > T::zero()) {
            return Err(invalid("omega_max", "must be > 0"));
        }
        for (name, v) in [
            ("store_level", self.store_level),
            ("level_plus", self.level_plus),
            ("level_minus", self.level_minus),
        ] {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(invalid(name, "cos^2 level must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Transverse beam law for the width factor w(z) with Omega = peak / w.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeamLaw<T> {
    /// w = sqrt(1 - 2 (z - z_f)/pi); valid only while the argument is positive.
    Literal,
    /// w = sqrt(1 + ((z - z_f)/z_R)^2).
    Paraxial { rayleigh_range: T },
}

impl<T: Real> BeamLaw<T> {
    pub fn width(&self, z: T, focus: T) -> Result<T> {
        match *self {
            BeamLaw::Literal => {
                let arg = T::one() - (z - focus) * T::of(2.0) / T::PI();
                if arg <= T::zero() {
                    return Err(Error::OutOfValidity {
                        z: z.to_f64_lossy(),
                        arg: arg.to_f64_lossy(),
                    });
                }
                Ok(arg.sqrt())
            }
            BeamLaw::Paraxial { rayleigh_range } => {
                let u = (z - focus) / rayleigh_range;
                Ok((T::one() + u * u).sqrt())
            }
        }
    }
}

/// Focus position as a function of time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FocusPath<T> {
    Static(T),
    /// start + shift (1 + tanh(rate (t - center)))/2
    Tanh {
        start: T,
        shift: T,
        rate: T,
        center: T,
    },
}

impl<T: Real> FocusPath<T> {
    pub fn at(&self, t: T) -> T {
        match *self {
            FocusPath::Static(z) => z,
            FocusPath::Tanh {
                start,
                shift,
                rate,
                center,
            } => start + shift * step_up(rate, center, t),
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, FocusPath::Static(_))
    }
}

/// Two counter-propagating focused beams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FociProfile<T> {
    pub beam: BeamLaw<T>,
    pub plus_focus: FocusPath<T>,
    pub minus_focus: FocusPath<T>,
    pub peak_plus: T,
    pub peak_minus: T,
    /// Common temporal envelope multiplying both beams.
    pub envelope: Schedule<T>,
}

impl<T: Real> FociProfile<T> {
    pub fn validate(&self) -> Result<()> {
        if let BeamLaw::Paraxial { rayleigh_range } = self.beam {
            if !(rayleigh_range > T::zero()) {
                return Err(invalid("rayleigh_range", "must be > 0"));
            }
        }
        if self.peak_plus < T::zero() || self.peak_minus < T::zero() {
            return Err(invalid("peak", "beam peak amplitudes must be >= 0"));
        }
        Ok(())
    }
}

/// One comb line: detuning and forward/backward amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombLine<T> {
    pub detuning: T,
    pub plus: Complex<T>,
    pub minus: Complex<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombProfile<T> {
    pub lines: Vec<CombLine<T>>,
}

impl<T: Real> CombProfile<T> {
    /// Lines k = -K..K with detuning k*spacing and equal real amplitudes.
    pub fn equal_lines(half_count: usize, spacing: T, amplitude: T) -> Self {
        let k = half_count as i64;
        let lines = (-k..=k)
            .map(|j| CombLine {
                detuning: spacing * T::of(j as f64),
                plus: Complex::new(amplitude, T::zero()),
                minus: Complex::new(amplitude, T::zero()),
            })
            .collect();
        CombProfile { lines }
    }

    pub fn validate(&self) -> Result<()> {
        let resonant = self
            .lines
            .iter()
            .filter(|l| l.detuning == T::zero())
            .count();
        if resonant != 1 {
            return Err(invalid(
                "comb",
                format!("need exactly one resonant line, found {resonant}"),
            ));
        }
        for l in &self.lines {
            let (a, b) = (l.plus.norm(), l.minus.norm());
            if (a - b).abs() > T::of(1e-12) * a.max(b).max(T::one()) {
                return Err(invalid(
                    "comb",
                    "forward and backward intensities must be equal per line",
                ));
            }
        }
        Ok(())
    }

    pub fn resonant(&self) -> Option<&CombLine<T>> {
        self.lines.iter().find(|l| l.detuning == T::zero())
    }

    /// Total Rabi envelopes with the fast phases e^{-i Delta_k (t -+ z/c)} attached.
    pub fn total(&self, light_speed: T, z: T, t: T) -> (Complex<T>, Complex<T>) {
        let mut p = Complex::new(T::zero(), T::zero());
        let mut m = p;
        for l in &self.lines {
            let fwd = Complex::from_polar(T::one(), -l.detuning * (t - z / light_speed));
            let bwd = Complex::from_polar(T::one(), -l.detuning * (t + z / light_speed));
            p = p + l.plus * fwd;
            m = m + l.minus * bwd;
        }
        (p, m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlProfile<T> {
    Homogeneous {
        plus: Schedule<T>,
        minus: Schedule<T>,
    },
    TanhSchedule(StorageSchedule<T>),
    GaussianFoci(FociProfile<T>),
    Comb(CombProfile<T>),
    /// Constant total Omega_0 with cos(2 phi) = -z/l, clamped to [-1, 1].
    /// The idealized linear regime behind the Ornstein-Uhlenbeck analytics.
    LinearRatio { omega0: T, l: T },
}

impl<T: Real> ControlProfile<T> {
    pub fn constant(plus: T, minus: T) -> Self {
        ControlProfile::Homogeneous {
            plus: Schedule::Constant(plus),
            minus: Schedule::Constant(minus),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ControlProfile::Homogeneous { .. } => Ok(()),
            ControlProfile::TanhSchedule(s) => s.validate(),
            ControlProfile::GaussianFoci(f) => f.validate(),
            ControlProfile::Comb(c) => c.validate(),
            ControlProfile::LinearRatio { omega0, l } => {
                if !(*omega0 > T::zero()) {
                    return Err(invalid("omega0", "must be > 0"));
                }
                if !(*l > T::zero()) {
                    return Err(invalid("l", "must be > 0"));
                }
                Ok(())
            }
        }
    }

    /// No z dependence.
    pub fn is_uniform(&self) -> bool {
        matches!(
            self,
            ControlProfile::Homogeneous { .. } | ControlProfile::TanhSchedule(_)
        )
    }

    /// No t dependence.
    pub fn is_static(&self) -> bool {
        match self {
            ControlProfile::Homogeneous { plus, minus } => plus.is_constant() && minus.is_constant(),
            ControlProfile::TanhSchedule(_) => false,
            ControlProfile::GaussianFoci(f) => {
                f.envelope.is_constant() && f.plus_focus.is_static() && f.minus_focus.is_static()
            }
            ControlProfile::Comb(c) => c.lines.iter().all(|l| l.detuning == T::zero()),
            ControlProfile::LinearRatio { .. } => true,
        }
    }

    /// (Omega_+, Omega_-) at (z, t).
    pub fn control_field_at(
        &self,
        params: &PhysicalParams<T>,
        z: T,
        t: T,
    ) -> Result<(Complex<T>, Complex<T>)> {
        let zero = T::zero();
        let pair = match self {
            ControlProfile::Homogeneous { plus, minus } => {
                (Complex::new(plus.at(t), zero), Complex::new(minus.at(t), zero))
            }
            ControlProfile::TanhSchedule(s) => {
                let (cp, cm) = s.cos_sq(t);
                (
                    Complex::new(s.amplitude(params.coupling, cp), zero),
                    Complex::new(s.amplitude(params.coupling, cm), zero),
                )
            }
            ControlProfile::GaussianFoci(f) => {
                let env = f.envelope.at(t);
                let wp = f.beam.width(z, f.plus_focus.at(t))?;
                let wm = f.beam.width(z, f.minus_focus.at(t))?;
                (
                    Complex::new(f.peak_plus * env / wp, zero),
                    Complex::new(f.peak_minus * env / wm, zero),
                )
            }
            ControlProfile::Comb(c) => c.total(params.light_speed, z, t),
            ControlProfile::LinearRatio { omega0, l } => {
                let c2 = (-z / *l).max(-T::one()).min(T::one());
                let (sin, cos) = (T::of(0.5) * c2.acos()).sin_cos();
                (Complex::new(*omega0 * cos, zero), Complex::new(*omega0 * sin, zero))
            }
        };
        if !(pair.0.re.is_finite() && pair.0.im.is_finite() && pair.1.re.is_finite() && pair.1.im.is_finite()) {
            return Err(Error::NonFinite {
                field: "control",
                z: z.to_f64_lossy(),
                t: t.to_f64_lossy(),
            });
        }
        Ok(pair)
    }

    /// phi(z) at time t; where both controls vanish phi falls back to pi/4.
    pub fn phi_field(&self, params: &PhysicalParams<T>, z: &[T], t: T) -> Result<Vec<T>> {
        z.iter()
            .map(|&zi| {
                let (p, m) = self.control_field_at(params, zi, t)?;
                let (a, b) = (p.norm(), m.norm());
                Ok(if a == T::zero() && b == T::zero() {
                    T::FRAC_PI_4()
                } else {
                    b.atan2(a)
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> PhysicalParams<f64> {
        PhysicalParams::resonant(1.0)
    }

    #[test]
    fn storage_schedule_limits() {
        let s = ControlProfile::TanhSchedule(StorageSchedule::standard());
        let (a, b) = s.control_field_at(&p(), 0.0, -1e4).unwrap();
        assert_eq!(a.re, 1e3);
        assert_eq!(b.re, 0.0);
        let (a, b) = s.control_field_at(&p(), 0.0, 150.0).unwrap();
        assert!(a.re < 1e-3 && b.re < 1e-3);
        let (a, b) = s.control_field_at(&p(), 0.0, 1e4).unwrap();
        assert!((a.re - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((b.re - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn storage_amplitude_inverts_cos_sq() {
        let s = StorageSchedule::<f64>::standard();
        for c2 in [0.1, 0.25, 0.5, 0.9] {
            let om = s.amplitude(1.0, c2);
            let back = om * om / (1.0 + om * om);
            assert!((back - c2).abs() < 1e-14);
        }
    }

    #[test]
    fn focus_normalization() {
        for beam in [BeamLaw::Literal, BeamLaw::Paraxial { rayleigh_range: 2.0 }] {
            let f = ControlProfile::GaussianFoci(FociProfile {
                beam,
                plus_focus: FocusPath::Static(-3.0),
                minus_focus: FocusPath::Static(-3.0),
                peak_plus: 1.0,
                peak_minus: 1.0,
                envelope: Schedule::Constant(1.0),
            });
            let (a, _) = f.control_field_at(&p(), -3.0, 0.0).unwrap();
            assert_eq!(a.re, 1.0);
        }
    }

    #[test]
    fn linear_ratio_profile() {
        let prof = ControlProfile::LinearRatio { omega0: 0.3, l: 8.0 };
        for z in [-20.0, -8.0, -3.0, 0.0, 2.5, 8.0, 11.0] {
            let (a, b) = prof.control_field_at(&p(), z, 0.0).unwrap();
            assert!((a.norm_sqr() + b.norm_sqr() - 0.09).abs() < 1e-15);
            let c2 = (a.norm_sqr() - b.norm_sqr()) / 0.09;
            assert!((c2 - (-z / 8.0f64).clamp(-1.0, 1.0)).abs() < 1e-12);
        }
        assert!(ControlProfile::LinearRatio { omega0: 0.3, l: 0.0 }.validate().is_err());
    }

    #[test]
    fn literal_beam_law_has_validity_window() {
        let b = BeamLaw::Literal;
        assert!(b.width(0.0, 0.0).is_ok());
        assert!(b.width(1.5, 0.0).is_ok());
        assert!(matches!(b.width(1.6, 0.0), Err(Error::OutOfValidity { .. })));
    }

    #[test]
    fn moving_focus_path() {
        let f = FocusPath::<f64>::Tanh {
            start: -20.0,
            shift: 10.0,
            rate: 0.0125,
            center: 700.0,
        };
        assert!((f.at(700.0) + 15.0).abs() < 1e-12);
        assert!((f.at(1e5) + 10.0).abs() < 1e-12);
    }

    #[test]
    fn comb_rules() {
        let c = CombProfile::<f64>::equal_lines(2, 20.0, 0.3);
        assert!(c.validate().is_ok());
        assert_eq!(c.lines.len(), 5);
        let mut bad = c.clone();
        bad.lines[0].minus = Complex::new(0.1, 0.0);
        assert!(bad.validate().is_err());
        let mut two_res = c.clone();
        two_res.lines[0].detuning = 0.0;
        assert!(two_res.validate().is_err());
        let (p0, m0) = c.total(1.0, 0.0, 0.0);
        assert!((p0.re - 1.5).abs() < 1e-14 && (m0.re - 1.5).abs() < 1e-14);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let s = ControlProfile::TanhSchedule(StorageSchedule::standard());
        let a = s.control_field_at(&p(), 1.0, 299.123).unwrap();
        let b = s.control_field_at(&p(), 1.0, 299.123).unwrap();
        assert_eq!(a.0.re.to_bits(), b.0.re.to_bits());
        assert_eq!(a.1.re.to_bits(), b.1.re.to_bits());
    }
}
