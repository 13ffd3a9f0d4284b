//! Drift-diffusion description of E_S for spatially varying control ratios,
//! and the Ornstein-Uhlenbeck analytics of the linear regime cos(2 phi) = -z/l.

use crate::error::{invalid, Error, Result};
use crate::model::{Grid, PhysicalParams};
use crate::numerics::derivative_real;
use crate::profile::ControlProfile;
use crate::scalar::{Complex, Real};

type C<T> = Complex<T>;

/// Coefficients of d/dt E_S = A0 E_S + d/dz[A1 E_S] + d^2/dz^2[D E_S].
#[derive(Debug, Clone, PartialEq)]
pub struct FpeCoefficients<T> {
    pub a0: Vec<T>,
    pub a1: Vec<T>,
    pub d: Vec<T>,
    /// phi looked under-resolved on the grid.
    pub rough: bool,
}

/// Coefficients obtained by inserting the adiabatic E_D into the E_S equation
/// with constant v_gr:
///   D  = v l sin^2(2phi)
///   A1 = -v cos(2phi) [1 + 4 l sin(2phi) phi']
///   A0 = -v [phi' sin(2phi) + 2 l phi'^2 sin^2(2phi) - l phi'^2 cos^2(2phi) - l phi'' cos(2phi) sin(2phi)]
/// where l = l_abs.
pub fn fpe_coefficients<T: Real>(phi: &[T], grid: &Grid<T>, v_gr: T, l_abs: T) -> Result<FpeCoefficients<T>> {
    if phi.len() != grid.n_points {
        return Err(Error::Shape("phi field does not match the grid".into()));
    }
    let dz = grid.dz();
    let d1 = derivative_real(phi, dz);
    let d2 = derivative_real(&d1, dz);
    let (two, four) = (T::of(2.0), T::of(4.0));
    let mut out = FpeCoefficients {
        a0: Vec::with_capacity(phi.len()),
        a1: Vec::with_capacity(phi.len()),
        d: Vec::with_capacity(phi.len()),
        rough: false,
    };
    for i in 0..phi.len() {
        let (s2, c2) = (two * phi[i]).sin_cos();
        let (p1, p2) = (d1[i], d2[i]);
        out.d.push(v_gr * l_abs * s2 * s2);
        out.a1.push(-v_gr * c2 * (T::one() + four * l_abs * s2 * p1));
        out.a0.push(
            -v_gr
                * (p1 * s2 + two * l_abs * p1 * p1 * s2 * s2
                    - l_abs * p1 * p1 * c2 * c2
                    - l_abs * p2 * c2 * s2),
        );
    }
    let jump = phi
        .windows(3)
        .map(|w| (w[0] - two * w[1] + w[2]).abs())
        .fold(T::zero(), T::max);
    out.rough = jump > T::of(0.05);
    if out.rough {
        log::warn!("phi field changes too quickly for finite-difference coefficients");
    }
    Ok(out)
}

/// Exact k^2 coefficient of the dark-polariton branch for homogeneous beams,
/// Im omega = -D k^2 with D = v l [sin^2(2phi) + cos^2(2phi) (1 - v/c)^2].
///
/// The first term is the diffusivity of `fpe_coefficients`. The second comes
/// from the retarded response of E_D to a drifting E_S and survives the
/// slow-light limit, where D tends to v l independently of phi.
pub fn homogeneous_spread_rate<T: Real>(v_gr: T, l_abs: T, cos_2phi: T, light_speed: T) -> T {
    let c2 = cos_2phi;
    let s2_sq = T::one() - c2 * c2;
    let slow = T::one() - v_gr / light_speed;
    v_gr * l_abs * (s2_sq + c2 * c2 * slow * slow)
}

/// Evaluates A0 E + d/dz[A1 E] + d^2/dz^2[D E] on the grid.
pub fn apply_fpe<T: Real>(e: &[C<T>], k: &FpeCoefficients<T>, grid: &Grid<T>) -> Vec<C<T>> {
    let dz = grid.dz();
    let flux: Vec<C<T>> = e.iter().zip(&k.a1).map(|(&x, &a)| x * a).collect();
    let spread: Vec<C<T>> = e.iter().zip(&k.d).map(|(&x, &d)| x * d).collect();
    let f1 = crate::numerics::derivative_zero_padded(&flux, dz);
    let f2 = crate::numerics::derivative_zero_padded(&crate::numerics::derivative_zero_padded(&spread, dz), dz);
    (0..e.len()).map(|i| e[i] * k.a0[i] + f1[i] + f2[i]).collect()
}

/// Linear-regime parameters: cos(2 phi) = -z/l.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuParams<T> {
    pub l: T,
    pub l_abs: T,
    pub v_gr: T,
}

impl<T: Real> OuParams<T> {
    pub fn new(l: T, l_abs: T, v_gr: T) -> Result<Self> {
        if !(l > T::zero()) {
            return Err(invalid("l", "must be > 0"));
        }
        if !(l_abs > T::zero()) {
            return Err(invalid("l_abs", "must be > 0"));
        }
        if !(v_gr >= T::zero()) {
            return Err(invalid("v_gr", "must be >= 0"));
        }
        Ok(OuParams { l, l_abs, v_gr })
    }

    /// sqrt(l l_abs), the width of the stationary Gaussian.
    pub fn oscillator_length(&self) -> T {
        (self.l * self.l_abs).sqrt()
    }

    /// sqrt(2 l l_abs), the Hermite argument scale x = z/s.
    pub fn hermite_scale(&self) -> T {
        (T::of(2.0) * self.l * self.l_abs).sqrt()
    }

    pub fn diffusivity(&self) -> T {
        self.v_gr * self.l_abs
    }

    /// lambda_n = n v_gr / l.
    pub fn eigenvalue(&self, n: usize) -> T {
        T::of_usize(n) * self.v_gr / self.l
    }

    /// Excitation decay rate v_gr / l.
    pub fn decay_rate(&self) -> T {
        self.v_gr / self.l
    }
}

/// exp(-z^2/(2 l l_abs)) exp(-v_gr t/(2 l)).
pub fn ou_stationary<T: Real>(params: &OuParams<T>, z: T, t: T) -> T {
    let a2 = params.l * params.l_abs;
    (-z * z / (T::of(2.0) * a2) - params.v_gr * t / (T::of(2.0) * params.l)).exp()
}

/// Amplitude half-life 2 l ln 2 / v_gr of the stationary solution.
pub fn ou_half_life<T: Real>(params: &OuParams<T>) -> T {
    T::of(2.0) * params.l * T::LN_2() / params.v_gr
}

/// n0 exp(-v_gr t / l).
pub fn cavity_decay<T: Real>(n0: T, params: &OuParams<T>, t: T) -> T {
    n0 * (-params.decay_rate() * t).exp()
}

/// Normalized Hermite polynomials Phi_n = H_n/sqrt(2^n n!) for n = 0..=n_max.
pub fn hermite_functions<T: Real>(n_max: usize, x: T) -> Result<Vec<T>> {
    hermite_recurrence(n_max, x, T::one())
}

/// exp(-x^2/2) Phi_n(x); never overflows for large |x|.
pub fn weighted_hermite_functions<T: Real>(n_max: usize, x: T) -> Result<Vec<T>> {
    hermite_recurrence(n_max, x, (-x * x * T::of(0.5)).exp())
}

fn hermite_recurrence<T: Real>(n_max: usize, x: T, start: T) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(start);
    if n_max >= 1 {
        out.push(T::SQRT_2() * x * start);
    }
    for n in 1..n_max {
        let nf = T::of_usize(n);
        let a = (T::of(2.0) / (nf + T::one())).sqrt();
        let b = (nf / (nf + T::one())).sqrt();
        let next = a * x * out[n] - b * out[n - 1];
        if !next.is_finite() {
            return Err(Error::HermiteOverflow {
                n: n + 1,
                x: x.to_f64_lossy(),
            });
        }
        out.push(next);
    }
    Ok(out)
}

/// Eigenmode n of the backward Ornstein-Uhlenbeck operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteMode<T> {
    pub n: usize,
    pub eigenvalue: T,
    pub params: OuParams<T>,
}

pub fn hermite_modes<T: Real>(n: usize, params: &OuParams<T>) -> HermiteMode<T> {
    HermiteMode {
        n,
        eigenvalue: params.eigenvalue(n),
        params: *params,
    }
}

impl<T: Real> HermiteMode<T> {
    /// Phi_n(z).
    pub fn value(&self, z: T) -> Result<T> {
        let x = z / self.params.hermite_scale();
        Ok(hermite_functions(self.n, x)?[self.n])
    }

    /// dPhi_n/dz = sqrt(2n) Phi_{n-1} / s.
    pub fn derivative(&self, z: T) -> Result<T> {
        if self.n == 0 {
            return Ok(T::zero());
        }
        let s = self.params.hermite_scale();
        let h = hermite_functions(self.n, z / s)?;
        Ok((T::of(2.0) * T::of_usize(self.n)).sqrt() * h[self.n - 1] / s)
    }

    /// d^2Phi_n/dz^2 = 2 sqrt(n (n-1)) Phi_{n-2} / s^2.
    pub fn second_derivative(&self, z: T) -> Result<T> {
        if self.n < 2 {
            return Ok(T::zero());
        }
        let s = self.params.hermite_scale();
        let h = hermite_functions(self.n, z / s)?;
        let n = T::of_usize(self.n);
        Ok(T::of(2.0) * (n * (n - T::one())).sqrt() * h[self.n - 2] / (s * s))
    }

    /// D Phi'' - v_gr (z/l) Phi' + lambda_n Phi.
    pub fn backward_residual(&self, z: T) -> Result<T> {
        let p = &self.params;
        Ok(p.diffusivity() * self.second_derivative(z)? - p.v_gr * z / p.l * self.derivative(z)?
            + self.eigenvalue * self.value(z)?)
    }
}

/// Gauss-Hermite nodes and weights for the weight exp(-x^2).
pub fn gauss_hermite<T: Real>(n: usize) -> Result<(Vec<T>, Vec<T>)> {
    if n == 0 {
        return Err(invalid("nodes", "need at least one node"));
    }
    let mut x = vec![0.0f64; n];
    let mut w = vec![0.0f64; n];
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let nf = n as f64;
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        let mut converged = false;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::QuadratureNotConverged {
                points: n,
                hint: "Gauss-Hermite root search failed; use fewer nodes".into(),
            });
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let conv = |v: Vec<f64>| v.into_iter().map(T::of).collect();
    Ok((conv(x), conv(w)))
}

/// E_S(z,t) = sum_n c_n exp(-x^2) Phi_n(x) exp(-(n + 1/2) v_gr t / l) / sqrt(2 pi l l_abs).
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteExpansion<T> {
    pub coefficients: Vec<C<T>>,
    pub params: OuParams<T>,
}

impl<T: Real> HermiteExpansion<T> {
    /// c_n = int E(z) Phi_n(z) dz by the midpoint rule on the grid.
    pub fn project_samples(samples: &[C<T>], grid: &Grid<T>, params: &OuParams<T>, n_max: usize) -> Result<Self> {
        if samples.len() != grid.n_points {
            return Err(Error::Shape("samples do not match the grid".into()));
        }
        let peak = samples.iter().fold(T::zero(), |m, x| m.max(x.norm()));
        let edge = samples[0].norm().max(samples[samples.len() - 1].norm());
        if peak > T::zero() && edge > T::of(1e-8) * peak {
            return Err(Error::ProjectionNotConverged {
                ratio: (edge / peak).to_f64_lossy(),
            });
        }
        let s = params.hermite_scale();
        let dz = grid.dz();
        let mut c = vec![C::new(T::zero(), T::zero()); n_max + 1];
        for (i, &e) in samples.iter().enumerate() {
            if e.norm() == T::zero() {
                continue;
            }
            let h = hermite_functions(n_max, grid.z(i) / s)?;
            for (cn, &hn) in c.iter_mut().zip(&h) {
                *cn = *cn + e * (hn * dz);
            }
        }
        Ok(HermiteExpansion {
            coefficients: c,
            params: *params,
        })
    }

    /// c_n by Gauss-Hermite quadrature of f(s x) exp(x^2) Phi_n(x) against exp(-x^2).
    pub fn project_fn(f: impl Fn(T) -> C<T>, params: &OuParams<T>, n_max: usize, nodes: usize) -> Result<Self> {
        let (x, w) = gauss_hermite::<T>(nodes)?;
        let s = params.hermite_scale();
        let mut c = vec![C::new(T::zero(), T::zero()); n_max + 1];
        for (&xi, &wi) in x.iter().zip(&w) {
            let h = hermite_functions(n_max, xi)?;
            let g = f(s * xi) * (wi * (xi * xi).exp() * s);
            for (cn, &hn) in c.iter_mut().zip(&h) {
                *cn = *cn + g * hn;
            }
        }
        Ok(HermiteExpansion {
            coefficients: c,
            params: *params,
        })
    }

    pub fn truncation(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        (0..self.coefficients.len()).map(|n| self.params.eigenvalue(n)).collect()
    }

    pub fn truncated(&self, n_max: usize) -> Self {
        HermiteExpansion {
            coefficients: self.coefficients[..=n_max.min(self.truncation())].to_vec(),
            params: self.params,
        }
    }

    pub fn evaluate(&self, z: T, t: T) -> Result<C<T>> {
        let p = &self.params;
        let s = p.hermite_scale();
        let x = z / s;
        let psi = weighted_hermite_functions(self.truncation(), x)?;
        let base = (-x * x * T::of(0.5)).exp() / (T::PI() * T::of(2.0) * p.l * p.l_abs).sqrt();
        let rate = p.v_gr / p.l;
        let mut acc = C::new(T::zero(), T::zero());
        for (n, (&c, &h)) in self.coefficients.iter().zip(&psi).enumerate() {
            let decay = (-(T::of_usize(n) + T::of(0.5)) * rate * t).exp();
            acc = acc + c * (h * base * decay);
        }
        Ok(acc)
    }

    pub fn evaluate_grid(&self, grid: &Grid<T>, t: T) -> Result<Vec<C<T>>> {
        (0..grid.n_points).map(|i| self.evaluate(grid.z(i), t)).collect()
    }
}

fn relative_residual<T: Real>(a: &[C<T>], b: &[C<T>]) -> T {
    let num = a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + (*x - *y).norm_sqr());
    let den = a.iter().fold(T::zero(), |s, x| s + x.norm_sqr());
    if den == T::zero() {
        T::zero()
    } else {
        (num / den).sqrt()
    }
}

/// Truncated eigenfunction solution of the initial value problem.
///
/// Fails when the t = 0 reconstruction misses the input by more than
/// `tolerance` (relative L2), suggesting a truncation that would pass.
pub fn ou_initial_value<T: Real>(
    e_s0: &[C<T>],
    grid: &Grid<T>,
    params: &OuParams<T>,
    t: T,
    n_max: usize,
    tolerance: T,
) -> Result<Vec<C<T>>> {
    let exp = HermiteExpansion::project_samples(e_s0, grid, params, n_max)?;
    let residual = relative_residual(e_s0, &exp.evaluate_grid(grid, T::zero())?);
    if residual > tolerance {
        let ceiling = (4 * n_max).clamp(8, 400);
        let suggested = HermiteExpansion::project_samples(e_s0, grid, params, ceiling)
            .ok()
            .and_then(|big| {
                let step = (n_max / 4).max(2);
                (n_max + step..=ceiling).step_by(step).find(|&m| {
                    big.truncated(m)
                        .evaluate_grid(grid, T::zero())
                        .map(|r| relative_residual(e_s0, &r) <= tolerance)
                        .unwrap_or(false)
                })
            });
        return Err(Error::TruncationResidual {
            residual: residual.to_f64_lossy(),
            tolerance: tolerance.to_f64_lossy(),
            suggested,
        });
    }
    exp.evaluate_grid(grid, t)
}

/// Fits cos(2 phi) = -z/l over |z| <= l/4, iterating the window until l settles.
pub fn linear_scale<T: Real>(cos_2phi: &[T], grid: &Grid<T>) -> Result<T> {
    if cos_2phi.len() != grid.n_points {
        return Err(Error::Shape("cos 2phi samples do not match the grid".into()));
    }
    let mut half = grid.z_max.abs().max(grid.z_min.abs());
    let mut l = T::zero();
    for _ in 0..100 {
        let (mut szy, mut szz, mut count) = (T::zero(), T::zero(), 0usize);
        for (i, &y) in cos_2phi.iter().enumerate() {
            let z = grid.z(i);
            if z.abs() <= half {
                szy = szy + z * y;
                szz = szz + z * z;
                count += 1;
            }
        }
        if count < 3 || szz == T::zero() {
            return Err(invalid("cos_2phi", "fewer than three samples inside |z| <= l/4"));
        }
        let slope = szy / szz;
        if !(slope < T::zero()) {
            return Err(invalid("cos_2phi", "profile does not decrease through z = 0"));
        }
        let next = -T::one() / slope;
        if (next - l).abs() <= T::of(1e-12) * next {
            return Ok(next);
        }
        l = next;
        half = l / T::of(4.0);
    }
    Ok(l)
}

/// cos(2 phi(z)) from a control profile at time t.
pub fn cos_2phi_field<T: Real>(
    profile: &ControlProfile<T>,
    params: &PhysicalParams<T>,
    grid: &Grid<T>,
    t: T,
) -> Result<Vec<T>> {
    (0..grid.n_points)
        .map(|i| {
            let (p, m) = profile.control_field_at(params, grid.z(i), t)?;
            let (a, b) = (p.norm_sqr(), m.norm_sqr());
            if a + b == T::zero() {
                return Err(Error::DegenerateControl);
            }
            Ok((a - b) / (a + b))
        })
        .collect()
}
