use statrs::function::gamma::gamma;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaternParams {
    /// sigma^2
    pub variance: f64,
    /// kappa
    pub length_scale: f64,
    /// nu
    pub smoothness: f64,
}

impl Default for MaternParams {
    fn default() -> Self {
        Self {
            variance: 1.0,
            length_scale: 1.0,
            smoothness: 1.5,
        }
    }
}

impl MaternParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("variance", self.variance),
            ("length scale", self.length_scale),
            ("smoothness", self.smoothness),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::ParameterDomain(format!("Matérn {name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Matérn covariance at distance `d`.
///
/// `sigma^2 * 2^(1-nu) / Gamma(nu) * z^nu * K_nu(z)` with
/// `z = sqrt(2 nu) d / kappa`; closed forms for `nu` in {1/2, 3/2, 5/2}.
pub fn matern(d: f64, p: &MaternParams) -> f64 {
    let d = d.abs();
    if d == 0.0 {
        return p.variance;
    }
    let r = d / p.length_scale;
    let nu = p.smoothness;
    if nu == 0.5 {
        p.variance * (-r).exp()
    } else if nu == 1.5 {
        let s = 3f64.sqrt() * r;
        p.variance * (1.0 + s) * (-s).exp()
    } else if nu == 2.5 {
        let s = 5f64.sqrt() * r;
        p.variance * (1.0 + s + s * s / 3.0) * (-s).exp()
    } else {
        matern_general(d, p)
    }
}

/// The Bessel form, used for every `nu` without a closed form.
pub fn matern_general(d: f64, p: &MaternParams) -> f64 {
    let d = d.abs();
    if d == 0.0 {
        return p.variance;
    }
    let nu = p.smoothness;
    let z = (2.0 * nu).sqrt() * d / p.length_scale;
    let v = p.variance * 2f64.powf(1.0 - nu) / gamma(nu) * z.powf(nu) * bessel_k(nu, z);
    if v.is_finite() {
        v.clamp(0.0, p.variance)
    } else {
        p.variance
    }
}

/// Modified Bessel function of the second kind, `K_nu(x)` for `x > 0`,
/// from `K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt` by the trapezoid
/// rule (which converges geometrically for this integrand).
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return f64::INFINITY;
    }
    let h = 0.02;
    let f = |t: f64| (-x * t.cosh() + nu * t).exp() * 0.5 * (1.0 + (-2.0 * nu * t).exp());
    let mut sum = 0.5 * f(0.0);
    let mut t = h;
    loop {
        let v = f(t);
        sum += v;
        if (v < 1e-18 * sum && x * t.cosh() > nu * t + 1.0) || t > 200.0 {
            break;
        }
        t += h;
    }
    sum * h
}
