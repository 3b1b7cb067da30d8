use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DiniModelSpec, ModelSpec, SingularModelSpec};
use crate::numerics::norm;

/// Coefficients of `dX = b(t, X) dt + σ(t, X) dW` as seen by a scheme with
/// step `h` (the step lets singular drifts be capped).
pub trait Sde: Sync {
    fn dim(&self) -> usize;

    /// Writes the drift and the row-major diffusion matrix at `(t, x)`.
    fn coefficients(
        &self,
        t: f64,
        x: &[f64],
        h: f64,
        drift: &mut [f64],
        diffusion: &mut [f64],
    ) -> Result<()>;

    /// Short stable identifier recorded in exports.
    fn fingerprint(&self) -> String;
}

/// FNV-1a hash of the JSON form of a spec.
pub fn fingerprint_of<T: Serialize>(kind: &str, spec: &T) -> String {
    let json = serde_json::to_string(spec).unwrap_or_default();
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in json.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{kind}-{h:016x}")
}

fn check_finite(name: &str, x: &[f64], v: &[f64]) -> Result<()> {
    if v.iter().all(|a| a.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidCoefficient {
            name: name.into(),
            point: x.to_vec(),
        })
    }
}

impl Sde for DiniModelSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn coefficients(
        &self,
        t: f64,
        x: &[f64],
        _h: f64,
        drift: &mut [f64],
        diffusion: &mut [f64],
    ) -> Result<()> {
        self.regular_drift.eval(t, x, drift);
        let mut b = vec![0.0; self.dim];
        self.dini_drift.eval(t, x, &mut b);
        for (d, v) in drift.iter_mut().zip(&b) {
            *d += v;
        }
        self.sigma.eval(t, x, diffusion);
        check_finite("drift", x, drift)
    }

    fn fingerprint(&self) -> String {
        fingerprint_of("dini", self)
    }
}

impl Sde for ModelSpec {
    fn dim(&self) -> usize {
        ModelSpec::dim(self)
    }

    fn coefficients(
        &self,
        t: f64,
        x: &[f64],
        h: f64,
        drift: &mut [f64],
        diffusion: &mut [f64],
    ) -> Result<()> {
        match self {
            ModelSpec::Dini(m) => m.coefficients(t, x, h, drift, diffusion),
            ModelSpec::Singular(m) => m.coefficients(t, x, h, drift, diffusion),
        }
    }

    fn fingerprint(&self) -> String {
        match self {
            ModelSpec::Dini(m) => m.fingerprint(),
            ModelSpec::Singular(m) => m.fingerprint(),
        }
    }
}

impl SingularModelSpec {
    /// `b₁(x)` rescaled onto the ball of radius `cap.level(h)`.
    pub fn capped_singular_drift(&self, x: &[f64], h: f64, out: &mut [f64]) {
        self.singular_drift.eval(0.0, x, out);
        let level = self.cap.level(h);
        let n = norm(out);
        if n > level {
            let s = level / n;
            out.iter_mut().for_each(|v| *v *= s);
        }
    }
}

impl Sde for SingularModelSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn coefficients(
        &self,
        _t: f64,
        x: &[f64],
        h: f64,
        drift: &mut [f64],
        diffusion: &mut [f64],
    ) -> Result<()> {
        self.growth_drift.eval(0.0, x, drift);
        let mut b1 = vec![0.0; self.dim];
        self.capped_singular_drift(x, h, &mut b1);
        for (d, v) in drift.iter_mut().zip(&b1) {
            *d += v;
        }
        self.sigma.eval(0.0, x, diffusion);
        check_finite("drift", x, drift)
    }

    fn fingerprint(&self) -> String {
        fingerprint_of("singular", self)
    }
}

/// The reference equation `dZ = B_t(Z) dt + σ_t(Z) dW` behind `P⁰_{s,t}`.
pub struct ReferenceSde<'a>(pub &'a DiniModelSpec);

impl Sde for ReferenceSde<'_> {
    fn dim(&self) -> usize {
        self.0.dim
    }

    fn coefficients(
        &self,
        t: f64,
        x: &[f64],
        _h: f64,
        drift: &mut [f64],
        diffusion: &mut [f64],
    ) -> Result<()> {
        self.0.regular_drift.eval(t, x, drift);
        self.0.sigma.eval(t, x, diffusion);
        check_finite("drift", x, drift)
    }

    fn fingerprint(&self) -> String {
        fingerprint_of("reference", self.0)
    }
}

/// An SDE given by closures.
pub struct FnSde<D, S> {
    pub dim: usize,
    pub label: String,
    pub drift: D,
    pub sigma: S,
}

impl<D, S> FnSde<D, S>
where
    D: Fn(f64, &[f64], &mut [f64]) + Sync,
    S: Fn(f64, &[f64], &mut [f64]) + Sync,
{
    pub fn new(dim: usize, label: impl Into<String>, drift: D, sigma: S) -> Self {
        Self {
            dim,
            label: label.into(),
            drift,
            sigma,
        }
    }
}

impl<D, S> Sde for FnSde<D, S>
where
    D: Fn(f64, &[f64], &mut [f64]) + Sync,
    S: Fn(f64, &[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn coefficients(
        &self,
        t: f64,
        x: &[f64],
        _h: f64,
        drift: &mut [f64],
        diffusion: &mut [f64],
    ) -> Result<()> {
        (self.drift)(t, x, drift);
        (self.sigma)(t, x, diffusion);
        check_finite("drift", x, drift)
    }

    fn fingerprint(&self) -> String {
        self.label.clone()
    }
}

/// Identity diffusion for [`FnSde`].
pub fn unit_diffusion(_t: f64, x: &[f64], out: &mut [f64]) {
    let d = x.len();
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..d {
        out[i * d + i] = 1.0;
    }
}

/// `base` with the drift shifted by `shift(t, x)`: the law `ℚ` of a
/// drift-perturbed equation.
pub struct Perturbed<'a, M: ?Sized, H> {
    pub base: &'a M,
    pub shift: H,
    pub label: String,
}

impl<M, H> Sde for Perturbed<'_, M, H>
where
    M: Sde + ?Sized,
    H: Fn(f64, &[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn coefficients(
        &self,
        t: f64,
        x: &[f64],
        h: f64,
        drift: &mut [f64],
        diffusion: &mut [f64],
    ) -> Result<()> {
        self.base.coefficients(t, x, h, drift, diffusion)?;
        let mut s = vec![0.0; drift.len()];
        (self.shift)(t, x, &mut s);
        for (d, v) in drift.iter_mut().zip(&s) {
            *d += v;
        }
        check_finite("shift", x, drift)
    }

    fn fingerprint(&self) -> String {
        format!("{}+{}", self.base.fingerprint(), self.label)
    }
}
