//! Analytic velocity fields.
//!
//! A field is a pure function of position and time. Nothing is cached between
//! calls, so one instance can be shared by every advection worker.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[xmin, xmax] x [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64, tol: f64) -> bool {
        x >= self.xmin - tol && x <= self.xmax + tol && y >= self.ymin - tol && y <= self.ymax + tol
    }
}

/// Time-dependent velocity field `u(x, t)`.
pub trait VelocityField: Send + Sync {
    /// Phase-space dimension.
    fn dim(&self) -> usize;

    /// Writes `u(x, t)` into `out`. Both slices have length [`dim`](Self::dim).
    fn velocity(&self, x: &[f64], t: f64, out: &mut [f64]);

    /// A rectangle the flow maps into itself, if one is known.
    fn invariant_domain(&self) -> Option<Rect> {
        None
    }
}

impl<F: VelocityField + ?Sized> VelocityField for Arc<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn velocity(&self, x: &[f64], t: f64, out: &mut [f64]) {
        (**self).velocity(x, t, out)
    }
    fn invariant_domain(&self) -> Option<Rect> {
        (**self).invariant_domain()
    }
}

impl<F: VelocityField + ?Sized> VelocityField for Box<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn velocity(&self, x: &[f64], t: f64, out: &mut [f64]) {
        (**self).velocity(x, t, out)
    }
    fn invariant_domain(&self) -> Option<Rect> {
        (**self).invariant_domain()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleGyreParams {
    pub amplitude: f64,
    pub omega: f64,
    pub epsilon: f64,
}

impl Default for DoubleGyreParams {
    fn default() -> Self {
        Self {
            amplitude: 0.1,
            omega: 2.0 * PI / 10.0,
            epsilon: 0.1,
        }
    }
}

impl DoubleGyreParams {
    pub fn new(amplitude: f64, omega: f64, epsilon: f64) -> Result<Self> {
        let p = Self {
            amplitude,
            omega,
            epsilon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0) || !self.amplitude.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "double gyre amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        if self.omega == 0.0 || !self.omega.is_finite() {
            return Err(Error::InvalidSpec("double gyre omega must be nonzero".into()));
        }
        // b(t) = 1 - 2 eps sin(wt) stays positive
        if !(0.0..0.5).contains(&self.epsilon) {
            return Err(Error::InvalidSpec(format!(
                "double gyre epsilon must lie in [0, 0.5), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Velocity of the periodically forced double gyre with stream function
/// `psi = A sin(pi g(x,t)) sin(pi y)`, `g = a(t) x^2 + b(t) x`.
///
/// `u = -d(psi)/dy`, `v = d(psi)/dx`.
pub fn eval_double_gyre(p: &DoubleGyreParams, x: f64, y: f64, t: f64) -> (f64, f64) {
    let s = (p.omega * t).sin();
    let a = p.epsilon * s;
    let b = 1.0 - 2.0 * p.epsilon * s;
    let g = a * x * x + b * x;
    let dg = 2.0 * a * x + b;
    let ap = p.amplitude * PI;
    let u = -ap * (PI * g).sin() * (PI * y).cos();
    let v = ap * (PI * g).cos() * (PI * y).sin() * dg;
    (u, v)
}

/// Forced, damped Duffing / van der Pol oscillator.
pub fn eval_duffing(x: f64, y: f64, t: f64) -> (f64, f64) {
    (y, x - x * x * x + 0.5 * y * (1.0 - x * x) + 0.1 * t.sin())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[derive(Default)]
pub struct DoubleGyre {
    pub params: DoubleGyreParams,
}

impl DoubleGyre {
    pub fn new(params: DoubleGyreParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }
}


impl VelocityField for DoubleGyre {
    fn dim(&self) -> usize {
        2
    }

    fn velocity(&self, x: &[f64], t: f64, out: &mut [f64]) {
        let (u, v) = eval_double_gyre(&self.params, x[0], x[1], t);
        out[0] = u;
        out[1] = v;
    }

    fn invariant_domain(&self) -> Option<Rect> {
        Some(Rect {
            xmin: 0.0,
            xmax: 2.0,
            ymin: 0.0,
            ymax: 1.0,
        })
    }
}

/// Marker for the Duffing / van der Pol field; its coefficients are fixed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DuffingVdp;

impl VelocityField for DuffingVdp {
    fn dim(&self) -> usize {
        2
    }

    fn velocity(&self, x: &[f64], t: f64, out: &mut [f64]) {
        let (u, v) = eval_duffing(x[0], x[1], t);
        out[0] = u;
        out[1] = v;
    }
}

/// Linear saddle `u = (x, -y)`. Its flow map is known in closed form, which
/// makes it the reference case for the integrator and the FTLE pipeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinearSaddle;

impl VelocityField for LinearSaddle {
    fn dim(&self) -> usize {
        2
    }

    fn velocity(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        out[0] = x[0];
        out[1] = -x[1];
    }
}

/// Spatially and temporally constant velocity (zero included).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Uniform {
    pub velocity: [f64; 2],
}

impl VelocityField for Uniform {
    fn dim(&self) -> usize {
        2
    }

    fn velocity(&self, _x: &[f64], _t: f64, out: &mut [f64]) {
        out[0] = self.velocity[0];
        out[1] = self.velocity[1];
    }
}

/// Named numeric parameters handed to a field constructor.
pub type FieldParams = BTreeMap<String, f64>;

pub type SharedField = Arc<dyn VelocityField>;

type Constructor = Box<dyn Fn(&FieldParams) -> Result<SharedField> + Send + Sync>;

/// Maps field identifiers (as used in run configs) to constructors.
pub struct FieldRegistry {
    constructors: BTreeMap<String, Constructor>,
}

impl fmt::Debug for FieldRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.constructors.keys()).finish()
    }
}

impl Default for FieldRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

fn take_params(
    name: &str,
    params: &FieldParams,
    allowed: &[&str],
) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::config(
                format!("field.{key}"),
                format!("unknown parameter for field `{name}` (allowed: {allowed:?})"),
            ));
        }
    }
    Ok(())
}

impl FieldRegistry {
    pub fn empty() -> Self {
        Self {
            constructors: BTreeMap::new(),
        }
    }

    /// Registry with `double-gyre`, `duffing-vdp`, `linear-saddle` and `uniform`.
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register("double-gyre", |p| {
            take_params("double-gyre", p, &["amplitude", "omega", "epsilon"])?;
            let d = DoubleGyreParams::default();
            let params = DoubleGyreParams {
                amplitude: p.get("amplitude").copied().unwrap_or(d.amplitude),
                omega: p.get("omega").copied().unwrap_or(d.omega),
                epsilon: p.get("epsilon").copied().unwrap_or(d.epsilon),
            };
            params
                .validate()
                .map_err(|e| Error::config("field", e.to_string()))?;
            Ok(Arc::new(DoubleGyre { params }) as SharedField)
        });
        reg.register("duffing-vdp", |p| {
            take_params("duffing-vdp", p, &[])?;
            Ok(Arc::new(DuffingVdp) as SharedField)
        });
        reg.register("linear-saddle", |p| {
            take_params("linear-saddle", p, &[])?;
            Ok(Arc::new(LinearSaddle) as SharedField)
        });
        reg.register("uniform", |p| {
            take_params("uniform", p, &["u", "v"])?;
            let velocity = [
                p.get("u").copied().unwrap_or(0.0),
                p.get("v").copied().unwrap_or(0.0),
            ];
            Ok(Arc::new(Uniform { velocity }) as SharedField)
        });
        reg
    }

    pub fn register<F>(&mut self, name: &str, ctor: F)
    where
        F: Fn(&FieldParams) -> Result<SharedField> + Send + Sync + 'static,
    {
        self.constructors.insert(name.to_owned(), Box::new(ctor));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.constructors.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, params: &FieldParams) -> Result<SharedField> {
        let ctor = self
            .constructors
            .get(name)
            .ok_or_else(|| Error::UnknownField(name.to_owned()))?;
        ctor(params)
    }
}
