//! Supremands `F(x, η, p, ξ)` with analytic first and second partials.
//!
//! A reduced jet is laid out as `[η, p_1, .., p_n, ξ]`; derivative arrays
//! use the same slot order. Built-in families:
//!
//! * additive `F = a(x, η) + A(ξ)`,
//! * multiplicative `F = a(x, η) · A(ξ)`,
//! * `pure_xi`, the additive case `a = 0`, `A(ξ) = ξ`,
//! * custom closures, validated against finite differences.
//!
//! Any of them can be wrapped as `Φ ∘ F` for an odd increasing `Φ`. The
//! wrapper does not change minimizers, so solvers work with
//! [`SupremandSpec::inner`] and report `Φ(F_∞)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, SymmetricEigen};
use rand::Rng;
use thiserror::Error;

/// Maximum jet length (`n = 2`).
pub const MAX_JET: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SupremandError {
    #[error("monotone function is not invertible: {0}")]
    NotInvertible(String),
    #[error("coefficient is not uniformly positive: min {min:e} at x={x:?}, eta={eta}")]
    NotPositive { min: f64, x: Vec<f64>, eta: f64 },
    #[error("Phi is not odd and strictly increasing: {0}")]
    BadPhi(String),
    #[error("d/dxi F = {value:e} < c = {c:e} at {point}")]
    Monotonicity { value: f64, c: f64, point: String },
    #[error("supplied partials disagree with finite differences (relative error {err:e}) at {point}")]
    Derivatives { err: f64, point: String },
    #[error("supremand depends on the gradient variable")]
    GradientDependence,
    #[error("invalid sampling box: {0}")]
    Box(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// Value, gradient and Hessian of a supremand at one point, over the first
/// `m` jet slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivs {
    pub m: usize,
    pub value: f64,
    pub grad: [f64; MAX_JET],
    pub hess: [[f64; MAX_JET]; MAX_JET],
}

impl Derivs {
    pub fn zero(m: usize) -> Self {
        Derivs {
            m,
            value: 0.0,
            grad: [0.0; MAX_JET],
            hess: [[0.0; MAX_JET]; MAX_JET],
        }
    }

    /// `∂_ξ F`.
    pub fn d_xi(&self) -> f64 {
        self.grad[self.m - 1]
    }

    /// `∂_η F`.
    pub fn d_eta(&self) -> f64 {
        self.grad[0]
    }

    /// `∂_p F`, one entry per space dimension.
    pub fn d_p(&self) -> &[f64] {
        &self.grad[1..self.m - 1]
    }

    pub fn d_xi_xi(&self) -> f64 {
        self.hess[self.m - 1][self.m - 1]
    }

    /// Reduced Hessian of `|F|^p` via `p|F|^{p-2}(F ∂²F + (p-1) ∂F ⊗ ∂F)`.
    pub fn abs_pow_hessian(&self, p: f64) -> [[f64; MAX_JET]; MAX_JET] {
        let f = self.value;
        let s = p * f.abs().powf(p - 2.0);
        let mut out = [[0.0; MAX_JET]; MAX_JET];
        for i in 0..self.m {
            for j in 0..self.m {
                out[i][j] =
                    s * (f * self.hess[i][j] + (p - 1.0) * self.grad[i] * self.grad[j]);
            }
        }
        out
    }

    /// `F ∂²F + (q - 1) ∂F ⊗ ∂F`.
    pub fn convexity_matrix(&self, q: f64) -> [[f64; MAX_JET]; MAX_JET] {
        let mut out = [[0.0; MAX_JET]; MAX_JET];
        for i in 0..self.m {
            for j in 0..self.m {
                out[i][j] = self.value * self.hess[i][j] + (q - 1.0) * self.grad[i] * self.grad[j];
            }
        }
        out
    }
}

type CurveFn = dyn Fn(f64) -> [f64; 3] + Send + Sync;
type CoefFn = dyn Fn(&[f64], f64) -> [f64; 3] + Send + Sync;
type CustomFn = dyn Fn(&[f64], &[f64]) -> Derivs + Send + Sync;
type GrowthFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Scalar function of one variable with its first two derivatives.
#[derive(Clone)]
pub struct Curve {
    name: String,
    f: Arc<CurveFn>,
    min_slope: Option<f64>,
}

impl fmt::Debug for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Curve({})", self.name)
    }
}

impl Curve {
    /// `f` returns `[value, first derivative, second derivative]`.
    pub fn new(name: &str, f: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static) -> Self {
        Curve {
            name: name.to_string(),
            f: Arc::new(f),
            min_slope: None,
        }
    }

    /// Declares a global lower bound on the derivative.
    pub fn with_min_slope(mut self, s: f64) -> Self {
        self.min_slope = Some(s);
        self
    }

    pub fn identity() -> Self {
        Curve::affine(1.0, 0.0)
    }

    pub fn affine(slope: f64, intercept: f64) -> Self {
        Curve::new(&format!("{slope}*t+{intercept}"), move |t| {
            [slope * t + intercept, slope, 0.0]
        })
        .with_min_slope(slope)
    }

    /// `k1 t + k3 t³`.
    pub fn cubic(k1: f64, k3: f64) -> Self {
        let c = Curve::new(&format!("{k1}*t+{k3}*t^3"), move |t| {
            [k1 * t + k3 * t * t * t, k1 + 3.0 * k3 * t * t, 6.0 * k3 * t]
        });
        if k3 >= 0.0 {
            c.with_min_slope(k1)
        } else {
            c
        }
    }

    pub fn cube() -> Self {
        Curve::new("t^3", |t| [t * t * t, 3.0 * t * t, 6.0 * t])
    }

    pub fn sinh() -> Self {
        Curve::new("sinh", |t| [t.sinh(), t.cosh(), t.sinh()]).with_min_slope(1.0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn min_slope(&self) -> Option<f64> {
        self.min_slope
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)[0]
    }

    pub fn derivs(&self, t: f64) -> [f64; 3] {
        (self.f)(t)
    }
}

/// Coefficient `a(x, η)` with `∂_η a` and `∂²_η a`.
#[derive(Clone)]
pub struct Coefficient {
    name: String,
    f: Arc<CoefFn>,
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Coefficient({})", self.name)
    }
}

impl Coefficient {
    /// `f(x, η)` returns `[a, ∂_η a, ∂²_η a]`.
    pub fn new(name: &str, f: impl Fn(&[f64], f64) -> [f64; 3] + Send + Sync + 'static) -> Self {
        Coefficient {
            name: name.to_string(),
            f: Arc::new(f),
        }
    }

    pub fn constant(c: f64) -> Self {
        Coefficient::new(&format!("{c}"), move |_, _| [c, 0.0, 0.0])
    }

    /// `k η + b`.
    pub fn affine_eta(k: f64, b: f64) -> Self {
        Coefficient::new(&format!("{k}*eta+{b}"), move |_, eta| [k * eta + b, k, 0.0])
    }

    /// `k η²`.
    pub fn eta_squared(k: f64) -> Self {
        Coefficient::new(&format!("{k}*eta^2"), move |_, eta| {
            [k * eta * eta, 2.0 * k * eta, 2.0 * k]
        })
    }

    /// `amp · sin(π x_1)`.
    pub fn sin_pi_x(amp: f64) -> Self {
        Coefficient::new(&format!("{amp}*sin(pi*x)"), move |x, _| {
            [amp * (std::f64::consts::PI * x[0]).sin(), 0.0, 0.0]
        })
    }

    /// `exp(ε η)`.
    pub fn exp_eta(eps: f64) -> Self {
        Coefficient::new(&format!("exp({eps}*eta)"), move |_, eta| {
            let e = (eps * eta).exp();
            [e, eps * e, eps * eps * e]
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn derivs(&self, x: &[f64], eta: f64) -> [f64; 3] {
        (self.f)(x, eta)
    }
}

#[derive(Clone)]
enum Family {
    Additive { a: Coefficient, big_a: Curve },
    Multiplicative { a: Coefficient, big_a: Curve, zero: f64 },
    Custom { f: Arc<CustomFn> },
}

/// A supremand with its constants.
#[derive(Clone)]
pub struct SupremandSpec {
    name: String,
    family: Family,
    phi: Option<Curve>,
    c: f64,
    alpha: f64,
    growth: Option<Arc<GrowthFn>>,
    validated: bool,
}

impl fmt::Debug for SupremandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SupremandSpec")
            .field("name", &self.name)
            .field("phi", &self.phi.as_ref().map(|p| p.name().to_string()))
            .field("c", &self.c)
            .field("alpha", &self.alpha)
            .field("validated", &self.validated)
            .finish()
    }
}

/// Axis-aligned sampling region `Ω × L × M × R` for `(x, η, p, ξ)`.
/// Every gradient component ranges over the same interval `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub x_lower: Vec<f64>,
    pub x_upper: Vec<f64>,
    pub eta: (f64, f64),
    pub p: (f64, f64),
    pub xi: (f64, f64),
}

impl SampleBox {
    pub fn new(
        x_lower: &[f64],
        x_upper: &[f64],
        eta: (f64, f64),
        p: (f64, f64),
        xi: (f64, f64),
    ) -> Result<Self, SupremandError> {
        let b = SampleBox {
            x_lower: x_lower.to_vec(),
            x_upper: x_upper.to_vec(),
            eta,
            p,
            xi,
        };
        b.validate()?;
        Ok(b)
    }

    /// Unit interval or square with symmetric `[-r, r]` ranges.
    pub fn symmetric(dim: usize, r: f64) -> Self {
        SampleBox {
            x_lower: vec![0.0; dim],
            x_upper: vec![1.0; dim],
            eta: (-r, r),
            p: (-r, r),
            xi: (-r, r),
        }
    }

    pub fn validate(&self) -> Result<(), SupremandError> {
        let d = self.x_lower.len();
        if d == 0 || d > 2 || self.x_upper.len() != d {
            return Err(SupremandError::Box(format!(
                "x corners must both have length 1 or 2 (got {} and {})",
                d,
                self.x_upper.len()
            )));
        }
        let mut ranges: Vec<(f64, f64)> = self
            .x_lower
            .iter()
            .cloned()
            .zip(self.x_upper.iter().cloned())
            .collect();
        ranges.extend([self.eta, self.p, self.xi]);
        for (lo, hi) in ranges {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(SupremandError::Box(format!("empty or infinite range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.x_lower.len()
    }

    /// The same box with the ξ range scaled about its midpoint.
    pub fn with_xi_scaled(&self, s: f64) -> Self {
        let mid = 0.5 * (self.xi.0 + self.xi.1);
        let half = 0.5 * (self.xi.1 - self.xi.0) * s;
        let half = if half == 0.0 { s - 1.0 } else { half };
        SampleBox {
            xi: (mid - half, mid + half),
            ..self.clone()
        }
    }

    fn axes(&self) -> Vec<(f64, f64)> {
        let d = self.dim();
        let mut axes: Vec<(f64, f64)> = (0..d).map(|k| (self.x_lower[k], self.x_upper[k])).collect();
        axes.push(self.eta);
        for _ in 0..d {
            axes.push(self.p);
        }
        axes.push(self.xi);
        axes
    }

    /// Tensor lattice with `density` points per axis (endpoints included).
    /// Returns `(x, jet)` pairs.
    pub fn lattice(&self, density: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
        let axes = self.axes();
        let d = self.dim();
        let density = density.max(1);
        let total = density.pow(axes.len() as u32);
        let mut out = Vec::with_capacity(total);
        let coord = |(lo, hi): (f64, f64), k: usize| {
            if density == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * k as f64 / (density - 1) as f64
            }
        };
        for mut code in 0..total {
            let mut pt = Vec::with_capacity(axes.len());
            for ax in &axes {
                pt.push(coord(*ax, code % density));
                code /= density;
            }
            let jet = pt.split_off(d);
            out.push((pt, jet));
        }
        out
    }

    /// Uniform random points in the box.
    pub fn random<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<(Vec<f64>, Vec<f64>)> {
        let axes = self.axes();
        let d = self.dim();
        (0..n)
            .map(|_| {
                let mut pt: Vec<f64> = axes
                    .iter()
                    .map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
                    .collect();
                let jet = pt.split_off(d);
                (pt, jet)
            })
            .collect()
    }
}

fn fmt_point(x: &[f64], jet: &[f64]) -> String {
    format!("x={x:?} jet={jet:?}")
}

/// Root of an increasing function `g` with derivative `dg`, by bracket
/// expansion, then Newton steps safeguarded by bisection.
pub fn monotone_root(g: impl Fn(f64) -> (f64, f64), guess: f64) -> Option<f64> {
    let guess = if guess.is_finite() { guess } else { 0.0 };
    let (mut lo, mut hi) = (guess - 1.0, guess + 1.0);
    let mut glo = g(lo).0;
    let mut ghi = g(hi).0;
    let mut width = 1.0;
    while glo > 0.0 {
        width *= 2.0;
        hi = lo;
        ghi = glo;
        lo = guess - width;
        glo = g(lo).0;
        if width > 1e15 || !glo.is_finite() {
            return None;
        }
    }
    width = 1.0;
    while ghi < 0.0 {
        width *= 2.0;
        lo = hi;
        glo = ghi;
        hi = guess + width;
        ghi = g(hi).0;
        if width > 1e15 || !ghi.is_finite() {
            return None;
        }
    }
    if glo == 0.0 {
        return Some(lo);
    }
    if ghi == 0.0 {
        return Some(hi);
    }
    let scale = 1.0 + glo.abs().max(ghi.abs()).min(1.0);
    let mut t = 0.5 * (lo + hi);
    for _ in 0..400 {
        let (v, dv) = g(t);
        if v.abs() <= 1e-13 * scale {
            return Some(t);
        }
        if v < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - v / dv;
        t = if dv > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * (1.0 + t.abs()) {
            return Some(t);
        }
    }
    Some(t)
}

impl SupremandSpec {
    fn build(name: &str, family: Family, c: f64) -> Self {
        SupremandSpec {
            name: name.to_string(),
            family,
            phi: None,
            c,
            alpha: 0.5,
            growth: None,
            validated: true,
        }
    }

    /// `F = ξ`.
    pub fn pure_xi() -> Self {
        SupremandSpec::build(
            "pure_xi",
            Family::Additive {
                a: Coefficient::constant(0.0),
                big_a: Curve::identity(),
            },
            1.0,
        )
    }

    /// Custom supremand checked on `sample` for `∂_ξF ≥ c` and for
    /// agreement of the supplied partials with finite differences.
    pub fn custom(
        name: &str,
        c: f64,
        f: impl Fn(&[f64], &[f64]) -> Derivs + Send + Sync + 'static,
        sample: &SampleBox,
    ) -> Result<Self, SupremandError> {
        if !(c > 0.0) {
            return Err(SupremandError::Parameter(format!("c must be positive, got {c}")));
        }
        let spec = SupremandSpec::build(name, Family::Custom { f: Arc::new(f) }, c);
        sample.validate()?;
        let pts = sample.lattice(4);
        for (x, jet) in &pts {
            let d = spec.derivs(x, jet);
            if d.d_xi() < c * (1.0 - 1e-12) {
                return Err(SupremandError::Monotonicity {
                    value: d.d_xi(),
                    c,
                    point: fmt_point(x, jet),
                });
            }
        }
        check_derivatives(&spec, &pts)?;
        Ok(spec)
    }

    /// Custom supremand without any validation. Only for diagnostics such
    /// as building counterexamples; solvers assume `∂_ξF ≥ c`.
    pub fn custom_unchecked(
        name: &str,
        c: f64,
        f: impl Fn(&[f64], &[f64]) -> Derivs + Send + Sync + 'static,
    ) -> Self {
        let mut s = SupremandSpec::build(name, Family::Custom { f: Arc::new(f) }, c);
        s.validated = false;
        s
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self, SupremandError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(SupremandError::Parameter(format!("alpha must lie in (0,1), got {alpha}")));
        }
        self.alpha = alpha;
        Ok(self)
    }

    /// Attaches a monotone envelope `C` used by [`check_assumptions`].
    pub fn with_growth(mut self, growth: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.growth = Some(Arc::new(growth));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn phi(&self) -> Option<&Curve> {
        self.phi.as_ref()
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    /// Whether `∂_p F` can be nonzero.
    pub fn may_depend_on_gradient(&self) -> bool {
        matches!(self.family, Family::Custom { .. })
    }

    /// The supremand with any `Φ` wrapper removed.
    pub fn inner(&self) -> SupremandSpec {
        SupremandSpec {
            phi: None,
            name: self.name.clone(),
            ..self.clone()
        }
    }

    /// `Φ(t)`, or `t` when unwrapped.
    pub fn report_value(&self, t: f64) -> f64 {
        match &self.phi {
            Some(phi) => phi.eval(t),
            None => t,
        }
    }

    fn inner_derivs(&self, x: &[f64], jet: &[f64]) -> Derivs {
        let m = jet.len();
        let xi = jet[m - 1];
        let eta = jet[0];
        match &self.family {
            Family::Additive { a, big_a } => {
                let [av, ae, aee] = a.derivs(x, eta);
                let [bv, b1, b2] = big_a.derivs(xi);
                let mut d = Derivs::zero(m);
                d.value = av + bv;
                d.grad[0] = ae;
                d.grad[m - 1] = b1;
                d.hess[0][0] = aee;
                d.hess[m - 1][m - 1] = b2;
                d
            }
            Family::Multiplicative { a, big_a, .. } => {
                let [av, ae, aee] = a.derivs(x, eta);
                let [bv, b1, b2] = big_a.derivs(xi);
                let mut d = Derivs::zero(m);
                d.value = av * bv;
                d.grad[0] = ae * bv;
                d.grad[m - 1] = av * b1;
                d.hess[0][0] = aee * bv;
                d.hess[m - 1][m - 1] = av * b2;
                d.hess[0][m - 1] = ae * b1;
                d.hess[m - 1][0] = ae * b1;
                d
            }
            Family::Custom { f } => {
                let mut d = f(x, jet);
                d.m = m;
                d
            }
        }
    }

    /// Value and partials of the (possibly wrapped) supremand.
    pub fn derivs(&self, x: &[f64], jet: &[f64]) -> Derivs {
        let d = self.inner_derivs(x, jet);
        match &self.phi {
            None => d,
            Some(phi) => {
                let [v, d1, d2] = phi.derivs(d.value);
                let mut out = Derivs::zero(d.m);
                out.value = v;
                for i in 0..d.m {
                    out.grad[i] = d1 * d.grad[i];
                    for j in 0..d.m {
                        out.hess[i][j] = d2 * d.grad[i] * d.grad[j] + d1 * d.hess[i][j];
                    }
                }
                out
            }
        }
    }

    pub fn value(&self, x: &[f64], jet: &[f64]) -> f64 {
        self.derivs(x, jet).value
    }

    /// Zero-level map `ξ̄(x, η, p)` of the inner supremand.
    pub fn zero_level(&self, x: &[f64], eta: f64, p: &[f64]) -> Result<f64, SupremandError> {
        let mut jet = Vec::with_capacity(p.len() + 2);
        jet.push(eta);
        jet.extend_from_slice(p);
        jet.push(0.0);
        let m = jet.len();
        let root = match &self.family {
            Family::Multiplicative { zero, .. } => Some(*zero),
            Family::Additive { a, big_a } => {
                let target = -a.derivs(x, eta)[0];
                monotone_root(
                    |t| {
                        let [v, d, _] = big_a.derivs(t);
                        (v - target, d)
                    },
                    0.0,
                )
            }
            Family::Custom { .. } => monotone_root(
                |t| {
                    let mut j = jet.clone();
                    j[m - 1] = t;
                    let d = self.inner_derivs(x, &j);
                    (d.value, d.d_xi())
                },
                0.0,
            ),
        };
        root.ok_or_else(|| {
            SupremandError::NotInvertible(format!(
                "no zero of F in xi at x={x:?}, eta={eta}, p={p:?}"
            ))
        })
    }
}

/// `F = a(x, η) + A(ξ)`. `A` must be increasing with slope bounded below on
/// the ξ range of `sample`, and `A(ξ) = -a(x, η)` must be solvable at every
/// sampled `(x, η)`.
pub fn make_additive(
    a: Coefficient,
    big_a: Curve,
    sample: &SampleBox,
) -> Result<SupremandSpec, SupremandError> {
    sample.validate()?;
    let c = curve_min_slope(&big_a, sample.xi)?;
    let name = format!("additive[{} + {}]", a.name(), big_a.name());
    let spec = SupremandSpec::build(&name, Family::Additive { a, big_a }, c);
    for (x, jet) in sample.lattice(5) {
        spec.zero_level(&x, jet[0], &jet[1..jet.len() - 1])?;
    }
    Ok(spec)
}

/// `F = a(x, η) · A(ξ)` with `a` uniformly positive on `sample`.
pub fn make_multiplicative(
    a: Coefficient,
    big_a: Curve,
    sample: &SampleBox,
) -> Result<SupremandSpec, SupremandError> {
    sample.validate()?;
    let slope = curve_min_slope(&big_a, sample.xi)?;
    let mut amin = f64::INFINITY;
    for (x, jet) in sample.lattice(9) {
        let v = a.derivs(&x, jet[0])[0];
        if !(v > 0.0) {
            return Err(SupremandError::NotPositive {
                min: v,
                x,
                eta: jet[0],
            });
        }
        amin = amin.min(v);
    }
    let zero = monotone_root(
        |t| {
            let [v, d, _] = big_a.derivs(t);
            (v, d)
        },
        0.0,
    )
    .ok_or_else(|| SupremandError::NotInvertible(format!("{} has no zero", big_a.name())))?;
    let name = format!("multiplicative[{} * {}]", a.name(), big_a.name());
    Ok(SupremandSpec::build(
        &name,
        Family::Multiplicative { a, big_a, zero },
        amin * slope,
    ))
}

fn curve_min_slope(curve: &Curve, range: (f64, f64)) -> Result<f64, SupremandError> {
    let n = 2001;
    let mut smin = f64::INFINITY;
    for k in 0..n {
        let t = range.0 + (range.1 - range.0) * k as f64 / (n - 1) as f64;
        let s = curve.derivs(t)[1];
        if !(s > 0.0) {
            return Err(SupremandError::NotInvertible(format!(
                "{} has slope {s} at {t}",
                curve.name()
            )));
        }
        smin = smin.min(s);
    }
    Ok(match curve.min_slope() {
        Some(s) if s > 0.0 => s,
        _ => smin,
    })
}

/// Wraps `spec` as `Φ ∘ F`. `Φ` is checked for oddness and positive slope
/// on a logarithmic sample of `[-10³, 10³]`.
pub fn wrap_phi(spec: SupremandSpec, phi: Curve) -> Result<SupremandSpec, SupremandError> {
    let mut ts = vec![0.0];
    for k in -30..=30 {
        ts.push(10f64.powf(k as f64 / 10.0));
    }
    for &t in &ts {
        let (p, m) = (phi.eval(t), phi.eval(-t));
        if (p + m).abs() > 1e-12 * (1.0 + p.abs()) {
            return Err(SupremandError::BadPhi(format!("Phi({t}) = {p}, Phi(-{t}) = {m}")));
        }
        if t > 0.0 && !(p > phi.eval(0.0)) {
            return Err(SupremandError::BadPhi(format!("Phi({t}) <= Phi(0)")));
        }
        let d = phi.derivs(t)[1];
        if t > 0.0 && !(d > 0.0) {
            return Err(SupremandError::BadPhi(format!("Phi'({t}) = {d}")));
        }
    }
    let mut out = spec;
    out.name = format!("{}({})", phi.name(), out.name);
    out.phi = Some(phi);
    Ok(out)
}

/// Largest relative discrepancy between the supplied partials and central
/// finite differences over `points`. Errors above `1e-6`.
pub fn check_derivatives(
    spec: &SupremandSpec,
    points: &[(Vec<f64>, Vec<f64>)],
) -> Result<f64, SupremandError> {
    let mut worst = 0.0_f64;
    for (x, jet) in points {
        let err = derivative_error(spec, x, jet);
        if err > 1e-6 {
            return Err(SupremandError::Derivatives {
                err,
                point: fmt_point(x, jet),
            });
        }
        worst = worst.max(err);
    }
    Ok(worst)
}

fn derivative_error(spec: &SupremandSpec, x: &[f64], jet: &[f64]) -> f64 {
    let m = jet.len();
    let d = spec.derivs(x, jet);
    let mut worst = 0.0_f64;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
    for k in 0..m {
        let h = 1e-5 * (1.0 + jet[k].abs());
        let mut jp = jet.to_vec();
        let mut jm = jet.to_vec();
        jp[k] += h;
        jm[k] -= h;
        let dp = spec.derivs(x, &jp);
        let dm = spec.derivs(x, &jm);
        worst = worst.max(rel(d.grad[k], (dp.value - dm.value) / (2.0 * h)));
        for l in 0..m {
            worst = worst.max(rel(d.hess[k][l], (dp.grad[l] - dm.grad[l]) / (2.0 * h)));
        }
    }
    worst
}

fn smallest_eigenvalue(mat: &[[f64; MAX_JET]; MAX_JET], m: usize) -> f64 {
    let dm = nalgebra::DMatrix::from_fn(m, m, |i, j| 0.5 * (mat[i][j] + mat[j][i]));
    SymmetricEigen::new(dm).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn matrix_scale(mat: &[[f64; MAX_JET]; MAX_JET], m: usize) -> f64 {
    let mut s = 0.0_f64;
    for row in mat.iter().take(m) {
        for v in row.iter().take(m) {
            s = s.max(v.abs());
        }
    }
    s
}

/// Result of a sampled convexity scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityCertificate {
    pub sample_box: SampleBox,
    /// Smallest candidate exponent for which every sample passed.
    pub p_bar: Option<f64>,
    /// Worst smallest eigenvalue at `p_bar`, or at the last candidate when
    /// none passed.
    pub worst_eigenvalue: f64,
    /// Worst eigenvalue per candidate, in candidate order.
    pub per_candidate: Vec<(f64, f64)>,
    pub sample_count: usize,
    /// Jet of the worst sample at the reported exponent.
    pub witness: Vec<f64>,
}

/// Eigenvalue floor for the semi-convexity matrix, relative to its size.
pub const CONVEXITY_TOL: f64 = 1e-9;

/// Scans `F ∂²F + (q-1) ∂F⊗∂F ⪰ 0` over a lattice for every candidate `q`.
pub fn certify_convexity(
    spec: &SupremandSpec,
    sample: &SampleBox,
    candidates: &[f64],
    density: usize,
) -> Result<ConvexityCertificate, SupremandError> {
    sample.validate()?;
    if candidates.is_empty() {
        return Err(SupremandError::Parameter("no candidate exponents".into()));
    }
    if candidates.windows(2).any(|w| !(w[0] < w[1])) || candidates[0] < 2.0 {
        return Err(SupremandError::Parameter(
            "candidates must be ascending and at least 2".into(),
        ));
    }
    let pts = sample.lattice(density);
    let derivs: Vec<Derivs> = pts.iter().map(|(x, j)| spec.derivs(x, j)).collect();
    let mut per_candidate = Vec::with_capacity(candidates.len());
    let mut chosen: Option<(f64, f64, usize)> = None;
    let mut last = (f64::INFINITY, 0usize);
    for &q in candidates {
        let mut worst = f64::INFINITY;
        let mut worst_rel = f64::INFINITY;
        let mut at = 0;
        for (k, d) in derivs.iter().enumerate() {
            let mat = d.convexity_matrix(q);
            let ev = smallest_eigenvalue(&mat, d.m);
            let rel = ev / matrix_scale(&mat, d.m).max(1.0);
            if rel < worst_rel {
                worst_rel = rel;
                worst = ev;
                at = k;
            }
        }
        per_candidate.push((q, worst));
        last = (worst, at);
        if chosen.is_none() && worst_rel >= -CONVEXITY_TOL {
            chosen = Some((q, worst, at));
        }
    }
    let (p_bar, worst_eigenvalue, at) = match chosen {
        Some((q, w, at)) => (Some(q), w, at),
        None => (None, last.0, last.1),
    };
    Ok(ConvexityCertificate {
        sample_box: sample.clone(),
        p_bar,
        worst_eigenvalue,
        per_candidate,
        sample_count: pts.len(),
        witness: pts.get(at).map(|p| p.1.clone()).unwrap_or_default(),
    })
}

/// Outcome of the eigenframe test for gradient-free supremands.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenframeReport {
    pub pass: bool,
    /// Infimum of the eigenvalue along `∂F`.
    pub sigma1_min: f64,
    /// Infimum of the eigenvalue along the rotated direction.
    pub sigma2_min: f64,
    /// Largest relative off-diagonal entry in the frame.
    pub max_coupling: f64,
    /// `m / c + 1` with `m = max(0, ⌈-σ1⌉)`, when the test passes.
    pub implied_p_bar: Option<f64>,
    /// `(σ1, σ2)` per sample.
    pub samples: Vec<(f64, f64)>,
}

/// Checks that `(∂F, ⋆∂F)` diagonalizes `∂²(|F|²)` in the `(η, ξ)` plane.
pub fn check_eigenframe_condition(
    spec: &SupremandSpec,
    sample: &SampleBox,
    density: usize,
) -> Result<EigenframeReport, SupremandError> {
    sample.validate()?;
    let pts = sample.lattice(density);
    let mut out = EigenframeReport {
        pass: true,
        sigma1_min: f64::INFINITY,
        sigma2_min: f64::INFINITY,
        max_coupling: 0.0,
        implied_p_bar: None,
        samples: Vec::with_capacity(pts.len()),
    };
    for (x, jet) in &pts {
        let d = spec.derivs(x, jet);
        let m = d.m;
        let gp_scale = d.grad[0].abs() + d.grad[m - 1].abs() + 1.0;
        for k in 1..m - 1 {
            let mixed = (0..m).map(|l| d.hess[k][l].abs()).fold(0.0, f64::max);
            if d.grad[k].abs() > 1e-12 * gp_scale || mixed > 1e-12 * gp_scale {
                return Err(SupremandError::GradientDependence);
            }
        }
        let (ie, ix) = (0, m - 1);
        let g = [d.grad[ie], d.grad[ix]];
        let h = Matrix2::new(
            2.0 * (d.value * d.hess[ie][ie] + g[0] * g[0]),
            2.0 * (d.value * d.hess[ie][ix] + g[0] * g[1]),
            2.0 * (d.value * d.hess[ix][ie] + g[1] * g[0]),
            2.0 * (d.value * d.hess[ix][ix] + g[1] * g[1]),
        );
        let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
        let e1 = nalgebra::Vector2::new(g[0] / gn, g[1] / gn);
        let e2 = nalgebra::Vector2::new(-e1[1], e1[0]);
        let s1 = e1.dot(&(h * e1));
        let s2 = e2.dot(&(h * e2));
        let off = e1.dot(&(h * e2));
        let scale = h.abs().max().max(1.0);
        out.max_coupling = out.max_coupling.max(off.abs() / scale);
        out.sigma1_min = out.sigma1_min.min(s1);
        out.sigma2_min = out.sigma2_min.min(s2);
        out.samples.push((s1, s2));
    }
    out.pass = out.max_coupling <= 1e-8 && out.sigma2_min >= -1e-9;
    if out.pass {
        let m = (-out.sigma1_min).max(0.0).ceil();
        out.implied_p_bar = Some((m / spec.c() + 1.0).max(2.0));
    }
    Ok(out)
}

/// One sampled assumption.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub pass: bool,
    /// The quantity compared against its bound at the worst sample.
    pub worst: f64,
    pub bound: f64,
    pub witness: Vec<f64>,
    pub note: String,
}

/// Sampled assumption checks. Always heuristic: a pass means no sample
/// violated the bound.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub heuristic: bool,
    pub sample_count: usize,
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn xi_uniform_sup(
    spec: &SupremandSpec,
    sample: &SampleBox,
    density: usize,
    q: impl Fn(&Derivs, &[f64]) -> f64,
) -> (f64, Vec<f64>) {
    let mut worst = 0.0_f64;
    let mut at = Vec::new();
    for (x, jet) in sample.lattice(density) {
        let v = q(&spec.derivs(&x, &jet), &jet);
        if v > worst || at.is_empty() {
            worst = worst.max(v);
            at = jet;
        }
    }
    (worst, at)
}

/// Sampled checks of the structural assumptions on `F`:
///
/// * `xi_monotonicity`: `∂_ξF ≥ c`, and `ξ̄` exists at every sample;
/// * `xi_semiconvexity`: `∂²_ξF ≥ -1/c`;
/// * `zero_level_growth`: `|ξ̄| ≤ ((|η|+|p|)^α + 1)/c`;
/// * `xi_slope_uniform`: `sup |∂_ξF|` over the box does not keep growing as
///   the ξ range is enlarged ×10 and ×100 (growth factor ≤ 2), and stays
///   below the growth envelope when one is attached;
/// * `lower_order_uniform`: the same for `max(|∂_ηF|, |∂_pF|)/(1+|ξ|)`.
///
/// The last two stand in for bounds by an increasing function of `|η|+|p|`
/// alone; the envelope itself is fitted from samples.
pub fn check_assumptions(
    spec: &SupremandSpec,
    sample: &SampleBox,
    density: usize,
) -> Result<AssumptionReport, SupremandError> {
    sample.validate()?;
    let spec = spec.inner();
    let c = spec.c();
    let pts = sample.lattice(density);
    let mut checks = Vec::new();

    let mut mono = (f64::INFINITY, Vec::new());
    let mut semi = (f64::INFINITY, Vec::new());
    let mut zl = (f64::NEG_INFINITY, Vec::new(), 0.0);
    let mut zero_fail: Option<String> = None;
    for (x, jet) in &pts {
        let d = spec.derivs(x, jet);
        if d.d_xi() < mono.0 {
            mono = (d.d_xi(), jet.clone());
        }
        if d.d_xi_xi() < semi.0 {
            semi = (d.d_xi_xi(), jet.clone());
        }
        let p = &jet[1..jet.len() - 1];
        match spec.zero_level(x, jet[0], p) {
            Ok(xb) => {
                let t = jet[0].abs() + p.iter().map(|v| v * v).sum::<f64>().sqrt();
                let bound = (t.powf(spec.alpha()) + 1.0) / c;
                let excess = xb.abs() - bound;
                if excess > zl.0 {
                    zl = (excess, jet.clone(), bound);
                }
            }
            Err(e) => zero_fail = Some(e.to_string()),
        }
    }
    checks.push(AssumptionCheck {
        name: "xi_monotonicity",
        pass: mono.0 >= c * (1.0 - 1e-12) && zero_fail.is_none(),
        worst: mono.0,
        bound: c,
        witness: mono.1,
        note: zero_fail.unwrap_or_default(),
    });
    checks.push(AssumptionCheck {
        name: "xi_semiconvexity",
        pass: semi.0 >= -1.0 / c,
        worst: semi.0,
        bound: -1.0 / c,
        witness: semi.1,
        note: String::new(),
    });
    checks.push(AssumptionCheck {
        name: "zero_level_growth",
        pass: zl.0 <= 1e-12,
        worst: zl.0 + zl.2,
        bound: zl.2,
        witness: zl.1,
        note: "worst is |xibar| at the sample of largest excess".into(),
    });

    let slope_q = |d: &Derivs, _: &[f64]| d.d_xi().abs();
    let lower_q = |d: &Derivs, jet: &[f64]| {
        let m = d.m;
        let mut v = d.grad[0].abs();
        for k in 1..m - 1 {
            v = v.max(d.grad[k].abs());
        }
        v / (1.0 + jet[m - 1].abs())
    };
    for (name, q) in [
        ("xi_slope_uniform", &slope_q as &dyn Fn(&Derivs, &[f64]) -> f64),
        ("lower_order_uniform", &lower_q),
    ] {
        let (s1, w1) = xi_uniform_sup(&spec, sample, density, q);
        let (s10, _) = xi_uniform_sup(&spec, &sample.with_xi_scaled(10.0), density, q);
        let (s100, w100) = xi_uniform_sup(&spec, &sample.with_xi_scaled(100.0), density, q);
        let grows = s10 > 2.0 * s1.max(1e-300) || s100 > 2.0 * s10.max(1e-300);
        let mut pass = !grows && s100.is_finite();
        let mut note = format!("sup over xi ranges x1, x10, x100: {s1:e}, {s10:e}, {s100:e}");
        if let (Some(env), "xi_slope_uniform") = (&spec.growth, name) {
            for (x, jet) in &pts {
                let p = &jet[1..jet.len() - 1];
                let t = jet[0].abs() + p.iter().map(|v| v * v).sum::<f64>().sqrt();
                if spec.derivs(x, jet).d_xi().abs() > env(t) {
                    pass = false;
                    note.push_str("; exceeds the attached envelope");
                    break;
                }
            }
        }
        checks.push(AssumptionCheck {
            name,
            pass,
            worst: s100,
            bound: 2.0 * s1,
            witness: if grows { w100 } else { w1 },
            note,
        });
    }
    Ok(AssumptionReport {
        heuristic: true,
        sample_count: pts.len(),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jet1(eta: f64, p: f64, xi: f64) -> Vec<f64> {
        vec![eta, p, xi]
    }

    fn unit_box() -> SampleBox {
        SampleBox::symmetric(1, 2.0)
    }

    #[test]
    fn pure_xi_basics() {
        let s = SupremandSpec::pure_xi();
        let d = s.derivs(&[0.3], &jet1(1.0, -2.0, 0.7));
        assert_eq!(d.value, 0.7);
        assert_eq!(d.d_xi(), 1.0);
        assert_eq!(s.zero_level(&[0.3], 5.0, &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn additive_examples() {
        let b = unit_box();
        let s = make_additive(Coefficient::affine_eta(1.0, 0.0), Curve::identity(), &b).unwrap();
        let xb = s.zero_level(&[0.2], 1.5, &[0.0]).unwrap();
        assert!((xb + 1.5).abs() < 1e-12);

        let s = make_additive(Coefficient::sin_pi_x(1.0), Curve::cubic(1.0, 1.0 / 3.0), &b).unwrap();
        for k in 0..=20 {
            let x = [k as f64 / 20.0];
            let xb = s.zero_level(&x, 0.0, &[0.0]).unwrap();
            assert!(s.value(&x, &jet1(0.0, 0.0, xb)).abs() <= 1e-10);
            // dense scan of A brackets the same root
            let target = -(std::f64::consts::PI * x[0]).sin();
            let grid: Vec<f64> = (0..=4000).map(|i| -2.0 + i as f64 * 1e-3).collect();
            let k0 = grid
                .windows(2)
                .position(|w| {
                    let a = |t: f64| t + t * t * t / 3.0 - target;
                    a(w[0]) <= 0.0 && a(w[1]) >= 0.0
                })
                .unwrap();
            assert!(xb >= grid[k0] - 1e-12 && xb <= grid[k0 + 1] + 1e-12);
        }
    }

    #[test]
    fn not_invertible_is_reported() {
        let b = unit_box();
        let tanh = Curve::new("tanh", |t| {
            let th = t.tanh();
            [th, 1.0 - th * th, -2.0 * th * (1.0 - th * th)]
        });
        let r = make_additive(Coefficient::constant(3.0), tanh, &b);
        assert!(matches!(r, Err(SupremandError::NotInvertible(_))));
        let r = make_additive(Coefficient::constant(0.0), Curve::affine(-1.0, 0.0), &b);
        assert!(matches!(r, Err(SupremandError::NotInvertible(_))));
    }

    #[test]
    fn multiplicative_examples() {
        let b = unit_box();
        let s = make_multiplicative(Coefficient::constant(2.0), Curve::identity(), &b).unwrap();
        let d = s.derivs(&[0.5], &jet1(0.1, 0.2, 1.5));
        assert_eq!(d.value, 3.0);
        assert_eq!(d.d_xi(), 2.0);
        assert_eq!(s.zero_level(&[0.5], 0.1, &[0.2]).unwrap(), 0.0);
        assert_eq!(s.c(), 2.0);
        assert!(matches!(
            make_multiplicative(Coefficient::affine_eta(1.0, 0.0), Curve::identity(), &b),
            Err(SupremandError::NotPositive { .. })
        ));
    }

    #[test]
    fn builtin_partials_match_finite_differences() {
        let b = unit_box();
        let specs = vec![
            SupremandSpec::pure_xi(),
            make_additive(Coefficient::sin_pi_x(1.0), Curve::cubic(1.0, 1.0 / 3.0), &b).unwrap(),
            make_multiplicative(Coefficient::exp_eta(0.3), Curve::cubic(2.0, 0.5), &b).unwrap(),
            wrap_phi(SupremandSpec::pure_xi(), Curve::sinh()).unwrap(),
        ];
        for s in &specs {
            check_derivatives(s, &b.lattice(4)).unwrap();
        }
    }

    #[test]
    fn phi_wrapping() {
        let s = wrap_phi(SupremandSpec::pure_xi(), Curve::cube()).unwrap();
        assert_eq!(s.value(&[0.0], &jet1(0.0, 0.0, 2.0)), 8.0);
        assert_eq!(s.report_value(2.0), 8.0);
        assert_eq!(s.inner().value(&[0.0], &jet1(0.0, 0.0, 2.0)), 2.0);
        let even = Curve::new("t^2", |t| [t * t, 2.0 * t, 2.0]);
        assert!(matches!(
            wrap_phi(SupremandSpec::pure_xi(), even),
            Err(SupremandError::BadPhi(_))
        ));
        let decreasing = Curve::affine(-1.0, 0.0);
        assert!(wrap_phi(SupremandSpec::pure_xi(), decreasing).is_err());
        let id = wrap_phi(SupremandSpec::pure_xi(), Curve::identity()).unwrap();
        assert_eq!(id.value(&[0.0], &jet1(1.0, 1.0, -0.25)), -0.25);
    }

    #[test]
    fn custom_validation() {
        let b = unit_box();
        let good = SupremandSpec::custom(
            "xi+p^2",
            1.0,
            |_, j| {
                let mut d = Derivs::zero(j.len());
                d.value = j[2] + j[1] * j[1];
                d.grad[1] = 2.0 * j[1];
                d.grad[2] = 1.0;
                d.hess[1][1] = 2.0;
                d
            },
            &b,
        );
        assert!(good.is_ok());
        let wrong = SupremandSpec::custom(
            "bad partials",
            1.0,
            |_, j| {
                let mut d = Derivs::zero(j.len());
                d.value = j[2] + j[0] * j[0];
                d.grad[2] = 1.0;
                d
            },
            &b,
        );
        assert!(matches!(wrong, Err(SupremandError::Derivatives { .. })));
        let weak = SupremandSpec::custom(
            "0.5 xi",
            1.0,
            |_, j| {
                let mut d = Derivs::zero(j.len());
                d.value = 0.5 * j[2];
                d.grad[2] = 0.5;
                d
            },
            &b,
        );
        assert!(matches!(weak, Err(SupremandError::Monotonicity { .. })));
    }

    #[test]
    fn convexity_examples() {
        let b = unit_box();
        let cands = [2.0, 4.0, 8.0, 16.0];
        let c = certify_convexity(&SupremandSpec::pure_xi(), &b, &cands, 4).unwrap();
        assert_eq!(c.p_bar, Some(2.0));
        let aff = make_additive(Coefficient::affine_eta(0.7, -0.2), Curve::affine(1.3, 0.4), &b).unwrap();
        let c = certify_convexity(&aff, &b, &cands, 4).unwrap();
        assert_eq!(c.p_bar, Some(2.0));
        assert!(c.per_candidate.iter().all(|(_, w)| *w >= -1e-9));
        let straddle = SupremandSpec::custom_unchecked("eta*xi", 1.0, |_, j| {
            let m = j.len();
            let mut d = Derivs::zero(m);
            d.value = j[0] * j[m - 1];
            d.grad[0] = j[m - 1];
            d.grad[m - 1] = j[0];
            d.hess[0][m - 1] = 1.0;
            d.hess[m - 1][0] = 1.0;
            d
        });
        let c = certify_convexity(&straddle, &b, &[2.0, 4.0, 16.0, 256.0, 4096.0], 5).unwrap();
        assert_eq!(c.p_bar, None);
        assert!(c.worst_eigenvalue < 0.0);
    }

    #[test]
    fn eigenframe_examples() {
        let b = unit_box();
        let r = check_eigenframe_condition(&SupremandSpec::pure_xi(), &b, 4).unwrap();
        assert!(r.pass);
        assert!((r.sigma1_min - 2.0).abs() < 1e-12);
        assert!(r.sigma2_min.abs() < 1e-12);
        let s = make_additive(Coefficient::affine_eta(1.0, 0.0), Curve::identity(), &b).unwrap();
        let r = check_eigenframe_condition(&s, &b, 4).unwrap();
        assert!(r.pass);
        let grad = SupremandSpec::custom_unchecked("xi+p", 1.0, |_, j| {
            let mut d = Derivs::zero(j.len());
            d.value = j[2] + j[1];
            d.grad[1] = 1.0;
            d.grad[2] = 1.0;
            d
        });
        assert!(matches!(
            check_eigenframe_condition(&grad, &b, 3),
            Err(SupremandError::GradientDependence)
        ));
    }

    #[test]
    fn assumption_examples() {
        let b = unit_box();
        let r = check_assumptions(&SupremandSpec::pure_xi(), &b, 4).unwrap();
        assert!(r.heuristic);
        assert!(r.all_pass(), "{r:?}");
        let cubic = make_additive(Coefficient::constant(0.0), Curve::cubic(1.0, 1.0), &b).unwrap();
        let r = check_assumptions(&cubic, &b, 4).unwrap();
        assert!(r.get("xi_monotonicity").unwrap().pass);
        assert!(!r.get("xi_slope_uniform").unwrap().pass);
        let s = make_additive(Coefficient::sin_pi_x(1.0), Curve::identity(), &b).unwrap();
        assert!(check_assumptions(&s, &b, 4).unwrap().all_pass());
    }

    #[test]
    fn root_finder_handles_far_roots() {
        let r = monotone_root(|t| (t - 1e6, 1.0), 0.0).unwrap();
        assert!((r - 1e6).abs() < 1e-6);
        assert!(monotone_root(|t| (t.atan() - 3.0, 1.0 / (1.0 + t * t)), 0.0).is_none());
    }
}
