//! Collision kernels and breakage distribution functions.
//!
//! A breakage function `β(x | y; z)` gives the density of fragments of size
//! `x` produced when a particle of size `y` breaks in a collision with a
//! catalyst of size `z`. The sectional schemes only ever need sub-cell
//! integrals of `β` and `x·β`, so those partial integrals are the extension
//! point: builtins supply closed forms, user functions fall back to adaptive
//! quadrature of the pointwise density.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};

/// Moment weight under a partial integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Weight {
    /// `∫ β dx`
    One,
    /// `∫ x β dx`
    X,
}

impl Weight {
    fn apply(self, x: f64) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::X => x,
        }
    }
}

fn check_interval(a: f64, b: f64, y: f64) -> Result<()> {
    // Allow the upper limit to touch `y` up to rounding.
    if !(a >= 0.0 && a <= b && b <= y * (1.0 + 4.0 * f64::EPSILON)) {
        return Err(Error::InvalidInterval { a, b, y });
    }
    Ok(())
}

pub trait Breakage: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Pointwise density `β(x | y; z)`; zero for `x > y`.
    fn density(&self, x: f64, y: f64, z: f64) -> f64;

    /// `∫_a^b w(x) β(x | y; z) dx` for `0 <= a <= b <= y`.
    fn partial(&self, weight: Weight, a: f64, b: f64, y: f64, z: f64) -> Result<f64> {
        quadrature_partial(self, weight, a, b, y, z)
    }

    /// True when `β` ignores the catalyst size.
    fn z_independent(&self) -> bool {
        false
    }
}

/// Partial integral by adaptive quadrature of [`Breakage::density`].
pub fn quadrature_partial<B: Breakage + ?Sized>(
    breakage: &B,
    weight: Weight,
    a: f64,
    b: f64,
    y: f64,
    z: f64,
) -> Result<f64> {
    check_interval(a, b, y)?;
    let b = b.min(y);
    quadrature::integrate(
        |x| weight.apply(x) * breakage.density(x, y, z),
        a,
        b,
        Tolerance::default(),
    )
}

/// `β = 2/y`: binary breakage with uniformly distributed fragments.
#[derive(Clone, Copy, Debug, Default)]
pub struct BinaryUniform;

impl Breakage for BinaryUniform {
    fn name(&self) -> &str {
        "binary_2_over_y"
    }

    fn density(&self, x: f64, y: f64, _z: f64) -> f64 {
        if x <= y {
            2.0 / y
        } else {
            0.0
        }
    }

    fn partial(&self, weight: Weight, a: f64, b: f64, y: f64, _z: f64) -> Result<f64> {
        check_interval(a, b, y)?;
        Ok(match weight {
            Weight::One => 2.0 * (b - a) / y,
            Weight::X => (b * b - a * a) / y,
        })
    }

    fn z_independent(&self) -> bool {
        true
    }
}

/// `β = 4x²/y³`, producing `4/3` fragments per event.
#[derive(Clone, Copy, Debug, Default)]
pub struct QuarticPower;

impl Breakage for QuarticPower {
    fn name(&self) -> &str {
        "quartic_4x2_over_y3"
    }

    fn density(&self, x: f64, y: f64, _z: f64) -> f64 {
        if x <= y {
            4.0 * x * x / (y * y * y)
        } else {
            0.0
        }
    }

    fn partial(&self, weight: Weight, a: f64, b: f64, y: f64, _z: f64) -> Result<f64> {
        check_interval(a, b, y)?;
        let y3 = y * y * y;
        Ok(match weight {
            Weight::One => 4.0 / 3.0 * (b * b * b - a * a * a) / y3,
            Weight::X => (b.powi(4) - a.powi(4)) / y3,
        })
    }

    fn z_independent(&self) -> bool {
        true
    }
}

/// `β = 12x/y² (1 - x/y)`, which vanishes at `x = y`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Parabolic;

impl Breakage for Parabolic {
    fn name(&self) -> &str {
        "parabolic_12x"
    }

    fn density(&self, x: f64, y: f64, _z: f64) -> f64 {
        if x <= y {
            12.0 * x / (y * y) * (1.0 - x / y)
        } else {
            0.0
        }
    }

    fn partial(&self, weight: Weight, a: f64, b: f64, y: f64, _z: f64) -> Result<f64> {
        check_interval(a, b, y)?;
        let y2 = y * y;
        let y3 = y2 * y;
        let d2 = b * b - a * a;
        let d3 = b * b * b - a * a * a;
        Ok(match weight {
            Weight::One => 6.0 / y2 * d2 - 4.0 / y3 * d3,
            Weight::X => 4.0 / y2 * d3 - 3.0 / y3 * (b.powi(4) - a.powi(4)),
        })
    }

    fn z_independent(&self) -> bool {
        true
    }
}

pub type RateFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Collision {
    /// `K = c`
    Constant(f64),
    /// `K = y z`
    Product,
    Custom { name: String, rate: RateFn },
}

impl Collision {
    #[inline]
    pub fn rate(&self, y: f64, z: f64) -> f64 {
        match self {
            Collision::Constant(c) => *c,
            Collision::Product => y * z,
            Collision::Custom { rate, .. } => rate(y, z),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Collision::Constant(c) if *c == 1.0 => "constant_one",
            Collision::Constant(_) => "constant",
            Collision::Product => "product_xy",
            Collision::Custom { name, .. } => name,
        }
    }

    /// `K(y, z) = k(y) k(z)` with a known factor.
    pub fn is_separable(&self) -> bool {
        matches!(self, Collision::Constant(_) | Collision::Product)
    }
}

impl fmt::Debug for Collision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A collision kernel paired with a breakage function.
#[derive(Clone, Debug)]
pub struct KernelSpec {
    pub collision: Collision,
    pub breakage: Arc<dyn Breakage>,
}

pub const COLLISION_NAMES: [&str; 2] = ["product_xy", "constant_one"];
pub const BREAKAGE_NAMES: [&str; 3] = ["binary_2_over_y", "quartic_4x2_over_y3", "parabolic_12x"];

pub fn builtin_collision(name: &str) -> Result<Collision> {
    match name {
        "product_xy" => Ok(Collision::Product),
        "constant_one" => Ok(Collision::Constant(1.0)),
        _ => Err(Error::UnknownKernel(name.to_string())),
    }
}

pub fn builtin_breakage(name: &str) -> Result<Arc<dyn Breakage>> {
    match name {
        "binary_2_over_y" => Ok(Arc::new(BinaryUniform)),
        "quartic_4x2_over_y3" => Ok(Arc::new(QuarticPower)),
        "parabolic_12x" => Ok(Arc::new(Parabolic)),
        _ => Err(Error::UnknownKernel(name.to_string())),
    }
}

impl KernelSpec {
    pub fn new(collision: Collision, breakage: Arc<dyn Breakage>) -> Self {
        KernelSpec {
            collision,
            breakage,
        }
    }

    pub fn builtin(collision: &str, breakage: &str) -> Result<Self> {
        Ok(KernelSpec::new(
            builtin_collision(collision)?,
            builtin_breakage(breakage)?,
        ))
    }

    /// Parses `"<collision>/<breakage>"`.
    pub fn from_name(name: &str) -> Result<Self> {
        let (c, b) = name
            .split_once('/')
            .ok_or_else(|| Error::UnknownKernel(name.to_string()))?;
        KernelSpec::builtin(c, b)
    }

    pub fn name(&self) -> String {
        format!("{}/{}", self.collision.name(), self.breakage.name())
    }

    #[inline]
    pub fn rate(&self, y: f64, z: f64) -> f64 {
        self.collision.rate(y, z)
    }

    pub fn partial0(&self, a: f64, b: f64, y: f64, z: f64) -> Result<f64> {
        self.breakage.partial(Weight::One, a, b, y, z)
    }

    pub fn partial1(&self, a: f64, b: f64, y: f64, z: f64) -> Result<f64> {
        self.breakage.partial(Weight::X, a, b, y, z)
    }

    /// `ζ(y, z) = ∫_0^y β dx`.
    pub fn fragment_count(&self, y: f64, z: f64) -> Result<f64> {
        self.partial0(0.0, y, y, z)
    }

    pub fn z_independent(&self) -> bool {
        self.breakage.z_independent()
    }

    pub fn separable_collision(&self) -> bool {
        self.collision.is_separable()
    }
}

/// Quadrature route for a partial integral, bypassing any closed form.
pub fn partial_integral_quadrature(
    spec: &KernelSpec,
    a: f64,
    b: f64,
    y: f64,
    z: f64,
    weight: Weight,
) -> Result<f64> {
    quadrature_partial(spec.breakage.as_ref(), weight, a, b, y, z)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    CollisionSymmetry,
    CollisionNonnegative,
    MassIdentity,
    FragmentCount,
    Additivity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationEntry {
    pub property: Property,
    pub y: f64,
    pub z: f64,
    pub observed: f64,
    pub expected: f64,
    pub residual: f64,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub kernel: String,
    pub entries: Vec<ValidationEntry>,
}

impl ValidationReport {
    pub fn status(&self, property: Property) -> Status {
        self.entries
            .iter()
            .filter(|e| e.property == property)
            .map(|e| e.status)
            .fold(Status::Pass, |acc, s| match (acc, s) {
                (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
                (Status::Warn, _) | (_, Status::Warn) => Status::Warn,
                _ => Status::Pass,
            })
    }

    /// No entry failed (warnings allowed).
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.status != Status::Fail)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("kernel {}\n", self.kernel);
        for p in [
            Property::CollisionSymmetry,
            Property::CollisionNonnegative,
            Property::MassIdentity,
            Property::FragmentCount,
            Property::Additivity,
        ] {
            let worst = self
                .entries
                .iter()
                .filter(|e| e.property == p)
                .map(|e| e.residual.abs())
                .fold(0.0, f64::max);
            out.push_str(&format!(
                "  {:<22} {:<5} max residual {:.3e}\n",
                format!("{p:?}"),
                format!("{:?}", self.status(p)).to_lowercase(),
                worst
            ));
        }
        for e in self.entries.iter().filter(|e| e.status != Status::Pass) {
            out.push_str(&format!(
                "  {:?} at (y={:.6e}, z={:.6e}): observed {:.6e}, expected {:.6e}{}\n",
                e.property,
                e.y,
                e.z,
                e.observed,
                e.expected,
                e.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
            ));
        }
        out
    }
}

const MASS_REL_TOL: f64 = 1e-10;
const SYMMETRY_REL_TOL: f64 = 1e-14;
const ADDITIVITY_TOL: f64 = 1e-12;
const MIN_FRAGMENTS: f64 = 2.0;

fn entry(property: Property, y: f64, z: f64, observed: f64, expected: f64, ok: bool) -> ValidationEntry {
    ValidationEntry {
        property,
        y,
        z,
        observed,
        expected,
        residual: observed - expected,
        status: if ok { Status::Pass } else { Status::Fail },
        note: None,
    }
}

/// Checks symmetry and sign of `K`, the mass identity `∫ x β = y`, the
/// fragment count bound `ζ >= 2` (a warning, not a failure) and additivity of
/// the partial integrals at each sample `(y, z)`.
pub fn validate(spec: &KernelSpec, samples: &[(f64, f64)]) -> ValidationReport {
    let mut entries = Vec::new();
    for &(y, z) in samples {
        let kyz = spec.rate(y, z);
        let kzy = spec.rate(z, y);
        let scale = kyz.abs().max(kzy.abs()).max(f64::MIN_POSITIVE);
        entries.push(entry(
            Property::CollisionSymmetry,
            y,
            z,
            kyz,
            kzy,
            (kyz - kzy).abs() <= SYMMETRY_REL_TOL * scale,
        ));
        entries.push(entry(Property::CollisionNonnegative, y, z, kyz, 0.0, kyz >= 0.0));

        match spec.partial1(0.0, y, y, z) {
            Ok(m) => entries.push(entry(
                Property::MassIdentity,
                y,
                z,
                m,
                y,
                (m - y).abs() <= MASS_REL_TOL * y,
            )),
            Err(e) => entries.push(failed(Property::MassIdentity, y, z, e)),
        }

        match spec.fragment_count(y, z) {
            Ok(zeta) => {
                let mut e = entry(Property::FragmentCount, y, z, zeta, MIN_FRAGMENTS, zeta.is_finite());
                if e.status == Status::Pass && zeta < MIN_FRAGMENTS {
                    e.status = Status::Warn;
                    e.note = Some(format!("fragment count {zeta:.6} below 2"));
                }
                entries.push(e);
            }
            Err(e) => entries.push(failed(Property::FragmentCount, y, z, e)),
        }

        let split = 0.37 * y;
        let parts = spec
            .partial0(0.0, split, y, z)
            .and_then(|l| Ok(l + spec.partial0(split, y, y, z)?))
            .and_then(|s| Ok((s, spec.partial0(0.0, y, y, z)?)));
        match parts {
            Ok((sum, whole)) => entries.push(entry(
                Property::Additivity,
                y,
                z,
                sum,
                whole,
                (sum - whole).abs() <= ADDITIVITY_TOL * whole.abs().max(1.0),
            )),
            Err(e) => entries.push(failed(Property::Additivity, y, z, e)),
        }
    }
    ValidationReport {
        kernel: spec.name(),
        entries,
    }
}

fn failed(property: Property, y: f64, z: f64, e: Error) -> ValidationEntry {
    ValidationEntry {
        property,
        y,
        z,
        observed: f64::NAN,
        expected: f64::NAN,
        residual: f64::NAN,
        status: Status::Fail,
        note: Some(e.to_string()),
    }
}

/// `n` log-spaced sample pairs `(y, z)` over `[lo, hi]`, with `z` taken from
/// the reversed sequence.
pub fn log_spaced_samples(lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let ys: Vec<f64> = (0..n)
        .map(|i| {
            let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            (lo.ln() + t * (hi.ln() - lo.ln())).exp()
        })
        .collect();
    ys.iter().zip(ys.iter().rev()).map(|(&y, &z)| (y, z)).collect()
}

// ---------------------------------------------------------------------------
// Two-dimensional kernels
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Weight2 {
    One,
    X1,
    X2,
    X1X2,
}

impl Weight2 {
    fn apply(self, x1: f64, x2: f64) -> f64 {
        match self {
            Weight2::One => 1.0,
            Weight2::X1 => x1,
            Weight2::X2 => x2,
            Weight2::X1X2 => x1 * x2,
        }
    }
}

/// `β(x1, x2 | y1, y2; z1, z2) = coeff · f1(x1 | y1) · f2(x2 | y2)`.
#[derive(Clone, Debug)]
pub struct SeparableFactors {
    pub coeff: f64,
    pub axis1: Arc<dyn Breakage>,
    pub axis2: Arc<dyn Breakage>,
}

pub trait Breakage2D: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn density(&self, x: (f64, f64), y: (f64, f64), z: (f64, f64)) -> f64;

    /// Integral of `w · β` over `[a1, b1] x [a2, b2]` inside `[0, y1] x [0, y2]`.
    fn partial(
        &self,
        weight: Weight2,
        r1: (f64, f64),
        r2: (f64, f64),
        y: (f64, f64),
        z: (f64, f64),
    ) -> Result<f64> {
        check_interval(r1.0, r1.1, y.0)?;
        check_interval(r2.0, r2.1, y.1)?;
        quadrature::integrate_rect(
            |x1, x2| weight.apply(x1, x2) * self.density((x1, x2), y, z),
            (r1.0, r1.1.min(y.0)),
            (r2.0, r2.1.min(y.1)),
            Tolerance::default(),
        )
    }

    fn separable(&self) -> Option<SeparableFactors> {
        None
    }

    fn z_independent(&self) -> bool {
        false
    }
}

/// `β = coeff / (y1 y2)`: fragments uniform over the parent rectangle.
#[derive(Clone, Debug)]
pub struct UniformRect {
    pub coeff: f64,
    name: String,
}

impl UniformRect {
    pub fn new(coeff: f64) -> Self {
        UniformRect {
            coeff,
            name: format!("uniform_{coeff}_over_y1y2"),
        }
    }
}

impl Breakage2D for UniformRect {
    fn name(&self) -> &str {
        &self.name
    }

    fn density(&self, x: (f64, f64), y: (f64, f64), _z: (f64, f64)) -> f64 {
        if x.0 <= y.0 && x.1 <= y.1 {
            self.coeff / (y.0 * y.1)
        } else {
            0.0
        }
    }

    fn partial(
        &self,
        weight: Weight2,
        r1: (f64, f64),
        r2: (f64, f64),
        y: (f64, f64),
        _z: (f64, f64),
    ) -> Result<f64> {
        check_interval(r1.0, r1.1, y.0)?;
        check_interval(r2.0, r2.1, y.1)?;
        let len = |r: (f64, f64)| r.1 - r.0;
        let first = |r: (f64, f64)| 0.5 * (r.1 * r.1 - r.0 * r.0);
        let (f1, f2) = match weight {
            Weight2::One => (len(r1), len(r2)),
            Weight2::X1 => (first(r1), len(r2)),
            Weight2::X2 => (len(r1), first(r2)),
            Weight2::X1X2 => (first(r1), first(r2)),
        };
        Ok(self.coeff / (y.0 * y.1) * f1 * f2)
    }

    fn separable(&self) -> Option<SeparableFactors> {
        // coeff/(y1 y2) = (coeff/4) (2/y1) (2/y2)
        Some(SeparableFactors {
            coeff: self.coeff / 4.0,
            axis1: Arc::new(BinaryUniform),
            axis2: Arc::new(BinaryUniform),
        })
    }

    fn z_independent(&self) -> bool {
        true
    }
}

pub type RateFn2 = Arc<dyn Fn((f64, f64), (f64, f64)) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Collision2D {
    Constant(f64),
    /// `K = y1 y2 z1 z2`
    HypervolumeProduct,
    Custom { name: String, rate: RateFn2 },
}

impl Collision2D {
    #[inline]
    pub fn rate(&self, y: (f64, f64), z: (f64, f64)) -> f64 {
        match self {
            Collision2D::Constant(c) => *c,
            Collision2D::HypervolumeProduct => (y.0 * y.1) * (z.0 * z.1),
            Collision2D::Custom { rate, .. } => rate(y, z),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Collision2D::Constant(_) => "constant",
            Collision2D::HypervolumeProduct => "product_4d",
            Collision2D::Custom { name, .. } => name,
        }
    }
}

impl fmt::Debug for Collision2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct KernelSpec2D {
    pub collision: Collision2D,
    pub breakage: Arc<dyn Breakage2D>,
}

pub const COLLISION_NAMES_2D: [&str; 1] = ["product_4d"];
pub const BREAKAGE_NAMES_2D: [&str; 2] = ["uniform_4_over_y1y2", "uniform_2_over_y1y2"];

impl KernelSpec2D {
    pub fn builtin(collision: &str, breakage: &str) -> Result<Self> {
        let collision = match collision {
            "product_4d" => Collision2D::HypervolumeProduct,
            _ => return Err(Error::UnknownKernel(collision.to_string())),
        };
        let breakage: Arc<dyn Breakage2D> = match breakage {
            "uniform_4_over_y1y2" => Arc::new(UniformRect::new(4.0)),
            "uniform_2_over_y1y2" => Arc::new(UniformRect::new(2.0)),
            _ => return Err(Error::UnknownKernel(breakage.to_string())),
        };
        Ok(KernelSpec2D {
            collision,
            breakage,
        })
    }

    pub fn name(&self) -> String {
        format!("{}/{}", self.collision.name(), self.breakage.name())
    }

    #[inline]
    pub fn rate(&self, y: (f64, f64), z: (f64, f64)) -> f64 {
        self.collision.rate(y, z)
    }

    pub fn partial(
        &self,
        weight: Weight2,
        r1: (f64, f64),
        r2: (f64, f64),
        y: (f64, f64),
        z: (f64, f64),
    ) -> Result<f64> {
        self.breakage.partial(weight, r1, r2, y, z)
    }

    /// Integral of `w · β` over the whole parent rectangle.
    pub fn full(&self, weight: Weight2, y: (f64, f64), z: (f64, f64)) -> Result<f64> {
        self.partial(weight, (0.0, y.0), (0.0, y.1), y, z)
    }

    pub fn fragment_count(&self, y: (f64, f64), z: (f64, f64)) -> Result<f64> {
        self.full(Weight2::One, y, z)
    }
}
