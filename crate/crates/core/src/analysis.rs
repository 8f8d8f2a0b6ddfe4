//! Moments, reference solutions, error norms and convergence studies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridKind, Segment};
use crate::integrator::{self, IntegratorConfig};
use crate::kernels::KernelSpec;
use crate::quadrature::{self, Tolerance};
use crate::scheme1d::{BoundaryRule, Problem1D, Scheme};

/// `M_r = Σ x_i^r N_i` for each requested order.
pub fn moments(grid: &Grid, state: &[f64], orders: &[i32]) -> Vec<f64> {
    orders
        .iter()
        .map(|&r| grid.pivots().iter().zip(state).map(|(x, n)| x.powi(r) * n).sum())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentError {
    pub value: f64,
    /// Set when the exact value is zero and `value` is an absolute error.
    pub absolute: bool,
}

pub fn relative_moment_error(exact: f64, numeric: f64) -> MomentError {
    if exact == 0.0 {
        MomentError {
            value: numeric.abs(),
            absolute: true,
        }
    } else {
        MomentError {
            value: ((exact - numeric) / exact).abs(),
            absolute: false,
        }
    }
}

/// Unit count in the last cell.
pub fn monodisperse_top_cell(grid: &Grid) -> Vec<f64> {
    let mut s = vec![0.0; grid.cells()];
    s[grid.cells() - 1] = 1.0;
    s
}

pub fn l1_error(numeric: &[f64], reference: &[f64]) -> Result<f64> {
    if numeric.len() != reference.len() {
        return Err(Error::Shape {
            expected: reference.len(),
            got: numeric.len(),
        });
    }
    Ok(numeric.iter().zip(reference).map(|(a, b)| (a - b).abs()).sum())
}

/// Experimental order of convergence between errors on `I` and `2I` cells.
pub fn eoc(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).ln() / std::f64::consts::LN_2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceId {
    /// `K = yz`, `β = 2/y`, unit Dirac at `a`.
    BinaryProduct,
    /// `K = 1`, `β = 4x²/y³`, unit Dirac at `a`.
    QuarticConstant,
}

impl ReferenceId {
    pub fn as_str(self) -> &'static str {
        match self {
            ReferenceId::BinaryProduct => "binary_product",
            ReferenceId::QuarticConstant => "quartic_constant",
        }
    }

    /// The reference matching a kernel, if there is one.
    pub fn for_kernel(kernel: &KernelSpec) -> Option<Self> {
        match kernel.name().as_str() {
            "product_xy/binary_2_over_y" => Some(ReferenceId::BinaryProduct),
            "constant_one/quartic_4x2_over_y3" => Some(ReferenceId::QuarticConstant),
            _ => None,
        }
    }
}

/// Where the exact solution's initial Dirac sits relative to the grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiracPlacement {
    /// On the pivot of the last cell, like the discrete initial condition.
    LastPivot,
    /// At `x_max`. The numerical Dirac still sits on the last pivot, so the
    /// error includes the offset between the two.
    #[default]
    RightBoundary,
}

/// Exact solution started from a unit Dirac mass at `a`.
///
/// The density is `w(t) δ(x - a) + g(x, t)` on `(0, a]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reference {
    pub id: ReferenceId,
    pub a: f64,
}

const SERIES_MAX_TERMS: usize = 2000;

impl Reference {
    pub fn new(id: ReferenceId, a: f64) -> Self {
        Reference { id, a }
    }

    /// Placed on the pivot of the last cell, where the discrete initial
    /// condition puts its mass.
    pub fn on_grid(id: ReferenceId, grid: &Grid) -> Self {
        Reference::new(id, grid.pivots()[grid.cells() - 1])
    }

    pub fn placed(id: ReferenceId, grid: &Grid, placement: DiracPlacement) -> Self {
        match placement {
            DiracPlacement::LastPivot => Reference::on_grid(id, grid),
            DiracPlacement::RightBoundary => Reference::new(id, grid.x_max()),
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let range = |reason: &str| {
            Err(Error::ReferenceRange {
                id: self.id.as_str().into(),
                t,
                reason: reason.into(),
            })
        };
        if !(t >= 0.0) || !t.is_finite() {
            return range("time must be finite and >= 0");
        }
        if self.id == ReferenceId::QuarticConstant && t >= 3.0 {
            return range("the number of particles blows up at t = 3");
        }
        Ok(())
    }

    /// Internal time `τ = ∫ M_0 dt` of the quartic case.
    fn tau(t: f64) -> f64 {
        3.0 * (3.0 / (3.0 - t)).ln()
    }

    /// Weight of the surviving Dirac mass at `a`.
    pub fn singular_weight(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match self.id {
            ReferenceId::BinaryProduct => (-self.a * self.a * t).exp(),
            ReferenceId::QuarticConstant => (-Self::tau(t)).exp(),
        })
    }

    /// Regular part `g(x, t)`; zero outside `(0, a]`.
    pub fn density(&self, x: f64, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let a = self.a;
        if !(x > 0.0 && x <= a) {
            return Ok(0.0);
        }
        Ok(match self.id {
            ReferenceId::BinaryProduct => {
                let s = a * t;
                (-x * s).exp() * (2.0 * s + s * s * (a - x))
            }
            ReferenceId::QuarticConstant => {
                let tau = Self::tau(t);
                if tau == 0.0 {
                    return Ok(0.0);
                }
                let u = x / a;
                let l = (a / x).ln();
                let z = 4.0 * tau;
                // Σ_{k>=1} z^k L^{k-1} / (k! (k-1)!)
                let mut term = z;
                let mut sum = term;
                for k in 1..SERIES_MAX_TERMS {
                    term *= z * l / ((k + 1) as f64 * k as f64);
                    sum += term;
                    if term <= 1e-17 * sum {
                        break;
                    }
                }
                (-tau).exp() * u * u * sum / a
            }
        })
    }

    /// `M_r(t)`; closed forms where available, quadrature otherwise.
    pub fn moment(&self, r: i32, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let a = self.a;
        match (self.id, r) {
            (ReferenceId::BinaryProduct, 0) => Ok(1.0 + a * a * t),
            (ReferenceId::BinaryProduct, 1) => Ok(a),
            (ReferenceId::QuarticConstant, _) => {
                let s = r as f64;
                Ok(a.powi(r) * (Self::tau(t) * (4.0 / (s + 3.0) - 1.0)).exp())
            }
            _ => self.moment_by_quadrature(r, t),
        }
    }

    /// `∫ x^r n dx` from the density itself.
    pub fn moment_by_quadrature(&self, r: i32, t: f64) -> Result<f64> {
        let regular = quadrature::integrate(
            |x| x.powi(r) * self.density(x, t).unwrap_or(f64::NAN),
            0.0,
            self.a,
            Tolerance::default(),
        )?;
        Ok(regular + self.a.powi(r) * self.singular_weight(t)?)
    }

    /// Cell integrals of the exact density, with the Dirac weight added to
    /// the cell holding `a`.
    pub fn project(&self, grid: &Grid, t: f64) -> Result<Vec<f64>> {
        self.check_time(t)?;
        let mut out = Vec::with_capacity(grid.cells());
        for i in 0..grid.cells() {
            let lo = grid.lower(i);
            let hi = grid.upper(i).min(self.a);
            if hi <= lo {
                out.push(0.0);
                continue;
            }
            let v = quadrature::integrate(
                |x| self.density(x, t).unwrap_or(f64::NAN),
                lo,
                hi,
                Tolerance::default(),
            )?;
            out.push(v);
        }
        let cell = grid.locate(self.a).ok_or_else(|| {
            Error::ReferenceUnavailable(format!("Dirac position {} outside the grid", self.a))
        })?;
        out[cell] += self.singular_weight(t)?;
        Ok(out)
    }
}

/// Exact moments for the two-dimensional cases, for a unit Dirac at
/// `(a1, a2)` with `K = x1 x2 y1 y2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference2DId {
    /// `β = 4/(y1 y2)`
    FourFragment,
    /// `β = 2/(y1 y2)`
    TwoFragment,
}

impl Reference2DId {
    pub fn as_str(self) -> &'static str {
        match self {
            Reference2DId::FourFragment => "four_fragment",
            Reference2DId::TwoFragment => "two_fragment",
        }
    }

    pub fn for_breakage(name: &str) -> Option<Self> {
        match name {
            "uniform_4_over_y1y2" => Some(Reference2DId::FourFragment),
            "uniform_2_over_y1y2" => Some(Reference2DId::TwoFragment),
            _ => None,
        }
    }
}

pub fn reference_moment_2d(id: Reference2DId, a: (f64, f64), r: (i32, i32), t: f64) -> Result<f64> {
    let h = a.0 * a.1;
    match (id, r) {
        (_, (0, 0)) if t == 0.0 => Ok(1.0),
        (Reference2DId::FourFragment, (1, 1)) => Ok(h),
        // dM00/dt = (ζ - 1) M11² with ζ = 4
        (Reference2DId::FourFragment, (0, 0)) => Ok(1.0 + 3.0 * h * h * t),
        (Reference2DId::TwoFragment, (1, 0)) => Ok(a.0),
        (Reference2DId::TwoFragment, (0, 1)) => Ok(a.1),
        _ => Err(Error::ReferenceUnavailable(format!(
            "{} has no closed form for M{}{}",
            id.as_str(),
            r.0,
            r.1
        ))),
    }
}

/// How each level of a convergence study is built from its cell count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFamily {
    pub kind: GridKind,
    pub x_min: f64,
    pub x_max: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_max_ratio")]
    pub max_ratio: f64,
}

fn default_max_ratio() -> f64 {
    4.0
}

/// Three uniform blocks over 20%, 30% and 50% of the domain holding 40%,
/// 30% and 30% of the cells.
pub fn default_segments(cells: usize) -> Vec<Segment> {
    if cells < 3 {
        return vec![Segment::new(1.0, cells)];
    }
    let c0 = ((0.4 * cells as f64).round() as usize).clamp(1, cells - 2);
    let c1 = ((0.3 * cells as f64).round() as usize).clamp(1, cells - c0 - 1);
    vec![
        Segment::new(0.2, c0),
        Segment::new(0.3, c1),
        Segment::new(0.5, cells - c0 - c1),
    ]
}

impl GridFamily {
    pub fn new(kind: GridKind, x_min: f64, x_max: f64) -> Self {
        GridFamily {
            kind,
            x_min,
            x_max,
            seed: None,
            max_ratio: default_max_ratio(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn build(&self, cells: usize) -> Result<Grid> {
        let (a, b) = (self.x_min, self.x_max);
        match self.kind {
            GridKind::Uniform => Grid::uniform(a, b, cells),
            GridKind::Geometric => Grid::geometric(a, b, cells),
            GridKind::LocallyUniform => Grid::locally_uniform(a, b, &default_segments(cells)),
            GridKind::Random => {
                let seed = self
                    .seed
                    .ok_or_else(|| Error::InvalidGrid("random grids need a seed".into()))?;
                Grid::random(a, b, cells, seed, self.max_ratio)
            }
            GridKind::Oscillatory => Grid::oscillatory(a, b, cells),
        }
    }

    /// Grid of refinement level `level`. Random grids are refined by
    /// repeated bisection of the base draw so the levels stay nested.
    pub fn level(&self, base_cells: usize, level: u32) -> Result<Grid> {
        match self.kind {
            GridKind::Random => {
                let mut g = self.build(base_cells)?;
                for _ in 0..level {
                    g = g.bisect();
                }
                Ok(g)
            }
            _ => self.build(base_cells << level),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    Exact,
    /// Same scheme on each level's grid with every cell split in three.
    Refined3x,
}

#[derive(Clone, Debug)]
pub struct EocStudy {
    pub scheme: Scheme,
    pub kernel: KernelSpec,
    pub family: GridFamily,
    pub base_cells: usize,
    pub doublings: u32,
    pub t_end: f64,
    pub integrator: IntegratorConfig,
    pub rule: BoundaryRule,
    pub placement: DiracPlacement,
    /// Use the refined self-reference even when an exact one exists.
    pub force_refined: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EocRow {
    pub cells: usize,
    pub l1_error: f64,
    pub eoc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EocReport {
    pub family: GridKind,
    pub scheme: Scheme,
    pub kernel: String,
    pub t_end: f64,
    pub reference: ReferenceKind,
    pub seed: Option<u64>,
    pub rows: Vec<EocRow>,
}

impl EocReport {
    pub fn final_eoc(&self) -> f64 {
        self.rows.last().map(|r| r.eoc).unwrap_or(0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("family,cells,l1_error,eoc\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.family,
                r.cells,
                crate::fmt_f64(r.l1_error),
                crate::fmt_f64(r.eoc)
            ));
        }
        out
    }
}

fn family_title(kind: GridKind) -> &'static str {
    match kind {
        GridKind::Uniform => "Uniform",
        GridKind::Geometric => "Nonuniform",
        GridKind::LocallyUniform => "Locally uniform",
        GridKind::Random => "Random",
        GridKind::Oscillatory => "Oscillatory",
    }
}

/// Side-by-side table: one row per level, an error and EOC column pair per
/// family. Rows are labelled with the cell count of the first report.
pub fn markdown_table(reports: &[EocReport]) -> String {
    let mut out = String::from("| Grids |");
    let mut rule = String::from("|---:|");
    for r in reports {
        let tag = if r.reference == ReferenceKind::Refined3x { "*" } else { "" };
        out.push_str(&format!(" {}{tag} L1 error | EOC |", family_title(r.family)));
        rule.push_str("---:|---:|");
    }
    out.push('\n');
    out.push_str(&rule);
    out.push('\n');
    let levels = reports.iter().map(|r| r.rows.len()).max().unwrap_or(0);
    for l in 0..levels {
        let cells = reports.first().and_then(|r| r.rows.get(l)).map(|r| r.cells).unwrap_or(0);
        out.push_str(&format!("| {cells} |"));
        for r in reports {
            match r.rows.get(l) {
                Some(row) => out.push_str(&format!(" {:.2e} | {:.2} |", row.l1_error, row.eoc)),
                None => out.push_str(" | |"),
            }
        }
        out.push('\n');
    }
    if reports.iter().any(|r| r.reference == ReferenceKind::Refined3x) {
        out.push_str("\n\\* error against the same scheme on the grid with every cell split in three\n");
    }
    out
}

/// Sums groups of `parts` consecutive cells.
pub fn restrict(fine: &[f64], parts: usize) -> Vec<f64> {
    fine.chunks(parts).map(|c| c.iter().sum()).collect()
}

/// Integrates the monodisperse problem on `grid` to `t_end`.
pub fn solve_monodisperse(
    grid: &Grid,
    kernel: &KernelSpec,
    scheme: Scheme,
    rule: BoundaryRule,
    config: &IntegratorConfig,
) -> Result<Vec<f64>> {
    solve_from(grid, kernel, scheme, rule, config, &monodisperse_top_cell(grid))
}

fn solve_from(
    grid: &Grid,
    kernel: &KernelSpec,
    scheme: Scheme,
    rule: BoundaryRule,
    config: &IntegratorConfig,
    initial: &[f64],
) -> Result<Vec<f64>> {
    let p = Problem1D::new(grid.clone(), kernel.clone(), scheme, rule)?;
    let series = integrator::integrate(&p, initial, config)?;
    Ok(series.last().to_vec())
}

impl EocStudy {
    fn reference_kind(&self) -> ReferenceKind {
        if !self.force_refined && ReferenceId::for_kernel(&self.kernel).is_some() {
            ReferenceKind::Exact
        } else {
            ReferenceKind::Refined3x
        }
    }

    fn level_error(&self, level: u32) -> Result<(usize, f64)> {
        let grid = self.family.level(self.base_cells, level)?;
        let cfg = IntegratorConfig {
            t_end: self.t_end,
            observe_every: None,
            ..self.integrator.clone()
        };
        let numeric = solve_monodisperse(&grid, &self.kernel, self.scheme, self.rule, &cfg)?;
        let reference = match (self.reference_kind(), ReferenceId::for_kernel(&self.kernel)) {
            (ReferenceKind::Exact, Some(id)) => Reference::placed(id, &grid, self.placement).project(&grid, self.t_end)?,
            _ => {
                // The middle third of the last cell keeps its pivot, so the
                // initial Dirac sits at the same size on both grids.
                let fine = grid.subdivide(3);
                let mut init = vec![0.0; fine.cells()];
                init[fine.cells() - 2] = 1.0;
                let sol = solve_from(&fine, &self.kernel, self.scheme, self.rule, &cfg, &init)?;
                restrict(&sol, 3)
            }
        };
        Ok((grid.cells(), l1_error(&numeric, &reference)?))
    }

    /// Runs every level, concurrently, and assembles the table.
    pub fn run(&self) -> Result<EocReport> {
        if self.doublings < 1 {
            return Err(Error::InvalidConfig("an EOC study needs at least one doubling".into()));
        }
        let results: Vec<Result<(usize, f64)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..=self.doublings)
                .map(|l| scope.spawn(move || self.level_error(l)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("EOC level panicked"))
                .collect()
        });
        let mut rows: Vec<EocRow> = Vec::new();
        for r in results {
            let (cells, l1) = r?;
            let e = rows.last().map(|p| eoc(p.l1_error, l1)).unwrap_or(0.0);
            rows.push(EocRow {
                cells,
                l1_error: l1,
                eoc: e,
            });
        }
        Ok(EocReport {
            family: self.family.kind,
            scheme: self.scheme,
            kernel: self.kernel.name(),
            t_end: self.t_end,
            reference: self.reference_kind(),
            seed: self.family.seed,
            rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_sums() {
        let g = Grid::uniform(0.0, 1.0, 4).unwrap();
        assert_eq!(moments(&g, &[1.0; 4], &[1])[0], 2.0);
        assert_eq!(moments(&g, &[0.0; 4], &[0, 1, 2, 3]), vec![0.0; 4]);
        let g = Grid::geometric(1e-9, 1.0, 30).unwrap();
        let m = moments(&g, &monodisperse_top_cell(&g), &[0, 1]);
        assert_eq!(m, vec![1.0, g.pivots()[29]]);
    }

    #[test]
    fn relative_errors() {
        assert_eq!(relative_moment_error(2.0, 2.0).value, 0.0);
        assert!((relative_moment_error(2.0, 1.9).value - 0.05).abs() < 1e-15);
        let e = relative_moment_error(0.0, 1e-3);
        assert!(e.absolute && e.value == 1e-3);
    }

    #[test]
    fn eoc_formula() {
        assert!((eoc(0.4, 0.2) - 1.0).abs() < 1e-15);
        assert!((eoc(0.4, 0.1) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_moments() {
        let r = Reference::new(ReferenceId::BinaryProduct, 1.0);
        assert_eq!(r.moment(0, 0.0).unwrap(), 1.0);
        assert_eq!(r.moment(0, 1.0).unwrap(), 2.0);
        let q = Reference::new(ReferenceId::QuarticConstant, 1.0);
        assert!((q.moment(0, 1.5).unwrap() - 2.0).abs() < 1e-14);
        assert!((q.moment(1, 1.2).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(q.moment(0, 3.0), Err(Error::ReferenceRange { .. })));
    }

    /// The moments of the closed-form density agree with the independent
    /// moment equations, for both examples and several placements.
    #[test]
    fn density_moment_oracle() {
        for a in [1.0, 0.9833333333333333, 0.7] {
            let r = Reference::new(ReferenceId::BinaryProduct, a);
            for t in [0.0, 0.5, 2.0, 10.0] {
                for s in [0, 1] {
                    let q = r.moment_by_quadrature(s, t).unwrap();
                    let e = r.moment(s, t).unwrap();
                    assert!((q - e).abs() <= 1e-11 * e, "5.1 a={a} t={t} M{s}: {q} vs {e}");
                }
            }
            let r = Reference::new(ReferenceId::QuarticConstant, a);
            for t in [0.0, 0.5, 1.0, 1.5, 2.5] {
                for s in [0, 1, 2, 3] {
                    let q = r.moment_by_quadrature(s, t).unwrap();
                    let e = r.moment(s, t).unwrap();
                    assert!((q - e).abs() <= 1e-10 * e, "5.2 a={a} t={t} M{s}: {q} vs {e}");
                }
            }
        }
    }

    /// Both densities satisfy their reduced linear breakage equations:
    /// the time derivative (central difference) matches the right-hand side.
    #[test]
    fn density_equation_residual() {
        let a = 0.95;
        let h = 1e-5;
        let tol = Tolerance::default();
        for (id, t) in [
            (ReferenceId::BinaryProduct, 0.7),
            (ReferenceId::BinaryProduct, 4.0),
            (ReferenceId::QuarticConstant, 0.4),
            (ReferenceId::QuarticConstant, 1.3),
        ] {
            let r = Reference::new(id, a);
            for x in [0.01, 0.2, 0.5, 0.9] {
                let dt = (r.density(x, t + h).unwrap() - r.density(x, t - h).unwrap()) / (2.0 * h);
                let g = |y: f64| r.density(y, t).unwrap();
                let w = r.singular_weight(t).unwrap();
                let rhs = match id {
                    // a [ ∫_x^a (2/y) y g dy + 2 w - x g ]
                    ReferenceId::BinaryProduct => {
                        let birth = quadrature::integrate(|y| 2.0 * g(y), x, a, tol).unwrap();
                        a * (birth + 2.0 * w - x * g(x))
                    }
                    // M0 [ ∫_x^a 4x²/y³ g dy + 4x²/a³ w - g ]
                    ReferenceId::QuarticConstant => {
                        let m0 = 3.0 / (3.0 - t);
                        let birth = quadrature::integrate(|y| 4.0 * x * x / (y * y * y) * g(y), x, a, tol).unwrap();
                        m0 * (birth + 4.0 * x * x / (a * a * a) * w - g(x))
                    }
                };
                assert!((dt - rhs).abs() <= 1e-6 * rhs.abs().max(1.0), "{id:?} t={t} x={x}: {dt} vs {rhs}");
            }
            let dw = (r.singular_weight(t + h).unwrap() - r.singular_weight(t - h).unwrap()) / (2.0 * h);
            let loss = match id {
                ReferenceId::BinaryProduct => a * a * r.singular_weight(t).unwrap(),
                ReferenceId::QuarticConstant => 3.0 / (3.0 - t) * r.singular_weight(t).unwrap(),
            };
            assert!((dw + loss).abs() < 1e-8);
        }
    }

    #[test]
    fn m0_ode_oracle_for_quartic() {
        // dM0/dt = (ζ - 1) M0² with ζ = 4/3, integrated with small RK4 steps.
        let mut m = 1.0;
        let h = 1e-4;
        for _ in 0..15000 {
            let f = |m: f64| m * m / 3.0;
            let k1 = f(m);
            let k2 = f(m + 0.5 * h * k1);
            let k3 = f(m + 0.5 * h * k2);
            let k4 = f(m + h * k3);
            m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let r = Reference::new(ReferenceId::QuarticConstant, 1.0);
        assert!((m - r.moment(0, 1.5).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn projection() {
        let g = Grid::uniform(0.0, 1.0, 16).unwrap();
        for id in [ReferenceId::BinaryProduct, ReferenceId::QuarticConstant] {
            let r = Reference::on_grid(id, &g);
            let p0 = r.project(&g, 0.0).unwrap();
            assert_eq!(p0, monodisperse_top_cell(&g));
            let p = r.project(&g, 1.2).unwrap();
            let total: f64 = p.iter().sum();
            let m0 = r.moment(0, 1.2).unwrap();
            assert!((total - m0).abs() <= 1e-11 * m0);
        }
    }

    #[test]
    fn reference_2d() {
        let a = (1.0, 1.0);
        assert_eq!(reference_moment_2d(Reference2DId::FourFragment, a, (0, 0), 1.0).unwrap(), 4.0);
        assert_eq!(reference_moment_2d(Reference2DId::FourFragment, a, (1, 1), 1.0).unwrap(), 1.0);
        assert!(reference_moment_2d(Reference2DId::TwoFragment, a, (0, 0), 1.0).is_err());
    }

    #[test]
    fn family_levels() {
        let f = GridFamily::new(GridKind::Random, 0.0, 1.0).with_seed(7);
        let base = f.level(30, 0).unwrap();
        let l2 = f.level(30, 2).unwrap();
        assert_eq!(l2.cells(), 120);
        assert!(l2.refines(&base));
        let lu = GridFamily::new(GridKind::LocallyUniform, 0.0, 1.0);
        assert_eq!(lu.level(30, 3).unwrap().cells(), 240);
        assert!(GridFamily::new(GridKind::Random, 0.0, 1.0).build(10).is_err());
    }

    #[test]
    fn restriction_sums_triples() {
        assert_eq!(restrict(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 3), vec![6.0, 15.0]);
    }

    #[test]
    fn single_doubling_has_two_rows() {
        let study = EocStudy {
            scheme: Scheme::Vam,
            kernel: KernelSpec::builtin("product_xy", "binary_2_over_y").unwrap(),
            family: GridFamily::new(GridKind::Uniform, 0.0, 1.0),
            base_cells: 8,
            doublings: 1,
            t_end: 0.5,
            integrator: IntegratorConfig::default(),
            rule: BoundaryRule::default(),
            placement: DiracPlacement::LastPivot,
            force_refined: false,
        };
        let r = study.run().unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].eoc, 0.0);
        assert_eq!(r.reference, ReferenceKind::Exact);
        assert!(markdown_table(&[r]).contains("| 16 |"));
    }

    #[test]
    fn refined_reference_starts_from_the_same_dirac() {
        let study = EocStudy {
            scheme: Scheme::Vam,
            kernel: KernelSpec::builtin("product_xy", "parabolic_12x").unwrap(),
            family: GridFamily::new(GridKind::Geometric, 1e-6, 1.0),
            base_cells: 6,
            doublings: 2,
            t_end: 0.0,
            integrator: IntegratorConfig::default(),
            rule: BoundaryRule::default(),
            placement: DiracPlacement::default(),
            force_refined: true,
        };
        let r = study.run().unwrap();
        assert_eq!(r.reference, ReferenceKind::Refined3x);
        assert!(r.rows.iter().all(|row| row.l1_error == 0.0));
    }

    #[test]
    fn boundary_placement_puts_dirac_at_x_max() {
        let g = Grid::uniform(0.0, 1.0, 4).unwrap();
        assert_eq!(Reference::placed(ReferenceId::BinaryProduct, &g, DiracPlacement::RightBoundary).a, 1.0);
        assert_eq!(Reference::placed(ReferenceId::BinaryProduct, &g, DiracPlacement::LastPivot).a, 0.875);
    }
}
