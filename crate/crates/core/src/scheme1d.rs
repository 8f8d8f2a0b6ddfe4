//! Semi-discrete right-hand sides on a 1D sectional grid.
//!
//! Three schemes share the same kernel tables: the plain midpoint scheme,
//! the volume average method (VAM), which moves each cell's newborn
//! particles onto the neighbouring pivots so that both number and the
//! cell's birth volume are preserved, and a fixed pivot (FPT) baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::{Collision, KernelSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Vam,
    Midpoint,
    Fpt,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Vam => "vam",
            Scheme::Midpoint => "midpoint",
            Scheme::Fpt => "fpt",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What to do with the part of a volume average that falls below the first
/// pivot, where there is no left neighbour.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRule {
    /// Split against a virtual pivot at size zero. Mass is kept exactly;
    /// the share sent to the virtual pivot is dropped as a number leak.
    #[default]
    ZeroVolumePivot,
    /// Give the whole birth to the first cell. Number is kept exactly and
    /// the mass gained is reported.
    Clamp,
}

/// Upper limit of the fragment interval of cell `i` for parent cell `j`.
#[inline]
fn upper_limit(grid: &Grid, i: usize, j: usize) -> f64 {
    if i == j {
        grid.pivots()[i]
    } else {
        grid.upper(i)
    }
}

/// Partial integrals of `β` and `x β` over each cell's fragment interval.
///
/// Indexed `(i, j)` for catalyst-independent breakage and `(i, j, k)`
/// otherwise; the latter costs `O(I³)` memory and time to build.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaTable {
    cells: usize,
    z_dependent: bool,
    p0: Vec<f64>,
    p1: Vec<f64>,
}

impl BetaTable {
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn is_z_dependent(&self) -> bool {
        self.z_dependent
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        if self.z_dependent {
            (i * self.cells + j) * self.cells + k
        } else {
            i * self.cells + j
        }
    }

    /// `k` is ignored for catalyst-independent tables.
    #[inline]
    pub fn p0(&self, i: usize, j: usize, k: usize) -> f64 {
        self.p0[self.index(i, j, k)]
    }

    #[inline]
    pub fn p1(&self, i: usize, j: usize, k: usize) -> f64 {
        self.p1[self.index(i, j, k)]
    }
}

fn table_err(i: usize, j: usize, k: Option<usize>) -> impl FnOnce(Error) -> Error {
    move |e| Error::Table {
        i,
        j,
        k,
        source: Box::new(e),
    }
}

pub fn precompute_tables(grid: &Grid, kernel: &KernelSpec) -> Result<BetaTable> {
    let n = grid.cells();
    let x = grid.pivots();
    let z_dependent = !kernel.z_independent();
    let kdim = if z_dependent { n } else { 1 };
    let mut p0 = vec![0.0; n * n * kdim];
    let mut p1 = vec![0.0; n * n * kdim];
    for i in 0..n {
        let a = grid.lower(i);
        for j in i..n {
            let b = upper_limit(grid, i, j);
            for k in 0..kdim {
                let z = x[k];
                let kk = z_dependent.then_some(k);
                let idx = (i * n + j) * kdim + k;
                p0[idx] = kernel.partial0(a, b, x[j], z).map_err(table_err(i, j, kk))?;
                p1[idx] = kernel.partial1(a, b, x[j], z).map_err(table_err(i, j, kk))?;
            }
        }
    }
    Ok(BetaTable {
        cells: n,
        z_dependent,
        p0,
        p1,
    })
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Shape { expected, got });
    }
    Ok(())
}

/// `w_j = Σ_k K(x_j, x_k) N_k`.
pub fn collision_weights(grid: &Grid, kernel: &KernelSpec, state: &[f64]) -> Vec<f64> {
    let x = grid.pivots();
    match &kernel.collision {
        Collision::Constant(c) => {
            let total: f64 = state.iter().sum();
            vec![c * total; x.len()]
        }
        Collision::Product => {
            let m1: f64 = x.iter().zip(state).map(|(x, n)| x * n).sum();
            x.iter().map(|xj| xj * m1).collect()
        }
        Collision::Custom { rate, .. } => x
            .iter()
            .map(|&xj| x.iter().zip(state).map(|(&xk, n)| rate(xj, xk) * n).sum())
            .collect(),
    }
}

/// Birth, death, volume flux and volume average per cell.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RateTerms {
    pub birth: Vec<f64>,
    pub death: Vec<f64>,
    pub flux: Vec<f64>,
    pub vbar: Vec<f64>,
}

pub fn birth_death_flux(
    grid: &Grid,
    kernel: &KernelSpec,
    table: &BetaTable,
    state: &[f64],
) -> Result<RateTerms> {
    let n = grid.cells();
    check_len(n, state.len())?;
    check_len(n, table.cells())?;
    let x = grid.pivots();
    let w = collision_weights(grid, kernel, state);
    let death: Vec<f64> = w.iter().zip(state).map(|(w, n)| w * n).collect();
    let mut birth = vec![0.0; n];
    let mut flux = vec![0.0; n];

    if table.is_z_dependent() {
        // s[j][k] = K(x_j, x_k) N_j N_k
        let mut s = vec![0.0; n * n];
        for j in 0..n {
            if state[j] == 0.0 {
                continue;
            }
            for k in 0..n {
                s[j * n + k] = kernel.rate(x[j], x[k]) * state[j] * state[k];
            }
        }
        for i in 0..n {
            let (mut b, mut v) = (0.0, 0.0);
            for j in i..n {
                let row = &s[j * n..(j + 1) * n];
                let base = (i * n + j) * n;
                let t0 = &table.p0[base..base + n];
                let t1 = &table.p1[base..base + n];
                for k in 0..n {
                    b += t0[k] * row[k];
                    v += t1[k] * row[k];
                }
            }
            birth[i] = b;
            flux[i] = v;
        }
    } else {
        for i in 0..n {
            let t0 = &table.p0[i * n..(i + 1) * n];
            let t1 = &table.p1[i * n..(i + 1) * n];
            let (mut b, mut v) = (0.0, 0.0);
            for j in i..n {
                b += t0[j] * death[j];
                v += t1[j] * death[j];
            }
            birth[i] = b;
            flux[i] = v;
        }
    }

    let vbar = (0..n)
        .map(|i| {
            if birth[i] > 0.0 {
                (flux[i] / birth[i]).clamp(grid.lower(i), grid.upper(i))
            } else {
                x[i]
            }
        })
        .collect();
    Ok(RateTerms {
        birth,
        death,
        flux,
        vbar,
    })
}

#[inline]
fn heaviside(s: f64) -> f64 {
    if s > 0.0 {
        1.0
    } else if s < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// `λ` weight of pivot `at` against its neighbour `other`, evaluated at `v`.
#[inline]
fn lambda(v: f64, at: f64, other: f64) -> f64 {
    (v - other) / (at - other)
}

/// Fractions of a unit birth with average `vbar` sent to pivots
/// `i - 1`, `i` and `i + 1`.
///
/// The left fraction at `i = 0` is the share of the virtual zero pivot
/// under [`BoundaryRule::ZeroVolumePivot`]; callers drop it.
pub fn axis_split(pivots: &[f64], i: usize, vbar: f64, rule: BoundaryRule) -> (f64, f64, f64) {
    let xi = pivots[i];
    let last = pivots.len() - 1;
    let below = heaviside(xi - vbar);
    let above = heaviside(vbar - xi);

    let (left, self_lo) = if i > 0 {
        let xl = pivots[i - 1];
        (lambda(vbar, xl, xi) * below, lambda(vbar, xi, xl) * below)
    } else {
        match rule {
            BoundaryRule::ZeroVolumePivot => (lambda(vbar, 0.0, xi) * below, lambda(vbar, xi, 0.0) * below),
            BoundaryRule::Clamp => (0.0, below),
        }
    };
    let (right, self_hi) = if i < last {
        let xr = pivots[i + 1];
        (lambda(vbar, xr, xi) * above, lambda(vbar, xi, xr) * above)
    } else {
        (0.0, above)
    };
    (left, self_lo + self_hi, right)
}

/// Births after reallocation, with what crossed the domain boundary.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Allocation {
    pub births: Vec<f64>,
    /// Number rate sent to the virtual zero pivot.
    pub leaked_number: f64,
    /// Mass rate created by clamping onto a boundary pivot.
    pub clamped_mass: f64,
}

pub fn allocate(grid: &Grid, rates: &RateTerms, rule: BoundaryRule) -> Allocation {
    let x = grid.pivots();
    let n = x.len();
    let mut births = vec![0.0; n];
    let mut leaked_number = 0.0;
    let mut clamped_mass = 0.0;
    for i in 0..n {
        let b = rates.birth[i];
        if b == 0.0 {
            continue;
        }
        let v = rates.vbar[i];
        let (l, s, r) = axis_split(x, i, v, rule);
        if i > 0 {
            births[i - 1] += l * b;
        } else {
            leaked_number += l * b;
            if rule == BoundaryRule::Clamp && v < x[0] {
                clamped_mass += (x[0] - v) * b;
            }
        }
        births[i] += s * b;
        if i + 1 < n {
            births[i + 1] += r * b;
        } else if v > x[i] {
            clamped_mass += (x[i] - v) * b;
        }
    }
    Allocation {
        births,
        leaked_number,
        clamped_mass,
    }
}

pub fn rhs_vam(
    grid: &Grid,
    kernel: &KernelSpec,
    table: &BetaTable,
    state: &[f64],
    rule: BoundaryRule,
) -> Result<(Vec<f64>, Allocation)> {
    let rates = birth_death_flux(grid, kernel, table, state)?;
    let alloc = allocate(grid, &rates, rule);
    let d = alloc
        .births
        .iter()
        .zip(&rates.death)
        .map(|(b, d)| b - d)
        .collect();
    Ok((d, alloc))
}

pub fn rhs_midpoint(grid: &Grid, kernel: &KernelSpec, table: &BetaTable, state: &[f64]) -> Result<Vec<f64>> {
    let rates = birth_death_flux(grid, kernel, table, state)?;
    Ok(rates.birth.iter().zip(&rates.death).map(|(b, d)| b - d).collect())
}

/// Fixed pivot coefficients: the number of fragments of a parent in cell
/// `j` credited to pivot `i`, each fragment split linearly between the two
/// pivots that bracket it. Below the first pivot the split is against a
/// virtual pivot at zero, which keeps mass.
#[derive(Clone, Debug, PartialEq)]
pub struct FptTable {
    cells: usize,
    z_dependent: bool,
    f: Vec<f64>,
}

impl FptTable {
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        if self.z_dependent {
            self.f[(i * self.cells + j) * self.cells + k]
        } else {
            self.f[i * self.cells + j]
        }
    }
}

pub fn precompute_fpt(grid: &Grid, kernel: &KernelSpec) -> Result<FptTable> {
    let n = grid.cells();
    let x = grid.pivots();
    let z_dependent = !kernel.z_independent();
    let kdim = if z_dependent { n } else { 1 };
    let mut f = vec![0.0; n * n * kdim];
    for i in 0..n {
        for j in i..n {
            let y = x[j];
            for k in 0..kdim {
                let z = x[k];
                let ctx = table_err(i, j, z_dependent.then_some(k));
                let ramp_up = if i > 0 {
                    let (c, d) = (x[i - 1], x[i]);
                    let q0 = kernel.partial0(c, d, y, z);
                    let q1 = kernel.partial1(c, d, y, z);
                    q0.and_then(|q0| Ok((q1? - c * q0) / (d - c)))
                } else {
                    kernel.partial1(grid.x_min(), x[0], y, z).map(|q1| q1 / x[0])
                };
                let ramp_down = if i < j {
                    let (c, d) = (x[i], x[i + 1]);
                    let q0 = kernel.partial0(c, d, y, z);
                    let q1 = kernel.partial1(c, d, y, z);
                    q0.and_then(|q0| Ok((d * q0 - q1?) / (d - c)))
                } else {
                    Ok(0.0)
                };
                let v = ramp_up.and_then(|u| Ok(u + ramp_down?)).map_err(ctx)?;
                f[(i * n + j) * kdim + k] = v;
            }
        }
    }
    Ok(FptTable {
        cells: n,
        z_dependent,
        f,
    })
}

pub fn rhs_fpt(grid: &Grid, kernel: &KernelSpec, table: &FptTable, state: &[f64]) -> Result<Vec<f64>> {
    let n = grid.cells();
    check_len(n, state.len())?;
    check_len(n, table.cells)?;
    let x = grid.pivots();
    let w = collision_weights(grid, kernel, state);
    let death: Vec<f64> = w.iter().zip(state).map(|(w, n)| w * n).collect();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut b = 0.0;
        if table.z_dependent {
            for j in i..n {
                if state[j] == 0.0 {
                    continue;
                }
                for k in 0..n {
                    b += table.get(i, j, k) * kernel.rate(x[j], x[k]) * state[j] * state[k];
                }
            }
        } else {
            for j in i..n {
                b += table.get(i, j, 0) * death[j];
            }
        }
        out[i] = b - death[i];
    }
    Ok(out)
}

/// Tables and settings for one scheme on one grid.
#[derive(Clone, Debug)]
pub struct Problem1D {
    pub grid: Grid,
    pub kernel: KernelSpec,
    pub scheme: Scheme,
    pub rule: BoundaryRule,
    beta: BetaTable,
    fpt: Option<FptTable>,
}

/// Boundary fluxes of one right-hand-side evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct BoundaryFlux {
    pub leaked_number: f64,
    pub clamped_mass: f64,
}

impl Problem1D {
    pub fn new(grid: Grid, kernel: KernelSpec, scheme: Scheme, rule: BoundaryRule) -> Result<Self> {
        let beta = precompute_tables(&grid, &kernel)?;
        let fpt = match scheme {
            Scheme::Fpt => Some(precompute_fpt(&grid, &kernel)?),
            _ => None,
        };
        Ok(Problem1D {
            grid,
            kernel,
            scheme,
            rule,
            beta,
            fpt,
        })
    }

    pub fn table(&self) -> &BetaTable {
        &self.beta
    }

    pub fn rates(&self, state: &[f64]) -> Result<RateTerms> {
        birth_death_flux(&self.grid, &self.kernel, &self.beta, state)
    }

    pub fn rhs_with_flux(&self, state: &[f64]) -> Result<(Vec<f64>, BoundaryFlux)> {
        match self.scheme {
            Scheme::Vam => {
                let (d, a) = rhs_vam(&self.grid, &self.kernel, &self.beta, state, self.rule)?;
                Ok((
                    d,
                    BoundaryFlux {
                        leaked_number: a.leaked_number,
                        clamped_mass: a.clamped_mass,
                    },
                ))
            }
            Scheme::Midpoint => Ok((
                rhs_midpoint(&self.grid, &self.kernel, &self.beta, state)?,
                BoundaryFlux::default(),
            )),
            Scheme::Fpt => {
                let t = self.fpt.as_ref().expect("fpt table built with the problem");
                Ok((rhs_fpt(&self.grid, &self.kernel, t, state)?, BoundaryFlux::default()))
            }
        }
    }

    /// Largest per-particle death rate, `max_i w_i`.
    pub fn max_death_rate(&self, state: &[f64]) -> f64 {
        collision_weights(&self.grid, &self.kernel, state)
            .into_iter()
            .fold(0.0, f64::max)
    }
}

impl crate::integrator::OdeSystem for Problem1D {
    fn dim(&self) -> usize {
        self.grid.cells()
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()> {
        let (d, _) = self.rhs_with_flux(y)?;
        dydt.copy_from_slice(&d);
        Ok(())
    }

    fn stiffness(&self, y: &[f64]) -> f64 {
        self.max_death_rate(y)
    }
}
