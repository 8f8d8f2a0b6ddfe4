//! Volume average method on tensor-product 2D grids.
//!
//! State is stored row-major: entry `(i, j)` lives at `i * I2 + j`, where
//! `i` indexes the first property axis and `j` the second.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::{Collision, Collision2D, KernelSpec, KernelSpec2D, Weight2};
use crate::scheme1d::{axis_split, precompute_tables, BetaTable, BoundaryRule};

#[derive(Clone, Debug, PartialEq)]
pub struct Grid2D {
    pub axis1: Grid,
    pub axis2: Grid,
}

impl Grid2D {
    pub fn new(axis1: Grid, axis2: Grid) -> Self {
        Grid2D { axis1, axis2 }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.axis1.cells(), self.axis2.cells())
    }

    pub fn len(&self) -> usize {
        self.axis1.cells() * self.axis2.cells()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.axis2.cells() + j
    }

    pub fn pivot(&self, i: usize, j: usize) -> (f64, f64) {
        (self.axis1.pivots()[i], self.axis2.pivots()[j])
    }

    /// `Σ x1^r1 x2^r2 N`.
    pub fn moment(&self, state: &[f64], r1: i32, r2: i32) -> f64 {
        let (n1, n2) = self.shape();
        let mut m = 0.0;
        for i in 0..n1 {
            let a = self.axis1.pivots()[i].powi(r1);
            let row = &state[i * n2..(i + 1) * n2];
            let mut s = 0.0;
            for j in 0..n2 {
                s += self.axis2.pivots()[j].powi(r2) * row[j];
            }
            m += a * s;
        }
        m
    }

    /// Rows `i,j,x1,x2,N`.
    pub fn state_csv(&self, state: &[f64]) -> String {
        let (n1, n2) = self.shape();
        let mut out = String::from("i,j,x1,x2,N\n");
        for i in 0..n1 {
            for j in 0..n2 {
                let (a, b) = self.pivot(i, j);
                out.push_str(&format!(
                    "{i},{j},{},{},{}\n",
                    crate::fmt_f64(a),
                    crate::fmt_f64(b),
                    crate::fmt_f64(state[self.index(i, j)])
                ));
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
enum Layout {
    /// `coeff · T1(i, p) · T2(j, q)`
    Separable { coeff: f64, t1: BetaTable, t2: BetaTable },
    /// `[weight][((i·I1 + p)·I2 + j)·I2 + q]` for weights 1, x1, x2, x1·x2.
    Dense { data: [Vec<f64>; 4] },
}

/// Rectangle partial integrals of `β` with weights `1`, `x1`, `x2`.
#[derive(Clone, Debug)]
pub struct BetaTable2D {
    shape: (usize, usize),
    layout: Layout,
}

impl BetaTable2D {
    pub fn is_separable(&self) -> bool {
        matches!(self.layout, Layout::Separable { .. })
    }

    /// Integral of `w · β(· | x_p, x_q)` over the fragment rectangle of
    /// cell `(i, j)`.
    pub fn get(&self, weight: Weight2, i: usize, p: usize, j: usize, q: usize) -> f64 {
        let (n1, n2) = self.shape;
        match &self.layout {
            Layout::Separable { coeff, t1, t2 } => {
                let (a, b) = match weight {
                    Weight2::One => (t1.p0(i, p, 0), t2.p0(j, q, 0)),
                    Weight2::X1 => (t1.p1(i, p, 0), t2.p0(j, q, 0)),
                    Weight2::X2 => (t1.p0(i, p, 0), t2.p1(j, q, 0)),
                    Weight2::X1X2 => (t1.p1(i, p, 0), t2.p1(j, q, 0)),
                };
                coeff * a * b
            }
            Layout::Dense { data } => data[weight_slot(weight)][((i * n1 + p) * n2 + j) * n2 + q],
        }
    }
}

fn weight_slot(w: Weight2) -> usize {
    match w {
        Weight2::One => 0,
        Weight2::X1 => 1,
        Weight2::X2 => 2,
        Weight2::X1X2 => 3,
    }
}

fn upper_limit(g: &Grid, i: usize, p: usize) -> f64 {
    if i == p {
        g.pivots()[i]
    } else {
        g.upper(i)
    }
}

pub fn precompute_tables2d(grid: &Grid2D, kernel: &KernelSpec2D) -> Result<BetaTable2D> {
    let shape = grid.shape();
    if let Some(f) = kernel.breakage.separable() {
        if f.axis1.z_independent() && f.axis2.z_independent() {
            let unit = Collision::Constant(1.0);
            let t1 = precompute_tables(&grid.axis1, &KernelSpec::new(unit.clone(), Arc::clone(&f.axis1)))?;
            let t2 = precompute_tables(&grid.axis2, &KernelSpec::new(unit, Arc::clone(&f.axis2)))?;
            return Ok(BetaTable2D {
                shape,
                layout: Layout::Separable {
                    coeff: f.coeff,
                    t1,
                    t2,
                },
            });
        }
    }
    if !kernel.breakage.z_independent() {
        return Err(Error::Unsupported(
            "2D breakage functions that depend on the catalyst size".into(),
        ));
    }
    let (n1, n2) = shape;
    let (g1, g2) = (&grid.axis1, &grid.axis2);
    let size = n1 * n1 * n2 * n2;
    let mut data: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; size]);
    for i in 0..n1 {
        for p in i..n1 {
            let r1 = (g1.lower(i), upper_limit(g1, i, p));
            for j in 0..n2 {
                for q in j..n2 {
                    let r2 = (g2.lower(j), upper_limit(g2, j, q));
                    let y = grid.pivot(p, q);
                    let idx = ((i * n1 + p) * n2 + j) * n2 + q;
                    for w in [Weight2::One, Weight2::X1, Weight2::X2, Weight2::X1X2] {
                        data[weight_slot(w)][idx] =
                            kernel.partial(w, r1, r2, y, y).map_err(|e| Error::Table {
                                i: grid.index(i, j),
                                j: grid.index(p, q),
                                k: None,
                                source: Box::new(e),
                            })?;
                    }
                }
            }
        }
    }
    Ok(BetaTable2D {
        shape,
        layout: Layout::Dense { data },
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RateTerms2D {
    pub birth: Vec<f64>,
    pub death: Vec<f64>,
    pub flux1: Vec<f64>,
    pub flux2: Vec<f64>,
    pub vbar1: Vec<f64>,
    pub vbar2: Vec<f64>,
}

/// `w_{p,q} = Σ_{k,l} K(x_{p,q}, x_{k,l}) N_{k,l}`.
pub fn collision_weights2d(grid: &Grid2D, kernel: &KernelSpec2D, state: &[f64]) -> Vec<f64> {
    let (n1, n2) = grid.shape();
    match &kernel.collision {
        Collision2D::Constant(c) => vec![c * state.iter().sum::<f64>(); n1 * n2],
        Collision2D::HypervolumeProduct => {
            let m11 = grid.moment(state, 1, 1);
            let mut w = vec![0.0; n1 * n2];
            for i in 0..n1 {
                for j in 0..n2 {
                    let (a, b) = grid.pivot(i, j);
                    w[grid.index(i, j)] = (a * b) * m11;
                }
            }
            w
        }
        Collision2D::Custom { rate, .. } => {
            let mut w = vec![0.0; n1 * n2];
            for i in 0..n1 {
                for j in 0..n2 {
                    let y = grid.pivot(i, j);
                    let mut s = 0.0;
                    for k in 0..n1 {
                        for l in 0..n2 {
                            s += rate(y, grid.pivot(k, l)) * state[grid.index(k, l)];
                        }
                    }
                    w[grid.index(i, j)] = s;
                }
            }
            w
        }
    }
}

/// Sums `Σ_{p>=i, q>=j} T(i,p,j,q) S(p,q)` for one weight.
fn contract(table: &BetaTable2D, weight: Weight2, s: &[f64]) -> Vec<f64> {
    let (n1, n2) = table.shape;
    let mut out = vec![0.0; n1 * n2];
    match &table.layout {
        Layout::Separable { coeff, t1, t2 } => {
            let a1 = |i: usize, p: usize| match weight {
                Weight2::X1 | Weight2::X1X2 => t1.p1(i, p, 0),
                _ => t1.p0(i, p, 0),
            };
            let a2 = |j: usize, q: usize| match weight {
                Weight2::X2 | Weight2::X1X2 => t2.p1(j, q, 0),
                _ => t2.p0(j, q, 0),
            };
            // g(i, q) = Σ_{p>=i} a1(i,p) s(p,q)
            let mut g = vec![0.0; n1 * n2];
            for i in 0..n1 {
                let gi = &mut g[i * n2..(i + 1) * n2];
                for p in i..n1 {
                    let c = a1(i, p);
                    if c == 0.0 {
                        continue;
                    }
                    let sp = &s[p * n2..(p + 1) * n2];
                    for q in 0..n2 {
                        gi[q] += c * sp[q];
                    }
                }
            }
            for i in 0..n1 {
                let gi = &g[i * n2..(i + 1) * n2];
                for j in 0..n2 {
                    let mut v = 0.0;
                    for q in j..n2 {
                        v += a2(j, q) * gi[q];
                    }
                    out[i * n2 + j] = coeff * v;
                }
            }
        }
        Layout::Dense { data } => {
            let d = &data[weight_slot(weight)];
            for i in 0..n1 {
                for j in 0..n2 {
                    let mut v = 0.0;
                    for p in i..n1 {
                        for q in j..n2 {
                            v += d[((i * n1 + p) * n2 + j) * n2 + q] * s[p * n2 + q];
                        }
                    }
                    out[i * n2 + j] = v;
                }
            }
        }
    }
    out
}

pub fn rates2d(grid: &Grid2D, kernel: &KernelSpec2D, table: &BetaTable2D, state: &[f64]) -> Result<RateTerms2D> {
    let (n1, n2) = grid.shape();
    if state.len() != n1 * n2 {
        return Err(Error::Shape {
            expected: n1 * n2,
            got: state.len(),
        });
    }
    if table.shape != (n1, n2) {
        return Err(Error::Shape {
            expected: n1 * n2,
            got: table.shape.0 * table.shape.1,
        });
    }
    let w = collision_weights2d(grid, kernel, state);
    let death: Vec<f64> = w.iter().zip(state).map(|(w, n)| w * n).collect();
    let birth = contract(table, Weight2::One, &death);
    let flux1 = contract(table, Weight2::X1, &death);
    let flux2 = contract(table, Weight2::X2, &death);
    let mut vbar1 = vec![0.0; n1 * n2];
    let mut vbar2 = vec![0.0; n1 * n2];
    for i in 0..n1 {
        for j in 0..n2 {
            let k = grid.index(i, j);
            let (a, b) = grid.pivot(i, j);
            if birth[k] > 0.0 {
                vbar1[k] = (flux1[k] / birth[k]).clamp(grid.axis1.lower(i), grid.axis1.upper(i));
                vbar2[k] = (flux2[k] / birth[k]).clamp(grid.axis2.lower(j), grid.axis2.upper(j));
            } else {
                vbar1[k] = a;
                vbar2[k] = b;
            }
        }
    }
    Ok(RateTerms2D {
        birth,
        death,
        flux1,
        flux2,
        vbar1,
        vbar2,
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Allocation2D {
    pub births: Vec<f64>,
    pub leaked_number: f64,
}

/// Four-corner reallocation: the product of the per-axis three-point splits.
pub fn allocate2d(grid: &Grid2D, rates: &RateTerms2D, rule: BoundaryRule) -> Allocation2D {
    let (n1, n2) = grid.shape();
    let (x1, x2) = (grid.axis1.pivots(), grid.axis2.pivots());
    let mut births = vec![0.0; n1 * n2];
    let mut leaked = 0.0;
    for i in 0..n1 {
        for j in 0..n2 {
            let k = grid.index(i, j);
            let b = rates.birth[k];
            if b == 0.0 {
                continue;
            }
            let (l1, s1, r1) = axis_split(x1, i, rates.vbar1[k], rule);
            let (l2, s2, r2) = axis_split(x2, j, rates.vbar2[k], rule);
            for (di, f1) in [(-1isize, l1), (0, s1), (1, r1)] {
                if f1 == 0.0 {
                    continue;
                }
                for (dj, f2) in [(-1isize, l2), (0, s2), (1, r2)] {
                    if f2 == 0.0 {
                        continue;
                    }
                    let (ti, tj) = (i as isize + di, j as isize + dj);
                    if ti < 0 || tj < 0 {
                        leaked += f1 * f2 * b;
                    } else {
                        births[grid.index(ti as usize, tj as usize)] += f1 * f2 * b;
                    }
                }
            }
        }
    }
    Allocation2D {
        births,
        leaked_number: leaked,
    }
}

pub fn rhs_vam2d(
    grid: &Grid2D,
    kernel: &KernelSpec2D,
    table: &BetaTable2D,
    state: &[f64],
    rule: BoundaryRule,
) -> Result<(Vec<f64>, Allocation2D)> {
    let rates = rates2d(grid, kernel, table, state)?;
    let alloc = allocate2d(grid, &rates, rule);
    let d = alloc.births.iter().zip(&rates.death).map(|(b, d)| b - d).collect();
    Ok((d, alloc))
}

#[derive(Clone, Debug)]
pub struct Problem2D {
    pub grid: Grid2D,
    pub kernel: KernelSpec2D,
    pub rule: BoundaryRule,
    table: BetaTable2D,
}

impl Problem2D {
    pub fn new(grid: Grid2D, kernel: KernelSpec2D, rule: BoundaryRule) -> Result<Self> {
        let table = precompute_tables2d(&grid, &kernel)?;
        Ok(Problem2D {
            grid,
            kernel,
            rule,
            table,
        })
    }

    pub fn table(&self) -> &BetaTable2D {
        &self.table
    }

    pub fn rhs_with_leak(&self, state: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (d, a) = rhs_vam2d(&self.grid, &self.kernel, &self.table, state, self.rule)?;
        Ok((d, a.leaked_number))
    }
}

impl crate::integrator::OdeSystem for Problem2D {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()> {
        let (d, _) = self.rhs_with_leak(y)?;
        dydt.copy_from_slice(&d);
        Ok(())
    }

    fn stiffness(&self, y: &[f64]) -> f64 {
        collision_weights2d(&self.grid, &self.kernel, y)
            .into_iter()
            .fold(0.0, f64::max)
    }
}
