use std::fs;
use std::path::Path;

use collbreak::analysis::{markdown_table, moments, monodisperse_top_cell, EocStudy};
use collbreak::integrator::{integrate, OdeSystem};
use collbreak::kernels::{log_spaced_samples, validate, KernelSpec2D};
use collbreak::scheme2d::{Grid2D, Problem2D};
use collbreak::{fmt_f64, Grid, KernelSpec, ObservationSeries, Problem1D, Scheme};
use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, SchemeName};
use crate::error::CliError;

pub struct Outputs<'a> {
    pub dir: &'a Path,
    pub quiet: bool,
}

impl Outputs<'_> {
    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        fs::create_dir_all(self.dir).map_err(|source| CliError::Io {
            path: self.dir.display().to_string(),
            source,
        })?;
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable output");
        text.push('\n');
        self.write(name, &text)
    }

    fn say(&self, line: &str) {
        if !self.quiet {
            println!("{line}");
        }
    }
}

fn scheme_1d(s: SchemeName) -> Scheme {
    match s {
        SchemeName::Vam => Scheme::Vam,
        SchemeName::Midpoint => Scheme::Midpoint,
        SchemeName::Fpt => Scheme::Fpt,
        SchemeName::Vam2d => unreachable!("checked by RunConfig::check"),
    }
}

fn kernel_2d(name: &str) -> Result<KernelSpec2D, CliError> {
    let (c, b) = name
        .split_once('/')
        .ok_or_else(|| collbreak::Error::UnknownKernel(name.to_string()))?;
    Ok(KernelSpec2D::builtin(c, b)?)
}

/// Appends cumulative boundary totals to the state so they are integrated
/// with it: leaked number, clamped mass gained, clamped mass lost.
struct Tracked1D<'a>(&'a Problem1D);

impl OdeSystem for Tracked1D<'_> {
    fn dim(&self) -> usize {
        self.0.dim() + 3
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> collbreak::Result<()> {
        let n = self.0.dim();
        let (d, flux) = self.0.rhs_with_flux(&y[..n])?;
        dydt[..n].copy_from_slice(&d);
        dydt[n] = flux.leaked_number;
        dydt[n + 1] = flux.clamped_mass.max(0.0);
        dydt[n + 2] = (-flux.clamped_mass).max(0.0);
        Ok(())
    }

    fn stiffness(&self, y: &[f64]) -> f64 {
        self.0.stiffness(&y[..self.0.dim()])
    }
}

struct Tracked2D<'a>(&'a Problem2D);

impl OdeSystem for Tracked2D<'_> {
    fn dim(&self) -> usize {
        self.0.dim() + 1
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> collbreak::Result<()> {
        let n = self.0.dim();
        let (d, leak) = self.0.rhs_with_leak(&y[..n])?;
        dydt[..n].copy_from_slice(&d);
        dydt[n] = leak;
        Ok(())
    }

    fn stiffness(&self, y: &[f64]) -> f64 {
        self.0.stiffness(&y[..self.0.dim()])
    }
}

fn integration_summary(s: &ObservationSeries) -> serde_json::Value {
    json!({
        "steps": s.steps,
        "rejected_steps": s.rejected_steps,
        "fixed_dt": s.dt,
        "negativity_clip_events": s.clip_events,
        "negativity_clipped_total": s.clipped.last().copied().unwrap_or(0.0),
    })
}

fn relative_change(first: f64, last: f64) -> f64 {
    if first == 0.0 {
        last - first
    } else {
        (last - first) / first
    }
}

pub fn run(cfg: &RunConfig, out: &Outputs) -> Result<(), CliError> {
    cfg.check()?;
    if cfg.dimension == 2 {
        return run_2d(cfg, out);
    }
    let grid = cfg.grid.build("grid")?;
    let kernel = KernelSpec::from_name(&cfg.kernel)?;
    let problem = Problem1D::new(grid.clone(), kernel, scheme_1d(cfg.scheme), cfg.boundary_rule)?;
    let n = grid.cells();
    let mut y0 = monodisperse_top_cell(&grid);
    y0.extend([0.0; 3]);
    let series = integrate(&Tracked1D(&problem), &y0, &cfg.integrator)?;

    let mut m_csv = String::from("t,m0,m1,m2\n");
    let mut d_csv = String::from("t,cell,x,width,count,density\n");
    for (t, y) in series.times.iter().zip(&series.states) {
        let state = &y[..n];
        let m = moments(&grid, state, &[0, 1, 2]);
        m_csv.push_str(&format!("{},{},{},{}\n", fmt_f64(*t), fmt_f64(m[0]), fmt_f64(m[1]), fmt_f64(m[2])));
        for (i, &c) in state.iter().enumerate() {
            let w = grid.widths()[i];
            d_csv.push_str(&format!(
                "{},{i},{},{},{},{}\n",
                fmt_f64(*t),
                fmt_f64(grid.pivots()[i]),
                fmt_f64(w),
                fmt_f64(c),
                fmt_f64(c / w)
            ));
        }
    }

    let first = moments(&grid, &series.states[0][..n], &[0, 1]);
    let last_y = series.last();
    let last = moments(&grid, &last_y[..n], &[0, 1]);
    let diagnostics = json!({
        "dimension": 1,
        "scheme": cfg.scheme,
        "kernel": cfg.kernel,
        "boundary_rule": cfg.boundary_rule,
        "grid": {
            "kind": grid.kind(),
            "cells": n,
            "x_min": grid.x_min(),
            "x_max": grid.x_max(),
            "seed": grid.seed(),
            "width_ratio": grid.width_ratio(),
        },
        "t_end": cfg.integrator.t_end,
        "integration": integration_summary(&series),
        "number_initial": first[0],
        "number_final": last[0],
        "mass_initial": first[1],
        "mass_final": last[1],
        "relative_mass_drift": relative_change(first[1], last[1]),
        "boundary": {
            "leaked_number": last_y[n],
            "clamped_mass_gained": last_y[n + 1],
            "clamped_mass_lost": last_y[n + 2],
        },
    });
    out.write("moments.csv", &m_csv)?;
    out.write("density.csv", &d_csv)?;
    out.write_json("diagnostics.json", &diagnostics)?;
    out.say(&format!(
        "t = {}: M0 = {}, M1 = {}, relative mass drift {:.3e}",
        cfg.integrator.t_end,
        fmt_f64(last[0]),
        fmt_f64(last[1]),
        relative_change(first[1], last[1])
    ));
    out.say(&format!("wrote moments.csv, density.csv, diagnostics.json to {}", out.dir.display()));
    Ok(())
}

fn grid_2d(cfg: &RunConfig) -> Result<Grid2D, CliError> {
    let a1 = cfg.grid.build("grid")?;
    let a2 = match &cfg.grid2 {
        Some(g) => g.build("grid2")?,
        None => a1.clone(),
    };
    Ok(Grid2D::new(a1, a2))
}

fn run_2d(cfg: &RunConfig, out: &Outputs) -> Result<(), CliError> {
    let grid = grid_2d(cfg)?;
    let kernel = kernel_2d(&cfg.kernel)?;
    let problem = Problem2D::new(grid.clone(), kernel, cfg.boundary_rule)?;
    let n = grid.len();
    let mut y0 = vec![0.0; n + 1];
    y0[n - 1] = 1.0;
    let series = integrate(&Tracked2D(&problem), &y0, &cfg.integrator)?;

    let orders = [(0, 0), (1, 0), (0, 1), (1, 1)];
    let mut m_csv = String::from("t,m00,m10,m01,m11\n");
    let mut d_csv = String::from("t,i,j,x1,x2,count\n");
    let (n1, n2) = grid.shape();
    for (t, y) in series.times.iter().zip(&series.states) {
        let state = &y[..n];
        let m: Vec<String> = orders.iter().map(|&(a, b)| fmt_f64(grid.moment(state, a, b))).collect();
        m_csv.push_str(&format!("{},{}\n", fmt_f64(*t), m.join(",")));
        for i in 0..n1 {
            for j in 0..n2 {
                let (x1, x2) = grid.pivot(i, j);
                d_csv.push_str(&format!(
                    "{},{i},{j},{},{},{}\n",
                    fmt_f64(*t),
                    fmt_f64(x1),
                    fmt_f64(x2),
                    fmt_f64(state[grid.index(i, j)])
                ));
            }
        }
    }

    let moment_pair = |y: &[f64]| -> Vec<f64> { orders.iter().map(|&(a, b)| grid.moment(&y[..n], a, b)).collect() };
    let first = moment_pair(&series.states[0]);
    let last_y = series.last();
    let last = moment_pair(last_y);
    let diagnostics = json!({
        "dimension": 2,
        "scheme": cfg.scheme,
        "kernel": cfg.kernel,
        "boundary_rule": cfg.boundary_rule,
        "grid": {
            "shape": [n1, n2],
            "axis1": { "kind": grid.axis1.kind(), "x_min": grid.axis1.x_min(), "x_max": grid.axis1.x_max(), "seed": grid.axis1.seed() },
            "axis2": { "kind": grid.axis2.kind(), "x_min": grid.axis2.x_min(), "x_max": grid.axis2.x_max(), "seed": grid.axis2.seed() },
        },
        "t_end": cfg.integrator.t_end,
        "integration": integration_summary(&series),
        "moments_initial": { "m00": first[0], "m10": first[1], "m01": first[2], "m11": first[3] },
        "moments_final": { "m00": last[0], "m10": last[1], "m01": last[2], "m11": last[3] },
        "relative_drift": {
            "m10": relative_change(first[1], last[1]),
            "m01": relative_change(first[2], last[2]),
            "m11": relative_change(first[3], last[3]),
        },
        "boundary": { "leaked_number": last_y[n] },
    });
    out.write("moments.csv", &m_csv)?;
    out.write("density.csv", &d_csv)?;
    out.write_json("diagnostics.json", &diagnostics)?;
    out.say(&format!(
        "t = {}: M00 = {}, M10 = {}, M01 = {}, M11 = {}",
        cfg.integrator.t_end,
        fmt_f64(last[0]),
        fmt_f64(last[1]),
        fmt_f64(last[2]),
        fmt_f64(last[3])
    ));
    out.say(&format!("wrote moments.csv, density.csv, diagnostics.json to {}", out.dir.display()));
    Ok(())
}

pub fn eoc(cfg: &RunConfig, doublings: Option<u32>, seed: Option<u64>, out: &Outputs) -> Result<(), CliError> {
    cfg.check()?;
    if cfg.dimension != 1 {
        return Err(CliError::Config("EOC studies are one-dimensional".into()));
    }
    if cfg.grid.ratio.is_some() {
        return Err(CliError::Config("EOC studies fix the cell count; drop `ratio`".into()));
    }
    let kernel = KernelSpec::from_name(&cfg.kernel)?;
    let doublings = doublings.unwrap_or(cfg.eoc.doublings);
    if cfg.eoc.families.is_empty() {
        return Err(CliError::Config("eoc.families is empty".into()));
    }
    let mut reports = Vec::new();
    for &kind in &cfg.eoc.families {
        let mut family = cfg.grid.family();
        family.kind = kind;
        family.seed = if kind == collbreak::GridKind::Random {
            seed.or(cfg.grid.seed)
        } else {
            None
        };
        if kind == collbreak::GridKind::Random && family.seed.is_none() {
            return Err(CliError::Config("the random family needs a seed (grid.seed or --seed)".into()));
        }
        let study = EocStudy {
            scheme: scheme_1d(cfg.scheme),
            kernel: kernel.clone(),
            family,
            base_cells: cfg.grid.cells,
            doublings,
            t_end: cfg.integrator.t_end,
            integrator: cfg.integrator.clone(),
            rule: cfg.boundary_rule,
            placement: cfg.eoc.placement,
            force_refined: cfg.eoc.force_refined,
        };
        let report = study.run()?;
        out.say(&format!(
            "{kind}: final EOC {:.3}, L1 {:.3e} at {} cells",
            report.final_eoc(),
            report.rows.last().map(|r| r.l1_error).unwrap_or(0.0),
            report.rows.last().map(|r| r.cells).unwrap_or(0)
        ));
        reports.push(report);
    }
    let mut csv = String::from("family,cells,l1_error,eoc\n");
    for r in &reports {
        csv.push_str(r.to_csv().split_once('\n').map(|(_, body)| body).unwrap_or(""));
    }
    let md = format!(
        "L1 error and EOC, {} with {}, t = {}\n\n{}",
        cfg.scheme.as_str(),
        cfg.kernel,
        cfg.integrator.t_end,
        markdown_table(&reports)
    );
    out.write("eoc.csv", &csv)?;
    out.write("eoc.md", &md)?;
    out.say(&format!("wrote eoc.csv, eoc.md to {}", out.dir.display()));
    Ok(())
}

pub fn grid(cfg: &RunConfig, out: &Outputs) -> Result<(), CliError> {
    if cfg.dimension == 2 {
        let g = grid_2d(cfg)?;
        out.write_json("grid.json", &json!({ "axis1": g.axis1.to_record(), "axis2": g.axis2.to_record() }))?;
        let mut csv = String::from("axis,index,boundary\n");
        for (axis, grid) in [(1, &g.axis1), (2, &g.axis2)] {
            for (i, b) in grid.boundaries().iter().enumerate() {
                csv.push_str(&format!("{axis},{i},{}\n", fmt_f64(*b)));
            }
        }
        out.write("grid.csv", &csv)?;
        out.say(&format!("{} x {} cells", g.axis1.cells(), g.axis2.cells()));
    } else {
        let g: Grid = cfg.grid.build("grid")?;
        out.write_json("grid.json", &g.to_record())?;
        out.write("grid.csv", &g.to_csv())?;
        out.say(&format!("{} {} cells, width ratio {:.3}", g.kind(), g.cells(), g.width_ratio()));
    }
    out.say(&format!("wrote grid.json, grid.csv to {}", out.dir.display()));
    Ok(())
}

pub fn validate_kernel(name: &str, samples: usize, out: &Outputs) -> Result<(), CliError> {
    let kernel = KernelSpec::from_name(name)?;
    let report = validate(&kernel, &log_spaced_samples(1e-3, 1.0, samples));
    let text = report.to_text();
    out.write("validation.txt", &text)?;
    out.write_json("validation.json", &report)?;
    out.say(text.trim_end());
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Validation(name.to_string()))
    }
}
