use collbreak::analysis::*;
use collbreak::kernels::{KernelSpec2D, BREAKAGE_NAMES, COLLISION_NAMES};
use collbreak::scheme1d::{allocate, birth_death_flux, precompute_tables, rhs_vam, RateTerms};
use collbreak::scheme2d::{Grid2D, Problem2D};
use collbreak::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

const X_MIN: f64 = 1e-9;

fn verdict(criterion: &str, pass: bool, detail: &str) {
    println!("{} criterion {criterion}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn binary_product() -> KernelSpec {
    KernelSpec::builtin("product_xy", "binary_2_over_y").unwrap()
}

fn quartic_constant() -> KernelSpec {
    KernelSpec::builtin("constant_one", "quartic_4x2_over_y3").unwrap()
}

fn parabolic() -> KernelSpec {
    KernelSpec::builtin("product_xy", "parabolic_12x").unwrap()
}

fn family(kind: GridKind) -> GridFamily {
    GridFamily::new(kind, X_MIN, 1.0).with_seed(42)
}

fn all_families() -> [GridKind; 5] {
    [
        GridKind::Uniform,
        GridKind::Geometric,
        GridKind::LocallyUniform,
        GridKind::Random,
        GridKind::Oscillatory,
    ]
}

fn trajectory(grid: &Grid, kernel: &KernelSpec, scheme: Scheme, t_end: f64, every: f64) -> ObservationSeries {
    let p = Problem1D::new(grid.clone(), kernel.clone(), scheme, BoundaryRule::default()).unwrap();
    let cfg = IntegratorConfig {
        t_end,
        observe_every: Some(every),
        ..Default::default()
    };
    integrator::integrate(&p, &monodisperse_top_cell(grid), &cfg).unwrap()
}

fn study(kernel: KernelSpec, kind: GridKind) -> EocReport {
    EocStudy {
        scheme: Scheme::Vam,
        kernel,
        family: family(kind),
        base_cells: 30,
        doublings: 4,
        t_end: 1.0,
        integrator: IntegratorConfig::default(),
        rule: BoundaryRule::default(),
        placement: DiracPlacement::default(),
        force_refined: false,
    }
    .run()
    .unwrap()
}

fn eoc_list(r: &EocReport) -> String {
    r.rows
        .iter()
        .skip(1)
        .map(|row| format!("{:.2}", row.eoc))
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn criterion_01_mass_conservation() {
    for kind in all_families() {
        let start = Instant::now();
        let g = family(kind).build(30).unwrap();
        let s = trajectory(&g, &binary_product(), Scheme::Vam, 10.0, 0.5);
        let m0 = moments(&g, &s.states[0], &[1])[0];
        let worst = s
            .states
            .iter()
            .map(|st| ((moments(&g, st, &[1])[0] - m0) / m0).abs())
            .fold(0.0, f64::max);
        let secs = start.elapsed().as_secs_f64();
        verdict(
            "1",
            worst <= 1e-8 && secs < 10.0,
            &format!("{kind}: max relative mass drift {worst:.2e} in {secs:.2}s"),
        );
    }
}

fn max_m0_error(grid: &Grid, kernel: &KernelSpec, rule: BoundaryRule, t_end: f64, exact: impl Fn(f64) -> f64) -> f64 {
    let p = Problem1D::new(grid.clone(), kernel.clone(), Scheme::Vam, rule).unwrap();
    let cfg = IntegratorConfig {
        t_end,
        observe_every: Some(0.25),
        ..Default::default()
    };
    let s = integrator::integrate(&p, &monodisperse_top_cell(grid), &cfg).unwrap();
    s.times
        .iter()
        .zip(&s.states)
        .map(|(t, st)| (moments(grid, st, &[0])[0] - exact(*t)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn criterion_02_zeroth_moment() {
    let g = Grid::geometric(X_MIN, 1.0, 30).unwrap();
    let a = g.pivots()[g.cells() - 1];
    let e = max_m0_error(&g, &binary_product(), BoundaryRule::default(), 10.0, |t| 1.0 + a * a * t);
    verdict("2", e <= 1e-6, &format!("binary product geometric: max |M0 - (1 + a^2 t)| = {e:.2e}"));
    let e = max_m0_error(&g, &quartic_constant(), BoundaryRule::default(), 1.5, |t| 3.0 / (3.0 - t));
    verdict("2", e <= 1e-6, &format!("quartic constant geometric: max |M0 - 3/(3-t)| = {e:.2e}"));

    for kind in all_families() {
        let g = family(kind).build(30).unwrap();
        let a = g.pivots()[g.cells() - 1];
        for rule in [BoundaryRule::ZeroVolumePivot, BoundaryRule::Clamp] {
            let e = max_m0_error(&g, &binary_product(), rule, 10.0, |t| 1.0 + a * a * t);
            println!("INFO criterion 2: binary product {kind} with {rule:?}: max |M0 - (1 + a^2 t)| = {e:.2e}");
        }
    }
}

#[test]
fn criterion_03_midpoint_drifts() {
    let g = Grid::geometric(X_MIN, 1.0, 30).unwrap();
    let s = trajectory(&g, &binary_product(), Scheme::Midpoint, 1.0, 1.0);
    let m0 = moments(&g, &s.states[0], &[1])[0];
    let drift = ((moments(&g, s.last(), &[1])[0] - m0) / m0).abs();
    verdict("3", drift > 1e-4, &format!("midpoint relative mass drift at t = 1: {drift:.2e}"));
}

#[test]
fn criterion_04_nonnegativity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grids: Vec<Grid> = all_families().iter().map(|&k| family(k).build(12).unwrap()).collect();
    let mut kernels = Vec::new();
    for c in COLLISION_NAMES {
        for b in BREAKAGE_NAMES {
            kernels.push(KernelSpec::builtin(c, b).unwrap());
        }
    }
    let tables: Vec<Vec<_>> = grids
        .iter()
        .map(|g| kernels.iter().map(|k| precompute_tables(g, k).unwrap()).collect())
        .collect();
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let gi = rng.gen_range(0..grids.len());
        let ki = rng.gen_range(0..kernels.len());
        let g = &grids[gi];
        let mut state: Vec<f64> = (0..g.cells()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let i = rng.gen_range(0..g.cells());
        state[i] = 0.0;
        let (d, _) = rhs_vam(g, &kernels[ki], &tables[gi][ki], &state, BoundaryRule::default()).unwrap();
        worst = worst.min(d[i]);
    }
    verdict("4", worst >= 0.0, &format!("smallest zeroed-entry derivative over 1000 states: {worst:.3e}"));

    for kernel in [binary_product(), quartic_constant(), parabolic()] {
        for kind in all_families() {
            let g = family(kind).build(30).unwrap();
            let t_end = if kernel.name() == quartic_constant().name() { 1.5 } else { 10.0 };
            let p = Problem1D::new(g.clone(), kernel.clone(), Scheme::Vam, BoundaryRule::default()).unwrap();
            let cfg = IntegratorConfig {
                t_end,
                ..Default::default()
            };
            let run = integrator::integrate(&p, &monodisperse_top_cell(&g), &cfg);
            verdict(
                "4",
                run.is_ok(),
                &format!("{} on {kind} integrates to t = {t_end} without abort", kernel.name()),
            );
        }
    }
}

fn check_first_order(criterion: &str, name: &str, r: &EocReport, target: Option<f64>, tol: f64) {
    let e = r.final_eoc();
    let pass = match target {
        Some(t) => (e - t).abs() <= tol,
        None => (e - 1.0).abs() <= tol,
    };
    verdict(
        criterion,
        pass,
        &format!(
            "{name} {}: final EOC {e:.3} (target {:.2} +- {tol}), EOCs {}",
            r.family,
            target.unwrap_or(1.0),
            eoc_list(r)
        ),
    );
}

#[test]
fn criterion_05_first_order_eoc() {
    let start = Instant::now();
    for (name, kernel, geo, lu) in [("binary product", binary_product(), 1.06, 1.08), ("quartic constant", quartic_constant(), 0.89, 0.97)] {
        check_first_order("5", name, &study(kernel.clone(), GridKind::Uniform), None, 0.15);
        check_first_order("5", name, &study(kernel.clone(), GridKind::Geometric), Some(geo), 0.2);
        check_first_order("5", name, &study(kernel.clone(), GridKind::LocallyUniform), Some(lu), 0.2);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict("5", secs < 300.0, &format!("uniform, geometric and locally uniform studies took {secs:.1}s"));
}

#[test]
fn criterion_05_first_order_eoc_random() {
    for (name, kernel) in [("binary product", binary_product()), ("quartic constant", quartic_constant())] {
        let r = study(kernel, GridKind::Random);
        let e: Vec<f64> = r.rows.iter().skip(1).map(|row| row.eoc).collect();
        let in_band = e.iter().all(|v| (0.55..=1.1).contains(v));
        let increasing = e.windows(2).all(|w| w[1] > w[0]);
        verdict(
            "5",
            in_band && increasing,
            &format!(
                "{name} random (seed 42): EOCs {} (band [0.55, 1.1]: {in_band}, increasing: {increasing})",
                eoc_list(&r)
            ),
        );
    }
}

#[test]
fn criterion_06_second_order_eoc() {
    for kind in [GridKind::Uniform, GridKind::Geometric, GridKind::LocallyUniform] {
        let r = study(parabolic(), kind);
        let e = r.final_eoc();
        verdict(
            "6",
            e >= 1.8,
            &format!("parabolic {kind}: final EOC {e:.3} (>= 1.8), EOCs {}", eoc_list(&r)),
        );
    }
}

#[test]
fn criterion_06_second_order_eoc_random() {
    let r = study(parabolic(), GridKind::Random);
    let e = r.final_eoc();
    verdict(
        "6",
        (0.8..=1.3).contains(&e),
        &format!("parabolic random (seed 42): final EOC {e:.3} (band [0.8, 1.3]), EOCs {}", eoc_list(&r)),
    );
}

#[test]
fn criterion_07_l1_magnitude() {
    let g = Grid::uniform(X_MIN, 1.0, 480).unwrap();
    let reference = Reference::placed(ReferenceId::BinaryProduct, &g, DiracPlacement::RightBoundary);
    for r in 0..3 {
        let closed = reference.moment(r, 1.0).unwrap();
        let quad = reference.moment_by_quadrature(r, 1.0).unwrap();
        verdict(
            "7",
            ((closed - quad) / closed).abs() < 1e-10,
            &format!("reference density moment {r}: closed form {closed:.12} vs quadrature {quad:.12}"),
        );
    }
    let r = study(binary_product(), GridKind::Uniform);
    let l1 = r.rows.last().unwrap().l1_error;
    let ratio = l1 / 2.05e-3;
    verdict(
        "7",
        (0.5..=2.0).contains(&ratio),
        &format!("binary product uniform 480 cells: L1 {l1:.3e}, {ratio:.2} x 2.05e-3"),
    );
}

#[test]
fn criterion_08_moment_errors() {
    let target_m2 = [8.46e-2, 1.37e-1, 1.28e-1, 5.88e-2, 4.49e-2];
    let g = Grid::geometric_with_ratio(X_MIN, 1.0, 1.4).unwrap();
    let s = trajectory(&g, &binary_product(), Scheme::Vam, 10.0, 2.0);
    let on_pivot = Reference::placed(ReferenceId::BinaryProduct, &g, DiracPlacement::LastPivot);
    let at_boundary = Reference::placed(ReferenceId::BinaryProduct, &g, DiracPlacement::RightBoundary);
    for ((t, st), paper) in s.times.iter().zip(&s.states).skip(1).zip(target_m2) {
        let m = moments(&g, st, &[0, 1, 2]);
        let e0 = relative_moment_error(on_pivot.moment(0, *t).unwrap(), m[0]).value;
        let e1 = relative_moment_error(on_pivot.moment(1, *t).unwrap(), m[1]).value;
        let e2 = relative_moment_error(at_boundary.moment(2, *t).unwrap(), m[2]).value;
        let e2_pivot = relative_moment_error(on_pivot.moment(2, *t).unwrap(), m[2]).value;
        let ratio = e2 / paper;
        verdict(
            "8",
            e0 <= 1e-6 && e1 <= 1e-6 && (1.0 / 3.0..=3.0).contains(&ratio),
            &format!(
                "t = {t}: E_M0 {e0:.2e}, E_M1 {e1:.2e}, E_M2 {e2:.2e} ({ratio:.2} x target; {e2_pivot:.2e} against the pivot-placed Dirac)"
            ),
        );
    }
}

#[test]
fn criterion_09_two_dimensional() {
    let start = Instant::now();
    let axis = Grid::geometric(X_MIN, 1.0, 20).unwrap();
    let grid = Grid2D::new(axis.clone(), axis);
    let mut init = vec![0.0; grid.len()];
    init[grid.len() - 1] = 1.0;
    let cfg = IntegratorConfig {
        t_end: 1.0,
        observe_every: Some(0.1),
        ..Default::default()
    };
    let m = |st: &[f64], r1, r2| grid.moment(st, r1, r2);

    let k = KernelSpec2D::builtin("product_4d", "uniform_2_over_y1y2").unwrap();
    let p = Problem2D::new(grid.clone(), k, BoundaryRule::default()).unwrap();
    let s = integrator::integrate(&p, &init, &cfg).unwrap();
    let (m10, m01) = (m(&s.states[0], 1, 0), m(&s.states[0], 0, 1));
    let worst = s
        .states
        .iter()
        .map(|st| ((m(st, 1, 0) / m10 - 1.0).abs()).max((m(st, 0, 1) / m01 - 1.0).abs()))
        .fold(0.0, f64::max);
    verdict("9", worst <= 1e-8, &format!("two-fragment case: max |M10 - 1|, |M01 - 1| relative to t = 0: {worst:.2e}"));

    let k = KernelSpec2D::builtin("product_4d", "uniform_4_over_y1y2").unwrap();
    let p = Problem2D::new(grid.clone(), k, BoundaryRule::default()).unwrap();
    let s = integrator::integrate(&p, &init, &cfg).unwrap();
    let a = grid.pivot(grid.shape().0 - 1, grid.shape().1 - 1);
    let m11 = m(&s.states[0], 1, 1);
    let mut worst11: f64 = 0.0;
    let mut worst00: f64 = 0.0;
    for (t, st) in s.times.iter().zip(&s.states) {
        worst11 = worst11.max((m(st, 1, 1) / m11 - 1.0).abs());
        let exact = reference_moment_2d(Reference2DId::FourFragment, a, (0, 0), *t).unwrap();
        worst00 = worst00.max(((m(st, 0, 0) - exact) / exact).abs());
    }
    verdict("9", worst11 <= 1e-2, &format!("four-fragment case: max |M11 - 1| relative to t = 0: {worst11:.2e}"));
    verdict("9", worst00 <= 1e-2, &format!("four-fragment case: max relative M00 error against 1 + 3 (a1 a2)^2 t: {worst00:.2e}"));
    let secs = start.elapsed().as_secs_f64();
    verdict("9", secs < 120.0, &format!("2D runs took {secs:.1}s"));
}

/// Direct triple loop over source, catalyst and target cells.
fn naive_rates(grid: &Grid, kernel: &KernelSpec, state: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let x = grid.pivots();
    let n = x.len();
    let (mut b, mut d, mut v) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        for j in i..n {
            let hi = if i == j { x[i] } else { grid.upper(i) };
            for k in 0..n {
                let s = kernel.rate(x[j], x[k]) * state[j] * state[k];
                b[i] += s * kernel.partial0(grid.lower(i), hi, x[j], x[k]).unwrap();
                v[i] += s * kernel.partial1(grid.lower(i), hi, x[j], x[k]).unwrap();
            }
        }
        for k in 0..n {
            d[i] += kernel.rate(x[i], x[k]) * state[i] * state[k];
        }
    }
    (b, d, v)
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[test]
fn criterion_10_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for c in COLLISION_NAMES {
        for b in BREAKAGE_NAMES {
            let kernel = KernelSpec::builtin(c, b).unwrap();
            for _ in 0..100 {
                let grid = Grid::random(0.0, rng.gen_range(0.5..2.0), 10, rng.gen(), 4.0).unwrap();
                let state: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..1.0)).collect();
                let table = precompute_tables(&grid, &kernel).unwrap();
                let fast = birth_death_flux(&grid, &kernel, &table, &state).unwrap();
                let (nb, nd, nv) = naive_rates(&grid, &kernel, &state);
                for i in 0..10 {
                    worst = worst.max(rel(fast.birth[i], nb[i]));
                    worst = worst.max(rel(fast.death[i], nd[i]));
                    worst = worst.max(rel(fast.flux[i], nv[i]));
                }
            }
        }
    }
    verdict("10", worst <= 1e-13, &format!("factorized vs triple loop, worst relative difference {worst:.2e}"));

    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let grid = Grid::random(0.0, 1.0, 8, rng.gen(), 4.0).unwrap();
        let x = grid.pivots();
        let i = rng.gen_range(1..7);
        let vbar = rng.gen_range(grid.lower(i)..grid.upper(i));
        let birth = rng.gen_range(0.1..2.0);
        let mut rates = RateTerms {
            birth: vec![0.0; 8],
            death: vec![0.0; 8],
            flux: vec![0.0; 8],
            vbar: x.to_vec(),
        };
        rates.birth[i] = birth;
        rates.flux[i] = birth * vbar;
        rates.vbar[i] = vbar;
        let got = allocate(&grid, &rates, BoundaryRule::default()).births;
        // a + b = B, a x_n + b x_i = B vbar
        let n = if vbar < x[i] { i - 1 } else { i + 1 };
        let det = x[i] - x[n];
        let to_n = birth * (x[i] - vbar) / det;
        let to_i = birth * (vbar - x[n]) / det;
        for (c, &g) in got.iter().enumerate() {
            let want = if c == i {
                to_i
            } else if c == n {
                to_n
            } else {
                0.0
            };
            worst = worst.max((g - want).abs() / birth);
        }
    }
    verdict("10", worst <= 1e-14, &format!("allocate vs direct 2x2 solve, worst difference {worst:.2e}"));
}
