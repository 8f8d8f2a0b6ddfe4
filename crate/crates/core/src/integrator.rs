//! Explicit Runge–Kutta time stepping with a nonnegativity guard.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An autonomous-or-not system `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()>;

    /// Largest loss rate per unit of `y`, used for the default fixed step.
    fn stiffness(&self, _y: &[f64]) -> f64 {
        0.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4Fixed,
    #[default]
    Rk45Adaptive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step for rk4; `None` picks `0.5 / stiffness(y0)`.
    pub dt: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
    pub t_end: f64,
    /// Observation spacing; `None` observes only `0` and `t_end`.
    pub observe_every: Option<f64>,
    /// Negative entries above `-nonneg_clip · |y|₁` are zeroed after a step.
    pub nonneg_clip: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk45Adaptive,
            dt: None,
            rtol: 1e-8,
            atol: 1e-12,
            t_end: 1.0,
            observe_every: None,
            nonneg_clip: 1e-12,
            max_steps: 10_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be finite and >= 0");
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad("dt must be positive");
            }
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("tolerances must be positive");
        }
        if let Some(o) = self.observe_every {
            if !(o > 0.0 && o.is_finite()) {
                return bad("observe_every must be positive");
            }
        }
        if !(self.nonneg_clip >= 0.0) {
            return bad("nonneg_clip must be >= 0");
        }
        Ok(())
    }

    /// `0, h, 2h, ...` up to and including `t_end`.
    pub fn observation_times(&self) -> Vec<f64> {
        let mut times = vec![0.0];
        if self.t_end == 0.0 {
            return times;
        }
        if let Some(h) = self.observe_every {
            let n = (self.t_end / h * (1.0 + 1e-12)).floor() as usize;
            for k in 1..=n {
                let t = k as f64 * h;
                if t < self.t_end * (1.0 - 1e-12) {
                    times.push(t);
                }
            }
        }
        times.push(self.t_end);
        times
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ObservationSeries {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Cumulative magnitude of clipped negative entries at each observation.
    pub clipped: Vec<f64>,
    pub clip_events: usize,
    pub steps: usize,
    pub rejected_steps: usize,
    /// Fixed step actually used by rk4.
    pub dt: Option<f64>,
}

impl ObservationSeries {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("series holds the initial state")
    }
}

struct Guard {
    clip: f64,
    clipped: f64,
    events: usize,
}

impl Guard {
    /// Returns whether anything was clipped.
    fn apply(&mut self, t: f64, y: &mut [f64]) -> Result<bool> {
        let norm: f64 = y.iter().map(|v| v.abs()).sum();
        let threshold = self.clip * norm;
        let mut touched = false;
        for (index, v) in y.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { t, index });
            }
            if *v < 0.0 {
                if -*v <= threshold {
                    self.clipped += -*v;
                    self.events += 1;
                    *v = 0.0;
                    touched = true;
                } else {
                    return Err(Error::Negativity {
                        t,
                        index,
                        value: *v,
                        threshold,
                    });
                }
            }
        }
        Ok(touched)
    }
}

pub fn integrate<S: OdeSystem + ?Sized>(
    system: &S,
    y0: &[f64],
    config: &IntegratorConfig,
) -> Result<ObservationSeries> {
    config.validate()?;
    if y0.len() != system.dim() {
        return Err(Error::Shape {
            expected: system.dim(),
            got: y0.len(),
        });
    }
    if let Some((index, &value)) = y0.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::Negativity {
            t: 0.0,
            index,
            value,
            threshold: 0.0,
        });
    }
    match config.method {
        Method::Rk4Fixed => rk4(system, y0, config),
        Method::Rk45Adaptive => rk45(system, y0, config),
    }
}

fn axpy(out: &mut [f64], y: &[f64], h: f64, terms: &[(&[f64], f64)]) {
    for i in 0..y.len() {
        let mut s = 0.0;
        for (k, c) in terms {
            s += c * k[i];
        }
        out[i] = y[i] + h * s;
    }
}

fn rk4<S: OdeSystem + ?Sized>(system: &S, y0: &[f64], config: &IntegratorConfig) -> Result<ObservationSeries> {
    let n = y0.len();
    let dt = match config.dt {
        Some(dt) => dt,
        None => {
            let s = system.stiffness(y0);
            if s > 0.0 {
                0.5 / s
            } else {
                config.t_end.max(f64::MIN_POSITIVE)
            }
        }
    };
    let times = config.observation_times();
    let mut guard = Guard {
        clip: config.nonneg_clip,
        clipped: 0.0,
        events: 0,
    };
    let mut series = ObservationSeries {
        dt: Some(dt),
        ..Default::default()
    };
    let mut y = y0.to_vec();
    series.times.push(0.0);
    series.states.push(y.clone());
    series.clipped.push(0.0);

    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let m = ((t1 - t0) / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = (t1 - t0) / m as f64;
        for s in 0..m {
            let t = t0 + s as f64 * h;
            system.rhs(t, &y, &mut k1)?;
            axpy(&mut tmp, &y, 0.5 * h, &[(&k1, 1.0)]);
            system.rhs(t + 0.5 * h, &tmp, &mut k2)?;
            axpy(&mut tmp, &y, 0.5 * h, &[(&k2, 1.0)]);
            system.rhs(t + 0.5 * h, &tmp, &mut k3)?;
            axpy(&mut tmp, &y, h, &[(&k3, 1.0)]);
            system.rhs(t + h, &tmp, &mut k4)?;
            axpy(
                &mut tmp,
                &y,
                h / 6.0,
                &[(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)],
            );
            std::mem::swap(&mut y, &mut tmp);
            series.steps += 1;
            if series.steps > config.max_steps {
                return Err(Error::InvalidConfig(format!("exceeded max_steps = {}", config.max_steps)));
            }
            guard.apply(t + h, &mut y)?;
        }
        series.times.push(t1);
        series.states.push(y.clone());
        series.clipped.push(guard.clipped);
    }
    series.clip_events = guard.events;
    Ok(series)
}

// Dormand–Prince 5(4) coefficients.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B5: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
// Difference between the 5th and 4th order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn rk45<S: OdeSystem + ?Sized>(system: &S, y0: &[f64], config: &IntegratorConfig) -> Result<ObservationSeries> {
    let n = y0.len();
    let times = config.observation_times();
    let mut guard = Guard {
        clip: config.nonneg_clip,
        clipped: 0.0,
        events: 0,
    };
    let mut series = ObservationSeries::default();
    let mut y = y0.to_vec();
    series.times.push(0.0);
    series.states.push(y.clone());
    series.clipped.push(0.0);
    if config.t_end == 0.0 {
        return Ok(series);
    }

    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; n]).collect();
    let mut stage = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut t = 0.0;
    system.rhs(t, &y, &mut k[0])?;
    let mut h = initial_step(&y, &k[0], config);

    for &t_obs in &times[1..] {
        while t < t_obs {
            let last = h >= t_obs - t;
            let hs = if last { t_obs - t } else { h };
            if hs <= 1e-14 * t.abs().max(1.0) && !last {
                return Err(Error::StepUnderflow { t, h: hs });
            }
            let rows: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
            for (s, a) in rows.iter().enumerate() {
                let terms: Vec<(&[f64], f64)> = a.iter().enumerate().map(|(m, &c)| (k[m].as_slice(), c)).collect();
                axpy(&mut stage, &y, hs, &terms);
                let (_, rest) = k.split_at_mut(s + 1);
                system.rhs(t + C[s + 1] * hs, &stage, &mut rest[0])?;
            }
            {
                let terms: Vec<(&[f64], f64)> = B5.iter().enumerate().map(|(m, &c)| (k[m].as_slice(), c)).collect();
                axpy(&mut ynew, &y, hs, &terms);
            }
            let (_, rest) = k.split_at_mut(6);
            system.rhs(t + hs, &ynew, &mut rest[0])?;

            let mut err = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for (m, c) in E.iter().enumerate() {
                    e += c * k[m][i];
                }
                let sc = config.atol + config.rtol * y[i].abs().max(ynew[i].abs());
                let r = hs * e / sc;
                err += r * r;
            }
            let err = (err / n.max(1) as f64).sqrt();
            if !err.is_finite() {
                h = hs * 0.2;
                series.rejected_steps += 1;
                if h <= 1e-14 * t.abs().max(1.0) {
                    return Err(Error::StepUnderflow { t, h });
                }
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if last { t_obs } else { t + hs };
                std::mem::swap(&mut y, &mut ynew);
                series.steps += 1;
                if series.steps > config.max_steps {
                    return Err(Error::InvalidConfig(format!("exceeded max_steps = {}", config.max_steps)));
                }
                if guard.apply(t, &mut y)? {
                    system.rhs(t, &y, &mut k[0])?;
                } else {
                    k.swap(0, 6);
                }
                // A step shortened to hit an observation does not shrink the next one.
                h = if last { h.max(hs * factor) } else { hs * factor };
            } else {
                series.rejected_steps += 1;
                h = hs * factor.min(1.0);
                if h <= 1e-14 * t.abs().max(1.0) {
                    return Err(Error::StepUnderflow { t, h });
                }
            }
        }
        series.times.push(t_obs);
        series.states.push(y.clone());
        series.clipped.push(guard.clipped);
    }
    series.clip_events = guard.events;
    Ok(series)
}

fn initial_step(y: &[f64], f: &[f64], config: &IntegratorConfig) -> f64 {
    let n = y.len().max(1) as f64;
    let norm = |v: &mut dyn Iterator<Item = f64>| (v.map(|x| x * x).sum::<f64>() / n).sqrt();
    let d0 = norm(&mut y.iter().map(|v| v / (config.atol + config.rtol * v.abs())));
    let d1 = norm(&mut y.iter().zip(f).map(|(v, d)| d / (config.atol + config.rtol * v.abs())));
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(config.t_end)
}
