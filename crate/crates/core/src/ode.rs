//! Classical fixed-step fourth-order Runge-Kutta and the trajectory type
//! shared by the linear and nonlinear simulators.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default step for integrating across `span`: `1e-3 * span`, capped at
/// `1e-3`.
pub fn default_step(span: f64) -> f64 {
    if span > 0.0 {
        (1e-3 * span).min(1e-3)
    } else {
        1e-3
    }
}

/// Time nodes from `t0` to `t1` with spacing `step`; the final interval is
/// shortened so the grid lands exactly on `t1`. Nodes are `t0 + k * step`
/// (no accumulated drift).
pub fn time_grid(t0: f64, t1: f64, step: f64) -> Vec<f64> {
    let span = t1 - t0;
    if span <= 0.0 {
        return vec![t0];
    }
    let full = ((span / step) * (1.0 + 1e-12)).floor() as usize;
    let mut grid: Vec<f64> = (0..=full).map(|k| t0 + k as f64 * step).collect();
    let last = *grid.last().unwrap();
    if t1 - last > 1e-9 * step {
        grid.push(t1);
    } else {
        *grid.last_mut().unwrap() = t1;
    }
    grid
}

/// Scratch buffers for [`Rk4::step`].
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `y` from `t` to `t + h` in place; `f(t, y, dy)` writes the
    /// derivative into `dy`.
    #[allow(clippy::needless_range_loop)]
    pub fn step<F>(&mut self, f: &F, t: f64, h: f64, y: &mut [f64])
    where
        F: Fn(f64, &[f64], &mut [f64]) + ?Sized,
    {
        let n = y.len();
        f(t, y, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        f(t + h, &self.tmp, &mut self.k4);
        for i in 0..n {
            y[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Sampled solution of an ODE on an increasing time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub step: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    /// Values of coordinate `i` along the trajectory.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[i]).collect()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("empty trajectory")
    }

    /// CSV with header `t,<prefix>1,...,<prefix>n`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W, prefix: &str) -> io::Result<()> {
        let mut header = String::from("t");
        for i in 1..=self.dim() {
            header.push_str(&format!(",{prefix}{i}"));
        }
        writeln!(w, "{header}")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut line = fmt_sig17(*t);
            for v in s {
                line.push(',');
                line.push_str(&fmt_sig17(*v));
            }
            w.write_all(line.as_bytes())?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// 17 significant digits in scientific notation.
pub fn fmt_sig17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Integrates `f` with RK4 over `time_grid(t0, t_end, step)`, storing every
/// node. `check` runs on each new state and may abort the run.
pub fn integrate<F, C>(f: &F, t0: f64, y0: &[f64], t_end: f64, step: f64, mut check: C) -> Result<Trajectory>
where
    F: Fn(f64, &[f64], &mut [f64]) + ?Sized,
    C: FnMut(f64, &[f64]) -> Result<()>,
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid("step must be positive and finite"));
    }
    if !(t_end >= t0) {
        return Err(Error::invalid(format!(
            "end time {t_end} precedes start time {t0}"
        )));
    }
    let grid = time_grid(t0, t_end, step);
    let mut rk = Rk4::new(y0.len());
    let mut y = y0.to_vec();
    check(t0, &y)?;
    let mut states = Vec::with_capacity(grid.len());
    states.push(y.clone());
    for w in grid.windows(2) {
        rk.step(f, w[0], w[1] - w[0], &mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { last_valid_time: w[0] });
        }
        check(w[1], &y)?;
        states.push(y.clone());
    }
    Ok(Trajectory {
        times: grid,
        states,
        step,
    })
}

/// Like [`integrate`] but keeps only the final state.
pub fn integrate_final<F, C>(f: &F, t0: f64, y0: &[f64], t_end: f64, step: f64, mut check: C) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]) + ?Sized,
    C: FnMut(f64, &[f64]) -> Result<()>,
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid("step must be positive and finite"));
    }
    let grid = time_grid(t0, t_end, step);
    let mut rk = Rk4::new(y0.len());
    let mut y = y0.to_vec();
    for w in grid.windows(2) {
        rk.step(f, w[0], w[1] - w[0], &mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { last_valid_time: w[0] });
        }
        check(w[1], &y)?;
    }
    Ok(y)
}
