//! Method-of-lines integration of the delayed reaction-diffusion system on
//! `(0, lπ)` with no-flux boundaries.
//!
//! Two schemes are available. [`Scheme::SemiImplicit`] treats diffusion by
//! Crank–Nicolson and the reaction by Heun's method; its step is limited only
//! by the reaction. [`Scheme::Explicit`] is Heun's method on the full right
//! side and additionally needs `dt ≤ dx²/(2·max dᵢ)`.

pub mod history;
pub mod laplacian;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Reaction};

use history::History;
use laplacian::{laplacian_into, ImplicitDiffusion};

pub use laplacian::laplacian_neumann;

/// Negative values above this are clamped to zero.
pub const NEGATIVE_TOL: f64 = 1e-10;

/// Number of cosine modes excited by [`InitialProfile::seed`].
pub const SEED_MODES: usize = 8;

const NAMES: [&str; 3] = ["S", "I", "y"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Explicit,
    #[default]
    SemiImplicit,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Explicit => "explicit",
            Scheme::SemiImplicit => "semi-implicit",
        }
    }
}

/// `c + a·cos(k x) + seed·Σ_{n=1}^{8} cos(n x / l)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InitialProfile {
    pub constant: f64,
    pub amplitude: f64,
    pub wavenumber: f64,
    #[serde(default)]
    pub seed: f64,
}

impl InitialProfile {
    pub fn constant(c: f64) -> Self {
        InitialProfile {
            constant: c,
            ..Default::default()
        }
    }

    pub fn cosine(c: f64, a: f64, k: f64) -> Self {
        InitialProfile {
            constant: c,
            amplitude: a,
            wavenumber: k,
            seed: 0.0,
        }
    }

    pub fn with_seed(mut self, seed: f64) -> Self {
        self.seed = seed;
        self
    }

    pub fn eval(&self, x: f64, l: f64) -> f64 {
        let mut v = self.constant + self.amplitude * (self.wavenumber * x).cos();
        if self.seed != 0.0 {
            v += self.seed
                * (1..=SEED_MODES)
                    .map(|n| (n as f64 * x / l).cos())
                    .sum::<f64>();
        }
        v
    }

    /// Largest absolute value over the domain, bounded above.
    fn sup(&self) -> f64 {
        self.constant.abs() + self.amplitude.abs() + SEED_MODES as f64 * self.seed.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub grid_points: usize,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    /// Frames before this time are not stored.
    #[serde(default)]
    pub record_from: f64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Initial data for `(S, I, y)`, also used as the constant history.
    pub initial: [InitialProfile; 3],
}

impl SimConfig {
    /// Desk-scale defaults starting at the constant state `u`.
    pub fn starting_at(u: [f64; 3]) -> Self {
        SimConfig {
            grid_points: 192,
            dt: 0.01,
            t_end: 500.0,
            record_every: 10,
            record_from: 0.0,
            scheme: Scheme::SemiImplicit,
            initial: u.map(InitialProfile::constant),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| {
            Err(Error::Config {
                key: key.to_string(),
                message: message.to_string(),
            })
        };
        if self.grid_points < 16 {
            return bad("grid_points", "must be at least 16");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", "must be positive");
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end", "must be positive");
        }
        if self.record_every == 0 {
            return bad("record_every", "must be at least 1");
        }
        let finite = self.initial.iter().all(|p| {
            p.constant.is_finite() && p.amplitude.is_finite() && p.wavenumber.is_finite() && p.seed.is_finite()
        });
        if !finite {
            return bad("initial", "initial profile values must be finite");
        }
        Ok(())
    }

    pub fn dx(&self, p: &ModelParams) -> f64 {
        p.domain_length() / (self.grid_points - 1) as f64
    }

    pub fn grid(&self, p: &ModelParams) -> Vec<f64> {
        let dx = self.dx(p);
        (0..self.grid_points).map(|j| j as f64 * dx).collect()
    }

    /// Largest stable step for the configured scheme.
    pub fn step_bound(&self, p: &ModelParams) -> f64 {
        let reaction = 1.0 / reaction_stiffness(p, &self.initial);
        match self.scheme {
            Scheme::SemiImplicit => reaction,
            Scheme::Explicit => {
                let dx = self.dx(p);
                let dmax = p.d1.max(p.d2).max(p.d3);
                reaction.min(dx * dx / (2.0 * dmax))
            }
        }
    }
}

/// Maximum absolute row sum of the reaction Jacobian (current and delayed
/// arguments together), evaluated at the componentwise largest of the
/// constant equilibria and the initial data.
fn reaction_stiffness(p: &ModelParams, initial: &[InitialProfile; 3]) -> f64 {
    let eq = p.equilibria();
    let mut r = [0.0f64; 3];
    for k in 0..3 {
        r[k] = eq.e1[k].max(initial[k].sup());
        if let Some(e2) = eq.e2 {
            r[k] = r[k].max(e2[k]);
        }
    }
    let [s, i, y] = r;
    let recruit = p.alpha * p.survival();
    let row_s = p.d + p.mu * i + p.alpha + recruit + p.mu * s + p.gamma;
    let row_i = p.mu * i + (p.mu * s - p.d - p.gamma).abs();
    let row_y = recruit + 2.0 * p.beta * y;
    row_s.max(row_i).max(row_y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    S,
    I,
    Y,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::S, Component::I, Component::Y];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub fields: [Vec<f64>; 3],
}

impl Frame {
    pub fn get(&self, c: Component) -> &[f64] {
        &self.fields[c.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: ModelParams,
    pub config: SimConfig,
    pub x: Vec<f64>,
    pub frames: Vec<Frame>,
    /// Number of grid values clamped from small negative excursions.
    pub clamped: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.t).collect()
    }

    pub fn last(&self) -> Option<&Frame> {
        self.frames.last()
    }

    pub fn dx(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    /// Keeps every `k`-th frame.
    pub fn subsample(&self, k: usize) -> Trajectory {
        Trajectory {
            frames: self.frames.iter().step_by(k.max(1)).cloned().collect(),
            ..self.clone()
        }
    }

    /// Writes rows `t, x, S, I, y`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "x", "S", "I", "y"])?;
        for f in &self.frames {
            for (j, x) in self.x.iter().enumerate() {
                w.write_record(&[
                    f.t.to_string(),
                    x.to_string(),
                    f.fields[0][j].to_string(),
                    f.fields[1][j].to_string(),
                    f.fields[2][j].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Binary snapshot file, all integers and floats little-endian:
    /// magic `SISDTRAJ`, `u32` version, `u64` grid size `N`, `u64` frame
    /// count, the `N` grid abscissae, then per frame `t, S[N], I[N], y[N]`.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&BINARY_VERSION.to_le_bytes())?;
        w.write_all(&(self.x.len() as u64).to_le_bytes())?;
        w.write_all(&(self.frames.len() as u64).to_le_bytes())?;
        for v in &self.x {
            w.write_all(&v.to_le_bytes())?;
        }
        for f in &self.frames {
            w.write_all(&f.t.to_le_bytes())?;
            for field in &f.fields {
                for v in field {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub const BINARY_MAGIC: &[u8; 8] = b"SISDTRAJ";
pub const BINARY_VERSION: u32 = 1;

/// Grid and frames read back from [`Trajectory::write_binary`] output.
pub fn read_binary(path: &Path) -> Result<(Vec<f64>, Vec<Frame>)> {
    let mut r = BufReader::new(File::open(path)?);
    let invalid = |m: &str| Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string()));
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(invalid("not a trajectory file"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != BINARY_VERSION {
        return Err(invalid("unsupported trajectory version"));
    }
    let mut b8 = [0u8; 8];
    let mut next_u64 = |r: &mut BufReader<File>| -> Result<u64> {
        r.read_exact(&mut b8)?;
        Ok(u64::from_le_bytes(b8))
    };
    let n = next_u64(&mut r)? as usize;
    let count = next_u64(&mut r)? as usize;
    let f64s = |r: &mut BufReader<File>, k: usize| -> Result<Vec<f64>> {
        let mut buf = vec![0u8; 8 * k];
        r.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let x = f64s(&mut r, n)?;
    let mut frames = Vec::with_capacity(count);
    for _ in 0..count {
        let t = f64s(&mut r, 1)?[0];
        let fields = [f64s(&mut r, n)?, f64s(&mut r, n)?, f64s(&mut r, n)?];
        frames.push(Frame { t, fields });
    }
    Ok((x, frames))
}

/// Integrates from the constant history given by `cfg.initial`.
pub fn run(p: &ModelParams, cfg: &SimConfig) -> Result<Trajectory> {
    p.validate()?;
    cfg.validate()?;
    let bound = cfg.step_bound(p);
    if cfg.dt > bound {
        return Err(Error::StepTooLarge {
            dt: cfg.dt,
            bound,
            scheme: cfg.scheme.name(),
        });
    }
    Integrator::new(p, cfg).run()
}

struct Integrator<'a> {
    p: &'a ModelParams,
    cfg: &'a SimConfig,
    n: usize,
    h: f64,
    dx: f64,
    reaction: Reaction,
    u: [Vec<f64>; 3],
    hist_s: History,
    hist_y: History,
    solvers: Option<[ImplicitDiffusion; 3]>,
    clamped: usize,
}

/// Scratch buffers for one step.
struct Work {
    lap: [Vec<f64>; 3],
    lap_stage: [Vec<f64>; 3],
    r0: [Vec<f64>; 3],
    r1: [Vec<f64>; 3],
    stage: [Vec<f64>; 3],
    s_lag: Vec<f64>,
    y_lag: Vec<f64>,
}

impl<'a> Integrator<'a> {
    fn new(p: &'a ModelParams, cfg: &'a SimConfig) -> Self {
        let n = cfg.grid_points;
        let h = cfg.dt;
        let dx = cfg.dx(p);
        let x = cfg.grid(p);
        let u = [0, 1, 2].map(|k| x.iter().map(|&x| cfg.initial[k].eval(x, p.l)).collect::<Vec<_>>());
        let solvers = match cfg.scheme {
            Scheme::SemiImplicit => Some(p.diffusion().map(|d| ImplicitDiffusion::new(n, 0.5 * h * d, dx))),
            Scheme::Explicit => None,
        };
        Integrator {
            p,
            cfg,
            n,
            h,
            dx,
            reaction: Reaction::new(p),
            hist_s: History::new(&u[0], h, p.omega),
            hist_y: History::new(&u[2], h, p.tau),
            u,
            solvers,
            clamped: 0,
        }
    }

    fn run(mut self) -> Result<Trajectory> {
        let steps = (self.cfg.t_end / self.h - 1e-9).ceil() as usize;
        let n = self.n;
        let zero3 = || [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut w = Work {
            lap: zero3(),
            lap_stage: zero3(),
            r0: zero3(),
            r1: zero3(),
            stage: zero3(),
            s_lag: vec![0.0; n],
            y_lag: vec![0.0; n],
        };
        let mut frames = Vec::new();
        self.record(0, &mut frames);
        for k in 0..steps {
            self.step(k, &mut w)?;
            self.record(k + 1, &mut frames);
        }
        Ok(Trajectory {
            params: *self.p,
            config: self.cfg.clone(),
            x: self.cfg.grid(self.p),
            frames,
            clamped: self.clamped,
        })
    }

    fn record(&self, k: usize, frames: &mut Vec<Frame>) {
        let t = k as f64 * self.h;
        if k % self.cfg.record_every == 0 && t >= self.cfg.record_from - 1e-12 {
            frames.push(Frame {
                t,
                fields: self.u.clone(),
            });
        }
    }

    /// Reaction at step position `pos` for state `u`; lookups past the
    /// newest stored step interpolate toward `u`.
    fn reaction_into(&self, u: &[Vec<f64>; 3], pos: usize, w_lag: (&mut Vec<f64>, &mut Vec<f64>), out: &mut [Vec<f64>; 3]) {
        let (s_lag, y_lag) = w_lag;
        let p = self.p;
        let ahead = pos > self.hist_s.newest();
        self.hist_s
            .lookup(pos as f64 - p.omega / self.h, ahead.then_some(&u[0][..]), s_lag);
        self.hist_y
            .lookup(pos as f64 - p.tau / self.h, ahead.then_some(&u[2][..]), y_lag);
        let [o0, o1, o2] = out;
        for j in 0..self.n {
            let r = self.reaction.eval(u[0][j], u[1][j], u[2][j], s_lag[j], y_lag[j]);
            o0[j] = r[0];
            o1[j] = r[1];
            o2[j] = r[2];
        }
    }

    fn step(&mut self, k: usize, w: &mut Work) -> Result<()> {
        let h = self.h;
        let d = self.p.diffusion();
        let u = std::mem::take(&mut self.u);
        self.reaction_into(&u, k, (&mut w.s_lag, &mut w.y_lag), &mut w.r0);
        for c in 0..3 {
            laplacian_into(&u[c], self.dx, &mut w.lap[c]);
        }
        // Predictor.
        for c in 0..3 {
            for j in 0..self.n {
                w.stage[c][j] = match &self.solvers {
                    Some(_) => u[c][j] + 0.5 * h * d[c] * w.lap[c][j] + h * w.r0[c][j],
                    None => u[c][j] + h * (d[c] * w.lap[c][j] + w.r0[c][j]),
                };
            }
            if let Some(s) = &self.solvers {
                s[c].solve(&mut w.stage[c]);
            }
        }
        self.reaction_into(&w.stage, k + 1, (&mut w.s_lag, &mut w.y_lag), &mut w.r1);
        // Corrector; the stage Laplacian is only needed explicitly.
        let mut next = u.clone();
        for c in 0..3 {
            match &self.solvers {
                Some(s) => {
                    for j in 0..self.n {
                        next[c][j] = u[c][j]
                            + 0.5 * h * d[c] * w.lap[c][j]
                            + 0.5 * h * (w.r0[c][j] + w.r1[c][j]);
                    }
                    s[c].solve(&mut next[c]);
                }
                None => {
                    laplacian_into(&w.stage[c], self.dx, &mut w.lap_stage[c]);
                    for j in 0..self.n {
                        next[c][j] = u[c][j]
                            + 0.5 * h * (d[c] * (w.lap[c][j] + w.lap_stage[c][j]) + w.r0[c][j] + w.r1[c][j]);
                    }
                }
            }
        }
        let t = (k + 1) as f64 * h;
        for (c, field) in next.iter_mut().enumerate() {
            for (j, v) in field.iter_mut().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Numeric {
                        t,
                        reason: format!("non-finite {} at node {j}", NAMES[c]),
                    });
                }
                if *v < 0.0 {
                    if *v < -NEGATIVE_TOL {
                        return Err(Error::Numeric {
                            t,
                            reason: format!("{} = {v:e} at node {j} is negative", NAMES[c]),
                        });
                    }
                    *v = 0.0;
                    self.clamped += 1;
                }
            }
        }
        self.hist_s.push(&next[0]);
        self.hist_y.push(&next[2]);
        self.u = next;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(u: [f64; 3], t_end: f64) -> SimConfig {
        SimConfig {
            grid_points: 48,
            dt: 0.01,
            t_end,
            record_every: 100,
            ..SimConfig::starting_at(u)
        }
    }

    fn sup_dist(f: &Frame, u: [f64; 3]) -> f64 {
        let mut m: f64 = 0.0;
        for c in 0..3 {
            for v in &f.fields[c] {
                m = m.max((v - u[c]).abs());
            }
        }
        m
    }

    #[test]
    fn equilibrium_stays_put() {
        for scheme in [Scheme::Explicit, Scheme::SemiImplicit] {
            let p = ModelParams::baseline().with_omega(0.3);
            let e2 = p.endemic().unwrap();
            let cfg = SimConfig {
                scheme,
                ..short(e2, 50.0)
            };
            let tr = run(&p, &cfg).unwrap();
            for f in &tr.frames {
                assert!(sup_dist(f, e2) < 1e-9, "{scheme:?}");
            }
        }
    }

    #[test]
    fn mature_equation_is_decoupled() {
        let p = ModelParams::baseline().with_omega(0.3);
        let e2 = p.endemic().unwrap();
        let mut cfg = short(e2, 100.0);
        cfg.initial[0] = InitialProfile::cosine(1.0, 0.3, 1.0);
        cfg.initial[1] = InitialProfile::cosine(4.0, 1.0, 2.0 / 3.0);
        let tr = run(&p, &cfg).unwrap();
        for f in &tr.frames {
            for v in f.get(Component::Y) {
                assert!((v - e2[2]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn oversized_step_is_rejected_before_running() {
        let p = ModelParams::baseline().with_d2(40.0);
        let e2 = p.endemic().unwrap();
        let cfg = SimConfig {
            scheme: Scheme::Explicit,
            dt: 0.05,
            ..short(e2, 1.0)
        };
        match run(&p, &cfg) {
            Err(Error::StepTooLarge { bound, .. }) => assert!(bound < 0.05),
            other => panic!("expected a step error, got {other:?}"),
        }
        let cfg = SimConfig {
            scheme: Scheme::SemiImplicit,
            ..cfg
        };
        assert!(run(&p, &cfg).is_ok());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let p = ModelParams::baseline();
        let cfg = SimConfig {
            grid_points: 8,
            ..short([1.0; 3], 1.0)
        };
        assert!(matches!(run(&p, &cfg), Err(Error::Config { .. })));
    }

    #[test]
    fn recording_respects_cadence_and_start() {
        let p = ModelParams::baseline();
        let cfg = SimConfig {
            record_every: 50,
            record_from: 2.0,
            ..short(p.endemic().unwrap(), 4.0)
        };
        let tr = run(&p, &cfg).unwrap();
        let t = tr.times();
        assert_eq!(t.len(), 5);
        assert!((t[0] - 2.0).abs() < 1e-12 && (t[4] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn schemes_agree_on_short_runs() {
        let p = ModelParams::baseline().with_omega(0.541);
        let mut cfg = short([1.2, 5.8, 4.2], 20.0);
        cfg.initial = [
            InitialProfile::cosine(1.2, 0.01, 1.0),
            InitialProfile::cosine(5.8, -0.06, 1.0),
            InitialProfile::cosine(4.2, -0.05, 1.0),
        ];
        cfg.dt = 0.002;
        let a = run(&p, &SimConfig { scheme: Scheme::Explicit, ..cfg.clone() }).unwrap();
        let b = run(&p, &cfg).unwrap();
        let (fa, fb) = (a.last().unwrap(), b.last().unwrap());
        for c in 0..3 {
            for (x, y) in fa.fields[c].iter().zip(&fb.fields[c]) {
                assert!((x - y).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn zero_freely_moving_delay_is_supported() {
        let p = ModelParams::baseline();
        let mut cfg = short([1.0, 1.0, 1.0], 5.0);
        cfg.dt = 0.005;
        assert!(run(&p, &cfg).is_ok());
    }

    #[test]
    fn binary_round_trip() {
        let p = ModelParams::baseline();
        let cfg = SimConfig {
            record_every: 100,
            ..short([1.0, 2.0, 3.0], 2.0)
        };
        let tr = run(&p, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        tr.write_binary(&path).unwrap();
        let (x, frames) = read_binary(&path).unwrap();
        assert_eq!(x, tr.x);
        assert_eq!(frames, tr.frames);
    }

    #[test]
    fn csv_has_one_row_per_node_and_frame() {
        let p = ModelParams::baseline();
        let cfg = SimConfig {
            record_every: 100,
            ..short([1.0, 2.0, 3.0], 1.0)
        };
        let tr = run(&p, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        tr.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,x,S,I,y\n"));
        assert_eq!(text.lines().count(), 1 + tr.frames.len() * tr.x.len());
    }
}
