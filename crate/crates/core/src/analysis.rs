//! Post-processing of trajectories and parameter studies: cosine-mode
//! projection, attractor classification, the `d2` sweep of first critical
//! delays, and simulation-based checks of the Hopf predictions.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::normalform::{self, NormalFormResult};
use crate::simulator::{self, Component, InitialProfile, SimConfig, Trajectory};
use crate::spectral::{self, FirstHopf};

/// Modes tracked by the sweep curves.
pub const SWEEP_MODES: usize = 5;

/// L²-normalized Neumann cosine `b_n` and its maximum modulus.
fn basis(n: usize, l: f64) -> (impl Fn(f64) -> f64, f64) {
    let len = l * PI;
    let norm = if n == 0 { len.powf(-0.5) } else { (2.0 / len).sqrt() };
    let k = n as f64 / l;
    (move |x: f64| norm * (k * x).cos(), norm)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSpectrum {
    pub component: Component,
    pub times: Vec<f64>,
    /// `coefficients[n][k]` is `⟨u(·, t_k), b_n⟩`.
    pub coefficients: Vec<Vec<f64>>,
}

/// Trapezoid-rule projections onto `b_0..=b_{n_max}` for every frame.
pub fn project_modes(traj: &Trajectory, component: Component, n_max: usize) -> Result<ModeSpectrum> {
    project_frames(traj, 0, component, n_max)
}

fn project_frames(traj: &Trajectory, first: usize, component: Component, n_max: usize) -> Result<ModeSpectrum> {
    let n = traj.x.len();
    if n_max > n / 4 {
        return Err(Error::Aliasing {
            n_max,
            grid_points: n,
        });
    }
    let dx = traj.dx();
    let l = traj.params.l;
    let weights: Vec<Vec<f64>> = (0..=n_max)
        .map(|m| {
            let (b, _) = basis(m, l);
            traj.x
                .iter()
                .enumerate()
                .map(|(j, &x)| {
                    let w = if j == 0 || j == n - 1 { 0.5 * dx } else { dx };
                    w * b(x)
                })
                .collect()
        })
        .collect();
    let frames = &traj.frames[first..];
    let coefficients = weights
        .iter()
        .map(|w| {
            frames
                .iter()
                .map(|f| f.get(component).iter().zip(w).map(|(u, w)| u * w).sum())
                .collect()
        })
        .collect();
    Ok(ModeSpectrum {
        component,
        times: frames.iter().map(|f| f.t).collect(),
        coefficients,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifyOptions {
    /// Trailing fraction of the recorded time span that is analysed.
    pub window: f64,
    /// Relative peak-to-peak amplitude below which a mode counts as still.
    pub equilibrium_tol: f64,
    /// Homogeneous oscillations need every other mode below this fraction
    /// of mode 0.
    pub dominance: f64,
    pub n_max: usize,
    pub component: Component,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            window: 0.4,
            equilibrium_tol: 1e-4,
            dominance: 0.1,
            n_max: 8,
            component: Component::I,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttractorKind {
    Equilibrium,
    HomogeneousOscillation,
    InhomogeneousOscillation,
    /// Mode 0 leads but other modes are not negligible.
    MixedOscillation,
    /// Oscillating, but too few cycles in the window to say more.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractorReport {
    pub kind: AttractorKind,
    pub dominant_mode: usize,
    pub period: Option<f64>,
    /// Upward zero crossings of the dominant mode in the window.
    pub crossings: usize,
    /// Peak-to-peak amplitude per mode of the analysed component, in field
    /// units (scaled by `max |b_n|`).
    pub amplitudes: Vec<f64>,
    /// Space-time mean of `(S, I, y)` over the window.
    pub mean_state: [f64; 3],
    pub window: [f64; 2],
}

impl AttractorReport {
    pub fn is_oscillation(&self) -> bool {
        matches!(
            self.kind,
            AttractorKind::HomogeneousOscillation
                | AttractorKind::InhomogeneousOscillation
                | AttractorKind::MixedOscillation
        )
    }
}

pub fn classify_attractor(traj: &Trajectory, opts: &ClassifyOptions) -> Result<AttractorReport> {
    let frames = &traj.frames;
    if frames.len() < 8 {
        return Err(Error::EmptyTrajectory);
    }
    let (t0, t1) = (frames[0].t, frames[frames.len() - 1].t);
    let start = t1 - opts.window * (t1 - t0);
    let first = frames.partition_point(|f| f.t < start - 1e-9);
    if frames.len() - first < 8 {
        return Err(Error::EmptyTrajectory);
    }
    let window = &frames[first..];
    let count = window.len() as f64;
    let npts = traj.x.len() as f64;

    let mut mean_state = [0.0; 3];
    let mut scale: f64 = 0.0;
    for c in Component::ALL {
        let (sum, sq) = window.iter().fold((0.0, 0.0), |acc, f| {
            let v = f.get(c);
            (acc.0 + v.iter().sum::<f64>(), acc.1 + v.iter().map(|x| x * x).sum::<f64>())
        });
        mean_state[c.index()] = sum / (count * npts);
        scale = scale.max((sq / (count * npts)).sqrt());
    }

    let l = traj.params.l;
    let ptp = |series: &[f64]| {
        let (lo, hi) = series
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| (a.0.min(v), a.1.max(v)));
        hi - lo
    };
    let amplitudes_of = |spec: &ModeSpectrum| -> Vec<f64> {
        spec.coefficients
            .iter()
            .enumerate()
            .map(|(n, s)| ptp(s) * basis(n, l).1)
            .collect()
    };

    let mut still = true;
    let mut target = None;
    for c in Component::ALL {
        let spec = project_frames(traj, first, c, opts.n_max)?;
        let amps = amplitudes_of(&spec);
        if amps.iter().any(|&a| a >= opts.equilibrium_tol * scale) {
            still = false;
        }
        if c == opts.component {
            target = Some((spec, amps));
        }
    }
    let (spec, amplitudes) = target.expect("component is one of S, I, y");
    let window_span = [window[0].t, t1];
    if still {
        return Ok(AttractorReport {
            kind: AttractorKind::Equilibrium,
            dominant_mode: 0,
            period: None,
            crossings: 0,
            amplitudes,
            mean_state,
            window: window_span,
        });
    }

    let dominant_mode = amplitudes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(n, _)| n)
        .unwrap_or(0);
    let (period, crossings) = zero_crossing_period(&spec.times, &spec.coefficients[dominant_mode]);
    let kind = if crossings < 4 {
        AttractorKind::Inconclusive
    } else if dominant_mode >= 1 {
        AttractorKind::InhomogeneousOscillation
    } else if amplitudes[1..]
        .iter()
        .all(|&a| a < opts.dominance * amplitudes[0])
    {
        AttractorKind::HomogeneousOscillation
    } else {
        AttractorKind::MixedOscillation
    };
    Ok(AttractorReport {
        kind,
        dominant_mode,
        period: if crossings >= 4 { period } else { None },
        crossings,
        amplitudes,
        mean_state,
        window: window_span,
    })
}

/// Mean spacing of upward zero crossings of the linearly detrended series,
/// and the number of crossings found.
fn zero_crossing_period(t: &[f64], v: &[f64]) -> (Option<f64>, usize) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let vm = v.iter().sum::<f64>() / n;
    let cov: f64 = t.iter().zip(v).map(|(a, b)| (a - tm) * (b - vm)).sum();
    let var: f64 = t.iter().map(|a| (a - tm) * (a - tm)).sum();
    let slope = if var > 0.0 { cov / var } else { 0.0 };
    let r: Vec<f64> = t.iter().zip(v).map(|(a, b)| b - vm - slope * (a - tm)).collect();
    let mut ups = Vec::new();
    for k in 1..r.len() {
        if r[k - 1] < 0.0 && r[k] >= 0.0 {
            let f = -r[k - 1] / (r[k] - r[k - 1]);
            ups.push(t[k - 1] + f * (t[k] - t[k - 1]));
        }
    }
    let period = if ups.len() >= 2 {
        Some((ups[ups.len() - 1] - ups[0]) / (ups.len() - 1) as f64)
    } else {
        None
    };
    (period, ups.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub d2: f64,
    /// `ω_n^0` for `n = 0..5`; `None` where mode `n` has no crossing.
    pub omega0: Vec<Option<f64>>,
    pub n0: usize,
    pub omega_star: f64,
    pub ties: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeBoundary {
    /// Geometric midpoint of the final bracket.
    pub d2: f64,
    pub bracket: [f64; 2],
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub boundaries: Vec<RegimeBoundary>,
}

/// `n` logarithmically spaced values over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

fn sweep_point(base: &ModelParams, d2: f64) -> Result<SweepPoint> {
    let p = base.with_d2(d2);
    let fh = spectral::first_hopf(&p)?;
    let omega0 = (0..SWEEP_MODES)
        .map(|n| match spectral::critical_delays(&p, n, 0) {
            Ok(c) => Ok(Some(c.omega0())),
            Err(Error::ModeStableForAllDelays { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepPoint {
        d2,
        omega0,
        n0: fh.n0,
        omega_star: fh.omega_star,
        ties: fh.ties,
    })
}

/// Evaluates every grid value, then brackets each change of `n0` between
/// neighbours down to relative width `rel_tol` by bisection in `ln d2`.
pub fn sweep_d2(base: &ModelParams, d2_values: &[f64], rel_tol: f64) -> Result<SweepResult> {
    base.validate()?;
    base.endemic()?;
    let points = d2_values
        .par_iter()
        .map(|&d2| sweep_point(base, d2))
        .collect::<Result<Vec<_>>>()?;
    let mut boundaries = Vec::new();
    for w in points.windows(2) {
        if w[0].n0 != w[1].n0 {
            refine(base, (w[0].d2, w[0].n0), (w[1].d2, w[1].n0), rel_tol, &mut boundaries)?;
        }
    }
    Ok(SweepResult { points, boundaries })
}

fn refine(
    base: &ModelParams,
    lo: (f64, usize),
    hi: (f64, usize),
    rel_tol: f64,
    out: &mut Vec<RegimeBoundary>,
) -> Result<()> {
    if hi.0 / lo.0 - 1.0 <= rel_tol {
        out.push(RegimeBoundary {
            d2: (lo.0 * hi.0).sqrt(),
            bracket: [lo.0, hi.0],
            from: lo.1,
            to: hi.1,
        });
        return Ok(());
    }
    let mid = (lo.0 * hi.0).sqrt();
    let m = spectral::first_hopf(&base.with_d2(mid))?.n0;
    if m != lo.1 {
        refine(base, lo, (mid, m), rel_tol, out)?;
    }
    if m != hi.1 {
        refine(base, (mid, m), hi, rel_tol, out)?;
    }
    Ok(())
}

impl SweepResult {
    /// Columns `d2, omega_0 .. omega_4, n0`; absent crossings are empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        let mut header = vec!["d2".to_string()];
        header.extend((0..SWEEP_MODES).map(|n| format!("omega_{n}")));
        header.push("n0".into());
        w.write_record(&header)?;
        for p in &self.points {
            let mut row = vec![p.d2.to_string()];
            row.extend(p.omega0.iter().map(|o| o.map(|v| v.to_string()).unwrap_or_default()));
            row.push(p.n0.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// First-Hopf modes along the grid with consecutive repeats removed.
    pub fn mode_sequence(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.points.iter().map(|p| p.n0).collect();
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    /// Relative offset below `ω*`; defaults to the offset above.
    pub margin_below: Option<f64>,
    pub grid_points: usize,
    pub dt: f64,
    /// Override of the automatically chosen horizon.
    pub t_end: Option<f64>,
    /// Relative size of the initial offset from the endemic state.
    pub perturbation: f64,
    /// Amplitude of the broadband seed added to `S` and `I`.
    pub seed: f64,
    pub period_tol: f64,
    pub classify: ClassifyOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            margin_below: None,
            grid_points: 96,
            dt: 0.01,
            t_end: None,
            perturbation: 1e-3,
            seed: 1e-4,
            period_tol: 0.05,
            classify: ClassifyOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub outcome: Outcome,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideRun {
    pub omega: f64,
    pub t_end: f64,
    pub report: Option<AttractorReport>,
    /// Numerical failure of the run, typically `S` leaving the positive
    /// cone on a large orbit.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub first_hopf: FirstHopf,
    pub normal_form: Option<NormalFormResult>,
    pub predicted_period: f64,
    pub below: Option<SideRun>,
    pub above: Option<SideRun>,
    pub checks: Vec<Check>,
    pub status: Outcome,
    pub note: Option<String>,
}

/// Initial data near the endemic state: a relative constant offset plus a
/// small broadband cosine seed in `S` and `I`.
pub fn perturbed_start(e2: [f64; 3], perturbation: f64, seed: f64) -> [InitialProfile; 3] {
    [
        InitialProfile::constant(e2[0] * (1.0 + perturbation)).with_seed(seed),
        InitialProfile::constant(e2[1] * (1.0 - perturbation)).with_seed(seed),
        InitialProfile::constant(e2[2]),
    ]
}

/// Simulates just below and just above the predicted first Hopf point and
/// checks stability, the onset mode and the onset period.
pub fn verify_prediction(p: &ModelParams, margin: f64, opts: &VerifyOptions) -> Result<VerificationReport> {
    p.validate()?;
    let e2 = p.endemic()?;
    let fh = spectral::first_hopf(p)?;
    let normal_form = match normalform::hopf_properties(p) {
        Ok(nf) => Some(nf),
        Err(Error::DoubleHopf { .. }) => None,
        Err(e) => return Err(e),
    };
    let predicted_period = fh.period();
    let mut report = VerificationReport {
        first_hopf: fh.clone(),
        normal_form,
        predicted_period,
        below: None,
        above: None,
        checks: Vec::new(),
        status: Outcome::Inconclusive,
        note: None,
    };
    if margin == 0.0 {
        report.note = Some("at criticality, inconclusive".into());
        return Ok(report);
    }
    let below_margin = opts.margin_below.unwrap_or(margin);
    let w_above = fh.omega_star * (1.0 + margin);
    let w_below = fh.omega_star * (1.0 - below_margin);
    if w_above >= p.tau {
        return Err(Error::Config {
            key: "margin".into(),
            message: format!("ω = {w_above} above the Hopf point is not below τ = {}", p.tau),
        });
    }
    // Linear rate of the critical mode away from the crossing.
    let speed = spectral::root_speed(p, fh.n0, 0)?.re;
    let horizon = |dw: f64| {
        opts.t_end.unwrap_or_else(|| {
            let rate = (dw * speed).abs().max(1e-6);
            (3.0 * (1e3f64).ln() / rate).clamp(600.0, 20000.0)
        })
    };
    let side = |omega: f64, t_end: f64| -> Result<SideRun> {
        let q = p.with_omega(omega);
        let record_every = ((0.1 / opts.dt).round() as usize).max(1);
        let cfg = SimConfig {
            grid_points: opts.grid_points,
            dt: opts.dt,
            t_end,
            record_every,
            record_from: t_end * (1.0 - opts.classify.window) - 1.0,
            scheme: simulator::Scheme::SemiImplicit,
            initial: perturbed_start(e2, opts.perturbation, opts.seed),
        };
        let (report, failure) = match simulator::run(&q, &cfg) {
            Ok(traj) => (Some(classify_attractor(&traj, &opts.classify)?), None),
            Err(e @ Error::Numeric { .. }) => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        };
        Ok(SideRun {
            omega,
            t_end,
            report,
            failure,
        })
    };
    let t_below = horizon(w_below - fh.omega_star);
    let t_above = horizon(w_above - fh.omega_star);
    let (below, above) = rayon::join(|| side(w_below, t_below), || side(w_above, t_above));
    let (below, above) = (below?, above?);

    let mut checks = Vec::new();
    let outcome = |ok: bool| if ok { Outcome::Pass } else { Outcome::Fail };
    let describe = |r: &SideRun| match (&r.report, &r.failure) {
        (Some(rep), _) => format!("ω = {:.6}: {:?}", r.omega, rep.kind),
        (None, Some(f)) => format!("ω = {:.6}: {f}", r.omega),
        (None, None) => format!("ω = {:.6}: no result", r.omega),
    };
    checks.push(Check {
        name: "equilibrium below".into(),
        outcome: match below.report.as_ref().map(|r| r.kind) {
            Some(AttractorKind::Equilibrium) => Outcome::Pass,
            Some(AttractorKind::Inconclusive) | None => Outcome::Inconclusive,
            Some(_) => Outcome::Fail,
        },
        detail: describe(&below),
    });
    let above_report = above.report.as_ref();
    let osc = above_report.is_some_and(|r| r.is_oscillation());
    checks.push(Check {
        name: "oscillation above".into(),
        outcome: match above_report.map(|r| r.kind) {
            Some(AttractorKind::Inconclusive) | None => Outcome::Inconclusive,
            Some(_) => outcome(osc),
        },
        detail: describe(&above),
    });
    let measured_mode = above_report.map(|r| r.dominant_mode);
    checks.push(Check {
        name: "onset mode".into(),
        outcome: match measured_mode {
            Some(m) if osc => outcome(m == fh.n0),
            _ => Outcome::Inconclusive,
        },
        detail: match measured_mode {
            Some(m) => format!("measured {m} predicted {}", fh.n0),
            None => format!("not measured, predicted {}", fh.n0),
        },
    });
    checks.push(match above_report.and_then(|r| r.period) {
        Some(t) => {
            let rel = (t - predicted_period).abs() / predicted_period;
            Check {
                name: "onset period".into(),
                outcome: outcome(rel <= opts.period_tol),
                detail: format!("measured {t:.5} predicted {predicted_period:.5} ({:.2}%)", 100.0 * rel),
            }
        }
        None => Check {
            name: "onset period".into(),
            outcome: Outcome::Inconclusive,
            detail: "no period measured".into(),
        },
    });
    report.status = if checks.iter().all(|c| c.outcome == Outcome::Pass) {
        Outcome::Pass
    } else if checks.iter().any(|c| c.outcome == Outcome::Fail) {
        Outcome::Fail
    } else {
        Outcome::Inconclusive
    };
    report.checks = checks;
    report.below = Some(below);
    report.above = Some(above);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::Frame;

    fn synthetic(l: f64, n: usize, times: &[f64], f: impl Fn(f64, f64) -> f64) -> Trajectory {
        let p = ModelParams::baseline().with_l(l);
        let cfg = SimConfig {
            grid_points: n,
            ..SimConfig::starting_at([1.0; 3])
        };
        let x = cfg.grid(&p);
        let frames = times
            .iter()
            .map(|&t| {
                let v: Vec<f64> = x.iter().map(|&x| f(t, x)).collect();
                Frame {
                    t,
                    fields: [vec![1.0; n], v, vec![2.0; n]],
                }
            })
            .collect();
        Trajectory {
            params: p,
            config: cfg,
            x,
            frames,
            clamped: 0,
        }
    }

    #[test]
    fn constant_field_projects_onto_mode_zero() {
        let tr = synthetic(3.0, 97, &[0.0], |_, _| 2.5);
        let s = project_modes(&tr, Component::I, 8).unwrap();
        let len = 3.0 * PI;
        assert!((s.coefficients[0][0] - 2.5 * len.sqrt()).abs() < 1e-10);
        for n in 1..=8 {
            assert!(s.coefficients[n][0].abs() < 1e-10);
        }
    }

    #[test]
    fn sampled_basis_function_is_recovered() {
        let (b2, _) = basis(2, 3.0);
        let tr = synthetic(3.0, 97, &[0.0], |_, x| b2(x));
        let s = project_modes(&tr, Component::I, 8).unwrap();
        assert!((s.coefficients[2][0] - 1.0).abs() < 1e-6);
        for n in (0..=8).filter(|&n| n != 2) {
            assert!(s.coefficients[n][0].abs() < 1e-6);
        }
    }

    #[test]
    fn projection_obeys_bessel_inequality() {
        let tr = synthetic(3.0, 65, &[0.0], |_, x| (x * 1.7).sin() + 0.3 * x);
        let s = project_modes(&tr, Component::I, 16).unwrap();
        let dx = tr.dx();
        let v = tr.frames[0].get(Component::I);
        let norm: f64 = v
            .iter()
            .enumerate()
            .map(|(j, u)| u * u * if j == 0 || j == v.len() - 1 { 0.5 * dx } else { dx })
            .sum();
        let sum: f64 = s.coefficients.iter().map(|c| c[0] * c[0]).sum();
        assert!(sum <= norm + 1e-9);
    }

    #[test]
    fn too_many_modes_is_an_aliasing_error() {
        let tr = synthetic(3.0, 33, &[0.0], |_, _| 1.0);
        assert!(matches!(
            project_modes(&tr, Component::I, 9),
            Err(Error::Aliasing { .. })
        ));
    }

    fn times(t_end: f64, dt: f64) -> Vec<f64> {
        (0..=((t_end / dt) as usize)).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn classifies_synthetic_patterns() {
        let opts = ClassifyOptions::default();
        let ts = times(100.0, 0.1);
        let still = synthetic(3.0, 97, &ts, |_, _| 5.0);
        let r = classify_attractor(&still, &opts).unwrap();
        assert_eq!(r.kind, AttractorKind::Equilibrium);
        assert!((r.mean_state[1] - 5.0).abs() < 1e-12);

        let homog = synthetic(3.0, 97, &ts, |t, _| 5.0 + 0.3 * (2.0 * PI * t / 2.2).sin());
        let r = classify_attractor(&homog, &opts).unwrap();
        assert_eq!(r.kind, AttractorKind::HomogeneousOscillation);
        assert!((r.period.unwrap() - 2.2).abs() < 0.01 * 2.2);

        let wave = synthetic(3.0, 97, &ts, |t, x| 5.0 + 0.3 * (2.0 * PI * t / 2.0).sin() * (x / 3.0).cos());
        let r = classify_attractor(&wave, &opts).unwrap();
        assert_eq!(r.kind, AttractorKind::InhomogeneousOscillation);
        assert_eq!(r.dominant_mode, 1);

        let mixed = synthetic(3.0, 97, &ts, |t, x| {
            5.0 + (0.3 + 0.1 * (2.0 * x / 3.0).cos()) * (2.0 * PI * t / 2.0).sin()
        });
        let r = classify_attractor(&mixed, &opts).unwrap();
        assert_eq!(r.kind, AttractorKind::MixedOscillation);
    }

    #[test]
    fn too_few_cycles_is_inconclusive() {
        let ts = times(10.0, 0.05);
        let slow = synthetic(3.0, 97, &ts, |t, _| 5.0 + 0.3 * (2.0 * PI * t / 4.0).sin());
        let r = classify_attractor(&slow, &ClassifyOptions::default()).unwrap();
        assert_eq!(r.kind, AttractorKind::Inconclusive);
        assert!(r.period.is_none());
    }

    #[test]
    fn classification_survives_subsampling() {
        let ts = times(200.0, 0.05);
        let wave = synthetic(3.0, 97, &ts, |t, x| 5.0 + 0.2 * (2.0 * PI * t / 2.16).sin() * (x).cos());
        let opts = ClassifyOptions::default();
        let a = classify_attractor(&wave, &opts).unwrap();
        let b = classify_attractor(&wave.subsample(2), &opts).unwrap();
        assert_eq!(a.kind, b.kind);
        assert_eq!(a.dominant_mode, 3);
        assert_eq!(a.dominant_mode, b.dominant_mode);
        assert!((a.period.unwrap() - b.period.unwrap()).abs() < 0.01 * a.period.unwrap());
    }

    #[test]
    fn short_trajectory_is_rejected() {
        let tr = synthetic(3.0, 33, &[0.0, 1.0], |_, _| 1.0);
        assert!(matches!(
            classify_attractor(&tr, &ClassifyOptions::default()),
            Err(Error::EmptyTrajectory)
        ));
    }

    #[test]
    fn table_rows_in_sweep() {
        let base = ModelParams::baseline();
        let r = sweep_d2(&base, &[0.2, 0.4, 2.5, 5.5, 40.0], 1e-3).unwrap();
        let n0: Vec<usize> = r.points.iter().map(|p| p.n0).collect();
        assert_eq!(n0, vec![0, 3, 2, 1, 0]);
        let base = ModelParams::baseline().with_l(2.0);
        let r = sweep_d2(&base, &[0.4, 5.5], 1e-3).unwrap();
        assert_eq!(r.points[0].n0, 2);
        assert!((r.points[0].omega_star - 0.5381).abs() < 1e-3);
        assert_eq!(r.points[1].n0, 1);
        assert!((r.points[1].omega_star - 0.5245).abs() < 1e-3);
    }

    #[test]
    fn single_point_sweep_matches_first_hopf() {
        let base = ModelParams::baseline();
        let r = sweep_d2(&base, &[5.5], 1e-3).unwrap();
        let fh = spectral::first_hopf(&base.with_d2(5.5)).unwrap();
        assert_eq!(r.points[0].n0, fh.n0);
        assert_eq!(r.points[0].omega_star, fh.omega_star);
        assert_eq!(r.points[0].omega0[fh.n0], Some(fh.omega_star));
    }

    #[test]
    fn boundaries_are_bracketed() {
        let base = ModelParams::baseline();
        let r = sweep_d2(&base, &log_grid(1e-3, 1e3, 60), 1e-4).unwrap();
        assert_eq!(r.mode_sequence().first(), Some(&0));
        assert_eq!(r.mode_sequence().last(), Some(&0));
        for b in &r.boundaries {
            let lo = spectral::first_hopf(&base.with_d2(b.bracket[0])).unwrap().n0;
            let hi = spectral::first_hopf(&base.with_d2(b.bracket[1])).unwrap().n0;
            assert_eq!((lo, hi), (b.from, b.to));
            assert!(b.bracket[1] / b.bracket[0] - 1.0 <= 1e-4);
        }
        let leave = r.boundaries.first().unwrap();
        assert_eq!(leave.from, 0);
        let back = r.boundaries.last().unwrap();
        assert_eq!(back.to, 0);
    }

    #[test]
    fn sweep_csv_layout() {
        let r = sweep_d2(&ModelParams::baseline(), &[0.2, 40.0], 1e-3).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("d2,omega_0,omega_1,omega_2,omega_3,omega_4,n0"));
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn verification_needs_endemic_state() {
        let p = ModelParams::baseline().with_alpha(0.85);
        assert!(matches!(
            verify_prediction(&p, 0.02, &VerifyOptions::default()),
            Err(Error::NoEndemicEquilibrium { .. })
        ));
    }

    #[test]
    fn zero_margin_is_at_criticality() {
        let r = verify_prediction(&ModelParams::baseline(), 0.0, &VerifyOptions::default()).unwrap();
        assert_eq!(r.status, Outcome::Inconclusive);
        assert_eq!(r.note.as_deref(), Some("at criticality, inconclusive"));
        assert!(r.above.is_none());
    }
}
