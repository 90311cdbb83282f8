use crate::elliptic::eigen::principal_eigenvalue;
use crate::elliptic::operator::FlowProblem;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::fit::{least_squares, line};
use crate::sparse::SparseLu;

#[derive(Clone, Debug, Default)]
pub struct EvolveOptions {
    /// Time step; `None` picks 4/(100 μ₁) clamped to [1e−5, 1e−2].
    pub dt: Option<f64>,
    pub t_final: f64,
    /// Times at which fields are stored (first step at or after each).
    pub checkpoints: Vec<f64>,
}

/// Exponential fit ‖ψ(t)‖ ≈ prefactor · e^{−rate t}.
#[derive(Clone, Copy, Debug)]
pub struct DecayFit {
    pub rate: f64,
    pub prefactor: f64,
}

/// Time series of an implicit-Euler run of ψ_t + Lψ = 0.
#[derive(Clone, Debug)]
pub struct ParabolicRun {
    pub dt: f64,
    pub times: Vec<f64>,
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    pub linf: Vec<f64>,
    /// Smallest nodal value seen over the whole run.
    pub min_value: f64,
    pub checkpoints: Vec<(f64, ScalarField)>,
    pub initial: ScalarField,
    /// L² decay fit over the last three quarters of the run.
    pub l2_fit: Option<DecayFit>,
}

impl ParabolicRun {
    /// Exponential fit of the L² norm over `[t0, t1]`.
    pub fn l2_decay(&self, t0: f64, t1: f64) -> Option<DecayFit> {
        fit_window(&self.times, &self.l2, t0, t1)
    }

    /// True when ‖ψ‖₁ never increased from one step to the next.
    pub fn l1_non_increasing(&self) -> bool {
        self.l1.windows(2).all(|w| w[1] <= w[0])
    }
}

fn fit_window(t: &[f64], v: &[f64], t0: f64, t1: f64) -> Option<DecayFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(v)
        .filter(|(t, v)| **t >= t0 && **t <= t1 && **v > 0.0)
        .map(|(t, v)| (*t, v.ln()))
        .unzip();
    if xs.len() < 2 {
        return None;
    }
    let (a, b) = line(&xs, &ys)?;
    Some(DecayFit {
        rate: -b,
        prefactor: a.exp(),
    })
}

/// Implicit Euler for ψ_t − Δψ + A u·∇ψ = 0 with zero Dirichlet data.
pub fn evolve(problem: &FlowProblem<'_>, initial: &ScalarField, opts: &EvolveOptions) -> Result<ParabolicRun> {
    let grid = problem.grid;
    let op = problem.operator()?;
    let dt = match opts.dt {
        Some(dt) => dt,
        None => {
            let mu = principal_eigenvalue(&op)?.eigenvalue;
            (4.0 / mu / 100.0).clamp(1e-5, 1e-2)
        }
    };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    if !(opts.t_final >= 0.0) {
        return Err(Error::InvalidInput(format!("t_final must be non-negative, got {}", opts.t_final)));
    }
    let step = SparseLu::new(&op.matrix().scaled_plus_identity(dt, 1.0))?;
    let mut psi = initial.to_unknowns(grid)?;
    let start = ScalarField::from_unknowns(grid, &psi)?;
    let area = grid.cell_area();
    let norms = |x: &[f64]| {
        let l1 = x.iter().map(|v| v.abs()).sum::<f64>() * area;
        let l2 = (x.iter().map(|v| v * v).sum::<f64>() * area).sqrt();
        let li = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (l1, l2, li)
    };
    let nsteps = (opts.t_final / dt - 1e-9).ceil().max(0.0) as usize;
    let mut run = ParabolicRun {
        dt,
        times: Vec::with_capacity(nsteps + 1),
        l1: Vec::with_capacity(nsteps + 1),
        l2: Vec::with_capacity(nsteps + 1),
        linf: Vec::with_capacity(nsteps + 1),
        min_value: psi.iter().copied().fold(f64::INFINITY, f64::min),
        checkpoints: Vec::new(),
        initial: start,
        l2_fit: None,
    };
    let mut pending: Vec<f64> = opts.checkpoints.clone();
    pending.sort_by(f64::total_cmp);
    let mut next_ck = 0;
    let mut record = |run: &mut ParabolicRun, t: f64, x: &[f64]| -> Result<()> {
        let (a, b, c) = norms(x);
        run.times.push(t);
        run.l1.push(a);
        run.l2.push(b);
        run.linf.push(c);
        run.min_value = run.min_value.min(x.iter().copied().fold(f64::INFINITY, f64::min));
        while next_ck < pending.len() && pending[next_ck] <= t + 1e-12 * dt {
            run.checkpoints.push((t, ScalarField::from_unknowns(grid, x)?));
            next_ck += 1;
        }
        Ok(())
    };
    record(&mut run, 0.0, &psi)?;
    for k in 1..=nsteps {
        psi = step.solve(&psi)?;
        record(&mut run, k as f64 * dt, &psi)?;
    }
    let t_end = nsteps as f64 * dt;
    run.l2_fit = fit_window(&run.times, &run.l2, 0.25 * t_end, t_end);
    Ok(run)
}

/// Fitted envelope ‖ψ(t)‖∞ ≤ C e^{−αt} t^{−r} ‖f‖_p.
#[derive(Clone, Copy, Debug)]
pub struct DecayProfile {
    pub c: f64,
    pub alpha: f64,
    pub r: f64,
    /// RMS residual of the log-space fit.
    pub residual: f64,
}

/// Log-space least squares over the checkpoints of a run; C is raised so
/// the envelope dominates every checkpoint.
pub fn decay_profile(run: &ParabolicRun, p: f64) -> Result<DecayProfile> {
    let pts: Vec<(f64, f64)> = run
        .checkpoints
        .iter()
        .filter(|(t, _)| *t > 0.0)
        .map(|(t, f)| (*t, f.norm_inf()))
        .collect();
    if pts.len() < 5 {
        return Err(Error::InsufficientDecay(format!(
            "need at least 5 checkpoints with t > 0, have {}; add checkpoints or extend t_final",
            pts.len()
        )));
    }
    let first = pts[0].1;
    let last = pts[pts.len() - 1].1;
    if !(last > 0.0 && first / last >= 10.0) {
        return Err(Error::InsufficientDecay(format!(
            "sup norm fell only from {first:.3e} to {last:.3e}; extend t_final"
        )));
    }
    let fp = run.initial.norm_lp(p);
    if !(fp > 0.0) {
        return Err(Error::InsufficientDecay("initial data has zero norm".into()));
    }
    let rows: Vec<Vec<f64>> = pts.iter().map(|(t, _)| vec![1.0, -t, -t.ln()]).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, v)| (v / fp).ln()).collect();
    let coef = least_squares(&rows, &ys).ok_or_else(|| Error::InsufficientDecay("degenerate checkpoint times".into()))?;
    let resid: Vec<f64> = rows
        .iter()
        .zip(&ys)
        .map(|(row, y)| y - (coef[0] + coef[1] * row[1] + coef[2] * row[2]))
        .collect();
    let rms = (resid.iter().map(|e| e * e).sum::<f64>() / resid.len() as f64).sqrt();
    let lift = resid.iter().copied().fold(0.0f64, f64::max);
    Ok(DecayProfile {
        c: (coef[0] + lift).exp(),
        alpha: coef[1],
        r: coef[2],
        residual: rms,
    })
}
