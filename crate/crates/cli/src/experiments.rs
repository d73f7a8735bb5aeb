//! Experiment drivers: deterministic per-cell chains, fanned out with rayon
//! and merged in grid order.

use std::path::Path;

use anyhow::{bail, Result};
use pdmp_core::{
    doubly_adaptive_step, ess, hmc_step, mh_pdmp_step, nuts_step_exact, refresh_velocity, simulate,
    skeleton_to_string, ApproxScheme, DynamicsKind, HMCConfig, KineticState, MHConfig, NutsConfig,
    RunMetrics, StepPolicy, Target,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::output::{write_chain_csv, write_funnel_csv, write_summary_csv, FunnelRow, SummaryRow};
use crate::{CommonOpts, Sampler};

/// Counter-based seed split: every grid cell owns stream `stream` of the root
/// seed, so adding or removing cells never perturbs the other cells' draws.
fn cell_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The step policy as the CLI string it parses from.
pub fn step_policy_string(step: StepPolicy) -> String {
    match step {
        StepPolicy::Fixed { h } => format!("fixed:{h}"),
        StepPolicy::Adaptive { tol, .. } => format!("adaptive:{tol}"),
    }
}

/// The single number the step policy is parameterized by (h or tol).
pub fn step_policy_value(step: StepPolicy) -> f64 {
    match step {
        StepPolicy::Fixed { h } => h,
        StepPolicy::Adaptive { tol, .. } => tol,
    }
}

fn kind_of(sampler: Sampler) -> DynamicsKind {
    match sampler {
        Sampler::MhZigzag => DynamicsKind::ZigZag,
        _ => DynamicsKind::Bps,
    }
}

/// One chain of `steps` kernel applications from the origin. The fixed-window
/// Metropolis kernels draw a fresh velocity before every application (the
/// kernel itself conserves too much on symmetric targets to be ergodic
/// alone); the path-growth kernels refresh internally.
fn run_chain(
    sampler: Sampler,
    target: &Target,
    scheme: ApproxScheme,
    horizon: f64,
    steps: usize,
    hmc: HMCConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Vec<f64>>, RunMetrics)> {
    let d = target.dim();
    let mut metrics = RunMetrics::new();
    let mut positions = Vec::with_capacity(steps);
    match sampler {
        Sampler::Hmc => {
            let mut x = vec![0.0; d];
            for _ in 0..steps {
                x = hmc_step(&x, &hmc, target, rng, &mut metrics)?;
                positions.push(x.clone());
            }
        }
        Sampler::MhBps | Sampler::MhZigzag => {
            let kind = kind_of(sampler);
            let cfg = MHConfig::new(horizon, kind, scheme);
            let mut z = KineticState::new(vec![0.0; d], refresh_velocity(kind, d, rng));
            for _ in 0..steps {
                z.v = refresh_velocity(kind, d, rng);
                z = mh_pdmp_step(&z, &cfg, target, rng, &mut metrics)?;
                positions.push(z.x.clone());
            }
        }
        Sampler::NutsExact | Sampler::DoublyAdaptive => {
            let kind = kind_of(sampler);
            let cfg = NutsConfig::new(kind, scheme);
            let mut z = KineticState::new(vec![0.0; d], refresh_velocity(kind, d, rng));
            for _ in 0..steps {
                z = match sampler {
                    Sampler::NutsExact => nuts_step_exact(&z, &cfg, target, rng, &mut metrics)?,
                    _ => doubly_adaptive_step(&z, &cfg, target, rng, &mut metrics)?,
                };
                positions.push(z.x.clone());
            }
        }
    }
    Ok((positions, metrics))
}

fn first_coordinate_ess(positions: &[Vec<f64>]) -> f64 {
    if positions.len() < 10 {
        return f64::NAN;
    }
    let chain: Vec<f64> = positions.iter().map(|x| x[0]).collect();
    ess(&chain).value
}

fn summary_row(
    sampler: Sampler,
    target: &Target,
    common: &CommonOpts,
    positions: &[Vec<f64>],
    metrics: &RunMetrics,
) -> SummaryRow {
    let steps = positions.len() as f64;
    let ess1 = first_coordinate_ess(positions);
    SummaryRow {
        sampler: sampler.label().into(),
        target: format!("{target}"),
        d: target.dim(),
        h: step_policy_value(common.step),
        step_policy: step_policy_string(common.step),
        scheme: format!("{:?}", common.scheme).to_lowercase(),
        horizon: common.horizon,
        steps: positions.len(),
        events: metrics.events,
        gradient_evaluations: metrics.gradient_evaluations,
        acceptance_rate: metrics.acceptance_rate(),
        ess_first_coordinate: ess1,
        ess_per_step: ess1 / steps,
        events_per_step: metrics.events as f64 / steps,
        gradients_per_event: if metrics.events > 0 {
            metrics.gradient_evaluations as f64 / metrics.events as f64
        } else {
            f64::NAN
        },
    }
}

/// Gaussian scaling study: one row per dimension, chains run in parallel and
/// merged in grid order.
pub fn run_gaussian_scaling(
    common: &CommonOpts,
    dims: &[usize],
    sampler: Sampler,
    out: &Path,
) -> Result<()> {
    let scheme = ApproxScheme::new(common.scheme, common.step);
    let rows: Vec<Result<SummaryRow>> = dims
        .par_iter()
        .enumerate()
        .map(|(cell, &d)| {
            let target = Target::Gaussian { d };
            let mut rng = cell_rng(common.seed, cell as u64);
            let hmc = HMCConfig::new(1.0, 1); // unused in this experiment
            let (positions, metrics) = run_chain(
                sampler,
                &target,
                scheme,
                common.horizon,
                common.steps,
                hmc,
                &mut rng,
            )?;
            Ok(summary_row(sampler, &target, common, &positions, &metrics))
        })
        .collect();
    let rows: Vec<SummaryRow> = rows.into_iter().collect::<Result<_>>()?;
    write_summary_csv(out, &rows)
}

/// Funnel comparison: the index-corrected No-U-Turn sampler in the first row,
/// then fixed-step HMC at each requested step size; every row also dumps its
/// x1 chain next to the summary file.
pub fn run_funnel_compare(
    common: &CommonOpts,
    a: f64,
    b: f64,
    epsilons: &[f64],
    leapfrog: usize,
    out: &Path,
) -> Result<()> {
    let target = Target::Funnel { a, b };
    let scheme = ApproxScheme::new(common.scheme, common.step);
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "funnel".into());

    struct Cell {
        sampler: Sampler,
        param: f64,
        label: String,
    }
    let mut cells = vec![Cell {
        sampler: Sampler::DoublyAdaptive,
        param: step_policy_value(common.step),
        label: "doubly-adaptive".into(),
    }];
    for &eps in epsilons {
        cells.push(Cell {
            sampler: Sampler::Hmc,
            param: eps,
            label: format!("hmc-eps{eps}"),
        });
    }

    let rows: Vec<Result<(FunnelRow, Vec<f64>)>> = cells
        .par_iter()
        .enumerate()
        .map(|(cell_idx, cell)| {
            let mut rng = cell_rng(common.seed, cell_idx as u64);
            let hmc = HMCConfig::new(
                if cell.sampler == Sampler::Hmc {
                    cell.param
                } else {
                    1.0
                },
                leapfrog.max(1),
            );
            let (positions, metrics) = run_chain(
                cell.sampler,
                &target,
                scheme,
                common.horizon,
                common.steps,
                hmc,
                &mut rng,
            )?;
            let x1: Vec<f64> = positions.iter().map(|x| x[0]).collect();
            let n = x1.len() as f64;
            let mean = x1.iter().sum::<f64>() / n;
            let std = (x1.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            let row = FunnelRow {
                sampler: cell.sampler.label().into(),
                label: cell.label.clone(),
                param: cell.param,
                steps: positions.len(),
                x1_mean: mean,
                x1_std: std,
                ess_x1: first_coordinate_ess(&positions),
                gradient_evaluations: metrics.gradient_evaluations,
                chain_file: format!("{stem}.{}.chain.csv", cell.label),
            };
            Ok((row, x1))
        })
        .collect();

    let mut summary = Vec::with_capacity(rows.len());
    for row in rows {
        let (row, x1) = row?;
        let chain_path = out.with_file_name(&row.chain_file);
        write_chain_csv(&chain_path, &x1)?;
        summary.push(row);
    }
    write_funnel_csv(out, &summary)
}

/// One long trajectory of the adaptive surrogate process on the funnel, with
/// every gradient-evaluation point recorded: the skeleton (T/I/E lines) is
/// followed by one `G <time> <x1> <x2>` line per evaluation.
pub fn run_trajectory_dump(common: &CommonOpts, a: f64, b: f64, out: &Path) -> Result<()> {
    let target = Target::Funnel { a, b };
    if target.dim() != 2 {
        bail!("trajectory dump is 2-d only");
    }
    let scheme = ApproxScheme::new(common.scheme, common.step);
    let mut rng = cell_rng(common.seed, 0);
    let mut metrics = RunMetrics::with_trace();
    let z0 = KineticState::new(
        vec![0.0, 0.0],
        refresh_velocity(DynamicsKind::Bps, 2, &mut rng),
    );
    let (path, _) = simulate(
        z0,
        common.horizon,
        DynamicsKind::Bps,
        scheme,
        &target,
        &mut rng,
        &mut metrics,
    )?;

    let mut text = String::from("# trajectory.v1\n");
    text.push_str(&skeleton_to_string(&path));
    if let Some(trace) = &metrics.eval_trace {
        for p in trace {
            text.push_str(&format!(
                "G {:?} {:?} {:?}\n",
                p.time, p.position[0], p.position[1]
            ));
        }
    }
    std::fs::write(out, text)?;
    Ok(())
}

/// Single-cell run with the full flag surface; writes a one-row summary.
pub fn run_single(
    common: &CommonOpts,
    target: &Target,
    sampler: Sampler,
    leapfrog: usize,
    out: &Path,
) -> Result<()> {
    let scheme = ApproxScheme::new(common.scheme, common.step);
    let epsilon = match common.step {
        StepPolicy::Fixed { h } => h,
        StepPolicy::Adaptive { .. } => {
            if sampler == Sampler::Hmc {
                bail!("HMC needs --step fixed:<epsilon>");
            }
            1.0
        }
    };
    let hmc = HMCConfig::new(epsilon, leapfrog.max(1));
    let mut rng = cell_rng(common.seed, 0);
    let (positions, metrics) = run_chain(
        sampler,
        target,
        scheme,
        common.horizon,
        common.steps,
        hmc,
        &mut rng,
    )?;
    let row = summary_row(sampler, target, common, &positions, &metrics);
    write_summary_csv(out, &[row])
}
