//! `hopfcole bifurcation`: entropy-landscape sweep over temperature for the
//! two-cluster default, with fold-event localization.

use crate::config::FileConfig;
use crate::report::{fmt, Report};
use crate::util::{rng_for, two_cluster_support};
use clap::Args;
use hopfcole_core::landscape::{bifurcation_sweep, default_seed_grid};
use hopfcole_core::SupportSet;
use std::path::Path;

#[derive(Debug, Args)]
pub struct BifurcationArgs {
    /// Lowest temperature in the sweep.
    #[arg(long)]
    pub eps_min: Option<f64>,
    /// Highest temperature; defaults to 3 diam^2 / (4t).
    #[arg(long)]
    pub eps_max: Option<f64>,
    /// Sweep levels (geometric spacing).
    #[arg(long)]
    pub eps_count: Option<usize>,
    /// Seed lattice density per axis.
    #[arg(long)]
    pub seeds_per_axis: Option<usize>,
    /// Diffusion time.
    #[arg(long)]
    pub t: Option<f64>,
    /// Load the support from CSV instead of the seeded two-cluster layout.
    #[arg(long)]
    pub support: Option<std::path::PathBuf>,
}

pub fn run(seed: u64, out: &Path, file: &FileConfig, args: &BifurcationArgs) -> Result<bool, String> {
    let t = file.resolve("t", args.t, 0.5f64)?;
    let eps_min = file.resolve("eps_min", args.eps_min, 0.05f64)?;
    let eps_count = file.resolve("eps_count", args.eps_count, 20usize)?;
    let seeds_per_axis = file.resolve("seeds_per_axis", args.seeds_per_axis, 21usize)?;

    let support = match &args.support {
        Some(path) => SupportSet::read_csv(path).map_err(|e| e.to_string())?,
        None => two_cluster_support(&mut rng_for(seed, 30)),
    };
    let diam = support.diameter();
    let eps_max = file.resolve("eps_max", args.eps_max, 3.0 * diam * diam / (4.0 * t))?;

    let mut report = Report::new("bifurcation", out).map_err(|e| e.to_string())?;
    report.config("seed", seed);
    report.config("t", t);
    report.config("eps_min", eps_min);
    report.config("eps_max", eps_max);
    report.config("eps_count", eps_count);
    report.config("seeds_per_axis", seeds_per_axis);
    report.config("atoms", support.len());
    report.config("diameter", diam);

    report
        .write_text("bifurcation_support.csv", &support.to_csv())
        .map_err(|e| e.to_string())?;

    let eps_grid: Vec<f64> = (0..eps_count)
        .map(|i| eps_min * (eps_max / eps_min).powf(i as f64 / (eps_count - 1) as f64))
        .collect();
    let seeds = default_seed_grid(&support, seeds_per_axis);
    let trace = bifurcation_sweep(&support, t, &eps_grid, &seeds).map_err(|e| e.to_string())?;

    // per-level trace (degenerate-classified points count toward the total
    // but have no column of their own)
    let mut rows = Vec::new();
    for (level, &eps) in trace.eps.iter().enumerate() {
        let (n_min, n_saddle, n_max, _) = trace.type_counts(level);
        rows.push(vec![
            fmt(eps),
            trace.counts[level].to_string(),
            n_min.to_string(),
            n_saddle.to_string(),
            n_max.to_string(),
            trace
                .min_abs_saddle_eig(level)
                .map(fmt)
                .unwrap_or_default(),
        ]);
    }
    report
        .write_csv(
            "bifurcation_trace.csv",
            "eps,count,n_min,n_saddle,n_max,min_abs_saddle_eig",
            &rows,
        )
        .map_err(|e| e.to_string())?;

    // per-level critical points
    let mut rows = Vec::new();
    for (level, points) in trace.per_eps.iter().enumerate() {
        for p in points {
            let mut row = vec![fmt(trace.eps[level])];
            row.extend(p.location.iter().map(|&c| fmt(c)));
            row.push(p.morse_type.as_str().to_string());
            row.push(fmt(p.entropy));
            row.push(fmt(p.min_eigenvalue));
            rows.push(row);
        }
    }
    let header = if support.dim() == 1 {
        "eps,x0,type,entropy,min_eig"
    } else {
        "eps,x0,x1,type,entropy,min_eig"
    };
    report
        .write_csv("bifurcation_critical_points.csv", header, &rows)
        .map_err(|e| e.to_string())?;

    // fold events
    let mut rows = Vec::new();
    for ev in &trace.fold_events {
        rows.push(vec![
            fmt(ev.eps_before),
            fmt(ev.eps_after),
            ev.count_before.to_string(),
            ev.count_after.to_string(),
            fmt(ev.eps_interval.0),
            fmt(ev.eps_interval.1),
            ev.pre_drop_min_abs_saddle_eig.map(fmt).unwrap_or_default(),
            ev.near_fold_min_abs_saddle_eig.map(fmt).unwrap_or_default(),
        ]);
    }
    report
        .write_csv(
            "bifurcation_folds.csv",
            "eps_before,eps_after,count_before,count_after,interval_lo,interval_hi,pre_drop_min_abs_saddle_eig,near_fold_min_abs_saddle_eig",
            &rows,
        )
        .map_err(|e| e.to_string())?;

    let nonincreasing = trace.counts.windows(2).all(|w| w[1] <= w[0]);
    report.check(
        "counts_nonincreasing",
        nonincreasing,
        format!("counts {:?}", trace.counts),
    );
    report.check(
        "ends_at_one",
        *trace.counts.last().unwrap() == 1,
        format!("final count {}", trace.counts.last().unwrap()),
    );
    let fold_signature = trace.fold_signature_holds(0.25);
    report.check(
        "fold_signature",
        fold_signature,
        format!(
            "{} fold events; refined pre-fold saddle eigenvalues dip below 0.25x the sweep scale: {fold_signature}",
            trace.fold_events.len()
        ),
    );

    report.finish().map_err(|e| e.to_string())
}
