//! Fixed configurations of the three figure bundles.

use cubic_core::{Envelope, Noise, PerturbationSpec, Schedule, StoppingRule};

use crate::csvio::Thinning;
use crate::CliError;

pub const FIG1_X0: [f64; 3] = [1.1, 0.5, -1.1];
pub const FIG2_X0: [f64; 3] = [2.5, 0.5, -2.5];
pub const FIG3_PATHS: u64 = 15;

/// One trajectory of a figure bundle.
#[derive(Debug, Clone)]
pub struct FigureRun {
    pub file_stem: String,
    pub x0: f64,
    pub schedule: Schedule,
    pub pert: PerturbationSpec,
    pub rule: StoppingRule,
    pub horizon: u64,
    pub trajectory_index: u64,
    pub thinning: Thinning,
}

/// Variants of each figure, in output order.
pub fn variants(figure: u8) -> Result<&'static [&'static str], CliError> {
    match figure {
        1 => Ok(&["summable", "nonsummable"]),
        2 => Ok(&["unstopped", "stopped"]),
        3 => Ok(&["beta1.5", "beta3", "beta5"]),
        _ => Err(CliError::Config(format!("no figure {figure}; choose 1, 2 or 3"))),
    }
}

fn comp_rho(beta: f64, seed: u64) -> PerturbationSpec {
    PerturbationSpec::new(Envelope::CompRho { k: 1, beta }, Noise::GaussianStd, seed).unwrap()
}

/// Runs of `figure`, restricted to `variant` when given. `horizon` replaces
/// the per-figure default.
pub fn figure_runs(
    figure: u8,
    variant: Option<&str>,
    seed: u64,
    horizon: Option<u64>,
) -> Result<Vec<FigureRun>, CliError> {
    let all = variants(figure)?;
    let chosen: Vec<&str> = match variant {
        None => all.to_vec(),
        Some(v) if all.contains(&v) => vec![v],
        Some(v) => {
            return Err(CliError::Config(format!(
                "figure {figure} has no variant `{v}`; choose one of {}",
                all.join(", ")
            )))
        }
    };
    let mut runs = Vec::new();
    for v in chosen {
        match figure {
            1 => {
                let (p, default_horizon) = if v == "summable" { (10.0, 1000) } else { (0.1, 10_000) };
                let schedule = Schedule::power_law(p, 0)?;
                for (i, &x0) in FIG1_X0.iter().enumerate() {
                    runs.push(FigureRun {
                        file_stem: format!("fig1_{v}_x{i}"),
                        x0,
                        schedule: schedule.clone(),
                        pert: PerturbationSpec::zero(),
                        rule: StoppingRule::None,
                        horizon: horizon.unwrap_or(default_horizon),
                        trajectory_index: 0,
                        thinning: Thinning::All,
                    });
                }
            }
            2 => {
                let rule = if v == "stopped" { StoppingRule::FreezeAtN4Keep } else { StoppingRule::None };
                for (i, &x0) in FIG2_X0.iter().enumerate() {
                    runs.push(FigureRun {
                        file_stem: format!("fig2_{v}_x{i}"),
                        x0,
                        schedule: Schedule::shifted_super_exp(1)?,
                        pert: comp_rho(0.5, seed),
                        rule,
                        horizon: horizon.unwrap_or(2000),
                        trajectory_index: 0,
                        thinning: Thinning::All,
                    });
                }
            }
            _ => {
                let beta: f64 = v.trim_start_matches("beta").parse().unwrap();
                let horizon = horizon.unwrap_or(10_000_000);
                let thinning = if horizon > 100_000 {
                    Thinning::LogSpaced { dense: 1000, per_decade: 100 }
                } else {
                    Thinning::All
                };
                for j in 0..FIG3_PATHS {
                    runs.push(FigureRun {
                        file_stem: format!("fig3_{v}_p{j:02}"),
                        x0: 2.5,
                        schedule: Schedule::shifted_super_exp(1)?,
                        pert: comp_rho(beta, seed),
                        rule: StoppingRule::FreezeAtN4Keep,
                        horizon,
                        trajectory_index: j,
                        thinning,
                    });
                }
            }
        }
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_sizes() {
        assert_eq!(figure_runs(1, None, 0, None).unwrap().len(), 6);
        assert_eq!(figure_runs(2, Some("stopped"), 0, None).unwrap().len(), 3);
        let fig3 = figure_runs(3, None, 0, None).unwrap();
        assert_eq!(fig3.len(), 45);
        assert!(fig3.iter().all(|r| r.horizon == 10_000_000 && r.rule == StoppingRule::FreezeAtN4Keep));
    }

    #[test]
    fn unknown_figure_or_variant() {
        assert!(figure_runs(4, None, 0, None).is_err());
        assert!(figure_runs(1, Some("stopped"), 0, None).is_err());
    }
}
