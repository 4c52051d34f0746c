//! One function per subcommand. Each returns the rendered document.

use fdnash::game::{
    action_throughput, design_costs, mne_family, mne_strategy, solve_equilibrium, verify_mne, CostPolicy,
    MixedStrategy, MneResiduals,
};
use fdnash::model::{success_probability, Role, Strategy};
use fdnash::montecarlo::{simulate, Channel, SimConfig, SimMode};
use fdnash::poa::poa_sweep;
use fdnash::throughput::{aggregate_from_profile_pair, regime_map, RegimePoint};
use fdnash::{DerivedConstants, Error};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::output::{fmt_num, to_json, Format, Table};
use crate::scenario::{Scenario, Sweep};

fn render<T: Serialize>(format: Format, table: impl FnOnce() -> Table, doc: &T) -> Result<String> {
    match format {
        Format::Csv => table().to_csv(),
        Format::Json => to_json(doc),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionRow {
    pub c_hd: f64,
    pub pi_tfd_min: Option<f64>,
    pub pi_tfd_max: Option<f64>,
    pub feasible: bool,
}

pub fn region_rows(constants: &DerivedConstants, sweep: &Sweep) -> Result<Vec<RegionRow>> {
    sweep
        .points()
        .into_iter()
        .map(|c_hd| match mne_family(constants, c_hd) {
            Ok(f) => Ok(RegionRow {
                c_hd,
                pi_tfd_min: Some(f.pi_tfd_min),
                pi_tfd_max: Some(f.pi_tfd_max),
                feasible: true,
            }),
            Err(Error::NoEquilibrium(_)) => Ok(RegionRow {
                c_hd,
                pi_tfd_min: None,
                pi_tfd_max: None,
                feasible: false,
            }),
            Err(e) => Err(CliError::Config(e.to_string())),
        })
        .collect()
}

/// Equilibrium region in `(c_hd, pi_tfd)`. Infeasible prices are rows with
/// `nan` bounds, not errors.
pub fn cmd_region(scenario: &Scenario, sweep: &Sweep, format: Format) -> Result<String> {
    let rows = region_rows(&scenario.constants, sweep)?;
    let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_else(|| "nan".into());
    render(
        format,
        || {
            let mut t = Table::new(vec!["c_hd", "pi_tfd_min", "pi_tfd_max", "feasible"]);
            for r in &rows {
                t.push(vec![
                    fmt_num(r.c_hd),
                    opt(r.pi_tfd_min),
                    opt(r.pi_tfd_max),
                    r.feasible.to_string(),
                ]);
            }
            t
        },
        &rows,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Solution {
    pub strategy: MixedStrategy,
    pub costs: CostPolicy,
    pub residuals: MneResiduals,
}

/// Uses `c_hd` when given; otherwise the scenario's costs, which must be
/// proportional for an equilibrium to exist.
pub fn solve(scenario: &Scenario, c_hd: Option<f64>, pi_tfd: f64) -> Result<Solution> {
    let c = &scenario.constants;
    let c_hd = match (c_hd, scenario.costs()) {
        (Some(v), _) => v,
        (None, Some(costs)) => solve_equilibrium(c, &costs)?.c_hd,
        (None, None) => return Err(CliError::Config("give --c-hd or `costs` in the scenario".into())),
    };
    let strategy = mne_strategy(c, c_hd, pi_tfd)?;
    let costs = CostPolicy::proportional(c, c_hd)?;
    let residuals = verify_mne(c, &strategy, &costs);
    Ok(Solution {
        strategy,
        costs,
        residuals,
    })
}

pub fn cmd_solve(scenario: &Scenario, c_hd: Option<f64>, pi_tfd: f64, format: Format) -> Result<String> {
    let s = solve(scenario, c_hd, pi_tfd)?;
    render(
        format,
        || {
            let mut t = Table::new(vec!["pi_w", "pi_tA", "pi_tB", "pi_tfd", "c_hd", "c_fd", "max_residual"]);
            let mut row: Vec<String> = s.strategy.as_array().into_iter().map(fmt_num).collect();
            row.extend([s.costs.c_hd, s.costs.c_fd, s.residuals.max_abs()].map(fmt_num));
            t.push(row);
            t
        },
        &s,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignRow {
    pub pi_tfd: f64,
    pub c_hd_min: f64,
    pub c_hd_max: f64,
    pub c_fd_min: f64,
    pub c_fd_max: f64,
}

/// Price bands inducing each target full-duplex probability.
pub fn cmd_design(scenario: &Scenario, targets: &[f64], format: Format) -> Result<String> {
    let rows = targets
        .iter()
        .map(|&p| {
            let b = design_costs(&scenario.constants, p).map_err(|e| CliError::Config(e.to_string()))?;
            Ok(DesignRow {
                pi_tfd: p,
                c_hd_min: b.c_hd_min,
                c_hd_max: b.c_hd_max,
                c_fd_min: b.c_fd_min(),
                c_fd_max: b.c_fd_max(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    render(
        format,
        || {
            let mut t = Table::new(vec!["pi_tfd", "c_hd_min", "c_hd_max", "c_fd_min", "c_fd_max"]);
            for r in &rows {
                t.push(
                    [r.pi_tfd, r.c_hd_min, r.c_hd_max, r.c_fd_min, r.c_fd_max]
                        .map(fmt_num)
                        .to_vec(),
                );
            }
            t
        },
        &rows,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimumRow {
    pub iota_c: f64,
    pub iota_f: f64,
    pub boundary_label: &'static str,
    pub pi_w: f64,
    pub pi_thd: f64,
    pub pi_tfd: f64,
    pub t_star: f64,
    pub enabling_c_hd: f64,
}

impl OptimumRow {
    fn new(p: &RegimePoint, scale: f64) -> Self {
        let o = &p.optimum;
        OptimumRow {
            iota_c: p.iota_c,
            iota_f: p.iota_f,
            boundary_label: o.boundary.label(),
            pi_w: o.profile.pi_w(),
            pi_thd: o.profile.pi_thd(),
            pi_tfd: o.profile.pi_tfd(),
            t_star: o.t_star / scale,
            enabling_c_hd: o.enabling_c_hd.unwrap_or(f64::NAN) / scale,
        }
    }
}

/// Optimal symmetric profiles, one row per interference pair. Values are
/// divided by `phi` unless `absolute` is set.
pub fn optimum_rows(scenario: &Scenario, beta: Option<f64>, absolute: bool) -> Result<Vec<OptimumRow>> {
    let c = &scenario.constants;
    let beta = beta.unwrap_or(c.beta());
    let grid = match scenario.file.sweeps.iota {
        Some(g) => g.points(),
        None => vec![(c.iota_c(), c.iota_f())],
    };
    let map = regime_map(&grid, c.phi(), beta);
    if let Some(s) = map.skipped.first() {
        if scenario.file.sweeps.iota.is_none() {
            return Err(CliError::Config(s.reason.clone()));
        }
        for s in &map.skipped {
            eprintln!("warning: skipped ({}, {}): {}", s.iota_c, s.iota_f, s.reason);
        }
    }
    let scale = if absolute { 1.0 } else { c.phi() };
    Ok(map.points.iter().map(|p| OptimumRow::new(p, scale)).collect())
}

pub fn cmd_optimum(scenario: &Scenario, beta: Option<f64>, absolute: bool, format: Format) -> Result<String> {
    let rows = optimum_rows(scenario, beta, absolute)?;
    let header = if absolute {
        vec![
            "iota_c",
            "iota_f",
            "boundary_label",
            "pi_w",
            "pi_thd",
            "pi_tfd",
            "t_star",
            "enabling_c_hd",
        ]
    } else {
        vec![
            "iota_c",
            "iota_f",
            "boundary_label",
            "pi_w",
            "pi_thd",
            "pi_tfd",
            "t_star_over_phi",
            "enabling_c_hd_over_phi",
        ]
    };
    render(
        format,
        || {
            let mut t = Table::new(header);
            for r in &rows {
                let mut row = vec![fmt_num(r.iota_c), fmt_num(r.iota_f), r.boundary_label.to_string()];
                row.extend([r.pi_w, r.pi_thd, r.pi_tfd, r.t_star, r.enabling_c_hd].map(fmt_num));
                t.push(row);
            }
            t
        },
        &rows,
    )
}

pub fn cmd_poa(scenario: &Scenario, sweep: &Sweep, format: Format) -> Result<String> {
    let pts = poa_sweep(&scenario.constants, &sweep.points()).map_err(|e| CliError::Config(e.to_string()))?;
    render(
        format,
        || {
            let mut t = Table::new(vec!["pi_tfd", "t_min", "t_star", "poa"]);
            for p in &pts {
                t.push(vec![
                    fmt_num(p.pi_tfd),
                    fmt_num(p.t_min),
                    fmt_num(p.t_star),
                    fmt_num(p.poa.as_f64()),
                ]);
            }
            t
        },
        &pts,
    )
}

/// Simulated value next to its closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Compared {
    pub estimate: f64,
    pub std_err: f64,
    pub analytic: f64,
    pub z_score: f64,
}

impl Compared {
    fn new(estimate: f64, std_err: f64, analytic: f64) -> Self {
        let gap = estimate - analytic;
        let z_score = if std_err > 0.0 {
            gap / std_err
        } else if gap.abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY.copysign(gap)
        };
        Compared {
            estimate,
            std_err,
            analytic,
            z_score,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionReport {
    pub pair: usize,
    pub action: Strategy,
    pub slots: u64,
    pub throughput: Compared,
    pub utility: f64,
    pub analytic_utility: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuccessReport {
    pub receiver: Role,
    pub own: Strategy,
    pub opp: Strategy,
    pub trials: u64,
    pub successes: u64,
    pub rate: Compared,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub n_slots: u64,
    pub pi1: MixedStrategy,
    pub pi2: MixedStrategy,
    pub costs: CostPolicy,
    pub pair_throughput: [Compared; 2],
    pub aggregate: Compared,
    pub actions: Vec<ActionReport>,
    pub success: Vec<SuccessReport>,
}

pub fn run_simulation(
    scenario: &Scenario,
    mode: SimMode,
    costs: CostPolicy,
    n_slots: u64,
    seed: u64,
) -> Result<SimulationReport> {
    let c = &scenario.constants;
    let channel = match scenario.params() {
        Some(p) => Channel::Physical(*p),
        None => Channel::Constants(*c),
    };
    let config = SimConfig {
        channel,
        mode,
        n_slots,
        seed,
    };
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let est = simulate(&config, &costs)?;
    let (pi1, pi2) = match mode {
        SimMode::Mixed { pi1, pi2 } => (pi1, pi2),
        SimMode::Fixed { s1, s2 } => (MixedStrategy::pure(s1), MixedStrategy::pure(s2)),
    };
    let opp = [pi2, pi1];
    let own = [pi1, pi2];
    let pair_analytic = |k: usize| -> f64 { own[k].iter().map(|(s, p)| p * action_throughput(c, &opp[k], s)).sum() };
    let pair_throughput = [0, 1].map(|k| {
        let m = est.pair_throughput[k];
        Compared::new(m.mean, m.std_err, pair_analytic(k))
    });
    let aggregate = Compared::new(
        est.aggregate.mean,
        est.aggregate.std_err,
        aggregate_from_profile_pair(c, &pi1, &pi2),
    );
    let actions = est
        .actions
        .iter()
        .map(|a| {
            let analytic = action_throughput(c, &opp[a.pair], a.action);
            ActionReport {
                pair: a.pair,
                action: a.action,
                slots: a.throughput.samples,
                throughput: Compared::new(a.throughput.mean, a.throughput.std_err, analytic),
                utility: a.utility,
                analytic_utility: analytic - costs.cost(a.action),
            }
        })
        .collect();
    let success = est
        .success
        .iter()
        .map(|r| {
            let p = success_probability(c, r.receiver, r.own, r.opp)?;
            Ok(SuccessReport {
                receiver: r.receiver,
                own: r.own,
                opp: r.opp,
                trials: r.trials,
                successes: r.successes,
                rate: Compared::new(r.rate, r.std_err, p),
            })
        })
        .collect::<std::result::Result<Vec<_>, Error>>()?;
    Ok(SimulationReport {
        seed,
        n_slots: est.n_slots,
        pi1,
        pi2,
        costs,
        pair_throughput,
        aggregate,
        actions,
        success,
    })
}

pub fn cmd_simulate(
    scenario: &Scenario,
    mode: SimMode,
    costs: CostPolicy,
    n_slots: u64,
    seed: u64,
    format: Format,
) -> Result<String> {
    let r = run_simulation(scenario, mode, costs, n_slots, seed)?;
    render(
        format,
        || {
            let mut t = Table::new(vec!["quantity", "estimate", "std_err", "analytic", "z_score"]);
            let mut push = |name: String, c: &Compared| {
                t.push(vec![
                    name,
                    fmt_num(c.estimate),
                    fmt_num(c.std_err),
                    fmt_num(c.analytic),
                    fmt_num(c.z_score),
                ])
            };
            push("aggregate".into(), &r.aggregate);
            for (k, c) in r.pair_throughput.iter().enumerate() {
                push(format!("pair{}", k + 1), c);
            }
            for a in &r.actions {
                push(format!("pair{}:{}", a.pair + 1, a.action), &a.throughput);
            }
            for s in &r.success {
                push(format!("success:{}:{}:{}", s.receiver, s.own, s.opp), &s.rate);
            }
            t
        },
        &r,
    )
}

/// Parses `w,tA,tB,tfd` probabilities.
pub fn parse_pmf(text: &str) -> Result<MixedStrategy> {
    let v: Vec<f64> = text
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::Config(format!("p.m.f. `{text}`: {e}")))?;
    let arr: [f64; 4] = v
        .try_into()
        .map_err(|_| CliError::Config(format!("p.m.f. `{text}` needs four comma-separated values")))?;
    MixedStrategy::from_array(arr).map_err(|e| CliError::Config(format!("p.m.f. `{text}`: {e}")))
}

/// Parses a fixed profile such as `tfd,w`.
pub fn parse_profile(text: &str) -> Result<(Strategy, Strategy)> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [a, b] = parts[..] else {
        return Err(CliError::Config(format!(
            "profile `{text}` needs two actions, e.g. `tfd,w`"
        )));
    };
    let parse = |s: &str| s.parse::<Strategy>().map_err(|e| CliError::Config(e.to_string()));
    Ok((parse(a)?, parse(b)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> Scenario {
        Scenario::from_json(r#"{"params": {"alpha": 3.5, "theta": 4, "kappa": 1, "snr_ref": 10, "beta": 0.7}}"#)
            .unwrap()
    }

    #[test]
    fn region_pinch_points() {
        let s = reference();
        let c = s.constants;
        let top = region_rows(&c, &Sweep::new(c.phi(), c.phi(), 1.0).unwrap()).unwrap();
        assert_eq!(top[0].pi_tfd_min, Some(0.0));
        assert_eq!(top[0].pi_tfd_max, Some(0.0));
        let lo = c.phi() * c.iota_cf();
        let bottom = region_rows(&c, &Sweep::new(lo, lo, 1.0).unwrap()).unwrap();
        assert!((bottom[0].pi_tfd_min.unwrap() - 1.0).abs() < 1e-9);
        assert!((bottom[0].pi_tfd_max.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn region_marks_infeasible_prices() {
        let s = reference();
        let rows = region_rows(&s.constants, &Sweep::new(0.05, 0.70, 0.01).unwrap()).unwrap();
        for r in rows {
            assert_eq!(r.feasible, (0.0612387..=0.67032).contains(&r.c_hd), "{r:?}");
        }
    }

    #[test]
    fn solve_uses_scenario_costs() {
        let mut s = reference();
        s.file.costs = Some(CostPolicy::new(0.3, 0.42).unwrap());
        let sol = solve(&s, None, 0.3).unwrap();
        assert!((sol.strategy.pi_w() - 0.283298).abs() < 1e-6);
        s.file.costs = Some(CostPolicy::new(0.3, 0.5).unwrap());
        assert!(matches!(solve(&s, None, 0.3), Err(CliError::NoEquilibrium(_))));
        assert!(matches!(solve(&s, Some(0.9), 0.3), Err(CliError::NoEquilibrium(_))));
    }

    #[test]
    fn simulate_reports_closed_forms() {
        let s = reference();
        let free = CostPolicy::new(0.0, 0.0).unwrap();
        let mode = SimMode::Fixed {
            s1: Strategy::FullDuplex,
            s2: Strategy::Wait,
        };
        let r = run_simulation(&s, mode, free, 50_000, 3).unwrap();
        assert!((r.aggregate.analytic - 0.938448).abs() < 1e-6);
        assert!(r.aggregate.z_score.abs() <= 3.0);
    }

    #[test]
    fn parses_cli_profiles() {
        assert_eq!(parse_profile("tfd, w").unwrap(), (Strategy::FullDuplex, Strategy::Wait));
        assert!(parse_profile("tfd").is_err());
        assert_eq!(parse_pmf("0.25,0.25,0.25,0.25").unwrap(), MixedStrategy::uniform());
        assert!(parse_pmf("0.5,0.5").is_err());
        assert!(parse_pmf("0.5,0.5,0.5,0.5").is_err());
    }
}
