//! Invariant suite run by `fdnash verify`.

use std::fmt::Write as _;

use fdnash::game::{
    cost_band, mne_family, solve_equilibrium, verify_mne, CostPolicy, IndifferenceSystem, EQUILIBRIUM_TOL,
};
use fdnash::model::Strategy;
use fdnash::montecarlo::SimMode;
use fdnash::throughput::{aggregate_from_profiles, aggregate_throughput, optimal_mne, SymmetricAccessProfile};
use fdnash::DerivedConstants;
use serde::Serialize;

use crate::commands::run_simulation;
use crate::error::Result;
use crate::output::Table;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{tag} {}: {}", c.name, c.detail);
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(s, "{} checks, {failed} failed", self.checks.len());
        s
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(vec!["check", "passed", "detail"]);
        for c in &self.checks {
            t.push(vec![c.name.to_string(), c.passed.to_string(), c.detail.clone()]);
        }
        t
    }
}

/// Equilibrium residuals on a grid over the price band and each family.
fn indifference(c: &DerivedConstants) -> Check {
    let (lo, hi) = cost_band(c);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for i in 0..=39 {
        let c_hd = lo + (hi - lo) * i as f64 / 39.0;
        let fam = match mne_family(c, c_hd) {
            Ok(f) => f,
            Err(e) => {
                return Check {
                    name: "indifference",
                    passed: false,
                    detail: format!("c_hd = {c_hd}: {e}"),
                }
            }
        };
        let costs = fam.costs();
        for j in 0..=24 {
            let p = fam.pi_tfd_min + (fam.pi_tfd_max - fam.pi_tfd_min) * j as f64 / 24.0;
            match fam.strategy_at(p) {
                Ok(pi) => worst = worst.max(verify_mne(c, &pi, &costs).max_abs()),
                Err(_) => worst = f64::INFINITY,
            }
            count += 1;
        }
    }
    Check {
        name: "indifference",
        passed: worst <= EQUILIBRIUM_TOL,
        detail: format!("{count} equilibria, worst residual {worst:.3e}"),
    }
}

/// Closed-form aggregate against the sum over all profile pairs.
fn identity(c: &DerivedConstants) -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let h = 0.5 * i as f64 / 99.0;
        for j in 0..100 {
            let p = (1.0 - 2.0 * h) * j as f64 / 99.0;
            let prof = SymmetricAccessProfile::new(h, p).expect("inside the region");
            let gap = (aggregate_throughput(c, &prof) - aggregate_from_profiles(c, &prof.to_mixed())).abs();
            worst = worst.max(gap);
        }
    }
    Check {
        name: "aggregate-identity",
        passed: worst <= 1e-12,
        detail: format!("10000 profiles, worst gap {worst:.3e}"),
    }
}

/// Unproportional prices leave the indifference system inconsistent.
fn rank(c: &DerivedConstants) -> Check {
    let (lo, hi) = cost_band(c);
    let mut bad = Vec::new();
    for i in 0..=20 {
        let c_hd = lo + (hi - lo) * i as f64 / 20.0;
        let fd = 2.0 * c.beta() * c_hd;
        let costs = CostPolicy::proportional(c, c_hd).expect("non-negative price");
        let sys = IndifferenceSystem::new(c, &costs);
        if sys.rank() != 3 || !sys.is_consistent() {
            bad.push(format!("proportional c_hd = {c_hd}"));
        }
        for gap in [1e-3, -1e-3, 0.1] {
            let Ok(costs) = CostPolicy::new(c_hd, fd + gap) else {
                continue;
            };
            let sys = IndifferenceSystem::new(c, &costs);
            if sys.rank() != 3 || sys.augmented_rank() != 4 || solve_equilibrium(c, &costs).is_ok() {
                bad.push(format!("c_hd = {c_hd}, c_fd = {}", fd + gap));
            }
        }
    }
    Check {
        name: "rank",
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            "rank 3 everywhere; consistent iff c_fd = 2 beta c_hd".into()
        } else {
            format!("unexpected rank at {}", bad.join("; "))
        },
    }
}

/// Reports whether the scenario's own prices admit equilibria.
fn scenario_costs(c: &DerivedConstants, costs: &CostPolicy) -> Check {
    let sys = IndifferenceSystem::new(c, costs);
    let status = match solve_equilibrium(c, costs) {
        Ok(f) => format!("consistent, pi_tfd in [{:.6}, {:.6}]", f.pi_tfd_min, f.pi_tfd_max),
        Err(e) => format!("infeasible ({e})"),
    };
    Check {
        name: "equilibrium-consistency",
        // the rank argument must agree with the solver either way
        passed: sys.rank() == 3 && sys.is_consistent() == costs.is_proportional(c),
        detail: format!(
            "c_hd = {}, c_fd = {}: rank {}/{}, {status}",
            costs.c_hd,
            costs.c_fd,
            sys.rank(),
            sys.augmented_rank()
        ),
    }
}

fn grid_max(c: &DerivedConstants) -> f64 {
    let step = 1e-3;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=500 {
        let h = i as f64 * step;
        let top = 1.0 - 2.0 * h;
        let m = (top / step).floor() as usize;
        for p in (0..=m).map(|j| j as f64 * step).chain([top.max(0.0)]) {
            let prof = SymmetricAccessProfile::new(h, p).expect("inside the region");
            best = best.max(aggregate_throughput(c, &prof));
        }
    }
    best
}

/// Closed-form optimum against grid search, and its enabling prices.
fn optimiser(c: &DerivedConstants) -> Check {
    let opt = match optimal_mne(c) {
        Ok(o) => o,
        Err(e) => {
            return Check {
                name: "optimum",
                passed: false,
                detail: e.to_string(),
            }
        }
    };
    let g = grid_max(c);
    let gap = opt.t_star - g;
    let residual = opt
        .enabling_c_hd
        .and_then(|c_hd| CostPolicy::proportional(c, c_hd).ok())
        .map(|costs| verify_mne(c, &opt.profile.to_mixed(), &costs).max_abs())
        .unwrap_or(f64::INFINITY);
    Check {
        name: "optimum",
        passed: gap >= -1e-12 && gap <= 1e-5 * c.phi() && residual <= EQUILIBRIUM_TOL,
        detail: format!(
            "T* = {:.9} on {}, grid {:.9}, equilibrium residual {residual:.3e}",
            opt.t_star,
            opt.boundary.label(),
            g
        ),
    }
}

/// All sixteen fixed profiles: throughput and conditional success rates
/// within `sigmas` standard errors.
fn monte_carlo(scenario: &Scenario, n_slots: u64, seed: u64, sigmas: f64) -> Result<Check> {
    let free = CostPolicy::new(0.0, 0.0).expect("zero prices");
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let mut checks = 0;
    for (i, s1) in Strategy::ALL.into_iter().enumerate() {
        for (j, s2) in Strategy::ALL.into_iter().enumerate() {
            let mode = SimMode::Fixed { s1, s2 };
            let r = run_simulation(scenario, mode, free, n_slots, seed.wrapping_add((4 * i + j) as u64))?;
            let mut zs = vec![(format!("T({s1},{s2})"), r.aggregate.z_score)];
            for s in r.success.iter().filter(|s| s.own == s1 && s.opp == s2) {
                zs.push((format!("p({}|{s1},{s2})", s.receiver), s.rate.z_score));
            }
            for (name, z) in zs {
                checks += 1;
                worst = worst.max(z.abs());
                if z.abs() > sigmas {
                    failures.push(format!("{name} z = {z:.2}"));
                }
            }
        }
    }
    Ok(Check {
        name: "monte-carlo",
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{checks} estimates at {n_slots} slots, worst |z| = {worst:.2}")
        } else {
            format!("{checks} estimates, outside {sigmas} sigma: {}", failures.join(", "))
        },
    })
}

pub fn run_verify(scenario: &Scenario, n_slots: u64, seed: u64) -> Result<VerifyReport> {
    let c = &scenario.constants;
    let mut checks = vec![indifference(c), identity(c), rank(c)];
    if let Some(costs) = scenario.costs() {
        checks.push(scenario_costs(c, &costs));
    }
    checks.push(optimiser(c));
    checks.push(monte_carlo(scenario, n_slots, seed, 3.0)?);
    Ok(VerifyReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}
