//! The two-player access game: per-action throughputs and utilities,
//! dominance screening, and the one-parameter family of symmetric mixed
//! equilibria that exists when the full-duplex price is tied to the
//! half-duplex one by `c_fd = 2 * beta * c_hd`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DerivedConstants, Strategy};

/// Components closer than this to 0 or 1 are snapped.
pub const PMF_SNAP: f64 = 1e-12;

/// Absolute utility tolerance used to certify an equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;

/// Relative tolerance on `c_fd = 2 beta c_hd`.
pub const PROPORTIONALITY_TOL: f64 = 1e-12;

/// Probability mass over `{w, tA, tB, tfd}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PmfRepr", into = "PmfRepr")]
pub struct MixedStrategy {
    probs: [f64; 4],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PmfRepr {
    pi_w: f64,
    #[serde(rename = "pi_tA")]
    pi_ta: f64,
    #[serde(rename = "pi_tB")]
    pi_tb: f64,
    pi_tfd: f64,
}

impl TryFrom<PmfRepr> for MixedStrategy {
    type Error = Error;

    fn try_from(r: PmfRepr) -> Result<Self> {
        MixedStrategy::new(r.pi_w, r.pi_ta, r.pi_tb, r.pi_tfd)
    }
}

impl From<MixedStrategy> for PmfRepr {
    fn from(s: MixedStrategy) -> Self {
        let [pi_w, pi_ta, pi_tb, pi_tfd] = s.probs;
        PmfRepr {
            pi_w,
            pi_ta,
            pi_tb,
            pi_tfd,
        }
    }
}

impl MixedStrategy {
    pub fn new(pi_w: f64, pi_ta: f64, pi_tb: f64, pi_tfd: f64) -> Result<Self> {
        Self::from_array([pi_w, pi_ta, pi_tb, pi_tfd])
    }

    pub fn from_array(mut probs: [f64; 4]) -> Result<Self> {
        for (p, s) in probs.iter_mut().zip(Strategy::ALL) {
            if !p.is_finite() || *p < -PMF_SNAP || *p > 1.0 + PMF_SNAP {
                return Err(Error::InvalidStrategy(format!("pi_{s} = {p} is not a probability")));
            }
            *p = snap(*p);
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_SNAP {
            return Err(Error::InvalidStrategy(format!("components sum to {total}, not 1")));
        }
        Ok(MixedStrategy { probs })
    }

    pub fn pure(s: Strategy) -> Self {
        let mut probs = [0.0; 4];
        probs[s.index()] = 1.0;
        MixedStrategy { probs }
    }

    pub fn uniform() -> Self {
        MixedStrategy { probs: [0.25; 4] }
    }

    /// Fair profile with `pi_tA = pi_tB = pi_thd`.
    pub fn symmetric(pi_thd: f64, pi_tfd: f64) -> Result<Self> {
        Self::new(1.0 - 2.0 * pi_thd - pi_tfd, pi_thd, pi_thd, pi_tfd)
    }

    pub fn prob(&self, s: Strategy) -> f64 {
        self.probs[s.index()]
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.probs
    }

    pub fn pi_w(&self) -> f64 {
        self.probs[0]
    }

    pub fn pi_ta(&self) -> f64 {
        self.probs[1]
    }

    pub fn pi_tb(&self) -> f64 {
        self.probs[2]
    }

    pub fn pi_tfd(&self) -> f64 {
        self.probs[3]
    }

    /// Iterates `(action, probability)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (Strategy, f64)> + '_ {
        Strategy::ALL.into_iter().zip(self.probs)
    }
}

fn snap(p: f64) -> f64 {
    if p.abs() <= PMF_SNAP {
        0.0
    } else if (p - 1.0).abs() <= PMF_SNAP {
        1.0
    } else {
        p
    }
}

/// Per-action prices. Waiting is free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostPolicy {
    pub c_hd: f64,
    pub c_fd: f64,
}

impl CostPolicy {
    pub fn new(c_hd: f64, c_fd: f64) -> Result<Self> {
        for (name, v) in [("c_hd", c_hd), ("c_fd", c_fd)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "costs must be finite and >= 0",
                });
            }
        }
        Ok(CostPolicy { c_hd, c_fd })
    }

    /// The only pricing under which equilibria exist: `c_fd = 2 beta c_hd`.
    pub fn proportional(constants: &DerivedConstants, c_hd: f64) -> Result<Self> {
        Self::new(c_hd, 2.0 * constants.beta() * c_hd)
    }

    pub fn cost(&self, s: Strategy) -> f64 {
        match s {
            Strategy::Wait => 0.0,
            Strategy::TransmitA | Strategy::TransmitB => self.c_hd,
            Strategy::FullDuplex => self.c_fd,
        }
    }

    pub fn is_proportional(&self, constants: &DerivedConstants) -> bool {
        let target = 2.0 * constants.beta() * self.c_hd;
        (self.c_fd - target).abs() <= PROPORTIONALITY_TOL * target.abs().max(self.c_fd.abs()).max(f64::MIN_POSITIVE)
    }
}

/// Expected packets per slot delivered inside a pair playing `s` against an
/// opponent mixing with `opp`.
pub fn action_throughput(constants: &DerivedConstants, opp: &MixedStrategy, s: Strategy) -> f64 {
    let phi = constants.phi();
    let (ic, jf, icf) = (constants.iota_c(), constants.iota_f(), constants.iota_cf());
    let [w, ta, tb, fd] = opp.as_array();
    match s {
        Strategy::Wait => 0.0,
        Strategy::TransmitA => phi * (w + jf * ta + ic * tb + icf * fd),
        Strategy::TransmitB => phi * (w + ic * ta + jf * tb + icf * fd),
        Strategy::FullDuplex => constants.beta() * phi * (2.0 * w + (ic + jf) * (ta + tb) + 2.0 * icf * fd),
    }
}

/// `U(s) = tau(s) - c(s)`.
pub fn utility(constants: &DerivedConstants, opp: &MixedStrategy, s: Strategy, costs: &CostPolicy) -> f64 {
    action_throughput(constants, opp, s) - costs.cost(s)
}

/// Strict-dominance screening between pure actions.
///
/// Utilities are affine in the opponent p.m.f., so `a` is strictly dominated
/// by `b` exactly when `U(a) < U(b)` against each of the four pure opponent
/// actions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    dominated_by: [Vec<Strategy>; 4],
}

impl DominanceReport {
    /// Actions strictly dominating `s` (empty when none).
    pub fn dominators(&self, s: Strategy) -> &[Strategy] {
        &self.dominated_by[s.index()]
    }

    pub fn is_dominated(&self, s: Strategy) -> bool {
        !self.dominated_by[s.index()].is_empty()
    }

    pub fn any_dominated(&self) -> bool {
        Strategy::ALL.iter().any(|&s| self.is_dominated(s))
    }
}

pub fn dominance_report(constants: &DerivedConstants, costs: &CostPolicy) -> DominanceReport {
    // payoff[a][o]: utility of action a against pure opponent action o
    let payoff: Vec<[f64; 4]> = Strategy::ALL
        .iter()
        .map(|&a| Strategy::ALL.map(|o| utility(constants, &MixedStrategy::pure(o), a, costs)))
        .collect();
    let dominated_by = Strategy::ALL.map(|a| {
        Strategy::ALL
            .into_iter()
            .filter(|&b| b != a && (0..4).all(|o| payoff[a.index()][o] < payoff[b.index()][o]))
            .collect()
    });
    DominanceReport { dominated_by }
}

/// Half-duplex price range `[phi iota_c iota_f, phi]` outside which some
/// action is strictly dominated.
pub fn cost_band(constants: &DerivedConstants) -> (f64, f64) {
    (constants.phi() * constants.iota_cf(), constants.phi())
}

/// The symmetric equilibria available at a given half-duplex price,
/// parameterised by their full-duplex probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumFamily {
    #[serde(skip)]
    constants: DerivedConstants,
    pub c_hd: f64,
    pub c_fd: f64,
    pub pi_tfd_min: f64,
    pub pi_tfd_max: f64,
}

impl EquilibriumFamily {
    pub fn costs(&self) -> CostPolicy {
        CostPolicy {
            c_hd: self.c_hd,
            c_fd: self.c_fd,
        }
    }

    pub fn contains(&self, pi_tfd: f64) -> bool {
        pi_tfd >= self.pi_tfd_min - PMF_SNAP && pi_tfd <= self.pi_tfd_max + PMF_SNAP
    }

    /// Family member with the given full-duplex probability.
    pub fn strategy_at(&self, pi_tfd: f64) -> Result<MixedStrategy> {
        if !self.contains(pi_tfd) {
            return Err(Error::OutOfBand {
                pi_tfd,
                min: self.pi_tfd_min,
                max: self.pi_tfd_max,
            });
        }
        let pi_tfd = pi_tfd.clamp(self.pi_tfd_min, self.pi_tfd_max);
        let (pi_w, pi_thd) = equilibrium_components(&self.constants, self.c_hd, pi_tfd);
        MixedStrategy::from_array([pi_w, pi_thd, pi_thd, pi_tfd].map(|p| if p < 0.0 { 0.0 } else { p }))
    }
}

/// `(pi_w, pi_thd)` from the affine equilibrium map, without range checks.
fn equilibrium_components(constants: &DerivedConstants, c_hd: f64, pi_tfd: f64) -> (f64, f64) {
    let phi = constants.phi();
    let (ic, jf, icf) = (constants.iota_c(), constants.iota_f(), constants.iota_cf());
    let hd_loss = 2.0 - ic - jf;
    let pi_w = pi_tfd * (ic + jf - 2.0 * icf) / hd_loss + (2.0 * c_hd - phi * (ic + jf)) / (phi * hd_loss);
    let pi_thd = -pi_tfd * (1.0 - icf) / hd_loss + (phi - c_hd) / (phi * hd_loss);
    (pi_w, pi_thd)
}

fn check_band(constants: &DerivedConstants, c_hd: f64) -> Result<f64> {
    let (lo, hi) = cost_band(constants);
    if !c_hd.is_finite() || c_hd < lo - PMF_SNAP || c_hd > hi + PMF_SNAP {
        return Err(Error::NoEquilibrium(format!(
            "c_hd = {c_hd} lies outside [phi iota_c iota_f, phi] = [{lo}, {hi}]"
        )));
    }
    Ok(c_hd.clamp(lo, hi))
}

/// Feasible full-duplex probabilities at half-duplex price `c_hd`, with the
/// implied `c_fd = 2 beta c_hd`.
pub fn mne_family(constants: &DerivedConstants, c_hd: f64) -> Result<EquilibriumFamily> {
    let c_hd = check_band(constants, c_hd)?;
    let phi = constants.phi();
    let (ic, jf, icf) = (constants.iota_c(), constants.iota_f(), constants.iota_cf());
    let lower = (phi * (ic + jf) - 2.0 * c_hd) / (phi * (ic + jf - 2.0 * icf));
    let upper = (phi - c_hd) / (phi * (1.0 - icf));
    let pi_tfd_min = lower.clamp(0.0, 1.0);
    let pi_tfd_max = upper.clamp(0.0, 1.0).max(pi_tfd_min);
    Ok(EquilibriumFamily {
        constants: *constants,
        c_hd,
        c_fd: 2.0 * constants.beta() * c_hd,
        pi_tfd_min,
        pi_tfd_max,
    })
}

/// The equilibrium with full-duplex probability `pi_tfd` at price `c_hd`.
pub fn mne_strategy(constants: &DerivedConstants, c_hd: f64, pi_tfd: f64) -> Result<MixedStrategy> {
    mne_family(constants, c_hd)?.strategy_at(pi_tfd)
}

/// Utilities of all four actions against an opponent playing `pi`, plus the
/// pricing consistency flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MneResiduals {
    /// `U(w), U(tA), U(tB), U(tfd)`; all vanish at a mixed equilibrium.
    pub utilities: [f64; 4],
    pub proportional_costs: bool,
}

impl MneResiduals {
    pub fn max_abs(&self) -> f64 {
        self.utilities.iter().fold(0.0, |m, u| m.max(u.abs()))
    }

    pub fn is_equilibrium(&self, tol: f64) -> bool {
        self.max_abs() <= tol
    }
}

pub fn verify_mne(constants: &DerivedConstants, pi: &MixedStrategy, costs: &CostPolicy) -> MneResiduals {
    MneResiduals {
        utilities: Strategy::ALL.map(|s| utility(constants, pi, s, costs)),
        proportional_costs: costs.is_proportional(constants),
    }
}

/// The linear system `A pi^T = b^T` that encodes indifference between the
/// three transmitting actions and waiting, plus normalisation.
#[derive(Debug, Clone)]
pub struct IndifferenceSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DMatrix<f64>,
}

/// Relative singular-value cutoff for numerical rank.
pub const RANK_TOL: f64 = 1e-10;

impl IndifferenceSystem {
    pub fn new(constants: &DerivedConstants, costs: &CostPolicy) -> Self {
        let phi = constants.phi();
        let beta = constants.beta();
        let (ic, jf, icf) = (constants.iota_c(), constants.iota_f(), constants.iota_cf());
        #[rustfmt::skip]
        let matrix = DMatrix::from_row_slice(4, 4, &[
            phi,               phi * jf,               phi * ic,               phi * icf,
            phi,               phi * ic,               phi * jf,               phi * icf,
            2.0 * beta * phi,  beta * phi * (ic + jf), beta * phi * (ic + jf), 2.0 * beta * phi * icf,
            1.0,               1.0,                    1.0,                    1.0,
        ]);
        let rhs = DMatrix::from_column_slice(4, 1, &[costs.c_hd, costs.c_hd, costs.c_fd, 1.0]);
        IndifferenceSystem { matrix, rhs }
    }

    pub fn rank(&self) -> usize {
        numerical_rank(self.matrix.clone())
    }

    pub fn augmented_rank(&self) -> usize {
        let aug = DMatrix::from_fn(4, 5, |i, j| if j < 4 { self.matrix[(i, j)] } else { self.rhs[(i, 0)] });
        numerical_rank(aug)
    }

    pub fn is_consistent(&self) -> bool {
        self.augmented_rank() == self.rank()
    }
}

fn numerical_rank(m: DMatrix<f64>) -> usize {
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > RANK_TOL * max).count()
}

/// Equilibrium family for an arbitrary price pair: fails unless `c_hd` is in
/// the band and the indifference system is consistent.
pub fn solve_equilibrium(constants: &DerivedConstants, costs: &CostPolicy) -> Result<EquilibriumFamily> {
    check_band(constants, costs.c_hd)?;
    let system = IndifferenceSystem::new(constants, costs);
    if !system.is_consistent() {
        return Err(Error::NoEquilibrium(format!(
            "indifference system inconsistent (rank {}, augmented rank {}): c_fd = {} but 2 beta c_hd = {}",
            system.rank(),
            system.augmented_rank(),
            costs.c_fd,
            2.0 * constants.beta() * costs.c_hd
        )));
    }
    mne_family(constants, costs.c_hd)
}

/// Range of half-duplex prices whose equilibrium family contains a target
/// full-duplex probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBand {
    pub target_pi_tfd: f64,
    pub c_hd_min: f64,
    pub c_hd_max: f64,
    pub beta: f64,
}

impl CostBand {
    pub fn is_degenerate(&self) -> bool {
        self.c_hd_max - self.c_hd_min <= PMF_SNAP
    }

    pub fn c_fd_min(&self) -> f64 {
        2.0 * self.beta * self.c_hd_min
    }

    pub fn c_fd_max(&self) -> f64 {
        2.0 * self.beta * self.c_hd_max
    }

    pub fn contains(&self, c_hd: f64) -> bool {
        c_hd >= self.c_hd_min && c_hd <= self.c_hd_max
    }
}

pub fn design_costs(constants: &DerivedConstants, target_pi_tfd: f64) -> Result<CostBand> {
    if !(0.0..=1.0).contains(&target_pi_tfd) {
        return Err(Error::InvalidParameter {
            name: "target_pi_tfd",
            value: target_pi_tfd,
            reason: "must lie in [0, 1]",
        });
    }
    let phi = constants.phi();
    let (ic, jf, icf) = (constants.iota_c(), constants.iota_f(), constants.iota_cf());
    let (band_lo, band_hi) = cost_band(constants);
    // pi_w >= 0 and pi_thd >= 0 solved for c_hd
    let lower = (phi * (ic + jf) - target_pi_tfd * phi * (ic + jf - 2.0 * icf)) / 2.0;
    let upper = phi - target_pi_tfd * phi * (1.0 - icf);
    let c_hd_min = lower.max(band_lo);
    let c_hd_max = upper.min(band_hi).max(c_hd_min);
    Ok(CostBand {
        target_pi_tfd,
        c_hd_min,
        c_hd_max,
        beta: constants.beta(),
    })
}
