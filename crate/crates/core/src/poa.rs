//! Price of anarchy across the equilibrium family.
//!
//! For a fixed full-duplex probability the admissible half-duplex prices form
//! the band returned by [`design_costs`]. Along that band the equilibrium
//! half-duplex probability is affine in the price and the aggregate
//! throughput is a concave quadratic in it, so the worst equilibrium sits at
//! one end of the band.

use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::Result;
use crate::game::design_costs;
use crate::model::DerivedConstants;
use crate::throughput::{aggregate_throughput, maximize_throughput, SymmetricAccessProfile};

/// Ratio of optimal to worst-equilibrium throughput.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Poa {
    Finite(f64),
    /// The worst equilibrium delivers nothing.
    Infinite,
}

impl Poa {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Poa::Infinite)
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            Poa::Finite(v) => Some(*v),
            Poa::Infinite => None,
        }
    }

    /// Infinite maps to `f64::INFINITY`.
    pub fn as_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for Poa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Poa::Finite(v) => write!(f, "{v}"),
            Poa::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Poa {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Poa::Finite(v) => s.serialize_f64(*v),
            Poa::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoaPoint {
    pub pi_tfd: f64,
    /// Worst aggregate throughput among equilibria with this `pi_tfd`.
    pub t_min: f64,
    /// Half-duplex price of the worst equilibrium.
    pub c_hd_worst: f64,
    pub t_star: f64,
    pub poa: Poa,
}

/// Aggregate throughput of the equilibrium with full-duplex probability
/// `pi_tfd` at price `c_hd` (assumed admissible).
fn equilibrium_throughput(constants: &DerivedConstants, pi_tfd: f64, c_hd: f64) -> f64 {
    let phi = constants.phi();
    let hd_loss = 2.0 - constants.iota_c() - constants.iota_f();
    let fd_loss = 1.0 - constants.iota_cf();
    let pi_thd = ((phi - c_hd) / phi - pi_tfd * fd_loss) / hd_loss;
    let pi_thd = pi_thd.clamp(0.0, (1.0 - pi_tfd) / 2.0);
    let profile = SymmetricAccessProfile::new(pi_thd, pi_tfd).expect("clamped into the region");
    aggregate_throughput(constants, &profile)
}

/// Worst equilibrium throughput at `pi_tfd`, with the price attaining it.
pub fn min_mne_throughput_at(constants: &DerivedConstants, pi_tfd: f64) -> Result<(f64, f64)> {
    let band = design_costs(constants, pi_tfd)?;
    let phi = constants.phi();
    let hd_loss = 2.0 - constants.iota_c() - constants.iota_f();
    let fd_loss = 1.0 - constants.iota_cf();
    let mut prices = vec![band.c_hd_min, band.c_hd_max];
    // stationary point in pi_thd mapped back to a price
    let spare = 1.0 - fd_loss * pi_tfd;
    let h_star = (spare - hd_loss * constants.beta() * pi_tfd) / (2.0 * hd_loss);
    let c_star = phi * (1.0 - fd_loss * pi_tfd - hd_loss * h_star);
    if band.contains(c_star) {
        prices.push(c_star);
    }
    let worst = prices
        .into_iter()
        .map(|c| (equilibrium_throughput(constants, pi_tfd, c), c))
        .fold((f64::INFINITY, f64::NAN), |a, b| if b.0 < a.0 { b } else { a });
    Ok(worst)
}

pub fn min_mne_throughput(constants: &DerivedConstants, pi_tfd: f64) -> Result<f64> {
    min_mne_throughput_at(constants, pi_tfd).map(|(t, _)| t)
}

fn point(constants: &DerivedConstants, pi_tfd: f64, t_star: f64) -> Result<PoaPoint> {
    let (t_min, c_hd_worst) = min_mne_throughput_at(constants, pi_tfd)?;
    let poa = if t_min <= 0.0 {
        Poa::Infinite
    } else {
        Poa::Finite(t_star / t_min)
    };
    Ok(PoaPoint {
        pi_tfd,
        t_min,
        c_hd_worst,
        t_star,
        poa,
    })
}

pub fn price_of_anarchy(constants: &DerivedConstants, pi_tfd: f64) -> Result<PoaPoint> {
    let t_star = maximize_throughput(constants)?.t_star;
    point(constants, pi_tfd, t_star)
}

/// Evaluates [`price_of_anarchy`] over a grid of `pi_tfd` values, in order.
pub fn poa_sweep(constants: &DerivedConstants, pi_tfd: &[f64]) -> Result<Vec<PoaPoint>> {
    let t_star = maximize_throughput(constants)?.t_star;
    pi_tfd.par_iter().map(|&p| point(constants, p, t_star)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::mne_family;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn silent_equilibrium_diverges() {
        let c = DerivedConstants::new(0.8, 0.1, 0.2, 0.7).unwrap();
        let pt = price_of_anarchy(&c, 0.0).unwrap();
        assert_eq!(pt.t_min, 0.0);
        assert!(pt.poa.is_infinite());
        assert_eq!(pt.poa.to_string(), "inf");
        assert_eq!(pt.c_hd_worst, 0.8);
    }

    #[test]
    fn all_full_duplex_is_unique() {
        let c = DerivedConstants::new(0.8, 0.1, 0.2, 0.7).unwrap();
        let t = min_mne_throughput(&c, 1.0).unwrap();
        assert!(close(t, 4.0 * 0.7 * 0.8 * 0.02, 1e-15));
    }

    #[test]
    fn endpoints_match_price_sweep() {
        let c = DerivedConstants::new(1.0, 0.1, 0.2, 0.7).unwrap();
        let band = design_costs(&c, 0.5).unwrap();
        let steps = ((band.c_hd_max - band.c_hd_min) / 1e-4).floor() as usize;
        let mut sweep = f64::INFINITY;
        for k in 0..=steps {
            let c_hd = (band.c_hd_min + 1e-4 * k as f64).min(band.c_hd_max);
            let pi = mne_family(&c, c_hd).unwrap().strategy_at(0.5).unwrap();
            let prof = SymmetricAccessProfile::try_from(&pi).unwrap();
            sweep = sweep.min(aggregate_throughput(&c, &prof));
        }
        let pi = mne_family(&c, band.c_hd_max).unwrap().strategy_at(0.5).unwrap();
        let prof = SymmetricAccessProfile::try_from(&pi).unwrap();
        sweep = sweep.min(aggregate_throughput(&c, &prof));
        let t = min_mne_throughput(&c, 0.5).unwrap();
        assert!(close(t, sweep, 1e-8), "{t} vs {sweep}");
        assert!(close(t, 0.204, 1e-9));
    }

    #[test]
    fn sweep_preserves_order() {
        let c = DerivedConstants::new(1.0, 0.6, 0.7, 0.9).unwrap();
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let pts = poa_sweep(&c, &grid).unwrap();
        for (p, g) in pts.iter().zip(&grid) {
            assert_eq!(p.pi_tfd, *g);
            if let Some(v) = p.poa.finite() {
                assert!(v >= 1.0);
            }
        }
        assert!(design_costs(&c, 1.5).is_err());
        assert!(price_of_anarchy(&c, 1.5).is_err());
    }
}
