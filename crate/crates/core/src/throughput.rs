//! Network-wide throughput of the four-node grid and its maximisation over
//! fair access profiles.
//!
//! With `pi_tA = pi_tB = h` and `pi_tfd = p` the aggregate throughput is
//!
//! ```text
//! T(h, p) = 4 phi (h + beta p) (1 - a h - b p),   a = 2 - iota_c - iota_f,
//!                                                  b = 1 - iota_c iota_f,
//! ```
//!
//! over the triangle `h >= 0, p >= 0, 2h + p <= 1`. Its only critical point
//! has `h` and `p` of opposite signs, so the maximum sits on one of the three
//! edges, where `T` is a one-variable quadratic.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::MixedStrategy;
use crate::model::{DerivedConstants, Role, Strategy};

/// Symmetric access profile `(pi_thd, pi_tfd)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetricAccessProfile {
    pi_thd: f64,
    pi_tfd: f64,
}

impl SymmetricAccessProfile {
    const SLACK: f64 = 1e-12;

    pub fn new(pi_thd: f64, pi_tfd: f64) -> Result<Self> {
        let ok = pi_thd.is_finite()
            && pi_tfd.is_finite()
            && pi_thd >= -Self::SLACK
            && pi_tfd >= -Self::SLACK
            && 2.0 * pi_thd + pi_tfd <= 1.0 + Self::SLACK;
        if !ok {
            return Err(Error::InvalidStrategy(format!(
                "(pi_thd, pi_tfd) = ({pi_thd}, {pi_tfd}) lies outside the access region"
            )));
        }
        let pi_thd = pi_thd.clamp(0.0, 0.5);
        let pi_tfd = pi_tfd.clamp(0.0, 1.0 - 2.0 * pi_thd);
        Ok(SymmetricAccessProfile { pi_thd, pi_tfd })
    }

    pub fn pi_thd(&self) -> f64 {
        self.pi_thd
    }

    pub fn pi_tfd(&self) -> f64 {
        self.pi_tfd
    }

    pub fn pi_w(&self) -> f64 {
        (1.0 - 2.0 * self.pi_thd - self.pi_tfd).max(0.0)
    }

    pub fn to_mixed(&self) -> MixedStrategy {
        MixedStrategy::new(self.pi_w(), self.pi_thd, self.pi_thd, self.pi_tfd)
            .expect("profile inside the access region is a valid p.m.f.")
    }
}

impl TryFrom<&MixedStrategy> for SymmetricAccessProfile {
    type Error = Error;

    fn try_from(pi: &MixedStrategy) -> Result<Self> {
        if (pi.pi_ta() - pi.pi_tb()).abs() > Self::SLACK {
            return Err(Error::InvalidStrategy("pi_tA != pi_tB".into()));
        }
        Self::new(pi.pi_ta(), pi.pi_tfd())
    }
}

/// Expected packets per slot delivered in the whole network when the pairs
/// play `s1` and `s2`.
///
/// Each addressed receiver succeeds independently with the probability of
/// [`crate::model::success_probability`], so the count is a plain sum.
pub fn profile_throughput(constants: &DerivedConstants, s1: Strategy, s2: Strategy) -> f64 {
    let per_pair = |own: Strategy, opp: Strategy| -> f64 {
        [Role::A, Role::B]
            .into_iter()
            .filter(|&r| own.receives(r))
            .map(|r| {
                let si = if own.is_full_duplex() { constants.beta() } else { 1.0 };
                si * constants.phi() * constants.interference_factor(r, opp)
            })
            .sum()
    };
    per_pair(s1, s2) + per_pair(s2, s1)
}

/// Closed-form aggregate throughput of a fair profile.
pub fn aggregate_throughput(constants: &DerivedConstants, profile: &SymmetricAccessProfile) -> f64 {
    let q = Quadratic::new(constants);
    q.value(profile.pi_thd, profile.pi_tfd)
}

/// Aggregate throughput as the expectation of [`profile_throughput`] over
/// independent draws of both pairs from `pi`.
pub fn aggregate_from_profiles(constants: &DerivedConstants, pi: &MixedStrategy) -> f64 {
    aggregate_from_profile_pair(constants, pi, pi)
}

/// As [`aggregate_from_profiles`] with a different p.m.f. per pair.
pub fn aggregate_from_profile_pair(constants: &DerivedConstants, pi1: &MixedStrategy, pi2: &MixedStrategy) -> f64 {
    pi1.iter()
        .flat_map(|(s1, p1)| pi2.iter().map(move |(s2, p2)| (s1, s2, p1 * p2)))
        .map(|(s1, s2, p)| p * profile_throughput(constants, s1, s2))
        .sum()
}

/// `T(h, p)` with its coefficients unpacked.
#[derive(Debug, Clone, Copy)]
struct Quadratic {
    scale: f64,
    beta: f64,
    hd_loss: f64,
    fd_loss: f64,
}

impl Quadratic {
    fn new(c: &DerivedConstants) -> Self {
        Quadratic {
            scale: 4.0 * c.phi(),
            beta: c.beta(),
            hd_loss: 2.0 - c.iota_c() - c.iota_f(),
            fd_loss: 1.0 - c.iota_cf(),
        }
    }

    fn attempts(&self, h: f64, p: f64) -> f64 {
        h + self.beta * p
    }

    fn spare(&self, h: f64, p: f64) -> f64 {
        1.0 - self.hd_loss * h - self.fd_loss * p
    }

    fn value(&self, h: f64, p: f64) -> f64 {
        self.scale * self.attempts(h, p) * self.spare(h, p)
    }

    /// Maximum over the segment from `from` to `to` (both `(h, p)`),
    /// returning the maximising point.
    fn max_on_segment(&self, from: (f64, f64), to: (f64, f64)) -> (f64, f64) {
        let (dh, dp) = (to.0 - from.0, to.1 - from.1);
        let (u0, u1) = (self.attempts(from.0, from.1), dh + self.beta * dp);
        let (v0, v1) = (self.spare(from.0, from.1), -self.hd_loss * dh - self.fd_loss * dp);
        let at = |t: f64| (from.0 + t * dh, from.1 + t * dp);
        let mut candidates = vec![0.0, 1.0];
        let curvature = u1 * v1;
        if curvature != 0.0 {
            let t = -(u0 * v1 + u1 * v0) / (2.0 * curvature);
            if t > 0.0 && t < 1.0 {
                candidates.push(t);
            }
        }
        candidates.into_iter().map(at).fold((f64::NAN, f64::NAN), |best, pt| {
            if best.0.is_nan() || self.value(pt.0, pt.1) > self.value(best.0, best.1) {
                pt
            } else {
                best
            }
        })
    }

    /// The unique stationary point of `T` in the `(h, p)` plane, if any.
    fn critical_point(&self) -> Option<(f64, f64)> {
        // grad = 0 forces h + beta p = 0 and a h + b p = 1
        let det = self.fd_loss - self.hd_loss * self.beta;
        if det.abs() < 1e-15 {
            None
        } else {
            let p = 1.0 / det;
            Some((-self.beta * p, p))
        }
    }
}

/// Edge of the fair access region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Boundary {
    /// `pi_tfd = 0`: half-duplex only.
    #[serde(rename = "dR1")]
    NoFullDuplex,
    /// `pi_thd = 0`: wait or full duplex.
    #[serde(rename = "dR2")]
    NoHalfDuplex,
    /// `pi_w = 0`: always transmit.
    #[serde(rename = "dR3")]
    NeverWait,
}

impl Boundary {
    pub const ALL: [Boundary; 3] = [Boundary::NoFullDuplex, Boundary::NoHalfDuplex, Boundary::NeverWait];

    pub fn label(self) -> &'static str {
        match self {
            Boundary::NoFullDuplex => "dR1",
            Boundary::NoHalfDuplex => "dR2",
            Boundary::NeverWait => "dR3",
        }
    }

    /// End points `(pi_thd, pi_tfd)` of the segment.
    fn segment(self) -> ((f64, f64), (f64, f64)) {
        match self {
            Boundary::NoFullDuplex => ((0.0, 0.0), (0.5, 0.0)),
            Boundary::NoHalfDuplex => ((0.0, 0.0), (0.0, 1.0)),
            Boundary::NeverWait => ((0.0, 1.0), (0.5, 0.0)),
        }
    }
}

/// Relative tolerance under which two edge maxima count as a tie.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThroughputOptimum {
    pub profile: SymmetricAccessProfile,
    /// Maximal aggregate throughput.
    pub t_star: f64,
    /// First edge (in `dR1, dR2, dR3` order) attaining the maximum.
    pub boundary: Boundary,
    /// Every edge attaining the maximum, including `boundary`.
    pub ties: Vec<Boundary>,
    /// Whether the maximiser is a corner of the region.
    pub at_vertex: bool,
    /// Half-duplex price making the maximiser an equilibrium; filled in by
    /// [`optimal_mne`].
    pub enabling_c_hd: Option<f64>,
}

impl ThroughputOptimum {
    pub fn enabling_c_fd(&self, beta: f64) -> Option<f64> {
        self.enabling_c_hd.map(|c| 2.0 * beta * c)
    }
}

fn require_beta(constants: &DerivedConstants) -> Result<()> {
    if constants.beta() <= 0.5 {
        Err(Error::InfeasibleBeta(constants.beta()))
    } else {
        Ok(())
    }
}

/// Maximiser of `T` on one edge of the region.
pub fn boundary_maximum(constants: &DerivedConstants, boundary: Boundary) -> (SymmetricAccessProfile, f64) {
    let q = Quadratic::new(constants);
    let (from, to) = boundary.segment();
    let (h, p) = q.max_on_segment(from, to);
    let profile = SymmetricAccessProfile::new(h, p).expect("edge points are inside the region");
    (profile, q.value(profile.pi_thd, profile.pi_tfd))
}

/// Stationary point of the aggregate throughput in the `(pi_thd, pi_tfd)`
/// plane, if the gradient vanishes anywhere.
pub fn interior_critical_point(constants: &DerivedConstants) -> Option<(f64, f64)> {
    Quadratic::new(constants).critical_point()
}

/// Whether `(pi_thd, pi_tfd)` lies strictly inside the region.
pub fn strictly_inside_region(pi_thd: f64, pi_tfd: f64) -> bool {
    pi_thd > 0.0 && pi_tfd > 0.0 && 2.0 * pi_thd + pi_tfd < 1.0
}

pub fn maximize_throughput(constants: &DerivedConstants) -> Result<ThroughputOptimum> {
    require_beta(constants)?;
    let per_edge: Vec<(Boundary, SymmetricAccessProfile, f64)> = Boundary::ALL
        .iter()
        .map(|&b| {
            let (profile, t) = boundary_maximum(constants, b);
            (b, profile, t)
        })
        .collect();
    let best = per_edge.iter().map(|e| e.2).fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOL * best.abs().max(1e-300);
    let ties: Vec<Boundary> = per_edge.iter().filter(|e| best - e.2 <= tol).map(|e| e.0).collect();
    let (boundary, profile, t_star) = *per_edge
        .iter()
        .find(|e| best - e.2 <= tol)
        .expect("at least one edge attains the maximum");
    let at_vertex = [(0.0, 0.0), (0.5, 0.0), (0.0, 1.0)]
        .iter()
        .any(|&(h, p)| (profile.pi_thd - h).abs() <= 1e-12 && (profile.pi_tfd - p).abs() <= 1e-12);
    Ok(ThroughputOptimum {
        profile,
        t_star,
        boundary,
        ties,
        at_vertex,
        enabling_c_hd: None,
    })
}

/// Half-duplex price at which the fair profile is an equilibrium, from the
/// `pi_tA` line of the equilibrium map:
/// `c_hd = phi (1 - (2 - iota_c - iota_f) pi_thd - (1 - iota_c iota_f) pi_tfd)`.
pub fn enabling_cost(constants: &DerivedConstants, profile: &SymmetricAccessProfile) -> f64 {
    let q = Quadratic::new(constants);
    constants.phi() * q.spare(profile.pi_thd, profile.pi_tfd)
}

/// Throughput optimum together with the price that turns it into an
/// equilibrium.
pub fn optimal_mne(constants: &DerivedConstants) -> Result<ThroughputOptimum> {
    let mut opt = maximize_throughput(constants)?;
    opt.enabling_c_hd = Some(enabling_cost(constants, &opt.profile));
    Ok(opt)
}

/// One cell of a regime map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimePoint {
    pub iota_c: f64,
    pub iota_f: f64,
    pub optimum: ThroughputOptimum,
}

/// Grid point that could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedPoint {
    pub iota_c: f64,
    pub iota_f: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct RegimeMap {
    pub points: Vec<RegimePoint>,
    pub skipped: Vec<SkippedPoint>,
}

/// Tabulates [`optimal_mne`] over `(iota_c, iota_f)` pairs at fixed `phi` and
/// `beta`. Output order follows the input grid.
pub fn regime_map(grid: &[(f64, f64)], phi: f64, beta: f64) -> RegimeMap {
    let results: Vec<std::result::Result<RegimePoint, SkippedPoint>> = grid
        .par_iter()
        .map(|&(iota_c, iota_f)| {
            DerivedConstants::new(phi, iota_c, iota_f, beta)
                .and_then(|c| optimal_mne(&c))
                .map(|optimum| RegimePoint {
                    iota_c,
                    iota_f,
                    optimum,
                })
                .map_err(|e| SkippedPoint {
                    iota_c,
                    iota_f,
                    reason: e.to_string(),
                })
        })
        .collect();
    let mut map = RegimeMap::default();
    for r in results {
        match r {
            Ok(p) => map.points.push(p),
            Err(s) => map.skipped.push(s),
        }
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{verify_mne, CostPolicy, EQUILIBRIUM_TOL};
    use crate::model::{derive_constants, NetworkParams};

    fn reference() -> DerivedConstants {
        derive_constants(&NetworkParams::reference(0.7).unwrap()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn closed_form_profiles() {
        use Strategy::*;
        let c = reference();
        let (b, phi, ic, jf) = (c.beta(), c.phi(), c.iota_c(), c.iota_f());
        let t = |s1, s2| profile_throughput(&c, s1, s2);
        assert_eq!(t(Wait, Wait), 0.0);
        assert!(close(t(TransmitA, Wait), phi, 1e-15));
        assert!(close(t(Wait, TransmitB), phi, 1e-15));
        // receivers B_1, B_2 hear the diagonal A node of the other pair
        assert!(close(t(TransmitA, TransmitA), 2.0 * phi * jf, 1e-15));
        assert!(close(t(TransmitB, TransmitB), 2.0 * phi * jf, 1e-15));
        assert!(close(t(TransmitA, TransmitB), 2.0 * phi * ic, 1e-15));
        assert!(close(t(FullDuplex, Wait), 2.0 * b * phi, 1e-15));
        assert!(close(t(FullDuplex, Wait), 0.938448, 1e-6));
        assert!(close(t(FullDuplex, TransmitA), phi * (b * (ic + jf) + ic * jf), 1e-15));
        assert!(close(t(FullDuplex, FullDuplex), 4.0 * b * phi * ic * jf, 1e-15));
        assert!(close(t(FullDuplex, FullDuplex), 0.171468, 1e-6));
        for s1 in Strategy::ALL {
            for s2 in Strategy::ALL {
                assert_eq!(t(s1, s2), t(s2, s1));
            }
        }
    }

    #[test]
    fn aggregate_examples() {
        let c = reference();
        let p = |h, f| SymmetricAccessProfile::new(h, f).unwrap();
        assert_eq!(aggregate_throughput(&c, &p(0.0, 0.0)), 0.0);
        assert!(close(aggregate_throughput(&c, &p(0.25, 0.2)), 0.504516, 1e-6));
        assert!(close(
            aggregate_throughput(&c, &p(0.0, 1.0)),
            4.0 * c.beta() * c.phi() * c.iota_cf(),
            1e-15
        ));
        let pi = p(0.25, 0.2).to_mixed();
        assert!(close(
            aggregate_from_profiles(&c, &pi),
            aggregate_throughput(&c, &p(0.25, 0.2)),
            1e-12
        ));
        assert_eq!(aggregate_from_profiles(&c, &MixedStrategy::pure(Strategy::Wait)), 0.0);
        let always_a = MixedStrategy::pure(Strategy::TransmitA);
        assert!(close(
            aggregate_from_profiles(&c, &always_a),
            2.0 * c.phi() * c.iota_f(),
            1e-15
        ));
    }

    #[test]
    fn region_validation() {
        assert!(SymmetricAccessProfile::new(0.3, 0.5).is_err());
        assert!(SymmetricAccessProfile::new(-0.1, 0.5).is_err());
        assert!(SymmetricAccessProfile::new(0.5, 0.0).is_ok());
        let asym = MixedStrategy::new(0.2, 0.3, 0.1, 0.4).unwrap();
        assert!(SymmetricAccessProfile::try_from(&asym).is_err());
    }

    #[test]
    fn never_wait_optimum() {
        let c = DerivedConstants::new(1.0, 0.6, 0.7, 0.7).unwrap();
        let opt = optimal_mne(&c).unwrap();
        assert_eq!(opt.boundary, Boundary::NeverWait);
        assert!(close(opt.profile.pi_tfd(), 0.16304, 1e-5));
        assert!(close(opt.profile.pi_thd(), 0.41848, 1e-5));
        assert!(close(opt.t_star, 1.30489, 1e-5));
        assert!(close(opt.enabling_c_hd.unwrap(), 0.61250, 1e-5));
        // closed form of the stationary point on the never-wait edge
        let (ic, jf, b) = (0.6, 0.7, 0.7);
        let p = ((1.0 - b) * (ic + jf) - ic * jf) / ((2.0 * b - 1.0) * (2.0 * ic * jf - ic - jf));
        assert!(close(opt.profile.pi_tfd(), p, 1e-12));
        let costs = CostPolicy::proportional(&c, opt.enabling_c_hd.unwrap()).unwrap();
        assert!(verify_mne(&c, &opt.profile.to_mixed(), &costs).is_equilibrium(EQUILIBRIUM_TOL));
    }

    #[test]
    fn weak_interference_prefers_full_duplex() {
        let c = DerivedConstants::new(1.0, 0.95, 0.96, 0.7).unwrap();
        let opt = maximize_throughput(&c).unwrap();
        assert_eq!(opt.profile.pi_thd(), 0.0);
        assert_eq!(opt.boundary, Boundary::NoHalfDuplex);
        assert!(close(opt.t_star, 4.0 * 0.7 * 0.95 * 0.96, 1e-12));
        assert!(close(opt.t_star, 2.5536, 1e-4));
        let (_, t1) = boundary_maximum(&c, Boundary::NoFullDuplex);
        assert!(close(t1, 0.95 + 0.96, 1e-12));
    }

    #[test]
    fn half_duplex_edge_closed_forms() {
        // iota_c + iota_f <= 1: interior maximiser on dR1
        let c = DerivedConstants::new(0.8, 0.2, 0.3, 0.6).unwrap();
        let (p, t) = boundary_maximum(&c, Boundary::NoFullDuplex);
        assert!(close(p.pi_thd(), 1.0 / (2.0 * (2.0 - 0.5)), 1e-12));
        assert!(close(t, 0.8 / (2.0 - 0.5), 1e-12));
        assert!(close(enabling_cost(&c, &p), 0.4, 1e-12));
        // iota_c + iota_f > 1: clipped at pi_thd = 1/2
        let c = DerivedConstants::new(0.8, 0.55, 0.6, 0.6).unwrap();
        let (p, _) = boundary_maximum(&c, Boundary::NoFullDuplex);
        assert_eq!(p.pi_thd(), 0.5);
        assert!(close(enabling_cost(&c, &p), 0.8 * 1.15 / 2.0, 1e-12));
    }

    #[test]
    fn regime_map_skips_unordered_points() {
        let map = regime_map(&[(0.6, 0.7), (0.7, 0.6), (0.95, 0.96)], 1.0, 0.7);
        assert_eq!(map.points.len(), 2);
        assert_eq!(map.skipped.len(), 1);
        assert_eq!(map.points[0].iota_c, 0.6);
        assert_eq!(map.points[1].optimum.profile.pi_thd(), 0.0);
    }

    #[test]
    fn critical_point_is_outside() {
        let c = DerivedConstants::new(1.0, 0.6, 0.7, 0.7).unwrap();
        let (h, p) = interior_critical_point(&c).unwrap();
        assert!(!strictly_inside_region(h, p));
        let q = Quadratic::new(&c);
        let eps = 1e-6;
        let dh = (q.value(h + eps, p) - q.value(h - eps, p)) / (2.0 * eps);
        let dp = (q.value(h, p + eps) - q.value(h, p - eps)) / (2.0 * eps);
        assert!(dh.abs() < 1e-6 && dp.abs() < 1e-6);
    }
}
