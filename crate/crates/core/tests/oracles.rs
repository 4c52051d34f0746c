//! Independent oracles: brute-force grid search, a hand-assembled linear
//! system and the slot simulator, each checked against the closed forms.

use fdnash::game::{mne_strategy, utility, CostPolicy, MixedStrategy};
use fdnash::model::{derive_constants, DerivedConstants, NetworkParams, Role, Strategy};
use fdnash::montecarlo::{
    estimate_success_probability, simulate, simulate_slot, Channel, LinkBudget, SimConfig, SimMode, SlotRng,
};
use fdnash::throughput::{maximize_throughput, profile_throughput};
use nalgebra::{Matrix4, Vector4};

/// Aggregate throughput written out from scratch.
fn aggregate(phi: f64, ic: f64, jf: f64, beta: f64, h: f64, p: f64) -> f64 {
    4.0 * phi * (h + beta * p) * (1.0 - (2.0 - ic - jf) * h - (1.0 - ic * jf) * p)
}

/// Best value over the symmetric region on a square grid of step `step`.
fn grid_max(phi: f64, ic: f64, jf: f64, beta: f64, step: f64) -> (f64, f64, f64) {
    let n = (0.5 / step).round() as usize;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..=n {
        let h = i as f64 * step;
        let top = 1.0 - 2.0 * h;
        let m = (top / step).floor() as usize;
        let mut consider = |p: f64| {
            let v = aggregate(phi, ic, jf, beta, h, p);
            if v > best.0 {
                best = (v, h, p);
            }
        };
        for j in 0..=m {
            consider(j as f64 * step);
        }
        consider(top.max(0.0));
    }
    best
}

#[test]
fn optimiser_matches_grid_search() {
    let cases = [
        (0.6, 0.7, 0.7),
        (0.1, 0.2, 0.7),
        (0.3, 0.9, 0.55),
        (0.95, 0.96, 0.7),
        (0.05, 0.5, 1.0),
        (0.45, 0.5, 0.9),
    ];
    for (ic, jf, beta) in cases {
        let phi = 0.8;
        let c = DerivedConstants::new(phi, ic, jf, beta).unwrap();
        let opt = maximize_throughput(&c).unwrap();
        let (g, _, _) = grid_max(phi, ic, jf, beta, 1e-3);
        assert!(opt.t_star >= g - 1e-12, "{ic} {jf} {beta}: {} < grid {g}", opt.t_star);
        assert!(
            opt.t_star - g <= 1e-5 * phi,
            "{ic} {jf} {beta}: {} vs grid {g}",
            opt.t_star
        );
        let own = aggregate(phi, ic, jf, beta, opt.profile.pi_thd(), opt.profile.pi_tfd());
        assert!((own - opt.t_star).abs() <= 1e-12);
    }
}

#[test]
fn spot_optimum_value() {
    let c = DerivedConstants::new(1.0, 0.6, 0.7, 0.7).unwrap();
    let opt = maximize_throughput(&c).unwrap();
    let (g, h, p) = grid_max(1.0, 0.6, 0.7, 0.7, 1e-3);
    assert!((opt.t_star - 1.304891).abs() <= 1e-6);
    assert!((opt.t_star - g).abs() <= 1e-5);
    assert!((opt.profile.pi_thd() - h).abs() <= 2e-3 && (opt.profile.pi_tfd() - p).abs() <= 2e-3);
}

/// Payoff of `s` against pure `opp`, from the node geometry.
fn tau(c: &DerivedConstants, s: Strategy, opp: Strategy) -> f64 {
    let (ic, jf) = (c.iota_c(), c.iota_f());
    // receiver B_i sees A_j at the far corner and B_j straight across
    let at_b = match opp {
        Strategy::Wait => 1.0,
        Strategy::TransmitA => jf,
        Strategy::TransmitB => ic,
        Strategy::FullDuplex => ic * jf,
    };
    let at_a = match opp {
        Strategy::Wait => 1.0,
        Strategy::TransmitA => ic,
        Strategy::TransmitB => jf,
        Strategy::FullDuplex => ic * jf,
    };
    let phi = c.phi();
    match s {
        Strategy::Wait => 0.0,
        Strategy::TransmitA => phi * at_b,
        Strategy::TransmitB => phi * at_a,
        Strategy::FullDuplex => c.beta() * phi * (at_a + at_b),
    }
}

#[test]
fn equilibrium_matches_lu_solution() {
    let cases = [
        (0.670320046, 0.2, 0.456786383, 0.7, 0.3, 0.3),
        (1.0, 0.6, 0.7, 0.7, 0.65, 0.1),
        (0.5, 0.1, 0.2, 0.9, 0.2, 0.4),
        (0.9, 0.3, 0.8, 0.6, 0.5, 0.05),
    ];
    for (phi, ic, jf, beta, c_hd, target) in cases {
        let c = DerivedConstants::new(phi, ic, jf, beta).unwrap();
        // rows: t_A and t_B indifferent with waiting, simplex, fixed pi_tfd
        let mut m = Matrix4::zeros();
        for (col, opp) in Strategy::ALL.into_iter().enumerate() {
            m[(0, col)] = tau(&c, Strategy::TransmitA, opp);
            m[(1, col)] = tau(&c, Strategy::TransmitB, opp);
            m[(2, col)] = 1.0;
        }
        m[(3, 3)] = 1.0;
        let rhs = Vector4::new(c_hd, c_hd, 1.0, target);
        let x = m.lu().solve(&rhs).unwrap();
        let pi = mne_strategy(&c, c_hd, target).unwrap();
        for (k, v) in pi.as_array().into_iter().enumerate() {
            assert!((v - x[k]).abs() <= 1e-10, "{k}: {v} vs {}", x[k]);
        }
        // the dropped full-duplex row holds automatically
        let fd: f64 = Strategy::ALL
            .into_iter()
            .zip(x.iter())
            .map(|(opp, w)| w * tau(&c, Strategy::FullDuplex, opp))
            .sum();
        assert!((fd - 2.0 * beta * c_hd).abs() <= 1e-10);
    }
    let c = DerivedConstants::new(0.670320046, 0.2, 0.456786383, 0.7).unwrap();
    let pi = mne_strategy(&c, 0.3, 0.3).unwrap();
    let expect = [0.283298, 0.208351, 0.208351, 0.3];
    for (v, e) in pi.as_array().into_iter().zip(expect) {
        assert!((v - e).abs() <= 1e-6);
    }
}

fn reference() -> NetworkParams {
    NetworkParams::reference(0.7).unwrap()
}

#[test]
fn simulator_matches_every_fixed_profile() {
    let p = reference();
    let c = derive_constants(&p).unwrap();
    let free = CostPolicy::new(0.0, 0.0).unwrap();
    for (i, s1) in Strategy::ALL.into_iter().enumerate() {
        for (j, s2) in Strategy::ALL.into_iter().enumerate() {
            let config = SimConfig {
                channel: Channel::Physical(p),
                mode: SimMode::Fixed { s1, s2 },
                n_slots: 200_000,
                seed: (4 * i + j) as u64,
            };
            let est = simulate(&config, &free).unwrap();
            let expect = profile_throughput(&c, s1, s2);
            if (s1, s2) == (Strategy::Wait, Strategy::Wait) {
                assert_eq!(est.aggregate.mean, 0.0);
            }
            assert!(
                est.aggregate.within(expect, 3.0),
                "{s1} {s2}: {:?} vs {expect}",
                est.aggregate
            );
        }
    }
}

#[test]
fn geometry_and_constants_budgets_agree() {
    let p = reference();
    let c = derive_constants(&p).unwrap();
    let a = LinkBudget::from_params(&p).unwrap();
    let b = LinkBudget::from_constants(&c);
    assert!((a.noise - b.noise).abs() <= 1e-12);
    assert!((a.self_interference - b.self_interference).abs() <= 1e-12);
    for tx in 0..4 {
        for rx in 0..4 {
            // only cross-pair gains enter the decoding rule
            if tx / 2 != rx / 2 {
                let (x, y) = (a.gain[tx][rx], b.gain[tx][rx]);
                assert!((x - y).abs() <= 1e-9 * x.max(1.0), "{tx}->{rx}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn full_duplex_links_fade_independently() {
    let budget = LinkBudget::from_params(&reference()).unwrap();
    let mode = SimMode::Fixed {
        s1: Strategy::FullDuplex,
        s2: Strategy::Wait,
    };
    let mut rng = SlotRng::new(11);
    let n = 400_000u64;
    let (mut sa, mut sb, mut sab) = (0.0, 0.0, 0.0);
    for slot in 0..n {
        let out = simulate_slot(&budget, &mode, &rng.draws(slot));
        let (a, b) = (out.delivered[0] as u8 as f64, out.delivered[1] as u8 as f64);
        sa += a;
        sb += b;
        sab += a * b;
    }
    let nf = n as f64;
    let (ma, mb) = (sa / nf, sb / nf);
    let cov = sab / nf - ma * mb;
    let corr = cov / (ma * (1.0 - ma) * mb * (1.0 - mb)).sqrt();
    assert!(corr.abs() <= 3.0 / nf.sqrt(), "correlation {corr}");
}

#[test]
fn disjoint_seeds_agree() {
    let free = CostPolicy::new(0.0, 0.0).unwrap();
    let pi = MixedStrategy::new(0.2, 0.3, 0.1, 0.4).unwrap();
    let run = |seed| {
        let config = SimConfig {
            channel: Channel::Physical(reference()),
            mode: SimMode::Mixed { pi1: pi, pi2: pi },
            n_slots: 200_000,
            seed,
        };
        simulate(&config, &free).unwrap().aggregate
    };
    let (a, b) = (run(1), run(2));
    assert_ne!(a.mean, b.mean);
    let combined = (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
    assert!((a.mean - b.mean).abs() < 6.0 * combined);
}

#[test]
fn mixed_play_utilities_match() {
    let p = reference();
    let c = derive_constants(&p).unwrap();
    let costs = CostPolicy::proportional(&c, 0.25).unwrap();
    let pi1 = MixedStrategy::new(0.1, 0.35, 0.25, 0.3).unwrap();
    let pi2 = MixedStrategy::new(0.4, 0.1, 0.3, 0.2).unwrap();
    let config = SimConfig {
        channel: Channel::Physical(p),
        mode: SimMode::Mixed { pi1, pi2 },
        n_slots: 400_000,
        seed: 5,
    };
    let est = simulate(&config, &costs).unwrap();
    for (pair, opp) in [(0, &pi2), (1, &pi1)] {
        for s in Strategy::ALL {
            let a = est.action(pair, s).unwrap();
            let expect = utility(&c, opp, s, &costs);
            let z = (a.utility - expect) / a.throughput.std_err.max(f64::MIN_POSITIVE);
            assert!(s == Strategy::Wait || z.abs() <= 3.0, "pair {pair} {s}: z = {z}");
            if s == Strategy::Wait {
                assert_eq!(a.utility, 0.0);
            }
        }
    }
}

#[test]
fn conditional_success_rates() {
    let p = reference();
    let c = derive_constants(&p).unwrap();
    let cases = [
        (Role::B, Strategy::FullDuplex, Strategy::Wait, c.beta() * c.phi()),
        (Role::B, Strategy::TransmitA, Strategy::TransmitB, c.phi() * c.iota_c()),
        (
            Role::A,
            Strategy::FullDuplex,
            Strategy::FullDuplex,
            c.beta() * c.phi() * c.iota_cf(),
        ),
        (Role::A, Strategy::TransmitB, Strategy::TransmitA, c.phi() * c.iota_c()),
    ];
    for (k, (role, own, opp, expect)) in cases.into_iter().enumerate() {
        let r = estimate_success_probability(Channel::Constants(c), role, own, opp, 300_000, 100 + k as u64).unwrap();
        assert!(r.z_score(expect).abs() <= 3.0, "{r:?} vs {expect}");
    }
}
