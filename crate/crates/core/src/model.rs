//! Physical parameters of the two-pair grid and the closed-form constants
//! derived from them.
//!
//! The topology is fixed: pair `i` holds nodes `A_i` and `B_i` at distance
//! `r`, and the two pairs sit `d = kappa * r` apart, so that `A_1`–`A_2` and
//! `B_1`–`B_2` are separated by `d` while the cross diagonals `A_1`–`B_2` and
//! `B_1`–`A_2` measure `sqrt(d^2 + r^2)`. Under Rayleigh block fading and an
//! SNIR threshold `theta` every success probability factorises into
//!
//! * `phi`: success against noise alone,
//! * `beta`: residual self-interference penalty of a full-duplex receiver,
//! * `iota_c`, `iota_f`: penalties from the closest / farthest node of the
//!   competing pair.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Action of a pair within one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    /// Stay silent.
    #[serde(rename = "w")]
    Wait,
    /// Half-duplex link `A -> B`.
    #[serde(rename = "tA")]
    TransmitA,
    /// Half-duplex link `B -> A`.
    #[serde(rename = "tB")]
    TransmitB,
    /// Both nodes transmit to each other.
    #[serde(rename = "tfd")]
    FullDuplex,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Wait,
        Strategy::TransmitA,
        Strategy::TransmitB,
        Strategy::FullDuplex,
    ];

    pub fn index(self) -> usize {
        match self {
            Strategy::Wait => 0,
            Strategy::TransmitA => 1,
            Strategy::TransmitB => 2,
            Strategy::FullDuplex => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Strategy::Wait => "w",
            Strategy::TransmitA => "tA",
            Strategy::TransmitB => "tB",
            Strategy::FullDuplex => "tfd",
        }
    }

    /// Whether the node with `role` transmits under this action.
    pub fn transmits(self, role: Role) -> bool {
        matches!(
            (self, role),
            (Strategy::FullDuplex, _) | (Strategy::TransmitA, Role::A) | (Strategy::TransmitB, Role::B)
        )
    }

    /// Whether the node with `role` is the addressee of a packet under this action.
    pub fn receives(self, role: Role) -> bool {
        self.transmits(role.mate())
    }

    pub fn is_full_duplex(self) -> bool {
        self == Strategy::FullDuplex
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w" => Ok(Strategy::Wait),
            "tA" | "ta" => Ok(Strategy::TransmitA),
            "tB" | "tb" => Ok(Strategy::TransmitB),
            "tfd" | "fd" => Ok(Strategy::FullDuplex),
            other => Err(Error::InvalidStrategy(format!("unknown action `{other}`"))),
        }
    }
}

/// Position of a node inside its pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    A,
    B,
}

impl Role {
    pub fn mate(self) -> Role {
        match self {
            Role::A => Role::B,
            Role::B => Role::A,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::A => f.write_str("A"),
            Role::B => f.write_str("B"),
        }
    }
}

/// How residual self-interference is specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelfInterference {
    /// Success factor `beta` given directly.
    Beta(f64),
    /// SI coefficient `eta` (leaked fraction of the transmit power) together
    /// with the intra-pair distance `r`; `beta = exp(-theta * eta * r^alpha)`.
    Eta { eta: f64, r: f64 },
}

/// Raw model inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct NetworkParams {
    /// Path-loss exponent.
    pub alpha: f64,
    /// SNIR decoding threshold (linear).
    pub theta: f64,
    /// Pair separation over intra-pair distance, `d / r`.
    pub kappa: f64,
    /// Reference SNR `P d^-alpha / N` (linear).
    pub snr_ref: f64,
    pub si: SelfInterference,
}

impl NetworkParams {
    pub fn with_beta(alpha: f64, theta: f64, kappa: f64, snr_ref: f64, beta: f64) -> Result<Self> {
        let p = NetworkParams {
            alpha,
            theta,
            kappa,
            snr_ref,
            si: SelfInterference::Beta(beta),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("alpha", self.alpha)?;
        positive("theta", self.theta)?;
        positive("kappa", self.kappa)?;
        positive("snr_ref", self.snr_ref)?;
        match self.si {
            SelfInterference::Beta(beta) => {
                if !beta.is_finite() || beta > 1.0 {
                    return Err(Error::InvalidParameter {
                        name: "beta",
                        value: beta,
                        reason: "must lie in (1/2, 1]",
                    });
                }
                if beta <= 0.5 {
                    return Err(Error::InfeasibleBeta(beta));
                }
            }
            SelfInterference::Eta { eta, r } => {
                if !(0.0..1.0).contains(&eta) {
                    return Err(Error::InvalidParameter {
                        name: "eta",
                        value: eta,
                        reason: "must lie in [0, 1)",
                    });
                }
                positive("r", r)?;
            }
        }
        Ok(())
    }

    /// Residual SI success factor implied by the SI specification.
    pub fn beta(&self) -> f64 {
        match self.si {
            SelfInterference::Beta(beta) => beta,
            SelfInterference::Eta { eta, r } => (-self.theta * eta * r.powf(self.alpha)).exp(),
        }
    }

    /// The reference operating point: `alpha = 3.5`, `theta = 4`, `kappa = 1`,
    /// reference SNR 10.
    pub fn reference(beta: f64) -> Result<Self> {
        Self::with_beta(3.5, 4.0, 1.0, 10.0, beta)
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    alpha: f64,
    theta: f64,
    kappa: f64,
    snr_ref: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
}

impl TryFrom<RawParams> for NetworkParams {
    type Error = String;

    fn try_from(raw: RawParams) -> std::result::Result<Self, String> {
        let si = match (raw.beta, raw.eta, raw.r) {
            (Some(beta), None, None) => SelfInterference::Beta(beta),
            (None, Some(eta), Some(r)) => SelfInterference::Eta { eta, r },
            (None, Some(_), None) => return Err("`eta` requires the intra-pair distance `r`".into()),
            (None, None, _) => return Err("one of `beta` or `eta` must be given".into()),
            (Some(_), _, _) => return Err("`beta` excludes `eta` and `r`".into()),
        };
        let params = NetworkParams {
            alpha: raw.alpha,
            theta: raw.theta,
            kappa: raw.kappa,
            snr_ref: raw.snr_ref,
            si,
        };
        params.validate().map_err(|e| e.to_string())?;
        Ok(params)
    }
}

impl From<NetworkParams> for RawParams {
    fn from(p: NetworkParams) -> Self {
        let (beta, eta, r) = match p.si {
            SelfInterference::Beta(b) => (Some(b), None, None),
            SelfInterference::Eta { eta, r } => (None, Some(eta), Some(r)),
        };
        RawParams {
            alpha: p.alpha,
            theta: p.theta,
            kappa: p.kappa,
            snr_ref: p.snr_ref,
            beta,
            eta,
            r,
        }
    }
}

/// The four factors every closed form is written in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConstants")]
pub struct DerivedConstants {
    beta: f64,
    phi: f64,
    iota_c: f64,
    iota_f: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstants {
    beta: f64,
    phi: f64,
    iota_c: f64,
    iota_f: f64,
}

impl TryFrom<RawConstants> for DerivedConstants {
    type Error = String;

    fn try_from(raw: RawConstants) -> std::result::Result<Self, String> {
        DerivedConstants::new(raw.phi, raw.iota_c, raw.iota_f, raw.beta).map_err(|e| e.to_string())
    }
}

impl DerivedConstants {
    /// Builds the constants directly, e.g. for sweeps over `(iota_c, iota_f)`.
    ///
    /// Requires `0 < phi <= 1`, `0 < iota_c < iota_f < 1` and `1/2 < beta <= 1`.
    pub fn new(phi: f64, iota_c: f64, iota_f: f64, beta: f64) -> Result<Self> {
        if !(phi > 0.0 && phi <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "phi",
                value: phi,
                reason: "must lie in (0, 1]",
            });
        }
        if !(iota_c > 0.0 && iota_c < 1.0) {
            return Err(Error::InvalidParameter {
                name: "iota_c",
                value: iota_c,
                reason: "must lie in (0, 1)",
            });
        }
        if !(iota_f > iota_c && iota_f < 1.0) {
            return Err(Error::InvalidParameter {
                name: "iota_f",
                value: iota_f,
                reason: "must lie in (iota_c, 1)",
            });
        }
        if !(beta.is_finite() && beta <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: beta,
                reason: "must lie in (1/2, 1]",
            });
        }
        if beta <= 0.5 {
            return Err(Error::InfeasibleBeta(beta));
        }
        Ok(DerivedConstants {
            beta,
            phi,
            iota_c,
            iota_f,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn iota_c(&self) -> f64 {
        self.iota_c
    }

    pub fn iota_f(&self) -> f64 {
        self.iota_f
    }

    /// `iota_c * iota_f`, the penalty of a full-duplex interferer pair.
    pub fn iota_cf(&self) -> f64 {
        self.iota_c * self.iota_f
    }

    /// Same factors with a different SI level.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.phi, self.iota_c, self.iota_f, beta)
    }

    /// Interference penalty seen by a receiver with `role` when the other
    /// pair plays `opp`.
    pub fn interference_factor(&self, role: Role, opp: Strategy) -> f64 {
        match (opp, role) {
            (Strategy::Wait, _) => 1.0,
            (Strategy::FullDuplex, _) => self.iota_cf(),
            // the same-letter node of the other pair is at distance d
            (Strategy::TransmitA, Role::A) | (Strategy::TransmitB, Role::B) => self.iota_c,
            (Strategy::TransmitA, Role::B) | (Strategy::TransmitB, Role::A) => self.iota_f,
        }
    }
}

/// Evaluates `phi`, `iota_c`, `iota_f` and `beta` at `params`.
pub fn derive_constants(params: &NetworkParams) -> Result<DerivedConstants> {
    params.validate()?;
    let NetworkParams {
        alpha,
        theta,
        kappa,
        snr_ref,
        ..
    } = *params;
    let close_gain = kappa.powf(-alpha);
    let far_gain = (1.0 + kappa * kappa).powf(-alpha / 2.0);
    let phi = (-theta * close_gain / snr_ref).exp();
    let iota_c = 1.0 / (1.0 + theta * close_gain);
    let iota_f = 1.0 / (1.0 + theta * far_gain);
    let beta = params.beta();
    if beta <= 0.5 {
        return Err(Error::InfeasibleBeta(beta));
    }
    DerivedConstants::new(phi, iota_c, iota_f, beta)
}

/// Probability that the packet addressed to `receiver` is decoded, given the
/// action of its own pair and of the competing pair.
pub fn success_probability(constants: &DerivedConstants, receiver: Role, own: Strategy, opp: Strategy) -> Result<f64> {
    if !own.receives(receiver) {
        return Err(Error::InvalidRole { receiver, own });
    }
    let si = if own.is_full_duplex() { constants.beta } else { 1.0 };
    Ok(si * constants.phi * constants.interference_factor(receiver, opp))
}
