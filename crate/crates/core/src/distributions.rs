//! Transmission-time distributions.
//!
//! Every family supports exact sampling, closed-form first two moments and a
//! closed-form log-moment generating function `Λ(θ) = ln E[e^{θV}]`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric, Poisson};

/// Tolerance on the total mass of a discrete-finite distribution.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistError {
    #[error("invalid {family} parameter: {reason}")]
    InvalidParameter { family: &'static str, reason: String },
    #[error("discrete probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),
    #[error("malformed distribution spec `{spec}`: {reason}")]
    Malformed { spec: String, reason: String },
    #[error("theta {theta} is outside the MGF domain (must be below {limit})")]
    DomainViolation { theta: f64, limit: f64 },
}

/// Distribution family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Deterministic,
    Poisson,
    Exponential,
    Geometric,
    DiscreteFinite,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Deterministic => "deterministic",
            Family::Poisson => "poisson",
            Family::Exponential => "exponential",
            Family::Geometric => "geometric",
            Family::DiscreteFinite => "discrete-finite",
        }
    }
}

/// Upper end of the interval on which `Λ(θ)` is finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaDomain {
    /// Supremum of admissible θ; `f64::INFINITY` for entire MGFs.
    pub upper_limit: f64,
}

impl ThetaDomain {
    pub fn contains(&self, theta: f64) -> bool {
        theta < self.upper_limit
    }

    pub fn is_bounded(&self) -> bool {
        self.upper_limit.is_finite()
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Deterministic(f64),
    Poisson { rate: f64, dist: Poisson<f64> },
    Exponential { rate: f64, dist: Exp<f64> },
    Geometric { success: f64, dist: Geometric },
    Discrete {
        atoms: Vec<(f64, f64)>,
        index: WeightedIndex<f64>,
        /// Atoms with positive mass.
        support: Vec<(f64, f64)>,
        /// Smallest and largest value in `support`.
        range: (f64, f64),
    },
}

/// Service-time distribution of a single transmission.
///
/// Constructed only through validating constructors, so every instance has
/// nonnegative support and finite first two moments.
#[derive(Debug, Clone)]
pub struct TransmissionModel {
    repr: Repr,
}

impl PartialEq for TransmissionModel {
    fn eq(&self, other: &Self) -> bool {
        self.family() == other.family() && self.params() == other.params()
    }
}

fn check_finite(family: &'static str, name: &str, value: f64) -> Result<(), DistError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(DistError::InvalidParameter { family, reason: alloc::format!("{name} must be finite") })
    }
}

impl TransmissionModel {
    /// Point mass at `value ≥ 0`.
    pub fn deterministic(value: f64) -> Result<Self, DistError> {
        check_finite("deterministic", "value", value)?;
        if value < 0.0 {
            return Err(DistError::InvalidParameter {
                family: "deterministic",
                reason: "value must be nonnegative".into(),
            });
        }
        Ok(Self { repr: Repr::Deterministic(value) })
    }

    /// Poisson with mean `rate > 0`, producing integer-valued times.
    pub fn poisson(rate: f64) -> Result<Self, DistError> {
        check_finite("poisson", "rate", rate)?;
        let dist = Poisson::new(rate).map_err(|e| DistError::InvalidParameter {
            family: "poisson",
            reason: e.to_string(),
        })?;
        Ok(Self { repr: Repr::Poisson { rate, dist } })
    }

    /// Exponential with rate `μ > 0` (mean `1/μ`).
    pub fn exponential(rate: f64) -> Result<Self, DistError> {
        check_finite("exponential", "rate", rate)?;
        if rate <= 0.0 {
            return Err(DistError::InvalidParameter {
                family: "exponential",
                reason: "rate must be positive".into(),
            });
        }
        let dist = Exp::new(rate).map_err(|e| DistError::InvalidParameter {
            family: "exponential",
            reason: e.to_string(),
        })?;
        Ok(Self { repr: Repr::Exponential { rate, dist } })
    }

    /// Number of failures before the first success, support `{0, 1, 2, ...}`.
    pub fn geometric(success: f64) -> Result<Self, DistError> {
        check_finite("geometric", "success probability", success)?;
        if !(success > 0.0 && success <= 1.0) {
            return Err(DistError::InvalidParameter {
                family: "geometric",
                reason: "success probability must lie in (0, 1]".into(),
            });
        }
        let dist = Geometric::new(success).map_err(|e| DistError::InvalidParameter {
            family: "geometric",
            reason: e.to_string(),
        })?;
        Ok(Self { repr: Repr::Geometric { success, dist } })
    }

    /// Finite distribution over `(value, probability)` atoms.
    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self, DistError> {
        if atoms.is_empty() {
            return Err(DistError::InvalidParameter {
                family: "discrete-finite",
                reason: "at least one atom is required".into(),
            });
        }
        for &(value, prob) in &atoms {
            check_finite("discrete-finite", "value", value)?;
            check_finite("discrete-finite", "probability", prob)?;
            if value < 0.0 {
                return Err(DistError::InvalidParameter {
                    family: "discrete-finite",
                    reason: alloc::format!("value {value} is negative"),
                });
            }
            if prob < 0.0 {
                return Err(DistError::InvalidParameter {
                    family: "discrete-finite",
                    reason: alloc::format!("probability {prob} is negative"),
                });
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(DistError::ProbabilitySum(total));
        }
        let index = WeightedIndex::new(atoms.iter().map(|a| a.1)).map_err(|e| {
            DistError::InvalidParameter { family: "discrete-finite", reason: e.to_string() }
        })?;
        let support: Vec<(f64, f64)> = atoms.iter().copied().filter(|a| a.1 > 0.0).collect();
        let range = support
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| (lo.min(a.0), hi.max(a.0)));
        Ok(Self { repr: Repr::Discrete { atoms, index, support, range } })
    }

    pub fn family(&self) -> Family {
        match self.repr {
            Repr::Deterministic(_) => Family::Deterministic,
            Repr::Poisson { .. } => Family::Poisson,
            Repr::Exponential { .. } => Family::Exponential,
            Repr::Geometric { .. } => Family::Geometric,
            Repr::Discrete { .. } => Family::DiscreteFinite,
        }
    }

    /// Family parameters in constructor order; discrete atoms are flattened
    /// as `v1, p1, v2, p2, ...`.
    pub fn params(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Deterministic(v) => alloc::vec![*v],
            Repr::Poisson { rate, .. } | Repr::Exponential { rate, .. } => alloc::vec![*rate],
            Repr::Geometric { success, .. } => alloc::vec![*success],
            Repr::Discrete { atoms, .. } => atoms.iter().flat_map(|&(v, p)| [v, p]).collect(),
        }
    }

    /// One i.i.d. draw of the transmission time.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.repr {
            Repr::Deterministic(v) => *v,
            Repr::Poisson { dist, .. } => dist.sample(rng),
            Repr::Exponential { dist, .. } => dist.sample(rng),
            Repr::Geometric { dist, .. } => dist.sample(rng) as f64,
            Repr::Discrete { atoms, index, .. } => atoms[index.sample(rng)].0,
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.repr {
            Repr::Deterministic(v) => *v,
            Repr::Poisson { rate, .. } => *rate,
            Repr::Exponential { rate, .. } => 1.0 / rate,
            Repr::Geometric { success, .. } => (1.0 - success) / success,
            Repr::Discrete { atoms, .. } => atoms.iter().map(|&(v, p)| v * p).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match &self.repr {
            Repr::Deterministic(_) => 0.0,
            Repr::Poisson { rate, .. } => *rate,
            Repr::Exponential { rate, .. } => 1.0 / (rate * rate),
            Repr::Geometric { success, .. } => (1.0 - success) / (success * success),
            Repr::Discrete { atoms, .. } => {
                let mean = self.mean();
                atoms.iter().map(|&(v, p)| p * (v - mean) * (v - mean)).sum()
            }
        }
    }

    pub fn mgf_domain(&self) -> ThetaDomain {
        let upper_limit = match &self.repr {
            Repr::Exponential { rate, .. } => *rate,
            Repr::Geometric { success, .. } if *success < 1.0 => -libm::log1p(-success),
            _ => f64::INFINITY,
        };
        ThetaDomain { upper_limit }
    }

    /// `Λ(θ) = ln E[e^{θV}]`, checked against the MGF domain.
    pub fn log_mgf(&self, theta: f64) -> Result<f64, DistError> {
        let domain = self.mgf_domain();
        if theta.is_nan() || !domain.contains(theta) {
            return Err(DistError::DomainViolation { theta, limit: domain.upper_limit });
        }
        Ok(self.log_mgf_unchecked(theta))
    }

    /// `Λ(θ)` without the domain check; callers guarantee `θ` is admissible.
    pub(crate) fn log_mgf_unchecked(&self, theta: f64) -> f64 {
        match &self.repr {
            Repr::Deterministic(v) => theta * v,
            Repr::Poisson { rate, .. } => rate * libm::expm1(theta),
            Repr::Exponential { rate, .. } => -libm::log1p(-theta / rate),
            Repr::Geometric { success, .. } => {
                // ln p - ln(1 - (1-p)e^θ), rewritten around θ = 0 for accuracy.
                let q = 1.0 - success;
                -libm::log1p(-q * libm::expm1(theta) / success)
            }
            Repr::Discrete { support, range, .. } => {
                let peak = theta * if theta >= 0.0 { range.1 } else { range.0 };
                let sum: f64 = support.iter().map(|&(v, p)| p * libm::exp(theta * v - peak)).sum();
                peak + libm::log(sum)
            }
        }
    }

    /// Largest support point and its probability, for bounded-support models.
    pub fn upper_atom(&self) -> Option<(f64, f64)> {
        match &self.repr {
            Repr::Deterministic(v) => Some((*v, 1.0)),
            Repr::Geometric { success, .. } if *success == 1.0 => Some((0.0, 1.0)),
            Repr::Discrete { support, range, .. } => {
                let mass = support.iter().filter(|a| a.0 == range.1).map(|a| a.1).sum();
                Some((range.1, mass))
            }
            _ => None,
        }
    }
}

impl fmt::Display for TransmissionModel {
    /// Formats in the model-string syntax accepted by [`FromStr`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Deterministic(v) => write!(f, "det:{v}"),
            Repr::Poisson { rate, .. } => write!(f, "poisson:{rate}"),
            Repr::Exponential { rate, .. } => write!(f, "exp:{rate}"),
            Repr::Geometric { success, .. } => write!(f, "geom:{success}"),
            Repr::Discrete { atoms, .. } => {
                f.write_str("disc:")?;
                for (idx, (v, p)) in atoms.iter().enumerate() {
                    if idx > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}:{p}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for TransmissionModel {
    type Err = DistError;

    /// Parses `det:<v>`, `poisson:<λ>`, `exp:<μ>`, `geom:<p>` or
    /// `disc:<v1>:<p1>,<v2>:<p2>,...`.
    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let malformed = |reason: &str| DistError::Malformed { spec: spec.into(), reason: reason.into() };
        let number = |text: &str| -> Result<f64, DistError> {
            text.trim()
                .parse::<f64>()
                .map_err(|_| malformed(&alloc::format!("`{}` is not a number", text.trim())))
        };
        let (family, rest) =
            spec.trim().split_once(':').ok_or_else(|| malformed("expected `<family>:<params>`"))?;
        match family.trim() {
            "det" => Self::deterministic(number(rest)?),
            "poisson" => Self::poisson(number(rest)?),
            "exp" => Self::exponential(number(rest)?),
            "geom" => Self::geometric(number(rest)?),
            "disc" => {
                let atoms = rest
                    .split(',')
                    .map(|pair| {
                        let (v, p) = pair
                            .split_once(':')
                            .ok_or_else(|| malformed("discrete atoms are `<value>:<prob>`"))?;
                        Ok((number(v)?, number(p)?))
                    })
                    .collect::<Result<Vec<_>, DistError>>()?;
                Self::discrete(atoms)
            }
            other => Err(malformed(&alloc::format!(
                "unknown family `{other}` (expected det, poisson, exp, geom or disc)"
            ))),
        }
    }
}
