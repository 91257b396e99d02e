//! Stuck-at-0 fault masks, the seven-case partition by the lowest faulted
//! position, and configurable injection models with exact or Monte Carlo
//! case probabilities.

use crate::{Error, Result};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::collections::BTreeSet;

/// Index ranges of the three NFSRs.
pub const REGISTER_RANGES: [(u16, u16); 3] = [(1, 93), (94, 177), (178, 288)];

/// A set of positions permanently stuck at 0, confined to one register.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FaultMask {
    positions: BTreeSet<u16>,
}

impl FaultMask {
    pub fn empty() -> Self {
        Self {
            positions: BTreeSet::new(),
        }
    }

    /// Builds a mask, checking that every position is in 1..=288 and that all
    /// positions fall into a single register's index range.
    pub fn new<I: IntoIterator<Item = u16>>(positions: I) -> Result<Self> {
        let positions: BTreeSet<u16> = positions.into_iter().collect();
        if let (Some(&lo), Some(&hi)) = (positions.first(), positions.last()) {
            if lo < 1 || hi > 288 {
                return Err(Error::InvalidMask(format!(
                    "positions must lie in 1..=288, got {lo}..{hi}"
                )));
            }
            let same_register = REGISTER_RANGES
                .iter()
                .any(|&(a, b)| lo >= a && hi <= b);
            if !same_register {
                return Err(Error::InvalidMask(format!(
                    "positions {lo} and {hi} are not in the same register"
                )));
            }
        }
        Ok(Self { positions })
    }

    pub fn single(position: u16) -> Result<Self> {
        Self::new([position])
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn contains(&self, position: u16) -> bool {
        self.positions.contains(&position)
    }

    pub fn positions(&self) -> impl Iterator<Item = u16> + '_ {
        self.positions.iter().copied()
    }

    /// Lowest faulted position.
    pub fn p_l(&self) -> Option<u16> {
        self.positions.first().copied()
    }

    /// Highest faulted position.
    pub fn p_h(&self) -> Option<u16> {
        self.positions.last().copied()
    }

    /// Sorted comma-separated position list, e.g. "100" or "200,250".
    /// The empty mask serializes as "none".
    pub fn to_spec(&self) -> String {
        if self.positions.is_empty() {
            "none".into()
        } else {
            self.positions
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(",")
        }
    }

    pub fn from_spec(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec.is_empty() || spec == "none" {
            return Ok(Self::empty());
        }
        let positions: Vec<u16> = spec
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<u16>()
                    .map_err(|_| Error::Parse(format!("invalid mask position `{s}`")))
            })
            .collect::<Result<_>>()?;
        Self::new(positions)
    }
}

impl std::fmt::Display for FaultMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_spec())
    }
}

/// The seven attack cases, determined solely by P_L.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash, serde::Serialize, serde::Deserialize)]
pub enum CaseLabel {
    Case1,
    Case2,
    Case3,
    Case4,
    Case5,
    Case6,
    Case7,
}

impl CaseLabel {
    pub const ALL: [CaseLabel; 7] = [
        CaseLabel::Case1,
        CaseLabel::Case2,
        CaseLabel::Case3,
        CaseLabel::Case4,
        CaseLabel::Case5,
        CaseLabel::Case6,
        CaseLabel::Case7,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CaseLabel::Case1 => "Case1",
            CaseLabel::Case2 => "Case2",
            CaseLabel::Case3 => "Case3",
            CaseLabel::Case4 => "Case4",
            CaseLabel::Case5 => "Case5",
            CaseLabel::Case6 => "Case6",
            CaseLabel::Case7 => "Case7",
        }
    }

    /// Number of positions p in 1..=288 for which a mask with P_L = p gets
    /// this label.
    pub fn position_count(&self) -> u32 {
        match self {
            CaseLabel::Case1 => 69, // 94..=162
            CaseLabel::Case2 => 66, // 178..=243
            CaseLabel::Case3 => 66, // 1..=66
            CaseLabel::Case4 => 9,  // 163..=171
            CaseLabel::Case5 => 5,  // 172..=176
            CaseLabel::Case6 => 1,  // 177
            CaseLabel::Case7 => 72, // 67..=93 and 244..=288
        }
    }
}

/// Classifies a position as if it were P_L.
pub fn classify_position(p_l: u16) -> CaseLabel {
    match p_l {
        94..=162 => CaseLabel::Case1,
        178..=243 => CaseLabel::Case2,
        1..=66 => CaseLabel::Case3,
        163..=171 => CaseLabel::Case4,
        172..=176 => CaseLabel::Case5,
        177 => CaseLabel::Case6,
        _ => CaseLabel::Case7,
    }
}

/// Classifies a non-empty mask by its P_L.
pub fn classify_case(mask: &FaultMask) -> Result<CaseLabel> {
    mask.p_l().map(classify_position).ok_or(Error::EmptyMask)
}

/// Classification used by campaigns, where an empty mask (a fault-free
/// machine) is labeled Case7 by convention.
pub fn classify_case_or_clean(mask: &FaultMask) -> CaseLabel {
    mask.p_l().map(classify_position).unwrap_or(CaseLabel::Case7)
}

/// How injected fault positions are drawn.
#[derive(Clone, Copy, PartialEq, Debug)]
pub enum InjectionModel {
    /// One position, uniform over 1..=288.
    SingleUniform,
    /// Register chosen with probability proportional to its length, then k
    /// distinct uniform positions inside it.
    KWithinRegister { k: usize },
    /// Register chosen as above, each bit faulted independently with
    /// probability p; resampled if the draw is empty.
    BernoulliWithinRegister { p: f64 },
}

impl InjectionModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InjectionModel::SingleUniform => Ok(()),
            InjectionModel::KWithinRegister { k } => {
                // 84 is the shortest register
                if k >= 1 && k <= 84 {
                    Ok(())
                } else {
                    Err(Error::InvalidModel(format!("k must be in 1..=84, got {k}")))
                }
            }
            InjectionModel::BernoulliWithinRegister { p } => {
                if p > 0.0 && p < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidModel(format!("p must be in (0,1), got {p}")))
                }
            }
        }
    }

    /// Parses the CLI model spec: `single`, `k:<n>` or `bernoulli:<p>`.
    pub fn from_spec(spec: &str) -> Result<Self> {
        let model = if spec == "single" {
            InjectionModel::SingleUniform
        } else if let Some(k) = spec.strip_prefix("k:") {
            InjectionModel::KWithinRegister {
                k: k.parse()
                    .map_err(|_| Error::Parse(format!("invalid k in model spec `{spec}`")))?,
            }
        } else if let Some(p) = spec.strip_prefix("bernoulli:") {
            InjectionModel::BernoulliWithinRegister {
                p: p.parse()
                    .map_err(|_| Error::Parse(format!("invalid p in model spec `{spec}`")))?,
            }
        } else {
            return Err(Error::Parse(format!("unknown model spec `{spec}`")));
        };
        model.validate()?;
        Ok(model)
    }

    pub fn to_spec(&self) -> String {
        match *self {
            InjectionModel::SingleUniform => "single".into(),
            InjectionModel::KWithinRegister { k } => format!("k:{k}"),
            InjectionModel::BernoulliWithinRegister { p } => format!("bernoulli:{p}"),
        }
    }
}

fn pick_register<R: Rng>(rng: &mut R) -> (u16, u16) {
    let r = rng.gen_range(0u16..288);
    match r {
        0..=92 => REGISTER_RANGES[0],
        93..=176 => REGISTER_RANGES[1],
        _ => REGISTER_RANGES[2],
    }
}

/// Draws a mask from the model using the given RNG.
pub fn sample_fault_mask_with<R: Rng>(model: &InjectionModel, rng: &mut R) -> FaultMask {
    match *model {
        InjectionModel::SingleUniform => {
            FaultMask::new([rng.gen_range(1u16..=288)]).unwrap()
        }
        InjectionModel::KWithinRegister { k } => {
            let (lo, hi) = pick_register(rng);
            let mut set = BTreeSet::new();
            while set.len() < k {
                set.insert(rng.gen_range(lo..=hi));
            }
            FaultMask::new(set).unwrap()
        }
        InjectionModel::BernoulliWithinRegister { p } => loop {
            let (lo, hi) = pick_register(rng);
            let set: BTreeSet<u16> = (lo..=hi).filter(|_| rng.gen_bool(p)).collect();
            if !set.is_empty() {
                return FaultMask::new(set).unwrap();
            }
        },
    }
}

/// Mask drawn from the model, deterministic given the seed.
pub fn sample_fault_mask(model: &InjectionModel, seed: u64) -> FaultMask {
    sample_fault_mask_with(model, &mut StdRng::seed_from_u64(seed))
}

/// An exact rational probability with denominator 288.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ExactProbability {
    pub numerator: u32,
    pub denominator: u32,
}

impl ExactProbability {
    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

/// Per-case probabilities, either exact (SingleUniform) or Monte Carlo
/// estimates with standard errors.
#[derive(Clone, Debug)]
pub enum CaseProbabilities {
    Exact(Vec<(CaseLabel, ExactProbability)>),
    Estimated {
        samples: u64,
        per_case: Vec<(CaseLabel, f64, f64)>, // (label, estimate, standard error)
    },
}

/// Closed-form probabilities for SingleUniform.
pub fn case_probability_exact() -> Vec<(CaseLabel, ExactProbability)> {
    CaseLabel::ALL
        .iter()
        .map(|&c| {
            (
                c,
                ExactProbability {
                    numerator: c.position_count(),
                    denominator: 288,
                },
            )
        })
        .collect()
}

/// Per-case probability for the given model: exact for SingleUniform,
/// Monte Carlo with `samples` draws otherwise.
pub fn case_probability(model: &InjectionModel, samples: u64, seed: u64) -> CaseProbabilities {
    match model {
        InjectionModel::SingleUniform => CaseProbabilities::Exact(case_probability_exact()),
        _ => {
            let mut rng = StdRng::seed_from_u64(seed);
            let mut counts = [0u64; 7];
            for _ in 0..samples {
                let mask = sample_fault_mask_with(model, &mut rng);
                let case = classify_case(&mask).expect("sampled mask is non-empty");
                counts[CaseLabel::ALL.iter().position(|&c| c == case).unwrap()] += 1;
            }
            let per_case = CaseLabel::ALL
                .iter()
                .zip(counts)
                .map(|(&c, n)| {
                    let p = n as f64 / samples as f64;
                    (c, p, (p * (1.0 - p) / samples as f64).sqrt())
                })
                .collect();
            CaseProbabilities::Estimated { samples, per_case }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_per_spec() {
        assert_eq!(classify_case(&FaultMask::single(100).unwrap()).unwrap(), CaseLabel::Case1);
        assert_eq!(
            classify_case(&FaultMask::new([200, 250]).unwrap()).unwrap(),
            CaseLabel::Case2
        );
        assert_eq!(classify_case(&FaultMask::single(93).unwrap()).unwrap(), CaseLabel::Case7);
        assert_eq!(classify_case(&FaultMask::single(50).unwrap()).unwrap(), CaseLabel::Case3);
        assert_eq!(classify_case(&FaultMask::single(163).unwrap()).unwrap(), CaseLabel::Case4);
        assert_eq!(classify_case(&FaultMask::single(172).unwrap()).unwrap(), CaseLabel::Case5);
        assert_eq!(classify_case(&FaultMask::single(177).unwrap()).unwrap(), CaseLabel::Case6);
        assert_eq!(classify_case(&FaultMask::single(244).unwrap()).unwrap(), CaseLabel::Case7);
        assert!(matches!(classify_case(&FaultMask::empty()), Err(Error::EmptyMask)));
        assert_eq!(classify_case_or_clean(&FaultMask::empty()), CaseLabel::Case7);
    }

    #[test]
    fn case_partition_covers_all_positions() {
        let total: u32 = CaseLabel::ALL.iter().map(|c| c.position_count()).sum();
        assert_eq!(total, 288);
        let mut counts = [0u32; 7];
        for p in 1u16..=288 {
            let c = classify_position(p);
            counts[CaseLabel::ALL.iter().position(|&x| x == c).unwrap()] += 1;
        }
        for (c, n) in CaseLabel::ALL.iter().zip(counts) {
            assert_eq!(n, c.position_count(), "{}", c.name());
        }
    }

    #[test]
    fn mask_rejects_cross_register() {
        assert!(FaultMask::new([93, 94]).is_err());
        assert!(FaultMask::new([177, 178]).is_err());
        assert!(FaultMask::new([0]).is_err());
        assert!(FaultMask::new([289]).is_err());
        assert!(FaultMask::new([94, 177]).is_ok());
    }

    #[test]
    fn mask_spec_roundtrip() {
        let m = FaultMask::new([250, 200]).unwrap();
        assert_eq!(m.to_spec(), "200,250");
        assert_eq!(FaultMask::from_spec("200,250").unwrap(), m);
        assert_eq!(FaultMask::from_spec("none").unwrap(), FaultMask::empty());
        assert_eq!(FaultMask::from_spec("").unwrap(), FaultMask::empty());
        assert_eq!((m.p_l(), m.p_h()), (Some(200), Some(250)));
    }

    #[test]
    fn sampling_matches_model() {
        let m = sample_fault_mask(&InjectionModel::SingleUniform, 7);
        assert_eq!(m.len(), 1);
        assert_eq!(sample_fault_mask(&InjectionModel::SingleUniform, 7), m);

        let m = sample_fault_mask(&InjectionModel::KWithinRegister { k: 3 }, 9);
        assert_eq!(m.len(), 3);

        let m = sample_fault_mask(&InjectionModel::BernoulliWithinRegister { p: 0.05 }, 11);
        assert!(!m.is_empty());
    }

    #[test]
    fn exact_probabilities_sum_to_one() {
        let probs = case_probability_exact();
        let total: u32 = probs.iter().map(|(_, p)| p.numerator).sum();
        assert_eq!(total, 288);
        let case1 = probs.iter().find(|(c, _)| *c == CaseLabel::Case1).unwrap().1;
        assert_eq!((case1.numerator, case1.denominator), (69, 288));
        let case6 = probs.iter().find(|(c, _)| *c == CaseLabel::Case6).unwrap().1;
        assert_eq!((case6.numerator, case6.denominator), (1, 288));
    }

    #[test]
    fn model_spec_parsing() {
        assert_eq!(InjectionModel::from_spec("single").unwrap(), InjectionModel::SingleUniform);
        assert_eq!(
            InjectionModel::from_spec("k:3").unwrap(),
            InjectionModel::KWithinRegister { k: 3 }
        );
        assert!(InjectionModel::from_spec("k:0").is_err());
        assert!(InjectionModel::from_spec("bernoulli:1.5").is_err());
        assert!(InjectionModel::from_spec("fancy").is_err());
    }
}
