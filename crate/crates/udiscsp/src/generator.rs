//! Random distributed meeting-scheduling instances, plus a brute-force
//! solvability oracle.
//!
//! All randomness flows through a ChaCha8 stream seeded from a caller
//! supplied 64-bit integer, so identical parameters always produce bit
//! identical instances on every platform. Draw order is part of the
//! contract: availability first (row-major), then costs (row-major).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Instance;

/// How unary constraints (forbidden slots) are spread across agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistributionKind {
    /// Every (agent, value) pair is forbidden with the same probability.
    Uniform,
    /// The higher-priority half of the agents is constrained with half
    /// the nominal probability and the rest with 1.5 times it, keeping
    /// the global density unchanged while skewing constraints toward
    /// the tail of the priority order.
    TailConstrained,
}

impl DistributionKind {
    pub fn name(self) -> &'static str {
        match self {
            DistributionKind::Uniform => "uniform",
            DistributionKind::TailConstrained => "tail",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "uniform" => Some(DistributionKind::Uniform),
            "tail" | "tail-constrained" => Some(DistributionKind::TailConstrained),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub n: usize,
    pub d: usize,
    /// Probability that a given (agent, value) pair is forbidden.
    pub density: f64,
    pub distribution: DistributionKind,
    /// Inclusive range revelation costs are drawn from.
    pub cost_range: (u64, u64),
    /// Agreement reward, identical for every agent.
    pub reward: u64,
    pub seed: u64,
}

impl GenParams {
    /// Benchmark defaults: costs 0..=9, reward 20.
    pub fn new(
        n: usize,
        d: usize,
        density: f64,
        distribution: DistributionKind,
        seed: u64,
    ) -> Self {
        GenParams {
            n,
            d,
            density,
            distribution,
            cost_range: (0, 9),
            reward: 20,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.n == 0 || self.d == 0 {
            return Err(GenError::EmptyShape {
                n: self.n,
                d: self.d,
            });
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(GenError::BadDensity(self.density));
        }
        if self.distribution == DistributionKind::TailConstrained && 1.5 * self.density > 1.0 {
            return Err(GenError::TailDensityOverflow(self.density));
        }
        if self.cost_range.0 > self.cost_range.1 {
            return Err(GenError::BadCostRange(self.cost_range.0, self.cost_range.1));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GenError {
    #[error("n and d must be positive (got n={n}, d={d})")]
    EmptyShape { n: usize, d: usize },
    #[error("density {0} outside [0, 1]")]
    BadDensity(f64),
    #[error("tail-constrained density {0} puts the constrained half above probability 1")]
    TailDensityOverflow(f64),
    #[error("empty cost range [{0}, {1}]")]
    BadCostRange(u64, u64),
}

/// Per-agent probability that a value is forbidden.
fn forbid_probability(params: &GenParams, agent: usize) -> f64 {
    match params.distribution {
        DistributionKind::Uniform => params.density,
        DistributionKind::TailConstrained => {
            if agent < params.n / 2 {
                0.5 * params.density
            } else {
                1.5 * params.density
            }
        }
    }
}

/// Generates an instance as a deterministic function of the parameters.
///
/// Costs are drawn for every pair, including forbidden values: revealing
/// that a slot is unavailable is charged too.
pub fn generate(params: &GenParams) -> Result<Instance, GenError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let availability: Vec<Vec<bool>> = (0..params.n)
        .map(|i| {
            let p = forbid_probability(params, i);
            (0..params.d).map(|_| !rng.gen_bool(p)).collect()
        })
        .collect();
    let costs: Vec<Vec<u64>> = (0..params.n)
        .map(|_| {
            (0..params.d)
                .map(|_| rng.gen_range(params.cost_range.0..=params.cost_range.1))
                .collect()
        })
        .collect();

    Ok(Instance {
        n: params.n,
        d: params.d,
        availability,
        costs,
        rewards: vec![params.reward; params.n],
    })
}

/// Smallest value available to every agent, if any. The oracle for
/// solver completeness tests.
pub fn brute_force_solve(instance: &Instance) -> Option<usize> {
    (0..instance.d).find(|&v| (0..instance.n).all(|i| instance.is_available(i, v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Assignment, RawInstance};
    use proptest::prelude::*;

    fn forbidden_count(inst: &Instance, rows: std::ops::Range<usize>) -> usize {
        rows.map(|i| inst.availability[i].iter().filter(|a| !**a).count())
            .sum()
    }

    #[test]
    fn identical_params_give_identical_instances() {
        let params = GenParams::new(10, 10, 0.3, DistributionKind::Uniform, 42);
        assert_eq!(generate(&params).unwrap(), generate(&params).unwrap());
        let mut other = params;
        other.seed = 43;
        assert_ne!(generate(&params).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn zero_density_is_unconstrained_and_costs_stay_in_range() {
        let params = GenParams::new(6, 5, 0.0, DistributionKind::Uniform, 7);
        let inst = generate(&params).unwrap();
        assert_eq!(forbidden_count(&inst, 0..6), 0);
        assert!(inst.costs.iter().flatten().all(|&c| c <= 9));
        assert_eq!(inst.rewards, vec![20; 6]);
        assert_eq!(brute_force_solve(&inst), Some(0));
    }

    #[test]
    fn uniform_forbidden_count_tracks_density() {
        // 200 seeds of a 10x10 grid at density 0.3: binomial with mean 30
        // per instance, sd of the 200-seed mean = sqrt(30*0.7/200) < 0.33,
        // so [27, 33] is a generous 3-sigma corridor.
        let mut total = 0usize;
        for seed in 0..200 {
            let params = GenParams::new(10, 10, 0.3, DistributionKind::Uniform, seed);
            total += forbidden_count(&generate(&params).unwrap(), 0..10);
        }
        let mean = total as f64 / 200.0;
        assert!((27.0..=33.0).contains(&mean), "mean forbidden count {mean}");
    }

    #[test]
    fn tail_constrained_skews_three_to_one() {
        let mut head = 0usize;
        let mut tail = 0usize;
        for seed in 0..200 {
            let params = GenParams::new(10, 10, 0.4, DistributionKind::TailConstrained, seed);
            let inst = generate(&params).unwrap();
            head += forbidden_count(&inst, 0..5);
            tail += forbidden_count(&inst, 5..10);
        }
        let ratio = tail as f64 / head as f64;
        assert!(
            (2.4..=3.6).contains(&ratio),
            "tail/head forbidden ratio {ratio}"
        );
        // Global density preserved: expected 40 forbidden pairs per instance.
        let mean = (head + tail) as f64 / 200.0;
        assert!((36.0..=44.0).contains(&mean), "global mean {mean}");
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = GenParams::new(3, 3, 1.2, DistributionKind::Uniform, 0);
        assert_eq!(generate(&p), Err(GenError::BadDensity(1.2)));
        p.density = 0.8;
        p.distribution = DistributionKind::TailConstrained;
        assert_eq!(generate(&p), Err(GenError::TailDensityOverflow(0.8)));
        p = GenParams::new(0, 3, 0.1, DistributionKind::Uniform, 0);
        assert_eq!(generate(&p), Err(GenError::EmptyShape { n: 0, d: 3 }));
        p = GenParams::new(3, 3, 0.1, DistributionKind::Uniform, 0);
        p.cost_range = (5, 2);
        assert_eq!(generate(&p), Err(GenError::BadCostRange(5, 2)));
    }

    #[test]
    fn brute_force_finds_smallest_common_value() {
        let inst = Instance::try_from(RawInstance {
            n: 3,
            d: 3,
            availability: vec![
                vec![false, true, true],
                vec![false, true, false],
                vec![false, true, true],
            ],
            costs: vec![vec![0; 3]; 3],
            rewards: vec![0; 3],
        })
        .unwrap();
        assert_eq!(brute_force_solve(&inst), Some(1));
        assert_eq!(brute_force_solve(&crate::model::tests::meeting3()), None);
    }

    proptest! {
        #[test]
        fn brute_force_value_is_an_agreement(seed in any::<u64>()) {
            let params = GenParams::new(5, 4, 0.4, DistributionKind::Uniform, seed);
            let inst = generate(&params).unwrap();
            match brute_force_solve(&inst) {
                Some(v) => {
                    let assignment = Assignment::from_values(vec![v; 5]);
                    prop_assert_eq!(crate::model::is_agreement(&inst, &assignment), Ok(true));
                    // Smallest: no column below v is fully available.
                    for w in 0..v {
                        prop_assert!((0..5).any(|i| !inst.is_available(i, w)));
                    }
                }
                None => {
                    for v in 0..4 {
                        prop_assert!((0..5).any(|i| !inst.is_available(i, v)));
                    }
                }
            }
        }
    }
}
