//! Run configuration. `paper` carries the full-length search settings;
//! `desk` shortens the generation count for interactive and CI runs while
//! keeping every other knob identical.

use crate::error::{Error, Result};
use crate::gp;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub generations: usize,
    pub population: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub min_depth: usize,
    pub max_depth: usize,
    pub perplexity: f64,
    pub seed: u64,
    pub threads: usize,
    pub pso_iterations: usize,
    pub pso_particles: usize,
    /// Stop searching at the first generation boundary at or past this many
    /// embedding evaluations. Mainly for audit runs.
    #[serde(default)]
    pub eval_budget: Option<u64>,
    #[serde(default = "default_true")]
    pub use_cache: bool,
    /// Keep a record of every fitness evaluation; memory-hungry, audit only.
    #[serde(default)]
    pub record_evaluations: bool,
}

fn default_true() -> bool {
    true
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl SearchConfig {
    pub fn paper() -> Self {
        Self {
            generations: 2500,
            population: 100,
            crossover_rate: 0.8,
            mutation_rate: 0.2,
            min_depth: 2,
            max_depth: 14,
            perplexity: 40.0,
            seed: 1,
            threads: 1,
            pso_iterations: 100,
            pso_particles: 30,
            eval_budget: None,
            use_cache: true,
            record_evaluations: false,
        }
    }

    pub fn desk() -> Self {
        Self {
            generations: 300,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.population < 2 {
            return bad(format!(
                "population must be at least 2, got {}",
                self.population
            ));
        }
        for (name, r) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} must lie in [0,1], got {r}"));
            }
        }
        if (self.crossover_rate + self.mutation_rate - 1.0).abs() > 1e-9 {
            return bad(format!(
                "crossover_rate + mutation_rate must equal 1, got {} + {}",
                self.crossover_rate, self.mutation_rate
            ));
        }
        if self.min_depth < 1 || self.min_depth > self.max_depth {
            return bad(format!(
                "depth range [{}, {}] is invalid",
                self.min_depth, self.max_depth
            ));
        }
        if self.max_depth > gp::MAX_DEPTH {
            return bad(format!(
                "max_depth {} exceeds the engine cap {}",
                self.max_depth,
                gp::MAX_DEPTH
            ));
        }
        if !self.perplexity.is_finite() || self.perplexity <= 0.0 {
            return bad(format!(
                "perplexity must be positive, got {}",
                self.perplexity
            ));
        }
        if self.threads < 1 {
            return bad("threads must be at least 1".into());
        }
        if self.pso_particles < 1 {
            return bad("pso_particles must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_profile_is_valid_and_desk_only_shortens() {
        let p = SearchConfig::paper();
        p.validate().unwrap();
        let d = SearchConfig::desk();
        d.validate().unwrap();
        assert_eq!(d.generations, 300);
        assert_eq!(
            SearchConfig {
                generations: 2500,
                ..d
            },
            p
        );
    }

    #[test]
    fn validation_catches_bad_rates_and_depths() {
        let mut c = SearchConfig::desk();
        c.crossover_rate = 0.7;
        assert!(c.validate().is_err());
        c = SearchConfig::desk();
        c.min_depth = 0;
        assert!(c.validate().is_err());
        c = SearchConfig::desk();
        c.max_depth = 20;
        assert!(c.validate().is_err());
        c = SearchConfig::desk();
        c.population = 1;
        assert!(c.validate().is_err());
        c = SearchConfig::desk();
        c.perplexity = -3.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = SearchConfig::desk();
        let s = serde_json::to_string(&c).unwrap();
        let back: SearchConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
