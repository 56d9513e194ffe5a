//! Mapping between discrete action indices and executor configurations.
//!
//! `Direct` picks one of the 72 grid points per step. `Delta` moves each
//! controlled knob by -1, 0 or +1 grid step, clamped at the bounds; the first
//! knob is the most significant base-3 digit.

use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::sim::cost::{CORES_RANGE, INSTANCES_RANGE, MEMORY_RANGE_MB, MEMORY_STEP_MB};
use crate::sim::ExecutorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Knob {
    Cores,
    MemoryMb,
    Instances,
}

impl Knob {
    pub const ALL: [Knob; 3] = [Knob::Cores, Knob::MemoryMb, Knob::Instances];

    fn get(self, c: &ExecutorConfig) -> u32 {
        match self {
            Knob::Cores => c.cores(),
            Knob::MemoryMb => c.memory_mb(),
            Knob::Instances => c.instances(),
        }
    }

    fn bounds_and_step(self) -> (u32, u32, u32) {
        match self {
            Knob::Cores => (CORES_RANGE.0, CORES_RANGE.1, 1),
            Knob::MemoryMb => (MEMORY_RANGE_MB.0, MEMORY_RANGE_MB.1, MEMORY_STEP_MB),
            Knob::Instances => (INSTANCES_RANGE.0, INSTANCES_RANGE.1, 1),
        }
    }

    /// Move by `dir` grid steps, clamped to the knob's bounds.
    fn shifted(self, value: u32, dir: i8) -> u32 {
        let (lo, hi, step) = self.bounds_and_step();
        let moved = i64::from(value) + i64::from(dir) * i64::from(step);
        moved.clamp(i64::from(lo), i64::from(hi)) as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionCodec {
    #[default]
    Direct,
    Delta {
        #[serde(default = "all_knobs")]
        knobs: Vec<Knob>,
    },
}

fn all_knobs() -> Vec<Knob> {
    Knob::ALL.to_vec()
}


impl ActionCodec {
    pub fn delta_all() -> Self {
        ActionCodec::Delta {
            knobs: Knob::ALL.to_vec(),
        }
    }

    pub fn cardinality(&self) -> usize {
        match self {
            ActionCodec::Direct => ExecutorConfig::grid().len(),
            ActionCodec::Delta { knobs } => 3usize.pow(knobs.len() as u32),
        }
    }

    pub fn violations(&self) -> Vec<(&'static str, String)> {
        match self {
            ActionCodec::Direct => Vec::new(),
            ActionCodec::Delta { knobs } => {
                let mut out = Vec::new();
                if knobs.is_empty() {
                    out.push(("knobs", "delta mode needs at least one knob".to_string()));
                }
                for (i, k) in knobs.iter().enumerate() {
                    if knobs[..i].contains(k) {
                        out.push(("knobs", format!("knob {k:?} listed twice")));
                    }
                }
                out
            }
        }
    }

    fn check(&self, action: usize) -> Result<(), EnvError> {
        let n = self.cardinality();
        if action >= n {
            return Err(EnvError::Codec(format!("action {action} outside [0, {n})")));
        }
        Ok(())
    }

    /// Configuration reached by taking `action` from `current`.
    pub fn decode(&self, action: usize, current: &ExecutorConfig) -> Result<ExecutorConfig, EnvError> {
        self.check(action)?;
        match self {
            ActionCodec::Direct => Ok(ExecutorConfig::grid()[action]),
            ActionCodec::Delta { knobs } => {
                let steps = self.delta_steps(action)?;
                let mut vals = Knob::ALL.map(|k| k.get(current));
                for (knob, dir) in knobs.iter().zip(steps) {
                    let slot = Knob::ALL.iter().position(|k| k == knob).expect("known knob");
                    vals[slot] = knob.shifted(vals[slot], dir);
                }
                Ok(ExecutorConfig::new(vals[0], vals[1], vals[2])?)
            }
        }
    }

    /// Index of a grid configuration under `Direct`.
    pub fn encode_config(config: &ExecutorConfig) -> usize {
        let mem_levels = ((MEMORY_RANGE_MB.1 - MEMORY_RANGE_MB.0) / MEMORY_STEP_MB + 1) as usize;
        let inst_levels = (INSTANCES_RANGE.1 - INSTANCES_RANGE.0 + 1) as usize;
        let c = (config.cores() - CORES_RANGE.0) as usize;
        let m = ((config.memory_mb() - MEMORY_RANGE_MB.0) / MEMORY_STEP_MB) as usize;
        let i = (config.instances() - INSTANCES_RANGE.0) as usize;
        (c * mem_levels + m) * inst_levels + i
    }

    /// Per-knob steps in {-1, 0, +1} for a `Delta` action.
    pub fn delta_steps(&self, action: usize) -> Result<Vec<i8>, EnvError> {
        self.check(action)?;
        let ActionCodec::Delta { knobs } = self else {
            return Err(EnvError::Codec("direct codec has no delta steps".into()));
        };
        let mut rest = action;
        let mut steps = vec![0i8; knobs.len()];
        for slot in steps.iter_mut().rev() {
            *slot = (rest % 3) as i8 - 1;
            rest /= 3;
        }
        Ok(steps)
    }

    pub fn encode_steps(&self, steps: &[i8]) -> Result<usize, EnvError> {
        let ActionCodec::Delta { knobs } = self else {
            return Err(EnvError::Codec("direct codec has no delta steps".into()));
        };
        if steps.len() != knobs.len() || steps.iter().any(|s| !(-1..=1).contains(s)) {
            return Err(EnvError::Codec(format!("invalid delta steps {steps:?}")));
        }
        Ok(steps.iter().fold(0, |acc, &s| acc * 3 + (s + 1) as usize))
    }

    /// The action that leaves the configuration unchanged, if the codec has one.
    pub fn noop(&self) -> Option<usize> {
        match self {
            ActionCodec::Direct => None,
            ActionCodec::Delta { knobs } => Some((3usize.pow(knobs.len() as u32) - 1) / 2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn direct_zero_is_first_grid_point() {
        let c = ActionCodec::Direct
            .decode(0, &ExecutorConfig::midpoint())
            .unwrap();
        assert_eq!(c, ExecutorConfig::new(1, 500, 5).unwrap());
        assert_eq!(ActionCodec::Direct.cardinality(), 72);
    }

    #[test]
    fn direct_roundtrip_all_indices() {
        let codec = ActionCodec::Direct;
        for a in 0..codec.cardinality() {
            let cfg = codec.decode(a, &ExecutorConfig::midpoint()).unwrap();
            assert_eq!(ActionCodec::encode_config(&cfg), a);
        }
    }

    #[test]
    fn delta_noop_keeps_config() {
        let codec = ActionCodec::delta_all();
        assert_eq!(codec.cardinality(), 27);
        let noop = codec.noop().unwrap();
        assert_eq!(noop, 13);
        assert_eq!(codec.delta_steps(noop).unwrap(), vec![0, 0, 0]);
        let start = ExecutorConfig::new(3, 900, 7).unwrap();
        assert_eq!(codec.decode(noop, &start).unwrap(), start);
    }

    #[test]
    fn delta_clamps_at_bounds() {
        let codec = ActionCodec::delta_all();
        let plus_instances = codec.encode_steps(&[0, 0, 1]).unwrap();
        let top = ExecutorConfig::new(2, 700, 8).unwrap();
        assert_eq!(codec.decode(plus_instances, &top).unwrap().instances(), 8);
        let all_down = codec.encode_steps(&[-1, -1, -1]).unwrap();
        assert_eq!(all_down, 0);
        let bottom = ExecutorConfig::new(1, 500, 5).unwrap();
        assert_eq!(codec.decode(all_down, &bottom).unwrap(), bottom);
        let all_up = codec.encode_steps(&[1, 1, 1]).unwrap();
        assert_eq!(
            codec.decode(all_up, &bottom).unwrap(),
            ExecutorConfig::new(2, 600, 6).unwrap()
        );
    }

    #[test]
    fn partial_knob_set() {
        let codec = ActionCodec::Delta {
            knobs: vec![Knob::Instances],
        };
        assert_eq!(codec.cardinality(), 3);
        let c = codec.decode(2, &ExecutorConfig::midpoint()).unwrap();
        assert_eq!(c, ExecutorConfig::new(2, 700, 7).unwrap());
    }

    #[test]
    fn out_of_range_is_codec_error() {
        assert!(matches!(
            ActionCodec::Direct.decode(72, &ExecutorConfig::midpoint()),
            Err(EnvError::Codec(_))
        ));
        assert!(ActionCodec::delta_all().decode(27, &ExecutorConfig::midpoint()).is_err());
    }

    #[test]
    fn serde_shape() {
        let c: ActionCodec = serde_json::from_str(r#"{"mode":"delta","knobs":["cores","memory_mb","instances"]}"#).unwrap();
        assert_eq!(c, ActionCodec::delta_all());
        let d: ActionCodec = serde_json::from_str(r#"{"mode":"direct"}"#).unwrap();
        assert_eq!(d, ActionCodec::Direct);
    }

    proptest! {
        #[test]
        fn delta_roundtrip(a in 0usize..27) {
            let codec = ActionCodec::delta_all();
            let steps = codec.delta_steps(a).unwrap();
            prop_assert_eq!(codec.encode_steps(&steps).unwrap(), a);
        }

        #[test]
        fn delta_sequences_stay_valid(actions in proptest::collection::vec(0usize..27, 0..64)) {
            let codec = ActionCodec::delta_all();
            let mut cfg = ExecutorConfig::midpoint();
            for a in actions {
                cfg = codec.decode(a, &cfg).unwrap();
                prop_assert!(ExecutorConfig::new(cfg.cores(), cfg.memory_mb(), cfg.instances()).is_ok());
            }
        }
    }
}
