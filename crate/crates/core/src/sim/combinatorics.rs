//! Size of the parallelism search space and of the per-component action space.

use super::SimError;

/// Compositions of `total_slots` into `n_components` positive parts,
/// `C(total_slots - 1, n_components - 1)`.
pub fn count_parallelism_configs(n_components: u32, total_slots: u32) -> Result<u128, SimError> {
    if n_components < 1 || n_components > total_slots {
        return Err(SimError::OutOfBounds {
            field: "n_components",
            value: f64::from(n_components),
            min: 1.0,
            max: f64::from(total_slots),
        });
    }
    binomial(u128::from(total_slots - 1), u128::from(n_components - 1))
}

fn binomial(n: u128, k: u128) -> Result<u128, SimError> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc
            .checked_mul(n - i)
            .ok_or(SimError::Overflow("binomial coefficient"))?
            / (i + 1);
    }
    Ok(acc)
}

/// `3^n_components`: each component may shrink, hold, or grow by one replica.
pub fn action_space_size(n_components: u32) -> Result<u128, SimError> {
    3u128
        .checked_pow(n_components)
        .ok_or(SimError::Overflow("action space size"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enumerate(n: u32, slots: u32) -> u128 {
        fn go(remaining_parts: u32, remaining: u32) -> u128 {
            if remaining_parts == 1 {
                return u128::from(remaining >= 1);
            }
            (1..remaining).map(|p| go(remaining_parts - 1, remaining - p)).sum()
        }
        go(n, slots)
    }

    #[test]
    fn known_values() {
        assert_eq!(count_parallelism_configs(5, 50).unwrap(), 211_876);
        assert_eq!(count_parallelism_configs(1, 17).unwrap(), 1);
        assert_eq!(count_parallelism_configs(2, 3).unwrap(), 2);
        assert_eq!(action_space_size(5).unwrap(), 243);
        assert_eq!(action_space_size(0).unwrap(), 1);
        assert_eq!(action_space_size(3).unwrap(), 27);
    }

    #[test]
    fn agrees_with_enumeration() {
        for n in 1..=4 {
            for slots in n..=12 {
                assert_eq!(
                    count_parallelism_configs(n, slots).unwrap(),
                    enumerate(n, slots),
                    "n={n} slots={slots}"
                );
            }
        }
    }

    #[test]
    fn rejects_more_components_than_slots() {
        assert!(count_parallelism_configs(6, 5).is_err());
        assert!(count_parallelism_configs(0, 5).is_err());
    }

    #[test]
    fn overflow_is_reported() {
        assert!(action_space_size(81).is_err());
        assert!(action_space_size(80).is_ok());
    }
}
