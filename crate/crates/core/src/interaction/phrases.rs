//! Random phrase selection without immediate repeats.

use std::collections::HashMap;

use rand::Rng;

use crate::catalog::ActivityId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pool {
    Motivational,
    Instructional(ActivityId),
}

/// Remembers the previous pick per pool.
#[derive(Debug, Clone, Default)]
pub struct PhrasePicker {
    last: HashMap<Pool, usize>,
}

impl PhrasePicker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Uniform choice among `phrases`, excluding the previous pick from the
    /// same pool. Singleton pools always return their only phrase.
    pub fn pick<'a, R: Rng>(&mut self, pool: Pool, phrases: &'a [String], rng: &mut R) -> &'a str {
        assert!(!phrases.is_empty(), "phrase pool is empty");
        let n = phrases.len();
        let idx = match self.last.get(&pool) {
            Some(&prev) if n > 1 && prev < n => {
                let k = rng.gen_range(0..n - 1);
                if k >= prev {
                    k + 1
                } else {
                    k
                }
            }
            _ => rng.gen_range(0..n),
        };
        self.last.insert(pool, idx);
        &phrases[idx]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Catalog;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn singleton_pool_repeats() {
        let pool = vec!["only".to_string()];
        let mut p = PhrasePicker::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            assert_eq!(p.pick(Pool::Motivational, &pool, &mut rng), "only");
        }
    }

    #[test]
    fn no_consecutive_repeats_over_long_run() {
        let cat = Catalog::builtin();
        let mut p = PhrasePicker::new();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws: Vec<&str> = (0..10_000)
            .map(|_| p.pick(Pool::Motivational, cat.motivational(), &mut rng))
            .collect();
        assert!(draws.windows(2).all(|w| w[0] != w[1]));
        // every phrase shows up
        for phrase in cat.motivational() {
            assert!(draws.contains(&phrase.as_str()));
        }
    }

    #[test]
    fn instructional_draw_comes_from_exercise_pool() {
        let cat = Catalog::builtin();
        let bridge = &cat.lookup(ActivityId::Bridge).instructional_phrases;
        let mut p = PhrasePicker::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let s = p.pick(Pool::Instructional(ActivityId::Bridge), bridge, &mut rng);
            assert!(bridge.iter().any(|b| b == s));
        }
    }

    #[test]
    fn pools_are_tracked_separately() {
        let a = vec!["x".to_string(), "y".to_string()];
        let mut p = PhrasePicker::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let first = p.pick(Pool::Motivational, &a, &mut rng).to_string();
        let other = p.pick(Pool::Instructional(ActivityId::Bridge), &a, &mut rng);
        let _ = other;
        let next = p.pick(Pool::Motivational, &a, &mut rng);
        assert_ne!(first, next);
    }
}
