use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Resolves nondeterministic choices: given `n > 0` alternatives, pick one.
pub trait Chooser {
    fn choose(&mut self, n: usize) -> usize;
}

/// Always picks the first alternative.
#[derive(Debug, Default, Clone, Copy)]
pub struct FirstChooser;

impl Chooser for FirstChooser {
    fn choose(&mut self, _n: usize) -> usize {
        0
    }
}

/// Seeded pseudo-random choice; the seed fully determines the sequence.
#[derive(Debug, Clone)]
pub struct SeededChooser {
    rng: ChaCha8Rng,
}

impl SeededChooser {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Chooser for SeededChooser {
    fn choose(&mut self, n: usize) -> usize {
        assert!(n > 0, "choose called with no alternatives");
        self.rng.gen_range(0..n)
    }
}

/// Replays recorded indices, falling back to 0 once the script runs out.
#[derive(Debug, Clone, Default)]
pub struct ScriptedChooser {
    script: VecDeque<usize>,
}

impl ScriptedChooser {
    pub fn new(script: impl IntoIterator<Item = usize>) -> Self {
        Self {
            script: script.into_iter().collect(),
        }
    }
}

impl Chooser for ScriptedChooser {
    fn choose(&mut self, n: usize) -> usize {
        self.script.pop_front().map_or(0, |i| i.min(n - 1))
    }
}
