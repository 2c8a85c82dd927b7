//! Pauli noise models and the raw-rate ↔ effective-rate conversion.
//!
//! Three channels are supported: independent bit- and phase-flips, single-
//! qubit depolarizing noise, and nearest-neighbor two-qubit depolarizing
//! noise acting on the lattice edge set. Benchmarks are parameterized by the
//! *effective* error rate — the probability that a qubit is hit by any
//! nontrivial Pauli — so each model also knows how to convert between its raw
//! parameter `p` and that effective rate in both directions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::codes::CodeLattice;
use crate::pauli::{Pauli, PauliOperator};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum NoiseKind {
    /// Independent X with probability `p` and Z with probability `p` per
    /// qubit; their overlap makes Y occur with probability `p²`.
    BitPhaseFlip,
    /// One of X, Y, Z with probability `p/3` each per qubit.
    Depolarizing,
    /// Per lattice edge, with probability `p` one of the 15 nonidentity
    /// two-qubit Paulis, chosen uniformly; overlapping hits compose by
    /// multiplication.
    NNDepolarizing,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::BitPhaseFlip => "bitphase",
            NoiseKind::Depolarizing => "depol",
            NoiseKind::NNDepolarizing => "nn-depol",
        }
    }

    pub fn parse_name(s: &str) -> Option<NoiseKind> {
        match s {
            "bitphase" => Some(NoiseKind::BitPhaseFlip),
            "depol" => Some(NoiseKind::Depolarizing),
            "nn-depol" => Some(NoiseKind::NNDepolarizing),
            _ => None,
        }
    }
}

#[derive(Error, Debug)]
pub enum NoiseError {
    #[error("error probability {0} lies outside [0, 1)")]
    BadProbability(f64),
    #[error(
        "effective rate {target} is unreachable for {kind} with {neighbors} neighbors \
         (supremum {supremum})"
    )]
    UnreachableTarget {
        kind: &'static str,
        target: f64,
        neighbors: usize,
        supremum: f64,
    },
}

#[derive(Clone, Copy, Debug)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub p: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, p: f64) -> Result<NoiseModel, NoiseError> {
        if !(0.0..1.0).contains(&p) {
            return Err(NoiseError::BadProbability(p));
        }
        Ok(NoiseModel { kind, p })
    }

    /// Model whose bulk effective rate equals `p_eff` for the given
    /// neighbor count (ignored except for the nearest-neighbor channel).
    pub fn from_effective(
        kind: NoiseKind,
        p_eff: f64,
        neighbor_count: usize,
    ) -> Result<NoiseModel, NoiseError> {
        NoiseModel::new(kind, rate_from_effective(kind, p_eff, neighbor_count)?)
    }

    /// Draw one error operator.
    ///
    /// The consumption order of `rng` is part of the reproducibility
    /// contract: bit/phase-flip draws two booleans per qubit in index order
    /// (X first, then Z); depolarizing draws one boolean per qubit and, on a
    /// hit, one index in `0..3` selecting X/Y/Z; the nearest-neighbor channel
    /// walks `lattice.edges` in order, drawing one boolean per edge and, on a
    /// hit, one index in `0..15` selecting the nonidentity letter pair.
    pub fn sample<R: Rng + ?Sized>(&self, lattice: &CodeLattice, rng: &mut R) -> PauliOperator {
        let n = lattice.n();
        let mut op = PauliOperator::identity(n);
        match self.kind {
            NoiseKind::BitPhaseFlip => {
                for q in 0..n {
                    let x = rng.random_bool(self.p);
                    let z = rng.random_bool(self.p);
                    op.set(q, Pauli::from_bits(x, z));
                }
            }
            NoiseKind::Depolarizing => {
                for q in 0..n {
                    if rng.random_bool(self.p) {
                        op.set(q, [Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..3)]);
                    }
                }
            }
            NoiseKind::NNDepolarizing => {
                let letters = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
                for &(a, b) in &lattice.edges {
                    if rng.random_bool(self.p) {
                        let m = rng.random_range(0..15) + 1;
                        op.set(a, op.get(a).product(letters[m / 4]));
                        op.set(b, op.get(b).product(letters[m % 4]));
                    }
                }
            }
        }
        op
    }

    /// Probability that a qubit with `neighbor_count` incident edges suffers
    /// any nontrivial error. The two single-qubit channels ignore the count;
    /// the nearest-neighbor channel applies the per-edge update
    /// `r ← r·(1 − 4p/15) + (1 − r)·12p/15` once per neighbor, starting from
    /// zero.
    pub fn effective_rate(&self, neighbor_count: usize) -> f64 {
        let p = self.p;
        match self.kind {
            NoiseKind::BitPhaseFlip => 2.0 * p - p * p,
            NoiseKind::Depolarizing => p,
            NoiseKind::NNDepolarizing => {
                let mut r = 0.0;
                for _ in 0..neighbor_count {
                    r = r * (1.0 - 4.0 * p / 15.0) + (1.0 - r) * (12.0 * p / 15.0);
                }
                r
            }
        }
    }

    /// Effective rate per qubit; entries differ only for the
    /// nearest-neighbor channel, where corners and the twist have fewer
    /// incident edges than the bulk.
    pub fn per_qubit_effective_rates(&self, lattice: &CodeLattice) -> Vec<f64> {
        lattice
            .neighbor_counts()
            .into_iter()
            .map(|deg| self.effective_rate(deg))
            .collect()
    }
}

/// Bulk qubit degree of the lattice edge set — the neighbor count the
/// benchmark harness reports effective rates for. The patch corners and the
/// twist have fewer incident edges than everything else, so the bulk valence
/// is simply the maximum.
pub fn bulk_neighbor_count(lattice: &CodeLattice) -> usize {
    lattice.neighbor_counts().into_iter().max().unwrap_or(0)
}

/// Invert [`NoiseModel::effective_rate`] to absolute tolerance 1e-10:
/// closed forms for the single-qubit channels, bisection over the monotone
/// branch `p ∈ [0, 15/16]` for the nearest-neighbor channel.
pub fn rate_from_effective(
    kind: NoiseKind,
    p_eff: f64,
    neighbor_count: usize,
) -> Result<f64, NoiseError> {
    let unreachable = |supremum: f64| NoiseError::UnreachableTarget {
        kind: kind.name(),
        target: p_eff,
        neighbors: neighbor_count,
        supremum,
    };
    match kind {
        NoiseKind::Depolarizing => {
            if !(0.0..1.0).contains(&p_eff) {
                return Err(unreachable(1.0));
            }
            Ok(p_eff)
        }
        NoiseKind::BitPhaseFlip => {
            if !(0.0..1.0).contains(&p_eff) {
                return Err(unreachable(1.0));
            }
            Ok(1.0 - (1.0 - p_eff).sqrt())
        }
        NoiseKind::NNDepolarizing => {
            let (mut lo, mut hi) = (0.0f64, 15.0 / 16.0);
            let f = |p: f64| {
                NoiseModel { kind, p }.effective_rate(neighbor_count)
            };
            let supremum = f(hi);
            if !(0.0..=supremum).contains(&p_eff) {
                return Err(unreachable(supremum));
            }
            if p_eff == 0.0 {
                return Ok(0.0);
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if f(mid) < p_eff {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        }
    }
}

/// Counter-based per-trial randomness: trial `i` of a run seeded with
/// `master_seed` always sees the same stream, independent of which other
/// trials run or in what order.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}
