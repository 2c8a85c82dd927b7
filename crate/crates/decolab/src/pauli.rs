//! Symplectic binary algebra for n-qubit Pauli operators.
//!
//! Operators are stored as a pair of bit vectors (X part, Z part) packed into
//! 64-bit words; global phases are dropped throughout, since decoding success
//! only ever depends on the logical class of a residual operator. Under this
//! convention multiplication is componentwise XOR and every operator is its
//! own inverse.

use std::fmt;

/// A single-qubit Pauli letter, which doubles as the label of a logical
/// equivalence class (the single-qubit Pauli group mod phases and the group of
/// logical classes of a one-qubit code are the same Klein four-group).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// Coset label of a zero-syndrome operator for one encoded qubit.
pub type LogicalClass = Pauli;

impl Pauli {
    /// (x, z) symplectic bits of the letter.
    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Z => (false, true),
            Pauli::Y => (true, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (false, true) => Pauli::Z,
            (true, true) => Pauli::Y,
        }
    }

    /// Phase-free group product; the four letters form a Klein four-group.
    pub fn product(self, other: Self) -> Self {
        let (ax, az) = self.bits();
        let (bx, bz) = other.bits();
        Self::from_bits(ax ^ bx, az ^ bz)
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    /// The three non-identity letters.
    pub const ERRORS: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

const WORD: usize = 64;

fn words_for(n: usize) -> usize {
    n.div_ceil(WORD)
}

fn parity_of_and(a: &[u64], b: &[u64]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0u32;
    for (wa, wb) in a.iter().zip(b) {
        acc ^= (wa & wb).count_ones() & 1;
    }
    acc & 1 == 1
}

/// An n-qubit Pauli operator modulo phase, as packed X/Z bit vectors.
///
/// Invariant: bits at positions >= n in the last word are always zero.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct PauliOperator {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
}

impl PauliOperator {
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        PauliOperator { n, x: vec![0; w], z: vec![0; w] }
    }

    /// The operator acting as `letter` on qubit `q` and trivially elsewhere.
    pub fn single(n: usize, q: usize, letter: Pauli) -> Self {
        let mut op = Self::identity(n);
        op.set(q, letter);
        op
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn get(&self, q: usize) -> Pauli {
        assert!(q < self.n, "qubit index {q} out of range (n={})", self.n);
        let (w, b) = (q / WORD, q % WORD);
        Pauli::from_bits(self.x[w] >> b & 1 == 1, self.z[w] >> b & 1 == 1)
    }

    pub fn set(&mut self, q: usize, letter: Pauli) {
        assert!(q < self.n, "qubit index {q} out of range (n={})", self.n);
        let (w, b) = (q / WORD, q % WORD);
        let (xb, zb) = letter.bits();
        self.x[w] = self.x[w] & !(1 << b) | (xb as u64) << b;
        self.z[w] = self.z[w] & !(1 << b) | (zb as u64) << b;
    }

    /// Phase-free group product: componentwise XOR of both bit vectors.
    pub fn multiply(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "cannot multiply operators on {} and {} qubits", self.n, other.n);
        let x = self.x.iter().zip(&other.x).map(|(a, b)| a ^ b).collect();
        let z = self.z.iter().zip(&other.z).map(|(a, b)| a ^ b).collect();
        PauliOperator { n: self.n, x, z }
    }

    /// In-place product, for hot loops that compose many operators.
    pub fn multiply_assign(&mut self, other: &Self) {
        assert_eq!(self.n, other.n, "cannot multiply operators on {} and {} qubits", self.n, other.n);
        for (a, b) in self.x.iter_mut().zip(&other.x) {
            *a ^= b;
        }
        for (a, b) in self.z.iter_mut().zip(&other.z) {
            *a ^= b;
        }
    }

    /// True iff the symplectic inner product <a.x,b.z> + <a.z,b.x> vanishes mod 2.
    pub fn commutes(&self, other: &Self) -> bool {
        assert_eq!(self.n, other.n, "cannot compare operators on {} and {} qubits", self.n, other.n);
        !(parity_of_and(&self.x, &other.z) ^ parity_of_and(&self.z, &other.x))
    }

    /// Number of qubits on which the operator acts non-trivially.
    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().all(|&w| w == 0) && self.z.iter().all(|&w| w == 0)
    }

    /// Indices of qubits in the support, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.get(q) != Pauli::I).collect()
    }

    /// Parse from a string over {I,X,Y,Z}, one character per qubit.
    pub fn parse(s: &str) -> Result<Self, String> {
        let mut op = Self::identity(s.len());
        for (q, c) in s.chars().enumerate() {
            let letter = Pauli::from_char(c).ok_or_else(|| format!("invalid Pauli character {c:?}"))?;
            op.set(q, letter);
        }
        Ok(op)
    }
}

impl fmt::Display for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            write!(f, "{}", self.get(q).to_char())?;
        }
        Ok(())
    }
}

/// An ordered list of commuting, independent stabilizer generators. The list
/// order defines the syndrome bit order and, downstream, the network input
/// order; it is fixed at lattice construction and serialized with models.
#[derive(Clone, Debug)]
pub struct StabilizerGroup {
    pub generators: Vec<PauliOperator>,
}

impl StabilizerGroup {
    pub fn new(generators: Vec<PauliOperator>) -> Self {
        StabilizerGroup { generators }
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn num_qubits(&self) -> usize {
        self.generators.first().map_or(0, |g| g.num_qubits())
    }

    /// Syndrome of an error: bit g is set iff the error anticommutes with
    /// generator g. A group homomorphism into bit vectors under XOR.
    pub fn syndrome(&self, err: &PauliOperator) -> Vec<bool> {
        self.generators.iter().map(|g| !g.commutes(err)).collect()
    }

    /// True iff all generator pairs commute.
    pub fn is_abelian(&self) -> bool {
        for (i, a) in self.generators.iter().enumerate() {
            for b in &self.generators[i + 1..] {
                if !a.commutes(b) {
                    return false;
                }
            }
        }
        true
    }

    /// Rank of the generator set over GF(2) in the symplectic representation;
    /// equals the list length iff the generators are independent.
    pub fn rank(&self) -> usize {
        let rows: Vec<Vec<u64>> = self
            .generators
            .iter()
            .map(|g| {
                // Concatenated (x, z) words; the padding columns between the
                // halves are always zero and cannot create pivots.
                let mut row = g.x.clone();
                row.extend_from_slice(&g.z);
                row
            })
            .collect();
        let width = rows.first().map_or(0, |r| r.len() * WORD);
        gf2_rank(rows, width)
    }
}

/// Row-reduction rank of bit-packed rows over GF(2).
pub fn gf2_rank(mut rows: Vec<Vec<u64>>, width: usize) -> usize {
    let mut rank = 0;
    for col in 0..width {
        let (w, b) = (col / WORD, col % WORD);
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][w] >> b & 1 == 1) else {
            continue;
        };
        rows.swap(rank, pivot);
        let pivot_row = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[w] >> b & 1 == 1 {
                for (a, p) in row.iter_mut().zip(&pivot_row) {
                    *a ^= p;
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Coset label of a zero-syndrome residual with respect to fixed anticommuting
/// logical representatives. Well-defined on stabilizer cosets: multiplying the
/// residual by any stabilizer element cannot change either anticommutation bit.
///
/// Precondition: `residual` commutes with every stabilizer generator. Callers
/// decode residuals of the form R_U * Q, which satisfy this by construction.
pub fn logical_class(
    residual: &PauliOperator,
    logical_x: &PauliOperator,
    logical_z: &PauliOperator,
) -> LogicalClass {
    let anti_z = !residual.commutes(logical_z); // an X-like residual flips Z-bar
    let anti_x = !residual.commutes(logical_x); // a Z-like residual flips X-bar
    Pauli::from_bits(anti_z, anti_x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_op(n: usize, rng: &mut impl Rng) -> PauliOperator {
        let mut op = PauliOperator::identity(n);
        for q in 0..n {
            op.set(q, *Pauli::ALL.choose(rng).unwrap());
        }
        op
    }

    #[test]
    fn multiply_single_qubit_table() {
        let x = PauliOperator::parse("XI").unwrap();
        let z = PauliOperator::parse("ZI").unwrap();
        assert_eq!(x.multiply(&z), PauliOperator::parse("YI").unwrap());
    }

    #[test]
    fn multiply_self_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let a = random_op(70, &mut rng);
            assert!(a.multiply(&a).is_identity());
        }
    }

    #[test]
    fn multiply_overlapping_supports() {
        let a = PauliOperator::parse("XXI").unwrap();
        let b = PauliOperator::parse("IXX").unwrap();
        assert_eq!(a.multiply(&b), PauliOperator::parse("XIX").unwrap());
    }

    #[test]
    fn multiply_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let (a, b, c) = (random_op(67, &mut rng), random_op(67, &mut rng), random_op(67, &mut rng));
            assert_eq!(a.multiply(&b).multiply(&c), a.multiply(&b.multiply(&c)));
        }
    }

    #[test]
    #[should_panic(expected = "cannot multiply")]
    fn multiply_length_mismatch() {
        let _ = PauliOperator::identity(3).multiply(&PauliOperator::identity(4));
    }

    #[test]
    fn commutation_basics() {
        let x1 = PauliOperator::parse("XI").unwrap();
        let z1 = PauliOperator::parse("ZI").unwrap();
        let z2 = PauliOperator::parse("IZ").unwrap();
        assert!(!x1.commutes(&z1));
        assert!(x1.commutes(&z2));
        // YY vs XX: each position anticommutes, so the pair commutes overall.
        let yy = PauliOperator::parse("YY").unwrap();
        let xx = PauliOperator::parse("XX").unwrap();
        assert!(yy.commutes(&xx));
    }

    #[test]
    fn commutation_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let a = random_op(65, &mut rng);
            let b = random_op(65, &mut rng);
            assert_eq!(a.commutes(&b), b.commutes(&a));
        }
    }

    /// Bit-flip repetition code on 3 qubits: a minimal group with anticommuting
    /// logical representatives, handy for exercising coset logic.
    fn rep_code() -> (StabilizerGroup, PauliOperator, PauliOperator) {
        let group = StabilizerGroup::new(vec![
            PauliOperator::parse("ZZI").unwrap(),
            PauliOperator::parse("IZZ").unwrap(),
        ]);
        let lx = PauliOperator::parse("XXX").unwrap();
        let lz = PauliOperator::parse("ZII").unwrap();
        (group, lx, lz)
    }

    #[test]
    fn syndrome_identity_is_zero() {
        let (group, _, _) = rep_code();
        assert_eq!(group.syndrome(&PauliOperator::identity(3)), vec![false, false]);
    }

    #[test]
    fn syndrome_single_flip() {
        let (group, _, _) = rep_code();
        let e = PauliOperator::parse("IXI").unwrap();
        assert_eq!(group.syndrome(&e), vec![true, true]);
    }

    #[test]
    fn syndrome_is_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gens: Vec<PauliOperator> = (0..12).map(|_| random_op(40, &mut rng)).collect();
        let group = StabilizerGroup::new(gens);
        for _ in 0..1000 {
            let a = random_op(40, &mut rng);
            let b = random_op(40, &mut rng);
            let sa = group.syndrome(&a);
            let sb = group.syndrome(&b);
            let sab = group.syndrome(&a.multiply(&b));
            let xor: Vec<bool> = sa.iter().zip(&sb).map(|(&p, &q)| p ^ q).collect();
            assert_eq!(sab, xor);
        }
    }

    #[test]
    fn logical_class_table() {
        let (_, lx, lz) = rep_code();
        assert_eq!(logical_class(&PauliOperator::identity(3), &lx, &lz), Pauli::I);
        assert_eq!(logical_class(&lx, &lx, &lz), Pauli::X);
        assert_eq!(logical_class(&lz, &lx, &lz), Pauli::Z);
        assert_eq!(logical_class(&lx.multiply(&lz), &lx, &lz), Pauli::Y);
    }

    #[test]
    fn logical_class_coset_invariant() {
        let (group, lx, lz) = rep_code();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            // Random zero-syndrome residual: product of generators and representatives.
            let mut r = PauliOperator::identity(3);
            for g in &group.generators {
                if rng.random::<bool>() {
                    r.multiply_assign(g);
                }
            }
            if rng.random::<bool>() {
                r.multiply_assign(&lx);
            }
            if rng.random::<bool>() {
                r.multiply_assign(&lz);
            }
            debug_assert!(group.syndrome(&r).iter().all(|&b| !b));
            let class = logical_class(&r, &lx, &lz);
            for s in &group.generators {
                assert_eq!(logical_class(&r.multiply(s), &lx, &lz), class);
            }
        }
    }

    #[test]
    fn class_product_is_klein_four_group() {
        for a in Pauli::ALL {
            assert_eq!(a.product(a), Pauli::I);
            assert_eq!(a.product(Pauli::I), a);
            for b in Pauli::ALL {
                assert_eq!(a.product(b), b.product(a));
            }
        }
        assert_eq!(Pauli::X.product(Pauli::Z), Pauli::Y);
        assert_eq!(Pauli::X.product(Pauli::Y), Pauli::Z);
        assert_eq!(Pauli::Y.product(Pauli::Z), Pauli::X);
    }

    #[test]
    fn group_rank_detects_dependence() {
        let (group, _, _) = rep_code();
        assert_eq!(group.rank(), 2);
        let mut gens = group.generators.clone();
        gens.push(gens[0].multiply(&gens[1]));
        assert_eq!(StabilizerGroup::new(gens).rank(), 2);
    }

    #[test]
    fn parse_display_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let op = random_op(130, &mut rng);
            assert_eq!(PauliOperator::parse(&op.to_string()).unwrap(), op);
        }
        assert!(PauliOperator::parse("XQ").is_err());
    }

    #[test]
    fn weight_and_support() {
        let op = PauliOperator::parse("IXYZI").unwrap();
        assert_eq!(op.weight(), 3);
        assert_eq!(op.support(), vec![1, 2, 3]);
    }
}
