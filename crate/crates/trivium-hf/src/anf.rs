//! Exact algebraic-normal-form arithmetic over GF(2) and symbolic keystream
//! degree profiles for the clean and degraded machines.

use crate::{Error, Result};
use std::collections::{BTreeSet, HashSet};

/// Default per-polynomial monomial cap; converts blowup into an error.
pub const MONOMIAL_CAP: usize = 1 << 22;

const MONO_WORDS: usize = 5; // up to 320 variables

/// A monomial: a set of variable indices, packed as a bitset. The empty
/// monomial is the constant 1.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Monomial([u64; MONO_WORDS]);

impl Monomial {
    pub const ONE: Monomial = Monomial([0; MONO_WORDS]);

    pub fn var(i: usize) -> Self {
        assert!(i < MONO_WORDS * 64);
        let mut m = [0u64; MONO_WORDS];
        m[i / 64] = 1 << (i % 64);
        Monomial(m)
    }

    pub fn from_vars(vars: &[usize]) -> Self {
        let mut m = Monomial::ONE;
        for &v in vars {
            m = m.union(&Monomial::var(v));
        }
        m
    }

    pub fn union(&self, other: &Monomial) -> Monomial {
        let mut m = [0u64; MONO_WORDS];
        for i in 0..MONO_WORDS {
            m[i] = self.0[i] | other.0[i];
        }
        Monomial(m)
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn vars(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (wi, &w) in self.0.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                out.push(wi * 64 + w.trailing_zeros() as usize);
                w &= w - 1;
            }
        }
        out
    }

    pub fn evaluate(&self, point: &[bool]) -> bool {
        self.vars().iter().all(|&v| point[v])
    }
}

/// XOR-of-monomials polynomial with set semantics.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct AnfPoly {
    terms: BTreeSet<Monomial>,
}

impl AnfPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        let mut terms = BTreeSet::new();
        terms.insert(Monomial::ONE);
        Self { terms }
    }

    pub fn var(i: usize) -> Self {
        let mut terms = BTreeSet::new();
        terms.insert(Monomial::var(i));
        Self { terms }
    }

    pub fn from_monomials<I: IntoIterator<Item = Monomial>>(monomials: I) -> Self {
        let mut p = Self::zero();
        for m in monomials {
            p.toggle(m);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = &Monomial> {
        self.terms.iter()
    }

    fn toggle(&mut self, m: Monomial) {
        if !self.terms.insert(m) {
            self.terms.remove(&m);
        }
    }

    pub fn add(&self, other: &AnfPoly) -> AnfPoly {
        let mut out = self.clone();
        for &m in &other.terms {
            out.toggle(m);
        }
        out
    }

    pub fn add_assign(&mut self, other: &AnfPoly) {
        for &m in &other.terms {
            self.toggle(m);
        }
    }

    /// Distributive product with cancellation; errors past `cap` live terms.
    pub fn mul(&self, other: &AnfPoly, cap: usize) -> Result<AnfPoly> {
        let mut acc: HashSet<Monomial> = HashSet::new();
        for a in &self.terms {
            for b in &other.terms {
                let m = a.union(b);
                if !acc.insert(m) {
                    acc.remove(&m);
                }
            }
            if acc.len() > cap {
                return Err(Error::MonomialCap {
                    cap,
                    context: "anf multiplication".into(),
                });
            }
        }
        Ok(AnfPoly {
            terms: acc.into_iter().collect(),
        })
    }

    /// Exact degree; -1 for the zero polynomial.
    pub fn degree(&self) -> i32 {
        self.terms
            .iter()
            .map(|m| m.degree() as i32)
            .max()
            .unwrap_or(-1)
    }

    pub fn evaluate(&self, point: &[bool]) -> bool {
        self.terms
            .iter()
            .fold(false, |acc, m| acc ^ m.evaluate(point))
    }
}

/// Which machine the symbolic run models.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SymbolicVariant {
    /// Full 288-bit Trivium.
    Clean,
    /// 273-bit machine with positions 163..177 removed.
    Case4,
    /// 273-bit machine with the extra s186+s273 feedback taps.
    Case5,
    /// 287-bit machine with position 177 removed.
    Case6,
}

impl SymbolicVariant {
    pub fn state_width(self) -> usize {
        match self {
            SymbolicVariant::Clean => 288,
            SymbolicVariant::Case4 | SymbolicVariant::Case5 => 273,
            SymbolicVariant::Case6 => 287,
        }
    }
}

/// Symbolic machine: one polynomial per live state cell, seeded with
/// distinct variables.
struct SymbolicState {
    variant: SymbolicVariant,
    r1: Vec<AnfPoly>, // 93 cells
    r2: Vec<AnfPoly>, // 69 / 83 / 84 cells
    r3: Vec<AnfPoly>, // 111 cells
    cap: usize,
}

impl SymbolicState {
    fn new(variant: SymbolicVariant, cap: usize) -> Self {
        let r2_len = match variant {
            SymbolicVariant::Clean => 84,
            SymbolicVariant::Case4 | SymbolicVariant::Case5 => 69,
            SymbolicVariant::Case6 => 83,
        };
        let mut idx = 0;
        let mut take = |n: usize| {
            let v: Vec<AnfPoly> = (idx..idx + n).map(AnfPoly::var).collect();
            idx += n;
            v
        };
        Self {
            variant,
            r1: take(93),
            r2: take(r2_len),
            r3: take(111),
            cap,
        }
    }

    /// z = s66 + s93 + (last two live cells of register 2 for the clean
    /// machine, else only s162) + s243 + s288.
    fn output(&self) -> AnfPoly {
        let mut z = self.r1[65].add(&self.r1[92]);
        match self.variant {
            SymbolicVariant::Clean => {
                z.add_assign(&self.r2[68]);
                z.add_assign(&self.r2[83]);
            }
            SymbolicVariant::Case4 | SymbolicVariant::Case5 | SymbolicVariant::Case6 => {
                z.add_assign(&self.r2[68]);
            }
        }
        z.add_assign(&self.r3[65]);
        z.add_assign(&self.r3[110]);
        z
    }

    fn step(&mut self) -> Result<()> {
        let cap = self.cap;
        let t3 = {
            let mut t = self.r3[65].clone();
            t.add_assign(&self.r3[108].mul(&self.r3[109], cap)?);
            t.add_assign(&self.r3[110]);
            t.add_assign(&self.r1[68]);
            t
        };
        let t1 = {
            let mut t = self.r1[65].clone();
            t.add_assign(&self.r1[90].mul(&self.r1[91], cap)?);
            t.add_assign(&self.r1[92]);
            match self.variant {
                SymbolicVariant::Clean => t.add_assign(&self.r2[77]), // s171
                SymbolicVariant::Case4 => {}                          // s171 stuck at 0
                SymbolicVariant::Case5 => {
                    t.add_assign(&self.r3[8]);  // s186
                    t.add_assign(&self.r3[95]); // s273
                }
                SymbolicVariant::Case6 => t.add_assign(&self.r2[77]), // s171
            }
            t
        };
        let t2 = {
            let mut t = self.r2[68].clone(); // s162
            match self.variant {
                SymbolicVariant::Clean => {
                    t.add_assign(&self.r2[81].mul(&self.r2[82], cap)?); // s175 s176
                    t.add_assign(&self.r2[83]); // s177
                }
                SymbolicVariant::Case4 | SymbolicVariant::Case5 => {}
                SymbolicVariant::Case6 => {
                    t.add_assign(&self.r2[81].mul(&self.r2[82], cap)?); // s175 s176
                }
            }
            t.add_assign(&self.r3[86]); // s264
            t
        };
        self.r1.pop();
        self.r1.insert(0, t3);
        self.r2.pop();
        self.r2.insert(0, t1);
        self.r3.pop();
        self.r3.insert(0, t2);
        Ok(())
    }
}

/// Degrees of z0..z_{n-1} as functions of the initial state, one symbolic
/// variable per live cell.
pub fn symbolic_keystream_degrees(variant: SymbolicVariant, n: usize) -> Result<Vec<i32>> {
    symbolic_keystream_degrees_with_cap(variant, n, MONOMIAL_CAP)
}

pub fn symbolic_keystream_degrees_with_cap(
    variant: SymbolicVariant,
    n: usize,
    cap: usize,
) -> Result<Vec<i32>> {
    assert!(n <= 240, "symbolic runs are bounded at 240 steps");
    let mut state = SymbolicState::new(variant, cap);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(state.output().degree());
        state.step()?;
    }
    Ok(out)
}

/// Möbius subcube probe: certifies degree ≥ d by finding a d-subset of
/// variables whose subcube XOR (2^d evaluations of `f` with all other
/// variables fixed to zero) is 1. Sound for "at least d" claims only.
pub fn probe_degree_at_least<F>(
    f: F,
    num_vars: usize,
    d: usize,
    attempts: usize,
    seed: u64,
) -> bool
where
    F: Fn(&[bool]) -> bool,
{
    use rand::seq::index::sample;
    use rand::{rngs::StdRng, SeedableRng};
    let mut rng = StdRng::seed_from_u64(seed);
    let mut point = vec![false; num_vars];
    for _ in 0..attempts {
        let subset: Vec<usize> = sample(&mut rng, num_vars, d).into_vec();
        let mut acc = false;
        for assignment in 0u32..1 << d {
            for (bit, &v) in subset.iter().enumerate() {
                point[v] = assignment >> bit & 1 == 1;
            }
            acc ^= f(&point);
        }
        for &v in &subset {
            point[v] = false;
        }
        if acc {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_poly(rng: &mut StdRng, nvars: usize, nterms: usize) -> AnfPoly {
        AnfPoly::from_monomials((0..nterms).map(|_| {
            let deg = rng.gen_range(0..=nvars);
            let mut vars = Vec::new();
            for _ in 0..deg {
                vars.push(rng.gen_range(0..nvars));
            }
            Monomial::from_vars(&vars)
        }))
    }

    #[test]
    fn mul_of_vars() {
        let p = AnfPoly::var(0).mul(&AnfPoly::var(1), 16).unwrap();
        assert_eq!(p.num_terms(), 1);
        assert_eq!(p.degree(), 2);
    }

    #[test]
    fn add_cancels() {
        let mut rng = StdRng::seed_from_u64(1);
        let p = random_poly(&mut rng, 8, 10);
        assert!(p.add(&p).is_zero());
        assert_eq!(p.add(&p).degree(), -1);
    }

    #[test]
    fn eval_matches_truth_table_arithmetic() {
        let mut rng = StdRng::seed_from_u64(2);
        for _ in 0..50 {
            let n = rng.gen_range(1..=8);
            let a = random_poly(&mut rng, n, 12);
            let b = random_poly(&mut rng, n, 12);
            let sum = a.add(&b);
            let prod = a.mul(&b, 1 << 16).unwrap();
            for x in 0u32..1 << n {
                let point: Vec<bool> = (0..n).map(|i| x >> i & 1 == 1).collect();
                assert_eq!(sum.evaluate(&point), a.evaluate(&point) ^ b.evaluate(&point));
                assert_eq!(prod.evaluate(&point), a.evaluate(&point) & b.evaluate(&point));
            }
        }
    }

    #[test]
    fn degree_subadditive_under_mul() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..50 {
            let a = random_poly(&mut rng, 10, 8);
            let b = random_poly(&mut rng, 10, 8);
            let p = a.mul(&b, 1 << 16).unwrap();
            if !p.is_zero() {
                assert!(p.degree() <= a.degree() + b.degree());
            }
        }
    }

    #[test]
    fn mul_cap_enforced() {
        // (x0+..+x9)(x10+..+x19) has 100 terms
        let a = AnfPoly::from_monomials((0..10).map(Monomial::var));
        let b = AnfPoly::from_monomials((10..20).map(Monomial::var));
        assert!(matches!(a.mul(&b, 50), Err(Error::MonomialCap { .. })));
        assert_eq!(a.mul(&b, 100).unwrap().num_terms(), 100);
    }

    #[test]
    fn clean_symbolic_prefix() {
        // first 66 outputs are linear, z66 is quadratic
        let degs = symbolic_keystream_degrees(SymbolicVariant::Clean, 70).unwrap();
        for (i, &d) in degs.iter().enumerate() {
            if i <= 65 {
                assert_eq!(d, 1, "z{i}");
            } else {
                assert_eq!(d, 2, "z{i}");
            }
        }
    }

    #[test]
    fn probe_finds_quadratic() {
        // f = x0 x1 + x2
        let f = |p: &[bool]| (p[0] && p[1]) ^ p[2];
        assert!(probe_degree_at_least(f, 3, 2, 10, 7));
        assert!(!probe_degree_at_least(f, 3, 3, 20, 7));
    }
}
