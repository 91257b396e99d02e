//! Dense linear algebra over GF(2): bit-packed vectors, systems with named
//! variables, Gaussian elimination to an affine solution set, and solution
//! enumeration.

use crate::{Error, Result};

/// Dense bit vector of fixed width, packed into machine words.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct BitVec {
    width: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(width: usize) -> Self {
        assert!(width > 0, "BitVec width must be positive");
        Self {
            width,
            words: vec![0; width.div_ceil(64)],
        }
    }

    pub fn unit(width: usize, i: usize) -> Self {
        let mut v = Self::zeros(width);
        v.set(i, true);
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.width);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        debug_assert!(i < self.width);
        if v {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1u64 << (i % 64));
        }
    }

    #[inline]
    pub fn xor_assign(&mut self, other: &BitVec) {
        debug_assert_eq!(self.width, other.width);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Index of the first set bit, if any.
    pub fn first_set(&self) -> Option<usize> {
        for (wi, &w) in self.words.iter().enumerate() {
            if w != 0 {
                return Some(wi * 64 + w.trailing_zeros() as usize);
            }
        }
        None
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.width).map(|i| self.get(i))
    }

    /// GF(2) dot product.
    pub fn dot(&self, other: &BitVec) -> bool {
        debug_assert_eq!(self.width, other.width);
        self.words
            .iter()
            .zip(&other.words)
            .fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones())
            & 1
            == 1
    }
}

/// A linear system over GF(2) with named columns.
#[derive(Clone, Debug)]
pub struct Gf2System {
    variables: Vec<String>,
    rows: Vec<BitVec>,
    constants: Vec<bool>,
}

impl Gf2System {
    pub fn new(variables: Vec<String>) -> Self {
        assert!(!variables.is_empty());
        let mut seen = std::collections::HashSet::new();
        for v in &variables {
            assert!(seen.insert(v.clone()), "duplicate variable name {v}");
        }
        Self {
            variables,
            rows: Vec::new(),
            constants: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn push_row(&mut self, coefficients: BitVec, constant: bool) {
        assert_eq!(coefficients.width(), self.num_vars());
        self.rows.push(coefficients);
        self.constants.push(constant);
    }

    pub fn row(&self, i: usize) -> (&BitVec, bool) {
        (&self.rows[i], self.constants[i])
    }

    /// True iff the assignment satisfies every row.
    pub fn check(&self, assignment: &BitVec) -> bool {
        self.rows
            .iter()
            .zip(&self.constants)
            .all(|(r, &c)| r.dot(assignment) == c)
    }

    /// Row-reduces and returns the affine solution set, or reports an
    /// inconsistent system.
    pub fn eliminate(&self) -> Result<AffineSolutionSet> {
        let n = self.num_vars();
        let mut rows: Vec<(BitVec, bool)> = self
            .rows
            .iter()
            .cloned()
            .zip(self.constants.iter().copied())
            .collect();
        let mut pivot_of_col: Vec<Option<usize>> = vec![None; n];
        let mut r = 0usize;
        for col in 0..n {
            let Some(pr) = (r..rows.len()).find(|&i| rows[i].0.get(col)) else {
                continue;
            };
            rows.swap(r, pr);
            let (pivot_row, pivot_const) = rows[r].clone();
            for (i, (row, c)) in rows.iter_mut().enumerate() {
                if i != r && row.get(col) {
                    row.xor_assign(&pivot_row);
                    *c ^= pivot_const;
                }
            }
            pivot_of_col[col] = Some(r);
            r += 1;
            if r == rows.len() {
                break;
            }
        }
        let rank = r;
        if rows[rank..].iter().any(|(row, c)| row.is_zero() && *c) {
            return Err(Error::Inconsistent);
        }
        // particular solution: free variables 0, pivot variables from constants
        let mut particular = BitVec::zeros(n);
        for col in 0..n {
            if let Some(pr) = pivot_of_col[col] {
                particular.set(col, rows[pr].1);
            }
        }
        // nullspace basis: one vector per free column
        let mut basis = Vec::with_capacity(n - rank);
        let mut free_cols = Vec::with_capacity(n - rank);
        for free in 0..n {
            if pivot_of_col[free].is_some() {
                continue;
            }
            let mut v = BitVec::zeros(n);
            v.set(free, true);
            for col in 0..n {
                if let Some(pr) = pivot_of_col[col] {
                    if rows[pr].0.get(free) {
                        v.set(col, true);
                    }
                }
            }
            basis.push(v);
            free_cols.push(free);
        }
        Ok(AffineSolutionSet {
            particular,
            basis,
            free_cols,
            rank,
        })
    }

    /// One row per line, coefficient bits then '|' then the constant bit,
    /// preceded by a header line of variable names.
    pub fn dump(&self) -> String {
        let mut out = self.variables.join(" ");
        out.push('\n');
        for (row, &c) in self.rows.iter().zip(&self.constants) {
            for b in row.iter() {
                out.push(if b { '1' } else { '0' });
            }
            out.push('|');
            out.push(if c { '1' } else { '0' });
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty system dump".into()))?;
        let variables: Vec<String> = header.split_whitespace().map(String::from).collect();
        let mut system = Gf2System::new(variables);
        let n = system.num_vars();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let (coeffs, c) = line
                .split_once('|')
                .ok_or_else(|| Error::Parse(format!("missing '|' in row `{line}`")))?;
            if coeffs.len() != n {
                return Err(Error::Parse(format!(
                    "row width {} does not match {} variables",
                    coeffs.len(),
                    n
                )));
            }
            let mut row = BitVec::zeros(n);
            for (i, ch) in coeffs.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => row.set(i, true),
                    _ => return Err(Error::Parse(format!("invalid bit `{ch}`"))),
                }
            }
            let c = match c {
                "0" => false,
                "1" => true,
                _ => return Err(Error::Parse(format!("invalid constant `{c}`"))),
            };
            system.push_row(row, c);
        }
        Ok(system)
    }
}

/// particular + span(basis); dimension n - rank.
#[derive(Clone, Debug)]
pub struct AffineSolutionSet {
    pub particular: BitVec,
    pub basis: Vec<BitVec>,
    /// Column index of the free variable behind each basis vector.
    pub free_cols: Vec<usize>,
    pub rank: usize,
}

impl AffineSolutionSet {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn num_solutions(&self) -> Option<u128> {
        (self.basis.len() < 128).then(|| 1u128 << self.basis.len())
    }

    /// All solutions, rejected if 2^dimension exceeds `cap`.
    pub fn enumerate(&self, cap: usize) -> Result<Vec<BitVec>> {
        let dim = self.basis.len();
        if dim >= usize::BITS as usize || (1usize << dim) > cap {
            return Err(Error::SolutionOverflow { dim, cap });
        }
        let mut out = Vec::with_capacity(1 << dim);
        // Gray-code walk: flip one basis vector per step
        let mut current = self.particular.clone();
        out.push(current.clone());
        for i in 1usize..1 << dim {
            let flip = i.trailing_zeros() as usize;
            current.xor_assign(&self.basis[flip]);
            out.push(current.clone());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_system(rng: &mut StdRng, n: usize, m: usize) -> Gf2System {
        let vars = (0..n).map(|i| format!("x{i}")).collect();
        let mut sys = Gf2System::new(vars);
        for _ in 0..m {
            let mut row = BitVec::zeros(n);
            for i in 0..n {
                row.set(i, rng.gen());
            }
            sys.push_row(row, rng.gen());
        }
        sys
    }

    /// Brute-force: enumerate all 2^n assignments and collect solutions.
    fn brute_force_solutions(sys: &Gf2System) -> Vec<BitVec> {
        let n = sys.num_vars();
        (0u32..1 << n)
            .map(|x| {
                let mut v = BitVec::zeros(n);
                for i in 0..n {
                    v.set(i, x >> i & 1 == 1);
                }
                v
            })
            .filter(|v| sys.check(v))
            .collect()
    }

    #[test]
    fn identity_system_unique_solution() {
        let n = 8;
        let mut sys = Gf2System::new((0..n).map(|i| format!("x{i}")).collect());
        for i in 0..n {
            sys.push_row(BitVec::unit(n, i), i % 2 == 0);
        }
        let sols = sys.eliminate().unwrap();
        assert_eq!(sols.rank, n);
        assert_eq!(sols.dimension(), 0);
        let all = sols.enumerate(16).unwrap();
        assert_eq!(all.len(), 1);
        assert!(sys.check(&all[0]));
    }

    #[test]
    fn zero_rows_full_space() {
        let n = 4;
        let mut sys = Gf2System::new((0..n).map(|i| format!("x{i}")).collect());
        sys.push_row(BitVec::zeros(n), false);
        let sols = sys.eliminate().unwrap();
        assert_eq!(sols.rank, 0);
        assert_eq!(sols.dimension(), n);
        assert_eq!(sols.enumerate(16).unwrap().len(), 16);
    }

    #[test]
    fn inconsistent_detected() {
        let n = 3;
        let mut sys = Gf2System::new((0..n).map(|i| format!("x{i}")).collect());
        let mut row = BitVec::zeros(n);
        row.set(0, true);
        row.set(1, true);
        sys.push_row(row.clone(), false);
        sys.push_row(row, true);
        assert!(matches!(sys.eliminate(), Err(Error::Inconsistent)));
    }

    #[test]
    fn enumeration_cap_enforced() {
        let n = 10;
        let sys = Gf2System::new((0..n).map(|i| format!("x{i}")).collect());
        let mut sys = sys;
        sys.push_row(BitVec::zeros(n), false);
        let sols = sys.eliminate().unwrap();
        assert!(matches!(
            sols.enumerate(512),
            Err(Error::SolutionOverflow { dim: 10, cap: 512 })
        ));
    }

    #[test]
    fn matches_brute_force_on_random_small_systems() {
        let mut rng = StdRng::seed_from_u64(20);
        for _ in 0..100 {
            let n = rng.gen_range(1..=10);
            let m = rng.gen_range(0..=12);
            let sys = random_system(&mut rng, n, m);
            let expected = brute_force_solutions(&sys);
            match sys.eliminate() {
                Err(Error::Inconsistent) => assert!(expected.is_empty()),
                Err(e) => panic!("unexpected error {e}"),
                Ok(sols) => {
                    let mut got = sols.enumerate(1 << n).unwrap();
                    assert_eq!(got.len(), expected.len());
                    for s in &got {
                        assert!(sys.check(s));
                    }
                    got.sort_by_key(|v| v.iter().collect::<Vec<_>>());
                    let mut exp = expected;
                    exp.sort_by_key(|v| v.iter().collect::<Vec<_>>());
                    assert_eq!(got, exp);
                }
            }
        }
    }

    #[test]
    fn dump_roundtrip() {
        let mut rng = StdRng::seed_from_u64(21);
        let sys = random_system(&mut rng, 7, 5);
        let text = sys.dump();
        let back = Gf2System::parse(&text).unwrap();
        assert_eq!(back.variables(), sys.variables());
        assert_eq!(back.num_rows(), sys.num_rows());
        for i in 0..sys.num_rows() {
            assert_eq!(back.row(i), sys.row(i));
        }
    }
}
