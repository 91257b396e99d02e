//! Per-case key recovery from a faulted machine's keystream.
//!
//! Case 1: the keystream is an affine function of k1..k69, identical for
//! every Case 1 mask; inverting it pins the first 69 key bits down to a
//! small candidate set. Case 2: 3588 keystream bits give a linear system
//! over a 216-variable snapshot of the first two registers at time 27,
//! sharpened by quadratic feedback relations to a unique solution and the
//! full 80-bit key. Case 3: 4524 bits give a 243-variable system over the
//! time-98 snapshot, whose unique consistent solution yields a1..a92 and
//! from it partial key knowledge. Cases 4-6 get structural reports.

use std::collections::VecDeque;

use crate::anf::{AnfPoly, Monomial};
use crate::bits::{Iv, Key, Keystream};
use crate::fault::{CaseLabel, FaultMask};
use crate::gf2::{BitVec, Gf2System};
use crate::trivium::{self, State, StateMask};
use crate::{Error, Result};

/// Number of keystream bits consumed by the Case 2 system (two periods of
/// the 1794-bit Case 2 keystream cycle).
pub const CASE2_KEYSTREAM_BITS: usize = 3588;
/// Number of keystream bits consumed by the Case 3 system.
pub const CASE3_KEYSTREAM_BITS: usize = 4524;

const C2_NV: usize = 216;
const C3_NV: usize = 243;

// ---------------------------------------------------------------------------
// a- and b-sequences

/// Which register snapshot an a-sequence was defined against.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AContext {
    /// a1..a96; periodic with period 69 for t >= 27, extended backwards by
    /// a_{t+1} = a_{t+70}.
    Case2,
    /// a1..a92; a_{t+1} = 0 for t >= 92.
    Case3,
}

/// The first-register feedback sequence a_{t+1} = s(t,66)+s(t,91)s(t,92)+s(t,93).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ASequence {
    context: AContext,
    values: Vec<bool>, // values[n-1] = a_n
}

impl ASequence {
    pub fn case2(values: Vec<bool>) -> Result<Self> {
        if values.len() != 96 {
            return Err(Error::Parse(format!(
                "Case 2 a-sequence holds a1..a96, got {} values",
                values.len()
            )));
        }
        Ok(Self { context: AContext::Case2, values })
    }

    pub fn case3(values: Vec<bool>) -> Result<Self> {
        if values.len() != 92 {
            return Err(Error::Parse(format!(
                "Case 3 a-sequence holds a1..a92, got {} values",
                values.len()
            )));
        }
        Ok(Self { context: AContext::Case3, values })
    }

    pub fn context(&self) -> AContext {
        self.context
    }

    /// 1-based access: `a.a(1)` is a1.
    pub fn a(&self, n: usize) -> bool {
        assert!((1..=self.values.len()).contains(&n));
        self.values[n - 1]
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    /// Ground-truth a28..a96 window read off the masked machine, extended
    /// backwards by the period-69 rule a_{t+1} = a_{t+70}.
    pub fn simulate_case2(key: &Key, mask: &FaultMask) -> Self {
        let snaps = masked_states(key, mask, 95);
        let mut values = vec![false; 96];
        for t in 27..=95u64 {
            values[t as usize] = feed_a(&snaps[t as usize]); // a_{t+1}
        }
        for n in (1..=27usize).rev() {
            values[n - 1] = values[n + 69 - 1]; // a_n = a_{n+69}
        }
        Self { context: AContext::Case2, values }
    }

    /// Ground-truth a1..a92 read off the masked machine at times 0..91.
    pub fn simulate_case3(key: &Key, mask: &FaultMask) -> Self {
        let snaps = masked_states(key, mask, 91);
        let values = (0..92).map(|t| feed_a(&snaps[t])).collect();
        Self { context: AContext::Case3, values }
    }
}

/// The second-register feedback sequence b_{t+1} = s(t,162)+s(t,175)s(t,176)+s(t,177),
/// stored as b75..b176 (period 78 for t >= 98, extended backwards by
/// b_{t+1} = b_{t+79}).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BSequence {
    values: Vec<bool>, // values[n-75] = b_n, n in 75..=176
}

impl BSequence {
    pub fn new(values: Vec<bool>) -> Result<Self> {
        if values.len() != 102 {
            return Err(Error::Parse(format!(
                "b-sequence holds b75..b176, got {} values",
                values.len()
            )));
        }
        Ok(Self { values })
    }

    /// 1-based access, n in 75..=176.
    pub fn b(&self, n: usize) -> bool {
        assert!((75..=176).contains(&n));
        self.values[n - 75]
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn simulate(key: &Key, mask: &FaultMask) -> Self {
        let snaps = masked_states(key, mask, 175);
        let mut values = vec![false; 102];
        for t in 98..=175usize {
            values[t + 1 - 75] = feed_b(&snaps[t]); // b_{t+1}
        }
        for n in (75..=98usize).rev() {
            values[n - 75] = values[n + 78 - 75]; // b_n = b_{n+78}
        }
        Self { values }
    }
}

fn feed_a(s: &State) -> bool {
    s.get(66) ^ (s.get(91) & s.get(92)) ^ s.get(93)
}

fn feed_b(s: &State) -> bool {
    s.get(162) ^ (s.get(175) & s.get(176)) ^ s.get(177)
}

/// States of the masked machine at times 0..=upto (IV = 0).
pub(crate) fn masked_states(key: &Key, mask: &FaultMask, upto: u64) -> Vec<State> {
    let m = StateMask::from(mask);
    let mut s = State::load_input(key, &Iv::zero());
    s.apply_mask(&m);
    let mut out = Vec::with_capacity(upto as usize + 1);
    out.push(s);
    for _ in 0..upto {
        s.update(&m);
        out.push(s);
    }
    out
}

// ---------------------------------------------------------------------------
// Key knowledge

/// A Boolean equation over the key bits: `lhs(k1..k80) = rhs`. Polynomial
/// variable i stands for k_{i+1}.
#[derive(Clone, Debug)]
pub struct KeyEquation {
    pub lhs: AnfPoly,
    pub rhs: bool,
    pub note: String,
}

impl KeyEquation {
    pub fn new(lhs: AnfPoly, rhs: bool, note: impl Into<String>) -> Self {
        Self { lhs, rhs, note: note.into() }
    }

    pub fn holds(&self, key: &Key) -> bool {
        self.lhs.evaluate(key.bits()) == self.rhs
    }

    /// Human-readable form, e.g. `k54 + k79*k80 = 1`.
    pub fn render(&self) -> String {
        let terms: Vec<String> = self
            .lhs
            .terms()
            .map(|m| {
                let vars = m.vars();
                if vars.is_empty() {
                    "1".to_string()
                } else {
                    vars.iter()
                        .map(|&v| format!("k{}", v + 1))
                        .collect::<Vec<_>>()
                        .join("*")
                }
            })
            .collect();
        let lhs = if terms.is_empty() { "0".to_string() } else { terms.join(" + ") };
        format!("{} = {}", lhs, if self.rhs { 1 } else { 0 })
    }
}

/// Solver bookkeeping attached to a recovery result.
#[derive(Clone, Debug, Default)]
pub struct AttackDiagnostics {
    pub rank_observed: Option<usize>,
    pub solution_dim: Option<usize>,
    pub candidates_before_filter: Option<usize>,
    pub survivors: Option<usize>,
    pub notes: Vec<String>,
}

/// What an attack learned about k1..k80: individually known bits with
/// provenance, residual relations that must all hold, alternative relation
/// sets of which at least one holds, and (for Case 1) an explicit candidate
/// list for a key prefix.
#[derive(Clone, Debug)]
pub struct KeyKnowledge {
    bits: [Option<bool>; 80],
    bit_sources: Vec<(usize, String)>, // (1-based index, provenance)
    pub relations: Vec<KeyEquation>,
    /// Alternative residual relation sets; at least one set holds in full.
    pub alternatives: Vec<Vec<KeyEquation>>,
    /// Explicit candidates for (k1..k_n) where n = `candidates_len`.
    pub candidates: Vec<Vec<bool>>,
    pub candidates_len: usize,
    pub diagnostics: AttackDiagnostics,
}

impl Default for KeyKnowledge {
    fn default() -> Self {
        Self::new()
    }
}

impl KeyKnowledge {
    pub fn new() -> Self {
        Self {
            bits: [None; 80],
            bit_sources: Vec::new(),
            relations: Vec::new(),
            alternatives: Vec::new(),
            candidates: Vec::new(),
            candidates_len: 0,
            diagnostics: AttackDiagnostics::default(),
        }
    }

    /// Records bit k_i (1-based) with a provenance note; conflicting values
    /// are an error.
    pub fn set_bit(&mut self, i: usize, v: bool, source: impl Into<String>) -> Result<()> {
        assert!((1..=80).contains(&i));
        match self.bits[i - 1] {
            Some(old) if old != v => Err(Error::Inconsistent),
            Some(_) => Ok(()),
            None => {
                self.bits[i - 1] = Some(v);
                self.bit_sources.push((i, source.into()));
                Ok(())
            }
        }
    }

    /// 1-based access.
    pub fn bit(&self, i: usize) -> Option<bool> {
        assert!((1..=80).contains(&i));
        self.bits[i - 1]
    }

    pub fn bits(&self) -> &[Option<bool>; 80] {
        &self.bits
    }

    pub fn bit_sources(&self) -> &[(usize, String)] {
        &self.bit_sources
    }

    pub fn known_count(&self) -> usize {
        self.bits.iter().filter(|b| b.is_some()).count()
    }

    /// 80 characters of '0' / '1' / '?' for k1..k80.
    pub fn known_string(&self) -> String {
        self.bits
            .iter()
            .map(|b| match b {
                Some(true) => '1',
                Some(false) => '0',
                None => '?',
            })
            .collect()
    }

    /// If every bit is known, assemble the full key.
    pub fn full_key(&self) -> Option<Key> {
        let mut bits = [false; 80];
        for (i, b) in self.bits.iter().enumerate() {
            bits[i] = (*b)?;
        }
        Some(Key::from_bits(bits))
    }

    /// True iff nothing recorded here contradicts `key`: every known bit
    /// matches, every relation holds, at least one alternative set holds (if
    /// any), and the candidate list contains the key's prefix (if present).
    pub fn consistent_with(&self, key: &Key) -> bool {
        let bits_ok = (1..=80).all(|i| self.bit(i).is_none_or(|v| v == key.bit(i)));
        let relations_ok = self.relations.iter().all(|e| e.holds(key));
        let alternatives_ok = self.alternatives.is_empty()
            || self
                .alternatives
                .iter()
                .any(|set| set.iter().all(|e| e.holds(key)));
        let candidates_ok = self.candidates.is_empty()
            || self.candidates.iter().any(|c| {
                c.iter()
                    .enumerate()
                    .all(|(j, &v)| v == key.bit(j + 1))
            });
        bits_ok && relations_ok && alternatives_ok && candidates_ok
    }
}

// ---------------------------------------------------------------------------
// Case 1

/// Inverts the Case 1 keystream map. Every Case 1 mask produces the same
/// keystream (an affine function of k1..k69 with period 69), so the map is
/// precomputed here by probing a fixed Case 1 machine with the zero key and
/// the 69 unit keys. The map has rank 66: k1..k69 are pinned down to an
/// 8-element candidate set and 66 independent linear relations; no single
/// bit is individually determined, and k70..k80 are out of reach.
pub fn attack_case1(ks: &Keystream) -> Result<KeyKnowledge> {
    if ks.len() < 70 {
        return Err(Error::WrongCase(format!(
            "Case 1 needs more than 69 keystream bits for the period check, got {}",
            ks.len()
        )));
    }
    if !ks.has_period(69) {
        return Err(Error::WrongCase(
            "keystream does not have period 69".into(),
        ));
    }
    let probe = FaultMask::single(100).expect("100 is a valid position");
    let base = trivium::keystream(&Key::zero(), &Iv::zero(), &probe, 69)?;
    let mut sys = Gf2System::new((1..=69).map(|i| format!("k{i}")).collect());
    let mut cols = Vec::with_capacity(69);
    for e in 1..=69usize {
        let mut k = Key::zero();
        k.set_bit(e, true);
        let z = trivium::keystream(&k, &Iv::zero(), &probe, 69)?;
        cols.push(z);
    }
    for m in 0..69 {
        let mut row = BitVec::zeros(69);
        for (e, col) in cols.iter().enumerate() {
            row.set(e, col.bit(m) ^ base.bit(m));
        }
        sys.push_row(row, ks.bit(m) ^ base.bit(m));
    }
    let sols = sys.eliminate().map_err(|e| match e {
        Error::Inconsistent => {
            Error::WrongCase("keystream is not in the image of the Case 1 map".into())
        }
        other => other,
    })?;
    let candidates = sols.enumerate(256)?;

    let mut kk = KeyKnowledge::new();
    // a bit is individually determined iff no kernel vector touches it
    for i in 0..69 {
        if sols.basis.iter().all(|v| !v.get(i)) {
            kk.set_bit(i + 1, sols.particular.get(i), "keystream map pivot")?;
        }
    }
    // pivot rows of the reduced system, expressed over the free variables
    for col in 0..69 {
        if sols.free_cols.contains(&col) {
            continue;
        }
        let mut lhs = AnfPoly::var(col);
        for (j, &f) in sols.free_cols.iter().enumerate() {
            if sols.basis[j].get(col) {
                lhs.add_assign(&AnfPoly::var(f));
            }
        }
        kk.relations.push(KeyEquation::new(
            lhs,
            sols.particular.get(col),
            "row-reduced keystream map",
        ));
    }
    kk.candidates = candidates
        .iter()
        .map(|c| c.iter().collect::<Vec<bool>>())
        .collect();
    kk.candidates_len = 69;
    kk.diagnostics.rank_observed = Some(sols.rank);
    kk.diagnostics.solution_dim = Some(sols.dimension());
    kk.diagnostics.candidates_before_filter = Some(candidates.len());
    kk.diagnostics.notes.push(format!(
        "k1..k69 determined up to {} candidates (map rank {} of 69); k70..k80 unreachable",
        candidates.len(),
        sols.rank
    ));
    Ok(kk)
}

// ---------------------------------------------------------------------------
// Case 2

// variable layout: 0..68 = s27_25..s27_93, 69..146 = s27_100..s27_177
// (172..177 in the changed convention), 147..215 = a28..a96
fn c2_reg1(pos: usize) -> usize {
    debug_assert!((25..=93).contains(&pos));
    pos - 25
}

fn c2_reg2(pos: usize) -> usize {
    debug_assert!((100..=177).contains(&pos));
    69 + pos - 100
}

fn c2_a(idx: usize) -> usize {
    debug_assert!((28..=96).contains(&idx));
    147 + idx - 28
}

/// Cyclic first-register variable for a (possibly out-of-range) position;
/// positions 1..24 alias positions 70..93.
fn c2_cycvar(pos: i64) -> usize {
    let p = ((pos - 1).rem_euclid(69) + 1) as usize;
    if p <= 24 {
        c2_reg1(p + 69)
    } else {
        c2_reg1(p)
    }
}

fn case2_var_names() -> Vec<String> {
    let mut names: Vec<String> = (25..=93).map(|p| format!("s27_{p}")).collect();
    names.extend((100..=177).map(|p| format!("s27_{p}")));
    names.extend((28..=96).map(|i| format!("a{i}")));
    names
}

/// Builds the 3588 x 216 linear system expressing z0..z3587 over the
/// time-27 snapshot (s27_25..93, s27_100..177, a28..a96). The first
/// register runs as a pure 69-cycle; the second register's feed is
/// s(t+1,94) = s(t,171) + a_{t+1} with a-subscripts reduced mod 69 into the
/// a28..a96 window; the third register contributes nothing after time 27.
pub fn build_case2_system(ks: &Keystream) -> Result<Gf2System> {
    if ks.len() < CASE2_KEYSTREAM_BITS {
        return Err(Error::WrongCase(format!(
            "Case 2 system needs {CASE2_KEYSTREAM_BITS} keystream bits, got {}",
            ks.len()
        )));
    }
    let mut sys = Gf2System::new(case2_var_names());

    // affine forms for positions 1..93 and 94..177 at time 27
    let mut r1: VecDeque<BitVec> = (1..=93)
        .map(|p| {
            if p <= 24 {
                BitVec::unit(C2_NV, c2_reg1(p + 69))
            } else {
                BitVec::unit(C2_NV, c2_reg1(p))
            }
        })
        .collect();
    let mut r2: VecDeque<BitVec> = (94..=177)
        .map(|p| {
            if p >= 100 {
                BitVec::unit(C2_NV, c2_reg2(p))
            } else {
                // changed convention: s(27,94+i) = s27_{172+i} + a_{96-i}
                let i = p - 94;
                let mut v = BitVec::unit(C2_NV, c2_reg2(172 + i));
                v.set(c2_a(96 - i), true);
                v
            }
        })
        .collect();

    let mut t: u64 = 27;
    while sys.num_rows() < CASE2_KEYSTREAM_BITS {
        if t >= trivium::INIT_ROUNDS {
            let m = sys.num_rows();
            let mut row = r1[65].clone();
            row.xor_assign(&r1[92]);
            row.xor_assign(&r2[68]);
            row.xor_assign(&r2[83]);
            sys.push_row(row, ks.bit(m));
        }
        let a_idx = ((t + 1 - 28) % 69 + 28) as usize;
        let mut new94 = r2[77].clone(); // position 171
        new94.set(c2_a(a_idx), !new94.get(c2_a(a_idx)));
        let new1 = r1[68].clone(); // position 69
        r1.pop_back();
        r1.push_front(new1);
        r2.pop_back();
        r2.push_front(new94);
        t += 1;
    }
    Ok(sys)
}

/// The 63 a-priori linear relations on the time-27 snapshot: the second
/// register replays the first register's tail (s27_109..120 = s27_82..93)
/// and is empty beyond it (s27_121..171 = 0).
fn case2_structural_rows() -> Vec<(BitVec, bool)> {
    let mut rows = Vec::with_capacity(63);
    for i in 0..12 {
        let mut row = BitVec::unit(C2_NV, c2_reg2(109 + i));
        row.set(c2_reg1(82 + i), true);
        rows.push((row, false));
    }
    for p in 121..=171 {
        rows.push((BitVec::unit(C2_NV, c2_reg2(p)), false));
    }
    rows
}

/// The 69 quadratic feedback relations a_{t+1} = s(t,66)+s(t,91)s(t,92)+s(t,93)
/// for t = 27..95, with the state bits folded onto the 69-cyclic register.
fn case2_quadratics_hold(x: &BitVec) -> bool {
    for t in 27i64..=95 {
        let lhs = x.get(c2_a((t + 1) as usize - 27 + 27)); // a_{t+1}
        let rhs = x.get(c2_cycvar(24 - t))
            ^ (x.get(c2_cycvar(49 - t)) & x.get(c2_cycvar(50 - t)))
            ^ x.get(c2_cycvar(51 - t));
        if lhs != rhs {
            return false;
        }
    }
    true
}

fn case2_key_from_solution(x: &BitVec) -> Result<Key> {
    let mut k = [false; 81]; // 1-based
    for p in 28..=93 {
        k[p - 27] = x.get(c2_reg1(p));
    }
    k[67] = !x.get(c2_reg1(25));
    k[68] = !x.get(c2_reg1(26));
    k[69] = x.get(c2_reg1(27));
    // s27_94..108: changed vars plus plain second-register variables
    let mut s94 = [false; 15];
    for (i, v) in s94.iter_mut().enumerate() {
        *v = if i < 6 {
            x.get(c2_reg2(172 + i)) ^ x.get(c2_a(96 - i))
        } else {
            x.get(c2_reg2(94 + i))
        };
    }
    // second-register feed chain: k_{67+i} = s27_{94+i} + k_{40+i} + k_{65+i}k_{66+i}
    for i in 0..14 {
        let v = s94[i] ^ k[40 + i] ^ (k[65 + i] & k[66 + i]);
        if i < 3 && v != k[67 + i] {
            // the chain must reproduce the directly read k67..k69
            return Err(Error::AttackFailure {
                stage: "feed-chain consistency".into(),
                survivors: 0,
            });
        }
        k[67 + i] = v;
    }
    let mut bits = [false; 80];
    bits.copy_from_slice(&k[1..81]);
    Ok(Key::from_bits(bits))
}

/// Full Case 2 key recovery: eliminate the linear system together with the
/// structural relations, enumerate the leftover solution space, filter by
/// the quadratic feedback relations, and read the key off the unique
/// survivor.
pub fn solve_case2(ks: &Keystream) -> Result<KeyKnowledge> {
    let mut sys = build_case2_system(ks)?;
    for (row, c) in case2_structural_rows() {
        sys.push_row(row, c);
    }
    let sols = sys.eliminate().map_err(|e| match e {
        Error::Inconsistent => Error::AttackFailure {
            stage: "linear elimination".into(),
            survivors: 0,
        },
        other => other,
    })?;
    let candidates = sols.enumerate(1 << 16)?;
    let survivors: Vec<&BitVec> = candidates
        .iter()
        .filter(|x| case2_quadratics_hold(x))
        .collect();
    if survivors.len() != 1 {
        return Err(Error::AttackFailure {
            stage: "quadratic filter".into(),
            survivors: survivors.len(),
        });
    }
    let key = case2_key_from_solution(survivors[0])?;

    let mut kk = KeyKnowledge::new();
    for i in 1..=80 {
        let source = match i {
            1..=66 => "first-register readout at time 27",
            67..=69 => "complemented first-register taps at time 27",
            _ => "second-register feed chain",
        };
        kk.set_bit(i, key.bit(i), source)?;
    }
    kk.diagnostics.rank_observed = Some(sols.rank);
    kk.diagnostics.solution_dim = Some(sols.dimension());
    kk.diagnostics.candidates_before_filter = Some(candidates.len());
    kk.diagnostics.survivors = Some(1);
    kk.diagnostics.notes.push(format!(
        "rank {} of {} after structural rows; {} candidates filtered to 1",
        sols.rank,
        C2_NV,
        candidates.len()
    ));
    Ok(kk)
}

// ---------------------------------------------------------------------------
// Case 3

// variable layout: 0..77 = s98_100..s98_177, 78..164 = s98_202..s98_288
// (265..288 in the changed convention), 165..242 = b99..b176
fn c3_reg2(pos: usize) -> usize {
    debug_assert!((100..=177).contains(&pos));
    pos - 100
}

fn c3_reg3(pos: usize) -> usize {
    debug_assert!((202..=288).contains(&pos));
    78 + pos - 202
}

fn c3_b(idx: usize) -> usize {
    debug_assert!((99..=176).contains(&idx));
    165 + idx - 99
}

/// Reduces a b-subscript into the 99..176 window via the period b_n = b_{n+78}.
fn c3_bred(mut n: i64) -> usize {
    while n < 99 {
        n += 78;
    }
    while n > 176 {
        n -= 78;
    }
    n as usize
}

fn case3_var_names() -> Vec<String> {
    let mut names: Vec<String> = (100..=177).map(|p| format!("s98_{p}")).collect();
    names.extend((202..=288).map(|p| format!("s98_{p}")));
    names.extend((99..=176).map(|i| format!("b{i}")));
    names
}

/// Builds the 4524 x 243 linear system expressing z0..z4523 over the
/// time-98 snapshot (s98_100..177, s98_202..288, b99..b176). The first
/// register is identically zero on its taps by then, the second register
/// runs as a pure 78-cycle, and the third register's feed is
/// s(t+1,178) = s(t,264) + b_{t+1} with b-subscripts reduced mod 78.
pub fn build_case3_system(ks: &Keystream) -> Result<Gf2System> {
    if ks.len() < CASE3_KEYSTREAM_BITS {
        return Err(Error::WrongCase(format!(
            "Case 3 system needs {CASE3_KEYSTREAM_BITS} keystream bits, got {}",
            ks.len()
        )));
    }
    let mut sys = Gf2System::new(case3_var_names());

    // affine forms for positions 94..177 and 178..288 at time 98
    let mut r2: VecDeque<BitVec> = (94..=177)
        .map(|p| {
            if p >= 100 {
                BitVec::unit(C3_NV, c3_reg2(p))
            } else {
                // 78-cycle aliasing: s(98,94+i) = s(98,172+i)
                BitVec::unit(C3_NV, c3_reg2(p + 78))
            }
        })
        .collect();
    let mut r3: VecDeque<BitVec> = (178..=288)
        .map(|p| {
            if p >= 202 {
                BitVec::unit(C3_NV, c3_reg3(p))
            } else {
                // changed convention: s(98,178+i) = s98_{265+i} + b_{98-i}
                let i = p - 178;
                let mut v = BitVec::unit(C3_NV, c3_reg3(265 + i));
                v.set(c3_b(c3_bred(98 - i as i64)), true);
                v
            }
        })
        .collect();

    let mut t: u64 = 98;
    while sys.num_rows() < CASE3_KEYSTREAM_BITS {
        if t >= trivium::INIT_ROUNDS {
            let m = sys.num_rows();
            let mut row = r2[68].clone(); // position 162
            row.xor_assign(&r2[83]); // position 177
            row.xor_assign(&r3[65]); // position 243
            row.xor_assign(&r3[110]); // position 288
            sys.push_row(row, ks.bit(m));
        }
        let b_idx = c3_bred(t as i64 + 1);
        let new94 = r2[77].clone(); // position 171
        let mut new178 = r3[86].clone(); // position 264
        new178.set(c3_b(b_idx), !new178.get(c3_b(b_idx)));
        r2.pop_back();
        r2.push_front(new94);
        r3.pop_back();
        r3.push_front(new178);
        t += 1;
    }
    Ok(sys)
}

/// Value of state position p (100..288, except the dead band 94..99) under
/// an assignment of the Case 3 variables.
fn c3_pos(x: &BitVec, p: usize) -> bool {
    match p {
        100..=177 => x.get(c3_reg2(p)),
        202..=288 => x.get(c3_reg3(p)),
        178..=201 => {
            let i = p - 178;
            x.get(c3_reg3(265 + i)) ^ x.get(c3_b(c3_bred(98 - i as i64)))
        }
        _ => panic!("position {p} not covered by the Case 3 snapshot"),
    }
}

/// a_n readout from the time-98 snapshot, defined for n <= 16 (a_n = 0 for
/// n <= 0).
fn c3_a_small(x: &BitVec, n: i64) -> bool {
    match n {
        i64::MIN..=0 => false,
        1..=14 => c3_pos(x, (207 - n) as usize),
        15 => c3_pos(x, 177),
        16 => c3_pos(x, 176),
        _ => panic!("a{n} is not a small readout"),
    }
}

const M78: u128 = (1 << 78) - 1;

#[inline]
fn rot78(v: u128, c: u32) -> u128 {
    if c == 0 {
        v
    } else {
        ((v << c) | (v >> (78 - c))) & M78
    }
}

/// Index-reversed second-register projection: bit i = x[(78 - i) % 78].
fn c3_reg2_rev(x: &BitVec) -> u128 {
    let mut q = 0u128;
    for i in 0..78u32 {
        if x.get(((78 - i) % 78) as usize) {
            q |= 1 << i;
        }
    }
    q
}

fn c3_b_proj(x: &BitVec) -> u128 {
    let mut b = 0u128;
    for i in 0..78 {
        if x.get(165 + i) {
            b |= 1 << i;
        }
    }
    b
}

/// b99..b176 as forced by the second-register part of a candidate:
/// b_{99+i} = r[(62-i)%78] + r[(75-i)%78]r[(76-i)%78] + r[(77-i)%78],
/// rewritten over the index-reversed projection q so that each shifted copy
/// is a single 78-bit rotation.
fn c3_b_from_reg2_rev(q: u128) -> u128 {
    rot78(q, 62) ^ (rot78(q, 75) & rot78(q, 76)) ^ rot78(q, 77)
}

/// The cross-register consistency relations on the time-98 snapshot:
/// s(98,163+i) + s(98,178+i) + a_{14-i} = a_{16-i} a_{15-i} for i = 0..14.
fn case3_cross_checks_hold(x: &BitVec) -> bool {
    (0..15).all(|i| {
        let lhs = c3_pos(x, 163 + i) ^ c3_pos(x, 178 + i) ^ c3_a_small(x, 14 - i as i64);
        lhs == (c3_a_small(x, 16 - i as i64) & c3_a_small(x, 15 - i as i64))
    })
}

fn case3_a_from_solution(x: &BitVec) -> Vec<bool> {
    let mut a = vec![false; 93]; // 1-based
    for n in 1..=14usize {
        a[n] = c3_pos(x, 207 - n);
    }
    for n in 15..=78usize {
        a[n] = c3_pos(x, 192 - n);
    }
    for i in 0..14usize {
        a[92 - i] = c3_pos(x, 100 + i) ^ a[14 - i];
    }
    a.remove(0);
    a
}

/// Case 3 state recovery: eliminate the linear system plus the third
/// register's zero block, then walk the leftover solution space in Gray-code
/// order checking the quadratic b-relations on two 78-bit projections.
/// The unique survivor yields a1..a92 and, through its triggers, partial key
/// knowledge.
pub fn solve_case3(ks: &Keystream) -> Result<(ASequence, KeyKnowledge)> {
    let mut sys = build_case3_system(ks)?;
    // zero block: s(98,207..264) = 0
    for p in 207..=264 {
        sys.push_row(BitVec::unit(C3_NV, c3_reg3(p)), false);
    }
    let sols = sys.eliminate().map_err(|e| match e {
        Error::Inconsistent => Error::AttackFailure {
            stage: "linear elimination".into(),
            survivors: 0,
        },
        other => other,
    })?;
    let dim = sols.dimension();
    if dim > 26 {
        return Err(Error::SolutionOverflow { dim, cap: 1 << 26 });
    }

    let q_part = c3_reg2_rev(&sols.particular);
    let b_part = c3_b_proj(&sols.particular);
    let q_basis: Vec<u128> = sols.basis.iter().map(c3_reg2_rev).collect();
    let b_basis: Vec<u128> = sols.basis.iter().map(c3_b_proj).collect();

    let mut survivors: Vec<u64> = Vec::new();
    let mut q = q_part;
    let mut b = b_part;
    let mut fmask = 0u64;
    for i in 0..1u64 << dim {
        if i > 0 {
            let j = i.trailing_zeros() as usize;
            q ^= q_basis[j];
            b ^= b_basis[j];
            fmask ^= 1 << j;
        }
        if c3_b_from_reg2_rev(q) == b {
            survivors.push(fmask);
            if survivors.len() > 8 {
                break;
            }
        }
    }
    if survivors.len() != 1 {
        return Err(Error::AttackFailure {
            stage: "b-quadratic filter".into(),
            survivors: survivors.len(),
        });
    }
    let mut x = sols.particular.clone();
    for (j, basis) in sols.basis.iter().enumerate() {
        if survivors[0] >> j & 1 == 1 {
            x.xor_assign(basis);
        }
    }
    // re-check the b-relations directly on the full assignment (guards the
    // projection arithmetic) and apply the cross-register consistency checks
    let pv = |p: i64| c3_pos(&x, if p < 100 { (p + 78) as usize } else { p as usize });
    for i in 0..78i64 {
        let expect = pv(162 - i) ^ (pv(175 - i) & pv(176 - i)) ^ pv(177 - i);
        if x.get(c3_b(99 + i as usize)) != expect {
            return Err(Error::Inconsistent);
        }
    }
    if !case3_cross_checks_hold(&x) {
        return Err(Error::AttackFailure {
            stage: "third-register cross-check".into(),
            survivors: 0,
        });
    }

    let a = ASequence::case3(case3_a_from_solution(&x))?;
    let mut kk = case3_partial_key(&a)?;
    kk.diagnostics.rank_observed = Some(sols.rank);
    kk.diagnostics.solution_dim = Some(dim);
    kk.diagnostics.candidates_before_filter = Some(1usize << dim);
    kk.diagnostics.survivors = Some(1);
    kk.diagnostics.notes.push(format!(
        "rank {} of {} after the zero block; 2^{} candidates filtered to 1",
        sols.rank, C3_NV, dim
    ));
    Ok((a, kk))
}

// ---------------------------------------------------------------------------
// Partial key knowledge from a Case 3 a-sequence

fn key_var(i: usize) -> AnfPoly {
    debug_assert!((1..=80).contains(&i));
    AnfPoly::var(i - 1)
}

fn key_product(i: usize, j: usize) -> AnfPoly {
    debug_assert!((1..=80).contains(&i) && (1..=80).contains(&j));
    AnfPoly::from_monomials([Monomial::from_vars(&[i - 1, j - 1])])
}

/// Extracts key bits and residual relations from a Case 3 a-sequence.
///
/// An early trigger (a_{t+1} = 1 for some t <= 11, largest taken) certifies
/// a1..a_{t+1} = k66..k_{66-t}. A late trigger (a_{t+1} = 1 for some
/// 67 <= t <= 91, largest taken) certifies a1..a12 = k66..k55 plus the
/// relation a13 = k54 + k79k80 and two alternative relation systems, of
/// which exactly one holds depending on whether position 93 is faulted —
/// which the attacker cannot observe, so both are emitted. No trigger means
/// no certified knowledge.
pub fn case3_partial_key(a: &ASequence) -> Result<KeyKnowledge> {
    if a.context() != AContext::Case3 {
        return Err(Error::WrongCase(
            "partial key readout is defined for Case 3 a-sequences".into(),
        ));
    }
    let mut kk = KeyKnowledge::new();
    let early = (0..=11usize).rev().find(|&t| a.a(t + 1));
    let late = (67..=91usize).rev().find(|&t| a.a(t + 1));

    if let Some(t) = early {
        for j in 0..=t {
            kk.set_bit(66 - j, a.a(j + 1), format!("early trigger readout a{}", j + 1))?;
        }
    }
    if let Some(t) = late {
        for j in 0..=11 {
            kk.set_bit(66 - j, a.a(j + 1), format!("late trigger readout a{}", j + 1))?;
        }
        let mut a13 = key_var(54);
        a13.add_assign(&key_product(79, 80));
        kk.relations
            .push(KeyEquation::new(a13, a.a(13), "a13 readout"));

        let mut branch_faulted_93_clear = Vec::new();
        let mut branch_faulted_93_set = Vec::new();
        for u in 13..=t.saturating_sub(27) {
            let mut with_cubic_tap = key_var(66 - u);
            with_cubic_tap.add_assign(&key_product(91 - u, 92 - u));
            let without = with_cubic_tap.clone();
            with_cubic_tap.add_assign(&key_var(93 - u));
            branch_faulted_93_clear.push(KeyEquation::new(
                with_cubic_tap,
                a.a(u + 1),
                format!("a{} readout, position 93 unfaulted", u + 1),
            ));
            branch_faulted_93_set.push(KeyEquation::new(
                without,
                a.a(u + 1),
                format!("a{} readout, position 93 faulted", u + 1),
            ));
        }
        for v in 65..=t - 2 {
            let mut with_tap = key_product(91 - v, 92 - v);
            let without = with_tap.clone();
            with_tap.add_assign(&key_var(93 - v));
            branch_faulted_93_clear.push(KeyEquation::new(
                with_tap,
                a.a(v + 1),
                format!("a{} readout, position 93 unfaulted", v + 1),
            ));
            branch_faulted_93_set.push(KeyEquation::new(
                without,
                a.a(v + 1),
                format!("a{} readout, position 93 faulted", v + 1),
            ));
        }
        kk.alternatives.push(branch_faulted_93_clear);
        kk.alternatives.push(branch_faulted_93_set);
    }
    if early.is_none() && late.is_none() {
        kk.diagnostics
            .notes
            .push("no a-sequence trigger fired; no key bits certified".into());
    }
    Ok(kk)
}

// ---------------------------------------------------------------------------
// Cases 4-6: structure only

/// Degree growth of the keystream bits in the key/IV variables: z_m is
/// linear for m <= `linear_through`, quadratic up to `quadratic_through`,
/// cubic up to `cubic_through`, degree >= 4 from `quartic_from` on.
#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize)]
pub struct DegreeProfile {
    pub linear_through: usize,
    pub quadratic_through: usize,
    pub cubic_through: usize,
    pub quartic_from: usize,
}

/// What is structurally known about a degraded (Case 4/5/6) machine.
#[derive(Clone, Debug, serde::Serialize)]
pub struct StructuralReport {
    pub case: CaseLabel,
    pub state_bits: usize,
    pub reversible: bool,
    pub degree_profile: Option<DegreeProfile>,
    /// Which IV bits the keystream provably ignores.
    pub iv_invariance: &'static str,
    pub notes: Vec<&'static str>,
}

/// The degraded-cipher structure for Cases 4, 5 and 6. Other labels have a
/// dedicated recovery attack (1-3) or no known structure (7).
pub fn structural_report(case: CaseLabel) -> Result<StructuralReport> {
    let degraded_profile = DegreeProfile {
        linear_through: 65,
        quadratic_through: 159,
        cubic_through: 228,
        quartic_from: 229,
    };
    match case {
        CaseLabel::Case4 => Ok(StructuralReport {
            case,
            state_bits: 273,
            reversible: true,
            degree_profile: Some(degraded_profile),
            iv_invariance: "keystream is independent of IV70",
            notes: vec![
                "second-register tap 171 drops out; its feedback reads positions 162 and 264 only",
                "positions 163..177 are dead weight: the state degrades to 273 bits",
            ],
        }),
        CaseLabel::Case5 => Ok(StructuralReport {
            case,
            state_bits: 273,
            reversible: true,
            degree_profile: Some(degraded_profile),
            iv_invariance: "keystream is independent of IV79",
            notes: vec![
                "valid from time m+9 once (s176, s177) is pinned at (0,0)",
                "first-register feedback picks up positions 186 and 273",
                "running the inverse to time 14 reads the key off the state; k80 needs m < 5",
            ],
        }),
        CaseLabel::Case6 => Ok(StructuralReport {
            case,
            state_bits: 287,
            reversible: false,
            degree_profile: None,
            iv_invariance: "keystream is independent of IV79 and of IV80 individually (jointly they survive as a product term)",
            notes: vec![
                "only position 177 is lost; the renewal keeps a quadratic term and is not invertible",
            ],
        }),
        other => Err(Error::WrongCase(format!(
            "{} has no degraded-structure report",
            other.name()
        ))),
    }
}

// ---------------------------------------------------------------------------
// Ground-truth vectors for the linear systems (test oracles)

/// The true Case 2 variable vector (s27_25..93, s27_100..177 changed,
/// a28..a96) of a masked machine, read from the simulator.
pub fn case2_truth_vector(key: &Key, mask: &FaultMask) -> BitVec {
    let snaps = masked_states(key, mask, 95);
    let a = ASequence::simulate_case2(key, mask);
    let s27 = &snaps[27];
    let mut gt = BitVec::zeros(C2_NV);
    for p in 25..=93u16 {
        gt.set(c2_reg1(p as usize), s27.get(p));
    }
    for p in 100..=171u16 {
        gt.set(c2_reg2(p as usize), s27.get(p));
    }
    for i in 0..6u16 {
        // changed variable: s27_{172+i} stands for s(27,94+i) + a_{96-i}
        gt.set(
            c2_reg2(172 + i as usize),
            s27.get(94 + i) ^ a.a(96 - i as usize),
        );
    }
    for idx in 28..=96 {
        gt.set(c2_a(idx), a.a(idx));
    }
    gt
}

/// The true Case 3 variable vector (s98_100..177, s98_202..288 changed,
/// b99..b176) of a masked machine, read from the simulator.
pub fn case3_truth_vector(key: &Key, mask: &FaultMask) -> BitVec {
    let snaps = masked_states(key, mask, 98);
    let b = BSequence::simulate(key, mask);
    let s98 = &snaps[98];
    let mut gt = BitVec::zeros(C3_NV);
    for p in 100..=177u16 {
        gt.set(c3_reg2(p as usize), s98.get(p));
    }
    for p in 202..=288u16 {
        gt.set(c3_reg3(p as usize), s98.get(p));
    }
    for i in 0..24u16 {
        // changed variable: s98_{265+i} stands for s(98,178+i) + b_{98-i}
        gt.set(
            c3_reg3(265 + i as usize),
            s98.get(178 + i) ^ b.b(c3_bred(98 - i as i64)),
        );
    }
    for idx in 99..=176 {
        gt.set(c3_b(idx), b.b(idx));
    }
    gt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fault::classify_case;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_mask_in(rng: &mut StdRng, lo: u16, hi: u16) -> FaultMask {
        // P_L uniform in lo..=hi, optionally one extra position above it
        // (masks are confined to a single register)
        let p_l = rng.gen_range(lo..=hi);
        let reg_hi = match p_l {
            1..=93 => 93,
            94..=177 => 177,
            _ => 288,
        };
        if rng.gen_bool(0.5) {
            let extra = rng.gen_range(p_l..=reg_hi);
            FaultMask::new([p_l, extra]).unwrap()
        } else {
            FaultMask::single(p_l).unwrap()
        }
    }

    #[test]
    fn attack_case1_zero_key() {
        let ks = trivium::keystream(
            &Key::zero(),
            &Iv::zero(),
            &FaultMask::single(100).unwrap(),
            138,
        )
        .unwrap();
        let kk = attack_case1(&ks).unwrap();
        assert!(kk.consistent_with(&Key::zero()));
        assert!(kk
            .candidates
            .iter()
            .any(|c| c.iter().all(|&b| !b)));
    }

    #[test]
    fn attack_case1_random_keys() {
        let mut rng = StdRng::seed_from_u64(10);
        for _ in 0..20 {
            let key = Key::random(&mut rng);
            let mask = random_mask_in(&mut rng, 94, 162);
            assert_eq!(classify_case(&mask).unwrap(), CaseLabel::Case1);
            let ks = trivium::keystream(&key, &Iv::zero(), &mask, 138).unwrap();
            let kk = attack_case1(&ks).unwrap();
            assert_eq!(kk.diagnostics.rank_observed, Some(66));
            assert_eq!(kk.candidates.len(), 8);
            assert!(kk.consistent_with(&key));
            // the candidate set pins down the true k1..k69
            assert!(kk
                .candidates
                .iter()
                .any(|c| (0..69).all(|j| c[j] == key.bit(j + 1))));
            for eq in &kk.relations {
                let val = eq
                    .lhs
                    .terms()
                    .fold(false, |acc, m| acc ^ m.evaluate(key.bits()));
                assert_eq!(val, eq.rhs);
            }
        }
    }

    #[test]
    fn attack_case1_rejects_aperiodic_keystream() {
        let key = Key::from_hex("0123456789abcdef0123").unwrap();
        let ks = trivium::keystream(&key, &Iv::zero(), &FaultMask::empty(), 138).unwrap();
        assert!(matches!(attack_case1(&ks), Err(Error::WrongCase(_))));
    }

    #[test]
    fn case2_ground_truth_satisfies_system() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..3 {
            let key = Key::random(&mut rng);
            let mask = random_mask_in(&mut rng, 178, 243);
            let ks =
                trivium::keystream(&key, &Iv::zero(), &mask, CASE2_KEYSTREAM_BITS).unwrap();
            let sys = build_case2_system(&ks).unwrap();
            assert_eq!(sys.num_rows(), CASE2_KEYSTREAM_BITS);
            assert_eq!(sys.num_vars(), C2_NV);
            let gt = case2_truth_vector(&key, &mask);
            assert!(sys.check(&gt));
            for (row, c) in case2_structural_rows() {
                assert_eq!(row.dot(&gt), c);
            }
            assert!(case2_quadratics_hold(&gt));
        }
    }

    #[test]
    fn solve_case2_recovers_full_key() {
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..3 {
            let key = Key::random(&mut rng);
            let mask = random_mask_in(&mut rng, 178, 243);
            let ks =
                trivium::keystream(&key, &Iv::zero(), &mask, CASE2_KEYSTREAM_BITS).unwrap();
            let kk = solve_case2(&ks).unwrap();
            assert_eq!(kk.full_key(), Some(key));
            assert_eq!(kk.diagnostics.rank_observed, Some(207));
            assert_eq!(kk.diagnostics.candidates_before_filter, Some(512));
        }
    }

    #[test]
    fn solve_case2_zero_key() {
        let ks = trivium::keystream(
            &Key::zero(),
            &Iv::zero(),
            &FaultMask::single(200).unwrap(),
            CASE2_KEYSTREAM_BITS,
        )
        .unwrap();
        let kk = solve_case2(&ks).unwrap();
        assert_eq!(kk.full_key(), Some(Key::zero()));
    }

    #[test]
    fn case3_ground_truth_satisfies_system() {
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..2 {
            let key = Key::random(&mut rng);
            let mask = random_mask_in(&mut rng, 1, 66);
            let ks =
                trivium::keystream(&key, &Iv::zero(), &mask, CASE3_KEYSTREAM_BITS).unwrap();
            let sys = build_case3_system(&ks).unwrap();
            assert_eq!(sys.num_rows(), CASE3_KEYSTREAM_BITS);
            assert_eq!(sys.num_vars(), C3_NV);
            let gt = case3_truth_vector(&key, &mask);
            assert!(sys.check(&gt));
            // zero block and quadratic checks also hold on the truth
            for p in 207..=264 {
                assert!(!gt.get(c3_reg3(p)), "s98_{p}");
            }
            assert_eq!(c3_b_from_reg2_rev(c3_reg2_rev(&gt)), c3_b_proj(&gt));
            assert!(case3_cross_checks_hold(&gt));
        }
    }

    #[test]
    fn solve_case3_recovers_a_sequence() {
        let mut rng = StdRng::seed_from_u64(14);
        for _ in 0..2 {
            let key = Key::random(&mut rng);
            let mask = random_mask_in(&mut rng, 1, 66);
            let ks =
                trivium::keystream(&key, &Iv::zero(), &mask, CASE3_KEYSTREAM_BITS).unwrap();
            let (a, kk) = solve_case3(&ks).unwrap();
            assert_eq!(a, ASequence::simulate_case3(&key, &mask));
            assert!(kk.consistent_with(&key));
        }
    }

    #[test]
    fn partial_key_early_trigger() {
        // a1 = 1 certifies k66 = 1
        let mut values = vec![false; 92];
        values[0] = true;
        let a = ASequence::case3(values).unwrap();
        let kk = case3_partial_key(&a).unwrap();
        assert_eq!(kk.bit(66), Some(true));
        assert_eq!(kk.known_count(), 1);
    }

    #[test]
    fn partial_key_no_trigger() {
        let a = ASequence::case3(vec![false; 92]).unwrap();
        let kk = case3_partial_key(&a).unwrap();
        assert_eq!(kk.known_count(), 0);
        assert!(kk.relations.is_empty() && kk.alternatives.is_empty());
    }

    #[test]
    fn partial_key_matches_simulated_truth() {
        let mut rng = StdRng::seed_from_u64(15);
        let mut fired_late = 0;
        for _ in 0..200 {
            let key = Key::random(&mut rng);
            let mask = random_mask_in(&mut rng, 1, 66);
            let a = ASequence::simulate_case3(&key, &mask);
            let kk = case3_partial_key(&a).unwrap();
            assert!(kk.consistent_with(&key), "mask {}", mask.to_spec());
            if !kk.alternatives.is_empty() {
                fired_late += 1;
            }
        }
        assert!(fired_late > 0, "late trigger never exercised");
    }

    #[test]
    fn structural_reports() {
        let r4 = structural_report(CaseLabel::Case4).unwrap();
        assert_eq!((r4.state_bits, r4.reversible), (273, true));
        let r5 = structural_report(CaseLabel::Case5).unwrap();
        assert_eq!((r5.state_bits, r5.reversible), (273, true));
        let r6 = structural_report(CaseLabel::Case6).unwrap();
        assert_eq!((r6.state_bits, r6.reversible), (287, false));
        assert!(structural_report(CaseLabel::Case1).is_err());
        assert!(structural_report(CaseLabel::Case7).is_err());
    }
}
