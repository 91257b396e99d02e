//! Reduced-state machines equivalent to the faulted full cipher in
//! Cases 4, 5 and 6, with forward renewal, inverse renewal where it exists,
//! and the Case 5 key readout from the state at time 14.

use crate::bits::{Key, Keystream};
use crate::trivium::State;
use crate::{Error, Result};

const M93: u128 = (1 << 93) - 1;
const M69: u128 = (1 << 69) - 1;
const M83: u128 = (1 << 83) - 1;
const M111: u128 = (1 << 111) - 1;

/// Which degraded cipher this state belongs to.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DegradedVariant {
    /// 273 bits: positions 1..162, 178..288.
    Case4,
    /// 273 bits, valid for t >= m+9; `m` is the earliest time from which
    /// (s176, s177) stays (0,0).
    Case5 { m: u64 },
    /// 287 bits: positions 1..176, 178..288.
    Case6,
}

impl DegradedVariant {
    pub fn state_width(&self) -> usize {
        match self {
            DegradedVariant::Case4 | DegradedVariant::Case5 { .. } => 273,
            DegradedVariant::Case6 => 287,
        }
    }

    pub fn reversible(&self) -> bool {
        !matches!(self, DegradedVariant::Case6)
    }

    fn reg2_top(&self) -> u16 {
        match self {
            DegradedVariant::Case4 | DegradedVariant::Case5 { .. } => 162,
            DegradedVariant::Case6 => 176,
        }
    }

    fn reg2_mask(&self) -> u128 {
        match self {
            DegradedVariant::Case4 | DegradedVariant::Case5 { .. } => M69,
            DegradedVariant::Case6 => M83,
        }
    }
}

#[inline(always)]
fn bit(r: u128, i: u32) -> bool {
    (r >> i) & 1 == 1
}

/// A degraded (reduced-state) machine state. Positions keep their original
/// full-state indices; omitted positions simply do not exist here.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct DegradedState {
    variant: DegradedVariant,
    r1: u128, // positions 1..=93
    r2: u128, // positions 94..=162 (Case4/5) or 94..=176 (Case6)
    r3: u128, // positions 178..=288
    time: u64,
}

impl DegradedState {
    /// Extracts the live positions from a full faulted state. For Case 5 the
    /// source state must already be in the degraded regime (time >= m+9).
    pub fn from_full(state: &State, variant: DegradedVariant) -> Result<Self> {
        if let DegradedVariant::Case5 { m } = variant {
            if state.time() < m + 9 {
                return Err(Error::DegradedDomain(format!(
                    "Case 5 degraded state requires time >= m+9 = {}, got {}",
                    m + 9,
                    state.time()
                )));
            }
        }
        let mut d = DegradedState {
            variant,
            r1: 0,
            r2: 0,
            r3: 0,
            time: state.time(),
        };
        for p in 1..=93u16 {
            d.set(p, state.get(p));
        }
        for p in 94..=variant.reg2_top() {
            d.set(p, state.get(p));
        }
        for p in 178..=288u16 {
            d.set(p, state.get(p));
        }
        Ok(d)
    }

    pub fn variant(&self) -> DegradedVariant {
        self.variant
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    /// Reads a live position by its original full-state index.
    pub fn get(&self, pos: u16) -> bool {
        match pos {
            1..=93 => bit(self.r1, (pos - 1) as u32),
            178..=288 => bit(self.r3, (pos - 178) as u32),
            p if p >= 94 && p <= self.variant.reg2_top() => bit(self.r2, (pos - 94) as u32),
            _ => panic!("position {pos} is not live in {:?}", self.variant),
        }
    }

    fn set(&mut self, pos: u16, v: bool) {
        let (r, i) = match pos {
            1..=93 => (&mut self.r1, (pos - 1) as u32),
            178..=288 => (&mut self.r3, (pos - 178) as u32),
            p if p >= 94 && p <= self.variant.reg2_top() => (&mut self.r2, (pos - 94) as u32),
            _ => panic!("position {pos} is not live in {:?}", self.variant),
        };
        if v {
            *r |= 1 << i;
        } else {
            *r &= !(1u128 << i);
        }
    }

    /// The degraded 5-tap output s66+s93+s162+s243+s288.
    #[inline]
    pub fn output_bit(&self) -> bool {
        bit(self.r1, 65) ^ bit(self.r1, 92) ^ bit(self.r2, 68) ^ bit(self.r3, 65) ^ bit(self.r3, 110)
    }

    /// One step of the variant's reduced renewal.
    pub fn update(&mut self) -> Result<()> {
        if let DegradedVariant::Case5 { m } = self.variant {
            if self.time < m + 9 {
                return Err(Error::DegradedDomain(format!(
                    "Case 5 renewal undefined at time {} < m+9 = {}",
                    self.time,
                    m + 9
                )));
            }
        }
        let t3 = bit(self.r3, 65)
            ^ (bit(self.r3, 108) & bit(self.r3, 109))
            ^ bit(self.r3, 110)
            ^ bit(self.r1, 68);
        let feed2_base =
            bit(self.r1, 65) ^ (bit(self.r1, 90) & bit(self.r1, 91)) ^ bit(self.r1, 92);
        let (feed2, feed3) = match self.variant {
            DegradedVariant::Case4 => (feed2_base, bit(self.r2, 68) ^ bit(self.r3, 86)),
            DegradedVariant::Case5 { .. } => (
                feed2_base ^ bit(self.r3, 8) ^ bit(self.r3, 95), // s186, s273
                bit(self.r2, 68) ^ bit(self.r3, 86),
            ),
            DegradedVariant::Case6 => (
                feed2_base ^ bit(self.r2, 77), // s171
                bit(self.r2, 68) ^ (bit(self.r2, 81) & bit(self.r2, 82)) ^ bit(self.r3, 86),
            ),
        };
        self.r1 = ((self.r1 << 1) | t3 as u128) & M93;
        self.r2 = ((self.r2 << 1) | feed2 as u128) & self.variant.reg2_mask();
        self.r3 = ((self.r3 << 1) | feed3 as u128) & M111;
        self.time += 1;
        Ok(())
    }

    /// Exact inverse of `update` for Case 4 and Case 5; Case 6 is rejected.
    pub fn inverse(&mut self) -> Result<()> {
        match self.variant {
            DegradedVariant::Case6 => return Err(Error::Irreversible),
            DegradedVariant::Case5 { m } => {
                if self.time < m + 10 {
                    return Err(Error::DegradedDomain(format!(
                        "Case 5 inverse would leave time {} < m+9 = {}",
                        self.time as i64 - 1,
                        m + 9
                    )));
                }
            }
            DegradedVariant::Case4 => {}
        }
        // s(t,93) reconstruction
        let s93 = match self.variant {
            DegradedVariant::Case4 => {
                bit(self.r1, 66) ^ (bit(self.r1, 91) & bit(self.r1, 92)) ^ bit(self.r2, 0)
            }
            DegradedVariant::Case5 { .. } => {
                bit(self.r1, 66)
                    ^ (bit(self.r1, 91) & bit(self.r1, 92))
                    ^ bit(self.r2, 0)
                    ^ bit(self.r3, 9) // s187
                    ^ bit(self.r3, 96) // s274
            }
            DegradedVariant::Case6 => unreachable!(),
        };
        // s(t,162) = s(t+1,178) + s(t+1,265)
        let s162 = bit(self.r3, 0) ^ bit(self.r3, 87);
        // s(t,288) = s(t+1,244) + s(t+1,287)s(t+1,288) + s(t+1,1) + s(t+1,70)
        let s288 = bit(self.r3, 66)
            ^ (bit(self.r3, 109) & bit(self.r3, 110))
            ^ bit(self.r1, 0)
            ^ bit(self.r1, 69);
        self.r1 = (self.r1 >> 1) | (s93 as u128) << 92;
        self.r2 = (self.r2 >> 1) | (s162 as u128) << 68;
        self.r3 = (self.r3 >> 1) | (s288 as u128) << 110;
        self.time -= 1;
        Ok(())
    }

    /// Generates `n` output bits, advancing the state.
    pub fn keystream(&mut self, n: usize) -> Result<Keystream> {
        if n > crate::trivium::KEYSTREAM_CAP {
            return Err(Error::KeystreamCap(n));
        }
        let mut bits = Vec::with_capacity(n);
        for _ in 0..n {
            bits.push(self.output_bit());
            self.update()?;
        }
        Ok(Keystream::new(bits))
    }
}

/// Key bits read out of a Case 5 degraded state at time 14: k1..k79 always,
/// k80 only when m < 5.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Case5KeyReadout {
    pub bits: [Option<bool>; 80],
}

impl Case5KeyReadout {
    pub fn k80_determined(&self) -> bool {
        self.bits[79].is_some()
    }
}

/// Reads (k1..k79) = (s(14,15)..s(14,93)) from a Case 5 degraded state at
/// time 14, plus k80 = s67+s92*s93+s94+s187+s274 when m < 5.
pub fn recover_key_from_case5_state(state: &DegradedState) -> Result<Case5KeyReadout> {
    let m = match state.variant() {
        DegradedVariant::Case5 { m } => m,
        v => {
            return Err(Error::DegradedDomain(format!(
                "key readout requires a Case 5 state, got {v:?}"
            )))
        }
    };
    if state.time() != 14 {
        return Err(Error::DegradedDomain(format!(
            "key readout requires the state at time 14, got {}",
            state.time()
        )));
    }
    let mut bits = [None; 80];
    for i in 1..=79u16 {
        bits[i as usize - 1] = Some(state.get(14 + i));
    }
    if m < 5 {
        bits[79] = Some(
            state.get(67)
                ^ (state.get(92) & state.get(93))
                ^ state.get(94)
                ^ state.get(187)
                ^ state.get(274),
        );
    }
    Ok(Case5KeyReadout { bits })
}

/// Finds the earliest time m from which (s176, s177) stays (0,0), by
/// simulation with a 100-step lookahead. With a Case 5 fault the pair
/// settles by time 5; this asserts it.
pub fn detect_case5_m(key: &Key, mask: &crate::fault::FaultMask) -> u64 {
    let sm = crate::trivium::StateMask::from(mask);
    let mut s = State::load_input(key, &crate::bits::Iv::zero());
    s.apply_mask(&sm);
    let mut pairs = Vec::with_capacity(106);
    for _ in 0..=105 {
        pairs.push((s.get(176), s.get(177)));
        s.update(&sm);
    }
    let m = (0..=5u64)
        .find(|&m| {
            pairs[m as usize..m as usize + 100]
                .iter()
                .all(|&p| p == (false, false))
        })
        .expect("(s176, s177) must settle to (0,0) by time 5 under a Case 5 fault");
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::Iv;
    use crate::fault::FaultMask;
    use crate::trivium::{initialize, StateMask};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_mask_in(rng: &mut StdRng, lo: u16, hi: u16) -> FaultMask {
        FaultMask::single(rng.gen_range(lo..=hi)).unwrap()
    }

    #[test]
    fn all_zero_case4_state_is_fixed_point() {
        let mut d = DegradedState {
            variant: DegradedVariant::Case4,
            r1: 0,
            r2: 0,
            r3: 0,
            time: 0,
        };
        d.update().unwrap();
        assert_eq!((d.r1, d.r2, d.r3), (0, 0, 0));
    }

    #[test]
    fn case4_matches_full_faulted_machine() {
        let mut rng = StdRng::seed_from_u64(10);
        for _ in 0..5 {
            let key = Key::random(&mut rng);
            let mask = random_mask_in(&mut rng, 163, 171);
            let sm = StateMask::from(&mask);
            let mut full = initialize(&key, &Iv::zero(), &sm);
            let mut deg = DegradedState::from_full(&full, DegradedVariant::Case4).unwrap();
            let ks_full = full.keystream(&sm, 1000).unwrap();
            let ks_deg = deg.keystream(1000).unwrap();
            assert_eq!(ks_full, ks_deg);
        }
    }

    #[test]
    fn case4_inverse_roundtrips() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let mut d = DegradedState {
                variant: DegradedVariant::Case4,
                r1: rng.gen::<u128>() & super::M93,
                r2: rng.gen::<u128>() & super::M69,
                r3: rng.gen::<u128>() & super::M111,
                time: 100,
            };
            let orig = d;
            d.update().unwrap();
            d.inverse().unwrap();
            assert_eq!(d, orig);
            d.inverse().unwrap();
            d.update().unwrap();
            assert_eq!(d, orig);
        }
    }

    #[test]
    fn case5_reverse_to_time_14_recovers_key() {
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..10 {
            let key = Key::random(&mut rng);
            let mask = random_mask_in(&mut rng, 172, 176);
            let m = detect_case5_m(&key, &mask);
            let sm = StateMask::from(&mask);
            let mut full = crate::trivium::State::load_input(&key, &Iv::zero());
            full.apply_mask(&sm);
            full.run(&sm, 500);
            let mut deg = DegradedState::from_full(&full, DegradedVariant::Case5 { m }).unwrap();
            while deg.time() > 14 {
                deg.inverse().unwrap();
            }
            // forward-simulated faulted state at time 14 agrees on live bits
            let mut fwd = crate::trivium::State::load_input(&key, &Iv::zero());
            fwd.apply_mask(&sm);
            fwd.run(&sm, 14);
            let expect = DegradedState::from_full(&fwd, DegradedVariant::Case5 { m }).unwrap();
            assert_eq!(deg, expect);

            let readout = recover_key_from_case5_state(&deg).unwrap();
            for i in 0..79 {
                assert_eq!(readout.bits[i], Some(key.bit(i + 1)), "k{}", i + 1);
            }
            if m < 5 {
                assert_eq!(readout.bits[79], Some(key.bit(80)));
            } else {
                assert_eq!(readout.bits[79], None);
            }
        }
    }

    #[test]
    fn case5_zero_key_readout() {
        let key = Key::zero();
        let mask = FaultMask::single(174).unwrap();
        let m = detect_case5_m(&key, &mask);
        assert!(m <= 5);
        let sm = StateMask::from(&mask);
        let mut full = crate::trivium::State::load_input(&key, &Iv::zero());
        full.apply_mask(&sm);
        full.run(&sm, 14);
        let deg = DegradedState::from_full(&full, DegradedVariant::Case5 { m }).unwrap();
        let readout = recover_key_from_case5_state(&deg).unwrap();
        for (i, b) in readout.bits.iter().enumerate() {
            if let Some(v) = b {
                assert!(!v, "k{}", i + 1);
            }
        }
    }

    #[test]
    fn case6_matches_full_and_rejects_inverse() {
        let mut rng = StdRng::seed_from_u64(13);
        let key = Key::random(&mut rng);
        let mask = FaultMask::single(177).unwrap();
        let sm = StateMask::from(&mask);
        let mut full = initialize(&key, &Iv::zero(), &sm);
        let mut deg = DegradedState::from_full(&full, DegradedVariant::Case6).unwrap();
        let ks_full = full.keystream(&sm, 1000).unwrap();
        let ks_deg = deg.keystream(1000).unwrap();
        assert_eq!(ks_full, ks_deg);
        assert!(matches!(deg.inverse(), Err(Error::Irreversible)));
    }

    #[test]
    fn case5_rejects_update_below_domain() {
        let d = DegradedState {
            variant: DegradedVariant::Case5 { m: 5 },
            r1: 0,
            r2: 0,
            r3: 0,
            time: 10,
        };
        let mut d2 = d;
        assert!(d2.update().is_err());
        let mut d3 = DegradedState { time: 14, ..d };
        assert!(d3.update().is_ok());
        assert!(d3.inverse().is_ok());
        assert!(d3.inverse().is_err());
    }
}
