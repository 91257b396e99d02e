//! Bit-exact Trivium state machine with optional stuck-at-0 fault masking.
//!
//! Positions are 1-based, 1..=288, split into three NFSRs of lengths 93, 84
//! and 111. The input state is time 0; the initial state (just before z0) is
//! time 1152.

use crate::bits::{Iv, Key, Keystream};
use crate::fault::FaultMask;
use crate::{Error, Result};

/// Desk-scale cap on keystream bits per call.
pub const KEYSTREAM_CAP: usize = 1 << 24;
/// Number of initialization rounds.
pub const INIT_ROUNDS: u64 = 1152;

const M93: u128 = (1 << 93) - 1;
const M84: u128 = (1 << 84) - 1;
const M111: u128 = (1 << 111) - 1;

/// AND-masks derived from a `FaultMask`, applied after every write.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct StateMask {
    m1: u128,
    m2: u128,
    m3: u128,
}

impl StateMask {
    pub fn none() -> Self {
        Self { m1: M93, m2: M84, m3: M111 }
    }
}

impl From<&FaultMask> for StateMask {
    fn from(mask: &FaultMask) -> Self {
        let mut m = StateMask::none();
        for p in mask.positions() {
            match p {
                1..=93 => m.m1 &= !(1u128 << (p - 1)),
                94..=177 => m.m2 &= !(1u128 << (p - 94)),
                178..=288 => m.m3 &= !(1u128 << (p - 178)),
                _ => unreachable!("FaultMask validates positions"),
            }
        }
        m
    }
}

/// The 288-bit Trivium register bank with a time index.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct State {
    r1: u128, // positions 1..=93, bit j-1
    r2: u128, // positions 94..=177, bit j-94
    r3: u128, // positions 178..=288, bit j-178
    time: u64,
}

#[inline(always)]
fn bit(r: u128, i: u32) -> bool {
    (r >> i) & 1 == 1
}

impl State {
    /// Input block: (s1..s93) = (k1..k80, 0^13),
    /// (s94..s177) = (IV1..IV80, 0^4), (s178..s288) = (0^108, 1,1,1); time 0.
    pub fn load_input(key: &Key, iv: &Iv) -> Self {
        let mut r1 = 0u128;
        let mut r2 = 0u128;
        for i in 0..80 {
            if key.bit(i + 1) {
                r1 |= 1 << i;
            }
            if iv.bit(i + 1) {
                r2 |= 1 << i;
            }
        }
        let r3 = 0b111u128 << 108; // positions 286, 287, 288
        State { r1, r2, r3, time: 0 }
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    /// Reads the bit at position 1..=288.
    pub fn get(&self, pos: u16) -> bool {
        match pos {
            1..=93 => bit(self.r1, (pos - 1) as u32),
            94..=177 => bit(self.r2, (pos - 94) as u32),
            178..=288 => bit(self.r3, (pos - 178) as u32),
            _ => panic!("position {pos} out of range"),
        }
    }

    pub fn set(&mut self, pos: u16, v: bool) {
        let (r, i) = match pos {
            1..=93 => (&mut self.r1, (pos - 1) as u32),
            94..=177 => (&mut self.r2, (pos - 94) as u32),
            178..=288 => (&mut self.r3, (pos - 178) as u32),
            _ => panic!("position {pos} out of range"),
        };
        if v {
            *r |= 1 << i;
        } else {
            *r &= !(1u128 << i);
        }
    }

    /// Zeroes all masked positions; time unchanged.
    pub fn apply_mask(&mut self, mask: &StateMask) {
        self.r1 &= mask.m1;
        self.r2 &= mask.m2;
        self.r3 &= mask.m3;
    }

    /// The keystream tap s66+s93+s162+s177+s243+s288 of the current state.
    #[inline]
    pub fn output_bit(&self) -> bool {
        bit(self.r1, 65)
            ^ bit(self.r1, 92)
            ^ bit(self.r2, 68)
            ^ bit(self.r2, 83)
            ^ bit(self.r3, 65)
            ^ bit(self.r3, 110)
    }

    /// One state renewal followed by mask re-application; time increments.
    #[inline]
    pub fn update(&mut self, mask: &StateMask) {
        let t1 = bit(self.r1, 65)
            ^ (bit(self.r1, 90) & bit(self.r1, 91))
            ^ bit(self.r1, 92)
            ^ bit(self.r2, 77);
        let t2 = bit(self.r2, 68)
            ^ (bit(self.r2, 81) & bit(self.r2, 82))
            ^ bit(self.r2, 83)
            ^ bit(self.r3, 86);
        let t3 = bit(self.r3, 65)
            ^ (bit(self.r3, 108) & bit(self.r3, 109))
            ^ bit(self.r3, 110)
            ^ bit(self.r1, 68);
        self.r1 = ((self.r1 << 1) | t3 as u128) & M93 & mask.m1;
        self.r2 = ((self.r2 << 1) | t1 as u128) & M84 & mask.m2;
        self.r3 = ((self.r3 << 1) | t2 as u128) & M111 & mask.m3;
        self.time += 1;
    }

    /// Runs `n` renewal steps.
    pub fn run(&mut self, mask: &StateMask, n: u64) {
        for _ in 0..n {
            self.update(mask);
        }
    }

    /// Generates z0..z_{n-1} from an initialized state, advancing it.
    pub fn keystream(&mut self, mask: &StateMask, n: usize) -> Result<Keystream> {
        if self.time < INIT_ROUNDS {
            return Err(Error::NotInitialized(self.time));
        }
        if n > KEYSTREAM_CAP {
            return Err(Error::KeystreamCap(n));
        }
        let mut bits = Vec::with_capacity(n);
        for _ in 0..n {
            bits.push(self.output_bit());
            self.update(mask);
        }
        Ok(Keystream::new(bits))
    }

    /// 288 characters '0'/'1' ordered s1..s288, for golden-file tests.
    pub fn dump(&self) -> String {
        (1..=288u16)
            .map(|p| if self.get(p) { '1' } else { '0' })
            .collect()
    }

    pub fn from_dump(dump: &str, time: u64) -> Result<Self> {
        if dump.len() != 288 {
            return Err(Error::Parse(format!(
                "state dump must be 288 characters, got {}",
                dump.len()
            )));
        }
        let mut s = State { r1: 0, r2: 0, r3: 0, time };
        for (i, c) in dump.chars().enumerate() {
            match c {
                '0' => {}
                '1' => s.set(i as u16 + 1, true),
                _ => return Err(Error::Parse(format!("invalid dump character `{c}`"))),
            }
        }
        Ok(s)
    }
}

/// Key/IV setup: load, mask, then 1152 renewal steps.
pub fn initialize(key: &Key, iv: &Iv, mask: &StateMask) -> State {
    let mut s = State::load_input(key, iv);
    s.apply_mask(mask);
    s.run(mask, INIT_ROUNDS);
    s
}

/// Initializes and generates `n` keystream bits in one call.
pub fn keystream(key: &Key, iv: &Iv, mask: &FaultMask, n: usize) -> Result<Keystream> {
    let m = StateMask::from(mask);
    initialize(key, iv, &m).keystream(&m, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fault::FaultMask;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn zero_loading() {
        let s = State::load_input(&Key::zero(), &Iv::zero());
        for p in 1..=285u16 {
            assert!(!s.get(p), "position {p}");
        }
        assert!(s.get(286) && s.get(287) && s.get(288));
        assert_eq!(s.time(), 0);
    }

    #[test]
    fn single_bit_loading() {
        let mut k = Key::zero();
        k.set_bit(1, true);
        let s = State::load_input(&k, &Iv::zero());
        assert!(s.get(1));
        for p in 2..=285u16 {
            assert!(!s.get(p), "position {p}");
        }
        assert!(s.get(286) && s.get(287) && s.get(288));
    }

    #[test]
    fn iv_lands_at_94_and_173() {
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..10 {
            let key = Key::random(&mut rng);
            let iv = Iv::random(&mut rng);
            let s = State::load_input(&key, &iv);
            assert_eq!(s.get(94), iv.bit(1));
            assert_eq!(s.get(173), iv.bit(80));
        }
    }

    #[test]
    fn mask_application() {
        let mut s = State::load_input(&Key::zero(), &Iv::zero());
        s.set(100, true);
        let m = StateMask::from(&FaultMask::single(100).unwrap());
        let mut masked = s;
        masked.apply_mask(&m);
        assert!(!masked.get(100));
        for p in (1..=288u16).filter(|&p| p != 100) {
            assert_eq!(masked.get(p), s.get(p), "position {p}");
        }

        // empty mask is the identity
        let mut t = s;
        t.apply_mask(&StateMask::none());
        assert_eq!(t, s);

        // masking all of NFSR1 zeroes it
        let m = StateMask::from(&FaultMask::new(1..=93).unwrap());
        let mut k = Key::zero();
        k.set_bit(5, true);
        let mut s = State::load_input(&k, &Iv::zero());
        s.apply_mask(&m);
        for p in 1..=93u16 {
            assert!(!s.get(p));
        }
    }

    #[test]
    fn all_zero_state_is_fixed_point() {
        let mut s = State { r1: 0, r2: 0, r3: 0, time: 0 };
        s.update(&StateMask::none());
        assert_eq!((s.r1, s.r2, s.r3), (0, 0, 0));
    }

    #[test]
    fn state_at_time_1_and_3_from_key_input() {
        // states at time 1 and 3 with iv = 0, no mask: the key block just
        // shifts down the first register
        let mut rng = StdRng::seed_from_u64(2);
        let key = Key::random(&mut rng);
        let mut s = State::load_input(&key, &Iv::zero());
        let m = StateMask::none();
        s.update(&m);
        // (s1..s93) = (k69, k1..k80, 0^12)
        assert_eq!(s.get(1), key.bit(69));
        for i in 1..=80u16 {
            assert_eq!(s.get(1 + i), key.bit(i as usize));
        }
        for p in 82..=93u16 {
            assert!(!s.get(p));
        }
        // (s94..) = (k66, 0, ...)
        assert_eq!(s.get(94), key.bit(66));
        for p in 95..=177u16 {
            assert!(!s.get(p));
        }
        // (s178..s288) = (0,...,0,1,1)
        for p in 178..=286u16 {
            assert!(!s.get(p));
        }
        assert!(s.get(287) && s.get(288));

        s.update(&m);
        s.update(&m);
        for p in 178..=288u16 {
            assert!(!s.get(p), "third register clear at time 3");
        }
    }

    #[test]
    fn keystream_requires_initialized_state() {
        let mut s = State::load_input(&Key::zero(), &Iv::zero());
        assert!(matches!(
            s.keystream(&StateMask::none(), 8),
            Err(Error::NotInitialized(0))
        ));
    }

    #[test]
    fn case1_zero_key_keystream() {
        // At the zero key the Case 1 keystream is a fixed 69-periodic pattern
        // with exactly four ones per period (two taps into the cyclic first
        // register, each hitting the two loaded ones at positions 25 and 26).
        let ks = keystream(
            &Key::zero(),
            &Iv::zero(),
            &FaultMask::single(100).unwrap(),
            69,
        )
        .unwrap();
        for m in 0..69 {
            assert_eq!(ks.bit(m), matches!(m, 19 | 20 | 46 | 47), "z{m}");
        }
    }

    #[test]
    fn case1_period_69() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..5 {
            let key = Key::random(&mut rng);
            let mask = FaultMask::single(94 + (rng.next_u32() % 69) as u16).unwrap();
            let ks = keystream(&key, &Iv::zero(), &mask, 200).unwrap();
            assert!(ks.has_period(69));
        }
    }

    #[test]
    fn lemma3_zero_block_at_1152() {
        let s = initialize(
            &Key::zero(),
            &Iv::zero(),
            &StateMask::from(&FaultMask::single(100).unwrap()),
        );
        for p in 162..=288u16 {
            assert!(!s.get(p), "position {p}");
        }
    }

    #[test]
    fn prop6_zero_block_at_1152() {
        let mut rng = StdRng::seed_from_u64(4);
        let key = Key::random(&mut rng);
        let s = initialize(
            &key,
            &Iv::zero(),
            &StateMask::from(&FaultMask::single(165).unwrap()),
        );
        for p in 171..=177u16 {
            assert!(!s.get(p), "position {p}");
        }
    }

    #[test]
    fn dump_roundtrip() {
        let mut rng = StdRng::seed_from_u64(5);
        let key = Key::random(&mut rng);
        let iv = Iv::random(&mut rng);
        let s = initialize(&key, &iv, &StateMask::none());
        let d = s.dump();
        assert_eq!(d.len(), 288);
        assert_eq!(State::from_dump(&d, s.time()).unwrap(), s);
    }

    use rand::RngCore;
}
