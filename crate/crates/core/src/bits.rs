//! Plain word-packed bit set, sized once at construction.
//!
//! Error tables and set-cover bookkeeping want raw `u64` word access (the
//! exported table format is exactly these words, little-endian), so this stays
//! a thin Vec<u64> rather than pulling in a bit-vector crate.

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bits {
    len: u64,
    words: Vec<u64>,
}

impl Bits {
    pub fn zeros(len: u64) -> Self {
        let n_words = len.div_ceil(64) as usize;
        Bits { len, words: vec![0; n_words] }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, idx: u64) -> bool {
        debug_assert!(idx < self.len);
        self.words[(idx >> 6) as usize] >> (idx & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, idx: u64, value: bool) {
        debug_assert!(idx < self.len);
        let word = &mut self.words[(idx >> 6) as usize];
        if value {
            *word |= 1 << (idx & 63);
        } else {
            *word &= !(1 << (idx & 63));
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn any(&self) -> bool {
        self.words.iter().any(|&w| w != 0)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    pub fn from_words(len: u64, words: Vec<u64>) -> Self {
        assert_eq!(words.len() as u64, len.div_ceil(64), "word count does not match length");
        let mut bits = Bits { len, words };
        bits.mask_tail();
        bits
    }

    /// `self |= other`; lengths must match.
    pub fn union_with(&mut self, other: &Bits) {
        assert_eq!(self.len, other.len);
        for (w, o) in self.words.iter_mut().zip(&other.words) {
            *w |= o;
        }
    }

    /// Count of bits set in `self` but not in `mask`.
    pub fn count_and_not(&self, mask: &Bits) -> u64 {
        assert_eq!(self.len, mask.len);
        self.words
            .iter()
            .zip(&mask.words)
            .map(|(w, m)| (w & !m).count_ones() as u64)
            .sum()
    }

    /// True if every set bit of `self` is also set in `mask`.
    pub fn subset_of(&self, mask: &Bits) -> bool {
        self.words.iter().zip(&mask.words).all(|(w, m)| w & !m == 0)
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = u64> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rem = w;
            std::iter::from_fn(move || {
                if rem == 0 {
                    None
                } else {
                    let bit = rem.trailing_zeros();
                    rem &= rem - 1;
                    Some((wi as u64) << 6 | bit as u64)
                }
            })
        })
    }

    fn mask_tail(&mut self) {
        let tail = self.len & 63;
        if tail != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_get_count() {
        let mut b = Bits::zeros(130);
        b.set(0, true);
        b.set(64, true);
        b.set(129, true);
        assert!(b.get(0) && b.get(64) && b.get(129));
        assert!(!b.get(1));
        assert_eq!(b.count_ones(), 3);
        b.set(64, false);
        assert_eq!(b.count_ones(), 2);
    }

    #[test]
    fn iter_ones_matches_get() {
        let mut b = Bits::zeros(200);
        for idx in [0u64, 3, 63, 64, 65, 127, 128, 199] {
            b.set(idx, true);
        }
        let ones: Vec<u64> = b.iter_ones().collect();
        assert_eq!(ones, vec![0, 3, 63, 64, 65, 127, 128, 199]);
    }

    #[test]
    fn and_not_and_subset() {
        let mut a = Bits::zeros(70);
        let mut m = Bits::zeros(70);
        a.set(1, true);
        a.set(69, true);
        m.set(1, true);
        assert_eq!(a.count_and_not(&m), 1);
        assert!(!a.subset_of(&m));
        m.set(69, true);
        assert!(a.subset_of(&m));
    }

    #[test]
    fn from_words_masks_tail() {
        let b = Bits::from_words(65, vec![u64::MAX, u64::MAX]);
        assert_eq!(b.count_ones(), 65);
    }
}
