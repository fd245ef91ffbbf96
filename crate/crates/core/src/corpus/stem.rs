//! Porter stemmer (original 1980 rule set).
//!
//! Operates on lowercase ASCII words. Words shorter than three letters are
//! returned unchanged, as are words containing non-ASCII bytes.

/// Stem a single lowercase word.
pub fn stem(word: &str) -> String {
    if word.len() < 3 || !word.is_ascii() {
        return word.to_string();
    }
    let mut w = Stemmer {
        word: word.as_bytes().to_vec(),
    };
    w.step_1a();
    w.step_1b();
    w.step_1c();
    w.step_2();
    w.step_3();
    w.step_4();
    w.step_5a();
    w.step_5b();
    String::from_utf8(w.word).expect("stemmer operates on ASCII")
}

struct Stemmer {
    word: Vec<u8>,
}

impl Stemmer {
    /// True if the letter at `i` is a consonant. `y` counts as a consonant
    /// at the start of the word or after a vowel.
    fn is_consonant(&self, i: usize) -> bool {
        match self.word[i] {
            b'a' | b'e' | b'i' | b'o' | b'u' => false,
            b'y' => i == 0 || !self.is_consonant(i - 1),
            _ => true,
        }
    }

    /// The measure m of `word[..len]`: the number of vowel-consonant run
    /// transitions in the [C](VC)^m[V] decomposition.
    fn measure(&self, len: usize) -> usize {
        let mut m = 0;
        let mut i = 0;
        // Skip initial consonant run.
        while i < len && self.is_consonant(i) {
            i += 1;
        }
        loop {
            // Vowel run.
            while i < len && !self.is_consonant(i) {
                i += 1;
            }
            if i == len {
                return m;
            }
            // Consonant run completes one VC pair.
            while i < len && self.is_consonant(i) {
                i += 1;
            }
            m += 1;
            if i == len {
                return m;
            }
        }
    }

    /// *v* — the stem `word[..len]` contains a vowel.
    fn has_vowel(&self, len: usize) -> bool {
        (0..len).any(|i| !self.is_consonant(i))
    }

    /// *d — the stem ends with a double consonant.
    fn ends_double_consonant(&self, len: usize) -> bool {
        len >= 2 && self.word[len - 1] == self.word[len - 2] && self.is_consonant(len - 1)
    }

    /// *o — the stem ends consonant-vowel-consonant where the final
    /// consonant is not w, x, or y.
    fn ends_cvc(&self, len: usize) -> bool {
        if len < 3 {
            return false;
        }
        self.is_consonant(len - 3)
            && !self.is_consonant(len - 2)
            && self.is_consonant(len - 1)
            && !matches!(self.word[len - 1], b'w' | b'x' | b'y')
    }

    fn ends_with(&self, suffix: &[u8]) -> Option<usize> {
        if self.word.len() > suffix.len() && self.word.ends_with(suffix) {
            Some(self.word.len() - suffix.len())
        } else {
            None
        }
    }

    fn replace_suffix(&mut self, stem_len: usize, replacement: &[u8]) {
        self.word.truncate(stem_len);
        self.word.extend_from_slice(replacement);
    }

    /// Apply the first rule whose suffix matches (rules listed longest
    /// first); once a suffix matches, its condition decides and no further
    /// rule is tried. Returns whether a replacement was made.
    fn apply_rules(&mut self, rules: &[(&[u8], &[u8], fn(&Stemmer, usize) -> bool)]) -> bool {
        for (suffix, replacement, condition) in rules {
            if let Some(stem_len) = self.ends_with(suffix) {
                if condition(self, stem_len) {
                    self.replace_suffix(stem_len, replacement);
                    return true;
                }
                return false;
            }
        }
        false
    }

    fn step_1a(&mut self) {
        if self.ends_with(b"sses").is_some() || self.ends_with(b"ies").is_some() {
            self.word.truncate(self.word.len() - 2);
        } else if self.word.ends_with(b"s") && !self.word.ends_with(b"ss") {
            self.word.truncate(self.word.len() - 1);
        }
    }

    fn step_1b(&mut self) {
        if let Some(stem_len) = self.ends_with(b"eed") {
            if self.measure(stem_len) > 0 {
                self.word.truncate(self.word.len() - 1);
            }
            return;
        }
        let removed = if let Some(stem_len) = self.ends_with(b"ed") {
            if self.has_vowel(stem_len) {
                self.word.truncate(stem_len);
                true
            } else {
                false
            }
        } else if let Some(stem_len) = self.ends_with(b"ing") {
            if self.has_vowel(stem_len) {
                self.word.truncate(stem_len);
                true
            } else {
                false
            }
        } else {
            false
        };
        if !removed {
            return;
        }
        // Cleanup after ed/ing removal.
        if self.word.ends_with(b"at") || self.word.ends_with(b"bl") || self.word.ends_with(b"iz") {
            self.word.push(b'e');
        } else if self.ends_double_consonant(self.word.len())
            && !matches!(self.word[self.word.len() - 1], b'l' | b's' | b'z')
        {
            self.word.truncate(self.word.len() - 1);
        } else if self.measure(self.word.len()) == 1 && self.ends_cvc(self.word.len()) {
            self.word.push(b'e');
        }
    }

    fn step_1c(&mut self) {
        if self.word.ends_with(b"y") && self.has_vowel(self.word.len() - 1) {
            let last = self.word.len() - 1;
            self.word[last] = b'i';
        }
    }

    fn step_2(&mut self) {
        fn m_gt_0(s: &Stemmer, stem_len: usize) -> bool {
            s.measure(stem_len) > 0
        }
        self.apply_rules(&[
            (b"ational", b"ate", m_gt_0),
            (b"ization", b"ize", m_gt_0),
            (b"iveness", b"ive", m_gt_0),
            (b"fulness", b"ful", m_gt_0),
            (b"ousness", b"ous", m_gt_0),
            (b"tional", b"tion", m_gt_0),
            (b"biliti", b"ble", m_gt_0),
            (b"entli", b"ent", m_gt_0),
            (b"ousli", b"ous", m_gt_0),
            (b"ation", b"ate", m_gt_0),
            (b"aliti", b"al", m_gt_0),
            (b"iviti", b"ive", m_gt_0),
            (b"enci", b"ence", m_gt_0),
            (b"anci", b"ance", m_gt_0),
            (b"izer", b"ize", m_gt_0),
            (b"abli", b"able", m_gt_0),
            (b"alli", b"al", m_gt_0),
            (b"ator", b"ate", m_gt_0),
            (b"alism", b"al", m_gt_0),
            (b"eli", b"e", m_gt_0),
        ]);
    }

    fn step_3(&mut self) {
        fn m_gt_0(s: &Stemmer, stem_len: usize) -> bool {
            s.measure(stem_len) > 0
        }
        self.apply_rules(&[
            (b"icate", b"ic", m_gt_0),
            (b"ative", b"", m_gt_0),
            (b"alize", b"al", m_gt_0),
            (b"iciti", b"ic", m_gt_0),
            (b"ical", b"ic", m_gt_0),
            (b"ful", b"", m_gt_0),
            (b"ness", b"", m_gt_0),
        ]);
    }

    fn step_4(&mut self) {
        fn m_gt_1(s: &Stemmer, stem_len: usize) -> bool {
            s.measure(stem_len) > 1
        }
        fn ion_condition(s: &Stemmer, stem_len: usize) -> bool {
            s.measure(stem_len) > 1
                && stem_len >= 1
                && matches!(s.word[stem_len - 1], b's' | b't')
        }
        self.apply_rules(&[
            (b"ement", b"", m_gt_1),
            (b"ance", b"", m_gt_1),
            (b"ence", b"", m_gt_1),
            (b"able", b"", m_gt_1),
            (b"ible", b"", m_gt_1),
            (b"ment", b"", m_gt_1),
            (b"ant", b"", m_gt_1),
            (b"ent", b"", m_gt_1),
            (b"ion", b"", ion_condition),
            (b"ism", b"", m_gt_1),
            (b"ate", b"", m_gt_1),
            (b"iti", b"", m_gt_1),
            (b"ous", b"", m_gt_1),
            (b"ive", b"", m_gt_1),
            (b"ize", b"", m_gt_1),
            (b"al", b"", m_gt_1),
            (b"er", b"", m_gt_1),
            (b"ic", b"", m_gt_1),
            (b"ou", b"", m_gt_1),
        ]);
    }

    fn step_5a(&mut self) {
        if self.word.ends_with(b"e") {
            let stem_len = self.word.len() - 1;
            let m = self.measure(stem_len);
            if m > 1 || (m == 1 && !self.ends_cvc(stem_len)) {
                self.word.truncate(stem_len);
            }
        }
    }

    fn step_5b(&mut self) {
        let len = self.word.len();
        if self.measure(len) > 1 && self.ends_double_consonant(len) && self.word[len - 1] == b'l' {
            self.word.truncate(len - 1);
        }
    }
}
