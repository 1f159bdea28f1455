//! Connectionist temporal classification: path collapsing, greedy and
//! prefix beam decoding, and the negative log-likelihood of a labeling.
//!
//! All arithmetic is in the log domain with `-inf` standing for zero
//! probability. The blank is always the last class.

use std::collections::HashMap;

use thiserror::Error;

use crate::tensorops::log_softmax;

#[derive(Debug, Error, PartialEq)]
pub enum CtcError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("target needs at least {needed} frames, sequence has {frames}")]
    TargetTooLong { needed: usize, frames: usize },
    #[error("target symbol {0} is not a label index")]
    InvalidTarget(usize),
    #[error("sequence has {got} classes, alphabet needs {expected}")]
    ClassCountMismatch { expected: usize, got: usize },
}

/// Ordered glyph table; index `len()` is the blank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<char>,
}

impl Alphabet {
    pub fn new(symbols: impl IntoIterator<Item = char>) -> Result<Self, CtcError> {
        let symbols: Vec<char> = symbols.into_iter().collect();
        if symbols.is_empty() {
            return Err(CtcError::InvalidParam("alphabet is empty".into()));
        }
        for (i, c) in symbols.iter().enumerate() {
            if symbols[..i].contains(c) {
                return Err(CtcError::InvalidParam(format!("duplicate glyph {c:?}")));
            }
        }
        Ok(Self { symbols })
    }

    /// `0`–`9`, `.`, `,` with the blank at index 12.
    pub fn digits() -> Self {
        Self::new("0123456789.,".chars()).expect("static alphabet")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn blank(&self) -> usize {
        self.symbols.len()
    }

    pub fn classes(&self) -> usize {
        self.symbols.len() + 1
    }

    pub fn glyph(&self, index: usize) -> Option<char> {
        self.symbols.get(index).copied()
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.symbols.iter().position(|&s| s == c)
    }

    pub fn decode(&self, labels: &[usize]) -> String {
        labels.iter().filter_map(|&i| self.glyph(i)).collect()
    }

    pub fn encode(&self, text: &str) -> Option<Vec<usize>> {
        text.chars().map(|c| self.index_of(c)).collect()
    }
}

impl Default for Alphabet {
    fn default() -> Self {
        Self::digits()
    }
}

/// Per-frame log-probabilities, `frames × classes`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitsSequence {
    frames: usize,
    classes: usize,
    data: Vec<f64>,
}

impl LogitsSequence {
    /// Wraps rows that are already log-probabilities.
    pub fn from_log_probs(frames: usize, classes: usize, data: Vec<f64>) -> Result<Self, CtcError> {
        if frames == 0 || classes < 2 || data.len() != frames * classes {
            return Err(CtcError::InvalidParam(format!(
                "{} values cannot form {frames}x{classes} log-probabilities",
                data.len()
            )));
        }
        Ok(Self { frames, classes, data })
    }

    /// Normalizes each row of raw scores with a log-softmax.
    pub fn from_scores(frames: usize, classes: usize, scores: &[f64]) -> Result<Self, CtcError> {
        if scores.len() != frames * classes || classes == 0 {
            return Err(CtcError::InvalidParam("score matrix has the wrong size".into()));
        }
        let data = scores.chunks_exact(classes).flat_map(log_softmax).collect();
        Self::from_log_probs(frames, classes, data)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn blank(&self) -> usize {
        self.classes - 1
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.classes..(t + 1) * self.classes]
    }

    #[inline]
    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.data[t * self.classes + k]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn check_alphabet(&self, a: &Alphabet) -> Result<(), CtcError> {
        if a.classes() != self.classes {
            return Err(CtcError::ClassCountMismatch {
                expected: a.classes(),
                got: self.classes,
            });
        }
        Ok(())
    }
}

#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Merges consecutive repeats, then drops blanks.
pub fn collapse_path(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &k in path {
        if prev != Some(k) && k != blank {
            out.push(k);
        }
        prev = Some(k);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub text: String,
    pub labels: Vec<usize>,
    /// Path log-probability (greedy) or labeling log-marginal (beam).
    pub log_prob: f64,
}

impl Decoded {
    /// Per-frame geometric mean probability, `exp(log_prob / frames)`.
    pub fn confidence(&self, frames: usize) -> f64 {
        (self.log_prob / frames as f64).exp().clamp(0.0, 1.0)
    }
}

/// Best path decoding: per-frame argmax (lowest index on ties), then collapse.
pub fn greedy_decode(lp: &LogitsSequence, alphabet: &Alphabet) -> Result<Decoded, CtcError> {
    lp.check_alphabet(alphabet)?;
    let mut path = Vec::with_capacity(lp.frames);
    let mut log_prob = 0.0;
    for t in 0..lp.frames {
        let row = lp.row(t);
        let best = (1..row.len()).fold(0, |m, k| if row[k] > row[m] { k } else { m });
        log_prob += row[best];
        path.push(best);
    }
    let labels = collapse_path(&path, lp.blank());
    Ok(Decoded {
        text: alphabet.decode(&labels),
        labels,
        log_prob,
    })
}

/// Beam hypothesis: a labeling prefix and whether its paths end in blank.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct BeamKey {
    prefix: Vec<usize>,
    ends_blank: bool,
}

impl BeamKey {
    fn last(&self) -> Option<usize> {
        if self.ends_blank {
            None
        } else {
            self.prefix.last().copied()
        }
    }
}

/// Prefix beam search.
///
/// Each beam entry is a labeling prefix together with how its paths end
/// (blank or the prefix's last symbol); paths reaching the same entry are
/// summed. The `width` most probable entries survive each frame, ties going
/// to the entry derived from the better-ranked parent and then the lower
/// class index, so `width == 1` follows the greedy path exactly. The result
/// is the prefix with the largest probability summed over its surviving
/// entries.
pub fn beam_decode(lp: &LogitsSequence, alphabet: &Alphabet, width: usize) -> Result<Decoded, CtcError> {
    if width < 1 {
        return Err(CtcError::InvalidParam("beam width must be at least 1".into()));
    }
    lp.check_alphabet(alphabet)?;
    let blank = lp.blank();

    // (key, log prob); sorted best first
    let mut beam: Vec<(BeamKey, f64)> = vec![(
        BeamKey {
            prefix: Vec::new(),
            ends_blank: true,
        },
        0.0,
    )];
    for t in 0..lp.frames {
        let row = lp.row(t);
        // key -> (log prob, tie-break order)
        let mut next: HashMap<BeamKey, (f64, (usize, usize))> = HashMap::new();
        for (rank, (key, score)) in beam.iter().enumerate() {
            for (k, &p) in row.iter().enumerate() {
                if p == f64::NEG_INFINITY {
                    continue;
                }
                let child = if k == blank {
                    BeamKey {
                        prefix: key.prefix.clone(),
                        ends_blank: true,
                    }
                } else if key.last() == Some(k) {
                    key.clone()
                } else {
                    let mut prefix = key.prefix.clone();
                    prefix.push(k);
                    BeamKey {
                        prefix,
                        ends_blank: false,
                    }
                };
                let order = (rank, k);
                let entry = next.entry(child).or_insert((f64::NEG_INFINITY, order));
                entry.0 = log_add(entry.0, score + p);
                entry.1 = entry.1.min(order);
            }
        }
        let mut ranked: Vec<(BeamKey, (f64, (usize, usize)))> = next.into_iter().collect();
        ranked.sort_by(|a, b| b.1 .0.total_cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
        ranked.truncate(width);
        if ranked.is_empty() {
            break;
        }
        beam = ranked.into_iter().map(|(k, (s, _))| (k, s)).collect();
    }

    let mut totals: Vec<(Vec<usize>, f64, usize)> = Vec::new();
    for (rank, (key, score)) in beam.into_iter().enumerate() {
        match totals.iter_mut().find(|(p, _, _)| *p == key.prefix) {
            Some(entry) => entry.1 = log_add(entry.1, score),
            None => totals.push((key.prefix, score, rank)),
        }
    }
    let (labels, log_prob, _) = totals
        .into_iter()
        .min_by(|a, b| b.1.total_cmp(&a.1).then(a.2.cmp(&b.2)))
        .expect("beam never empty");
    Ok(Decoded {
        text: alphabet.decode(&labels),
        labels,
        log_prob,
    })
}

/// Frames needed to emit `target`: one per symbol plus one blank between
/// each pair of equal neighbors.
pub fn min_frames(target: &[usize]) -> usize {
    target.len() + target.windows(2).filter(|w| w[0] == w[1]).count()
}

/// Negative log-likelihood of `target` by the CTC forward recursion.
pub fn ctc_loss(lp: &LogitsSequence, target: &[usize]) -> Result<f64, CtcError> {
    let blank = lp.blank();
    if let Some(&bad) = target.iter().find(|&&k| k >= blank) {
        return Err(CtcError::InvalidTarget(bad));
    }
    let needed = min_frames(target);
    if needed > lp.frames {
        return Err(CtcError::TargetTooLong {
            needed,
            frames: lp.frames,
        });
    }

    // extended target: blank, l1, blank, l2, ..., blank
    let ext: Vec<usize> = std::iter::once(blank)
        .chain(target.iter().flat_map(|&k| [k, blank]))
        .collect();
    let s = ext.len();
    let mut alpha = vec![f64::NEG_INFINITY; s];
    alpha[0] = lp.get(0, ext[0]);
    if s > 1 {
        alpha[1] = lp.get(0, ext[1]);
    }
    for t in 1..lp.frames {
        let mut next = vec![f64::NEG_INFINITY; s];
        for i in 0..s {
            let mut a = alpha[i];
            if i >= 1 {
                a = log_add(a, alpha[i - 1]);
            }
            if i >= 2 && ext[i] != blank && ext[i] != ext[i - 2] {
                a = log_add(a, alpha[i - 2]);
            }
            next[i] = a + lp.get(t, ext[i]);
        }
        alpha = next;
    }
    let ll = if s > 1 { log_add(alpha[s - 1], alpha[s - 2]) } else { alpha[0] };
    Ok(-ll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_lp(rng: &mut ChaCha8Rng, frames: usize, classes: usize) -> LogitsSequence {
        let scores: Vec<f64> = (0..frames * classes).map(|_| rng.gen_range(-3.0..3.0)).collect();
        LogitsSequence::from_scores(frames, classes, &scores).unwrap()
    }

    /// Every path enumerated; labeling -> total probability.
    fn enumerate_labelings(lp: &LogitsSequence) -> HashMap<Vec<usize>, f64> {
        let (t, k) = (lp.frames(), lp.classes());
        let mut out = HashMap::new();
        for code in 0..k.pow(t as u32) {
            let mut c = code;
            let mut path = Vec::with_capacity(t);
            let mut p = 1.0;
            for step in 0..t {
                let cls = c % k;
                c /= k;
                path.push(cls);
                p *= lp.get(step, cls).exp();
            }
            *out.entry(collapse_path(&path, k - 1)).or_insert(0.0) += p;
        }
        out
    }

    fn ab() -> Alphabet {
        Alphabet::new(['a', 'b']).unwrap()
    }

    #[test]
    fn collapse_examples() {
        assert_eq!(collapse_path(&[12, 12, 12], 12), Vec::<usize>::new());
        assert_eq!(collapse_path(&[8, 8, 12, 8], 12), vec![8, 8]);
        assert_eq!(Alphabet::digits().decode(&collapse_path(&[1, 12, 12, 2], 12)), "12");
    }

    fn onehot_lp(path: &[usize], classes: usize) -> LogitsSequence {
        let scores: Vec<f64> = path
            .iter()
            .flat_map(|&k| (0..classes).map(move |c| if c == k { 5.0 } else { 0.0 }))
            .collect();
        LogitsSequence::from_scores(path.len(), classes, &scores).unwrap()
    }

    #[test]
    fn greedy_examples() {
        let a = Alphabet::digits();
        let lp = onehot_lp(&[3, 3, 12, 10, 5], 13);
        assert_eq!(greedy_decode(&lp, &a).unwrap().text, "3.5");

        let lp = onehot_lp(&[12; 6], 13);
        let d = greedy_decode(&lp, &a).unwrap();
        assert_eq!(d.text, "");
        let expect: f64 = (0..6).map(|t| lp.get(t, 12)).sum();
        assert_eq!(d.log_prob, expect);
    }

    #[test]
    fn greedy_ties_pick_lowest_index() {
        let lp = LogitsSequence::from_scores(1, 3, &[1.0, 1.0, 0.0]).unwrap();
        assert_eq!(greedy_decode(&lp, &ab()).unwrap().labels, vec![0]);
        assert_eq!(beam_decode(&lp, &ab(), 1).unwrap().labels, vec![0]);
    }

    #[test]
    fn alphabet_mismatch() {
        let lp = onehot_lp(&[0, 1], 3);
        assert!(matches!(
            greedy_decode(&lp, &Alphabet::digits()),
            Err(CtcError::ClassCountMismatch { .. })
        ));
    }

    #[test]
    fn beam_width_one_is_greedy() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            let frames = rng.gen_range(1..12);
            let lp = random_lp(&mut rng, frames, 4);
            let a = Alphabet::new(['x', 'y', 'z']).unwrap();
            let g = greedy_decode(&lp, &a).unwrap();
            let b = beam_decode(&lp, &a, 1).unwrap();
            assert_eq!(g.text, b.text);
            assert!((g.log_prob - b.log_prob).abs() < 1e-12);
        }
    }

    #[test]
    fn beam_matches_exhaustive_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let lp = random_lp(&mut rng, 4, 3);
            let all = enumerate_labelings(&lp);
            let (best, p) = all.iter().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            let d = beam_decode(&lp, &ab(), 32).unwrap();
            assert_eq!(&d.labels, best);
            assert!((d.log_prob - p.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn wider_beams_do_not_lose_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let a = Alphabet::digits();
        for _ in 0..100 {
            let lp = random_lp(&mut rng, 8, 13);
            let narrow = beam_decode(&lp, &a, 2).unwrap().log_prob;
            let wide = beam_decode(&lp, &a, 8).unwrap().log_prob;
            assert!(wide >= narrow - 1e-12, "{wide} < {narrow}");
        }
    }

    #[test]
    fn beam_rejects_zero_width() {
        let lp = onehot_lp(&[0], 3);
        assert!(matches!(beam_decode(&lp, &ab(), 0), Err(CtcError::InvalidParam(_))));
    }

    #[test]
    fn loss_single_frame_and_empty_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let lp = random_lp(&mut rng, 1, 13);
        assert_eq!(ctc_loss(&lp, &[7]).unwrap(), -lp.get(0, 7));
        let lp = random_lp(&mut rng, 5, 13);
        let expect: f64 = -(0..5).map(|t| lp.get(t, 12)).sum::<f64>();
        assert!((ctc_loss(&lp, &[]).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn loss_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..50 {
            let lp = random_lp(&mut rng, 4, 3);
            let all = enumerate_labelings(&lp);
            for target in [vec![0, 1], vec![1, 1], vec![0, 0]] {
                let brute = all.get(&target).copied().unwrap_or(0.0);
                let nll = ctc_loss(&lp, &target).unwrap();
                assert!((nll + brute.ln()).abs() < 1e-9);
                assert!(nll >= 0.0);
            }
        }
    }

    #[test]
    fn loss_errors() {
        let lp = onehot_lp(&[0, 1, 2], 3);
        assert_eq!(
            ctc_loss(&lp, &[0, 0, 0]),
            Err(CtcError::TargetTooLong { needed: 5, frames: 3 })
        );
        assert_eq!(ctc_loss(&lp, &[0, 2]), Err(CtcError::InvalidTarget(2)));
    }

    #[test]
    fn frame_duplication_keeps_labeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..200 {
            let path: Vec<usize> = (0..rng.gen_range(1..10)).map(|_| rng.gen_range(0..4)).collect();
            let i = rng.gen_range(0..path.len());
            let mut dup = path.clone();
            dup.insert(i, path[i]);
            assert_eq!(collapse_path(&dup, 3), collapse_path(&path, 3));
        }
    }
}
