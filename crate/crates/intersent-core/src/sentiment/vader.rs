//! Rule-based valence analyzer compatible with the VADER 3.3.2 reference
//! implementation (Hutto & Gilbert, 2014).
//!
//! The scoring pipeline mirrors the reference algorithm step for step:
//! whitespace tokenization with edge-punctuation stripping, lexicon lookup,
//! ALL-CAPS emphasis, degree boosters and dampeners over a three-token
//! window with distance decay, negation handling (including the `no`
//! special cases), idiom overrides, `least` checks, contrastive-`but`
//! rebalancing, and punctuation amplification, finishing with the
//! `x / sqrt(x^2 + 15)` normalization into `[-1, +1]`.
//!
//! Compatibility notes:
//!
//! * The reference's behavior is reproduced exactly, *including* its known
//!   quirks: the contrastive-`but` pass locates entries by first value match
//!   rather than by position, the `never so / never this` bump at the
//!   three-token distance also fires when `so`/`this` directly precedes the
//!   scored word, and tokens that would shrink to two characters or fewer
//!   keep their surrounding punctuation.
//! * Scores returned here are the *unrounded* compound values; the reference
//!   rounds to four decimal places for display. Round at the call site when
//!   comparing against published figures.
//! * Emoji-to-description replacement is not bundled; emoji characters pass
//!   through as ordinary tokens. Text without emoji scores identically to
//!   the reference.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use super::lexicon::ValenceLexicon;
use super::{Analyzer, AnalyzerError, SentimentScore};

/// Empirically derived mean sentiment intensity rating increase for booster
/// words (reference constant `B_INCR`).
const B_INCR: f64 = 0.293;
/// Matching decrease for dampener words (reference constant `B_DECR`).
const B_DECR: f64 = -0.293;
/// Rating increase for ALL-CAPS emphasis (reference constant `C_INCR`).
const C_INCR: f64 = 0.733;
/// Valence multiplier applied by negations (reference constant `N_SCALAR`).
const N_SCALAR: f64 = -0.74;
/// Normalization denominator constant (reference `normalize` alpha).
const NORMALIZE_ALPHA: f64 = 15.0;

/// The ASCII punctuation set used for token edge stripping; byte-for-byte
/// Python's `string.punctuation`.
const PUNCTUATION: &str = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

const NEGATE: [&str; 59] = [
    "aint", "arent", "cannot", "cant", "couldnt", "darent", "didnt", "doesnt", "ain't",
    "aren't", "can't", "couldn't", "daren't", "didn't", "doesn't", "dont", "hadnt", "hasnt",
    "havent", "isnt", "mightnt", "mustnt", "neither", "don't", "hadn't", "hasn't", "haven't",
    "isn't", "mightn't", "mustn't", "neednt", "needn't", "never", "none", "nope", "nor", "not",
    "nothing", "nowhere", "oughtnt", "shant", "shouldnt", "uhuh", "wasnt", "werent",
    "oughtn't", "shan't", "shouldn't", "uh-uh", "wasn't", "weren't", "without", "wont",
    "wouldnt", "won't", "wouldn't", "rarely", "seldom", "despite",
];

const BOOSTER_TABLE: [(&str, f64); 84] = [
    ("absolutely", B_INCR), ("amazingly", B_INCR), ("awfully", B_INCR), ("completely", B_INCR),
    ("considerable", B_INCR), ("considerably", B_INCR), ("decidedly", B_INCR), ("deeply", B_INCR),
    ("effing", B_INCR), ("enormous", B_INCR), ("enormously", B_INCR), ("entirely", B_INCR),
    ("especially", B_INCR), ("exceptional", B_INCR), ("exceptionally", B_INCR), ("extreme", B_INCR),
    ("extremely", B_INCR), ("fabulously", B_INCR), ("flipping", B_INCR), ("flippin", B_INCR),
    ("frackin", B_INCR), ("fracking", B_INCR), ("fricking", B_INCR), ("frickin", B_INCR),
    ("frigging", B_INCR), ("friggin", B_INCR), ("fully", B_INCR), ("fuckin", B_INCR),
    ("fucking", B_INCR), ("fuggin", B_INCR), ("fugging", B_INCR), ("greatly", B_INCR),
    ("hella", B_INCR), ("highly", B_INCR), ("hugely", B_INCR), ("incredible", B_INCR),
    ("incredibly", B_INCR), ("intensely", B_INCR), ("major", B_INCR), ("majorly", B_INCR),
    ("more", B_INCR), ("most", B_INCR), ("particularly", B_INCR), ("purely", B_INCR),
    ("quite", B_INCR), ("really", B_INCR), ("remarkably", B_INCR), ("so", B_INCR),
    ("substantially", B_INCR), ("thoroughly", B_INCR), ("total", B_INCR), ("totally", B_INCR),
    ("tremendous", B_INCR), ("tremendously", B_INCR), ("uber", B_INCR), ("unbelievably", B_INCR),
    ("unusually", B_INCR), ("utter", B_INCR), ("utterly", B_INCR), ("very", B_INCR),
    ("almost", B_DECR), ("barely", B_DECR), ("hardly", B_DECR), ("just enough", B_DECR),
    ("kind of", B_DECR), ("kinda", B_DECR), ("kindof", B_DECR), ("kind-of", B_DECR),
    ("less", B_DECR), ("little", B_DECR), ("marginal", B_DECR), ("marginally", B_DECR),
    ("occasional", B_DECR), ("occasionally", B_DECR), ("partly", B_DECR), ("scarce", B_DECR),
    ("scarcely", B_DECR), ("slight", B_DECR), ("slightly", B_DECR), ("somewhat", B_DECR),
    ("sort of", B_DECR), ("sorta", B_DECR), ("sortof", B_DECR), ("sort-of", B_DECR),
];

const SPECIAL_CASE_TABLE: [(&str, f64); 10] = [
    ("the shit", 3.0),
    ("the bomb", 3.0),
    ("bad ass", 1.5),
    ("badass", 1.5),
    ("bus stop", 0.0),
    ("yeah right", -2.0),
    ("kiss of death", -1.5),
    ("to die for", 3.0),
    ("beating heart", 3.1),
    ("broken heart", -2.9),
];

fn negate_set() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| NEGATE.iter().copied().collect())
}

fn booster_dict() -> &'static HashMap<&'static str, f64> {
    static MAP: OnceLock<HashMap<&'static str, f64>> = OnceLock::new();
    MAP.get_or_init(|| BOOSTER_TABLE.iter().copied().collect())
}

fn special_cases() -> &'static HashMap<&'static str, f64> {
    static MAP: OnceLock<HashMap<&'static str, f64>> = OnceLock::new();
    MAP.get_or_init(|| SPECIAL_CASE_TABLE.iter().copied().collect())
}

/// Normalize a raw valence sum into `[-1, +1]`.
pub(crate) fn normalize(score: f64) -> f64 {
    let norm = score / (score * score + NORMALIZE_ALPHA).sqrt();
    if norm < -1.0 {
        -1.0
    } else if norm > 1.0 {
        1.0
    } else {
        norm
    }
}

/// Python `str.isupper` semantics: at least one cased character and no
/// lowercase cased characters. (Unicode titlecase characters are not
/// distinguished; they do not occur in practice.)
fn is_upper(word: &str) -> bool {
    let mut has_cased = false;
    for c in word.chars() {
        if c.is_lowercase() {
            return false;
        }
        if c.is_uppercase() {
            has_cased = true;
        }
    }
    has_cased
}

/// True when some, but not all, tokens are ALL-CAPS — the signal that caps
/// are being used for emphasis rather than as a house style.
fn allcap_differential(words: &[String]) -> bool {
    let allcap = words.iter().filter(|w| is_upper(w)).count();
    let differential = words.len() - allcap;
    0 < differential && differential < words.len()
}

/// True when the (lowercased) word is a negation: a member of the negation
/// table or any token containing `n't`.
fn negated(word_lower: &str) -> bool {
    negate_set().contains(word_lower) || word_lower.contains("n't")
}

/// Booster/dampener contribution of `word` to a sentiment-bearing token with
/// valence `valence`. Dampening flips direction for negative valences, and
/// ALL-CAPS boosters receive the emphasis increment on top.
fn scalar_inc_dec(word: &str, word_lower: &str, valence: f64, is_cap_diff: bool) -> f64 {
    let Some(&base) = booster_dict().get(word_lower) else {
        return 0.0;
    };
    let mut scalar = base;
    if valence < 0.0 {
        scalar = -scalar;
    }
    if is_upper(word) && is_cap_diff {
        if valence > 0.0 {
            scalar += C_INCR;
        } else {
            scalar -= C_INCR;
        }
    }
    scalar
}

/// Split on whitespace and strip leading/trailing punctuation from each
/// token, keeping the original token whenever stripping would leave two or
/// fewer characters (this preserves emoticons such as `:)`).
fn words_and_emoticons(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|token| {
            let stripped = token.trim_matches(|c| PUNCTUATION.contains(c));
            if stripped.chars().count() <= 2 {
                token.to_string()
            } else {
                stripped.to_string()
            }
        })
        .collect()
}

/// Tokenized input with per-token lowercase forms and the caps-emphasis flag.
struct SentiTokens {
    original: Vec<String>,
    lower: Vec<String>,
    is_cap_diff: bool,
}

impl SentiTokens {
    fn new(text: &str) -> Self {
        let original = words_and_emoticons(text);
        let lower = original.iter().map(|w| w.to_lowercase()).collect();
        let is_cap_diff = allcap_differential(&original);
        SentiTokens {
            original,
            lower,
            is_cap_diff,
        }
    }

    fn len(&self) -> usize {
        self.original.len()
    }
}

/// Lexicon-and-rules sentiment analyzer producing compound scores in
/// `[-1, +1]`.
pub struct VaderAnalyzer {
    id: String,
    lexicon: ValenceLexicon,
}

impl VaderAnalyzer {
    /// Identifier used by [`VaderAnalyzer::bundled`].
    pub const DEFAULT_ID: &'static str = "vader-builtin";

    /// Analyzer backed by the bundled lexicon.
    pub fn bundled() -> Self {
        Self::with_lexicon(Self::DEFAULT_ID, ValenceLexicon::bundled())
    }

    /// Analyzer backed by a caller-supplied lexicon.
    pub fn with_lexicon(id: impl Into<String>, lexicon: ValenceLexicon) -> Self {
        VaderAnalyzer {
            id: id.into(),
            lexicon,
        }
    }

    /// The lexicon backing this analyzer.
    pub fn lexicon(&self) -> &ValenceLexicon {
        &self.lexicon
    }

    /// Compute the unrounded compound polarity of `text`.
    ///
    /// Empty or entirely non-lexical input scores exactly `0.0`.
    pub fn compound(&self, text: &str) -> f64 {
        let text = text.trim();
        let tokens = SentiTokens::new(text);
        let mut sentiments: Vec<f64> = Vec::with_capacity(tokens.len());
        for i in 0..tokens.len() {
            let lower = tokens.lower[i].as_str();
            // Boosters and the split "kind of" dampener carry no valence of
            // their own; they only modulate neighboring lexicon words.
            if booster_dict().contains_key(lower)
                || (i + 1 < tokens.len() && lower == "kind" && tokens.lower[i + 1] == "of")
            {
                sentiments.push(0.0);
            } else {
                sentiments.push(self.sentiment_valence(&tokens, i));
            }
        }
        Self::but_check(&tokens.lower, &mut sentiments);
        Self::score_valence(&sentiments, text)
    }

    /// Valence of the token at position `i`, after every contextual rule.
    fn sentiment_valence(&self, tokens: &SentiTokens, i: usize) -> f64 {
        let item = tokens.original[i].as_str();
        let lower = tokens.lower[i].as_str();
        let Some(lex_valence) = self.lexicon.get(lower) else {
            return 0.0;
        };
        let mut valence = lex_valence;

        // "no" acting as negation of an adjacent lexicon word carries no
        // valence itself; "no" *preceding* a lexicon word negates the raw
        // lexicon value (discarding any zeroing applied just above).
        if lower == "no" && i + 1 < tokens.len() && self.lexicon.contains(&tokens.lower[i + 1]) {
            valence = 0.0;
        }
        if (i >= 1 && tokens.lower[i - 1] == "no")
            || (i >= 2 && tokens.lower[i - 2] == "no")
            || (i >= 3
                && tokens.lower[i - 3] == "no"
                && (tokens.lower[i - 1] == "or" || tokens.lower[i - 1] == "nor"))
        {
            valence = lex_valence * N_SCALAR;
        }

        if is_upper(item) && tokens.is_cap_diff {
            if valence > 0.0 {
                valence += C_INCR;
            } else {
                valence -= C_INCR;
            }
        }

        for start_i in 0..3usize {
            // Look backwards up to three tokens, skipping positions occupied
            // by lexicon words (those carry their own valence).
            if i > start_i && !self.lexicon.contains(&tokens.lower[i - (start_i + 1)]) {
                let mut s = scalar_inc_dec(
                    &tokens.original[i - (start_i + 1)],
                    &tokens.lower[i - (start_i + 1)],
                    valence,
                    tokens.is_cap_diff,
                );
                if start_i == 1 && s != 0.0 {
                    s *= 0.95;
                }
                if start_i == 2 && s != 0.0 {
                    s *= 0.9;
                }
                valence += s;
                valence = Self::negation_check(valence, &tokens.lower, start_i, i);
                if start_i == 2 {
                    valence = Self::special_idioms_check(valence, &tokens.lower, i);
                }
            }
        }

        self.least_check(valence, &tokens.lower, i)
    }

    /// Negation rules for the token at distance `start_i + 1` before `i`.
    fn negation_check(valence: f64, lower: &[String], start_i: usize, i: usize) -> f64 {
        let mut valence = valence;
        match start_i {
            0 => {
                if negated(&lower[i - 1]) {
                    valence *= N_SCALAR;
                }
            }
            1 => {
                if lower[i - 2] == "never" && (lower[i - 1] == "so" || lower[i - 1] == "this") {
                    valence *= 1.25;
                } else if lower[i - 2] == "without" && lower[i - 1] == "doubt" {
                    // pass through unchanged
                } else if negated(&lower[i - 2]) {
                    valence *= N_SCALAR;
                }
            }
            2 => {
                // Reference operator precedence: the `never`-qualified check
                // applies only to the token three back, while a bare
                // `so`/`this` immediately before the scored word triggers the
                // bump on its own.
                if (lower[i - 3] == "never"
                    && (lower[i - 2] == "so" || lower[i - 2] == "this"))
                    || (lower[i - 1] == "so" || lower[i - 1] == "this")
                {
                    valence *= 1.25;
                } else if lower[i - 3] == "without"
                    && (lower[i - 2] == "doubt" || lower[i - 1] == "doubt")
                {
                    // pass through unchanged
                } else if negated(&lower[i - 3]) {
                    valence *= N_SCALAR;
                }
            }
            _ => unreachable!("negation window is at most three tokens"),
        }
        valence
    }

    /// Multi-word idiom overrides and n-gram booster adjustments around `i`.
    /// Only invoked once the backward window has reached three tokens, so
    /// `i >= 3` holds.
    fn special_idioms_check(valence: f64, lower: &[String], i: usize) -> f64 {
        let mut valence = valence;
        let onezero = format!("{} {}", lower[i - 1], lower[i]);
        let twoonezero = format!("{} {} {}", lower[i - 2], lower[i - 1], lower[i]);
        let twoone = format!("{} {}", lower[i - 2], lower[i - 1]);
        let threetwoone = format!("{} {} {}", lower[i - 3], lower[i - 2], lower[i - 1]);
        let threetwo = format!("{} {}", lower[i - 3], lower[i - 2]);

        for seq in [&onezero, &twoonezero, &twoone, &threetwoone, &threetwo] {
            if let Some(&v) = special_cases().get(seq.as_str()) {
                valence = v;
                break;
            }
        }
        if lower.len() - 1 > i {
            let zeroone = format!("{} {}", lower[i], lower[i + 1]);
            if let Some(&v) = special_cases().get(zeroone.as_str()) {
                valence = v;
            }
        }
        if lower.len() - 1 > i + 1 {
            let zeroonetwo = format!("{} {} {}", lower[i], lower[i + 1], lower[i + 2]);
            if let Some(&v) = special_cases().get(zeroonetwo.as_str()) {
                valence = v;
            }
        }
        // Booster bigrams such as "sort of" act additively on top.
        for n_gram in [&threetwoone, &threetwo, &twoone] {
            if let Some(&b) = booster_dict().get(n_gram.as_str()) {
                valence += b;
            }
        }
        valence
    }

    /// `least` preceding a sentiment word negates it, except in the phrases
    /// "at least" and "very least".
    fn least_check(&self, valence: f64, lower: &[String], i: usize) -> f64 {
        let mut valence = valence;
        if i > 1 && !self.lexicon.contains(&lower[i - 1]) && lower[i - 1] == "least" {
            if lower[i - 2] != "at" && lower[i - 2] != "very" {
                valence *= N_SCALAR;
            }
        } else if i > 0 && !self.lexicon.contains(&lower[i - 1]) && lower[i - 1] == "least" {
            valence *= N_SCALAR;
        }
        valence
    }

    /// Contrastive-conjunction rebalancing: de-emphasize sentiment before the
    /// first "but" and emphasize sentiment after it.
    ///
    /// Deliberately reproduces the reference's lookup of each entry by *first
    /// value match* rather than by position; with duplicated values the first
    /// occurrence is the one rescaled.
    fn but_check(lower: &[String], sentiments: &mut [f64]) {
        let Some(bi) = lower.iter().position(|w| w == "but") else {
            return;
        };
        for k in 0..sentiments.len() {
            let sentiment = sentiments[k];
            let si = sentiments
                .iter()
                .position(|&v| v == sentiment)
                .expect("value just read from the slice is present");
            if si < bi {
                sentiments[si] = sentiment * 0.5;
            } else if si > bi {
                sentiments[si] = sentiment * 1.5;
            }
        }
    }

    /// Amplification from exclamation points: 0.292 per `!`, capped at four.
    fn amplify_ep(text: &str) -> f64 {
        let mut ep_count = text.matches('!').count();
        if ep_count > 4 {
            ep_count = 4;
        }
        ep_count as f64 * 0.292
    }

    /// Amplification from question marks: 0.18 per `?` for two or three,
    /// 0.96 flat beyond that; a single `?` adds nothing.
    fn amplify_qm(text: &str) -> f64 {
        let qm_count = text.matches('?').count();
        if qm_count > 1 {
            if qm_count <= 3 {
                return qm_count as f64 * 0.18;
            }
            return 0.96;
        }
        0.0
    }

    /// Fold per-token valences and punctuation emphasis into the normalized
    /// compound score.
    fn score_valence(sentiments: &[f64], text: &str) -> f64 {
        if sentiments.is_empty() {
            return 0.0;
        }
        // Left-to-right summation, matching the reference exactly.
        let mut sum_s = 0.0;
        for &s in sentiments {
            sum_s += s;
        }
        let punct = Self::amplify_ep(text) + Self::amplify_qm(text);
        if sum_s > 0.0 {
            sum_s += punct;
        } else if sum_s < 0.0 {
            sum_s -= punct;
        }
        normalize(sum_s)
    }
}

impl Analyzer for VaderAnalyzer {
    fn id(&self) -> &str {
        &self.id
    }

    fn analyze(&self, text: &str) -> Result<SentimentScore, AnalyzerError> {
        Ok(SentimentScore {
            compound: self.compound(text),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn analyzer() -> VaderAnalyzer {
        VaderAnalyzer::bundled()
    }

    /// Reference compound values computed with the reference implementation
    /// (unrounded). The first block mirrors the reference demo sentences;
    /// the rest exercise specific rule paths: negation windows, `no`
    /// handling, `least`, idioms, contrastive `but`, punctuation runs, caps
    /// emphasis, and tokenization edge cases.
    const PINNED: &[(&str, f64)] = &[
        ("VADER is smart, handsome, and funny.", 0.83163203528078644),
        ("VADER is smart, handsome, and funny!", 0.84389631524896347),
        ("VADER is very smart, handsome, and funny.", 0.85450991809056176),
        ("VADER is VERY SMART, handsome, and FUNNY.", 0.92265719157925208),
        ("VADER is VERY SMART, handsome, and FUNNY!!!", 0.93420868449209427),
        ("VADER is VERY SMART, uber handsome, and FRIGGIN FUNNY!!!", 0.94693835213854805),
        ("VADER is not smart, handsome, nor funny.", -0.74241763237326863),
        ("The book was good.", 0.44043357076016854),
        ("At least it isn't a horrible book.", 0.43102002306105164),
        ("The book was only kind of good.", 0.38324473176419577),
        (
            "The plot was good, but the characters are uncompelling and the dialog is not great.",
            -0.70416895659943024,
        ),
        ("Today SUX!", -0.54613746673271113),
        ("Today only kinda sux! But I'll get by, lol", 0.52491422086422646),
        ("Make sure you :) or :D today!", 0.86330210702367083),
        ("Not bad at all", 0.43102002306105164),
        ("Sentiment analysis has never been good.", -0.3412376512543242),
        ("Sentiment analysis has never been this good!", 0.56715305103783986),
        ("Most automated sentiment analysis tools are shit.", -0.55737040171315366),
        ("With VADER, sentiment analysis is the shit!", 0.64764432618530288),
        ("Other sentiment analysis tools can be quite bad.", -0.58491859277008895),
        ("On the other hand, VADER is quite bad ass", 0.80199560801832637),
        ("VADER is such a badass!", 0.40033615420675317),
        ("Without a doubt, excellent idea.", 0.70128651692614574),
        (
            "Roger Dodger is one of the most compelling variations on this theme.",
            0.29438176507287922,
        ),
        (
            "Roger Dodger is at least compelling as a variation on the theme.",
            0.22634795467253557,
        ),
        (
            "Roger Dodger is one of the least compelling variations on this theme.",
            -0.16947302270321746,
        ),
        ("Not such a badass after all.", -0.2584087909727581),
        ("Without a doubt, an excellent idea.", 0.70128651692614574),
        ("I love Japanese people.", 0.63694994292642637),
        ("They absolutely hate each other!!", -0.67847860247689695),
        ("They hate each other.", -0.57188503207007213),
        ("It was good, good, but bad.", -0.43102002306105164),
        ("No good.", -0.3412376512543242),
        ("No, they do not get along.", 0.0),
        ("There is no hate between them.", 0.4584691179797461),
        ("They never so much as smile, yet they never hate.", 0.69672596459932556),
        ("The least favorable outcome.", -0.37238340821258398),
        ("At the very least it is decent.", 0.0),
        ("That trip to the bus stop was fine.", 0.0),
        ("Their bond is a beating heart of the community.", 0.62489332693894573),
        ("A broken heart takes time.", -0.47665760557457437),
        ("Their plan was the kiss of death, yeah right.", -0.42146361521176229),
        ("This dessert is to die for!", -0.63600216188608649),
        ("Isn't it great??", -0.56527335515821175),
        ("Isn't it great???", -0.59052488821851945),
        ("Isn't it great????? Really?????", -0.64327251933746232),
        ("AMAZING!!!! WOW!!!!", 0.86793611728754139),
        ("ok.", 0.0),
        ("okay!", 0.2941563671268686),
        ("It is so not worth it.", -0.23688986547876237),
        ("He is flat-out brilliant, no doubt about it.", 0.71046181690354615),
        ("uh-uh, that won't fly.", 0.0),
        (
            "Hardly a success, barely adequate, somewhat disappointing.",
            0.33679812569914513,
        ),
        ("so so good", 0.53791682485992021),
    ];

    #[test]
    fn pinned_compound_values_match_reference() {
        let a = analyzer();
        for &(text, expected) in PINNED {
            let got = a.compound(text);
            assert!(
                (got - expected).abs() < 1e-9,
                "mismatch for {text:?}: got {got:.17}, expected {expected:.17}"
            );
        }
    }

    #[test]
    fn empty_and_nonlexical_inputs_score_zero() {
        let a = analyzer();
        for text in ["", "   ", "\t\n", "the an of and", "qwxz zzqy", "ok."] {
            assert_eq!(a.compound(text), 0.0, "expected zero for {text:?}");
        }
    }

    #[test]
    fn negation_flips_polarity_sign() {
        let a = analyzer();
        for word in ["good", "great", "happy", "terrible", "awful"] {
            let plain = a.compound(word);
            let negated = a.compound(&format!("not {word}"));
            assert!(plain != 0.0, "{word} should be in the lexicon");
            assert!(
                (plain > 0.0) != (negated > 0.0),
                "negation should flip sign for {word}: {plain} vs {negated}"
            );
        }
    }

    #[test]
    fn exclamation_amplification_caps_at_four() {
        let a = analyzer();
        let four = a.compound("good!!!!");
        let five = a.compound("good!!!!!");
        assert_eq!(four, five, "more than four bangs should not add emphasis");
        assert!(four > a.compound("good"), "bangs amplify positive text");
        let neg_four = a.compound("awful!!!!");
        assert!(
            neg_four < a.compound("awful"),
            "bangs amplify negative text away from zero"
        );
    }

    #[test]
    fn question_mark_amplification_plateaus() {
        let a = analyzer();
        let one = a.compound("good?");
        let two = a.compound("good??");
        let three = a.compound("good???");
        let four = a.compound("good????");
        let nine = a.compound("good?????????");
        assert_eq!(one, a.compound("good"), "a single ? adds nothing");
        assert!(two > one && three > two, "two and three ? grow emphasis");
        assert!(four > three, "the flat cap exceeds 3 * 0.18");
        assert_eq!(four, nine, "beyond three ? emphasis is flat");
    }

    #[test]
    fn emoticons_survive_tokenization() {
        let a = analyzer();
        assert!(a.compound(":)") > 0.0);
        assert!(a.compound(":(") < 0.0);
        // Stripping would reduce ":)" to an empty token; the reference keeps
        // the original token whenever the stripped form is two chars or less.
        assert!(a.compound("feeling :) today") > 0.0);
    }

    #[test]
    fn caps_emphasis_requires_mixed_case_context() {
        let a = analyzer();
        // Mixed case: GREAT is emphasized relative to great.
        assert!(a.compound("GREAT day today") > a.compound("great day today"));
        // Uniform caps: no differential, no emphasis.
        assert_eq!(a.compound("GREAT DAY TODAY"), a.compound("great day today"));
    }

    #[test]
    fn analyzer_trait_reports_id_and_score() {
        let a = analyzer();
        assert_eq!(a.id(), VaderAnalyzer::DEFAULT_ID);
        let score = a.analyze("I love this.").expect("analysis succeeds");
        assert!(score.compound > 0.0);
        assert!(score.compound <= 1.0);
    }

    proptest! {
        #[test]
        fn compound_is_bounded_and_deterministic(text in "\\PC*") {
            let a = analyzer();
            let first = a.compound(&text);
            prop_assert!(first.is_finite());
            prop_assert!((-1.0..=1.0).contains(&first));
            prop_assert_eq!(first, a.compound(&text));
        }

        #[test]
        fn compound_ignores_surrounding_whitespace(text in "[a-zA-Z !?.,:)(]{0,60}") {
            let a = analyzer();
            let padded = format!("  \t{text} \n ");
            prop_assert_eq!(a.compound(&text), a.compound(&padded));
        }
    }
}
