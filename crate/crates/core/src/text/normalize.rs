use std::collections::HashSet;
use std::fs;
use std::ops::RangeInclusive;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};

/// Code point ranges treated as emoji.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmojiBlocks {
    ranges: Vec<RangeInclusive<u32>>,
}

impl Default for EmojiBlocks {
    fn default() -> Self {
        Self {
            ranges: vec![0x1F300..=0x1FAFF, 0x2600..=0x27BF, 0x1F1E6..=0x1F1FF],
        }
    }
}

impl EmojiBlocks {
    pub fn new(ranges: Vec<RangeInclusive<u32>>) -> Result<Self> {
        if ranges.iter().any(|r| r.start() > r.end()) {
            return Err(Error::invalid("emoji range with start after end"));
        }
        Ok(Self { ranges })
    }

    /// Parses `1F300-1FAFF,2600-27BF` (hex, inclusive; a single value is a
    /// one-point range).
    pub fn parse(spec: &str) -> Result<Self> {
        let mut ranges = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (lo, hi) = part.split_once('-').unwrap_or((part, part));
            let parse = |s: &str| {
                u32::from_str_radix(
                    s.trim().trim_start_matches("U+").trim_start_matches("u+"),
                    16,
                )
                .map_err(|e| Error::parse("emoji blocks", format!("{part}: {e}")))
            };
            ranges.push(parse(lo)?..=parse(hi)?);
        }
        if ranges.is_empty() {
            return Err(Error::parse("emoji blocks", "no ranges given"));
        }
        Self::new(ranges)
    }

    pub fn ranges(&self) -> &[RangeInclusive<u32>] {
        &self.ranges
    }

    #[inline]
    pub fn contains(&self, c: char) -> bool {
        let cp = c as u32;
        self.ranges.iter().any(|r| r.contains(&cp))
    }
}

/// Lowercased stop-word set.
#[derive(Clone, Debug, Default)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(
            words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    /// One word per line, UTF-8; blank lines and `#`-prefixed comment lines
    /// are skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_words(
            text.lines().filter(|l| !l.trim_start().starts_with("# ")),
        ))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn punct_or_symbol() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[\p{P}\p{S}]$").expect("static regex"))
}

fn format_char() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[\p{Cf}\u{FE00}-\u{FE0F}]$").expect("static regex"))
}

fn matches(re: &Regex, c: char) -> bool {
    let mut buf = [0u8; 4];
    re.is_match(c.encode_utf8(&mut buf))
}

/// Text normalizer: lowercasing, username and punctuation removal,
/// stop-word filtering, with hashtags and emoji kept as tokens.
#[derive(Clone, Debug, Default)]
pub struct Normalizer {
    pub stop_words: StopWords,
    pub emoji: EmojiBlocks,
}

impl Normalizer {
    pub fn new(stop_words: StopWords, emoji: EmojiBlocks) -> Self {
        Self { stop_words, emoji }
    }

    pub fn normalize_and_tokenize(&self, body: &str) -> Vec<String> {
        let lowered = body.to_lowercase();
        let mut tokens = Vec::new();
        for chunk in lowered.split_whitespace() {
            let mut segment = String::new();
            for c in chunk.chars() {
                if self.emoji.contains(c) {
                    self.push_segment(&segment, &mut tokens);
                    segment.clear();
                    tokens.push(c.to_string());
                } else {
                    segment.push(c);
                }
            }
            self.push_segment(&segment, &mut tokens);
        }
        tokens
    }

    fn push_segment(&self, segment: &str, out: &mut Vec<String>) {
        let rest = segment.trim_start_matches(|c: char| {
            c != '#' && c != '@' && (matches(punct_or_symbol(), c) || matches(format_char(), c))
        });
        let token = if rest.starts_with('@') {
            return;
        } else if let Some(tag) = rest.strip_prefix('#') {
            let body = clean_word(tag);
            if body.is_empty() {
                return;
            }
            format!("#{body}")
        } else {
            clean_word(rest)
        };
        if !token.is_empty() && !self.stop_words.contains(&token) {
            out.push(token);
        }
    }
}

fn clean_word(s: &str) -> String {
    let kept: String = s
        .chars()
        .filter(|&c| !matches(punct_or_symbol(), c) && !('\u{FE00}'..='\u{FE0F}').contains(&c))
        .collect();
    kept.trim_matches(|c: char| matches(format_char(), c))
        .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn plain() -> Normalizer {
        Normalizer::default()
    }

    #[test]
    fn usernames_and_punctuation() {
        assert_eq!(
            plain().normalize_and_tokenize("@user Hello, WORLD!"),
            ["hello", "world"]
        );
    }

    #[test]
    fn hashtags_kept() {
        assert_eq!(
            plain().normalize_and_tokenize("#Win great #Win"),
            ["#win", "great", "#win"]
        );
        assert_eq!(
            plain().normalize_and_tokenize("(#Tag) # ##two"),
            ["#tag", "#two"]
        );
    }

    #[test]
    fn emoji_kept_and_split() {
        assert_eq!(plain().normalize_and_tokenize("nice 😂"), ["nice", "😂"]);
        assert_eq!(
            plain().normalize_and_tokenize("nice😂😂"),
            ["nice", "😂", "😂"]
        );
        assert_eq!(plain().normalize_and_tokenize("❤️ love"), ["❤", "love"]);
    }

    #[test]
    fn stop_words_removed() {
        let n = Normalizer::new(StopWords::from_words(["the", "है"]), EmojiBlocks::default());
        assert_eq!(n.normalize_and_tokenize("The cat है।"), ["cat"]);
    }

    #[test]
    fn indic_marks_survive() {
        let toks = plain().normalize_and_tokenize("नमस्ते, দুনিয়া!");
        assert_eq!(toks, ["नमस्ते", "দুনিয়া"]);
    }

    #[test]
    fn pathological_input_is_empty() {
        assert!(plain()
            .normalize_and_tokenize("  !!! @someone ...  ")
            .is_empty());
        assert!(plain().normalize_and_tokenize("").is_empty());
    }

    #[test]
    fn emoji_block_parsing() {
        let b = EmojiBlocks::parse("1F600-1F64F, 2764").unwrap();
        assert!(b.contains('😀'));
        assert!(b.contains('\u{2764}'));
        assert!(!b.contains('a'));
        assert!(EmojiBlocks::parse("zz").is_err());
        assert!(EmojiBlocks::parse("20-10").is_err());
    }

    proptest! {
        #[test]
        fn tokenization_is_idempotent(
            s in "[a-zA-Z0-9 #@.,!?;:()'\"\u{0900}-\u{097F}\u{0980}-\u{09FF}\u{1F600}-\u{1F64F}\u{200D}\u{FE0F}-]{0,40}"
        ) {
            let n = Normalizer::new(StopWords::from_words(["a", "the"]), EmojiBlocks::default());
            let once = n.normalize_and_tokenize(&s);
            let twice = n.normalize_and_tokenize(&once.join(" "));
            prop_assert_eq!(once, twice);
        }
    }
}
