//! Rule-based sentence and paragraph segmentation for legal prose.
//!
//! Sentences split after `.`, `!` or `?` when the terminator is followed by
//! whitespace and then an uppercase letter or `[`, guarded by a fixed
//! abbreviation list. Paragraphs split on blank lines and before bracketed
//! numbering (`[1]`, `[2]`, ...) at a sentence start, the numbering style of
//! Canadian Federal Court judgments.

use super::{Paragraph, Sentence};

/// Abbreviations whose trailing period never ends a sentence.
const ABBREVIATIONS: [&str; 13] = [
    "s.", "ss.", "v.", "No.", "Mr.", "Mrs.", "Dr.", "Inc.", "Ltd.", "cf.", "e.g.", "i.e.", "para.",
];

/// Split `text` into trimmed, non-empty sentences.
///
/// Deterministic for identical input; empty or all-whitespace input yields an
/// empty sequence.
pub fn segment_sentences(text: &str) -> Vec<Sentence> {
    split_sentence_texts(text)
        .into_iter()
        .enumerate()
        .map(|(index, text)| Sentence {
            paragraph_index: 0,
            index,
            text,
        })
        .collect()
}

pub(crate) fn split_sentence_texts(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut pieces: Vec<&str> = Vec::new();
    let mut start = 0usize;

    for (k, &(byte, c)) in chars.iter().enumerate() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        // Terminator must be followed by whitespace, then an uppercase letter
        // or a bracketed paragraph number.
        let mut j = k + 1;
        if j >= chars.len() || !chars[j].1.is_whitespace() {
            continue;
        }
        while j < chars.len() && chars[j].1.is_whitespace() {
            j += 1;
        }
        if j >= chars.len() {
            continue;
        }
        let next = chars[j].1;
        if !(next.is_uppercase() || next == '[') {
            continue;
        }
        if c == '.' && ends_with_abbreviation(text, byte) {
            continue;
        }
        let end = byte + c.len_utf8();
        pieces.push(&text[start..end]);
        start = end;
    }
    if start < text.len() {
        pieces.push(&text[start..]);
    }

    pieces
        .into_iter()
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::to_string)
        .collect()
}

/// True when the period at byte offset `dot` terminates a guarded
/// abbreviation with a word boundary in front of it.
fn ends_with_abbreviation(text: &str, dot: usize) -> bool {
    let prefix = &text[..dot + 1];
    ABBREVIATIONS.iter().any(|abbr| {
        if !prefix.ends_with(abbr) {
            return false;
        }
        let begin = prefix.len() - abbr.len();
        begin == 0
            || text[..begin]
                .chars()
                .next_back()
                .is_some_and(|c| !c.is_alphanumeric())
    })
}

/// Split `text` into trimmed, non-empty paragraphs with their sentences.
///
/// `doc_id` is left empty; [`super::Document::parse`] fills it in.
pub fn segment_paragraphs(text: &str) -> Vec<Paragraph> {
    let mut paragraphs: Vec<Paragraph> = Vec::new();
    for block in blank_line_blocks(text) {
        for piece in split_before_numbering(block) {
            let trimmed = piece.trim();
            if trimmed.is_empty() {
                continue;
            }
            let index = paragraphs.len();
            let sentences = split_sentence_texts(trimmed)
                .into_iter()
                .enumerate()
                .map(|(si, text)| Sentence {
                    paragraph_index: index,
                    index: si,
                    text,
                })
                .collect();
            paragraphs.push(Paragraph {
                doc_id: String::new(),
                index,
                sentences,
                text: trimmed.to_string(),
            });
        }
    }
    paragraphs
}

/// Group consecutive non-blank lines into blocks, splitting on one or more
/// blank (all-whitespace) lines.
fn blank_line_blocks(text: &str) -> Vec<&str> {
    let mut blocks = Vec::new();
    let mut block_start: Option<usize> = None;
    let mut offset = 0usize;
    for line in text.split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        if line.trim().is_empty() {
            if let Some(start) = block_start.take() {
                blocks.push(&text[start..line_start]);
            }
        } else if block_start.is_none() {
            block_start = Some(line_start);
        }
    }
    if let Some(start) = block_start {
        blocks.push(&text[start..]);
    }
    blocks
}

/// Split a block before every `[<digits>]` token that sits at a sentence
/// start: preceded by a sentence terminator or on a fresh line.
fn split_before_numbering(block: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = block.char_indices().collect();
    let mut cut_points: Vec<usize> = Vec::new();
    let mut prev_nonws: Option<char> = None;
    let mut newline_since = false;

    for (k, &(byte, c)) in chars.iter().enumerate() {
        if c == '[' && matches_numbering(&chars[k..]) {
            let at_sentence_start = match prev_nonws {
                None => false, // block start: the leading piece would be empty
                Some(p) => matches!(p, '.' | '!' | '?') || newline_since,
            };
            if at_sentence_start {
                cut_points.push(byte);
            }
        }
        if c == '\n' {
            newline_since = true;
        } else if !c.is_whitespace() {
            prev_nonws = Some(c);
            newline_since = false;
        }
    }

    let mut pieces = Vec::with_capacity(cut_points.len() + 1);
    let mut start = 0usize;
    for cut in cut_points {
        pieces.push(&block[start..cut]);
        start = cut;
    }
    pieces.push(&block[start..]);
    pieces
}

/// True when `chars` starts with `[` `<digits>+` `]`.
fn matches_numbering(chars: &[(usize, char)]) -> bool {
    let mut it = chars.iter().map(|&(_, c)| c);
    if it.next() != Some('[') {
        return false;
    }
    let mut saw_digit = false;
    for c in it {
        match c {
            '0'..='9' => saw_digit = true,
            ']' => return saw_digit,
            _ => return false,
        }
    }
    false
}
