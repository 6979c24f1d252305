/// Lowercased abbreviations (without their final period) that never end a
/// sentence.
const ABBREVIATIONS: &[&str] = &[
    "e.g", "i.e", "u.s", "u.k", "mr", "mrs", "ms", "dr", "vs", "st", "jr", "sr", "prof", "inc",
    "ltd", "co", "approx", "dept", "fig",
];

const TERMINALS: [char; 3] = ['.', '!', '?'];
const OPENERS: [char; 6] = ['"', '\'', '(', '[', '\u{201c}', '\u{2018}'];
const CLOSERS: [char; 6] = ['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];

/// Rule-based sentence splitter.
///
/// A boundary follows a run of `.`, `!` or `?` (plus any closing quotes or
/// brackets) when the next non-space character is uppercase or the text
/// ends. A single period after a listed abbreviation is not a boundary.
/// Returned slices are trimmed and borrow from `text`.
pub fn split_review_text(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !TERMINALS.contains(&c) {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < chars.len() && TERMINALS.contains(&chars[i].1) {
            i += 1;
        }
        let single_period = i - run_start == 1 && c == '.';
        while i < chars.len() && CLOSERS.contains(&chars[i].1) {
            i += 1;
        }
        let end = chars.get(i).map_or(text.len(), |&(p, _)| p);
        let mut j = i;
        while j < chars.len() && chars[j].1.is_whitespace() {
            j += 1;
        }
        let boundary = if j == chars.len() {
            true
        } else if j == i {
            false
        } else {
            let mut k = j;
            while k < chars.len() && OPENERS.contains(&chars[k].1) {
                k += 1;
            }
            k < chars.len() && chars[k].1.is_uppercase()
        };
        if boundary && !(single_period && is_abbreviation(&text[start..pos])) {
            push_trimmed(&mut out, &text[start..end]);
            start = end;
        }
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn is_abbreviation(before: &str) -> bool {
    let word = before
        .rsplit(|c: char| c.is_whitespace())
        .next()
        .unwrap_or("")
        .trim_start_matches(['(', '"', '\'']);
    let lower = word.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}

fn push_trimmed<'a>(out: &mut Vec<&'a str>, s: &'a str) {
    let t = s.trim();
    if !t.is_empty() {
        out.push(t);
    }
}

const BULLETS: [char; 4] = ['-', '*', '\u{b7}', '\u{2022}'];

/// One entry per non-empty line with leading bullet glyphs stripped.
pub fn split_note_lines(text: &str) -> Vec<&str> {
    text.lines()
        .map(|l| l.trim_start_matches(|c: char| c.is_whitespace() || BULLETS.contains(&c)).trim_end())
        .filter(|l| !l.is_empty())
        .collect()
}
