//! Label-derived CamelCase identifiers.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use super::AgentError;

/// Letters NFKD leaves undecomposed but with a conventional Latin spelling.
fn transliterate(c: char) -> Option<&'static str> {
    Some(match c {
        'ß' => "ss",
        'æ' => "ae",
        'Æ' => "AE",
        'œ' => "oe",
        'Œ' => "OE",
        'ø' => "o",
        'Ø' => "O",
        'ł' => "l",
        'Ł' => "L",
        'đ' => "d",
        'Đ' => "D",
        'ð' => "d",
        'Ð' => "D",
        'þ' => "th",
        'Þ' => "Th",
        'ı' => "i",
        _ => return None,
    })
}

/// `"Fingernail specimen"` becomes `"FingernailSpecimen"`.
///
/// Accents are folded to ASCII; other non-ASCII letters are dropped without
/// splitting the word; everything else that is not alphanumeric separates words.
pub fn mint_id(label: &str) -> Result<String, AgentError> {
    let mut words: Vec<String> = vec![String::new()];
    for c in label.nfkd() {
        if is_combining_mark(c) {
            continue;
        }
        if c.is_ascii_alphanumeric() {
            words.last_mut().expect("non-empty").push(c);
        } else if let Some(t) = transliterate(c) {
            words.last_mut().expect("non-empty").push_str(t);
        } else if c.is_alphanumeric() {
            continue;
        } else if !words.last().expect("non-empty").is_empty() {
            words.push(String::new());
        }
    }
    let id: String = words
        .iter()
        .filter(|w| !w.is_empty())
        .map(|w| {
            let mut chars = w.chars();
            let first = chars.next().expect("non-empty").to_ascii_uppercase();
            std::iter::once(first).chain(chars).collect::<String>()
        })
        .collect();
    if id.is_empty() {
        return Err(AgentError::EmptyAfterNormalization(label.to_string()));
    }
    Ok(id)
}

/// Like [`mint_id`], appending `_2`, `_3`, ... while `taken` reports a collision.
pub fn mint_unique_id(label: &str, taken: impl Fn(&str) -> bool) -> Result<String, AgentError> {
    let base = mint_id(label)?;
    if !taken(&base) {
        return Ok(base);
    }
    (2..)
        .map(|n| format!("{base}_{n}"))
        .find(|candidate| !taken(candidate))
        .ok_or_else(|| AgentError::EmptyAfterNormalization(label.to_string()))
}
