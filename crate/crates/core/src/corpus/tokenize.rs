/// Lowercases, splits on whitespace and peels non-alphanumeric characters off
/// both ends of every chunk as single-character tokens. Inner punctuation
/// ("don't", "u.s") stays attached.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        push_chunk(&chunk.to_lowercase(), &mut out);
    }
    out
}

/// Number of tokens `tokenize` would produce, without allocating them.
pub fn token_count(text: &str) -> usize {
    let mut n = 0;
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let lead = chars.iter().take_while(|c| !c.is_alphanumeric()).count();
        if lead == chars.len() {
            n += lead;
            continue;
        }
        let trail = chars.iter().rev().take_while(|c| !c.is_alphanumeric()).count();
        n += lead + trail + 1;
    }
    n
}

fn push_chunk(chunk: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = chunk.chars().collect();
    let lead = chars.iter().take_while(|c| !c.is_alphanumeric()).count();
    if lead == chars.len() {
        out.extend(chars.iter().map(|c| c.to_string()));
        return;
    }
    let trail = chars.iter().rev().take_while(|c| !c.is_alphanumeric()).count();
    out.extend(chars[..lead].iter().map(|c| c.to_string()));
    out.push(chars[lead..chars.len() - trail].iter().collect());
    out.extend(chars[chars.len() - trail..].iter().map(|c| c.to_string()));
}

/// Joins tokens back into display text: punctuation attaches to the previous
/// word and the first word of every sentence is capitalized, so the result
/// can be re-split with the corpus sentence rules.
pub fn detokenize(tokens: &[String]) -> String {
    let mut out = String::new();
    let mut capitalize = true;
    for tok in tokens {
        let is_punct = tok.chars().all(|c| !c.is_alphanumeric());
        if !out.is_empty() && !(is_punct && tok != "(" && tok != "\"") {
            out.push(' ');
        }
        if capitalize && !is_punct {
            let mut chars = tok.chars();
            if let Some(first) = chars.next() {
                out.extend(first.to_uppercase());
                out.push_str(chars.as_str());
            }
            capitalize = false;
        } else {
            out.push_str(tok);
        }
        if matches!(tok.as_str(), "." | "!" | "?") {
            capitalize = true;
        }
    }
    out
}
