use std::collections::BTreeMap;

/// Lowercased word tokens. Splits on every non-alphanumeric character and
/// on camelCase boundaries (`getValue` → `get value`, `XMLParser` →
/// `xml parser`). Digits stay attached to the preceding word.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split(|c: char| !c.is_alphanumeric()) {
        let chars: Vec<char> = word.chars().collect();
        let mut start = 0;
        for i in 1..chars.len() {
            let (prev, cur) = (chars[i - 1], chars[i]);
            let lower_to_upper = cur.is_uppercase() && (prev.is_lowercase() || prev.is_numeric());
            let acronym_end =
                cur.is_uppercase() && prev.is_uppercase() && chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            if lower_to_upper || acronym_end {
                tokens.push(chars[start..i].iter().collect::<String>().to_lowercase());
                start = i;
            }
        }
        if start < chars.len() {
            tokens.push(chars[start..].iter().collect::<String>().to_lowercase());
        }
    }
    tokens
}

fn term_counts(tokens: &[String]) -> BTreeMap<&str, f64> {
    let mut tf = BTreeMap::new();
    for t in tokens {
        *tf.entry(t.as_str()).or_insert(0.0) += 1.0;
    }
    tf
}

/// Cosine similarity of the TF-IDF vectors of two texts, treating the pair
/// as the whole document collection. Term frequency is the raw count and
/// idf is the smoothed `ln((1 + N) / (1 + df)) + 1` with `N = 2`.
pub fn tfidf_cosine(text_a: &str, text_b: &str) -> f64 {
    let (ta, tb) = (tokenize(text_a), tokenize(text_b));
    let (ca, cb) = (term_counts(&ta), term_counts(&tb));
    let idf = |df: f64| (3.0 / (1.0 + df)).ln() + 1.0;
    let shared = idf(2.0);
    let single = idf(1.0);

    let mut dot = 0.0;
    let mut norm_a = 0.0;
    for (term, &fa) in &ca {
        match cb.get(term) {
            Some(&fb) => {
                dot += fa * shared * fb * shared;
                norm_a += (fa * shared).powi(2);
            }
            None => norm_a += (fa * single).powi(2),
        }
    }
    let norm_b: f64 = cb
        .iter()
        .map(|(term, &fb)| {
            let w = if ca.contains_key(term) { shared } else { single };
            (fb * w).powi(2)
        })
        .sum();
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    (dot / (norm_a.sqrt() * norm_b.sqrt())).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn camel_case_tokens() {
        assert_eq!(tokenize("getValue returns value"), ["get", "value", "returns", "value"]);
        assert_eq!(
            tokenize("XMLParser.parseHTTP2Url"),
            ["xml", "parser", "parse", "http2", "url"]
        );
        assert_eq!(tokenize("int0 = a_b;"), ["int0", "a", "b"]);
        assert!(tokenize("  ;;  ").is_empty());
    }

    #[test]
    fn identical_texts() {
        let s = tfidf_cosine("assertEquals(0, widget.size());", "assertEquals(0, widget.size());");
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn disjoint_texts() {
        assert_eq!(tfidf_cosine("alpha beta", "gamma delta"), 0.0);
    }

    #[test]
    fn empty_side_is_zero() {
        assert_eq!(tfidf_cosine("", "anything"), 0.0);
        assert_eq!(tfidf_cosine("/** */", ""), 0.0);
    }

    // Pinned from an independent hand evaluation of the formula:
    // a = {get:1, value:2, returns:1}, b = {returns:1, the:1, stored:1, value:1},
    // idf(shared) = 1, idf(single) = 1 + ln 1.5.
    // cos = 3 / sqrt((1 + 4 + (1+ln1.5)^2) * (2 + 2(1+ln1.5)^2)).
    #[test]
    fn pinned_regression_value() {
        let s = tfidf_cosine("getValue returns value", "returns the stored value");
        assert!((s - TFIDF_PIN).abs() < 1e-12, "{s}");
    }

    const TFIDF_PIN: f64 = 0.465_646_219_098_899_9;

    proptest! {
        #[test]
        fn symmetric_and_bounded(a in "[a-zA-Z ]{0,40}", b in "[a-zA-Z ]{0,40}") {
            let ab = tfidf_cosine(&a, &b);
            let ba = tfidf_cosine(&b, &a);
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
        }
    }
}
