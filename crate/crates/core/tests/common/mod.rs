//! Reference implementations shared by the property and acceptance tests.
//! They are deliberately naive and independent of the library code.

#![allow(dead_code)]

/// Word-level Levenshtein distance over the full DP matrix.
pub fn full_matrix_distance(a: &[&str], b: &[&str]) -> usize {
    let w = b.len() + 1;
    let mut m = vec![0usize; (a.len() + 1) * w];
    for i in 0..=a.len() {
        m[i * w] = i;
    }
    for (j, cell) in m[..w].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = m[(i - 1) * w + j - 1] + usize::from(a[i - 1] != b[j - 1]);
            m[i * w + j] = sub.min(m[(i - 1) * w + j] + 1).min(m[i * w + j - 1] + 1);
        }
    }
    m[a.len() * w + b.len()]
}

pub fn chars_distance(a: &str, b: &str) -> usize {
    let a: Vec<String> = a.chars().map(String::from).collect();
    let b: Vec<String> = b.chars().map(String::from).collect();
    let a: Vec<&str> = a.iter().map(String::as_str).collect();
    let b: Vec<&str> = b.iter().map(String::as_str).collect();
    full_matrix_distance(&a, &b)
}

/// Reference greedy matcher for lowercase, single-space-separated input
/// without punctuation.
pub fn repair_oracle(text: &str, entries: &[(String, Vec<String>)], threshold: f64, window: usize) -> String {
    let words: Vec<&str> = text.split(' ').filter(|w| !w.is_empty()).collect();
    let flat: Vec<(&str, &str)> = entries
        .iter()
        .flat_map(|(c, vs)| vs.iter().map(move |v| (c.as_str(), v.as_str())))
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    'scan: while i < words.len() {
        for w in (1..=window.min(words.len() - i)).rev() {
            let gram = words[i..i + w].join(" ");
            let best = flat
                .iter()
                .enumerate()
                .filter_map(|(k, (c, v))| {
                    let d = chars_distance(&gram, v);
                    (d as f64 <= threshold * v.chars().count() as f64 + 1e-9).then_some((d, k, *c))
                })
                .min_by_key(|&(d, k, _)| (d, k));
            if let Some((_, _, canonical)) = best {
                out.push(canonical.to_string());
                i += w;
                continue 'scan;
            }
        }
        out.push(words[i].to_string());
        i += 1;
    }
    out.join(" ")
}

/// Naive scan for every (possibly overlapping) occurrence.
pub fn occurrences(text: &str, term: &str) -> Vec<(usize, usize)> {
    (0..text.len())
        .filter(|&i| text[i..].starts_with(term))
        .map(|i| (i, i + term.len()))
        .collect()
}
