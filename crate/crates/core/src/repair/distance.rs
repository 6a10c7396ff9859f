/// Unit-cost Levenshtein distance over arbitrary sequences, single-row DP.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = diag + usize::from(x != y);
            diag = row[j + 1];
            row[j + 1] = sub.min(diag + 1).min(row[j] + 1);
        }
    }
    row[b.len()]
}

/// Character-level distance between two strings.
pub fn char_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein(&a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_distances() {
        assert_eq!(char_distance("", ""), 0);
        assert_eq!(char_distance("kitten", "sitting"), 3);
        assert_eq!(char_distance("a sure", "azure"), 2);
        assert_eq!(char_distance("abc", ""), 3);
        assert_eq!(levenshtein(&["a", "b", "c"], &["a", "x", "c"]), 1);
    }
}
