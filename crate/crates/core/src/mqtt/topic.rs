//! Topic filter matching with `+` (single level) and `#` (multi level,
//! trailing only) wildcards, per the 3.1.1 matching rules.

/// Does `filter` match `topic`?
pub fn topic_matches(filter: &str, topic: &str) -> bool {
    let mut f = filter.split('/');
    let mut t = topic.split('/');
    loop {
        match (f.next(), t.next()) {
            (Some("#"), _) => return true, // matches the parent level too
            (Some("+"), Some(_)) => continue,
            (Some(fl), Some(tl)) if fl == tl => continue,
            (None, None) => return true,
            _ => return false,
        }
    }
}

/// A filter is valid when `#` only appears as the final level and `+`
/// occupies whole levels.
pub fn filter_is_valid(filter: &str) -> bool {
    if filter.is_empty() {
        return false;
    }
    let levels: Vec<&str> = filter.split('/').collect();
    for (i, level) in levels.iter().enumerate() {
        if level.contains('#') && (*level != "#" || i + 1 != levels.len()) {
            return false;
        }
        if level.contains('+') && *level != "+" {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_level_wildcard() {
        assert!(topic_matches("a/+/c", "a/b/c"));
        assert!(!topic_matches("a/+/c", "a/b/c/d"));
        assert!(!topic_matches("a/+/c", "a/c"));
    }

    #[test]
    fn multi_level_wildcard() {
        assert!(topic_matches("#", "anything/at/all"));
        assert!(topic_matches("a/#", "a/b/c"));
        assert!(topic_matches("a/#", "a")); // parent level
        assert!(!topic_matches("a/#", "b/a"));
    }

    #[test]
    fn exact_match_only_without_wildcards() {
        assert!(topic_matches("a/b", "a/b"));
        assert!(!topic_matches("a/b", "a/b/c"));
        assert!(!topic_matches("a/b/c", "a/b"));
    }

    #[test]
    fn exhaustive_small_alphabet() {
        // Every filter/topic pair over levels {a, b} up to depth 3,
        // filters additionally drawing from {+, #} — compare against a
        // naive recursive reference.
        fn reference(filter: &[&str], topic: &[&str]) -> bool {
            match (filter.first(), topic.first()) {
                (Some(&"#"), _) => true,
                (Some(&"+"), Some(_)) => reference(&filter[1..], &topic[1..]),
                (Some(f), Some(t)) if f == t => reference(&filter[1..], &topic[1..]),
                (None, None) => true,
                _ => false,
            }
        }
        let level_choices = ["a", "b", "+", "#"];
        let topic_choices = ["a", "b"];
        let mut filters: Vec<Vec<&str>> = vec![];
        let mut topics: Vec<Vec<&str>> = vec![];
        for d in 1..=3usize {
            let mut idx = vec![0usize; d];
            loop {
                filters.push(idx.iter().map(|&i| level_choices[i]).collect());
                let mut carry = true;
                for slot in idx.iter_mut() {
                    if carry {
                        *slot += 1;
                        if *slot == level_choices.len() {
                            *slot = 0;
                        } else {
                            carry = false;
                        }
                    }
                }
                if carry {
                    break;
                }
            }
            let mut idx = vec![0usize; d];
            loop {
                topics.push(idx.iter().map(|&i| topic_choices[i]).collect());
                let mut carry = true;
                for slot in idx.iter_mut() {
                    if carry {
                        *slot += 1;
                        if *slot == topic_choices.len() {
                            *slot = 0;
                        } else {
                            carry = false;
                        }
                    }
                }
                if carry {
                    break;
                }
            }
        }
        for f in &filters {
            let filter = f.join("/");
            if !filter_is_valid(&filter) {
                continue;
            }
            for t in &topics {
                let topic = t.join("/");
                assert_eq!(
                    topic_matches(&filter, &topic),
                    reference(f, t),
                    "filter {filter} topic {topic}"
                );
            }
        }
    }

    #[test]
    fn filter_validity() {
        assert!(filter_is_valid("a/+/c"));
        assert!(filter_is_valid("a/#"));
        assert!(filter_is_valid("#"));
        assert!(!filter_is_valid("a/#/c"));
        assert!(!filter_is_valid("a/b#"));
        assert!(!filter_is_valid("a/b+/c"));
        assert!(!filter_is_valid(""));
    }
}
