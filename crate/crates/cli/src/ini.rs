//! Minimal `[section]` / `key = value` reader with line tracking.
//!
//! Keys outside the caller's whitelist are reported as unknown, so no key
//! is silently ignored.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    /// `section.key`, or the bare key for top-level entries.
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug)]
pub struct Document {
    entries: BTreeMap<String, Entry>,
    sections: BTreeSet<String>,
    issues: RefCell<Vec<ConfigIssue>>,
}

fn path(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

impl Document {
    pub fn parse(text: &str) -> Self {
        let mut entries = BTreeMap::new();
        let mut sections = BTreeSet::new();
        let mut issues = Vec::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                match rest.strip_suffix(']') {
                    Some(name) if !name.trim().is_empty() => {
                        section = name.trim().to_string();
                        if !sections.insert(section.clone()) {
                            issues.push(ConfigIssue {
                                line: Some(line),
                                key: section.clone(),
                                message: "duplicate section".into(),
                            });
                        }
                    }
                    _ => issues.push(ConfigIssue {
                        line: Some(line),
                        key: content.to_string(),
                        message: "malformed section header".into(),
                    }),
                }
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                issues.push(ConfigIssue {
                    line: Some(line),
                    key: content.to_string(),
                    message: "expected `key = value`".into(),
                });
                continue;
            };
            let key = path(&section, key.trim());
            let entry = Entry { value: value.trim().to_string(), line };
            if let Some(first) = entries.get(&key) {
                let first: &Entry = first;
                issues.push(ConfigIssue {
                    line: Some(line),
                    key: key.clone(),
                    message: format!("duplicate key (first set on line {})", first.line),
                });
                continue;
            }
            entries.insert(key, entry);
        }
        Self {
            entries,
            sections,
            issues: RefCell::new(issues),
        }
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains(section)
    }

    pub fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    pub fn error(&self, key: &str, message: impl Into<String>) {
        self.issues.borrow_mut().push(ConfigIssue {
            line: self.line(key),
            key: key.to_string(),
            message: message.into(),
        });
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn required(&self, key: &str) -> Option<&str> {
        let v = self.raw(key);
        if v.is_none() {
            self.error(key, "missing required key");
        }
        v
    }

    fn convert<T>(&self, key: &str, what: &str, f: impl Fn(&str) -> Option<T>) -> Option<T> {
        let raw = self.raw(key)?;
        let v = f(raw);
        if v.is_none() {
            self.error(key, format!("expected {what}, found `{raw}`"));
        }
        v
    }

    pub fn f64(&self, key: &str) -> Option<f64> {
        self.convert(key, "a number", |s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
    }

    pub fn usize(&self, key: &str) -> Option<usize> {
        self.convert(key, "a nonnegative integer", |s| s.parse().ok())
    }

    pub fn u64(&self, key: &str) -> Option<u64> {
        self.convert(key, "a nonnegative integer", |s| s.parse().ok())
    }

    pub fn bool(&self, key: &str) -> Option<bool> {
        self.convert(key, "true or false", |s| s.parse().ok())
    }

    pub fn f64_list(&self, key: &str) -> Option<Vec<f64>> {
        self.convert(key, "a comma-separated list of numbers", |s| {
            s.split(',')
                .map(|x| x.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect()
        })
    }

    pub fn usize_list(&self, key: &str) -> Option<Vec<usize>> {
        self.convert(key, "a comma-separated list of integers", |s| {
            s.split(',').map(|x| x.trim().parse().ok()).collect()
        })
    }

    /// One of `choices`.
    pub fn choice<'a>(&self, key: &str, choices: &[&'a str]) -> Option<&'a str> {
        let raw = self.raw(key)?;
        let found = choices.iter().find(|c| **c == raw).copied();
        if found.is_none() {
            self.error(key, format!("expected one of {}, found `{raw}`", choices.join(", ")));
        }
        found
    }

    /// Reports every key outside `allowed`, then returns all issues.
    pub fn finish(self, allowed: &BTreeSet<String>) -> Vec<ConfigIssue> {
        let mut issues = self.issues.into_inner();
        for (key, entry) in &self.entries {
            if !allowed.contains(key) {
                issues.push(ConfigIssue {
                    line: Some(entry.line),
                    key: key.clone(),
                    message: "unknown key".into(),
                });
            }
        }
        issues.sort_by_key(|i| i.line.unwrap_or(usize::MAX));
        issues
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn allow(keys: &[&str]) -> BTreeSet<String> {
        keys.iter().map(|k| k.to_string()).collect()
    }

    #[test]
    fn sections_comments_and_duplicates() {
        let doc = Document::parse("a = 1 # note\n[s]\nb = x\nb = y\n\n[s]\nc\n");
        assert_eq!(doc.raw("a"), Some("1"));
        assert_eq!(doc.raw("s.b"), Some("x"));
        let issues = doc.finish(&allow(&["a", "s.b", "s.c"]));
        let text: Vec<String> = issues.iter().map(ToString::to_string).collect();
        assert_eq!(text.len(), 3, "{text:?}");
        assert!(text[0].starts_with("line 4: s.b: duplicate key (first set on line 3)"));
        assert!(text[1].contains("duplicate section"));
        assert!(text[2].contains("expected `key = value`"));
    }

    #[test]
    fn keys_outside_whitelist_are_unknown() {
        let doc = Document::parse("[m]\nx = 1\ny = 2\n");
        let issues = doc.finish(&allow(&["m.x"]));
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].key, "m.y");
        assert_eq!(issues[0].line, Some(3));
    }

    #[test]
    fn typed_lookups() {
        let doc = Document::parse("l = 1, 2.5 ,3\nn = -1\nb = true\n");
        assert_eq!(doc.f64_list("l"), Some(vec![1.0, 2.5, 3.0]));
        assert_eq!(doc.usize("n"), None);
        assert_eq!(doc.bool("b"), Some(true));
        let issues = doc.finish(&allow(&["l", "n", "b"]));
        assert_eq!(issues.len(), 1);
        assert!(issues[0].message.contains("nonnegative integer"));
    }
}
