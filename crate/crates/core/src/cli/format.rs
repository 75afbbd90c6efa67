//! Line-oriented `key = value` documents with `[section]` headers, `#`
//! comments and bracketed lists that may span lines.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

/// A `key = value` pair; `value` keeps the raw text, with line breaks for
/// lists continued over several lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub section: String,
    pub key: String,
    pub value: String,
    pub line: usize,
    /// Column where the value starts.
    pub column: usize,
}

/// A line without `=`, kept for sections that hold tables.
#[derive(Debug, Clone, PartialEq)]
pub struct BareLine {
    pub section: String,
    pub text: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    pub entries: Vec<Entry>,
    pub bare: Vec<BareLine>,
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("")
}

fn bracket_depth(s: &str) -> i64 {
    s.chars().fold(0, |d, c| match c {
        '[' => d + 1,
        ']' => d - 1,
        _ => d,
    })
}

impl Document {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut doc = Document::default();
        let mut section = String::new();
        let mut lines = text.lines().enumerate();
        while let Some((i, raw)) = lines.next() {
            let line_no = i + 1;
            let content = strip_comment(raw);
            let trimmed = content.trim();
            if trimmed.is_empty() {
                continue;
            }
            if trimmed.starts_with('[') && !trimmed.contains('=') {
                if !trimmed.ends_with(']') || trimmed.len() < 3 {
                    let col = raw.find('[').unwrap_or(0) + 1;
                    return Err(ParseError::new(line_no, col, "malformed section header"));
                }
                section = trimmed[1..trimmed.len() - 1].trim().to_string();
                continue;
            }
            let Some(eq) = content.find('=') else {
                doc.bare.push(BareLine {
                    section: section.clone(),
                    text: trimmed.to_string(),
                    line: line_no,
                });
                continue;
            };
            let key = content[..eq].trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                let col = content.len() - content.trim_start().len() + 1;
                return Err(ParseError::new(line_no, col, format!("invalid key '{key}'")));
            }
            let after = &content[eq + 1..];
            let column = eq + 2 + (after.len() - after.trim_start().len());
            let mut value = after.trim().to_string();
            let mut depth = bracket_depth(&value);
            while depth > 0 {
                let Some((_, next)) = lines.next() else {
                    return Err(ParseError::new(line_no, column, "unterminated list"));
                };
                let next = strip_comment(next).trim();
                depth += bracket_depth(next);
                value.push('\n');
                value.push_str(next);
            }
            if depth < 0 {
                return Err(ParseError::new(line_no, column, "unbalanced ']'"));
            }
            if value.is_empty() {
                return Err(ParseError::new(line_no, column, format!("missing value for '{key}'")));
            }
            if doc.entries.iter().any(|e| e.section == section && e.key == key) && section != "sources" {
                return Err(ParseError::new(line_no, 1, format!("duplicate key '{key}'")));
            }
            doc.entries.push(Entry {
                section: section.clone(),
                key: key.to_string(),
                value,
                line: line_no,
                column,
            });
        }
        Ok(doc)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.section == section && e.key == key)
    }

    pub fn all<'a>(&'a self, section: &'a str, key: &'a str) -> impl Iterator<Item = &'a Entry> + 'a {
        self.entries.iter().filter(move |e| e.section == section && e.key == key)
    }

    pub fn bare_in<'a>(&'a self, section: &'a str) -> impl Iterator<Item = &'a BareLine> + 'a {
        self.bare.iter().filter(move |b| b.section == section)
    }

    /// Rejects keys outside `allowed` (pairs of section and key) and bare
    /// lines outside `table_sections`.
    pub fn check_keys(&self, allowed: &[(&str, &str)], table_sections: &[&str]) -> Result<(), ParseError> {
        for e in &self.entries {
            if !allowed.iter().any(|&(s, k)| s == e.section && k == e.key) {
                let name = if e.section.is_empty() {
                    e.key.clone()
                } else {
                    format!("{}.{}", e.section, e.key)
                };
                return Err(ParseError::new(e.line, 1, format!("unknown key '{name}'")));
            }
        }
        if let Some(b) = self.bare.iter().find(|b| !table_sections.contains(&b.section.as_str())) {
            return Err(ParseError::new(b.line, 1, format!("expected 'key = value', found '{}'", b.text)));
        }
        Ok(())
    }
}

impl Entry {
    pub fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.line, self.column, message)
    }

    pub fn as_str(&self) -> &str {
        self.value.trim()
    }

    pub fn as_f64(&self) -> Result<f64, ParseError> {
        parse_f64(self.as_str()).ok_or_else(|| self.error(format!("expected a number, found '{}'", self.as_str())))
    }

    pub fn as_usize(&self) -> Result<usize, ParseError> {
        self.as_str()
            .parse()
            .map_err(|_| self.error(format!("expected a non-negative integer, found '{}'", self.as_str())))
    }

    pub fn as_u64(&self) -> Result<u64, ParseError> {
        self.as_str()
            .parse()
            .map_err(|_| self.error(format!("expected a non-negative integer, found '{}'", self.as_str())))
    }

    pub fn as_bool(&self) -> Result<bool, ParseError> {
        match self.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            v => Err(self.error(format!("expected true or false, found '{v}'"))),
        }
    }

    fn list_items(&self) -> Result<Vec<String>, ParseError> {
        let v = self.as_str();
        if !(v.starts_with('[') && v.ends_with(']')) {
            return Err(self.error("expected a bracketed list"));
        }
        Ok(v[1..v.len() - 1]
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect())
    }

    /// Numbers, with `start:step:stop` items expanded inclusively.
    pub fn as_f64_list(&self) -> Result<Vec<f64>, ParseError> {
        let mut out = vec![];
        for item in self.list_items()? {
            if item.contains(':') {
                let parts: Vec<Option<f64>> = item.split(':').map(parse_f64).collect();
                let [Some(a), Some(step), Some(b)] = parts[..] else {
                    return Err(self.error(format!("bad range '{item}', expected start:step:stop")));
                };
                if !(step > 0.0) || b < a {
                    return Err(self.error(format!("bad range '{item}'")));
                }
                let n = ((b - a) / step + 1e-9).floor() as usize;
                // integer multiples keep grid points free of accumulated drift
                out.extend((0..=n).map(|i| a + i as f64 * step));
            } else {
                out.push(parse_f64(&item).ok_or_else(|| self.error(format!("expected a number, found '{item}'")))?);
            }
        }
        Ok(out)
    }

    pub fn as_usize_list(&self) -> Result<Vec<usize>, ParseError> {
        self.list_items()?
            .iter()
            .map(|s| {
                s.parse()
                    .map_err(|_| self.error(format!("expected a non-negative integer, found '{s}'")))
            })
            .collect()
    }

    pub fn as_triple_usize(&self) -> Result<[usize; 3], ParseError> {
        let v = self.as_usize_list()?;
        v.try_into()
            .map_err(|_| self.error("expected exactly three integers"))
    }

    pub fn as_triple_f64(&self) -> Result<[f64; 3], ParseError> {
        let v = self.as_f64_list()?;
        v.try_into().map_err(|_| self.error("expected exactly three numbers"))
    }

    /// Integer triples, written one per line or as bracketed groups.
    pub fn as_triples(&self) -> Result<Vec<([usize; 3], usize)>, ParseError> {
        let v = self.as_str();
        if !(v.starts_with('[') && v.ends_with(']')) {
            return Err(self.error("expected a bracketed list of triples"));
        }
        let inner = &v[1..v.len() - 1];
        let groups: Vec<(String, usize)> = if inner.contains('[') {
            inner
                .split(']')
                .filter_map(|g| {
                    let g = g.trim_start_matches(|c: char| c == ',' || c.is_whitespace());
                    g.strip_prefix('[').map(|s| s.to_string())
                })
                .map(|g| (g, self.line))
                .collect()
        } else {
            inner
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| (l.to_string(), self.line + i))
                .collect()
        };
        groups
            .into_iter()
            .map(|(g, line)| {
                let nums: Result<Vec<usize>, _> = g
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect();
                match nums {
                    Ok(n) if n.len() == 3 => Ok(([n[0], n[1], n[2]], line)),
                    _ => Err(ParseError::new(line, 1, format!("expected three integers, found '{}'", g.trim()))),
                }
            })
            .collect()
    }
}

pub fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Splits a table row on commas and whitespace into numbers.
pub fn parse_row(line: &BareLine, expected: usize) -> Result<Vec<f64>, ParseError> {
    let vals: Option<Vec<f64>> = line
        .text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(parse_f64)
        .collect();
    match vals {
        Some(v) if v.len() == expected => Ok(v),
        _ => Err(ParseError::new(
            line.line,
            1,
            format!("expected {expected} numbers, found '{}'", line.text),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_lists_and_comments() {
        let doc = Document::parse(
            "# header\nvirtual_dims = [1, 3, 6]  # trailing\nspacing=[0.5,0.5,0.5]\n\n[sweep]\nk = [\n 1, 2\n 3\n]\ntau = [0.9:0.005:0.92]\n[table]\n1, 2, 3\n",
        )
        .unwrap();
        assert_eq!(doc.get("", "virtual_dims").unwrap().as_triple_usize().unwrap(), [1, 3, 6]);
        assert_eq!(doc.get("sweep", "k").unwrap().as_usize_list().unwrap(), vec![1, 2, 3]);
        let taus = doc.get("sweep", "tau").unwrap().as_f64_list().unwrap();
        assert_eq!(taus.len(), 5);
        assert!((taus[4] - 0.92).abs() < 1e-15);
        assert_eq!(doc.bare_in("table").count(), 1);
        assert!(doc.check_keys(&[("", "virtual_dims"), ("", "spacing"), ("sweep", "k"), ("sweep", "tau")], &["table"]).is_ok());
        assert!(doc.check_keys(&[("", "spacing")], &["table"]).is_err());
    }

    #[test]
    fn triples_in_both_layouts() {
        let doc = Document::parse("a = [\n 1 1 1\n 1, 2, 3\n]\nb = [[1,1,2],[2,1,1]]\n").unwrap();
        let a = doc.get("", "a").unwrap().as_triples().unwrap();
        assert_eq!(a, vec![([1, 1, 1], 2), ([1, 2, 3], 3)]);
        let b = doc.get("", "b").unwrap().as_triples().unwrap();
        assert_eq!(b.iter().map(|t| t.0).collect::<Vec<_>>(), vec![[1, 1, 2], [2, 1, 1]]);
    }

    #[test]
    fn errors_carry_positions() {
        let e = Document::parse("x = 1\n  bad key = 2\n").unwrap_err();
        assert_eq!((e.line, e.column), (2, 3));
        let e = Document::parse("x = [1,\n2\n").unwrap_err();
        assert_eq!(e.line, 1);
        let doc = Document::parse("n = abc\n").unwrap();
        let e = doc.get("", "n").unwrap().as_usize().unwrap_err();
        assert_eq!((e.line, e.column), (1, 5));
        let e = Document::parse("x = 1\nx = 2\n").unwrap_err();
        assert_eq!(e.line, 2);
    }
}
