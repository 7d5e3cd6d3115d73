//! The sectioned text layout shared by every problem file:
//!
//! ```text
//! # comment
//! kind = pop
//! vars = x1 x2
//! [objective]
//! x1 + x2
//! ```
//!
//! `key = value` header lines come first, then `[name]` sections holding raw
//! lines. Comments start with `#`; blank lines are ignored.

use crate::parse::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub number: usize,
    /// 1-based column of the first character of `text` in the source line
    pub col: usize,
    pub text: String,
}

impl Line {
    pub fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(self.number, self.col, msg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub lines: Vec<Line>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SectionFile {
    pub header: Vec<(String, Line)>,
    pub sections: Vec<Section>,
}

fn strip(raw: &str) -> (usize, &str) {
    let body = raw.split('#').next().unwrap_or("");
    let trimmed_start = body.trim_start();
    let col = body.len() - trimmed_start.len() + 1;
    (col, trimmed_start.trim_end())
}

impl SectionFile {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut out = SectionFile::default();
        for (i, raw) in text.lines().enumerate() {
            let number = i + 1;
            let (col, body) = strip(raw);
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ParseError::new(number, col, "unterminated section header"))?
                    .trim();
                if name.is_empty() {
                    return Err(ParseError::new(number, col, "empty section name"));
                }
                out.sections.push(Section {
                    name: name.to_string(),
                    line: number,
                    lines: Vec::new(),
                });
                continue;
            }
            match out.sections.last_mut() {
                Some(sec) => sec.lines.push(Line {
                    number,
                    col,
                    text: body.to_string(),
                }),
                None => {
                    let eq = body.find('=').ok_or_else(|| {
                        ParseError::new(
                            number,
                            col,
                            "expected `key = value` before the first section",
                        )
                    })?;
                    let key = body[..eq].trim().to_string();
                    let value = body[eq + 1..].trim_start();
                    let vcol = col + body.len() - value.len();
                    if key.is_empty() {
                        return Err(ParseError::new(number, col, "missing key"));
                    }
                    if out.header.iter().any(|(k, _)| *k == key) {
                        return Err(ParseError::new(
                            number,
                            col,
                            format!("duplicate key `{key}`"),
                        ));
                    }
                    out.header.push((
                        key,
                        Line {
                            number,
                            col: vcol,
                            text: value.to_string(),
                        },
                    ));
                }
            }
        }
        Ok(out)
    }

    pub fn get(&self, key: &str) -> Option<&Line> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn require(&self, key: &str) -> Result<&Line, ParseError> {
        self.get(key)
            .ok_or_else(|| ParseError::new(1, 1, format!("missing header key `{key}`")))
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// Reject header keys and section names outside the allowed lists.
    pub fn check_known(&self, keys: &[&str], sections: &[&str]) -> Result<(), ParseError> {
        for (k, line) in &self.header {
            if !keys.contains(&k.as_str()) {
                return Err(ParseError::new(
                    line.number,
                    1,
                    format!("unknown header key `{k}`"),
                ));
            }
        }
        let mut seen: Vec<&str> = Vec::new();
        for s in &self.sections {
            if !sections.contains(&s.name.as_str()) {
                return Err(ParseError::new(
                    s.line,
                    1,
                    format!("unknown section `[{}]`", s.name),
                ));
            }
            if seen.contains(&s.name.as_str()) {
                return Err(ParseError::new(
                    s.line,
                    1,
                    format!("duplicate section `[{}]`", s.name),
                ));
            }
            seen.push(&s.name);
        }
        Ok(())
    }
}

/// Split `text` on whitespace, keeping the column of every token.
pub fn tokens(line: &Line) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.text.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((line.col + s, &line.text[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((line.col + s, &line.text[s..]));
    }
    out
}

/// Format a float with 12 significant digits, `%.12g` style.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let exp = v.abs().log10().floor() as i32;
    let s = if !(-5..12).contains(&exp) {
        let s = format!("{:.11e}", v);
        let (mant, e) = s.split_once('e').unwrap_or((&s, "0"));
        let mant = trim_zeros(mant);
        let e: i32 = e.parse().unwrap_or(0);
        format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
    } else {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_sections() {
        let f = SectionFile::parse(
            "kind = pop  # c\n\nvars = x1 x2\n[objective]\n  x1 + x2\n[constraints]\n",
        )
        .unwrap();
        assert_eq!(f.get("kind").unwrap().text, "pop");
        assert_eq!(f.get("vars").unwrap().text, "x1 x2");
        let obj = f.section("objective").unwrap();
        assert_eq!(obj.lines.len(), 1);
        assert_eq!((obj.lines[0].number, obj.lines[0].col), (5, 3));
        assert!(f.section("constraints").unwrap().lines.is_empty());
    }

    #[test]
    fn errors_carry_positions() {
        let e = SectionFile::parse("kind = pop\noops\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = SectionFile::parse("[objective\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = SectionFile::parse("a = 1\na = 2\n").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn token_columns() {
        let f = SectionFile::parse("[s]\n  ab  cd\n").unwrap();
        let t = tokens(&f.sections[0].lines[0]);
        assert_eq!(t, vec![(3, "ab"), (7, "cd")]);
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(2f64.sqrt()), "1.41421356237");
        assert_eq!(fmt_num(-0.5), "-0.5");
        assert_eq!(fmt_num(1e-7), "1e-07");
        assert_eq!(fmt_num(123456789012345.0), "1.23456789012e+14");
        assert_eq!(fmt_num(0.375), "0.375");
    }
}
