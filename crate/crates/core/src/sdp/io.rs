//! Plain-text interchange for conic programs, plus an SDPA sparse writer.
//!
//! ```text
//! kind = sdp
//! m = 1
//! blocks = psd:2
//! [b]
//! 1
//! [entries]
//! # mat block row col value   (mat 0 is C, mat k is A_k; 1-based)
//! 0 1 1 1 1
//! 0 1 2 2 2
//! 1 1 1 2 -1
//! ```

use std::fmt::Write;

use super::{Block, BlockKind, BlockSparse, ConicProgram};
use crate::parse::ParseError;
use crate::textfile::{fmt_num, tokens, SectionFile};

fn parse_f64(tok: &str, line: usize, col: usize) -> Result<f64, ParseError> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ParseError::new(
            line,
            col,
            format!("expected a finite number, found `{tok}`"),
        )),
    }
}

fn parse_usize(tok: &str, line: usize, col: usize) -> Result<usize, ParseError> {
    tok.parse::<usize>().map_err(|_| {
        ParseError::new(
            line,
            col,
            format!("expected a natural number, found `{tok}`"),
        )
    })
}

/// Parse the `blocks = psd:2 nonneg:3` header value.
pub(crate) fn parse_blocks(line: &crate::textfile::Line) -> Result<Vec<Block>, ParseError> {
    let mut blocks = Vec::new();
    for (col, tok) in tokens(line) {
        let (kind, size) = tok
            .split_once(':')
            .ok_or_else(|| ParseError::new(line.number, col, "block must look like `psd:3`"))?;
        let kind = BlockKind::from_name(kind).ok_or_else(|| {
            ParseError::new(line.number, col, format!("unknown block kind `{kind}`"))
        })?;
        let size = parse_usize(size, line.number, col + tok.find(':').unwrap_or(0) + 1)?;
        if size == 0 {
            return Err(ParseError::new(
                line.number,
                col,
                "block size must be positive",
            ));
        }
        blocks.push(Block { kind, size });
    }
    if blocks.is_empty() {
        return Err(ParseError::new(line.number, line.col, "no blocks declared"));
    }
    Ok(blocks)
}

/// Parse a program in the `kind = sdp` format.
pub fn read_program_text(text: &str) -> Result<ConicProgram, ParseError> {
    let f = SectionFile::parse(text)?;
    f.check_known(&["kind", "m", "blocks"], &["b", "entries"])?;
    let kind = f.require("kind")?;
    if kind.text != "sdp" {
        return Err(kind.error(format!("expected `kind = sdp`, found `{}`", kind.text)));
    }
    let mline = f.require("m")?;
    let m = parse_usize(&mline.text, mline.number, mline.col)?;
    let blocks = parse_blocks(f.require("blocks")?)?;

    let mut b = Vec::new();
    if let Some(sec) = f.section("b") {
        for line in &sec.lines {
            for (col, tok) in tokens(line) {
                b.push(parse_f64(tok, line.number, col)?);
            }
        }
    }
    if b.len() != m {
        let at = f.section("b").map_or(mline.number, |s| s.line);
        return Err(ParseError::new(
            at,
            1,
            format!("expected {m} values in [b], found {}", b.len()),
        ));
    }

    let mut p = ConicProgram::new(blocks);
    let mut mats = vec![BlockSparse::new(); m + 1];
    if let Some(sec) = f.section("entries") {
        for line in &sec.lines {
            let t = tokens(line);
            if t.len() != 5 {
                return Err(line.error("entry lines need `mat block row col value`"));
            }
            let mat = parse_usize(t[0].1, line.number, t[0].0)?;
            let blk = parse_usize(t[1].1, line.number, t[1].0)?;
            let row = parse_usize(t[2].1, line.number, t[2].0)?;
            let col = parse_usize(t[3].1, line.number, t[3].0)?;
            let val = parse_f64(t[4].1, line.number, t[4].0)?;
            if mat > m {
                return Err(ParseError::new(
                    line.number,
                    t[0].0,
                    format!("matrix index {mat} exceeds m = {m}"),
                ));
            }
            let Some(bl) = p.blocks.get(blk.wrapping_sub(1)) else {
                return Err(ParseError::new(
                    line.number,
                    t[1].0,
                    format!("no block {blk}"),
                ));
            };
            if row == 0 || col == 0 || row > bl.size || col > bl.size {
                return Err(ParseError::new(
                    line.number,
                    t[2].0,
                    format!("({row}, {col}) is outside block {blk}"),
                ));
            }
            if bl.kind != BlockKind::Psd && row != col {
                return Err(ParseError::new(
                    line.number,
                    t[2].0,
                    "vector blocks only take diagonal entries",
                ));
            }
            mats[mat].push(blk - 1, row - 1, col - 1, val);
        }
    }
    let mut it = mats.into_iter();
    p.c = it.next().unwrap_or_default();
    for (a, bk) in it.zip(b) {
        p.add_constraint(a, bk);
    }
    p.validate()
        .map_err(|e| ParseError::new(1, 1, e.to_string()))?;
    Ok(p)
}

pub fn read_program(path: &std::path::Path) -> Result<ConicProgram, crate::Error> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
    Ok(read_program_text(&text)?)
}

fn write_entries(out: &mut String, mat: usize, m: &BlockSparse) {
    let mut m = m.clone();
    m.canonicalize();
    for e in &m.entries {
        let _ = writeln!(
            out,
            "{mat} {} {} {} {}",
            e.block + 1,
            e.row + 1,
            e.col + 1,
            fmt_num(e.value)
        );
    }
}

/// Serialize in the format accepted by [`read_program_text`].
pub fn write_program(p: &ConicProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "kind = sdp");
    let _ = writeln!(out, "m = {}", p.m());
    let blocks: Vec<String> = p
        .blocks
        .iter()
        .map(|b| format!("{}:{}", b.kind.name(), b.size))
        .collect();
    let _ = writeln!(out, "blocks = {}", blocks.join(" "));
    let _ = writeln!(out, "[b]");
    for v in &p.b {
        let _ = writeln!(out, "{}", fmt_num(*v));
    }
    let _ = writeln!(out, "[entries]");
    write_entries(&mut out, 0, &p.c);
    for (k, a) in p.a.iter().enumerate() {
        write_entries(&mut out, k + 1, a);
    }
    out
}

/// SDPA sparse format (`.dat-s`). SDPA solves `min c'x s.t. sum F_i x_i - F_0 >= 0`,
/// so `x = y`, `c = -b`, `F_0 = -C`, `F_k = -A_k`. A zero block of size `s`
/// becomes a diagonal block of size `2s` holding both signs.
pub fn write_sdpa(p: &ConicProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", p.m());
    let _ = writeln!(out, "{}", p.blocks.len());
    let sizes: Vec<String> = p
        .blocks
        .iter()
        .map(|b| match b.kind {
            BlockKind::Psd => b.size.to_string(),
            BlockKind::Nonneg => format!("-{}", b.size),
            BlockKind::Zero => format!("-{}", 2 * b.size),
        })
        .collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let c: Vec<String> = p.b.iter().map(|v| fmt_num(-v)).collect();
    let _ = writeln!(out, "{}", c.join(" "));
    let mut emit = |mat: usize, m: &BlockSparse| {
        let mut m = m.clone();
        m.canonicalize();
        for e in &m.entries {
            let v = -e.value;
            let _ = writeln!(
                out,
                "{mat} {} {} {} {}",
                e.block + 1,
                e.row + 1,
                e.col + 1,
                fmt_num(v)
            );
            if p.blocks[e.block].kind == BlockKind::Zero {
                let s = p.blocks[e.block].size;
                let i = e.row + s + 1;
                let _ = writeln!(out, "{mat} {} {i} {i} {}", e.block + 1, fmt_num(-v));
            }
        }
    };
    emit(0, &p.c);
    for (k, a) in p.a.iter().enumerate() {
        emit(k + 1, a);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const IRRAT1: &str =
        "kind = sdp\nm = 1\nblocks = psd:2\n[b]\n1\n[entries]\n0 1 1 1 1\n0 1 2 2 2\n1 1 1 2 -1\n";

    #[test]
    fn parse_and_round_trip() {
        let p = read_program_text(IRRAT1).unwrap();
        assert_eq!(p.m(), 1);
        assert_eq!(
            p.blocks,
            vec![Block {
                kind: BlockKind::Psd,
                size: 2
            }]
        );
        assert_eq!(p.c.entries.len(), 2);
        let text = write_program(&p);
        assert_eq!(read_program_text(&text).unwrap(), p);
        assert_eq!(write_program(&read_program_text(&text).unwrap()), text);
    }

    #[test]
    fn lower_triangle_entries_are_mirrored() {
        let p = read_program_text(&IRRAT1.replace("1 1 1 2 -1", "1 1 2 1 -1")).unwrap();
        assert_eq!((p.a[0].entries[0].row, p.a[0].entries[0].col), (0, 1));
    }

    #[test]
    fn parse_errors_name_position() {
        let e = read_program_text(&IRRAT1.replace("1 1 1 2 -1", "1 1 1 3 -1")).unwrap_err();
        assert_eq!(e.line, 9);
        let e = read_program_text(&IRRAT1.replace("psd:2", "cone:2")).unwrap_err();
        assert_eq!((e.line, e.col), (3, 10));
        let e = read_program_text(&IRRAT1.replace("[b]\n1\n", "[b]\n")).unwrap_err();
        assert!(e.msg.contains("expected 1 values"));
    }

    #[test]
    fn sdpa_layout() {
        let mut p = read_program_text(IRRAT1).unwrap();
        p.blocks.push(Block {
            kind: BlockKind::Zero,
            size: 1,
        });
        p.c.push(1, 0, 0, 3.0);
        let s = write_sdpa(&p);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0..4], ["1", "2", "2 -2", "-1"]);
        assert!(lines.contains(&"0 2 1 1 -3"));
        assert!(lines.contains(&"0 2 2 2 3"));
        assert!(lines.contains(&"1 1 1 2 1"));
    }
}
