//! SDPA sparse format (`.dat-s`).
//!
//! The primal form is `min c'x  s.t.  X = sum_i x_i F_i - F_0 >= 0`, where a
//! negative block size denotes a diagonal block.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// One nonzero of `F_mat`, upper triangle, indices 1-based as in the file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpaEntry {
    pub mat: usize,
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub block_struct: Vec<i64>,
    pub c: Vec<f64>,
    pub entries: Vec<SdpaEntry>,
}

impl SdpProblem {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn block_size(&self, block: usize) -> usize {
        self.block_struct[block - 1].unsigned_abs() as usize
    }

    pub fn is_diagonal(&self, block: usize) -> bool {
        self.block_struct[block - 1] < 0
    }

    /// Checks index ranges, triangle order, and diagonal-block shape.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Sdpa { line: 0, msg });
        if self.block_struct.iter().any(|&b| b == 0) {
            return bad("zero block size".into());
        }
        for e in &self.entries {
            if e.mat > self.num_vars() {
                return bad(format!(
                    "matrix index {} exceeds {}",
                    e.mat,
                    self.num_vars()
                ));
            }
            if e.block == 0 || e.block > self.block_struct.len() {
                return bad(format!("block index {} out of range", e.block));
            }
            let size = self.block_size(e.block);
            if e.i == 0 || e.j == 0 || e.i > size || e.j > size || e.i > e.j {
                return bad(format!(
                    "entry ({}, {}) invalid for block {}",
                    e.i, e.j, e.block
                ));
            }
            if self.is_diagonal(e.block) && e.i != e.j {
                return bad(format!("off-diagonal entry in diagonal block {}", e.block));
            }
            if !e.value.is_finite() {
                return bad("non-finite entry".into());
            }
        }
        Ok(())
    }

    pub fn to_sdpa_string(&self) -> String {
        let mut out = String::new();
        out.push_str("\"interval observer gain synthesis\"\n");
        writeln!(out, "{}", self.num_vars()).unwrap();
        writeln!(out, "{}", self.block_struct.len()).unwrap();
        let blocks: Vec<String> = self.block_struct.iter().map(|b| b.to_string()).collect();
        writeln!(out, "{}", blocks.join(" ")).unwrap();
        let c: Vec<String> = self.c.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", c.join(" ")).unwrap();
        for e in &self.entries {
            writeln!(out, "{} {} {} {} {:e}", e.mat, e.block, e.i, e.j, e.value).unwrap();
        }
        out
    }

    pub fn from_sdpa_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Sdpa {
                line: 0,
                msg: format!("missing {what}"),
            })
        };
        let (ln, m_line) = next("number of variables")?;
        let m: usize = parse_tok(first_tok(m_line), ln)?;
        let (ln, nb_line) = next("number of blocks")?;
        let nblocks: usize = parse_tok(first_tok(nb_line), ln)?;
        let (ln, bs_line) = next("block structure")?;
        let block_struct: Vec<i64> = tokens(bs_line)
            .take(nblocks)
            .map(|t| parse_tok(t, ln))
            .collect::<Result<_>>()?;
        if block_struct.len() != nblocks {
            return Err(Error::Sdpa {
                line: ln,
                msg: format!("expected {nblocks} block sizes"),
            });
        }
        let (ln, c_line) = next("objective vector")?;
        let c: Vec<f64> = tokens(c_line)
            .take(m)
            .map(|t| parse_tok(t, ln))
            .collect::<Result<_>>()?;
        if c.len() != m {
            return Err(Error::Sdpa {
                line: ln,
                msg: format!("expected {m} objective entries"),
            });
        }
        let mut entries = Vec::new();
        for (ln, line) in lines {
            let toks: Vec<&str> = tokens(line).collect();
            if toks.len() < 5 {
                return Err(Error::Sdpa {
                    line: ln,
                    msg: "entry needs five fields".into(),
                });
            }
            entries.push(SdpaEntry {
                mat: parse_tok(toks[0], ln)?,
                block: parse_tok(toks[1], ln)?,
                i: parse_tok(toks[2], ln)?,
                j: parse_tok(toks[3], ln)?,
                value: parse_tok(toks[4], ln)?,
            });
        }
        let problem = Self {
            block_struct,
            c,
            entries,
        };
        problem.validate()?;
        Ok(problem)
    }
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|ch: char| ch.is_whitespace() || matches!(ch, ',' | '{' | '}' | '(' | ')'))
        .filter(|t| !t.is_empty())
}

fn first_tok(line: &str) -> &str {
    tokens(line).next().unwrap_or("")
}

fn parse_tok<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::Sdpa {
        line,
        msg: format!("cannot parse `{tok}`"),
    })
}

/// Reads the primal vector from an SDPA result file (`xVec` section) or from
/// a bare whitespace/comma separated list of numbers.
pub fn parse_solution_vector(text: &str, expected: usize) -> Result<Vec<f64>> {
    let body = match text.find("xVec") {
        Some(pos) => {
            let rest = &text[pos..];
            let open = rest.find('{').ok_or_else(|| Error::Sdpa {
                line: 0,
                msg: "xVec without `{`".into(),
            })?;
            let close = rest[open..].find('}').ok_or_else(|| Error::Sdpa {
                line: 0,
                msg: "xVec without `}`".into(),
            })?;
            &rest[open + 1..open + close]
        }
        None => text,
    };
    let x: Vec<f64> = tokens(body)
        .map(|t| parse_tok(t, 0))
        .collect::<Result<_>>()?;
    if x.len() != expected {
        return Err(Error::Sdpa {
            line: 0,
            msg: format!("solution has {} entries, expected {expected}", x.len()),
        });
    }
    Ok(x)
}
