//! Constraint files and shorthand equations.
//!
//! Matrix form: one row of `B` per line (whitespace-separated reals), a line
//! `---`, then the entries of `b`. A file holding only `---` (or nothing)
//! is the empty constraint, `P = I`.
//!
//! ```text
//! 0 1 1 1
//! ---
//! 0
//! ```
//!
//! Shorthand form: linear equations in parameter names, separated by new
//! lines, `,` or `;`:
//!
//! ```text
//! V2 + V3 + V4 = 0
//! 2*V1 - 0.5 V3 = 1
//! V1 = V5 = V9 = 0
//! ```
//!
//! A chain `e₁ = e₂ = … = e_k` contributes the rows `e_i − e_k = 0`. Names
//! resolve against the feature names first, then as `V<i>` for the `i`-th
//! parameter (1-based). Lines starting with `#` are comments.

use std::path::Path;

use psgd_core::{Constraint, Matrix};

use crate::error::{CliError, Result};

/// Parsed rows of `B` and `b`, before the projection is built.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    /// Text of the equations, for reports. Empty for the matrix form.
    pub source: String,
}

impl ConstraintSpec {
    pub fn none() -> Self {
        Self {
            rows: Vec::new(),
            rhs: Vec::new(),
            source: "none".to_string(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Builds the constraint for parameter dimension `p`.
    pub fn build(&self, p: usize) -> Result<Constraint> {
        if self.rows.is_empty() {
            return Ok(Constraint::unconstrained(p));
        }
        let matrix = Matrix::from_rows(&self.rows)?;
        Constraint::new(matrix, self.rhs.clone()).map_err(|e| match e {
            psgd_core::Error::Infeasible { residual } => CliError::input(format!(
                "constraint '{}' has no solution (residual {residual:e})",
                self.source
            )),
            other => other.into(),
        })
    }

    /// Resolves a `--constraint` argument: `none`, a file path, or inline
    /// shorthand equations.
    pub fn from_arg(arg: &str, names: &[String]) -> Result<Self> {
        let trimmed = arg.trim();
        if trimmed.eq_ignore_ascii_case("none") {
            return Ok(Self::none());
        }
        let path = Path::new(trimmed);
        if path.is_file() {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            return Self::parse(&text, names)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())));
        }
        if trimmed.contains('=') {
            return Self::parse_shorthand(trimmed, names);
        }
        Err(CliError::usage(format!(
            "--constraint '{arg}' is neither 'none', an existing file, nor an equation"
        )))
    }

    /// Parses file content in either form.
    pub fn parse(text: &str, names: &[String]) -> Result<Self> {
        let body: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        if body.iter().any(|l| l.contains('=')) {
            Self::parse_shorthand(&body.join("\n"), names)
        } else {
            Self::parse_matrix(&body, names.len())
        }
    }

    fn parse_matrix(lines: &[&str], p: usize) -> Result<Self> {
        let number = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::input(format!("cannot read '{s}' as a number")))
        };
        let split = lines.iter().position(|l| *l == "---");
        let (b_lines, rhs_lines) = match split {
            Some(i) => (&lines[..i], &lines[i + 1..]),
            None if lines.is_empty() => (lines, lines),
            None => {
                return Err(CliError::input(
                    "matrix constraint needs a '---' line between B and b",
                ))
            }
        };
        let mut rows = Vec::new();
        for (i, line) in b_lines.iter().enumerate() {
            let row = line.split_whitespace().map(number).collect::<Result<Vec<_>>>()?;
            if row.len() != p {
                return Err(CliError::input(format!(
                    "row {} of B has {} entries, expected {p}",
                    i + 1,
                    row.len()
                )));
            }
            rows.push(row);
        }
        let rhs = rhs_lines
            .iter()
            .flat_map(|l| l.split_whitespace())
            .map(number)
            .collect::<Result<Vec<_>>>()?;
        if rhs.len() != rows.len() {
            return Err(CliError::input(format!(
                "B has {} rows but b has {} entries",
                rows.len(),
                rhs.len()
            )));
        }
        Ok(Self {
            rows,
            rhs,
            source: String::new(),
        })
    }

    /// Parses shorthand equations separated by new lines, `,` or `;`.
    pub fn parse_shorthand(text: &str, names: &[String]) -> Result<Self> {
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        let mut shown = Vec::new();
        for eq in text.split(['\n', ',', ';']).map(str::trim) {
            if eq.is_empty() || eq.starts_with('#') {
                continue;
            }
            let sides = eq
                .split('=')
                .map(|s| parse_expr(s, names))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| CliError::input(format!("in '{eq}': {e}")))?;
            if sides.len() < 2 {
                return Err(CliError::input(format!("'{eq}' is not an equation")));
            }
            let (last_coefs, last_const) = sides.last().expect("at least two sides");
            for (coefs, constant) in &sides[..sides.len() - 1] {
                let row: Vec<f64> = coefs.iter().zip(last_coefs).map(|(a, b)| a - b).collect();
                if row.iter().all(|v| *v == 0.0) {
                    return Err(CliError::input(format!(
                        "'{eq}' does not involve any parameter"
                    )));
                }
                rows.push(row);
                rhs.push(last_const - constant);
            }
            shown.push(eq.split_whitespace().collect::<String>());
        }
        if rows.is_empty() {
            return Err(CliError::input("no equations found"));
        }
        Ok(Self {
            rows,
            rhs,
            source: shown.join(", "),
        })
    }
}

fn resolve_name(name: &str, names: &[String]) -> Result<usize> {
    if let Some(i) = names.iter().position(|n| n == name) {
        return Ok(i);
    }
    if let Some(i) = name
        .strip_prefix('V')
        .and_then(|d| d.parse::<usize>().ok())
        .filter(|&i| i >= 1 && i <= names.len())
    {
        return Ok(i - 1);
    }
    Err(CliError::input(format!(
        "unknown parameter '{name}'; known names are {} (or V1..V{})",
        names.join(", "),
        names.len()
    )))
}

/// A linear expression `Σ aᵢθᵢ + c` as coefficients and constant.
fn parse_expr(s: &str, names: &[String]) -> Result<(Vec<f64>, f64)> {
    let chars: Vec<char> = s.chars().collect();
    let mut coefs = vec![0.0; names.len()];
    let mut constant = 0.0;
    let mut i = 0;
    let skip_ws = |i: &mut usize| {
        while *i < chars.len() && chars[*i].is_whitespace() {
            *i += 1;
        }
    };
    let mut first = true;
    loop {
        skip_ws(&mut i);
        if i == chars.len() {
            if first {
                return Err(CliError::input("empty side"));
            }
            break;
        }
        let mut sign = 1.0;
        if chars[i] == '+' || chars[i] == '-' {
            if chars[i] == '-' {
                sign = -1.0;
            }
            i += 1;
            skip_ws(&mut i);
        } else if !first {
            return Err(CliError::input(format!(
                "expected '+' or '-' before '{}'",
                chars[i..].iter().collect::<String>()
            )));
        }
        first = false;

        let start = i;
        while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
            i += 1;
        }
        // exponent only when followed by a digit, so `2e1` is a number but
        // `2eta` is 2 times `eta`
        if i > start && i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
            let mut j = i + 1;
            if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                j += 1;
            }
            if j < chars.len() && chars[j].is_ascii_digit() {
                i = j;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
        }
        let number = if i > start {
            let text: String = chars[start..i].iter().collect();
            Some(
                text.parse::<f64>()
                    .map_err(|_| CliError::input(format!("bad number '{text}'")))?,
            )
        } else {
            None
        };
        skip_ws(&mut i);
        let mut had_star = false;
        if i < chars.len() && chars[i] == '*' {
            if number.is_none() {
                return Err(CliError::input("'*' without a coefficient"));
            }
            had_star = true;
            i += 1;
            skip_ws(&mut i);
        }
        let name_start = i;
        while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
            if i == name_start && chars[i].is_ascii_digit() {
                break;
            }
            i += 1;
        }
        let coef = sign * number.unwrap_or(1.0);
        if i > name_start {
            let name: String = chars[name_start..i].iter().collect();
            coefs[resolve_name(&name, names)?] += coef;
        } else if had_star || number.is_none() {
            return Err(CliError::input("expected a parameter name"));
        } else {
            constant += coef;
        }
    }
    Ok((coefs, constant))
}
