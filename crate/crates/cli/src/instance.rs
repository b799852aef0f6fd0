//! Plain-text instance files for affine inclusion problems.
//!
//! An instance lists m affine operators w -> M w + c on a shared space and
//! feeds the multi-operator solver directly. The format is line-oriented:
//!
//! ```text
//! # anything after a hash is a comment
//! dim 2
//! operators 2
//!
//! operator
//! sigma 0.5
//! matrix
//! 2 0
//! 0 2
//! offset
//! 1 -1
//!
//! operator
//! matrix
//! 1 0
//! 0 1
//! ```
//!
//! `dim` and `operators` come first, in either order. Each `operator` block
//! needs a `matrix` (dim x dim numbers, row-major); `sigma` (a comonotonicity
//! modulus) and `offset` (dim numbers, default zero) are optional. Numbers
//! may be split across lines however the author likes.

use std::path::Path;

use opsplit::operators::ResolventOp;
use opsplit::{Matrix, Vector};

use crate::{CliError, CliResult};

/// One affine block: the map w -> matrix * w + offset.
#[derive(Debug, Clone)]
pub struct AffineBlock {
    pub matrix: Matrix,
    pub offset: Vector,
    pub sigma: Option<f64>,
}

/// A parsed instance: m affine operators on a dim-dimensional space.
#[derive(Debug, Clone)]
pub struct AffineInstance {
    pub dim: usize,
    pub operators: Vec<AffineBlock>,
}

/// A token tagged with its 1-based source line for error messages.
struct Tokens {
    items: Vec<(usize, String)>,
    pos: usize,
}

impl Tokens {
    fn new(text: &str) -> Self {
        let mut items = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("");
            for tok in line.split_whitespace() {
                items.push((idx + 1, tok.to_string()));
            }
        }
        Tokens { items, pos: 0 }
    }

    fn peek(&self) -> Option<&(usize, String)> {
        self.items.get(self.pos)
    }

    fn next(&mut self, what: &str) -> CliResult<(usize, String)> {
        let item = self.items.get(self.pos).cloned().ok_or_else(|| {
            CliError::Config(format!("instance ended early, expected {what}"))
        })?;
        self.pos += 1;
        Ok(item)
    }

    fn number(&mut self, what: &str) -> CliResult<(usize, f64)> {
        let (line, tok) = self.next(what)?;
        let value: f64 = tok.parse().map_err(|_| {
            CliError::Config(format!("line {line}: expected {what}, got '{tok}'"))
        })?;
        if !value.is_finite() {
            return Err(CliError::Config(format!("line {line}: {what} must be finite")));
        }
        Ok((line, value))
    }

    fn count(&mut self, what: &str) -> CliResult<usize> {
        let (line, tok) = self.next(what)?;
        tok.parse().map_err(|_| {
            CliError::Config(format!("line {line}: expected {what}, got '{tok}'"))
        })
    }
}

fn parse_numbers(tokens: &mut Tokens, n: usize, what: &str) -> CliResult<Vec<f64>> {
    (0..n).map(|_| Ok(tokens.number(what)?.1)).collect()
}

impl AffineInstance {
    /// Parses an instance from text. Errors name the offending line.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut tokens = Tokens::new(text);
        let mut dim: Option<usize> = None;
        let mut count: Option<usize> = None;
        while let Some((line, word)) = tokens.peek().cloned() {
            match word.as_str() {
                "dim" if dim.is_none() => {
                    tokens.next("dim")?;
                    dim = Some(tokens.count("dimension")?);
                }
                "operators" if count.is_none() => {
                    tokens.next("operators")?;
                    count = Some(tokens.count("operator count")?);
                }
                "operator" => break,
                other => {
                    return Err(CliError::Config(format!(
                        "line {line}: unexpected '{other}' in the header"
                    )))
                }
            }
        }
        let dim = dim.ok_or_else(|| CliError::Config("missing 'dim' declaration".into()))?;
        let count =
            count.ok_or_else(|| CliError::Config("missing 'operators' declaration".into()))?;
        if dim == 0 {
            return Err(CliError::Config("dim must be at least 1".into()));
        }
        if count < 2 {
            return Err(CliError::Config(
                "an inclusion needs at least 2 operators".into(),
            ));
        }

        let mut operators = Vec::with_capacity(count);
        for k in 0..count {
            let (line, word) = tokens.next("an 'operator' block")?;
            if word != "operator" {
                return Err(CliError::Config(format!(
                    "line {line}: expected 'operator' (block {} of {count}), got '{word}'",
                    k + 1
                )));
            }
            let mut sigma: Option<f64> = None;
            let mut matrix: Option<Matrix> = None;
            let mut offset: Option<Vector> = None;
            while let Some((line, word)) = tokens.peek().cloned() {
                match word.as_str() {
                    "operator" => break,
                    "sigma" => {
                        tokens.next("sigma")?;
                        if sigma.is_some() {
                            return Err(CliError::Config(format!(
                                "line {line}: duplicate 'sigma'"
                            )));
                        }
                        sigma = Some(tokens.number("a sigma value")?.1);
                    }
                    "matrix" => {
                        tokens.next("matrix")?;
                        if matrix.is_some() {
                            return Err(CliError::Config(format!(
                                "line {line}: duplicate 'matrix'"
                            )));
                        }
                        let entries = parse_numbers(&mut tokens, dim * dim, "a matrix entry")?;
                        matrix = Some(Matrix::from_row_slice(dim, dim, &entries));
                    }
                    "offset" => {
                        tokens.next("offset")?;
                        if offset.is_some() {
                            return Err(CliError::Config(format!(
                                "line {line}: duplicate 'offset'"
                            )));
                        }
                        offset = Some(Vector::from_vec(parse_numbers(
                            &mut tokens,
                            dim,
                            "an offset entry",
                        )?));
                    }
                    other => {
                        return Err(CliError::Config(format!(
                            "line {line}: unexpected '{other}' inside an operator block"
                        )))
                    }
                }
            }
            let matrix = matrix.ok_or_else(|| {
                CliError::Config(format!("operator block {} is missing 'matrix'", k + 1))
            })?;
            operators.push(AffineBlock {
                matrix,
                offset: offset.unwrap_or_else(|| Vector::zeros(dim)),
                sigma,
            });
        }
        if let Some((line, word)) = tokens.peek() {
            return Err(CliError::Config(format!(
                "line {line}: trailing '{word}' after {count} operator blocks"
            )));
        }
        Ok(AffineInstance { dim, operators })
    }

    /// Reads and parses an instance file.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read instance {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn operator_count(&self) -> usize {
        self.operators.len()
    }

    /// Declared moduli in operator order, zero where omitted.
    pub fn sigmas(&self) -> Vec<f64> {
        self.operators
            .iter()
            .map(|op| op.sigma.unwrap_or(0.0))
            .collect()
    }

    /// Builds resolvent evaluators for every block.
    pub fn resolvent_ops(&self) -> CliResult<Vec<ResolventOp>> {
        self.operators
            .iter()
            .map(|block| {
                let mut op = ResolventOp::affine(block.matrix.clone(), block.offset.clone())?;
                if let Some(sigma) = block.sigma {
                    op = op.with_sigma(sigma);
                }
                Ok(op)
            })
            .collect()
    }
}
