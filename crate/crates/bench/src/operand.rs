//! Matrix operands given on the command line: a file path, or a generator
//! spec `structure:sparsity[:seed]` such as `block_random:0.8:7`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use mmm::io;
use mmm::matgen::{generate, SparsitySpec, Structure};
use mmm::{DenseMatrix, ElemKind, Element, LaneConfig};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub enum Operand {
    File(PathBuf),
    Generated {
        structure: Structure,
        sparsity: f64,
        seed: u64,
    },
}

impl FromStr for Operand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let Ok(structure) = parts[0].parse::<Structure>() else {
            return Ok(Operand::File(PathBuf::from(s)));
        };
        if !(2..=3).contains(&parts.len()) {
            return Err(format!(
                "generator operand must be structure:sparsity[:seed], got {s:?}"
            ));
        }
        let sparsity = parts[1]
            .parse()
            .map_err(|_| format!("bad sparsity in {s:?}"))?;
        let seed = match parts.get(2) {
            Some(seed) => seed.parse().map_err(|_| format!("bad seed in {s:?}"))?,
            None => 0,
        };
        Ok(Operand::Generated {
            structure,
            sparsity,
            seed,
        })
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::File(p) => write!(f, "{}", p.display()),
            Operand::Generated {
                structure,
                sparsity,
                seed,
            } => write!(f, "{structure}:{sparsity}:{seed}"),
        }
    }
}

impl Operand {
    /// Structure label for CSV output.
    pub fn structure_name(&self) -> String {
        match self {
            Operand::File(_) => "file".to_string(),
            Operand::Generated { structure, .. } => structure.to_string(),
        }
    }

    fn file_kind(&self) -> CliResult<Option<ElemKind>> {
        match self {
            Operand::File(p) => Ok(Some(io::read_file_header(p)?.kind)),
            Operand::Generated { .. } => Ok(None),
        }
    }

    /// Loads or generates the operand; generated operands are `rows x cols`.
    pub fn load<T: Element>(
        &self,
        rows: usize,
        cols: usize,
        lanes: LaneConfig,
        block_len: Option<usize>,
    ) -> CliResult<DenseMatrix<T>> {
        match self {
            Operand::File(p) => Ok(io::read_file_as(p, lanes)?),
            &Operand::Generated {
                structure,
                sparsity,
                seed,
            } => {
                let mut spec = SparsitySpec::new(structure, sparsity, seed);
                spec.block_len = block_len;
                Ok(generate(rows, cols, &spec, lanes)?)
            }
        }
    }
}

/// Element kind for a pair of operands: files fix their own kind and must
/// agree; otherwise `flag` decides.
pub fn resolve_kind(operands: &[&Operand], flag: ElemKind) -> CliResult<ElemKind> {
    let mut kind = None;
    for op in operands {
        if let Some(k) = op.file_kind()? {
            if kind.is_some_and(|prev| prev != k) {
                return Err(CliError::Usage(
                    "operand files hold different element types".into(),
                ));
            }
            kind = Some(k);
        }
    }
    Ok(kind.unwrap_or(flag))
}

/// Loads `a` (n x n unless a file) and `b` (matching a's columns).
pub fn load_pair<T: Element>(
    a: &Operand,
    b: &Operand,
    n: usize,
    lanes: LaneConfig,
    block_len: Option<usize>,
) -> CliResult<(DenseMatrix<T>, DenseMatrix<T>)> {
    let a_m = a.load::<T>(n, n, lanes, block_len)?;
    let b_m = b.load::<T>(a_m.cols(), n, lanes, block_len)?;
    if a_m.cols() != b_m.rows() {
        return Err(CliError::Usage(format!(
            "incompatible dimensions: A is {}x{}, B is {}x{}",
            a_m.rows(),
            a_m.cols(),
            b_m.rows(),
            b_m.cols()
        )));
    }
    Ok((a_m, b_m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_generator_and_path() {
        assert_eq!(
            "column:0.5:7".parse::<Operand>().unwrap(),
            Operand::Generated {
                structure: Structure::Column,
                sparsity: 0.5,
                seed: 7
            }
        );
        assert_eq!(
            "random:0.25".parse::<Operand>().unwrap(),
            Operand::Generated {
                structure: Structure::Random,
                sparsity: 0.25,
                seed: 0
            }
        );
        assert_eq!(
            "data/a.mmm".parse::<Operand>().unwrap(),
            Operand::File("data/a.mmm".into())
        );
        assert!("random:x".parse::<Operand>().is_err());
        assert!("random:0.1:2:3".parse::<Operand>().is_err());
    }

    #[test]
    fn display_round_trips() {
        let op: Operand = "block_column:0.8:3".parse().unwrap();
        assert_eq!(op.to_string().parse::<Operand>().unwrap(), op);
    }
}
