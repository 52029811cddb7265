//! Equipment substitution matrix and candidate-set derivation.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CompatError {
    #[error("unknown resource `{0}`")]
    UnknownResource(String),
    #[error("matrix CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("matrix CSV row {row}: {message}")]
    Format { row: usize, message: String },
    #[error("matrix diagonal entry for `{0}` must be 1")]
    Diagonal(String),
}

/// How to read a matrix entry `M[i][j]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Row = original resource, column = admissible substitute.
    #[default]
    RowToColumn,
    /// Column = original resource, row = admissible substitute.
    ColumnToRow,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompatMatrix {
    resources: Vec<String>,
    cells: Vec<Vec<bool>>,
    direction: Direction,
}

const BUILTIN: [[u8; 14]; 14] = [
    [1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 1],
    [1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 1],
    [1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 1],
    [1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 1],
    [1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 1],
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 1],
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 1],
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 1],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0],
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 1, 1],
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 1, 1],
];

/// The 14-type trailer fleet substitution table, rows/columns r1..r14.
pub fn builtin_matrix() -> CompatMatrix {
    CompatMatrix {
        resources: (1..=14).map(|i| format!("r{i}")).collect(),
        cells: BUILTIN
            .iter()
            .map(|row| row.iter().map(|&c| c == 1).collect())
            .collect(),
        direction: Direction::RowToColumn,
    }
}

impl CompatMatrix {
    pub fn new(resources: Vec<String>, cells: Vec<Vec<bool>>) -> Result<Self, CompatError> {
        let n = resources.len();
        if cells.len() != n {
            return Err(CompatError::Format {
                row: cells.len(),
                message: format!("expected {n} rows"),
            });
        }
        for (i, row) in cells.iter().enumerate() {
            if row.len() != n {
                return Err(CompatError::Format {
                    row: i + 1,
                    message: format!("expected {n} cells, got {}", row.len()),
                });
            }
            if !row[i] {
                return Err(CompatError::Diagonal(resources[i].clone()));
            }
        }
        Ok(CompatMatrix {
            resources,
            cells,
            direction: Direction::RowToColumn,
        })
    }

    pub fn identity(resources: Vec<String>) -> Self {
        let n = resources.len();
        let cells = (0..n).map(|i| (0..n).map(|j| i == j).collect()).collect();
        CompatMatrix {
            resources,
            cells,
            direction: Direction::RowToColumn,
        }
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn resources(&self) -> &[String] {
        &self.resources
    }

    pub fn len(&self) -> usize {
        self.resources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resources.is_empty()
    }

    /// Raw cell `M[row][col]`, independent of the direction flag.
    pub fn cell(&self, row: usize, col: usize) -> bool {
        self.cells[row][col]
    }

    pub fn index_of(&self, resource: &str) -> Option<usize> {
        self.resources.iter().position(|r| r == resource)
    }

    /// Whether `substitute` may replace `original`, honoring the direction flag.
    pub fn admits(&self, original: usize, substitute: usize) -> bool {
        match self.direction {
            Direction::RowToColumn => self.cells[original][substitute],
            Direction::ColumnToRow => self.cells[substitute][original],
        }
    }

    /// Resources that may serve an arc whose initial resource is `initial`,
    /// in matrix order. Always contains `initial`.
    pub fn candidates_for(&self, initial: &str) -> Result<Vec<String>, CompatError> {
        let i = self
            .index_of(initial)
            .ok_or_else(|| CompatError::UnknownResource(initial.to_string()))?;
        Ok((0..self.len())
            .filter(|&j| self.admits(i, j))
            .map(|j| self.resources[j].clone())
            .collect())
    }

    /// Sub-matrix over the first `k` resources.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.len());
        CompatMatrix {
            resources: self.resources[..k].to_vec(),
            cells: self.cells[..k]
                .iter()
                .map(|row| row[..k].to_vec())
                .collect(),
            direction: self.direction,
        }
    }

    /// Read a CSV whose first row and first column hold resource ids and
    /// whose cells are 0/1.
    pub fn from_csv<R: Read>(source: R) -> Result<Self, CompatError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(source);
        let mut rows = reader.records();
        let header = rows.next().ok_or(CompatError::Format {
            row: 0,
            message: "empty file".into(),
        })??;
        let resources: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let col_pos: HashMap<&str, usize> = resources
            .iter()
            .enumerate()
            .map(|(i, r)| (r.as_str(), i))
            .collect();
        let mut cells = vec![Vec::new(); resources.len()];
        let mut seen = 0;
        for (k, rec) in rows.enumerate() {
            let rec = rec?;
            let row_no = k + 2;
            let id = rec.get(0).unwrap_or_default();
            let &i = col_pos.get(id).ok_or_else(|| CompatError::Format {
                row: row_no,
                message: format!("row label `{id}` is not a column header"),
            })?;
            let mut row = Vec::with_capacity(resources.len());
            for cell in rec.iter().skip(1) {
                row.push(match cell {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(CompatError::Format {
                            row: row_no,
                            message: format!("cell `{other}` is not 0 or 1"),
                        })
                    }
                });
            }
            cells[i] = row;
            seen += 1;
        }
        if seen != resources.len() {
            return Err(CompatError::Format {
                row: seen + 1,
                message: format!("expected {} data rows, got {seen}", resources.len()),
            });
        }
        Self::new(resources, cells)
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), CompatError> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec![String::new()];
        header.extend(self.resources.iter().cloned());
        w.write_record(&header)?;
        for (id, row) in self.resources.iter().zip(&self.cells) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|&c| if c { "1" } else { "0" }.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| CompatError::Csv(e.into()))?;
        Ok(())
    }
}
