//! Field serialization.
//!
//! A field is written as CSV with columns `edge_index,x,re,im`; every edge
//! starts with its own `x = 0` row carrying the shared vertex value. A JSON
//! sidecar (`<stem>.header.json`) records `N`, `L`, `M` and `alpha`. Floats are
//! printed with 17 significant digits so files round-trip exactly.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GraphField, StarGrid, VertexCoupling};

pub const FIELD_COLUMNS: [&str; 4] = ["edge_index", "x", "re", "im"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub n_edges: usize,
    pub edge_length: f64,
    pub points_per_edge: usize,
    pub alpha: f64,
}

impl FieldHeader {
    pub fn new(grid: &StarGrid, coupling: VertexCoupling) -> Self {
        Self {
            n_edges: grid.n_edges(),
            edge_length: grid.edge_length(),
            points_per_edge: grid.points_per_edge(),
            alpha: coupling.alpha,
        }
    }

    pub fn grid(&self) -> Result<StarGrid> {
        StarGrid::new(self.n_edges, self.edge_length, self.points_per_edge)
    }
}

/// Fixed 17-significant-digit float format used in every CSV.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_field_csv<W: Write>(mut w: W, field: &GraphField) -> Result<()> {
    let grid = field.grid();
    writeln!(w, "{}", FIELD_COLUMNS.join(","))?;
    for k in 0..grid.n_edges() {
        for (i, z) in field.edge_with_vertex(k).iter().enumerate() {
            writeln!(w, "{},{},{},{}", k, fmt_float(grid.x(i)), fmt_float(z.re), fmt_float(z.im))?;
        }
    }
    Ok(())
}

pub fn read_field_csv<R: Read>(r: R, grid: &StarGrid) -> Result<GraphField> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != FIELD_COLUMNS {
        return Err(Error::Format(format!(
            "expected columns {:?}, got {:?}",
            FIELD_COLUMNS,
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let m = grid.points_per_edge();
    let mut edges = vec![Vec::with_capacity(m + 1); grid.n_edges()];
    for record in reader.records() {
        let record = record?;
        let parse = |i: usize| -> Result<f64> {
            record[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("column {}: {e}", FIELD_COLUMNS[i])))
        };
        let k: usize = record[0]
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("edge_index: {e}")))?;
        let edge = edges
            .get_mut(k)
            .ok_or_else(|| Error::Format(format!("edge_index {k} out of range")))?;
        edge.push(Complex64::new(parse(2)?, parse(3)?));
    }
    GraphField::from_edge_samples(grid, &edges)
}

/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.header.json`.
pub fn write_field(dir: &Path, stem: &str, field: &GraphField, coupling: VertexCoupling) -> Result<()> {
    fs::create_dir_all(dir)?;
    let file = fs::File::create(dir.join(format!("{stem}.csv")))?;
    write_field_csv(std::io::BufWriter::new(file), field)?;
    let header = FieldHeader::new(field.grid(), coupling);
    fs::write(dir.join(format!("{stem}.header.json")), serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

/// Reads a field written by [`write_field`].
pub fn read_field(dir: &Path, stem: &str) -> Result<(GraphField, FieldHeader)> {
    let header: FieldHeader = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.header.json")))?)?;
    let grid = header.grid()?;
    let file = fs::File::open(dir.join(format!("{stem}.csv")))?;
    Ok((read_field_csv(std::io::BufReader::new(file), &grid)?, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(seed in 0u64..1000, n in 2usize..5) {
            let g = make_grid(n, 3.0, 16).unwrap();
            let s = seed as f64 * 0.001 + 0.1;
            let f = GraphField::from_fn(&g, |k, x| Complex64::new((s * x).sin() + 1.0 / 3.0, (k as f64 + 1.0) * x * s)
                - Complex64::new(0.0, 0.0) * (k as f64)).unwrap();
            let mut buf = Vec::new();
            write_field_csv(&mut buf, &f).unwrap();
            let back = read_field_csv(&buf[..], &g).unwrap();
            prop_assert_eq!(back, f);
        }
    }

    #[test]
    fn rejects_reordered_columns() {
        let g = make_grid(2, 3.0, 16).unwrap();
        let text = "x,edge_index,re,im\n0,0,1,0\n";
        assert!(matches!(read_field_csv(text.as_bytes(), &g), Err(Error::Format(_))));
    }

    #[test]
    fn header_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid(3, 5.0, 20).unwrap();
        let f = GraphField::from_real_fn(&g, |_, x| (-x).exp()).unwrap();
        write_field(dir.path(), "psi", &f, VertexCoupling::new(-1.0).unwrap()).unwrap();
        let (back, header) = read_field(dir.path(), "psi").unwrap();
        assert_eq!(back, f);
        assert_eq!(header.alpha, -1.0);
        assert_eq!(header.points_per_edge, 20);
    }
}
