use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{IctmError, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::io::SnapshotFormat;

/// Shortest decimal string that parses back to exactly `x`.
pub fn format_shortest(x: f64) -> String {
    let plain = format!("{x}");
    let sci = format!("{x:e}");
    if sci.len() < plain.len() {
        sci
    } else {
        plain
    }
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(format_shortest)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn write_field_snapshot(
    field: &ScalarField,
    path: &Path,
    format: SnapshotFormat,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let g = field.grid();
    match format {
        SnapshotFormat::Raw => {
            let cells = g
                .cells()
                .iter()
                .map(|m| m.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            writeln!(out, "{} {} {}", g.dim(), cells, join(g.h().iter().copied()))?;
        }
        SnapshotFormat::Vtk => {
            let mut dims = g.nodes_per_axis();
            let mut spacing = g.h().to_vec();
            if g.dim() == 2 {
                dims.push(1);
                spacing.push(1.0);
            }
            writeln!(out, "# vtk DataFile Version 3.0")?;
            writeln!(out, "ictm field")?;
            writeln!(out, "ASCII")?;
            writeln!(out, "DATASET STRUCTURED_POINTS")?;
            writeln!(out, "DIMENSIONS {} {} {}", dims[0], dims[1], dims[2])?;
            writeln!(out, "ORIGIN 0 0 0")?;
            writeln!(out, "SPACING {}", join(spacing))?;
            writeln!(out, "POINT_DATA {}", g.n_nodes())?;
            writeln!(out, "SCALARS value double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
        }
    }
    // One grid row (x fastest) per line.
    let nx = g.cells()[0] + 1;
    for row in field.values().chunks(nx) {
        writeln!(out, "{}", join(row.iter().copied()))?;
    }
    out.flush()?;
    Ok(())
}

fn parse_err(msg: impl Into<String>) -> IctmError {
    IctmError::Parse(msg.into())
}

fn numbers<T: std::str::FromStr>(tokens: &[&str]) -> Result<Vec<T>> {
    tokens
        .iter()
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| parse_err(format!("bad number {t:?}")))
        })
        .collect()
}

/// Reads either snapshot format, detected from the first line.
pub fn read_field_snapshot(path: &Path) -> Result<ScalarField> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let first = lines.next().ok_or_else(|| parse_err("empty snapshot"))??;
    let (grid, mut rest) = if first.starts_with("# vtk") {
        let mut header = Vec::new();
        for line in lines.by_ref() {
            let line = line?;
            let done = line.starts_with("LOOKUP_TABLE");
            header.push(line);
            if done {
                break;
            }
        }
        let field = |key: &str| -> Result<Vec<String>> {
            header
                .iter()
                .find(|l| l.starts_with(key))
                .map(|l| l.split_whitespace().skip(1).map(str::to_owned).collect())
                .ok_or_else(|| parse_err(format!("missing {key}")))
        };
        let dims: Vec<usize> = numbers(
            &field("DIMENSIONS")?
                .iter()
                .map(String::as_str)
                .collect::<Vec<_>>(),
        )?;
        let spacing: Vec<f64> = numbers(
            &field("SPACING")?
                .iter()
                .map(String::as_str)
                .collect::<Vec<_>>(),
        )?;
        if dims.len() != 3 || spacing.len() != 3 || dims.contains(&0) {
            return Err(parse_err("DIMENSIONS and SPACING need three entries"));
        }
        let dim = if dims[2] == 1 { 2 } else { 3 };
        let cells: Vec<usize> = dims[..dim].iter().map(|n| n - 1).collect();
        (GridSpec::from_spacing(dim, &cells, &spacing[..dim])?, lines)
    } else {
        let tokens: Vec<&str> = first.split_whitespace().collect();
        let dim: usize = tokens
            .first()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err("bad header"))?;
        if tokens.len() != 1 + 2 * dim {
            return Err(parse_err(format!(
                "header needs {} entries, got {}",
                1 + 2 * dim,
                tokens.len()
            )));
        }
        let cells: Vec<usize> = numbers(&tokens[1..=dim])?;
        let h: Vec<f64> = numbers(&tokens[1 + dim..])?;
        (GridSpec::from_spacing(dim, &cells, &h)?, lines)
    };
    let mut values = Vec::with_capacity(grid.n_nodes());
    for line in rest.by_ref() {
        let line = line?;
        for t in line.split_whitespace() {
            values.push(
                t.parse::<f64>()
                    .map_err(|_| parse_err(format!("bad value {t:?}")))?,
            );
        }
    }
    ScalarField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::IndicatorField;

    #[test]
    fn shortest_formatting() {
        assert_eq!(format_shortest(1.0), "1");
        assert_eq!(format_shortest(0.25), "0.25");
        assert_eq!(format_shortest(1e-20), "1e-20");
        assert_eq!(format_shortest(-3.5e300), "-3.5e300");
        for x in [0.1, 1.0 / 3.0, 6.02e23, -1e-7, 123456.789] {
            assert_eq!(format_shortest(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn raw_ones_example() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::unit(2, 4).unwrap();
        let path = dir.path().join("chi.raw");
        write_field_snapshot(
            &IndicatorField::ones(&g).to_scalar(),
            &path,
            SnapshotFormat::Raw,
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "2 4 4 0.25 0.25");
        let rest: Vec<&str> = lines.flat_map(str::split_whitespace).collect();
        assert_eq!(rest, vec!["1"; 25]);
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        for g in [
            GridSpec::new(2, &[7, 5], &[1.0, 0.3]).unwrap(),
            GridSpec::unit(3, 49).unwrap(),
        ] {
            let f = ScalarField::from_fn(&g, |p| {
                (p[0] * 13.7).sin() / 3.0 + p[1] * 1e-9 - p[2] * 7e12
            });
            for format in [SnapshotFormat::Raw, SnapshotFormat::Vtk] {
                let path = dir.path().join(format!("f.{format}"));
                write_field_snapshot(&f, &path, format).unwrap();
                let back = read_field_snapshot(&path).unwrap();
                assert_eq!(back, f);
            }
        }
    }
}
