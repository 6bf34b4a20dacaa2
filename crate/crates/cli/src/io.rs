//! Panel and stimulus CSV formats.
//!
//! Panels are wide: a `subject,node,t0,...,tT` header and one row per
//! (subject, node). Stimuli list `start,end` intervals in seconds, one per
//! row. Floats are written with Rust's shortest round-trip formatting, so a
//! save/load cycle reproduces every value bit for bit.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ptfc::ptfce::BoldPanel;
use ptfc::signal::{boxcar_stimulus, Interval, SampledSignal, TimeGrid};

use crate::error::CliError;

/// Reads a wide panel CSV. Subject and node order follow first appearance.
pub fn load_bold_csv(path: &Path, delta: f64) -> Result<BoldPanel, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_bold_csv(file, delta, &path.display().to_string())
}

pub fn read_bold_csv(reader: impl Read, delta: f64, source: &str) -> Result<BoldPanel, CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| CliError::format(source, e))?.clone();
    if header.len() < 4 || &header[0] != "subject" || &header[1] != "node" {
        return Err(CliError::Validation(format!(
            "{source}: header must be subject,node,t0,...,tT with at least two time points"
        )));
    }
    for (i, name) in header.iter().skip(2).enumerate() {
        if name != format!("t{i}") {
            return Err(CliError::Validation(format!("{source}: header column {} should be t{i}, found {name:?}", i + 3)));
        }
    }
    let width = header.len() - 2;

    let mut subjects: Vec<String> = Vec::new();
    let mut nodes: Vec<String> = Vec::new();
    let mut cells: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 2;
        let record = record.map_err(|e| CliError::format(source, e))?;
        if record.len() != width + 2 {
            return Err(CliError::Validation(format!(
                "{source}: row {row} has {} columns, expected {}",
                record.len(),
                width + 2
            )));
        }
        let s = index_of(&mut subjects, &record[0]);
        let k = index_of(&mut nodes, &record[1]);
        let mut values = Vec::with_capacity(width);
        for (c, cell) in record.iter().skip(2).enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Validation(format!("{source}: row {row}, column {}: {cell:?} is not a number", c + 3))
            })?;
            if !v.is_finite() {
                return Err(CliError::Validation(format!("{source}: row {row}, column {}: value is not finite", c + 3)));
            }
            values.push(v);
        }
        if cells.insert((s, k), values).is_some() {
            return Err(CliError::Validation(format!(
                "{source}: duplicate row for subject {:?}, node {:?}",
                subjects[s], nodes[k]
            )));
        }
    }
    let mut data = Vec::with_capacity(subjects.len() * nodes.len() * width);
    for (s, subject) in subjects.iter().enumerate() {
        for (k, node) in nodes.iter().enumerate() {
            let values = cells.remove(&(s, k)).ok_or_else(|| {
                CliError::Validation(format!("{source}: incomplete panel, subject {subject:?} has no row for node {node:?}"))
            })?;
            data.extend(values);
        }
    }
    let grid = TimeGrid::new(delta, width)?;
    Ok(BoldPanel::new(grid, nodes, subjects, data)?)
}

fn index_of(list: &mut Vec<String>, key: &str) -> usize {
    match list.iter().position(|x| x == key) {
        Some(i) => i,
        None => {
            list.push(key.to_string());
            list.len() - 1
        }
    }
}

pub fn save_bold_csv(path: &Path, panel: &BoldPanel) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_bold_csv(BufWriter::new(file), panel).map_err(|e| CliError::io(path, e))
}

pub fn write_bold_csv(mut w: impl Write, panel: &BoldPanel) -> std::io::Result<()> {
    write!(w, "subject,node")?;
    for t in 0..panel.grid().num_points() {
        write!(w, ",t{t}")?;
    }
    writeln!(w)?;
    for (s, subject) in panel.subject_ids().iter().enumerate() {
        for (k, node) in panel.node_labels().iter().enumerate() {
            write!(w, "{subject},{node}")?;
            for v in panel.series(s, k) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
    }
    w.flush()
}

/// Reads `start,end` rows (an optional header line is skipped) and builds
/// the boxcar on `grid`. Rows may come in any order.
pub fn load_stimulus_csv(path: &Path, grid: &TimeGrid) -> Result<SampledSignal, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let intervals = read_intervals(file, &path.display().to_string())?;
    Ok(boxcar_stimulus(&intervals, grid)?)
}

pub fn read_intervals(reader: impl Read, source: &str) -> Result<Vec<Interval>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut intervals = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CliError::format(source, e))?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if record.len() != 2 {
            return Err(CliError::Validation(format!("{source}: row {} must have exactly start,end", r + 1)));
        }
        let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
        match parsed {
            (Ok(start), Ok(end)) => intervals.push(Interval::new(start, end)),
            _ if r == 0 => continue,
            _ => {
                return Err(CliError::Validation(format!("{source}: row {} is not a pair of numbers", r + 1)));
            }
        }
    }
    intervals.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
    Ok(intervals)
}

pub fn save_intervals(path: &Path, intervals: &[Interval]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_intervals(BufWriter::new(file), intervals).map_err(|e| CliError::io(path, e))
}

fn write_intervals(mut w: impl Write, intervals: &[Interval]) -> std::io::Result<()> {
    writeln!(w, "start,end")?;
    for iv in intervals {
        writeln!(w, "{},{}", iv.start, iv.end)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_panel_shape() {
        let text = "subject,node,t0,t1,t2,t3\na,x,1,2,3,4\na,y,0,1,0,1\nb,x,4,3,2,1\nb,y,1,1,2,2\n";
        let p = read_bold_csv(text.as_bytes(), 1.0, "mem").unwrap();
        assert_eq!((p.n_subjects(), p.n_nodes(), p.grid().last_index()), (2, 2, 3));
        assert_eq!(p.series(1, 0), &[4.0, 3.0, 2.0, 1.0]);
    }

    #[test]
    fn missing_row_is_reported() {
        let text = "subject,node,t0,t1\na,x,1,2\na,y,0,1\nb,x,4,3\n";
        let err = read_bold_csv(text.as_bytes(), 1.0, "mem").unwrap_err();
        assert!(matches!(err, CliError::Validation(ref m) if m.contains("\"b\"") && m.contains("\"y\"")), "{err}");
    }

    #[test]
    fn bad_cell_names_position() {
        let text = "subject,node,t0,t1\na,x,1,oops\n";
        let err = read_bold_csv(text.as_bytes(), 1.0, "mem").unwrap_err();
        assert!(matches!(err, CliError::Validation(ref m) if m.contains("row 2, column 4")), "{err}");
    }

    #[test]
    fn intervals_sorted_and_header_optional() {
        let iv = read_intervals("start,end\n162,174\n86.5,98.5\n".as_bytes(), "mem").unwrap();
        assert_eq!(iv, vec![Interval::new(86.5, 98.5), Interval::new(162.0, 174.0)]);
        assert!(read_intervals("".as_bytes(), "mem").unwrap().is_empty());
        assert!(read_intervals("1,2\nx,3\n".as_bytes(), "mem").is_err());
    }
}
