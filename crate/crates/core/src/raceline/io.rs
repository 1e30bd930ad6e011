//! CSV formats: waypoints are `x,y` (header optional), racing lines are
//! `s,x,y,psi,kappa` with a header row.

use std::io::{Read, Write};
use std::path::Path;

use super::{LineSample, RacelineError, RacingLine, Waypoint};

fn io_err(path: &Path, e: impl std::fmt::Display) -> RacelineError {
    RacelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn parse_rows<R: Read>(reader: R, columns: usize) -> Result<Vec<Vec<f64>>, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != columns {
            return Err(format!(
                "row {}: expected {columns} columns, found {}",
                idx + 1,
                record.len()
            ));
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) => rows.push(values),
            // a non-numeric first row is a header
            Err(_) if idx == 0 => continue,
            Err(e) => return Err(format!("row {}: {e}", idx + 1)),
        }
    }
    Ok(rows)
}

pub fn parse_waypoints<R: Read>(reader: R) -> Result<Vec<Waypoint>, String> {
    Ok(parse_rows(reader, 2)?
        .into_iter()
        .map(|r| Waypoint::new(r[0], r[1]))
        .collect())
}

pub fn read_waypoints_csv(path: &Path) -> Result<Vec<Waypoint>, RacelineError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    parse_waypoints(file).map_err(|e| io_err(path, e))
}

pub fn write_line<W: Write>(line: &RacingLine, writer: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["s", "x", "y", "psi", "kappa"])?;
    for smp in line.samples() {
        wtr.write_record([
            smp.s.to_string(),
            smp.x.to_string(),
            smp.y.to_string(),
            smp.psi.to_string(),
            smp.kappa.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_line_csv(line: &RacingLine, path: &Path) -> Result<(), RacelineError> {
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    write_line(line, std::io::BufWriter::new(file)).map_err(|e| io_err(path, e))
}

pub fn parse_line<R: Read>(reader: R) -> Result<RacingLine, String> {
    let rows = parse_rows(reader, 5)?;
    let n = rows.len();
    if n < 4 {
        return Err(format!("need at least 4 samples, got {n}"));
    }
    let total_length = rows[n - 1][0] * n as f64 / (n - 1) as f64;
    let samples = rows
        .into_iter()
        .map(|r| LineSample {
            s: r[0],
            x: r[1],
            y: r[2],
            psi: r[3],
            kappa: r[4],
        })
        .collect();
    RacingLine::from_samples(samples, total_length).map_err(|e| e.to_string())
}

pub fn read_line_csv(path: &Path) -> Result<RacingLine, RacelineError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    parse_line(file).map_err(|e| io_err(path, e))
}
