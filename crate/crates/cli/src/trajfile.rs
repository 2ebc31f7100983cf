//! Trajectory files: a plain-text self-describing header followed by the
//! recorded states, either as CSV rows (debug) or packed little-endian
//! 64-bit floats (default). The header carries everything needed to rebuild
//! the basis and replay diagnostics without the original configuration.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use preytaxis_core::galerkin::Trajectory;
use preytaxis_core::SpectralState;

use crate::config::FileFormat;
use crate::Error;

pub const FORMAT_VERSION: u32 = 1;

/// Metadata stored ahead of the coefficient data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajHeader {
    pub config_hash: String,
    pub master_seed: u64,
    pub trajectory: u64,
    pub dt: f64,
    pub record_every: usize,
    pub n_modes: usize,
    pub lengths: Vec<f64>,
    pub grid_points: Vec<usize>,
    pub format: FileFormat,
    pub n_states: usize,
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn write_trajectory(
    path: &Path,
    header: &TrajHeader,
    traj: &Trajectory,
) -> Result<(), Error> {
    if header.n_states != traj.states.len() {
        return Err(Error::Format(format!(
            "header announces {} states, trajectory has {}",
            header.n_states,
            traj.states.len()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "preytaxis-trajectory v{FORMAT_VERSION}")?;
    writeln!(w, "config_hash = {}", header.config_hash)?;
    writeln!(w, "master_seed = {}", header.master_seed)?;
    writeln!(w, "trajectory = {}", header.trajectory)?;
    writeln!(w, "dt = {:e}", header.dt)?;
    writeln!(w, "record_every = {}", header.record_every)?;
    writeln!(w, "n_modes = {}", header.n_modes)?;
    writeln!(w, "lengths = {}", join(&header.lengths))?;
    writeln!(w, "grid_points = {}", join(&header.grid_points))?;
    writeln!(
        w,
        "format = {}",
        match header.format {
            FileFormat::Csv => "csv",
            FileFormat::Bin => "bin",
        }
    )?;
    writeln!(w, "states = {}", header.n_states)?;
    writeln!(w)?;
    match header.format {
        FileFormat::Csv => {
            for state in &traj.states {
                let mut row = Vec::with_capacity(1 + 2 * header.n_modes);
                row.push(format!("{:.17e}", state.time));
                row.extend(state.c1.iter().map(|v| format!("{v:.17e}")));
                row.extend(state.c2.iter().map(|v| format!("{v:.17e}")));
                writeln!(w, "{}", row.join(","))?;
            }
        }
        FileFormat::Bin => {
            for state in &traj.states {
                w.write_all(&state.time.to_le_bytes())?;
                for v in state.c1.iter().chain(&state.c2) {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

fn header_value<'a>(line: &'a str, key: &str) -> Result<&'a str, Error> {
    let (k, v) = line
        .split_once(" = ")
        .ok_or_else(|| Error::Format(format!("malformed header line: {line}")))?;
    if k != key {
        return Err(Error::Format(format!("expected header key {key}, found {k}")));
    }
    Ok(v)
}

fn parse_list<T: std::str::FromStr>(v: &str) -> Result<Vec<T>, Error> {
    v.split(',')
        .map(|s| s.trim().parse().map_err(|_| Error::Format(format!("bad list entry: {s}"))))
        .collect()
}

pub fn read_trajectory(path: &Path) -> Result<(TrajHeader, Trajectory), Error> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    let mut next = |r: &mut BufReader<File>| -> Result<String, Error> {
        line.clear();
        r.read_line(&mut line)?;
        Ok(line.trim_end_matches('\n').to_string())
    };

    let magic = next(&mut r)?;
    let Some(version) = magic.strip_prefix("preytaxis-trajectory v") else {
        return Err(Error::Format(format!("not a trajectory file: {magic}")));
    };
    let version: u32 =
        version.parse().map_err(|_| Error::Format(format!("bad version: {magic}")))?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unknown file version {version}")));
    }

    let config_hash = header_value(&next(&mut r)?, "config_hash")?.to_string();
    let parse_u64 = |v: &str| v.parse::<u64>().map_err(|_| Error::Format(format!("bad int {v}")));
    let master_seed = parse_u64(header_value(&next(&mut r)?, "master_seed")?)?;
    let trajectory = parse_u64(header_value(&next(&mut r)?, "trajectory")?)?;
    let dt: f64 = header_value(&next(&mut r)?, "dt")?
        .parse()
        .map_err(|_| Error::Format("bad dt".into()))?;
    let record_every = parse_u64(header_value(&next(&mut r)?, "record_every")?)? as usize;
    let n_modes = parse_u64(header_value(&next(&mut r)?, "n_modes")?)? as usize;
    let lengths: Vec<f64> = parse_list(header_value(&next(&mut r)?, "lengths")?)?;
    let grid_points: Vec<usize> = parse_list(header_value(&next(&mut r)?, "grid_points")?)?;
    let format = match header_value(&next(&mut r)?, "format")? {
        "csv" => FileFormat::Csv,
        "bin" => FileFormat::Bin,
        other => return Err(Error::Format(format!("unknown format {other}"))),
    };
    let n_states = parse_u64(header_value(&next(&mut r)?, "states")?)? as usize;
    let blank = next(&mut r)?;
    if !blank.is_empty() {
        return Err(Error::Format("missing blank line after header".into()));
    }

    let mut states = Vec::with_capacity(n_states);
    match format {
        FileFormat::Csv => {
            for _ in 0..n_states {
                let row = next(&mut r)?;
                let values: Vec<f64> = parse_list(&row)?;
                if values.len() != 1 + 2 * n_modes {
                    return Err(Error::Format(format!(
                        "row has {} values, expected {}",
                        values.len(),
                        1 + 2 * n_modes
                    )));
                }
                states.push(SpectralState::new(
                    values[0],
                    values[1..1 + n_modes].to_vec(),
                    values[1 + n_modes..].to_vec(),
                ));
            }
        }
        FileFormat::Bin => {
            let mut buf = vec![0u8; 8 * (1 + 2 * n_modes)];
            for _ in 0..n_states {
                r.read_exact(&mut buf).map_err(|_| Error::Format("truncated data".into()))?;
                let mut vals = buf
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
                let time = vals.next().unwrap();
                let c1: Vec<f64> = vals.by_ref().take(n_modes).collect();
                let c2: Vec<f64> = vals.collect();
                states.push(SpectralState::new(time, c1, c2));
            }
        }
    }
    let header = TrajHeader {
        config_hash,
        master_seed,
        trajectory,
        dt,
        record_every,
        n_modes,
        lengths,
        grid_points,
        format,
        n_states,
    };
    let traj = Trajectory { dt, record_every, states, increments: None };
    Ok((header, traj))
}
