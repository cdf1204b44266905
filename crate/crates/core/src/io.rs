//! File formats: snapshot CSV, compact binary snapshot framing, Z-sample CSV,
//! field/profile CSV, and point-sample CSV. All float text uses the shortest
//! round-trip representation, so CSV round-trips are exact.

use crate::engine::{Particle, PopulationSnapshot};
use crate::error::{Error, Result};
use crate::stats::{Origin, PointConfiguration};
use std::io::{BufRead, BufReader, Read, Write};

/// Magic bytes of the binary snapshot framing.
pub const SNAPSHOT_MAGIC: &[u8; 4] = b"BBMS";
/// Binary framing version.
pub const SNAPSHOT_VERSION: u32 = 1;

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad float {s:?}: {e}")))
}

fn parse_u64(s: &str) -> Result<u64> {
    s.parse::<u64>()
        .map_err(|e| Error::Parse(format!("bad integer {s:?}: {e}")))
}

/// Write snapshots as CSV with columns
/// `replica,time,particle_id,parent_id,position`.
/// The parent field is empty for the root.
pub fn write_snapshots_csv<W: Write>(
    out: &mut W,
    rows: impl IntoIterator<Item = (u64, PopulationSnapshot)>,
) -> Result<()> {
    writeln!(out, "replica,time,particle_id,parent_id,position")?;
    for (replica, snap) in rows {
        for p in &snap.particles {
            let parent = p.parent_id.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{replica},{},{},{parent},{}",
                fmt_f64(snap.time),
                p.id,
                fmt_f64(p.position)
            )?;
        }
    }
    Ok(())
}

/// Parse the snapshot CSV back into `(replica, snapshot)` groups, in file order.
pub fn read_snapshots_csv<R: Read>(input: R) -> Result<Vec<(u64, PopulationSnapshot)>> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty snapshot csv".into()))?
        .map_err(Error::Io)?;
    if header.trim() != "replica,time,particle_id,parent_id,position" {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    let mut groups: Vec<(u64, PopulationSnapshot)> = Vec::new();
    for line in lines {
        let line = line.map_err(Error::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse(format!("expected 5 fields, got {}", fields.len())));
        }
        let replica = parse_u64(fields[0])?;
        let time = parse_f64(fields[1])?;
        let particle = Particle {
            id: parse_u64(fields[2])?,
            parent_id: if fields[3].is_empty() {
                None
            } else {
                Some(parse_u64(fields[3])?)
            },
            position: parse_f64(fields[4])?,
            birth_time: 0.0,
        };
        match groups.last_mut() {
            Some((r, snap)) if *r == replica && snap.time == time => {
                snap.particles.push(particle)
            }
            _ => groups.push((
                replica,
                PopulationSnapshot {
                    time,
                    particles: vec![particle],
                    genealogy: None,
                    pruned_count: 0,
                },
            )),
        }
    }
    Ok(groups)
}

/// Binary snapshot framing: header `BBMS`, version u32, then per snapshot a
/// record of replica (u64), time (f64), particle count (u64), and per particle
/// id (u64), parent (u64, MAX = none), position (f64). All little-endian.
pub fn write_snapshots_binary<W: Write>(
    out: &mut W,
    rows: impl IntoIterator<Item = (u64, PopulationSnapshot)>,
) -> Result<()> {
    out.write_all(SNAPSHOT_MAGIC)?;
    out.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    for (replica, snap) in rows {
        out.write_all(&replica.to_le_bytes())?;
        out.write_all(&snap.time.to_le_bytes())?;
        out.write_all(&(snap.particles.len() as u64).to_le_bytes())?;
        for p in &snap.particles {
            out.write_all(&p.id.to_le_bytes())?;
            out.write_all(&p.parent_id.unwrap_or(u64::MAX).to_le_bytes())?;
            out.write_all(&p.position.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_snapshots_binary<R: Read>(mut input: R) -> Result<Vec<(u64, PopulationSnapshot)>> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Parse("bad magic in binary snapshot stream".into()));
    }
    let mut word4 = [0u8; 4];
    input.read_exact(&mut word4)?;
    let version = u32::from_le_bytes(word4);
    if version != SNAPSHOT_VERSION {
        return Err(Error::Parse(format!("unsupported version {version}")));
    }
    let mut out = Vec::new();
    let mut word8 = [0u8; 8];
    loop {
        match input.read_exact(&mut word8) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(Error::Io(e)),
        }
        let replica = u64::from_le_bytes(word8);
        input.read_exact(&mut word8)?;
        let time = f64::from_le_bytes(word8);
        input.read_exact(&mut word8)?;
        let count = u64::from_le_bytes(word8) as usize;
        let mut particles = Vec::with_capacity(count);
        for _ in 0..count {
            input.read_exact(&mut word8)?;
            let id = u64::from_le_bytes(word8);
            input.read_exact(&mut word8)?;
            let parent = u64::from_le_bytes(word8);
            input.read_exact(&mut word8)?;
            let position = f64::from_le_bytes(word8);
            particles.push(Particle {
                id,
                parent_id: (parent != u64::MAX).then_some(parent),
                position,
                birth_time: 0.0,
            });
        }
        out.push((
            replica,
            PopulationSnapshot {
                time,
                particles,
                genealogy: None,
                pruned_count: 0,
            },
        ));
    }
    Ok(out)
}

/// One-column CSV of samples with a header.
pub fn write_samples_csv<W: Write>(out: &mut W, name: &str, samples: &[f64]) -> Result<()> {
    writeln!(out, "{name}")?;
    for &s in samples {
        writeln!(out, "{}", fmt_f64(s))?;
    }
    Ok(())
}

pub fn read_samples_csv<R: Read>(input: R) -> Result<Vec<f64>> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines();
    lines.next(); // header
    let mut out = Vec::new();
    for line in lines {
        let line = line.map_err(Error::Io)?;
        if !line.trim().is_empty() {
            out.push(parse_f64(line.trim())?);
        }
    }
    Ok(out)
}

/// Two-column CSV `x,value`.
pub fn write_xy_csv<W: Write>(
    out: &mut W,
    names: (&str, &str),
    rows: impl IntoIterator<Item = (f64, f64)>,
) -> Result<()> {
    writeln!(out, "{},{}", names.0, names.1)?;
    for (x, y) in rows {
        writeln!(out, "{},{}", fmt_f64(x), fmt_f64(y))?;
    }
    Ok(())
}

/// Point-sample CSV `sample_id,point` for families of point configurations.
pub fn write_configs_csv<W: Write>(out: &mut W, configs: &[PointConfiguration]) -> Result<()> {
    writeln!(out, "sample_id,point")?;
    for (i, config) in configs.iter().enumerate() {
        for &p in config.points() {
            writeln!(out, "{i},{}", fmt_f64(p))?;
        }
    }
    Ok(())
}

pub fn read_configs_csv<R: Read>(input: R, origin: Origin) -> Result<Vec<PointConfiguration>> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty configs csv".into()))?
        .map_err(Error::Io)?;
    if header.trim() != "sample_id,point" {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    let mut raw: Vec<(u64, f64)> = Vec::new();
    for line in lines {
        let line = line.map_err(Error::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, point) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("expected 2 fields in {line:?}")))?;
        raw.push((parse_u64(id)?, parse_f64(point)?));
    }
    let max_id = raw.iter().map(|&(i, _)| i).max();
    let mut grouped: Vec<Vec<f64>> = match max_id {
        Some(m) => vec![Vec::new(); m as usize + 1],
        None => Vec::new(),
    };
    for (id, p) in raw {
        grouped[id as usize].push(p);
    }
    Ok(grouped
        .into_iter()
        .map(|points| PointConfiguration::new(points, origin))
        .collect())
}
