use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    /// Transmission instant [s].
    pub timestamp: f64,
    pub size_bytes: u32,
}

/// Outgoing packets of an access point, ordered by timestamp.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrafficTrace {
    packets: Vec<Packet>,
}

impl TrafficTrace {
    pub fn new(mut packets: Vec<Packet>) -> Result<Self> {
        for p in &packets {
            if !p.timestamp.is_finite() {
                return Err(Error::invalid("non-finite packet timestamp"));
            }
            if p.size_bytes == 0 {
                return Err(Error::invalid("packet size must be positive"));
            }
        }
        packets.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        Ok(Self { packets })
    }

    pub fn packets(&self) -> &[Packet] {
        &self.packets
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn total_bits(&self) -> u64 {
        self.packets.iter().map(|p| p.size_bytes as u64 * 8).sum()
    }

    /// Copy of the trace with timestamps shifted so the first packet is at 0.
    pub fn rebased(&self) -> Self {
        let t0 = self.packets.first().map_or(0.0, |p| p.timestamp);
        Self {
            packets: self
                .packets
                .iter()
                .map(|p| Packet {
                    timestamp: p.timestamp - t0,
                    ..*p
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedTrace {
    pub trace: TrafficTrace,
    /// Rows that arrived earlier than a preceding row and had to be sorted.
    pub out_of_order: usize,
}

/// Parse `timestamp_seconds,size_bytes` lines. Blank lines and lines starting
/// with `#` are skipped; a non-numeric first row is taken as a header.
pub fn parse_traffic_csv<R: Read>(reader: R, name: &Path) -> Result<LoadedTrace> {
    let mut packets = Vec::new();
    let mut out_of_order = 0;
    let mut latest = f64::NEG_INFINITY;
    let mut seen_row = false;
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(format!("reading {}", name.display()), e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: name.to_path_buf(),
            line: lineno,
            msg,
        };
        let mut fields = line.split(',').map(str::trim);
        let (Some(ts), Some(size), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(format!("expected 2 fields, got `{line}`")));
        };
        let first_row = !seen_row;
        seen_row = true;
        let timestamp: f64 = match ts.parse() {
            Ok(v) => v,
            Err(_) if first_row && ts.parse::<f64>().is_err() && size.parse::<f64>().is_err() => {
                continue;
            }
            Err(e) => return Err(parse_err(format!("bad timestamp `{ts}`: {e}"))),
        };
        if !timestamp.is_finite() {
            return Err(parse_err(format!("bad timestamp `{ts}`")));
        }
        let size_bytes: u32 = size
            .parse()
            .map_err(|e| parse_err(format!("bad size `{size}`: {e}")))?;
        if size_bytes == 0 {
            return Err(parse_err("packet size must be positive".into()));
        }
        if timestamp < latest {
            out_of_order += 1;
        }
        latest = latest.max(timestamp);
        packets.push(Packet {
            timestamp,
            size_bytes,
        });
    }
    if packets.is_empty() {
        return Err(Error::EmptyFile(name.to_path_buf()));
    }
    Ok(LoadedTrace {
        trace: TrafficTrace::new(packets)?,
        out_of_order,
    })
}

pub fn load_traffic_trace(path: &Path) -> Result<LoadedTrace> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    parse_traffic_csv(file, path)
}

/// Poisson packet arrivals at `rate` packets/s over `duration_s`, with sizes
/// uniform in `sizes` (inclusive).
pub fn poisson_trace(rate: f64, duration_s: f64, sizes: (u32, u32), seed: u64) -> Result<TrafficTrace> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::invalid("Poisson rate must be positive"));
    }
    if sizes.0 == 0 || sizes.0 > sizes.1 {
        return Err(Error::invalid("packet size range must be positive and ordered"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = Exp::new(rate).map_err(|e| Error::invalid(e.to_string()))?;
    let mut t = 0.0;
    let mut packets = Vec::new();
    loop {
        t += gap.sample(&mut rng);
        if t >= duration_s {
            break;
        }
        packets.push(Packet {
            timestamp: t,
            size_bytes: rng.random_range(sizes.0..=sizes.1),
        });
    }
    TrafficTrace::new(packets)
}
