//! Cycling-record CSV: one row per cycle, censored cycles leave
//! `first_switch_pulse` empty.

use std::io::{Read, Write};

use dwsnn_core::device::CyclingRecord;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const HEADER: [&str; 4] = [
    "voltage_V",
    "cycle_index",
    "first_switch_pulse",
    "max_pulses",
];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    #[serde(rename = "voltage_V")]
    voltage: f64,
    cycle_index: usize,
    first_switch_pulse: Option<u32>,
    max_pulses: u32,
}

pub fn write_records<W: Write>(out: W, records: &[CyclingRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    // Written explicitly so an empty record list still yields a header.
    w.write_record(HEADER).map_err(csv_err)?;
    for r in records {
        for (cycle_index, &first_switch_pulse) in r.first_switch_pulse.iter().enumerate() {
            w.serialize(Row {
                voltage: r.voltage,
                cycle_index,
                first_switch_pulse,
                max_pulses: r.max_pulses,
            })
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| CliError::Format(e.to_string()))
}

/// Parse rows and group consecutive voltages into records, in order of first
/// appearance.
pub fn read_records<R: Read>(input: R) -> Result<Vec<CyclingRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(input);
    let mut rows = rdr.records();
    match rows.next() {
        None => return Ok(Vec::new()),
        Some(h) => {
            let h = h.map_err(csv_err)?;
            if h.iter().map(str::trim).ne(HEADER) {
                return Err(CliError::Format(format!(
                    "cycling CSV header must be `{}`, found `{}`",
                    HEADER.join(","),
                    h.iter().collect::<Vec<_>>().join(",")
                )));
            }
        }
    }
    let headers = csv::StringRecord::from(HEADER.to_vec());
    let mut groups: Vec<(f64, u32, Vec<Option<u32>>)> = Vec::new();
    for (line, rec) in rows.enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row: Row = rec
            .deserialize(Some(&headers))
            .map_err(|e| CliError::Format(format!("cycling CSV row {}: {e}", line + 2)))?;
        let group = match groups.iter_mut().find(|g| g.0 == row.voltage) {
            Some(g) => {
                if g.1 != row.max_pulses {
                    return Err(CliError::Consistency(format!(
                        "row {}: max_pulses {} differs from {} earlier at {} V",
                        line + 2,
                        row.max_pulses,
                        g.1,
                        row.voltage
                    )));
                }
                g
            }
            None => {
                groups.push((row.voltage, row.max_pulses, Vec::new()));
                groups.last_mut().expect("just pushed")
            }
        };
        group.2.push(row.first_switch_pulse);
    }
    groups
        .into_iter()
        .map(|(v, max, pulses)| CyclingRecord::new(v, pulses, max).map_err(Into::into))
        .collect()
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Format(format!("cycling CSV: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_censoring() {
        let recs = vec![
            CyclingRecord::new(1.75, vec![Some(1), None, Some(3)], 5).unwrap(),
            CyclingRecord::new(1.9, vec![Some(2)], 5).unwrap(),
        ];
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "voltage_V,cycle_index,first_switch_pulse,max_pulses\n1.75,0,1,5\n1.75,1,,5\n"
        ));
        assert_eq!(read_records(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn empty_input_has_no_records() {
        assert!(read_records(&b""[..]).unwrap().is_empty());
        assert!(
            read_records(&b"voltage_V,cycle_index,first_switch_pulse,max_pulses\n"[..])
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn malformed_rows_are_rejected() {
        assert_eq!(
            read_records(&b"v,c,f,m\n"[..]).unwrap_err().class(),
            "format"
        );
        let bad = b"voltage_V,cycle_index,first_switch_pulse,max_pulses\n1.0,0,x,4\n";
        assert_eq!(read_records(&bad[..]).unwrap_err().class(), "format");
        let out_of_range = b"voltage_V,cycle_index,first_switch_pulse,max_pulses\n1.0,0,9,4\n";
        assert!(read_records(&out_of_range[..]).is_err());
    }
}
