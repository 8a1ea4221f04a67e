//! Weight matrices as CSV: one row per postsynaptic neuron, one column per
//! slot, header row of slot indices. Absent synapses are empty cells.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::Topology;
use crate::error::{Error, Result};

pub fn write_weights_csv<W: Write>(mut out: W, topology: &Topology, weights: &[f64]) -> Result<()> {
    let slots = topology.n_slots();
    let header: Vec<String> = (0..slots).map(|s| s.to_string()).collect();
    writeln!(out, "{}", header.join(","))?;
    let mut line = String::new();
    for post in 0..topology.n {
        line.clear();
        let mut row = vec![None; slots];
        for (k, syn) in topology.range_of(post).zip(topology.synapses_of(post)) {
            row[syn.slot as usize] = Some(weights[k]);
        }
        for (s, cell) in row.iter().enumerate() {
            if s > 0 {
                line.push(',');
            }
            if let Some(v) = cell {
                let _ = write!(line, "{v}");
            }
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads a matrix written by [`write_weights_csv`] back onto `topology`.
pub fn read_weights_csv<R: BufRead>(input: R, topology: &Topology) -> Result<Vec<f64>> {
    let mut weights = vec![0.0; topology.n_synapses()];
    let mut lines = input.lines();
    let header = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty weight file".into(),
    })??;
    if header.split(',').count() != topology.n_slots() {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected {} slot columns", topology.n_slots()),
        });
    }
    let mut post = 0;
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        if post >= topology.n {
            return Err(Error::Parse {
                line: idx + 2,
                msg: "more rows than neurons".into(),
            });
        }
        for (slot, cell) in line.split(',').enumerate() {
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line: idx + 2,
                msg: format!("bad weight `{cell}`"),
            })?;
            let k = topology.find(post, slot).ok_or_else(|| Error::Parse {
                line: idx + 2,
                msg: format!("no synapse at slot {slot} of neuron {post}"),
            })?;
            weights[k] = v;
        }
        post += 1;
    }
    if post != topology.n {
        return Err(Error::Parse {
            line: post + 1,
            msg: format!("expected {} rows, found {post}", topology.n),
        });
    }
    Ok(weights)
}
