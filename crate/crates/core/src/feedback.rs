use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game_model::GameSpec;

/// Markov feedback on a lattice: `(cell, node) -> (u_idx, v_idx)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FeedbackTable {
    cells: usize,
    nodes: usize,
    table: Vec<(usize, usize)>,
}

impl FeedbackTable {
    pub fn constant(cells: usize, nodes: usize, u_idx: usize, v_idx: usize) -> Self {
        Self {
            cells,
            nodes,
            table: vec![(u_idx, v_idx); cells * nodes],
        }
    }

    pub fn from_fn(cells: usize, nodes: usize, mut f: impl FnMut(usize, usize) -> (usize, usize)) -> Self {
        let mut table = Vec::with_capacity(cells * nodes);
        for i in 0..cells {
            for k in 0..nodes {
                table.push(f(i, k));
            }
        }
        Self { cells, nodes, table }
    }

    pub fn from_rows(rows: Vec<Vec<(usize, usize)>>) -> Result<Self> {
        let cells = rows.len();
        let nodes = rows.first().map_or(0, Vec::len);
        if cells == 0 || nodes == 0 || rows.iter().any(|r| r.len() != nodes) {
            return Err(Error::Usage("feedback rows must be nonempty and rectangular".into()));
        }
        Ok(Self {
            cells,
            nodes,
            table: rows.into_iter().flatten().collect(),
        })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    #[inline]
    pub fn get(&self, cell: usize, node: usize) -> (usize, usize) {
        self.table[cell * self.nodes + node]
    }

    pub fn set(&mut self, cell: usize, node: usize, pair: (usize, usize)) {
        self.table[cell * self.nodes + node] = pair;
    }

    pub fn row(&self, cell: usize) -> &[(usize, usize)] {
        &self.table[cell * self.nodes..(cell + 1) * self.nodes]
    }

    /// Checks shape against a lattice and indices against the control sets.
    pub fn check(&self, spec: &GameSpec, cells: usize, nodes: usize) -> Result<()> {
        if self.cells != cells || self.nodes != nodes {
            return Err(Error::GridMismatch(format!(
                "feedback covers {}x{} (cells x nodes), lattice is {cells}x{nodes}",
                self.cells, self.nodes
            )));
        }
        if let Some(&(u, v)) = self.table.iter().find(|(u, v)| *u >= spec.u().len() || *v >= spec.v().len()) {
            return Err(Error::Usage(format!("feedback refers to control pair ({u}, {v}) outside U x V")));
        }
        Ok(())
    }
}

impl FeedbackTable {
    /// Columns `cell, node, u, v` with control labels.
    pub fn write_csv<W: Write>(&self, spec: &GameSpec, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cell", "node", "u", "v"])?;
        for i in 0..self.cells {
            for k in 0..self.nodes {
                let (u, v) = self.get(i, k);
                w.write_record([i.to_string(), k.to_string(), spec.u().label(u).into(), spec.v().label(v).into()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`FeedbackTable::write_csv`].
    pub fn read_csv<R: Read>(spec: &GameSpec, cells: usize, nodes: usize, input: R) -> Result<Self> {
        let mut table = vec![None; cells * nodes];
        let mut r = csv::Reader::from_reader(input);
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::Usage(format!("controls file row {}: {what}", line + 2));
            if rec.len() != 4 {
                return Err(bad("expected 4 columns"));
            }
            let i: usize = rec[0].parse().map_err(|_| bad("bad cell index"))?;
            let k: usize = rec[1].parse().map_err(|_| bad("bad node index"))?;
            if i >= cells || k >= nodes {
                return Err(bad("cell or node outside the lattice"));
            }
            let u = spec.u().index_of(&rec[2]).ok_or_else(|| bad("unknown u label"))?;
            let v = spec.v().index_of(&rec[3]).ok_or_else(|| bad("unknown v label"))?;
            table[i * nodes + k] = Some((u, v));
        }
        let table: Option<Vec<_>> = table.into_iter().collect();
        let table = table.ok_or_else(|| Error::Usage("controls file does not cover every (cell, node)".into()))?;
        Ok(Self { cells, nodes, table })
    }
}
