//! Trajectory CSV files.
//!
//! Row `n` holds `x_n`, the step `hat_h_n` that leaves it, the perturbation
//! `u_n` that produced it and whether `hat_h_n` was frozen. The last row has
//! no outgoing step, so its `h_applied` and `frozen` cells are empty. Floats
//! use the shortest decimal that parses back to the same double. Comment rows
//! starting with `#` follow the data.

use std::io::{self, Write};

use cubic_core::dynamics::Step;

pub const HEADER: [&str; 5] = ["n", "x", "h_applied", "u", "frozen"];

/// Which rows a writer keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Thinning {
    All,
    /// Every row up to `dense`, then about `per_decade` log-spaced rows per
    /// decade. The last row is always kept.
    LogSpaced {
        dense: u64,
        per_decade: u32,
    },
}

impl Thinning {
    fn keeps(self, n: u64, next_mark: &mut f64) -> bool {
        match self {
            Thinning::All => true,
            Thinning::LogSpaced { dense, per_decade } => {
                if n <= dense {
                    return true;
                }
                if (n as f64) < *next_mark {
                    return false;
                }
                let ratio = 10f64.powf(1.0 / per_decade as f64);
                while *next_mark <= n as f64 {
                    *next_mark = (*next_mark * ratio).max(*next_mark + 1.0);
                }
                true
            }
        }
    }

    pub fn describe(self) -> String {
        match self {
            Thinning::All => "all".into(),
            Thinning::LogSpaced { dense, per_decade } => {
                format!("log(dense={dense},per_decade={per_decade})")
            }
        }
    }
}

pub fn fmt_f64(v: f64) -> String {
    let mut buf = ryu::Buffer::new();
    let s = buf.format(v);
    s.strip_suffix(".0").unwrap_or(s).to_string()
}

struct Pending {
    n: u64,
    x: f64,
    u: f64,
}

/// Streams steps of one run into CSV rows.
pub struct TrajectoryWriter<W: Write> {
    out: csv::Writer<W>,
    thinning: Thinning,
    next_mark: f64,
    pending: Pending,
}

impl<W: Write> TrajectoryWriter<W> {
    /// Starts a file whose first state is `x0` at index `origin`.
    pub fn new(sink: W, origin: u64, x0: f64, thinning: Thinning) -> io::Result<Self> {
        let mut out = csv::Writer::from_writer(sink);
        out.write_record(HEADER)?;
        let next_mark = match thinning {
            Thinning::All => 0.0,
            Thinning::LogSpaced { dense, .. } => (dense + 1) as f64,
        };
        Ok(Self { out, thinning, next_mark, pending: Pending { n: origin, x: x0, u: 0.0 } })
    }

    pub fn push(&mut self, step: &Step) -> io::Result<()> {
        let p = &self.pending;
        if self.thinning.keeps(p.n, &mut self.next_mark) {
            let (n, x, u) = (p.n, p.x, p.u);
            self.row(n, x, Some((step.h_applied, step.frozen)), u)?;
        }
        self.pending = Pending { n: step.n, x: step.x, u: step.u };
        Ok(())
    }

    fn row(&mut self, n: u64, x: f64, next: Option<(f64, bool)>, u: f64) -> io::Result<()> {
        let (h, frozen) = match next {
            Some((h, f)) => (fmt_f64(h), if f { "1" } else { "0" }.to_string()),
            None => (String::new(), String::new()),
        };
        self.out.write_record([n.to_string(), fmt_f64(x), h, fmt_f64(u), frozen])?;
        Ok(())
    }

    /// Writes the last row, then one `# key=value` row per footer entry.
    pub fn finish(mut self, footer: &[String]) -> io::Result<W> {
        let Pending { n, x, u } = self.pending;
        self.row(n, x, None, u)?;
        let mut sink = self.out.into_inner().map_err(|e| e.into_error())?;
        for line in footer {
            writeln!(sink, "# {line}")?;
        }
        sink.flush()?;
        Ok(sink)
    }
}

/// One data row read back from a trajectory file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub n: u64,
    pub x: f64,
    pub h_applied: Option<f64>,
    pub u: f64,
    pub frozen: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryFile {
    pub rows: Vec<Row>,
    /// Comment rows without the leading `# `.
    pub comments: Vec<String>,
}

impl TrajectoryFile {
    pub fn diverged_at(&self) -> Option<u64> {
        self.comments.iter().find_map(|c| c.strip_prefix("diverged_at=")?.parse().ok())
    }
}

pub fn read_trajectory(text: &str) -> Result<TrajectoryFile, String> {
    let comments =
        text.lines().filter_map(|l| l.strip_prefix('#')).map(|l| l.trim_start().to_string()).collect();
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(HEADER) {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record.map_err(|e| e.to_string())?;
        let num = |i: usize| r[i].parse::<f64>().map_err(|e| format!("column {}: {e}", HEADER[i]));
        rows.push(Row {
            n: r[0].parse().map_err(|e| format!("column n: {e}"))?,
            x: num(1)?,
            h_applied: if r[2].is_empty() { None } else { Some(num(2)?) },
            u: num(3)?,
            frozen: match &r[4] {
                "" => None,
                "0" => Some(false),
                "1" => Some(true),
                other => return Err(format!("column frozen: `{other}`")),
            },
        });
    }
    Ok(TrajectoryFile { rows, comments })
}
