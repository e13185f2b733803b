//! Per-tick metrics log in comma-separated form.
//!
//! Columns, in order: `tick, phase, delta_deg, d_min, theta_t_deg, m_left,
//! m_right`, then the left joint angles `l1..l7` and the right joint angles
//! `r1..r7` (radians). Floats use the shortest representation that parses
//! back to the same value, so a log is reproducible byte for byte.

use std::io::Write;

use twistarm::task_engine::TaskEngine;

pub fn header(left_joints: usize, right_joints: usize) -> String {
    let mut cols: Vec<String> = ["tick", "phase", "delta_deg", "d_min", "theta_t_deg", "m_left", "m_right"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend((1..=left_joints).map(|i| format!("l{i}")));
    cols.extend((1..=right_joints).map(|i| format!("r{i}")));
    cols.join(",")
}

pub fn row(engine: &TaskEngine) -> String {
    let s = engine.state();
    let m = &s.metrics;
    let w = engine.world();
    let mut fields = vec![
        s.tick.to_string(),
        s.phase.as_str().to_string(),
        format!("{:?}", m.delta_deg),
        format!("{:?}", m.d_min),
        format!("{:?}", m.theta_t_deg),
        format!("{:?}", m.m_left),
        format!("{:?}", m.m_right),
    ];
    fields.extend(w.left.as_slice().iter().chain(w.right.as_slice()).map(|v| format!("{v:?}")));
    fields.join(",")
}

/// Collects rows in memory and optionally mirrors them to a writer.
#[derive(Debug, Clone)]
pub struct MetricsLog {
    lines: Vec<String>,
}

impl MetricsLog {
    pub fn new(engine: &TaskEngine) -> Self {
        let setup = engine.setup();
        Self {
            lines: vec![header(setup.left.joint_count(), setup.right.joint_count())],
        }
    }

    pub fn push(&mut self, engine: &TaskEngine) {
        self.lines.push(row(engine));
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        for line in &self.lines {
            writeln!(w, "{line}")?;
        }
        w.flush()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}
