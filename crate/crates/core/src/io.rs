//! CSV serialization of experiment artifacts.
//!
//! Every table carries its provenance (tool version, resolved config, seed
//! layout) as `# key=value` header lines. Numbers render through Rust's
//! shortest-roundtrip formatter, so identical runs produce byte-identical
//! files.

use crate::trajectory::TrajectoryRecord;

/// A named tabular artifact.
#[derive(Debug, Clone)]
pub struct Table {
    /// File stem, e.g. "correlators_rx_rx".
    pub name: String,
    pub provenance: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.provenance {
            out.push_str(&format!("# {k}={v}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                out.push_str(&format_f64(*v));
                first = false;
            }
            out.push('\n');
        }
        out
    }
}

/// Shortest-roundtrip decimal rendering.
pub fn format_f64(v: f64) -> String {
    format!("{v}")
}

/// Trajectory dump with the columns `t,x,y,z,r_x,r_z`, decimated to the
/// record's state stride.
pub fn trajectory_table(rec: &TrajectoryRecord, name: &str) -> Table {
    let mut provenance = vec![
        ("seed".to_string(), rec.seed.to_string()),
        ("trajectory".to_string(), rec.trajectory_index.to_string()),
        ("dt".to_string(), format_f64(rec.dt)),
        ("tau_x".to_string(), format_f64(rec.readouts.tau_x)),
        ("tau_z".to_string(), format_f64(rec.readouts.tau_z)),
        ("scheme".to_string(), rec.scheme.label().to_string()),
    ];
    if rec.max_renorm_correction > 0.0 {
        provenance.push((
            "max_renorm_correction".to_string(),
            format_f64(rec.max_renorm_correction),
        ));
    }
    let stride = rec.record_stride;
    let rows = rec
        .states
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let k = j * stride;
            let t = k as f64 * rec.dt;
            let (r_x, r_z) = if k < rec.readouts.len() {
                (rec.readouts.r_x[k], rec.readouts.r_z[k])
            } else {
                (f64::NAN, f64::NAN)
            };
            vec![t, s.x, s.y, s.z, r_x, r_z]
        })
        .collect();
    Table {
        name: name.to_string(),
        provenance,
        columns: ["t", "x", "y", "z", "r_x", "r_z"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_and_determinism() {
        let t = Table {
            name: "demo".into(),
            provenance: vec![("seed".into(), "7".into())],
            columns: vec!["a".into(), "b".into()],
            rows: vec![vec![1.0, 0.5], vec![-0.25, 3.0]],
        };
        let csv = t.to_csv();
        assert_eq!(csv, "# seed=7\na,b\n1,0.5\n-0.25,3\n");
        assert_eq!(csv, t.to_csv());
    }
}
