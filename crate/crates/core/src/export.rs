//! Path network export as CSV rows or PLY polylines.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::paths::{Path as MinimalPath, PathNetwork, PathStatus};
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkFormat {
    Csv,
    Ply,
}

/// Columns `path_id,point_index,x,y,z,action`, paths in network order.
pub fn network_csv(net: &PathNetwork) -> String {
    let mut out = String::from("path_id,point_index,x,y,z,action\n");
    for (id, path) in net.paths.iter().enumerate() {
        for (k, (p, a)) in path.points.iter().zip(&path.actions).enumerate() {
            writeln!(out, "{id},{k},{},{},{},{}", p.x, p.y, p.z, a).unwrap();
        }
    }
    out
}

/// ASCII PLY with one vertex per path point and an edge per segment.
pub fn network_ply(net: &PathNetwork) -> String {
    let vertices = net.point_count();
    let edges: usize = net.paths.iter().map(|p| p.points.len().saturating_sub(1)).sum();
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    writeln!(out, "element vertex {vertices}").unwrap();
    out.push_str("property double x\nproperty double y\nproperty double z\nproperty double action\n");
    writeln!(out, "element edge {edges}").unwrap();
    out.push_str("property int vertex1\nproperty int vertex2\nend_header\n");
    for path in &net.paths {
        for (p, a) in path.points.iter().zip(&path.actions) {
            writeln!(out, "{} {} {} {}", p.x, p.y, p.z, a).unwrap();
        }
    }
    let mut base = 0usize;
    for path in &net.paths {
        for k in 1..path.points.len() {
            writeln!(out, "{} {}", base + k - 1, base + k).unwrap();
        }
        base += path.points.len();
    }
    out
}

pub fn export_network(net: &PathNetwork, format: NetworkFormat, path: &Path) -> Result<()> {
    if net.paths.is_empty() {
        return Err(Error::invalid("cannot export an empty network"));
    }
    let text = match format {
        NetworkFormat::Csv => network_csv(net),
        NetworkFormat::Ply => network_ply(net),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// Parse the CSV written by [`network_csv`]. Path status is not stored, so
/// paths come back as converged.
pub fn read_network_csv(path: &Path) -> Result<PathNetwork> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some("path_id,point_index,x,y,z,action") {
        return Err(Error::format(path, "missing network csv header"));
    }
    let mut paths: Vec<MinimalPath> = Vec::new();
    let mut offset = "path_id,point_index,x,y,z,action\n".len();
    for line in lines {
        let bad = |msg: &str| Error::format(path, format!("{msg} at byte offset {offset}"));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(bad("expected 6 columns"));
        }
        let id: usize = cols[0].parse().map_err(|_| bad("bad path_id"))?;
        let k: usize = cols[1].parse().map_err(|_| bad("bad point_index"))?;
        let mut v = [0.0; 4];
        for (slot, col) in v.iter_mut().zip(&cols[2..]) {
            *slot = col.parse().map_err(|_| bad("bad number"))?;
        }
        if id == paths.len() {
            paths.push(MinimalPath {
                points: Vec::new(),
                actions: Vec::new(),
                status: PathStatus::Converged,
            });
        }
        let Some(p) = paths.get_mut(id).filter(|p| p.points.len() == k) else {
            return Err(bad("rows out of order"));
        };
        p.points.push(Vec3::new(v[0], v[1], v[2]));
        p.actions.push(v[3]);
        offset += line.len() + 1;
    }
    Ok(PathNetwork::new(paths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{Path as MinPath, PathStatus};
    use crate::Vec3;

    fn two_paths() -> PathNetwork {
        let mk = |y: f64| MinPath {
            points: (0..3).map(|k| Vec3::new(k as f64, y, 0.5)).collect(),
            actions: vec![2.0, 1.0, 0.0],
            status: PathStatus::Converged,
        };
        PathNetwork::new(vec![mk(0.0), mk(1.0)])
    }

    #[test]
    fn csv_rows() {
        let csv = network_csv(&two_paths());
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0], "path_id,point_index,x,y,z,action");
        assert_eq!(lines[4], "1,0,0,1,0.5,2");
    }

    #[test]
    fn ply_counts() {
        let ply = network_ply(&two_paths());
        assert!(ply.contains("element vertex 6\n"));
        assert!(ply.contains("element edge 4\n"));
        let body: Vec<_> = ply.split("end_header\n").nth(1).unwrap().lines().collect();
        assert_eq!(body.len(), 10);
        assert_eq!(body[8], "3 4");
    }

    #[test]
    fn reexport_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let net = two_paths();
        for fmt in [NetworkFormat::Csv, NetworkFormat::Ply] {
            let a = dir.path().join("a");
            let b = dir.path().join("b");
            export_network(&net, fmt, &a).unwrap();
            export_network(&net, fmt, &b).unwrap();
            assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        }
        assert!(export_network(&PathNetwork::new(vec![]), NetworkFormat::Csv, &dir.path().join("c")).is_err());
    }

    #[test]
    fn csv_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("n.csv");
        let net = two_paths();
        export_network(&net, NetworkFormat::Csv, &p).unwrap();
        let back = read_network_csv(&p).unwrap();
        assert_eq!(back.paths, net.paths);
        fs::write(&p, "path_id,point_index,x,y,z,action\n0,1,0,0,0,0\n").unwrap();
        assert!(matches!(read_network_csv(&p), Err(Error::Format { .. })));
    }
}
