use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::pgo::{Edge2, EdgeKind, Pose2, PoseGraph2};

/// A 2D pose graph read from a g2o file.
///
/// Each edge keeps its upper-triangular information entries
/// `[I11, I12, I13, I22, I23, I33]`. The isotropic weights of the residual are
/// `tau = (I11 + I22) / 2` and `kappa = I33`.
#[derive(Clone, Debug, PartialEq)]
pub struct G2oGraph2 {
    pub graph: PoseGraph2,
    pub information: Vec<[f64; 6]>,
    /// File ids of the vertices, in graph order.
    pub vertex_ids: Vec<i64>,
    /// Records of unknown type that were ignored.
    pub skipped_records: usize,
    pub source_path: Option<PathBuf>,
}

impl G2oGraph2 {
    /// Wrap a graph, deriving an isotropic information matrix for each edge.
    pub fn from_graph(graph: PoseGraph2) -> Self {
        let information = graph
            .edges
            .iter()
            .map(|e| [e.tau, 0.0, 0.0, e.tau, 0.0, e.kappa])
            .collect();
        let vertex_ids = (0..graph.vertices.len() as i64).collect();
        Self {
            graph,
            information,
            vertex_ids,
            skipped_records: 0,
            source_path: None,
        }
    }
}

fn information_matrix(i: &[f64; 6]) -> Matrix3<f64> {
    Matrix3::new(i[0], i[1], i[2], i[1], i[3], i[4], i[2], i[4], i[5])
}

pub fn read_g2o_2d(path: impl AsRef<Path>) -> Result<G2oGraph2> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut g = parse_g2o_2d(&text, path)?;
    g.source_path = Some(path.to_path_buf());
    Ok(g)
}

/// Parse `VERTEX_SE2` and `EDGE_SE2` records; `path` is used in errors only.
///
/// Vertices are stored in order of appearance. An edge `i -> j` is odometry
/// when `j = i + 1` (file ids) and a loop closure otherwise.
pub fn parse_g2o_2d(text: &str, path: &Path) -> Result<G2oGraph2> {
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut vertices = Vec::new();
    let mut vertex_ids = Vec::new();
    let mut index: HashMap<i64, usize> = HashMap::new();
    let mut raw_edges = Vec::new();
    let mut skipped = 0;

    for (k, line) in text.lines().enumerate() {
        let ln = k + 1;
        let mut tok = line.split_whitespace();
        let Some(tag) = tok.next() else { continue };
        if tag.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = tok.collect();
        let id = |s: &str| s.parse::<i64>().map_err(|_| perr(ln, format!("`{s}` is not an integer id")));
        let num = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| perr(ln, format!("`{s}` is not a finite number")))
        };
        match tag {
            "VERTEX_SE2" => {
                if fields.len() != 4 {
                    return Err(perr(ln, format!("VERTEX_SE2 needs 4 fields, found {}", fields.len())));
                }
                let v = id(fields[0])?;
                if index.insert(v, vertices.len()).is_some() {
                    return Err(perr(ln, format!("duplicate vertex id {v}")));
                }
                vertex_ids.push(v);
                vertices.push(Pose2::new(num(fields[1])?, num(fields[2])?, num(fields[3])?));
            }
            "EDGE_SE2" => {
                if fields.len() != 11 {
                    return Err(perr(ln, format!("EDGE_SE2 needs 11 fields, found {}", fields.len())));
                }
                let (i, j) = (id(fields[0])?, id(fields[1])?);
                let m = Pose2::new(num(fields[2])?, num(fields[3])?, num(fields[4])?);
                let mut info = [0.0; 6];
                for (slot, s) in info.iter_mut().zip(&fields[5..]) {
                    *slot = num(s)?;
                }
                let eig = SymmetricEigen::new(information_matrix(&info)).eigenvalues;
                let scale = eig.amax().max(1.0);
                if eig.min() < -1e-9 * scale {
                    return Err(perr(ln, "information matrix is not positive semidefinite".into()));
                }
                let tau = (info[0] + info[3]) / 2.0;
                let kappa = info[5];
                if !(tau > 0.0 && kappa > 0.0) {
                    return Err(perr(ln, "information matrix has a zero translational or rotational block".into()));
                }
                raw_edges.push((ln, i, j, m, info, kappa, tau));
            }
            _ => skipped += 1,
        }
    }

    let mut edges = Vec::with_capacity(raw_edges.len());
    let mut information = Vec::with_capacity(raw_edges.len());
    for (ln, i, j, measurement, info, kappa, tau) in raw_edges {
        let lookup = |v: i64| index.get(&v).copied().ok_or_else(|| perr(ln, format!("unknown vertex id {v}")));
        let (from, to) = (lookup(i)?, lookup(j)?);
        if from == to {
            return Err(perr(ln, format!("edge joins vertex {i} to itself")));
        }
        let kind = if j == i + 1 {
            EdgeKind::Odometry
        } else {
            EdgeKind::LoopClosure
        };
        edges.push(Edge2 {
            from,
            to,
            measurement,
            kappa,
            tau,
            kind,
        });
        information.push(info);
    }
    if vertices.is_empty() {
        return Err(perr(text.lines().count(), "no VERTEX_SE2 records".into()));
    }
    Ok(G2oGraph2 {
        graph: PoseGraph2 { vertices, edges },
        information,
        vertex_ids,
        skipped_records: skipped,
        source_path: None,
    })
}

/// Serialize a graph with its stored information entries.
pub fn format_g2o_2d(g: &G2oGraph2) -> String {
    let mut out = String::new();
    for (id, v) in g.vertex_ids.iter().zip(&g.graph.vertices) {
        out.push_str(&format!("VERTEX_SE2 {id} {} {} {}\n", v.x, v.y, v.theta));
    }
    for (e, info) in g.graph.edges.iter().zip(&g.information) {
        let m = e.measurement;
        out.push_str(&format!(
            "EDGE_SE2 {} {} {} {} {}",
            g.vertex_ids[e.from], g.vertex_ids[e.to], m.x, m.y, m.theta
        ));
        for v in info {
            out.push_str(&format!(" {v}"));
        }
        out.push('\n');
    }
    out
}

pub fn write_g2o_2d(path: impl AsRef<Path>, g: &G2oGraph2) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_g2o_2d(g)).map_err(|e| Error::io(path, e))
}
