//! Triangle-mesh ingestion: a small OBJ subset, a JSON schema, and
//! connected-component building segmentation.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    ObjSubset,
    Json,
}

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("non-triangular face at line {line} with fan triangulation disabled")]
    NonTriangularFace { line: usize },
}

/// Minimal triangle-area threshold; smaller triangles are dropped on load.
const MIN_TRIANGLE_AREA: f64 = 1e-9;

#[derive(Debug, Deserialize)]
struct JsonMesh {
    #[serde(default)]
    #[allow(dead_code)]
    schema_version: Option<u32>,
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
}

fn triangle_area(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Parse a mesh. The OBJ subset understands `v` and `f` records (`f` indices
/// may carry `/vt/vn` suffixes, which are ignored); polygonal faces are
/// fan-triangulated when `fan` is true and rejected otherwise. Degenerate
/// triangles below the area threshold are dropped with a warning.
pub fn load_mesh(
    source: impl Read,
    format: MeshFormat,
    fan: bool,
) -> Result<TriangleMesh, MeshError> {
    let mut mesh = match format {
        MeshFormat::Json => {
            let jm: JsonMesh = serde_json::from_reader(source)?;
            let vertices: Vec<Vector3<f64>> = jm
                .vertices
                .iter()
                .map(|v| Vector3::new(v[0], v[1], v[2]))
                .collect();
            for (k, t) in jm.triangles.iter().enumerate() {
                for &i in t {
                    if i >= vertices.len() {
                        return Err(MeshError::Parse {
                            line: k,
                            msg: format!("triangle index {i} out of range"),
                        });
                    }
                }
            }
            TriangleMesh {
                vertices,
                triangles: jm.triangles,
            }
        }
        MeshFormat::ObjSubset => parse_obj(source, fan)?,
    };
    let before = mesh.triangles.len();
    let verts = mesh.vertices.clone();
    mesh.triangles.retain(|t| {
        triangle_area(&verts[t[0]], &verts[t[1]], &verts[t[2]]) > MIN_TRIANGLE_AREA
    });
    if mesh.triangles.len() < before {
        log::warn!(
            "dropped {} degenerate triangle(s) on load",
            before - mesh.triangles.len()
        );
    }
    Ok(mesh)
}

fn parse_obj(source: impl Read, fan: bool) -> Result<TriangleMesh, MeshError> {
    let reader = BufReader::new(source);
    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    for (ln, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = ln + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut c = [0.0f64; 3];
                for x in c.iter_mut() {
                    let tok = it.next().ok_or_else(|| MeshError::Parse {
                        line: lineno,
                        msg: "vertex record needs three coordinates".into(),
                    })?;
                    *x = tok.parse().map_err(|e| MeshError::Parse {
                        line: lineno,
                        msg: format!("bad coordinate {tok:?}: {e}"),
                    })?;
                }
                vertices.push(Vector3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut idx: Vec<usize> = Vec::new();
                for tok in it {
                    let first = tok.split('/').next().unwrap_or(tok);
                    let i: i64 = first.parse().map_err(|e| MeshError::Parse {
                        line: lineno,
                        msg: format!("bad face index {tok:?}: {e}"),
                    })?;
                    let i = if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        i - 1
                    };
                    if i < 0 || i as usize >= vertices.len() {
                        return Err(MeshError::Parse {
                            line: lineno,
                            msg: format!("face index {tok} out of range"),
                        });
                    }
                    idx.push(i as usize);
                }
                if idx.len() < 3 {
                    return Err(MeshError::Parse {
                        line: lineno,
                        msg: "face needs at least three vertices".into(),
                    });
                }
                if idx.len() > 3 && !fan {
                    return Err(MeshError::NonTriangularFace { line: lineno });
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {} // other records (vn, vt, o, g, usemtl, ...) are ignored
        }
    }
    Ok(TriangleMesh {
        vertices,
        triangles,
    })
}

/// Split a mesh into connected components: triangles are adjacent when they
/// share a vertex, with vertices welded at `weld_tol` (meters). Every
/// triangle lands in exactly one output mesh.
pub fn segment_buildings(mesh: &TriangleMesh, weld_tol: f64) -> Vec<TriangleMesh> {
    let nv = mesh.vertices.len();
    if mesh.triangles.is_empty() {
        return Vec::new();
    }
    // Weld: map each vertex to a representative within weld_tol via a
    // uniform grid (checking neighbor cells).
    let cell = weld_tol.max(1e-12);
    let key = |v: &Vector3<f64>| -> (i64, i64, i64) {
        (
            (v.x / cell).floor() as i64,
            (v.y / cell).floor() as i64,
            (v.z / cell).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    let mut rep = vec![usize::MAX; nv];
    for (i, v) in mesh.vertices.iter().enumerate() {
        let (kx, ky, kz) = key(v);
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(cands) = grid.get(&(kx + dx, ky + dy, kz + dz)) {
                        for &j in cands {
                            if (mesh.vertices[j] - v).norm() <= weld_tol {
                                found = Some(rep[j]);
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        rep[i] = found.unwrap_or(i);
        grid.entry((kx, ky, kz)).or_default().push(i);
    }

    let mut uf: Vec<usize> = (0..nv).collect();
    fn find(uf: &mut Vec<usize>, mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    for t in &mesh.triangles {
        let r0 = find(&mut uf, rep[t[0]]);
        for &i in &t[1..] {
            let ri = find(&mut uf, rep[i]);
            uf[ri] = r0;
        }
    }

    let mut groups: HashMap<usize, Vec<[usize; 3]>> = HashMap::new();
    for t in &mesh.triangles {
        let r = find(&mut uf, rep[t[0]]);
        groups.entry(r).or_default().push(*t);
    }
    let mut keys: Vec<usize> = groups.keys().cloned().collect();
    keys.sort_unstable();
    keys.iter()
        .map(|k| {
            let tris = &groups[k];
            let mut local: HashMap<usize, usize> = HashMap::new();
            let mut vertices = Vec::new();
            let mut triangles = Vec::new();
            for t in tris {
                let mut lt = [0usize; 3];
                for (s, &i) in t.iter().enumerate() {
                    let li = *local.entry(i).or_insert_with(|| {
                        vertices.push(mesh.vertices[i]);
                        vertices.len() - 1
                    });
                    lt[s] = li;
                }
                triangles.push(lt);
            }
            TriangleMesh {
                vertices,
                triangles,
            }
        })
        .collect()
}

/// A closed axis-aligned box as 12 triangles, a convenient fixture shape.
pub fn box_mesh(min: Vector3<f64>, max: Vector3<f64>) -> TriangleMesh {
    let v = [
        Vector3::new(min.x, min.y, min.z),
        Vector3::new(max.x, min.y, min.z),
        Vector3::new(max.x, max.y, min.z),
        Vector3::new(min.x, max.y, min.z),
        Vector3::new(min.x, min.y, max.z),
        Vector3::new(max.x, min.y, max.z),
        Vector3::new(max.x, max.y, max.z),
        Vector3::new(min.x, max.y, max.z),
    ];
    let quads = [
        [0, 3, 2, 1], // bottom
        [4, 5, 6, 7], // top
        [0, 1, 5, 4],
        [1, 2, 6, 5],
        [2, 3, 7, 6],
        [3, 0, 4, 7],
    ];
    let mut triangles = Vec::new();
    for q in quads {
        triangles.push([q[0], q[1], q[2]]);
        triangles.push([q[0], q[2], q[3]]);
    }
    TriangleMesh {
        vertices: v.to_vec(),
        triangles,
    }
}
