use std::fmt::Write;
use std::path::Path;

use crate::geometry::Vec3;
use crate::mesh::TriangleMesh;

use super::{read_file, write_file, IoError};

/// Wavefront OBJ with `v x y z [r g b]` and 1-based `f a b c` lines.
pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for (k, v) in mesh.vertices.iter().enumerate() {
        write!(s, "v {:?} {:?} {:?}", v.x, v.y, v.z).unwrap();
        if let Some(c) = mesh.colors.as_ref().and_then(|c| c.get(k)) {
            write!(s, " {:?} {:?} {:?}", c[0] as f64 / 255.0, c[1] as f64 / 255.0, c[2] as f64 / 255.0).unwrap();
        }
        s.push('\n');
    }
    for t in &mesh.triangles {
        writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    s
}

pub fn save_obj(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<(), IoError> {
    write_file(path.as_ref(), write_obj(mesh).as_bytes())
}

pub fn load_obj(path: impl AsRef<Path>) -> Result<TriangleMesh, IoError> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|_| IoError::parse(path, None, None, "not UTF-8"))?;
    parse_obj(text, path)
}

/// Polygons are fan-triangulated; texture and normal indices are ignored.
pub fn parse_obj(text: &str, path: &Path) -> Result<TriangleMesh, IoError> {
    let mut vertices = Vec::new();
    let mut colors = Vec::new();
    let mut triangles = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let err = |m: String| IoError::parse(path, Some(k + 1), None, m);
        let mut t = line.split_whitespace();
        match t.next() {
            Some("v") => {
                let nums: Vec<f64> = t.map(|x| x.parse().map_err(|_| err(format!("bad number {x:?}")))).collect::<Result<_, _>>()?;
                if nums.len() != 3 && nums.len() != 6 {
                    return Err(err(format!("vertex needs 3 or 6 numbers, got {}", nums.len())));
                }
                vertices.push(Vec3::new(nums[0], nums[1], nums[2]));
                if nums.len() == 6 {
                    colors.push([0, 1, 2].map(|c| (nums[3 + c] * 255.0).round().clamp(0.0, 255.0) as u8));
                }
            }
            Some("f") => {
                let idx: Vec<u32> = t
                    .map(|x| {
                        let first = x.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|_| err(format!("bad face index {x:?}")))?;
                        let n = vertices.len() as i64;
                        let i = if i < 0 { n + i } else { i - 1 };
                        if i < 0 || i >= n {
                            return Err(err(format!("face index {x} out of range")));
                        }
                        Ok(i as u32)
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(err("face needs at least 3 vertices".into()));
                }
                for w in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[w], idx[w + 1]]);
                }
            }
            _ => {}
        }
    }
    if !colors.is_empty() && colors.len() != vertices.len() {
        return Err(IoError::parse(path, None, None, "colors given for only some vertices"));
    }
    let mut mesh = TriangleMesh::new(vertices, triangles);
    if !colors.is_empty() {
        mesh.colors = Some(colors);
    }
    Ok(mesh)
}
