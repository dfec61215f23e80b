use std::io::Write;
use std::path::Path;

use crate::geometry::{UnitQuat, Vec3};
use crate::splat::{Gaussian2D, GaussianSet};

use super::{read_file, write_file, IoError};

const FIELDS: [&str; 20] = [
    "x", "y", "z", "rot_0", "rot_1", "rot_2", "rot_3", "scale_0", "scale_1", "opacity", "f_dc_0", "f_dc_1", "f_dc_2",
    "f_rest_0", "f_rest_1", "f_rest_2", "f_rest_3", "f_rest_4", "f_rest_5", "f_rest_6",
];
const EXTRA: [&str; 2] = ["f_rest_7", "f_rest_8"];

fn names() -> impl Iterator<Item = &'static str> {
    FIELDS.iter().chain(EXTRA.iter()).copied()
}

fn row(g: &Gaussian2D) -> [f64; 22] {
    let q = g.rotation.to_array();
    let r = g.sh_rest;
    [
        g.center.x, g.center.y, g.center.z, q[0], q[1], q[2], q[3], g.scale[0], g.scale[1], g.opacity, g.sh_dc[0],
        g.sh_dc[1], g.sh_dc[2], r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
    ]
}

/// Binary little-endian PLY, one `double` property per parameter.
pub fn write_ply(set: &GaussianSet) -> Vec<u8> {
    let mut out = Vec::new();
    write!(out, "ply\nformat binary_little_endian 1.0\ncomment sh_degree {}\nelement vertex {}\n", set.sh_degree, set.len()).unwrap();
    for n in names() {
        writeln!(out, "property double {n}").unwrap();
    }
    out.extend_from_slice(b"end_header\n");
    for g in set.iter() {
        for v in row(g) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_ply(path: impl AsRef<Path>, set: &GaussianSet) -> Result<(), IoError> {
    write_file(path.as_ref(), &write_ply(set))
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<GaussianSet, IoError> {
    let path = path.as_ref();
    read_ply(&read_file(path)?, path)
}

/// Parse a splat PLY. Properties may be `float` or `double` in any order;
/// unknown properties are skipped and missing `f_rest_*` read as zero.
pub fn read_ply(bytes: &[u8], path: &Path) -> Result<GaussianSet, IoError> {
    let err = |line: usize, m: String| IoError::parse(path, Some(line), None, m);
    let mut pos = 0;
    let mut lines = Vec::new();
    loop {
        let end = bytes[pos..].iter().position(|b| *b == b'\n').ok_or_else(|| err(lines.len() + 1, "missing end_header".into()))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| err(lines.len() + 1, "header is not UTF-8".into()))?;
        pos += end + 1;
        let line = line.trim_end_matches('\r').to_string();
        let done = line == "end_header";
        lines.push(line);
        if done {
            break;
        }
    }
    if lines.first().map(String::as_str) != Some("ply") {
        return Err(err(1, "not a PLY file".into()));
    }
    let mut count = None;
    let mut sh_degree = 1u8;
    let mut props: Vec<(String, usize)> = Vec::new();
    let mut in_vertex = false;
    for (k, line) in lines.iter().enumerate().skip(1) {
        let ln = k + 1;
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["format", "binary_little_endian", "1.0"] => {}
            ["format", other, ..] => return Err(err(ln, format!("unsupported format {other}"))),
            ["comment", "sh_degree", d] => sh_degree = d.parse().map_err(|_| err(ln, format!("bad sh_degree {d}")))?,
            ["comment", ..] | ["obj_info", ..] | ["end_header"] => {}
            ["element", "vertex", n] => {
                count = Some(n.parse::<usize>().map_err(|_| err(ln, format!("bad vertex count {n}")))?);
                in_vertex = true;
            }
            ["element", ..] => {
                if count.is_some() {
                    in_vertex = false;
                } else {
                    return Err(err(ln, "elements before vertex are not supported".into()));
                }
            }
            ["property", ty, name] if in_vertex => {
                let size = match *ty {
                    "double" | "float64" => 8,
                    "float" | "float32" => 4,
                    _ => return Err(err(ln, format!("property {name}: unsupported type {ty}"))),
                };
                props.push((name.to_string(), size));
            }
            ["property", ..] => {}
            _ => return Err(err(ln, format!("unexpected header line {line:?}"))),
        }
    }
    let count = count.ok_or_else(|| err(lines.len(), "no vertex element".into()))?;
    let stride: usize = props.iter().map(|p| p.1).sum();
    let mut slot = [None; 22];
    let mut offset = 0;
    for (name, size) in &props {
        if let Some(k) = names().position(|n| n == name) {
            slot[k] = Some((offset, *size));
        }
        offset += size;
    }
    if let Some(k) = (0..10).find(|k| slot[*k].is_none()) {
        return Err(err(lines.len(), format!("missing property {}", names().nth(k).unwrap())));
    }
    let data = &bytes[pos..];
    if data.len() < stride * count {
        return Err(IoError::parse(path, None, None, format!("expected {count} vertices, file is truncated")));
    }
    let mut gaussians = Vec::with_capacity(count);
    for i in 0..count {
        let rec = &data[i * stride..(i + 1) * stride];
        let mut v = [0.0f64; 22];
        for (k, s) in slot.iter().enumerate() {
            if let Some((o, size)) = *s {
                v[k] = if size == 8 {
                    f64::from_le_bytes(rec[o..o + 8].try_into().unwrap())
                } else {
                    f32::from_le_bytes(rec[o..o + 4].try_into().unwrap()) as f64
                };
            }
        }
        let rotation = UnitQuat::try_new(v[3], v[4], v[5], v[6])
            .ok_or_else(|| IoError::parse(path, None, Some(format!("vertex[{i}].rot")), "quaternion has zero norm"))?;
        gaussians.push(Gaussian2D {
            center: Vec3::new(v[0], v[1], v[2]),
            rotation,
            scale: [v[7], v[8]],
            opacity: v[9],
            sh_dc: [v[10], v[11], v[12]],
            sh_rest: [[v[13], v[14], v[15]], [v[16], v[17], v[18]], [v[19], v[20], v[21]]],
        });
    }
    Ok(GaussianSet::with_degree(gaussians, sh_degree))
}
