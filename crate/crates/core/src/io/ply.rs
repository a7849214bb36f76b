use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PlyCloud {
    pub points: Vec<Vector3<f64>>,
    pub source_path: Option<PathBuf>,
    /// Vertex count announced in the header.
    pub original_count: usize,
}

struct Element {
    name: String,
    count: usize,
    properties: Vec<String>,
    has_list: bool,
}

const SCALAR_TYPES: [&str; 16] = [
    "char", "uchar", "short", "ushort", "int", "uint", "float", "double", "int8", "uint8", "int16", "uint16",
    "int32", "uint32", "float32", "float64",
];

/// Read the vertices of an ASCII PLY file. Faces and extra vertex properties
/// are ignored; binary encodings are rejected.
pub fn read_ply(path: impl AsRef<Path>) -> Result<PlyCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cloud = parse_ply(&bytes, path)?;
    cloud.source_path = Some(path.to_path_buf());
    Ok(cloud)
}

/// Parse PLY bytes; `path` is only used in error messages.
pub fn parse_ply(bytes: &[u8], path: &Path) -> Result<PlyCloud> {
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut elements: Vec<Element> = Vec::new();
    let mut offset = 0;
    let mut line_no = 0;
    let mut saw_magic = false;
    let mut saw_format = false;
    loop {
        let rest = &bytes[offset..];
        if rest.is_empty() {
            return Err(perr(line_no, "header ended without `end_header`".into()));
        }
        let end = rest.iter().position(|b| *b == b'\n').map_or(rest.len(), |p| p + 1);
        let line = String::from_utf8_lossy(&rest[..end]);
        offset += end;
        line_no += 1;
        let mut tok = line.split_whitespace();
        let Some(key) = tok.next() else { continue };
        if !saw_magic {
            if key != "ply" {
                return Err(perr(line_no, "missing `ply` magic line".into()));
            }
            saw_magic = true;
            continue;
        }
        match key {
            "format" => {
                let fmt = tok.next().unwrap_or("");
                if fmt.starts_with("binary") {
                    return Err(Error::Unsupported {
                        path: path.to_path_buf(),
                        message: format!("`{fmt}` PLY is not supported, only ASCII PLY can be read"),
                    });
                }
                if fmt != "ascii" {
                    return Err(perr(line_no, format!("unknown PLY format `{fmt}`")));
                }
                saw_format = true;
            }
            "comment" | "obj_info" => {}
            "element" => {
                let name = tok.next().ok_or_else(|| perr(line_no, "element without a name".into()))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| perr(line_no, "element count is not a nonnegative integer".into()))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                    has_list: false,
                });
            }
            "property" => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| perr(line_no, "property before any element".into()))?;
                let words: Vec<&str> = tok.collect();
                match words.as_slice() {
                    ["list", _, _, name] => {
                        el.has_list = true;
                        el.properties.push(name.to_string());
                    }
                    [ty, name] if SCALAR_TYPES.contains(ty) => el.properties.push(name.to_string()),
                    _ => return Err(perr(line_no, format!("malformed property line `{}`", line.trim()))),
                }
            }
            "end_header" => break,
            other => return Err(perr(line_no, format!("unexpected header keyword `{other}`"))),
        }
    }
    if !saw_format {
        return Err(perr(line_no, "missing `format` line".into()));
    }
    let vertex = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| perr(line_no, "no `vertex` element".into()))?;
    let el = &elements[vertex];
    if el.has_list {
        return Err(perr(line_no, "list properties on vertices are not supported".into()));
    }
    let idx = |axis: &str| {
        el.properties
            .iter()
            .position(|p| p == axis)
            .ok_or_else(|| perr(line_no, format!("vertex element has no `{axis}` property")))
    };
    let (ix, iy, iz) = (idx("x")?, idx("y")?, idx("z")?);

    let body = std::str::from_utf8(&bytes[offset..]).map_err(|_| perr(line_no + 1, "body is not valid text".into()))?;
    let mut lines = body
        .lines()
        .enumerate()
        .map(|(k, l)| (line_no + 1 + k, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let mut points = Vec::with_capacity(el.count);
    for (k, element) in elements.iter().enumerate() {
        for item in 0..element.count {
            let Some((ln, text)) = lines.next() else {
                return Err(perr(
                    line_no + body.lines().count(),
                    format!(
                        "truncated body: `{}` element {item} of {} is missing",
                        element.name, element.count
                    ),
                ));
            };
            if k != vertex {
                continue;
            }
            let values: Vec<&str> = text.split_whitespace().collect();
            if values.len() != el.properties.len() {
                return Err(perr(
                    ln,
                    format!("expected {} vertex values, found {}", el.properties.len(), values.len()),
                ));
            }
            let num = |i: usize| -> Result<f64> {
                values[i]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| perr(ln, format!("`{}` is not a finite number", values[i])))
            };
            points.push(Vector3::new(num(ix)?, num(iy)?, num(iz)?));
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(perr(ln, "data after the last declared element".into()));
    }
    if points.is_empty() {
        return Err(perr(line_no, "PLY file has no vertices".into()));
    }
    Ok(PlyCloud {
        original_count: points.len(),
        points,
        source_path: None,
    })
}

/// Write points as an ASCII PLY vertex list.
pub fn write_ply(path: impl AsRef<Path>, points: &[Vector3<f64>]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", points.len()));
    out.push_str("property double x\nproperty double y\nproperty double z\nend_header\n");
    for p in points {
        out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

/// Pick `m` distinct points uniformly at random, then center their bounding
/// box at the origin and scale uniformly so its longest side spans
/// `[-half_width, half_width]`.
pub fn downsample_and_box<R: Rng + ?Sized>(
    cloud: &[Vector3<f64>],
    m: usize,
    half_width: f64,
    rng: &mut R,
) -> Result<Vec<Vector3<f64>>> {
    if m == 0 || m > cloud.len() {
        return Err(Error::invalid(format!("cannot pick {m} of {} points", cloud.len())));
    }
    if !(half_width > 0.0) {
        return Err(Error::invalid("box half width must be positive"));
    }
    let picked: Vec<Vector3<f64>> = sample(rng, cloud.len(), m).into_iter().map(|i| cloud[i]).collect();
    let mut lo = picked[0];
    let mut hi = picked[0];
    for p in &picked {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let center = (lo + hi) / 2.0;
    let extent = (hi - lo).max() / 2.0;
    if !(extent > 0.0) {
        return Err(Error::DegenerateGeometry("selected points coincide".into()));
    }
    let scale = half_width / extent;
    Ok(picked
        .iter()
        .map(|p| ((p - center) * scale).map(|c| c.clamp(-half_width, half_width)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn parse(text: &str) -> Result<PlyCloud> {
        parse_ply(text.as_bytes(), Path::new("mem.ply"))
    }

    const THREE: &str = "ply\nformat ascii 1.0\ncomment tiny\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 2 3\n-1.5 0.25 4e-1\n";

    #[test]
    fn three_points() {
        let c = parse(THREE).unwrap();
        assert_eq!(c.points, vec![Vector3::zeros(), Vector3::new(1.0, 2.0, 3.0), Vector3::new(-1.5, 0.25, 0.4)]);
        assert_eq!(c.original_count, 3);
    }

    #[test]
    fn faces_and_extra_properties_are_skipped() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float32 x\nproperty float32 y\nproperty float32 confidence\nproperty float32 z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n1 2 0.9 3\n4 5 0.1 6\n3 0 1 1\n";
        let c = parse(text).unwrap();
        assert_eq!(c.points, vec![Vector3::new(1.0, 2.0, 3.0), Vector3::new(4.0, 5.0, 6.0)]);
    }

    #[test]
    fn truncation_binary_and_malformed_headers() {
        let short = THREE.replace("-1.5 0.25 4e-1\n", "");
        assert!(matches!(parse(&short), Err(Error::Parse { .. })));
        let binary = THREE.replace("ascii", "binary_little_endian");
        let err = parse(&binary).unwrap_err();
        assert!(matches!(err, Error::Unsupported { .. }));
        assert!(err.to_string().contains("ASCII"));
        assert!(parse("plx\n").is_err());
        assert!(parse(&THREE.replace("end_header\n", "")).is_err());
        assert!(parse(&THREE.replace("1 2 3", "1 two 3")).is_err());
        assert!(parse(&THREE.replace("property float z\n", "")).is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn write_read_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        let pts = vec![Vector3::new(0.1, -2.0, 1.0 / 3.0), Vector3::new(5.0, 6.0, 7.0)];
        write_ply(&path, &pts).unwrap();
        let back = read_ply(&path).unwrap();
        assert_eq!(back.points, pts);
        assert_eq!(back.source_path.as_deref(), Some(path.as_path()));
        assert!(matches!(read_ply(dir.path().join("missing.ply")), Err(Error::Io { .. })));
    }

    #[test]
    fn downsample_box_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cloud: Vec<_> = (0..200)
            .map(|_| Vector3::new(rng.random::<f64>() * 10.0, rng.random::<f64>() * 3.0 - 50.0, rng.random::<f64>()))
            .collect();
        let a = downsample_and_box(&cloud, 100, 0.5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = downsample_and_box(&cloud, 100, 0.5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        assert!(a.iter().all(|p| p.amax() <= 0.5));
        let all = downsample_and_box(&cloud, 200, 0.5, &mut rng).unwrap();
        assert_eq!(all.len(), 200);
        assert!(downsample_and_box(&cloud, 201, 0.5, &mut rng).is_err());
    }
}
