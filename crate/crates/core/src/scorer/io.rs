//! Tensor CSV: a `#` metadata block, a `x,y,dir,value` header, then one
//! row per off-diagonal entry sorted by (x, y, direction).

use std::fmt::Write as _;
use std::path::Path;

use super::{DissimilarityTensor, ScorerKind, TensorMeta};
use crate::pairgen::Direction;
use crate::{Error, Result};

pub fn tensor_to_text(t: &DissimilarityTensor) -> String {
    let m = &t.meta;
    let mut out = String::new();
    let _ = writeln!(out, "# tool: {}", crate::TOOL_VERSION);
    let _ = writeln!(out, "# scorer: {}", m.scorer.name());
    let _ = writeln!(out, "# checkpoint: {}", m.checkpoint.as_deref().unwrap_or("-"));
    let _ = writeln!(out, "# seed: {}", m.seed.map_or("-".to_string(), |s| s.to_string()));
    let _ = writeln!(out, "# erosion_width: {}", m.erosion_width);
    let _ = writeln!(out, "# piece_size: {}", m.piece_size);
    let _ = writeln!(out, "# n: {}", t.n());
    out.push_str("x,y,dir,value\n");
    for x in 0..t.n() {
        for y in 0..t.n() {
            if x == y {
                continue;
            }
            for d in Direction::ALL {
                let _ = writeln!(out, "{x},{y},{},{}", d.name(), t.get(x, y, d));
            }
        }
    }
    out
}

pub fn tensor_from_text(text: &str) -> std::result::Result<DissimilarityTensor, String> {
    let mut fields = std::collections::BTreeMap::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((_, line)) = lines.peek() {
        let Some(meta) = line.strip_prefix('#') else { break };
        if let Some((k, v)) = meta.split_once(':') {
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        lines.next();
    }
    let field = |k: &str| fields.get(k).ok_or_else(|| format!("missing '# {k}:' header"));
    let n: usize = field("n")?.parse().map_err(|_| "bad n".to_string())?;
    let scorer = ScorerKind::parse(field("scorer")?).map_err(|e| e.to_string())?;
    let checkpoint = match field("checkpoint")?.as_str() {
        "-" => None,
        h => Some(h.to_string()),
    };
    let seed = match field("seed")?.as_str() {
        "-" => None,
        s => Some(s.parse().map_err(|_| format!("bad seed '{s}'"))?),
    };
    let erosion_width = field("erosion_width")?.parse().map_err(|_| "bad erosion_width".to_string())?;
    let piece_size = field("piece_size")?.parse().map_err(|_| "bad piece_size".to_string())?;
    match lines.next() {
        Some((_, "x,y,dir,value")) => {}
        _ => return Err("missing column header 'x,y,dir,value'".into()),
    }
    let meta = TensorMeta {
        scorer,
        checkpoint,
        seed,
        erosion_width,
        piece_size,
    };
    let mut t = DissimilarityTensor::filled(n, meta);
    let mut seen = vec![false; n * n * 4];
    let mut count = 0;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || format!("line {}: malformed row '{line}'", i + 1);
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(bad());
        }
        let x: usize = parts[0].parse().map_err(|_| bad())?;
        let y: usize = parts[1].parse().map_err(|_| bad())?;
        let d = Direction::parse(parts[2]).map_err(|_| bad())?;
        let v: f64 = parts[3].parse().map_err(|_| bad())?;
        if x >= n || y >= n || x == y {
            return Err(format!("line {}: entry ({x},{y}) out of range", i + 1));
        }
        let k = (x * n + y) * 4 + d.index();
        if seen[k] {
            return Err(format!("line {}: duplicate entry", i + 1));
        }
        seen[k] = true;
        t.values[k] = v;
        count += 1;
    }
    let expected = n * n.saturating_sub(1) * 4;
    if count != expected {
        return Err(format!("expected {expected} entries, found {count}"));
    }
    t.validate().map_err(|e| e.to_string())?;
    Ok(t)
}

pub fn save_tensor(t: &DissimilarityTensor, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, tensor_to_text(t)).map_err(|e| Error::io(path, e))
}

pub fn load_tensor(path: &Path) -> Result<DissimilarityTensor> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    tensor_from_text(&text).map_err(|e| Error::load(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::puzzle::Solution;
    use crate::scorer::oracle_dissimilarity;

    fn sample() -> DissimilarityTensor {
        let mut t = DissimilarityTensor::from_fn(
            3,
            TensorMeta {
                scorer: ScorerKind::Neural,
                checkpoint: Some("abcd".into()),
                seed: Some(42),
                erosion_width: 4,
                piece_size: 64,
            },
            |x, y, d| 0.1 + x as f64 / 3.0 + y as f64 * 1e-17 + d.index() as f64,
        );
        t.set_pair(0, 1, Direction::Right, 16.11809565095832);
        t
    }

    #[test]
    fn round_trip_is_lossless() {
        let t = sample();
        let text = tensor_to_text(&t);
        let back = tensor_from_text(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(tensor_to_text(&back), text);
        let o = oracle_dissimilarity(&Solution::identity(2, 3), 6).unwrap();
        assert_eq!(tensor_from_text(&tensor_to_text(&o)).unwrap(), o);
    }

    #[test]
    fn rows_sorted() {
        let text = tensor_to_text(&sample());
        let rows: Vec<(usize, usize, usize)> = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with('x'))
            .map(|l| {
                let p: Vec<&str> = l.split(',').collect();
                (p[0].parse().unwrap(), p[1].parse().unwrap(), Direction::parse(p[2]).unwrap().index())
            })
            .collect();
        let mut sorted = rows.clone();
        sorted.sort();
        assert_eq!(rows, sorted);
        assert!(text.contains("# tool: gapfill"));
    }

    #[test]
    fn truncated_or_malformed_fails() {
        let text = tensor_to_text(&sample());
        let cut: String = text.lines().take(text.lines().count() - 1).map(|l| format!("{l}\n")).collect();
        assert!(tensor_from_text(&cut).is_err());
        assert!(tensor_from_text(&text.replace("right", "sideways")).is_err());
        assert!(tensor_from_text("").is_err());
    }
}
