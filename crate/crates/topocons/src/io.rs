//! Grid, mask, diagram and trace file formats.
//!
//! Grids and masks are PGM (`P2` or `P5`, maxval up to 65535) or headerless
//! CSV with one grid row per line. Diagrams are CSV with the header
//! `birth,death,birth_px,death_px,essential`.

use std::fs;
use std::path::Path;

use topocons_core::matching::Partner;
use topocons_core::trainer::StepRecord;
use topocons_core::{
    BinaryMask, DiagramMatching, Direction, GradientGrid, LikelihoodGrid, PersistenceDiagram, PersistentDot,
};

use crate::error::{Error, Result};
use crate::format::real;

pub const DIAGRAM_HEADER: &str = "birth,death,birth_px,death_px,essential";
pub const TRACE_HEADER: &str =
    "step,ramp_weight,pixel_loss,supervised_loss,cons_loss,rem_loss,signal_dots,noise_dots";

/// Raw samples of a PGM image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub height: usize,
    pub width: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_bytes(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a `P2` or `P5` PGM.
pub fn parse_pgm(bytes: &[u8], path: &Path) -> Result<Pgm> {
    let bad = |m: &str| Error::format(path, m);
    let mut pos = 0usize;
    let mut header = Vec::with_capacity(4);
    while header.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated PGM header"));
        }
        header.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("malformed PGM header"))?);
    }
    let binary = match header[0] {
        "P2" => false,
        "P5" => true,
        other => return Err(bad(&format!("unsupported magic number {other:?}, expected P2 or P5"))),
    };
    let parse_dim = |s: &str, what: &str| -> Result<usize> {
        match s.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(bad(&format!("invalid {what} {s:?} in PGM header"))),
        }
    };
    let width = parse_dim(header[1], "width")?;
    let height = parse_dim(header[2], "height")?;
    let maxval = match header[3].parse::<u32>() {
        Ok(v) if (1..=65535).contains(&v) => v as u16,
        _ => return Err(bad(&format!("invalid maxval {:?}, expected 1..=65535", header[3]))),
    };
    let count = width * height;
    let mut samples = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        let raster = bytes.get(pos..pos + need).ok_or_else(|| bad("truncated P5 raster"))?;
        if wide {
            samples.extend(raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])));
        } else {
            samples.extend(raster.iter().map(|&b| b as u16));
        }
    } else {
        let text = std::str::from_utf8(&bytes[pos..]).map_err(|_| bad("non-ASCII P2 raster"))?;
        for token in text.split_ascii_whitespace() {
            let v: u16 = token.parse().map_err(|_| bad(&format!("invalid sample {token:?}")))?;
            samples.push(v);
        }
        if samples.len() != count {
            return Err(bad(&format!("expected {count} samples, found {}", samples.len())));
        }
    }
    if let Some((i, &v)) = samples.iter().enumerate().find(|(_, &v)| v > maxval) {
        return Err(bad(&format!("sample {v} at pixel {i} exceeds maxval {maxval}")));
    }
    Ok(Pgm {
        height,
        width,
        maxval,
        samples,
    })
}

/// Renders a PGM; samples wider than a byte are stored big-endian.
pub fn render_pgm(pgm: &Pgm, binary: bool) -> Vec<u8> {
    let magic = if binary { "P5" } else { "P2" };
    let mut out = format!("{magic}\n{} {}\n{}\n", pgm.width, pgm.height, pgm.maxval).into_bytes();
    if binary {
        for &s in &pgm.samples {
            if pgm.maxval > 255 {
                out.extend_from_slice(&s.to_be_bytes());
            } else {
                out.push(s as u8);
            }
        }
    } else {
        for row in pgm.samples.chunks(pgm.width) {
            let line: Vec<String> = row.iter().map(|s| s.to_string()).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    }
    out
}

/// Parses a headerless CSV of reals into `(height, width, row-major values)`.
pub fn parse_csv_matrix(text: &str, path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut width = None;
    let mut values = Vec::new();
    let mut height = 0;
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cells = 0;
        for cell in line.split(',') {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| {
                Error::format(path, format!("line {}: invalid number {cell:?}", line_no + 1))
            })?;
            values.push(v);
            cells += 1;
        }
        match width {
            None => width = Some(cells),
            Some(w) if w != cells => {
                return Err(Error::format(
                    path,
                    format!("non-rectangular CSV: line {} has {cells} cells, expected {w}", line_no + 1),
                ))
            }
            Some(_) => {}
        }
        height += 1;
    }
    let width = width.ok_or_else(|| Error::format(path, "empty CSV"))?;
    Ok((height, width, values))
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// Loads a likelihood grid from PGM (samples divided by maxval) or CSV,
/// chosen by the `.pgm` extension.
pub fn load_grid(path: &Path) -> Result<LikelihoodGrid> {
    let (height, width, values) = if is_pgm(path) {
        let pgm = parse_pgm(&read_bytes(path)?, path)?;
        let m = pgm.maxval as f64;
        (pgm.height, pgm.width, pgm.samples.iter().map(|&s| s as f64 / m).collect())
    } else {
        parse_csv_matrix(&read_text(path)?, path)?
    };
    LikelihoodGrid::new(height, width, values)
        .map_err(|e| Error::data(format!("{}", path.display()), e))
}

/// Loads a mask from PGM or CSV; any nonzero sample is foreground.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let (height, width, bits) = if is_pgm(path) {
        let pgm = parse_pgm(&read_bytes(path)?, path)?;
        (pgm.height, pgm.width, pgm.samples.iter().map(|&s| s != 0).collect())
    } else {
        let (h, w, v) = parse_csv_matrix(&read_text(path)?, path)?;
        (h, w, v.iter().map(|&x| x != 0.0).collect())
    };
    BinaryMask::new(height, width, bits).map_err(|e| Error::data(format!("{}", path.display()), e))
}

pub fn grid_csv(height: usize, width: usize, values: &[f64]) -> String {
    debug_assert_eq!(values.len(), height * width);
    let mut out = String::new();
    for row in values.chunks(width) {
        let line: Vec<String> = row.iter().map(|&v| real(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn save_grid_csv(path: &Path, grid: &LikelihoodGrid) -> Result<()> {
    write_text(path, &grid_csv(grid.height(), grid.width(), grid.values()))
}

pub fn save_gradient_csv(path: &Path, gradient: &GradientGrid) -> Result<()> {
    write_text(path, &grid_csv(gradient.height, gradient.width, &gradient.partials))
}

/// Quantises a grid to a 16-bit `P5` PGM.
pub fn save_grid_pgm(path: &Path, grid: &LikelihoodGrid) -> Result<()> {
    let maxval = u16::MAX;
    let samples = grid
        .values()
        .iter()
        .map(|&v| (v * maxval as f64).round() as u16)
        .collect();
    let pgm = Pgm {
        height: grid.height(),
        width: grid.width(),
        maxval,
        samples,
    };
    write_bytes(path, &render_pgm(&pgm, true))
}

pub fn save_mask_pgm(path: &Path, mask: &BinaryMask) -> Result<()> {
    let pgm = Pgm {
        height: mask.height(),
        width: mask.width(),
        maxval: 255,
        samples: mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect(),
    };
    write_bytes(path, &render_pgm(&pgm, false))
}

pub fn diagram_csv(diagram: &PersistenceDiagram) -> String {
    let mut out = String::from(DIAGRAM_HEADER);
    out.push('\n');
    for dot in &diagram.dots {
        let death_px = dot.death_pixel.map(|p| p.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            real(dot.birth),
            real(dot.death),
            dot.birth_pixel,
            death_px,
            u8::from(dot.is_essential())
        ));
    }
    out
}

pub fn save_diagram(path: &Path, diagram: &PersistenceDiagram) -> Result<()> {
    write_text(path, &diagram_csv(diagram))
}

pub fn looks_like_diagram(text: &str) -> bool {
    text.lines().next().is_some_and(|l| l.trim() == DIAGRAM_HEADER)
}

/// Parses a diagram CSV. The direction is read off the dots: a dot dying
/// below its birth only occurs in superlevel diagrams.
pub fn parse_diagram(text: &str, path: &Path) -> Result<PersistenceDiagram> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == DIAGRAM_HEADER => {}
        _ => return Err(Error::format(path, format!("missing diagram header {DIAGRAM_HEADER:?}"))),
    }
    let mut dots = Vec::new();
    for (line_no, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: String| Error::format(path, format!("line {}: {m}", line_no + 1));
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 5 {
            return Err(bad(format!("expected 5 cells, found {}", cells.len())));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            match s.parse::<f64>() {
                Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
                _ => Err(bad(format!("invalid {what} {s:?}"))),
            }
        };
        let birth = num(cells[0], "birth")?;
        let death = num(cells[1], "death")?;
        let birth_pixel: usize = cells[2].parse().map_err(|_| bad(format!("invalid birth_px {:?}", cells[2])))?;
        let death_pixel = if cells[3].is_empty() {
            None
        } else {
            Some(cells[3].parse().map_err(|_| bad(format!("invalid death_px {:?}", cells[3])))?)
        };
        let essential = match cells[4] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(bad(format!("invalid essential flag {other:?}"))),
        };
        if essential != death_pixel.is_none() {
            return Err(bad("essential dots and only those must have an empty death_px".into()));
        }
        dots.push(PersistentDot {
            birth,
            death,
            birth_pixel,
            death_pixel,
        });
    }
    let direction = if dots.iter().any(|d| d.death < d.birth) {
        Direction::Superlevel
    } else {
        Direction::Sublevel
    };
    Ok(PersistenceDiagram::new(dots, direction, None))
}

pub fn load_diagram(path: &Path) -> Result<PersistenceDiagram> {
    parse_diagram(&read_text(path)?, path)
}

/// Either a diagram CSV, or a grid whose diagram is computed on demand.
pub enum DiagramSource {
    Diagram(PersistenceDiagram),
    Grid(LikelihoodGrid),
}

pub fn load_diagram_source(path: &Path) -> Result<DiagramSource> {
    if !is_pgm(path) {
        let text = read_text(path)?;
        if looks_like_diagram(&text) {
            return parse_diagram(&text, path).map(DiagramSource::Diagram);
        }
    }
    load_grid(path).map(DiagramSource::Grid)
}

/// `left_idx,right_idx` per pair with `-1` for the diagonal.
pub fn pairs_csv(matching: &DiagramMatching) -> String {
    let idx = |p: Partner| p.dot().map_or("-1".to_string(), |i| i.to_string());
    let mut out = String::from("left_idx,right_idx\n");
    for &(l, r) in &matching.pairs {
        out.push_str(&format!("{},{}\n", idx(l), idx(r)));
    }
    out
}

pub fn trace_csv(records: &[StepRecord]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.step,
            real(r.ramp_weight),
            real(r.pixel_loss),
            real(r.supervised_loss),
            real(r.cons_loss),
            real(r.rem_loss),
            r.signal_dots,
            r.noise_dots
        ));
    }
    out
}
