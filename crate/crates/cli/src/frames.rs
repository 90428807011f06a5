//! Binary PGM (P5) frame stacks.
//!
//! A stack of `f` frames of `w × h` pixels becomes a `(w·h) × f` matrix with
//! one row-major frame per column and intensities scaled to `[0, 1]`. Frames
//! are ordered lexicographically by file name.

use std::fs;
use std::path::{Path, PathBuf};

use sorsvd::{Error, Matrix, Result};

/// One decoded grayscale image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub pixels: Vec<u16>,
}

impl Pgm {
    pub fn new(width: usize, height: usize, maxval: u16, pixels: Vec<u16>) -> Result<Self> {
        if maxval == 0 {
            return Err(Error::Format("PGM maxval must be positive".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::Format(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if let Some(p) = pixels.iter().find(|&&p| p > maxval) {
            return Err(Error::Format(format!("pixel {p} exceeds maxval {maxval}")));
        }
        Ok(Self { width, height, maxval, pixels })
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let magic = header_token(bytes, &mut pos)?;
        if magic != "P5" {
            return Err(Error::Format(format!("unsupported PGM variant {magic:?}, only binary P5 is read")));
        }
        let width = header_number(bytes, &mut pos, "width")?;
        let height = header_number(bytes, &mut pos, "height")?;
        let maxval = header_number(bytes, &mut pos, "maxval")?;
        if maxval == 0 || maxval > u16::MAX as usize {
            return Err(Error::Format(format!("PGM maxval {maxval} outside 1..=65535")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(Error::Format("missing whitespace after PGM header".into()));
        }
        pos += 1;
        let count = width
            .checked_mul(height)
            .ok_or_else(|| Error::Format("PGM dimensions overflow".into()))?;
        let depth = if maxval < 256 { 1 } else { 2 };
        let raster = &bytes[pos..];
        if raster.len() < count * depth {
            return Err(Error::Format(format!(
                "PGM raster truncated: {} of {} bytes",
                raster.len(),
                count * depth
            )));
        }
        let pixels = if depth == 1 {
            raster[..count].iter().map(|&b| b as u16).collect()
        } else {
            raster[..2 * count]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        };
        Pgm::new(width, height, maxval as u16, pixels)
    }

    /// Canonical encoding: `P5\n<w> <h>\n<maxval>\n` followed by the raster.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        if self.maxval < 256 {
            out.extend(self.pixels.iter().map(|&p| p as u8));
        } else {
            for p in &self.pixels {
                out.extend_from_slice(&p.to_be_bytes());
            }
        }
        out
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Pgm::decode(&bytes).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode())?;
        Ok(())
    }
}

fn skip_space_and_comments(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        if bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        } else if bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
}

fn header_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    skip_space_and_comments(bytes, pos);
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Format("truncated PGM header".into()));
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| Error::Format("non-ASCII PGM header".into()))
}

fn header_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = header_token(bytes, pos)?;
    tok.parse()
        .map_err(|_| Error::Format(format!("bad PGM {what} {tok:?}")))
}

/// Frames loaded from a directory.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameStack {
    /// `(width·height) × frames`, entries in `[0, 1]`.
    pub matrix: Matrix,
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// File names in column order.
    pub names: Vec<String>,
}

fn is_pgm(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// `*.pgm` files of `dir`, sorted by file name.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if is_pgm(&path) {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}

/// Stacks every frame of `dir` as a column. All frames must share width,
/// height and maxval.
pub fn load_image_stack(dir: &Path) -> Result<FrameStack> {
    let paths = list_frames(dir)?;
    if paths.is_empty() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no .pgm frames in {}", dir.display()),
        )));
    }
    let frames = paths.iter().map(|p| Pgm::read(p)).collect::<Result<Vec<_>>>()?;
    let first = &frames[0];
    for (path, f) in paths.iter().zip(&frames) {
        if (f.width, f.height, f.maxval) != (first.width, first.height, first.maxval) {
            return Err(Error::Format(format!(
                "{} is {}x{} (maxval {}), expected {}x{} (maxval {})",
                path.display(),
                f.width,
                f.height,
                f.maxval,
                first.width,
                first.height,
                first.maxval
            )));
        }
    }
    let rows = first.width * first.height;
    let scale = first.maxval as f64;
    let matrix = Matrix::from_fn(rows, frames.len(), |i, j| frames[j].pixels[i] as f64 / scale);
    let names = paths
        .iter()
        .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    Ok(FrameStack {
        matrix,
        width: first.width,
        height: first.height,
        maxval: first.maxval,
        names,
    })
}

/// Writes column `j` of `m` to `dir/names[j]`, clamping to `[0, 1]` and
/// rounding to the nearest level of `maxval`.
pub fn write_frames(dir: &Path, m: &Matrix, width: usize, height: usize, maxval: u16, names: &[String]) -> Result<()> {
    if m.rows() != width * height || m.cols() != names.len() {
        return Err(Error::Shape(format!(
            "{:?} matrix for {} frames of {width}x{height}",
            m.shape(),
            names.len()
        )));
    }
    fs::create_dir_all(dir)?;
    let scale = maxval as f64;
    for (j, name) in names.iter().enumerate() {
        let pixels = (0..m.rows())
            .map(|i| (m.get(i, j).clamp(0.0, 1.0) * scale).round() as u16)
            .collect();
        Pgm::new(width, height, maxval, pixels)?.write(&dir.join(name))?;
    }
    Ok(())
}
