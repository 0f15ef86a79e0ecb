//! Binary portable-pixmap codec: P5 (gray) and P6 (RGB), 8- or 16-bit.
//!
//! Samples are kept as `u16` regardless of depth; 16-bit files are
//! big-endian as the format requires.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PnmError {
    #[error("unsupported magic {0:?}; expected P5 or P6")]
    Magic(String),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("pixel data truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("sample {value} exceeds maxval {maxval}")]
    SampleRange { value: u16, maxval: u16 },
}

#[derive(Clone, PartialEq, Eq)]
pub struct Pnm {
    pub width: usize,
    pub height: usize,
    /// 1 for P5, 3 for P6.
    pub channels: usize,
    pub maxval: u16,
    /// Row-major, interleaved channels.
    pub data: Vec<u16>,
}

impl fmt::Debug for Pnm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Pnm")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .field("maxval", &self.maxval)
            .finish_non_exhaustive()
    }
}

impl Pnm {
    pub fn new(width: usize, height: usize, channels: usize, maxval: u16, data: Vec<u16>) -> Result<Self, PnmError> {
        if width == 0 || height == 0 {
            return Err(PnmError::Header("dimensions must be positive".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(PnmError::Header(format!("channels must be 1 or 3, got {channels}")));
        }
        if maxval == 0 {
            return Err(PnmError::Header("maxval must be positive".into()));
        }
        let need = width * height * channels;
        if data.len() != need {
            return Err(PnmError::Truncated { need, have: data.len() });
        }
        if let Some(&value) = data.iter().find(|&&v| v > maxval) {
            return Err(PnmError::SampleRange { value, maxval });
        }
        Ok(Self { width, height, channels, maxval, data })
    }

    fn bytes_per_sample(&self) -> usize {
        if self.maxval > 255 {
            2
        } else {
            1
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PnmError> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.token()?;
        let channels = match magic.as_str() {
            "P5" => 1,
            "P6" => 3,
            _ => return Err(PnmError::Magic(magic)),
        };
        let width = cur.number("width")?;
        let height = cur.number("height")?;
        let maxval = cur.number("maxval")?;
        if width == 0 || height == 0 {
            return Err(PnmError::Header("dimensions must be positive".into()));
        }
        if maxval == 0 || maxval > 65535 {
            return Err(PnmError::Header(format!("maxval {maxval} outside 1..=65535")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(PnmError::Header("missing whitespace after maxval".into())),
        }
        let maxval = maxval as u16;
        let bps = if maxval > 255 { 2 } else { 1 };
        let samples = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| PnmError::Header("dimensions overflow".into()))?;
        let need = samples.checked_mul(bps).ok_or_else(|| PnmError::Header("dimensions overflow".into()))?;
        let raster = &bytes[cur.pos..];
        if raster.len() < need {
            return Err(PnmError::Truncated { need, have: raster.len() });
        }
        let data: Vec<u16> = if bps == 1 {
            raster[..need].iter().map(|&b| b as u16).collect()
        } else {
            raster[..need].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
        };
        Self::new(width, height, channels, maxval, data)
    }

    pub fn encode(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        if self.bytes_per_sample() == 1 {
            out.extend(self.data.iter().map(|&v| v as u8));
        } else {
            out.extend(self.data.iter().flat_map(|v| v.to_be_bytes()));
        }
        out
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<String, PnmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
            self.pos += 1;
            if self.pos - start > 16 {
                return Err(PnmError::Header("header token too long".into()));
            }
        }
        if start == self.pos {
            return Err(PnmError::Header("unexpected end of header".into()));
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self, what: &str) -> Result<usize, PnmError> {
        let t = self.token()?;
        if !t.bytes().all(|b| b.is_ascii_digit()) {
            return Err(PnmError::Header(format!("{what} is not a number: {t:?}")));
        }
        t.parse().map_err(|_| PnmError::Header(format!("{what} out of range: {t}")))
    }
}
