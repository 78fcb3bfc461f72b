use super::SpatialError;

/// Row-major 8-bit raster; nonzero pixels are foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Mask {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, SpatialError> {
        if width == 0 || height == 0 {
            return Err(SpatialError::InvalidMask("empty raster".into()));
        }
        if pixels.len() != width * height {
            return Err(SpatialError::InvalidMask(format!(
                "{} pixels for a {width}x{height} raster",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(if f(x, y) { 255 } else { 0 });
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        self.get(x, y) != 0
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn foreground_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0).count()
    }

    /// Swaps foreground and background (foreground becomes 255).
    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .map(|&p| if p == 0 { 255 } else { 0 })
                .collect(),
        }
    }
}
