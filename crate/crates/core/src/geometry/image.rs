use super::GeomError;

/// 8-bit RGB plus metric depth. Depth `0.0` marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbdImage {
    width: usize,
    height: usize,
    rgb: Vec<[u8; 3]>,
    depth: Vec<f64>,
}

impl RgbdImage {
    pub fn new(width: usize, height: usize, rgb: Vec<[u8; 3]>, depth: Vec<f64>) -> Result<Self, GeomError> {
        let n = width * height;
        if rgb.len() != n || depth.len() != n {
            return Err(GeomError::DimensionMismatch {
                expected: (width, height),
                found: (rgb.len(), depth.len()),
            });
        }
        if let Some(&d) = depth.iter().find(|d| !(**d >= 0.0) || !d.is_finite()) {
            return Err(GeomError::InvalidDepth { depth: d });
        }
        Ok(Self { width, height, rgb, depth })
    }

    /// Uniform color, all depths invalid.
    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        Self {
            width,
            height,
            rgb: vec![color; width * height],
            depth: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    pub fn rgb(&self) -> &[[u8; 3]] {
        &self.rgb
    }

    pub fn depth(&self) -> &[f64] {
        &self.depth
    }

    pub fn rgb_at(&self, i: usize, j: usize) -> [u8; 3] {
        self.rgb[self.index(i, j)]
    }

    pub fn depth_at(&self, i: usize, j: usize) -> f64 {
        self.depth[self.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, rgb: [u8; 3], depth: f64) {
        let k = self.index(i, j);
        self.rgb[k] = rgb;
        self.depth[k] = if depth.is_finite() && depth > 0.0 { depth } else { 0.0 };
    }

    pub fn valid_depth_count(&self) -> usize {
        self.depth.iter().filter(|d| **d > 0.0).count()
    }
}

/// Binary per-pixel object mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self, GeomError> {
        if data.len() != width * height {
            return Err(GeomError::DimensionMismatch {
                expected: (width, height),
                found: (data.len(), data.len()),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![true; width * height] }
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![false; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let data = (0..height).flat_map(|j| (0..width).map(move |i| (i, j))).map(|(i, j)| f(i, j)).collect();
        Self { width, height, data }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[j * self.width + i]
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }
}


/// One masked RGB-D observation with its calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub image: RgbdImage,
    pub mask: Mask,
    pub intrinsics: super::CameraIntrinsics,
    pub pose: super::CameraPose,
}

impl Frame {
    pub fn new(
        image: RgbdImage,
        mask: Mask,
        intrinsics: super::CameraIntrinsics,
        pose: super::CameraPose,
    ) -> Result<Self, GeomError> {
        let dims = (intrinsics.width, intrinsics.height);
        if image.dims() != dims || mask.dims() != dims {
            return Err(GeomError::DimensionMismatch { expected: dims, found: image.dims() });
        }
        Ok(Self { image, mask, intrinsics, pose })
    }

    /// Whether pixel `(i, j)` is inside the mask and has valid depth.
    pub fn usable(&self, i: usize, j: usize) -> bool {
        self.mask.get(i, j) && self.image.depth_at(i, j) > 0.0
    }
}
