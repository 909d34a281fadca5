//! Images, feature maps, multi-scale warping and the seeded convolutional
//! extractor.
//!
//! The extractor is a small stack of bias-free convolutions with random
//! zero-mean filters, each followed by a rectifier and an optional max-pool.
//! It is fully determined by its [`ExtractorSpec`], so feature maps are
//! reproducible bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Luma weights applied to RGB inputs when the extractor expects one channel.
pub const GRAY_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

/// Image with values in `[0, 1]`, stored channel-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!(
                "image must have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::invalid(format!(
                "image data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::invalid(format!(
                "image value {} at index {i} outside [0, 1]",
                data[i]
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, c: usize, row: usize, col: usize) -> f32 {
        self.data[(c * self.height + row) * self.width + col]
    }

    /// Single-channel luma image; grayscale inputs are returned unchanged.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let plane = self.height * self.width;
        let data = (0..plane)
            .map(|p| {
                let v = GRAY_WEIGHTS[0] * self.data[p]
                    + GRAY_WEIGHTS[1] * self.data[plane + p]
                    + GRAY_WEIGHTS[2] * self.data[2 * plane + p];
                v.clamp(0.0, 1.0)
            })
            .collect();
        Image {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    fn with_channels(&self, channels: usize) -> Image {
        match (self.channels, channels) {
            (a, b) if a == b => self.clone(),
            (3, 1) => self.to_gray(),
            _ => {
                let mut data = Vec::with_capacity(self.data.len() * channels);
                for _ in 0..channels {
                    data.extend_from_slice(&self.data);
                }
                Image {
                    height: self.height,
                    width: self.width,
                    channels,
                    data,
                }
            }
        }
    }
}

/// Square target sides an image is warped to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaleSet(Vec<usize>);

impl ScaleSet {
    pub const MIN_SIDE: usize = 32;

    pub fn new(sides: Vec<usize>) -> Result<Self> {
        if sides.is_empty() {
            return Err(Error::config("scale set is empty"));
        }
        if let Some(&s) = sides.iter().find(|&&s| s < Self::MIN_SIDE) {
            return Err(Error::config(format!(
                "scale {s} is below the minimum side {}",
                Self::MIN_SIDE
            )));
        }
        if sides.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(format!("scales must be strictly increasing: {sides:?}")));
        }
        Ok(Self(sides))
    }

    pub fn sides(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for ScaleSet {
    fn default() -> Self {
        Self(vec![128, 192, 256])
    }
}

/// `C` channels of an `a x a` activation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    side: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(channels: usize, side: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || side == 0 {
            return Err(Error::invalid("feature map dimensions must be positive"));
        }
        if data.len() != channels * side * side {
            return Err(Error::invalid(format!(
                "feature map data length {} does not match {channels}x{side}x{side}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature map contains non-finite values"));
        }
        Ok(Self { channels, side, data })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Row-major `side x side` plane of one channel.
    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.side * self.side;
        &self.data[c * plane..(c + 1) * plane]
    }
}

/// One convolutional stage: `filters` kernels of `size x size`, applied with
/// `stride`, rectified, then max-pooled over non-overlapping `pool x pool`
/// blocks (`pool == 1` disables pooling).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayerSpec {
    pub filters: usize,
    pub size: usize,
    pub stride: usize,
    pub pool: usize,
}

impl LayerSpec {
    pub const fn new(filters: usize, size: usize, stride: usize, pool: usize) -> Self {
        Self {
            filters,
            size,
            stride,
            pool,
        }
    }

    fn conv_side(&self, input: usize) -> Option<usize> {
        (input >= self.size).then(|| (input - self.size) / self.stride + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExtractorSpec {
    pub seed: u64,
    pub input_channels: usize,
    pub layers: Vec<LayerSpec>,
}

impl Default for ExtractorSpec {
    fn default() -> Self {
        Self {
            seed: 0x5eed_cafe,
            input_channels: 1,
            layers: vec![
                LayerSpec::new(8, 5, 2, 2),
                LayerSpec::new(16, 3, 1, 2),
                LayerSpec::new(16, 3, 1, 1),
            ],
        }
    }
}

impl ExtractorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::config("extractor needs at least one layer"));
        }
        if self.input_channels != 1 && self.input_channels != 3 {
            return Err(Error::config(format!(
                "extractor input channels must be 1 or 3, got {}",
                self.input_channels
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.filters == 0 || l.size == 0 || l.stride == 0 || l.pool == 0 {
                return Err(Error::config(format!(
                    "extractor layer {} has a zero parameter: {l:?}",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn output_channels(&self) -> usize {
        self.layers.last().map_or(0, |l| l.filters)
    }

    /// Feature-map side produced for a square input of `input` pixels.
    pub fn output_side(&self, input: usize) -> Result<usize> {
        let mut side = input;
        for (i, layer) in self.layers.iter().enumerate() {
            let conv = layer.conv_side(side).ok_or_else(|| {
                Error::invalid(format!(
                    "layer {}: input side {side} is smaller than the {}x{} filter",
                    i + 1,
                    layer.size,
                    layer.size
                ))
            })?;
            side = conv / layer.pool;
            if side == 0 {
                return Err(Error::invalid(format!(
                    "layer {}: pooling {}x{} leaves an empty map from side {conv}",
                    i + 1,
                    layer.pool,
                    layer.pool
                )));
            }
        }
        Ok(side)
    }
}

/// Resample to `side x side` with bilinear interpolation. Corner pixels of
/// the input land exactly on corner pixels of the output.
pub fn warp(image: &Image, side: usize) -> Result<Image> {
    if side < 2 {
        return Err(Error::invalid(format!("warp side must be at least 2, got {side}")));
    }
    let axis = |len: usize| -> Vec<(usize, usize, f32)> {
        let scale = (len - 1) as f64 / (side - 1) as f64;
        (0..side)
            .map(|i| {
                let pos = i as f64 * scale;
                let lo = (pos.floor() as usize).min(len - 1);
                let hi = (lo + 1).min(len - 1);
                (lo, hi, (pos - lo as f64) as f32)
            })
            .collect()
    };
    let rows = axis(image.height);
    let cols = axis(image.width);
    let mut data = Vec::with_capacity(side * side * image.channels);
    for c in 0..image.channels {
        for &(r0, r1, fr) in &rows {
            for &(c0, c1, fc) in &cols {
                let top = image.get(c, r0, c0) * (1.0 - fc) + image.get(c, r0, c1) * fc;
                let bottom = image.get(c, r1, c0) * (1.0 - fc) + image.get(c, r1, c1) * fc;
                data.push((top * (1.0 - fr) + bottom * fr).clamp(0.0, 1.0));
            }
        }
    }
    Ok(Image {
        height: side,
        width: side,
        channels: image.channels,
        data,
    })
}

/// Filter bank materialized from an [`ExtractorSpec`].
#[derive(Debug, Clone)]
pub struct Extractor {
    spec: ExtractorSpec,
    // per layer: [filter][in_channel][row][col]
    weights: Vec<Vec<f32>>,
}

impl Extractor {
    pub fn new(spec: &ExtractorSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut in_channels = spec.input_channels;
        let mut weights = Vec::with_capacity(spec.layers.len());
        for layer in &spec.layers {
            let fan_in = in_channels * layer.size * layer.size;
            let bound = (3.0 / fan_in as f32).sqrt();
            let w: Vec<f32> = (0..layer.filters * fan_in)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            weights.push(w);
            in_channels = layer.filters;
        }
        Ok(Self {
            spec: spec.clone(),
            weights,
        })
    }

    pub fn spec(&self) -> &ExtractorSpec {
        &self.spec
    }

    pub fn extract(&self, image: &Image) -> Result<FeatureMap> {
        if image.height != image.width {
            return Err(Error::invalid(format!(
                "extractor expects a square image, got {}x{}",
                image.height, image.width
            )));
        }
        self.spec.output_side(image.height)?;

        let input = image.with_channels(self.spec.input_channels);
        let mut channels = input.channels;
        let mut side = input.height;
        let mut data = input.data;
        for (layer, w) in self.spec.layers.iter().zip(&self.weights) {
            let (conv, conv_side) = convolve_relu(&data, channels, side, layer, w);
            let (pooled, pooled_side) = max_pool(&conv, layer.filters, conv_side, layer.pool);
            data = pooled;
            side = pooled_side;
            channels = layer.filters;
        }
        FeatureMap::new(channels, side, data)
    }
}

/// Convenience wrapper building the filter bank on every call.
pub fn extract(image: &Image, spec: &ExtractorSpec) -> Result<FeatureMap> {
    Extractor::new(spec)?.extract(image)
}

fn convolve_relu(input: &[f32], channels: usize, side: usize, layer: &LayerSpec, weights: &[f32]) -> (Vec<f32>, usize) {
    let k = layer.size;
    let out_side = (side - k) / layer.stride + 1;
    let mut out = vec![0.0f32; layer.filters * out_side * out_side];
    for f in 0..layer.filters {
        let wf = &weights[f * channels * k * k..(f + 1) * channels * k * k];
        let plane = &mut out[f * out_side * out_side..(f + 1) * out_side * out_side];
        for oy in 0..out_side {
            for ox in 0..out_side {
                let (y0, x0) = (oy * layer.stride, ox * layer.stride);
                let mut acc = 0.0f32;
                for c in 0..channels {
                    let wc = &wf[c * k * k..(c + 1) * k * k];
                    let base = c * side * side;
                    for ky in 0..k {
                        let row = &input[base + (y0 + ky) * side + x0..][..k];
                        let wr = &wc[ky * k..(ky + 1) * k];
                        acc += row.iter().zip(wr).map(|(a, b)| a * b).sum::<f32>();
                    }
                }
                plane[oy * out_side + ox] = acc.max(0.0);
            }
        }
    }
    (out, out_side)
}

fn max_pool(input: &[f32], channels: usize, side: usize, pool: usize) -> (Vec<f32>, usize) {
    if pool == 1 {
        return (input.to_vec(), side);
    }
    let out_side = side / pool;
    let mut out = Vec::with_capacity(channels * out_side * out_side);
    for c in 0..channels {
        let base = c * side * side;
        for oy in 0..out_side {
            for ox in 0..out_side {
                let mut m = f32::NEG_INFINITY;
                for dy in 0..pool {
                    for dx in 0..pool {
                        m = m.max(input[base + (oy * pool + dy) * side + ox * pool + dx]);
                    }
                }
                out.push(m);
            }
        }
    }
    (out, out_side)
}
