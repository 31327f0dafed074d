use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::binio::*;
use crate::error::{Error, Result};
use crate::image::Image;

const MAGIC: &[u8] = b"OELB1";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackgroundParams {
    /// Learning rate of the running mean and variance, in `(0, 1)`.
    pub alpha: f64,
    /// Foreground threshold in standard deviations.
    pub k: f64,
    pub variance_floor: f64,
    /// Frames required before `foreground` may be called.
    pub burn_in: u64,
}

impl Default for BackgroundParams {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            k: 4.0,
            variance_floor: 1e-6,
            burn_in: 50,
        }
    }
}

impl BackgroundParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("background alpha {} not in (0, 1)", self.alpha)));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::config("background threshold k must be positive"));
        }
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return Err(Error::config("background variance floor must be positive"));
        }
        Ok(())
    }
}

/// Single Gaussian per pixel, updated as an exponential running average.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundModel {
    width: usize,
    height: usize,
    params: BackgroundParams,
    mean: Vec<f64>,
    variance: Vec<f64>,
    frames_seen: u64,
}

impl BackgroundModel {
    pub fn new(width: usize, height: usize, params: BackgroundParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            width,
            height,
            params,
            mean: vec![0.0; width * height],
            variance: vec![params.variance_floor; width * height],
            frames_seen: 0,
        })
    }

    pub fn params(&self) -> &BackgroundParams {
        &self.params
    }

    pub fn frames_seen(&self) -> u64 {
        self.frames_seen
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn is_ready(&self) -> bool {
        self.frames_seen >= self.params.burn_in
    }

    /// Folds one frame into the model. The first frame initializes the mean.
    pub fn update(&mut self, image: &Image) -> Result<()> {
        image.check_shape(self.width, self.height)?;
        let floor = self.params.variance_floor;
        if self.frames_seen == 0 {
            for (m, &x) in self.mean.iter_mut().zip(image.pixels()) {
                *m = x as f64;
            }
            self.variance.fill(floor);
        } else {
            let a = self.params.alpha;
            for ((m, v), &x) in self
                .mean
                .iter_mut()
                .zip(self.variance.iter_mut())
                .zip(image.pixels())
            {
                let x = x as f64;
                let d = x - *m;
                *m = (1.0 - a) * *m + a * x;
                *v = ((1.0 - a) * *v + a * d * d).max(floor);
            }
        }
        self.frames_seen += 1;
        Ok(())
    }

    /// Keeps pixels more than `k` standard deviations from the mean and
    /// zeroes the rest.
    pub fn foreground(&self, image: &Image) -> Result<Image> {
        image.check_shape(self.width, self.height)?;
        if !self.is_ready() {
            return Err(Error::NotReady {
                seen: self.frames_seen,
                required: self.params.burn_in,
            });
        }
        let k2 = self.params.k * self.params.k;
        let pixels = image
            .pixels()
            .iter()
            .zip(self.mean.iter().zip(&self.variance))
            .map(|(&x, (&m, &v))| {
                let d = x as f64 - m;
                if d * d > k2 * v {
                    x
                } else {
                    0.0
                }
            })
            .collect();
        Image::from_pixels(self.width, self.height, pixels)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        write_magic(w, MAGIC)?;
        write_u32(w, self.width as u32)?;
        write_u32(w, self.height as u32)?;
        write_f64s(
            w,
            &[self.params.alpha, self.params.k, self.params.variance_floor],
        )?;
        write_u64(w, self.params.burn_in)?;
        write_u64(w, self.frames_seen)?;
        write_f64s(w, &self.mean)?;
        write_f64s(w, &self.variance)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        read_magic(r, MAGIC)?;
        let width = read_u32(r, "width")? as usize;
        let height = read_u32(r, "height")? as usize;
        let p = read_f64s(r, 3, "parameters")?;
        let burn_in = read_u64(r, "burn-in")?;
        let params = BackgroundParams {
            alpha: p[0],
            k: p[1],
            variance_floor: p[2],
            burn_in,
        };
        params
            .validate()
            .map_err(|e| Error::Malformed(format!("background parameters: {e}")))?;
        let frames_seen = read_u64(r, "frame count")?;
        let mean = read_f64s(r, width * height, "mean")?;
        let variance = read_f64s(r, width * height, "variance")?;
        expect_eof(r)?;
        Ok(Self {
            width,
            height,
            params,
            mean,
            variance,
            frames_seen,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}
