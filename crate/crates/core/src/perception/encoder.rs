//! Linear principal-component encoder.
//!
//! Components are extracted one at a time by power iteration on the sample
//! covariance, deflating by projecting out the components already found. The
//! covariance is never formed: each iteration multiplies through the (mostly
//! sparse) centered images directly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{Latent, LatentEncoder};
use crate::binio::*;
use crate::error::{Error, Result};
use crate::image::Image;

const MAGIC: &[u8] = b"OELE1";

pub const POWER_TOLERANCE: f64 = 1e-8;
pub const POWER_MAX_ITERATIONS: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct LinearEncoder {
    width: usize,
    height: usize,
    mean: Vec<f32>,
    components: Vec<Vec<f32>>,
}

/// Encoder plus the variance each component explains on the training set.
#[derive(Clone, Debug)]
pub struct EncoderFit {
    pub encoder: LinearEncoder,
    pub explained_variance: Vec<f64>,
}

/// Distinct training images stored sparsely with their multiplicities.
struct SparseSet {
    rows: Vec<(Vec<u32>, Vec<f64>)>,
    weights: Vec<f64>,
    total: f64,
}

impl SparseSet {
    fn new(images: &[Image]) -> Self {
        let mut index: HashMap<Vec<u32>, usize> = HashMap::new();
        let mut rows = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for img in images {
            let key: Vec<u32> = img.pixels().iter().map(|v| v.to_bits()).collect();
            match index.get(&key) {
                Some(&i) => weights[i] += 1.0,
                None => {
                    index.insert(key, rows.len());
                    let (idx, val) = img
                        .pixels()
                        .iter()
                        .enumerate()
                        .filter(|(_, v)| **v != 0.0)
                        .map(|(i, v)| (i as u32, *v as f64))
                        .unzip();
                    rows.push((idx, val));
                    weights.push(1.0);
                }
            }
        }
        Self {
            rows,
            weights,
            total: images.len() as f64,
        }
    }

    fn mean(&self, dim: usize) -> Vec<f64> {
        let mut mean = vec![0.0; dim];
        for ((idx, val), w) in self.rows.iter().zip(&self.weights) {
            for (&i, &v) in idx.iter().zip(val) {
                mean[i as usize] += w * v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= self.total);
        mean
    }

    /// `out = C v` with `C` the second moment about `center`.
    fn covariance_times(&self, center: &[f64], v: &[f64], out: &mut [f64]) {
        let center_dot_v = dot(center, v);
        out.fill(0.0);
        let mut weight_sum = 0.0;
        for ((idx, val), w) in self.rows.iter().zip(&self.weights) {
            let xv: f64 = idx.iter().zip(val).map(|(&i, &x)| x * v[i as usize]).sum();
            let s = w * (xv - center_dot_v);
            weight_sum += s;
            for (&i, &x) in idx.iter().zip(val) {
                out[i as usize] += s * x;
            }
        }
        for (o, c) in out.iter_mut().zip(center) {
            *o = (*o - c * weight_sum) / self.total;
        }
    }

    fn total_variance(&self, center: &[f64]) -> f64 {
        let center_sq = dot(center, center);
        let mut acc = 0.0;
        for ((idx, val), w) in self.rows.iter().zip(&self.weights) {
            // |x - c|^2 = |c|^2 + sum over nonzeros of (x^2 - 2 x c)
            let mut d = center_sq;
            for (&i, &x) in idx.iter().zip(val) {
                d += x * x - 2.0 * x * center[i as usize];
            }
            acc += w * d;
        }
        acc / self.total
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    // two passes of Gram-Schmidt keep the result orthogonal to round-off
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
}

fn start_vector(dim: usize, index: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + index as u64);
    for attempt in 0.. {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        project_out(&mut v, basis);
        let n = norm(&v);
        if n > 1e-6 || attempt > 16 {
            v.iter_mut().for_each(|x| *x /= n);
            return v;
        }
    }
    unreachable!()
}

impl LinearEncoder {
    /// Fits `m` components to `images`.
    pub fn fit(images: &[Image], m: usize) -> Result<Self> {
        Ok(Self::fit_detailed(images, m)?.encoder)
    }

    pub fn fit_detailed(images: &[Image], m: usize) -> Result<EncoderFit> {
        if m == 0 {
            return Err(Error::config("latent count must be at least 1"));
        }
        if images.len() < m {
            return Err(Error::config(format!(
                "need at least {m} images to fit {m} components, got {}",
                images.len()
            )));
        }
        let (width, height) = (images[0].width(), images[0].height());
        let dim = width * height;
        if m > dim {
            return Err(Error::config(format!(
                "cannot fit {m} components to {dim}-pixel images"
            )));
        }
        for img in images {
            img.check_shape(width, height)?;
        }

        let data = SparseSet::new(images);
        let mean: Vec<f32> = data.mean(dim).iter().map(|&v| v as f32).collect();
        let center: Vec<f64> = mean.iter().map(|&v| v as f64).collect();
        let total_variance = data.total_variance(&center);
        let negligible = 1e-14 * total_variance.max(f64::MIN_POSITIVE);

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut eigenvalues = Vec::with_capacity(m);
        let mut cv = vec![0.0; dim];
        for k in 0..m {
            let mut v = start_vector(dim, k, &basis);
            for _ in 0..POWER_MAX_ITERATIONS {
                data.covariance_times(&center, &v, &mut cv);
                project_out(&mut cv, &basis);
                let n = norm(&cv);
                if n <= negligible {
                    // no variance left in the complement; any unit vector there will do
                    break;
                }
                let sign = if dot(&cv, &v) < 0.0 { -1.0 } else { 1.0 };
                let mut diff = 0.0;
                for (x, c) in v.iter_mut().zip(&cv) {
                    let next = sign * c / n;
                    diff += (next - *x) * (next - *x);
                    *x = next;
                }
                if diff.sqrt() < POWER_TOLERANCE {
                    break;
                }
            }
            project_out(&mut v, &basis);
            let n = norm(&v);
            v.iter_mut().for_each(|x| *x /= n);
            data.covariance_times(&center, &v, &mut cv);
            eigenvalues.push(dot(&v, &cv).max(0.0));
            basis.push(v);
        }

        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));
        let components = order
            .iter()
            .map(|&i| basis[i].iter().map(|&x| x as f32).collect())
            .collect();
        let explained_variance = order.iter().map(|&i| eigenvalues[i]).collect();
        Ok(EncoderFit {
            encoder: Self {
                width,
                height,
                mean,
                components,
            },
            explained_variance,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mean_image(&self) -> &[f32] {
        &self.mean
    }

    pub fn components(&self) -> &[Vec<f32>] {
        &self.components
    }

    /// Component coordinates of an already centered image, at full precision.
    pub fn project(&self, centered: &[f64]) -> Result<Vec<f64>> {
        if centered.len() != self.mean.len() {
            return Err(Error::dims(self.mean.len(), centered.len()));
        }
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(centered).map(|(&ci, &x)| ci as f64 * x).sum())
            .collect())
    }

    /// `mean + sum_i latent_i * component_i`
    pub fn decode(&self, latent: &Latent) -> Result<Image> {
        if latent.len() != self.components.len() {
            return Err(Error::dims(self.components.len(), latent.len()));
        }
        let mut px: Vec<f64> = self.mean.iter().map(|&v| v as f64).collect();
        for (c, &z) in self.components.iter().zip(latent.values()) {
            px.iter_mut().zip(c).for_each(|(p, &ci)| *p += z as f64 * ci as f64);
        }
        Image::from_pixels(self.width, self.height, px.into_iter().map(|v| v as f32).collect())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        write_magic(w, MAGIC)?;
        write_u32(w, self.width as u32)?;
        write_u32(w, self.height as u32)?;
        write_u32(w, self.components.len() as u32)?;
        write_f32s(w, &self.mean)?;
        for c in &self.components {
            write_f32s(w, c)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        read_magic(r, MAGIC)?;
        let width = read_u32(r, "width")? as usize;
        let height = read_u32(r, "height")? as usize;
        let m = read_u32(r, "latent count")? as usize;
        let dim = width * height;
        if m == 0 || m > dim {
            return Err(Error::Malformed(format!("latent count {m} for {dim} pixels")));
        }
        let mean = read_f32s(r, dim, "mean image")?;
        let components = (0..m)
            .map(|i| read_f32s(r, dim, &format!("component {i}")))
            .collect::<Result<_>>()?;
        expect_eof(r)?;
        Ok(Self {
            width,
            height,
            mean,
            components,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory cannot fail");
        buf
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

impl LatentEncoder for LinearEncoder {
    fn latent_dim(&self) -> usize {
        self.components.len()
    }

    fn encode(&self, image: &Image) -> Result<Latent> {
        image.check_shape(self.width, self.height)?;
        let centered: Vec<f64> = image
            .pixels()
            .iter()
            .zip(&self.mean)
            .map(|(&x, &m)| x as f64 - m as f64)
            .collect();
        Ok(Latent(self.project(&centered)?.into_iter().map(|v| v as f32).collect()))
    }

    fn fingerprint(&self) -> u64 {
        let digest = Sha256::digest(self.to_bytes());
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }
}
