//! Append-only experience log of `(pre, action, post)` triplets.
//!
//! On-disk layout (`OELT1`, little-endian):
//!
//! ```text
//! "OELT1" u32 count u32 width u32 height u32 m_or_0 [u64 encoder fingerprint if m > 0]
//! per triplet:
//!   f32[width*height] pre image
//!   u8 waypoint count, f32 (x, y) pairs
//!   f32[width*height] post image
//!   f32[m] pre latent, f32[m] post latent   (only if m > 0)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::binio::*;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::perception::{BackgroundModel, Latent, LatentEncoder};
use crate::sim::{Point, PushAction};

const MAGIC: &[u8] = b"OELT1";

#[derive(Clone, Debug, PartialEq)]
pub struct Triplet {
    pub pre_image: Image,
    pub action: PushAction,
    pub post_image: Image,
    pub pre_latent: Option<Latent>,
    pub post_latent: Option<Latent>,
}

impl Triplet {
    /// Both latents; panics if the store has not been encoded.
    pub fn latents(&self) -> (&Latent, &Latent) {
        (
            self.pre_latent.as_ref().expect("triplet not encoded"),
            self.post_latent.as_ref().expect("triplet not encoded"),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TripletStore {
    width: usize,
    height: usize,
    triplets: Vec<Triplet>,
    latent_dim: Option<usize>,
    encoder_fingerprint: Option<u64>,
}

impl TripletStore {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            triplets: Vec::new(),
            latent_dim: None,
            encoder_fingerprint: None,
        }
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn get(&self, index: usize) -> Option<&Triplet> {
        self.triplets.get(index)
    }

    pub fn image_size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn is_encoded(&self) -> bool {
        self.encoder_fingerprint.is_some()
    }

    pub fn latent_dim(&self) -> Option<usize> {
        self.latent_dim
    }

    pub fn encoder_fingerprint(&self) -> Option<u64> {
        self.encoder_fingerprint
    }

    /// Appends a triplet and returns its index.
    pub fn record(&mut self, pre_image: Image, action: PushAction, post_image: Image) -> Result<usize> {
        if self.is_encoded() {
            return Err(Error::Phase("cannot record experience into an encoded store".into()));
        }
        pre_image.check_shape(self.width, self.height)?;
        post_image.check_shape(self.width, self.height)?;
        self.triplets.push(Triplet {
            pre_image,
            action,
            post_image,
            pre_latent: None,
            post_latent: None,
        });
        Ok(self.triplets.len() - 1)
    }

    /// Caches the latent of every foreground-filtered pre and post image.
    /// A repeat call with the same encoder does nothing.
    pub fn encode_all(&mut self, background: &BackgroundModel, encoder: &dyn LatentEncoder) -> Result<()> {
        let fingerprint = encoder.fingerprint();
        if self.encoder_fingerprint == Some(fingerprint) {
            return Ok(());
        }
        let encode = |img: &Image| -> Result<Latent> { encoder.encode(&background.foreground(img)?) };
        let mut latents = Vec::with_capacity(self.triplets.len());
        for t in &self.triplets {
            latents.push((encode(&t.pre_image)?, encode(&t.post_image)?));
        }
        for (t, (pre, post)) in self.triplets.iter_mut().zip(latents) {
            t.pre_latent = Some(pre);
            t.post_latent = Some(post);
        }
        self.latent_dim = Some(encoder.latent_dim());
        self.encoder_fingerprint = Some(fingerprint);
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        write_magic(w, MAGIC)?;
        write_u32(w, self.triplets.len() as u32)?;
        write_u32(w, self.width as u32)?;
        write_u32(w, self.height as u32)?;
        write_u32(w, self.latent_dim.unwrap_or(0) as u32)?;
        if let Some(fp) = self.encoder_fingerprint {
            write_u64(w, fp)?;
        }
        for t in &self.triplets {
            write_f32s(w, t.pre_image.pixels())?;
            write_u8(w, t.action.waypoints().len() as u8)?;
            let pairs: Vec<f32> = t
                .action
                .waypoints()
                .iter()
                .flat_map(|p| [p.x as f32, p.y as f32])
                .collect();
            write_f32s(w, &pairs)?;
            write_f32s(w, t.post_image.pixels())?;
            if let (Some(pre), Some(post)) = (&t.pre_latent, &t.post_latent) {
                write_f32s(w, pre.values())?;
                write_f32s(w, post.values())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        read_magic(r, MAGIC)?;
        let count = read_u32(r, "triplet count")? as usize;
        let width = read_u32(r, "width")? as usize;
        let height = read_u32(r, "height")? as usize;
        let m = read_u32(r, "latent count")? as usize;
        let fingerprint = if m > 0 {
            Some(read_u64(r, "encoder fingerprint")?)
        } else {
            None
        };
        let dim = width * height;
        let mut triplets = Vec::with_capacity(count.min(1 << 16));
        for i in 0..count {
            let what = |part: &str| format!("triplet {i} {part}");
            let pre_image = Image::from_pixels(width, height, read_f32s(r, dim, &what("pre image"))?)?;
            let n = read_u8(r, &what("waypoint count"))? as usize;
            let pairs = read_f32s(r, 2 * n, &what("waypoints"))?;
            let action = PushAction::new(
                pairs
                    .chunks_exact(2)
                    .map(|p| Point::new(p[0] as f64, p[1] as f64))
                    .collect(),
            )
            .map_err(|e| Error::Malformed(format!("triplet {i}: {e}")))?;
            let post_image = Image::from_pixels(width, height, read_f32s(r, dim, &what("post image"))?)?;
            let (pre_latent, post_latent) = if m > 0 {
                (
                    Some(Latent(read_f32s(r, m, &what("pre latent"))?)),
                    Some(Latent(read_f32s(r, m, &what("post latent"))?)),
                )
            } else {
                (None, None)
            };
            triplets.push(Triplet {
                pre_image,
                action,
                post_image,
                pre_latent,
                post_latent,
            });
        }
        expect_eof(r)?;
        Ok(Self {
            width,
            height,
            triplets,
            latent_dim: (m > 0).then_some(m),
            encoder_fingerprint: fingerprint,
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
