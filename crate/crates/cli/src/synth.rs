//! Synthetic texture corpus: three classes that differ in stripe
//! orientation and period, drawn at varied image sizes with pixel noise.

use std::path::Path;

use msmkl::dataio::{write_pnm, write_text_atomic};
use msmkl::{Error, Image, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CLASSES: [&str; 3] = ["horizontal", "vertical", "checker"];

fn texture(rng: &mut ChaCha8Rng, class: usize) -> Image {
    let h = rng.random_range(48..=96);
    let w = rng.random_range(48..=96);
    let period = rng.random_range(4.0..9.0f32);
    let phase = rng.random_range(0.0..std::f32::consts::TAU);
    let data = (0..h * w)
        .map(|p| {
            let (r, c) = ((p / w) as f32, (p % w) as f32);
            let wave = |t: f32| (std::f32::consts::TAU * t / period + phase).sin();
            let v = match class {
                0 => wave(r),
                1 => wave(c),
                _ => wave(r) * wave(c),
            };
            (0.5 + 0.35 * v + rng.random_range(-0.15..0.15)).clamp(0.0, 1.0)
        })
        .collect();
    Image::new(h, w, 1, data).expect("dimensions match the data")
}

pub fn write_corpus(dir: &Path, per_class: usize, seed: u64) -> Result<()> {
    if per_class < 2 {
        return Err(Error::config("--per-class must be at least 2"));
    }
    let images = dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| Error::invalid(format!("cannot create {}: {e}", images.display())))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut manifest = String::from("# path\tclass\tid\n");
    for (k, class) in CLASSES.iter().enumerate() {
        for i in 0..per_class {
            let name = format!("images/{class}_{i:03}.pgm");
            write_pnm(&dir.join(&name), &texture(&mut rng, k))?;
            manifest.push_str(&format!("{name}\t{class}\t{class}-{i}\n"));
        }
    }
    let path = dir.join("manifest.tsv");
    write_text_atomic(&path, &manifest)?;
    println!("wrote {} images and {}", CLASSES.len() * per_class, path.display());
    Ok(())
}
