#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use image::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn gik(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gik"))
        .args(args)
        .output()
        .expect("spawn gik")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Two classes under `root`: `flat/` holds single-value images with a
/// seeded value each, `noise/` holds seeded uniform 8-bit noise.
pub fn write_synthetic_dataset(root: &Path, per_class: usize, width: u32, height: u32, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flat = root.join("flat");
    let noise = root.join("noise");
    fs::create_dir_all(&flat).unwrap();
    fs::create_dir_all(&noise).unwrap();
    for i in 0..per_class {
        let value: u8 = rng.random();
        GrayImage::from_pixel(width, height, image::Luma([value]))
            .save(flat.join(format!("flat_{i:03}.png")))
            .unwrap();
        let pixels: Vec<u8> = (0..width * height).map(|_| rng.random()).collect();
        GrayImage::from_raw(width, height, pixels)
            .unwrap()
            .save(noise.join(format!("noise_{i:03}.png")))
            .unwrap();
    }
}

pub fn path_str(p: &Path) -> String {
    p.to_str().expect("utf-8 temp path").to_string()
}

pub fn join(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
