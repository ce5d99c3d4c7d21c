//! Synthetic tile-terrain maps with ground-truth weights and optimal paths.
//!
//! Each cell gets a terrain id (with some clustering), a weight equal to the
//! terrain's base cost plus a small jitter, and a `p`×`p` patch of the
//! terrain colour with pixel noise. The label is the Dijkstra path on the
//! true weights.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::grid::{GridProblem, PathMask, WeightGrid};
use crate::solver::dijkstra;
use crate::{Error, Result};

/// Half-width of the uniform per-cell cost jitter.
pub const COST_JITTER: f64 = 0.05;
/// Standard deviation of the per-pixel colour noise.
pub const PIXEL_NOISE: f64 = 0.05;
/// Probability that a cell copies the terrain of its upper or left neighbour.
const CLUSTER_PROB: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Terrain {
    pub id: u8,
    pub cost: f64,
    pub color: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerrainPalette {
    terrains: Vec<Terrain>,
}

impl Default for TerrainPalette {
    fn default() -> Self {
        let t = |id, cost, color| Terrain { id, cost, color };
        TerrainPalette {
            terrains: vec![
                t(0, 0.8, [0.85, 0.80, 0.60]), // road
                t(1, 1.2, [0.35, 0.70, 0.30]), // grass
                t(2, 2.0, [0.10, 0.40, 0.15]), // forest
                t(3, 5.0, [0.20, 0.35, 0.80]), // water
                t(4, 9.2, [0.45, 0.30, 0.25]), // mountain
            ],
        }
    }
}

impl TerrainPalette {
    pub fn new(terrains: Vec<Terrain>) -> Result<Self> {
        if terrains.is_empty() {
            return Err(Error::InvalidConfig("palette needs at least one terrain"));
        }
        if terrains
            .iter()
            .any(|t| !(t.cost > COST_JITTER && t.cost.is_finite()))
        {
            return Err(Error::InvalidConfig(
                "terrain costs must exceed the jitter width",
            ));
        }
        if terrains
            .iter()
            .any(|t| t.color.iter().any(|c| !(0.0..=1.0).contains(c)))
        {
            return Err(Error::InvalidConfig("terrain colours must lie in [0, 1]"));
        }
        for (i, a) in terrains.iter().enumerate() {
            if terrains[i + 1..]
                .iter()
                .any(|b| b.cost == a.cost || b.id == a.id)
            {
                return Err(Error::InvalidConfig(
                    "terrain costs and ids must be distinct",
                ));
            }
        }
        Ok(TerrainPalette { terrains })
    }

    pub fn terrains(&self) -> &[Terrain] {
        &self.terrains
    }

    /// Terrain whose colour is nearest to `rgb`.
    pub fn nearest(&self, rgb: [f64; 3]) -> &Terrain {
        let d = |t: &Terrain| {
            t.color
                .iter()
                .zip(rgb)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        };
        self.terrains
            .iter()
            .min_by(|a, b| d(a).total_cmp(&d(b)))
            .expect("palette is non-empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// `(k·p)×(k·p)×3`, interleaved RGB, row-major.
    pub image: Vec<f32>,
    pub true_weights: WeightGrid,
    pub true_mask: PathMask,
    pub optimal_cost: f64,
}

impl Sample {
    pub fn k(&self) -> usize {
        self.true_weights.k()
    }

    /// Mean colour of the `p`×`p` patch rendering cell `(row, col)`.
    pub fn patch_mean(&self, row: usize, col: usize, p: usize) -> [f64; 3] {
        let side = self.k() * p;
        let mut acc = [0.0; 3];
        for y in row * p..(row + 1) * p {
            for x in col * p..(col + 1) * p {
                for (ch, a) in acc.iter_mut().enumerate() {
                    *a += f64::from(self.image[(y * side + x) * 3 + ch]);
                }
            }
        }
        acc.map(|a| a / (p * p) as f64)
    }
}

/// Per-sample seed derived from a dataset seed and the sample's index.
pub fn sample_seed(dataset_seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = dataset_seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gen_sample(seed: u64, k: usize, p: usize, palette: &TerrainPalette) -> Result<Sample> {
    if k < 2 || p < 2 {
        return Err(Error::InvalidConfig(
            "sample generation needs k >= 2 and p >= 2",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terrains = palette.terrains();

    let mut ids = vec![0usize; k * k];
    for r in 0..k {
        for c in 0..k {
            let i = r * k + c;
            ids[i] = if (r > 0 || c > 0) && rng.random_bool(CLUSTER_PROB) {
                let from_up = c == 0 || (r > 0 && rng.random_bool(0.5));
                if from_up {
                    ids[i - k]
                } else {
                    ids[i - 1]
                }
            } else {
                rng.random_range(0..terrains.len())
            };
        }
    }

    let weights = ids
        .iter()
        .map(|&t| terrains[t].cost + rng.random_range(-COST_JITTER..=COST_JITTER))
        .collect();
    let true_weights = WeightGrid::new(k, weights)?;

    let side = k * p;
    let noise = Normal::new(0.0, PIXEL_NOISE).map_err(|_| Error::InvalidConfig("pixel noise"))?;
    let mut image = vec![0f32; side * side * 3];
    for y in 0..side {
        for x in 0..side {
            let color = terrains[ids[(y / p) * k + x / p]].color;
            for ch in 0..3 {
                let v = (color[ch] + noise.sample(&mut rng)).clamp(0.0, 1.0);
                image[(y * side + x) * 3 + ch] = v as f32;
            }
        }
    }

    let problem = GridProblem::new(k)?;
    let solved = dijkstra(&true_weights, &problem)?;
    Ok(Sample {
        image,
        true_weights,
        true_mask: solved.mask,
        optimal_cost: solved.cost,
    })
}
