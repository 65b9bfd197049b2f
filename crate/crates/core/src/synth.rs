//! Seeded synthetic cohorts: tilted-ellipse disc and cup masks, diagnosis
//! labels, perturbed team predictions and likelihood tables.
//!
//! Randomness comes from ChaCha8 (`rand_chacha` 0.9). The generator is seeded
//! once from the configured 64-bit seed and every independent piece of work
//! (the label draw, one image's geometry, one team's prediction of one image,
//! one team's scores) reads its own ChaCha stream, so results do not depend
//! on generation order or thread scheduling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cls_metrics::{Diagnosis, ScoreEntry, ScoreTable};
use crate::error::{Error, Result};
use crate::mask::{LabelMask, PixelLabel, RegionMask};

/// Placement attempts per image before a config is declared infeasible.
pub const MAX_ATTEMPTS: usize = 1000;

const STREAM_LABELS: u64 = 0;
const STREAM_GEOMETRY: u64 = 1;
const STREAM_PREDICTION: u64 = 2;
const STREAM_SCORES: u64 = 3;

/// Rotated ellipse in pixel coordinates, with pixel `(c, r)` centered at
/// `(c, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseParams {
    pub cx: f64,
    pub cy: f64,
    /// Semi-axis along the ellipse's own x direction.
    pub semi_h: f64,
    /// Semi-axis along the ellipse's own y direction.
    pub semi_v: f64,
    /// Tilt in radians.
    pub theta: f64,
}

impl EllipseParams {
    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.cx, self.cy, self.semi_h, self.semi_v, self.theta]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::NonFiniteValue(format!("ellipse {self:?}")));
        }
        if self.semi_h <= 0.0 || self.semi_v <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "ellipse semi-axes must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = (dx * c + dy * s) / self.semi_h;
        let v = (-dx * s + dy * c) / self.semi_v;
        u * u + v * v <= 1.0
    }

    /// Horizontal and vertical half-extents of the axis-aligned bounding box.
    pub fn half_extents(&self) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let (a, b) = (self.semi_h, self.semi_v);
        (
            (a * a * c * c + b * b * s * s).sqrt(),
            (a * a * s * s + b * b * c * c).sqrt(),
        )
    }

    /// Whether the bounding box lies within the pixel area `[-0.5, w - 0.5]`
    /// by `[-0.5, h - 0.5]`.
    pub fn fits(&self, width: u32, height: u32) -> bool {
        let (hw, hh) = self.half_extents();
        self.cx - hw >= -0.5
            && self.cx + hw <= width as f64 - 0.5
            && self.cy - hh >= -0.5
            && self.cy + hh <= height as f64 - 0.5
    }

    /// Pixel rows and columns that may hold members, clipped to the image.
    /// The box is padded by one pixel so rounding in the extents never drops
    /// a member; membership is decided per pixel.
    fn pixel_box(&self, width: u32, height: u32) -> Option<(u32, u32, u32, u32)> {
        let (hw, hh) = self.half_extents();
        let clip = |lo: f64, hi: f64, n: u32| -> Option<(u32, u32)> {
            let lo = (lo.floor() - 1.0).max(0.0);
            let hi = (hi.ceil() + 1.0).min(n as f64 - 1.0);
            (lo <= hi).then_some((lo as u32, hi as u32))
        };
        let (c0, c1) = clip(self.cx - hw, self.cx + hw, width)?;
        let (r0, r1) = clip(self.cy - hh, self.cy + hh, height)?;
        Some((c0, c1, r0, r1))
    }

    /// Number of pixel rows holding at least one member, with clipping.
    fn member_rows(&self, width: u32, height: u32) -> u32 {
        let Some((c0, c1, r0, r1)) = self.pixel_box(width, height) else {
            return 0;
        };
        (r0..=r1)
            .filter(|&r| (c0..=c1).any(|c| self.contains(c as f64, r as f64)))
            .count() as u32
    }
}

/// Pixels whose centers satisfy the ellipse inequality.
pub fn rasterize_ellipse(e: &EllipseParams, width: u32, height: u32) -> Result<RegionMask> {
    e.validate()?;
    if !e.fits(width, height) {
        return Err(Error::OutOfBounds { width, height });
    }
    let mut region = RegionMask::empty(width, height);
    if let Some((c0, c1, r0, r1)) = e.pixel_box(width, height) {
        for r in r0..=r1 {
            for c in c0..=c1 {
                if e.contains(c as f64, r as f64) {
                    region.insert(c, r);
                }
            }
        }
    }
    Ok(region)
}

/// Renders a disc and cup into a label mask, clipping both to the image and
/// keeping only cup pixels that fall inside the disc.
pub fn render_mask(disc: &EllipseParams, cup: &EllipseParams, width: u32, height: u32) -> LabelMask {
    let mut mask = LabelMask::filled(width, height, PixelLabel::Background);
    let w = width as usize;
    let labels = mask.labels_mut();
    if let Some((c0, c1, r0, r1)) = disc.pixel_box(width, height) {
        for r in r0..=r1 {
            for c in c0..=c1 {
                if disc.contains(c as f64, r as f64) {
                    labels[r as usize * w + c as usize] = PixelLabel::Disc;
                }
            }
        }
    }
    if let Some((c0, c1, r0, r1)) = cup.pixel_box(width, height) {
        for r in r0..=r1 {
            for c in c0..=c1 {
                let px = &mut labels[r as usize * w + c as usize];
                if *px == PixelLabel::Disc && cup.contains(c as f64, r as f64) {
                    *px = PixelLabel::Cup;
                }
            }
        }
    }
    mask
}

/// Zero-mean Gaussian jitter applied to simulated predictions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictionNoise {
    /// Center displacement sd, pixels.
    pub center: f64,
    /// Semi-axis sd, pixels.
    pub axes: f64,
    /// Tilt sd, radians.
    pub tilt: f64,
}

impl PredictionNoise {
    pub const NONE: PredictionNoise = PredictionNoise {
        center: 0.0,
        axes: 0.0,
        tilt: 0.0,
    };

    pub fn axes_only(sd: f64) -> Self {
        Self {
            axes: sd,
            ..Self::NONE
        }
    }

    fn validate(&self) -> Result<()> {
        for v in [self.center, self.axes, self.tilt] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "noise standard deviations must be finite and non-negative: {self:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Smallest semi-axis a perturbed ellipse may shrink to.
const MIN_SEMI_AXIS: f64 = 0.5;

/// Simulated prediction for a ground-truth disc/cup pair.
///
/// Each ellipse gets independent jitter on its center, semi-axes and tilt.
/// Semi-axes are floored at half a pixel, both shapes are clipped to the
/// image, and cup pixels outside the predicted disc are dropped, so the cup
/// always lies inside the disc. Zero noise reproduces the ground truth.
pub fn perturb_prediction<R: Rng + ?Sized>(
    disc: &EllipseParams,
    cup: &EllipseParams,
    noise: &PredictionNoise,
    width: u32,
    height: u32,
    rng: &mut R,
) -> LabelMask {
    let jitter = |sd: f64| Normal::new(0.0, sd.max(0.0)).expect("finite sd");
    let (center, axes, tilt) = (jitter(noise.center), jitter(noise.axes), jitter(noise.tilt));
    let mut perturb = |e: &EllipseParams| EllipseParams {
        cx: e.cx + center.sample(rng),
        cy: e.cy + center.sample(rng),
        semi_h: (e.semi_h + axes.sample(rng)).max(MIN_SEMI_AXIS),
        semi_v: (e.semi_v + axes.sample(rng)).max(MIN_SEMI_AXIS),
        theta: e.theta + tilt.sample(rng),
    };
    let d = perturb(disc);
    let c = perturb(cup);
    render_mask(&d, &c, width, height)
}

/// Likelihood table for labelled images: a latent `N(0, 1)` draw, shifted
/// up by `separation` for glaucoma cases, squashed by a logistic centered
/// between the two classes.
pub fn generate_classifier_scores<R: Rng + ?Sized>(
    labels: &[(String, Diagnosis)],
    separation: f64,
    rng: &mut R,
) -> Result<ScoreTable> {
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "separation must be finite and non-negative, got {separation}"
        )));
    }
    let latent = Normal::new(0.0, 1.0).expect("unit normal");
    let entries = labels
        .iter()
        .map(|(id, label)| {
            let shift = if label.is_positive() { separation } else { 0.0 };
            let z = latent.sample(rng) + shift - separation / 2.0;
            ScoreEntry {
                image_id: id.clone(),
                likelihood: 1.0 / (1.0 + (-z).exp()),
                label: *label,
            }
        })
        .collect();
    ScoreTable::new(entries)
}

/// One simulated team.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeamConfig {
    pub name: String,
    #[serde(default)]
    pub noise: PredictionNoise,
    /// Latent class separation of the team's likelihoods.
    #[serde(default = "default_separation")]
    pub separation: f64,
}

fn default_separation() -> f64 {
    3.0
}

impl TeamConfig {
    pub fn new(name: impl Into<String>, noise: PredictionNoise, separation: f64) -> Self {
        Self {
            name: name.into(),
            noise,
            separation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_images: usize,
    pub width: u32,
    pub height: u32,
    /// Fraction of glaucoma cases.
    pub prevalence: f64,
    /// Label exactly `round(prevalence * n_images)` images as glaucoma
    /// instead of drawing each label independently.
    pub exact_stratification: bool,
    /// Disc vertical semi-axis range, pixels.
    pub disc_semi_v: [f64; 2],
    /// Disc horizontal to vertical semi-axis ratio.
    pub disc_aspect: [f64; 2],
    /// Disc tilt range, radians.
    pub tilt: [f64; 2],
    /// Minimum gap between the disc bounding box and the image border, pixels.
    pub margin: f64,
    pub vcdr_glaucoma: [f64; 2],
    pub vcdr_normal: [f64; 2],
    /// Largest cup-center offset as a fraction of the room left inside the
    /// disc, in `[0, 1)`.
    pub cup_offset: f64,
    pub teams: Vec<TeamConfig>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_images: 400,
            width: 256,
            height: 256,
            prevalence: 0.10,
            exact_stratification: true,
            disc_semi_v: [24.0, 40.0],
            disc_aspect: [0.85, 1.05],
            tilt: [-0.35, 0.35],
            margin: 4.0,
            vcdr_glaucoma: [0.72, 0.9],
            vcdr_normal: [0.3, 0.6],
            cup_offset: 0.5,
            teams: default_teams(),
            seed: 0,
        }
    }
}

fn default_teams() -> Vec<TeamConfig> {
    vec![
        TeamConfig::new("noiseless", PredictionNoise::NONE, 4.0),
        TeamConfig::new(
            "team_a",
            PredictionNoise {
                center: 1.0,
                axes: 1.5,
                tilt: 0.03,
            },
            3.0,
        ),
        TeamConfig::new(
            "team_b",
            PredictionNoise {
                center: 2.0,
                axes: 3.0,
                tilt: 0.05,
            },
            2.0,
        ),
        TeamConfig::new(
            "team_c",
            PredictionNoise {
                center: 3.0,
                axes: 5.0,
                tilt: 0.08,
            },
            1.0,
        ),
    ]
}

impl SynthConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SynthConfig = toml::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("synth config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_images == 0 {
            return bad("n_images must be positive".into());
        }
        if self.width == 0 || self.height == 0 {
            return bad(format!("image size {}x{} must be positive", self.width, self.height));
        }
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return bad(format!("prevalence {} must lie in (0, 1)", self.prevalence));
        }
        let ranges = [
            ("disc_semi_v", self.disc_semi_v),
            ("disc_aspect", self.disc_aspect),
            ("tilt", self.tilt),
            ("vcdr_glaucoma", self.vcdr_glaucoma),
            ("vcdr_normal", self.vcdr_normal),
        ];
        for (name, [lo, hi]) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(format!("{name} range [{lo}, {hi}] is empty or not finite"));
            }
        }
        if self.disc_semi_v[0] <= 0.0 || self.disc_aspect[0] <= 0.0 {
            return bad("disc semi-axes and aspect ratio must be positive".into());
        }
        for (name, [lo, hi]) in [("vcdr_glaucoma", self.vcdr_glaucoma), ("vcdr_normal", self.vcdr_normal)] {
            if lo <= 0.0 || hi > 1.0 {
                return bad(format!("{name} interval [{lo}, {hi}] must lie in (0, 1]"));
            }
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return bad(format!("margin {} must be non-negative", self.margin));
        }
        if !(self.cup_offset >= 0.0 && self.cup_offset < 1.0) {
            return bad(format!("cup_offset {} must lie in [0, 1)", self.cup_offset));
        }
        let mut names = std::collections::BTreeSet::new();
        for t in &self.teams {
            let safe = !t.name.is_empty()
                && t.name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !safe {
                return bad(format!(
                    "team name {:?} must be non-empty ASCII letters, digits, '_' or '-'",
                    t.name
                ));
            }
            if !names.insert(t.name.as_str()) {
                return Err(Error::DuplicateId(t.name.clone()));
            }
            t.noise.validate()?;
            if !(t.separation.is_finite() && t.separation >= 0.0) {
                return bad(format!("team {} separation must be non-negative", t.name));
            }
        }
        Ok(())
    }

    fn interval(&self, label: Diagnosis) -> [f64; 2] {
        match label {
            Diagnosis::Glaucoma => self.vcdr_glaucoma,
            Diagnosis::NonGlaucoma => self.vcdr_normal,
        }
    }
}

/// Generator for one independent piece of work.
fn stream_rng(seed: u64, kind: u64, team: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(kind << 56 | (team as u64) << 32 | index as u64);
    rng
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthImage {
    pub image_id: String,
    pub label: Diagnosis,
    pub disc: EllipseParams,
    pub cup: EllipseParams,
    /// vCDR of the rasterized ground truth.
    pub vcdr: f64,
}

/// A generated cohort. Masks are rendered on demand from the stored
/// ellipses, so large images never need to be held all at once.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCohort {
    pub config: SynthConfig,
    pub images: Vec<SynthImage>,
}

/// Generates labels and ground-truth geometry for every image.
///
/// Each disc gets uniform semi-axes, tilt and position within the configured
/// ranges; its cup is the disc scaled by a factor drawn from the class vCDR
/// interval and shifted off-center while staying strictly inside. Draws
/// whose rasterized vCDR leaves the interval are rejected and redrawn.
pub fn generate_ground_truth(cfg: &SynthConfig) -> Result<SynthCohort> {
    cfg.validate()?;
    let labels = draw_labels(cfg);
    let digits = cfg.n_images.to_string().len().max(4);
    let images = labels
        .par_iter()
        .enumerate()
        .map(|(i, &label)| {
            let id = format!("img{:0digits$}", i + 1);
            place_image(cfg, i, label).map(|(disc, cup, vcdr)| SynthImage {
                image_id: id,
                label,
                disc,
                cup,
                vcdr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthCohort {
        config: cfg.clone(),
        images,
    })
}

fn draw_labels(cfg: &SynthConfig) -> Vec<Diagnosis> {
    let mut rng = stream_rng(cfg.seed, STREAM_LABELS, 0, 0);
    let n = cfg.n_images;
    if cfg.exact_stratification {
        let n_pos = (cfg.prevalence * n as f64).round() as usize;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut labels = vec![Diagnosis::NonGlaucoma; n];
        for &i in &order[..n_pos] {
            labels[i] = Diagnosis::Glaucoma;
        }
        labels
    } else {
        (0..n)
            .map(|_| Diagnosis::from_flag(rng.random_bool(cfg.prevalence)))
            .collect()
    }
}

fn place_image(
    cfg: &SynthConfig,
    index: usize,
    label: Diagnosis,
) -> Result<(EllipseParams, EllipseParams, f64)> {
    let mut rng = stream_rng(cfg.seed, STREAM_GEOMETRY, 0, index);
    let [lo, hi] = cfg.interval(label);
    let (w, h) = (cfg.width, cfg.height);
    for _ in 0..MAX_ATTEMPTS {
        let semi_v = uniform(&mut rng, cfg.disc_semi_v);
        let semi_h = semi_v * uniform(&mut rng, cfg.disc_aspect);
        let theta = uniform(&mut rng, cfg.tilt);
        let mut disc = EllipseParams {
            cx: 0.0,
            cy: 0.0,
            semi_h,
            semi_v,
            theta,
        };
        let (hw, hh) = disc.half_extents();
        let x_range = [hw - 0.5 + cfg.margin, w as f64 - 0.5 - hw - cfg.margin];
        let y_range = [hh - 0.5 + cfg.margin, h as f64 - 0.5 - hh - cfg.margin];
        if x_range[0] > x_range[1] || y_range[0] > y_range[1] {
            continue;
        }
        disc.cx = uniform(&mut rng, x_range);
        disc.cy = uniform(&mut rng, y_range);

        // in the disc's normalized frame the disc is the unit circle and the
        // cup a circle of radius `scale`; an offset below 1 - scale keeps it inside
        let scale = uniform(&mut rng, [lo, hi]);
        let reach = cfg.cup_offset * (1.0 - scale) * rng.random::<f64>().sqrt();
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let (u, v) = (reach * angle.cos() * semi_h, reach * angle.sin() * semi_v);
        let (s, c) = theta.sin_cos();
        let cup = EllipseParams {
            cx: disc.cx + u * c - v * s,
            cy: disc.cy + u * s + v * c,
            semi_h: semi_h * scale,
            semi_v: semi_v * scale,
            theta,
        };
        let od_rows = disc.member_rows(w, h);
        if od_rows == 0 {
            continue;
        }
        let vcdr = cup.member_rows(w, h) as f64 / od_rows as f64;
        if (lo..=hi).contains(&vcdr) {
            return Ok((disc, cup, vcdr));
        }
    }
    Err(Error::InfeasibleConfig(format!(
        "image {}: no disc/cup placement met the vCDR interval [{lo}, {hi}] in {MAX_ATTEMPTS} attempts",
        index + 1
    )))
}

impl SynthCohort {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.config.width, self.config.height)
    }

    pub fn labels(&self) -> Vec<(String, Diagnosis)> {
        self.images
            .iter()
            .map(|im| (im.image_id.clone(), im.label))
            .collect()
    }

    pub fn positives(&self) -> usize {
        self.images.iter().filter(|im| im.label.is_positive()).count()
    }

    pub fn ground_truth_mask(&self, index: usize) -> LabelMask {
        let im = &self.images[index];
        render_mask(&im.disc, &im.cup, self.config.width, self.config.height)
    }

    /// Prediction of image `index` by the configured team `team`.
    pub fn team_prediction(&self, team: usize, index: usize) -> LabelMask {
        self.prediction_with(team, index, &self.config.teams[team].noise)
    }

    /// Prediction of image `index` under arbitrary noise, drawn from the
    /// stream belonging to slot `team`.
    pub fn prediction_with(&self, team: usize, index: usize, noise: &PredictionNoise) -> LabelMask {
        let im = &self.images[index];
        let mut rng = stream_rng(self.config.seed, STREAM_PREDICTION, team, index);
        perturb_prediction(
            &im.disc,
            &im.cup,
            noise,
            self.config.width,
            self.config.height,
            &mut rng,
        )
    }

    pub fn team_scores(&self, team: usize) -> Result<ScoreTable> {
        let mut rng = stream_rng(self.config.seed, STREAM_SCORES, team, 0);
        generate_classifier_scores(&self.labels(), self.config.teams[team].separation, &mut rng)
    }

    /// Likelihood table holding each image's ground-truth vCDR.
    pub fn true_vcdr_scores(&self) -> Result<ScoreTable> {
        ScoreTable::new(
            self.images
                .iter()
                .map(|im| ScoreEntry {
                    image_id: im.image_id.clone(),
                    likelihood: im.vcdr,
                    label: im.label,
                })
                .collect(),
        )
    }
}
