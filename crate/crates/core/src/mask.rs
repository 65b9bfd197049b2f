//! Tri-level label masks and the binary regions derived from them.
//!
//! Submission and reference masks carry one of three gray levels per pixel:
//! 0 for the optic cup, 128 for the optic disc rim and 255 for background.
//! The cup is anatomically nested inside the disc, so the optic disc region
//! of a mask is the union of cup and disc pixels by default.

use crate::error::{Error, Result};

/// Label of a single mask pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum PixelLabel {
    Cup = 0,
    Disc = 128,
    Background = 255,
}

impl PixelLabel {
    /// Gray level used for this label on disk.
    #[inline]
    pub const fn gray(self) -> u8 {
        self as u8
    }

    /// Maps an arbitrary gray level to the nearest label level.
    ///
    /// Midpoints (64 and 191.5) are resolved toward the darker label for 64
    /// and toward background above 191.
    #[inline]
    pub const fn from_gray_nearest(g: u8) -> Self {
        match g {
            0..=64 => PixelLabel::Cup,
            65..=191 => PixelLabel::Disc,
            _ => PixelLabel::Background,
        }
    }

    /// Maps a gray level to a label only when it is exactly 0, 128 or 255.
    #[inline]
    pub const fn from_gray_exact(g: u8) -> Option<Self> {
        match g {
            0 => Some(PixelLabel::Cup),
            128 => Some(PixelLabel::Disc),
            255 => Some(PixelLabel::Background),
            _ => None,
        }
    }

    #[inline]
    fn in_region(self, kind: RegionKind, rule: OdRule) -> bool {
        match (kind, self) {
            (RegionKind::OpticCup, PixelLabel::Cup) => true,
            (RegionKind::OpticCup, _) => false,
            (RegionKind::OpticDisc, PixelLabel::Disc) => true,
            (RegionKind::OpticDisc, PixelLabel::Cup) => rule == OdRule::CupAndDisc,
            (RegionKind::OpticDisc, PixelLabel::Background) => false,
        }
    }
}

/// Which anatomical region to extract from a [`LabelMask`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionKind {
    /// Optic disc (OD).
    OpticDisc,
    /// Optic cup (OC).
    OpticCup,
}

/// Membership rule for the optic disc region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum OdRule {
    /// Disc region is every cup or disc pixel. The cup is nested in the disc.
    #[default]
    CupAndDisc,
    /// Disc region is only the pixels labeled 128. Alternative reading kept
    /// for comparison with evaluators that treat the rim alone as the disc.
    DiscLabelOnly,
}

/// Row-major tri-level label image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMask {
    width: u32,
    height: u32,
    labels: Vec<PixelLabel>,
}

impl LabelMask {
    /// Creates a mask filled with a single label.
    ///
    /// Panics if either dimension is zero.
    pub fn filled(width: u32, height: u32, label: PixelLabel) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Self {
            width,
            height,
            labels: vec![label; width as usize * height as usize],
        }
    }

    pub fn from_labels(width: u32, height: u32, labels: Vec<PixelLabel>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DimensionMismatch(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        if labels.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for a {width}x{height} mask",
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    /// Builds a mask from exact gray levels (0, 128, 255).
    pub fn from_gray(width: u32, height: u32, gray: &[u8]) -> Result<Self> {
        let w = width.max(1) as usize;
        let labels = gray
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                PixelLabel::from_gray_exact(g).ok_or(Error::StrictValueViolation {
                    x: (i % w) as u32,
                    y: (i / w) as u32,
                    value: g,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_labels(width, height, labels)
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// Labels in row-major order, top row first.
    #[inline]
    pub fn labels(&self) -> &[PixelLabel] {
        &self.labels
    }

    #[inline]
    pub(crate) fn labels_mut(&mut self) -> &mut [PixelLabel] {
        &mut self.labels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> PixelLabel {
        self.labels[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, label: PixelLabel) {
        let i = self.index(x, y);
        self.labels[i] = label;
    }

    /// Iterator over the rows, top row first.
    pub fn rows(&self) -> std::slice::ChunksExact<'_, PixelLabel> {
        self.labels.chunks_exact(self.width as usize)
    }

    pub fn count(&self, label: PixelLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Reassembles a mask from disc and cup regions. Cup pixels outside the
    /// disc region are still labeled cup, which places them in the disc
    /// region as well.
    pub fn from_regions(disc: &RegionMask, cup: &RegionMask) -> Result<Self> {
        if disc.dimensions() != cup.dimensions() {
            return Err(Error::DimensionMismatch(format!(
                "disc region is {:?}, cup region is {:?}",
                disc.dimensions(),
                cup.dimensions()
            )));
        }
        let labels = disc
            .members()
            .iter()
            .zip(cup.members())
            .map(|(&d, &c)| {
                if c {
                    PixelLabel::Cup
                } else if d {
                    PixelLabel::Disc
                } else {
                    PixelLabel::Background
                }
            })
            .collect();
        Self::from_labels(disc.width(), disc.height(), labels)
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        y as usize * self.width as usize + x as usize
    }
}

/// Row-major binary region.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RegionMask {
    width: u32,
    height: u32,
    member: Vec<bool>,
}

impl RegionMask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            member: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_members(width: u32, height: u32, member: Vec<bool>) -> Result<Self> {
        if member.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} members for a {width}x{height} region",
                member.len()
            )));
        }
        Ok(Self {
            width,
            height,
            member,
        })
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn members(&self) -> &[bool] {
        &self.member
    }

    #[inline]
    pub fn contains(&self, x: u32, y: u32) -> bool {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.member[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn insert(&mut self, x: u32, y: u32) {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.member[y as usize * self.width as usize + x as usize] = true;
    }

    /// Number of member pixels.
    pub fn area(&self) -> usize {
        self.member.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.member.iter().any(|&m| m)
    }

    /// True when every member of `self` is also a member of `other`.
    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.dimensions() == other.dimensions()
            && self
                .member
                .iter()
                .zip(&other.member)
                .all(|(&a, &b)| !a || b)
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, bool> {
        self.member.chunks_exact(self.width.max(1) as usize)
    }
}

/// Extracts the optic disc or optic cup region of a mask.
pub fn region_of(mask: &LabelMask, kind: RegionKind) -> RegionMask {
    region_of_with(mask, kind, OdRule::default())
}

/// [`region_of`] with an explicit optic disc membership rule.
pub fn region_of_with(mask: &LabelMask, kind: RegionKind, rule: OdRule) -> RegionMask {
    RegionMask {
        width: mask.width,
        height: mask.height,
        member: mask
            .labels
            .iter()
            .map(|l| l.in_region(kind, rule))
            .collect(),
    }
}
