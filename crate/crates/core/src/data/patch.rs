use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// How a raw `N x M` matrix becomes the `N x attributes x channels` model input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchLayout {
    /// Each attribute keeps one channel: `N x M x 1`.
    #[default]
    None,
    /// Three overlapping windows of width `ceil(M/2)` (begin, centre, end).
    #[serde(rename = "patch_3xM2")]
    ThreeHalf,
    /// Two windows of width `ceil(M/2)`.
    #[serde(rename = "patch_2xM2")]
    TwoHalf,
    /// Two overlapping windows of width `ceil(3M/4)`.
    #[serde(rename = "patch_2x3M4")]
    TwoThreeQuarter,
    /// Three windows of width `ceil(M/3)`.
    #[serde(rename = "patch_3xM3")]
    ThreeThird,
}

impl PatchLayout {
    pub fn as_str(self) -> &'static str {
        match self {
            PatchLayout::None => "none",
            PatchLayout::ThreeHalf => "patch_3xM2",
            PatchLayout::TwoHalf => "patch_2xM2",
            PatchLayout::TwoThreeQuarter => "patch_2x3M4",
            PatchLayout::ThreeThird => "patch_3xM3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            PatchLayout::None,
            PatchLayout::ThreeHalf,
            PatchLayout::TwoHalf,
            PatchLayout::TwoThreeQuarter,
            PatchLayout::ThreeThird,
        ]
        .into_iter()
        .find(|l| l.as_str() == s)
    }

    /// `(windows, width)`, or `None` for the identity layout.
    fn geometry(self, m: usize) -> Option<(usize, usize)> {
        match self {
            PatchLayout::None => None,
            PatchLayout::ThreeHalf => Some((3, m.div_ceil(2))),
            PatchLayout::TwoHalf => Some((2, m.div_ceil(2))),
            PatchLayout::TwoThreeQuarter => Some((2, (3 * m).div_ceil(4))),
            PatchLayout::ThreeThird => Some((3, m.div_ceil(3))),
        }
    }

    /// Index windows over `0..m`. Windows have equal width, the first starts at
    /// 0, the last ends at `m`, and the rest start at
    /// `floor(i * (m - width) / (windows - 1))`. For three half-width windows
    /// the middle offset is `floor(m / 4)`.
    pub fn windows(self, m: usize) -> Result<Vec<Range<usize>>> {
        let Some((count, width)) = self.geometry(m) else {
            return Ok((0..m).map(|i| i..i + 1).collect());
        };
        if m < 2 {
            return Err(Error::shape(
                "patch_split",
                format!("need at least 2 attributes, got {m}"),
            ));
        }
        let slack = m - width;
        Ok((0..count)
            .map(|i| {
                let start = i * slack / (count - 1);
                start..start + width
            })
            .collect())
    }

    /// `(attributes, channels)` of the model input for `m` raw attributes.
    pub fn output_dims(self, m: usize) -> (usize, usize) {
        match self.geometry(m) {
            None => (m, 1),
            Some(g) => g,
        }
    }
}

/// Reshapes `N x M` rows into `N x windows x width` following `layout`.
pub fn patch_split(x: &Tensor, layout: PatchLayout) -> Result<Tensor> {
    let [n, m] = *x.shape() else {
        return Err(Error::shape(
            "patch_split",
            format!("expected N x M, got {:?}", x.shape()),
        ));
    };
    let windows = layout.windows(m)?;
    let (attrs, width) = layout.output_dims(m);
    let mut data = Vec::with_capacity(n * attrs * width);
    for row in x.rows() {
        for w in &windows {
            data.extend_from_slice(&row[w.clone()]);
        }
    }
    Tensor::new(&[n, attrs, width], data)
}
