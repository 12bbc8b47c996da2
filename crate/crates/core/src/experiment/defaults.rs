use crate::data::PatchLayout;
use crate::model::Hyperparameters;

/// Reference training settings for one benchmark dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetDefaults {
    pub name: &'static str,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub latent_channels: usize,
    pub preprocessing: PatchLayout,
}

const fn row(
    name: &'static str,
    epochs: usize,
    batch_size: usize,
    latent_channels: usize,
    patched: bool,
) -> DatasetDefaults {
    DatasetDefaults {
        name,
        learning_rate: 1e-4,
        epochs,
        batch_size,
        latent_channels,
        preprocessing: if patched {
            PatchLayout::ThreeHalf
        } else {
            PatchLayout::None
        },
    }
}

/// Per-dataset learning rate, epochs, batch size, latent width and
/// preprocessing for the 20 benchmark datasets.
pub const DATASET_DEFAULTS: [DatasetDefaults; 20] = [
    row("arrhythmia", 100, 64, 128, false),
    row("breastw", 100, 64, 128, false),
    row("cardio", 100, 128, 128, false),
    row("census", 100, 2048, 128, false),
    row("campaign", 100, 2048, 128, false),
    row("cardiotocography", 100, 128, 128, false),
    row("fraud", 200, 2048, 512, true),
    row("glass", 100, 64, 128, false),
    row("ionosphere", 200, 64, 512, true),
    row("mammography", 100, 2048, 128, false),
    row("nsl_kdd", 100, 2048, 128, false),
    row("optdigits", 200, 128, 512, true),
    row("pima", 100, 128, 128, false),
    row("pendigits", 200, 128, 512, true),
    row("satellite", 200, 512, 512, true),
    row("satimage2", 200, 512, 512, true),
    row("shuttle", 200, 2048, 512, true),
    row("thyroid", 100, 512, 128, false),
    row("wbc", 100, 64, 128, false),
    row("wine", 100, 64, 128, false),
];

pub fn dataset_defaults(name: &str) -> Option<DatasetDefaults> {
    let key = name.to_ascii_lowercase().replace(['-', ' '], "_");
    let key = match key.as_str() {
        "satimage_2" => "satimage2".to_owned(),
        _ => key,
    };
    DATASET_DEFAULTS.iter().copied().find(|d| d.name == key)
}

impl DatasetDefaults {
    pub fn hyperparameters(&self) -> Hyperparameters {
        Hyperparameters {
            latent_channels: self.latent_channels,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            ..Hyperparameters::default()
        }
    }
}
