//! Plain-text checkpoints. Floats are written in shortest round-trip
//! exponent form, so a save/load cycle reproduces every bit.
//!
//! ```text
//! tabdisent-checkpoint 1
//! num_attributes 6
//! ...
//! normalization z_score
//! location 1.5e0 ...
//! scale 2e-1 ...
//! tensor encoder.0.weight 1 128
//! 1.2e-1 -3.4e-2 ...
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::config::{Ablation, Hyperparameters, ModelConfig};
use super::detector::Detector;
use super::params::init_params;
use crate::data::{InputTransform, Normalization, NormalizationScheme, PatchLayout};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

const MAGIC: &str = "tabdisent-checkpoint 1";

/// A trained detector and the input transform it was trained behind.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub detector: Detector,
    pub transform: InputTransform,
}

fn join(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 24);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v:e}").expect("write to string");
    }
    s
}

pub fn write_checkpoint(ckpt: &Checkpoint, mut out: impl Write) -> std::io::Result<()> {
    let cfg = &ckpt.detector.config;
    let h = &cfg.hyper;
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "num_attributes {}", cfg.num_attributes)?;
    writeln!(out, "channels_in {}", cfg.channels_in)?;
    writeln!(out, "seed {}", cfg.seed)?;
    writeln!(out, "latent_channels {}", h.latent_channels)?;
    writeln!(out, "num_heads {}", h.num_heads)?;
    writeln!(out, "leaky_slope {:e}", h.leaky_slope)?;
    writeln!(out, "epochs {}", h.epochs)?;
    writeln!(out, "batch_size {}", h.batch_size)?;
    writeln!(out, "learning_rate {:e}", h.learning_rate)?;
    writeln!(out, "ablation {}", h.ablation.as_str())?;
    writeln!(out, "layout {}", ckpt.transform.layout.as_str())?;
    match &ckpt.transform.normalization {
        None => writeln!(out, "normalization none")?,
        Some(n) => {
            writeln!(out, "normalization {}", n.scheme.as_str())?;
            writeln!(out, "location {}", join(&n.location))?;
            writeln!(out, "scale {}", join(&n.scale))?;
        }
    }
    for (name, t) in ckpt.detector.params.named_tensors() {
        let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        writeln!(out, "tensor {name} {}", dims.join(" "))?;
        writeln!(out, "{}", join(t.data()))?;
    }
    Ok(())
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_checkpoint(ckpt, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(file).map_err(|e| match e {
        Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
        other => other,
    })
}

struct Lines<R> {
    inner: std::io::Lines<BufReader<R>>,
    number: usize,
}

impl<R: Read> Lines<R> {
    fn next(&mut self) -> Result<Option<String>> {
        match self.inner.next() {
            None => Ok(None),
            Some(line) => {
                self.number += 1;
                line.map(Some)
                    .map_err(|e| Error::Checkpoint(format!("line {}: {e}", self.number)))
            }
        }
    }

    fn require(&mut self) -> Result<String> {
        self.next()?
            .ok_or_else(|| Error::Checkpoint(format!("unexpected end after line {}", self.number)))
    }

    fn fail(&self, message: impl std::fmt::Display) -> Error {
        Error::Checkpoint(format!("line {}: {message}", self.number))
    }

    /// Reads `key value...` and returns the value part.
    fn field(&mut self, key: &str) -> Result<String> {
        let line = self.require()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.to_owned()),
            _ if line == key => Ok(String::new()),
            _ => Err(self.fail(format!("expected `{key}`, found `{line}`"))),
        }
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.field(key)?;
        v.trim()
            .parse()
            .map_err(|_| self.fail(format!("bad value `{v}` for `{key}`")))
    }

    fn floats(&self, text: &str) -> Result<Vec<f64>> {
        text.split_ascii_whitespace()
            .map(|s| {
                s.parse()
                    .map_err(|_| self.fail(format!("bad number `{s}`")))
            })
            .collect()
    }
}

pub fn read_checkpoint(input: impl Read) -> Result<Checkpoint> {
    let mut lines = Lines {
        inner: BufReader::new(input).lines(),
        number: 0,
    };
    if lines.require()?.trim_end() != MAGIC {
        return Err(lines.fail("not a checkpoint file"));
    }
    let num_attributes = lines.parsed("num_attributes")?;
    let channels_in = lines.parsed("channels_in")?;
    let seed = lines.parsed("seed")?;
    let latent_channels = lines.parsed("latent_channels")?;
    let num_heads = lines.parsed("num_heads")?;
    let leaky_slope = lines.parsed("leaky_slope")?;
    let epochs = lines.parsed("epochs")?;
    let batch_size = lines.parsed("batch_size")?;
    let learning_rate = lines.parsed("learning_rate")?;
    let ablation_name = lines.field("ablation")?;
    let ablation = Ablation::parse(&ablation_name)
        .ok_or_else(|| lines.fail(format!("unknown ablation `{ablation_name}`")))?;
    let layout_name = lines.field("layout")?;
    let layout = PatchLayout::parse(&layout_name)
        .ok_or_else(|| lines.fail(format!("unknown layout `{layout_name}`")))?;
    let scheme_name = lines.field("normalization")?;
    let normalization = if scheme_name == "none" {
        None
    } else {
        let scheme = NormalizationScheme::parse(&scheme_name)
            .ok_or_else(|| lines.fail(format!("unknown normalization `{scheme_name}`")))?;
        let location = lines.field("location")?;
        let location = lines.floats(&location)?;
        let scale = lines.field("scale")?;
        let scale = lines.floats(&scale)?;
        if location.len() != scale.len() {
            return Err(lines.fail("location and scale lengths differ"));
        }
        Some(Normalization {
            scheme,
            location,
            scale,
        })
    };

    let config = ModelConfig::new(
        num_attributes,
        channels_in,
        seed,
        Hyperparameters {
            latent_channels,
            num_heads,
            leaky_slope,
            epochs,
            batch_size,
            learning_rate,
            ablation,
        },
    );
    config.validate()?;

    let mut stored: HashMap<String, Tensor> = HashMap::new();
    while let Some(header) = lines.next()? {
        if header.trim().is_empty() {
            continue;
        }
        let mut parts = header.split_ascii_whitespace();
        if parts.next() != Some("tensor") {
            return Err(lines.fail(format!("expected `tensor`, found `{header}`")));
        }
        let name = parts
            .next()
            .ok_or_else(|| lines.fail("tensor without a name"))?
            .to_owned();
        let dims: Vec<usize> = parts
            .map(|d| {
                d.parse()
                    .map_err(|_| lines.fail(format!("bad dimension `{d}`")))
            })
            .collect::<Result<_>>()?;
        let body = lines.require()?;
        let values = lines.floats(&body)?;
        let t = Tensor::new(&dims, values).map_err(|e| lines.fail(format!("{name}: {e}")))?;
        if stored.insert(name.clone(), t).is_some() {
            return Err(lines.fail(format!("duplicate tensor `{name}`")));
        }
    }

    let mut params = init_params(&config);
    let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
    for (name, slot) in names.iter().zip(params.tensors_mut()) {
        let t = stored
            .remove(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))?;
        if t.shape() != slot.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor `{name}` has shape {:?}, expected {:?}",
                t.shape(),
                slot.shape()
            )));
        }
        *slot = t;
    }
    if let Some(extra) = stored.keys().next() {
        return Err(Error::Checkpoint(format!("unexpected tensor `{extra}`")));
    }
    if let Some(n) = &normalization {
        let (m, c) = layout.output_dims(n.num_attributes());
        if (m, c) != (num_attributes, channels_in) {
            return Err(Error::Checkpoint(format!(
                "normalization covers {} raw attributes, which the layout maps to {m} x {c}, not {num_attributes} x {channels_in}",
                n.num_attributes()
            )));
        }
    }
    Ok(Checkpoint {
        detector: Detector::from_parts(config, params)?,
        transform: InputTransform {
            normalization,
            layout,
        },
    })
}
