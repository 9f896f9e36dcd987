use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{ArchConfig, ArchKind};
use crate::{Error, Result, CLIP_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    Random,
    /// 2D parameters inflated to 3D.
    Inflate,
    /// Parameters read from an external file.
    External,
}

impl FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "inflate" => Ok(Self::Inflate),
            "external" => Ok(Self::External),
            _ => Err(Error::InvalidConfig(format!("unknown init mode '{s}'"))),
        }
    }
}

impl InitMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::Inflate => "inflate",
            Self::External => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub initial_lr: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub snippets_per_epoch: usize,
    pub clip_len: usize,
    pub seed: u64,
    pub init_mode: InitMode,
    /// Parameter file for `inflate` (2D source) and `external` (3D source).
    pub pretrained: Option<PathBuf>,
    pub checkpoint_every: usize,
    pub augment: bool,
    pub flip: bool,
    pub arch: ArchKind,
    pub base_width: usize,
    pub input_size: usize,
    pub working_fps: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 250,
            batch_size: 32,
            initial_lr: 2.5e-4,
            lr_decay_factor: 5.0,
            lr_decay_every: 50,
            snippets_per_epoch: 3000,
            clip_len: CLIP_LEN,
            seed: 0,
            init_mode: InitMode::Random,
            pretrained: None,
            checkpoint_every: 50,
            augment: true,
            flip: false,
            arch: ArchKind::Dense3d,
            base_width: 64,
            input_size: 224,
            working_fps: 5,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse '{value}'")))
}

impl TrainConfig {
    /// Learning rate used during the 0-based epoch `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let decays = epoch / self.lr_decay_every;
        self.initial_lr / self.lr_decay_factor.powi(decays as i32)
    }

    pub fn arch_config(&self, num_classes: usize) -> ArchConfig {
        let base = match self.arch {
            ArchKind::Dense3d => ArchConfig::dense3d(num_classes),
            ArchKind::Frame2d => ArchConfig::frame2d(num_classes),
        };
        let mut arch = base.with_width(self.base_width).with_input_size(self.input_size);
        if self.arch == ArchKind::Dense3d {
            arch.clip_len = self.clip_len;
        }
        arch
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("lr_decay_every", self.lr_decay_every),
            ("snippets_per_epoch", self.snippets_per_epoch),
            ("clip_len", self.clip_len),
            ("checkpoint_every", self.checkpoint_every),
            ("base_width", self.base_width),
            ("input_size", self.input_size),
            ("working_fps", self.working_fps as usize),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{k} must be positive")));
        }
        if !(self.initial_lr > 0.0 && self.lr_decay_factor >= 1.0) {
            return Err(Error::InvalidConfig(
                "learning rate must be positive and decay factor ≥ 1".into(),
            ));
        }
        if self.init_mode != InitMode::Random && self.pretrained.is_none() {
            return Err(Error::InvalidConfig(format!(
                "init_mode {} needs a pretrained file",
                self.init_mode.as_str()
            )));
        }
        Ok(())
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "initial_lr" => self.initial_lr = parse(key, value)?,
            "lr_decay_factor" => self.lr_decay_factor = parse(key, value)?,
            "lr_decay_every" => self.lr_decay_every = parse(key, value)?,
            "snippets_per_epoch" => self.snippets_per_epoch = parse(key, value)?,
            "clip_len" => self.clip_len = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "init_mode" => self.init_mode = value.parse()?,
            "pretrained" => self.pretrained = (!value.is_empty()).then(|| PathBuf::from(value)),
            "checkpoint_every" => self.checkpoint_every = parse(key, value)?,
            "augment" => self.augment = parse(key, value)?,
            "flip" => self.flip = parse(key, value)?,
            "arch" => {
                self.arch = match value {
                    "dense3d" => ArchKind::Dense3d,
                    "frame2d" => ArchKind::Frame2d,
                    _ => return Err(Error::InvalidConfig(format!("unknown arch '{value}'"))),
                }
            }
            "base_width" => self.base_width = parse(key, value)?,
            "input_size" => self.input_size = parse(key, value)?,
            "working_fps" => self.working_fps = parse(key, value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Parses `key=value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::MalformedLine {
                line: n + 1,
                content: line.to_string(),
            })?;
            config.set(k.trim(), v.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let arch = match self.arch {
            ArchKind::Dense3d => "dense3d",
            ArchKind::Frame2d => "frame2d",
        };
        let pretrained = self
            .pretrained
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default();
        let rows = [
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("initial_lr", self.initial_lr.to_string()),
            ("lr_decay_factor", self.lr_decay_factor.to_string()),
            ("lr_decay_every", self.lr_decay_every.to_string()),
            ("snippets_per_epoch", self.snippets_per_epoch.to_string()),
            ("clip_len", self.clip_len.to_string()),
            ("seed", self.seed.to_string()),
            ("init_mode", self.init_mode.as_str().to_string()),
            ("pretrained", pretrained),
            ("checkpoint_every", self.checkpoint_every.to_string()),
            ("augment", self.augment.to_string()),
            ("flip", self.flip.to_string()),
            ("arch", arch.to_string()),
            ("base_width", self.base_width.to_string()),
            ("input_size", self.input_size.to_string()),
            ("working_fps", self.working_fps.to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}
