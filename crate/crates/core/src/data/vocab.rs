use std::collections::HashMap;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gesture {
    pub id: String,
    pub name: String,
    pub color: [u8; 3],
}

/// Ordered gesture classes. The position of an entry is its class index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GestureVocabulary {
    entries: Vec<Gesture>,
    index: HashMap<String, usize>,
}

// tab10 followed by a few extras
const PALETTE: [[u8; 3]; 12] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
    [188, 189, 34],
    [23, 190, 207],
    [0, 0, 128],
    [128, 128, 0],
];

const SUTURING: [(&str, &str); 10] = [
    ("G1", "Reaching for needle with right hand"),
    ("G2", "Positioning needle"),
    ("G3", "Pushing needle through tissue"),
    ("G4", "Transferring needle from left to right"),
    ("G5", "Moving to center with needle in grip"),
    ("G6", "Pulling suture with left hand"),
    ("G8", "Orienting needle"),
    ("G9", "Using right hand to help tighten suture"),
    ("G10", "Loosening more suture"),
    ("G11", "Dropping suture at end and moving to end points"),
];

impl GestureVocabulary {
    pub fn new(entries: Vec<Gesture>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidConfig("empty gesture vocabulary".into()));
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (i, g) in entries.iter().enumerate() {
            if index.insert(g.id.clone(), i).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate gesture id `{}`", g.id)));
            }
        }
        Ok(Self { entries, index })
    }

    /// The ten gestures occurring in the JIGSAWS suturing task.
    pub fn jigsaws_suturing() -> Self {
        let entries = SUTURING
            .iter()
            .zip(PALETTE)
            .map(|(&(id, name), color)| Gesture {
                id: id.to_string(),
                name: name.to_string(),
                color,
            })
            .collect();
        Self::new(entries).expect("built-in vocabulary is valid")
    }

    /// `G1..Gn` with generic names, used by the synthetic generator.
    pub fn numbered(n: usize) -> Self {
        let entries = (0..n)
            .map(|i| Gesture {
                id: format!("G{}", i + 1),
                name: format!("Synthetic gesture {}", i + 1),
                color: PALETTE[i % PALETTE.len()],
            })
            .collect();
        Self::new(entries).expect("numbered vocabulary is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, index: usize) -> Option<&Gesture> {
        self.entries.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Gesture> {
        self.entries.iter()
    }

    /// Parses `id<TAB>name<TAB>#rrggbb` lines. Blank lines and lines starting
    /// with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::format(
                    "vocabulary",
                    format!("line {}: expected 3 tab-separated fields", n + 1),
                ));
            }
            let color = parse_hex_color(fields[2])
                .ok_or_else(|| Error::format("vocabulary", format!("line {}: bad color `{}`", n + 1, fields[2])))?;
            entries.push(Gesture {
                id: fields[0].trim().to_string(),
                name: fields[1].trim().to_string(),
                color,
            });
        }
        Self::new(entries)
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# id\tname\tcolor\n");
        for g in &self.entries {
            let [r, gg, b] = g.color;
            out.push_str(&format!("{}\t{}\t#{r:02x}{gg:02x}{b:02x}\n", g.id, g.name));
        }
        out
    }
}

fn parse_hex_color(s: &str) -> Option<[u8; 3]> {
    let hex = s.trim().strip_prefix('#')?;
    if hex.len() != 6 {
        return None;
    }
    let v = u32::from_str_radix(hex, 16).ok()?;
    Some([(v >> 16) as u8, (v >> 8) as u8, v as u8])
}
