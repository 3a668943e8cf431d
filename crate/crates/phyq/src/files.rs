//! On-disk formats: task files, the catalog manifest, JSON observation
//! frames and JSON-lines run logs.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use base64::Engine;
use phyq_core::catalog::ObjectClass;
use phyq_core::game::{Action, Level};
use phyq_core::perception::{
    encode_tensor, render, symbolize, ScreenMap, SymbolicFrame, TensorObs, TENSOR_H, TENSOR_W,
};
use phyq_core::physics::World;
use phyq_core::score::AttemptRecord;
use phyq_core::taskgen::{make_splits, SplitMode, SplitSpec, TaskInstance, TaskTemplate};
use serde::{Deserialize, Serialize};

pub const LEVEL_SCHEMA: &str = "phyq.level/1";
pub const MANIFEST_SCHEMA: &str = "phyq.manifest/1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: expected schema {expected}, found {found:?}")]
    Schema { path: PathBuf, expected: &'static str, found: String },
    #[error("png encoding: {0}")]
    Png(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FileError + '_ {
    move |source| FileError::Io { path: path.to_path_buf(), source }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> FileError + '_ {
    move |source| FileError::Json { path: path.to_path_buf(), source }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FileError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(json_err(path))?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FileError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(json_err(path))
}

/// A task as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelFile {
    pub schema: String,
    pub template_id: String,
    pub index: u32,
    pub seed: u64,
    pub level: Level,
    pub reference_solution: Vec<Action>,
}

impl LevelFile {
    pub fn from_instance(inst: &TaskInstance) -> LevelFile {
        LevelFile {
            schema: LEVEL_SCHEMA.into(),
            template_id: inst.template_id.clone(),
            index: inst.index,
            seed: inst.seed,
            level: inst.level.clone(),
            reference_solution: inst.reference_solution.clone(),
        }
    }

    pub fn into_instance(self) -> TaskInstance {
        TaskInstance {
            template_id: self.template_id,
            seed: self.seed,
            index: self.index,
            level: self.level,
            reference_solution: self.reference_solution,
        }
    }

    pub fn load(path: &Path) -> Result<LevelFile, FileError> {
        let f: LevelFile = read_json(path)?;
        if f.schema != LEVEL_SCHEMA {
            return Err(FileError::Schema { path: path.into(), expected: LEVEL_SCHEMA, found: f.schema });
        }
        Ok(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub template_id: String,
    pub scenario: u8,
    pub index: u32,
    pub seed: u64,
    /// Path relative to the manifest.
    pub file: String,
    pub reference_solution: Vec<Action>,
    pub local: Side,
    pub broad: Side,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub base_seed: u64,
    pub tasks_per_template: u32,
    pub tasks: Vec<ManifestEntry>,
}

/// Generated tasks held in memory, in template then index order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TaskSet {
    pub base_seed: u64,
    pub tasks_per_template: u32,
    pub tasks: Vec<TaskInstance>,
}

impl TaskSet {
    pub fn get(&self, template_id: &str, index: u32) -> Option<&TaskInstance> {
        self.tasks.iter().find(|t| t.template_id == template_id && t.index == index)
    }

    pub fn template_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        for t in &self.tasks {
            if ids.last() != Some(&t.template_id) && !ids.contains(&t.template_id) {
                ids.push(t.template_id.clone());
            }
        }
        ids
    }
}

fn side(split: &SplitSpec, template: &str, index: u32) -> Side {
    match split.template(template) {
        Some(t) if t.test_tasks.contains(&index) => Side::Test,
        _ => Side::Train,
    }
}

fn task_file_name(template_id: &str, index: u32) -> String {
    format!("tasks/{template_id}/{index:03}.json")
}

/// Writes one file per task plus the manifest.
pub fn write_task_set(dir: &Path, set: &TaskSet, catalog: &[TaskTemplate]) -> Result<Manifest, FileError> {
    let n = set.tasks_per_template;
    let local = make_splits(catalog, SplitMode::Local, n).ok();
    let broad = make_splits(catalog, SplitMode::Broad, n).ok();
    let mut entries = Vec::with_capacity(set.tasks.len());
    for inst in &set.tasks {
        let file = task_file_name(&inst.template_id, inst.index);
        write_json(&dir.join(&file), &LevelFile::from_instance(inst))?;
        let scenario = catalog.iter().find(|t| t.id == inst.template_id).map(|t| t.scenario.number()).unwrap_or(0);
        entries.push(ManifestEntry {
            template_id: inst.template_id.clone(),
            scenario,
            index: inst.index,
            seed: inst.seed,
            file,
            reference_solution: inst.reference_solution.clone(),
            local: local.as_ref().map(|s| side(s, &inst.template_id, inst.index)).unwrap_or(Side::Train),
            broad: broad.as_ref().map(|s| side(s, &inst.template_id, inst.index)).unwrap_or(Side::Train),
        });
    }
    let manifest =
        Manifest { schema: MANIFEST_SCHEMA.into(), base_seed: set.base_seed, tasks_per_template: n, tasks: entries };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn read_task_set(dir: &Path) -> Result<TaskSet, FileError> {
    let path = dir.join(MANIFEST_FILE);
    let manifest: Manifest = read_json(&path)?;
    if manifest.schema != MANIFEST_SCHEMA {
        return Err(FileError::Schema { path, expected: MANIFEST_SCHEMA, found: manifest.schema });
    }
    let tasks = manifest
        .tasks
        .iter()
        .map(|e| LevelFile::load(&dir.join(&e.file)).map(LevelFile::into_instance))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TaskSet { base_seed: manifest.base_seed, tasks_per_template: manifest.tasks_per_template, tasks })
}

/// Observation kinds a client can ask for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    Image,
    Symbolic,
    Tensor,
}

/// One observation in its JSON wire form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservationFrame {
    /// PNG screenshot, base64.
    Image {
        width: usize,
        height: usize,
        png_base64: String,
    },
    Symbolic {
        frame: SymbolicFrame,
    },
    /// Packed occupancy bits, channel-major then row-major, little-endian
    /// bit order, base64.
    Tensor {
        shape: [usize; 3],
        bits_base64: String,
    },
}

pub fn observe(world: &World, map: &ScreenMap, kind: ObservationKind) -> Result<ObservationFrame, FileError> {
    let b64 = base64::engine::general_purpose::STANDARD;
    Ok(match kind {
        ObservationKind::Image => {
            let shot = render(world, map);
            let mut png_bytes = Vec::new();
            {
                let mut enc = png::Encoder::new(&mut png_bytes, shot.width as u32, shot.height as u32);
                enc.set_color(png::ColorType::Rgb);
                enc.set_depth(png::BitDepth::Eight);
                let mut w = enc.write_header().map_err(|e| FileError::Png(e.to_string()))?;
                w.write_image_data(&shot.pixels).map_err(|e| FileError::Png(e.to_string()))?;
            }
            ObservationFrame::Image { width: shot.width, height: shot.height, png_base64: b64.encode(png_bytes) }
        }
        ObservationKind::Symbolic => ObservationFrame::Symbolic { frame: symbolize(world, map) },
        ObservationKind::Tensor => {
            let t = encode_tensor(&symbolize(world, map)).unwrap_or_default();
            ObservationFrame::Tensor { shape: TENSOR_SHAPE, bits_base64: b64.encode(t.to_bytes()) }
        }
    })
}

/// Channels, rows, columns of the tensor observation.
pub const TENSOR_SHAPE: [usize; 3] = [ObjectClass::COUNT, TENSOR_H, TENSOR_W];

/// Decodes the tensor carried by a frame.
pub fn decode_tensor(bits_base64: &str) -> Option<TensorObs> {
    let bytes = base64::engine::general_purpose::STANDARD.decode(bits_base64).ok()?;
    TensorObs::from_bytes(&bytes)
}

/// Appends records as JSON lines.
pub struct RunLogWriter {
    path: PathBuf,
    out: BufWriter<fs::File>,
}

impl RunLogWriter {
    pub fn create(path: &Path) -> Result<RunLogWriter, FileError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let f = fs::File::create(path).map_err(io_err(path))?;
        Ok(RunLogWriter { path: path.into(), out: BufWriter::new(f) })
    }

    pub fn append(&mut self, r: &AttemptRecord) -> Result<(), FileError> {
        let line = serde_json::to_string(r).map_err(json_err(&self.path))?;
        writeln!(self.out, "{line}").map_err(io_err(&self.path))
    }

    pub fn flush(&mut self) -> Result<(), FileError> {
        self.out.flush().map_err(io_err(&self.path))
    }
}

pub fn read_run_log(path: &Path) -> Result<Vec<AttemptRecord>, FileError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(json_err(path))?);
    }
    Ok(out)
}

/// Generates `count` tasks for each template in parallel. Task `i` uses
/// seed `task_seed(base_seed, i)`.
pub fn generate_task_set(
    templates: &[TaskTemplate],
    count: u32,
    base_seed: u64,
) -> Result<TaskSet, phyq_core::taskgen::TaskGenError> {
    use rayon::prelude::*;
    let jobs: Vec<(&TaskTemplate, u32)> = templates.iter().flat_map(|t| (0..count).map(move |i| (t, i))).collect();
    let tasks = jobs
        .par_iter()
        .map(|(t, i)| phyq_core::taskgen::instantiate_indexed(t, phyq_core::taskgen::task_seed(base_seed, *i), *i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TaskSet { base_seed, tasks_per_template: count, tasks })
}
