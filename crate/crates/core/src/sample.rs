//! Training samples `((obs, instruction), action tokens)` and their JSON-lines form.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::instruction::{Form, Instruction};
use crate::media::ImageId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub id: String,
    pub episode_id: String,
    /// Frame index in the source episode the observation was taken from.
    pub timestep: u32,
    /// Static and wrist views concatenated side by side.
    pub obs: ImageId,
    pub instruction: Instruction,
    pub target: Vec<u32>,
}

impl TrainingSample {
    pub fn form(&self) -> Form {
        self.instruction.form
    }

    pub fn validate(&self, tokens_per_chunk: usize) -> Result<()> {
        self.instruction.validate()?;
        if self.target.len() != tokens_per_chunk {
            return Err(CoreError::InvalidInstruction(format!(
                "sample {} has {} target tokens, expected {tokens_per_chunk}",
                self.id,
                self.target.len()
            )));
        }
        Ok(())
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CoreError::io(parent, e))?;
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let file = File::create(&tmp).map_err(|e| CoreError::io(&tmp, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| CoreError::json(path, e))?;
        w.write_all(b"\n").map_err(|e| CoreError::io(&tmp, e))?;
    }
    w.flush().map_err(|e| CoreError::io(&tmp, e))?;
    drop(w);
    fs::rename(&tmp, path).map_err(|e| CoreError::io(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| CoreError::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| CoreError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CoreError::json(path, e))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instruction::Segment;

    fn id(n: u8) -> ImageId {
        ImageId::from_hex(format!("{:032x}", n)).unwrap()
    }

    #[test]
    fn jsonl_round_trip_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let sample = TrainingSample {
            id: "vos-ep1-0".into(),
            episode_id: "ep1".into(),
            timestep: 0,
            obs: id(1),
            instruction: Instruction::new(
                Form::Vos,
                vec![Segment::Text("lift the ".into()), Segment::Image(id(2))],
            )
            .unwrap(),
            target: (151_808..151_843).collect(),
        };
        sample.validate(35).unwrap();
        let path = dir.path().join("samples.jsonl");
        write_jsonl(&path, std::slice::from_ref(&sample)).unwrap();
        let bytes = fs::read(&path).unwrap();
        let back: Vec<TrainingSample> = read_jsonl(&path).unwrap();
        assert_eq!(back, vec![sample]);
        write_jsonl(&path, &back).unwrap();
        assert_eq!(fs::read(&path).unwrap(), bytes);
        assert!(back[0].validate(34).is_err());
    }
}
