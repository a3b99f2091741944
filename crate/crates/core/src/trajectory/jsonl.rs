//! Line-delimited JSON encoding: one header object, then one object per step.
//! A stream may hold several trajectories back to back; every header line
//! starts a new one.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Source, Step, Trajectory, TrajectoryError};

#[derive(Serialize, Deserialize)]
struct Header {
    task_id: String,
    goal: String,
    source: Source,
    #[serde(with = "feedback_bit")]
    env_feedback: Option<bool>,
}

pub(crate) mod feedback_bit {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<bool>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(b) => s.serialize_u8(u8::from(*b)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<bool>, D::Error> {
        match Option::<u8>::deserialize(d)? {
            None => Ok(None),
            Some(0) => Ok(Some(false)),
            Some(1) => Ok(Some(true)),
            Some(other) => Err(serde::de::Error::custom(format!("env_feedback must be 0, 1 or null, got {other}"))),
        }
    }
}

fn fmt_err(line: usize, e: impl std::fmt::Display) -> TrajectoryError {
    TrajectoryError::Format { line, message: e.to_string() }
}

/// Writes one trajectory (header + steps) to `w`.
pub fn write_trajectory_to<W: Write>(w: &mut W, traj: &Trajectory) -> Result<(), TrajectoryError> {
    let header = Header {
        task_id: traj.task_id.clone(),
        goal: traj.goal.clone(),
        source: traj.source,
        env_feedback: traj.env_feedback,
    };
    serde_json::to_writer(&mut *w, &header).map_err(|e| fmt_err(0, e))?;
    w.write_all(b"\n")?;
    for step in &traj.steps {
        serde_json::to_writer(&mut *w, step).map_err(|e| fmt_err(0, e))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), TrajectoryError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_trajectory_to(&mut f, traj)?;
    f.flush()?;
    Ok(())
}

/// Reads every trajectory in a JSONL stream.
pub fn read_trajectories<R: BufRead>(r: R) -> Result<Vec<Trajectory>, TrajectoryError> {
    let mut out: Vec<Trajectory> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| fmt_err(lineno, e))?;
        let is_step = value.get("t").is_some() && value.get("action").is_some();
        if is_step {
            let cur = out.last_mut().ok_or_else(|| fmt_err(lineno, "step before header"))?;
            let step: Step = serde_json::from_value(value).map_err(|e| fmt_err(lineno, e))?;
            cur.steps.push(step);
        } else {
            let h: Header = serde_json::from_value(value).map_err(|e| fmt_err(lineno, e))?;
            out.push(Trajectory {
                task_id: h.task_id,
                goal: h.goal,
                steps: Vec::new(),
                source: h.source,
                env_feedback: h.env_feedback,
            });
        }
    }
    Ok(out)
}

/// Reads a file holding exactly one trajectory.
pub fn read_trajectory(path: &Path) -> Result<Trajectory, TrajectoryError> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut all = read_trajectories(f)?;
    match all.len() {
        1 => Ok(all.pop().unwrap()),
        0 => Err(fmt_err(1, "no trajectory header")),
        n => Err(fmt_err(1, format!("expected one trajectory, found {n}"))),
    }
}
