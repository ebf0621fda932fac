//! Line-delimited pose files written by `sample` and read by `export-viz`.

use std::io::{BufRead, Write};

use anyhow::{bail, Context};
use posediff_core::nalgebra::Vector3;
use posediff_core::{ParamMode, RigidTransform, Rotation};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseHeader {
    pub mode: ParamMode,
    pub cond: usize,
    pub seed: u64,
    pub count: usize,
}

#[derive(Deserialize)]
struct PoseRow {
    q: [f64; 4],
    t: [f64; 3],
}

pub fn write_poses<W: Write>(w: &mut W, header: &PoseHeader, poses: &[RigidTransform]) -> anyhow::Result<()> {
    serde_json::to_writer(&mut *w, header)?;
    writeln!(w)?;
    for p in poses {
        let [qw, qx, qy, qz] = p.rot.wxyz();
        let t = p.trans;
        writeln!(
            w,
            "{{\"q\":[{qw:.16e},{qx:.16e},{qy:.16e},{qz:.16e}],\"t\":[{:.16e},{:.16e},{:.16e}]}}",
            t[0], t[1], t[2]
        )?;
    }
    Ok(())
}

pub fn read_poses<R: BufRead>(r: R) -> anyhow::Result<(PoseHeader, Vec<RigidTransform>)> {
    let mut lines = r.lines();
    let Some(first) = lines.next() else {
        bail!("empty pose file");
    };
    let header: PoseHeader = serde_json::from_str(&first?).context("pose file header")?;
    let mut poses = Vec::with_capacity(header.count);
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: PoseRow = serde_json::from_str(&line).with_context(|| format!("pose file line {}", n + 2))?;
        let [w, x, y, z] = row.q;
        poses.push(RigidTransform {
            rot: Rotation::from_wxyz(w, x, y, z)?,
            trans: Vector3::from(row.t),
        });
    }
    Ok((header, poses))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let mut rng = posediff_core::rng::seeded(4);
        let poses: Vec<RigidTransform> = (0..20)
            .map(|_| RigidTransform {
                rot: posediff_core::distributions::uniform_rotation(&mut rng),
                trans: Vector3::new(0.1, -2.0 / 3.0, 1e-7),
            })
            .collect();
        let header = PoseHeader {
            mode: ParamMode::Se3,
            cond: 2,
            seed: 9,
            count: poses.len(),
        };
        let mut buf = Vec::new();
        write_poses(&mut buf, &header, &poses).unwrap();
        let (h, back) = read_poses(buf.as_slice()).unwrap();
        assert_eq!(h.cond, 2);
        assert_eq!(back, poses);
    }
}
