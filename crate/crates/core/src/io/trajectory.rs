//! Trajectory CSV files.
//!
//! One row per step, columns `t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz` in SI
//! units with body-frame angular velocity. Values are written with 17
//! significant digits so a save/load round trip is bitwise exact. A file with
//! only the first eight columns is accepted as a pose stream; its velocities
//! are rebuilt by differencing consecutive poses.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{UnitQuaternion, Vector3};

use super::atomic_write;
use crate::dynamics::{BlockState, Trajectory, TrajectorySource, DEFAULT_MAX_SPEED};
use crate::error::{Error, Result};

pub const HEADER: [&str; 14] = [
    "t", "px", "py", "pz", "qw", "qx", "qy", "qz", "vx", "vy", "vz", "wx", "wy", "wz",
];

/// Columns of a pose-only file.
const POSE_COLUMNS: usize = 8;

/// Largest deviation of a timestamp from the uniform grid `t0 + i dt`.
pub const TIMESTAMP_TOLERANCE: f64 = 1e-9;

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::InvalidInput(format!("writing trajectory {}: {e}", traj.id));
    w.write_record(HEADER).map_err(wrap)?;
    for (i, s) in traj.states.iter().enumerate() {
        let t = i as f64 * traj.dt;
        let row = std::iter::once(t).chain(s.to_array()).map(|x| format!("{x:.16e}"));
        w.write_record(row).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("writing trajectory {}: {e}", traj.id)))
}

pub fn save_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_trajectory_csv(traj, &mut buf)?;
    atomic_write(path, &buf)
}

/// Reads a trajectory; `id` becomes its identifier.
pub fn read_trajectory_csv<R: Read>(id: &str, input: R, origin: &Path) -> Result<Trajectory> {
    let fail = |message: String| Error::format(origin, message);
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers().map_err(|e| fail(format!("unreadable header: {e}")))?.clone();
    let width = check_header(&header).map_err(fail)?;

    let mut times = Vec::new();
    let mut rows: Vec<[f64; 13]> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let line = line + 2;
        let record = record.map_err(|e| fail(format!("line {line}: {e}")))?;
        if record.len() != width {
            return Err(fail(format!("line {line}: expected {width} fields, found {}", record.len())));
        }
        let mut values = [0.0; 14];
        for (j, field) in record.iter().enumerate() {
            let x: f64 = field
                .parse()
                .map_err(|_| fail(format!("line {line}, column {}: cannot parse {field:?}", HEADER[j])))?;
            if !x.is_finite() {
                return Err(fail(format!("line {line}, column {}: non-finite value", HEADER[j])));
            }
            values[j] = x;
        }
        times.push(values[0]);
        let mut row = [0.0; 13];
        row.copy_from_slice(&values[1..]);
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(fail(format!("need at least 2 rows, found {}", rows.len())));
    }
    let dt = uniform_step(&times).map_err(fail)?;

    let reconstructed = width == POSE_COLUMNS;
    if reconstructed {
        log::warn!("{}: no velocity columns; reconstructing from poses", origin.display());
        reconstruct_velocities(&mut rows, dt);
    }
    let states = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| BlockState::from_array(r).map_err(|e| fail(format!("row {}: {e}", i + 2))))
        .collect::<Result<Vec<_>>>()?;
    let traj = Trajectory {
        id: id.to_string(),
        dt,
        states,
        source: TrajectorySource::Imported,
        solver_converged: true,
        velocities_reconstructed: reconstructed,
    };
    traj.validate(DEFAULT_MAX_SPEED).map_err(|e| fail(e.to_string()))?;
    Ok(traj)
}

/// Loads a trajectory CSV; the id is the file stem.
pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    load_trajectory_as(&id, path)
}

pub fn load_trajectory_as(id: &str, path: &Path) -> Result<Trajectory> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trajectory_csv(id, std::io::BufReader::new(file), path)
}

/// Returns the number of columns: 14, or 8 for a pose-only file.
fn check_header(header: &csv::StringRecord) -> std::result::Result<usize, String> {
    for (j, name) in header.iter().enumerate() {
        match HEADER.get(j) {
            Some(&want) if want == name => {}
            Some(&want) => return Err(format!("header column {} is {name:?}, expected {want:?}", j + 1)),
            None => return Err(format!("unexpected extra header column {name:?}")),
        }
    }
    match header.len() {
        14 | POSE_COLUMNS => Ok(header.len()),
        n => Err(format!("header ends after {n} columns; expected {:?} next", HEADER[n])),
    }
}

fn uniform_step(times: &[f64]) -> std::result::Result<f64, String> {
    let t0 = times[0];
    let dt = times[1] - t0;
    if !(dt > 0.0) {
        return Err(format!("timestamps must increase, got dt = {dt}"));
    }
    for (i, &t) in times.iter().enumerate() {
        let off = (t - (t0 + i as f64 * dt)).abs();
        if off > TIMESTAMP_TOLERANCE {
            return Err(format!(
                "non-uniform timestamp at row {}: t = {t} is {off:.3e} s off the {dt} s grid",
                i + 2
            ));
        }
    }
    Ok(dt)
}

/// Backward differences matching the integrator (`p' = p + dt v'`,
/// `q' = q rot(dt w')`); the first state copies the second's velocity.
fn reconstruct_velocities(rows: &mut [[f64; 13]], dt: f64) {
    let pose = |r: &[f64; 13]| {
        let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(r[3], r[4], r[5], r[6]));
        (Vector3::new(r[0], r[1], r[2]), q)
    };
    for i in (1..rows.len()).rev() {
        let (p0, q0) = pose(&rows[i - 1]);
        let (p1, q1) = pose(&rows[i]);
        let v = (p1 - p0) / dt;
        let w = (q0.inverse() * q1).scaled_axis() / dt;
        rows[i][7..10].copy_from_slice(v.as_slice());
        rows[i][10..13].copy_from_slice(w.as_slice());
    }
    let first = rows[1];
    rows[0][7..13].copy_from_slice(&first[7..13]);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact_model::ContactParams;
    use crate::dynamics::{rollout, Physics, SolverSettings};

    fn toss() -> Trajectory {
        let x0 = BlockState {
            position: Vector3::new(0.1, -0.2, 0.3),
            orientation: UnitQuaternion::from_euler_angles(0.3, -0.7, 1.1),
            linear_velocity: Vector3::new(0.7, 0.1, 0.5),
            angular_velocity: Vector3::new(3.0, -1.0, 2.0),
        };
        let cube = ContactParams::cube(0.05, 0.3);
        rollout("toss", &x0, &cube, 0.005, 80, &Physics::default(), &SolverSettings::default()).unwrap()
    }

    fn to_string(traj: &Trajectory) -> String {
        let mut buf = Vec::new();
        write_trajectory_csv(traj, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    fn parse(text: &str) -> Result<Trajectory> {
        read_trajectory_csv("x", text.as_bytes(), Path::new("x.csv"))
    }

    #[test]
    fn round_trip_is_bitwise() {
        let t = toss();
        let back = parse(&to_string(&t)).unwrap();
        assert_eq!(back.dt.to_bits(), t.dt.to_bits());
        for (a, b) in t.states.iter().zip(&back.states) {
            let (a, b) = (a.to_array(), b.to_array());
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert!(!back.velocities_reconstructed);
    }

    #[test]
    fn shuffled_header_names_first_mismatch() {
        let text = to_string(&toss()).replacen("t,px,py,pz", "t,py,px,pz", 1);
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("column 2") && err.contains("\"py\"") && err.contains("\"px\""), "{err}");
    }

    #[test]
    fn truncated_header_and_bad_values() {
        let text = to_string(&toss());
        let cut: String = text.replacen(",wx,wy,wz", "", 1);
        assert!(parse(&cut).unwrap_err().to_string().contains("header"));
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[3] = lines[3].replacen(',', ",nan,", 1);
        let bad = lines.join("\n");
        assert!(parse(&bad).is_err());
    }

    #[test]
    fn nonuniform_timestamps_rejected() {
        let t = toss();
        let mut lines: Vec<String> = to_string(&t).lines().map(String::from).collect();
        let row = &lines[5];
        let rest = row[row.find(',').unwrap()..].to_string();
        lines[5] = format!("{:.16e}{rest}", 4.0 * t.dt + 2e-9);
        assert!(parse(&lines.join("\n")).unwrap_err().to_string().contains("non-uniform"));
        lines[5] = format!("{:.16e}{rest}", 4.0 * t.dt + 5e-10);
        assert!(parse(&lines.join("\n")).is_ok());
    }

    #[test]
    fn pose_only_file_reconstructs_velocities() {
        let t = toss();
        let pose_only: String = to_string(&t)
            .lines()
            .map(|l| l.split(',').take(POSE_COLUMNS).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join("\n");
        let back = parse(&pose_only).unwrap();
        assert!(back.velocities_reconstructed);
        for (a, b) in t.states.iter().zip(&back.states).skip(1) {
            assert!((a.linear_velocity - b.linear_velocity).norm() < 1e-9);
            assert!((a.angular_velocity - b.angular_velocity).norm() < 1e-6);
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_trajectory(Path::new("/nonexistent/t.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
