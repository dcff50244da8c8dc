//! File formats: manifests, PPM frames, track and racing-line JSON,
//! trajectory CSV and evaluation session directories.

use std::fs;
use std::path::{Path, PathBuf};

use drive_core::evaluation::{Condition, Session};
use drive_core::frame::{decode_pnm, encode_pnm, Frame};
use drive_core::geometry::{Segment, Vec2};
use drive_core::manifest::{FrameManifest, ManifestError};
use drive_core::simworld::session::{Trajectory, TrajectorySample};
use drive_core::simworld::track::{RacingLine, TrackError, TrackModel, DEFAULT_ARROW_SPACING};
use serde::{Deserialize, Serialize};

pub const TRAJECTORY_HEADER: [&str; 4] = ["t_ns", "x_m", "y_m", "speed_mps"];
pub const UNITS: &str = "meters";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Manifest { path: PathBuf, source: ManifestError },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Track { path: PathBuf, source: TrackError },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

fn read(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|source| IoError::Io { path: path.into(), source })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    fs::write(path, bytes).map_err(|source| IoError::Io { path: path.into(), source })
}

fn format_err(path: &Path, reason: impl Into<String>) -> IoError {
    IoError::Format { path: path.into(), reason: reason.into() }
}

pub fn load_manifest(path: &Path) -> Result<FrameManifest, IoError> {
    let text = String::from_utf8(read(path)?).map_err(|_| format_err(path, "manifest is not UTF-8"))?;
    let base = path.parent().unwrap_or(Path::new("")).to_string_lossy().into_owned();
    FrameManifest::parse(&text, base).map_err(|source| IoError::Manifest { path: path.into(), source })
}

pub fn read_ppm(path: &Path, id: u64, ts_ns: u64, source_id: &str) -> Result<Frame, IoError> {
    decode_pnm(&read(path)?, id, ts_ns, source_id).map_err(|e| format_err(path, e.to_string()))
}

pub fn write_ppm(path: &Path, frame: &Frame) -> Result<(), IoError> {
    write(path, &encode_pnm(frame))
}

fn pts(v: &[[f64; 2]]) -> Vec<Vec2> {
    v.iter().map(|&p| Vec2::from(p)).collect()
}

fn arr(v: &[Vec2]) -> Vec<[f64; 2]> {
    v.iter().map(|&p| p.into()).collect()
}

fn default_spacing() -> f64 {
    DEFAULT_ARROW_SPACING
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackFile {
    pub units: String,
    pub half_width: f64,
    pub centerline: Vec<[f64; 2]>,
    pub start_line: [[f64; 2]; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub racing_line: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_spacing")]
    pub arrow_spacing: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RacingLineFile {
    pub units: String,
    pub points: Vec<[f64; 2]>,
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    serde_json::from_slice(&read(path)?).map_err(|source| IoError::Json { path: path.into(), source })
}

fn check_units(path: &Path, units: &str) -> Result<(), IoError> {
    if units != UNITS {
        return Err(format_err(path, format!("units must be \"{UNITS}\", got {units:?}")));
    }
    Ok(())
}

/// Track plus its racing line. Without a `racing_line` field the line comes
/// from the centerline offset heuristic.
pub fn load_track(path: &Path) -> Result<(TrackModel, RacingLine), IoError> {
    track_from_json(path, &read(path)?)
}

/// Parse track JSON; `path` is only used in error messages.
pub fn track_from_json(path: &Path, bytes: &[u8]) -> Result<(TrackModel, RacingLine), IoError> {
    let f: TrackFile = serde_json::from_slice(bytes).map_err(|source| IoError::Json { path: path.into(), source })?;
    check_units(path, &f.units)?;
    let [a, b] = f.start_line;
    let track = TrackModel::new(pts(&f.centerline), f.half_width, Segment::new(a.into(), b.into()))
        .map_err(|source| IoError::Track { path: path.into(), source })?;
    let line = match &f.racing_line {
        Some(p) => RacingLine::from_points(pts(p), f.arrow_spacing),
        None => RacingLine::offset_heuristic(&track, f.arrow_spacing),
    };
    line.check_within(&track).map_err(|source| IoError::Track { path: path.into(), source })?;
    Ok((track, line))
}

pub fn track_file(track: &TrackModel, line: Option<&RacingLine>, arrow_spacing: f64) -> TrackFile {
    let s = track.start_line();
    TrackFile {
        units: UNITS.into(),
        half_width: track.half_width(),
        centerline: arr(track.centerline()),
        start_line: [s.a.into(), s.b.into()],
        racing_line: line.map(|l| arr(l.points())),
        arrow_spacing,
    }
}

pub fn save_track(path: &Path, file: &TrackFile) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(file).expect("track serializes");
    text.push('\n');
    write(path, text.as_bytes())
}

/// Racing-line polyline from either a racing-line file or a track file.
pub fn load_racing_line(path: &Path) -> Result<Vec<Vec2>, IoError> {
    let v: serde_json::Value = parse_json(path)?;
    if v.get("centerline").is_some() {
        return load_track(path).map(|(_, l)| l.points().to_vec());
    }
    let f: RacingLineFile = serde_json::from_value(v).map_err(|source| IoError::Json { path: path.into(), source })?;
    check_units(path, &f.units)?;
    if f.points.len() < 2 {
        return Err(format_err(path, "racing line needs at least 2 points"));
    }
    Ok(pts(&f.points))
}

pub fn save_racing_line(path: &Path, points: &[Vec2]) -> Result<(), IoError> {
    let f = RacingLineFile { units: UNITS.into(), points: arr(points) };
    let mut text = serde_json::to_string_pretty(&f).expect("racing line serializes");
    text.push('\n');
    write(path, text.as_bytes())
}

/// Trajectory CSV text. Floats use the shortest representation that reads
/// back to the same value.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(TRAJECTORY_HEADER).expect("in-memory write");
    for s in traj.samples() {
        w.write_record([s.t_ns.to_string(), s.x.to_string(), s.y.to_string(), s.speed.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), IoError> {
    write(path, trajectory_csv(traj).as_bytes())
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory, IoError> {
    let bytes = read(path)?;
    let csv_err = |source| IoError::Csv { path: path.into(), source };
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(&bytes[..]);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != TRAJECTORY_HEADER {
        return Err(format_err(path, format!("header must be {}", TRAJECTORY_HEADER.join(","))));
    }
    let mut samples = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = i + 2;
        let field = |k: usize| rec.get(k).ok_or_else(|| format_err(path, format!("line {line}: missing field")));
        let num = |k: usize| -> Result<f64, IoError> {
            let v: f64 = field(k)?.trim().parse().map_err(|_| format_err(path, format!("line {line}: bad number")))?;
            if v.is_finite() { Ok(v) } else { Err(format_err(path, format!("line {line}: non-finite value"))) }
        };
        let t_ns = field(0)?.trim().parse().map_err(|_| format_err(path, format!("line {line}: bad t_ns")))?;
        samples.push(TrajectorySample { t_ns, x: num(1)?, y: num(2)?, speed: num(3)? });
    }
    Trajectory::from_samples(samples).map_err(|e| format_err(path, e.to_string()))
}

/// Session id and condition from a file stem such as `p3_A`.
pub fn parse_session_stem(stem: &str) -> Option<(String, Condition)> {
    let (_, cond) = stem.rsplit_once('_')?;
    Some((stem.to_string(), Condition::parse(cond)?))
}

/// Every `<id>_<A|B>.csv` trajectory in `dir`, sorted by file name.
pub fn load_sessions(dir: &Path) -> Result<Vec<Session>, IoError> {
    let entries = fs::read_dir(dir).map_err(|source| IoError::Io { path: dir.into(), source })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for path in files {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let (id, condition) = parse_session_stem(&stem)
            .ok_or_else(|| format_err(&path, "session files are named <id>_<A|B>.csv"))?;
        out.push(Session { id, condition, trajectory: read_trajectory(&path)? });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_csv_round_trip() {
        let t = Trajectory::from_samples(vec![
            TrajectorySample { t_ns: 0, x: 0.1, y: -200.0, speed: 0.0 },
            TrajectorySample { t_ns: 10_000_000, x: 1.0 / 3.0, y: -199.99999999, speed: 13.89 },
        ])
        .unwrap();
        let text = trajectory_csv(&t);
        assert!(text.starts_with("t_ns,x_m,y_m,speed_mps\n0,0.1,-200,0\n"));
        assert!(!text.contains('\r'));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p1_A.csv");
        write_trajectory(&p, &t).unwrap();
        assert_eq!(read_trajectory(&p).unwrap(), t);
    }

    #[test]
    fn trajectory_header_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "t,x,y,v\n0,0,0,0\n").unwrap();
        assert!(matches!(read_trajectory(&p), Err(IoError::Format { .. })));
    }

    #[test]
    fn session_stems() {
        assert_eq!(parse_session_stem("p3_A"), Some(("p3_A".into(), Condition::A)));
        assert_eq!(parse_session_stem("run_7_b"), Some(("run_7_b".into(), Condition::B)));
        assert_eq!(parse_session_stem("p3"), None);
    }

    #[test]
    fn track_json_round_trip() {
        let track = TrackModel::default_track();
        let line = RacingLine::offset_heuristic(&track, DEFAULT_ARROW_SPACING);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.json");
        save_track(&p, &track_file(&track, Some(&line), DEFAULT_ARROW_SPACING)).unwrap();
        let (t2, l2) = load_track(&p).unwrap();
        assert_eq!(t2, track);
        assert_eq!(l2, line);
        assert_eq!(load_racing_line(&p).unwrap(), line.points());
    }

    #[test]
    fn shipped_default_track_matches_the_builtin() {
        let bytes = include_bytes!("../data/default_track.json");
        let (t, l) = track_from_json(Path::new("default_track.json"), bytes).unwrap();
        assert_eq!(t, TrackModel::default_track());
        assert_eq!(l, RacingLine::offset_heuristic(&t, DEFAULT_ARROW_SPACING));
    }

    #[test]
    fn track_units_are_checked() {
        let track = TrackModel::default_track();
        let mut f = track_file(&track, None, 10.0);
        f.units = "feet".into();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.json");
        save_track(&p, &f).unwrap();
        assert!(load_track(&p).unwrap_err().to_string().contains("units"));
    }
}
