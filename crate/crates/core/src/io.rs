//! On-disk artifacts: number formatting, model files, dataset directories
//! and output-directory handling.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::objective::{Objective, ObjectiveKind};
use crate::tasks::Task;
use crate::types::{Ball, ClientDataset, Example, FeasibleRegion, ModelState};

/// Float with 10 significant digits, trailing zeros trimmed. Plain decimal
/// for exponents in `[-5, 10)`, scientific otherwise.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.9e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..10).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_zeros(&s)
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

const MAGIC: &[u8; 4] = b"WFRM";
const VERSION: u32 = 1;

/// Model file: `"WFRM"`, `u32` version, `u64` dimension, then `d`
/// little-endian `f64` parameters.
pub fn write_model(path: &Path, model: &ModelState) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(model.dim() as u64).to_le_bytes())?;
    for x in model.params() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<ModelState> {
    let bad = |msg: &str| Error::Format { path: path.to_path_buf(), msg: msg.into() };
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(bad("missing WFRM header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let d = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    if bytes.len() != 16 + 8 * d {
        return Err(bad("length does not match header dimension"));
    }
    let params = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    ModelState::new(params).map_err(|e| bad(&e.to_string()))
}

/// Creates `dir` if absent. An existing non-empty directory is only reused
/// with `force`.
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)?.next().is_some();
        if non_empty && !force {
            return Err(Error::WouldOverwrite(dir.to_path_buf()));
        }
    } else {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

/// Refuses to replace an existing file unless `force`.
pub fn check_overwrite(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::WouldOverwrite(path.to_path_buf()));
    }
    Ok(())
}

fn write_examples(path: &Path, examples: &[Example], data: Option<&ClientDataset>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (i, e) in examples.iter().enumerate() {
        for x in &e.features {
            write!(w, "{x},")?;
        }
        let flag = data.is_some_and(|d| d.is_forget(i));
        writeln!(w, "{},{}", e.label, u8::from(flag))?;
    }
    w.flush()?;
    Ok(())
}

fn read_examples(path: &Path) -> Result<(Vec<Example>, Vec<usize>)> {
    let bad = |line: usize, msg: &str| Error::Format {
        path: path.to_path_buf(),
        msg: format!("line {line}: {msg}"),
    };
    let mut examples = Vec::new();
    let mut forget = Vec::new();
    for (k, line) in BufReader::new(fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<&str> = line.split(',').collect();
        if vals.len() < 3 {
            return Err(bad(k + 1, "need features, label and forget flag"));
        }
        let nums = vals[..vals.len() - 1]
            .iter()
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad(k + 1, "bad number")))
            .collect::<Result<Vec<f64>>>()?;
        match vals[vals.len() - 1].trim() {
            "0" => {}
            "1" => forget.push(examples.len()),
            _ => return Err(bad(k + 1, "forget flag must be 0 or 1")),
        }
        let (label, features) = nums.split_last().expect("non-empty");
        examples.push(Example { features: features.to_vec(), label: *label });
    }
    Ok((examples, forget))
}

/// Writes `task.txt`, `client_<v>.csv` for every client and `test.csv`.
/// Each example line is `features…,label,forget_flag`.
pub fn write_task(dir: &Path, task: &Task) -> Result<()> {
    let mut meta = String::new();
    meta.push_str(&format!("objective = {}\n", task.objective.kind));
    meta.push_str(&format!("lipschitz = {}\n", task.objective.lipschitz));
    meta.push_str(&format!("mu = {}\n", task.objective.mu));
    meta.push_str(&format!("clients = {}\n", task.datasets.len()));
    match &task.region {
        FeasibleRegion::Ball(b) => meta.push_str(&format!("radius = {}\n", b.radius)),
        FeasibleRegion::FullSpace => meta.push_str("radius = none\n"),
        FeasibleRegion::Intersection(..) => {
            return Err(Error::InvalidArgument("task region cannot be an intersection".into()))
        }
    }
    fs::write(dir.join("task.txt"), meta)?;
    for (v, data) in task.datasets.iter().enumerate() {
        write_examples(&dir.join(format!("client_{}.csv", v + 1)), data.examples(), Some(data))?;
    }
    write_examples(&dir.join("test.csv"), &task.test, None)
}

pub fn read_task(dir: &Path) -> Result<Task> {
    let meta_path = dir.join("task.txt");
    let bad = |msg: String| Error::Format { path: meta_path.clone(), msg };
    let text = fs::read_to_string(&meta_path)?;
    let mut get = std::collections::HashMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("bad line '{line}'")))?;
        get.insert(k.trim().to_string(), v.trim().to_string());
    }
    let field = |k: &str| get.get(k).cloned().ok_or_else(|| bad(format!("missing '{k}'")));
    let num = |k: &str| -> Result<f64> { field(k)?.parse().map_err(|_| bad(format!("bad '{k}'"))) };
    let kind: ObjectiveKind = field("objective")?.parse()?;
    let objective = Objective { kind, lipschitz: num("lipschitz")?, mu: num("mu")? };
    let clients: usize = field("clients")?.parse().map_err(|_| bad("bad 'clients'".into()))?;
    let mut datasets = Vec::with_capacity(clients);
    for v in 1..=clients {
        let (ex, forget) = read_examples(&dir.join(format!("client_{v}.csv")))?;
        datasets.push(ClientDataset::with_forget(ex, forget)?);
    }
    let (test, _) = read_examples(&dir.join("test.csv"))?;
    let d = datasets.iter().find_map(|c| c.dim()).unwrap_or(0);
    let region = match field("radius")?.as_str() {
        "none" => FeasibleRegion::FullSpace,
        r => FeasibleRegion::Ball(Ball::new(vec![0.0; d], r.parse().map_err(|_| bad("bad 'radius'".into()))?)?),
    };
    Ok(Task { objective, datasets, test, region })
}

/// `dir/name`
pub fn artifact(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    #[test]
    fn ten_significant_digits() {
        assert_eq!(fmt_f64(9.689_571_256_8), "9.689571257");
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(2.0), "2");
        assert_eq!(fmt_f64(-1234.5), "-1234.5");
        assert_eq!(fmt_f64(1e-7), "1e-7");
        assert_eq!(fmt_f64(1.23456789012e12), "1.23456789e12");
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(12.012925465), "12.01292547");
    }

    #[test]
    fn model_round_trip_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let m = ModelState::new(vec![1.5, -0.25, 3.0]).unwrap();
        write_model(&path, &m).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"WFRM");
        assert_eq!(bytes.len(), 16 + 24);
        assert_eq!(read_model(&path).unwrap(), m);
        fs::write(&path, &bytes[..20]).unwrap();
        assert!(matches!(read_model(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn task_round_trip() {
        let cfg = RunConfig { samples_per_client: 20, test_size: 10, forget_size: 3, ..Default::default() };
        let task = crate::tasks::build_task(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_task(dir.path(), &task).unwrap();
        assert_eq!(read_task(dir.path()).unwrap(), task);
    }

    #[test]
    fn out_dir_guard() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        prepare_out_dir(&out, false).unwrap();
        fs::write(out.join("x"), "1").unwrap();
        assert!(matches!(prepare_out_dir(&out, false), Err(Error::WouldOverwrite(_))));
        prepare_out_dir(&out, true).unwrap();
    }
}
