//! Target devices, measurements and the preference-weighted satisfaction
//! scores derived from them.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub name: String,
    pub memory_kb: f64,
    pub storage_kb: f64,
    /// Preference value, 1 = least attractive.
    pub rank: u32,
}

impl Device {
    pub fn check(&self) -> Result<()> {
        if !(self.memory_kb > 0.0 && self.storage_kb > 0.0) {
            return Err(Error::Validation(format!(
                "device {} needs positive capacities",
                self.name
            )));
        }
        if self.rank < 1 {
            return Err(Error::Validation(format!("device {} has rank 0", self.name)));
        }
        Ok(())
    }
}

pub fn load_devices(path: impl AsRef<Path>) -> Result<Vec<Device>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let devices: Vec<Device> = serde_json::from_str(&text)?;
    if devices.is_empty() {
        return Err(Error::Validation(format!("{} lists no devices", path.display())));
    }
    for d in &devices {
        d.check()?;
    }
    Ok(devices)
}

/// Footprint of one build. Metrics of an infeasible build are NaN and must
/// not be read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub code_size_kb: f64,
    pub memory_kb: f64,
    pub time_s: f64,
    pub feasible: bool,
}

impl Measurement {
    pub fn new(code_size_kb: f64, memory_kb: f64, time_s: f64) -> Self {
        Self { code_size_kb, memory_kb, time_s, feasible: true }
    }

    pub fn infeasible() -> Self {
        Self { code_size_kb: f64::NAN, memory_kb: f64::NAN, time_s: f64::NAN, feasible: false }
    }
}

/// Sign convention used when folding per-device scores into USR.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsrOrientation {
    /// Relative excess over capacity, negative when the build fits.
    #[default]
    AsWritten,
    /// Relative slack, positive when the build fits.
    Slack,
}

impl FromStr for UsrOrientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as_written" | "as-written" => Ok(Self::AsWritten),
            "slack" => Ok(Self::Slack),
            other => Err(Error::Validation(format!("unknown USR orientation '{other}'"))),
        }
    }
}

/// Device satisfaction rate: mean relative excess of code size over storage
/// and memory over RAM.
pub fn dsr(m: &Measurement, d: &Device) -> Result<f64> {
    if !m.feasible {
        return Err(Error::Contract("DSR of an infeasible measurement".into()));
    }
    let storage = (m.code_size_kb - d.storage_kb) / d.storage_kb;
    let memory = (m.memory_kb - d.memory_kb) / d.memory_kb;
    Ok((storage + memory) / 2.0)
}

/// Rank-weighted mean DSR over `devices`.
pub fn usr(m: &Measurement, devices: &[Device], orientation: UsrOrientation) -> Result<f64> {
    if devices.is_empty() {
        return Err(Error::Contract("USR over an empty device list".into()));
    }
    let vmax = devices.iter().map(|d| d.rank).max().unwrap_or(1) as f64;
    let sign = match orientation {
        UsrOrientation::AsWritten => 1.0,
        UsrOrientation::Slack => -1.0,
    };
    let mut total = 0.0;
    for d in devices {
        total += sign * dsr(m, d)? * (d.rank as f64 / vmax);
    }
    Ok(total / devices.len() as f64)
}

pub fn fits(m: &Measurement, d: &Device) -> bool {
    m.feasible && m.code_size_kb <= d.storage_kb && m.memory_kb <= d.memory_kb
}

/// Number of devices that at least one of `solutions` fits on.
pub fn device_count<'a, I>(solutions: I, devices: &[Device]) -> usize
where
    I: IntoIterator<Item = &'a Measurement>,
{
    let mut reached = vec![false; devices.len()];
    for m in solutions {
        for (hit, d) in reached.iter_mut().zip(devices) {
            *hit |= fits(m, d);
        }
    }
    reached.into_iter().filter(|r| *r).count()
}

/// New devices attained: `after - before`.
pub fn nda(before: usize, after: usize) -> i64 {
    after as i64 - before as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Udr,
    Cs,
    Mu,
    Et,
}

impl Objective {
    pub const ALL: [Objective; 4] = [Objective::Udr, Objective::Cs, Objective::Mu, Objective::Et];

    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Udr => "udr",
            Objective::Cs => "cs",
            Objective::Mu => "mu",
            Objective::Et => "et",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered, duplicate-free subset of objectives used for dominance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectiveSet(Vec<Objective>);

impl ObjectiveSet {
    pub fn all() -> Self {
        Self(Objective::ALL.to_vec())
    }

    pub fn new(objectives: &[Objective]) -> Result<Self> {
        let mut v = objectives.to_vec();
        v.sort();
        v.dedup();
        if v.is_empty() {
            return Err(Error::Validation("objective set is empty".into()));
        }
        Ok(Self(v))
    }

    pub fn as_slice(&self) -> &[Objective] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for ObjectiveSet {
    fn default() -> Self {
        Self::all()
    }
}

impl FromStr for ObjectiveSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parsed = s
            .split(',')
            .map(|t| match t.trim().to_ascii_lowercase().as_str() {
                "udr" => Ok(Objective::Udr),
                "cs" => Ok(Objective::Cs),
                "mu" => Ok(Objective::Mu),
                "et" => Ok(Objective::Et),
                other => Err(Error::Validation(format!("unknown objective '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(&parsed)
    }
}

/// All four minimized objectives of a feasible build.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub udr: f64,
    pub code_size_kb: f64,
    pub memory_kb: f64,
    pub time_s: f64,
}

impl ObjectiveVector {
    pub fn from_measurement(
        m: &Measurement,
        devices: &[Device],
        orientation: UsrOrientation,
    ) -> Result<Self> {
        Ok(Self {
            udr: -usr(m, devices, orientation)?,
            code_size_kb: m.code_size_kb,
            memory_kb: m.memory_kb,
            time_s: m.time_s,
        })
    }

    pub fn get(&self, objective: Objective) -> f64 {
        match objective {
            Objective::Udr => self.udr,
            Objective::Cs => self.code_size_kb,
            Objective::Mu => self.memory_kb,
            Objective::Et => self.time_s,
        }
    }

    pub fn select(&self, set: &ObjectiveSet) -> Vec<f64> {
        set.as_slice().iter().map(|o| self.get(*o)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn photon() -> Device {
        Device { name: "Photon".into(), memory_kb: 128.0, storage_kb: 1000.0, rank: 5 }
    }

    fn jn5168() -> Device {
        Device { name: "JN5168".into(), memory_kb: 32.0, storage_kb: 256.0, rank: 3 }
    }

    fn esp32() -> Device {
        Device { name: "ESP32".into(), memory_kb: 512.0, storage_kb: 4000.0, rank: 4 }
    }

    #[test]
    fn dsr_under_capacity_is_negative() {
        let m = Measurement::new(570.0, 104.816, 0.71);
        assert!((dsr(&m, &photon()).unwrap() - -0.3055625).abs() < 1e-12);
    }

    #[test]
    fn dsr_over_capacity_is_positive() {
        let m = Measurement::new(570.0, 104.816, 0.71);
        // ((570-256)/256 + (104.816-32)/32) / 2
        assert!((dsr(&m, &jn5168()).unwrap() - 1.75103125).abs() < 1e-12);
    }

    #[test]
    fn dsr_zero_slack() {
        let m = Measurement::new(1000.0, 128.0, 1.0);
        assert_eq!(dsr(&m, &photon()).unwrap(), 0.0);
    }

    #[test]
    fn dsr_rejects_infeasible() {
        assert!(matches!(dsr(&Measurement::infeasible(), &photon()), Err(Error::Contract(_))));
    }

    #[test]
    fn usr_rejects_empty_device_list() {
        let m = Measurement::new(570.0, 104.816, 0.71);
        assert!(usr(&m, &[], UsrOrientation::AsWritten).is_err());
    }

    #[test]
    fn usr_single_zero_device() {
        let m = Measurement::new(1000.0, 128.0, 1.0);
        assert_eq!(usr(&m, &[photon()], UsrOrientation::AsWritten).unwrap(), 0.0);
    }

    #[test]
    fn usr_rank_scale_invariance() {
        let m = Measurement::new(570.0, 104.816, 0.71);
        let devices = vec![photon(), esp32(), jn5168()];
        let doubled: Vec<Device> =
            devices.iter().cloned().map(|d| Device { rank: d.rank * 2, ..d }).collect();
        let a = usr(&m, &devices, UsrOrientation::AsWritten).unwrap();
        let b = usr(&m, &doubled, UsrOrientation::AsWritten).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn slack_orientation_negates() {
        let m = Measurement::new(570.0, 104.816, 0.71);
        let devices = vec![photon(), esp32(), jn5168()];
        let a = usr(&m, &devices, UsrOrientation::AsWritten).unwrap();
        let b = usr(&m, &devices, UsrOrientation::Slack).unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn fit_examples() {
        assert!(fits(&Measurement::new(570.0, 126.144, 1.275), &photon()));
        assert!(!fits(&Measurement::new(570.0, 166.496, 0.205), &photon()));
        assert!(!fits(&Measurement::new(570.0, 1817.2, 0.535), &esp32()));
        assert!(!fits(&Measurement::infeasible(), &esp32()));
    }

    #[test]
    fn count_and_nda() {
        let devices = vec![photon(), esp32(), jn5168()];
        let base = [Measurement::new(570.0, 166.496, 0.205)];
        assert_eq!(device_count(&base, &devices), 1);
        let after = [Measurement::new(560.0, 100.0, 0.2), base[0]];
        assert_eq!(device_count(&after, &devices), 2);
        assert_eq!(nda(1, 2), 1);
        assert_eq!(device_count(&[], &devices), 0);
    }

    #[test]
    fn objective_set_parsing() {
        let s: ObjectiveSet = "mu, cs,et".parse().unwrap();
        assert_eq!(s.as_slice(), &[Objective::Cs, Objective::Mu, Objective::Et]);
        assert!("cs,xx".parse::<ObjectiveSet>().is_err());
    }
}
