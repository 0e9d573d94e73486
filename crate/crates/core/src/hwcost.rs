//! System-level area, power and throughput from per-instance calibration.
//!
//! A single datapath instance rarely meets the system throughput on its
//! own, so instances are time-interleaved and area and power scale with
//! the instance count. MAC arrays can additionally be widened to `M` MAC
//! units per user, which scales only the MAC share of area and power.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Mac,
    Ppac,
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arch::Mac => "mac",
            Arch::Ppac => "ppac",
        })
    }
}

/// Figures for one placed-and-routed instance at one operating point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceCalibration {
    pub arch: Arch,
    #[serde(rename = "K")]
    pub bits: u32,
    pub area_mm2: f64,
    pub power_w: f64,
    pub f_clk_hz: f64,
    pub latency_cycles: u64,
}

impl InstanceCalibration {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
            }
        };
        positive("area", self.area_mm2)?;
        positive("power", self.power_w)?;
        positive("clock", self.f_clk_hz)?;
        if self.latency_cycles == 0 || self.bits == 0 {
            return Err(Error::InvalidArgument("latency and K must be positive".into()));
        }
        Ok(())
    }
}

/// Share of area and power taken by the MAC units (excluding the `X^H`
/// memories and the `beta` multipliers).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFractions {
    pub a_mac: f64,
    pub p_mac: f64,
}

impl ReplicationFractions {
    pub fn new(a_mac: f64, p_mac: f64) -> Result<Self> {
        let fr = Self { a_mac, p_mac };
        fr.validate()?;
        Ok(fr)
    }

    /// Fractions must lie in `[0, 1]`; the endpoints are accepted as limits.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a_mac", self.a_mac), ("p_mac", self.p_mac)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Cost of meeting a throughput target with interleaved instances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub instances: u64,
    pub total_area_mm2: f64,
    pub total_power_w: f64,
    pub achieved_throughput: f64,
}

/// Vectors per second of one instance, `f_clk / latency`.
pub fn instance_throughput(cal: &InstanceCalibration) -> f64 {
    cal.f_clk_hz / cal.latency_cycles as f64
}

/// Smallest instance count reaching `target`, with area and power scaled
/// by that count.
pub fn system_cost(cal: &InstanceCalibration, target: f64) -> Result<CostReport> {
    cal.validate()?;
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::InvalidArgument(format!("target throughput must be positive, got {target}")));
    }
    let per = instance_throughput(cal);
    let mut n = (target / per).ceil().max(1.0) as u64;
    // undo floating-point overshoot on exact ratios
    while n > 1 && (n - 1) as f64 * per >= target {
        n -= 1;
    }
    while (n as f64) * per < target {
        n += 1;
    }
    Ok(CostReport {
        instances: n,
        total_area_mm2: n as f64 * cal.area_mm2,
        total_power_w: n as f64 * cal.power_w,
        achieved_throughput: n as f64 * per,
    })
}

fn check_m(m: usize, antennas: usize) -> Result<()> {
    if m == 0 || !m.is_power_of_two() || m > antennas || antennas % m != 0 {
        return Err(Error::InvalidArgument(format!(
            "M={m} must be a power of two dividing B={antennas}"
        )));
    }
    Ok(())
}

/// Estimated instance with `M` MAC units per user from the `M = 1` design.
pub fn replicate_mac_model(
    base: &InstanceCalibration,
    m: usize,
    fr: &ReplicationFractions,
    antennas: usize,
) -> Result<InstanceCalibration> {
    check_m(m, antennas)?;
    fr.validate()?;
    base.validate()?;
    let mf = m as f64;
    Ok(InstanceCalibration {
        area_mm2: base.area_mm2 * ((1.0 - fr.a_mac) + mf * fr.a_mac),
        power_w: base.power_w * ((1.0 - fr.p_mac) + mf * fr.p_mac),
        latency_cycles: crate::bitsim::mac_latency(antennas, m),
        ..*base
    })
}

/// Area-latency product of the `M`-wide array relative to the original.
pub fn at_product(antennas: usize, m: usize, a_mac: f64) -> f64 {
    ((1.0 - a_mac) + m as f64 * a_mac) * crate::bitsim::mac_latency(antennas, m) as f64
}

/// Power-of-two `M` minimizing the area-latency product; ties go to the
/// smaller `M`.
pub fn optimize_m(antennas: usize, fr: &ReplicationFractions) -> Result<usize> {
    fr.validate()?;
    if antennas == 0 || !antennas.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("B={antennas} must be a power of two")));
    }
    let mut best = (f64::INFINITY, 1);
    let mut m = 1;
    while m <= antennas {
        let at = at_product(antennas, m, fr.a_mac);
        if at < best.0 {
            best = (at, m);
        }
        m *= 2;
    }
    Ok(best.1)
}

/// How an explored MAC entry chooses its replication factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MChoice {
    Fixed(usize),
    Auto(AutoTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

/// One calibration record as stored in the calibration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub arch: Arch,
    #[serde(rename = "K")]
    pub bits: u32,
    /// Input resolution the figures belong to; absent means valid for any
    /// `L` (the PPAC entries).
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub input_bits: Option<u32>,
    pub area_mm2: f64,
    pub power_w: f64,
    pub f_clk_hz: f64,
    /// Defaults to `L` for PPAC and `B` for the original MAC array.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_cycles: Option<u64>,
    /// MAC only: enables the replicated (optimized) MAC estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replication: Option<ReplicationFractions>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<MChoice>,
    #[serde(default)]
    pub verified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl CalibrationEntry {
    /// Per-instance calibration at input resolution `l`.
    pub fn resolve(&self, l: u32, antennas: usize) -> Result<InstanceCalibration> {
        let latency_cycles = match self.arch {
            Arch::Ppac => l as u64,
            Arch::Mac => self.latency_cycles.unwrap_or(antennas as u64),
        };
        let cal = InstanceCalibration {
            arch: self.arch,
            bits: self.bits,
            area_mm2: self.area_mm2,
            power_w: self.power_w,
            f_clk_hz: self.f_clk_hz,
            latency_cycles,
        };
        cal.validate()?;
        Ok(cal)
    }

    fn matches(&self, arch: Arch, bits: u32, l: u32) -> bool {
        self.arch == arch && self.bits == bits && self.input_bits.map_or(true, |x| x == l)
    }
}

/// System-level figure copied from a published table, kept for comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemReference {
    pub label: String,
    #[serde(rename = "K")]
    pub bits: u32,
    #[serde(rename = "L")]
    pub input_bits: u32,
    pub target_vectors_per_s: f64,
    pub total_area_mm2: f64,
    pub total_power_w: f64,
    #[serde(default)]
    pub verified: bool,
}

/// Contents of a calibration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSet {
    #[serde(default = "default_schema")]
    pub schema: String,
    #[serde(rename = "B")]
    pub antennas: usize,
    #[serde(rename = "U")]
    pub users: usize,
    pub entries: Vec<CalibrationEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub system_reference: Vec<SystemReference>,
}

pub const CALIBRATION_SCHEMA: &str = "faeq-calibration/1";

fn default_schema() -> String {
    CALIBRATION_SCHEMA.to_string()
}

impl CalibrationSet {
    pub fn from_json(text: &str) -> Result<Self> {
        let set: Self = serde_json::from_str(text)?;
        if set.schema != CALIBRATION_SCHEMA {
            return Err(Error::Malformed(format!("unsupported calibration schema '{}'", set.schema)));
        }
        if set.antennas == 0 || set.users == 0 {
            return Err(Error::Malformed("B and U must be positive".into()));
        }
        Ok(set)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn archs(&self) -> Vec<Arch> {
        let mut a: Vec<Arch> = self.entries.iter().map(|e| e.arch).collect();
        a.sort();
        a.dedup();
        a
    }

    pub fn find(&self, arch: Arch, bits: u32, l: u32) -> Option<&CalibrationEntry> {
        // an L-specific record wins over an L-independent one
        self.entries
            .iter()
            .filter(|e| e.matches(arch, bits, l))
            .max_by_key(|e| e.input_bits.is_some())
    }
}

/// Architecture variant of an exploration row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Original MAC array, one MAC per user.
    Mac,
    /// MAC array replicated to `M` units per user.
    MacOptimized,
    Ppac,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Mac => "mac",
            Variant::MacOptimized => "mac_optimized",
            Variant::Ppac => "ppac",
        })
    }
}

/// One design point of an exploration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub variant: Variant,
    #[serde(rename = "K")]
    pub bits: u32,
    #[serde(rename = "L")]
    pub input_bits: u32,
    #[serde(rename = "M")]
    pub m: usize,
    pub target_vectors_per_s: f64,
    pub instance: InstanceCalibration,
    pub cost: CostReport,
}

/// Cost of every `(variant, K, L, target)` combination covered by the
/// calibration set, ordered by variant, then `K`, `L` and target.
pub fn explore(set: &CalibrationSet, targets: &[f64], ks: &[u32], ls: &[u32]) -> Result<Vec<CostRow>> {
    if targets.is_empty() || ks.is_empty() || ls.is_empty() {
        return Err(Error::InvalidArgument("targets, K list and L list must be nonempty".into()));
    }
    let mut rows = Vec::new();
    for arch in set.archs() {
        for &bits in ks {
            for &l in ls {
                let entry = set
                    .find(arch, bits, l)
                    .ok_or_else(|| Error::MissingCalibration(format!("{arch} K={bits} L={l}")))?;
                let base = entry.resolve(l, set.antennas)?;
                let mut points = vec![(
                    match arch {
                        Arch::Mac => Variant::Mac,
                        Arch::Ppac => Variant::Ppac,
                    },
                    1,
                    base,
                )];
                if let (Arch::Mac, Some(fr)) = (arch, entry.replication) {
                    let m = match entry.m {
                        Some(MChoice::Fixed(m)) => m,
                        _ => optimize_m(set.antennas, &fr)?,
                    };
                    points.push((Variant::MacOptimized, m, replicate_mac_model(&base, m, &fr, set.antennas)?));
                }
                for (variant, m, instance) in points {
                    for &target in targets {
                        rows.push(CostRow {
                            variant,
                            bits,
                            input_bits: l,
                            m,
                            target_vectors_per_s: target,
                            instance,
                            cost: system_cost(&instance, target)?,
                        });
                    }
                }
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.variant, a.bits, a.input_bits)
            .cmp(&(b.variant, b.bits, b.input_bits))
            .then(a.target_vectors_per_s.total_cmp(&b.target_vectors_per_s))
    });
    Ok(rows)
}

/// Rounds to `digits` significant figures.
pub fn round_sig(x: f64, digits: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let mag = x.abs().log10().floor() as i32;
    let factor = 10f64.powi(digits as i32 - 1 - mag);
    (x * factor).round() / factor
}

/// Per-instance PPAC figures for `B = 256`, `U = 16` (area mm², power W,
/// clock Hz for `K = 1, 2, 3`).
pub const PPAC_REFERENCE: [(u32, f64, f64, f64); 3] = [
    (1, 0.164, 0.112, 796e6),
    (2, 0.324, 0.246, 785e6),
    (3, 0.483, 0.383, 784e6),
];

/// Calibration set with the reference PPAC instances and the published
/// original-MAC system totals at 2 G vectors/s.
pub fn reference_calibration() -> CalibrationSet {
    let entries = PPAC_REFERENCE
        .iter()
        .map(|&(bits, area, power, f)| CalibrationEntry {
            arch: Arch::Ppac,
            bits,
            input_bits: None,
            area_mm2: area,
            power_w: power,
            f_clk_hz: f,
            latency_cycles: None,
            replication: None,
            m: None,
            verified: true,
            source: Some("single-instance post-layout results, L=7 operating point".into()),
        })
        .collect();
    let mac = [
        (1, 4, 21.0, 5.0),
        (2, 4, 32.0, 8.3),
        (3, 4, 42.0, 11.8),
        (1, 7, 22.0, 7.2),
        (2, 7, 33.0, 12.0),
        (3, 7, 43.0, 15.9),
    ];
    let system_reference = mac
        .iter()
        .map(|&(bits, l, area, power)| SystemReference {
            label: "original_mac".into(),
            bits,
            input_bits: l,
            target_vectors_per_s: 2e9,
            total_area_mm2: area,
            total_power_w: power,
            verified: true,
        })
        .collect();
    CalibrationSet {
        schema: default_schema(),
        antennas: 256,
        users: 16,
        entries,
        system_reference,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ppac(bits: u32, area: f64, power: f64, f: f64, l: u64) -> InstanceCalibration {
        InstanceCalibration {
            arch: Arch::Ppac,
            bits,
            area_mm2: area,
            power_w: power,
            f_clk_hz: f,
            latency_cycles: l,
        }
    }

    #[test]
    fn throughput_examples() {
        let t = instance_throughput(&ppac(1, 0.164, 0.112, 796e6, 7));
        assert_eq!((t / 1e5).round() / 10.0, 113.7);
        let t = instance_throughput(&ppac(3, 0.483, 0.383, 784e6, 7));
        assert_eq!((t / 1e5).round() / 10.0, 112.0);
        assert_eq!(instance_throughput(&ppac(1, 0.164, 0.112, 796e6, 4)), 199e6);
    }

    #[test]
    fn system_cost_examples() {
        let r = system_cost(&ppac(1, 0.164, 0.112, 796e6, 7), 2e9).unwrap();
        assert_eq!(r.instances, 18);
        assert!((r.total_area_mm2 - 2.952).abs() < 1e-12);
        assert!((r.total_power_w - 2.016).abs() < 1e-12);
        let r = system_cost(&ppac(3, 0.483, 0.383, 784e6, 4), 2e9).unwrap();
        assert_eq!(r.instances, 11);
        assert_eq!(round_sig(r.total_area_mm2, 3), 5.31);
        assert_eq!(round_sig(r.total_power_w, 3), 4.21);
        let r = system_cost(&ppac(1, 0.2, 0.1, 1e8, 1), 5e7).unwrap();
        assert_eq!((r.instances, r.total_area_mm2, r.total_power_w), (1, 0.2, 0.1));
        // exact ratio must not round up
        assert_eq!(system_cost(&ppac(1, 0.2, 0.1, 1e8, 1), 2e9).unwrap().instances, 20);
        assert!(system_cost(&ppac(1, 0.2, 0.1, 1e8, 1), 0.0).is_err());
    }

    fn mac_base() -> InstanceCalibration {
        InstanceCalibration {
            arch: Arch::Mac,
            bits: 1,
            area_mm2: 1.0,
            power_w: 1.0,
            f_clk_hz: 1e9,
            latency_cycles: 256,
        }
    }

    #[test]
    fn replication_examples() {
        let fr = ReplicationFractions::new(0.2, 0.75).unwrap();
        assert_eq!(replicate_mac_model(&mac_base(), 1, &fr, 256).unwrap(), mac_base());
        let r = replicate_mac_model(&mac_base(), 16, &fr, 256).unwrap();
        assert!((r.area_mm2 - 4.0).abs() < 1e-12);
        assert!((r.power_w - 12.25).abs() < 1e-12);
        assert_eq!(r.latency_cycles, 20);
        assert_eq!(r.f_clk_hz, 1e9);
        assert!(replicate_mac_model(&mac_base(), 3, &fr, 256).is_err());
        assert!(ReplicationFractions::new(1.5, 0.1).is_err());
    }

    fn mac_latency_of(m: usize) -> u64 {
        crate::bitsim::mac_latency(256, m)
    }

    #[test]
    fn optimize_m_examples() {
        assert!((at_product(256, 8, 0.2) - 84.0).abs() < 1e-9);
        assert!((at_product(256, 16, 0.2) - 80.0).abs() < 1e-9);
        assert!((at_product(256, 32, 0.2) - 93.6).abs() < 1e-9);
        assert_eq!(optimize_m(256, &ReplicationFractions::new(0.2, 0.5).unwrap()).unwrap(), 16);
        assert_eq!(optimize_m(256, &ReplicationFractions::new(1.0, 0.5).unwrap()).unwrap(), 1);
        // with a flat area the latency B/M + log2 M ties between M = B/2 and M = B
        assert_eq!(mac_latency_of(128), mac_latency_of(256));
        assert_eq!(optimize_m(256, &ReplicationFractions::new(0.0, 0.5).unwrap()).unwrap(), 128);
        assert_eq!(optimize_m(256, &ReplicationFractions::new(1e-6, 0.5).unwrap()).unwrap(), 128);
        assert!(optimize_m(96, &ReplicationFractions::new(0.2, 0.5).unwrap()).is_err());
    }

    #[test]
    fn reference_sweep_matches_published_table() {
        let rows = explore(&reference_calibration(), &[2e9], &[1, 2, 3], &[4, 7]).unwrap();
        let mut by_l: Vec<&CostRow> = rows.iter().collect();
        by_l.sort_by_key(|r| (r.input_bits, r.bits));
        let areas: Vec<f64> = by_l.iter().map(|r| round_sig(r.cost.total_area_mm2, 2)).collect();
        let powers: Vec<f64> = by_l.iter().map(|r| round_sig(r.cost.total_power_w, 2)).collect();
        assert_eq!(areas, vec![1.8, 3.6, 5.3, 3.0, 5.8, 8.7]);
        assert_eq!(powers, vec![1.2, 2.7, 4.2, 2.0, 4.4, 6.9]);
        assert!(explore(&reference_calibration(), &[2e9], &[], &[4]).is_err());
        assert!(matches!(
            explore(&reference_calibration(), &[2e9], &[4], &[4]),
            Err(Error::MissingCalibration(_))
        ));
    }

    #[test]
    fn explore_emits_mac_variants_in_order() {
        let mut set = reference_calibration();
        set.entries.push(CalibrationEntry {
            arch: Arch::Mac,
            bits: 1,
            input_bits: Some(4),
            area_mm2: 1.0,
            power_w: 0.3,
            f_clk_hz: 1e9,
            latency_cycles: None,
            replication: Some(ReplicationFractions::new(0.2, 0.75).unwrap()),
            m: Some(MChoice::Auto(AutoTag::Auto)),
            verified: false,
            source: None,
        });
        let rows = explore(&set, &[1e9, 2e9], &[1], &[4]).unwrap();
        let variants: Vec<_> = rows.iter().map(|r| (r.variant, r.target_vectors_per_s)).collect();
        assert_eq!(
            variants,
            vec![
                (Variant::Mac, 1e9),
                (Variant::Mac, 2e9),
                (Variant::MacOptimized, 1e9),
                (Variant::MacOptimized, 2e9),
                (Variant::Ppac, 1e9),
                (Variant::Ppac, 2e9),
            ]
        );
        assert_eq!(rows[2].m, 16);
        assert_eq!(rows[0].instance.latency_cycles, 256);
    }

    #[test]
    fn calibration_json_round_trip() {
        let set = reference_calibration();
        let back = CalibrationSet::from_json(&set.to_json().unwrap()).unwrap();
        assert_eq!(back, set);
        let fixed = r#"{"schema":"faeq-calibration/1","B":256,"U":16,"entries":[
            {"arch":"mac","K":1,"L":4,"area_mm2":1,"power_w":1,"f_clk_hz":1e9,"M":8,
             "replication":{"a_mac":0.2,"p_mac":0.5}},
            {"arch":"mac","K":2,"L":4,"area_mm2":1,"power_w":1,"f_clk_hz":1e9,"M":"auto",
             "replication":{"a_mac":0.2,"p_mac":0.5}}]}"#;
        let set = CalibrationSet::from_json(fixed).unwrap();
        assert_eq!(set.entries[0].m, Some(MChoice::Fixed(8)));
        assert_eq!(set.entries[1].m, Some(MChoice::Auto(AutoTag::Auto)));
        assert!(CalibrationSet::from_json(&fixed.replace("faeq-calibration/1", "other")).is_err());
    }

    #[test]
    fn round_sig_examples() {
        assert_eq!(round_sig(2.952, 2), 3.0);
        assert_eq!(round_sig(5.313, 2), 5.3);
        assert_eq!(round_sig(11.83, 2), 12.0);
        assert_eq!(round_sig(0.0, 2), 0.0);
    }

    proptest! {
        #[test]
        fn system_cost_is_monotone_and_minimal(
            f in 1e6f64..2e9, lat in 1u64..300, area in 0.01f64..10.0,
            t1 in 1e6f64..1e10, t2 in 1e6f64..1e10,
        ) {
            let cal = ppac(1, area, area / 2.0, f, lat);
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let a = system_cost(&cal, lo).unwrap();
            let b = system_cost(&cal, hi).unwrap();
            prop_assert!(a.instances <= b.instances);
            prop_assert!(a.total_area_mm2 <= b.total_area_mm2);
            prop_assert!(a.total_power_w <= b.total_power_w);
            prop_assert!(a.achieved_throughput >= lo);
            prop_assert!(a.instances == 1 || ((a.instances - 1) as f64) * instance_throughput(&cal) < lo);
        }

        #[test]
        fn full_mac_share_scales_by_m(exp in 0u32..9, area in 0.1f64..10.0) {
            let m = 1usize << exp;
            let base = InstanceCalibration { area_mm2: area, power_w: area * 3.0, ..mac_base() };
            let fr = ReplicationFractions::new(1.0, 1.0).unwrap();
            let r = replicate_mac_model(&base, m, &fr, 256).unwrap();
            prop_assert!((r.area_mm2 - area * m as f64).abs() <= 1e-12 * r.area_mm2);
            prop_assert!((r.power_w - 3.0 * area * m as f64).abs() <= 1e-12 * r.power_w);
        }

        #[test]
        fn optimal_m_divides_b(log_b in 0u32..12, a in 0.0f64..=1.0) {
            let b = 1usize << log_b;
            let m = optimize_m(b, &ReplicationFractions::new(a, 0.5).unwrap()).unwrap();
            prop_assert!(m.is_power_of_two() && b % m == 0);
        }
    }
}
