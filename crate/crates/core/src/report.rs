//! Residual reports and bit-exact serialization helpers.
//!
//! Floats cross the JSON boundary as binary64 hex strings (the 16 nibble
//! big-endian bit pattern), so a written report reloads bit-identically.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Schema version stamped into every emitted report.
pub const SCHEMA_VERSION: u32 = 1;

/// An f64 serialized as its bit pattern in hex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HexF64(pub f64);

impl Serialize for HexF64 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("0x{:016x}", self.0.to_bits()))
    }
}

impl<'de> Deserialize<'de> for HexF64 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        let stripped = raw.trim_start_matches("0x");
        let bits = u64::from_str_radix(stripped, 16)
            .map_err(|e| serde::de::Error::custom(format!("bad hex float {raw:?}: {e}")))?;
        Ok(HexF64(f64::from_bits(bits)))
    }
}

/// A complex number as a pair of hex floats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HexC64(pub HexF64, pub HexF64);

impl From<C64> for HexC64 {
    fn from(c: C64) -> Self {
        HexC64(HexF64(c.re), HexF64(c.im))
    }
}

impl From<HexC64> for C64 {
    fn from(h: HexC64) -> Self {
        C64::new(h.0 .0, h.1 .0)
    }
}

/// One evaluated sample of an identity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleResidual {
    pub n: i64,
    pub m: i64,
    pub nu: u8,
    pub z: Vec<HexC64>,
    pub residual: HexF64,
}

impl SampleResidual {
    pub fn new(n: i64, m: i64, nu: u8, z: &[C64], residual: f64) -> Self {
        SampleResidual {
            n,
            m,
            nu,
            z: z.iter().map(|&c| c.into()).collect(),
            residual: HexF64(residual),
        }
    }
}

/// Residual statistics for one verified identity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity: String,
    pub sample_count: usize,
    pub max_rel_residual: HexF64,
    pub mean_rel_residual: HexF64,
    pub tolerance: HexF64,
    pub pass: bool,
    pub samples: Vec<SampleResidual>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl IdentityReport {
    pub fn from_samples(
        identity: &str,
        tolerance: f64,
        samples: Vec<SampleResidual>,
    ) -> IdentityReport {
        let residuals: Vec<f64> = samples.iter().map(|s| s.residual.0).collect();
        let max = residuals.iter().cloned().fold(0.0, f64::max);
        let mean = if residuals.is_empty() {
            0.0
        } else {
            residuals.iter().sum::<f64>() / residuals.len() as f64
        };
        IdentityReport {
            identity: identity.to_string(),
            sample_count: samples.len(),
            max_rel_residual: HexF64(max),
            mean_rel_residual: HexF64(mean),
            tolerance: HexF64(tolerance),
            pass: max <= tolerance,
            samples,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn max(&self) -> f64 {
        self.max_rel_residual.0
    }

    /// CSV rows (no header): identity,n,m,nu,Z_re...,Z_im...,residual
    pub fn csv_rows(&self, g: usize) -> String {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&self.identity);
            out.push_str(&format!(",{},{},{}", s.n, s.m, s.nu));
            for i in 0..g {
                let z: C64 = s.z.get(i).cloned().map(Into::into).unwrap_or_default();
                out.push_str(&format!(",{:.17e},{:.17e}", z.re, z.im));
            }
            out.push_str(&format!(",{:.17e}\n", s.residual.0));
        }
        out
    }
}

/// Top-level run report emitted by the harness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub identities: Vec<IdentityReport>,
    pub constants: Option<ConstantsReport>,
    pub w_sign: Option<i8>,
    pub pass: bool,
    #[serde(default)]
    pub notes: Vec<String>,
    /// Wall time in seconds; excluded from determinism comparisons.
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub c1: HexC64,
    pub c2: HexC64,
    pub c3: HexC64,
    pub w1: HexC64,
    pub w2: HexC64,
    pub w3: HexC64,
}

impl RunReport {
    /// Canonical JSON bytes with the wall-time field zeroed, for
    /// determinism comparisons.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut clone = self.clone();
        clone.wall_time_s = 0.0;
        serde_json::to_vec_pretty(&clone).expect("report serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_floats_round_trip_bit_exactly() {
        for v in [0.0, -0.0, 1.0, -1.5, std::f64::consts::PI, 1e-308, f64::MAX] {
            let json = serde_json::to_string(&HexF64(v)).unwrap();
            let back: HexF64 = serde_json::from_str(&json).unwrap();
            assert_eq!(v.to_bits(), back.0.to_bits());
        }
    }

    #[test]
    fn report_statistics_and_pass_flag() {
        let samples = vec![
            SampleResidual::new(0, 0, 0, &[C64::new(0.0, 0.0)], 1e-9),
            SampleResidual::new(1, 0, 1, &[C64::new(0.0, 0.0)], 3e-9),
        ];
        let rep = IdentityReport::from_samples("laxdd", 1e-8, samples);
        assert!(rep.pass);
        assert_eq!(rep.sample_count, 2);
        assert_eq!(rep.max_rel_residual.0, 3e-9);
        assert_eq!(rep.mean_rel_residual.0, 2e-9);
        let rows = rep.csv_rows(1);
        assert_eq!(rows.lines().count(), 2);
        assert!(rows.starts_with("laxdd,0,0,0,"));
    }
}
