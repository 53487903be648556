//! Experimental tally files and the reproduction pipeline.
//!
//! # Tally CSV
//!
//! ```text
//! # loss_db=45
//! # N=1e11
//! # mu=9.78e-4
//! # p_s=0.07
//! # n_det=363094
//! # m_slices=8                 (optional, default 8)
//! # m_s=...                    (optional; measured sampled errors)
//! # n_sifted=...               (optional; key bits after sampling)
//! # component:BS-3-1=3.61      (optional; device loss in dB, metadata only)
//! phase_a,phase_b,d1_count,d2_count
//! 0,0,4669,40
//! pi/4,pi/4,4835,42
//! ...
//! 0,pi,44,6940
//! ```
//!
//! Phases are total modulated phases written as `0`, `pi`, `kpi`, `pi/d` or
//! `kpi/d` and must be multiples of `2pi/M`. Only pairs whose phases are equal
//! or differ by pi are accepted.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyrate::{evaluate, KeyRateInputs, KeyRateResult, Mode};
use crate::params::DEFAULT_F_EC;
use crate::security::{Conventions, SecurityBudget, SUPPORTED_SLICES};
use crate::tally::{ObservedTally, SimDiagnostics};

pub const TALLY_HEADER: [&str; 4] = ["phase_a", "phase_b", "d1_count", "d2_count"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub loss_db: f64,
    pub n_rounds: f64,
    pub mu: f64,
    pub p_s: f64,
    pub tally: ObservedTally,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component_losses: Option<BTreeMap<String, f64>>,
}

impl ExperimentRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.loss_db > 0.0) {
            return Err(Error::schema(0, format!("loss_db = {} must be > 0", self.loss_db)));
        }
        if !(self.mu > 0.0) {
            return Err(Error::schema(0, format!("mu = {} must be > 0", self.mu)));
        }
        if !(self.p_s > 0.0 && self.p_s < 1.0) {
            return Err(Error::schema(0, format!("p_s = {} must be in (0, 1)", self.p_s)));
        }
        if !(self.n_rounds >= 1.0) {
            return Err(Error::schema(0, format!("N = {} must be >= 1", self.n_rounds)));
        }
        self.tally.check_consistency()
    }
}

/// How the matched rows relate to the sampled test bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountsInterpretation {
    /// The rows are the sifted key; the test sample was removed beforehand.
    #[default]
    SiftedKey,
    /// The rows hold key and test bits together.
    IncludesTestSample,
}

impl std::str::FromStr for CountsInterpretation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sifted" | "sifted_key" => Ok(Self::SiftedKey),
            "with_test" | "includes_test_sample" => Ok(Self::IncludesTestSample),
            other => Err(format!("unknown counts interpretation `{other}` (expected sifted or with_test)")),
        }
    }
}

fn parse_phase(raw: &str, m_slices: u32, line: usize) -> Result<u32> {
    let s: String = raw
        .chars()
        .filter(|c| !c.is_whitespace() && *c != '*')
        .collect::<String>()
        .replace('π', "pi");
    let bad = || Error::schema(line, format!("unrecognized phase `{raw}`"));

    let (num, den) = if s == "0" {
        (0u64, 1u64)
    } else {
        let (head, den) = match s.split_once('/') {
            Some((h, d)) => (h, d.parse::<u64>().map_err(|_| bad())?),
            None => (s.as_str(), 1),
        };
        let coef = head.strip_suffix("pi").ok_or_else(bad)?;
        let num = if coef.is_empty() {
            1
        } else {
            coef.parse::<u64>().map_err(|_| bad())?
        };
        if den == 0 {
            return Err(bad());
        }
        (num, den)
    };
    // phase = (num/den) pi = index * 2pi / M  =>  index = num M / (2 den)
    let scaled = num * m_slices as u64;
    if scaled % (2 * den) != 0 {
        return Err(Error::schema(
            line,
            format!("phase `{raw}` is not a multiple of 2pi/{m_slices}"),
        ));
    }
    let index = scaled / (2 * den);
    if index >= m_slices as u64 {
        return Err(Error::schema(line, format!("phase `{raw}` is not in [0, 2pi)")));
    }
    Ok(index as u32)
}

/// Formats phase index `j` of `M` as a reduced multiple of pi.
pub fn format_phase(index: u32, m_slices: u32) -> String {
    fn gcd(a: u32, b: u32) -> u32 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    if index == 0 {
        return "0".into();
    }
    let (num, den) = (2 * index, m_slices);
    let g = gcd(num, den);
    let (num, den) = (num / g, den / g);
    match (num, den) {
        (1, 1) => "pi".into(),
        (n, 1) => format!("{n}pi"),
        (1, d) => format!("pi/{d}"),
        (n, d) => format!("{n}pi/{d}"),
    }
}

#[derive(Default)]
struct Metadata {
    values: BTreeMap<String, (String, usize)>,
    components: BTreeMap<String, f64>,
}

impl Metadata {
    fn number(&self, keys: &[&str]) -> Result<Option<f64>> {
        for key in keys {
            if let Some((raw, line)) = self.values.get(*key) {
                let v = raw
                    .parse::<f64>()
                    .map_err(|_| Error::schema(*line, format!("`{key}` = `{raw}` is not a number")))?;
                return Ok(Some(v));
            }
        }
        Ok(None)
    }

    fn required(&self, keys: &[&str]) -> Result<f64> {
        self.number(keys)?.ok_or_else(|| {
            Error::schema(0, format!("missing metadata line `# {}=...`", keys[0]))
        })
    }

    fn count(&self, key: &str) -> Result<Option<u64>> {
        match self.values.get(key) {
            None => Ok(None),
            Some((raw, line)) => raw
                .parse::<u64>()
                .map(Some)
                .map_err(|_| Error::schema(*line, format!("`{key}` = `{raw}` is not a count"))),
        }
    }
}

fn read_metadata(text: &str) -> Result<Metadata> {
    let mut meta = Metadata::default();
    for (i, line) in text.lines().enumerate() {
        let Some(body) = line.trim_start().strip_prefix('#') else {
            continue;
        };
        let Some((key, value)) = body.split_once('=') else {
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let lineno = i + 1;
        if let Some(name) = key.strip_prefix("component:") {
            let db = value.parse::<f64>().map_err(|_| {
                Error::schema(lineno, format!("component loss `{value}` is not a number"))
            })?;
            meta.components.insert(name.trim().to_string(), db);
        } else if meta.values.insert(key.to_string(), (value.to_string(), lineno)).is_some() {
            return Err(Error::schema(lineno, format!("duplicate metadata key `{key}`")));
        }
    }
    Ok(meta)
}

/// Parses a tally CSV from memory.
pub fn parse_tally_str(text: &str) -> Result<ExperimentRecord> {
    let meta = read_metadata(text)?;
    let m_slices = match meta.number(&["m_slices", "M"])? {
        None => 8,
        Some(m) if m.fract() == 0.0 && SUPPORTED_SLICES.contains(&(m as u32)) => m as u32,
        Some(m) => return Err(Error::schema(0, format!("m_slices = {m} must be 6 or 8"))),
    };

    let mut tally = ObservedTally::empty(m_slices);
    let mut seen = vec![false; tally.matched.len()];
    let mut rows = 0usize;

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::schema(0, "no data section"));
    }
    if header != TALLY_HEADER {
        let line = reader.position().line() as usize;
        return Err(Error::schema(
            line,
            format!("expected header `{}`, found `{}`", TALLY_HEADER.join(","), header.join(",")),
        ));
    }
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 4 {
            return Err(Error::schema(line, format!("expected 4 fields, found {}", record.len())));
        }
        let phase_a = parse_phase(&record[0], m_slices, line)?;
        let phase_b = parse_phase(&record[1], m_slices, line)?;
        let count = |i: usize| -> Result<u64> {
            record[i].parse::<u64>().map_err(|_| {
                Error::schema(line, format!("`{}` is not a nonnegative count", &record[i]))
            })
        };
        let (d1, d2) = (count(2)?, count(3)?);
        let idx = tally.row_index(phase_a, phase_b).ok_or_else(|| {
            Error::schema(
                line,
                format!(
                    "phase pair ({}, {}) is neither equal nor opposite",
                    &record[0], &record[1]
                ),
            )
        })?;
        if std::mem::replace(&mut seen[idx], true) {
            return Err(Error::schema(
                line,
                format!("duplicate row for phase pair ({}, {})", &record[0], &record[1]),
            ));
        }
        tally.matched[idx].d1 = d1;
        tally.matched[idx].d2 = d2;
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::schema(0, "data section has no rows"));
    }

    let n_rounds = meta.required(&["N", "n_rounds"])?;
    tally.n_rounds = if n_rounds.fract() == 0.0 && n_rounds <= u64::MAX as f64 {
        n_rounds as u64
    } else {
        return Err(Error::schema(0, format!("N = {n_rounds} is not a whole number")));
    };
    tally.n_det = meta
        .count("n_det")?
        .ok_or_else(|| Error::schema(0, "missing metadata line `# n_det=...`"))?;
    tally.m_s = meta.count("m_s")?;
    tally.n_sifted = meta.count("n_sifted")?;
    if let Some(double_clicks) = meta.count("double_clicks")? {
        tally.diagnostics = Some(SimDiagnostics {
            double_clicks,
            bit_errors: meta.count("bit_errors")?.unwrap_or(0),
        });
    }

    let record = ExperimentRecord {
        loss_db: meta.required(&["loss_db"])?,
        n_rounds,
        mu: meta.required(&["mu"])?,
        p_s: meta.required(&["p_s"])?,
        tally,
        component_losses: (!meta.components.is_empty()).then_some(meta.components),
    };
    record.validate()?;
    Ok(record)
}

pub fn parse_tally_csv(path: impl AsRef<Path>) -> Result<ExperimentRecord> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tally_str(&text)
}

/// Serializes a record in the tally CSV format; counts round-trip exactly.
pub fn tally_csv_string(record: &ExperimentRecord) -> Result<String> {
    let t = &record.tally;
    let mut out = String::new();
    let _ = writeln!(out, "# loss_db={}", record.loss_db);
    let _ = writeln!(out, "# N={}", record.n_rounds);
    let _ = writeln!(out, "# mu={}", record.mu);
    let _ = writeln!(out, "# p_s={}", record.p_s);
    let _ = writeln!(out, "# m_slices={}", t.m_slices);
    let _ = writeln!(out, "# n_det={}", t.n_det);
    if let Some(m_s) = t.m_s {
        let _ = writeln!(out, "# m_s={m_s}");
    }
    if let Some(n) = t.n_sifted {
        let _ = writeln!(out, "# n_sifted={n}");
    }
    if let Some(d) = t.diagnostics {
        let _ = writeln!(out, "# double_clicks={}", d.double_clicks);
        let _ = writeln!(out, "# bit_errors={}", d.bit_errors);
    }
    for (name, db) in record.component_losses.iter().flatten() {
        let _ = writeln!(out, "# component:{name}={db}");
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TALLY_HEADER)?;
    for row in &t.matched {
        w.write_record([
            format_phase(row.phase_a, t.m_slices),
            format_phase(row.phase_b, t.m_slices),
            row.d1.to_string(),
            row.d2.to_string(),
        ])?;
    }
    let body = w.into_inner().map_err(|e| Error::Serialize(e.to_string()))?;
    out.push_str(&String::from_utf8(body).map_err(|e| Error::Serialize(e.to_string()))?);
    Ok(out)
}

pub fn write_tally_csv(record: &ExperimentRecord, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, tally_csv_string(record)?).map_err(|e| Error::io(path, e))
}

/// Parses a `device,attenuation_db` table of measurement-station losses.
pub fn parse_component_losses_str(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 2 {
            return Err(Error::schema(line, "expected `device,attenuation_db`"));
        }
        let db = record[1]
            .trim_end_matches("dB")
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::schema(line, format!("`{}` is not a loss in dB", &record[1])))?;
        if !(db >= 0.0) {
            return Err(Error::schema(line, format!("negative loss {db} dB")));
        }
        out.insert(record[0].to_string(), db);
    }
    Ok(out)
}

pub fn parse_component_losses(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_component_losses_str(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub e_b: f64,
    pub n_mu: f64,
    /// Sampled test bits the error count refers to.
    pub n_s: f64,
    pub m_s: f64,
    /// True when `m_s` was rebuilt from `E_b` rather than measured.
    pub m_s_reconstructed: bool,
}

/// Bit error rate, key size and sampled error count of a record.
///
/// When the file carries no measured `m_s`, it is rebuilt as
/// `round(E_b * n_s)` with `n_s` the implied size of the test sample.
pub fn derive_observables(
    record: &ExperimentRecord,
    interpretation: CountsInterpretation,
) -> Result<Observables> {
    let t = &record.tally;
    let matched = t.matched_total();
    if matched == 0 {
        return Err(Error::NoData("no matched clicks in record".into()));
    }
    let e_b = t.error_total() as f64 / matched as f64;
    let p_s = record.p_s;

    if let (Some(m_s), Some(n_sifted)) = (t.m_s, t.n_sifted) {
        return Ok(Observables {
            e_b,
            n_mu: n_sifted as f64,
            n_s: (matched - n_sifted) as f64,
            m_s: m_s as f64,
            m_s_reconstructed: false,
        });
    }
    let (n_mu, n_s) = match interpretation {
        CountsInterpretation::SiftedKey => {
            let n_mu = matched as f64;
            (n_mu, n_mu * p_s / (1.0 - p_s))
        }
        CountsInterpretation::IncludesTestSample => {
            let all = matched as f64;
            (all * (1.0 - p_s), all * p_s)
        }
    };
    Ok(Observables {
        e_b,
        n_mu,
        n_s,
        m_s: (e_b * n_s).round(),
        m_s_reconstructed: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReproductionOptions {
    pub f_ec: f64,
    pub interpretation: CountsInterpretation,
    pub conventions: Conventions,
    /// Analyse as if the run had this many rounds, scaling counts linearly.
    pub scale_to_rounds: Option<f64>,
}

impl Default for ReproductionOptions {
    fn default() -> Self {
        Self {
            f_ec: DEFAULT_F_EC,
            interpretation: CountsInterpretation::default(),
            conventions: Conventions::default(),
            scale_to_rounds: None,
        }
    }
}

/// Key rate from measured counts.
///
/// The gain is inferred from the key size, `Q = n_mu M / (2 N (1 - p_s))`;
/// the channel model plays no part.
pub fn reproduce_key_rate(
    record: &ExperimentRecord,
    budget: &SecurityBudget,
    options: &ReproductionOptions,
) -> Result<KeyRateResult> {
    record.validate()?;
    let obs = derive_observables(record, options.interpretation)?;
    let m_slices = record.tally.m_slices;

    let (n_rounds, scale) = match options.scale_to_rounds {
        Some(n) if n >= 1.0 => (n, n / record.n_rounds),
        Some(n) => return Err(Error::usage("scale_to_rounds", format!("{n} must be >= 1"))),
        None => (record.n_rounds, 1.0),
    };
    let n_mu = obs.n_mu * scale;
    let m_s = obs.m_s * scale;
    let q_mu = n_mu * m_slices as f64 / (2.0 * n_rounds * (1.0 - record.p_s));

    let inputs = KeyRateInputs {
        n_rounds,
        mu: record.mu,
        m_slices,
        p_s: record.p_s,
        f_ec: options.f_ec,
        q_mu,
        e_b: obs.e_b,
        n_mu,
        m_s,
        budget: *budget,
        conventions: options.conventions,
    };
    let mut result = evaluate(&inputs, Mode::Reproduction)?;
    result.m_s_reconstructed = obs.m_s_reconstructed;
    if obs.m_s_reconstructed {
        result.notes.push(format!(
            "m_s = {} reconstructed as round(E_b * n_s) with n_s = {:.1}",
            obs.m_s, obs.n_s
        ));
    }
    if scale != 1.0 {
        result.notes.push(format!("counts scaled by {scale:.6e} to N = {n_rounds:e}"));
    }
    Ok(result)
}
