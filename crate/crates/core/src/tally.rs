//! Per-phase-pair detector counts.
//!
//! Phases are stored as indices `j` meaning a total modulated phase of
//! `j * 2pi / M` (random phase plus key-bit phase). A row is kept when the
//! two phases are equal or differ by pi.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MatchedRow {
    pub phase_a: u32,
    pub phase_b: u32,
    pub d1: u64,
    pub d2: u64,
}

impl MatchedRow {
    /// True when the phases differ by pi (the D2 port is the bright one).
    pub fn is_antiphase(&self, m_slices: u32) -> bool {
        (self.phase_a + m_slices - self.phase_b) % m_slices == m_slices / 2
    }

    /// Clicks on the dark port: D2 for equal phases, D1 for opposite phases.
    pub fn errors(&self, m_slices: u32) -> u64 {
        if self.is_antiphase(m_slices) {
            self.d1
        } else {
            self.d2
        }
    }

    pub fn total(&self) -> u64 {
        self.d1 + self.d2
    }
}

/// Simulator-only bookkeeping.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimDiagnostics {
    /// Rounds where both detectors fired (discarded).
    pub double_clicks: u64,
    /// Sifted rounds whose final key bits disagree, test and key together.
    pub bit_errors: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedTally {
    pub m_slices: u32,
    /// Rounds run.
    pub n_rounds: u64,
    /// Single-click rounds over all phase pairs.
    pub n_det: u64,
    /// `2M` rows: equal phases `(j, j)` for `j = 0..M`, then opposite phases
    /// `(j, j + M/2)`.
    pub matched: Vec<MatchedRow>,
    /// Bit errors among the sampled test bits, when known.
    pub m_s: Option<u64>,
    /// Matched clicks kept as key after sampling, when known.
    pub n_sifted: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<SimDiagnostics>,
}

impl ObservedTally {
    pub fn empty(m_slices: u32) -> Self {
        let half = m_slices / 2;
        let matched = (0..m_slices)
            .map(|j| (j, j))
            .chain((0..m_slices).map(|j| (j, (j + half) % m_slices)))
            .map(|(phase_a, phase_b)| MatchedRow {
                phase_a,
                phase_b,
                d1: 0,
                d2: 0,
            })
            .collect();
        Self {
            m_slices,
            n_rounds: 0,
            n_det: 0,
            matched,
            m_s: None,
            n_sifted: None,
            diagnostics: None,
        }
    }

    /// Row index of a phase pair, or `None` if it is not a kept pair.
    pub fn row_index(&self, phase_a: u32, phase_b: u32) -> Option<usize> {
        let m = self.m_slices;
        if phase_a >= m || phase_b >= m {
            return None;
        }
        match (phase_a + m - phase_b) % m {
            0 => Some(phase_a as usize),
            d if d == m / 2 => Some((m + phase_a) as usize),
            _ => None,
        }
    }

    pub fn row_mut(&mut self, phase_a: u32, phase_b: u32) -> Option<&mut MatchedRow> {
        self.row_index(phase_a, phase_b).map(move |i| &mut self.matched[i])
    }

    pub fn matched_total(&self) -> u64 {
        self.matched.iter().map(MatchedRow::total).sum()
    }

    pub fn error_total(&self) -> u64 {
        self.matched.iter().map(|r| r.errors(self.m_slices)).sum()
    }

    /// Count added from another partition of the same run.
    ///
    /// Optional fields survive only if both sides carry them.
    pub fn merge(mut self, other: &ObservedTally) -> Self {
        assert_eq!(self.m_slices, other.m_slices, "merging tallies with different M");
        self.n_rounds += other.n_rounds;
        self.n_det += other.n_det;
        for (a, b) in self.matched.iter_mut().zip(&other.matched) {
            a.d1 += b.d1;
            a.d2 += b.d2;
        }
        self.m_s = self.m_s.zip(other.m_s).map(|(x, y)| x + y);
        self.n_sifted = self.n_sifted.zip(other.n_sifted).map(|(x, y)| x + y);
        self.diagnostics = self.diagnostics.zip(other.diagnostics).map(|(x, y)| SimDiagnostics {
            double_clicks: x.double_clicks + y.double_clicks,
            bit_errors: x.bit_errors + y.bit_errors,
        });
        self
    }

    /// Checks the count relations that hold for any consistent tally.
    pub fn check_consistency(&self) -> Result<()> {
        let total = self.matched_total();
        if total > self.n_det {
            return Err(Error::schema(
                0,
                format!("matched clicks {total} exceed valid clicks n_det = {}", self.n_det),
            ));
        }
        if let Some(n_sifted) = self.n_sifted {
            if n_sifted > total {
                return Err(Error::schema(
                    0,
                    format!("n_sifted = {n_sifted} exceeds matched clicks {total}"),
                ));
            }
            if let Some(m_s) = self.m_s {
                if m_s > total - n_sifted {
                    return Err(Error::schema(
                        0,
                        format!("m_s = {m_s} exceeds the {} sampled bits", total - n_sifted),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Empirical gain, QBER and sifted size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TallyStats {
    pub q_emp: f64,
    pub e_b_emp: f64,
    pub n_mu_emp: u64,
    /// Fraction of valid clicks that landed on a kept phase pair.
    pub matched_fraction: f64,
}

pub fn tally_to_stats(tally: &ObservedTally) -> Result<TallyStats> {
    let matched = tally.matched_total();
    if tally.n_det == 0 || matched == 0 || tally.n_rounds == 0 {
        return Err(Error::NoData("tally has no matched clicks".into()));
    }
    Ok(TallyStats {
        q_emp: tally.n_det as f64 / tally.n_rounds as f64,
        e_b_emp: tally.error_total() as f64 / matched as f64,
        n_mu_emp: tally.n_sifted.unwrap_or(matched),
        matched_fraction: matched as f64 / tally.n_det as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_layout() {
        let t = ObservedTally::empty(8);
        assert_eq!(t.matched.len(), 16);
        assert_eq!((t.matched[8].phase_a, t.matched[8].phase_b), (0, 4));
        assert_eq!((t.matched[13].phase_a, t.matched[13].phase_b), (5, 1));
        assert_eq!(t.row_index(5, 1), Some(13));
        assert_eq!(t.row_index(5, 2), None);
        assert_eq!(ObservedTally::empty(6).matched.len(), 12);
    }

    #[test]
    fn empty_tally_has_no_stats() {
        let mut t = ObservedTally::empty(8);
        t.n_rounds = 100;
        assert!(matches!(tally_to_stats(&t), Err(Error::NoData(_))));
    }

    #[test]
    fn bright_port_only_means_no_errors() {
        let mut t = ObservedTally::empty(8);
        t.n_rounds = 1000;
        for row in t.matched.iter_mut() {
            if row.is_antiphase(8) {
                row.d2 = 7;
            } else {
                row.d1 = 5;
            }
        }
        t.n_det = t.matched_total() * 4;
        let s = tally_to_stats(&t).unwrap();
        assert_eq!(s.e_b_emp, 0.0);
        assert_eq!(s.matched_fraction, 0.25);
    }

    #[test]
    fn merge_adds_counts() {
        let mut a = ObservedTally::empty(6);
        a.n_rounds = 3;
        a.n_det = 2;
        a.matched[0].d1 = 1;
        a.m_s = Some(1);
        let mut b = a.clone();
        b.m_s = None;
        let c = a.clone().merge(&a);
        assert_eq!((c.n_rounds, c.n_det, c.matched[0].d1, c.m_s), (6, 4, 2, Some(2)));
        assert_eq!(a.merge(&b).m_s, None);
    }
}
