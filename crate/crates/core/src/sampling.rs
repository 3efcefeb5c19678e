//! Monte-Carlo sampling of DER control setpoints.
//!
//! Two schemes are provided:
//!
//! * [`sample_naive`] draws each unit's active and reactive setpoint
//!   independently and uniformly from its box `[-p_inst, p_inst] x
//!   [-s_max, s_max]`. Samples may violate the inverter apparent-power
//!   circle; that is the point of the scheme.
//! * [`sample_successive`] draws the `(p, q)` pair jointly and redraws both
//!   coordinates until the pair lies inside the inverter circle
//!   `p^2 + q^2 <= s_max^2`, yielding setpoints uniform on the admissible
//!   disc segment.
//!
//! All draws come from [`SplitMix64`] streams keyed by
//! `(seed, scenario_id, unit index, axis)`, so any scenario can be
//! regenerated in isolation and results are independent of iteration order,
//! thread count, and platform.

use crate::grid::GridModel;
use crate::powerflow::ControlScenario;
use std::io::{self, Write};
use thiserror::Error;

/// Maximum number of redraws per unit and scenario before
/// [`SamplingError::RejectionBudgetExceeded`] is reported.
pub const REJECTION_BUDGET: u32 = 10_000;

/// Errors produced by the rejection sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SamplingError {
    /// The rejection loop failed to find an admissible `(p, q)` pair within
    /// [`REJECTION_BUDGET`] redraws. With consistent unit ratings the
    /// acceptance probability is about 0.84 per draw, so hitting the budget
    /// indicates a degenerate unit (for example a zero apparent-power
    /// rating).
    #[error(
        "no admissible (p, q) sample for unit {der_index} of scenario \
         {scenario_id} within {budget} redraws"
    )]
    RejectionBudgetExceeded {
        scenario_id: u64,
        der_index: usize,
        budget: u32,
    },
}

/// SplitMix64 pseudo-random generator (Steele, Lea & Flood's 64-bit
/// finalizer over a Weyl sequence with increment `0x9E3779B97F4A7C15`).
///
/// Chosen for reproducibility: the algorithm is fully specified by three
/// constants, produces identical streams on every platform, and one `u64`
/// of state per stream makes cheap keyed substreams practical.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    const WEYL_INCREMENT: u64 = 0x9E37_79B9_7F4A_7C15;

    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Next raw 64-bit value.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(Self::WEYL_INCREMENT);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` using the top 53 bits, so every value is an
    /// exact multiple of 2^-53.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn next_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.next_f64() * (hi - lo)
    }
}

/// Axis selector for the per-unit substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    Active = 0,
    Reactive = 1,
}

/// One finalizer step: hashes `x` to a decorrelated 64-bit value.
fn mix(x: u64) -> u64 {
    SplitMix64::new(x).next_u64()
}

/// Generator for one `(scenario, unit, axis)` substream.
///
/// The key components are folded in by hash-chaining, so neighbouring
/// scenario ids (or unit indices) yield statistically unrelated streams.
fn substream(seed: u64, scenario_id: u64, der_index: usize, axis: Axis) -> SplitMix64 {
    let mut h = mix(seed);
    h = mix(h ^ scenario_id);
    h = mix(h ^ der_index as u64);
    h = mix(h ^ axis as u64);
    SplitMix64::new(h)
}

/// Draws `n_scenarios` setpoint vectors with every axis sampled
/// independently on its box range.
pub fn sample_naive(grid: &GridModel, seed: u64, n_scenarios: usize) -> Vec<ControlScenario> {
    (0..n_scenarios as u64)
        .map(|scenario_id| {
            let setpoints = grid
                .ders
                .iter()
                .enumerate()
                .map(|(d, der)| {
                    let (p_lo, p_hi) = der.p_range();
                    let (q_lo, q_hi) = der.q_range();
                    let p = substream(seed, scenario_id, d, Axis::Active).next_in(p_lo, p_hi);
                    let q = substream(seed, scenario_id, d, Axis::Reactive).next_in(q_lo, q_hi);
                    (p, q)
                })
                .collect();
            ControlScenario {
                scenario_id,
                setpoints,
            }
        })
        .collect()
}

/// Tally of the rejection loop inside [`sample_successive`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RejectionStats {
    /// Accepted `(p, q)` pairs (one per unit and scenario).
    pub accepted: u64,
    /// Discarded pairs.
    pub redraws: u64,
}

impl RejectionStats {
    /// Average number of discarded pairs per accepted pair.
    pub fn redraw_rate(&self) -> f64 {
        if self.accepted == 0 {
            0.0
        } else {
            self.redraws as f64 / self.accepted as f64
        }
    }
}

/// Draws setpoint vectors restricted to each unit's inverter circle by
/// redrawing both coordinates of inadmissible pairs.
pub fn sample_successive(
    grid: &GridModel,
    seed: u64,
    n_scenarios: usize,
) -> Result<Vec<ControlScenario>, SamplingError> {
    sample_successive_with_stats(grid, seed, n_scenarios).map(|(scenarios, _)| scenarios)
}

/// [`sample_successive`] plus the rejection tally, for diagnostics.
pub fn sample_successive_with_stats(
    grid: &GridModel,
    seed: u64,
    n_scenarios: usize,
) -> Result<(Vec<ControlScenario>, RejectionStats), SamplingError> {
    let mut stats = RejectionStats::default();
    let mut scenarios = Vec::with_capacity(n_scenarios);
    for scenario_id in 0..n_scenarios as u64 {
        let mut setpoints = Vec::with_capacity(grid.ders.len());
        for (d, der) in grid.ders.iter().enumerate() {
            let (p_lo, p_hi) = der.p_range();
            let (q_lo, q_hi) = der.q_range();
            let s_sq = der.s_max_kva * der.s_max_kva;
            let mut p_stream = substream(seed, scenario_id, d, Axis::Active);
            let mut q_stream = substream(seed, scenario_id, d, Axis::Reactive);
            let mut redraws = 0u32;
            loop {
                let p = p_stream.next_in(p_lo, p_hi);
                let q = q_stream.next_in(q_lo, q_hi);
                if p * p + q * q <= s_sq {
                    stats.accepted += 1;
                    setpoints.push((p, q));
                    break;
                }
                redraws += 1;
                stats.redraws += 1;
                if redraws > REJECTION_BUDGET {
                    return Err(SamplingError::RejectionBudgetExceeded {
                        scenario_id,
                        der_index: d,
                        budget: REJECTION_BUDGET,
                    });
                }
            }
        }
        scenarios.push(ControlScenario {
            scenario_id,
            setpoints,
        });
    }
    Ok((scenarios, stats))
}

/// Writes scenarios in wide CSV form:
/// `scenario_id, der1_p_kw, der1_q_kvar, der2_p_kw, ...`.
pub fn write_scenarios_csv<W: Write>(w: &mut W, scenarios: &[ControlScenario]) -> io::Result<()> {
    let n_units = scenarios.first().map_or(0, |s| s.setpoints.len());
    let mut header = String::from("scenario_id");
    for j in 1..=n_units {
        header.push_str(&format!(",der{j}_p_kw,der{j}_q_kvar"));
    }
    writeln!(w, "{header}")?;
    for scenario in scenarios {
        let mut line = scenario.scenario_id.to_string();
        for &(p, q) in &scenario.setpoints {
            line.push(',');
            line.push_str(&crate::numfmt::fmt_sig6(p));
            line.push(',');
            line.push_str(&crate::numfmt::fmt_sig6(q));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}
