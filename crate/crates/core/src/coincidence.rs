//! Discrete-event simulator of a two-station coincidence experiment:
//! Poisson pair source, per-detector dead time, timing jitter, fast random
//! analyzer settings, blanking around setting switches, coincidence matching
//! and time-resolved statistics over repeated power-on cycles.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::{CountTable, Correlations, ChshPattern};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Station {
    #[serde(rename = "A")]
    Alice,
    #[serde(rename = "B")]
    Bob,
}

impl Station {
    pub fn index(self) -> usize {
        match self {
            Station::Alice => 0,
            Station::Bob => 1,
        }
    }

    pub fn letter(self) -> &'static str {
        match self {
            Station::Alice => "A",
            Station::Bob => "B",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t_ns: u64,
    pub station: Station,
    /// 1 or 2
    pub detector: u8,
    /// Local analyzer setting, 0 or 1.
    pub eom: u8,
    pub valid: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    #[default]
    Quantum,
    Lhv,
}

/// One deterministic local strategy: outcome (+1/-1) per local setting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LhvStrategy {
    #[serde(default = "one")]
    pub weight: f64,
    pub alice: [i8; 2],
    pub bob: [i8; 2],
}

fn one() -> f64 {
    1.0
}

impl LhvStrategy {
    /// `E00 + E01 + E11 - E10` for this strategy.
    pub fn chsh(&self) -> i32 {
        let (a, b) = (self.alice, self.bob);
        (a[0] * b[0] + a[0] * b[1] + a[1] * b[1] - a[1] * b[0]) as i32
    }
}

/// The eight deterministic strategies with `E00 + E01 + E11 - E10 = -2`,
/// equally weighted.
pub fn default_lhv() -> Vec<LhvStrategy> {
    let mut out = Vec::new();
    for bits in 0..16u8 {
        let s = |k: u8| if bits >> k & 1 == 1 { -1 } else { 1 };
        let strat = LhvStrategy { weight: 1.0, alice: [s(0), s(1)], bob: [s(2), s(3)] };
        if strat.chsh() == -2 {
            out.push(strat);
        }
    }
    out
}

/// `(E00, E10, E01, E11)` of the extremal 4x4 model.
pub fn quantum_correlations() -> [f64; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [-h, h, -h, -h]
}

fn default_pair_rate() -> f64 {
    1e4
}
fn default_dead_time() -> u64 {
    1000
}
fn default_period() -> u64 {
    100
}
fn default_blanking() -> f64 {
    2.0
}
fn default_jitter() -> f64 {
    0.5
}
fn default_window() -> u64 {
    4
}
fn default_duration() -> u64 {
    100_000_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Mean source pair rate per second.
    #[serde(default = "default_pair_rate")]
    pub pair_rate: f64,
    #[serde(default = "default_dead_time")]
    pub dead_time_ns: u64,
    #[serde(default = "default_period")]
    pub eom_switch_period_ns: u64,
    #[serde(default = "default_blanking")]
    pub eom_blanking_ns: f64,
    /// Standard deviation of Gaussian timestamp jitter.
    #[serde(default = "default_jitter")]
    pub timing_jitter_ns: f64,
    #[serde(default = "default_window")]
    pub window_ns: u64,
    #[serde(default)]
    pub model: Model,
    /// `(E00, E10, E01, E11)` for the quantum model; the extremal values by default.
    #[serde(default)]
    pub correlations: Option<[f64; 4]>,
    /// Strategy table for the LHV model; [`default_lhv`] when empty.
    #[serde(default)]
    pub lhv: Vec<LhvStrategy>,
    /// Run length, or the length of one power-on cycle in `time_resolved`.
    #[serde(default = "default_duration")]
    pub duration_ns: u64,
    #[serde(default)]
    pub seed: u64,
    /// Correlation strength ramps as `1 - exp(-t/tau)` after power-on; 0 is instant.
    #[serde(default)]
    pub equilibration_tau_ns: f64,
    /// Pair rate ramps as `1 - exp(-t/tau)` after power-on; 0 is instant.
    #[serde(default)]
    pub rate_tau_ns: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            pair_rate: default_pair_rate(),
            dead_time_ns: default_dead_time(),
            eom_switch_period_ns: default_period(),
            eom_blanking_ns: default_blanking(),
            timing_jitter_ns: default_jitter(),
            window_ns: default_window(),
            model: Model::Quantum,
            correlations: None,
            lhv: Vec::new(),
            duration_ns: default_duration(),
            seed: 0,
            equilibration_tau_ns: 0.0,
            rate_tau_ns: 0.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(m.to_string()));
        if !(self.pair_rate >= 0.0 && self.pair_rate.is_finite()) {
            return bad("pair_rate must be a non-negative finite rate");
        }
        if self.eom_switch_period_ns == 0 || self.window_ns == 0 {
            return bad("eom_switch_period_ns and window_ns must be positive");
        }
        if !(self.timing_jitter_ns >= 0.0 && self.eom_blanking_ns >= self.timing_jitter_ns) {
            return bad("need 0 <= timing_jitter_ns <= eom_blanking_ns");
        }
        if !(self.equilibration_tau_ns >= 0.0 && self.rate_tau_ns >= 0.0) {
            return bad("ramp time constants must be non-negative");
        }
        if let Some(e) = self.correlations {
            if e.iter().any(|x| !(-1.0..=1.0).contains(x)) {
                return bad("correlations must lie in [-1, 1]");
            }
        }
        if self.lhv.iter().any(|s| !(s.weight >= 0.0) || s.alice.iter().chain(&s.bob).any(|o| o.abs() != 1)) {
            return bad("LHV strategies need non-negative weights and outcomes +-1");
        }
        if !self.lhv.is_empty() && self.lhv.iter().map(|s| s.weight).sum::<f64>() <= 0.0 {
            return bad("LHV weights sum to zero");
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: SimConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn expected_correlations(&self) -> [f64; 4] {
        match self.model {
            Model::Quantum => self.correlations.unwrap_or_else(quantum_correlations),
            Model::Lhv => {
                let table = self.lhv_table();
                let total: f64 = table.iter().map(|s| s.weight).sum();
                let mut e = [0.0; 4];
                for s in &table {
                    let w = s.weight / total;
                    e[0] += w * (s.alice[0] * s.bob[0]) as f64;
                    e[1] += w * (s.alice[1] * s.bob[0]) as f64;
                    e[2] += w * (s.alice[0] * s.bob[1]) as f64;
                    e[3] += w * (s.alice[1] * s.bob[1]) as f64;
                }
                e
            }
        }
    }

    fn lhv_table(&self) -> Vec<LhvStrategy> {
        if self.lhv.is_empty() {
            default_lhv()
        } else {
            self.lhv.clone()
        }
    }

    /// Singles rate per station (events/s) after non-paralyzable dead time,
    /// each detector seeing half the pairs.
    pub fn expected_singles_rate(&self) -> f64 {
        let per_detector = self.pair_rate / 2.0;
        let tau = self.dead_time_ns as f64 * 1e-9;
        2.0 * per_detector / (1.0 + per_detector * tau)
    }

    /// Correlation strength at `t` ns after power-on.
    pub fn equilibration(&self, t_ns: f64) -> f64 {
        ramp(t_ns, self.equilibration_tau_ns)
    }
}

fn ramp(t: f64, tau: f64) -> f64 {
    if tau == 0.0 {
        1.0
    } else {
        1.0 - (-t / tau).exp()
    }
}

/// Analyzer setting as a function of time.
#[derive(Clone, Debug)]
pub enum EomTrace {
    /// Setting `initial` from t = 0, then `(time, new setting)` in time order.
    Explicit { initial: u8, switches: Vec<(u64, u8)> },
    /// A fresh uniform bit for each period `[k T, (k+1) T)`.
    Random(RandomEom),
}

/// Counter-based setting bits: bit `k` is word `k` of a ChaCha8 stream.
#[derive(Clone, Debug)]
pub struct RandomEom {
    period_ns: u64,
    rng: ChaCha8Rng,
}

impl RandomEom {
    pub fn period_ns(&self) -> u64 {
        self.period_ns
    }

    pub fn bit(&self, k: u64) -> u8 {
        let mut rng = self.rng.clone();
        rng.set_word_pos(k as u128);
        (rng.next_u32() & 1) as u8
    }

    /// Whether the setting changes at the start of period `k`.
    pub fn switches_at(&self, k: u64) -> bool {
        k > 0 && self.bit(k) != self.bit(k - 1)
    }
}

impl EomTrace {
    pub fn random(seed: u64, period_ns: u64, station: Station) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(station.index() as u64);
        EomTrace::Random(RandomEom { period_ns, rng })
    }

    pub fn setting_at(&self, t_ns: u64) -> u8 {
        match self {
            EomTrace::Explicit { initial, switches } => {
                let idx = switches.partition_point(|(s, _)| *s <= t_ns);
                if idx == 0 {
                    *initial
                } else {
                    switches[idx - 1].1
                }
            }
            EomTrace::Random(r) => r.bit(t_ns / r.period_ns),
        }
    }

    /// Times in `[lo, hi]` at which the setting actually changes.
    pub fn switches_between(&self, lo: u64, hi: u64) -> Vec<u64> {
        match self {
            EomTrace::Explicit { initial, switches } => {
                let mut prev = *initial;
                let mut out = Vec::new();
                for (t, s) in switches {
                    if *s != prev && *t >= lo && *t <= hi {
                        out.push(*t);
                    }
                    prev = *s;
                }
                out
            }
            EomTrace::Random(r) => {
                let mut out = Vec::new();
                let mut k = lo.div_ceil(r.period_ns);
                while k * r.period_ns <= hi {
                    if r.switches_at(k) {
                        out.push(k * r.period_ns);
                    }
                    k += 1;
                }
                out
            }
        }
    }
}

/// Distinct EOM seeds per station/cycle derived from the run seed.
fn derived_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

const EOM_STREAM: u64 = 1 << 32;

pub struct Streams {
    pub alice: Vec<EventRecord>,
    pub bob: Vec<EventRecord>,
    pub alice_eom: EomTrace,
    pub bob_eom: EomTrace,
    /// Emitted pairs (before dead time).
    pub pairs_emitted: u64,
}

/// One run of `config.duration_ns`.
pub fn generate(config: &SimConfig) -> Result<Streams> {
    generate_cycle(config, 0)
}

/// Run number `cycle` of the power-on protocol; cycle 0 is [`generate`].
pub fn generate_cycle(config: &SimConfig, cycle: u64) -> Result<Streams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(cycle);
    let alice_eom = EomTrace::random(derived_seed(config.seed, EOM_STREAM + 2 * cycle), config.eom_switch_period_ns, Station::Alice);
    let bob_eom = EomTrace::random(derived_seed(config.seed, EOM_STREAM + 2 * cycle + 1), config.eom_switch_period_ns, Station::Bob);

    let correlations = config.expected_correlations();
    let lhv = config.lhv_table();
    let lhv_total: f64 = lhv.iter().map(|s| s.weight).sum();
    let jitter = Normal::new(0.0, config.timing_jitter_ns).map_err(|e| Error::invalid(e.to_string()))?;
    let mut raw: [Vec<(u64, u8, u8)>; 2] = [Vec::new(), Vec::new()];
    let mut pairs_emitted = 0u64;

    if config.pair_rate > 0.0 {
        let gap = Exp::new(config.pair_rate * 1e-9).map_err(|e| Error::invalid(e.to_string()))?;
        let duration = config.duration_ns as f64;
        let mut t = 0.0f64;
        loop {
            t += gap.sample(&mut rng);
            if t >= duration {
                break;
            }
            if config.rate_tau_ns > 0.0 && rng.random::<f64>() >= ramp(t, config.rate_tau_ns) {
                continue;
            }
            pairs_emitted += 1;
            let t_int = t as u64;
            let a_set = alice_eom.setting_at(t_int);
            let b_set = bob_eom.setting_at(t_int);
            let correlated = rng.random::<f64>() < config.equilibration(t);
            let (a_out, b_out): (i8, i8) = if !correlated {
                (random_sign(&mut rng), random_sign(&mut rng))
            } else {
                match config.model {
                    Model::Quantum => {
                        let e = correlations[(a_set + 2 * b_set) as usize];
                        let a = random_sign(&mut rng);
                        let same = rng.random::<f64>() < (1.0 + e) / 2.0;
                        (a, if same { a } else { -a })
                    }
                    Model::Lhv => {
                        let mut u = rng.random::<f64>() * lhv_total;
                        let mut pick = lhv[lhv.len() - 1];
                        for s in &lhv {
                            if u < s.weight {
                                pick = *s;
                                break;
                            }
                            u -= s.weight;
                        }
                        (pick.alice[a_set as usize], pick.bob[b_set as usize])
                    }
                }
            };
            for (station, out) in [(0usize, a_out), (1, b_out)] {
                let tj = (t + jitter.sample(&mut rng)).round().max(0.0) as u64;
                let det = if out == 1 { 1 } else { 2 };
                raw[station].push((tj, det, 0));
            }
        }
    }

    let mut out = [Vec::new(), Vec::new()];
    for (s, station) in [(0usize, Station::Alice), (1, Station::Bob)] {
        let trace = if s == 0 { &alice_eom } else { &bob_eom };
        let events = &mut raw[s];
        events.sort_by_key(|e| e.0);
        let mut last: [Option<u64>; 2] = [None, None];
        let mut prev_t: Option<u64> = None;
        for &(t, det, _) in events.iter() {
            if prev_t == Some(t) {
                continue;
            }
            let d = (det - 1) as usize;
            if let Some(l) = last[d] {
                if t - l < config.dead_time_ns {
                    continue;
                }
            }
            last[d] = Some(t);
            prev_t = Some(t);
            out[s].push(EventRecord { t_ns: t, station, detector: det, eom: trace.setting_at(t), valid: true });
        }
    }
    let [alice, bob] = out;
    Ok(Streams { alice, bob, alice_eom, bob_eom, pairs_emitted })
}

fn random_sign<R: Rng + ?Sized>(rng: &mut R) -> i8 {
    if rng.random_bool(0.5) {
        1
    } else {
        -1
    }
}

/// Flags events within `blanking_ns` of a setting switch as invalid.
pub fn compress(stream: &[EventRecord], trace: &EomTrace, blanking_ns: f64) -> Vec<EventRecord> {
    let flag = |e: &EventRecord, blanked: bool| EventRecord { valid: e.valid && !blanked, ..*e };
    match trace {
        EomTrace::Random(r) => {
            let b = blanking_ns.floor() as u64;
            stream
                .iter()
                .map(|e| {
                    let lo = e.t_ns.saturating_sub(b).div_ceil(r.period_ns);
                    let hi = (e.t_ns + b) / r.period_ns;
                    flag(e, (lo..=hi).any(|k| r.switches_at(k)))
                })
                .collect()
        }
        EomTrace::Explicit { .. } => {
            let Some(last) = stream.iter().map(|e| e.t_ns).max() else {
                return Vec::new();
            };
            let switches = trace.switches_between(0, last + blanking_ns.ceil() as u64);
            stream
                .iter()
                .map(|e| {
                    let idx = switches.partition_point(|s| *s < e.t_ns);
                    let near = |i: usize| switches.get(i).is_some_and(|s| (s.abs_diff(e.t_ns) as f64) <= blanking_ns);
                    flag(e, near(idx) || (idx > 0 && near(idx - 1)))
                })
                .collect()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MatchResult {
    pub table: CountTable,
    /// `(alice index, bob index)` in the input streams, ordered by Alice time.
    pub pairs: Vec<(usize, usize)>,
}

/// Pairs valid events closer than `window_ns`: candidates are accepted in
/// order of increasing gap, then earlier timestamp, each event used once.
pub fn match_events(alice: &[EventRecord], bob: &[EventRecord], window_ns: u64) -> MatchResult {
    let mut candidates: Vec<(u64, u64, u64, usize, usize)> = Vec::new();
    let mut start = 0usize;
    for (i, a) in alice.iter().enumerate() {
        if !a.valid {
            continue;
        }
        while start < bob.len() && bob[start].t_ns + window_ns < a.t_ns {
            start += 1;
        }
        let mut j = start;
        while j < bob.len() && bob[j].t_ns <= a.t_ns + window_ns {
            if bob[j].valid {
                let (x, y) = (a.t_ns, bob[j].t_ns);
                candidates.push((x.abs_diff(y), x.min(y), x.max(y), i, j));
            }
            j += 1;
        }
    }
    candidates.sort_unstable();
    let mut used_a = vec![false; alice.len()];
    let mut used_b = vec![false; bob.len()];
    let mut pairs = Vec::new();
    for (_, _, _, i, j) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    let mut table = CountTable { counts: [[0; 4]; 4] };
    for &(i, j) in &pairs {
        let (a, b) = (&alice[i], &bob[j]);
        let n = table.get(a.eom as usize, a.detector as usize, b.eom as usize, b.detector as usize);
        table.set(a.eom as usize, a.detector as usize, b.eom as usize, b.detector as usize, n + 1);
    }
    MatchResult { table, pairs }
}

/// `sigma_E = sqrt((1 - E^2)/N)` per setting block and
/// `sigma_S = sqrt(sum sigma_E^2)`; `None` when a block is empty.
pub fn correlation_errors(t: &CountTable) -> Option<([f64; 4], f64)> {
    let blocks = [(0, 0), (1, 0), (0, 1), (1, 1)];
    let c = crate::bell::correlations_from_counts(t).ok()?;
    let e = c.as_array();
    let mut sig = [0.0; 4];
    for (k, (a, b)) in blocks.iter().enumerate() {
        let n = t.block_total(*a, *b) as f64;
        sig[k] = ((1.0 - e[k] * e[k]).max(0.0) / n).sqrt();
    }
    let s = sig.iter().map(|x| x * x).sum::<f64>().sqrt();
    Some((sig, s))
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub pairs_emitted: u64,
    pub alice_events: usize,
    pub bob_events: usize,
    pub flagged_fraction: f64,
    pub coincidences: usize,
    pub table: CountTable,
    pub correlations: Option<Correlations>,
    pub sigma_e: Option<[f64; 4]>,
    pub sigma_s: Option<f64>,
    pub expected_s: f64,
}

/// generate -> compress -> match -> correlations.
pub fn run_pipeline(config: &SimConfig) -> Result<PipelineReport> {
    let streams = generate(config)?;
    let alice = compress(&streams.alice, &streams.alice_eom, config.eom_blanking_ns);
    let bob = compress(&streams.bob, &streams.bob_eom, config.eom_blanking_ns);
    let flagged = alice.iter().chain(&bob).filter(|e| !e.valid).count();
    let total = alice.len() + bob.len();
    let m = match_events(&alice, &bob, config.window_ns);
    let errs = correlation_errors(&m.table);
    Ok(PipelineReport {
        pairs_emitted: streams.pairs_emitted,
        alice_events: alice.len(),
        bob_events: bob.len(),
        flagged_fraction: if total == 0 { 0.0 } else { flagged as f64 / total as f64 },
        coincidences: m.pairs.len(),
        correlations: crate::bell::correlations_from_counts(&m.table).ok(),
        sigma_e: errs.map(|e| e.0),
        sigma_s: errs.map(|e| e.1),
        expected_s: ChshPattern::default().s(config.expected_correlations()),
        table: m.table,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SliceStats {
    pub start_ns: u64,
    pub width_ns: u64,
    /// `singles[station][detector - 1]`, summed over cycles.
    pub singles: [[u64; 2]; 2],
    /// Per-detector singles rate (events/s) averaged over cycles.
    pub singles_rate: [[f64; 2]; 2],
    pub coincidences: u64,
    pub table: CountTable,
    pub correlations: Option<Correlations>,
    pub sigma_e: Option<[f64; 4]>,
    pub sigma_s: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TimeResolvedReport {
    pub slice_width_ns: u64,
    pub n_cycles: u64,
    pub slices: Vec<SliceStats>,
    pub total_table: CountTable,
    pub total_singles: [[u64; 2]; 2],
}

impl TimeResolvedReport {
    /// Per-slice tables and singles summed, compared with the whole-run totals.
    pub fn totals_consistent(&self) -> bool {
        let mut t = [[0u64; 4]; 4];
        let mut s = [[0u64; 2]; 2];
        for sl in &self.slices {
            CycleCounts::add_table(&mut t, &sl.table.counts);
            CycleCounts::add_table(&mut s, &sl.singles);
        }
        t == self.total_table.counts && s == self.total_singles
    }
}

struct CycleCounts {
    singles: Vec<[[u64; 2]; 2]>,
    tables: Vec<[[u64; 4]; 4]>,
    total_singles: [[u64; 2]; 2],
    total_table: [[u64; 4]; 4],
}

impl CycleCounts {
    fn zero(n_slices: usize) -> Self {
        Self {
            singles: vec![[[0; 2]; 2]; n_slices],
            tables: vec![[[0; 4]; 4]; n_slices],
            total_singles: [[0; 2]; 2],
            total_table: [[0; 4]; 4],
        }
    }

    fn add_table<const R: usize, const C: usize>(acc: &mut [[u64; C]; R], x: &[[u64; C]; R]) {
        for (ra, rx) in acc.iter_mut().zip(x) {
            for (a, v) in ra.iter_mut().zip(rx) {
                *a += v;
            }
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, x) in self.singles.iter_mut().zip(&other.singles) {
            Self::add_table(a, x);
        }
        for (a, x) in self.tables.iter_mut().zip(&other.tables) {
            Self::add_table(a, x);
        }
        Self::add_table(&mut self.total_singles, &other.total_singles);
        Self::add_table(&mut self.total_table, &other.total_table);
        self
    }
}

/// Slices per cycle above which `time_resolved` refuses to run.
pub const MAX_SLICES: u64 = 1 << 22;

/// Repeats `n_cycles` power-on runs of `config.duration_ns` and accumulates
/// statistics per time slice after power-on. Cycles run in parallel; counts
/// are integer sums, so the result does not depend on scheduling.
pub fn time_resolved(config: &SimConfig, n_cycles: u64, slice_ns: u64) -> Result<TimeResolvedReport> {
    config.validate()?;
    if n_cycles == 0 {
        return Err(Error::invalid("need at least one cycle"));
    }
    if slice_ns == 0 {
        return Err(Error::invalid("slice width must be positive"));
    }
    let n_slices = config.duration_ns.div_ceil(slice_ns).max(1);
    if n_slices > MAX_SLICES {
        return Err(Error::ResourceLimit(format!("{n_slices} slices per cycle exceeds {MAX_SLICES}")));
    }
    let n_slices = n_slices as usize;
    let merged = (0..n_cycles)
        .into_par_iter()
        .map(|cycle| -> Result<CycleCounts> {
            let st = generate_cycle(config, cycle)?;
            let alice = compress(&st.alice, &st.alice_eom, config.eom_blanking_ns);
            let bob = compress(&st.bob, &st.bob_eom, config.eom_blanking_ns);
            let mut out = CycleCounts::zero(n_slices);
            for e in alice.iter().chain(&bob) {
                let k = ((e.t_ns / slice_ns) as usize).min(n_slices - 1);
                out.singles[k][e.station.index()][(e.detector - 1) as usize] += 1;
                out.total_singles[e.station.index()][(e.detector - 1) as usize] += 1;
            }
            let m = match_events(&alice, &bob, config.window_ns);
            for &(i, j) in &m.pairs {
                let (a, b) = (&alice[i], &bob[j]);
                let k = ((a.t_ns / slice_ns) as usize).min(n_slices - 1);
                out.tables[k][2 * b.eom as usize + (b.detector - 1) as usize][2 * a.eom as usize + (a.detector - 1) as usize] += 1;
            }
            out.total_table = m.table.counts;
            Ok(out)
        })
        .try_reduce(|| CycleCounts::zero(n_slices), |a, b| Ok(a.merge(b)))?;
    let CycleCounts { singles, tables, total_singles, total_table } = merged;
    let slices = (0..n_slices)
        .map(|k| {
            let start = k as u64 * slice_ns;
            let width = slice_ns.min(config.duration_ns.saturating_sub(start)).max(1);
            let table = CountTable { counts: tables[k] };
            let errs = correlation_errors(&table);
            let seconds = width as f64 * 1e-9 * n_cycles as f64;
            let mut rate = [[0.0; 2]; 2];
            for s in 0..2 {
                for d in 0..2 {
                    rate[s][d] = singles[k][s][d] as f64 / seconds;
                }
            }
            SliceStats {
                start_ns: start,
                width_ns: width,
                singles: singles[k],
                singles_rate: rate,
                coincidences: table.total(),
                correlations: crate::bell::correlations_from_counts(&table).ok(),
                sigma_e: errs.map(|e| e.0),
                sigma_s: errs.map(|e| e.1),
                table,
            }
        })
        .collect();
    Ok(TimeResolvedReport {
        slice_width_ns: slice_ns,
        n_cycles,
        slices,
        total_table: CountTable { counts: total_table },
        total_singles,
    })
}

pub const CSV_HEADER: &str = "t_ns,station,detector,eom,valid";

pub fn write_events_csv<W: Write>(w: W, events: &[EventRecord]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_HEADER.split(','))?;
    for e in events {
        wr.write_record([
            e.t_ns.to_string(),
            e.station.letter().to_string(),
            e.detector.to_string(),
            e.eom.to_string(),
            (e.valid as u8).to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

fn ingest_err(line: usize, message: impl Into<String>) -> Error {
    Error::Ingest { line, message: message.into() }
}

pub fn read_events_csv<R: Read>(r: R) -> Result<Vec<EventRecord>> {
    let mut lines = BufReader::new(r).lines();
    let header = lines.next().transpose()?.ok_or_else(|| ingest_err(1, "empty file"))?;
    if header.trim() != CSV_HEADER {
        return Err(ingest_err(1, format!("expected header '{CSV_HEADER}'")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(ingest_err(line_no, format!("expected 5 fields, found {}", f.len())));
        }
        let t_ns = f[0].parse::<u64>().map_err(|_| ingest_err(line_no, format!("bad timestamp '{}'", f[0])))?;
        let station = match f[1] {
            "A" => Station::Alice,
            "B" => Station::Bob,
            s => return Err(ingest_err(line_no, format!("station must be A or B, found '{s}'"))),
        };
        let detector = match f[2] {
            "1" => 1,
            "2" => 2,
            s => return Err(ingest_err(line_no, format!("detector must be 1 or 2, found '{s}'"))),
        };
        let bit = |s: &str, name: &str| match s {
            "0" => Ok(0u8),
            "1" => Ok(1u8),
            _ => Err(ingest_err(line_no, format!("{name} must be 0 or 1, found '{s}'"))),
        };
        let eom = bit(f[3], "eom")?;
        let valid = bit(f[4], "valid")? == 1;
        out.push(EventRecord { t_ns, station, detector, eom, valid });
    }
    Ok(out)
}

pub const BINARY_RECORD_LEN: usize = 9;

/// Little-endian `u64` timestamp, then bit 0 station (A = 0), bit 1 detector
/// (0 = detector 1), bit 2 eom, bit 3 valid.
pub fn write_events_binary<W: Write>(mut w: W, events: &[EventRecord]) -> Result<()> {
    for e in events {
        w.write_all(&e.t_ns.to_le_bytes())?;
        let flags = e.station.index() as u8 | (e.detector - 1) << 1 | e.eom << 2 | (e.valid as u8) << 3;
        w.write_all(&[flags])?;
    }
    w.flush()?;
    Ok(())
}

/// Record `k` (1-based) is reported as line `k`.
pub fn read_events_binary<R: Read>(mut r: R) -> Result<Vec<EventRecord>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() % BINARY_RECORD_LEN != 0 {
        return Err(ingest_err(buf.len() / BINARY_RECORD_LEN + 1, "truncated record"));
    }
    buf.chunks_exact(BINARY_RECORD_LEN)
        .enumerate()
        .map(|(i, rec)| {
            let t_ns = u64::from_le_bytes(rec[..8].try_into().expect("8 bytes"));
            let flags = rec[8];
            if flags & 0xF0 != 0 {
                return Err(ingest_err(i + 1, format!("reserved flag bits set: {flags:#04x}")));
            }
            Ok(EventRecord {
                t_ns,
                station: if flags & 1 == 0 { Station::Alice } else { Station::Bob },
                detector: 1 + (flags >> 1 & 1),
                eom: flags >> 2 & 1,
                valid: flags >> 3 & 1 == 1,
            })
        })
        .collect()
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("bin"))
}

pub fn write_events_path(path: &Path, events: &[EventRecord]) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    if is_binary(path) {
        write_events_binary(f, events)
    } else {
        write_events_csv(f, events)
    }
}

/// Reads `.bin` files as packed records and anything else as CSV, then
/// checks the stream invariants.
pub fn ingest(path: &Path, dead_time_ns: Option<u64>) -> Result<(Vec<EventRecord>, Vec<EventRecord>)> {
    let f = std::fs::File::open(path)?;
    let events = if is_binary(path) { read_events_binary(f)? } else { read_events_csv(f)? };
    let offset = if is_binary(path) { 1 } else { 2 };
    validate_stream(&events, dead_time_ns, offset)?;
    Ok(split_stations(events))
}

/// Per station: strictly increasing timestamps and, when given, the dead
/// time between events on one detector. Reports the offending record's
/// line (`index + line_offset`).
pub fn validate_stream(events: &[EventRecord], dead_time_ns: Option<u64>, line_offset: usize) -> Result<()> {
    let mut last_t: [Option<u64>; 2] = [None, None];
    let mut last_det: [[Option<u64>; 2]; 2] = [[None; 2]; 2];
    for (i, e) in events.iter().enumerate() {
        let s = e.station.index();
        if let Some(prev) = last_t[s] {
            if e.t_ns <= prev {
                return Err(ingest_err(
                    i + line_offset,
                    format!("timestamp {} not after {prev} on station {}", e.t_ns, e.station.letter()),
                ));
            }
        }
        last_t[s] = Some(e.t_ns);
        let d = (e.detector - 1) as usize;
        if let (Some(dt), Some(prev)) = (dead_time_ns, last_det[s][d]) {
            if e.t_ns - prev < dt {
                return Err(ingest_err(i + line_offset, format!("detector gap {} ns below dead time {dt} ns", e.t_ns - prev)));
            }
        }
        last_det[s][d] = Some(e.t_ns);
    }
    Ok(())
}

pub fn split_stations(events: Vec<EventRecord>) -> (Vec<EventRecord>, Vec<EventRecord>) {
    events.into_iter().partition(|e| e.station == Station::Alice)
}

/// Both streams merged by time (Alice first on ties), as written by `sim-events`.
pub fn merge_streams(alice: &[EventRecord], bob: &[EventRecord]) -> Vec<EventRecord> {
    let mut all: Vec<EventRecord> = alice.iter().chain(bob).copied().collect();
    all.sort_by_key(|e| (e.t_ns, e.station));
    all
}
