//! Hardness metrics, error-probability upper bounds, lower-bound decay rates
//! and the adversarial alternate instances behind the lower bounds.
//!
//! Everything is evaluated in the natural-log domain. Only non-empty boxes
//! and non-zero communities take part. Callers pass instances in any order;
//! sizes are sorted internally (largest first).

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;
use statrs::function::factorial::ln_binomial;
use thiserror::Error;

use crate::instance::{Instance, Setting};
use crate::schedule::{log_bar, sr_round_lengths};

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("{what} needs a {required} instance, got {found:?}")]
    WrongSetting {
        what: String,
        required: &'static str,
        found: Setting,
    },
    #[error("the community mode is tied: hardness is infinite")]
    InfiniteHardness,
    #[error("need at least 2 non-empty boxes, got {0}")]
    TooFewBoxes(usize),
    #[error("need at least 2 non-empty communities, got {0}")]
    TooFewCommunities(usize),
    #[error("unknown bound or rate id {0:?}")]
    UnknownId(String),
}

// ---------------------------------------------------------------------------
// sorted views

fn require(
    what: impl fmt::Display,
    d: &Instance,
    required: &'static str,
    ok: &[Setting],
) -> Result<Setting, BoundsError> {
    let found = d.classify_setting();
    if ok.contains(&found) {
        Ok(found)
    } else {
        Err(BoundsError::WrongSetting {
            what: what.to_string(),
            required,
            found,
        })
    }
}

fn require_unique_mode(d: &Instance) -> Result<(), BoundsError> {
    if d.summarize().has_unique_mode() {
        Ok(())
    } else {
        Err(BoundsError::InfiniteHardness)
    }
}

/// `log(n / (n - deficit))`, accurate when `deficit` is small against `n`.
fn log_gap(n: u64, deficit: u64) -> f64 {
    if deficit >= n {
        return f64::INFINITY;
    }
    -(-(deficit as f64) / n as f64).ln_1p()
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top.is_infinite() {
        return top;
    }
    top + terms.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

fn ceil_div(num: u128, den: u128) -> u128 {
    num.div_ceil(den)
}

/// Non-zero community sizes of a single-box or one-community-per-box
/// instance, largest first, with the total.
struct Sorted {
    sizes: Vec<u64>,
    total: u64,
}

impl Sorted {
    fn communities(d: &Instance) -> Self {
        let mut sizes: Vec<u64> = d.community_sizes().into_iter().filter(|&s| s > 0).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        let total = sizes.iter().sum();
        Sorted { sizes, total }
    }

    fn len(&self) -> usize {
        self.sizes.len()
    }

    fn top(&self) -> u64 {
        self.sizes[0]
    }

    /// `log(d_1) - log(d_i)` for 0-based `i`.
    fn gap(&self, i: usize) -> f64 {
        log_gap(self.top(), self.top() - self.sizes[i])
    }
}

fn mixed_view(what: impl fmt::Display, d: &Instance) -> Result<Sorted, BoundsError> {
    require(what, d, "mixed", &[Setting::Mixed])?;
    require_unique_mode(d)?;
    let s = Sorted::communities(d);
    if s.len() < 2 {
        return Err(BoundsError::TooFewCommunities(s.len()));
    }
    Ok(s)
}

fn separated_view(what: impl fmt::Display, d: &Instance) -> Result<Sorted, BoundsError> {
    require(what, d, "separated", &[Setting::Separated])?;
    require_unique_mode(d)?;
    let s = Sorted::communities(d);
    if s.len() < 2 {
        return Err(BoundsError::TooFewBoxes(s.len()));
    }
    Ok(s)
}

/// One non-empty box in the box-setting ordering.
#[derive(Debug, Clone)]
struct BoxEntry {
    /// Row in the original instance.
    index: usize,
    /// Column of the largest community in the box (lowest column on ties).
    top_column: usize,
    size: u64,
    largest: u64,
    second: u64,
}

/// Boxes ordered so that rank 1 holds the mode and the rest follow by
/// largest contained community, descending.
struct BoxView {
    boxes: Vec<BoxEntry>,
}

impl BoxView {
    fn new(what: impl fmt::Display, d: &Instance) -> Result<Self, BoundsError> {
        require(
            what,
            d,
            "separated or disjoint-box",
            &[Setting::Separated, Setting::DisjointBox],
        )?;
        require_unique_mode(d)?;
        let mut boxes = Vec::new();
        for b in 0..d.num_boxes() {
            let row = d.row(b);
            let size: u64 = row.iter().sum();
            if size == 0 {
                continue;
            }
            let mut top_column = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[top_column] {
                    top_column = c;
                }
            }
            let largest = row[top_column];
            let second = row
                .iter()
                .enumerate()
                .filter(|&(c, _)| c != top_column)
                .map(|(_, &v)| v)
                .max()
                .unwrap_or(0);
            boxes.push(BoxEntry {
                index: b,
                top_column,
                size,
                largest,
                second,
            });
        }
        if boxes.len() < 2 {
            return Err(BoundsError::TooFewBoxes(boxes.len()));
        }
        boxes.sort_by(|a, b| b.largest.cmp(&a.largest).then(a.index.cmp(&b.index)));
        Ok(BoxView { boxes })
    }

    fn len(&self) -> usize {
        self.boxes.len()
    }

    fn n1(&self) -> u64 {
        self.boxes[0].size
    }

    fn d11(&self) -> u64 {
        self.boxes[0].largest
    }

    /// Largest competing community of the box at 0-based rank `i`.
    fn competing(&self, i: usize) -> u64 {
        if i == 0 {
            self.boxes[0].second
        } else {
            self.boxes[i].largest
        }
    }

    /// `log(N_1) - log(N_1 - d_11 + c_i)`.
    fn gap(&self, i: usize) -> f64 {
        log_gap(self.n1(), self.d11() - self.competing(i))
    }

    /// Smallest size of box `i` (0-based rank ≥ 1) that lets its largest
    /// community overtake the mode without making any box easier.
    fn alternate_size(&self, i: usize) -> u64 {
        let n1 = self.n1() as u128;
        let d11 = self.d11() as u128;
        let na = self.boxes[i].size as u128;
        let ca = self.competing(i) as u128;
        let first = ceil_div(n1 * (na - ca + d11), n1 - d11 + ca);
        let rest = (1..self.len()).map(|j| {
            let cj = self.competing(j) as u128;
            ceil_div(n1 * (na - ca + cj), n1 - d11 + cj)
        });
        rest.fold(first, u128::max) as u64
    }
}

// ---------------------------------------------------------------------------
// hardness

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardnessSeparated {
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "H2")]
    pub h2: f64,
    #[serde(rename = "Hc")]
    pub hc: f64,
}

pub fn hardness_separated(d: &Instance) -> Result<HardnessSeparated, BoundsError> {
    let s = separated_view("hardness_separated", d)?;
    Ok(separated_metrics(&s))
}

fn separated_metrics(s: &Sorted) -> HardnessSeparated {
    let d1 = s.top() as f64;
    let mut h = 0.0f64;
    let mut h2 = 0.0;
    let mut hc = 0.0f64;
    for i in 1..s.len() {
        let rank = (i + 1) as f64;
        let gap = s.gap(i);
        let di = s.sizes[i] as f64;
        h = h.max(rank / gap);
        h2 += 1.0 / gap;
        hc = hc.max(rank * d1 * d1 * di / ((d1 - di) * (d1 - di)));
    }
    HardnessSeparated { h, h2, hc }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardnessBox {
    #[serde(rename = "Hb")]
    pub hb: f64,
    #[serde(rename = "Hb2")]
    pub hb2: f64,
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    /// Original row of the box the reported `gamma` refers to.
    pub gamma_box: usize,
}

/// Γ for one candidate box of the box-setting lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaCandidate {
    /// 1-based position in the internal ordering (2..=b).
    pub rank: usize,
    /// Original row.
    pub box_index: usize,
    pub gamma: f64,
    /// New box size in the alternate instance.
    pub alternate_box_size: u64,
}

pub fn hardness_box(d: &Instance) -> Result<HardnessBox, BoundsError> {
    let v = BoxView::new("hardness_box", d)?;
    let mut hb = 0.0f64;
    let mut hb2 = 0.0;
    for i in 1..v.len() {
        let gap = v.gap(i);
        hb = hb.max((i + 1) as f64 / gap);
        hb2 += 1.0 / gap;
    }
    let candidates = gamma_from_view(&v);
    let pick = default_gamma_rank(&v);
    let chosen = candidates[pick - 2];
    Ok(HardnessBox {
        hb,
        hb2,
        gamma: chosen.gamma,
        gamma_box: chosen.box_index,
    })
}

/// Γ for every candidate box `a` in `2..=b`.
pub fn gamma_candidates(d: &Instance) -> Result<Vec<GammaCandidate>, BoundsError> {
    let v = BoxView::new("gamma_candidates", d)?;
    Ok(gamma_from_view(&v))
}

fn gamma_from_view(v: &BoxView) -> Vec<GammaCandidate> {
    (1..v.len())
        .map(|i| {
            let n_alt = v.alternate_size(i);
            let na = v.boxes[i].size;
            GammaCandidate {
                rank: i + 1,
                box_index: v.boxes[i].index,
                gamma: (n_alt as f64 / na as f64).ln() / v.gap(i),
                alternate_box_size: n_alt,
            }
        })
        .collect()
}

// The box receiving the smallest share `t / (gap_a * Hb2)` of queries, i.e.
// the largest gap; the earliest rank wins ties.
fn default_gamma_rank(v: &BoxView) -> usize {
    let mut best = 1;
    for i in 2..v.len() {
        if v.gap(i) > v.gap(best) {
            best = i;
        }
    }
    best + 1
}

// ---------------------------------------------------------------------------
// upper bounds

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BoundId {
    #[serde(rename = "SFM")]
    Sfm,
    #[serde(rename = "DSM_MCDIARMID")]
    DsmMcdiarmid,
    #[serde(rename = "DSM_COUPON")]
    DsmCoupon,
    #[serde(rename = "CCSR")]
    Ccsr,
    /// Per-phase sum over the actual schedule.
    #[serde(rename = "DSSR_SEP")]
    DssrSep,
    /// Single-exponent form in terms of `H`; never below `DssrSep`.
    #[serde(rename = "DSSR_SEP_CLOSED")]
    DssrSepClosed,
    #[serde(rename = "DSSR_BOX")]
    DssrBox,
}

impl BoundId {
    pub const ALL: [BoundId; 7] = [
        BoundId::Sfm,
        BoundId::DsmMcdiarmid,
        BoundId::DsmCoupon,
        BoundId::Ccsr,
        BoundId::DssrSep,
        BoundId::DssrSepClosed,
        BoundId::DssrBox,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundId::Sfm => "SFM",
            BoundId::DsmMcdiarmid => "DSM_MCDIARMID",
            BoundId::DsmCoupon => "DSM_COUPON",
            BoundId::Ccsr => "CCSR",
            BoundId::DssrSep => "DSSR_SEP",
            BoundId::DssrSepClosed => "DSSR_SEP_CLOSED",
            BoundId::DssrBox => "DSSR_BOX",
        }
    }
}

impl fmt::Display for BoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Natural log of an error-probability bound, clamped at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundValue {
    pub log_value: f64,
    /// False when `t` lies outside the range where the bound is stated.
    pub valid: bool,
}

impl BoundValue {
    fn clamped(log_value: f64, valid: bool) -> Self {
        BoundValue {
            log_value: log_value.min(0.0),
            valid,
        }
    }
}

pub fn upper_bound(id: BoundId, d: &Instance, t: u64) -> Result<BoundValue, BoundsError> {
    let tf = t as f64;
    match id {
        BoundId::Sfm => {
            let s = mixed_view(id, d)?;
            let m = s.len() as f64;
            let n = s.total as f64;
            let root_gap = (s.sizes[0] as f64).sqrt() - (s.sizes[1] as f64).sqrt();
            let per_query = (-(root_gap * root_gap) / n).ln_1p();
            Ok(BoundValue::clamped((m - 1.0).ln() + tf * per_query, true))
        }
        BoundId::DsmMcdiarmid => {
            let s = mixed_view(id, d)?;
            let m = s.len();
            let n = s.total as f64;
            let d1 = s.top() as f64;
            let dm = s.sizes[m - 1] as f64;
            let rest_mean = s.sizes[1..].iter().sum::<u64>() as f64 / (m - 1) as f64;
            let margin = d1 - rest_mean;
            let log_value = (2.0 * (m - 1) as f64).ln() - tf * margin * margin / (32.0 * n * d1);
            let window = ((d1 + dm) * n / (2.0 * d1)).min(16.0 * n * d1 / ((d1 - dm) * (d1 - dm)));
            Ok(BoundValue::clamped(log_value, tf <= window))
        }
        BoundId::DsmCoupon => {
            let s = mixed_view(id, d)?;
            let (d1, d2) = (s.sizes[0], s.sizes[1]);
            let log_value = ln_binomial(d1, d2) - tf * log_gap(s.total, d1 - d2);
            Ok(BoundValue::clamped(log_value, true))
        }
        BoundId::Ccsr => {
            let s = separated_view(id, d)?;
            let b = s.len();
            let hc = separated_metrics(&s).hc;
            let lb = log_bar(b).expect("b >= 2");
            let log_value =
                ((b * (b - 1)) as f64 / 2.0).ln() - (tf / 2.0 - b as f64) / (4.0 * lb * hc);
            Ok(BoundValue::clamped(log_value, true))
        }
        BoundId::DssrSep => {
            let s = separated_view(id, d)?;
            let b = s.len();
            let Ok(schedule) = sr_round_lengths(t, b) else {
                // no phase gets any pulls: the bound exceeds 1
                return Ok(BoundValue::clamped(0.0, true));
            };
            let terms: Vec<f64> = (1..b)
                .map(|r| {
                    let i = b - r;
                    ln_binomial(s.top(), s.sizes[i]) - schedule.cumulative[r] as f64 * s.gap(i)
                })
                .collect();
            Ok(BoundValue::clamped(log_sum_exp(&terms), true))
        }
        BoundId::DssrSepClosed => {
            let s = separated_view(id, d)?;
            let b = s.len();
            let h = separated_metrics(&s).h;
            let lb = log_bar(b).expect("b >= 2");
            let prefactors: Vec<f64> = (1..b).map(|i| ln_binomial(s.top(), s.sizes[i])).collect();
            let log_value = log_sum_exp(&prefactors) - (tf - b as f64) / (lb * h);
            Ok(BoundValue::clamped(log_value, true))
        }
        BoundId::DssrBox => {
            let v = BoxView::new(id, d)?;
            let b = v.len();
            let lb = log_bar(b).expect("b >= 2");
            let hb = hardness_box(d)?.hb;
            let spare = tf - b as f64;
            let box_prefactors: Vec<f64> = (1..b)
                .map(|i| ln_binomial(v.d11(), v.competing(i)))
                .collect();
            let wrong_box = log_sum_exp(&box_prefactors) - spare / (lb * hb);
            let in_box_gap = v.gap(0);
            let wrong_community = if in_box_gap.is_infinite() {
                f64::NEG_INFINITY
            } else {
                ln_binomial(v.d11(), v.competing(0)) - spare * in_box_gap / (2.0 * lb)
            };
            Ok(BoundValue::clamped(
                log_sum_exp(&[wrong_box, wrong_community]),
                true,
            ))
        }
    }
}

/// Per-query exponential decay rate guaranteed by an upper bound, i.e. the
/// `λ` in `P_e ≤ μ e^{-λ t}`. For the SR bounds this is the leading-order
/// rate; `DSSR_BOX` gives the smaller of its two terms' rates.
pub fn upper_bound_rate(id: BoundId, d: &Instance) -> Result<f64, BoundsError> {
    match id {
        BoundId::Sfm => {
            let s = mixed_view(id, d)?;
            let root_gap = (s.sizes[0] as f64).sqrt() - (s.sizes[1] as f64).sqrt();
            Ok(-(-(root_gap * root_gap) / s.total as f64).ln_1p())
        }
        BoundId::DsmMcdiarmid => {
            let s = mixed_view(id, d)?;
            let m = s.len();
            let d1 = s.top() as f64;
            let margin = d1 - s.sizes[1..].iter().sum::<u64>() as f64 / (m - 1) as f64;
            Ok(margin * margin / (32.0 * s.total as f64 * d1))
        }
        BoundId::DsmCoupon => {
            let s = mixed_view(id, d)?;
            Ok(log_gap(s.total, s.sizes[0] - s.sizes[1]))
        }
        BoundId::Ccsr => {
            let s = separated_view(id, d)?;
            let lb = log_bar(s.len()).expect("b >= 2");
            Ok(1.0 / (8.0 * lb * separated_metrics(&s).hc))
        }
        BoundId::DssrSep | BoundId::DssrSepClosed => {
            let s = separated_view(id, d)?;
            let lb = log_bar(s.len()).expect("b >= 2");
            Ok(1.0 / (lb * separated_metrics(&s).h))
        }
        BoundId::DssrBox => {
            let v = BoxView::new(id, d)?;
            let lb = log_bar(v.len()).expect("b >= 2");
            let hb = hardness_box(d)?.hb;
            Ok((1.0 / hb).min(v.gap(0) / 2.0) / lb)
        }
    }
}

// ---------------------------------------------------------------------------
// lower-bound rates

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RateId {
    #[serde(rename = "MIXED_IDENTITYLESS")]
    MixedIdentityless,
    #[serde(rename = "MIXED_IDENTITY")]
    MixedIdentity,
    #[serde(rename = "SEPARATED")]
    Separated,
    #[serde(rename = "BOX_MIXED")]
    BoxMixed,
    #[serde(rename = "BOX_GAMMA")]
    BoxGamma,
}

impl RateId {
    pub const ALL: [RateId; 5] = [
        RateId::MixedIdentityless,
        RateId::MixedIdentity,
        RateId::Separated,
        RateId::BoxMixed,
        RateId::BoxGamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RateId::MixedIdentityless => "MIXED_IDENTITYLESS",
            RateId::MixedIdentity => "MIXED_IDENTITY",
            RateId::Separated => "SEPARATED",
            RateId::BoxMixed => "BOX_MIXED",
            RateId::BoxGamma => "BOX_GAMMA",
        }
    }
}

impl fmt::Display for RateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Best achievable per-query decay rate of the error probability. Larger
/// rates mean easier instances; `+inf` means no alternate instance exists
/// (the error can be driven to zero in finitely many queries).
pub fn lower_bound_rate(id: RateId, d: &Instance) -> Result<f64, BoundsError> {
    match id {
        RateId::MixedIdentityless => upper_bound_rate(BoundId::Sfm, d).map_err(|e| rename(e, id)),
        RateId::MixedIdentity => {
            let s = mixed_view(id, d)?;
            Ok(log_gap(s.total, s.sizes[0] - s.sizes[1] + 1))
        }
        RateId::Separated => Ok(3.0 / hardness_separated(d).map_err(|e| rename(e, id))?.h2),
        RateId::BoxMixed => {
            let v = BoxView::new(id, d)?;
            Ok(log_gap(v.n1(), v.d11() - v.competing(0) + 1))
        }
        RateId::BoxGamma => {
            let h = hardness_box(d).map_err(|e| rename(e, id))?;
            Ok(h.gamma / h.hb2)
        }
    }
}

fn rename(e: BoundsError, id: impl fmt::Display) -> BoundsError {
    match e {
        BoundsError::WrongSetting {
            required, found, ..
        } => BoundsError::WrongSetting {
            what: id.to_string(),
            required,
            found,
        },
        other => other,
    }
}

// ---------------------------------------------------------------------------
// alternate instances

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AlternateKind {
    Separated,
    DisjointBox,
}

/// A perturbed instance whose mode differs but which is no harder.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternateInstance {
    /// 1-based position of the perturbed box in the internal ordering.
    pub rank: usize,
    /// Original row of the perturbed box.
    pub box_index: usize,
    /// Column whose count was raised.
    pub community: usize,
    /// New count of that community.
    pub new_size: u64,
    pub instance: Instance,
}

/// Outcome of checking an alternate instance's guarantees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlternateCheck {
    pub mode_flipped: bool,
    pub hardness_before: f64,
    pub hardness_after: f64,
}

impl AlternateCheck {
    /// Floating sums are compared with a 1e-12 relative slack.
    pub fn holds(&self) -> bool {
        self.mode_flipped && self.hardness_after <= self.hardness_before * (1.0 + 1e-12)
    }
}

/// All candidate alternate instances, one per box rank `2..=b`.
pub fn alternate_candidates(
    d: &Instance,
    kind: AlternateKind,
) -> Result<Vec<AlternateInstance>, BoundsError> {
    match kind {
        AlternateKind::Separated => {
            separated_view("alternate_instance", d)?;
            let v = BoxView::new("alternate_instance", d)?;
            let d1 = v.d11() as u128;
            Ok((1..v.len())
                .map(|i| {
                    let da = v.boxes[i].largest as u128;
                    build_alternate(d, &v, i, ceil_div(d1 * d1, da) as u64)
                })
                .collect())
        }
        AlternateKind::DisjointBox => {
            let v = BoxView::new("alternate_instance", d)?;
            Ok((1..v.len())
                .map(|i| {
                    let e = &v.boxes[i];
                    let grown = e.largest + (v.alternate_size(i) - e.size);
                    build_alternate(d, &v, i, grown)
                })
                .collect())
        }
    }
}

fn build_alternate(d: &Instance, v: &BoxView, i: usize, new_size: u64) -> AlternateInstance {
    let e = &v.boxes[i];
    let counts: Vec<Vec<i64>> = (0..d.num_boxes())
        .map(|b| {
            d.row(b)
                .iter()
                .enumerate()
                .map(|(c, &x)| {
                    if b == e.index && c == e.top_column {
                        new_size as i64
                    } else {
                        x as i64
                    }
                })
                .collect()
        })
        .collect();
    let instance = Instance::new(
        counts,
        d.box_labels().to_vec(),
        d.community_labels().to_vec(),
    )
    .expect("raising one count keeps the instance well formed");
    AlternateInstance {
        rank: i + 1,
        box_index: e.index,
        community: e.top_column,
        new_size,
        instance,
    }
}

/// The alternate instance with the largest perturbed size (the most
/// conservative candidate). Use [`alternate_candidates`] for the rest.
pub fn alternate_instance(
    d: &Instance,
    kind: AlternateKind,
) -> Result<AlternateInstance, BoundsError> {
    let candidates = alternate_candidates(d, kind)?;
    let mut best = 0;
    for (k, c) in candidates.iter().enumerate() {
        let size = |a: &AlternateInstance| a.instance.box_size(a.box_index);
        if size(c) > size(&candidates[best]) {
            best = k;
        }
    }
    Ok(candidates
        .into_iter()
        .nth(best)
        .expect("at least one candidate"))
}

/// Checks that `alt` moves the mode away from `d`'s and is no harder, with
/// hardness `H2` (separated) or `Hb2` (box).
pub fn check_alternate(
    d: &Instance,
    alt: &AlternateInstance,
    kind: AlternateKind,
) -> Result<AlternateCheck, BoundsError> {
    let before = d.summarize();
    let after = alt.instance.summarize();
    let mode_flipped = before.mode_set.iter().all(|&c| !after.is_mode(c));
    let (hardness_before, hardness_after) = match kind {
        AlternateKind::Separated => (
            hardness_separated(d)?.h2,
            hardness_separated(&alt.instance)?.h2,
        ),
        AlternateKind::DisjointBox => (hardness_box(d)?.hb2, hardness_box(&alt.instance)?.hb2),
    };
    Ok(AlternateCheck {
        mode_flipped,
        hardness_before,
        hardness_after,
    })
}

// ---------------------------------------------------------------------------
// curves

/// Either a budget-dependent bound or a budget-free rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveId {
    Bound(BoundId),
    Rate(RateId),
}

impl CurveId {
    pub fn name(self) -> &'static str {
        match self {
            CurveId::Bound(b) => b.name(),
            CurveId::Rate(r) => r.name(),
        }
    }
}

impl fmt::Display for CurveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CurveId {
    type Err = BoundsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_uppercase().replace('-', "_");
        if let Some(b) = BoundId::ALL.into_iter().find(|b| b.name() == wanted) {
            return Ok(CurveId::Bound(b));
        }
        RateId::ALL
            .into_iter()
            .find(|r| r.name() == wanted)
            .map(CurveId::Rate)
            .ok_or_else(|| BoundsError::UnknownId(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    /// `None` for rates.
    pub t: Option<u64>,
    /// Log of the bound, or the rate itself.
    pub log_value: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub id: CurveId,
    pub points: Vec<CurvePoint>,
}

/// Evaluates `id` over `budgets`; rates produce a single point.
pub fn bound_curve(id: CurveId, d: &Instance, budgets: &[u64]) -> Result<BoundCurve, BoundsError> {
    let points = match id {
        CurveId::Bound(b) => budgets
            .iter()
            .map(|&t| {
                upper_bound(b, d, t).map(|v| CurvePoint {
                    t: Some(t),
                    log_value: v.log_value,
                    valid: v.valid,
                })
            })
            .collect::<Result<_, _>>()?,
        CurveId::Rate(r) => vec![CurvePoint {
            t: None,
            log_value: lower_bound_rate(r, d)?,
            valid: true,
        }],
    };
    Ok(BoundCurve { id, points })
}

/// Writes curves as CSV with columns `bound_id,t,log_value,valid`.
pub fn write_curves_csv<W: Write>(curves: &[BoundCurve], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bound_id", "t", "log_value", "valid"])?;
    for curve in curves {
        for p in &curve.points {
            let t = p.t.map(|t| t.to_string()).unwrap_or_default();
            w.write_record([
                curve.id.name(),
                &t,
                &p.log_value.to_string(),
                if p.valid { "true" } else { "false" },
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn two_box() -> Instance {
        Instance::disjoint_boxes(&[&[4, 2], &[3]]).unwrap()
    }

    #[test]
    fn separated_hand_values() {
        let d = Instance::separated(&[2, 4]).unwrap();
        let h = hardness_separated(&d).unwrap();
        let ln2 = 2f64.ln();
        assert_relative_eq!(h.h, 2.0 / ln2, max_relative = 1e-12);
        assert_relative_eq!(h.h2, 1.0 / ln2, max_relative = 1e-12);
        assert_relative_eq!(h.hc, 16.0, max_relative = 1e-12);
        assert_eq!(h.h / 2.0, h.h2);

        let d = Instance::separated(&[8, 4, 2]).unwrap();
        let h = hardness_separated(&d).unwrap();
        assert_relative_eq!(h.h, 2.0 / ln2, max_relative = 1e-12);
    }

    #[test]
    fn box_hand_values() {
        let h = hardness_box(&two_box()).unwrap();
        let l = (6.0f64 / 5.0).ln();
        assert_relative_eq!(h.hb, 2.0 / l, max_relative = 1e-12);
        assert_relative_eq!(h.hb2, 1.0 / l, max_relative = 1e-12);
        assert_relative_eq!(h.gamma, (5.0f64 / 3.0).ln() / l, max_relative = 1e-12);
        assert_eq!(h.gamma_box, 1);
        assert!((h.hb - 10.9695).abs() < 2e-4);
        assert!((h.hb2 - 5.4848).abs() < 1e-4);
        assert!((h.gamma - 2.8018).abs() < 1e-4);
    }

    #[test]
    fn box_metrics_reduce_to_separated() {
        for sizes in [&[4u64, 2][..], &[9, 3, 7, 1], &[100, 99, 98]] {
            let d = Instance::separated(sizes).unwrap();
            let s = hardness_separated(&d).unwrap();
            let b = hardness_box(&d).unwrap();
            assert_eq!(s.h, b.hb);
            assert_eq!(s.h2, b.hb2);
        }
    }

    #[test]
    fn box_ordering_ignores_input_order() {
        let a = Instance::disjoint_boxes(&[&[3], &[4, 2], &[1, 1]]).unwrap();
        let b = two_box();
        let ha = hardness_box(&a).unwrap();
        assert!(ha.hb2 > hardness_box(&b).unwrap().hb2);
        let swapped = Instance::disjoint_boxes(&[&[1, 1], &[3], &[2, 4]]).unwrap();
        let hs = hardness_box(&swapped).unwrap();
        assert_eq!(ha.hb, hs.hb);
        assert_eq!(ha.hb2, hs.hb2);
        assert_eq!(ha.gamma, hs.gamma);
    }

    #[test]
    fn errors() {
        let tied = Instance::separated(&[3, 3]).unwrap();
        assert_eq!(
            hardness_separated(&tied),
            Err(BoundsError::InfiniteHardness)
        );
        let mixed = Instance::mixed(&[3, 1]).unwrap();
        assert!(matches!(
            hardness_separated(&mixed),
            Err(BoundsError::WrongSetting { .. })
        ));
        assert!(matches!(
            upper_bound(BoundId::Ccsr, &mixed, 10),
            Err(BoundsError::WrongSetting { .. })
        ));
        assert!(matches!(
            hardness_separated(&two_box()),
            Err(BoundsError::WrongSetting { .. })
        ));
        let general = Instance::from_counts(vec![vec![2, 1], vec![1, 0]]).unwrap();
        assert!(matches!(
            hardness_box(&general),
            Err(BoundsError::WrongSetting { .. })
        ));
        let lone = Instance::mixed(&[5, 0]).unwrap();
        assert_eq!(
            upper_bound(BoundId::Sfm, &lone, 3),
            Err(BoundsError::TooFewCommunities(1))
        );
    }

    #[test]
    fn mixed_upper_bound_examples() {
        let d = Instance::mixed(&[4, 1]).unwrap();
        let v = upper_bound(BoundId::Sfm, &d, 0).unwrap();
        assert_eq!(v.log_value, 0.0);
        let d = Instance::mixed(&[2, 1]).unwrap();
        assert_eq!(
            upper_bound(BoundId::DsmCoupon, &d, 1).unwrap().log_value,
            0.0
        );
        let raw = 2f64.ln() + 3.0 * (2.0f64 / 3.0).ln();
        assert_relative_eq!(
            upper_bound(BoundId::DsmCoupon, &d, 3).unwrap().log_value,
            raw,
            max_relative = 1e-12
        );
        let d = Instance::mixed(&[9, 4]).unwrap();
        let v = upper_bound(BoundId::Sfm, &d, 10).unwrap();
        assert_relative_eq!(
            v.log_value,
            10.0 * (12.0f64 / 13.0).ln(),
            max_relative = 1e-12
        );
        assert!((v.log_value + 0.8004).abs() < 1e-4);
    }

    #[test]
    fn mcdiarmid_window() {
        // N = 10, d1 = 6, dm = 1: window = min(70/12, 960/25) = 5.83
        let d = Instance::mixed(&[6, 3, 1]).unwrap();
        assert!(upper_bound(BoundId::DsmMcdiarmid, &d, 5).unwrap().valid);
        assert!(!upper_bound(BoundId::DsmMcdiarmid, &d, 6).unwrap().valid);
    }

    #[test]
    fn rates() {
        let d = Instance::mixed(&[9, 4]).unwrap();
        let r = lower_bound_rate(RateId::MixedIdentityless, &d).unwrap();
        assert_relative_eq!(r, (13.0f64 / 12.0).ln(), max_relative = 1e-12);
        let r = lower_bound_rate(RateId::MixedIdentity, &d).unwrap();
        assert_relative_eq!(r, (13.0f64 / 7.0).ln(), max_relative = 1e-12);
        let d = Instance::separated(&[4, 2]).unwrap();
        let r = lower_bound_rate(RateId::Separated, &d).unwrap();
        assert_relative_eq!(r, 3.0 * 2f64.ln(), max_relative = 1e-12);
        assert_eq!(
            lower_bound_rate(RateId::BoxMixed, &d).unwrap(),
            f64::INFINITY
        );
        let r = lower_bound_rate(RateId::BoxMixed, &two_box()).unwrap();
        assert_relative_eq!(r, 2f64.ln(), max_relative = 1e-12);
        let h = hardness_box(&two_box()).unwrap();
        let r = lower_bound_rate(RateId::BoxGamma, &two_box()).unwrap();
        assert_relative_eq!(r, h.gamma / h.hb2, max_relative = 1e-12);
        match lower_bound_rate(RateId::Separated, &two_box()) {
            Err(BoundsError::WrongSetting { what, .. }) => assert_eq!(what, "SEPARATED"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sr_bounds_cross_check() {
        let d = Instance::separated(&[40, 30, 20, 10]).unwrap();
        for t in [0, 4, 5, 50, 400, 4000] {
            let exact = upper_bound(BoundId::DssrSep, &d, t).unwrap().log_value;
            let closed = upper_bound(BoundId::DssrSepClosed, &d, t)
                .unwrap()
                .log_value;
            assert!(closed >= exact, "t={t}: {closed} < {exact}");
        }
        let at = |t| upper_bound(BoundId::DssrSep, &d, t).unwrap().log_value;
        assert!(at(4000) < at(400) && at(400) < 0.0);
    }

    #[test]
    fn box_bound_two_terms() {
        let d = two_box();
        let t = 1000;
        let v = upper_bound(BoundId::DssrBox, &d, t).unwrap().log_value;
        let l = (6.0f64 / 5.0).ln();
        let spare = (t - 2) as f64;
        let first = ln_binomial(4, 3) - spare / (2.0 / l);
        let second = ln_binomial(4, 2) - spare * (6.0f64 / 4.0).ln() / 2.0;
        assert_relative_eq!(v, (first.exp() + second.exp()).ln(), max_relative = 1e-12);
        // a box holding only the mode contributes no in-box term
        let single = Instance::separated(&[5, 2]).unwrap();
        let v = upper_bound(BoundId::DssrBox, &single, 100)
            .unwrap()
            .log_value;
        assert!(v.is_finite() && v < 0.0);
    }

    #[test]
    fn alternate_separated_example() {
        let d = Instance::separated(&[4, 2]).unwrap();
        let alt = alternate_instance(&d, AlternateKind::Separated).unwrap();
        assert_eq!(alt.rank, 2);
        assert_eq!(alt.new_size, 8);
        assert_eq!(alt.instance.community_sizes(), vec![4, 8]);
        let check = check_alternate(&d, &alt, AlternateKind::Separated).unwrap();
        assert!(check.holds());
        assert_eq!(check.hardness_after, check.hardness_before);
    }

    #[test]
    fn alternate_box_example() {
        let d = two_box();
        let alt = alternate_instance(&d, AlternateKind::DisjointBox).unwrap();
        assert_eq!(alt.instance.box_size(1), 5);
        assert_eq!(alt.new_size, 5);
        assert_eq!(alt.community, 2);
        assert_eq!(gamma_candidates(&d).unwrap()[0].alternate_box_size, 5);
        assert!(check_alternate(&d, &alt, AlternateKind::DisjointBox)
            .unwrap()
            .holds());
    }

    #[test]
    fn curve_csv() {
        let d = Instance::mixed(&[2, 1]).unwrap();
        let c = bound_curve("dsm_coupon".parse().unwrap(), &d, &[1, 2, 3]).unwrap();
        let r = bound_curve("MIXED_IDENTITY".parse().unwrap(), &d, &[1, 2, 3]).unwrap();
        let mut out = Vec::new();
        write_curves_csv(&[c, r], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "bound_id,t,log_value,valid");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "DSM_COUPON,1,0,true");
        assert!(lines[4].starts_with("MIXED_IDENTITY,,"));
        assert!("nope".parse::<CurveId>().is_err());
    }

    fn unique_sizes(max_len: usize) -> impl Strategy<Value = Vec<u64>> {
        prop::collection::vec(2u64..10_000, 2..max_len).prop_filter("unique mode", |v| {
            let top = *v.iter().max().unwrap();
            v.iter().filter(|&&x| x == top).count() == 1
        })
    }

    proptest! {
        #[test]
        fn identity_rate_beats_identityless(sizes in unique_sizes(6)) {
            let d = Instance::mixed(&sizes).unwrap();
            let with = lower_bound_rate(RateId::MixedIdentity, &d).unwrap();
            let without = lower_bound_rate(RateId::MixedIdentityless, &d).unwrap();
            prop_assert!(with > without);
        }

        #[test]
        fn bounds_non_increasing_in_t(sizes in unique_sizes(6), t in 0u64..5000) {
            let mixed = Instance::mixed(&sizes).unwrap();
            let sep = Instance::separated(&sizes).unwrap();
            for (id, d) in [
                (BoundId::Sfm, &mixed),
                (BoundId::DsmMcdiarmid, &mixed),
                (BoundId::DsmCoupon, &mixed),
                (BoundId::Ccsr, &sep),
                (BoundId::DssrSep, &sep),
                (BoundId::DssrSepClosed, &sep),
                (BoundId::DssrBox, &sep),
            ] {
                let a = upper_bound(id, d, t).unwrap();
                let b = upper_bound(id, d, t + 7).unwrap();
                prop_assert!(a.log_value <= 0.0);
                prop_assert!(b.log_value <= a.log_value, "{id} {t}");
            }
        }

        #[test]
        fn alternates_hold(sizes in unique_sizes(6)) {
            let d = Instance::separated(&sizes).unwrap();
            for kind in [AlternateKind::Separated, AlternateKind::DisjointBox] {
                for alt in alternate_candidates(&d, kind).unwrap() {
                    prop_assert!(check_alternate(&d, &alt, kind).unwrap().holds());
                }
            }
        }
    }
}
