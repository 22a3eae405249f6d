//! Desk-scale stand-in for an electromagnetic simulator.
//!
//! Curves are five-band radiation-efficiency responses in dB: two stopband
//! plateaus and a passband plateau joined by logistic transitions centred in
//! the null bands, a sinusoidal passband ripple, and a Gaussian notch in each
//! null band. Everything is a pure function of its inputs.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{
    evaluate_expr, format_real, Aggregator, Band, EvalError, EvalOptions, Expr, Formulation, FormulationError,
    FormulationItem,
};
use crate::instance::TestInstance;
use crate::ranking::{induced_ranking, RankError, Ranking};
use crate::requirement::{Comparator, DesignIntent, Direction, MetricId, Requirement, RequirementSet};

/// Lowest value a rendered curve may take, in dB.
pub const DB_FLOOR: f64 = -60.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("band spec: {0}")]
    BandSpec(String),
    #[error("design parameters need at least 5 entries, got {0}")]
    TooFewParams(usize),
    #[error("sampling needs at least 50 points, got {0}")]
    TooFewSamples(usize),
    #[error("{band}: {source}")]
    Eval {
        band: String,
        #[source]
        source: EvalError,
    },
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error("no item eligible for {0:?}")]
    NoEligibleItem(CorruptionKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandName {
    LowStopband,
    LowNull,
    Passband,
    HighNull,
    HighStopband,
}

impl BandName {
    pub const ALL: [BandName; 5] = [
        BandName::LowStopband,
        BandName::LowNull,
        BandName::Passband,
        BandName::HighNull,
        BandName::HighStopband,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BandName::LowStopband => "low stopband",
            BandName::LowNull => "low radiation null",
            BandName::Passband => "passband",
            BandName::HighNull => "high radiation null",
            BandName::HighStopband => "high stopband",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandSpec {
    pub low_stopband: Band<f64>,
    pub low_null: Band<f64>,
    pub passband: Band<f64>,
    pub high_null: Band<f64>,
    pub high_stopband: Band<f64>,
    pub z_units: String,
    pub metric: MetricId,
}

impl Default for BandSpec {
    fn default() -> Self {
        let b = |lo, hi| Band::new(lo, hi).expect("default band");
        BandSpec {
            low_stopband: b(0.80, 0.92),
            low_null: b(0.92, 0.95),
            passband: b(0.95, 1.08),
            high_null: b(1.08, 1.12),
            high_stopband: b(1.12, 1.20),
            z_units: "GHz".into(),
            metric: MetricId::new("radiation_efficiency", "dB").expect("default metric"),
        }
    }
}

impl BandSpec {
    pub fn band(&self, name: BandName) -> Band<f64> {
        match name {
            BandName::LowStopband => self.low_stopband,
            BandName::LowNull => self.low_null,
            BandName::Passband => self.passband,
            BandName::HighNull => self.high_null,
            BandName::HighStopband => self.high_stopband,
        }
    }

    /// Bands must be ordered and may only touch at shared endpoints.
    pub fn validate(&self) -> Result<(), SynthError> {
        for pair in BandName::ALL.windows(2) {
            let (a, b) = (self.band(pair[0]), self.band(pair[1]));
            if a.hi() > b.lo() {
                return Err(SynthError::BandSpec(format!(
                    "{} {} overlaps {} {}",
                    pair[0].label(),
                    a,
                    pair[1].label(),
                    b
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sampling {
    pub z_min: f64,
    pub z_max: f64,
    pub n_samples: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            z_min: 0.75,
            z_max: 1.25,
            n_samples: 201,
        }
    }
}

impl Sampling {
    pub fn grid(&self) -> Vec<f64> {
        let step = (self.z_max - self.z_min) / (self.n_samples - 1) as f64;
        (0..self.n_samples).map(|i| self.z_min + step * i as f64).collect()
    }
}

/// Design vector in `[0, 1]^d`, `d >= 5`. Entries map to passband level,
/// ripple amplitude, low/high null depth, low/high stopband level,
/// transition sharpness and ripple frequency; missing trailing entries
/// default to 0.5.
/// (design entry, dB span) of the band-level entries.
const LEVEL_SPANS_DB: [(usize, f64); 5] = [(0, 3.5), (2, 20.0), (3, 20.0), (4, 12.0), (5, 12.0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignParams(Vec<f64>);

impl DesignParams {
    pub const DEFAULT_DIM: usize = 8;

    pub fn new(values: Vec<f64>) -> Result<Self, SynthError> {
        if values.len() < 5 {
            return Err(SynthError::TooFewParams(values.len()));
        }
        Ok(DesignParams(
            values
                .into_iter()
                .map(|v| if v.is_nan() { 0.5 } else { v.clamp(0.0, 1.0) })
                .collect(),
        ))
    }

    pub fn random(rng: &mut impl Rng, dim: usize) -> Result<Self, SynthError> {
        DesignParams::new((0..dim).map(|_| rng.gen::<f64>()).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// A nearby design: every band level moves uniformly by up to
    /// `level_db` dB and every other entry by up to `other` in unit terms.
    pub fn neighbour(&self, rng: &mut impl Rng, level_db: f64, other: f64) -> Result<Self, SynthError> {
        DesignParams::new(
            self.0
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let half = match LEVEL_SPANS_DB.iter().find(|(k, _)| *k == i) {
                        Some((_, span)) => level_db / span,
                        None => other,
                    };
                    v + rng.gen_range(-half..=half)
                })
                .collect(),
        )
    }

    fn get(&self, i: usize) -> f64 {
        self.0.get(i).copied().unwrap_or(0.5)
    }

    pub fn shape(&self) -> CurveShape {
        CurveShape {
            passband_level: -4.5 + LEVEL_SPANS_DB[0].1 * self.get(0),
            ripple: 0.8 * self.get(1),
            low_null_depth: -30.0 + LEVEL_SPANS_DB[1].1 * self.get(2),
            high_null_depth: -30.0 + LEVEL_SPANS_DB[2].1 * self.get(3),
            low_stop_level: -16.0 + LEVEL_SPANS_DB[3].1 * self.get(4),
            high_stop_level: -16.0 + LEVEL_SPANS_DB[4].1 * self.get(5),
            sharpness: 150.0 + 450.0 * self.get(6),
            ripple_freq: 15.0 + 25.0 * self.get(7),
        }
    }
}

/// Physical curve parameters decoded from a design vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveShape {
    pub passband_level: f64,
    pub ripple: f64,
    pub low_null_depth: f64,
    pub high_null_depth: f64,
    pub low_stop_level: f64,
    pub high_stop_level: f64,
    /// Logistic slope per unit of the evaluation variable.
    pub sharpness: f64,
    /// Ripple cycles per unit of the evaluation variable.
    pub ripple_freq: f64,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn center(b: &Band<f64>) -> f64 {
    0.5 * (b.lo() + b.hi())
}

impl CurveShape {
    fn plateau(&self, z: f64, spec: &BandSpec) -> (f64, f64) {
        let up = logistic(self.sharpness * (z - center(&spec.low_null)));
        let down = logistic(self.sharpness * (z - center(&spec.high_null)));
        let level = self.low_stop_level * (1.0 - up) + self.passband_level * (up - down) + self.high_stop_level * down;
        (level, up - down)
    }

    fn value(&self, z: f64, spec: &BandSpec, phase: f64) -> f64 {
        let (level, pass_weight) = self.plateau(z, spec);
        let ripple = self.ripple * pass_weight * (2.0 * PI * self.ripple_freq * z + phase).sin();
        let mut v = level + ripple;
        for (band, depth) in [
            (&spec.low_null, self.low_null_depth),
            (&spec.high_null, self.high_null_depth),
        ] {
            let c = center(band);
            let width = band.width() / 4.0;
            let (base, _) = self.plateau(c, spec);
            let notch = (depth - base).min(0.0);
            v += notch * (-((z - c) / width).powi(2)).exp();
        }
        v.max(DB_FLOOR + 1e-6)
    }
}

fn phase_for(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.gen::<f64>() * 2.0 * PI
}

/// Renders the curve of design `x`; the seed only fixes the ripple phase.
pub fn render_curve(
    id: impl Into<String>,
    x: &DesignParams,
    spec: &BandSpec,
    sampling: &Sampling,
    seed: u64,
) -> Result<TestInstance<f64>, SynthError> {
    if sampling.n_samples < 50 {
        return Err(SynthError::TooFewSamples(sampling.n_samples));
    }
    spec.validate()?;
    let shape = x.shape();
    let phase = phase_for(seed);
    let samples = sampling
        .grid()
        .into_iter()
        .map(|z| (z, shape.value(z, spec, phase)))
        .collect();
    TestInstance::new(id, x.values().to_vec(), samples).map_err(|e| SynthError::BandSpec(e.to_string()))
}

/// A pool of `count` random designs with ids `inst-00001, ...`.
pub fn generate_instances(
    count: usize,
    dim: usize,
    spec: &BandSpec,
    sampling: &Sampling,
    seed: u64,
) -> Result<Vec<TestInstance<f64>>, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let x = DesignParams::random(&mut rng, dim)?;
            let curve_seed = rng.gen::<u64>();
            render_curve(format!("inst-{:05}", i + 1), &x, spec, sampling, curve_seed)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TemplateIntent {
    Optimize {
        direction: Direction,
        aggregator: Aggregator,
    },
    Threshold {
        comparator: Comparator,
        aggregator: Aggregator,
    },
}

/// Loosening applied to a realized aggregate, drawn uniformly from `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OffsetRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentTemplate {
    pub band: BandName,
    pub intent: TemplateIntent,
    #[serde(default)]
    pub offset: OffsetRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentSpec {
    pub templates: Vec<IntentTemplate>,
    /// Thresholds are placed on a grid of this many decimals, strictly on
    /// the satisfied side of the (offset) realized value.
    #[serde(default = "default_decimals")]
    pub decimals: u32,
}

fn default_decimals() -> u32 {
    2
}

impl Default for IntentSpec {
    /// Passband mean maximized with a passband floor, a low-stopband ceiling
    /// and a high-null depth limit.
    fn default() -> Self {
        use Aggregator::*;
        let t = |band, intent| IntentTemplate {
            band,
            intent,
            offset: OffsetRange::default(),
        };
        IntentSpec {
            templates: vec![
                t(
                    BandName::Passband,
                    TemplateIntent::Optimize {
                        direction: Direction::Maximize,
                        aggregator: Mean,
                    },
                ),
                t(
                    BandName::Passband,
                    TemplateIntent::Threshold {
                        comparator: Comparator::Ge,
                        aggregator: Min,
                    },
                ),
                t(
                    BandName::LowStopband,
                    TemplateIntent::Threshold {
                        comparator: Comparator::Le,
                        aggregator: Max,
                    },
                ),
                t(
                    BandName::HighNull,
                    TemplateIntent::Threshold {
                        comparator: Comparator::Le,
                        aggregator: Min,
                    },
                ),
            ],
            decimals: default_decimals(),
        }
    }
}

impl IntentSpec {
    /// All five bands: passband objective and floor, both null depths and
    /// both stopband ceilings.
    pub fn five_band() -> Self {
        let mut spec = IntentSpec::default();
        spec.templates.insert(
            3,
            IntentTemplate {
                band: BandName::LowNull,
                intent: TemplateIntent::Threshold {
                    comparator: Comparator::Le,
                    aggregator: Aggregator::Min,
                },
                offset: OffsetRange::default(),
            },
        );
        spec.templates.push(IntentTemplate {
            band: BandName::HighStopband,
            intent: TemplateIntent::Threshold {
                comparator: Comparator::Le,
                aggregator: Aggregator::Max,
            },
            offset: OffsetRange::default(),
        });
        spec
    }

    pub fn with_offsets(mut self, offset: OffsetRange) -> Self {
        for t in &mut self.templates {
            if matches!(t.intent, TemplateIntent::Threshold { .. }) {
                t.offset = offset;
            }
        }
        self
    }
}

/// Grid value strictly on the satisfied side of `realized`.
fn strict_grid_threshold(realized: f64, comparator: Comparator, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let snap = |k: f64| -> f64 {
        let s = format_real(k / scale);
        s.parse().expect("formatted real parses")
    };
    match comparator {
        Comparator::Ge => {
            let mut k = (realized * scale).floor();
            while snap(k) >= realized {
                k -= 1.0;
            }
            snap(k)
        }
        Comparator::Le => {
            let mut k = (realized * scale).ceil();
            while snap(k) <= realized {
                k += 1.0;
            }
            snap(k)
        }
    }
}

/// Turns a simulated outcome into a requirement set it satisfies: bands
/// become the regions, realized band aggregates (loosened by the template
/// offsets) become the thresholds.
pub fn extract_requirements(
    set_id: impl Into<String>,
    source: &TestInstance<f64>,
    spec: &BandSpec,
    intent_spec: &IntentSpec,
    seed: u64,
) -> Result<RequirementSet<f64>, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = EvalOptions::default();
    let mut requirements = Vec::with_capacity(intent_spec.templates.len());
    for template in &intent_spec.templates {
        let band = spec.band(template.band);
        let intent = match template.intent {
            TemplateIntent::Optimize { direction, aggregator } => {
                // still require the band to be populated
                realized(source, aggregator, band, spec, template.band, &opts)?;
                DesignIntent::Optimize { direction, aggregator }
            }
            TemplateIntent::Threshold { comparator, aggregator } => {
                let value = realized(source, aggregator, band, spec, template.band, &opts)?;
                let OffsetRange { min, max } = template.offset;
                let offset = if max > min { rng.gen_range(min..=max) } else { min };
                let loosened = match comparator {
                    Comparator::Ge => value - offset,
                    Comparator::Le => value + offset,
                };
                DesignIntent::Threshold {
                    comparator,
                    value: strict_grid_threshold(loosened, comparator, intent_spec.decimals),
                    aggregator,
                }
            }
        };
        requirements.push(Requirement::templated(
            band,
            spec.metric.clone(),
            intent,
            template.band.label(),
            &spec.z_units,
        ));
    }
    Ok(RequirementSet::new(set_id, requirements)?)
}

fn realized(
    source: &TestInstance<f64>,
    aggregator: Aggregator,
    band: Band<f64>,
    spec: &BandSpec,
    name: BandName,
    opts: &EvalOptions,
) -> Result<f64, SynthError> {
    let expr = Expr::agg(aggregator, spec.metric.name.clone(), band);
    evaluate_expr(&expr, source, opts).map_err(|source| SynthError::Eval {
        band: name.label().to_string(),
        source,
    })
}

/// Reference ranking obtained by compiling the requirements directly.
pub fn oracle_ranking(
    reqs: &RequirementSet<f64>,
    insts: &[TestInstance<f64>],
    opts: &EvalOptions,
) -> Result<Ranking, SynthError> {
    let mut ranking = induced_ranking(&reqs.ground_truth(), insts, opts)?;
    ranking.source = format!("oracle:{}", reqs.id);
    Ok(ranking)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorruptionKind {
    /// Turns `>=` into `<=` and vice versa on one constraint.
    FlipComparator,
    /// Moves every band of one item by `widths` band widths, up or down.
    ShiftBand { widths: f64 },
    /// Scales the constants of one constraint by `1 + factor`.
    PerturbThreshold { factor: f64 },
    /// Replaces one aggregator: min -> mean, max -> mean, mean -> min.
    SwapAgg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corruption {
    pub kind: CorruptionKind,
    pub item: String,
    pub detail: String,
}

fn round6(x: f64) -> f64 {
    format_real(x).parse().expect("formatted real parses")
}

/// Mutates exactly one eligible item, chosen by `seed`.
pub fn corrupt_formulation(
    f: &Formulation<f64>,
    kind: CorruptionKind,
    seed: u64,
) -> Result<(Formulation<f64>, Corruption), SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eligible: Vec<usize> = f
        .items()
        .iter()
        .enumerate()
        .filter(|(_, item)| match kind {
            CorruptionKind::FlipComparator => item.is_constraint(),
            CorruptionKind::PerturbThreshold { .. } => item.is_constraint() && has_const(&item.expr),
            CorruptionKind::ShiftBand { .. } | CorruptionKind::SwapAgg => true,
        })
        .map(|(i, _)| i)
        .collect();
    if eligible.is_empty() {
        return Err(SynthError::NoEligibleItem(kind));
    }
    let target = eligible[rng.gen_range(0..eligible.len())];
    let mut items = f.items().to_vec();
    let item = &mut items[target];
    let detail = match kind {
        CorruptionKind::FlipComparator => {
            item.expr = match std::mem::replace(&mut item.expr, Expr::Const(0.0)) {
                Expr::Sub(a, b) => Expr::Sub(b, a),
                Expr::Neg(inner) => *inner,
                other => Expr::neg(other),
            };
            "comparator flipped".to_string()
        }
        CorruptionKind::ShiftBand { widths } => {
            let up = rng.gen_bool(0.5);
            let mut shifted = Vec::new();
            let mut result = Ok(());
            item.expr.for_each_agg_mut(&mut |_, band| {
                let delta = widths * band.width() * if up { 1.0 } else { -1.0 };
                match Band::new(round6(band.lo() + delta), round6(band.hi() + delta)) {
                    Ok(b) => {
                        shifted.push(format!("{band} -> {b}"));
                        *band = b;
                    }
                    Err(e) => result = Err(e),
                }
            });
            result?;
            shifted.join(", ")
        }
        CorruptionKind::PerturbThreshold { factor } => {
            let mut changes = Vec::new();
            item.expr.for_each_const_mut(&mut |c| {
                let new = round6(*c * (1.0 + factor));
                changes.push(format!("{} -> {}", format_real(*c), format_real(new)));
                *c = new;
            });
            changes.join(", ")
        }
        CorruptionKind::SwapAgg => {
            let mut done = None;
            item.expr.for_each_agg_mut(&mut |op, _| {
                if done.is_none() {
                    let new = match op {
                        Aggregator::Min | Aggregator::Max => Aggregator::Mean,
                        Aggregator::Mean => Aggregator::Min,
                    };
                    done = Some(format!("{} -> {}", op.keyword(), new.keyword()));
                    *op = new;
                }
            });
            done.unwrap_or_default()
        }
    };
    let name = item.name.clone();
    let corrupted = Formulation::new(f.id.clone(), items)?;
    Ok((
        corrupted,
        Corruption {
            kind,
            item: name,
            detail,
        },
    ))
}

fn has_const(e: &Expr<f64>) -> bool {
    match e {
        Expr::Const(_) => true,
        Expr::Agg { .. } => false,
        Expr::Neg(inner) => has_const(inner),
        Expr::Sub(a, b) => has_const(a) || has_const(b),
    }
}

/// Convenience for hand-built curves: an item evaluated against a curve
/// defined by points.
pub fn item_on_points(item: &FormulationItem<f64>, points: &[(f64, f64)]) -> Result<f64, SynthError> {
    let inst = TestInstance::new("points", vec![], points.to_vec()).map_err(|e| SynthError::BandSpec(e.to_string()))?;
    crate::formulation::evaluate_item(item, &inst, &EvalOptions::default()).map_err(|source| SynthError::Eval {
        band: item.name.clone(),
        source,
    })
}
