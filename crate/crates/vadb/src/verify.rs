//! Convergence experiments over a metric family: per-member hypothesis
//! checks, sampled distance-distortion statistics, selection of a certified
//! good region, and the closed-form distance bound assembled from those
//! measurements.
//!
//! Everything here is measurement, not proof. Distance statistics come from
//! sampled vertex pairs on a mesh, so a verdict of "certified" means the
//! sampled evidence stayed inside the requested tolerance in and out of
//! sample, nothing stronger.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::families::FamilySpec;
use crate::measure::{band_volume, boundary_area, volume};
use crate::mesh::{build_mesh_with, DistanceField, MeshGraph};
use crate::metric::{comparison_check, Anchor, ConformalMetric};
use crate::{Error, Result};

/// Landmarks used for every diameter sweep.
const DIAMETER_LANDMARKS: usize = 12;
/// Uniform sources added next to the deep shared ones per candidate.
const UNIFORM_SOURCES: usize = 4;
/// Deep sources shared by every candidate region.
const DEEP_SOURCES: usize = 4;
/// Cap on vertices the greedy fallback may remove.
const GREEDY_CAP: usize = 200;
/// Fewest vertices a region may keep before it counts as collapsed.
const MIN_REGION: usize = 16;

/// Tolerances a single family member is checked against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisConfig {
    /// Upper bound the measured diameter must stay under.
    pub diam_cap: f64,
    /// Upper bound the measured boundary area must stay under.
    pub area_cap: f64,
    /// Relative tolerance for volume against the base volume.
    pub vol_tol: f64,
    /// Largest acceptable lower-bound slack `1 - min(g_j / g_0)`.
    pub c_tol: f64,
    /// Quadrature level for volume and area.
    pub level: u32,
}

/// Outcome of the four per-member hypothesis checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisVerdict {
    /// Largest mesh distance seen from any landmark (a lower estimate).
    pub diam_measured: f64,
    pub diam_cap: f64,
    pub diam_ok: bool,
    pub vol: f64,
    pub vol_target: f64,
    /// Signed gap `vol - vol_target`.
    pub vol_gap: f64,
    pub vol_ok: bool,
    pub area: f64,
    pub area_cap: f64,
    pub area_ok: bool,
    /// Slack in the lower metric comparison: `max(0, 1 - min ratio)`.
    pub c_j: f64,
    pub c_tol: f64,
    pub below_ok: bool,
}

impl HypothesisVerdict {
    /// True when every individual check passed.
    pub fn ok(&self) -> bool {
        self.diam_ok && self.vol_ok && self.area_ok && self.below_ok
    }
}

/// Checks one family member against the hypothesis tolerances, measuring
/// diameter on the mesh and volume, area, and the lower comparison by
/// quadrature and factor sampling.
pub fn hypothesis_report(
    mesh: &MeshGraph,
    base: &ConformalMetric,
    member: &ConformalMetric,
    cfg: &HypothesisConfig,
) -> Result<HypothesisVerdict> {
    let diam = mesh.diameter_estimate(member, DIAMETER_LANDMARKS)?;
    let vol_target = volume(base, cfg.level)?.value;
    let vol = volume(member, cfg.level)?.value;
    let area = if member.manifold().has_boundary() {
        boundary_area(member, cfg.level)?.value
    } else {
        0.0
    };
    let report = comparison_check(
        member,
        base,
        1.0 - cfg.c_tol,
        &comparison_samples(mesh, member),
    )?;
    let c_j = (1.0 - report.min_ratio).max(0.0);
    Ok(HypothesisVerdict {
        diam_measured: diam.lower,
        diam_cap: cfg.diam_cap,
        diam_ok: diam.lower <= cfg.diam_cap,
        vol,
        vol_target,
        vol_gap: vol - vol_target,
        vol_ok: (vol - vol_target).abs() <= cfg.vol_tol * vol_target.abs(),
        area,
        area_cap: cfg.area_cap,
        area_ok: area <= cfg.area_cap,
        c_j,
        c_tol: cfg.c_tol,
        below_ok: report.holds,
    })
}

/// Factor extremes plus a spread of mesh vertices, so piecewise minima and
/// generic points both enter the comparison sweep.
fn comparison_samples(mesh: &MeshGraph, member: &ConformalMetric) -> Vec<Vec<f64>> {
    let mut samples = member.anchor_witness_points();
    let n = mesh.vertex_count();
    let stride = (n / 8).max(1);
    for v in mesh.vertices().iter().step_by(stride) {
        samples.push(v.clone());
    }
    samples
}

/// How many vertex pairs to sample and with which generator seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplePlan {
    pub pairs: usize,
    pub seed: u64,
}

impl SamplePlan {
    fn validate(&self) -> Result<()> {
        if self.pairs < 100 {
            return Err(Error::param("pairs", "sampling needs at least 100 pairs"));
        }
        Ok(())
    }
}

/// Distortion of one depth slice: pairs whose endpoints both sit at least
/// `depth` away from the anchor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DepthStat {
    pub depth: f64,
    pub pairs: usize,
    pub sup_excess: f64,
    pub mean_excess: f64,
    pub frac_above: f64,
}

/// Sampled one-sided distance distortion `scale * d_member - d_base`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistortionStats {
    pub pairs: usize,
    pub sup_excess: f64,
    pub mean_excess: f64,
    /// Fraction of pairs whose excess exceeded `epsilon`.
    pub frac_above: f64,
    pub epsilon: f64,
    pub per_depth: Vec<DepthStat>,
}

/// Caches Dijkstra fields per source so ladder candidates can share them.
struct FieldCache<'a> {
    mesh: &'a MeshGraph,
    base: &'a ConformalMetric,
    member: &'a ConformalMetric,
    fields: HashMap<u32, (DistanceField, DistanceField)>,
}

impl<'a> FieldCache<'a> {
    fn new(mesh: &'a MeshGraph, base: &'a ConformalMetric, member: &'a ConformalMetric) -> Self {
        FieldCache {
            mesh,
            base,
            member,
            fields: HashMap::new(),
        }
    }

    fn fetch(&mut self, source: u32) -> Result<&(DistanceField, DistanceField)> {
        if !self.fields.contains_key(&source) {
            let f0 = self.mesh.distance_field(self.base, source)?;
            let fj = self.mesh.distance_field(self.member, source)?;
            self.fields.insert(source, (f0, fj));
        }
        Ok(&self.fields[&source])
    }
}

/// Samples excesses between sources and targets drawn from `ids`, returning
/// `(sup excess, mean excess, count above epsilon, pairs used)`.
fn sample_excess(
    cache: &mut FieldCache,
    sources: &[u32],
    ids: &[u32],
    scale: f64,
    pairs: usize,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
    mut record: Option<&mut Vec<(u32, u32, f64)>>,
) -> Result<(f64, f64, usize, usize)> {
    if sources.is_empty() || ids.len() < 2 {
        return Err(Error::Input("excess sampling needs a populated region".into()));
    }
    let per_source = pairs.div_ceil(sources.len());
    let mut sup = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut above = 0usize;
    let mut used = 0usize;
    for &s in sources {
        let (f0, fj) = {
            let pair = cache.fetch(s)?;
            (&pair.0, &pair.1)
        };
        let mut drawn = 0usize;
        let mut attempts = 0usize;
        while drawn < per_source && attempts < per_source * 8 {
            attempts += 1;
            let t = ids[rng.gen_range(0..ids.len())];
            if t == s {
                continue;
            }
            let d0 = f0.distance_to(t);
            let dj = fj.distance_to(t);
            if !(d0.is_finite() && dj.is_finite()) {
                continue;
            }
            let excess = scale * dj - d0;
            sup = sup.max(excess);
            sum += excess;
            if excess > epsilon {
                above += 1;
            }
            if let Some(rec) = record.as_deref_mut() {
                rec.push((s, t, excess));
            }
            drawn += 1;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::Construction(
            "every sampled pair was disconnected".into(),
        ));
    }
    Ok((sup, sum / used as f64, above, used))
}

/// Samples vertex pairs and reports the one-sided excess of member distances
/// (times `member_scale`) over base distances, overall and per depth slice.
pub fn distance_distortion_stats(
    mesh: &MeshGraph,
    base: &ConformalMetric,
    member: &ConformalMetric,
    member_scale: f64,
    anchor: &Anchor,
    plan: &SamplePlan,
    epsilon: f64,
    depths: &[f64],
) -> Result<DistortionStats> {
    plan.validate()?;
    if !(member_scale.is_finite() && member_scale > 0.0) {
        return Err(Error::param("member_scale", "must be positive and finite"));
    }
    let n = mesh.vertex_count();
    if n < 2 {
        return Err(Error::Input("mesh has too few vertices to sample".into()));
    }
    let depth_of: Vec<f64> = mesh
        .vertices()
        .iter()
        .map(|p| base.anchor_scalar(anchor, p))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let sources: Vec<u32> = (0..plan.pairs.div_ceil(16).min(n))
        .map(|_| rng.gen_range(0..n as u32))
        .collect();
    let ids: Vec<u32> = (0..n as u32).collect();
    let mut cache = FieldCache::new(mesh, base, member);
    let mut samples = Vec::with_capacity(plan.pairs);
    let (sup, mean, above, used) = sample_excess(
        &mut cache,
        &sources,
        &ids,
        member_scale,
        plan.pairs,
        epsilon,
        &mut rng,
        Some(&mut samples),
    )?;
    let mut per_depth = Vec::with_capacity(depths.len());
    for &depth in depths {
        let mut sup_d = f64::NEG_INFINITY;
        let mut sum_d = 0.0;
        let mut above_d = 0usize;
        let mut count = 0usize;
        for &(s, t, excess) in &samples {
            if depth_of[s as usize] >= depth && depth_of[t as usize] >= depth {
                sup_d = sup_d.max(excess);
                sum_d += excess;
                if excess > epsilon {
                    above_d += 1;
                }
                count += 1;
            }
        }
        per_depth.push(DepthStat {
            depth,
            pairs: count,
            sup_excess: if count > 0 { sup_d } else { 0.0 },
            mean_excess: if count > 0 { sum_d / count as f64 } else { 0.0 },
            frac_above: if count > 0 {
                above_d as f64 / count as f64
            } else {
                0.0
            },
        });
    }
    Ok(DistortionStats {
        pairs: used,
        sup_excess: sup,
        mean_excess: mean,
        frac_above: above as f64 / used as f64,
        epsilon,
        per_depth,
    })
}

/// A band around the anchor whose complement is the candidate good region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRegion {
    pub anchor: Anchor,
    pub width: f64,
}

/// Global quantities the distance bound needs alongside the per-region ones.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundGlobals {
    pub diam: f64,
    pub vol: f64,
    pub area: f64,
}

/// The selected good region with its certificate numbers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoodSetChoice {
    /// The winning band, or None when the greedy fallback built the set.
    pub region: Option<CandidateRegion>,
    /// Vertices kept in the good set.
    #[serde(skip)]
    pub vertices: Vec<u32>,
    pub vertex_count: usize,
    /// Half the worst sampled excess over the kept set, floored at zero.
    pub delta_hat: f64,
    /// Volume of the discarded band under the (rescaled) member metric.
    pub excluded_volume: f64,
    /// Pairs inspected across selection and recheck.
    pub pairs: usize,
    /// Worst excess in the out-of-sample recheck.
    pub fresh_sup: f64,
    /// Whether the recheck stayed within the tolerance.
    pub fresh_ok: bool,
    pub greedy: bool,
    /// Set when selection collapsed or exhausted its evidence; the numbers
    /// are still reported but should not be trusted as a certificate.
    pub degenerate: bool,
}

fn derived_rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn deep_sources(order: &[u32], depth_of: &[f64], min_depth: f64) -> Vec<u32> {
    order
        .iter()
        .copied()
        .filter(|&v| depth_of[v as usize] >= min_depth)
        .take(DEEP_SOURCES)
        .collect()
}

fn uniform_sources(ids: &[u32], rng: &mut ChaCha8Rng, into: &mut Vec<u32>) {
    let mut attempts = 0;
    while into.len() < DEEP_SOURCES + UNIFORM_SOURCES && attempts < 64 {
        attempts += 1;
        let v = ids[rng.gen_range(0..ids.len())];
        if !into.contains(&v) {
            into.push(v);
        }
    }
}

/// The two shallowest vertices of a region. Excess concentrates where the
/// region grazes the discarded band, so these make the sampling look there
/// instead of relying on uniform draws to land on the rim.
fn rim_sources(ids: &[u32], depth_of: &[f64], into: &mut Vec<u32>) {
    let mut rim: Vec<u32> = ids.to_vec();
    rim.sort_by(|&a, &b| {
        depth_of[a as usize]
            .total_cmp(&depth_of[b as usize])
            .then(a.cmp(&b))
    });
    for &v in rim.iter().take(2) {
        if !into.contains(&v) {
            into.push(v);
        }
    }
}

/// Picks the good region: tries each candidate band width, certifies the
/// ones whose sampled excess stays under `epsilon` in and out of sample,
/// and keeps the certified one with the smallest distance bound. When no
/// band certifies, falls back to greedily removing the worst offenders.
#[allow(clippy::too_many_arguments)]
pub fn select_good_set(
    mesh: &MeshGraph,
    base: &ConformalMetric,
    member: &ConformalMetric,
    member_scale: f64,
    anchor: &Anchor,
    widths: &[f64],
    plan: &SamplePlan,
    epsilon: f64,
    level: u32,
    globals: &BoundGlobals,
) -> Result<GoodSetChoice> {
    plan.validate()?;
    if widths.is_empty() {
        return Err(Error::Input("candidate ladder is empty".into()));
    }
    let n = mesh.vertex_count();
    let depth_of: Vec<f64> = mesh
        .vertices()
        .iter()
        .map(|p| base.anchor_scalar(anchor, p))
        .collect();
    let mut by_depth: Vec<u32> = (0..n as u32).collect();
    by_depth.sort_by(|&a, &b| {
        depth_of[b as usize]
            .total_cmp(&depth_of[a as usize])
            .then(a.cmp(&b))
    });
    let max_width = widths.iter().cloned().fold(0.0f64, f64::max);
    let deep = deep_sources(&by_depth, &depth_of, max_width);
    let dim = member.manifold().dim() as i32;
    let mut cache = FieldCache::new(mesh, base, member);

    struct Eval {
        width: f64,
        ids: Vec<u32>,
        sup: f64,
        pairs: usize,
        vhat: f64,
        bound: f64,
    }
    let mut evals: Vec<Eval> = Vec::new();
    for (idx, &width) in widths.iter().enumerate() {
        let ids: Vec<u32> = (0..n as u32)
            .filter(|&v| depth_of[v as usize] >= width)
            .collect();
        if ids.len() < MIN_REGION {
            continue;
        }
        let mut rng = derived_rng(plan.seed, 0x51 + idx as u64);
        let mut sources = deep.clone();
        sources.retain(|&v| depth_of[v as usize] >= width);
        rim_sources(&ids, &depth_of, &mut sources);
        uniform_sources(&ids, &mut rng, &mut sources);
        let (sup, _, _, used) = sample_excess(
            &mut cache,
            &sources,
            &ids,
            member_scale,
            plan.pairs,
            epsilon,
            &mut rng,
            None,
        )?;
        let vhat = member_scale.powi(dim)
            * band_volume(member, anchor, width, level)?.value;
        let delta = sup.max(0.0) / 2.0;
        let bound = flat_bound(&FlatBoundInputs {
            excluded_volume: vhat,
            delta,
            diam: globals.diam,
            vol: globals.vol,
            area: globals.area,
        })?
        .bound;
        evals.push(Eval {
            width,
            ids,
            sup,
            pairs: used,
            vhat,
            bound,
        });
    }

    let mut certified: Vec<&Eval> = evals.iter().filter(|e| e.sup <= epsilon).collect();
    certified.sort_by(|a, b| a.bound.total_cmp(&b.bound).then(a.width.total_cmp(&b.width)));
    for (rank, e) in certified.iter().enumerate() {
        let mut rng = derived_rng(plan.seed, 0xfe5 + rank as u64);
        let mut sources = deep.clone();
        sources.retain(|&v| depth_of[v as usize] >= e.width);
        rim_sources(&e.ids, &depth_of, &mut sources);
        uniform_sources(&e.ids, &mut rng, &mut sources);
        let (fresh_sup, _, _, fresh_used) = sample_excess(
            &mut cache,
            &sources,
            &e.ids,
            member_scale,
            plan.pairs,
            epsilon,
            &mut rng,
            None,
        )?;
        if fresh_sup <= epsilon {
            let worst = e.sup.max(fresh_sup).max(0.0);
            return Ok(GoodSetChoice {
                region: Some(CandidateRegion {
                    anchor: anchor.clone(),
                    width: e.width,
                }),
                vertex_count: e.ids.len(),
                vertices: e.ids.clone(),
                delta_hat: worst / 2.0,
                excluded_volume: e.vhat,
                pairs: e.pairs + fresh_used,
                fresh_sup,
                fresh_ok: true,
                greedy: false,
                degenerate: false,
            });
        }
    }

    greedy_good_set(
        mesh,
        member,
        member_scale,
        anchor,
        &depth_of,
        &mut cache,
        plan,
        epsilon,
        level,
        dim,
    )
}

/// Removes sampled worst offenders one endpoint at a time until the
/// remaining pairs sit under the tolerance or the removal cap trips.
#[allow(clippy::too_many_arguments)]
fn greedy_good_set(
    mesh: &MeshGraph,
    member: &ConformalMetric,
    member_scale: f64,
    anchor: &Anchor,
    depth_of: &[f64],
    cache: &mut FieldCache,
    plan: &SamplePlan,
    epsilon: f64,
    level: u32,
    dim: i32,
) -> Result<GoodSetChoice> {
    let n = mesh.vertex_count();
    let ids: Vec<u32> = (0..n as u32).collect();
    let mut rng = derived_rng(plan.seed, 0x6eed);
    let sources: Vec<u32> = (0..DEEP_SOURCES + UNIFORM_SOURCES)
        .map(|_| rng.gen_range(0..n as u32))
        .collect();
    let mut samples = Vec::with_capacity(plan.pairs);
    let (initial_sup, _, _, used) = sample_excess(
        cache,
        &sources,
        &ids,
        member_scale,
        plan.pairs,
        epsilon,
        &mut rng,
        Some(&mut samples),
    )?;

    let mut alive = vec![true; n];
    let mut removed: Vec<u32> = Vec::new();
    let mut exhausted = false;
    let mut last_sup = initial_sup;
    for _ in 0..GREEDY_CAP {
        let mut worst: Option<(u32, u32, f64)> = None;
        let mut sup = f64::NEG_INFINITY;
        let mut any = false;
        for &(s, t, excess) in &samples {
            if alive[s as usize] && alive[t as usize] {
                any = true;
                sup = sup.max(excess);
                let better = match worst {
                    None => true,
                    Some((ws, wt, we)) => {
                        excess > we || (excess == we && (s, t) < (ws, wt))
                    }
                };
                if better {
                    worst = Some((s, t, excess));
                }
            }
        }
        if !any {
            exhausted = true;
            break;
        }
        last_sup = sup;
        if sup <= epsilon {
            break;
        }
        let (s, t, _) = worst.expect("a live pair exists");
        let victim = if depth_of[s as usize] < depth_of[t as usize]
            || (depth_of[s as usize] == depth_of[t as usize] && s < t)
        {
            s
        } else {
            t
        };
        alive[victim as usize] = false;
        removed.push(victim);
    }

    let kept: Vec<u32> = (0..n as u32).filter(|&v| alive[v as usize]).collect();
    // With the sampled evidence gone there is nothing left to certify, so
    // fall back to the worst excess seen before removals started.
    let certified_sup = if exhausted { initial_sup } else { last_sup };
    let enclosing = removed
        .iter()
        .map(|&v| depth_of[v as usize])
        .fold(0.0f64, f64::max)
        + if removed.is_empty() { 0.0 } else { mesh.h() };
    let vhat = if enclosing > 0.0 {
        member_scale.powi(dim) * band_volume(member, anchor, enclosing, level)?.value
    } else {
        0.0
    };

    let mut fresh_rng = derived_rng(plan.seed, 0xf7e58);
    let mut fresh_sources: Vec<u32> = Vec::new();
    uniform_sources(&kept, &mut fresh_rng, &mut fresh_sources);
    let (fresh_sup, _, _, fresh_used) = sample_excess(
        cache,
        &fresh_sources,
        &kept,
        member_scale,
        plan.pairs,
        epsilon,
        &mut fresh_rng,
        None,
    )?;
    let fresh_ok = fresh_sup <= epsilon;
    let degenerate = exhausted
        || certified_sup > epsilon
        || kept.len() < MIN_REGION
        || removed.len() > n / 2
        || !fresh_ok;
    Ok(GoodSetChoice {
        region: None,
        vertex_count: kept.len(),
        vertices: kept,
        delta_hat: certified_sup.max(fresh_sup).max(0.0) / 2.0,
        excluded_volume: vhat,
        pairs: used + fresh_used,
        fresh_sup,
        fresh_ok,
        greedy: true,
        degenerate,
    })
}

/// Inputs to the closed-form distance bound.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FlatBoundInputs {
    /// Volume of the removed region under the larger metric.
    pub excluded_volume: f64,
    /// Distance defect certified on the kept region.
    pub delta: f64,
    /// Diameter bound covering both spaces.
    pub diam: f64,
    /// Volume bound covering both spaces.
    pub vol: f64,
    /// Boundary area bound covering both spaces.
    pub area: f64,
}

/// The assembled bound and its addends.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FlatDistanceBound {
    /// Gluing height `sqrt(2 * delta * diam + delta^2)`.
    pub h: f64,
    /// `2 * excluded_volume`.
    pub excluded_term: f64,
    /// `h * vol`.
    pub volume_term: f64,
    /// `h * area`.
    pub area_term: f64,
    pub bound: f64,
}

/// Evaluates the closed-form bound; exact arithmetic on the given inputs,
/// no estimation involved.
pub fn flat_bound(inputs: &FlatBoundInputs) -> Result<FlatDistanceBound> {
    let fields = [
        ("excluded_volume", inputs.excluded_volume),
        ("delta", inputs.delta),
        ("diam", inputs.diam),
        ("vol", inputs.vol),
        ("area", inputs.area),
    ];
    for (name, value) in fields {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::Input(format!(
                "{name} must be finite and nonnegative, got {value}"
            )));
        }
    }
    let h = (2.0 * inputs.delta * inputs.diam + inputs.delta * inputs.delta).sqrt();
    let excluded_term = 2.0 * inputs.excluded_volume;
    let volume_term = h * inputs.vol;
    let area_term = h * inputs.area;
    Ok(FlatDistanceBound {
        h,
        excluded_term,
        volume_term,
        area_term,
        bound: excluded_term + volume_term + area_term,
    })
}

/// Resolved settings for one full experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentInputs {
    pub family: FamilySpec,
    pub js: Vec<u32>,
    pub h: f64,
    pub kappa: f64,
    pub level: u32,
    /// Distortion tolerance for certification and the excess fraction.
    pub epsilon: f64,
    /// Depth slices for the per-depth distortion table.
    pub depths: Vec<f64>,
    /// Diameter cap; measured base diameter times 1.2 when absent.
    pub diam_cap: Option<f64>,
    /// Area cap; measured base area times 2 when absent.
    pub area_cap: Option<f64>,
    pub vol_tol: f64,
    pub c_tol: f64,
    pub pairs: usize,
    pub seed: u64,
}

impl ExperimentInputs {
    pub fn new(family: FamilySpec) -> Self {
        ExperimentInputs {
            family,
            js: vec![4, 16, 64, 256],
            h: 0.05,
            kappa: 3.0,
            level: 6,
            epsilon: 0.05,
            depths: vec![0.05, 0.1, 0.2],
            diam_cap: None,
            area_cap: None,
            vol_tol: 0.05,
            c_tol: 0.1,
            pairs: 200,
            seed: 7,
        }
    }
}

/// Everything measured for one family member.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RowMetrics {
    pub vol: f64,
    pub vol_err: f64,
    pub area: f64,
    pub diam_lo: f64,
    pub diam_hi: f64,
    pub c_j: f64,
    pub sup_excess: f64,
    pub frac_excess: f64,
    pub delta_hat: f64,
    pub v_j_hat: f64,
    pub h_j: f64,
    pub flat_bound: f64,
}

/// One member's results; `metrics` is None when a stage failed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub j: u32,
    pub metrics: Option<RowMetrics>,
    pub verdict: Option<HypothesisVerdict>,
    pub stats: Option<DistortionStats>,
    pub good: Option<GoodSetChoice>,
    /// True when the member was rescaled before distortion sampling because
    /// its lower-bound slack exceeded the tolerance.
    pub rescaled: bool,
    /// Plus-joined flags, or "ok".
    pub status: String,
    pub error: Option<String>,
}

/// Full run over a family: per-member rows plus trend summaries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub inputs: ExperimentInputs,
    pub rows: Vec<ExperimentRow>,
    /// Whether the reported bounds strictly decrease along `js`; None with
    /// fewer than two successful rows.
    pub bound_trend_decreasing: Option<bool>,
    pub notes: Vec<String>,
}

impl ConvergenceReport {
    /// True when any row failed outright (as opposed to diagnosing a
    /// hypothesis failure, which is a valid result).
    pub fn has_errors(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }
}

/// Runs the full pipeline for every requested member: mesh, hypothesis
/// checks, optional rescaling, distortion sampling, good-set selection, and
/// the distance bound. Stage failures land in the row instead of aborting
/// the run.
pub fn run_experiment(inputs: &ExperimentInputs) -> Result<ConvergenceReport> {
    inputs.family.validate()?;
    if inputs.js.is_empty() {
        return Err(Error::param("js", "needs at least one member index"));
    }
    if !(inputs.epsilon.is_finite() && inputs.epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be positive and finite"));
    }
    SamplePlan {
        pairs: inputs.pairs,
        seed: inputs.seed,
    }
    .validate()?;
    let base = inputs.family.base_metric()?;
    let manifold = base.manifold().clone();
    let anchor = inputs.family.anchor();
    let vol0 = volume(&base, inputs.level)?.value;
    let area0 = if manifold.has_boundary() {
        boundary_area(&base, inputs.level)?.value
    } else {
        0.0
    };

    let mut rows = Vec::with_capacity(inputs.js.len());
    let mut notes = vec![
        "distortion numbers are sampled evidence over mesh vertex pairs, not a proof over all \
         points"
            .to_string(),
    ];
    for &j in &inputs.js {
        let row = match build_row(inputs, &base, &manifold, &anchor, vol0, area0, j) {
            Ok(row) => row,
            Err(e) => ExperimentRow {
                j,
                metrics: None,
                verdict: None,
                stats: None,
                good: None,
                rescaled: false,
                status: "error".to_string(),
                error: Some(e.to_string()),
            },
        };
        if let Some(good) = &row.good {
            if good.degenerate {
                notes.push(format!(
                    "j={}: good-set selection degenerated; its numbers are not a certificate",
                    row.j
                ));
            }
        }
        rows.push(row);
    }

    if let Some(last) = rows.iter().rev().find_map(|r| r.verdict.as_ref()) {
        if !last.below_ok {
            notes.push(format!(
                "lower-bound slack is not shrinking: c_j = {} at the largest member",
                last.c_j
            ));
        }
    }

    let bounds: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.metrics.as_ref().map(|m| m.flat_bound))
        .collect();
    let bound_trend_decreasing = if bounds.len() >= 2 {
        Some(bounds.windows(2).all(|w| w[1] < w[0]))
    } else {
        None
    };

    Ok(ConvergenceReport {
        inputs: inputs.clone(),
        rows,
        bound_trend_decreasing,
        notes,
    })
}

/// Hypothesis verdicts for every member, without distortion sampling or
/// good-set selection. Caps default the same way the full runner defaults
/// them: 1.2 times the measured base diameter and twice the base area.
pub fn hypothesis_sweep(inputs: &ExperimentInputs) -> Result<Vec<(u32, HypothesisVerdict)>> {
    inputs.family.validate()?;
    let base = inputs.family.base_metric()?;
    let manifold = base.manifold().clone();
    let area0 = if manifold.has_boundary() {
        boundary_area(&base, inputs.level)?.value
    } else {
        0.0
    };
    let mut out = Vec::with_capacity(inputs.js.len());
    for &j in &inputs.js {
        let member = inputs.family.metric(j)?;
        let mesh = build_mesh_with(
            manifold.clone(),
            inputs.h,
            inputs.kappa,
            &inputs.family.mesh_features(j),
            inputs.seed,
        )?;
        let base_diam = mesh.diameter_estimate(&base, DIAMETER_LANDMARKS)?;
        let cfg = HypothesisConfig {
            diam_cap: inputs.diam_cap.unwrap_or(1.2 * base_diam.lower),
            area_cap: inputs.area_cap.unwrap_or(2.0 * area0),
            vol_tol: inputs.vol_tol,
            c_tol: inputs.c_tol,
            level: inputs.level,
        };
        out.push((j, hypothesis_report(&mesh, &base, &member, &cfg)?));
    }
    Ok(out)
}

fn build_row(
    inputs: &ExperimentInputs,
    base: &ConformalMetric,
    manifold: &crate::manifold::ModelManifold,
    anchor: &Anchor,
    vol0: f64,
    area0: f64,
    j: u32,
) -> Result<ExperimentRow> {
    let member = inputs.family.metric(j)?;
    let features = inputs.family.mesh_features(j);
    let mesh = build_mesh_with(
        manifold.clone(),
        inputs.h,
        inputs.kappa,
        &features,
        inputs.seed,
    )?;

    let base_diam = mesh.diameter_estimate(base, DIAMETER_LANDMARKS)?;
    let cfg = HypothesisConfig {
        diam_cap: inputs.diam_cap.unwrap_or(1.2 * base_diam.lower),
        area_cap: inputs.area_cap.unwrap_or(2.0 * area0),
        vol_tol: inputs.vol_tol,
        c_tol: inputs.c_tol,
        level: inputs.level,
    };
    let verdict = hypothesis_report(&mesh, base, &member, &cfg)?;

    let scale = if verdict.c_j > 1e-12 {
        (1.0 / (1.0 - verdict.c_j)).sqrt()
    } else {
        1.0
    };
    let rescaled = verdict.c_j > inputs.c_tol;

    let member_diam = mesh.diameter_estimate(&member, DIAMETER_LANDMARKS)?;
    let n = manifold.dim() as i32;
    let globals = BoundGlobals {
        diam: base_diam.upper.max(scale * member_diam.upper),
        vol: vol0.max(scale.powi(n) * verdict.vol),
        area: area0.max(scale.powi(n - 1) * verdict.area),
    };

    let plan = SamplePlan {
        pairs: inputs.pairs,
        seed: inputs.seed,
    };
    let stats = distance_distortion_stats(
        &mesh,
        base,
        &member,
        scale,
        anchor,
        &plan,
        inputs.epsilon,
        &inputs.depths,
    )?;
    let good = select_good_set(
        &mesh,
        base,
        &member,
        scale,
        anchor,
        &inputs.family.candidate_widths(j),
        &plan,
        inputs.epsilon,
        inputs.level,
        &globals,
    )?;
    let fb = flat_bound(&FlatBoundInputs {
        excluded_volume: good.excluded_volume,
        delta: good.delta_hat,
        diam: globals.diam,
        vol: globals.vol,
        area: globals.area,
    })?;

    let mut flags: Vec<&str> = Vec::new();
    if !verdict.vol_ok {
        flags.push("volume_fail");
    }
    if !verdict.diam_ok {
        flags.push("diam_fail");
    }
    if !verdict.area_ok {
        flags.push("area_fail");
    }
    if !verdict.below_ok {
        flags.push("below_fail");
    }
    if rescaled {
        flags.push("rescaled");
    }
    if good.greedy {
        flags.push("greedy_selection");
    }
    if !good.fresh_ok {
        flags.push("recheck_fail");
    }
    if good.degenerate {
        flags.push("degenerate");
    }
    let status = if flags.is_empty() {
        "ok".to_string()
    } else {
        flags.join("+")
    };

    let vol_q = volume(&member, inputs.level)?;
    Ok(ExperimentRow {
        j,
        metrics: Some(RowMetrics {
            vol: vol_q.value,
            vol_err: vol_q.error,
            area: verdict.area,
            diam_lo: member_diam.lower,
            diam_hi: member_diam.upper,
            c_j: verdict.c_j,
            sup_excess: stats.sup_excess,
            frac_excess: stats.frac_above,
            delta_hat: good.delta_hat,
            v_j_hat: good.excluded_volume,
            h_j: fb.h,
            flat_bound: fb.bound,
        }),
        verdict: Some(verdict),
        stats: Some(stats),
        good: Some(good),
        rescaled,
        status,
        error: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::FamilyKind;
    use crate::mesh::build_mesh;
    use proptest::prelude::*;

    #[test]
    fn flat_bound_matches_hand_arithmetic() {
        let out = flat_bound(&FlatBoundInputs {
            excluded_volume: 0.01,
            delta: 0.005,
            diam: 2.0,
            vol: std::f64::consts::PI,
            area: 2.0 * std::f64::consts::PI,
        })
        .unwrap();
        let h = (2.0f64 * 0.005 * 2.0 + 0.005 * 0.005).sqrt();
        assert!((out.h - h).abs() < 1e-15);
        assert!((out.h - 0.020025f64.sqrt()).abs() < 1e-15);
        let expected = 0.02 + h * 3.0 * std::f64::consts::PI;
        assert!((out.bound - expected).abs() < 1e-12);
        assert!((out.bound - 1.3537).abs() < 1e-3);
        assert!((out.excluded_term - 0.02).abs() < 1e-15);
        assert!((out.volume_term + out.area_term - h * 3.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn flat_bound_is_zero_on_zero_inputs() {
        let out = flat_bound(&FlatBoundInputs {
            excluded_volume: 0.0,
            delta: 0.0,
            diam: 5.0,
            vol: 10.0,
            area: 3.0,
        })
        .unwrap();
        assert_eq!(out.h, 0.0);
        assert_eq!(out.bound, 0.0);
    }

    #[test]
    fn flat_bound_rejects_bad_inputs() {
        for bad in [f64::NAN, f64::INFINITY, -0.1] {
            let r = flat_bound(&FlatBoundInputs {
                excluded_volume: bad,
                delta: 0.0,
                diam: 1.0,
                vol: 1.0,
                area: 1.0,
            });
            assert!(r.is_err());
        }
    }

    proptest! {
        #[test]
        fn flat_bound_is_monotone_and_homogeneous(
            vhat in 0.0..2.0f64,
            delta in 0.0..0.5f64,
            diam in 0.1..5.0f64,
            vol in 0.0..20.0f64,
            area in 0.0..20.0f64,
            bump in 1e-6..0.5f64,
            scale in 0.1..4.0f64,
        ) {
            let base = FlatBoundInputs { excluded_volume: vhat, delta, diam, vol, area };
            let b0 = flat_bound(&base).unwrap().bound;
            for grow in 0..5usize {
                let mut up = base;
                match grow {
                    0 => up.excluded_volume += bump,
                    1 => up.delta += bump,
                    2 => up.diam += bump,
                    3 => up.vol += bump,
                    _ => up.area += bump,
                }
                let b1 = flat_bound(&up).unwrap().bound;
                prop_assert!(b1 >= b0 - 1e-12);
            }
            let scaled = FlatBoundInputs {
                excluded_volume: scale * vhat,
                delta,
                diam,
                vol: scale * vol,
                area: scale * area,
            };
            let bs = flat_bound(&scaled).unwrap().bound;
            prop_assert!((bs - scale * b0).abs() <= 1e-9 * (1.0 + bs.abs()));
        }
    }

    #[test]
    fn sampling_plan_rejects_tiny_pair_counts() {
        let spec = FamilySpec::new(FamilyKind::Identity, 2);
        let base = spec.base_metric().unwrap();
        let mesh = build_mesh(base.manifold().clone(), 0.3, 2.5).unwrap();
        let plan = SamplePlan { pairs: 10, seed: 1 };
        let r = distance_distortion_stats(
            &mesh,
            &base,
            &base,
            1.0,
            &Anchor::Boundary,
            &plan,
            0.05,
            &[0.1],
        );
        assert!(r.is_err());
    }

    #[test]
    fn identity_member_has_zero_distortion() {
        let spec = FamilySpec::new(FamilyKind::Identity, 2);
        let base = spec.base_metric().unwrap();
        let mesh = build_mesh(base.manifold().clone(), 0.2, 2.5).unwrap();
        let plan = SamplePlan {
            pairs: 120,
            seed: 11,
        };
        let stats = distance_distortion_stats(
            &mesh,
            &base,
            &base,
            1.0,
            &Anchor::Boundary,
            &plan,
            0.05,
            &[0.1, 0.3],
        )
        .unwrap();
        assert_eq!(stats.sup_excess, 0.0);
        assert_eq!(stats.mean_excess, 0.0);
        assert_eq!(stats.frac_above, 0.0);
        assert!(stats.pairs >= 100);
        for d in &stats.per_depth {
            assert_eq!(d.sup_excess, 0.0);
        }
    }

    #[test]
    fn cinched_member_reports_its_lower_bound_slack() {
        let spec = FamilySpec {
            family: FamilyKind::CinchedSphere,
            dim: 2,
            alpha: None,
            h0: Some(0.5),
        };
        let base = spec.base_metric().unwrap();
        let member = spec.metric(8).unwrap();
        let mesh = build_mesh(base.manifold().clone(), 0.25, 2.5).unwrap();
        let cfg = HypothesisConfig {
            diam_cap: 4.0,
            area_cap: 1.0,
            vol_tol: 0.05,
            c_tol: 0.1,
            level: 3,
        };
        let verdict = hypothesis_report(&mesh, &base, &member, &cfg).unwrap();
        // The witness sweep hits the equator exactly, where the factor
        // bottoms out at h0^2.
        assert!((verdict.c_j - 0.75).abs() < 1e-12);
        assert!(!verdict.below_ok);
        assert!(verdict.area_ok);
        assert_eq!(verdict.area, 0.0);
    }

    #[test]
    fn blowup_selection_carves_out_the_rim_band() {
        let spec = FamilySpec {
            family: FamilyKind::DiskBlowup,
            dim: 2,
            alpha: Some(0.25),
            h0: None,
        };
        let j = 8;
        let base = spec.base_metric().unwrap();
        let member = spec.metric(j).unwrap();
        let mesh = build_mesh_with(
            base.manifold().clone(),
            0.1,
            3.0,
            &spec.mesh_features(j),
            7,
        )
        .unwrap();
        let plan = SamplePlan {
            pairs: 150,
            seed: 7,
        };
        let globals = BoundGlobals {
            diam: 2.4,
            vol: 3.6,
            area: 2.0 * std::f64::consts::PI * (8f64).powf(0.25),
        };
        let good = select_good_set(
            &mesh,
            &base,
            &member,
            1.0,
            &Anchor::Boundary,
            &spec.candidate_widths(j),
            &plan,
            0.05,
            4,
            &globals,
        )
        .unwrap();
        let region = good.region.expect("a band should certify");
        // The pure-blowup band never certifies at this tolerance, so the
        // winner must discard at least the blend midpoint.
        assert!(region.width >= 1.5 / j as f64 - 1e-12);
        assert!(good.delta_hat <= 0.03);
        assert!(good.fresh_ok);
        assert!(!good.greedy);
        assert!(!good.degenerate);
        assert!(good.excluded_volume > 0.0);
        for &v in &good.vertices {
            let p = &mesh.vertices()[v as usize];
            assert!(base.anchor_scalar(&Anchor::Boundary, p) >= region.width - 1e-12);
        }
    }

    #[test]
    fn identity_experiment_runs_clean() {
        let mut inputs = ExperimentInputs::new(FamilySpec::new(FamilyKind::Identity, 2));
        inputs.js = vec![3, 4];
        inputs.h = 0.2;
        inputs.kappa = 2.5;
        inputs.level = 3;
        inputs.pairs = 120;
        let report = run_experiment(&inputs).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(!report.has_errors());
        for row in &report.rows {
            assert_eq!(row.status, "ok");
            let m = row.metrics.as_ref().unwrap();
            assert_eq!(m.c_j, 0.0);
            assert_eq!(m.sup_excess, 0.0);
            assert_eq!(m.delta_hat, 0.0);
            assert_eq!(m.v_j_hat, 0.0);
            assert_eq!(m.h_j, 0.0);
            assert_eq!(m.flat_bound, 0.0);
            assert!(row.verdict.as_ref().unwrap().ok());
        }
        // Two zero bounds are not strictly decreasing.
        assert_eq!(report.bound_trend_decreasing, Some(false));
    }

    #[test]
    fn experiment_rejects_empty_member_list() {
        let mut inputs = ExperimentInputs::new(FamilySpec::new(FamilyKind::Identity, 2));
        inputs.js.clear();
        assert!(run_experiment(&inputs).is_err());
    }
}
