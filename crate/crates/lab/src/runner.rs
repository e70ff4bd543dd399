//! Replicated sampling and the sample → estimate → diagnose pipelines.
//!
//! Work is split into independent `(direction, |x|, replica)` tasks. Every
//! task builds its own weight field from `(seed, replica)` and results are
//! collected in task order, so outputs do not depend on the thread count.

use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use fpp_core::diagnostics::{self, PropertyReport, Thresholds};
use fpp_core::estimators::{
    estimate_moments, g_ref_by_doubling, growth_exponent, magnitude_based_check, regular_growth_check,
    wandering_exponent, ArchiveMeta, GRef, GrowthFit, MagnitudeReport, MomentReport, RegularGrowthReport,
    SampleArchive, SampleKey, SampleRecord, WanderingFit, DEFAULT_BETA_MIN, DEFAULT_MAGNITUDE_CAP,
};
use fpp_core::geodesic::{backtrack_excess, run_with_adaptive_window, transverse_wandering, MarginPolicy};
use fpp_core::geometry::{closest_lattice_point, curvature_report, natural_slab, EmpiricalShape, DEFAULT_QUALITY_THRESHOLD};
use fpp_core::{Frame, GeodesicEngine, Region, ShapeModel, Site, Window};
use rayon::prelude::*;
use serde::Serialize;

use crate::archive::{archive_to_string, fmt_f64};
use crate::config::{ExperimentConfig, Resolved};
use crate::output::OutputDir;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Replica offset of pilot runs, far from any main-run replica id.
pub const PILOT_BASE: u64 = 1 << 40;

/// Tolerance used by the regular-growth check on fitted exponents.
const REGULAR_GROWTH_EPS: f64 = 0.1;

const SHAPE_ANGLES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Sample,
    Shape,
    Exponents,
    Wandering,
    Modgap,
    Downdev,
    D2d,
    Slab,
    /// Every stage except the shape estimate.
    Full,
}

impl Pipeline {
    fn includes(self, other: Pipeline) -> bool {
        self == other || (self == Pipeline::Full && other != Pipeline::Shape && other != Pipeline::Sample)
    }

    fn needs_archive(self) -> bool {
        !matches!(self, Pipeline::Shape | Pipeline::D2d | Pipeline::Slab)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub command: Pipeline,
    /// Configuration echo without thread count and output directory.
    pub config: ExperimentConfig,
    pub checksums: BTreeMap<String, String>,
    pub failed_tasks: Vec<String>,
    pub skipped: Vec<String>,
}

impl RunManifest {
    pub fn ok(&self) -> bool {
        self.failed_tasks.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Telemetry {
    pub threads: usize,
    pub wall_clock_s: f64,
    pub tasks: usize,
    pub window_retries: usize,
}

/// One sampled endpoint.
#[derive(Clone, Debug)]
pub struct Endpoint {
    pub dir: String,
    pub theta: Vec<f64>,
    pub nominal: f64,
    pub x: Site,
}

impl Endpoint {
    pub fn key(&self) -> SampleKey {
        SampleKey::new(self.dir.clone(), self.x.norm())
    }

    fn stem(&self) -> String {
        format!("{}_{}", self.dir.replace(':', "_"), self.nominal)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DirectionExponents {
    pub dir: String,
    pub chi: Option<GrowthFit>,
    pub xi: Option<WanderingFit>,
    pub regular_growth: Option<RegularGrowthReport>,
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentSummary {
    pub directions: Vec<DirectionExponents>,
    pub magnitude: Option<MagnitudeReport>,
}

pub struct SampleOutcome {
    pub archive: SampleArchive,
    pub failed: Vec<String>,
    pub retries: usize,
}

pub struct Runner {
    res: Resolved,
    pool: rayon::ThreadPool,
}

impl Runner {
    pub fn new(res: Resolved) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(res.config.run.threads).build()?;
        Ok(Runner { res, pool })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.res.config
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    fn thresholds(&self) -> Thresholds {
        self.res.config.thresholds()
    }

    pub fn endpoints(&self) -> Result<Vec<Endpoint>> {
        let c = &self.res.config;
        let mut out: Vec<Endpoint> = Vec::new();
        for (label, theta) in c.sample.directions.iter().zip(&self.res.directions) {
            for &n in &c.sample.xnorms {
                let p: Vec<f64> = theta.iter().map(|t| t * n).collect();
                let x = closest_lattice_point(&p);
                if x.l1_norm() == 0 {
                    bail!("length {n} in direction {label} rounds to the origin");
                }
                if let Some(prev) = out.iter().find(|e| &e.dir == label && e.x == x) {
                    bail!("lengths {} and {n} in direction {label} round to the same site", prev.nominal);
                }
                out.push(Endpoint { dir: label.clone(), theta: theta.clone(), nominal: n, x });
            }
        }
        Ok(out)
    }

    /// Margin policy with the transverse guess resolved for `x`.
    fn policy_for(&self, x: &Site) -> MarginPolicy {
        let mut p = self.res.config.margin_policy();
        if p.delta_guess == 0.0 {
            p.delta_guess = x.norm().powf(2.0 / 3.0);
        }
        p
    }

    /// Fixed window around the segment `0 → x` grown by the policy margins.
    fn window_for(&self, x: &Site) -> Result<Window> {
        let o = Site::origin(x.dim());
        let base = Window::bounding(&o, x)?;
        let m: Vec<i64> = self.policy_for(x).margins(&o, x).into_iter().map(|v| v.max(1)).collect();
        Ok(base.expanded(&m))
    }

    fn sample_task(&self, engine: &mut GeodesicEngine, ep: &Endpoint, replica: u64) -> Result<(SampleRecord, usize)> {
        let w = self.res.dist.field(self.res.config.sample.seed, replica);
        let o = Site::origin(ep.x.dim());
        let run = run_with_adaptive_window(&w, &o, &ep.x, &Region::All, &self.policy_for(&ep.x), Some(engine))?;
        let g = &run.result;
        let xdir: Vec<f64> = ep.x.to_point().iter().map(|c| c / ep.x.norm()).collect();
        let frame = Frame::new(&self.res.shape, &xdir)?;
        let rec = SampleRecord {
            key: ep.key(),
            replica,
            time: g.time,
            wandering: transverse_wandering(&g.path, &ep.x)?,
            backtrack: backtrack_excess(&g.path, &frame, &ep.x),
            truncated: g.truncated,
        };
        Ok((rec, run.attempts() - 1))
    }

    /// Samples replicas `offset..offset+count` at every endpoint.
    pub fn sample(&self, endpoints: &[Endpoint], offset: u64, count: u64) -> SampleOutcome {
        let tasks: Vec<(usize, u64)> =
            (0..endpoints.len()).flat_map(|i| (offset..offset + count).map(move |r| (i, r))).collect();
        let dim = self.res.config.lattice.dim;
        let results: Vec<Result<(SampleRecord, usize)>> = self.pool.install(|| {
            tasks
                .par_iter()
                .map_init(
                    || GeodesicEngine::new(Window::cube(dim, 0, 1).expect("unit window")),
                    |eng, &(i, r)| self.sample_task(eng, &endpoints[i], r),
                )
                .collect()
        });
        let meta = ArchiveMeta {
            dim,
            dist: self.res.config.lattice.dist.clone(),
            shape: self.res.config.lattice.shape.clone(),
            seed: self.res.config.sample.seed,
        };
        let mut archive = SampleArchive::new(meta);
        let mut failed = Vec::new();
        let mut retries = 0;
        for ((i, r), res) in tasks.iter().zip(results) {
            match res.and_then(|(rec, k)| {
                retries += k;
                archive.push(rec).map_err(Into::into)
            }) {
                Ok(()) => {}
                Err(e) => failed.push(format!("sample {} |x|={} replica {r}: {e}", endpoints[*i].dir, endpoints[*i].nominal)),
            }
        }
        SampleOutcome { archive, failed, retries }
    }

    fn g_ref(&self, a: &SampleArchive, ep: &Endpoint) -> GRef {
        let c = &self.res.config.probes;
        if c.gref == "shape" {
            return GRef::injected(self.res.shape.eval(&ep.x.to_point()), format!("shape {}", self.res.config.lattice.shape));
        }
        match g_ref_by_doubling(a, &ep.key(), c.gref_band) {
            Ok(g) => g,
            Err(e) => GRef { value: f64::NAN, band: 0.0, provenance: format!("unavailable: {e}") },
        }
    }

    pub fn moments(&self, a: &SampleArchive, endpoints: &[Endpoint], skipped: &mut Vec<String>) -> Vec<MomentReport> {
        let mut out = Vec::new();
        for ep in endpoints {
            match estimate_moments(a, &ep.key(), self.g_ref(a, ep)) {
                Ok(m) => out.push(m),
                Err(e) => skipped.push(format!("moments {} |x|={}: {e}", ep.dir, ep.nominal)),
            }
        }
        out
    }

    pub fn exponents(&self, a: &SampleArchive, moments: &[MomentReport]) -> ExponentSummary {
        let mut dirs = Vec::new();
        for label in &self.res.config.sample.directions {
            let mut errors = Vec::new();
            let ms: Vec<&MomentReport> = moments.iter().filter(|m| &m.key.dir == label && m.sigma_hat > 0.0).collect();
            let pts: Vec<(f64, f64)> = ms.iter().map(|m| (m.key.xnorm, m.sigma_hat)).collect();
            let vars: Vec<f64> = ms.iter().map(|m| m.sigma_se * m.sigma_se).collect();
            let chi = growth_exponent(&pts, Some(&vars)).map_err(|e| errors.push(format!("chi: {e}"))).ok();
            let xi = wandering_exponent(a, label).map_err(|e| errors.push(format!("xi: {e}"))).ok();
            let regular_growth =
                chi.as_ref().map(|c| regular_growth_check(&pts, c.chi_hat, REGULAR_GROWTH_EPS, DEFAULT_BETA_MIN));
            dirs.push(DirectionExponents { dir: label.clone(), chi, xi, regular_growth, errors });
        }
        let values: Vec<(Site, f64)> = moments
            .iter()
            .filter(|m| m.sigma_hat > 0.0)
            .filter_map(|m| self.endpoint_of(&m.key).map(|x| (x, m.sigma_hat)))
            .collect();
        ExponentSummary { directions: dirs, magnitude: magnitude_based_check(&values, DEFAULT_MAGNITUDE_CAP).ok() }
    }

    fn endpoint_of(&self, key: &SampleKey) -> Option<Site> {
        self.endpoints().ok()?.into_iter().find(|e| e.key() == *key).map(|e| e.x)
    }

    /// Pilot estimate of `Δ̂(x) = (|x|·σ̂)^{1/2}` from replicas above
    /// [`PILOT_BASE`].
    pub fn pilot_delta(&self, ep: &Endpoint) -> Result<f64> {
        let out = self.sample(std::slice::from_ref(ep), PILOT_BASE, self.res.config.probes.pilot_replicas);
        if let Some(f) = out.failed.first() {
            bail!("pilot: {f}");
        }
        let m = estimate_moments(&out.archive, &ep.key(), GRef::injected(0.0, "pilot"))?;
        Ok(m.delta_hat)
    }

    pub fn d2d(&self, ep: &Endpoint) -> Result<PropertyReport> {
        let delta = self.pilot_delta(ep)?;
        // the radius keeps the axis end vertices even when the pilot spread vanishes
        let radius_scale = delta.max(0.5 / self.res.config.probes.eps);
        let w = self.window_for(&ep.x)?;
        let ends = diagnostics::local_fluctuation_cylinder(&ep.x, self.res.config.probes.eps, radius_scale, &self.res.shape, &w)?;
        let reps = self.res.config.sample.replicas;
        let seed = self.res.config.sample.seed;
        let rows: Vec<Result<Option<Vec<f64>>>> = self.pool.install(|| {
            (0..reps)
                .into_par_iter()
                .map_init(
                    || GeodesicEngine::new(w.clone()),
                    |eng, r| Ok(diagnostics::local_fluctuation_replica(eng, &self.res.dist.field(seed, r), &ends)?),
                )
                .collect()
        });
        let mut kept = Vec::new();
        let mut dropped = 0;
        for r in rows {
            match r? {
                Some(v) => kept.push(v),
                None => dropped += 1,
            }
        }
        let mut rep = diagnostics::local_fluctuation_from_samples(&kept, dropped, self.thresholds())?;
        rep.summary.insert(0, ("xnorm".into(), ep.x.norm()));
        rep.summary.push(("delta_hat".into(), delta));
        rep.summary.push(("radius".into(), self.res.config.probes.eps * radius_scale));
        rep.summary.push(("end_pairs".into(), ends.len() as f64));
        Ok(rep)
    }

    pub fn slab(&self, ep: &Endpoint) -> Result<PropertyReport> {
        let o = Site::origin(ep.x.dim());
        let slab = natural_slab(&o, &ep.x, &self.res.shape)?;
        let w = self.window_for(&ep.x)?;
        let reps = self.res.config.sample.replicas;
        let seed = self.res.config.sample.seed;
        let rows: Vec<Result<Option<f64>>> = self.pool.install(|| {
            (0..reps)
                .into_par_iter()
                .map_init(
                    || GeodesicEngine::new(w.clone()),
                    |eng, r| Ok(diagnostics::slab_vs_free_replica(eng, &self.res.dist.field(seed, r), &ep.x, &slab)?),
                )
                .collect()
        });
        let mut deltas = Vec::new();
        let mut dropped = 0;
        for r in rows {
            match r? {
                Some(d) => deltas.push(d),
                None => dropped += 1,
            }
        }
        let mut rep = diagnostics::slab_vs_free_of(&deltas, ep.x.norm(), &self.res.config.grids.slab, self.thresholds())?;
        rep.truncated_excluded = dropped;
        Ok(rep)
    }

    /// Planar shape estimate `angle ↦ |x|/h(x)` at the largest length.
    pub fn shape_estimate(&self) -> Result<(String, serde_json::Value)> {
        if self.res.config.lattice.dim != 2 {
            bail!("shape estimation is planar only");
        }
        let n = *self.res.config.sample.xnorms.last().context("no lengths configured")?;
        let mut eps = Vec::new();
        for k in 0..SHAPE_ANGLES {
            let a = std::f64::consts::TAU * k as f64 / SHAPE_ANGLES as f64;
            let theta = vec![a.cos(), a.sin()];
            let x = closest_lattice_point(&[n * theta[0], n * theta[1]]);
            eps.push(Endpoint { dir: format!("angle{k}"), theta, nominal: n, x });
        }
        let out = self.sample(&eps, 0, self.res.config.sample.replicas);
        if let Some(f) = out.failed.first() {
            bail!("{f}");
        }
        let band = ((n.ln()) / n).sqrt();
        let mut csv = String::from("angle,radius\n");
        let mut angles = Vec::new();
        let mut radii = Vec::new();
        let mut rows = Vec::new();
        for ep in &eps {
            let m = estimate_moments(&out.archive, &ep.key(), GRef::injected(0.0, "unused"))?;
            let p = ep.x.to_point();
            let angle = p[1].atan2(p[0]).rem_euclid(std::f64::consts::TAU);
            let radius = ep.x.norm() / m.h_hat;
            csv.push_str(&format!("{},{}\n", fmt_f64(angle), fmt_f64(radius)));
            angles.push(angle);
            radii.push(radius);
            rows.push(serde_json::json!({
                "angle": angle, "x": ep.x.coords(), "h_hat": m.h_hat, "sigma_hat": m.sigma_hat,
                "radius": radius, "band": radius * band,
            }));
        }
        let shape = ShapeModel::Empirical(EmpiricalShape::new(&angles, &radii)?);
        let mut curvature = Vec::new();
        for a in &angles {
            let th = [a.cos(), a.sin()];
            let rep = Frame::new(&shape, &th)
                .and_then(|f| curvature_report(&shape, &f, &[0.05, 0.1, 0.2], DEFAULT_QUALITY_THRESHOLD));
            curvature.push(match rep {
                Ok(r) => serde_json::to_value(r)?,
                Err(e) => serde_json::json!({ "theta": th, "error": e.to_string() }),
            });
        }
        let json = serde_json::json!({ "length": n, "band_coefficient": 1.0, "directions": rows, "curvature": curvature });
        Ok((csv, json))
    }
}

fn push_report(out: &mut OutputDir, failed: &mut Vec<String>, stem: &str, rep: Result<PropertyReport>) -> Result<Option<PropertyReport>> {
    match rep {
        Ok(r) => {
            out.write_report(stem, &r)?;
            Ok(Some(r))
        }
        Err(e) => {
            failed.push(format!("{stem}: {e}"));
            Ok(None)
        }
    }
}

/// Runs `pipeline` and writes its outputs, `manifest.json` and
/// `telemetry.json` under the configured output directory.
pub fn run(res: Resolved, pipeline: Pipeline) -> Result<RunManifest> {
    let start = Instant::now();
    let runner = Runner::new(res)?;
    let cfg = runner.config().clone();
    let mut out = OutputDir::create(&cfg.run.out)?;
    let th = runner.thresholds();
    let mut failed = Vec::new();
    let mut skipped = Vec::new();
    let mut tasks = 0;
    let mut retries = 0;
    let endpoints = runner.endpoints()?;

    if pipeline == Pipeline::Shape {
        let (csv, json) = runner.shape_estimate()?;
        out.write("shape.csv", csv.as_bytes())?;
        out.write_json("shape.json", &json)?;
        tasks += SHAPE_ANGLES * cfg.sample.replicas as usize;
    }

    let mut archive = None;
    if pipeline.needs_archive() {
        let s = runner.sample(&endpoints, 0, cfg.sample.replicas);
        tasks += endpoints.len() * cfg.sample.replicas as usize;
        retries += s.retries;
        failed.extend(s.failed);
        out.write("archive.csv", archive_to_string(&s.archive)?.as_bytes())?;
        archive = Some(s.archive);
    }

    if let Some(a) = &archive {
        if pipeline != Pipeline::Sample {
            let moments = runner.moments(a, &endpoints, &mut skipped);
            out.write_json("moments.json", &moments)?;
            if pipeline.includes(Pipeline::Exponents) || pipeline.includes(Pipeline::Wandering) {
                out.write_json("exponents.json", &runner.exponents(a, &moments))?;
            }
            for ep in &endpoints {
                let key = ep.key();
                let stem = ep.stem();
                if pipeline.includes(Pipeline::Wandering) {
                    push_report(&mut out, &mut skipped, &format!("reports/wandering_{stem}"), diagnostics::wandering_tail(a, &key, &cfg.grids.k, th).map_err(Into::into))?;
                    let r_grid: Vec<f64> = cfg.grids.r.iter().map(|r| r * key.xnorm.sqrt()).collect();
                    push_report(&mut out, &mut skipped, &format!("reports/backtrack_{stem}"), diagnostics::backtrack_tail(a, &key, &r_grid, th).map_err(Into::into))?;
                }
                if pipeline.includes(Pipeline::Modgap) {
                    push_report(&mut out, &mut skipped, &format!("reports/expbound_{stem}"), diagnostics::exp_bound_tail(a, &key, &cfg.grids.t, th).map_err(Into::into))?;
                    push_report(&mut out, &mut skipped, &format!("reports/concentration_{stem}"), diagnostics::concentration_lower_tail(a, &key, &cfg.grids.t, th).map_err(Into::into))?;
                }
                if pipeline.includes(Pipeline::Downdev) {
                    let g = runner.g_ref(a, ep);
                    let rep = if g.value.is_finite() {
                        diagnostics::downward_deviation(a, &key, &cfg.grids.eps3, &g, th).map_err(Into::into)
                    } else {
                        Err(anyhow::anyhow!("no reference value ({})", g.provenance))
                    };
                    push_report(&mut out, &mut skipped, &format!("reports/downdev_{stem}"), rep)?;
                }
            }
            if pipeline.includes(Pipeline::Modgap) {
                for label in &cfg.sample.directions {
                    let ms: Vec<MomentReport> =
                        moments.iter().filter(|m| &m.key.dir == label && m.g_ref.value.is_finite()).cloned().collect();
                    let stem = format!("reports/modgap_{}", label.replace(':', "_"));
                    push_report(&mut out, &mut skipped, &stem, diagnostics::moderate_gap_curve(&ms, th).map_err(Into::into))?;
                }
            }
        }
    }

    if pipeline.includes(Pipeline::D2d) {
        let mut by_dir: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for ep in &endpoints {
            tasks += (cfg.sample.replicas + cfg.probes.pilot_replicas) as usize;
            if let Some(r) = push_report(&mut out, &mut failed, &format!("reports/d2d_{}", ep.stem()), runner.d2d(ep))? {
                if let Some(g) = r.get("gap") {
                    by_dir.entry(ep.dir.clone()).or_default().push((ep.x.norm(), g));
                }
            }
        }
        for (dir, gaps) in by_dir {
            let stem = format!("reports/d2d_trend_{}", dir.replace(':', "_"));
            push_report(&mut out, &mut skipped, &stem, diagnostics::local_fluctuation_trend(&gaps, th).map_err(Into::into))?;
        }
    }

    if pipeline.includes(Pipeline::Slab) {
        let mut by_dir: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for ep in &endpoints {
            tasks += cfg.sample.replicas as usize;
            if let Some(r) = push_report(&mut out, &mut failed, &format!("reports/slab_{}", ep.stem()), runner.slab(ep))? {
                if let Some(m) = r.get("mean_sq") {
                    by_dir.entry(ep.dir.clone()).or_default().push((ep.x.norm(), m));
                }
            }
        }
        for (dir, pts) in by_dir {
            let stem = format!("reports/slab_trend_{}", dir.replace(':', "_"));
            push_report(&mut out, &mut skipped, &stem, diagnostics::slab_variance_trend(&pts, th).map_err(Into::into))?;
        }
    }

    let mut echo = cfg.clone();
    echo.run = Default::default();
    let manifest = RunManifest {
        version: ARTIFACT_VERSION.into(),
        command: pipeline,
        config: echo,
        checksums: out.checksums().clone(),
        failed_tasks: failed,
        skipped,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    out.write_untracked("manifest.json", text.as_bytes())?;
    let tele = Telemetry {
        threads: runner.threads(),
        wall_clock_s: start.elapsed().as_secs_f64(),
        tasks,
        window_retries: retries,
    };
    out.write_untracked("telemetry.json", serde_json::to_string_pretty(&tele)?.as_bytes())?;
    Ok(manifest)
}
