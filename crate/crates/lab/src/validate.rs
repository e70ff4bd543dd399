//! Self-checks of the engine: agreement with the brute-force oracle, metric
//! inequalities and the constant-weight answer. Used by `fpp validate` and by
//! the acceptance tests.

use std::fmt;

use fpp_core::geometry::{end_pairs, natural_cylinder, natural_slab, Cylinder};
use fpp_core::{Distribution, GeodesicEngine, Region, ShapeModel, Site, WeightField, Window};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::oracle;
use crate::weights::WeightSpec;

/// Largest relative difference tolerated between the engine and the oracle.
pub const ORACLE_RTOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {} ({} cases) {}", self.name, self.cases, self.detail)
    }
}

/// Counts cases and keeps the first few failures.
struct Tally {
    name: String,
    cases: usize,
    failures: usize,
    first: Vec<String>,
    worst: Option<f64>,
}

impl Tally {
    fn new(name: &str) -> Self {
        Tally { name: name.into(), cases: 0, failures: 0, first: Vec::new(), worst: None }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first.len() < 3 {
                self.first.push(what());
            }
        }
    }

    fn close(&mut self, got: Option<f64>, want: Option<f64>, what: impl FnOnce() -> String) {
        let ok = match (got, want) {
            (Some(a), Some(b)) => {
                let rel = if a == b { 0.0 } else { (a - b).abs() / b.abs() };
                self.worst = Some(self.worst.map_or(rel, |w| w.max(rel)));
                rel <= ORACLE_RTOL
            }
            (None, None) => true,
            _ => false,
        };
        self.check(ok, || format!("{}: engine {got:?} oracle {want:?}", what()));
    }

    fn finish(self) -> Check {
        let mut detail = self.worst.map(|w| format!("worst relative error {w:.3e}")).unwrap_or_default();
        if self.failures > 0 {
            detail = format!("{} failures; {} {detail}", self.failures, self.first.join("; "));
        }
        Check { name: self.name, passed: self.failures == 0 && self.cases > 0, cases: self.cases, detail }
    }
}

fn oracle_windows() -> Vec<Window> {
    let w = |lo: [i64; 3], hi: [i64; 3], d: usize| Window::new(Site::new(&lo[..d]), Site::new(&hi[..d])).unwrap();
    vec![w([0, 0, 0], [1, 1, 0], 2), w([0, 0, 0], [2, 1, 0], 2), w([0, 0, 0], [2, 2, 0], 2), w([0, 0, 0], [1, 1, 1], 3)]
}

/// Regions used alongside `Region::All`: natural slabs and cylinders between
/// opposite corners and across the middle of the window.
fn oracle_regions(w: &Window) -> Vec<Region> {
    let lo = w.lo().clone();
    let hi = w.hi().clone();
    let mut out = Vec::new();
    let mut across = lo.coords().to_vec();
    across[0] = hi.coords()[0];
    for (a, b) in [(lo.clone(), hi.clone()), (lo.clone(), Site::new(across))] {
        for shape in [ShapeModel::L2, ShapeModel::L1] {
            if let Ok(s) = natural_slab(&a, &b, &shape) {
                out.push(Region::Slab(s));
            }
            if let Ok(c) = natural_cylinder(&a, &b, 1.0, &shape) {
                out.push(Region::Cylinder(c));
            }
        }
    }
    out
}

fn oracle_cylinders(w: &Window) -> Vec<Cylinder> {
    let sites: Vec<Site> = w.sites().collect();
    let mut out = Vec::new();
    for a in &sites {
        for b in &sites {
            if a.coords() < b.coords() {
                for r in [0.5, 1.0, 1.5] {
                    if let Ok(c) = natural_cylinder(a, b, r, &ShapeModel::L2) {
                        out.push(c);
                    }
                }
            }
        }
    }
    out
}

fn oracle_field(i: u64) -> WeightField {
    let dist = match i % 3 {
        0 => Distribution::Exponential { rate: 1.0 },
        1 => Distribution::Uniform { a: 0.5, b: 2.0 },
        _ => Distribution::ShiftedExponential { shift: 0.25, rate: 2.0 },
    };
    WeightField::new(0x0c1e, i, dist).expect("valid distribution")
}

/// Engine passage times, end-pair times and slab differences against
/// exhaustive path enumeration on every small window.
pub fn oracle_equivalence(fields: u64) -> Vec<Check> {
    let mut pt = Tally::new("passage_time matches path enumeration");
    let mut d2d = Tally::new("disc_to_disc matches path enumeration");
    let mut slab = Tally::new("slab_vs_free matches path enumeration");
    for w in oracle_windows() {
        let sites: Vec<Site> = w.sites().collect();
        let mut regions = vec![Region::All];
        regions.extend(oracle_regions(&w));
        let cylinders: Vec<_> = oracle_cylinders(&w).into_iter().filter_map(|c| end_pairs(&c, &w).ok()).filter(|e| !e.is_empty()).collect();
        let mut eng = GeodesicEngine::new(w.clone());
        let o = Site::origin(w.dim());
        for i in 0..fields {
            let f = oracle_field(i);
            for r in &regions {
                for a in &sites {
                    for b in &sites {
                        let got = eng.passage_time(&f, a, b, r).ok().map(|g| g.time);
                        pt.close(got, oracle::passage_time(&f, &w, a, b, r), || format!("field {i} {a:?}->{b:?}"));
                    }
                }
            }
            for ends in &cylinders {
                let got = eng.disc_to_disc(&f, ends, true).ok();
                let want = oracle::end_pair_times(&f, &w, ends);
                d2d.close(got.as_ref().map(|g| g.time), oracle::disc_to_disc(&f, &w, ends), || format!("field {i} d2d"));
                if let (Some(g), Some(want)) = (got, want) {
                    for (((_, t), v), k) in g.pair_times.unwrap_or_default().iter().zip(&want).zip(0..) {
                        d2d.close(Some(*t), Some(*v), || format!("field {i} pair {k}"));
                    }
                }
            }
            for x in sites.iter().filter(|x| **x != o) {
                for shape in [ShapeModel::L2, ShapeModel::L1] {
                    let s = natural_slab(&o, x, &shape).expect("distinct endpoints");
                    let got = fpp_core::diagnostics::slab_vs_free_replica(&mut eng, &f, x, &s).ok().flatten();
                    // the engine reports None only for truncation, which the
                    // oracle has no notion of; compare the raw difference then
                    let got = got.or_else(|| {
                        let free = eng.passage_time(&f, &o, x, &Region::All).ok()?.time;
                        Some(eng.passage_time(&f, &o, x, &Region::Slab(s.clone())).ok()?.time - free)
                    });
                    slab.close(got, oracle::slab_vs_free(&f, &w, x, &s), || format!("field {i} x={x:?}"));
                }
            }
        }
    }
    vec![pt.finish(), d2d.finish(), slab.finish()]
}

fn random_site(rng: &mut ChaCha8Rng, w: &Window) -> Site {
    Site::new(w.lo().coords().iter().zip(w.hi().coords()).map(|(a, b)| rng.gen_range(*a..=*b)).collect::<Vec<_>>())
}

/// `T(a, c) ≤ T(a, b) + T(b, c)` on random triples in a fixed window. The
/// right side is one extra rounding away from a path sum, hence the
/// relative slack.
pub fn subadditivity(triples: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Window::cube(2, -8, 8).unwrap();
    let mut eng = GeodesicEngine::new(w.clone());
    let mut tally = Tally::new("subadditivity on random triples");
    let per_field = 100;
    for k in 0..triples {
        let f = WeightField::new(seed, (k / per_field) as u64, Distribution::Exponential { rate: 1.0 }).unwrap();
        let (a, b, c) = (random_site(&mut rng, &w), random_site(&mut rng, &w), random_site(&mut rng, &w));
        let mut t = |u: &Site, v: &Site| eng.passage_time(&f, u, v, &Region::All).map(|g| g.time).unwrap_or(f64::NAN);
        let (ac, ab, bc) = (t(&a, &c), t(&a, &b), t(&b, &c));
        tally.check(ac <= (ab + bc) * (1.0 + 4.0 * f64::EPSILON), || format!("{a:?} {b:?} {c:?}: {ac} > {ab} + {bc}"));
    }
    tally.finish()
}

/// `T(·|r) ≥ T(·|r')` for nested regions `r ⊆ r'`: cylinder in its slab,
/// narrower in wider cylinder, slab in the whole window.
pub fn region_monotonicity(pairs: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Window::cube(2, -6, 12).unwrap();
    let mut eng = GeodesicEngine::new(w.clone());
    let mut tally = Tally::new("restriction never shortens");
    let o = Site::origin(2);
    let inner = Window::cube(2, 1, 8).unwrap();
    let mut k = 0;
    while k < pairs {
        let x = random_site(&mut rng, &inner);
        let shape = if rng.gen_bool(0.5) { ShapeModel::L2 } else { ShapeModel::L1 };
        let r1: f64 = rng.gen_range(0.5..2.5);
        let r2 = r1 + rng.gen_range(0.5..3.0);
        let slab = natural_slab(&o, &x, &shape).unwrap();
        let narrow = natural_cylinder(&o, &x, r1, &shape).unwrap();
        let wide = natural_cylinder(&o, &x, r2, &shape).unwrap();
        let f = WeightField::new(seed, k as u64, Distribution::Exponential { rate: 1.0 }).unwrap();
        let mut t = |r: Region| eng.passage_time(&f, &o, &x, &r).map(|g| g.time).unwrap_or(f64::INFINITY);
        let chain = [t(Region::Cylinder(narrow)), t(Region::Cylinder(wide)), t(Region::Slab(slab)), t(Region::All)];
        for pair in chain.windows(2) {
            if k < pairs {
                tally.check(pair[0] >= pair[1], || format!("x={x:?}: {} < {}", pair[0], pair[1]));
                k += 1;
            }
        }
    }
    tally.finish()
}

/// `Δ = T(0,x|S) - T(0,x) ≥ 0` with no tolerance, one replica per case.
pub fn slab_difference_nonnegative(replicas: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Window::cube(2, -10, 26).unwrap();
    let mut eng = GeodesicEngine::new(w.clone());
    let inner = Window::cube(2, 1, 16).unwrap();
    let o = Site::origin(2);
    let mut tally = Tally::new("slab difference is nonnegative");
    for k in 0..replicas {
        let x = random_site(&mut rng, &inner);
        let s = natural_slab(&o, &x, &ShapeModel::L2).unwrap();
        let f = WeightField::new(seed, k as u64, Distribution::Exponential { rate: 1.0 }).unwrap();
        let free = eng.passage_time(&f, &o, &x, &Region::All).unwrap().time;
        let inside = eng.passage_time(&f, &o, &x, &Region::Slab(s)).unwrap().time;
        tally.check(inside - free >= 0.0, || format!("x={x:?}: Δ = {}", inside - free));
    }
    tally.finish()
}

/// With every edge weighing `mu`, `T(0,x) = mu·|x|_1` exactly.
pub fn constant_weights(mu: f64) -> Check {
    let spec = WeightSpec::Constant(mu);
    let f = spec.field(0, 0);
    let w = Window::cube(2, -20, 20).unwrap();
    let mut eng = GeodesicEngine::new(w.clone());
    let o = Site::origin(2);
    let mut tally = Tally::new(&format!("constant weight {mu} gives mu·l1"));
    for x in Window::cube(2, -12, 12).unwrap().sites() {
        let t = eng.passage_time(&f, &o, &x, &Region::All).unwrap().time;
        let want = mu * x.l1_norm() as f64;
        tally.check(t == want, || format!("x={x:?}: {t} != {want}"));
    }
    tally.finish()
}

/// Every check, sized for a few seconds of work.
pub fn run_all() -> Vec<Check> {
    let mut out = oracle_equivalence(100);
    out.push(subadditivity(10_000, 11));
    out.push(region_monotonicity(1_000, 12));
    out.push(slab_difference_nonnegative(1_000, 13));
    for mu in [0.75, 1.0, 2.5] {
        out.push(constant_weights(mu));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_oracle_run_passes() {
        for c in oracle_equivalence(3) {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn windows_have_exercised_cylinders() {
        let n: usize = oracle_windows()
            .iter()
            .map(|w| oracle_cylinders(w).into_iter().filter_map(|c| end_pairs(&c, w).ok()).filter(|e| e.len() > 1).count())
            .sum();
        assert!(n > 0);
    }
}
