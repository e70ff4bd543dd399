//! Brute-force reference solver: enumerates every self-avoiding path in a
//! small window. Exponential in the window size, so only usable on a handful
//! of sites, but it shares no code with the Dijkstra engine.

use fpp_core::geometry::{EndPairSet, Slab};
use fpp_core::{EdgeWeights, Region, Site, Window};

struct Search<'a, W: ?Sized> {
    weights: &'a W,
    window: &'a Window,
    region: &'a Region,
    dst: Vec<i64>,
    on_path: Vec<bool>,
    best: f64,
}

impl<W: EdgeWeights + ?Sized> Search<'_, W> {
    fn walk(&mut self, at: &mut Vec<i64>, acc: f64) {
        for k in 0..at.len() {
            for step in [-1i64, 1] {
                at[k] += step;
                if let Some(i) = self.window.index_of(at) {
                    let is_dst = *at == self.dst;
                    if !self.on_path[i] && (is_dst || self.region.contains_site(at)) {
                        let lower = if step > 0 { at[k] - 1 } else { at[k] };
                        let mut low = at.clone();
                        low[k] = lower;
                        let t = acc + self.weights.weight(&low, k);
                        if is_dst {
                            self.best = self.best.min(t);
                        } else {
                            self.on_path[i] = true;
                            self.walk(at, t);
                            self.on_path[i] = false;
                        }
                    }
                }
                at[k] -= step;
            }
        }
    }
}

/// `T(src, dst | region)` over self-avoiding paths inside `window`. Interior
/// vertices must lie in the region; the endpoints are exempt. `None` when no
/// path exists.
pub fn passage_time<W: EdgeWeights + ?Sized>(
    weights: &W,
    window: &Window,
    src: &Site,
    dst: &Site,
    region: &Region,
) -> Option<f64> {
    let s = window.index_of(src.coords())?;
    window.index_of(dst.coords())?;
    if src == dst {
        return Some(0.0);
    }
    let mut search = Search {
        weights,
        window,
        region,
        dst: dst.coords().to_vec(),
        on_path: vec![false; window.volume()],
        best: f64::INFINITY,
    };
    search.on_path[s] = true;
    search.walk(&mut src.coords().to_vec(), 0.0);
    search.best.is_finite().then_some(search.best)
}

/// Slab passage time of every end pair in left-major order.
pub fn end_pair_times<W: EdgeWeights + ?Sized>(weights: &W, window: &Window, ends: &EndPairSet) -> Option<Vec<f64>> {
    let region = Region::Slab(ends.cylinder.slab().clone());
    ends.pairs().map(|(u, v)| passage_time(weights, window, u, v, &region)).collect()
}

/// Disc-to-disc time: the minimum of [`end_pair_times`].
pub fn disc_to_disc<W: EdgeWeights + ?Sized>(weights: &W, window: &Window, ends: &EndPairSet) -> Option<f64> {
    end_pair_times(weights, window, ends)?.into_iter().reduce(f64::min)
}

/// `T(0, x | slab) - T(0, x)`.
pub fn slab_vs_free<W: EdgeWeights + ?Sized>(weights: &W, window: &Window, x: &Site, slab: &Slab) -> Option<f64> {
    let o = Site::origin(x.dim());
    let free = passage_time(weights, window, &o, x, &Region::All)?;
    let inside = passage_time(weights, window, &o, x, &Region::Slab(slab.clone()))?;
    Some(inside - free)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fpp_core::ConstantWeights;

    #[test]
    fn unit_weights_give_l1_distance() {
        let w = Window::cube(2, 0, 2).unwrap();
        let t = passage_time(&ConstantWeights(1.0), &w, &Site::from([0, 0]), &Site::from([2, 1]), &Region::All);
        assert_eq!(t, Some(3.0));
    }

    struct Cheap;

    impl EdgeWeights for Cheap {
        // a detour along the top row is cheaper than the direct edge
        fn weight(&self, lower: &[i64], axis: usize) -> f64 {
            if lower[1] == 1 || axis == 1 {
                0.1
            } else {
                5.0
            }
        }
    }

    #[test]
    fn finds_the_detour() {
        let w = Window::cube(2, 0, 1).unwrap();
        let t = passage_time(&Cheap, &w, &Site::from([0, 0]), &Site::from([1, 0]), &Region::All).unwrap();
        assert!((t - 0.30000000000000004).abs() < 1e-15);
    }
}
