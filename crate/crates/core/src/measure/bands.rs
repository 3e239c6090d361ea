//! Fixed partition of `(0, t_G)` into geometrically shrinking bands.
//!
//! Finite endpoint: band `j` is `(t_G(1-2^-j), t_G(1-2^-(j+1))]`, until the
//! boundaries collide with `t_G` in double precision. Infinite endpoint:
//! band 0 is `(0, 1]` and band `j` is `(2^(j-1), 2^j]`. Band ends are exactly
//! the truncation points of the improper-integral schedule.

#[derive(Debug, Clone)]
pub(crate) enum Bands {
    Finite { edges: Vec<f64> },
    Infinite,
}

const INFINITE_BANDS: usize = 1024;

impl Bands {
    pub(crate) fn new(right_endpoint: f64) -> Bands {
        if right_endpoint.is_infinite() {
            return Bands::Infinite;
        }
        let tg = right_endpoint;
        let mut edges = vec![0.0];
        let mut j = 1;
        loop {
            let next = tg - tg * 0.5f64.powi(j);
            let last = *edges.last().unwrap();
            if next >= tg || j > 1074 {
                edges.push(tg);
                break;
            }
            if next > last {
                edges.push(next);
            }
            j += 1;
        }
        Bands::Finite { edges }
    }

    pub(crate) fn count(&self) -> usize {
        match self {
            Bands::Finite { edges } => edges.len() - 1,
            Bands::Infinite => INFINITE_BANDS,
        }
    }

    pub(crate) fn bounds(&self, j: usize) -> (f64, f64) {
        match self {
            Bands::Finite { edges } => (edges[j], edges[j + 1]),
            Bands::Infinite => {
                let hi = 2f64.powi(j as i32);
                let lo = if j == 0 { 0.0 } else { 2f64.powi(j as i32 - 1) };
                (lo, hi)
            }
        }
    }

    /// Band containing `t` under the `(lo, hi]` convention; `t` must be in `(0, end]`.
    pub(crate) fn locate(&self, t: f64) -> usize {
        match self {
            Bands::Finite { edges } => {
                let n = edges.len() - 1;
                // first edge index i >= 1 with edges[i] >= t
                let i = edges[1..].partition_point(|&e| e < t);
                i.min(n - 1)
            }
            Bands::Infinite => {
                if t <= 1.0 {
                    0
                } else {
                    let mut j = (t.log2().ceil() as usize).min(INFINITE_BANDS - 1);
                    while j > 0 && self.bounds(j).0 >= t {
                        j -= 1;
                    }
                    while j + 1 < INFINITE_BANDS && self.bounds(j).1 < t {
                        j += 1;
                    }
                    j
                }
            }
        }
    }

    /// End of band `k`, the k-th truncation point.
    pub(crate) fn truncation(&self, k: usize) -> f64 {
        self.bounds(k).1
    }

    /// Number of truncation points strictly below the right endpoint.
    pub(crate) fn interior_truncations(&self) -> usize {
        match self {
            Bands::Finite { edges } => edges.len() - 2,
            Bands::Infinite => INFINITE_BANDS,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_bands_reach_endpoint() {
        let b = Bands::new(1.0);
        assert_eq!(b.bounds(0), (0.0, 0.5));
        assert_eq!(b.bounds(1), (0.5, 0.75));
        let n = b.count();
        assert_eq!(b.bounds(n - 1).1, 1.0);
        assert_eq!(b.truncation(47), 1.0 - 2f64.powi(-48));
        for j in 0..n {
            let (lo, hi) = b.bounds(j);
            assert!(lo < hi);
            assert_eq!(b.locate(hi), j);
            let mid = 0.5 * (lo + hi);
            if mid > lo && mid < hi {
                assert_eq!(b.locate(mid), j);
            }
        }
        let b3 = Bands::new(3.0);
        for j in 0..b3.count() {
            let (lo, hi) = b3.bounds(j);
            assert!(lo < hi);
        }
    }

    #[test]
    fn infinite_bands_double() {
        let b = Bands::Infinite;
        assert_eq!(b.bounds(0), (0.0, 1.0));
        assert_eq!(b.bounds(3), (4.0, 8.0));
        assert_eq!(b.locate(1.0), 0);
        assert_eq!(b.locate(1.5), 1);
        assert_eq!(b.locate(8.0), 3);
        assert_eq!(b.locate(8.000001), 4);
        assert_eq!(b.locate(1e-9), 0);
    }
}
