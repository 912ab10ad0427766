use num_complex::Complex64;

use super::{Codebook, PathSkeleton};
use crate::channel::{ChannelMatrix, PathCluster};
use crate::error::{Error, Result};

/// Selected precoder/combiner pair and its beamforming gain `|wᴴHf|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamChoice {
    pub f_index: usize,
    pub w_index: usize,
    pub gain: f64,
}

#[derive(Debug, Clone, Copy)]
pub enum Scope<'a> {
    /// Every codeword pair.
    All,
    /// Only the pairs steered at the skeleton's paths.
    Skeleton(&'a PathSkeleton),
}

fn check_books(h: &ChannelMatrix, f_book: &Codebook, w_book: &Codebook) -> Result<()> {
    if f_book.is_empty() || w_book.is_empty() {
        return Err(Error::Shape("empty codebook".into()));
    }
    if f_book.dimension() != h.n_bs || w_book.dimension() != h.n_ue {
        return Err(Error::Shape(format!(
            "codebooks of dimension {}/{} do not fit a {}x{} channel",
            w_book.dimension(),
            f_book.dimension(),
            h.n_ue,
            h.n_bs
        )));
    }
    Ok(())
}

/// Solve `max |wᴴ H f|²` over the codebooks.
///
/// With [`Scope::All`] this forms `G = Wᴴ H F` and scans every entry. With a
/// skeleton it tries one pair per path: the codewords nearest the path's AoD
/// and AoA. Ties go to the first pair in scan order.
pub fn beam_search(h: &ChannelMatrix, f_book: &Codebook, w_book: &Codebook, scope: Scope<'_>) -> Result<BeamChoice> {
    check_books(h, f_book, w_book)?;
    match scope {
        Scope::All => {
            let f_words: Vec<Vec<Complex64>> = (0..f_book.len()).map(|i| f_book.codeword(i)).collect();
            // HF, N_UE × |F|
            let mut hf = vec![Complex64::new(0.0, 0.0); h.n_ue * f_words.len()];
            for u in 0..h.n_ue {
                let row = &h.entries[u * h.n_bs..(u + 1) * h.n_bs];
                for (b, f) in f_words.iter().enumerate() {
                    hf[u * f_words.len() + b] = row.iter().zip(f).map(|(x, y)| x * y).sum();
                }
            }
            let mut best = BeamChoice { f_index: 0, w_index: 0, gain: f64::NEG_INFINITY };
            for a in 0..w_book.len() {
                let w = w_book.codeword(a);
                for b in 0..f_words.len() {
                    let g: Complex64 = w.iter().enumerate().map(|(u, wu)| wu.conj() * hf[u * f_words.len() + b]).sum();
                    let gain = g.norm_sqr();
                    if gain > best.gain {
                        best = BeamChoice { f_index: b, w_index: a, gain };
                    }
                }
            }
            Ok(best)
        }
        Scope::Skeleton(ps) => {
            if ps.is_empty() {
                return Err(Error::Blocked);
            }
            let mut best = BeamChoice { f_index: 0, w_index: 0, gain: f64::NEG_INFINITY };
            for path in &ps.paths {
                let fi = f_book.nearest(&path.aod);
                let wi = w_book.nearest(&path.aoa);
                let gain = h.bilinear(&f_book.codeword(fi), &w_book.codeword(wi))?.norm_sqr();
                if gain > best.gain {
                    best = BeamChoice { f_index: fi, w_index: wi, gain };
                }
            }
            Ok(best)
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Term {
    gain: Complex64,
    bs: (f64, f64),
    ue: (f64, f64),
}

/// A channel kept as its list of rank-one subpath terms.
///
/// `wᴴHf` for steering codewords then costs O(terms · array side) instead of
/// a dense matrix product.
#[derive(Debug, Clone, Default)]
pub struct SparseChannel {
    terms: Vec<Term>,
}

impl SparseChannel {
    pub fn from_clusters(clusters: &[PathCluster]) -> Self {
        let terms = clusters
            .iter()
            .flat_map(|c| {
                let scale = 1.0 / (c.subpaths.len().max(1) as f64).sqrt();
                c.subpaths.iter().map(move |s| Term {
                    gain: s.gain * scale,
                    bs: s.aod.spatial_frequency(),
                    ue: s.aoa.spatial_frequency(),
                })
            })
            .collect();
        SparseChannel { terms }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `wᴴ H f` for codeword `f_index` of `f_book` and `w_index` of `w_book`.
    pub fn response(&self, f_book: &Codebook, f_index: usize, w_book: &Codebook, w_index: usize) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.gain * w_book.inner(w_index, t.ue) * f_book.inner(f_index, t.bs).conj())
            .sum()
    }

    pub fn pair_gain(&self, f_book: &Codebook, f_index: usize, w_book: &Codebook, w_index: usize) -> f64 {
        self.response(f_book, f_index, w_book, w_index).norm_sqr()
    }
}

/// Skeleton-restricted search on a sparse channel; same candidates and
/// tie-breaking as [`beam_search`] with [`Scope::Skeleton`].
pub fn skeleton_sparse(ch: &SparseChannel, f_book: &Codebook, w_book: &Codebook, ps: &PathSkeleton) -> Result<BeamChoice> {
    if ps.is_empty() {
        return Err(Error::Blocked);
    }
    let mut best = BeamChoice { f_index: 0, w_index: 0, gain: f64::NEG_INFINITY };
    for path in &ps.paths {
        let fi = f_book.nearest(&path.aod);
        let wi = w_book.nearest(&path.aoa);
        let gain = ch.pair_gain(f_book, fi, w_book, wi);
        if gain > best.gain {
            best = BeamChoice { f_index: fi, w_index: wi, gain };
        }
    }
    Ok(best)
}

/// Exhaustive search on a sparse channel, `G = A · diag(h) · B`.
pub fn exhaustive_sparse(ch: &SparseChannel, f_book: &Codebook, w_book: &Codebook) -> BeamChoice {
    let nt = ch.terms.len();
    // a[w][t] = wᴴ u_UE(t) · h_t ; b[t][f] = u_BS(t)ᴴ f
    let a: Vec<Complex64> = (0..w_book.len())
        .flat_map(|w| ch.terms.iter().map(move |t| w_book.inner(w, t.ue) * t.gain))
        .collect();
    let mut b = vec![Complex64::new(0.0, 0.0); nt * f_book.len()];
    for (t, term) in ch.terms.iter().enumerate() {
        for f in 0..f_book.len() {
            b[t * f_book.len() + f] = f_book.inner(f, term.bs).conj();
        }
    }
    let mut best = BeamChoice { f_index: 0, w_index: 0, gain: f64::NEG_INFINITY };
    let mut row = vec![Complex64::new(0.0, 0.0); f_book.len()];
    for w in 0..w_book.len() {
        row.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for t in 0..nt {
            let coef = a[w * nt + t];
            for (acc, x) in row.iter_mut().zip(&b[t * f_book.len()..(t + 1) * f_book.len()]) {
                *acc += coef * x;
            }
        }
        for (f, g) in row.iter().enumerate() {
            let gain = g.norm_sqr();
            if gain > best.gain {
                best = BeamChoice { f_index: f, w_index: w, gain };
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{channel_matrix, Angles, ArrayConfig, Subpath};
    use crate::skeleton::{extract_skeleton, Side, SkeletonPath};

    fn books(arrays: &ArrayConfig) -> (Codebook, Codebook) {
        Codebook::for_arrays(arrays, 2).unwrap()
    }

    fn ray(aod: Angles, aoa: Angles, gain: Complex64) -> PathCluster {
        PathCluster { index: 0, center_aod: aod, center_aoa: aoa, los: true, subpaths: vec![Subpath { gain, aod, aoa }] }
    }

    /// A physical direction whose response equals codeword `idx` exactly.
    fn direction_of(book: &Codebook, idx: usize) -> Angles {
        let (a, b) = book.slopes(idx);
        let s = a.hypot(b);
        assert!(s < 1.0);
        Angles::new(s.asin(), b.atan2(a))
    }

    #[test]
    fn matched_filter_rank_one() {
        let arrays = ArrayConfig::default();
        let (fb, wb) = books(&arrays);
        let (fi, wi) = (fb.len() / 2 + 19, wb.len() / 2 + 5);
        let c = ray(direction_of(&fb, fi), direction_of(&wb, wi), Complex64::new(0.6, 0.8));
        let h = channel_matrix(std::slice::from_ref(&c), &arrays);
        let ps = extract_skeleton(std::slice::from_ref(&c), 0, 0, 4);
        let all = beam_search(&h, &fb, &wb, Scope::All).unwrap();
        let restricted = beam_search(&h, &fb, &wb, Scope::Skeleton(&ps)).unwrap();
        assert_eq!((all.f_index, all.w_index), (fi, wi));
        assert_eq!((restricted.f_index, restricted.w_index), (fi, wi));
        assert!((all.gain - 16.0 * 64.0).abs() < 1e-6);
    }

    #[test]
    fn empty_skeleton_signals_blockage() {
        let arrays = ArrayConfig { bs_rows: 2, bs_cols: 2, ue_rows: 1, ue_cols: 2 };
        let (fb, wb) = books(&arrays);
        let h = ChannelMatrix::zeros(arrays.n_ue(), arrays.n_bs());
        let empty = PathSkeleton::default();
        assert!(matches!(beam_search(&h, &fb, &wb, Scope::Skeleton(&empty)), Err(Error::Blocked)));
        assert!(matches!(skeleton_sparse(&SparseChannel::default(), &fb, &wb, &empty), Err(Error::Blocked)));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let arrays = ArrayConfig::default();
        let (fb, _) = books(&arrays);
        let wrong = Codebook::new(Side::Ue, 2, 2, 2).unwrap();
        let h = ChannelMatrix::zeros(16, 64);
        assert!(matches!(beam_search(&h, &fb, &wrong, Scope::All), Err(Error::Shape(_))));
    }

    #[test]
    fn sparse_and_dense_paths_agree() {
        let arrays = ArrayConfig { bs_rows: 4, bs_cols: 4, ue_rows: 2, ue_cols: 2 };
        let (fb, wb) = books(&arrays);
        let clusters: Vec<PathCluster> = (0..3)
            .map(|k| {
                let aod = Angles::new(0.4 * k as f64 - 0.5, 0.1);
                let aoa = Angles::new(-0.3 * k as f64 + 0.2, -0.2);
                PathCluster {
                    index: k,
                    center_aod: aod,
                    center_aoa: aoa,
                    los: false,
                    subpaths: (0..3)
                        .map(|r| Subpath {
                            gain: Complex64::from_polar(1.0 + r as f64, 0.3 * (k + r) as f64),
                            aod: Angles::new(aod.azimuth + 0.05 * r as f64, aod.elevation),
                            aoa: Angles::new(aoa.azimuth - 0.04 * r as f64, aoa.elevation),
                        })
                        .collect(),
                }
            })
            .collect();
        let h = channel_matrix(&clusters, &arrays);
        let sp = SparseChannel::from_clusters(&clusters);
        for (fi, wi) in [(0, 0), (5, 3), (63, 15), (20, 9)] {
            let dense = h.bilinear(&fb.codeword(fi), &wb.codeword(wi)).unwrap();
            assert!((dense - sp.response(&fb, fi, &wb, wi)).norm() < 1e-10);
        }
        let dense = beam_search(&h, &fb, &wb, Scope::All).unwrap();
        let sparse = exhaustive_sparse(&sp, &fb, &wb);
        assert_eq!((dense.f_index, dense.w_index), (sparse.f_index, sparse.w_index));
        assert!((dense.gain - sparse.gain).abs() <= 1e-10 * dense.gain);

        let ps = PathSkeleton {
            bs_id: 0,
            grid_id: 0,
            paths: clusters.iter().map(|c| SkeletonPath { aod: c.center_aod, aoa: c.center_aoa, gain: 1.0 }).collect(),
        };
        let d = beam_search(&h, &fb, &wb, Scope::Skeleton(&ps)).unwrap();
        let s = skeleton_sparse(&sp, &fb, &wb, &ps).unwrap();
        assert_eq!((d.f_index, d.w_index), (s.f_index, s.w_index));
        assert!(d.gain <= dense.gain + 1e-12);
    }
}
