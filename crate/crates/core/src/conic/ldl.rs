//! Envelope (skyline) LDLᵀ factorization for quasi-definite KKT matrices.
//!
//! The symbolic phase computes a reverse Cuthill-McKee ordering once per
//! sparsity pattern; the numeric phase refactors in place every iteration.
//! Quasi-definite matrices admit an LDLᵀ factorization under any symmetric
//! permutation, so no pivoting is needed. Pivots with the wrong sign or
//! negligible magnitude are replaced by a signed regularization value.

use std::collections::VecDeque;

use super::real::Real;

#[derive(Debug, Clone)]
pub struct EnvelopeSymbolic {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// `iperm[old] = new`.
    iperm: Vec<usize>,
    /// First column of the envelope in each (permuted) row.
    first: Vec<usize>,
    /// Offset of each row inside the packed envelope storage.
    start: Vec<usize>,
    len: usize,
}

/// Reverse Cuthill-McKee ordering of a symmetric pattern. Returns `perm[new] = old`.
pub fn reverse_cuthill_mckee(n: usize, adj: &[Vec<usize>]) -> Vec<usize> {
    let degree: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs_levels = |root: usize, visited_global: &[bool]| -> (usize, usize) {
        // Returns (eccentricity, a minimum-degree node in the last level).
        let mut level = vec![usize::MAX; n];
        let mut q = VecDeque::new();
        level[root] = 0;
        q.push_back(root);
        let mut last = root;
        while let Some(v) = q.pop_front() {
            last = v;
            for &w in &adj[v] {
                if level[w] == usize::MAX && !visited_global[w] {
                    level[w] = level[v] + 1;
                    q.push_back(w);
                }
            }
        }
        let ecc = level[last];
        let best = (0..n)
            .filter(|&v| level[v] == ecc)
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(last);
        (ecc, best)
    };
    loop {
        let Some(mut root) = (0..n).filter(|&v| !visited[v]).min_by_key(|&v| (degree[v], v)) else {
            break;
        };
        // Pseudo-peripheral node search.
        let (mut ecc, mut cand) = bfs_levels(root, &visited);
        for _ in 0..8 {
            let (e2, c2) = bfs_levels(cand, &visited);
            if e2 <= ecc {
                break;
            }
            root = cand;
            ecc = e2;
            cand = c2;
        }
        let mut q = VecDeque::new();
        visited[root] = true;
        q.push_back(root);
        while let Some(v) = q.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| (degree[w], w));
            for w in nb {
                visited[w] = true;
                q.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

impl EnvelopeSymbolic {
    /// `pattern` lists off-diagonal positions (each once, either orientation).
    pub fn new(n: usize, pattern: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in pattern {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        let perm = reverse_cuthill_mckee(n, &adj);
        Self::with_permutation(n, &adj, perm)
    }

    fn with_permutation(n: usize, adj: &[Vec<usize>], perm: Vec<usize>) -> Self {
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (old, nb) in adj.iter().enumerate() {
            let r = iperm[old];
            for &w in nb {
                let c = iperm[w];
                if c < first[r] {
                    first[r] = c;
                }
            }
        }
        let mut start = vec![0; n + 1];
        for r in 0..n {
            start[r + 1] = start[r] + (r - first[r]);
        }
        let len = start[n];
        EnvelopeSymbolic { n, perm, iperm, first, start, len }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn envelope_size(&self) -> usize {
        self.len
    }
}

#[derive(Debug, Clone)]
pub struct EnvelopeLdl<T: Real> {
    sym: EnvelopeSymbolic,
    l: Vec<T>,
    d: Vec<T>,
}

/// Regularization applied to pivots that are tiny or carry the wrong sign.
#[derive(Debug, Clone, Copy)]
pub struct PivotGuard<T> {
    pub threshold: T,
    pub value: T,
}

impl<T: Real> EnvelopeLdl<T> {
    pub fn new(sym: EnvelopeSymbolic) -> Self {
        let (n, len) = (sym.n, sym.len);
        EnvelopeLdl { sym, l: vec![T::zero(); len], d: vec![T::zero(); n] }
    }

    /// Numeric factorization. `entries` are in original indices, each
    /// off-diagonal position listed once; `signs[i]` is the expected pivot sign.
    /// Returns the number of pivots that were regularized.
    pub fn factor(&mut self, entries: &[(usize, usize, T)], signs: &[i8], guard: PivotGuard<T>) -> usize {
        let s = &self.sym;
        for v in self.l.iter_mut() {
            *v = T::zero();
        }
        for v in self.d.iter_mut() {
            *v = T::zero();
        }
        for &(i, j, v) in entries {
            let (pi, pj) = (s.iperm[i], s.iperm[j]);
            if pi == pj {
                self.d[pi] += v;
            } else {
                let (r, c) = if pi > pj { (pi, pj) } else { (pj, pi) };
                debug_assert!(c >= s.first[r], "entry outside envelope");
                self.l[s.start[r] + c - s.first[r]] += v;
            }
        }
        let mut bumped = 0;
        for i in 0..s.n {
            let fi = s.first[i];
            let si = s.start[i];
            for j in fi..i {
                let fj = s.first[j];
                let sj = s.start[j];
                let k0 = fi.max(fj);
                let mut acc = self.l[si + j - fi];
                for k in k0..j {
                    acc -= self.l[si + k - fi] * self.l[sj + k - fj];
                }
                self.l[si + j - fi] = acc;
            }
            let mut di = self.d[i];
            for j in fi..i {
                let w = self.l[si + j - fi];
                let lij = w / self.d[j];
                di -= w * lij;
                self.l[si + j - fi] = lij;
            }
            let sign = T::from_f64(signs[s.perm[i]] as f64);
            if di * sign <= guard.threshold {
                di = sign * guard.value;
                bumped += 1;
            }
            self.d[i] = di;
        }
        bumped
    }

    /// Solves `L D Lᵀ x = b` in place (original ordering).
    pub fn solve(&self, b: &mut [T]) {
        let s = &self.sym;
        let mut y: Vec<T> = (0..s.n).map(|i| b[s.perm[i]]).collect();
        for i in 0..s.n {
            let fi = s.first[i];
            let si = s.start[i];
            let mut acc = y[i];
            for k in fi..i {
                acc -= self.l[si + k - fi] * y[k];
            }
            y[i] = acc;
        }
        for i in 0..s.n {
            y[i] /= self.d[i];
        }
        for i in (0..s.n).rev() {
            let fi = s.first[i];
            let si = s.start[i];
            let yi = y[i];
            for k in fi..i {
                y[k] -= self.l[si + k - fi] * yi;
            }
        }
        for i in 0..s.n {
            b[s.perm[i]] = y[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_from(n: usize, entries: &[(usize, usize, f64)]) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for &(i, j, v) in entries {
            m[(i, j)] += v;
            if i != j {
                m[(j, i)] += v;
            }
        }
        m
    }

    #[test]
    fn rcm_is_a_permutation_and_shrinks_bandwidth_of_path() {
        // Path graph 0-5-1-4-2-3 scrambled.
        let n = 6;
        let edges = [(0, 5), (5, 1), (1, 4), (4, 2), (2, 3)];
        let sym = EnvelopeSymbolic::new(n, &edges);
        let mut p = sym.perm.clone();
        p.sort();
        assert_eq!(p, (0..n).collect::<Vec<_>>());
        assert_eq!(sym.envelope_size(), n - 1);
    }

    #[test]
    fn solves_quasi_definite_system() {
        // [[4, 1, 2], [1, -3, 0], [2, 0, -5]]
        let entries = vec![(0, 0, 4.0), (1, 1, -3.0), (2, 2, -5.0), (1, 0, 1.0), (0, 2, 2.0)];
        let sym = EnvelopeSymbolic::new(3, &[(1, 0), (0, 2)]);
        let mut f = EnvelopeLdl::<f64>::new(sym);
        let g = PivotGuard { threshold: 1e-14, value: 1e-8 };
        assert_eq!(f.factor(&entries, &[1, -1, -1], g), 0);
        let a = dense_from(3, &entries);
        let x_true = nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let b = &a * &x_true;
        let mut x = b.as_slice().to_vec();
        f.solve(&mut x);
        for i in 0..3 {
            assert!((x[i] - x_true[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn random_banded_matches_dense_solve() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 40;
        let mut entries = Vec::new();
        let mut pattern = Vec::new();
        let signs: Vec<i8> = (0..n).map(|i| if i < 25 { 1 } else { -1 }).collect();
        for i in 0..n {
            entries.push((i, i, signs[i] as f64 * (5.0 + rng.random::<f64>())));
        }
        for _ in 0..80 {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i != j && !pattern.contains(&(i, j)) && !pattern.contains(&(j, i)) {
                // Only couple the two blocks to keep quasi-definiteness.
                if (i < 25) != (j < 25) {
                    pattern.push((i, j));
                    entries.push((i, j, rng.random::<f64>() - 0.5));
                }
            }
        }
        let sym = EnvelopeSymbolic::new(n, &pattern);
        let mut f = EnvelopeLdl::<f64>::new(sym);
        f.factor(&entries, &signs, PivotGuard { threshold: 1e-14, value: 1e-8 });
        let a = dense_from(n, &entries);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = b.clone();
        f.solve(&mut x);
        let r = &a * nalgebra::DVector::from_vec(x) - nalgebra::DVector::from_vec(b);
        assert!(r.norm() < 1e-12);
    }
}
