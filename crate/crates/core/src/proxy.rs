//! Proxy calibration: Beta-weighted mixing of aligned embedding triples and
//! the cosine losses that supervise the mixed proxies.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_similarity, dot, norm, Embedding, EmbeddingSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Each row mixed with exactly one other row; `M = N`.
    #[default]
    RandomDerangement,
    /// Every unordered pair `m < n`; `M = N (N - 1) / 2`.
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyConfig {
    /// Shape of the symmetric `Beta(gamma, gamma)` mixing distribution.
    pub gamma: f64,
    pub seed: u64,
    pub pairing: Pairing,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        ProxyConfig {
            gamma: 2.0,
            seed: 0,
            pairing: Pairing::RandomDerangement,
        }
    }
}

impl ProxyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be > 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Seeded `Beta(gamma, gamma)` stream built from two Gamma draws:
/// `alpha = X / (X + Y)` with `X, Y ~ Gamma(gamma, 1)`.
#[derive(Debug, Clone)]
pub struct BetaSampler {
    rng: ChaCha8Rng,
    shape: Gamma<f64>,
}

impl BetaSampler {
    pub fn new(gamma: f64, seed: u64) -> Result<Self> {
        Self::from_rng(gamma, ChaCha8Rng::seed_from_u64(seed))
    }

    fn from_rng(gamma: f64, rng: ChaCha8Rng) -> Result<Self> {
        let shape = Gamma::new(gamma, 1.0)
            .map_err(|e| Error::Config(format!("gamma must be > 0, got {gamma} ({e})")))?;
        Ok(BetaSampler { rng, shape })
    }

    /// One draw strictly inside (0, 1).
    pub fn sample_alpha(&mut self) -> f64 {
        loop {
            let x = self.shape.sample(&mut self.rng);
            let y = self.shape.sample(&mut self.rng);
            let alpha = x / (x + y);
            // Tiny gamma can underflow one side to exactly 0 or 1.
            if alpha > 0.0 && alpha < 1.0 {
                return alpha;
            }
        }
    }
}

/// `alpha * a + (1 - alpha) * b`.
pub fn mix_pair(a: &[f64], b: &[f64], alpha: f64) -> Result<Embedding> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "cannot mix dimension {} with dimension {}",
            a.len(),
            b.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("mixing weight {alpha} is outside [0, 1]")));
    }
    let beta = 1.0 - alpha;
    Embedding::new(a.iter().zip(b).map(|(x, y)| alpha * x + beta * y).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixRecord {
    pub m: usize,
    pub n: usize,
    pub alpha: f64,
}

/// Mixed query, CLIP and text rows that share their `(m, n, alpha)` per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyBatch {
    pub mixed_query: EmbeddingSet,
    pub mixed_clip: EmbeddingSet,
    pub mixed_text: EmbeddingSet,
    pub mixes: Vec<MixRecord>,
}

impl ProxyBatch {
    pub fn len(&self) -> usize {
        self.mixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mixes.is_empty()
    }

    pub fn alphas(&self) -> impl Iterator<Item = f64> + '_ {
        self.mixes.iter().map(|r| r.alpha)
    }
}

/// Draws pairs and weights from `cfg` and mixes the three index-aligned sets
/// with the same `(m, n, alpha)` per output row.
pub fn build_proxy_batch(
    f_q: &EmbeddingSet,
    f_c: &EmbeddingSet,
    f_t: &EmbeddingSet,
    cfg: &ProxyConfig,
) -> Result<ProxyBatch> {
    cfg.validate()?;
    let n = f_q.len();
    if f_c.len() != n || f_t.len() != n {
        return Err(Error::Shape(format!(
            "aligned sets must share N: query {}, clip {}, text {}",
            n,
            f_c.len(),
            f_t.len()
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientPairs(n));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pairs: Vec<(usize, usize)> = match cfg.pairing {
        Pairing::RandomDerangement => random_derangement(n, &mut rng)
            .into_iter()
            .enumerate()
            .collect(),
        Pairing::AllPairs => (0..n)
            .flat_map(|m| (m + 1..n).map(move |k| (m, k)))
            .collect(),
    };
    let mut sampler = BetaSampler::from_rng(cfg.gamma, rng)?;

    let mut mixes = Vec::with_capacity(pairs.len());
    let (mut q, mut c, mut t) = (Vec::new(), Vec::new(), Vec::new());
    for (m, k) in pairs {
        let alpha = sampler.sample_alpha();
        q.extend(mix_pair(f_q.row(m), f_q.row(k), alpha)?.into_vec());
        c.extend(mix_pair(f_c.row(m), f_c.row(k), alpha)?.into_vec());
        t.extend(mix_pair(f_t.row(m), f_t.row(k), alpha)?.into_vec());
        mixes.push(MixRecord { m, n: k, alpha });
    }
    Ok(ProxyBatch {
        mixed_query: EmbeddingSet::from_flat(f_q.dim(), q)?,
        mixed_clip: EmbeddingSet::from_flat(f_c.dim(), c)?,
        mixed_text: EmbeddingSet::from_flat(f_t.dim(), t)?,
        mixes,
    })
}

/// Uniform random permutation without fixed points, by rejection.
fn random_derangement(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return perm;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyLoss {
    /// Mean of `1 - cos(F'_Q, F'_T)` over rows.
    pub l_pq: f64,
    /// Mean of `1 - cos(F'_C, F'_T)` over rows.
    pub l_pc: f64,
    pub total: f64,
    #[serde(skip)]
    pub per_row_pq: Vec<f64>,
    #[serde(skip)]
    pub per_row_pc: Vec<f64>,
}

pub fn proxy_loss(batch: &ProxyBatch) -> Result<ProxyLoss> {
    check_batch(batch)?;
    let m = batch.len();
    let mut per_row_pq = Vec::with_capacity(m);
    let mut per_row_pc = Vec::with_capacity(m);
    for i in 0..m {
        let t = batch.mixed_text.row(i);
        per_row_pq.push(1.0 - row_cosine(batch.mixed_query.row(i), t, i)?);
        per_row_pc.push(1.0 - row_cosine(batch.mixed_clip.row(i), t, i)?);
    }
    let l_pq = per_row_pq.iter().sum::<f64>() / m as f64;
    let l_pc = per_row_pc.iter().sum::<f64>() / m as f64;
    Ok(ProxyLoss {
        l_pq,
        l_pc,
        total: l_pq + l_pc,
        per_row_pq,
        per_row_pc,
    })
}

/// Analytic gradient of [`ProxyLoss::total`] with respect to each mixed row.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyGradient {
    pub d_query: Vec<Vec<f64>>,
    pub d_clip: Vec<Vec<f64>>,
    pub d_text: Option<Vec<Vec<f64>>>,
}

pub fn proxy_loss_grad(batch: &ProxyBatch, with_text: bool) -> Result<ProxyGradient> {
    check_batch(batch)?;
    let m = batch.len();
    let scale = -1.0 / m as f64;
    let mut d_query = Vec::with_capacity(m);
    let mut d_clip = Vec::with_capacity(m);
    let mut d_text = with_text.then(|| Vec::with_capacity(m));
    for i in 0..m {
        let q = batch.mixed_query.row(i);
        let c = batch.mixed_clip.row(i);
        let t = batch.mixed_text.row(i);
        for (v, name) in [(q, "query"), (c, "clip"), (t, "text")] {
            if norm(v) == 0.0 {
                return Err(Error::Degenerate(format!("mixed {name} row {i} has zero norm")));
            }
        }
        d_query.push(scaled(cosine_grad(q, t), scale));
        d_clip.push(scaled(cosine_grad(c, t), scale));
        if let Some(d_text) = d_text.as_mut() {
            let g: Vec<f64> = cosine_grad(t, q)
                .into_iter()
                .zip(cosine_grad(t, c))
                .map(|(a, b)| scale * (a + b))
                .collect();
            d_text.push(g);
        }
    }
    Ok(ProxyGradient {
        d_query,
        d_clip,
        d_text,
    })
}

/// Largest relative discrepancy between [`proxy_loss_grad`] and central
/// finite differences of [`proxy_loss`] with step `h`, over the query and
/// clip rows.
pub fn gradient_check(batch: &ProxyBatch, h: f64) -> Result<f64> {
    let grad = proxy_loss_grad(batch, false)?;
    let mut worst = 0.0f64;
    for (which, analytic) in [(0usize, &grad.d_query), (1, &grad.d_clip)] {
        for (i, row) in analytic.iter().enumerate() {
            for (k, &a) in row.iter().enumerate() {
                let plus = perturbed(batch, which, i, k, h)?;
                let minus = perturbed(batch, which, i, k, -h)?;
                let fd = (proxy_loss(&plus)?.total - proxy_loss(&minus)?.total) / (2.0 * h);
                let denom = a.abs().max(fd.abs()).max(1e-6);
                worst = worst.max((a - fd).abs() / denom);
            }
        }
    }
    Ok(worst)
}

fn perturbed(batch: &ProxyBatch, which: usize, row: usize, col: usize, h: f64) -> Result<ProxyBatch> {
    let mut out = batch.clone();
    let target = if which == 0 {
        &mut out.mixed_query
    } else {
        &mut out.mixed_clip
    };
    let dim = target.dim();
    let mut flat = target.as_flat().to_vec();
    flat[row * dim + col] += h;
    *target = EmbeddingSet::from_flat(dim, flat)?;
    Ok(out)
}

/// Gradient of `cos(u, v)` with respect to `u`.
fn cosine_grad(u: &[f64], v: &[f64]) -> Vec<f64> {
    let nu = norm(u);
    let nv = norm(v);
    let cos = dot(u, v) / (nu * nv);
    u.iter()
        .zip(v)
        .map(|(ui, vi)| vi / (nu * nv) - cos * ui / (nu * nu))
        .collect()
}

fn scaled(v: Vec<f64>, s: f64) -> Vec<f64> {
    v.into_iter().map(|x| x * s).collect()
}

fn row_cosine(a: &[f64], t: &[f64], row: usize) -> Result<f64> {
    cosine_similarity(a, t).map_err(|e| match e {
        Error::Degenerate(_) => Error::Degenerate(format!("mixed row {row} has zero norm")),
        other => other,
    })
}

fn check_batch(batch: &ProxyBatch) -> Result<()> {
    let m = batch.len();
    if m == 0 {
        return Err(Error::EmptyInput("proxy batch has no rows".into()));
    }
    if batch.mixed_query.len() != m || batch.mixed_clip.len() != m || batch.mixed_text.len() != m {
        return Err(Error::Shape("proxy batch sets disagree on row count".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn set(rows: &[&[f64]]) -> EmbeddingSet {
        EmbeddingSet::from_rows(rows).unwrap()
    }

    fn batch_of(q: &[&[f64]], c: &[&[f64]], t: &[&[f64]]) -> ProxyBatch {
        ProxyBatch {
            mixed_query: set(q),
            mixed_clip: set(c),
            mixed_text: set(t),
            mixes: (0..q.len()).map(|i| MixRecord { m: i, n: i, alpha: 0.5 }).collect(),
        }
    }

    fn random_set(rng: &mut ChaCha8Rng, n: usize, d: usize) -> EmbeddingSet {
        EmbeddingSet::from_flat(d, (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn mix_endpoints_and_midpoint() {
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        assert_eq!(mix_pair(&a, &b, 1.0).unwrap().as_slice(), &a);
        assert_eq!(mix_pair(&a, &b, 0.0).unwrap().as_slice(), &b);
        assert_eq!(mix_pair(&a, &b, 0.25).unwrap().as_slice(), &[0.25, 0.75]);
        assert!(matches!(mix_pair(&a, &[1.0], 0.5), Err(Error::Shape(_))));
        assert!(mix_pair(&a, &b, 1.5).is_err());
    }

    #[test]
    fn mix_matches_elementwise_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let alpha: f64 = rng.gen();
            let mixed = mix_pair(&a, &b, alpha).unwrap();
            for k in 0..6 {
                assert_eq!(mixed[k], alpha * a[k] + (1.0 - alpha) * b[k]);
            }
        }
    }

    #[test]
    fn sampler_is_deterministic_and_in_range() {
        let mut a = BetaSampler::new(2.0, 42).unwrap();
        let mut b = BetaSampler::new(2.0, 42).unwrap();
        for _ in 0..1000 {
            let x = a.sample_alpha();
            assert_eq!(x.to_bits(), b.sample_alpha().to_bits());
            assert!(x > 0.0 && x < 1.0);
        }
        let mut tiny = BetaSampler::new(0.01, 1).unwrap();
        for _ in 0..1000 {
            let x = tiny.sample_alpha();
            assert!(x > 0.0 && x < 1.0);
        }
        assert!(BetaSampler::new(0.0, 1).is_err());
    }

    #[test]
    fn derangement_of_two() {
        let q = set(&[&[1.0, 0.0], &[0.0, 1.0]]);
        for seed in 0..10 {
            let cfg = ProxyConfig {
                seed,
                ..ProxyConfig::default()
            };
            let b = build_proxy_batch(&q, &q, &q, &cfg).unwrap();
            let pairs: Vec<_> = b.mixes.iter().map(|r| (r.m, r.n)).collect();
            assert_eq!(pairs, vec![(0, 1), (1, 0)]);
        }
    }

    #[test]
    fn derangements_have_no_fixed_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for seed in 0..50 {
            let n = 2 + seed as usize % 9;
            let s = random_set(&mut rng, n, 3);
            let cfg = ProxyConfig {
                seed,
                ..ProxyConfig::default()
            };
            let b = build_proxy_batch(&s, &s, &s, &cfg).unwrap();
            assert_eq!(b.len(), n);
            let mut targets: Vec<usize> = b.mixes.iter().map(|r| r.n).collect();
            assert!(b.mixes.iter().all(|r| r.m != r.n));
            targets.sort_unstable();
            assert_eq!(targets, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn all_pairs_of_three() {
        let s = set(&[&[1.0], &[2.0], &[3.0]]);
        let cfg = ProxyConfig {
            pairing: Pairing::AllPairs,
            ..ProxyConfig::default()
        };
        let b = build_proxy_batch(&s, &s, &s, &cfg).unwrap();
        let pairs: Vec<_> = b.mixes.iter().map(|r| (r.m, r.n)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn batch_rows_follow_recorded_metadata() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (q, c, t) = (
            random_set(&mut rng, 7, 5),
            random_set(&mut rng, 7, 5),
            random_set(&mut rng, 7, 5),
        );
        for pairing in [Pairing::RandomDerangement, Pairing::AllPairs] {
            let cfg = ProxyConfig {
                gamma: 0.7,
                seed: 3,
                pairing,
            };
            let b = build_proxy_batch(&q, &c, &t, &cfg).unwrap();
            for (i, r) in b.mixes.iter().enumerate() {
                assert!(r.alpha > 0.0 && r.alpha < 1.0);
                for (src, mixed) in [(&q, &b.mixed_query), (&c, &b.mixed_clip), (&t, &b.mixed_text)] {
                    for k in 0..5 {
                        let expect = r.alpha * src.row(r.m)[k] + (1.0 - r.alpha) * src.row(r.n)[k];
                        assert_eq!(mixed.row(i)[k], expect);
                    }
                }
            }
            assert_eq!(b, build_proxy_batch(&q, &c, &t, &cfg).unwrap());
        }
    }

    #[test]
    fn batch_errors() {
        let one = set(&[&[1.0, 2.0]]);
        assert!(matches!(
            build_proxy_batch(&one, &one, &one, &ProxyConfig::default()),
            Err(Error::InsufficientPairs(1))
        ));
        let two = set(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert!(matches!(
            build_proxy_batch(&two, &one, &two, &ProxyConfig::default()),
            Err(Error::Shape(_))
        ));
        let cfg = ProxyConfig {
            gamma: -1.0,
            ..ProxyConfig::default()
        };
        assert!(matches!(build_proxy_batch(&two, &two, &two, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn loss_reference_points() {
        let v: &[f64] = &[0.3, -1.2, 2.0];
        let l = proxy_loss(&batch_of(&[v], &[v], &[v])).unwrap();
        assert!(l.l_pq.abs() < 1e-12 && l.l_pc.abs() < 1e-12 && l.total.abs() < 1e-12);

        let l = proxy_loss(&batch_of(&[&[1.0, 0.0]], &[&[1.0, 0.0]], &[&[0.0, 5.0]])).unwrap();
        assert_eq!((l.l_pq, l.l_pc, l.total), (1.0, 1.0, 2.0));

        let l = proxy_loss(&batch_of(&[&[-1.0, 2.0]], &[&[1.0, -2.0]], &[&[1.0, -2.0]])).unwrap();
        assert!((l.l_pq - 2.0).abs() < 1e-12);
    }

    #[test]
    fn loss_names_zero_row() {
        let b = batch_of(&[&[1.0], &[0.0]], &[&[1.0], &[1.0]], &[&[1.0], &[1.0]]);
        match proxy_loss(&b) {
            Err(Error::Degenerate(msg)) => assert!(msg.contains("row 1"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parallel_rows_have_zero_gradient() {
        let b = batch_of(&[&[1.0, 2.0, 3.0]], &[&[2.0, 4.0, 6.0]], &[&[0.5, 1.0, 1.5]]);
        let g = proxy_loss_grad(&b, true).unwrap();
        for row in g.d_query.iter().chain(&g.d_clip).chain(g.d_text.as_ref().unwrap()) {
            assert!(row.iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn gradient_is_orthogonal_to_its_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let s = [random_set(&mut rng, 6, 8), random_set(&mut rng, 6, 8), random_set(&mut rng, 6, 8)];
        let b = build_proxy_batch(&s[0], &s[1], &s[2], &ProxyConfig::default()).unwrap();
        let g = proxy_loss_grad(&b, false).unwrap();
        for i in 0..b.len() {
            assert!(dot(&g.d_query[i], b.mixed_query.row(i)).abs() < 1e-12);
            assert!(dot(&g.d_clip[i], b.mixed_clip.row(i)).abs() < 1e-12);
        }
        assert!(g.d_text.is_none());
    }

    #[test]
    fn text_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let s = [random_set(&mut rng, 4, 5), random_set(&mut rng, 4, 5), random_set(&mut rng, 4, 5)];
        let b = build_proxy_batch(&s[0], &s[1], &s[2], &ProxyConfig::default()).unwrap();
        let g = proxy_loss_grad(&b, true).unwrap();
        let h = 1e-5;
        for i in 0..b.len() {
            for k in 0..5 {
                let bump = |delta: f64| {
                    let mut flat = b.mixed_text.as_flat().to_vec();
                    flat[i * 5 + k] += delta;
                    let mut out = b.clone();
                    out.mixed_text = EmbeddingSet::from_flat(5, flat).unwrap();
                    proxy_loss(&out).unwrap().total
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                let a = g.d_text.as_ref().unwrap()[i][k];
                assert!((a - fd).abs() <= 1e-4 * a.abs().max(fd.abs()).max(1e-6));
            }
        }
    }

    #[test]
    fn builtin_gradient_check_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let s = [random_set(&mut rng, 5, 8), random_set(&mut rng, 5, 8), random_set(&mut rng, 5, 8)];
        let b = build_proxy_batch(&s[0], &s[1], &s[2], &ProxyConfig::default()).unwrap();
        assert!(gradient_check(&b, 1e-5).unwrap() < 1e-4);
    }

    proptest! {
        #[test]
        fn mixes_stay_on_segment(
            rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 2..8),
            seed in any::<u64>(),
            gamma in 0.2f64..5.0,
        ) {
            let s = EmbeddingSet::from_rows(&rows).unwrap();
            let cfg = ProxyConfig { gamma, seed, pairing: Pairing::RandomDerangement };
            let b = build_proxy_batch(&s, &s, &s, &cfg).unwrap();
            let max_parent = s.rows().map(norm).fold(0.0, f64::max);
            for (i, r) in b.mixes.iter().enumerate() {
                let row = b.mixed_query.row(i);
                prop_assert!(norm(row) <= max_parent * (1.0 + 1e-12));
                for ((&v, &a), &c) in row.iter().zip(s.row(r.m)).zip(s.row(r.n)) {
                    prop_assert!(v >= a.min(c) - 1e-12 && v <= a.max(c) + 1e-12);
                }
            }
        }

        #[test]
        fn loss_is_bounded_and_scale_invariant(
            rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 3 * 4),
            s in 0.01f64..100.0,
        ) {
            prop_assume!(rows.iter().all(|r| norm(r) > 1e-3));
            let q = EmbeddingSet::from_rows(&rows[0..4]).unwrap();
            let c = EmbeddingSet::from_rows(&rows[4..8]).unwrap();
            let t = EmbeddingSet::from_rows(&rows[8..12]).unwrap();
            let b = ProxyBatch {
                mixed_query: q.clone(),
                mixed_clip: c,
                mixed_text: t,
                mixes: (0..4).map(|i| MixRecord { m: i, n: i, alpha: 0.5 }).collect(),
            };
            let l = proxy_loss(&b).unwrap();
            for v in l.per_row_pq.iter().chain(&l.per_row_pc) {
                prop_assert!((0.0..=2.0).contains(v));
            }
            prop_assert!((0.0..=4.0).contains(&l.total));
            let mut scaled_b = b.clone();
            scaled_b.mixed_query = EmbeddingSet::from_flat(3, q.as_flat().iter().map(|v| v * s).collect()).unwrap();
            prop_assert!((proxy_loss(&scaled_b).unwrap().total - l.total).abs() < 1e-12);
        }
    }
}
