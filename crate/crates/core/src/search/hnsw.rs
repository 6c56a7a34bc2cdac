use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dot_i8, quantize, rank_hits, CloneCandidate, NeighborIndex, SearchError, SearchParams, VectorStore};
use crate::embedder::{EmbeddingVector, DEFAULT_SEED};

/// Highest layer a node may be assigned to.
pub const MAX_LEVEL: usize = 31;

/// Largest insertion batch searched in parallel against a frozen graph.
const MAX_BATCH: usize = 512;

/// Passes of the post-build reachability repair.
const MAX_REPAIR_ROUNDS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HnswParams {
    /// Neighbours per node on upper layers; layer 0 allows twice as many.
    pub m: usize,
    pub ef_construction: usize,
    /// Seed of the level draws.
    pub seed: u64,
}

impl Default for HnswParams {
    fn default() -> Self {
        HnswParams { m: 32, ef_construction: 200, seed: DEFAULT_SEED }
    }
}

impl HnswParams {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.m < 2 {
            return Err(SearchError::InvalidParams(format!("M must be at least 2, got {}", self.m)));
        }
        if self.ef_construction < self.m {
            return Err(SearchError::InvalidParams(format!(
                "ef_construction ({}) must be at least M ({})",
                self.ef_construction, self.m
            )));
        }
        Ok(())
    }

    pub(crate) fn cap(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.m
        } else {
            self.m
        }
    }
}

/// Layer of a node given a uniform draw `u` in `(0, 1]`:
/// `floor(-ln(u) / ln(M))`.
pub fn assign_level(m: usize, u: f64) -> usize {
    let x = -u.ln() / (m as f64).ln();
    // absorbs the rounding of ln(exp(-ln M)) so exact powers land on their level
    let level = (x + 1e-12).floor();
    if level.is_finite() && level > 0.0 {
        (level as usize).min(MAX_LEVEL)
    } else {
        0
    }
}

pub(crate) fn draw_levels(n: usize, params: &HnswParams) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    (0..n)
        .map(|_| {
            let u = 1.0 - rng.random::<f64>();
            assign_level(params.m, u) as u8
        })
        .collect()
}

/// Graph edge or search entry: a node position and its distance
/// (`1 - cosine`) to some reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Near {
    pub dist: f32,
    pub id: u32,
}

impl Eq for Near {}

impl Ord for Near {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Near {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Visited {
    bits: Vec<u64>,
}

impl Visited {
    fn new(n: usize) -> Self {
        Visited { bits: vec![0; n.div_ceil(64)] }
    }

    fn clear(&mut self) {
        self.bits.fill(0);
    }

    fn contains(&self, i: u32) -> bool {
        self.bits[i as usize / 64] & (1 << (i % 64)) != 0
    }

    /// Marks `i`; returns false if it was already marked.
    fn insert(&mut self, i: u32) -> bool {
        let (w, b) = (i as usize / 64, i % 64);
        let fresh = self.bits[w] & (1 << b) == 0;
        self.bits[w] |= 1 << b;
        fresh
    }
}

/// Result of [`HnswIndex::audit`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GraphAudit {
    pub nodes: usize,
    /// Directed edges summed over all layers.
    pub edges: usize,
    /// Nodes reachable from the entry point on layer 0.
    pub reachable: usize,
    pub violations: Vec<String>,
}

impl GraphAudit {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Hierarchical navigable small-world graph over unit vectors.
///
/// The build inserts nodes in id order. Each batch of new nodes is first
/// searched in parallel against the graph as it stood before the batch,
/// then linked sequentially, so the result depends only on the input and
/// the seed and never on thread count. Adjacency is kept symmetric: when a
/// full neighbour list must shed an edge, both directions are removed.
#[derive(Debug, Clone)]
pub struct HnswIndex {
    pub(super) params: HnswParams,
    pub(super) store: VectorStore,
    pub(super) levels: Vec<u8>,
    /// `links[node][layer]`
    pub(super) links: Vec<Vec<Vec<Near>>>,
    pub(super) entry: Option<u32>,
    pub(super) max_level: usize,
    /// 8-bit copy of the rows, used only to steer graph traversal.
    pub(super) codes: Vec<i8>,
    pub(super) scales: Vec<f32>,
}

/// Quantized query.
#[derive(Clone, Copy)]
struct Probe<'a> {
    code: &'a [i8],
    scale: f32,
}

pub(super) fn encode(store: &VectorStore) -> (Vec<i8>, Vec<f32>) {
    let mut codes = Vec::with_capacity(store.len() * store.dimension());
    let mut scales = Vec::with_capacity(store.len());
    for pos in 0..store.len() {
        let (c, s) = quantize(store.row(pos));
        codes.extend_from_slice(&c);
        scales.push(s);
    }
    (codes, scales)
}

impl HnswIndex {
    pub fn build(vectors: &[EmbeddingVector], params: &HnswParams) -> Result<Self, SearchError> {
        params.validate()?;
        let store = VectorStore::new(vectors)?;
        Self::build_from_store(store, params)
    }

    pub fn build_from_store(store: VectorStore, params: &HnswParams) -> Result<Self, SearchError> {
        params.validate()?;
        let n = store.len();
        if n > u32::MAX as usize {
            return Err(SearchError::InvalidParams(format!("{n} vectors exceed the index capacity")));
        }
        let levels = draw_levels(n, params);
        let links = levels.iter().map(|l| vec![Vec::new(); *l as usize + 1]).collect();
        let (codes, scales) = encode(&store);
        let mut index = HnswIndex { params: *params, store, levels, links, entry: None, max_level: 0, codes, scales };
        if n == 0 {
            return Ok(index);
        }
        index.entry = Some(0);
        index.max_level = index.levels[0] as usize;
        let mut next = 1;
        while next < n {
            let end = (next + (next / 32).clamp(1, MAX_BATCH)).min(n);
            let plans: Vec<Vec<Vec<Near>>> = (next..end).into_par_iter().map(|q| index.plan(q)).collect();
            for (q, plan) in (next..end).zip(plans) {
                index.link(q, plan, next);
            }
            next = end;
        }
        index.reconnect();
        Ok(index)
    }

    pub fn params(&self) -> &HnswParams {
        &self.params
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    /// Fragment id of the entry point.
    pub fn entry_point(&self) -> Option<u64> {
        self.entry.map(|e| self.store.ids()[e as usize])
    }

    /// Layer assigned to each node, in index order.
    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    /// Neighbour positions of node `pos` on `layer`.
    pub fn neighbours(&self, pos: usize, layer: usize) -> Vec<usize> {
        self.links[pos].get(layer).map_or_else(Vec::new, |l| l.iter().map(|x| x.id as usize).collect())
    }

    fn code(&self, pos: usize) -> &[i8] {
        let d = self.store.dimension();
        &self.codes[pos * d..(pos + 1) * d]
    }

    fn probe(&self, pos: usize) -> Probe<'_> {
        Probe { code: self.code(pos), scale: self.scales[pos] }
    }

    fn dist(&self, a: usize, b: usize) -> f32 {
        self.dist_q(self.probe(a), b)
    }

    fn dist_q(&self, q: Probe<'_>, b: usize) -> f32 {
        1.0 - q.scale * self.scales[b] * dot_i8(q.code, self.code(b)) as f32
    }

    fn greedy(&self, q: Probe<'_>, mut cur: Near, layer: usize) -> Near {
        loop {
            let mut moved = false;
            for nb in &self.links[cur.id as usize][layer] {
                let cand = Near { dist: self.dist_q(q, nb.id as usize), id: nb.id };
                if cand < cur {
                    cur = cand;
                    moved = true;
                }
            }
            if !moved {
                return cur;
            }
        }
    }

    /// Beam search on one layer; returns up to `ef` nodes, nearest first.
    fn search_layer(&self, q: Probe<'_>, entry: &[Near], ef: usize, layer: usize, visited: &mut Visited) -> Vec<Near> {
        let mut frontier: BinaryHeap<Reverse<Near>> = BinaryHeap::with_capacity(ef * 2);
        let mut best: BinaryHeap<Near> = BinaryHeap::with_capacity(ef + 1);
        for e in entry {
            if visited.insert(e.id) {
                frontier.push(Reverse(*e));
                best.push(*e);
                if best.len() > ef {
                    best.pop();
                }
            }
        }
        while let Some(Reverse(c)) = frontier.pop() {
            if best.len() >= ef && best.peek().is_some_and(|w| c.dist > w.dist) {
                break;
            }
            for nb in &self.links[c.id as usize][layer] {
                if !visited.insert(nb.id) {
                    continue;
                }
                let cand = Near { dist: self.dist_q(q, nb.id as usize), id: nb.id };
                if best.len() < ef || best.peek().is_some_and(|w| cand < *w) {
                    frontier.push(Reverse(cand));
                    best.push(cand);
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }
        best.into_sorted_vec()
    }

    /// Descends from the entry point and returns the layer-0 beam of width `ef`.
    fn candidates(&self, q: Probe<'_>, ef: usize) -> Vec<Near> {
        let Some(entry) = self.entry else {
            return Vec::new();
        };
        let mut ep = Near { dist: self.dist_q(q, entry as usize), id: entry };
        for layer in (1..=self.max_level).rev() {
            ep = self.greedy(q, ep, layer);
        }
        let mut visited = Visited::new(self.store.len());
        self.search_layer(q, &[ep], ef, 0, &mut visited)
    }

    /// Candidate neighbours of node `q` on each of its layers that already
    /// exist in the graph. Read-only.
    fn plan(&self, q: usize) -> Vec<Vec<Near>> {
        let query = self.probe(q);
        let top = (self.levels[q] as usize).min(self.max_level);
        let mut out = vec![Vec::new(); top + 1];
        let Some(entry) = self.entry else {
            return out;
        };
        let mut ep = Near { dist: self.dist_q(query, entry as usize), id: entry };
        for layer in (top + 1..=self.max_level).rev() {
            ep = self.greedy(query, ep, layer);
        }
        let mut visited = Visited::new(self.store.len());
        let mut eps = vec![ep];
        for layer in (0..=top).rev() {
            visited.clear();
            let found = self.search_layer(query, &eps, self.params.ef_construction, layer, &mut visited);
            out[layer].clone_from(&found);
            eps = found;
        }
        out
    }

    fn link(&mut self, q: usize, mut plan: Vec<Vec<Near>>, batch_start: usize) {
        let level = self.levels[q] as usize;
        plan.resize(level + 1, Vec::new());
        for (layer, mut cands) in plan.into_iter().enumerate() {
            for p in batch_start..q {
                if self.levels[p] as usize >= layer {
                    cands.push(Near { dist: self.dist(q, p), id: p as u32 });
                }
            }
            cands.sort_unstable();
            cands.dedup_by_key(|c| c.id);
            let selected = self.select_diverse(&cands, self.params.m);
            self.links[q][layer].clone_from(&selected);
            for s in selected {
                self.add_reverse(s.id as usize, q, s.dist, layer);
            }
        }
        if level > self.max_level || self.entry.is_none() {
            self.max_level = level;
            self.entry = Some(q as u32);
        }
    }

    /// Keeps a candidate only if it is closer to the base than to every
    /// neighbour already kept. Input must be sorted nearest first.
    fn select_diverse(&self, cands: &[Near], m: usize) -> Vec<Near> {
        let mut out: Vec<Near> = Vec::with_capacity(m);
        for c in cands {
            if out.len() >= m {
                break;
            }
            if out.iter().all(|s| self.dist(c.id as usize, s.id as usize) >= c.dist) {
                out.push(*c);
            }
        }
        out
    }

    fn degree(&self, node: usize, layer: usize) -> usize {
        self.links[node][layer].len()
    }

    /// Adds the edge `n -> q` (the edge `q -> n` already exists). If `n` is
    /// full, one edge among its neighbours and `q` is dropped in both
    /// directions, never one whose loss would split the layer.
    fn add_reverse(&mut self, n: usize, q: usize, dist: f32, layer: usize) {
        let cap = self.params.cap(layer);
        if self.links[n][layer].len() < cap {
            self.links[n][layer].push(Near { dist, id: q as u32 });
            return;
        }
        let mut pool = self.links[n][layer].clone();
        pool.push(Near { dist, id: q as u32 });
        pool.sort_unstable();
        let victim = self.choose_victim(&pool, q, layer);
        if victim == q {
            self.links[q][layer].retain(|x| x.id as usize != n);
        } else {
            self.drop_edge(n, victim, layer);
            self.links[n][layer].push(Near { dist, id: q as u32 });
        }
    }

    fn drop_edge(&mut self, a: usize, b: usize, layer: usize) {
        self.links[a][layer].retain(|x| x.id as usize != b);
        self.links[b][layer].retain(|x| x.id as usize != a);
    }

    /// Whether `a` and `b` share a neighbour on `layer`.
    fn bypass(&self, a: usize, b: usize, layer: usize) -> bool {
        let around = &self.links[a][layer];
        self.links[b][layer].iter().any(|x| x.id as usize != a && around.iter().any(|y| y.id == x.id))
    }

    /// Prefers the farthest member of `pool` that a nearer member already
    /// covers, then the farthest member, skipping nodes that would be left
    /// without neighbours. The nearest member is never dropped.
    fn choose_victim(&self, pool: &[Near], q: usize, layer: usize) -> usize {
        let droppable = |c: &Near| self.degree(c.id as usize, layer) > 1;
        let mut budget = pool.len();
        'outer: for i in (1..pool.len()).rev() {
            let c = pool[i];
            if !droppable(&c) {
                continue;
            }
            for x in &pool[..i] {
                if budget == 0 {
                    break 'outer;
                }
                budget -= 1;
                if self.dist(x.id as usize, c.id as usize) < c.dist {
                    return c.id as usize;
                }
            }
        }
        pool[1..].iter().rev().find(|c| droppable(c)).map_or(q, |c| c.id as usize)
    }

    /// Reattaches nodes that the entry point cannot reach on layer 0. Each
    /// unreachable component is linked to the nearest reachable node.
    fn reconnect(&mut self) {
        let n = self.store.len();
        let Some(entry) = self.entry else {
            return;
        };
        for _ in 0..MAX_REPAIR_ROUNDS {
            let mut seen = Visited::new(n);
            self.flood(entry as usize, &mut seen);
            let orphans: Vec<usize> = (0..n).filter(|u| !seen.contains(*u as u32)).collect();
            if orphans.is_empty() {
                return;
            }
            log::debug!("reattaching {} unreachable nodes", orphans.len());
            for u in orphans {
                if seen.contains(u as u32) {
                    continue;
                }
                let mut part = Visited::new(n);
                self.flood(u, &mut part);
                let members: Vec<usize> = (u..n).filter(|x| part.contains(*x as u32)).collect();
                let strict =
                    members.iter().find_map(|&x| self.room(x).and_then(|_| self.nearest_reachable(x, &seen, true)));
                let (x, r, safe) = match strict {
                    Some((x, r)) => (x, r, true),
                    None => match self.nearest_reachable(u, &seen, false) {
                        Some((x, r)) => (x, r, false),
                        None => continue,
                    },
                };
                self.attach(x, r.id as usize, r.dist, safe);
                self.flood(x, &mut seen);
            }
        }
    }

    /// The node nearest to `x` among those marked in `seen`. With `safe`,
    /// only nodes that can take one more edge without losing connectivity.
    fn nearest_reachable(&self, x: usize, seen: &Visited, safe: bool) -> Option<(usize, Near)> {
        let q = self.probe(x);
        let ok = |p: u32| seen.contains(p) && (!safe || self.room(p as usize).is_some());
        let near = self.candidates(q, self.params.ef_construction).into_iter().find(|c| ok(c.id));
        let near = near.or_else(|| {
            (0..self.store.len() as u32)
                .filter(|&p| ok(p))
                .map(|p| Near { dist: self.dist_q(q, p as usize), id: p })
                .min()
        });
        near.map(|r| (x, r))
    }

    /// Whether `a` can take another layer-0 edge: `Some(None)` if it has a
    /// free slot, `Some(Some(w))` if the edge to `w` can go because `a` and
    /// `w` share a neighbour.
    fn room(&self, a: usize) -> Option<Option<usize>> {
        if self.degree(a, 0) < self.params.cap(0) {
            return Some(None);
        }
        let mut list = self.links[a][0].clone();
        list.sort_unstable_by(|x, y| y.cmp(x));
        list.iter().find(|w| self.bypass(a, w.id as usize, 0)).map(|w| Some(w.id as usize))
    }

    /// Links `u` and `r` on layer 0, first making room on a full side.
    /// Unless `safe`, a side without a covered edge drops its farthest edge.
    fn attach(&mut self, u: usize, r: usize, dist: f32, safe: bool) {
        for a in [r, u] {
            match self.room(a) {
                Some(None) => {}
                Some(Some(w)) => self.drop_edge(a, w, 0),
                None if safe => return,
                None => {
                    let mut list = self.links[a][0].clone();
                    list.sort_unstable_by(|x, y| y.cmp(x));
                    match list.iter().find(|w| self.degree(w.id as usize, 0) > 1) {
                        Some(w) => self.drop_edge(a, w.id as usize, 0),
                        None => return,
                    }
                }
            }
        }
        self.links[u][0].push(Near { dist, id: r as u32 });
        self.links[r][0].push(Near { dist, id: u as u32 });
    }

    fn flood(&self, start: usize, seen: &mut Visited) {
        if !seen.insert(start as u32) {
            return;
        }
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for e in &self.links[u][0] {
                if seen.insert(e.id) {
                    queue.push_back(e.id as usize);
                }
            }
        }
    }

    /// Checks degree bounds, symmetry, layer membership, layer-0
    /// completeness and entry-point placement.
    pub fn audit(&self) -> GraphAudit {
        const LIMIT: usize = 100;
        let n = self.store.len();
        let mut audit = GraphAudit { nodes: n, ..Default::default() };
        let flag = |audit: &mut GraphAudit, msg: String| {
            if audit.violations.len() < LIMIT {
                audit.violations.push(msg);
            }
        };
        if self.levels.len() != n || self.links.len() != n {
            flag(
                &mut audit,
                format!("{} nodes but {} levels and {} link lists", n, self.levels.len(), self.links.len()),
            );
            return audit;
        }
        for (node, layers) in self.links.iter().enumerate() {
            if layers.len() != self.levels[node] as usize + 1 {
                flag(&mut audit, format!("node {node}: {} layers for level {}", layers.len(), self.levels[node]));
                continue;
            }
            for (layer, list) in layers.iter().enumerate() {
                audit.edges += list.len();
                if list.len() > self.params.cap(layer) {
                    flag(&mut audit, format!("node {node} layer {layer}: degree {} over cap", list.len()));
                }
                if layer == 0 && n > 1 && list.is_empty() {
                    flag(&mut audit, format!("node {node} has no layer-0 neighbours"));
                }
                for (i, e) in list.iter().enumerate() {
                    let t = e.id as usize;
                    if t >= n || t == node {
                        flag(&mut audit, format!("node {node} layer {layer}: bad target {t}"));
                        continue;
                    }
                    if list[..i].iter().any(|x| x.id == e.id) {
                        flag(&mut audit, format!("node {node} layer {layer}: duplicate edge to {t}"));
                    }
                    if (self.levels[t] as usize) < layer {
                        flag(&mut audit, format!("node {node} layer {layer}: target {t} is not on the layer"));
                    } else if !self.links[t][layer].iter().any(|x| x.id as usize == node) {
                        flag(&mut audit, format!("edge {node}->{t} on layer {layer} has no reverse"));
                    }
                }
            }
        }
        match self.entry {
            None if n > 0 => flag(&mut audit, "missing entry point".into()),
            Some(e) if e as usize >= n => flag(&mut audit, format!("entry point {e} out of range")),
            Some(e) => {
                let top = self.levels.iter().copied().max().unwrap_or(0) as usize;
                if self.levels[e as usize] as usize != self.max_level || self.max_level != top {
                    flag(&mut audit, format!("entry point {e} is not on the top layer {top}"));
                }
                audit.reachable = self.reachable_from(e as usize);
                let reachable = audit.reachable;
                if reachable != n {
                    flag(&mut audit, format!("only {reachable} of {n} nodes reachable on layer 0"));
                }
            }
            None => {}
        }
        audit
    }

    fn reachable_from(&self, start: usize) -> usize {
        let mut seen = Visited::new(self.store.len());
        seen.insert(start as u32);
        let mut queue = VecDeque::from([start]);
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for e in &self.links[u][0] {
                if (e.id as usize) < self.store.len() && seen.insert(e.id) {
                    count += 1;
                    queue.push_back(e.id as usize);
                }
            }
        }
        count
    }
}

impl NeighborIndex for HnswIndex {
    fn store(&self) -> &VectorStore {
        &self.store
    }

    fn search_vector(
        &self,
        query: &[f32],
        exclude: Option<u64>,
        params: &SearchParams,
    ) -> Result<Vec<CloneCandidate>, SearchError> {
        if self.store.is_empty() {
            return Ok(Vec::new());
        }
        let qnorm = self.store.check_query(query)?;
        let unit: Vec<f32> = query.iter().map(|x| (f64::from(*x) / qnorm) as f32).collect();
        let (code, scale) = quantize(&unit);
        let ef = params.ef_search.max(params.k + usize::from(exclude.is_some()));
        let ids = self.store.ids();
        let hits = self
            .candidates(Probe { code: &code, scale }, ef)
            .into_iter()
            .map(|c| (ids[c.id as usize], self.store.cosine_to(c.id as usize, query, qnorm)))
            .collect();
        Ok(rank_hits(exclude, hits, params.k, params.similarity_floor))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{ExactIndex, SearchType};
    use rand_distr::{Distribution, StandardNormal};

    pub(crate) fn random_unit(n: usize, d: usize, seed: u64) -> Vec<EmbeddingVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                EmbeddingVector { fragment_id: i as u64, values: v.iter().map(|x| (x / norm) as f32).collect() }
            })
            .collect()
    }

    fn small(m: usize, efc: usize) -> HnswParams {
        HnswParams { m, ef_construction: efc, seed: 7 }
    }

    #[test]
    fn level_rule() {
        assert_eq!(assign_level(32, 1.0), 0);
        assert_eq!(assign_level(32, (-(32f64).ln()).exp()), 1);
        assert_eq!(assign_level(32, 1.0 / 1024.0), 2);
        assert_eq!(assign_level(32, 0.5), 0);
    }

    #[test]
    fn level_distribution_matches_one_over_m() {
        let n = 100_000;
        let levels = draw_levels(n, &HnswParams::default());
        let p = 1.0 / 32.0;
        let hits = levels.iter().filter(|l| **l >= 1).count() as f64;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((hits - n as f64 * p).abs() <= 3.0 * sd, "{hits}");
    }

    #[test]
    fn empty_and_single() {
        let empty = HnswIndex::build(&[], &HnswParams::default()).unwrap();
        assert!(empty.search_vector(&[1.0, 0.0], None, &SearchParams::default()).unwrap().is_empty());
        assert!(empty.audit().is_ok());
        let one = HnswIndex::build(&random_unit(1, 8, 1), &HnswParams::default()).unwrap();
        assert_eq!(one.entry_point(), Some(0));
        assert!(one.links[0].iter().all(Vec::is_empty));
        assert!(one.audit().is_ok());
        let p = SearchParams { k: 1, similarity_floor: -1.0, ..Default::default() };
        assert!(one.search_id(0, &p).unwrap().is_empty());
    }

    #[test]
    fn audit_passes_on_256() {
        let idx = HnswIndex::build(&random_unit(256, 16, 3), &small(4, 16)).unwrap();
        let audit = idx.audit();
        assert!(audit.is_ok(), "{:?}", audit.violations);
        assert_eq!(audit.reachable, 256);
    }

    #[test]
    fn audit_passes_with_defaults() {
        let idx = HnswIndex::build(&random_unit(2000, 24, 4), &HnswParams::default()).unwrap();
        let audit = idx.audit();
        assert!(audit.is_ok(), "{:?}", audit.violations);
    }

    #[test]
    fn audit_detects_broken_symmetry() {
        let mut idx = HnswIndex::build(&random_unit(64, 8, 5), &small(4, 8)).unwrap();
        let t = idx.links[0][0][0].id as usize;
        idx.links[t][0].retain(|x| x.id != 0);
        assert!(!idx.audit().is_ok());
    }

    #[test]
    fn build_is_deterministic() {
        let v = random_unit(600, 12, 6);
        let a = HnswIndex::build(&v, &small(6, 30)).unwrap();
        let b = HnswIndex::build(&v, &small(6, 30)).unwrap();
        assert_eq!(a.links, b.links);
        assert_eq!(a.entry, b.entry);
    }

    #[test]
    fn duplicate_query_hits_duplicate() {
        let mut v = random_unit(50, 8, 8);
        v[20].values = v[3].values.clone();
        let idx = HnswIndex::build(&v, &small(4, 16)).unwrap();
        let p = SearchParams { search_type: SearchType::Hnsw, k: 1, ef_search: 10, similarity_floor: 0.0 };
        let got = idx.search_id(3, &p).unwrap();
        assert_eq!(got[0].hit_id, 20);
        assert!((got[0].similarity - 1.0).abs() < 1e-6);
    }

    #[test]
    fn full_beam_matches_exact() {
        let mut agree = 0;
        for trial in 0..100 {
            let v = random_unit(64, 16, 100 + trial);
            let h = HnswIndex::build(&v, &HnswParams { seed: trial, ..HnswParams::default() }).unwrap();
            let e = ExactIndex::new(&v).unwrap();
            let p = SearchParams { search_type: SearchType::Hnsw, k: 10, ef_search: 64, similarity_floor: -1.0 };
            let q = trial % 64;
            if h.search_id(q, &p).unwrap() == e.search_id(q, &p).unwrap() {
                agree += 1;
            }
        }
        assert!(agree >= 95, "{agree}");
    }

    #[test]
    fn rejects_bad_params() {
        assert!(HnswIndex::build(&[], &small(1, 10)).is_err());
        assert!(HnswIndex::build(&[], &small(8, 4)).is_err());
    }
}
