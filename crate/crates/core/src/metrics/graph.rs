//! Heavy-atom molecular graphs and isomorphism enumeration.

use crate::block::BlockMolecule;

#[derive(Debug, Clone, PartialEq)]
pub struct MolGraph {
    pub species: Vec<u8>,
    pub adj: Vec<Vec<usize>>,
}

impl MolGraph {
    /// Hydrogen-free graph of `mol`; when `mol` carries no bonds, those of
    /// `fallback` are borrowed (same entity implies same atom order).
    pub fn heavy(mol: &BlockMolecule, fallback: Option<&BlockMolecule>) -> MolGraph {
        let heavy = mol.without_hydrogens();
        let bonds = match fallback {
            Some(f) if heavy.bonds.is_empty() => {
                let fh = f.without_hydrogens();
                if fh.species == heavy.species {
                    fh.bonds
                } else {
                    heavy.bonds
                }
            }
            _ => heavy.bonds,
        };
        let mut adj = vec![Vec::new(); heavy.species.len()];
        for (a, b, _) in bonds {
            if a != b && !adj[a].contains(&b) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        MolGraph {
            species: heavy.species,
            adj,
        }
    }

    pub fn len(&self) -> usize {
        self.species.len()
    }

    pub fn is_empty(&self) -> bool {
        self.species.is_empty()
    }

    fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(&b)
    }
}

/// Isomorphisms found by [`isomorphisms`]; `mappings[k][i]` is the atom of
/// the second graph matched to atom `i` of the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Isomorphisms {
    pub mappings: Vec<Vec<usize>>,
    /// The search stopped at the budget before finishing.
    pub truncated: bool,
}

/// Visiting order: breadth-first from the rarest, most connected atom so
/// that every later atom has a mapped neighbour to constrain it.
fn search_order(g: &MolGraph) -> Vec<usize> {
    let n = g.len();
    let freq = |z: u8| g.species.iter().filter(|&&s| s == z).count();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let root = (0..n)
            .filter(|&i| !seen[i])
            .min_by_key(|&i| (freq(g.species[i]), usize::MAX - g.adj[i].len(), i))
            .expect("unvisited atom");
        seen[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &j in &g.adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    order
}

struct Search<'a> {
    a: &'a MolGraph,
    b: &'a MolGraph,
    order: Vec<usize>,
    map: Vec<usize>,
    used: Vec<bool>,
    out: Vec<Vec<usize>>,
    budget: usize,
    steps: usize,
    truncated: bool,
}

impl Search<'_> {
    fn consistent(&self, depth: usize, ai: usize, bj: usize) -> bool {
        if self.a.species[ai] != self.b.species[bj] || self.a.adj[ai].len() != self.b.adj[bj].len() {
            return false;
        }
        self.order[..depth]
            .iter()
            .all(|&prev| self.a.adjacent(ai, prev) == self.b.adjacent(bj, self.map[prev]))
    }

    fn run(&mut self, depth: usize) {
        if self.truncated {
            return;
        }
        self.steps += 1;
        if self.out.len() >= self.budget || self.steps > self.budget.saturating_mul(1000) {
            self.truncated = true;
            return;
        }
        if depth == self.order.len() {
            self.out.push(self.map.clone());
            return;
        }
        let ai = self.order[depth];
        for bj in 0..self.b.len() {
            if self.used[bj] || !self.consistent(depth, ai, bj) {
                continue;
            }
            self.map[ai] = bj;
            self.used[bj] = true;
            self.run(depth + 1);
            self.used[bj] = false;
            if self.truncated {
                return;
            }
        }
    }
}

/// All species- and bond-preserving bijections from `a` to `b`, up to
/// `budget` of them.
pub fn isomorphisms(a: &MolGraph, b: &MolGraph, budget: usize) -> Isomorphisms {
    let mut sa = a.species.clone();
    let mut sb = b.species.clone();
    sa.sort_unstable();
    sb.sort_unstable();
    let edges = |g: &MolGraph| g.adj.iter().map(Vec::len).sum::<usize>();
    if sa != sb || edges(a) != edges(b) {
        return Isomorphisms {
            mappings: Vec::new(),
            truncated: false,
        };
    }
    let mut s = Search {
        a,
        b,
        order: search_order(a),
        map: vec![usize::MAX; a.len()],
        used: vec![false; b.len()],
        out: Vec::new(),
        budget: budget.max(1),
        steps: 0,
        truncated: false,
    };
    s.run(0);
    Isomorphisms {
        mappings: s.out,
        truncated: s.truncated,
    }
}
