use crate::geometry::GridPos;
use rustc_hash::FxHashMap;

/// Above this many cells the planners switch to hashed node storage so a
/// short search on a huge map does not allocate per-cell arrays.
const DENSE_LIMIT: usize = 1 << 22;

pub(crate) enum NodeStore {
    Dense {
        g: Vec<f64>,
        parent: Vec<u32>,
        closed: Vec<bool>,
    },
    Sparse(FxHashMap<u32, (f64, u32, bool)>),
}

impl NodeStore {
    pub fn new(width: usize, height: usize) -> Self {
        let n = width * height;
        if n <= DENSE_LIMIT {
            NodeStore::Dense {
                g: vec![f64::INFINITY; n],
                parent: vec![u32::MAX; n],
                closed: vec![false; n],
            }
        } else {
            NodeStore::Sparse(FxHashMap::default())
        }
    }

    pub fn g(&self, i: u32) -> f64 {
        match self {
            NodeStore::Dense { g, .. } => g[i as usize],
            NodeStore::Sparse(m) => m.get(&i).map_or(f64::INFINITY, |e| e.0),
        }
    }

    pub fn closed(&self, i: u32) -> bool {
        match self {
            NodeStore::Dense { closed, .. } => closed[i as usize],
            NodeStore::Sparse(m) => m.get(&i).is_some_and(|e| e.2),
        }
    }

    pub fn parent(&self, i: u32) -> u32 {
        match self {
            NodeStore::Dense { parent, .. } => parent[i as usize],
            NodeStore::Sparse(m) => m.get(&i).map_or(u32::MAX, |e| e.1),
        }
    }

    pub fn set(&mut self, i: u32, gv: f64, p: u32) {
        match self {
            NodeStore::Dense { g, parent, .. } => {
                g[i as usize] = gv;
                parent[i as usize] = p;
            }
            NodeStore::Sparse(m) => {
                let e = m.entry(i).or_insert((f64::INFINITY, u32::MAX, false));
                e.0 = gv;
                e.1 = p;
            }
        }
    }

    pub fn close(&mut self, i: u32) {
        match self {
            NodeStore::Dense { closed, .. } => closed[i as usize] = true,
            NodeStore::Sparse(m) => {
                if let Some(e) = m.get_mut(&i) {
                    e.2 = true;
                }
            }
        }
    }

    /// Parent chain from the root (its own parent) to `end`.
    pub fn trace(&self, end: u32, pos: impl Fn(u32) -> GridPos) -> Vec<GridPos> {
        let mut out = vec![pos(end)];
        let mut c = end;
        loop {
            let p = self.parent(c);
            if p == c {
                break;
            }
            out.push(pos(p));
            c = p;
        }
        out.reverse();
        out
    }
}
