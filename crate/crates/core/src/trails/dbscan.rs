use crate::geometry::Point;
use rstar::primitives::GeomWithData;
use rstar::RTree;

/// Density clustering. Returns clusters as indices into `points`, in order
/// of discovery; noise points come back as singleton clusters.
pub fn dbscan(points: &[Point], eps: f64, min_pts: usize) -> Vec<Vec<usize>> {
    let tree: RTree<GeomWithData<[f64; 2], usize>> = RTree::bulk_load(
        points
            .iter()
            .enumerate()
            .map(|(i, p)| GeomWithData::new([p.x, p.y], i))
            .collect(),
    );
    let eps2 = eps * eps;
    let region = |i: usize| -> Vec<usize> {
        let mut n: Vec<usize> = tree
            .locate_within_distance([points[i].x, points[i].y], eps2)
            .map(|g| g.data)
            .collect();
        // rstar's iteration order is tree order; make expansion order stable
        n.sort_unstable();
        n
    };
    const UNSEEN: usize = usize::MAX;
    const NOISE: usize = usize::MAX - 1;
    let mut label = vec![UNSEEN; points.len()];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..points.len() {
        if label[i] != UNSEEN {
            continue;
        }
        let seeds = region(i);
        if seeds.len() < min_pts {
            label[i] = NOISE;
            continue;
        }
        let c = clusters.len();
        clusters.push(Vec::new());
        label[i] = c;
        let mut queue = seeds;
        let mut k = 0;
        while k < queue.len() {
            let j = queue[k];
            k += 1;
            if label[j] == NOISE {
                // border point: joins, never expands
                label[j] = c;
                continue;
            }
            if label[j] != UNSEEN {
                continue;
            }
            label[j] = c;
            let n = region(j);
            if n.len() >= min_pts {
                queue.extend(n.into_iter().filter(|&m| label[m] == UNSEEN || label[m] == NOISE));
            }
        }
    }
    for (i, &l) in label.iter().enumerate() {
        if l == NOISE {
            clusters.push(vec![i]);
        } else {
            clusters[l].push(i);
        }
    }
    clusters
}
