//! Brute-force reference implementations shared by the integration suites.
//! None of these call into the clustering code they are checked against.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use matmap::geometry::{Point3, PointCloud};
use matmap::voxmap::{BBox3D, Connectivity, MaterialLabel};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random clustering problem: lumpy cloud, a few boxes, random adjacency.
#[derive(Debug, Clone)]
pub struct Instance {
    pub points: Vec<Point3<f64>>,
    pub boxes: Vec<BBox3D<f64>>,
    pub connectivity: Connectivity,
    pub origin: Point3<f64>,
}

impl Instance {
    pub fn cloud(&self) -> PointCloud<f64> {
        PointCloud::from_points(self.points.clone()).unwrap()
    }
}

pub fn random_material(rng: &mut impl Rng) -> MaterialLabel {
    MaterialLabel::ALL[rng.gen_range(0..MaterialLabel::COUNT)]
}

pub fn random_box(rng: &mut impl Rng, id: u32, extent: f64) -> BBox3D<f64> {
    let c = [0; 3].map(|_| rng.gen_range(0.0..extent));
    let h = [0; 3].map(|_| rng.gen_range(0.05..extent * 0.4));
    BBox3D::new(
        Point3::new(c[0] - h[0], c[1] - h[1], c[2] - h[2]),
        Point3::new(c[0] + h[0], c[1] + h[1], c[2] + h[2]),
        random_material(rng),
        id,
    )
    .unwrap()
}

pub fn random_instance(rng: &mut impl Rng, max_points: usize) -> Instance {
    let extent = 2.0;
    let n = rng.gen_range(1..=max_points);
    let blobs: Vec<([f64; 3], f64)> = (0..rng.gen_range(1..=6))
        .map(|_| ([0; 3].map(|_| rng.gen_range(0.0..extent)), rng.gen_range(0.05..0.5)))
        .collect();
    let points = (0..n)
        .map(|_| {
            let (c, r) = blobs[rng.gen_range(0..blobs.len())];
            Point3::new(
                c[0] + rng.gen_range(-r..r),
                c[1] + rng.gen_range(-r..r),
                c[2] + rng.gen_range(-r..r),
            )
        })
        .collect();
    let boxes = (0..rng.gen_range(1..=5)).map(|i| random_box(rng, i, extent)).collect();
    let connectivity = [Connectivity::Six, Connectivity::Eighteen, Connectivity::TwentySix][rng.gen_range(0..3)];
    let origin = Point3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
    Instance {
        points,
        boxes,
        connectivity,
        origin,
    }
}

pub fn cell_of(p: &Point3<f64>, origin: &Point3<f64>, s: f64) -> [i64; 3] {
    [
        ((p.x - origin.x) / s).floor() as i64,
        ((p.y - origin.y) / s).floor() as i64,
        ((p.z - origin.z) / s).floor() as i64,
    ]
}

fn dist2_to_box(p: &Point3<f64>, b: &BBox3D<f64>) -> f64 {
    let axis = |v: f64, lo: f64, hi: f64| {
        let d = (lo - v).max(v - hi).max(0.0);
        d * d
    };
    axis(p.x, b.min.x, b.max.x) + axis(p.y, b.min.y, b.max.y) + axis(p.z, b.min.z, b.max.z)
}

/// Exhaustive nearest box; ties toward the smallest box id.
pub fn nearest_box(p: &Point3<f64>, boxes: &[BBox3D<f64>]) -> usize {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| {
        dist2_to_box(p, &boxes[a])
            .partial_cmp(&dist2_to_box(p, &boxes[b]))
            .unwrap()
            .then(boxes[a].box_id.cmp(&boxes[b].box_id))
    });
    order[0]
}

pub fn adjacent(a: [i64; 3], b: [i64; 3], conn: Connectivity) -> bool {
    let d = [0, 1, 2].map(|k| (a[k] - b[k]).abs());
    if d == [0; 3] || d.iter().any(|&v| v > 1) {
        return false;
    }
    let n: i64 = d.iter().sum();
    match conn {
        Connectivity::Six => n == 1,
        Connectivity::Eighteen => n <= 2,
        Connectivity::TwentySix => true,
    }
}

/// Single-scale components by breadth-first flood fill over occupied cells,
/// linking adjacent cells whose nearest-box materials agree. Returns point
/// labels and the material of each component.
pub fn flood_fill(
    points: &[Point3<f64>],
    origin: &Point3<f64>,
    s: f64,
    conn: Connectivity,
    boxes: &[BBox3D<f64>],
) -> (Vec<usize>, Vec<MaterialLabel>) {
    let mut cells: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        cells.entry(cell_of(p, origin, s)).or_default().push(i);
    }
    let keys: Vec<[i64; 3]> = cells.keys().copied().collect();
    let label: HashMap<[i64; 3], MaterialLabel> = keys
        .iter()
        .map(|&k| {
            let c = Point3::new(
                origin.x + (k[0] as f64 + 0.5) * s,
                origin.y + (k[1] as f64 + 0.5) * s,
                origin.z + (k[2] as f64 + 0.5) * s,
            );
            (k, boxes[nearest_box(&c, boxes)].material)
        })
        .collect();
    let mut comp: HashMap<[i64; 3], usize> = HashMap::new();
    let mut materials = Vec::new();
    for &start in &keys {
        if comp.contains_key(&start) {
            continue;
        }
        let id = materials.len();
        materials.push(label[&start]);
        comp.insert(start, id);
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(k) = queue.pop_front() {
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let n = [k[0] + dx, k[1] + dy, k[2] + dz];
                        if cells.contains_key(&n)
                            && !comp.contains_key(&n)
                            && adjacent(k, n, conn)
                            && label[&n] == label[&k]
                        {
                            comp.insert(n, id);
                            queue.push_back(n);
                        }
                    }
                }
            }
        }
    }
    let labels = points.iter().map(|p| comp[&cell_of(p, origin, s)]).collect();
    (labels, materials)
}

/// The merge rule by direct transitive closure: two finest components are
/// related when they share a material and some coarse component touches
/// both; result is the closure of that relation.
pub fn multi_scale(
    points: &[Point3<f64>],
    origin: &Point3<f64>,
    scales: &[f64],
    conn: Connectivity,
    boxes: &[BBox3D<f64>],
) -> Vec<usize> {
    let per: Vec<(Vec<usize>, Vec<MaterialLabel>)> =
        scales.iter().map(|&s| flood_fill(points, origin, s, conn, boxes)).collect();
    let (base, base_mat) = per.last().unwrap();
    let nb = base_mat.len();
    let touched: Vec<Vec<BTreeSet<usize>>> = per[..per.len() - 1]
        .iter()
        .map(|(coarse, _)| {
            let mut t = vec![BTreeSet::new(); nb];
            for (i, &b) in base.iter().enumerate() {
                t[b].insert(coarse[i]);
            }
            t
        })
        .collect();
    let mut related = vec![vec![false; nb]; nb];
    for a in 0..nb {
        for b in 0..nb {
            related[a][b] = a == b
                || (base_mat[a] == base_mat[b] && touched.iter().any(|t| !t[a].is_disjoint(&t[b])));
        }
    }
    // Closure by repeated relaxation until nothing changes.
    let mut group: Vec<usize> = (0..nb).collect();
    loop {
        let mut changed = false;
        for a in 0..nb {
            for b in 0..nb {
                if related[a][b] && group[b] < group[a] {
                    group[a] = group[b];
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    base.iter().map(|&b| group[b]).collect()
}

/// Whether two labelings induce the same partition.
pub fn same_partition(a: &[usize], b: &[Option<u32>]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd: HashMap<usize, u32> = HashMap::new();
    let mut bwd: HashMap<u32, usize> = HashMap::new();
    for (&x, y) in a.iter().zip(b) {
        let Some(y) = *y else { return false };
        if *fwd.entry(x).or_insert(y) != y || *bwd.entry(y).or_insert(x) != x {
            return false;
        }
    }
    true
}
