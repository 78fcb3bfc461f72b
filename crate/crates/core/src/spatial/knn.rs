use super::SegObject;

/// Nearest-neighbour query by Euclidean centroid distance. At least one of
/// `k` and `radius` should be set; with neither, every candidate is returned.
#[derive(Debug, Clone, Copy, Default)]
pub struct KnnQuery {
    pub k: Option<usize>,
    pub radius: Option<f64>,
    /// Candidate id to skip, typically the query object itself.
    pub exclude: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u32,
    pub distance: f64,
}

/// Candidates ordered by distance from `query`, ties broken by id.
pub fn knn(query: (f64, f64), candidates: &[SegObject], q: KnnQuery) -> Vec<Neighbor> {
    let mut found: Vec<Neighbor> = candidates
        .iter()
        .filter(|o| Some(o.id) != q.exclude)
        .map(|o| Neighbor {
            id: o.id,
            distance: (o.centroid.0 - query.0).hypot(o.centroid.1 - query.1),
        })
        .filter(|n| q.radius.is_none_or(|r| n.distance <= r))
        .collect();
    found.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));
    if let Some(k) = q.k {
        found.truncate(k);
    }
    found
}
