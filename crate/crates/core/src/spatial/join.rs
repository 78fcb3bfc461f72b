use super::{check_shape, ObjectMask, RTree, Run, SpatialError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct JoinPair {
    pub a: u32,
    pub b: u32,
    pub intersection: usize,
}

/// Overlap between two sorted run lists.
fn run_intersection(a: &[Run], b: &[Run]) -> usize {
    let (mut i, mut j, mut area) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        let (ra, rb) = (a[i], b[j]);
        if ra.y != rb.y {
            if ra.y < rb.y {
                i += 1;
            } else {
                j += 1;
            }
            continue;
        }
        let lo = ra.x_start.max(rb.x_start);
        let hi = ra.x_end.min(rb.x_end);
        if hi > lo {
            area += hi - lo;
        }
        if ra.x_end < rb.x_end {
            i += 1;
        } else {
            j += 1;
        }
    }
    area
}

/// Filter-and-refine join: bounding-box candidates from an R-tree over `b`,
/// refined to exact pixel intersections. Zero-area pairs are dropped and the
/// result is sorted by `(a, b)`.
pub fn spatial_join(a: &ObjectMask, b: &ObjectMask) -> Result<Vec<JoinPair>, SpatialError> {
    check_shape(&a.mask, &b.mask)?;
    let index = RTree::bulk_load(
        b.objects
            .iter()
            .enumerate()
            .map(|(i, o)| (o.mbb, i))
            .collect(),
    );
    let mut pairs = Vec::new();
    for oa in &a.objects {
        for &(_, bi) in index.query(&oa.mbb) {
            let ob = &b.objects[bi];
            let area = run_intersection(&oa.runs, &ob.runs);
            if area > 0 {
                pairs.push(JoinPair {
                    a: oa.id,
                    b: ob.id,
                    intersection: area,
                });
            }
        }
    }
    pairs.sort();
    Ok(pairs)
}

/// All-pairs pixel intersection, used as the reference for [`spatial_join`].
pub fn brute_force_join(a: &ObjectMask, b: &ObjectMask) -> Result<Vec<JoinPair>, SpatialError> {
    check_shape(&a.mask, &b.mask)?;
    let (w, h) = (a.width(), a.height());
    let paint = |om: &ObjectMask| {
        let mut labels = vec![u32::MAX; w * h];
        for o in &om.objects {
            for r in &o.runs {
                for x in r.x_start..r.x_end {
                    labels[r.y * w + x] = o.id;
                }
            }
        }
        labels
    };
    let (la, lb) = (paint(a), paint(b));
    let mut counts = std::collections::BTreeMap::new();
    for (&x, &y) in la.iter().zip(&lb) {
        if x != u32::MAX && y != u32::MAX {
            *counts.entry((x, y)).or_insert(0usize) += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|((a, b), intersection)| JoinPair { a, b, intersection })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::{extract_objects, Connectivity, Mask};

    #[test]
    fn identity_join() {
        let m = Mask::from_fn(10, 10, |x, y| (x < 3 && y < 3) || (x > 6 && y > 5));
        let om = extract_objects(&m, Connectivity::Eight);
        let pairs = spatial_join(&om, &om).unwrap();
        assert_eq!(pairs.len(), 2);
        for (p, o) in pairs.iter().zip(&om.objects) {
            assert_eq!((p.a, p.b, p.intersection), (o.id, o.id, o.area));
        }
    }

    #[test]
    fn l_shapes_filtered_in_refined_out() {
        // Two interlocking L shapes with overlapping boxes but no shared pixel.
        let a = Mask::from_fn(6, 6, |x, y| (x == 0 && y < 5) || (y == 4 && x < 5));
        let b = Mask::from_fn(6, 6, |x, y| (y == 0 && x >= 1) || (x == 5 && y < 6));
        let (oa, ob) = (
            extract_objects(&a, Connectivity::Four),
            extract_objects(&b, Connectivity::Four),
        );
        assert_eq!((oa.objects.len(), ob.objects.len()), (1, 1));
        assert!(oa.objects[0].mbb.intersects(&ob.objects[0].mbb));
        assert!(spatial_join(&oa, &ob).unwrap().is_empty());
        assert!(brute_force_join(&oa, &ob).unwrap().is_empty());
    }

    #[test]
    fn shape_mismatch() {
        let a = extract_objects(&Mask::empty(4, 4), Connectivity::Eight);
        let b = extract_objects(&Mask::empty(5, 4), Connectivity::Eight);
        assert!(spatial_join(&a, &b).is_err());
    }
}
