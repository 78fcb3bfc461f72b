use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_shape, Mask, SpatialError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Dice,
    Jaccard,
    #[serde(alias = "overlap")]
    OverlapRatio,
    PixelDiff,
    /// `|test| - |reference|`, the signed counterpart of `PixelDiff`.
    SignedAreaDiff,
}

impl MetricKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricKind::Dice => "dice",
            MetricKind::Jaccard => "jaccard",
            MetricKind::OverlapRatio => "overlap-ratio",
            MetricKind::PixelDiff => "pixel-diff",
            MetricKind::SignedAreaDiff => "signed-area-diff",
        }
    }

    /// Whether larger values mean closer agreement with the reference.
    pub fn higher_is_better(&self) -> bool {
        matches!(
            self,
            MetricKind::Dice | MetricKind::Jaccard | MetricKind::OverlapRatio
        )
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "dice" => MetricKind::Dice,
            "jaccard" => MetricKind::Jaccard,
            "overlap" | "overlap-ratio" => MetricKind::OverlapRatio,
            "pixel-diff" => MetricKind::PixelDiff,
            "signed-area-diff" => MetricKind::SignedAreaDiff,
            other => return Err(format!("unknown metric `{other}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricValue {
    pub kind: MetricKind,
    pub value: f64,
}

struct Counts {
    a: usize,
    b: usize,
    both: usize,
}

fn counts(a: &Mask, b: &Mask) -> Result<Counts, SpatialError> {
    check_shape(a, b)?;
    let mut c = Counts {
        a: 0,
        b: 0,
        both: 0,
    };
    for (&pa, &pb) in a.pixels().iter().zip(b.pixels()) {
        let (fa, fb) = (pa != 0, pb != 0);
        c.a += fa as usize;
        c.b += fb as usize;
        c.both += (fa && fb) as usize;
    }
    Ok(c)
}

/// `2|A∩B| / (|A|+|B|)`; two empty masks agree perfectly (1.0).
pub fn dice(a: &Mask, b: &Mask) -> Result<MetricValue, SpatialError> {
    let c = counts(a, b)?;
    let value = if c.a + c.b == 0 {
        1.0
    } else {
        2.0 * c.both as f64 / (c.a + c.b) as f64
    };
    Ok(MetricValue {
        kind: MetricKind::Dice,
        value,
    })
}

/// `|A∩B| / |A∪B|`; two empty masks give 1.0.
pub fn jaccard(a: &Mask, b: &Mask) -> Result<MetricValue, SpatialError> {
    let c = counts(a, b)?;
    let union = c.a + c.b - c.both;
    let value = if union == 0 {
        1.0
    } else {
        c.both as f64 / union as f64
    };
    Ok(MetricValue {
        kind: MetricKind::Jaccard,
        value,
    })
}

/// `|test ∩ reference| / |reference|`.
pub fn overlap_ratio(test: &Mask, reference: &Mask) -> Result<MetricValue, SpatialError> {
    let c = counts(test, reference)?;
    if c.b == 0 {
        return Err(SpatialError::UndefinedMetric(
            "overlap ratio with an empty reference".into(),
        ));
    }
    Ok(MetricValue {
        kind: MetricKind::OverlapRatio,
        value: c.both as f64 / c.b as f64,
    })
}

/// Number of pixels labeled differently (symmetric difference).
pub fn pixel_diff(a: &Mask, b: &Mask) -> Result<MetricValue, SpatialError> {
    let c = counts(a, b)?;
    Ok(MetricValue {
        kind: MetricKind::PixelDiff,
        value: (c.a + c.b - 2 * c.both) as f64,
    })
}

pub fn signed_area_diff(test: &Mask, reference: &Mask) -> Result<MetricValue, SpatialError> {
    let c = counts(test, reference)?;
    Ok(MetricValue {
        kind: MetricKind::SignedAreaDiff,
        value: c.a as f64 - c.b as f64,
    })
}

/// Dispatches on `kind`; `a` is the test mask and `b` the reference.
pub fn compare(kind: MetricKind, a: &Mask, b: &Mask) -> Result<MetricValue, SpatialError> {
    match kind {
        MetricKind::Dice => dice(a, b),
        MetricKind::Jaccard => jaccard(a, b),
        MetricKind::OverlapRatio => overlap_ratio(a, b),
        MetricKind::PixelDiff => pixel_diff(a, b),
        MetricKind::SignedAreaDiff => signed_area_diff(a, b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square(x0: usize, y0: usize, side: usize) -> Mask {
        Mask::from_fn(8, 8, |x, y| {
            (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y)
        })
    }

    #[test]
    fn overlapping_squares() {
        let (a, b) = (square(0, 0, 2), square(1, 1, 2));
        assert_eq!(dice(&a, &b).unwrap().value, 0.25);
        assert_eq!(jaccard(&a, &b).unwrap().value, 1.0 / 7.0);
        assert_eq!(overlap_ratio(&b, &a).unwrap().value, 0.25);
        assert_eq!(pixel_diff(&a, &b).unwrap().value, 6.0);
        assert_eq!(signed_area_diff(&a, &b).unwrap().value, 0.0);
    }

    #[test]
    fn identity_and_disjoint() {
        let a = square(2, 2, 3);
        assert_eq!(dice(&a, &a).unwrap().value, 1.0);
        assert_eq!(jaccard(&a, &a).unwrap().value, 1.0);
        assert_eq!(overlap_ratio(&a, &a).unwrap().value, 1.0);
        assert_eq!(pixel_diff(&a, &a).unwrap().value, 0.0);
        let far = square(6, 6, 2);
        assert_eq!(dice(&a, &far).unwrap().value, 0.0);
        assert_eq!(pixel_diff(&a, &a.complement()).unwrap().value, 64.0);
        assert_eq!(overlap_ratio(&square(0, 0, 8), &a).unwrap().value, 1.0);
    }

    #[test]
    fn empty_masks() {
        let e = Mask::empty(8, 8);
        assert_eq!(dice(&e, &e).unwrap().value, 1.0);
        assert_eq!(jaccard(&e, &e).unwrap().value, 1.0);
        assert!(matches!(
            overlap_ratio(&square(0, 0, 2), &e),
            Err(SpatialError::UndefinedMetric(_))
        ));
        assert_eq!(dice(&e, &square(0, 0, 2)).unwrap().value, 0.0);
    }

    #[test]
    fn shape_mismatch() {
        assert!(matches!(
            dice(&Mask::empty(3, 3), &Mask::empty(3, 4)),
            Err(SpatialError::ShapeMismatch { .. })
        ));
        assert!(pixel_diff(&Mask::empty(3, 3), &Mask::empty(4, 3)).is_err());
    }

    #[test]
    fn metric_names() {
        for k in [
            MetricKind::Dice,
            MetricKind::Jaccard,
            MetricKind::OverlapRatio,
            MetricKind::PixelDiff,
            MetricKind::SignedAreaDiff,
        ] {
            assert_eq!(k.as_str().parse::<MetricKind>().unwrap(), k);
        }
        assert_eq!(
            "overlap".parse::<MetricKind>().unwrap(),
            MetricKind::OverlapRatio
        );
        assert!("hausdorff".parse::<MetricKind>().is_err());
    }

    fn arb_pair() -> impl Strategy<Value = (Mask, Mask)> {
        (1usize..30, 1usize..30, any::<u64>(), any::<u64>()).prop_map(|(w, h, s1, s2)| {
            let gen = |mut s: u64| {
                Mask::from_fn(w, h, move |_, _| {
                    s = s
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    (s >> 62) == 0
                })
            };
            (gen(s1), gen(s2))
        })
    }

    proptest! {
        #[test]
        fn metric_identities((a, b) in arb_pair()) {
            let d = dice(&a, &b).unwrap().value;
            let j = jaccard(&a, &b).unwrap().value;
            prop_assert_eq!(d, dice(&b, &a).unwrap().value);
            prop_assert_eq!(j, jaccard(&b, &a).unwrap().value);
            prop_assert_eq!(pixel_diff(&a, &b).unwrap().value, pixel_diff(&b, &a).unwrap().value);
            prop_assert!((0.0..=1.0).contains(&d) && (0.0..=1.0).contains(&j));
            prop_assert!((j - d / (2.0 - d)).abs() < 1e-12);
            prop_assert!(j <= d);
            if j == d {
                prop_assert!(d == 0.0 || d == 1.0);
            }
            let pd = pixel_diff(&a, &b).unwrap().value;
            prop_assert!(pd >= 0.0 && pd <= (a.width() * a.height()) as f64);
        }
    }
}
