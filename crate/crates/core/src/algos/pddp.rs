use nalgebra::{DMatrix, DVector};

use super::kmeans::{kmeans_fit, Init, KMeansOptions};
use super::{check_k, Clustering, Metric, Source};
use crate::error::Result;
use crate::linalg;

struct Leaf {
    members: Vec<usize>,
    scatter: f64,
}

fn gather(data: &DMatrix<f64>, members: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let mut sub = DMatrix::zeros(data.nrows(), members.len());
    for (dst, &src) in members.iter().enumerate() {
        sub.set_column(dst, &data.column(src));
    }
    let mean = sub.column_mean();
    for mut col in sub.column_iter_mut() {
        col -= &mean;
    }
    (sub, mean)
}

fn leaf(data: &DMatrix<f64>, members: Vec<usize>) -> Leaf {
    let (centered, _) = gather(data, &members);
    Leaf {
        scatter: centered.norm_squared(),
        members,
    }
}

/// Splits by the sign of the projection onto the first principal direction.
/// The nonnegative side comes first. `None` when either side would be empty.
fn bisect(data: &DMatrix<f64>, members: &[usize]) -> Result<Option<(Vec<usize>, Vec<usize>)>> {
    let (c, _) = gather(data, members);
    let (d, s) = c.shape();
    let mut u: Vec<f64> = if d == 1 {
        vec![1.0]
    } else if d <= s {
        let (_, vecs) = linalg::lanczos_top(|v| &c * c.tr_mul(v), d, 1, 1e-12, 0x9dd9)?;
        vecs.column(0).iter().copied().collect()
    } else {
        let (_, vecs) = linalg::lanczos_top(|v| c.tr_mul(&(&c * v)), s, 1, 1e-12, 0x9dd9)?;
        let u = &c * vecs.column(0);
        let norm = u.norm();
        u.iter().map(|x| x / norm).collect()
    };
    linalg::orient(&mut u);
    let u = DVector::from_vec(u);
    let proj = c.tr_mul(&u);
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (&i, p) in members.iter().zip(proj.iter()) {
        if *p >= 0.0 {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Ok(None);
    }
    Ok(Some((pos, neg)))
}

/// Principal direction divisive partitioning.
///
/// Starting from one leaf holding every observation, repeatedly bisects the
/// leaf with the largest scatter (ties to the lowest leaf index) until `k`
/// leaves exist. The nonnegative half keeps the parent's slot and the other
/// half is appended. Leaves that cannot split are passed over; if none can,
/// the result has fewer than `k` clusters.
pub fn pddp(data: &DMatrix<f64>, k: usize) -> Result<Clustering> {
    let n = data.ncols();
    check_k(k, n)?;
    let mut leaves = vec![leaf(data, (0..n).collect())];
    let mut frozen = vec![false];
    while leaves.len() < k {
        let mut order: Vec<usize> = (0..leaves.len())
            .filter(|&i| !frozen[i] && leaves[i].scatter > 0.0)
            .collect();
        order.sort_by(|&a, &b| {
            leaves[b]
                .scatter
                .total_cmp(&leaves[a].scatter)
                .then(a.cmp(&b))
        });
        let mut split = false;
        for i in order {
            match bisect(data, &leaves[i].members)? {
                Some((pos, neg)) => {
                    leaves[i] = leaf(data, pos);
                    leaves.push(leaf(data, neg));
                    frozen.push(false);
                    split = true;
                    break;
                }
                None => frozen[i] = true,
            }
        }
        if !split {
            break;
        }
    }
    let mut labels = vec![0usize; n];
    for (id, l) in leaves.iter().enumerate() {
        for &i in &l.members {
            labels[i] = id;
        }
    }
    Ok(Clustering::from_labels(
        &labels,
        Source {
            algorithm: "pddp".into(),
            requested_k: k,
            ..Source::default()
        },
    ))
}

/// PDDP followed by Lloyd iterations started from the PDDP centroids.
/// Deterministic; an early-stopped PDDP hands over fewer centroids and the
/// shortfall carries through.
pub fn pddp_seeded_kmeans(data: &DMatrix<f64>, k: usize, metric: Metric) -> Result<Clustering> {
    let start = pddp(data, k)?;
    let centroids = start.centroids(data);
    let fit = kmeans_fit(
        data,
        centroids.ncols(),
        metric,
        Init::Centroids(&centroids),
        &KMeansOptions::default(),
    )?;
    let mut out = fit.clustering;
    out.source = Source {
        algorithm: "pddp-kmeans".into(),
        requested_k: k,
        ..Source::default()
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, points.len(), points)
    }

    #[test]
    fn first_split_at_mean() {
        let c = pddp(&line(&[0.0, 1.0, 10.0, 11.0]), 2).unwrap();
        let want = Clustering::from_labels(&[0, 0, 1, 1], Source::default());
        assert!(c.same_partition(&want));
    }

    #[test]
    fn scatter_ties_go_to_lowest_leaf() {
        // after the first split the leaves are [{10,11}, {0,1}], both with
        // scatter 0.5; leaf 0 splits next, then leaf 1
        let x = line(&[0.0, 1.0, 10.0, 11.0]);
        let three = pddp(&x, 3).unwrap();
        let want = Clustering::from_labels(&[0, 0, 1, 2], Source::default());
        assert!(three.same_partition(&want), "{:?}", three.assignment());
        let four = pddp(&x, 4).unwrap();
        assert_eq!(four.k(), 4);
    }

    #[test]
    fn identical_points_stop_early() {
        let c = pddp(&line(&[3.0, 3.0, 3.0]), 2).unwrap();
        assert_eq!(c.k(), 1);
        assert_eq!(c.shortfall(), 1);
    }

    #[test]
    fn deterministic_in_higher_dimension() {
        let x = DMatrix::from_fn(5, 40, |i, j| {
            ((i * 7 + j * 13) % 11) as f64 + (j / 10) as f64 * 5.0
        });
        let a = pddp(&x, 6).unwrap();
        let b = pddp(&x, 6).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.k(), 6);
        // wide branch: more features than members
        let w = DMatrix::from_fn(50, 8, |i, j| ((i * 3 + j * 5) % 7) as f64);
        assert_eq!(pddp(&w, 3).unwrap().k(), 3);
    }

    #[test]
    fn seeded_kmeans_keeps_separated_optimum() {
        let x = line(&[0.0, 1.0, 10.0, 11.0]);
        let c = pddp_seeded_kmeans(&x, 2, Metric::Euclidean).unwrap();
        assert!(c.same_partition(&pddp(&x, 2).unwrap()));
        let short = pddp_seeded_kmeans(&line(&[2.0, 2.0, 2.0]), 3, Metric::Euclidean).unwrap();
        assert_eq!(short.k(), 1);
        assert_eq!(short.shortfall(), 2);
    }
}
