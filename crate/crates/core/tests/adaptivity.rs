use latentdrive::adaptivity::{dbscan, select_outliers, ClusterLabeling, DbscanParams, Label, OutlierCaps};
use latentdrive::dynamics::FrameRef;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blob(rng: &mut ChaCha8Rng, centre: [f64; 2], r: f64, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let d = r * rng.random_range(0.0f64..1.0).sqrt();
            vec![centre[0] + d * a.cos(), centre[1] + d * a.sin()]
        })
        .collect()
}

#[test]
fn two_separated_blobs_give_two_clusters() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut pts = blob(&mut rng, [0.0, 0.0], 0.1, 10);
    pts.extend(blob(&mut rng, [5.0, 0.0], 0.1, 10));
    let l = dbscan(&pts, &DbscanParams { eps: 0.5, min_pts: 4 }).unwrap();
    assert_eq!(l.cluster_count(), 2);
    assert_eq!(l.noise_count(), 0);
    assert_eq!(l.cluster_sizes, vec![10, 10]);
}

#[test]
fn permutation_keeps_core_and_cluster_partition() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let mut pts = Vec::new();
        for c in 0..4 {
            pts.extend(blob(&mut rng, [3.0 * c as f64, (c % 2) as f64], 0.8, 40));
        }
        pts.extend((0..20).map(|_| vec![rng.random_range(-2.0..12.0), rng.random_range(-2.0..3.0)]));
        let p = DbscanParams { eps: 0.35, min_pts: 4 };
        let base = dbscan(&pts, &p).unwrap();
        let mut perm: Vec<usize> = (0..pts.len()).collect();
        perm.shuffle(&mut rng);
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let other = dbscan(&shuffled, &p).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(base.core[i], other.core[k]);
            // canonical ordering makes even the ids agree
            assert_eq!(base.labels[i], other.labels[k]);
        }
        let sizes: usize = base.cluster_sizes.iter().sum();
        assert_eq!(sizes + base.noise_count(), pts.len());
    }
}

#[test]
fn outlier_list_sorted_by_density() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 400;
    let labels: Vec<Label> = (0..n).map(|_| if rng.random_bool(0.5) { Label::Noise } else { Label::Cluster(rng.random_range(0..30)) }).collect();
    let density: Vec<usize> = (0..n).map(|_| rng.random_range(1..20)).collect();
    let l = ClusterLabeling::from_labels(labels, density).unwrap();
    let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
    let refs: Vec<FrameRef> = (0..n).map(|i| FrameRef { task: i as u64, step: 0 }).collect();
    let o = select_outliers(&l, &pts, &refs, OutlierCaps::default()).unwrap();
    assert!(o.len() <= 150);
    assert!(o.entries.windows(2).all(|w| w[0].density <= w[1].density));
}
