//! Connectivity, silhouette and Dunn index on a small hand-checkable example.

use ndarray::array;
use occur_solar::clustering::{pairwise_distances, Method, Partition};
use occur_solar::validity::score_all;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let x = array![[0.0], [1.0], [10.0], [11.0]];
    let dm = pairwise_distances(&x);
    for (name, labels) in [("{0,1},{10,11}", vec![0, 0, 1, 1]), ("{0,10},{1,11}", vec![0, 1, 0, 1])] {
        let p = Partition { method: Method::KMeans, k: 2, labels, centroids: None, medoids: None, objective: 0.0 };
        for n_b in [1, 2] {
            let s = score_all(&p, &dm, n_b)?;
            println!("{name}  n_b={n_b}: conn {:.3}  silh {:.5}  dunn {:.4}", s.conn, s.silh, s.dunn);
        }
    }
    Ok(())
}
