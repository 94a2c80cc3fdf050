use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::DataMatrices;

/// Pools all replicate columns and reassigns them to groups of the
/// original sizes uniformly at random.
pub fn permute_sample_labels<R: Rng + ?Sized>(data: &DataMatrices, rng: &mut R) -> DataMatrices {
    let (mx, my) = (data.m_x(), data.m_y());
    let mut cols: Vec<usize> = (0..mx + my).collect();
    cols.shuffle(rng);
    let pooled = DMatrix::from_fn(data.n_vertices(), mx + my, |v, c| {
        if c < mx {
            data.x()[(v, c)]
        } else {
            data.y()[(v, c - mx)]
        }
    });
    let x = pooled.select_columns(&cols[..mx]);
    let y = pooled.select_columns(&cols[mx..]);
    DataMatrices::new(x, y).expect("shapes are preserved")
}

/// Applies one random row permutation to both groups.
pub fn permute_vertices<R: Rng + ?Sized>(data: &DataMatrices, rng: &mut R) -> DataMatrices {
    let mut rows: Vec<usize> = (0..data.n_vertices()).collect();
    rows.shuffle(rng);
    data.restrict_rows(&rows).expect("a permutation stays in range")
}
