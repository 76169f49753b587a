use alloc::vec::Vec;

use super::accuracy;

/// Label of the Euclidean-nearest training row; ties go to the lowest row.
pub fn knn1_predict(train_x: &[Vec<f64>], train_y: &[usize], query: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, row) in train_x.iter().enumerate() {
        let d: f64 = row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.0 {
            best = (d, i);
        }
    }
    train_y[best.1]
}

pub fn knn1_accuracy(train_x: &[Vec<f64>], train_y: &[usize], test_x: &[Vec<f64>], test_y: &[usize]) -> f64 {
    let pred: Vec<usize> = test_x.iter().map(|q| knn1_predict(train_x, train_y, q)).collect();
    accuracy(&pred, test_y)
}
