//! Seed directions for pushforward, pullback and Hessian-vector products.

/// An ordered batch of seed directions.
///
/// For pushforwards and HVPs each direction matches the input shape; for
/// pullbacks each direction matches the output shape. Batch order is
/// preserved in the results.
#[derive(Debug, Clone, PartialEq)]
pub struct Seeds {
    directions: Vec<Vec<f64>>,
}

impl Seeds {
    pub fn new(directions: Vec<Vec<f64>>) -> Self {
        Seeds { directions }
    }

    pub fn single(direction: Vec<f64>) -> Self {
        Seeds {
            directions: vec![direction],
        }
    }

    /// The standard basis of dimension `n`, in index order.
    pub fn basis(n: usize) -> Self {
        let directions = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect();
        Seeds { directions }
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }
}
