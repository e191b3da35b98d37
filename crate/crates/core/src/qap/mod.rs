//! Quadratic assignment: place `n` items on `m ≥ n` positions minimizing
//! `Σ flow[i][j] · cost[pos(i)][pos(j)]`, diagonal terms included.

mod brute;
mod faq;
mod lap;

pub use brute::{brute_force, BRUTE_FORCE_LIMIT};
pub use faq::{solve_faq, FaqParams};
pub use lap::solve_lap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QapInstance {
    flow: Array2<f64>,
    cost: Array2<f64>,
}

/// JSON dump format `{n, m, flow, cost}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub n: usize,
    pub m: usize,
    pub flow: Vec<Vec<f64>>,
    pub cost: Vec<Vec<f64>>,
}

fn to_array(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    let k = rows.len();
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::invalid(format!("{what} matrix must be square")));
    }
    Ok(Array2::from_shape_fn((k, k), |(i, j)| rows[i][j]))
}

impl QapInstance {
    pub fn new(flow: Array2<f64>, cost: Array2<f64>) -> Result<Self> {
        let (n, n2) = flow.dim();
        let (m, m2) = cost.dim();
        if n != n2 || m != m2 {
            return Err(Error::invalid("flow and cost must be square"));
        }
        if n > m {
            return Err(Error::invalid(format!("{n} items cannot fit on {m} positions")));
        }
        if flow.iter().chain(cost.iter()).any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::invalid("flow and cost entries must be finite and nonnegative"));
        }
        Ok(QapInstance { flow, cost })
    }

    pub fn from_rows(flow: &[Vec<f64>], cost: &[Vec<f64>]) -> Result<Self> {
        Self::new(to_array(flow, "flow")?, to_array(cost, "cost")?)
    }

    pub fn from_doc(doc: &InstanceDoc) -> Result<Self> {
        let inst = Self::from_rows(&doc.flow, &doc.cost)?;
        if inst.n() != doc.n || inst.m() != doc.m {
            return Err(Error::invalid("declared n/m do not match matrix sizes"));
        }
        Ok(inst)
    }

    pub fn to_doc(&self) -> InstanceDoc {
        let rows = |a: &Array2<f64>| a.rows().into_iter().map(|r| r.to_vec()).collect();
        InstanceDoc {
            n: self.n(),
            m: self.m(),
            flow: rows(&self.flow),
            cost: rows(&self.cost),
        }
    }

    pub fn n(&self) -> usize {
        self.flow.nrows()
    }

    pub fn m(&self) -> usize {
        self.cost.nrows()
    }

    pub fn flow(&self) -> &Array2<f64> {
        &self.flow
    }

    pub fn cost(&self) -> &Array2<f64> {
        &self.cost
    }

    /// Flow zero-padded to `m × m`; dummy items carry no flow.
    pub fn padded_flow(&self) -> Array2<f64> {
        let (n, m) = (self.n(), self.m());
        let mut padded = Array2::zeros((m, m));
        padded.slice_mut(ndarray::s![..n, ..n]).assign(&self.flow);
        padded
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `mapping[item] = position`.
    pub mapping: Vec<usize>,
    pub objective: f64,
}

pub fn objective(instance: &QapInstance, mapping: &[usize]) -> Result<f64> {
    let (n, m) = (instance.n(), instance.m());
    if mapping.len() != n {
        return Err(Error::invalid(format!(
            "mapping has {} entries for {n} items",
            mapping.len()
        )));
    }
    let mut seen = vec![false; m];
    for &p in mapping {
        if p >= m || std::mem::replace(&mut seen[p], true) {
            return Err(Error::invalid("mapping must be injective into the positions"));
        }
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let f = instance.flow[[i, j]];
            if f != 0.0 {
                total += f * instance.cost[[mapping[i], mapping[j]]];
            }
        }
    }
    Ok(total)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objective_values() {
        let inst = fixtures::three();
        assert_eq!(objective(&inst, &[0, 1, 2]).unwrap(), 26.0);
        // swapping item 2 with item 0 separates the heavy pair
        assert_eq!(
            objective(&inst, &[2, 1, 0]).unwrap(),
            2.0 * (5.0 * 4.0 + 1.0 * 4.0 + 1.0 * 1.0)
        );

        let zero = QapInstance::from_rows(&vec![vec![0.0; 3]; 3], &vec![vec![1.0; 3]; 3]).unwrap();
        assert_eq!(objective(&zero, &[2, 0, 1]).unwrap(), 0.0);

        let single = QapInstance::from_rows(
            &[vec![0.0, 1.0], vec![0.0, 0.0]],
            &[vec![0.1, 0.5, 0.9], vec![0.7, 0.2, 0.3], vec![0.0, 0.0, 0.0]],
        )
        .unwrap();
        assert_eq!(objective(&single, &[0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn objective_rejects_non_injective() {
        let inst = fixtures::three();
        assert!(objective(&inst, &[0, 0, 1]).is_err());
        assert!(objective(&inst, &[0, 1]).is_err());
        assert!(objective(&inst, &[0, 1, 7]).is_err());
    }

    #[test]
    fn instance_validation() {
        assert!(QapInstance::from_rows(&vec![vec![0.0; 3]; 3], &vec![vec![0.0; 2]; 2]).is_err());
        assert!(QapInstance::from_rows(&[vec![-1.0]], &[vec![0.0]]).is_err());
        assert!(QapInstance::from_rows(&[vec![f64::NAN]], &[vec![0.0]]).is_err());
        let doc = fixtures::three().to_doc();
        assert_eq!((doc.n, doc.m), (3, 3));
        assert_eq!(QapInstance::from_doc(&doc).unwrap(), fixtures::three());
    }
}
