use super::{objective, Assignment, QapInstance};
use crate::error::{Error, Result};

/// Largest position count accepted by [`brute_force`].
pub const BRUTE_FORCE_LIMIT: usize = 9;

/// Exact optimum by enumerating every injection of items into positions.
///
/// Injections are visited in lexicographic order and only strict
/// improvements replace the incumbent, so ties go to the smallest mapping.
pub fn brute_force(instance: &QapInstance) -> Result<Assignment> {
    let (n, m) = (instance.n(), instance.m());
    if m > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeGuard {
            m,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut search = Search {
        instance,
        used: vec![false; m],
        current: Vec::with_capacity(n),
        best: None,
    };
    search.descend(0.0);
    let mapping = search.best.map(|(_, m)| m).unwrap_or_default();
    let objective = objective(instance, &mapping)?;
    Ok(Assignment { mapping, objective })
}

struct Search<'a> {
    instance: &'a QapInstance,
    used: Vec<bool>,
    current: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

impl Search<'_> {
    fn descend(&mut self, partial: f64) {
        let (flow, cost) = (self.instance.flow(), self.instance.cost());
        let i = self.current.len();
        if i == self.instance.n() {
            let better = match &self.best {
                None => true,
                Some((best, _)) => partial < best - 1e-12 * (1.0 + best.abs()),
            };
            if better {
                self.best = Some((partial, self.current.clone()));
            }
            return;
        }
        for p in 0..self.instance.m() {
            if self.used[p] {
                continue;
            }
            let mut added = flow[[i, i]] * cost[[p, p]];
            for (j, &q) in self.current.iter().enumerate() {
                added += flow[[i, j]] * cost[[p, q]] + flow[[j, i]] * cost[[q, p]];
            }
            self.used[p] = true;
            self.current.push(p);
            self.descend(partial + added);
            self.current.pop();
            self.used[p] = false;
        }
    }
}
