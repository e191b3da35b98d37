//! Demand seeding and the per-grid reachability table used to issue targets.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{TargetDemand, MAX_CLASS, PER_CLASS};
use crate::hexgeom::{angle_bin, angle_deg, distance_px, HexGrid, N_BINS};

const N_CLASSES: usize = MAX_CLASS as usize + 1;

/// Hop class of a distance: the nearest whole number of key widths.
pub fn distance_class(distance: f64, key_width: f64) -> usize {
    (distance / key_width + 0.5).floor() as usize
}

/// For every origin key, the keys reachable in each (distance class, bin).
#[derive(Debug, Clone)]
pub struct Reachability {
    // [origin][class][bin] -> target indices, ascending
    table: Vec<Vec<Vec<Vec<usize>>>>,
    // does the pair occur anywhere on the grid
    pair_exists: [[bool; N_BINS]; N_CLASSES],
    // 0..n, so a zero-distance demand can borrow its single target
    keys: Vec<usize>,
}

impl Reachability {
    pub fn new(grid: &HexGrid) -> Self {
        let n = grid.len();
        let mut table = vec![vec![vec![Vec::new(); N_BINS]; N_CLASSES]; n];
        let mut pair_exists = [[false; N_BINS]; N_CLASSES];
        for (o, p) in grid.positions().iter().enumerate() {
            for (t, q) in grid.positions().iter().enumerate() {
                if o == t {
                    continue;
                }
                let k = distance_class(distance_px(p, q), grid.key_width());
                if k == 0 || k > MAX_CLASS as usize {
                    continue;
                }
                let bin = angle_bin(angle_deg(p, q).expect("distinct keys"));
                table[o][k][bin].push(t);
                pair_exists[k][bin] = true;
            }
        }
        Reachability {
            table,
            pair_exists,
            keys: (0..n).collect(),
        }
    }

    /// Keys matching `demand` from `origin`; a zero-distance demand matches the origin.
    pub fn targets(&self, origin: usize, demand: TargetDemand) -> &[usize] {
        if demand.distance_class == 0 {
            return std::slice::from_ref(&self.keys[origin]);
        }
        &self.table[origin][demand.distance_class as usize][demand.angle_bin as usize]
    }

    pub fn is_feasible(&self, origin: usize, demand: TargetDemand) -> bool {
        !self.targets(origin, demand).is_empty()
    }

    pub fn pair_exists(&self, class: u8, bin: u8) -> bool {
        class == 0 || self.pair_exists[class as usize][bin as usize]
    }

    /// Nearest reachable demand from `origin`: same bin at the closest class
    /// first, then bins at increasing circular distance.
    pub fn substitute(&self, origin: usize, demand: TargetDemand) -> Option<TargetDemand> {
        let (k, b) = (demand.distance_class as i32, demand.angle_bin as i32);
        for db in 0..=(N_BINS as i32 / 2) {
            let mut bins = vec![(b - db).rem_euclid(N_BINS as i32)];
            let other = (b + db).rem_euclid(N_BINS as i32);
            if other != bins[0] {
                bins.push(other);
            }
            for bin in bins {
                for dk in 0..MAX_CLASS as i32 {
                    for class in [k - dk, k + dk] {
                        if !(1..=MAX_CLASS as i32).contains(&class) {
                            continue;
                        }
                        let cand = TargetDemand::new(class as u8, bin as u8);
                        if self.is_feasible(origin, cand) {
                            return Some(cand);
                        }
                    }
                }
            }
        }
        None
    }
}

/// The 225-demand initial queue: 25 demands per hop class 0..=8.
///
/// Bins are dealt so per-bin totals stay level, using only (class, bin) pairs
/// the grid can realize; the most constrained classes are dealt first. The
/// list is then shuffled by the seeded generator.
pub fn seed_initial_queue(grid: &HexGrid, seed: u64) -> Vec<TargetDemand> {
    let reach = Reachability::new(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut queue = deal_bins(&reach);
    queue.shuffle(&mut rng);
    queue
}

pub(crate) fn deal_bins(reach: &Reachability) -> Vec<TargetDemand> {
    let mut counts = [0usize; N_BINS];
    let mut cursor = 0usize;
    let mut queue = Vec::with_capacity(PER_CLASS * N_CLASSES);

    let pick = |allowed: &[u8], counts: &mut [usize; N_BINS], cursor: &mut usize| -> u8 {
        let min = allowed.iter().map(|&b| counts[b as usize]).min().expect("nonempty");
        let chosen = (0..N_BINS)
            .map(|off| ((*cursor + off) % N_BINS) as u8)
            .find(|b| allowed.contains(b) && counts[*b as usize] == min)
            .expect("a minimal bin exists");
        counts[chosen as usize] += 1;
        *cursor = (chosen as usize + 1) % N_BINS;
        chosen
    };

    let all_bins: Vec<u8> = (0..N_BINS as u8).collect();
    let mut classes: Vec<(usize, u8, Vec<u8>)> = (1..=MAX_CLASS)
        .map(|k| {
            let mut bins: Vec<u8> = all_bins.iter().copied().filter(|&b| reach.pair_exists(k, b)).collect();
            if bins.is_empty() {
                // unrealizable on this grid; dealt anyway and resolved at issue time
                bins = all_bins.clone();
            }
            (bins.len(), k, bins)
        })
        .collect();
    classes.sort_by_key(|(n, k, _)| (*n, *k));

    for (_, k, bins) in &classes {
        for _ in 0..PER_CLASS {
            let b = pick(bins, &mut counts, &mut cursor);
            queue.push(TargetDemand::new(*k, b));
        }
    }
    for _ in 0..PER_CLASS {
        let b = pick(&all_bins, &mut counts, &mut cursor);
        queue.push(TargetDemand::new(0, b));
    }
    queue
}
