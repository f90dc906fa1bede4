//! Shared test support: plain-value history records, a random generator over
//! a small value grid, and an independent evaluation of the trust formulas.

#![allow(dead_code)]

use energy_trust::model::{EnergyService, HistoryRecord, ServiceStatus, TimeInterval};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CELLS: [&str; 3] = ["m0", "m1", "m2"];

/// A history record as bare numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Raw {
    pub advertised: f64,
    pub delivered: f64,
    pub cell: usize,
    pub adv_start: i64,
    pub adv_end: i64,
    pub act_start: i64,
    pub act_end: i64,
    /// 0 completed, 1 partial, 2 canceled.
    pub status: u8,
    pub affected: u32,
    pub present: u32,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_raw(rng: &mut impl Rng) -> Raw {
    let advertised = *[50.0, 80.0, 100.0, 150.0, 200.0, 300.0].choose(rng).unwrap();
    let status = rng.gen_range(0..3u8);
    let delivered = match status {
        0 => advertised,
        1 => advertised * [0.1, 0.25, 0.5, 0.8].choose(rng).unwrap(),
        _ => advertised * [0.0, 0.25, 0.5].choose(rng).unwrap(),
    };
    let adv_start = 10 * rng.gen_range(30..90i64);
    let adv_end = adv_start + [5, 10, 20, 30].choose(rng).unwrap();
    let act_start = adv_start + rng.gen_range(-3..=3);
    let act_end = (adv_end + rng.gen_range(-5..=10)).max(act_start);
    let present = rng.gen_range(1..=20);
    let affected = if status == 2 { rng.gen_range(0..=present) } else { 0 };
    Raw {
        advertised,
        delivered,
        cell: rng.gen_range(0..CELLS.len()),
        adv_start,
        adv_end,
        act_start,
        act_end,
        status,
        affected,
        present,
    }
}

pub fn random_history(rng: &mut impl Rng, max_len: usize) -> Vec<Raw> {
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| random_raw(rng)).collect()
}

/// Histories of up to `max_len` records, drawn from a seed.
pub fn arb_history(max_len: usize) -> impl Strategy<Value = Vec<Raw>> {
    any::<u64>().prop_map(move |seed| random_history(&mut rng(seed), max_len))
}

pub fn status_of(code: u8) -> ServiceStatus {
    match code {
        0 => ServiceStatus::Completed,
        1 => ServiceStatus::Partial,
        _ => ServiceStatus::Canceled,
    }
}

pub fn build(raw: &Raw, k: usize) -> HistoryRecord {
    let service = EnergyService::new(
        format!("p-h{k}"),
        "p",
        raw.advertised,
        CELLS[raw.cell],
        TimeInterval::new(raw.adv_start, raw.adv_end).unwrap(),
    )
    .unwrap();
    HistoryRecord::new(
        service,
        raw.delivered,
        CELLS[raw.cell],
        TimeInterval::new(raw.act_start, raw.act_end).unwrap(),
        status_of(raw.status),
        raw.affected,
        raw.present,
    )
    .unwrap()
}

pub fn build_all(raws: &[Raw]) -> Vec<HistoryRecord> {
    raws.iter().enumerate().map(|(k, r)| build(r, k)).collect()
}

pub fn offer(duration: i64) -> EnergyService {
    EnergyService::new(
        "p-offer",
        "p",
        200.0,
        "m0",
        TimeInterval::new(600, 600 + duration).unwrap(),
    )
    .unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// The trust formulas evaluated directly on the bare numbers.
pub mod oracle {
    use super::Raw;

    pub fn sr(h: &[Raw]) -> f64 {
        if h.is_empty() {
            return 0.0;
        }
        let mut completed = 0.0;
        for r in h {
            if r.status == 0 {
                completed += 1.0;
            }
        }
        completed / h.len() as f64
    }

    pub fn ds_advertised(h: &[Raw]) -> f64 {
        if h.is_empty() {
            return 0.0;
        }
        let mut del = 0.0;
        let mut adv = 0.0;
        for r in h {
            del += r.delivered;
            adv += r.advertised;
        }
        del / adv
    }

    pub fn ds_capped(h: &[Raw], expected: f64) -> f64 {
        if h.is_empty() {
            return 0.0;
        }
        let mut sum = 0.0;
        for r in h {
            let ratio = r.delivered / expected;
            sum += if ratio > 1.0 { 1.0 } else { ratio };
        }
        sum / h.len() as f64
    }

    pub fn tl(h: &[Raw]) -> f64 {
        let mut total = 0i64;
        for r in h {
            total += r.act_end - r.adv_end;
        }
        if total <= 0 {
            return 1.0;
        }
        let mean = total as f64 / h.len() as f64;
        let inv = 1.0 / mean;
        if inv > 1.0 {
            1.0
        } else {
            inv
        }
    }

    pub fn f(r: &Raw) -> f64 {
        if r.status == 2 {
            r.affected as f64 / r.present as f64
        } else {
            0.0
        }
    }

    pub fn i(h: &[Raw]) -> f64 {
        if h.is_empty() {
            return 1.0;
        }
        let mut sum = 0.0;
        for r in h {
            sum += 1.0 - f(r);
        }
        sum / h.len() as f64
    }

    pub fn sd(h: &[Raw], min_records: usize) -> Option<f64> {
        if h.len() <= min_records {
            return None;
        }
        let mut total = 0i64;
        for r in h {
            total += r.adv_end - r.adv_start;
        }
        Some(total as f64 / h.len() as f64)
    }

    pub fn d(h: &[Raw], current_duration: i64, min_records: usize) -> f64 {
        match sd(h, min_records) {
            None => 1.0,
            Some(sd) if current_duration as f64 <= sd => 1.0,
            Some(sd) => sd / current_duration as f64,
        }
    }

    /// Weights in the order success rate, timeliness, delivery size, impact, duration.
    pub fn p_trust(h: &[Raw], w: [f64; 5], current_duration: i64, min_records: usize) -> f64 {
        let p = w[0] * sr(h)
            + w[1] * tl(h)
            + w[2] * ds_advertised(h)
            + w[3] * i(h)
            + w[4] * d(h, current_duration, min_records);
        p.clamp(0.0, 1.0)
    }

    pub fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn median(v: &[f64]) -> f64 {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        if n % 2 == 1 {
            s[n / 2]
        } else {
            (s[n / 2 - 1] + s[n / 2]) / 2.0
        }
    }

    /// Most frequent value, smallest on ties.
    pub fn mode(v: &[f64]) -> f64 {
        let mut best = (0usize, f64::INFINITY);
        for &x in v {
            let count = v.iter().filter(|&&y| y == x).count();
            if count > best.0 || (count == best.0 && x < best.1) {
                best = (count, x);
            }
        }
        best.1
    }
}

pub mod candidates {
    use energy_trust::composition::ScoredService;
    use energy_trust::model::{EnergyDemand, EnergyService, TimeInterval};
    use energy_trust::trust::TrustAttributes;
    use rand::seq::SliceRandom;
    use rand::Rng;

    pub const UNIT: TrustAttributes = TrustAttributes {
        success_rate: 1.0,
        delivery_size: 1.0,
        timeliness: 1.0,
        impact: 1.0,
        duration_factor: 1.0,
    };

    pub fn candidate(index: usize, amount: f64, trust: f64, start: i64) -> ScoredService {
        let service = EnergyService::new(
            format!("s{index:02}"),
            format!("p{index:02}"),
            amount,
            "m0",
            TimeInterval::new(start, start + 20).unwrap(),
        )
        .unwrap();
        ScoredService::new(service, trust, UNIT, false).unwrap()
    }

    pub fn demand(amount: f64) -> EnergyDemand {
        EnergyDemand::new(amount, TimeInterval::new(600, 720).unwrap(), "m0").unwrap()
    }

    /// Up to `max` candidates with trusts on a coarse grid, so ties happen.
    pub fn random_instance(rng: &mut impl Rng, max: usize) -> (Vec<ScoredService>, EnergyDemand) {
        let n = rng.gen_range(1..=max);
        let grid = [0.2, 0.35, 0.5, 0.6, 0.75, 0.8, 0.9, 0.95, 1.0];
        let pool: Vec<ScoredService> = (0..n)
            .map(|i| {
                let trust = if rng.gen_bool(0.5) {
                    *grid.choose(rng).unwrap()
                } else {
                    rng.gen_range(0.0..=1.0)
                };
                candidate(i, rng.gen_range(150..=300) as f64, trust, 600 + rng.gen_range(0..100))
            })
            .collect();
        let supply: f64 = pool.iter().map(|c| c.amount()).sum();
        let demand_amount = rng.gen_range(100.0..=supply * 1.2);
        (pool, demand(demand_amount))
    }

    /// Best achievable minimum trust over every subset of exactly `size`
    /// candidates whose full amounts reach `capacity`. `None` when no such
    /// subset exists.
    pub fn brute_force_max_min_trust(pool: &[ScoredService], capacity: f64, size: usize) -> Option<f64> {
        let n = pool.len();
        let mut best: Option<f64> = None;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != size {
                continue;
            }
            let mut total = 0.0;
            let mut min = f64::INFINITY;
            for (i, c) in pool.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    total += c.amount();
                    min = min.min(c.trust);
                }
            }
            if total >= capacity && best.is_none_or(|b| min > b) {
                best = Some(min);
            }
        }
        best
    }
}
