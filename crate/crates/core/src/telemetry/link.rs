use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution};

use crate::guidance::Point;

/// Radio link parameters: hard range cutoff, Bernoulli loss, fixed latency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkModel {
    pub max_range_m: f64,
    pub base_loss_prob: f64,
    pub latency_s: f64,
    pub seed: u64,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self {
            max_range_m: 900.0,
            base_loss_prob: 0.0,
            latency_s: 0.05,
            seed: 0,
        }
    }
}

impl LinkModel {
    pub fn is_valid(&self) -> bool {
        self.max_range_m.is_finite()
            && self.max_range_m > 0.0
            && (0.0..=1.0).contains(&self.base_loss_prob)
            && self.latency_s.is_finite()
            && self.latency_s >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    OutOfRange,
    Loss,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delivery {
    Deliver { at_s: f64 },
    Dropped(DropReason),
}

/// Seeded transfer decisions for one direction of the link.
#[derive(Debug, Clone)]
pub struct Link {
    model: LinkModel,
    loss: Bernoulli,
    rng: ChaCha8Rng,
}

impl Link {
    /// Panics if `base_loss_prob` is outside `[0, 1]`; validate the model first.
    pub fn new(model: LinkModel) -> Self {
        Self {
            loss: Bernoulli::new(model.base_loss_prob).expect("loss probability in [0, 1]"),
            rng: ChaCha8Rng::seed_from_u64(model.seed),
            model,
        }
    }

    pub fn model(&self) -> &LinkModel {
        &self.model
    }

    /// Decides the fate of one message sent at `now_s`.
    pub fn transfer(&mut self, sender: Point, receiver: Point, now_s: f64) -> Delivery {
        let dist = libm::hypot(sender.0 - receiver.0, sender.1 - receiver.1);
        if dist.is_nan() || dist > self.model.max_range_m {
            return Delivery::Dropped(DropReason::OutOfRange);
        }
        if self.loss.sample(&mut self.rng) {
            return Delivery::Dropped(DropReason::Loss);
        }
        Delivery::Deliver {
            at_s: now_s + self.model.latency_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LinkStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped_range: u64,
    pub dropped_loss: u64,
}

struct Pending<T> {
    at_s: f64,
    order: u64,
    item: T,
}

impl<T> PartialEq for Pending<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T> Eq for Pending<T> {}

impl<T> PartialOrd for Pending<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Pending<T> {
    // Reversed: BinaryHeap is a max-heap and we want the earliest first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .at_s
            .total_cmp(&self.at_s)
            .then_with(|| other.order.cmp(&self.order))
    }
}

/// Deterministic delivery queue for one sender, keyed by delivery time with
/// send order breaking ties.
pub struct LinkQueue<T> {
    link: Link,
    heap: BinaryHeap<Pending<T>>,
    next_order: u64,
    stats: LinkStats,
}

impl<T> LinkQueue<T> {
    pub fn new(model: LinkModel) -> Self {
        Self {
            link: Link::new(model),
            heap: BinaryHeap::new(),
            next_order: 0,
            stats: LinkStats::default(),
        }
    }

    pub fn send(&mut self, item: T, sender: Point, receiver: Point, now_s: f64) -> Delivery {
        self.stats.sent += 1;
        let d = self.link.transfer(sender, receiver, now_s);
        match d {
            Delivery::Deliver { at_s } => {
                self.heap.push(Pending {
                    at_s,
                    order: self.next_order,
                    item,
                });
                self.next_order += 1;
            }
            Delivery::Dropped(DropReason::OutOfRange) => self.stats.dropped_range += 1,
            Delivery::Dropped(DropReason::Loss) => self.stats.dropped_loss += 1,
        }
        d
    }

    /// Pops every message due at or before `now_s`, in delivery order.
    pub fn poll(&mut self, now_s: f64) -> Vec<T> {
        let mut out = Vec::new();
        while self.heap.peek().is_some_and(|p| p.at_s <= now_s) {
            if let Some(p) = self.heap.pop() {
                out.push(p.item);
                self.stats.delivered += 1;
            }
        }
        out
    }

    pub fn in_flight(&self) -> usize {
        self.heap.len()
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }
}

/// True when the heartbeat gap strictly exceeds `timeout_s`.
pub fn failsafe_check(last_heartbeat_s: f64, now_s: f64, timeout_s: f64) -> bool {
    now_s - last_heartbeat_s > timeout_s
}
