//! Single selfish miner against an honest majority, solved as a Markov
//! chain over the attacker's lead.
//!
//! States: `0` (no fork), `0'` (two published branches of equal length) and
//! leads `1..=max_lead`. Rewards are counted per transition as blocks that
//! become final, so revenue is the ratio of expected attacker reward to
//! expected total reward per step under the stationary distribution.

pub struct LeadChain {
    pub alpha: f64,
    pub gamma: f64,
    pub max_lead: usize,
}

/// `(target, probability, attacker reward, honest reward)`.
type Edge = (usize, f64, f64, f64);

const ZERO: usize = 0;
const TIE: usize = 1;

fn lead(i: usize) -> usize {
    i + 1
}

impl LeadChain {
    pub fn new(alpha: f64, gamma: f64) -> Self {
        Self {
            alpha,
            gamma,
            max_lead: 400,
        }
    }

    fn states(&self) -> usize {
        self.max_lead + 2
    }

    fn edges(&self, state: usize) -> Vec<Edge> {
        let (a, g) = (self.alpha, self.gamma);
        let h = 1.0 - a;
        match state {
            ZERO => vec![(lead(1), a, 0.0, 0.0), (ZERO, h, 0.0, 1.0)],
            TIE => vec![
                (ZERO, a, 2.0, 0.0),
                (ZERO, g * h, 1.0, 1.0),
                (ZERO, (1.0 - g) * h, 0.0, 2.0),
            ],
            s => {
                let i = s - 1;
                let up = if i == self.max_lead { s } else { lead(i + 1) };
                match i {
                    1 => vec![(up, a, 0.0, 0.0), (TIE, h, 0.0, 0.0)],
                    2 => vec![(up, a, 0.0, 0.0), (ZERO, h, 2.0, 0.0)],
                    _ => vec![(up, a, 0.0, 0.0), (lead(i - 1), h, 1.0, 0.0)],
                }
            }
        }
    }

    pub fn stationary(&self) -> Vec<f64> {
        let n = self.states();
        let edges: Vec<Vec<Edge>> = (0..n).map(|s| self.edges(s)).collect();
        let mut pi = vec![1.0 / n as f64; n];
        for _ in 0..1_000_000 {
            let mut next = vec![0.0; n];
            for (s, out) in edges.iter().enumerate() {
                for &(t, p, _, _) in out {
                    next[t] += pi[s] * p;
                }
            }
            let diff: f64 = next.iter().zip(&pi).map(|(x, y)| (x - y).abs()).sum();
            pi = next;
            if diff < 1e-15 {
                break;
            }
        }
        pi
    }

    /// Attacker share of final blocks.
    pub fn revenue(&self) -> f64 {
        let pi = self.stationary();
        let (mut attacker, mut total) = (0.0, 0.0);
        for (s, p) in pi.iter().enumerate() {
            for (_, q, ra, rh) in self.edges(s) {
                attacker += p * q * ra;
                total += p * q * (ra + rh);
            }
        }
        attacker / total
    }
}

/// Closed form of the same chain without truncation.
pub fn closed_form(alpha: f64, gamma: f64) -> f64 {
    let a = alpha;
    let num = a * (1.0 - a).powi(2) * (4.0 * a + gamma * (1.0 - 2.0 * a)) - a.powi(3);
    let den = 1.0 - a * (1.0 + (2.0 - a) * a);
    num / den
}
