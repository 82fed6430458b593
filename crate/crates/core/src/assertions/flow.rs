//! Exact max-flow over rational capacities, used to split weightings.

use std::collections::VecDeque;

use num_traits::{Signed, Zero};

use crate::semiring::Rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Cap {
    Fin(Rational),
    Inf,
}

pub(crate) struct Net {
    cap: Vec<Vec<Option<Cap>>>,
    flow: Vec<Vec<Rational>>,
}

impl Net {
    pub(crate) fn new(n: usize) -> Net {
        Net { cap: vec![vec![None; n]; n], flow: vec![vec![Rational::zero(); n]; n] }
    }

    pub(crate) fn add_edge(&mut self, u: usize, v: usize, c: Cap) {
        self.cap[u][v] = Some(c);
    }

    pub(crate) fn flow(&self, u: usize, v: usize) -> &Rational {
        &self.flow[u][v]
    }

    fn residual(&self, u: usize, v: usize) -> Option<Cap> {
        let f = &self.flow[u][v];
        let r = match &self.cap[u][v] {
            Some(Cap::Inf) => return Some(Cap::Inf),
            Some(Cap::Fin(c)) => c - f,
            None => -f.clone(),
        };
        r.is_positive().then_some(Cap::Fin(r))
    }

    /// Breadth-first path of positive residual edges accepted by `ok`.
    pub(crate) fn path(&self, from: usize, to: usize, ok: &dyn Fn(usize, usize) -> bool) -> Option<Vec<usize>> {
        let n = self.cap.len();
        let mut prev = vec![usize::MAX; n];
        prev[from] = from;
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            if u == to {
                break;
            }
            for v in 0..n {
                if prev[v] == usize::MAX && ok(u, v) && self.residual(u, v).is_some() {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[to] == usize::MAX {
            return None;
        }
        let mut path = vec![to];
        while *path.last().expect("nonempty") != from {
            path.push(prev[*path.last().expect("nonempty")]);
        }
        path.reverse();
        Some(path)
    }

    /// The least residual capacity along a path, `None` if unbounded.
    pub(crate) fn bottleneck(&self, path: &[usize]) -> Option<Rational> {
        path.windows(2)
            .filter_map(|w| match self.residual(w[0], w[1]) {
                Some(Cap::Fin(r)) => Some(r),
                _ => None,
            })
            .min()
    }

    pub(crate) fn push(&mut self, path: &[usize], amount: &Rational) {
        for w in path.windows(2) {
            self.flow[w[0]][w[1]] += amount;
            self.flow[w[1]][w[0]] -= amount;
        }
    }

    /// Augments along shortest paths until none is left; returns the amount pushed.
    pub(crate) fn max_flow(&mut self, s: usize, t: usize, ok: &dyn Fn(usize, usize) -> bool) -> Rational {
        let mut total = Rational::zero();
        while let Some(p) = self.path(s, t, ok) {
            let b = self.bottleneck(&p).expect("source edges are finite");
            self.push(&p, &b);
            total += b;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semiring::rat;

    #[test]
    fn classic_flow() {
        let mut net = Net::new(4);
        net.add_edge(0, 1, Cap::Fin(rat(1, 2)));
        net.add_edge(0, 2, Cap::Fin(rat(1, 3)));
        net.add_edge(1, 2, Cap::Inf);
        net.add_edge(1, 3, Cap::Fin(rat(1, 4)));
        net.add_edge(2, 3, Cap::Fin(rat(1, 2)));
        assert_eq!(net.max_flow(0, 3, &|_, _| true), rat(3, 4));
    }
}
