#![allow(dead_code)]

use std::collections::VecDeque;

use capillary_core::netmodel::Network;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Edmonds-Karp on a dense capacity matrix, each undirected link holding
/// one unit in both directions.
pub fn unit_max_flow(n: usize, links: &[(usize, usize)], s: usize, t: usize) -> usize {
    let mut cap = vec![vec![0i64; n]; n];
    for &(u, v) in links {
        cap[u][v] += 1;
        cap[v][u] += 1;
    }
    let mut flow = 0;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[s] = s;
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            for y in 0..n {
                if prev[y] == usize::MAX && cap[x][y] > 0 {
                    prev[y] = x;
                    queue.push_back(y);
                }
            }
        }
        if prev[t] == usize::MAX {
            return flow;
        }
        let mut y = t;
        while y != s {
            let x = prev[y];
            cap[x][y] -= 1;
            cap[y][x] += 1;
            y = x;
        }
        flow += 1;
    }
}

/// Random connected graph on `2..=max_nodes` nodes: a random spanning tree
/// plus each remaining pair with probability `extra`.
pub fn random_connected(rng: &mut ChaCha8Rng, max_nodes: usize, extra: f64) -> Network {
    let n = rng.random_range(2..=max_nodes);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut links = Vec::new();
    for i in 1..n {
        let j = order[rng.random_range(0..i)];
        links.push((order[i].min(j), order[i].max(j)));
    }
    let tree = links.len();
    for a in 0..n {
        for b in a + 1..n {
            if !links[..tree].contains(&(a, b)) && rng.random_bool(extra) {
                links.push((a, b));
            }
        }
    }
    links.shuffle(rng);
    let s = rng.random_range(0..n);
    let mut t = rng.random_range(0..n - 1);
    if t >= s {
        t += 1;
    }
    Network::new(n, links, s, t).expect("valid random graph")
}

/// Random graph that may be disconnected.
pub fn random_graph(rng: &mut ChaCha8Rng, max_nodes: usize, density: f64) -> Network {
    let n = rng.random_range(2..=max_nodes);
    let mut links = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(density) {
                links.push((a, b));
            }
        }
    }
    Network::new(n, links, 0, n - 1).expect("valid random graph")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn diamond() -> Network {
    Network::new(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)], 0, 3).unwrap()
}

pub fn bridge() -> Network {
    Network::new(4, vec![(0, 1), (0, 2), (1, 3), (2, 3), (1, 2)], 0, 3).unwrap()
}

/// Source and sink joined in series by bundles of parallel paths. Bundle
/// `i` holds `widths[i]` paths of `widths[i]` links each.
pub fn series_bundles(widths: &[usize]) -> Network {
    let mut next = 1;
    let mut links = Vec::new();
    let mut head = 0;
    for &w in widths {
        let tail = next;
        next += 1;
        for _ in 0..w {
            let mut prev = head;
            for _ in 0..w - 1 {
                links.push((prev, next));
                prev = next;
                next += 1;
            }
            links.push((prev, tail));
        }
        head = tail;
    }
    Network::new(next, links, 0, head).unwrap()
}

/// Two link-disjoint source links where one branch continues on a single
/// link and the other splits between a direct link and a detour.
///
/// ```text
///   0 -l0- 1 -l2- 5
///   0 -l1- 2 -l3- 5
///          1 -l4- 3 -l5- 4 -l6- 5
/// ```
pub fn detour_fixture() -> Network {
    Network::new(
        6,
        vec![(0, 1), (0, 2), (1, 5), (2, 5), (1, 3), (3, 4), (4, 5)],
        0,
        5,
    )
    .unwrap()
}
