use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use jindex::james::{hull_distance, jt_witness, q, separation_margin, Body, Q};
use jindex::ramsey::{homogenize_chain, ChainOutcome, PairColoring};
use jindex::{find_monotone_map, BTree, Label, Node, Ordinal, Product};

use crate::{Failure, Outcome, Report};

struct Suite {
    name: &'static str,
    cases: usize,
    failures: Vec<String>,
}

fn random_ordinal(rng: &mut ChaCha8Rng) -> Ordinal {
    let mut o = Ordinal::zero();
    for e in (0..4u64).rev() {
        if rng.gen_bool(0.5) {
            let term = Ordinal::omega_power(&Ordinal::from(e)).mul(&Ordinal::from(rng.gen_range(1..4u64)));
            o = o.add(&term);
        }
    }
    o
}

fn random_tree(rng: &mut ChaCha8Rng, max_nodes: usize) -> BTree {
    let n = rng.gen_range(1..=max_nodes);
    let mut nodes: Vec<Node> = Vec::with_capacity(n);
    for i in 0..n {
        let mut node = if i == 0 || rng.gen_bool(0.2) {
            Vec::new()
        } else {
            nodes[rng.gen_range(0..i)].clone()
        };
        node.push(Label::Int(i as i64));
        nodes.push(node);
    }
    BTree::new(nodes).expect("parents precede children")
}

fn random_points(rng: &mut ChaCha8Rng, count: usize, d: usize) -> Vec<Vec<Q>> {
    (0..count)
        .map(|_| (0..d).map(|_| q(rng.gen_range(-3..=3))).collect())
        .collect()
}

fn ordinals(rng: &mut ChaCha8Rng, cases: usize) -> Suite {
    let mut failures = Vec::new();
    for _ in 0..cases {
        let (a, b, c) = (random_ordinal(rng), random_ordinal(rng), random_ordinal(rng));
        if a.natural_sum(&b) != b.natural_sum(&a) {
            failures.push(format!("natural sum of {a} and {b} is not commutative"));
        }
        if a.natural_sum(&b).natural_sum(&c) != a.natural_sum(&b.natural_sum(&c)) {
            failures.push(format!("natural sum of {a}, {b}, {c} is not associative"));
        }
        if a.add(&b).add(&c) != a.add(&b.add(&c)) {
            failures.push(format!("sum of {a}, {b}, {c} is not associative"));
        }
        if a.mul(&b.add(&c)) != a.mul(&b).add(&a.mul(&c)) {
            failures.push(format!("left distributivity fails for {a}, {b}, {c}"));
        }
        if Ordinal::parse(&a.to_string()).as_ref() != Ok(&a) {
            failures.push(format!("{a} does not round-trip through text"));
        }
    }
    Suite {
        name: "ordinal laws",
        cases,
        failures,
    }
}

fn trees(rng: &mut ChaCha8Rng, cases: usize) -> Suite {
    let mut failures = Vec::new();
    for _ in 0..cases {
        let (a, b) = (random_tree(rng, 6), random_tree(rng, 6));
        match Product::new(&a, &b) {
            Ok(p) if p.tree.order() == a.order() * b.order() => {}
            Ok(p) => failures.push(format!("product order {} for {a:?} and {b:?}", p.tree.order())),
            Err(e) => failures.push(e.to_string()),
        }
        let found = find_monotone_map(&a, &b);
        if found.is_some() != (a.order() <= b.order()) {
            failures.push(format!("monotone map existence disagrees with orders for {a:?} and {b:?}"));
        }
        if let Some(m) = found {
            if m.verify().is_err() {
                failures.push("monotone map fails verification".into());
            }
        }
    }
    Suite {
        name: "tree products and maps",
        cases,
        failures,
    }
}

fn ramsey(rng: &mut ChaCha8Rng, cases: usize) -> Suite {
    let mut failures = Vec::new();
    for _ in 0..cases {
        let f = PairColoring::with_colors(BTree::chain(6), vec![0, 1], |_| rng.gen_range(0..2)).expect("valid colors");
        match homogenize_chain(3, &f) {
            Ok(ChainOutcome::Homogeneous { witness, .. }) if witness.verify_pairs(&f).is_ok() => {}
            Ok(other) => failures.push(format!("6-chain coloring gave {other:?}")),
            Err(e) => failures.push(e.to_string()),
        }
    }
    Suite {
        name: "chain ramsey",
        cases,
        failures,
    }
}

fn duality(rng: &mut ChaCha8Rng, cases: usize) -> Suite {
    let mut failures = Vec::new();
    for _ in 0..cases {
        let d = rng.gen_range(1..=3);
        let nv = rng.gen_range(1..=3);
        let verts = random_points(rng, nv, d);
        let Ok(k) = Body::new(d, verts) else { continue };
        let (n1, n2) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let s1 = random_points(rng, n1, d);
        let s2 = random_points(rng, n2, d);
        match (hull_distance(&k, &s1, &s2), separation_margin(&k, &s1, &s2)) {
            (Ok(p), Ok((m, _))) if p == m => {}
            (Ok(p), Ok((m, _))) => failures.push(format!("distance {p} differs from margin {m}")),
            (Err(e), _) | (_, Err(e)) => failures.push(e.to_string()),
        }
    }
    Suite {
        name: "lp duality",
        cases,
        failures,
    }
}

fn jt(rng: &mut ChaCha8Rng, cases: usize) -> Suite {
    let mut failures = Vec::new();
    for _ in 0..cases {
        let t = random_tree(rng, 8);
        let w = jt_witness(&t);
        if let Err(e) = w.verify(None) {
            failures.push(e);
        }
        if w.nodes.order() != t.order() || w.min_margin().is_some_and(|m| m != q(1)) {
            failures.push(format!("witness for {t:?} has the wrong order or margin"));
        }
    }
    Suite {
        name: "jt witnesses",
        cases,
        failures,
    }
}

pub fn run(seed: u64, cases: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let suites = [
        ordinals(&mut rng, cases),
        trees(&mut rng, cases),
        ramsey(&mut rng, cases),
        duality(&mut rng, cases),
        jt(&mut rng, cases),
    ];
    let mut lines = Vec::new();
    let mut total = 0;
    for s in &suites {
        let status = if s.failures.is_empty() { "pass" } else { "FAIL" };
        lines.push(format!("{status} {} ({} cases)", s.name, s.cases));
        lines.extend(s.failures.iter().map(|f| format!("  {f}")));
        total += s.failures.len();
    }
    if total > 0 {
        return Err(Failure::Verification(format!("{total} selftest failures:\n{}", lines.join("\n"))));
    }
    let json = json!({
        "seed": seed,
        "suites": suites
            .iter()
            .map(|s| json!({ "name": s.name, "cases": s.cases, "failures": s.failures }))
            .collect::<Vec<_>>(),
    });
    Ok(Report { lines, json })
}
