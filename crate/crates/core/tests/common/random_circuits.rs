use lc_birkhoff::exact::{fmt_rational, frac, Rational};
use lc_birkhoff::graph::build_loop_basis;
use lc_birkhoff::netlist::{parse_netlist, Circuit};
use lc_birkhoff::pipeline;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug)]
pub struct Options {
    /// Probability that a device gets a polynomial law instead of a constant.
    pub nonlinear_fraction: f64,
    pub force_capacitor_loop: bool,
    pub max_nodes: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            nonlinear_fraction: 0.0,
            force_capacitor_loop: false,
            max_nodes: 6,
        }
    }
}

fn positive(rng: &mut ChaCha8Rng) -> Rational {
    let d = rng.gen_range(2..=8i64);
    frac(rng.gen_range((d + 1) / 2..=2 * d), d)
}

fn small(rng: &mut ChaCha8Rng, scale: i64) -> Rational {
    frac(rng.gen_range(-scale..=scale), 10)
}

struct Edge {
    tail: usize,
    head: usize,
    capacitor: bool,
}

fn device(rng: &mut ChaCha8Rng, capacitor: bool, nonlinear: bool) -> String {
    let a = fmt_rational(&positive(rng));
    let b = rng.gen_range(0..=4) as f64 / 10.0;
    match (capacitor, nonlinear) {
        (false, false) => format!("L {}", a),
        (true, false) => format!("C {}", a),
        (false, true) => format!("Lnl poly({},0,{})", a, b),
        (true, true) => format!("Cnl poly(0,{},0,{})", a, b / 2.0),
    }
}

/// Random connected LC multigraph; inductor currents initialised from random loop currents.
pub fn random_circuit(rng: &mut ChaCha8Rng, opts: Options) -> Circuit {
    loop {
        if let Some(c) = attempt(rng, opts) {
            return c;
        }
    }
}

fn attempt(rng: &mut ChaCha8Rng, opts: Options) -> Option<Circuit> {
    let n = rng.gen_range(2..=opts.max_nodes);
    let mut edges = Vec::new();
    let mut parent = vec![0usize; n];
    for v in 1..n {
        let u = rng.gen_range(0..v);
        parent[v] = u;
        let (tail, head) = if rng.gen_bool(0.5) { (u, v) } else { (v, u) };
        edges.push(Edge {
            tail,
            head,
            capacitor: rng.gen_bool(0.5),
        });
    }
    let chords = rng.gen_range(1..=4);
    for _ in 0..chords {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n);
        if a == b {
            b = (a + 1) % n;
        }
        edges.push(Edge {
            tail: a,
            head: b,
            capacitor: rng.gen_bool(0.5),
        });
    }
    if opts.force_capacitor_loop {
        // The first chord and its tree path become capacitors.
        let k = n - 1;
        let (a, b) = (edges[k].tail, edges[k].head);
        edges[k].capacitor = true;
        let path_to_root = |mut v: usize| {
            let mut p = vec![v];
            while v != 0 {
                v = parent[v];
                p.push(v);
            }
            p
        };
        let (pa, pb) = (path_to_root(a), path_to_root(b));
        let lca = *pa.iter().find(|v| pb.contains(v)).unwrap();
        for path in [pa, pb] {
            for &v in path.iter().take_while(|&&v| v != lca) {
                edges[v - 1].capacitor = true;
            }
        }
    }
    if edges.iter().all(|e| e.capacitor) {
        let last = edges.len() - 1;
        if opts.force_capacitor_loop {
            return None;
        }
        edges[last].capacitor = false;
    }
    let mut text = String::new();
    let (mut nl, mut nc) = (0, 0);
    let mut names = Vec::new();
    for e in &edges {
        let name = if e.capacitor {
            nc += 1;
            format!("C{}", nc)
        } else {
            nl += 1;
            format!("L{}", nl)
        };
        let nonlinear = rng.gen_bool(opts.nonlinear_fraction);
        text.push_str(&format!(
            "branch {} n{} n{} {}\n",
            name,
            e.tail,
            e.head,
            device(rng, e.capacitor, nonlinear)
        ));
        names.push(name);
    }
    let bare = parse_netlist(&text).ok()?;
    let a = build_loop_basis(&bare).ok()?.entries.to_rational();
    let w: Vec<Rational> = (0..a.cols()).map(|_| small(rng, 5)).collect();
    let currents = a.mul_vec(&w);
    for (i, e) in edges.iter().enumerate() {
        let value = if e.capacitor {
            small(rng, 5)
        } else {
            currents[i].clone()
        };
        text.push_str(&format!("init {} {}\n", names[i], fmt_rational(&value)));
    }
    let c = parse_netlist(&text).ok()?;
    // Keep only circuits that leave at least one degree of freedom after reduction.
    let p = pipeline::build(&c, false).ok()?;
    let prepared = pipeline::prepare(&p.system, 0.0, false).ok()?;
    if prepared.reduced.inner.dof() == 0 {
        return None;
    }
    Some(c)
}
