#![allow(dead_code)]

use lc_birkhoff::exact::{frac, Rational};
use lc_birkhoff::netlist::{parse_netlist, Circuit};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub mod fig1;
pub mod random_circuits;

pub fn figure_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../figures")
        .join(name)
}

pub fn figure_text(name: &str) -> String {
    std::fs::read_to_string(figure_path(name)).expect("fixture present")
}

pub fn figure(name: &str) -> Circuit {
    parse_netlist(&figure_text(name)).expect("fixture parses")
}

/// Rational in [1/2, 2] with a small denominator.
pub fn random_rational(rng: &mut ChaCha8Rng) -> Rational {
    let d = rng.gen_range(2..=9i64);
    let n = rng.gen_range((d + 1) / 2..=2 * d);
    frac(n, d)
}

/// fig1 netlist with the given inductances L1..L4 and capacitances C1..C3.
pub fn fig1_with(l: &[Rational; 4], c: &[Rational; 3]) -> Circuit {
    let mut text = String::new();
    for line in figure_text("fig1.net").lines() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.first() == Some(&"branch") {
            let idx: usize = toks[1][1..].parse().unwrap();
            let value = if toks[4] == "L" {
                &l[idx - 1]
            } else {
                &c[idx - 1]
            };
            text.push_str(&format!(
                "branch {} {} {} {} {}\n",
                toks[1], toks[2], toks[3], toks[4], value
            ));
        } else {
            text.push_str(line);
            text.push('\n');
        }
    }
    parse_netlist(&text).unwrap()
}
