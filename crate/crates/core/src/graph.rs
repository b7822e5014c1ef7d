//! Incidence and loop matrices, loop and cutset classification.

use std::fmt;

use serde::Serialize;

use crate::exact::{rat, RatMatrix};
use crate::netlist::{Circuit, DeviceKind, ExplicitLoop};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IntMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "ragged rows");
            for (j, v) in r.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn to_rational(&self) -> RatMatrix {
        let mut m = RatMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                m[(r, c)] = rat(self[(r, c)]);
            }
        }
        m
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        (0..self.rows)
            .map(|r| self.data[r * self.cols..(r + 1) * self.cols].to_vec())
            .collect()
    }

    pub fn rank(&self) -> usize {
        self.to_rational().rank()
    }

    /// Aligned table with optional row labels.
    pub fn table(&self, row_labels: &[String], col_labels: &[String]) -> String {
        let lw = row_labels.iter().map(|s| s.len()).max().unwrap_or(0);
        let cw = col_labels.iter().map(|s| s.len()).max().unwrap_or(0).max(2);
        let mut out = format!("{:lw$} ", "", lw = lw);
        for c in col_labels {
            out.push_str(&format!(" {:>cw$}", c, cw = cw));
        }
        out.push('\n');
        for r in 0..self.rows {
            out.push_str(&format!(
                "{:lw$} ",
                row_labels.get(r).map_or("", |s| s.as_str()),
                lw = lw
            ));
            for c in 0..self.cols {
                out.push_str(&format!(" {:>cw$}", self[(r, c)], cw = cw));
            }
            out.push('\n');
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = i64;
    fn index(&self, (r, c): (usize, usize)) -> &i64 {
        assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut i64 {
        assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// B: +1 where the branch enters the node, -1 where it leaves. Reference node omitted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IncidenceMatrix {
    pub entries: IntMatrix,
    /// Circuit node index of each column.
    pub nodes: Vec<usize>,
}

/// A: +1 where the branch is traversed along its orientation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LoopMatrix {
    pub entries: IntMatrix,
    pub names: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LoopClassification {
    pub capacitor_only_loops: Vec<usize>,
    pub inductor_only_loops: Vec<usize>,
    pub inductor_current_cutsets_present: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("invalid explicit loop: {0}")]
    InvalidExplicitLoop(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub fn build_incidence(c: &Circuit) -> IncidenceMatrix {
    let nodes: Vec<usize> = (0..c.nodes.len()).filter(|&n| n != c.reference).collect();
    let mut e = IntMatrix::zeros(c.b(), nodes.len());
    for (i, br) in c.branches.iter().enumerate() {
        if let Some(col) = nodes.iter().position(|&n| n == br.head) {
            e[(i, col)] = 1;
        }
        if let Some(col) = nodes.iter().position(|&n| n == br.tail) {
            e[(i, col)] = -1;
        }
    }
    IncidenceMatrix { entries: e, nodes }
}

fn explicit_matrix(c: &Circuit, loops: &[ExplicitLoop]) -> IntMatrix {
    let mut a = IntMatrix::zeros(c.b(), loops.len());
    for (j, l) in loops.iter().enumerate() {
        for &(i, s) in &l.members {
            a[(i, j)] = s as i64;
        }
    }
    a
}

/// Closedness, count and independence of user loops.
pub fn validate_explicit_loops(c: &Circuit, loops: &[ExplicitLoop]) -> Result<(), GraphError> {
    if loops.len() != c.m() {
        return Err(GraphError::InvalidExplicitLoop(format!(
            "expected {} loops, got {}",
            c.m(),
            loops.len()
        )));
    }
    let a = explicit_matrix(c, loops);
    let b = build_incidence(c).entries;
    for (j, l) in loops.iter().enumerate() {
        for col in 0..b.cols {
            let s: i64 = (0..c.b()).map(|i| b[(i, col)] * a[(i, j)]).sum();
            if s != 0 {
                return Err(GraphError::InvalidExplicitLoop(format!(
                    "loop {} is not closed",
                    l.name
                )));
            }
        }
    }
    if a.rank() != c.m() {
        return Err(GraphError::InvalidExplicitLoop(
            "loops are linearly dependent".into(),
        ));
    }
    Ok(())
}

/// Tree preference: voltage sources, capacitors, inductors, current sources.
fn tree_rank(k: DeviceKind) -> u8 {
    match k {
        DeviceKind::VoltageSource => 0,
        DeviceKind::Capacitor => 1,
        DeviceKind::Inductor => 2,
        DeviceKind::CurrentSource => 3,
    }
}

/// Kruskal spanning tree in preference order. Returns tree flags per branch.
pub fn spanning_tree(c: &Circuit) -> Vec<bool> {
    let mut order: Vec<usize> = (0..c.b()).collect();
    order.sort_by_key(|&i| (tree_rank(c.kind(i)), i));
    let mut parent: Vec<usize> = (0..c.nodes.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut in_tree = vec![false; c.b()];
    for i in order {
        let br = &c.branches[i];
        let (a, b) = (find(&mut parent, br.tail), find(&mut parent, br.head));
        if a != b {
            parent[a] = b;
            in_tree[i] = true;
        }
    }
    in_tree
}

/// Signed tree path from `from` to `to`: (branch, +1 if traversed tail to head).
pub fn tree_path(c: &Circuit, in_tree: &[bool], from: usize, to: usize) -> Vec<(usize, i64)> {
    let n = c.nodes.len();
    let mut via: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    seen[from] = true;
    queue.push_back(from);
    while let Some(x) = queue.pop_front() {
        if x == to {
            break;
        }
        for (i, br) in c.branches.iter().enumerate() {
            if !in_tree[i] {
                continue;
            }
            let y = if br.tail == x {
                br.head
            } else if br.head == x {
                br.tail
            } else {
                continue;
            };
            if !seen[y] {
                seen[y] = true;
                via[y] = Some((i, x));
                queue.push_back(y);
            }
        }
    }
    let mut path = Vec::new();
    let mut y = to;
    while y != from {
        let (i, x) = via[y].expect("tree spans the graph");
        let s = if c.branches[i].tail == x { 1 } else { -1 };
        path.push((i, s));
        y = x;
    }
    path.reverse();
    path
}

pub fn build_loop_basis(c: &Circuit) -> Result<LoopMatrix, GraphError> {
    if let Some(loops) = &c.loops {
        validate_explicit_loops(c, loops)?;
        return Ok(LoopMatrix {
            entries: explicit_matrix(c, loops),
            names: loops.iter().map(|l| l.name.clone()).collect(),
        });
    }
    let in_tree = spanning_tree(c);
    let cotree: Vec<usize> = (0..c.b()).filter(|&i| !in_tree[i]).collect();
    let mut a = IntMatrix::zeros(c.b(), cotree.len());
    let mut names = Vec::new();
    for (j, &k) in cotree.iter().enumerate() {
        let br = &c.branches[k];
        a[(k, j)] = 1;
        for (i, s) in tree_path(c, &in_tree, br.head, br.tail) {
            a[(i, j)] = s;
        }
        names.push(format!("loop_{}", br.name));
    }
    Ok(LoopMatrix { entries: a, names })
}

pub fn check_tellegen(b: &IncidenceMatrix, a: &LoopMatrix) -> Result<bool, GraphError> {
    let (b, a) = (&b.entries, &a.entries);
    if b.rows != a.rows {
        return Err(GraphError::DimensionMismatch(format!(
            "B has {} rows, A has {}",
            b.rows, a.rows
        )));
    }
    for i in 0..b.cols {
        for j in 0..a.cols {
            let s: i64 = (0..b.rows).map(|r| b[(r, i)] * a[(r, j)]).sum();
            if s != 0 {
                return Ok(false);
            }
        }
    }
    Ok(a.rank() + b.rank() == b.rows)
}

pub fn classify_loops(c: &Circuit, a: &LoopMatrix, b: &IncidenceMatrix) -> LoopClassification {
    let a = &a.entries;
    let rows_of = |pred: &dyn Fn(DeviceKind) -> bool| -> Vec<usize> {
        (0..c.b()).filter(|&i| pred(c.kind(i))).collect()
    };
    let zero_on = |j: usize, rows: &[usize]| rows.iter().all(|&i| a[(i, j)] == 0);
    let inductors = rows_of(&|k| k == DeviceKind::Inductor);
    let capacitors = rows_of(&|k| k == DeviceKind::Capacitor);
    let not_cv = rows_of(&|k| !matches!(k, DeviceKind::Capacitor | DeviceKind::VoltageSource));
    let not_l = rows_of(&|k| k != DeviceKind::Inductor);
    let capacitor_only_loops = (0..a.cols)
        .filter(|&j| zero_on(j, &not_cv) && !zero_on(j, &capacitors))
        .collect();
    let inductor_only_loops = (0..a.cols)
        .filter(|&j| zero_on(j, &not_l) && !zero_on(j, &inductors))
        .collect();
    let cv = rows_of(&|k| matches!(k, DeviceKind::Capacitor | DeviceKind::VoltageSource));
    let restricted = b.entries.to_rational().select_rows(&cv);
    LoopClassification {
        capacitor_only_loops,
        inductor_only_loops,
        inductor_current_cutsets_present: restricted.rank() < b.entries.cols,
    }
}

impl fmt::Display for LoopClassification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "capacitor-only loops {:?}, inductor-only loops {:?}, inductor/current-source cutsets {}",
            self.capacitor_only_loops, self.inductor_only_loops, self.inductor_current_cutsets_present
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_netlist;

    #[test]
    fn minimal_loop() {
        let c = parse_netlist("branch L1 n1 n2 L 1\nbranch C1 n2 n1 C 1\n").unwrap();
        let b = build_incidence(&c);
        assert_eq!(b.entries.to_rows(), vec![vec![-1], vec![1]]);
        let a = build_loop_basis(&c).unwrap();
        assert_eq!(a.entries.to_rows(), vec![vec![1], vec![1]]);
        assert!(check_tellegen(&b, &a).unwrap());
        let k = classify_loops(&c, &a, &b);
        assert!(k.capacitor_only_loops.is_empty() && k.inductor_only_loops.is_empty());
        assert!(!k.inductor_current_cutsets_present);
    }

    #[test]
    fn fundamental_loops_have_one_cotree_entry() {
        let c = parse_netlist(
            "branch L1 a b L 1\nbranch C1 b c C 1\nbranch L2 c a L 1\nbranch C2 a b C 2\nbranch L3 b d L 1\nbranch C3 d c C 1\n",
        )
        .unwrap();
        let tree = spanning_tree(&c);
        let a = build_loop_basis(&c).unwrap();
        let cotree: Vec<usize> = (0..c.b()).filter(|&i| !tree[i]).collect();
        for (j, &k) in cotree.iter().enumerate() {
            for &other in &cotree {
                assert_eq!(a.entries[(other, j)] != 0, other == k);
            }
        }
        assert!(check_tellegen(&build_incidence(&c), &a).unwrap());
    }

    #[test]
    fn mismatch_is_an_error() {
        let b = IncidenceMatrix {
            entries: IntMatrix::zeros(3, 1),
            nodes: vec![0],
        };
        let a = LoopMatrix {
            entries: IntMatrix::zeros(2, 1),
            names: vec!["x".into()],
        };
        assert!(matches!(
            check_tellegen(&b, &a),
            Err(GraphError::DimensionMismatch(_))
        ));
    }
}
