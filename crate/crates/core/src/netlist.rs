//! Netlist text format and the validated [`Circuit`] value.
//!
//! ```text
//! # comment
//! node V1 V2 V3 V4          # optional; fixes node order
//! ref V4                    # optional; defaults to the last node
//! branch L1 V4 V3 L 1/2     # name tail head kind params
//! branch C1 V1 V4 Cnl poly(0,1,0,0.1) on [-5,5]
//! branch S1 V4 V1 I sin(1,2,0)
//! loop I1 +C1 -C2 +C3
//! coords C3 L2
//! init C1 0.25
//! ```
//!
//! Kinds: `L`, `C` (exact rational value), `Lnl`, `Cnl` (scalar law),
//! `I`, `V` (time function).

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use num::Zero;

use crate::exact::{fmt_rational, parse_rational, Rational};
use crate::functions::{ScalarForm, ScalarFunction, TimeFunction, DEFAULT_DOMAIN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DeviceKind {
    Inductor,
    Capacitor,
    CurrentSource,
    VoltageSource,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DeviceModel {
    /// Inductance in henries.
    LinearInductor(Rational),
    /// Inductance as a function of current.
    NonlinearInductor(ScalarFunction),
    /// Capacitance in farads.
    LinearCapacitor(Rational),
    /// Voltage as a function of charge.
    NonlinearCapacitor(ScalarFunction),
    CurrentSource(TimeFunction),
    VoltageSource(TimeFunction),
}

impl DeviceModel {
    pub fn kind(&self) -> DeviceKind {
        match self {
            DeviceModel::LinearInductor(_) | DeviceModel::NonlinearInductor(_) => {
                DeviceKind::Inductor
            }
            DeviceModel::LinearCapacitor(_) | DeviceModel::NonlinearCapacitor(_) => {
                DeviceKind::Capacitor
            }
            DeviceModel::CurrentSource(_) => DeviceKind::CurrentSource,
            DeviceModel::VoltageSource(_) => DeviceKind::VoltageSource,
        }
    }

    pub fn is_linear(&self) -> bool {
        !matches!(
            self,
            DeviceModel::NonlinearInductor(_) | DeviceModel::NonlinearCapacitor(_)
        )
    }

    /// Exact coefficient of the linear law: L for inductors, 1/C for capacitors.
    pub fn linear_coefficient(&self) -> Option<Rational> {
        match self {
            DeviceModel::LinearInductor(l) => Some(l.clone()),
            DeviceModel::LinearCapacitor(c) => Some(c.recip()),
            _ => None,
        }
    }

    /// n-th derivative of the device law: L(i) for inductors, v(q) for capacitors.
    pub fn law(&self, x: f64, n: usize) -> f64 {
        match self {
            DeviceModel::LinearInductor(l) => {
                if n == 0 {
                    crate::exact::to_f64(l)
                } else {
                    0.0
                }
            }
            DeviceModel::LinearCapacitor(c) => {
                let e = 1.0 / crate::exact::to_f64(c);
                match n {
                    0 => e * x,
                    1 => e,
                    _ => 0.0,
                }
            }
            DeviceModel::NonlinearInductor(f) | DeviceModel::NonlinearCapacitor(f) => {
                f.derivative(x, n)
            }
            DeviceModel::CurrentSource(_) | DeviceModel::VoltageSource(_) => 0.0,
        }
    }

    /// Integral of the law from 0: flux for inductors, stored energy for capacitors.
    pub fn law_antiderivative(&self, x: f64) -> f64 {
        match self {
            DeviceModel::LinearInductor(l) => crate::exact::to_f64(l) * x,
            DeviceModel::LinearCapacitor(c) => 0.5 * x * x / crate::exact::to_f64(c),
            DeviceModel::NonlinearInductor(f) | DeviceModel::NonlinearCapacitor(f) => {
                f.antiderivative(x)
            }
            DeviceModel::CurrentSource(_) | DeviceModel::VoltageSource(_) => 0.0,
        }
    }

    pub fn source(&self) -> Option<&TimeFunction> {
        match self {
            DeviceModel::CurrentSource(f) | DeviceModel::VoltageSource(f) => Some(f),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub name: String,
    pub tail: usize,
    pub head: usize,
    pub device: DeviceModel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitLoop {
    pub name: String,
    /// (branch index, +1 or -1)
    pub members: Vec<(usize, i8)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub nodes: Vec<String>,
    pub reference: usize,
    pub branches: Vec<Branch>,
    pub loops: Option<Vec<ExplicitLoop>>,
    pub coords: Option<Vec<usize>>,
    /// Initial capacitor charges and inductor currents by branch index.
    pub initial: BTreeMap<usize, Rational>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetlistErrorKind {
    SyntaxError,
    DuplicateBranch,
    DuplicateNode,
    UnknownNode,
    UnknownBranch,
    UnknownDeviceKind,
    ZeroLinearValue,
    DegenerateDeviceFunction,
    DisconnectedGraph,
    NoLoop,
    InvalidExplicitLoop,
    InvalidInit,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: {kind:?}: {message}")]
pub struct NetlistError {
    pub kind: NetlistErrorKind,
    /// 1-based; 0 when the circuit was built programmatically.
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl NetlistError {
    fn new(kind: NetlistErrorKind, line: usize, column: usize, message: impl Into<String>) -> Self {
        NetlistError {
            kind,
            line,
            column,
            message: message.into(),
        }
    }
}

impl Circuit {
    pub fn b(&self) -> usize {
        self.branches.len()
    }

    /// Number of non-reference nodes.
    pub fn n(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn m(&self) -> usize {
        self.b() - self.n()
    }

    pub fn branch_index(&self, name: &str) -> Option<usize> {
        self.branches.iter().position(|b| b.name == name)
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    pub fn kind(&self, branch: usize) -> DeviceKind {
        self.branches[branch].device.kind()
    }

    pub fn indices_of(&self, kind: DeviceKind) -> Vec<usize> {
        (0..self.b()).filter(|&i| self.kind(i) == kind).collect()
    }

    pub fn all_linear(&self) -> bool {
        self.branches.iter().all(|b| b.device.is_linear())
    }

    pub fn has_sources(&self) -> bool {
        self.branches.iter().any(|b| b.device.source().is_some())
    }

    /// Checks every structural invariant. Errors carry line 0.
    pub fn validate(&self) -> Result<(), NetlistError> {
        let err = |k, m: String| Err(NetlistError::new(k, 0, 0, m));
        let mut names = HashSet::new();
        for n in &self.nodes {
            if !names.insert(n.as_str()) {
                return err(
                    NetlistErrorKind::DuplicateNode,
                    format!("node {} declared twice", n),
                );
            }
        }
        if self.reference >= self.nodes.len() {
            return err(
                NetlistErrorKind::UnknownNode,
                "reference node out of range".into(),
            );
        }
        let mut bnames = HashSet::new();
        for br in &self.branches {
            if !bnames.insert(br.name.as_str()) {
                return err(
                    NetlistErrorKind::DuplicateBranch,
                    format!("branch {} declared twice", br.name),
                );
            }
            if br.tail >= self.nodes.len() || br.head >= self.nodes.len() {
                return err(
                    NetlistErrorKind::UnknownNode,
                    format!("branch {} has an unknown endpoint", br.name),
                );
            }
            if br.tail == br.head {
                return err(
                    NetlistErrorKind::SyntaxError,
                    format!("branch {} starts and ends at the same node", br.name),
                );
            }
            check_device(&br.device).map_err(|(k, m)| {
                NetlistError::new(k, 0, 0, format!("branch {}: {}", br.name, m))
            })?;
        }
        if !connected(
            self.nodes.len(),
            self.branches.iter().map(|b| (b.tail, b.head)),
        ) {
            return err(
                NetlistErrorKind::DisconnectedGraph,
                "graph is not connected".into(),
            );
        }
        if self.branches.len() < self.nodes.len() {
            return err(NetlistErrorKind::NoLoop, "circuit has no loop".into());
        }
        if let Some(loops) = &self.loops {
            crate::graph::validate_explicit_loops(self, loops).map_err(|e| {
                NetlistError::new(NetlistErrorKind::InvalidExplicitLoop, 0, 0, e.to_string())
            })?;
        }
        if let Some(coords) = &self.coords {
            if coords.iter().any(|&c| c >= self.b()) {
                return err(
                    NetlistErrorKind::UnknownBranch,
                    "coordinate index out of range".into(),
                );
            }
        }
        for &i in self.initial.keys() {
            if i >= self.b() {
                return err(
                    NetlistErrorKind::UnknownBranch,
                    "initial value for unknown branch".into(),
                );
            }
            if !matches!(self.kind(i), DeviceKind::Inductor | DeviceKind::Capacitor) {
                return err(
                    NetlistErrorKind::InvalidInit,
                    format!("branch {} is a source", self.branches[i].name),
                );
            }
        }
        Ok(())
    }
}

fn check_device(d: &DeviceModel) -> Result<(), (NetlistErrorKind, String)> {
    match d {
        DeviceModel::LinearInductor(v) | DeviceModel::LinearCapacitor(v) if v.is_zero() => Err((
            NetlistErrorKind::ZeroLinearValue,
            "linear value must be nonzero".into(),
        )),
        DeviceModel::NonlinearInductor(f) if !f.nonvanishing_on_domain() => Err((
            NetlistErrorKind::DegenerateDeviceFunction,
            format!("inductance {} vanishes on its domain", f),
        )),
        DeviceModel::NonlinearCapacitor(f) if !f.strictly_monotone_on_domain() => Err((
            NetlistErrorKind::DegenerateDeviceFunction,
            format!("capacitor law {} is not invertible on its domain", f),
        )),
        _ => Ok(()),
    }
}

fn connected(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
    }
    let root = if n == 0 { 0 } else { find(&mut parent, 0) };
    (0..n).all(|x| find(&mut parent, x) == root)
}

struct Token<'a> {
    col: usize,
    text: &'a str,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    col: s + 1,
                    text: &line[s..i],
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            col: s + 1,
            text: &line[s..],
        });
    }
    out
}

struct PendingRef<'a> {
    line: usize,
    tokens: Vec<Token<'a>>,
}

/// Parses and validates a netlist.
pub fn parse_netlist(text: &str) -> Result<Circuit, NetlistError> {
    use NetlistErrorKind::*;
    let mut declared: Vec<String> = Vec::new();
    let mut implicit: Vec<String> = Vec::new();
    let mut reference: Option<(usize, usize, String)> = None;
    let mut raw_branches: Vec<(usize, Vec<Token>, String, String, DeviceModel)> = Vec::new();
    let mut loops: Vec<PendingRef> = Vec::new();
    let mut coords: Option<PendingRef> = None;
    let mut inits: Vec<PendingRef> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let tokens = tokenize(content);
        let Some(first) = tokens.first() else {
            continue;
        };
        match first.text {
            "node" => {
                if tokens.len() < 2 {
                    return Err(NetlistError::new(
                        SyntaxError,
                        line_no,
                        first.col,
                        "node needs at least one name",
                    ));
                }
                for t in &tokens[1..] {
                    if declared.iter().any(|n| n == t.text) {
                        return Err(NetlistError::new(
                            DuplicateNode,
                            line_no,
                            t.col,
                            format!("node {} declared twice", t.text),
                        ));
                    }
                    declared.push(t.text.to_string());
                }
            }
            "ref" => {
                if tokens.len() != 2 {
                    return Err(NetlistError::new(
                        SyntaxError,
                        line_no,
                        first.col,
                        "ref takes exactly one node",
                    ));
                }
                if reference.is_some() {
                    return Err(NetlistError::new(
                        SyntaxError,
                        line_no,
                        first.col,
                        "ref given twice",
                    ));
                }
                reference = Some((line_no, tokens[1].col, tokens[1].text.to_string()));
            }
            "branch" => {
                if tokens.len() < 5 {
                    return Err(NetlistError::new(
                        SyntaxError,
                        line_no,
                        first.col,
                        "expected: branch <name> <tail> <head> <kind> <params>",
                    ));
                }
                let name = tokens[1].text;
                if raw_branches.iter().any(|b| b.2 == name) {
                    return Err(NetlistError::new(
                        DuplicateBranch,
                        line_no,
                        tokens[1].col,
                        format!("branch {} declared twice", name),
                    ));
                }
                let kind = &tokens[4];
                let params_col = tokens.get(5).map_or(kind.col + kind.text.len(), |t| t.col);
                let params = tokens.get(5).map_or("", |t| &content[t.col - 1..]).trim();
                let device = parse_device(kind.text, params).map_err(|(k, m, at_kind)| {
                    NetlistError::new(k, line_no, if at_kind { kind.col } else { params_col }, m)
                })?;
                check_device(&device)
                    .map_err(|(k, m)| NetlistError::new(k, line_no, params_col, m))?;
                for t in &tokens[2..4] {
                    if !implicit.iter().any(|n| n == t.text) {
                        implicit.push(t.text.to_string());
                    }
                }
                let mut head_tokens = tokens;
                head_tokens.truncate(4);
                raw_branches.push((
                    line_no,
                    head_tokens,
                    name.to_string(),
                    String::new(),
                    device,
                ));
            }
            "loop" => {
                if tokens.len() < 3 {
                    return Err(NetlistError::new(
                        SyntaxError,
                        line_no,
                        first.col,
                        "expected: loop <name> <±branch>...",
                    ));
                }
                loops.push(PendingRef {
                    line: line_no,
                    tokens,
                });
            }
            "coords" => {
                if coords.is_some() {
                    return Err(NetlistError::new(
                        SyntaxError,
                        line_no,
                        first.col,
                        "coords given twice",
                    ));
                }
                coords = Some(PendingRef {
                    line: line_no,
                    tokens,
                });
            }
            "init" => {
                if tokens.len() != 3 {
                    return Err(NetlistError::new(
                        SyntaxError,
                        line_no,
                        first.col,
                        "expected: init <branch> <value>",
                    ));
                }
                inits.push(PendingRef {
                    line: line_no,
                    tokens,
                });
            }
            other => {
                return Err(NetlistError::new(
                    SyntaxError,
                    line_no,
                    first.col,
                    format!("unknown directive {}", other),
                ));
            }
        }
    }

    if raw_branches.is_empty() {
        return Err(NetlistError::new(NoLoop, 0, 0, "netlist has no branches"));
    }

    let nodes = if declared.is_empty() {
        implicit
    } else {
        declared
    };
    let find_node = |name: &str, line: usize, col: usize| {
        nodes.iter().position(|n| n == name).ok_or_else(|| {
            NetlistError::new(UnknownNode, line, col, format!("unknown node {}", name))
        })
    };
    let mut branches = Vec::new();
    for (line, toks, name, _, device) in raw_branches {
        let tail = find_node(toks[2].text, line, toks[2].col)?;
        let head = find_node(toks[3].text, line, toks[3].col)?;
        if tail == head {
            return Err(NetlistError::new(
                SyntaxError,
                line,
                toks[3].col,
                "branch starts and ends at the same node",
            ));
        }
        branches.push(Branch {
            name,
            tail,
            head,
            device,
        });
    }
    let reference = match reference {
        Some((line, col, name)) => find_node(&name, line, col)?,
        None => nodes.len() - 1,
    };
    let find_branch = |name: &str, line: usize, col: usize| {
        branches.iter().position(|b| b.name == name).ok_or_else(|| {
            NetlistError::new(UnknownBranch, line, col, format!("unknown branch {}", name))
        })
    };

    let mut explicit = Vec::new();
    for l in &loops {
        let name = l.tokens[1].text.to_string();
        if explicit.iter().any(|e: &ExplicitLoop| e.name == name) {
            return Err(NetlistError::new(
                InvalidExplicitLoop,
                l.line,
                l.tokens[1].col,
                format!("loop {} declared twice", name),
            ));
        }
        let mut members = Vec::new();
        for t in &l.tokens[2..] {
            let (sign, bname) = match t.text.as_bytes()[0] {
                b'+' => (1i8, &t.text[1..]),
                b'-' => (-1i8, &t.text[1..]),
                _ => (1i8, t.text),
            };
            let idx = find_branch(bname, l.line, t.col)?;
            if members.iter().any(|(i, _)| *i == idx) {
                return Err(NetlistError::new(
                    InvalidExplicitLoop,
                    l.line,
                    t.col,
                    format!("branch {} repeated in loop", bname),
                ));
            }
            members.push((idx, sign));
        }
        explicit.push(ExplicitLoop { name, members });
    }
    let coords = match coords {
        Some(c) => {
            let mut idx = Vec::new();
            for t in &c.tokens[1..] {
                let i = find_branch(t.text, c.line, t.col)?;
                if idx.contains(&i) {
                    return Err(NetlistError::new(
                        SyntaxError,
                        c.line,
                        t.col,
                        format!("coordinate {} repeated", t.text),
                    ));
                }
                idx.push(i);
            }
            Some(idx)
        }
        None => None,
    };
    let mut initial = BTreeMap::new();
    for p in &inits {
        let i = find_branch(p.tokens[1].text, p.line, p.tokens[1].col)?;
        if !matches!(
            branches[i].device.kind(),
            DeviceKind::Inductor | DeviceKind::Capacitor
        ) {
            return Err(NetlistError::new(
                InvalidInit,
                p.line,
                p.tokens[1].col,
                "initial values apply to inductors and capacitors only",
            ));
        }
        let v = parse_rational(p.tokens[2].text).ok_or_else(|| {
            NetlistError::new(
                SyntaxError,
                p.line,
                p.tokens[2].col,
                format!("bad number {}", p.tokens[2].text),
            )
        })?;
        if initial.insert(i, v).is_some() {
            return Err(NetlistError::new(
                InvalidInit,
                p.line,
                p.tokens[1].col,
                "initial value given twice",
            ));
        }
    }

    let circuit = Circuit {
        nodes,
        reference,
        branches,
        loops: if explicit.is_empty() {
            None
        } else {
            Some(explicit)
        },
        coords,
        initial,
    };
    if let Err(mut e) = circuit.validate() {
        if let Some(l) = loops.first() {
            if e.kind == InvalidExplicitLoop {
                e.line = l.line;
                e.column = 1;
            }
        }
        return Err(e);
    }
    Ok(circuit)
}

type DeviceError = (NetlistErrorKind, String, bool);

fn parse_device(kind: &str, params: &str) -> Result<DeviceModel, DeviceError> {
    use NetlistErrorKind::*;
    let need = |p: &str| -> Result<(), DeviceError> {
        if p.is_empty() {
            Err((
                SyntaxError,
                format!("device {} needs parameters", kind),
                false,
            ))
        } else {
            Ok(())
        }
    };
    match kind {
        "L" | "C" => {
            need(params)?;
            let v = parse_rational(params).ok_or((
                SyntaxError,
                format!("bad value {}", params),
                false,
            ))?;
            if v.is_zero() {
                return Err((
                    ZeroLinearValue,
                    "linear value must be nonzero".into(),
                    false,
                ));
            }
            Ok(if kind == "L" {
                DeviceModel::LinearInductor(v)
            } else {
                DeviceModel::LinearCapacitor(v)
            })
        }
        "Lnl" | "Cnl" => {
            need(params)?;
            let f = parse_scalar_function(params).map_err(|m| (SyntaxError, m, false))?;
            Ok(if kind == "Lnl" {
                DeviceModel::NonlinearInductor(f)
            } else {
                DeviceModel::NonlinearCapacitor(f)
            })
        }
        "I" | "V" => {
            need(params)?;
            let f = parse_time_function(params).map_err(|m| (SyntaxError, m, false))?;
            Ok(if kind == "I" {
                DeviceModel::CurrentSource(f)
            } else {
                DeviceModel::VoltageSource(f)
            })
        }
        other => Err((
            UnknownDeviceKind,
            format!("unknown device kind {}", other),
            true,
        )),
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("bad number {}", s.trim()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite number {}", s.trim()))
    }
}

/// Splits `name(args) rest` into name, argument list and the remainder.
fn call(s: &str) -> Result<(&str, Vec<&str>, &str), String> {
    let open = s
        .find('(')
        .ok_or_else(|| format!("expected name(args) in {}", s))?;
    let close = s.find(')').ok_or_else(|| format!("missing ) in {}", s))?;
    if close < open {
        return Err(format!("malformed call {}", s));
    }
    let args = &s[open + 1..close];
    let list = if args.trim().is_empty() {
        Vec::new()
    } else {
        args.split(',').collect()
    };
    Ok((s[..open].trim(), list, s[close + 1..].trim()))
}

fn parse_pairs(args: &[&str]) -> Result<Vec<(f64, f64)>, String> {
    let mut pts = Vec::new();
    for a in args {
        let (x, y) = a
            .split_once(':')
            .ok_or_else(|| format!("expected x:y, got {}", a.trim()))?;
        pts.push((parse_f64(x)?, parse_f64(y)?));
    }
    if pts.is_empty() {
        return Err("pwl needs at least one point".into());
    }
    if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err("pwl breakpoints must be strictly increasing".into());
    }
    Ok(pts)
}

pub fn parse_scalar_function(s: &str) -> Result<ScalarFunction, String> {
    let (name, args, rest) = call(s)?;
    let nums = || {
        args.iter()
            .map(|a| parse_f64(a))
            .collect::<Result<Vec<f64>, String>>()
    };
    let form = match name {
        "poly" => {
            let c = nums()?;
            if c.is_empty() {
                return Err("poly needs coefficients".into());
            }
            ScalarForm::Polynomial(c)
        }
        "sin" => {
            let v = nums()?;
            if v.len() != 5 {
                return Err("sin(offset,slope,amplitude,omega,phase) takes 5 numbers".into());
            }
            ScalarForm::AffinePlusSinusoid {
                offset: v[0],
                slope: v[1],
                amplitude: v[2],
                omega: v[3],
                phase: v[4],
            }
        }
        "pwl" => {
            let p = parse_pairs(&args)?;
            if p.len() < 2 {
                return Err("device pwl needs at least two points".into());
            }
            ScalarForm::PiecewiseLinear(p)
        }
        other => return Err(format!("unknown function {}", other)),
    };
    let domain = if rest.is_empty() {
        DEFAULT_DOMAIN
    } else {
        let inner = rest
            .strip_prefix("on")
            .map(str::trim)
            .and_then(|r| r.strip_prefix('['))
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| format!("expected 'on [a,b]', got {}", rest))?;
        let (a, b) = inner.split_once(',').ok_or("domain needs two bounds")?;
        let (a, b) = (parse_f64(a)?, parse_f64(b)?);
        if a >= b {
            return Err("empty domain".into());
        }
        (a, b)
    };
    Ok(ScalarFunction { form, domain })
}

pub fn parse_time_function(s: &str) -> Result<TimeFunction, String> {
    let s = s.trim();
    if !s.contains('(') {
        return parse_f64(s).map(TimeFunction::Constant);
    }
    let (name, args, rest) = call(s)?;
    if !rest.is_empty() {
        return Err(format!("trailing text {}", rest));
    }
    let nums = || {
        args.iter()
            .map(|a| parse_f64(a))
            .collect::<Result<Vec<f64>, String>>()
    };
    match name {
        "const" => {
            let v = nums()?;
            if v.len() != 1 {
                return Err("const takes one number".into());
            }
            Ok(TimeFunction::Constant(v[0]))
        }
        "sin" => {
            let v = nums()?;
            if v.len() != 3 {
                return Err("sin(amplitude,omega,phase) takes 3 numbers".into());
            }
            Ok(TimeFunction::Sinusoid {
                amplitude: v[0],
                omega: v[1],
                phase: v[2],
            })
        }
        "poly" => {
            let c = nums()?;
            if c.is_empty() {
                return Err("poly needs coefficients".into());
            }
            Ok(TimeFunction::Polynomial(c))
        }
        "pwl" => Ok(TimeFunction::PiecewiseLinear(parse_pairs(&args)?)),
        other => Err(format!("unknown function {}", other)),
    }
}

fn device_text(d: &DeviceModel) -> String {
    match d {
        DeviceModel::LinearInductor(v) => format!("L {}", fmt_rational(v)),
        DeviceModel::LinearCapacitor(v) => format!("C {}", fmt_rational(v)),
        DeviceModel::NonlinearInductor(f) => format!("Lnl {}", f),
        DeviceModel::NonlinearCapacitor(f) => format!("Cnl {}", f),
        DeviceModel::CurrentSource(f) => format!("I {}", f),
        DeviceModel::VoltageSource(f) => format!("V {}", f),
    }
}

/// Canonical text. `node` and `ref` lines are omitted when they match the defaults.
pub fn serialize_circuit(c: &Circuit) -> String {
    let mut out = String::new();
    let mut appearance: Vec<usize> = Vec::new();
    for b in &c.branches {
        for n in [b.tail, b.head] {
            if !appearance.contains(&n) {
                appearance.push(n);
            }
        }
    }
    let natural =
        appearance.len() == c.nodes.len() && appearance.iter().enumerate().all(|(i, &n)| i == n);
    if !natural {
        out.push_str(&format!("node {}\n", c.nodes.join(" ")));
    }
    if c.reference != c.nodes.len() - 1 {
        out.push_str(&format!("ref {}\n", c.nodes[c.reference]));
    }
    for b in &c.branches {
        out.push_str(&format!(
            "branch {} {} {} {}\n",
            b.name,
            c.nodes[b.tail],
            c.nodes[b.head],
            device_text(&b.device)
        ));
    }
    for l in c.loops.iter().flatten() {
        let members: Vec<String> = l
            .members
            .iter()
            .map(|(i, s)| format!("{}{}", if *s > 0 { '+' } else { '-' }, c.branches[*i].name))
            .collect();
        out.push_str(&format!("loop {} {}\n", l.name, members.join(" ")));
    }
    if let Some(coords) = &c.coords {
        let names: Vec<&str> = coords
            .iter()
            .map(|&i| c.branches[i].name.as_str())
            .collect();
        out.push_str(&format!("coords {}\n", names.join(" ")));
    }
    for (i, v) in &c.initial {
        out.push_str(&format!(
            "init {} {}\n",
            c.branches[*i].name,
            fmt_rational(v)
        ));
    }
    out
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_circuit(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_loop_round_trip() {
        let text = "branch L1 n1 n2 L 1\nbranch C1 n2 n1 C 1\n";
        let c = parse_netlist(text).unwrap();
        assert_eq!((c.b(), c.n(), c.m()), (2, 1, 1));
        assert_eq!(serialize_circuit(&c), text);
    }

    #[test]
    fn reports_line_and_column() {
        let e = parse_netlist("branch L1 a b L 1\nbranch C1 b a X 1\n").unwrap_err();
        assert_eq!(e.kind, NetlistErrorKind::UnknownDeviceKind);
        assert_eq!((e.line, e.column), (2, 15));
        let e = parse_netlist("branch L1 a b L 0\nbranch C1 b a C 1\n").unwrap_err();
        assert_eq!(e.kind, NetlistErrorKind::ZeroLinearValue);
    }

    #[test]
    fn disconnected_and_loopless() {
        let e = parse_netlist(
            "branch L1 a b L 1\nbranch C1 b a C 1\nbranch L2 c d L 1\nbranch C2 d c C 1\n",
        )
        .unwrap_err();
        assert_eq!(e.kind, NetlistErrorKind::DisconnectedGraph);
        let e = parse_netlist("branch L1 a b L 1\nbranch C1 b c C 1\n").unwrap_err();
        assert_eq!(e.kind, NetlistErrorKind::NoLoop);
    }

    #[test]
    fn declared_nodes_must_cover_endpoints() {
        let e = parse_netlist("node a b\nbranch L1 a b L 1\nbranch C1 b z C 1\n").unwrap_err();
        assert_eq!(e.kind, NetlistErrorKind::UnknownNode);
        assert_eq!(e.line, 3);
    }

    #[test]
    fn nonlinear_capacitor_must_be_invertible() {
        let e = parse_netlist("branch L1 a b L 1\nbranch C1 b a Cnl poly(0,0,1)\n").unwrap_err();
        assert_eq!(e.kind, NetlistErrorKind::DegenerateDeviceFunction);
        assert!(parse_netlist(
            "branch L1 a b Lnl poly(1,0,0.5) on [-2,2]\nbranch C1 b a Cnl poly(0,1,0,0.1)\n"
        )
        .is_ok());
    }
}
