//! Plain-text interchange: the flat POMDP file format understood by common
//! third-party solvers, and the alpha-vector policy dump.
//!
//! Numbers are written in Rust's shortest round-trip form, so an export
//! parses back to bit-identical tensors.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::solver::{AlphaVector, PolicySet};
use crate::tabular::TabularPomdp;

/// A parsed flat POMDP file.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatPomdp {
    pub discount: f64,
    pub pomdp: TabularPomdp,
}

/// Writes `pomdp` with discount `gamma`; zero entries are omitted.
pub fn export_flat_pomdp(pomdp: &TabularPomdp, gamma: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "discount: {gamma}");
    out.push_str("values: reward\n");
    let _ = writeln!(out, "states: {}", pomdp.state_labels.join(" "));
    let _ = writeln!(out, "actions: {}", pomdp.action_labels.join(" "));
    let _ = writeln!(out, "observations: {}", pomdp.observation_labels.join(" "));
    out.push_str("start: uniform\n\n");
    let (n, n_o) = (pomdp.n_states(), pomdp.n_observations());
    for (a, al) in pomdp.action_labels.iter().enumerate() {
        for s in 0..n {
            for sn in 0..n {
                let p = pomdp.t(a, s, sn);
                if p != 0.0 {
                    let _ = writeln!(
                        out,
                        "T: {al} : {} : {} {p}",
                        pomdp.state_labels[s], pomdp.state_labels[sn]
                    );
                }
            }
        }
    }
    out.push('\n');
    for (a, al) in pomdp.action_labels.iter().enumerate() {
        for sn in 0..n {
            for o in 0..n_o {
                let p = pomdp.z(a, sn, o);
                if p != 0.0 {
                    let _ = writeln!(
                        out,
                        "O: {al} : {} : {} {p}",
                        pomdp.state_labels[sn], pomdp.observation_labels[o]
                    );
                }
            }
        }
    }
    out.push('\n');
    for (a, al) in pomdp.action_labels.iter().enumerate() {
        for s in 0..n {
            let r = pomdp.r(a, s);
            if r != 0.0 {
                let _ = writeln!(out, "R: {al} : {} : * : * {r}", pomdp.state_labels[s]);
            }
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Axis {
    State,
    Action,
    Observation,
}

struct RewardEntry {
    a: Vec<usize>,
    s: Vec<usize>,
    s_next: Option<Vec<usize>>,
    o: Option<Vec<usize>>,
    value: f64,
}

struct Parser<'t> {
    lines: Vec<(usize, &'t str)>,
    pos: usize,
    states: Vec<String>,
    actions: Vec<String>,
    observations: Vec<String>,
}

fn perr<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line,
        msg: msg.into(),
    })
}

fn number(line: usize, tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .or_else(|_| perr(line, format!("expected a number, found '{tok}'")))
}

fn labels(line: usize, rest: &str, prefix: &str) -> Result<Vec<String>> {
    let toks: Vec<&str> = rest.split_whitespace().collect();
    match toks.as_slice() {
        [] => perr(line, "empty declaration"),
        [n] if n.chars().all(|c| c.is_ascii_digit()) => {
            let n: usize = n.parse().or_else(|_| perr(line, "bad count"))?;
            Ok((0..n).map(|i| format!("{prefix}{i}")).collect())
        }
        _ => Ok(toks.iter().map(|t| t.to_string()).collect()),
    }
}

impl<'t> Parser<'t> {
    fn new(text: &'t str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        Self {
            lines,
            pos: 0,
            states: Vec::new(),
            actions: Vec::new(),
            observations: Vec::new(),
        }
    }

    fn names(&self, axis: Axis) -> &[String] {
        match axis {
            Axis::State => &self.states,
            Axis::Action => &self.actions,
            Axis::Observation => &self.observations,
        }
    }

    fn resolve(&self, line: usize, tok: &str, axis: Axis) -> Result<Vec<usize>> {
        let names = self.names(axis);
        if tok == "*" {
            return Ok((0..names.len()).collect());
        }
        if let Some(i) = names.iter().position(|n| n == tok) {
            return Ok(vec![i]);
        }
        match tok.parse::<usize>() {
            Ok(i) if i < names.len() => Ok(vec![i]),
            _ => perr(line, format!("unknown identifier '{tok}'")),
        }
    }

    /// Reads `count` numbers (or a `uniform` / `identity` keyword) from the
    /// lines following the current one. `side` is the row length used by
    /// the keywords.
    fn block(&mut self, line: usize, count: usize, side: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let Some(&(l, text)) = self.lines.get(self.pos) else {
                return perr(line, format!("expected {count} numbers, found {}", out.len()));
            };
            if text.contains(':') {
                return perr(l, format!("expected {count} numbers, found {}", out.len()));
            }
            self.pos += 1;
            for tok in text.split_whitespace() {
                match tok {
                    "uniform" if out.is_empty() => {
                        return Ok(vec![1.0 / side as f64; count]);
                    }
                    "identity" if out.is_empty() && count == side * side => {
                        return Ok((0..count)
                            .map(|i| if i / side == i % side { 1.0 } else { 0.0 })
                            .collect());
                    }
                    _ => out.push(number(l, tok)?),
                }
            }
        }
        if out.len() != count {
            return perr(line, format!("expected {count} numbers, found {}", out.len()));
        }
        Ok(out)
    }
}

/// Parses a flat POMDP file. Transition and observation entries accept the
/// element, row and matrix forms with `*` wildcards; rewards may depend on
/// the successor state and observation, in which case they are folded into
/// their expectation.
pub fn parse_flat_pomdp(text: &str) -> Result<FlatPomdp> {
    let mut p = Parser::new(text);
    let mut discount = None;
    let mut cost = false;
    let mut model: Option<TabularPomdp> = None;
    let mut reward_entries: Vec<RewardEntry> = Vec::new();

    while p.pos < p.lines.len() {
        let (line, text) = p.lines[p.pos];
        p.pos += 1;
        let Some((key, rest)) = text.split_once(':') else {
            return perr(line, format!("unexpected line '{text}'"));
        };
        let key = key.trim();
        let rest = rest.trim();
        if matches!(key, "T" | "O" | "R") && model.is_none() {
            if p.states.is_empty() || p.actions.is_empty() || p.observations.is_empty() {
                return perr(line, "states, actions and observations must be declared first");
            }
            let mut m = TabularPomdp::zeros(p.states.len(), p.actions.len(), p.observations.len());
            m.state_labels = p.states.clone();
            m.action_labels = p.actions.clone();
            m.observation_labels = p.observations.clone();
            model = Some(m);
        }
        match key {
            "discount" => discount = Some(number(line, rest)?),
            "values" => match rest {
                "reward" => cost = false,
                "cost" => cost = true,
                _ => return perr(line, format!("values must be reward or cost, found '{rest}'")),
            },
            "states" => p.states = labels(line, rest, "s")?,
            "actions" => p.actions = labels(line, rest, "a")?,
            "observations" => p.observations = labels(line, rest, "o")?,
            "start" | "start include" | "start exclude" => {
                // the initial belief is not part of the tabular model
                if rest.is_empty() {
                    let n = p.states.len();
                    p.block(line, n, n)?;
                }
            }
            "T" | "O" => {
                let m = model.as_mut().expect("allocated above");
                let target_axis = if key == "T" { Axis::State } else { Axis::Observation };
                let n_rows = p.states.len();
                let n_cols = p.names(target_axis).len();
                let parts: Vec<&str> = rest.split(':').map(str::trim).collect();
                let acts = p.resolve(line, parts[0], Axis::Action)?;
                let mut set = |a: usize, r: usize, c: usize, v: f64| {
                    if key == "T" {
                        m.set_t(a, r, c, v)
                    } else {
                        m.set_z(a, r, c, v)
                    }
                };
                match parts.len() {
                    1 => {
                        let vals = p.block(line, n_rows * n_cols, n_cols)?;
                        for &a in &acts {
                            for r in 0..n_rows {
                                for c in 0..n_cols {
                                    set(a, r, c, vals[r * n_cols + c]);
                                }
                            }
                        }
                    }
                    2 => {
                        let rows = p.resolve(line, parts[1], Axis::State)?;
                        let vals = p.block(line, n_cols, n_cols)?;
                        for &a in &acts {
                            for &r in &rows {
                                for (c, &v) in vals.iter().enumerate() {
                                    set(a, r, c, v);
                                }
                            }
                        }
                    }
                    3 => {
                        let rows = p.resolve(line, parts[1], Axis::State)?;
                        let toks: Vec<&str> = parts[2].split_whitespace().collect();
                        let (col_tok, v) = match toks.as_slice() {
                            [c, v] => (*c, number(line, v)?),
                            [c] => (*c, p.block(line, 1, 1)?[0]),
                            _ => return perr(line, "expected '<to> <probability>'"),
                        };
                        let cols = p.resolve(line, col_tok, target_axis)?;
                        for &a in &acts {
                            for &r in &rows {
                                for &c in &cols {
                                    set(a, r, c, v);
                                }
                            }
                        }
                    }
                    _ => return perr(line, format!("malformed {key} entry")),
                }
            }
            "R" => {
                let parts: Vec<&str> = rest.split(':').map(str::trim).collect();
                if parts.len() != 4 {
                    return perr(line, "only the element form 'R: a : s : s' : o r' is supported");
                }
                let toks: Vec<&str> = parts[3].split_whitespace().collect();
                let (o_tok, value) = match toks.as_slice() {
                    [o, v] => (*o, number(line, v)?),
                    [o] => (*o, p.block(line, 1, 1)?[0]),
                    _ => return perr(line, "expected '<observation> <reward>'"),
                };
                reward_entries.push(RewardEntry {
                    a: p.resolve(line, parts[0], Axis::Action)?,
                    s: p.resolve(line, parts[1], Axis::State)?,
                    s_next: (parts[2] != "*")
                        .then(|| p.resolve(line, parts[2], Axis::State))
                        .transpose()?,
                    o: (o_tok != "*")
                        .then(|| p.resolve(line, o_tok, Axis::Observation))
                        .transpose()?,
                    value: if cost { -value } else { value },
                });
            }
            _ => return perr(line, format!("unknown section '{key}'")),
        }
    }

    let discount = discount.ok_or_else(|| Error::Parse {
        line: 0,
        msg: "missing discount".into(),
    })?;
    let mut pomdp = model.ok_or_else(|| Error::Parse {
        line: 0,
        msg: "no T/O/R entries".into(),
    })?;
    fold_rewards(&mut pomdp, &reward_entries);
    Ok(FlatPomdp { discount, pomdp })
}

/// Applies reward entries in file order. Entries that name a successor
/// state or observation are reduced to `E[R | s, a]` through T and O.
fn fold_rewards(m: &mut TabularPomdp, entries: &[RewardEntry]) {
    if entries.iter().all(|e| e.s_next.is_none() && e.o.is_none()) {
        for e in entries {
            for &a in &e.a {
                for &s in &e.s {
                    m.rewards[a][s] = e.value;
                }
            }
        }
        return;
    }
    let (n, n_o) = (m.n_states(), m.n_observations());
    for a in 0..m.n_actions() {
        let mut full = vec![0.0; n * n * n_o];
        for e in entries.iter().filter(|e| e.a.contains(&a)) {
            let all_s: Vec<usize> = (0..n).collect();
            let all_o: Vec<usize> = (0..n_o).collect();
            for &s in &e.s {
                for &sn in e.s_next.as_ref().unwrap_or(&all_s) {
                    for &o in e.o.as_ref().unwrap_or(&all_o) {
                        full[(s * n + sn) * n_o + o] = e.value;
                    }
                }
            }
        }
        for s in 0..n {
            let mut r = 0.0;
            for sn in 0..n {
                let t = m.t(a, s, sn);
                if t == 0.0 {
                    continue;
                }
                for o in 0..n_o {
                    r += t * m.z(a, sn, o) * full[(s * n + sn) * n_o + o];
                }
            }
            m.rewards[a][s] = r;
        }
    }
}

/// Text dump of a solved policy, bound to the model it was solved for.
pub fn save_policy(policy: &PolicySet, model_hash: &str) -> String {
    let n = policy.alphas.first().map_or(0, |a| a.values.len());
    let mut out = format!(
        "# alpha-vector policy\nmodel_hash {model_hash}\nstates {n}\nvectors {}\n",
        policy.len()
    );
    for a in &policy.alphas {
        out.push_str(&a.action.to_string());
        for v in &a.values {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

/// Reads a policy dump, refusing it unless it was solved for
/// `expected_hash`.
pub fn load_policy(text: &str, expected_hash: &str) -> Result<PolicySet> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut header = |key: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, l)) => match l.split_once(' ') {
                Some((k, v)) if k == key => Ok((i, v.trim().to_string())),
                _ => perr(i, format!("expected '{key} ...'")),
            },
            None => perr(0, format!("missing '{key}' header")),
        }
    };
    let (_, found) = header("model_hash")?;
    if found != expected_hash {
        return Err(Error::HashMismatch {
            expected: expected_hash.to_string(),
            found,
        });
    }
    let (li, n) = header("states")?;
    let n: usize = n.parse().or_else(|_| perr(li, "bad state count"))?;
    let (lv, k) = header("vectors")?;
    let k: usize = k.parse().or_else(|_| perr(lv, "bad vector count"))?;
    let mut alphas = Vec::with_capacity(k);
    for (i, l) in lines {
        let mut toks = l.split_whitespace();
        let action = toks
            .next()
            .and_then(|t| t.parse::<usize>().ok())
            .ok_or_else(|| Error::Parse {
                line: i,
                msg: "expected an action ordinal".into(),
            })?;
        let values = toks.map(|t| number(i, t)).collect::<Result<Vec<_>>>()?;
        if values.len() != n {
            return perr(i, format!("expected {n} values, found {}", values.len()));
        }
        alphas.push(AlphaVector { values, action });
    }
    if alphas.len() != k {
        return perr(0, format!("expected {k} vectors, found {}", alphas.len()));
    }
    Ok(PolicySet { alphas })
}
