//! Gate-level combinational netlists and the `.bench` text format.
//!
//! Nets are interned into dense ids; ports are identified by their net name,
//! as in the ISCAS benchmark files. Netlists are immutable once validated —
//! every transformation goes through [`NetlistBuilder`] and produces a fresh,
//! re-validated netlist. The dialect extends classic `.bench` with zero-input
//! `CONST0()`/`CONST1()` pseudo-gates; sequential elements are rejected.

use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;
use thiserror::Error;

/// Dense net identifier. Indexes into the netlist's name and driver tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NetId(pub(crate) u32);

impl NetId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buf,
    Const0,
    Const1,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Nand => "NAND",
            GateKind::Or => "OR",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Not => "NOT",
            GateKind::Buf => "BUFF",
            GateKind::Const0 => "CONST0",
            GateKind::Const1 => "CONST1",
        }
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            GateKind::Not | GateKind::Buf => n == 1,
            GateKind::Const0 | GateKind::Const1 => n == 0,
            _ => n >= 2,
        }
    }
}

/// Provenance of a gate with respect to a locking transformation. Freshly
/// parsed circuits are all `Original`; the removal attack keys off these tags.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateTag {
    Original,
    FlipLogic,
    RestoreLogic,
    StripLogic,
    KeyGate,
    Combiner,
}

#[derive(Clone, Debug)]
pub struct Gate {
    pub kind: GateKind,
    pub inputs: Vec<NetId>,
    pub output: NetId,
    pub tag: GateTag,
}

#[derive(Debug, Error)]
pub enum NetlistError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("sequential element {element} at line {line}: combinational netlists only")]
    Sequential { line: usize, element: String },
    #[error("undefined signal {name}")]
    UndefinedSignal { name: String },
    #[error("net {name} has more than one driver")]
    MultipleDrivers { name: String },
    #[error("combinational loop through {through}")]
    CombinationalLoop { through: String },
    #[error("{kind} gate driving {gate} has {got} input(s)")]
    BadArity { gate: String, kind: &'static str, got: usize },
    #[error("duplicate port declaration {name}")]
    DuplicatePort { name: String },
    #[error("no net named {name}")]
    UnknownNet { name: String },
    #[error("{name} is not an output port")]
    NotAnOutput { name: String },
}

/// Validated combinational netlist.
#[derive(Clone, Debug)]
pub struct Netlist {
    name: String,
    net_names: Vec<String>,
    inputs: Vec<NetId>,
    key_inputs: Vec<NetId>,
    outputs: Vec<NetId>,
    gates: Vec<Gate>,
    /// Gate indices in dependency order (inputs before consumers).
    topo: Vec<usize>,
    /// Driving gate index per net; `None` for input ports.
    driver: Vec<Option<usize>>,
}

impl Netlist {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn net_name(&self, id: NetId) -> &str {
        &self.net_names[id.index()]
    }

    pub fn net_count(&self) -> usize {
        self.net_names.len()
    }

    pub fn find_net(&self, name: &str) -> Option<NetId> {
        // Linear scan: lookups by name happen at API boundaries, not in loops.
        self.net_names.iter().position(|n| n == name).map(|i| NetId(i as u32))
    }

    /// Data primary inputs in port order.
    pub fn inputs(&self) -> &[NetId] {
        &self.inputs
    }

    /// Key inputs in port order.
    pub fn key_inputs(&self) -> &[NetId] {
        &self.key_inputs
    }

    /// Primary outputs in port order.
    pub fn outputs(&self) -> &[NetId] {
        &self.outputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Gate indices in evaluation order.
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    /// Index of the gate driving `net`, or `None` for port-driven nets.
    pub fn driver_of(&self, net: NetId) -> Option<usize> {
        self.driver[net.index()]
    }

    pub fn input_names(&self) -> impl Iterator<Item = &str> {
        self.inputs.iter().map(|&id| self.net_name(id))
    }

    pub fn key_input_names(&self) -> impl Iterator<Item = &str> {
        self.key_inputs.iter().map(|&id| self.net_name(id))
    }

    pub fn output_names(&self) -> impl Iterator<Item = &str> {
        self.outputs.iter().map(|&id| self.net_name(id))
    }

    /// Set of data primary-input port names that can reach `output_port`.
    /// Key inputs are deliberately excluded: cone selection for locking is
    /// defined over the data inputs.
    pub fn fanin_cone(&self, output_port: &str) -> Result<BTreeSet<String>, NetlistError> {
        let net = self
            .find_net(output_port)
            .ok_or_else(|| NetlistError::UnknownNet { name: output_port.into() })?;
        if !self.outputs.contains(&net) {
            return Err(NetlistError::NotAnOutput { name: output_port.into() });
        }
        Ok(self.fanin_cone_of_net(net))
    }

    pub(crate) fn fanin_cone_of_net(&self, net: NetId) -> BTreeSet<String> {
        let mut seen = vec![false; self.net_names.len()];
        let mut stack = vec![net];
        let mut cone = BTreeSet::new();
        let input_set: Vec<bool> = {
            let mut v = vec![false; self.net_names.len()];
            for &i in &self.inputs {
                v[i.index()] = true;
            }
            v
        };
        while let Some(n) = stack.pop() {
            if seen[n.index()] {
                continue;
            }
            seen[n.index()] = true;
            if input_set[n.index()] {
                cone.insert(self.net_name(n).to_string());
            } else if let Some(g) = self.driver[n.index()] {
                stack.extend(self.gates[g].inputs.iter().copied());
            }
        }
        cone
    }

    /// The default locking target: the output with the largest fan-in cone,
    /// ties broken by port order.
    pub fn widest_output(&self) -> &str {
        let mut best = 0usize;
        let mut best_size = 0usize;
        for (i, &net) in self.outputs.iter().enumerate() {
            let size = self.fanin_cone_of_net(net).len();
            if size > best_size {
                best = i;
                best_size = size;
            }
        }
        self.net_name(self.outputs[best])
    }

    pub fn to_builder(&self) -> NetlistBuilder {
        let mut b = NetlistBuilder::new(&self.name);
        b.net_names = self.net_names.clone();
        for (i, n) in self.net_names.iter().enumerate() {
            b.index.insert(n.clone(), NetId(i as u32));
        }
        b.inputs = self.inputs.clone();
        b.key_inputs = self.key_inputs.clone();
        b.outputs = self.outputs.clone();
        b.gates = self.gates.clone();
        b
    }

    /// Structural equality at the name level: same ports in the same order and
    /// the same gate behind every net name. Net ids and gate order may differ.
    pub fn same_structure(&self, other: &Netlist) -> bool {
        let names = |nl: &Netlist, ids: &[NetId]| -> Vec<String> {
            ids.iter().map(|&i| nl.net_name(i).to_string()).collect()
        };
        if names(self, &self.inputs) != names(other, &other.inputs)
            || names(self, &self.key_inputs) != names(other, &other.key_inputs)
            || names(self, &self.outputs) != names(other, &other.outputs)
        {
            return false;
        }
        let gate_map = |nl: &Netlist| -> HashMap<String, (GateKind, Vec<String>)> {
            nl.gates
                .iter()
                .map(|g| {
                    (
                        nl.net_name(g.output).to_string(),
                        (g.kind, g.inputs.iter().map(|&i| nl.net_name(i).to_string()).collect()),
                    )
                })
                .collect()
        };
        gate_map(self) == gate_map(other)
    }
}

/// Mutable construction surface for netlists.
#[derive(Clone, Debug)]
pub struct NetlistBuilder {
    name: String,
    net_names: Vec<String>,
    index: HashMap<String, NetId>,
    inputs: Vec<NetId>,
    key_inputs: Vec<NetId>,
    outputs: Vec<NetId>,
    gates: Vec<Gate>,
}

impl NetlistBuilder {
    pub fn new(name: &str) -> Self {
        NetlistBuilder {
            name: name.to_string(),
            net_names: Vec::new(),
            index: HashMap::new(),
            inputs: Vec::new(),
            key_inputs: Vec::new(),
            outputs: Vec::new(),
            gates: Vec::new(),
        }
    }

    pub fn net(&mut self, name: &str) -> NetId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = NetId(self.net_names.len() as u32);
        self.net_names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    /// A net with a name not yet in use, derived from `prefix`.
    pub fn fresh_net(&mut self, prefix: &str) -> NetId {
        if !self.index.contains_key(prefix) {
            return self.net(prefix);
        }
        let mut i = 0usize;
        loop {
            let candidate = format!("{prefix}_{i}");
            if !self.index.contains_key(&candidate) {
                return self.net(&candidate);
            }
            i += 1;
        }
    }

    pub fn net_name(&self, id: NetId) -> &str {
        &self.net_names[id.index()]
    }

    pub fn find_net(&self, name: &str) -> Option<NetId> {
        self.index.get(name).copied()
    }

    pub fn add_input(&mut self, name: &str) -> NetId {
        let id = self.net(name);
        self.inputs.push(id);
        id
    }

    pub fn add_key_input(&mut self, name: &str) -> NetId {
        let id = self.net(name);
        self.key_inputs.push(id);
        id
    }

    pub fn add_output(&mut self, net: NetId) {
        self.outputs.push(net);
    }

    pub fn add_gate(&mut self, kind: GateKind, inputs: Vec<NetId>, output: NetId, tag: GateTag) {
        self.gates.push(Gate { kind, inputs, output, tag });
    }

    /// Convenience: add a gate driving a fresh net and return that net.
    pub fn gate(&mut self, kind: GateKind, inputs: Vec<NetId>, prefix: &str, tag: GateTag) -> NetId {
        let out = self.fresh_net(prefix);
        self.add_gate(kind, inputs, out, tag);
        out
    }

    pub fn outputs(&self) -> &[NetId] {
        &self.outputs
    }

    pub fn outputs_mut(&mut self) -> &mut Vec<NetId> {
        &mut self.outputs
    }

    pub fn inputs(&self) -> &[NetId] {
        &self.inputs
    }

    pub fn key_inputs(&self) -> &[NetId] {
        &self.key_inputs
    }

    pub fn key_inputs_mut(&mut self) -> &mut Vec<NetId> {
        &mut self.key_inputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn gates_mut(&mut self) -> &mut Vec<Gate> {
        &mut self.gates
    }

    /// Rename an existing net. The new name must be unused.
    pub fn rename_net(&mut self, id: NetId, new_name: &str) {
        assert!(!self.index.contains_key(new_name), "net name {new_name} already in use");
        let old = std::mem::replace(&mut self.net_names[id.index()], new_name.to_string());
        self.index.remove(&old);
        self.index.insert(new_name.to_string(), id);
    }

    /// Validate and freeze. Checks single drivers, defined signals, gate
    /// arities, port sanity, and acyclicity.
    pub fn finish(self) -> Result<Netlist, NetlistError> {
        let n_nets = self.net_names.len();
        let mut driver: Vec<Option<usize>> = vec![None; n_nets];
        let mut port_driven = vec![false; n_nets];

        for &id in self.inputs.iter().chain(&self.key_inputs) {
            if port_driven[id.index()] {
                return Err(NetlistError::DuplicatePort { name: self.net_names[id.index()].clone() });
            }
            port_driven[id.index()] = true;
        }
        for (gi, gate) in self.gates.iter().enumerate() {
            if !gate.kind.arity_ok(gate.inputs.len()) {
                return Err(NetlistError::BadArity {
                    gate: self.net_names[gate.output.index()].clone(),
                    kind: gate.kind.name(),
                    got: gate.inputs.len(),
                });
            }
            let out = gate.output.index();
            if port_driven[out] || driver[out].is_some() {
                return Err(NetlistError::MultipleDrivers { name: self.net_names[out].clone() });
            }
            driver[out] = Some(gi);
        }
        // Every referenced net must be driven by a port or a gate.
        let check_defined = |id: NetId| -> Result<(), NetlistError> {
            if port_driven[id.index()] || driver[id.index()].is_some() {
                Ok(())
            } else {
                Err(NetlistError::UndefinedSignal { name: self.net_names[id.index()].clone() })
            }
        };
        for gate in &self.gates {
            for &i in &gate.inputs {
                check_defined(i)?;
            }
        }
        let mut seen_outputs = vec![false; n_nets];
        for &o in &self.outputs {
            check_defined(o)?;
            if seen_outputs[o.index()] {
                return Err(NetlistError::DuplicatePort { name: self.net_names[o.index()].clone() });
            }
            seen_outputs[o.index()] = true;
        }

        let topo = toposort(&self.gates, &driver, &self.net_names)?;
        Ok(Netlist {
            name: self.name,
            net_names: self.net_names,
            inputs: self.inputs,
            key_inputs: self.key_inputs,
            outputs: self.outputs,
            gates: self.gates,
            topo,
            driver,
        })
    }
}

/// Kahn's algorithm over gates, smallest gate index first for determinism.
fn toposort(
    gates: &[Gate],
    driver: &[Option<usize>],
    net_names: &[String],
) -> Result<Vec<usize>, NetlistError> {
    let mut indegree = vec![0usize; gates.len()];
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); gates.len()];
    for (gi, gate) in gates.iter().enumerate() {
        for &input in &gate.inputs {
            if let Some(src) = driver[input.index()] {
                indegree[gi] += 1;
                consumers[src].push(gi);
            }
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        indegree.iter().enumerate().filter(|(_, &d)| d == 0).map(|(i, _)| Reverse(i)).collect();
    let mut order = Vec::with_capacity(gates.len());
    while let Some(Reverse(gi)) = ready.pop() {
        order.push(gi);
        for &next in &consumers[gi] {
            indegree[next] -= 1;
            if indegree[next] == 0 {
                ready.push(Reverse(next));
            }
        }
    }
    if order.len() != gates.len() {
        let stuck = indegree.iter().position(|&d| d > 0).unwrap();
        return Err(NetlistError::CombinationalLoop {
            through: net_names[gates[stuck].output.index()].clone(),
        });
    }
    Ok(order)
}

/// Options for `.bench` parsing.
#[derive(Clone, Debug)]
pub struct BenchOptions {
    /// Inputs whose name starts with this prefix are classified as key inputs.
    pub key_prefix: String,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { key_prefix: "keyinput".to_string() }
    }
}

/// Parse `.bench` text with the default key-input prefix (`keyinput`).
pub fn parse_bench(text: &str) -> Result<Netlist, NetlistError> {
    parse_bench_with(text, &BenchOptions::default())
}

pub fn parse_bench_with(text: &str, options: &BenchOptions) -> Result<Netlist, NetlistError> {
    let mut builder = NetlistBuilder::new("bench");
    let mut named = false;
    let mut pending_outputs: Vec<(String, usize, usize)> = Vec::new();
    let mut declared_inputs: Vec<(String, usize, usize)> = Vec::new();

    for (lineno, raw_line) in text.lines().enumerate() {
        let line_number = lineno + 1;
        let line = match raw_line.find('#') {
            Some(pos) => {
                if !named && pos == 0 {
                    let comment = raw_line[1..].trim();
                    if !comment.is_empty() && !comment.contains(char::is_whitespace) {
                        builder.name = comment.to_string();
                        named = true;
                    }
                }
                &raw_line[..pos]
            }
            None => raw_line,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let col_of = |needle: &str| line.find(needle).map(|p| p + 1).unwrap_or(1);

        if let Some(rest) = strip_keyword(trimmed, "INPUT") {
            let name = parse_paren_name(rest, line_number, col_of("("))?;
            declared_inputs.push((name, line_number, col_of("(")));
        } else if let Some(rest) = strip_keyword(trimmed, "OUTPUT") {
            let name = parse_paren_name(rest, line_number, col_of("("))?;
            pending_outputs.push((name, line_number, col_of("(")));
        } else if let Some(eq) = trimmed.find('=') {
            let lhs = trimmed[..eq].trim();
            if lhs.is_empty() {
                return Err(NetlistError::Syntax {
                    line: line_number,
                    col: 1,
                    msg: "missing signal name before '='".into(),
                });
            }
            let rhs = trimmed[eq + 1..].trim();
            let open = rhs.find('(').ok_or(NetlistError::Syntax {
                line: line_number,
                col: col_of("=") + 1,
                msg: format!("expected GATE(...) after '=', found {rhs:?}"),
            })?;
            let kind_text = rhs[..open].trim();
            let close = rhs.rfind(')').ok_or(NetlistError::Syntax {
                line: line_number,
                col: line.len(),
                msg: "missing closing ')'".into(),
            })?;
            let kind = match kind_text.to_ascii_uppercase().as_str() {
                "AND" => GateKind::And,
                "NAND" => GateKind::Nand,
                "OR" => GateKind::Or,
                "NOR" => GateKind::Nor,
                "XOR" => GateKind::Xor,
                "XNOR" => GateKind::Xnor,
                "NOT" | "INV" => GateKind::Not,
                "BUF" | "BUFF" => GateKind::Buf,
                "CONST0" => GateKind::Const0,
                "CONST1" => GateKind::Const1,
                "DFF" | "DFFSR" | "LATCH" | "SDFF" => {
                    return Err(NetlistError::Sequential {
                        line: line_number,
                        element: kind_text.to_ascii_uppercase(),
                    })
                }
                other => {
                    return Err(NetlistError::Syntax {
                        line: line_number,
                        col: col_of(kind_text),
                        msg: format!("unknown gate kind {other:?}"),
                    })
                }
            };
            let args_text = rhs[open + 1..close].trim();
            let mut args = Vec::new();
            if !args_text.is_empty() {
                for arg in args_text.split(',') {
                    let arg = arg.trim();
                    if arg.is_empty() {
                        return Err(NetlistError::Syntax {
                            line: line_number,
                            col: col_of(args_text),
                            msg: "empty gate operand".into(),
                        });
                    }
                    args.push(builder.net(arg));
                }
            }
            if !kind.arity_ok(args.len()) {
                return Err(NetlistError::BadArity {
                    gate: lhs.to_string(),
                    kind: kind.name(),
                    got: args.len(),
                });
            }
            let out = builder.net(lhs);
            builder.add_gate(kind, args, out, GateTag::Original);
        } else {
            return Err(NetlistError::Syntax {
                line: line_number,
                col: 1,
                msg: format!("unrecognized line {trimmed:?}"),
            });
        }
    }

    for (name, _, _) in &declared_inputs {
        if name.starts_with(&options.key_prefix) {
            builder.add_key_input(name);
        } else {
            builder.add_input(name);
        }
    }
    for (name, line, col) in &pending_outputs {
        match builder.index.get(name.as_str()) {
            Some(&id) => builder.add_output(id),
            None => {
                return Err(NetlistError::Syntax {
                    line: *line,
                    col: *col,
                    msg: format!("output {name} references an undefined signal"),
                })
            }
        }
    }
    builder.finish()
}

fn strip_keyword<'a>(line: &'a str, keyword: &str) -> Option<&'a str> {
    let upper_len = keyword.len();
    if line.len() > upper_len && line[..upper_len].eq_ignore_ascii_case(keyword) {
        let rest = line[upper_len..].trim_start();
        if rest.starts_with('(') {
            return Some(rest);
        }
    }
    None
}

fn parse_paren_name(rest: &str, line: usize, col: usize) -> Result<String, NetlistError> {
    let inner = rest
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or(NetlistError::Syntax { line, col, msg: "expected (name)".into() })?
        .trim();
    if inner.is_empty() || inner.contains([',', '(', ')']) {
        return Err(NetlistError::Syntax { line, col, msg: format!("bad port name {inner:?}") });
    }
    Ok(inner.to_string())
}

/// Serialize to `.bench` text. Gates are emitted in dependency order, so the
/// output parses back into a structurally identical netlist.
pub fn write_bench(netlist: &Netlist) -> String {
    let mut out = String::new();
    fmt::Write::write_fmt(&mut out, format_args!("# {}\n", netlist.name())).unwrap();
    for name in netlist.input_names() {
        fmt::Write::write_fmt(&mut out, format_args!("INPUT({name})\n")).unwrap();
    }
    for name in netlist.key_input_names() {
        fmt::Write::write_fmt(&mut out, format_args!("INPUT({name})\n")).unwrap();
    }
    for name in netlist.output_names() {
        fmt::Write::write_fmt(&mut out, format_args!("OUTPUT({name})\n")).unwrap();
    }
    for &gi in netlist.topo_order() {
        let gate = &netlist.gates()[gi];
        let args: Vec<&str> = gate.inputs.iter().map(|&i| netlist.net_name(i)).collect();
        fmt::Write::write_fmt(
            &mut out,
            format_args!("{} = {}({})\n", netlist.net_name(gate.output), gate.kind.name(), args.join(", ")),
        )
        .unwrap();
    }
    out
}
