use std::fmt;

/// Abstract syntax tree of a load-balancer policy expression.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PolicyExpr {
    Id,
    NumServers,
    QueueSize,
    StateOn,
    StateSleep,
    StateSuspend,
    StateWakeup,
    PowerOn,
    PowerSleep,
    PowerSuspend,
    PowerWakeup,
    TimeWakeup,
    TimeSuspend,
    TimeOutTime,
    Mul(Box<PolicyExpr>, Box<PolicyExpr>),
    Add(Box<PolicyExpr>, Box<PolicyExpr>),
    Sub(Box<PolicyExpr>, Box<PolicyExpr>),
    Div(Box<PolicyExpr>, Box<PolicyExpr>),
    Mod(Box<PolicyExpr>, Box<PolicyExpr>),
    Neg(Box<PolicyExpr>),
    IntLit(u64),
    Random,
    DSpace(String),
}

/// Binary operators, used by the parser and the printer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl BinOp {
    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 2,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "mod",
        }
    }

    pub(crate) fn build(self, lhs: PolicyExpr, rhs: PolicyExpr) -> PolicyExpr {
        let (l, r) = (Box::new(lhs), Box::new(rhs));
        match self {
            BinOp::Add => PolicyExpr::Add(l, r),
            BinOp::Sub => PolicyExpr::Sub(l, r),
            BinOp::Mul => PolicyExpr::Mul(l, r),
            BinOp::Div => PolicyExpr::Div(l, r),
            BinOp::Mod => PolicyExpr::Mod(l, r),
        }
    }
}

/// Keyword terminals and their source spelling.
pub(crate) const TERMINALS: &[(&str, PolicyExpr)] = &[
    ("ID", PolicyExpr::Id),
    ("numServers", PolicyExpr::NumServers),
    ("queueSize", PolicyExpr::QueueSize),
    ("stateOn", PolicyExpr::StateOn),
    ("stateSleep", PolicyExpr::StateSleep),
    ("stateSuspend", PolicyExpr::StateSuspend),
    ("stateWakeup", PolicyExpr::StateWakeup),
    ("powerOn", PolicyExpr::PowerOn),
    ("powerSleep", PolicyExpr::PowerSleep),
    ("powerSuspend", PolicyExpr::PowerSuspend),
    ("powerWakeup", PolicyExpr::PowerWakeup),
    ("timeWakeup", PolicyExpr::TimeWakeup),
    ("timeSuspend", PolicyExpr::TimeSuspend),
    ("timeOutTime", PolicyExpr::TimeOutTime),
    ("random", PolicyExpr::Random),
];

impl PolicyExpr {
    /// Convenience constructor for `dspace("name")`.
    pub fn dspace(name: impl Into<String>) -> Self {
        PolicyExpr::DSpace(name.into())
    }

    fn as_binary(&self) -> Option<(BinOp, &PolicyExpr, &PolicyExpr)> {
        match self {
            PolicyExpr::Add(l, r) => Some((BinOp::Add, l, r)),
            PolicyExpr::Sub(l, r) => Some((BinOp::Sub, l, r)),
            PolicyExpr::Mul(l, r) => Some((BinOp::Mul, l, r)),
            PolicyExpr::Div(l, r) => Some((BinOp::Div, l, r)),
            PolicyExpr::Mod(l, r) => Some((BinOp::Mod, l, r)),
            _ => None,
        }
    }

    fn keyword(&self) -> Option<&'static str> {
        TERMINALS
            .iter()
            .find(|(_, t)| t == self)
            .map(|(name, _)| *name)
    }

    /// Names of every `dspace(..)` reference, in left-to-right order.
    pub fn dspace_names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_dspace(&mut out);
        out
    }

    fn collect_dspace<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            PolicyExpr::DSpace(name) => out.push(name),
            PolicyExpr::Neg(e) => e.collect_dspace(out),
            other => {
                if let Some((_, l, r)) = other.as_binary() {
                    l.collect_dspace(out);
                    r.collect_dspace(out);
                }
            }
        }
    }

    /// Indented one-node-per-line dump of the tree.
    pub fn tree(&self) -> String {
        let mut out = String::new();
        self.write_tree(&mut out, 0);
        out
    }

    fn write_tree(&self, out: &mut String, depth: usize) {
        for _ in 0..depth {
            out.push_str("  ");
        }
        match self {
            PolicyExpr::IntLit(v) => out.push_str(&format!("IntLit {v}\n")),
            PolicyExpr::DSpace(name) => out.push_str(&format!("DSpace {name:?}\n")),
            PolicyExpr::Neg(e) => {
                out.push_str("Neg\n");
                e.write_tree(out, depth + 1);
            }
            other => {
                if let Some((op, l, r)) = other.as_binary() {
                    out.push_str(&format!("{op:?}\n"));
                    l.write_tree(out, depth + 1);
                    r.write_tree(out, depth + 1);
                } else {
                    out.push_str(other.keyword().unwrap_or("?"));
                    out.push('\n');
                }
            }
        }
    }
}

// Prints canonical source text with the minimum parentheses needed to
// parse back into the same tree.
impl fmt::Display for PolicyExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyExpr::IntLit(v) => write!(f, "{v}"),
            PolicyExpr::DSpace(name) => write!(f, "dspace({name:?})"),
            PolicyExpr::Neg(e) => {
                if e.as_binary().is_some() {
                    write!(f, "-({e})")
                } else {
                    write!(f, "-{e}")
                }
            }
            other => match other.as_binary() {
                Some((op, l, r)) => {
                    let prec = op.precedence();
                    match l.as_binary() {
                        Some((lop, _, _)) if lop.precedence() < prec => write!(f, "({l})")?,
                        _ => write!(f, "{l}")?,
                    }
                    write!(f, " {} ", op.symbol())?;
                    match r.as_binary() {
                        Some((rop, _, _)) if rop.precedence() <= prec => write!(f, "({r})"),
                        _ => write!(f, "{r}"),
                    }
                }
                None => f.write_str(other.keyword().unwrap_or("?")),
            },
        }
    }
}
