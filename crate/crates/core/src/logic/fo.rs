//! First-order logic over positions of lasso words.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use super::LogicError;
use crate::schema::LassoWord;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Fo {
    True,
    /// `p(z)`
    Atom(String, String),
    /// `z < z'`
    Less(String, String),
    Not(Box<Fo>),
    And(Box<Fo>, Box<Fo>),
    Exists(String, Box<Fo>),
}

impl Fo {
    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Fo) -> Self {
        Fo::Not(Box::new(f))
    }

    pub fn and(a: Fo, b: Fo) -> Self {
        Fo::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Fo, b: Fo) -> Self {
        Fo::not(Fo::and(Fo::not(a), Fo::not(b)))
    }

    pub fn implies(a: Fo, b: Fo) -> Self {
        Fo::not(Fo::and(a, Fo::not(b)))
    }

    pub fn exists(z: String, body: Fo) -> Self {
        Fo::Exists(z, Box::new(body))
    }

    pub fn forall(z: String, body: Fo) -> Self {
        Fo::not(Fo::exists(z, Fo::not(body)))
    }

    pub fn quantifier_height(&self) -> u32 {
        match self {
            Fo::True | Fo::Atom(..) | Fo::Less(..) => 0,
            Fo::Not(f) => f.quantifier_height(),
            Fo::And(a, b) => a.quantifier_height().max(b.quantifier_height()),
            Fo::Exists(_, f) => 1 + f.quantifier_height(),
        }
    }

    pub fn free_variables(&self) -> BTreeSet<String> {
        match self {
            Fo::True => BTreeSet::new(),
            Fo::Atom(_, z) => [z.clone()].into(),
            Fo::Less(a, b) => [a.clone(), b.clone()].into(),
            Fo::Not(f) => f.free_variables(),
            Fo::And(a, b) => {
                let mut s = a.free_variables();
                s.extend(b.free_variables());
                s
            }
            Fo::Exists(z, f) => {
                let mut s = f.free_variables();
                s.remove(z);
                s
            }
        }
    }

    pub fn stutter_threshold(&self) -> u64 {
        1u64.checked_shl(self.quantifier_height() + 2)
            .unwrap_or(u64::MAX)
    }
}

impl fmt::Display for Fo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fo::True => write!(f, "true"),
            Fo::Atom(p, z) => write!(f, "{p}({z})"),
            Fo::Less(a, b) => write!(f, "{a} < {b}"),
            Fo::Not(a) => write!(f, "!{a}"),
            Fo::And(a, b) => write!(f, "({a} & {b})"),
            Fo::Exists(z, a) => write!(f, "(exists {z}. {a})"),
        }
    }
}

#[derive(Debug)]
enum Node {
    True,
    Atom {
        pred: usize,
        var: usize,
    },
    Less(usize, usize),
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Exists {
        var: usize,
        height: u32,
        free: Vec<usize>,
        cache: Option<usize>,
        body: Box<Node>,
    },
}

struct Compiled {
    root: Node,
    preds: Vec<String>,
    slots: usize,
    closed: usize,
}

fn compile(phi: &Fo) -> Compiled {
    let mut c = Compiled {
        root: Node::True,
        preds: Vec::new(),
        slots: 0,
        closed: 0,
    };
    let mut vars: HashMap<String, usize> = HashMap::new();
    c.root = compile_node(phi, &mut c, &mut vars);
    c
}

fn compile_node(phi: &Fo, c: &mut Compiled, vars: &mut HashMap<String, usize>) -> Node {
    fn slot(z: &str, c: &mut Compiled, vars: &mut HashMap<String, usize>) -> usize {
        *vars.entry(z.to_string()).or_insert_with(|| {
            c.slots += 1;
            c.slots - 1
        })
    }
    match phi {
        Fo::True => Node::True,
        Fo::Atom(p, z) => {
            let pred = match c.preds.iter().position(|q| q == p) {
                Some(i) => i,
                None => {
                    c.preds.push(p.clone());
                    c.preds.len() - 1
                }
            };
            Node::Atom {
                pred,
                var: slot(z, c, vars),
            }
        }
        Fo::Less(a, b) => {
            let (a, b) = (slot(a, c, vars), slot(b, c, vars));
            Node::Less(a, b)
        }
        Fo::Not(f) => Node::Not(Box::new(compile_node(f, c, vars))),
        Fo::And(a, b) => Node::And(
            Box::new(compile_node(a, c, vars)),
            Box::new(compile_node(b, c, vars)),
        ),
        Fo::Exists(z, f) => {
            let free_names = phi.free_variables();
            let var = slot(z, c, vars);
            let free = free_names
                .iter()
                .map(|n| slot(n, c, vars))
                .collect::<Vec<_>>();
            let cache = free.is_empty().then(|| {
                c.closed += 1;
                c.closed - 1
            });
            Node::Exists {
                var,
                height: phi.quantifier_height(),
                free,
                cache,
                body: Box::new(compile_node(f, c, vars)),
            }
        }
    }
}

struct Evaluator {
    /// `holds[p][i]` for i over the prefix and one loop copy.
    holds: Vec<Vec<bool>>,
    prefix: usize,
    period: usize,
    env: Vec<usize>,
    closed: Vec<Option<bool>>,
}

impl Evaluator {
    fn label(&self, pred: usize, pos: usize) -> bool {
        let i = if pos < self.prefix {
            pos
        } else {
            self.prefix + (pos - self.prefix) % self.period
        };
        self.holds[pred][i]
    }

    /// Positions a quantifier of the given height ranges over: from 0 to
    /// enough loop copies past everything its free variables mark.
    fn upper(&self, height: u32, free: &[usize]) -> usize {
        let marked = free.iter().map(|&v| self.env[v] + 1).max().unwrap_or(0);
        let base = if marked <= self.prefix {
            self.prefix
        } else {
            let over = marked - self.prefix;
            self.prefix + over.div_ceil(self.period) * self.period
        };
        let copies = (1usize << (height + 2).min(40)) + 1;
        base + copies * self.period
    }

    fn eval(&mut self, n: &Node) -> bool {
        match n {
            Node::True => true,
            Node::Atom { pred, var } => self.label(*pred, self.env[*var]),
            Node::Less(a, b) => self.env[*a] < self.env[*b],
            Node::Not(f) => !self.eval(f),
            Node::And(a, b) => self.eval(a) && self.eval(b),
            Node::Exists {
                var,
                height,
                free,
                cache,
                body,
            } => {
                if let Some(k) = cache {
                    if let Some(v) = self.closed[*k] {
                        return v;
                    }
                }
                let saved = self.env[*var];
                let upper = self.upper(*height, free);
                let mut found = false;
                for p in 0..upper {
                    self.env[*var] = p;
                    if self.eval(body) {
                        found = true;
                        break;
                    }
                }
                self.env[*var] = saved;
                if let Some(k) = cache {
                    self.closed[*k] = Some(found);
                }
                found
            }
        }
    }
}

/// Truth of a closed formula on `u·v^ω`.
///
/// A quantifier of height `h` ranges up to `2^(h+2) + 1` loop copies past the
/// last position marked by its free variables (aligned to a copy boundary).
pub fn eval_fo(word: &LassoWord, phi: &Fo) -> Result<bool, LogicError> {
    if let Some(z) = phi.free_variables().into_iter().next() {
        return Err(LogicError::FreeVariable(z));
    }
    let c = compile(phi);
    let prefix = word.prefix.len();
    let period = word.cycle.len();
    let holds = c
        .preds
        .iter()
        .map(|p| {
            (0..prefix + period)
                .map(|i| word.at(i).contains(p))
                .collect()
        })
        .collect();
    let mut ev = Evaluator {
        holds,
        prefix,
        period,
        env: vec![0; c.slots],
        closed: vec![None; c.closed],
    };
    Ok(ev.eval(&c.root))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_fo;

    fn letters(spec: &[&[&str]]) -> Vec<crate::schema::Letter> {
        spec.iter()
            .map(|l| l.iter().map(|s| s.to_string()).collect())
            .collect()
    }

    fn example_word() -> LassoWord {
        LassoWord::new(
            letters(&[&["a"], &["a"], &["b"], &["b"], &["c"], &["c"]]),
            letters(&[&["d"]]),
        )
    }

    const WORKED: &str =
        "forall x. forall x2. ((x < x2 & b(x) & b(x2) & exists z. d(z)) -> exists y. exists y2. (c(y) & c(y2)))";

    #[test]
    fn examples() {
        let w = example_word();
        assert!(eval_fo(&w, &parse_fo("exists z. d(z)").unwrap()).unwrap());
        assert!(eval_fo(&w, &parse_fo(WORKED).unwrap()).unwrap());
        assert!(!eval_fo(&w, &parse_fo("exists z. e(z)").unwrap()).unwrap());
        assert!(matches!(
            eval_fo(&w, &parse_fo("d(z)").unwrap()),
            Err(LogicError::FreeVariable(_))
        ));
    }

    #[test]
    fn order_matters() {
        let w = example_word();
        assert!(eval_fo(
            &w,
            &parse_fo("exists x. exists y. (x < y & a(x) & d(y))").unwrap()
        )
        .unwrap());
        assert!(!eval_fo(
            &w,
            &parse_fo("exists x. exists y. (x < y & d(x) & a(y))").unwrap()
        )
        .unwrap());
        assert!(eval_fo(
            &w,
            &parse_fo("forall x. (d(x) -> exists y. (x < y & d(y)))").unwrap()
        )
        .unwrap());
        assert!(!eval_fo(
            &w,
            &parse_fo("exists x. (c(x) & forall y. (y < x -> c(y)))").unwrap()
        )
        .unwrap());
    }

    #[test]
    fn shadowing_rebinds() {
        let w = example_word();
        let f = parse_fo("exists x. (a(x) & exists x. d(x))").unwrap();
        assert!(eval_fo(&w, &f).unwrap());
        assert_eq!(f.quantifier_height(), 2);
        assert_eq!(f.stutter_threshold(), 16);
    }
}
