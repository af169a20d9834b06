//! Linear temporal logic with past over lasso words.

use std::collections::BTreeSet;
use std::fmt;

use crate::schema::LassoWord;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pltl {
    True,
    Atom(String),
    Not(Box<Pltl>),
    And(Box<Pltl>, Box<Pltl>),
    Next(Box<Pltl>),
    Until(Box<Pltl>, Box<Pltl>),
    /// Past next: false at position 0.
    Prev(Box<Pltl>),
    Since(Box<Pltl>, Box<Pltl>),
}

impl Pltl {
    pub fn atom(p: &str) -> Self {
        Pltl::Atom(p.to_string())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Pltl) -> Self {
        Pltl::Not(Box::new(f))
    }

    pub fn and(a: Pltl, b: Pltl) -> Self {
        Pltl::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Pltl, b: Pltl) -> Self {
        Pltl::not(Pltl::and(Pltl::not(a), Pltl::not(b)))
    }

    pub fn implies(a: Pltl, b: Pltl) -> Self {
        Pltl::not(Pltl::and(a, Pltl::not(b)))
    }

    pub fn eventually(f: Pltl) -> Self {
        Pltl::Until(Box::new(Pltl::True), Box::new(f))
    }

    pub fn always(f: Pltl) -> Self {
        Pltl::not(Pltl::eventually(Pltl::not(f)))
    }

    pub fn temporal_depth(&self) -> usize {
        match self {
            Pltl::True | Pltl::Atom(_) => 0,
            Pltl::Not(f) => f.temporal_depth(),
            Pltl::And(a, b) => a.temporal_depth().max(b.temporal_depth()),
            Pltl::Next(f) | Pltl::Prev(f) => 1 + f.temporal_depth(),
            Pltl::Until(a, b) | Pltl::Since(a, b) => 1 + a.temporal_depth().max(b.temporal_depth()),
        }
    }

    /// Number of distinct subformulae.
    pub fn size(&self) -> usize {
        let mut seen = BTreeSet::new();
        self.collect(&mut seen);
        seen.len()
    }

    fn collect(&self, seen: &mut BTreeSet<String>) {
        seen.insert(self.to_string());
        match self {
            Pltl::True | Pltl::Atom(_) => {}
            Pltl::Not(f) | Pltl::Next(f) | Pltl::Prev(f) => f.collect(seen),
            Pltl::And(a, b) | Pltl::Until(a, b) | Pltl::Since(a, b) => {
                a.collect(seen);
                b.collect(seen);
            }
        }
    }

    /// Loop copies unrolled before the last copy stands in for all later ones.
    pub fn horizon_copies(&self) -> usize {
        2 * self.temporal_depth() + 6
    }

    /// Truncation threshold for iteration counts.
    pub fn stutter_threshold(&self) -> u64 {
        2 * self.temporal_depth() as u64 + 5
    }
}

impl fmt::Display for Pltl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pltl::True => write!(f, "true"),
            Pltl::Atom(p) => write!(f, "{p}"),
            Pltl::Not(a) => write!(f, "!{a}"),
            Pltl::And(a, b) => write!(f, "({a} & {b})"),
            Pltl::Next(a) => write!(f, "X {a}"),
            Pltl::Prev(a) => write!(f, "Y {a}"),
            Pltl::Until(a, b) => write!(f, "({a} U {b})"),
            Pltl::Since(a, b) => write!(f, "({a} S {b})"),
        }
    }
}

/// Truth of `phi` at every position of the unrolled word `u·v^K`, where the
/// successor of the last position is the start of the last loop copy.
pub fn truth_table(word: &LassoWord, phi: &Pltl) -> Vec<bool> {
    let expanded = word.unrolled(phi.horizon_copies() - 1);
    let len = expanded.prefix.len() + expanded.cycle.len();
    let back = expanded.prefix.len();
    table(&expanded, len, back, phi)
}

fn table(w: &LassoWord, len: usize, back: usize, phi: &Pltl) -> Vec<bool> {
    let succ = |i: usize| if i + 1 < len { i + 1 } else { back };
    match phi {
        Pltl::True => vec![true; len],
        Pltl::Atom(p) => (0..len).map(|i| w.at(i).contains(p)).collect(),
        Pltl::Not(a) => table(w, len, back, a).into_iter().map(|x| !x).collect(),
        Pltl::And(a, b) => {
            let (a, b) = (table(w, len, back, a), table(w, len, back, b));
            a.iter().zip(&b).map(|(x, y)| *x && *y).collect()
        }
        Pltl::Next(a) => {
            let a = table(w, len, back, a);
            (0..len).map(|i| a[succ(i)]).collect()
        }
        Pltl::Prev(a) => {
            let a = table(w, len, back, a);
            (0..len).map(|i| i > 0 && a[i - 1]).collect()
        }
        Pltl::Until(a, b) => {
            let (a, b) = (table(w, len, back, a), table(w, len, back, b));
            let mut res = vec![false; len];
            // least fixpoint on the loop: two backward laps
            for _ in 0..2 {
                for i in (back..len).rev() {
                    res[i] = b[i] || (a[i] && res[succ(i)]);
                }
            }
            for i in (0..back).rev() {
                res[i] = b[i] || (a[i] && res[i + 1]);
            }
            res
        }
        Pltl::Since(a, b) => {
            let (a, b) = (table(w, len, back, a), table(w, len, back, b));
            let mut res = vec![false; len];
            for i in 0..len {
                res[i] = b[i] || (i > 0 && a[i] && res[i - 1]);
            }
            res
        }
    }
}

/// Positions past the unrolled horizon are read off the last loop copy.
pub fn eval_pltl(word: &LassoWord, phi: &Pltl, position: usize) -> bool {
    let t = truth_table(word, phi);
    let back = word.prefix.len() + (phi.horizon_copies() - 1) * word.cycle.len();
    let i = if position < t.len() {
        position
    } else {
        back + (position - back) % word.cycle.len()
    };
    t[i]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_pltl;

    fn letters(spec: &[&[&str]]) -> Vec<crate::schema::Letter> {
        spec.iter()
            .map(|l| l.iter().map(|s| s.to_string()).collect())
            .collect()
    }

    fn ab() -> LassoWord {
        LassoWord::new(letters(&[&["a"]]), letters(&[&["b"]]))
    }

    fn example_word() -> LassoWord {
        LassoWord::new(
            letters(&[&["a"], &["a"], &["b"], &["b"], &["c"], &["c"]]),
            letters(&[&["d"]]),
        )
    }

    #[test]
    fn simple_examples() {
        assert!(eval_pltl(&ab(), &parse_pltl("F b").unwrap(), 0));
        assert!(!eval_pltl(&ab(), &parse_pltl("Y a").unwrap(), 0));
        assert!(eval_pltl(&ab(), &parse_pltl("Y a").unwrap(), 1));
        assert!(!eval_pltl(&ab(), &parse_pltl("G b").unwrap(), 0));
        assert!(eval_pltl(&ab(), &parse_pltl("X G b").unwrap(), 0));
        assert!(eval_pltl(&ab(), &parse_pltl("G b").unwrap(), 1000));
    }

    #[test]
    fn worked_formula_holds() {
        let f = parse_pltl("G((b & X b & F d) -> F(c & X c))").unwrap();
        assert!(eval_pltl(&example_word(), &f, 0));
        let fewer_c = LassoWord::new(
            letters(&[&["a"], &["b"], &["b"], &["c"]]),
            letters(&[&["d"]]),
        );
        assert!(!eval_pltl(&fewer_c, &f, 0));
    }

    #[test]
    fn past_boundary() {
        let w = example_word();
        let s = parse_pltl("b S a").unwrap();
        assert_eq!(eval_pltl(&w, &s, 0), eval_pltl(&w, &Pltl::atom("a"), 0));
        assert!(eval_pltl(&w, &s, 3));
        assert!(!eval_pltl(&w, &s, 4));
        assert!(eval_pltl(&w, &parse_pltl("G(d -> (d S c))").unwrap(), 6));
    }

    #[test]
    fn depth_and_size() {
        let f = parse_pltl("X (a U Y b)").unwrap();
        assert_eq!(f.temporal_depth(), 3);
        assert_eq!(f.size(), 5);
        assert_eq!(f.stutter_threshold(), 11);
    }

    #[test]
    fn until_on_loop_only() {
        // a U b where b appears only inside the loop, late
        let w = LassoWord::new(vec![], letters(&[&["a"], &["a"], &["a", "b"]]));
        let f = parse_pltl("a U (b & X a)").unwrap();
        for i in 0..9 {
            assert!(eval_pltl(&w, &f, i));
        }
        assert!(!eval_pltl(&w, &parse_pltl("F (b & X b)").unwrap(), 0));
    }
}
