//! Query syntax for clauses:
//!
//! ```text
//! expr   := term ('|' term)*
//! term   := factor ('&' factor)*
//! factor := '~' factor | '(' expr ')' | NAME
//! ```

use super::{AlgebraError, Clause};

struct Parser<'a, S> {
    src: &'a str,
    pos: usize,
    names: &'a [S],
}

fn is_name_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'.'
}

impl<'a, S: AsRef<str>> Parser<'a, S> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src.as_bytes()[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.as_bytes().get(self.pos).copied()
    }

    fn syntax(&self, message: impl Into<String>) -> AlgebraError {
        AlgebraError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn expr(&mut self) -> Result<Clause, AlgebraError> {
        let mut acc = self.term()?;
        while self.peek() == Some(b'|') {
            self.pos += 1;
            acc = acc.or(&self.term()?)?;
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Clause, AlgebraError> {
        let mut acc = self.factor()?;
        while self.peek() == Some(b'&') {
            self.pos += 1;
            acc = acc.and(&self.factor()?)?;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Clause, AlgebraError> {
        match self.peek() {
            Some(b'~') => {
                self.pos += 1;
                Ok(self.factor()?.not())
            }
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(b) if is_name_byte(b) => {
                let start = self.pos;
                while self.pos < self.src.len() && is_name_byte(self.src.as_bytes()[self.pos]) {
                    self.pos += 1;
                }
                let name = &self.src[start..self.pos];
                let index = self
                    .names
                    .iter()
                    .position(|n| n.as_ref() == name)
                    .ok_or_else(|| AlgebraError::UnknownName {
                        name: name.to_string(),
                        offset: start,
                    })?;
                Clause::var(self.names.len(), index)
            }
            Some(_) => Err(self.syntax("expected a variable name, `~` or `(`")),
            None => Err(self.syntax("unexpected end of input")),
        }
    }
}

/// Parses a clause over the variables `names` (index = position in `names`).
pub fn parse_clause<S: AsRef<str>>(text: &str, names: &[S]) -> Result<Clause, AlgebraError> {
    if text.trim().is_empty() {
        return Err(AlgebraError::EmptyInput);
    }
    super::clause::check_var_count(names.len())?;
    let mut p = Parser {
        src: text,
        pos: 0,
        names,
    };
    let clause = p.expr()?;
    if p.peek().is_some() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(clause)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const NAMES: [&str; 2] = ["W1", "W2"];

    #[test]
    fn solely_w1() {
        let c = parse_clause("W1 & ~W2", &NAMES).unwrap();
        assert_eq!(c.atoms().collect::<Vec<_>>(), vec![0b01]);
    }

    #[test]
    fn idempotent_or() {
        let c = parse_clause("W1 | W1", &NAMES).unwrap();
        assert_eq!(c, Clause::var(2, 0).unwrap());
        let c = parse_clause("  (W1|W1)  ", &NAMES).unwrap();
        assert_eq!(c, Clause::var(2, 0).unwrap());
    }

    #[test]
    fn precedence_and_binds_tighter() {
        let c = parse_clause("W1 | W1 & W2", &NAMES).unwrap();
        assert_eq!(c, Clause::var(2, 0).unwrap());
        let c = parse_clause("~(W1 | W2)", &NAMES).unwrap();
        assert_eq!(c.atoms().collect::<Vec<_>>(), vec![0]);
        let c = parse_clause("~~W2", &NAMES).unwrap();
        assert_eq!(c, Clause::var(2, 1).unwrap());
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_clause("W3", &NAMES),
            Err(AlgebraError::UnknownName { ref name, offset: 0 }) if name == "W3"
        ));
        assert!(matches!(
            parse_clause("   ", &NAMES),
            Err(AlgebraError::EmptyInput)
        ));
        assert!(matches!(
            parse_clause("W1 & ", &NAMES),
            Err(AlgebraError::Syntax { offset: 5, .. })
        ));
        assert!(matches!(
            parse_clause("(W1", &NAMES),
            Err(AlgebraError::Syntax { offset: 3, .. })
        ));
        assert!(matches!(
            parse_clause("W1 W2", &NAMES),
            Err(AlgebraError::Syntax { offset: 3, .. })
        ));
        assert!(matches!(
            parse_clause("W1 + W2", &NAMES),
            Err(AlgebraError::Syntax { offset: 3, .. })
        ));
    }

    proptest! {
        #[test]
        fn pretty_print_round_trip(v in 1usize..=4, seed in any::<u64>()) {
            let names: Vec<String> = (1..=v).map(|k| format!("X{k}")).collect();
            let atoms: Vec<u32> = (0..1u32 << v).filter(|s| seed >> (s % 64) & 1 == 1).collect();
            let c = Clause::from_atoms(v, atoms).unwrap();
            let text = c.to_expr(&names);
            prop_assert_eq!(parse_clause(&text, &names).unwrap(), c);
        }
    }
}
