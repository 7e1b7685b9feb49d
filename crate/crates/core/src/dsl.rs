//! Text form of a program.
//!
//! ```text
//! program = rule *(";" rule)
//! rule    = guard ":" action
//! guard   = "even" | "mod" INT | "else"
//! action  = "/2" | "(" INT "n" ["/" INT] ("+"|"-") "1" ")/2"
//! ```
//!
//! Whitespace is ignored between tokens. Printing emits the canonical form,
//! rules separated by `"; "`, e.g. `even:/2; mod3:(7n/3+1)/2; else:(5n+1)/2`.

use std::fmt;

use crate::error::{Error, Location, Result};
use crate::program::{Guard, Program, StepRule};

impl fmt::Display for StepRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.guard {
            Guard::Even => return write!(f, "even:/2"),
            Guard::DivisibleBy(d) => write!(f, "mod{d}:")?,
            Guard::Else => write!(f, "else:")?,
        }
        write!(f, "({}n", self.multiplier)?;
        if self.divisor != 1 {
            write!(f, "/{}", self.divisor)?;
        }
        let sign = if self.offset < 0 { '-' } else { '+' };
        write!(f, "{sign}{})/2", self.offset.unsigned_abs())
    }
}

pub fn print_program(program: &Program) -> String {
    program
        .rules()
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Parses and validates a program. The id is `dsl:` followed by the
/// canonical text.
pub fn parse_program_dsl(text: &str) -> Result<Program> {
    let rules = Parser::new(text).program()?;
    let id = format!(
        "dsl:{}",
        rules
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ")
    );
    Program::new(id, rules)
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    text: &'a str,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            chars: text.chars().collect(),
            pos: 0,
            text,
        }
    }

    fn location(&self) -> Location {
        let mut line = 1;
        let mut column = 1;
        for c in self.text.chars().take(self.pos) {
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
        }
        Location { line, column }
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            location: self.location(),
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn expect(&mut self, want: char) -> Result<()> {
        match self.peek() {
            Some(c) if c == want => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => self.error(format!("expected `{want}`, found `{c}`")),
            None => self.error(format!("expected `{want}`, found end of input")),
        }
    }

    fn keyword(&mut self, word: &str) -> bool {
        self.skip_ws();
        let end = self.pos + word.len();
        if end <= self.chars.len() && self.chars[self.pos..end].iter().copied().eq(word.chars()) {
            self.pos = end;
            true
        } else {
            false
        }
    }

    fn integer(&mut self) -> Result<u64> {
        self.skip_ws();
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(char::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.error("expected an integer");
        }
        let digits: String = self.chars[start..self.pos].iter().collect();
        digits.parse().or_else(|_| {
            self.pos = start;
            self.error(format!("integer `{digits}` is too large"))
        })
    }

    fn program(&mut self) -> Result<Vec<StepRule>> {
        let mut rules = vec![self.rule()?];
        loop {
            match self.peek() {
                None => return Ok(rules),
                Some(';') => {
                    self.pos += 1;
                    rules.push(self.rule()?);
                }
                Some(c) => return self.error(format!("expected `;` or end of input, found `{c}`")),
            }
        }
    }

    fn rule(&mut self) -> Result<StepRule> {
        let guard = if self.keyword("even") {
            Guard::Even
        } else if self.keyword("else") {
            Guard::Else
        } else if self.keyword("mod") {
            Guard::DivisibleBy(self.integer()?)
        } else {
            return self.error("expected `even`, `mod<d>` or `else`");
        };
        self.expect(':')?;
        if self.peek() == Some('/') {
            self.pos += 1;
            let two = self.integer()?;
            if two != 2 {
                return self.error("halving action must be `/2`");
            }
            return Ok(StepRule {
                guard,
                ..StepRule::halve()
            });
        }
        self.expect('(')?;
        let multiplier = self.integer()?;
        self.expect('n')?;
        let divisor = if self.peek() == Some('/') {
            self.pos += 1;
            self.integer()?
        } else {
            1
        };
        let offset = match self.peek() {
            Some('+') => 1,
            Some('-') => -1,
            _ => return self.error("expected `+` or `-`"),
        };
        self.pos += 1;
        if self.integer()? != 1 {
            return self.error("offset must be 1");
        }
        self.expect(')')?;
        self.expect('/')?;
        if self.integer()? != 2 {
            return self.error("action must end in `/2`");
        }
        Ok(StepRule {
            guard,
            multiplier,
            divisor,
            offset,
        })
    }
}
