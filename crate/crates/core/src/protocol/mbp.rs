//! The magical-ball analogy of BB84, scripted.
//!
//! A ball holds a value `n ∈ {1, 2, 3, 4}` picked to satisfy a keyword and
//! answers exactly one yes/no question about it. Keywords map to bits
//! (`EV = M2 = 0`, `OD = L3 = 1`) and the two questions play the role of the
//! two bases: parity (`nOD`) is treated as Z and magnitude (`nL3`) as X, so
//! the ordinary sifting and QBER code runs on the scripted tables.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::records::{AliceSlotRecord, BobSlotRecord, SiftedKey};
use super::sifting::sift;
use crate::detector::{ClickKind, ClickOutcome};
use crate::optics::{Basis, Bit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Keyword {
    OD,
    EV,
    M2,
    L3,
}

impl Keyword {
    pub fn accepts(self, n: u8) -> bool {
        match self {
            Keyword::OD => n == 1 || n == 3,
            Keyword::EV => n == 2 || n == 4,
            Keyword::M2 => n == 3 || n == 4,
            Keyword::L3 => n == 1 || n == 2,
        }
    }

    pub fn bit(self) -> Bit {
        match self {
            Keyword::EV | Keyword::M2 => Bit::Zero,
            Keyword::OD | Keyword::L3 => Bit::One,
        }
    }

    pub fn question(self) -> Question {
        match self {
            Keyword::OD | Keyword::EV => Question::NOD,
            Keyword::M2 | Keyword::L3 => Question::NL3,
        }
    }

    /// The keyword a "Yes"/"No" answer to `q` certifies.
    pub fn from_answer(q: Question, yes: bool) -> Keyword {
        match (q, yes) {
            (Question::NOD, true) => Keyword::OD,
            (Question::NOD, false) => Keyword::EV,
            (Question::NL3, true) => Keyword::L3,
            (Question::NL3, false) => Keyword::M2,
        }
    }
}

impl fmt::Display for Keyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Question {
    /// "Is n odd?"
    NOD,
    /// "Is n less than 3?"
    NL3,
}

impl Question {
    pub fn ask(self, n: u8) -> bool {
        match self {
            Question::NOD => n % 2 == 1,
            Question::NL3 => n < 3,
        }
    }

    pub fn basis(self) -> Basis {
        match self {
            Question::NOD => Basis::Z,
            Question::NL3 => Basis::X,
        }
    }
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Question::NOD => "nOD",
            Question::NL3 => "nL3",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MbpError {
    #[error("slot {slot}: value {value} does not satisfy keyword {keyword}")]
    Inconsistent {
        slot: usize,
        keyword: Keyword,
        value: u8,
    },
    #[error("scripts differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// One scripted ball: how it was encoded and what it is asked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScriptStep {
    pub keyword: Keyword,
    pub value: u8,
    pub question: Question,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotAnswer {
    pub yes: bool,
    pub bit: Bit,
}

/// Asks every ball its question. Slots are numbered from 1.
pub fn mbp_scripted_run(script: &[ScriptStep]) -> Result<Vec<SlotAnswer>, MbpError> {
    script
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if !s.keyword.accepts(s.value) {
                return Err(MbpError::Inconsistent {
                    slot: i + 1,
                    keyword: s.keyword,
                    value: s.value,
                });
            }
            let yes = s.question.ask(s.value);
            Ok(SlotAnswer {
                yes,
                bit: Bit::from_bool(yes),
            })
        })
        .collect()
}

fn records(
    sender: &[(Keyword, u8)],
    questions: &[Question],
    answers: &[SlotAnswer],
) -> (Vec<AliceSlotRecord>, Vec<BobSlotRecord>) {
    let alice = sender
        .iter()
        .enumerate()
        .map(|(i, (k, _))| AliceSlotRecord {
            slot: i as u64 + 1,
            bit: k.bit(),
            basis: k.question().basis(),
            emission_time: 0.0,
        })
        .collect();
    let bob = questions
        .iter()
        .zip(answers)
        .enumerate()
        .map(|(i, (q, a))| BobSlotRecord {
            slot: i as u64 + 1,
            basis: q.basis(),
            outcome: ClickOutcome {
                kind: if a.yes { ClickKind::D1 } else { ClickKind::D0 },
                timestamp: Some(0.0),
            },
            revealed_timestamp: Some(0.0),
        })
        .collect();
    (alice, bob)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MbpSession {
    pub bob_answers: Vec<SlotAnswer>,
    pub alice_bits: Vec<Bit>,
    pub sifted: SiftedKey,
}

impl MbpSession {
    pub fn kept_slots(&self) -> Vec<u64> {
        self.sifted.slots()
    }

    pub fn error_slots(&self) -> Vec<u64> {
        self.sifted
            .entries
            .iter()
            .filter(|e| e.alice_bit != e.bob_bit)
            .map(|e| e.slot)
            .collect()
    }

    /// QBER over the whole sifted key (every bit compared).
    pub fn qber(&self) -> Option<f64> {
        (!self.sifted.is_empty()).then(|| self.sifted.errors() as f64 / self.sifted.len() as f64)
    }
}

/// Alice encodes, Bob questions, no one in between.
pub fn run_direct(encoding: &[(Keyword, u8)], bob: &[Question]) -> Result<MbpSession, MbpError> {
    if encoding.len() != bob.len() {
        return Err(MbpError::LengthMismatch(encoding.len(), bob.len()));
    }
    let script: Vec<ScriptStep> = encoding
        .iter()
        .zip(bob)
        .map(|(&(keyword, value), &question)| ScriptStep {
            keyword,
            value,
            question,
        })
        .collect();
    let answers = mbp_scripted_run(&script)?;
    let (alice, bob_records) = records(encoding, bob, &answers);
    Ok(MbpSession {
        alice_bits: encoding.iter().map(|(k, _)| k.bit()).collect(),
        sifted: sift(&alice, &bob_records),
        bob_answers: answers,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterceptedSession {
    pub eve_answers: Vec<SlotAnswer>,
    /// The keyword Eve's answer certifies, used to re-encode.
    pub eve_keywords: Vec<Keyword>,
    pub session: MbpSession,
}

/// Eve questions Alice's balls, encodes fresh ones (values `eve_values`)
/// with the keyword her answer certifies, and forwards them to Bob.
pub fn run_intercepted(
    encoding: &[(Keyword, u8)],
    eve_questions: &[Question],
    eve_values: &[u8],
    bob: &[Question],
) -> Result<InterceptedSession, MbpError> {
    let n = encoding.len();
    for len in [eve_questions.len(), eve_values.len(), bob.len()] {
        if len != n {
            return Err(MbpError::LengthMismatch(n, len));
        }
    }
    let eve_script: Vec<ScriptStep> = encoding
        .iter()
        .zip(eve_questions)
        .map(|(&(keyword, value), &question)| ScriptStep {
            keyword,
            value,
            question,
        })
        .collect();
    let eve_answers = mbp_scripted_run(&eve_script)?;
    let eve_keywords: Vec<Keyword> = eve_questions
        .iter()
        .zip(&eve_answers)
        .map(|(&q, a)| Keyword::from_answer(q, a.yes))
        .collect();
    let resent: Vec<(Keyword, u8)> = eve_keywords
        .iter()
        .copied()
        .zip(eve_values.iter().copied())
        .collect();
    let bob_script: Vec<ScriptStep> = resent
        .iter()
        .zip(bob)
        .map(|(&(keyword, value), &question)| ScriptStep {
            keyword,
            value,
            question,
        })
        .collect();
    let bob_answers = mbp_scripted_run(&bob_script)?;
    let (alice, bob_records) = records(encoding, bob, &bob_answers);
    Ok(InterceptedSession {
        eve_answers,
        eve_keywords,
        session: MbpSession {
            alice_bits: encoding.iter().map(|(k, _)| k.bit()).collect(),
            sifted: sift(&alice, &bob_records),
            bob_answers,
        },
    })
}

pub mod tables {
    //! The twelve-ball worked example.
    use super::Keyword::{self, EV, L3, M2, OD};
    use super::Question::{self, NL3, NOD};

    pub const ENCODING: [(Keyword, u8); 12] = [
        (OD, 3),
        (M2, 4),
        (L3, 2),
        (EV, 2),
        (L3, 1),
        (M2, 3),
        (EV, 4),
        (EV, 2),
        (L3, 1),
        (EV, 4),
        (OD, 1),
        (M2, 3),
    ];

    pub const BOB_QUESTIONS: [Question; 12] =
        [NOD, NOD, NL3, NOD, NL3, NL3, NL3, NOD, NOD, NL3, NOD, NL3];

    /// Published outcome of the eavesdropper-free run.
    pub const DIRECT_ANSWERS: [bool; 12] = [
        true, false, true, false, true, false, false, false, true, false, true, false,
    ];
    pub const DIRECT_KEPT: [u64; 8] = [1, 3, 4, 5, 6, 8, 11, 12];
    pub const DIRECT_KEY: &str = "11010010";

    /// Alice's values in the intercepted run. Identical to [`ENCODING`]
    /// except slot 6: Eve's parity question there is answered "No", which
    /// an `M2` ball can only give with `n = 4`.
    pub const INTERCEPTED_ENCODING: [(Keyword, u8); 12] = [
        (OD, 3),
        (M2, 4),
        (L3, 2),
        (EV, 2),
        (L3, 1),
        (M2, 4),
        (EV, 4),
        (EV, 2),
        (L3, 1),
        (EV, 4),
        (OD, 1),
        (M2, 3),
    ];
    pub const EVE_QUESTIONS: [Question; 12] =
        [NOD, NL3, NL3, NL3, NOD, NOD, NL3, NL3, NOD, NOD, NL3, NOD];
    pub const EVE_ANSWERS: [bool; 12] = [
        true, false, true, true, true, false, false, true, true, false, true, true,
    ];
    pub const EVE_VALUES: [u8; 12] = [3, 3, 1, 2, 3, 4, 4, 1, 1, 2, 2, 3];
    pub const INTERCEPTED_ANSWERS: [bool; 12] = [
        true, true, true, false, false, false, false, true, true, true, false, false,
    ];
    pub const INTERCEPTED_ERRORS: [u64; 3] = [5, 8, 11];
}

/// One cell that disagreed with the reference tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMismatch {
    pub table: u8,
    pub row: &'static str,
    pub column: usize,
    pub expected: String,
    pub actual: String,
}

impl fmt::Display for CellMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "table {} row '{}' col {}: expected {}, got {}",
            self.table, self.row, self.column, self.expected, self.actual
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TablesReport {
    pub text: String,
    pub mismatches: Vec<CellMismatch>,
    pub direct: MbpSession,
    pub intercepted: InterceptedSession,
}

impl TablesReport {
    pub fn is_exact(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "Yes"
    } else {
        "No"
    }
}

fn bits_string(bits: impl IntoIterator<Item = crate::optics::Bit>) -> String {
    bits.into_iter()
        .map(|b| char::from(b'0' + b.value()))
        .collect()
}

fn compare<T: PartialEq + fmt::Display>(
    out: &mut Vec<CellMismatch>,
    table: u8,
    row: &'static str,
    expected: &[T],
    actual: &[T],
) {
    for (i, (e, a)) in expected.iter().zip(actual).enumerate() {
        if e != a {
            out.push(CellMismatch {
                table,
                row,
                column: i + 1,
                expected: e.to_string(),
                actual: a.to_string(),
            });
        }
    }
    if expected.len() != actual.len() {
        out.push(CellMismatch {
            table,
            row,
            column: expected.len().min(actual.len()) + 1,
            expected: format!("{} cells", expected.len()),
            actual: format!("{} cells", actual.len()),
        });
    }
}

fn row<T: fmt::Display>(label: &str, cells: impl IntoIterator<Item = T>) -> String {
    let mut s = format!("{label:<16}");
    for c in cells {
        s.push_str(&format!("{:>5}", c.to_string()));
    }
    s.push('\n');
    s
}

/// Runs the scripted sequences and checks them cell by cell against the
/// reference tables.
pub fn reproduce_tables() -> Result<TablesReport, MbpError> {
    use tables::*;
    let mut mismatches = Vec::new();
    let mut text = String::new();
    let header = row("slot", 1..=12);

    // Encoding: every value satisfies its keyword.
    text.push_str("Encoding table\n");
    text.push_str(&header);
    text.push_str(&row("keyword", ENCODING.iter().map(|e| e.0)));
    text.push_str(&row("n", ENCODING.iter().map(|e| e.1)));
    for (i, (k, n)) in ENCODING.iter().enumerate() {
        if !k.accepts(*n) {
            mismatches.push(CellMismatch {
                table: 1,
                row: "n",
                column: i + 1,
                expected: format!("a value satisfying {k}"),
                actual: n.to_string(),
            });
        }
    }

    let direct = run_direct(&ENCODING, &BOB_QUESTIONS)?;
    let answers: Vec<bool> = direct.bob_answers.iter().map(|a| a.yes).collect();
    compare(&mut mismatches, 2, "answer", &DIRECT_ANSWERS, &answers);
    compare(
        &mut mismatches,
        2,
        "kept",
        &DIRECT_KEPT,
        &direct.kept_slots(),
    );
    let key = bits_string(direct.sifted.bob_bits());
    compare(
        &mut mismatches,
        2,
        "key",
        &[DIRECT_KEY.to_string()],
        &[key.clone()],
    );
    text.push_str("\nSession without an eavesdropper\n");
    text.push_str(&header);
    text.push_str(&row("bob question", BOB_QUESTIONS));
    text.push_str(&row("answer", answers.iter().map(|&a| yes_no(a))));
    text.push_str(&row(
        "bob bit",
        direct.bob_answers.iter().map(|a| a.bit.value()),
    ));
    text.push_str(&format!(
        "kept slots {:?}, key {key}\n",
        direct.kept_slots()
    ));

    let inter = run_intercepted(
        &INTERCEPTED_ENCODING,
        &EVE_QUESTIONS,
        &EVE_VALUES,
        &BOB_QUESTIONS,
    )?;
    let eve_answers: Vec<bool> = inter.eve_answers.iter().map(|a| a.yes).collect();
    let bob_answers: Vec<bool> = inter.session.bob_answers.iter().map(|a| a.yes).collect();
    let alice_table1: Vec<u8> = ENCODING.iter().map(|(k, _)| k.bit().value()).collect();
    let alice_bits: Vec<u8> = inter.session.alice_bits.iter().map(|b| b.value()).collect();
    compare(&mut mismatches, 3, "alice bit", &alice_table1, &alice_bits);
    compare(&mut mismatches, 3, "eve answer", &EVE_ANSWERS, &eve_answers);
    compare(
        &mut mismatches,
        3,
        "bob answer",
        &INTERCEPTED_ANSWERS,
        &bob_answers,
    );
    compare(
        &mut mismatches,
        3,
        "kept",
        &DIRECT_KEPT,
        &inter.session.kept_slots(),
    );
    compare(
        &mut mismatches,
        3,
        "error slots",
        &INTERCEPTED_ERRORS,
        &inter.session.error_slots(),
    );
    let qber = inter.session.qber();
    if qber != Some(3.0 / 8.0) {
        mismatches.push(CellMismatch {
            table: 3,
            row: "qber",
            column: 0,
            expected: "0.375".into(),
            actual: format!("{qber:?}"),
        });
    }
    text.push_str("\nSession with intercept and resend\n");
    text.push_str(&header);
    text.push_str(&row("alice bit", &alice_bits));
    text.push_str(&row("eve question", EVE_QUESTIONS));
    text.push_str(&row("eve answer", eve_answers.iter().map(|&a| yes_no(a))));
    text.push_str(&row("m", EVE_VALUES));
    text.push_str(&row("bob question", BOB_QUESTIONS));
    text.push_str(&row("answer", bob_answers.iter().map(|&a| yes_no(a))));
    text.push_str(&row(
        "bob bit",
        inter.session.bob_answers.iter().map(|a| a.bit.value()),
    ));
    text.push_str(&format!(
        "error slots {:?}, qber {}/{} = {:.3}\n",
        inter.session.error_slots(),
        inter.session.sifted.errors(),
        inter.session.sifted.len(),
        qber.unwrap_or(f64::NAN)
    ));

    text.push('\n');
    if mismatches.is_empty() {
        text.push_str("all tables reproduced exactly\n");
    } else {
        for m in &mismatches {
            text.push_str(&format!("MISMATCH {m}\n"));
        }
    }
    Ok(TablesReport {
        text,
        mismatches,
        direct,
        intercepted: inter,
    })
}
