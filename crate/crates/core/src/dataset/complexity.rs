use serde::Serialize;

use crate::frontend::{parse_source, Program, StmtKind};
use crate::interp::{count_state_changes, Limits};

use super::QAExample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Complexity {
    Complex,
    Simple,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComplexityLabel {
    pub class: Complexity,
    pub if_branches: usize,
    pub loop_branches: usize,
    pub state_changes: usize,
}

impl ComplexityLabel {
    pub fn is_complex(&self) -> bool {
        self.if_branches >= 1 && self.loop_branches >= 1 && self.state_changes > 15
    }

    pub fn is_simple(&self) -> bool {
        self.if_branches <= 1 && self.loop_branches == 0 && self.state_changes <= 5
    }

    fn from_counts(if_branches: usize, loop_branches: usize, state_changes: usize) -> Self {
        let mut label = Self { class: Complexity::Other, if_branches, loop_branches, state_changes };
        label.class = if label.is_complex() {
            Complexity::Complex
        } else if label.is_simple() {
            Complexity::Simple
        } else {
            Complexity::Other
        };
        label
    }
}

/// Static `if`/`repeat` counts plus the dynamic number of assignments.
pub fn classify_program(program: &Program, limits: Limits) -> ComplexityLabel {
    let ifs = program.count_statements(|k| matches!(k, StmtKind::If { .. }));
    let loops = program.count_statements(|k| matches!(k, StmtKind::Repeat { .. }));
    ComplexityLabel::from_counts(ifs, loops, count_state_changes(program, limits))
}

/// Labels an example by its reference program. Returns `None` when the
/// program does not parse, which a validated example never hits.
pub fn classify_complexity(example: &QAExample) -> Option<ComplexityLabel> {
    let program = parse_source(&example.reference_program).ok()?;
    Some(classify_program(&program, Limits::default()))
}
