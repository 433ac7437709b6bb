use std::fmt;
use std::sync::Arc;

/// A region of a source file. Lines and columns are 1-based; the end
/// position is exclusive (it points one column past the last character).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SourceSpan {
    pub file: Arc<str>,
    pub line_start: u32,
    pub col_start: u32,
    pub line_end: u32,
    pub col_end: u32,
}

impl SourceSpan {
    pub fn new(file: Arc<str>, start: Position, end: Position) -> Self {
        debug_assert!(start <= end);
        SourceSpan {
            file,
            line_start: start.line,
            col_start: start.col,
            line_end: end.line,
            col_end: end.col,
        }
    }

    /// Placeholder span used for synthesized nodes and for span-insensitive comparison.
    pub fn dummy() -> Self {
        SourceSpan {
            file: Arc::from(""),
            line_start: 1,
            col_start: 1,
            line_end: 1,
            col_end: 1,
        }
    }

    pub fn start(&self) -> Position {
        Position {
            line: self.line_start,
            col: self.col_start,
        }
    }

    pub fn end(&self) -> Position {
        Position {
            line: self.line_end,
            col: self.col_end,
        }
    }

    /// Smallest span covering both `self` and `other`.
    pub fn to(&self, other: &SourceSpan) -> SourceSpan {
        let start = self.start().min(other.start());
        let end = self.end().max(other.end());
        SourceSpan::new(self.file.clone(), start, end)
    }
}

impl Default for SourceSpan {
    fn default() -> Self {
        SourceSpan::dummy()
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line_start, self.col_start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Position {
    pub line: u32,
    pub col: u32,
}

impl Position {
    pub const START: Position = Position { line: 1, col: 1 };
}
