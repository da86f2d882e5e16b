//! View identities, query-hit traces, and the on-disk trace format.
//!
//! A trace is an ordered list of hit events, one per query, each naming the
//! single materialized view that answered the query. The CSV form is:
//!
//! ```text
//! query_id,view_id      <- optional header, must match exactly
//! Q1,V1
//! Q2,V1
//! ```
//!
//! Fields are comma separated with no quoting. Views are interned into a
//! [`ViewCatalog`] in first-appearance order unless a sidecar catalog is
//! supplied.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// The exact header line accepted at the top of a trace file.
pub const TRACE_HEADER: &str = "query_id,view_id";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("input is not valid UTF-8")]
    InvalidUtf8,
    #[error("malformed line {0}")]
    MalformedLine(usize),
    #[error("header line does not match `{TRACE_HEADER}`")]
    DuplicateHeaderMismatch,
    #[error("line {line}: view `{name}` is not in the catalog")]
    UnknownView { line: usize, name: String },
    #[error("catalog line {0}: empty view name")]
    EmptyViewName(usize),
    #[error("catalog line {line}: duplicate view name `{name}`")]
    DuplicateView { line: usize, name: String },
    #[error("event {index} references view {view} outside a catalog of {size}")]
    ViewOutOfRange {
        index: usize,
        view: usize,
        size: usize,
    },
    #[error("event {0} has a sequence number that does not increase")]
    NonIncreasingSeq(usize),
}

/// Ordered set of distinct view names with a dense index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ViewCatalog {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl ViewCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a catalog from names in order; names must be non-empty and
    /// distinct.
    pub fn from_names<I, S>(names: I) -> Result<Self, TraceError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut catalog = Self::new();
        for (i, name) in names.into_iter().enumerate() {
            let name = name.into();
            if name.is_empty() {
                return Err(TraceError::EmptyViewName(i + 1));
            }
            if catalog.index.contains_key(&name) {
                return Err(TraceError::DuplicateView { line: i + 1, name });
            }
            catalog.intern(&name);
        }
        Ok(catalog)
    }

    /// Catalog of `n` views named `V1..Vn`.
    pub fn numbered(n: usize) -> Self {
        Self::from_names((1..=n).map(|i| format!("V{i}"))).expect("generated names are distinct")
    }

    fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), i);
        i
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// One query answered by one view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HitEvent {
    pub seq: u64,
    pub query_id: String,
    pub view: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryTrace {
    catalog: ViewCatalog,
    events: Vec<HitEvent>,
}

impl QueryTrace {
    /// Validates that every event names a catalog view and that `seq`
    /// strictly increases.
    pub fn new(catalog: ViewCatalog, events: Vec<HitEvent>) -> Result<Self, TraceError> {
        for (i, e) in events.iter().enumerate() {
            if e.view >= catalog.len() {
                return Err(TraceError::ViewOutOfRange {
                    index: i,
                    view: e.view,
                    size: catalog.len(),
                });
            }
            if i > 0 && events[i - 1].seq >= e.seq {
                return Err(TraceError::NonIncreasingSeq(i));
            }
        }
        Ok(Self { catalog, events })
    }

    /// Trace over `catalog` hitting `views` in order, with generated query ids
    /// `Q1, Q2, ...`.
    pub fn from_views(catalog: ViewCatalog, views: &[usize]) -> Result<Self, TraceError> {
        let events = views
            .iter()
            .enumerate()
            .map(|(i, &view)| HitEvent {
                seq: i as u64,
                query_id: format!("Q{}", i + 1),
                view,
            })
            .collect();
        Self::new(catalog, events)
    }

    pub fn catalog(&self) -> &ViewCatalog {
        &self.catalog
    }

    pub fn events(&self) -> &[HitEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn views(&self) -> impl Iterator<Item = usize> + '_ {
        self.events.iter().map(|e| e.view)
    }

    /// Serializes to trace CSV with the canonical header.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(16 * (self.events.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for e in &self.events {
            out.push_str(&e.query_id);
            out.push(',');
            out.push_str(&self.catalog.names[e.view]);
            out.push('\n');
        }
        out
    }
}

/// Parses trace CSV, building the catalog from first appearance.
pub fn parse_trace(input: &[u8]) -> Result<QueryTrace, TraceError> {
    parse_inner(input, None)
}

/// Parses trace CSV against a fixed catalog; views outside it are rejected.
pub fn parse_trace_with_catalog(
    input: &[u8],
    catalog: &ViewCatalog,
) -> Result<QueryTrace, TraceError> {
    parse_inner(input, Some(catalog))
}

fn parse_inner(input: &[u8], fixed: Option<&ViewCatalog>) -> Result<QueryTrace, TraceError> {
    let text = std::str::from_utf8(input).map_err(|_| TraceError::InvalidUtf8)?;
    let mut catalog = fixed.cloned().unwrap_or_default();
    let mut events = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if i == 0 && line.split(',').next() == Some("query_id") {
            if line != TRACE_HEADER {
                return Err(TraceError::DuplicateHeaderMismatch);
            }
            continue;
        }
        let mut fields = line.split(',');
        let (Some(query_id), Some(view), None) = (fields.next(), fields.next(), fields.next())
        else {
            return Err(TraceError::MalformedLine(line_no));
        };
        if view.is_empty() {
            return Err(TraceError::MalformedLine(line_no));
        }
        let view = match fixed {
            Some(c) => c.index_of(view).ok_or_else(|| TraceError::UnknownView {
                line: line_no,
                name: view.to_owned(),
            })?,
            None => catalog.intern(view),
        };
        events.push(HitEvent {
            seq: events.len() as u64,
            query_id: query_id.to_owned(),
            view,
        });
    }
    Ok(QueryTrace { catalog, events })
}

/// Parses a catalog sidecar: one view name per line, position = index.
pub fn parse_catalog(input: &[u8]) -> Result<ViewCatalog, TraceError> {
    let text = std::str::from_utf8(input).map_err(|_| TraceError::InvalidUtf8)?;
    ViewCatalog::from_names(text.lines().map(|l| l.trim_end_matches('\r')))
}

/// The m×n boolean View Hit Matrix: row q marks the view that answered
/// query q.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewHitMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<bool>,
}

impl ViewHitMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_hit(&self, query: usize, view: usize) -> bool {
        self.cells[query * self.cols + view]
    }

    pub fn row(&self, query: usize) -> &[bool] {
        &self.cells[query * self.cols..(query + 1) * self.cols]
    }
}

impl fmt::Display for ViewHitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.rows {
            let cells: Vec<&str> = self
                .row(q)
                .iter()
                .map(|&h| if h { "HIT" } else { "MISS" })
                .collect();
            writeln!(f, "{}", cells.join("\t"))?;
        }
        Ok(())
    }
}

pub fn vhm_from_trace(trace: &QueryTrace) -> ViewHitMatrix {
    let rows = trace.len();
    let cols = trace.catalog.len();
    let mut cells = vec![false; rows * cols];
    for (q, e) in trace.events.iter().enumerate() {
        cells[q * cols + e.view] = true;
    }
    ViewHitMatrix { rows, cols, cells }
}
