//! Chart data tables as linearized CSV and as structured triplets, plus the
//! metrics used to score chart-to-table extraction and chart QA.
//!
//! ```
//! use chartrel::{lct, scrm, triplet};
//!
//! let gt = lct::parse_lct("none,Q1,Q2\nSales,10,20\n").unwrap();
//! let pred = lct::parse_lct("none,Sales\nQ1,10.4\nQ2,20\n").unwrap();
//! let score = scrm::image_iou(
//!     &triplet::to_str(&pred),
//!     &triplet::to_str(&gt),
//!     &scrm::ToleranceLevel::slight(),
//!     scrm::MatchMode::Matched,
//! );
//! assert_eq!(score.iou, 1.0);
//! ```

pub mod lct;
mod numeric;
pub mod qa;
pub mod scrm;
pub mod triplet;

pub use lct::{normalize_numeric, parse_lct, serialize_lct, Cell, LctError, LctTable};
pub use scrm::{ImageScore, MatchMode, Scorer, ScrmReport, ToleranceLevel};
pub use triplet::{NTuple, NTupleSet, StrFormat, Triplet, TripletSet};
