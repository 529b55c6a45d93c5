//! Nine-grid photo arrangement.
//!
//! The pipeline crops nine images into 300×300 thumbnails, scores them,
//! ranks them into a sequential or center-first 3×3 layout, renders 900×900
//! composites, and runs blind four-way preference studies over the results.
//!
//! Scoring, ranking and study statistics are generic over [`Scalar`]
//! (`f32`/`f64`); the aliases below fix the scalar to `f64`.

pub mod arrange;
pub mod compose;
pub mod error;
pub mod io;
pub mod preprocess;
pub mod scalar;
pub mod scoring;
pub mod study;

pub use arrange::{
    arrange, arrange_center, arrange_sequential, build_four_layouts, rank_images, GridLayout,
    GridPosition, Ranking, ScorerRole, Strategy, VariantKey,
};
pub use compose::{compose_grid, write_composite, Composite};
pub use error::{Error, Result};
pub use preprocess::{
    apply_crop, compute_crop, preprocess_set, resize_square, CropSpec, SetManifest, SourceImage,
    Thumbnail, ThumbnailSet,
};
pub use scalar::Scalar;
pub use scoring::{BuiltinScorer, ScorerDescriptor, ScorerKind};
pub use study::{
    build_study, build_variants, summarize, tally, Ballot, BallotBox, BallotLog, QuadRef,
    StudyBundle, TallyResult, VariantQuad,
};

pub type ScoreTable = scoring::ScoreTable<f64>;
pub type ScoreTable32 = scoring::ScoreTable<f32>;
pub type ExternalScores = scoring::ExternalScores<f64>;
pub type Summary = study::Summary<f64>;
pub type Summary32 = study::Summary<f32>;
