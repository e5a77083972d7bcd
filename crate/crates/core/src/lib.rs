//! Contamination audit toolkit for multiple-choice benchmarks.
//!
//! Three complementary detection methods over chat-completion model
//! endpoints and a web-search endpoint:
//!
//! * [`lexical`] — web-overlap detection: search for each question, score
//!   8-gram overlap against the result snippets, flag on the dual condition
//!   (overlap above threshold AND correct answer present verbatim), and
//!   estimate the performance gain attributable to contamination.
//! * [`perturb`] — paraphrase / indirect-reference diagnostic: regenerate
//!   each question in two reworded forms, evaluate every model on all three
//!   forms at temperature 0, and report accuracy drops.
//! * [`tsguess`] — behavioral memorization probes: mask an incorrect answer
//!   option or a content word and check whether models reconstruct the
//!   original text.
//!
//! Supporting modules: [`dataset`] (loading, category mapping, seeded
//! stratified sampling), [`textproc`] (the shared normalization and overlap
//! kernel), [`providers`] (HTTP + stub backends with a deterministic replay
//! cache), [`report`] (table rendering, plot data, cross-method convergence),
//! and [`config`] (run configuration).

pub mod config;
pub mod dataset;
pub mod lexical;
pub mod perturb;
pub mod providers;
pub mod report;
pub mod textproc;
pub mod tsguess;
pub mod util;
