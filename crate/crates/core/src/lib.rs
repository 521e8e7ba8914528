//! Clinical event knowledge graphs: ingest event logs and terminology
//! tables, build a labeled property graph, discover care pathways and
//! export the results.

pub mod cli;
pub mod construct;
pub mod discover;
pub mod export;
pub mod graph;
pub mod ingest;
pub mod report;
pub mod sample;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graph.md")]
    mod graph {}
    #[doc = include_str!("../../../book/src/ingest.md")]
    mod ingest {}
    #[doc = include_str!("../../../book/src/construction.md")]
    mod construction {}
    #[doc = include_str!("../../../book/src/pathways.md")]
    mod pathways {}
    #[doc = include_str!("../../../book/src/export.md")]
    mod export {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
