pub mod engine;
pub mod error;
pub mod field;
pub mod freeness;
pub mod induced;
pub mod linalg;
pub mod serial;
pub mod series;
pub mod sl2;
pub mod weights;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/finite-fields.md")]
    mod finite_fields {}
    #[doc = include_str!("../../../book/src/series.md")]
    mod series {}
    #[doc = include_str!("../../../book/src/cosets.md")]
    mod cosets {}
    #[doc = include_str!("../../../book/src/weights.md")]
    mod weights {}
    #[doc = include_str!("../../../book/src/hecke.md")]
    mod hecke {}
    #[doc = include_str!("../../../book/src/freeness.md")]
    mod freeness {}
    #[doc = include_str!("../../../book/src/engine.md")]
    mod engine {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
