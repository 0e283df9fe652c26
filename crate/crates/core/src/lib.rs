//! Finite laboratory for budgeted Ehrenfeucht–Fraïssé games, filters on ω
//! generated by game values, slalom covers and back-and-forth assembly of
//! isomorphisms between reduced products.

pub mod backforth;
pub mod cli;
pub mod efgame;
pub mod filterlab;
pub mod formulas;
pub mod slalom;
pub mod structures;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/structures.md")]
    mod structures {}
    #[doc = include_str!("../../../book/src/formulas.md")]
    mod formulas {}
    #[doc = include_str!("../../../book/src/games.md")]
    mod games {}
    #[doc = include_str!("../../../book/src/filters.md")]
    mod filters {}
    #[doc = include_str!("../../../book/src/slaloms.md")]
    mod slaloms {}
    #[doc = include_str!("../../../book/src/back-and-forth.md")]
    mod back_and_forth {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
