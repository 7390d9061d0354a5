//! Doctest anchors for the guide under `book/`. Each chapter's code blocks
//! run here, so a snippet that drifts from the library fails the test suite.

macro_rules! chapter {
    ($name:ident, $path:literal) => {
        #[doc = include_str!($path)]
        pub mod $name {}
    };
}

chapter!(introduction, "../../../book/src/introduction.md");
chapter!(kernels, "../../../book/src/kernels.md");
chapter!(solver, "../../../book/src/solver.md");
chapter!(algorithm, "../../../book/src/algorithm.md");
chapter!(evaluation, "../../../book/src/evaluation.md");
chapter!(checks, "../../../book/src/checks.md");
chapter!(cli, "../../../book/src/cli.md");
