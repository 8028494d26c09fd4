// The guide in book/ doubles as a test suite: every Rust snippet in the
// chapters is compiled and run by `cargo test --doc` through the include
// below, so the book cannot drift from the library.
#![cfg(doctest)]

macro_rules! chapter {
    ($name:ident, $path:literal) => {
        #[doc = include_str!($path)]
        mod $name {}
    };
}

chapter!(introduction, "../../../book/src/introduction.md");
chapter!(lecture_model, "../../../book/src/lecture-model.md");
chapter!(gaze_logs, "../../../book/src/gaze-logs.md");
chapter!(hit_testing, "../../../book/src/hit-testing.md");
chapter!(attention_metrics, "../../../book/src/attention-metrics.md");
chapter!(quiz_allocation, "../../../book/src/quiz-allocation.md");
chapter!(chat_confusion, "../../../book/src/chat-confusion.md");
chapter!(knowledge_base, "../../../book/src/knowledge-base.md");
chapter!(simulation, "../../../book/src/simulation.md");
chapter!(service, "../../../book/src/service.md");
chapter!(cli, "../../../book/src/cli.md");
