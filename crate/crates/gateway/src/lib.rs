//! Prompt builders, strict response parsers and chat-completion providers,
//! including a deterministic mock for offline runs.

pub mod client;
pub mod error;
pub mod mock;
pub mod parse;
pub mod prompt;

pub use client::{ChatProvider, Completion, HttpProvider, ProviderConfig, RequestParams, RetryPolicy};
pub use error::GatewayError;
pub use mock::{MockContext, MockMode, MockProvider};
pub use parse::{parse_annotation_response, parse_generation_response, parse_paraphrase_response, AnnotationResult};
pub use prompt::{
    build_annotation_prompt, build_generation_prompt, build_paraphrase_prompt, AnnotationOptions, Prompt, PromptKind,
    SectionTag,
};
