//! Direct-prompt forecasting with chat-completion models.

mod forecaster;
mod prompt;
mod provider;

pub use forecaster::{load_reports, LlmForecaster};
pub use prompt::{
    parse_forecast, prompt_input, render, render_prompt, ForecastTask, FutureBlock, ParsedForecast, PromptInput,
    PromptVariant,
};
pub use provider::{
    build_provider, prompt_hash, Completion, HttpEndpoint, LlmClient, LlmProviderConfig, Provider, ProviderKind,
    RecordedFixture, Transcript, TranscriptStore,
};

/// Categories the LLM variants run on unless configured otherwise.
pub const DEFAULT_TARGETS: [&str; 3] = ["target_bakery", "target_meat", "target_vegetables"];
