//! Streaming simultaneous translation: information-unit detection over an
//! incoming token stream, context-aware decoding policies, transcript
//! normalization, constrained decoding and latency metrics.

pub mod alignment;
pub mod beam;
pub mod bleu;
pub mod detector;
pub mod harness;
pub mod latency;
pub mod normalize;
pub mod policy;
pub mod stream;

pub use alignment::{AlignmentSet, SplitKind, SubSentencePair};
pub use beam::{BeamError, BeamHypothesis, ConstraintSet, StepScorer, TokenId};
pub use detector::{BoundaryScorer, Detector, DetectorConfig, DetectorState, PunctuationScorer, ReferenceScorer};
pub use harness::{HarnessError, Report, RunConfig};
pub use latency::{EeParams, SegmentLengths};
pub use normalize::{NGramLm, NormalizerConfig, Whitelist};
pub use policy::{Policy, ToyLexiconOracle, TranslationOracle};
pub use stream::{InformationUnit, Segment, StreamEvent, Token, TranslationTimeline, Utterance};
