"""Temporal contrastive decoding for audio-language models."""

from ._tcd import (
    AudioLanguageModel,
    ConfigError,
    DecodeConfig,
    ScriptedModel,
    SlowPath,
    StateError,
    Strategy,
    ToyModel,
    blur_waveform,
    detokenize,
    fuse_logits,
    gate,
    generate,
    hann_kernel,
    profile_ratios,
    run_manifest,
    synth,
    tokenize,
    topk_entropy,
)

__all__ = [
    "AudioLanguageModel",
    "ConfigError",
    "DecodeConfig",
    "ScriptedModel",
    "SlowPath",
    "StateError",
    "Strategy",
    "ToyModel",
    "blur_waveform",
    "detokenize",
    "fuse_logits",
    "gate",
    "generate",
    "hann_kernel",
    "profile_ratios",
    "run_manifest",
    "synth",
    "tokenize",
    "topk_entropy",
]
