"""Screen-frame intervention pipeline (C++ core bindings)."""

from gtrm._core import (  # noqa: F401
    BoundsError,
    ConfigError,
    DecodeError,
    Detection,
    DimensionError,
    Frame,
    OverlayOp,
    Region,
    average_hash,
    decode_frame,
    detect_scroll,
    detect_text_regions,
    encode_frame,
    generate_screen,
    generate_scroll_sequence,
    hamming_distance,
    inpaint_fmm,
    inpaint_majority,
    latency_budget,
    lexicon_score,
    make_frame,
    match_multiscale,
    read_image,
    recognize_text,
    run_pipeline_file,
    write_pam,
)

__all__ = [
    "BoundsError",
    "ConfigError",
    "DecodeError",
    "Detection",
    "DimensionError",
    "Frame",
    "OverlayOp",
    "Region",
    "average_hash",
    "decode_frame",
    "detect_scroll",
    "detect_text_regions",
    "encode_frame",
    "generate_screen",
    "generate_scroll_sequence",
    "hamming_distance",
    "inpaint_fmm",
    "inpaint_majority",
    "latency_budget",
    "lexicon_score",
    "make_frame",
    "match_multiscale",
    "read_image",
    "recognize_text",
    "run_pipeline_file",
    "write_pam",
]
