"""Python access to the motionbrush core: wire codec, energy, mapping,
simulation, session files, analysis, calibration and the brush engine."""

from ._motionbrush import (
    FEED_PORT,
    Engine,
    Frame,
    MotionbrushError,
    build_profile,
    canvas_position,
    crc32,
    decode_frame,
    encode_frame,
    energy_series,
    energy_trace,
    folded_sin,
    heatmap,
    range_bounds,
    read_session,
    simulate,
    simulate_performance,
    write_session,
)

__all__ = [
    "FEED_PORT",
    "Engine",
    "Frame",
    "MotionbrushError",
    "build_profile",
    "canvas_position",
    "crc32",
    "decode_frame",
    "encode_frame",
    "energy_series",
    "energy_trace",
    "folded_sin",
    "heatmap",
    "range_bounds",
    "read_session",
    "simulate",
    "simulate_performance",
    "write_session",
]
