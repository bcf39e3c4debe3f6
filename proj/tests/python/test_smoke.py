import json
import math
import os
from pathlib import Path

import pytest

import motionbrush as mb

CONFIG = Path(os.environ.get("MOTIONBRUSH_CONFIG", Path(__file__).resolve().parents[2] / "config"))


def test_codec_round_trip_and_corruption():
    f = mb.Frame(dev=2, seq=7, t_us=123456789, quat=[1.0, 0.0, 0.0, 0.0], acc=[0.5, -1.25, 9.81])
    wire = mb.encode_frame(f)
    assert len(wire) == 48
    assert wire[:3] == b"\xa1\x53\x01"
    status, back = mb.decode_frame(wire)
    assert status == "ok"
    assert back == f
    broken = bytearray(wire)
    broken[20] ^= 0x40
    assert mb.decode_frame(bytes(broken))[0] == "bad_crc"
    assert mb.crc32(b"123456789") == 0xCBF43926


def test_golden_identity_frame():
    golden = bytes.fromhex((Path(__file__).resolve().parents[1] / "fixtures" / "identity_frame.hex").read_text())
    assert mb.encode_frame(mb.Frame()) == golden


def test_energy_constant_signal():
    t = [i * 10_000 for i in range(200)]
    e = mb.energy_series(t, [2.0] * 200, window_s=0.5)
    assert e[0] == pytest.approx(0.02)
    assert e[-1] == pytest.approx(2.0 * 0.5)


def test_mapping_is_mirror_symmetric():
    for theta in [0.1, 0.7, 1.3, 2.9]:
        assert mb.folded_sin(theta) == pytest.approx(mb.folded_sin(math.pi - theta), abs=1e-12)
    assert mb.canvas_position([1, 0, 0, 0]) == (0.5, 0.5)
    half_turn = [0.0, 0.0, 1.0, 0.0]
    assert mb.canvas_position(half_turn)[0] == 0.5


def test_simulator_session_and_analysis(tmp_path):
    frames = mb.simulate_performance(5, 12.0)
    assert len(frames) == 4 * 1200
    path = str(tmp_path / "s.mbsession.jsonl")
    mb.write_session(path, frames, "smoke")
    header, back = mb.read_session(path)
    assert header["session"] == "smoke"
    assert back == frames

    trace = mb.energy_trace(path, "left_wrist")
    assert len(trace) == 1200
    assert all(e >= 0 for _, e in trace)

    h = mb.heatmap([[0.0, 0.0, 1.0]] * 10)
    mass = sum(d * a for d, a in zip(h["density"], h["solid_angle"]))
    assert mass == pytest.approx(1.0, abs=1e-9)
    assert sum(1 for c in h["counts"] if c) == 1

    b = mb.range_bounds(path, "right_ankle")
    assert b["pitch_lo"] <= b["pitch_hi"]


def test_errors_carry_codes(tmp_path):
    with pytest.raises(mb.MotionbrushError) as info:
        mb.read_session(str(tmp_path / "missing.jsonl"))
    assert info.value.code == "io"
    with pytest.raises(mb.MotionbrushError) as info:
        mb.simulate("smooth", placement="nose")
    assert info.value.code == "unknown_placement"


def test_engine_ticks_and_commands():
    engine = mb.Engine(str(CONFIG / "profiles"), str(CONFIG / "scenes.json"), seed=3)
    frames = mb.simulate_performance(1, 3.0)
    out = []
    i = 0
    for k in range(180):
        t = k * 16_667
        batch = []
        while i < len(frames) and frames[i].t_us <= t:
            batch.append(frames[i])
            i += 1
        out.extend(engine.tick(t + 1, batch))
    frame_msgs = [m for m in out if m["type"] == "frame"]
    assert len(frame_msgs) == 180
    for b in frame_msgs[-1]["brushes"]:
        assert 0.0 <= b["x"] <= 1.0 and 0.0 <= b["y"] <= 1.0
        assert set(b) == {"id", "x", "y", "w", "e", "tex", "still", "stale"}
    reply = engine.command({"type": "set_param", "name": "epsilon", "value": 0.2, "id": 4})
    assert reply == {"type": "ack", "cmd": "set_param", "id": 4, "name": "epsilon", "dev": None, "value": 0.2}
    assert engine.command({"type": "set_param", "name": "epsilon", "value": -1})["code"] == "out_of_range"
    assert json.loads(json.dumps(engine.command({"type": "nope"})))["code"] == "unknown_command"
    assert mb.FEED_PORT == 7402
