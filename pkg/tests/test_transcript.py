import json

import numpy as np
import pytest

from sbb84.session import ProtocolConfig, run_session
from sbb84.transcript import SeedStreams, SessionTranscript


def test_announce_validates():
    t = SessionTranscript()
    with pytest.raises(ValueError):
        t.announce("E", "bases", {})
    with pytest.raises(ValueError):
        t.announce("A", "gossip", {})
    assert len(t) == 0


def test_payload_is_canonical_json():
    t = SessionTranscript()
    rec = t.announce("A", "abort", {"stage": "x", "reason": "Y"})
    assert rec.payload == b'{"reason":"Y","stage":"x"}'
    assert rec.data == {"stage": "x", "reason": "Y"}


def test_jsonl_format():
    t = SessionTranscript()
    t.announce("A", "pairing", {"round": 1, "perm": [1, 0]})
    t.announce("B", "parity_ack", {"stage": "crude", "round": 1})
    lines = t.to_jsonl().splitlines()
    first = json.loads(lines[0])
    assert set(first) == {"seq", "sender", "kind", "payload"}
    assert first["seq"] == 0 and first["sender"] == "A"
    assert bytes.fromhex(first["payload"]) == t.records[0].payload


def test_round_trip(tmp_path):
    res = run_session(ProtocolConfig(n=300, seed=4))
    path = tmp_path / "t.jsonl"
    res.transcript.save(path)
    back = SessionTranscript.load(path)
    assert back.records == res.transcript.records
    assert back.to_jsonl() == res.transcript.to_jsonl()


def test_broken_sequence():
    t = SessionTranscript()
    t.announce("A", "bases", {})
    t.announce("B", "bases", {})
    lines = t.to_jsonl().splitlines()
    with pytest.raises(ValueError, match="sequence"):
        SessionTranscript.from_jsonl(lines[1] + "\n" + lines[0])


def test_streams_independent():
    s1, s2 = SeedStreams(5), SeedStreams(5)
    s1["channel"].random(1000)
    assert s1["pairing"].random() == s2["pairing"].random()
    assert SeedStreams(5)["eve"].random() != SeedStreams(5)["channel"].random()
    assert SeedStreams(5)["eve"].random() != SeedStreams(6)["eve"].random()
    assert s1["code"] is s1["code"]
    assert isinstance(s1["code"], np.random.Generator)
