"""Public classical channel log and seeded randomness streams."""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

import numpy as np

KINDS = (
    "bases",
    "check_reveal",
    "pairing",
    "parity_ack",
    "R_string",
    "xv_announce",
    "code_spec",
    "abort",
)
SENDERS = ("A", "B")


def _encode(data: Any) -> bytes:
    return json.dumps(data, sort_keys=True, separators=(",", ":")).encode()


@dataclass(frozen=True)
class Record:
    seq: int
    sender: str
    kind: str
    payload: bytes

    @property
    def data(self) -> Any:
        return json.loads(self.payload)

    def to_json(self) -> dict:
        return {"seq": self.seq, "sender": self.sender, "kind": self.kind, "payload": self.payload.hex()}

    @classmethod
    def from_json(cls, obj: dict) -> Record:
        return cls(obj["seq"], obj["sender"], obj["kind"], bytes.fromhex(obj["payload"]))


@dataclass
class SessionTranscript:
    """Ordered log of everything announced over the classical channel.

    Payloads are compact JSON documents stored as bytes; the JSON Lines
    export writes them as hex.
    """

    records: list[Record] = field(default_factory=list)

    def announce(self, sender: str, kind: str, data: Any) -> Record:
        if sender not in SENDERS:
            raise ValueError(f"unknown sender {sender!r}")
        if kind not in KINDS:
            raise ValueError(f"unknown message kind {kind!r}")
        rec = Record(len(self.records), sender, kind, _encode(data))
        self.records.append(rec)
        return rec

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[Record]:
        return iter(self.records)

    def of_kind(self, kind: str) -> list[Record]:
        return [r for r in self.records if r.kind == kind]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_json(), separators=(",", ":")) + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text: str) -> SessionTranscript:
        records = [Record.from_json(json.loads(line)) for line in text.splitlines() if line.strip()]
        for i, r in enumerate(records):
            if r.seq != i:
                raise ValueError(f"transcript sequence broken at record {i} (seq {r.seq})")
        return cls(records)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def load(cls, path: str | Path) -> SessionTranscript:
        return cls.from_jsonl(Path(path).read_text())


def maybe_announce(transcript: SessionTranscript | None, sender: str, kind: str, data: Any) -> None:
    if transcript is not None:
        transcript.announce(sender, kind, data)


class SeedStreams:
    """Independent named generators derived from one session seed.

    Each label gets its own ``SeedSequence`` child, so drawing more from one
    stream never shifts another.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._cache: dict[str, np.random.Generator] = {}

    def __getitem__(self, label: str) -> np.random.Generator:
        if label not in self._cache:
            ss = np.random.SeedSequence(self.seed, spawn_key=(zlib.crc32(label.encode()),))
            self._cache[label] = np.random.default_rng(ss)
        return self._cache[label]
