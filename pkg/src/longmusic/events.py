"""Performance-event vocabulary, encoder/decoder, windowing and token files.

Token id layout (390 ids)::

    0   .. 127   NOTE_ON  pitch 0..127
    128 .. 255   NOTE_OFF pitch 0..127
    256 .. 355   TIME_SHIFT 10 ms .. 1000 ms (id 256 + k - 1 shifts k * 10 ms)
    356 .. 387   VELOCITY bin 0..31 (MIDI velocity // 4)
    388          PAD
    389          BOS
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import VocabularyError
from .midi import Note, NoteSequence


@dataclass(frozen=True)
class EventVocab:
    num_pitches: int = 128
    num_shifts: int = 100
    shift_ms: int = 10
    num_velocity_bins: int = 32

    @property
    def note_on_offset(self) -> int:
        return 0

    @property
    def note_off_offset(self) -> int:
        return self.num_pitches

    @property
    def shift_offset(self) -> int:
        return 2 * self.num_pitches

    @property
    def velocity_offset(self) -> int:
        return self.shift_offset + self.num_shifts

    @property
    def pad(self) -> int:
        return self.velocity_offset + self.num_velocity_bins

    @property
    def bos(self) -> int:
        return self.pad + 1

    @property
    def size(self) -> int:
        return self.bos + 1

    @property
    def steps_per_second(self) -> int:
        return 1000 // self.shift_ms

    # -- id <-> event ---------------------------------------------------
    def note_on(self, pitch: int) -> int:
        return self.note_on_offset + pitch

    def note_off(self, pitch: int) -> int:
        return self.note_off_offset + pitch

    def time_shift(self, steps: int) -> int:
        if not 1 <= steps <= self.num_shifts:
            raise VocabularyError(f"time shift of {steps} steps outside 1..{self.num_shifts}")
        return self.shift_offset + steps - 1

    def velocity(self, bin_: int) -> int:
        return self.velocity_offset + bin_

    def velocity_bin(self, velocity: int) -> int:
        return min(velocity * self.num_velocity_bins // 128, self.num_velocity_bins - 1)

    def bin_velocity(self, bin_: int) -> int:
        width = 128 // self.num_velocity_bins
        return min(max(bin_ * width + width // 2, 1), 127)

    def decode_token(self, token: int) -> tuple[str, int]:
        """``(kind, value)`` for a token id; kind is one of note_on/note_off/shift/velocity/pad/bos."""
        t = int(token)
        if t < 0 or t >= self.size:
            raise VocabularyError(f"token {t} outside vocabulary of size {self.size}")
        if t < self.note_off_offset:
            return "note_on", t
        if t < self.shift_offset:
            return "note_off", t - self.note_off_offset
        if t < self.velocity_offset:
            return "shift", t - self.shift_offset + 1
        if t < self.pad:
            return "velocity", t - self.velocity_offset
        return ("pad", 0) if t == self.pad else ("bos", 0)

    def encode_token(self, kind: str, value: int = 0) -> int:
        if kind == "note_on":
            return self.note_on(value)
        if kind == "note_off":
            return self.note_off(value)
        if kind == "shift":
            return self.time_shift(value)
        if kind == "velocity":
            return self.velocity(value)
        if kind == "pad":
            return self.pad
        if kind == "bos":
            return self.bos
        raise VocabularyError(f"unknown event kind {kind!r}")

    def fingerprint(self) -> str:
        layout = f"{self.num_pitches}:{self.num_shifts}:{self.shift_ms}:{self.num_velocity_bins}:pad,bos"
        return hashlib.sha256(layout.encode()).hexdigest()[:16]


VOCAB = EventVocab()


def encode_events(ns: NoteSequence, vocab: EventVocab = VOCAB) -> np.ndarray:
    """Serialise notes into a BOS-prefixed token stream.

    Times are quantised to the shift resolution; notes that would collapse to
    zero length are held for one step.  At equal times note-offs come before
    note-ons, and a VELOCITY token precedes a NOTE_ON only when the bin
    changes.
    """
    ns.validate()
    steps = vocab.steps_per_second
    timeline = []
    for n in ns.notes:
        on = round(n.start * steps)
        off = max(round(n.end * steps), on + 1)
        timeline.append((off, 0, n.pitch, 0))
        timeline.append((on, 1, n.pitch, n.velocity))
    timeline.sort()

    tokens = [vocab.bos]
    now = 0
    current_bin = None
    for step, is_on, pitch, velocity in timeline:
        gap = step - now
        while gap > 0:
            chunk = min(gap, vocab.num_shifts)
            tokens.append(vocab.time_shift(chunk))
            gap -= chunk
        now = step
        if is_on:
            b = vocab.velocity_bin(velocity)
            if b != current_bin:
                tokens.append(vocab.velocity(b))
                current_bin = b
            tokens.append(vocab.note_on(pitch))
        else:
            tokens.append(vocab.note_off(pitch))
    return np.asarray(tokens, dtype=np.int64)


def decode_events(tokens, vocab: EventVocab = VOCAB) -> NoteSequence:
    """Inverse of :func:`encode_events`.

    Dangling NOTE_ONs are closed at the final time (or one step later if that
    would leave them empty); NOTE_OFFs with nothing open are ignored and
    counted in ``warnings``.  PAD and BOS tokens carry no event.
    """
    step_s = vocab.shift_ms / 1000.0
    now = 0
    velocity = vocab.bin_velocity(vocab.num_velocity_bins // 2)
    open_notes: dict[int, list[tuple[int, int]]] = {}
    notes: list[Note] = []
    stray = 0
    for t in np.asarray(tokens).reshape(-1):
        kind, value = vocab.decode_token(t)
        if kind == "shift":
            now += value
        elif kind == "velocity":
            velocity = vocab.bin_velocity(value)
        elif kind == "note_on":
            open_notes.setdefault(value, []).append((now, velocity))
        elif kind == "note_off":
            stack = open_notes.get(value)
            if stack:
                start, vel = stack.pop(0)
                notes.append(Note(value, vel, start * step_s, max(now, start + 1) * step_s))
            else:
                stray += 1
    for pitch, stack in open_notes.items():
        for start, vel in stack:
            notes.append(Note(pitch, vel, start * step_s, max(now, start + 1) * step_s))
    warnings = [f"{stray} NOTE_OFF token(s) without a sounding note ignored"] if stray else []
    return NoteSequence(notes, warnings=warnings)


def window_dataset(seqs, length: int, stride: int | None = None, pad_id: int = VOCAB.pad) -> list[np.ndarray]:
    """Cut token sequences into windows of ``length``; the last window of each is PAD-filled."""
    if length < 2:
        raise ValueError("window length must be >= 2")
    stride = stride or length
    if stride < 1:
        raise ValueError("stride must be positive")
    windows = []
    for seq in seqs:
        seq = np.asarray(seq, dtype=np.int64)
        start = 0
        while start < len(seq):
            w = np.full(length, pad_id, dtype=np.int64)
            chunk = seq[start : start + length]
            w[: len(chunk)] = chunk
            windows.append(w)
            if start + length >= len(seq):
                break
            start += stride
    return windows


# -- token files: b"BBTK", u16 version, u16 vocab size, then u16 LE tokens ---

TOKEN_MAGIC = b"BBTK"
TOKEN_VERSION = 1


def dump_tokens(tokens, vocab_size: int = VOCAB.size) -> bytes:
    arr = np.asarray(tokens)
    if arr.size and (arr.min() < 0 or arr.max() >= min(vocab_size, 65536)):
        raise VocabularyError("token outside vocabulary; cannot store")
    return TOKEN_MAGIC + struct.pack("<HH", TOKEN_VERSION, vocab_size) + arr.astype("<u2").tobytes()


def load_tokens(data: bytes) -> tuple[np.ndarray, int]:
    """Returns ``(tokens, vocab_size)``."""
    if len(data) < 8 or data[:4] != TOKEN_MAGIC:
        raise ValueError("not a token file (bad magic)")
    version, vocab_size = struct.unpack("<HH", data[4:8])
    if version != TOKEN_VERSION:
        raise ValueError(f"unsupported token file version {version}")
    if (len(data) - 8) % 2:
        raise ValueError("token file payload has odd length")
    return np.frombuffer(data[8:], dtype="<u2").astype(np.int64), vocab_size


def write_token_file(path, tokens, vocab_size: int = VOCAB.size) -> None:
    Path(path).write_bytes(dump_tokens(tokens, vocab_size))


def read_token_file(path) -> np.ndarray:
    return load_tokens(Path(path).read_bytes())[0]
