"""Standard MIDI File reading and writing.

Only what a solo-piano corpus needs: note on/off, tempo, and enough of the
rest of the format to skip it safely.  Sustain pedal and other controllers
are ignored.
"""

from __future__ import annotations

import bisect
import struct
from collections import defaultdict, deque
from dataclasses import dataclass, field

from .errors import MidiParseError, ValidationError

DEFAULT_TPQ = 480
DEFAULT_TEMPO = 500_000  # microseconds per quarter note (120 bpm)

# data bytes following each channel-message status nibble
_DATA_LEN = {0x8: 2, 0x9: 2, 0xA: 2, 0xB: 2, 0xC: 1, 0xD: 1, 0xE: 2}


@dataclass(frozen=True)
class Note:
    pitch: int
    velocity: int
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class TempoEvent:
    tick: int
    microseconds_per_quarter: int


@dataclass
class NoteSequence:
    notes: list[Note] = field(default_factory=list)
    ticks_per_quarter: int = DEFAULT_TPQ
    tempo_events: list[TempoEvent] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list, compare=False)

    def __post_init__(self):
        self.notes.sort(key=lambda n: (n.start, n.pitch, n.end))

    def __len__(self) -> int:
        return len(self.notes)

    @property
    def total_seconds(self) -> float:
        return max((n.end for n in self.notes), default=0.0)

    def validate(self) -> None:
        for n in self.notes:
            if not 0 <= n.pitch <= 127:
                raise ValidationError(f"pitch {n.pitch} out of range 0..127")
            if not 1 <= n.velocity <= 127:
                raise ValidationError(f"velocity {n.velocity} out of range 1..127")
            if n.start < 0 or not n.end > n.start:
                raise ValidationError(f"bad note timing start={n.start} end={n.end}")


class _Reader:
    def __init__(self, data: bytes, pos: int = 0, end: int | None = None):
        self.data = data
        self.pos = pos
        self.end = len(data) if end is None else end

    def need(self, count: int, what: str) -> None:
        if self.pos + count > self.end:
            raise MidiParseError(f"truncated {what}", self.pos)

    def byte(self, what: str = "event") -> int:
        self.need(1, what)
        b = self.data[self.pos]
        self.pos += 1
        return b

    def take(self, count: int, what: str) -> bytes:
        self.need(count, what)
        out = self.data[self.pos : self.pos + count]
        self.pos += count
        return out

    def varlen(self) -> int:
        value = 0
        for _ in range(4):
            b = self.byte("variable-length quantity")
            value = (value << 7) | (b & 0x7F)
            if not b & 0x80:
                return value
        raise MidiParseError("variable-length quantity longer than 4 bytes", self.pos)


class _TempoMap:
    """Tick to seconds conversion from a sorted list of tempo changes."""

    def __init__(self, tempos: list[TempoEvent], tpq: int, seconds_per_tick: float | None = None):
        self.fixed = seconds_per_tick
        self.tpq = tpq
        changes = sorted(tempos, key=lambda t: t.tick)
        if not changes or changes[0].tick != 0:
            changes.insert(0, TempoEvent(0, DEFAULT_TEMPO))
        self.ticks = [t.tick for t in changes]
        self.mpq = [t.microseconds_per_quarter for t in changes]
        self.offsets = [0.0]
        for k in range(1, len(changes)):
            span = self.ticks[k] - self.ticks[k - 1]
            self.offsets.append(self.offsets[-1] + span * self.mpq[k - 1] / 1e6 / tpq)

    def seconds(self, tick: int) -> float:
        if self.fixed is not None:
            return tick * self.fixed
        k = bisect.bisect_right(self.ticks, tick) - 1
        return self.offsets[k] + (tick - self.ticks[k]) * self.mpq[k] / 1e6 / self.tpq


def _read_track(r: _Reader, track: int, events: list, tempos: list[TempoEvent]) -> int:
    tick = 0
    status = None
    order = 0
    while r.pos < r.end:
        tick += r.varlen()
        first = r.byte()
        if first == 0xFF:
            kind = r.byte("meta event")
            length = r.varlen()
            payload = r.take(length, "meta event")
            if kind == 0x51:
                if length != 3:
                    raise MidiParseError("tempo meta event must have 3 data bytes", r.pos - length)
                tempos.append(TempoEvent(tick, int.from_bytes(payload, "big")))
            elif kind == 0x2F:
                break
            continue
        if first in (0xF0, 0xF7):
            r.take(r.varlen(), "sysex event")
            continue
        if first & 0x80:
            if first >= 0xF0:
                raise MidiParseError(f"unsupported status byte 0x{first:02X} in track", r.pos - 1)
            status = first
            data = r.take(_DATA_LEN[status >> 4], "channel message")
        else:
            if status is None:
                raise MidiParseError("running status with no previous status byte", r.pos - 1)
            rest = _DATA_LEN[status >> 4] - 1
            data = bytes([first]) + r.take(rest, "channel message")
        kind, channel = status >> 4, status & 0x0F
        if kind == 0x9 and data[1] > 0:
            events.append((tick, track, order, "on", channel, data[0], data[1]))
        elif kind == 0x8 or kind == 0x9:
            events.append((tick, track, order, "off", channel, data[0], 0))
        order += 1
    return tick


def parse_midi(data: bytes) -> NoteSequence:
    """Decode a format 0/1 Standard MIDI File into notes with times in seconds.

    Note-ons are matched to note-offs first-in first-out per (channel, pitch);
    a note-on with velocity 0 is a note-off.  All tracks are merged into one
    stream, and notes sharing a pitch across channels are then re-paired in
    onset order so the merged stream has one consistent voice per pitch.
    """
    data = bytes(data)
    if data[:4] != b"MThd":
        raise MidiParseError("missing MThd header", 0)
    r = _Reader(data, 4)
    header_len = struct.unpack(">I", r.take(4, "header length"))[0]
    if header_len < 6:
        raise MidiParseError("header chunk shorter than 6 bytes", 4)
    fmt, ntracks, division = struct.unpack(">HHH", r.take(6, "header chunk"))
    r.take(header_len - 6, "header chunk")
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported SMF format {fmt}", 8)

    seconds_per_tick = None
    tpq = division
    if division & 0x8000:
        fps = 256 - (division >> 8)
        seconds_per_tick = 1.0 / (fps * (division & 0xFF))
        tpq = DEFAULT_TPQ

    events: list = []
    tempos: list[TempoEvent] = []
    last_tick = 0
    track = 0
    while r.pos < len(data) and track < ntracks:
        chunk_start = r.pos
        kind = r.take(4, "chunk header")
        length = struct.unpack(">I", r.take(4, "chunk length"))[0]
        if r.pos + length > len(data):
            raise MidiParseError(f"chunk {kind!r} declares {length} bytes past end of file", chunk_start)
        if kind == b"MTrk":
            last_tick = max(last_tick, _read_track(_Reader(data, r.pos, r.pos + length), track, events, tempos))
            track += 1
        r.pos += length

    tmap = _TempoMap(tempos, tpq, seconds_per_tick)
    events.sort(key=lambda e: (e[0], e[1], e[2]))
    warnings: list[str] = []
    open_notes: dict[tuple[int, int], deque] = defaultdict(deque)
    pairs: list[tuple[int, int, int, int]] = []  # pitch, velocity, on tick, off tick
    for tick, _, _, kind, channel, pitch, velocity in events:
        key = (channel, pitch)
        if kind == "on":
            open_notes[key].append((tick, velocity))
        elif open_notes[key]:
            on_tick, vel = open_notes[key].popleft()
            pairs.append((pitch, vel, on_tick, tick))
    dangling = sum(len(q) for q in open_notes.values())
    if dangling:
        warnings.append(f"{dangling} note-on(s) without note-off closed at final tick {last_tick}")
        for (_, pitch), q in open_notes.items():
            for on_tick, vel in q:
                pairs.append((pitch, vel, on_tick, last_tick))

    notes = []
    by_pitch: dict[int, list] = defaultdict(list)
    for pitch, vel, on, off in pairs:
        if off <= on:
            warnings.append(f"dropped zero-length note pitch {pitch} at tick {on}")
            continue
        by_pitch[pitch].append((on, off, vel))
    for pitch, group in by_pitch.items():
        onsets = sorted((on, vel) for on, _, vel in group)
        offsets = sorted(off for _, off, _ in group)
        for (on, vel), off in zip(onsets, offsets):
            notes.append(Note(pitch, vel, tmap.seconds(on), tmap.seconds(off)))
    return NoteSequence(notes, tpq, sorted(tempos, key=lambda t: t.tick), warnings)


def read_midi_file(path) -> NoteSequence:
    with open(path, "rb") as fh:
        return parse_midi(fh.read())


def _varlen(value: int) -> bytes:
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


def write_midi(ns: NoteSequence) -> bytes:
    """Encode as a format-0 file at 480 ticks/quarter and a single 120 bpm tempo."""
    ns.validate()
    ticks_per_second = DEFAULT_TPQ * 1e6 / DEFAULT_TEMPO
    timeline = []
    for n in ns.notes:
        on = round(n.start * ticks_per_second)
        off = max(round(n.end * ticks_per_second), on + 1)
        timeline.append((off, 0, n.pitch, 0x80, 64))
        timeline.append((on, 1, n.pitch, 0x90, n.velocity))
    # note-offs sort before note-ons on the same tick
    timeline.sort()

    body = bytearray(b"\x00\xff\x51\x03" + DEFAULT_TEMPO.to_bytes(3, "big"))
    now = 0
    for tick, _, pitch, status, velocity in timeline:
        body += _varlen(tick - now) + bytes([status, pitch, velocity])
        now = tick
    body += b"\x00\xff\x2f\x00"
    header = b"MThd" + struct.pack(">IHHH", 6, 0, 1, DEFAULT_TPQ)
    return header + b"MTrk" + struct.pack(">I", len(body)) + bytes(body)


def write_midi_file(ns: NoteSequence, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write_midi(ns))
