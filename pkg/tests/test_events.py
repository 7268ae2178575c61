from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from longmusic.errors import VocabularyError
from longmusic.events import (
    VOCAB,
    decode_events,
    dump_tokens,
    encode_events,
    load_tokens,
    read_token_file,
    window_dataset,
    write_token_file,
)
from longmusic.midi import Note, NoteSequence

ON, OFF, SHIFT, VEL = 0, 128, 256, 356
PAD, BOS = 388, 389


def test_layout():
    assert VOCAB.size == 390
    assert (VOCAB.note_on(0), VOCAB.note_off(0), VOCAB.time_shift(1), VOCAB.velocity(0)) == (ON, OFF, SHIFT, VEL)
    assert (VOCAB.pad, VOCAB.bos) == (PAD, BOS)


def test_id_event_bijection():
    seen = set()
    for t in range(VOCAB.size):
        kind, value = VOCAB.decode_token(t)
        assert VOCAB.encode_token(kind, value) == t
        seen.add((kind, value))
    assert len(seen) == VOCAB.size
    with pytest.raises(VocabularyError):
        VOCAB.decode_token(390)


def test_empty_sequence():
    assert encode_events(NoteSequence()).tolist() == [BOS]
    assert len(decode_events([BOS])) == 0


def test_single_note_hand_trace():
    tokens = encode_events(NoteSequence([Note(60, 64, 0.0, 0.5)]))
    assert tokens.tolist() == [BOS, VEL + 64 * 32 // 128, ON + 60, SHIFT + 50 - 1, OFF + 60]


def test_long_gap_greedy_shifts():
    ns = NoteSequence([Note(60, 64, 0.0, 0.1), Note(62, 64, 1.83, 1.93)])
    tokens = encode_events(ns).tolist()
    i = tokens.index(OFF + 60)
    assert tokens[i + 1 : i + 3] == [VOCAB.time_shift(100), VOCAB.time_shift(73)]


def test_velocity_only_on_bin_change():
    ns = NoteSequence([Note(60, 64, 0.0, 0.1), Note(62, 65, 0.2, 0.3), Note(64, 100, 0.4, 0.5)])
    tokens = encode_events(ns)
    vel = [t for t in tokens if VEL <= t < PAD]
    assert vel == [VEL + 16, VEL + 25]


def test_stray_note_off():
    ns = decode_events([BOS, OFF + 60])
    assert len(ns) == 0
    assert len(ns.warnings) == 1


def test_dangling_note_on_closed():
    ns = decode_events([BOS, ON + 60, SHIFT + 9])
    assert len(ns) == 1 and ns.notes[0].end == pytest.approx(0.1)


def test_invalid_token():
    with pytest.raises(VocabularyError):
        decode_events([BOS, 400])


def test_deterministic():
    ns = NoteSequence([Note(p, 40 + p % 50, p * 0.037, p * 0.037 + 0.4) for p in range(30, 90)])
    assert encode_events(ns).tobytes() == encode_events(ns).tobytes()


@settings(max_examples=80, deadline=None)
@given(
    st.lists(
        st.tuples(st.integers(0, 127), st.integers(1, 127), st.floats(0, 30), st.floats(0.005, 4)),
        max_size=40,
    )
)
def test_round_trip_timing(raw):
    # one sounding voice per pitch, as in a parsed file
    by_pitch = {}
    for p, v, s, d in sorted(raw, key=lambda r: r[2]):
        if p not in by_pitch or by_pitch[p][-1].end + 0.02 < s:
            by_pitch.setdefault(p, []).append(Note(p, v, s, s + d))
    ns = NoteSequence([n for g in by_pitch.values() for n in g])
    back = decode_events(encode_events(ns))
    assert len(back) == len(ns)
    key = lambda n: (n.pitch, n.start)  # noqa: E731
    for a, b in zip(sorted(ns.notes, key=key), sorted(back.notes, key=key)):
        assert a.pitch == b.pitch
        assert abs(a.start - b.start) <= 0.005 + 1e-9
        assert abs(a.duration - b.duration) <= 0.01 + 1e-9
        assert VOCAB.velocity_bin(a.velocity) == VOCAB.velocity_bin(b.velocity)


def test_window_dataset_examples():
    seq = np.arange(2048) % 388
    assert len(window_dataset([seq], 1024, 1024)) == 2
    (w,) = window_dataset([np.arange(1000) % 388], 1024)
    assert len(w) == 1024 and (w[1000:] == PAD).all() and (w[:1000] != PAD).all()


@pytest.mark.parametrize("length", [2, 7, 64, 1024])
def test_window_partition_conserves_tokens(length):
    rng = np.random.default_rng(length)
    seqs = [rng.integers(0, 388, n) for n in (1, 5, 63, 64, 65, 300)]
    windows = window_dataset(seqs, length)
    assert sum(int((w != PAD).sum()) for w in windows) == sum(len(s) for s in seqs)
    assert all(len(w) == length for w in windows)


def test_window_overlap_with_stride():
    windows = window_dataset([np.arange(10)], 4, stride=2)
    assert [w.tolist() for w in windows] == [[0, 1, 2, 3], [2, 3, 4, 5], [4, 5, 6, 7], [6, 7, 8, 9]]


def test_token_file_round_trip(tmp_path: Path):
    tokens = np.array([BOS, VEL + 3, ON + 60, SHIFT, OFF + 60, PAD])
    data = dump_tokens(tokens)
    assert data[:4] == b"BBTK" and data[4:8] == b"\x01\x00\x86\x01" and len(data) == 8 + 2 * len(tokens)
    assert load_tokens(data)[0].tolist() == tokens.tolist()
    write_token_file(tmp_path / "a.bbtk", tokens)
    assert read_token_file(tmp_path / "a.bbtk").tolist() == tokens.tolist()


def test_token_file_rejects_garbage():
    with pytest.raises(ValueError):
        load_tokens(b"MThd\x00\x00\x00\x06")
    with pytest.raises(VocabularyError):
        dump_tokens([390])
