import json
from pathlib import Path

import pytest

from longmusic.attention import dense_macs, sliding_window_macs
from longmusic.bench import bench_attention, loglog_slope
from longmusic.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from longmusic.config import ConfigError, load_run_config, parse_config_text
from longmusic.errors import PreconditionError
from longmusic.events import read_token_file
from longmusic.midi import Note, NoteSequence, write_midi_file

REPO = Path(__file__).resolve().parents[1]


# -- bench --------------------------------------------------------------------

def test_dense_mac_count_from_shapes():
    assert dense_macs(1024, 64, 1) == 1024 * 1024 * 64 * 2


def test_windowed_macs_linear():
    for n in (512, 1024, 2048):
        ratio = sliding_window_macs(2 * n, 64, 64) / sliding_window_macs(n, 64, 64)
        assert abs(ratio - 2) <= 0.1
    lengths = [256, 512, 1024, 2048, 4096]
    assert loglog_slope(lengths, [dense_macs(n, 64) for n in lengths]) == pytest.approx(2.0)
    assert abs(loglog_slope(lengths, [sliding_window_macs(n, 64, 64) for n in lengths]) - 1) <= 0.05


def test_loglog_slope_exact_power():
    assert loglog_slope([1, 2, 4, 8], [3, 24, 192, 1536]) == pytest.approx(3.0)


def test_bench_report_structure():
    rep = bench_attention([64, 128], window=16, head_dim=8, trials=5, min_ms=0.05)
    assert len(rep.rows) == 4
    for r in rep.rows:
        assert r.macs == r.macs_analytic and r.trials >= 5 and r.forward_ms > 0
    assert set(rep.speedup) == {64, 128}
    kinds = [json.loads(line)["record"] for line in rep.to_jsonl().splitlines()]
    assert kinds.count("timing") == 4 and kinds.count("slope") == 2
    assert "kernel-level" in rep.table()


def test_bench_rejects_unaligned_lengths():
    with pytest.raises(PreconditionError):
        bench_attention([100], window=64)


# -- config -------------------------------------------------------------------

def test_config_parsing(tmp_path):
    text = "# comment\n[model]\nmodel = transformer\nattention = sliding_window\nattention_window = 32\n" \
           "d_model = 32\nlr = 3e-4\nuse_xavier_init = true\ntrain_data = tok\nwindow = 65\nmax_len = 64\n"
    (tmp_path / "a.cfg").write_text(text)
    rc = load_run_config(tmp_path / "a.cfg")
    assert rc.train.model.attention_mode == "sliding_window" and rc.train.model.attention_window == 32
    assert rc.train.lr == 3e-4 and rc.train.use_xavier_init is True
    assert rc.train_data == tmp_path / "tok"
    assert rc.window == 65 and rc.stride == 65


def test_config_seed_override(tmp_path, monkeypatch):
    (tmp_path / "a.cfg").write_text("model = lstm\nseed = 1\n")
    monkeypatch.setenv("LONGMUSIC_SEED", "42")
    assert load_run_config(tmp_path / "a.cfg").train.seed == 42


def test_config_errors():
    with pytest.raises(ConfigError):
        parse_config_text("bogus_key = 1\n")
    with pytest.raises(ConfigError):
        parse_config_text("no equals sign\n")


def test_grid_configs_cover_twelve_cells():
    files = sorted((REPO / "configs" / "grid").glob("*.cfg"))
    assert len(files) == 12
    cells = set()
    for f in files:
        rc = load_run_config(f)
        kind = rc.train.model.attention_mode if rc.train.model.kind == "transformer" else "lstm"
        cells.add((kind, rc.train.use_xavier_init, rc.train.use_early_stopping))
    assert len(cells) == 12
    assert {c[0] for c in cells} == {"relative", "sliding_window", "lstm"}


# -- cli ----------------------------------------------------------------------

@pytest.fixture
def midi_dir(tmp_path):
    d = tmp_path / "midi"
    d.mkdir()
    for k in range(3):
        notes = [Note(60 + (i * 5 + k) % 24, 70, i * 0.25, i * 0.25 + 0.3) for i in range(40)]
        write_midi_file(NoteSequence(notes), d / f"piece{k}.mid")
    return d


def test_cli_pipeline(tmp_path, midi_dir, capsys):
    tok = tmp_path / "tok"
    assert main(["preprocess", str(midi_dir), str(tok), "--workers", "2"]) == EXIT_OK
    assert sorted(p.name for p in tok.iterdir()) == ["piece0.bbtk", "piece1.bbtk", "piece2.bbtk"]
    serial = tmp_path / "tok1"
    assert main(["preprocess", str(midi_dir), str(serial)]) == EXIT_OK
    for p in tok.iterdir():
        assert (serial / p.name).read_bytes() == p.read_bytes()

    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "model = transformer\nattention = relative\nd_model = 16\nnum_layers = 1\nnum_heads = 2\n"
        "ff_dim = 32\nmax_len = 32\nbatch_size = 2\nmax_steps = 4\neval_interval = 2\n"
        "train_data = tok\nval_fraction = 0.34\nwindow = 33\noutput_dir = out\n"
    )
    assert main(["train", "--config", str(cfg)]) == EXIT_OK
    out = tmp_path / "out"
    assert (out / "model.ckpt").exists()
    assert len((out / "train.jsonl").read_text().splitlines()) == 4

    capsys.readouterr()
    assert main(["eval", str(out / "model.ckpt"), str(tok)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["nll"] > 0

    assert main(["generate", str(out / "model.ckpt"), "-o", str(tmp_path / "g.mid"), "--length", "20"]) == EXIT_OK
    assert (tmp_path / "g.mid").read_bytes()[:4] == b"MThd"
    assert len(read_token_file(tmp_path / "g.bbtk")) == 20


def test_cli_bench_json(tmp_path, capsys):
    dest = tmp_path / "bench.jsonl"
    rc = main(["bench", "--lengths", "64,128", "--window", "16", "--head-dim", "8", "--json", str(dest)])
    assert rc == EXIT_OK
    assert "log-log slope" in capsys.readouterr().out
    assert all(json.loads(line)["record"] for line in dest.read_text().splitlines())


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["bogus"],
        ["bench", "--no-such-flag"],
        ["bench", "--lengths", "a,b"],
        ["train", "--config", "/does/not/exist.cfg"],
        ["eval", "/does/not/exist.ckpt", "x"],
    ],
)
def test_cli_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_cli_data_errors(tmp_path):
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "x.mid").write_bytes(b"not midi at all")
    assert main(["preprocess", str(bad), str(tmp_path / "o")]) == EXIT_DATA
    (tmp_path / "fake.ckpt").write_bytes(b"nope")
    assert main(["eval", str(tmp_path / "fake.ckpt"), str(bad / "x.mid")]) == EXIT_DATA
    cfg = tmp_path / "c.cfg"
    cfg.write_text("unknown = 3\n")
    assert main(["train", "--config", str(cfg)]) == EXIT_DATA
    assert main(["bench", "--lengths", "100", "--window", "64"]) == EXIT_DATA


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "longmusic", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "preprocess" in proc.stdout
