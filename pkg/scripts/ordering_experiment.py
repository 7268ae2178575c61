"""Train the three model families on the chorale corpus and compare validation NLL.

Each family gets the same wall-clock budget, data split, window length and
optimiser settings.  Results go to ``results/ordering.json``.

    python scripts/ordering_experiment.py --minutes 10
"""

from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

from threadpoolctl import threadpool_limits

from longmusic.events import encode_events, window_dataset
from longmusic.midi import read_midi_file
from longmusic.model import LstmConfig, ModelConfig
from longmusic.training import TrainConfig, evaluate_nll, train

ROOT = Path(__file__).resolve().parents[1]


def families(max_len: int) -> dict:
    common = dict(d_model=64, num_layers=2, num_heads=4, ff_dim=256, max_len=max_len, dropout_p=0.1)
    return {
        "relative": ModelConfig(attention_mode="relative", **common),
        "sliding_window": ModelConfig(attention_mode="sliding_window", attention_window=64, **common),
        "lstm": LstmConfig(embed_dim=64, hidden_dim=128, num_layers=2, dropout_p=0.1, max_len=max_len),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--corpus", default=ROOT / "data" / "corpus", type=Path)
    ap.add_argument("--minutes", type=float, default=10.0, help="training budget per family")
    ap.add_argument("--window", type=int, default=257)
    ap.add_argument("--val-files", type=int, default=10)
    ap.add_argument("--out", default=ROOT / "results" / "ordering.json", type=Path)
    args = ap.parse_args()

    files = sorted(args.corpus.glob("*.mid"))
    seqs = [encode_events(read_midi_file(p)) for p in files]
    train_seqs, val_seqs = seqs[: -args.val_files], seqs[-args.val_files :]
    train_w = window_dataset(train_seqs, args.window)
    val_w = window_dataset(val_seqs, args.window)
    minutes_of_music = sum(read_midi_file(p).total_seconds for p in files) / 60

    results = {
        "corpus_files": len(files),
        "corpus_minutes": round(minutes_of_music, 1),
        "train_windows": len(train_w),
        "val_windows": len(val_w),
        "window": args.window,
        "budget_minutes": args.minutes,
        "models": {},
    }
    for name, mcfg in families(args.window - 1).items():
        cfg = TrainConfig(
            mcfg, lr=1e-3, batch_size=8, max_steps=100_000, use_xavier_init=True,
            use_early_stopping=True, early_stop_patience=10, eval_interval=50, seed=0,
        )
        t0 = time.perf_counter()
        with threadpool_limits(limits=1):
            model, rep = train(cfg, train_w, val_w, time_budget_s=args.minutes * 60)
            val = evaluate_nll(model, val_w)
        results["models"][name] = {
            "val_nll": val,
            "final_train_nll": rep.train_nll[-1],
            "steps": rep.steps,
            "stop_reason": rep.stop_reason,
            "minutes": round((time.perf_counter() - t0) / 60, 2),
            "parameters": model.num_parameters(),
        }
        print(name, json.dumps(results["models"][name]), flush=True)

    nll = {k: v["val_nll"] for k, v in results["models"].items()}
    results["ordering_holds"] = nll["relative"] <= nll["sliding_window"] <= nll["lstm"]
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(results, indent=2) + "\n")
    print("ordering relative <= sliding_window <= lstm:", results["ordering_holds"])


if __name__ == "__main__":
    main()
