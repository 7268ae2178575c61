"""Export Bach chorales from the music21 corpus as Standard MIDI Files.

The chorales are public domain.  music21 is only needed to run this script;
the package itself does not depend on it.

    python scripts/export_chorales.py data/corpus --count 60
"""

import argparse
from pathlib import Path

from music21 import corpus


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--count", type=int, default=60)
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)

    written = 0
    for path in sorted(corpus.getComposer("bach"), key=str):
        if written >= args.count:
            break
        if path.suffix != ".mxl":
            continue
        score = corpus.parse(path)
        target = args.out_dir / (path.stem.replace(".", "_") + ".mid")
        score.write("midi", fp=str(target))
        written += 1
        print(target)


if __name__ == "__main__":
    main()
