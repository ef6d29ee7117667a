"""Score the toy dialog dataset with the scripted judge and print correlations.

Runs every metric in ``data/toy_run.json``, correlates the resulting score
files with the human overall ratings, then runs the five-variant ablation.
No network access or API key is needed.

    python3 scripts/run_toy.py [--out out/toy]
"""

from __future__ import annotations

import argparse
from pathlib import Path

from aspectchain.cli import cmd_ablate, cmd_correlate, cmd_evaluate, load_run_config
from aspectchain.report import render_markdown

ROOT = Path(__file__).resolve().parents[1]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, default=ROOT / "data" / "toy_run.json")
    parser.add_argument("--out", type=Path, default=None)
    args = parser.parse_args()

    config = load_run_config(args.config)
    if args.out is not None:
        config.out = str(args.out)
    out = Path(config.out)
    cmd_evaluate(config)
    report = cmd_correlate(sorted(out.glob("*.scores.csv")), config.dataset, config.aspect, out, config.formats)
    print(render_markdown(report))

    config.out = str(out / "ablation")
    print(render_markdown(cmd_ablate(config).report))


if __name__ == "__main__":
    main()
