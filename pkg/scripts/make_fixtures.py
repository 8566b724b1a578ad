"""Regenerate the bundled demo fixture and its golden pipeline report.

The fixture is a fully synthetic LAND-style market written by the
``simulate`` subcommand: a coin quote with one planted explosive window,
BTC/ETH control quotes, and a transaction file whose week effects track
the coin with a one-week lag.  The golden report freezes the pipeline's
``report.json`` on this fixture so the determinism check has a committed
reference.

Usage:
    python3 scripts/make_fixtures.py [--weeks 60] [--seed 7] [--skip-golden]

Run from the repository root.  Regenerating after an intentional change
to the pipeline output format is expected; commit the refreshed files.
"""

import argparse
import pathlib
import shutil
import sys
import tempfile

from landmetrics.cli import main as cli_main

RUN_CFG = """\
# demo fixture: synthetic metaverse market, one planted explosive window
transactions = transactions.csv
prices = prices.csv
coin = VOX
market_symbols = BTC,ETH
seed = 11
n_rep = 200
"""


def build(repo_root: pathlib.Path, weeks: int, seed: int, golden: bool) -> int:
    fixture_dir = repo_root / "fixtures" / "demo"
    fixture_dir.mkdir(parents=True, exist_ok=True)
    code = cli_main(["simulate", "--kind", "market", "--weeks", str(weeks),
                     "--seed", str(seed), "--out-dir", str(fixture_dir)])
    if code != 0:
        return code
    (fixture_dir / "run.cfg").write_text(RUN_CFG)
    print(f"[fixtures] wrote {fixture_dir}/{{transactions,prices}}.csv, "
          f"truth.json, run.cfg")
    if not golden:
        return 0
    golden_path = repo_root / "tests" / "golden" / "pipeline_report.json"
    golden_path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        code = cli_main(["pipeline", "--config", str(fixture_dir / "run.cfg"),
                         "--out-dir", tmp])
        if code != 0:
            return code
        shutil.copyfile(pathlib.Path(tmp) / "report.json", golden_path)
    print(f"[fixtures] froze {golden_path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--weeks", type=int, default=60)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--skip-golden", action="store_true",
                        help="only rewrite the fixture files")
    args = parser.parse_args(argv)
    repo_root = pathlib.Path(__file__).resolve().parent.parent
    return build(repo_root, args.weeks, args.seed, golden=not args.skip_golden)


if __name__ == "__main__":
    sys.exit(main())
