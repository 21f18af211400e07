"""End-to-end demo through the command line on a small synthetic market.

Writes everything under the given directory (default ./demo_out).
"""

import sys
from pathlib import Path

from listingdedup.cli import main

CONFIG = """
[generator]
weeks = 16
entries_per_week = 40.0
burn_in_weeks = 10

[dedup]
min_units_per_city = 10
"""


def step(*argv):
    print("$ listingdedup", " ".join(argv), flush=True)
    code = main(list(argv))
    if code:
        sys.exit(code)


if __name__ == "__main__":
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
    out.mkdir(parents=True, exist_ok=True)
    cfg = out / "run.toml"
    cfg.write_text(CONFIG)
    c = ["--config", str(cfg)]
    step(*c, "synth", "--seed", "1", "--out", str(out / "data"))
    step(*c, "train", "--data", str(out / "data"), "--out", str(out / "model.json"))
    step(*c, "dedup", "--snapshots", str(out / "data" / "snapshots"), "--model", str(out / "model.json"),
         "--out", str(out / "dedup"))
    step("evaluate", "--truth", str(out / "data" / "truth.csv"), "--pred", str(out / "dedup" / "assignments.csv"))
    units, clicks = str(out / "dedup" / "units.jsonl"), str(out / "dedup" / "clicks.csv")
    step("indicators", "--units", units, "--clicks", clicks, "--out", str(out / "indicators"), "--min-units", "5")
    step("validate", "--units", units, "--clicks", clicks, "--external", str(out / "data" / "external.csv"))
