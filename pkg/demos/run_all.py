"""Run every demo config through the ``lab`` CLI and summarize the verdicts.

Usage: python3 demos/run_all.py [--out DIR] [--threads N]
"""
import argparse
import sys
from pathlib import Path

from hslab import labcli

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(HERE / "out"))
    ap.add_argument("--threads", default="1")
    args = ap.parse_args()
    verdicts = {}
    for cfg in sorted((HERE / "configs").glob("*.json")):
        command = cfg.stem.split("_")[0]
        out = Path(args.out) / cfg.stem
        print(f"== {cfg.name}")
        verdicts[cfg.stem] = labcli.main([command, "--config", str(cfg), "--out", str(out),
                                          "--threads", args.threads])
    print()
    for name, code in verdicts.items():
        print(f"{name:20s} exit={code}")
    return max(verdicts.values())


if __name__ == "__main__":
    sys.exit(main())
