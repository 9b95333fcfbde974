"""Entry point of a workload process (``python -m guardfs.adversary.runner``)."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from guardfs.adversary.benign import BenignSpec
from guardfs.adversary.executors import RealRunner, program_for
from guardfs.adversary.ransomware import RansomSpec


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="guardfs-workload")
    ap.add_argument("--root", required=True)
    ap.add_argument("--stats")
    ap.add_argument("--pids")
    ap.add_argument("--program", required=True, help="JSON {kind, spec}")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    desc = json.loads(args.program)
    kind = desc["kind"]
    spec = RansomSpec.from_dict(desc["spec"]) if kind == "ransomware" else BenignSpec.from_dict(desc["spec"])
    return RealRunner(args.root, args.stats, args.pids).run(program_for(kind, spec))


if __name__ == "__main__":
    sys.exit(main())
