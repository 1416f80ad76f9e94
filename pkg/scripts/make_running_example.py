#!/usr/bin/env python3
"""Regenerate the committed running-example fixture under fixtures/.

The bundle is the 8-point two-cluster setup: six training points, three
LFs (one wrong weak label on each side), and two labeled holdout points.
Intended proxy configuration: K=3, euclidean, uniform.
"""

from pathlib import Path

from weshap.data import ProxyConfig, save_bundle
from weshap.evaluate import running_example


def main() -> None:
    out = Path(__file__).resolve().parent.parent / "fixtures" / "running_example"
    manifest = save_bundle(running_example(), out, name="running-example", config=ProxyConfig(k=3))
    print(f"fixture written to {manifest}")


if __name__ == "__main__":
    main()
