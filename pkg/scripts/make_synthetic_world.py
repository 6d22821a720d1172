"""Write a synthetic grid world to disk in the CLI file formats.

    python scripts/make_synthetic_world.py --out-dir runs/world --seed 0
"""

import argparse
import json
from pathlib import Path

from navcompat.compat.features import save_features
from navcompat.navgraph import save_graph, write_jsonl
from navcompat.workbench.synthetic import SyntheticConfig, build_world


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="runs/world")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trajectories", type=int, default=200)
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    world = build_world(SyntheticConfig(n_trajectories=args.trajectories), args.seed)
    save_graph(world.graph, out / "graph.json")
    (out / "objects.json").write_text(json.dumps(world.env.to_dict(), indent=1), encoding="utf-8")
    write_jsonl((t.to_record() for t in world.trajectories), out / "trajectories.jsonl")
    save_features(world.features, out / "features.jsonl")
    print(f"wrote graph, objects, {len(world.trajectories)} trajectories and features to {out}")


if __name__ == "__main__":
    main()
