"""
Configuration schema and sample configurations.
Run this script to (re)generate configs/ from the definitions below.

Usage:
    python schema.py          # write configs/run_config.schema.json and the samples
    python schema.py schema   # schema only
"""

import json
from pathlib import Path

from models.config import RunConfig

CONFIG_DIR = Path(__file__).parent / "configs"

BERNOULLI = {"kind": "bernoulli_gap", "best_mean": 0.3, "other_mean": 0.5}

SAMPLE_CONFIGS = {
    "cor1_bernoulli": {
        "algo": "dada", "adversary": BERNOULLI, "delays": {"kind": "constant", "d": 25},
        "K": 10, "T": 5000, "seeds": {"count": 50, "base": 0}, "checkpoints": [1250, 5000],
    },
    "cor2_high_prob": {
        "algo": "dada-hp", "adversary": BERNOULLI, "delays": {"kind": "constant", "d": 10},
        "K": 5, "T": 2000, "seeds": {"count": 200, "base": 0}, "delta": 0.05,
    },
    "skip_one_huge": {
        "algo": "dada-skip", "adversary": BERNOULLI, "delays": {"kind": "one_huge"},
        "K": 10, "T": 5000, "seeds": {"count": 50, "base": 0},
    },
    "deda_scaled": {
        "algo": "deda-known", "adversary": {"kind": "scaled", "base": BERNOULLI, "B": 0.01},
        "delays": {"kind": "constant", "d": 20}, "K": 10, "T": 5000, "seeds": {"count": 50, "base": 0},
    },
    "deda_oracle_small": {
        "algo": "deda-bound", "adversary": {"kind": "switching", "period": 25},
        "delays": {"kind": "uniform", "dmax": 20}, "d_bound": 20, "K": 4, "T": 150,
        "seeds": {"count": 5, "base": 0},
    },
}


def write_schema() -> Path:
    CONFIG_DIR.mkdir(exist_ok=True)
    path = CONFIG_DIR / "run_config.schema.json"
    path.write_text(json.dumps(RunConfig.model_json_schema(by_alias=True), indent=2))
    print(f"✓ schema written to {path}")
    return path


def write_samples() -> None:
    CONFIG_DIR.mkdir(exist_ok=True)
    for name, data in SAMPLE_CONFIGS.items():
        RunConfig.model_validate(data)
        path = CONFIG_DIR / f"{name}.json"
        path.write_text(json.dumps(data, indent=2) + "\n")
        print(f"✓ {path}")


if __name__ == "__main__":
    import sys

    write_schema()
    if not (len(sys.argv) > 1 and sys.argv[1] == "schema"):
        write_samples()
