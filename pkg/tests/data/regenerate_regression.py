"""Rewrite pauli_n1_regression.json from the current build.

Run only when a change to the construction is intended; the acceptance
suite compares the stored hex floats bit for bit.
"""

import json
from pathlib import Path

from qgp.channels import pauli_reveal_channel
from qgp.coding import build_code, pauli_precorrection_state
from qgp.typicality import HaarSampler

SEED = 20240611
SIZES = (2, 1, 1)
FIELDS = ("epsilon_achieved", "eq6_distance", "eq7_distance", "victory_distance", "w_overlap", "v_overlap")


def build():
    return build_code(pauli_precorrection_state(), pauli_reveal_channel(), 1, SIZES, HaarSampler(SEED))


def main():
    art = build()
    record = {
        "seed": SEED,
        "sizes": list(SIZES),
        "n": 1,
        "values": {k: float.hex(getattr(art, k)) for k in FIELDS},
        "U_split_sha256": __import__("hashlib").sha256(art.U_split.matrix.tobytes()).hexdigest(),
    }
    path = Path(__file__).with_name("pauli_n1_regression.json")
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(path)


if __name__ == "__main__":
    main()
