import json
import random
from typing import Sequence


def largest_remainder(total: int, weights: Sequence[int]) -> list[int]:
    """Hamilton apportionment of ``total`` items over integer ``weights``.

    Leftover seats go to the largest fractional remainders; ties favour the
    earlier weight.
    """
    if total < 0:
        raise ValueError("total must be non-negative")
    if not weights or any(w <= 0 for w in weights):
        raise ValueError("weights must be positive")
    denom = sum(weights)
    floors = [total * w // denom for w in weights]
    # remainders compared as exact integers (total*w mod denom)
    rems = [total * w % denom for w in weights]
    left = total - sum(floors)
    order = sorted(range(len(weights)), key=lambda i: (-rems[i], i))
    for i in order[:left]:
        floors[i] += 1
    return floors


def stream_rng(seed: int, stream: str) -> random.Random:
    """Independent named PRNG stream derived from one run seed."""
    return random.Random(f"{stream}:{seed}")


def dumps_line(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=False) + "\n"
