"""Runtime settings for exact mode.

These are plain module attributes so that test suites and the CLI can pin
them; every function that consults a cap reads the attribute at call time.
"""

import os

#: Largest number of outcomes a generator may build in exact mode.
exact_cap = 1 << 20

#: Groups up to this order get every nonempty window C in mass-stationarity
#: checks; larger groups fall back to singletons and intervals.
all_windows_max_order = 8


def threads():
    """Worker count for the Monte Carlo harness (``PALMLAB_THREADS``)."""
    try:
        return max(1, int(os.environ.get("PALMLAB_THREADS", "1")))
    except ValueError:
        return 1
