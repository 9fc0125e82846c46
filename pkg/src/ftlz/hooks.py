"""Fault-injection hook points.

The pipeline calls fire() at contractual stage boundaries; with nothing armed
that is a dict lookup and the pipeline behaves exactly as if the calls were
absent. The fault harness (and tests) arm callables here to corrupt specific
intermediates. Hooks armed with once=True disarm themselves after firing,
modeling a memory error as a single event that re-execution does not replay.
"""

from __future__ import annotations

from contextlib import contextmanager

STAGE_INPUT_AFTER_CHECKSUM = "input_after_checksum"
STAGE_COEFFS_FITTED = "coeffs_fitted"
STAGE_ESTIMATES = "estimates"
STAGE_BINS_FINALIZED = "bins_finalized"
STAGE_DECOMP_BEFORE_VERIFY = "decomp_before_verify"
STAGE_DUP_EVAL = "dup_eval"

_armed: dict[str, tuple] = {}


def arm(stage: str, fn, once: bool = False) -> None:
    _armed[stage] = (fn, once)


def disarm(stage: str) -> None:
    _armed.pop(stage, None)


def disarm_all() -> None:
    _armed.clear()


def is_armed(stage: str) -> bool:
    return stage in _armed


def fire(stage: str, *args):
    """Invoke the armed callable for `stage`, if any.

    Value-style hooks (STAGE_DUP_EVAL) must return the replacement for the
    last argument; with nothing armed the last argument comes back unchanged.
    Mutation-style hooks modify their arguments in place.
    """
    entry = _armed.get(stage)
    if entry is None:
        return args[-1] if args else None
    fn, once = entry
    if once:
        disarm(stage)
    return fn(*args)


@contextmanager
def armed(stage: str, fn, once: bool = False):
    arm(stage, fn, once)
    try:
        yield
    finally:
        disarm(stage)
