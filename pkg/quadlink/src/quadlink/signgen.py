from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from quadlink.errors import QuadlinkError
from quadlink.ingest import ReturnSeries
from quadlink.metrics import zero_positive_sign


class InvalidProbability(QuadlinkError, ValueError):
    pass


@dataclass(frozen=True)
class SignPath:
    dhat: np.ndarray
    correct: np.ndarray
    target_p: float
    seed: Optional[tuple] = None

    def __post_init__(self) -> None:
        _check_probability(self.target_p)
        dhat = np.array(self.dhat, dtype=np.int8, copy=True)
        correct = np.array(self.correct, dtype=np.int8, copy=True)
        if dhat.shape != correct.shape:
            raise ValueError("Signs and indicators must be aligned.")
        dhat.setflags(write=False)
        correct.setflags(write=False)
        object.__setattr__(self, "dhat", dhat)
        object.__setattr__(self, "correct", correct)

    def __len__(self) -> int:
        return len(self.dhat)

    @property
    def hit_rate(self) -> float:
        return float(np.mean(self.correct))


def _check_probability(p: float) -> None:
    if not 0.5 <= p <= 1:
        raise InvalidProbability(f"Probability {p} is outside [0.5, 1].")


def realized_sign(returns: ReturnSeries) -> np.ndarray:
    return zero_positive_sign(returns.returns)


def gen_sign_path(
    realized: np.ndarray, p: float, rng: np.random.Generator
) -> SignPath:
    """Keeps each realized sign with probability p and flips it otherwise.

    Exactly one uniform draw is consumed per date, and magnitudes are never
    looked at, so correctness is independent of them.
    """
    _check_probability(p)
    realized = np.asarray(realized)
    correct = rng.random(len(realized)) < p
    dhat = np.where(correct, realized, -realized)
    seed = getattr(getattr(rng, "bit_generator", None), "seed_seq", None)
    return SignPath(
        dhat=dhat,
        correct=correct,
        target_p=p,
        seed=_seed_record(seed),
    )


def _seed_record(seed_seq) -> Optional[tuple]:
    if seed_seq is None:
        return None
    return seed_seq.entropy, tuple(seed_seq.spawn_key)


def accuracy_grid(levels: int) -> List[float]:
    if levels < 2:
        raise ValueError(f"Need at least 2 levels, got {levels}.")
    return [float(p) for p in np.linspace(0.5, 1.0, levels)]
