"""Model-poisoning update crafting.

Two families:

* lie_update: shift the benign mean by z population standard deviations,
  staying inside the benign spread so robust rules keep the row.
* gamma-scaled crafting: malicious = benign_mean + gamma * perturbation, with
  gamma chosen (by a halving search) to maximize how far the deployed
  aggregation rule moves from the benign mean when m copies of the crafted
  row join the benign rows.

All crafting reads only the benign rows it is given; nothing here inspects
malicious clients' own data.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aggregation import AggregationRule, aggregate, fed_avg, update_stats

PERTURB_KINDS = ("std", "unit", "sign")

# relative slack when comparing a new deviation against the best seen
_SUCCESS_RTOL = 1e-6


@dataclass(frozen=True)
class GammaSearchResult:
    gamma: float
    deviation: float
    evaluations: int


@dataclass(frozen=True)
class AttackSpec:
    """What the malicious coalition does each round.

    kind "none" disables the attack. "lie" uses lie_update(z). "agropt" runs
    the gamma search against target_rule, or against the deployed rule when
    target_rule is None. start_round delays the attack; before it, malicious
    clients behave honestly.
    """
    kind: str = "none"            # "none" | "lie" | "agropt"
    z: float = 1.5
    perturb: str = "std"
    gamma_init: float = 10.0
    tau: float = 1e-5
    start_round: int = 0
    target_rule: AggregationRule | None = None

    def __post_init__(self):
        if self.kind not in ("none", "lie", "agropt"):
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.perturb not in PERTURB_KINDS:
            raise ValueError(f"unknown perturbation {self.perturb!r}")
        if self.gamma_init <= 0:
            raise ValueError("gamma_init must be positive")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.start_round < 0:
            raise ValueError("start_round must be non-negative")


def benign_mean(benign: np.ndarray) -> np.ndarray:
    """Mean of the benign rows, the attacker's reference direction."""
    return fed_avg(benign)


def perturbation_vector(kind: str, benign: np.ndarray) -> np.ndarray:
    """Direction the crafted update pushes along.

    "std": negative per-dimension population std of the benign rows.
    "unit": negative unit vector along the benign mean.
    "sign": negative sign pattern of the benign mean.
    """
    if kind == "std":
        return -update_stats(benign).std
    if kind == "unit":
        gb = fed_avg(benign)
        norm = float(np.linalg.norm(gb))
        if norm == 0.0:
            raise ValueError("benign mean is zero, unit perturbation undefined")
        return -gb / norm
    if kind == "sign":
        return -np.sign(fed_avg(benign))
    raise ValueError(f"unknown perturbation {kind!r}")


def craft_malicious(grad_benign: np.ndarray, grad_perturb: np.ndarray,
                    gamma: float) -> np.ndarray:
    """The poisoned update: benign mean plus gamma times the perturbation."""
    if grad_benign.shape != grad_perturb.shape:
        raise ValueError(
            f"perturbation shape {grad_perturb.shape} does not match "
            f"benign mean {grad_benign.shape}")
    return grad_benign + gamma * grad_perturb


def _deviation(benign: np.ndarray, gb: np.ndarray, gp: np.ndarray, m: int,
               gamma: float, rule: AggregationRule) -> float:
    mal = gb + gamma * gp
    rows = np.vstack([benign, np.tile(mal, (m, 1))]) if m else benign
    return float(np.linalg.norm(gb - aggregate(rule, rows)))


def agr_deviation(benign: np.ndarray, m: int, perturb: str, gamma: float,
                  rule: AggregationRule) -> float:
    """L2 distance between the benign mean and what the rule outputs once m
    copies of the crafted row are appended."""
    if m < 0:
        raise ValueError("m must be non-negative")
    benign = np.asarray(benign, dtype=float)
    gb = benign_mean(benign)
    gp = perturbation_vector(perturb, benign)
    return _deviation(benign, gb, gp, m, gamma, rule)


def gamma_search(benign: np.ndarray, m: int, perturb: str,
                 rule: AggregationRule, gamma_init: float = 10.0,
                 tau: float = 1e-5) -> GammaSearchResult:
    """Halving search for the gamma that maximizes agr_deviation.

    Start at gamma_init with step gamma_init / 2. Each iteration evaluates the
    deviation at the current gamma: if it is within a 1e-6 relative slack of
    the best seen, the gamma is recorded as successful and the search moves
    up, otherwise it moves down. The step halves every iteration and the
    search stops once it drops below tau, returning the largest successful
    gamma. Gamma stays within [0, 2 * gamma_init] throughout.
    """
    if gamma_init <= 0:
        raise ValueError("gamma_init must be positive")
    if tau <= 0:
        raise ValueError("tau must be positive")
    if m < 1:
        raise ValueError("need at least one malicious row to search over")
    benign = np.asarray(benign, dtype=float)
    gb = benign_mean(benign)
    gp = perturbation_vector(perturb, benign)
    gamma = gamma_init
    step = gamma_init / 2.0
    best = 0.0
    top_gamma = None
    top_dev = 0.0
    evals = 0
    while step >= tau:
        dev = _deviation(benign, gb, gp, m, gamma, rule)
        evals += 1
        if dev >= (1.0 - _SUCCESS_RTOL) * best:
            if top_gamma is None or gamma > top_gamma:
                top_gamma, top_dev = gamma, dev
            gamma += step
        else:
            gamma -= step
        best = max(best, dev)
        step /= 2.0
    return GammaSearchResult(top_gamma, top_dev, evals)


def lie_update(benign: np.ndarray, z: float) -> np.ndarray:
    """Benign mean shifted by z population standard deviations per dimension."""
    stats = update_stats(benign)
    return stats.mean + z * stats.std


def craft_round_update(attack: AttackSpec, benign: np.ndarray, m: int,
                       deployed_rule: AggregationRule):
    """The malicious row all m colluding clients submit this round.

    Returns (vector, gamma, deviation); gamma and deviation are None for lie.
    """
    if attack.kind == "lie":
        return lie_update(benign, attack.z), None, None
    if attack.kind == "agropt":
        rule = attack.target_rule if attack.target_rule is not None else deployed_rule
        res = gamma_search(benign, m, attack.perturb, rule,
                           attack.gamma_init, attack.tau)
        gb = benign_mean(benign)
        gp = perturbation_vector(attack.perturb, benign)
        return craft_malicious(gb, gp, res.gamma), res.gamma, res.deviation
    raise ValueError(f"attack kind {attack.kind!r} crafts no update")
