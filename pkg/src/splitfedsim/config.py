"""Experiment configuration: one flat dataclass, mirrored 1:1 by the
key=value config file format (lines of `key = value`, `#` comments)."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass


class ConfigError(ValueError):
    """A configuration field is missing, unknown, or out of range."""


def malicious_count(fraction: float, n: int) -> int:
    """Number of compromised clients for a fraction of n. Rounds up so any
    positive fraction compromises at least one client; the small epsilon
    keeps float products like 0.3 * 20 from ceiling to 7."""
    if not 0.0 <= fraction < 1.0:
        raise ConfigError(f"malicious_fraction {fraction} outside [0, 1)")
    return int(math.ceil(fraction * n - 1e-9))


@dataclass
class ExperimentConfig:
    seed: int = 42
    mode: str = "splitfed"          # "splitfed" | "fl"
    model: str = "mlp"              # "mlp" | "cnn"
    cut: str = "v2"                 # cut preset, splitfed only
    dataset: str = "blobs"          # "blobs" | "idx"
    blob_classes: int = 4
    blob_dims: int = 8
    blob_per_class: int = 500
    blob_spread: float = 1.0
    idx_train_images: str = ""
    idx_train_labels: str = ""
    idx_test_images: str = ""
    idx_test_labels: str = ""
    partition: str = "dirichlet"    # "iid" | "dirichlet"
    dirichlet_alpha: float = 0.05
    n_clients: int = 20
    clients_per_round: int = 20
    malicious_fraction: float = 0.2
    rounds: int = 200
    lr: float = 0.05
    batch_size: int = 32
    defense: str = "fedavg"         # "fedavg" | "trmean" | "median"
    attack: str = "none"            # "none" | "lie" | "agropt"
    lie_z: float = 1.5
    agropt_perturb: str = "std"     # "std" | "unit" | "sign"
    agropt_gamma_init: float = 10.0
    agropt_tau: float = 1e-5
    attack_start_round: int = -1    # -1 = auto: 0 for iid, rounds // 4 for dirichlet
    eval_every: int = 1

    def validate(self) -> "ExperimentConfig":
        """Raise ConfigError naming the offending field; return self if fine."""
        def choice(field_name, allowed):
            v = getattr(self, field_name)
            if v not in allowed:
                raise ConfigError(f"{field_name} must be one of {allowed}, got {v!r}")

        def positive(field_name, strict=True):
            v = getattr(self, field_name)
            if (v <= 0) if strict else (v < 0):
                raise ConfigError(f"{field_name} must be {'positive' if strict else 'non-negative'}, got {v}")

        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        choice("mode", ("splitfed", "fl"))
        choice("model", ("mlp", "cnn"))
        choice("cut", ("v1", "v2", "v3"))
        choice("dataset", ("blobs", "idx"))
        choice("partition", ("iid", "dirichlet"))
        choice("defense", ("fedavg", "trmean", "median"))
        choice("attack", ("none", "lie", "agropt"))
        choice("agropt_perturb", ("std", "unit", "sign"))
        positive("dirichlet_alpha")
        positive("blob_spread")
        positive("lr")
        positive("agropt_gamma_init")
        positive("agropt_tau")
        positive("rounds", strict=False)
        for f in ("blob_classes", "blob_dims", "blob_per_class", "n_clients",
                  "batch_size", "eval_every"):
            if getattr(self, f) < 1:
                raise ConfigError(f"{f} must be at least 1, got {getattr(self, f)}")
        if not 1 <= self.clients_per_round <= self.n_clients:
            raise ConfigError(
                f"clients_per_round must be in [1, n_clients={self.n_clients}], "
                f"got {self.clients_per_round}")
        if not 0.0 <= self.malicious_fraction < 1.0:
            raise ConfigError(
                f"malicious_fraction must be in [0, 1), got {self.malicious_fraction}")
        if self.attack_start_round < -1:
            raise ConfigError(
                f"attack_start_round must be -1 (auto) or non-negative, "
                f"got {self.attack_start_round}")
        if self.dataset == "idx":
            for f in ("idx_train_images", "idx_train_labels",
                      "idx_test_images", "idx_test_labels"):
                if not getattr(self, f):
                    raise ConfigError(f"{f} is required when dataset = idx")
        if self.model == "cnn" and self.dataset == "blobs":
            side = round(self.blob_dims ** 0.5)
            if side * side != self.blob_dims or side % 4:
                raise ConfigError(
                    f"cnn on blobs needs blob_dims a square of a multiple of 4 "
                    f"(e.g. 64), got {self.blob_dims}")
        if self.defense == "trmean":
            m_total = malicious_count(self.malicious_fraction, self.n_clients)
            worst = min(m_total, self.clients_per_round)
            if self.clients_per_round <= 2 * worst:
                raise ConfigError(
                    f"trmean needs clients_per_round > 2 * malicious clients in a "
                    f"round; worst case is {worst} of {self.clients_per_round}")
        return self

    def resolved_attack_start(self) -> int:
        if self.attack_start_round >= 0:
            return self.attack_start_round
        return 0 if self.partition == "iid" else self.rounds // 4

    def to_text(self) -> str:
        lines = [f"{f.name} = {getattr(self, f.name)}"
                 for f in dataclasses.fields(self)]
        return "\n".join(lines) + "\n"


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse `key = value` lines into a config. Unknown keys and uncoercible
    values raise ConfigError naming the key."""
    cfg = dataclasses.replace(base) if base is not None else ExperimentConfig()
    types = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    casts = {"int": int, "float": float, "str": str}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            setattr(cfg, key, casts[types[key]](value))
        except (TypeError, ValueError):
            raise ConfigError(
                f"config key {key!r}: cannot parse {value!r} as {types[key]}") from None
    return cfg


def load_config(path: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read(), base).validate()
