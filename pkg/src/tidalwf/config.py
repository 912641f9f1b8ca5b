"""Run configuration: validation, load derivation, and the flat config file.

A config fixes the system size (N servers, M dispatchers), the stochastic
parameters (Poisson rate lambda per dispatcher, geometric parameter mu per
server), the horizon, the policy, and the seed. Exactly one of lambda and
rho is given; the other follows from

    rho = M * lambda / (N * mu / (1 - mu))

and admissibility requires rho < 1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from .policies import PolicySpec, parse_policy


class ConfigError(Exception):
    """Invalid configuration; the message names the offending key."""


CONFIG_KEYS = (
    "n_servers",
    "m_dispatchers",
    "lambda",
    "rho",
    "mu",
    "rounds",
    "warmup",
    "eta",
    "policy",
    "policy_param",
    "splittable",
    "seed",
)

SWEEP_KEYS = ("sweep", "values", "policies", "seeds")


@dataclass(frozen=True)
class SystemConfig:
    n_servers: int
    m_dispatchers: int
    arrival_rate: float
    service_param: float
    target_load: float
    rounds: int
    warmup: int
    eta: float
    policy: PolicySpec
    splittable: bool
    seed: int

    @property
    def service_mean(self) -> float:
        return self.service_param / (1.0 - self.service_param)

    def to_dict(self) -> dict:
        return {
            "n_servers": self.n_servers,
            "m_dispatchers": self.m_dispatchers,
            "lambda": self.arrival_rate,
            "rho": self.target_load,
            "mu": self.service_param,
            "rounds": self.rounds,
            "warmup": self.warmup,
            "eta": self.eta,
            "policy": self.policy.name,
            "policy_param": self.policy.d,
            "splittable": self.splittable,
            "seed": self.seed,
        }


def rho_from_lambda(lam: float, n_servers: int, m_dispatchers: int, mu: float) -> float:
    return m_dispatchers * lam / (n_servers * (mu / (1.0 - mu)))


def lambda_from_rho(rho: float, n_servers: int, m_dispatchers: int, mu: float) -> float:
    return rho * n_servers * (mu / (1.0 - mu)) / m_dispatchers


def make_config(
    n_servers: int,
    m_dispatchers: int,
    mu: float,
    rounds: int,
    policy: str,
    lam: float | None = None,
    rho: float | None = None,
    warmup: int | None = None,
    eta: float = 1.0,
    policy_param: int | None = None,
    splittable: bool = True,
    seed: int = 1,
) -> SystemConfig:
    """Validate raw values and derive the missing one of (lambda, rho)."""
    if n_servers < 1:
        raise ConfigError("n_servers must be a positive integer")
    if m_dispatchers < 1:
        raise ConfigError("m_dispatchers must be a positive integer")
    if not 0.0 < mu < 1.0:
        raise ConfigError("mu must lie in (0, 1)")
    if rounds < 1:
        raise ConfigError("rounds must be a positive integer")
    if (lam is None) == (rho is None):
        raise ConfigError("exactly one of lambda and rho must be given")
    if lam is not None:
        if lam <= 0:
            raise ConfigError("lambda must be positive")
        rho = rho_from_lambda(lam, n_servers, m_dispatchers, mu)
    else:
        if not 0.0 < rho:
            raise ConfigError("rho must be positive")
        lam = lambda_from_rho(rho, n_servers, m_dispatchers, mu)
    if rho >= 1.0:
        raise ConfigError(f"admissibility violated: rho = {rho:.6g} must be < 1")
    if warmup is None:
        warmup = rounds // 10
    if not 0 <= warmup < rounds:
        raise ConfigError("warmup must satisfy 0 <= warmup < rounds")
    if not 0.0 < eta <= 1.0:
        raise ConfigError("eta must lie in (0, 1]")
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    try:
        spec = parse_policy(policy, policy_param)
    except ValueError as exc:
        raise ConfigError(f"policy: {exc}") from exc
    if spec.kind == "jsqd" and spec.d > n_servers:
        raise ConfigError("policy_param: probe count d cannot exceed n_servers")
    return SystemConfig(
        n_servers=n_servers,
        m_dispatchers=m_dispatchers,
        arrival_rate=float(lam),
        service_param=float(mu),
        target_load=float(rho),
        rounds=int(rounds),
        warmup=int(warmup),
        eta=float(eta),
        policy=spec,
        splittable=bool(splittable),
        seed=int(seed),
    )


def with_policy(config: SystemConfig, policy: str, policy_param: int | None = None) -> SystemConfig:
    """Same run, different policy."""
    spec = parse_policy(policy, policy_param)
    return replace(config, policy=spec)


def with_load(config: SystemConfig, rho: float) -> SystemConfig:
    """Same run, different load (lambda re-derived, admissibility re-checked)."""
    if not 0.0 < rho < 1.0:
        raise ConfigError(f"admissibility violated: rho = {rho:.6g} must be < 1")
    lam = lambda_from_rho(rho, config.n_servers, config.m_dispatchers, config.service_param)
    return replace(config, target_load=float(rho), arrival_rate=float(lam))


def _parse_kv_lines(text: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for sep in ("=", ":"):
            if sep in line:
                key, _, value = line.partition(sep)
                break
        else:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key in pairs:
            raise ConfigError(f"duplicate config key {key!r}")
        pairs[key] = value
    return pairs


def _get_int(pairs: dict, key: str):
    if key not in pairs:
        return None
    try:
        return int(pairs[key])
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {pairs[key]!r}") from None


def _get_float(pairs: dict, key: str):
    if key not in pairs:
        return None
    try:
        return float(pairs[key])
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {pairs[key]!r}") from None


def _get_bool(pairs: dict, key: str):
    if key not in pairs:
        return None
    value = pairs[key].lower()
    if value in ("true", "yes", "1"):
        return True
    if value in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {pairs[key]!r}")


def config_from_pairs(pairs: dict[str, str], allowed_extra: tuple = ()) -> SystemConfig:
    for key in pairs:
        if key not in CONFIG_KEYS and key not in allowed_extra:
            raise ConfigError(f"unknown config key {key!r}")
    required = ("n_servers", "m_dispatchers", "mu", "rounds", "policy")
    for key in required:
        if key not in pairs:
            raise ConfigError(f"missing required config key {key!r}")
    return make_config(
        n_servers=_get_int(pairs, "n_servers"),
        m_dispatchers=_get_int(pairs, "m_dispatchers"),
        mu=_get_float(pairs, "mu"),
        rounds=_get_int(pairs, "rounds"),
        policy=pairs["policy"],
        lam=_get_float(pairs, "lambda"),
        rho=_get_float(pairs, "rho"),
        warmup=_get_int(pairs, "warmup"),
        eta=_get_float(pairs, "eta") if "eta" in pairs else 1.0,
        policy_param=_get_int(pairs, "policy_param"),
        splittable=_get_bool(pairs, "splittable") if "splittable" in pairs else True,
        seed=_get_int(pairs, "seed") if "seed" in pairs else 1,
    )


def load_config(path: str | Path) -> SystemConfig:
    """Parse a flat key/value config file."""
    return config_from_pairs(_parse_kv_lines(Path(path).read_text()))


@dataclass(frozen=True)
class SweepSpec:
    """A grid of runs: one swept parameter, a policy list, paired seeds."""

    base: SystemConfig
    param: str  # "load" or "eta"
    values: tuple[float, ...]
    policies: tuple[str, ...]
    seeds: tuple[int, ...]


def load_sweep(
    path: str | Path,
    param: str | None = None,
    values: list[float] | None = None,
    policies: list[str] | None = None,
    seeds: list[int] | None = None,
) -> SweepSpec:
    """Parse a sweep file (a run config plus sweep/values/policies/seeds).

    Explicit arguments override their file counterparts.
    """
    pairs = _parse_kv_lines(Path(path).read_text())
    sweep_pairs = {k: pairs.pop(k) for k in list(pairs) if k in SWEEP_KEYS}
    base = config_from_pairs(pairs)
    param = param or sweep_pairs.get("sweep")
    if param not in ("load", "eta"):
        raise ConfigError("sweep: swept parameter must be 'load' or 'eta'")
    if values is None:
        if "values" not in sweep_pairs:
            raise ConfigError("missing required sweep key 'values'")
        try:
            values = [float(v) for v in sweep_pairs["values"].split(",")]
        except ValueError:
            raise ConfigError("values: expected a comma-separated list of numbers") from None
    if policies is None:
        policies = (
            [p.strip() for p in sweep_pairs["policies"].split(",")]
            if "policies" in sweep_pairs
            else [base.policy.name]
        )
    if seeds is None:
        if "seeds" in sweep_pairs:
            try:
                seeds = [int(s) for s in sweep_pairs["seeds"].split(",")]
            except ValueError:
                raise ConfigError("seeds: expected a comma-separated list of integers") from None
        else:
            seeds = [base.seed]
    for p in policies:
        parse_policy(p)  # fail early on typos
    return SweepSpec(base=base, param=param, values=tuple(values), policies=tuple(policies), seeds=tuple(seeds))
