"""Flat `[section]` / `key = value` configuration parser.

Zero-dependency format: UTF-8 text, `#` starts a comment, blank lines are
ignored. Parse failures raise ConfigurationError with line and column.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


def _strip_comment(line: str) -> str:
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


def parse_config_text(text: str) -> dict[str, dict[str, str]]:
    sections: dict[str, dict[str, str]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                col = raw.index("[") + 1
                raise ConfigurationError(
                    f"line {lineno}, column {col}: malformed section header {line!r}"
                )
            current = line[1:-1].strip()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            col = len(raw) - len(raw.lstrip()) + 1
            raise ConfigurationError(
                f"line {lineno}, column {col}: expected `key = value`, got {line!r}"
            )
        if current is None:
            raise ConfigurationError(f"line {lineno}, column 1: key outside any [section]")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigurationError(f"line {lineno}, column 1: empty key")
        sections[current][key] = value
    return sections


def parse_config_file(path: str) -> dict[str, dict[str, str]]:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path!r}: {exc}") from exc


def _parse_floats(raw: str, where: str) -> list[float]:
    try:
        return [float(tok) for tok in raw.replace(",", " ").split()]
    except ValueError:
        raise ConfigurationError(f"{where}: expected a list of numbers, got {raw!r}") from None


@dataclass
class RunConfig:
    """Validated run parameters for the experiment runner."""

    m: int
    length: float
    n: int
    source: str  # `polyharmonic`, `csv:<path>` or a built-in profile name
    gamma_list: list[float]
    t_grid: list[float] = field(default_factory=lambda: list(np.geomspace(0.01, 5.0, 25)))
    lam_grid: list[float] = field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0])
    c2_grid: list[float] = field(default_factory=lambda: list(np.geomspace(1e-3, 1.0, 7)))
    sample_count: int = 24
    seed: int = 42

    def __post_init__(self):
        if not (1 <= self.m <= 3):
            raise ConfigurationError(f"m must be 1..3, got {self.m}")
        if not (2 <= self.n <= 800):
            raise ConfigurationError(f"n must be 2..800, got {self.n}")
        if self.length <= 0:
            raise ConfigurationError(f"L must be positive, got {self.length}")
        for name in ("t_grid", "lam_grid", "c2_grid"):
            if not getattr(self, name):
                raise ConfigurationError(f"{name} must be non-empty")
        if self.seed < 0:
            raise ConfigurationError("seed must be a non-negative integer")


def load_run_config(path: str, seed_override: int | None = None) -> RunConfig:
    """Build a RunConfig from a parsed file, applying profile defaults."""
    from .profiles import BUILTIN_PROFILES, get_profile

    sections = parse_config_file(path)
    op = sections.get("operator", {})
    sched = sections.get("schedule", {})
    sweep = sections.get("sweep", {})

    source = op.get("source", "polyharmonic")
    if source in BUILTIN_PROFILES:
        profile = get_profile(source)
        m = int(op.get("m", profile.m))
        length = float(op.get("L", profile.length))
    else:
        if "m" not in op:
            raise ConfigurationError("[operator] section is missing the required key `m`")
        m = int(op["m"])
        if "L" not in op:
            raise ConfigurationError("[operator] section is missing the required key `L`")
        length = float(op["L"])
    n = int(op.get("n", 200))

    if "gamma" in sched:
        gamma_list = _parse_floats(sched["gamma"], "[schedule] gamma")
    elif "eps" in sched:
        from .core import gamma_from_epsilon

        gamma_list = [
            gamma_from_epsilon(m, 1, e).gamma
            for e in _parse_floats(sched["eps"], "[schedule] eps")
        ]
    else:
        gamma_list = [0.0]

    kwargs = {}
    if "t_grid" in sweep:
        kwargs["t_grid"] = _parse_floats(sweep["t_grid"], "[sweep] t_grid")
    if "lam_grid" in sweep:
        kwargs["lam_grid"] = _parse_floats(sweep["lam_grid"], "[sweep] lam_grid")
    if "c2_grid" in sweep:
        kwargs["c2_grid"] = _parse_floats(sweep["c2_grid"], "[sweep] c2_grid")
    if "samples" in sweep:
        kwargs["sample_count"] = int(sweep["samples"])
    seed = int(sweep.get("seed", 42))
    if seed_override is not None:
        seed = seed_override

    return RunConfig(m=m, length=length, n=n, source=source,
                     gamma_list=gamma_list, seed=seed, **kwargs)
