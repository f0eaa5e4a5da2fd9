"""Experiment configuration: a line-oriented ``key = value`` format.

Grammar (one construct per line, UTF-8)::

    line     := blank | comment | section | entry
    comment  := optional spaces, '#', anything
    section  := '[' name ']'          name in {adversary, protocol}
    entry    := key '=' value         spaces around '=' are ignored
    list     := value (',' value)*    for list-typed keys

Keys before the first section header are top-level keys.  Each key may
appear once per section.  Unknown keys, bad types and violated constraints
are all collected and reported together, each with its line number.

Top-level keys:

    protocols        list of alpha_aware, beta_aware, alpha_unaware,
                     beta_unaware, parallel_exp3             (required)
    M, K, T          ints                                    (required)
    horizons         list of ints; one batch per horizon, overrides T
    runs             int >= 1                                (default 1)
    seed             int >= 0                                (default 0)
    epsilon_step     float in (0, 1]                         (default 0.01)
    checkpoints      strictly increasing ints <= T           (default: T)
    workers          int >= 1                                (default 1)
    output           path of the per-run CSV                 (default runs.csv)
    aggregate_output path of the aggregate CSV               (default aggregate.csv)

``[adversary]``: ``name`` (burst, changepoint, zero, file) plus that
generator's parameters: burst takes c_low, c_high, l_high, burst_len,
n_bursts; changepoint takes means_before, means_after (lists of K floats),
t_change, halfwidth, burst_len, n_bursts; file takes path.

``[protocol]``: ``alpha`` and ``beta`` (float in [0, 1] or ``auto`` = the
exponent measured on each generated loss matrix), ``epsilon`` (slack added
to alpha by the alpha-aware protocol, default 0.01).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .harness import ADVERSARIES
from .protocol.agents import PROTOCOLS


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("\n".join(problems))


@dataclass(frozen=True)
class ExperimentConfig:
    protocols: tuple[str, ...]
    M: int
    K: int
    T: int
    horizons: tuple[int, ...] = ()
    runs: int = 1
    seed: int = 0
    epsilon_step: float = 0.01
    checkpoints: tuple[int, ...] = ()
    workers: int = 1
    output: str = "runs.csv"
    aggregate_output: str = "aggregate.csv"
    adversary: str = "burst"
    adversary_params: dict = field(default_factory=dict)
    alpha: float | str | None = None
    beta: float | str | None = None
    epsilon: float = 0.01

    def horizon_list(self) -> tuple[int, ...]:
        return self.horizons or (self.T,)

    def params_inputs(self, protocol: str) -> dict:
        if protocol == "alpha_aware":
            return {"alpha": self.alpha, "eps": self.epsilon}
        if protocol == "beta_aware":
            return {"beta": self.beta}
        if protocol in ("alpha_unaware", "beta_unaware"):
            return {"eps": self.epsilon_step}
        return {}


# key -> (parser name, required)
_TOP = {
    "protocols": ("protocols", True),
    "M": ("int", True),
    "K": ("int", True),
    "T": ("int", True),
    "horizons": ("ints", False),
    "runs": ("int", False),
    "seed": ("int", False),
    "epsilon_step": ("float", False),
    "checkpoints": ("ints", False),
    "workers": ("int", False),
    "output": ("str", False),
    "aggregate_output": ("str", False),
}
_PROTOCOL = {"alpha": ("unit_or_auto", False), "beta": ("unit_or_auto", False), "epsilon": ("float", False)}
_ADVERSARY_KEYS = {
    "burst": {"c_low": "float", "c_high": "float", "l_high": "float", "burst_len": "int", "n_bursts": "int"},
    "changepoint": {
        "means_before": "floats",
        "means_after": "floats",
        "t_change": "int",
        "halfwidth": "float",
        "burst_len": "int",
        "n_bursts": "int",
    },
    "zero": {},
    "file": {"path": "str"},
}
SECTIONS = ("adversary", "protocol")


def _split(v: str) -> list[str]:
    return [x.strip() for x in v.split(",") if x.strip()]


def _convert(kind: str, raw: str):
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "str":
        if not raw:
            raise ValueError("empty value")
        return raw
    if kind == "ints":
        return tuple(int(x) for x in _split(raw))
    if kind == "floats":
        return tuple(float(x) for x in _split(raw))
    if kind == "protocols":
        items = tuple(_split(raw))
        bad = [p for p in items if p not in PROTOCOLS]
        if bad or not items:
            raise ValueError(f"unknown protocol(s) {bad}; choose from {', '.join(PROTOCOLS)}")
        return items
    if kind == "unit_or_auto":
        if raw == "auto":
            return "auto"
        x = float(raw)
        if not 0.0 <= x <= 1.0:
            raise ValueError("must lie in [0, 1] or be 'auto'")
        return x
    raise AssertionError(kind)


def read_entries(text: str) -> tuple[dict, list[str]]:
    """Tokenize into {(section, key): (value, line_no)} plus syntax problems."""
    entries: dict = {}
    problems: list[str] = []
    section = ""
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if s.startswith("["):
            name = s[1:-1].strip() if s.endswith("]") else None
            if name not in SECTIONS:
                problems.append(f"line {no}: unknown section {s!r}")
                section = "?"
            else:
                section = name
            continue
        if "=" not in s:
            problems.append(f"line {no}: expected 'key = value', got {s!r}")
            continue
        key, value = (x.strip() for x in s.split("=", 1))
        if (section, key) in entries:
            problems.append(f"line {no}: duplicate key {key!r}")
            continue
        entries[(section, key)] = (value, no)
    return entries, problems


def build_config(entries: dict, problems: list[str] | None = None) -> ExperimentConfig:
    problems = list(problems or [])
    top, proto, adv = {}, {}, {}

    def where(no):
        return f"line {no}" if no else "override"

    adv_name = entries.get(("adversary", "name"), ("burst", None))
    if adv_name[0] not in ADVERSARIES:
        problems.append(f"{where(adv_name[1])}: unknown adversary {adv_name[0]!r}")
        adv_keys = {}
    else:
        adv_keys = _ADVERSARY_KEYS[adv_name[0]]

    for (section, key), (raw, no) in entries.items():
        if section == "?":
            continue
        if section == "adversary":
            if key == "name":
                continue
            table, target = {k: (v, True) for k, v in adv_keys.items()}, adv
        elif section == "protocol":
            table, target = _PROTOCOL, proto
        else:
            table, target = _TOP, top
        if key not in table:
            label = f"[{section}] " if section else ""
            problems.append(f"{where(no)}: unknown key {label}{key!r}")
            continue
        try:
            target[key] = _convert(table[key][0], raw)
        except ValueError as e:
            problems.append(f"{where(no)}: bad value for {key!r}: {raw!r} ({e})")

    for key, (_, required) in _TOP.items():
        if required and key not in top and not any(f"{key!r}" in p for p in problems):
            problems.append(f"missing required key {key!r}")
    for key in adv_keys:
        if key not in adv and not any(f"{key!r}" in p for p in problems):
            problems.append(f"[adversary] missing key {key!r} for generator {adv_name[0]!r}")

    def line(section, key):
        return where(entries.get((section, key), ("", None))[1])

    M, K, T = top.get("M"), top.get("K"), top.get("T")
    if isinstance(M, int) and isinstance(K, int):
        if M > K:
            problems.append(f"{line('', 'M')}: M exceeds K ({M} > {K})")
        if M < 1:
            problems.append(f"{line('', 'M')}: M must be >= 1")
        coordinated = [p for p in top.get("protocols", ()) if p != "parallel_exp3"]
        if coordinated and M < 2:
            problems.append(f"{line('', 'M')}: {coordinated[0]} needs M >= 2")
    if isinstance(T, int) and T < 1:
        problems.append(f"{line('', 'T')}: T must be >= 1")
    horizons = top.get("horizons", ())
    if any(h < 1 for h in horizons):
        problems.append(f"{line('', 'horizons')}: horizons must be >= 1")
    if "runs" in top and top["runs"] < 1:
        problems.append(f"{line('', 'runs')}: runs must be >= 1")
    if "seed" in top and top["seed"] < 0:
        problems.append(f"{line('', 'seed')}: seed must be >= 0")
    if "workers" in top and top["workers"] < 1:
        problems.append(f"{line('', 'workers')}: workers must be >= 1")
    if "epsilon_step" in top and not 0.0 < top["epsilon_step"] <= 1.0:
        problems.append(f"{line('', 'epsilon_step')}: epsilon_step must lie in (0, 1]")
    if "epsilon" in proto and not 0.0 < proto["epsilon"] <= 1.0:
        problems.append(f"{line('protocol', 'epsilon')}: epsilon must lie in (0, 1]")
    cps = top.get("checkpoints", ())
    if cps:
        limit = min(horizons) if horizons else T
        if any(b <= a for a, b in zip(cps, cps[1:])) or cps[0] < 1:
            problems.append(f"{line('', 'checkpoints')}: checkpoints must be strictly increasing and >= 1")
        elif isinstance(limit, int) and cps[-1] > limit:
            problems.append(f"{line('', 'checkpoints')}: checkpoint {cps[-1]} exceeds horizon {limit}")
    for p, key in (("alpha_aware", "alpha"), ("beta_aware", "beta")):
        if p in top.get("protocols", ()) and key not in proto and not any(f"{key!r}" in x for x in problems):
            problems.append(f"[protocol] {p} needs {key!r}")
    if adv_name[0] == "changepoint" and isinstance(K, int):
        for key in ("means_before", "means_after"):
            if key in adv and len(adv[key]) != K:
                problems.append(f"{line('adversary', key)}: {key} needs K={K} values")

    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(
        adversary=adv_name[0], adversary_params=adv, **top, **proto
    )


def parse_config(text: str) -> ExperimentConfig:
    entries, problems = read_entries(text)
    return build_config(entries, problems)


def _render(v) -> str:
    if isinstance(v, (tuple, list)):
        return ", ".join(_render(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(cfg: ExperimentConfig) -> str:
    defaults = ExperimentConfig(protocols=("parallel_exp3",), M=1, K=1, T=1)
    lines = []
    for f in fields(cfg):
        if f.name in _TOP:
            v = getattr(cfg, f.name)
            if _TOP[f.name][1] or v != getattr(defaults, f.name):
                lines.append(f"{f.name} = {_render(v)}")
    lines += ["", "[adversary]", f"name = {cfg.adversary}"]
    lines += [f"{k} = {_render(v)}" for k, v in cfg.adversary_params.items()]
    lines += ["", "[protocol]"]
    for key in _PROTOCOL:
        v = getattr(cfg, key)
        if v is not None:
            lines.append(f"{key} = {_render(v)}")
    return "\n".join(lines) + "\n"
