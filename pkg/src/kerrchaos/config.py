"""Run configuration: YAML documents, validation, and manifest round-trips.

A manifest written by a run embeds the fully resolved config plus every
auto-selected analysis parameter, so re-running from a manifest pins the
whole pipeline and reproduces identical outputs.
"""

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Union

import yaml

from .model import ModelParams
from .states import StateSpec

PAPER_STEPS = 10**6
CI_STEPS = 10**5


class ConfigError(ValueError):
    """Invalid run configuration, with file/line context when available."""


@dataclass(frozen=True)
class AnalysisFlags:
    spectrum: bool = True
    embed: bool = True
    lyapunov: bool = True
    recurrence: bool = True
    entropy: bool = False


@dataclass(frozen=True)
class AnalysisParams:
    """Tunables of the analysis chain; None means auto-select and record."""

    bin_width: float = 1e-2
    cell_policy: Union[str, tuple] = "mode"
    theiler: Optional[int] = None
    fit_range: Optional[tuple] = None
    delay: Optional[int] = None
    emb_dim: Optional[int] = None
    max_dim: int = 10
    kmax: Optional[int] = None
    n_refs: int = 5000
    spectrum_max_lag: Optional[int] = None
    ami_max_lag: int = 200
    entropy_stride: int = 100
    stability_dims: int = 5


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    state: StateSpec = field(default_factory=lambda: StateSpec.from_nu("cs", 1.0))
    dt: Optional[float] = None
    steps: int = CI_STEPS
    discard_prefix: int = 0
    eps_trunc: float = 1e-12
    paper_scale: bool = False
    analyses: AnalysisFlags = field(default_factory=AnalysisFlags)
    analysis: AnalysisParams = field(default_factory=AnalysisParams)
    output_dir: str = "runs/out"

    def resolved_dt(self) -> float:
        """Sampling step: explicit, else keyed off gamma/g (1e-2 small, 1e-1 large)."""
        if self.dt is not None:
            return self.dt
        return 0.1 if self.model.gamma_over_g >= 1.0 else 0.01

    def resolved_steps(self) -> int:
        if self.steps is not None:
            return self.steps
        return PAPER_STEPS if self.paper_scale else CI_STEPS

    def validate(self):
        if self.resolved_steps() < 2:
            raise ConfigError("steps must be >= 2")
        if self.discard_prefix < 0 or self.discard_prefix >= self.resolved_steps() - 1:
            raise ConfigError("discard_prefix must leave at least 2 samples")
        if self.analyses.lyapunov and not self.analyses.embed:
            raise ConfigError("lyapunov analysis requires embed to be enabled")
        if self.dt is not None and self.dt <= 0:
            raise ConfigError("dt must be > 0")
        return self


def _cfg_dict(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    # complex alpha -> [re, im] for JSON/YAML friendliness
    d["state"] = {
        "kind": cfg.state.kind,
        "alpha": [cfg.state.alpha.real, cfg.state.alpha.imag],
        "m": cfg.state.m,
    }
    return d


def config_to_dict(cfg: RunConfig) -> dict:
    return _cfg_dict(cfg)


class _LineMap:
    """Key-path -> line-number lookup built from the YAML node tree."""

    def __init__(self, path=None):
        self.lines = {}
        self.origin = str(path) if path else "<config>"

    def build(self, node, prefix=""):
        if isinstance(node, yaml.MappingNode):
            for key_node, val_node in node.value:
                key_path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
                self.lines[key_path] = key_node.start_mark.line + 1
                self.build(val_node, key_path)

    def where(self, key_path: str) -> str:
        line = self.lines.get(key_path)
        if line is None:
            return f"{self.origin}: {key_path}"
        return f"{self.origin}:{line}: {key_path}"


def _take(data: dict, key: str, lm: _LineMap, prefix: str, expect, default):
    path = f"{prefix}.{key}" if prefix else key
    if key not in data:
        return default
    value = data.pop(key)
    if value is None:
        return default
    if expect is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if expect is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if expect is bool and isinstance(value, bool):
        return value
    if expect is str and isinstance(value, str):
        return value
    if expect is None:
        return value
    raise ConfigError(f"{lm.where(path)}: expected {expect.__name__}, got {value!r}")


def config_from_dict(data: dict, line_map: Optional[_LineMap] = None) -> RunConfig:
    lm = line_map or _LineMap()
    data = dict(data or {})

    model_d = dict(data.pop("model", {}) or {})
    try:
        model = ModelParams(
            omega=_take(model_d, "omega", lm, "model", float, 1.0),
            omega0=_take(model_d, "omega0", lm, "model", float, 1.0),
            gamma=_take(model_d, "gamma", lm, "model", float, 0.0),
            g=_take(model_d, "g", lm, "model", float, 0.0),
        )
    except ValueError as exc:
        raise ConfigError(f"{lm.where('model')}: {exc}") from exc
    if model_d:
        raise ConfigError(f"{lm.where('model.' + next(iter(model_d)))}: unknown key")

    state_d = dict(data.pop("state", {}) or {})
    kind = _take(state_d, "kind", lm, "state", str, "cs")
    m = _take(state_d, "m", lm, "state", int, 0)
    alpha = state_d.pop("alpha", None)
    nu = _take(state_d, "nu", lm, "state", float, None)
    if state_d:
        raise ConfigError(f"{lm.where('state.' + next(iter(state_d)))}: unknown key")
    try:
        if alpha is not None:
            if isinstance(alpha, (list, tuple)):
                alpha = complex(float(alpha[0]), float(alpha[1]))
            else:
                alpha = complex(float(alpha), 0.0)
            state = StateSpec(kind=kind, alpha=alpha, m=m)
        elif nu is not None:
            state = StateSpec.from_nu(kind, nu, m=m)
        else:
            raise ValueError("state needs either alpha or nu")
    except ValueError as exc:
        raise ConfigError(f"{lm.where('state')}: {exc}") from exc

    flags_d = dict(data.pop("analyses", {}) or {})
    flags = AnalysisFlags(
        spectrum=_take(flags_d, "spectrum", lm, "analyses", bool, True),
        embed=_take(flags_d, "embed", lm, "analyses", bool, True),
        lyapunov=_take(flags_d, "lyapunov", lm, "analyses", bool, True),
        recurrence=_take(flags_d, "recurrence", lm, "analyses", bool, True),
        entropy=_take(flags_d, "entropy", lm, "analyses", bool, False),
    )
    if flags_d:
        raise ConfigError(f"{lm.where('analyses.' + next(iter(flags_d)))}: unknown key")

    an_d = dict(data.pop("analysis", {}) or {})
    cell_policy = an_d.pop("cell_policy", "mode")
    if isinstance(cell_policy, (list, tuple)):
        cell_policy = (float(cell_policy[0]), float(cell_policy[1]))
    fit_range = an_d.pop("fit_range", None)
    if fit_range is not None:
        fit_range = (int(fit_range[0]), int(fit_range[1]))
    analysis = AnalysisParams(
        bin_width=_take(an_d, "bin_width", lm, "analysis", float, 1e-2),
        cell_policy=cell_policy,
        theiler=_take(an_d, "theiler", lm, "analysis", int, None),
        fit_range=fit_range,
        delay=_take(an_d, "delay", lm, "analysis", int, None),
        emb_dim=_take(an_d, "emb_dim", lm, "analysis", int, None),
        max_dim=_take(an_d, "max_dim", lm, "analysis", int, 10),
        kmax=_take(an_d, "kmax", lm, "analysis", int, None),
        n_refs=_take(an_d, "n_refs", lm, "analysis", int, 5000),
        spectrum_max_lag=_take(an_d, "spectrum_max_lag", lm, "analysis", int, None),
        ami_max_lag=_take(an_d, "ami_max_lag", lm, "analysis", int, 200),
        entropy_stride=_take(an_d, "entropy_stride", lm, "analysis", int, 100),
        stability_dims=_take(an_d, "stability_dims", lm, "analysis", int, 5),
    )
    if an_d:
        raise ConfigError(f"{lm.where('analysis.' + next(iter(an_d)))}: unknown key")

    steps_given = _take(data, "steps", lm, "", int, None)
    paper_scale = _take(data, "paper_scale", lm, "", bool, False)
    if steps_given is None:
        steps_given = PAPER_STEPS if paper_scale else CI_STEPS
    cfg = RunConfig(
        model=model,
        state=state,
        dt=_take(data, "dt", lm, "", float, None),
        steps=steps_given,
        discard_prefix=_take(data, "discard_prefix", lm, "", int, 0),
        eps_trunc=_take(data, "eps_trunc", lm, "", float, 1e-12),
        paper_scale=paper_scale,
        analyses=flags,
        analysis=analysis,
        output_dir=_take(data, "output_dir", lm, "", str, "runs/out"),
    )
    if data:
        raise ConfigError(f"{lm.where(next(iter(data)))}: unknown key")
    return cfg.validate()


def load_config(path) -> RunConfig:
    """Parse and validate a YAML run config, with line-precise errors."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lm = _LineMap(path)
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if node is not None:
        lm.build(node)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return config_from_dict(data, lm)


def write_manifest(path, manifest: dict):
    import os
    import tempfile

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with open(fd, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def config_from_manifest(manifest: dict) -> RunConfig:
    """Rebuild a pinned config: auto-selected parameters become explicit."""
    cfg = config_from_dict(dict(manifest["config"]))
    selected = manifest.get("selected", {})
    kw = {}
    for key in ("delay", "emb_dim", "theiler", "kmax", "spectrum_max_lag"):
        if selected.get(key) is not None:
            kw[key] = int(selected[key])
    if selected.get("fit_range") is not None:
        kw["fit_range"] = tuple(selected["fit_range"])
    if selected.get("cell") is not None:
        kw["cell_policy"] = (float(selected["cell"][0]), float(selected["cell"][1]))
    if kw:
        from dataclasses import replace

        cfg = RunConfig(
            **{
                **{f.name: getattr(cfg, f.name) for f in fields(RunConfig)},
                "analysis": replace(cfg.analysis, **kw),
            }
        )
    return cfg
