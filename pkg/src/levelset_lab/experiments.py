"""Config-driven batch experiments with CSV rows and a JSON summary.

Config files are ``key = value`` lines, ``#`` comments, comma-separated lists.
Each size in ``sizes`` gets its own block of ``SIZE_STREAM_STRIDE`` stream
indices; all alphas at one size share the block, so they are seed-paired.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DegenerateModelError
from .estimators import (
    concentration_check,
    estimate_g,
    extremality_ratio,
    nondegeneracy_ratio,
    union_bound_g,
)
from .field_models import (
    FieldModel,
    build_dgff,
    build_iid,
    build_sign_field,
    load_covariance,
    normalize_to_spec,
)
from .level_sets import (
    DEFAULT_G_REPLICATES,
    NONDEGENERACY_FLOOR,
    cardinality_experiment,
    outer_stream_index,
    ratio_experiment,
)
from .sampler import RngStream, factorize, sample
from .valleys import VALLEY_GROWTH_THRESHOLD, find_multiple_valleys

EXPERIMENTS = ("estimate-g", "ratio", "cardinality", "valleys", "extremality", "concentration")
MODELS = ("iid", "sign", "dgff", "file")
SIZE_STREAM_STRIDE = 1 << 32

COLUMNS = {
    "ratio": ["experiment", "model", "size", "alpha", "replicate_id", "seed", "g_v_hat",
              "g_v_stderr", "levelset_size", "g_u_hat", "g_u_stderr", "ratio", "empty_flag"],
    "cardinality": ["experiment", "model", "size", "alpha", "replicate_id", "seed",
                    "levelset_size", "exponent", "empty_flag"],
    "valleys": ["experiment", "model", "size", "epsilon", "delta", "replicate_id", "seed",
                "pool_size", "net_size", "growth_exponent", "cond_a", "cond_b", "cond_c"],
    "estimate-g": ["experiment", "model", "size", "replicate_id", "seed", "stream_index",
                   "g_hat", "g_stderr", "replicates", "borell_halfwidth", "sigma_max_sq",
                   "effective_n", "nondegeneracy_ratio", "extremality_ratio", "union_bound"],
    "concentration": ["experiment", "model", "size", "z", "replicate_id", "seed",
                      "stream_index", "replicates", "exceed_freq", "bound", "binom_sd", "ok"],
}
COLUMNS["extremality"] = COLUMNS["estimate-g"]

HEADLINE = {
    "ratio": "ratio",
    "cardinality": "exponent",
    "valleys": "growth_exponent",
    "estimate-g": "g_hat",
    "extremality": "extremality_ratio",
    "concentration": "exceed_freq",
}
GROUP_PARAMS = {
    "ratio": ("alpha",),
    "cardinality": ("alpha",),
    "valleys": ("epsilon", "delta"),
    "estimate-g": (),
    "extremality": (),
    "concentration": ("z",),
}


@dataclass
class ExperimentConfig:
    experiment: str
    model: str
    sizes: list = field(default_factory=list)
    covariance_file: str | None = None
    variance: float = 1.0
    normalize: bool = True
    alpha_list: list = field(default_factory=lambda: [0.5])
    epsilon: float = 0.3
    delta: float = 0.5
    z_list: list = field(default_factory=lambda: [1.0, 2.0, 3.0])
    outer_replicates: int = 50
    inner_replicates: int = 200
    g_replicates: int = DEFAULT_G_REPLICATES
    base_seed: int = 20261015
    nondegeneracy_floor: float = NONDEGENERACY_FLOOR
    growth_threshold: float = VALLEY_GROWTH_THRESHOLD
    order: str = "value"
    valley_copy: str = "fresh"
    workers: int = 1
    output_dir: str = "out"

    def validate(self) -> ExperimentConfig:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}", "experiment")
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}", "model")
        if self.model == "file":
            if not self.covariance_file:
                raise ConfigError("required for model = file", "covariance_file")
            if not self.sizes:
                self.sizes = [0]
        if not self.sizes:
            raise ConfigError("at least one size is required", "sizes")
        for i, (a, b) in enumerate(zip(self.sizes, self.sizes[1:])):
            if b <= a:
                raise ConfigError("sizes must be strictly increasing", f"sizes[{i + 1}]")
        for i, a in enumerate(self.alpha_list):
            if not 0 < a < 1:
                raise ConfigError(f"alpha must lie in (0, 1), got {a}", f"alpha_list[{i}]")
        if not 0 < self.epsilon < 1:
            raise ConfigError(f"must lie in (0, 1), got {self.epsilon}", "epsilon")
        for name in ("delta", "variance", "nondegeneracy_floor"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be positive", name)
        for i, z in enumerate(self.z_list):
            if not z >= 0:
                raise ConfigError("must be nonnegative", f"z_list[{i}]")
        for name in ("outer_replicates", "inner_replicates", "g_replicates", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError("must be >= 1", name)
        if self.g_replicates < 2:
            raise ConfigError("must be >= 2", "g_replicates")
        if self.experiment == "ratio" and self.inner_replicates < 2:
            raise ConfigError("must be >= 2", "inner_replicates")
        if not 0 <= self.base_seed < 2**64:
            raise ConfigError("must be a 64-bit unsigned integer", "base_seed")
        if self.order not in ("value", "index"):
            raise ConfigError(f"unknown order {self.order!r}", "order")
        if self.valley_copy not in ("fresh", "same"):
            raise ConfigError(f"expected 'fresh' or 'same', got {self.valley_copy!r}",
                              "valley_copy")
        return self


_FIELD_TYPES = {f.name: f for f in fields(ExperimentConfig)}
_LIST_ITEM = {"sizes": int, "alpha_list": float, "z_list": float}
_SCALAR = {
    "experiment": str, "model": str, "covariance_file": str, "output_dir": str, "order": str,
    "valley_copy": str,
    "variance": float, "epsilon": float, "delta": float,
    "nondegeneracy_floor": float, "growth_threshold": float,
    "outer_replicates": int, "inner_replicates": int, "g_replicates": int,
    "base_seed": int, "workers": int,
}


def _convert(key, raw):
    if key in _LIST_ITEM:
        conv = _LIST_ITEM[key]
        items = [x.strip() for x in raw.split(",") if x.strip()]
        out = []
        for i, x in enumerate(items):
            try:
                out.append(conv(x))
            except ValueError:
                raise ConfigError(f"cannot parse {x!r}", f"{key}[{i}]") from None
        return out
    if key == "normalize":
        low = raw.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"expected a boolean, got {raw!r}", key)
        return low in ("true", "1", "yes")
    try:
        return _SCALAR[key](raw)
    except ValueError:
        raise ConfigError(f"cannot parse {raw!r}", key) from None


def parse_config_text(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.split("#", 1)[0].strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown key (line {lineno})", key)
        if key in values:
            raise ConfigError(f"duplicate key (line {lineno})", key)
        values[key] = _convert(key, val)
    for required in ("experiment", "model"):
        if required not in values:
            raise ConfigError("missing required key", required)
    cfg = ExperimentConfig(**values)
    if base_dir is not None and cfg.covariance_file and not Path(cfg.covariance_file).is_absolute():
        cfg.covariance_file = str(base_dir / cfg.covariance_file)
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config_text(path.read_text(encoding="utf-8"), base_dir=path.parent)


def build_model(cfg: ExperimentConfig, size: int) -> FieldModel:
    if cfg.model == "iid":
        m = build_iid(size, cfg.variance)
    elif cfg.model == "sign":
        return build_sign_field(size)
    elif cfg.model == "dgff":
        return build_dgff(size)
    else:
        m = load_covariance(cfg.covariance_file)
    return normalize_to_spec(m) if cfg.normalize else m


def size_stream(cfg: ExperimentConfig, size_idx: int) -> RngStream:
    return RngStream(cfg.base_seed, size_idx * SIZE_STREAM_STRIDE)


def _g_row(cfg, model, rng, kernel):
    g = estimate_g(kernel, None, cfg.g_replicates, rng)
    try:
        extr = extremality_ratio(g, model)
    except DegenerateModelError:
        extr = math.nan
    return {
        "experiment": cfg.experiment, "model": cfg.model, "size": model.size,
        "replicate_id": 0, "seed": cfg.base_seed, "stream_index": rng.stream_index,
        "g_hat": g.mean, "g_stderr": g.stderr, "replicates": g.replicates,
        "borell_halfwidth": g.borell_halfwidth, "sigma_max_sq": model.sigma_max_sq,
        "effective_n": model.effective_n, "nondegeneracy_ratio": nondegeneracy_ratio(g, model),
        "extremality_ratio": extr, "union_bound": union_bound_g(model, model.size).bound_value,
    }


def experiment_rows(cfg: ExperimentConfig) -> list[dict]:
    """All output rows for ``cfg``, in deterministic order."""
    rows = []
    for si, size in enumerate(cfg.sizes):
        model = build_model(cfg, size)
        kernel = factorize(model)
        rng = size_stream(cfg, si)
        exp = cfg.experiment
        if exp in ("estimate-g", "extremality"):
            rows.append(_g_row(cfg, model, rng, kernel))
            continue
        if exp == "concentration":
            for c in concentration_check(kernel, None, cfg.g_replicates, rng, cfg.z_list):
                rows.append({
                    "experiment": exp, "model": cfg.model, "size": model.size, "z": c.z,
                    "replicate_id": 0, "seed": cfg.base_seed, "stream_index": rng.stream_index,
                    "replicates": c.replicates, "exceed_freq": c.exceed_freq, "bound": c.bound,
                    "binom_sd": c.binom_sd, "ok": c.ok,
                })
            continue

        g_v = estimate_g(kernel, None, cfg.g_replicates, rng)
        if exp == "valleys":
            fresh = cfg.valley_copy == "fresh"
            for r in range(cfg.outer_replicates):
                # with a fresh certificate copy each replicate owns two streams
                first = RngStream(cfg.base_seed, outer_stream_index(
                    rng, cfg.g_replicates, r, inner_replicates=1 if fresh else 0))
                rep = find_multiple_valleys(
                    model, sample(kernel, first), g_v.mean, cfg.delta, cfg.epsilon,
                    order=cfg.order, growth_threshold=cfg.growth_threshold,
                    certificate=sample(kernel, first.advance(1)) if fresh else None,
                )
                rows.append({
                    "experiment": exp, "model": cfg.model, "size": model.size,
                    "epsilon": cfg.epsilon, "delta": cfg.delta, "replicate_id": r,
                    "seed": cfg.base_seed, "pool_size": rep.pool_size, "net_size": rep.net_size,
                    "growth_exponent": rep.growth_exponent, "cond_a": rep.cond_a,
                    "cond_b": rep.cond_b, "cond_c": rep.cond_c,
                })
            continue

        for alpha in cfg.alpha_list:
            if exp == "ratio":
                results = ratio_experiment(
                    model, alpha, cfg.outer_replicates, cfg.inner_replicates, rng,
                    g_replicates=cfg.g_replicates, g_v=g_v, floor=cfg.nondegeneracy_floor,
                    kernel=kernel, workers=cfg.workers,
                )
                for res in results:
                    rows.append({
                        "experiment": exp, "model": cfg.model, "size": model.size,
                        "alpha": alpha, "replicate_id": res.replicate_id, "seed": res.seed,
                        "g_v_hat": res.g_v_hat.mean, "g_v_stderr": res.g_v_hat.stderr,
                        "levelset_size": res.levelset_size,
                        "g_u_hat": res.g_u_hat.mean if res.g_u_hat else math.nan,
                        "g_u_stderr": res.g_u_hat.stderr if res.g_u_hat else math.nan,
                        "ratio": res.ratio, "empty_flag": res.empty,
                    })
            else:
                results = cardinality_experiment(
                    model, alpha, cfg.outer_replicates, rng, g_replicates=cfg.g_replicates,
                    g_v=g_v, floor=cfg.nondegeneracy_floor, kernel=kernel, workers=cfg.workers,
                )
                for res in results:
                    rows.append({
                        "experiment": exp, "model": cfg.model, "size": model.size,
                        "alpha": alpha, "replicate_id": res.replicate_id, "seed": res.seed,
                        "levelset_size": res.levelset_size, "exponent": res.exponent,
                        "empty_flag": res.empty,
                    })
    return rows


# --- output --------------------------------------------------------------

def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(rows: list[dict], path, columns: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_value(row[c]) for c in columns])


def read_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [{k: _parse_cell(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def _parse_cell(v: str):
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


def theoretical_target(experiment: str, params: dict):
    alpha = params.get("alpha")
    if experiment == "ratio":
        return math.sqrt(1.0 - alpha * alpha)
    if experiment == "cardinality":
        return 1.0 - alpha * alpha
    if experiment == "extremality":
        return 1.0
    return None


def summarize(rows: list[dict]) -> dict:
    """Per-group headline statistics plus size-ladder trends."""
    if not rows:
        raise ValueError("cannot summarize an empty row set")
    experiment = rows[0]["experiment"]
    if any(r["experiment"] != experiment for r in rows):
        raise ValueError("rows mix several experiments")
    head = HEADLINE[experiment]
    params = GROUP_PARAMS[experiment]

    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        key = (r["model"], int(r["size"])) + tuple(float(r[p]) for p in params)
        groups.setdefault(key, []).append(r)

    out_groups = []
    for key in sorted(groups):
        grp = groups[key]
        pvals = dict(zip(params, key[2:]))
        empties = [bool(r.get("empty_flag", 0)) for r in grp]
        vals = np.array([float(r[head]) for r in grp], dtype=float)
        if experiment == "ratio":
            vals = vals[~np.array(empties)]
        vals = vals[~np.isnan(vals)]
        rec = {"experiment": experiment, "model": key[0], "size": key[1], **pvals,
               "statistic": head, "count": len(grp)}
        if len(vals):
            rec.update(median=float(np.median(vals)), mean=float(np.mean(vals)),
                       p10=float(np.percentile(vals, 10)), p90=float(np.percentile(vals, 90)))
        else:
            rec.update(median=None, mean=None, p10=None, p90=None)
        rec["empty_fraction"] = float(np.mean(empties)) if grp and "empty_flag" in grp[0] else 0.0
        rec["target"] = theoretical_target(experiment, pvals)
        out_groups.append(rec)

    return {"experiment": experiment, "groups": out_groups, "trends": _trends(out_groups, params)}


def _trends(groups, params):
    ladders: dict[tuple, list[dict]] = {}
    for g in groups:
        ladders.setdefault((g["model"],) + tuple(g[p] for p in params), []).append(g)
    trends = []
    for key, ladder in sorted(ladders.items()):
        ladder = sorted(ladder, key=lambda g: g["size"])
        if len(ladder) < 2 or any(g["median"] is None for g in ladder):
            continue
        rec = {"model": key[0], **dict(zip(params, key[1:])),
               "sizes": [g["size"] for g in ladder]}
        target = ladder[0]["target"]
        if target is not None:
            err = [abs(g["median"] - target) for g in ladder]
            steps = [b <= a for a, b in zip(err, err[1:])]
            rec.update(abs_error=err, toward_target=all(steps),
                       majority_improving=sum(steps) > len(steps) / 2)
        else:
            med = [g["median"] for g in ladder]
            steps = [b > a for a, b in zip(med, med[1:])]
            rec.update(medians=med, increasing=all(steps),
                       majority_improving=sum(steps) > len(steps) / 2)
        trends.append(rec)
    return trends


def run(cfg: ExperimentConfig) -> dict:
    """Execute ``cfg``; write ``<experiment>.csv``, ``summary.json`` and ``manifest.json``."""
    t0 = time.perf_counter()
    rows = experiment_rows(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{cfg.experiment}.csv"
    write_csv(rows, csv_path, COLUMNS[cfg.experiment])
    summary = summarize(rows)
    (out / "summary.json").write_text(_dumps(summary), encoding="utf-8")
    manifest = {
        "config": asdict(cfg),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "row_counts": {cfg.experiment: len(rows)},
        "wall_seconds": time.perf_counter() - t0,
        "csv": str(csv_path),
    }
    (out / "manifest.json").write_text(_dumps(manifest), encoding="utf-8")
    return manifest


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, ensure_ascii=False) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj
