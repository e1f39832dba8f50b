"""Per-pair inference, dataset runs and run configuration."""
from __future__ import annotations

import configparser
import json
import logging
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from PIL import Image

from . import change, psa, rff
from .adapters import AdapterBundle, AdapterConfig, ImagePair, load_adapters
from .datasets import enumerate_dataset
from .errors import ConfigurationError, DegenerateInputError, SCMError
from .evaluation import EvalReport, accumulate, render

logger = logging.getLogger(__name__)

VARIANTS = ("base", "rff", "scm")


class TileError(SCMError):
    def __init__(self, tile_id, cause):
        super().__init__(f"tile {tile_id!r}: {type(cause).__name__}: {cause}")
        self.tile_id = tile_id
        self.cause = cause


@dataclass
class RunConfig:
    dataset: str = "levir"
    root: str | None = None
    variant: str = "scm"
    out: str = "scm-out"
    prompts: str | None = None
    threshold: float | None = None
    workers: int = 1
    recalibration: str = "raw-mean"
    interpolation: str = "bilinear"
    combine: str = "sum"
    template: str | None = psa.DEFAULT_TEMPLATE
    temperature: float = psa.DEFAULT_TEMPERATURE
    blank_patches: bool = False
    aggregation: str = "micro"
    adapter: AdapterConfig = field(default_factory=AdapterConfig)

    def validate(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.workers < 1:
            raise ConfigurationError("workers must be ≥ 1")
        if self.recalibration not in rff.RECALIBRATIONS:
            raise ConfigurationError(f"unknown recalibration {self.recalibration!r}")
        if self.interpolation not in rff.INTERPOLATIONS:
            raise ConfigurationError(f"unknown interpolation {self.interpolation!r}")
        if self.threshold is not None and not 0.0 <= self.threshold <= 2.0:
            raise ConfigurationError("threshold override must lie in [0, 2]")
        return self

    def load_prompts(self) -> psa.PromptGroups:
        return psa.PromptGroups.from_file(self.prompts) if self.prompts else psa.PromptGroups()

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        """Build a config from an INI file with ``[run]`` and ``[adapter]`` sections.

        Keys match the dataclass fields; ``strides``/``channels`` are
        comma-separated. Non-None ``overrides`` win over file values.
        """
        parser = configparser.ConfigParser()
        if not parser.read(path, encoding="utf-8"):
            raise ConfigurationError(f"cannot read config file {path}")
        run = dict(parser["run"]) if parser.has_section("run") else {}
        adapter = dict(parser["adapter"]) if parser.has_section("adapter") else {}
        unknown = set(run) - {f.name for f in fields(cls)} - {"adapter"}
        unknown |= set(adapter) - {f.name for f in fields(AdapterConfig)}
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls.from_mapping(run, adapter, **overrides)

    @classmethod
    def from_mapping(cls, run: dict, adapter: dict | None = None, **overrides) -> "RunConfig":
        """Build a config from string-valued mappings (as read from a file)."""
        kwargs = {k: _convert(k, v, _RUN_CONVERTERS) for k, v in run.items()}
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        a_kwargs = {k: _convert(k, v, _ADAPTER_CONVERTERS) for k, v in (adapter or {}).items()}
        kwargs["adapter"] = AdapterConfig(**{k: v for k, v in a_kwargs.items() if v is not None})
        return cls(**kwargs).validate()


def _flag(raw: str) -> bool:
    return raw.lower() in ("1", "true", "yes", "on")


def _ints(raw: str) -> tuple:
    return tuple(int(x) for x in raw.split(","))


_RUN_CONVERTERS = {"workers": int, "threshold": float, "temperature": float, "blank_patches": _flag}
_ADAPTER_CONVERTERS = {"seed": int, "strides": _ints, "channels": _ints}


def _convert(key, raw, converters):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    if raw == "":
        return None  # empty template means raw-term prompts, otherwise "unset"
    return converters.get(key, str)(raw)


def fused_features(pair: ImagePair, adapters: AdapterBundle, cfg: RunConfig):
    p1 = adapters.extractor.extract_pyramid(pair.t1)
    p2 = adapters.extractor.extract_pyramid(pair.t2)
    if cfg.variant == "base":
        return rff.fuse_base(p1, cfg.interpolation), rff.fuse_base(p2, cfg.interpolation)
    return (rff.fuse_top_down(p1, cfg.recalibration, cfg.interpolation),
            rff.fuse_top_down(p2, cfg.recalibration, cfg.interpolation))


def run_pair(pair: ImagePair, cfg: RunConfig, adapters: AdapterBundle | None = None):
    """Detect changes in one pair; returns ``(ChangeMap, diagnostics)``."""
    cfg.validate()
    try:
        if adapters is None:
            adapters = load_adapters(cfg.adapter, need_semantics=cfg.variant == "scm")
        c1, c2 = fused_features(pair, adapters, cfg)
        diff, zero_norm = change.cosine_difference(c1, c2, return_zero_count=True)
        diag = {
            "tile": pair.id,
            "variant": cfg.variant,
            "zero_norm_pixels": zero_norm,
            "mask_count": 0,
            "patch_count": 0,
        }
        if cfg.variant == "scm":
            attention = psa.build_psa(
                pair, adapters, cfg.load_prompts(), cfg.template, cfg.temperature,
                cfg.combine, cfg.blank_patches, stats=diag,
            )
            diff = change.apply_attention(diff, attention)
    except SCMError as exc:
        raise TileError(pair.id, exc) from exc

    if cfg.threshold is not None:
        threshold, source = cfg.threshold, "override"
    else:
        try:
            threshold, source = change.otsu_threshold(diff), "otsu"
        except DegenerateInputError as exc:
            logger.warning("tile %s: %s; emitting an all-zero change map", pair.id, exc)
            cmap = change.ChangeMap(np.zeros(diff.shape, np.uint8), 2.0)
            diag.update(threshold=cmap.threshold, threshold_source="degenerate", changed_pixels=0)
            return cmap, diag
    cmap = change.binarize(diff, threshold)
    diag.update(threshold=cmap.threshold, threshold_source=source,
                changed_pixels=int(cmap.values.sum()))
    return cmap, diag


def write_png(path, array):
    Image.fromarray(np.ascontiguousarray(array)).save(path, format="PNG")


_WORKER_ADAPTERS = None


def _init_worker(adapter_cfg, need_semantics):
    global _WORKER_ADAPTERS
    _WORKER_ADAPTERS = load_adapters(adapter_cfg, need_semantics)


def _run_in_worker(pair, cfg):
    try:
        cmap, diag = run_pair(pair, cfg, _WORKER_ADAPTERS)
        return cmap, diag, None
    except Exception as exc:  # reported back, the run goes on
        return None, None, f"{type(exc).__name__}: {exc}"


def run_dataset(cfg: RunConfig, adapters: AdapterBundle | None = None) -> EvalReport:
    """Run every pair of the configured dataset and persist maps and scores.

    Writes ``<id>_pred.png``, ``<id>_cmp.png`` and ``<id>_diag.json`` per
    tile plus ``report.json`` into ``cfg.out``; failed tiles are listed in
    ``failures.json`` and on ``report.failures``.
    """
    cfg.validate()
    if cfg.root is None:
        raise ConfigurationError("no dataset root configured")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    need_semantics = cfg.variant == "scm"

    report = EvalReport(mode=cfg.aggregation)
    items = enumerate_dataset(cfg.dataset, cfg.root)

    def consume(pair, gt, cmap, diag, error):
        if error is not None:
            logger.error("tile %s failed: %s", pair.id, error)
            report.failures.append({"id": pair.id, "error": error})
            return
        counts = accumulate(cmap, gt)
        report.add(pair.id, counts)
        write_png(out / f"{pair.id}_pred.png", cmap.values * 255)
        write_png(out / f"{pair.id}_cmp.png", render(cmap, gt))
        diag = dict(diag, tp=counts.tp, tn=counts.tn, fp=counts.fp, fn=counts.fn)
        (out / f"{pair.id}_diag.json").write_text(json.dumps(diag, indent=2) + "\n")

    if cfg.workers == 1:
        if adapters is None:
            adapters = load_adapters(cfg.adapter, need_semantics)
        for pair, gt in items:
            try:
                cmap, diag = run_pair(pair, cfg, adapters)
                consume(pair, gt, cmap, diag, None)
            except Exception as exc:
                consume(pair, gt, None, None, f"{type(exc).__name__}: {exc}")
    else:
        with ProcessPoolExecutor(cfg.workers, initializer=_init_worker,
                                 initargs=(cfg.adapter, need_semantics)) as pool:
            pending = deque()
            for pair, gt in items:
                pending.append((pair, gt, pool.submit(_run_in_worker, pair, cfg)))
                # bounded window keeps memory flat on large datasets
                while len(pending) > 2 * cfg.workers:
                    p, g, fut = pending.popleft()
                    consume(p, g, *fut.result())
            while pending:
                p, g, fut = pending.popleft()
                consume(p, g, *fut.result())

    if not report.per_tile and not report.failures:
        logger.warning("dataset %s at %s produced no pairs", cfg.dataset, cfg.root)
    report.write(out / "report.json")
    if report.failures:
        (out / "failures.json").write_text(json.dumps(report.failures, indent=2) + "\n")
    return report
