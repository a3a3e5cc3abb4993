"""Flat-file persistence: chain CSVs with JSON sidecars, report CSVs."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .gibbs import PosteriorChain
from .quantile import quantile_constants


def write_chain_csv(path, chain: PosteriorChain) -> None:
    """One row per retained draw: index, sigma, coefficients, model size."""
    path = Path(path)
    k = chain.K
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["draw", "sigma"] + [f"beta_{j + 1}" for j in range(k)]
                        + ["model_size"])
        for s in range(chain.S):
            size = "" if chain.model_size_draws is None else int(chain.model_size_draws[s])
            writer.writerow([s, repr(float(chain.sigma_draws[s]))]
                            + [repr(float(v)) for v in chain.beta_draws[s]]
                            + [size])
    meta = dict(chain.meta)
    meta["quantile"] = chain.quantile.p
    with path.with_suffix(".meta.json").open("w") as fh:
        json.dump(_jsonable(meta), fh, indent=2, sort_keys=True)


def read_chain_csv(path) -> PosteriorChain:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    k = len(header) - 3
    sigma = np.asarray([float(r[1]) for r in rows])
    beta = np.asarray([[float(v) for v in r[2:2 + k]] for r in rows])
    sizes = None
    if rows and rows[0][-1] != "":
        sizes = np.asarray([int(r[-1]) for r in rows], dtype=np.int64)
    with path.with_suffix(".meta.json").open() as fh:
        meta = json.load(fh)
    q = quantile_constants(meta["quantile"])
    return PosteriorChain(beta, sigma, sizes, q, meta)


def write_table_csv(path, header: list[str], rows: list[list]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])


def _format_cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj
