"""Command-line entry point: reproducible experiments with JSON/CSV reports.

Exit codes: 0 success, 2 budget exceeded, 3 invalid configuration.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import asdict, dataclass

import click
import numpy as np

from . import __version__
from .field_tower import make_field
from .pair_endo import ExtensionTooSmall, SubspacePair, canonical_flag, end_algebra, envelope, generic_subspace, rational_kernel
from .symplectic import BudgetError

SCHEMA = "relendo/1"
EXIT_BUDGET = 2
EXIT_CONFIG = 3


@dataclass
class RunConfig:
    prime: int = 2
    base_deg: int = 1
    ext_deg: int | None = None
    seed: int = 0
    budget: int = 10**7
    workers: int = 1
    out: str | None = None
    format: str = "json"


def _emit(cfg: RunConfig, command: str, params: dict, payload: dict, rows: list[dict] | None = None) -> None:
    if cfg.format == "csv":
        if rows is None:
            rows = [payload]
        buf = io.StringIO()
        cols = list(rows[0].keys()) if rows else []
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: json.dumps(v, sort_keys=True) if isinstance(v, (list, dict)) else v for k, v in r.items()})
        text = buf.getvalue()
    else:
        doc = {
            "schema": SCHEMA,
            "version": __version__,
            "command": command,
            "config": asdict(cfg),
            "params": params,
            "result": payload,
        }
        text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _parse_matrix(text: str, n: int, r: int) -> np.ndarray:
    """Rows separated by ';', entries by ',' as field codes."""
    rows = [[int(x) for x in row.split(",")] for row in text.split(";")]
    P = np.array(rows, dtype=object)
    if P.shape != (n, r):
        raise ValueError(f"point has shape {P.shape}, expected {(n, r)}")
    return P


_COMMON = [
    click.option("--prime", type=int, default=None, help="characteristic p [2]"),
    click.option("--base-deg", type=int, default=None, help="K = F_{p^d} [1]"),
    click.option("--ext-deg", type=int, default=None, help="coordinate field L = F_{p^e}"),
    click.option("--seed", type=int, default=None, help="[0]"),
    click.option("--budget", type=int, default=None, help="enumeration budget [10^7]"),
    click.option("--workers", type=int, default=None, help="[1]"),
    click.option("--out", type=click.Path(dir_okay=False), default=None),
    click.option("--format", "format", type=click.Choice(["json", "csv"]), default=None, help="[json]"),
]


def common_options(fn):
    """Config flags, accepted both before and after the subcommand."""
    for opt in reversed(_COMMON):
        fn = opt(fn)
    return fn


def _merge(cfg: RunConfig, values: dict) -> RunConfig:
    for k, v in values.items():
        if v is not None:
            setattr(cfg, k, v)
    if cfg.budget < 0 or cfg.workers < 1 or cfg.base_deg < 1 or cfg.prime < 2:
        raise click.UsageError("invalid prime, budget, workers or base degree")
    if cfg.format not in ("json", "csv"):
        raise click.UsageError(f"unknown format {cfg.format!r}")
    return cfg


def _pop_common(kwargs: dict) -> dict:
    return {k: kwargs.pop(k) for k in ("prime", "base_deg", "ext_deg", "seed", "budget", "workers", "out", "format")}


def configured(fn):
    """Merge subcommand-level flags into the group config and pass it first."""

    @common_options
    @click.pass_context
    def wrapper(ctx, **kwargs):
        cfg = _merge(ctx.obj, _pop_common(kwargs))
        return fn(cfg, **kwargs)

    wrapper.__doc__ = fn.__doc__
    wrapper.__name__ = fn.__name__
    return wrapper


@click.group()
@common_options
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), default=None, help="JSON file overriding flags")
@click.version_option(__version__, prog_name="relendo")
@click.pass_context
def cli(ctx, config_file, **kwargs):
    """Relative endomorphism algebras, strata, masses and the g = 4 check."""
    cfg = _merge(RunConfig(), kwargs)
    if config_file:
        with open(config_file) as fh:
            over = json.load(fh)
        if not isinstance(over, dict):
            raise click.UsageError("config file must hold a JSON object")
        over = {k.replace("-", "_"): v for k, v in over.items()}
        unknown = set(over) - set(asdict(cfg))
        if unknown:
            raise click.UsageError(f"unknown config keys {sorted(unknown)}")
        cfg = _merge(cfg, over)
    ctx.obj = cfg


@cli.command()
@click.option("--n", type=int, required=True)
@click.option("--r", type=int, required=True)
@click.option("--point", type=str, default=None, help="rows ';' entries ',' (codes in L); omit for a generic point")
@configured
def endo(cfg: RunConfig, n, r, point):
    """End(V0, W), W0, the rational envelope and the canonical flag."""
    K = make_field(cfg.prime, cfg.base_deg)
    if point is None:
        S = generic_subspace(n, r, K, cfg.ext_deg, seed=cfg.seed)
    else:
        if cfg.ext_deg is None:
            raise ValueError("--ext-deg is required with --point")
        L = make_field(cfg.prime, cfg.ext_deg)
        S = SubspacePair(n, r, K, L, _parse_matrix(point, n, r))
    E = end_algebra(S)
    flag = canonical_flag(S, E)
    payload = dict(S.to_json())
    payload.update(
        {
            "end_basis": E.to_json()["basis"],
            "dim": E.dim,
            "signature": list(E.signature),
            "W0": rational_kernel(S).tolist(),
            "envelope": envelope(S).tolist(),
            "flag_sizes": list(flag.sizes),
            "flag_ok": bool(flag.ok or flag.sizes[1] == 0 and flag.block_ok and flag.dim_ok),
        }
    )
    _emit(cfg, "endo", {"n": n, "r": r, "point": point}, payload)


@cli.command()
@click.option("--mode", type=click.Choice(["GL", "Sp"]), default="GL", show_default=True)
@click.option("--n", type=int, default=2, show_default=True)
@click.option("--r", type=int, default=1, show_default=True)
@configured
def strat(cfg: RunConfig, mode, n, r):
    """Stratify Gr(n, r) or the Lagrangian variety of K^{2r} over L."""
    from .strata import enumerate_grassmannian, enumerate_lagrangian, stratify

    K = make_field(cfg.prime, cfg.base_deg)
    e = cfg.ext_deg or 4 * cfg.base_deg
    L = make_field(cfg.prime, e)
    pts = enumerate_lagrangian(r, L, cfg.budget) if mode == "Sp" else enumerate_grassmannian(n, r, L, cfg.budget)
    res = stratify(list(pts), K, L, mode=mode, workers=cfg.workers)
    rows = [s.to_row(L) for s in res.strata]
    payload = {
        "strata": rows,
        "total": res.total,
        "coarse": res.coarse,
        "closure_ok": res.closure_ok,
        "collisions": [list(c) for c in res.collisions],
    }
    _emit(cfg, "strat", {"mode": mode, "n": 2 * r if mode == "Sp" else n, "r": r}, payload, rows)


@cli.command()
@click.option("--g", type=int, required=True)
@click.option("--c", type=int, default=0, show_default=True)
@click.option("--index", type=int, default=None, help="explicit index; overrides --stratum")
@click.option("--stratum", type=click.Choice(["superspecial", "maximal"]), default=None)
@configured
def mass(cfg: RunConfig, g, c, index, stratum):
    """Mass of a lattice or of an EO-type stratum."""
    from .mass import mass_lambda, mass_stratum
    from .pair_endo import _algebra_from_vectors

    p = cfg.prime
    if index is not None or stratum is None:
        mv = mass_lambda(g, p, c, index or 1)
    else:
        K = make_field(p, 2)
        n = 2 * c
        vecs = np.eye(n * n, dtype=np.int64) if stratum == "superspecial" else np.eye(n, dtype=np.int64).reshape(1, n * n)
        E = _algebra_from_vectors(K, n, vecs) if n else None
        mv = mass_stratum(g, p, c, E, cfg.budget)
    row = {"g": g, "p": p, "c": c, "stratum": stratum or "", **mv.to_json()}
    _emit(cfg, "mass", {"g": g, "c": c, "index": index, "stratum": stratum}, row, [row])


@cli.command()
@click.option("--n", type=int, default=1, show_default=True)
@click.option("--s", type=int, required=True)
@click.option("--trials", type=int, default=1000, show_default=True)
@click.option("--exhaustive/--no-exhaustive", default=False)
@configured
def torsion(cfg: RunConfig, n, s, trials, exhaustive):
    """Torsion in 1 + Pi^s Mat_n(O_p)."""
    from .quaternion_dieudonne import torsion_probe

    rep = torsion_probe(cfg.prime, n, s, trials, cfg.seed, exhaustive)
    payload = rep.to_json()
    payload["summary"] = f"torsion: {rep.torsion_element}" if rep.torsion_element else "torsion-free"
    _emit(cfg, "torsion", {"n": n, "s": s, "trials": trials}, payload)


@cli.command()
@click.option("--attempts", type=int, default=50, show_default=True)
@configured
def g4(cfg: RunConfig, attempts):
    """Aut = {+-1} certificate at a random generic g = 4 chain."""
    from .quaternion_dieudonne import verify_g4

    e = cfg.ext_deg or 94
    cert = verify_g4(cfg.prime, e, cfg.seed, attempts)
    _emit(cfg, "g4", {"attempts": attempts}, cert.to_json())


@cli.command()
@click.option("--g", type=int, required=True)
@configured
def eo(cfg: RunConfig, g):
    """Elementary sequences, the supersingular ones and phi_max."""
    from .strata import eo_sequences

    d = eo_sequences(g)
    rows = [
        {"phi": list(s.values), "dim": s.size, "supersingular": s.is_supersingular(), "c": s.c}
        for s in d.phi
    ]
    payload = {
        "g": g,
        "count": len(d.phi),
        "count_ss": len(d.phi_ss),
        "phi_max": list(d.phi_max.values),
        "phi_max_dim": d.phi_max.size,
        "sequences": rows,
    }
    _emit(cfg, "eo", {"g": g}, payload, rows)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except BudgetError as exc:
        click.echo(f"budget exceeded: {exc}", err=True)
        return EXIT_BUDGET
    except (click.UsageError, click.BadParameter) as exc:
        click.echo(f"invalid configuration: {exc.format_message()}", err=True)
        return EXIT_CONFIG
    except (ValueError, ExtensionTooSmall) as exc:
        click.echo(f"invalid configuration: {exc}", err=True)
        return EXIT_CONFIG
    except click.exceptions.Abort:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
