"""Batch command-line front end.

Every subcommand reads one JSON config (``--config``), applies flag
overrides, validates, runs and writes a table.  ``--out`` ending in
``.json`` produces ``{"config": ..., "rows": [...]}``; anything else (or
stdout) produces CSV with a header row.

Exit codes: 0 success, 2 invalid input, 3 a ``--verify`` check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .coalg import generated_subcoalgebra, invariance_defect
from .exceptions import NCProbError
from .fock import BinGrid, Triplet, _complex_array, fock_moments, gaussian_triplet, random_triplet, triplet_functional
from .functional import (
    MomentFunctional,
    clt_functional,
    conv_exp,
    counit_functional,
    cumulant_functional,
    gaussian_moments,
)
from .ncpoly import Alphabet, NCPolynomial, Word, words_up_to
from .positivity import schoenberg_verify
from .qsde import (
    DEFAULT_BINS,
    DEFAULT_CUTOFF,
    DRIFT_MODES,
    QSDEModel,
    UnitaryProcessState,
    bgw_relation_defect,
    co_unitarity_defect,
    integrate,
    random_model,
    unitarity_defect,
    vacuum_error,
)

EXIT_OK, EXIT_INVALID, EXIT_TOLERANCE = 0, 2, 3


class ConfigError(ValueError):
    pass


Rows = List[Dict[str, object]]


# ---------------------------------------------------------------------------
# config helpers


def _matrix(x, name: str) -> np.ndarray:
    a = np.asarray(x)
    if a.dtype.kind in "USO":
        return _complex_array(x, a.shape)
    if a.ndim == 2:
        return _complex_array(x, a.shape)
    if a.ndim == 3 and a.shape[-1] == 2:
        return _complex_array(x, a.shape[:2])
    raise ConfigError(f"{name} must be a square matrix of numbers or [re, im] pairs")


def _covariance(cfg: dict) -> np.ndarray:
    if "Q" not in cfg:
        raise ConfigError("config needs a covariance 'Q'")
    Q = _matrix(cfg["Q"], "Q")
    if Q.shape[0] != Q.shape[1]:
        raise ConfigError("Q must be square")
    if np.max(np.abs(Q - Q.conj().T)) > 1e-12:
        raise ConfigError("Q must be hermitian")
    return Q


def _words(A: Alphabet, cfg: dict, degree: int) -> List[Word]:
    if "words" in cfg:
        return [A.parse_word(w) for w in cfg["words"]]
    return list(words_up_to(A, degree))


def _complex_cols(prefix: str, z: complex) -> Dict[str, float]:
    z = complex(z)
    return {f"{prefix}re": z.real, f"{prefix}im": z.imag}


def _degree(cfg: dict, default: int) -> int:
    n = int(cfg.get("degree", default))
    if n < 0:
        raise ConfigError("degree must be non-negative")
    return n


# ---------------------------------------------------------------------------
# subcommands: each returns (rows, passed)


def cmd_moments(cfg: dict) -> Tuple[Rows, bool]:
    """Gaussian moments and cumulants on words."""
    Q = _covariance(cfg)
    A = Alphabet.self_adjoint(Q.shape[0])
    words = _words(A, cfg, _degree(cfg, 4))
    N = max((len(w) for w in words), default=0)
    gamma = gaussian_moments(Q, N)
    g = cumulant_functional(Q, N)
    series = conv_exp(g)
    tol = float(cfg.get("tol", 1e-10))
    rows, ok = [], True
    for w in words:
        err = abs(gamma.value(w) - series.value(w))
        ok &= err <= tol
        rows.append({"word": A.word_name(w), **_complex_cols("", gamma.value(w)),
                     **_complex_cols("cumulant_", g.value(w)), "series_err": err})
    return rows, ok


def _clt_phi(cfg: dict, N: int) -> Tuple[MomentFunctional, MomentFunctional]:
    """The functional being iterated and its Gaussian limit."""
    kind = cfg.get("phi", "bernoulli")
    if kind == "bernoulli":
        A = Alphabet.self_adjoint(1)
        phi = MomentFunctional.from_function(A, N, lambda w: 1.0 if len(w) % 2 == 0 else 0.0)
        return phi, gaussian_moments(np.eye(1), N)
    if kind == "delta_plus_cumulant":
        Q = _covariance(cfg)
        g = cumulant_functional(Q, N)
        return counit_functional(g.alphabet, N) + g, gaussian_moments(Q, N)
    raise ConfigError("phi must be 'bernoulli' or 'delta_plus_cumulant'")


def cmd_clt(cfg: dict) -> Tuple[Rows, bool]:
    """Central limit sweep over a doubling schedule of ``n``."""
    N = _degree(cfg, 4)
    phi, limit = _clt_phi(cfg, N)
    words = _words(phi.alphabet, cfg, N)
    N = max((len(w) for w in words), default=0)
    schedule = cfg.get("n_schedule")
    if schedule is None:
        schedule = [2 ** k for k in range(int(cfg.get("log2_n_max", 10)) + 1)]
    if any(int(n) < 1 for n in schedule):
        raise ConfigError("n_schedule entries must be positive")
    tol = float(cfg.get("tol", 0.01))
    rows, last_err = [], math.inf
    for n in schedule:
        val = clt_functional(phi.truncate(N), int(n))
        err_n = 0.0
        for w in words:
            err = abs(val.value(w) - limit.value(w))
            err_n = max(err_n, err)
            rows.append({"n": int(n), "word": phi.alphabet.word_name(w), **_complex_cols("", val.value(w)),
                         **_complex_cols("limit_", limit.value(w)), "abs_err": err})
        last_err = err_n
    return rows, last_err <= tol


def _generator(cfg: dict, N: int):
    if "triplet" in cfg:
        T = Triplet.from_json(cfg["triplet"])
        return triplet_functional(T, N), T
    if "Q" in cfg:
        Q = _covariance(cfg)
        g = cumulant_functional(Q, N)
        try:
            T = gaussian_triplet(Q)
        except ValueError:
            T = None  # not PSD: no Fock realization, but still a valid functional
        return g, T
    if "random_triplet" in cfg:
        r = cfg["random_triplet"]
        rng = np.random.default_rng(int(cfg.get("seed", 0)))
        T = random_triplet(int(r.get("d", 2)), int(r.get("h", 2)), rng, float(r.get("scale", 1.0)))
        return triplet_functional(T, N), T
    raise ConfigError("config needs 'Q', 'triplet' or 'random_triplet'")


def cmd_positivity(cfg: dict) -> Tuple[Rows, bool]:
    """Positivity of ``exp_⋆(tψ)`` for each ``t``."""
    K = int(cfg.get("K", cfg.get("degree", 2)))
    psi, _ = _generator(cfg, 2 * K)
    ts = [float(t) for t in cfg.get("t", [0.0, 0.5, 1.0, 2.0])]
    if any(t < 0 for t in ts):
        raise ConfigError("t values must be non-negative")
    reports = schoenberg_verify(psi, ts, K, float(cfg.get("tol", 1e-9)))
    rows = [r.to_json() for r in reports]
    return rows, all(r.is_psd for r in reports)


def _grid(cfg: dict, default_t: float) -> BinGrid:
    g = cfg.get("grid", {"t_max": default_t, "n_bins": 4})
    return BinGrid.from_json(g)


def cmd_fock(cfg: dict) -> Tuple[Rows, bool]:
    """Fock vacuum moments against the convolution-exponential oracle."""
    N = _degree(cfg, 4)
    psi, T = _generator(cfg, N)
    if T is None:
        raise ConfigError("covariance is not PSD: no Fock realization")
    ts = [float(t) for t in cfg.get("t", [1.0])]
    grid = _grid(cfg, max(ts))
    cutoff = int(cfg.get("cutoff", N))
    words = _words(psi.alphabet, cfg, N)
    tol = float(cfg.get("tol", 1e-9))
    rows, ok = [], True
    for t in ts:
        fm = fock_moments(T, t, grid, N, cutoff)
        oracle = conv_exp(t * psi)
        for w in words:
            err = abs(fm.value(w) - oracle.value(w))
            ok &= err <= tol
            rows.append({"word": psi.alphabet.word_name(w), "t": t, **_complex_cols("", fm.value(w)),
                         **_complex_cols("oracle_", oracle.value(w)), "abs_err": err})
    return rows, ok


def _model(cfg: dict) -> QSDEModel:
    if "random" in cfg:
        r = cfg["random"]
        rng = np.random.default_rng(int(cfg.get("seed", 0)))
        return random_model(int(r.get("d", 2)), int(r.get("h", 2)), rng, float(r.get("scale", 1.0)),
                            identity_W=bool(r.get("identity_W", False)))
    obj = cfg.get("model", cfg)
    if "L" not in obj:
        raise ConfigError("config needs a model (d, h, L, W, D) or 'random'")
    return QSDEModel.from_json(obj)


def cmd_qsde(cfg: dict) -> Tuple[Rows, bool]:
    """Integrate over a schedule of grids; defects and vacuum error per checkpoint."""
    model = _model(cfg)
    drift = cfg.get("drift", "consistent")
    if drift not in DRIFT_MODES:
        raise ConfigError(f"drift must be one of {DRIFT_MODES}")
    method = cfg.get("method", "euler")
    base = BinGrid.from_json(cfg.get("grid", {"t_max": 1.0, "n_bins": DEFAULT_BINS}))
    schedule = [int(n) for n in cfg.get("n_bins_schedule", [base.n_bins])]
    n_ck = int(cfg.get("checkpoints", 4))
    cutoff = int(cfg.get("cutoff", DEFAULT_CUTOFF))
    n_two = int(cfg.get("two_particle_probes", 32))
    seed = int(cfg.get("seed", 0))
    tol = float(cfg.get("tol", math.inf))
    rows, final_err = [], 0.0
    for n_bins in schedule:
        if n_bins % n_ck:
            raise ConfigError(f"n_bins={n_bins} is not divisible into {n_ck} checkpoints")
        grid = BinGrid(base.t_max, n_bins)
        state = UnitaryProcessState.initial(grid, model.d, model.h, cutoff)
        for _ in range(n_ck):
            state = integrate(model, grid, method, cutoff, drift, n_bins // n_ck, state)
            u = unitarity_defect(state, n_two, seed)
            c = co_unitarity_defect(state, n_two, seed)
            final_err = vacuum_error(state, model, drift)
            rows.append({"n_bins": n_bins, "t": state.time, "unitarity_defect": u,
                         "bgw_defect": max(u, c), "max_vacuum_error": final_err})
    return rows, final_err <= tol


def cmd_subcoalgebra(cfg: dict) -> Tuple[Rows, bool]:
    """Dimension and Δ-invariance of generated subcoalgebras."""
    A = Alphabet.from_json(cfg.get("alphabet", {"kind": "selfadjoint", "d": 2}))
    groups = cfg.get("elements", [])
    if not groups:
        raise ConfigError("config needs a non-empty 'elements' list")
    tol = float(cfg.get("tol", 1e-10))
    rows, ok = [], True
    for g in groups:
        items = g if isinstance(g, list) else [g]
        polys = [_poly(A, p) for p in items]
        basis = generated_subcoalgebra(polys if len(polys) > 1 else polys[0])
        inv = invariance_defect(basis)
        ok &= inv <= tol
        rows.append({"elements": " ; ".join(str(p) if isinstance(p, str) else "poly" for p in items),
                     "dimension": len(basis), "invariance_defect": inv})
    return rows, ok


def _poly(A: Alphabet, entry) -> NCPolynomial:
    if isinstance(entry, str):
        return NCPolynomial.parse(A, entry)
    return NCPolynomial.from_json({"alphabet": A.to_json(), "terms": entry["terms"]})


COMMANDS: Dict[str, Callable[[dict], Tuple[Rows, bool]]] = {
    "moments": cmd_moments,
    "clt": cmd_clt,
    "positivity": cmd_positivity,
    "fock-moments": cmd_fock,
    "qsde": cmd_qsde,
    "subcoalgebra": cmd_subcoalgebra,
}


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def render_csv(rows: Rows) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    writer = csv.writer(buf, lineterminator="\n")
    header = list(rows[0])
    writer.writerow(header)
    for r in rows:
        writer.writerow([_fmt(r.get(k)) for k in header])
    return buf.getvalue()


def render_json(cfg: dict, rows: Rows, passed: bool) -> str:
    return json.dumps({"config": cfg, "passed": passed, "rows": rows}, indent=2, sort_keys=True) + "\n"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ncprob", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", help="output path (.json for JSON, otherwise CSV); default stdout")
    p.add_argument("--seed", type=int, help="seed for randomized cases")
    p.add_argument("--degree", type=int, help="maximal word degree (or K for positivity)")
    p.add_argument("--drift", choices=DRIFT_MODES, help="drift convention for qsde")
    p.add_argument("--verify", action="store_true", help="exit 3 when a tolerance check fails")
    return p


def resolve_config(args: argparse.Namespace) -> dict:
    cfg: dict = {}
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.degree is not None:
        cfg["K" if args.command == "positivity" else "degree"] = args.degree
    if args.drift is not None:
        cfg["drift"] = args.drift
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        rows, passed = COMMANDS[args.command](cfg)
    except (ConfigError, NCProbError, ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    text = render_json(cfg, rows, passed) if args.out and args.out.endswith(".json") else render_csv(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.verify and not passed:
        print("verification failed", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
