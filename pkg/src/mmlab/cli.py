"""Command-line front end.

Every subcommand reads a JSON config, writes its data files into ``--out``
and finishes with ``manifest.json`` (config echo, seed, version, wall time
and SHA-256 digests of the outputs).  Progress goes to stderr; stdout gets
one summary line.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import acceptance, gas, maps, sampler
from . import equilibrium as eq
from ._backend import BACKEND
from .ncpoly import NCPolynomial, is_self_adjoint
from .trapping import classify_confining

EXIT_FAIL = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    """Schema violation; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------------------
# config parsing


def _get(d: dict, key: str, path: str, kind: type | tuple[type, ...] | None = None, default: Any = ...):
    if not isinstance(d, dict):
        raise ConfigError(path or "<root>", "expected an object")
    full = f"{path}.{key}" if path else key
    if key not in d:
        if default is ...:
            raise ConfigError(full, "missing required field")
        return default
    v = d[key]
    if kind is not None and not isinstance(v, kind):
        names = kind.__name__ if isinstance(kind, type) else " or ".join(k.__name__ for k in kind)
        raise ConfigError(full, f"expected {names}, got {type(v).__name__}")
    return v


def _number(d: dict, key: str, path: str, default: Any = ...) -> float:
    v = _get(d, key, path, (int, float), default)
    if isinstance(v, bool):
        raise ConfigError(f"{path}.{key}" if path else key, "expected a number")
    return v if v is None else float(v)


def parse_polynomial(data: Any, nvars: int, path: str) -> NCPolynomial:
    """A polynomial given as a string (``"0.5*X1^2 - X1 X2"``) or as
    ``{"alphabet_size": l, "terms": [{"coeff": c or [re, im], "word": [...]}]}``."""
    if isinstance(data, str):
        try:
            return NCPolynomial.parse(data, nvars)
        except ValueError as e:
            raise ConfigError(path, str(e)) from None
    if isinstance(data, dict):
        data = dict(data)
        data.setdefault("alphabet_size", nvars)
        if data["alphabet_size"] != nvars:
            raise ConfigError(f"{path}.alphabet_size", f"expected {nvars}, got {data['alphabet_size']}")
        terms = _get(data, "terms", path, list)
        for k, t in enumerate(terms):
            tp = f"{path}.terms[{k}]"
            c = _get(t, "coeff", tp, (int, float, list))
            if isinstance(c, list) and (len(c) != 2 or not all(isinstance(x, (int, float)) for x in c)):
                raise ConfigError(f"{tp}.coeff", "complex coefficients are written [re, im]")
            w = _get(t, "word", tp, list)
            if any(not isinstance(i, int) or not 1 <= i <= nvars for i in w):
                raise ConfigError(f"{tp}.word", f"letters must be integers in 1..{nvars}")
        return NCPolynomial.from_json(data)
    raise ConfigError(path, "expected a string or an object with 'terms'")


def _self_adjoint(P: NCPolynomial, path: str) -> NCPolynomial:
    if not is_self_adjoint(P, 1e-12):
        raise ConfigError(path, "potential is not self-adjoint (coefficients must be conjugate under word reversal)")
    return P


def parse_model(cfg: dict, unsafe_allow: bool = False) -> sampler.ModelSpec:
    m = _get(cfg, "model", "", dict)
    nvars = _get(m, "alphabet_size", "model", int)
    if nvars < 1:
        raise ConfigError("model.alphabet_size", "must be >= 1")
    n = _get(m, "n", "model", int)
    beta = _number(m, "beta", "model", 1.0)
    U = _self_adjoint(parse_polynomial(_get(m, "U", "model", default=NCPolynomial.zero(nvars).to_json()),
                                       nvars, "model.U"), "model.U")
    W = _self_adjoint(parse_polynomial(_get(m, "W", "model"), nvars, "model.W"), "model.W")
    rep = classify_confining((beta * U + W).cyclic_symmetrized())
    if not rep.confining and not unsafe_allow:
        raise ConfigError("model", f"integrability not certified ({rep.reason}); pass --unsafe-allow to run anyway")
    try:
        return sampler.ModelSpec(nvars, n, U, W, beta)
    except ValueError as e:
        raise ConfigError("model", str(e)) from None


def parse_chain(cfg: dict, seed: int | None, threads: int,
                overrides: dict | None = None) -> sampler.ChainConfig:
    c = dict(_get(cfg, "chain", "", dict, {}))
    c.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = set(sampler.ChainConfig.__dataclass_fields__) - {"threads"}
    for k in c:
        if k not in known:
            raise ConfigError(f"chain.{k}", "unknown field")
    kw = dict(c)
    if seed is not None:
        kw["seed"] = seed
    try:
        return sampler.ChainConfig(**kw, threads=threads)
    except (TypeError, ValueError) as e:
        raise ConfigError("chain", str(e)) from None


def parse_potential(p: dict, path: str) -> gas.Potential:
    if "coefficients" in p:
        coeffs = _get(p, "coefficients", path, list)
        if not all(isinstance(x, (int, float)) for x in coeffs):
            raise ConfigError(f"{path}.coefficients", "expected real numbers")
        return gas.Potential.polynomial(coeffs)
    if "polynomial" in p:
        P = _self_adjoint(parse_polynomial(p["polynomial"], 1, f"{path}.polynomial"), f"{path}.polynomial")
        try:
            return gas.Potential.from_ncpoly(P)
        except ValueError as e:
            raise ConfigError(f"{path}.polynomial", str(e)) from None
    if "wells" in p:
        wells = []
        for k, w in enumerate(_get(p, "wells", path, list)):
            wp = f"{path}.wells[{k}]"
            try:
                wells.append(gas.WellSpec(_number(w, "center", wp), _number(w, "c", wp),
                                          int(_number(w, "p", wp, 1))))
            except ValueError as e:
                raise ConfigError(wp, str(e)) from None
        try:
            return gas.Potential.from_wells(wells)
        except ValueError as e:
            raise ConfigError(f"{path}.wells", str(e)) from None
    raise ConfigError(path, "needs one of 'coefficients', 'polynomial' or 'wells'")


def parse_gas(cfg: dict, seed: int | None) -> gas.GasConfig:
    pot = parse_potential(_get(cfg, "potential", "", dict), "potential")
    if not pot.confining:
        raise ConfigError("potential", "not confining (need even degree and positive leading coefficient)")
    kw: dict[str, Any] = {
        "n": _get(cfg, "n", "", int),
        "beta": _number(cfg, "beta", ""),
        "potential": pot,
    }
    for key in ("gamma", "width", "hop_prob"):
        if key in cfg:
            kw[key] = _number(cfg, key, "")
    for key in ("sweeps", "burn_in", "thin", "seed"):
        if key in cfg:
            kw[key] = _get(cfg, key, "", int)
    if "law" in cfg:
        kw["law"] = _get(cfg, "law", "", str)
    if "adapt" in cfg:
        kw["adapt"] = _get(cfg, "adapt", "", bool)
    if seed is not None:
        kw["seed"] = seed
    try:
        config = gas.GasConfig(**kw)
        config.wells  # noqa: B018 - validates well extraction early
    except ValueError as e:
        raise ConfigError("<root>", str(e)) from None
    return config


# ---------------------------------------------------------------------------
# output and manifest


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    version: str
    backend: str
    wall_time: float = 0.0
    outputs: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "backend": self.backend,
            "wall_time": self.wall_time,
            "outputs": self.outputs,
        }


class RunDir:
    """Single owner of the files written by one command."""

    def __init__(self, out: Path, manifest: RunManifest):
        self.out = out
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = manifest
        self._t0 = time.perf_counter()

    def json(self, name: str, data: Any) -> Path:
        path = self.out / name
        path.write_text(json.dumps(acceptance._jsonable(data), indent=2, sort_keys=True) + "\n")
        self.manifest.outputs[name] = _sha256(path)
        return path

    def csv(self, name: str, header: list[str], rows) -> Path:
        path = self.out / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
        self.manifest.outputs[name] = _sha256(path)
        return path

    def close(self) -> Path:
        self.manifest.wall_time = time.perf_counter() - self._t0
        path = self.out / "manifest.json"
        path.write_text(json.dumps(self.manifest.to_json(), indent=2, sort_keys=True) + "\n")
        return path


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("MMLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("MMLAB_THREADS", f"expected an integer, got {env!r}") from None
    return 1


def _load_any(path: str) -> Any:
    p = Path(path)
    if not p.is_file():
        raise ConfigError("<file>", f"{path} does not exist")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError("<file>", f"invalid JSON: {e}") from None


def _load(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError("<file>", f"{path} does not exist")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError("<file>", f"invalid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a JSON object")
    return data


# ---------------------------------------------------------------------------
# subcommands


def _moment_rows(s: sampler.SampleSet):
    for j, w in enumerate(s.words):
        est = sampler.estimate(s.traces[:, j], s.chain)
        yield ["".join(f"X{i}" for i in w) or "1", est.value.real, est.value.imag, est.stderr, est.ess]


def _spectrum_histogram(run: RunDir, s: sampler.SampleSet, bins: int) -> None:
    rows = []
    for i in range(s.spec.nvars):
        counts, edges = np.histogram(s.spectra[:, i, :], bins=bins)
        for k, c in enumerate(counts):
            rows.append([i + 1, edges[k], edges[k + 1], int(c)])
    run.csv("histogram.csv", ["letter", "left", "right", "count"], rows)


def cmd_sample_matrix(args, run: RunDir, cfg: dict) -> tuple[str, bool]:
    spec = parse_model(cfg, args.unsafe_allow)
    chain = parse_chain(cfg, args.seed, _threads(args), {"chains": args.chains, "samples": args.samples})
    _progress(f"sampling {spec.nvars} matrices of size {spec.n} at beta={spec.beta:g}")
    s = sampler.sample(spec, chain)
    run.csv("moments.csv", ["word", "mean_re", "mean_im", "stderr", "ess"], _moment_rows(s))
    _spectrum_histogram(run, s, int(cfg.get("bins", 60)))
    run.json("diagnostics.json", {
        "samples": len(s),
        "acceptance": s.acceptance,
        "acceptance_ok": s.acceptance_ok(),
        "steps": s.steps,
        "reflect_acceptance": s.reflect_acceptance,
        "max_operator_norm": float(s.operator_norms().max()),
    })
    return f"sample-matrix: {len(s)} samples, acceptance {s.acceptance.mean():.3f}", True


def cmd_ds_check(args, run: RunDir, cfg: dict) -> tuple[str, bool]:
    spec = parse_model(cfg, args.unsafe_allow)
    chain = parse_chain(cfg, args.seed, _threads(args))
    tests = cfg.get("tests")
    if tests is None:
        budget = chain.moment_degree - max(spec.V.D(i).degree for i in range(1, spec.nvars + 1))
        if budget < 0:
            raise ConfigError("chain.moment_degree", "too small for the potential's cyclic gradient")
        Ps = [NCPolynomial.monomial(w, spec.nvars) for w in _all_words(spec.nvars, budget)]
    else:
        if not isinstance(tests, list):
            raise ConfigError("tests", "expected a list of polynomials")
        Ps = [parse_polynomial(t, spec.nvars, f"tests[{k}]") for k, t in enumerate(tests)]
    s = sampler.sample(spec, chain)
    rows = []
    worst = 0.0
    for P in Ps:
        for i in range(1, spec.nvars + 1):
            try:
                r = sampler.ds_residual(s, P, i)
            except ValueError as e:
                raise ConfigError("tests", str(e)) from None
            z = abs(r.value) / r.stderr if r.stderr > 0 else (0.0 if abs(r.value) < 1e-12 else math.inf)
            worst = max(worst, z)
            rows.append({"P": repr(P), "i": i, "residual": r.value, "stderr": r.stderr, "z": z,
                         "within_3_stderr": r.within(3.0)})
    ok = all(r["within_3_stderr"] for r in rows)
    run.json("result.json", {"residuals": rows, "passed": ok, "samples": len(s)})
    return f"ds-check: {len(rows)} residuals, max |r|/stderr {worst:.2f}, {'PASS' if ok else 'FAIL'}", ok


def _all_words(nvars: int, degree: int):
    yield ()
    frontier = [()]
    for _ in range(degree):
        frontier = [w + (i,) for w in frontier for i in range(1, nvars + 1)]
        yield from frontier


def cmd_gas(args, run: RunDir, cfg: dict) -> tuple[str, bool]:
    for key in ("beta", "n", "sweeps"):
        if getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    config = parse_gas(cfg, args.seed)
    replicas = int(cfg.get("replicas", 1))
    runs = gas.run_replicas(config, replicas, _threads(args), progress=_progress)
    samples = np.concatenate([r.samples for r in runs])
    wells = config.wells
    gaps = np.diff([w.center for w in wells])
    eps = float(cfg.get("window", 0.25 * gaps.min() if len(gaps) else 1.0))
    try:
        frac = gas.filling_fractions(samples, wells, eps)
    except ValueError as e:
        raise ConfigError("window", str(e)) from None
    pred = gas.predicted_fractions(wells)
    counts, edges = gas.histogram(samples, int(cfg.get("bins", 80)))
    run.csv("histogram.csv", ["left", "right", "count"],
            ([edges[k], edges[k + 1], int(c)] for k, c in enumerate(counts)))
    run.json("fractions.json", {
        "wells": [{"center": w.center, "c": w.c, "p": w.p} for w in wells],
        "window": eps,
        "measured": frac,
        "predicted": pred,
    })
    rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(1)[0])
    gamma = config.commutator_coefficient
    scale = gas.y_norm_scale(config.beta, max(w.p for w in wells))
    stride = max(1, len(samples) // int(cfg.get("y_samples", 200)))
    yrows = []
    for k in range(0, len(samples), stride):
        Y = gas.reconstruct_Y(samples[k], gamma, rng)
        nrm = float(np.abs(np.linalg.eigvalsh(Y)).max())
        yrows.append([k, nrm, nrm / scale])
    run.csv("y_norms.csv", ["sample", "norm", "norm_over_scale"], yrows)
    run.json("diagnostics.json", {
        "replicas": [{"acceptance": r.acceptance, "hop_acceptance": r.hop_acceptance,
                      "scale": r.scale, "max_energy_drift": r.max_energy_drift,
                      "acceptance_ok": r.acceptance_ok} for r in runs],
        "backend": runs[0].backend,
    })
    return f"gas: fractions {np.round(frac, 4).tolist()} (predicted {np.round(pred, 4).tolist()})", True


def cmd_equilibrium(args, run: RunDir, cfg: dict) -> tuple[str, bool]:
    pot = cfg.get("potential")
    V: Callable | None = None
    if pot is not None:
        V = parse_potential(_get(cfg, "potential", "", dict), "potential")
    interval = _get(cfg, "interval", "", list)
    if len(interval) != 2 or not all(isinstance(x, (int, float)) for x in interval):
        raise ConfigError("interval", "expected [a, b]")
    a, b = map(float, interval)
    if b <= a:
        raise ConfigError("interval", "need a < b")
    m = _get(cfg, "cells", "", int)
    kind = _get(cfg, "kernel", "", str, "neg_log")
    if kind not in ("neg_log", "mod_log"):
        raise ConfigError("kernel", "expected 'neg_log' or 'mod_log'")
    beta = _number(cfg, "beta", "", None)
    if kind == "mod_log" and beta is None:
        raise ConfigError("beta", "mod_log kernel needs beta")
    pw = _number(cfg, "pair_weight", "", 1.0)
    _progress(f"equilibrium: {m} cells on [{a}, {b}], kernel {kind}")
    res = eq.minimize(V, a, b, m, kind, beta, pair_weight=pw)
    mu = res.measure
    run.csv("density.csv", ["x", "density", "weight"], zip(mu.centers, mu.density, mu.weights))
    lo, hi = mu.support()
    run.json("result.json", {
        "energy": res.energy,
        "iterations": res.iterations,
        "converged": res.converged,
        "kkt_residual": res.kkt_residual,
        "support": [lo, hi],
        "mean": mu.moment(1),
        "second_moment": mu.moment(2),
    })
    return f"equilibrium: energy {res.energy:.10g}, converged {res.converged}", True


def _parse_word(text: str, nvars: int, path: str) -> list[int]:
    """``"1 1 2"``, ``"1,1,2"`` or ``"X1X1X2"``."""
    t = text.replace("X", " ").replace(",", " ").split()
    try:
        w = [int(v) for v in t]
    except ValueError:
        raise ConfigError(path, f"cannot read word {text!r}") from None
    if not w or any(not 1 <= i <= nvars for i in w):
        raise ConfigError(path, f"letters must be integers in 1..{nvars}")
    return w


def _parse_couplings(data: Any, nvars: int, path: str) -> list[maps.Coupling]:
    if not isinstance(data, list):
        raise ConfigError(path, "expected a list of {coeff, n, word}")
    out = []
    for k, c in enumerate(data):
        cp = f"{path}[{k}]"
        coeff = _get(c, "coeff", cp, (int, float, list))
        if isinstance(coeff, list):
            if len(coeff) != 2:
                raise ConfigError(f"{cp}.coeff", "complex coefficients are written [re, im]")
            coeff = complex(coeff[0], coeff[1])
        n = _get(c, "n", cp, int)
        if n < 1:
            raise ConfigError(f"{cp}.n", "power of beta^(-1/2) must be >= 1")
        word = _get(c, "word", cp, (list, str))
        word = _parse_word(word, nvars, f"{cp}.word") if isinstance(word, str) else word
        if not word or any(not isinstance(i, int) or not 1 <= i <= nvars for i in word):
            raise ConfigError(f"{cp}.word", f"letters must be integers in 1..{nvars}")
        out.append(maps.Coupling(complex(coeff), n, tuple(word)))
    return out


def cmd_maps(args, run: RunDir, cfg: dict) -> tuple[str, bool]:
    if args.stars is not None:
        stars = _load_any(args.stars)
        cfg["couplings"] = stars["couplings"] if isinstance(stars, dict) and "couplings" in stars else stars
    nvars = _get(cfg, "alphabet_size", "", int, 1)
    if args.root is not None:
        cfg["q"] = _parse_word(args.root, nvars, "--root")
    if args.order is not None:
        cfg["order"] = args.order
    q = _get(cfg, "q", "", (list, str))
    q = _parse_word(q, nvars, "q") if isinstance(q, str) else q
    if any(not isinstance(i, int) or not 1 <= i <= nvars for i in q):
        raise ConfigError("q", f"letters must be integers in 1..{nvars}")
    order = _get(cfg, "order", "", int)
    we = cfg.get("edge_weight")
    try:
        if "couplings" in cfg:
            model = maps.RescaledModel(np.zeros(nvars), np.eye(nvars),
                                       _parse_couplings(cfg["couplings"], nvars, "couplings"), nvars=nvars)
        else:
            U = _self_adjoint(parse_polynomial(_get(cfg, "U", ""), nvars, "U"), "U")
            W = _self_adjoint(parse_polynomial(cfg["W"], nvars, "W"), "W") if "W" in cfg else None
            model = maps.rewrite_potential(U, W)
        series = maps.moment_series(model, q, order, edge_weight=None if we is None else maps.to_fraction(we))
    except ValueError as e:
        raise ConfigError("<root>", str(e)) from None
    out = {str(k): (str(v) if not isinstance(v, complex) else [v.real, v.imag]) for k, v in series.items()}
    run.json("series.json", {"model": model.to_json(), "q": q, "order": order,
                             "sign_convention": "star of type q_i carries (-c_i)^k_i / k_i!",
                             "series_in_beta_minus_half": out})
    return "maps: " + ", ".join(f"b^-{k}/2: {v}" for k, v in out.items()), True


def cmd_verify(args, run: RunDir, cfg: dict) -> tuple[str, bool]:
    numbers = acceptance.select(fast=args.fast, mc=args.mc) if not args.all else sorted(acceptance.CHECKS)
    if args.only:
        numbers = [n for n in args.only if n in acceptance.CHECKS]
    results = acceptance.run_checks(numbers, _progress, _threads(args))
    report = [r.to_json() for r in results]
    run.json("verify.json", {"checks": report, "passed": all(r.passed for r in results)})
    npass = sum(r.passed for r in results)
    return f"verify: {npass}/{len(results)} passed", npass == len(results)


COMMANDS = {
    "sample-matrix": cmd_sample_matrix,
    "gas": cmd_gas,
    "equilibrium": cmd_equilibrium,
    "ds-check": cmd_ds_check,
    "maps": cmd_maps,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default $MMLAB_THREADS or 1)")
    common.add_argument("--out", default="mmlab-out", help="output directory")
    common.add_argument("--unsafe-allow", action="store_true",
                        help="run models whose integrability is not certified")

    p = argparse.ArgumentParser(prog="mmlab", description="Matrix-model numerics laboratory.", parents=[common])
    sub = p.add_subparsers(dest="command", required=True)
    subs = {}
    for name, helptext in (
        ("sample-matrix", "MCMC for a multi-matrix Gibbs law"),
        ("gas", "eigenvalue gas of the commutator model"),
        ("equilibrium", "equilibrium measure on a grid"),
        ("ds-check", "Dyson-Schwinger residuals from samples"),
        ("maps", "planar-map moment series"),
    ):
        sp = sub.add_parser(name, help=helptext, parents=[common])
        sp.add_argument("config", nargs="?", help="JSON config file")
        sp.add_argument("--model", dest="model", help="JSON config file (same as the positional argument)")
        subs[name] = sp
    subs["sample-matrix"].add_argument("--chains", type=int, help="override chain.chains")
    subs["sample-matrix"].add_argument("--samples", type=int, help="override chain.samples")
    subs["gas"].add_argument("--beta", type=float, help="override beta")
    subs["gas"].add_argument("--n", type=int, help="override the number of particles")
    subs["gas"].add_argument("--sweeps", type=int, help="override the number of sweeps")
    subs["maps"].add_argument("--root", help="root word, e.g. '1 1' or X1X1")
    subs["maps"].add_argument("--stars", help="JSON list of couplings {coeff, n, word}")
    subs["maps"].add_argument("--order", type=int, help="truncation order in beta^(-1/2)")
    v = sub.add_parser("verify", help="run the acceptance checks", parents=[common])
    g = v.add_mutually_exclusive_group()
    g.add_argument("--fast", action="store_true", help="deterministic numerical checks only")
    g.add_argument("--mc", action="store_true", help="Monte Carlo checks only")
    g.add_argument("--all", action="store_true", help="every check (default)")
    v.add_argument("--only", type=int, nargs="+", help="run only these check numbers")
    return p


def _config(args) -> dict:
    if args.command == "verify":
        return {}
    if args.config and args.model and args.config != args.model:
        raise ConfigError("<file>", "give the config either positionally or with --model, not both")
    path = args.config or args.model
    if path is None:
        if args.command == "maps" and args.stars is not None:
            return {}
        raise ConfigError("<file>", "no config file given")
    return _load(path)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        manifest = RunManifest(args.command, cfg, args.seed, _version(), BACKEND)
        run = RunDir(Path(args.out), manifest)
        summary, ok = COMMANDS[args.command](args, run, cfg)
        run.close()
    except ConfigError as e:
        print(f"mmlab: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    print(summary)
    return 0 if ok else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
