"""Command-line driver: ``quenchcoal {simulate,validate,oracle}``.

Configuration is one JSON document. Model strings are ``name`` or
``name(args)`` where ``args`` is a comma-separated JSON list, e.g.
``psi(0.5, 1)`` or ``sw([[1, 10, 0.9], [5, 2, 0.1]])``.

Limit presets: ``arg``, ``psi(psi[, rho])``, ``beta(r, rho)``,
``sw-mixture([[x, m, weight], ...])``, ``mixed([[preset, scale], ...])``.
Finite models: ``moran``, ``wright-fisher``, ``psi(psi, rho)``,
``sw([[k, p, prob], ...])``, ``mixture([[prob, [[k, p, prob], ...]], ...])``.

Random streams: every graph, pedigree, sample and locus draws from
``substream(seed, tag, lambda_index, graph_id[, locus_id])``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import limit as L
from . import population as P
from .genealogy import SampleConfig, discrete_ancestral_graph, quenched_replicates
from .rng import child_seed, substream
from .statistics import branch_lengths, quenched_sfs, sfs_csv, sfs_from_tau

MODES = ("quenched-finite", "limit-graph", "validate")
GRAPH_MODES = ("auto", "frozen", "stream")
STREAM_LAMBDA = 10.0
GRAPHS_HEADER = ["lambda", "graph_id", "event_index", "time", "kind", "detail"]


class ConfigError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        super().__init__(msg)
        self.line = line


@dataclass
class ExperimentConfig:
    mode: str = "limit-graph"
    seed: int | None = None
    n: int = 20
    loci: int = 1000
    graphs: int = 5
    lambda_grid: list = field(default_factory=lambda: [1000, 100, 10, 1, 0.1, 0])
    output_dir: str = "out"
    horizon: float | None = None
    frag_cutoff: float = L.DEFAULT_FRAG_CUTOFF
    preset: str = "arg"
    model: str = "moran"
    N: int = 100
    graph_mode: str = "auto"
    graph_csv_max_events: int = 100000
    validate_scale: float = 1.0

    def limit_horizon(self) -> float:
        return L.DEFAULT_HORIZON if self.horizon is None else float(self.horizon)


def _line_of(text: str, key: str):
    pat = re.compile(r'"%s"\s*:' % re.escape(key))
    for i, line in enumerate(text.splitlines(), start=1):
        if pat.search(line):
            return i
    return None


def _split_call(s: str):
    m = re.fullmatch(r"\s*([A-Za-z][\w-]*)\s*(?:\((.*)\))?\s*", s, re.S)
    if not m:
        raise ValueError(f"cannot parse model string {s!r}")
    name, args = m.group(1).lower(), m.group(2)
    try:
        return name, (json.loads("[" + args + "]") if args and args.strip() else [])
    except json.JSONDecodeError as e:
        raise ValueError(f"bad arguments in {s!r}: {e.msg}") from None


def parse_preset(s, lam: float = 0.0):
    """Preset kind (for :func:`quenchcoal.limit.preset`) from a config string."""
    if not isinstance(s, str):
        raise ValueError("preset must be a string")
    name, args = _split_call(s)
    if name == "arg" and not args:
        return L.ARG(lam)
    if name == "psi" and 1 <= len(args) <= 2:
        return L.Psi(float(args[0]), float(args[1]) if len(args) > 1 else 0.0, lam)
    if name == "beta" and len(args) == 2:
        return L.Beta(float(args[0]), float(args[1]), lam)
    if name == "sw-mixture" and len(args) == 1:
        return L.SwMixture(tuple((float(x), int(m), float(w)) for x, m, w in args[0]), lam)
    if name == "mixed" and len(args) == 1:
        return L.Mixed(tuple((parse_preset(p, lam), float(c)) for p, c in args[0]), lam)
    raise ValueError(f"unknown limit preset {s!r}")


def _sw_table(rows):
    return P.SargasyanWakeley([((int(k), int(p)), float(w)) for k, p, w in rows])


def parse_model(s, N: int, alpha: float = 0.0) -> P.ModelParams:
    """Finite-population model from a config string."""
    if not isinstance(s, str):
        raise ValueError("model must be a string")
    name, args = _split_call(s)
    if name == "moran" and not args:
        return P.moran(N, alpha)
    if name == "wright-fisher" and not args:
        return P.wright_fisher(N, alpha)
    if name == "psi" and len(args) == 2:
        return P.psi_model(N, alpha, float(args[0]), float(args[1]))
    if name == "sw" and len(args) == 1:
        return P.ModelParams(N, alpha, _sw_table(args[0]))
    if name == "mixture" and len(args) == 1:
        return P.ModelParams(N, alpha, P.Mixture([(_sw_table(t), float(w)) for w, t in args[0]]))
    raise ValueError(f"unknown model {s!r}")


def _check(cond, msg, text, key):
    if not cond:
        raise ConfigError(msg, _line_of(text, key))


def load_config(text: str, seed_override: int | None = None, output_override: str | None = None) -> ExperimentConfig:
    """Parse and validate a JSON config; errors carry the offending line."""
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", e.lineno) from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object", 1)
    known = {f.name for f in fields(ExperimentConfig)}
    for key in raw:
        _check(key in known, f"unknown key {key!r}", text, key)
    cfg = ExperimentConfig(**raw)
    if seed_override is not None:
        cfg.seed = seed_override
    if output_override is not None:
        cfg.output_dir = output_override
    _check(cfg.mode in MODES, f"mode must be one of {', '.join(MODES)}", text, "mode")
    _check(cfg.seed is not None, "a seed is required (config key or --seed)", text, "seed")
    _check(isinstance(cfg.seed, int) and 0 <= cfg.seed < 2**64, "seed must be an unsigned 64-bit integer",
           text, "seed")
    for key in ("n", "loci", "graphs", "N"):
        v = getattr(cfg, key)
        _check(isinstance(v, int) and not isinstance(v, bool) and v >= 1, f"{key} must be an integer >= 1",
               text, key)
    _check(cfg.n >= 2, "n must be at least 2", text, "n")
    _check(isinstance(cfg.lambda_grid, list) and cfg.lambda_grid, "lambda_grid must be a non-empty list",
           text, "lambda_grid")
    for lam in cfg.lambda_grid:
        _check(isinstance(lam, (int, float)) and np.isfinite(lam) and lam >= 0,
               "lambda_grid entries must be finite and >= 0", text, "lambda_grid")
    _check(cfg.horizon is None or (isinstance(cfg.horizon, (int, float)) and cfg.horizon > 0),
           "horizon must be positive", text, "horizon")
    _check(isinstance(cfg.frag_cutoff, (int, float)) and cfg.frag_cutoff >= 0, "frag_cutoff must be >= 0",
           text, "frag_cutoff")
    _check(cfg.graph_mode in GRAPH_MODES, f"graph_mode must be one of {', '.join(GRAPH_MODES)}",
           text, "graph_mode")
    _check(isinstance(cfg.graph_csv_max_events, int) and cfg.graph_csv_max_events >= 0,
           "graph_csv_max_events must be an integer >= 0", text, "graph_csv_max_events")
    _check(isinstance(cfg.validate_scale, (int, float)) and cfg.validate_scale > 0,
           "validate_scale must be positive", text, "validate_scale")
    if cfg.mode == "limit-graph":
        try:
            L.preset(parse_preset(cfg.preset))
        except (ValueError, TypeError) as e:
            raise ConfigError(f"preset: {e}", _line_of(text, "preset")) from None
    if cfg.mode == "quenched-finite":
        _check(cfg.n <= cfg.N, "n must not exceed N", text, "n")
        try:
            base = parse_model(cfg.model, cfg.N)
        except (ValueError, TypeError) as e:
            raise ConfigError(f"model: {e}", _line_of(text, "model")) from None
        for lam in cfg.lambda_grid:
            try:
                P.alpha_for_lambda(base, lam)
            except ValueError as e:
                raise ConfigError(str(e), _line_of(text, "lambda_grid")) from None
    return cfg


# ---------------------------------------------------------------- experiments

def graph_sfs(n: int, xi: L.XiMeasure, lam: float, loci: int, seed: int, key: tuple,
              frag_cutoff: float, horizon: float, graph_mode: str = "auto"):
    """SFS of ``loci`` walks on one graph; returns (QuenchedSfs, graph or None)."""
    if graph_mode == "auto":
        graph_mode = "stream" if lam > STREAM_LAMBDA else "frozen"
    if graph_mode == "stream":
        tau, _, absorbed = L.stream_sfs(n, xi, lam, loci, frag_cutoff, horizon,
                                        rng=substream(seed, "graph", *key))
        return sfs_from_tau(tau, absorbed), None
    graph = L.simulate_graph(n, xi, lam, frag_cutoff, horizon, rng=substream(seed, "graph", *key))
    vectors = [branch_lengths(L.walk_graph(graph, substream(seed, "walk", *key, i)))
               for i in range(loci)]
    return quenched_sfs(vectors), graph


def pedigree_sfs(params: P.ModelParams, n: int, loci: int, seed: int, key: tuple, horizon: float = 20.0):
    """SFS of ``loci`` loci on one pedigree; returns (QuenchedSfs, pedigree, sample)."""
    ped = P.Pedigree(params.N, params, seed=child_seed(substream(seed, "pedigree", *key)))
    sample = SampleConfig.random(params.N, n, substream(seed, "sample", *key))
    c_N = float(P.c2_closed_sw(params))
    paths = quenched_replicates(ped, sample, loci, substream(seed, "loci", *key), c_N=c_N,
                                horizon_steps=int(np.ceil(horizon / c_N)))
    return quenched_sfs([branch_lengths(p) for p in paths]), ped, sample


def _graph_rows(w, lam, gid, graph, cap):
    if graph is None:
        w.writerow([repr(float(lam)), gid, -1, "", "streamed", "not stored"])
        return
    body = graph.to_csv(max_events=cap, prefix=(repr(float(lam)), gid))
    w.writerows(csv.reader(io.StringIO(body)))


def run_experiment(cfg: ExperimentConfig, log=print) -> dict:
    """Run a config and write its artifacts; returns a JSON-ready summary."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.mode == "validate":
        return run_validate(cfg, log)
    blocks = []
    gbuf = io.StringIO()
    gw = csv.writer(gbuf, lineterminator="\n")
    gw.writerow(GRAPHS_HEADER)
    truncated = 0
    for li, lam in enumerate(cfg.lambda_grid):
        lam = float(lam)
        for gid in range(cfg.graphs):
            t0 = time.perf_counter()
            key = (li, gid)
            if cfg.mode == "limit-graph":
                xi = L.preset(parse_preset(cfg.preset, lam))
                res, graph = graph_sfs(cfg.n, xi, lam, cfg.loci, cfg.seed, key, cfg.frag_cutoff,
                                       cfg.limit_horizon(), cfg.graph_mode)
                _graph_rows(gw, lam, gid, graph, cfg.graph_csv_max_events)
            else:
                base = parse_model(cfg.model, cfg.N)
                params = base.with_alpha(P.alpha_for_lambda(base, lam))
                horizon = 20.0 if cfg.horizon is None else float(cfg.horizon)
                res, ped, sample = pedigree_sfs(params, cfg.n, cfg.loci, cfg.seed, key, horizon)
                if cfg.graph_csv_max_events:
                    c_N = float(P.c2_closed_sw(params))
                    g = discrete_ancestral_graph(ped, sample, c_N=c_N, max_depth=ped.depth,
                                                 max_events=cfg.graph_csv_max_events)
                    _graph_rows(gw, lam, gid, g, cfg.graph_csv_max_events)
            truncated += res.loci_truncated
            blocks.append((lam, gid, res))
            log(f"lambda={lam:g} graph={gid} loci={res.loci_used} truncated={res.loci_truncated} "
                f"({time.perf_counter() - t0:.1f}s)")
    (out / "sfs.csv").write_text(sfs_csv(blocks))
    (out / "graphs.csv").write_text(gbuf.getvalue())
    return {"mode": cfg.mode, "blocks": len(blocks), "loci_truncated": truncated,
            "outputs": ["sfs.csv", "graphs.csv"], "passed": True}


def run_validate(cfg: ExperimentConfig, log=print) -> dict:
    from .validation import run_validation

    report = run_validation(cfg.seed, cfg.validate_scale)
    Path(cfg.output_dir, "validate.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for name, chk in report["checks"].items():
        log(f"{'PASS' if chk['passed'] else 'FAIL'} {name}")
    return {"mode": "validate", "passed": report["passed"], "outputs": ["validate.json"]}


def run_oracle(out_dir: str, Ns=(3, 4, 5), log=print) -> dict:
    from .oracle import oracle_report
    from .validation import oracle_models

    report = oracle_report(oracle_models(Ns))
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    Path(out_dir, "oracle.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    ok = all(r["abs_error"] <= 1e-12 for r in report.values())
    for name, r in report.items():
        log(f"{'PASS' if r['abs_error'] <= 1e-12 else 'FAIL'} {name} expected={r['expected']:.12g} "
            f"computed={r['computed']:.12g}")
    return {"mode": "oracle", "passed": ok, "outputs": ["oracle.json"]}


# ---------------------------------------------------------------- entry point

def _u64(s: str) -> int:
    v = int(s)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quenchcoal", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("simulate", "run a quenched-finite or limit-graph experiment"),
                           ("validate", "run the self-check suite and write validate.json"),
                           ("oracle", "compare exact enumeration with the closed forms")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--seed", type=_u64, help="overrides the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker count (work runs in order)")
        p.add_argument("--output", help="output directory (overrides output_dir)")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    text = ""
    where = "<defaults>"
    if args.config is not None:
        where = str(args.config)
        try:
            text = args.config.read_text()
        except OSError as e:
            print(f"error: cannot read {where}: {e.strerror}", file=sys.stderr)
            return 2
    if args.command == "oracle":
        summary = run_oracle(args.output or "out")
        return 0 if summary["passed"] else 1
    try:
        cfg = load_config(text, args.seed, args.output)
        if args.command == "validate":
            cfg.mode = "validate"
    except ConfigError as e:
        loc = f":{e.line}" if e.line else ""
        print(f"{where}{loc}: error: {e}", file=sys.stderr)
        return 2
    try:
        summary = run_experiment(cfg)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    print(json.dumps(summary, sort_keys=True))
    return 0 if summary["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
