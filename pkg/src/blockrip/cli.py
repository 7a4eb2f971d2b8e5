"""``blockrip`` command-line front end and experiment runner.

Every command writes one CSV table (plus a ``# config_hash=...`` trailer) and
a JSON sidecar ``<out>.json`` holding the config echo, version, wall time and
summary scalars.  CSV bytes depend only on the config, never on timing or on
``BLOCKRIP_THREADS``.

Exit codes: 2 invalid config or parameters, 3 capacity exceeded,
4 non-convergence, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .chaining import build_rip_metric_set, chaining_report, dudley_gamma
from .chaos import MatrixFamily, empirical_moment_curve, empirical_tail, model_alpha, tail_regime_fit
from .config import COMMANDS, ExperimentConfig, check
from .distributions import PhiFunction, estimate_psi_alpha_norm, increment_tail_check, sample
from .errors import BlockRipError, FitDomainError, ValidationError
from .group_model import coherence_mu
from .matrices import BlockDiagonalMatrix, random_block_diagonal, read_matrix
from .recovery import CSV_HEADER as RECOVERY_HEADER
from .recovery import recovery_experiment
from .rip import make_basis, mc_ric_of_matrix, phase_transition, ric_of_matrix, sensing_matrix
from .rng import RngStream

CURVE_HEADER = ["t_or_p", "value", "ci", "trials", "seed"]
RIC_HEADER = ["s", "delta", "mode", "supports_checked", "worst_support", "seed"]
PHASE_HEADER = ["s", "m", "prob", "mean_delta", "ci", "seed"]
CHAINING_HEADER = ["radius", "cover_upper", "cover_lower"]


@dataclass
class ExperimentResult:
    config: dict
    config_hash: str
    version: str
    header: list
    rows: list
    summary: dict = field(default_factory=dict)
    trailer: list = field(default_factory=list)
    wall_time: float = 0.0

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        for line in self.trailer:
            buf.write(f"# {line}\n")
        buf.write(f"# config_hash={self.config_hash}\n")
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {"config": self.config, "config_hash": self.config_hash, "version": self.version,
                "wall_time": self.wall_time, "summary": {k: _json_safe(v) for k, v in self.summary.items()}}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list)):
        return ";".join(str(int(i) + 1) for i in v)
    return str(v)


def _json_safe(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


# ---------------------------------------------------------------- commands

def _stream(cfg):
    return RngStream(int(cfg.seed))


def _cmd_sample(cfg):
    x = sample(cfg.dist_spec(), cfg.trials, _stream(cfg))
    return ["index", "value"], [(i, float(v)) for i, v in enumerate(x)], {
        "mean": float(x.mean()), "variance": float(x.var())}


def _cmd_psi_norm(cfg):
    spec = cfg.dist_spec()
    alpha = float(cfg.option("alpha", spec.params.get("alpha", 2.0)))
    value = estimate_psi_alpha_norm(sample(spec, cfg.trials, _stream(cfg)), alpha)
    return ["alpha", "value", "trials", "seed"], [(alpha, value, cfg.trials, cfg.seed)], {"psi_norm": value}


def _cmd_increment(cfg):
    phi = PhiFunction(float(cfg.option("q", 2.0)))
    rep = increment_tail_check(cfg.dist_spec(), phi, cfg.grid["u"], cfg.trials, _stream(cfg))
    return ["u", "empirical", "bound", "se", "pass"], rep.rows(), {"tau": rep.tau, "passed": rep.passed}


def _sensing(cfg, stream):
    """Dense ``B Psi / sqrt(m)`` from the config: fixture file, inline blocks or a random draw."""
    part = cfg.partition_obj()
    if "file" in cfg.matrix:
        A = read_matrix(cfg.path(cfg.matrix["file"]))
        if A.shape[1] != part.D:
            raise ValidationError(f"matrix: {A.shape[1]} columns but D={part.D}")
        return A, part
    psi = make_basis(cfg.basis.get("mode", "identity"), part.D, stream.child(1))
    if "blocks" in cfg.matrix:
        B = BlockDiagonalMatrix.from_blocks(np.asarray(cfg.matrix["blocks"], dtype=float))
        if (B.L, B.m, B.d) != (cfg.dims["L"], cfg.dims["m"], cfg.dims["d"]):
            raise ValidationError("matrix: block shape disagrees with dims L, m, d")
    else:
        B = random_block_diagonal(cfg.dist_spec(), cfg.dims["L"], cfg.dims["m"], cfg.dims["d"], stream.child(0))
    return sensing_matrix(B, psi), part


def _ric_rows(cfg, est):
    s = cfg.dims["s"]
    return RIC_HEADER, [(s, est.delta, est.mode, est.supports_checked, est.worst_support, cfg.seed)], {
        "delta": est.delta, "worst_support": [i + 1 for i in est.worst_support]}


def _cmd_ric_exact(cfg):
    A, part = _sensing(cfg, _stream(cfg))
    kw = {"method": cfg.option("method", "eigh")}
    if "cap" in cfg.options:
        kw["cap"] = int(cfg.options["cap"])
    return _ric_rows(cfg, ric_of_matrix(A, part, cfg.dims["s"], **kw))


def _cmd_ric_mc(cfg):
    stream = _stream(cfg)
    A, part = _sensing(cfg, stream)
    return _ric_rows(cfg, mc_ric_of_matrix(A, part, cfg.dims["s"], cfg.trials, stream.child(2)))


def _family(cfg):
    if "file" in cfg.matrix:
        return MatrixFamily(read_matrix(cfg.path(cfg.matrix["file"])))
    kind = cfg.option("family", "identity")
    n = int(cfg.option("n", 64))
    if kind == "identity":
        return MatrixFamily(np.eye(n) / math.sqrt(n))
    if kind == "rank-one":
        e = np.zeros(n)
        e[0] = 1.0
        return MatrixFamily(np.outer(e, e))
    raise ValidationError(f"options: unknown family {kind!r}")


def _cmd_chaos_tail(cfg):
    curve = empirical_tail(_family(cfg), cfg.dist_spec(), cfg.grid["thresholds"], cfg.trials, _stream(cfg))
    rows = [(t, p, h, cfg.trials, cfg.seed)
            for t, p, h in zip(curve.thresholds, curve.empirical_probs, curve.ci_halfwidths)]
    summary = {}
    if "split" in cfg.options:
        try:
            summary["low_exponent"], summary["high_exponent"] = tail_regime_fit(curve, float(cfg.options["split"]))
        except FitDomainError as exc:
            summary["fit"] = str(exc)
    return CURVE_HEADER, rows, summary


def _cmd_moment(cfg):
    A = _family(cfg).members[0]
    curve = empirical_moment_curve(A, cfg.dist_spec(), cfg.grid["p"], cfg.trials, _stream(cfg),
                                   pairing=cfg.option("pairing", "paired"))
    rows = [(p, v, r * v, cfg.trials, cfg.seed) for p, v, r in zip(curve.p, curve.lp, curve.rel_ci)]
    summary = {"constant": curve.constant, "flagged_p": [float(p) for p in curve.p[curve.flagged]]}
    try:
        summary["slope"] = curve.slope()
    except FitDomainError as exc:
        summary["slope"] = str(exc)
    return CURVE_HEADER, rows, summary


def _cmd_chaining(cfg):
    stream = _stream(cfg)
    part = cfg.partition_obj()
    L, m, d, s = (cfg.dims[k] for k in ("L", "m", "d", "s"))
    psi = make_basis(cfg.basis.get("mode", "identity"), part.D, stream.child(1))
    count = min(cfg.trials, 2048)
    rms = build_rip_metric_set(psi, part, s, m, d, L, count, stream.child(0))
    alpha = model_alpha(cfg.dist_spec())
    g2 = dudley_gamma(rms.points, 2.0)
    ga = dudley_gamma(rms.points, alpha)
    Gamma = g2 + ga
    mu = coherence_mu(np.eye(part.D) if psi is None else psi, part, d)
    summary = {"Gamma": Gamma, "gamma_2": g2, "gamma_alpha": ga, "U1": Gamma * (Gamma + rms.M_F),
               "M_F": rms.M_F, "M_22": rms.M_22, "mu_S": mu, "sample_count": count}
    trailer = ["summary " + ",".join(f"{k}={_fmt(float(v))}" for k, v in summary.items())]
    return CHAINING_HEADER, chaining_report(rms.points), summary, trailer


def _cmd_phase(cfg):
    part = cfg.partition_obj()
    cells = phase_transition(cfg.dist_spec(), cfg.basis.get("mode", "identity"), part, cfg.grid["s"],
                             cfg.grid["m"], cfg.dims["d"], cfg.dims["L"],
                             float(cfg.option("delta_target", 0.3)), cfg.trials, _stream(cfg),
                             ric_mode=cfg.option("ric_mode", "exact"),
                             mc_trials=int(cfg.option("mc_trials", 10_000)))
    rows = [(c.s, c.m, c.prob, c.mean_delta, c.ci, cfg.seed) for c in cells]
    notes = [c.note for c in cells if c.note]
    return PHASE_HEADER, rows, {"notes": notes}


def _cmd_recover(cfg):
    part = cfg.partition_obj()
    rows = recovery_experiment(cfg.dist_spec(), cfg.basis.get("mode", "identity"), part, cfg.dims["s"],
                               cfg.grid["m"], cfg.trials, cfg.option("solver", "iht"), _stream(cfg),
                               cfg.dims["d"], cfg.dims["L"],
                               signals_per_matrix=int(cfg.option("signals", 1)),
                               iters=int(cfg.option("iters", 500)), lam=float(cfg.option("lambda", 1e-6)))
    fails = sorted({f for r in rows for i in r.instances for f in i.failures})
    return RECOVERY_HEADER, [r.csv_row() for r in rows], {"failure_reasons": fails}


HANDLERS = {
    "sample": _cmd_sample,
    "psi-norm": _cmd_psi_norm,
    "increment-check": _cmd_increment,
    "ric-exact": _cmd_ric_exact,
    "ric-mc": _cmd_ric_mc,
    "chaos-tail": _cmd_chaos_tail,
    "moment-check": _cmd_moment,
    "chaining": _cmd_chaining,
    "phase-transition": _cmd_phase,
    "recover": _cmd_recover,
}


def run(config: ExperimentConfig) -> ExperimentResult:
    """Validate, dispatch and return the in-memory result (nothing is written)."""
    check(config)
    t0 = time.perf_counter()
    out = HANDLERS[config.command](config)
    header, rows, summary = out[:3]
    trailer = out[3] if len(out) > 3 else []
    return ExperimentResult(config.to_dict(), config.config_hash(), f"v{__version__}", header, rows,
                            summary, trailer, time.perf_counter() - t0)


def write_result(result: ExperimentResult, out) -> tuple[Path, Path]:
    out = Path(out)
    side = out.with_name(out.name + ".json")
    out.write_text(result.csv_text())
    side.write_text(json.dumps(result.sidecar(), indent=2, sort_keys=True) + "\n")
    return out, side


def read_config_hash(path) -> str:
    for line in Path(path).read_text().splitlines():
        if line.startswith("# config_hash="):
            return line.split("=", 1)[1].strip()
    raise ValidationError(f"output: {path} carries no config hash")


def verify_output(path, config: ExperimentConfig) -> None:
    """Raise :class:`ValidationError` if ``path`` was produced from a different config."""
    found = read_config_hash(path)
    if found != config.config_hash():
        raise ValidationError(f"output: config hash mismatch ({found} != {config.config_hash()})")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blockrip", description="Group-RIP and chaos experiments.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="TOML experiment file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="CSV destination (default: <command>.csv)")
    p.add_argument("--trials", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config, command=args.command, seed=args.seed, trials=args.trials,
                                    out=args.out)
        result = run(cfg)
        csv_path, _ = write_result(result, cfg.out or f"{cfg.command}.csv")
    except BlockRipError as exc:
        return _fail(exc.exit_code, exc)
    except OSError as exc:
        return _fail(5, f"io: {exc}")
    print(f"{csv_path}: {len(result.rows)} rows, config_hash={result.config_hash}")
    return 0


def _fail(code: int, reason) -> int:
    text = " ".join(str(reason).split())
    print(f"blockrip: error {code}: {text}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
