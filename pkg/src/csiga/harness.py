"""Monte Carlo experiments: error rates versus SNR and iteration, timing scans.

Every trial draws its randomness from ``SeedSequence([seed, snr_index,
trial])``, so results do not depend on how trials are spread over threads.
Timing numbers are the only non-reproducible output and are written only on
request (``--record-time``).
"""

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import os
import subprocess
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import baselines, cs_iga, ncs_iga
from .model import (DetectionProblem, generate_channel, make_constellation,
                    precompute, snr_to_sigma2, transmit)
from .splitting import cross_split

__all__ = ["ExperimentConfig", "RunRecord", "CSV_FIELDS", "parse_snr", "run_sweep",
           "timing_scan", "prior_overhead_scan", "write_rows", "main"]

DETECTORS = ("cs-iga", "ncs-iga", "lmmse", "mf", "exact")
CSV_FIELDS = ("detector", "M", "N", "L", "snr_db", "iter", "trials", "bit_errors",
              "bits", "ber", "ser", "mse", "fp_resid", "iter_time_us", "seed")
THREADS_ENV = "CSIGA_THREADS"
MAX_REDRAWS = 100


@dataclass(frozen=True)
class ExperimentConfig:
    detector: str = "cs-iga"
    M: int = 64
    N: int = 16
    mod: int = 16
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0)
    T: int = 10
    alpha: float = None          # None: the detector's own default
    trials: int = 100
    seed: int = 0
    cond_max: float = None
    init: str = "zero"
    out: str = None
    fmt: str = "csv"
    normalization: str = "total"
    correlation: float = 0.0
    record_time: bool = False

    def __post_init__(self):
        if self.detector not in DETECTORS:
            raise ValueError(f"unknown detector {self.detector!r}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.fmt not in ("csv", "json"):
            raise ValueError("fmt must be 'csv' or 'json'")
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["snr_db"] = list(self.snr_db)
        return d

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class RunRecord:
    config: ExperimentConfig
    rows: list = field(default_factory=list)
    config_hash: str = ""


def parse_snr(text):
    """``"a:b:step"`` (inclusive of ``b``) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        a, b, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise ValueError("SNR step must be positive")
        n = int(np.floor((b - a) / step + 1e-9)) + 1
        return tuple(round(a + k * step, 10) for k in range(n))
    return tuple(float(v) for v in text.split(",") if v.strip())


def _draw_channel(cfg, s2, rng):
    for _ in range(MAX_REDRAWS):
        H = generate_channel(cfg.M, cfg.N, rng, correlation=cfg.correlation or None,
                             normalization=cfg.normalization)
        if cfg.cond_max is None:
            return H
        K = H.conj().T @ H / s2 + np.eye(cfg.N)
        if np.linalg.cond(K) <= cfg.cond_max:
            return H
    raise RuntimeError(f"no channel with cond(K) <= {cfg.cond_max} "
                       f"after {MAX_REDRAWS} draws")


def _run_trial(cfg, cons, snr_index, trial):
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, snr_index, trial]))
    s2 = snr_to_sigma2(cfg.snr_db[snr_index])
    H = _draw_channel(cfg, s2, rng)
    idx = rng.integers(0, cons.order, cfg.N)
    x, y = transmit(idx, H, s2, cons, rng)
    problem = DetectionProblem(H, y, s2, cons)

    fp = None
    elapsed, iters = 0.0, 1
    if cfg.detector == "cs-iga":
        kw = {} if cfg.alpha is None else {"alpha": cfg.alpha}
        out = cs_iga.detect(problem, T=cfg.T, tol=0.0, init=cfg.init, record=True, **kw)
        est = out.trace.means
        hard = cons.nearest(est)
        mu_ref, _ = baselines.lmmse(problem)
        fp = np.max(np.abs(est - mu_ref[None, :]), axis=1)
        elapsed, iters = out.trace.elapsed, out.trace.iterations
    elif cfg.detector == "ncs-iga":
        kw = {} if cfg.alpha is None else {"alpha": cfg.alpha}
        out = ncs_iga.detect_soft(problem, T=cfg.T, init=cfg.init, record=True, **kw)
        hard, est = out.trace.hard, out.trace.soft
        elapsed, iters = out.trace.elapsed, out.trace.iterations
    else:
        t0 = time.perf_counter()
        if cfg.detector == "lmmse":
            est = baselines.lmmse(problem)[0]
        elif cfg.detector == "mf":
            # Per-user gain normalization so the estimate lives on the symbol scale.
            est = (H.conj().T @ y) / np.sum(np.abs(H) ** 2, axis=0)
        else:
            ex = baselines.exact_marginals(problem)
            est = ex.mmse_mean
        elapsed = time.perf_counter() - t0
        hard = np.argmax(ex.eta_exact, axis=1) if cfg.detector == "exact" else cons.nearest(est)
        est, hard = est[None, :], hard[None, :]

    lab = cons.labels
    bit_err = np.sum(lab[hard] != lab[idx][None, :, :], axis=(1, 2))
    sym_err = np.sum(hard != idx[None, :], axis=1)
    sq_err = np.sum(np.abs(est - x[None, :]) ** 2, axis=1)
    return bit_err, sym_err, sq_err, fp, elapsed / max(iters, 1)


def _threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_sweep(config, threads=None):
    """Run the Monte Carlo sweep described by ``config``.

    Writes ``config.out`` (CSV or JSON) plus ``<out>.manifest.json`` when an
    output path is set.  Returns a :class:`RunRecord` with one row per
    (SNR, iteration); non-iterative detectors report ``iter = 0``.
    """
    cons = make_constellation(config.mod)
    threads = threads or _threads()
    B, N = cons.bits_per_symbol, config.N
    rows = []
    for si, snr in enumerate(config.snr_db):
        jobs = range(config.trials)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(lambda j: _run_trial(config, cons, si, j), jobs))
        else:
            results = [_run_trial(config, cons, si, j) for j in jobs]

        # Summation in trial order keeps the totals schedule independent.
        bit_err = np.sum([r[0] for r in results], axis=0)
        sym_err = np.sum([r[1] for r in results], axis=0)
        sq_err = np.sum([r[2] for r in results], axis=0)
        fp = np.max([r[3] for r in results], axis=0) if results[0][3] is not None else None
        it_time = float(np.mean([r[4] for r in results]))
        iterative = config.detector in ("cs-iga", "ncs-iga")
        bits = config.trials * N * B
        syms = config.trials * N
        for k in range(len(bit_err)):
            rows.append({
                "detector": config.detector, "M": config.M, "N": N, "L": cons.order,
                "snr_db": snr, "iter": k + 1 if iterative else 0,
                "trials": config.trials, "bit_errors": int(bit_err[k]), "bits": bits,
                "ber": int(bit_err[k]) / bits, "ser": int(sym_err[k]) / syms,
                "mse": float(sq_err[k]) / syms,
                "fp_resid": float(fp[k]) if fp is not None else "",
                "iter_time_us": it_time * 1e6 if config.record_time else "",
                "seed": config.seed,
            })
    record = RunRecord(config=config, rows=rows, config_hash=config.digest())
    if config.out:
        write_rows(rows, config.out, config.fmt)
        write_manifest(record, config.out)
    return record


def rows_to_csv(rows, fields=CSV_FIELDS):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def write_rows(rows, path, fmt="csv", fields=CSV_FIELDS):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        path.write_text(rows_to_csv(rows, fields))
    else:
        path.write_text(json.dumps(rows, indent=1) + "\n")


def _git_stamp():
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).parent)
        return out.stdout.strip() or None
    except (OSError, subprocess.SubprocessError):
        return None


def write_manifest(record, out):
    manifest = {
        "config": record.config.to_dict(),
        "config_hash": record.config_hash,
        "version": __version__,
        "git": _git_stamp(),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "rows": len(record.rows),
        "threads": _threads(),
    }
    path = Path(str(out) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return path


def _time_iterations(detector, M, N, mod, T, reps, rng, sigma2=0.1):
    H = generate_channel(M, N, rng)
    cons = make_constellation(mod)
    x, y = transmit(rng.integers(0, cons.order, N), H, sigma2, cons, rng)
    problem = DetectionProblem(H, y, sigma2, cons)
    samples = []
    if detector == "cs-iga":
        split = cross_split(precompute(problem, "linear"))
        cfg = cs_iga.LinearConfig(T=T, tol=0.0)
        cs_iga.iterate(split, cfg)  # warm-up (JIT)
        for _ in range(reps):
            _, tr = cs_iga.iterate(split, cfg)
            samples.append(tr.elapsed / tr.iterations)
    elif detector == "ncs-iga":
        ncs_iga.detect_soft(problem, T=2)
        for _ in range(reps):
            tr = ncs_iga.detect_soft(problem, T=T).trace
            samples.append(tr.elapsed / tr.iterations)
    else:
        raise ValueError(f"timing is defined for iterative detectors, not {detector!r}")
    return float(np.median(samples))


def timing_scan(detector="cs-iga", M=256, Ns=(16, 32, 64, 128), mod=16, T=100,
                reps=15, seed=0):
    """Median per-iteration time for each N (precompute excluded).

    Returns ``(rows, slope)`` where ``slope`` is the least-squares log-log
    slope of time against N.
    """
    Ns = list(Ns)
    if Ns != sorted(Ns):
        raise ValueError("N list must be ascending")
    rng = np.random.default_rng(seed)
    rows = []
    for N in Ns:
        t = _time_iterations(detector, M, N, mod, T, reps, rng)
        rows.append({"detector": detector, "M": M, "N": N, "L": mod, "T": T,
                     "reps": reps, "iter_time_us": t * 1e6})
    slope = float("nan")
    if len(Ns) > 1:
        slope = float(np.polyfit(np.log(Ns), np.log([r["iter_time_us"] for r in rows]), 1)[0])
    return rows, slope


def prior_overhead_scan(N=32, Ls=(4, 16, 64), M=256, T=100, reps=15, seed=0):
    """Per-iteration time of NCS-IGA minus CS-IGA for each constellation size.

    Returns ``(rows, slope, r2)`` from a linear fit of the overhead against L.
    """
    rows = []
    for L in Ls:
        base = _time_iterations("cs-iga", M, N, L, T, reps, np.random.default_rng(seed))
        soft = _time_iterations("ncs-iga", M, N, L, T, reps, np.random.default_rng(seed))
        rows.append({"N": N, "L": L, "M": M, "overhead_us": (soft - base) * 1e6})
    x = np.array(Ls, dtype=float)
    y = np.array([r["overhead_us"] for r in rows])
    slope, icpt = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + icpt)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return rows, float(slope), r2


def _build_parser():
    p = argparse.ArgumentParser(prog="csiga-sweep", description=__doc__.splitlines()[0])
    p.add_argument("--detector", choices=DETECTORS, default="cs-iga")
    p.add_argument("--antennas", "-M", dest="M", type=int, default=64)
    p.add_argument("--users", "-N", dest="N", default="16",
                   help="number of users; a comma list with --timing")
    p.add_argument("--mod", type=int, choices=(4, 16, 64), default=16)
    p.add_argument("--snr", default="0:15:5", help="a:b:step or comma list (dB)")
    p.add_argument("--iters", "-T", dest="T", type=int, default=10)
    p.add_argument("--damping", dest="alpha", type=float, default=None)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", choices=("zero", "paper"), default="zero")
    p.add_argument("--cond-max", type=float, default=None)
    p.add_argument("--normalization", choices=("total", "per_user"), default="total")
    p.add_argument("--correlation", type=float, default=0.0)
    p.add_argument("--out", default=None)
    p.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    p.add_argument("--timing", action="store_true",
                   help="run a per-iteration timing scan over --users instead of a sweep")
    p.add_argument("--reps", type=int, default=15, help="repetitions per point (--timing)")
    p.add_argument("--record-time", action="store_true",
                   help="fill iter_time_us in sweep output (not reproducible)")
    return p


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.timing:
            Ns = [int(v) for v in args.N.split(",")]
            rows, slope = timing_scan(args.detector, args.M, Ns, args.mod, args.T,
                                      args.reps, args.seed)
            fields = ("detector", "M", "N", "L", "T", "reps", "iter_time_us")
            if args.out:
                write_rows(rows, args.out, args.fmt, fields)
            else:
                sys.stdout.write(rows_to_csv(rows, fields))
            print(f"log-log slope: {slope:.3f}", file=sys.stderr)
            return 0
        cfg = ExperimentConfig(
            detector=args.detector, M=args.M, N=int(args.N), mod=args.mod,
            snr_db=parse_snr(args.snr), T=args.T, alpha=args.alpha, trials=args.trials,
            seed=args.seed, cond_max=args.cond_max, init=args.init, out=args.out,
            fmt=args.fmt, normalization=args.normalization,
            correlation=args.correlation, record_time=args.record_time)
        record = run_sweep(cfg)
        if not args.out:
            sys.stdout.write(rows_to_csv(record.rows))
    except (ValueError, RuntimeError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
