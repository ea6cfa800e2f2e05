"""``towgame`` command line: solve, simulate, operator, converge, axioms.

Exit codes: 0 success, 1 a property verdict failed, 2 the manifest or its
parameters failed validation.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import convergence_lab as lab
from . import game_engine as ge
from . import limit_operator as lo
from .dpp_core import GridError, dpp_sweep
from .manifest import Manifest, ManifestError, _num, _vec, load_manifest
from .movement_sets import check_axioms

EXIT_OK, EXIT_VERDICT, EXIT_INVALID = 0, 1, 2


def _tag(e: float) -> str:
    return format(e, "g")


def _stamp(m: Manifest) -> dict:
    return {"manifest_hash": m.hash, "seed": m.seed}


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))


def _write_csv(path: Path, header: list, rows: list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row])


# -- subcommands ------------------------------------------------------------


def cmd_solve(m: Manifest, threads: int) -> int:
    ok = True
    for e in m.eps:
        fld = dpp_sweep(m.domain, m.family, m.payoff, e, m.grid(e), m.resolution, threads=threads)
        lo_, hi_ = fld.strip_range
        inner = fld.values[1:, fld.interior]
        bounded = bool(inner.min() >= lo_ - 1e-12 and inner.max() <= hi_ + 1e-12)
        ok &= bounded
        csv_path, _ = fld.write(m.out / f"solve_eps{_tag(e)}", extra={**_stamp(m), "bounds_ok": bounded})
        print(f"solve eps={_tag(e)}: {fld.meta['interior_nodes']} interior nodes x {fld.meta['slices']} slices "
              f"-> {csv_path} [{'PASS' if bounded else 'FAIL'} bounds]")
    return EXIT_OK if ok else EXIT_VERDICT


def _strategy(entry, field, key: str):
    if isinstance(entry, dict):
        kind = entry.get("kind")
    else:
        kind, entry = entry, {}
    if kind in ("greedy_max", "greedy_min"):
        return ge.GreedyOnField(field, kind.split("_")[1])
    if kind == "uniform":
        return ge.UniformRandom()
    if kind == "pull":
        return ge.PullToward(_vec(entry.get("target", []), f"{key}.target"))
    raise ManifestError(f"{key}: unknown strategy {kind!r}")


def cmd_simulate(m: Manifest, threads: int) -> int:
    sec = m.section("simulate")
    x0 = _vec(sec.get("x0", list(m.domain.center)), "simulate.x0")
    t0 = _num(sec.get("t0", m.domain.T / 2), "simulate.t0")
    runs = int(_num(sec.get("runs", 1000), "simulate.runs"))
    record = int(_num(sec.get("record", 100), "simulate.record"))
    ok = True
    for e in m.eps:
        fld = dpp_sweep(m.domain, m.family, m.payoff, e, m.grid(e), m.resolution, threads=threads)
        S_I = _strategy(sec.get("player_I", "greedy_max"), fld, "simulate.player_I")
        S_II = _strategy(sec.get("player_II", "greedy_min"), fld, "simulate.player_II")
        game = ge.Game(m.domain, m.family, m.payoff, e, m.resolution)
        batch = ge.simulate_batch(game, x0, t0, S_I, S_II, runs, m.seed, record=True)
        check = ge.verify_batch(batch)
        est = ge.estimate(batch.payoffs, m.seed)
        u = float(fld.evaluate(np.array([x0]), np.array([t0]))[0])
        ge.write_jsonl([batch.transcript(i) for i in range(min(record, runs))],
                       m.out / f"simulate_eps{_tag(e)}.jsonl")
        ge.append_ledger(m.out / "simulate_ledger.csv", f"{m.hash[:12]}-eps{_tag(e)}", est,
                         {"manifest_hash": m.hash, "eps": e, "dpp_value": format(u, ".17g"),
                          "tau_max": int(batch.taus.max()), "violations": int(not check.ok)})
        ok &= check.ok
        print(f"simulate eps={_tag(e)}: mean={est.mean:.6g} se={est.se:.3g} dpp={u:.6g} "
              f"tau_max={batch.taus.max()} [{'PASS' if check.ok else 'FAIL'} transcripts]")
    return EXIT_OK if ok else EXIT_VERDICT


def cmd_operator(m: Manifest, threads: int) -> int:
    sec = m.section("operator")
    eps = _vec(sec.get("eps", [0.2, 0.1, 0.05, 0.025]), "operator.eps")
    probes = lo.standard_probes(m.domain.dim, int(_num(sec.get("probes", 8), "operator.probes")), m.seed)
    res = int(_num(sec.get("resolution", 16), "operator.resolution"))
    rows, ok = [], True
    for i, p in enumerate(probes):
        gaps = []
        for e in eps:
            r = lo.consistency_residual(m.family, p, p.x0, p.t0, e, res)
            gaps.append(r.gap / e**2)
            rows.append([i, e, r.dpp_side, r.operator_side, r.gap, r.gap / e**2, ""])
        mono = all(b <= a for a, b in zip(gaps, gaps[1:]))
        shrink = gaps[-1] <= 0.1 * gaps[0] if len(gaps) > 1 else True
        verdict = "PASS" if mono and shrink else "FAIL"
        ok &= verdict == "PASS"
        for row in rows[-len(eps):]:
            row[-1] = verdict
    _write_csv(m.out / "operator_consistency.csv",
               ["probe", "eps", "dpp_side", "operator_side", "gap", "normalized_gap", "verdict"], rows)

    rng = np.random.default_rng(m.seed)
    env_rows = []
    N = m.domain.dim
    for i in range(int(_num(sec.get("envelope_args", 200), "operator.envelope_args"))):
        A = rng.normal(size=(N, N))
        v = rng.normal(size=N) if i % 2 else np.zeros(N)
        args = lo.OperatorArgs.make(0.5 * (A + A.T), v, float(rng.normal()), m.domain.center, m.domain.T / 2)
        g, gu, gl = lo.g_eval(m.family, args, res), lo.g_upper(m.family, args, res), lo.g_lower(m.family, args, res)
        good = gl <= g + 2.0 / res and g <= gu + 2.0 / res
        ok &= good
        env_rows.append([i, float(np.linalg.norm(v)), args.s, gl, g, gu, "PASS" if good else "FAIL"])
    _write_csv(m.out / "operator_envelopes.csv", ["arg", "norm_v", "s", "g_lower", "g_eval", "g_upper", "verdict"],
               env_rows)
    _write_json(m.out / "operator.json", {**_stamp(m), "passed": bool(ok), "eps": eps})
    print(f"operator: {len(probes)} probes x {len(eps)} eps, {len(env_rows)} envelope args "
          f"[{'PASS' if ok else 'FAIL'}]")
    return EXIT_OK if ok else EXIT_VERDICT


def cmd_converge(m: Manifest, threads: int) -> int:
    sec = m.section("converge")
    if len(m.eps) < 2:
        raise ManifestError("converge needs at least two eps values")
    cfg = lab.SweepConfig(m.domain, m.family, m.payoff, tuple(m.eps), m.h_factor, m.dt_factor, m.resolution,
                          threads, _num(sec.get("slack", 0.1), "converge.slack"), lattice_aligned=m.lattice_aligned)
    try:
        report = lab.epsilon_sweep(cfg)
    except lab.PreconditionError as exc:
        raise ManifestError(str(exc)) from None
    _write_json(m.out / "converge.json", {**report.to_dict(), **_stamp(m)})
    (m.out / "converge.csv").write_text(report.summary_csv(), newline="")
    print("converge: d_k = " + ", ".join(f"{d:.3e}" for d in report.differences) + f" [{report.verdict}]")
    return EXIT_OK if report.verdict == "PASS" else EXIT_VERDICT


def cmd_axioms(m: Manifest, threads: int) -> int:
    sec = m.section("axioms")
    N = m.domain.dim
    raw = sec.get("probes")
    if raw:
        probes = [(_vec(p["x"], "axioms.x"), _num(p["t"], "axioms.t"), _vec(p.get("v", [1] + [0] * (N - 1)), "axioms.v"))
                  for p in raw]
    else:
        c = list(m.domain.center)
        probes = [(c, m.domain.T / 2, [1.0] + [0.0] * (N - 1)), (c, m.domain.T, [-1.0] * N)]
    res = int(_num(sec.get("resolution", 8), "axioms.resolution"))
    report = check_axioms(m.family, probes, resolution=res)
    _write_json(m.out / "axioms.json", {**report.to_dict(), **_stamp(m)})
    for e in report.failures:
        print(f"  {e.axiom} probe {e.probe}: {e.message} witness={e.witness}")
    print(f"axioms: {report.by_axiom()} [{'PASS' if report.passed else 'FAIL'}]")
    return EXIT_OK if report.passed else EXIT_VERDICT


COMMANDS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "operator": cmd_operator,
    "converge": cmd_converge,
    "axioms": cmd_axioms,
}


def _threads(arg) -> int:
    value = arg if arg is not None else os.environ.get("TOWGAME_THREADS", "1")
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise ManifestError(f"thread count must be an integer, got {value!r}") from None
    if n < 1:
        raise ManifestError("thread count must be >= 1")
    return n


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="towgame", description="Tug-of-War games with space/time dependent move sets")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--manifest", required=True, help="TOML or JSON experiment manifest")
    p.add_argument("--out", help="output directory (overrides the manifest)")
    p.add_argument("--seed", type=int, help="u64 seed (overrides the manifest)")
    p.add_argument("--threads", help="worker threads (default: $TOWGAME_THREADS or 1)")
    return p


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    try:
        threads = _threads(args.threads)
        m = load_manifest(args.manifest, seed=args.seed, out=args.out)
        return COMMANDS[args.command](m, threads)
    except (ManifestError, GridError) as exc:
        print(f"towgame: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
