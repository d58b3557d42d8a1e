"""``nanodisk-rl`` command line: train, evaluate, bruteforce, validate.

Data artifacts are byte-identical for a given (config, seed). Wall-clock
timing is kept apart in ``timing.json`` so it never pollutes them.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, qnet, validate
from ._tables import TableError
from .agent import RunReport, Trainer, TrainingAborted
from .config import ConfigError, RunConfig, load_config
from .env import DesignState, StateError
from .search import LatticeTooLarge, brute_force

LOG_NAME = "run_log.jsonl"
SUMMARY_NAME = "summary.json"
TIMING_NAME = "timing.json"
SPECTRUM_NAME = "best_spectrum.csv"
PROGRESS_NAME = "progress.csv"
PARAMS_NAME = "main_params.npz"
CHECKPOINT_NAME = "checkpoint.pkl"


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_spectrum(path: Path, wavelengths, reflectance) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["wavelength_nm", "reflectance"])
        for lam, r in zip(wavelengths, reflectance):
            w.writerow([repr(float(lam)), repr(float(r))])


def write_progress(path: Path, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["global_step", "episode", "step", "delta_e", "reward", "epsilon", "loss"])
        for r in records:
            loss = "" if r.loss is None else repr(r.loss)
            w.writerow([r.global_step, r.episode, r.step, repr(r.delta_e), repr(r.reward), repr(r.epsilon), loss])


def summarize_records(records: Sequence[dict]) -> dict:
    """Best-ΔE summary recomputed from log records (first minimum wins)."""
    if not records:
        return {"best_state": None, "best_delta_e": None, "best_lab": None, "best_reward": None, "total_steps": 0}
    best = min(records, key=lambda r: r["delta_e"])
    return {
        "best_state": best["state"],
        "best_delta_e": best["delta_e"],
        "best_lab": list(best["lab"]),
        "best_reward": best["reward"],
        "total_steps": len(records),
    }


def _summary(cfg: RunConfig, report: RunReport, status: str) -> dict:
    out = summarize_records([r.to_dict() for r in report.records])
    out.update(status=status, seed=cfg.seed, target=cfg.raw["target"])
    return out


def cmd_train(cfg: RunConfig, out: Path, resume: bool = False, checkpoint_every: int = 0,
              max_steps: Optional[int] = None) -> int:
    out.mkdir(parents=True, exist_ok=True)
    env = cfg.env()
    agent_cfg = cfg.agent()
    ckpt = out / CHECKPOINT_NAME
    log_path = out / LOG_NAME

    if resume:
        if not ckpt.is_file():
            raise FileNotFoundError(f"no checkpoint to resume from: {ckpt}")
        trainer = Trainer.load(ckpt, env)
        if trainer.config != agent_cfg or trainer.seed != cfg.seed:
            raise ConfigError("checkpoint was written with a different agent config or seed")
    else:
        trainer = Trainer(env, agent_cfg, cfg.seed)

    t0 = time.perf_counter()
    status = None
    # The log is rewritten from the checkpoint's records so a resumed run matches an uninterrupted one.
    with open(log_path, "w", encoding="utf-8") as log:
        for rec in trainer.report.records:
            log.write(_dump(rec.to_dict()) + "\n")
        n = 0
        try:
            while not trainer.done and (max_steps is None or n < max_steps):
                rec = trainer.step()
                n += 1
                log.write(_dump(rec.to_dict()) + "\n")
                if checkpoint_every and trainer.global_step % checkpoint_every == 0:
                    log.flush()
                    trainer.save(ckpt)
        except TrainingAborted as exc:
            status = "aborted"
            log.write(_dump({"aborted": str(exc), **exc.record}) + "\n")
            print(f"error: training aborted: {exc}", file=sys.stderr)

    if status is None:
        status = "complete" if trainer.done else "paused"
    report = trainer.report
    write_json(out / SUMMARY_NAME, _summary(cfg, report, status))
    write_progress(out / PROGRESS_NAME, report.records)
    if report.best_state is not None:
        spec = env.context.spectrum(report.best_state)
        write_spectrum(out / SPECTRUM_NAME, spec.wavelengths_nm, spec.reflectance)
    qnet.save_params(trainer.main, out / PARAMS_NAME)
    trainer.save(ckpt)
    write_json(out / TIMING_NAME, {"wall_clock_s": time.perf_counter() - t0, "steps_this_invocation": n})

    if status == "aborted":
        return 3
    if status == "paused":
        print(f"paused after {trainer.global_step} steps; continue with --resume")
        return 0
    print(f"best dE {report.best_delta_e:.4f} at {report.best_state} "
          f"Lab=({report.best_lab.l:.3f}, {report.best_lab.a:.3f}, {report.best_lab.b:.3f})")
    print(f"artifacts in {out}")
    return 0


def cmd_evaluate(cfg: RunConfig, state: DesignState, out: Optional[Path]) -> int:
    env = cfg.env()
    ev = env.evaluate(state)
    print(f"state  {state}")
    print(f"Lab    {ev.lab.l:.6f} {ev.lab.a:.6f} {ev.lab.b:.6f}")
    print(f"dE     {ev.delta_e:.6f}")
    print(f"reward {ev.reward:.6f}")
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        spec = env.context.spectrum(state)
        name = f"spectrum_L{state.l_nm}_D{state.d_nm}_NT{state.nt_nm}_AT{state.at_nm}.csv"
        write_spectrum(out / name, spec.wavelengths_nm, spec.reflectance)
        write_json(out / name.replace(".csv", ".json"), {
            "state": state.as_dict(), "lab": list(ev.lab), "delta_e": ev.delta_e, "reward": ev.reward,
        })
    return 0


def cmd_bruteforce(cfg: RunConfig, step: Optional[int], out: Optional[Path]) -> int:
    env = cfg.env()
    if step is not None:
        env.bounds = env.bounds.with_step(step)
    res = brute_force(env, cfg.bruteforce_cap)
    print(f"evaluated {res.evaluated:,} states")
    print(f"best dE {res.best_delta_e:.6f} at {res.best_state}")
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "bruteforce.json", {
            "best_state": res.best_state.as_dict(), "best_delta_e": res.best_delta_e,
            "best_lab": list(res.best_lab), "best_reward": res.best_reward, "evaluated": res.evaluated,
        })
    return 0


def cmd_validate(cfg: Optional[RunConfig], suite: str) -> int:
    names = list(validate.SUITES) if suite == "all" else [suite]
    failed = 0
    for name in names:
        if name == "colors" and cfg is not None:
            checks = validate.color_suite(cfg._table("cmf"), cfg._table("illuminant"))
        else:
            checks = validate.SUITES[name]()
        for c in checks:
            print(f"[{'PASS' if c.passed else 'FAIL'}] {name}: {c.name}  {c.detail}")
        ok, bad = validate.summarize(checks)
        print(f"{name}: {ok} passed, {bad} failed")
        failed += bad
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run config (defaults apply to missing keys)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", type=Path, help="output directory (overrides output_dir)")

    p = argparse.ArgumentParser(prog="nanodisk-rl", description="Double DQN search for nanodisk structural colours.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", parents=[common], help="run the agent and write logs")
    t.add_argument("--resume", action="store_true", help="continue from OUT/checkpoint.pkl")
    t.add_argument("--checkpoint-every", type=int, default=0, metavar="N", help="save a checkpoint every N steps")
    t.add_argument("--max-steps", type=int, metavar="N", help="stop after N steps this invocation (resume later)")

    e = sub.add_parser("evaluate", parents=[common], help="colour of a single geometry")
    for flag in ("L", "D", "NT", "AT"):
        e.add_argument(f"--{flag}", type=int, required=True, help=f"{flag} in nm")

    b = sub.add_parser("bruteforce", parents=[common], help="exhaustive sweep of the lattice")
    b.add_argument("--step", type=int, help="coarsen every active axis to this step (nm)")

    v = sub.add_parser("validate", parents=[common], help="run fixture self-checks")
    v.add_argument("suite", nargs="?", default="all", choices=[*validate.SUITES, "all"])
    return p


def _config(args) -> RunConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    return load_config(args.config, overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            cfg = _config(args) if args.config else None
            return cmd_validate(cfg, args.suite)
        cfg = _config(args)
        out = args.out
        if args.command == "train":
            return cmd_train(cfg, out or cfg.output_dir, args.resume, args.checkpoint_every, args.max_steps)
        if args.command == "evaluate":
            state = DesignState(args.L, args.D, args.NT, args.AT)
            return cmd_evaluate(cfg, state, out)
        if args.command == "bruteforce":
            return cmd_bruteforce(cfg, args.step, out)
    except (ConfigError, StateError, TableError, LatticeTooLarge, FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
