"""Command line interface: ``contactrecon {synth,solve,eval}``.

Log verbosity comes from ``CONTACTRECON_LOG`` (a logging level name,
default ``WARNING``).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

log = logging.getLogger("contactrecon")


def _setup_logging():
    level = os.environ.get("CONTACTRECON_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _require(path):
    if path is not None and not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")


def cmd_synth(args) -> int:
    from .eval import generate_synthetic, perturbed_init
    from .io import export_solution, save_init, save_measurements
    from .model import build_human_model

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meas, truth = generate_synthetic(args.scenario, noise_px=args.noise_px, seed=args.seed,
                                     n_frames=args.frames)
    save_measurements(meas, out / "measurements.json")
    export_solution(truth, out / "ground_truth.json")
    # stand-in for a per-frame monocular pose estimate
    save_init(out / "init.json", perturbed_init(build_human_model(), truth, seed=args.seed))
    log.info("wrote %d frames of %s to %s", meas.n_frames, args.scenario, out)
    return 0


def cmd_solve(args) -> int:
    from .io import (export_solution, load_config, load_human_model, load_init, load_measurements,
                     solution_from_state)
    from .solver import solve_pipeline

    for p in (args.measurements, args.model, args.config, args.init):
        _require(p)
    meas = load_measurements(args.measurements)
    human = load_human_model(args.model)
    config = load_config(args.config)
    q_h = q_o = None
    if args.init:
        q_h, q_o = load_init(args.init)
    problem, state, rep = solve_pipeline(human, meas, config, q_h_init=q_h, q_o_init=q_o)
    log.info("solved %d frames in %.1f s", meas.n_frames, rep.wall_time)
    # wall time stays out of the file so repeated solves are byte-identical
    export_solution(solution_from_state(problem, state, rep.to_dict()), args.out)
    return 0


def cmd_eval(args) -> int:
    from .eval import evaluate
    from .io import load_human_model, load_measurements, load_solution

    for p in (args.solution, args.ground_truth, args.measurements, args.model):
        _require(p)
    est, truth = load_solution(args.solution), load_solution(args.ground_truth)
    if est.n_frames != truth.n_frames:
        raise ValueError(f"solution has {est.n_frames} frames, ground truth {truth.n_frames}")
    camera, size = None, (1280, 720)
    if args.measurements:
        m = load_measurements(args.measurements)
        camera, size = m.camera, m.image_size
    report = evaluate(load_human_model(args.model), est, truth, camera, size)
    text = json.dumps(report, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    from .eval import SCENARIOS

    p = argparse.ArgumentParser(prog="contactrecon", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic scene with ground truth")
    s.add_argument("--scenario", required=True, choices=SCENARIOS)
    s.add_argument("--noise-px", type=float, default=0.0, help="2D keypoint noise std in pixels")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--frames", type=int, default=None, help="override the scenario length")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("solve", help="reconstruct motion and forces from a measurement file")
    s.add_argument("--measurements", required=True)
    s.add_argument("--model", default=None, help="human model JSON (default: built-in)")
    s.add_argument("--config", default=None, help="pipeline config JSON (default: built-in)")
    s.add_argument("--init", default=None, help="per-frame initial configurations JSON")
    s.add_argument("--out", required=True, help="solution JSON path")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("eval", help="compare a solution with ground truth")
    s.add_argument("--solution", required=True)
    s.add_argument("--ground-truth", required=True)
    s.add_argument("--measurements", default=None, help="for the camera used in 2D endpoint accuracy")
    s.add_argument("--model", default=None)
    s.add_argument("--out", default=None, help="metric report JSON path (default: stdout)")
    s.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        msg = f"{e.strerror}: {e.filename}" if getattr(e, "filename", None) else str(e)
        print(f"contactrecon {args.command}: {msg}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as e:
        print(f"contactrecon {args.command}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
