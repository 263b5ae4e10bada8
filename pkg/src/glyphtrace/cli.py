"""Command line front end.

Every subcommand writes only below ``--out-dir`` and drops a
``<output>.manifest.json`` sidecar next to each file it produces.
Exit codes: 0 success, 1 bad input or data, 2 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import biopsy as bio
from . import gmm
from . import neural
from .demo import DEFAULT_LETTER_COUNT, write_demo
from .trajectory import Trajectory, format_trajectory, read_trajectory, resample_by_arclength
from .vectorize import PathStyle, VectorPath, fit_bezier, polyline_path, svg_document, to_dotted

log = logging.getLogger("glyphtrace")


class UserError(Exception):
    """Bad arguments or input data; reported with exit code 1."""


class Run:
    """Tracks inputs and outputs of one invocation for its manifests."""

    def __init__(self, args: argparse.Namespace, parameters: dict):
        self.subcommand = args.command
        self.out_dir = Path(args.out_dir).resolve()
        self.parameters = parameters
        self.seed = args.seed
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}

    def _display(self, path: Path) -> str:
        path = path.resolve()
        try:
            return path.relative_to(self.out_dir).as_posix()
        except ValueError:
            return str(path)

    def input(self, path: str | Path) -> Path:
        path = Path(path)
        if not path.exists():
            raise UserError(f"input not found: {path}")
        if path.is_file():
            self.inputs[self._display(path)] = _sha256(path.read_bytes())
        return path

    def output_path(self, name: str | Path) -> Path:
        path = Path(name)
        if not path.is_absolute():
            path = self.out_dir / path
        path = path.resolve()
        if path != self.out_dir and self.out_dir not in path.parents:
            raise UserError(f"refusing to write outside the output directory: {path}")
        return path

    def write(self, name: str | Path, text: str) -> Path:
        path = self.output_path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = text.encode("utf-8")
        path.write_bytes(data)
        self.outputs[self._display(path)] = _sha256(data)
        log.info("wrote %s", path)
        return path

    def manifest(self) -> str:
        doc = {
            "tool": "glyphtrace",
            "version": __version__,
            "subcommand": self.subcommand,
            "parameters": self.parameters,
            "seed": self.seed,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": dict(sorted(self.outputs.items())),
        }
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"

    def finish(self) -> None:
        text = self.manifest().encode("utf-8")
        for name in list(self.outputs):
            self.output_path(name + ".manifest.json").write_bytes(text)


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _letter_files(directory: str | Path) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise UserError(f"not a directory: {d}")
    files = sorted(d.glob("*.csv"))
    if not files:
        raise UserError(f"no trajectories found in {d}")
    return files


def _read_letters(run: Run, directory) -> list[Trajectory]:
    return [read_trajectory(run.input(f), 2, label=f.stem) for f in _letter_files(directory)]


def _svg(paths: list[VectorPath]) -> str:
    return svg_document(paths)


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------


def cmd_demo(args) -> int:
    run = Run(args, {"count": args.count})
    out = Path(args.out_dir)
    for path in write_demo(out, seed=args.seed, count=args.count):
        run.outputs[run._display(path)] = _sha256(path.read_bytes())
    run.finish()
    _say(args, f"wrote {args.count} letters, biopsy.csv and helix.csv to {out}")
    return 0


def cmd_generalize(args) -> int:
    params = {"k": args.k, "m": args.m, "max_iter": args.max_iter, "tol": args.tol,
              "tolerance": args.tolerance}
    run = Run(args, params)
    letters = _read_letters(run, args.input)
    pooled, resampled = gmm.pool_demonstrations(letters, args.m)
    model, report = gmm.fit_gmm(pooled, k=args.k, seed=args.seed, max_iter=args.max_iter,
                                tol=args.tol)
    curve = gmm.extract_generalized_curve(model, resampled[0])
    log.info("EM: %d iterations, converged=%s, log-likelihood %.6f",
             report.iterations_run, report.converged, report.log_likelihood_trace[-1])

    run.write(args.out, gmm.dump_gmm(model))
    run.write(args.curve, format_trajectory(curve))
    thin = PathStyle(stroke_width=0.002)
    paths = [polyline_path(t, thin) for t in resampled]
    paths.append(fit_bezier(curve, args.tolerance, PathStyle(stroke_width=0.012)))
    paths.append(to_dotted(curve, 0.006))
    run.write(args.svg, _svg(paths))
    run.finish()
    _say(args, f"generalized {len(letters)} letters with k={args.k} "
          f"({report.iterations_run} EM iterations)")
    return 0


def cmd_pairs(args) -> int:
    run = Run(args, {"m": args.m})
    letters = _read_letters(run, args.input)
    dataset = neural.build_pairs(letters, args.m)
    run.write(args.out, neural.dump_pairs(dataset))
    run.finish()
    _say(args, f"{len(letters)} letters -> {len(dataset)} pairs")
    return 0


def cmd_train(args) -> int:
    params = {"m": args.m, "lr": args.lr, "iters": args.iters, "init": args.init}
    run = Run(args, params)
    if args.pairs:
        dataset = neural.load_pairs(run.input(args.pairs).read_text(encoding="utf-8"))
    elif args.input:
        dataset = neural.build_pairs(_read_letters(run, args.input), args.m)
    else:
        raise UserError("train needs --pairs FILE or --in DIR")
    train_set, test_set = neural.split_train_test(dataset, seed=args.seed)
    model = neural.init_mlp(args.seed, symmetric=args.init == "symmetric")
    cfg = neural.TrainConfig(learning_rate=args.lr, iterations=args.iters, seed=args.seed)
    trained, report = neural.train(model, train_set, cfg)

    held = test_set.pairs[0]
    generated = neural.generate_letter(trained, held.input)
    run.write(args.out, neural.dump_mlp(trained, common_length=dataset.common_length,
                                        test_pair=[held.input_index, held.output_index]))
    run.write(args.report, _cost_csv(report))
    run.write(args.generated, format_trajectory(generated))
    run.write(args.svg, _svg([to_dotted(generated, args.dot_radius)]))
    run.finish()
    _say(args, f"{len(dataset)} pairs ({len(train_set)} train / {len(test_set)} test); "
          f"cost {report.cost_trace[0]:.6g} -> {report.final_cost:.6g}")
    return 0


def _cost_csv(report: neural.TrainReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iteration", "cost"])
    for it, cost in zip(report.logged_iterations, report.cost_trace):
        writer.writerow([it, repr(cost)])
    return buf.getvalue()


def cmd_generate(args) -> int:
    params = {"extrude": args.extrude, "zlo": args.zlo, "zhi": args.zhi,
              "dot_radius": args.dot_radius}
    run = Run(args, params)
    model, meta = neural.load_mlp(run.input(args.model).read_text(encoding="utf-8"))
    letter = read_trajectory(run.input(args.input), 2)
    out = neural.generate_letter(model, letter, m=meta.get("common_length"))
    svg_paths = [to_dotted(out, args.dot_radius)]
    if args.extrude:
        out = neural.extrude_z(out, seed=args.seed, z_range=(args.zlo, args.zhi))
    run.write(args.out, format_trajectory(out))
    if args.svg:
        run.write(args.svg, _svg(svg_paths))
    run.finish()
    _say(args, f"generated {len(out)} points")
    return 0


def _oblique(points3: np.ndarray) -> np.ndarray:
    # cabinet-style view of a 3D path for the flat overview panel
    x, y, z = points3.T
    return np.column_stack([x + 0.5 * y * np.cos(np.pi / 6), z + 0.5 * y * np.sin(np.pi / 6)])


def cmd_biopsy(args) -> int:
    eps = None if args.epsilon == "auto" else _parse_epsilon(args.epsilon)
    params = {"plane": args.plane, "epsilon": args.epsilon, "samples": args.samples}
    run = Run(args, params)
    traj = read_trajectory(run.input(args.input), 3)
    stages = bio.run_biopsy_pipeline(traj, plane=args.plane, epsilon=eps, samples=args.samples)

    run.write(args.curve, format_trajectory(stages.curve))
    run.write(args.projected, format_trajectory(stages.projected))
    run.write(args.out, format_trajectory(stages.simplified))
    if args.svg:
        run.write(args.svg, _svg(_biopsy_panels(stages)))
    run.finish()
    _say(args, f"{len(traj)} samples -> {len(stages.projected)} projected -> "
          f"{len(stages.simplified)} simplified (epsilon {stages.epsilon:.4g})")
    return 0


def _parse_epsilon(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise UserError(f"--epsilon must be 'auto' or a number, got {text!r}") from None
    if value < 0:
        raise UserError("--epsilon must be non-negative")
    return value


def _biopsy_panels(stages: bio.BiopsyStages) -> list[VectorPath]:
    """Three panels side by side: 3D overview, projection, simplification."""
    panels = [_oblique(stages.curve.points), stages.projected.points, stages.simplified.points]
    placed = []
    cursor = 0.0
    for pts in panels:
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        shifted = pts - [lo[0] - cursor, 0.0]
        placed.append(shifted)
        cursor += (hi[0] - lo[0]) * 1.15 + 1e-3
    style = PathStyle(stroke_width=0.004)
    return [polyline_path(p, style) for p in placed]


# ----------------------------------------------------------------------------


def _add_global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # subcommands repeat the globals with suppressed defaults so that
    # "glyphtrace --seed 3 demo" and "glyphtrace demo --seed 3" agree
    def default(value):
        return argparse.SUPPRESS if suppress else value
    parser.add_argument("--seed", type=int, default=default(0), help="random seed (default 0)")
    parser.add_argument("--out-dir", default=default("."), help="directory all outputs go to")
    parser.add_argument("--quiet", action="store_true", default=default(False),
                        help="only report errors")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _add_global_options(common, suppress=True)

    parser = argparse.ArgumentParser(prog="glyphtrace", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo", parents=[common], help="write a synthetic demo dataset")
    p.add_argument("--count", type=int, default=DEFAULT_LETTER_COUNT)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("generalize", parents=[common],
                       help="fit a mixture to letter demonstrations and extract the curve")
    p.add_argument("--in", dest="input", required=True, help="directory of letter .csv files")
    p.add_argument("--k", type=int, default=gmm.DEFAULT_K)
    p.add_argument("--m", type=int, default=gmm.DEFAULT_RESAMPLE,
                   help="points per demonstration after resampling")
    p.add_argument("--max-iter", type=int, default=gmm.DEFAULT_MAX_ITER)
    p.add_argument("--tol", type=float, default=gmm.DEFAULT_TOL)
    p.add_argument("--tolerance", type=float, default=None,
                   help="Bezier fit tolerance (default 0.5%% of the bbox diagonal)")
    p.add_argument("--out", default="model.gmm")
    p.add_argument("--curve", default="curve.csv")
    p.add_argument("--svg", default="generalized.svg")
    p.set_defaults(func=cmd_generalize)

    p = sub.add_parser("pairs", parents=[common], help="build the ordered letter pair dataset")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--m", type=int, default=neural.DEFAULT_COMMON_LENGTH)
    p.add_argument("--out", default="pairs.json")
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("train", parents=[common], help="train the network and generate a letter")
    p.add_argument("--pairs", help="pair dataset written by 'pairs'")
    p.add_argument("--in", dest="input", help="directory of letters (instead of --pairs)")
    p.add_argument("--m", type=int, default=neural.DEFAULT_COMMON_LENGTH)
    p.add_argument("--lr", type=float, default=neural.TrainConfig.learning_rate)
    p.add_argument("--iters", type=int, default=neural.TrainConfig.iterations)
    p.add_argument("--init", choices=["positive", "symmetric"], default="positive",
                   help="'positive': U[0,1] weights, U[0,0.1] biases; 'symmetric': U[-1,1], U[-0.1,0.1]")
    p.add_argument("--dot-radius", type=float, default=0.006)
    p.add_argument("--out", default="model.mlp")
    p.add_argument("--report", default="cost.csv")
    p.add_argument("--generated", default="generated.csv")
    p.add_argument("--svg", default="generated.svg")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", parents=[common], help="run a trained network on a letter")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default="gen.csv")
    p.add_argument("--svg", default=None)
    p.add_argument("--extrude", action="store_true", help="add a random z coordinate")
    p.add_argument("--zlo", type=float, default=neural.DEFAULT_Z_RANGE[0])
    p.add_argument("--zhi", type=float, default=neural.DEFAULT_Z_RANGE[1])
    p.add_argument("--dot-radius", type=float, default=0.006)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("biopsy", parents=[common], help="interpolate, project and simplify a 3D path")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--plane", choices=["fit", "xy", "xz", "yz"], default="fit")
    p.add_argument("--epsilon", default="auto", help="'auto' (1%% of bbox diagonal) or a number")
    p.add_argument("--samples", type=int, default=None, help="spline samples (default 4x knots)")
    p.add_argument("--curve", default="curve3d.csv")
    p.add_argument("--projected", default="projected.csv")
    p.add_argument("--out", default="simplified.csv")
    p.add_argument("--svg", default="biopsy.svg")
    p.set_defaults(func=cmd_biopsy)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s")
    try:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        return args.func(args)
    except (UserError, ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
