"""Command-line front end.

Subcommands cover the whole pipeline: `synth` writes a seeded scene, `tree`
dumps the flow-dependency structure, `run` learns parameters and writes the
MAP class map, `baseline` classifies per pixel with optional smoothing,
`eval` scores a prediction against truth, and `bench` times the stages over
scene sizes.

Exit codes are a stable scripting contract: 0 success, 1 usage error,
2 data or format error, 3 numerical failure. On any failure, files the
failing subcommand had started writing are removed, so an output directory
never holds a partial result set. Every subcommand writes byte-identical
files on repeated identical invocations, except `bench`, whose measured
timings vary run to run.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from ._kernels import warm_up
from .baseline import label_propagation_smooth, pixelwise_classify
from .errors import DataError, FloodHmtError, NumericalError, UsageError
from .figures import (
    save_bench_plot,
    save_class_map,
    save_em_trace,
    save_marginal_map,
    save_metrics_chart,
)
from .flowtree import build_flow_tree, dump_tree, validate_partial_order
from .infer import Evidence, max_sum, sum_product
from .learn import EmConfig, em_fit
from .metrics import parse_machine_lines, report
from .model import ModelParams, fit_initial_params, local_log_density, params_to_text
from .raster import Grid, load_scene, read_grid, write_grid, write_ppm
from .synth import SynthConfig, config_from_text, generate_scene, write_scene


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); keep our exit map
        raise UsageError(message)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _add_scene_flags(p: argparse.ArgumentParser, labels_required: bool) -> None:
    p.add_argument("--dem", required=True, help="elevation grid (.asc)")
    p.add_argument(
        "--band",
        action="append",
        required=True,
        metavar="PATH",
        help="feature band grid; repeat once per band, order is kept",
    )
    p.add_argument(
        "--labels",
        required=labels_required,
        help="class grid with nodata at unlabeled pixels; initializes the Gaussians",
    )


def _add_common_flags(p: argparse.ArgumentParser, connectivity_default: int | None = 4) -> None:
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=connectivity_default)
    p.add_argument(
        "--workers",
        type=_positive_int,
        default=1,
        help="reserved concurrency bound; results are identical at any value",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="floodhmt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tree", help="build and dump the flow-dependency tree")
    p.add_argument("--dem", required=True)
    _add_common_flags(p)
    p.set_defaults(func=cmd_tree)

    p = sub.add_parser("run", help="learn parameters and write the MAP class map")
    _add_scene_flags(p, labels_required=True)
    _add_common_flags(p)
    p.add_argument("--rho", type=float, default=0.99, help="initial flood-carryover probability")
    p.add_argument("--pi", type=float, default=None, help="override the fitted source prior")
    p.add_argument("--max-iters", type=_positive_int, default=50)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--fix-gaussians", action="store_true", help="EM updates pi and rho only")
    p.add_argument("--emit-ppm", action="store_true", help="also write class_map.ppm")
    p.add_argument("--emit-marginals", action="store_true", help="also write marginals.asc and figure")
    p.add_argument("--emit-tree", action="store_true", help="also write tree.txt")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("baseline", help="per-pixel Gaussian classifier with smoothing")
    _add_scene_flags(p, labels_required=True)
    _add_common_flags(p)
    p.add_argument("--pi", type=float, default=None, help="override the fitted class prior")
    p.add_argument("--smooth-iters", type=_nonneg_int, default=10)
    p.add_argument("--emit-ppm", action="store_true")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("eval", help="score a prediction against truth")
    p.add_argument("--pred", required=True, help="predicted class grid")
    p.add_argument("--truth", required=True, help="reference class grid")
    _add_common_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="write a seeded synthetic scene")
    _add_common_flags(p, connectivity_default=None)
    p.add_argument("--config", default=None, help="config or manifest file; flags override it")
    p.add_argument("--nrows", type=_positive_int, default=None)
    p.add_argument("--ncols", type=_positive_int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--terrain", choices=("ramp", "bumps"), default=None)
    p.add_argument("--bump-count", type=_nonneg_int, default=None)
    p.add_argument("--bump-amplitude", type=float, default=None)
    p.add_argument("--bump-width", type=float, default=None)
    p.add_argument("--water-level", type=float, default=None)
    p.add_argument("--flood-quantile", type=float, default=None)
    p.add_argument("--bands", type=_positive_int, default=None)
    p.add_argument("--mean-dry", type=float, default=None)
    p.add_argument("--mean-flood", type=float, default=None)
    p.add_argument("--noise-sigma", type=float, default=None)
    p.add_argument("--canopy-fraction", type=float, default=None)
    p.add_argument("--strip-count", type=_nonneg_int, default=None)
    p.add_argument("--strip-amplitude", type=float, default=None)
    p.add_argument("--label-noise", type=float, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="time construction, learning, and inference per size")
    _add_common_flags(p)
    p.add_argument("--sizes", default="128,256,512", help="comma-separated square side lengths")
    p.add_argument("--repeats", type=_positive_int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=_positive_int, default=10)
    p.set_defaults(func=cmd_bench)

    return parser


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(written: list[Path], path: Path) -> Path:
    """Track a path before writing so failures can clean it up."""
    written.append(path)
    return path


def _fit_params(scene, args) -> ModelParams:
    params = fit_initial_params(
        scene.features(*np.nonzero(scene.labels.valid_mask())),
        scene.labels.values[scene.labels.valid_mask()],
        rho=getattr(args, "rho", 0.99),
    )
    if args.pi is not None:
        params = ModelParams(
            pi=args.pi, rho=params.rho, mu=params.mu, sigma=params.sigma,
            reg_epsilon=params.reg_epsilon,
        )
    return params


def _labels_to_grid(tree, labels: np.ndarray, template: Grid) -> Grid:
    vals = np.full(template.values.shape, template.nodata, dtype=np.float64)
    vals[tree.node_row, tree.node_col] = labels.astype(np.float64)
    return template.with_values(vals)


def cmd_tree(args, written: list[Path]) -> None:
    out = _outdir(args)
    dem = read_grid(args.dem)
    start = time.perf_counter()
    tree = build_flow_tree(dem, connectivity=args.connectivity)
    elapsed = time.perf_counter() - start
    _emit(written, out / "tree.txt").write_text(dump_tree(tree), encoding="ascii", newline="")
    print(f"nodes {tree.node_count}")
    print(f"construction_seconds {elapsed:.3f}")


def cmd_run(args, written: list[Path]) -> None:
    out = _outdir(args)
    scene = load_scene(args.dem, args.band, args.labels)
    tree = build_flow_tree(scene.dem, connectivity=args.connectivity)
    params = _fit_params(scene, args)
    features = scene.features(tree.node_row, tree.node_col)
    config = EmConfig(max_iters=args.max_iters, tol=args.tol, fix_gaussians=args.fix_gaussians)
    params, trace = em_fit(tree, features, params, config)
    evidence = Evidence(log_density=local_log_density(params, features))
    labels = max_sum(tree, evidence, params)
    if validate_partial_order(tree, labels) != 0:
        raise NumericalError("MAP labeling violates the flow partial order")

    class_map = _labels_to_grid(tree, labels, scene.dem)
    write_grid(_emit(written, out / "class_map.asc"), class_map)
    _emit(written, out / "params.txt").write_text(params_to_text(params), encoding="ascii", newline="")
    trace_text = trace.lines() + f"# converged {trace.converged}\n"
    for flag in trace.flags:
        trace_text += f"# {flag}\n"
    _emit(written, out / "em_trace.txt").write_text(trace_text, encoding="ascii", newline="")
    save_class_map(class_map, _emit(written, out / "class_map.png"), title="MAP class map")
    save_em_trace(trace, _emit(written, out / "em_trace.png"))
    if args.emit_ppm:
        _emit(written, out / "class_map.ppm").write_bytes(write_ppm(class_map))
    if args.emit_marginals:
        post = sum_product(tree, evidence, params)
        marg = _labels_to_grid(tree, post.gamma, scene.dem)
        write_grid(_emit(written, out / "marginals.asc"), marg)
        save_marginal_map(marg, _emit(written, out / "marginals.png"))
    if args.emit_tree:
        _emit(written, out / "tree.txt").write_text(dump_tree(tree), encoding="ascii", newline="")
    print(f"nodes {tree.node_count}")
    print(f"iterations {trace.iterations}")
    print(f"loglik {trace.logliks[-1]}")
    print(f"flooded {int((labels == 1).sum())}")


def cmd_baseline(args, written: list[Path]) -> None:
    out = _outdir(args)
    scene = load_scene(args.dem, args.band, args.labels)
    params = _fit_params(scene, args)
    raw = pixelwise_classify(scene, params)
    smoothed = label_propagation_smooth(raw, iterations=args.smooth_iters)
    write_grid(_emit(written, out / "baseline_map.asc"), smoothed)
    save_class_map(smoothed, _emit(written, out / "baseline_map.png"), title="baseline class map")
    if args.emit_ppm:
        _emit(written, out / "baseline_map.ppm").write_bytes(write_ppm(smoothed))
    print(f"flooded {int((smoothed.values == 1.0).sum())}")


def cmd_eval(args, written: list[Path]) -> None:
    out = _outdir(args)
    pred = read_grid(args.pred)
    truth = read_grid(args.truth)
    text = report(pred, truth)
    _emit(written, out / "report.txt").write_text(text, encoding="ascii", newline="")
    save_metrics_chart(parse_machine_lines(text), _emit(written, out / "metrics.png"))
    print(text, end="")


def cmd_synth(args, written: list[Path]) -> None:
    out = _outdir(args)
    if args.config is not None:
        path = Path(args.config)
        if not path.is_file():
            raise DataError(f"config file not found: {path}")
        config = config_from_text(path.read_text(encoding="ascii"))
    else:
        config = SynthConfig()
    overrides = {
        name: getattr(args, name)
        for name in (
            "nrows", "ncols", "seed", "terrain", "bump_count", "bump_amplitude",
            "bump_width", "water_level", "flood_quantile", "bands", "mean_dry",
            "mean_flood", "noise_sigma", "canopy_fraction", "strip_count",
            "strip_amplitude", "label_noise", "connectivity",
        )
        if getattr(args, name) is not None
    }
    config = SynthConfig(**{**config.__dict__, **overrides})
    paths = write_scene(config, out)
    written.extend(paths.values())
    for name in sorted(paths):
        print(f"{name} {paths[name].name}")


def cmd_bench(args, written: list[Path]) -> None:
    out = _outdir(args)
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"--sizes expects comma-separated integers, got {args.sizes!r}") from exc
    if not sizes or min(sizes) < 8:
        raise UsageError("--sizes needs side lengths of at least 8")
    warm_up()
    rows = []
    for size in sizes:
        t_con = t_learn = t_inf = 0.0
        for _ in range(args.repeats):
            config = SynthConfig(nrows=size, ncols=size, seed=args.seed, canopy_fraction=0.1)
            scene, _truth, _canopy = generate_scene(config)
            start = time.perf_counter()
            tree = build_flow_tree(scene.dem, connectivity=args.connectivity)
            t_con += time.perf_counter() - start
            params = fit_initial_params(
                scene.features(*np.nonzero(scene.labels.valid_mask())),
                scene.labels.values[scene.labels.valid_mask()],
            )
            features = scene.features(tree.node_row, tree.node_col)
            start = time.perf_counter()
            params, _trace = em_fit(
                tree, features, params, EmConfig(max_iters=args.max_iters, tol=1e-300)
            )
            t_learn += time.perf_counter() - start
            start = time.perf_counter()
            evidence = Evidence(log_density=local_log_density(params, features))
            max_sum(tree, evidence, params)
            t_inf += time.perf_counter() - start
        n = args.repeats
        rows.append((size, t_con / n, t_learn / n, t_inf / n))
    lines = ["size construction_s learning_s inference_s"]
    for size, t_con, t_learn, t_inf in rows:
        lines.append(f"{size} {t_con:.4f} {t_learn:.4f} {t_inf:.4f}")
    table = "\n".join(lines) + "\n"
    _emit(written, out / "bench.txt").write_text(table, encoding="ascii", newline="")
    save_bench_plot(rows, _emit(written, out / "bench.png"))
    print(table, end="")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    written: list[Path] = []
    try:
        args = parser.parse_args(argv)
        args.func(args, written)
        return 0
    except FloodHmtError as exc:
        for path in written:
            Path(path).unlink(missing_ok=True)
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, UsageError):
            return 1
        if isinstance(exc, NumericalError):
            return 3
        return 2


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
