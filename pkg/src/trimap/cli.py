"""Command-line interface: ``trimap <subcommand> ...``.

Exit status is 0 on success, 1 on usage or input-file errors and 2 on
numerical failure; failures print ``ERROR <code> <detail>`` on stderr.
"""

import argparse
import logging
import os
import shlex
import sys

import numpy as np

from . import __version__
from .bod import D_STAR, posterior_target, run_direct_experiment, run_inverse_experiment
from .conditioning import condition, sample_conditional
from .diagnostics import kl_variance_direct, kl_variance_inverse, log_normalizing_constant
from .diagnostics import monotonicity_violations
from .direct import DirectBuildConfig, build_direct
from .errors import FileFormatError, NonConvergence, TrimapError
from .inverse import build_inverse, gaussianity_check, regress_direct_from_pairs
from .io import format_real, header_lines, load_map, load_samples, save_map, save_samples
from .maps import Direction
from .mcmc import adaptive_metropolis, batch_moment_errors, moments, preconditioned_sample
from .quadrature import Provenance, SampleSet, gauss_hermite_1d, reference_normals, tensorize
from .solver import invert
from .targets import BananaTarget, GaussianTarget, SubprocessTarget

log = logging.getLogger("trimap")

# tensor grids above this many nodes fall back to Monte Carlo in ``diagnose``
_MAX_DIAGNOSE_NODES = 200_000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"ERROR usage {message}", file=sys.stderr)
        raise SystemExit(1)


# -- configuration -----------------------------------------------------------

def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise FileFormatError(f"cannot read config {path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise FileFormatError(f"{path}:{lineno}: expected 'key = value'")
            out[key.strip()] = value.strip()
    return out


def _settings(args):
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        cfg[key.strip()] = value.strip()
    return cfg


def _get(cfg, key, flag, cast, default):
    """Flag value if given, else config value, else default."""
    if flag is not None:
        return flag
    if key in cfg:
        try:
            return cast(cfg[key])
        except ValueError:
            raise UsageError(f"bad value for {key}: {cfg[key]!r}") from None
    return default


def _floats(text):
    try:
        return np.array([float(v) for v in text.replace(",", " ").split()])
    except ValueError:
        raise UsageError(f"expected a list of numbers, got {text!r}") from None


def _matrix(text):
    rows = [_floats(r) for r in text.split(";") if r.strip()]
    if len({len(r) for r in rows}) != 1:
        raise UsageError(f"ragged matrix {text!r}")
    return np.array(rows)


def make_target(name, cfg):
    """Built-in target by name; ``target.*`` settings supply its parameters."""
    if name.startswith("cmd:"):
        if "target.dim" not in cfg:
            raise UsageError("subprocess targets need target.dim")
        target = SubprocessTarget(name[4:], int(cfg["target.dim"]))
    elif name == "gaussian":
        mean = _floats(cfg.get("target.mean", "0"))
        if "target.dim" in cfg and len(mean) == 1:
            mean = np.full(int(cfg["target.dim"]), mean[0])
        cov = _matrix(cfg["target.cov"]) if "target.cov" in cfg else np.eye(len(mean))
        if cov.shape != (len(mean), len(mean)):
            raise UsageError("target.cov must be a square matrix matching target.mean")
        target = GaussianTarget(mean, cov)
    elif name == "banana":
        target = BananaTarget(float(cfg.get("target.b", 1.0)), float(cfg.get("target.sigma", 1.0)))
    elif name == "bod-posterior":
        data = _floats(cfg["target.data"]) if "target.data" in cfg else D_STAR
        if data.shape != (5,):
            raise UsageError("target.data needs five observations")
        target = posterior_target(data)
    else:
        raise UsageError(f"unknown target {name!r} (gaussian, banana, bod-posterior, cmd:...)")
    if "target.scale" in cfg:
        target = target.scaled(float(cfg["target.scale"]))
    return target


def _command_line():
    return " ".join(shlex.quote(a) for a in ["trimap"] + sys.argv[1:])


def _write_report(path, items, seed=None, extra_lines=()):
    lines = header_lines(seed, _command_line())
    for key, value in items:
        if isinstance(value, (float, np.floating)):
            value = format_real(value)
        lines.append(f"{key} = {value}")
    lines += list(extra_lines)
    text = "\n".join(lines) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _report_items(rep):
    return [("objective", rep.objective), ("gradient_norm", rep.gradient_norm),
            ("iterations", rep.iterations), ("converged", "yes" if rep.converged else "no"),
            ("kl_variance_estimate", rep.kl_variance_estimate),
            ("log_normalizing_constant", rep.log_normalizing_constant),
            ("monotonicity_violations", rep.monotonicity_violations),
            ("nodes", rep.n_nodes), ("message", rep.message)]


def _load_points(path, dim=None):
    s = load_samples(path)
    if dim is not None and s.dim != dim:
        raise UsageError(f"{path} has dimension {s.dim}, expected {dim}")
    return s


# -- subcommands ---------------------------------------------------------------

def cmd_build_direct(args):
    cfg = _settings(args)
    target = make_target(args.target, cfg)
    seed = _get(cfg, "seed", args.seed, int, 0)
    config = DirectBuildConfig(
        integration=_get(cfg, "integration.kind", args.integration, str, "quadrature"),
        order=_get(cfg, "integration.order", args.order, int, 10),
        samples=_get(cfg, "integration.samples", args.mc_samples, int, 1000),
        seed=seed,
        kind=_get(cfg, "map.kind", args.kind, str, "total"),
        degree=_get(cfg, "map.degree", args.degree, int, 1),
        constraint=_get(cfg, "map.constraint", args.constraint, str, "auto"),
        gtol=_get(cfg, "optimizer.tol", args.tol, float, 1e-8),
        maxiter=_get(cfg, "optimizer.maxiter", args.maxiter, int, 500),
    )
    tmap, rep = build_direct(target, config)
    save_map(args.out, tmap, seed, _command_line())
    _write_report(args.report, _report_items(rep), seed)
    if not rep.converged:
        raise NonConvergence(f"direct build stopped: {rep.message}")


def cmd_build_inverse(args):
    cfg = _settings(args)
    samples = load_samples(args.samples)
    pts = samples.points
    if args.columns:
        try:
            order = [int(c) - 1 for c in args.columns.split(",")]
        except ValueError:
            raise UsageError(f"bad --columns {args.columns!r}") from None
        if sorted(order) != list(range(samples.dim)):
            raise UsageError("--columns must be a permutation of 1..dim")
        pts = pts[:, order]
    degree = _get(cfg, "map.degree", args.degree, int, 1)
    kind = _get(cfg, "map.kind", args.kind, str, "total")
    smap, rep = build_inverse(pts, kind=kind, degree=degree,
                              standardize=not args.no_standardize,
                              gtol=_get(cfg, "optimizer.tol", args.tol, float, 1e-10),
                              maxiter=_get(cfg, "optimizer.maxiter", args.maxiter, int, None),
                              threads=args.threads)
    save_map(args.out, smap, samples.seed, _command_line())
    items = [("samples", len(pts))] + _report_items(rep)[:5] + \
        [("monotonicity_violations", rep.monotonicity_violations)]
    for c in rep.components:
        items.append((f"component.{c.message.split(':')[0].split()[-1]}",
                      f"objective={format_real(c.objective)} grad={c.gradient_norm:.3e} "
                      f"iterations={c.iterations} converged={'yes' if c.converged else 'no'}"))
    extra = []
    x = None
    if args.check_gaussianity:
        x = smap(pts)
        extra = gaussianity_check(x).lines()
    if args.regress_direct:
        x = smap(pts) if x is None else x
        tmap, info = regress_direct_from_pairs(x, pts, kind=kind, degree=degree,
                                               threads=args.threads, return_info=True)
        save_map(args.regress_direct, tmap, samples.seed, _command_line())
        for k, v in info.items():
            items.append((f"regression.{k}", f"rms={format_real(v['rms'])} "
                                             f"violations={v['violations']}"))
    _write_report(args.report, items, samples.seed, extra)
    if not rep.converged:
        raise NonConvergence("inverse build: " + rep.message)


def cmd_invert(args):
    tmap = load_map(args.map)
    r = _load_points(args.infile, tmap.n)
    res = invert(tmap, r.points, tol=args.tol)
    if not res.ok:
        from .errors import BracketFailure

        raise BracketFailure(f"{res.failed.size} of {len(r)} points failed "
                             f"(first row {int(res.failed[0]) + 1})")
    prov = Provenance.PUSHFORWARD if tmap.direction is Direction.INVERSE else Provenance.PULLBACK
    save_samples(args.out, SampleSet(res.points, prov, seed=r.seed), r.seed, _command_line(),
                 {"max_residual": format_real(np.max(res.residuals))})


def cmd_sample(args):
    tmap = load_map(args.map)
    z = reference_normals(args.n, tmap.n, args.seed)
    if tmap.direction is Direction.DIRECT:
        y = tmap(z)
    else:
        res = invert(tmap, z, tol=args.tol)
        if not res.ok:
            from .errors import BracketFailure

            raise BracketFailure(f"inverse map could not be inverted at {res.failed.size} points")
        y = res.points
    save_samples(args.out, SampleSet(y, Provenance.PUSHFORWARD, seed=args.seed), args.seed,
                 _command_line())


def cmd_condition(args):
    tmap = load_map(args.map)
    ystar = _floats(args.ystar)
    if len(ystar) != args.ny:
        raise UsageError(f"--ystar has {len(ystar)} values but --ny is {args.ny}")
    cmap = condition(tmap, args.ny, ystar, tol=args.tol)
    post = sample_conditional(cmap, args.samples, args.seed)
    m = np.stack(moments(post.points))
    save_samples(args.out, post, args.seed, _command_line(),
                 {"ystar": " ".join(format_real(v) for v in ystar),
                  "xstar": " ".join(format_real(v) for v in cmap.x_star),
                  "mean": " ".join(format_real(v) for v in m[0])})


def cmd_diagnose(args):
    cfg = _settings(args)
    tmap = load_map(args.map)
    target = make_target(args.target, cfg) if args.target else None
    items = [("dim", tmap.n), ("direction", tmap.direction.value)]
    extra = []
    if tmap.direction is Direction.DIRECT:
        if target is None:
            raise UsageError("diagnosing a direct map needs --target")
        if args.samples:
            pts = _load_points(args.samples, tmap.n)
            rule = pts.as_rule()
            items.append(("integration", f"samples {len(pts)}"))
        elif args.order ** tmap.n <= _MAX_DIAGNOSE_NODES:
            rule = tensorize(gauss_hermite_1d(args.order), tmap.n)
            items.append(("integration", f"gauss-hermite {args.order}^{tmap.n}"))
        else:
            rule = SampleSet(reference_normals(args.mc_samples, tmap.n, args.seed),
                             Provenance.REFERENCE).as_rule()
            items.append(("integration", f"montecarlo {args.mc_samples}"))
        items += [("nodes", len(rule)),
                  ("kl_variance_estimate", kl_variance_direct(tmap, target, rule)),
                  ("log_normalizing_constant", log_normalizing_constant(tmap, target, rule)),
                  ("monotonicity_violations", monotonicity_violations(tmap, rule.nodes))]
    else:
        if not args.samples:
            raise UsageError("diagnosing an inverse map needs --samples (target draws)")
        pts = _load_points(args.samples, tmap.n)
        items.append(("samples", len(pts)))
        if target is not None:
            items.append(("kl_variance_estimate", kl_variance_inverse(tmap, pts, target.logpdf)))
        items.append(("monotonicity_violations", monotonicity_violations(tmap, pts.points)))
        extra = gaussianity_check(tmap(pts.points)).lines()
    _write_report(args.report, items, args.seed, extra)


def cmd_mcmc(args):
    cfg = _settings(args)
    target = make_target(args.target, cfg)
    x0 = _floats(args.x0) if args.x0 else None
    if args.precondition:
        tmap = load_map(args.precondition)
        if tmap.n != target.dim or tmap.direction is not Direction.DIRECT:
            raise UsageError("--precondition needs a direct map of the target's dimension")
        out = preconditioned_sample(tmap, target, args.steps, args.seed, args.burn, x0=x0)
        res = out.meta["mcmc"]
        chain = out.points
    else:
        x0 = np.zeros(target.dim) if x0 is None else x0
        res = adaptive_metropolis(lambda x: float(target.logpdf(x[None, :])[0]), x0,
                                  args.steps, args.burn, args.seed)
        chain = res.chain
    m = np.stack(moments(chain))
    se = batch_moment_errors(chain)
    extra = {"acceptance_rate": format_real(res.acceptance_rate),
             "ess": " ".join(format_real(v) for v in res.ess),
             "mean": " ".join(format_real(v) for v in m[0]),
             "mean_stderr": " ".join(format_real(v) for v in se[0])}
    save_samples(args.out, SampleSet(chain, Provenance.TARGET, seed=args.seed), args.seed,
                 _command_line(), extra)


def _moment_row(label, mom):
    return label + " " + " ".join(format_real(v) for v in np.asarray(mom).ravel())


def cmd_bod_bench(args):
    os.makedirs(args.outdir, exist_ok=True)
    cols = "mean1 mean2 var1 var2 skew1 skew2 kurt1 kurt2"
    if args.experiment == "inverse":
        e = run_inverse_experiment(args.samples, args.degree, args.seed,
                                   n_conditional=args.conditional_samples,
                                   conditional_seed=args.seed + 1, method=args.method,
                                   threads=args.threads)
        with open(os.path.join(args.outdir, "moments.txt"), "w") as fh:
            fh.write("\n".join(header_lines(args.seed, _command_line(),
                                            {"columns": "degree samples " + cols})) + "\n")
            fh.write(_moment_row(f"{args.degree} {args.samples}", e.moments) + "\n")
        save_samples(os.path.join(args.outdir, "conditional.txt"),
                     SampleSet(e.conditional_samples, Provenance.PUSHFORWARD, seed=args.seed + 1,
                               meta={"columns": "theta1 theta2"}), args.seed, _command_line())
        save_map(os.path.join(args.outdir, "inverse.trimap"), e.inverse_map, args.seed,
                 _command_line())
        if e.direct_map is not None:
            save_map(os.path.join(args.outdir, "direct.trimap"), e.direct_map, args.seed,
                     _command_line())
        items = [(f"time.{k}", v) for k, v in e.timings.items()]
        items += _report_items(e.reports["inverse"])[:5]
        _write_report(os.path.join(args.outdir, "report.txt"), items, args.seed)
        print(f"# {cols}")
        print(_moment_row("", e.moments).strip())
    else:
        e = run_direct_experiment(args.degree, order=args.order)
        save_map(os.path.join(args.outdir, "direct.trimap"), e.map, None, _command_line())
        items = _report_items(e.report) + [(f"time.{k}", v) for k, v in e.timings.items()]
        _write_report(os.path.join(args.outdir, "report.txt"), items, None)
        z = reference_normals(args.samples, 2, args.seed)
        save_samples(os.path.join(args.outdir, "pushforward.txt"),
                     SampleSet(e.map(z), Provenance.PUSHFORWARD, seed=args.seed,
                               meta={"columns": "theta1 theta2"}), args.seed, _command_line())
        print(f"kl_variance_estimate = {format_real(e.kl_variance)}")
        if not e.report.converged:
            raise NonConvergence(e.report.message)


# -- parser --------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="trimap", description="Triangular transport maps.")
    p.add_argument("--version", action="version", version=f"trimap {__version__}")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: TRIMAP_THREADS or all cores)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common_cfg(sp):
        sp.add_argument("--config", help="key = value settings file (flags take precedence)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="extra setting, e.g. target.mean=1,2")

    sp = sub.add_parser("build-direct", help="fit a direct map to an unnormalized density")
    sp.add_argument("--target", required=True)
    common_cfg(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--report")
    sp.add_argument("--degree", type=int)
    sp.add_argument("--kind", choices=["total", "nomixed", "diagonal", "monotone", "rbf"])
    sp.add_argument("--integration", choices=["quadrature", "montecarlo"])
    sp.add_argument("--order", type=int)
    sp.add_argument("--mc-samples", type=int)
    sp.add_argument("--constraint", choices=["auto", "monotone", "pointwise"])
    sp.add_argument("--tol", type=float)
    sp.add_argument("--maxiter", type=int)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_build_direct)

    sp = sub.add_parser("build-inverse", help="fit an inverse map to target samples")
    sp.add_argument("--samples", required=True)
    common_cfg(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--report")
    sp.add_argument("--degree", type=int)
    sp.add_argument("--kind", choices=["total", "nomixed", "diagonal", "monotone", "rbf"])
    sp.add_argument("--columns", help="1-based column order, e.g. 3,4,1,2")
    sp.add_argument("--regress-direct", metavar="FILE", help="also regress a direct map")
    sp.add_argument("--check-gaussianity", action="store_true")
    sp.add_argument("--no-standardize", action="store_true")
    sp.add_argument("--tol", type=float)
    sp.add_argument("--maxiter", type=int)
    sp.set_defaults(func=cmd_build_inverse)

    sp = sub.add_parser("invert", help="solve map(y) = r row by row")
    sp.add_argument("--map", required=True)
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.set_defaults(func=cmd_invert)

    sp = sub.add_parser("sample", help="push reference draws through a map")
    sp.add_argument("--map", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("condition", help="sample the conditional at fixed leading coordinates")
    sp.add_argument("--map", required=True)
    sp.add_argument("--ny", type=int, required=True)
    sp.add_argument("--ystar", required=True)
    sp.add_argument("--samples", type=int, default=30000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.set_defaults(func=cmd_condition)

    sp = sub.add_parser("diagnose", help="KL, normalizing constant and Gaussianity reports")
    sp.add_argument("--map", required=True)
    sp.add_argument("--target")
    common_cfg(sp)
    sp.add_argument("--samples")
    sp.add_argument("--report")
    sp.add_argument("--order", type=int, default=10)
    sp.add_argument("--mc-samples", type=int, default=10000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("mcmc", help="adaptive Metropolis, optionally map-preconditioned")
    sp.add_argument("--target", required=True)
    common_cfg(sp)
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--burn", type=int, default=0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--x0")
    sp.add_argument("--out", required=True)
    sp.add_argument("--precondition", metavar="MAP")
    sp.set_defaults(func=cmd_mcmc)

    sp = sub.add_parser("bod-bench", help="BOD benchmark experiments")
    sp.add_argument("--experiment", choices=["inverse", "direct"], required=True)
    sp.add_argument("--degree", type=int, default=3)
    sp.add_argument("--samples", type=int, default=50000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--outdir", required=True)
    sp.add_argument("--method", choices=["regression", "invert"], default="regression")
    sp.add_argument("--conditional-samples", type=int, default=30000)
    sp.add_argument("--order", type=int, default=10)
    sp.set_defaults(func=cmd_bod_bench)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be positive")
        os.environ["TRIMAP_THREADS"] = str(args.threads)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (UsageError, FileFormatError, OSError) as exc:
        code = "bad-file" if not isinstance(exc, UsageError) else "usage"
        print(f"ERROR {code} {exc}", file=sys.stderr)
        return 1
    except TrimapError as exc:
        print(f"ERROR {exc.code} {exc}", file=sys.stderr)
        return 2
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"ERROR numerical {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
