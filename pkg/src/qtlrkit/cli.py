"""Command-line entry point: ``decompose``, ``inpaint``, ``metrics`` and ``mask``.

Exit codes: 0 success, 2 argument or shape error, 3 I/O error, 4 numerical
failure (non-finite values).
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import augmentation as aug
from . import imaging
from .completion import PROX_SIDES, CompletionProblem, solve
from .qtlr import QTLRCores, qtlr_qsvd, reconstruct, save_cores
from .quatmat import TRUNCATION_RULES
from .quattensor import QuaternionTensor, frobenius_norm, load_qtns
from .svdkernel import KERNELS

EXIT_OK, EXIT_ARGS, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4


class NumericalFailure(RuntimeError):
    pass


@dataclass
class RunConfig:
    """Parameters shared by the commands; read from a key=value file, overridden by flags."""

    eps_p: float = 0.1
    rule: str = "tail"
    sr: float | None = None
    seed: int = 0
    target_dims: tuple[int, ...] | None = None
    epsilon: float = 1e-3
    C: float = 1.0
    mu0: tuple[float, ...] | None = None
    alpha: tuple[float, ...] | None = None
    mu_max: float = 1e6
    rho: float = 1.03
    tol: float = 1e-5
    max_iters: int = 300
    kernel: str = "lapack"
    prox_side: str = "left"

    def validate(self) -> None:
        if not self.eps_p > 0:
            raise ValueError("eps_p must be positive")
        if self.rule not in TRUNCATION_RULES:
            raise ValueError(f"rule must be one of {TRUNCATION_RULES}")
        if self.sr is not None and not 0.0 < self.sr <= 1.0:
            raise ValueError("sr must lie in (0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.target_dims is not None and any(d < 1 for d in self.target_dims):
            raise ValueError("target_dims must be positive")
        if not self.epsilon > 0 or self.C < 0:
            raise ValueError("need epsilon > 0 and C >= 0")
        if not self.rho > 1 or not self.mu_max > 0 or not self.tol > 0 or self.max_iters < 1:
            raise ValueError("need rho > 1, mu_max > 0, tol > 0, max_iters >= 1")
        if self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}")
        if self.prox_side not in PROX_SIDES:
            raise ValueError(f"prox_side must be one of {PROX_SIDES}")

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, tuple):
                v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"


_INT_TUPLES = {"target_dims"}
_FLOAT_TUPLES = {"mu0", "alpha"}
_INTS = {"seed", "max_iters"}
_STRS = {"rule", "kernel", "prox_side"}


def _convert(key: str, value: str):
    if key in _INT_TUPLES:
        return tuple(int(v) for v in value.replace("x", ",").split(",") if v.strip())
    if key in _FLOAT_TUPLES:
        return tuple(float(v) for v in value.split(",") if v.strip())
    if key in _INTS:
        return int(value)
    if key in _STRS:
        return value.strip()
    return float(value)


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse flat ``key=value`` lines; ``#`` starts a comment."""
    cfg = dataclasses.replace(base) if base is not None else RunConfig()
    names = {f.name for f in dataclasses.fields(RunConfig)}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {n}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in names:
            raise ValueError(f"config line {n}: unknown key {key!r}")
        try:
            setattr(cfg, key, _convert(key, value))
        except ValueError as e:
            raise ValueError(f"config line {n}: bad value for {key}: {value!r}") from e
    return cfg


def build_config(path: str | None, overrides: dict) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        cfg = parse_config_text(Path(path).read_text(), cfg)
    for k, v in overrides.items():
        if v is not None:
            setattr(cfg, k, v)
    cfg.validate()
    return cfg


# pipeline ------------------------------------------------------------------------


@dataclass
class InpaintResult:
    recovered: np.ndarray
    observed: np.ndarray
    mask: np.ndarray
    plan: aug.AugmentPlan
    psnr: float
    ssim: float
    psnr_zero_fill: float
    ssim_zero_fill: float
    iterations: int
    converged: bool
    seconds: float
    history: object


def inpaint_image(img: np.ndarray, mask: np.ndarray, cfg: RunConfig, callback=None) -> InpaintResult:
    """Encode, augment, complete, de-augment, decode and score one image."""
    h, w, _ = img.shape
    if mask.shape != (h, w):
        raise ValueError(f"mask shape {mask.shape} does not match image {(h, w)}")
    start = time.perf_counter()
    dims = cfg.target_dims or aug.default_target_dims(h, w)
    p = aug.plan(h, w, dims)
    q = imaging.to_quaternion(img)
    observed_q = QuaternionTensor(np.where(mask[None], q.data, 0.0))
    problem = CompletionProblem(
        aug.forward(observed_q, p),
        aug.forward_mask(mask, p),
        alpha=None if cfg.alpha is None else np.array(cfg.alpha),
        epsilon=cfg.epsilon,
        C=cfg.C,
        mu0=None if cfg.mu0 is None else np.array(cfg.mu0),
        mu_max=cfg.mu_max,
        rho=cfg.rho,
        tol=cfg.tol,
        max_iters=cfg.max_iters,
        kernel=cfg.kernel,
        prox_side=cfg.prox_side,
    )
    res = solve(problem, callback)
    recovered_q = aug.inverse(res.T, p)
    if not np.all(np.isfinite(recovered_q.data)):
        raise NumericalFailure("recovered image contains non-finite values")
    recovered = imaging.from_quaternion(recovered_q)
    observed = imaging.from_quaternion(observed_q)
    seconds = time.perf_counter() - start
    return InpaintResult(
        recovered,
        observed,
        mask,
        p,
        imaging.psnr(img, recovered),
        imaging.ssim(img, recovered),
        imaging.psnr(img, observed),
        imaging.ssim(img, observed),
        res.iterations,
        res.converged,
        seconds,
        res,
    )


def _load_tensor(path: Path, target_dims) -> QuaternionTensor:
    if path.suffix.lower() == ".qtns":
        return load_qtns(path)
    img = imaging.read_image(path)
    h, w, _ = img.shape
    p = aug.plan(h, w, target_dims or aug.default_target_dims(h, w))
    return aug.forward(imaging.to_quaternion(img), p)


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.6g}"


# commands ------------------------------------------------------------------------


def cmd_decompose(args) -> int:
    cfg = build_config(args.config, {"eps_p": args.eps, "target_dims": args.target_dims, "rule": args.rule,
                                     "kernel": args.kernel})
    t = _load_tensor(Path(args.input), cfg.target_dims)
    if not np.all(np.isfinite(t.data)):
        raise NumericalFailure("input tensor contains non-finite values")
    start = time.perf_counter()
    zc: QTLRCores = qtlr_qsvd(t, cfg.eps_p, rule=cfg.rule, kernel=cfg.kernel)
    seconds = time.perf_counter() - start
    nt = frobenius_norm(t)
    diff = frobenius_norm(t - reconstruct(zc))
    err = 0.0 if nt == 0.0 and diff == 0.0 else diff / nt
    if not math.isfinite(err):
        raise NumericalFailure("relative error is not finite")
    ratio = zc.num_params() / t.size
    out = Path(args.out)
    save_cores(zc, out)
    report = (
        f"dims={','.join(map(str, t.dims))}\n"
        f"eps_p={cfg.eps_p!r}\n"
        f"ranks={','.join(map(str, zc.ranks))}\n"
        f"relative_error={err!r}\n"
        f"storage_ratio={ratio!r}\n"
        f"seconds={seconds:.3f}\n"
    )
    (out / "report.txt").write_text(report)
    print(f"ranks={list(zc.ranks)} relative_error={err:.6e} storage_ratio={ratio:.4f}")
    return EXIT_OK


def cmd_inpaint(args) -> int:
    if args.mask is None and args.sr is None:
        cfg_sr = build_config(args.config, {}).sr
        if cfg_sr is None:
            raise ValueError("inpaint needs --mask, or --sr (on the command line or in the config)")
    cfg = build_config(
        args.config,
        {"sr": args.sr, "seed": args.seed, "target_dims": args.target_dims, "C": args.C,
         "epsilon": args.epsilon, "max_iters": args.max_iters, "tol": args.tol},
    )
    img = imaging.read_image(args.image)
    h, w, _ = img.shape
    if args.mask is not None:
        mask = imaging.structural_mask(args.mask)
        if mask.shape != (h, w):
            raise ValueError(f"mask {mask.shape} does not match image {(h, w)}")
    else:
        mask = imaging.random_mask(h, w, cfg.sr, cfg.seed)
    res = inpaint_image(img, mask, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    imaging.write_image(out / "recovered.png", res.recovered)
    imaging.write_image(out / "observed.png", res.observed)
    res.history.write_history(out / "history.csv")
    res.plan.save(out / "plan.txt")
    (out / "config.txt").write_text(cfg.to_text())
    metrics = (
        f"psnr={_fmt(res.psnr)}\n"
        f"ssim={res.ssim:.6f}\n"
        f"psnr_zero_fill={_fmt(res.psnr_zero_fill)}\n"
        f"ssim_zero_fill={res.ssim_zero_fill:.6f}\n"
        f"observed_fraction={mask.mean():.6f}\n"
        f"iterations={res.iterations}\n"
        f"converged={res.converged}\n"
        f"seconds={res.seconds:.3f}\n"
    )
    (out / "metrics.txt").write_text(metrics)
    print(
        f"PSNR={_fmt(res.psnr)} SSIM={res.ssim:.4f} (zero-fill PSNR={_fmt(res.psnr_zero_fill)}) "
        f"iterations={res.iterations} time={res.seconds:.1f}s"
    )
    return EXIT_OK


def cmd_metrics(args) -> int:
    ref = imaging.read_image(args.ref)
    test = imaging.read_image(args.test)
    print(f"PSNR={_fmt(imaging.psnr(ref, test))} SSIM={imaging.ssim(ref, test):.6f}")
    return EXIT_OK


def cmd_mask(args) -> int:
    if args.height < 1 or args.width < 1:
        raise ValueError("height and width must be positive")
    mask = imaging.random_mask(args.height, args.width, args.sr, args.seed)
    imaging.write_mask(args.out, mask)
    print(f"observed={int(mask.sum())}/{mask.size}")
    return EXIT_OK


def _dims(text: str) -> tuple[int, ...]:
    return _convert("target_dims", text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtlrkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decompose", help="QTLR-QSVD of a .qtns tensor or an augmented image")
    d.add_argument("--input", required=True)
    d.add_argument("--eps", type=float, default=None, help="relative error budget eps_p")
    d.add_argument("--out", required=True, help="directory for core_XX.qtns, cores.txt, report.txt")
    d.add_argument("--config")
    d.add_argument("--target-dims", type=_dims, default=None, help="augmentation shape for image input, e.g. 4,4,4")
    d.add_argument("--rule", choices=TRUNCATION_RULES, default=None)
    d.add_argument("--kernel", choices=KERNELS, default=None)
    d.set_defaults(func=cmd_decompose)

    p = sub.add_parser(
        "inpaint",
        help="complete missing pixels of a colour image",
        description="PSNR pools the squared error over all three channels (peak 1.0 on [0, 1] data).",
    )
    p.add_argument("--image", required=True)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--sr", type=float, default=None, help="sampling rate in (0, 1]")
    src.add_argument("--mask", default=None, help="mask image; non-black pixels are observed")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--target-dims", type=_dims, default=None)
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(func=cmd_inpaint)

    m = sub.add_parser("metrics", help="PSNR (pooled over channels) and SSIM of two images")
    m.add_argument("--ref", required=True)
    m.add_argument("--test", required=True)
    m.set_defaults(func=cmd_metrics)

    k = sub.add_parser("mask", help="write a seeded random sampling mask")
    k.add_argument("--height", type=int, required=True)
    k.add_argument("--width", type=int, required=True)
    k.add_argument("--sr", type=float, required=True)
    k.add_argument("--seed", type=int, required=True)
    k.add_argument("--out", required=True)
    k.set_defaults(func=cmd_mask)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NumericalFailure, FloatingPointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
