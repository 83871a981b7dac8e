"""Relative error, ranks and storage of QTLR-QSVD over a grid of error budgets."""

import argparse
from pathlib import Path

from qtlrkit.augmentation import default_target_dims, forward, plan
from qtlrkit.imaging import read_image, to_quaternion
from qtlrkit.qtlr import qtlr_qsvd, relative_error

DEFAULT_IMAGE = Path(__file__).resolve().parents[1] / "tests" / "data" / "astronaut64.png"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--image", default=str(DEFAULT_IMAGE))
    ap.add_argument("--eps", type=float, nargs="+", default=[0.5, 0.3, 0.1, 0.05, 0.01])
    ap.add_argument("--rule", default="tail", choices=["tail", "delta_squared"])
    args = ap.parse_args()

    img = read_image(args.image)
    h, w, _ = img.shape
    p = plan(h, w, default_target_dims(h, w))
    t = forward(to_quaternion(img), p)
    print(f"image {h}x{w} -> tensor {list(t.dims)}")
    print("eps_p,relative_error,storage_ratio,ranks")
    for eps in sorted(args.eps, reverse=True):
        zc = qtlr_qsvd(t, eps, rule=args.rule)
        ranks = " ".join(map(str, zc.ranks))
        print(f"{eps},{relative_error(t, zc):.6f},{zc.num_params() / t.size:.4f},{ranks}")


if __name__ == "__main__":
    main()
