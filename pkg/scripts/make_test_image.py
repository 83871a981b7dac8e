"""Write the 64x64 test crop (astronaut face from scikit-image) to tests/data/."""

import argparse
from pathlib import Path

from skimage import data

from qtlrkit.imaging import write_image

CROP = (slice(80, 144), slice(176, 240))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests" / "data" / "astronaut64.png"))
    args = ap.parse_args()
    img = data.astronaut()[CROP] / 255.0
    write_image(args.out, img)
    print(f"wrote {args.out} {img.shape}")


if __name__ == "__main__":
    main()
