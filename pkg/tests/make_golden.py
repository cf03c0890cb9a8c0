"""Regenerate tests/golden: python3 tests/make_golden.py"""

from pathlib import Path

from objaware.cli import main

GOLDEN = Path(__file__).with_name("golden")


def pipeline(out: Path) -> list[list[str]]:
    o = str(out)
    return [
        ["synth", "--out", o, "--seed", "7", "--frames", "4", "--height", "32", "--width", "32",
         "--patch", "2x8x8", "--coverage", "0.08"],
        ["heatmap", "--video", f"{o}/video.soart", "--dets", f"{o}/detections.jsonl",
         "--out", f"{o}/heatmap.soart"],
        ["objectness", "--heatmap", f"{o}/heatmap.soart", "--video", f"{o}/video.soart",
         "--out", f"{o}/objectness.soart"],
        ["mask", "--strategy", "object-aware", "--rho", "0.75", "--seed", "3",
         "--video", f"{o}/video.soart", "--objectness", f"{o}/objectness.soart",
         "--out", f"{o}/mask.soarm"],
        ["weights", "--objectness", f"{o}/objectness.soart", "--mask", f"{o}/mask.soarm",
         "--out", f"{o}/weights.jsonl"],
    ]


def run(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for argv in pipeline(out):
        if main(argv) != 0:
            raise SystemExit(f"failed: {argv}")


if __name__ == "__main__":
    run(GOLDEN)
