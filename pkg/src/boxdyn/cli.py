"""Command-line pipeline: configuration, data loading, and exports.

boxdyn analyze  --config cfg.json [overrides]
boxdyn compare  --fine fine.json --coarse coarse.json [--out dir]

Exit codes: 0 success, 2 configuration or input error, 3 computation
failure (e.g. a carrier acyclicity failure with its remediation hint).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .compare import check_epimorphism, project
from .conley import ConleyIndex, conley_index
from .errors import (BoxdynError, ConfigError, DimensionMismatch,
                     EmptyDataset, ParseError)
from .graph_dynamics import MorseGraph, condensation, morse_graph, \
    morse_graph_from_jsonable
from .grid import CubicalGrid, PhaseSpace
from .oracles import LeslieOracle, LipschitzDataOracle, MlpOracle, \
    PiecewiseExample1D
from .outer_approx import BoxMap, build_boxmap

WEIGHTS_FORMAT_TAG = "mlp-weights v1"
DATA_FORMAT_TAG = "trajectory-pairs v1"


@dataclass
class AnalysisConfig:
    lower: list
    upper: list
    depths: list
    rho: float
    prime: int = 5
    oracle: dict = field(default_factory=dict)
    out: str = "out"
    cache: bool = True

    def validate(self):
        if len(self.lower) != len(self.upper) or len(self.lower) != len(self.depths):
            raise ConfigError("domain bounds and depths must share one dimension")
        if any(lo >= up for lo, up in zip(self.lower, self.upper)):
            raise ConfigError("domain lower bounds must be below upper bounds")
        if self.rho < 0:
            raise ConfigError("rho must be nonnegative")
        p = int(self.prime)
        if p < 2 or any(p % k == 0 for k in range(2, int(p**0.5) + 1)):
            raise ConfigError(f"prime must be a prime number, got {self.prime}")
        if p >= 1 << 16:
            raise ConfigError("prime must be below 2^16")
        if not isinstance(self.oracle, dict) or "type" not in self.oracle:
            raise ConfigError("oracle spec must be a mapping with a 'type' key")
        return self

    def to_jsonable(self) -> dict:
        return {
            "lower": list(self.lower),
            "upper": list(self.upper),
            "depths": list(self.depths),
            "rho": self.rho,
            "prime": self.prime,
            "oracle": self.oracle,
            "out": self.out,
        }

    def cache_key(self) -> str:
        doc = self.to_jsonable()
        doc.pop("out")
        blob = json.dumps(doc, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_config(path) -> AnalysisConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        return AnalysisConfig(
            lower=doc["domain"]["lower"],
            upper=doc["domain"]["upper"],
            depths=doc["depths"],
            rho=float(doc["rho"]),
            prime=int(doc.get("prime", 5)),
            oracle=doc["oracle"],
            out=doc.get("out", "out"),
        ).validate()
    except KeyError as e:
        raise ConfigError(f"config {path} missing field {e}") from e


def load_mlp_weights(path) -> MlpOracle:
    """Parse the plain-text weights format.

    Line 1: format tag.  Line 2: 'activation relu'.  Line 3:
    'layers <k>'.  Then per layer: 'layer <in> <out>', <out> rows of
    <in> weights, one row of <out> biases.
    """
    lines = Path(path).read_text().splitlines()

    def fail(lineno, msg):
        raise ParseError(f"{path}:{lineno}: {msg}")

    def floats(lineno, expect):
        if lineno > len(lines):
            fail(lineno, "unexpected end of file")
        parts = lines[lineno - 1].split()
        try:
            vals = [float(v) for v in parts]
        except ValueError:
            fail(lineno, f"expected numbers, got {lines[lineno - 1]!r}")
        if len(vals) != expect:
            raise DimensionMismatch(
                f"{path}:{lineno}: expected {expect} values, got {len(vals)}"
            )
        return vals

    if not lines or lines[0].strip() != WEIGHTS_FORMAT_TAG:
        fail(1, f"expected format tag {WEIGHTS_FORMAT_TAG!r}")
    if len(lines) < 3 or lines[1].split() != ["activation", "relu"]:
        fail(2, "expected 'activation relu'")
    head = lines[2].split()
    if len(head) != 2 or head[0] != "layers":
        fail(3, "expected 'layers <count>'")
    try:
        n_layers = int(head[1])
    except ValueError:
        fail(3, f"layer count must be an integer, got {head[1]!r}")

    layers = []
    ln = 4
    for k in range(n_layers):
        if ln > len(lines):
            fail(ln, f"missing header for layer {k}")
        parts = lines[ln - 1].split()
        if len(parts) != 3 or parts[0] != "layer":
            fail(ln, "expected 'layer <in> <out>'")
        try:
            n_in, n_out = int(parts[1]), int(parts[2])
        except ValueError:
            fail(ln, "layer sizes must be integers")
        ln += 1
        w = [floats(ln + r, n_in) for r in range(n_out)]
        ln += n_out
        b = floats(ln, n_out)
        ln += 1
        layers.append((np.array(w), np.array(b)))
    return MlpOracle(layers)


def load_trajectory_data(path, lipschitz: float) -> LipschitzDataOracle:
    """Rows of 2d numbers (x then f(x)), whitespace or comma separated.
    An optional leading format-tag line is accepted."""
    lines = Path(path).read_text().splitlines()
    rows = []
    ncols = None
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        if lineno == 1 and text == DATA_FORMAT_TAG:
            continue
        parts = text.replace(",", " ").split()
        try:
            vals = [float(v) for v in parts]
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-numeric value in {text!r}")
        if ncols is None:
            ncols = len(vals)
            if ncols == 0 or ncols % 2 != 0:
                raise ParseError(
                    f"{path}:{lineno}: rows need an even number of columns"
                )
        elif len(vals) != ncols:
            raise ParseError(
                f"{path}:{lineno}: expected {ncols} columns, got {len(vals)}"
            )
        rows.append(vals)
    if not rows:
        raise EmptyDataset(f"{path} contains no samples")
    arr = np.array(rows)
    d = ncols // 2
    return LipschitzDataOracle(arr[:, :d], arr[:, d:], lipschitz)


def build_oracle(cfg: AnalysisConfig, space: PhaseSpace):
    spec = cfg.oracle
    kind = spec["type"]
    if kind == "leslie":
        theta = spec.get("theta", [23.5, 23.5])
        return LeslieOracle(tuple(theta), domain=space)
    if kind == "piecewise1d":
        return PiecewiseExample1D(float(spec["theta"]), domain=space)
    if kind == "mlp":
        return load_mlp_weights(spec["weights"])
    if kind == "data":
        return load_trajectory_data(spec["samples"], float(spec["lipschitz"]))
    raise ConfigError(f"unknown oracle type {kind!r}")


def _cached_boxmap(cfg: AnalysisConfig, grid: CubicalGrid, oracle) -> BoxMap:
    out = Path(cfg.out)
    cache = out / f"boxmap_{cfg.cache_key()}.npz"
    if cfg.cache and cache.exists():
        with np.load(cache) as z:
            return BoxMap(grid, cfg.rho, jmin=z["jmin"], jmax=z["jmax"],
                          exterior=z["exterior"])
    bm = build_boxmap(grid, oracle, cfg.rho)
    if cfg.cache and bm.is_rect_form:
        out.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(cache, jmin=bm.jmin, jmax=bm.jmax,
                            exterior=bm.exterior)
    return bm


def run_analysis(cfg: AnalysisConfig):
    """Full pipeline; returns (MorseGraph, manifest dict)."""
    timings = {}
    t0 = time.perf_counter()
    space = PhaseSpace(cfg.lower, cfg.upper)
    grid = CubicalGrid(space, cfg.depths)
    oracle = build_oracle(cfg, space)
    if oracle.dimension != grid.dimension:
        raise ConfigError(
            f"oracle dimension {oracle.dimension} != domain dimension "
            f"{grid.dimension}"
        )
    boxmap = _cached_boxmap(cfg, grid, oracle)
    timings["boxmap_s"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    cond = condensation(boxmap)
    mg = morse_graph(cond)
    timings["morse_graph_s"] = time.perf_counter() - t1

    t2 = time.perf_counter()
    for q, cid in enumerate(mg.component_ids):
        mg.index_of[q] = conley_index(boxmap, cond, cid, cfg.prime)
    timings["conley_s"] = time.perf_counter() - t2
    timings["total_s"] = time.perf_counter() - t0

    manifest = {
        "config": cfg.to_jsonable(),
        "cache_key": cfg.cache_key(),
        "oracle_lipschitz_bound": float(oracle.lipschitz_upper_bound()),
        "n_boxes": grid.box_count,
        "n_exterior_boxes": int(boxmap.exterior.sum()),
        "n_morse_nodes": len(mg.nodes),
        "timings": timings,
        "versions": {
            "boxdyn": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "notes": [
            "Exterior boxes (image enclosure outside the domain) are kept "
            "out of index pairs; they may still appear in downsets.",
        ],
    }
    return mg, manifest


def write_outputs(cfg: AnalysisConfig, mg: MorseGraph, manifest: dict):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "morse_graph.dot").write_text(mg.to_dot())
    (out / "morse_graph.json").write_text(mg.to_json())
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    with open(out / "regions.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["# grid"] + [f"{lo}:{up}:{s}" for lo, up, s in
                                 zip(cfg.lower, cfg.upper, mg.grid.subdivisions)])
        w.writerow(["box_index", "node_id"])
        for q in mg.nodes:
            for b in mg.region_of(q):
                w.writerow([int(b), q])


def load_morse_graph(path) -> MorseGraph:
    doc = json.loads(Path(path).read_text())
    return morse_graph_from_jsonable(doc, index_factory=ConleyIndex.from_jsonable)


def cmd_analyze(cfg: AnalysisConfig):
    mg, manifest = run_analysis(cfg)
    write_outputs(cfg, mg, manifest)
    print(f"morse graph: {len(mg.nodes)} nodes -> {cfg.out}/morse_graph.dot")
    for q in mg.nodes:
        print(f"  node {mg.node_label(q)}  region={mg.region_of(q).size} boxes")
    return mg


def cmd_compare(cfg_fine: AnalysisConfig, cfg_coarse: AnalysisConfig, out=None):
    fine, man_f = run_analysis(cfg_fine)
    coarse, man_c = run_analysis(cfg_coarse)
    nu = project(fine, coarse)
    report = nu.to_jsonable()
    report["epimorphism_check"] = check_epimorphism(nu, fine, coarse)
    report["fine_manifest"] = man_f
    report["coarse_manifest"] = man_c
    out = Path(out or cfg_fine.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "nu_report.json").write_text(json.dumps(report, indent=2))
    ok = report["epimorphism_check"]["is_epimorphism"]
    print(f"nu: {'poset epimorphism verified' if ok else 'NOT an epimorphism'} "
          f"-> {out}/nu_report.json")
    return nu


def _apply_overrides(cfg: AnalysisConfig, args) -> AnalysisConfig:
    if args.domain:
        try:
            pairs = [tuple(map(float, p.split(":"))) for p in args.domain.split(",")]
        except ValueError:
            raise ConfigError(f"cannot parse --domain {args.domain!r}")
        cfg.lower = [p[0] for p in pairs]
        cfg.upper = [p[1] for p in pairs]
    if args.depth:
        cfg.depths = [int(v) for v in args.depth.split(",")]
    if args.rho is not None:
        cfg.rho = args.rho
    if args.prime is not None:
        cfg.prime = args.prime
    if args.oracle:
        cfg.oracle = _parse_oracle_flag(args.oracle)
    if args.out:
        cfg.out = args.out
    if args.no_cache:
        cfg.cache = False
    return cfg.validate()


def _parse_oracle_flag(text: str) -> dict:
    kind, _, rest = text.partition(":")
    if kind == "leslie":
        return {"type": "leslie",
                "theta": [float(v) for v in rest.split(",")] if rest else [23.5, 23.5]}
    if kind == "piecewise1d":
        return {"type": "piecewise1d", "theta": float(rest)}
    if kind == "mlp":
        return {"type": "mlp", "weights": rest}
    if kind == "data":
        path, _, lip = rest.rpartition(":")
        return {"type": "data", "samples": path, "lipschitz": float(lip)}
    raise ConfigError(f"unknown oracle flag {text!r}")


def _empty_config() -> AnalysisConfig:
    return AnalysisConfig(lower=[], upper=[], depths=[], rho=0.0)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="boxdyn",
        description="Rigorous Morse graphs and Conley indices for "
                    "approximated maps on a cubical grid.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="run one analysis")
    pa.add_argument("--config", help="JSON config file")
    pa.add_argument("--domain", help="per-axis bounds lo:hi,lo:hi,...")
    pa.add_argument("--depth", help="per-axis dyadic depths d0,d1,...")
    pa.add_argument("--rho", type=float, help="inflation radius")
    pa.add_argument("--prime", type=int, help="field order")
    pa.add_argument("--oracle", help="leslie:t1,t2 | piecewise1d:t | "
                                     "mlp:path | data:path:L")
    pa.add_argument("--out", help="output directory")
    pa.add_argument("--no-cache", action="store_true",
                    help="skip the box-map cache")

    pc = sub.add_parser("compare", help="project a fine Morse graph onto a "
                                        "coarse one")
    pc.add_argument("--fine", required=True, help="fine config JSON")
    pc.add_argument("--coarse", required=True, help="coarse config JSON")
    pc.add_argument("--out", help="output directory for nu_report.json")

    args = parser.parse_args(argv)
    try:
        if args.command == "analyze":
            cfg = load_config(args.config) if args.config else _empty_config()
            cfg = _apply_overrides(cfg, args)
            cmd_analyze(cfg)
        else:
            cmd_compare(load_config(args.fine), load_config(args.coarse),
                        out=args.out)
        return 0
    except (ConfigError, ParseError, EmptyDataset, DimensionMismatch) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except BoxdynError as e:
        print(f"computation failed: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
