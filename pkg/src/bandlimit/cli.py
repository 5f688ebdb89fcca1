"""Configuration-driven experiment runner.

    bandlimit <subcommand> [--config run.yaml] [flags]

Every run writes ``<out>/<subcommand>.csv`` (first line ``# bandlimit-schema v1``,
rows sorted by their key columns) and ``<out>/<subcommand>.json`` holding the
resolved config and run metadata next to the summary.  Errors exit with the code of their family.
"""

import argparse
import csv
import dataclasses
import datetime
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import __version__
from . import bandlimited as bl
from . import carleson as cs
from . import extension as ex
from . import logvinenko as lv
from .errors import BandlimitError, ConfigError, UsageError
from .manifold import Sphere, Torus, points_from_json, take_points
from .mesh import Mesh
from .selftest import run_checks
from .spectrum import build_basis, weyl_defect

SCHEMA = "# bandlimit-schema v1"
SUBCOMMANDS = ("weyl", "kernel-decay", "tail", "extension", "bernstein", "carleson", "pp", "ls", "selftest")


@dataclass
class ManifoldSpec:
    backend: str = "sphere"
    oversample: float = 4.0
    side_x: float = 2.0 * math.pi
    side_y: float = 2.0 * math.pi
    mesh: str | None = None
    subdivisions: int = 4
    injectivity_radius: float | None = None


@dataclass
class ExperimentConfig:
    manifold: ManifoldSpec = field(default_factory=ManifoldSpec)
    L: list = field(default_factory=lambda: [100.0])
    seed: int = 0
    out: str = "results"
    r: list | None = None
    c: float = 1.0
    order_N: int | None = None
    epsilon: float = 0.05
    delta: float = 1.0
    samples: int = 20
    measure: str | None = None
    sets: str | None = None
    points: str | None = None
    jobs: int = 1
    cache_dir: str | None = None

    def validate(self):
        if self.manifold.backend not in ("sphere", "torus", "mesh"):
            raise ConfigError(f"unknown manifold backend {self.manifold.backend!r}")
        if not self.L:
            raise ConfigError("at least one value of L is required")
        if any(not (isinstance(L, (int, float)) and L >= 1) for L in self.L):
            raise ConfigError("every L must be a number >= 1")
        if any(r <= 0 for r in self.r or []) or self.c <= 0 or self.delta <= 0:
            raise ConfigError("r, c, delta must all be positive")
        if not 0 < self.epsilon < 1:
            raise ConfigError("epsilon must lie in (0, 1)")
        if self.samples < 1 or self.jobs < 1:
            raise ConfigError("samples and jobs must be >= 1")
        return self


def _coerce(data):
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    data = dict(data)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    man = data.pop("manifold", {}) or {}
    if isinstance(man, str):
        man = {"backend": man}
    mknown = {f.name for f in dataclasses.fields(ManifoldSpec)}
    if set(man) - mknown:
        raise ConfigError(f"unknown manifold keys: {sorted(set(man) - mknown)}")
    for key in ("L", "r"):
        if key in data and not isinstance(data[key], list):
            data[key] = [data[key]]
    try:
        cfg = ExperimentConfig(manifold=ManifoldSpec(**man), **data)
        cfg.L = [float(x) for x in cfg.L]
        cfg.r = None if cfg.r is None else [float(x) for x in cfg.r]
    except (TypeError, ValueError) as err:
        raise ConfigError(f"malformed config: {err}") from None
    return cfg


def load_config(path=None, overrides=None):
    """YAML config (optional) with flag overrides applied on top; flags win."""
    data = {}
    if path:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as err:
            raise ConfigError(f"cannot read config {path}: {err}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
    overrides = overrides or {}
    man = dict(data.get("manifold") or {}) if not isinstance(data.get("manifold"), str) \
        else {"backend": data["manifold"]}
    for key in ("backend", "mesh"):
        if overrides.get(key) is not None:
            man[key] = overrides.pop(key)
        overrides.pop(key, None)
    if man.get("mesh") and "backend" not in man:
        man["backend"] = "mesh"
    data["manifold"] = man
    data.update({k: v for k, v in overrides.items() if v is not None})
    return _coerce(data).validate()


class Runner:
    """Builds manifolds and bases per L (cached) for one config."""

    def __init__(self, cfg):
        self.cfg = cfg
        self._mesh = None
        self._bases = {}

    def manifold(self, L):
        s = self.cfg.manifold
        if s.backend == "sphere":
            return Sphere.for_bandwidth(L, s.oversample)
        if s.backend == "torus":
            return Torus.for_bandwidth(s.side_x, s.side_y, L, s.oversample)
        if self._mesh is None:
            if s.mesh:
                self._mesh = Mesh.from_off(s.mesh, s.injectivity_radius)
            else:
                self._mesh = Mesh.icosphere(s.subdivisions, s.injectivity_radius)
        return self._mesh

    def basis(self, L):
        if L not in self._bases:
            self._bases[L] = build_basis(self.manifold(L), L, cache_dir=self.cfg.cache_dir)
        return self._bases[L]

    def bases(self):
        return {L: self.basis(L) for L in self.cfg.L}

    def map_L(self, fn):
        """Apply fn(L) to every L, in parallel when jobs > 1; results in L order."""
        Ls = sorted(self.cfg.L)
        for L in Ls:
            self.basis(L)
        if self.cfg.jobs > 1:
            with ThreadPoolExecutor(self.cfg.jobs) as pool:
                return list(pool.map(fn, Ls))
        return [fn(L) for L in Ls]

    def radii(self, default):
        return sorted(self.cfg.r) if self.cfg.r else list(default)

    def order(self):
        return bl.default_order(self.manifold(self.cfg.L[0]).dimension) if self.cfg.order_N is None else self.cfg.order_N

    def anchors(self, L, count=None):
        return self.manifold(L).sample_points(count or self.cfg.samples, self.cfg.seed)


# --- subcommands: each returns (columns, rows, summary) ---

def cmd_weyl(run):
    def cell(L):
        b = run.basis(L)
        row = {"L": L, "k": b.k, "weyl_defect": weyl_defect(b)}
        if b.manifold.backend == "sphere":
            row["kernel_diagonal_defect"] = bl.kernel_diagonal_defect(b)
        return row
    rows = run.map_L(cell)
    cols = ["L", "k", "weyl_defect"] + (["kernel_diagonal_defect"] if "kernel_diagonal_defect" in rows[0] else [])
    worst = max(abs(r["weyl_defect"]) * math.sqrt(r["L"]) for r in rows)
    return cols, rows, {"max_sqrtL_times_defect": worst}


def cmd_kernel_decay(run):
    N = run.order()

    def cell(L):
        b = run.basis(L)
        xi = run.anchors(L, 1)
        fit = bl.decay_slope(b, xi, N)
        same = np.array_equal(bl.reproducing_kernel(b, xi).values, bl.riesz_kernel(b, xi, 0).values)
        return {"L": L, "N": N, "slope": fit.slope, "predicted": -(N + 1.0), "bins": fit.bins,
                "envelope_constant": fit.envelope_constant,
                "diagonal_margin": bl.riesz_diagonal_margin(b, N), "order0_identical": int(same)}
    rows = run.map_L(cell)
    return list(rows[0]), rows, {"max_slope": max(r["slope"] for r in rows)}


def cmd_tail(run):
    N = run.order()
    cases, rows = [], []
    for L in sorted(run.cfg.L):
        b = run.basis(L)
        anchors = run.anchors(L)
        for j in range(len(anchors)):
            xi = take_points(anchors, [j])
            cases.append((L, j, bl.concentrated_function(b, xi, N), xi))
    R0, worst = bl.find_tail_radius([(f, xi) for _, _, f, xi in cases], run.cfg.epsilon)
    for L, j, f, xi in cases:
        rows.append({"L": L, "anchor": j, "R0": R0, "tail_mass": bl.tail_mass(f, xi, R0)})
    return list(rows[0]), rows, {"R0": R0, "worst_tail": worst, "epsilon": run.cfg.epsilon, "N": N}


def cmd_extension(run):
    rng_seed = run.cfg.seed

    def cell(L):
        b = run.basis(L)
        rng = np.random.default_rng([rng_seed, int(L * 1000)])
        C = rng.standard_normal((run.cfg.samples, b.k))
        anchors = run.anchors(L)
        out = []
        for r in run.radii((0.25, 0.5, 1.0)):
            q = ex.slab_norm_ratios(b, C, r)
            lo, hi = math.exp(-2 * r), math.exp(2 * r)
            row = {"L": L, "r": r, "ratio_min": float(q.min()), "ratio_max": float(q.max()),
                   "violations": int(np.sum((q < lo) | (q > hi))), "lower": lo, "upper": hi}
            if r < b.manifold.injectivity_radius:
                sub = [ex.submean_defect(bl.BandlimitedFunction(b, C[j]), take_points(anchors, [j]), r)
                       for j in range(min(len(anchors), len(C)))]
                row["submean_max"] = float(max(sub))
            else:
                row["submean_max"] = math.nan
            out.append(row)
        return out
    rows = [r for group in run.map_L(cell) for r in group]
    return list(rows[0]), rows, {"violations": sum(r["violations"] for r in rows)}


def cmd_bernstein(run):
    def cell(L):
        b = run.basis(L)
        xi = run.anchors(L, 1)
        _, single = ex.bernstein_ratios_single(b)
        kern = bl.reproducing_kernel(b, xi).function
        f = bl.random_function(b, np.random.default_rng([run.cfg.seed, int(L * 1000)]))
        lhs, rhs = ex.grad_l2_identity(f)
        return {"L": L, "single_ratio_max": float(single.max()), "space_ratio_kernel": ex.bernstein_ratio_space(kern),
                "grad_identity_rel_error": abs(lhs - rhs) / rhs,
                "conjecture_ratio_exploratory": ex.gradient_conjecture_ratio(kern)}
    rows = run.map_L(cell)
    sr = [r["space_ratio_kernel"] for r in rows]
    return list(rows[0]), rows, {"space_ratio_spread": max(sr) / min(sr)}


def _per_L(entry, L):
    if "per_L" in entry:
        base = {k: v for k, v in entry.items() if k != "per_L"}
        for key, val in entry["per_L"].items():
            if float(key) == L:
                return {**base, **val}
        raise ConfigError(f"entry {entry.get('id')!r} has no data for L={L}")
    return entry


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read {path}: {err}") from None


def measure_from_json(obj, basis):
    kind = obj.get("kind")
    M = basis.manifold
    if kind == "atomic":
        pts = points_from_json(M, obj["points"])
        masses = obj.get("masses")
        masses = np.full(len(pts), 1.0 / basis.k) if masses is None else np.asarray(masses, dtype=float)
        return cs.AtomicMeasure(pts, masses)
    if kind == "density":
        if "constant" in obj:
            return cs.volume_measure(M, float(obj["constant"]))
        return cs.DensityMeasure(np.asarray(obj["weights"], dtype=float))
    if kind == "indicator":
        return cs.indicator_measure(M, np.asarray(obj["ids"], dtype=np.int64))
    raise ConfigError(f"unknown measure kind {kind!r}")


def default_measure_family(run):
    """Scaled volume measures and seeded random atomic measures, plus the concentrating atom."""
    def family(basis):
        M, L = basis.manifold, basis.bandwidth
        for s in (0.5, 1.0, 2.0):
            yield f"dV_x{s}", cs.volume_measure(M, s)
        for j in range(run.cfg.samples):
            pts = M.sample_points(basis.k, [run.cfg.seed, j, int(L * 1000)])
            yield f"random_{j:03d}", cs.sampling_measure(pts, basis.k)
        yield "concentrating_atom", cs.AtomicMeasure(run.anchors(L, 1), np.array([1.0]))
    return family


def cmd_carleson(run):
    if run.cfg.measure:
        doc = _read_json(run.cfg.measure)

        def family(basis):
            for e in doc.get("measures", []):
                yield e["id"], measure_from_json(_per_L(e, basis.bandwidth), basis)
    else:
        family = default_measure_family(run)
    res = cs.equivalence_sweep(family, run.bases(), run.cfg.c)
    summary = dict(res.summary)
    atoms = [r for r in res.rows if r["measure_id"] == "concentrating_atom"]
    if len(atoms) >= 2:
        Ls = [r["L"] for r in atoms]
        summary["atom_slope_carleson"] = cs.loglog_slope(Ls, [r["carleson_constant"] for r in atoms])
        summary["atom_slope_density"] = cs.loglog_slope(Ls, [r["ball_density_sup"] for r in atoms])
    cols = ["measure_id", "L", "ball_density_sup", "carleson_constant", "ratio"]
    return cols, res.rows, summary


def cmd_pp(run):
    delta = run.cfg.delta
    doc = _read_json(run.cfg.points) if run.cfg.points else None
    if doc is not None:
        delta = float(doc.get("delta", delta))

    def cell(L):
        b = run.basis(L)
        if doc is None:
            pts = cs.separated_net(b.manifold, L, delta, run.cfg.seed)
        else:
            pts = points_from_json(b.manifold, _per_L(doc, L)["points"])
        ok, bad = cs.separation_check(pts, b, delta)
        parts = cs.greedy_separated_partition(pts, b, delta)
        return {"L": L, "m_L": len(pts), "separated": int(ok), "violations": len(bad),
                "subfamilies": len(parts), "max_multiplicity": cs.max_ball_multiplicity(pts, b, delta),
                "bessel_bound": cs.bessel_bound(pts, b)}
    rows = run.map_L(cell)
    bb = [r["bessel_bound"] for r in rows]
    return list(rows[0]), rows, {"delta": delta, "bessel_spread": max(bb) / min(bb) if min(bb) > 0 else math.inf}


def default_set_family(run):
    def family(basis):
        M, L = basis.manifold, basis.bandwidth
        xi = run.anchors(L, 1)
        yield "whole", lv.Whole()
        yield "minus_cap", lv.Complement(lv.Cap(xi, 1.0 / math.sqrt(L)))
        if M.backend == "torus":
            yield "band", lv.Band(0.5, offset=0.0)
        else:
            yield "band", lv.Band(0.5)
            yield "north", lv.Hemisphere((0.0, 0.0, 1.0))
            yield "south", lv.Hemisphere((0.0, 0.0, -1.0))
    return family


def cmd_ls(run):
    if run.cfg.sets:
        doc = _read_json(run.cfg.sets)

        def family(basis):
            for e in doc.get("sets", []):
                yield e["id"], lv.region_from_json(_per_L(e, basis.bandwidth), basis.manifold, basis.bandwidth)
    else:
        family = default_set_family(run)
    bases = run.bases()
    rows, summary = [], {}
    for r in run.radii((1.0, 2.0, 4.0)):
        res = lv.ls_equivalence_sweep(family, bases, r)
        rows.extend(res.rows)
        summary[f"r={r}"] = res.summary
    rows.sort(key=lambda x: (x["set_id"], x["L"], x["r"]))
    R0 = None
    witnesses = {}
    N = run.order()
    for L, b in sorted(bases.items()):
        xi = run.anchors(L, 1)
        if R0 is None:
            R0, _ = bl.find_tail_radius([(bl.concentrated_function(b, xi, N), xi)], run.cfg.epsilon)
        w = lv.concentration_witness(lv.Complement(lv.Cap(xi, R0 / math.sqrt(L))), b, xi, N, run.cfg.epsilon, R0)
        witnesses[str(L)] = {"integral": w.integral, "tail_only": w.tail_only, "ok": w.ok}
    summary["concentration_witness"] = {"R0": R0, "complement_of_ball": witnesses}
    return ["set_id", "L", "r", "relative_density", "ls_constant"], rows, summary


def cmd_selftest(run):
    rows = []
    for L in sorted(run.cfg.L):
        for c in run_checks(run.basis(L), run.cfg.seed, run.cfg.samples):
            rows.append({"L": L, "check": c.name, "passed": int(c.passed), "value": c.value,
                         "tolerance": c.tolerance})
    failed = [f"{r['check']}@L={r['L']:g}" for r in rows if not r["passed"]]
    return ["L", "check", "passed", "value", "tolerance"], rows, {"failed": failed, "all_passed": not failed}


COMMANDS = {
    "weyl": cmd_weyl, "kernel-decay": cmd_kernel_decay, "tail": cmd_tail, "extension": cmd_extension,
    "bernstein": cmd_bernstein, "carleson": cmd_carleson, "pp": cmd_pp, "ls": cmd_ls, "selftest": cmd_selftest,
}


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_csv(columns, rows):
    buf = io.StringIO()
    buf.write(SCHEMA + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c, "")) for c in columns])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def run(subcommand, cfg):
    """Run one subcommand; writes the CSV and JSON reports and returns (exit code, summary)."""
    if subcommand not in COMMANDS:
        raise UsageError(f"unknown subcommand {subcommand!r}")
    runner = Runner(cfg)
    columns, rows, summary = COMMANDS[subcommand](runner)
    try:
        os.makedirs(cfg.out, exist_ok=True)
        stem = os.path.join(cfg.out, subcommand)
        with open(stem + ".csv", "w") as fh:
            fh.write(render_csv(columns, rows))
        report = {"subcommand": subcommand, "version": __version__, "seed": cfg.seed,
                  "config": dataclasses.asdict(cfg), "summary": summary,
                  "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat()}
        with open(stem + ".json", "w") as fh:
            json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
    except OSError as err:
        raise ConfigError(f"cannot write reports to {cfg.out}: {err}") from None
    code = 0
    if subcommand == "selftest" and not summary["all_passed"]:
        code = 1
    return code, summary


def build_parser():
    p = argparse.ArgumentParser(prog="bandlimit", description=__doc__.split("\n\n")[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="YAML config file; flags override its values")
    p.add_argument("--manifold", dest="backend", choices=("sphere", "torus", "mesh"))
    p.add_argument("--mesh", help="ASCII OFF mesh (implies --manifold mesh)")
    p.add_argument("--L", dest="L", type=float, nargs="+")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--r", type=float, nargs="+")
    p.add_argument("--c", type=float)
    p.add_argument("--order-N", dest="order_N", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--measure", help="JSON measure family")
    p.add_argument("--sets", help="JSON set family")
    p.add_argument("--points", help="JSON point family")
    p.add_argument("--jobs", type=int)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("subcommand", "config")}
    try:
        cfg = load_config(args.config, overrides)
        code, summary = run(args.subcommand, cfg)
    except BandlimitError as err:
        print(f"error[{type(err).__name__}]: {err}", file=sys.stderr)
        return err.exit_code
    print(json.dumps(_jsonable(summary), sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
