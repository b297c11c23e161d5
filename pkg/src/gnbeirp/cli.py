"""
``gnbeirp`` command line.

Every subcommand reads a scenario file (see :mod:`gnbeirp.config`), writes
CSV data plus a provenance JSON into the output directory and exits with
0 on success, 2 on configuration errors and 3 on runtime errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .codebook import generate_codebook
from .config import Scenario, load
from .errors import ConfigError
from .geometry import build_layout
from .linksim import POLICIES, simulate
from .nulling import NullingRequest, select, subset_median_at
from .radiation import PatternStack, pattern_for_pm, ssb_mask, ssb_pattern
from .statistics import cdf_at_direction, codeword_values_at, lower_median, median_cut

OUTPUT_ENV = "GNBEIRP_OUTPUT_DIR"
logger = logging.getLogger("gnbeirp")


def _db(x) -> str:
    return f"{float(x):.2f}"


def _num(x) -> str:
    return f"{float(x):.6g}"


class _Outputs:
    """Tracks written files so a failed run can remove them."""

    def __init__(self, directory: Path, stem: str):
        self.directory = directory
        self.stem = stem
        self.written = []

    def path(self, suffix: str) -> Path:
        p = self.directory / f"{self.stem}_{suffix}"
        self.written.append(p)
        return p

    def csv(self, suffix, header, rows):
        with open(self.path(suffix), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    def json(self, suffix, obj):
        with open(self.path(suffix), "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def remove(self):
        for p in self.written:
            try:
                p.unlink()
            except FileNotFoundError:
                pass


# -- shared scenario pieces ------------------------------------------------

def _stack(sc: Scenario, layout, codebook, args):
    stack = PatternStack.build(layout, codebook, sc.grid, reference=sc.reference,
                               tx_power_dbm=sc.tx_power_dbm, workers=args.threads)
    if args.ssb_mask:
        stack = stack.masked(_ssb_mask_pattern(sc, layout))
    return stack


def _ssb_mask_pattern(sc: Scenario, layout):
    beams = sc.ssb if sc.ssb_index is None else [sc.ssb[sc.ssb_index]]
    return ssb_mask([ssb_pattern(layout, None, b, sc.grid) for b in beams])


def _requests(sc: Scenario, args):
    reqs = list(sc.nulling)
    overrides = (args.epsilon_db, args.algorithm, args.hpbw_logic, args.theta, args.phi)
    if any(v is not None for v in overrides):
        base = reqs[0] if reqs else NullingRequest(6.0, 5.0, -5.0)
        theta = args.theta if args.theta is not None else base.theta_i
        phi = args.phi if args.phi is not None else base.phi_i
        algorithm = args.algorithm or base.algorithm
        eps = args.epsilon_db if args.epsilon_db is not None else base.epsilon_db
        try:
            reqs = [NullingRequest(theta, phi, eps, algorithm, args.hpbw_logic or base.hpbw_logic)]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if not reqs:
        raise ConfigError("no nulling request: add a nulling section or pass --epsilon-db")
    return reqs


def _target(sc: Scenario, args):
    if args.theta is not None and args.phi is not None:
        return args.theta, args.phi
    if sc.nulling:
        return sc.nulling[0].theta_i, sc.nulling[0].phi_i
    raise ConfigError("no target direction: add a nulling section or pass --theta/--phi")


def _label(req: NullingRequest) -> str:
    if req.algorithm == "threshold":
        return f"threshold{req.epsilon_db:g}dB"
    return f"hpbw-{req.hpbw_logic}"


def _grid_rows(grid, values):
    th, ph = grid.mesh()
    return ([_num(t), _num(p), _db(v)] for t, p, v in zip(th.ravel(), ph.ravel(), values.ravel()))


# -- subcommands -----------------------------------------------------------

def cmd_codebook(sc, args, out):
    cb = generate_codebook(sc.codebook)
    out.csv("codebook.csv", ["index", "i11", "i12", "i13", "i2"],
            ([k, *pm.indices] for k, pm in enumerate(cb)))
    return {"n_codewords": len(cb)}


def cmd_pattern(sc, args, out):
    layout = build_layout(sc.panel)
    if args.ssb_index is not None:
        if not 0 <= args.ssb_index < len(sc.ssb):
            raise ConfigError(f"--ssb-index must lie in [0, {len(sc.ssb)})")
        pat = ssb_pattern(layout, None, sc.ssb[args.ssb_index], sc.grid, sc.reference,
                          sc.tx_power_dbm)
        what = {"ssb_index": args.ssb_index}
    else:
        cb = generate_codebook(sc.codebook)
        if not 0 <= args.pm_index < len(cb):
            raise ConfigError(f"--pm-index must lie in [0, {len(cb)})")
        pat = pattern_for_pm(layout, None, cb[args.pm_index], sc.grid, sc.reference,
                             sc.tx_power_dbm)
        what = {"pm_index": args.pm_index, "pmi": list(cb[args.pm_index].indices)}
    out.csv("pattern.csv", ["theta_deg", "phi_deg", "eirp_db"], _grid_rows(sc.grid, pat.eirp_db))
    return what


def cmd_average_map(sc, args, out):
    layout = build_layout(sc.panel)
    avg = _stack(sc, layout, generate_codebook(sc.codebook), args).average()
    out.csv("average_map.csv", ["theta_deg", "phi_deg", "eirp_db"],
            _grid_rows(sc.grid, avg.eirp_db - avg.eirp_db.max()))
    return {"normalized_to": "map maximum"}


def cmd_cdf(sc, args, out):
    layout = build_layout(sc.panel)
    cb = generate_codebook(sc.codebook)
    stack = _stack(sc, layout, cb, args)
    theta, phi = _target(sc, args)
    sets = [("full", None)] + [(_label(r), select(cb, stack, r)) for r in sc.nulling]
    rows, summary = [], {}
    for name, subset in sets:
        if subset is not None and subset.empty:
            logger.warning("subset %s is empty; omitted from the CDF", name)
            continue
        f = cdf_at_direction(stack, subset, theta, phi)
        rows += [[name, _db(v), _num(p)] for v, p in zip(f.sorted_values, f.probabilities)]
        summary[name] = {"median_db": round(f.percentile(0.5), 2),
                         "n": len(cb) if subset is None else len(subset)}
    out.csv("cdf.csv", ["subset", "eirp_db", "probability"], rows)
    return {"target": [theta, phi], "subsets": summary}


def cmd_null(sc, args, out):
    layout = build_layout(sc.panel)
    cb = generate_codebook(sc.codebook)
    stack = _stack(sc, layout, cb, args)
    rows, summary = [], []
    for k, req in enumerate(_requests(sc, args)):
        subset = select(cb, stack, req)
        full = lower_median(codeword_values_at(stack, req.theta_i, req.phi_i))
        med = None if subset.empty else subset_median_at(stack, subset, req.theta_i, req.phi_i)
        rows += [[k, int(i), *cb[i].indices] for i in subset.retained]
        summary.append({
            "request": k, "label": _label(req), "theta_i": req.theta_i, "phi_i": req.phi_i,
            "epsilon_db": req.epsilon_db, "algorithm": req.algorithm,
            "hpbw_logic": req.hpbw_logic, "n_total": subset.n_total,
            "n_retained": len(subset), "retained_fraction": round(subset.retained_fraction, 6),
            "median_full_db": round(full, 2),
            "median_subset_db": None if med is None else round(med, 2),
            "n_flagged_undefined_width": len(subset.flagged),
        })
    out.csv("null_subset.csv", ["request", "index", "i11", "i12", "i13", "i2"], rows)
    out.json("null_summary.json", summary)
    return {"requests": len(summary)}


def cmd_median_cut(sc, args, out):
    layout = build_layout(sc.panel)
    cb = generate_codebook(sc.codebook)
    stack = _stack(sc, layout, cb, args)
    theta, phi = _target(sc, args)
    sets = [("full", None)] + [(_label(r), select(cb, stack, r)) for r in sc.nulling]
    rows = []
    for name, subset in sets:
        if subset is not None and subset.empty:
            logger.warning("subset %s is empty; omitted from the median cuts", name)
            continue
        for cut, kw in (("elevation", {"phi": phi}), ("azimuth", {"theta": theta})):
            angles, med = median_cut(stack, subset, **kw)
            rows += [[cut, name, _num(a), _db(m)] for a, m in zip(angles, med)]
    out.csv("median_cut.csv", ["cut", "subset", "angle_deg", "median_db"], rows)
    return {"target": [theta, phi]}


def cmd_ber(sc, args, out):
    link = sc.link
    if link is None:
        raise ConfigError("ber needs a link section")
    policies = tuple(args.policy or (link.precoder_policy,))
    cb = subset = None
    if any(p.startswith("pmi") for p in policies):
        cb = generate_codebook(sc.codebook)
        if link.n_tx != len(cb[0].w) or link.n_layers != cb[0].rank:
            raise ConfigError("PMI policies need n_tx and n_layers to match the codebook")
    if "pmi-subset" in policies:
        if not sc.nulling:
            raise ConfigError("pmi-subset needs a nulling section")
        layout = build_layout(sc.panel)
        stack = _stack(sc, layout, cb, args)
        subset = select(cb, stack, sc.nulling[sc.link_subset])
        if subset.empty:
            raise ConfigError("the nulling subset used by pmi-subset is empty")
    result = simulate(link, sc.channel, cb, subset, policies, workers=args.threads)
    rows = []
    for policy in policies:
        for p in result[policy]:
            rows.append([_db(p.snr_db), _num(p.ber), p.bit_errors, p.bits_total, policy,
                         link.csi, _num(p.std_err)])
    out.csv("ber.csv", ["snr_db", "ber", "bit_errors", "bits_total", "policy", "csi", "std_err"],
            rows)
    return {"policies": list(policies), "n_drops": link.n_drops,
            "subset_size": None if subset is None else len(subset)}


COMMANDS = {
    "codebook": cmd_codebook,
    "pattern": cmd_pattern,
    "average-map": cmd_average_map,
    "cdf": cmd_cdf,
    "null": cmd_null,
    "median-cut": cmd_median_cut,
    "ber": cmd_ber,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gnbeirp", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="scenario YAML file (defaults if omitted)")
    common.add_argument("-o", "--output-dir",
                        help=f"output directory (default ${OUTPUT_ENV}, else the config's "
                             "output_dir, else the current directory)")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads; results do not depend on it")
    stack_opts = argparse.ArgumentParser(add_help=False)
    stack_opts.add_argument("--ssb-mask", action="store_true",
                            help="weight every PM pattern by the normalized SSB pattern")
    target = argparse.ArgumentParser(add_help=False)
    target.add_argument("--theta", type=float, help="target elevation in degrees")
    target.add_argument("--phi", type=float, help="target azimuth in degrees")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("codebook", parents=[common], help="codeword manifest")
    p = sub.add_parser("pattern", parents=[common], help="one PM or SSB pattern")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--pm-index", type=int, default=0)
    g.add_argument("--ssb-index", type=int)
    sub.add_parser("average-map", parents=[common, stack_opts], help="codebook-average EIRP map")
    sub.add_parser("cdf", parents=[common, stack_opts, target], help="EIRP CDF at the target")
    p = sub.add_parser("null", parents=[common, stack_opts, target], help="nulled PM subsets")
    p.add_argument("--epsilon-db", type=float)
    p.add_argument("--algorithm", choices=("threshold", "hpbw"))
    p.add_argument("--hpbw-logic", choices=("and-exclude", "or-exclude"))
    sub.add_parser("median-cut", parents=[common, stack_opts, target],
                   help="median EIRP along principal cuts")
    p = sub.add_parser("ber", parents=[common, stack_opts], help="link-level BER curves")
    p.add_argument("--policy", nargs="+", choices=POLICIES,
                   help="simulate these policies over shared drops")
    return parser


def _output_dir(args, sc: Scenario) -> Path:
    d = args.output_dir or os.environ.get(OUTPUT_ENV) or sc.output_dir or "."
    path = Path(d)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {d!r} not writable: {exc}") from None
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {d!r} not writable")
    return path


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="gnbeirp: %(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    out = None
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        sc = load(args.config) if args.config else Scenario(config_hash="defaults")
        out = _Outputs(_output_dir(args, sc), sc.name)
        info = COMMANDS[args.command](sc, args, out)
        seed = sc.link.seed if sc.link is not None else None
        out.json(f"{args.command.replace('-', '_')}_provenance.json", {
            "command": args.command, "config": args.config, "config_hash": sc.config_hash,
            "seed": seed, "version": __version__, "numpy": np.__version__,
            "files": [p.name for p in out.written], "result": info,
        })
    except ConfigError as exc:
        if out is not None:
            out.remove()
        print(f"gnbeirp: config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        if out is not None:
            out.remove()
        print(f"gnbeirp: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
