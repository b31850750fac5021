"""Command line driver for tiered discovery studies.

Subcommands: discover fits one dataset, simulate writes replicate
directories, evaluate scores estimate directories against truth directories,
bench records timings. Every out directory receives one manifest.json with
the effective configuration; rerunning an equal configuration reproduces all
other outputs byte for byte (bench timings excepted, they are measurements).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import asdict

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

import numpy as np

from . import __version__
from .graphs import FormatError, GraphError, MismatchError, Pdag, \
    TieredKnowledge, dag_to_cpdag, tiered_mpdag_of
from .metrics import evaluate as evaluate_pair, report_row
from .oracle import best_scoring_graph
from .scoring import Dataset, ScoreError, Scorer
from .search import ges, stges, tges
from .simulate import SimConfig, SimError, atomic_write, draw_samples, \
    gen_truth, sample_data, write_replicate

JOBS_ENV = "TGES_JOBS"

AGG_METRICS = ("sshd", "adj_precision", "adj_recall", "dir_precision",
               "dir_recall", "tier_precision", "tier_recall")


def _read_text(path):
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise FormatError("cannot read %s: %s" % (path, exc.strerror or exc))


def _write_manifest(out_dir, command, config, seeds, inputs, outputs, started):
    man = {
        "command": command,
        "config": config,
        "seeds": seeds,
        "version": __version__,
        "inputs": [os.path.abspath(p) for p in inputs],
        "outputs": sorted(outputs),
        "wall_time_s": round(time.time() - started, 6),
    }
    atomic_write(os.path.join(out_dir, "manifest.json"),
                 json.dumps(man, indent=2, sort_keys=True) + "\n")


# ------------------------------------------------------------------ discover

def _trace_csv(state):
    lab = state.graph.labels or tuple(
        "X%d" % (i + 1) for i in range(state.graph.d))
    lines = ["step,kind,from,to,delta,aux"]
    for i, mv in enumerate(state.trace):
        aux = ";".join(lab[t] for t in mv.aux)
        lines.append("%d,%s,%s,%s,%.10g,%s"
                     % (i, mv.kind, lab[mv.x], lab[mv.y], mv.delta, aux))
    return "\n".join(lines) + "\n"


def cmd_discover(args):
    started = time.time()
    data = Dataset.from_csv(_read_text(args.data))
    k = None
    if args.tiers is not None:
        k = TieredKnowledge.from_csv(_read_text(args.tiers), data.labels)
    if args.algo != "ges" and k is None:
        print("error: --tiers is required for %s" % args.algo,
              file=sys.stderr)
        return 2
    if args.algo == "ges":
        state = ges(data, lam=args.lam)
    elif args.algo == "stges":
        state = stges(data, k, lam=args.lam)
    else:
        state = tges(data, k, lam=args.lam)
    os.makedirs(args.out, exist_ok=True)
    atomic_write(os.path.join(args.out, "graph.edgelist"),
                 state.graph.to_edgelist())
    atomic_write(os.path.join(args.out, "graph.amat.csv"),
                 state.graph.to_amat_csv())
    atomic_write(os.path.join(args.out, "trace.csv"), _trace_csv(state))
    inputs = [args.data] + ([args.tiers] if args.tiers else [])
    _write_manifest(args.out, "discover",
                    {"algo": args.algo, "lambda": args.lam,
                     "tiers": args.tiers is not None},
                    [], inputs,
                    ["graph.edgelist", "graph.amat.csv", "trace.csv"],
                    started)
    return 0


# ------------------------------------------------------------------ simulate

def _sim_worker(task):
    out_root, cfg, rep = task
    gt = gen_truth(cfg, rep)
    X = draw_samples(gt, cfg.n, cfg.seed, rep)
    write_replicate(os.path.join(out_root, "rep%04d" % rep), gt, X)
    return rep, gt.dag.d, gt.p


def cmd_simulate(args):
    started = time.time()
    file_cfg = {}
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                file_cfg = tomllib.load(fh)
        except OSError as exc:
            raise FormatError("cannot read %s: %s"
                              % (args.config, exc.strerror or exc))
        except tomllib.TOMLDecodeError as exc:
            raise FormatError("%s: %s" % (args.config, exc))

    def pick(flag_value, key, default):
        # flags override the config file, which overrides defaults
        if flag_value is not None:
            return flag_value
        return file_cfg.get(key, default)

    try:
        cfg = SimConfig(
            d_range=(pick(args.d_min, "d_min", 7),
                     pick(args.d_max, "d_max", 20)),
            edge_prob_range=(pick(args.edge_prob_min, "edge_prob_min", 0.1),
                             pick(args.edge_prob_max, "edge_prob_max", 0.8)),
            n=pick(args.n, "n", 10_000),
            tiers=pick(args.tiers, "tiers", 3),
            weight_range=(file_cfg.get("weight_min", 0.0),
                          file_cfg.get("weight_max", 1.0)),
            seed=pick(args.seed, "seed", 0))
    except TypeError as exc:
        raise SimError("bad configuration value: %s" % exc)
    replicates = pick(args.replicates, "replicates", 10)
    if not isinstance(replicates, int) or replicates < 1:
        raise SimError("replicates must be a positive integer")
    jobs = args.jobs if args.jobs is not None \
        else int(os.environ.get(JOBS_ENV, "1"))

    os.makedirs(args.out, exist_ok=True)
    tasks = [(args.out, cfg, rep) for rep in range(replicates)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sim_worker, tasks))
    else:
        rows = [_sim_worker(t) for t in tasks]
    rows.sort()
    index = ["replicate,d,p,n,seed"]
    index += ["%d,%d,%.10g,%d,%d" % (rep, d, p, cfg.n, cfg.seed)
              for rep, d, p in rows]
    atomic_write(os.path.join(args.out, "manifest.csv"),
                 "\n".join(index) + "\n")
    config = asdict(cfg)
    config["replicates"] = replicates
    _write_manifest(args.out, "simulate", config, [cfg.seed],
                    [args.config] if args.config else [],
                    ["manifest.csv"] + ["rep%04d" % r for r, _, _ in rows],
                    started)
    return 0


# ------------------------------------------------------------------ evaluate

def _rep_dirs(root):
    try:
        names = os.listdir(root)
    except OSError as exc:
        raise FormatError("cannot read %s: %s" % (root, exc.strerror or exc))
    return sorted(n for n in names if n.startswith("rep")
                  and os.path.isdir(os.path.join(root, n)))


def _labels_for_rep(truth_dir):
    tpath = os.path.join(truth_dir, "tiers.csv")
    if os.path.exists(tpath):
        rows = list(csv.reader(io.StringIO(_read_text(tpath))))
        return [r[0].strip() for r in rows[1:] if r and r[0].strip()]
    dpath = os.path.join(truth_dir, "data.csv")
    if os.path.exists(dpath):
        with open(dpath) as fh:
            return [c.strip() for c in fh.readline().split(",")]
    return None


def _read_est_graph(dirpath, labels):
    for name in ("graph.edgelist", "target.edgelist"):
        path = os.path.join(dirpath, name)
        if os.path.exists(path):
            return Pdag.from_edgelist(_read_text(path), labels=labels)
    raise FormatError("no graph edgelist in %s" % dirpath)


def _csv_text(fieldnames, rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames, restval="", lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def cmd_evaluate(args):
    started = time.time()
    truth_reps = _rep_dirs(args.truth)
    if not truth_reps:
        print("error: no replicate directories in %s" % args.truth,
              file=sys.stderr)
        return 2
    if _rep_dirs(args.est):
        algos = {"est": args.est}
    else:
        algos = {n: os.path.join(args.est, n)
                 for n in sorted(os.listdir(args.est))
                 if os.path.isdir(os.path.join(args.est, n))}
    if not algos:
        print("error: no estimates in %s" % args.est, file=sys.stderr)
        return 2
    for algo, root in sorted(algos.items()):
        if _rep_dirs(root) != truth_reps:
            print("error: unmatched replicates for %r under %s"
                  % (algo, root), file=sys.stderr)
            return 2

    rows = []
    fieldnames = ["algo", "replicate"]
    for algo, root in sorted(algos.items()):
        for rep in truth_reps:
            tdir = os.path.join(args.truth, rep)
            labels = _labels_for_rep(tdir)
            truth = Pdag.from_edgelist(
                _read_text(os.path.join(tdir, "target.edgelist")),
                labels=labels)
            est = _read_est_graph(os.path.join(root, rep),
                                  labels or truth.labels)
            if args.tiers:
                k = TieredKnowledge.from_csv(_read_text(args.tiers),
                                             truth.labels)
            elif os.path.exists(os.path.join(tdir, "tiers.csv")):
                k = TieredKnowledge.from_csv(
                    _read_text(os.path.join(tdir, "tiers.csv")), truth.labels)
            else:
                k = None
            row = {"algo": algo, "replicate": rep}
            row.update(report_row(evaluate_pair(est, truth, k)))
            for key in row:
                if key not in fieldnames:
                    fieldnames.append(key)
            rows.append(row)

    os.makedirs(args.out, exist_ok=True)
    atomic_write(os.path.join(args.out, "replicates.csv"),
                 _csv_text(fieldnames, rows))

    agg = ["algo,metric,count,median,q1,q3"]
    series = {}
    for algo in sorted(algos):
        for metric in AGG_METRICS:
            vals = [float(r[metric]) for r in rows
                    if r["algo"] == algo and r.get(metric, "") != ""]
            if not vals:
                continue
            series[(algo, metric)] = vals
            agg.append("%s,%s,%d,%.10g,%.10g,%.10g"
                       % (algo, metric, len(vals), np.median(vals),
                          np.quantile(vals, 0.25), np.quantile(vals, 0.75)))
    atomic_write(os.path.join(args.out, "aggregate.csv"),
                 "\n".join(agg) + "\n")

    outputs = ["replicates.csv", "aggregate.csv"]
    if args.plot:
        outputs += _emit_plots(args.out, sorted(algos), series)
    _write_manifest(args.out, "evaluate",
                    {"plot": bool(args.plot), "tiers": args.tiers},
                    [], [args.est, args.truth], outputs, started)
    return 0


def _emit_plots(out, algos, series):
    # numbers live in the CSVs; images are a convenience and must not be
    # able to fail the run
    written = []
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except Exception as exc:
        print("warning: plotting unavailable: %s" % exc, file=sys.stderr)
        return written
    os.makedirs(os.path.join(out, "plots"), exist_ok=True)
    for metric in AGG_METRICS:
        data = [(algo, series[(algo, metric)]) for algo in algos
                if (algo, metric) in series]
        if not data:
            continue
        fig, ax = plt.subplots(figsize=(4.0, 3.0))
        ax.boxplot([vals for _, vals in data])
        ax.set_xticklabels([algo for algo, _ in data])
        ax.set_ylabel(metric)
        fig.tight_layout()
        rel = os.path.join("plots", "%s.png" % metric)
        fig.savefig(os.path.join(out, rel), dpi=120)
        plt.close(fig)
        written.append(rel)
    return written


# ---------------------------------------------------------------------- bench

def cmd_bench(args):
    started = time.time()
    lines = ["d,algo,stage_i_s,total_s"]
    for d in range(args.d_min, args.d_max + 1):
        stats = {"ges": {}, "tges": {}}
        cfg = SimConfig(d_range=(d, d), n=args.n, tiers=min(3, d),
                        seed=args.seed)
        for rep in range(args.replicates):
            gt = gen_truth(cfg, rep)
            data = sample_data(gt, cfg.n, cfg.seed, rep)
            ges(data, stats=stats["ges"])
            tges(data, gt.k, stats=stats["tges"])
        for algo in ("ges", "tges"):
            st = stats[algo]
            lines.append("%d,%s,%.6f,%.6f"
                         % (d, algo, st.get("stage_i_s", 0.0),
                            st.get("total_s", 0.0)))
    os.makedirs(args.out, exist_ok=True)
    atomic_write(os.path.join(args.out, "bench.csv"), "\n".join(lines) + "\n")
    _write_manifest(args.out, "bench",
                    {"d_min": args.d_min, "d_max": args.d_max,
                     "replicates": args.replicates, "n": args.n},
                    [args.seed], [], ["bench.csv"], started)
    return 0


# --------------------------------------------------------- exhaustive checker

def cmd_oracle(args):
    # undocumented: exact search by enumeration, for cross-checking on
    # problems small enough to afford it
    data = Dataset.from_csv(_read_text(args.data))
    k = None
    if args.tiers is not None:
        k = TieredKnowledge.from_csv(_read_text(args.tiers), data.labels)
    scorer = Scorer(data, k, args.lam)
    best = best_scoring_graph(scorer)
    pick = min(best, key=lambda g: (sorted(g.directed)))
    out_graph = tiered_mpdag_of(pick, k) if k is not None \
        else dag_to_cpdag(pick)
    text = out_graph.to_edgelist()
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        atomic_write(os.path.join(args.out, "graph.edgelist"), text)
    else:
        sys.stdout.write(text)
    return 0


# ----------------------------------------------------------------------- main

def build_parser():
    ap = argparse.ArgumentParser(
        prog="tges",
        description="Tiered causal discovery: learn, simulate, evaluate.")
    ap.add_argument("--version", action="version",
                    version="%(prog)s " + __version__)
    sub = ap.add_subparsers(dest="command", required=True,
                            metavar="{discover,simulate,evaluate,bench}")

    d = sub.add_parser("discover", help="fit a graph to one dataset")
    d.add_argument("data", help="samples CSV, one column per variable")
    d.add_argument("--tiers", help="tier CSV (variable,tier)")
    d.add_argument("--algo", choices=("ges", "stges", "tges"),
                   default="tges")
    d.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="penalty multiplier (default 1)")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_discover)

    s = sub.add_parser("simulate", help="generate replicate datasets")
    s.add_argument("--config", help="TOML file; flags override its keys")
    s.add_argument("--replicates", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--n", type=int)
    s.add_argument("--tiers", type=int, help="tier count")
    s.add_argument("--d-min", type=int, dest="d_min")
    s.add_argument("--d-max", type=int, dest="d_max")
    s.add_argument("--edge-prob-min", type=float, dest="edge_prob_min")
    s.add_argument("--edge-prob-max", type=float, dest="edge_prob_max")
    s.add_argument("--jobs", type=int,
                   help="parallel workers (default $%s or 1)" % JOBS_ENV)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("evaluate",
                       help="score estimate directories against truths")
    e.add_argument("est", help="estimates root (repNNNN dirs, or one "
                               "subdirectory per algorithm)")
    e.add_argument("truth", help="simulation output root")
    e.add_argument("--tiers", help="tier CSV overriding per-replicate files")
    e.add_argument("--plot", action="store_true",
                   help="also write box-plot images")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("bench", help="time ges and tges across node counts")
    b.add_argument("--d-min", type=int, dest="d_min", default=3)
    b.add_argument("--d-max", type=int, dest="d_max", default=6)
    b.add_argument("--replicates", type=int, default=5)
    b.add_argument("--n", type=int, default=10_000)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)

    o = sub.add_parser("oracle")
    o.add_argument("data")
    o.add_argument("--tiers")
    o.add_argument("--lambda", dest="lam", type=float, default=1.0)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MismatchError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3
    except (FormatError, SimError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except (GraphError, ScoreError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
