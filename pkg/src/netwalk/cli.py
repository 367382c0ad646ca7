"""``netwalk`` command line: train, generate, stats, linkpred, interpolate, synth.

Exit codes: 0 success, 1 runtime failure, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import time
from importlib import metadata


EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _need_file(path):
    if path is None or not os.path.isfile(path):
        raise UsageError(f"input file not found: {path}")
    return path


def _threads(args):
    t = args.threads
    if t is None:
        env = os.environ.get("NETWALK_THREADS")
        t = int(env) if env else None
    return t


def write_manifest(out_dir, command, config, seeds, inputs, outputs, started):
    """``manifest.json`` in ``out_dir``; timing fields are the only non-reproducible ones."""
    man = {
        "command": command,
        "config": config,
        "seeds": seeds,
        "inputs": {p: _digest(p) for p in inputs},
        "outputs": sorted(outputs),
        "version": _version(),
        "python": platform.python_version(),
        "wall_clock_s": round(time.monotonic() - started, 3),
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(man, fh, indent=2, sort_keys=True)
    return path


def _load_graph(path):
    from .graph import load_edge_list
    return load_edge_list(_need_file(path))


def _load_train_config(args):
    from .trainer import TrainConfig
    d = {}
    if args.config:
        with open(_need_file(args.config), encoding="utf-8") as fh:
            d = json.load(fh)
    overrides = {
        "seed": args.seed, "max_iters": args.max_iters, "batch_size": args.batch_size,
        "eval_every": args.eval_every, "patience": args.patience, "p": args.p, "q": args.q,
        "eval_transitions": args.eval_transitions, "time_budget": args.time_budget,
        "window": args.window, "target_eo": args.target_eo, "lr": args.lr,
    }
    d.update({k: v for k, v in overrides.items() if v is not None})
    if args.stop:
        d["stop_mode"] = args.stop.upper()
    return TrainConfig.from_dict(d)


# ------------------------------------------------------------------ commands

def cmd_train(args):
    from .graph import largest_connected_component, split_edges, write_edge_list
    from .model import save_checkpoint
    from .trainer import train

    started = time.monotonic()
    g = _load_graph(args.edges)
    cfg = _load_train_config(args)
    os.makedirs(args.out, exist_ok=True)
    lcc, _ = largest_connected_component(g)
    split = split_edges(lcc, args.val_frac, args.test_frac, seed=cfg.seed)
    p_split = os.path.join(args.out, "split.json")
    p_graph = os.path.join(args.out, "lcc.txt")
    p_log = os.path.join(args.out, "train_log.ndjson")
    p_ckpt = os.path.join(args.out, "checkpoint.nwck")
    split.save(p_split)
    write_edge_list(p_graph, lcc, original_ids=True)
    res = train(lcc, split, cfg, log_path=p_log)
    save_checkpoint(p_ckpt, res.gen, res.disc, meta={
        "best_iter": res.best_iter, "stop_reason": res.stop_reason, "m": lcc.m,
        "train_m": split.train.m, "node_ids": lcc.node_ids.tolist(), "config": cfg.to_dict()})
    write_manifest(args.out, "train", cfg.to_dict(), {"seed": cfg.seed}, [args.edges],
                   [p_split, p_graph, p_log, p_ckpt], started)
    last = res.log[-1] if res.log else {}
    print(f"stopped at iteration {last.get('iter')} ({res.stop_reason}); best iteration {res.best_iter}; "
          f"eo={last.get('eo')} val_auc={last.get('val_auc')}")
    return EXIT_OK


def cmd_generate(args):
    import numpy as np
    from .assembler import assemble_graph, save_scores, symmetrize
    from .graph import Graph, write_edge_list
    from .model import load_checkpoint, sample_walk_indices
    from .walker import transition_counts

    started = time.monotonic()
    gen, _, header = load_checkpoint(_need_file(args.checkpoint))
    os.makedirs(args.out, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    walks = sample_walk_indices(gen, args.walks, args.walk_len, rng)
    s = symmetrize(transition_counts(walks, gen.n_nodes))
    m = args.n_edges if args.n_edges is not None else header.get("m")
    if m is None:
        raise UsageError("checkpoint records no edge count; pass --edges")
    g = assemble_graph(s, m, rng)
    ids = header.get("node_ids")
    if ids is not None:
        g = Graph(g.n, g.indptr, g.indices, np.asarray(ids, dtype=np.int64))
    p_graph = os.path.join(args.out, "generated.txt")
    p_scores = os.path.join(args.out, "scores.txt")
    write_edge_list(p_graph, g, original_ids=True)
    save_scores(p_scores, s)
    write_manifest(args.out, "generate", {"walks": args.walks, "edges": m, "walk_len": args.walk_len},
                   {"seed": args.seed}, [args.checkpoint], [p_graph, p_scores], started)
    print(f"wrote {g.m} edges to {p_graph}")
    return EXIT_OK


def cmd_stats(args):
    from .graphstats import compare_reports, compute_stats, load_communities

    started = time.monotonic()
    os.makedirs(args.out, exist_ok=True)
    reports, outputs = [], []
    for path in args.graphs:
        g = _load_graph(path)
        comm = load_communities(_need_file(args.communities), g) if args.communities else None
        rep = compute_stats(g, comm)
        name = os.path.splitext(os.path.basename(path))[0]
        p = os.path.join(args.out, f"{name}.stats.json")
        rep.save(p)
        outputs.append(p)
        reports.append((name, rep))
    if len(reports) > 1:
        p = os.path.join(args.out, "comparison.csv")
        compare_reports(reports[0][1], [r for _, r in reports[1:]],
                        names=[n for n, _ in reports[1:]], path=p)
        outputs.append(p)
    inputs = list(args.graphs) + ([args.communities] if args.communities else [])
    write_manifest(args.out, "stats", {"graphs": args.graphs}, {}, inputs, outputs, started)
    for p in outputs:
        print(p)
    return EXIT_OK


def cmd_linkpred(args):
    import numpy as np
    from .assembler import scores_for_pairs, symmetrize
    from .evaluator import adamic_adar, evaluate_link_prediction, write_result
    from .graph import EdgeSplit, largest_connected_component, split_edges
    from .model import load_checkpoint, sample_walk_indices
    from .walker import transition_counts

    started = time.monotonic()
    g = _load_graph(args.edges)
    lcc, _ = largest_connected_component(g)
    if args.split:
        split = EdgeSplit.load(_need_file(args.split), lcc)
    else:
        split = split_edges(lcc, args.val_frac, args.test_frac, seed=args.seed)
    inputs = [args.edges] + ([args.split] if args.split else [])
    if args.method == "adamic-adar":
        scorer = lambda pairs: adamic_adar(split.train, pairs)  # noqa: E731
    else:
        gen, _, _ = load_checkpoint(_need_file(args.checkpoint))
        if gen.n_nodes != lcc.n:
            raise UsageError(f"checkpoint has {gen.n_nodes} nodes, graph LCC has {lcc.n}")
        walks = sample_walk_indices(gen, args.walks, 16, np.random.default_rng(args.seed))
        s = symmetrize(transition_counts(walks, lcc.n))
        scorer = lambda pairs: scores_for_pairs(s, pairs)  # noqa: E731
        inputs.append(args.checkpoint)
    auc, ap = evaluate_link_prediction(scorer, split, args.which)
    os.makedirs(args.out, exist_ok=True)
    p = os.path.join(args.out, "linkpred.json")
    dataset = args.dataset or os.path.splitext(os.path.basename(args.edges))[0]
    write_result(p, args.method, dataset, auc, ap)
    write_manifest(args.out, "linkpred", {"method": args.method, "which": args.which, "walks": args.walks},
                   {"seed": args.seed}, inputs, [p], started)
    print(f"{args.method}: auc={auc:.4f} ap={ap:.4f}")
    return EXIT_OK


def cmd_interpolate(args):
    from .graph import largest_connected_component
    from .graphstats import load_communities
    from .latent import LatentGrid, bin_properties, trajectory, write_heatmaps
    from .model import load_checkpoint

    started = time.monotonic()
    gen, _, _ = load_checkpoint(_need_file(args.checkpoint))
    g = _load_graph(args.edges)
    lcc, _ = largest_connected_component(g)
    if gen.n_nodes != lcc.n:
        raise UsageError(f"checkpoint has {gen.n_nodes} nodes, graph LCC has {lcc.n}")
    comm = load_communities(_need_file(args.communities), lcc) if args.communities else None
    grid = LatentGrid(2, args.bins)
    bins = None
    if args.trajectory is not None:
        axis, fixed = args.trajectory
        bins = trajectory(grid, axis, fixed)
    rows = bin_properties(gen, grid, lcc, args.walks_per_bin, seed=args.seed,
                          communities=comm, bins=bins)
    os.makedirs(args.out, exist_ok=True)
    p_rows = os.path.join(args.out, "bins.json")
    with open(p_rows, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=1)
    paths = write_heatmaps(rows, os.path.join(args.out, "heatmaps"))
    inputs = [args.checkpoint, args.edges] + ([args.communities] if args.communities else [])
    write_manifest(args.out, "interpolate", {"bins": args.bins, "walks_per_bin": args.walks_per_bin,
                                             "trajectory": args.trajectory},
                   {"seed": args.seed}, inputs, [p_rows, *paths], started)
    print(f"{len(rows)} bins -> {p_rows}")
    return EXIT_OK


def cmd_synth(args):
    import numpy as np
    from .graph import write_edge_list
    from .synthetic import DcSbmSpec, configuration_model, default_dcsbm_spec, sample_dcsbm

    started = time.monotonic()
    os.makedirs(args.out, exist_ok=True)
    outputs, inputs, config = [], [], {"model": args.model}
    if args.model == "dcsbm":
        if args.spec:
            spec = DcSbmSpec.from_json(_need_file(args.spec))
            inputs.append(args.spec)
        else:
            spec = default_dcsbm_spec(args.n, args.k, seed=args.seed)
            config.update(n=args.n, k=args.k)
        g, p = sample_dcsbm(spec, args.seed)
        p_spec = os.path.join(args.out, "dcsbm_spec.json")
        p_prob = os.path.join(args.out, "edge_probabilities.npy")
        p_comm = os.path.join(args.out, "communities.txt")
        spec.to_json(p_spec)
        np.save(p_prob, p)
        with open(p_comm, "w", encoding="utf-8") as fh:
            for v, c in enumerate(spec.block_of):
                fh.write(f"{v}\t{c}\n")
        outputs += [p_spec, p_prob, p_comm]
    else:
        base = _load_graph(args.edges)
        inputs.append(args.edges)
        g = configuration_model(base, args.keep, args.seed)
        config["keep"] = args.keep
    p_graph = os.path.join(args.out, "graph.txt")
    write_edge_list(p_graph, g)
    outputs.append(p_graph)
    write_manifest(args.out, "synth", config, {"seed": args.seed}, inputs, outputs, started)
    print(f"{args.model}: n={g.n} m={g.m} -> {p_graph}")
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser():
    ap = argparse.ArgumentParser(prog="netwalk", description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, default=None,
                    help="cap on worker threads (falls back to NETWALK_THREADS)")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit a generator to an edge list")
    t.add_argument("edges")
    t.add_argument("--out", required=True)
    t.add_argument("--config")
    t.add_argument("--stop", choices=["val", "eo"])
    t.add_argument("--target-eo", type=float)
    t.add_argument("--val-frac", type=float, default=0.10)
    t.add_argument("--test-frac", type=float, default=0.05)
    t.add_argument("--seed", type=int)
    t.add_argument("--max-iters", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--eval-every", type=int)
    t.add_argument("--eval-transitions", type=int)
    t.add_argument("--patience", type=int)
    t.add_argument("--window", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("-p", type=float)
    t.add_argument("-q", type=float)
    t.add_argument("--time-budget", type=float, help="seconds")
    t.set_defaults(func=cmd_train)

    g = sub.add_parser("generate", help="sample walks and assemble a graph")
    g.add_argument("checkpoint")
    g.add_argument("--out", required=True)
    g.add_argument("--walks", type=int, default=500_000)
    g.add_argument("--walk-len", type=int, default=16)
    g.add_argument("--edges", dest="n_edges", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("stats", help="graph statistics; the first graph is the reference")
    s.add_argument("graphs", nargs="+")
    s.add_argument("--out", required=True)
    s.add_argument("--communities")
    s.set_defaults(func=cmd_stats)

    lp = sub.add_parser("linkpred", help="link prediction on held-out edges")
    lp.add_argument("edges")
    lp.add_argument("--out", required=True)
    lp.add_argument("--method", choices=["netgan", "adamic-adar"], default="netgan")
    lp.add_argument("--checkpoint")
    lp.add_argument("--split")
    lp.add_argument("--which", choices=["val", "test"], default="test")
    lp.add_argument("--walks", type=int, default=500_000)
    lp.add_argument("--val-frac", type=float, default=0.10)
    lp.add_argument("--test-frac", type=float, default=0.05)
    lp.add_argument("--dataset")
    lp.add_argument("--seed", type=int, default=0)
    lp.set_defaults(func=cmd_linkpred)

    it = sub.add_parser("interpolate", help="per-bin properties over the latent grid")
    it.add_argument("checkpoint")
    it.add_argument("edges")
    it.add_argument("--out", required=True)
    it.add_argument("--bins", type=int, default=20)
    it.add_argument("--walks-per-bin", type=int, default=5000)
    it.add_argument("--communities")
    it.add_argument("--trajectory", type=int, nargs=2, metavar=("AXIS", "FIXED"))
    it.add_argument("--seed", type=int, default=0)
    it.set_defaults(func=cmd_interpolate)

    sy = sub.add_parser("synth", help="synthetic graphs")
    sy.add_argument("model", choices=["dcsbm", "config"])
    sy.add_argument("--out", required=True)
    sy.add_argument("--n", type=int, default=300)
    sy.add_argument("--k", type=int, default=3)
    sy.add_argument("--spec", help="DC-SBM JSON with blocks, omega and optional theta")
    sy.add_argument("--edges", help="input edge list for the configuration model")
    sy.add_argument("--keep", type=float, default=0.0)
    sy.add_argument("--seed", type=int, default=0)
    sy.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    threads = _threads(args)
    if threads is not None:
        if threads < 1:
            print("netwalk: error: --threads must be positive", file=sys.stderr)
            return EXIT_USAGE
        # only effective when the BLAS has not been loaded yet
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"netwalk: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"netwalk: error: {e.strerror}: {e.filename}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"netwalk: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001
        print(f"netwalk: runtime failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
