"""Command-line interface: ``qgeo <subcommand> --config c.json ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataset as dio
from .dataset import PipelineConfig
from .errors import QGeoError

log = logging.getLogger("qgeo")


def _load_cfg(args) -> PipelineConfig | None:
    cfg = dio.load_config(args.config) if getattr(args, "config", None) else None
    if cfg is None:
        return None
    changes = {}
    for flag, name in (("use_pca", "use_pca"), ("delta_pca", "delta_pca"), ("gamma", "gamma"),
                       ("estimator", "estimator"), ("seed", "seed"), ("cutoff", "spectral_cutoff")):
        v = getattr(args, flag, None)
        if v is not None and v is not False:
            changes[name] = v
    return cfg.replace(**changes) if changes else cfg


def _require_cfg(args) -> PipelineConfig:
    cfg = _load_cfg(args)
    if cfg is None:
        raise SystemExit(f"qgeo {args.command}: --config is required")
    return cfg


def _add_pipeline_flags(p):
    p.add_argument("--use-pca", action="store_true", default=None, help="LPCA-frame coherent states")
    p.add_argument("--delta-pca", type=float, help="squared radius of the LPCA neighborhood")
    p.add_argument("--gamma", type=float, help="basis-ball scale factor for two-scale LPCA")
    p.add_argument("--estimator", choices=["mean", "mean-lpca", "max"])
    p.add_argument("--seed", type=int)
    p.add_argument("--cutoff", type=int, help="keep only this many lowest eigenpairs")


def cmd_sample(args):
    from .oracles.sampling import TorusSpec, sample_sphere, sample_torus

    if args.manifold == "sphere":
        ds = sample_sphere(args.n, args.seed)
    else:
        ds = sample_torus(args.n, TorusSpec(r=args.r, R=args.R), args.seed)
    dio.save_dataset(ds, args.out, "csv" if args.out.endswith(".csv") else "f64-binary",
                     header=["x", "y", "z"])


def cmd_laplacian(args):
    from .laplacian import spectral_laplacian

    cfg = _require_cfg(args)
    data = dio.load_dataset(args.data)
    spec = spectral_laplacian(data, cfg.epsilon, cfg.lam, cutoff=cfg.spectral_cutoff)
    dio.save_spectral(spec, args.out)
    print(f"wrote {spec.n_modes} eigenpairs of an N={spec.n} Laplacian to {args.out}")


def cmd_geodesics(args):
    from .pipeline import build_distance_matrix, prepare

    cfg = _require_cfg(args)
    data = dio.load_dataset(args.data)
    spec = dio.load_spectral(args.spectral) if args.spectral else None
    ctx = prepare(data, cfg, spec)
    G = build_distance_matrix(data, cfg, workers=args.workers, ctx=ctx)
    dio.save_distance_matrix(G, args.out, labels=data.labels())
    print(f"wrote {G.n_edges} distances to {args.out}")


def cmd_scan(args):
    from .pipeline import deviation_scan

    cfg = _require_cfg(args)
    data = dio.load_dataset(args.data)
    log_eps = np.arange(args.log_eps_min, args.log_eps_max + 1e-9, args.log_eps_step)
    alphas = np.arange(args.alpha_min, args.alpha_max + 1e-9, args.alpha_step)
    grid = deviation_scan(data, np.exp(log_eps), alphas, args.probes, cfg)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epsilon", "log_epsilon", "alpha", "h", "deviation"])
        for i, e in enumerate(grid.eps_values):
            for j, a in enumerate(grid.alpha_values):
                h = e ** (1.0 / (2.0 + a))
                w.writerow([format(v, ".17g") for v in (e, np.log(e), a, h, grid.D[i, j])])
    eps, alpha = grid.selected()
    print(json.dumps({"epsilon": eps, "log_epsilon": float(np.log(eps)), "alpha": alpha}))


def cmd_embed(args):
    from .embedding import force_layout

    cfg = _load_cfg(args)
    G = dio.load_distance_matrix(args.g)
    dim = args.dim or (cfg.embed_dim if cfg else 3)
    iters = args.iters or (cfg.layout_iters if cfg else 500)
    seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
    emb = force_layout(G, dim, iters, seed)
    labels = _labels_for(args.g, G.n)
    dio.save_embedding(emb.coords, args.out, labels)
    print(f"embedded {G.n} points in {dim}D, stress {emb.final_stress:.4g}")


def _labels_for(g_path, n):
    meta = Path(g_path).with_suffix(".meta.json")
    if meta.exists():
        labels = json.loads(meta.read_text(encoding="utf-8")).get("labels")
        if labels and len(labels) == n:
            return labels
    return [str(i) for i in range(n)]


def cmd_cluster(args):
    from .embedding import kmeans

    cfg = _load_cfg(args)
    labels, coords = dio.load_embedding(args.embedding)
    k = args.k or (cfg.k_clusters if cfg else 5)
    seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
    cl = kmeans(coords, k, seed)
    dio.save_embedding(coords, args.out, labels, clusters=cl.labels)
    print(f"k={k} inertia {cl.inertia:.6g}")


def cmd_validate(args):
    from . import experiments as ex

    cfg = _load_cfg(args)
    if args.manifold == "sphere":
        cfg = cfg or ex.sphere_config(seed=args.seed or 0)
        res = ex.sphere_validation(args.n, seed=cfg.seed, n_bases=args.bases, n_steps=cfg.n_prop,
                                   cfg=cfg, scan=not args.no_scan)
        res.table.to_csv(args.out)
        print(f"epsilon={res.config.epsilon:.6g} alpha={res.config.alpha:g} h={res.config.h:.4f}")
        table = res.table
    else:
        seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
        res = ex.torus_validation(seed=seed, n_states=args.bases)
        res.table.to_csv(args.out)
        if args.long_out:
            res.long_time.to_csv(args.long_out)
        table = res.table
    for row in table.rows():
        print("t={t:.2f} mean_d={mean_distance:.4f} mean_err={mean_abs_error:.4f}".format(**row))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qgeo", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample a sphere or torus point cloud")
    p.add_argument("manifold", choices=["sphere", "torus"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--r", type=float, default=0.8)
    p.add_argument("--R", type=float, default=2.0)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="unused; accepted for uniformity")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("laplacian", help="decompose the graph Laplacian")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cutoff", type=int)
    p.set_defaults(func=cmd_laplacian)

    p = sub.add_parser("geodesics", help="sparse geodesic distance matrix")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--spectral", help="reuse a decomposition written by 'qgeo laplacian'")
    p.add_argument("--workers", type=int, default=1)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_geodesics)

    p = sub.add_parser("scan", help="deviation scan over (epsilon, alpha)")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log-eps-min", type=float, default=-6.0)
    p.add_argument("--log-eps-max", type=float, default=-2.5)
    p.add_argument("--log-eps-step", type=float, default=0.5)
    p.add_argument("--alpha-min", type=float, default=1.0)
    p.add_argument("--alpha-max", type=float, default=2.0)
    p.add_argument("--alpha-step", type=float, default=0.2)
    p.add_argument("--probes", type=int, default=28)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("embed", help="force-directed layout of a distance matrix")
    p.add_argument("--config")
    p.add_argument("--g", required=True, help="triplet CSV written by 'qgeo geodesics'")
    p.add_argument("--dim", type=int, choices=[2, 3])
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("cluster", help="k-means on an embedding")
    p.add_argument("--config")
    p.add_argument("--embedding", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("validate", help="tracking experiment against analytic geodesics")
    p.add_argument("manifold", choices=["sphere", "torus"])
    p.add_argument("--config")
    p.add_argument("--n", type=int, default=3000, help="sphere sample count")
    p.add_argument("--bases", type=int, default=20)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-scan", action="store_true", help="use the config's epsilon and alpha as given")
    p.add_argument("--out", required=True)
    p.add_argument("--long-out", help="torus: long-time trajectory table")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (QGeoError, FileNotFoundError) as exc:
        print(f"qgeo {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
