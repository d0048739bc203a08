"""Command-line front end.

Subcommands wire the pipeline stages together: ``synth`` (generate worlds),
``ingest`` (bin raw logs into views), ``fit`` (learn topics), ``link``
(rank candidates with any method), ``eval`` (recall against truth),
``sweep`` (granularity grid), and ``verify-appendix`` (numerical bench).

Flags override config-file keys override defaults; the config file is a
flat JSON object keyed by flag name (without leading dashes, dashes as
underscores).  Exit codes: 0 success, 1 input error, 2 internal failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from seqlink import io as sio
from seqlink._seeding import derive_seed

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INTERNAL = 2


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="flat JSON config file")
    p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    p.add_argument("--threads", type=int, default=None, help="worker cap (default 1)")


def _add_lda_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k-topics", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--rho0", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--e-step-tol", type=float, default=None)
    p.add_argument("--e-step-max-iter", type=int, default=None)


_LDA_DEFAULTS = {
    "k_topics": 10,
    "alpha": 0.1,
    "eta": 0.05,
    "rho0": 1.0,
    "kappa": 0.7,
    "epochs": 5,
    "e_step_tol": 1e-4,
    "e_step_max_iter": 200,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqlink", description="sequence linkage across event-log domains"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic world with ground truth")
    _add_common(p)
    p.add_argument("--d", type=int, default=None, help="entity count")
    p.add_argument("--k", type=int, default=None, help="topic count")
    p.add_argument("--w", type=int, default=None, help="vocabulary size")
    p.add_argument("--n", type=int, default=None, help="events per entity")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--split-prob", type=float, default=None)
    p.add_argument("--y-views-min", type=int, default=None)
    p.add_argument("--y-views-max", type=int, default=None)
    p.add_argument("--zero-overlap", action="store_true", default=None)
    p.add_argument("--render-log", default=None, help="also write a raw activity log here")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("ingest", help="bin an activity log into views")
    _add_common(p)
    p.add_argument("--log", required=True)
    p.add_argument("--spatial-digits", type=int, default=None)
    p.add_argument("--temporal-bins", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("fit", help="fit the topic model on binned views")
    _add_common(p)
    _add_lda_flags(p)
    p.add_argument("--views", required=True)
    p.add_argument("--vocabulary", default=None)
    p.add_argument("--method", choices=("online", "batch"), default=None)
    p.add_argument("--out", required=True, help="model JSON path")

    p = sub.add_parser("link", help="rank Y candidates for every X view")
    _add_common(p)
    _add_lda_flags(p)
    p.add_argument(
        "--method", choices=("lda-link", "js-dist", "nflx", "pois"), default=None
    )
    p.add_argument("--views", default=None, help="binned views (lda-link, js-dist, pois)")
    p.add_argument("--vocabulary", default=None)
    p.add_argument("--model", default=None, help="model JSON (lda-link)")
    p.add_argument("--log", default=None, help="raw activity log (nflx)")
    p.add_argument("--spatial-digits", type=int, default=None, help="nflx location cells")
    p.add_argument("--k", type=int, default=None, help="candidates per X view")
    p.add_argument("--reject-threshold", type=float, default=None)
    p.add_argument("--n0", type=float, default=None)
    p.add_argument("--tau0", type=float, default=None)
    p.add_argument("--eccentricity-eps", type=float, default=None)
    p.add_argument("--out", required=True, help="linkage CSV path")

    p = sub.add_parser("eval", help="rank-k recall of a linkage against truth")
    _add_common(p)
    p.add_argument("--linkage", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--ks", default=None, help="comma-separated k values")
    p.add_argument("--cohort", choices=("all", "sparse", "zero-overlap"), default=None)
    p.add_argument("--views", default=None, help="binned views (needed for cohorts)")
    p.add_argument("--sparse-fraction", type=float, default=None)
    p.add_argument("--method-label", default=None)
    p.add_argument("--out", default=None, help="recall CSV path (default: stdout only)")

    p = sub.add_parser("sweep", help="granularity grid sweep")
    _add_common(p)
    _add_lda_flags(p)
    p.add_argument("--log", required=True)
    p.add_argument("--grid", default=None, help="points like 2:1,2:8,2:64 (digits:bins)")
    p.add_argument("--methods", default=None, help="comma-separated method names")
    p.add_argument("--ks", default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("verify-appendix", help="run the numerical verification bench")
    _add_common(p)
    p.add_argument("--quick", action="store_true", default=None)
    p.add_argument("--out", default=None, help="JSON report path")

    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    """Flag > config file > default, on the flat key space."""
    merged: dict = {}
    if getattr(args, "config", None):
        try:
            merged.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise SystemExit(f"seqlink: cannot read config: {exc}")
    for key, value in vars(args).items():
        if key in ("config", "command"):
            continue
        if value is not None:
            merged[key] = value
    merged.setdefault("seed", 0)
    merged.setdefault("threads", 1)
    return merged


def _lda_config(opt: dict, seed: int):
    from seqlink.lda import LdaConfig

    vals = {k: opt.get(k, d) for k, d in _LDA_DEFAULTS.items()}
    return LdaConfig(
        n_topics=vals["k_topics"],
        alpha=vals["alpha"],
        eta=vals["eta"],
        rho0=vals["rho0"],
        kappa=vals["kappa"],
        epochs=vals["epochs"],
        e_step_tol=vals["e_step_tol"],
        e_step_max_iter=vals["e_step_max_iter"],
        seed=seed,
    )


def _cmd_synth(opt: dict) -> int:
    from seqlink.corpus import Vocabulary
    from seqlink.synth import SiteLayout, SynthConfig, generate_world, render_activity_log, zero_overlap_world

    cfg = SynthConfig(
        n_entities=opt.get("d", 100),
        n_topics=opt.get("k", 10),
        n_events_vocab=opt.get("w", 500),
        alpha=opt.get("alpha", 0.1),
        eta=opt.get("eta", 0.05),
        events_per_entity=opt.get("n", 500),
        split_prob=opt.get("split_prob", 0.5),
        y_views_per_entity=(opt.get("y_views_min", 1), opt.get("y_views_max", 1)),
        seed=derive_seed(opt["seed"], "synth"),
    )
    world = zero_overlap_world(cfg) if opt.get("zero_overlap") else generate_world(cfg)

    out = Path(opt["out"])
    out.mkdir(parents=True, exist_ok=True)
    sio.write_views(out / "views.jsonl", world.all_views)
    sio.write_vocabulary(out / "vocabulary.json", Vocabulary.identity(cfg.n_events_vocab))
    sio.write_truth_csv(out / "truth.csv", world.truth)
    if opt.get("render_log"):
        records = render_activity_log(world, SiteLayout(), seed=derive_seed(opt["seed"], "render"))
        sio.write_activity_log(opt["render_log"], records)
    print(f"wrote world: {len(world.x_views)} X views, {len(world.y_views)} Y views -> {out}")
    return EXIT_OK


def _cmd_ingest(opt: dict) -> int:
    from seqlink.corpus import Granularity, build_event_space

    records = sio.read_activity_log(opt["log"])
    gran = Granularity(opt.get("spatial_digits", 2), opt.get("temporal_bins", 1))
    vocab, views = build_event_space(records, gran)
    out = Path(opt["out"])
    out.mkdir(parents=True, exist_ok=True)
    sio.write_views(out / "views.jsonl", views)
    sio.write_vocabulary(out / "vocabulary.json", vocab)
    print(f"ingested {len(records)} records into {len(views)} views over {vocab.size} events")
    return EXIT_OK


def _cmd_fit(opt: dict) -> int:
    from seqlink.lda import fit_batch, fit_online

    views = sio.read_views(opt["views"])
    vocab = sio.read_vocabulary(opt["vocabulary"]) if opt.get("vocabulary") else None
    cfg = _lda_config(opt, derive_seed(opt["seed"], "fit"))
    if opt.get("method", "online") == "batch":
        model, _ = fit_batch(views, cfg, vocabulary=vocab)
    else:
        model = fit_online(views, cfg, vocabulary=vocab)
    sio.write_model(opt["out"], model, vocabulary_ref=opt.get("vocabulary") or "")
    print(f"fit {cfg.n_topics} topics over {model.n_events} events from {len(views)} views")
    return EXIT_OK


def _split_views(views):
    return [v for v in views if v.domain == "X"], [v for v in views if v.domain == "Y"]


def _cmd_link(opt: dict) -> int:
    from seqlink.baselines import (
        NflxParams,
        estimate_pois_params,
        jsdist_link,
        nflx_link,
        pois_link,
    )
    from seqlink.linkage import link

    method = opt.get("method", "lda-link")
    k = opt.get("k", 5)

    if method == "nflx":
        if not opt.get("log"):
            raise SystemExit("seqlink link --method nflx requires --log")
        from seqlink.evaluation import _located_events

        records = sio.read_activity_log(opt["log"])
        x_ev, y_ev = _located_events(records, opt.get("spatial_digits", 2))
        params = NflxParams(
            n0=opt.get("n0", 3.0),
            tau0=opt.get("tau0", 3600.0),
            eccentricity_eps=opt.get("eccentricity_eps", 0.5),
        )
        result, _abstain = nflx_link(x_ev, y_ev, params, k)
    else:
        if not opt.get("views"):
            raise SystemExit(f"seqlink link --method {method} requires --views")
        views = sio.read_views(opt["views"])
        x_views, y_views = _split_views(views)
        n_events = 1 + max(int(v.event_ids.max()) for v in views)
        if opt.get("vocabulary"):
            n_events = sio.read_vocabulary(opt["vocabulary"]).size
        if method == "lda-link":
            if not opt.get("model"):
                raise SystemExit("seqlink link --method lda-link requires --model")
            model = sio.read_model(opt["model"])
            cfg = _lda_config(
                {**opt, "k_topics": model.n_topics, "alpha": model.alpha, "eta": model.eta},
                derive_seed(opt["seed"], "link"),
            )
            result = link(
                x_views, y_views, model, cfg, k, reject_threshold=opt.get("reject_threshold")
            )
        elif method == "js-dist":
            result = jsdist_link(x_views, y_views, n_events, k)
        else:
            params = estimate_pois_params(x_views, y_views, n_events=n_events)
            result = pois_link(x_views, y_views, params, k)

    sio.write_linkage_csv(opt["out"], result)
    print(f"linked {len(result.candidates)} X views with up to {k} candidates ({method})")
    return EXIT_OK


def _cmd_eval(opt: dict) -> int:
    from seqlink.evaluation import (
        SweepRow,
        rank_k_recall,
        sparse_cohort,
        zero_overlap_cohort,
    )
    from seqlink.linkage import LinkageResult

    result = sio.read_linkage_csv(opt["linkage"])
    truth = sio.read_truth_csv(opt["truth"])
    ks = [int(s) for s in str(opt.get("ks", "1,5,10")).split(",")]
    cohort = opt.get("cohort", "all")

    if cohort != "all":
        if not opt.get("views"):
            raise SystemExit("seqlink eval cohorts require --views")
        views = sio.read_views(opt["views"])
        x_views, y_views = _split_views(views)
        if cohort == "sparse":
            keep = sparse_cohort(x_views, y_views, truth, opt.get("sparse_fraction", 0.1))
        else:
            keep = zero_overlap_cohort(x_views, y_views, truth)
        result = LinkageResult(
            candidates={x: c for x, c in result.candidates.items() if x in keep}
        )
        if not result.candidates:
            raise SystemExit("cohort is empty; nothing to evaluate")

    rows = []
    for k in ks:
        recall = rank_k_recall(result, truth, k)
        rows.append(
            SweepRow(
                spatial_digits=-1,
                temporal_bins=-1,
                method=opt.get("method_label", "unknown"),
                k=k,
                cohort=cohort,
                recall=recall,
                population=len(result.candidates),
            )
        )
        print(f"rank-{k} recall [{cohort}]: {recall:.4f} over {len(result.candidates)} views")
    if opt.get("out"):
        sio.write_recall_csv(opt["out"], rows)
    return EXIT_OK


def _cmd_sweep(opt: dict) -> int:
    from seqlink.corpus import Granularity
    from seqlink.evaluation import granularity_sweep

    records = sio.read_activity_log(opt["log"])
    grid = []
    for part in str(opt.get("grid", "2:1,2:8")).split(","):
        digits, bins = part.split(":")
        grid.append(Granularity(int(digits), int(bins)))
    methods = tuple(str(opt.get("methods", "lda-link,js-dist")).split(","))
    ks = [int(s) for s in str(opt.get("ks", "5")).split(",")]
    cfg = _lda_config(opt, 0)

    threads = int(opt.get("threads", 1))
    if threads > 1:
        # Grid points are independent; per-point seeds keep results identical
        # to the sequential run.
        def one(g):
            return granularity_sweep(records, [g], cfg, ks, methods, seed=opt["seed"])

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = [row for chunk in pool.map(one, grid) for row in chunk]
    else:
        rows = granularity_sweep(records, grid, cfg, ks, methods, seed=opt["seed"])
    sio.write_recall_csv(opt["out"], rows)
    for r in rows:
        print(
            f"granularity=({r.spatial_digits},{r.temporal_bins}) {r.method} "
            f"rank-{r.k} recall={r.recall:.4f}"
        )
    return EXIT_OK


def _cmd_verify_appendix(opt: dict) -> int:
    import numpy as np

    from seqlink.lda import LdaConfig
    from seqlink.synth import SynthConfig, generate_world
    from seqlink.verify import (
        check_first_order,
        check_mode_bound,
        check_second_order,
        error_exponent_mc,
        js_concentration_mc,
        simplified_fixed_point,
        residual_fixed_point,
        surrogate_tracking_probe,
    )

    seed = opt["seed"]
    quick = bool(opt.get("quick"))
    report: dict = {"seed": seed, "quick": quick}

    bound = check_mode_bound(
        num_samples=100 if quick else 500,
        n_events=10,
        c_list=[1e3, 1e4, 1e5],
        ratio=1.0,
        seed=derive_seed(seed, "mode-bound"),
    )
    report["mode_bound"] = {
        "concentrations": bound.concentrations,
        "max_margin": bound.max_margin,
        "scaled_margin": bound.scaled_margin,
        "passed": bound.passed,
    }
    print(f"mode bound: scaled margins {['%.3g' % m for m in bound.scaled_margin]} "
          f"non-increasing={bound.passed}")

    rng = np.random.default_rng(derive_seed(seed, "fixed-point"))
    fp_entries = []
    for i in range(5 if quick else 20):
        k, w = int(rng.integers(2, 5)), int(rng.integers(3, 7))
        beta = rng.dirichlet(np.ones(w), size=k) + 0.05
        beta /= beta.sum(axis=1, keepdims=True)
        mix = rng.dirichlet(np.ones(k)) * 0.8 + 0.2 / k
        p0 = mix @ beta
        theta0 = np.full(k, 1.0 / k)
        fp = simplified_fixed_point(p0, beta, theta0, tol=1e-13, max_iter=200_000)
        first = check_first_order(p0, beta, theta0)
        second = check_second_order(p0, beta, theta0)
        fp_entries.append(
            {
                "residual": residual_fixed_point(fp.theta, p0, beta),
                "first_order": first.residual,
                "first_passed": first.passed,
                "second_order": second.residual,
                "second_passed": second.passed,
            }
        )
    report["fixed_point"] = fp_entries
    n_pass = sum(e["first_passed"] and e["second_passed"] for e in fp_entries)
    print(f"fixed-point derivative checks: {n_pass}/{len(fp_entries)} instances passed")

    conc = js_concentration_mc(
        np.full(4, 0.25),
        n_list=[20, 40, 80],
        lambda_thresh=0.2,
        trials=2000 if quick else 10_000,
        seed=derive_seed(seed, "concentration"),
    )
    report["concentration"] = [
        {"n": c.n, "hits": c.hits, "exponent": c.exponent if c.hits else None} for c in conc
    ]
    print("concentration exponents:", ["%.3g" % c.exponent if c.hits else "inf" for c in conc])

    err = error_exponent_mc(
        n_entities=10,
        n_list=[50, 100, 200, 400],
        trials=30 if quick else 200,
        seed=derive_seed(seed, "exponent"),
    )
    report["error_exponent"] = [
        {"n": e.n, "errors": e.errors, "decisions": e.decisions, "rate": e.error_rate}
        for e in err
    ]
    print("ranking error rates:", ["%.4f" % e.error_rate for e in err])

    world = generate_world(
        SynthConfig(
            n_entities=20,
            n_topics=4,
            n_events_vocab=100,
            alpha=0.2,
            eta=0.1,
            events_per_entity=200,
            split_prob=0.5,
            seed=derive_seed(seed, "probe-world"),
        )
    )
    probe = surrogate_tracking_probe(
        world, LdaConfig(n_topics=4, alpha=0.2, eta=0.1, seed=derive_seed(seed, "probe")),
        epochs=3 if quick else 8,
    )
    report["surrogate_tracking"] = [
        {"epoch": p.epoch, "skl_aligned": p.skl_aligned} for p in probe
    ]
    print("surrogate tracking SKL per epoch:", ["%.3g" % p.skl_aligned for p in probe])

    if opt.get("out"):
        Path(opt["out"]).write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
        print(f"wrote report -> {opt['out']}")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "fit": _cmd_fit,
    "link": _cmd_link,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "verify-appendix": _cmd_verify_appendix,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        opt = _merge_config(args)
        return _COMMANDS[args.command](opt)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return EXIT_INPUT
        return int(exc.code or 0)
    except (OSError, ValueError, KeyError) as exc:
        print(f"seqlink: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # internal failure
        print(f"seqlink: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def console_main() -> None:
    raise SystemExit(main())
