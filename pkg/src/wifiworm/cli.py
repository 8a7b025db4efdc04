"""Command-line interface: ``wifiworm {synth,graph,simulate,sweep,report}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Every command
that writes a directory also writes ``manifest.json``; passing that file
back through ``--config`` reproduces the outputs byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import epidemic as ep
from . import experiment as ex
from . import ingest
from . import spatialnet as sn

log = logging.getLogger("wifiworm")

MANIFEST = "manifest.json"

# resolved-config defaults per command; flags > config file > these
DEFAULTS = {
    "synth": dict(nodes=None, encrypted=0.3, seed=0, center_lat=41.88, center_lon=-87.63,
                  width_m=None, clusters=0, cluster_sigma_m=150.0, cluster_weight=0.3,
                  probe_fraction=0.0),
    "graph": dict(input=None, radius=45.0, rand_radius=10.0, seed=0, overlap_cap=20,
                  wpa_fraction=0.30, nopass_fraction=0.50, dict1_fraction=0.25,
                  dict2_fraction=0.11, layout=0, with_tiers=False),
    "simulate": dict(input=None, radius=45.0, rand_radius=10.0, seed=0, overlap_cap=20,
                     wpa_fraction=0.30, nopass_fraction=0.50, dict1_fraction=0.25,
                     dict2_fraction=0.11, layouts=5, runs=100, ci=0.90, preset="typical",
                     tau=5.0, tau1=None, tau2=None, tau_wep=None, seeds=5, horizon=4032,
                     deterministic=False, dump_every=None),
    "sweep": dict(input=None, radii=None, wpa=None, radius=45.0, rand_radius=10.0, seed=0,
                  overlap_cap=20, wpa_fraction=0.30, nopass_fraction=0.50,
                  dict1_fraction=0.25, dict2_fraction=0.11, layouts=5, runs=100,
                  preset="typical", tau=5.0, tau1=None, tau2=None, tau_wep=None, seeds=5,
                  horizon=4032, simulate=True),
}


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list of numbers")
    try:
        return [float(t) for t in items]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_ingest_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", "-i", help="router corpus CSV (bssid,lat,lon,type,encryption)")
    p.add_argument("--rand-radius", type=float, help="position randomization radius in m")
    p.add_argument("--seed", type=int, help="master random seed")
    p.add_argument("--overlap-cap", type=int, help="max routers kept per identical GPS fix")
    p.add_argument("--wpa-fraction", type=float, help="share of encrypted routers on WPA")
    p.add_argument("--nopass-fraction", type=float,
                   help="share of open routers on the factory password")
    p.add_argument("--dict1-fraction", type=float)
    p.add_argument("--dict2-fraction", type=float)


def _add_epidemic_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--layouts", type=int, help="position randomizations")
    p.add_argument("--runs", type=int, help="total runs (split evenly over layouts)")
    p.add_argument("--preset", choices=sorted(ep.PRESETS))
    p.add_argument("--tau", type=float, help="minutes per tick (factory-password takeover)")
    p.add_argument("--tau1", type=float, help="small-dictionary minutes")
    p.add_argument("--tau2", type=float, help="large-dictionary minutes")
    p.add_argument("--tau-wep", type=float, help="WEP cracking minutes")
    p.add_argument("--seeds", type=int, help="initially infected routers")
    p.add_argument("--horizon", type=int, help="ticks to simulate")
    p.add_argument("--workers", type=int, help="parallel worker processes (default: all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wifiworm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic router corpus")
    p.add_argument("--nodes", type=int)
    p.add_argument("--encrypted", type=float, help="fraction of encrypted routers")
    p.add_argument("--seed", type=int)
    p.add_argument("--center-lat", type=float)
    p.add_argument("--center-lon", type=float)
    p.add_argument("--width-m", type=float,
                   help="side of the square city (default: <k> about 20 at 45 m)")
    p.add_argument("--clusters", type=int, help="number of Gaussian downtown hot spots")
    p.add_argument("--cluster-sigma-m", type=float)
    p.add_argument("--cluster-weight", type=float, help="total share of routers in hot spots")
    p.add_argument("--probe-fraction", type=float)
    p.add_argument("--out", "-o", required=True, help="output CSV path")
    p.add_argument("--config", help="JSON config file or manifest")

    p = sub.add_parser("graph", help="build the proximity graph and its statistics")
    _add_ingest_flags(p)
    p.add_argument("--radius", type=float, help="interaction radius R_int in m")
    p.add_argument("--layout", type=int, help="layout randomization index")
    p.add_argument("--with-tiers", action="store_const", const=True,
                   help="include latent password tiers in the node table")
    p.add_argument("--out", "-o", required=True, help="output directory")
    p.add_argument("--config")

    p = sub.add_parser("simulate", help="run an epidemic ensemble")
    _add_ingest_flags(p)
    _add_epidemic_flags(p)
    p.add_argument("--radius", type=float)
    p.add_argument("--ci", type=float, help="confidence level of the band")
    p.add_argument("--deterministic", action="store_const", const=True,
                   help="fixed phase durations instead of geometric ones")
    p.add_argument("--dump-every", type=int,
                   help="write node states of run (0, 0) every k ticks")
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--config")

    p = sub.add_parser("sweep", help="radius or immunization sweep")
    _add_ingest_flags(p)
    _add_epidemic_flags(p)
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--radii", type=_float_list, help="e.g. 15,30,45,100")
    grp.add_argument("--wpa", type=_float_list, help="immune fractions, e.g. 0,0.2,0.4")
    p.add_argument("--radius", type=float, help="interaction radius for --wpa sweeps")
    p.add_argument("--no-simulate", dest="simulate", action="store_const", const=False,
                   help="--wpa: report giant components only")
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--config")

    p = sub.add_parser("report", help="summarize manifests into one table")
    p.add_argument("dirs", nargs="+", help="output directories or manifest files")
    p.add_argument("--out", "-o", help="CSV path (default: stdout)")
    return parser


def _load_config_file(path: str | None, command: str) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if "config" in data and "command" in data:
        if data["command"] != command:
            raise UsageError(f"manifest is for {data['command']!r}, not {command!r}")
        data = data["config"]
    unknown = set(data) - set(DEFAULTS[command])
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    return data


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[args.command])
    cfg.update(_load_config_file(getattr(args, "config", None), args.command))
    for key in cfg:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    return cfg


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(outdir: Path, command: str, cfg: dict, outputs: list[str],
                   summary: dict | None = None) -> None:
    inputs = {}
    if cfg.get("input"):
        inputs[cfg["input"]] = _sha256(cfg["input"])
    manifest = {
        "command": command,
        "tool_version": __version__,
        "master_seed": cfg.get("seed"),
        "config": cfg,
        "inputs": inputs,
        "outputs": sorted(outputs),
        "summary": summary or {},
    }
    (outdir / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                   encoding="utf-8")


def _ingest_config(cfg: dict) -> ingest.IngestConfig:
    return ingest.IngestConfig(
        overlap_cap=cfg["overlap_cap"],
        randomization_radius_m=cfg["rand_radius"],
        wpa_fraction_of_encrypted=cfg["wpa_fraction"],
        nopass_fraction_of_open=cfg["nopass_fraction"],
        dict1_fraction=cfg["dict1_fraction"],
        dict2_fraction=cfg["dict2_fraction"],
        rng_seed=cfg["seed"],
    )


def _epidemic_params(cfg: dict) -> ep.EpidemicParams:
    overrides = {k: cfg[c] for k, c in (("tau1_min", "tau1"), ("tau2_min", "tau2"),
                                        ("tau_wep_min", "tau_wep")) if cfg.get(c) is not None}
    return ep.EpidemicParams.preset(
        cfg["preset"], tau_min=cfg["tau"], seed_count=cfg["seeds"],
        horizon_steps=cfg["horizon"], deterministic_durations=bool(cfg.get("deterministic")),
        **overrides)


def _experiment_config(cfg: dict, workers: int | None, radius: float) -> ex.ExperimentConfig:
    layouts, runs = cfg["layouts"], cfg["runs"]
    if layouts < 1 or runs < 1:
        raise UsageError("--layouts and --runs must be >= 1")
    if runs % layouts:
        raise UsageError(f"--runs ({runs}) must be a multiple of --layouts ({layouts})")
    return ex.ExperimentConfig(layout_randomizations=layouts, runs_per_layout=runs // layouts,
                               ci_level=cfg.get("ci", 0.9), interaction_radius_m=radius,
                               master_seed=cfg["seed"], workers=workers)


def _read_corpus(path: str | None) -> list[ingest.RouterRecord]:
    if not path:
        raise UsageError("--input is required")
    with open(path, "rb") as fh:
        return ingest.parse_records(fh)


def _write(path: Path, writer, *args) -> str:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer(*args, fh) if args else writer(fh)
    return path.name


def cmd_synth(args) -> int:
    cfg = resolve(args)
    if cfg["nodes"] is None:
        raise UsageError("--nodes is required")
    if cfg["nodes"] < 1:
        raise UsageError("--nodes must be >= 1")
    width = cfg["width_m"]
    if width is None:
        # density giving <k> close to 20 at a 45 m interaction radius
        width = math.sqrt(cfg["nodes"] * math.pi * 45.0 ** 2 / 20.0)
    bbox = ingest.city_bbox(cfg["center_lat"], cfg["center_lon"], width)
    rng = np.random.default_rng(cfg["seed"])
    clusters = []
    if cfg["clusters"]:
        lat0, lon0, lat1, lon1 = bbox
        centers = rng.uniform((lat0, lon0), (lat1, lon1), (cfg["clusters"], 2))
        w = cfg["cluster_weight"] / cfg["clusters"]
        clusters = [ingest.Cluster(float(a), float(b), cfg["cluster_sigma_m"], w)
                    for a, b in centers]
    records = ingest.synth_city(cfg["nodes"], bbox, clusters, cfg["encrypted"], rng,
                                probe_fraction=cfg["probe_fraction"])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        ingest.write_records(records, fh)
    # a single file, so the manifest sits next to it
    side = out.with_name(out.name + ".manifest.json")
    manifest = {"command": "synth", "tool_version": __version__, "master_seed": cfg["seed"],
                "config": cfg, "inputs": {}, "outputs": [out.name],
                "summary": {"nodes": len(records),
                            "encrypted": sum(r.encrypted for r in records)}}
    side.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def cmd_graph(args) -> int:
    cfg = resolve(args)
    if not cfg["radius"] > 0:
        raise UsageError("--radius must be positive")
    icfg = _ingest_config(cfg)
    corpus = ex.prepare_corpus(_read_corpus(cfg["input"]), icfg)
    if not corpus:
        raise ValueError("no routers left after filtering")
    layout = ex.make_layout(corpus, icfg, cfg["seed"], cfg["layout"])
    graph = sn.build_graph(layout.lat, layout.lon, cfg["radius"])
    comps = sn.connected_components(graph)
    giant = sn.giant_component(graph)
    summary = ex._summarize(layout, graph, giant, False)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    enc = [p.encryption.value for p in layout.profiles]
    tiers = [p.password_tier.name.lower() for p in layout.profiles] if cfg["with_tiers"] else None
    outputs = [
        _write(outdir / "edges.csv", sn.write_edge_list, graph),
        _write(outdir / "nodes.csv",
               lambda fh: sn.write_node_table(graph, fh, enc, tiers, sn.component_labels(graph))),
        _write(outdir / "degree_histogram.csv", sn.write_degree_histogram, giant),
    ]
    stats = sn.stats_json(summary.stats, summary.f_encr, n_total=graph.n,
                          n_components=len(comps), radius_m=cfg["radius"])
    (outdir / "stats.json").write_text(stats + "\n", encoding="utf-8")
    outputs.append("stats.json")
    write_manifest(outdir, "graph", cfg, outputs,
                   {"giant_size": giant.n, "n_components": len(comps),
                    "mean_k": summary.stats.mean_degree})
    return 0


def cmd_simulate(args) -> int:
    cfg = resolve(args)
    if not cfg["radius"] > 0:
        raise UsageError("--radius must be positive")
    if cfg["dump_every"] is not None and cfg["dump_every"] < 1:
        raise UsageError("--dump-every must be >= 1")
    icfg = _ingest_config(cfg)
    try:
        params = _epidemic_params(cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ecfg = _experiment_config(cfg, args.workers, cfg["radius"])
    corpus = _read_corpus(cfg["input"])
    result = ex.run_ensemble(corpus, ecfg, icfg, params)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = [
        _write(outdir / "attack_rate_mean.csv", lambda fh: result.write_curves(fh, "mean")),
        _write(outdir / "attack_rate_lower.csv", lambda fh: result.write_curves(fh, "lower")),
        _write(outdir / "attack_rate_upper.csv", lambda fh: result.write_curves(fh, "upper")),
        _write(outdir / "attack_rate_band.csv", result.write_band),
        _write(outdir / "compartments_mean.csv", result.write_mean_counts),
        _write(outdir / "final_attack_rates.csv", result.write_finals),
    ]
    (outdir / "layouts.json").write_text(
        json.dumps(result.metadata["layouts"], indent=2) + "\n", encoding="utf-8")
    outputs.append("layouts.json")
    if cfg["dump_every"]:
        clean = ex.prepare_corpus(corpus, icfg)
        layout = ex.make_layout(clean, icfg, cfg["seed"], 0)
        giant = sn.giant_component(sn.build_graph(layout.lat, layout.lon, cfg["radius"]))
        st = ep.init_state_arrays(giant, layout.classes[giant.node_ids],
                                  layout.tiers[giant.node_ids], params,
                                  ex.run_rng(cfg["seed"], 0, 0))
        series = ep.run(st, dump_every=cfg["dump_every"])
        outputs.append(_write(outdir / "node_states.csv", ep.write_state_dumps, series))
    write_manifest(outdir, "simulate", cfg, outputs, {
        "runs": len(result.runs),
        "mean_final_attack_rate": result.mean_final_attack_rate,
        "epidemic": asdict(params),
    })
    return 0


def cmd_sweep(args) -> int:
    cfg = resolve(args)
    if not cfg["radii"] and not cfg["wpa"]:
        raise UsageError("one of --radii or --wpa is required")
    if cfg["radii"] and cfg["wpa"]:
        raise UsageError("--radii and --wpa are mutually exclusive")
    icfg = _ingest_config(cfg)
    outdir = Path(args.out)
    corpus = _read_corpus(cfg["input"])
    if cfg["radii"]:
        if any(r <= 0 for r in cfg["radii"]):
            raise UsageError("radii must be positive")
        ecfg = _experiment_config(cfg, args.workers, max(cfg["radii"]))
        rows = ex.radius_sweep(corpus, cfg["radii"], ecfg, icfg)
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["radius_m", "mean_giant_size", "mean_k", "k_max", "fluct_ratio",
                        "f_encr", "giant_sizes"])
            for r in rows:
                w.writerow([repr(r["radius_m"]), repr(r["mean_giant_size"]), repr(r["mean_k"]),
                            repr(r["k_max"]), repr(r["fluct_ratio"]), repr(r["f_encr"]),
                            " ".join(map(str, r["giant_sizes"]))])
        summary = {"rows": len(rows)}
    else:
        if any(not 0.0 <= f <= 1.0 for f in cfg["wpa"]):
            raise UsageError("immune fractions must lie in [0, 1]")
        try:
            params = _epidemic_params(cfg)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        ecfg = _experiment_config(cfg, args.workers, cfg["radius"])
        rows = ex.immunization_sweep(corpus, cfg["wpa"], ecfg, icfg, params,
                                     simulate=bool(cfg["simulate"]))
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["immune_fraction", "mean_nonimmune_giant_size",
                        "mean_final_attack_rate", "giant_sizes"])
            for r in rows:
                w.writerow([repr(r.value), repr(r.mean_giant_size),
                            repr(r.mean_final_attack_rate), " ".join(map(str, r.giant_sizes))])
        summary = {"rows": len(rows)}
    write_manifest(outdir, "sweep", cfg, ["sweep.csv"], summary)
    return 0


def cmd_report(args) -> int:
    rows = []
    for d in args.dirs:
        path = Path(d)
        if path.is_dir():
            path = path / MANIFEST
        with open(path, encoding="utf-8") as fh:
            m = json.load(fh)
        row = {"source": str(path.parent), "command": m["command"],
               "tool_version": m["tool_version"], "master_seed": m["master_seed"],
               "input": m["config"].get("input") or "", "outputs": len(m["outputs"])}
        for k, v in m.get("summary", {}).items():
            if not isinstance(v, (dict, list)):
                row[k] = v
        rows.append(row)
    fields = []
    for r in rows:
        fields += [k for k in r if k not in fields]
    fh = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=fields, restval="", lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    finally:
        if args.out:
            fh.close()
    return 0


COMMANDS = {"synth": cmd_synth, "graph": cmd_graph, "simulate": cmd_simulate,
            "sweep": cmd_sweep, "report": cmd_report}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"wifiworm {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"wifiworm {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
