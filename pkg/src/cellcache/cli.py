"""Command-line front end: simulate | analyze | greedy | validate."""

from __future__ import annotations

import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import click
import numpy as np

from . import analysis, config as cfg
from .gain import make_gain_model
from .placement import greedy_allocation
from .simulate import ExperimentConfig, run_experiment
from .traffic import Workload, noisy_popularity

CSV_HEADER = ["run_id", "policy", "q", "requests_processed", "hit_rate",
              "mean_delay_s", "cosine_dist_to_greedy"]


def _fail(exc: cfg.ConfigError):
    click.echo(f"error: {exc}", err=True)
    sys.exit(2)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


@click.group()
def main():
    """Edge-cache network simulator and analysis toolkit."""


# ---------------------------------------------------------------------------
# simulate


def _prepare_allocations(doc, topology, catalog, source, channel, gains_needed):
    """Greedy allocations per gain model: cosine references use true
    popularity, warm starts optionally use noise-perturbed estimates."""
    from .config import build_workload

    workload = build_workload(doc, topology, catalog, source)
    refs, inits = {}, {}
    for gain_name in gains_needed:
        model = make_gain_model(gain_name, channel)
        if doc["greedy_reference"]:
            alloc = greedy_allocation(model, workload, doc["capacity"])
            refs[gain_name] = alloc.occupancy_vector()
        if doc["initial_allocation"] == "greedy":
            sigma2 = float(doc["popularity_noise_var"])
            if sigma2 > 0:
                est = noisy_popularity(catalog.popularity, sigma2, int(doc["noise_seed"]))
                noisy = Workload(workload.n_stations, workload.masks, workload.weights,
                                 catalog.total_rate * est)
                alloc = greedy_allocation(model, noisy, doc["capacity"])
            elif gain_name not in refs:
                alloc = greedy_allocation(model, workload, doc["capacity"])
            inits[gain_name] = alloc.per_station_contents()
    return refs, inits


def _run_cell(args):
    doc, cell, init_alloc, ref_occ = args
    topology = cfg.build_topology(doc)
    catalog = cfg.build_catalog(doc)
    source = cfg.build_source(doc, topology)
    channel = cfg.build_channel(doc)
    spec = cfg.build_policy_spec(cell.policy_entry, topology.n_stations, cell.q)
    exp = ExperimentConfig(
        topology=topology, catalog=catalog, source=source, policy=spec,
        capacity=int(doc["capacity"]), seed=cell.seed,
        warmup_requests=int(doc["warmup_requests"]),
        measure_requests=int(doc["measure_requests"]),
        channel=channel, initial_allocation=init_alloc,
        snapshot_every=int(doc["snapshot_every"]),
        reference_occupancy=None if ref_occ is None else np.asarray(ref_occ),
        backend=doc["backend"],
    )
    report = run_experiment(exp)
    rows = [[cell.run_id, spec.kind, _fmt(spec.q), s.requests_processed,
             _fmt(s.hit_rate), _fmt(s.mean_delay), _fmt(s.cosine_to_reference)]
            for s in report.snapshots]
    rows.append([cell.run_id, spec.kind, _fmt(spec.q), report.requests,
                 _fmt(report.hit_rate), _fmt(report.mean_delay),
                 _fmt(report.cosine_to_reference)])
    final = {"run_id": cell.run_id, "policy": spec.kind, "gain": spec.gain,
             "q": spec.q, "seed": cell.seed, "hit_rate": report.hit_rate,
             "mean_delay_s": report.mean_delay,
             "cosine_dist_to_greedy": report.cosine_to_reference}
    return cell.run_id, rows, final


@main.command()
@click.option("--config", "config_path", required=True, type=str)
@click.option("--out", default=None, type=str, help="output directory")
@click.option("--seed", default=None, type=int, help="override the seed list")
@click.option("--jobs", default=1, type=int, help="parallel worker processes")
@click.option("--snapshot-every", default=None, type=int)
def simulate(config_path, out, seed, jobs, snapshot_every):
    """Run the policy/q/seed grid and write one CSV per run."""
    try:
        doc = cfg.load_config(config_path)
        if seed is not None:
            doc["seeds"] = [seed]
        if snapshot_every is not None:
            doc["snapshot_every"] = snapshot_every
        topology = cfg.build_topology(doc)
        catalog = cfg.build_catalog(doc)
        source = cfg.build_source(doc, topology)
        channel = cfg.build_channel(doc)
        manifest = cfg.build_manifest(doc, topology.n_stations)
    except cfg.ConfigError as exc:
        _fail(exc)

    out_dir = out or os.environ.get("CELLCACHE_OUT", "runs")
    os.makedirs(out_dir, exist_ok=True)
    gains = {cell.policy_entry.get("gain", "hit_rate") for cell in manifest}
    refs, inits = _prepare_allocations(doc, topology, catalog, source, channel, sorted(gains))

    tasks = []
    for cell in manifest:
        gain_name = cell.policy_entry.get("gain", "hit_rate")
        tasks.append((doc, cell, inits.get(gain_name), refs.get(gain_name)))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, tasks))
    else:
        results = [_run_cell(t) for t in tasks]

    finals = []
    for run_id, rows, final in results:
        path = os.path.join(out_dir, f"{run_id}.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            writer.writerows(rows)
        finals.append(final)

    with open(os.path.join(out_dir, "resolved_config.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")

    click.echo(f"{'run_id':40s} {'hit_rate':>10s} {'mean_delay_s':>14s} {'cos_dist':>10s}")
    for final in finals:
        click.echo(f"{final['run_id']:40s} {final['hit_rate']:>10.5f} "
                   f"{final['mean_delay_s']:>14.6g} {final['cosine_dist_to_greedy']:>10.4g}")
    click.echo(f"wrote {len(finals)} run file(s) to {out_dir}")


# ---------------------------------------------------------------------------
# analyze


@main.command()
@click.option("--config", "config_path", required=True, type=str)
@click.option("--out", default=None, type=str)
def analyze(config_path, out):
    """Per-content placement-chain report over a q grid."""
    try:
        doc = cfg.load_config(config_path)
        topology = cfg.build_topology(doc)
        catalog = cfg.build_catalog(doc)
        source = cfg.build_source(doc, topology)
        channel = cfg.build_channel(doc)
        adoc = doc.get("analysis") or {}
        b_n = topology.n_stations
        cap_states = int(adoc.get("max_stations", 6))
        if b_n > cap_states:
            raise cfg.ConfigError("analysis", f"{b_n} stations exceed the cap {cap_states}")
        if catalog.n_contents > 64:
            raise cfg.ConfigError("analysis", "analysis mode needs a catalog of <= 64 contents")
        workload = cfg.build_workload(doc, topology, catalog, source)
    except cfg.ConfigError as exc:
        _fail(exc)

    gain_name = adoc.get("gain", doc["gain"])
    model = make_gain_model(gain_name, channel)
    q_grid = [float(q) for q in adoc.get("q_grid", [1e-1, 1e-2, 1e-3, 1e-4])]
    gamma = adoc.get("gamma")
    gamma = np.ones(b_n) if gamma is None else np.asarray(gamma, dtype=np.float64)
    dps = int(adoc.get("precision_dps", 60))

    out_dir = out or os.environ.get("CELLCACHE_OUT", "runs")
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "analysis.csv")
    header = (["content", "state_mask", "phi", "resistance_gap", "stable"]
              + [f"pi_q{q:g}" for q in q_grid] + ["exponent_fit"])
    logq = np.log(np.asarray(q_grid))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for f in range(catalog.n_contents):
            values = analysis.phi(f, model, workload, gamma)
            graph = analysis.resistance_graph(f, model, workload, gamma)
            gaps = analysis.state_resistances(graph)
            gaps = gaps - gaps.min()
            stable = set(analysis.stable_states(f, model, workload, gamma))
            logpis = []
            for q in q_grid:
                chain = analysis.build_ea_chain(f, model, workload, q, gamma=gamma)
                logpis.append(analysis.stationary_log(chain, dps=dps))
            logpis = np.array(logpis)  # (nq, S)
            for x in range(1 << b_n):
                slope = float(np.polyfit(logq, logpis[:, x], 1)[0])
                row = [f, x, _fmt(float(values[x])), _fmt(float(gaps[x])),
                       int(x in stable)]
                row += [_fmt(float(math.exp(lp))) for lp in logpis[:, x]]
                row.append(_fmt(slope))
                writer.writerow(row)
    click.echo(f"wrote {path}")


# ---------------------------------------------------------------------------
# greedy


@main.command()
@click.option("--config", "config_path", required=True, type=str)
@click.option("--out", default=None, type=str)
def greedy(config_path, out):
    """Offline greedy placement; emits (content_id, bs_id) rows."""
    try:
        doc = cfg.load_config(config_path)
        topology = cfg.build_topology(doc)
        catalog = cfg.build_catalog(doc)
        source = cfg.build_source(doc, topology)
        channel = cfg.build_channel(doc)
        capacity = int(doc["capacity"])
        if capacity > catalog.n_contents:
            raise cfg.ConfigError("capacity", "capacity exceeds the catalog size")
        workload = cfg.build_workload(doc, topology, catalog, source)
    except cfg.ConfigError as exc:
        _fail(exc)

    model = make_gain_model(doc["gain"], channel)
    alloc = greedy_allocation(model, workload, capacity)
    out_dir = out or os.environ.get("CELLCACHE_OUT", "runs")
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "greedy_allocation.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["content_id", "bs_id"])
        for b in range(topology.n_stations):
            for f in alloc.contents_at(b):
                writer.writerow([f, b])
    click.echo(f"wrote {path}")


# ---------------------------------------------------------------------------
# validate


@main.command()
@click.option("--config", "config_path", default=None, type=str)
def validate(config_path):
    """Fast self-checks of the core invariants."""
    from .validate import run_validation

    doc = None
    if config_path is not None:
        try:
            doc = cfg.load_config(config_path)
        except cfg.ConfigError as exc:
            _fail(exc)
    failures = run_validation(doc, echo=click.echo)
    if failures:
        click.echo(f"{failures} check(s) FAILED", err=True)
        sys.exit(1)
    click.echo("all checks passed")


if __name__ == "__main__":
    main()
