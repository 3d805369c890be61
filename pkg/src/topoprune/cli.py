"""Batch command-line interface for the scoring pipeline.

Subcommands: synth, score, plan, overlap, diagram, epi, inspect.
Exit codes: 0 success, 1 pipeline error, 2 usage error. Every scoring run
writes a config echo next to its outputs; re-running with the echoed
parameters reproduces the outputs exactly.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, scoring
from .pipeline import RunConfig, plan_from_results, score_traces
from .scoring import PruningPlan, plan_overlap
from .trace_io import SCENARIOS, SynthSpec, read_trace, synth_trace, write_trace
from .zigzag import PersistenceInterval

SCORES_FORMAT = "topoprune.scores/1"
PLAN_FORMAT = "topoprune.plan/1"


class PipelineFailure(click.ClickException):
    """Pipeline-stage error; exits with code 1."""

    exit_code = 1


def _fail(stage: str, exc: Exception) -> PipelineFailure:
    return PipelineFailure(f"{stage}: {exc}")


@click.group()
@click.version_option(__version__)
def main():
    """Topology-aware transformer layer scoring and pruning."""


@main.command()
@click.option("--scenario", type=click.Choice(SCENARIOS), required=True)
@click.option("--layers", type=int, required=True, help="Layer count L.")
@click.option("--tokens", type=int, required=True, help="Token count N.")
@click.option("--dim", type=int, required=True, help="Embedding dimension d.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--noise-scale", type=float, default=0.0, show_default=True)
@click.option("-o", "--out", "out_path", type=click.Path(dir_okay=False), required=True)
def synth(scenario, layers, tokens, dim, seed, noise_scale, out_path):
    """Generate a deterministic synthetic trace file."""
    try:
        spec = SynthSpec(seed=seed, token_count=tokens, dim=dim,
                         layer_count=layers, scenario=scenario,
                         noise_scale=noise_scale)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    try:
        trace = synth_trace(spec)
        write_trace(trace, out_path)
    except (OSError, ValueError) as exc:
        raise _fail("synth", exc)
    click.echo(out_path)


def _config_options(fn):
    opts = [
        click.option("--k", type=int, default=scoring.DEFAULT_K, show_default=True,
                     help="Neighbor count for the kNN graph."),
        click.option("--alpha", type=float, default=scoring.DEFAULT_ALPHA,
                     show_default=True, help="Distance-weight exponent."),
        click.option("--sigma-scale", type=float, default=scoring.DEFAULT_SIGMA_SCALE,
                     show_default=True, help="Kernel bandwidth as a fraction of the persistence range."),
        click.option("--grid-res", type=int, default=scoring.DEFAULT_GRID_RES,
                     show_default=True, help="Raster cells per unit layer."),
        click.option("--max-dim", "max_p", type=click.IntRange(0, 1),
                     default=scoring.DEFAULT_MAX_P, show_default=True,
                     help="Maximum homology dimension."),
        click.option("--combine", type=click.Choice(["max", "mean"]), default="max",
                     show_default=True, help="Cross-dimension score combination."),
        click.option("--no-protect", "protect", flag_value=False, default=True,
                     help="Allow pruning the first and last layers."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _build_config(k, alpha, sigma_scale, grid_res, max_p, combine, protect) -> RunConfig:
    try:
        return RunConfig(k=k, alpha=alpha, sigma_scale=sigma_scale,
                         grid_res=grid_res, max_p=max_p, combine=combine,
                         protect_endpoints=protect)
    except ValueError as exc:
        raise click.UsageError(str(exc))


def _mode_args(epsilon, sparsity):
    if (epsilon is None) == (sparsity is None):
        raise click.UsageError("choose exactly one of --epsilon or --sparsity")
    if epsilon is not None:
        return "threshold", epsilon, None
    return "sparsity", None, sparsity


@main.command()
@click.argument("traces", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@_config_options
@click.option("--epsilon", type=float, default=None,
              help="Threshold-mode pruning ratio constraint (0, 1].")
@click.option("--sparsity", type=float, default=None,
              help="Sparsity-mode target fraction [0, 1).")
@click.option("-o", "--out-dir", type=click.Path(file_okay=False), required=True)
def score(traces, k, alpha, sigma_scale, grid_res, max_p, combine, protect,
          epsilon, sparsity, out_dir):
    """Run the full pipeline on trace files and write all artifacts."""
    config = _build_config(k, alpha, sigma_scale, grid_res, max_p, combine, protect)
    mode, eps, sp = ("threshold", 0.9, None)
    if epsilon is not None or sparsity is not None:
        mode, eps, sp = _mode_args(epsilon, sparsity)

    loaded = []
    for path in traces:
        try:
            loaded.append(read_trace(path))
        except (OSError, ValueError) as exc:
            raise _fail(f"read_trace({path})", exc)
    try:
        results = score_traces(loaded, config)
    except (ValueError, RuntimeError) as exc:
        raise _fail("score", exc)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = _scores_document(traces, results, config)
    (out / "scores.json").write_text(json.dumps(doc, indent=2) + "\n")

    try:
        plan = plan_from_results(results, config, mode=mode,
                                 epsilon=eps, target_sparsity=sp)
    except ValueError as exc:
        raise _fail("plan", exc)
    (out / "plan.json").write_text(json.dumps(_plan_document(plan), indent=2) + "\n")

    for i, (path, res) in enumerate(zip(traces, results)):
        _write_diagram_csv(out / f"diagram_{i}.csv", res.intervals)
        for p, raster in res.rasters.items():
            _write_epi_csv(out / f"epi_{i}_p{p}.csv", raster)
            _write_pgm(out / f"epi_{i}_p{p}.pgm", raster.cells)

    echo = {"format": "topoprune.run_config/1"}
    echo.update(doc["params"])
    echo.update({"mode": mode, "epsilon": eps, "target_sparsity": sp,
                 "traces": list(traces), "version": __version__})
    (out / "run_config.json").write_text(json.dumps(echo, indent=2) + "\n")
    clamped = [r.k_effective for r in results if r.k_effective != config.k]
    if clamped:
        click.echo(f"note: k clamped to {clamped[0]} (N-1) for {len(clamped)} trace(s)")
    click.echo(str(out / "scores.json"))


@main.command()
@click.argument("scores_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--epsilon", type=float, default=None)
@click.option("--sparsity", type=float, default=None)
@click.option("-o", "--out", "out_path", type=click.Path(dir_okay=False), default=None)
def plan(scores_path, epsilon, sparsity, out_path):
    """Re-threshold an existing scores document without recomputing topology."""
    mode, eps, sp = _mode_args(epsilon, sparsity)
    try:
        doc = json.loads(Path(scores_path).read_text())
        if doc.get("format") != SCORES_FORMAT:
            raise ValueError(f"not a scores document (format={doc.get('format')!r})")
        s_bar = {int(p): np.asarray(v, dtype=np.float64)
                 for p, v in doc["aggregate"]["s_bar"].items()}
        params = doc["params"]
        new_plan = scoring.prune_plan(
            s_bar, mode=mode, epsilon=eps, target_sparsity=sp,
            protect_endpoints=params.get("protect_endpoints", True),
            combine=params.get("combine", "max"), params=params)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise _fail("plan", exc)
    payload = json.dumps(_plan_document(new_plan), indent=2) + "\n"
    if out_path:
        Path(out_path).write_text(payload)
        click.echo(out_path)
    else:
        click.echo(payload, nl=False)


@main.command()
@click.argument("plan_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("plan_b", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["jaccard", "reference"]),
              default="jaccard", show_default=True)
def overlap(plan_a, plan_b, mode):
    """Agreement fraction between two pruning-plan documents."""
    try:
        a = _load_plan(plan_a)
        b = _load_plan(plan_b)
        value = plan_overlap(a, b, mode=mode)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise _fail("overlap", exc)
    click.echo(f"{value:.4f}")


@main.command()
@click.argument("trace_path", type=click.Path(exists=True, dir_okay=False))
@_config_options
@click.option("-o", "--out", "out_path", type=click.Path(dir_okay=False), required=True)
def diagram(trace_path, k, alpha, sigma_scale, grid_res, max_p, combine, protect, out_path):
    """Persistence diagram of one trace as CSV (p, birth_space, death_space)."""
    config = _build_config(k, alpha, sigma_scale, grid_res, max_p, combine, protect)
    try:
        trace = read_trace(trace_path)
        result = score_traces([trace], config)[0]
    except (OSError, ValueError, RuntimeError) as exc:
        raise _fail("diagram", exc)
    _write_diagram_csv(Path(out_path), result.intervals)
    click.echo(out_path)


@main.command()
@click.argument("trace_path", type=click.Path(exists=True, dir_okay=False))
@_config_options
@click.option("-o", "--out-dir", type=click.Path(file_okay=False), required=True)
def epi(trace_path, k, alpha, sigma_scale, grid_res, max_p, combine, protect, out_dir):
    """Persistence-image rasters of one trace as CSV grids and PGM images."""
    config = _build_config(k, alpha, sigma_scale, grid_res, max_p, combine, protect)
    try:
        trace = read_trace(trace_path)
        result = score_traces([trace], config)[0]
    except (OSError, ValueError, RuntimeError) as exc:
        raise _fail("epi", exc)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for p, raster in result.rasters.items():
        _write_epi_csv(out / f"epi_p{p}.csv", raster)
        _write_pgm(out / f"epi_p{p}.pgm", raster.cells)
    click.echo(str(out))


@main.command()
@click.argument("trace_path", type=click.Path(exists=True, dir_okay=False))
def inspect(trace_path):
    """Human-readable summary of a trace file's header, stats, and manifest."""
    try:
        trace = read_trace(trace_path)
    except (OSError, ValueError) as exc:
        raise _fail("inspect", exc)
    click.echo(f"layers:  {trace.layer_count}")
    click.echo(f"tokens:  {trace.token_count}")
    click.echo(f"dim:     {trace.dim}")
    for ell in range(1, trace.layer_count + 1):
        pts = trace.layer(ell)
        click.echo(f"layer {ell:3d}: min={pts.min():+.4f} max={pts.max():+.4f} "
                   f"mean={pts.mean():+.4f} std={pts.std():.4f}")
    if trace.manifest:
        click.echo("manifest:")
        for key in sorted(trace.manifest):
            click.echo(f"  {key}: {trace.manifest[key]}")
    else:
        click.echo("manifest: (none)")


# ---------------------------------------------------------------------------
# document serialization

def _scores_document(paths, results, config: RunConfig) -> dict:
    per_sample = []
    for path, res in zip(paths, results):
        s = res.scores
        per_sample.append({
            "trace": str(path),
            "k_effective": res.k_effective,
            "activity": s.activity.tolist(),
            "activity_z": s.z,
            "activity_uniform_fallback": s.activity_fallback,
            "consistency": {
                str(p): {
                    "matrix": s.s_matrix[p].tolist(),
                    "defined_rows": s.s_defined[p].tolist(),
                    "aggregated": s.s_bar[p].tolist(),
                }
                for p in sorted(s.s_bar)
            },
            "combined": s.combined(config.combine).tolist(),
            "timings": res.timings,
        })
    dims = sorted(results[0].scores.s_bar)
    agg_sbar = {str(p): np.mean([r.scores.s_bar[p] for r in results], axis=0).tolist()
                for p in dims}
    agg_act = np.mean([r.scores.activity for r in results], axis=0).tolist()
    combined = np.max(np.stack([np.asarray(agg_sbar[str(p)]) for p in dims]), axis=0) \
        if config.combine == "max" else \
        np.mean(np.stack([np.asarray(agg_sbar[str(p)]) for p in dims]), axis=0)
    return {
        "format": SCORES_FORMAT,
        "layer_count": results[0].scores.layer_count,
        "samples": len(results),
        "params": config.as_dict(),
        "per_sample": per_sample,
        "aggregate": {
            "activity": agg_act,
            "s_bar": agg_sbar,
            "combined": combined.tolist(),
        },
    }


def _plan_document(plan: PruningPlan) -> dict:
    return {
        "format": PLAN_FORMAT,
        "layer_count": plan.layer_count,
        "mode": plan.mode,
        "epsilon": plan.epsilon,
        "target_sparsity": plan.target_sparsity,
        "pruned_layers": list(plan.pruned),
        "sparsity": plan.sparsity,
        "protected_layers": list(plan.protected),
        "combined_scores": plan.combined_scores.tolist(),
        "s_bar_max": plan.s_bar_max,
        # raw per-layer dominant reading of the threshold rule, for debugging
        # the global-max interpretation actually applied
        "debug_per_layer_dominant": plan.per_layer_dominant.tolist(),
        "params": plan.params,
    }


def _load_plan(path) -> PruningPlan:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != PLAN_FORMAT:
        raise ValueError(f"not a plan document (format={doc.get('format')!r})")
    return PruningPlan(
        layer_count=int(doc["layer_count"]),
        pruned=tuple(doc["pruned_layers"]),
        mode=doc["mode"],
        epsilon=doc.get("epsilon"),
        target_sparsity=doc.get("target_sparsity"),
        combined_scores=np.asarray(doc["combined_scores"], dtype=np.float64),
        s_bar_max=float(doc["s_bar_max"]),
        protected=tuple(doc.get("protected_layers", ())),
        params=doc.get("params", {}),
    )


def _write_diagram_csv(path, intervals: dict[int, list[PersistenceInterval]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p", "birth_space", "death_space"])
        for p in sorted(intervals):
            for iv in intervals[p]:
                writer.writerow([p, iv.birth, iv.death])


def _write_epi_csv(path, raster) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["# u-axis: layer coordinate, rows"])
        writer.writerow(["# v-axis: persistence coordinate, columns"])
        writer.writerow([f"# sigma={raster.sigma!r} resolution={raster.resolution}"])
        writer.writerow(["u\\v"] + [f"{v:.5f}" for v in raster.v_centers])
        for i, u in enumerate(raster.u_centers):
            writer.writerow([f"{u:.5f}"] + [repr(float(x)) for x in raster.cells[i]])


def _write_pgm(path, cells: np.ndarray) -> None:
    """Portable graymap (P2), u along rows, brightest cell = 255."""
    peak = float(cells.max())
    scaled = (cells / peak * 255.0).astype(np.uint16) if peak > 0 else \
        np.zeros_like(cells, dtype=np.uint16)
    with open(path, "w") as fh:
        fh.write(f"P2\n{cells.shape[1]} {cells.shape[0]}\n255\n")
        for row in scaled:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


if __name__ == "__main__":
    main()
