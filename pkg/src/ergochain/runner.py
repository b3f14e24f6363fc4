"""Execute a parsed scenario and assemble its report.

The report body depends only on the scenario and the seed; wall-clock
timings and the worker count go to a separate ``run_meta.json``.
"""

from __future__ import annotations

import json
import math
import os
import time
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import approximation as ap
from . import flow, properties, simulator
from .errors import AnalysisError, ErgoChainError, FlowMismatchWarning, NoClosedForm, ParseError
from .models import IdentityPrefix, identity_chain
from .scenario import SCHEMA_VERSION, Scenario, load_scenario, parse_scenario, scenario_echo

OUT_ENV = "ERGOCHAIN_OUT"
DEFAULT_OUT = "ergochain-runs"


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, DEFAULT_OUT))


# ------------------------------------------------------------------ bundle


def bundled_names() -> list[str]:
    files = resources.files("ergochain").joinpath("scenarios")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".yaml"))


def bundled_text(name: str) -> str:
    path = resources.files("ergochain").joinpath("scenarios", f"{name}.yaml")
    if not path.is_file():
        raise ParseError(f"no bundled scenario named '{name}'")
    return path.read_text(encoding="utf-8")


def resolve_scenario(ref) -> Scenario:
    """A path to a scenario file, or the name of a bundled scenario."""
    path = Path(ref)
    if path.suffix in (".yaml", ".yml") or path.exists():
        return load_scenario(path)
    return parse_scenario(bundled_text(str(ref)), source=f"<bundled {ref}>")


def catalog() -> list[dict]:
    out = []
    for name in bundled_names():
        sc = parse_scenario(bundled_text(name), source=f"<bundled {name}>")
        out.append({
            "name": sc.name,
            "construct": sc.construct_,
            "description": sc.description,
            "model": sc.model.kind,
            "analyses": [a.name for a in sc.analyses],
        })
    return out


# ------------------------------------------------------------------ report


def clean(obj):
    """Plain JSON values; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(body) -> str:
    return json.dumps(clean(body), indent=2, ensure_ascii=False) + "\n"


@dataclass
class RunReport:
    body: dict
    meta: dict
    files: dict = field(default_factory=dict)
    # raw result objects by analysis index, for programmatic use
    details: dict = field(default_factory=dict, repr=False)

    @property
    def mismatch(self) -> bool:
        return any(r.get("result", {}).get("match") is False for r in self.body["results"])

    def text(self) -> str:
        return dumps(self.body)


# ---------------------------------------------------------------- analyses


def _flow_graph(model, p, seed, ctx):
    acc = flow.accumulate_flows(model, p.horizon, p.mode, seed)
    descriptor = model.descriptor() if p.use_descriptor else None
    graph = flow.classify_edges(acc, descriptor, p.threshold)
    pattern = flow.connected_components(graph)
    out = {
        "mode": p.mode,
        "horizon": p.horizon,
        "threshold": p.threshold,
        "seed": seed if p.mode == flow.SAMPLED else None,
        "graph": graph.to_json(),
        "pattern": pattern.to_json(),
        "pair_sums": acc.to_json()["pair_sums"],
    }
    ctx["steps"] += p.horizon
    if p.cross_check:
        other = flow.EXPECTED if p.mode == flow.SAMPLED else flow.SAMPLED
        try:
            alt_acc = flow.accumulate_flows(model, p.horizon, other, seed)
        except NoClosedForm:
            out["cross_check"] = {"mode": other, "available": False}
        else:
            ctx["steps"] += p.horizon
            alt = flow.connected_components(flow.classify_edges(alt_acc, descriptor, p.threshold))
            out["cross_check"] = {"mode": other, "available": True, "pattern": alt.to_json(), "agrees": alt == pattern}
            if alt != pattern:
                warnings.warn(f"{p.mode} flow pattern {pattern} differs from {other} pattern {alt}",
                              FlowMismatchWarning, stacklevel=2)
    ctx["predicted"] = pattern
    return out


def _properties(model, p, seed, ctx):
    steps = range(p.steps)
    out = {"steps": p.steps, "estimator": p.estimator}
    try:
        ss = properties.find_common_steady_state(model, steps)
        out["steady_state"] = ss.to_json()
        out["doubly_stochastic_in_expectation"] = properties.is_doubly_stochastic_in_expectation(model, steps)
    except NoClosedForm as exc:
        out["steady_state"] = {"available": False, "reason": str(exc)}
    kw = {"samples": p.samples, "seed": seed} if p.estimator == properties.MONTE_CARLO else {}
    try:
        wf = properties.weak_feedback_coefficient(model, steps, p.estimator, **kw)
        sf = properties.feedback_coefficient(model, steps, p.estimator, **kw)
    except NoClosedForm as exc:
        out["weak_feedback"] = out["feedback"] = {"available": False, "reason": str(exc)}
    else:
        out["weak_feedback"] = wf.to_json()
        out["feedback"] = sf.to_json()
        out["gamma_weak"] = wf.gamma
        out["gamma_strong"] = sf.gamma
    return out


def _m2(model, p, seed, ctx):
    if p.x0 == "basis":
        X0 = np.eye(model.m)
        labels = [f"e_{i + 1}" for i in range(model.m)]
    else:
        X0 = np.asarray(p.x0, dtype=float)[:, None]
        labels = ["x0"]
    runs = []
    ctx["details"][ctx["index"]] = raw = []
    for t0 in p.t0:
        reps = properties.m2_diagnostics(model, X0, t0, p.horizon, p.trials, seed, workers=ctx["workers"])
        ctx["steps"] += (p.horizon - t0) * p.trials
        raw.extend(reps)
        for lab, rep in zip(labels, reps):
            runs.append({"x0": lab, **rep.to_json()})
    verdicts = [r["verdict"] for r in runs]
    if all(v == properties.BOUNDED for v in verdicts):
        overall = properties.BOUNDED
    elif any(v == properties.GROWING for v in verdicts):
        overall = properties.GROWING
    else:
        overall = properties.UNKNOWN
    return {"verdict": overall, "runs": runs}


def _simulate(model, p, seed, ctx):
    cps = simulator.log_checkpoints(p.t0, p.horizon, p.checkpoints)
    rep = simulator.run_trajectory(model, p.x0, p.t0, p.horizon, seed, p.trial, cps)
    ctx["details"][ctx["index"]] = rep
    ctx["steps"] += p.horizon - p.t0
    out = rep.to_json()
    if p.csv:
        name = f"trajectory_{ctx['index'] + 1}.csv"
        ctx["files"][name] = rep.to_csv()
        out["csv"] = name
    return out


def _verify(model, p, seed, ctx):
    cfg = simulator.VerificationConfig(
        trials=p.trials, horizon=p.horizon, t0_set=tuple(p.t0), epsilon=p.epsilon, agreement=p.agreement,
        window=p.window, seed=seed, flow_mode=p.flow_mode, flow_horizon=p.flow_horizon, threshold=p.threshold,
        hypothesis_steps=p.hypothesis_steps, workers=ctx["workers"],
    )
    rep = simulator.verify_prediction(model, cfg)
    ctx["details"][ctx["index"]] = rep
    ctx["steps"] += sum(p.horizon - t0 for t0 in p.t0) * p.trials
    ctx["predicted"] = rep.predicted
    out = rep.to_json()
    out["runs"] = rep.detail.runs
    return out


def _approx_compare(model, p, seed, ctx):
    a = p.against
    if a.diagonal is not None:
        if a.diagonal == "predicted":
            pattern = ctx.get("predicted") or flow.predict_ergodicity_pattern(
                model, p.mode, p.horizon, p.threshold, seed=seed, cross_check=False)
        else:
            pattern = flow.ErgodicityPattern(model.m, tuple(tuple(i - 1 for i in b) for b in a.diagonal))
        other = ap.DiagonalApproximation(model, pattern)
        label = {"diagonal": pattern.to_json(), "block_order": [i + 1 for i in ap.block_permutation(pattern)]}
    elif a.identity_prefix is not None:
        other = IdentityPrefix(model, a.identity_prefix)
        label = {"identity_prefix": a.identity_prefix}
    else:
        other = identity_chain(model.m)
        label = {"identity": True}
    dist = ap.l1_chain_distance(model, other, p.horizon, p.mode, seed, p.threshold)
    ctx["steps"] += p.horizon
    out = {"against": label, "l1": dist.to_json()}
    ctx["details"][ctx["index"]] = {"distance": dist}
    if p.lp is not None:
        series = ap.lp_entry_series(model, other, p.horizon, p.lp)
        out["lp"] = {"p": p.lp, "horizon": p.horizon, "per_entry": series.tolist(), "max_entry": float(series.max())}
    if p.empirical is not None:
        e = p.empirical
        args = (e.trials, e.horizon, tuple(e.t0), e.epsilon, seed, e.agreement, e.window, ctx["workers"])
        left = simulator.empirical_pattern(model, *args)
        right = simulator.empirical_pattern(other, *args)
        ctx["steps"] += 2 * sum(e.horizon - t0 for t0 in e.t0) * e.trials
        ctx["details"][ctx["index"]].update(model=left, approximation=right)
        out["empirical"] = {
            "model": left.to_json(),
            "approximation": right.to_json(),
            "same_pattern": left.pattern == right.pattern,
        }
    return out


HANDLERS = {
    "flow_graph": _flow_graph,
    "properties": _properties,
    "m2": _m2,
    "simulate": _simulate,
    "verify": _verify,
    "approx_compare": _approx_compare,
}


# ------------------------------------------------------------------- run


def run_scenario(scenario: Scenario, seed: int | None = None, workers: int = 1) -> RunReport:
    """Run every analysis of ``scenario`` in order (nothing is written)."""
    seed = scenario.seed if seed is None else int(seed)
    model = scenario.build_model()
    ctx = {"workers": int(workers), "files": {}, "steps": 0, "details": {}}
    results, timings, all_warnings = [], [], []
    started = time.time()
    for index, item in enumerate(scenario.analyses):
        ctx["index"] = index
        before = ctx["steps"]
        t = time.perf_counter()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                result = HANDLERS[item.name](model, item.params, seed, ctx)
            except ErgoChainError as exc:
                raise AnalysisError(f"analyses.{index}.{item.name}", exc) from exc
        msgs = []
        for w in caught:
            entry = {"category": w.category.__name__, "message": str(w.message)}
            if entry not in msgs:
                msgs.append(entry)
        all_warnings.extend(e for e in msgs if e not in all_warnings)
        results.append({
            "analysis": item.name,
            "params": item.params.model_dump(mode="json"),
            "steps": ctx["steps"] - before,
            "warnings": msgs,
            "result": result,
        })
        timings.append({"analysis": item.name, "seconds": time.perf_counter() - t})
    body = {
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario_echo(scenario),
        "seed": seed,
        "model": model.describe(),
        "results": results,
        "warnings": all_warnings,
        "total_steps": ctx["steps"],
    }
    meta = {
        "scenario": scenario.name,
        "seed": seed,
        "workers": workers,
        "started_unix": started,
        "wall_clock_seconds": time.time() - started,
        "analyses": timings,
    }
    return RunReport(clean(body), clean(meta), ctx["files"], ctx["details"])


def write_report(report: RunReport, out_dir) -> Path:
    """Write ``report.json``, ``run_meta.json`` and any trajectory CSV files
    to ``out_dir/<scenario name>/``."""
    target = Path(out_dir) / report.meta["scenario"]
    target.mkdir(parents=True, exist_ok=True)
    (target / "report.json").write_text(report.text(), encoding="utf-8", newline="\n")
    (target / "run_meta.json").write_text(dumps(report.meta), encoding="utf-8", newline="\n")
    for name, text in report.files.items():
        (target / name).write_text(text, encoding="utf-8", newline="\n")
    return target
