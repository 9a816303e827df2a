"""Experiment orchestration: config validation, seeded replications, regret, traces, diagnostics."""

from __future__ import annotations

import copy
import csv
import json
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .bandits import Exp3IXLearner, Exp3Learner, ExpInfLearner
from .core import ActionSpace, BaseLearner, ContextPoint, SeededRng, lex_argmax
from .processes import (Partition, distinct_cell_curve, dedup_times, empirical_submeasure,
                        geometric_grid, infrequent_mass, make_process, max_multiplicity,
                        read_trace)
from .rewards import RewardMechanism, make_mechanism
from .universal import UniversalFiniteRule
from .variants import ContinuousRule, CountableActionRule, UcNetRule, UnboundedRule

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "UNIVBANDIT_OUTPUT_DIR"
TRACE_COLUMNS = ("t", "context_id", "category", "period", "purpose", "regime", "strategy",
                 "action_id", "reward", "cum_pseudo_regret")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


_PARTITION = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": list(Partition.KINDS)},
        "n": {"type": "integer", "minimum": 1},
        "table": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 0}},
        "default": {"type": "integer", "minimum": 0},
    },
}

_PROB_VECTOR = {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1}

_PROCESS_SCHEMAS = {
    "iid_finite": {"weights": _PROB_VECTOR, "n": {"type": "integer", "minimum": 1}},
    "iid_fresh": {"dim": {"type": "integer", "minimum": 1}},
    "markov_chain": {"transition": {"type": "array", "items": _PROB_VECTOR, "minItems": 1},
                     "initial": _PROB_VECTOR},
    "finite_support": {"support": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                       "law": {"enum": ["iid", "cycle"]}, "weights": _PROB_VECTOR},
    "deterministic_walk": {},
}

_INT_LIST = {"type": "array", "items": {"type": "integer", "minimum": 0}}
_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 1}

_REWARD_SCHEMAS = {
    "bernoulli_table": {"means": {"type": "array", "minItems": 1,
                                  "items": {"type": "array", "minItems": 1,
                                            "items": {"type": "number", "minimum": 0, "maximum": 1}}}},
    "needle": {"n_actions": {"type": ["integer", "null"], "minimum": 1}, "targets": _INT_LIST,
               "choices": _INT_LIST, "seed": {"type": "integer"}},
    "tent_continuous": {"needle_sets": {"type": "array", "items": _INT_LIST, "minItems": 1},
                        "targets": _INT_LIST, "seed": {"type": "integer"}},
    "zero_mean_unbounded": {"magnitudes": {"type": "array", "items": {"type": "number", "minimum": 0}},
                            "times": {"type": "array", "items": {"type": "number", "minimum": 0}},
                            "anchors": {"type": "array", "items": {"type": "integer", "minimum": 0},
                                        "minItems": 2, "maxItems": 2}},
    "lipschitz_uc": {"peaks": {"type": "array", "items": _POINT, "minItems": 1},
                     "slope": {"type": "number", "exclusiveMinimum": 0}},
}

_RULE_PARAMS = {
    "oracle": set(),
    "exp3": set(),
    "exp3ix": set(),
    "expinf": set(),
    "universal_finite": {"policy_partition", "n_policy_contexts"},
    "countable_rule": {"policy_partition", "n_policy_contexts"},
    "continuous_rule": {"policy_partition", "n_policy_contexts"},
    "uc_net_rule": {"policy_partition", "n_policy_contexts", "net_delta"},
    "unbounded_rule": {"scale", "adaptive"},
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "horizon"],
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "horizon": {"type": "integer", "minimum": 1},
        "replications": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "grid": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "regret": {"enum": ["pseudo", "realized"]},
        "workers": {"type": "integer", "minimum": 1},
        "trace_file": {"type": "string"},
        "process": {"type": "object", "required": ["kind"],
                    "properties": {"kind": {"enum": sorted(_PROCESS_SCHEMAS)}}},
        "actions": {
            "type": "object", "additionalProperties": False, "required": ["kind"],
            "properties": {
                "kind": {"enum": ["finite", "countable", "metric"]},
                "n": {"type": "integer", "minimum": 2},
                "prefix": {"type": "integer", "minimum": 1},
                "points": {"type": "array", "items": {"anyOf": [{"type": "number"}, _POINT]},
                           "minItems": 1},
            },
        },
        "rewards": {"type": "object", "required": ["kind"],
                    "properties": {"kind": {"enum": sorted(_REWARD_SCHEMAS)}}},
        "rule": {
            "type": "object", "additionalProperties": False, "required": ["name"],
            "properties": {
                "name": {"enum": sorted(_RULE_PARAMS)},
                "policy_partition": _PARTITION,
                "n_policy_contexts": {"type": "integer", "minimum": 1},
                "net_delta": {"anyOf": [{"type": "number", "exclusiveMinimum": 0},
                                        {"type": "array", "minItems": 1,
                                         "items": {"type": "number", "exclusiveMinimum": 0}}]},
                "scale": {"type": "number", "exclusiveMinimum": 0},
                "adaptive": {"type": "boolean"},
            },
        },
        "output": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "summary": {"type": "string"},
                "trace": {"type": "boolean"},
                "trace_replications": {"type": "integer", "minimum": 1},
            },
        },
        "diagnostics": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "partition": _PARTITION,
                "thresholds": {"anyOf": [{"type": "integer", "minimum": 0},
                                         {"type": "object",
                                          "additionalProperties": {"type": "integer", "minimum": 0}}]},
                "grid": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "indicator_ids": {"type": "array", "items": {"type": "integer"}},
                "window": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            },
        },
    },
}


def _sub_schema(kind_props: dict, extra: Optional[dict] = None) -> dict:
    props = {"kind": {"type": "string"}, **kind_props, **(extra or {})}
    return {"type": "object", "additionalProperties": False, "properties": props}


def _validate(instance, schema, where: str) -> None:
    try:
        jsonschema.validate(instance, schema)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path)
        loc = f"{where}.{path}" if path else where
        raise ConfigError(f"{loc}: {exc.message}") from None


def validate_config(config: dict) -> dict:
    """Schema-check a config (unknown keys are errors) and apply defaults."""
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    _validate(config, CONFIG_SCHEMA, "config")
    if "process" in config:
        kind = config["process"]["kind"]
        _validate(config["process"], _sub_schema(_PROCESS_SCHEMAS[kind]), "process")
    if "rewards" in config:
        kind = config["rewards"]["kind"]
        _validate(config["rewards"], _sub_schema(_REWARD_SCHEMAS[kind], {"partition": _PARTITION}),
                  "rewards")
    if "rule" in config:
        name = config["rule"]["name"]
        extra = set(config["rule"]) - {"name"} - _RULE_PARAMS[name]
        if extra:
            raise ConfigError(f"rule: {sorted(extra)} not accepted by rule {name!r}")
    cfg = copy.deepcopy(config)
    cfg.setdefault("replications", 1)
    cfg.setdefault("seed", 0)
    cfg.setdefault("regret", "pseudo")
    cfg.setdefault("workers", 1)
    cfg.setdefault("output", {})
    horizon = cfg["horizon"]
    grid = cfg.get("grid")
    if grid is None:
        cfg["grid"] = geometric_grid(horizon)
    else:
        if any(g > horizon for g in grid):
            raise ConfigError("grid points must lie in [1, horizon]")
        cfg["grid"] = sorted(set(grid))
    if "process" in cfg and "trace_file" in cfg:
        raise ConfigError("give either process or trace_file, not both")
    return cfg


def load_config(path, apply_defaults: bool = True) -> dict:
    """Read and validate a JSON config; ``apply_defaults=False`` returns it as written."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    cfg = validate_config(raw)
    return cfg if apply_defaults else raw


def output_dir(config: dict) -> Path:
    env = os.environ.get(OUTPUT_DIR_ENV)
    return Path(env if env else config.get("output", {}).get("dir", "out"))


# -- construction -------------------------------------------------------------------

def build_actions(spec: dict) -> ActionSpace:
    kind = spec["kind"]
    try:
        if kind == "finite":
            if "n" not in spec:
                raise ConfigError("actions.n is required for finite actions")
            return ActionSpace.finite(spec["n"])
        if kind == "countable":
            return ActionSpace.countable(spec.get("prefix", 16))
        if "points" not in spec:
            raise ConfigError("actions.points is required for metric actions")
        return ActionSpace.metric(spec["points"])
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"actions: {exc}") from None


class OracleRule(BaseLearner):
    """Plays the optimal-policy action ``argmax_a mean(a, x)`` (ties to the smallest index)."""

    name = "oracle"

    def __init__(self, mechanism: Optional[RewardMechanism] = None, actions=None, seed: int = 0):
        self.mechanism = mechanism
        self.actions = actions
        self.seed = seed

    def reset(self, seed=None):
        self.t_ = 0
        self._pending = False
        self._best: dict = {}
        return self

    def select(self, context, t=None):
        self._begin_round(t)
        cell = self.mechanism.cell_of(context)
        got = self._best.get(cell)
        if got is None:
            acts = list(self.actions.eval_actions())
            got = self._best[cell] = lex_argmax([self.mechanism.mean(a, context) for a in acts], acts)
        return got

    def feed(self, reward):
        self._end_round()


def _policy_args(rule_spec: dict) -> dict:
    part = rule_spec.get("policy_partition")
    partition = Partition.from_dict(part) if part is not None else None
    n_ctx = rule_spec.get("n_policy_contexts")
    if n_ctx is None and partition is not None:
        n_ctx = partition.n_cells
    return {"n_policy_contexts": n_ctx,
            "policy_key": partition if partition is not None and partition.kind != "identity" else None}


def _delta_fn(net_delta):
    if net_delta is None:
        return None
    if isinstance(net_delta, list):
        seq = list(net_delta)
        return _SeqDelta(seq)
    return _ConstDelta(float(net_delta))


class _ConstDelta:
    def __init__(self, value):
        self.value = value

    def __call__(self, p):
        return self.value


class _SeqDelta:
    def __init__(self, seq):
        self.seq = seq

    def __call__(self, p):
        return self.seq[min(p, len(self.seq) - 1)]


def build_rule(rule_spec: dict, actions: ActionSpace, mechanism: RewardMechanism) -> BaseLearner:
    name = rule_spec["name"]
    kind = actions.kind
    if not mechanism.bounded and name not in ("unbounded_rule", "oracle"):
        raise ConfigError(f"rule {name!r} needs rewards in [0, 1]; use unbounded_rule")
    if name == "oracle":
        return OracleRule(mechanism, actions)
    if name in ("exp3", "exp3ix"):
        if kind == "countable":
            raise ConfigError(f"{name} needs a finite action set")
        cls = Exp3Learner if name == "exp3" else Exp3IXLearner
        return cls(n_actions=actions.size)
    if name == "expinf":
        return ExpInfLearner(n_actions=actions.size)
    if name == "universal_finite":
        if kind == "countable":
            raise ConfigError("universal_finite needs a finite action set")
        return UniversalFiniteRule(n_actions=actions.size, **_policy_args(rule_spec))
    if name == "countable_rule":
        return CountableActionRule(n_actions=actions.size, **_policy_args(rule_spec))
    if name == "continuous_rule":
        if kind != "metric":
            raise ConfigError("continuous_rule needs metric candidate actions")
        return ContinuousRule(action_space=actions, **_policy_args(rule_spec))
    if name == "uc_net_rule":
        if kind != "metric":
            raise ConfigError("uc_net_rule needs metric candidate actions")
        return UcNetRule(action_space=actions, delta_fn=_delta_fn(rule_spec.get("net_delta")),
                         **_policy_args(rule_spec))
    if name == "unbounded_rule":
        adaptive = rule_spec.get("adaptive", False)
        if not adaptive and "scale" not in rule_spec:
            raise ConfigError("unbounded_rule needs a scale bound or adaptive=true")
        return UnboundedRule(n_actions=actions.size, scale=rule_spec.get("scale", 1.0),
                             adaptive=adaptive)
    raise ConfigError(f"unknown rule {name!r}")


def _load_trace(config: dict) -> list[ContextPoint]:
    path = config["trace_file"]
    try:
        trace = read_trace(path)
    except OSError as exc:
        raise ConfigError(f"cannot read trace file {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise ConfigError(f"trace file {path}: {exc}") from None
    if len(trace) < config["horizon"]:
        raise ConfigError(f"trace file has {len(trace)} rounds, horizon is {config['horizon']}")
    return trace[:config["horizon"]]


def make_trace(config: dict, rng: SeededRng) -> list[ContextPoint]:
    if "trace_file" in config:
        return _load_trace(config)
    if "process" not in config:
        raise ConfigError("config needs a process or a trace_file")
    try:
        proc = make_process(config["process"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"process: {exc}") from None
    return proc.generate(config["horizon"], rng)


# -- running --------------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


_ID_CACHE_LIMIT = 1 << 16


def run_replication(config: dict, index: int, trace_path: Optional[Path] = None) -> dict:
    """One seeded replication; returns per-grid regret and round-type counts."""
    root = SeededRng(config["seed"]).spawn("replication", index)
    actions = build_actions(config["actions"])
    try:
        mech = make_mechanism(config["rewards"], actions)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"rewards: {exc}") from None
    learner = build_rule(config["rule"], actions, mech)
    learner.reset(seed=root.spawn("learner").seed)
    trace = make_trace(config, root.spawn("process"))
    reward_rng = root.spawn("rewards")
    counter_rng = root.spawn("counterfactual")
    realized = config["regret"] == "realized"
    grid = config["grid"]
    eval_actions = list(actions.eval_actions())
    n_eval = len(eval_actions)

    universal = isinstance(learner, UniversalFiniteRule)
    cat_counts: Counter = Counter()
    cell_cache: dict = {}
    id_cache: dict = {}
    cell_of = mech.cell_of
    mean = mech.mean
    sample = mech.sample_value
    sample_known = mech.sample_given_mean
    deterministic = mech.deterministic
    select = learner.select
    feed = learner.feed

    writer = fh = None
    if trace_path is not None:
        fh = open(trace_path, "w", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)

    points = []
    gi = 0
    cum = 0.0
    try:
        for t, x in enumerate(trace, start=1):
            entry = id_cache.get(x.id)
            if entry is None:
                cell = cell_of(x)
                entry = cell_cache.get(cell)
                if entry is None:
                    means = mech.mean_vector(x, eval_actions)
                    best_a = lex_argmax(means, eval_actions)
                    entry = cell_cache[cell] = (means, best_a, means[best_a])
                if len(id_cache) < _ID_CACHE_LIMIT:
                    id_cache[x.id] = entry
            means, best_a, best = entry
            a = select(x, t)
            if a >= n_eval:
                r = sample(a, x, reward_rng)
            elif deterministic:
                r = means[a]
            else:
                r = sample_known(a, x, means[a], reward_rng)
            feed(r)
            if realized:
                cum += sample(best_a, x, counter_rng) - r
            else:
                cum += best - (means[a] if a < n_eval else mean(a, x))
            if universal:
                cat_counts[learner.last_[0]] += 1
            if writer is not None:
                info = learner.round_info()
                writer.writerow((t, x.id, _fmt(info.get("category")), _fmt(info.get("period")),
                                 _fmt(info.get("purpose")), info.get("regime", ""),
                                 _fmt(info.get("strategy")), a, _fmt(float(r)), _fmt(cum)))
            if gi < len(grid) and grid[gi] == t:
                if universal:
                    types = dict(learner.regime_counts_)
                else:
                    types = {"bandit": t}
                points.append({"T": t, "cum_regret": cum, "round_types": types})
                gi += 1
    finally:
        if fh is not None:
            fh.close()

    final: dict = {}
    if universal:
        decisions: dict = {}
        for p, _q, _a0, _b1, choice in learner.decisions_:
            d = decisions.setdefault(str(p), {"strategy0": 0, "strategy1": 0})
            d[f"strategy{choice}"] += 1
        final["per_category"] = {
            str(p): {"rounds": n, "decisions": decisions.get(str(p), {"strategy0": 0, "strategy1": 0})}
            for p, n in sorted(cat_counts.items())}
    if isinstance(learner, UcNetRule):
        final["net_sizes"] = {str(p): n for p, n in learner.net_sizes().items()}
    if isinstance(learner, UnboundedRule):
        final["instances"] = learner.n_instances
    return {"index": index, "points": points, "final": final}


def _aggregate(config: dict, reps: list[dict]) -> dict:
    grid_out = []
    n = len(reps)
    for j, T in enumerate(config["grid"]):
        vals = np.array([r["points"][j]["cum_regret"] for r in reps], dtype=float)
        std = float(vals.std(ddof=1)) if n > 1 else 0.0
        keys = sorted({k for r in reps for k in r["points"][j]["round_types"]})
        types = {k: sum(r["points"][j]["round_types"].get(k, 0) for r in reps) / n for k in keys}
        grid_out.append({
            "T": T,
            "cum_regret_mean": float(vals.mean()),
            "cum_regret_std": std,
            "per_round_regret_mean": float(vals.mean()) / T,
            "per_round_regret_std": std / T,
            "round_types_mean": types,
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "rule": config["rule"]["name"],
        "horizon": config["horizon"],
        "replications": n,
        "seed": config["seed"],
        "regret": config["regret"],
        "grid": grid_out,
        "per_replication": [
            {"index": r["index"], "cum_regret": r["points"][-1]["cum_regret"],
             "round_types": r["points"][-1]["round_types"], **r["final"]}
            for r in reps],
    }


def _rep_worker(args):
    config, index, trace_path = args
    return run_replication(config, index, trace_path)


def run(config: dict, write: bool = True) -> dict:
    """Run every replication and return (and optionally write) the JSON summary."""
    config = validate_config(config)
    for key in ("actions", "rewards", "rule"):
        if key not in config:
            raise ConfigError(f"run needs '{key}' in the config")
    if config["grid"][-1] != config["horizon"]:
        config["grid"].append(config["horizon"])
    out = output_dir(config)
    opts = config["output"]
    n_traces = opts.get("trace_replications", 1) if opts.get("trace", False) else 0
    if write:
        out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for i in range(config["replications"]):
        tp = out / f"trace_rep{i}.csv" if write and i < n_traces else None
        jobs.append((config, i, tp))
    if config["workers"] > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config["workers"]) as pool:
            reps = list(pool.map(_rep_worker, jobs))
    else:
        reps = [_rep_worker(j) for j in jobs]
    reps.sort(key=lambda r: r["index"])
    summary = _aggregate(config, reps)
    if write:
        write_json(out / opts.get("summary", "summary.json"), summary)
    return summary


def write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


# -- diagnose ----------------------------------------------------------------------------

def diagnose(config: dict, write: bool = True) -> dict:
    """Process-class statistics on a generated or imported trace."""
    config = validate_config(config)
    trace = make_trace(config, SeededRng(config["seed"]).spawn("replication", 0).spawn("process"))
    opts = config.get("diagnostics", {})
    part = Partition.from_dict(opts.get("partition"))
    T = len(trace)
    try:
        grid = opts.get("grid") or geometric_grid(T)
        top = max_multiplicity(trace)
        ms = []
        m = 1
        while True:
            ms.append(m)
            if m >= top:
                break
            m *= 2
        dedup = {str(m): len(dedup_times(trace, m)) for m in ms}
        curve = distinct_cell_curve(trace, part, grid)
        tail = [r for T_, r in curve if T_ >= T // 2]
        thresholds = opts.get("thresholds", 1)
        if isinstance(thresholds, dict):
            table = {int(k): v for k, v in thresholds.items()}
            thr = table.__getitem__
        else:
            thr = _ConstDelta(thresholds)
        report = {
            "schema_version": SCHEMA_VERSION,
            "horizon": T,
            "distinct_contexts": len({x.id for x in trace}),
            "max_multiplicity": top,
            "dedup_sizes": dedup,
            "distinct_cell_curve": [{"T": T_, "ratio": r} for T_, r in curve],
            "distinct_cell_tail_max": max(tail) if tail else None,
            "infrequent_mass": infrequent_mass(trace, part, thr),
        }
        if "indicator_ids" in opts:
            ids = set(opts["indicator_ids"])
            window = opts.get("window") or [T_ for T_ in grid if T_ >= T // 2] or [T]
            report["empirical_submeasure"] = empirical_submeasure(trace, lambda x: x.id in ids, window)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"diagnostics: {exc}") from None
    if write:
        write_json(output_dir(config) / "diagnose.json", report)
    return report


# -- sweep -------------------------------------------------------------------------------

def set_path(config: dict, path: str, value) -> dict:
    """Copy of ``config`` with the dotted ``path`` set to ``value`` (integers index lists)."""
    out = copy.deepcopy(config)
    parts = path.split(".")
    node = out
    for part in parts[:-1]:
        if isinstance(node, list):
            node = node[int(part)]
        else:
            if part not in node:
                raise ConfigError(f"sweep path {path!r}: no key {part!r}")
            node = node[part]
    last = parts[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value
    return out


def parse_values(text: str) -> list:
    vals = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            vals.append(json.loads(item))
        except json.JSONDecodeError:
            vals.append(item)
    if not vals:
        raise ConfigError("sweep needs at least one value")
    return vals


def sweep(config: dict, param: str, values: list, write: bool = True) -> dict:
    results = []
    for v in values:
        summary = run(set_path(config, param, v), write=False)
        results.append({"value": v, "grid": summary["grid"]})
    report = {"schema_version": SCHEMA_VERSION, "param": param, "points": results}
    if write:
        write_json(output_dir(validate_config(config)) / "sweep.json", report)
    return report

