"""Experiment campaigns: configuration, placement families, runners and output.

A campaign expands its configuration into an ordered task list in the parent
process, evaluates every task (inline or on a process pool) and writes the
rows in task order, so neither scheduling nor worker count can change the CSV.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
import os
import platform
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator, Sequence

import numpy as np

from . import __version__
from .adversary import (
    SCRIPT_FAMILY,
    AdversarySpec,
    InfeasiblePlacement,
    enumerate_placements,
    make_strategy,
    sample_corruption,
    scope_bound,
    scopes_for_agreement,
    scopes_for_broadcast,
    scopes_for_stack,
)
from .kernels import KernelConfig, PhaseKing, run_differential_ba_Bs, run_immediate_ba_As
from .protocols import (
    DisseminationTree,
    agreement_rounds,
    broadcast_rounds,
    check_upward_flow,
    multiscale_agreement,
    multiscale_broadcast,
    secure_communicate,
    securecomm_rounds,
)
from .reliability import broadcast_reliability, securecomm_reliability
from .topology import build_expander_stack, build_hypercube

KINDS = ("reliability-sweep", "broadcast", "agreement", "securecomm", "kernel-exhaustive")
DEFAULT_CEILING = 10**6


class ConfigError(ValueError):
    pass


class CeilingExceeded(ConfigError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    name: str = "experiment"
    topology: dict = field(default_factory=dict)
    adversary: dict = field(default_factory=dict)
    protocol: dict = field(default_factory=dict)
    reliability: dict = field(default_factory=dict)
    ceiling: int = DEFAULT_CEILING
    output: dict = field(default_factory=lambda: {"csv": "results.csv", "manifest": "manifest.json"})

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "kind" not in doc:
            raise ConfigError("config needs a 'kind'")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return asdict(self)

    def key(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @property
    def placement(self) -> dict:
        return self.adversary.get("placement", {"mode": "none"})

    @property
    def strategies(self) -> list[str]:
        return list(self.adversary.get("strategies", SCRIPT_FAMILY))

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not isinstance(self.ceiling, int) or self.ceiling < 1:
            raise ConfigError("ceiling must be a positive integer")
        for name in self.strategies:
            make_strategy(name)
        mode = self.placement.get("mode", "none")
        if mode not in ("none", "exhaustive", "sampled", "list"):
            raise ConfigError(f"unknown placement mode {mode!r}")
        if mode == "sampled":
            for key in ("count", "seed"):
                if key not in self.placement:
                    raise ConfigError(f"sampled placements need an explicit {key!r}")
        if self.kind in ("broadcast", "agreement", "kernel-exhaustive"):
            for key in ("s", "L") if self.kind != "kernel-exhaustive" else ("s",):
                if key not in self.topology:
                    raise ConfigError(f"topology needs {key!r}")
        if self.kind == "securecomm":
            for key in ("n", "s_0", "seed"):
                if key not in self.topology:
                    raise ConfigError(f"topology needs {key!r}")
        if self.kind == "reliability-sweep":
            for key in ("s", "n", "p"):
                if key not in self.reliability:
                    raise ConfigError(f"reliability sweep needs {key!r}")


# ---------------------------------------------------------------------------
# placement families


def _canonical_subsets(s: int, k: int) -> list[tuple[int, ...]]:
    return [c for size in range(k + 1) for c in itertools.combinations(range(s), size)]


def broadcast_orbits(topo, general: int, max_faults: int) -> Iterator[tuple[frozenset[int], int]]:
    """One representative per orbit of valid broadcast placements on a two-digit hypercube.

    With ``L = 2`` every non-root clique is a leaf of the dissemination tree
    and the scopes only see the root and each leaf separately, so any
    permutation of the leaf cliques maps valid placements to valid placements.
    Protocol and scripts depend on sites and tree shape only, so outcomes are
    preserved as well.  Yields ``(placement, orbit size)`` with leaves
    assigned non-decreasing subset indices.
    """
    if topo.L != 2:
        raise ConfigError("orbit reduction is available for L = 2 only")
    s = topo.s
    bound = scope_bound(s)
    root = topo.clique_of(general)
    leaves = [c for c in range(topo.num_cliques) if c != root]

    for r_size in range(min(bound, max_faults) + 1):
        for R in itertools.combinations(range(s), r_size):
            room = bound - r_size
            subsets = _canonical_subsets(s, room)
            budget = max_faults - r_size

            def rec(start: int, left: int, budget: int, chosen: list[int]):
                if left == 0:
                    yield list(chosen)
                    return
                for idx in range(start, len(subsets)):
                    size = len(subsets[idx])
                    if size > budget:
                        # subsets are ordered by size, so nothing later fits either
                        break
                    chosen.append(idx)
                    yield from rec(idx, left - 1, budget - size, chosen)
                    chosen.pop()

            for chosen in rec(0, len(leaves), budget, []):
                nodes = {root * s + x for x in R}
                for c, idx in zip(leaves, chosen):
                    nodes.update(c * s + x for x in subsets[idx])
                mult = Counter(chosen)
                weight = math.factorial(len(leaves))
                for m in mult.values():
                    weight //= math.factorial(m)
                yield frozenset(nodes), weight


def _target_range(target, lo_default: int, hi_default: int) -> tuple[int, int]:
    if target is None:
        return lo_default, hi_default
    if isinstance(target, int):
        return target, target
    lo, hi = target
    return int(lo), int(hi)


def sampled_placements(
    scopes, universe, count: int, seed: int, target, hi_default: int, sacrificed=None, exclude=()
) -> list[tuple[frozenset[int], tuple[str, ...], int]]:
    """``count`` placements; placement ``k`` uses its own generator seeded by ``(seed, k)``.

    ``target`` is an int, a ``[lo, hi]`` range drawn uniformly per placement,
    or ``None`` for ``[0, hi_default]``.  ``sacrificed`` (for expander stacks)
    is ``{"count": c, "faults": f, "layer": 0}``: ``c`` layer scopes are
    dropped and ``f`` faults forced into each.
    """
    lo, hi = _target_range(target, 0, hi_default)
    out = []
    for k in range(count):
        rng = np.random.default_rng([seed, k])
        t = int(rng.integers(lo, hi + 1))
        forced: list[int] = []
        dropped: tuple[str, ...] = ()
        if sacrificed:
            layer = int(sacrificed.get("layer", 0))
            names = [sc for sc in scopes if sc.name.startswith(f"layer{layer}:")]
            names = [sc for sc in names if not (sc.nodes & set(exclude))]
            picks = rng.choice(len(names), size=int(sacrificed["count"]), replace=False)
            for i in sorted(picks):
                sc = names[i]
                dropped += (sc.name,)
                members = sorted(sc.nodes)
                forced += [members[j] for j in rng.choice(len(members), size=int(sacrificed["faults"]), replace=False)]
        pl = sample_corruption(
            scopes, t, seed=int(rng.integers(2**63)), universe=universe, sacrificed=dropped, forced=forced
        )
        out.append((pl.nodes, dropped, t))
    return out


# ---------------------------------------------------------------------------
# task evaluation (runs in workers)

_CONTEXT: dict[str, Any] = {}


def _context(cfg_key: str) -> dict:
    ctx = _CONTEXT.get(cfg_key)
    if ctx is None:
        cfg = ExperimentConfig.from_dict(json.loads(cfg_key))
        ctx = {"cfg": cfg}
        if cfg.kind in ("broadcast", "agreement"):
            ctx["topo"] = build_hypercube(int(cfg.topology["s"]), int(cfg.topology["L"]))
        elif cfg.kind == "securecomm":
            ctx["stack"] = _build_stack(cfg.topology)
        _CONTEXT.clear()
        _CONTEXT[cfg_key] = ctx
    return ctx


def _build_stack(doc: dict):
    thetas = doc.get("theta")
    n, s0 = int(doc["n"]), int(doc["s_0"])
    if thetas is None:
        thetas = [0.5] * max(0, round(math.log2(n // s0)))
    return build_expander_stack(n, s0, thetas, doc.get("d"), int(doc["seed"]))


def _nodes_field(nodes) -> str:
    return " ".join(str(v) for v in sorted(nodes))


def _eval_task(args) -> list[dict]:
    cfg_key, task = args
    ctx = _context(cfg_key)
    kind = ctx["cfg"].kind
    return _RUNNERS[kind](ctx, task)


def _run_broadcast(ctx, task) -> list[dict]:
    cfg, topo = ctx["cfg"], ctx["topo"]
    pid, nodes, weight, script = task
    general = int(cfg.protocol.get("general", 0))
    value = int(cfg.protocol.get("value", 1))
    adv = AdversarySpec.of(nodes, strategy=script, seed=int(cfg.adversary.get("seed", 0)) + pid)
    out = multiscale_broadcast(topo, general, value, adv)
    expected = broadcast_rounds(topo.s, topo.L)
    general_ok = general not in out.corrupt
    ok = out.agreement and (out.validity is not False) and not out.given_up and out.rounds == expected
    return [
        {
            "placement_id": pid,
            "strategy": script,
            "faults": len(nodes),
            "weight": weight,
            "general_correct": general_ok,
            "agreement": out.agreement,
            "validity": "" if out.validity is None else out.validity,
            "rounds": out.rounds,
            "expected_rounds": expected,
            "max_messages": out.max_messages(),
            "max_round_messages": out.max_round_messages(),
            "given_up": len(out.given_up),
            "ok": ok,
            "placement": _nodes_field(nodes),
        }
    ]


def _agreement_inputs(topo, mode: str, rng) -> dict[int, int]:
    if mode == "unanimous":
        return dict.fromkeys(topo.nodes, 3)
    if mode == "clique-index":
        return {v: topo.clique_of(v) for v in topo.nodes}
    return {v: int(x) for v, x in zip(topo.nodes, rng.integers(0, 2, size=topo.n))}


def _run_agreement(ctx, task) -> list[dict]:
    cfg, topo = ctx["cfg"], ctx["topo"]
    pid, nodes, weight, script = task
    modes = cfg.protocol.get("inputs", ["unanimous", "mixed"])
    c = int(cfg.protocol.get("c", 1 + PhaseKing(topo.s).rounds))
    rows = []
    for m, mode in enumerate(modes):
        rng = np.random.default_rng([int(cfg.adversary.get("seed", 0)), pid, m])
        inputs = _agreement_inputs(topo, mode, rng)
        adv = AdversarySpec.of(nodes, strategy=script, seed=int(cfg.adversary.get("seed", 0)) + pid)
        out = multiscale_agreement(topo, inputs, adv)
        rm = out.max_round_messages()
        ok = (
            out.agreement
            and out.validity is not False
            and out.rounds == agreement_rounds(topo.s, topo.L)
            and rm <= c * topo.L
        )
        rows.append(
            {
                "placement_id": pid,
                "strategy": script,
                "inputs": mode,
                "faults": len(nodes),
                "unanimous": out.extra["unanimous"],
                "agreement": out.agreement,
                "validity": "" if out.validity is None else out.validity,
                "decision": next(iter(set(out.decisions.values())), "") if out.agreement else "",
                "rounds": out.rounds,
                "max_messages": out.max_messages(),
                "max_round_messages": rm,
                "round_message_bound": c * topo.L,
                "given_up": len(out.given_up),
                "ok": ok,
                "placement": _nodes_field(nodes),
            }
        )
    return rows


def _run_securecomm(ctx, task) -> list[dict]:
    cfg, stack = ctx["cfg"], ctx["stack"]
    pid, nodes, dropped, script, senders, receivers, taint = task
    c = float(cfg.protocol.get("c", 3))
    rows = []
    for k, (i, j) in enumerate(zip(senders, receivers)):
        adv = AdversarySpec.of(
            nodes, strategy=script, seed=int(cfg.adversary.get("seed", 0)) + pid, sacrificed=dropped
        )
        record = taint and k == 0
        out = secure_communicate(stack, i, j, int(cfg.protocol.get("value", 1)), adv, record=record)
        taint_ok: Any = ""
        if record:
            taint_ok = not check_upward_flow(out.execution, out.extra["round_layers"])
        limit = c * math.log2(stack.n)
        ok = out.validity and out.extra["receiver_ok"] and out.rounds <= limit and taint_ok is not False
        rows.append(
            {
                "placement_id": pid,
                "strategy": script,
                "sender": i,
                "receiver": j,
                "faults": len(nodes),
                "sacrificed": " ".join(dropped),
                "npc_per_layer": " ".join(str(x) for x in out.extra["per_layer_npc"]),
                "overall_npc": out.extra["overall_npc"],
                "given_up": len(out.given_up),
                "delivered": out.validity,
                "receiver_ok": out.extra["receiver_ok"],
                "taint_ok": taint_ok,
                "rounds": out.rounds,
                "round_limit": f"{limit:.6g}",
                "max_messages": out.max_messages(),
                "ok": ok,
            }
        )
    return rows


def _run_kernel(ctx, task) -> list[dict]:
    cfg = ctx["cfg"]
    pid, nodes, script = task
    s = int(cfg.topology["s"])
    kcfg = KernelConfig.of_size(s)
    f = kcfg.f
    rows = []
    for bits in range(2**s):
        inputs = {v: (bits >> v) & 1 for v in range(s)}
        adv = AdversarySpec.of(nodes, strategy=script, seed=int(cfg.adversary.get("seed", 0)) + pid)
        correct_vals = [inputs[v] for v in range(s) if v not in nodes]
        for kernel, fn in (("A", run_immediate_ba_As), ("B", run_differential_ba_Bs)):
            out = fn(kcfg, {v: inputs[v] for v in range(s) if v not in nodes}, adv)
            decided = set(out.decisions.values())
            if kernel == "A":
                trigger = len(set(correct_vals)) == 1
                need = correct_vals[0] if trigger else None
            else:
                counts = Counter(correct_vals)
                top, n_top = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))
                trigger = n_top >= s - f
                need = top if trigger else None
            validity = (decided == {need}) if trigger else ""
            rows.append(
                {
                    "placement_id": pid,
                    "strategy": script,
                    "inputs": format(bits, f"0{s}b")[::-1],
                    "kernel": kernel,
                    "faults": len(nodes),
                    "agreement": out.agreed,
                    "validity": validity,
                    "rounds": out.rounds,
                    "ok": out.agreed and validity is not False,
                    "placement": _nodes_field(nodes),
                }
            )
    return rows


_RUNNERS: dict[str, Callable] = {
    "broadcast": _run_broadcast,
    "agreement": _run_agreement,
    "securecomm": _run_securecomm,
    "kernel-exhaustive": _run_kernel,
}


# ---------------------------------------------------------------------------
# task planning (parent process)


def _plan_hypercube(cfg: ExperimentConfig, topo) -> tuple[list, dict]:
    pl = cfg.placement
    mode = pl.get("mode", "none")
    scripts = cfg.strategies
    if cfg.kind == "broadcast":
        general = int(cfg.protocol.get("general", 0))
        scopes = scopes_for_broadcast(topo, DisseminationTree(topo, topo.clique_of(general)))
    else:
        general = None
        scopes = scopes_for_agreement(topo)
    info: dict[str, Any] = {"mode": mode}
    family: list[tuple[frozenset[int], int]]
    if mode == "none":
        family = [(frozenset(), 1)]
    elif mode == "list":
        family = [(frozenset(p), 1) for p in pl.get("placements", [])]
    elif mode == "exhaustive":
        max_faults = int(pl.get("max_faults", len(scopes)))
        if pl.get("symmetry") and cfg.kind == "broadcast":
            family = list(broadcast_orbits(topo, general, max_faults))
            info["orbit_representatives"] = len(family)
            info["placements_covered"] = sum(w for _, w in family)
        else:
            family = []
            for p in enumerate_placements(scopes, topo.nodes, max_faults):
                family.append((p, 1))
                if len(family) * len(scripts) > cfg.ceiling:
                    raise CeilingExceeded(
                        f"more than {cfg.ceiling} executions in exhaustive mode; "
                        "enable symmetry reduction or lower max_faults"
                    )
            info["placements_covered"] = len(family)
    else:
        hi = int(pl.get("max_faults", topo.num_cliques))
        sampled = sampled_placements(scopes, topo.nodes, int(pl["count"]), int(pl["seed"]), pl.get("target"), hi)
        family = [(nodes, 1) for nodes, _, _ in sampled]
    if pl.get("limit") is not None:
        # a prefix of the family; placement ids match the full campaign
        family = family[: int(pl["limit"])]
        info["limit"] = int(pl["limit"])
    runs = len(family) * len(scripts)
    if mode == "exhaustive" and runs > cfg.ceiling:
        raise CeilingExceeded(f"{runs} executions exceed the exhaustive ceiling {cfg.ceiling}")
    rotate = bool(pl.get("rotate_strategies", False))
    tasks = []
    for pid, (nodes, weight) in enumerate(family):
        chosen = [scripts[pid % len(scripts)]] if rotate else scripts
        for script in chosen:
            tasks.append((pid, nodes, weight, script))
    info["placements"] = len(family)
    return tasks, info


def _plan_kernel(cfg: ExperimentConfig) -> tuple[list, dict]:
    s = int(cfg.topology["s"])
    f = s // 3
    family = [frozenset(c) for size in range(f + 1) for c in itertools.combinations(range(s), size)]
    runs = len(family) * len(cfg.strategies) * 2**s * 2
    if runs > cfg.ceiling:
        raise CeilingExceeded(f"{runs} kernel executions exceed the ceiling {cfg.ceiling}")
    tasks = [(pid, nodes, script) for pid, nodes in enumerate(family) for script in cfg.strategies]
    return tasks, {"placements": len(family), "input_patterns": 2**s}


def _plan_securecomm(cfg: ExperimentConfig, stack) -> tuple[list, dict]:
    pl = cfg.placement
    scopes = scopes_for_stack(stack)
    scripts = cfg.strategies
    per = int(cfg.protocol.get("senders", 4))
    taint = bool(cfg.protocol.get("check_taint", True))
    mode = pl.get("mode", "none")
    if mode == "none":
        family = [(frozenset(), (), 0)]
    elif mode == "list":
        family = [(frozenset(p), (), len(p)) for p in pl.get("placements", [])]
    elif mode == "sampled":
        target = pl.get("target", "bounds")
        if target == "bounds":
            target = (stack.n // stack.s0) * scope_bound(stack.s0)
        family = sampled_placements(
            scopes, stack.nodes, int(pl["count"]), int(pl["seed"]), target, stack.n // 3,
            sacrificed=pl.get("sacrificed"),
        )
    else:
        raise ConfigError("securecomm supports placement modes none, list and sampled")
    tasks = []
    for pid, (nodes, dropped, _) in enumerate(family):
        rng = np.random.default_rng([int(pl.get("seed", 0)), pid, 7])
        bad_blocks = {stack.layers[0].block_of(v) for name in dropped for v in _scope_nodes(scopes, name)}
        pool = [v for v in stack.nodes if v not in nodes and stack.layers[0].block_of(v) not in bad_blocks]
        senders = [int(pool[k]) for k in rng.choice(len(pool), size=min(per, len(pool)), replace=False)]
        receivers = [int(v) for v in rng.integers(0, stack.n, size=len(senders))]
        script = scripts[pid % len(scripts)]
        tasks.append((pid, nodes, dropped, script, senders, receivers, taint))
    return tasks, {"placements": len(family), "senders_per_placement": per}


def _scope_nodes(scopes, name):
    for sc in scopes:
        if sc.name == name:
            return sc.nodes
    return ()


def _reliability_rows(cfg: ExperimentConfig) -> list[dict]:
    rel = cfg.reliability
    rows = []
    required = rel.get("required_nu")
    for s, n, p in itertools.product(_as_list(rel["s"]), _as_list(rel["n"]), _as_list(rel["p"])):
        s, n, p = int(s), int(n), float(p)
        if n % s:
            raise ConfigError(f"n={n} is not divisible by s={s}")
        b = broadcast_reliability(s, n, p)
        flags_ok = all(b.flags.values())
        ok = (not flags_ok) or b.nu <= b.closed_form_nu
        if required is not None:
            ok = ok and b.nu <= float(required)
        rows.append(
            {
                "protocol": "broadcast",
                "s": s,
                "n": n,
                "p": repr(p),
                "tolerated": "",
                "exact_nu": _fmt(b.nu),
                "bound_nu": _fmt(b.closed_form_nu),
                "flags": ";".join(f"{k}={v}" for k, v in sorted(b.flags.items())),
                "ok": ok,
            }
        )
    for entry in rel.get("stacks", []):
        sizes = [int(x) for x in entry["sizes"]]
        n, p = int(entry["n"]), float(entry["p"])
        strict = securecomm_reliability(sizes, n, p)
        for tol in entry.get("tolerated", [[0] * len(sizes)]):
            r = securecomm_reliability(sizes, n, p, tol)
            rows.append(
                {
                    "protocol": "securecomm",
                    "s": " ".join(map(str, sizes)),
                    "n": n,
                    "p": repr(p),
                    "tolerated": " ".join(map(str, tol)),
                    "exact_nu": _fmt(r.nu),
                    "bound_nu": _fmt(strict.nu),
                    "flags": ";".join(f"layer{l.layer}={l.bound_flag}" for l in r.layers if l.tolerated),
                    "ok": r.nu <= strict.nu,
                }
            )
    return rows


def _as_list(x):
    return x if isinstance(x, list) else [x]


def _fmt(x) -> str:
    import mpmath

    return mpmath.nstr(x, 17)


# ---------------------------------------------------------------------------
# running and writing


@dataclass
class CampaignResult:
    config: ExperimentConfig
    rows: list[dict]
    info: dict
    elapsed: float

    @property
    def failures(self) -> int:
        return sum(1 for r in self.rows if not r["ok"])

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def csv_text(self) -> str:
        return rows_to_csv(self.rows, _COLUMNS[self.config.kind])


_COLUMNS = {
    "broadcast": [
        "placement_id", "strategy", "faults", "weight", "general_correct", "agreement", "validity",
        "rounds", "expected_rounds", "max_messages", "max_round_messages", "given_up", "ok", "placement",
    ],
    "agreement": [
        "placement_id", "strategy", "inputs", "faults", "unanimous", "agreement", "validity", "decision",
        "rounds", "max_messages", "max_round_messages", "round_message_bound", "given_up", "ok", "placement",
    ],
    "securecomm": [
        "placement_id", "strategy", "sender", "receiver", "faults", "sacrificed", "npc_per_layer",
        "overall_npc", "given_up", "delivered", "receiver_ok", "taint_ok", "rounds", "round_limit",
        "max_messages", "ok",
    ],
    "kernel-exhaustive": [
        "placement_id", "strategy", "inputs", "kernel", "faults", "agreement", "validity", "rounds", "ok", "placement",
    ],
    "reliability-sweep": ["protocol", "s", "n", "p", "tolerated", "exact_nu", "bound_nu", "flags", "ok"],
}


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def run_campaign(cfg: ExperimentConfig, workers: int = 1, chunksize: int | None = None) -> CampaignResult:
    start = time.perf_counter()
    if cfg.kind == "reliability-sweep":
        rows = _reliability_rows(cfg)
        return CampaignResult(cfg, rows, {"rows": len(rows)}, time.perf_counter() - start)
    if cfg.kind == "kernel-exhaustive":
        tasks, info = _plan_kernel(cfg)
    elif cfg.kind == "securecomm":
        tasks, info = _plan_securecomm(cfg, _context(cfg.key())["stack"])
    else:
        tasks, info = _plan_hypercube(cfg, _context(cfg.key())["topo"])
    key = cfg.key()
    args = [(key, t) for t in tasks]
    if workers <= 1 or len(tasks) < 2:
        chunks = [_eval_task(a) for a in args]
    else:
        size = chunksize or max(1, len(args) // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_eval_task, args, chunksize=size))
    rows = [r for chunk in chunks for r in chunk]
    info["executions"] = len(tasks)
    info["rows"] = len(rows)
    return CampaignResult(cfg, rows, info, time.perf_counter() - start)


def write_results(result: CampaignResult, out_dir: str | os.PathLike) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / result.config.output.get("csv", "results.csv")
    manifest_path = out / result.config.output.get("manifest", "manifest.json")
    body = result.csv_text()
    csv_path.write_text(body)
    manifest = {
        "config": result.config.to_dict(),
        "code_version": __version__,
        "python": platform.python_version(),
        "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "elapsed_seconds": round(result.elapsed, 3),
        "totals": {**result.info, "failures": result.failures, "passed": result.passed},
        "csv": {"path": csv_path.name, "sha256": hashlib.sha256(body.encode()).hexdigest()},
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return csv_path, manifest_path


def run_experiment(config: ExperimentConfig | dict | str, out_dir=None, workers: int = 1) -> int:
    """Run a campaign, write its CSV and manifest, and return the exit status."""
    if isinstance(config, (str, os.PathLike)):
        config = ExperimentConfig.load(config)
    elif isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    result = run_campaign(config, workers)
    write_results(result, out_dir or config.output.get("dir", "."))
    return 0 if result.passed else 1
