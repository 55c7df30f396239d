"""Suite orchestration: replicate-parallel execution, deterministic artifact
emission (CSV/JSON), manifests and verdicts.

Determinism contract: all CSV content is a pure function of (config,
master_seed); worker count only changes scheduling, never bytes.  Floats are
rendered with shortest round-trip repr, '.' decimal, LF line endings.
"""

from __future__ import annotations

import json
import multiprocessing
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .errors import BrwLabError, InfeasibleRunError, PartialResultError

PASS, WARN, FAIL = "pass", "warn", "fail"


@dataclass
class Check:
    name: str
    status: str
    value: object = None
    threshold: object = None
    detail: str = ""


@dataclass
class SuiteOutput:
    checks: List[Check] = field(default_factory=list)
    report: dict = field(default_factory=dict)

    def add(self, name, ok, value=None, threshold=None, detail="", warn_only=False):
        status = PASS if ok else (WARN if warn_only else FAIL)
        self.checks.append(Check(name, status, value, threshold, detail))
        return ok


def map_replicates(worker: Callable, items: list, threads: int) -> list:
    """Order-preserving parallel map over picklable items; results depend
    only on the items, never on scheduling."""
    if threads <= 1 or len(items) <= 1:
        return [worker(it) for it in items]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=min(threads, len(items)), mp_context=ctx) as ex:
        return list(ex.map(worker, items))


def chunk_ranges(total: int, chunk: int) -> list:
    return [(s, min(chunk, total - s)) for s in range(0, total, chunk)]


def fmt_cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header: List[str], rows) -> None:
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(fmt_cell(c) for c in row) + "\n")


def write_json(path: Path, doc: dict) -> None:
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON-serialisable: {type(x)}")


def run(config: ExperimentConfig, out_dir: Optional[str] = None, threads: int = 1,
        seed_override: Optional[int] = None) -> int:
    """Run one suite end to end; returns the process exit status
    (0 iff no check failed)."""
    from . import suites  # late import: suites pull in every module

    if seed_override is not None:
        config.master_seed = seed_override
        config.raw = dict(config.raw, master_seed=seed_override)
    out = Path(out_dir or config.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)

    started = time.time()
    runner_fn = suites.SUITE_RUNNERS[config.suite]
    try:
        output = runner_fn(config, out, threads)
    except InfeasibleRunError as err:
        output = SuiteOutput()
        output.add("feasibility", False, detail=str(err))
    except PartialResultError as err:
        output = SuiteOutput()
        output.add("partial-result", False, value=err.accepted, detail=str(err),
                   warn_only=config.allow_partial)
    runtime = time.time() - started

    bound = config.options.get("runtime_bound_seconds")
    if bound is not None:
        output.add(
            "runtime", runtime < bound, value=round(runtime, 3), threshold=bound,
            detail=f"wall time with {threads} worker(s) on {multiprocessing.cpu_count()} cpus",
        )

    manifest = {
        "resolved_config": config.raw,
        "suite": config.suite,
        "master_seed": config.master_seed,
        "versions": {
            "brwlab": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "solver": output.report.get("solver", {}),
    }
    write_json(out / "manifest.json", manifest)

    statuses = [c.status for c in output.checks]
    overall = FAIL if FAIL in statuses else (WARN if WARN in statuses else PASS)
    verdict = {
        "suite": config.suite,
        "status": overall,
        "runtime_seconds": round(runtime, 3),
        "checks": [asdict(c) for c in output.checks],
        "report": {k: v for k, v in output.report.items() if k != "solver"},
    }
    write_json(out / "verdict.json", verdict)
    return 0 if overall != FAIL else 1
