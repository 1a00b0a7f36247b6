"""Dataset generation, verification, and training-row emission.

``generate_dataset`` walks a seed corpus of SMT-LIB files, mutates each
seed to the requested difficulty levels, solves the mutants, asks the
language-model endpoint for an informal statement and a reasoning path,
and keeps only rows whose extracted answer matches the solver.  Output
is line-delimited JSON; every byte is a deterministic function of the
plan and the global seed.  ``verify_dataset`` re-checks a file from
scratch, ``emit_training_rows`` renders verified rows into the
instruction-tuning template.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .ast import Goal, MathMorphError, Problem, node_count
from .parser import ParseError, parse
from .printer import canonical_print, print_smtlib
from .solver import SolverConfig, SolverResult, solve
from .simplify import MutationRecord, TacticError
from .complicate import ComplicationError, McmcConfig, mutate_to_level
from .informalize import (PATTERNS, ConsistencyVerdict, EndpointError,
                          PromptContext, PromptPattern, consistency_check,
                          generate_reasoning, informalize)


class PipelineError(MathMorphError):
    pass


ROW_FIELDS = ("seed_id", "level", "formal", "informal", "pattern", "answer",
              "reasoning", "verified", "provenance", "rng_seed")

TRAINING_TEMPLATE = ("Below is an instruction that describes a task. "
                     "Write a response that appropriately completes the "
                     "request.\n\n### Instruction:\n{instruction}\n\n"
                     "### Response:\n")


@dataclass
class GenerationPlan:
    corpus_path: str
    level_counts: Dict[int, int]            # level -> rows per seed problem
    pattern_ratio: float = 0.5              # fraction of rows drawn as p1
    solver: SolverConfig = field(default_factory=SolverConfig)
    endpoint: Optional[object] = None
    global_seed: int = 0
    skip_verification: bool = False
    reasoning_attempts: int = 3
    mcmc: Optional[McmcConfig] = None
    few_shot_count: int = 2

    def __post_init__(self):
        if not self.level_counts:
            raise PipelineError("no levels requested")
        if any(n < 0 for n in self.level_counts.values()):
            raise PipelineError("sample counts must be >= 0")
        if any(lvl < 0 for lvl in self.level_counts):
            raise PipelineError("levels must be >= 0")
        if not 0.0 <= self.pattern_ratio <= 1.0:
            raise PipelineError("pattern ratio must lie in [0, 1]")
        if self.reasoning_attempts < 1:
            raise PipelineError("need at least one reasoning attempt")


@dataclass
class GenerationReport:
    rows: int = 0
    rejects: int = 0
    per_level: Dict[int, int] = field(default_factory=dict)
    attempted: int = 0
    solved: int = 0
    verified: int = 0
    mean_node_count: Dict[int, float] = field(default_factory=dict)

    @property
    def validity_rate(self) -> float:
        return self.solved / self.attempted if self.attempted else 0.0

    @property
    def verification_rate(self) -> float:
        return self.verified / self.solved if self.solved else 0.0


def sample_rng_seed(global_seed: int, seed_id: str, level: int,
                    index: int) -> int:
    """Stable per-sample RNG seed; independent of generation order."""
    key = f"{global_seed}:{seed_id}:{level}:{index}"
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big")


def load_corpus(path: str) -> List[Tuple[str, Problem, Optional[str]]]:
    """(seed_id, problem, informal sidecar text) per .smt2 file, sorted by
    id.  A sidecar is an optional .txt file next to the script holding the
    original natural-language statement."""
    root = Path(path)
    if not root.is_dir():
        raise PipelineError(f"seed corpus is not a directory: {path}")
    out = []
    for f in sorted(root.glob("*.smt2")):
        try:
            problem = parse(f.read_text())
        except (ParseError, MathMorphError) as exc:
            raise PipelineError(f"seed {f.name} does not parse: {exc}")
        sidecar = f.with_suffix(".txt")
        text = sidecar.read_text().strip() if sidecar.exists() else None
        out.append((f.stem, problem, text))
    if not out:
        raise PipelineError(f"no .smt2 seeds under {path}")
    return out


def _records_json(records: Sequence[MutationRecord]) -> list:
    return [{"tactic": r.tactic, "site": list(r.site),
             "parameters": r.parameters, "seed": r.seed} for r in records]


def _answer_str(result: SolverResult) -> Optional[str]:
    if result.status == "sat" and result.goal_values:
        return str(result.goal_values[0][1].value)
    return None


def _pick_pattern(rng, ratio: float, has_original: bool) -> str:
    """p1 rewrites the original statement, so it needs a sidecar text."""
    if has_original and rng.random() < ratio:
        return "p1"
    return "p2"


def _generate_row(plan: GenerationPlan, seed_id: str, seed: Problem,
                  original: Optional[str], level: int, index: int,
                  few_shot_pool) -> Tuple[Optional[dict], Optional[dict]]:
    """(row, reject) for one sample; exactly one of the two is set."""
    rng_seed = sample_rng_seed(plan.global_seed, seed_id, level, index)
    rng = random.Random(rng_seed)
    name = _pick_pattern(rng, plan.pattern_ratio, original is not None)
    base = {"seed_id": seed_id, "level": level, "rng_seed": rng_seed,
            "pattern": name}
    mcmc = plan.mcmc or McmcConfig(solver=plan.solver)
    try:
        mutated, records = mutate_to_level(seed, level, rng, mcmc)
    except (ComplicationError, TacticError, MathMorphError) as exc:
        return None, dict(base, reason=f"mutation failed: {exc}")
    base["formal"] = canonical_print(mutated)
    base["provenance"] = _records_json(records)
    result = solve(mutated, plan.solver)
    if result.status != "sat":
        return None, dict(base, reason=f"solver status {result.status}")
    base["answer"] = _answer_str(result)
    context = PromptContext(original_text=original,
                            few_shot_pool=few_shot_pool, rng=rng,
                            few_shot_count=plan.few_shot_count)
    try:
        informal = informalize(mutated, PATTERNS[name], plan.endpoint,
                               context)
    except (EndpointError, MathMorphError) as exc:
        return None, dict(base, reason=f"informalization failed: {exc}")
    base["informal"] = informal
    if plan.skip_verification:
        return None, dict(base, reasoning="", verified=False,
                          reason="verification skipped by plan")
    reasoning, verdict = "", None
    for _ in range(plan.reasoning_attempts):
        try:
            reasoning = generate_reasoning(informal, plan.endpoint)
        except (EndpointError, MathMorphError) as exc:
            return None, dict(base, reason=f"reasoning failed: {exc}")
        verdict = consistency_check(reasoning, result)
        if verdict.consistent:
            break
    base["reasoning"] = reasoning
    if verdict is None or not verdict.consistent:
        return None, dict(base, verified=False,
                          reason="answer mismatch: reasoning "
                          f"{verdict.llm_answer} vs solver "
                          f"{verdict.solver_answer}")
    base["verified"] = True
    return base, None


def generate_dataset(plan: GenerationPlan, out_path: str,
                     rejects_path: Optional[str] = None) -> GenerationReport:
    """Write verified rows to ``out_path`` and failures to the rejects
    file; per-sample failures never abort the run."""
    if plan.endpoint is None:
        raise PipelineError("no language-model endpoint configured")
    corpus = load_corpus(plan.corpus_path)
    rejects_path = rejects_path or f"{out_path}.rejects"
    report = GenerationReport()
    node_totals: Dict[int, List[int]] = {}
    from .informalize import DEFAULT_FEW_SHOT_POOL
    rows, rejects = [], []
    for seed_id, seed, original in corpus:
        for level in sorted(plan.level_counts):
            for index in range(plan.level_counts[level]):
                report.attempted += 1
                row, reject = _generate_row(plan, seed_id, seed, original,
                                            level, index,
                                            DEFAULT_FEW_SHOT_POOL)
                picked = row if row is not None else reject
                if "answer" in picked:
                    report.solved += 1
                if row is not None:
                    report.verified += 1
                    report.per_level[level] = \
                        report.per_level.get(level, 0) + 1
                    rows.append(row)
                else:
                    rejects.append(reject)
                if "formal" in picked:
                    total = sum(node_count(c)
                                for c in parse(picked["formal"]).constraints)
                    node_totals.setdefault(level, []).append(total)
    report.rows = len(rows)
    report.rejects = len(rejects)
    report.mean_node_count = {lvl: sum(v) / len(v)
                              for lvl, v in sorted(node_totals.items())}
    _write_jsonl(out_path, [_ordered_row(r) for r in rows])
    _write_jsonl(rejects_path, rejects)
    return report


def _ordered_row(row: dict) -> dict:
    return {k: row[k] for k in ROW_FIELDS}


def _write_jsonl(path: str, rows: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False))
            fh.write("\n")


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass
class VerificationReport:
    rows: int = 0
    passed: int = 0
    mismatches: List[Tuple[int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def verify_dataset(path: str,
                   cfg: Optional[SolverConfig] = None) -> VerificationReport:
    """Re-parse, re-solve, and re-check every row; mismatches carry the
    1-based line number."""
    cfg = cfg or SolverConfig()
    report = VerificationReport()
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        report.rows += 1
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            report.mismatches.append((lineno, f"invalid JSON: {exc}"))
            continue
        missing = [k for k in ROW_FIELDS if k not in row]
        extra = [k for k in row if k not in ROW_FIELDS]
        if missing or extra:
            report.mismatches.append(
                (lineno, f"schema violation: missing {missing}, "
                         f"unexpected {extra}"))
            continue
        if row["verified"] is not True:
            report.mismatches.append((lineno, "unverified row in dataset"))
            continue
        try:
            problem = parse(row["formal"])
        except (ParseError, MathMorphError) as exc:
            report.mismatches.append((lineno, f"formal does not parse: "
                                              f"{exc}"))
            continue
        result = solve(problem, cfg)
        if result.status != "sat":
            report.mismatches.append(
                (lineno, f"solver status {result.status}"))
            continue
        answer = _answer_str(result)
        if row["answer"] is not None and answer is not None and \
                Fraction(row["answer"]) != Fraction(answer):
            report.mismatches.append(
                (lineno, f"stored answer {row['answer']} != solver "
                         f"{answer}"))
            continue
        verdict = consistency_check(row["reasoning"], result)
        if not verdict.consistent:
            report.mismatches.append(
                (lineno, f"reasoning answer {verdict.llm_answer} != "
                         f"solver {verdict.solver_answer}"))
            continue
        report.passed += 1
    return report


# ---------------------------------------------------------------------------
# training-row emission
# ---------------------------------------------------------------------------

class UnverifiedSampleError(PipelineError):
    pass


def emit_training_rows(dataset_path: str, out_path: str) -> int:
    """Render each verified row into the instruction-tuning template with
    the informal problem as instruction and the reasoning path as
    response; returns the row count."""
    count = 0
    with open(dataset_path, encoding="utf-8") as fh, \
            open(out_path, "w", encoding="utf-8") as out:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            row = json.loads(line)
            if row.get("verified") is not True:
                raise UnverifiedSampleError(
                    f"line {lineno}: unverified sample cannot be emitted")
            text = TRAINING_TEMPLATE.format(instruction=row["informal"])
            text += row["reasoning"]
            out.write(json.dumps({"text": text}, ensure_ascii=False))
            out.write("\n")
            count += 1
    return count


# ---------------------------------------------------------------------------
# config files (plain key = value text)
# ---------------------------------------------------------------------------

def parse_config(path: str) -> Dict[str, str]:
    out: Dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise PipelineError(
                    f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def _parse_level_counts(text: str) -> Dict[int, int]:
    """\"0:2,1:2,2:1\" -> {0: 2, 1: 2, 2: 1}."""
    counts: Dict[int, int] = {}
    for chunk in text.split(","):
        if not chunk.strip():
            continue
        lvl, _, n = chunk.partition(":")
        try:
            counts[int(lvl)] = int(n)
        except ValueError:
            raise PipelineError(f"bad level spec {chunk.strip()!r}, "
                                "expected level:count")
    return counts


def plan_from_config(cfg: Dict[str, str],
                     endpoint: Optional[object] = None) -> GenerationPlan:
    if "corpus" not in cfg:
        raise PipelineError("config is missing the 'corpus' key")
    solver = SolverConfig()
    if cfg.get("solver"):
        import shlex
        solver = replace(solver, command=shlex.split(cfg["solver"]))
    return GenerationPlan(
        corpus_path=cfg["corpus"],
        level_counts=_parse_level_counts(cfg.get("levels", "0:1")),
        pattern_ratio=float(cfg.get("pattern_ratio", "0.5")),
        solver=solver,
        endpoint=endpoint,
        global_seed=int(cfg.get("seed", "0")),
        skip_verification=cfg.get("skip_verification", "false").lower()
        in ("1", "true", "yes"),
        reasoning_attempts=int(cfg.get("reasoning_attempts", "3")))
