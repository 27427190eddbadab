"""Goal-driven retrieval: score records, pick winners, rerank in stages.

A goal is a pipeline of stages. Each stage names a feature (dotted paths
reach into vectors, e.g. ``color.mean_rgb.0``), a target (scalar, vector,
or a ``"maximize"``/``"minimize"`` directive), a match function, and how
many candidates to keep. Stage one scans the whole library; later stages
rescore only the survivors.

All match functions are oriented so that higher is better: similarity
scores stay as-is, distances are negated. Selection ties break toward
the lower noise_id.
"""

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (
    InvalidParameterError,
    QueryError,
    ShapeMismatchError,
)
from .features import normalize_embedding

MATCH_FUNCTIONS = ("cosine", "mse", "absdiff", "euclidean")
DIRECTIVES = ("maximize", "minimize")

_SCAN_MODE = {"cosine": 0, "mse": 1, "euclidean": 2, "absdiff": 3}

# Widest top-k served by the screened float16 scan; larger requests fall
# back to the plain float64-accumulating scan.
_SCREEN_MAX_K = 512


@dataclass(frozen=True)
class GoalStage:
    """One scoring stage.

    ``target`` is a float, a float64 vector, or a directive string.
    Cosine vector targets are expected to be unit-norm (parse_goal
    normalizes them); record embeddings are unit-norm by construction.
    """

    feature: str
    target: object
    match: str
    keep: int = 1

    def __post_init__(self):
        if not isinstance(self.feature, str) or not self.feature:
            raise InvalidParameterError("stage feature must be a non-empty string")
        if self.match not in MATCH_FUNCTIONS:
            raise InvalidParameterError(
                f"unknown match function {self.match!r}; expected one of "
                f"{MATCH_FUNCTIONS}")
        if not isinstance(self.keep, int) or isinstance(self.keep, bool) \
                or self.keep < 1:
            raise InvalidParameterError("stage keep must be a positive integer")
        target = self.target
        if isinstance(target, str):
            if target not in DIRECTIVES:
                raise InvalidParameterError(
                    f"string target must be one of {DIRECTIVES}, got {target!r}")
        elif np.isscalar(target):
            object.__setattr__(self, "target", float(target))
        else:
            vec = np.asarray(target, dtype=np.float64).reshape(-1)
            if vec.size == 0:
                raise InvalidParameterError("vector target must be non-empty")
            if not np.all(np.isfinite(vec)):
                raise InvalidParameterError("vector target must be finite")
            object.__setattr__(self, "target", vec)


@dataclass(frozen=True)
class GoalSpec:
    stages: tuple

    def __post_init__(self):
        stages = tuple(self.stages)
        if not stages:
            raise InvalidParameterError("goal must have at least one stage")
        for stage in stages:
            if not isinstance(stage, GoalStage):
                raise InvalidParameterError("goal stages must be GoalStage values")
        object.__setattr__(self, "stages", stages)


def parse_goal(obj: dict, base_dir=None) -> GoalSpec:
    """Build a GoalSpec from the goal-JSON shape.

    ``"@file"`` string targets load raw little-endian float32 vectors
    relative to base_dir. Vector targets for cosine stages are
    normalized to unit length here, mirroring how embeddings are
    normalized on ingest.
    """
    if not isinstance(obj, dict) or not isinstance(obj.get("stages"), list) \
            or not obj["stages"]:
        raise InvalidParameterError(
            'goal must be an object with a non-empty "stages" list')
    base = Path(base_dir) if base_dir is not None else Path(".")
    stages = []
    for i, raw in enumerate(obj["stages"], start=1):
        if not isinstance(raw, dict):
            raise InvalidParameterError(f"stage {i}: must be a JSON object")
        for key in ("feature", "target", "match", "keep"):
            if key not in raw:
                raise InvalidParameterError(f"stage {i}: missing {key!r}")
        target = raw["target"]
        if isinstance(target, str) and target.startswith("@"):
            ref = base / target[1:]
            if not ref.is_file():
                raise InvalidParameterError(
                    f"stage {i}: target file not found: {ref}")
            target = np.fromfile(ref, dtype="<f4").astype(np.float64)
        keep = raw["keep"]
        if not isinstance(keep, int) or isinstance(keep, bool):
            raise InvalidParameterError(f"stage {i}: keep must be an integer")
        try:
            stage = GoalStage(feature=raw["feature"], target=target,
                              match=raw["match"], keep=keep)
            if stage.match == "cosine" and isinstance(stage.target, np.ndarray):
                stage = GoalStage(feature=stage.feature,
                                  target=normalize_embedding(stage.target),
                                  match=stage.match, keep=stage.keep)
        except InvalidParameterError as exc:
            raise InvalidParameterError(f"stage {i}: {exc}") from None
        stages.append(stage)
    return GoalSpec(stages=tuple(stages))


def load_goal(path) -> GoalSpec:
    """Read a goal-JSON file; @file targets resolve beside it."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidParameterError(f"{path}: malformed goal JSON: {exc.msg}") from None
    return parse_goal(obj, base_dir=path.parent)


# ---------------------------------------------------------------------------
# pairwise scoring


def match_score(record_feature, target, match: str) -> float:
    """Score one feature value against one target; higher is better."""
    if match not in MATCH_FUNCTIONS:
        raise InvalidParameterError(
            f"unknown match function {match!r}; expected one of {MATCH_FUNCTIONS}")
    if isinstance(target, str):
        if target not in DIRECTIVES:
            raise InvalidParameterError(
                f"string target must be one of {DIRECTIVES}, got {target!r}")
        value = np.asarray(record_feature, dtype=np.float64)
        if value.ndim != 0 and value.size != 1:
            raise ShapeMismatchError(
                "directive targets apply to scalar features only")
        value = float(value.reshape(()))
        return value if target == "maximize" else -value

    feat = np.asarray(record_feature, dtype=np.float64).reshape(-1)
    tgt = np.asarray(target, dtype=np.float64).reshape(-1)
    if feat.size != tgt.size:
        raise ShapeMismatchError(
            f"feature has {feat.size} entries, target has {tgt.size}")
    if match == "cosine":
        if feat.size < 2:
            raise QueryError("cosine matching requires vector features")
        return float(feat @ tgt)
    diff = feat - tgt
    if match == "mse":
        return float(-np.mean(diff * diff))
    if match == "euclidean":
        return float(-np.sqrt(diff @ diff))
    return float(-np.mean(np.abs(diff)))  # absdiff


# ---------------------------------------------------------------------------
# library-wide scoring


def _screen_bound(q64: np.ndarray, max_norm: float, d: int) -> float:
    """Upper bound on |float16-screen score − exact float64 score|.

    Per-element float16 relative error is 2^-11 (plus a 2^-25 absolute
    term for subnormals); the trailing term covers float32 accumulation.
    """
    qn = float(np.sqrt(q64 @ q64))
    quant = qn * (2.0 ** -11 * max_norm + np.sqrt(d) * 2.0 ** -25)
    return quant + 1e-5 * max(1.0, qn * max_norm)


def _screened_top_k(lib, stage: GoalStage, k: int):
    """Exact cosine top-k via the float16 screen + float64 rescore."""
    mat32, mat16, max_norm = lib.semantic_pack()
    d = mat32.shape[1]
    q64 = np.ascontiguousarray(stage.target, dtype=np.float64)
    if q64.size != d:
        raise ShapeMismatchError(
            f"target has {q64.size} entries, semantic embeddings have {d}")
    approx = kernels.screen_scores(mat16, q64.astype(np.float32))
    kth = kernels.kth_largest(approx, k)
    bound = _screen_bound(q64, max_norm, d)
    idx = kernels.gather_ge(approx, kth - 2.0 * bound)
    exact = kernels.rescore_dot(mat32, q64, idx)
    order = np.lexsort((idx, -exact))[:k]
    return [(int(idx[j]), float(exact[j])) for j in order]


def _score_rows(lib, stage: GoalStage, subset=None) -> np.ndarray:
    """Float64 scores for every candidate row (whole library or subset)."""
    if stage.feature == "semantic":
        mat = lib.semantic_pack()[0]  # float32; scans accumulate in float64
    else:
        mat = lib.feature_matrix(stage.feature)
    if subset is not None:
        mat = mat[subset]

    if isinstance(stage.target, str):  # directive
        if mat.ndim != 1:
            raise QueryError(
                f"directive target needs a scalar feature path, and "
                f"{stage.feature!r} is a vector")
        values = mat.astype(np.float64, copy=True)
        return values if stage.target == "maximize" else -values

    if mat.ndim == 1:
        if isinstance(stage.target, np.ndarray):
            raise ShapeMismatchError(
                f"vector target against scalar feature {stage.feature!r}")
        if stage.match == "cosine":
            raise QueryError("cosine matching requires vector features")
        diff = mat.astype(np.float64) - stage.target
        if stage.match == "mse":
            return -(diff * diff)
        return -np.abs(diff)  # absdiff and euclidean coincide on scalars

    if not isinstance(stage.target, np.ndarray):
        raise ShapeMismatchError(
            f"scalar target against vector feature {stage.feature!r}")
    if stage.target.size != mat.shape[1]:
        raise ShapeMismatchError(
            f"target has {stage.target.size} entries, feature "
            f"{stage.feature!r} has {mat.shape[1]}")
    q64 = np.ascontiguousarray(stage.target, dtype=np.float64)
    return kernels.dist_scan(np.ascontiguousarray(mat), q64,
                             _SCAN_MODE[stage.match])


def _stage_top(lib, stage: GoalStage, k: int, subset=None):
    """Ranked (noise_id, score) list; ties broken by ascending id."""
    if lib.count == 0:
        raise QueryError("library is empty")
    pool = lib.count if subset is None else len(subset)
    if not 1 <= k <= pool:
        raise QueryError(f"k={k} out of range 1..{pool}")

    if (subset is None and stage.feature == "semantic"
            and stage.match == "cosine" and k <= _SCREEN_MAX_K
            and isinstance(stage.target, np.ndarray)):
        return _screened_top_k(lib, stage, k)

    scores = _score_rows(lib, stage, subset)
    ids = np.arange(lib.count, dtype=np.int64) if subset is None else subset
    if k == 1:
        pos = kernels.argmax(scores)  # first maximum == lowest id
        return [(int(ids[pos]), float(scores[pos]))]
    order = np.lexsort((ids, -scores))[:k]
    return [(int(ids[j]), float(scores[j])) for j in order]


def _as_single_stage(goal) -> GoalStage:
    if isinstance(goal, GoalStage):
        return goal
    if isinstance(goal, GoalSpec):
        if len(goal.stages) != 1:
            raise InvalidParameterError(
                "expected a single-stage goal; use progressive_rerank for "
                f"{len(goal.stages)} stages")
        return goal.stages[0]
    raise InvalidParameterError("goal must be a GoalSpec or GoalStage")


def select_best(lib, goal):
    """argmax of match_score over the library → (noise_id, score)."""
    return top_k(lib, goal, 1)[0]


def top_k(lib, goal, k: int):
    """The k best records, descending by score then ascending by id."""
    return _stage_top(lib, _as_single_stage(goal), int(k))


def progressive_rerank(lib, goal: GoalSpec):
    """Run each stage's top-keep over the previous stage's survivors.

    Returns the final stage's ranked (noise_id, score) list.
    """
    if isinstance(goal, GoalStage):
        goal = GoalSpec(stages=(goal,))
    if not isinstance(goal, GoalSpec):
        raise InvalidParameterError("goal must be a GoalSpec")
    survivors = None
    ranked = None
    for index, stage in enumerate(goal.stages, start=1):
        pool = lib.count if survivors is None else len(survivors)
        if stage.keep > pool:
            raise QueryError(
                f"stage {index}: keep={stage.keep} exceeds the "
                f"{pool} available candidates")
        ranked = _stage_top(lib, stage, stage.keep, subset=survivors)
        # sorted ids keep the lowest-id tie rule intact for the next stage
        survivors = np.asarray(sorted(nid for nid, _ in ranked), dtype=np.int64)
    return ranked


# ---------------------------------------------------------------------------
# timing


def bench_retrieval(lib, goal, repetitions: int = 10) -> dict:
    """Mean wall-clock cost of (a) scoring all records, (b) selection.

    Uses the goal's first stage with argmax selection, the same code the
    retrieval path runs. One untimed warm-up query builds the lazy
    packed matrices so the measurement sees steady state.
    """
    if repetitions < 1:
        raise InvalidParameterError("repetitions must be >= 1")
    stage = goal.stages[0] if isinstance(goal, GoalSpec) else goal
    if not isinstance(stage, GoalStage):
        raise InvalidParameterError("goal must be a GoalSpec or GoalStage")
    if lib.count == 0:
        raise QueryError("library is empty")

    screened = (stage.feature == "semantic" and stage.match == "cosine"
                and isinstance(stage.target, np.ndarray))
    match_total = 0.0
    select_total = 0.0
    if screened:
        mat32, mat16, max_norm = lib.semantic_pack()
        d = mat32.shape[1]
        q64 = np.ascontiguousarray(stage.target, dtype=np.float64)
        if q64.size != d:
            raise ShapeMismatchError(
                f"target has {q64.size} entries, semantic embeddings have {d}")
        q32 = q64.astype(np.float32)
        bound = _screen_bound(q64, max_norm, d)
        kernels.screen_scores(mat16, q32)  # warm-up
        for _ in range(repetitions):
            t0 = time.perf_counter()
            approx = kernels.screen_scores(mat16, q32)
            t1 = time.perf_counter()
            kth = kernels.kth_largest(approx, 1)
            idx = kernels.gather_ge(approx, kth - 2.0 * bound)
            exact = kernels.rescore_dot(mat32, q64, idx)
            pos = kernels.argmax(exact)
            winner = (int(idx[pos]), float(exact[pos]))
            t2 = time.perf_counter()
            match_total += t1 - t0
            select_total += t2 - t1
    else:
        _score_rows(lib, stage)  # warm-up
        for _ in range(repetitions):
            t0 = time.perf_counter()
            scores = _score_rows(lib, stage)
            t1 = time.perf_counter()
            pos = kernels.argmax(scores)
            winner = (int(pos), float(scores[pos]))
            t2 = time.perf_counter()
            match_total += t1 - t0
            select_total += t2 - t1
    del winner
    return {"match_cost_s": match_total / repetitions,
            "select_cost_s": select_total / repetitions}
