"""Pluggable fitness evaluation.

Three evaluators share one interface (a batch of requests in, one result per
request id out):

* SurrogateEvaluator -- a fixed analytic formula standing in for training, so
  searches are fast, exact, and reproducible;
* ExternalEvaluator -- spawns a trainer process and speaks newline-delimited
  JSON over its stdin/stdout;
* CachedEvaluator -- memoizes any inner evaluator by genome, with optional
  append-only persistence.

Wire protocol, one UTF-8 JSON document per line, no pretty-printing:
  request  {"id":int,"genome":[int...],"architecture":{...},
            "budget":{"epochs":int,"batch_size":int,"dropout":number}}
  response {"id":int,"status":"ok"|"error","accuracy":number?,"message":string?}
"""
from __future__ import annotations

import json
import logging
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass, field

from .genome import DigitGenome, digits_hash, flatten_digits, genome_hash
from .graph import ArchGraph
from .metrics import total_param_count

log = logging.getLogger("cellspace.evaluate")

# Surrogate constants are normative: tests depend on bit-exact reproduction.
SURROGATE_SCALE = 1_000_000
SURROGATE_GAIN = 0.99
SURROGATE_JITTER = 0.02

DEFAULT_EPOCHS = 10
DEFAULT_BATCH_SIZE = 128
DEFAULT_DROPOUT = 0.7
DEFAULT_TIMEOUT = 3600.0


class EvaluatorError(RuntimeError):
    """Fatal evaluator failure (e.g. the external command cannot be spawned)."""


@dataclass(frozen=True)
class TrainingBudget:
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    dropout: float = DEFAULT_DROPOUT


@dataclass(frozen=True)
class EvaluationRequest:
    id: int
    genome: DigitGenome
    architecture: dict
    budget: TrainingBudget = field(default_factory=TrainingBudget)

    def to_wire(self) -> str:
        obj = {"id": self.id,
               "genome": flatten_digits(self.genome),
               "architecture": self.architecture,
               "budget": {"epochs": self.budget.epochs,
                          "batch_size": self.budget.batch_size,
                          "dropout": self.budget.dropout}}
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class EvaluationResult:
    id: int
    accuracy: float
    status: str = "ok"
    message: str = ""

    @staticmethod
    def failure(request_id: int, message: str) -> "EvaluationResult":
        # a failed candidate scores worst (f1 = 1) instead of aborting the run
        return EvaluationResult(request_id, 0.0, "error", message)


def result_from_wire(line: str) -> EvaluationResult:
    obj = json.loads(line)
    if not isinstance(obj, dict) or not isinstance(obj.get("id"), int):
        raise ValueError("response line must be an object with an integer 'id'")
    status = obj.get("status", "error")
    if status == "ok":
        accuracy = obj.get("accuracy")
        if not isinstance(accuracy, (int, float)) or not 0.0 <= accuracy <= 1.0:
            raise ValueError(f"accuracy out of range: {accuracy!r}")
        return EvaluationResult(obj["id"], float(accuracy), "ok", obj.get("message", ""))
    return EvaluationResult.failure(obj["id"], obj.get("message", "evaluator error"))


# ---------------------------------------------------------------------------
# surrogate
# ---------------------------------------------------------------------------

def surrogate_accuracy(param_count: int, hash64: int) -> float:
    """The normative surrogate formula.

    q = params / 10^6 and J = hash / 2^64 give
    accuracy = 0.99 * q / (q + 1) - 0.02 * J, clamped to [0, 1]: monotone
    non-decreasing in parameter count for fixed J, with a deterministic
    per-genome jitter so distinct genomes trade off against f2.
    """
    q = param_count / SURROGATE_SCALE
    j = hash64 / 2.0 ** 64
    raw = SURROGATE_GAIN * q / (q + 1.0) - SURROGATE_JITTER * j
    return min(1.0, max(0.0, raw))


def surrogate_evaluate(genome: DigitGenome, graph: ArchGraph) -> float:
    """Deterministic stand-in accuracy for a decoded architecture."""
    return surrogate_accuracy(total_param_count(graph), genome_hash(genome))


class SurrogateEvaluator:
    """Batch interface over the surrogate formula. Reads the parameter count
    from the request's architecture export."""

    def evaluate(self, requests: list[EvaluationRequest]) -> list[EvaluationResult]:
        out = []
        for req in requests:
            acc = surrogate_accuracy(req.architecture["param_count"],
                                     genome_hash(req.genome))
            out.append(EvaluationResult(req.id, acc))
        return out


# ---------------------------------------------------------------------------
# external process protocol
# ---------------------------------------------------------------------------

class ExternalEvaluator:
    """Runs an external trainer command once per batch.

    All requests are written up front and stdin is closed (the trainer exits
    on EOF). Results may arrive in any order and are matched by id; a request
    with no response within the timeout is scored as an error.
    """

    def __init__(self, command: str, timeout: float = DEFAULT_TIMEOUT):
        self.argv = shlex.split(command)
        if not self.argv:
            raise EvaluatorError("empty evaluator command")
        self.timeout = timeout

    def evaluate(self, requests: list[EvaluationRequest]) -> list[EvaluationResult]:
        if not requests:
            return []
        try:
            proc = subprocess.Popen(self.argv, stdin=subprocess.PIPE,
                                    stdout=subprocess.PIPE, text=True, bufsize=1)
        except OSError as exc:
            raise EvaluatorError(f"cannot spawn evaluator {self.argv[0]!r}: {exc}") from exc

        wanted = {req.id for req in requests}
        results: dict[int, EvaluationResult] = {}

        def feed():
            try:
                for req in requests:
                    proc.stdin.write(req.to_wire() + "\n")
                proc.stdin.close()
            except (BrokenPipeError, OSError):
                pass  # child died early; the read loop reports the missing ids

        writer = threading.Thread(target=feed, daemon=True)
        writer.start()

        deadline = time.monotonic() + self.timeout
        reader = _LineReader(proc.stdout)
        while len(results) < len(wanted):
            line = reader.readline(deadline - time.monotonic())
            if line is None:  # EOF or timeout
                break
            line = line.strip()
            if not line:
                continue
            try:
                result = result_from_wire(line)
            except ValueError as exc:
                log.warning("protocol violation from evaluator: %s (%r)", exc, line[:200])
                continue
            if result.id in wanted:
                results[result.id] = result
            else:
                log.warning("evaluator answered unknown id %d", result.id)

        writer.join(timeout=1.0)
        # kill before closing stdout: close() waits on the reader thread's
        # buffer lock, which only releases once the child's pipe hits EOF
        if proc.poll() is None:
            proc.kill()
        proc.wait()
        proc.stdout.close()

        out = []
        for req in requests:
            if req.id in results:
                out.append(results[req.id])
            else:
                log.warning("no response for request %d within %.0fs", req.id, self.timeout)
                out.append(EvaluationResult.failure(req.id, "timeout or missing response"))
        return out


class _LineReader:
    """Reads lines from a pipe on a helper thread so waits can time out."""

    def __init__(self, stream):
        self._lines: list[str | None] = []
        self._cond = threading.Condition()
        threading.Thread(target=self._pump, args=(stream,), daemon=True).start()

    def _pump(self, stream):
        try:
            for line in stream:
                with self._cond:
                    self._lines.append(line)
                    self._cond.notify()
        except ValueError:
            pass  # stream closed under us
        with self._cond:
            self._lines.append(None)
            self._cond.notify()

    def readline(self, timeout: float) -> str | None:
        with self._cond:
            if not self._lines and timeout > 0:
                self._cond.wait(timeout)
            if not self._lines:
                return None  # timeout
            head = self._lines.pop(0)
            if head is None:
                self._lines.append(None)  # keep EOF sticky
            return head


# ---------------------------------------------------------------------------
# caching
# ---------------------------------------------------------------------------

class EvaluationCache:
    """Genome-keyed result cache, safe under concurrent lookups/inserts.

    Keys are the genome hash, with collisions resolved by comparing the full
    digit vector. With a path, entries append to a newline-delimited JSON file
    that is reloaded on startup; corrupt lines are skipped with a warning.
    """

    def __init__(self, path=None):
        self._lock = threading.Lock()
        self._entries: dict[int, list[tuple[tuple[int, ...], EvaluationResult]]] = {}
        self._path = path
        self._fh = None
        if path is not None:
            self._load(path)
            self._fh = open(path, "a", encoding="utf-8")

    def _load(self, path):
        try:
            fh = open(path, encoding="utf-8")
        except FileNotFoundError:
            return
        with fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    digits = tuple(int(d) for d in obj["digits"])
                    result = EvaluationResult(int(obj.get("id", -1)),
                                              float(obj["accuracy"]),
                                              obj.get("status", "ok"),
                                              obj.get("message", ""))
                except (ValueError, TypeError, KeyError) as exc:
                    log.warning("%s:%d: skipping corrupt cache line (%s)", path, lineno, exc)
                    continue
                self._insert(digits_hash(digits), digits, result)

    def _insert(self, hash64, digits, result):
        bucket = self._entries.setdefault(hash64, [])
        for i, (existing, _) in enumerate(bucket):
            if existing == digits:
                bucket[i] = (digits, result)
                return
        bucket.append((digits, result))

    def lookup(self, genome: DigitGenome) -> EvaluationResult | None:
        digits = tuple(flatten_digits(genome))
        with self._lock:
            for existing, result in self._entries.get(genome_hash(genome), ()):
                if existing == digits:
                    return result
        return None

    def store(self, genome: DigitGenome, result: EvaluationResult) -> None:
        digits = tuple(flatten_digits(genome))
        h = genome_hash(genome)
        with self._lock:
            self._insert(h, digits, result)
            if self._fh is not None:
                record = {"digits": list(digits), "id": result.id,
                          "status": result.status, "accuracy": result.accuracy,
                          "message": result.message}
                self._fh.write(json.dumps(record, sort_keys=True,
                                          separators=(",", ":")) + "\n")
                self._fh.flush()

    def __len__(self):
        with self._lock:
            return sum(len(b) for b in self._entries.values())


class CachedEvaluator:
    """Memoizing wrapper: each distinct genome reaches the inner evaluator at
    most once. Error results are cached too (a failed candidate stays failed
    for the run rather than being retried every generation)."""

    def __init__(self, inner, cache: EvaluationCache | None = None):
        self.inner = inner
        self.cache = cache if cache is not None else EvaluationCache()
        self.misses = 0

    def evaluate(self, requests: list[EvaluationRequest]) -> list[EvaluationResult]:
        results: dict[int, EvaluationResult] = {}
        pending: list[EvaluationRequest] = []
        pending_ids: dict[int, DigitGenome] = {}
        seen: dict[tuple[int, ...], int] = {}
        for req in requests:
            hit = self.cache.lookup(req.genome)
            if hit is not None:
                results[req.id] = EvaluationResult(req.id, hit.accuracy, hit.status,
                                                   hit.message)
                continue
            key = tuple(flatten_digits(req.genome))
            if key in seen:
                continue  # duplicate within the batch: evaluate once
            seen[key] = req.id
            pending.append(req)
            pending_ids[req.id] = req.genome
        if pending:
            self.misses += len(pending)
            for result in self.inner.evaluate(pending):
                self.cache.store(pending_ids[result.id], result)
        out = []
        for req in requests:
            if req.id in results:
                out.append(results[req.id])
            else:
                hit = self.cache.lookup(req.genome)
                if hit is None:  # inner evaluator violated totality
                    hit = EvaluationResult.failure(req.id, "missing result")
                out.append(EvaluationResult(req.id, hit.accuracy, hit.status, hit.message))
        return out
