"""Sandboxed execution of simulation scripts and the debug retry loop.

Two pluggable backends: ``ns3`` drives a real ns-3 checkout (stage into
scratch, build, run) under resource limits; ``stub`` replays registered
fixture bundles keyed by source digest, scenario digest, or example name,
so the full pipeline runs without any simulator installed.  Build
failures feed an error-driven repair loop that asks the gateway for a
corrected script, lints it, and retries up to a bounded attempt budget.
"""

from __future__ import annotations

import json
import logging
import os
import re
import shutil
import signal
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path

try:
    import resource
except ImportError:  # non-POSIX platform; limits degrade to timeout-only
    resource = None

from .codegen import GeneratedArtifact, lint_structure
from .errors import (BackendUnavailable, BuildFailed, FixtureMissing,
                     SandboxTimeout)
from .gateway import LlmGateway, LlmRequest, Message
from .scenario import ScenarioSpec, spec_hash
from .util import sha256_hex

logger = logging.getLogger(__name__)

DEFAULT_BUILD_TIMEOUT_S = 300.0
DEFAULT_RUN_TIMEOUT_S = 600.0
DEFAULT_MEMORY_BYTES = 4 * 1024 ** 3
DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_MAX_SANDBOXES = 2

# Environment variables forwarded into sandboxed processes.
ENV_ALLOWLIST = ("PATH", "HOME", "LANG", "LC_ALL", "PYTHONPATH", "TMPDIR")

REPAIR_SYSTEM_PROMPT = (
    "You fix ns-3 simulation scripts that failed to build. Reply with the "
    "complete corrected script only, no fences, no commentary. Keep the "
    "section marker comments exactly as they are."
)

_FENCE_RE = re.compile(r"^```[a-zA-Z0-9_+-]*\n|\n?```\s*$")


@dataclass(frozen=True)
class Limits:
    build_timeout_s: float = DEFAULT_BUILD_TIMEOUT_S
    run_timeout_s: float = DEFAULT_RUN_TIMEOUT_S
    memory_bytes: int = DEFAULT_MEMORY_BYTES


@dataclass(frozen=True)
class OutputArtifact:
    name: str
    path: str

    def read_text(self) -> str:
        return Path(self.path).read_text("utf-8")


@dataclass(frozen=True)
class ExecutionReport:
    attempt: int  # 1-based ordinal within a debug loop
    phase: str  # configure | build | run
    exit_status: int
    stdout: str
    stderr: str
    wall_time_s: float
    peak_memory_bytes: int
    artifacts: tuple[OutputArtifact, ...] = ()
    backend: str = "stub"
    created_at: float = 0.0

    def to_dict(self, embed_artifacts: bool = True) -> dict:
        arts = []
        for art in self.artifacts:
            entry = {"name": art.name}
            if embed_artifacts:
                content = art.read_text()
                entry["content"] = content
                entry["sha256"] = sha256_hex(content)
            arts.append(entry)
        return {
            "attempt": self.attempt,
            "phase": self.phase,
            "exit_status": self.exit_status,
            "stdout": self.stdout,
            "stderr": self.stderr,
            "wall_time_s": self.wall_time_s,
            "peak_memory_bytes": self.peak_memory_bytes,
            "artifacts": arts,
            "backend": self.backend,
            "created_at": self.created_at,
        }


@dataclass(frozen=True)
class AttemptRecord:
    report: ExecutionReport
    repair_prompt: str | None = None  # prompt used to repair after this attempt


@dataclass(frozen=True)
class DebugOutcome:
    final_artifact: GeneratedArtifact
    attempts: tuple[AttemptRecord, ...]
    resolved: bool


@dataclass
class ProcessResult:
    exit_status: int
    stdout: str
    stderr: str
    wall_time_s: float
    peak_memory_bytes: int


def sandbox_env(overrides: dict | None = None) -> dict:
    env = {key: os.environ[key] for key in ENV_ALLOWLIST if key in os.environ}
    if overrides:
        env.update(overrides)
    return env


def run_limited(argv: list[str], cwd: str | Path, timeout_s: float,
                memory_bytes: int | None = None,
                env: dict | None = None) -> ProcessResult:
    """Run one command in its own process group under a timeout and an
    address-space cap.  On timeout the whole group is killed and
    SandboxTimeout (carrying the partial streams) is raised; no child
    outlives this call.
    """
    if timeout_s <= 0:
        raise ValueError("timeout_s must be positive")

    def _limit_resources():
        os.setsid()
        if memory_bytes and resource is not None:
            resource.setrlimit(resource.RLIMIT_AS, (memory_bytes, memory_bytes))

    start = time.monotonic()
    proc = subprocess.Popen(
        argv, cwd=str(cwd), stdout=subprocess.PIPE, stderr=subprocess.PIPE,
        env=env if env is not None else sandbox_env(), text=True,
        preexec_fn=_limit_resources if os.name == "posix" else None)
    try:
        stdout, stderr = proc.communicate(timeout=timeout_s)
    except subprocess.TimeoutExpired:
        _kill_group(proc)
        stdout, stderr = proc.communicate()
        wall = time.monotonic() - start
        partial = ProcessResult(exit_status=-signal.SIGKILL, stdout=stdout or "",
                                stderr=stderr or "", wall_time_s=wall,
                                peak_memory_bytes=_children_peak_rss())
        raise SandboxTimeout(timeout_s, partial_report=partial)
    wall = time.monotonic() - start
    return ProcessResult(exit_status=proc.returncode, stdout=stdout,
                         stderr=stderr, wall_time_s=wall,
                         peak_memory_bytes=_children_peak_rss())


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        try:
            proc.kill()
        except ProcessLookupError:
            pass


def _children_peak_rss() -> int:
    if resource is None:
        return 0
    return resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss * 1024


# --- execution keys -----------------------------------------------------------

def source_key(source: str) -> str:
    return f"src:{sha256_hex(source)}"


def spec_key(digest: str) -> str:
    return f"spec:{digest}"


def example_key(ref: str) -> str:
    return f"example:{ref}"


def lookup_keys(target: "GeneratedArtifact | str") -> list[str]:
    """Fixture lookup order: exact source digest first (distinguishes a
    fault-injected script from its repaired twin), then the scenario
    digest, then the example name."""
    if isinstance(target, str):
        return [example_key(target)]
    return [source_key(target.source), spec_key(target.spec_digest)]


# --- stub backend -------------------------------------------------------------

class StubBackend:
    """Deterministic fixture replay.

    A fixture bundle is a directory holding ``report.json``,
    ``stdout.txt``, ``stderr.txt``, and any output artifact files.  The
    manifest's ``keys`` list registers the bundle; a ``spec`` object in
    the manifest additionally registers ``spec:<hash>`` computed at load
    time, so bundles never hard-code digests.
    """

    name = "stub"

    def __init__(self, fixture_root: str | Path | None = None):
        self._bundles: dict[str, Path] = {}
        if fixture_root is not None:
            self.load_directory(fixture_root)

    def load_directory(self, root: str | Path) -> None:
        for manifest in sorted(Path(root).glob("*/report.json")):
            self.register_bundle(manifest.parent)

    def register_bundle(self, bundle_dir: str | Path) -> list[str]:
        bundle_dir = Path(bundle_dir)
        manifest = json.loads((bundle_dir / "report.json").read_text("utf-8"))
        keys = list(manifest.get("keys", []))
        if "spec" in manifest:
            keys.append(spec_key(spec_hash(ScenarioSpec.from_dict(manifest["spec"]))))
        for key in keys:
            self._bundles[key] = bundle_dir
        return keys

    def register_report(self, key: str, bundle_dir: str | Path) -> None:
        self._bundles[key] = Path(bundle_dir)

    def known_examples(self) -> list[str]:
        prefix = "example:"
        return sorted(key[len(prefix):] for key in self._bundles
                      if key.startswith(prefix))

    def execute(self, target, workdir: Path, limits: Limits, attempt: int,
                created_at: float) -> ExecutionReport:
        bundle = None
        tried = lookup_keys(target)
        for key in tried:
            bundle = self._bundles.get(key)
            if bundle is not None:
                break
        if bundle is None:
            raise FixtureMissing(" | ".join(tried))
        manifest = json.loads((bundle / "report.json").read_text("utf-8"))
        stdout = (bundle / "stdout.txt").read_text("utf-8") \
            if (bundle / "stdout.txt").exists() else ""
        stderr = (bundle / "stderr.txt").read_text("utf-8") \
            if (bundle / "stderr.txt").exists() else ""
        artifacts = []
        for entry in manifest.get("artifacts", []):
            src = bundle / entry["file"]
            dst = workdir / entry["name"]
            dst.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(src, dst)
            artifacts.append(OutputArtifact(name=entry["name"], path=str(dst)))
        return ExecutionReport(
            attempt=attempt,
            phase=manifest.get("phase", "run"),
            exit_status=int(manifest.get("exit_status", 0)),
            stdout=stdout,
            stderr=stderr,
            wall_time_s=float(manifest.get("wall_time_s", 0.0)),
            peak_memory_bytes=int(manifest.get("peak_memory_bytes", 0)),
            artifacts=tuple(artifacts),
            backend=self.name,
            created_at=created_at,
        )


# --- ns-3 backend -------------------------------------------------------------

class Ns3Backend:
    """Stages a script into the ns-3 scratch area, builds, then runs."""

    name = "ns3"

    def __init__(self, ns3_root: str | Path | None = None):
        self.ns3_root = Path(ns3_root) if ns3_root else None

    def _check_available(self) -> Path:
        if self.ns3_root is None:
            raise BackendUnavailable("ns3", "NS3_ROOT is not configured")
        wrapper = self.ns3_root / "ns3"
        if not wrapper.exists():
            raise BackendUnavailable(
                "ns3", f"no ns3 wrapper at {wrapper}")
        return wrapper

    def execute(self, target, workdir: Path, limits: Limits, attempt: int,
                created_at: float) -> ExecutionReport:
        wrapper = self._check_available()
        if isinstance(target, str):
            program = target  # pre-existing example, run by name
        else:
            ext = "cc" if target.dialect == "cpp" else "py"
            program = f"genonet-{target.spec_digest[:12]}-{attempt}"
            script = self.ns3_root / "scratch" / f"{program}.{ext}"
            script.write_text(target.source, "utf-8")

        build = run_limited([str(wrapper), "build"], cwd=self.ns3_root,
                            timeout_s=limits.build_timeout_s,
                            memory_bytes=limits.memory_bytes)
        if build.exit_status != 0:
            report = ExecutionReport(
                attempt=attempt, phase="build", exit_status=build.exit_status,
                stdout=build.stdout, stderr=build.stderr,
                wall_time_s=build.wall_time_s,
                peak_memory_bytes=build.peak_memory_bytes,
                backend=self.name, created_at=created_at)
            raise BuildFailed(report)

        run = run_limited(
            [str(wrapper), "run", program, "--no-build",
             f"--cwd={workdir}"],
            cwd=self.ns3_root, timeout_s=limits.run_timeout_s,
            memory_bytes=limits.memory_bytes)
        artifacts = tuple(
            OutputArtifact(name=path.name, path=str(path))
            for path in sorted(Path(workdir).glob("*.xml")))
        return ExecutionReport(
            attempt=attempt, phase="run", exit_status=run.exit_status,
            stdout=run.stdout, stderr=run.stderr,
            wall_time_s=build.wall_time_s + run.wall_time_s,
            peak_memory_bytes=max(build.peak_memory_bytes,
                                  run.peak_memory_bytes),
            artifacts=artifacts, backend=self.name, created_at=created_at)


# --- service ------------------------------------------------------------------

def build_repair_request(source: str, stderr: str, dialect: str,
                         model_id: str = "default") -> LlmRequest:
    """Repair prompt carrying the current source and the full stderr."""
    user = (f"The following {dialect} ns-3 script failed to build.\n\n"
            f"Script:\n{source}\n\n"
            f"Build errors:\n{stderr}\n\n"
            "Return the corrected script.")
    return LlmRequest(
        messages=(Message("system", REPAIR_SYSTEM_PROMPT),
                  Message("user", user)),
        model_id=model_id, temperature=0.0)


def strip_code_fences(text: str) -> str:
    return _FENCE_RE.sub("", text.strip()).strip("\n") + "\n"


class ExecutionService:
    """Bounded-concurrency front for the execution backends."""

    def __init__(self, stub: StubBackend | None = None,
                 ns3: Ns3Backend | None = None,
                 workdir_root: str | Path | None = None,
                 max_sandboxes: int = DEFAULT_MAX_SANDBOXES,
                 clock=None):
        self.backends = {}
        self.backends["stub"] = stub if stub is not None else StubBackend()
        self.backends["ns3"] = ns3 if ns3 is not None else Ns3Backend()
        if workdir_root is None:
            workdir_root = tempfile.mkdtemp(prefix="genonet-sandbox-")
        self.workdir_root = Path(workdir_root)
        self._semaphore = threading.Semaphore(max_sandboxes)
        self._clock = clock
        self._counter = 0
        self._counter_lock = threading.Lock()

    def _now(self) -> float:
        return self._clock.now() if self._clock is not None else time.time()

    def _new_workdir(self, attempt: int) -> Path:
        with self._counter_lock:
            self._counter += 1
            ordinal = self._counter
        workdir = self.workdir_root / f"run-{ordinal:06d}-attempt-{attempt}"
        workdir.mkdir(parents=True, exist_ok=True)
        return workdir

    def execute(self, target, backend: str = "stub",
                limits: Limits | None = None, attempt: int = 1
                ) -> ExecutionReport:
        """Run one attempt in a dedicated working directory.

        Build-phase failures raise BuildFailed carrying the report (the
        debug loop's input); infrastructure failures raise
        BackendUnavailable / FixtureMissing / SandboxTimeout.
        """
        if backend not in self.backends:
            raise BackendUnavailable(backend, "unknown backend")
        limits = limits or Limits()
        workdir = self._new_workdir(attempt)
        with self._semaphore:
            report = self.backends[backend].execute(
                target, workdir=workdir, limits=limits, attempt=attempt,
                created_at=self._now())
        if report.phase == "build" and report.exit_status != 0:
            raise BuildFailed(report)
        return report

    def debug_loop(self, artifact: GeneratedArtifact, backend: str = "stub",
                   gateway: LlmGateway | None = None,
                   max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                   limits: Limits | None = None,
                   model_id: str = "default") -> DebugOutcome:
        """Execute; on build failure, ask the gateway for a corrected
        script, lint it, and retry.  Ends on success, lint regression, or
        attempt exhaustion; every intermediate report is retained.
        """
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        attempts: list[AttemptRecord] = []
        current = artifact
        resolved = False
        for attempt_no in range(1, max_attempts + 1):
            try:
                report = self.execute(current, backend=backend, limits=limits,
                                      attempt=attempt_no)
                attempts.append(AttemptRecord(report=report))
                resolved = report.exit_status == 0
                break
            except BuildFailed as failure:
                report = failure.report
                if attempt_no == max_attempts or gateway is None:
                    attempts.append(AttemptRecord(report=report))
                    break
                request = build_repair_request(current.source, report.stderr,
                                               current.dialect, model_id)
                prompt_text = request.messages[-1].content
                response = gateway.complete(request)
                candidate = current.with_source(
                    strip_code_fences(response.text))
                attempts.append(AttemptRecord(report=report,
                                              repair_prompt=prompt_text))
                if not lint_structure(candidate).ok:
                    logger.info("repair regressed script structure; "
                                "stopping debug loop")
                    break
                current = candidate
        return DebugOutcome(final_artifact=current, attempts=tuple(attempts),
                            resolved=resolved)


__all__ = [
    "AttemptRecord", "DebugOutcome", "ExecutionReport", "ExecutionService",
    "Limits", "Ns3Backend", "OutputArtifact", "ProcessResult", "StubBackend",
    "build_repair_request", "example_key", "lookup_keys", "run_limited",
    "sandbox_env", "source_key", "spec_key", "strip_code_fences",
]
