import json
import os
import stat
import time
from pathlib import Path

import psutil
import pytest

from genonet.codegen import scaffold
from genonet.errors import (BackendUnavailable, BuildFailed, FixtureMissing,
                            SandboxTimeout)
from genonet.gateway import CannedTransport, Cassette, LlmGateway, ProviderMode
from genonet.sandbox import (ExecutionService, Ns3Backend, StubBackend,
                             build_repair_request, run_limited, source_key,
                             strip_code_fences)
from genonet.runtime import packaged_fixture_dir
from genonet.util import LogicalClock


def write_bundle(root: Path, name: str, keys, exit_status=0, phase="run",
                 stdout="", stderr="", artifacts=()):
    bundle = root / name
    bundle.mkdir(parents=True)
    manifest = {"keys": keys, "phase": phase, "exit_status": exit_status,
                "wall_time_s": 1.0, "peak_memory_bytes": 1024,
                "artifacts": [{"name": n, "file": n} for n, _ in artifacts]}
    (bundle / "report.json").write_text(json.dumps(manifest), "utf-8")
    (bundle / "stdout.txt").write_text(stdout, "utf-8")
    (bundle / "stderr.txt").write_text(stderr, "utf-8")
    for file_name, content in artifacts:
        (bundle / file_name).write_text(content, "utf-8")
    return bundle


def service_with(tmp_path: Path, stub: StubBackend | None = None,
                 ns3: Ns3Backend | None = None) -> ExecutionService:
    return ExecutionService(stub=stub, ns3=ns3,
                            workdir_root=tmp_path / "work",
                            clock=LogicalClock())


class TestRunLimited:
    def test_captures_streams_and_exit(self, tmp_path):
        result = run_limited(["sh", "-c", "echo out; echo err >&2; exit 3"],
                             cwd=tmp_path, timeout_s=10)
        assert result.exit_status == 3
        assert result.stdout == "out\n"
        assert result.stderr == "err\n"
        assert result.wall_time_s < 10

    def test_timeout_kills_whole_process_tree(self, tmp_path):
        marker = "31.4159"
        with pytest.raises(SandboxTimeout) as err:
            run_limited(["sh", "-c",
                         f"echo partial; sleep {marker} & sleep {marker}"],
                        cwd=tmp_path, timeout_s=0.4)
        assert err.value.partial_report.stdout == "partial\n"
        time.sleep(0.1)
        survivors = [p for p in psutil.process_iter(["cmdline"])
                     if p.info["cmdline"] and marker in
                     " ".join(p.info["cmdline"])]
        assert survivors == []

    def test_rejects_nonpositive_timeout(self, tmp_path):
        with pytest.raises(ValueError):
            run_limited(["true"], cwd=tmp_path, timeout_s=0)


class TestStubBackend:
    def test_packaged_demo_scenario(self, tmp_path):
        service = service_with(tmp_path,
                               stub=StubBackend(packaged_fixture_dir()))
        report = service.execute("cttc-nr-demo", backend="stub")
        assert report.exit_status == 0
        assert report.phase == "run"
        names = [a.name for a in report.artifacts]
        assert "flow-monitor.xml" in names
        for artifact in report.artifacts:
            assert Path(artifact.path).exists()

    def test_unregistered_key_raises(self, tmp_path):
        service = service_with(tmp_path, stub=StubBackend())
        with pytest.raises(FixtureMissing):
            service.execute("no-such-example", backend="stub")

    def test_determinism_byte_identical(self, tmp_path):
        service = service_with(tmp_path,
                               stub=StubBackend(packaged_fixture_dir()))
        first = service.execute("cttc-nr-demo", backend="stub")
        second = service.execute("cttc-nr-demo", backend="stub")
        assert first.stdout == second.stdout
        assert first.stderr == second.stderr
        assert [a.read_text() for a in first.artifacts] == \
            [a.read_text() for a in second.artifacts]

    def test_spec_keyed_bundle_matches_generated_artifact(self, tmp_path,
                                                          fig2):
        service = service_with(tmp_path,
                               stub=StubBackend(packaged_fixture_dir()))
        artifact = scaffold(fig2, "cpp")
        report = service.execute(artifact, backend="stub")
        assert report.exit_status == 0

    def test_source_key_takes_priority_over_spec_key(self, tmp_path, fig2):
        stub = StubBackend(packaged_fixture_dir())
        artifact = scaffold(fig2, "cpp")
        bundle = write_bundle(tmp_path / "bundles", "broken",
                              keys=[source_key(artifact.source)],
                              exit_status=1, phase="build",
                              stderr="error: expected ';'")
        stub.register_bundle(bundle)
        service = service_with(tmp_path, stub=stub)
        with pytest.raises(BuildFailed) as err:
            service.execute(artifact, backend="stub")
        assert "expected ';'" in err.value.stderr


class TestNs3Backend:
    def fake_toolchain(self, tmp_path: Path, build_ok: bool) -> Path:
        """Stand-in ns3 wrapper: `build` fails or succeeds as configured;
        `run` drops a FlowMonitor file into --cwd."""
        root = tmp_path / "ns3-root"
        (root / "scratch").mkdir(parents=True)
        wrapper = root / "ns3"
        if build_ok:
            body = (
                "#!/bin/sh\n"
                "if [ \"$1\" = build ]; then echo built; exit 0; fi\n"
                "if [ \"$1\" = run ]; then\n"
                "  for arg in \"$@\"; do case $arg in --cwd=*) "
                "cd \"${arg#--cwd=}\";; esac; done\n"
                "  printf '<?xml version=\"1.0\" ?>\\n<FlowMonitor>"
                "<FlowStats></FlowStats><Ipv4FlowClassifier>"
                "</Ipv4FlowClassifier></FlowMonitor>\\n' > flow-monitor.xml\n"
                "  echo ran; exit 0\n"
                "fi\n")
        else:
            body = (
                "#!/bin/sh\n"
                "if [ \"$1\" = build ]; then\n"
                "  echo \"scratch/script.cc:12: error: 'foo' was not "
                "declared in this scope\" >&2; exit 1\n"
                "fi\n")
        wrapper.write_text(body, "utf-8")
        wrapper.chmod(wrapper.stat().st_mode | stat.S_IEXEC)
        return root

    def test_unconfigured_root_unavailable(self, tmp_path, fig2):
        service = service_with(tmp_path, ns3=Ns3Backend(None))
        with pytest.raises(BackendUnavailable):
            service.execute(scaffold(fig2, "cpp"), backend="ns3")

    def test_build_failure_carries_stderr(self, tmp_path, fig2):
        root = self.fake_toolchain(tmp_path, build_ok=False)
        service = service_with(tmp_path, ns3=Ns3Backend(root))
        with pytest.raises(BuildFailed) as err:
            service.execute(scaffold(fig2, "cpp"), backend="ns3")
        assert "was not declared" in err.value.stderr
        assert err.value.report.phase == "build"

    def test_successful_run_collects_outputs(self, tmp_path, fig2):
        root = self.fake_toolchain(tmp_path, build_ok=True)
        service = service_with(tmp_path, ns3=Ns3Backend(root))
        report = service.execute(scaffold(fig2, "cpp"), backend="ns3")
        assert report.exit_status == 0
        assert report.phase == "run"
        assert [a.name for a in report.artifacts] == ["flow-monitor.xml"]
        staged = list((root / "scratch").glob("genonet-*.cc"))
        assert len(staged) == 1

    def test_unknown_backend_rejected(self, tmp_path, fig2):
        service = service_with(tmp_path)
        with pytest.raises(BackendUnavailable):
            service.execute(scaffold(fig2, "cpp"), backend="warp9")


def fault_injected(artifact):
    """Missing semicolon on the gNB node creation line; still lints."""
    broken_source = artifact.source.replace("gnbNodes.Create(1);",
                                            "gnbNodes.Create(1)")
    assert broken_source != artifact.source
    return artifact.with_source(broken_source, provenance="scaffold")


STDERR_TEXT = ("scratch/scenario.cc:31:24: error: expected ';' before "
               "'NodeContainer'\n")


class TestDebugLoop:
    def prepare(self, tmp_path, fig2):
        """Stub serving: broken source -> build failure; anything else
        falls through to the packaged success bundle for the spec."""
        stub = StubBackend(packaged_fixture_dir())
        fixed = scaffold(fig2, "cpp")
        broken = fault_injected(fixed)
        write_bundle(tmp_path / "bundles", "broken",
                     keys=[source_key(broken.source)], exit_status=1,
                     phase="build", stderr=STDERR_TEXT)
        stub.load_directory(tmp_path / "bundles")
        service = service_with(tmp_path, stub=stub)
        gateway = LlmGateway(
            mode=ProviderMode.RECORD,
            cassette=Cassette(tmp_path / "repair.jsonl"),
            transport=CannedTransport())
        return service, gateway, broken, fixed

    def test_fault_fix_resolves_in_two_attempts(self, tmp_path, fig2):
        service, gateway, broken, fixed = self.prepare(tmp_path, fig2)
        gateway.transport.default_text = fixed.source
        outcome = service.debug_loop(broken, backend="stub", gateway=gateway)
        assert outcome.resolved
        assert len(outcome.attempts) == 2
        assert outcome.attempts[0].report.exit_status == 1
        assert outcome.attempts[1].report.exit_status == 0
        assert outcome.final_artifact.source == fixed.source
        assert STDERR_TEXT in outcome.attempts[0].repair_prompt

    def test_immediate_success_single_attempt(self, tmp_path, fig2):
        service, gateway, _, fixed = self.prepare(tmp_path, fig2)
        outcome = service.debug_loop(fixed, backend="stub", gateway=gateway)
        assert outcome.resolved
        assert len(outcome.attempts) == 1
        assert outcome.attempts[0].repair_prompt is None

    def test_exhaustion_keeps_every_report(self, tmp_path, fig2):
        service, gateway, broken, _ = self.prepare(tmp_path, fig2)
        gateway.transport.default_text = broken.source  # repair loops back
        outcome = service.debug_loop(broken, backend="stub", gateway=gateway,
                                     max_attempts=3)
        assert not outcome.resolved
        assert len(outcome.attempts) == 3
        ordinals = [rec.report.attempt for rec in outcome.attempts]
        assert ordinals == [1, 2, 3]
        repair_prompts = [rec.repair_prompt for rec in outcome.attempts
                          if rec.repair_prompt is not None]
        assert len(repair_prompts) == 2
        for prompt in repair_prompts:
            assert STDERR_TEXT in prompt
            assert broken.source in prompt

    def test_lint_regression_stops_loop(self, tmp_path, fig2):
        service, gateway, broken, _ = self.prepare(tmp_path, fig2)
        gateway.transport.default_text = "int main() { return 0; }\n"
        outcome = service.debug_loop(broken, backend="stub", gateway=gateway,
                                     max_attempts=3)
        assert not outcome.resolved
        assert len(outcome.attempts) == 1
        # the regressed candidate was discarded
        assert outcome.final_artifact.source == broken.source

    def test_repair_prompt_contains_source_and_stderr(self, fig2):
        artifact = scaffold(fig2, "cpp")
        request = build_repair_request(artifact.source, STDERR_TEXT, "cpp")
        prompt = request.messages[-1].content
        assert artifact.source in prompt
        assert STDERR_TEXT in prompt

    def test_strip_code_fences(self):
        fenced = "```cpp\nint main() {}\n```"
        assert strip_code_fences(fenced) == "int main() {}\n"
