import json

import pytest

import genonet.schemas  # noqa: F401 - registers contracts
from genonet.errors import CassetteMiss, ContractViolation, TransportError
from genonet.gateway import (CannedTransport, Cassette, LlmGateway,
                             LlmRequest, LlmResponse, Message, ProviderMode,
                             normalize_request)


def make_request(system="You are helpful.", user="hello",
                 contract=None, temperature=0.0):
    return LlmRequest(messages=(Message("system", system),
                                Message("user", user)),
                      temperature=temperature,
                      structured_output_contract=contract)


class TestRequestValidation:
    def test_empty_messages_rejected(self):
        with pytest.raises(ValueError):
            LlmRequest(messages=())

    def test_first_message_must_be_system(self):
        with pytest.raises(ValueError):
            LlmRequest(messages=(Message("user", "hi"),))

    def test_temperature_range(self):
        with pytest.raises(ValueError):
            make_request(temperature=2.5)

    def test_structured_output_forces_temperature_zero(self):
        with pytest.raises(ValueError):
            make_request(contract="scenario-spec-v1", temperature=0.7)


class TestNormalizeRequest:
    def test_same_logical_request_same_digest(self):
        assert normalize_request(make_request()) == \
            normalize_request(make_request())

    def test_whitespace_runs_collapse(self):
        # oracle: both normalize to the single-space form by hand
        a = make_request(user="run   the\n demo ")
        b = make_request(user="run the demo")
        assert normalize_request(a) == normalize_request(b)

    def test_system_prompt_changes_digest(self):
        a = make_request(system="You are helpful.")
        b = make_request(system="You are terse.")
        assert normalize_request(a) != normalize_request(b)


class TestCassette:
    def test_record_then_replay_roundtrip(self, tmp_path):
        path = tmp_path / "case.jsonl"
        transport = CannedTransport(default_text="recorded answer")
        recorder = LlmGateway(mode=ProviderMode.RECORD,
                              cassette=Cassette(path), transport=transport)
        recorded = recorder.complete(make_request())

        replayer = LlmGateway(mode=ProviderMode.REPLAY,
                              cassette=Cassette(path))
        replayed = replayer.complete(make_request())
        assert replayed.text == recorded.text
        assert replayed.provenance == "replay"

    def test_replay_miss_raises(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        gateway = LlmGateway(mode=ProviderMode.REPLAY, cassette=Cassette(path))
        with pytest.raises(CassetteMiss):
            gateway.complete(make_request())

    def test_replay_cassette_is_read_only(self, tmp_path):
        path = tmp_path / "ro.jsonl"
        path.write_text("")
        cassette = Cassette(path)
        LlmGateway(mode=ProviderMode.REPLAY, cassette=cassette)
        with pytest.raises(PermissionError):
            cassette.append("deadbeef", make_request(), LlmResponse(text="x"))

    def test_record_mode_dedupes_network_calls(self, tmp_path):
        # oracle: instrumented transport double counts round trips
        transport = CannedTransport(default_text="once")
        gateway = LlmGateway(mode=ProviderMode.RECORD,
                             cassette=Cassette(tmp_path / "dedupe.jsonl"),
                             transport=transport)
        gateway.complete(make_request())
        gateway.complete(make_request())
        assert len(transport.calls) == 1

    def test_cassette_file_is_one_record_per_line(self, tmp_path):
        path = tmp_path / "lines.jsonl"
        gateway = LlmGateway(mode=ProviderMode.RECORD, cassette=Cassette(path),
                             transport=CannedTransport(default_text="a"))
        gateway.complete(make_request(user="one"))
        gateway.complete(make_request(user="two"))
        lines = path.read_text("utf-8").splitlines()
        assert len(lines) == 2
        for line in lines:
            record = json.loads(line)
            assert {"digest", "request", "response"} <= set(record)


class TestLiveMode:
    def test_live_without_transport_raises(self):
        gateway = LlmGateway(mode=ProviderMode.LIVE)
        with pytest.raises(TransportError):
            gateway.complete(make_request())

    def test_transport_failure_surfaces(self):
        gateway = LlmGateway(mode=ProviderMode.LIVE,
                             transport=CannedTransport())  # no rules
        with pytest.raises(TransportError):
            gateway.complete(make_request())

    def test_http_transport_timeout_maps_to_transport_error(self, monkeypatch):
        import httpx

        from genonet.gateway import HttpTransport

        def boom(*args, **kwargs):
            raise httpx.TimeoutException("timed out")

        monkeypatch.setattr(httpx, "post", boom)
        transport = HttpTransport("http://example.invalid/v1", max_retries=1)
        with pytest.raises(TransportError) as err:
            transport.send(make_request())
        assert err.value.retries == 1


class TestStructuredOutput:
    CONTRACT = "route-decision-v1"
    GOOD = json.dumps({"route": "Execute", "confidence": 1.0,
                       "rationale": "test"})

    def test_valid_response_passes(self, tmp_path):
        transport = CannedTransport(default_text=self.GOOD)
        gateway = LlmGateway(mode=ProviderMode.RECORD,
                             cassette=Cassette(tmp_path / "ok.jsonl"),
                             transport=transport)
        response = gateway.complete(make_request(contract=self.CONTRACT))
        assert json.loads(response.text)["route"] == "Execute"
        assert len(transport.calls) == 1

    def test_one_repair_attempt_then_success(self, tmp_path):
        # first call yields junk, the repair call yields valid JSON
        transport = CannedTransport(rules=[
            (lambda req: any("failed validation" in m.content
                             for m in req.messages), self.GOOD),
            (lambda req: True, "not json at all"),
        ])
        gateway = LlmGateway(mode=ProviderMode.RECORD,
                             cassette=Cassette(tmp_path / "repair.jsonl"),
                             transport=transport)
        response = gateway.complete(make_request(contract=self.CONTRACT))
        assert json.loads(response.text)["route"] == "Execute"
        assert len(transport.calls) == 2  # original + exactly one repair

    def test_contract_violation_after_single_repair(self, tmp_path):
        transport = CannedTransport(default_text="still not json")
        gateway = LlmGateway(mode=ProviderMode.RECORD,
                             cassette=Cassette(tmp_path / "fail.jsonl"),
                             transport=transport)
        with pytest.raises(ContractViolation):
            gateway.complete(make_request(contract=self.CONTRACT))
        assert len(transport.calls) == 2  # never more than one repair

    def test_fenced_json_accepted(self, tmp_path):
        fenced = f"```json\n{self.GOOD}\n```"
        gateway = LlmGateway(mode=ProviderMode.RECORD,
                             cassette=Cassette(tmp_path / "fence.jsonl"),
                             transport=CannedTransport(default_text=fenced))
        response = gateway.complete(make_request(contract=self.CONTRACT))
        assert "Execute" in response.text
