import re

import pytest

from genonet.codegen import (REFINABLE_SECTIONS, TEMPLATE_COVERAGE,
                             build_refinement_request, engineering_literal,
                             generate_script, lint_structure, scaffold,
                             scan_sections, section_body)
from genonet.errors import CassetteMiss, UnsupportedCombination
from genonet.gateway import CannedTransport, Cassette, LlmGateway, ProviderMode
from genonet.scenario import RawSpecDraft, normalize_units, spec_hash


def remove_lines(source: str, needle: str) -> str:
    return "\n".join(line for line in source.splitlines()
                     if needle not in line) + "\n"


class TestEngineeringLiteral:
    @pytest.mark.parametrize("value, rendered", [
        (2.8e10, "28e9"),
        (2.0e8, "200e6"),
        (3.5e9, "3.5e9"),
        (1.0e8, "100e6"),
        (5000.0, "5e3"),
        (1.0, "1"),
        (1234567.0, "1.234567e6"),
    ])
    def test_cases(self, value, rendered):
        assert engineering_literal(value) == rendered


class TestScaffold:
    def test_featured_spec_cpp_contents(self, fig2):
        artifact = scaffold(fig2, "cpp")
        source = artifact.source
        assert "28e9" in source and "200e6" in source
        assert "ueNodes.Create(100)" in source
        assert "gnbNodes.Create(1)" in source
        assert "BulkSendHelper" in source
        assert "AttachToClosestGnb" in source
        assert "UMi_StreetCanyon" in source
        assert "CellScanBeamforming" in source
        assert artifact.spec_digest == spec_hash(fig2)
        assert all(s.provenance == "scaffold"
                   for s in artifact.sections.values())

    def test_minimal_defaults_python(self):
        spec = normalize_units(RawSpecDraft())
        artifact = scaffold(spec, "python")
        assert "from ns import ns" in artifact.source
        assert "gnbNodes.Create(1)" in artifact.source
        assert "ueNodes.Create(1)" in artifact.source
        assert "ns.Simulator.Run()" in artifact.source
        assert "ns.Simulator.Destroy()" in artifact.source

    def test_unsupported_combination_names_nearest(self):
        spec = normalize_units(RawSpecDraft(helper_stack="WIFI",
                                            traffic_profile="XR",
                                            transport="TCP"))
        with pytest.raises(UnsupportedCombination) as err:
            scaffold(spec, "cpp")
        # oracle: template coverage table lookup
        assert err.value.nearest == ("WIFI", "CBR", "UDP")

    def test_uncanonical_transport_suggests_profile_pairing(self):
        spec = normalize_units(RawSpecDraft(traffic_profile="XR",
                                            transport="UDP"))
        with pytest.raises(UnsupportedCombination) as err:
            scaffold(spec, "cpp")
        assert err.value.nearest == ("NR_5GLENA", "XR", "TCP")

    def test_determinism_byte_identical(self, fig2):
        assert scaffold(fig2, "cpp").source == scaffold(fig2, "cpp").source
        assert scaffold(fig2, "python").source == \
            scaffold(fig2, "python").source

    def test_unknown_dialect_rejected(self, fig2):
        with pytest.raises(ValueError):
            scaffold(fig2, "rust")

    def test_sections_cover_disjoint_ranges(self, fig2):
        artifact = scaffold(fig2, "cpp")
        spans = sorted((s.start, s.end) for s in artifact.sections.values())
        for (a_start, a_end), (b_start, b_end) in zip(spans, spans[1:]):
            assert a_end <= b_start
        assert all(0 <= start < end <= len(artifact.source)
                   for start, end in spans)

    @pytest.mark.parametrize("combo", sorted(
        TEMPLATE_COVERAGE, key=lambda c: (c[0].value, c[1].value)))
    @pytest.mark.parametrize("dialect", ["cpp", "python"])
    def test_numeric_fidelity_all_covered_combos(self, combo, dialect):
        stack, traffic, transport = combo
        spec = normalize_units(RawSpecDraft(
            frequency="3.7 GHz", bandwidth="60 MHz", cc_count=2,
            numerology=3, gnb_count=4, ue_count=17, sim_duration="25 s",
            helper_stack=stack.value, traffic_profile=traffic.value,
            transport=transport.value))
        source = scaffold(spec, dialect).source
        for literal in ("3.7e9", "60e6", "(4)", "(17)", "25"):
            assert literal in source, (combo, dialect, literal)
        assert re.search(r"numerology = 3\b|numerology = 3;", source) \
            or "numerology = 3" in source


class TestLint:
    def test_scaffold_passes_all_checks(self, fig2):
        artifact = scaffold(fig2, "cpp")
        report = lint_structure(artifact)
        assert report.ok
        assert len(report.checks) == 9

    def test_python_dialect_has_no_namespace_check(self, fig2):
        report = lint_structure(scaffold(fig2, "python"))
        assert report.ok
        assert "namespace" not in [c.check_id for c in report.checks]

    def test_swapped_run_teardown_fails_only_that_check(self, fig2):
        artifact = scaffold(fig2, "cpp")
        swapped = artifact.source.replace(
            "    Simulator::Run();\n    Simulator::Destroy();",
            "    Simulator::Destroy();\n    Simulator::Run();")
        assert swapped != artifact.source
        report = lint_structure(artifact.with_source(swapped))
        assert report.failed_ids() == ["run-teardown"]

    def test_missing_log_component_fails_only_that_check(self, fig2):
        artifact = scaffold(fig2, "cpp")
        mutated = remove_lines(artifact.source, "NS_LOG_COMPONENT_DEFINE")
        report = lint_structure(artifact.with_source(mutated))
        assert report.failed_ids() == ["log-component"]


class TestGenerateScript:
    def refine_gateway(self, tmp_path, rules, name="refine"):
        return LlmGateway(mode=ProviderMode.RECORD,
                          cassette=Cassette(tmp_path / f"{name}.jsonl"),
                          transport=CannedTransport(rules))

    def test_scaffold_only_passes_lint(self, fig2):
        artifact = generate_script(fig2, "cpp", mode="scaffold_only")
        assert lint_structure(artifact).ok

    def test_refinement_kept_when_lint_holds(self, fig2, tmp_path):
        base = scaffold(fig2, "cpp")
        rules = []
        for section in REFINABLE_SECTIONS:
            body = section_body(base, section) \
                + "    // elaborated by the refiner\n"
            rules.append((
                lambda req, s=section: f"Section: {s}" in
                req.messages[-1].content,
                body))
        gateway = LlmGateway(mode=ProviderMode.RECORD,
                             cassette=Cassette(tmp_path / "ok.jsonl"),
                             transport=CannedTransport(rules))
        artifact = generate_script(fig2, "cpp", mode="llm_refine",
                                   gateway=gateway)
        assert lint_structure(artifact).ok
        assert artifact.rejected_sections == ()
        for section in REFINABLE_SECTIONS:
            assert artifact.sections[section].provenance == "llm"
        assert "elaborated by the refiner" in artifact.source

    def test_corrupting_refinement_rejected_scaffold_kept(self, fig2,
                                                          tmp_path):
        # the canned refiner deletes the traffic body entirely
        gateway = self.refine_gateway(
            tmp_path, [(lambda req: True, "// gutted\n")], "corrupt")
        artifact = generate_script(fig2, "cpp", mode="llm_refine",
                                   gateway=gateway)
        report = lint_structure(artifact)
        assert report.ok
        assert set(artifact.rejected_sections) == set(REFINABLE_SECTIONS)
        assert artifact.sections["traffic"].provenance == "scaffold"
        assert "BulkSendHelper" in artifact.source

    def test_empty_cassette_replay_surfaces_miss(self, fig2, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        gateway = LlmGateway(mode=ProviderMode.REPLAY, cassette=Cassette(path))
        with pytest.raises(CassetteMiss):
            generate_script(fig2, "cpp", mode="llm_refine", gateway=gateway)

    def test_refinement_requests_are_deterministic(self, fig2):
        a = build_refinement_request(spec_hash(fig2), "cpp", "traffic", "body")
        b = build_refinement_request(spec_hash(fig2), "cpp", "traffic", "body")
        from genonet.gateway import normalize_request
        assert normalize_request(a) == normalize_request(b)


class TestMarkers:
    def test_marker_grammar(self, fig2):
        artifact = scaffold(fig2, "cpp")
        assert "// @genonet:begin traffic" in artifact.source
        assert "// @genonet:end traffic" in artifact.source
        python = scaffold(fig2, "python")
        assert "# @genonet:begin traffic" in python.source

    def test_scan_sections_matches_artifact(self, fig2):
        artifact = scaffold(fig2, "cpp")
        rescan = scan_sections(artifact.source)
        assert {name: (s.start, s.end) for name, s in rescan.items()} == \
            {name: (s.start, s.end) for name, s in artifact.sections.items()}
